use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{ConditionError, ConditionId, ConditionVerdict, ToleranceConfig};
use crate::hamiltonian::{HamiltonianModel, Region};
use crate::linalg;
use crate::sampling::{sample_points, Strategy};

/// Rüssmann on a region: the frequency-map image over `region` is not
/// contained in a hyperplane through the origin.
///
/// Gradients at `n_samples` low-discrepancy points are stacked into an
/// `n×d` matrix and the verdict is `σ_d > russmann_rel·σ_1`. A `holds`
/// certifies the sampled region at that tolerance; a `fails` is evidence
/// of degeneracy, not a proof.
pub fn russmann_region(
    model: &HamiltonianModel,
    region: &Region,
    n_samples: usize,
    tol: &ToleranceConfig,
    seed: u64,
) -> Result<ConditionVerdict, ConditionError> {
    if region.dim() != model.dim {
        return Err(ConditionError::DimensionMismatch {
            expected: model.dim,
            got: region.dim(),
        });
    }
    if n_samples < model.dim {
        return Err(ConditionError::TooFewSamples {
            needed: model.dim,
            got: n_samples,
        });
    }
    let pts = sample_points(model, region, n_samples, Strategy::LowDiscrepancy, seed)?;
    let grads = pts
        .iter()
        .map(|p| model.eval_grad(&p.coords))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<f64>> = grads.iter().map(|g| g.iter().copied().collect()).collect();
    Ok(russmann_from_gradients(&rows, model.dim, tol))
}

/// Rüssmann verdict from already-evaluated gradients (one per row).
pub fn russmann_from_gradients(grads: &[Vec<f64>], dim: usize, tol: &ToleranceConfig) -> ConditionVerdict {
    let m = DMatrix::from_fn(grads.len(), dim, |i, j| grads[i][j]);
    let sv = linalg::singular_values(&m);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = if sv.len() >= dim { sv[dim - 1] } else { 0.0 };
    let margin = if sigma_max > 0.0 { sigma_min / sigma_max } else { 0.0 };
    let raw = BTreeMap::from([
        ("sigma_min".to_string(), sigma_min),
        ("sigma_max".to_string(), sigma_max),
        ("n_samples".to_string(), grads.len() as f64),
    ]);
    ConditionVerdict::from_margin(ConditionId::Russmann, margin, tol.russmann_rel, raw, *tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{builtin, BuiltinParams};

    #[test]
    fn quartic_square_is_russmann() {
        let q = builtin("quartic", &BuiltinParams::default()).unwrap();
        let v = russmann_region(&q, &Region::cube(2, -1.0, 1.0), 256, &ToleranceConfig::default(), 1).unwrap();
        assert!(v.holds);
        assert!(v.margin > 1e-3);
    }

    #[test]
    fn constant_frequencies_fail() {
        let l = builtin("linear", &BuiltinParams::omega(vec![1.0, 1.0])).unwrap();
        let v = russmann_region(&l, &Region::cube(2, -1.0, 1.0), 64, &ToleranceConfig::default(), 3).unwrap();
        assert!(!v.holds);
        assert!(!v.marginal);
    }

    #[test]
    fn quadratic_box_corners_have_full_rank() {
        // the four corner gradients of [1,2]² are the corners themselves
        let corners = vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 1.0], vec![2.0, 2.0]];
        let v = russmann_from_gradients(&corners, 2, &ToleranceConfig::default());
        assert!(v.holds);
        let q = builtin("quadratic", &BuiltinParams::default()).unwrap();
        let v = russmann_region(&q, &Region::cube(2, 1.0, 2.0), 32, &ToleranceConfig::default(), 0).unwrap();
        assert!(v.holds);
    }

    #[test]
    fn argument_errors() {
        let q = builtin("quadratic", &BuiltinParams::default()).unwrap();
        let t = ToleranceConfig::default();
        assert!(matches!(
            russmann_region(&q, &Region::cube(2, 1.0, 2.0), 1, &t, 0),
            Err(ConditionError::TooFewSamples { .. })
        ));
        assert!(matches!(
            russmann_region(&q, &Region::cube(3, 1.0, 2.0), 10, &t, 0),
            Err(ConditionError::DimensionMismatch { .. })
        ));
        let m = builtin("mixed", &BuiltinParams::default()).unwrap();
        let thin = Region::new(vec![[0.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(russmann_region(&m, &thin, 4, &t, 0), Err(ConditionError::Sampling(_))));
    }
}
