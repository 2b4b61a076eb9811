//! Direct forms of the conditions that the main predicates compute through
//! an equivalence. They are the second route used by the hierarchy checks.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{balanced, check_finite, ConditionError, ConditionId, ConditionVerdict, ToleranceConfig};
use crate::hamiltonian::Jet2;
use crate::linalg;

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Turning frequencies as stated: `ξ ↦ [∇F(ξ)]` is a submersion into
/// projective space, i.e. `(I - ĝĝᵀ) F''` has rank `d - 1`.
pub fn turning_frequencies_projective(
    jet: &Jet2,
    tol: &ToleranceConfig,
) -> Result<ConditionVerdict, ConditionError> {
    check_finite(jet)?;
    let d = jet.dim();
    if jet.grad.iter().all(|&g| g == 0.0) {
        return Err(ConditionError::ZeroFrequency);
    }
    let (hess, grad) = balanced(jet);
    let ghat = &grad / grad.norm();
    let proj = DMatrix::identity(d, d) - &ghat * ghat.transpose();
    let m = proj * &hess;
    let sv = linalg::singular_values(&m);
    let scale = frobenius(&linalg::hstack_grad(&hess, &grad));
    // the image of a projective map has dimension at most d - 1
    let margin = if d == 1 { 1.0 } else { sv[d - 2] / scale };
    let raw = BTreeMap::from([
        ("sigma_submersion".to_string(), if d == 1 { 0.0 } else { sv[d - 2] }),
        ("scale".to_string(), scale),
    ]);
    Ok(ConditionVerdict::from_margin(
        ConditionId::TurningFrequencies,
        margin,
        tol.rank_rel,
        raw,
        *tol,
    ))
}

/// Regular resonant set as stated: for every `X ≠ 0` with `Ω_X = ∇F·X = 0`
/// the differential `dΩ_X = F''X` is nonzero. Equivalently `F''` is
/// injective on `ker ∇Fᵀ`.
pub fn regular_resonant_direct(
    jet: &Jet2,
    tol: &ToleranceConfig,
) -> Result<ConditionVerdict, ConditionError> {
    check_finite(jet)?;
    let (hess, grad) = balanced(jet);
    let basis = linalg::orthogonal_complement(&grad);
    let scale = frobenius(&linalg::vstack_grad(&hess, &grad));
    let (sigma, margin) = if basis.ncols() == 0 {
        (0.0, 1.0)
    } else {
        let dm = &hess * &basis;
        let sv = linalg::singular_values(&dm);
        let s = sv[basis.ncols() - 1];
        (s, if scale > 0.0 { s / scale } else { 0.0 })
    };
    let raw = BTreeMap::from([
        ("sigma_min_dOmega".to_string(), sigma),
        ("kernel_dim".to_string(), basis.ncols() as f64),
        ("scale".to_string(), scale),
    ]);
    Ok(ConditionVerdict::from_margin(
        ConditionId::RegularResonantSet,
        margin,
        tol.rank_rel,
        raw,
        *tol,
    ))
}

/// Iso-energetic turning frequencies as stated: on the energy level
/// through the point, `[∇F]` is a local diffeomorphism, i.e. the Hessian
/// restricted to `∇F⊥` is invertible. The restricted determinant equals
/// `-bordered_det / |∇F|²`, so it is reported on the bordered scale.
pub fn iso_energetic_restricted(
    jet: &Jet2,
    tol: &ToleranceConfig,
) -> Result<ConditionVerdict, ConditionError> {
    check_finite(jet)?;
    let g2 = jet.grad.norm_squared();
    let bordered = linalg::bordered(&jet.hess, &jet.grad);
    let scale = linalg::hadamard_scale(&bordered);
    let restricted_det = if g2 == 0.0 {
        0.0
    } else {
        let b = linalg::orthogonal_complement(&jet.grad);
        let a = b.transpose() * &jet.hess * &b;
        linalg::lu_det(&a)
    };
    let value = -g2 * restricted_det;
    let raw = BTreeMap::from([
        ("restricted_det".to_string(), restricted_det),
        ("bordered_det_via_restriction".to_string(), value),
        ("scale".to_string(), scale),
    ]);
    Ok(ConditionVerdict::from_margin(
        ConditionId::IsoEnergeticTurningFrequencies,
        value.abs() / scale,
        tol.det_rel,
        raw,
        *tol,
    ))
}
