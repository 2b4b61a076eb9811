use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{ResonanceScanner, TorusKind};
use crate::hamiltonian::{HamiltonianModel, Region, DEFAULT_GUARD_RADIUS};
use crate::sampling::{substream, uniform_in_ball};

/// Ball radius relative to the region diameter.
const BALL_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProbe {
    /// Fraction of balls containing at least one ergodic torus.
    pub fraction: f64,
    pub balls_with_ergodic: usize,
    pub n_balls: usize,
    pub points_per_ball: usize,
    pub radius: f64,
    /// Balls in which no admissible point could be drawn.
    pub empty_balls: usize,
    pub max_norm: i64,
    pub seed: u64,
}

/// Probe density of ergodic tori: draw `n_balls` small balls in `region`
/// and count those holding an ergodic torus among `points_per_ball`
/// random points. Each ball uses its own random stream, so the result
/// does not depend on the thread count.
pub fn ergodic_density_probe(
    model: &HamiltonianModel,
    region: &Region,
    max_norm: i64,
    n_balls: usize,
    points_per_ball: usize,
    res_tol: f64,
    seed: u64,
) -> DensityProbe {
    let scanner = ResonanceScanner::new(model.dim, max_norm);
    let radius = BALL_FRACTION * region.diameter();
    let outcomes: Vec<Option<bool>> = (0..n_balls as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let u: Vec<f64> = (0..region.dim()).map(|_| rng.random::<f64>()).collect();
            let centre = region.from_unit(&u);
            let mut drawn = 0;
            let mut attempts = 0;
            while drawn < points_per_ball && attempts < 100 * points_per_ball.max(1) {
                attempts += 1;
                let x = uniform_in_ball(&mut rng, &centre, radius);
                if !region.contains(&x) || !model.is_admissible(&x, DEFAULT_GUARD_RADIUS) {
                    continue;
                }
                drawn += 1;
                if let Ok(g) = model.eval_grad(&x) {
                    if scanner.classify(g.as_slice(), res_tol).kind == TorusKind::Ergodic {
                        return Some(true);
                    }
                }
            }
            if drawn == 0 {
                None
            } else {
                Some(false)
            }
        })
        .collect();
    let balls_with_ergodic = outcomes.iter().filter(|o| **o == Some(true)).count();
    let empty_balls = outcomes.iter().filter(|o| o.is_none()).count();
    DensityProbe {
        fraction: if n_balls == 0 {
            0.0
        } else {
            balls_with_ergodic as f64 / n_balls as f64
        },
        balls_with_ergodic,
        n_balls,
        points_per_ball,
        radius,
        empty_balls,
        max_norm,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{builtin, BuiltinParams};

    #[test]
    fn nondegenerate_model_is_dense() {
        let q = builtin("quadratic", &BuiltinParams::default()).unwrap();
        let p = ergodic_density_probe(&q, &Region::cube(2, 1.0, 2.0), 10, 50, 5, 1e-9, 3);
        assert_eq!(p.fraction, 1.0);
        assert_eq!(p.empty_balls, 0);
    }

    #[test]
    fn resonant_linear_model_has_no_ergodic_tori() {
        let l = builtin("linear", &BuiltinParams::omega(vec![1.0, 2.0])).unwrap();
        let p = ergodic_density_probe(&l, &Region::cube(2, -1.0, 1.0), 5, 20, 5, 1e-9, 0);
        assert_eq!(p.fraction, 0.0);
    }

    #[test]
    fn probe_is_reproducible() {
        let q = builtin("quartic", &BuiltinParams::default()).unwrap();
        let r = Region::cube(2, -1.0, 1.0);
        let a = ergodic_density_probe(&q, &r, 6, 40, 4, 1e-9, 11);
        let b = ergodic_density_probe(&q, &r, 6, 40, 4, 1e-9, 11);
        assert_eq!(a, b);
    }
}
