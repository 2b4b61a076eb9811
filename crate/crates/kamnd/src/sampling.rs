//! Deterministic point samplers over boxes of action space.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{HamiltonianModel, Point, Region, DEFAULT_GUARD_RADIUS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("no admissible points found in region {region} after {attempts} attempts")]
    NoAdmissiblePoints { region: String, attempts: usize },
    #[error("region {region} is not contained in the model domain {domain}")]
    NotInDomain { region: String, domain: String },
    #[error("region has dimension {got}, model has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample count must be positive")]
    ZeroCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uniform,
    LowDiscrepancy,
    Grid,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Uniform => "uniform",
            Strategy::LowDiscrepancy => "low_discrepancy",
            Strategy::Grid => "grid",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Strategy::Uniform),
            "low_discrepancy" | "low-discrepancy" | "halton" => Ok(Strategy::LowDiscrepancy),
            "grid" => Ok(Strategy::Grid),
            other => Err(format!("unknown sampling strategy `{other}`")),
        }
    }
}

/// Random stream `stream` of `seed`. Streams are independent, so work
/// split by index draws the same numbers regardless of scheduling.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

fn nth_prime(k: usize) -> u64 {
    if k < PRIMES.len() {
        return PRIMES[k];
    }
    let mut count = PRIMES.len();
    let mut c = PRIMES[PRIMES.len() - 1] + 2;
    loop {
        if (2..).take_while(|p| p * p <= c).all(|p| !c.is_multiple_of(p)) {
            if count == k {
                return c;
            }
            count += 1;
        }
        c += 2;
    }
}

/// Halton sequence with a seeded Cranley–Patterson shift.
pub struct Halton {
    bases: Vec<u64>,
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = substream(seed, u64::MAX);
        Halton {
            bases: (0..dim).map(nth_prime).collect(),
            shift: (0..dim).map(|_| rng.random::<f64>()).collect(),
            index: 1,
        }
    }

    pub fn next_unit(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.bases
            .iter()
            .zip(&self.shift)
            .map(|(&b, &s)| {
                let v = radical_inverse(i, b) + s;
                v - v.floor()
            })
            .collect()
    }
}

fn check_region(model: &HamiltonianModel, region: &Region) -> Result<(), SamplingError> {
    if region.dim() != model.dim {
        return Err(SamplingError::DimensionMismatch {
            expected: model.dim,
            got: region.dim(),
        });
    }
    if !region.is_subset_of(&model.domain) {
        return Err(SamplingError::NotInDomain {
            region: region.to_string(),
            domain: model.domain.to_string(),
        });
    }
    Ok(())
}

/// `n` admissible points of `region` with the default guard radius.
pub fn sample_points(
    model: &HamiltonianModel,
    region: &Region,
    n: usize,
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<Point>, SamplingError> {
    sample_points_with_guard(model, region, n, strategy, seed, DEFAULT_GUARD_RADIUS)
}

pub fn sample_points_with_guard(
    model: &HamiltonianModel,
    region: &Region,
    n: usize,
    strategy: Strategy,
    seed: u64,
    guard: f64,
) -> Result<Vec<Point>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroCount);
    }
    check_region(model, region)?;
    let d = region.dim();
    let max_attempts = 1000 * n + 1000;
    let mut out = Vec::with_capacity(n);
    let fail = |attempts| SamplingError::NoAdmissiblePoints {
        region: region.to_string(),
        attempts,
    };
    match strategy {
        Strategy::Uniform => {
            let mut rng = substream(seed, 0);
            let mut attempts = 0;
            while out.len() < n {
                if attempts == max_attempts {
                    return Err(fail(attempts));
                }
                attempts += 1;
                let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let x = region.from_unit(&u);
                if model.is_admissible(&x, guard) {
                    out.push(Point::new(x));
                }
            }
        }
        Strategy::LowDiscrepancy => {
            let mut seq = Halton::new(d, seed);
            let mut attempts = 0;
            while out.len() < n {
                if attempts == max_attempts {
                    return Err(fail(attempts));
                }
                attempts += 1;
                let x = region.from_unit(&seq.next_unit());
                if model.is_admissible(&x, guard) {
                    out.push(Point::new(x));
                }
            }
        }
        Strategy::Grid => {
            // cell-centred grid, refined until it holds n admissible points
            let mut m = (n as f64).powf(1.0 / d as f64).ceil().max(1.0) as usize;
            while (m as f64).powi(d as i32) < n as f64 {
                m += 1;
            }
            loop {
                out.clear();
                let total = m.pow(d as u32);
                for idx in 0..total {
                    let mut rem = idx;
                    let mut u = vec![0.0; d];
                    for axis in (0..d).rev() {
                        u[axis] = ((rem % m) as f64 + 0.5) / m as f64;
                        rem /= m;
                    }
                    let x = region.from_unit(&u);
                    if model.is_admissible(&x, guard) {
                        out.push(Point::new(x));
                        if out.len() == n {
                            return Ok(out);
                        }
                    }
                }
                if total > max_attempts {
                    return Err(fail(total));
                }
                m += 1;
            }
        }
    }
    Ok(out)
}

/// Uniform point in the ball of `radius` around `center`, by rejection
/// from the enclosing cube.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    loop {
        let u: Vec<f64> = center.iter().map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        if u.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return center.iter().zip(&u).map(|(c, t)| c + radius * t).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{builtin, BuiltinParams};

    #[test]
    fn grid_points_are_cell_centres() {
        let q = builtin("quadratic", &BuiltinParams::default()).unwrap();
        let pts = sample_points(&q, &Region::cube(2, 1.0, 2.0), 4, Strategy::Grid, 0).unwrap();
        let coords: Vec<Vec<f64>> = pts.into_iter().map(|p| p.coords).collect();
        assert_eq!(
            coords,
            vec![vec![1.25, 1.25], vec![1.25, 1.75], vec![1.75, 1.25], vec![1.75, 1.75]]
        );
    }

    #[test]
    fn exclusion_guard_is_respected() {
        let m = builtin("norm", &BuiltinParams::default()).unwrap();
        let region = Region::cube(2, -1e-5, 1e-5);
        let pts = sample_points(&m, &region, 100, Strategy::Uniform, 7).unwrap();
        assert_eq!(pts.len(), 100);
        for p in &pts {
            let r = (p.coords[0].powi(2) + p.coords[1].powi(2)).sqrt();
            assert!(r >= DEFAULT_GUARD_RADIUS);
        }
    }

    #[test]
    fn fully_excluded_region_is_an_error() {
        let m = builtin("mixed", &BuiltinParams::default()).unwrap();
        let region = Region::new(vec![[0.0, 0.0], [0.0, 1.0]]).unwrap();
        for s in [Strategy::Uniform, Strategy::LowDiscrepancy, Strategy::Grid] {
            assert!(matches!(
                sample_points(&m, &region, 3, s, 1),
                Err(SamplingError::NoAdmissiblePoints { .. })
            ));
        }
    }

    #[test]
    fn region_outside_domain_is_rejected() {
        let m = builtin("mixed", &BuiltinParams::default()).unwrap();
        let region = Region::new(vec![[-1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            sample_points(&m, &region, 3, Strategy::Uniform, 1),
            Err(SamplingError::NotInDomain { .. })
        ));
    }

    #[test]
    fn samplers_are_reproducible() {
        let q = builtin("quartic", &BuiltinParams::default()).unwrap();
        let r = Region::cube(2, -1.0, 1.0);
        for s in [Strategy::Uniform, Strategy::LowDiscrepancy] {
            let a = sample_points(&q, &r, 50, s, 1).unwrap();
            let b = sample_points(&q, &r, 50, s, 1).unwrap();
            let c = sample_points(&q, &r, 50, s, 2).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn radical_inverse_values() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
        assert_eq!(nth_prime(16), 59);
        assert_eq!(nth_prime(17), 61);
    }
}
