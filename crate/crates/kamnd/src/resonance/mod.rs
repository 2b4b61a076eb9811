//! Integer resonances of the frequency map.
//!
//! A torus with frequency vector `ω = ∇F(ξ)` is `k`-resonant when
//! `k·ω = 0`; numerically we use the scale-invariant test
//! `|k·ω| <= res_tol·|k|·|ω|`. Enumeration is a brute-force scan of the
//! primitive vectors with `|k|∞ <= max_norm`, so "ergodic" always means
//! "no resonance up to `max_norm`".

mod density;
mod flow;
mod interior;
mod sigma;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{EvalError, HamiltonianModel, Jet2, Point};
use crate::linalg::IntegerEchelon;

pub use density::{ergodic_density_probe, DensityProbe};
pub use flow::{flow_vs_lattice_check, linear_flow, torus_cell_coverage, FlowCheck, COVERAGE_CELLS_PER_AXIS};
pub use interior::empty_interior_scan;
pub(crate) use sigma::marching_squares;
pub use sigma::{extract_sigma, extract_sigma_from_gradients, gradient_grid, omega_grid, SigmaSet};

pub const DEFAULT_RES_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResonanceError {
    #[error("resonance vector must be nonzero")]
    Zero,
    #[error("resonance vector {0:?} is not primitive")]
    NotPrimitive(Vec<i64>),
    #[error("resonance vector {0:?} is not sign-canonical (first nonzero entry must be positive)")]
    NotCanonical(Vec<i64>),
}

/// Primitive, sign-canonical integer vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResonanceVector {
    k: Vec<i64>,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a as i64
}

impl ResonanceVector {
    pub fn new(k: Vec<i64>) -> Result<Self, ResonanceError> {
        let g = k.iter().fold(0, |g, &x| gcd(g, x));
        match k.iter().find(|&&x| x != 0) {
            None => Err(ResonanceError::Zero),
            Some(_) if g != 1 => Err(ResonanceError::NotPrimitive(k)),
            Some(&first) if first < 0 => Err(ResonanceError::NotCanonical(k)),
            Some(_) => Ok(ResonanceVector { k }),
        }
    }

    /// The canonical primitive representative of the line through `k`.
    pub fn canonical(k: &[i64]) -> Result<Self, ResonanceError> {
        let g = k.iter().fold(0, |g, &x| gcd(g, x));
        if g == 0 {
            return Err(ResonanceError::Zero);
        }
        let first = k.iter().find(|&&x| x != 0).copied().unwrap_or(1);
        let s = if first < 0 { -1 } else { 1 };
        Ok(ResonanceVector {
            k: k.iter().map(|&x| s * x / g).collect(),
        })
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.k
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn sup_norm(&self) -> i64 {
        self.k.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn norm2(&self) -> f64 {
        self.k.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.k.iter().zip(v).map(|(&a, &b)| a as f64 * b).sum()
    }
}

impl fmt::Display for ResonanceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.k.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// All primitive sign-canonical `k ∈ Z^d` with `|k|∞ <= max_norm`, in
/// lexicographic order.
pub fn primitive_vectors(d: usize, max_norm: i64) -> Vec<ResonanceVector> {
    if d == 0 || max_norm < 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = vec![-max_norm; d];
    loop {
        if let Ok(v) = ResonanceVector::new(cur.clone()) {
            out.push(v);
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < max_norm {
                cur[axis] += 1;
                break;
            }
            cur[axis] = -max_norm;
        }
    }
}

/// Resonance function `Ω_k = ∇F·k` at a jet.
pub fn omega_k(jet: &Jet2, k: &ResonanceVector) -> f64 {
    k.dot(jet.grad.as_slice())
}

/// Scale-invariant resonance test `|k·ω| <= res_tol·|k|₂·|ω|₂`.
pub fn is_resonant(k: &ResonanceVector, omega: &[f64], res_tol: f64) -> bool {
    let wn = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    k.dot(omega).abs() <= res_tol * k.norm2() * wn
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TorusKind {
    Ergodic,
    Resonant,
    Periodic,
}

/// Classification of an invariant torus by its resonance order `r`, the
/// rank of the lattice of resonance vectors found up to `max_norm`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusClass {
    pub kind: TorusKind,
    pub order: usize,
    pub witnesses: Vec<ResonanceVector>,
    /// ω = 0 (a critical point of F), or a full-rank resonance lattice.
    pub degenerate: bool,
    pub max_norm: i64,
    pub res_tol: f64,
}

/// Precomputed primitive vectors, ordered by sup norm then lexicographically,
/// so witnesses are the shortest resonances available.
#[derive(Debug, Clone)]
pub struct ResonanceScanner {
    dim: usize,
    max_norm: i64,
    vectors: Vec<ResonanceVector>,
}

impl ResonanceScanner {
    pub fn new(dim: usize, max_norm: i64) -> Self {
        let mut vectors = primitive_vectors(dim, max_norm);
        vectors.sort_by(|a, b| a.sup_norm().cmp(&b.sup_norm()).then_with(|| a.cmp(b)));
        ResonanceScanner { dim, max_norm, vectors }
    }

    pub fn vectors(&self) -> &[ResonanceVector] {
        &self.vectors
    }

    pub fn max_norm(&self) -> i64 {
        self.max_norm
    }

    /// All enumerated `k` resonant with `omega`.
    pub fn resonances(&self, omega: &[f64], res_tol: f64) -> Vec<&ResonanceVector> {
        self.vectors.iter().filter(|k| is_resonant(k, omega, res_tol)).collect()
    }

    pub fn classify(&self, omega: &[f64], res_tol: f64) -> TorusClass {
        let d = self.dim;
        let max_order = d.saturating_sub(1);
        if omega.iter().all(|&w| w == 0.0) {
            let witnesses = (1..d)
                .map(|i| {
                    let mut e = vec![0; d];
                    e[i] = 1;
                    ResonanceVector { k: e }
                })
                .collect();
            return TorusClass {
                kind: TorusKind::Periodic,
                order: max_order,
                witnesses,
                degenerate: true,
                max_norm: self.max_norm,
                res_tol,
            };
        }
        let mut basis = IntegerEchelon::new();
        let mut witnesses = Vec::new();
        let mut degenerate = false;
        for k in self.resonances(omega, res_tol) {
            if basis.insert(k.as_slice()) {
                if witnesses.len() == max_order {
                    degenerate = true;
                    break;
                }
                witnesses.push(k.clone());
            }
        }
        let order = witnesses.len();
        let kind = if order == 0 {
            TorusKind::Ergodic
        } else if order == max_order {
            TorusKind::Periodic
        } else {
            TorusKind::Resonant
        };
        TorusClass {
            kind,
            order,
            witnesses,
            degenerate,
            max_norm: self.max_norm,
            res_tol,
        }
    }
}

/// Classify the torus over `p` by the resonances of `ω = ∇F(p)`.
pub fn classify_torus(
    model: &HamiltonianModel,
    p: &Point,
    max_norm: i64,
    res_tol: f64,
) -> Result<TorusClass, EvalError> {
    let omega = model.eval_grad(&p.coords)?;
    Ok(ResonanceScanner::new(model.dim, max_norm).classify(omega.as_slice(), res_tol))
}
