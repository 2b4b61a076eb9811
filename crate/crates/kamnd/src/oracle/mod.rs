//! Brute-force cross-checks for the fast paths: finite-difference jets,
//! cofactor determinants and exhaustive resonance enumeration. They are
//! slow and simple on purpose, and back the `selftest` command.

mod selftest;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::hamiltonian::{EvalError, HamiltonianModel, Jet2, Point, DEFAULT_GUARD_RADIUS};

pub use selftest::{run_selftest, SelftestOptions, SelftestReport, SelftestSection};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("finite-difference stencil point {point:?} is not admissible")]
    StencilOutsideDomain { point: Vec<f64> },
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("cofactor expansion limited to d <= 4, got {0}")]
    DimensionTooLarge(usize),
    #[error("determinant of a non-square {0}x{1} matrix")]
    NotSquare(usize, usize),
}

/// Comparison of a fast-path value against its oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleDiff {
    pub quantity: String,
    pub primary: f64,
    pub oracle: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tol: f64,
    pub pass: bool,
}

impl OracleDiff {
    /// Passes when the relative error is within `tol`, or the absolute
    /// error when the oracle value has magnitude below 1.
    pub fn compare(quantity: impl Into<String>, primary: f64, oracle: f64, tol: f64) -> Self {
        let abs_err = (primary - oracle).abs();
        let rel_err = if oracle == 0.0 { abs_err } else { abs_err / oracle.abs() };
        let pass = if oracle.abs() < 1.0 { abs_err <= tol } else { rel_err <= tol };
        OracleDiff {
            quantity: quantity.into(),
            primary,
            oracle,
            abs_err,
            rel_err,
            tol,
            pass: pass && primary.is_finite() == oracle.is_finite(),
        }
    }

    /// The worst entrywise comparison of two equally sized value lists.
    pub fn worst(quantity: impl Into<String>, primary: &[f64], oracle: &[f64], tol: f64) -> Self {
        let quantity = quantity.into();
        assert_eq!(primary.len(), oracle.len());
        primary
            .iter()
            .zip(oracle)
            .map(|(&p, &o)| OracleDiff::compare(quantity.clone(), p, o, tol))
            .max_by(|a, b| a.normalized_err().total_cmp(&b.normalized_err()))
            .unwrap_or_else(|| OracleDiff::compare(quantity, 0.0, 0.0, tol))
    }

    fn normalized_err(&self) -> f64 {
        if self.oracle.abs() < 1.0 {
            self.abs_err
        } else {
            self.rel_err
        }
    }
}

/// Finite-difference steps for gradient and Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdSteps {
    pub grad: f64,
    pub hess: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps { grad: 1e-5, hess: 1e-4 }
    }
}

impl FdSteps {
    pub fn uniform(h: f64) -> Self {
        FdSteps { grad: h, hess: h }
    }
}

fn eval_at(model: &HamiltonianModel, x: &[f64]) -> Result<f64, OracleError> {
    if !model.is_admissible(x, DEFAULT_GUARD_RADIUS) {
        return Err(OracleError::StencilOutsideDomain { point: x.to_vec() });
    }
    Ok(model.eval_value(x)?)
}

/// Central-difference jet with the same step for gradient and Hessian.
pub fn fd_jet2(model: &HamiltonianModel, p: &Point, h: f64) -> Result<Jet2, OracleError> {
    fd_jet2_with(model, p, FdSteps::uniform(h))
}

/// Central-difference jet: gradient from the 2-point stencil, Hessian
/// diagonal from the 3-point stencil and off-diagonal entries from the
/// 4-point mixed stencil; all O(h²).
pub fn fd_jet2_with(model: &HamiltonianModel, p: &Point, steps: FdSteps) -> Result<Jet2, OracleError> {
    let d = model.dim;
    let x = &p.coords;
    let f0 = eval_at(model, x)?;
    let shifted = |pairs: &[(usize, f64)]| {
        let mut y = x.clone();
        for &(i, dx) in pairs {
            y[i] += dx;
        }
        eval_at(model, &y)
    };
    let hg = steps.grad;
    let mut grad = DVector::zeros(d);
    for i in 0..d {
        grad[i] = (shifted(&[(i, hg)])? - shifted(&[(i, -hg)])?) / (2.0 * hg);
    }
    let h = steps.hess;
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        hess[(i, i)] = (shifted(&[(i, h)])? - 2.0 * f0 + shifted(&[(i, -h)])?) / (h * h);
        for j in 0..i {
            let v = (shifted(&[(i, h), (j, h)])? - shifted(&[(i, h), (j, -h)])? - shifted(&[(i, -h), (j, h)])?
                + shifted(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(Jet2::new(f0, grad, hess))
}

/// Determinant by cofactor expansion along the first row, `d <= 4`.
pub fn cofactor_det(m: &DMatrix<f64>) -> Result<f64, OracleError> {
    if !m.is_square() {
        return Err(OracleError::NotSquare(m.nrows(), m.ncols()));
    }
    if m.nrows() > 4 {
        return Err(OracleError::DimensionTooLarge(m.nrows()));
    }
    Ok(expand(m))
}

fn expand(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 1.0,
        1 => m[(0, 0)],
        n => (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * expand(&m.clone().remove_row(0).remove_column(j))
            })
            .sum(),
    }
}

/// Adjugate by cofactors, `d <= 4`.
pub fn adjugate(m: &DMatrix<f64>) -> Result<DMatrix<f64>, OracleError> {
    cofactor_det(m)?;
    let n = m.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        // adj(M)_ij = (-1)^(i+j) det(M without row j, column i)
        let minor = m.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * expand(&minor)
    }))
}

/// `-∇Fᵀ adj(F'') ∇F`, which equals the bordered determinant.
pub fn bordered_det_via_adjugate(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Result<f64, OracleError> {
    let adj = adjugate(hess)?;
    Ok(-(grad.transpose() * adj * grad)[(0, 0)])
}

/// Every nonzero `k` with `|k|∞ <= max_norm` (not only primitive ones)
/// passing the resonance test, in lexicographic order.
pub fn exhaustive_resonance(omega: &[f64], max_norm: i64, res_tol: f64) -> Vec<Vec<i64>> {
    let d = omega.len();
    let wn = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    let side = (2 * max_norm + 1) as usize;
    let mut out = Vec::new();
    for idx in 0..side.pow(d as u32) {
        let mut rem = idx;
        let mut k = vec![0i64; d];
        for a in (0..d).rev() {
            k[a] = (rem % side) as i64 - max_norm;
            rem /= side;
        }
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        let dot: f64 = k.iter().zip(omega).map(|(&a, &b)| a as f64 * b).sum();
        let kn = k.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        if dot.abs() <= res_tol * kn * wn {
            out.push(k);
        }
    }
    out
}

/// Rank over the rationals by Gaussian elimination on exact fractions.
pub fn rational_rank(vectors: &[Vec<i64>]) -> usize {
    let Some(d) = vectors.first().map(Vec::len) else {
        return 0;
    };
    let mut rows: Vec<Vec<BigRational>> = vectors
        .iter()
        .map(|v| v.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect())
        .collect();
    let mut rank = 0;
    for col in 0..d {
        let Some(piv) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, piv);
        let inv = BigRational::one() / rows[rank][col].clone();
        let pivot_row: Vec<BigRational> = rows[rank].iter().map(|x| x * &inv).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, p) in row[col..d].iter_mut().zip(&pivot_row[col..d]) {
                    *x -= &f * p;
                }
            }
        }
        rows[rank] = pivot_row;
        rank += 1;
    }
    rank
}

/// Whether two integer vector families span the same rational subspace.
pub fn same_span(a: &[Vec<i64>], b: &[Vec<i64>]) -> bool {
    let ra = rational_rank(a);
    let rb = rational_rank(b);
    let joint: Vec<Vec<i64>> = a.iter().chain(b).cloned().collect();
    ra == rb && rational_rank(&joint) == ra
}
