//! Small dense linear algebra used by the condition predicates.
//!
//! Singular values come from nalgebra; determinants use our own LU so the
//! pivoting strategy is fixed and the cofactor oracle has a clear target.

use nalgebra::{DMatrix, DVector};

/// Determinant by LU factorization with partial pivoting.
pub fn lu_det(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap_rows(piv, col);
            det = -det;
        }
        let p = a[(col, col)];
        det *= p;
        for r in col + 1..n {
            let f = a[(r, col)] / p;
            if f != 0.0 {
                for c in col + 1..n {
                    let v = a[(col, c)];
                    a[(r, c)] -= f * v;
                }
            }
        }
    }
    det
}

/// Product of the Euclidean row norms (Hadamard bound on `|det|`), or 1
/// when that product is 0.
pub fn hadamard_scale(m: &DMatrix<f64>) -> f64 {
    let p: f64 = m.row_iter().map(|r| r.norm()).product();
    if p == 0.0 || !p.is_finite() {
        1.0
    } else {
        p
    }
}

/// Singular values in non-increasing order. Wide matrices are transposed
/// first, so `M` and `Mᵀ` get bit-identical results.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let sv = if m.nrows() < m.ncols() {
        m.transpose().singular_values()
    } else {
        m.singular_values()
    };
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values strictly above `rel * σ_max`.
pub fn numerical_rank(sv: &[f64], rel: f64) -> usize {
    match sv.first() {
        Some(&s1) if s1 > 0.0 => sv.iter().filter(|&&s| s > rel * s1).count(),
        _ => 0,
    }
}

const EQUILIBRATION_PASSES: usize = 8;

/// Diagonal scaling `s` making the rows of `S·M·S` comparable in size
/// (symmetric Ruiz iteration in the max norm). Factors are powers of two,
/// so the scaling is exact in floating point; zero rows keep factor 1.
pub fn symmetric_equilibration(m: &DMatrix<f64>) -> DVector<f64> {
    assert!(m.is_square(), "symmetric equilibration of a non-square matrix");
    let n = m.nrows();
    let mut s = DVector::from_element(n, 1.0);
    let mut a = m.clone();
    for _ in 0..EQUILIBRATION_PASSES {
        let step: Vec<f64> = (0..n)
            .map(|i| {
                let r = a.row(i).amax();
                if r > 0.0 && r.is_finite() {
                    (-(r.log2() / 2.0).round()).exp2()
                } else {
                    1.0
                }
            })
            .collect();
        if step.iter().all(|&f| f == 1.0) {
            break;
        }
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] *= step[i] * step[j];
            }
            s[i] *= step[i];
        }
    }
    s
}

/// Bordered matrix `[[H, g], [gᵀ, 0]]`.
pub fn bordered(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DMatrix<f64> {
    let d = grad.len();
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(hess);
    for i in 0..d {
        m[(i, d)] = grad[i];
        m[(d, i)] = grad[i];
    }
    m
}

/// `[H | g]`, d×(d+1).
pub fn hstack_grad(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DMatrix<f64> {
    let d = grad.len();
    let mut m = DMatrix::zeros(d, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(hess);
    m.set_column(d, grad);
    m
}

/// `[H ; gᵀ]`, (d+1)×d.
pub fn vstack_grad(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DMatrix<f64> {
    let d = grad.len();
    let mut m = DMatrix::zeros(d + 1, d);
    m.view_mut((0, 0), (d, d)).copy_from(hess);
    m.set_row(d, &grad.transpose());
    m
}

/// Orthonormal basis of the hyperplane `v⊥` as the columns of a
/// `d×(d-1)` matrix, from a Householder reflection mapping `v` to a
/// multiple of `e₁`. Returns the identity when `v = 0`.
pub fn orthogonal_complement(v: &DVector<f64>) -> DMatrix<f64> {
    let d = v.len();
    let norm = v.norm();
    if norm == 0.0 {
        return DMatrix::identity(d, d);
    }
    let mut u = v / norm;
    let s = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += s;
    let un = u.norm();
    u /= un;
    // Q = I - 2uuᵀ; its first column is ∓v/|v|, the rest span v⊥
    let q = DMatrix::identity(d, d) - (&u * u.transpose()) * 2.0;
    q.columns(1, d - 1).into_owned()
}

/// Exact echelon basis of a sublattice of `Z^d`, grown one vector at a time.
#[derive(Debug, Clone, Default)]
pub struct IntegerEchelon {
    rows: Vec<(usize, Vec<i128>)>,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl IntegerEchelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce `v` against the basis; returns true (and keeps it) when `v`
    /// is independent of the vectors already inserted.
    pub fn insert(&mut self, v: &[i64]) -> bool {
        let mut w: Vec<i128> = v.iter().map(|&x| x as i128).collect();
        for (pc, row) in &self.rows {
            let a = row[*pc];
            let b = w[*pc];
            if b == 0 {
                continue;
            }
            let g = gcd(a, b);
            let (fa, fb) = (a / g, b / g);
            let mut h = 0;
            for (wi, ri) in w.iter_mut().zip(row) {
                *wi = *wi * fa - ri * fb;
                h = gcd(h, *wi);
            }
            if h > 1 {
                w.iter_mut().for_each(|x| *x /= h);
            }
        }
        match w.iter().position(|&x| x != 0) {
            Some(pc) => {
                self.rows.push((pc, w));
                true
            }
            None => false,
        }
    }
}

/// Exact rank of a set of integer vectors.
pub fn integer_rank(vectors: &[Vec<i64>]) -> usize {
    let mut e = IntegerEchelon::new();
    for v in vectors {
        e.insert(v);
    }
    e.rank()
}
