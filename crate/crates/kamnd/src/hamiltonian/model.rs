use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use super::dual::{Dual, Scalar};
use super::expr::{parse_expr, BinOp, Expr, Func, ParseError};

/// Default radius of the ball skipped by samplers around excluded loci.
pub const DEFAULT_GUARD_RADIUS: f64 = 1e-6;

/// Axis-aligned box, one closed interval per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region {
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("region must have at least one axis")]
    Empty,
    #[error("axis {axis}: interval [{lo}, {hi}] is empty or not finite")]
    BadInterval { axis: usize, lo: f64, hi: f64 },
}

impl Region {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self, RegionError> {
        if bounds.is_empty() {
            return Err(RegionError::Empty);
        }
        for (axis, &[lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(RegionError::BadInterval { axis, lo, hi });
            }
        }
        Ok(Region { bounds })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Region {
            bounds: vec![[lo, hi]; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.bounds[axis][0]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.bounds[axis][1]
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.bounds[axis][1] - self.bounds[axis][0]
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && coords
                .iter()
                .zip(&self.bounds)
                .all(|(x, [lo, hi])| *lo <= *x && *x <= *hi)
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.dim() == other.dim()
            && self
                .bounds
                .iter()
                .zip(&other.bounds)
                .all(|(a, b)| b[0] <= a[0] && a[1] <= b[1])
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.width(a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Map a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(t, [lo, hi])| lo + t * (hi - lo))
            .collect()
    }

    /// Split into `per_axis^dim` congruent tiles, in lexicographic order.
    pub fn tiles(&self, per_axis: usize) -> Vec<Region> {
        let d = self.dim();
        let per_axis = per_axis.max(1);
        let total = per_axis.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut bounds = vec![[0.0, 0.0]; d];
                for axis in (0..d).rev() {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    let w = self.width(axis) / per_axis as f64;
                    let lo = self.lo(axis) + w * i as f64;
                    let hi = if i + 1 == per_axis {
                        self.hi(axis)
                    } else {
                        lo + w
                    };
                    bounds[axis] = [lo, hi];
                }
                Region { bounds }
            })
            .collect()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, [lo, hi]) in self.bounds.iter().enumerate() {
            if i > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{lo},{hi}]")?;
        }
        Ok(())
    }
}

/// A point of the action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

impl From<&[f64]> for Point {
    fn from(coords: &[f64]) -> Self {
        Point {
            coords: coords.to_vec(),
        }
    }
}

/// Value, gradient (frequency vector) and Hessian of F at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet2 {
    /// Builds a jet, replacing `hess` by `(hess + hessᵀ)/2`.
    pub fn new(value: f64, grad: DVector<f64>, hess: DMatrix<f64>) -> Self {
        let sym = (&hess + hess.transpose()) * 0.5;
        Jet2 {
            value,
            grad,
            hess: sym,
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl Serialize for Jet2 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Jet2", 3)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("grad", &self.grad.iter().copied().collect::<Vec<_>>())?;
        st.serialize_field("hess", &matrix_rows(&self.hess))?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has dimension {got}, model has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {0:?} lies outside the model domain")]
    OutsideDomain(Vec<f64>),
    #[error("point {0:?} lies on the excluded locus")]
    Excluded(Vec<f64>),
    #[error("{func} undefined for argument {arg} in subexpression `{subexpr}`")]
    Domain {
        func: &'static str,
        arg: f64,
        subexpr: String,
    },
    #[error("division by zero in subexpression `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("non-finite result evaluating `{subexpr}`")]
    NonFinite { subexpr: String },
}

/// Evaluate `expr` with variables bound to `vars`.
pub fn eval_expr<T: Scalar>(expr: &Expr, vars: &[T]) -> Result<T, EvalError> {
    let v = eval_node(expr, vars)?;
    if !v.is_finite() {
        return Err(EvalError::NonFinite {
            subexpr: expr.to_string(),
        });
    }
    Ok(v)
}

fn eval_node<T: Scalar>(expr: &Expr, vars: &[T]) -> Result<T, EvalError> {
    Ok(match expr {
        Expr::Const(c) => T::constant(*c),
        Expr::Var(i) => vars[*i],
        Expr::Neg(e) => -eval_node(e, vars)?,
        Expr::Pow(e, n) => eval_node(e, vars)?.powi(*n),
        Expr::Binary(op, a, b) => {
            let a = eval_node(a, vars)?;
            let b = eval_node(b, vars)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b.re() == 0.0 {
                        return Err(EvalError::DivisionByZero {
                            subexpr: expr.to_string(),
                        });
                    }
                    a / b
                }
            }
        }
        Expr::Call(func, e) => {
            let x = eval_node(e, vars)?;
            let bad = match func {
                Func::Sqrt => x.re() < 0.0,
                Func::Log => x.re() <= 0.0,
                _ => false,
            };
            if bad || x.re().is_nan() {
                return Err(EvalError::Domain {
                    func: func.name(),
                    arg: x.re(),
                    subexpr: expr.to_string(),
                });
            }
            match func {
                Func::Sqrt => x.sqrt(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
            }
        }
    })
}

/// Locus removed from the domain, given as the zero set of an expression
/// that should behave like a distance to the locus (e.g. `sqrt(x1^2+x2^2)`
/// for the origin).
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub text: String,
    pub expr: Expr,
}

/// Hamiltonian F over a box of action space.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    pub name: String,
    pub dim: usize,
    pub text: String,
    pub expr: Expr,
    pub domain: Region,
    pub excluded: Option<Exclusion>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expression: {0}")]
    Parse(#[from] ParseError),
    #[error("excluded-locus expression: {0}")]
    ExcludedParse(ParseError),
    #[error("domain: {0}")]
    Region(#[from] RegionError),
    #[error("domain has {got} axes, model dimension is {expected}")]
    DomainDimension { expected: usize, got: usize },
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown builtin model `{0}`")]
    UnknownBuiltin(String),
    #[error("{0}")]
    Invalid(String),
}

/// JSON form of a model: `{dim, expr, domain: [[lo, hi], ...], excluded?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    pub expr: String,
    pub domain: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

impl HamiltonianModel {
    /// Parse `text` with an unbounded-for-practical-purposes default domain
    /// `[-1e6, 1e6]^dim` and no exclusion.
    pub fn parse(text: &str, dim: usize) -> Result<Self, ModelError> {
        let expr = parse_expr(text, dim)?;
        Ok(HamiltonianModel {
            name: "expr".into(),
            dim,
            text: text.to_string(),
            expr,
            domain: Region::cube(dim, -1e6, 1e6),
            excluded: None,
        })
    }

    pub fn with_domain(mut self, domain: Region) -> Result<Self, ModelError> {
        if domain.dim() != self.dim {
            return Err(ModelError::DomainDimension {
                expected: self.dim,
                got: domain.dim(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn with_exclusion(mut self, text: &str) -> Result<Self, ModelError> {
        let expr = parse_expr(text, self.dim).map_err(ModelError::ExcludedParse)?;
        self.excluded = Some(Exclusion {
            text: text.to_string(),
            expr,
        });
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self, ModelError> {
        let domain = Region::new(doc.domain.clone())?;
        let mut m = HamiltonianModel::parse(&doc.expr, doc.dim)?.with_domain(domain)?;
        if let Some(ex) = &doc.excluded {
            m = m.with_exclusion(ex)?;
        }
        if let Some(name) = &doc.name {
            m.name = name.clone();
        }
        Ok(m)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            name: Some(self.name.clone()),
            dim: self.dim,
            expr: self.text.clone(),
            domain: self.domain.bounds.clone(),
            excluded: self.excluded.as_ref().map(|e| e.text.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("model documents always serialize")
    }

    /// Value of the exclusion expression at `coords`; `None` when there is
    /// no excluded locus.
    pub fn exclusion_distance(&self, coords: &[f64]) -> Option<f64> {
        let ex = self.excluded.as_ref()?;
        // an undefined exclusion expression counts as lying on the locus
        Some(eval_expr::<f64>(&ex.expr, coords).map_or(0.0, f64::abs))
    }

    /// On the excluded locus itself.
    pub fn is_excluded(&self, coords: &[f64]) -> bool {
        self.exclusion_distance(coords) == Some(0.0)
    }

    /// Inside the domain and outside the open guard ball of radius `guard`
    /// around the excluded locus.
    pub fn is_admissible(&self, coords: &[f64], guard: f64) -> bool {
        self.domain.contains(coords)
            && match self.exclusion_distance(coords) {
                None => true,
                Some(dist) => dist >= guard && dist > 0.0,
            }
    }

    fn check_point(&self, coords: &[f64]) -> Result<(), EvalError> {
        if coords.len() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        if !self.domain.contains(coords) {
            return Err(EvalError::OutsideDomain(coords.to_vec()));
        }
        if self.is_excluded(coords) {
            return Err(EvalError::Excluded(coords.to_vec()));
        }
        Ok(())
    }

    /// F at `coords`.
    pub fn eval_value(&self, coords: &[f64]) -> Result<f64, EvalError> {
        self.check_point(coords)?;
        eval_expr::<f64>(&self.expr, coords)
    }

    /// Gradient of F (the frequency vector) with first-order duals.
    pub fn eval_grad(&self, coords: &[f64]) -> Result<DVector<f64>, EvalError> {
        self.check_point(coords)?;
        let d = self.dim;
        let mut grad = DVector::zeros(d);
        let mut vars: Vec<Dual<f64>> = coords.iter().map(|&x| Dual::new(x, 0.0)).collect();
        for j in 0..d {
            vars[j].eps = 1.0;
            grad[j] = eval_expr(&self.expr, &vars)?.eps;
            vars[j].eps = 0.0;
        }
        Ok(grad)
    }

    /// Second-order jet by nested forward-mode duals.
    pub fn eval_jet2(&self, p: &Point) -> Result<Jet2, EvalError> {
        self.check_point(&p.coords)?;
        let d = self.dim;
        let mut value = 0.0;
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for j in 0..d {
            for k in 0..d {
                let vars: Vec<Dual<Dual<f64>>> = p
                    .coords
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let inner = if i == k { 1.0 } else { 0.0 };
                        let outer = if i == j { 1.0 } else { 0.0 };
                        Dual::new(Dual::new(x, inner), Dual::new(outer, 0.0))
                    })
                    .collect();
                let r = eval_expr(&self.expr, &vars)?;
                hess[(j, k)] = r.eps.eps;
                if j == k {
                    value = r.re.re;
                    grad[j] = r.eps.re;
                }
            }
        }
        Ok(Jet2::new(value, grad, hess))
    }

    /// Model of `c·F` on the same domain.
    pub fn scaled(&self, c: f64) -> HamiltonianModel {
        let expr = Expr::Binary(BinOp::Mul, Box::new(Expr::Const(c)), Box::new(self.expr.clone()));
        HamiltonianModel {
            name: format!("{}*{}", c, self.name),
            text: expr.to_string(),
            expr,
            ..self.clone()
        }
    }

    /// Model of `ξ ↦ F(Aξ)` with the given domain. `a` is row-major `dim×dim`.
    pub fn linear_pullback(&self, a: &DMatrix<f64>, domain: Region) -> Result<Self, ModelError> {
        if a.nrows() != self.dim || a.ncols() != self.dim || domain.dim() != self.dim {
            return Err(ModelError::Invalid("pullback matrix and domain must match model dimension".into()));
        }
        let subs: Vec<Expr> = (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| {
                        Expr::Binary(BinOp::Mul, Box::new(Expr::Const(a[(i, j)])), Box::new(Expr::Var(j)))
                    })
                    .reduce(|acc, t| Expr::Binary(BinOp::Add, Box::new(acc), Box::new(t)))
                    .expect("dim >= 1")
            })
            .collect();
        let expr = self.expr.substitute(&subs);
        let excluded = self.excluded.as_ref().map(|ex| {
            let e = ex.expr.substitute(&subs);
            Exclusion {
                text: e.to_string(),
                expr: e,
            }
        });
        Ok(HamiltonianModel {
            name: format!("{}∘A", self.name),
            dim: self.dim,
            text: expr.to_string(),
            expr,
            domain,
            excluded,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn half_square_norm_jet() {
        let m = HamiltonianModel::parse("x1^2/2 + x2^2/2", 2).unwrap();
        let j = m.eval_jet2(&Point::new(vec![3.0, 4.0])).unwrap();
        assert_eq!(j.value, 12.5);
        assert_eq!(j.grad.as_slice(), &[3.0, 4.0]);
        assert_eq!(j.hess, DMatrix::identity(2, 2));
    }

    #[test]
    fn linear_jet() {
        let m = HamiltonianModel::parse("x1", 1).unwrap();
        let j = m.eval_jet2(&Point::new(vec![7.0])).unwrap();
        assert_eq!(j.value, 7.0);
        assert_eq!(j.grad[0], 1.0);
        assert_eq!(j.hess[(0, 0)], 0.0);
    }

    #[test]
    fn norm_jet_matches_finite_differences() {
        // central differences with h = 1e-5 on sqrt(x1^2 + x2^2) at (1, 0),
        // computed by hand from the closed form: grad (1, 0), hess [[0,0],[0,1]]
        let m = HamiltonianModel::parse("sqrt(x1^2 + x2^2)", 2).unwrap();
        let p = Point::new(vec![1.0, 0.0]);
        let j = m.eval_jet2(&p).unwrap();
        let f = |x: f64, y: f64| (x * x + y * y).sqrt();
        let h = 1e-5;
        let fd_g = [
            (f(1.0 + h, 0.0) - f(1.0 - h, 0.0)) / (2.0 * h),
            (f(1.0, h) - f(1.0, -h)) / (2.0 * h),
        ];
        let fd_h11 = (f(1.0, h) - 2.0 * f(1.0, 0.0) + f(1.0, -h)) / (h * h);
        assert!(close(j.grad[0], fd_g[0], 1e-8) && close(j.grad[1], fd_g[1], 1e-8));
        assert!(close(j.hess[(1, 1)], fd_h11, 1e-4));
        assert!(close(j.hess[(0, 0)], 0.0, 1e-12));
        assert!(close(j.hess[(1, 1)], 1.0, 1e-12));
    }

    #[test]
    fn mixed_example_closed_forms() {
        let m = HamiltonianModel::parse("x1^3/3 + x2^2/2", 2).unwrap();
        for &(a, b) in &[(0.3, -1.2), (1.7, 0.4), (2.0, 2.0)] {
            let j = m.eval_jet2(&Point::new(vec![a, b])).unwrap();
            assert!(close(j.grad[0], a * a, 1e-12));
            assert!(close(j.grad[1], b, 1e-12));
            assert!(close(j.hess[(0, 0)], 2.0 * a, 1e-12));
            assert_eq!(j.hess[(0, 1)], 0.0);
            assert!(close(j.hess[(1, 1)], 1.0, 1e-12));
        }
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let m = HamiltonianModel::parse("sqrt(x1 - 2) + log(x2)", 2).unwrap();
        match m.eval_jet2(&Point::new(vec![1.0, 1.0])) {
            Err(EvalError::Domain { func: "sqrt", subexpr, .. }) => assert_eq!(subexpr, "sqrt(x1 - 2.0)"),
            other => panic!("{other:?}"),
        }
        match m.eval_value(&[3.0, 0.0]) {
            Err(EvalError::Domain { func: "log", .. }) => {}
            other => panic!("{other:?}"),
        }
        let m = HamiltonianModel::parse("1/x1", 1).unwrap();
        assert!(matches!(m.eval_value(&[0.0]), Err(EvalError::DivisionByZero { .. })));
    }

    #[test]
    fn excluded_and_outside_points_are_errors() {
        let m = HamiltonianModel::parse("sqrt(x1^2 + x2^2)", 2)
            .unwrap()
            .with_domain(Region::cube(2, -1.0, 1.0))
            .unwrap()
            .with_exclusion("sqrt(x1^2 + x2^2)")
            .unwrap();
        assert!(matches!(m.eval_jet2(&Point::new(vec![0.0, 0.0])), Err(EvalError::Excluded(_))));
        assert!(matches!(m.eval_value(&[2.0, 0.0]), Err(EvalError::OutsideDomain(_))));
        assert!(matches!(m.eval_value(&[1.0]), Err(EvalError::DimensionMismatch { .. })));
        assert!(!m.is_admissible(&[1e-7, 0.0], DEFAULT_GUARD_RADIUS));
        assert!(m.is_admissible(&[1e-5, 0.0], DEFAULT_GUARD_RADIUS));
    }

    #[test]
    fn json_document_round_trip() {
        let text = r#"{"dim":2,"expr":"x1^4 + x2^4","domain":[[-1,1],[-1,1]],"excluded":"sqrt(x1^2+x2^2)"}"#;
        let m = HamiltonianModel::from_json_str(text).unwrap();
        assert_eq!(m.dim, 2);
        assert_eq!(m.domain, Region::cube(2, -1.0, 1.0));
        let back = HamiltonianModel::from_json_str(&m.to_json()).unwrap();
        assert_eq!(back.expr, m.expr);
        assert_eq!(back.excluded, m.excluded);
        assert!(HamiltonianModel::from_json_str(r#"{"dim":2,"expr":"x3","domain":[[0,1],[0,1]]}"#).is_err());
        assert!(HamiltonianModel::from_json_str(r#"{"dim":2,"expr":"x1","domain":[[0,1]]}"#).is_err());
        assert!(HamiltonianModel::from_json_str(r#"{"dim":1,"expr":"x1","domain":[[1,0]]}"#).is_err());
    }

    #[test]
    fn tiles_cover_the_box() {
        let r = Region::new(vec![[0.0, 1.0], [-2.0, 2.0]]).unwrap();
        let t = r.tiles(2);
        assert_eq!(t.len(), 4);
        assert_eq!(t[0].bounds, vec![[0.0, 0.5], [-2.0, 0.0]]);
        assert_eq!(t[3].bounds, vec![[0.5, 1.0], [0.0, 2.0]]);
        assert!(t.iter().all(|x| x.is_subset_of(&r)));
    }

    #[test]
    fn pullback_transforms_jets_by_congruence() {
        let m = HamiltonianModel::parse("x1^3/3 + x1*x2^2", 2).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -0.5, 1.5]);
        let g = m.linear_pullback(&a, Region::cube(2, -1e6, 1e6)).unwrap();
        let xi = DVector::from_vec(vec![0.3, -0.7]);
        let mapped = &a * &xi;
        let jf = m.eval_jet2(&Point::new(mapped.iter().copied().collect())).unwrap();
        let jg = g.eval_jet2(&Point::new(xi.iter().copied().collect())).unwrap();
        let grad = a.transpose() * &jf.grad;
        let hess = a.transpose() * &jf.hess * &a;
        assert!((jg.grad - grad).amax() < 1e-12);
        assert!((jg.hess - hess).amax() < 1e-12);
    }
}
