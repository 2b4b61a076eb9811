//! Registry of reference Hamiltonians.

use super::model::{HamiltonianModel, ModelError, Region};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 5] = ["quadratic", "norm", "mixed", "quartic", "linear"];

/// Parameters of the dimension-generic builtins.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuiltinParams {
    /// Dimension for `quadratic`, `norm` and `linear` (ignored by the
    /// two-dimensional models). Defaults to 2.
    pub dim: Option<usize>,
    /// Constant frequency vector of `linear`. Defaults to all ones.
    pub omega: Option<Vec<f64>>,
}

impl BuiltinParams {
    pub fn dim(dim: usize) -> Self {
        BuiltinParams {
            dim: Some(dim),
            omega: None,
        }
    }

    pub fn omega(omega: Vec<f64>) -> Self {
        BuiltinParams {
            dim: Some(omega.len()),
            omega: Some(omega),
        }
    }
}

fn sum_of(dim: usize, term: impl Fn(usize) -> String) -> String {
    (1..=dim).map(term).collect::<Vec<_>>().join(" + ")
}

fn origin_distance(dim: usize) -> String {
    format!("sqrt({})", sum_of(dim, |i| format!("x{}^2", var(i))))
}

fn var(i: usize) -> String {
    if i <= 9 {
        i.to_string()
    } else {
        format!("[{i}]")
    }
}

/// Look up a reference Hamiltonian by name.
///
/// | name | F | domain |
/// |---|---|---|
/// | `quadratic` | ½\|ξ\|² | `[-10,10]^d` minus the origin |
/// | `norm` | \|ξ\| | `[-10,10]^d` minus the origin |
/// | `mixed` | ξ₁³/3 + ξ₂²/2 | `[0,10]×[-10,10]` minus the axis ξ₁ = 0 |
/// | `quartic` | ξ₁⁴ + ξ₂⁴ | `[-10,10]²` minus the origin |
/// | `linear` | ω·ξ | `[-10,10]^d` |
pub fn builtin(name: &str, params: &BuiltinParams) -> Result<HamiltonianModel, ModelError> {
    let dim = params
        .omega
        .as_ref()
        .map(Vec::len)
        .or(params.dim)
        .unwrap_or(2);
    if dim == 0 {
        return Err(ModelError::Invalid("dimension must be at least 1".into()));
    }
    let model = match name {
        "quadratic" => HamiltonianModel::parse(&sum_of(dim, |i| format!("x{}^2/2", var(i))), dim)?
            .with_domain(Region::cube(dim, -10.0, 10.0))?
            .with_exclusion(&origin_distance(dim))?,
        "norm" => HamiltonianModel::parse(&origin_distance(dim), dim)?
            .with_domain(Region::cube(dim, -10.0, 10.0))?
            .with_exclusion(&origin_distance(dim))?,
        "mixed" => HamiltonianModel::parse("x1^3/3 + x2^2/2", 2)?
            .with_domain(Region::new(vec![[0.0, 10.0], [-10.0, 10.0]])?)?
            .with_exclusion("x1")?,
        "quartic" => HamiltonianModel::parse("x1^4 + x2^4", 2)?
            .with_domain(Region::cube(2, -10.0, 10.0))?
            .with_exclusion(&origin_distance(2))?,
        "linear" => {
            let omega = params.omega.clone().unwrap_or_else(|| vec![1.0; dim]);
            if omega.iter().any(|w| !w.is_finite()) {
                return Err(ModelError::Invalid("frequency vector must be finite".into()));
            }
            let text = sum_of(dim, |i| format!("{:?}*x{}", omega[i - 1], var(i)));
            HamiltonianModel::parse(&text, dim)?.with_domain(Region::cube(dim, -10.0, 10.0))?
        }
        other => return Err(ModelError::UnknownBuiltin(other.to_string())),
    };
    Ok(model.with_name(name))
}

/// Region used by reports and property suites when none is given: boxes
/// that stay away from the degeneracy loci the models are known for,
/// except `quartic`, whose whole reference square is the point of interest.
pub fn default_region(model: &HamiltonianModel) -> Region {
    let d = model.dim;
    match model.name.as_str() {
        "quadratic" => Region::cube(d, 1.0, 2.0),
        "norm" => Region::cube(d, 0.5, 2.0),
        "mixed" => Region {
            bounds: vec![[0.1, 2.0], [-2.0, 2.0]],
        },
        "quartic" => Region::cube(2, -1.0, 1.0),
        "linear" => Region::cube(d, -1.0, 1.0),
        _ => model.domain.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Point;

    #[test]
    fn registry_contents() {
        let q = builtin("quartic", &BuiltinParams::default()).unwrap();
        assert_eq!(q.dim, 2);
        assert!(q.is_excluded(&[0.0, 0.0]));
        let j = q.eval_jet2(&Point::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(j.value, 2.0);

        let n = builtin("norm", &BuiltinParams::dim(3)).unwrap();
        assert_eq!(n.dim, 3);
        assert!(n.is_excluded(&[0.0, 0.0, 0.0]));

        let l = builtin("linear", &BuiltinParams::omega(vec![1.0, 1.0])).unwrap();
        let j = l.eval_jet2(&Point::new(vec![0.2, 0.5])).unwrap();
        assert_eq!(j.value, 0.7);
        assert_eq!(j.grad.as_slice(), &[1.0, 1.0]);
        assert!(l.excluded.is_none());

        let m = builtin("mixed", &BuiltinParams::default()).unwrap();
        assert!(m.is_excluded(&[0.0, 1.0]));
        assert!(m.eval_value(&[-1.0, 0.0]).is_err());

        assert!(matches!(
            builtin("cubic", &BuiltinParams::default()),
            Err(ModelError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn irrational_frequencies_survive_the_text_form() {
        let w = 2f64.sqrt();
        let l = builtin("linear", &BuiltinParams::omega(vec![1.0, w])).unwrap();
        let g = l.eval_grad(&[0.0, 0.0]).unwrap();
        assert_eq!(g[1], w);
    }

    #[test]
    fn high_dimensional_names_use_brackets() {
        let q = builtin("quadratic", &BuiltinParams::dim(11)).unwrap();
        assert!(q.text.contains("x[11]^2/2"));
    }
}
