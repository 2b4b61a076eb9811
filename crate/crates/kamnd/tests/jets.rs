use kamnd::hamiltonian::{builtin, default_region, BuiltinParams, BUILTIN_NAMES};
use kamnd::oracle::{fd_jet2_with, FdSteps};
use kamnd::{HamiltonianModel, Point};
use proptest::prelude::*;

fn models() -> Vec<HamiltonianModel> {
    let mut v: Vec<_> = BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n, &BuiltinParams::default()).unwrap())
        .collect();
    for n in ["quadratic", "norm", "linear"] {
        v.push(builtin(n, &BuiltinParams::dim(3)).unwrap());
    }
    v
}

fn point_in(m: &HamiltonianModel, u: &[f64]) -> Option<Point> {
    let x = default_region(m).from_unit(&u[..m.dim]);
    m.is_admissible(&x, 1e-2).then(|| Point::new(x))
}

fn inf_norm(h: &nalgebra::DMatrix<f64>) -> f64 {
    h.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hessian_is_exactly_symmetric(u in prop::collection::vec(0.0..1.0f64, 3)) {
        for m in models() {
            let Some(p) = point_in(&m, &u) else { continue };
            let j = m.eval_jet2(&p).unwrap();
            prop_assert_eq!(&j.hess, &j.hess.transpose());
            prop_assert!(j.is_finite());
            prop_assert_eq!(j.grad.len(), m.dim);
        }
    }

    #[test]
    fn derivatives_match_central_differences(u in prop::collection::vec(0.0..1.0f64, 3)) {
        for m in models() {
            let Some(p) = point_in(&m, &u) else { continue };
            let ad = m.eval_jet2(&p).unwrap();
            let fd = fd_jet2_with(&m, &p, FdSteps::default()).unwrap();
            let herr = (&ad.hess - &fd.hess).amax();
            prop_assert!(herr <= 1e-6 * (1.0 + inf_norm(&ad.hess)), "{} at {:?}: {herr:e}", m.name, p.coords);
            for (a, f) in ad.grad.iter().zip(fd.grad.iter()) {
                prop_assert!((a - f).abs() <= 1e-8 * a.abs().max(1.0), "{} at {:?}: {a} vs {f}", m.name, p.coords);
            }
        }
    }

    #[test]
    fn cubic_model_matches_closed_forms(x1 in 0.05..2.0f64, x2 in -2.0..2.0f64) {
        let m = HamiltonianModel::parse("x1^3/3 + x2^2/2", 2).unwrap();
        let j = m.eval_jet2(&Point::new(vec![x1, x2])).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE);
        prop_assert!(close(j.value, x1.powi(3) / 3.0 + x2 * x2 / 2.0));
        prop_assert!(close(j.grad[0], x1 * x1));
        prop_assert!(close(j.grad[1], x2));
        prop_assert!(close(j.hess[(0, 0)], 2.0 * x1));
        prop_assert_eq!(j.hess[(0, 1)], 0.0);
        prop_assert_eq!(j.hess[(1, 0)], 0.0);
        prop_assert_eq!(j.hess[(1, 1)], 1.0);
    }

    #[test]
    fn polynomial_text_evaluates_like_direct_arithmetic(
        coef in prop::collection::vec(-5i32..=5, 6),
        pw in prop::collection::vec(0u32..=4, 6),
        x in prop::collection::vec(-2.0..2.0f64, 2),
    ) {
        // sum of c_i * x1^a_i * x2^b_i, printed and parsed
        let mut text = String::new();
        let mut expect = 0.0;
        for i in 0..3 {
            let (c, a, b) = (coef[i], pw[2 * i], pw[2 * i + 1]);
            text += &format!(" + ({c})*x1^{a}*x2^{b}");
            expect += c as f64 * x[0].powi(a as i32) * x[1].powi(b as i32);
        }
        let m = HamiltonianModel::parse(&text[3..], 2).unwrap();
        let v = m.eval_value(&x).unwrap();
        prop_assert!((v - expect).abs() <= 1e-12 * (1.0 + expect.abs()), "{text}: {v} vs {expect}");
    }
}

#[test]
fn quadratic_jet_is_exact() {
    let m = builtin("quadratic", &BuiltinParams::dim(4)).unwrap();
    let j = m.eval_jet2(&Point::new(vec![1.25, 1.5, 1.75, 2.0])).unwrap();
    assert_eq!(j.value, (1.25f64 * 1.25 + 1.5 * 1.5 + 1.75 * 1.75 + 4.0) / 2.0);
    assert_eq!(j.grad.as_slice(), [1.25, 1.5, 1.75, 2.0]);
    assert_eq!(j.hess, nalgebra::DMatrix::identity(4, 4));
}
