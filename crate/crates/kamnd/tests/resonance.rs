use kamnd::hamiltonian::{builtin, default_region, BuiltinParams};
use kamnd::resonance::{extract_sigma, omega_k, ResonanceScanner, ResonanceVector, TorusKind};
use kamnd::{HamiltonianModel, Point, Region};
use proptest::prelude::*;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Rank over the rationals by fraction-free elimination in i128.
fn int_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| m[r][c] != 0) else { continue };
        m.swap(rank, p);
        for r in rank + 1..m.len() {
            let (a, b) = (m[rank][c], m[r][c]);
            let pivot = m[rank].clone();
            for (x, p) in m[r].iter_mut().zip(&pivot) {
                *x = a * *x - b * p;
            }
            let g = m[r].iter().fold(0i128, |g, &x| {
                let (mut a, mut b) = (g.abs(), x.abs());
                while b != 0 {
                    (a, b) = (b, a % b);
                }
                a
            });
            if g > 1 {
                m[r].iter_mut().for_each(|x| *x /= g);
            }
        }
        rank += 1;
    }
    rank
}

fn small_int_vec(d: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-4i64..=4, d).prop_filter("nonzero", |v| v.iter().any(|&x| x != 0))
}

/// Generic frequencies, frequencies in dimension 3 orthogonal to a random
/// integer vector, and rational frequencies.
fn frequency() -> impl Strategy<Value = Vec<f64>> {
    let generic = prop::collection::vec(-2.0..2.0f64, 2..=4);
    let one = (small_int_vec(3), prop::collection::vec(-1.0..1.0f64, 3)).prop_map(|(k, v)| {
        let k: Vec<f64> = k.iter().map(|&x| x as f64).collect();
        vec![k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]]
    });
    let rational = (prop::collection::vec(-6i64..=6, 2..=4), 1i64..=7).prop_map(|(n, q)| n.iter().map(|&x| x as f64 / q as f64).collect());
    prop_oneof![generic, one, rational]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn omega_is_linear_in_k(
        a in -5i64..=5,
        b in -5i64..=5,
        k1 in small_int_vec(2),
        k2 in small_int_vec(2),
        x in prop::collection::vec(1.0..2.0f64, 2),
    ) {
        let m = builtin("mixed", &BuiltinParams::default()).unwrap();
        let j = m.eval_jet2(&Point::new(x)).unwrap();
        let c: Vec<i64> = (0..2).map(|i| a * k1[i] + b * k2[i]).collect();
        prop_assume!(c.iter().any(|&x| x != 0));
        // Ω for a raw integer vector, through its canonical primitive representative
        let om = |k: &[i64]| -> (f64, f64) {
            let g = k.iter().fold(0, |g, &x| gcd(g, x)) as f64;
            let sign = k.iter().find(|&&x| x != 0).unwrap().signum() as f64;
            let v = ResonanceVector::canonical(k).unwrap();
            let size = k.iter().zip(j.grad.iter()).map(|(&k, g)| (k as f64 * g).abs()).sum();
            (sign * g * omega_k(&j, &v), size)
        };
        let (lhs, s0) = om(&c);
        let (o1, s1) = om(&k1);
        let (o2, s2) = om(&k2);
        let rhs = a as f64 * o1 + b as f64 * o2;
        let bound = 8.0 * f64::EPSILON * (s0 + (a.abs() as f64) * s1 + (b.abs() as f64) * s2);
        prop_assert!((lhs - rhs).abs() <= bound, "{lhs} vs {rhs}");
    }

    #[test]
    fn resonance_order_never_decreases_with_max_norm(omega in frequency()) {
        let d = omega.len();
        let mut last = 0;
        for k in 1..=6 {
            let c = ResonanceScanner::new(d, k).classify(&omega, 1e-9);
            prop_assert!(c.order >= last, "{omega:?}: order {} at K={k} after {last}", c.order);
            last = c.order;
        }
    }

    #[test]
    fn witnesses_are_primitive_independent_and_resonant(omega in frequency(), max_norm in 1i64..=6) {
        let d = omega.len();
        let c = ResonanceScanner::new(d, max_norm).classify(&omega, 1e-9);
        let ks: Vec<Vec<i64>> = c.witnesses.iter().map(|k| k.as_slice().to_vec()).collect();
        prop_assert!(c.order < d);
        prop_assert_eq!(ks.len(), c.order);
        prop_assert_eq!(int_rank(&ks), ks.len());
        let wn = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
        for k in &ks {
            prop_assert_eq!(k.iter().fold(0, |g, &x| gcd(g, x)), 1);
            prop_assert!(*k.iter().find(|&&x| x != 0).unwrap() > 0);
            prop_assert!(k.iter().all(|x| x.abs() <= max_norm));
            let kn = k.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            let dot: f64 = k.iter().zip(&omega).map(|(&k, w)| k as f64 * w).sum();
            prop_assert!(dot.abs() <= 1e-9 * kn * wn);
        }
        prop_assert_eq!(c.kind == TorusKind::Ergodic, c.order == 0);
        prop_assert_eq!(c.kind == TorusKind::Periodic, c.order == d - 1);
    }

    #[test]
    fn sigma_vertices_lie_within_the_cell_lipschitz_bound(
        which in 0usize..4,
        k in small_int_vec(2),
        n in 17usize..=65,
    ) {
        let name = ["quadratic", "mixed", "quartic", "norm"][which];
        let m = builtin(name, &BuiltinParams::default()).unwrap();
        let region = default_region(&m);
        let k = ResonanceVector::canonical(&k).unwrap();
        let s = extract_sigma(&m, &k, &region, &[n, n]);
        let h = [region.width(0) / (n - 1) as f64, region.width(1) / (n - 1) as f64];
        let node = |a: usize, i: usize| if i + 1 == n { region.hi(a) } else { region.lo(a) + h[a] * i as f64 };
        for v in s.polylines.iter().flatten() {
            let idx: Vec<usize> = (0..2).map(|a| (((v[a] - region.lo(a)) / h[a]).floor().max(0.0) as usize).min(n - 2)).collect();
            let mut lip: f64 = 0.0;
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let c = Point::new(vec![node(0, idx[0] + di), node(1, idx[1] + dj)]);
                if let Ok(j) = m.eval_jet2(&c) {
                    let hk = &j.hess * nalgebra::DVector::from_iterator(2, k.as_slice().iter().map(|&x| x as f64));
                    lip = lip.max(hk.norm());
                }
            }
            let g = m.eval_grad(&v[..]).unwrap();
            let om = k.dot(g.as_slice());
            prop_assert!(om.abs() <= lip * h[0].hypot(h[1]) + 1e-12, "{name} {k} at {v:?}: {om}");
        }
    }
}

fn sign_change_cells(model: &HamiltonianModel, region: &Region, n: usize, k: &ResonanceVector) {
    let s = extract_sigma(model, k, region, &[n, n]);
    let node = |a: usize, i: usize| {
        if i + 1 == n {
            region.hi(a)
        } else {
            region.lo(a) + region.width(a) * i as f64 / (n - 1) as f64
        }
    };
    assert!(!s.cells.is_empty());
    for c in &s.cells {
        let vals: Vec<f64> = [(0, 0), (1, 0), (0, 1), (1, 1)]
            .iter()
            .map(|&(di, dj)| k.dot(model.eval_grad(&[node(0, c[0] + di), node(1, c[1] + dj)]).unwrap().as_slice()))
            .collect();
        let pos = vals.iter().any(|&v| v > 0.0);
        let neg = vals.iter().any(|&v| v < 0.0);
        let zero = vals.contains(&0.0);
        assert!((pos && neg) || zero, "cell {c:?}: {vals:?}");
    }
}

#[test]
fn reported_cells_straddle_the_zero_set() {
    let q = builtin("quartic", &BuiltinParams::default()).unwrap();
    for k in [[1, -1], [1, 2], [2, -3], [0, 1]] {
        sign_change_cells(&q, &Region::cube(2, -1.0, 1.0), 41, &ResonanceVector::canonical(&k).unwrap());
    }
    let m = builtin("mixed", &BuiltinParams::default()).unwrap();
    sign_change_cells(&m, &default_region(&m), 33, &ResonanceVector::new(vec![1, 1]).unwrap());
}

#[test]
fn critical_point_is_a_degenerate_periodic_torus() {
    for d in 2..=4 {
        let c = ResonanceScanner::new(d, 3).classify(&vec![0.0; d], 1e-9);
        assert_eq!((c.kind, c.order, c.degenerate), (TorusKind::Periodic, d - 1, true));
    }
}
