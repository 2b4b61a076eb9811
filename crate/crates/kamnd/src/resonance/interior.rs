use std::collections::BTreeMap;

use rayon::prelude::*;

use super::ResonanceScanner;
use crate::conditions::{ConditionId, ConditionVerdict, ToleranceConfig};
use crate::hamiltonian::{HamiltonianModel, Region, DEFAULT_GUARD_RADIUS};

/// Grid test for resonant sets with nonempty interior.
///
/// `Ω_k` is normalized to `|k·ω| / (|k|₂ |ω|₂)` at every node of a
/// `nodes^d` grid on `region`. A cell counts as interior-resonant for `k`
/// when the normalized value is at most `res_tol` at all of its corners.
/// The margin is the smallest, over `k` and cells, of the largest corner
/// value, so the verdict holds iff no cell of any `Σ_k` with
/// `|k|∞ <= max_norm` is interior-resonant. Cells with an unevaluable
/// corner are ignored.
pub fn empty_interior_scan(
    model: &HamiltonianModel,
    region: &Region,
    max_norm: i64,
    nodes: usize,
    res_tol: f64,
    tol: &ToleranceConfig,
) -> ConditionVerdict {
    assert!(nodes >= 2, "at least two nodes per axis");
    let d = region.dim();
    let total = nodes.pow(d as u32);
    let scanner = ResonanceScanner::new(d, max_norm);
    let unflatten = |mut idx: usize| {
        let mut ix = vec![0usize; d];
        for a in (0..d).rev() {
            ix[a] = idx % nodes;
            idx /= nodes;
        }
        ix
    };
    let omegas: Vec<Option<Vec<f64>>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let u: Vec<f64> = unflatten(idx).iter().map(|&i| i as f64 / (nodes - 1) as f64).collect();
            let x = region.from_unit(&u);
            if !model.is_admissible(&x, DEFAULT_GUARD_RADIUS) {
                return None;
            }
            model.eval_grad(&x).ok().map(|g| g.iter().copied().collect())
        })
        .collect();

    let cells_per_axis = nodes - 1;
    let n_cells = cells_per_axis.pow(d as u32);
    let corner_offsets: Vec<usize> = (0..1usize << d)
        .map(|c| (0..d).fold(0, |acc, a| acc * nodes + ((c >> (d - 1 - a)) & 1)))
        .collect();
    let cell_base = |mut c: usize| {
        let mut base = 0;
        let mut stride = 1;
        for _ in 0..d {
            base += (c % cells_per_axis) * stride;
            c /= cells_per_axis;
            stride *= nodes;
        }
        base
    };
    let valid_cells: Vec<usize> = (0..n_cells)
        .map(cell_base)
        .filter(|&b| corner_offsets.iter().all(|&o| omegas[b + o].is_some()))
        .collect();

    // per k: (min over cells of max corner value, number of interior cells)
    let per_k: Vec<(f64, usize)> = scanner
        .vectors()
        .par_iter()
        .map(|k| {
            let kn = k.norm2();
            let values: Vec<f64> = omegas
                .iter()
                .map(|w| match w {
                    Some(w) => {
                        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if wn == 0.0 {
                            0.0
                        } else {
                            k.dot(w).abs() / (kn * wn)
                        }
                    }
                    None => f64::NAN,
                })
                .collect();
            let mut best = f64::INFINITY;
            let mut interior = 0;
            for &b in &valid_cells {
                let m = corner_offsets.iter().map(|&o| values[b + o]).fold(0.0, f64::max);
                best = best.min(m);
                if m <= res_tol {
                    interior += 1;
                }
            }
            (best, interior)
        })
        .collect();

    let margin = per_k.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let margin = if margin.is_finite() { margin } else { 0.0 };
    let interior_cells: usize = per_k.iter().map(|p| p.1).sum();
    let raw = BTreeMap::from([
        ("cells".to_string(), valid_cells.len() as f64),
        ("interior_cells".to_string(), interior_cells as f64),
        ("vectors".to_string(), scanner.vectors().len() as f64),
        ("nodes_per_axis".to_string(), nodes as f64),
        ("threshold".to_string(), res_tol),
    ]);
    ConditionVerdict::from_margin(ConditionId::EmptyInteriorResonantSet, margin, res_tol, raw, *tol)
}
