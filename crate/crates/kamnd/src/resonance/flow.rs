use serde::Serialize;

use super::{ResonanceScanner, TorusClass, TorusKind};
use crate::hamiltonian::{EvalError, HamiltonianModel, Point};

/// Cells per torus axis in the coverage test.
pub const COVERAGE_CELLS_PER_AXIS: usize = 8;

/// Tolerance on the drift of a conserved phase `k·x mod 1`.
const PHASE_TOL: f64 = 1e-6;

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `(x0 + t·ω) mod 1`, componentwise.
pub fn linear_flow(omega: &[f64], x0: &[f64], t: f64) -> Vec<f64> {
    omega.iter().zip(x0).map(|(w, x)| wrap(x + t * w)).collect()
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    d.min(1.0 - d)
}

/// Fraction of the `cells^d` partition of the torus crossed by the
/// straight orbit `x0 + tω`, `t ∈ [0, t_max]`. The orbit is traced cell
/// by cell, so no visit between sample times is missed.
pub fn torus_cell_coverage(omega: &[f64], x0: &[f64], t_max: f64, cells: usize) -> (usize, usize) {
    let d = omega.len();
    let total = cells.pow(d as u32);
    let n = cells as f64;
    let mut visited = vec![false; total];
    let mut count = 0;
    // unwrapped integer cell coordinates and next boundary crossing times
    let mut cell: Vec<i64> = x0.iter().map(|&x| (x * n).floor() as i64).collect();
    let next_time = |axis: usize, c: i64| -> f64 {
        let w = omega[axis];
        if w > 0.0 {
            ((c + 1) as f64 / n - x0[axis]) / w
        } else if w < 0.0 {
            (c as f64 / n - x0[axis]) / w
        } else {
            f64::INFINITY
        }
    };
    let mut t_next: Vec<f64> = (0..d).map(|a| next_time(a, cell[a])).collect();
    let index = |cell: &[i64]| -> usize {
        cell.iter()
            .fold(0usize, |acc, &c| acc * cells + c.rem_euclid(cells as i64) as usize)
    };
    loop {
        let i = index(&cell);
        if !visited[i] {
            visited[i] = true;
            count += 1;
            if count == total {
                break;
            }
        }
        let (axis, &t) = t_next
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("dimension is positive");
        if t > t_max {
            break;
        }
        cell[axis] += if omega[axis] > 0.0 { 1 } else { -1 };
        t_next[axis] = next_time(axis, cell[axis]);
    }
    (count, total)
}

/// Outcome of simulating the linear flow of a torus against its lattice
/// classification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowCheck {
    pub passed: bool,
    pub class: TorusClass,
    /// Frequency used for the simulation, normalized to `|ω|∞ = 1`.
    pub omega: Vec<f64>,
    /// Largest excursion of any witness phase `k·x mod 1` from its start.
    pub max_phase_drift: f64,
    pub cells_visited: usize,
    pub cells_total: usize,
    /// Smallest `|k·ω|/|k|₂` over the enumerated vectors, a measure of how
    /// close the frequency is to a resonance of bounded order.
    pub min_small_divisor: f64,
    pub diagnostics: Vec<String>,
}

/// Simulate the linear flow on the torus over `p` and check that it agrees
/// with [`super::classify_torus`]: every witness `k` keeps `k·x mod 1`
/// constant, and an ergodic orbit visits every cell of the coarse
/// partition by time `t_max`.
///
/// Time is measured in periods of the fastest angle (`ω` is normalized to
/// unit sup norm), which leaves orbits and classifications unchanged.
pub fn flow_vs_lattice_check(
    model: &HamiltonianModel,
    p: &Point,
    max_norm: i64,
    res_tol: f64,
    t_max: f64,
    n_steps: usize,
) -> Result<FlowCheck, EvalError> {
    let grad = model.eval_grad(&p.coords)?;
    let scanner = ResonanceScanner::new(model.dim, max_norm);
    let class = scanner.classify(grad.as_slice(), res_tol);
    let sup = grad.amax();
    let omega: Vec<f64> = if sup > 0.0 {
        grad.iter().map(|w| w / sup).collect()
    } else {
        vec![0.0; model.dim]
    };
    let x0 = vec![0.0; model.dim];
    let mut diagnostics = Vec::new();

    let mut max_phase_drift: f64 = 0.0;
    let steps = n_steps.max(1);
    for k in &class.witnesses {
        let phase0 = wrap(k.dot(&x0));
        let mut drift: f64 = 0.0;
        for i in 0..=steps {
            let t = t_max * i as f64 / steps as f64;
            let x = linear_flow(&omega, &x0, t);
            drift = drift.max(circular_distance(k.dot(&x), phase0));
        }
        if drift > PHASE_TOL {
            diagnostics.push(format!("witness {k}: phase drifted by {drift:e}"));
        }
        max_phase_drift = max_phase_drift.max(drift);
    }

    let (cells_visited, cells_total) = if sup > 0.0 {
        torus_cell_coverage(&omega, &x0, t_max, COVERAGE_CELLS_PER_AXIS)
    } else {
        (1, COVERAGE_CELLS_PER_AXIS.pow(model.dim as u32))
    };
    let coverage_ok = class.kind != TorusKind::Ergodic || cells_visited == cells_total;
    if !coverage_ok {
        diagnostics.push(format!(
            "ergodic classification but orbit visited {cells_visited}/{cells_total} cells by t = {t_max}"
        ));
    }
    let min_small_divisor = scanner
        .vectors()
        .iter()
        .map(|k| k.dot(&omega).abs() / k.norm2())
        .fold(f64::INFINITY, f64::min);

    Ok(FlowCheck {
        passed: max_phase_drift <= PHASE_TOL && coverage_ok,
        class,
        omega,
        max_phase_drift,
        cells_visited,
        cells_total,
        min_small_divisor,
        diagnostics,
    })
}
