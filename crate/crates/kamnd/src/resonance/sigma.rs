use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::ResonanceVector;
use crate::hamiltonian::{HamiltonianModel, Region, DEFAULT_GUARD_RADIUS};

/// Values of `Ω_k = ∇F·k` on the node grid of `region`, `nodes[a]` nodes
/// along axis `a` (first axis slowest). Nodes that cannot be evaluated
/// are NaN.
pub fn omega_grid(model: &HamiltonianModel, k: &ResonanceVector, region: &Region, nodes: &[usize]) -> Vec<f64> {
    let total: usize = nodes.iter().product();
    (0..total)
        .map(|idx| {
            let x = node_coords(region, nodes, &unflatten(idx, nodes));
            if !model.is_admissible(&x, DEFAULT_GUARD_RADIUS) {
                return f64::NAN;
            }
            match model.eval_grad(&x) {
                Ok(g) => k.dot(g.as_slice()),
                Err(_) => f64::NAN,
            }
        })
        .collect()
}

/// Gradients `∇F` on the node grid of `region`; `None` where the node
/// cannot be evaluated. Shared by all `k` of a resonance web.
pub fn gradient_grid(model: &HamiltonianModel, region: &Region, nodes: &[usize]) -> Vec<Option<Vec<f64>>> {
    let total: usize = nodes.iter().product();
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = node_coords(region, nodes, &unflatten(idx, nodes));
            if !model.is_admissible(&x, DEFAULT_GUARD_RADIUS) {
                return None;
            }
            model.eval_grad(&x).ok().map(|g| g.as_slice().to_vec())
        })
        .collect()
}

fn unflatten(mut idx: usize, nodes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; nodes.len()];
    for a in (0..nodes.len()).rev() {
        out[a] = idx % nodes[a];
        idx /= nodes[a];
    }
    out
}

fn flatten(ix: &[usize], nodes: &[usize]) -> usize {
    ix.iter().zip(nodes).fold(0, |acc, (&i, &n)| acc * n + i)
}

fn node_coords(region: &Region, nodes: &[usize], ix: &[usize]) -> Vec<f64> {
    ix.iter()
        .enumerate()
        .map(|(a, &i)| {
            if i + 1 == nodes[a] {
                region.hi(a)
            } else {
                region.lo(a) + region.width(a) * i as f64 / (nodes[a] - 1) as f64
            }
        })
        .collect()
}

/// Approximation of the resonant set `Σ_k = {Ω_k = 0}` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaSet {
    pub k: ResonanceVector,
    pub region: Region,
    pub nodes: Vec<usize>,
    /// Lower-corner node indices of cells on which `Ω_k` changes sign or
    /// vanishes. Cells with an unevaluable corner are skipped.
    pub cells: Vec<Vec<usize>>,
    /// Zero-level curves from marching squares, only for `d = 2`.
    pub polylines: Vec<Vec<[f64; 2]>>,
}

impl SigmaSet {
    /// Centre of a flagged cell in action coordinates.
    pub fn cell_center(&self, cell: &[usize]) -> Vec<f64> {
        cell.iter()
            .enumerate()
            .map(|(a, &i)| {
                let h = self.region.width(a) / (self.nodes[a] - 1) as f64;
                self.region.lo(a) + h * (i as f64 + 0.5)
            })
            .collect()
    }
}

/// Extract `Σ_k` on `region` sampled at `nodes[a] >= 2` nodes per axis.
pub fn extract_sigma(model: &HamiltonianModel, k: &ResonanceVector, region: &Region, nodes: &[usize]) -> SigmaSet {
    sigma_from_values(k, region, nodes, omega_grid(model, k, region, nodes))
}

/// [`extract_sigma`] from a precomputed [`gradient_grid`].
pub fn extract_sigma_from_gradients(
    k: &ResonanceVector,
    region: &Region,
    nodes: &[usize],
    grads: &[Option<Vec<f64>>],
) -> SigmaSet {
    let values = grads
        .iter()
        .map(|g| g.as_ref().map_or(f64::NAN, |g| k.dot(g)))
        .collect();
    sigma_from_values(k, region, nodes, values)
}

fn sigma_from_values(k: &ResonanceVector, region: &Region, nodes: &[usize], values: Vec<f64>) -> SigmaSet {
    assert_eq!(nodes.len(), region.dim(), "one node count per axis");
    assert!(nodes.iter().all(|&n| n >= 2), "at least two nodes per axis");
    let d = nodes.len();
    let cell_dims: Vec<usize> = nodes.iter().map(|n| n - 1).collect();
    let n_cells: usize = cell_dims.iter().product();
    let mut cells = Vec::new();
    for c in 0..n_cells {
        let lower = unflatten(c, &cell_dims);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut nan = false;
        for corner in 0..(1usize << d) {
            let ix: Vec<usize> = (0..d).map(|a| lower[a] + ((corner >> (d - 1 - a)) & 1)).collect();
            let v = values[flatten(&ix, nodes)];
            if v.is_nan() {
                nan = true;
                break;
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !nan && lo <= 0.0 && hi >= 0.0 {
            cells.push(lower);
        }
    }
    let polylines = if d == 2 {
        marching_squares(&values, region, nodes)
    } else {
        Vec::new()
    };
    SigmaSet {
        k: k.clone(),
        region: region.clone(),
        nodes: nodes.to_vec(),
        cells,
        polylines,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    // between nodes (i, j) and (i + 1, j)
    H(usize, usize),
    // between nodes (i, j) and (i, j + 1)
    V(usize, usize),
}

/// Zero-level polylines of a 2-d node field. Saddle cells are resolved by
/// the sign of the cell-centre average.
pub(crate) fn marching_squares(values: &[f64], region: &Region, nodes: &[usize]) -> Vec<Vec<[f64; 2]>> {
    let (n0, n1) = (nodes[0], nodes[1]);
    let at = |i: usize, j: usize| values[i * n1 + j];
    let coord = |i: usize, j: usize| {
        let x = node_coords(region, nodes, &[i, j]);
        [x[0], x[1]]
    };
    let point_on = |e: Edge| -> [f64; 2] {
        let ((ai, aj), (bi, bj)) = match e {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (va, vb) = (at(ai, aj), at(bi, bj));
        let t = if va == vb { 0.5 } else { va / (va - vb) };
        let (pa, pb) = (coord(ai, aj), coord(bi, bj));
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..n0 - 1 {
        for j in 0..n1 - 1 {
            let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            if c.iter().any(|v| v.is_nan()) {
                continue;
            }
            let above: Vec<bool> = c.iter().map(|&v| v > 0.0).collect();
            // edges in corner order: c0-c1, c1-c2, c3-c2, c0-c3
            let edges = [Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j)];
            let crossing = [
                above[0] != above[1],
                above[1] != above[2],
                above[3] != above[2],
                above[0] != above[3],
            ];
            let hits: Vec<usize> = (0..4).filter(|&e| crossing[e]).collect();
            match hits.len() {
                2 => segments.push((edges[hits[0]], edges[hits[1]])),
                4 => {
                    let centre = c.iter().sum::<f64>() / 4.0;
                    if (centre > 0.0) == above[0] {
                        // c0 and c2 joined through the centre; cut off c1 and c3
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut incident: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(s);
        incident.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    let mut walk = |start: usize, from: Edge, used: &mut Vec<bool>| {
        let mut line = vec![point_on(from)];
        let mut seg = start;
        let mut at_edge = from;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at_edge { b } else { a };
            line.push(point_on(next));
            at_edge = next;
            match incident[&next].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        polylines.push(line);
    };
    // open chains first, starting from their ends, then closed loops
    let mut ends: Vec<(usize, Edge)> = Vec::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        for e in [*a, *b] {
            if incident[&e].len() == 1 {
                ends.push((s, e));
            }
        }
    }
    for (s, e) in ends {
        if !used[s] {
            walk(s, e, &mut used);
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            walk(s, segments[s].0, &mut used);
        }
    }
    polylines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{builtin, BuiltinParams};

    fn rv(k: &[i64]) -> ResonanceVector {
        ResonanceVector::new(k.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_anti_diagonal() {
        let q = builtin("quadratic", &BuiltinParams::default()).unwrap();
        let s = extract_sigma(&q, &rv(&[1, -1]), &Region::cube(2, 1.0, 2.0), &[11, 11]);
        // the diagonal passes through the nodes; neighbours of diagonal nodes are flagged
        for cell in &s.cells {
            assert!((cell[0] as i64 - cell[1] as i64).abs() <= 1);
        }
        assert_eq!(s.polylines.len(), 1);
        for p in &s.polylines[0] {
            assert!((p[0] - p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn quartic_curve_matches_closed_form() {
        // Ω_(1,1) = 4(ξ1³ + ξ2³) vanishes on ξ2 = -ξ1
        let q = builtin("quartic", &BuiltinParams::default()).unwrap();
        let s = extract_sigma(&q, &rv(&[1, 1]), &Region::cube(2, -1.0, 1.0), &[40, 40]);
        assert!(!s.polylines.is_empty());
        let h = 2.0 / 39.0;
        for line in &s.polylines {
            for p in line {
                assert!((p[0] + p[1]).abs() < h);
            }
        }
        // Ω_(2,1) = 4(2ξ1³ + ξ2³): ξ2 = -2^(1/3) ξ1
        let s = extract_sigma(&q, &rv(&[2, 1]), &Region::cube(2, -1.0, 1.0), &[60, 60]);
        let c = 2f64.powf(1.0 / 3.0);
        for line in &s.polylines {
            for p in line {
                assert!((p[1] + c * p[0]).abs() < 0.05, "{p:?}");
            }
        }
    }

    #[test]
    fn circle_is_a_closed_loop() {
        let values: Vec<f64> = (0..21 * 21)
            .map(|idx| {
                let (i, j) = (idx / 21, idx % 21);
                let (x, y) = (-1.5 + 0.15 * i as f64, -1.5 + 0.15 * j as f64);
                x * x + y * y - 1.0
            })
            .collect();
        let lines = marching_squares(&values, &Region::cube(2, -1.5, 1.5), &[21, 21]);
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        assert_eq!(l.first(), l.last());
        for p in l {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn unevaluable_nodes_are_skipped() {
        let n = builtin("norm", &BuiltinParams::default()).unwrap();
        // the origin is a node and is excluded
        let s = extract_sigma(&n, &rv(&[1, 0]), &Region::cube(2, -1.0, 1.0), &[5, 5]);
        for cell in &s.cells {
            assert!(!(cell[0] == 1 && cell[1] == 1));
            assert!(!(cell[0] == 2 && cell[1] == 2));
        }
        assert!(!s.cells.is_empty());
    }

    #[test]
    fn shared_gradients_match_direct_extraction() {
        let q = builtin("quartic", &BuiltinParams::default()).unwrap();
        let r = Region::cube(2, -1.0, 1.0);
        let g = gradient_grid(&q, &r, &[17, 17]);
        for k in [rv(&[1, 1]), rv(&[2, -1])] {
            assert_eq!(extract_sigma_from_gradients(&k, &r, &[17, 17], &g), extract_sigma(&q, &k, &r, &[17, 17]));
        }
    }

    #[test]
    fn three_dimensional_cells_only() {
        let q = builtin("quadratic", &BuiltinParams::dim(3)).unwrap();
        let s = extract_sigma(&q, &rv(&[1, -1, 0]), &Region::cube(3, 1.0, 2.0), &[5, 5, 5]);
        assert!(s.polylines.is_empty());
        assert!(!s.cells.is_empty());
        for cell in &s.cells {
            let c = s.cell_center(cell);
            assert!((c[0] - c[1]).abs() <= 0.25 + 1e-12);
        }
    }
}
