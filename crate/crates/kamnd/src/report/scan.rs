use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::output::{csv_document, fmt_f64, json_document, Artifact};
use super::svg::{heat_color, Frame, Svg};
use super::ReportError;
use crate::conditions::{iso_energetic, kolmogorov, n_matrix, weak, ConditionId, ToleranceConfig};
use crate::hamiltonian::{HamiltonianModel, Jet2, ModelDocument, Point, Region, DEFAULT_GUARD_RADIUS};
use crate::linalg;
use crate::resonance::marching_squares;

/// Conditions drawn by a scan, in column order.
pub const SCAN_CONDITIONS: [ConditionId; 3] = [ConditionId::Kolmogorov, ConditionId::IsoEnergetic, ConditionId::Weak];

/// At most this many failure cells per condition are listed in JSON; the
/// cell CSV has all of them.
pub const MAX_JSON_CELLS: usize = 2000;

const GOLDEN_ITERATIONS: usize = 80;

/// Margins relative to the matrix norm, used to localize failure sets:
/// `|det F''| / σ₁(F'')^d`, `|det B| / σ₁(B)^(d+1)` for the bordered
/// matrix and `σ_min / σ_max` of the N matrix. Unlike the verdict margins
/// they are not rescaled row by row, so they go to zero continuously on
/// approach to the failure set.
pub fn localization_margins(jet: &Jet2) -> [f64; 3] {
    let det_like = |m: &nalgebra::DMatrix<f64>| {
        let sv = linalg::singular_values(m);
        match sv.first() {
            Some(&s1) if s1 > 0.0 => sv.iter().map(|s| s / s1).product(),
            _ => 0.0,
        }
    };
    let sv = linalg::singular_values(&n_matrix(jet));
    let rank_like = match (sv.first(), sv.last()) {
        (Some(&s1), Some(&sn)) if s1 > 0.0 => sn / s1,
        _ => 0.0,
    };
    [det_like(&jet.hess), det_like(&linalg::bordered(&jet.hess, &jet.grad)), rank_like]
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct NodeEval {
    det: f64,
    bordered_det: f64,
    weak_rank: usize,
    margin: [f64; 3],
    holds: [bool; 3],
    rel: [f64; 3],
}

fn eval_node(model: &HamiltonianModel, x: &[f64], tol: &ToleranceConfig) -> Option<NodeEval> {
    if !model.is_admissible(x, DEFAULT_GUARD_RADIUS) {
        return None;
    }
    let jet = model.eval_jet2(&Point::new(x.to_vec())).ok()?;
    let k = kolmogorov(&jet, tol).ok()?;
    let i = iso_energetic(&jet, tol).ok()?;
    let w = weak(&jet, tol).ok()?;
    Some(NodeEval {
        det: k.raw["det"],
        bordered_det: i.raw["bordered_det"],
        weak_rank: w.raw["rank"] as usize,
        margin: [k.margin, i.margin, w.margin],
        holds: [k.holds, i.holds, w.holds],
        rel: localization_margins(&jet),
    })
}

fn rel_at(model: &HamiltonianModel, x: &[f64], c: usize) -> f64 {
    if !model.is_admissible(x, DEFAULT_GUARD_RADIUS) {
        return f64::INFINITY;
    }
    match model.eval_jet2(&Point::new(x.to_vec())) {
        Ok(jet) if jet.is_finite() => localization_margins(&jet)[c],
        _ => f64::INFINITY,
    }
}

fn threshold(c: usize, tol: &ToleranceConfig) -> f64 {
    if c == 2 {
        tol.rank_rel
    } else {
        tol.det_rel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// A corner node fails the condition.
    FailingNode,
    /// The determinant takes both signs at the corners.
    SignChange,
    /// A local minimum of the localization margin, refined along a grid
    /// line, falls below the threshold inside the cell.
    Valley,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureCell {
    /// Lower-corner node indices.
    pub cell: Vec<usize>,
    pub center: Vec<f64>,
    pub reason: FailureReason,
    /// Smallest localization margin seen for this cell.
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionScan {
    pub condition: ConditionId,
    pub threshold: f64,
    pub failing_nodes: usize,
    pub failure_cell_count: usize,
    pub failure_cells: Vec<FailureCell>,
    pub cells_truncated: bool,
    /// Zero-level curves of the determinant, `d = 2` only.
    pub zero_curves: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub config: RunConfig,
    pub model: ModelDocument,
    pub region: Region,
    pub nodes_per_axis: usize,
    pub nodes: usize,
    pub admissible_nodes: usize,
    pub conditions: Vec<ConditionScan>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    grid: Vec<Option<NodeEval>>,
    #[serde(skip)]
    all_cells: Vec<Vec<FailureCell>>,
}

struct Grid<'a> {
    region: &'a Region,
    n: usize,
    d: usize,
}

impl Grid<'_> {
    fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.n {
            self.region.hi(axis)
        } else {
            self.region.lo(axis) + self.region.width(axis) * i as f64 / (self.n - 1) as f64
        }
    }

    fn unflatten(&self, mut idx: usize, n: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for a in (0..self.d).rev() {
            out[a] = idx % n;
            idx /= n;
        }
        out
    }

    fn flatten(&self, ix: &[usize]) -> usize {
        ix.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    fn point(&self, ix: &[usize]) -> Vec<f64> {
        ix.iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    fn cell_center(&self, cell: &[usize]) -> Vec<f64> {
        cell.iter()
            .enumerate()
            .map(|(a, &i)| 0.5 * (self.coord(a, i) + self.coord(a, i + 1)))
            .collect()
    }

    fn corners(&self, cell: &[usize]) -> Vec<usize> {
        (0..1usize << self.d)
            .map(|c| {
                let ix: Vec<usize> = (0..self.d).map(|a| cell[a] + ((c >> (self.d - 1 - a)) & 1)).collect();
                self.flatten(&ix)
            })
            .collect()
    }
}

/// Minimize `f` on `[lo, hi]` by golden-section search; returns the best
/// point and value seen.
fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut e = a + r * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    let mut best = if fc <= fe { (c, fc) } else { (e, fe) };
    for _ in 0..GOLDEN_ITERATIONS {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - r * (b - a);
            fc = f(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + r * (b - a);
            fe = f(e);
            if fe < best.1 {
                best = (e, fe);
            }
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
    }
    best
}

struct Valley {
    node: Vec<usize>,
    axis: usize,
}

fn failure_cells(model: &HamiltonianModel, g: &Grid, grid: &[Option<NodeEval>], c: usize, tol: &ToleranceConfig) -> Vec<FailureCell> {
    let thr = threshold(c, tol);
    let d = g.d;
    let n_cells = (g.n - 1).pow(d as u32);
    let mut found: BTreeMap<Vec<usize>, FailureCell> = BTreeMap::new();
    for ci in 0..n_cells {
        let cell = g.unflatten(ci, g.n - 1);
        let corners: Option<Vec<NodeEval>> = g.corners(&cell).into_iter().map(|i| grid[i]).collect();
        let Some(corners) = corners else { continue };
        let min_rel = corners.iter().map(|e| e.rel[c]).fold(f64::INFINITY, f64::min);
        let reason = if corners.iter().any(|e| !e.holds[c]) {
            Some(FailureReason::FailingNode)
        } else if c < 2 {
            let signed = |e: &NodeEval| if c == 0 { e.det } else { e.bordered_det };
            let neg = corners.iter().any(|e| signed(e) < 0.0);
            let pos = corners.iter().any(|e| signed(e) > 0.0);
            (neg && pos).then_some(FailureReason::SignChange)
        } else {
            None
        };
        if let Some(reason) = reason {
            found.insert(
                cell.clone(),
                FailureCell {
                    center: g.cell_center(&cell),
                    cell,
                    reason,
                    min_margin: if reason == FailureReason::SignChange { 0.0 } else { min_rel },
                },
            );
        }
    }

    // interior local minima of the localization margin along each axis
    let mut valleys = Vec::new();
    for (idx, e) in grid.iter().enumerate() {
        let Some(e) = e else { continue };
        if !e.holds[c] {
            continue;
        }
        let node = g.unflatten(idx, g.n);
        for axis in 0..d {
            if node[axis] == 0 || node[axis] + 1 == g.n {
                continue;
            }
            let mut prev = node.clone();
            prev[axis] -= 1;
            let mut next = node.clone();
            next[axis] += 1;
            let (Some(p), Some(q)) = (grid[g.flatten(&prev)], grid[g.flatten(&next)]) else {
                continue;
            };
            let m = e.rel[c];
            if m <= p.rel[c] && m <= q.rel[c] && (m < p.rel[c] || m < q.rel[c]) {
                valleys.push(Valley { node: node.clone(), axis });
            }
        }
    }
    let refined: Vec<Option<(Vec<Vec<usize>>, f64)>> = valleys
        .par_iter()
        .map(|v| {
            let base = g.point(&v.node);
            let i = v.node[v.axis];
            let (lo, hi) = (g.coord(v.axis, i - 1), g.coord(v.axis, i + 1));
            let f = |t: f64| {
                let mut x = base.clone();
                x[v.axis] = t;
                rel_at(model, &x, c)
            };
            let (t, m) = golden_min(f, lo, hi);
            if m > thr {
                return None;
            }
            let along = if t <= base[v.axis] { i - 1 } else { i };
            // the minimizer lies on a grid line: every cell touching it
            let mut cells = vec![Vec::new()];
            for a in 0..d {
                let options: Vec<usize> = if a == v.axis {
                    vec![along]
                } else {
                    let j = v.node[a];
                    [j.checked_sub(1), (j + 1 < g.n).then_some(j)].into_iter().flatten().collect()
                };
                cells = cells
                    .into_iter()
                    .flat_map(|prefix: Vec<usize>| {
                        options.iter().map(move |&o| {
                            let mut p = prefix.clone();
                            p.push(o);
                            p
                        })
                    })
                    .collect();
            }
            Some((cells, m))
        })
        .collect();
    for (cells, m) in refined.into_iter().flatten() {
        for cell in cells {
            let entry = found.entry(cell.clone()).or_insert_with(|| FailureCell {
                center: g.cell_center(&cell),
                cell,
                reason: FailureReason::Valley,
                min_margin: m,
            });
            if entry.reason == FailureReason::Valley {
                entry.min_margin = entry.min_margin.min(m);
            }
        }
    }
    found.into_values().collect()
}

/// Evaluate Kolmogorov, iso-energetic and weak nondegeneracy on a grid of
/// `config.grid` nodes per axis and locate the cells where they fail.
pub fn scan(cfg: &RunConfig) -> Result<ScanReport, ReportError> {
    let model = cfg.load_model()?;
    let region = cfg.region.clone().expect("resolved config has a region");
    let d = model.dim;
    let g = Grid { region: &region, n: cfg.grid, d };
    let total = cfg
        .grid
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or(ReportError::GridTooLarge { nodes: cfg.grid, dim: d })?;
    let grid: Vec<Option<NodeEval>> = (0..total)
        .into_par_iter()
        .map(|idx| eval_node(&model, &g.point(&g.unflatten(idx, g.n)), &cfg.tol))
        .collect();
    let admissible = grid.iter().filter(|e| e.is_some()).count();
    if admissible == 0 {
        return Err(ReportError::EmptyGrid);
    }
    let mut warnings = Vec::new();
    if d != 2 && cfg.wants(super::Format::Svg) {
        warnings.push(format!("heatmaps need d = 2; no SVG for d = {d}"));
    }

    let mut conditions = Vec::new();
    let mut all_cells = Vec::new();
    for (c, &id) in SCAN_CONDITIONS.iter().enumerate() {
        let cells = failure_cells(&model, &g, &grid, c, &cfg.tol);
        let zero_curves = if d == 2 && c < 2 {
            let signed: Vec<f64> = grid
                .iter()
                .map(|e| e.map_or(f64::NAN, |e| if c == 0 { e.det } else { e.bordered_det }))
                .collect();
            marching_squares(&signed, &region, &[g.n, g.n])
        } else {
            Vec::new()
        };
        conditions.push(ConditionScan {
            condition: id,
            threshold: threshold(c, &cfg.tol),
            failing_nodes: grid.iter().flatten().filter(|e| !e.holds[c]).count(),
            failure_cell_count: cells.len(),
            cells_truncated: cells.len() > MAX_JSON_CELLS,
            failure_cells: cells.iter().take(MAX_JSON_CELLS).cloned().collect(),
            zero_curves,
        });
        all_cells.push(cells);
    }
    Ok(ScanReport {
        config: cfg.clone(),
        model: model.to_document(),
        region,
        nodes_per_axis: cfg.grid,
        nodes: total,
        admissible_nodes: admissible,
        conditions,
        warnings,
        grid,
        all_cells,
    })
}

impl ScanReport {
    /// All failure cells of condition `c` (index into [`SCAN_CONDITIONS`]).
    pub fn all_failure_cells(&self, c: usize) -> &[FailureCell] {
        &self.all_cells[c]
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "scan {} on {}: {} nodes ({} admissible)\n",
            self.model.name.as_deref().unwrap_or("model"),
            self.region,
            self.nodes,
            self.admissible_nodes
        );
        for c in &self.conditions {
            out += &format!(
                "  {:<13} failing nodes {:>7}  failure cells {:>7}\n",
                c.condition.name(),
                c.failing_nodes,
                c.failure_cell_count
            );
        }
        for w in &self.warnings {
            out += &format!("warning: {w}\n");
        }
        out
    }

    fn nodes_csv(&self) -> String {
        let d = self.region.dim();
        let g = Grid { region: &self.region, n: self.nodes_per_axis, d };
        let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        for h in [
            "det",
            "kolmogorov_margin",
            "kolmogorov_rel",
            "kolmogorov_holds",
            "bordered_det",
            "iso_energetic_margin",
            "iso_energetic_rel",
            "iso_energetic_holds",
            "weak_rank",
            "weak_margin",
            "weak_rel",
            "weak_holds",
        ] {
            header.push(h.into());
        }
        let rows = self.grid.iter().enumerate().map(|(idx, e)| {
            let mut row: Vec<String> = g.point(&g.unflatten(idx, g.n)).into_iter().map(fmt_f64).collect();
            match e {
                Some(e) => {
                    for c in 0..3 {
                        row.push(match c {
                            0 => fmt_f64(e.det),
                            1 => fmt_f64(e.bordered_det),
                            _ => e.weak_rank.to_string(),
                        });
                        row.push(fmt_f64(e.margin[c]));
                        row.push(fmt_f64(e.rel[c]));
                        row.push(e.holds[c].to_string());
                    }
                }
                None => row.extend(std::iter::repeat_n(String::new(), 12)),
            }
            row
        });
        csv_document(&self.config, &header, rows)
    }

    fn cells_csv(&self) -> String {
        let d = self.region.dim();
        let mut header = vec!["condition".to_string()];
        header.extend((1..=d).map(|i| format!("cell{i}")));
        header.extend((1..=d).map(|i| format!("center{i}")));
        header.push("reason".into());
        header.push("min_margin".into());
        let rows = SCAN_CONDITIONS.iter().zip(&self.all_cells).flat_map(|(id, cells)| {
            cells.iter().map(move |fc| {
                let mut row = vec![id.name().to_string()];
                row.extend(fc.cell.iter().map(|i| i.to_string()));
                row.extend(fc.center.iter().map(|&x| fmt_f64(x)));
                row.push(serde_json::to_value(fc.reason).expect("enum").as_str().expect("string").to_string());
                row.push(fmt_f64(fc.min_margin));
                row
            })
        });
        csv_document(&self.config, &header, rows)
    }

    fn heatmap(&self, c: usize) -> String {
        let n = self.nodes_per_axis;
        let g = Grid { region: &self.region, n, d: 2 };
        let frame = Frame::new(&self.region, 560.0);
        let id = SCAN_CONDITIONS[c];
        let mut svg = Svg::new(&frame, &format!("{} localization margin, log10", id.name()));
        // one rect per run of equal colour along x1
        for j in 0..n - 1 {
            let mut run: Option<(usize, String)> = None;
            for i in 0..=n - 1 {
                let colour = (i < n - 1).then(|| {
                    let corners = g.corners(&[i, j]);
                    let m = corners
                        .iter()
                        .map(|&k| self.grid[k].map_or(f64::NAN, |e| e.rel[c]))
                        .fold(f64::INFINITY, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.min(b) });
                    heat_color(m)
                });
                let flush = match (&run, &colour) {
                    (Some((_, a)), Some(b)) => a != b,
                    (Some(_), None) => true,
                    _ => false,
                };
                if flush {
                    let (start, col) = run.take().expect("run");
                    svg.rect(
                        [g.coord(0, start), g.coord(1, j)],
                        [g.coord(0, i), g.coord(1, j + 1)],
                        &col,
                    );
                }
                if run.is_none() {
                    run = colour.map(|col| (i, col));
                }
            }
        }
        for fc in &self.all_cells[c] {
            let (i, j) = (fc.cell[0], fc.cell[1]);
            svg.outline([g.coord(0, i), g.coord(1, j)], [g.coord(0, i + 1), g.coord(1, j + 1)], "#d62728", 0.8);
        }
        for line in &self.conditions[c].zero_curves {
            svg.polyline(line, "#000000", 1.2);
        }
        svg.colour_bar(-12.0, 0.0);
        svg.finish(&self.config)
    }

    pub fn artifacts(&self) -> Vec<Artifact> {
        use super::Format;
        let mut out = Vec::new();
        if self.config.wants(Format::Json) {
            out.push(Artifact::new("scan.json", json_document(self)));
        }
        if self.config.wants(Format::Csv) {
            out.push(Artifact::new("scan.csv", self.nodes_csv()));
            out.push(Artifact::new("scan_cells.csv", self.cells_csv()));
        }
        if self.config.wants(Format::Svg) && self.region.dim() == 2 {
            for (c, id) in SCAN_CONDITIONS.iter().enumerate() {
                out.push(Artifact::new(format!("scan_{}.svg", id.name().to_ascii_lowercase()), self.heatmap(c)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::config::{resolve, Settings};

    fn cfg(model: &str, region: Option<&str>, grid: usize) -> RunConfig {
        let s = Settings {
            model: Some(model.into()),
            region: region.map(str::to_string),
            grid: Some(grid),
            ..Settings::default()
        };
        resolve(s, None, None).unwrap()
    }

    #[test]
    fn golden_section_finds_interior_minimum() {
        let (t, m) = golden_min(|x| (x - 0.3).powi(2), -1.0, 1.0);
        assert!((t - 0.3).abs() < 1e-7);
        assert!(m < 1e-14);
    }

    #[test]
    fn quadratic_has_no_failures() {
        let r = scan(&cfg("quadratic", Some("1:2"), 33)).unwrap();
        for c in &r.conditions {
            assert_eq!(c.failure_cell_count, 0, "{:?}", c.condition);
        }
    }

    #[test]
    fn quartic_weak_failures_lie_on_the_axes() {
        let n = 64;
        let r = scan(&cfg("quartic", Some("-1:1"), n)).unwrap();
        let h = 2.0 / (n - 1) as f64;
        let weak = r.all_failure_cells(2);
        assert!(!weak.is_empty());
        for fc in weak {
            let dist = fc.center[0].abs().min(fc.center[1].abs());
            assert!(dist <= h, "{fc:?}");
        }
        // both axes are covered along their whole length
        for j in 0..n - 1 {
            assert!(weak.iter().any(|fc| fc.cell[1] == j && fc.center[0].abs() <= h));
            assert!(weak.iter().any(|fc| fc.cell[0] == j && fc.center[1].abs() <= h));
        }
    }

    #[test]
    fn mixed_iso_curve_only_off_domain() {
        let r = scan(&cfg("mixed", Some("0.05:2,-2:2"), 65)).unwrap();
        assert_eq!(r.conditions[1].failure_cell_count, 0);
        assert!(r.conditions[1].zero_curves.is_empty());
    }

    #[test]
    fn artifacts_and_formats() {
        let r = scan(&cfg("quartic", Some("-1:1"), 16)).unwrap();
        let names: Vec<String> = r.artifacts().into_iter().map(|a| a.name).collect();
        assert_eq!(
            names,
            ["scan.json", "scan.csv", "scan_cells.csv", "scan_kolmogorov.svg", "scan_isoenergetic.svg", "scan_weak.svg"]
        );
        let csv = r.nodes_csv();
        assert!(csv.starts_with("# config: "));
        assert_eq!(csv.lines().count(), 2 + 16 * 16);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let s = Settings {
            expr: Some("sqrt(x1)".into()),
            region: Some("-2:-1".into()),
            grid: Some(4),
            ..Settings::default()
        };
        assert!(matches!(scan(&resolve(s, None, None).unwrap()), Err(ReportError::EmptyGrid)));
    }
}
