use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::output::{csv_document, fmt_f64, json_document, Artifact};
use super::svg::{Frame, Svg};
use super::{Format, ReportError};
use crate::hamiltonian::{ModelDocument, Region};
use crate::resonance::{extract_sigma_from_gradients, gradient_grid, is_resonant, ResonanceScanner, ResonanceVector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WebSet {
    pub k: ResonanceVector,
    pub sup_norm: i64,
    /// Grid cells on which `Ω_k` vanishes or changes sign.
    pub cells: usize,
    /// Every admissible node is resonant for `k`: the set fills the region.
    pub fills_region: bool,
    /// Zero-level curves, `d = 2` only.
    pub polylines: Vec<Vec<[f64; 2]>>,
    #[serde(skip)]
    cell_centers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WebReport {
    pub config: RunConfig,
    pub model: ModelDocument,
    pub region: Region,
    pub max_norm: i64,
    pub nodes_per_axis: usize,
    pub vectors_scanned: usize,
    /// Nonempty resonant sets only, by sup norm then lexicographically.
    pub sets: Vec<WebSet>,
    pub warnings: Vec<String>,
}

/// Resonance web: `Σ_k` for every primitive `k` with `|k|∞ <= max_norm`.
pub fn web(cfg: &RunConfig) -> Result<WebReport, ReportError> {
    let model = cfg.load_model()?;
    let region = cfg.region.clone().expect("resolved config has a region");
    let d = model.dim;
    let nodes = vec![cfg.grid; d];
    cfg.grid
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or(ReportError::GridTooLarge { nodes: cfg.grid, dim: d })?;
    let grads = gradient_grid(&model, &region, &nodes);
    if grads.iter().all(Option::is_none) {
        return Err(ReportError::EmptyGrid);
    }
    let scanner = ResonanceScanner::new(d, cfg.max_norm);
    let sets: Vec<WebSet> = scanner
        .vectors()
        .par_iter()
        .filter_map(|k| {
            let s = extract_sigma_from_gradients(k, &region, &nodes, &grads);
            if s.cells.is_empty() {
                return None;
            }
            let fills_region = grads.iter().flatten().all(|g| is_resonant(k, g, cfg.res_tol));
            Some(WebSet {
                k: k.clone(),
                sup_norm: k.sup_norm(),
                cells: s.cells.len(),
                fills_region,
                cell_centers: if d == 2 { Vec::new() } else { s.cells.iter().map(|c| s.cell_center(c)).collect() },
                polylines: s.polylines,
            })
        })
        .collect();
    let mut warnings = Vec::new();
    if d != 2 && cfg.wants(Format::Svg) {
        warnings.push(format!("the web drawing needs d = 2; no SVG for d = {d}"));
    }
    Ok(WebReport {
        config: cfg.clone(),
        model: model.to_document(),
        region,
        max_norm: cfg.max_norm,
        nodes_per_axis: cfg.grid,
        vectors_scanned: scanner.vectors().len(),
        sets,
        warnings,
    })
}

/// Stroke width for `Σ_k`: thinner for longer `k`.
pub fn stroke_width(k: &ResonanceVector) -> f64 {
    2.4 / k.norm2()
}

impl WebReport {
    pub fn summary(&self) -> String {
        let mut out = format!(
            "web {} on {}: {} of {} primitive vectors with |k| <= {} have nonempty resonant sets\n",
            self.model.name.as_deref().unwrap_or("model"),
            self.region,
            self.sets.len(),
            self.vectors_scanned,
            self.max_norm
        );
        for s in self.sets.iter().filter(|s| s.fills_region) {
            out += &format!("  {} is resonant on the whole region\n", s.k);
        }
        for w in &self.warnings {
            out += &format!("warning: {w}\n");
        }
        out
    }

    fn csv(&self) -> String {
        let d = self.region.dim();
        let mut header = vec!["k".to_string()];
        if d == 2 {
            header.extend(["polyline", "vertex", "x1", "x2"].map(String::from));
            let rows = self.sets.iter().flat_map(|s| {
                s.polylines.iter().enumerate().flat_map(move |(li, line)| {
                    line.iter()
                        .enumerate()
                        .map(move |(vi, p)| vec![s.k.to_string(), li.to_string(), vi.to_string(), fmt_f64(p[0]), fmt_f64(p[1])])
                })
            });
            csv_document(&self.config, &header, rows)
        } else {
            header.extend((1..=d).map(|i| format!("center{i}")));
            let rows = self.sets.iter().flat_map(|s| {
                s.cell_centers.iter().map(move |c| {
                    let mut row = vec![s.k.to_string()];
                    row.extend(c.iter().map(|&x| fmt_f64(x)));
                    row
                })
            });
            csv_document(&self.config, &header, rows)
        }
    }

    fn svg(&self) -> String {
        let frame = Frame::new(&self.region, 560.0);
        let mut svg = Svg::new(
            &frame,
            &format!("resonance web, |k| <= {}, {} sets", self.max_norm, self.sets.len()),
        );
        if self.sets.iter().any(|s| s.fills_region) {
            svg.fill_region("#1f4e9c", 0.15);
        }
        // short vectors last, so their thicker strokes sit on top
        let mut order: Vec<&WebSet> = self.sets.iter().collect();
        order.sort_by(|a, b| b.k.norm2().total_cmp(&a.k.norm2()).then_with(|| a.k.cmp(&b.k)));
        for s in order {
            for line in &s.polylines {
                svg.polyline(line, "#1f4e9c", stroke_width(&s.k));
            }
        }
        svg.finish(&self.config)
    }

    pub fn artifacts(&self) -> Vec<Artifact> {
        let mut out = Vec::new();
        if self.config.wants(Format::Json) {
            out.push(Artifact::new("web.json", json_document(self)));
        }
        if self.config.wants(Format::Csv) {
            out.push(Artifact::new("web.csv", self.csv()));
        }
        if self.config.wants(Format::Svg) && self.region.dim() == 2 {
            out.push(Artifact::new("web.svg", self.svg()));
        }
        out
    }
}
