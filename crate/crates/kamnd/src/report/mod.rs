//! Report builders behind the command-line tool: configuration, the
//! `analyze`, `scan`, `web`, `hierarchy` and `selftest` reports, and their
//! JSON, CSV and SVG renderings.
//!
//! Every report embeds the resolved [`RunConfig`]. Rendering is
//! deterministic: the same configuration gives byte-identical files.

mod analyze;
pub mod config;
mod output;
mod scan;
mod svg;
mod web;

use serde::Serialize;
use thiserror::Error;

pub use analyze::{analyze, AnalyzeReport, JetDocument};
pub use config::{parse_list, parse_region, resolve, ConfigError, Format, ModelSource, RunConfig, Settings, SEED_ENV};
pub use output::{csv_document, fmt_f64, json_document, write_artifacts, Artifact};
pub use scan::{localization_margins, scan, ConditionScan, FailureCell, FailureReason, ScanReport, SCAN_CONDITIONS};
pub use web::{stroke_width, web, WebReport, WebSet};

use crate::hamiltonian::{builtin, default_region, BuiltinParams, ModelDocument, BUILTIN_NAMES};
use crate::hierarchy::{full_hierarchy, HierarchyOptions, HierarchyReport};
use crate::oracle::{run_selftest, FdSteps, SelftestOptions, SelftestReport};
use crate::sampling::SamplingError;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("no point given; use --point x1,x2,...")]
    NoPoint,
    #[error("inadmissible point: {0}")]
    Inadmissible(String),
    #[error("no admissible grid node in the region")]
    EmptyGrid,
    #[error("grid of {nodes} nodes per axis in dimension {dim} is too large")]
    GridTooLarge { nodes: usize, dim: usize },
    #[error("{0}")]
    Sampling(#[from] SamplingError),
}

#[derive(Debug, Clone, Serialize)]
pub struct HierarchyDocument {
    pub config: RunConfig,
    pub model: ModelDocument,
    pub report: HierarchyReport,
}

/// Full hierarchy check with the sample count, seed, tolerances and
/// `max_norm` of `cfg`.
pub fn hierarchy(cfg: &RunConfig) -> Result<HierarchyDocument, ReportError> {
    let model = cfg.load_model()?;
    let region = cfg.region.clone().expect("resolved config has a region");
    let opts = HierarchyOptions {
        n_samples: cfg.samples,
        seed: cfg.seed,
        tol: cfg.tol,
        res_tol: cfg.res_tol,
        max_norm: cfg.max_norm,
        ..HierarchyOptions::default()
    };
    let report = full_hierarchy(&model, &region, &opts)?;
    Ok(HierarchyDocument {
        config: cfg.clone(),
        model: model.to_document(),
        report,
    })
}

impl HierarchyDocument {
    pub fn artifacts(&self) -> Vec<Artifact> {
        let mut out = Vec::new();
        if self.config.wants(Format::Json) {
            out.push(Artifact::new("hierarchy.json", json_document(self)));
        }
        out.push(Artifact::new("hierarchy.txt", self.report.to_table()));
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestDocument {
    pub config: RunConfig,
    pub report: SelftestReport,
}

/// Oracle comparisons on every builtin. `fd_step` overrides both
/// finite-difference steps.
pub fn selftest(cfg: &RunConfig) -> SelftestDocument {
    let opts = SelftestOptions {
        seed: cfg.seed,
        steps: cfg.fd_step.map_or_else(FdSteps::default, FdSteps::uniform),
        tol: cfg.tol,
        res_tol: cfg.res_tol,
        max_norm: cfg.max_norm,
        ..SelftestOptions::default()
    };
    SelftestDocument {
        config: cfg.clone(),
        report: run_selftest(&opts),
    }
}

impl SelftestDocument {
    pub fn artifacts(&self) -> Vec<Artifact> {
        vec![
            Artifact::new("selftest.json", json_document(self)),
            Artifact::new("selftest.txt", self.report.to_table()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleEntry {
    pub name: String,
    pub expr: String,
    pub domain: String,
    pub excluded: Option<String>,
    pub default_region: String,
}

/// The builtin models at their default dimension.
pub fn list_examples() -> Vec<ExampleEntry> {
    BUILTIN_NAMES
        .iter()
        .map(|n| {
            let m = builtin(n, &BuiltinParams::default()).expect("builtin");
            ExampleEntry {
                name: m.name.clone(),
                expr: m.text.clone(),
                domain: m.domain.to_string(),
                excluded: m.excluded.as_ref().map(|e| e.text.clone()),
                default_region: default_region(&m).to_string(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(f: impl FnOnce(&mut Settings)) -> RunConfig {
        let mut s = Settings::default();
        f(&mut s);
        resolve(s, None, None).unwrap()
    }

    #[test]
    fn hierarchy_document_is_deterministic() {
        let c = cfg(|s| {
            s.model = Some("mixed".into());
            s.samples = Some(300);
            s.seed = Some(4);
        });
        let a = hierarchy(&c).unwrap().artifacts();
        let b = hierarchy(&c).unwrap().artifacts();
        assert_eq!(a, b);
        assert!(a[0].contents.contains("\"config\""));
    }

    #[test]
    fn selftest_step_override() {
        let c = cfg(|s| s.fd_step = Some(1e-13));
        assert!(!selftest(&c).report.passed);
    }

    #[test]
    fn examples_listing() {
        let l = list_examples();
        assert_eq!(l.len(), 5);
        assert_eq!(l[2].name, "mixed");
        assert_eq!(l[2].default_region, "[0.1,2]x[-2,2]");
    }
}
