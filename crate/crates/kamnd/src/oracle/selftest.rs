use rayon::prelude::*;
use serde::Serialize;

use super::{bordered_det_via_adjugate, cofactor_det, exhaustive_resonance, fd_jet2_with, rational_rank, same_span};
use super::{FdSteps, OracleDiff};
use crate::conditions::ToleranceConfig;
use crate::hamiltonian::{builtin, default_region, BuiltinParams, HamiltonianModel, Point, BUILTIN_NAMES};
use crate::hierarchy::{full_hierarchy, HierarchyOptions};
use crate::linalg;
use crate::resonance::{ResonanceScanner, DEFAULT_RES_TOL};
use crate::sampling::{sample_points_with_guard, Strategy};

pub const GRAD_TOL: f64 = 1e-8;
pub const HESS_TOL: f64 = 1e-6;
pub const DET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestOptions {
    /// Points per model, split evenly between low-discrepancy and grid.
    pub n_points: usize,
    pub seed: u64,
    pub steps: FdSteps,
    pub tol: ToleranceConfig,
    pub res_tol: f64,
    pub max_norm: i64,
    /// Samples for the hierarchy sanity run.
    pub hierarchy_samples: usize,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions {
            n_points: 100,
            seed: 0,
            steps: FdSteps::default(),
            tol: ToleranceConfig::default(),
            res_tol: DEFAULT_RES_TOL,
            max_norm: 5,
            hierarchy_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestSection {
    pub name: String,
    pub checks: usize,
    pub failures: usize,
    pub passed: bool,
    /// Only failing comparisons, plus the worst one per section.
    pub diffs: Vec<OracleDiff>,
    pub notes: Vec<String>,
}

impl SelftestSection {
    fn from_diffs(name: &str, all: Vec<OracleDiff>, notes: Vec<String>) -> Self {
        let failures = all.iter().filter(|d| !d.pass).count();
        let worst = all.iter().max_by(|a, b| (a.abs_err / a.tol.max(f64::MIN_POSITIVE)).total_cmp(&(b.abs_err / b.tol.max(f64::MIN_POSITIVE)))).cloned();
        let mut diffs: Vec<OracleDiff> = all.iter().filter(|d| !d.pass).cloned().collect();
        if failures == 0 {
            diffs.extend(worst);
        }
        SelftestSection {
            name: name.to_string(),
            checks: all.len(),
            failures,
            passed: failures == 0,
            diffs,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub options: SelftestOptions,
    pub models: Vec<String>,
    pub sections: Vec<SelftestSection>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl SelftestReport {
    pub fn failures(&self) -> usize {
        self.sections.iter().map(|s| s.failures).sum()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<14} {:>8} {:>9}  status\n", "section", "checks", "failures");
        for s in &self.sections {
            out += &format!(
                "{:<14} {:>8} {:>9}  {}\n",
                s.name,
                s.checks,
                s.failures,
                if s.passed { "ok" } else { "FAIL" }
            );
        }
        for d in self.sections.iter().flat_map(|s| &s.diffs).filter(|d| !d.pass).take(20) {
            out += &format!(
                "  {}: primary {:.6e} oracle {:.6e} abs {:.3e} rel {:.3e} tol {:.1e}\n",
                d.quantity, d.primary, d.oracle, d.abs_err, d.rel_err, d.tol
            );
        }
        for w in &self.warnings {
            out += &format!("warning: {w}\n");
        }
        out += if self.passed { "selftest passed\n" } else { "selftest FAILED\n" };
        out
    }
}

/// Every builtin at its default dimension, plus the dimension-generic ones at d = 3.
pub fn selftest_models() -> Vec<HamiltonianModel> {
    let mut models: Vec<HamiltonianModel> = BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n, &BuiltinParams::default()).expect("builtin"))
        .collect();
    for n in ["quadratic", "norm", "linear"] {
        models.push(builtin(n, &BuiltinParams::dim(3)).expect("builtin"));
    }
    models
}

fn label(model: &HamiltonianModel) -> String {
    format!("{}/d{}", model.name, model.dim)
}

fn points(model: &HamiltonianModel, opts: &SelftestOptions) -> Vec<Point> {
    let region = default_region(model);
    // keep every stencil point admissible
    let guard = 10.0 * opts.steps.grad.max(opts.steps.hess);
    let half = opts.n_points / 2;
    let mut pts = sample_points_with_guard(model, &region, half, Strategy::LowDiscrepancy, opts.seed, guard)
        .expect("default region has admissible points");
    pts.extend(
        sample_points_with_guard(model, &region, opts.n_points - half, Strategy::Grid, opts.seed, guard)
            .expect("default region has admissible points"),
    );
    pts
}

fn fmt_point(p: &[f64]) -> String {
    let c: Vec<String> = p.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", c.join(","))
}

fn derivative_diffs(model: &HamiltonianModel, pts: &[Point], steps: FdSteps) -> Vec<OracleDiff> {
    pts.par_iter()
        .flat_map_iter(|p| {
            let at = fmt_point(&p.coords);
            let ad = model.eval_jet2(p);
            let fd = fd_jet2_with(model, p, steps);
            match (ad, fd) {
                (Ok(ad), Ok(fd)) => vec![
                    OracleDiff::worst(format!("{} grad {at}", label(model)), ad.grad.as_slice(), fd.grad.as_slice(), GRAD_TOL),
                    OracleDiff::worst(format!("{} hess {at}", label(model)), ad.hess.as_slice(), fd.hess.as_slice(), HESS_TOL),
                ],
                _ => vec![OracleDiff::compare(format!("{} jet {at} unevaluable", label(model)), f64::NAN, 0.0, 0.0)],
            }
        })
        .collect()
}

fn determinant_diffs(model: &HamiltonianModel, pts: &[Point]) -> Vec<OracleDiff> {
    pts.par_iter()
        .flat_map_iter(|p| {
            let at = fmt_point(&p.coords);
            let Ok(jet) = model.eval_jet2(p) else {
                return vec![OracleDiff::compare(format!("{} jet {at} unevaluable", label(model)), f64::NAN, 0.0, 0.0)];
            };
            let mut out = Vec::new();
            let b = linalg::bordered(&jet.hess, &jet.grad);
            for (what, m) in [("det", &jet.hess), ("bordered_det", &b)] {
                if let Ok(c) = cofactor_det(m) {
                    out.push(OracleDiff::compare(format!("{} {what} {at}", label(model)), linalg::lu_det(m), c, DET_TOL));
                }
            }
            if jet.dim() <= 3 {
                if let (Ok(adj), Ok(c)) = (bordered_det_via_adjugate(&jet.hess, &jet.grad), cofactor_det(&b)) {
                    out.push(OracleDiff::compare(format!("{} adjugate identity {at}", label(model)), adj, c, DET_TOL));
                }
            }
            out
        })
        .collect()
}

fn resonance_diffs(model: &HamiltonianModel, pts: &[Point], opts: &SelftestOptions) -> Vec<OracleDiff> {
    let scanner = ResonanceScanner::new(model.dim, opts.max_norm);
    pts.par_iter()
        .map(|p| {
            let at = fmt_point(&p.coords);
            let q = format!("{} lattice rank {at}", label(model));
            let Ok(g) = model.eval_grad(&p.coords) else {
                return OracleDiff::compare(q, f64::NAN, 0.0, 0.0);
            };
            let class = scanner.classify(g.as_slice(), opts.res_tol);
            let full = exhaustive_resonance(g.as_slice(), opts.max_norm, opts.res_tol);
            let witnesses: Vec<Vec<i64>> = class.witnesses.iter().map(|k| k.as_slice().to_vec()).collect();
            // a degenerate lattice is reported by d - 1 witnesses plus the flag
            let primary_rank = class.order + usize::from(class.degenerate);
            let oracle_rank = rational_rank(&full);
            // witnesses are themselves resonant, so they lie in the oracle span
            let agree = if class.degenerate {
                oracle_rank == model.dim
            } else {
                same_span(&witnesses, &full)
            };
            let mut d = OracleDiff::compare(q, primary_rank as f64, oracle_rank as f64, 0.0);
            d.pass = d.pass && agree;
            d
        })
        .collect()
}

/// Run every oracle comparison on every builtin.
pub fn run_selftest(opts: &SelftestOptions) -> SelftestReport {
    let models = selftest_models();
    let mut derivs = Vec::new();
    let mut dets = Vec::new();
    let mut res = Vec::new();
    for m in &models {
        let pts = points(m, opts);
        derivs.extend(derivative_diffs(m, &pts, opts.steps));
        dets.extend(determinant_diffs(m, &pts));
        res.extend(resonance_diffs(m, &pts, opts));
    }
    let step_note = vec![format!("steps: gradient h = {:e}, hessian h = {:e}", opts.steps.grad, opts.steps.hess)];
    let mut sections = vec![
        SelftestSection::from_diffs("derivatives", derivs, step_note),
        SelftestSection::from_diffs("determinants", dets, Vec::new()),
        SelftestSection::from_diffs("resonance", res, vec![format!("max_norm = {}", opts.max_norm)]),
    ];

    // hierarchy sanity run with the configured tolerances
    let q = builtin("quadratic", &BuiltinParams::default()).expect("builtin");
    let hopts = HierarchyOptions {
        n_samples: opts.hierarchy_samples,
        seed: opts.seed,
        tol: opts.tol,
        res_tol: opts.res_tol,
        ..HierarchyOptions::default()
    };
    let mut warnings = Vec::new();
    match full_hierarchy(&q, &default_region(&q), &hopts) {
        Ok(h) => {
            warnings.extend(h.warnings.iter().map(|w| format!("hierarchy: {w}")));
            sections.push(SelftestSection {
                name: "hierarchy".into(),
                checks: h.relations.len(),
                failures: h.relations.iter().filter(|r| !r.passed).count(),
                passed: h.passed,
                diffs: Vec::new(),
                notes: vec![format!("quadratic, {} samples", opts.hierarchy_samples)],
            });
        }
        Err(e) => sections.push(SelftestSection {
            name: "hierarchy".into(),
            checks: 1,
            failures: 1,
            passed: false,
            diffs: Vec::new(),
            notes: vec![e.to_string()],
        }),
    }

    SelftestReport {
        options: opts.clone(),
        models: models.iter().map(label).collect(),
        passed: sections.iter().all(|s| s.passed),
        sections,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SelftestOptions {
        SelftestOptions {
            n_points: 20,
            hierarchy_samples: 200,
            ..SelftestOptions::default()
        }
    }

    #[test]
    fn default_selftest_passes() {
        let r = run_selftest(&small());
        assert!(r.passed, "{}", r.to_table());
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn absurd_tolerance_triggers_marginal_warning() {
        let mut o = small();
        o.tol.det_rel = 0.5;
        let r = run_selftest(&o);
        assert!(r.warnings.iter().any(|w| w.contains("marginal")), "{}", r.to_table());
    }

    #[test]
    fn tiny_step_is_rounding_dominated() {
        let mut o = small();
        o.steps = FdSteps::uniform(1e-13);
        let r = run_selftest(&o);
        let d = &r.sections[0];
        assert!(!d.passed);
        assert!(d.diffs.iter().any(|x| !x.pass));
        assert!(!r.passed);
    }
}
