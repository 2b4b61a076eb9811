use std::fmt::Write;

use super::{HierarchyReport, RelationKind, Unit};

pub(super) fn render(r: &HierarchyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {} (d = {}) on {}", r.model, r.dim, r.region);
    let _ = writeln!(out, "F = {}", r.expr);
    let _ = writeln!(out, "samples {}  tiles {}  seed {}", r.n_samples, r.tiles, r.seed);
    let width = r.relations.iter().map(|x| x.relation.len()).max().unwrap_or(8).max(8);
    let _ = writeln!(
        out,
        "{:<width$}  {:>5}  {:>9}  {:>8}  {:>8}  {:>8}  {:>7}  status",
        "relation", "unit", "instances", "checked", "skipped", "held", "counter"
    );
    for kind in [RelationKind::Equivalence, RelationKind::Implication] {
        for x in r.relations.iter().filter(|x| x.kind == kind) {
            let unit = match x.unit {
                Unit::Point => "point",
                Unit::Tile => "tile",
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:>9}  {:>8}  {:>8}  {:>8}  {:>7}  {}",
                x.relation,
                unit,
                x.instances,
                x.checked,
                x.skipped,
                x.antecedent_held,
                x.counterexamples.len(),
                if x.passed { "pass" } else { "FAIL" }
            );
        }
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(
        out,
        "{}",
        if r.passed {
            "all relations hold on the sample".to_string()
        } else {
            format!("{} counterexample(s)", r.counterexample_count())
        }
    );
    out
}
