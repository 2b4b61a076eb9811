use serde::Serialize;

use super::config::RunConfig;
use super::output::{json_document, Artifact};
use super::ReportError;
use crate::conditions::{all_pointwise, ConditionId, ConditionVerdict};
use crate::hamiltonian::{ModelDocument, Point};
use crate::resonance::{classify_torus, TorusClass};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JetDocument {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Row-major.
    pub hess: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub config: RunConfig,
    pub model: ModelDocument,
    pub point: Vec<f64>,
    pub jet: JetDocument,
    pub verdicts: Vec<ConditionVerdict>,
    /// Conditions without a verdict at this point, with the reason.
    pub undefined: Vec<(ConditionId, String)>,
    pub classification: TorusClass,
}

/// Jet, every pointwise verdict and the torus classification at
/// `config.point`.
pub fn analyze(cfg: &RunConfig) -> Result<AnalyzeReport, ReportError> {
    let model = cfg.load_model()?;
    let point = cfg.point.clone().ok_or(ReportError::NoPoint)?;
    if point.len() != model.dim {
        return Err(ReportError::Inadmissible(format!(
            "point has {} coordinates, model dimension is {}",
            point.len(),
            model.dim
        )));
    }
    if !model.domain.contains(&point) || model.is_excluded(&point) {
        return Err(ReportError::Inadmissible(format!(
            "point {point:?} is outside the domain {} or on its excluded locus",
            model.domain
        )));
    }
    let p = Point::new(point.clone());
    let jet = model.eval_jet2(&p).map_err(|e| ReportError::Inadmissible(e.to_string()))?;
    let verdicts = all_pointwise(&jet, &cfg.tol).map_err(|e| ReportError::Inadmissible(e.to_string()))?;
    let undefined = ConditionId::POINTWISE
        .iter()
        .filter(|c| !verdicts.contains_key(c))
        .map(|&c| (c, "frequency vector vanishes".to_string()))
        .collect();
    let classification =
        classify_torus(&model, &p, cfg.max_norm, cfg.res_tol).map_err(|e| ReportError::Inadmissible(e.to_string()))?;
    let d = model.dim;
    Ok(AnalyzeReport {
        config: cfg.clone(),
        model: model.to_document(),
        point,
        jet: JetDocument {
            value: jet.value,
            grad: jet.grad.iter().copied().collect(),
            hess: (0..d).map(|i| (0..d).map(|j| jet.hess[(i, j)]).collect()).collect(),
        },
        verdicts: verdicts.into_values().collect(),
        undefined,
        classification,
    })
}

impl AnalyzeReport {
    pub fn verdict(&self, c: ConditionId) -> Option<&ConditionVerdict> {
        self.verdicts.iter().find(|v| v.condition == c)
    }

    pub fn summary(&self) -> String {
        let mut out = format!("F = {} at {:?}\n", self.model.expr, self.point);
        out += &format!("  F = {:e}, grad = {:?}\n", self.jet.value, self.jet.grad);
        for v in &self.verdicts {
            out += &format!(
                "  {:<32} {:<5} margin {:.3e}{}\n",
                v.condition.name(),
                if v.holds { "holds" } else { "fails" },
                v.margin,
                if v.marginal { " (marginal)" } else { "" }
            );
        }
        for (c, why) in &self.undefined {
            out += &format!("  {:<32} undefined: {why}\n", c.name());
        }
        let c = &self.classification;
        let w: Vec<String> = c.witnesses.iter().map(ToString::to_string).collect();
        out += &format!(
            "  torus: {:?}, order {}, witnesses [{}]{}\n",
            c.kind,
            c.order,
            w.join(" "),
            if c.degenerate { ", degenerate" } else { "" }
        );
        out
    }

    pub fn artifacts(&self) -> Vec<Artifact> {
        vec![Artifact::new("analyze.json", json_document(self))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::config::{resolve, Settings};
    use crate::resonance::TorusKind;

    fn run(model: &str, point: &str) -> Result<AnalyzeReport, ReportError> {
        let s = Settings {
            model: Some(model.into()),
            point: Some(point.into()),
            ..Settings::default()
        };
        analyze(&resolve(s, None, None).unwrap())
    }

    #[test]
    fn quadratic_at_three_four() {
        let r = run("quadratic", "3,4").unwrap();
        assert_eq!(r.verdict(ConditionId::Kolmogorov).unwrap().raw["det"], 1.0);
        let b = r.verdict(ConditionId::IsoEnergetic).unwrap().raw["bordered_det"];
        assert!((b + 25.0).abs() < 1e-12);
        assert_eq!(r.classification.order, 1);
        assert_eq!(r.classification.kind, TorusKind::Periodic);
        assert_eq!(r.classification.witnesses[0].as_slice(), [4, -3]);
    }

    #[test]
    fn norm_at_unit_vector() {
        let r = run("norm", "1,0").unwrap();
        assert!(!r.verdict(ConditionId::Kolmogorov).unwrap().holds);
        assert!(r.verdict(ConditionId::IsoEnergetic).unwrap().holds);
    }

    #[test]
    fn linear_fails_everything() {
        let r = run("linear", "0.3,-0.7").unwrap();
        for c in [ConditionId::Kolmogorov, ConditionId::Weak, ConditionId::IsoEnergetic] {
            assert!(!r.verdict(c).unwrap().holds, "{c:?}");
        }
    }

    #[test]
    fn inadmissible_points() {
        assert!(matches!(run("norm", "0,0"), Err(ReportError::Inadmissible(_))));
        assert!(matches!(run("quadratic", "1,2,3"), Err(ReportError::Inadmissible(_))));
        assert!(matches!(run("mixed", "-1,0"), Err(ReportError::Inadmissible(_))));
    }

    #[test]
    fn critical_point_has_no_turning_frequencies() {
        let s = Settings {
            expr: Some("x1^2 - x2^2".into()),
            point: Some("0,0".into()),
            ..Settings::default()
        };
        let r = analyze(&resolve(s, None, None).unwrap()).unwrap();
        assert_eq!(r.undefined.len(), 1);
        assert!(r.classification.degenerate);
    }
}
