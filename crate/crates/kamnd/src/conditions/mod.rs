//! Nondegeneracy conditions as predicates with explicit margins.
//!
//! Pointwise conditions take a [`Jet2`]; the Rüssmann condition quantifies
//! over open sets and is evaluated on a region (see [`russmann_region`]).
//! Every verdict carries the raw quantities it was decided from and the
//! tolerances in force, so a verdict can be re-derived from its own record.

mod geometric;
mod russmann;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{EvalError, Jet2};
use crate::linalg;
use crate::sampling::SamplingError;

pub use geometric::{iso_energetic_restricted, regular_resonant_direct, turning_frequencies_projective};
pub use russmann::{russmann_from_gradients, russmann_region};

/// Verdicts whose margin lies within this factor of the threshold are
/// flagged `marginal`.
pub const MARGINAL_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    Kolmogorov,
    IsoEnergetic,
    Bryuno,
    N,
    TurningFrequencies,
    RegularResonantSet,
    IsoEnergeticTurningFrequencies,
    Russmann,
    EmptyInteriorResonantSet,
    Weak,
}

impl ConditionId {
    pub const POINTWISE: [ConditionId; 8] = [
        ConditionId::Kolmogorov,
        ConditionId::IsoEnergetic,
        ConditionId::Bryuno,
        ConditionId::N,
        ConditionId::TurningFrequencies,
        ConditionId::RegularResonantSet,
        ConditionId::IsoEnergeticTurningFrequencies,
        ConditionId::Weak,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionId::Kolmogorov => "Kolmogorov",
            ConditionId::IsoEnergetic => "IsoEnergetic",
            ConditionId::Bryuno => "Bryuno",
            ConditionId::N => "N",
            ConditionId::TurningFrequencies => "TurningFrequencies",
            ConditionId::RegularResonantSet => "RegularResonantSet",
            ConditionId::IsoEnergeticTurningFrequencies => "IsoEnergeticTurningFrequencies",
            ConditionId::Russmann => "Russmann",
            ConditionId::EmptyInteriorResonantSet => "EmptyInteriorResonantSet",
            ConditionId::Weak => "Weak",
        }
    }

    pub fn is_region_level(self) -> bool {
        matches!(self, ConditionId::Russmann | ConditionId::EmptyInteriorResonantSet)
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ConditionId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = [
            ConditionId::Kolmogorov,
            ConditionId::IsoEnergetic,
            ConditionId::Bryuno,
            ConditionId::N,
            ConditionId::TurningFrequencies,
            ConditionId::RegularResonantSet,
            ConditionId::IsoEnergeticTurningFrequencies,
            ConditionId::Russmann,
            ConditionId::EmptyInteriorResonantSet,
            ConditionId::Weak,
        ];
        all.into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown condition `{s}`"))
    }
}

/// Floating-point realization of the exact `≠ 0` and rank statements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// A determinant counts as zero when `|det| <= det_rel * hadamard_bound`.
    pub det_rel: f64,
    /// Singular values at or below `rank_rel * σ_max` count as zero.
    pub rank_rel: f64,
    /// Rüssmann holds when the sampled-gradient matrix has
    /// `σ_d > russmann_rel * σ_1`.
    pub russmann_rel: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            det_rel: 1e-10,
            rank_rel: 1e-9,
            russmann_rel: 1e-8,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<(), ConditionError> {
        for (name, v) in [
            ("det_rel", self.det_rel),
            ("rank_rel", self.rank_rel),
            ("russmann_rel", self.russmann_rel),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConditionError::BadTolerance { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub condition: ConditionId,
    pub holds: bool,
    /// Normalized distance from degeneracy: `|det| / hadamard_bound` for
    /// determinant conditions, `σ_min / σ_max` for rank conditions.
    pub margin: f64,
    pub marginal: bool,
    pub raw: BTreeMap<String, f64>,
    pub tol: ToleranceConfig,
}

impl ConditionVerdict {
    /// Verdict `margin > threshold`, with the marginal band applied.
    pub(crate) fn from_margin(
        condition: ConditionId,
        margin: f64,
        threshold: f64,
        raw: BTreeMap<String, f64>,
        tol: ToleranceConfig,
    ) -> Self {
        ConditionVerdict {
            condition,
            holds: margin > threshold,
            margin,
            marginal: is_marginal(margin, threshold),
            raw,
            tol,
        }
    }

    pub fn retag(mut self, condition: ConditionId) -> Self {
        self.condition = condition;
        self
    }

    pub fn raw(&self, key: &str) -> Option<f64> {
        self.raw.get(key).copied()
    }
}

pub fn is_marginal(margin: f64, threshold: f64) -> bool {
    margin >= threshold / MARGINAL_FACTOR && margin <= threshold * MARGINAL_FACTOR
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error("jet contains non-finite entries")]
    NonFinite,
    #[error("frequency vector vanishes; projective image undefined")]
    ZeroFrequency,
    #[error("internal inconsistency: N-matrix rank {n_rank} but Bryuno-matrix rank {bryuno_rank}")]
    Inconsistent { n_rank: usize, bryuno_rank: usize },
    #[error("tolerance {name} = {value} must lie in (0, 1)")]
    BadTolerance { name: &'static str, value: f64 },
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Sampling(#[from] SamplingError),
    #[error("region has dimension {got}, model has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

fn check_finite(jet: &Jet2) -> Result<(), ConditionError> {
    if jet.is_finite() {
        Ok(())
    } else {
        Err(ConditionError::NonFinite)
    }
}

fn det_verdict(
    condition: ConditionId,
    m: &DMatrix<f64>,
    det_key: &str,
    tol: &ToleranceConfig,
) -> ConditionVerdict {
    let det = linalg::lu_det(m);
    let scale = linalg::hadamard_scale(m);
    let margin = det.abs() / scale;
    let raw = BTreeMap::from([
        (det_key.to_string(), det),
        ("scale".to_string(), scale),
        ("threshold".to_string(), tol.det_rel * scale),
    ]);
    ConditionVerdict::from_margin(condition, margin, tol.det_rel, raw, *tol)
}

struct RankInfo {
    rank: usize,
    sigma_min: f64,
    sigma_max: f64,
    margin: f64,
}

fn rank_info(m: &DMatrix<f64>, tol: &ToleranceConfig) -> RankInfo {
    let sv = linalg::singular_values(m);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    RankInfo {
        rank: linalg::numerical_rank(&sv, tol.rank_rel),
        sigma_min,
        sigma_max,
        margin: if sigma_max > 0.0 { sigma_min / sigma_max } else { 0.0 },
    }
}

fn rank_verdict(condition: ConditionId, m: &DMatrix<f64>, d: usize, tol: &ToleranceConfig) -> ConditionVerdict {
    let info = rank_info(m, tol);
    let raw = BTreeMap::from([
        ("rank".to_string(), info.rank as f64),
        ("sigma_min".to_string(), info.sigma_min),
        ("sigma_max".to_string(), info.sigma_max),
    ]);
    let mut v = ConditionVerdict::from_margin(condition, info.margin, tol.rank_rel, raw, *tol);
    v.holds = info.rank == d;
    v
}

/// Kolmogorov: `det F'' ≠ 0`.
pub fn kolmogorov(jet: &Jet2, tol: &ToleranceConfig) -> Result<ConditionVerdict, ConditionError> {
    check_finite(jet)?;
    Ok(det_verdict(ConditionId::Kolmogorov, &jet.hess, "det", tol))
}

/// Iso-energetic (Arnol'd): the bordered determinant
/// `det [[F'', ∇F], [∇Fᵀ, 0]] ≠ 0`.
pub fn iso_energetic(jet: &Jet2, tol: &ToleranceConfig) -> Result<ConditionVerdict, ConditionError> {
    check_finite(jet)?;
    let m = linalg::bordered(&jet.hess, &jet.grad);
    Ok(det_verdict(ConditionId::IsoEnergetic, &m, "bordered_det", tol))
}

/// Iso-energetic turning frequencies, computed through its equivalence
/// with the iso-energetic condition.
pub fn iso_energetic_turning_frequencies(
    jet: &Jet2,
    tol: &ToleranceConfig,
) -> Result<ConditionVerdict, ConditionError> {
    Ok(iso_energetic(jet, tol)?.retag(ConditionId::IsoEnergeticTurningFrequencies))
}

/// The Bryuno matrix `[F'' | ∇F]` (d×(d+1)).
pub fn bryuno_matrix(jet: &Jet2) -> DMatrix<f64> {
    linalg::hstack_grad(&jet.hess, &jet.grad)
}

/// The N matrix `[F'' ; ∇Fᵀ]` ((d+1)×d).
pub fn n_matrix(jet: &Jet2) -> DMatrix<f64> {
    linalg::vstack_grad(&jet.hess, &jet.grad)
}

/// The jet after the exact diagonal rescaling `S` that balances the
/// bordered matrix: `F'' -> S F'' S`, `∇F -> s_{d+1} S ∇F`. This is a
/// linear change of actions together with a rescaling of the energy
/// column, so every rank statement is unchanged; rank margins are read
/// off the balanced matrices so that they are comparable with the
/// row-normalized determinant margins.
pub(crate) fn balanced(jet: &Jet2) -> (DMatrix<f64>, DVector<f64>) {
    let d = jet.dim();
    let s = linalg::symmetric_equilibration(&linalg::bordered(&jet.hess, &jet.grad));
    let hess = DMatrix::from_fn(d, d, |i, j| jet.hess[(i, j)] * s[i] * s[j]);
    let grad = DVector::from_fn(d, |i, _| jet.grad[i] * s[i] * s[d]);
    (hess, grad)
}

/// Bryuno: `rank [F'' | ∇F] = d`.
pub fn bryuno(jet: &Jet2, tol: &ToleranceConfig) -> Result<ConditionVerdict, ConditionError> {
    check_finite(jet)?;
    let (h, g) = balanced(jet);
    Ok(rank_verdict(ConditionId::Bryuno, &linalg::hstack_grad(&h, &g), jet.dim(), tol))
}

/// Condition N: `rank [F'' ; ∇Fᵀ] = d`.
pub fn condition_n(jet: &Jet2, tol: &ToleranceConfig) -> Result<ConditionVerdict, ConditionError> {
    check_finite(jet)?;
    let (h, g) = balanced(jet);
    Ok(rank_verdict(ConditionId::N, &linalg::vstack_grad(&h, &g), jet.dim(), tol))
}

/// Weak nondegeneracy: condition N, cross-checked against the Bryuno rank.
pub fn weak(jet: &Jet2, tol: &ToleranceConfig) -> Result<ConditionVerdict, ConditionError> {
    let n = condition_n(jet, tol)?;
    let b = bryuno(jet, tol)?;
    let n_rank = n.raw["rank"] as usize;
    let bryuno_rank = b.raw["rank"] as usize;
    if n_rank != bryuno_rank {
        return Err(ConditionError::Inconsistent { n_rank, bryuno_rank });
    }
    let mut v = n.retag(ConditionId::Weak);
    v.raw.insert("bryuno_rank".into(), bryuno_rank as f64);
    Ok(v)
}

/// Turning frequencies, computed through its equivalence with Bryuno.
pub fn turning_frequencies(jet: &Jet2, tol: &ToleranceConfig) -> Result<ConditionVerdict, ConditionError> {
    check_finite(jet)?;
    if jet.grad.iter().all(|&g| g == 0.0) {
        return Err(ConditionError::ZeroFrequency);
    }
    Ok(bryuno(jet, tol)?.retag(ConditionId::TurningFrequencies))
}

/// Regular resonant set, computed through its equivalence with N.
pub fn regular_resonant_set(jet: &Jet2, tol: &ToleranceConfig) -> Result<ConditionVerdict, ConditionError> {
    Ok(condition_n(jet, tol)?.retag(ConditionId::RegularResonantSet))
}

/// All pointwise verdicts at one jet, keyed by condition. Conditions that
/// are undefined at the jet (turning frequencies at ω = 0) are absent.
pub fn all_pointwise(
    jet: &Jet2,
    tol: &ToleranceConfig,
) -> Result<BTreeMap<ConditionId, ConditionVerdict>, ConditionError> {
    let mut out = BTreeMap::new();
    for v in [
        kolmogorov(jet, tol)?,
        iso_energetic(jet, tol)?,
        bryuno(jet, tol)?,
        condition_n(jet, tol)?,
        regular_resonant_set(jet, tol)?,
        iso_energetic_turning_frequencies(jet, tol)?,
        weak(jet, tol)?,
    ] {
        out.insert(v.condition, v);
    }
    match turning_frequencies(jet, tol) {
        Ok(v) => {
            out.insert(v.condition, v);
        }
        Err(ConditionError::ZeroFrequency) => {}
        Err(e) => return Err(e),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{builtin, BuiltinParams, HamiltonianModel, Point};
    use nalgebra::DVector;

    fn jet(model: &HamiltonianModel, p: &[f64]) -> Jet2 {
        model.eval_jet2(&Point::new(p.to_vec())).unwrap()
    }

    fn bi(name: &str) -> HamiltonianModel {
        builtin(name, &BuiltinParams::default()).unwrap()
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn kolmogorov_examples() {
        let v = kolmogorov(&jet(&bi("quadratic"), &[0.3, -2.0]), &tol()).unwrap();
        assert!(v.holds);
        assert_eq!(v.raw["det"], 1.0);
        let v = kolmogorov(&jet(&bi("linear"), &[0.3, -2.0]), &tol()).unwrap();
        assert!(!v.holds);
        assert_eq!(v.raw["det"], 0.0);
        assert_eq!(v.margin, 0.0);
        assert!(!v.marginal);
        let v = kolmogorov(&jet(&bi("mixed"), &[1.0, 1.0]), &tol()).unwrap();
        assert!(v.holds);
        assert_eq!(v.raw["det"], 2.0);
    }

    #[test]
    fn iso_energetic_examples() {
        let v = iso_energetic(&jet(&bi("quadratic"), &[3.0, 4.0]), &tol()).unwrap();
        assert!(v.holds);
        assert!((v.raw["bordered_det"] + 25.0).abs() < 1e-12);
        let v = iso_energetic(&jet(&bi("mixed"), &[1.0, 1.0]), &tol()).unwrap();
        assert!((v.raw["bordered_det"] + 3.0).abs() < 1e-12);
        // cofactor expansion of [[0,1,b],[1,0,a],[b,a,0]] gives 2ab
        let m = HamiltonianModel::parse("x1*x2", 2).unwrap();
        let v = iso_energetic(&jet(&m, &[1.0, 1.0]), &tol()).unwrap();
        assert!((v.raw["bordered_det"] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bryuno_and_n_examples() {
        let norm = jet(&bi("norm"), &[1.0, 0.0]);
        let quartic_axis = jet(&bi("quartic"), &[0.0, 1.0]);
        let lin = jet(&bi("linear"), &[0.5, 0.5]);
        for (j, expect) in [(&norm, true), (&lin, false), (&quartic_axis, false)] {
            let b = bryuno(j, &tol()).unwrap();
            let n = condition_n(j, &tol()).unwrap();
            assert_eq!(b.holds, expect);
            assert_eq!(n.holds, expect);
            assert_eq!(b.raw["rank"], n.raw["rank"]);
        }
        assert_eq!(bryuno(&quartic_axis, &tol()).unwrap().raw["rank"], 1.0);
        assert_eq!(bryuno(&lin, &tol()).unwrap().raw["rank"], 1.0);
        assert!(condition_n(&jet(&bi("quadratic"), &[1.0, 1.0]), &tol()).unwrap().holds);
        // d = 1, F = x^2/2 at 0: [1; 0] has rank 1
        let one = HamiltonianModel::parse("x1^2/2", 1).unwrap();
        assert!(condition_n(&jet(&one, &[0.0]), &tol()).unwrap().holds);
    }

    #[test]
    fn weak_examples() {
        assert!(!weak(&jet(&bi("quartic"), &[0.0, 1.0]), &tol()).unwrap().holds);
        assert!(weak(&jet(&bi("quadratic"), &[1.0, 1.0]), &tol()).unwrap().holds);
        let v = weak(&jet(&bi("norm"), &[0.0, 1.0]), &tol()).unwrap();
        assert!(v.holds);
        assert_eq!(v.raw["bryuno_rank"], 2.0);
        assert_eq!(v.condition, ConditionId::Weak);
    }

    #[test]
    fn turning_frequency_examples() {
        assert!(turning_frequencies(&jet(&bi("quadratic"), &[1.0, 0.0]), &tol()).unwrap().holds);
        assert!(!turning_frequencies(&jet(&bi("linear"), &[1.0, 0.0]), &tol()).unwrap().holds);
        let v = turning_frequencies(&jet(&bi("quartic"), &[1.0, 1.0]), &tol()).unwrap();
        assert!(v.holds);
        assert_eq!(v.condition, ConditionId::TurningFrequencies);
        let flat = HamiltonianModel::parse("x1^2 + x2^2", 2).unwrap();
        assert_eq!(
            turning_frequencies(&jet(&flat, &[0.0, 0.0]), &tol()),
            Err(ConditionError::ZeroFrequency)
        );
    }

    #[test]
    fn regular_resonant_set_spot_check_by_differential() {
        // quartic at (0, 1): grad = (0, 4), ker gradᵀ = span(e1),
        // dΩ_X = hess·e1 = (0, 0) so the condition fails there
        let j = jet(&bi("quartic"), &[0.0, 1.0]);
        let v = regular_resonant_set(&j, &tol()).unwrap();
        assert!(!v.holds);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(j.grad.dot(&x), 0.0);
        assert_eq!((&j.hess * &x).amax(), 0.0);
        assert!(regular_resonant_set(&jet(&bi("norm"), &[1.0, 0.0]), &tol()).unwrap().holds);
        assert!(!regular_resonant_set(&jet(&bi("linear"), &[1.0, 0.0]), &tol()).unwrap().holds);
    }

    #[test]
    fn non_finite_jets_are_rejected() {
        let j = Jet2::new(f64::NAN, DVector::zeros(2), DMatrix::zeros(2, 2));
        assert_eq!(kolmogorov(&j, &tol()), Err(ConditionError::NonFinite));
        assert_eq!(bryuno(&j, &tol()), Err(ConditionError::NonFinite));
    }

    #[test]
    fn marginal_band() {
        let t = tol();
        assert!(is_marginal(t.det_rel, t.det_rel));
        assert!(is_marginal(5.0 * t.det_rel, t.det_rel));
        assert!(!is_marginal(11.0 * t.det_rel, t.det_rel));
        assert!(!is_marginal(0.0, t.det_rel));
        assert!(ToleranceConfig { det_rel: 1.5, ..t }.validate().is_err());
        assert!(ToleranceConfig { rank_rel: 0.0, ..t }.validate().is_err());
        assert!(t.validate().is_ok());
    }

    #[test]
    fn condition_names_parse() {
        for c in ConditionId::POINTWISE {
            assert_eq!(c.name().parse::<ConditionId>().unwrap(), c);
        }
        assert!("Arnold".parse::<ConditionId>().is_err());
    }
}
