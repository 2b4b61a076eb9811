//! Empirical checks of the equivalences and implications between the
//! nondegeneracy conditions.
//!
//! Pointwise relations are tested at sampled points. Relations involving a
//! region-level condition (Rüssmann, empty interior of the resonant sets)
//! are tested on the tiles of a regular subdivision of the region; a
//! pointwise condition is then taken to hold on a tile when it holds at
//! every sample drawn there. Verdicts within the marginal band are never
//! counted as counterexamples; they are skipped and tallied instead.

mod table;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{
    bryuno, condition_n, iso_energetic, iso_energetic_restricted, kolmogorov, regular_resonant_direct,
    russmann_from_gradients, turning_frequencies_projective, weak, ConditionError, ConditionId, ConditionVerdict,
    ToleranceConfig,
};
use crate::hamiltonian::{HamiltonianModel, Jet2, Point, Region};
use crate::resonance::{empty_interior_scan, DEFAULT_RES_TOL};
pub use crate::sampling::{sample_points, SamplingError, Strategy};

/// Relations whose marginal-skip fraction reaches this value produce a
/// warning in the report.
pub const MAX_MARGINAL_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Equivalence,
    Implication,
}

/// `left ⇔ right[0]`, or `left ⇒ right[0] ∨ right[1] ∨ …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub kind: RelationKind,
    pub left: ConditionId,
    pub right: Vec<ConditionId>,
}

impl Relation {
    pub fn name(&self) -> String {
        let rhs: Vec<&str> = self.right.iter().map(|c| c.name()).collect();
        let op = match self.kind {
            RelationKind::Equivalence => "<=>",
            RelationKind::Implication => "=>",
        };
        format!("{} {} {}", self.left, op, rhs.join(" or "))
    }

    pub fn is_region_level(&self) -> bool {
        self.left.is_region_level() || self.right.iter().any(|c| c.is_region_level())
    }

    fn conditions(&self) -> Vec<ConditionId> {
        std::iter::once(self.left).chain(self.right.iter().copied()).collect()
    }

    pub fn equivalence(a: ConditionId, b: ConditionId) -> Self {
        Relation {
            kind: RelationKind::Equivalence,
            left: a,
            right: vec![b],
        }
    }

    pub fn implication(a: ConditionId, any_of: &[ConditionId]) -> Self {
        Relation {
            kind: RelationKind::Implication,
            left: a,
            right: any_of.to_vec(),
        }
    }
}

use ConditionId as C;

pub fn equivalences() -> Vec<Relation> {
    vec![
        Relation::equivalence(C::Bryuno, C::N),
        Relation::equivalence(C::Bryuno, C::TurningFrequencies),
        Relation::equivalence(C::N, C::RegularResonantSet),
        Relation::equivalence(C::IsoEnergetic, C::IsoEnergeticTurningFrequencies),
        Relation::equivalence(C::Russmann, C::EmptyInteriorResonantSet),
    ]
}

pub fn implications() -> Vec<Relation> {
    vec![
        Relation::implication(C::IsoEnergetic, &[C::Weak]),
        Relation::implication(C::Kolmogorov, &[C::Weak]),
        Relation::implication(C::Weak, &[C::Kolmogorov, C::IsoEnergetic]),
        Relation::implication(C::Weak, &[C::Russmann]),
    ]
}

/// Pointwise verdict by the route used for hierarchy checks. Conditions
/// that the predicates compute through an equivalence are evaluated in
/// their direct form here, so that the equivalence is actually tested.
pub fn pointwise_verdict(
    id: ConditionId,
    jet: &Jet2,
    tol: &ToleranceConfig,
) -> Result<ConditionVerdict, ConditionError> {
    match id {
        C::Kolmogorov => kolmogorov(jet, tol),
        C::IsoEnergetic => iso_energetic(jet, tol),
        C::Bryuno => bryuno(jet, tol),
        C::N => condition_n(jet, tol),
        C::TurningFrequencies => turning_frequencies_projective(jet, tol),
        C::RegularResonantSet => regular_resonant_direct(jet, tol),
        C::IsoEnergeticTurningFrequencies => iso_energetic_restricted(jet, tol),
        C::Weak => weak(jet, tol),
        C::Russmann | C::EmptyInteriorResonantSet => {
            panic!("{id} is a region-level condition")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub tol: ToleranceConfig,
    pub res_tol: f64,
    /// Largest `|k|∞` in the resonant-set interior scan.
    pub max_norm: i64,
    /// Tiles per axis for region-level relations; chosen from the
    /// dimension when absent.
    pub tiles_per_axis: Option<usize>,
    pub samples_per_tile: usize,
    /// Grid nodes per axis and tile in the interior scan.
    pub interior_nodes: Option<usize>,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            n_samples: 10_000,
            seed: 0,
            strategy: Strategy::Uniform,
            tol: ToleranceConfig::default(),
            res_tol: DEFAULT_RES_TOL,
            max_norm: 5,
            tiles_per_axis: None,
            samples_per_tile: 64,
            interior_nodes: None,
        }
    }
}

impl HierarchyOptions {
    pub fn tiles_per_axis(&self, d: usize) -> usize {
        self.tiles_per_axis.unwrap_or(match d {
            1 => 8,
            2 => 4,
            3 => 3,
            _ => 2,
        })
    }

    pub fn interior_nodes(&self, d: usize) -> usize {
        self.interior_nodes.unwrap_or(match d {
            1 => 257,
            2 => 33,
            3 => 9,
            _ => 5,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Point,
    Tile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    /// The sample point, or the centre of the tile.
    pub point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tile: Option<Region>,
    pub antecedent: ConditionVerdict,
    pub consequent: Vec<ConditionVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationReport {
    pub relation: String,
    pub kind: RelationKind,
    pub antecedent: ConditionId,
    pub consequent: Vec<ConditionId>,
    pub unit: Unit,
    /// Number of points or tiles examined; `checked + skipped = instances`.
    pub instances: usize,
    pub checked: usize,
    pub skipped: usize,
    pub skipped_marginal: usize,
    /// Instances where a condition is undefined (e.g. vanishing frequency).
    pub skipped_undefined: usize,
    /// Checked instances at which the antecedent held (for an equivalence,
    /// the left-hand condition).
    pub antecedent_held: usize,
    pub counterexamples: Vec<Counterexample>,
    pub passed: bool,
}

impl RelationReport {
    pub fn marginal_fraction(&self) -> f64 {
        if self.instances == 0 {
            0.0
        } else {
            self.skipped_marginal as f64 / self.instances as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyReport {
    pub model: String,
    pub expr: String,
    pub dim: usize,
    pub region: Region,
    pub n_samples: usize,
    pub seed: u64,
    pub options: HierarchyOptions,
    pub tiles: usize,
    pub relations: Vec<RelationReport>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl HierarchyReport {
    pub fn counterexample_count(&self) -> usize {
        self.relations.iter().map(|r| r.counterexamples.len()).sum()
    }

    pub fn to_table(&self) -> String {
        table::render(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Truth {
    Holds,
    Fails,
    Marginal,
    Undefined,
}

/// A condition's status at one point or on one tile, with the verdict it
/// was read from (absent when undefined).
#[derive(Debug, Clone)]
struct Judgement {
    truth: Truth,
    verdict: Option<ConditionVerdict>,
}

impl Judgement {
    fn from_result(r: &Result<ConditionVerdict, ConditionError>) -> Self {
        match r {
            Ok(v) => Judgement {
                truth: if v.marginal {
                    Truth::Marginal
                } else if v.holds {
                    Truth::Holds
                } else {
                    Truth::Fails
                },
                verdict: Some(v.clone()),
            },
            Err(_) => Judgement {
                truth: Truth::Undefined,
                verdict: None,
            },
        }
    }

    /// A pointwise condition holds on a tile when it holds at every
    /// sample; any non-marginal failure makes it fail.
    fn aggregate(samples: &[Judgement]) -> Self {
        if samples.is_empty() {
            return Judgement {
                truth: Truth::Undefined,
                verdict: None,
            };
        }
        let pick = |t: Truth| samples.iter().find(|j| j.truth == t).cloned();
        if let Some(j) = pick(Truth::Fails) {
            return j;
        }
        if let Some(j) = pick(Truth::Undefined) {
            return j;
        }
        if let Some(j) = pick(Truth::Marginal) {
            return j;
        }
        samples
            .iter()
            .min_by(|a, b| margin_of(a).total_cmp(&margin_of(b)))
            .cloned()
            .expect("nonempty")
    }
}

fn margin_of(j: &Judgement) -> f64 {
    j.verdict.as_ref().map_or(f64::INFINITY, |v| v.margin)
}

fn disjunction(parts: &[Judgement]) -> Truth {
    let has = |t: Truth| parts.iter().any(|j| j.truth == t);
    if has(Truth::Holds) {
        Truth::Holds
    } else if parts.iter().all(|j| j.truth == Truth::Fails) {
        Truth::Fails
    } else if has(Truth::Undefined) {
        Truth::Undefined
    } else {
        Truth::Marginal
    }
}

#[derive(Default)]
struct Tally {
    instances: usize,
    checked: usize,
    skipped_marginal: usize,
    skipped_undefined: usize,
    antecedent_held: usize,
    counterexamples: Vec<Counterexample>,
}

impl Tally {
    fn skip(&mut self, t: Truth) {
        if t == Truth::Undefined {
            self.skipped_undefined += 1;
        } else {
            self.skipped_marginal += 1;
        }
    }

    fn record(
        &mut self,
        rel: &Relation,
        judgements: &BTreeMap<ConditionId, Judgement>,
        point: &[f64],
        tile: Option<&Region>,
    ) {
        self.instances += 1;
        let left = &judgements[&rel.left];
        let right: Vec<Judgement> = rel.right.iter().map(|c| judgements[c].clone()).collect();
        let rhs = disjunction(&right);
        for t in [left.truth, rhs] {
            if t == Truth::Undefined {
                self.skip(t);
                return;
            }
        }
        let counterexample = |ante: &Judgement, cons: &[Judgement]| Counterexample {
            point: point.to_vec(),
            tile: tile.cloned(),
            antecedent: ante.verdict.clone().expect("defined"),
            consequent: cons.iter().filter_map(|j| j.verdict.clone()).collect(),
        };
        match rel.kind {
            RelationKind::Implication => match (left.truth, rhs) {
                (Truth::Marginal, _) => self.skip(Truth::Marginal),
                (Truth::Fails, _) => self.checked += 1,
                (Truth::Holds, Truth::Marginal) => self.skip(Truth::Marginal),
                (Truth::Holds, r) => {
                    self.checked += 1;
                    self.antecedent_held += 1;
                    if r == Truth::Fails {
                        self.counterexamples.push(counterexample(left, &right));
                    }
                }
                (Truth::Undefined, _) => unreachable!(),
            },
            RelationKind::Equivalence => {
                if left.truth == Truth::Marginal || rhs == Truth::Marginal {
                    self.skip(Truth::Marginal);
                    return;
                }
                self.checked += 1;
                if left.truth == Truth::Holds {
                    self.antecedent_held += 1;
                }
                if left.truth != rhs {
                    if left.truth == Truth::Holds {
                        self.counterexamples.push(counterexample(left, &right));
                    } else {
                        self.counterexamples.push(counterexample(&right[0], std::slice::from_ref(left)));
                    }
                }
            }
        }
    }

    fn finish(mut self, rel: &Relation, unit: Unit) -> RelationReport {
        self.counterexamples.sort_by(|a, b| lex_cmp(&a.point, &b.point));
        let skipped = self.skipped_marginal + self.skipped_undefined;
        debug_assert_eq!(self.checked + skipped, self.instances);
        RelationReport {
            relation: rel.name(),
            kind: rel.kind,
            antecedent: rel.left,
            consequent: rel.right.clone(),
            unit,
            instances: self.instances,
            checked: self.checked,
            skipped,
            skipped_marginal: self.skipped_marginal,
            skipped_undefined: self.skipped_undefined,
            antecedent_held: self.antecedent_held,
            passed: self.counterexamples.is_empty(),
            counterexamples: self.counterexamples,
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn point_judgements(
    model: &HamiltonianModel,
    p: &Point,
    ids: &[ConditionId],
    tol: &ToleranceConfig,
) -> BTreeMap<ConditionId, Judgement> {
    let jet = model.eval_jet2(p).map_err(ConditionError::from);
    ids.iter()
        .map(|&id| {
            let r = jet.as_ref().map_err(Clone::clone).and_then(|j| pointwise_verdict(id, j, tol));
            (id, Judgement::from_result(&r))
        })
        .collect()
}

fn tile_judgements(
    model: &HamiltonianModel,
    tile: &Region,
    ids: &[ConditionId],
    opts: &HierarchyOptions,
) -> BTreeMap<ConditionId, Judgement> {
    let undefined = || Judgement {
        truth: Truth::Undefined,
        verdict: None,
    };
    let n = opts.samples_per_tile.max(model.dim);
    let pts = sample_points(model, tile, n, Strategy::LowDiscrepancy, opts.seed).unwrap_or_default();
    let jets: Vec<Option<Jet2>> = pts.iter().map(|p| model.eval_jet2(p).ok()).collect();
    ids.iter()
        .map(|&id| {
            let j = match id {
                C::Russmann => {
                    let grads: Vec<Vec<f64>> = jets
                        .iter()
                        .flatten()
                        .map(|j| j.grad.iter().copied().collect())
                        .collect();
                    if grads.len() < model.dim {
                        undefined()
                    } else {
                        Judgement::from_result(&Ok(russmann_from_gradients(&grads, model.dim, &opts.tol)))
                    }
                }
                C::EmptyInteriorResonantSet => Judgement::from_result(&Ok(empty_interior_scan(
                    model,
                    tile,
                    opts.max_norm,
                    opts.interior_nodes(model.dim),
                    opts.res_tol,
                    &opts.tol,
                ))),
                _ => {
                    let samples: Vec<Judgement> = jets
                        .iter()
                        .map(|j| match j {
                            Some(j) => Judgement::from_result(&pointwise_verdict(id, j, &opts.tol)),
                            None => undefined(),
                        })
                        .collect();
                    Judgement::aggregate(&samples)
                }
            };
            (id, j)
        })
        .collect()
}

fn tile_centre(tile: &Region) -> Vec<f64> {
    (0..tile.dim()).map(|a| 0.5 * (tile.lo(a) + tile.hi(a))).collect()
}

fn run_relations(
    model: &HamiltonianModel,
    region: &Region,
    relations: &[Relation],
    opts: &HierarchyOptions,
) -> Result<(Vec<RelationReport>, usize), SamplingError> {
    let mut point_ids: Vec<ConditionId> = Vec::new();
    let mut tile_ids: Vec<ConditionId> = Vec::new();
    for rel in relations {
        let ids = if rel.is_region_level() {
            &mut tile_ids
        } else {
            &mut point_ids
        };
        for c in rel.conditions() {
            if !ids.contains(&c) {
                ids.push(c);
            }
        }
    }

    let point_data: Vec<(Point, BTreeMap<ConditionId, Judgement>)> = if point_ids.is_empty() {
        Vec::new()
    } else {
        let pts = sample_points(model, region, opts.n_samples, opts.strategy, opts.seed)?;
        pts.into_par_iter()
            .map(|p| {
                let j = point_judgements(model, &p, &point_ids, &opts.tol);
                (p, j)
            })
            .collect()
    };
    let tiles = if tile_ids.is_empty() {
        Vec::new()
    } else {
        region.tiles(opts.tiles_per_axis(model.dim))
    };
    let tile_data: Vec<BTreeMap<ConditionId, Judgement>> =
        tiles.par_iter().map(|t| tile_judgements(model, t, &tile_ids, opts)).collect();

    let reports = relations
        .iter()
        .map(|rel| {
            let mut tally = Tally::default();
            if rel.is_region_level() {
                for (tile, j) in tiles.iter().zip(&tile_data) {
                    tally.record(rel, j, &tile_centre(tile), Some(tile));
                }
                tally.finish(rel, Unit::Tile)
            } else {
                for (p, j) in &point_data {
                    tally.record(rel, j, &p.coords, None);
                }
                tally.finish(rel, Unit::Point)
            }
        })
        .collect();
    Ok((reports, tiles.len()))
}

fn assemble(
    model: &HamiltonianModel,
    region: &Region,
    opts: &HierarchyOptions,
    relations: Vec<RelationReport>,
    tiles: usize,
) -> HierarchyReport {
    let warnings = relations
        .iter()
        .filter(|r| r.marginal_fraction() >= MAX_MARGINAL_FRACTION)
        .map(|r| {
            format!(
                "{}: {} of {} {}s skipped as marginal ({:.1}%); tolerances may be misconfigured",
                r.relation,
                r.skipped_marginal,
                r.instances,
                match r.unit {
                    Unit::Point => "point",
                    Unit::Tile => "tile",
                },
                100.0 * r.marginal_fraction()
            )
        })
        .collect();
    HierarchyReport {
        model: model.name.clone(),
        expr: model.text.clone(),
        dim: model.dim,
        region: region.clone(),
        n_samples: opts.n_samples,
        seed: opts.seed,
        options: opts.clone(),
        tiles,
        passed: relations.iter().all(|r| r.passed),
        relations,
        warnings,
    }
}

fn check_pair(
    model: &HamiltonianModel,
    region: &Region,
    rel: Relation,
    opts: &HierarchyOptions,
) -> Result<RelationReport, SamplingError> {
    let (mut reports, _) = run_relations(model, region, std::slice::from_ref(&rel), opts)?;
    Ok(reports.remove(0))
}

/// Test `antecedent ⇒ consequent` on `region`. A region-level consequent
/// switches to the tile protocol.
pub fn check_implication(
    model: &HamiltonianModel,
    region: &Region,
    antecedent: ConditionId,
    consequent: ConditionId,
    opts: &HierarchyOptions,
) -> Result<RelationReport, SamplingError> {
    check_pair(model, region, Relation::implication(antecedent, &[consequent]), opts)
}

/// Test `a ⇔ b` on `region`, both directions at once.
pub fn check_equivalence(
    model: &HamiltonianModel,
    region: &Region,
    a: ConditionId,
    b: ConditionId,
    opts: &HierarchyOptions,
) -> Result<RelationReport, SamplingError> {
    check_pair(model, region, Relation::equivalence(a, b), opts)
}

/// All five equivalences and four implications.
pub fn full_hierarchy(
    model: &HamiltonianModel,
    region: &Region,
    opts: &HierarchyOptions,
) -> Result<HierarchyReport, SamplingError> {
    let relations: Vec<Relation> = equivalences().into_iter().chain(implications()).collect();
    let (reports, tiles) = run_relations(model, region, &relations, opts)?;
    Ok(assemble(model, region, opts, reports, tiles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{builtin, default_region, BuiltinParams};

    fn opts(n: usize, seed: u64) -> HierarchyOptions {
        HierarchyOptions {
            n_samples: n,
            seed,
            ..HierarchyOptions::default()
        }
    }

    #[test]
    fn relation_names() {
        assert_eq!(equivalences()[0].name(), "Bryuno <=> N");
        assert_eq!(implications()[2].name(), "Weak => Kolmogorov or IsoEnergetic");
        assert!(implications()[3].is_region_level());
        assert!(!implications()[0].is_region_level());
    }

    #[test]
    fn builtins_pass_on_small_samples() {
        for name in ["quadratic", "norm", "mixed", "quartic", "linear"] {
            let m = builtin(name, &BuiltinParams::default()).unwrap();
            let r = full_hierarchy(&m, &default_region(&m), &opts(300, 1)).unwrap();
            assert!(r.passed, "{name}\n{}", r.to_table());
            for rel in &r.relations {
                assert_eq!(rel.checked + rel.skipped, rel.instances);
            }
        }
    }

    #[test]
    fn vacuous_implications_on_quartic_axes() {
        let q = builtin("quartic", &BuiltinParams::default()).unwrap();
        let region = Region::new(vec![[0.0, 0.0], [0.1, 1.0]]).unwrap();
        let r = check_implication(&q, &region, C::Kolmogorov, C::Weak, &opts(50, 2)).unwrap();
        assert_eq!(r.checked, 50);
        assert_eq!(r.antecedent_held, 0);
        assert!(r.passed);
    }

    #[test]
    fn mixed_model_disjunction() {
        let m = builtin("mixed", &BuiltinParams::default()).unwrap();
        let region = Region::new(vec![[0.1, 2.0], [-2.0, 2.0]]).unwrap();
        let r = full_hierarchy(&m, &region, &opts(2000, 3)).unwrap();
        let rel = r.relations.iter().find(|x| x.relation == "Weak => Kolmogorov or IsoEnergetic").unwrap();
        assert_eq!(rel.antecedent_held, rel.checked);
        assert!(rel.passed);
    }

    #[test]
    fn linear_region_relations_fail_together() {
        let l = builtin("linear", &BuiltinParams::omega(vec![1.0, 1.0])).unwrap();
        let r = check_equivalence(&l, &Region::cube(2, -1.0, 1.0), C::Russmann, C::EmptyInteriorResonantSet, &opts(10, 0))
            .unwrap();
        assert_eq!(r.unit, Unit::Tile);
        assert_eq!(r.instances, 16);
        assert_eq!(r.checked, 16);
        assert_eq!(r.antecedent_held, 0);
        assert!(r.passed);
    }

    #[test]
    fn reports_are_deterministic() {
        let q = builtin("norm", &BuiltinParams::default()).unwrap();
        let region = default_region(&q);
        let a = full_hierarchy(&q, &region, &opts(500, 4)).unwrap();
        let b = full_hierarchy(&q, &region, &opts(500, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn disagreeing_predicates_produce_sorted_counterexamples() {
        // with one side computed at an absurd tolerance the implication breaks
        let q = builtin("quadratic", &BuiltinParams::default()).unwrap();
        let mut t = Tally::default();
        let rel = implications().remove(1);
        for p in [[1.5, 1.0], [1.2, 1.9]] {
            let jet = q.eval_jet2(&Point::new(p.to_vec())).unwrap();
            let mut j = BTreeMap::new();
            j.insert(C::Kolmogorov, Judgement::from_result(&kolmogorov(&jet, &ToleranceConfig::default())));
            let strict = ToleranceConfig {
                rank_rel: 0.999,
                ..ToleranceConfig::default()
            };
            let mut w = weak(&jet, &strict).unwrap();
            w.marginal = false;
            j.insert(C::Weak, Judgement::from_result(&Ok(w)));
            t.record(&rel, &j, &p, None);
        }
        let r = t.finish(&rel, Unit::Point);
        assert_eq!(r.counterexamples.len(), 2);
        assert_eq!(r.counterexamples[0].point, vec![1.2, 1.9]);
        assert!(r.counterexamples[0].antecedent.holds);
        assert!(!r.counterexamples[0].consequent[0].holds);
    }
}
