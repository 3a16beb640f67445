//! Coincidence-restricted CHSH bounds and a brute-force checker on finite models.
//!
//! A [`FiniteModel`] is an explicit sample space: weighted atoms carrying the four
//! local values A, B, C', D' in `[-1, 1]` and membership flags for the four
//! coincidence sets. Everything the bounds talk about (conditional correlations,
//! the common part Λ_I, δ and γ) is then a finite weighted sum.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Lanes;
use crate::exact::{chsh_value, common_refinement, RefinementCell};
use crate::lhv::{LocalModel, OctantModel};
use crate::rng::{trial_rng, RunSeed, TrialRng};
use crate::types::{ChshSettings, CoincidenceWindow};
use crate::{PAIR_LABELS, PAIR_SETTINGS};

/// Slack allowed on inequalities.
pub const THEOREM_TOL: f64 = 1e-9;
/// Slack allowed on identities.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FiniteModelError {
    #[error("model has no atoms")]
    NoAtoms,
    #[error("atom {0} has non-positive or non-finite weight")]
    BadWeight(usize),
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("atom {atom} value {value} outside [-1, 1]")]
    ValueOutOfRange { atom: usize, value: f64 },
    #[error("coincidence set {0} is empty")]
    EmptyCoincidenceSet(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("gamma must lie in (0, 1], got {0}")]
    GammaOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    /// A, B, C', D'.
    pub values: [f64; 4],
    /// Membership in Λ_AC', Λ_AD', Λ_BC', Λ_BD'.
    pub members: [bool; 4],
}

impl Atom {
    /// Outcome product for pair `i`.
    pub fn product(&self, i: usize) -> f64 {
        let (l, r) = PAIR_SETTINGS[i];
        self.values[l] * self.values[2 + r]
    }

    fn in_all(&self) -> bool {
        self.members.iter().all(|&m| m)
    }

    fn in_others(&self, anchor: usize) -> bool {
        (0..4).filter(|&j| j != anchor).all(|j| self.members[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteModel {
    atoms: Vec<Atom>,
}

impl FiniteModel {
    pub fn new(atoms: Vec<Atom>) -> Result<Self, FiniteModelError> {
        if atoms.is_empty() {
            return Err(FiniteModelError::NoAtoms);
        }
        for (i, a) in atoms.iter().enumerate() {
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(FiniteModelError::BadWeight(i));
            }
            if let Some(&v) = a.values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
                return Err(FiniteModelError::ValueOutOfRange { atom: i, value: v });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > IDENTITY_TOL {
            return Err(FiniteModelError::NotNormalized(total));
        }
        Ok(FiniteModel { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Cells of an exact common refinement, with ±1 outcomes as values.
    pub fn from_refinement(cells: &[RefinementCell]) -> Result<Self, FiniteModelError> {
        let atoms = cells
            .iter()
            .map(|c| Atom {
                weight: c.weight,
                values: [
                    c.left[0].outcome.value() as f64,
                    c.left[1].outcome.value() as f64,
                    c.right[0].outcome.value() as f64,
                    c.right[1].outcome.value() as f64,
                ],
                members: c.coincident,
            })
            .collect();
        FiniteModel::new(atoms)
    }

    /// The octant model discretized on the common refinement for `settings`.
    pub fn octant(l: f64, settings: &ChshSettings, window: CoincidenceWindow) -> Result<Self, FiniteModelError> {
        let pw = OctantModel::new(l)
            .ok()
            .and_then(|m| m.piecewise())
            .ok_or(FiniteModelError::NoAtoms)?;
        FiniteModel::from_refinement(&common_refinement(&pw, settings, window))
    }

    fn measure(&self, f: impl Fn(&Atom) -> bool) -> f64 {
        self.atoms.iter().filter(|a| f(a)).map(|a| a.weight).sum()
    }

    /// `E(product_i | set)`, `None` on a null set.
    fn conditional(&self, pair: usize, f: impl Fn(&Atom) -> bool) -> Option<f64> {
        let (mut mass, mut sum) = (0.0, 0.0);
        for a in self.atoms.iter().filter(|a| f(a)) {
            mass += a.weight;
            sum += a.weight * a.product(pair);
        }
        (mass > 0.0).then(|| sum / mass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaGammaReport {
    pub pair_probabilities: [f64; 4],
    pub correlations: [f64; 4],
    pub p_intersection: f64,
    /// Minimum coincidence probability over the four pairs.
    pub gamma: f64,
    /// Minimum over pairs of `P(Λ_I | Λ_pair)`.
    pub delta: f64,
    pub lhs: f64,
    pub bound_thm2: f64,
    pub bound_gamma: f64,
    /// `bound_thm2 − lhs`.
    pub margin_thm2: f64,
    /// `bound_gamma − lhs`.
    pub margin_gamma: f64,
}

pub fn eval_finite(model: &FiniteModel) -> Result<DeltaGammaReport, FiniteModelError> {
    let pair_probabilities: [f64; 4] = std::array::from_fn(|i| model.measure(|a| a.members[i]));
    if let Some(i) = pair_probabilities.iter().position(|&p| p <= 0.0) {
        return Err(FiniteModelError::EmptyCoincidenceSet(PAIR_LABELS[i]));
    }
    let mut correlations = [0.0; 4];
    for (i, c) in correlations.iter_mut().enumerate() {
        *c = model.conditional(i, |a| a.members[i]).unwrap_or(0.0);
    }
    let p_intersection = model.measure(Atom::in_all);
    let delta = pair_probabilities
        .iter()
        .map(|p| p_intersection / p)
        .fold(f64::INFINITY, f64::min);
    let gamma = pair_probabilities.iter().copied().fold(f64::INFINITY, f64::min);
    let lhs = chsh_value(correlations);
    let bound_thm2 = 4.0 - 2.0 * delta;
    let bound_gamma = 6.0 / gamma - 4.0;
    Ok(DeltaGammaReport {
        pair_probabilities,
        correlations,
        p_intersection,
        gamma,
        delta,
        lhs,
        bound_thm2,
        bound_gamma,
        margin_thm2: bound_thm2 - lhs,
        margin_gamma: bound_gamma - lhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Theorem2Check {
    Pass {
        report: DeltaGammaReport,
    },
    /// The witness contradicts a theorem, so it points at a defect in this code.
    Fail {
        report: DeltaGammaReport,
        witness: FiniteModel,
    },
    Skipped {
        reason: String,
    },
}

pub fn check_theorem2(model: &FiniteModel) -> Theorem2Check {
    match eval_finite(model) {
        Err(e) => Theorem2Check::Skipped { reason: e.to_string() },
        Ok(report) if report.margin_thm2 >= -THEOREM_TOL => Theorem2Check::Pass { report },
        Ok(report) => Theorem2Check::Fail {
            report,
            witness: model.clone(),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofStep {
    /// CHSH ≤ 2 for correlations conditioned on Λ_I.
    ChshOnIntersection,
    /// `E(X|Λ) = P(O|Λ)E(X|O∩Λ) + P(Oᶜ|Λ)E(X|Oᶜ∩Λ)` with O the other three sets.
    Decomposition,
    /// `|E(X|Λ_pair) − δE(X|Λ_I)| ≤ 1 − δ`.
    CommonPartEstimate,
    /// `P(O|Λ_anchor) ≥ Σ P(Λ_j|Λ_anchor) − 2`.
    Bonferroni,
    /// `P(Λ_j|Λ_i) ≥ 2 − 1/γ`.
    PairwiseCoincidence,
    /// `δ ≥ 4 − 3/γ`.
    DeltaFromGamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepStatus {
    /// `slack` is the smallest distance to violation over all instances of the step.
    Pass {
        slack: f64,
    },
    Fail {
        slack: f64,
        detail: String,
    },
    Skipped {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: ProofStep,
    #[serde(flatten)]
    pub status: StepStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofChainReport {
    pub steps: Vec<StepResult>,
}

impl ProofChainReport {
    pub fn passed(&self) -> bool {
        !self.steps.iter().any(|s| matches!(s.status, StepStatus::Fail { .. }))
    }

    pub fn step(&self, step: ProofStep) -> Option<&StepStatus> {
        self.steps.iter().find(|s| s.step == step).map(|s| &s.status)
    }
}

/// Collects the minimum slack of one step over its instances.
struct Step {
    step: ProofStep,
    tol: f64,
    slack: f64,
    failure: Option<String>,
}

impl Step {
    fn new(step: ProofStep, tol: f64) -> Self {
        Step {
            step,
            tol,
            slack: f64::INFINITY,
            failure: None,
        }
    }

    /// Record `slack ≥ 0` (up to tolerance).
    fn require(&mut self, slack: f64, what: impl FnOnce() -> String) {
        self.slack = self.slack.min(slack);
        if slack < -self.tol && self.failure.is_none() {
            self.failure = Some(what());
        }
    }

    fn finish(self) -> StepResult {
        let status = match self.failure {
            Some(detail) => StepStatus::Fail {
                slack: self.slack,
                detail,
            },
            None => StepStatus::Pass { slack: self.slack },
        };
        StepResult {
            step: self.step,
            status,
        }
    }
}

fn skipped(step: ProofStep, reason: &str) -> StepResult {
    StepResult {
        step,
        status: StepStatus::Skipped {
            reason: reason.to_string(),
        },
    }
}

/// Check every intermediate inequality and identity of the bound's derivation.
pub fn check_proof_chain(model: &FiniteModel) -> ProofChainReport {
    use ProofStep::*;
    let all = [
        ChshOnIntersection,
        Decomposition,
        CommonPartEstimate,
        Bonferroni,
        PairwiseCoincidence,
        DeltaFromGamma,
    ];
    let report = match eval_finite(model) {
        Ok(r) => r,
        Err(e) => {
            let reason = e.to_string();
            return ProofChainReport {
                steps: all.iter().map(|&s| skipped(s, &reason)).collect(),
            };
        }
    };
    let mut steps = Vec::with_capacity(all.len());
    let p = report.pair_probabilities;
    let (gamma, delta) = (report.gamma, report.delta);

    if report.p_intersection > 0.0 {
        let on_i: [f64; 4] = std::array::from_fn(|i| model.conditional(i, Atom::in_all).unwrap_or(0.0));
        let mut a = Step::new(ChshOnIntersection, THEOREM_TOL);
        let s = chsh_value(on_i);
        a.require(2.0 - s, || format!("CHSH on Λ_I = {s}"));
        steps.push(a.finish());

        let mut b = Step::new(Decomposition, IDENTITY_TOL);
        let mut c = Step::new(CommonPartEstimate, THEOREM_TOL);
        for i in 0..4 {
            let inside = model.measure(|x| x.members[i] && x.in_others(i));
            let outside = p[i] - inside;
            let rhs = inside / p[i] * model.conditional(i, |x| x.members[i] && x.in_others(i)).unwrap_or(0.0)
                + outside / p[i] * model.conditional(i, |x| x.members[i] && !x.in_others(i)).unwrap_or(0.0);
            let diff = (report.correlations[i] - rhs).abs();
            b.require(-diff, || format!("{}: decomposition off by {diff}", PAIR_LABELS[i]));

            let dev = (report.correlations[i] - delta * on_i[i]).abs();
            c.require(1.0 - delta - dev, || {
                format!("{}: |E − δE_I| = {dev} > 1 − δ = {}", PAIR_LABELS[i], 1.0 - delta)
            });
        }
        steps.push(b.finish());
        steps.push(c.finish());
    } else {
        for s in [ChshOnIntersection, Decomposition, CommonPartEstimate] {
            steps.push(skipped(s, "common part Λ_I is empty"));
        }
    }

    let joint = |i: usize, j: usize| model.measure(|x| x.members[i] && x.members[j]);
    let mut d = Step::new(Bonferroni, THEOREM_TOL);
    for i in 0..4 {
        let lhs = model.measure(|x| x.members[i] && x.in_others(i)) / p[i];
        let rhs: f64 = (0..4).filter(|&j| j != i).map(|j| joint(i, j) / p[i]).sum::<f64>() - 2.0;
        d.require(lhs - rhs, || format!("anchor {}: {lhs} < {rhs}", PAIR_LABELS[i]));
    }
    steps.push(d.finish());

    let mut e = Step::new(PairwiseCoincidence, THEOREM_TOL);
    for i in 0..4 {
        for j in (0..4).filter(|&j| j != i) {
            let cond = joint(i, j) / p[i];
            let floor = 2.0 - 1.0 / gamma;
            e.require(cond - floor, || {
                format!("P({}|{}) = {cond} < 2 − 1/γ = {floor}", PAIR_LABELS[j], PAIR_LABELS[i])
            });
        }
    }
    steps.push(e.finish());

    let mut f = Step::new(DeltaFromGamma, THEOREM_TOL);
    let floor = 4.0 - 3.0 / gamma;
    f.require(delta - floor, || format!("δ = {delta} < 4 − 3/γ = {floor}"));
    steps.push(f.finish());

    ProofChainReport { steps }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// `max(0, 4 − 3/γ)`.
    pub delta_lb: f64,
    /// `6/γ − 4`.
    pub s_bound: f64,
}

pub fn bounds(gamma: f64) -> Result<Bounds, BoundsError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(BoundsError::GammaOutOfRange(gamma));
    }
    Ok(Bounds {
        delta_lb: (4.0 - 3.0 / gamma).max(0.0),
        s_bound: 6.0 / gamma - 4.0,
    })
}

/// Coincidence probability above which `6/γ − 4 < 2√2`: `3 − 3/√2`.
pub fn critical_gamma() -> f64 {
    3.0 - 3.0 / SQRT_2
}

/// Detector efficiency threshold for the CHSH inequality, `1/√2`.
pub fn efficiency_reference() -> f64 {
    1.0 / SQRT_2
}

// ---------------------------------------------------------------------------
// random model generation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Generic,
    ExtremeWeights,
    NearDisjoint,
    HighCoincidence,
    Octant,
    PerturbedOctant,
}

impl ModelFamily {
    const ALL: [ModelFamily; 6] = [
        ModelFamily::Generic,
        ModelFamily::ExtremeWeights,
        ModelFamily::NearDisjoint,
        ModelFamily::HighCoincidence,
        ModelFamily::Octant,
        ModelFamily::PerturbedOctant,
    ];

    pub fn for_index(index: u64) -> Self {
        Self::ALL[(index % Self::ALL.len() as u64) as usize]
    }
}

fn below(rng: &mut TrialRng, n: usize) -> usize {
    ((rng.uniform() * n as f64) as usize).min(n - 1)
}

fn sign(rng: &mut TrialRng) -> f64 {
    if rng.uniform() < 0.5 {
        -1.0
    } else {
        1.0
    }
}

fn random_atoms(rng: &mut TrialRng, family: ModelFamily) -> Vec<Atom> {
    let n = 1 + below(rng, 12);
    (0..n)
        .map(|_| {
            let weight = match family {
                ModelFamily::ExtremeWeights => 10f64.powf(-9.0 * rng.uniform()),
                _ => rng.uniform() + 1e-3,
            };
            let values = std::array::from_fn(|_| match family {
                ModelFamily::Generic => 2.0 * rng.uniform() - 1.0,
                // corners and interior mixed
                _ if rng.uniform() < 0.8 => sign(rng),
                _ => 2.0 * rng.uniform() - 1.0,
            });
            let members = match family {
                ModelFamily::NearDisjoint => {
                    let home = below(rng, 4);
                    std::array::from_fn(|j| j == home || rng.uniform() < 0.1)
                }
                ModelFamily::HighCoincidence => std::array::from_fn(|_| rng.uniform() < 0.95),
                _ => {
                    let p = 0.3 + 0.7 * rng.uniform();
                    std::array::from_fn(|_| rng.uniform() < p)
                }
            };
            Atom {
                weight,
                values,
                members,
            }
        })
        .collect()
}

fn octant_atoms(rng: &mut TrialRng, perturb: bool) -> Vec<Atom> {
    let l = rng.uniform();
    let settings = if perturb {
        ChshSettings::new(
            0.0,
            2.0 * FRAC_PI_4 + 0.3 * (rng.uniform() - 0.5),
            FRAC_PI_4 + 0.3 * (rng.uniform() - 0.5),
            -FRAC_PI_4 + 0.3 * (rng.uniform() - 0.5),
        )
    } else {
        Ok(ChshSettings::standard())
    };
    let window = CoincidenceWindow::new(if perturb { 0.25 + 2.5 * rng.uniform() } else { 1.5 });
    let pw = OctantModel::new(l).ok().and_then(|m| m.piecewise());
    match (settings, window, pw) {
        (Ok(s), Ok(w), Some(pw)) => {
            let mut atoms: Vec<Atom> = FiniteModel::from_refinement(&common_refinement(&pw, &s, w))
                .map(|m| m.atoms)
                .unwrap_or_default();
            if perturb && !atoms.is_empty() {
                let k = below(rng, atoms.len());
                let j = below(rng, 4);
                atoms[k].values[j] = 2.0 * rng.uniform() - 1.0;
            }
            atoms
        }
        _ => Vec::new(),
    }
}

/// Deterministic random model number `index` of a suite seeded with `seed`.
pub fn random_model(seed: RunSeed, index: u64) -> FiniteModel {
    let family = ModelFamily::for_index(index);
    // own stream per model; draws run sequentially through its blocks
    let mut rng = trial_rng(seed.fork(index), 0);
    let mut atoms = match family {
        ModelFamily::Octant => octant_atoms(&mut rng, false),
        ModelFamily::PerturbedOctant => octant_atoms(&mut rng, true),
        _ => random_atoms(&mut rng, family),
    };
    if atoms.is_empty() {
        atoms = random_atoms(&mut rng, ModelFamily::Generic);
    }
    for set in 0..4 {
        if !atoms.iter().any(|a| a.members[set]) {
            let k = below(&mut rng, atoms.len());
            atoms[k].members[set] = true;
        }
    }
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    for a in &mut atoms {
        a.weight /= total;
    }
    // normalized weights in [-1, 1] values: always valid
    FiniteModel::new(atoms).expect("generated model is valid")
}

// ---------------------------------------------------------------------------
// suites

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// `lhs ≤ 4 − 2δ` on random models.
    Theorem2,
    /// Every intermediate step of the derivation on random models.
    ProofChain,
    /// `δ ≥ 4 − 3/γ` and `lhs ≤ 6/γ − 4` on random models.
    DeltaGamma,
    /// The discretized saturating octant model meets `6/γ − 4` with equality.
    Saturation,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Theorem2, Suite::ProofChain, Suite::DeltaGamma, Suite::Saturation];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorem2 => "theorem2",
            Suite::ProofChain => "proof-chain",
            Suite::DeltaGamma => "delta-gamma",
            Suite::Saturation => "saturation",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

/// Witnesses kept per suite report.
const MAX_WITNESSES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub models: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Smallest and largest slack of the suite's inequality over checked models.
    pub min_margin: Option<f64>,
    pub max_margin: Option<f64>,
    /// Largest `lhs / (4 − 2δ)` seen.
    pub max_ratio_thm2: Option<f64>,
    /// Largest `lhs / (6/γ − 4)` seen, over models with a positive bound.
    pub max_ratio_gamma: Option<f64>,
    pub witnesses: Vec<FiniteModel>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct ModelResult {
    verdict: Verdict,
    margin: Option<f64>,
    ratio_thm2: Option<f64>,
    ratio_gamma: Option<f64>,
}

fn ratios(r: &DeltaGammaReport) -> (Option<f64>, Option<f64>) {
    (
        (r.bound_thm2 > 0.0).then(|| r.lhs / r.bound_thm2),
        (r.bound_gamma > 0.0).then(|| r.lhs / r.bound_gamma),
    )
}

fn check_model(suite: Suite, model: &FiniteModel) -> ModelResult {
    let skip = ModelResult {
        verdict: Verdict::Skip,
        margin: None,
        ratio_thm2: None,
        ratio_gamma: None,
    };
    let Ok(report) = eval_finite(model) else {
        return skip;
    };
    let (ratio_thm2, ratio_gamma) = ratios(&report);
    let (ok, margin) = match suite {
        Suite::Theorem2 => (report.margin_thm2 >= -THEOREM_TOL, report.margin_thm2),
        Suite::ProofChain => {
            let chain = check_proof_chain(model);
            let slack = chain
                .steps
                .iter()
                .filter_map(|s| match s.status {
                    StepStatus::Pass { slack } | StepStatus::Fail { slack, .. } => Some(slack),
                    StepStatus::Skipped { .. } => None,
                })
                .fold(f64::INFINITY, f64::min);
            (chain.passed(), slack)
        }
        Suite::DeltaGamma => {
            let slack = (report.delta - (4.0 - 3.0 / report.gamma)).min(report.margin_gamma);
            (slack >= -THEOREM_TOL, slack)
        }
        Suite::Saturation => (report.margin_gamma.abs() <= THEOREM_TOL, report.margin_gamma),
    };
    ModelResult {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        margin: Some(margin),
        ratio_thm2,
        ratio_gamma,
    }
}

fn suite_model(suite: Suite, seed: RunSeed, index: u64) -> FiniteModel {
    match suite {
        Suite::Saturation => FiniteModel::octant(
            crate::lhv::SATURATING_L,
            &ChshSettings::standard(),
            CoincidenceWindow::new(1.5).unwrap(),
        )
        .expect("octant discretization is valid"),
        _ => random_model(seed, index),
    }
}

fn fold_opt(acc: Option<f64>, x: Option<f64>, f: fn(f64, f64) -> f64) -> Option<f64> {
    match (acc, x) {
        (Some(a), Some(b)) => Some(f(a, b)),
        (a, b) => a.or(b),
    }
}

pub fn run_suite(suite: Suite, models: usize, seed: u64, lanes: Lanes) -> SuiteReport {
    let run_seed = RunSeed::new(seed, 0);
    let count = if suite == Suite::Saturation { 1 } else { models };
    let work = || -> Vec<(ModelResult, Option<FiniteModel>)> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let m = suite_model(suite, run_seed, i);
                let r = check_model(suite, &m);
                let witness = matches!(r.verdict, Verdict::Fail).then_some(m);
                (r, witness)
            })
            .collect()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(lanes.get()).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    };
    let mut report = SuiteReport {
        suite,
        seed,
        models: count,
        passed: 0,
        failed: 0,
        skipped: 0,
        min_margin: None,
        max_margin: None,
        max_ratio_thm2: None,
        max_ratio_gamma: None,
        witnesses: Vec::new(),
    };
    for (r, witness) in results {
        match r.verdict {
            Verdict::Pass => report.passed += 1,
            Verdict::Fail => report.failed += 1,
            Verdict::Skip => report.skipped += 1,
        }
        report.min_margin = fold_opt(report.min_margin, r.margin, f64::min);
        report.max_margin = fold_opt(report.max_margin, r.margin, f64::max);
        report.max_ratio_thm2 = fold_opt(report.max_ratio_thm2, r.ratio_thm2, f64::max);
        report.max_ratio_gamma = fold_opt(report.max_ratio_gamma, r.ratio_gamma, f64::max);
        if let Some(w) = witness {
            if report.witnesses.len() < MAX_WITNESSES {
                report.witnesses.push(w);
            }
        }
    }
    report
}
