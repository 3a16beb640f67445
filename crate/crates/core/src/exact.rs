//! Exact measures for piecewise-constant local models.
//!
//! A pattern shifted by a setting `s` changes value only at `breakpoint + s`. On the
//! common refinement of all shifted breakpoint sets every response is constant, so
//! each arc × layer (band, main) cell can be classified from its midpoint and its
//! measure accumulated as `arc_length / 2π × layer_height`.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, EngineError, Lanes};
use crate::lhv::Model;
use crate::rng::RunSeed;
use crate::types::{canonicalize_angle, is_coincident, ChshSettings, CoincidenceWindow, LocalResponse, Setting};
use crate::PAIR_LABELS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("piecewise pattern has no intervals")]
    Empty,
    #[error("breakpoints and responses differ in length ({breakpoints} vs {responses})")]
    LengthMismatch { breakpoints: usize, responses: usize },
    #[error("first breakpoint must be 0, got {0}")]
    FirstBreakpoint(f64),
    #[error("breakpoints must be strictly increasing within [0, 2π) (index {0})")]
    Unsorted(usize),
    #[error("non-finite detection time in interval {0}")]
    BadTime(usize),
    #[error("band height out of [0,1]: {0}")]
    BadBand(f64),
    #[error("model has no piecewise-constant form")]
    NotPiecewise,
    #[error("pair {pair} has zero coincidence probability")]
    NoCoincidence { pair: &'static str },
    #[error("trials must be >= 1")]
    NoTrials,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A response pattern over the relative angle `θ - setting`, constant on each
/// `[breakpoints[i], breakpoints[i+1])`, plus a band of height `band` in which the
/// outcome is unchanged and the detection time is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseResponse {
    breakpoints: Vec<f64>,
    main: Vec<LocalResponse>,
    band: f64,
}

impl PiecewiseResponse {
    pub fn new(breakpoints: Vec<f64>, main: Vec<LocalResponse>, band: f64) -> Result<Self, ExactError> {
        if breakpoints.is_empty() {
            return Err(ExactError::Empty);
        }
        if breakpoints.len() != main.len() {
            return Err(ExactError::LengthMismatch {
                breakpoints: breakpoints.len(),
                responses: main.len(),
            });
        }
        if breakpoints[0] != 0.0 {
            return Err(ExactError::FirstBreakpoint(breakpoints[0]));
        }
        for (i, w) in breakpoints.windows(2).enumerate() {
            if w[1].partial_cmp(&w[0]) != Some(Ordering::Greater) {
                return Err(ExactError::Unsorted(i + 1));
            }
        }
        if breakpoints[breakpoints.len() - 1].partial_cmp(&TAU) != Some(Ordering::Less) {
            return Err(ExactError::Unsorted(breakpoints.len() - 1));
        }
        if let Some(i) = main.iter().position(|r| !r.time.is_finite()) {
            return Err(ExactError::BadTime(i));
        }
        if !(0.0..=1.0).contains(&band) {
            return Err(ExactError::BadBand(band));
        }
        Ok(PiecewiseResponse {
            breakpoints,
            main,
            band,
        })
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Response at relative angle `phi` (any real), in the band or the main region.
    pub fn respond(&self, phi: f64, in_band: bool) -> LocalResponse {
        let phi = canonicalize_angle(phi).unwrap_or(0.0);
        let idx = self.breakpoints.partition_point(|&b| b <= phi) - 1;
        let r = self.main[idx];
        if in_band {
            LocalResponse { time: 0.0, ..r }
        } else {
            r
        }
    }

    fn layers(&self) -> impl Iterator<Item = (bool, f64)> {
        [(true, self.band), (false, 1.0 - self.band)]
            .into_iter()
            .filter(|&(_, h)| h > 0.0)
    }
}

/// Arcs `[lo, hi)` of the common refinement of the pattern shifted by each setting.
fn refinement_arcs(model: &PiecewiseResponse, settings: &[Setting]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = settings
        .iter()
        .flat_map(|s| {
            model
                .breakpoints
                .iter()
                .map(move |&b| canonicalize_angle(b + s.angle()).unwrap_or(0.0))
        })
        .chain(std::iter::once(0.0))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut arcs: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    arcs.push((cuts[cuts.len() - 1], TAU));
    arcs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStatistics {
    pub p_coincidence: f64,
    pub p_equal_and_coincident: f64,
    pub p_unequal_and_coincident: f64,
    pub p_equal_not_coincident: f64,
    pub p_unequal_not_coincident: f64,
    /// `None` when the pair never coincides.
    pub conditional_correlation: Option<f64>,
}

#[derive(Default)]
struct CellTally {
    eq_c: f64,
    ne_c: f64,
    eq_n: f64,
    ne_n: f64,
}

impl CellTally {
    fn add(&mut self, weight: f64, left: LocalResponse, right: LocalResponse, window: CoincidenceWindow) {
        let equal = left.outcome == right.outcome;
        let slot = match (equal, is_coincident(left.time, right.time, window)) {
            (true, true) => &mut self.eq_c,
            (false, true) => &mut self.ne_c,
            (true, false) => &mut self.eq_n,
            (false, false) => &mut self.ne_n,
        };
        *slot += weight;
    }

    /// Normalize by the accumulated total, which is 1 up to rounding.
    fn finish(self) -> PairStatistics {
        let total = self.eq_c + self.ne_c + self.eq_n + self.ne_n;
        let (eq_c, ne_c) = (self.eq_c / total, self.ne_c / total);
        let p_c = eq_c + ne_c;
        PairStatistics {
            p_coincidence: p_c,
            p_equal_and_coincident: eq_c,
            p_unequal_and_coincident: ne_c,
            p_equal_not_coincident: self.eq_n / total,
            p_unequal_not_coincident: self.ne_n / total,
            conditional_correlation: (p_c > 0.0).then(|| (eq_c - ne_c) / p_c),
        }
    }
}

pub fn sweep_pair(model: &PiecewiseResponse, a: Setting, c: Setting, window: CoincidenceWindow) -> PairStatistics {
    let mut tally = CellTally::default();
    for (lo, hi) in refinement_arcs(model, &[a, c]) {
        let mid = 0.5 * (lo + hi);
        let len = hi - lo;
        for (in_band, height) in model.layers() {
            let left = model.respond(mid - a.angle(), in_band);
            let right = model.respond(mid - c.angle(), in_band);
            tally.add(len * height, left, right, window);
        }
    }
    tally.finish()
}

/// One cell of the common refinement for all four settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementCell {
    pub weight: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub in_band: bool,
    /// Left responses at a, b.
    pub left: [LocalResponse; 2],
    /// Right responses at c, d.
    pub right: [LocalResponse; 2],
    /// Membership in Λ_AC', Λ_AD', Λ_BC', Λ_BD'.
    pub coincident: [bool; 4],
}

pub fn common_refinement(
    model: &PiecewiseResponse,
    settings: &ChshSettings,
    window: CoincidenceWindow,
) -> Vec<RefinementCell> {
    let mut cells = Vec::new();
    for (lo, hi) in refinement_arcs(model, &settings.all()) {
        let mid = 0.5 * (lo + hi);
        for (in_band, height) in model.layers() {
            let left = settings.left().map(|s| model.respond(mid - s.angle(), in_band));
            let right = settings.right().map(|s| model.respond(mid - s.angle(), in_band));
            let coincident = std::array::from_fn(|i| {
                let (l, r) = crate::PAIR_SETTINGS[i];
                is_coincident(left[l].time, right[r].time, window)
            });
            cells.push(RefinementCell {
                weight: (hi - lo) / TAU * height,
                theta_lo: lo,
                theta_hi: hi,
                in_band,
                left,
                right,
                coincident,
            });
        }
    }
    cells
}

/// Exact four-pair analysis, including the common part Λ_I of all coincidence sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonPart {
    pub pairs: [PairStatistics; 4],
    pub p_intersection: f64,
    /// `P(Λ_I | Λ_pair)` per pair.
    pub conditional_intersection: [f64; 4],
    pub delta: f64,
    pub gamma: f64,
    pub correlations: [f64; 4],
    pub s_value: f64,
}

impl CommonPart {
    pub fn bound_thm2(&self) -> f64 {
        4.0 - 2.0 * self.delta
    }

    pub fn bound_gamma(&self) -> f64 {
        6.0 / self.gamma - 4.0
    }
}

pub fn chsh_value(e: [f64; 4]) -> f64 {
    (e[0] + e[1]).abs() + (e[2] - e[3]).abs()
}

pub fn sweep_common_part(
    model: &PiecewiseResponse,
    settings: &ChshSettings,
    window: CoincidenceWindow,
) -> Result<CommonPart, ExactError> {
    let cells = common_refinement(model, settings, window);
    let mut tallies: [CellTally; 4] = Default::default();
    let mut p_intersection = 0.0;
    let mut total = 0.0;
    for cell in &cells {
        total += cell.weight;
        for (i, tally) in tallies.iter_mut().enumerate() {
            let (l, r) = crate::PAIR_SETTINGS[i];
            tally.add(cell.weight, cell.left[l], cell.right[r], window);
        }
        if cell.coincident.iter().all(|&c| c) {
            p_intersection += cell.weight;
        }
    }
    p_intersection /= total;
    let pairs = tallies.map(CellTally::finish);
    let mut correlations = [0.0; 4];
    for (i, p) in pairs.iter().enumerate() {
        correlations[i] = p
            .conditional_correlation
            .ok_or(ExactError::NoCoincidence { pair: PAIR_LABELS[i] })?;
    }
    let conditional_intersection = pairs.map(|p| p_intersection / p.p_coincidence);
    let delta = conditional_intersection.iter().copied().fold(f64::INFINITY, f64::min);
    let gamma = pairs.iter().map(|p| p.p_coincidence).fold(f64::INFINITY, f64::min);
    Ok(CommonPart {
        pairs,
        p_intersection,
        conditional_intersection,
        delta,
        gamma,
        correlations,
        s_value: chsh_value(correlations),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub pair: String,
    pub exact_gamma: f64,
    pub mc_gamma: f64,
    pub gamma_std_error: f64,
    pub gamma_z: f64,
    pub exact_correlation: f64,
    pub mc_correlation: Option<f64>,
    pub correlation_std_error: Option<f64>,
    pub correlation_z: Option<f64>,
}

fn z_score(estimate: f64, exact: f64, se: f64) -> f64 {
    let diff = estimate - exact;
    if se > 0.0 {
        diff / se
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Monte Carlo estimates against the exact sweep, pair by pair.
pub fn mc_vs_exact_report(
    model: &Model,
    settings: &ChshSettings,
    window: CoincidenceWindow,
    trials: u64,
    seed: RunSeed,
    lanes: Lanes,
) -> Result<Vec<ComparisonRow>, ExactError> {
    if trials == 0 {
        return Err(ExactError::NoTrials);
    }
    let pw = model.piecewise().ok_or(ExactError::NotPiecewise)?;
    let mut rows = Vec::with_capacity(4);
    for (i, label) in PAIR_LABELS.into_iter().enumerate() {
        let (a, c) = settings.pair(i);
        let exact = sweep_pair(&pw, a, c, window);
        let exact_e = exact
            .conditional_correlation
            .ok_or(ExactError::NoCoincidence { pair: label })?;
        let mc = engine::run_pair(model, a, c, window, trials, seed, i as u64, lanes)?;
        rows.push(ComparisonRow {
            pair: label.to_string(),
            exact_gamma: exact.p_coincidence,
            mc_gamma: mc.gamma_hat,
            gamma_std_error: mc.gamma_std_error,
            gamma_z: z_score(mc.gamma_hat, exact.p_coincidence, mc.gamma_std_error),
            exact_correlation: exact_e,
            mc_correlation: mc.e_conditional,
            correlation_std_error: mc.std_error,
            correlation_z: mc
                .e_conditional
                .zip(mc.std_error)
                .map(|(e, se)| z_score(e, exact_e, se)),
        });
    }
    Ok(rows)
}
