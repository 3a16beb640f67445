//! Monte Carlo trial generation and estimation.
//!
//! Trials are split into fixed-size chunks that workers claim independently. Each
//! chunk reduces to integer counts, so the merged totals (and every estimate derived
//! from them) are identical for any number of worker lanes.

use std::num::NonZeroUsize;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{self, chsh_value, ExactError};
use crate::lhv::{ModelError, ModelSpec, PairSampler};
use crate::rng::{trial_rng, RunSeed};
use crate::types::{ChshSettings, CoincidenceWindow, Outcome, Setting, TrialRecord, TypeError};

const CHUNK: u64 = 1 << 14;

/// Environment variable capping the number of worker lanes.
pub const THREADS_ENV: &str = "BELLSIM_THREADS";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("trials per pair must be >= 1")]
    NoTrials,
    #[error("scan needs at least 2 steps, got {0}")]
    TooFewSteps(usize),
    #[error("invalid scan range for {parameter}: [{from}, {to}]")]
    InvalidRange {
        parameter: &'static str,
        from: f64,
        to: f64,
    },
    #[error("scanning l requires the octant model")]
    NotOctant,
    #[error("failed to start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("exact evaluation failed: {0}")]
    Exact(String),
}

impl From<ExactError> for EngineError {
    fn from(e: ExactError) -> Self {
        EngineError::Exact(e.to_string())
    }
}

/// Number of worker lanes used for trial generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lanes(NonZeroUsize);

impl Lanes {
    pub const SERIAL: Lanes = Lanes(NonZeroUsize::MIN);

    pub fn new(n: usize) -> Self {
        Lanes(NonZeroUsize::new(n).unwrap_or(NonZeroUsize::MIN))
    }

    /// Available parallelism, capped by `BELLSIM_THREADS` when set.
    pub fn from_env() -> Self {
        let available = std::thread::available_parallelism().map_or(1, NonZeroUsize::get);
        let cap = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0);
        Lanes::new(cap.map_or(available, |c| c.min(available)))
    }

    pub fn get(self) -> usize {
        self.0.get()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub settings: ChshSettings,
    pub window: CoincidenceWindow,
    pub trials_per_pair: u64,
    pub seed: RunSeed,
}

impl ExperimentConfig {
    /// The saturating octant model at the standard settings with ΔT = 3/2.
    pub fn standard(trials_per_pair: u64, seed: RunSeed) -> Self {
        ExperimentConfig {
            model: ModelSpec::Octant {
                l: crate::lhv::SATURATING_L,
            },
            settings: ChshSettings::standard(),
            window: CoincidenceWindow::new(1.5).unwrap(),
            trials_per_pair,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    total: u64,
    coincident: u64,
    /// Σ over coincident trials of the outcome product.
    product_sum: i64,
    left_plus: u64,
    right_plus: u64,
}

impl Counts {
    fn merge(self, o: Counts) -> Counts {
        Counts {
            total: self.total + o.total,
            coincident: self.coincident + o.coincident,
            product_sum: self.product_sum + o.product_sum,
            left_plus: self.left_plus + o.left_plus,
            right_plus: self.right_plus + o.right_plus,
        }
    }

    fn record(&mut self, trial: &TrialRecord) {
        self.total += 1;
        self.left_plus += (trial.left.outcome == Outcome::Plus) as u64;
        self.right_plus += (trial.right.outcome == Outcome::Plus) as u64;
        if trial.coincident {
            self.coincident += 1;
            self.product_sum += trial.product() as i64;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub n_total: u64,
    pub n_coincident: u64,
    /// Mean outcome product over coincident trials; `None` when nothing coincided.
    pub e_conditional: Option<f64>,
    pub std_error: Option<f64>,
    pub gamma_hat: f64,
    pub gamma_std_error: f64,
    /// Fraction of all trials (coincident or not) with left outcome +1.
    pub left_plus_fraction: f64,
    pub right_plus_fraction: f64,
}

impl From<Counts> for PairEstimate {
    fn from(c: Counts) -> Self {
        let n = c.total as f64;
        let gamma_hat = c.coincident as f64 / n;
        let (e_conditional, std_error) = if c.coincident == 0 {
            (None, None)
        } else {
            let k = c.coincident as f64;
            let mean = c.product_sum as f64 / k;
            // products are ±1, so Σx² = k
            let var = if c.coincident > 1 {
                ((k - k * mean * mean) / (k - 1.0)).max(0.0)
            } else {
                0.0
            };
            (Some(mean), Some((var / k).sqrt()))
        };
        PairEstimate {
            n_total: c.total,
            n_coincident: c.coincident,
            e_conditional,
            std_error,
            gamma_hat,
            gamma_std_error: (gamma_hat * (1.0 - gamma_hat) / n).sqrt(),
            left_plus_fraction: c.left_plus as f64 / n,
            right_plus_fraction: c.right_plus as f64 / n,
        }
    }
}

fn count_range<S: PairSampler + ?Sized>(
    sampler: &S,
    a: Setting,
    c: Setting,
    window: CoincidenceWindow,
    seed: RunSeed,
    range: std::ops::Range<u64>,
) -> Counts {
    let mut counts = Counts::default();
    for i in range {
        let mut rng = trial_rng(seed, i);
        let (left, right) = sampler.sample_pair(a, c, &mut rng);
        counts.record(&TrialRecord::new((a, c), left, right, window));
    }
    counts
}

fn with_pool<T: Send>(lanes: Lanes, f: impl FnOnce() -> T + Send) -> Result<T, EngineError> {
    if lanes.get() == 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(lanes.get())
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

fn count_pair<S: PairSampler + ?Sized>(
    sampler: &S,
    a: Setting,
    c: Setting,
    window: CoincidenceWindow,
    n: u64,
    seed: RunSeed,
    parallel: bool,
) -> Counts {
    let chunks = n.div_ceil(CHUNK);
    let chunk = |k: u64| count_range(sampler, a, c, window, seed, k * CHUNK..((k + 1) * CHUNK).min(n));
    if parallel {
        (0..chunks)
            .into_par_iter()
            .map(chunk)
            .reduce(Counts::default, Counts::merge)
    } else {
        (0..chunks).map(chunk).fold(Counts::default(), Counts::merge)
    }
}

/// Estimate the conditional correlation and coincidence rate for one setting pair.
///
/// `pair_index` selects the random stream, so the four CHSH pairs draw
/// independent hidden variables from one run seed.
#[allow(clippy::too_many_arguments)]
pub fn run_pair<S: PairSampler + ?Sized>(
    sampler: &S,
    a: Setting,
    c: Setting,
    window: CoincidenceWindow,
    n: u64,
    seed: RunSeed,
    pair_index: u64,
    lanes: Lanes,
) -> Result<PairEstimate, EngineError> {
    if n == 0 {
        return Err(EngineError::NoTrials);
    }
    let stream = seed.fork(pair_index);
    let parallel = lanes.get() > 1;
    let counts = with_pool(lanes, || count_pair(sampler, a, c, window, n, stream, parallel))?;
    Ok(counts.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub pairs: [PairEstimate; 4],
    /// `None` if any pair had no coincidences.
    pub s_value: Option<f64>,
    pub s_std_error: Option<f64>,
    pub gamma_min: f64,
    pub classic_bound: f64,
    /// `6/γ_min − 4`; `None` when γ_min = 0.
    pub gamma_bound: Option<f64>,
}

impl ChshEstimate {
    fn from_pairs(pairs: [PairEstimate; 4]) -> Self {
        let e: Option<Vec<f64>> = pairs.iter().map(|p| p.e_conditional).collect();
        let se: Option<Vec<f64>> = pairs.iter().map(|p| p.std_error).collect();
        let s_value = e.map(|e| chsh_value([e[0], e[1], e[2], e[3]]));
        let s_std_error = se.map(|se| se.iter().map(|x| x * x).sum::<f64>().sqrt());
        let gamma_min = pairs.iter().map(|p| p.gamma_hat).fold(f64::INFINITY, f64::min);
        ChshEstimate {
            pairs,
            s_value,
            s_std_error,
            gamma_min,
            classic_bound: 2.0,
            gamma_bound: (gamma_min > 0.0).then(|| 6.0 / gamma_min - 4.0),
        }
    }
}

pub fn run_chsh(config: &ExperimentConfig, lanes: Lanes) -> Result<ChshEstimate, EngineError> {
    if config.trials_per_pair == 0 {
        return Err(EngineError::NoTrials);
    }
    let model = config.model.build()?;
    let parallel = lanes.get() > 1;
    let counts = with_pool(lanes, || {
        std::array::from_fn(|i| {
            let (a, c) = config.settings.pair(i);
            count_pair(
                &model,
                a,
                c,
                config.window,
                config.trials_per_pair,
                config.seed.fork(i as u64),
                parallel,
            )
        })
    })?;
    Ok(ChshEstimate::from_pairs(counts.map(PairEstimate::from)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    /// Band height of the octant model.
    L,
    DeltaT,
    /// `x` in the settings family a = 0, b = 2x, c = x, d = −x.
    RelativeAngle,
}

impl ScanParameter {
    pub fn name(self) -> &'static str {
        match self {
            ScanParameter::L => "l",
            ScanParameter::DeltaT => "delta_t",
            ScanParameter::RelativeAngle => "relative_angle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub value: f64,
    pub gamma: f64,
    #[serde(rename = "S")]
    pub s: Option<f64>,
    pub bound_6g4: Option<f64>,
    /// `bound_6g4 − S`; negative means the bound is violated.
    pub margin: Option<f64>,
    pub method: Method,
}

fn apply(config: &ExperimentConfig, parameter: ScanParameter, value: f64) -> Result<ExperimentConfig, EngineError> {
    let mut cfg = *config;
    match parameter {
        ScanParameter::L => match cfg.model {
            ModelSpec::Octant { .. } => cfg.model = ModelSpec::Octant { l: value },
            _ => return Err(EngineError::NotOctant),
        },
        ScanParameter::DeltaT => cfg.window = CoincidenceWindow::new(value)?,
        ScanParameter::RelativeAngle => cfg.settings = ChshSettings::symmetric(value)?,
    }
    Ok(cfg)
}

fn scan_row(cfg: &ExperimentConfig, value: f64, lanes: Lanes) -> Result<ScanRow, EngineError> {
    let model = cfg.model.build()?;
    let (gamma, s, method) = match model.piecewise() {
        Some(pw) => {
            let pairs: [_; 4] = std::array::from_fn(|i| {
                let (a, c) = cfg.settings.pair(i);
                exact::sweep_pair(&pw, a, c, cfg.window)
            });
            let gamma = pairs.iter().map(|p| p.p_coincidence).fold(f64::INFINITY, f64::min);
            let e: Option<Vec<f64>> = pairs.iter().map(|p| p.conditional_correlation).collect();
            (gamma, e.map(|e| chsh_value([e[0], e[1], e[2], e[3]])), Method::Exact)
        }
        None => {
            let est = run_chsh(cfg, lanes)?;
            (est.gamma_min, est.s_value, Method::MonteCarlo)
        }
    };
    let bound = (gamma > 0.0).then(|| 6.0 / gamma - 4.0);
    Ok(ScanRow {
        value,
        gamma,
        s,
        bound_6g4: bound,
        margin: bound.zip(s).map(|(b, s)| b - s),
        method,
    })
}

/// Evaluate `steps` evenly spaced parameter values from `from` to `to` inclusive.
///
/// Piecewise-constant models are evaluated exactly; others by Monte Carlo with
/// the config's trial count and seed. Rows come back sorted by value.
pub fn scan(
    config: &ExperimentConfig,
    parameter: ScanParameter,
    from: f64,
    to: f64,
    steps: usize,
    lanes: Lanes,
) -> Result<Vec<ScanRow>, EngineError> {
    if steps < 2 {
        return Err(EngineError::TooFewSteps(steps));
    }
    let valid = from.is_finite()
        && to.is_finite()
        && from <= to
        && match parameter {
            ScanParameter::L => from >= 0.0 && to <= 1.0,
            ScanParameter::DeltaT => from > 0.0,
            ScanParameter::RelativeAngle => true,
        };
    if !valid {
        return Err(EngineError::InvalidRange {
            parameter: parameter.name(),
            from,
            to,
        });
    }
    (0..steps)
        .map(|i| {
            let value = if i == steps - 1 {
                to
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            };
            scan_row(&apply(config, parameter, value)?, value, lanes)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::sweep_pair;
    use crate::lhv::{ClassicModel, LocalModel, OctantModel, QmSinglet, SATURATING_L};
    use crate::types::{HiddenVariable, LocalResponse};
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn s(x: f64) -> Setting {
        Setting::new(x).unwrap()
    }

    fn w(x: f64) -> CoincidenceWindow {
        CoincidenceWindow::new(x).unwrap()
    }

    #[test]
    fn classic_equal_settings_exact() {
        let est = run_pair(
            &ClassicModel,
            s(0.7),
            s(0.7),
            w(1.5),
            100_000,
            RunSeed::new(3, 0),
            0,
            Lanes::SERIAL,
        )
        .unwrap();
        assert_eq!(est.e_conditional, Some(1.0));
        assert_eq!(est.gamma_hat, 1.0);
        assert_eq!(est.std_error, Some(0.0));
    }

    #[test]
    fn zero_trials_rejected() {
        assert_eq!(
            run_pair(
                &ClassicModel,
                s(0.0),
                s(0.0),
                w(1.5),
                0,
                RunSeed::new(3, 0),
                0,
                Lanes::SERIAL
            ),
            Err(EngineError::NoTrials)
        );
    }

    struct NeverCoincident;

    impl LocalModel for NeverCoincident {
        fn respond(&self, _: HiddenVariable, setting: Setting) -> LocalResponse {
            LocalResponse::new(Outcome::Plus, setting.angle() * 100.0).unwrap()
        }
    }

    #[test]
    fn no_coincidence_is_flagged_not_zero() {
        let est = run_pair(
            &NeverCoincident,
            s(0.0),
            s(1.0),
            w(1.5),
            1000,
            RunSeed::new(3, 0),
            0,
            Lanes::SERIAL,
        )
        .unwrap();
        assert_eq!(est.n_coincident, 0);
        assert_eq!(est.e_conditional, None);
        assert_eq!(est.std_error, None);
        let chsh = ChshEstimate::from_pairs([est; 4]);
        assert_eq!(chsh.s_value, None);
        assert_eq!(chsh.gamma_bound, None);
    }

    #[test]
    fn saturating_pair_matches_targets() {
        let est = run_pair(
            &OctantModel::saturating(),
            s(0.0),
            s(FRAC_PI_4),
            w(1.5),
            1_000_000,
            RunSeed::new(2024, 0),
            0,
            Lanes::new(4),
        )
        .unwrap();
        let e = est.e_conditional.unwrap();
        assert!((e - 1.0 / SQRT_2).abs() <= 4.0 * est.std_error.unwrap(), "e={e}");
        assert!((est.gamma_hat - (3.0 - 3.0 / SQRT_2)).abs() <= 4.0 * est.gamma_std_error);
    }

    #[test]
    fn narrow_window_matches_sweep() {
        let m = OctantModel::new(0.0).unwrap();
        let exact = sweep_pair(&m.piecewise().unwrap(), s(0.0), s(FRAC_PI_4), w(0.5));
        let est = run_pair(
            &m,
            s(0.0),
            s(FRAC_PI_4),
            w(0.5),
            200_000,
            RunSeed::new(8, 1),
            0,
            Lanes::SERIAL,
        )
        .unwrap();
        assert!((est.gamma_hat - exact.p_coincidence).abs() <= 4.0 * est.gamma_std_error);
    }

    #[test]
    fn lanes_do_not_change_results() {
        let cfg = ExperimentConfig::standard(50_000, RunSeed::new(17, 4));
        let one = run_chsh(&cfg, Lanes::SERIAL).unwrap();
        for lanes in [2, 3, 8] {
            assert_eq!(run_chsh(&cfg, Lanes::new(lanes)).unwrap(), one);
        }
        let pair = run_pair(
            &OctantModel::saturating(),
            s(0.0),
            s(FRAC_PI_4),
            w(1.5),
            50_000,
            cfg.seed,
            0,
            Lanes::new(5),
        )
        .unwrap();
        assert_eq!(pair, one.pairs[0]);
    }

    #[test]
    fn window_monotone_on_same_trials() {
        let m = OctantModel::new(0.2).unwrap();
        let mut last = 0.0;
        for dt in [0.25, 0.5, 1.0, 1.5, 2.0, 2.5] {
            let est = run_pair(
                &m,
                s(0.0),
                s(3.0 * FRAC_PI_4),
                w(dt),
                20_000,
                RunSeed::new(5, 5),
                1,
                Lanes::SERIAL,
            )
            .unwrap();
            assert!(est.gamma_hat >= last);
            last = est.gamma_hat;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn left_marginal_ignores_right_setting() {
        let m = OctantModel::saturating();
        let n = 200_000;
        let x = run_pair(
            &m,
            s(0.0),
            s(FRAC_PI_4),
            w(1.5),
            n,
            RunSeed::new(1, 0),
            0,
            Lanes::SERIAL,
        )
        .unwrap();
        let y = run_pair(
            &m,
            s(0.0),
            s(-FRAC_PI_4),
            w(1.5),
            n,
            RunSeed::new(1, 0),
            1,
            Lanes::SERIAL,
        )
        .unwrap();
        let se = (0.5 / n as f64).sqrt();
        assert!((x.left_plus_fraction - y.left_plus_fraction).abs() <= 4.0 * se);
    }

    #[test]
    fn classic_and_qm_chsh() {
        let mut cfg = ExperimentConfig::standard(200_000, RunSeed::new(77, 0));
        cfg.model = ModelSpec::Classic;
        let est = run_chsh(&cfg, Lanes::new(4)).unwrap();
        assert!((est.s_value.unwrap() - 2.0).abs() <= 4.0 * est.s_std_error.unwrap());
        assert_eq!(est.gamma_min, 1.0);

        cfg.model = ModelSpec::Qm;
        let est = run_chsh(&cfg, Lanes::new(4)).unwrap();
        assert!((est.s_value.unwrap() - 2.0 * SQRT_2).abs() <= 4.0 * est.s_std_error.unwrap());
        let _ = QmSinglet;
    }

    #[test]
    fn scan_band_rows() {
        let cfg = ExperimentConfig::standard(1, RunSeed::new(0, 0));
        let rows = scan(&cfg, ScanParameter::L, 0.0, 1.0, 5, Lanes::SERIAL).unwrap();
        assert_eq!(rows.len(), 5);
        let last = rows[4];
        assert_eq!(last.value, 1.0);
        assert!((last.gamma - 1.0).abs() < 1e-12);
        assert!((last.s.unwrap() - 2.0).abs() < 1e-12);
        for r in &rows {
            assert_eq!(r.method, Method::Exact);
            // the octant model sits on the bound for every band height
            assert!(r.margin.unwrap().abs() < 1e-12);
        }
        let sat = scan(&cfg, ScanParameter::L, SATURATING_L, 1.0, 2, Lanes::SERIAL).unwrap()[0];
        assert!((sat.s.unwrap() - 2.0 * SQRT_2).abs() < 1e-12);
        assert!((sat.bound_6g4.unwrap() - sat.s.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn scan_window_rows() {
        let cfg = ExperimentConfig::standard(1, RunSeed::new(0, 0));
        let rows = scan(&cfg, ScanParameter::DeltaT, 0.5, 2.5, 3, Lanes::SERIAL).unwrap();
        assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![0.5, 1.5, 2.5]);
        assert!((rows[2].gamma - 1.0).abs() < 1e-12);
        assert!(rows.windows(2).all(|p| p[0].gamma <= p[1].gamma + 1e-12));
    }

    #[test]
    fn scan_relative_angle_standard_point() {
        let cfg = ExperimentConfig::standard(1, RunSeed::new(0, 0));
        let rows = scan(
            &cfg,
            ScanParameter::RelativeAngle,
            0.0,
            2.0 * FRAC_PI_4,
            3,
            Lanes::SERIAL,
        )
        .unwrap();
        assert!((rows[1].s.unwrap() - 2.0 * SQRT_2).abs() < 1e-12);
        assert!((rows[0].s.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scan_rejects_bad_input() {
        let cfg = ExperimentConfig::standard(1, RunSeed::new(0, 0));
        assert!(matches!(
            scan(&cfg, ScanParameter::L, 0.0, 1.0, 1, Lanes::SERIAL),
            Err(EngineError::TooFewSteps(1))
        ));
        assert!(matches!(
            scan(&cfg, ScanParameter::L, 0.0, 1.5, 3, Lanes::SERIAL),
            Err(EngineError::InvalidRange { .. })
        ));
        assert!(matches!(
            scan(&cfg, ScanParameter::DeltaT, 0.0, 1.0, 3, Lanes::SERIAL),
            Err(EngineError::InvalidRange { .. })
        ));
        assert!(matches!(
            scan(&cfg, ScanParameter::L, 1.0, 0.0, 3, Lanes::SERIAL),
            Err(EngineError::InvalidRange { .. })
        ));
        let mut classic = cfg;
        classic.model = ModelSpec::Classic;
        assert_eq!(
            scan(&classic, ScanParameter::L, 0.0, 1.0, 3, Lanes::SERIAL),
            Err(EngineError::NotOctant)
        );
    }
}
