//! Run reports (JSON) and plot-ready tables (CSV).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigFile, SCHEMA_VERSION};
use crate::engine::{ChshEstimate, ExperimentConfig, PairEstimate, ScanRow};
use crate::exact::{sweep_common_part, CommonPart, ExactError, PairStatistics};
use crate::inequality::{eval_finite, DeltaGammaReport, FiniteModel, SuiteReport};
use crate::lhv::Model;
use crate::PAIR_LABELS;

/// Number of standard errors within which a Monte Carlo S counts as equal to a bound.
pub const MC_SIGMAS: f64 = 4.0;
/// Slack for exact comparisons.
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    /// S exceeds 2 by more than `tolerance`.
    pub violates_classic_bound: bool,
    /// S exceeds 6/γ − 4 by more than `tolerance`.
    pub exceeds_gamma_bound: bool,
    /// |S − (6/γ − 4)| ≤ `tolerance`.
    pub saturates_gamma_bound: bool,
    pub tolerance: f64,
}

impl Verdicts {
    pub fn new(s: f64, gamma_bound: f64, tolerance: f64) -> Self {
        Verdicts {
            violates_classic_bound: s > 2.0 + tolerance,
            exceeds_gamma_bound: s > gamma_bound + tolerance,
            saturates_gamma_bound: (s - gamma_bound).abs() <= tolerance,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair: String,
    pub left_setting: f64,
    pub right_setting: f64,
    pub estimate: PairEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<PairStatistics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshSummary {
    pub s_value: Option<f64>,
    pub s_std_error: Option<f64>,
    pub gamma_min: f64,
    pub classic_bound: f64,
    pub gamma_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSection {
    pub common_part: CommonPart,
    pub delta_gamma: DeltaGammaReport,
    pub verdicts: Verdicts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub stream: u64,
    pub version: String,
    /// Seconds since the Unix epoch; omitted in canonical reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ConfigFile,
    pub pairs: Vec<PairReport>,
    pub chsh: ChshSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Verdicts>,
    pub provenance: Provenance,
}

/// Exact analysis of a piecewise-constant model, `None` for other models.
pub fn exact_section(config: &ExperimentConfig, model: &Model) -> Result<Option<ExactSection>, ExactError> {
    let Some(pw) = model.piecewise() else {
        return Ok(None);
    };
    let common_part = sweep_common_part(&pw, &config.settings, config.window)?;
    let finite = FiniteModel::from_refinement(&crate::exact::common_refinement(&pw, &config.settings, config.window))
        .map_err(|_| ExactError::Empty)?;
    let delta_gamma = eval_finite(&finite).map_err(|_| ExactError::NoCoincidence { pair: "?" })?;
    let verdicts = Verdicts::new(common_part.s_value, common_part.bound_gamma(), EXACT_TOL);
    Ok(Some(ExactSection {
        common_part,
        delta_gamma,
        verdicts,
    }))
}

impl RunReport {
    pub fn new(
        config: &ExperimentConfig,
        estimate: &ChshEstimate,
        exact: Option<ExactSection>,
        canonical: bool,
    ) -> Self {
        let pairs = (0..4)
            .map(|i| {
                let (a, c) = config.settings.pair(i);
                PairReport {
                    pair: PAIR_LABELS[i].to_string(),
                    left_setting: a.angle(),
                    right_setting: c.angle(),
                    estimate: estimate.pairs[i],
                    exact: exact.as_ref().map(|e| e.common_part.pairs[i]),
                }
            })
            .collect();
        let verdicts = estimate
            .s_value
            .zip(estimate.gamma_bound)
            .map(|(s, b)| Verdicts::new(s, b, MC_SIGMAS * estimate.s_std_error.unwrap_or(0.0)));
        let timestamp = (!canonical).then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        });
        RunReport {
            schema_version: SCHEMA_VERSION,
            config: ConfigFile::from(config),
            pairs,
            chsh: ChshSummary {
                s_value: estimate.s_value,
                s_std_error: estimate.s_std_error,
                gamma_min: estimate.gamma_min,
                classic_bound: estimate.classic_bound,
                gamma_bound: estimate.gamma_bound,
            },
            exact,
            verdicts,
            provenance: Provenance {
                seed: config.seed.seed,
                stream: config.seed.stream,
                version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Shortest round-trip form; exponent notation for tiny magnitudes.
fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

/// Columns: pair, left_setting, right_setting, n_total, n_coincident, gamma_hat,
/// gamma_std_error, e_conditional, std_error, exact_gamma, exact_e.
pub fn write_pairs_csv<W: Write>(report: &RunReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "pair",
        "left_setting",
        "right_setting",
        "n_total",
        "n_coincident",
        "gamma_hat",
        "gamma_std_error",
        "e_conditional",
        "std_error",
        "exact_gamma",
        "exact_e",
    ])?;
    for p in &report.pairs {
        let e = &p.estimate;
        w.write_record([
            p.pair.clone(),
            num(p.left_setting),
            num(p.right_setting),
            e.n_total.to_string(),
            e.n_coincident.to_string(),
            num(e.gamma_hat),
            num(e.gamma_std_error),
            opt(e.e_conditional),
            opt(e.std_error),
            opt(p.exact.map(|x| x.p_coincidence)),
            opt(p.exact.and_then(|x| x.conditional_correlation)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: value, gamma, S, bound_6g4, margin. Rows keep the scan order (ascending value).
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "gamma", "S", "bound_6g4", "margin"])?;
    for r in rows {
        w.write_record([num(r.value), num(r.gamma), opt(r.s), opt(r.bound_6g4), opt(r.margin)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub suites: Vec<SuiteReport>,
}

/// Print `x` with six decimals, folding values within rounding of zero to `0.000000`.
pub fn fixed(x: f64) -> String {
    let x = if x.abs() < 5e-7 { 0.0 } else { x };
    format!("{x:.6}")
}

fn fixed10(x: f64) -> String {
    let x = if x.abs() < 5e-11 { 0.0 } else { x };
    format!("{x:.10}")
}

/// One line of the saturation table, with ten decimals.
pub fn saturation_line(mode: &str, gamma: f64, s: f64, bound: f64) -> String {
    format!(
        "{mode:<12} gamma={}  S={}  bound={}  margin={}",
        fixed10(gamma),
        fixed10(s),
        fixed10(bound),
        fixed10(bound - s)
    )
}
