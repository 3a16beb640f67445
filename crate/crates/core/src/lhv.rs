//! Local response models.
//!
//! A [`LocalModel`] maps the shared hidden variable and the *local* setting to an
//! outcome and a detection time. The remote setting is not a parameter, so
//! locality holds by construction; only the coincidence test couples the wings.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::PiecewiseResponse;
use crate::rng::TrialRng;
use crate::types::{canonicalize_angle, HiddenVariable, LocalResponse, Outcome, Setting};

/// Band height at which the octant model's correlations reach 1/√2.
pub const SATURATING_L: f64 = 3.0 * (3.0 - 2.0 * SQRT_2);

/// Detection times of the octant pattern outside the band, indexed by octant.
pub const OCTANT_TIMES: [f64; 8] = [1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, -1.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("l out of [0,1]: {0}")]
    BandOutOfRange(f64),
}

pub trait LocalModel: Send + Sync {
    fn respond(&self, lambda: HiddenVariable, setting: Setting) -> LocalResponse;

    /// The model as an exact piecewise-constant pattern, if it is one.
    fn piecewise(&self) -> Option<PiecewiseResponse> {
        None
    }
}

/// Relative position of λ in the pattern shifted by `setting`.
fn relative_angle(lambda: HiddenVariable, setting: Setting) -> f64 {
    // both operands are finite
    canonicalize_angle(lambda.theta() - setting.angle()).unwrap_or(0.0)
}

/// The rectangle model with eight angular octants and a time-0 band of height `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OctantModel {
    l: f64,
}

impl OctantModel {
    pub fn new(l: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&l) {
            return Err(ModelError::BandOutOfRange(l));
        }
        Ok(OctantModel { l })
    }

    pub fn saturating() -> Self {
        OctantModel { l: SATURATING_L }
    }

    pub fn l(&self) -> f64 {
        self.l
    }
}

pub fn octant_index(phi: f64) -> usize {
    ((phi / FRAC_PI_4).floor() as usize).min(7)
}

impl LocalModel for OctantModel {
    fn respond(&self, lambda: HiddenVariable, setting: Setting) -> LocalResponse {
        let k = octant_index(relative_angle(lambda, setting));
        let outcome = if k < 4 { Outcome::Plus } else { Outcome::Minus };
        let time = if lambda.r() < self.l { 0.0 } else { OCTANT_TIMES[k] };
        LocalResponse::at(outcome, time)
    }

    fn piecewise(&self) -> Option<PiecewiseResponse> {
        let breakpoints = (0..8).map(|k| k as f64 * FRAC_PI_4).collect();
        let main = (0..8)
            .map(|k| {
                let outcome = if k < 4 { Outcome::Plus } else { Outcome::Minus };
                LocalResponse::at(outcome, OCTANT_TIMES[k])
            })
            .collect();
        PiecewiseResponse::new(breakpoints, main, self.l).ok()
    }
}

/// Deterministic half-plane model: +1 on `[0, π)` relative to the setting, all times zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassicModel;

impl LocalModel for ClassicModel {
    fn respond(&self, lambda: HiddenVariable, setting: Setting) -> LocalResponse {
        let outcome = if relative_angle(lambda, setting) < PI {
            Outcome::Plus
        } else {
            Outcome::Minus
        };
        LocalResponse::at(outcome, 0.0)
    }

    fn piecewise(&self) -> Option<PiecewiseResponse> {
        PiecewiseResponse::new(
            vec![0.0, PI],
            vec![
                LocalResponse::at(Outcome::Plus, 0.0),
                LocalResponse::at(Outcome::Minus, 0.0),
            ],
            0.0,
        )
        .ok()
    }
}

/// Singlet-like reference statistics with `E(product) = cos(a - c)`. Not a local model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QmSinglet;

pub fn qm_correlation(a: Setting, c: Setting) -> f64 {
    (a.angle() - c.angle()).cos()
}

/// Joint ±1 outcomes with uniform marginals and `P(equal) = (1 + cos(a - c)) / 2`.
pub fn qm_singlet_sample(a: Setting, c: Setting, rng: &mut TrialRng) -> (Outcome, Outcome) {
    let left = if rng.uniform() < 0.5 {
        Outcome::Plus
    } else {
        Outcome::Minus
    };
    let p_equal = 0.5 * (1.0 + qm_correlation(a, c));
    let right = if rng.uniform() < p_equal { left } else { left.flipped() };
    (left, right)
}

/// Anything that can produce both wings of one trial from a trial's random source.
pub trait PairSampler: Send + Sync {
    fn sample_pair(&self, left: Setting, right: Setting, rng: &mut TrialRng) -> (LocalResponse, LocalResponse);
}

impl<M: LocalModel> PairSampler for M {
    fn sample_pair(&self, left: Setting, right: Setting, rng: &mut TrialRng) -> (LocalResponse, LocalResponse) {
        let lambda = HiddenVariable::from_unit(rng.uniform(), rng.uniform());
        (self.respond(lambda, left), self.respond(lambda, right))
    }
}

impl PairSampler for QmSinglet {
    fn sample_pair(&self, left: Setting, right: Setting, rng: &mut TrialRng) -> (LocalResponse, LocalResponse) {
        let (x, y) = qm_singlet_sample(left, right, rng);
        (LocalResponse::at(x, 0.0), LocalResponse::at(y, 0.0))
    }
}

/// Model selection as it appears in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Octant { l: f64 },
    Classic,
    Qm,
}

impl ModelSpec {
    pub fn build(self) -> Result<Model, ModelError> {
        Ok(match self {
            ModelSpec::Octant { l } => Model::Octant(OctantModel::new(l)?),
            ModelSpec::Classic => Model::Classic(ClassicModel),
            ModelSpec::Qm => Model::Qm(QmSinglet),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Octant { .. } => "octant",
            ModelSpec::Classic => "classic",
            ModelSpec::Qm => "qm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Octant(OctantModel),
    Classic(ClassicModel),
    Qm(QmSinglet),
}

impl Model {
    pub fn piecewise(&self) -> Option<PiecewiseResponse> {
        match self {
            Model::Octant(m) => m.piecewise(),
            Model::Classic(m) => m.piecewise(),
            Model::Qm(_) => None,
        }
    }
}

impl PairSampler for Model {
    fn sample_pair(&self, left: Setting, right: Setting, rng: &mut TrialRng) -> (LocalResponse, LocalResponse) {
        match self {
            Model::Octant(m) => m.sample_pair(left, right, rng),
            Model::Classic(m) => m.sample_pair(left, right, rng),
            Model::Qm(m) => m.sample_pair(left, right, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{trial_rng, RunSeed};
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn hv(theta: f64, r: f64) -> HiddenVariable {
        HiddenVariable::new(theta, r).unwrap()
    }

    fn setting(x: f64) -> Setting {
        Setting::new(x).unwrap()
    }

    #[test]
    fn octant_examples() {
        let m = OctantModel::new(0.5).unwrap();
        let r = m.respond(hv(PI / 8.0, 0.9), setting(0.0));
        assert_eq!((r.outcome, r.time), (Outcome::Plus, 1.0));
        let r = m.respond(hv(PI / 8.0, 0.1), setting(0.0));
        assert_eq!((r.outcome, r.time), (Outcome::Plus, 0.0));
        let r = m.respond(hv(PI / 8.0 + PI / 4.0, 0.9), setting(PI / 4.0));
        assert_eq!((r.outcome, r.time), (Outcome::Plus, 1.0));
    }

    #[test]
    fn octant_rejects_bad_band() {
        assert!(OctantModel::new(1.5).is_err());
        assert!(OctantModel::new(-0.01).is_err());
        assert!(OctantModel::new(f64::NAN).is_err());
        assert_eq!(OctantModel::new(1.5).unwrap_err().to_string(), "l out of [0,1]: 1.5");
    }

    #[test]
    fn saturating_band_value() {
        assert!((SATURATING_L - 0.5147).abs() < 1e-4);
        let e = (3.0 - SATURATING_L) / (3.0 + SATURATING_L);
        assert!((e - 1.0 / SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn classic_examples() {
        let m = ClassicModel;
        let r = m.respond(hv(0.1, 0.7), setting(0.0));
        assert_eq!((r.outcome, r.time), (Outcome::Plus, 0.0));
        let r = m.respond(hv(PI + 0.1, 0.2), setting(0.0));
        assert_eq!((r.outcome, r.time), (Outcome::Minus, 0.0));
    }

    #[test]
    fn piecewise_matches_direct_response() {
        let models: [&dyn LocalModel; 2] = [&OctantModel::new(0.3).unwrap(), &ClassicModel];
        for m in models {
            let pw = m.piecewise().unwrap();
            for i in 0..1000 {
                let theta = (i as f64 + 0.5) * TAU / 1000.0;
                for r in [0.1, 0.9] {
                    let s = setting(1.234);
                    let direct = m.respond(hv(theta, r), s);
                    let lookup = pw.respond(theta - s.angle(), r < pw.band());
                    assert_eq!(direct, lookup);
                }
            }
        }
    }

    #[test]
    fn qm_sampler_correlations() {
        let seed = RunSeed::new(5, 0);
        for (delta, expect) in [(0.0, 1.0), (PI / 4.0, 1.0 / SQRT_2), (3.0 * PI / 4.0, -1.0 / SQRT_2)] {
            assert!((qm_correlation(setting(delta), setting(0.0)) - expect).abs() < 1e-12);
            let n = 1_000_000u64;
            let (mut prod, mut plus) = (0i64, 0i64);
            for i in 0..n {
                let mut rng = trial_rng(seed, i);
                let (x, y) = qm_singlet_sample(setting(delta), setting(0.0), &mut rng);
                prod += (x.value() * y.value()) as i64;
                plus += (x == Outcome::Plus) as i64;
            }
            let e = prod as f64 / n as f64;
            let se = ((1.0 - expect * expect) / n as f64).sqrt().max(1e-12);
            assert!((e - expect).abs() <= 4.0 * se, "delta={delta} e={e}");
            let p = plus as f64 / n as f64;
            assert!((p - 0.5).abs() <= 4.0 * (0.25 / n as f64).sqrt());
        }
    }

    #[test]
    fn marginals_are_half() {
        let seed = RunSeed::new(99, 0);
        let n = 200_000u64;
        let models: [&dyn LocalModel; 2] = [&OctantModel::saturating(), &ClassicModel];
        for m in models {
            for s in [0.0, PI / 2.0, PI / 4.0, -PI / 4.0, 1.0] {
                let plus = (0..n)
                    .filter(|&i| {
                        let mut rng = trial_rng(seed, i);
                        let lambda = HiddenVariable::from_unit(rng.uniform(), rng.uniform());
                        m.respond(lambda, setting(s)).outcome == Outcome::Plus
                    })
                    .count();
                let p = plus as f64 / n as f64;
                assert!((p - 0.5).abs() <= 4.0 * (0.25 / n as f64).sqrt(), "p={p}");
            }
        }
    }

    proptest! {
        #[test]
        fn octant_shift_covariant(theta in 0.0f64..TAU, r in 0.0f64..1.0, s in -10.0f64..10.0, base in 0.0f64..TAU, l in 0.0f64..=1.0) {
            let m = OctantModel::new(l).unwrap();
            let lambda = hv(theta, r);
            let shifted = hv(canonicalize_angle(theta + s).unwrap(), r);
            let a = m.respond(lambda, setting(base));
            let b = m.respond(shifted, setting(base + s));
            // octant boundaries are measure zero; skip points within rounding of them
            let phi = canonicalize_angle(theta - base).unwrap();
            let frac = (phi / FRAC_PI_4).fract();
            prop_assume!(frac > 1e-9 && frac < 1.0 - 1e-9);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn equal_settings_fully_correlated(theta in 0.0f64..TAU, r in 0.0f64..1.0, s in 0.0f64..TAU, l in 0.0f64..=1.0) {
            let m = OctantModel::new(l).unwrap();
            let lambda = hv(theta, r);
            let x = m.respond(lambda, setting(s));
            let y = m.respond(lambda, setting(s));
            prop_assert_eq!(x.outcome.value() * y.outcome.value(), 1);
            prop_assert_eq!(x.time - y.time, 0.0);
            let cx = ClassicModel.respond(lambda, setting(s));
            prop_assert_eq!(cx.outcome.value() * ClassicModel.respond(lambda, setting(s)).outcome.value(), 1);
        }

        #[test]
        fn octant_time_values(theta in 0.0f64..TAU, r in 0.0f64..1.0, a in 0.0f64..TAU, c in 0.0f64..TAU, l in 0.0f64..=1.0) {
            let m = OctantModel::new(l).unwrap();
            let lambda = hv(theta, r);
            let x = m.respond(lambda, setting(a));
            let y = m.respond(lambda, setting(c));
            prop_assert!([-1.0, 0.0, 1.0].contains(&x.time));
            prop_assert!([0.0, 1.0, 2.0].contains(&(x.time - y.time).abs()));
        }
    }
}
