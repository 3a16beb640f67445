//! Domain values shared by every module.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),
    #[error("coincidence window must be finite and > 0, got {0}")]
    InvalidWindow(f64),
    #[error("hidden variable out of range: theta={theta}, r={r}")]
    HiddenVariableOutOfRange { theta: f64, r: f64 },
    #[error("detection time must be finite, got {0}")]
    NonFiniteTime(f64),
}

/// Reduce an angle to its representative in `[0, 2π)`.
pub fn canonicalize_angle(x: f64) -> Result<f64, TypeError> {
    if !x.is_finite() {
        return Err(TypeError::NonFiniteAngle(x));
    }
    let r = x.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly TAU
    Ok(if r >= TAU { 0.0 } else { r })
}

/// A measurement setting (analyser angle), stored canonicalized.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Setting(f64);

impl Setting {
    pub fn new(angle: f64) -> Result<Self, TypeError> {
        canonicalize_angle(angle).map(Setting)
    }

    pub fn angle(self) -> f64 {
        self.0
    }

    /// The setting rotated by `shift` radians.
    pub fn rotated(self, shift: f64) -> Result<Self, TypeError> {
        Setting::new(self.0 + shift)
    }
}

impl TryFrom<f64> for Setting {
    type Error = TypeError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Setting::new(value)
    }
}

impl From<Setting> for f64 {
    fn from(s: Setting) -> f64 {
        s.0
    }
}

/// The hidden variable λ = (θ, r), a point of the rectangle `[0, 2π) × [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenVariable {
    theta: f64,
    r: f64,
}

impl HiddenVariable {
    pub fn new(theta: f64, r: f64) -> Result<Self, TypeError> {
        if !(0.0..TAU).contains(&theta) || !(0.0..1.0).contains(&r) {
            return Err(TypeError::HiddenVariableOutOfRange { theta, r });
        }
        Ok(HiddenVariable { theta, r })
    }

    /// Map two uniform deviates in `[0, 1)` onto the rectangle.
    pub fn from_unit(u_theta: f64, u_r: f64) -> Self {
        let theta = u_theta * TAU;
        HiddenVariable {
            theta: if theta >= TAU { 0.0 } else { theta },
            r: u_r,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "-1")]
    Minus,
    #[serde(rename = "+1")]
    Plus,
}

impl Outcome {
    pub fn value(self) -> i8 {
        match self {
            Outcome::Minus => -1,
            Outcome::Plus => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Minus => Outcome::Plus,
            Outcome::Plus => Outcome::Minus,
        }
    }
}

/// One wing's result for one trial: a ±1 outcome and a detection time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalResponse {
    pub outcome: Outcome,
    pub time: f64,
}

impl LocalResponse {
    pub fn new(outcome: Outcome, time: f64) -> Result<Self, TypeError> {
        if !time.is_finite() {
            return Err(TypeError::NonFiniteTime(time));
        }
        Ok(LocalResponse { outcome, time })
    }

    pub(crate) const fn at(outcome: Outcome, time: f64) -> Self {
        LocalResponse { outcome, time }
    }
}

/// The window ΔT within which two detections count as one pair.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CoincidenceWindow(f64);

impl CoincidenceWindow {
    pub fn new(delta_t: f64) -> Result<Self, TypeError> {
        if !delta_t.is_finite() || delta_t <= 0.0 {
            return Err(TypeError::InvalidWindow(delta_t));
        }
        Ok(CoincidenceWindow(delta_t))
    }

    pub fn delta_t(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for CoincidenceWindow {
    type Error = TypeError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        CoincidenceWindow::new(value)
    }
}

impl From<CoincidenceWindow> for f64 {
    fn from(w: CoincidenceWindow) -> f64 {
        w.0
    }
}

/// Strict `|t - t'| < ΔT`.
pub fn is_coincident(left_time: f64, right_time: f64, window: CoincidenceWindow) -> bool {
    (left_time - right_time).abs() < window.0
}

/// Both wings of one trial under one setting pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub settings: (Setting, Setting),
    pub left: LocalResponse,
    pub right: LocalResponse,
    pub coincident: bool,
}

impl TrialRecord {
    pub fn new(
        settings: (Setting, Setting),
        left: LocalResponse,
        right: LocalResponse,
        window: CoincidenceWindow,
    ) -> Self {
        TrialRecord {
            settings,
            left,
            right,
            coincident: is_coincident(left.time, right.time, window),
        }
    }

    /// Product of the two outcomes, ±1.
    pub fn product(&self) -> i8 {
        self.left.outcome.value() * self.right.outcome.value()
    }
}

/// The four analyser settings a, b (left) and c, d (right) of a CHSH run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshSettings {
    pub a: Setting,
    pub b: Setting,
    pub c: Setting,
    pub d: Setting,
}

impl ChshSettings {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, TypeError> {
        Ok(ChshSettings {
            a: Setting::new(a)?,
            b: Setting::new(b)?,
            c: Setting::new(c)?,
            d: Setting::new(d)?,
        })
    }

    /// a = 0, b = π/2, c = π/4, d = −π/4.
    pub fn standard() -> Self {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
        // all finite
        ChshSettings::new(0.0, FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4).unwrap()
    }

    /// The family a = 0, b = 2x, c = x, d = −x; `x = π/4` gives [`ChshSettings::standard`].
    pub fn symmetric(x: f64) -> Result<Self, TypeError> {
        ChshSettings::new(0.0, 2.0 * x, x, -x)
    }

    pub fn left(&self) -> [Setting; 2] {
        [self.a, self.b]
    }

    pub fn right(&self) -> [Setting; 2] {
        [self.c, self.d]
    }

    pub fn all(&self) -> [Setting; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Settings of pair `i` in the order AC', AD', BC', BD'.
    pub fn pair(&self, i: usize) -> (Setting, Setting) {
        let (l, r) = crate::PAIR_SETTINGS[i];
        (self.left()[l], self.right()[r])
    }
}
