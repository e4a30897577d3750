//! SOC estimators over the `[soc, up]` Thevenin state.
//!
//! All four variants share the time update and linearized output model and
//! differ only in the measurement update and in whether the noise
//! covariances are re-estimated from the voltage residual window:
//!
//! | kind      | measurement update | noise adaptation            |
//! |-----------|--------------------|-----------------------------|
//! | `Ekf`     | Kalman             | none                        |
//! | `Hiekf`   | H-infinity         | none                        |
//! | `Ahiekf`  | H-infinity         | residual matching           |
//! | `Iahiekf` | H-infinity         | residual matching, weighted |

mod adapt;
mod update;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, RowVector2, Vector2};
use thiserror::Error;

use crate::model::{BatterySpec, OcvCurve, TheveninParams};

pub use adapt::{ahiekf_adapt, d_factor, iahiekf_adapt, window_mean, AdaptOutcome, RX_FLOOR};
pub use update::{ekf_update, hinf_update, innovate, predict, Innovation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("innovation variance {0} is not positive")]
    SingularInnovation(f64),
    #[error("H-infinity Riccati update failed: {0}")]
    RiccatiBlowup(&'static str),
    #[error("residual window is empty")]
    EmptyWindow,
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown filter kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    Ekf,
    Hiekf,
    Ahiekf,
    Iahiekf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [
        FilterKind::Ekf,
        FilterKind::Hiekf,
        FilterKind::Ahiekf,
        FilterKind::Iahiekf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Ekf => "ekf",
            FilterKind::Hiekf => "hiekf",
            FilterKind::Ahiekf => "ahiekf",
            FilterKind::Iahiekf => "iahiekf",
        }
    }

    /// Display label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            FilterKind::Ekf => "EKF",
            FilterKind::Hiekf => "HIEKF",
            FilterKind::Ahiekf => "AHIEKF",
            FilterKind::Iahiekf => "IAHIEKF",
        }
    }

    pub fn uses_hinf(self) -> bool {
        !matches!(self, FilterKind::Ekf)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, FilterKind::Ahiekf | FilterKind::Iahiekf)
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ekf" => Ok(FilterKind::Ekf),
            "hiekf" => Ok(FilterKind::Hiekf),
            "ahiekf" => Ok(FilterKind::Ahiekf),
            "iahiekf" => Ok(FilterKind::Iahiekf),
            _ => Err(FilterError::UnknownKind(s.to_string())),
        }
    }
}

fn is_symmetric(m: &Matrix2<f64>) -> bool {
    (m[(0, 1)] - m[(1, 0)]).abs() <= 1e-12 * m.amax().max(1.0)
}

fn is_spd(m: &Matrix2<f64>) -> bool {
    is_symmetric(m) && m[(0, 0)] > 0.0 && m.determinant() > 0.0
}

fn is_psd(m: &Matrix2<f64>) -> bool {
    let tol = 1e-15 * m.amax().max(1.0);
    is_symmetric(m) && m[(0, 0)] >= -tol && m[(1, 1)] >= -tol && m.determinant() >= -tol
}

pub(crate) fn symmetrize(m: Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

/// Process/measurement noise and the initial error covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub qx: Matrix2<f64>,
    pub rx: f64,
    pub p0: Matrix2<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            qx: Matrix2::new(1e-5, 0.0, 0.0, 1e-5),
            rx: 0.8,
            p0: Matrix2::new(0.035, 0.0, 0.0, 0.25),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if !is_psd(&self.qx) {
            return Err(FilterError::InvalidConfig(
                "qx must be symmetric positive semidefinite",
            ));
        }
        if !(self.rx.is_finite() && self.rx > 0.0) {
            return Err(FilterError::InvalidConfig("rx must be positive"));
        }
        if !is_spd(&self.p0) {
            return Err(FilterError::InvalidConfig(
                "p0 must be symmetric positive definite",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfConfig {
    pub sx: Matrix2<f64>,
    pub lx: Matrix2<f64>,
    pub gamma: f64,
}

impl Default for HinfConfig {
    fn default() -> Self {
        Self {
            sx: Matrix2::new(0.9, 0.0, 0.0, 0.1),
            lx: Matrix2::identity(),
            gamma: 0.005,
        }
    }
}

impl HinfConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if !is_spd(&self.sx) {
            return Err(FilterError::InvalidConfig(
                "sx must be symmetric positive definite",
            ));
        }
        if !self.lx.iter().all(|v| v.is_finite()) {
            return Err(FilterError::InvalidConfig("lx must be finite"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(FilterError::InvalidConfig("gamma must be non-negative"));
        }
        Ok(())
    }

    /// `Lx * Sx * Lx'`.
    pub fn weight(&self) -> Matrix2<f64> {
        self.lx * self.sx * self.lx.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub window_len: usize,
    pub b: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            window_len: 5,
            b: 0.96,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.window_len < 1 {
            return Err(FilterError::InvalidConfig("window_len must be at least 1"));
        }
        if !(self.b > 0.9 && self.b < 1.0) {
            return Err(FilterError::InvalidConfig("b must lie in (0.9, 1)"));
        }
        Ok(())
    }
}

/// Per-filter estimate, covariance and the live noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// `[soc, up]`.
    pub x: Vector2<f64>,
    pub p: Matrix2<f64>,
    pub noise: NoiseConfig,
    pub residuals: VecDeque<f64>,
    pub window_len: usize,
    /// Number of completed steps.
    pub step_index: u64,
    /// Sticky flag, set once SOC had to be clamped into `[0, 1]`.
    pub soc_clamped: bool,
}

impl FilterState {
    pub fn new(soc0: f64, up0: f64, noise: NoiseConfig, window_len: usize) -> Self {
        Self {
            x: Vector2::new(soc0, up0),
            p: noise.p0,
            noise,
            residuals: VecDeque::with_capacity(window_len.max(1)),
            window_len: window_len.max(1),
            step_index: 0,
            soc_clamped: false,
        }
    }

    pub fn soc(&self) -> f64 {
        self.x[0]
    }

    pub fn up(&self) -> f64 {
        self.x[1]
    }

    pub(crate) fn push_residual(&mut self, r: f64) {
        if self.residuals.len() == self.window_len {
            self.residuals.pop_front();
        }
        self.residuals.push_back(r);
    }

    pub(crate) fn clamp_soc(&mut self) -> bool {
        let soc = self.x[0];
        if !(0.0..=1.0).contains(&soc) {
            self.x[0] = soc.clamp(0.0, 1.0);
            self.soc_clamped = true;
            true
        } else {
            false
        }
    }

    /// Time update only, counted as a full step. Used when a measurement
    /// update cannot be applied.
    pub fn coast(
        &self,
        params: &TheveninParams,
        spec: &BatterySpec,
        current_a: f64,
    ) -> FilterState {
        let mut next = predict(self.clone(), params, spec, current_a);
        next.step_index += 1;
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub predicted_v: f64,
    pub residual_v: f64,
    pub gain: [f64; 2],
    /// Trace of the process-noise covariance in effect after this step.
    pub qx_trace: f64,
    /// Measurement-noise variance in effect after this step.
    pub rx: f64,
    /// `h * P(k|k-1) * h'`.
    pub hph: f64,
    pub negative_rx: bool,
    pub soc_clamped: bool,
}

/// Everything besides the state a filter step needs.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub params: &'a TheveninParams,
    pub spec: &'a BatterySpec,
    pub curve: &'a OcvCurve,
    pub hinf: &'a HinfConfig,
    pub adaptive: &'a AdaptiveConfig,
}

/// One full predict/update cycle for `kind`. Adaptive variants re-estimate
/// `qx`/`rx` from this step's gain after the update; the new values apply
/// from the next step on.
pub fn filter_step(
    kind: FilterKind,
    fs: &FilterState,
    ctx: &StepContext<'_>,
    current_a: f64,
    measured_v: f64,
) -> Result<(FilterState, f64, StepDiagnostics), FilterError> {
    let predicted = predict(fs.clone(), ctx.params, ctx.spec, current_a);
    let p_pred = predicted.p;
    let innov = innovate(&predicted, ctx.params, ctx.curve, current_a, measured_v);
    let (mut next, gain) = if kind.uses_hinf() {
        hinf_update(predicted, &innov, ctx.hinf)?
    } else {
        ekf_update(predicted, &innov)?
    };
    next.step_index += 1;
    let hph = (innov.h * p_pred * innov.h.transpose())[(0, 0)];

    let mut negative_rx = false;
    if kind.is_adaptive() {
        next.push_residual(innov.residual);
        let m = window_mean(&next.residuals)?;
        let out = match kind {
            FilterKind::Ahiekf => ahiekf_adapt(&gain, &innov.h, &p_pred, m),
            _ => iahiekf_adapt(&gain, &innov.h, &p_pred, m, next.step_index, ctx.adaptive.b),
        };
        negative_rx = out.negative_rx;
        next.noise.qx = out.qx;
        next.noise.rx = out.rx;
    }
    let clamped = next.clamp_soc();

    let diag = StepDiagnostics {
        predicted_v: innov.predicted_v,
        residual_v: innov.residual,
        gain: [gain[0], gain[1]],
        qx_trace: next.noise.qx.trace(),
        rx: next.noise.rx,
        hph,
        negative_rx,
        soc_clamped: clamped,
    };
    let soc = next.soc();
    Ok((next, soc, diag))
}

/// Row Jacobian of the terminal voltage w.r.t. `[soc, up]`.
pub fn output_jacobian(curve: &OcvCurve, soc: f64) -> RowVector2<f64> {
    RowVector2::new(curve.slope(soc), -1.0)
}
