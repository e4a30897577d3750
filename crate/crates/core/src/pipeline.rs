//! Joint online loop: FFRLS identification of the Thevenin parameters and
//! filter-based SOC estimation advancing together, one sample at a time.
//!
//! Every filter kind owns its own identifier, so adding or removing kinds
//! from a run never changes another kind's output.

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::{
    filter_step, AdaptiveConfig, FilterError, FilterKind, FilterState, HinfConfig, NoiseConfig,
    StepContext,
};
use crate::ident::{thevenin_ident_step, FfrlsState, IdentError};
use crate::model::{
    coulomb_step, discrete_from_params, params_from_discrete, BatterySpec, ModelError, OcvCurve,
    TheveninParams,
};
use crate::sim::{MeasuredTrace, TruthTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("input trace is empty")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("reference SOC unavailable: {0}")]
    MissingReferenceSource(&'static str),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ident(#[from] IdentError),
}

impl From<ModelError> for PipelineError {
    fn from(e: ModelError) -> Self {
        PipelineError::InvalidConfig(e.to_string())
    }
}

impl From<FilterError> for PipelineError {
    fn from(e: FilterError) -> Self {
        PipelineError::InvalidConfig(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The input's `soc_ref` column.
    ProvidedColumn,
    /// Coulomb counting of the current from a known true initial SOC.
    CoulombFromTrueInit,
    /// Simulator truth (falls back to the `soc_ref` column that the
    /// simulator writes when no truth trace is at hand).
    SimTruth,
}

impl ReferenceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceMode::ProvidedColumn => "provided",
            ReferenceMode::CoulombFromTrueInit => "coulomb",
            ReferenceMode::SimTruth => "sim_truth",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kinds: Vec<FilterKind>,
    pub spec: BatterySpec,
    pub curve: OcvCurve,
    pub initial_params: TheveninParams,
    pub noise: NoiseConfig,
    pub hinf: HinfConfig,
    pub adaptive: AdaptiveConfig,
    pub ident_lambda: f64,
    pub ident_cov0: f64,
    /// `None` seeds identification with the coefficients of `initial_params`.
    pub ident_theta0: Option<[f64; 3]>,
    /// Samples (1-based) that use `initial_params` regardless of identification.
    pub ident_warmup_steps: u64,
    pub soc_init_estimator: f64,
    pub up_init_estimator: f64,
    pub reference_mode: ReferenceMode,
    /// True initial SOC for `CoulombFromTrueInit`.
    pub reference_soc_init: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kinds: FilterKind::ALL.to_vec(),
            spec: BatterySpec::default(),
            curve: OcvCurve::default(),
            initial_params: TheveninParams::default(),
            noise: NoiseConfig::default(),
            hinf: HinfConfig::default(),
            adaptive: AdaptiveConfig::default(),
            ident_lambda: 0.999,
            ident_cov0: SEEDED_COV0,
            ident_theta0: None,
            ident_warmup_steps: 10,
            soc_init_estimator: 0.8,
            up_init_estimator: 0.0,
            reference_mode: ReferenceMode::SimTruth,
            reference_soc_init: None,
        }
    }
}

/// Identification prior when it starts from the configured parameters.
pub const SEEDED_COV0: f64 = 1e-2;

impl RunConfig {
    pub fn ident_theta0(&self) -> [f64; 3] {
        self.ident_theta0.unwrap_or_else(|| {
            let c = discrete_from_params(&self.initial_params, self.spec.dt_s);
            [c.d0, c.d1, c.d2]
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.kinds.is_empty() {
            return Err(PipelineError::InvalidConfig(
                "no filter kinds selected".into(),
            ));
        }
        self.spec.validate()?;
        self.initial_params.validate()?;
        self.noise.validate()?;
        self.hinf.validate()?;
        self.adaptive.validate()?;
        if !(self.ident_lambda > 0.0 && self.ident_lambda <= 1.0) {
            return Err(PipelineError::InvalidConfig(format!(
                "ident lambda {} outside (0, 1]",
                self.ident_lambda
            )));
        }
        if !(self.ident_cov0.is_finite() && self.ident_cov0 > 0.0) {
            return Err(PipelineError::InvalidConfig(
                "ident cov0 must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.soc_init_estimator) {
            return Err(PipelineError::InvalidConfig(
                "estimator initial SOC outside [0, 1]".into(),
            ));
        }
        if let Some(s) = self.reference_soc_init {
            if !(0.0..=1.0).contains(&s) {
                return Err(PipelineError::InvalidConfig(
                    "reference initial SOC outside [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlagCounts {
    pub negative_rx: u64,
    pub nonphysical_params: u64,
    pub filter_failures: u64,
    pub ident_failures: u64,
    pub windup_events: u64,
    pub soc_clamps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub soc_est: f64,
    pub up_est: f64,
    pub residual_v: f64,
    /// Parameters the filter used at this step.
    pub params: TheveninParams,
    pub rx: f64,
    pub qx_trace: f64,
    pub hph: f64,
    pub negative_rx: bool,
}

/// One filter plus its private parameter identifier.
#[derive(Debug, Clone)]
pub struct JointEstimator {
    kind: FilterKind,
    spec: BatterySpec,
    curve: OcvCurve,
    initial_params: TheveninParams,
    hinf: HinfConfig,
    adaptive: AdaptiveConfig,
    warmup: u64,
    filter: FilterState,
    ident: FfrlsState,
    last_good: TheveninParams,
    prev: Option<(f64, f64)>,
    samples_seen: u64,
    flags: FlagCounts,
}

impl JointEstimator {
    pub fn new(kind: FilterKind, config: &RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let ident = FfrlsState::new(
            &config.ident_theta0(),
            config.ident_cov0,
            config.ident_lambda,
        )?;
        Ok(Self {
            kind,
            spec: config.spec,
            curve: config.curve,
            initial_params: config.initial_params,
            hinf: config.hinf,
            adaptive: config.adaptive,
            warmup: config.ident_warmup_steps,
            filter: FilterState::new(
                config.soc_init_estimator,
                config.up_init_estimator,
                config.noise,
                config.adaptive.window_len,
            ),
            ident,
            last_good: config.initial_params,
            prev: None,
            samples_seen: 0,
            flags: FlagCounts::default(),
        })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn flags(&self) -> FlagCounts {
        FlagCounts {
            windup_events: self.ident.windup_events,
            ..self.flags
        }
    }

    pub fn filter_state(&self) -> &FilterState {
        &self.filter
    }

    pub fn identified_params(&self) -> TheveninParams {
        self.last_good
    }

    fn identify(&mut self, current_a: f64, voltage_v: f64) {
        // Ue from this filter's previous SOC estimate and the fixed curve
        let ue = self.curve.eval(self.filter.soc()) - voltage_v;
        if let Some((i_prev, ue_prev)) = self.prev {
            match thevenin_ident_step(&self.ident, current_a, i_prev, ue, ue_prev) {
                Ok((next, coeffs)) => {
                    self.ident = next;
                    match params_from_discrete(&coeffs, self.spec.dt_s) {
                        Ok(p) => self.last_good = p,
                        Err(_) => self.flags.nonphysical_params += 1,
                    }
                }
                Err(e) => {
                    debug!("{}: identification step failed: {e}", self.kind);
                    self.flags.ident_failures += 1;
                }
            }
        }
        self.prev = Some((current_a, ue));
    }

    /// Consumes one `(current, voltage)` sample.
    pub fn step(&mut self, current_a: f64, voltage_v: f64) -> StepRecord {
        self.samples_seen += 1;
        self.identify(current_a, voltage_v);
        let params = if self.samples_seen <= self.warmup {
            self.initial_params
        } else {
            self.last_good
        };
        let ctx = StepContext {
            params: &params,
            spec: &self.spec,
            curve: &self.curve,
            hinf: &self.hinf,
            adaptive: &self.adaptive,
        };
        let was_clamped = self.filter.soc_clamped;
        let (rx, qx_trace, residual_v, hph, negative_rx) =
            match filter_step(self.kind, &self.filter, &ctx, current_a, voltage_v) {
                Ok((next, _, diag)) => {
                    self.filter = next;
                    if diag.negative_rx {
                        self.flags.negative_rx += 1;
                    }
                    if diag.soc_clamped {
                        self.flags.soc_clamps += 1;
                    }
                    (
                        diag.rx,
                        diag.qx_trace,
                        diag.residual_v,
                        diag.hph,
                        diag.negative_rx,
                    )
                }
                Err(e) => {
                    debug!("{}: measurement update failed: {e}", self.kind);
                    self.flags.filter_failures += 1;
                    self.filter = self.filter.coast(&params, &self.spec, current_a);
                    if self.filter.soc_clamped && !was_clamped {
                        self.flags.soc_clamps += 1;
                    }
                    let n = &self.filter.noise;
                    (n.rx, n.qx.trace(), f64::NAN, f64::NAN, false)
                }
            };
        StepRecord {
            soc_est: self.filter.soc(),
            up_est: self.filter.up(),
            residual_v,
            params,
            rx,
            qx_trace,
            hph,
            negative_rx,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub kind: FilterKind,
    pub steps: Vec<StepRecord>,
    pub rmse_pct: f64,
    pub mae_pct: f64,
    pub flags: FlagCounts,
}

impl FilterRun {
    pub fn soc(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.soc_est).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub time_s: Vec<f64>,
    pub reference: Vec<f64>,
    pub runs: Vec<FilterRun>,
    /// Samples whose measured voltage lies outside the cutoff band.
    pub cutoff_events: u64,
}

impl RunResult {
    pub fn run(&self, kind: FilterKind) -> Option<&FilterRun> {
        self.runs.iter().find(|r| r.kind == kind)
    }
}

/// Builds the SOC sequence that estimates are scored against.
pub fn build_reference(
    config: &RunConfig,
    samples: &MeasuredTrace,
    truth: Option<&TruthTrace>,
) -> Result<Vec<f64>, PipelineError> {
    let column = || -> Option<Vec<f64>> {
        if samples.has_reference() {
            Some(samples.samples.iter().filter_map(|s| s.soc_ref).collect())
        } else {
            None
        }
    };
    match config.reference_mode {
        ReferenceMode::SimTruth => match truth {
            Some(t) => {
                if t.len() != samples.len() {
                    return Err(PipelineError::LengthMismatch(t.len(), samples.len()));
                }
                Ok(t.soc())
            }
            None => column().ok_or(PipelineError::MissingReferenceSource(
                "simulator truth requires a truth trace or a soc_ref column",
            )),
        },
        ReferenceMode::ProvidedColumn => column().ok_or(PipelineError::MissingReferenceSource(
            "input has no complete soc_ref column",
        )),
        ReferenceMode::CoulombFromTrueInit => {
            let soc0 = config
                .reference_soc_init
                .ok_or(PipelineError::MissingReferenceSource(
                    "coulomb reference needs a true initial SOC",
                ))?;
            let currents: Vec<f64> = match truth {
                Some(t) if t.len() == samples.len() => {
                    t.samples.iter().map(|s| s.current_a).collect()
                }
                _ => samples.samples.iter().map(|s| s.current_a).collect(),
            };
            Ok(coulomb_reference(soc0, &currents, &config.spec))
        }
    }
}

/// Ampere-hour integration; entry `k` is the SOC after `currents[k]`.
pub fn coulomb_reference(soc0: f64, currents: &[f64], spec: &BatterySpec) -> Vec<f64> {
    let mut soc = soc0;
    currents
        .iter()
        .map(|&i| {
            soc = coulomb_step(soc, i, spec).soc;
            soc
        })
        .collect()
}

fn check_lengths(est: &[f64], reference: &[f64]) -> Result<(), PipelineError> {
    if est.len() != reference.len() {
        return Err(PipelineError::LengthMismatch(est.len(), reference.len()));
    }
    if est.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    Ok(())
}

/// `100 * sqrt(mean((est - ref)^2))`.
pub fn rmse_pct(est: &[f64], reference: &[f64]) -> Result<f64, PipelineError> {
    check_lengths(est, reference)?;
    let sq: f64 = est
        .iter()
        .zip(reference)
        .map(|(e, r)| (e - r) * (e - r))
        .sum();
    Ok(100.0 * (sq / est.len() as f64).sqrt())
}

/// `100 * mean(|est - ref|)`.
pub fn mae_pct(est: &[f64], reference: &[f64]) -> Result<f64, PipelineError> {
    check_lengths(est, reference)?;
    let abs: f64 = est.iter().zip(reference).map(|(e, r)| (e - r).abs()).sum();
    Ok(100.0 * abs / est.len() as f64)
}

/// Runs every configured filter kind over `samples` and scores it.
pub fn run_joint(
    config: &RunConfig,
    samples: &MeasuredTrace,
    truth: Option<&TruthTrace>,
) -> Result<RunResult, PipelineError> {
    if samples.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    config.validate()?;
    let reference = build_reference(config, samples, truth)?;
    let runs = config
        .kinds
        .iter()
        .map(|&kind| run_single(kind, config, samples, &reference))
        .collect::<Result<Vec<_>, _>>()?;
    let cutoff_events = samples
        .samples
        .iter()
        .filter(|s| s.voltage_v < config.spec.v_min || s.voltage_v > config.spec.v_max)
        .count() as u64;
    Ok(RunResult {
        time_s: samples.samples.iter().map(|s| s.time_s).collect(),
        reference,
        runs,
        cutoff_events,
    })
}

fn run_single(
    kind: FilterKind,
    config: &RunConfig,
    samples: &MeasuredTrace,
    reference: &[f64],
) -> Result<FilterRun, PipelineError> {
    let mut est = JointEstimator::new(kind, config)?;
    let steps: Vec<StepRecord> = samples
        .samples
        .iter()
        .map(|s| est.step(s.current_a, s.voltage_v))
        .collect();
    let soc: Vec<f64> = steps.iter().map(|s| s.soc_est).collect();
    Ok(FilterRun {
        kind,
        rmse_pct: rmse_pct(&soc, reference)?,
        mae_pct: mae_pct(&soc, reference)?,
        flags: est.flags(),
        steps,
    })
}
