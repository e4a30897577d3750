//! Equivalent-circuit model of a lithium-ion cell.
//!
//! A single-RC Thevenin circuit: an OCV source that depends on SOC, an ohmic
//! resistance `R0` and one polarization pair `Rp || Cp`. Current is
//! discharge-positive throughout the crate, so a discharge lowers SOC and
//! pulls the terminal voltage below OCV.
//!
//! State ordering is always `[soc, up]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid battery spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid Thevenin parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid discrete coefficients: d2 = {0} is outside (-1, 1)")]
    InvalidCoeffs(f64),
    #[error("recovered parameters are not physical: r0={r0}, rp={rp}, cp={cp}")]
    NonPhysical { r0: f64, rp: f64, cp: f64 },
    #[error("OCV curve leaves the [{min_v}, {max_v}] V sanity band at soc={soc} ({value} V)")]
    CurveOutOfBand {
        soc: f64,
        value: f64,
        min_v: f64,
        max_v: f64,
    },
}

/// Physical cell constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    /// Usable capacity in ampere-seconds.
    pub capacity_as: f64,
    pub coulombic_efficiency: f64,
    /// Charge cutoff (V).
    pub v_max: f64,
    /// Discharge cutoff (V).
    pub v_min: f64,
    /// Sample interval (s).
    pub dt_s: f64,
}

impl BatterySpec {
    pub fn new(
        capacity_as: f64,
        coulombic_efficiency: f64,
        v_max: f64,
        v_min: f64,
        dt_s: f64,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            capacity_as,
            coulombic_efficiency,
            v_max,
            v_min,
            dt_s,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Cell used throughout the tests: 2.0383 Ah, 4.2 V / 2.75 V cutoffs, 1 s sampling.
    pub fn samsung_22p() -> Self {
        Self {
            capacity_as: 2.0383 * 3600.0,
            coulombic_efficiency: 1.0,
            v_max: 4.2,
            v_min: 2.75,
            dt_s: 1.0,
        }
    }

    pub fn capacity_ah(&self) -> f64 {
        self.capacity_as / 3600.0
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.capacity_as.is_finite() && self.capacity_as > 0.0) {
            return Err(ModelError::InvalidSpec("capacity must be positive"));
        }
        if !(self.coulombic_efficiency > 0.0 && self.coulombic_efficiency <= 1.0) {
            return Err(ModelError::InvalidSpec(
                "coulombic efficiency must lie in (0, 1]",
            ));
        }
        if !(self.v_min.is_finite() && self.v_max.is_finite() && self.v_min < self.v_max) {
            return Err(ModelError::InvalidSpec("v_min must be below v_max"));
        }
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(ModelError::InvalidSpec("sample interval must be positive"));
        }
        Ok(())
    }
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self::samsung_22p()
    }
}

/// Degree-6 OCV polynomial, coefficients stored highest power first
/// (`[k6, k5, k4, k3, k2, k1, k0]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcvCurve {
    pub coeffs: [f64; 7],
}

/// Coefficients identified for the 18650-22P NCM cell.
pub const DEFAULT_OCV_COEFFS: [f64; 7] = [
    -0.5061, 11.1208, -27.5840, 25.9496, -10.4888, 2.3296, 3.3398,
];

impl OcvCurve {
    pub const fn new(coeffs: [f64; 7]) -> Self {
        Self { coeffs }
    }

    /// OCV at `soc`, clamped into `[0, 1]` first.
    pub fn eval(&self, soc: f64) -> f64 {
        let z = clamp_unit(soc);
        self.coeffs.iter().fold(0.0, |acc, &k| acc * z + k)
    }

    /// Analytic dOCV/dSOC at `soc` (clamped).
    pub fn slope(&self, soc: f64) -> f64 {
        let z = clamp_unit(soc);
        self.coeffs[..6]
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, &k)| acc * z + (6 - i) as f64 * k)
    }

    /// Checks the curve stays inside `[min_v, max_v]` over a dense SOC grid.
    pub fn check_band(&self, min_v: f64, max_v: f64) -> Result<(), ModelError> {
        for i in 0..=1000 {
            let soc = i as f64 / 1000.0;
            let value = self.eval(soc);
            if !(value >= min_v && value <= max_v) {
                return Err(ModelError::CurveOutOfBand {
                    soc,
                    value,
                    min_v,
                    max_v,
                });
            }
        }
        Ok(())
    }
}

impl Default for OcvCurve {
    fn default() -> Self {
        Self::new(DEFAULT_OCV_COEFFS)
    }
}

/// Free-function form of [`OcvCurve::eval`].
pub fn ocv_eval(curve: &OcvCurve, soc: f64) -> f64 {
    curve.eval(soc)
}

/// Free-function form of [`OcvCurve::slope`].
pub fn ocv_slope(curve: &OcvCurve, soc: f64) -> f64 {
    curve.slope(soc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheveninParams {
    pub r0_ohm: f64,
    pub rp_ohm: f64,
    pub cp_f: f64,
}

impl TheveninParams {
    pub fn new(r0_ohm: f64, rp_ohm: f64, cp_f: f64) -> Result<Self, ModelError> {
        let p = Self {
            r0_ohm,
            rp_ohm,
            cp_f,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn tau_s(&self) -> f64 {
        self.rp_ohm * self.cp_f
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.r0_ohm) {
            return Err(ModelError::InvalidParams("r0 must be positive and finite"));
        }
        if !ok(self.rp_ohm) {
            return Err(ModelError::InvalidParams("rp must be positive and finite"));
        }
        if !ok(self.cp_f) {
            return Err(ModelError::InvalidParams("cp must be positive and finite"));
        }
        if !ok(self.tau_s()) {
            return Err(ModelError::InvalidParams("time constant must be positive"));
        }
        Ok(())
    }

    /// Polarization pole `exp(-dt / tau)`.
    pub fn pole(&self, dt_s: f64) -> f64 {
        (-dt_s / self.tau_s()).exp()
    }
}

impl Default for TheveninParams {
    fn default() -> Self {
        Self {
            r0_ohm: 0.05,
            rp_ohm: 0.02,
            cp_f: 5000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcmState {
    pub soc: f64,
    pub up_v: f64,
}

/// Bilinear-discretized transfer-function coefficients of
/// `Ue(k) = d0*I(k) + d1*I(k-1) + d2*Ue(k-1)`, `Ue = OCV - Ut`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCoeffs {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Result of one coulomb-counting step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoulombStep {
    pub soc: f64,
    /// Set when the unclamped value left `[0, 1]`.
    pub out_of_range: bool,
}

pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// One ampere-hour integration step: `soc - eta*dt*I/Qn`, clamped to `[0, 1]`.
pub fn coulomb_step(soc: f64, current_a: f64, spec: &BatterySpec) -> CoulombStep {
    let next = soc - spec.coulombic_efficiency * spec.dt_s * current_a / spec.capacity_as;
    CoulombStep {
        soc: clamp_unit(next),
        out_of_range: !(0.0..=1.0).contains(&next),
    }
}

/// Exact zero-order-hold propagation of the Thevenin state over one sample.
pub fn thevenin_step(
    state: EcmState,
    params: &TheveninParams,
    current_a: f64,
    spec: &BatterySpec,
) -> (EcmState, bool) {
    let cc = coulomb_step(state.soc, current_a, spec);
    let a = params.pole(spec.dt_s);
    let up_v = a * state.up_v + params.rp_ohm * (1.0 - a) * current_a;
    (EcmState { soc: cc.soc, up_v }, cc.out_of_range)
}

/// `OCV(soc) - Up - R0*I`.
pub fn terminal_voltage(
    state: &EcmState,
    params: &TheveninParams,
    current_a: f64,
    curve: &OcvCurve,
) -> f64 {
    curve.eval(state.soc) - state.up_v - params.r0_ohm * current_a
}

pub fn discrete_from_params(params: &TheveninParams, dt_s: f64) -> DiscreteCoeffs {
    let nearest = bilinear_coeffs(params, dt_s);
    let miss = |c: &DiscreteCoeffs| round_trip_miss(params, c, dt_s);
    let base = miss(&nearest);
    if base <= 1e-13 {
        return nearest;
    }
    // For tau >> dt the parameters live in the last few bits of d0, d1 and
    // 1 - d2. Among the f64 neighbours of the nearest values, keep the one
    // the inverse maps back most faithfully (every candidate is within one
    // ulp of the exact coefficient).
    let mut best = (base, nearest);
    for s0 in [-1, 0, 1] {
        for s1 in [-1, 0, 1] {
            for s2 in [-1, 0, 1] {
                let c = DiscreteCoeffs {
                    d0: ulp_step(nearest.d0, s0),
                    d1: ulp_step(nearest.d1, s1),
                    d2: ulp_step(nearest.d2, s2),
                };
                let m = miss(&c);
                if m < best.0 {
                    best = (m, c);
                }
            }
        }
    }
    best.1
}

fn ulp_step(x: f64, dir: i32) -> f64 {
    match dir {
        1 => x.next_up(),
        -1 => x.next_down(),
        _ => x,
    }
}

fn round_trip_miss(params: &TheveninParams, c: &DiscreteCoeffs, dt_s: f64) -> f64 {
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    match params_from_discrete(c, dt_s) {
        Ok(p) => rel(p.r0_ohm, params.r0_ohm)
            .max(rel(p.rp_ohm, params.rp_ohm))
            .max(rel(p.cp_f, params.cp_f)),
        Err(_) => f64::INFINITY,
    }
}

/// Nearest-rounded coefficients, written around u = dt / (2 tau + dt) so that
/// 1 - d2 (or 1 + d2) and d0 + d1 keep their accuracy when tau and dt differ
/// by orders of magnitude.
fn bilinear_coeffs(params: &TheveninParams, dt_s: f64) -> DiscreteCoeffs {
    let TheveninParams {
        r0_ohm: r0,
        rp_ohm: rp,
        ..
    } = *params;
    let tau = params.tau_s();
    let den = 2.0 * tau + dt_s;
    let u = dt_s / den;
    if 2.0 * tau >= dt_s {
        DiscreteCoeffs {
            d0: rp.mul_add(u, r0),
            d1: (2.0 * r0 + rp).mul_add(u, -r0),
            d2: (-2.0f64).mul_add(u, 1.0),
        }
    } else {
        let w = tau / den;
        DiscreteCoeffs {
            d0: rp.mul_add(u, r0),
            d1: (-4.0 * r0).mul_add(w, rp * u) + r0,
            d2: 4.0f64.mul_add(w, -1.0),
        }
    }
}

/// Inverse of [`discrete_from_params`].
pub fn params_from_discrete(
    coeffs: &DiscreteCoeffs,
    dt_s: f64,
) -> Result<TheveninParams, ModelError> {
    let DiscreteCoeffs { d0, d1, d2 } = *coeffs;
    if !(d2 > -1.0 && d2 < 1.0) {
        return Err(ModelError::InvalidCoeffs(d2));
    }
    let (a, b) = (1.0 - d2, 1.0 + d2);
    let tau = 0.5 * dt_s * b / a;
    let r0 = (d0 - d1) / b;
    // (d0 + d1)/(1 - d2) - r0 rearranged to avoid subtracting two large terms
    let rp = 2.0 * d0.mul_add(d2, d1) / (a * b);
    let cp = tau / rp;
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if !(ok(r0) && ok(rp) && ok(cp)) {
        return Err(ModelError::NonPhysical { r0, rp, cp });
    }
    Ok(TheveninParams {
        r0_ohm: r0,
        rp_ohm: rp,
        cp_f: cp,
    })
}
