//! Synthetic ground truth: drive-cycle current profiles, exact Thevenin
//! integration and seeded sensor noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    terminal_voltage, thevenin_step, BatterySpec, EcmState, OcvCurve, TheveninParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid drive cycle: {0}")]
    InvalidCycle(&'static str),
    #[error("invalid noise spec: {0}")]
    InvalidNoise(&'static str),
    #[error("initial SOC {0} outside [0, 1]")]
    InvalidInitialSoc(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleKind {
    DstLike,
    FudsLike,
    ConstantCurrent,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveCycleSpec {
    pub kind: CycleKind,
    pub duration_s: f64,
    pub peak_a: f64,
    pub repeat_period_s: f64,
    /// `(duration_s, current_a)` pairs, used by `Custom` only.
    pub segments: Vec<(f64, f64)>,
}

impl Default for DriveCycleSpec {
    fn default() -> Self {
        Self {
            kind: CycleKind::DstLike,
            duration_s: 3600.0,
            peak_a: 4.0,
            repeat_period_s: 360.0,
            segments: Vec::new(),
        }
    }
}

impl DriveCycleSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(SimError::InvalidCycle("duration must be positive"));
        }
        if !(self.peak_a.is_finite() && self.peak_a >= 0.0) {
            return Err(SimError::InvalidCycle("peak current must be non-negative"));
        }
        if !(self.repeat_period_s.is_finite() && self.repeat_period_s > 0.0) {
            return Err(SimError::InvalidCycle("repeat period must be positive"));
        }
        if self.kind == CycleKind::Custom {
            if self.segments.is_empty() {
                return Err(SimError::InvalidCycle("custom cycle needs segments"));
            }
            if self
                .segments
                .iter()
                .any(|&(d, i)| !(d.is_finite() && d > 0.0 && i.is_finite()))
            {
                return Err(SimError::InvalidCycle(
                    "segments need positive durations and finite currents",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub v_sigma: f64,
    pub i_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            v_sigma: 0.005,
            i_sigma: 0.0,
            seed: 1,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.v_sigma.is_finite() && self.v_sigma >= 0.0) {
            return Err(SimError::InvalidNoise("v_sigma must be non-negative"));
        }
        if !(self.i_sigma.is_finite() && self.i_sigma >= 0.0) {
            return Err(SimError::InvalidNoise("i_sigma must be non-negative"));
        }
        Ok(())
    }
}

/// Fractions of the peak current over one 360 s ladder period, as
/// `(seconds, fraction)`; positive is discharge.
const DST_LADDER: [(f64, f64); 20] = [
    (16.0, 0.0),
    (28.0, 0.125),
    (12.0, 0.25),
    (8.0, -0.125),
    (16.0, 0.0),
    (24.0, 0.125),
    (12.0, 0.25),
    (8.0, -0.125),
    (16.0, 0.0),
    (24.0, 0.125),
    (12.0, 0.25),
    (8.0, -0.125),
    (16.0, 0.0),
    (36.0, 0.125),
    (8.0, 1.0),
    (24.0, 0.625),
    (8.0, -0.25),
    (32.0, 0.25),
    (8.0, -0.5),
    (44.0, 0.0),
];
const DST_LADDER_PERIOD: f64 = 360.0;

fn dst_like(t: f64, period: f64, peak: f64) -> f64 {
    // scale the ladder onto the configured period
    let mut local = (t % period) * DST_LADDER_PERIOD / period;
    for &(len, frac) in &DST_LADDER {
        if local < len {
            return frac * peak;
        }
        local -= len;
    }
    0.0
}

fn square(t: f64, period: f64) -> f64 {
    if (t / period).fract() < 0.5 {
        1.0
    } else {
        -1.0
    }
}

/// Net discharge offset plus three square waves at mutually irrational
/// periods; `|I| <= peak` and the sign flips every few seconds.
fn fuds_like(t: f64, period: f64, peak: f64) -> f64 {
    let base = period / 36.0;
    let mix = 0.5 * square(t, base)
        + 0.3 * square(t, base * std::f64::consts::SQRT_2)
        + 0.2 * square(t, base * 1.618_033_988_749_895);
    peak * (0.35 + 0.65 * mix)
}

/// Current profile sampled at `k * dt` for `k < duration / dt`.
pub fn generate_cycle(spec: &DriveCycleSpec, dt_s: f64) -> Result<Vec<f64>, SimError> {
    spec.validate()?;
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(SimError::InvalidCycle("dt must be positive"));
    }
    let n = step_count(spec.duration_s, dt_s);
    let out = (0..n)
        .map(|k| {
            let t = k as f64 * dt_s;
            match spec.kind {
                CycleKind::ConstantCurrent => spec.peak_a,
                CycleKind::DstLike => dst_like(t, spec.repeat_period_s, spec.peak_a),
                CycleKind::FudsLike => fuds_like(t, spec.repeat_period_s, spec.peak_a),
                CycleKind::Custom => custom_at(&spec.segments, t),
            }
        })
        .collect();
    Ok(out)
}

fn custom_at(segments: &[(f64, f64)], t: f64) -> f64 {
    let total: f64 = segments.iter().map(|s| s.0).sum();
    let mut local = t % total;
    for &(len, current) in segments {
        if local < len {
            return current;
        }
        local -= len;
    }
    segments[segments.len() - 1].1
}

pub(crate) fn step_count(duration_s: f64, dt_s: f64) -> usize {
    (duration_s / dt_s + 1e-9).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub time_s: f64,
    pub current_a: f64,
    pub soc: f64,
    pub up_v: f64,
    pub ut_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrace {
    pub samples: Vec<TruthSample>,
    pub params: TheveninParams,
    pub curve: OcvCurve,
    /// Set when the terminal voltage crossed a cutoff; the crossing sample
    /// is the last one kept.
    pub cutoff: bool,
    /// Set when coulomb counting had to clamp SOC.
    pub soc_clamped: bool,
}

impl TruthTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn soc(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.soc).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSample {
    pub time_s: f64,
    pub current_a: f64,
    pub voltage_v: f64,
    pub soc_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasuredTrace {
    pub samples: Vec<MeasuredSample>,
}

impl MeasuredTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_reference(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.soc_ref.is_some())
    }
}

/// Integrates the exact zero-order-hold model over `cycle`. Row `k` holds
/// the state after current `cycle[k]` was applied for one sample.
pub fn simulate_truth(
    spec: &BatterySpec,
    params: &TheveninParams,
    curve: &OcvCurve,
    cycle: &[f64],
    soc_init: f64,
) -> Result<TruthTrace, SimError> {
    if !(0.0..=1.0).contains(&soc_init) {
        return Err(SimError::InvalidInitialSoc(soc_init));
    }
    let mut state = EcmState {
        soc: soc_init,
        up_v: 0.0,
    };
    let mut trace = TruthTrace {
        samples: Vec::with_capacity(cycle.len()),
        params: *params,
        curve: *curve,
        cutoff: false,
        soc_clamped: false,
    };
    for (k, &current) in cycle.iter().enumerate() {
        let (next, clamped) = thevenin_step(state, params, current, spec);
        state = next;
        trace.soc_clamped |= clamped;
        let ut = terminal_voltage(&state, params, current, curve);
        trace.samples.push(TruthSample {
            time_s: k as f64 * spec.dt_s,
            current_a: current,
            soc: state.soc,
            up_v: state.up_v,
            ut_v: ut,
        });
        if ut < spec.v_min || ut > spec.v_max {
            trace.cutoff = true;
            break;
        }
    }
    Ok(trace)
}

/// Adds seeded i.i.d. Gaussian noise to current and voltage. The SOC
/// reference column is carried over from the truth.
pub fn corrupt(truth: &TruthTrace, noise: &NoiseSpec) -> Result<MeasuredTrace, SimError> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let v_dist = Normal::new(0.0, noise.v_sigma).map_err(|_| SimError::InvalidNoise("v_sigma"))?;
    let i_dist = Normal::new(0.0, noise.i_sigma).map_err(|_| SimError::InvalidNoise("i_sigma"))?;
    let samples = truth
        .samples
        .iter()
        .map(|s| {
            // draw both every step so the voltage stream doesn't depend on i_sigma being zero
            let dv = v_dist.sample(&mut rng);
            let di = i_dist.sample(&mut rng);
            MeasuredSample {
                time_s: s.time_s,
                current_a: s.current_a + di,
                voltage_v: s.ut_v + dv,
                soc_ref: Some(s.soc),
            }
        })
        .collect();
    Ok(MeasuredTrace { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    }

    fn cycle(kind: CycleKind, duration_s: f64, peak_a: f64) -> DriveCycleSpec {
        DriveCycleSpec {
            kind,
            duration_s,
            peak_a,
            ..DriveCycleSpec::default()
        }
    }

    #[test]
    fn constant_zero_cycle() {
        let c = generate_cycle(&cycle(CycleKind::ConstantCurrent, 100.0, 0.0), 1.0).unwrap();
        assert_eq!(c.len(), 100);
        assert!(c.iter().all(|&i| i == 0.0));
    }

    #[test]
    fn one_c_discharge_empties_cell() {
        let spec = BatterySpec::samsung_22p();
        let i = spec.capacity_ah();
        let duration = spec.capacity_as / i;
        let c = generate_cycle(&cycle(CycleKind::ConstantCurrent, duration, i), 1.0).unwrap();
        assert_eq!(c.len(), 3600);
        let t = simulate_truth(
            &spec,
            &TheveninParams::default(),
            &OcvCurve::default(),
            &c,
            1.0,
        )
        .unwrap();
        assert!(!t.cutoff);
        assert!(t.samples.last().unwrap().soc.abs() < 1e-9);
    }

    #[test]
    fn fuds_more_variable_than_dst() {
        let dst = generate_cycle(&cycle(CycleKind::DstLike, 3600.0, 2.0), 1.0).unwrap();
        let fuds = generate_cycle(&cycle(CycleKind::FudsLike, 3600.0, 2.0), 1.0).unwrap();
        let (vd, vf) = (variance(&dst), variance(&fuds));
        assert!(vf > vd, "fuds {vf} vs dst {vd}");
        assert!(dst.iter().chain(&fuds).all(|i| i.abs() <= 2.0 + 1e-12));
        // both drain the cell on average
        assert!(dst.iter().sum::<f64>() > 0.0);
        assert!(fuds.iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn custom_segments_repeat() {
        let spec = DriveCycleSpec {
            kind: CycleKind::Custom,
            duration_s: 10.0,
            segments: vec![(2.0, 1.0), (3.0, -0.5)],
            ..DriveCycleSpec::default()
        };
        let c = generate_cycle(&spec, 1.0).unwrap();
        assert_eq!(
            c,
            vec![1.0, 1.0, -0.5, -0.5, -0.5, 1.0, 1.0, -0.5, -0.5, -0.5]
        );
        let empty = DriveCycleSpec {
            kind: CycleKind::Custom,
            ..DriveCycleSpec::default()
        };
        assert!(generate_cycle(&empty, 1.0).is_err());
    }

    #[test]
    fn zero_cycle_relaxes_to_ocv() {
        let spec = BatterySpec::samsung_22p();
        let params = TheveninParams::default();
        let curve = OcvCurve::default();
        let mut c = vec![2.0; 60];
        c.extend(vec![0.0; 2000]);
        let t = simulate_truth(&spec, &params, &curve, &c, 0.7).unwrap();
        let rest = &t.samples[60..];
        let soc = rest[0].soc;
        let ocv = curve.eval(soc);
        let mut prev_gap = f64::INFINITY;
        for s in rest {
            assert_eq!(s.soc, soc);
            let gap = (ocv - s.ut_v).abs();
            assert!(gap < prev_gap || gap == 0.0);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-9);
    }

    #[test]
    fn first_step_polarization() {
        let spec = BatterySpec::samsung_22p();
        let params = TheveninParams::new(0.05, 0.03, 1000.0).unwrap();
        let t = simulate_truth(&spec, &params, &OcvCurve::default(), &[1.0], 0.5).unwrap();
        assert!((t.samples[0].up_v - 9.835e-4).abs() < 1e-7);
    }

    #[test]
    fn cutoff_truncates_and_flags() {
        let spec = BatterySpec::samsung_22p();
        let params = TheveninParams::default();
        let curve = OcvCurve::default();
        let c = vec![20.0; 1000];
        let t = simulate_truth(&spec, &params, &curve, &c, 0.3).unwrap();
        assert!(t.cutoff);
        let last = t.samples.last().unwrap();
        assert!(last.ut_v < spec.v_min);
        assert!(t.samples[..t.len() - 1]
            .iter()
            .all(|s| s.ut_v >= spec.v_min));

        let gentle = simulate_truth(&spec, &params, &curve, &[0.5; 100], 0.5).unwrap();
        assert!(!gentle.cutoff);
        assert_eq!(gentle.len(), 100);
    }

    #[test]
    fn noise_free_corruption_is_identity() {
        let spec = BatterySpec::samsung_22p();
        let c = generate_cycle(&cycle(CycleKind::DstLike, 500.0, 2.0), 1.0).unwrap();
        let t = simulate_truth(
            &spec,
            &TheveninParams::default(),
            &OcvCurve::default(),
            &c,
            0.9,
        )
        .unwrap();
        let m = corrupt(
            &t,
            &NoiseSpec {
                v_sigma: 0.0,
                i_sigma: 0.0,
                seed: 9,
            },
        )
        .unwrap();
        for (a, b) in t.samples.iter().zip(&m.samples) {
            assert_eq!(a.current_a, b.current_a);
            assert_eq!(a.ut_v, b.voltage_v);
            assert_eq!(Some(a.soc), b.soc_ref);
        }
    }

    #[test]
    fn corruption_is_seeded() {
        let spec = BatterySpec::samsung_22p();
        let c = vec![1.0; 200];
        let t = simulate_truth(
            &spec,
            &TheveninParams::default(),
            &OcvCurve::default(),
            &c,
            0.9,
        )
        .unwrap();
        let n = NoiseSpec {
            v_sigma: 0.01,
            i_sigma: 0.01,
            seed: 5,
        };
        assert_eq!(corrupt(&t, &n).unwrap(), corrupt(&t, &n).unwrap());
        let other = NoiseSpec { seed: 6, ..n };
        assert_ne!(corrupt(&t, &n).unwrap(), corrupt(&t, &other).unwrap());
    }

    #[test]
    fn voltage_noise_statistics() {
        let spec = BatterySpec::samsung_22p();
        let c = vec![0.0; 100_000];
        let t = simulate_truth(
            &spec,
            &TheveninParams::default(),
            &OcvCurve::default(),
            &c,
            0.5,
        )
        .unwrap();
        let m = corrupt(
            &t,
            &NoiseSpec {
                v_sigma: 0.005,
                i_sigma: 0.0,
                seed: 77,
            },
        )
        .unwrap();
        let resid: Vec<f64> = t
            .samples
            .iter()
            .zip(&m.samples)
            .map(|(a, b)| b.voltage_v - a.ut_v)
            .collect();
        let std = variance(&resid).sqrt();
        assert!((std / 0.005 - 1.0).abs() < 0.02, "std = {std}");
    }

    #[test]
    fn invalid_inputs() {
        let spec = BatterySpec::samsung_22p();
        assert!(simulate_truth(
            &spec,
            &TheveninParams::default(),
            &OcvCurve::default(),
            &[],
            1.2
        )
        .is_err());
        assert!(generate_cycle(&cycle(CycleKind::DstLike, 0.0, 1.0), 1.0).is_err());
        assert!(generate_cycle(&cycle(CycleKind::DstLike, 10.0, -1.0), 1.0).is_err());
        assert!(NoiseSpec {
            v_sigma: -1.0,
            i_sigma: 0.0,
            seed: 0
        }
        .validate()
        .is_err());
    }
}
