//! Forgetting-factor recursive least squares and the three places it is used:
//! Rint-model OCV extraction, OCV-SOC polynomial fitting, and online
//! identification of the bilinear Thevenin coefficients.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{DiscreteCoeffs, OcvCurve};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentError {
    #[error("regressor has length {got}, estimator dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite sample")]
    NonFinite,
    #[error("degenerate update: lambda + phi' P phi = {0}")]
    Degenerate(f64),
    #[error("forgetting factor {0} outside (0, 1]")]
    InvalidLambda(f64),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
}

/// Trace above which covariance growth from forgetting is suppressed.
pub const DEFAULT_TRACE_CAP: f64 = 1e9;
pub const DEFAULT_COV0: f64 = 1e6;
/// Initial covariance for the polynomial fit. The monomial basis on `[0, 1]`
/// has a normal matrix with condition number around 5e8, so a smaller prior
/// acts as a ridge penalty that visibly biases the coefficients.
pub const POLY_FIT_COV0: f64 = 1e12;
pub const THEVENIN_THETA0: [f64; 3] = [1e-3, 1e-3, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct FfrlsState {
    pub theta: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub lambda: f64,
    pub trace_cap: Option<f64>,
    /// Sticky: set once the windup guard has fired.
    pub windup: bool,
    pub windup_events: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSample {
    pub phi: DVector<f64>,
    pub y: f64,
}

impl RegressorSample {
    pub fn new(phi: &[f64], y: f64) -> Self {
        Self {
            phi: DVector::from_column_slice(phi),
            y,
        }
    }
}

impl FfrlsState {
    /// Estimator with `cov = cov0 * I` and the default windup cap.
    pub fn new(theta0: &[f64], cov0: f64, lambda: f64) -> Result<Self, IdentError> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(IdentError::InvalidLambda(lambda));
        }
        let n = theta0.len();
        Ok(Self {
            theta: DVector::from_column_slice(theta0),
            cov: DMatrix::identity(n, n) * cov0,
            lambda,
            trace_cap: Some(DEFAULT_TRACE_CAP),
            windup: false,
            windup_events: 0,
            steps: 0,
        })
    }

    pub fn with_trace_cap(mut self, cap: Option<f64>) -> Self {
        self.trace_cap = cap;
        self
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// A-priori prediction `phi' theta`.
    pub fn predict(&self, phi: &DVector<f64>) -> f64 {
        phi.dot(&self.theta)
    }

    pub fn step(&self, sample: &RegressorSample) -> Result<Self, IdentError> {
        let n = self.dim();
        if sample.phi.len() != n {
            return Err(IdentError::DimensionMismatch {
                expected: n,
                got: sample.phi.len(),
            });
        }
        if !(sample.y.is_finite() && sample.phi.iter().all(|v| v.is_finite())) {
            return Err(IdentError::NonFinite);
        }
        let phi = &sample.phi;
        let p_phi = &self.cov * phi;
        let denom = self.lambda + phi.dot(&p_phi);
        if !(denom > 0.0) {
            return Err(IdentError::Degenerate(denom));
        }
        let gain = &p_phi / denom;
        let err = sample.y - phi.dot(&self.theta);
        let theta = &self.theta + &gain * err;

        // Joseph form of cov - g phi' cov (a Kalman update with noise variance
        // lambda); the plain subtraction loses definiteness once cov is badly
        // conditioned
        let a = DMatrix::identity(n, n) - &gain * phi.transpose();
        let shrunk = &a * &self.cov * a.transpose() + &gain * gain.transpose() * self.lambda;
        let mut cov = &shrunk / self.lambda;
        let mut next = self.clone();
        if let Some(cap) = self.trace_cap {
            let tr = cov.trace();
            if tr > cap && tr > self.cov.trace() {
                cov = shrunk;
                next.windup = true;
                next.windup_events += 1;
            }
        }
        next.cov = symmetrize(cov);
        next.theta = theta;
        next.steps += 1;
        Ok(next)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Free-function form of [`FfrlsState::step`].
pub fn ffrls_step(state: &FfrlsState, sample: &RegressorSample) -> Result<FfrlsState, IdentError> {
    state.step(sample)
}

/// Rint-model OCV extractor state: `theta = [ocv, r0]`.
pub fn ocv_ident_init(
    ocv0: f64,
    r0: f64,
    cov0: f64,
    lambda: f64,
) -> Result<FfrlsState, IdentError> {
    FfrlsState::new(&[ocv0, r0], cov0, lambda)
}

/// One Rint step: `Ut = OCV - R0*I`, regressor `[1, -I]`.
pub fn ocv_ident_step(
    state: &FfrlsState,
    current_a: f64,
    terminal_v: f64,
) -> Result<(FfrlsState, f64), IdentError> {
    let next = state.step(&RegressorSample::new(&[1.0, -current_a], terminal_v))?;
    let ocv = next.theta[0];
    Ok((next, ocv))
}

/// Gate applied before fitting the OCV polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyFitOptions {
    pub lambda: f64,
    pub cov0: f64,
    pub min_soc_range: f64,
    pub max_condition: f64,
}

impl Default for PolyFitOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            cov0: POLY_FIT_COV0,
            min_soc_range: 0.3,
            max_condition: 1e12,
        }
    }
}

fn poly_regressor(z: f64) -> [f64; 7] {
    let mut phi = [1.0; 7];
    for i in (0..6).rev() {
        phi[i] = phi[i + 1] * z;
    }
    phi
}

/// Condition number of the normal matrix of the degree-6 regressor.
pub fn poly_normal_condition(soc_seq: &[f64]) -> f64 {
    let mut normal = DMatrix::<f64>::zeros(7, 7);
    for &z in soc_seq {
        let phi = DVector::from_column_slice(&poly_regressor(z));
        normal += &phi * phi.transpose();
    }
    let eig = normal.symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Fits `OCV = k6 z^6 + ... + k0` by running FFRLS over every `(soc, ocv)` pair.
pub fn fit_ocv_polynomial(
    soc_seq: &[f64],
    ocv_seq: &[f64],
    lambda: f64,
) -> Result<OcvCurve, IdentError> {
    fit_ocv_polynomial_with(
        soc_seq,
        ocv_seq,
        &PolyFitOptions {
            lambda,
            ..PolyFitOptions::default()
        },
    )
}

pub fn fit_ocv_polynomial_with(
    soc_seq: &[f64],
    ocv_seq: &[f64],
    opts: &PolyFitOptions,
) -> Result<OcvCurve, IdentError> {
    if soc_seq.len() != ocv_seq.len() {
        return Err(IdentError::DimensionMismatch {
            expected: soc_seq.len(),
            got: ocv_seq.len(),
        });
    }
    if soc_seq.len() < 7 {
        return Err(IdentError::IllConditioned(format!(
            "{} samples, need at least 7",
            soc_seq.len()
        )));
    }
    let lo = soc_seq.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = soc_seq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo >= opts.min_soc_range) {
        return Err(IdentError::IllConditioned(format!(
            "SOC range {:.4} below {}",
            hi - lo,
            opts.min_soc_range
        )));
    }
    let cond = poly_normal_condition(soc_seq);
    if !(cond < opts.max_condition) {
        return Err(IdentError::IllConditioned(format!(
            "normal-matrix condition {cond:.3e} exceeds {:.1e}",
            opts.max_condition
        )));
    }

    let mut state = SqrtFfrls::new(&[0.0; 7], opts.cov0, opts.lambda)?;
    for (&z, &v) in soc_seq.iter().zip(ocv_seq) {
        state.step(&poly_regressor(z), v)?;
    }
    let mut coeffs = [0.0; 7];
    coeffs.copy_from_slice(state.theta()?.as_slice());
    Ok(OcvCurve::new(coeffs))
}

/// FFRLS carried as a square-root information pair `(R, z)` with
/// `R' R = cov^-1` and `R theta = z`, updated by Givens rotations.
///
/// Produces the same estimates as [`FfrlsState`] but never forms the
/// covariance, so it survives regressors whose normal matrix is too badly
/// conditioned for the covariance recursion (the monomial OCV basis).
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtFfrls {
    r: DMatrix<f64>,
    z: DVector<f64>,
    lambda: f64,
}

impl SqrtFfrls {
    pub fn new(theta0: &[f64], cov0: f64, lambda: f64) -> Result<Self, IdentError> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(IdentError::InvalidLambda(lambda));
        }
        if !(cov0.is_finite() && cov0 > 0.0) {
            return Err(IdentError::IllConditioned(format!(
                "initial covariance {cov0}"
            )));
        }
        let n = theta0.len();
        let scale = cov0.sqrt().recip();
        Ok(Self {
            r: DMatrix::identity(n, n) * scale,
            z: DVector::from_column_slice(theta0) * scale,
            lambda,
        })
    }

    pub fn step(&mut self, phi: &[f64], y: f64) -> Result<(), IdentError> {
        let n = self.z.len();
        if phi.len() != n {
            return Err(IdentError::DimensionMismatch {
                expected: n,
                got: phi.len(),
            });
        }
        if !(y.is_finite() && phi.iter().all(|v| v.is_finite())) {
            return Err(IdentError::NonFinite);
        }
        let w = self.lambda.sqrt();
        self.r *= w;
        self.z *= w;
        let mut row = phi.to_vec();
        let mut rhs = y;
        for j in 0..n {
            if row[j] == 0.0 {
                continue;
            }
            let (a, b) = (self.r[(j, j)], row[j]);
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for (k, v) in row.iter_mut().enumerate().skip(j) {
                let u = self.r[(j, k)];
                self.r[(j, k)] = c * u + s * *v;
                *v = c * *v - s * u;
            }
            let (u, v) = (self.z[j], rhs);
            self.z[j] = c * u + s * v;
            rhs = c * v - s * u;
        }
        Ok(())
    }

    pub fn theta(&self) -> Result<DVector<f64>, IdentError> {
        self.r
            .solve_upper_triangular(&self.z)
            .ok_or(IdentError::Degenerate(0.0))
    }
}

/// Thevenin coefficient estimator seeded with `[1e-3, 1e-3, 0.5]`.
pub fn thevenin_ident_init(lambda: f64) -> Result<FfrlsState, IdentError> {
    FfrlsState::new(&THEVENIN_THETA0, DEFAULT_COV0, lambda)
}

/// One step of `Ue(k) = d0*I(k) + d1*I(k-1) + d2*Ue(k-1)`.
pub fn thevenin_ident_step(
    state: &FfrlsState,
    i_k: f64,
    i_prev: f64,
    ue_k: f64,
    ue_prev: f64,
) -> Result<(FfrlsState, DiscreteCoeffs), IdentError> {
    let next = state.step(&RegressorSample::new(&[i_k, i_prev, ue_prev], ue_k))?;
    let coeffs = DiscreteCoeffs {
        d0: next.theta[0],
        d1: next.theta[1],
        d2: next.theta[2],
    };
    Ok((next, coeffs))
}
