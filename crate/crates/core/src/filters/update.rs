use nalgebra::{Matrix2, RowVector2, SymmetricEigen, Vector2};

use super::{output_jacobian, symmetrize, FilterError, FilterState, HinfConfig};
use crate::model::{coulomb_step, BatterySpec, OcvCurve, TheveninParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovation {
    /// `[dOCV/dSOC, -1]` at the predicted SOC.
    pub h: RowVector2<f64>,
    pub predicted_v: f64,
    /// Measured minus predicted terminal voltage.
    pub residual: f64,
}

/// Time update with `A`, `B` rebuilt from `params`.
pub fn predict(
    mut fs: FilterState,
    params: &TheveninParams,
    spec: &BatterySpec,
    current_a: f64,
) -> FilterState {
    let a = params.pole(spec.dt_s);
    let a_mat = Matrix2::new(1.0, 0.0, 0.0, a);
    let cc = coulomb_step(fs.x[0], current_a, spec);
    if cc.out_of_range {
        fs.soc_clamped = true;
    }
    fs.x = Vector2::new(cc.soc, a * fs.x[1] + params.rp_ohm * (1.0 - a) * current_a);
    fs.p = symmetrize(a_mat * fs.p * a_mat.transpose() + fs.noise.qx);
    fs
}

pub fn innovate(
    fs: &FilterState,
    params: &TheveninParams,
    curve: &OcvCurve,
    current_a: f64,
    measured_v: f64,
) -> Innovation {
    let soc = fs.x[0];
    let predicted_v = curve.eval(soc) - fs.x[1] - params.r0_ohm * current_a;
    Innovation {
        h: output_jacobian(curve, soc),
        predicted_v,
        residual: measured_v - predicted_v,
    }
}

/// Kalman measurement update, plain `(I - K h) P` covariance form.
pub fn ekf_update(
    mut fs: FilterState,
    innov: &Innovation,
) -> Result<(FilterState, Vector2<f64>), FilterError> {
    let h = innov.h;
    let ph = fs.p * h.transpose();
    let s = (h * ph)[(0, 0)] + fs.noise.rx;
    if !(s.is_finite() && s > 0.0) {
        return Err(FilterError::SingularInnovation(s));
    }
    let gain = ph / s;
    fs.x += gain * innov.residual;
    fs.p = symmetrize((Matrix2::identity() - gain * h) * fs.p);
    Ok((fs, gain))
}

/// H-infinity measurement update:
/// `M = I - gamma*S*P + h' Rx^-1 h P`, `K = P M^-1 h' / Rx`, `P <- P M^-1`.
pub fn hinf_update(
    mut fs: FilterState,
    innov: &Innovation,
    conf: &HinfConfig,
) -> Result<(FilterState, Vector2<f64>), FilterError> {
    let rx = fs.noise.rx;
    if !(rx.is_finite() && rx > 0.0) {
        return Err(FilterError::SingularInnovation(rx));
    }
    let h = innov.h;
    let p = fs.p;
    let weight = conf.weight();
    let m = Matrix2::identity() - weight * p * conf.gamma + h.transpose() * h * p / rx;
    let det = m.determinant();
    if !(det.is_finite() && det.abs() > 1e-12 * m.amax().powi(2)) {
        return Err(FilterError::RiccatiBlowup("gain matrix is singular"));
    }
    // M = I + N P with N symmetric, so its spectrum is that of
    // I + P^1/2 N P^1/2 and is real. It must be positive for the bound to exist.
    if !(det > 0.0 && m.trace() > 0.0) {
        return Err(FilterError::RiccatiBlowup("existence condition violated"));
    }
    let m_inv = m
        .try_inverse()
        .ok_or(FilterError::RiccatiBlowup("gain matrix is singular"))?;
    let p_m_inv = p * m_inv;
    let gain = p_m_inv * h.transpose() / rx;
    let asym = (p_m_inv[(0, 1)] - p_m_inv[(1, 0)]).abs();
    if !(asym <= 1e-6 * p_m_inv.amax()) {
        return Err(FilterError::RiccatiBlowup("covariance lost symmetry"));
    }
    let p_next = clip_to_psd(symmetrize(p_m_inv))?;
    fs.x += gain * innov.residual;
    fs.p = p_next;
    Ok((fs, gain))
}

/// Rank-one process noise from the adaptive laws can leave P nearly
/// singular, where rounding produces a slightly negative eigenvalue. Such
/// eigenvalues are set to zero; anything beyond rounding is an error.
fn clip_to_psd(p: Matrix2<f64>) -> Result<Matrix2<f64>, FilterError> {
    if p[(0, 0)] >= 0.0 && p[(1, 1)] >= 0.0 && p.determinant() >= 0.0 {
        return Ok(p);
    }
    let eig = SymmetricEigen::new(p);
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(hi > 0.0 && lo >= -1e-9 * hi) {
        return Err(FilterError::RiccatiBlowup(
            "covariance lost positive definiteness",
        ));
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    Ok(symmetrize(
        eig.eigenvectors * Matrix2::from_diagonal(&clipped) * eig.eigenvectors.transpose(),
    ))
}
