use std::collections::VecDeque;

use nalgebra::{Matrix2, RowVector2, Vector2};

use super::FilterError;

/// Floor applied when residual matching yields a non-positive `rx`.
pub const RX_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptOutcome {
    pub qx: Matrix2<f64>,
    pub rx: f64,
    /// The raw `rx` was non-positive and has been floored.
    pub negative_rx: bool,
}

/// Mean of squared residuals over whatever the window currently holds.
pub fn window_mean(residuals: &VecDeque<f64>) -> Result<f64, FilterError> {
    if residuals.is_empty() {
        return Err(FilterError::EmptyWindow);
    }
    let sum: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(sum / residuals.len() as f64)
}

fn hph(h: &RowVector2<f64>, p_pred: &Matrix2<f64>) -> f64 {
    (h * p_pred * h.transpose())[(0, 0)]
}

/// `Qx = K M K'`, `Rx = M - h P h'`.
pub fn ahiekf_adapt(
    gain: &Vector2<f64>,
    h: &RowVector2<f64>,
    p_pred: &Matrix2<f64>,
    m: f64,
) -> AdaptOutcome {
    let qx = gain * gain.transpose() * m;
    let rx = m - hph(h, p_pred);
    if rx > 0.0 {
        AdaptOutcome {
            qx,
            rx,
            negative_rx: false,
        }
    } else {
        AdaptOutcome {
            qx,
            rx: RX_FLOOR,
            negative_rx: true,
        }
    }
}

/// Weight `d = (1 - b) / (1 - b^k)` for step `k >= 1`.
pub fn d_factor(k: u64, b: f64) -> f64 {
    let bk = if k <= i32::MAX as u64 {
        b.powi(k as i32)
    } else {
        b.powf(k as f64)
    };
    (1.0 - b) / (1.0 - bk)
}

/// `Qx = K (d M) K'`, `Rx = (1 - d) M + h P h'`.
pub fn iahiekf_adapt(
    gain: &Vector2<f64>,
    h: &RowVector2<f64>,
    p_pred: &Matrix2<f64>,
    m: f64,
    k: u64,
    b: f64,
) -> AdaptOutcome {
    let d = d_factor(k.max(1), b);
    let qx = gain * gain.transpose() * (d * m);
    let rx = (1.0 - d) * m + hph(h, p_pred);
    debug_assert!(rx >= 0.0, "rx = {rx}");
    AdaptOutcome {
        qx,
        rx,
        negative_rx: false,
    }
}
