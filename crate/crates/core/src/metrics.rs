//! Embedding loss and pose-error statistics.

use std::f64::consts::PI;

use crate::error::{invalid_arg, Result};
use crate::sht::SphericalSignal;

/// Huber penalty with breakpoint 1: `(value, derivative)`.
#[inline]
pub fn huber(alpha: f64) -> (f64, f64) {
    if alpha.abs() <= 1.0 {
        (0.5 * alpha * alpha, alpha)
    } else {
        (alpha.abs() - 0.5, alpha.signum())
    }
}

/// How per-channel losses combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelReduction {
    #[default]
    Sum,
    Mean,
}

/// Area-weighted Huber loss `Σ_k (1/N²) Σ_{i,j} H(sin θ_i · (pred − target))`
/// (or the channel mean), with its gradient with respect to `pred`.
pub fn embedding_loss(
    pred: &SphericalSignal,
    target: &SphericalSignal,
    reduction: ChannelReduction,
) -> Result<(f64, SphericalSignal)> {
    if pred.bandwidth() != target.bandwidth() || pred.channels() != target.channels() {
        return Err(invalid_arg(format!(
            "loss inputs differ: {}×B{} vs {}×B{}",
            pred.channels(),
            pred.bandwidth(),
            target.channels(),
            target.bandwidth()
        )));
    }
    let n = pred.resolution();
    let norm = match reduction {
        ChannelReduction::Sum => 1.0,
        ChannelReduction::Mean => 1.0 / pred.channels() as f64,
    } / (n * n) as f64;
    let sines: Vec<f64> = pred.grid().colatitudes().iter().map(|t| t.sin()).collect();
    let mut grad = SphericalSignal::zeros(pred.grid().clone(), pred.channels());
    let mut loss = 0.0;
    for ((idx, (p, t)), g) in pred
        .values()
        .iter()
        .zip(target.values())
        .enumerate()
        .zip(grad.values_mut())
    {
        let s = sines[(idx / n) % n];
        let (h, dh) = huber(s * (p - t));
        loss += h;
        *g = norm * s * dh;
    }
    Ok((norm * loss, grad))
}

/// Folds an error for objects with a half-turn symmetry: `min(e, π − e)`.
pub fn symmetry_error(err: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&err) {
        return Err(invalid_arg(format!("error {err} rad is outside [0, π]")));
    }
    Ok(err.min(PI - err))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseErrorStats {
    /// Lower median for even counts, degrees.
    pub median_deg: f64,
    /// Fraction of errors strictly below 15°.
    pub acc_at_15: f64,
    /// Fraction of errors strictly below 30°.
    pub acc_at_30: f64,
    pub count: usize,
    /// Per-pair errors in input order, degrees, after folding.
    pub errors_deg: Vec<f64>,
}

pub fn pose_stats(errors: &[f64], symmetry: bool) -> Result<PoseErrorStats> {
    if errors.is_empty() {
        return Err(invalid_arg("pose statistics need at least one error"));
    }
    let mut deg = Vec::with_capacity(errors.len());
    for &e in errors {
        let e = if symmetry { symmetry_error(e)? } else { e };
        if !e.is_finite() || e < 0.0 {
            return Err(invalid_arg(format!("invalid angular error {e}")));
        }
        deg.push(e.to_degrees());
    }
    let mut sorted = deg.clone();
    sorted.sort_by(f64::total_cmp);
    let count = deg.len();
    let acc = |thr: f64| deg.iter().filter(|&&e| e < thr).count() as f64 / count as f64;
    Ok(PoseErrorStats {
        median_deg: sorted[(count - 1) / 2],
        acc_at_15: acc(15.0),
        acc_at_30: acc(30.0),
        count,
        errors_deg: deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_closed_forms() {
        assert_eq!(huber(0.5).0, 0.125);
        assert_eq!(huber(2.0), (1.5, 1.0));
        assert_eq!(huber(-3.0), (2.5, -1.0));
        assert_eq!(huber(1.0).0, 0.5);
        assert_eq!(huber(0.0), (0.0, 0.0));
    }

    #[test]
    fn symmetry_folding() {
        let f = |d: f64| symmetry_error(d.to_radians()).unwrap().to_degrees();
        assert!((f(170.0) - 10.0).abs() < 1e-12);
        assert!((f(90.0) - 90.0).abs() < 1e-12);
        assert_eq!(f(0.0), 0.0);
        assert!(symmetry_error(-0.1).is_err());
        assert!(symmetry_error(4.0).is_err());
    }

    #[test]
    fn fixture_statistics() {
        let e: Vec<f64> = [5.0f64, 10.0, 20.0, 40.0]
            .iter()
            .map(|d| d.to_radians())
            .collect();
        let s = pose_stats(&e, false).unwrap();
        assert!((s.median_deg - 10.0).abs() < 1e-12);
        assert_eq!((s.acc_at_15, s.acc_at_30, s.count), (0.5, 0.75, 4));
        let z = pose_stats(&[0.0; 3], true).unwrap();
        assert_eq!((z.median_deg, z.acc_at_15, z.acc_at_30), (0.0, 1.0, 1.0));
        assert!(pose_stats(&[], false).is_err());
    }
}
