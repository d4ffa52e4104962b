//! The labelled and physics-based (unlabelled) objectives and the metric.

use std::ops::Range;

use crate::dataset::Kinematics;
use crate::error::{Error, Result};

/// `Σ |p_i − p̃_i|`.
pub fn loss_labelled(pred: [f64; 2], truth: [f64; 2]) -> f64 {
    (truth[0] - pred[0]).abs() + (truth[1] - pred[1]).abs()
}

/// Gradient of [`loss_labelled`] in `pred`; 0 at the kink.
pub fn grad_labelled(pred: [f64; 2], truth: [f64; 2]) -> [f64; 2] {
    let sign = |d: f64| if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
    [sign(pred[0] - truth[0]), sign(pred[1] - truth[1])]
}

fn check_range(kin: &Kinematics, range: &Range<usize>) -> Result<()> {
    if range.start > range.end || range.end > kin.z.len() {
        return Err(Error::invalid(format!(
            "index range {range:?} outside kinematics of length {}",
            kin.z.len()
        )));
    }
    Ok(())
}

/// Seat acceleration implied by `p̃` on the reconstructed kinematics:
/// `−p̃1 (ż − ẏ) − p̃2 (z − y)` for every index in `range`.
pub fn reproduce_acceleration(pred: [f64; 2], kin: &Kinematics, range: Range<usize>) -> Result<Vec<f64>> {
    check_range(kin, &range)?;
    Ok(range
        .map(|k| -pred[0] * (kin.z_dot[k] - kin.y_dot[k]) - pred[1] * (kin.z[k] - kin.y[k]))
        .collect())
}

fn check_recorded(range: &Range<usize>, z_ddot: &[f64]) -> Result<()> {
    if range.end > z_ddot.len() {
        return Err(Error::invalid(format!(
            "index range {range:?} outside recorded accelerations of length {}",
            z_ddot.len()
        )));
    }
    Ok(())
}

/// `Σ_{l ∈ range} (z̈_l − z̃̈_l)²`.
pub fn loss_unlabelled(pred: [f64; 2], kin: &Kinematics, range: Range<usize>, z_ddot: &[f64]) -> Result<f64> {
    check_recorded(&range, z_ddot)?;
    let rep = reproduce_acceleration(pred, kin, range.clone())?;
    Ok(rep.iter().zip(&z_ddot[range]).map(|(r, a)| (a - r) * (a - r)).sum())
}

/// Loss and its gradient in `pred`, in one pass.
pub fn loss_grad_unlabelled(
    pred: [f64; 2],
    kin: &Kinematics,
    range: Range<usize>,
    z_ddot: &[f64],
) -> Result<(f64, [f64; 2])> {
    check_range(kin, &range)?;
    check_recorded(&range, z_ddot)?;
    let mut loss = 0.0;
    let mut grad = [0.0; 2];
    for k in range {
        let dv = kin.z_dot[k] - kin.y_dot[k];
        let dx = kin.z[k] - kin.y[k];
        let r = z_ddot[k] + pred[0] * dv + pred[1] * dx;
        loss += r * r;
        grad[0] += 2.0 * r * dv;
        grad[1] += 2.0 * r * dx;
    }
    Ok((loss, grad))
}

/// Closed-form least-squares `(p̃1, p̃2)` minimising [`loss_unlabelled`].
pub fn fit_parameters(kin: &Kinematics, range: Range<usize>, z_ddot: &[f64]) -> Result<[f64; 2]> {
    check_range(kin, &range)?;
    check_recorded(&range, z_ddot)?;
    let (mut aa, mut ab, mut bb, mut ay, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in range {
        let a = kin.z_dot[k] - kin.y_dot[k];
        let b = kin.z[k] - kin.y[k];
        aa += a * a;
        ab += a * b;
        bb += b * b;
        ay += a * z_ddot[k];
        by += b * z_ddot[k];
    }
    let det = aa * bb - ab * ab;
    if !(det.abs() > f64::EPSILON * aa * bb) {
        return Err(Error::Domain("relative kinematics are degenerate; least squares is singular".into()));
    }
    Ok([(-ay * bb + by * ab) / det, (-by * aa + ay * ab) / det])
}

/// `|p − p̃| / p`.
pub fn relative_deviation(truth: f64, pred: f64) -> Result<f64> {
    if !(truth > 0.0) {
        return Err(Error::Domain(format!("relative deviation needs a positive reference, got {truth}")));
    }
    Ok((truth - pred).abs() / truth)
}
