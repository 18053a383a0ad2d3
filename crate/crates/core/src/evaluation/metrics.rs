use crate::error::{Error, Result};

fn check(op: &'static str, truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::dim(op, &[truth.len()], &[pred.len()]));
    }
    if truth.is_empty() {
        return Err(Error::Argument(format!("{op} needs at least one value")));
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check("rmse", truth, pred)?;
    let sse: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// Root relative squared error against the mean of `truth`.
pub fn rrse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check("rrse", truth, pred)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let sst: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(Error::Numeric("rrse is undefined for a constant truth series".into()));
    }
    let sse: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok((sse / sst).sqrt())
}

/// Smaller of the two arcs between two directions, in `[0, 180]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(360.0 - d)
}

fn check_angles(op: &'static str, xs: &[f64]) -> Result<()> {
    match xs.iter().find(|&&x| !(x > 0.0 && x <= 360.0)) {
        Some(x) => Err(Error::Argument(format!("{op}: direction {x} outside (0, 360]"))),
        None => Ok(()),
    }
}

/// Mean circular absolute difference in degrees.
pub fn amae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check("amae", truth, pred)?;
    check_angles("amae", truth)?;
    check_angles("amae", pred)?;
    Ok(truth
        .iter()
        .zip(pred)
        .map(|(&y, &p)| angle_difference(y, p))
        .sum::<f64>()
        / truth.len() as f64)
}

/// [`amae`] as a share of the largest possible difference.
pub fn namae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    Ok(amae(truth, pred)? / 180.0)
}
