//! Conversions between (speed, direction) and the two signed wind components.

use crate::error::{Error, Result};

/// Splits a wind observation into its lateral and longitudinal components.
///
/// `theta` is in meteorological degrees; `0` and `360` denote the same
/// direction.
pub fn decompose_wind(v: f64, theta: f64) -> Result<(f64, f64)> {
    if !(v >= 0.0) {
        return Err(Error::Argument(format!("wind speed must be >= 0, got {v}")));
    }
    if !theta.is_finite() {
        return Err(Error::Argument(format!("wind direction must be finite, got {theta}")));
    }
    let rad = theta.to_radians();
    Ok((-v * rad.sin(), -v * rad.cos()))
}

/// Direction in `(0, 360]` degrees implied by the components `(vx, vy)`.
pub fn recover_direction(vx: f64, vy: f64) -> Result<f64> {
    if vx == 0.0 && vy == 0.0 {
        return Err(Error::CalmWind);
    }
    if !vx.is_finite() || !vy.is_finite() {
        return Err(Error::Argument(format!("non-finite wind components ({vx}, {vy})")));
    }
    let deg = (-vx).atan2(-vy).to_degrees();
    Ok(if deg <= 0.0 { deg + 360.0 } else { deg })
}

/// Maps any finite angle into `(0, 360]`.
pub fn wrap_degrees(theta: f64) -> f64 {
    let r = theta.rem_euclid(360.0);
    if r == 0.0 {
        360.0
    } else {
        r
    }
}
