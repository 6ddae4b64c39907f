//! Angle wrapping helpers shared by the synthesis, estimation and experiment code.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Wraps an angle into `[-π, π)`.
pub fn wrap_to_pi(x: f64) -> f64 {
    let w = x - TAU * ((x + PI) / TAU).floor();
    // floor() rounding can land exactly on the excluded endpoint
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_to_2pi(x: f64) -> f64 {
    let w = x - TAU * (x / TAU).floor();
    if w >= TAU {
        w - TAU
    } else {
        w
    }
}

/// Wraps an angle into the canonical half-period interval `[-π/2, π/2)`.
pub fn wrap_to_half_pi(x: f64) -> f64 {
    let w = x - PI * ((x + FRAC_PI_2) / PI).floor();
    if w >= FRAC_PI_2 {
        w - PI
    } else {
        w
    }
}

/// Signed distance from `truth` to `estimate` on a circle of circumference `period`.
///
/// The result lies in `(-period/2, period/2]`. A non-positive period is a
/// programming error.
pub fn wrapped_error(estimate: f64, truth: f64, period: f64) -> f64 {
    assert!(period > 0.0, "wrap period must be positive, got {period}");
    let d = estimate - truth;
    let half = 0.5 * period;
    // shift into (-half, half]
    let w = d - period * ((d - half) / period).ceil();
    if w <= -half {
        w + period
    } else {
        w
    }
}

pub fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn rad(deg: f64) -> f64 {
    deg.to_radians()
}
