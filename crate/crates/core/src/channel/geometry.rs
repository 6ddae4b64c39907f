use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Domain(format!("non-finite position [{x}, {y}]")));
        }
        Ok(Self { x, y })
    }

    pub fn distance(&self, other: &Position2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Line-of-sight propagation delay between two antennas.
pub fn propagation_delay(a: &Position2D, b: &Position2D) -> f64 {
    a.distance(b) / SPEED_OF_LIGHT
}

/// Delay of the single-bounce path `a -> r -> b`.
pub fn reflection_delay(a: &Position2D, r: &Position2D, b: &Position2D) -> f64 {
    (a.distance(r) + r.distance(b)) / SPEED_OF_LIGHT
}

/// Free-space amplitude gain `λ / (4π d)` of a path of the given length.
pub fn path_gain(path_length_m: f64, carrier_freq_hz: f64) -> Result<f64> {
    if !(path_length_m > 0.0) || !path_length_m.is_finite() {
        return Err(Error::Domain(format!(
            "path length must be positive, got {path_length_m} m"
        )));
    }
    if !(carrier_freq_hz > 0.0) {
        return Err(Error::Domain(format!(
            "carrier frequency must be positive, got {carrier_freq_hz} Hz"
        )));
    }
    let wavelength = SPEED_OF_LIGHT / carrier_freq_hz;
    Ok(wavelength / (4.0 * std::f64::consts::PI * path_length_m))
}
