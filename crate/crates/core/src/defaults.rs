//! Reference simulation setup: two access points 70.7 m apart with a single
//! ground reflection 10 m below B.

use crate::channel::{OfdmConfig, OffsetTruth, PilotKind, Position2D, Scenario};
use crate::error::Result;

pub const CARRIER_FREQ_HZ: f64 = 2e9;
pub const SUBCARRIER_SPACING_HZ: f64 = 60e3;
pub const TX_POWER_W: f64 = 0.01;
pub const NOISE_PSD_DBM_PER_HZ: f64 = -174.0;
pub const CLOCK_OFFSET_S: f64 = 0.67e-6;
pub const PHASE_OFFSET_DEG: f64 = 10.0;
pub const REFLECTION_PHASE_DEG: f64 = 20.0;
pub const POS_A: [f64; 2] = [50.0, 50.0];
pub const POS_B: [f64; 2] = [0.0, 0.0];
pub const POS_R: [f64; 2] = [0.0, -10.0];

/// The bandwidth most of the reference numbers are quoted at.
pub const REFERENCE_BANDWIDTH_HZ: f64 = 96.06e6;

pub fn ofdm(bandwidth_hz: f64) -> Result<OfdmConfig> {
    OfdmConfig::for_bandwidth(
        CARRIER_FREQ_HZ,
        SUBCARRIER_SPACING_HZ,
        bandwidth_hz,
        TX_POWER_W,
        crate::dbm_per_hz_to_w_per_hz(NOISE_PSD_DBM_PER_HZ),
    )
}

pub fn offsets() -> OffsetTruth {
    OffsetTruth::new(
        CLOCK_OFFSET_S,
        PHASE_OFFSET_DEG.to_radians(),
        REFLECTION_PHASE_DEG.to_radians(),
    )
}

pub fn reference_scenario(bandwidth_hz: f64) -> Result<Scenario> {
    Ok(Scenario {
        pos_a: Position2D::new(POS_A[0], POS_A[1])?,
        pos_b: Position2D::new(POS_B[0], POS_B[1])?,
        pos_r: Position2D::new(POS_R[0], POS_R[1])?,
        ofdm: ofdm(bandwidth_hz)?,
        offsets: offsets(),
        pilots: PilotKind::Ones,
    })
}
