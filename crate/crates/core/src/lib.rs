//! Over-the-air phase and clock calibration between two distributed access
//! points: OFDM observation synthesis, maximum-likelihood estimators with
//! closed-form gain/phase compression, Cramér-Rao bounds and a Monte Carlo
//! harness.
//!
//! ```
//! use phasecal::{crlb, defaults};
//!
//! let cfg = defaults::ofdm(96.06e6).unwrap();
//! let scenario = defaults::reference_scenario(96.06e6).unwrap();
//! let snr = cfg.linear_snr(scenario.channel_truth().unwrap().gain_ab);
//! let (_, var_phase) = crlb::closed_form_known_pos_los(&cfg, snr);
//! assert!((var_phase.sqrt().to_degrees() - 2.676).abs() < 0.01);
//! ```

pub mod angle;
pub mod channel;
pub mod config;
pub mod crlb;
pub mod defaults;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;

pub use error::{Error, ErrorCategory, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/observations.md")]
    mod observations {}
    #[doc = include_str!("../../../book/src/compression.md")]
    mod compression {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn dbm_per_hz_to_w_per_hz(dbm_per_hz: f64) -> f64 {
    dbm_to_w(dbm_per_hz)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}
