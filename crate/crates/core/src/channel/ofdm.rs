use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::angle::wrap_to_pi;
use crate::error::{Error, Result};

/// OFDM numerology and link budget for one calibration exchange.
///
/// Subcarriers are indexed on the centered grid `n = -(N-1)/2 ..= (N-1)/2`,
/// which requires an odd subcarrier count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmConfig {
    carrier_freq_hz: f64,
    subcarrier_spacing_hz: f64,
    num_subcarriers: usize,
    tx_power_w: f64,
    noise_psd_w_per_hz: f64,
}

impl OfdmConfig {
    pub fn new(
        carrier_freq_hz: f64,
        subcarrier_spacing_hz: f64,
        num_subcarriers: usize,
        tx_power_w: f64,
        noise_psd_w_per_hz: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("carrier frequency", carrier_freq_hz),
            ("subcarrier spacing", subcarrier_spacing_hz),
            ("transmit power", tx_power_w),
            ("noise PSD", noise_psd_w_per_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if num_subcarriers == 0 || num_subcarriers % 2 == 0 {
            return Err(Error::Domain(format!(
                "subcarrier count must be odd and positive for the centered grid, got {num_subcarriers}"
            )));
        }
        Ok(Self {
            carrier_freq_hz,
            subcarrier_spacing_hz,
            num_subcarriers,
            tx_power_w,
            noise_psd_w_per_hz,
        })
    }

    /// Builds a configuration whose bandwidth is as close to `bandwidth_hz` as
    /// the odd-count constraint allows: `N = round(W/Δf)`, plus one if even.
    pub fn for_bandwidth(
        carrier_freq_hz: f64,
        subcarrier_spacing_hz: f64,
        bandwidth_hz: f64,
        tx_power_w: f64,
        noise_psd_w_per_hz: f64,
    ) -> Result<Self> {
        Self::new(
            carrier_freq_hz,
            subcarrier_spacing_hz,
            subcarriers_for_bandwidth(bandwidth_hz, subcarrier_spacing_hz)?,
            tx_power_w,
            noise_psd_w_per_hz,
        )
    }

    /// Same link budget, different number of subcarriers.
    pub fn with_bandwidth(&self, bandwidth_hz: f64) -> Result<Self> {
        Self::for_bandwidth(
            self.carrier_freq_hz,
            self.subcarrier_spacing_hz,
            bandwidth_hz,
            self.tx_power_w,
            self.noise_psd_w_per_hz,
        )
    }

    pub fn with_noise_psd(&self, noise_psd_w_per_hz: f64) -> Result<Self> {
        Self::new(
            self.carrier_freq_hz,
            self.subcarrier_spacing_hz,
            self.num_subcarriers,
            self.tx_power_w,
            noise_psd_w_per_hz,
        )
    }

    pub fn carrier_freq_hz(&self) -> f64 {
        self.carrier_freq_hz
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.subcarrier_spacing_hz
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn tx_power_w(&self) -> f64 {
        self.tx_power_w
    }

    pub fn noise_psd_w_per_hz(&self) -> f64 {
        self.noise_psd_w_per_hz
    }

    /// `W = N Δf`.
    pub fn bandwidth_hz(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing_hz
    }

    /// `Δf sqrt(N² - 1)`: the bandwidth for which `W²/12` equals the variance
    /// of the centered subcarrier frequencies. Converges to `W` as `N` grows.
    pub fn effective_bandwidth_hz(&self) -> f64 {
        let n = self.num_subcarriers as f64;
        self.subcarrier_spacing_hz * (n * n - 1.0).sqrt()
    }

    /// Average pilot symbol energy `E_s = P_tx / W`.
    pub fn symbol_energy(&self) -> f64 {
        self.tx_power_w / self.bandwidth_hz()
    }

    pub fn wavelength_m(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Centered subcarrier indices `-(N-1)/2 ..= (N-1)/2`.
    pub fn subcarrier_indices(&self) -> impl Iterator<Item = f64> + Clone {
        let half = (self.num_subcarriers / 2) as i64;
        (-half..=half).map(|n| n as f64)
    }

    /// Baseband frequency offsets `n Δf` of the centered grid.
    pub fn subcarrier_offsets_hz(&self) -> impl Iterator<Item = f64> + Clone {
        let df = self.subcarrier_spacing_hz;
        self.subcarrier_indices().map(move |n| n * df)
    }

    /// `SNR = E_s β² N / N_0`, which reduces to `P_tx β² / (Δf N_0)`.
    pub fn linear_snr(&self, gain: f64) -> f64 {
        self.symbol_energy() * gain * gain * self.num_subcarriers as f64 / self.noise_psd_w_per_hz
    }
}

pub fn subcarriers_for_bandwidth(bandwidth_hz: f64, subcarrier_spacing_hz: f64) -> Result<usize> {
    if !(bandwidth_hz > 0.0 && subcarrier_spacing_hz > 0.0) {
        return Err(Error::Domain(format!(
            "bandwidth and spacing must be positive, got {bandwidth_hz} / {subcarrier_spacing_hz}"
        )));
    }
    let n = (bandwidth_hz / subcarrier_spacing_hz).round().max(1.0) as usize;
    Ok(if n % 2 == 0 { n + 1 } else { n })
}

/// `exp(-j 2π c)` for a phase given in cycles. The integer part is removed
/// before scaling so that large carrier cycle counts keep full precision.
#[inline]
pub(crate) fn cis_cycles(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.round();
    let (s, c) = (-TAU * frac).sin_cos();
    Complex64::new(c, s)
}

/// Writes `exp(-j 2π n Δf τ)` over the centered grid into `out`.
///
/// Uses a phasor recurrence, re-anchored every few steps so rounding never
/// accumulates past a handful of ulps.
pub(crate) fn fill_subcarrier_ramp(pseudo_delay_s: f64, cfg: &OfdmConfig, out: &mut Vec<Complex64>) {
    const ANCHOR_EVERY: usize = 32;
    let n = cfg.num_subcarriers;
    let half = (n / 2) as f64;
    let step_cycles = cfg.subcarrier_spacing_hz * pseudo_delay_s;
    let step = cis_cycles(step_cycles);
    out.clear();
    out.reserve(n);
    let mut cur = Complex64::new(1.0, 0.0);
    for i in 0..n {
        if i % ANCHOR_EVERY == 0 {
            cur = cis_cycles((i as f64 - half) * step_cycles);
        }
        out.push(cur);
        cur *= step;
    }
}

/// `Σ_n exp(+j 2π n Δf τ) z[n]` over the centered grid, i.e. `a(τ)ᴴ z`.
pub(crate) fn steering_inner(z: &[Complex64], pseudo_delay_s: f64, cfg: &OfdmConfig) -> Complex64 {
    const ANCHOR_EVERY: usize = 32;
    let half = (z.len() / 2) as f64;
    let step_cycles = -cfg.subcarrier_spacing_hz * pseudo_delay_s;
    let step = cis_cycles(step_cycles);
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, chunk) in z.chunks(ANCHOR_EVERY).enumerate() {
        let mut cur = cis_cycles(((c * ANCHOR_EVERY) as f64 - half) * step_cycles);
        let mut part = Complex64::new(0.0, 0.0);
        for v in chunk {
            part += cur * v;
            cur *= step;
        }
        acc += part;
    }
    acc
}

/// Delay steering vector `[a(τ)]_n = exp(-j 2π n Δf τ)` on the centered grid.
pub fn steering_vector(pseudo_delay_s: f64, cfg: &OfdmConfig) -> Vec<Complex64> {
    cfg.subcarrier_indices()
        .map(|n| cis_cycles(n * cfg.subcarrier_spacing_hz * pseudo_delay_s))
        .collect()
}

/// Received carrier phase `-2π f_c τ̃ - δφ`, wrapped to `[-π, π)`.
pub fn carrier_phase(pseudo_delay_s: f64, phase_offset_rad: f64, cfg: &OfdmConfig) -> f64 {
    let cycles = cfg.carrier_freq_hz * pseudo_delay_s;
    let frac = cycles - cycles.round();
    wrap_to_pi(-TAU * frac - phase_offset_rad)
}
