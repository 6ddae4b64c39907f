//! Compressed negative log-likelihoods of the four observation models.
//!
//! The reflection enters every loss only through its rotation relative to
//! the line-of-sight path, `ψ = 2π f_c (τ_AR - τ_AB) + δφ_AR`. Searching over
//! `ψ` instead of `δφ_AR` leaves the loss smooth in `τ_AR` and lets a whole
//! line of `ψ` values reuse the same inner products.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::compress::{compress, Compressed, NormalMatrix};
use crate::angle::wrap_to_2pi;
use crate::channel::ofdm::{cis_cycles, steering_inner};
use crate::channel::{ChannelKind, DirectionMode, ObservationSet, OfdmConfig};
use crate::error::{Error, Result};

/// Reflection rotation relative to the line-of-sight path.
pub fn reflection_rotation(delay_ab_s: f64, delay_ar_s: f64, reflection_phase_rad: f64, carrier_freq_hz: f64) -> f64 {
    let cycles = carrier_freq_hz * (delay_ar_s - delay_ab_s);
    wrap_to_2pi(TAU * (cycles - cycles.floor()) + reflection_phase_rad)
}

/// Inverse of [`reflection_rotation`], in `[0, 2π)`.
pub fn reflection_phase_from_rotation(delay_ab_s: f64, delay_ar_s: f64, rotation_rad: f64, carrier_freq_hz: f64) -> f64 {
    let cycles = carrier_freq_hz * (delay_ar_s - delay_ab_s);
    wrap_to_2pi(rotation_rad - TAU * (cycles - cycles.floor()))
}

/// A point in the physical parameter space. `rotation_rad` is ignored by
/// line-of-sight models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub delay_ab_s: f64,
    pub clock_offset_ab_s: f64,
    pub delay_ar_s: f64,
    pub rotation_rad: f64,
}

impl Hypothesis {
    pub fn los(delay_ab_s: f64, clock_offset_ab_s: f64) -> Self {
        Self {
            delay_ab_s,
            clock_offset_ab_s,
            delay_ar_s: delay_ab_s,
            rotation_rad: 0.0,
        }
    }

    pub fn two_path(delay_ab_s: f64, clock_offset_ab_s: f64, delay_ar_s: f64, reflection_phase_rad: f64, carrier_freq_hz: f64) -> Self {
        Self {
            delay_ab_s,
            clock_offset_ab_s,
            delay_ar_s,
            rotation_rad: reflection_rotation(delay_ab_s, delay_ar_s, reflection_phase_rad, carrier_freq_hz),
        }
    }
}

/// Inner products that do not depend on the reflection rotation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PathStats {
    los_a: Complex64,
    los_b: Complex64,
    refl_a: Complex64,
    refl_b: Complex64,
    cross_a: Complex64,
    cross_b: Complex64,
}

/// Observation-side precomputation shared by every loss evaluation.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    cfg: OfdmConfig,
    channel: ChannelKind,
    direction: DirectionMode,
    z_a: Vec<Complex64>,
    z_b: Vec<Complex64>,
    energy_profile_a: Vec<Complex64>,
    energy_profile_b: Vec<Complex64>,
    energy: f64,
    y_norm_sqr: f64,
}

impl LikelihoodModel {
    pub fn new(obs: &ObservationSet, cfg: &OfdmConfig, channel: ChannelKind, direction: DirectionMode) -> Result<Self> {
        obs.validate(cfg.num_subcarriers())?;
        if direction == DirectionMode::Bidirectional && obs.direction_mode != DirectionMode::Bidirectional {
            return Err(Error::config(
                "observation.direction_mode",
                "a bidirectional model needs observations in both directions",
            ));
        }
        let matched = |y: &[Complex64], s: &[Complex64]| -> Vec<Complex64> {
            y.iter().zip(s).map(|(y, s)| s.conj() * y).collect()
        };
        let profile = |s: &[Complex64]| -> Vec<Complex64> {
            s.iter().map(|s| Complex64::new(s.norm_sqr(), 0.0)).collect()
        };
        let y_ab = obs.y_ab.as_deref().unwrap_or_default();
        let mut y_norm_sqr: f64 = y_ab.iter().map(|v| v.norm_sqr()).sum();
        let mut energy = obs.pilots_a.energy();
        let (z_b, energy_profile_b) = if direction == DirectionMode::Bidirectional {
            let y_ba = obs.y_ba.as_deref().unwrap_or_default();
            y_norm_sqr += y_ba.iter().map(|v| v.norm_sqr()).sum::<f64>();
            energy += obs.pilots_b.energy();
            (matched(y_ba, &obs.pilots_b.symbols), profile(&obs.pilots_b.symbols))
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            cfg: *cfg,
            channel,
            direction,
            z_a: matched(y_ab, &obs.pilots_a.symbols),
            z_b,
            energy_profile_a: profile(&obs.pilots_a.symbols),
            energy_profile_b,
            energy,
            y_norm_sqr,
        })
    }

    pub fn channel(&self) -> ChannelKind {
        self.channel
    }

    pub fn direction(&self) -> DirectionMode {
        self.direction
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    pub fn y_norm_sqr(&self) -> f64 {
        self.y_norm_sqr
    }

    fn bidirectional(&self) -> bool {
        self.direction == DirectionMode::Bidirectional
    }

    /// Line-of-sight carrier conjugate and inner product for the A→B half.
    pub(crate) fn forward_los(&self, tau_ab: f64) -> (Complex64, Complex64) {
        let carrier = cis_cycles(-self.cfg.carrier_freq_hz() * tau_ab);
        (carrier, carrier * steering_inner(&self.z_a, tau_ab, &self.cfg))
    }

    /// Same for the conjugated B→A half; zero for one-way models.
    pub(crate) fn reverse_los(&self, tau_ba: f64) -> (Complex64, Complex64) {
        let carrier = cis_cycles(-self.cfg.carrier_freq_hz() * tau_ba);
        if !self.bidirectional() {
            return (carrier, Complex64::new(0.0, 0.0));
        }
        (carrier, (carrier * steering_inner(&self.z_b, tau_ba, &self.cfg)).conj())
    }

    /// Reflection inner products before the line-of-sight carrier is applied.
    pub(crate) fn reflection_inner(&self, delay_ar_s: f64, clock_offset_ab_s: f64) -> (Complex64, Complex64) {
        let a = steering_inner(&self.z_a, delay_ar_s + clock_offset_ab_s, &self.cfg);
        let b = if self.bidirectional() {
            steering_inner(&self.z_b, delay_ar_s - clock_offset_ab_s, &self.cfg)
        } else {
            Complex64::new(0.0, 0.0)
        };
        (a, b)
    }

    /// Overlap of the two paths for a given delay spread.
    pub(crate) fn path_overlap(&self, spread_s: f64) -> (Complex64, Complex64) {
        let a = steering_inner(&self.energy_profile_a, -spread_s, &self.cfg);
        let b = if self.bidirectional() {
            steering_inner(&self.energy_profile_b, -spread_s, &self.cfg).conj()
        } else {
            Complex64::new(0.0, 0.0)
        };
        (a, b)
    }

    pub(crate) fn assemble(
        &self,
        forward: (Complex64, Complex64),
        reverse: (Complex64, Complex64),
        reflection: (Complex64, Complex64),
        overlap: (Complex64, Complex64),
    ) -> PathStats {
        let refl_b = if self.bidirectional() {
            (reverse.0 * reflection.1).conj()
        } else {
            Complex64::new(0.0, 0.0)
        };
        PathStats {
            los_a: forward.1,
            los_b: reverse.1,
            refl_a: forward.0 * reflection.0,
            refl_b,
            cross_a: overlap.0,
            cross_b: overlap.1,
        }
    }

    fn path_stats(&self, h: &Hypothesis) -> PathStats {
        let forward = self.forward_los(h.delay_ab_s + h.clock_offset_ab_s);
        let reverse = self.reverse_los(h.delay_ab_s - h.clock_offset_ab_s);
        if self.channel == ChannelKind::Los {
            let zero = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            return self.assemble(forward, reverse, zero, zero);
        }
        let reflection = self.reflection_inner(h.delay_ar_s, h.clock_offset_ab_s);
        let overlap = self.path_overlap(h.delay_ar_s - h.delay_ab_s);
        self.assemble(forward, reverse, reflection, overlap)
    }

    pub(crate) fn compress_stats(&self, s: &PathStats, rotation_rad: f64) -> Compressed {
        let u1 = s.los_a + s.los_b;
        match self.channel {
            ChannelKind::Los => compress(self.y_norm_sqr, &[u1], NormalMatrix::One(self.energy)),
            ChannelKind::TwoPath => {
                let rot = Complex64::from_polar(1.0, rotation_rad);
                let u2 = rot * s.refl_a + rot.conj() * s.refl_b;
                let g12 = (rot.conj() * s.cross_a + rot * s.cross_b).re;
                compress(
                    self.y_norm_sqr,
                    &[u1, u2],
                    NormalMatrix::Two {
                        g11: self.energy,
                        g12,
                        g22: self.energy,
                    },
                )
            }
        }
    }

    /// Compressed loss, phase offset and gains at a hypothesis.
    pub fn evaluate(&self, h: &Hypothesis) -> Compressed {
        self.compress_stats(&self.path_stats(h), h.rotation_rad)
    }

    pub fn loss(&self, h: &Hypothesis) -> f64 {
        self.evaluate(h).loss
    }

    /// Losses for several reflection rotations sharing the other coordinates.
    pub fn loss_over_rotation(&self, h: &Hypothesis, rotations: &[f64], out: &mut [f64]) {
        let s = self.path_stats(h);
        for (r, o) in rotations.iter().zip(out.iter_mut()) {
            *o = self.compress_stats(&s, *r).loss;
        }
    }
}

fn require_direction(obs: &ObservationSet, direction: DirectionMode) -> Result<()> {
    if direction == DirectionMode::UniAb && obs.y_ab.is_none() {
        return Err(Error::Model("observation has no A→B samples".into()));
    }
    Ok(())
}

/// Loss of the known-positions line-of-sight model as a function of the
/// clock offset.
pub fn nllf_uni_los(clock_offset_ab_s: f64, obs: &ObservationSet, cfg: &OfdmConfig, delay_ab_s: f64) -> Result<f64> {
    require_direction(obs, DirectionMode::UniAb)?;
    let m = LikelihoodModel::new(obs, cfg, ChannelKind::Los, DirectionMode::UniAb)?;
    Ok(m.loss(&Hypothesis::los(delay_ab_s, clock_offset_ab_s)))
}

/// Loss of the known-positions two-path model.
pub fn nllf_uni_twopath(
    clock_offset_ab_s: f64,
    delay_ar_s: f64,
    reflection_phase_rad: f64,
    obs: &ObservationSet,
    cfg: &OfdmConfig,
    delay_ab_s: f64,
) -> Result<f64> {
    require_direction(obs, DirectionMode::UniAb)?;
    let m = LikelihoodModel::new(obs, cfg, ChannelKind::TwoPath, DirectionMode::UniAb)?;
    Ok(m.loss(&Hypothesis::two_path(
        delay_ab_s,
        clock_offset_ab_s,
        delay_ar_s,
        reflection_phase_rad,
        cfg.carrier_freq_hz(),
    )))
}

/// Loss of the unknown-positions line-of-sight model on bidirectional data.
pub fn nllf_bi_los(delay_ab_s: f64, clock_offset_ab_s: f64, obs: &ObservationSet, cfg: &OfdmConfig) -> Result<f64> {
    let m = LikelihoodModel::new(obs, cfg, ChannelKind::Los, DirectionMode::Bidirectional)?;
    Ok(m.loss(&Hypothesis::los(delay_ab_s, clock_offset_ab_s)))
}

/// Loss of the unknown-positions two-path model on bidirectional data.
pub fn nllf_bi_twopath(
    delay_ab_s: f64,
    clock_offset_ab_s: f64,
    delay_ar_s: f64,
    reflection_phase_rad: f64,
    obs: &ObservationSet,
    cfg: &OfdmConfig,
) -> Result<f64> {
    let m = LikelihoodModel::new(obs, cfg, ChannelKind::TwoPath, DirectionMode::Bidirectional)?;
    Ok(m.loss(&Hypothesis::two_path(
        delay_ab_s,
        clock_offset_ab_s,
        delay_ar_s,
        reflection_phase_rad,
        cfg.carrier_freq_hz(),
    )))
}

/// Real path gains that best explain the observation at a hypothesis,
/// `(β_AB)` or `(β_AB, β_AR)`.
pub fn recover_gains(
    h: &Hypothesis,
    obs: &ObservationSet,
    cfg: &OfdmConfig,
    channel: ChannelKind,
    direction: DirectionMode,
) -> Result<Vec<f64>> {
    let m = LikelihoodModel::new(obs, cfg, channel, direction)?;
    Ok(m.evaluate(h).gains().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::synth_observation;
    use crate::defaults;

    #[test]
    fn rotation_round_trips() {
        let fc = 2e9;
        let (tab, tar, phi) = (235.87e-9, 293.88e-9, 0.35);
        let r = reflection_rotation(tab, tar, phi, fc);
        assert!((reflection_phase_from_rotation(tab, tar, r, fc) - phi).abs() < 1e-9);
    }

    #[test]
    fn noiseless_truth_has_zero_residual() {
        let sc = defaults::reference_scenario(12e6).unwrap();
        let p = sc.model_params().unwrap();
        for (channel, direction) in [
            (ChannelKind::Los, DirectionMode::UniAb),
            (ChannelKind::TwoPath, DirectionMode::UniAb),
            (ChannelKind::Los, DirectionMode::Bidirectional),
            (ChannelKind::TwoPath, DirectionMode::Bidirectional),
        ] {
            let obs = synth_observation(&sc, channel, direction, None).unwrap();
            let m = LikelihoodModel::new(&obs, &sc.ofdm, channel, direction).unwrap();
            let h = Hypothesis::two_path(p.delay_ab_s, p.clock_offset_ab_s, p.delay_ar_s, p.reflection_phase_rad, 2e9);
            let out = m.evaluate(&h);
            assert!(out.loss.abs() < 1e-9 * m.y_norm_sqr(), "{channel:?} {direction:?}: {}", out.loss);
            assert!((out.phase.phase_rad - p.phase_offset_ab_rad).abs() < 1e-9);
            assert!((out.gains[0] - p.gain_ab).abs() < 1e-9 * p.gain_ab);
            if channel == ChannelKind::TwoPath {
                assert!((out.gains[1] - p.gain_ar).abs() < 1e-9 * p.gain_ar);
            }
        }
    }

    #[test]
    fn line_evaluation_matches_pointwise() {
        let sc = defaults::reference_scenario(12e6).unwrap();
        let p = sc.model_params().unwrap();
        let obs = synth_observation(&sc, ChannelKind::TwoPath, DirectionMode::Bidirectional, Some(3)).unwrap();
        let m = LikelihoodModel::new(&obs, &sc.ofdm, ChannelKind::TwoPath, DirectionMode::Bidirectional).unwrap();
        let h = Hypothesis::two_path(p.delay_ab_s, p.clock_offset_ab_s + 1e-9, p.delay_ar_s, 0.0, 2e9);
        let rots = [0.0, 1.0, 2.5, 5.9];
        let mut out = [0.0; 4];
        m.loss_over_rotation(&h, &rots, &mut out);
        for (r, o) in rots.iter().zip(out) {
            let single = m.loss(&Hypothesis { rotation_rad: *r, ..h });
            assert_eq!(single, o);
        }
    }

    #[test]
    fn bidirectional_model_rejects_one_way_data() {
        let sc = defaults::reference_scenario(12e6).unwrap();
        let obs = synth_observation(&sc, ChannelKind::Los, DirectionMode::UniAb, None).unwrap();
        let err = nllf_bi_los(0.0, 0.0, &obs, &sc.ofdm).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
