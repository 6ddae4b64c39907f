use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::geometry::{path_gain, propagation_delay, reflection_delay, Position2D};
use super::ofdm::{cis_cycles, fill_subcarrier_ramp, OfdmConfig};
use crate::angle::wrap_to_2pi;
use crate::error::{Error, Result};

/// Hardware offsets of the A→B direction. The B→A values are the negatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetTruth {
    pub clock_offset_ab_s: f64,
    /// In `[0, 2π)`.
    pub phase_offset_ab_rad: f64,
    /// Extra rotation picked up at the reflector, in `[0, 2π)`.
    pub reflection_phase_rad: f64,
}

impl OffsetTruth {
    pub fn new(clock_offset_ab_s: f64, phase_offset_ab_rad: f64, reflection_phase_rad: f64) -> Self {
        Self {
            clock_offset_ab_s,
            phase_offset_ab_rad: wrap_to_2pi(phase_offset_ab_rad),
            reflection_phase_rad: wrap_to_2pi(reflection_phase_rad),
        }
    }

    pub fn clock_offset_ba_s(&self) -> f64 {
        -self.clock_offset_ab_s
    }

    pub fn phase_offset_ba_rad(&self) -> f64 {
        -self.phase_offset_ab_rad
    }
}

/// Propagation parameters of the link. Reciprocity makes the B→A values
/// identical, so only one copy is kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelTruth {
    pub delay_ab_s: f64,
    pub delay_ar_s: f64,
    pub gain_ab: f64,
    pub gain_ar: f64,
}

impl ChannelTruth {
    /// Free-space delays and gains for the direct path and the bounce off `r`.
    pub fn from_geometry(
        a: &Position2D,
        b: &Position2D,
        r: &Position2D,
        carrier_freq_hz: f64,
    ) -> Result<Self> {
        Ok(Self {
            delay_ab_s: propagation_delay(a, b),
            delay_ar_s: reflection_delay(a, r, b),
            gain_ab: path_gain(a.distance(b), carrier_freq_hz)?,
            gain_ar: path_gain(a.distance(r) + r.distance(b), carrier_freq_hz)?,
        })
    }
}

/// Every physical quantity that shapes the noiseless observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub delay_ab_s: f64,
    pub clock_offset_ab_s: f64,
    pub phase_offset_ab_rad: f64,
    pub delay_ar_s: f64,
    pub reflection_phase_rad: f64,
    pub gain_ab: f64,
    pub gain_ar: f64,
}

impl ModelParams {
    pub fn new(channel: &ChannelTruth, offsets: &OffsetTruth) -> Self {
        Self {
            delay_ab_s: channel.delay_ab_s,
            clock_offset_ab_s: offsets.clock_offset_ab_s,
            phase_offset_ab_rad: offsets.phase_offset_ab_rad,
            delay_ar_s: channel.delay_ar_s,
            reflection_phase_rad: offsets.reflection_phase_rad,
            gain_ab: channel.gain_ab,
            gain_ar: channel.gain_ar,
        }
    }

    pub fn pseudo_delay_ab(&self) -> f64 {
        self.delay_ab_s + self.clock_offset_ab_s
    }

    pub fn pseudo_delay_ba(&self) -> f64 {
        self.delay_ab_s - self.clock_offset_ab_s
    }

    pub fn pseudo_delay_ar(&self) -> f64 {
        self.delay_ar_s + self.clock_offset_ab_s
    }

    pub fn pseudo_delay_br(&self) -> f64 {
        self.delay_ar_s - self.clock_offset_ab_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Los,
    TwoPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    UniAb,
    Bidirectional,
}

/// How pilot symbols are drawn. Every variant is unit-modulus before scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PilotKind {
    Ones,
    Qpsk { seed: u64 },
}

/// One OFDM symbol of pilots with `|s[n]|² = E_s` on every subcarrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSequence {
    pub symbols: Vec<Complex64>,
}

impl PilotSequence {
    pub fn constant(cfg: &OfdmConfig) -> Self {
        let amp = cfg.symbol_energy().sqrt();
        Self {
            symbols: vec![Complex64::new(amp, 0.0); cfg.num_subcarriers()],
        }
    }

    pub fn qpsk(cfg: &OfdmConfig, seed: u64) -> Self {
        let amp = cfg.symbol_energy().sqrt() * std::f64::consts::FRAC_1_SQRT_2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols = (0..cfg.num_subcarriers())
            .map(|_| {
                let re = if rng.random::<bool>() { amp } else { -amp };
                let im = if rng.random::<bool>() { amp } else { -amp };
                Complex64::new(re, im)
            })
            .collect();
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.symbols.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// Values the synthesizer used, kept alongside the samples for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRecord {
    pub params: ModelParams,
    pub channel: ChannelKind,
    pub pseudo_delay_ab_s: f64,
    pub pseudo_delay_ba_s: f64,
    pub noisy: bool,
}

/// Received pilot observations in one or both directions.
///
/// `y_ba` holds the samples as received at A. The estimators work on the
/// stacked vector `[y_ab; conj(y_ba)]` returned by [`ObservationSet::stacked`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub direction_mode: DirectionMode,
    pub y_ab: Option<Vec<Complex64>>,
    pub y_ba: Option<Vec<Complex64>>,
    pub pilots_a: PilotSequence,
    pub pilots_b: PilotSequence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<SynthesisRecord>,
}

impl ObservationSet {
    /// Checks the direction/length invariants against a subcarrier count.
    pub fn validate(&self, num_subcarriers: usize) -> Result<()> {
        let check = |len: usize| {
            if len != num_subcarriers {
                Err(Error::Dimension {
                    expected: num_subcarriers,
                    found: len,
                })
            } else {
                Ok(())
            }
        };
        check(self.pilots_a.len())?;
        check(self.pilots_b.len())?;
        match (self.direction_mode, &self.y_ab, &self.y_ba) {
            (DirectionMode::UniAb, Some(ab), None) => check(ab.len()),
            (DirectionMode::Bidirectional, Some(ab), Some(ba)) => {
                check(ab.len())?;
                check(ba.len())
            }
            (mode, ab, ba) => Err(Error::Model(format!(
                "observation mode {mode:?} inconsistent with stored vectors (y_ab: {}, y_ba: {})",
                ab.is_some(),
                ba.is_some()
            ))),
        }
    }

    pub fn num_subcarriers(&self) -> usize {
        self.pilots_a.len()
    }

    /// `y_ab` for uni-directional sets, `[y_ab; conj(y_ba)]` otherwise.
    pub fn stacked(&self) -> Vec<Complex64> {
        let mut out = self.y_ab.clone().unwrap_or_default();
        if self.direction_mode == DirectionMode::Bidirectional {
            if let Some(ba) = &self.y_ba {
                out.extend(ba.iter().map(|v| v.conj()));
            }
        }
        out
    }

    /// Multiplies every received sample by `k` (pilots untouched).
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for v in out.y_ab.iter_mut().chain(out.y_ba.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= k);
        }
        out
    }
}

/// Physical setup needed to synthesize observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pos_a: Position2D,
    pub pos_b: Position2D,
    pub pos_r: Position2D,
    pub ofdm: OfdmConfig,
    pub offsets: OffsetTruth,
    pub pilots: PilotKind,
}

impl Scenario {
    pub fn channel_truth(&self) -> Result<ChannelTruth> {
        ChannelTruth::from_geometry(&self.pos_a, &self.pos_b, &self.pos_r, self.ofdm.carrier_freq_hz())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(&self.channel_truth()?, &self.offsets))
    }

    pub fn pilot_pair(&self) -> (PilotSequence, PilotSequence) {
        match self.pilots {
            PilotKind::Ones => (PilotSequence::constant(&self.ofdm), PilotSequence::constant(&self.ofdm)),
            PilotKind::Qpsk { seed } => (
                PilotSequence::qpsk(&self.ofdm, seed),
                PilotSequence::qpsk(&self.ofdm, seed.wrapping_add(1)),
            ),
        }
    }
}

/// Noiseless response of one path:
/// `gain · exp(-j(2π f_c τ̃ + phase)) · a(τ̃) ⊙ s`.
pub fn path_mean(
    gain: f64,
    pseudo_delay_s: f64,
    phase_rad: f64,
    pilots: &PilotSequence,
    cfg: &OfdmConfig,
) -> Vec<Complex64> {
    let mut ramp = Vec::new();
    fill_subcarrier_ramp(pseudo_delay_s, cfg, &mut ramp);
    let carrier = cis_cycles(cfg.carrier_freq_hz() * pseudo_delay_s)
        * Complex64::from_polar(gain, -phase_rad);
    ramp.iter()
        .zip(&pilots.symbols)
        .map(|(a, s)| carrier * a * s)
        .collect()
}

/// Per-path noiseless means of one direction.
#[derive(Debug, Clone)]
pub struct DirectionalMean {
    pub los: Vec<Complex64>,
    pub reflection: Option<Vec<Complex64>>,
}

impl DirectionalMean {
    pub fn total(&self) -> Vec<Complex64> {
        match &self.reflection {
            Some(r) => self.los.iter().zip(r).map(|(a, b)| a + b).collect(),
            None => self.los.clone(),
        }
    }
}

/// Means of the A→B observation: `μ_AB` and, for two paths, `μ_AR`.
pub fn mean_ab(p: &ModelParams, channel: ChannelKind, cfg: &OfdmConfig, pilots_a: &PilotSequence) -> DirectionalMean {
    let los = path_mean(p.gain_ab, p.pseudo_delay_ab(), p.phase_offset_ab_rad, pilots_a, cfg);
    let reflection = (channel == ChannelKind::TwoPath).then(|| {
        path_mean(
            p.gain_ar,
            p.pseudo_delay_ar(),
            p.reflection_phase_rad + p.phase_offset_ab_rad,
            pilots_a,
            cfg,
        )
    });
    DirectionalMean { los, reflection }
}

/// Means of the B→A observation with the antisymmetric offsets and the
/// reciprocal delays, gains and reflection rotation.
pub fn mean_ba(p: &ModelParams, channel: ChannelKind, cfg: &OfdmConfig, pilots_b: &PilotSequence) -> DirectionalMean {
    let phase_ba = -p.phase_offset_ab_rad;
    let los = path_mean(p.gain_ab, p.pseudo_delay_ba(), phase_ba, pilots_b, cfg);
    let reflection = (channel == ChannelKind::TwoPath).then(|| {
        path_mean(
            p.gain_ar,
            p.pseudo_delay_br(),
            p.reflection_phase_rad + phase_ba,
            pilots_b,
            cfg,
        )
    });
    DirectionalMean { los, reflection }
}

/// Noiseless counterpart of [`ObservationSet::stacked`].
pub fn stacked_mean(
    p: &ModelParams,
    channel: ChannelKind,
    direction: DirectionMode,
    cfg: &OfdmConfig,
    pilots_a: &PilotSequence,
    pilots_b: &PilotSequence,
) -> Vec<Complex64> {
    let mut out = mean_ab(p, channel, cfg, pilots_a).total();
    if direction == DirectionMode::Bidirectional {
        out.extend(mean_ba(p, channel, cfg, pilots_b).total().iter().map(|v| v.conj()));
    }
    out
}

/// Circularly-symmetric complex Gaussian samples with total variance `variance`.
pub fn complex_noise(rng: &mut impl Rng, n: usize, variance: f64) -> Vec<Complex64> {
    let sigma = (0.5 * variance).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sigma * re, sigma * im)
        })
        .collect()
}

/// Synthesizes an observation set. Without a seed the samples are the exact
/// model means; with a seed, `CN(0, N_0)` noise is added on every subcarrier
/// (A→B draws first, then B→A).
pub fn synth_observation(
    scenario: &Scenario,
    channel: ChannelKind,
    direction: DirectionMode,
    noise_seed: Option<u64>,
) -> Result<ObservationSet> {
    let params = scenario.model_params()?;
    let cfg = &scenario.ofdm;
    let (pilots_a, pilots_b) = scenario.pilot_pair();

    let mut y_ab = mean_ab(&params, channel, cfg, &pilots_a).total();
    let mut y_ba = (direction == DirectionMode::Bidirectional)
        .then(|| mean_ba(&params, channel, cfg, &pilots_b).total());

    if let Some(seed) = noise_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n0 = cfg.noise_psd_w_per_hz();
        let w = complex_noise(&mut rng, y_ab.len(), n0);
        add_in_place(&mut y_ab, &w);
        if let Some(ba) = y_ba.as_mut() {
            let w = complex_noise(&mut rng, ba.len(), n0);
            add_in_place(ba, &w);
        }
    }

    Ok(ObservationSet {
        direction_mode: direction,
        y_ab: Some(y_ab),
        y_ba,
        pilots_a,
        pilots_b,
        truth: Some(SynthesisRecord {
            params,
            channel,
            pseudo_delay_ab_s: params.pseudo_delay_ab(),
            pseudo_delay_ba_s: params.pseudo_delay_ba(),
            noisy: noise_seed.is_some(),
        }),
    })
}

fn add_in_place(y: &mut [Complex64], w: &[Complex64]) {
    y.iter_mut().zip(w).for_each(|(a, b)| *a += b);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults;
    use approx::assert_relative_eq;

    fn scenario(bandwidth_hz: f64) -> Scenario {
        defaults::reference_scenario(bandwidth_hz).unwrap()
    }

    #[test]
    fn pilots_have_exact_symbol_energy() {
        let cfg = scenario(6.06e6).ofdm;
        let es = cfg.symbol_energy();
        for p in [PilotSequence::constant(&cfg), PilotSequence::qpsk(&cfg, 7)] {
            assert!(p.symbols.iter().all(|s| (s.norm_sqr() - es).abs() < 1e-12 * es));
        }
    }

    #[test]
    fn noiseless_los_has_flat_magnitude() {
        let sc = scenario(6.06e6);
        let obs = synth_observation(&sc, ChannelKind::Los, DirectionMode::UniAb, None).unwrap();
        let expected = sc.channel_truth().unwrap().gain_ab * sc.ofdm.symbol_energy().sqrt();
        for y in obs.y_ab.as_ref().unwrap() {
            assert_relative_eq!(y.norm(), expected, max_relative = 1e-12);
        }
        obs.validate(sc.ofdm.num_subcarriers()).unwrap();
        assert!(obs.y_ba.is_none());
    }

    #[test]
    fn coincident_paths_merge_coherently() {
        let sc = scenario(6.06e6);
        let mut p = sc.model_params().unwrap();
        p.delay_ar_s = p.delay_ab_s;
        p.reflection_phase_rad = 0.0;
        let (pa, _) = sc.pilot_pair();
        let two = mean_ab(&p, ChannelKind::TwoPath, &sc.ofdm, &pa).total();
        let mut merged = p;
        merged.gain_ab = p.gain_ab + p.gain_ar;
        let los = mean_ab(&merged, ChannelKind::Los, &sc.ofdm, &pa).total();
        for (a, b) in two.iter().zip(&los) {
            assert!((a - b).norm() < 1e-12 * b.norm());
        }
    }

    #[test]
    fn seeded_synthesis_is_deterministic() {
        let sc = scenario(6.06e6);
        let a = synth_observation(&sc, ChannelKind::TwoPath, DirectionMode::Bidirectional, Some(42)).unwrap();
        let b = synth_observation(&sc, ChannelKind::TwoPath, DirectionMode::Bidirectional, Some(42)).unwrap();
        assert_eq!(a, b);
        let c = synth_observation(&sc, ChannelKind::TwoPath, DirectionMode::Bidirectional, Some(43)).unwrap();
        assert_ne!(a.y_ab, c.y_ab);
    }

    #[test]
    fn pseudo_delays_recover_the_geometric_delay() {
        let sc = scenario(6.06e6);
        let obs = synth_observation(&sc, ChannelKind::Los, DirectionMode::Bidirectional, None).unwrap();
        let rec = obs.truth.unwrap();
        let tau = sc.channel_truth().unwrap().delay_ab_s;
        assert_relative_eq!((rec.pseudo_delay_ab_s + rec.pseudo_delay_ba_s).abs() / 2.0, tau, max_relative = 1e-14);
    }

    #[test]
    fn reversed_link_is_antisymmetric() {
        let sc = scenario(6.06e6);
        let fwd = synth_observation(&sc, ChannelKind::Los, DirectionMode::Bidirectional, None).unwrap();
        let mut rev = sc.clone();
        std::mem::swap(&mut rev.pos_a, &mut rev.pos_b);
        rev.offsets = OffsetTruth {
            clock_offset_ab_s: -sc.offsets.clock_offset_ab_s,
            phase_offset_ab_rad: -sc.offsets.phase_offset_ab_rad,
            reflection_phase_rad: sc.offsets.reflection_phase_rad,
        };
        let back = synth_observation(&rev, ChannelKind::Los, DirectionMode::Bidirectional, None).unwrap();
        for (a, b) in fwd.y_ab.unwrap().iter().zip(back.y_ba.as_ref().unwrap()) {
            assert!((a - b).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn validate_catches_length_and_mode_errors() {
        let sc = scenario(6.06e6);
        let obs = synth_observation(&sc, ChannelKind::Los, DirectionMode::UniAb, None).unwrap();
        assert!(matches!(obs.validate(103), Err(Error::Dimension { .. })));
        let mut broken = obs.clone();
        broken.direction_mode = DirectionMode::Bidirectional;
        assert!(matches!(broken.validate(101), Err(Error::Model(_))));
    }
}
