//! Monte Carlo harness: single trials, bandwidth sweeps against the bounds
//! and one-dimensional loss profiles.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::angle::wrapped_error;
use crate::channel::{
    synth_observation, ChannelKind, DirectionMode, ModelParams, OfdmConfig, OffsetTruth, PilotKind, Position2D,
    Scenario,
};
use crate::crlb::{crlb_numeric, CrlbReport};
use crate::defaults;
use crate::error::{Error, Result};
use crate::estimators::{
    default_grid, estimate, reflection_rotation, EstimateResult, EstimatorSpec, GridOptions, GridSpec,
    MapKnowledge, Objective, Param, ParameterVariant, SearchAxis, SearchObjective,
};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    /// Access-point positions known, one-way observations.
    Scenario1KnownPos,
    /// Positions unknown, bidirectional observations.
    Scenario2UnknownPos,
}

impl ScenarioId {
    pub fn positions_known(self) -> bool {
        self == ScenarioId::Scenario1KnownPos
    }

    pub fn direction(self) -> DirectionMode {
        match self {
            ScenarioId::Scenario1KnownPos => DirectionMode::UniAb,
            ScenarioId::Scenario2UnknownPos => DirectionMode::Bidirectional,
        }
    }
}

/// Everything needed to synthesize observations and run one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub pos_a: Position2D,
    pub pos_b: Position2D,
    pub pos_r: Position2D,
    pub carrier_freq_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub tx_power_w: f64,
    pub noise_psd_w_per_hz: f64,
    /// Bandwidth used outside of sweeps.
    pub bandwidth_hz: f64,
    pub offsets: OffsetTruth,
    pub scenario: ScenarioId,
    pub direction: DirectionMode,
    /// Channel the observations are drawn from.
    pub observation_channel: ChannelKind,
    /// Channel the estimator assumes; differs from the above in mismatch runs.
    pub estimator_channel: ChannelKind,
    pub map: MapKnowledge,
    pub pilots: PilotKind,
    pub noiseless: bool,
    /// `None` picks the defaults for the estimator's dimensionality.
    pub grid: Option<GridOptions>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let sc = defaults::reference_scenario(defaults::REFERENCE_BANDWIDTH_HZ).expect("reference scenario");
        Self {
            pos_a: sc.pos_a,
            pos_b: sc.pos_b,
            pos_r: sc.pos_r,
            carrier_freq_hz: defaults::CARRIER_FREQ_HZ,
            subcarrier_spacing_hz: defaults::SUBCARRIER_SPACING_HZ,
            tx_power_w: defaults::TX_POWER_W,
            noise_psd_w_per_hz: crate::dbm_per_hz_to_w_per_hz(defaults::NOISE_PSD_DBM_PER_HZ),
            bandwidth_hz: defaults::REFERENCE_BANDWIDTH_HZ,
            offsets: sc.offsets,
            scenario: ScenarioId::Scenario1KnownPos,
            direction: DirectionMode::UniAb,
            observation_channel: ChannelKind::Los,
            estimator_channel: ChannelKind::Los,
            map: MapKnowledge::UNKNOWN,
            pilots: PilotKind::Ones,
            noiseless: false,
            grid: None,
        }
    }
}

impl ScenarioConfig {
    /// A scenario with a matched estimator and the default observation direction.
    pub fn matched(scenario: ScenarioId, channel: ChannelKind, map: MapKnowledge) -> Self {
        Self {
            scenario,
            direction: scenario.direction(),
            observation_channel: channel,
            estimator_channel: channel,
            map,
            ..Self::default()
        }
    }

    /// Checks the scenario/estimator pairing rules. Returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        match (self.scenario, self.direction) {
            (ScenarioId::Scenario2UnknownPos, DirectionMode::UniAb) => {
                return Err(Error::config(
                    "direction",
                    "scenario2_unknown_pos needs bidirectional observations; one-way data cannot separate delay and clock offset",
                ))
            }
            (ScenarioId::Scenario1KnownPos, DirectionMode::Bidirectional) => {
                return Err(Error::config(
                    "direction",
                    "scenario1_known_pos uses one-way A→B observations",
                ))
            }
            _ => {}
        }
        if self.estimator_channel == ChannelKind::Los && self.map.any() {
            return Err(Error::config(
                "estimator.map",
                "map knowledge only applies to the two-path estimator",
            ));
        }
        if self.scenario == ScenarioId::Scenario2UnknownPos && self.estimator_channel == ChannelKind::TwoPath {
            warnings.push("scenario 2 with the two-path estimator runs the experimental four-dimensional search".into());
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("ofdm.bandwidth", "bandwidth must be positive"));
        }
        self.ofdm(self.bandwidth_hz).map_err(|e| Error::config("ofdm", e.to_string()))?;
        Ok(warnings)
    }

    pub fn ofdm(&self, bandwidth_hz: f64) -> Result<OfdmConfig> {
        OfdmConfig::for_bandwidth(
            self.carrier_freq_hz,
            self.subcarrier_spacing_hz,
            bandwidth_hz,
            self.tx_power_w,
            self.noise_psd_w_per_hz,
        )
    }

    pub fn scenario_at(&self, bandwidth_hz: f64) -> Result<Scenario> {
        Ok(Scenario {
            pos_a: self.pos_a,
            pos_b: self.pos_b,
            pos_r: self.pos_r,
            ofdm: self.ofdm(bandwidth_hz)?,
            offsets: self.offsets,
            pilots: self.pilots,
        })
    }

    pub fn truth(&self) -> Result<ModelParams> {
        self.scenario_at(self.bandwidth_hz)?.model_params()
    }

    pub fn variant(&self) -> ParameterVariant {
        ParameterVariant::new(self.scenario.positions_known(), self.estimator_channel)
    }

    /// Variant matching the observation model, used for the bound column.
    pub fn observation_variant(&self) -> ParameterVariant {
        ParameterVariant::new(self.scenario.positions_known(), self.observation_channel)
    }

    pub fn estimator_spec(&self) -> Result<EstimatorSpec> {
        EstimatorSpec::from_truth(self.variant(), self.map, &self.truth()?)
    }

    pub fn grid_options(&self) -> GridOptions {
        self.grid.unwrap_or_else(|| {
            if self.variant() == ParameterVariant::UnknownPosTwoPath {
                GridOptions::coarse()
            } else {
                GridOptions::default()
            }
        })
    }

    pub fn grid_spec(&self, bandwidth_hz: f64) -> Result<GridSpec> {
        let sc = self.scenario_at(bandwidth_hz)?;
        default_grid(&self.estimator_spec()?, &sc.ofdm, &sc.model_params()?, &self.grid_options())
    }

    /// Bound for the observation model at a bandwidth.
    pub fn crlb(&self, bandwidth_hz: f64) -> Result<CrlbReport> {
        let sc = self.scenario_at(bandwidth_hz)?;
        let variant = self.observation_variant();
        let map = if self.observation_channel == ChannelKind::TwoPath { self.map } else { MapKnowledge::UNKNOWN };
        crlb_numeric(variant, &sc.model_params()?, &sc.ofdm, map, self.direction)
    }
}

/// Monte Carlo sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub bandwidths_hz: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Parameters to report; empty means every free non-gain parameter.
    pub report: Vec<Param>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            bandwidths_hz: vec![6e6, 12e6, 24e6, 48e6, 96e6, 150e6],
            trials: 50,
            base_seed: 1,
            report: Vec::new(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("sweep.trials", "need at least one trial"));
        }
        if self.bandwidths_hz.is_empty() {
            return Err(Error::config("sweep.bandwidths_mhz", "need at least one bandwidth"));
        }
        if let Some(w) = self.bandwidths_hz.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::config("sweep.bandwidths_mhz", format!("bandwidth must be positive, got {w}")));
        }
        Ok(())
    }

    /// Seed of one trial: the base seed mixed with a hash of the indices.
    pub fn trial_seed(&self, bandwidth_index: usize, trial: usize) -> u64 {
        self.base_seed ^ splitmix64(((bandwidth_index as u64) << 32) | trial as u64)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Signed estimation errors of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub errors: Vec<(Param, f64)>,
    pub estimate: EstimateResult,
}

impl TrialOutcome {
    pub fn error(&self, param: Param) -> Option<f64> {
        self.errors.iter().find(|(p, _)| *p == param).map(|(_, e)| *e)
    }
}

/// Synthesizes one observation at `bandwidth_hz` and runs the estimator.
/// `seed = None` or a noiseless scenario gives noise-free data.
pub fn run_trial(sc: &ScenarioConfig, bandwidth_hz: f64, seed: Option<u64>) -> Result<TrialOutcome> {
    sc.validate()?;
    let scenario = sc.scenario_at(bandwidth_hz)?;
    let truth = scenario.model_params()?;
    let noise = if sc.noiseless { None } else { seed };
    let obs = synth_observation(&scenario, sc.observation_channel, sc.direction, noise)?;
    let spec = EstimatorSpec::from_truth(sc.variant(), sc.map, &truth)?;
    let grid = default_grid(&spec, &scenario.ofdm, &truth, &sc.grid_options())?;
    let est = estimate(&obs, &scenario.ofdm, &spec, &grid)?;

    let errors = est
        .params
        .entries
        .iter()
        .map(|e| {
            let t = e.param.truth(&truth);
            let err = match est.wrap_period(e.param) {
                Some(period) => wrapped_error(e.value, t, period),
                None => e.value - t,
            };
            (e.param, err)
        })
        .collect();
    Ok(TrialOutcome { errors, estimate: est })
}

/// RMSE of one parameter at one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRecord {
    pub bandwidth_hz: f64,
    pub param: Param,
    pub rmse: f64,
    pub crlb_std: Option<f64>,
    pub unit: String,
    pub trials: usize,
    pub degenerate_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<RmseRecord>,
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn record(&self, bandwidth_hz: f64, param: Param) -> Option<&RmseRecord> {
        self.records
            .iter()
            .find(|r| r.param == param && (r.bandwidth_hz - bandwidth_hz).abs() <= 1e-6 * bandwidth_hz.max(1.0))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["W_hz", "param", "rmse", "crlb_std", "unit", "trials", "degenerate_count"])?;
        for r in &self.records {
            w.write_record([
                format!("{}", r.bandwidth_hz),
                r.param.label().to_string(),
                format!("{:e}", r.rmse),
                r.crlb_std.map(|c| format!("{c:e}")).unwrap_or_default(),
                r.unit.clone(),
                r.trials.to_string(),
                r.degenerate_count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `sweep.trials` independent trials per bandwidth and aggregates RMSEs
/// next to the bound of the observation model.
pub fn run_sweep(sc: &ScenarioConfig, sweep: &SweepSpec) -> Result<SweepResult> {
    sweep.validate()?;
    let warnings = sc.validate()?;
    let mut records = Vec::new();
    for (bi, &requested) in sweep.bandwidths_hz.iter().enumerate() {
        let cfg = sc.ofdm(requested)?;
        let outcomes: Vec<Result<TrialOutcome>> = (0..sweep.trials)
            .into_par_iter()
            .map(|t| run_trial(sc, requested, Some(sweep.trial_seed(bi, t))))
            .collect();
        let outcomes: Vec<TrialOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
        let degenerate = outcomes.iter().filter(|o| o.estimate.flags.degenerate).count();
        let bound = match sc.crlb(requested) {
            Ok(b) => Some(b),
            Err(Error::NonIdentifiable(_)) => None,
            Err(e) => return Err(e),
        };

        let params: Vec<Param> = if sweep.report.is_empty() {
            outcomes[0]
                .errors
                .iter()
                .map(|(p, _)| *p)
                .filter(|p| !matches!(p, Param::GainAb | Param::GainAr))
                .collect()
        } else {
            sweep.report.clone()
        };
        for p in params {
            let errs: Vec<f64> = outcomes.iter().filter_map(|o| o.error(p)).collect();
            if errs.is_empty() {
                return Err(Error::config(
                    "sweep.report",
                    format!("{p} is not estimated by {:?}", sc.variant()),
                ));
            }
            let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
            records.push(RmseRecord {
                bandwidth_hz: cfg.bandwidth_hz(),
                param: p,
                rmse,
                crlb_std: bound.as_ref().and_then(|b| b.std(p)),
                unit: p.unit().to_string(),
                trials: errs.len(),
                degenerate_count: degenerate,
            });
        }
    }
    Ok(SweepResult { records, warnings })
}

/// A one-dimensional cut through the estimator's loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub param: Param,
    /// Offsets from the true value, in `unit`.
    pub offsets: Vec<f64>,
    pub unit: String,
    pub losses: Vec<f64>,
}

impl Profile {
    /// Offset with the smallest loss.
    pub fn argmin(&self) -> f64 {
        let mut best = 0;
        for (i, l) in self.losses.iter().enumerate() {
            if *l < self.losses[best] {
                best = i;
            }
        }
        self.offsets[best]
    }

    /// Offsets of strict interior local minima.
    pub fn local_minima(&self) -> Vec<f64> {
        (1..self.losses.len().saturating_sub(1))
            .filter(|&i| self.losses[i] < self.losses[i - 1] && self.losses[i] < self.losses[i + 1])
            .map(|i| self.offsets[i])
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([format!("{}_error_{}", self.param.label(), self.unit), "nllf".to_string()])?;
        for (x, l) in self.offsets.iter().zip(&self.losses) {
            w.write_record([format!("{x:e}"), format!("{l:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loss along one parameter with every other search coordinate at truth.
///
/// `range` is the offset window from the true value in SI units. With
/// `in_distance`, delay offsets are reported in meters.
pub fn nllf_profile(
    sc: &ScenarioConfig,
    param: Param,
    range: (f64, f64),
    points: usize,
    seed: Option<u64>,
    in_distance: bool,
) -> Result<Profile> {
    sc.validate()?;
    if points < 2 || !(range.0 < range.1) {
        return Err(Error::config("profile", "need at least two points over a non-empty range"));
    }
    let scenario = sc.scenario_at(sc.bandwidth_hz)?;
    let truth = scenario.model_params()?;
    let noise = if sc.noiseless { None } else { seed };
    let obs = synth_observation(&scenario, sc.observation_channel, sc.direction, noise)?;
    let spec = EstimatorSpec::from_truth(sc.variant(), sc.map, &truth)?;
    let objective = SearchObjective::new(&obs, &scenario.ofdm, &spec)?;
    let axes = objective.axes().to_vec();
    let fc = scenario.ofdm.carrier_freq_hz();
    let axis = axes
        .iter()
        .position(|a| a.param() == param)
        .ok_or_else(|| Error::config("profile.param", format!("{param} is not searched by {:?}", sc.variant())))?;

    let base: Vec<f64> = axes
        .iter()
        .map(|a| match a {
            SearchAxis::DelayAb => truth.delay_ab_s,
            SearchAxis::ClockOffset => truth.clock_offset_ab_s,
            SearchAxis::DelayAr => truth.delay_ar_s,
            SearchAxis::Rotation => reflection_rotation(truth.delay_ab_s, truth.delay_ar_s, truth.reflection_phase_rad, fc),
        })
        .collect();

    let step = (range.1 - range.0) / (points - 1) as f64;
    let offsets: Vec<f64> = (0..points).map(|i| range.0 + i as f64 * step).collect();
    let losses: Vec<f64> = offsets
        .par_iter()
        .map(|off| {
            let mut p = base.clone();
            p[axis] = match axes[axis] {
                SearchAxis::Rotation => reflection_rotation(
                    truth.delay_ab_s,
                    truth.delay_ar_s,
                    truth.reflection_phase_rad + off,
                    fc,
                ),
                _ => base[axis] + off,
            };
            objective.eval(&p)
        })
        .collect();

    let (offsets, unit) = if in_distance && param.unit() == "s" {
        (offsets.iter().map(|o| o * SPEED_OF_LIGHT).collect(), "m".to_string())
    } else {
        (offsets, param.unit().to_string())
    };
    Ok(Profile {
        param,
        offsets,
        unit,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_rules() {
        let mut sc = ScenarioConfig::matched(ScenarioId::Scenario2UnknownPos, ChannelKind::Los, MapKnowledge::UNKNOWN);
        assert!(sc.validate().unwrap().is_empty());
        sc.direction = DirectionMode::UniAb;
        assert!(matches!(sc.validate(), Err(Error::Config { .. })));
        let mut los_map = ScenarioConfig::default();
        los_map.map = MapKnowledge::KNOWN;
        assert!(los_map.validate().is_err());
        let four_d = ScenarioConfig::matched(ScenarioId::Scenario2UnknownPos, ChannelKind::TwoPath, MapKnowledge::UNKNOWN);
        assert_eq!(four_d.validate().unwrap().len(), 1);
    }

    #[test]
    fn seeds_differ_across_points_and_trials() {
        let s = SweepSpec::default();
        assert_ne!(s.trial_seed(0, 1), s.trial_seed(1, 0));
        assert_ne!(s.trial_seed(0, 0), s.trial_seed(0, 1));
        assert_eq!(s.trial_seed(3, 7), s.trial_seed(3, 7));
    }

    #[test]
    fn trial_is_deterministic() {
        let sc = ScenarioConfig {
            bandwidth_hz: 24e6,
            ..ScenarioConfig::default()
        };
        let a = run_trial(&sc, 24e6, Some(11)).unwrap();
        let b = run_trial(&sc, 24e6, Some(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_sweep_errors_stay_inside_final_cell() {
        let sc = ScenarioConfig {
            noiseless: true,
            ..ScenarioConfig::default()
        };
        let sweep = SweepSpec {
            bandwidths_hz: vec![12e6, 48e6],
            trials: 1,
            ..SweepSpec::default()
        };
        let res = run_sweep(&sc, &sweep).unwrap();
        for w in [12e6, 48e6] {
            let cell = sc.grid_spec(w).unwrap().final_cell_sizes()[0];
            let rec = res.record(sc.ofdm(w).unwrap().bandwidth_hz(), Param::ClockOffsetAb).unwrap();
            assert!(rec.rmse <= cell, "{} > {}", rec.rmse, cell);
            assert!(rec.crlb_std.is_some());
        }
    }
}
