//! JSON configuration with unit-suffixed field names.
//!
//! Every physical quantity carries its unit in the key, e.g.
//! `clock_offset_ab_us` or `carrier_freq_ghz`. Omitted fields take the
//! reference values. Unknown keys, bare quantity names and unsupported units
//! are rejected with the path of the offending field.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::angle::wrap_to_2pi;
use crate::channel::{ChannelKind, DirectionMode, OffsetTruth, PilotKind, Position2D};
use crate::error::{Error, Result};
use crate::estimators::{GridOptions, MapKnowledge, Param};
use crate::experiments::{ScenarioConfig, ScenarioId, SweepSpec};

/// Settings of the `profile` experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub param: Param,
    /// Offset window from the true value, SI units.
    pub range: (f64, f64),
    pub points: usize,
    pub in_distance: bool,
    pub seed: Option<u64>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            param: Param::ClockOffsetAb,
            range: (-20e-9, 20e-9),
            points: 401,
            in_distance: true,
            seed: None,
        }
    }
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub sweep: SweepSpec,
    pub profile: ProfileSpec,
    /// Non-fatal notes produced while parsing.
    pub warnings: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            sweep: SweepSpec::default(),
            profile: ProfileSpec::default(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Time,
    Frequency,
    Angle,
    Power,
    Psd,
    Length,
}

impl Kind {
    fn units(self) -> &'static [(&'static str, fn(f64) -> f64)] {
        match self {
            Kind::Time => &[("s", |x| x), ("ms", |x| x * 1e-3), ("us", |x| x * 1e-6), ("ns", |x| x * 1e-9), ("ps", |x| x * 1e-12)],
            Kind::Frequency => &[("hz", |x| x), ("khz", |x| x * 1e3), ("mhz", |x| x * 1e6), ("ghz", |x| x * 1e9)],
            Kind::Angle => &[("rad", |x| x), ("deg", f64::to_radians)],
            Kind::Power => &[("w", |x| x), ("mw", |x| x * 1e-3), ("dbm", crate::dbm_to_w)],
            Kind::Psd => &[("w_per_hz", |x| x), ("dbm_per_hz", crate::dbm_per_hz_to_w_per_hz)],
            Kind::Length => &[("m", |x| x), ("cm", |x| x * 1e-2), ("mm", |x| x * 1e-3)],
        }
    }
}

/// One JSON object being consumed field by field.
struct Section<'a> {
    path: String,
    map: Map<String, Value>,
    warnings: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(path: &str, value: Value, warnings: &'a mut Vec<String>) -> Result<Self> {
        match value {
            Value::Object(map) => Ok(Self {
                path: path.to_string(),
                map,
                warnings,
            }),
            _ => Err(Error::config(path, "expected an object")),
        }
    }

    fn field_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key)
    }

    fn sub(&mut self, key: &str) -> Result<Option<Section<'_>>> {
        let path = self.field_path(key);
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => Ok(Some(Section::new(&path, v, self.warnings)?)),
        }
    }

    fn quantity_value(&self, v: &Value, key: &str, unit: fn(f64) -> f64) -> Result<f64> {
        let x = v
            .as_f64()
            .ok_or_else(|| Error::config(self.field_path(key), "expected a number"))?;
        if !x.is_finite() {
            return Err(Error::config(self.field_path(key), "must be finite"));
        }
        Ok(unit(x))
    }

    /// Finds `base_<unit>` among the keys and converts to SI.
    fn quantity(&mut self, base: &str, kind: Kind) -> Result<Option<f64>> {
        if self.map.contains_key(base) {
            let units: Vec<_> = kind.units().iter().map(|(u, _)| format!("{base}_{u}")).collect();
            return Err(Error::config(
                self.field_path(base),
                format!("missing unit; use one of {}", units.join(", ")),
            ));
        }
        let mut found = None;
        for (suffix, conv) in kind.units() {
            let key = format!("{base}_{suffix}");
            if let Some(v) = self.take(&key) {
                if found.is_some() {
                    return Err(Error::config(self.field_path(&key), "quantity given more than once"));
                }
                found = Some(self.quantity_value(&v, &key, *conv)?);
            }
        }
        Ok(found)
    }

    fn quantity_list(&mut self, base: &str, kind: Kind) -> Result<Option<Vec<f64>>> {
        if self.map.contains_key(base) {
            return Err(Error::config(self.field_path(base), "missing unit"));
        }
        for (suffix, conv) in kind.units() {
            let key = format!("{base}_{suffix}");
            if let Some(v) = self.take(&key) {
                let arr = v
                    .as_array()
                    .ok_or_else(|| Error::config(self.field_path(&key), "expected an array of numbers"))?;
                let mut out = Vec::with_capacity(arr.len());
                for (i, x) in arr.iter().enumerate() {
                    let x = x
                        .as_f64()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::config(format!("{}[{i}]", self.field_path(&key)), "expected a finite number"))?;
                    out.push(conv(x));
                }
                return Ok(Some(out));
            }
        }
        Ok(None)
    }

    fn position(&mut self, base: &str) -> Result<Option<Position2D>> {
        match self.quantity_list(base, Kind::Length)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some(
                Position2D::new(v[0], v[1]).map_err(|e| Error::config(self.field_path(base), e.to_string()))?,
            )),
            Some(v) => Err(Error::config(
                self.field_path(base),
                format!("expected [x, y], got {} values", v.len()),
            )),
        }
    }

    fn phase(&mut self, base: &str) -> Result<Option<f64>> {
        let Some(x) = self.quantity(base, Kind::Angle)? else {
            return Ok(None);
        };
        let wrapped = wrap_to_2pi(x);
        if (wrapped - x).abs() > 1e-12 {
            self.warnings.push(format!(
                "{}: {:.6}° normalized to {:.6}°",
                self.field_path(base),
                x.to_degrees(),
                wrapped.to_degrees()
            ));
        }
        Ok(Some(wrapped))
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(b)),
            Some(_) => Err(Error::config(self.field_path(key), "expected true or false")),
        }
    }

    fn uint(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| Error::config(self.field_path(key), "expected a non-negative integer")),
        }
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| Error::config(self.field_path(key), "expected a finite number")),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(Error::config(self.field_path(key), "expected a string")),
        }
    }

    fn enumerated<T: serde::de::DeserializeOwned>(&mut self, key: &str, allowed: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|_| Error::config(self.field_path(key), format!("expected one of {allowed}, got {v}"))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.map.keys().next() {
            let msg = if k.contains('_') && !k.starts_with('_') {
                "unknown field (check the name and unit suffix)"
            } else {
                "unknown field"
            };
            return Err(Error::config(self.field_path(k), msg));
        }
        Ok(())
    }
}

/// Reads and resolves a configuration file. A run manifest is accepted too,
/// in which case its resolved configuration is used.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::config("", format!("invalid JSON: {e}")))?;
    parse_config_value(value)
}

pub fn parse_config_value(value: Value) -> Result<RunConfig> {
    let value = match value {
        Value::Object(mut m) if m.contains_key("resolved_config") && m.contains_key("tool_version") => {
            m.remove("resolved_config").unwrap()
        }
        v => v,
    };
    let mut warnings = Vec::new();
    let mut cfg = RunConfig::default();
    {
        let mut root = Section::new("", value, &mut warnings)?;
        let sc = &mut cfg.scenario;

        if let Some(id) = root.enumerated::<ScenarioId>("scenario", "scenario1_known_pos, scenario2_unknown_pos")? {
            sc.scenario = id;
            sc.direction = id.direction();
        }
        if let Some(d) = root.enumerated::<DirectionMode>("direction", "uni_ab, bidirectional")? {
            sc.direction = d;
        }
        if let Some(c) = root.enumerated::<ChannelKind>("observation_channel", "los, two_path")? {
            sc.observation_channel = c;
            sc.estimator_channel = c;
        }
        if let Some(b) = root.bool("noiseless")? {
            sc.noiseless = b;
        }

        if let Some(mut est) = root.sub("estimator")? {
            if let Some(c) = est.enumerated::<ChannelKind>("channel", "los, two_path")? {
                sc.estimator_channel = c;
            }
            let mut map = MapKnowledge::default();
            if let Some(b) = est.bool("delay_ar_known")? {
                map.delay_ar_known = b;
            }
            if let Some(b) = est.bool("reflection_phase_known")? {
                map.reflection_phase_known = b;
            }
            sc.map = map;
            est.finish()?;
        }

        if let Some(mut g) = root.sub("geometry")? {
            if let Some(p) = g.position("pos_a")? {
                sc.pos_a = p;
            }
            if let Some(p) = g.position("pos_b")? {
                sc.pos_b = p;
            }
            if let Some(p) = g.position("pos_r")? {
                sc.pos_r = p;
            }
            g.finish()?;
        }

        if let Some(mut o) = root.sub("ofdm")? {
            let positive = |o: &Section, key: &str, v: f64| -> Result<f64> {
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(Error::config(o.field_path(key), "must be positive"))
                }
            };
            if let Some(v) = o.quantity("carrier_freq", Kind::Frequency)? {
                sc.carrier_freq_hz = positive(&o, "carrier_freq", v)?;
            }
            if let Some(v) = o.quantity("subcarrier_spacing", Kind::Frequency)? {
                sc.subcarrier_spacing_hz = positive(&o, "subcarrier_spacing", v)?;
            }
            if let Some(v) = o.quantity("bandwidth", Kind::Frequency)? {
                sc.bandwidth_hz = positive(&o, "bandwidth", v)?;
            }
            if let Some(v) = o.quantity("tx_power", Kind::Power)? {
                sc.tx_power_w = positive(&o, "tx_power", v)?;
            }
            if let Some(v) = o.quantity("noise_psd", Kind::Psd)? {
                sc.noise_psd_w_per_hz = positive(&o, "noise_psd", v)?;
            }
            if let Some(p) = o.take("pilots") {
                sc.pilots = match p {
                    Value::String(s) if s == "ones" => PilotKind::Ones,
                    Value::Object(m) if m.len() == 1 && m.contains_key("qpsk_seed") => PilotKind::Qpsk {
                        seed: m["qpsk_seed"]
                            .as_u64()
                            .ok_or_else(|| Error::config(o.field_path("pilots.qpsk_seed"), "expected an integer"))?,
                    },
                    _ => {
                        return Err(Error::config(
                            o.field_path("pilots"),
                            "expected \"ones\" or {\"qpsk_seed\": <integer>}",
                        ))
                    }
                };
            }
            o.finish()?;
        }

        if let Some(mut off) = root.sub("offsets")? {
            let mut t = sc.offsets;
            if let Some(v) = off.quantity("clock_offset_ab", Kind::Time)? {
                t.clock_offset_ab_s = v;
            }
            if let Some(v) = off.phase("phase_offset_ab")? {
                t.phase_offset_ab_rad = v;
            }
            if let Some(v) = off.phase("reflection_phase")? {
                t.reflection_phase_rad = v;
            }
            sc.offsets = OffsetTruth::new(t.clock_offset_ab_s, t.phase_offset_ab_rad, t.reflection_phase_rad);
            off.finish()?;
        }

        if let Some(mut g) = root.sub("grid")? {
            let mut opts = GridOptions::default();
            if let Some(v) = g.number("delay_half_width_inv_bw")? {
                opts.delay_half_width_inv_bw = v;
            }
            if let Some(v) = g.uint("delay_points")? {
                opts.delay_points = v as usize;
            }
            if let Some(v) = g.uint("rotation_points")? {
                opts.rotation_points = v as usize;
            }
            if let Some(v) = g.uint("candidates")? {
                if v == 0 {
                    return Err(Error::config(g.field_path("candidates"), "must be at least 1"));
                }
                opts.candidates = v as usize;
            }
            if let Some(v) = g.uint("hop_rounds")? {
                opts.hop_rounds = v as usize;
            }
            if let Some(v) = g.uint("recentre_rounds")? {
                opts.recentre_rounds = v as usize;
            }
            if let Some(v) = g.bool("resolve_carrier")? {
                opts.resolve_carrier = v;
            }
            match g.take("refinement_levels") {
                None | Some(Value::Null) => {}
                Some(v) => {
                    opts.refinement_levels = Some(
                        v.as_u64()
                            .ok_or_else(|| Error::config(g.field_path("refinement_levels"), "expected an integer or null"))?
                            as usize,
                    )
                }
            }
            if let Some(v) = g.number("shrink_factor")? {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::config(g.field_path("shrink_factor"), "must lie in (0, 1)"));
                }
                opts.shrink_factor = v;
            }
            if opts.delay_points < 3 || opts.rotation_points < 3 || !(opts.delay_half_width_inv_bw > 0.0) {
                return Err(Error::config(g.path.clone(), "grid needs ≥3 points per axis and a positive window"));
            }
            sc.grid = Some(opts);
            g.finish()?;
        }

        if let Some(mut s) = root.sub("sweep")? {
            if let Some(v) = s.quantity_list("bandwidths", Kind::Frequency)? {
                cfg.sweep.bandwidths_hz = v;
            }
            if let Some(v) = s.uint("trials")? {
                cfg.sweep.trials = v as usize;
            }
            if let Some(v) = s.uint("base_seed")? {
                cfg.sweep.base_seed = v;
            }
            if let Some(v) = s.take("report") {
                let path = s.field_path("report");
                let arr = v.as_array().ok_or_else(|| Error::config(&path, "expected an array of parameter names"))?;
                cfg.sweep.report = arr
                    .iter()
                    .map(|x| {
                        x.as_str()
                            .and_then(Param::from_label)
                            .ok_or_else(|| Error::config(&path, format!("unknown parameter {x}")))
                    })
                    .collect::<Result<_>>()?;
            }
            s.finish()?;
        }

        if let Some(mut p) = root.sub("profile")? {
            if let Some(name) = p.string("param")? {
                cfg.profile.param = Param::from_label(&name)
                    .ok_or_else(|| Error::config(p.field_path("param"), format!("unknown parameter {name}")))?;
            }
            let time_range = p.quantity_list("range", Kind::Time)?;
            let angle_range = if time_range.is_none() { p.quantity_list("range", Kind::Angle)? } else { None };
            let dist_range = if time_range.is_none() && angle_range.is_none() {
                p.quantity_list("range", Kind::Length)?
                    .map(|v| v.iter().map(|x| x / crate::SPEED_OF_LIGHT).collect::<Vec<_>>())
            } else {
                None
            };
            if let Some(r) = time_range.or(angle_range).or(dist_range) {
                if r.len() != 2 || !(r[0] < r[1]) {
                    return Err(Error::config(p.field_path("range"), "expected [low, high] with low < high"));
                }
                cfg.profile.range = (r[0], r[1]);
            }
            if let Some(v) = p.uint("points")? {
                cfg.profile.points = v as usize;
            }
            if let Some(v) = p.bool("in_distance")? {
                cfg.profile.in_distance = v;
            }
            match p.take("seed") {
                None | Some(Value::Null) => {}
                Some(v) => {
                    cfg.profile.seed = Some(
                        v.as_u64()
                            .ok_or_else(|| Error::config(p.field_path("seed"), "expected an integer or null"))?,
                    )
                }
            }
            p.finish()?;
        }
        root.finish()?;
    }

    warnings.extend(cfg.scenario.validate()?);
    cfg.sweep.validate()?;
    cfg.warnings = warnings;
    Ok(cfg)
}

/// Canonical JSON form with SI unit suffixes. Parsing the output yields the
/// same configuration, so the form is a fixed point.
pub fn to_canonical_json(cfg: &RunConfig) -> Value {
    let sc = &cfg.scenario;
    let pos = |p: &Position2D| json!([p.x, p.y]);
    let grid = sc.grid.map(|g| {
        json!({
            "delay_half_width_inv_bw": g.delay_half_width_inv_bw,
            "delay_points": g.delay_points,
            "rotation_points": g.rotation_points,
            "resolve_carrier": g.resolve_carrier,
            "refinement_levels": g.refinement_levels,
            "shrink_factor": g.shrink_factor,
            "candidates": g.candidates,
            "hop_rounds": g.hop_rounds,
            "recentre_rounds": g.recentre_rounds,
        })
    });
    let pilots = match sc.pilots {
        PilotKind::Ones => json!("ones"),
        PilotKind::Qpsk { seed } => json!({ "qpsk_seed": seed }),
    };
    let profile_range = if cfg.profile.param.is_phase() {
        ("range_rad", json!([cfg.profile.range.0, cfg.profile.range.1]))
    } else {
        ("range_s", json!([cfg.profile.range.0, cfg.profile.range.1]))
    };
    let mut root = json!({
        "scenario": sc.scenario,
        "direction": sc.direction,
        "observation_channel": sc.observation_channel,
        "noiseless": sc.noiseless,
        "estimator": {
            "channel": sc.estimator_channel,
            "delay_ar_known": sc.map.delay_ar_known,
            "reflection_phase_known": sc.map.reflection_phase_known,
        },
        "geometry": {
            "pos_a_m": pos(&sc.pos_a),
            "pos_b_m": pos(&sc.pos_b),
            "pos_r_m": pos(&sc.pos_r),
        },
        "ofdm": {
            "carrier_freq_hz": sc.carrier_freq_hz,
            "subcarrier_spacing_hz": sc.subcarrier_spacing_hz,
            "bandwidth_hz": sc.bandwidth_hz,
            "tx_power_w": sc.tx_power_w,
            "noise_psd_w_per_hz": sc.noise_psd_w_per_hz,
            "pilots": pilots,
        },
        "offsets": {
            "clock_offset_ab_s": sc.offsets.clock_offset_ab_s,
            "phase_offset_ab_rad": sc.offsets.phase_offset_ab_rad,
            "reflection_phase_rad": sc.offsets.reflection_phase_rad,
        },
        "sweep": {
            "bandwidths_hz": cfg.sweep.bandwidths_hz,
            "trials": cfg.sweep.trials,
            "base_seed": cfg.sweep.base_seed,
            "report": cfg.sweep.report.iter().map(|p| p.label()).collect::<Vec<_>>(),
        },
        "profile": {
            "param": cfg.profile.param.label(),
            profile_range.0: profile_range.1,
            "points": cfg.profile.points,
            "in_distance": cfg.profile.in_distance,
            "seed": cfg.profile.seed,
        },
    });
    if let Some(g) = grid {
        root["grid"] = g;
    }
    root
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_object_gives_reference_values() {
        let cfg = parse_config_str("{}").unwrap();
        let sc = &cfg.scenario;
        assert_eq!(sc.carrier_freq_hz, 2e9);
        assert_eq!(sc.subcarrier_spacing_hz, 60e3);
        assert_relative_eq!(sc.offsets.clock_offset_ab_s, 0.67e-6);
        assert_relative_eq!(sc.offsets.phase_offset_ab_rad.to_degrees(), 10.0, max_relative = 1e-12);
        assert_relative_eq!(sc.offsets.reflection_phase_rad.to_degrees(), 20.0, max_relative = 1e-12);
        assert_eq!((sc.pos_a.x, sc.pos_a.y, sc.pos_r.y), (50.0, 50.0, -10.0));
        assert!(cfg.warnings.is_empty());
    }

    #[test]
    fn units_are_converted() {
        let cfg = parse_config_str(
            r#"{"ofdm": {"carrier_freq_ghz": 3.5, "tx_power_dbm": 20, "noise_psd_dbm_per_hz": -174},
                "offsets": {"clock_offset_ab_ns": 5}}"#,
        )
        .unwrap();
        assert_relative_eq!(cfg.scenario.carrier_freq_hz, 3.5e9);
        assert_relative_eq!(cfg.scenario.tx_power_w, 0.1, max_relative = 1e-12);
        assert_relative_eq!(cfg.scenario.noise_psd_w_per_hz, 3.981e-21, max_relative = 1e-3);
        assert_relative_eq!(cfg.scenario.offsets.clock_offset_ab_s, 5e-9);
    }

    #[test]
    fn phase_is_normalized_with_warning() {
        let cfg = parse_config_str(r#"{"offsets": {"phase_offset_ab_deg": 370}}"#).unwrap();
        assert_relative_eq!(cfg.scenario.offsets.phase_offset_ab_rad.to_degrees(), 10.0, max_relative = 1e-9);
        assert_eq!(cfg.warnings.len(), 1);
    }

    #[test]
    fn rejects_with_field_paths() {
        let cases = [
            (r#"{"offsets": {"clock_offset_ab": 1}}"#, "offsets.clock_offset_ab", "missing unit"),
            (r#"{"ofdm": {"carrier_freq_thz": 1}}"#, "ofdm.carrier_freq_thz", "unknown field"),
            (r#"{"colour": 1}"#, "colour", "unknown field"),
            (r#"{"scenario": "scenario2_unknown_pos", "direction": "uni_ab"}"#, "direction", "bidirectional"),
            (r#"{"estimator": {"channel": "los", "delay_ar_known": true}}"#, "estimator.map", "two-path"),
        ];
        for (text, path, needle) in cases {
            match parse_config_str(text) {
                Err(Error::Config { path: p, message }) => {
                    assert_eq!(p, path, "{text}");
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn canonical_form_is_a_fixed_point() {
        let text = r#"{"scenario": "scenario2_unknown_pos", "offsets": {"phase_offset_ab_deg": 370},
                       "grid": {"delay_points": 17}, "sweep": {"bandwidths_mhz": [24, 96], "report": ["delay_ab"]},
                       "ofdm": {"pilots": {"qpsk_seed": 4}}}"#;
        let once = to_canonical_json(&parse_config_str(text).unwrap());
        let cfg2 = parse_config_value(once.clone()).unwrap();
        let twice = to_canonical_json(&cfg2);
        assert_eq!(once, twice);
        assert_eq!(cfg2.scenario.pilots, PilotKind::Qpsk { seed: 4 });
    }
}
