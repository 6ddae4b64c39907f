//! Maximum-likelihood calibration estimators.
//!
//! Each estimator minimizes a compressed loss in which the real path gains
//! and the common phase offset have been eliminated in closed form, leaving
//! a low-dimensional grid search over delays, the clock offset and the
//! reflection rotation.

pub mod compress;
pub mod grid;
pub mod nllf;
pub mod params;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compress::{compress, recover_phase_offset, Compressed, NormalMatrix, PhaseRecovery};
pub use grid::{grid_search, Axis, GridSpec, Hop, LevelEvaluator, Objective, SearchOutcome};
pub use nllf::{
    nllf_bi_los, nllf_bi_twopath, nllf_uni_los, nllf_uni_twopath, recover_gains, reflection_phase_from_rotation,
    reflection_rotation, Hypothesis, LikelihoodModel,
};
pub use params::{MapKnowledge, Param, ParamValue, ParameterVariant, ParameterVector};

use crate::channel::{ChannelKind, DirectionMode, ModelParams, ObservationSet, OfdmConfig};
use crate::crlb;
use crate::error::{Error, Result};
use nllf::PathStats;

/// Values the estimator treats as known.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub delay_ab_s: Option<f64>,
    pub delay_ar_s: Option<f64>,
    pub reflection_phase_rad: Option<f64>,
}

impl Priors {
    /// Exactly what `variant` and `map` declare as known, taken from `truth`.
    pub fn from_truth(variant: ParameterVariant, map: MapKnowledge, truth: &ModelParams) -> Self {
        Self {
            delay_ab_s: variant.positions_known().then_some(truth.delay_ab_s),
            delay_ar_s: map.delay_ar_known.then_some(truth.delay_ar_s),
            reflection_phase_rad: map.reflection_phase_known.then_some(truth.reflection_phase_rad),
        }
    }
}

/// Which estimator to run and what it may assume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub variant: ParameterVariant,
    pub map: MapKnowledge,
    pub priors: Priors,
}

impl EstimatorSpec {
    pub fn new(variant: ParameterVariant, map: MapKnowledge, priors: Priors) -> Result<Self> {
        variant.check_map(map)?;
        let missing = |what: &str| Error::Model(format!("{variant:?} needs a known {what}"));
        if variant.positions_known() && priors.delay_ab_s.is_none() {
            return Err(missing("line-of-sight delay"));
        }
        if map.delay_ar_known && priors.delay_ar_s.is_none() {
            return Err(missing("reflection delay"));
        }
        if map.reflection_phase_known && priors.reflection_phase_rad.is_none() {
            return Err(missing("reflection phase"));
        }
        Ok(Self { variant, map, priors })
    }

    pub fn from_truth(variant: ParameterVariant, map: MapKnowledge, truth: &ModelParams) -> Result<Self> {
        Self::new(variant, map, Priors::from_truth(variant, map, truth))
    }

    pub fn direction(&self) -> DirectionMode {
        if self.variant.positions_known() {
            DirectionMode::UniAb
        } else {
            DirectionMode::Bidirectional
        }
    }

    /// Search coordinates, in canonical order with the rotation last.
    pub fn search_axes(&self) -> Vec<SearchAxis> {
        let mut axes = Vec::with_capacity(4);
        if !self.variant.positions_known() {
            axes.push(SearchAxis::DelayAb);
        }
        axes.push(SearchAxis::ClockOffset);
        if self.variant.channel() == ChannelKind::TwoPath {
            if !self.map.delay_ar_known {
                axes.push(SearchAxis::DelayAr);
            }
            if !self.map.reflection_phase_known {
                axes.push(SearchAxis::Rotation);
            }
        }
        axes
    }
}

/// Coordinate searched by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchAxis {
    DelayAb,
    ClockOffset,
    DelayAr,
    /// Reflection rotation relative to the line-of-sight path.
    Rotation,
}

impl SearchAxis {
    pub fn param(self) -> Param {
        match self {
            SearchAxis::DelayAb => Param::DelayAb,
            SearchAxis::ClockOffset => Param::ClockOffsetAb,
            SearchAxis::DelayAr => Param::DelayAr,
            SearchAxis::Rotation => Param::ReflectionPhase,
        }
    }
}

/// The compressed loss as a function of the search coordinates.
pub struct SearchObjective {
    model: LikelihoodModel,
    axes: Vec<SearchAxis>,
    priors: Priors,
}

impl SearchObjective {
    pub fn new(obs: &ObservationSet, cfg: &OfdmConfig, spec: &EstimatorSpec) -> Result<Self> {
        if spec.direction() == DirectionMode::Bidirectional && obs.direction_mode != DirectionMode::Bidirectional {
            return Err(Error::config(
                "estimator.positions_known",
                "unknown access-point positions need bidirectional observations",
            ));
        }
        Ok(Self {
            model: LikelihoodModel::new(obs, cfg, spec.variant.channel(), spec.direction())?,
            axes: spec.search_axes(),
            priors: spec.priors,
        })
    }

    pub fn axes(&self) -> &[SearchAxis] {
        &self.axes
    }

    pub fn model(&self) -> &LikelihoodModel {
        &self.model
    }

    /// Maps search coordinates to a physical hypothesis.
    pub fn hypothesis(&self, point: &[f64]) -> Hypothesis {
        let mut delay_ab = self.priors.delay_ab_s.unwrap_or(0.0);
        let mut clock = 0.0;
        let mut delay_ar = self.priors.delay_ar_s.unwrap_or(delay_ab);
        let mut rotation = None;
        for (axis, &x) in self.axes.iter().zip(point) {
            match axis {
                SearchAxis::DelayAb => delay_ab = x,
                SearchAxis::ClockOffset => clock = x,
                SearchAxis::DelayAr => delay_ar = x,
                SearchAxis::Rotation => rotation = Some(x),
            }
        }
        if self.priors.delay_ar_s.is_none() && !self.axes.contains(&SearchAxis::DelayAr) {
            delay_ar = delay_ab;
        }
        let rotation = rotation.unwrap_or_else(|| match self.priors.reflection_phase_rad {
            Some(phi) => reflection_rotation(delay_ab, delay_ar, phi, self.model.config().carrier_freq_hz()),
            None => 0.0,
        });
        Hypothesis {
            delay_ab_s: delay_ab,
            clock_offset_ab_s: clock,
            delay_ar_s: delay_ar,
            rotation_rad: rotation,
        }
    }
}

impl SearchObjective {
    /// A reflected path is never shorter than the direct one.
    fn excluded(&self, delay_ab_s: f64, delay_ar_s: f64) -> bool {
        self.model.channel() == ChannelKind::TwoPath && delay_ar_s < delay_ab_s
    }
}

impl Objective for SearchObjective {
    fn eval(&self, point: &[f64]) -> f64 {
        let h = self.hypothesis(point);
        if self.excluded(h.delay_ab_s, h.delay_ar_s) {
            return f64::INFINITY;
        }
        self.model.loss(&h)
    }

    fn eval_line(&self, prefix: &[f64], last: &[f64], out: &mut [f64]) {
        if self.axes.last() == Some(&SearchAxis::Rotation) {
            let mut point = prefix.to_vec();
            point.push(0.0);
            let h = self.hypothesis(&point);
            if self.excluded(h.delay_ab_s, h.delay_ar_s) {
                out.fill(f64::INFINITY);
                return;
            }
            self.model.loss_over_rotation(&h, last, out);
        } else {
            let mut point = prefix.to_vec();
            point.push(0.0);
            for (x, o) in last.iter().zip(out.iter_mut()) {
                *point.last_mut().unwrap() = *x;
                *o = self.eval(&point);
            }
        }
    }

    fn prepare_level<'a>(&'a self, axes: &'a [Vec<f64>]) -> Option<Box<dyn LevelEvaluator + 'a>> {
        Some(Box::new(LevelTables::new(self, axes)))
    }
}

type Pair = (Complex64, Complex64);

/// Where one physical coordinate comes from on a level grid.
#[derive(Clone, Copy)]
enum Source {
    Axis(usize),
    Fixed,
}

impl Source {
    fn index(self, idx: &[usize]) -> usize {
        match self {
            Source::Axis(d) => idx[d],
            Source::Fixed => 0,
        }
    }
}

/// Every loss factor of one level, tabulated over pairs of coordinates so a
/// grid point costs a handful of complex products instead of inner products
/// over all subcarriers.
struct LevelTables<'a> {
    objective: &'a SearchObjective,
    axes: &'a [Vec<f64>],
    delay: Source,
    clock: usize,
    delay_ar: Source,
    /// The reflection delay follows the line-of-sight delay.
    ar_tracks_delay: bool,
    clock_len: usize,
    ar_len: usize,
    forward: Vec<Pair>,
    reverse: Vec<Pair>,
    reflection: Vec<Pair>,
    overlap: Vec<Pair>,
    /// Rotation implied by a known reflection phase, per delay pair.
    rotation: Vec<f64>,
    /// Delay pairs with the reflection ahead of the direct path.
    excluded: Vec<bool>,
}

impl<'a> LevelTables<'a> {
    fn new(objective: &'a SearchObjective, axes: &'a [Vec<f64>]) -> Self {
        let mut delay = Source::Fixed;
        let mut clock = 0;
        let mut delay_ar = Source::Fixed;
        for (d, kind) in objective.axes.iter().enumerate() {
            match kind {
                SearchAxis::DelayAb => delay = Source::Axis(d),
                SearchAxis::ClockOffset => clock = d,
                SearchAxis::DelayAr => delay_ar = Source::Axis(d),
                SearchAxis::Rotation => {}
            }
        }
        let fixed_delay = [objective.priors.delay_ab_s.unwrap_or(0.0)];
        let delays: &[f64] = match delay {
            Source::Axis(d) => &axes[d],
            Source::Fixed => &fixed_delay,
        };
        let ar_tracks_delay = objective.priors.delay_ar_s.is_none() && matches!(delay_ar, Source::Fixed);
        let fixed_ar = [objective.priors.delay_ar_s.unwrap_or(0.0)];
        let ars: &[f64] = match (delay_ar, ar_tracks_delay) {
            (Source::Axis(d), _) => &axes[d],
            (Source::Fixed, true) => delays,
            (Source::Fixed, false) => &fixed_ar,
        };
        let clocks = &axes[clock];
        let model = &objective.model;
        let two_path = model.channel() == ChannelKind::TwoPath;

        let table = |rows: &[f64], cols: &[f64], f: &(dyn Fn(f64, f64) -> Pair + Sync)| -> Vec<Pair> {
            (0..rows.len() * cols.len())
                .into_par_iter()
                .map(|k| f(rows[k / cols.len()], cols[k % cols.len()]))
                .collect()
        };
        let forward = table(delays, clocks, &|t, c| model.forward_los(t + c));
        let reverse = table(delays, clocks, &|t, c| model.reverse_los(t - c));
        let mut excluded = Vec::new();
        if two_path {
            for &t in delays {
                for &r in ars {
                    excluded.push(objective.excluded(t, r));
                }
            }
        }
        let (reflection, overlap, rotation) = if two_path {
            let reflection = table(ars, clocks, &|r, c| model.reflection_inner(r, c));
            let overlap = table(delays, ars, &|t, r| model.path_overlap(r - t));
            let rotation = match objective.priors.reflection_phase_rad {
                Some(phi) if !objective.axes.contains(&SearchAxis::Rotation) => {
                    let fc = model.config().carrier_freq_hz();
                    let mut rot = Vec::with_capacity(delays.len() * ars.len());
                    for &t in delays {
                        for &r in ars {
                            rot.push(reflection_rotation(t, r, phi, fc));
                        }
                    }
                    rot
                }
                _ => Vec::new(),
            };
            (reflection, overlap, rotation)
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };
        Self {
            objective,
            axes,
            delay,
            clock,
            delay_ar,
            ar_tracks_delay,
            clock_len: clocks.len(),
            ar_len: ars.len(),
            forward,
            reverse,
            reflection,
            overlap,
            rotation,
            excluded,
        }
    }

    /// Path statistics and rotation at a grid point, or `None` when the
    /// point is excluded.
    fn stats(&self, idx: &[usize]) -> Option<(PathStats, f64)> {
        let model = &self.objective.model;
        let t = self.delay.index(idx);
        let c = idx[self.clock];
        let forward = self.forward[t * self.clock_len + c];
        let reverse = self.reverse[t * self.clock_len + c];
        if model.channel() == ChannelKind::Los {
            let zero = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            return Some((model.assemble(forward, reverse, zero, zero), 0.0));
        }
        let r = if self.ar_tracks_delay { t } else { self.delay_ar.index(idx) };
        if self.excluded[t * self.ar_len + r] {
            return None;
        }
        let stats = model.assemble(
            forward,
            reverse,
            self.reflection[r * self.clock_len + c],
            self.overlap[t * self.ar_len + r],
        );
        let rotation = self.rotation.get(t * self.ar_len + r).copied().unwrap_or(0.0);
        Some((stats, rotation))
    }
}

impl LevelEvaluator for LevelTables<'_> {
    fn eval_line(&self, prefix: &[usize], out: &mut [f64]) {
        let dims = self.axes.len();
        let mut idx = prefix.to_vec();
        idx.push(0);
        let model = &self.objective.model;
        if self.objective.axes.last() == Some(&SearchAxis::Rotation) {
            let Some((stats, _)) = self.stats(&idx) else {
                out.fill(f64::INFINITY);
                return;
            };
            for (r, o) in self.axes[dims - 1].iter().zip(out.iter_mut()) {
                *o = model.compress_stats(&stats, *r).loss;
            }
        } else {
            for (j, o) in out.iter_mut().enumerate() {
                idx[dims - 1] = j;
                *o = match self.stats(&idx) {
                    Some((stats, rotation)) => model.compress_stats(&stats, rotation).loss,
                    None => f64::INFINITY,
                };
            }
        }
    }
}

/// Knobs for the default search grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Half-width of every delay window, in units of `1/W`.
    pub delay_half_width_inv_bw: f64,
    /// Coarse points across a delay window; 33 gives a `1/(8W)` step.
    pub delay_points: usize,
    /// Coarse points over the half circle of rotations; 90 gives 2°.
    pub rotation_points: usize,
    /// Sample delays whose loss oscillates with the carrier finely enough
    /// to see every carrier cycle.
    pub resolve_carrier: bool,
    /// Fixed number of refinement levels, or `None` to refine until the
    /// final cell is a quarter of the bound on the searched delays.
    pub refinement_levels: Option<usize>,
    pub shrink_factor: f64,
    /// Distinct coarse minima refined independently.
    #[serde(default = "one")]
    pub candidates: usize,
    /// Rounds of carrier-period hops on the delay axes after refinement;
    /// only used with `resolve_carrier`.
    #[serde(default = "default_hop_rounds")]
    pub hop_rounds: usize,
    /// Re-centrings allowed per refinement level, so a level can follow a
    /// narrow valley past its box.
    #[serde(default = "default_recentre_rounds")]
    pub recentre_rounds: usize,
}

fn default_recentre_rounds() -> usize {
    32
}

fn default_hop_rounds() -> usize {
    16
}

fn one() -> usize {
    1
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            delay_half_width_inv_bw: 2.0,
            delay_points: 33,
            rotation_points: 90,
            resolve_carrier: true,
            refinement_levels: None,
            shrink_factor: GridSpec::DEFAULT_SHRINK,
            candidates: 1,
            hop_rounds: default_hop_rounds(),
            recentre_rounds: default_recentre_rounds(),
        }
    }
}

impl GridOptions {
    /// Lighter defaults for the four-dimensional search.
    pub fn coarse() -> Self {
        Self {
            delay_half_width_inv_bw: 1.0,
            delay_points: 17,
            rotation_points: 18,
            candidates: 8,
            ..Self::default()
        }
    }
}

/// Builds the default grid for `spec`, centered on `nominal` and aligned to
/// a fixed lattice so the nominal point is generally not a grid node.
pub fn default_grid(spec: &EstimatorSpec, cfg: &OfdmConfig, nominal: &ModelParams, opts: &GridOptions) -> Result<GridSpec> {
    if opts.delay_points < 3 || opts.rotation_points < 3 {
        return Err(Error::Domain("default grid needs at least 3 points per axis".into()));
    }
    if opts.candidates == 0 {
        return Err(Error::Domain("default grid needs at least one candidate".into()));
    }
    let w = cfg.bandwidth_hz();
    let fc = cfg.carrier_freq_hz();
    let half = opts.delay_half_width_inv_bw / w;
    let coarse_step = 2.0 * half / (opts.delay_points - 1) as f64;
    let axes_kind = spec.search_axes();
    let rotation_derived = spec.variant.channel() == ChannelKind::TwoPath && spec.map.reflection_phase_known;

    let mut axes = Vec::with_capacity(axes_kind.len());
    for a in &axes_kind {
        let axis = match a {
            SearchAxis::ClockOffset => Axis::on_lattice(nominal.clock_offset_ab_s, half, coarse_step)?,
            SearchAxis::DelayAb => {
                let step = if opts.resolve_carrier {
                    let ripple = if rotation_derived { 1.0 / (8.0 * fc) } else { 1.0 / (16.0 * fc) };
                    coarse_step.min(ripple)
                } else {
                    coarse_step
                };
                Axis::on_lattice(nominal.delay_ab_s, half, step)?
            }
            SearchAxis::DelayAr => {
                let step = if opts.resolve_carrier && rotation_derived {
                    coarse_step.min(1.0 / (8.0 * fc))
                } else {
                    coarse_step
                };
                Axis::on_lattice(nominal.delay_ar_s, half, step)?
            }
            SearchAxis::Rotation => {
                // shifting the rotation by π only flips the sign of the
                // reflection gain, so half the circle is enough
                let n = opts.rotation_points;
                Axis::new(0.0, PI * (n - 1) as f64 / n as f64, n)?
            }
        };
        axes.push(axis);
    }

    let levels = match opts.refinement_levels {
        Some(l) => l,
        None => {
            let snr = cfg.linear_snr(nominal.gain_ab);
            let bi = spec.direction() == DirectionMode::Bidirectional;
            let (clock_var, delay_var) = if bi {
                let (tau, dt, _) = crlb::closed_form_unknown_pos_los(cfg, snr);
                (dt, tau)
            } else {
                let (dt, _) = crlb::closed_form_known_pos_los(cfg, snr);
                (dt, dt)
            };
            let mut needed = GridSpec::DEFAULT_LEVELS;
            for (kind, axis) in axes_kind.iter().zip(&axes) {
                let target = match kind {
                    SearchAxis::ClockOffset | SearchAxis::DelayAr => 0.25 * clock_var.sqrt(),
                    SearchAxis::DelayAb => 0.25 * delay_var.sqrt(),
                    SearchAxis::Rotation => continue,
                };
                let ratio = axis.step() / target;
                if ratio > 1.0 {
                    let l = (ratio.ln() / (1.0 / opts.shrink_factor).ln()).ceil() as usize;
                    needed = needed.max(l);
                }
            }
            needed
        }
    };
    let mut grid = GridSpec::new(axes, levels, opts.shrink_factor)?;
    grid.candidates = opts.candidates;
    grid.recentre_rounds = opts.recentre_rounds;
    if opts.resolve_carrier && opts.hop_rounds > 0 {
        // half a carrier period flips both halves of the line-of-sight
        // column, which the common phase offset absorbs
        let period = if rotation_derived { 1.0 / fc } else { 0.5 / fc };
        let los = axes_kind.iter().position(|k| *k == SearchAxis::DelayAb);
        let refl = axes_kind.iter().position(|k| *k == SearchAxis::DelayAr);
        if let Some(t) = los {
            grid.hops.push(Hop { axes: vec![t], period });
            if let Some(r) = refl {
                grid.hops.push(Hop { axes: vec![t, r], period });
            }
        }
        if let (Some(r), true) = (refl, rotation_derived) {
            grid.hops.push(Hop { axes: vec![r], period });
        }
        grid.hop_rounds = opts.hop_rounds;
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// The normal matrix at the minimum was near-singular and regularized.
    pub degenerate: bool,
    pub negative_gain: bool,
    pub undefined_phase: bool,
    pub boundary_hit: bool,
}

/// Outcome of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub params: ParameterVector,
    pub nllf_at_min: f64,
    pub recovered_gains: Vec<f64>,
    pub recovered_phase_offset_rad: f64,
    pub phase_ambiguity_period_rad: f64,
    /// Final grid step per searched parameter.
    pub grid_cell_sizes: Vec<ParamValue>,
    pub level_minima: Vec<f64>,
    pub evaluations: usize,
    pub flags: EstimateFlags,
    pub warnings: Vec<String>,
}

impl EstimateResult {
    pub fn get(&self, param: Param) -> Option<f64> {
        self.params.get(param)
    }

    pub fn cell_size(&self, param: Param) -> Option<f64> {
        self.grid_cell_sizes.iter().find(|c| c.param == param).map(|c| c.value)
    }

    /// Period modulo which an estimate of `param` is identified.
    pub fn wrap_period(&self, param: Param) -> Option<f64> {
        match param {
            Param::PhaseOffsetAb => Some(self.phase_ambiguity_period_rad),
            Param::ReflectionPhase => Some(TAU),
            _ => None,
        }
    }
}

/// Runs the estimator described by `spec` on `obs` over `grid`.
pub fn estimate(obs: &ObservationSet, cfg: &OfdmConfig, spec: &EstimatorSpec, grid: &GridSpec) -> Result<EstimateResult> {
    let objective = SearchObjective::new(obs, cfg, spec)?;
    let axes = objective.axes().to_vec();
    if grid.axes.len() != axes.len() {
        return Err(Error::Dimension {
            expected: axes.len(),
            found: grid.axes.len(),
        });
    }

    let mut warnings = Vec::new();
    if spec.variant == ParameterVariant::UnknownPosTwoPath {
        warnings.push("four-dimensional two-path search is experimental and meant for coarse grids".to_string());
    }
    if spec.direction() == DirectionMode::UniAb && obs.y_ba.is_some() {
        warnings.push("B→A samples are ignored by known-position estimators".to_string());
    }
    for (kind, axis) in axes.iter().zip(&grid.axes) {
        match kind {
            SearchAxis::DelayAb if axis.upper < 0.0 => {
                warnings.push("line-of-sight delay window holds only negative delays".to_string())
            }
            SearchAxis::DelayAr => {
                let floor = spec.priors.delay_ab_s.unwrap_or(f64::NEG_INFINITY);
                let los_max = axes
                    .iter()
                    .zip(&grid.axes)
                    .find(|(k, _)| **k == SearchAxis::DelayAb)
                    .map(|(_, a)| a.upper)
                    .unwrap_or(floor);
                if axis.upper < los_max.max(floor) {
                    warnings.push("reflection delay window lies entirely below the line-of-sight delay".to_string());
                }
            }
            _ => {}
        }
    }

    let outcome = grid_search(&objective, grid)?;
    let mut h = objective.hypothesis(&outcome.argmin);
    let mut at_min = objective.model().evaluate(&h);
    if axes.contains(&SearchAxis::Rotation) && at_min.gains[0] * at_min.gains[1] < 0.0 {
        // both physical gains share a sign; pick that representative
        h.rotation_rad = (h.rotation_rad + PI).rem_euclid(TAU);
        at_min.gains[1] = -at_min.gains[1];
    }

    let mut flags = EstimateFlags {
        degenerate: at_min.degenerate,
        negative_gain: at_min.gains().iter().any(|g| *g < 0.0),
        undefined_phase: at_min.phase.undefined,
        boundary_hit: false,
    };
    for (kind, on_edge) in axes.iter().zip(&outcome.coarse_on_boundary) {
        if *on_edge && *kind != SearchAxis::Rotation {
            flags.boundary_hit = true;
            warnings.push(format!("coarse minimum on the edge of the {} window", kind.param()));
        }
    }
    if flags.degenerate {
        warnings.push("paths are not resolvable at the minimum; normal matrix regularized".to_string());
    }
    if flags.negative_gain {
        warnings.push("a recovered path gain is negative".to_string());
    }

    let fc = cfg.carrier_freq_hz();
    let mut values = Vec::new();
    for p in spec.variant.free_params(spec.map) {
        let v = match p {
            Param::DelayAb => h.delay_ab_s,
            Param::ClockOffsetAb => h.clock_offset_ab_s,
            Param::PhaseOffsetAb => at_min.phase.phase_rad,
            Param::DelayAr => h.delay_ar_s,
            Param::ReflectionPhase => reflection_phase_from_rotation(h.delay_ab_s, h.delay_ar_s, h.rotation_rad, fc),
            Param::GainAb => at_min.gains[0],
            Param::GainAr => at_min.gains[1],
        };
        values.push(v);
    }

    Ok(EstimateResult {
        params: ParameterVector::new(spec.variant, spec.map, &values)?,
        nllf_at_min: outcome.value,
        recovered_gains: at_min.gains().to_vec(),
        recovered_phase_offset_rad: at_min.phase.phase_rad,
        phase_ambiguity_period_rad: at_min.phase.ambiguity_period_rad,
        grid_cell_sizes: axes
            .iter()
            .zip(&outcome.cell_sizes)
            .map(|(k, &value)| ParamValue { param: k.param(), value })
            .collect(),
        level_minima: outcome.level_minima,
        evaluations: outcome.evaluations,
        flags,
        warnings,
    })
}
