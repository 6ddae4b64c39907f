//! Deterministic coarse-to-fine grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One search axis on the coarse level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self> {
        let axis = Self { lower, upper, points };
        axis.validate()?;
        Ok(axis)
    }

    /// Smallest odd-count axis on the lattice `k·step` covering
    /// `[center - half_width, center + half_width]`.
    pub fn on_lattice(center: f64, half_width: f64, step: f64) -> Result<Self> {
        let lo = ((center - half_width) / step).floor();
        let mut hi = ((center + half_width) / step).ceil();
        let mut points = (hi - lo).round() as usize + 1;
        if points % 2 == 0 {
            hi += 1.0;
            points += 1;
        }
        Self::new(lo * step, hi * step, points.max(3))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite()) || self.lower >= self.upper {
            return Err(Error::Domain(format!(
                "grid axis bounds must be finite with lower < upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        if self.points < 3 {
            return Err(Error::Domain(format!("grid axis needs at least 3 points, got {}", self.points)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points).map(|i| self.lower + i as f64 * step).collect()
    }
}

/// Coarse grid plus the refinement schedule.
///
/// After the coarse pass each level re-grids every axis around the incumbent
/// with the step multiplied by `shrink_factor`, spanning `refine_span_steps`
/// previous steps on either side. The incumbent is always an exact grid point
/// of the next level, so the minimum never increases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    pub refinement_levels: usize,
    pub shrink_factor: f64,
    #[serde(default = "default_span")]
    pub refine_span_steps: f64,
    /// Distinct coarse minima refined independently; the best refined one wins.
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    /// Shifts tried after refinement; see [`Hop`].
    #[serde(default)]
    pub hops: Vec<Hop>,
    #[serde(default)]
    pub hop_rounds: usize,
    /// Times a refinement level may re-centre its box on a better point
    /// found on the box face before moving to the next level.
    #[serde(default)]
    pub recentre_rounds: usize,
}

/// A shift of one or more axes that leaves the fast part of the loss
/// unchanged, such as a whole carrier period on the delay axes.
///
/// After refinement the incumbent is moved by every multiple of `period`
/// that keeps the shifted axes inside the coarse box; if one of them is
/// lower, refinement restarts from there. Otherwise the two adjacent shifts
/// are refined and the better one is taken if it beats the incumbent, after
/// which the shift keeps doubling in that direction while it improves.
/// Rounds over all hops repeat until none helps or `hop_rounds` is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub axes: Vec<usize>,
    pub period: f64,
}

fn default_candidates() -> usize {
    1
}

fn default_span() -> f64 {
    2.0
}

impl GridSpec {
    pub const DEFAULT_LEVELS: usize = 3;
    pub const DEFAULT_SHRINK: f64 = 0.1;

    pub fn new(axes: Vec<Axis>, refinement_levels: usize, shrink_factor: f64) -> Result<Self> {
        let spec = Self {
            axes,
            refinement_levels,
            shrink_factor,
            refine_span_steps: default_span(),
            candidates: default_candidates(),
            hops: Vec::new(),
            hop_rounds: 0,
            recentre_rounds: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Domain("grid needs at least one axis".into()));
        }
        for a in &self.axes {
            a.validate()?;
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::Domain(format!("shrink factor must be in (0, 1), got {}", self.shrink_factor)));
        }
        if self.candidates == 0 {
            return Err(Error::Domain("grid search needs at least one candidate".into()));
        }
        for h in &self.hops {
            if h.axes.is_empty() || h.axes.iter().any(|&a| a >= self.axes.len()) || !(h.period > 0.0 && h.period.is_finite()) {
                return Err(Error::Domain(format!("invalid hop on axes {:?} with period {}", h.axes, h.period)));
            }
        }
        if !(self.refine_span_steps >= 1.0) {
            return Err(Error::Domain(format!(
                "refinement span must be at least one step, got {}",
                self.refine_span_steps
            )));
        }
        Ok(())
    }

    /// Step sizes after the last refinement level.
    pub fn final_cell_sizes(&self) -> Vec<f64> {
        let k = self.shrink_factor.powi(self.refinement_levels as i32);
        self.axes.iter().map(|a| a.step() * k).collect()
    }

    /// Points evaluated on the coarse level.
    pub fn coarse_size(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }
}

/// A scalar loss over a box of real coordinates.
pub trait Objective: Sync {
    fn eval(&self, point: &[f64]) -> f64;

    /// Evaluates the loss along the last axis with the leading coordinates
    /// fixed. Overriding this lets an objective reuse work that does not
    /// depend on the last coordinate.
    fn eval_line(&self, prefix: &[f64], last: &[f64], out: &mut [f64]) {
        let mut point = prefix.to_vec();
        point.push(0.0);
        for (x, o) in last.iter().zip(out.iter_mut()) {
            *point.last_mut().unwrap() = *x;
            *o = self.eval(&point);
        }
    }

    /// Optionally precomputes whatever makes evaluating one level's grid
    /// cheaper. The evaluator must return exactly what `eval_line` would.
    fn prepare_level<'a>(&'a self, _axes: &'a [Vec<f64>]) -> Option<Box<dyn LevelEvaluator + 'a>> {
        None
    }
}

/// Loss lines on a fixed grid, addressed by index.
pub trait LevelEvaluator: Sync {
    /// Fills `out` along the last axis for the leading indices `prefix`.
    fn eval_line(&self, prefix: &[usize], out: &mut [f64]);
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for F {
    fn eval(&self, point: &[f64]) -> f64 {
        self(point)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub argmin: Vec<f64>,
    pub value: f64,
    /// Grid step of each axis on the last level.
    pub cell_sizes: Vec<f64>,
    /// Best value after each level, coarse first.
    pub level_minima: Vec<f64>,
    /// Whether the coarse minimum sat on the edge of an axis.
    pub coarse_on_boundary: Vec<bool>,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    index: usize,
}

impl Best {
    fn key(&self) -> (f64, usize) {
        (if self.value.is_nan() { f64::INFINITY } else { self.value }, self.index)
    }

    fn better(self, other: Best) -> Best {
        let (a, b) = (self.key(), other.key());
        if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
            other
        } else {
            self
        }
    }
}

const NONE: Best = Best {
    value: f64::INFINITY,
    index: usize::MAX,
};

/// Minimizes `objective` over the grid. Ties go to the lexicographically
/// smallest index, so results do not depend on evaluation order.
///
/// With several candidates, the coarse level keeps the best points that lie
/// outside each other's refinement window, refines each of them, and
/// returns the best refined one. `level_minima` then holds the best value
/// over all candidates at each level; improvements found by hops are folded
/// into the last entry.
pub fn grid_search<O: Objective + ?Sized>(objective: &O, spec: &GridSpec) -> Result<SearchOutcome> {
    spec.validate()?;
    let coarse: Vec<Vec<f64>> = spec.axes.iter().map(|a| a.values()).collect();
    let exclusion = spec.refine_span_steps.ceil() as usize;

    let lines = search_lines(objective, &coarse, spec.candidates > 1);
    let mut evaluations = coarse.iter().map(Vec::len).product::<usize>();
    let starts = distinct_minima(&lines, &coarse, spec.candidates, exclusion);
    if starts.is_empty() || !starts[0].value.is_finite() {
        return Err(Error::Numeric("objective has no finite value on level 0".into()));
    }

    let mut best: Option<Refined> = None;
    let mut coarse_on_boundary = Vec::new();
    let mut level_minima = vec![f64::INFINITY; spec.refinement_levels + 1];
    for start in &starts {
        let idx = unflatten(start.index, &coarse);
        let point: Vec<f64> = idx.iter().zip(&coarse).map(|(&i, v)| v[i]).collect();
        let refined = refine(objective, spec, point, start.value, &mut evaluations)?;
        for (m, v) in level_minima.iter_mut().zip(&refined.minima) {
            *m = m.min(*v);
        }
        if best.as_ref().map_or(true, |b| refined.value < b.value) {
            coarse_on_boundary = idx.iter().zip(&coarse).map(|(&i, v)| i == 0 || i + 1 == v.len()).collect();
            best = Some(refined);
        }
    }
    let mut best = best.unwrap();

    for _ in 0..spec.hop_rounds {
        let mut moved = false;
        for hop in &spec.hops {
            let (mut lo, mut hi) = (i64::MIN, i64::MAX);
            for &d in &hop.axes {
                let x = best.point[d];
                lo = lo.max(((spec.axes[d].lower - x) / hop.period).ceil() as i64);
                hi = hi.min(((spec.axes[d].upper - x) / hop.period).floor() as i64);
            }
            let origin = best.point.clone();
            let shift = |p: &mut Vec<f64>, k: i64| {
                for &d in &hop.axes {
                    p[d] = origin[d] + k as f64 * hop.period;
                }
            };
            let shifted = (lo..=hi)
                .into_par_iter()
                .filter(|&k| k != 0)
                .map_init(
                    || origin.clone(),
                    |p, k| {
                        shift(p, k);
                        Best {
                            value: objective.eval(p),
                            index: (k - lo) as usize,
                        }
                    },
                )
                .reduce(|| NONE, Best::better);
            evaluations += (hi - lo).max(0) as usize;
            if shifted.value < best.value {
                let mut point = origin.clone();
                shift(&mut point, shifted.index as i64 + lo);
                best = refine(objective, spec, point, shifted.value, &mut evaluations)?;
                moved = true;
                continue;
            }
            // a shifted point still carries the slow coordinates tuned to the
            // old well, so compare the adjacent wells after refining them
            let refined_at = |k: i64, evaluations: &mut usize| -> Result<Option<Refined>> {
                if k == 0 || k < lo || k > hi {
                    return Ok(None);
                }
                let mut point = origin.clone();
                shift(&mut point, k);
                let value = objective.eval(&point);
                *evaluations += 1;
                if !value.is_finite() {
                    return Ok(None);
                }
                refine(objective, spec, point, value, evaluations).map(Some)
            };
            let mut neighbour: Option<(i64, Refined)> = None;
            for k in [-1, 1] {
                if let Some(r) = refined_at(k, &mut evaluations)? {
                    if r.value < neighbour.as_ref().map_or(best.value, |n| n.1.value) {
                        neighbour = Some((k, r));
                    }
                }
            }
            // keep doubling the shift while it pays off
            while let Some((k, _)) = &neighbour {
                let next = 2 * *k;
                match refined_at(next, &mut evaluations)? {
                    Some(r) if r.value < neighbour.as_ref().unwrap().1.value => neighbour = Some((next, r)),
                    _ => break,
                }
            }
            let neighbour = neighbour.map(|n| n.1);
            if let Some(n) = neighbour {
                best = n;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    if let Some(last) = level_minima.last_mut() {
        *last = last.min(best.value);
    }

    Ok(SearchOutcome {
        argmin: best.point,
        value: best.value,
        cell_sizes: best.steps,
        level_minima,
        coarse_on_boundary,
        evaluations,
    })
}

struct Refined {
    point: Vec<f64>,
    value: f64,
    steps: Vec<f64>,
    minima: Vec<f64>,
}

/// Runs the refinement levels around a coarse-level point.
fn refine<O: Objective + ?Sized>(
    objective: &O,
    spec: &GridSpec,
    mut point: Vec<f64>,
    mut value: f64,
    evaluations: &mut usize,
) -> Result<Refined> {
    let half_points = (spec.refine_span_steps / spec.shrink_factor).round().max(1.0) as usize;
    let mut steps: Vec<f64> = spec.axes.iter().map(|a| a.step()).collect();
    let mut minima = vec![value];
    let box_around = |point: &[f64], steps: &[f64]| -> Vec<Vec<f64>> {
        point
            .iter()
            .zip(steps)
            .map(|(&p, &step)| {
                (0..=2 * half_points)
                    .map(|i| if i == half_points { p } else { p + (i as f64 - half_points as f64) * step })
                    .collect()
            })
            .collect()
    };
    for level in 1..=spec.refinement_levels {
        steps.iter_mut().for_each(|s| *s *= spec.shrink_factor);
        let mut rounds = 0;
        loop {
            let levels = box_around(&point, &steps);
            let found = search_lines(objective, &levels, false).into_iter().fold(NONE, Best::better);
            *evaluations += levels.iter().map(Vec::len).product::<usize>();
            if !found.value.is_finite() {
                return Err(Error::Numeric(format!("objective has no finite value on level {level}")));
            }
            let improved = found.value < value;
            if found.value <= value {
                value = found.value;
                let idx = unflatten(found.index, &levels);
                point = idx.iter().zip(&levels).map(|(&i, v)| v[i]).collect();
                let on_face = idx.iter().any(|&i| i == 0 || i == 2 * half_points);
                if improved && on_face && rounds < spec.recentre_rounds {
                    rounds += 1;
                    continue;
                }
            }
            break;
        }
        minima.push(value);
    }
    Ok(Refined {
        point,
        value,
        steps,
        minima,
    })
}

fn unflatten(flat: usize, axes: &[Vec<f64>]) -> Vec<usize> {
    let mut idx = vec![0; axes.len()];
    let mut rem = if flat == usize::MAX { 0 } else { flat };
    for d in (0..axes.len()).rev() {
        let n = axes[d].len();
        idx[d] = rem % n;
        rem /= n;
    }
    idx
}

/// Up to `count` line minima in increasing order, each outside the
/// `exclusion`-step neighbourhood of every better one.
fn distinct_minima(lines: &[Best], axes: &[Vec<f64>], count: usize, exclusion: usize) -> Vec<Best> {
    if count == 1 {
        return vec![lines.iter().copied().fold(NONE, Best::better)];
    }
    let mut order: Vec<Best> = lines.iter().copied().filter(|b| b.value.is_finite()).collect();
    order.sort_by(|a, b| a.key().partial_cmp(&b.key()).unwrap());
    let mut kept: Vec<(Best, Vec<usize>)> = Vec::with_capacity(count);
    for b in order {
        let idx = unflatten(b.index, axes);
        let near = kept
            .iter()
            .any(|(_, k)| k.iter().zip(&idx).all(|(&x, &y)| x.abs_diff(y) <= exclusion));
        if !near {
            kept.push((b, idx));
            if kept.len() == count {
                break;
            }
        }
    }
    kept.into_iter().map(|(b, _)| b).collect()
}

/// Best point of every line along the last axis, in prefix order. With
/// `local_minima` each line also reports its other local minima.
fn search_lines<O: Objective + ?Sized>(objective: &O, axes: &[Vec<f64>], local_minima: bool) -> Vec<Best> {
    let dims = axes.len();
    let last = &axes[dims - 1];
    let prefix_count: usize = axes[..dims - 1].iter().map(Vec::len).product();
    let fast = objective.prepare_level(axes);

    let per_line = (0..prefix_count).into_par_iter().map_init(
        || (vec![0.0; dims - 1], vec![0; dims - 1], vec![0.0; last.len()]),
        |(prefix, prefix_idx, out), p| {
            let mut rem = p;
            for d in (0..dims - 1).rev() {
                let n = axes[d].len();
                prefix_idx[d] = rem % n;
                prefix[d] = axes[d][rem % n];
                rem /= n;
            }
            match &fast {
                Some(f) => f.eval_line(prefix_idx, out),
                None => objective.eval_line(prefix, last, out),
            }
            let at = |j: usize| Best {
                value: out[j],
                index: p * last.len() + j,
            };
            let best = (0..out.len()).map(at).fold(NONE, Best::better);
            let mut found = vec![best];
            if local_minima {
                let key = |j: usize| at(j).key().0;
                for j in 0..out.len() {
                    let left = j == 0 || key(j) < key(j - 1);
                    let right = j + 1 == out.len() || key(j) <= key(j + 1);
                    if left && right && j + p * last.len() != best.index && out[j].is_finite() {
                        found.push(at(j));
                    }
                }
            }
            found
        },
    );
    per_line.flatten().collect()
}
