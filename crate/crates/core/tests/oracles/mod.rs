//! Independent reference computations used by the integration tests.
//!
//! Nothing here calls into the compressed likelihood or the analytic
//! derivatives. Columns are rebuilt from the signal model directly.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use phasecal::channel::{ChannelKind, DirectionMode, ModelParams, OfdmConfig, PilotSequence};

/// `s[n] · exp(-j2π(f_c + nΔf) delay)` on the centered grid.
pub fn delayed_pilots(cfg: &OfdmConfig, pilots: &PilotSequence, delay_s: f64) -> Vec<Complex64> {
    let half = (cfg.num_subcarriers() / 2) as f64;
    pilots
        .symbols
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let f = cfg.carrier_freq_hz() + (i as f64 - half) * cfg.subcarrier_spacing_hz();
            s * Complex64::from_polar(1.0, -TAU * f * delay_s)
        })
        .collect()
}

/// Unit-gain signal columns at a hypothesis with the phase offset removed.
/// Each column multiplies one real path gain; the whole vector carries a
/// common `exp(-jδφ)`.
pub fn model_columns(
    cfg: &OfdmConfig,
    channel: ChannelKind,
    direction: DirectionMode,
    pilots_a: &PilotSequence,
    pilots_b: &PilotSequence,
    delay_ab_s: f64,
    clock_offset_s: f64,
    delay_ar_s: f64,
    reflection_phase_rad: f64,
) -> Vec<Vec<Complex64>> {
    let stack = |ab: Vec<Complex64>, ba: Vec<Complex64>| {
        let mut v = ab;
        if direction == DirectionMode::Bidirectional {
            v.extend(ba.iter().map(|x| x.conj()));
        }
        v
    };
    let los = stack(
        delayed_pilots(cfg, pilots_a, delay_ab_s + clock_offset_s),
        delayed_pilots(cfg, pilots_b, delay_ab_s - clock_offset_s),
    );
    let mut cols = vec![los];
    if channel == ChannelKind::TwoPath {
        let rot = Complex64::from_polar(1.0, -reflection_phase_rad);
        let ab: Vec<_> = delayed_pilots(cfg, pilots_a, delay_ar_s + clock_offset_s).iter().map(|x| x * rot).collect();
        let ba: Vec<_> = delayed_pilots(cfg, pilots_b, delay_ar_s - clock_offset_s).iter().map(|x| x * rot).collect();
        cols.push(stack(ab, ba));
    }
    cols
}

/// `min_β ‖e^{jφ} y − C β‖²` over real `β`, via SVD on the real-stacked system.
pub fn residual_at_phase(y: &[Complex64], cols: &[Vec<Complex64>], phase: f64) -> f64 {
    let m = y.len();
    let k = cols.len();
    let rot = Complex64::from_polar(1.0, phase);
    let a = DMatrix::from_fn(2 * m, k, |r, c| {
        let z = cols[c][r % m];
        if r < m {
            z.re
        } else {
            z.im
        }
    });
    let b = DVector::from_fn(2 * m, |r, _| {
        let z = rot * y[r % m];
        if r < m {
            z.re
        } else {
            z.im
        }
    });
    let x = a.clone().svd(true, true).solve(&b, 1e-14).expect("svd solve");
    (b - a * x).norm_squared()
}

/// Brute-force minimum over the phase offset: a 720-point scan followed by a
/// golden-section search in the best bracket.
pub fn brute_force_loss(y: &[Complex64], cols: &[Vec<Complex64>]) -> (f64, f64) {
    let f = |p: f64| residual_at_phase(y, cols, p);
    let steps = 720;
    let h = TAU / steps as f64;
    let (best, _) = (0..steps)
        .map(|i| (i, f(i as f64 * h)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let (mut lo, mut hi) = ((best as f64 - 1.0) * h, (best as f64 + 1.0) * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let p = 0.5 * (lo + hi);
    (f(p), p.rem_euclid(PI))
}

/// Richardson-extrapolated central difference of a vector-valued function.
pub fn richardson<F>(f: F, x: f64, h: f64) -> Vec<Complex64>
where
    F: Fn(f64) -> Vec<Complex64>,
{
    let central = |h: f64| -> Vec<Complex64> {
        let p = f(x + h);
        let m = f(x - h);
        p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    };
    let d1 = central(h);
    let d2 = central(h / 2.0);
    d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
}

/// Relative vector error `‖a − b‖ / ‖b‖`.
pub fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Sets one physical parameter of `p` (gains and phases included).
pub fn with_param(p: &ModelParams, param: phasecal::estimators::Param, value: f64) -> ModelParams {
    use phasecal::estimators::Param::*;
    let mut q = *p;
    match param {
        DelayAb => q.delay_ab_s = value,
        ClockOffsetAb => q.clock_offset_ab_s = value,
        PhaseOffsetAb => q.phase_offset_ab_rad = value,
        DelayAr => q.delay_ar_s = value,
        ReflectionPhase => q.reflection_phase_rad = value,
        GainAb => q.gain_ab = value,
        GainAr => q.gain_ar = value,
    }
    q
}
