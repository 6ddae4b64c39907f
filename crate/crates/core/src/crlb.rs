//! Fisher information and Cramér-Rao bounds for the calibration models.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{mean_ab, mean_ba, ChannelKind, DirectionMode, ModelParams, OfdmConfig, PilotSequence};
use crate::error::{Error, Result};
use crate::estimators::{MapKnowledge, Param, ParameterVariant};

/// Condition number above which the information matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Derivative of the stacked noiseless observation with respect to one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanDerivative {
    pub param: Param,
    pub vector: Vec<Complex64>,
}

fn carrier_ramp(cfg: &OfdmConfig) -> Vec<Complex64> {
    let fc = cfg.carrier_freq_hz();
    cfg.subcarrier_offsets_hz()
        .map(|f| Complex64::new(0.0, -2.0 * PI * (fc + f)))
        .collect()
}

fn scaled(d: &[Complex64], v: &[Complex64], sign: f64) -> Vec<Complex64> {
    d.iter().zip(v).map(|(d, v)| sign * d * v).collect()
}

fn times(v: &[Complex64], k: Complex64) -> Vec<Complex64> {
    v.iter().map(|x| k * x).collect()
}

fn add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn conj(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().map(|x| x.conj()).collect()
}

/// Analytic derivatives of the noiseless mean for the free parameters of
/// `variant`, in canonical order.
///
/// One-way observations use `μ_AB (+ μ_AR)`. Bidirectional observations use
/// `[μ_AB (+ μ_AR); conj(μ_BA (+ μ_BR))]`, so delay-like terms pick up sign
/// flips on the second block.
pub fn mean_derivatives(
    variant: ParameterVariant,
    truth: &ModelParams,
    cfg: &OfdmConfig,
    map: MapKnowledge,
    direction: DirectionMode,
    pilots_a: &PilotSequence,
    pilots_b: &PilotSequence,
) -> Result<Vec<MeanDerivative>> {
    variant.check_map(map)?;
    let channel = variant.channel();
    let d1 = carrier_ramp(cfg);
    let neg_j = Complex64::new(0.0, -1.0);
    let pos_j = Complex64::new(0.0, 1.0);

    let a = mean_ab(truth, channel, cfg, pilots_a);
    let a_los = a.los;
    let a_refl = a.reflection.unwrap_or_default();
    let bi = direction == DirectionMode::Bidirectional;
    let (b_los, b_refl) = if bi {
        let b = mean_ba(truth, channel, cfg, pilots_b);
        (conj(&b.los), b.reflection.map(|r| conj(&r)).unwrap_or_default())
    } else {
        (Vec::new(), Vec::new())
    };
    let two = channel == ChannelKind::TwoPath;
    let total = |l: &[Complex64], r: &[Complex64]| if two { add(l, r) } else { l.to_vec() };
    let a_tot = total(&a_los, &a_refl);
    let b_tot = if bi { total(&b_los, &b_refl) } else { Vec::new() };
    let zeros = vec![Complex64::new(0.0, 0.0); cfg.num_subcarriers()];
    let stack = |top: Vec<Complex64>, bottom: Vec<Complex64>| -> Vec<Complex64> {
        let mut v = top;
        if bi {
            v.extend(bottom);
        }
        v
    };

    let mut out = Vec::new();
    for p in variant.free_params(map) {
        let vector = match p {
            Param::DelayAb => stack(scaled(&d1, &a_los, 1.0), scaled(&d1, &b_los, -1.0)),
            Param::ClockOffsetAb => stack(scaled(&d1, &a_tot, 1.0), scaled(&d1, &b_tot, 1.0)),
            Param::PhaseOffsetAb => stack(times(&a_tot, neg_j), times(&b_tot, neg_j)),
            Param::DelayAr => stack(scaled(&d1, &a_refl, 1.0), scaled(&d1, &b_refl, -1.0)),
            Param::ReflectionPhase => stack(times(&a_refl, neg_j), times(&b_refl, pos_j)),
            Param::GainAb => {
                let k = Complex64::new(1.0 / truth.gain_ab, 0.0);
                stack(times(&a_los, k), times(&b_los, k))
            }
            Param::GainAr => {
                let k = Complex64::new(1.0 / truth.gain_ar, 0.0);
                stack(times(&a_refl, k), if bi { times(&b_refl, k) } else { zeros.clone() })
            }
        };
        out.push(MeanDerivative { param: p, vector });
    }
    Ok(out)
}

/// Fisher information matrix with labels in canonical parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimMatrix {
    pub param_labels: Vec<Param>,
    pub entries: Vec<Vec<f64>>,
}

impl FimMatrix {
    pub fn dim(&self) -> usize {
        self.param_labels.len()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.entries[i][j])
    }

    /// Inverse diagonal, via a Jacobi-scaled eigen check and Cholesky solve.
    pub fn inverse_diagonal(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let j = self.to_matrix();
        let scale: Vec<f64> = (0..n).map(|i| j[(i, i)]).collect();
        if let Some(i) = scale.iter().position(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::NonIdentifiable(format!(
                "{} carries no information",
                self.param_labels[i]
            )));
        }
        let s: Vec<f64> = scale.iter().map(|d| 1.0 / d.sqrt()).collect();
        let r = DMatrix::from_fn(n, n, |a, b| j[(a, b)] * s[a] * s[b]);
        let eig = SymmetricEigen::new(r.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min > 0.0) || max / min > MAX_CONDITION {
            return Err(Error::NonIdentifiable(format!(
                "information matrix over [{}] has condition {:.3e}",
                self.param_labels.iter().map(|p| p.label()).collect::<Vec<_>>().join(", "),
                if min > 0.0 { max / min } else { f64::INFINITY }
            )));
        }
        let chol = r
            .cholesky()
            .ok_or_else(|| Error::NonIdentifiable("information matrix is not positive definite".into()))?;
        let inv = chol.inverse();
        Ok((0..n).map(|i| inv[(i, i)] * s[i] * s[i]).collect())
    }
}

/// `J_ij = 2 Re{∂_iᴴ ∂_j} / N_0`.
pub fn fim(derivatives: &[MeanDerivative], noise_psd_w_per_hz: f64) -> Result<FimMatrix> {
    let n = derivatives.len();
    if let Some(first) = derivatives.first() {
        if let Some(bad) = derivatives.iter().find(|d| d.vector.len() != first.vector.len()) {
            return Err(Error::Dimension {
                expected: first.vector.len(),
                found: bad.vector.len(),
            });
        }
    }
    let mut entries = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let s: Complex64 = derivatives[i]
                .vector
                .iter()
                .zip(&derivatives[j].vector)
                .map(|(a, b)| a.conj() * b)
                .sum();
            let v = 2.0 * s.re / noise_psd_w_per_hz;
            entries[i][j] = v;
            entries[j][i] = v;
        }
    }
    Ok(FimMatrix {
        param_labels: derivatives.iter().map(|d| d.param).collect(),
        entries,
    })
}

/// Variance bound for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub param: Param,
    pub variance: f64,
    pub unit: &'static str,
}

impl Bound {
    fn new(param: Param, variance: f64) -> Self {
        let unit = match param.unit() {
            "s" => "s^2",
            "rad" => "rad^2",
            _ => "1",
        };
        Self { param, variance, unit }
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrlbReport {
    pub variant: ParameterVariant,
    pub map: MapKnowledge,
    pub direction: DirectionMode,
    pub bandwidth_hz: f64,
    pub num_subcarriers: usize,
    pub snr_used: f64,
    pub fim: FimMatrix,
    pub bounds: Vec<Bound>,
    /// Closed-form counterparts, present for line-of-sight variants.
    pub closed_form: Option<Vec<Bound>>,
}

impl CrlbReport {
    pub fn bound(&self, param: Param) -> Option<&Bound> {
        self.bounds.iter().find(|b| b.param == param)
    }

    pub fn std(&self, param: Param) -> Option<f64> {
        self.bound(param).map(Bound::std)
    }

    pub fn closed_form(&self, param: Param) -> Option<&Bound> {
        self.closed_form.as_ref()?.iter().find(|b| b.param == param)
    }
}

/// Bounds from the numerically inverted information matrix.
pub fn crlb_numeric(
    variant: ParameterVariant,
    truth: &ModelParams,
    cfg: &OfdmConfig,
    map: MapKnowledge,
    direction: DirectionMode,
) -> Result<CrlbReport> {
    let pilots = PilotSequence::constant(cfg);
    let d = mean_derivatives(variant, truth, cfg, map, direction, &pilots, &pilots)?;
    let fim = fim(&d, cfg.noise_psd_w_per_hz())?;
    let diag = fim.inverse_diagonal()?;
    let snr = cfg.linear_snr(truth.gain_ab);
    let bounds = fim
        .param_labels
        .iter()
        .zip(diag)
        .map(|(p, v)| Bound::new(*p, v))
        .collect();

    let closed_form = match (variant, direction) {
        (ParameterVariant::KnownPosLos, DirectionMode::UniAb) => {
            let (t, phi) = closed_form_known_pos_los(cfg, snr);
            Some(vec![
                Bound::new(Param::ClockOffsetAb, t),
                Bound::new(Param::PhaseOffsetAb, phi),
            ])
        }
        (ParameterVariant::UnknownPosLos, DirectionMode::Bidirectional) => {
            let (tau, t, phi) = closed_form_unknown_pos_los(cfg, snr);
            Some(vec![
                Bound::new(Param::DelayAb, tau),
                Bound::new(Param::ClockOffsetAb, t),
                Bound::new(Param::PhaseOffsetAb, phi),
            ])
        }
        _ => None,
    };

    Ok(CrlbReport {
        variant,
        map,
        direction,
        bandwidth_hz: cfg.bandwidth_hz(),
        num_subcarriers: cfg.num_subcarriers(),
        snr_used: snr,
        fim,
        bounds,
        closed_form,
    })
}

/// `(var δt, var δφ)` for one-way line-of-sight observations with known
/// positions. `W` is the effective bandwidth `Δf sqrt(N² - 1)`.
pub fn closed_form_known_pos_los(cfg: &OfdmConfig, snr: f64) -> (f64, f64) {
    let w2 = cfg.effective_bandwidth_hz().powi(2);
    let fc2 = cfg.carrier_freq_hz().powi(2);
    (
        3.0 / (2.0 * PI * PI * w2 * snr),
        6.0 * fc2 / (w2 * snr) + 1.0 / (2.0 * snr),
    )
}

/// `(var τ_AB, var δt, var δφ)` for bidirectional line-of-sight observations
/// with unknown positions.
pub fn closed_form_unknown_pos_los(cfg: &OfdmConfig, snr: f64) -> (f64, f64, f64) {
    let w2 = cfg.effective_bandwidth_hz().powi(2);
    let fc2 = cfg.carrier_freq_hz().powi(2);
    (
        1.0 / ((16.0 * PI * PI * fc2 + 4.0 * PI * PI * w2 / 3.0) * snr),
        3.0 / (4.0 * PI * PI * w2 * snr),
        3.0 * fc2 / (w2 * snr) + 1.0 / (4.0 * snr),
    )
}
