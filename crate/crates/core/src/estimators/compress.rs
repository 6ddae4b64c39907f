//! Closed-form elimination of the real path gains and the common phase offset.
//!
//! For `y = exp(-jθ) C β + w` with real `β`, minimizing the squared residual
//! over `β` and `θ` leaves
//! `‖y‖² - ½ uᴴG⁻¹u - ½ |uᵀG⁻¹u|` with `u = Cᴴy` and `G = Re{CᴴC}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle::wrap_to_half_pi;

/// Relative eigenvalue floor below which the normal matrix is regularized.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

/// Phase offset recovered from the compressed statistic, with its ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecovery {
    /// Canonical representative in `[-π/2, π/2)`.
    pub phase_rad: f64,
    pub ambiguity_period_rad: f64,
    /// The statistic vanished, so any phase fits equally well.
    pub undefined: bool,
}

impl PhaseRecovery {
    /// The two phases consistent with the statistic, canonical one first.
    pub fn candidates(&self) -> [f64; 2] {
        [self.phase_rad, self.phase_rad + self.ambiguity_period_rad]
    }
}

/// Phase offset maximizing the compressed likelihood for the statistic
/// `κ = uᵀG⁻¹u`: `-∠κ / 2`, defined up to multiples of π.
pub fn recover_phase_offset(kappa: Complex64) -> PhaseRecovery {
    let undefined = !(kappa.norm() > 0.0);
    PhaseRecovery {
        phase_rad: if undefined { 0.0 } else { wrap_to_half_pi(-0.5 * kappa.arg()) },
        ambiguity_period_rad: PI,
        undefined,
    }
}

/// Real symmetric normal matrix of dimension 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalMatrix {
    One(f64),
    Two { g11: f64, g12: f64, g22: f64 },
}

impl NormalMatrix {
    fn trace(&self) -> f64 {
        match *self {
            NormalMatrix::One(g) => g,
            NormalMatrix::Two { g11, g22, .. } => g11 + g22,
        }
    }

    fn min_eigenvalue(&self) -> f64 {
        match *self {
            NormalMatrix::One(g) => g,
            NormalMatrix::Two { g11, g12, g22 } => {
                let m = 0.5 * (g11 + g22);
                let d = (0.5 * (g11 - g22)).hypot(g12);
                m - d
            }
        }
    }

    fn regularized(self, eps: f64) -> Self {
        match self {
            NormalMatrix::One(g) => NormalMatrix::One(g + eps),
            NormalMatrix::Two { g11, g12, g22 } => NormalMatrix::Two {
                g11: g11 + eps,
                g12,
                g22: g22 + eps,
            },
        }
    }
}

/// Result of compressing out the gains and phase at one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compressed {
    pub loss: f64,
    pub phase: PhaseRecovery,
    pub gains: [f64; 2],
    pub num_gains: usize,
    /// The normal matrix was near-singular and got regularized.
    pub degenerate: bool,
}

impl Compressed {
    pub fn gains(&self) -> &[f64] {
        &self.gains[..self.num_gains]
    }
}

/// Compresses `‖y - exp(-jθ) C β‖²` given `‖y‖²`, `u = Cᴴy` and `G = Re{CᴴC}`.
pub fn compress(y_norm_sqr: f64, u: &[Complex64], g: NormalMatrix) -> Compressed {
    let trace = g.trace();
    let degenerate = !(g.min_eigenvalue() >= SINGULAR_TOLERANCE * trace) || !(trace > 0.0);
    let g = if degenerate {
        g.regularized(SINGULAR_TOLERANCE * trace.abs().max(f64::MIN_POSITIVE))
    } else {
        g
    };

    match g {
        NormalMatrix::One(g) => {
            let u = u[0];
            let kappa = u * u / g;
            let quad = u.norm_sqr() / g;
            let phase = recover_phase_offset(kappa);
            let rot = Complex64::from_polar(1.0, phase.phase_rad);
            Compressed {
                loss: y_norm_sqr - quad,
                phase,
                gains: [(rot * u).re / g, 0.0],
                num_gains: 1,
                degenerate,
            }
        }
        NormalMatrix::Two { g11, g12, g22 } => {
            let det = g11 * g22 - g12 * g12;
            let (i11, i12, i22) = (g22 / det, -g12 / det, g11 / det);
            let (u1, u2) = (u[0], u[1]);
            // G⁻¹u
            let v1 = u1 * i11 + u2 * i12;
            let v2 = u1 * i12 + u2 * i22;
            let kappa = u1 * v1 + u2 * v2;
            let quad = (u1.conj() * v1 + u2.conj() * v2).re;
            let phase = recover_phase_offset(kappa);
            let rot = Complex64::from_polar(1.0, phase.phase_rad);
            Compressed {
                loss: y_norm_sqr - 0.5 * quad - 0.5 * kappa.norm(),
                phase,
                gains: [(rot * v1).re, (rot * v2).re],
                num_gains: 2,
                degenerate,
            }
        }
    }
}
