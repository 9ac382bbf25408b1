//! Algebraic observer for rotor angle and internal voltage.
//!
//! From a single PMU sample the phasor
//! `psi = (R_s + j x_q) I_t e^{j phi_t} + V_t e^{j theta_t}`
//! lies on the q axis, so its argument is the rotor angle and its magnitude
//! is `E_q' + (x_q - x_d') I_d`. No state is carried between samples except
//! the branch used to unwrap the angle.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{electrical_torque, wrap_angle, GeneratorParams, GeneratorState, TerminalQuantities};
use crate::pmu::PmuSample;
use crate::{Error, Result};

/// Below this magnitude the argument of `psi` is considered undefined.
pub const DEGENERATE_PSI: f64 = 1e-6;

/// Rectangular phasor in per unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phasor {
    pub re: f64,
    pub im: f64,
}

impl Phasor {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn mag(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Principal argument in `(-pi, pi]`.
    pub fn arg(&self) -> f64 {
        self.im.atan2(self.re)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl From<Complex64> for Phasor {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

/// Output of the algebraic observer at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicEstimate {
    pub t: f64,
    /// Rotor angle estimate, unwrapped against the previous sample [rad].
    pub x1_hat: f64,
    /// Internal transient voltage estimate [pu].
    pub x3_hat: f64,
    /// Electrical torque estimate [pu].
    pub te_hat: f64,
    pub psi: Phasor,
}

impl AlgebraicEstimate {
    /// `false` when the voltage estimate is non-positive; the estimate is
    /// still usable, this only flags an unphysical operating point.
    pub fn is_physical(&self) -> bool {
        self.x3_hat > 0.0
    }
}

/// `psi` from the measured phasors, without the magnitude check.
fn psi_raw(y: &[f64; 6], p: &GeneratorParams) -> Complex64 {
    p.z_q() * Complex64::from_polar(y[2], y[3]) + Complex64::from_polar(y[0], y[1])
}

/// The phasor `psi` of a sample; fails when `|psi| < 1e-6`.
pub fn compute_psi(sample: &PmuSample, p: &GeneratorParams) -> Result<Phasor> {
    let psi = psi_raw(&sample.y, p);
    let magnitude = psi.norm();
    if !(magnitude >= DEGENERATE_PSI) {
        return Err(Error::Degenerate {
            magnitude,
            threshold: DEGENERATE_PSI,
        });
    }
    Ok(psi.into())
}

/// Angle `raw` moved by whole turns onto the branch nearest `reference`.
pub fn unwrap_near(raw: f64, reference: f64) -> f64 {
    let turns = ((reference - raw) / TAU).round();
    if turns == 0.0 {
        raw
    } else {
        raw + turns * TAU
    }
}

/// Voltage and torque estimates given a rotor-angle estimate.
fn reconstruct(x1_hat: f64, psi_mag: f64, y: &[f64; 6], p: &GeneratorParams) -> (f64, f64) {
    let beta = FRAC_PI_2 - x1_hat + y[3];
    let x3_hat = psi_mag - (p.x_q - p.x_dp) * beta.cos() * y[2];
    let te_hat = electrical_torque(x1_hat, x3_hat, y[2], y[3], p);
    (x3_hat, te_hat)
}

/// Algebraic estimate of `(x1, x3, T_e)` from one sample.
pub fn estimate(
    sample: &PmuSample,
    p: &GeneratorParams,
    prev: Option<&AlgebraicEstimate>,
) -> Result<AlgebraicEstimate> {
    let psi = compute_psi(sample, p)?;
    let raw = psi.arg();
    let x1_hat = match prev {
        Some(prev) => unwrap_near(raw, prev.x1_hat),
        None => raw,
    };
    let (x3_hat, te_hat) = reconstruct(x1_hat, psi.mag(), &sample.y, p);
    Ok(AlgebraicEstimate {
        t: sample.t,
        x1_hat,
        x3_hat,
        te_hat,
        psi,
    })
}

/// Realized observer errors for a sample whose ground truth is known.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    /// `arg psi - arg psi_nom`, wrapped to `(-pi, pi]`.
    pub w_x1: f64,
    /// `|psi| - |psi_nom|`.
    pub w_psi: f64,
    /// `x3_hat - x3`.
    pub w_x3: f64,
    /// `Te_hat - T_e`.
    pub w_te: f64,
}

/// Splits the estimation error of a noisy sample against the noise-free phasor.
pub fn error_decomposition(
    sample: &PmuSample,
    truth: &TerminalQuantities,
    state: &GeneratorState,
    p: &GeneratorParams,
) -> ErrorDecomposition {
    let psi = psi_raw(&sample.y, p);
    let psi_nom = psi_raw(&crate::pmu::truth_vector(truth), p);
    let w_x1 = wrap_angle(psi.arg() - psi_nom.arg());
    let w_psi = psi.norm() - psi_nom.norm();
    let x1_hat = unwrap_near(psi.arg(), state.delta);
    let (x3_hat, te_hat) = reconstruct(x1_hat, psi.norm(), &sample.y, p);
    ErrorDecomposition {
        w_x1,
        w_psi,
        w_x3: x3_hat - state.eqp,
        w_te: te_hat - truth.t_e,
    }
}
