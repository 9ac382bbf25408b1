//! Noise bounds, excitation metrics and error statistics.

use serde::{Deserialize, Serialize};

use crate::adapobs::{EstimatorConfig, RegressionRecord};
use crate::algobs::DEGENERATE_PSI;
use crate::dynamics::GeneratorParams;
use crate::pmu::NoiseModel;
use crate::{Error, Result};

/// Extremes of the operating trajectory used by the analytic bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v_max: f64,
    pub i_max: f64,
    pub x3_max: f64,
    /// Smallest noise-free `|psi|` along the trajectory.
    pub psi_min: f64,
}

/// First-order bounds on the algebraic observer errors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlgebraicBounds {
    pub w_x1_max: f64,
    pub w_psi_max: f64,
    pub w_x3_max: f64,
    #[serde(rename = "w_Te_max")]
    pub w_te_max: f64,
}

/// Bounds on the algebraic observer errors from the channel noise bounds.
///
/// The four disturbances of `psi` are `w1`, `V w2`, `|R_s + j x_q| w3` and
/// `|R_s + j x_q| I w4`. Their sum bounds `|psi - psi_nom|` and, divided by the
/// smallest `|psi|`, the angle error. The voltage and torque bounds follow
/// from the triangle inequality with `|Delta beta| <= w_x1 + w4`.
pub fn algebraic_bounds(noise: &NoiseModel, env: &Envelope, p: &GeneratorParams) -> Result<AlgebraicBounds> {
    if !(env.psi_min >= DEGENERATE_PSI) {
        return Err(Error::Degenerate {
            magnitude: env.psi_min,
            threshold: DEGENERATE_PSI,
        });
    }
    let [w1, w2, w3, w4, _, _] = noise.bound;
    let zq = p.z_q().norm();
    let w_psi = w1 + env.v_max * w2 + zq * w3 + zq * env.i_max * w4;
    let w_x1 = w_psi / env.psi_min;
    let dx = (p.x_q - p.x_dp).abs();
    let dbeta = w_x1 + w4;
    let i_hat = env.i_max + w3;
    let w_x3 = dx * (w3 + i_hat * dbeta) + w_psi;
    // T_e = dx/2 sin(2 beta) I^2 + x3 sin(beta) I
    let w_te = dx / 2.0 * (2.0 * dbeta * i_hat * i_hat + w3 * (2.0 * env.i_max + w3))
        + w_x3 * i_hat
        + env.x3_max * (w3 + i_hat * dbeta);
    Ok(AlgebraicBounds {
        w_x1_max: w_x1,
        w_psi_max: w_psi,
        w_x3_max: w_x3,
        w_te_max: w_te,
    })
}

/// Persistence-of-excitation summary of a `Delta` series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeReport {
    #[serde(rename = "window_T")]
    pub window_t: f64,
    pub min_integral: f64,
    pub mean_integral: f64,
    pub epsilon_pe: f64,
    pub pe_satisfied: bool,
}

/// Minimum over the run of the sliding integral of `Delta^2` over `window_t`.
///
/// `series` holds uniformly spaced `(t, Delta)` pairs. Without an explicit
/// level, `epsilon_pe` is 1% of the mean windowed integral.
pub fn pe_metric(series: &[(f64, f64)], window_t: f64, epsilon_pe: Option<f64>) -> Result<PeReport> {
    let n = series.len();
    let span = if n >= 2 { series[n - 1].0 - series[0].0 } else { 0.0 };
    if !(window_t > 0.0) || span + 1e-9 < window_t {
        return Err(Error::Analysis {
            message: format!("Delta series spans {span} s, shorter than the PE window {window_t} s"),
        });
    }
    let h = span / (n - 1) as f64;
    let w = ((window_t / h).round() as usize).max(1);
    // prefix sums of trapezoids
    let mut acc = vec![0.0; n];
    for i in 1..n {
        let (a, b) = (series[i - 1].1, series[i].1);
        acc[i] = acc[i - 1] + 0.5 * (series[i].0 - series[i - 1].0) * (a * a + b * b);
    }
    let windows: Vec<f64> = (0..n - w).map(|i| acc[i + w] - acc[i]).collect();
    let min_integral = windows.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let mean_integral = windows.iter().sum::<f64>() / windows.len() as f64;
    let epsilon_pe = epsilon_pe.unwrap_or(0.01 * mean_integral);
    Ok(PeReport {
        window_t,
        min_integral,
        mean_integral,
        epsilon_pe,
        pe_satisfied: min_integral > 0.0 && min_integral >= epsilon_pe,
    })
}

/// Largest singular value of a 2x2 matrix.
pub fn spectral_norm(m: [[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = m;
    let fro2 = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0);
    ((fro2 + disc.sqrt()) / 2.0).sqrt()
}

fn det2(m: [[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterminantCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `|det Xi - det Xi_nom| <= 2 ||Xi - Xi_nom|| max(||Xi_nom||, ||Xi||)`.
pub fn determinant_perturbation_check(xi_nom: [[f64; 2]; 2], xi: [[f64; 2]; 2]) -> DeterminantCheck {
    let diff = [
        [xi[0][0] - xi_nom[0][0], xi[0][1] - xi_nom[0][1]],
        [xi[1][0] - xi_nom[1][0], xi[1][1] - xi_nom[1][1]],
    ];
    let lhs = (det2(xi) - det2(xi_nom)).abs();
    let rhs = 2.0 * spectral_norm(diff) * spectral_norm(xi_nom).max(spectral_norm(xi));
    DeterminantCheck {
        lhs,
        rhs,
        // the slack absorbs rounding in the determinants themselves
        ok: lhs <= rhs * (1.0 + 1e-12) + 4.0 * f64::EPSILON * (det2(xi).abs() + det2(xi_nom).abs()),
    }
}

/// One logged estimation step with its ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub t: f64,
    /// True `(delta, domega, E_q')`.
    pub truth: [f64; 3],
    /// `(x1_hat, x2_hat, x3_hat, theta1_hat, theta2_hat)`.
    pub estimate: [f64; 5],
    /// Realized `T_m_hat - T_m` and `Te_hat - T_e`.
    pub w_tm: f64,
    pub w_te: f64,
    pub record: RegressionRecord,
    /// Same regression computed from noise-free measurements.
    pub nominal: Option<RegressionRecord>,
}

/// Per-channel values for `(x1, x2, x3, theta1, theta2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Channels {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl Channels {
    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            x1: a[0],
            x2: a[1],
            x3: a[2],
            theta1: a[3],
            theta2: a[4],
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.x1, self.x2, self.x3, self.theta1, self.theta2]
    }

    pub fn all_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Error statistics over the post-settling part of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub settling_time: f64,
    pub samples: usize,
    pub sup_err: Channels,
    pub rms_err: Channels,
    /// `sup ||Lambda(t)||_2`, present when nominal records were logged.
    pub rho: Option<f64>,
    /// `sup ||d(t)||_2`, present when nominal records were logged.
    pub zeta: Option<f64>,
    /// Largest right-hand side of the determinant perturbation bound.
    #[serde(rename = "w_Delta_max")]
    pub w_delta_max: Option<f64>,
    pub determinant_violations: usize,
    pub finite: bool,
    pub fault_time: Option<f64>,
}

/// Spectral norm of a general matrix via its Gram matrix eigenvalues.
fn spectral_norm3(m: [[f64; 3]; 3]) -> f64 {
    let m = nalgebra::Matrix3::from_fn(|r, c| m[r][c]);
    (m.transpose() * m).symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// Error statistics after discarding the first `settling_fraction` of the run.
///
/// `Lambda(t)` and `d(t)` are the perturbation terms of the error dynamics
/// of `(x2_bar, theta1_err, theta2_err)`:
///
/// ```text
/// Lambda = [[0, -k w_x1, w_Tm - w_Te],
///           [0, -g1 (2 Dn wD + wD^2), 0],
///           [0, 0, -g2 (2 Dn wD + wD^2)]]
/// d_1 = a2 (w_Tm - w_Te) - (a1 + k) k w_x1
/// d_i = -g_i ((Dn wD + wD^2) theta_i - wZ_i (Dn + wD))
/// ```
pub fn run_statistics(
    logs: &[StepLog],
    theta: [f64; 2],
    cfg: &EstimatorConfig,
    settling_fraction: f64,
    fault_time: Option<f64>,
) -> Result<RunStatistics> {
    let t0 = logs.iter().map(|l| l.t).fold(f64::INFINITY, f64::min);
    let t1 = logs.iter().map(|l| l.t).fold(f64::NEG_INFINITY, f64::max);
    let settling_time = t0 + settling_fraction * (t1 - t0);
    let post: Vec<&StepLog> = logs.iter().filter(|l| l.t >= settling_time).collect();
    if post.is_empty() {
        return Err(Error::Analysis {
            message: "no samples after the settling window".into(),
        });
    }

    let errors = |l: &StepLog| {
        [
            l.estimate[0] - l.truth[0],
            l.estimate[1] - l.truth[1],
            l.estimate[2] - l.truth[2],
            l.estimate[3] - theta[0],
            l.estimate[4] - theta[1],
        ]
    };
    let mut sup = [0.0f64; 5];
    let mut sq: [Vec<f64>; 5] = Default::default();
    let mut finite = true;
    for l in &post {
        for (c, e) in errors(l).into_iter().enumerate() {
            finite &= e.is_finite();
            sup[c] = if e.is_nan() { f64::NAN } else { sup[c].max(e.abs()) };
            sq[c].push(e * e);
        }
    }
    // summing in sorted order keeps the result independent of sample order
    let rms = std::array::from_fn(|c| {
        let mut v = sq[c].clone();
        v.sort_by(f64::total_cmp);
        (v.iter().sum::<f64>() / v.len() as f64).sqrt()
    });

    let (mut rho, mut zeta, mut w_delta_max) = (None::<f64>, None::<f64>, None::<f64>);
    let mut violations = 0;
    for l in &post {
        let Some(nom) = l.nominal else { continue };
        let dn = nom.delta;
        let wd = l.record.delta - dn;
        let wz = [l.record.cal_z[0] - nom.cal_z[0], l.record.cal_z[1] - nom.cal_z[1]];
        let w_x1 = l.estimate[0] - l.truth[0];
        let wt = l.w_tm - l.w_te;
        let g = [cfg.gamma1, cfg.gamma2];
        let lam = [
            [0.0, -cfg.k * w_x1, wt],
            [0.0, -g[0] * (2.0 * dn * wd + wd * wd), 0.0],
            [0.0, 0.0, -g[1] * (2.0 * dn * wd + wd * wd)],
        ];
        let d = [
            theta[1] * wt - (theta[0] + cfg.k) * cfg.k * w_x1,
            -g[0] * ((dn * wd + wd * wd) * theta[0] - wz[0] * (dn + wd)),
            -g[1] * ((dn * wd + wd * wd) * theta[1] - wz[1] * (dn + wd)),
        ];
        let ln = spectral_norm3(lam);
        let dnorm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        rho = Some(rho.map_or(ln, |r| r.max(ln)));
        zeta = Some(zeta.map_or(dnorm, |z| z.max(dnorm)));
        let chk = determinant_perturbation_check(nom.big_xi, l.record.big_xi);
        w_delta_max = Some(w_delta_max.map_or(chk.rhs, |w| w.max(chk.rhs)));
        if !chk.ok {
            violations += 1;
        }
    }

    Ok(RunStatistics {
        settling_time,
        samples: post.len(),
        sup_err: Channels::from_array(sup),
        rms_err: Channels::from_array(rms),
        rho,
        zeta,
        w_delta_max,
        determinant_violations: violations,
        finite,
        fault_time,
    })
}

/// Largest `|calZ_i - Delta theta_i|` over records at or after `t_from`,
/// relative to `sup |Delta| |theta_i|` over the same records.
pub fn lre_residual(records: &[RegressionRecord], theta: [f64; 2], t_from: f64) -> [f64; 2] {
    let post = records.iter().filter(|r| r.t >= t_from);
    let mut num = [0.0f64; 2];
    let mut sup_delta = 0.0f64;
    for r in post {
        sup_delta = sup_delta.max(r.delta.abs());
        for i in 0..2 {
            num[i] = num[i].max((r.cal_z[i] - r.delta * theta[i]).abs());
        }
    }
    std::array::from_fn(|i| num[i] / (sup_delta * theta[i].abs()))
}

/// Bounds and statistics written to `bounds_report.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(flatten)]
    pub algebraic: AlgebraicBounds,
    pub envelope: Envelope,
    #[serde(flatten)]
    pub statistics: RunStatistics,
}
