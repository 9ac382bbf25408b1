//! Adaptive observer for speed deviation and the lumped parameters `(a1, a2)`.
//!
//! The swing equation `x1'' = -a1 x1' + a2 (T_m - T_e)` is filtered by
//! `F = lambda^2 / (s + lambda)^2` into the regression `z = xi^T theta`,
//! extended with a first-order lag to a square system `Z = Xi theta`, and mixed
//! with the adjugate into two scalar regressions `calZ_i = Delta theta_i`.
//! Each parameter is then driven by its own gradient law, and the speed by
//!
//! ```text
//! x2I' = -(theta1 + k) (x2I + k x1) + theta2 u,   x2_hat = x2I + k x1
//! ```

pub mod filters;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
pub use filters::{FilterBank, FilterStates, PolyHold, LOOKAHEAD};

/// Tuning of the adaptive observer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Speed observer gain.
    pub k: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Pole of the regression filters [rad/s].
    pub lambda: f64,
    /// Pole of the extension lag [rad/s].
    #[serde(rename = "alpha_H")]
    pub alpha_h: f64,
    #[serde(default)]
    pub theta_init: [f64; 2],
    /// Initial integrator state; `None` starts from `x2_hat = 0`.
    #[serde(rename = "x2I_init", default, skip_serializing_if = "Option::is_none")]
    pub x2i_init: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            k: 5.0,
            gamma1: 5e5,
            gamma2: 5e5,
            lambda: 10.0,
            alpha_h: 5.0,
            theta_init: [0.0, 0.0],
            x2i_init: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self, prefix: &str) -> Vec<Error> {
        let mut errs = Vec::new();
        for (key, v) in [
            ("k", self.k),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("lambda", self.lambda),
            ("alpha_H", self.alpha_h),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(Error::config(
                    format!("{prefix}.{key}"),
                    format!("invariant {key} > 0 violated (got {v})"),
                ));
            }
        }
        if !self.theta_init.iter().all(|v| v.is_finite()) {
            errs.push(Error::config(format!("{prefix}.theta_init"), "must be finite"));
        }
        if self.x2i_init.is_some_and(|v| !v.is_finite()) {
            errs.push(Error::config(format!("{prefix}.x2I_init"), "must be finite"));
        }
        errs
    }
}

/// Internal state of the observer between samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorState {
    pub x2i: f64,
    pub theta_hat: [f64; 2],
    pub f_states: FilterStates,
    /// Lag states of `(z, xi1, xi2)`.
    pub h_states: [f64; 3],
}

impl EstimatorState {
    pub fn is_finite(&self) -> bool {
        self.x2i.is_finite()
            && self.theta_hat.iter().all(|v| v.is_finite())
            && self.f_states.x1.iter().chain(&self.f_states.u).all(|v| v.is_finite())
            && self.h_states.iter().all(|v| v.is_finite())
    }
}

/// Regression quantities at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegressionRecord {
    pub t: f64,
    pub z: f64,
    pub xi: [f64; 2],
    #[serde(rename = "Z")]
    pub big_z: [f64; 2],
    #[serde(rename = "Xi")]
    pub big_xi: [[f64; 2]; 2],
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "calZ")]
    pub cal_z: [f64; 2],
}

/// Lag filter `alpha_H / (s + alpha_H)` under a zero-order hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extension {
    pub alpha_h: f64,
    decay: f64,
}

impl Extension {
    pub fn new(alpha_h: f64, dt: f64) -> Self {
        Self {
            alpha_h,
            decay: (-alpha_h * dt).exp(),
        }
    }

    /// Stacks the instantaneous regression on top of its lagged copy. The
    /// lagged row uses inputs up to the previous sample.
    pub fn extend(&self, z: f64, xi: [f64; 2], h: [f64; 3]) -> ([f64; 2], [[f64; 2]; 2], [f64; 3]) {
        let big_z = [z, h[0]];
        let big_xi = [xi, [h[1], h[2]]];
        let a = self.decay;
        let next = [
            a * h[0] + (1.0 - a) * z,
            a * h[1] + (1.0 - a) * xi[0],
            a * h[2] + (1.0 - a) * xi[1],
        ];
        (big_z, big_xi, next)
    }
}

/// `(det Xi, adj(Xi) Z)`.
pub fn mix(big_z: [f64; 2], big_xi: [[f64; 2]; 2]) -> (f64, [f64; 2]) {
    let [[a, b], [c, d]] = big_xi;
    let delta = a * d - b * c;
    let cal_z = [d * big_z[0] - b * big_z[1], -c * big_z[0] + a * big_z[1]];
    (delta, cal_z)
}

/// `x2_hat = x2I + k x1_hat`.
pub fn x2_estimate(st: &EstimatorState, x1_hat: f64, k: f64) -> f64 {
    st.x2i + k * x1_hat
}

/// `x1_hat` and `u` at the start, middle and end of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageInputs {
    pub x1: [f64; 3],
    pub u: [f64; 3],
}

impl StageInputs {
    pub fn held(x1: f64, u: f64) -> Self {
        Self { x1: [x1; 3], u: [u; 3] }
    }
}

/// Solution of `theta' = -gamma Delta (Delta theta - calZ)` after `tau` with
/// `Delta` and `calZ` held.
pub fn theta_flow(theta0: f64, gamma: f64, delta: f64, cal_z: f64, tau: f64) -> f64 {
    if delta == 0.0 {
        return theta0;
    }
    let blend = -(-gamma * delta * delta * tau).exp_m1();
    theta0 + blend * (cal_z / delta - theta0)
}

/// Advances `(x2I, theta1, theta2)` over one step with `Delta` and `calZ`
/// held. The parameter laws are linear for held inputs and are solved in
/// closed form; `x2I` takes one RK4 step using those exact parameter values.
pub fn update(
    st: &EstimatorState,
    delta: f64,
    cal_z: [f64; 2],
    inputs: &StageInputs,
    cfg: &EstimatorConfig,
    dt: f64,
) -> [f64; 3] {
    let g = [cfg.gamma1, cfg.gamma2];
    let theta_at = |tau: f64| -> [f64; 2] {
        std::array::from_fn(|i| theta_flow(st.theta_hat[i], g[i], delta, cal_z[i], tau))
    };
    let th = [st.theta_hat, theta_at(0.5 * dt), theta_at(dt)];
    let f = |x2i: f64, s: usize| {
        -(th[s][0] + cfg.k) * (x2i + cfg.k * inputs.x1[s]) + th[s][1] * inputs.u[s]
    };
    let k1 = f(st.x2i, 0);
    let k2 = f(st.x2i + 0.5 * dt * k1, 1);
    let k3 = f(st.x2i + 0.5 * dt * k2, 1);
    let k4 = f(st.x2i + dt * k3, 2);
    let x2i = st.x2i + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    [x2i, th[2][0], th[2][1]]
}

/// Observer outputs at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverOutput {
    pub t: f64,
    pub x1_hat: f64,
    pub u: f64,
    pub x2_hat: f64,
    pub theta_hat: [f64; 2],
    pub record: RegressionRecord,
}

/// Streaming observer fed with `(t, x1_hat, u)` at the PMU rate.
///
/// The polynomial hold needs samples up to `t_{j+3}` before the state at
/// `t_j` is final, so the output for sample `j` is returned by the push of
/// sample `j + 3`.
#[derive(Debug, Clone)]
pub struct AdaptiveObserver {
    cfg: EstimatorConfig,
    dt: f64,
    bank: FilterBank,
    ext: Extension,
    mid: [f64; 6],
    state: EstimatorState,
    window: VecDeque<(f64, f64, f64)>,
}

impl AdaptiveObserver {
    pub fn new(cfg: EstimatorConfig, dt: f64) -> Result<Self> {
        let errs = cfg.validate("estimator");
        if !errs.is_empty() {
            return Err(if errs.len() == 1 {
                errs.into_iter().next().unwrap()
            } else {
                Error::ConfigList(errs)
            });
        }
        if !(dt > 0.0) {
            return Err(Error::config("sim.pmu_rate", "sample period must be positive"));
        }
        Ok(Self {
            cfg,
            dt,
            bank: FilterBank::new(cfg.lambda, dt),
            ext: Extension::new(cfg.alpha_h, dt),
            mid: filters::lagrange_weights(0.5),
            state: EstimatorState::default(),
            window: VecDeque::with_capacity(6),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// State at the oldest sample not yet emitted.
    pub fn state(&self) -> &EstimatorState {
        &self.state
    }

    pub fn push(&mut self, t: f64, x1_hat: f64, u: f64) -> Result<Option<ObserverOutput>> {
        if self.window.is_empty() {
            // filters start at rest and earlier samples repeat the first one
            self.state = EstimatorState {
                x2i: self.cfg.x2i_init.unwrap_or(-self.cfg.k * x1_hat),
                theta_hat: self.cfg.theta_init,
                f_states: FilterStates {
                    x1: self.bank.rest(x1_hat),
                    u: self.bank.rest(u),
                },
                h_states: [0.0; 3],
            };
            for _ in 0..2 {
                self.window.push_back((t, x1_hat, u));
            }
        }
        self.window.push_back((t, x1_hat, u));
        if self.window.len() < 6 {
            return Ok(None);
        }
        let out = self.process()?;
        self.window.pop_front();
        Ok(Some(out))
    }

    fn process(&mut self) -> Result<ObserverOutput> {
        let x1s: [f64; 6] = std::array::from_fn(|i| self.window[i].1);
        let us: [f64; 6] = std::array::from_fn(|i| self.window[i].2);
        let t = self.window[2].0;
        let st = self.state;

        let (z, xi) = self.bank.outputs(&st.f_states, x1s[2]);
        let (big_z, big_xi, h_next) = self.ext.extend(z, xi, st.h_states);
        let (delta, cal_z) = mix(big_z, big_xi);
        let record = RegressionRecord {
            t,
            z,
            xi,
            big_z,
            big_xi,
            delta,
            cal_z,
        };
        let out = ObserverOutput {
            t,
            x1_hat: x1s[2],
            u: us[2],
            x2_hat: x2_estimate(&st, x1s[2], self.cfg.k),
            theta_hat: st.theta_hat,
            record,
        };

        let dot = |w: &[f64; 6], s: &[f64; 6]| w.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
        let inputs = StageInputs {
            x1: [x1s[2], dot(&self.mid, &x1s), x1s[3]],
            u: [us[2], dot(&self.mid, &us), us[3]],
        };
        let [x2i, t1, t2] = update(&st, delta, cal_z, &inputs, &self.cfg, self.dt);
        self.state = EstimatorState {
            x2i,
            theta_hat: [t1, t2],
            f_states: self.bank.advance(&st.f_states, &x1s, &us),
            h_states: h_next,
        };
        if !self.state.is_finite() {
            return Err(Error::Divergence { t: t + self.dt });
        }
        Ok(out)
    }
}

/// Runs the observer over a complete record; the last `LOOKAHEAD` samples
/// only serve as lookahead and produce no output.
pub fn run_observer(cfg: EstimatorConfig, dt: f64, samples: &[(f64, f64, f64)]) -> Result<Vec<ObserverOutput>> {
    let mut obs = AdaptiveObserver::new(cfg, dt)?;
    let mut out = Vec::with_capacity(samples.len());
    for &(t, x1, u) in samples {
        if let Some(o) = obs.push(t, x1, u)? {
            out.push(o);
        }
    }
    Ok(out)
}
