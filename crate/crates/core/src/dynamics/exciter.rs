//! Static exciter (first-order lag with non-windup limits) and a
//! washout + lead-lag power system stabilizer acting on the speed deviation.

use serde::{Deserialize, Serialize};

use super::GeneratorState;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExciterParams {
    #[serde(rename = "K_A")]
    pub k_a: f64,
    /// AVR time constant [s].
    #[serde(rename = "T_A")]
    pub t_a: f64,
    #[serde(rename = "E_f_min")]
    pub e_f_min: f64,
    #[serde(rename = "E_f_max")]
    pub e_f_max: f64,
    /// Voltage setpoint [pu]. `None` means back-solve it from the initial
    /// equilibrium.
    #[serde(rename = "V_ref", default, skip_serializing_if = "Option::is_none")]
    pub v_ref: Option<f64>,
    pub pss_enabled: bool,
    /// PSS gain [pu per rad/s].
    #[serde(rename = "K_pss")]
    pub k_pss: f64,
    #[serde(rename = "T_w")]
    pub t_w: f64,
    #[serde(rename = "T_1")]
    pub t_1: f64,
    #[serde(rename = "T_2")]
    pub t_2: f64,
}

impl Default for ExciterParams {
    fn default() -> Self {
        Self {
            k_a: 50.0,
            t_a: 0.05,
            e_f_min: -5.0,
            e_f_max: 5.0,
            v_ref: None,
            pss_enabled: true,
            k_pss: 0.05,
            t_w: 10.0,
            t_1: 0.5,
            t_2: 0.1,
        }
    }
}

impl ExciterParams {
    pub fn validate(&self, prefix: &str) -> Vec<Error> {
        let mut errs = Vec::new();
        let mut positive = |v: f64, key: &str| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(Error::config(
                    format!("{prefix}.{key}"),
                    format!("invariant {key} > 0 violated (got {v})"),
                ));
            }
        };
        positive(self.t_a, "T_A");
        positive(self.t_w, "T_w");
        positive(self.t_2, "T_2");
        if !self.k_a.is_finite() || !self.k_pss.is_finite() || !self.t_1.is_finite() {
            errs.push(Error::config(
                format!("{prefix}.K_A"),
                "gains and lead time constant must be finite",
            ));
        }
        if !(self.e_f_min < self.e_f_max) {
            errs.push(Error::config(
                format!("{prefix}.E_f_min"),
                format!(
                    "invariant E_f_min < E_f_max violated ({} >= {})",
                    self.e_f_min, self.e_f_max
                ),
            ));
        }
        if let Some(v) = self.v_ref {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(Error::config(
                    format!("{prefix}.V_ref"),
                    format!("invariant V_ref > 0 violated (got {v})"),
                ));
            }
        }
        errs
    }

    fn v_ref(&self) -> f64 {
        self.v_ref.unwrap_or(1.0)
    }

    fn clamp(&self, e_f: f64) -> f64 {
        e_f.clamp(self.e_f_min, self.e_f_max)
    }

    /// PSS output for the given washout/lead-lag states and speed deviation.
    fn pss_output(&self, pss: [f64; 2], domega: f64) -> f64 {
        if !self.pss_enabled {
            return 0.0;
        }
        let v_w = self.k_pss * domega - pss[0];
        pss[1] + self.t_1 / self.t_2 * (v_w - pss[1])
    }
}

/// Time derivatives of `(E_f, washout, lead-lag)` at a terminal voltage and speed deviation.
pub fn exciter_derivative(
    avr_state: f64,
    pss: [f64; 2],
    v_t: f64,
    domega: f64,
    ep: &ExciterParams,
) -> [f64; 3] {
    let v_pss = ep.pss_output(pss, domega);
    let mut de_f = (ep.k_a * (ep.v_ref() - v_t + v_pss) - avr_state) / ep.t_a;
    if (avr_state >= ep.e_f_max && de_f > 0.0) || (avr_state <= ep.e_f_min && de_f < 0.0) {
        de_f = 0.0;
    }
    let (dw, dl) = if ep.pss_enabled {
        let v_w = ep.k_pss * domega - pss[0];
        ((ep.k_pss * domega - pss[0]) / ep.t_w, (v_w - pss[1]) / ep.t_2)
    } else {
        (0.0, 0.0)
    };
    [de_f, dw, dl]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExciterOutput {
    pub avr_state: f64,
    pub pss_states: [f64; 2],
    /// Field voltage after limiting [pu].
    pub e_f: f64,
}

/// Advances the exciter and PSS alone by `dt` with `V_t` and `domega` held.
pub fn exciter_step(
    state: &GeneratorState,
    v_t: f64,
    domega: f64,
    ep: &ExciterParams,
    dt: f64,
) -> ExciterOutput {
    let f = |x: [f64; 3]| exciter_derivative(x[0], [x[1], x[2]], v_t, domega, ep);
    let x0 = [state.avr_state, state.pss_states[0], state.pss_states[1]];
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = f(x0);
    let k2 = f(add(x0, k1, dt / 2.0));
    let k3 = f(add(x0, k2, dt / 2.0));
    let k4 = f(add(x0, k3, dt));
    let mut x = x0;
    for i in 0..3 {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let e_f = ep.clamp(x[0]);
    ExciterOutput {
        avr_state: e_f,
        pss_states: [x[1], x[2]],
        e_f,
    }
}

pub(crate) fn clamp_field(ep: &ExciterParams, e_f: f64) -> f64 {
    ep.clamp(e_f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep() -> ExciterParams {
        ExciterParams {
            v_ref: Some(1.0),
            pss_enabled: false,
            ..Default::default()
        }
    }

    #[test]
    fn zero_error_is_equilibrium() {
        let st = GeneratorState::default();
        let out = exciter_step(&st, 1.0, 0.0, &ep(), 1e-3);
        assert_eq!(out.e_f, 0.0);
        assert_eq!(out.pss_states, [0.0, 0.0]);
    }

    #[test]
    fn field_voltage_clamps_at_ceiling() {
        let mut e = ep();
        e.k_a = 200.0;
        let mut st = GeneratorState::default();
        for _ in 0..2000 {
            let out = exciter_step(&st, 0.9, 0.0, &e, 1e-3);
            st.avr_state = out.avr_state;
            assert!(out.e_f <= e.e_f_max);
        }
        assert_eq!(st.avr_state, e.e_f_max);
    }

    #[test]
    fn lag_matches_analytic_step_response() {
        // E_f(t) = K_A*err*(1 - exp(-t/T_A)) for a unit-step error of 0.01 pu
        let e = ep();
        let err = 0.01;
        let mut st = GeneratorState::default();
        let dt = 1e-3;
        let mut worst: f64 = 0.0;
        for k in 1..=500 {
            let out = exciter_step(&st, 1.0 - err, 0.0, &e, dt);
            st.avr_state = out.avr_state;
            let t = k as f64 * dt;
            let exact = e.k_a * err * (1.0 - (-t / e.t_a).exp());
            worst = worst.max((out.e_f - exact).abs());
        }
        assert!(worst < 1e-6, "max deviation {worst:e}");
    }

    #[test]
    fn disabled_pss_contributes_nothing() {
        let e = ep();
        assert_eq!(e.pss_output([0.3, -0.2], 0.5), 0.0);
        let d = exciter_derivative(0.0, [0.3, -0.2], 1.0, 0.5, &e);
        assert_eq!(d, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn pss_adds_to_the_voltage_error() {
        let mut e = ep();
        e.pss_enabled = true;
        // at zero states, v_w = K_pss*domega, lead-lag output = T1/T2 * v_w
        let v = e.pss_output([0.0, 0.0], 0.2);
        assert!((v - e.t_1 / e.t_2 * e.k_pss * 0.2).abs() < 1e-15);
    }
}
