//! Fixed-step RK4 integration of the machine, exciter and PSS states, with the
//! terminal algebra re-solved at every stage.

use num_complex::Complex64;

use super::exciter::clamp_field;
use super::{
    derivatives, exciter_derivative, solve_kron, solve_terminal, ExciterParams, GeneratorParams,
    GeneratorState, KronNetwork, NetworkModel, Signal, Smib, TerminalQuantities,
};
use crate::{Error, Result};

/// Largest accepted integration step [s].
pub const MAX_STEP: f64 = 0.01;

/// Mechanical torque input: constant setpoint plus an excitation signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MechanicalTorque {
    pub setpoint: f64,
    pub variation: Signal,
}

impl MechanicalTorque {
    pub fn constant(setpoint: f64) -> Self {
        Self {
            setpoint,
            variation: Signal::zero(),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.setpoint + self.variation.value(t)
    }
}

fn full_derivative(
    x: &[f64; 6],
    term: &TerminalQuantities,
    p: &GeneratorParams,
    ep: &ExciterParams,
) -> [f64; 6] {
    let st = GeneratorState::from_array(*x);
    let m = derivatives(&st, term, p);
    let e = exciter_derivative(st.avr_state, st.pss_states, term.v_t, st.domega, ep);
    [m[0], m[1], m[2], e[0], e[1], e[2]]
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::config(
            "sim.dt",
            format!("integration step must lie in (0, {MAX_STEP}] s (got {dt})"),
        ));
    }
    Ok(())
}

fn check_state(state: &GeneratorState, t: f64) -> Result<()> {
    if !state.is_finite() {
        return Err(Error::Simulation {
            t,
            message: format!("non-finite state {state:?}"),
        });
    }
    if state.eqp <= 0.0 {
        return Err(Error::Simulation {
            t,
            message: format!("E_q' = {} is not positive", state.eqp),
        });
    }
    Ok(())
}

fn axpy<const N: usize>(x: &[f64; N], k: &[f64; N], s: f64) -> [f64; N] {
    std::array::from_fn(|i| x[i] + s * k[i])
}

/// Advances one machine by `dt` with classical RK4.
pub fn integrate_step(
    state: &GeneratorState,
    net: &NetworkModel,
    p: &GeneratorParams,
    ep: &ExciterParams,
    tm: &MechanicalTorque,
    t: f64,
    dt: f64,
) -> Result<GeneratorState> {
    check_step(dt)?;
    let f = |x: &[f64; 6], tt: f64| -> Result<[f64; 6]> {
        let st = GeneratorState::from_array(*x);
        let term = solve_terminal(&st, net, p, tt, tm.at(tt))?;
        Ok(full_derivative(x, &term, p, ep))
    };
    let x0 = state.to_array();
    let k1 = f(&x0, t)?;
    let k2 = f(&axpy(&x0, &k1, dt / 2.0), t + dt / 2.0)?;
    let k3 = f(&axpy(&x0, &k2, dt / 2.0), t + dt / 2.0)?;
    let k4 = f(&axpy(&x0, &k3, dt), t + dt)?;
    let x1: [f64; 6] =
        std::array::from_fn(|i| x0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    let mut next = GeneratorState::from_array(x1);
    next.avr_state = clamp_field(ep, next.avr_state);
    check_state(&next, t + dt)?;
    Ok(next)
}

/// Steady operating point of a machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub state: GeneratorState,
    pub terminal: TerminalQuantities,
    pub t_m: f64,
    pub v_ref: f64,
}

/// SMIB equilibrium for a target terminal active power and voltage magnitude.
///
/// The terminal angle follows from the tie-line power transfer, the rotor
/// angle from the q-axis phasor `V + (R_s + j x_q) I`, and `E_q'`, `E_f`,
/// `V_ref`, `T_m` are back-solved. If `ep.v_ref` is set it is kept and the
/// field voltage must still be reachable by the AVR.
pub fn smib_equilibrium(
    p: &GeneratorParams,
    ep: &ExciterParams,
    smib: &Smib,
    p_t: f64,
    v_t: f64,
) -> Result<Equilibrium> {
    let theta_inf = smib.theta_inf(0.0);
    let sin_arg = p_t * smib.x_e / (v_t * smib.v_inf);
    if !(sin_arg.abs() < 1.0) {
        return Err(Error::config(
            "network.P_t0",
            format!("power transfer {p_t} pu exceeds the tie-line limit at V_t = {v_t} pu"),
        ));
    }
    let theta_t = theta_inf + sin_arg.asin();
    let v = Complex64::from_polar(v_t, theta_t);
    let i = (v - Complex64::from_polar(smib.v_inf, theta_inf)) / Complex64::new(0.0, smib.x_e);
    let e_q = v + p.z_q() * i;
    let delta = e_q.arg();
    let frame = Complex64::from_polar(1.0, -(delta - std::f64::consts::FRAC_PI_2));
    let idq = i * frame;
    let vdq = v * frame;
    let eqp = vdq.im + p.r_s * idq.im + p.x_dp * idq.re;
    let e_f = eqp + (p.x_d - p.x_dp) * idq.re;
    if e_f < ep.e_f_min || e_f > ep.e_f_max {
        return Err(Error::config(
            "exciter.E_f_max",
            format!("equilibrium field voltage {e_f} pu lies outside the exciter limits"),
        ));
    }
    let v_ref = v_t + e_f / ep.k_a;
    let state = GeneratorState {
        delta,
        domega: 0.0,
        eqp,
        avr_state: e_f,
        pss_states: [0.0, 0.0],
    };
    let net = NetworkModel::Smib(smib.clone());
    let mut terminal = solve_terminal(&state, &net, p, 0.0, 0.0)?;
    terminal.t_m = terminal.t_e;
    Ok(Equilibrium {
        state,
        terminal,
        t_m: terminal.t_e,
        v_ref,
    })
}

/// A simulated plant seen through the terminal of one observed machine.
pub trait Plant {
    fn time(&self) -> f64;
    fn step(&mut self, dt: f64) -> Result<()>;
    fn observed_state(&self) -> GeneratorState;
    fn observed_terminal(&self) -> Result<TerminalQuantities>;
    fn observed_params(&self) -> &GeneratorParams;
}

/// Single machine on an infinite bus, initialized at equilibrium.
#[derive(Debug, Clone)]
pub struct SmibPlant {
    pub params: GeneratorParams,
    pub exciter: ExciterParams,
    pub network: NetworkModel,
    pub torque: MechanicalTorque,
    pub state: GeneratorState,
    t: f64,
}

impl SmibPlant {
    /// Builds the plant at the equilibrium for `(p_t, v_t)`. The torque
    /// setpoint and (if unset) the AVR setpoint are back-solved.
    pub fn at_equilibrium(
        params: GeneratorParams,
        mut exciter: ExciterParams,
        smib: Smib,
        torque_variation: Signal,
        p_t: f64,
        v_t: f64,
    ) -> Result<Self> {
        let eq = smib_equilibrium(&params, &exciter, &smib, p_t, v_t)?;
        if exciter.v_ref.is_none() {
            exciter.v_ref = Some(eq.v_ref);
        }
        Ok(Self {
            params,
            exciter,
            network: NetworkModel::Smib(smib),
            torque: MechanicalTorque {
                setpoint: eq.t_m,
                variation: torque_variation,
            },
            state: eq.state,
            t: 0.0,
        })
    }
}

impl Plant for SmibPlant {
    fn time(&self) -> f64 {
        self.t
    }

    fn step(&mut self, dt: f64) -> Result<()> {
        self.state = integrate_step(
            &self.state,
            &self.network,
            &self.params,
            &self.exciter,
            &self.torque,
            self.t,
            dt,
        )?;
        self.t += dt;
        Ok(())
    }

    fn observed_state(&self) -> GeneratorState {
        self.state
    }

    fn observed_terminal(&self) -> Result<TerminalQuantities> {
        solve_terminal(
            &self.state,
            &self.network,
            &self.params,
            self.t,
            self.torque.at(self.t),
        )
    }

    fn observed_params(&self) -> &GeneratorParams {
        &self.params
    }
}

/// One machine of a multi-machine system.
#[derive(Debug, Clone)]
pub struct Machine {
    pub params: GeneratorParams,
    pub exciter: ExciterParams,
    pub torque: MechanicalTorque,
}

/// Several machines on a Kron-reduced network; one of them is observed.
#[derive(Debug, Clone)]
pub struct MultiMachinePlant {
    pub machines: Vec<Machine>,
    pub network: KronNetwork,
    pub states: Vec<GeneratorState>,
    pub observed: usize,
    t: f64,
}

impl MultiMachinePlant {
    /// Builds an equilibrium from rotor angles and transient voltages: torque
    /// setpoints equal the resulting air-gap torques, field voltages and
    /// (unset) AVR setpoints are back-solved. `torque_variation[i]` is added
    /// to machine `i`.
    pub fn at_equilibrium(
        params: Vec<GeneratorParams>,
        exciters: Vec<ExciterParams>,
        network: KronNetwork,
        deltas: &[f64],
        eqps: &[f64],
        torque_variation: Vec<Signal>,
        observed: usize,
    ) -> Result<Self> {
        let n = network.len();
        if [params.len(), exciters.len(), deltas.len(), eqps.len(), torque_variation.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::config("network", format!("expected data for {n} machines")));
        }
        if observed >= n {
            return Err(Error::config("network.observed", format!("index {observed} out of range")));
        }
        let mut states: Vec<GeneratorState> = deltas
            .iter()
            .zip(eqps)
            .map(|(&delta, &eqp)| GeneratorState {
                delta,
                eqp,
                ..Default::default()
            })
            .collect();
        let terms = solve_kron(&states, &params, &network, &vec![0.0; n])?;
        let mut machines = Vec::with_capacity(n);
        for (i, ((p, mut ep), var)) in params.into_iter().zip(exciters).zip(torque_variation).enumerate() {
            let term = &terms[i];
            let id = term.i_t * (states[i].delta - term.phi_t).sin();
            let e_f = states[i].eqp + (p.x_d - p.x_dp) * id;
            if e_f < ep.e_f_min || e_f > ep.e_f_max {
                return Err(Error::config(
                    format!("machines[{i}].exciter"),
                    format!("equilibrium field voltage {e_f} pu lies outside the exciter limits"),
                ));
            }
            states[i].avr_state = e_f;
            if ep.v_ref.is_none() {
                ep.v_ref = Some(term.v_t + e_f / ep.k_a);
            }
            machines.push(Machine {
                params: p,
                exciter: ep,
                torque: MechanicalTorque {
                    setpoint: term.t_e,
                    variation: var,
                },
            });
        }
        Ok(Self {
            machines,
            network,
            states,
            observed,
            t: 0.0,
        })
    }

    fn params(&self) -> Vec<GeneratorParams> {
        self.machines.iter().map(|m| m.params).collect()
    }

    pub fn terminals(&self) -> Result<Vec<TerminalQuantities>> {
        let tm: Vec<f64> = self.machines.iter().map(|m| m.torque.at(self.t)).collect();
        solve_kron(&self.states, &self.params(), &self.network, &tm)
    }

    fn derivative(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let n = self.machines.len();
        let states: Vec<GeneratorState> = (0..n)
            .map(|i| GeneratorState::from_array(std::array::from_fn(|k| x[6 * i + k])))
            .collect();
        let tm: Vec<f64> = self.machines.iter().map(|m| m.torque.at(t)).collect();
        let terms = solve_kron(&states, &self.params(), &self.network, &tm)?;
        let mut out = Vec::with_capacity(6 * n);
        for (i, m) in self.machines.iter().enumerate() {
            out.extend(full_derivative(&states[i].to_array(), &terms[i], &m.params, &m.exciter));
        }
        Ok(out)
    }
}

impl Plant for MultiMachinePlant {
    fn time(&self) -> f64 {
        self.t
    }

    fn step(&mut self, dt: f64) -> Result<()> {
        check_step(dt)?;
        let x0: Vec<f64> = self.states.iter().flat_map(|s| s.to_array()).collect();
        let shift = |k: &[f64], s: f64| -> Vec<f64> { x0.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        let t = self.t;
        let k1 = self.derivative(&x0, t)?;
        let k2 = self.derivative(&shift(&k1, dt / 2.0), t + dt / 2.0)?;
        let k3 = self.derivative(&shift(&k2, dt / 2.0), t + dt / 2.0)?;
        let k4 = self.derivative(&shift(&k3, dt), t + dt)?;
        for (i, m) in self.machines.iter().enumerate() {
            let x: [f64; 6] = std::array::from_fn(|k| {
                let j = 6 * i + k;
                x0[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            });
            let mut st = GeneratorState::from_array(x);
            st.avr_state = clamp_field(&m.exciter, st.avr_state);
            check_state(&st, t + dt)?;
            self.states[i] = st;
        }
        self.t += dt;
        Ok(())
    }

    fn observed_state(&self) -> GeneratorState {
        self.states[self.observed]
    }

    fn observed_terminal(&self) -> Result<TerminalQuantities> {
        Ok(self.terminals()?[self.observed])
    }

    fn observed_params(&self) -> &GeneratorParams {
        &self.machines[self.observed].params
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{stator_residual, wscc9_reduced, ChannelSpec};

    fn default_plant(pss: bool) -> SmibPlant {
        let ep = ExciterParams {
            pss_enabled: pss,
            ..Default::default()
        };
        SmibPlant::at_equilibrium(
            GeneratorParams::default(),
            ep,
            Smib::new(0.4, 1.0),
            Signal::zero(),
            0.8,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let mut plant = default_plant(true);
        let x0 = plant.state;
        for _ in 0..1000 {
            plant.step(1e-3).unwrap();
        }
        let x1 = plant.state;
        for (a, b) in x0.to_array().iter().zip(x1.to_array()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn equilibrium_hits_targets() {
        let plant = default_plant(true);
        let term = plant.observed_terminal().unwrap();
        assert!((term.p_t - 0.8).abs() < 1e-12);
        assert!((term.v_t - 1.0).abs() < 1e-12);
        assert!((term.t_e - plant.torque.setpoint).abs() < 1e-12);
        let d = derivatives(&plant.state, &term, &plant.params);
        assert!(d.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn step_bounds_are_enforced() {
        let plant = default_plant(false);
        let r = integrate_step(
            &plant.state,
            &plant.network,
            &plant.params,
            &plant.exciter,
            &plant.torque,
            0.0,
            0.02,
        );
        assert!(matches!(r, Err(Error::Config { .. })));
    }

    fn run_to(plant: &SmibPlant, dt: f64, horizon: f64) -> GeneratorState {
        let mut p = plant.clone();
        let n = (horizon / dt).round() as usize;
        for _ in 0..n {
            p.step(dt).unwrap();
        }
        p.state
    }

    #[test]
    fn rk4_is_fourth_order() {
        let mut plant = default_plant(true);
        let excitation = ChannelSpec {
            amplitudes: vec![0.05, 0.03],
            freqs_hz: vec![0.4, 1.3],
            walk_std: 0.02,
            walk_interval: 0.5,
            walk_tau: 0.2,
        };
        plant.network = NetworkModel::Smib(Smib::new(0.4, 1.0).with_angle_signal(excitation.build(3, 0, 2.0)));
        plant.state.domega = 0.3;
        plant.state.delta += 0.1;
        let reference = run_to(&plant, 0.01 / 32.0, 1.0);
        let coarse = run_to(&plant, 0.01, 1.0);
        let fine = run_to(&plant, 0.005, 1.0);
        let err = |s: &GeneratorState| {
            s.to_array()
                .iter()
                .zip(reference.to_array())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(&coarse) / err(&fine);
        assert!((12.0..=20.0).contains(&ratio), "error ratio {ratio}");
    }

    #[test]
    fn free_speed_response_is_exponential() {
        // T_m - T_e held at zero: feed back the instantaneous T_e as T_m.
        let p = GeneratorParams::default();
        let ep = ExciterParams {
            pss_enabled: false,
            ..Default::default()
        };
        let a1 = p.a1();
        let dt = 1e-3;
        let w0 = 0.2;
        let mut x = [0.0_f64, w0];
        let f = |x: [f64; 2]| {
            let st = GeneratorState {
                delta: x[0],
                domega: x[1],
                eqp: 1.0,
                ..Default::default()
            };
            let term = TerminalQuantities {
                t_e: 0.7,
                t_m: 0.7,
                ..Default::default()
            };
            let d = derivatives(&st, &term, &p);
            [d[0], d[1]]
        };
        let _ = ep;
        let mut worst: f64 = 0.0;
        for k in 1..=1000 {
            let k1 = f(x);
            let k2 = f(axpy(&x, &k1, dt / 2.0));
            let k3 = f(axpy(&x, &k2, dt / 2.0));
            let k4 = f(axpy(&x, &k3, dt));
            x = std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
            let t = k as f64 * dt;
            worst = worst.max((x[1] - w0 * (-a1 * t).exp()).abs());
        }
        assert!(worst < 1e-6, "{worst:e}");
    }

    #[test]
    fn perturbation_decays() {
        let mut plant = default_plant(true);
        let delta_eq = plant.state.delta;
        plant.state.delta += 0.05;
        let dt = 1e-3;
        let mut norms = Vec::new();
        for k in 0..20_000 {
            plant.step(dt).unwrap();
            if k % 1000 == 999 {
                let s = plant.state;
                norms.push(s.domega.hypot(s.delta - delta_eq));
            }
        }
        // after the first few seconds of transients the envelope shrinks monotonically
        for w in norms[4..].windows(2) {
            assert!(w[1] < w[0], "{norms:?}");
        }
        assert!(*norms.last().unwrap() < 1e-3);
    }

    #[test]
    fn stator_residual_stays_small_along_a_run() {
        let mut plant = default_plant(true);
        plant.state.delta += 0.1;
        for _ in 0..2000 {
            plant.step(1e-3).unwrap();
            let term = plant.observed_terminal().unwrap();
            assert!(stator_residual(plant.state.delta, plant.state.eqp, &term, &plant.params) < 1e-9);
        }
    }

    #[test]
    fn multi_machine_equilibrium_is_stationary() {
        let net = wscc9_reduced().unwrap();
        let p = GeneratorParams::default();
        let mut plant = MultiMachinePlant::at_equilibrium(
            vec![p; 3],
            vec![ExciterParams::default(); 3],
            net,
            &[0.06, 1.07, 0.94],
            &[1.06, 0.79, 0.77],
            vec![Signal::zero(), Signal::zero(), Signal::zero()],
            1,
        )
        .unwrap();
        let x0 = plant.states.clone();
        for _ in 0..500 {
            plant.step(1e-3).unwrap();
        }
        for (a, b) in x0.iter().zip(&plant.states) {
            for (u, v) in a.to_array().iter().zip(b.to_array()) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
