//! Deterministic excitation signals: a multi-sine plus a smoothed random walk.
//!
//! The random walk is a sum of `tanh` steps, so the signal is analytic and the
//! fixed-step integrator keeps its full order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::Error;

/// Steps further than this many smoothing widths away are exactly 0 or 1 in f64.
const SATURATION: f64 = 40.0;

#[derive(Debug, Clone, PartialEq)]
struct Sine {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

/// Random walk with increments at fixed knots, each smoothed by a `tanh` step.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothWalk {
    knots: Vec<f64>,
    increments: Vec<f64>,
    /// `prefix[k]` = sum of the first `k` increments.
    prefix: Vec<f64>,
    tau: f64,
}

impl SmoothWalk {
    pub fn new(knots: Vec<f64>, increments: Vec<f64>, tau: f64) -> Self {
        assert_eq!(knots.len(), increments.len());
        let mut prefix = Vec::with_capacity(increments.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for inc in &increments {
            acc += inc;
            prefix.push(acc);
        }
        Self {
            knots,
            increments,
            prefix,
            tau,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let lo = self.knots.partition_point(|&k| k < t - SATURATION * self.tau);
        let hi = self.knots.partition_point(|&k| k <= t + SATURATION * self.tau);
        let mut v = self.prefix[lo];
        for k in lo..hi {
            let x = (t - self.knots[k]) / self.tau;
            v += self.increments[k] * 0.5 * (1.0 + x.tanh());
        }
        v
    }
}

/// A scalar excitation signal that is exactly zero at `t = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Signal {
    sines: Vec<Sine>,
    walk: Option<SmoothWalk>,
    walk_at_zero: f64,
}

impl Signal {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Multi-sine with explicit amplitudes, frequencies [Hz] and phases [rad].
    pub fn multisine(amplitudes: &[f64], freqs_hz: &[f64], phases: &[f64]) -> Self {
        let sines = amplitudes
            .iter()
            .zip(freqs_hz)
            .zip(phases)
            .map(|((&amplitude, &f), &phase)| Sine {
                amplitude,
                omega: std::f64::consts::TAU * f,
                phase,
            })
            .collect();
        Self {
            sines,
            walk: None,
            walk_at_zero: 0.0,
        }
    }

    pub fn with_walk(mut self, walk: SmoothWalk) -> Self {
        self.walk_at_zero = walk.value(0.0);
        self.walk = Some(walk);
        self
    }

    pub fn value(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for s in &self.sines {
            v += s.amplitude * ((s.omega * t + s.phase).sin() - s.phase.sin());
        }
        if let Some(w) = &self.walk {
            v += w.value(t) - self.walk_at_zero;
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.sines.iter().all(|s| s.amplitude == 0.0)
            && self
                .walk
                .as_ref()
                .is_none_or(|w| w.increments.iter().all(|&i| i == 0.0))
    }
}

/// Excitation of one channel (infinite-bus angle or mechanical torque).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// Sine amplitudes [rad or pu].
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    /// Sine frequencies [Hz]; phases are drawn from the excitation seed.
    #[serde(default)]
    pub freqs_hz: Vec<f64>,
    /// Standard deviation of each random-walk increment.
    #[serde(default)]
    pub walk_std: f64,
    /// Spacing of random-walk knots [s].
    #[serde(default = "default_walk_interval")]
    pub walk_interval: f64,
    /// Width of each smoothed step [s].
    #[serde(default = "default_walk_tau")]
    pub walk_tau: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            amplitudes: Vec::new(),
            freqs_hz: Vec::new(),
            walk_std: 0.0,
            walk_interval: default_walk_interval(),
            walk_tau: default_walk_tau(),
        }
    }
}

fn default_walk_interval() -> f64 {
    2.0
}

fn default_walk_tau() -> f64 {
    0.5
}

impl ChannelSpec {
    pub fn validate(&self, prefix: &str) -> Vec<Error> {
        let mut errs = Vec::new();
        if self.amplitudes.len() != self.freqs_hz.len() {
            errs.push(Error::config(
                format!("{prefix}.freqs_hz"),
                format!(
                    "needs one frequency per amplitude ({} amplitudes, {} frequencies)",
                    self.amplitudes.len(),
                    self.freqs_hz.len()
                ),
            ));
        }
        if self.amplitudes.iter().chain(&self.freqs_hz).any(|v| !v.is_finite()) {
            errs.push(Error::config(format!("{prefix}.amplitudes"), "values must be finite"));
        }
        if self.freqs_hz.iter().any(|&f| f < 0.0) {
            errs.push(Error::config(format!("{prefix}.freqs_hz"), "frequencies must be >= 0"));
        }
        if !(self.walk_std >= 0.0 && self.walk_std.is_finite()) {
            errs.push(Error::config(
                format!("{prefix}.walk_std"),
                format!("invariant walk_std >= 0 violated (got {})", self.walk_std),
            ));
        }
        if !(self.walk_interval > 0.0) {
            errs.push(Error::config(
                format!("{prefix}.walk_interval"),
                format!("invariant walk_interval > 0 violated (got {})", self.walk_interval),
            ));
        }
        if !(self.walk_tau > 0.0) {
            errs.push(Error::config(
                format!("{prefix}.walk_tau"),
                format!("invariant walk_tau > 0 violated (got {})", self.walk_tau),
            ));
        }
        errs
    }

    /// Builds the signal over `[0, horizon]`; `stream` selects an independent
    /// RNG stream of the excitation seed.
    pub fn build(&self, seed: u64, stream: u64, horizon: f64) -> Signal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let phases: Vec<f64> = self
            .amplitudes
            .iter()
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
            .collect();
        let sig = Signal::multisine(&self.amplitudes, &self.freqs_hz, &phases);
        if self.walk_std == 0.0 {
            return sig;
        }
        let n = (horizon / self.walk_interval).ceil() as usize + 1;
        let knots: Vec<f64> = (1..=n).map(|k| k as f64 * self.walk_interval).collect();
        let increments: Vec<f64> = (0..n)
            .map(|_| self.walk_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        sig.with_walk(SmoothWalk::new(knots, increments, self.walk_tau))
    }
}

/// Load-variation excitation of a scenario.
///
/// The default moves the infinite-bus angle by a few hundredths of a radian
/// and the torque by a few percent, which keeps the speed deviation of the
/// default machine within 0.05 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSpec {
    pub seed: u64,
    /// Variation of the infinite-bus angle [rad] (SMIB only).
    #[serde(default)]
    pub theta_inf: ChannelSpec,
    /// Variation of the mechanical torque around its setpoint [pu].
    #[serde(default)]
    pub t_m: ChannelSpec,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        Self {
            seed: 2024,
            theta_inf: ChannelSpec {
                amplitudes: vec![0.025, 0.015],
                freqs_hz: vec![0.25, 0.7],
                walk_std: 0.025,
                ..ChannelSpec::default()
            },
            t_m: ChannelSpec {
                amplitudes: vec![0.025, 0.02, 0.015],
                freqs_hz: vec![0.15, 0.4, 1.1],
                walk_std: 0.025,
                ..ChannelSpec::default()
            },
        }
    }
}

impl ExcitationSpec {
    /// No load variation at all.
    pub fn none() -> Self {
        Self {
            seed: 0,
            theta_inf: ChannelSpec::default(),
            t_m: ChannelSpec::default(),
        }
    }

    pub fn validate(&self, prefix: &str) -> Vec<Error> {
        let mut errs = self.theta_inf.validate(&format!("{prefix}.theta_inf"));
        errs.extend(self.t_m.validate(&format!("{prefix}.t_m")));
        errs
    }

    pub fn theta_inf_signal(&self, horizon: f64) -> Signal {
        self.theta_inf.build(self.seed, 0, horizon)
    }

    /// Torque variation of machine `index` (0 is the observed machine).
    pub fn t_m_signal(&self, index: u64, horizon: f64) -> Signal {
        self.t_m.build(self.seed, 1 + index, horizon)
    }
}
