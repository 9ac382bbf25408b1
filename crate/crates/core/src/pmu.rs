//! Bounded-noise PMU measurement model.
//!
//! Each of the six channels `(V_t, theta_t, I_t, phi_t, P_t, Q_t)` gets an
//! independent draw from its own RNG stream, truncated by resampling so that
//! `|w_i| <= w_i^max` holds for every emitted sample. The mechanical torque
//! estimate carries a uniform error bounded by `w_Tm_max`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{wrap_angle, TerminalQuantities};
use crate::{Error, Result};

/// Number of measured channels.
pub const CHANNELS: usize = 6;

/// Channel names in sample order.
pub const CHANNEL_NAMES: [&str; CHANNELS] = ["V_t", "theta_t", "I_t", "phi_t", "P_t", "Q_t"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    #[default]
    None,
    Gaussian,
    Laplacian,
    Uniform,
}

/// Noise configuration of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    /// Amplitude signal-to-noise ratio [dB] (Gaussian / Laplacian).
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    /// Per-channel half-widths in channel units (Uniform).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_widths: Option<[f64; CHANNELS]>,
    /// Truncation multiple of the distribution scale.
    #[serde(default = "default_truncation")]
    pub truncation_k: f64,
    pub seed: u64,
    /// Bound of the mechanical-torque error [pu].
    #[serde(rename = "w_Tm_max", default)]
    pub w_tm_max: f64,
}

fn default_snr() -> f64 {
    45.0
}

fn default_truncation() -> f64 {
    4.0
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            family: NoiseFamily::None,
            snr_db: default_snr(),
            half_widths: None,
            truncation_k: default_truncation(),
            seed: 0,
            w_tm_max: 0.0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self, prefix: &str) -> Vec<Error> {
        let mut errs = Vec::new();
        if !(self.truncation_k > 0.0) {
            errs.push(Error::config(
                format!("{prefix}.truncation_k"),
                format!("invariant truncation_k > 0 violated (got {})", self.truncation_k),
            ));
        }
        if self.snr_db.is_nan() {
            errs.push(Error::config(format!("{prefix}.snr_db"), "must not be NaN"));
        }
        if !(self.w_tm_max >= 0.0 && self.w_tm_max.is_finite()) {
            errs.push(Error::config(
                format!("{prefix}.w_Tm_max"),
                format!("invariant w_Tm_max >= 0 violated (got {})", self.w_tm_max),
            ));
        }
        match (self.family, &self.half_widths) {
            (NoiseFamily::Uniform, None) => errs.push(Error::config(
                format!("{prefix}.half_widths"),
                "uniform noise needs one half-width per channel",
            )),
            (NoiseFamily::Uniform, Some(hw)) if hw.iter().any(|&h| !(h >= 0.0 && h.is_finite())) => {
                errs.push(Error::config(
                    format!("{prefix}.half_widths"),
                    "half-widths must be finite and >= 0",
                ))
            }
            _ => {}
        }
        errs
    }
}

/// Per-channel standard deviation `sigma_i = rms_i * 10^(-snr/20)`.
pub fn scale_from_snr(signal_rms: [f64; CHANNELS], snr_db: f64) -> [f64; CHANNELS] {
    let ratio = 10f64.powf(-snr_db / 20.0);
    signal_rms.map(|rms| rms * ratio)
}

/// Laplace scale with the same variance as a Gaussian of deviation `sigma`.
pub fn laplace_scale(sigma: f64) -> f64 {
    sigma / std::f64::consts::SQRT_2
}

/// Resolved noise model: per-channel distribution scale and hard bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub family: NoiseFamily,
    /// Distribution scale per channel (sigma, Laplace b, or uniform half-width).
    pub scale: [f64; CHANNELS],
    /// `w_i^max` per channel.
    pub bound: [f64; CHANNELS],
    pub w_tm_max: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            family: NoiseFamily::None,
            scale: [0.0; CHANNELS],
            bound: [0.0; CHANNELS],
            w_tm_max: 0.0,
        }
    }

    /// Resolves `spec` against calibration RMS values; every scale, bound and
    /// the torque bound are multiplied by `multiplier`.
    pub fn resolve(spec: &NoiseSpec, signal_rms: [f64; CHANNELS], multiplier: f64) -> Self {
        let k = spec.truncation_k;
        let (scale, bound) = match spec.family {
            NoiseFamily::None => return Self::noiseless(),
            NoiseFamily::Gaussian => {
                let s = scale_from_snr(signal_rms, spec.snr_db).map(|v| v * multiplier);
                (s, s.map(|v| k * v))
            }
            NoiseFamily::Laplacian => {
                let b = scale_from_snr(signal_rms, spec.snr_db).map(|v| laplace_scale(v) * multiplier);
                (b, b.map(|v| k * v))
            }
            NoiseFamily::Uniform => {
                let hw = spec.half_widths.unwrap_or([0.0; CHANNELS]).map(|v| v * multiplier);
                (hw, hw)
            }
        };
        let family = if multiplier == 0.0 { NoiseFamily::None } else { spec.family };
        Self {
            family,
            scale,
            bound,
            w_tm_max: spec.w_tm_max * multiplier,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.family == NoiseFamily::None && self.w_tm_max == 0.0
    }

    fn draw(&self, channel: usize, rng: &mut ChaCha8Rng) -> f64 {
        let s = self.scale[channel];
        let b = self.bound[channel];
        if s == 0.0 {
            return 0.0;
        }
        match self.family {
            NoiseFamily::None => 0.0,
            NoiseFamily::Uniform => rng.random_range(-b..=b),
            NoiseFamily::Gaussian => loop {
                let w = s * rng.sample::<f64, _>(StandardNormal);
                if w.abs() <= b {
                    break w;
                }
            },
            NoiseFamily::Laplacian => loop {
                // inverse CDF on u in (-1/2, 1/2)
                let u: f64 = rng.random::<f64>() - 0.5;
                let w = -s * u.signum() * (1.0 - 2.0 * u.abs()).ln();
                if w.is_finite() && w.abs() <= b {
                    break w;
                }
            },
        }
    }
}

/// Independent RNG streams: one per channel plus one for the torque error.
#[derive(Debug, Clone)]
pub struct PmuRng {
    channels: [ChaCha8Rng; CHANNELS],
    torque: ChaCha8Rng,
}

impl PmuRng {
    pub fn new(seed: u64) -> Self {
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        Self {
            channels: std::array::from_fn(|i| stream(i as u64)),
            torque: stream(CHANNELS as u64),
        }
    }
}

/// One noisy PMU record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmuSample {
    pub t: f64,
    /// `y1..y6`: noisy `V_t, theta_t, I_t, phi_t, P_t, Q_t`.
    pub y: [f64; CHANNELS],
    /// Noisy mechanical torque.
    pub tm_hat: f64,
}

impl PmuSample {
    /// Noise-free sample of `term`.
    pub fn exact(t: f64, term: &TerminalQuantities) -> Self {
        Self {
            t,
            y: truth_vector(term),
            tm_hat: term.t_m,
        }
    }
}

pub fn truth_vector(term: &TerminalQuantities) -> [f64; CHANNELS] {
    [term.v_t, term.theta_t, term.i_t, term.phi_t, term.p_t, term.q_t]
}

/// Draws one sample. With a noiseless model the sample equals the truth bit-for-bit.
pub fn sample(t: f64, term: &TerminalQuantities, model: &NoiseModel, rng: &mut PmuRng) -> PmuSample {
    let truth = truth_vector(term);
    let mut y = truth;
    if model.family != NoiseFamily::None {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += model.draw(i, &mut rng.channels[i]);
        }
        if y[0] <= 0.0 {
            y[0] = f64::MIN_POSITIVE;
        }
        y[2] = y[2].max(0.0);
        y[1] = wrap_angle(y[1]);
        y[3] = wrap_angle(y[3]);
    }
    let mut tm_hat = term.t_m;
    if model.w_tm_max > 0.0 {
        tm_hat += rng.torque.random_range(-model.w_tm_max..=model.w_tm_max);
    }
    PmuSample { t, y, tm_hat }
}

/// PMU reporting schedule derived from the integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decimator {
    pub dt: f64,
    pub rate: f64,
    /// Integration steps per PMU period.
    pub steps_per_sample: usize,
}

impl Decimator {
    pub fn new(dt: f64, rate: f64) -> Result<Self> {
        if !(dt > 0.0 && rate > 0.0) {
            return Err(Error::config("sim.pmu_rate", "dt and pmu_rate must be positive"));
        }
        let ratio = 1.0 / (dt * rate);
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(
                "sim.pmu_rate",
                format!(
                    "pmu_rate = {rate} Hz must divide the integration rate 1/dt = {} Hz evenly",
                    1.0 / dt
                ),
            ));
        }
        Ok(Self {
            dt,
            rate,
            steps_per_sample: n as usize,
        })
    }

    /// PMU period [s].
    pub fn period(&self) -> f64 {
        self.steps_per_sample as f64 * self.dt
    }

    /// Number of samples in `[0, duration]`, both endpoints included.
    pub fn count(&self, duration: f64) -> usize {
        (duration * self.rate + 1e-9).floor() as usize + 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.rate
    }

    pub fn sample_times(&self, duration: f64) -> Vec<f64> {
        (0..self.count(duration)).map(|k| self.time(k)).collect()
    }
}
