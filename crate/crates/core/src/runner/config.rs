//! Scenario configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapobs::EstimatorConfig;
use crate::dynamics::{ExcitationSpec, ExciterParams, GeneratorParams, MAX_STEP};
use crate::pmu::{Decimator, NoiseSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    #[default]
    Smib,
    /// Machines on a Kron-reduced network; all share the generator and
    /// exciter blocks, one of them is observed.
    Kron,
}

/// Network block of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    #[serde(default)]
    pub kind: NetworkKind,
    /// Tie reactance [pu] (SMIB).
    #[serde(default = "default_x_e")]
    pub x_e: f64,
    #[serde(rename = "V_inf", default = "one")]
    pub v_inf: f64,
    /// Initial active power [pu] (SMIB).
    #[serde(rename = "P_t0", default = "default_p_t0")]
    pub p_t0: f64,
    /// Initial terminal voltage [pu] (SMIB).
    #[serde(rename = "V_t0", default = "one")]
    pub v_t0: f64,
    /// Real and imaginary parts of the reduced admittance matrix (Kron);
    /// when absent the reduced WSCC 9-bus system is used.
    #[serde(rename = "Y_red_re", default, skip_serializing_if = "Option::is_none")]
    pub y_red_re: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Y_red_im", default, skip_serializing_if = "Option::is_none")]
    pub y_red_im: Option<Vec<Vec<f64>>>,
    /// Initial rotor angles and transient voltages (Kron).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eqps: Vec<f64>,
    /// Index of the machine carrying the PMU (Kron).
    #[serde(default)]
    pub observed: usize,
}

fn default_x_e() -> f64 {
    0.3
}

fn one() -> f64 {
    1.0
}

fn default_p_t0() -> f64 {
    0.8
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            kind: NetworkKind::Smib,
            x_e: default_x_e(),
            v_inf: 1.0,
            p_t0: default_p_t0(),
            v_t0: 1.0,
            y_red_re: None,
            y_red_im: None,
            deltas: Vec::new(),
            eqps: Vec::new(),
            observed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self, prefix: &str) -> Vec<Error> {
        let mut errs = Vec::new();
        match self.kind {
            NetworkKind::Smib => {
                errs.extend(crate::dynamics::Smib::new(self.x_e, self.v_inf).validate(prefix));
                if !(self.v_t0 > 0.0) {
                    errs.push(Error::config(
                        format!("{prefix}.V_t0"),
                        format!("invariant V_t0 > 0 violated (got {})", self.v_t0),
                    ));
                }
                if !self.p_t0.is_finite() {
                    errs.push(Error::config(format!("{prefix}.P_t0"), "must be finite"));
                }
            }
            NetworkKind::Kron => {
                let n = match (&self.y_red_re, &self.y_red_im) {
                    (Some(re), Some(im)) => {
                        if re.len() != im.len() || re.iter().zip(im).any(|(a, b)| a.len() != b.len()) {
                            errs.push(Error::config(
                                format!("{prefix}.Y_red_im"),
                                "real and imaginary parts must have the same shape",
                            ));
                        }
                        re.len()
                    }
                    (None, None) => 3,
                    _ => {
                        errs.push(Error::config(
                            format!("{prefix}.Y_red_re"),
                            "give both Y_red_re and Y_red_im or neither",
                        ));
                        return errs;
                    }
                };
                if self.deltas.len() != n || self.eqps.len() != n {
                    errs.push(Error::config(
                        format!("{prefix}.deltas"),
                        format!("deltas and eqps need one entry per machine ({n})"),
                    ));
                }
                if self.observed >= n {
                    errs.push(Error::config(
                        format!("{prefix}.observed"),
                        format!("machine index {} out of range for {n} machines", self.observed),
                    ));
                }
                if self.eqps.iter().any(|&e| !(e > 0.0)) {
                    errs.push(Error::config(format!("{prefix}.eqps"), "invariant eqp > 0 violated"));
                }
            }
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Integration step [s].
    pub dt: f64,
    /// Simulated time [s].
    pub duration: f64,
    /// PMU reporting rate [Hz]; must divide `1/dt`.
    pub pmu_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 120.0,
            pmu_rate: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Fraction of the run discarded before error statistics.
    #[serde(default = "default_settling")]
    pub settling_fraction: f64,
    /// Window of the excitation integral [s].
    #[serde(rename = "pe_window_T", default = "default_pe_window")]
    pub pe_window_t: f64,
    /// Excitation level; 1% of the mean windowed integral when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_pe: Option<f64>,
}

fn default_settling() -> f64 {
    0.5
}

fn default_pe_window() -> f64 {
    5.0
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            settling_fraction: default_settling(),
            pe_window_t: default_pe_window(),
            epsilon_pe: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write `timeseries.csv`.
    #[serde(default = "yes")]
    pub timeseries: bool,
    /// Write `regression.csv` with the DREM quantities of every sample.
    #[serde(default)]
    pub regression: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            timeseries: true,
            regression: false,
        }
    }
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub generator: GeneratorParams,
    #[serde(default)]
    pub exciter: ExciterParams,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub excitation: ExcitationSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

/// Line and column (1-based) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl ScenarioConfig {
    /// Parses TOML text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            let message = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(text, span.start);
                    format!("line {l}, column {c}: {msg}")
                }
                None => msg,
            };
            Error::Parse {
                file: origin.to_path_buf(),
                message,
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable as TOML")
    }

    /// Every invariant violation, each tagged with its key path.
    pub fn diagnostics(&self) -> Vec<Error> {
        let mut errs = self.generator.validate("generator");
        errs.extend(self.exciter.validate("exciter"));
        errs.extend(self.network.validate("network"));
        errs.extend(self.excitation.validate("excitation"));
        errs.extend(self.noise.validate("noise"));
        errs.extend(self.estimator.validate("estimator"));
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt <= MAX_STEP) {
            errs.push(Error::config(
                "sim.dt",
                format!("invariant 0 < dt <= {MAX_STEP} violated (got {})", s.dt),
            ));
        }
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            errs.push(Error::config(
                "sim.duration",
                format!("invariant duration > 0 violated (got {})", s.duration),
            ));
        }
        if s.dt > 0.0 {
            if let Err(e) = Decimator::new(s.dt, s.pmu_rate) {
                errs.push(e);
            }
        }
        let a = &self.analysis;
        if !(0.0..1.0).contains(&a.settling_fraction) {
            errs.push(Error::config(
                "analysis.settling_fraction",
                format!("must lie in [0, 1) (got {})", a.settling_fraction),
            ));
        }
        if !(a.pe_window_t > 0.0 && a.pe_window_t <= s.duration) {
            errs.push(Error::config(
                "analysis.pe_window_T",
                format!("must lie in (0, duration] (got {})", a.pe_window_t),
            ));
        }
        if a.epsilon_pe.is_some_and(|e| !(e >= 0.0)) {
            errs.push(Error::config("analysis.epsilon_pe", "invariant epsilon_pe >= 0 violated"));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = self.diagnostics();
        match errs.len() {
            0 => Ok(()),
            1 => Err(errs.remove(0)),
            _ => Err(Error::ConfigList(errs)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        let back = ScenarioConfig::parse(&c.to_toml(), Path::new("x.cfg")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_reports_position() {
        let err = ScenarioConfig::parse("[sim]\ndt = 0.001\nduraton = 3.0\n", Path::new("a.cfg")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3, column 1"), "{msg}");
        assert!(msg.contains("duraton"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn negative_inertia_named() {
        let c = ScenarioConfig::parse("[generator]\nH = -1.0\n", Path::new("a.cfg")).unwrap();
        let d = c.diagnostics();
        assert_eq!(d.len(), 1);
        let msg = d[0].to_string();
        assert!(msg.starts_with("generator.H") && msg.contains("H > 0"), "{msg}");
    }

    #[test]
    fn pmu_rate_must_divide() {
        let c = ScenarioConfig::parse("[sim]\ndt = 0.001\nduration = 10.0\npmu_rate = 60.0\n", Path::new("a.cfg"))
            .unwrap();
        let d = c.diagnostics();
        assert!(d.iter().any(|e| e.to_string().contains("sim.pmu_rate") && e.to_string().contains("divide")));
    }
}
