//! End-to-end experiments: simulate, measure, estimate, analyze, write.
//!
//! The noise-free part of a scenario (ground truth, calibration and the
//! noise-free regression) is computed once by [`prepare`] and shared by every
//! noisy realization, so sweeps only redo the measurement-dependent work.

pub mod config;
mod output;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapobs::{AdaptiveObserver, ObserverOutput, RegressionRecord, LOOKAHEAD};
use crate::algobs::{self, AlgebraicEstimate};
use crate::analysis::{self, BoundReport, Channels, Envelope, PeReport, RunStatistics, StepLog};
use crate::dynamics::{
    wscc9_reduced, GeneratorParams, GeneratorState, KronNetwork, MultiMachinePlant, Plant, Smib, SmibPlant,
    TerminalQuantities,
};
use crate::pmu::{self, Decimator, NoiseModel, PmuRng, PmuSample, CHANNELS};
use crate::{Error, Result};

pub use config::{AnalysisConfig, NetworkConfig, NetworkKind, OutputConfig, ScenarioConfig, SimConfig};
pub use output::{report, write_run, write_sweep, RunArtifacts, CSV_COLUMNS};

/// Ground truth at one PMU instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub state: GeneratorState,
    pub terminal: TerminalQuantities,
}

/// Noise-independent data of a scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub decimator: Decimator,
    /// Machine constants of the observed generator.
    pub params: GeneratorParams,
    /// True `(a1, a2)`.
    pub theta: [f64; 2],
    /// Truth at every PMU instant, including the observer lookahead.
    pub truth: Vec<TruthSample>,
    /// Number of samples with `t <= duration`.
    pub n_out: usize,
    /// Per-channel RMS used to turn an SNR into noise scales.
    pub signal_rms: [f64; CHANNELS],
    pub envelope: Envelope,
    /// Observer run on noise-free measurements.
    pub nominal: Vec<ObserverOutput>,
}

fn build_plant(cfg: &ScenarioConfig, horizon: f64) -> Result<Box<dyn Plant>> {
    let ex = &cfg.excitation;
    let net = &cfg.network;
    match net.kind {
        NetworkKind::Smib => {
            let smib = Smib::new(net.x_e, net.v_inf).with_angle_signal(ex.theta_inf_signal(horizon));
            Ok(Box::new(SmibPlant::at_equilibrium(
                cfg.generator,
                cfg.exciter,
                smib,
                ex.t_m_signal(0, horizon),
                net.p_t0,
                net.v_t0,
            )?))
        }
        NetworkKind::Kron => {
            let network = match (&net.y_red_re, &net.y_red_im) {
                (Some(re), Some(im)) => {
                    let n = re.len();
                    let y = nalgebra::DMatrix::from_fn(n, n, |i, j| num_complex::Complex64::new(re[i][j], im[i][j]));
                    KronNetwork::new(y)?
                }
                _ => wscc9_reduced()?,
            };
            let n = network.len();
            Ok(Box::new(MultiMachinePlant::at_equilibrium(
                vec![cfg.generator; n],
                vec![cfg.exciter; n],
                network,
                &net.deltas,
                &net.eqps,
                (0..n as u64).map(|i| ex.t_m_signal(i, horizon)).collect(),
                net.observed,
            )?))
        }
    }
}

/// Simulates the ground truth at the PMU instants of `[0, duration]` plus the
/// observer lookahead.
pub fn simulate_truth(cfg: &ScenarioConfig) -> Result<(Decimator, Vec<TruthSample>, usize)> {
    let dec = Decimator::new(cfg.sim.dt, cfg.sim.pmu_rate)?;
    let n_out = dec.count(cfg.sim.duration);
    let total = n_out + LOOKAHEAD;
    let horizon = dec.time(total);
    let mut plant = build_plant(cfg, horizon)?;
    let mut truth = Vec::with_capacity(total);
    for k in 0..total {
        if k > 0 {
            for _ in 0..dec.steps_per_sample {
                plant.step(cfg.sim.dt)?;
            }
        }
        truth.push(TruthSample {
            t: dec.time(k),
            state: plant.observed_state(),
            terminal: plant.observed_terminal()?,
        });
    }
    Ok((dec, truth, n_out))
}

/// Algebraic estimates of a measurement stream, unwrapped sample to sample.
pub fn algebraic_stream(samples: &[PmuSample], p: &GeneratorParams) -> Result<Vec<AlgebraicEstimate>> {
    let mut out: Vec<AlgebraicEstimate> = Vec::with_capacity(samples.len());
    for s in samples {
        let e = algobs::estimate(s, p, out.last())?;
        out.push(e);
    }
    Ok(out)
}

/// Adaptive observer over algebraic estimates; `u = T_m_hat - Te_hat`.
pub fn observer_stream(
    cfg: &ScenarioConfig,
    dec: &Decimator,
    samples: &[PmuSample],
    alg: &[AlgebraicEstimate],
) -> Result<Vec<ObserverOutput>> {
    let mut obs = AdaptiveObserver::new(cfg.estimator, dec.period())?;
    let mut out = Vec::with_capacity(alg.len());
    for (s, e) in samples.iter().zip(alg) {
        if let Some(o) = obs.push(e.t, e.x1_hat, s.tm_hat - e.te_hat)? {
            out.push(o);
        }
    }
    Ok(out)
}

/// Validates `cfg` and computes everything that does not depend on noise.
pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (decimator, truth, n_out) = simulate_truth(cfg)?;
    let params = cfg.generator;

    let mut sq = [0.0; CHANNELS];
    let mut env = Envelope {
        v_max: 0.0,
        i_max: 0.0,
        x3_max: 0.0,
        psi_min: f64::INFINITY,
    };
    let exact: Vec<PmuSample> = truth.iter().map(|s| PmuSample::exact(s.t, &s.terminal)).collect();
    for (s, e) in truth[..n_out].iter().zip(&exact) {
        for (c, v) in pmu::truth_vector(&s.terminal).iter().enumerate() {
            sq[c] += v * v;
        }
        env.v_max = env.v_max.max(s.terminal.v_t);
        env.i_max = env.i_max.max(s.terminal.i_t);
        env.x3_max = env.x3_max.max(s.state.eqp);
        env.psi_min = env.psi_min.min(algobs::compute_psi(e, &params)?.mag());
    }
    let mut signal_rms = sq.map(|v| (v / n_out as f64).sqrt());
    // angles are referred to a unit phasor rather than to their own value
    signal_rms[1] = 1.0;
    signal_rms[3] = 1.0;

    let alg = algebraic_stream(&exact, &params)?;
    let nominal = observer_stream(cfg, &decimator, &exact, &alg)?;
    Ok(Prepared {
        config: cfg.clone(),
        decimator,
        params,
        theta: params.theta(),
        truth,
        n_out,
        signal_rms,
        envelope: env,
        nominal,
    })
}

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: f64,
    pub delta: f64,
    pub domega: f64,
    pub eqp: f64,
    pub x1_hat: f64,
    pub x2_hat: f64,
    pub x3_hat: f64,
    pub theta1_hat: f64,
    pub theta2_hat: f64,
    #[serde(rename = "Delta")]
    pub delta_det: f64,
    pub y: [f64; CHANNELS],
    pub err: [f64; 5],
}

/// Everything one noisy realization produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub multiplier: f64,
    pub seed: u64,
    pub noise: NoiseModel,
    pub rows: Vec<Row>,
    pub records: Vec<RegressionRecord>,
    pub nominal_records: Vec<RegressionRecord>,
    pub bounds: BoundReport,
    pub pe: PeReport,
    /// Share of samples with `|f - f_s| <= 0.05 Hz`.
    pub frequency_in_band: f64,
    /// Largest `|x1_hat - x1|` and `|x3_hat - x3|` over the whole run.
    pub sup_alg_err: [f64; 2],
}

/// Runs the measurement-dependent part of a scenario with all noise bounds
/// scaled by `multiplier` and the PMU noise drawn from `seed`.
pub fn realize(prep: &Prepared, multiplier: f64, seed: u64) -> Result<RunOutcome> {
    let cfg = &prep.config;
    let noise = NoiseModel::resolve(&cfg.noise, prep.signal_rms, multiplier);
    let mut rng = PmuRng::new(seed);
    let samples: Vec<PmuSample> = prep
        .truth
        .iter()
        .map(|s| pmu::sample(s.t, &s.terminal, &noise, &mut rng))
        .collect();
    let alg = algebraic_stream(&samples, &prep.params)?;
    let obs = observer_stream(cfg, &prep.decimator, &samples, &alg)?;

    let n = prep.n_out;
    let theta = prep.theta;
    let mut rows = Vec::with_capacity(n);
    let mut logs = Vec::with_capacity(n);
    let mut sup_alg = [0.0f64; 2];
    let mut in_band = 0usize;
    for j in 0..n {
        let tr = &prep.truth[j];
        let (a, o, s) = (&alg[j], &obs[j], &samples[j]);
        let st = tr.state;
        let err = [
            a.x1_hat - st.delta,
            o.x2_hat - st.domega,
            a.x3_hat - st.eqp,
            o.theta_hat[0] - theta[0],
            o.theta_hat[1] - theta[1],
        ];
        sup_alg[0] = sup_alg[0].max(err[0].abs());
        sup_alg[1] = sup_alg[1].max(err[2].abs());
        if (st.domega / std::f64::consts::TAU).abs() <= 0.05 {
            in_band += 1;
        }
        rows.push(Row {
            t: tr.t,
            delta: st.delta,
            domega: st.domega,
            eqp: st.eqp,
            x1_hat: a.x1_hat,
            x2_hat: o.x2_hat,
            x3_hat: a.x3_hat,
            theta1_hat: o.theta_hat[0],
            theta2_hat: o.theta_hat[1],
            delta_det: o.record.delta,
            y: s.y,
            err,
        });
        logs.push(StepLog {
            t: tr.t,
            truth: [st.delta, st.domega, st.eqp],
            estimate: [a.x1_hat, o.x2_hat, a.x3_hat, o.theta_hat[0], o.theta_hat[1]],
            w_tm: s.tm_hat - tr.terminal.t_m,
            w_te: a.te_hat - tr.terminal.t_e,
            record: o.record,
            nominal: Some(prep.nominal[j].record),
        });
    }

    let an = &cfg.analysis;
    let statistics: RunStatistics =
        analysis::run_statistics(&logs, theta, &cfg.estimator, an.settling_fraction, None)?;
    let algebraic = analysis::algebraic_bounds(&noise, &prep.envelope, &prep.params)?;
    let delta_series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.delta_det)).collect();
    let pe = analysis::pe_metric(&delta_series, an.pe_window_t, an.epsilon_pe)?;
    Ok(RunOutcome {
        multiplier,
        seed,
        noise,
        records: obs[..n].iter().map(|o| o.record).collect(),
        nominal_records: prep.nominal[..n].iter().map(|o| o.record).collect(),
        rows,
        bounds: BoundReport {
            algebraic,
            envelope: prep.envelope,
            statistics,
        },
        pe,
        frequency_in_band: in_band as f64 / n as f64,
        sup_alg_err: sup_alg,
    })
}

/// Full pipeline in memory with the configured noise seed.
pub fn execute(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let prep = prepare(cfg)?;
    realize(&prep, 1.0, cfg.noise.seed)
}

/// Runs a scenario and writes its artifacts to `cfg.outputs.dir`.
pub fn run(cfg: &ScenarioConfig) -> Result<RunArtifacts> {
    let out = execute(cfg)?;
    write_run(cfg, &out, &cfg.outputs.dir)
}

/// Seed of sweep cell `(multiplier index, replica index)`.
pub fn child_seed(master: u64, multiplier_index: usize, replica: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((multiplier_index as u64).to_le_bytes());
    h.update((replica as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Result of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub multiplier_index: usize,
    pub multiplier: f64,
    pub replica: usize,
    pub seed: u64,
    /// `None` when the cell completed, otherwise the failure message.
    pub fault: Option<String>,
    pub fault_time: Option<f64>,
    pub sup_err: Channels,
    pub rms_err: Channels,
    pub sup_alg_err: [f64; 2],
    pub w_x1_max: f64,
    pub w_x3_max: f64,
    pub pe_satisfied: bool,
}

impl SweepCell {
    fn from_result(mi: usize, multiplier: f64, replica: usize, seed: u64, r: Result<RunOutcome>) -> Self {
        match r {
            Ok(o) => Self {
                multiplier_index: mi,
                multiplier,
                replica,
                seed,
                fault: None,
                fault_time: None,
                sup_err: o.bounds.statistics.sup_err,
                rms_err: o.bounds.statistics.rms_err,
                sup_alg_err: o.sup_alg_err,
                w_x1_max: o.bounds.algebraic.w_x1_max,
                w_x3_max: o.bounds.algebraic.w_x3_max,
                pe_satisfied: o.pe.pe_satisfied,
            },
            Err(e) => {
                let nan = Channels::from_array([f64::NAN; 5]);
                Self {
                    multiplier_index: mi,
                    multiplier,
                    replica,
                    seed,
                    fault_time: match &e {
                        Error::Divergence { t } | Error::Simulation { t, .. } => Some(*t),
                        _ => None,
                    },
                    fault: Some(e.to_string()),
                    sup_err: nan,
                    rms_err: nan,
                    sup_alg_err: [f64::NAN; 2],
                    w_x1_max: f64::NAN,
                    w_x3_max: f64::NAN,
                    pe_satisfied: false,
                }
            }
        }
    }
}

/// Runs every `(multiplier, replica)` cell. Cells run on the rayon pool, or on
/// a dedicated pool of `threads` workers; results never depend on scheduling.
pub fn sweep(cfg: &ScenarioConfig, multipliers: &[f64], replicas: usize, threads: Option<usize>) -> Result<Vec<SweepCell>> {
    if replicas == 0 {
        return Err(Error::config("replicas", "need at least one replica"));
    }
    if let Some(m) = multipliers.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
        return Err(Error::config("scales", format!("noise multipliers must be finite and >= 0 (got {m})")));
    }
    let prep = prepare(cfg)?;
    sweep_prepared(&prep, multipliers, replicas, threads)
}

/// [`sweep`] on an already prepared scenario.
pub fn sweep_prepared(prep: &Prepared, multipliers: &[f64], replicas: usize, threads: Option<usize>) -> Result<Vec<SweepCell>> {
    let master = prep.config.noise.seed;
    let cells: Vec<(usize, usize)> = (0..multipliers.len())
        .flat_map(|mi| (0..replicas).map(move |r| (mi, r)))
        .collect();
    let work = || -> Vec<SweepCell> {
        cells
            .par_iter()
            .map(|&(mi, r)| {
                let seed = child_seed(master, mi, r);
                SweepCell::from_result(mi, multipliers[mi], r, seed, realize(prep, multipliers[mi], seed))
            })
            .collect()
    };
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Analysis {
                    message: format!("cannot start worker pool: {e}"),
                })?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}
