//! Speed and parameter identification from exact PMU data: the DREM observer
//! converges to the true `a1 = ws*D/(2H)` and `a2 = ws/(2H)`.

use sgobs::pmu::PmuSample;
use sgobs::runner::{algebraic_stream, observer_stream, simulate_truth, ScenarioConfig};

fn main() -> sgobs::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.sim.duration = 60.0;
    let theta = cfg.generator.theta();

    let (dec, truth, n) = simulate_truth(&cfg)?;
    let samples: Vec<PmuSample> = truth.iter().map(|s| PmuSample::exact(s.t, &s.terminal)).collect();
    let alg = algebraic_stream(&samples, &cfg.generator)?;
    let obs = observer_stream(&cfg, &dec, &samples, &alg)?;

    println!("true theta = [{:.5}, {:.5}]", theta[0], theta[1]);
    println!("{:>5} {:>10} {:>10} {:>11} {:>10}", "t", "a1_hat", "a2_hat", "x2 err", "Delta");
    for j in (0..n).step_by(250) {
        let o = &obs[j];
        println!(
            "{:5.1} {:10.5} {:10.5} {:11.3e} {:10.3e}",
            o.t,
            o.theta_hat[0],
            o.theta_hat[1],
            o.x2_hat - truth[j].state.domega,
            o.record.delta
        );
    }
    Ok(())
}
