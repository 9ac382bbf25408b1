//! Seeded Monte-Carlo grid over noise multipliers; the median estimation
//! error grows linearly with the noise bound.

use sgobs::pmu::NoiseFamily;
use sgobs::runner::{sweep, ScenarioConfig};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> sgobs::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.sim.duration = 30.0;
    cfg.noise.family = NoiseFamily::Laplacian;
    let scales = [0.25, 0.5, 1.0, 2.0, 4.0];
    let cells = sweep(&cfg, &scales, 10, None)?;
    println!("{:>6} {:>7} {:>11} {:>11} {:>11}", "scale", "faults", "med sup x1", "med sup x3", "med sup x2");
    for (mi, m) in scales.iter().enumerate() {
        let row: Vec<_> = cells.iter().filter(|c| c.multiplier_index == mi).collect();
        let faults = row.iter().filter(|c| c.fault.is_some()).count();
        let med = |f: fn(&sgobs::runner::SweepCell) -> f64| median(row.iter().map(|c| f(c)).collect());
        println!(
            "{m:6.2} {faults:7} {:11.3e} {:11.3e} {:11.3e}",
            med(|c| c.sup_err.x1),
            med(|c| c.sup_err.x3),
            med(|c| c.sup_err.x2)
        );
    }
    Ok(())
}
