//! Analytic worst-case bounds on the algebraic estimates for each noise
//! family at 45 dB, against the errors of one realization.

use sgobs::pmu::NoiseFamily;
use sgobs::runner::{prepare, realize, ScenarioConfig};

fn main() -> sgobs::Result<()> {
    println!("{:>10} {:>10} {:>10} {:>10} {:>10}", "family", "sup x1", "w_x1_max", "sup x3", "w_x3_max");
    for family in [NoiseFamily::Gaussian, NoiseFamily::Laplacian, NoiseFamily::Uniform] {
        let mut cfg = ScenarioConfig::default();
        cfg.sim.duration = 30.0;
        cfg.noise.family = family;
        if family == NoiseFamily::Uniform {
            cfg.noise.half_widths = Some([1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3]);
        }
        let prep = prepare(&cfg)?;
        let out = realize(&prep, 1.0, 42)?;
        let b = &out.bounds.algebraic;
        println!(
            "{:>10} {:10.3e} {:10.3e} {:10.3e} {:10.3e}",
            format!("{family:?}"),
            out.sup_alg_err[0],
            b.w_x1_max,
            out.sup_alg_err[1],
            b.w_x3_max
        );
    }
    Ok(())
}
