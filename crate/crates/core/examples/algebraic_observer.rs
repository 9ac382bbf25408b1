//! Recovers rotor angle and q-axis transient voltage from single PMU samples,
//! first exact, then with Gaussian noise at 45 dB, and compares the error with
//! the phasor-level decomposition: the angle error is exactly the rotation of
//! psi, and the voltage error mixes the magnitude error of psi with it.

use sgobs::algobs::{error_decomposition, estimate};
use sgobs::dynamics::{ExciterParams, GeneratorParams, Plant, Smib, SmibPlant, Signal};
use sgobs::pmu::{self, NoiseFamily, NoiseModel, NoiseSpec, PmuRng, PmuSample};

fn main() -> sgobs::Result<()> {
    let p = GeneratorParams::default();
    let mut plant = SmibPlant::at_equilibrium(
        p,
        ExciterParams::default(),
        Smib::new(0.3, 1.0),
        Signal::zero(),
        0.8,
        1.0,
    )?;
    plant.step(1e-3)?;
    let truth = plant.observed_state();
    let term = plant.observed_terminal()?;

    let exact = estimate(&PmuSample::exact(0.0, &term), &p, None)?;
    println!("truth      delta = {:.12}  eqp = {:.12}", truth.delta, truth.eqp);
    println!("exact PMU  x1    = {:.12}  x3  = {:.12}", exact.x1_hat, exact.x3_hat);

    let spec = NoiseSpec {
        family: NoiseFamily::Gaussian,
        ..NoiseSpec::default()
    };
    // angle channels use a unit-phasor reference of 1 rad
    let mut rms = pmu::truth_vector(&term).map(f64::abs);
    rms[1] = 1.0;
    rms[3] = 1.0;
    let model = NoiseModel::resolve(&spec, rms, 1.0);
    let mut rng = PmuRng::new(3);
    println!("\n{:>3} {:>11} {:>11} {:>11} {:>11}", "k", "x1 err", "arg rot", "x3 err", "|psi| err");
    for k in 0..8 {
        let s = pmu::sample(0.0, &term, &model, &mut rng);
        let e = estimate(&s, &p, None)?;
        let d = error_decomposition(&s, &term, &truth, &p);
        println!(
            "{k:3} {:11.3e} {:11.3e} {:11.3e} {:11.3e}",
            e.x1_hat - truth.delta,
            d.w_x1,
            e.x3_hat - truth.eqp,
            d.w_psi
        );
    }
    Ok(())
}
