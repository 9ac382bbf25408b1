//! Ground-truth single machine on an infinite bus, driven by the default
//! multisine-plus-walk excitation. Prints the state every second.

use sgobs::dynamics::{ExcitationSpec, ExciterParams, GeneratorParams, Plant, Smib, SmibPlant};

fn main() -> sgobs::Result<()> {
    let horizon = 20.0;
    let ex = ExcitationSpec::default();
    let smib = Smib::new(0.3, 1.0).with_angle_signal(ex.theta_inf_signal(horizon));
    let mut plant = SmibPlant::at_equilibrium(
        GeneratorParams::default(),
        ExciterParams::default(),
        smib,
        ex.t_m_signal(0, horizon),
        0.8,
        1.0,
    )?;

    let dt = 1e-3;
    println!("{:>5} {:>9} {:>11} {:>8} {:>8} {:>8}", "t", "delta", "domega", "eqp", "P_t", "V_t");
    for k in 0..=(horizon as usize * 1000) {
        if k % 1000 == 0 {
            let s = plant.observed_state();
            let y = plant.observed_terminal()?;
            println!(
                "{:5.1} {:9.5} {:11.3e} {:8.5} {:8.5} {:8.5}",
                plant.time(),
                s.delta,
                s.domega,
                s.eqp,
                y.p_t,
                y.v_t
            );
        }
        plant.step(dt)?;
    }
    Ok(())
}
