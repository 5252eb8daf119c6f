//! Minimal end-to-end run: calibrate the sideband from a flux pump, predict
//! the induced cavity loss, and watch one photon drain in the rotating frame.

use qdiss::analytics;
use qdiss::dynamics;
use qdiss::experiments::linspace;
use qdiss::hilbert::{number_op, DensityMatrix};
use qdiss::model::{
    self, standard_space, DeviceParams, DriveSpec, ModulationConvention, SidebandFrame, CAVITY,
};

fn main() -> qdiss::Result<()> {
    let params = DeviceParams::default();
    let omega_diss = params.operating_omega_diss();
    let delta = params.operating_detuning();

    let drive = DriveSpec::new(0.05 * delta, delta);
    let frame = SidebandFrame::from_drive(
        &params,
        &drive,
        omega_diss,
        ModulationConvention::SigmaZCoefficient,
    )?;
    let loss = analytics::effective_loss(frame.g_p, params.kappa_diss)?;
    println!(
        "g_p = {:.1} rad/us, predicted induced loss = {:.2} /us",
        frame.g_p, loss.rate
    );

    let space = standard_space(4, 2)?;
    let system = model::rotating_frame_system(&space, &params, &frame, omega_diss, true)?;
    let rho0 = DensityMatrix::basis_state(&space, &[1, 0])?;
    let n_c = number_op(&space, CAVITY)?;
    let times = linspace(0.0, 0.2, 101);
    let run = dynamics::evolve(&system, &rho0, &times, &[("n_cavity", &n_c)])?;

    let trace = run.trace.column("n_cavity").expect("recorded observable");
    println!("<n_c>(0) = {:.4}, <n_c>(0.2 us) = {:.4}", trace[0], trace[100]);
    Ok(())
}
