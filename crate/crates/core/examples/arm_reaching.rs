//! Reaching movement of a single-joint arm: learn, redesign and report the
//! speed profile of the learned movement.

use robust_adp::harness::{run_algorithm_1, RunConfig};

fn main() -> robust_adp::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/arm.cfg");
    let run = run_algorithm_1(&RunConfig::load(&path)?)?;
    println!("converged at {:?}", run.converged_at);
    println!("cost reduction fraction = {}", run.cost_comparison.reduction_fraction);
    if let Some(sp) = run.speed_profile {
        println!(
            "speed peaks = {} peak at {:.3}s movement {:.3}s",
            sp.peak_count, sp.peak_time, sp.movement_duration
        );
    }
    println!("learning-phase states within box: {}", run.audit.within_declared());
    Ok(())
}
