//! Two-phase learning on a cascade with unmatched uncertainty.
//!
//! Run from the crate root: `cargo run --example cascade_backstepping`.

use robust_adp::harness::{run_algorithm_1, RunConfig};

fn main() -> robust_adp::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/cascade_unmatched.cfg");
    let run = run_algorithm_1(&RunConfig::load(&path)?)?;
    let sol = run.phase_two.as_ref().expect("cascade runs identify f1 and g1");
    for (t, w) in sol.f1.basis().terms().iter().zip(sol.f1.weights()) {
        println!("f1[{t}] = {w:.6}");
    }
    println!("g1 = {:.6}", sol.g1.weights()[0]);
    let cert = run.certification.as_ref().expect("certified");
    println!("rho = {} d1 = {}", cert.rho.label(), cert.level.d);
    let z = run.post.trajectory.z.as_ref().and_then(|z| z.last()).copied().unwrap_or(0.0);
    println!("final (x, z) = ({:e}, {:e})", run.post.trajectory.final_x()[0], z);
    Ok(())
}
