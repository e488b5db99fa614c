//! Learn an optimal controller for a seeded two-state linear plant from one
//! recorded trajectory, and compare with the Riccati solution.

use robust_adp::dynsys::SimulatedPlant;
use robust_adp::experiments::linear2;
use robust_adp::linear::care;
use robust_adp::online_pi::{run_online_pi, Exploration, OnlinePiConfig};

fn main() -> robust_adp::Result<()> {
    let b = linear2(3)?;
    let mut plant = SimulatedPlant::new(b.model.clone(), None, b.initial.clone(), 1e-3);
    let cfg = OnlinePiConfig {
        intervals: Some(40),
        ..Default::default()
    };
    let run = run_online_pi(&mut plant, &b.u0, &Exploration::sinusoids(1.0, 1), &b.basis_v, &b.basis_u, &b.cost, &cfg)?;
    for it in &run.iterations {
        println!(
            "iter {}: policy {:?} residual {:.2e} pe {:.2e}",
            it.iteration,
            it.next_policy.weights(),
            it.residual_rms,
            it.pe_ratio
        );
    }
    let (a, bm) = b.linear.clone().expect("linear plant");
    let p = care(&a, &bm, &nalgebra::DMatrix::identity(2, 2), &nalgebra::DMatrix::identity(1, 1))?;
    let k = bm.transpose() * p;
    println!("optimal gain: [{:.6}, {:.6}]", -k[(0, 0)], -k[(0, 1)]);
    Ok(())
}
