//! Grow the basis until the regression residual falls below a threshold.

use robust_adp::dynsys::SimulatedPlant;
use robust_adp::experiments::linear2;
use robust_adp::make_polynomial_basis;
use robust_adp::online_pi::{two_loop_optimize, BasisPair, Exploration, OnlinePiConfig};

fn main() -> robust_adp::Result<()> {
    let b = linear2(3)?;
    let schedule: Vec<BasisPair> = (1..=4)
        .map(|d| BasisPair {
            value: make_polynomial_basis(2, d, true, false),
            policy: make_polynomial_basis(2, (d - 1).max(1), true, false),
        })
        .collect();
    let mut plant = SimulatedPlant::new(b.model.clone(), None, b.initial.clone(), 1e-3);
    let u0 = b.u0.embed(&schedule[0].policy)?;
    let cfg = OnlinePiConfig {
        intervals: Some(80),
        ..Default::default()
    };
    let res = two_loop_optimize(&mut plant, &u0, &Exploration::sinusoids(1.0, 1), &b.cost, 1e-6, &schedule, &cfg)?;
    println!("stage residuals: {:?}", res.stage_residuals);
    println!("selected stage {} ({} value terms, {} policy terms)", res.stage, res.n_value, res.n_policy);
    Ok(())
}
