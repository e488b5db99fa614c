//! Model-based policy iteration on the scalar LQR benchmark; the value
//! weight approaches sqrt(2) - 1.

use robust_adp::experiments::scalar_lqr;
use robust_adp::pi_oracle::{collocation_grid, run_policy_iteration, OracleConfig};

fn main() -> robust_adp::Result<()> {
    let b = scalar_lqr()?;
    let grid = collocation_grid(&b.region, b.basis_v.len());
    let states = run_policy_iteration(&b.model, &b.cost, &b.u0, &b.basis_v, &b.basis_u, &grid, &OracleConfig::default())?;
    for s in &states {
        println!(
            "iter {}: p = {:.10} hjb residual = {:.2e}",
            s.iteration,
            s.value.weights()[0],
            s.hjb_residual
        );
    }
    println!("riccati: {:.10}", 2f64.sqrt() - 1.0);
    Ok(())
}
