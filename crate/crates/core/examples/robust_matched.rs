//! Learn on a plant with unmeasured matched dynamics, redesign the policy
//! and certify it with the small-gain check.

use robust_adp::harness::{run_algorithm_1, RunConfig};

const CONFIG: &str = r#"
format_version = 1
[plant]
kind = "matched_scalar"
[exploration]
amplitude = 1.0
seed = 1
[learning]
intervals = 40
[simulation]
post_horizon = 20.0
"#;

fn main() -> robust_adp::Result<()> {
    let run = run_algorithm_1(&RunConfig::from_toml_str(CONFIG)?)?;
    let cert = run.certification.as_ref().expect("uncertain plant is certified");
    println!("rho = {}", cert.rho.label());
    print!("{}", cert.report.to_table());
    println!("d = {} sigma(d) = {}", cert.level.d, cert.roa.level());
    println!("final |x| = {:e}", run.post.trajectory.final_x()[0].abs());
    Ok(())
}
