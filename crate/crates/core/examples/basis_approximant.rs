//! Build a polynomial basis, fit nothing, just evaluate an approximant and
//! its exact gradient.

use robust_adp::{make_polynomial_basis, Approximant};

fn main() -> robust_adp::Result<()> {
    let basis = make_polynomial_basis(2, 3, true, false);
    println!("{} terms:", basis.len());
    for t in basis.terms() {
        print!(" {t}");
    }
    println!();
    let weights: Vec<f64> = (0..basis.len()).map(|k| 1.0 / (k + 1) as f64).collect();
    let v = Approximant::new(basis, weights)?;
    let x = [0.3, -0.7];
    println!("V({x:?}) = {}", v.evaluate(&x)?);
    println!("grad V = {:?}", v.gradient(&x)?);
    Ok(())
}
