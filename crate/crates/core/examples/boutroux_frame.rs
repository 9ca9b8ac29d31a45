//! The hierarchy in Boutroux variables `V = x^{1/2n} u`, `z = (2n/(2n+1)) x^{(2n+1)/2n}`.
//!
//! Prints the transformed equation grouped by powers of `z`, audits the
//! degree of its coefficients and round-trips a jet through the chain rule.
//!
//! `cargo run --release --example boutroux_frame -- 2`

use num_complex::Complex64;
use p2_hierarchy::asymptotics::XPoint;
use p2_hierarchy::frames::{
    boutroux_inverse, boutroux_map, degree_report, inverse_solution_transform, solution_transform,
    transform_equation, DegreeReport,
};
use p2_hierarchy::hierarchy::build_p2n;

/// Returns the degree audit and the jet round-trip error.
pub fn run_example(n: u32) -> p2_hierarchy::Result<(DegreeReport, f64)> {
    let eq = build_p2n(n)?;
    let u = transform_equation(&eq)?;
    println!("n={n}: u-equation by powers of z");
    println!("{}", u.to_text());
    println!("autonomous coefficient of u: {}", u.autonomous_linear_coefficient());
    let rep = degree_report(&u);
    println!(
        "degree audit: max {} vs bound {}, {} offending terms",
        rep.max_degree,
        rep.bound,
        rep.offending.len()
    );
    for t in rep.offending.iter().take(4) {
        println!("  {t}");
    }

    let x = XPoint::polar(7.5, 0.9);
    let z = boutroux_map(n, &x);
    let back = boutroux_inverse(n, &z)?;
    println!("x = {:.6} -> z = {:.6} -> x = {:.6}", x.value, z.value, back.value);

    let jets: Vec<Complex64> = (0..2 * n as usize)
        .map(|j| Complex64::new(0.3 + j as f64, -0.2 * j as f64))
        .collect();
    let v = solution_transform(n, &x, &jets)?;
    let u_back = inverse_solution_transform(n, &x, &v)?;
    let err = jets
        .iter()
        .zip(&u_back)
        .map(|(a, b)| (a - b).norm() / a.norm())
        .fold(0.0, f64::max);
    println!("jet round trip relative error {err:.2e}");
    Ok((rep, err))
}

#[allow(dead_code)]
fn main() -> p2_hierarchy::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    run_example(n).map(|_| ())
}
