//! Measures how fast neighbouring solutions separate along rays.
//!
//! `2n` perturbations are carried along the series solution and
//! re-orthonormalized as they go; the slopes of their accumulated
//! log-norms against `(2n/(2n+1)) |x|^{(2n+1)/2n}` are the rates.
//!
//! `cargo run --release --example separation_rates -- 2`

use std::f64::consts::PI;

use num_complex::Complex64;
use p2_hierarchy::asymptotics::{series_coefficients, AlphaValue, Mode};
use p2_hierarchy::integrator::compile_system;
use p2_hierarchy::variational::{separation_rate, SeparationReport};
use p2_hierarchy::Kind;

pub fn run_example(n: u32, angles: &[f64]) -> p2_hierarchy::Result<Vec<SeparationReport>> {
    let eq = p2_hierarchy::hierarchy::build_p2n(n)?;
    let s = series_coefficients(n, Kind::Infty, 10, Mode::Exact, "0".parse::<AlphaValue>()?)?;
    let sys = compile_system(&eq, Complex64::new(0.0, 0.0));
    let mut out = Vec::new();
    for &a in angles {
        let r = separation_rate(&eq, &sys, &s, a, (20.0, 60.0), 1e-10, 40)?;
        println!("arg {a:+.4}");
        println!("  fitted         {:.4?}", r.fitted);
        println!("  published      {:.4?}", r.predicted_published);
        println!("  characteristic {:.4?}", r.predicted_characteristic);
        println!("  linearized     {:.4?}", r.predicted_linearized);
        out.push(r);
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> p2_hierarchy::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    run_example(n, &[0.0, PI / 5.0, PI / 3.0, 2.0 * PI / 3.0]).map(|_| ())
}
