//! Scans a fan of rays for poles of a solution seeded from the series.
//!
//! `cargo run --release --example pole_map -- 1 13`

use std::f64::consts::PI;

use num_complex::Complex64;
use p2_hierarchy::asymptotics::{series_coefficients, AlphaValue, Mode};
use p2_hierarchy::integrator::{compile_system, pole_map, pole_map_csv, Fan, RayResult};
use p2_hierarchy::Kind;

pub fn run_example(n: u32, count: usize) -> p2_hierarchy::Result<Vec<RayResult>> {
    let eq = p2_hierarchy::hierarchy::build_p2n(n)?;
    let s = series_coefficients(n, Kind::Infty, 10, Mode::Exact, "0".parse::<AlphaValue>()?)?;
    let sys = compile_system(&eq, Complex64::new(0.0, 0.0));
    let half = 2.0 * n as f64 * PI / (2 * n + 1) as f64;
    let fan = Fan::centered(PI, half, count, 60.0, 40.0);
    let res = pole_map(&sys, &s, &fan, 1e-10);
    print!("{}", pole_map_csv(&res));
    Ok(res)
}

#[allow(dead_code)]
fn main() -> p2_hierarchy::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let count = args.next().and_then(|s| s.parse().ok()).unwrap_or(13);
    run_example(n, count).map(|_| ())
}
