//! Seeds a solution from the series and integrates it along a path.
//!
//! Along the oscillatory ray `arg x = 2pi/3` (n = 1) perturbations neither
//! grow nor decay, so the integrated solution tracks the series; on the
//! negative real axis the same procedure loses all accuracy.
//!
//! `cargo run --release --example integrate_path`

use std::f64::consts::PI;

use num_complex::Complex64;
use p2_hierarchy::asymptotics::{series_coefficients, AlphaValue, Mode, Truncation, XPoint};
use p2_hierarchy::integrator::{compile_system, integrate_with_estimate, seed_from_series, PathSpec};
use p2_hierarchy::Kind;

/// `(angle, |V - series| at the end, global error estimate)` per ray.
pub fn run_example(angles: &[f64]) -> p2_hierarchy::Result<Vec<(f64, f64, f64)>> {
    let n = 1;
    let eq = p2_hierarchy::hierarchy::build_p2n(n)?;
    let s = series_coefficients(n, Kind::Infty, 10, Mode::Exact, "0".parse::<AlphaValue>()?)?;
    let sys = compile_system(&eq, Complex64::new(0.0, 0.0));
    let mut out = Vec::new();
    for &a in angles {
        let x0 = XPoint::polar(60.0, a);
        let (y0, seed_err) = seed_from_series(&s, &x0)?;
        let path = PathSpec::line(x0.value, Complex64::from_polar(40.0, a));
        let (t, est) = integrate_with_estimate(&sys, &y0, &path, 1e-10)?;
        let reference = s.evaluate(&XPoint::polar(40.0, a), Truncation::Optimal)?;
        let dev = (t.last().y[0] - reference.value).norm();
        println!(
            "arg {a:+.4}: {} steps, seed error {seed_err:.1e}, |V - series| at |x|=40 {dev:.2e}, estimate {est:.1e}",
            t.steps_accepted
        );
        out.push((a, dev, est));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> p2_hierarchy::Result<()> {
    run_example(&[2.0 * PI / 3.0, 0.0, PI]).map(|_| ())
}
