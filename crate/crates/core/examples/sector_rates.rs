//! Uniqueness rays, sectors and the exponential rates on each ray.
//!
//! Three exponent families are tabulated: the published closed forms, the
//! roots of the companion characteristic equation, and the roots of the
//! leading-order linearization of the actual equation.
//!
//! `cargo run --release --example sector_rates -- 1`

use num_complex::Complex64;
use p2_hierarchy::frames::{characteristic_rate_profile, ray_rate_profile, rays, sectors};
use p2_hierarchy::hierarchy::build_p2n;
use p2_hierarchy::variational::{companion_a0, linearized_roots, rates_from_roots};
use p2_hierarchy::Kind;

/// Per ray: `(angle, min |published|, min |characteristic|, min |linearized|)`.
pub fn run_example(n: u32) -> p2_hierarchy::Result<Vec<(f64, f64, f64, f64)>> {
    let eq = build_p2n(n)?;
    let table = sectors(n, Kind::Infty, None, None);
    for s in &table.sectors {
        println!(
            "{:?}: center {:.4}, half width {:.4}, |x| >= {}",
            s.label, s.center_angle, s.half_width, s.inner_radius
        );
    }
    let m = companion_a0(n, Kind::Infty, Complex64::new(2.0, 1.0))?;
    println!("companion cross-check gap {:.1e}", m.cross_check_gap());

    let lin = linearized_roots(&eq, Kind::Infty, 0)?;
    println!("linearized exponents: {lin:.6?}");
    let c = 2.0 * n as f64 / (2 * n + 1) as f64;
    let min_abs = |v: &[f64]| v.iter().map(|r| r.abs()).fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    println!("ray        published   characteristic   linearized   (min |Re| per unit z)");
    for a in rays(n, Kind::Infty) {
        let p = ray_rate_profile(n, Kind::Infty, a).rates;
        let ch = characteristic_rate_profile(n, Kind::Infty, a).rates;
        let l: Vec<f64> = rates_from_roots(n, &lin, a).iter().map(|r| r * c).collect();
        let row = (a, min_abs(&p), min_abs(&ch), min_abs(&l));
        println!("{:+.4}    {:.2e}    {:.2e}         {:.2e}", row.0, row.1, row.2, row.3);
        out.push(row);
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> p2_hierarchy::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    run_example(n).map(|_| ())
}
