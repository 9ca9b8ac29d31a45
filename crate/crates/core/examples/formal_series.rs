//! Formal solutions near infinity: exact coefficients, their dependence on
//! alpha, and optimally truncated evaluation.
//!
//! `cargo run --release --example formal_series -- 2`

use num_complex::Complex64;
use p2_hierarchy::asymptotics::{
    alpha_structure, series_coefficients, zero_leading_report, AlphaValue, Mode, Truncation, XPoint,
};
use p2_hierarchy::Kind;

/// Returns `(radius, value, k*, error estimate)` along the negative axis.
pub fn run_example(n: u32) -> p2_hierarchy::Result<Vec<(f64, Complex64, usize, f64)>> {
    let formal = series_coefficients(n, Kind::Infty, 6, Mode::Exact, AlphaValue::Formal)?;
    println!("n={n}, growing family, alpha formal, A^{} = {}:", 2 * n, p2_hierarchy::asymptotics::root_value(n));
    if let p2_hierarchy::asymptotics::Coeffs::Exact(cs) = &formal.coeffs {
        for (k, c) in cs.iter().enumerate() {
            println!("  a_{k} = {c}");
        }
    }
    println!("  alpha parity per order: {:?}", alpha_structure(&formal));

    let zero = series_coefficients(n, Kind::Zero, 4 * n as usize, Mode::Exact, AlphaValue::Formal)?;
    if let p2_hierarchy::asymptotics::Coeffs::Exact(cs) = &zero.coeffs {
        let nonzero: Vec<String> = cs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| format!("b_{k} = {c}"))
            .collect();
        println!("decaying family: {}", nonzero.join(", "));
    }
    let rep = zero_leading_report(n);
    println!(
        "decaying leading balance {} (general formula {}, n=1 formula {})",
        rep.balance, rep.general_formula, rep.n1_formula
    );

    let s = series_coefficients(n, Kind::Infty, 10, Mode::Exact, "0".parse::<AlphaValue>()?)?;
    let mut out = Vec::new();
    for r in [10.0, 20.0, 40.0, 80.0] {
        let ev = s.evaluate(&XPoint::polar(r, std::f64::consts::PI), Truncation::Optimal)?;
        println!(
            "  V(-{r}) = {:.12} (k* = {}, error ~ {:.1e})",
            ev.value, ev.k_star, ev.error_estimate
        );
        out.push((r, ev.value, ev.k_star, ev.error_estimate));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> p2_hierarchy::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    run_example(n).map(|_| ())
}
