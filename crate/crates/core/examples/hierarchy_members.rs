//! Builds the first members of the hierarchy from the Lenard recursion and
//! prints their normal forms together with the structural checks.
//!
//! `cargo run --release --example hierarchy_members -- 6`

use std::time::Instant;

use p2_hierarchy::hierarchy::{self, Format};

pub fn run_example(max_n: u32) -> p2_hierarchy::Result<()> {
    for n in 1..=max_n {
        let start = Instant::now();
        let eq = hierarchy::build_p2n(n)?;
        let inter = hierarchy::verify_intermediate_form(n)?;
        let image_exact = hierarchy::lenard_image(&eq.lenard_l).is_exact()?;
        println!(
            "n={n}: beta={} c={} |L_n|={} |P|={} intermediate_form={} lenard_image_exact={} ({:.2?})",
            eq.beta_n,
            eq.c_n,
            eq.lenard_l.len(),
            eq.rhs_poly.len(),
            inter.holds(),
            image_exact,
            start.elapsed()
        );
        if n <= 3 {
            println!("    {}", hierarchy::emit(&eq, Format::Latex));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> p2_hierarchy::Result<()> {
    let max_n = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    run_example(max_n)
}
