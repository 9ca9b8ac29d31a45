use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use p2_hierarchy::asymptotics::{
    series_coefficients, series_for, AlphaValue, Coeffs, Mode, Truncation, XPoint,
};
use p2_hierarchy::diffpoly::{pow_rational, rational};
use p2_hierarchy::frames::{boutroux_map, inverse_solution_transform, transform_equation};
use p2_hierarchy::hierarchy::build_p2n;
use p2_hierarchy::integrator::{
    compile_system, integrate_fixed, integrate_path, integrate_with_estimate, seed_from_series,
    Options, PathSpec, Segment, Status,
};
use p2_hierarchy::ring::AlgNum;
use p2_hierarchy::Kind;

/// `V = A x^{1/2} sum f_j x^{-3j}` for `V'' = 2V^3 + xV`, `A^2 = -1/2`:
/// `f_j = -(f_{j-1} (9(j-1)^2 - 1/4) + R_j) / 2`, `R_j` the part of
/// `(f^3)_j` without `f_j`.
fn p2_oracle(terms: usize) -> Vec<BigRational> {
    let mut f = vec![BigRational::one()];
    for j in 1..terms {
        let mut r = BigRational::zero();
        for a in 0..=j {
            for b in 0..=j - a {
                let c = j - a - b;
                if a == j || b == j || c == j {
                    continue;
                }
                r += &f[a] * &f[b] * &f[c];
            }
        }
        let m = BigRational::from_integer(((j - 1) * (j - 1) * 9).into()) - rational(1, 4);
        f.push(-(&f[j - 1] * m + r) / BigRational::from_integer(2.into()));
    }
    f
}

fn exact(s: &p2_hierarchy::asymptotics::FormalSeries) -> &[AlgNum] {
    match &s.coeffs {
        Coeffs::Exact(v) => v,
        Coeffs::Float(_) => panic!("expected exact coefficients"),
    }
}

#[test]
fn n1_series_matches_direct_recurrence() {
    let s = series_coefficients(1, Kind::Infty, 12, Mode::Exact, AlphaValue::Rational(rational(0, 1))).unwrap();
    let a = exact(&s);
    let f = p2_oracle(7);
    let c = rational(2, 3);
    for (j, fj) in f.iter().enumerate() {
        let expect = AlgNum::constant(fj * pow_rational(&c, 2 * j as u32), a[0].relation().cloned());
        assert_eq!(a[2 * j], expect, "a_{}", 2 * j);
        if 2 * j + 1 < a.len() {
            assert!(a[2 * j + 1].is_zero());
        }
    }
    // the classical expansion sqrt(-x/2) (1 + 1/8 x^-3 - 73/128 x^-6 + ...)
    assert_eq!(f[1], rational(1, 8));
    assert_eq!(f[2], rational(-73, 128));
}

#[test]
fn n1_decaying_series_matches_dominant_balance() {
    // V = -alpha/x + d x^{-4}: d = 2 alpha (alpha^2 - 1)
    for al in [rational(1, 3), rational(2, 1), rational(-5, 2)] {
        let s = series_coefficients(1, Kind::Zero, 4, Mode::Exact, AlphaValue::Rational(al.clone())).unwrap();
        let b2 = exact(&s)[2].clone();
        let c = rational(2, 3);
        let d = AlgNum::constant(-al.clone() / (&c * &c), None).mul(&b2);
        let expect = &al * rational(2, 1) * (&al * &al - BigRational::one());
        assert_eq!(d, AlgNum::constant(expect, None));
    }
}

#[test]
fn float_mode_tracks_exact_mode() {
    for n in 1..=3 {
        let eq = build_p2n(n).unwrap();
        let al = rational(1, 3);
        let e = series_for(&eq, Kind::Infty, 8, Mode::Exact, AlphaValue::Rational(al.clone()), 0).unwrap();
        let f = series_for(&eq, Kind::Infty, 8, Mode::Float, AlphaValue::Rational(al), 0).unwrap();
        let gap = p2_hierarchy::asymptotics::max_relative_gap(&e.numeric_coeffs().unwrap(), &f.numeric_coeffs().unwrap());
        assert!(gap < 1e-12, "n={n}: {gap:e}");
    }
}

#[test]
fn leading_seed_matches_square_root() {
    let s = series_coefficients(1, Kind::Infty, 0, Mode::Exact, AlphaValue::Rational(rational(0, 1))).unwrap();
    let x0 = XPoint::polar(50.0, -PI);
    let (y, _) = seed_from_series(&s, &x0).unwrap();
    assert!((y[0] - Complex64::new(5.0, 0.0)).norm() < 1e-12);
    assert!((y[1] - Complex64::new(-0.05, 0.0)).norm() < 1e-12);
}

#[test]
fn decaying_seed_leading_order() {
    let s = series_coefficients(1, Kind::Zero, 4, Mode::Exact, AlphaValue::Rational(rational(1, 1))).unwrap();
    let (y, _) = seed_from_series(&s, &XPoint::polar(50.0, PI)).unwrap();
    assert!((y[0] - Complex64::new(0.02, 0.0)).norm() < 1e-6);
}

#[test]
fn seed_error_shrinks_with_radius() {
    let s = series_coefficients(1, Kind::Infty, 10, Mode::Exact, AlphaValue::Rational(rational(0, 1))).unwrap();
    let errs: Vec<f64> = [20.0, 40.0, 60.0, 80.0]
        .iter()
        .map(|&r| seed_from_series(&s, &XPoint::polar(r, PI)).unwrap().1)
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn fifth_order_convergence() {
    let eq = build_p2n(1).unwrap();
    let sys = compile_system(&eq, Complex64::new(0.0, 0.0));
    let y0 = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.0)];
    let path = PathSpec::line(Complex64::new(0.5, 0.0), Complex64::new(1.5, 0.5));
    let reference = integrate_path(&sys, &y0, &path, &Options::with_tol(1e-13)).unwrap();
    let err = |steps| {
        let y = integrate_fixed(&sys, &y0, &path, steps).unwrap();
        (y[0] - reference.last().y[0]).norm()
    };
    let ratio = err(20) / err(40);
    assert!(ratio > 24.0 && ratio < 40.0, "ratio {ratio}");
}

#[test]
fn zero_length_path_is_identity() {
    let eq = build_p2n(2).unwrap();
    let sys = compile_system(&eq, Complex64::new(0.0, 0.0));
    let y0: Vec<Complex64> = (0..4).map(|i| Complex64::new(i as f64, 1.0)).collect();
    let x = Complex64::new(3.0, 1.0);
    let t = integrate_path(&sys, &y0, &PathSpec::line(x, x), &Options::with_tol(1e-10)).unwrap();
    assert_eq!(t.last().y, y0);
}

#[test]
fn integrated_solution_follows_series_on_oscillatory_ray() {
    let eq = build_p2n(1).unwrap();
    let s = series_coefficients(1, Kind::Infty, 10, Mode::Exact, AlphaValue::Rational(rational(0, 1))).unwrap();
    let sys = compile_system(&eq, Complex64::new(0.0, 0.0));
    let a = 2.0 * PI / 3.0;
    let (y0, _) = seed_from_series(&s, &XPoint::polar(60.0, a)).unwrap();
    let (t, est) = integrate_with_estimate(&sys, &y0, &PathSpec::line(Complex64::from_polar(60.0, a), Complex64::from_polar(40.0, a)), 1e-10).unwrap();
    let ev = s.evaluate(&XPoint::polar(40.0, a), Truncation::Optimal).unwrap();
    let dev = (t.last().y[0] - ev.value).norm();
    assert!(dev < 10.0 * (est + ev.error_estimate) + 1e-10, "dev {dev:e} est {est:e}");
}

#[test]
fn boutroux_frame_is_consistent_with_integration() {
    let n = 2;
    let eq = build_p2n(n).unwrap();
    let ueq = transform_equation(&eq).unwrap();
    let al = Complex64::new(0.5, 0.0);
    let sys = compile_system(&eq, al);
    let y0: Vec<Complex64> = vec![
        Complex64::new(0.7, 0.1),
        Complex64::new(0.0, 0.2),
        Complex64::new(-0.1, 0.0),
        Complex64::new(0.05, 0.0),
    ];
    let tol = 1e-10;
    let path = PathSpec::line(Complex64::new(3.0, 0.5), Complex64::new(3.6, 0.9));
    let t = integrate_path(&sys, &y0, &path, &Options::with_tol(tol)).unwrap();
    assert_eq!(t.status, Status::Completed);
    let mut worst: f64 = 0.0;
    for smp in &t.samples {
        let xp = XPoint::principal(smp.x).unwrap();
        let mut v = smp.y.clone();
        v.push(sys.f(&smp.y, smp.x)[2 * n as usize - 1]);
        let u = inverse_solution_transform(n, &xp, &v).unwrap();
        let z = boutroux_map(n, &xp);
        let scale = u.iter().map(|c| c.norm()).fold(1.0, f64::max);
        worst = worst.max(ueq.residual(&u, z.value, al).norm() / scale);
    }
    assert!(worst < 10.0 * tol, "residual {worst:e}");
}

#[test]
fn homotopic_paths_agree() {
    let eq = build_p2n(1).unwrap();
    let sys = compile_system(&eq, Complex64::new(0.2, 0.0));
    let y0 = [Complex64::new(0.4, 0.0), Complex64::new(0.1, -0.1)];
    let a = Complex64::new(1.0, 0.0);
    let b = Complex64::new(1.6, 0.9);
    let direct = PathSpec::line(a, b);
    let bent = PathSpec {
        start: [a.re, a.im],
        segments: vec![Segment::Line { to: [1.0, 0.9] }, Segment::Line { to: [b.re, b.im] }],
    };
    let (t1, e1) = integrate_with_estimate(&sys, &y0, &direct, 1e-10).unwrap();
    let (t2, e2) = integrate_with_estimate(&sys, &y0, &bent, 1e-10).unwrap();
    let gap = (t1.last().y[0] - t2.last().y[0]).norm();
    assert!(gap <= 10.0 * (e1 + e2) + 1e-12, "gap {gap:e}");
}
