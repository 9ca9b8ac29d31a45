//! Linearization around a solution and exponential separation rates.
//!
//! The difference `W` of two nearby solutions obeys
//! `W_{2n} = sum_j (d rhs/d v_j) W_j`, evaluated on a base solution. Its
//! growth along a ray is compared against three exponent families: the
//! published closed forms, the characteristic roots of the companion
//! matrix, and the roots of the actual leading-order linearization.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use serde::Serialize;

use crate::asymptotics::{leading_root, FormalSeries, NumericSeries, Truncation, XPoint};
use crate::diffpoly::rational_to_f64;
use crate::error::{Error, Result};
use crate::frames::{characteristic_rate_profile, ray_rate_profile};
use crate::hierarchy::{linear_derivative_coefficients, HierarchyEquation};
use crate::integrator::{integrate_path, ODESystem, Options, PathSpec, Status, Trajectory, VectorField};
use crate::Kind;

/// Companion-form linear system sampled along a base trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub n: u32,
    pub xs: Vec<Complex64>,
    /// Last row of the companion matrix at each sample.
    pub rows: Vec<Vec<Complex64>>,
}

/// One-point Jacobian of the system along `base`.
pub fn linearize(sys: &ODESystem, base: &Trajectory) -> Result<LinearSystem> {
    if base.status != Status::Completed {
        return Err(Error::Validation("base trajectory did not complete".into()));
    }
    Ok(LinearSystem {
        n: sys.n,
        xs: base.samples.iter().map(|s| s.x).collect(),
        rows: base
            .samples
            .iter()
            .map(|s| sys.gradient(&s.y, s.x))
            .collect(),
    })
}

/// Matrix with ones on the superdiagonal and `f` in the bottom-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionMatrix {
    pub n: u32,
    pub kind: Kind,
    pub z: Complex64,
    pub f: Complex64,
    pub entries: DMatrix<Complex64>,
    /// The `2n` roots of `mu^{2n} = f`, `k = 1..2n`.
    pub eigenvalues: Vec<Complex64>,
    /// Eigenvalues from a generic Schur decomposition.
    pub generic_eigenvalues: Vec<Complex64>,
}

impl CompanionMatrix {
    /// Largest distance between the explicit roots and the generic ones.
    pub fn cross_check_gap(&self) -> f64 {
        set_distance(&self.eigenvalues, &self.generic_eigenvalues)
    }
}

/// `f(z) = (1-2n) z` for Infty and `f(z) = z` for Zero.
pub fn companion_f(n: u32, kind: Kind, z: Complex64) -> Complex64 {
    match kind {
        Kind::Infty => (1.0 - 2.0 * n as f64) * z,
        Kind::Zero => z,
    }
}

pub fn companion_a0(n: u32, kind: Kind, z: Complex64) -> Result<CompanionMatrix> {
    if z.norm() == 0.0 {
        return Err(Error::Singular);
    }
    let d = 2 * n as usize;
    let f = companion_f(n, kind, z);
    let mut m = DMatrix::from_element(d, d, Complex64::zero());
    for i in 0..d - 1 {
        m[(i, i + 1)] = Complex64::new(1.0, 0.0);
    }
    m[(d - 1, 0)] += f;
    let r = f.norm().powf(1.0 / d as f64);
    let eigenvalues = (1..=d)
        .map(|k| Complex64::from_polar(r, (f.arg() + 2.0 * PI * k as f64) / d as f64))
        .collect();
    let generic_eigenvalues = eigenvalues_of(&m)?;
    Ok(CompanionMatrix {
        n,
        kind,
        z,
        f,
        entries: m,
        eigenvalues,
        generic_eigenvalues,
    })
}

fn eigenvalues_of(m: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    // Plain QR can stall on permutation-like companions, so shift off the
    // real axis first and undo the shift afterwards.
    let shift = Complex64::new(0.1234, 0.5678);
    let d = m.nrows();
    let shifted = m + DMatrix::from_diagonal_element(d, d, shift);
    let schur = nalgebra::linalg::Schur::try_new(shifted, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Fit("Schur iteration did not converge".into()))?;
    schur
        .eigenvalues()
        .map(|v| v.iter().map(|e| e - shift).collect())
        .ok_or_else(|| Error::Fit("Schur form is not triangular".into()))
}

/// Hausdorff distance between two finite point sets, scaled by their size.
pub fn set_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one_way = |p: &[Complex64], q: &[Complex64]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let scale = a.iter().chain(b).map(|v| v.norm()).fold(1.0, f64::max);
    one_way(a, b).max(one_way(b, a)) / scale
}

/// Roots of a monic polynomial given low-to-high coefficients
/// `c_0 + c_1 m + ... + c_{d-1} m^{d-1} + m^d`.
pub fn monic_roots(c: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = c.len();
    let mut m = DMatrix::from_element(d, d, Complex64::zero());
    for i in 0..d - 1 {
        m[(i, i + 1)] = Complex64::new(1.0, 0.0);
    }
    for (j, cj) in c.iter().enumerate() {
        m[(d - 1, j)] = -cj;
    }
    eigenvalues_of(&m)
}

/// `lambda` with `W ~ exp(lambda * (2n/(2n+1)) x^{(2n+1)/(2n)})` for small
/// perturbations of the formal solution at leading order.
///
/// Infty: `lambda^{2n} - sum_p b_p A^{2n-p} lambda^p + 2n = 0`, where `b_p`
/// is the coefficient of `v_0^{2n-p} v_p` in `P_{2n-1}`. Zero: `lambda^{2n} = 1`.
pub fn linearized_roots(eq: &HierarchyEquation, kind: Kind, branch: u32) -> Result<Vec<Complex64>> {
    let d = 2 * eq.n as usize;
    let mut c = vec![Complex64::zero(); d];
    match kind {
        Kind::Infty => {
            let a = leading_root(eq.n, branch);
            c[0] = Complex64::new(d as f64, 0.0);
            for (i, b) in linear_derivative_coefficients(eq).iter().enumerate() {
                let p = i + 1;
                c[p] -= rational_to_f64(b) * a.powu((d - p) as u32);
            }
        }
        Kind::Zero => c[0] = Complex64::new(-1.0, 0.0),
    }
    monic_roots(&c)
}

/// Re-rates per unit `(2n/(2n+1)) |x|^{(2n+1)/(2n)}` along `arg x = angle`.
pub fn rates_from_roots(n: u32, roots: &[Complex64], angle: f64) -> Vec<f64> {
    let phase = Complex64::from_polar(1.0, angle * (2 * n + 1) as f64 / (2 * n) as f64);
    let mut r: Vec<f64> = roots.iter().map(|l| (l * phase).re).collect();
    r.sort_by(|a, b| b.total_cmp(a));
    r
}

/// Linear flow of `2n` perturbation vectors along a series-defined base.
struct TangentFlow<'a> {
    sys: &'a ODESystem,
    base: &'a NumericSeries,
    angle: f64,
}

impl VectorField for TangentFlow<'_> {
    fn dim(&self) -> usize {
        let d = self.sys.dim();
        d * d
    }

    fn eval(&self, y: &[Complex64], x: Complex64, out: &mut [Complex64]) {
        let d = self.sys.dim();
        let xp = XPoint {
            value: x,
            arg: self.angle,
        };
        let (jets, _) = self
            .base
            .jets(&xp, d, Truncation::Optimal)
            .expect("optimal truncation always succeeds");
        let g = self.sys.gradient(&jets, x);
        for v in 0..d {
            let w = &y[v * d..(v + 1) * d];
            let o = &mut out[v * d..(v + 1) * d];
            o[..d - 1].copy_from_slice(&w[1..]);
            o[d - 1] = g.iter().zip(w).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub n: u32,
    pub kind: Kind,
    pub angle: f64,
    pub window: (f64, f64),
    /// Fitted growth rates, descending, per unit `(2n/(2n+1)) |x|^{(2n+1)/(2n)}`.
    pub fitted: Vec<f64>,
    /// Rates from the published exponent formulas.
    pub predicted_published: Vec<f64>,
    /// Rates from the roots of `mu^{2n} = f(z)`.
    pub predicted_characteristic: Vec<f64>,
    /// Rates from the leading-order linearization.
    pub predicted_linearized: Vec<f64>,
    pub condition: f64,
}

/// Orthonormalizes the vectors in place and returns the log-norms.
fn gram_schmidt(y: &mut [Complex64], d: usize) -> Vec<f64> {
    let mut logs = Vec::with_capacity(d);
    for v in 0..d {
        for u in 0..v {
            let dot: Complex64 = (0..d).map(|j| y[u * d + j].conj() * y[v * d + j]).sum();
            for j in 0..d {
                let t = y[u * d + j];
                y[v * d + j] -= dot * t;
            }
        }
        let norm = (0..d).map(|j| y[v * d + j].norm_sqr()).sum::<f64>().sqrt();
        logs.push(norm.ln());
        for j in 0..d {
            y[v * d + j] /= norm;
        }
    }
    logs
}

/// Measures the spectrum of growth rates of perturbations along a ray.
///
/// The base solution is the optimally truncated series itself, which at
/// these radii is far more accurate than any integrated trajectory; the
/// `2n` perturbations are integrated outward and re-orthonormalized after
/// each of `chunks` pieces. Slopes are fitted over the outer half.
#[allow(clippy::too_many_arguments)]
pub fn separation_rate(
    eq: &HierarchyEquation,
    sys: &ODESystem,
    series: &FormalSeries,
    angle: f64,
    window: (f64, f64),
    tol: f64,
    chunks: usize,
) -> Result<SeparationReport> {
    let n = eq.n;
    let d = 2 * n as usize;
    let (r_lo, r_hi) = window;
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(Error::Validation(format!("bad window {window:?}")));
    }
    let base = series.numeric()?;
    let flow = TangentFlow {
        sys,
        base: &base,
        angle,
    };
    let c = 2.0 * n as f64 / (2 * n + 1) as f64;
    let expo = (2 * n + 1) as f64 / (2 * n) as f64;
    let svar = |r: f64| c * r.powf(expo);

    let mut y = vec![Complex64::zero(); d * d];
    for v in 0..d {
        y[v * d + v] = Complex64::new(1.0, 0.0);
    }
    let mut cum = vec![0.0; d];
    let mut pts: Vec<(f64, Vec<f64>)> = Vec::new();
    let opts = Options::with_tol(tol);
    for i in 0..chunks {
        let a = r_lo + (r_hi - r_lo) * i as f64 / chunks as f64;
        let b = r_lo + (r_hi - r_lo) * (i + 1) as f64 / chunks as f64;
        let path = PathSpec::line(Complex64::from_polar(a, angle), Complex64::from_polar(b, angle));
        let t = integrate_path(&flow, &y, &path, &opts)?;
        if t.status != Status::Completed {
            return Err(Error::Fit(format!("perturbation flow stopped near |x| = {a}")));
        }
        y = t.last().y.clone();
        let logs = gram_schmidt(&mut y, d);
        for (acc, l) in cum.iter_mut().zip(&logs) {
            *acc += l;
        }
        if b >= 0.5 * (r_lo + r_hi) {
            pts.push((svar(b), cum.clone()));
        }
    }
    let m = pts.len() as f64;
    if pts.len() < 3 {
        return Err(Error::Fit(format!("only {} fit points in the outer half", pts.len())));
    }
    let ms = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - ms).powi(2)).sum();
    let sum_s2: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    // Condition number of the normal matrix [[m, sum s], [sum s, sum s^2]].
    let tr = m + sum_s2;
    let det = m * sxx;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let condition = (tr / 2.0 + disc) / (tr / 2.0 - disc).max(f64::MIN_POSITIVE);
    if !condition.is_finite() || condition > 1e12 || sxx <= 0.0 {
        return Err(Error::Fit(format!("ill-conditioned fit, condition number {condition:e}")));
    }
    let mut fitted: Vec<f64> = (0..d)
        .map(|i| {
            let my = pts.iter().map(|p| p.1[i]).sum::<f64>() / m;
            pts.iter().map(|p| (p.0 - ms) * (p.1[i] - my)).sum::<f64>() / sxx
        })
        .collect();
    fitted.sort_by(|a, b| b.total_cmp(a));
    let sort_desc = |mut v: Vec<f64>| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let predicted_published = sort_desc(
        ray_rate_profile(n, series.kind, angle)
            .rates
            .iter()
            .map(|r| r / c)
            .collect(),
    );
    let predicted_characteristic = sort_desc(
        characteristic_rate_profile(n, series.kind, angle)
            .rates
            .iter()
            .map(|r| r / c)
            .collect(),
    );
    let predicted_linearized =
        rates_from_roots(n, &linearized_roots(eq, series.kind, series.branch_id)?, angle);
    Ok(SeparationReport {
        n,
        kind: series.kind,
        angle,
        window,
        fitted,
        predicted_published,
        predicted_characteristic,
        predicted_linearized,
        condition,
    })
}

pub fn rates_csv(reports: &[SeparationReport]) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    if let Some(r) = reports.first() {
        s.push_str("angle");
        for (tag, len) in [
            ("fitted", r.fitted.len()),
            ("published", r.predicted_published.len()),
            ("characteristic", r.predicted_characteristic.len()),
            ("linearized", r.predicted_linearized.len()),
        ] {
            for k in 1..=len {
                let _ = write!(s, ",{tag}_{k}");
            }
        }
        s.push('\n');
    }
    for r in reports {
        let _ = write!(s, "{:.12e}", r.angle);
        for v in r
            .fitted
            .iter()
            .chain(&r.predicted_published)
            .chain(&r.predicted_characteristic)
            .chain(&r.predicted_linearized)
        {
            let _ = write!(s, ",{v:.9e}");
        }
        s.push('\n');
    }
    s
}
