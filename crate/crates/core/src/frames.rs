//! Boutroux variables, sector geometry and Stokes exponents.
//!
//! `V(x) = x^{1/(2n)} u(z)` with `z = (2n/(2n+1)) x^{(2n+1)/(2n)}`. Writing
//! `rho = x^{1/(2n)}`, every chain-rule coefficient is a single power of
//! `rho`, so the transformed equation is assembled exactly from rational
//! coefficients and integer powers of `z`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::asymptotics::{z_scale, XPoint};
use crate::diffpoly::{pow_rational, rational, rational_to_f64, JetPolynomial};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyEquation;
use crate::Kind;

/// Reduces an angle to `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// `z = (2n/(2n+1)) x^{(2n+1)/(2n)}`, carrying the argument along.
pub fn boutroux_map(n: u32, x: &XPoint) -> XPoint {
    let c = rational_to_f64(&z_scale(n));
    let s = x.root(n);
    let q = (2 * n + 1) as f64 / (2 * n) as f64;
    XPoint {
        value: c * s.powi(2 * n as i32 + 1),
        arg: x.arg * q,
    }
}

/// Inverse of [`boutroux_map`]; the argument of `z` selects the sheet.
pub fn boutroux_inverse(n: u32, z: &XPoint) -> Result<XPoint> {
    if z.value.norm() == 0.0 {
        return Err(Error::Singular);
    }
    let c = rational_to_f64(&z_scale(n));
    let q = (2 * n) as f64 / (2 * n + 1) as f64;
    let r = (z.value.norm() / c).powf(q);
    Ok(XPoint::polar(r, z.arg * q))
}

/// Chain-rule table: `V_p = sum_l r[p][l] rho^{e(p,l)} u^{(l)}(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainRule {
    pub n: u32,
    pub coeffs: Vec<Vec<BigRational>>,
}

impl ChainRule {
    pub fn new(n: u32, pmax: usize) -> Self {
        let two_n = 2 * n as i64;
        let mut coeffs = vec![vec![BigRational::one()]];
        for p in 0..pmax {
            let prev = &coeffs[p];
            let mut next = vec![BigRational::zero(); p + 2];
            for (l, r) in prev.iter().enumerate() {
                // d/dx rho^e = (e/2n) rho^{e-2n}; dz/dx = rho
                let e = Self::exponent_raw(n, p, l);
                next[l] += r * rational(e, two_n);
                next[l + 1] += r.clone();
            }
            coeffs.push(next);
        }
        ChainRule { n, coeffs }
    }

    fn exponent_raw(n: u32, p: usize, l: usize) -> i64 {
        let s = 2 * n as i64 + 1;
        s * (l as i64 + 1) - 2 * n as i64 * (p as i64 + 1)
    }

    /// Power of `rho` multiplying `u^{(l)}` in `V_p`.
    pub fn exponent(&self, p: usize, l: usize) -> i64 {
        Self::exponent_raw(self.n, p, l)
    }

    /// `a~_{p,l}` in `V_p = sum_l a~_{p,l} z^{l+1-2n(p+1)/(2n+1)} u^{(l)}`.
    pub fn z_coefficient(&self, p: usize, l: usize) -> f64 {
        let n = self.n as f64;
        let c = 2.0 * n / (2.0 * n + 1.0);
        let power = -(l as f64 + 1.0) + 2.0 * n * (p as f64 + 1.0) / (2.0 * n + 1.0);
        rational_to_f64(&self.coeffs[p][l]) * c.powf(power)
    }

    /// Lower-triangular matrix mapping `u`-jets to `V`-jets at `x`.
    pub fn matrix(&self, x: &XPoint) -> Result<Vec<Vec<Complex64>>> {
        if x.value.norm() == 0.0 {
            return Err(Error::Singular);
        }
        let rho = x.root(self.n);
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(p, row)| {
                row.iter()
                    .enumerate()
                    .map(|(l, r)| rational_to_f64(r) * rho.powi(self.exponent(p, l) as i32))
                    .collect()
            })
            .collect())
    }
}

/// `(u, u', ...)` at `z(x)` to `(V, V', ...)` at `x`.
pub fn solution_transform(n: u32, x: &XPoint, u_jets: &[Complex64]) -> Result<Vec<Complex64>> {
    let m = ChainRule::new(n, u_jets.len().saturating_sub(1)).matrix(x)?;
    Ok(m.iter()
        .map(|row| row.iter().zip(u_jets).map(|(a, u)| a * u).sum())
        .collect())
}

/// `(V, V', ...)` at `x` to `(u, u', ...)` at `z(x)` by forward substitution.
pub fn inverse_solution_transform(
    n: u32,
    x: &XPoint,
    v_jets: &[Complex64],
) -> Result<Vec<Complex64>> {
    let m = ChainRule::new(n, v_jets.len().saturating_sub(1)).matrix(x)?;
    let mut u: Vec<Complex64> = Vec::with_capacity(v_jets.len());
    for (p, row) in m.iter().enumerate() {
        let known: Complex64 = row[..p].iter().zip(&u).map(|(a, b)| a * b).sum();
        u.push((v_jets[p] - known) / row[p]);
    }
    Ok(u)
}

/// Polynomial in `rho` with jet-polynomial coefficients.
type RhoPoly = BTreeMap<i64, JetPolynomial>;

fn rho_mul(a: &RhoPoly, b: &RhoPoly) -> RhoPoly {
    let mut out = RhoPoly::new();
    for (ea, pa) in a {
        for (eb, pb) in b {
            let t = pa * pb;
            let slot = out.entry(ea + eb).or_insert_with(JetPolynomial::zero);
            *slot += t;
        }
    }
    out.retain(|_, p| !p.is_zero());
    out
}

fn rho_add(acc: &mut RhoPoly, b: &RhoPoly, sign: &BigRational) {
    for (e, p) in b {
        let slot = acc.entry(*e).or_insert_with(JetPolynomial::zero);
        *slot += p.scale(sign);
    }
    acc.retain(|_, p| !p.is_zero());
}

/// Transformed equation `u^{(2n)} = sum_j z^j Q_j(u, u', ..., alpha)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UEquation {
    pub n: u32,
    /// All terms by power of `z`.
    pub terms: BTreeMap<i64, JetPolynomial>,
    /// Contribution of the lower chain-rule terms of `V_{2n}`.
    pub linear_part: BTreeMap<i64, JetPolynomial>,
    /// Contribution of `x V + alpha + beta V^{2n+1}`.
    pub core_part: BTreeMap<i64, JetPolynomial>,
    /// Contribution of `P_{2n-1}`.
    pub p_part: BTreeMap<i64, JetPolynomial>,
}

fn to_z_powers(n: u32, rp: RhoPoly) -> Result<BTreeMap<i64, JetPolynomial>> {
    let s = 2 * n as i64 + 1;
    let c = z_scale(n);
    let mut out = BTreeMap::new();
    for (e, p) in rp {
        // rho^e / rho^{2n+1} = (z/c)^j
        if (e - s) % s != 0 {
            return Err(Error::Structure(format!(
                "power rho^{e} is not an integer power of z"
            )));
        }
        let j = (e - s) / s;
        let scale = if j >= 0 {
            BigRational::one() / pow_rational(&c, j as u32)
        } else {
            pow_rational(&c, (-j) as u32)
        };
        out.insert(j, p.scale(&scale));
    }
    Ok(out)
}

/// Rewrites the hierarchy member in Boutroux variables.
pub fn transform_equation(eq: &HierarchyEquation) -> Result<UEquation> {
    let n = eq.n;
    let order = 2 * n as usize;
    let chain = ChainRule::new(n, order);
    let v: Vec<RhoPoly> = (0..=order)
        .map(|p| {
            let mut m = RhoPoly::new();
            for (l, r) in chain.coeffs[p].iter().enumerate() {
                if !r.is_zero() {
                    m.insert(chain.exponent(p, l), JetPolynomial::jet(l).scale(r));
                }
            }
            m
        })
        .collect();
    let substitute = |poly: &JetPolynomial| -> RhoPoly {
        let mut acc = RhoPoly::new();
        for (m, c) in poly.terms() {
            let mut t = RhoPoly::new();
            let mut coef = JetPolynomial::constant(c.clone());
            for _ in 0..m.alpha_exp() {
                coef = &coef * &JetPolynomial::alpha();
            }
            t.insert(2 * n as i64 * m.x_exp() as i64, coef);
            for (p, &k) in m.jet_exps().iter().enumerate() {
                for _ in 0..k {
                    t = rho_mul(&t, &v[p]);
                }
            }
            rho_add(&mut acc, &t, &BigRational::one());
        }
        acc
    };

    let p_rho = substitute(&eq.rhs_poly);
    let core_rho = substitute(&(eq.full_rhs() - eq.rhs_poly.clone()));
    let mut lower = v[order].clone();
    lower.remove(&chain.exponent(order, order));
    let mut linear_rho = RhoPoly::new();
    rho_add(&mut linear_rho, &lower, &rational(-1, 1));

    let p_part = to_z_powers(n, p_rho)?;
    let core_part = to_z_powers(n, core_rho)?;
    let linear_part = to_z_powers(n, linear_rho)?;
    let mut terms: BTreeMap<i64, JetPolynomial> = BTreeMap::new();
    for part in [&p_part, &core_part, &linear_part] {
        for (j, p) in part {
            let slot = terms.entry(*j).or_insert_with(JetPolynomial::zero);
            *slot += p.clone();
        }
    }
    terms.retain(|_, p| !p.is_zero());
    Ok(UEquation {
        n,
        terms,
        linear_part,
        core_part,
        p_part,
    })
}

impl UEquation {
    /// Right-hand side at `z` for jets `(u, ..., u^{(2n-1)})`.
    pub fn rhs(&self, u: &[Complex64], z: Complex64, alpha: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(j, p)| z.powi(*j as i32) * p.eval(u, Complex64::zero(), alpha))
            .sum()
    }

    /// `u^{(2n)} - rhs`.
    pub fn residual(&self, u: &[Complex64], z: Complex64, alpha: Complex64) -> Complex64 {
        u[2 * self.n as usize] - self.rhs(u, z, alpha)
    }

    /// Coefficient of `u` in the `z^0` part (the `x V` term).
    pub fn autonomous_linear_coefficient(&self) -> BigRational {
        self.terms
            .get(&0)
            .map(|p| p.coefficient(&crate::Monomial::jet(0)))
            .unwrap_or_else(BigRational::zero)
    }

    pub fn to_text(&self) -> String {
        let mut parts = Vec::new();
        for (j, p) in self.terms.iter().rev() {
            match j {
                0 => parts.push(format!("({p})")),
                _ => parts.push(format!("z^{j}*({p})")),
            }
        }
        format!("u{} = {}", 2 * self.n, parts.join(" + "))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let enc = |m: &BTreeMap<i64, JetPolynomial>| -> serde_json::Value {
            m.iter()
                .map(|(j, p)| (j.to_string(), p.to_json_terms().into_iter().map(|t| serde_json::to_value(t).unwrap()).collect::<Vec<_>>().into()))
                .collect::<serde_json::Map<String, serde_json::Value>>()
                .into()
        };
        serde_json::json!({
            "n": self.n,
            "equation": self.to_text(),
            "terms_by_z_power": enc(&self.terms),
            "p_part": enc(&self.p_part),
        })
    }
}

/// Degree audit of the `P_{2n-1}` part written as `z^{-2n-1} a(z)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeReport {
    pub n: u32,
    pub bound: i64,
    pub max_degree: i64,
    /// Terms of `a(z)` whose degree exceeds the bound.
    pub offending: Vec<String>,
}

impl DegreeReport {
    pub fn holds(&self) -> bool {
        self.offending.is_empty()
    }
}

pub fn degree_report(ueq: &UEquation) -> DegreeReport {
    let n = ueq.n as i64;
    let shift = 2 * n + 1;
    let mut max_degree = i64::MIN;
    let mut offending = Vec::new();
    for (j, p) in &ueq.p_part {
        let deg = j + shift;
        max_degree = max_degree.max(deg);
        if deg > 2 * n || deg < 0 {
            offending.push(format!("z^{deg}*({p})"));
        }
    }
    DegreeReport {
        n: ueq.n,
        bound: 2 * n,
        max_degree: if max_degree == i64::MIN { 0 } else { max_degree },
        offending,
    }
}

/// Fails with a structure error when the degree bound is violated.
pub fn verify_degree_bound(ueq: &UEquation) -> Result<()> {
    let r = degree_report(ueq);
    if r.holds() {
        Ok(())
    } else {
        Err(Error::Structure(format!(
            "n={}: coefficient polynomials reach degree {} > {}: {}",
            r.n,
            r.max_degree,
            r.bound,
            r.offending.join(", ")
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SectorLabel {
    #[serde(rename = "S_n")]
    Tronquee,
    #[serde(rename = "Sigma_n")]
    Doubled,
    #[serde(rename = "S_epsilon")]
    Overlap,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorSpec {
    pub n: u32,
    pub kind: Kind,
    pub center_angle: f64,
    pub half_width: f64,
    pub inner_radius: f64,
    pub label: SectorLabel,
}

impl SectorSpec {
    /// `|x| > |x_0|` and `|arg(x - x_0) - center| < half_width`, with `x_0`
    /// on the center line.
    pub fn contains(&self, x: Complex64) -> bool {
        if x.norm() <= self.inner_radius {
            return false;
        }
        let x0 = Complex64::from_polar(self.inner_radius, self.center_angle);
        let d = x - x0;
        normalize_angle(d.arg() - self.center_angle).abs() < self.half_width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorTable {
    pub n: u32,
    pub kind: Kind,
    pub rays: Vec<f64>,
    pub sectors: Vec<SectorSpec>,
    pub epsilon: f64,
}

pub fn default_epsilon(n: u32) -> f64 {
    PI / (8.0 * (2 * n + 1) as f64)
}

pub fn default_inner_radius(n: u32) -> f64 {
    if n <= 2 {
        10.0
    } else {
        20.0
    }
}

/// The `2n+1` uniqueness rays of a kind, normalized to `(-pi, pi]`.
pub fn rays(n: u32, kind: Kind) -> Vec<f64> {
    let s = (2 * n + 1) as f64;
    let offset = match kind {
        Kind::Infty => 0.0,
        Kind::Zero => PI,
    };
    let mut r: Vec<f64> = (0..=2 * n)
        .map(|j| normalize_angle(offset + (2 * j + 1) as f64 * PI / s))
        .collect();
    r.sort_by(f64::total_cmp);
    r
}

pub fn sectors(n: u32, kind: Kind, epsilon: Option<f64>, inner_radius: Option<f64>) -> SectorTable {
    let eps = epsilon.unwrap_or_else(|| default_epsilon(n));
    let r0 = inner_radius.unwrap_or_else(|| default_inner_radius(n));
    let s = (2 * n + 1) as f64;
    let nf = n as f64;
    let ray_list = rays(n, kind);
    let mut secs = vec![
        SectorSpec {
            n,
            kind,
            center_angle: 0.0,
            half_width: nf * PI / s,
            inner_radius: r0,
            label: SectorLabel::Tronquee,
        },
        SectorSpec {
            n,
            kind,
            center_angle: 0.0,
            half_width: 2.0 * nf * PI / s,
            inner_radius: r0,
            label: SectorLabel::Doubled,
        },
    ];
    for &a in &ray_list {
        secs.push(SectorSpec {
            n,
            kind,
            center_angle: a,
            half_width: eps,
            inner_radius: r0,
            label: SectorLabel::Overlap,
        });
    }
    SectorTable {
        n,
        kind,
        rays: ray_list,
        sectors: secs,
        epsilon: eps,
    }
}

/// Eigenvalues `mu_k` and exponents `nu_k`, `k = 1..2n`, at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentSet {
    pub n: u32,
    pub kind: Kind,
    pub z: Complex64,
    pub mu: Vec<Complex64>,
    pub nu: Vec<Complex64>,
}

/// Closed forms as published:
/// `mu_k = (2n-1)^{1/2n} z^{1/2n} e^{i k pi/n}` (Infty) and
/// `mu_k = z^{1/2n} e^{i k pi/n} e^{i pi/2n}` (Zero), with
/// `nu_k = (2n/(2n+1)) (mu_k/z^{1/2n}) z^{(2n+1)/2n}`.
pub fn stokes_exponents(n: u32, kind: Kind, z: &XPoint) -> Result<ExponentSet> {
    if z.value.norm() == 0.0 {
        return Err(Error::Singular);
    }
    let prefactor = match kind {
        Kind::Infty => Complex64::new((2.0 * n as f64 - 1.0).powf(1.0 / (2 * n) as f64), 0.0),
        Kind::Zero => Complex64::from_polar(1.0, PI / (2 * n) as f64),
    };
    Ok(exponents_with(n, kind, z, prefactor))
}

/// Same family rebuilt from the characteristic equation `mu^{2n} = f(z)` of
/// the companion matrix, `f = (1-2n) z` (Infty) or `f = z` (Zero).
pub fn characteristic_exponents(n: u32, kind: Kind, z: &XPoint) -> Result<ExponentSet> {
    if z.value.norm() == 0.0 {
        return Err(Error::Singular);
    }
    let prefactor = match kind {
        Kind::Infty => Complex64::from_polar(
            (2.0 * n as f64 - 1.0).powf(1.0 / (2 * n) as f64),
            PI / (2 * n) as f64,
        ),
        Kind::Zero => Complex64::new(1.0, 0.0),
    };
    Ok(exponents_with(n, kind, z, prefactor))
}

fn exponents_with(n: u32, kind: Kind, z: &XPoint, prefactor: Complex64) -> ExponentSet {
    let root = z.root(n);
    let c = 2.0 * n as f64 / (2 * n + 1) as f64;
    let z_pow = root.powi(2 * n as i32 + 1);
    let mut mu = Vec::new();
    let mut nu = Vec::new();
    for k in 1..=2 * n {
        let rot = Complex64::from_polar(1.0, PI * k as f64 / n as f64);
        mu.push(prefactor * rot * root);
        nu.push(c * prefactor * rot * z_pow);
    }
    ExponentSet {
        n,
        kind,
        z: z.value,
        mu,
        nu,
    }
}

/// `Re nu_k` per unit `|x|^{(2n+1)/(2n)}` along `arg x = angle`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateProfile {
    pub angle: f64,
    pub rates: Vec<f64>,
    pub oscillatory: bool,
}

pub const OSCILLATORY_TOL: f64 = 1e-12;

fn profile_from(set: ExponentSet, angle: f64) -> RateProfile {
    let rates: Vec<f64> = set.nu.iter().map(|v| v.re).collect();
    let oscillatory = rates.iter().any(|r| r.abs() <= OSCILLATORY_TOL);
    RateProfile {
        angle,
        rates,
        oscillatory,
    }
}

/// Rates from the published `nu_k` along a ray.
pub fn ray_rate_profile(n: u32, kind: Kind, angle: f64) -> RateProfile {
    let z = XPoint::polar(1.0, angle);
    profile_from(stokes_exponents(n, kind, &z).expect("unit point"), angle)
}

/// Rates from the characteristic-equation family along a ray.
pub fn characteristic_rate_profile(n: u32, kind: Kind, angle: f64) -> RateProfile {
    let z = XPoint::polar(1.0, angle);
    profile_from(characteristic_exponents(n, kind, &z).expect("unit point"), angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::build_p2n;

    #[test]
    fn n1_map_at_nine() {
        let z = boutroux_map(1, &XPoint::principal(Complex64::new(9.0, 0.0)).unwrap());
        assert!((z.value - Complex64::new(18.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn chain_rule_n1_first_derivative() {
        // V' = x^{1/2} * x^{1/2} u' + (1/2) x^{-1/2} u
        let ch = ChainRule::new(1, 1);
        assert_eq!(ch.coeffs[1], vec![rational(1, 2), rational(1, 1)]);
        assert_eq!(ch.exponent(1, 0), -1);
        assert_eq!(ch.exponent(1, 1), 2);
    }

    #[test]
    fn top_coefficient_matches_both_closed_forms() {
        for n in 1..=4u32 {
            let ch = ChainRule::new(n, 2 * n as usize);
            for p in 0..=2 * n as usize {
                assert_eq!(ch.coeffs[p][p], BigRational::one());
                let s = (2 * n + 1) as f64;
                let want = (s / (2 * n) as f64).powf((p as f64 + 1.0) / s);
                assert!((ch.z_coefficient(p, p) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn n1_equation_matches_boutroux_form() {
        let u = transform_equation(&build_p2n(1).unwrap()).unwrap();
        let u0 = JetPolynomial::jet(0);
        let mut want = BTreeMap::new();
        want.insert(0, u0.pow(3).scale(&rational(2, 1)) + u0.clone());
        want.insert(-1, JetPolynomial::alpha().scale(&rational(2, 3)) - JetPolynomial::jet(1));
        want.insert(-2, u0.scale(&rational(1, 9)));
        assert_eq!(u.terms, want);
    }

    #[test]
    fn n2_autonomous_part_keeps_nonlinear_terms() {
        let u = transform_equation(&build_p2n(2).unwrap()).unwrap();
        assert_eq!(u.autonomous_linear_coefficient(), BigRational::one());
        assert!(u.p_part.contains_key(&0));
        assert!(!degree_report(&u).holds());
    }

    #[test]
    fn n1_rays() {
        let r = rays(1, Kind::Infty);
        let mut want = vec![PI / 3.0, PI, -PI / 3.0];
        want.sort_by(f64::total_cmp);
        for (a, b) in r.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn n1_published_exponents_at_one() {
        let e = stokes_exponents(1, Kind::Infty, &XPoint::polar(1.0, 0.0)).unwrap();
        let mut re: Vec<f64> = e.nu.iter().map(|v| v.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 2.0 / 3.0).abs() < 1e-15 && (re[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn angle_normalization_is_half_open() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }
}
