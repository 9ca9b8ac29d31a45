//! Lenard recursion and the normal form of the hierarchy.
//!
//! `L_1 = u_0` and `D L_{n+1} = (D^3 + 4 u_0 D + 2 u_1) L_n`. Substituting
//! `u_0 = v_1 - v_0^2` and applying `(D + 2 v_0)` gives the n-th member
//!
//! ```text
//! v_{2n} = P_{2n-1}(v_0, ..., v_{2n-2}) + x v_0 + alpha + beta_n v_0^{2n+1}
//! ```
//!
//! where every monomial of `P_{2n-1}` has weighted norm `2n+1` and at most
//! `2n-1` factors of `v_0`. [`build_p2n`] checks all of this on construction.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::diffpoly::{rational, JetPolynomial, Monomial, TermJson};
use crate::error::{Error, Result};

/// `(2n-1)!!`.
fn double_factorial_odd(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(2 * k - 1))
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `Gamma(n+1/2) / (Gamma(n+1) Gamma(1/2)) = (2n-1)!! / (2^n n!)`.
pub fn gamma_ratio(n: u32) -> BigRational {
    BigRational::new(
        double_factorial_odd(n),
        BigInt::from(2).pow(n) * factorial(n),
    )
}

/// `c_n = 2^{2n-1} Gamma(n+1/2) / (Gamma(n+1) Gamma(1/2))`.
pub fn c_n(n: u32) -> BigRational {
    gamma_ratio(n) * BigRational::from_integer(BigInt::from(2).pow(2 * n - 1))
}

/// `beta_n = (-1)^{n+1} 2^{2n} Gamma(n+1/2) / (Gamma(n+1) Gamma(1/2))`.
pub fn beta_closed_form(n: u32) -> BigRational {
    let sign = if n % 2 == 1 { 1 } else { -1 };
    gamma_ratio(n) * BigRational::from_integer(BigInt::from(sign) * BigInt::from(2).pow(2 * n))
}

/// `beta_n` from `beta_1 = 2`, `beta_{n+1} = -2 beta_n (2n+1)/(n+1)`.
pub fn beta_recurrence(n: u32) -> BigRational {
    let mut b = BigRational::from_integer(2.into());
    for k in 1..n {
        b = -b * rational(2 * (2 * k as i64 + 1), k as i64 + 1);
    }
    b
}

/// One Lenard step before integration: `(D^3 + 4 u_0 D + 2 u_1) L`.
pub fn lenard_image(l: &JetPolynomial) -> JetPolynomial {
    let dl = l.total_derivative();
    let mut out = dl.total_derivative_n(2);
    out += &(&JetPolynomial::jet(0) * &dl).scale(&rational(4, 1));
    out += &(&JetPolynomial::jet(1) * l).scale(&rational(2, 1));
    out
}

/// `L_{n+1}` from `L_n`, with zero integration constant.
pub fn lenard_next(l: &JetPolynomial) -> Result<JetPolynomial> {
    if l.has_x() {
        return Err(Error::ExplicitVariable);
    }
    lenard_image(l).integrate_total_derivative()
}

/// `L_n{U}` in the jet variables `u_i`.
pub fn build_l(n: u32) -> Result<JetPolynomial> {
    if n == 0 {
        return Err(Error::Validation("n must be at least 1".into()));
    }
    let mut l = JetPolynomial::jet(0);
    for _ in 1..n {
        l = lenard_next(&l)?;
    }
    Ok(l)
}

/// Weighted degree with `weight(u_i) = i + 2`.
pub fn lenard_weight(m: &Monomial) -> u32 {
    m.jet_exps()
        .iter()
        .enumerate()
        .map(|(i, &e)| (i as u32 + 2) * e)
        .sum()
}

/// The image `v_1 - v_0^2` of `u_0` under the Miura-type substitution.
pub fn miura_image() -> JetPolynomial {
    JetPolynomial::jet(1) - JetPolynomial::jet(0).pow(2)
}

/// One member of the hierarchy in normal form.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyEquation {
    pub n: u32,
    /// `P_{2n-1}` in `v_0 .. v_{2n-2}`.
    pub rhs_poly: JetPolynomial,
    pub beta_n: BigRational,
    pub c_n: BigRational,
    /// `alpha` is carried as a formal generator in [`Self::full_rhs`].
    pub alpha_symbolic: bool,
    pub lenard_l: JetPolynomial,
}

impl HierarchyEquation {
    pub fn order(&self) -> usize {
        2 * self.n as usize
    }

    /// `P_{2n-1} + x v_0 + alpha + beta_n v_0^{2n+1}`.
    pub fn full_rhs(&self) -> JetPolynomial {
        let v0 = JetPolynomial::jet(0);
        let mut rhs = self.rhs_poly.clone();
        rhs += &JetPolynomial::x() * &v0;
        rhs += JetPolynomial::alpha();
        rhs += v0.pow(2 * self.n + 1).scale(&self.beta_n);
        rhs
    }

    /// `v_{2n} - full_rhs`, the defining expression of the equation.
    pub fn residual_poly(&self) -> JetPolynomial {
        JetPolynomial::jet(self.order()) - self.full_rhs()
    }

    /// Checks every structural claim of the normal form.
    pub fn check_structure(&self) -> Result<()> {
        let n = self.n;
        for (m, _) in self.rhs_poly.terms() {
            if m.x_exp() > 0 || m.alpha_exp() > 0 {
                return Err(Error::Structure(format!(
                    "P_{} contains explicit x or alpha in {:?}",
                    2 * n - 1,
                    m
                )));
            }
            if m.norm() != 2 * n + 1 {
                return Err(Error::Structure(format!(
                    "monomial {:?} has norm {} instead of {}",
                    m,
                    m.norm(),
                    2 * n + 1
                )));
            }
            if m.jet_exp(0) > 2 * n - 1 {
                return Err(Error::Structure(format!(
                    "monomial {:?} has k_0 > {}",
                    m,
                    2 * n - 1
                )));
            }
            if m.max_order().is_some_and(|o| o > 2 * n as usize - 2) {
                return Err(Error::Structure(format!(
                    "monomial {:?} involves a derivative above order {}",
                    m,
                    2 * n - 2
                )));
            }
        }
        if self.beta_n != beta_closed_form(n) {
            return Err(Error::Structure(format!(
                "beta_{n} = {} differs from closed form {}",
                self.beta_n,
                beta_closed_form(n)
            )));
        }
        if self.beta_n != beta_recurrence(n) {
            return Err(Error::Structure(format!(
                "beta_{n} = {} differs from recurrence {}",
                self.beta_n,
                beta_recurrence(n)
            )));
        }
        Ok(())
    }
}

/// Builds the n-th member and verifies its normal form.
pub fn build_p2n(n: u32) -> Result<HierarchyEquation> {
    let l = build_l(n)?;
    assemble(n, l)
}

fn assemble(n: u32, l: JetPolynomial) -> Result<HierarchyEquation> {
    let order = 2 * n as usize;
    let lv = l.substitute_jets(&miura_image());
    let lhs = lv.total_derivative() + (&JetPolynomial::jet(0) * &lv).scale(&rational(2, 1));

    let top = Monomial::jet(order);
    if !lhs.coefficient(&top).is_one() {
        return Err(Error::Structure(format!(
            "coefficient of v_{order} is {}",
            lhs.coefficient(&top)
        )));
    }
    // v_{2n} = -(lhs - v_{2n}) + x v_0 + alpha
    let moved = -(lhs - JetPolynomial::jet(order));
    let beta_mono = Monomial::new(0, 0, vec![2 * n + 1]);
    let beta_n = moved.coefficient(&beta_mono);
    let rhs_poly = moved.filter(|m| m != &beta_mono);

    let eq = HierarchyEquation {
        n,
        rhs_poly,
        beta_n,
        c_n: c_n(n),
        alpha_symbolic: true,
        lenard_l: l,
    };
    eq.check_structure()?;
    Ok(eq)
}

/// Outcome of checking `L_n{v_1 - v_0^2} = v_{2n-1} + beta~_n v_0^{2n} + ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntermediateReport {
    pub n: u32,
    pub beta_tilde: BigRational,
    /// Coefficient of `v_{2n-1}`; 1 when the form holds.
    pub leading_coefficient: BigRational,
    /// Remainder monomials with norm != 2n or k_0 > 2n-2.
    pub violations: Vec<Monomial>,
}

impl IntermediateReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
            && self.leading_coefficient.is_one()
            && self.beta_tilde == -beta_closed_form(self.n) / BigRational::from_integer(2.into())
    }
}

pub fn verify_intermediate_form(n: u32) -> Result<IntermediateReport> {
    let l = build_l(n)?;
    let lv = l.substitute_jets(&miura_image());
    let lead = Monomial::jet(2 * n as usize - 1);
    let pure = Monomial::new(0, 0, vec![2 * n]);
    let violations = lv
        .terms()
        .filter(|(m, _)| **m != lead && **m != pure)
        .filter(|(m, _)| m.norm() != 2 * n || m.jet_exp(0) > 2 * n - 2)
        .map(|(m, _)| m.clone())
        .collect();
    Ok(IntermediateReport {
        n,
        beta_tilde: lv.coefficient(&pure),
        leading_coefficient: lv.coefficient(&lead),
        violations,
    })
}

/// Output formats of [`emit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Latex,
    Json,
}

/// JSON schema for one equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationJson {
    pub n: u32,
    pub beta: String,
    pub c: String,
    /// The full right-hand side, `alpha` formal.
    pub rhs: Vec<TermJson>,
}

impl EquationJson {
    pub fn from_equation(eq: &HierarchyEquation) -> Self {
        EquationJson {
            n: eq.n,
            beta: eq.beta_n.to_string(),
            c: eq.c_n.to_string(),
            rhs: eq.full_rhs().to_json_terms(),
        }
    }

    /// Rebuilds the equation; `lenard_l` is recomputed from `n`.
    pub fn to_equation(&self) -> Result<HierarchyEquation> {
        let parse = |s: &str| -> Result<BigRational> {
            s.parse::<BigRational>()
                .map_err(|_| Error::Validation(format!("bad rational {s:?}")))
        };
        let full = JetPolynomial::from_json_terms(&self.rhs)?;
        let beta_n = parse(&self.beta)?;
        let v0 = JetPolynomial::jet(0);
        let p = full
            - &JetPolynomial::x() * &v0
            - JetPolynomial::alpha()
            - v0.pow(2 * self.n + 1).scale(&beta_n);
        let eq = HierarchyEquation {
            n: self.n,
            rhs_poly: p,
            beta_n,
            c_n: parse(&self.c)?,
            alpha_symbolic: true,
            lenard_l: build_l(self.n)?,
        };
        eq.check_structure()?;
        Ok(eq)
    }
}

/// Deterministic rendering of an equation.
pub fn emit(eq: &HierarchyEquation, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string(&EquationJson::from_equation(eq)).expect("serializable"),
        Format::Latex => format!(
            "{} = {}",
            latex_jet(eq.order(), 1),
            latex_poly(&eq.full_rhs())
        ),
    }
}

pub fn parse_json(text: &str) -> Result<HierarchyEquation> {
    let parsed: EquationJson = serde_json::from_str(text)?;
    parsed.to_equation()
}

fn latex_jet(p: usize, e: u32) -> String {
    let base = match p {
        0 => "V".to_string(),
        1 => "V_{x}".to_string(),
        p => format!("V_{{{p}x}}"),
    };
    if e == 1 {
        base
    } else {
        format!("{base}^{{{e}}}")
    }
}

/// LaTeX for a polynomial in `V_{px}`, `x`, `\alpha`; terms in descending
/// canonical order.
pub fn latex_poly(p: &JetPolynomial) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (idx, (m, c)) in p.terms().rev().enumerate() {
        let neg = c.is_negative();
        let abs = c.abs();
        if idx == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mut factors = String::new();
        if m.x_exp() > 0 {
            factors.push('x');
            if m.x_exp() > 1 {
                factors.push_str(&format!("^{{{}}}", m.x_exp()));
            }
        }
        if m.alpha_exp() > 0 {
            factors.push_str("\\alpha");
            if m.alpha_exp() > 1 {
                factors.push_str(&format!("^{{{}}}", m.alpha_exp()));
            }
        }
        for (i, &e) in m.jet_exps().iter().enumerate() {
            if e > 0 {
                factors.push_str(&latex_jet(i, e));
            }
        }
        let coeff = if abs.is_one() && !factors.is_empty() {
            String::new()
        } else if abs.is_integer() {
            abs.to_string()
        } else {
            format!("\\frac{{{}}}{{{}}}", abs.numer(), abs.denom())
        };
        out.push_str(&coeff);
        out.push_str(&factors);
    }
    out
}

/// On-disk cache of equations keyed by `n`, stored as canonical JSON under
/// a versioned directory. Writes go through a temporary file and a rename.
#[derive(Clone, Debug)]
pub struct EquationCache {
    dir: PathBuf,
}

pub const CACHE_FORMAT_VERSION: &str = "v1";

impl EquationCache {
    pub fn new<P: AsRef<Path>>(root: P) -> Self {
        EquationCache {
            dir: root.as_ref().join(CACHE_FORMAT_VERSION),
        }
    }

    pub fn path_for(&self, n: u32) -> PathBuf {
        self.dir.join(format!("p2_n{n}.json"))
    }

    pub fn load(&self, n: u32) -> Result<Option<HierarchyEquation>> {
        let path = self.path_for(n);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path)?;
        parse_json(&text).map(Some)
    }

    pub fn store(&self, eq: &HierarchyEquation) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(eq.n);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(emit(eq, Format::Json).as_bytes())?;
        tmp.write_all(b"\n")?;
        tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
        Ok(path)
    }

    pub fn get_or_build(&self, n: u32) -> Result<HierarchyEquation> {
        if let Some(eq) = self.load(n)? {
            return Ok(eq);
        }
        let eq = build_p2n(n)?;
        self.store(&eq)?;
        Ok(eq)
    }
}

/// Groups the monomials of `P_{2n-1}` by their `v_0` exponent; handy for
/// reports.
pub fn k0_histogram(eq: &HierarchyEquation) -> BTreeMap<u32, usize> {
    let mut hist = BTreeMap::new();
    for (m, _) in eq.rhs_poly.terms() {
        *hist.entry(m.jet_exp(0)).or_insert(0) += 1;
    }
    hist
}

/// The coefficient of `v_0^{2n-p} v_p` in `P_{2n-1}`, `p = 1 .. 2n-2`.
///
/// These are the monomials linear in a single derivative; they survive at
/// leading order when the equation is linearised around `A x^{1/(2n)}`.
pub fn linear_derivative_coefficients(eq: &HierarchyEquation) -> Vec<BigRational> {
    let n = eq.n;
    (1..(2 * n - 1))
        .map(|p| {
            let mut exps = vec![0u32; p as usize + 1];
            exps[0] = 2 * n - p;
            exps[p as usize] += 1;
            eq.rhs_poly.coefficient(&Monomial::new(0, 0, exps))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(i: usize) -> JetPolynomial {
        JetPolynomial::jet(i)
    }

    fn int(c: i64) -> JetPolynomial {
        JetPolynomial::integer(c)
    }

    #[test]
    fn lenard_first_steps() {
        assert_eq!(build_l(1).unwrap(), u(0));
        assert_eq!(build_l(2).unwrap(), u(2) + int(3) * u(0).pow(2));
        let l3 = u(4) + int(10) * u(0) * u(2) + int(5) * u(1).pow(2) + int(10) * u(0).pow(3);
        assert_eq!(build_l(3).unwrap(), l3);
    }

    #[test]
    fn lenard_step_on_zero_is_zero() {
        assert!(lenard_next(&JetPolynomial::zero()).unwrap().is_zero());
    }

    #[test]
    fn lenard_weights_are_homogeneous() {
        for n in 1..=5 {
            let l = build_l(n).unwrap();
            assert!(l.terms().all(|(m, _)| lenard_weight(m) == 2 * n));
        }
    }

    #[test]
    fn constants() {
        assert_eq!(beta_closed_form(1), rational(2, 1));
        assert_eq!(beta_closed_form(2), rational(-6, 1));
        assert_eq!(beta_closed_form(3), rational(20, 1));
        assert_eq!(c_n(1), rational(1, 1));
        assert_eq!(c_n(2), rational(3, 1));
        assert_eq!(c_n(3), rational(10, 1));
        for n in 1..=10 {
            assert_eq!(beta_closed_form(n), beta_recurrence(n));
            let sign = if n % 2 == 1 { 2 } else { -2 };
            assert_eq!(beta_closed_form(n), c_n(n) * rational(sign, 1));
        }
    }

    #[test]
    fn first_member_is_p2() {
        let eq = build_p2n(1).unwrap();
        let v0 = u(0);
        let expected = int(2) * v0.pow(3) + JetPolynomial::x() * v0.clone() + JetPolynomial::alpha();
        assert_eq!(eq.full_rhs(), expected);
        assert!(eq.rhs_poly.is_zero());
    }

    #[test]
    fn second_member_matches_published_form() {
        let eq = build_p2n(2).unwrap();
        let expected = int(10) * u(0).pow(2) * u(2) + int(10) * u(0) * u(1).pow(2)
            - int(6) * u(0).pow(5)
            + JetPolynomial::x() * u(0)
            + JetPolynomial::alpha();
        assert_eq!(eq.full_rhs(), expected);
    }

    #[test]
    fn third_member_leading_constant() {
        let eq = build_p2n(3).unwrap();
        assert_eq!(eq.beta_n, rational(20, 1));
        assert!(eq.check_structure().is_ok());
    }

    #[test]
    fn intermediate_form() {
        let r1 = verify_intermediate_form(1).unwrap();
        assert_eq!(r1.beta_tilde, rational(-1, 1));
        assert!(r1.holds());
        let r2 = verify_intermediate_form(2).unwrap();
        assert_eq!(r2.beta_tilde, rational(3, 1));
        assert!(r2.violations.is_empty());
        assert!(r2.holds());
    }

    #[test]
    fn latex_first_member() {
        let eq = build_p2n(1).unwrap();
        assert_eq!(emit(&eq, Format::Latex), "V_{2x} = 2V^{3} + xV + \\alpha");
    }

    #[test]
    fn json_round_trip() {
        for n in 1..=3 {
            let eq = build_p2n(n).unwrap();
            let back = parse_json(&emit(&eq, Format::Json)).unwrap();
            assert_eq!(back, eq);
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EquationCache::new(dir.path());
        let built = cache.get_or_build(2).unwrap();
        assert!(cache.path_for(2).exists());
        assert_eq!(cache.load(2).unwrap().unwrap(), built);
    }

    #[test]
    fn bad_n_rejected() {
        assert!(matches!(build_l(0), Err(Error::Validation(_))));
    }
}
