//! Differential polynomials over the rationals.
//!
//! A [`JetPolynomial`] is a polynomial in the jet variables `u_0, u_1, ...`
//! (formal derivatives of one dependent variable), the independent variable
//! `x` and a formal parameter `alpha`. The total derivative `D` sends
//! `u_i` to `u_{i+1}` and differentiates explicit `x`; the Euler operator
//! `E = sum_i (-D)^i d/du_i` annihilates exactly the total derivatives,
//! which is what makes [`JetPolynomial::integrate_total_derivative`] safe.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of one monomial `x^ex alpha^ea u_0^e0 u_1^e1 ...`.
///
/// Trailing zero jet exponents are never stored, so two equal monomials have
/// identical representations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    x: u32,
    alpha: u32,
    jets: Vec<u32>,
}

impl Monomial {
    pub fn new(x: u32, alpha: u32, jets: Vec<u32>) -> Self {
        let mut m = Monomial { x, alpha, jets };
        m.trim();
        m
    }

    pub fn one() -> Self {
        Self::default()
    }

    /// The monomial `u_i`.
    pub fn jet(i: usize) -> Self {
        let mut jets = vec![0; i + 1];
        jets[i] = 1;
        Monomial { x: 0, alpha: 0, jets }
    }

    fn trim(&mut self) {
        while self.jets.last() == Some(&0) {
            self.jets.pop();
        }
    }

    pub fn x_exp(&self) -> u32 {
        self.x
    }

    pub fn alpha_exp(&self) -> u32 {
        self.alpha
    }

    pub fn jet_exps(&self) -> &[u32] {
        &self.jets
    }

    pub fn jet_exp(&self, i: usize) -> u32 {
        self.jets.get(i).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.x + self.alpha + self.jets.iter().sum::<u32>()
    }

    /// Degree in the jet variables only.
    pub fn jet_degree(&self) -> u32 {
        self.jets.iter().sum()
    }

    /// Highest jet index with a nonzero exponent.
    pub fn max_order(&self) -> Option<usize> {
        if self.jets.is_empty() {
            None
        } else {
            Some(self.jets.len() - 1)
        }
    }

    /// Norm `<k> = sum_p (p+1) k_p` over the jet exponents.
    pub fn norm(&self) -> u32 {
        MultiIndexNorm::from_exponents(&self.jets).norm()
    }

    fn with_jet_delta(&self, i: usize, delta: i32) -> Option<Monomial> {
        let mut jets = self.jets.clone();
        if jets.len() <= i {
            jets.resize(i + 1, 0);
        }
        let e = jets[i] as i64 + delta as i64;
        if e < 0 {
            return None;
        }
        jets[i] = e as u32;
        Some(Monomial::new(self.x, self.alpha, jets))
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let len = self.jets.len().max(other.jets.len());
        let jets = (0..len)
            .map(|i| self.jet_exp(i) + other.jet_exp(i))
            .collect();
        Monomial::new(self.x + other.x, self.alpha + other.alpha, jets)
    }

    fn lex_key(&self, len: usize) -> Vec<u32> {
        let mut key = Vec::with_capacity(len + 2);
        key.push(self.x);
        key.push(self.alpha);
        key.extend((0..len).map(|i| self.jet_exp(i)));
        key
    }
}

/// Graded lexicographic order on `(e_x, e_alpha, e_0, e_1, ...)`.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let len = self.jets.len().max(other.jets.len());
            self.lex_key(len).cmp(&other.lex_key(len))
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A multi-index `k = (k_0, ..., k_m)` together with its weighted norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiIndexNorm {
    k: Vec<u32>,
    norm: u32,
}

impl MultiIndexNorm {
    pub fn from_exponents(k: &[u32]) -> Self {
        let norm = k
            .iter()
            .enumerate()
            .map(|(p, &kp)| (p as u32 + 1) * kp)
            .sum();
        MultiIndexNorm { k: k.to_vec(), norm }
    }

    pub fn indices(&self) -> &[u32] {
        &self.k
    }

    pub fn norm(&self) -> u32 {
        self.norm
    }

    pub fn is_consistent(&self) -> bool {
        Self::from_exponents(&self.k).norm == self.norm
    }
}

/// Exact-rational differential polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct JetPolynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl JetPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::monomial(Monomial::one(), c)
    }

    pub fn integer(c: i64) -> Self {
        Self::constant(BigRational::from_integer(c.into()))
    }

    pub fn monomial(m: Monomial, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        JetPolynomial { terms }
    }

    /// The jet variable `u_i`.
    pub fn jet(i: usize) -> Self {
        Self::monomial(Monomial::jet(i), BigRational::one())
    }

    pub fn x() -> Self {
        Self::monomial(Monomial::new(1, 0, vec![]), BigRational::one())
    }

    pub fn alpha() -> Self {
        Self::monomial(Monomial::new(0, 1, vec![]), BigRational::one())
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, BigRational)>>(iter: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in iter {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending canonical order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn max_order(&self) -> Option<usize> {
        self.terms.keys().filter_map(Monomial::max_order).max()
    }

    pub fn has_x(&self) -> bool {
        self.terms.keys().any(|m| m.x > 0)
    }

    pub fn has_alpha(&self) -> bool {
        self.terms.keys().any(|m| m.alpha > 0)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        JetPolynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, v)| (m.clone(), v * c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut result = Self::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// `d/du_i`.
    pub fn partial_jet(&self, i: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.jet_exp(i);
            if e > 0 {
                let dm = m.with_jet_delta(i, -1).expect("positive exponent");
                out.add_term(dm, c * BigRational::from_integer(e.into()));
            }
        }
        out
    }

    /// Explicit `d/dx`.
    pub fn partial_x(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if m.x > 0 {
                let dm = Monomial::new(m.x - 1, m.alpha, m.jets.clone());
                out.add_term(dm, c * BigRational::from_integer(m.x.into()));
            }
        }
        out
    }

    /// Total derivative `D = d/dx + sum_i u_{i+1} d/du_i`.
    pub fn total_derivative(&self) -> Self {
        let mut out = self.partial_x();
        for (m, c) in &self.terms {
            for (i, &e) in m.jets.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let dm = m
                    .with_jet_delta(i, -1)
                    .and_then(|t| t.with_jet_delta(i + 1, 1))
                    .expect("positive exponent");
                out.add_term(dm, c * BigRational::from_integer(e.into()));
            }
        }
        out
    }

    pub fn total_derivative_n(&self, k: usize) -> Self {
        (0..k).fold(self.clone(), |p, _| p.total_derivative())
    }

    /// Euler operator `E(p) = sum_i (-D)^i dp/du_i`.
    ///
    /// Rejects explicit `x`: the exactness certificate is only used on
    /// autonomous differential polynomials.
    pub fn variational_derivative(&self) -> Result<Self> {
        if self.has_x() {
            return Err(Error::ExplicitVariable);
        }
        let mut out = Self::zero();
        let Some(order) = self.max_order() else {
            return Ok(out);
        };
        for i in 0..=order {
            let mut term = self.partial_jet(i);
            for _ in 0..i {
                term = -term.total_derivative();
            }
            out += term;
        }
        Ok(out)
    }

    /// True when `self` is a total derivative (`E(self) = 0`).
    pub fn is_exact(&self) -> Result<bool> {
        Ok(self.variational_derivative()?.is_zero())
    }

    fn antiderivative_in_jet(&self, i: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.jet_exp(i);
            let im = m.with_jet_delta(i, 1).expect("non-negative");
            out.add_term(im, c / BigRational::from_integer((e + 1).into()));
        }
        out
    }

    /// Returns `q` with `D(q) = self` and no jet-free terms.
    ///
    /// Integration by parts on the highest jet: an exact `p` of order `m` is
    /// linear in `u_m`, `p = A u_m + B`; the antiderivative of `A` in
    /// `u_{m-1}` removes `u_m` and the process repeats on the remainder.
    pub fn integrate_total_derivative(&self) -> Result<Self> {
        if self.has_x() {
            return Err(Error::ExplicitVariable);
        }
        let euler = self.variational_derivative()?;
        if !euler.is_zero() {
            return Err(Error::NotExact(format!("E(p) = {euler}")));
        }
        let mut rest = self.clone();
        let mut q = Self::zero();
        while !rest.is_zero() {
            let m = match rest.max_order() {
                Some(m) if m > 0 => m,
                _ => {
                    return Err(Error::NotExact(format!(
                        "remainder {rest} has no derivative to integrate"
                    )))
                }
            };
            let mut a = Self::zero();
            for (mono, c) in &rest.terms {
                match mono.jet_exp(m) {
                    0 => {}
                    1 => a.add_term(mono.with_jet_delta(m, -1).expect("e=1"), c.clone()),
                    _ => {
                        return Err(Error::NotExact(format!(
                            "nonlinear in highest jet u_{m}"
                        )))
                    }
                }
            }
            let f = a.antiderivative_in_jet(m - 1);
            rest -= f.total_derivative();
            q += f;
        }
        Ok(q)
    }

    /// Prolonged substitution `u_i -> D^i(image)`.
    pub fn substitute_jets(&self, image: &JetPolynomial) -> Self {
        let order = self.max_order().map_or(0, |m| m + 1);
        let mut images = Vec::with_capacity(order);
        let mut cur = image.clone();
        for _ in 0..order {
            let next = cur.total_derivative();
            images.push(cur);
            cur = next;
        }
        let mut powers: BTreeMap<(usize, u32), JetPolynomial> = BTreeMap::new();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut t = Self::monomial(Monomial::new(m.x, m.alpha, vec![]), c.clone());
            for (i, &e) in m.jets.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let p = powers
                    .entry((i, e))
                    .or_insert_with(|| images[i].pow(e))
                    .clone();
                t = &t * &p;
            }
            out += t;
        }
        out
    }

    /// Numerical evaluation with `jets[i]` standing for `u_i`.
    ///
    /// Missing jets are treated as zero.
    pub fn eval(&self, jets: &[Complex64], x: Complex64, alpha: Complex64) -> Complex64 {
        let mut sum = Complex64::zero();
        for (m, c) in &self.terms {
            let mut t = Complex64::new(rational_to_f64(c), 0.0);
            if m.x > 0 {
                t *= x.powu(m.x);
            }
            if m.alpha > 0 {
                t *= alpha.powu(m.alpha);
            }
            for (i, &e) in m.jets.iter().enumerate() {
                if e > 0 {
                    t *= jets.get(i).copied().unwrap_or_default().powu(e);
                }
            }
            sum += t;
        }
        sum
    }

    /// Keeps only the terms selected by `keep`.
    pub fn filter<F: Fn(&Monomial) -> bool>(&self, keep: F) -> Self {
        JetPolynomial {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Substitutes a rational value for `alpha`.
    pub fn with_alpha(&self, alpha: &BigRational) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| {
            let a = pow_rational(alpha, m.alpha);
            (Monomial::new(m.x, 0, m.jets.clone()), c * a)
        }))
    }

    pub fn to_json_terms(&self) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|(m, c)| TermJson {
                exponents: m.jets.clone(),
                x: m.x,
                alpha: m.alpha,
                num: c.numer().to_string(),
                den: c.denom().to_string(),
            })
            .collect()
    }

    pub fn from_json_terms(terms: &[TermJson]) -> Result<Self> {
        let mut p = Self::zero();
        for t in terms {
            let num: BigInt = t
                .num
                .parse()
                .map_err(|_| Error::Validation(format!("bad numerator {:?}", t.num)))?;
            let den: BigInt = t
                .den
                .parse()
                .map_err(|_| Error::Validation(format!("bad denominator {:?}", t.den)))?;
            if den.is_zero() {
                return Err(Error::Validation("zero denominator".into()));
            }
            p.add_term(
                Monomial::new(t.x, t.alpha, t.exponents.clone()),
                BigRational::new(num, den),
            );
        }
        Ok(p)
    }

    /// Canonical JSON text (terms in ascending canonical order).
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_terms()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let terms: Vec<TermJson> = serde_json::from_str(text)?;
        Self::from_json_terms(&terms)
    }
}

/// One serialized term of a [`JetPolynomial`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub exponents: Vec<u32>,
    pub x: u32,
    pub alpha: u32,
    pub num: String,
    pub den: String,
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // Fall back for huge numerators/denominators.
        let n = q.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = q.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

pub fn pow_rational(q: &BigRational, e: u32) -> BigRational {
    let mut r = BigRational::one();
    for _ in 0..e {
        r *= q;
    }
    r
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

impl fmt::Display for JetPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let mut factors = Vec::new();
            if m.x > 0 {
                factors.push(power_str("x", m.x));
            }
            if m.alpha > 0 {
                factors.push(power_str("alpha", m.alpha));
            }
            for (i, &e) in m.jets.iter().enumerate() {
                if e > 0 {
                    factors.push(power_str(&format!("u{i}"), e));
                }
            }
            if factors.is_empty() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{abs}*{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

fn power_str(base: &str, e: u32) -> String {
    if e == 1 {
        base.to_string()
    } else {
        format!("{base}^{e}")
    }
}

impl AddAssign<JetPolynomial> for JetPolynomial {
    fn add_assign(&mut self, rhs: JetPolynomial) {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
    }
}

impl AddAssign<&JetPolynomial> for JetPolynomial {
    fn add_assign(&mut self, rhs: &JetPolynomial) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl SubAssign<JetPolynomial> for JetPolynomial {
    fn sub_assign(&mut self, rhs: JetPolynomial) {
        for (m, c) in rhs.terms {
            self.add_term(m, -c);
        }
    }
}

impl SubAssign<&JetPolynomial> for JetPolynomial {
    fn sub_assign(&mut self, rhs: &JetPolynomial) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), -c.clone());
        }
    }
}

impl Add for JetPolynomial {
    type Output = JetPolynomial;
    fn add(mut self, rhs: JetPolynomial) -> JetPolynomial {
        self += rhs;
        self
    }
}

impl Add<&JetPolynomial> for &JetPolynomial {
    type Output = JetPolynomial;
    fn add(self, rhs: &JetPolynomial) -> JetPolynomial {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for JetPolynomial {
    type Output = JetPolynomial;
    fn sub(mut self, rhs: JetPolynomial) -> JetPolynomial {
        self -= rhs;
        self
    }
}

impl Sub<&JetPolynomial> for &JetPolynomial {
    type Output = JetPolynomial;
    fn sub(self, rhs: &JetPolynomial) -> JetPolynomial {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for JetPolynomial {
    type Output = JetPolynomial;
    fn neg(self) -> JetPolynomial {
        JetPolynomial {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl Mul<&JetPolynomial> for &JetPolynomial {
    type Output = JetPolynomial;
    fn mul(self, rhs: &JetPolynomial) -> JetPolynomial {
        let mut out = JetPolynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Mul for JetPolynomial {
    type Output = JetPolynomial;
    fn mul(self, rhs: JetPolynomial) -> JetPolynomial {
        &self * &rhs
    }
}
