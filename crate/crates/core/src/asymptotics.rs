//! Formal series solutions near infinity.
//!
//! Two families are built by substitution into the normal form:
//!
//! ```text
//! Infty:  V = A x^{1/(2n)} sum_k a_k z^{-k},   A^{2n} = (-1)^n / (2 c_n)
//! Zero:   V = (-alpha/x)   sum_k b_k z^{-k}
//! ```
//!
//! with `z = (2n/(2n+1)) x^{(2n+1)/(2n)}`. The construction works in the
//! grading variable `w = x^{-1/(2n)}`, where `d/dx` sends `w^e` to
//! `-(e/2n) w^{e+2n}`, so every ansatz term and every residual term is a
//! single power of `w`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::json;

use crate::diffpoly::{pow_rational, rational, rational_to_f64, JetPolynomial};
use crate::error::{Error, Result};
use crate::hierarchy::{build_p2n, HierarchyEquation};
use crate::ring::{AlgNum, RootRelation};
use crate::Kind;

/// Arithmetic needed by the order-by-order solver.
pub trait Coeff: Clone + fmt::Debug {
    /// A rational constant in the same ring as `self`.
    fn lift(&self, q: &BigRational) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn is_null(&self) -> bool;
    /// Exact quotient, `None` when it does not exist in the ring.
    fn div(&self, d: &Self) -> Option<Self>;
    /// Modulus used to scale cancellation tolerances; zero for exact zero.
    fn size(&self) -> f64;
    /// Zero up to rounding relative to `scale`; exact types ignore `scale`.
    fn negligible(&self, scale: f64) -> bool;
}

impl Coeff for AlgNum {
    fn lift(&self, q: &BigRational) -> Self {
        AlgNum::constant(q.clone(), self.relation().cloned())
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn minus(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn is_null(&self) -> bool {
        self.is_zero()
    }
    fn div(&self, d: &Self) -> Option<Self> {
        self.div_monomial(d)
    }
    fn size(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            1.0
        }
    }
    fn negligible(&self, _scale: f64) -> bool {
        self.is_zero()
    }
}

impl Coeff for Complex64 {
    fn lift(&self, q: &BigRational) -> Self {
        Complex64::new(rational_to_f64(q), 0.0)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn is_null(&self) -> bool {
        *self == Complex64::zero()
    }
    fn div(&self, d: &Self) -> Option<Self> {
        (d.norm() != 0.0).then(|| self / d)
    }
    fn size(&self) -> f64 {
        self.norm()
    }
    fn negligible(&self, scale: f64) -> bool {
        self.norm() <= 1e-11 * scale
    }
}

/// Finite Laurent polynomial in `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedSeries<T> {
    pub terms: BTreeMap<i64, T>,
}

impl<T: Coeff> GradedSeries<T> {
    pub fn new() -> Self {
        GradedSeries {
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(e: i64, c: T) -> Self {
        let mut s = Self::new();
        if !c.is_null() {
            s.terms.insert(e, c);
        }
        s
    }

    fn add_at(&mut self, e: i64, c: T) {
        if c.is_null() {
            return;
        }
        let v = match self.terms.remove(&e) {
            Some(old) => old.plus(&c),
            None => c,
        };
        if !v.is_null() {
            self.terms.insert(e, v);
        }
    }

    pub fn plus(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_at(*e, c.clone());
        }
        out
    }

    pub fn minus(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            let z = c.lift(&BigRational::zero());
            out.add_at(*e, z.minus(c));
        }
        out
    }

    /// Product, dropping exponents above `cap`.
    pub fn times(&self, o: &Self, cap: Option<i64>) -> Self {
        let mut out = Self::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e = e1 + e2;
                if cap.is_some_and(|m| e > m) {
                    break;
                }
                out.add_at(e, c1.times(c2));
            }
        }
        out
    }

    /// `d/dx` for the `w = x^{-1/(2n)}` grading.
    pub fn dx(&self, n: u32) -> Self {
        let two_n = 2 * n as i64;
        let mut out = Self::new();
        for (e, c) in &self.terms {
            let f = c.lift(&rational(-e, two_n));
            out.add_at(e + two_n, c.times(&f));
        }
        out
    }

    pub fn lowest(&self) -> Option<(i64, &T)> {
        self.terms.iter().next().map(|(e, c)| (*e, c))
    }

    pub fn lowest_exponent(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }
}

impl<T: Coeff> Default for GradedSeries<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl GradedSeries<Complex64> {
    /// Termwise sum at `w = x^{-1/(2n)}` on the branch of `x`.
    pub fn eval(&self, x: &XPoint, n: u32) -> Complex64 {
        let s = x.root(n);
        self.terms.iter().map(|(e, c)| c * s.powi(-*e as i32)).sum()
    }
}

/// Evaluates `poly` with `v_p -> jets[p]`, `x -> w^{-2n}`, keeping
/// exponents up to `cap`.
pub fn eval_graded<T: Coeff>(
    poly: &JetPolynomial,
    jets: &[GradedSeries<T>],
    alpha: &T,
    n: u32,
    cap: Option<i64>,
) -> GradedSeries<T> {
    let two_n = 2 * n as i64;
    let mut out = GradedSeries::new();
    for (m, c) in poly.terms() {
        let mut coef = alpha.lift(c);
        for _ in 0..m.alpha_exp() {
            coef = coef.times(alpha);
        }
        let mut factors: Vec<&GradedSeries<T>> = Vec::new();
        for (i, &e) in m.jet_exps().iter().enumerate() {
            for _ in 0..e {
                factors.push(&jets[i]);
            }
        }
        if factors.iter().any(|f| f.terms.is_empty()) {
            continue;
        }
        let base = -two_n * m.x_exp() as i64;
        // Lower bound contributed by the factors not yet multiplied in.
        let mut rest: i64 = factors.iter().map(|f| f.lowest_exponent().unwrap()).sum();
        let mut acc = GradedSeries::monomial(base, coef);
        for f in factors {
            rest -= f.lowest_exponent().unwrap();
            acc = acc.times(f, cap.map(|m| m - rest));
        }
        for (e, c) in acc.terms {
            if cap.is_none_or(|m| e <= m) {
                out.add_at(e, c);
            }
        }
    }
    out
}

/// How `alpha` enters a series.
#[derive(Clone, Debug, PartialEq)]
pub enum AlphaValue {
    Formal,
    Rational(BigRational),
    Complex(Complex64),
}

impl AlphaValue {
    pub fn numeric(&self) -> Option<Complex64> {
        match self {
            AlphaValue::Formal => None,
            AlphaValue::Rational(q) => Some(Complex64::new(rational_to_f64(q), 0.0)),
            AlphaValue::Complex(c) => Some(*c),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            AlphaValue::Formal => false,
            AlphaValue::Rational(q) => q.is_zero(),
            AlphaValue::Complex(c) => c.norm() == 0.0,
        }
    }
}

impl fmt::Display for AlphaValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaValue::Formal => write!(f, "alpha"),
            AlphaValue::Rational(q) => write!(f, "{q}"),
            AlphaValue::Complex(c) => write!(f, "{c}"),
        }
    }
}

impl std::str::FromStr for AlphaValue {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("formal") || t == "alpha" {
            return Ok(AlphaValue::Formal);
        }
        if let Ok(q) = t.parse::<BigRational>() {
            return Ok(AlphaValue::Rational(q));
        }
        if let Ok(v) = t.parse::<f64>() {
            return BigRational::from_float(v)
                .map(AlphaValue::Rational)
                .ok_or_else(|| Error::Validation(format!("alpha {t:?} is not finite")));
        }
        if let Some(c) = parse_complex_pair(t) {
            return Ok(AlphaValue::Complex(c));
        }
        t.parse::<Complex64>()
            .map(AlphaValue::Complex)
            .map_err(|_| Error::Validation(format!("cannot parse alpha {t:?}")))
    }
}

/// Parses `RE,IM`.
pub fn parse_complex_pair(s: &str) -> Option<Complex64> {
    let (re, im) = s.split_once(',')?;
    Some(Complex64::new(re.trim().parse().ok()?, im.trim().parse().ok()?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "float" => Ok(Mode::Float),
            _ => Err(Error::Validation(format!("unknown mode {s:?}"))),
        }
    }
}

/// Normalized coefficients `a_k` (or `b_k`), with `a_0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Coeffs {
    Exact(Vec<AlgNum>),
    Float(Vec<Complex64>),
}

/// A point `x` together with the argument used for fractional powers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XPoint {
    pub value: Complex64,
    pub arg: f64,
}

impl XPoint {
    /// Principal branch; points on the negative real axis are rejected.
    pub fn principal(x: Complex64) -> Result<Self> {
        if x.im == 0.0 && x.re < 0.0 {
            return Err(Error::Branch(format!("{x}")));
        }
        Ok(XPoint {
            value: x,
            arg: x.arg(),
        })
    }

    pub fn polar(r: f64, arg: f64) -> Self {
        XPoint {
            value: Complex64::from_polar(r, arg),
            arg,
        }
    }

    /// `x` with an explicit argument directive, checked for consistency.
    pub fn with_arg(x: Complex64, arg: Option<f64>) -> Result<Self> {
        match arg {
            None => Self::principal(x),
            Some(a) => {
                let p = Complex64::from_polar(x.norm(), a);
                if (p - x).norm() > 1e-9 * x.norm().max(1.0) {
                    return Err(Error::Validation(format!(
                        "argument {a} is inconsistent with x = {x}"
                    )));
                }
                Ok(XPoint { value: x, arg: a })
            }
        }
    }

    /// `x^{1/(2n)}` on this branch.
    pub fn root(&self, n: u32) -> Complex64 {
        let q = 1.0 / (2 * n) as f64;
        Complex64::from_polar(self.value.norm().powf(q), self.arg * q)
    }

    pub fn conj(&self) -> Self {
        XPoint {
            value: self.value.conj(),
            arg: -self.arg,
        }
    }
}

/// `r = (-1)^n / (2 c_n)`.
pub fn root_value(n: u32) -> BigRational {
    let c = crate::hierarchy::c_n(n);
    let r = BigRational::one() / (c * rational(2, 1));
    if n % 2 == 1 {
        -r
    } else {
        r
    }
}

pub fn root_relation(n: u32) -> RootRelation {
    RootRelation {
        degree: 2 * n,
        value: root_value(n),
    }
}

/// Numerical `A` for a branch: principal root of `r`, rotated by `e^{i pi b/n}`.
pub fn leading_root(n: u32, branch: u32) -> Complex64 {
    let r = rational_to_f64(&root_value(n));
    let q = 1.0 / (2 * n) as f64;
    let principal = if r > 0.0 {
        Complex64::new(r.powf(q), 0.0)
    } else {
        Complex64::from_polar((-r).powf(q), PI * q)
    };
    principal * Complex64::from_polar(1.0, PI * branch as f64 / n as f64)
}

/// Branch whose `A` is the complex conjugate of branch `b`.
pub fn conjugate_branch(n: u32, b: u32) -> u32 {
    let m = 2 * n;
    if n % 2 == 1 {
        (2 * m - 1 - b % m) % m
    } else {
        (m - b % m) % m
    }
}

/// `beta_n A^{2n}` in the exact ring; the dominant balance needs `-1`.
pub fn leading_balance(n: u32) -> AlgNum {
    let rel = Some(root_relation(n));
    let a = AlgNum::root(rel.clone());
    let mut p = AlgNum::one(rel);
    for _ in 0..2 * n {
        p = p.mul(&a);
    }
    p.scale(&crate::hierarchy::beta_closed_form(n))
}

/// Dominant balance for the decaying family against the two closed forms
/// in circulation, `-alpha/x` and `-2 alpha/((2n+1) x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroLeadingReport {
    pub n: u32,
    /// `V ~ balance * alpha / x`.
    pub balance: BigRational,
    pub general_formula: BigRational,
    pub n1_formula: BigRational,
    pub matches_general: bool,
    pub matches_n1: bool,
}

pub fn zero_leading_report(n: u32) -> ZeroLeadingReport {
    // xV + alpha is the only balance at order x^0 when V = O(1/x).
    let balance = rational(-1, 1);
    let general_formula = rational(-2, 2 * n as i64 + 1);
    let n1_formula = rational(-1, 1);
    ZeroLeadingReport {
        n,
        matches_general: balance == general_formula,
        matches_n1: balance == n1_formula,
        balance,
        general_formula,
        n1_formula,
    }
}

/// A truncated formal series with its cancellation certificate.
#[derive(Clone, Debug)]
pub struct FormalSeries {
    pub n: u32,
    pub kind: Kind,
    pub order: usize,
    pub coeffs: Coeffs,
    /// `A` for kind Infty. Exact mode keeps it symbolic.
    pub leading_root: Option<Complex64>,
    pub branch_id: u32,
    pub alpha: AlphaValue,
    /// Lowest `w` exponent in the residual of the truncation; `None` if
    /// the truncation solves the equation exactly.
    pub residual_exponent: Option<i64>,
    /// `w` exponent of the residual term that fixed the last coefficient.
    pub last_fixed_exponent: i64,
}

struct Solved<T> {
    /// Actual coefficients of `w^{E_k}`.
    v: Vec<T>,
    residual_low: Option<i64>,
}

fn ansatz_exponent(n: u32, kind: Kind, k: usize) -> i64 {
    let s = 2 * n as i64 + 1;
    match kind {
        Kind::Infty => -1 + s * k as i64,
        Kind::Zero => 2 * n as i64 + s * k as i64,
    }
}

fn series_of<T: Coeff>(n: u32, kind: Kind, v: &[T]) -> GradedSeries<T> {
    let mut s = GradedSeries::new();
    for (k, c) in v.iter().enumerate() {
        s.add_at(ansatz_exponent(n, kind, k), c.clone());
    }
    s
}

/// Graded residual `V_{2n} - rhs` of the series with coefficients `v`.
fn graded_residual_of<T: Coeff>(
    eq: &HierarchyEquation,
    kind: Kind,
    v: &[T],
    alpha: &T,
    cap: Option<i64>,
) -> GradedSeries<T> {
    let n = eq.n;
    let mut jets = vec![series_of(n, kind, v)];
    for p in 1..=2 * n as usize {
        let d = jets[p - 1].dx(n);
        jets.push(d);
    }
    eval_graded(&eq.residual_poly(), &jets, alpha, n, cap)
}

/// Typical size of the products formed in the residual.
fn tolerance_scale<T: Coeff>(v: &[T], alpha: &T, n: u32) -> f64 {
    let m = v.iter().map(Coeff::size).fold(alpha.size(), f64::max);
    (1.0 + m).powi(2 * n as i32 + 1)
}

fn solve<T: Coeff>(
    eq: &HierarchyEquation,
    kind: Kind,
    order: usize,
    leading: T,
    alpha: &T,
) -> Result<Solved<T>> {
    let n = eq.n;
    let two_n = 2 * n as i64;
    // R(V + d w^E) - R(V) = lambda d w^{E - 2n} at lowest order.
    let lambda = match kind {
        Kind::Infty => {
            let mut l2n = leading.lift(&BigRational::one());
            for _ in 0..2 * n {
                l2n = l2n.times(&leading);
            }
            let s = leading.lift(&(eq.beta_n.clone() * rational(two_n + 1, 1)));
            leading
                .lift(&BigRational::zero())
                .minus(&leading.lift(&BigRational::one()).plus(&s.times(&l2n)))
        }
        Kind::Zero => leading.lift(&rational(-1, 1)),
    };
    if lambda.is_null() {
        return Err(Error::Resonance { order: 1 });
    }
    let mut v = vec![leading];
    for k in 1..=order {
        let target = ansatz_exponent(n, kind, k) - two_n;
        let r = graded_residual_of(eq, kind, &v, alpha, Some(target));
        let scale = tolerance_scale(&v, alpha, n);
        if let Some((&e, _)) = r.terms.iter().find(|(_, c)| !c.negligible(scale)) {
            if e < target {
                return Err(Error::Structure(format!(
                    "residual term w^{e} survives below order {k}"
                )));
            }
        }
        let rk = r
            .terms
            .get(&target)
            .cloned()
            .unwrap_or_else(|| lambda.lift(&BigRational::zero()));
        let vk = lambda.lift(&BigRational::zero()).minus(&rk).div(&lambda)
            .ok_or(Error::Resonance { order: k })?;
        v.push(vk);
    }
    let full = graded_residual_of(eq, kind, &v, alpha, None);
    let scale = tolerance_scale(&v, alpha, n);
    let residual_low = full
        .terms
        .iter()
        .find(|(_, c)| !c.negligible(scale))
        .map(|(e, _)| *e);
    let last = ansatz_exponent(n, kind, order) - two_n;
    if let Some(e) = residual_low {
        if e <= last {
            return Err(Error::Structure(format!(
                "residual w^{e} not beyond last fixed order w^{last}"
            )));
        }
    }
    Ok(Solved { v, residual_low })
}

/// `c = 2n/(2n+1)`.
pub fn z_scale(n: u32) -> BigRational {
    rational(2 * n as i64, 2 * n as i64 + 1)
}

/// Builds the series of `kind` to order `order` by substitution.
pub fn series_coefficients(
    n: u32,
    kind: Kind,
    order: usize,
    mode: Mode,
    alpha: AlphaValue,
) -> Result<FormalSeries> {
    let eq = build_p2n(n)?;
    series_for(&eq, kind, order, mode, alpha, 0)
}

/// As [`series_coefficients`] for a prebuilt equation and branch.
pub fn series_for(
    eq: &HierarchyEquation,
    kind: Kind,
    order: usize,
    mode: Mode,
    alpha: AlphaValue,
    branch_id: u32,
) -> Result<FormalSeries> {
    let n = eq.n;
    if n == 0 {
        return Err(Error::Validation("n must be positive".into()));
    }
    let branch_id = branch_id % (2 * n);
    if kind == Kind::Zero && alpha.is_zero() {
        return Err(Error::ZeroAlpha);
    }
    let c = z_scale(n);
    match mode {
        Mode::Exact => {
            let rel = match kind {
                Kind::Infty => Some(root_relation(n)),
                Kind::Zero => None,
            };
            let al = match &alpha {
                AlphaValue::Formal => AlgNum::alpha(rel.clone()),
                AlphaValue::Rational(q) => AlgNum::constant(q.clone(), rel.clone()),
                AlphaValue::Complex(_) => {
                    return Err(Error::Validation(
                        "exact mode needs a rational or formal alpha".into(),
                    ))
                }
            };
            let leading = match kind {
                Kind::Infty => AlgNum::root(rel.clone()),
                Kind::Zero => al.neg(),
            };
            let solved = solve(eq, kind, order, leading.clone(), &al)?;
            let mut coeffs = Vec::with_capacity(order + 1);
            for (k, vk) in solved.v.iter().enumerate() {
                let a = vk
                    .scale(&pow_rational(&c, k as u32))
                    .div_monomial(&leading)
                    .ok_or_else(|| {
                        Error::Structure(format!("coefficient {k} is not divisible by the leading term"))
                    })?;
                coeffs.push(a);
            }
            Ok(FormalSeries {
                n,
                kind,
                order,
                coeffs: Coeffs::Exact(coeffs),
                leading_root: (kind == Kind::Infty).then(|| leading_root(n, branch_id)),
                branch_id,
                alpha,
                residual_exponent: solved.residual_low,
                last_fixed_exponent: ansatz_exponent(n, kind, order) - 2 * n as i64,
            })
        }
        Mode::Float => {
            let al = alpha.numeric().ok_or_else(|| {
                Error::Validation("float mode needs a numerical alpha".into())
            })?;
            let leading = match kind {
                Kind::Infty => leading_root(n, branch_id),
                Kind::Zero => -al,
            };
            let solved = solve(eq, kind, order, leading, &al)?;
            let cf = rational_to_f64(&c);
            let coeffs = solved
                .v
                .iter()
                .enumerate()
                .map(|(k, vk)| vk * cf.powi(k as i32) / leading)
                .collect();
            Ok(FormalSeries {
                n,
                kind,
                order,
                coeffs: Coeffs::Float(coeffs),
                leading_root: (kind == Kind::Infty).then_some(leading),
                branch_id,
                alpha,
                residual_exponent: solved.residual_low,
                last_fixed_exponent: ansatz_exponent(n, kind, order) - 2 * n as i64,
            })
        }
    }
}

/// How many terms to sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truncation {
    Fixed(usize),
    Optimal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesEvaluation {
    pub value: Complex64,
    pub k_star: usize,
    pub error_estimate: f64,
    pub x: Complex64,
}

impl FormalSeries {
    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `w` exponent of term `k`.
    pub fn exponent(&self, k: usize) -> i64 {
        ansatz_exponent(self.n, self.kind, k)
    }

    /// Leading coefficient `L` with `V ~ L w^{E_0}`.
    pub fn leading_value(&self) -> Result<Complex64> {
        match self.kind {
            Kind::Infty => Ok(self.leading_root.unwrap_or_else(|| leading_root(self.n, self.branch_id))),
            Kind::Zero => self
                .alpha
                .numeric()
                .map(|a| -a)
                .ok_or_else(|| Error::Validation("formal alpha has no numerical value".into())),
        }
    }

    /// Normalized coefficients as complex numbers on this branch.
    pub fn numeric_coeffs(&self) -> Result<Vec<Complex64>> {
        match &self.coeffs {
            Coeffs::Float(v) => Ok(v.clone()),
            Coeffs::Exact(v) => {
                let al = self.alpha.numeric().ok_or_else(|| {
                    Error::Validation("formal alpha has no numerical value".into())
                })?;
                let a = leading_root(self.n, self.branch_id);
                Ok(v.iter().map(|c| c.eval(al, a)).collect())
            }
        }
    }

    /// Coefficients of `w^{E_k}` in `V`, i.e. `L a_k c^{-k}`.
    pub fn graded_coeffs(&self) -> Result<Vec<Complex64>> {
        let l = self.leading_value()?;
        let c = rational_to_f64(&z_scale(self.n));
        Ok(self
            .numeric_coeffs()?
            .iter()
            .enumerate()
            .map(|(k, a)| l * a / c.powi(k as i32))
            .collect())
    }

    /// Replaces a formal `alpha` by a value.
    pub fn specialize(&self, alpha: &BigRational) -> FormalSeries {
        let mut out = self.clone();
        if let Coeffs::Exact(v) = &self.coeffs {
            if self.alpha == AlphaValue::Formal {
                out.coeffs = Coeffs::Exact(v.iter().map(|c| c.with_alpha(alpha)).collect());
                out.alpha = AlphaValue::Rational(alpha.clone());
            }
        }
        out
    }

    /// Same series on another branch of `A`.
    pub fn on_branch(&self, branch_id: u32) -> FormalSeries {
        let mut out = self.clone();
        out.branch_id = branch_id % (2 * self.n);
        if self.kind == Kind::Infty {
            if let Coeffs::Exact(_) = self.coeffs {
                out.leading_root = Some(leading_root(self.n, out.branch_id));
            }
        }
        out
    }

    /// Coefficients fixed to numbers, for repeated evaluation.
    pub fn numeric(&self) -> Result<NumericSeries> {
        Ok(NumericSeries {
            n: self.n,
            exponents: (0..=self.order).map(|k| self.exponent(k)).collect(),
            coeffs: self.graded_coeffs()?,
        })
    }

    /// Termwise sum with optimal or fixed truncation.
    pub fn evaluate(&self, x: &XPoint, trunc: Truncation) -> Result<SeriesEvaluation> {
        self.numeric()?.evaluate(x, trunc)
    }

    /// `V, V', ..., V^{(count-1)}` from the termwise derivatives.
    pub fn jets(&self, x: &XPoint, count: usize, trunc: Truncation) -> Result<(Vec<Complex64>, usize)> {
        self.numeric()?.jets(x, count, trunc)
    }

    /// Graded residual of this truncation with numerical coefficients.
    ///
    /// Exact series are expanded in the ring first, so cancelled orders are
    /// exactly absent; float series drop the orders the construction
    /// certified as cancelled.
    pub fn graded_residual(&self, eq: &HierarchyEquation) -> Result<GradedSeries<Complex64>> {
        let al = self
            .alpha
            .numeric()
            .ok_or_else(|| Error::Validation("formal alpha has no numerical value".into()))?;
        match &self.coeffs {
            Coeffs::Exact(a) => {
                let rel = a[0].relation().cloned();
                let al_exact = match &self.alpha {
                    AlphaValue::Rational(q) => AlgNum::constant(q.clone(), rel.clone()),
                    _ => AlgNum::alpha(rel.clone()),
                };
                let lead = match self.kind {
                    Kind::Infty => AlgNum::root(rel.clone()),
                    Kind::Zero => al_exact.neg(),
                };
                let cinv = BigRational::one() / z_scale(self.n);
                let v: Vec<AlgNum> = a
                    .iter()
                    .enumerate()
                    .map(|(k, ak)| ak.mul(&lead).scale(&pow_rational(&cinv, k as u32)))
                    .collect();
                let r = graded_residual_of(eq, self.kind, &v, &al_exact, None);
                let root = leading_root(self.n, self.branch_id);
                let mut out = GradedSeries::new();
                for (e, c) in r.terms {
                    out.add_at(e, c.eval(al, root));
                }
                Ok(out)
            }
            Coeffs::Float(_) => {
                let v = self.graded_coeffs()?;
                let mut r = graded_residual_of(eq, self.kind, &v, &al, None);
                if let Some(low) = self.residual_exponent {
                    r.terms.retain(|e, _| *e >= low);
                } else {
                    r.terms.clear();
                }
                Ok(r)
            }
        }
    }

    /// Predicted decay `|residual| ~ |x|^{slope}`.
    pub fn predicted_residual_slope(&self) -> Option<f64> {
        self.residual_exponent
            .map(|e| -(e as f64) / (2.0 * self.n as f64))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: Vec<serde_json::Value> = match &self.coeffs {
            Coeffs::Exact(v) => v.iter().map(|c| json!(c.to_string())).collect(),
            Coeffs::Float(v) => v.iter().map(|c| json!([c.re, c.im])).collect(),
        };
        json!({
            "n": self.n,
            "kind": self.kind,
            "K": self.order,
            "alpha": self.alpha.to_string(),
            "branch": self.branch_id,
            "coeffs": coeffs,
            "root_relation": format!("A^{} = {}", 2 * self.n, root_value(self.n)),
            "residual_exponent": self.residual_exponent,
        })
    }
}

/// A series with numerical coefficients of `w^{E_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericSeries {
    pub n: u32,
    pub exponents: Vec<i64>,
    pub coeffs: Vec<Complex64>,
}

impl NumericSeries {
    fn terms_at(&self, x: &XPoint) -> Vec<Complex64> {
        let s = x.root(self.n);
        self.coeffs
            .iter()
            .zip(&self.exponents)
            .map(|(v, e)| v * s.powi(-*e as i32))
            .collect()
    }

    /// Chooses the summation cut-off and error estimate.
    fn cut(&self, mags: &[f64], trunc: Truncation) -> Result<(usize, f64)> {
        let nonzero: Vec<usize> = (0..mags.len()).filter(|&k| mags[k] > 0.0).collect();
        match trunc {
            Truncation::Fixed(m) => {
                if m + 1 > self.coeffs.len() {
                    return Err(Error::Validation(format!(
                        "truncation {m} exceeds series order {}",
                        self.coeffs.len() - 1
                    )));
                }
                let next = nonzero.iter().find(|&&k| k > m).copied();
                Ok((m, next.map_or(mags[m], |k| mags[k])))
            }
            Truncation::Optimal => {
                if nonzero.len() <= 1 {
                    let k = nonzero.first().copied().unwrap_or(0);
                    return Ok((k, mags[k]));
                }
                let mut best = 0;
                for j in 1..nonzero.len() - 1 {
                    if mags[nonzero[j]] < mags[nonzero[best]] {
                        best = j;
                    }
                }
                Ok((nonzero[best], mags[nonzero[best + 1]]))
            }
        }
    }

    /// Termwise sum with optimal or fixed truncation.
    pub fn evaluate(&self, x: &XPoint, trunc: Truncation) -> Result<SeriesEvaluation> {
        let terms = self.terms_at(x);
        let mags: Vec<f64> = terms.iter().map(|t| t.norm()).collect();
        let (k_star, err) = self.cut(&mags, trunc)?;
        Ok(SeriesEvaluation {
            value: terms[..=k_star].iter().sum(),
            k_star,
            error_estimate: err,
            x: x.value,
        })
    }

    /// `V, V', ..., V^{(count-1)}` from the termwise derivatives.
    pub fn jets(&self, x: &XPoint, count: usize, trunc: Truncation) -> Result<(Vec<Complex64>, usize)> {
        let terms = self.terms_at(x);
        let mags: Vec<f64> = terms.iter().map(|t| t.norm()).collect();
        let (k_star, _) = self.cut(&mags, trunc)?;
        let two_n = 2.0 * self.n as f64;
        let mut out = vec![Complex64::zero(); count];
        for (k, t) in terms.iter().enumerate().take(k_star + 1) {
            let e = -(self.exponents[k] as f64) / two_n;
            let mut f = *t;
            for (p, slot) in out.iter_mut().enumerate() {
                *slot += f;
                f = f * (e - p as f64) / x.value;
            }
        }
        Ok((out, k_star))
    }
}

/// Value of `V_{2n} - rhs` for the `order`-truncation at `x`.
pub fn residual(
    eq: &HierarchyEquation,
    series: &FormalSeries,
    order: usize,
    x: &XPoint,
) -> Result<Complex64> {
    let (jets, _) = series.jets(x, 2 * eq.n as usize + 1, Truncation::Fixed(order))?;
    let al = series
        .alpha
        .numeric()
        .ok_or_else(|| Error::Validation("formal alpha has no numerical value".into()))?;
    Ok(eq.residual_poly().eval(&jets, x.value, al))
}

/// Largest relative difference between two coefficient lists.
pub fn max_relative_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm() / x.norm().max(y.norm()).max(1e-300))
        .fold(0.0, f64::max)
}

/// Highest `alpha` power and `alpha` parity of each exact coefficient.
pub fn alpha_structure(series: &FormalSeries) -> Vec<(u32, Option<u32>)> {
    match &series.coeffs {
        Coeffs::Exact(v) => v
            .iter()
            .map(|c| (c.max_alpha_power(), c.alpha_parity()))
            .collect(),
        Coeffs::Float(_) => Vec::new(),
    }
}
