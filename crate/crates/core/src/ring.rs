//! Coefficient ring `Q[alpha][A] / (A^{2n} - r)` for the formal series.
//!
//! Elements are polynomials in the formal parameter `alpha` and in a root
//! `A` of `A^{2n} = r`; products are reduced with that relation. With no
//! relation attached the ring is plain `Q[alpha, A]`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::diffpoly::{pow_rational, rational_to_f64};

/// Relation `A^degree = value`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootRelation {
    pub degree: u32,
    pub value: BigRational,
}

/// An element of `Q[alpha][A]/(A^d - r)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgNum {
    /// `(alpha power, A power) -> coefficient`.
    terms: BTreeMap<(u32, u32), BigRational>,
    relation: Option<RootRelation>,
}

impl AlgNum {
    pub fn zero(relation: Option<RootRelation>) -> Self {
        AlgNum {
            terms: BTreeMap::new(),
            relation,
        }
    }

    pub fn constant(c: BigRational, relation: Option<RootRelation>) -> Self {
        let mut x = Self::zero(relation);
        x.add_term(0, 0, c);
        x
    }

    pub fn one(relation: Option<RootRelation>) -> Self {
        Self::constant(BigRational::one(), relation)
    }

    /// The generator `A`.
    pub fn root(relation: Option<RootRelation>) -> Self {
        let mut x = Self::zero(relation);
        x.add_term(0, 1, BigRational::one());
        x
    }

    /// The formal parameter `alpha`.
    pub fn alpha(relation: Option<RootRelation>) -> Self {
        let mut x = Self::zero(relation);
        x.add_term(1, 0, BigRational::one());
        x
    }

    pub fn relation(&self) -> Option<&RootRelation> {
        self.relation.as_ref()
    }

    fn add_term(&mut self, alpha_pow: u32, a_pow: u32, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let (a_pow, c) = match &self.relation {
            Some(rel) if a_pow >= rel.degree => {
                let q = a_pow / rel.degree;
                (a_pow % rel.degree, c * pow_rational(&rel.value, q))
            }
            _ => (a_pow, c),
        };
        let key = (alpha_pow, a_pow);
        let entry = self.terms.entry(key).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &BigRational)> {
        self.terms.iter()
    }

    pub fn add(&self, other: &AlgNum) -> AlgNum {
        let mut out = self.clone();
        for (&(i, j), c) in &other.terms {
            out.add_term(i, j, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &AlgNum) -> AlgNum {
        let mut out = self.clone();
        for (&(i, j), c) in &other.terms {
            out.add_term(i, j, -c.clone());
        }
        out
    }

    pub fn neg(&self) -> AlgNum {
        AlgNum {
            terms: self.terms.iter().map(|(k, c)| (*k, -c.clone())).collect(),
            relation: self.relation.clone(),
        }
    }

    pub fn mul(&self, other: &AlgNum) -> AlgNum {
        let mut out = AlgNum::zero(self.relation.clone().or_else(|| other.relation.clone()));
        for (&(i1, j1), c1) in &self.terms {
            for (&(i2, j2), c2) in &other.terms {
                out.add_term(i1 + i2, j1 + j2, c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, q: &BigRational) -> AlgNum {
        let mut out = AlgNum::zero(self.relation.clone());
        for (&(i, j), c) in &self.terms {
            out.add_term(i, j, c * q);
        }
        out
    }

    /// Exact division by a single-term divisor `d = c alpha^i A^j`.
    ///
    /// `A^{-1} = A^{d-1} / r` uses the relation; returns `None` when the
    /// quotient is not a polynomial in `alpha` or `A` cannot be inverted.
    pub fn div_monomial(&self, d: &AlgNum) -> Option<AlgNum> {
        if d.terms.len() != 1 {
            return None;
        }
        let (&(di, dj), dc) = d.terms.iter().next()?;
        let mut inv_a = AlgNum::one(self.relation.clone().or_else(|| d.relation.clone()));
        if dj > 0 {
            let rel = inv_a.relation.clone()?;
            if rel.value.is_zero() {
                return None;
            }
            // A^{-dj} = A^{k*deg - dj} / r^k
            let k = dj.div_ceil(rel.degree);
            let mut t = AlgNum::zero(Some(rel.clone()));
            t.terms.insert(
                (0, k * rel.degree - dj),
                BigRational::one() / pow_rational(&rel.value, k),
            );
            // k*deg - dj < deg, so no reduction is needed
            inv_a = t;
        }
        let mut out = AlgNum::zero(inv_a.relation.clone());
        for (&(i, j), c) in &self.terms {
            if i < di {
                return None;
            }
            out.add_term(i - di, j, c / dc);
        }
        Some(out.mul(&inv_a))
    }

    /// Substitutes a rational value for `alpha`.
    pub fn with_alpha(&self, alpha: &BigRational) -> AlgNum {
        let mut out = AlgNum::zero(self.relation.clone());
        for (&(i, j), c) in &self.terms {
            out.add_term(0, j, c * pow_rational(alpha, i));
        }
        out
    }

    pub fn eval(&self, alpha: Complex64, root: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| rational_to_f64(c) * alpha.powu(i) * root.powu(j))
            .sum()
    }

    pub fn max_alpha_power(&self) -> u32 {
        self.terms.keys().map(|k| k.0).max().unwrap_or(0)
    }

    /// True when every power of `alpha` present has the given parity.
    pub fn alpha_parity(&self) -> Option<u32> {
        let mut parity = None;
        for &(i, _) in self.terms.keys() {
            match parity {
                None => parity = Some(i % 2),
                Some(p) if p != i % 2 => return None,
                _ => {}
            }
        }
        parity
    }
}

impl fmt::Display for AlgNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (&(i, j), c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let mut parts = vec![c.abs().to_string()];
            match i {
                0 => {}
                1 => parts.push("alpha".into()),
                _ => parts.push(format!("alpha^{i}")),
            }
            match j {
                0 => {}
                1 => parts.push("A".into()),
                _ => parts.push(format!("A^{j}")),
            }
            if parts.len() > 1 && parts[0] == "1" {
                parts.remove(0);
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffpoly::rational;

    fn rel(d: u32, n: i64, den: i64) -> Option<RootRelation> {
        Some(RootRelation {
            degree: d,
            value: rational(n, den),
        })
    }

    #[test]
    fn reduction_applies() {
        let r = rel(2, -1, 2);
        let a = AlgNum::root(r.clone());
        let a2 = a.mul(&a);
        assert_eq!(a2, AlgNum::constant(rational(-1, 2), r.clone()));
        let a3 = a2.mul(&a);
        assert_eq!(a3, AlgNum::root(r).scale(&rational(-1, 2)));
    }

    #[test]
    fn inverse_of_root() {
        let r = rel(4, 1, 6);
        let a = AlgNum::root(r.clone());
        let one = AlgNum::one(r.clone());
        let inv = one.div_monomial(&a).unwrap();
        assert_eq!(inv.mul(&a), one);
        let inv3 = one.div_monomial(&a.mul(&a).mul(&a)).unwrap();
        assert_eq!(inv3.mul(&a.mul(&a).mul(&a)), AlgNum::one(r));
    }

    #[test]
    fn alpha_division() {
        let al = AlgNum::alpha(None);
        let p = al.mul(&al).scale(&rational(3, 1)).add(&al);
        let q = p.div_monomial(&al.neg()).unwrap();
        assert_eq!(q, al.scale(&rational(-3, 1)).add(&AlgNum::constant(rational(-1, 1), None)));
        assert!(AlgNum::one(None).div_monomial(&al).is_none());
    }

    #[test]
    fn numeric_evaluation() {
        let r = rel(2, -1, 2);
        let x = AlgNum::root(r.clone()).add(&AlgNum::alpha(r));
        let v = x.eval(Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.5f64.sqrt()));
        assert!((v - Complex64::new(2.0, 0.5f64.sqrt())).norm() < 1e-15);
    }
}
