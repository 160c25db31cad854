use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::Var;
use crate::{Error, Result};

/// A full or partial 0/1 assignment.
pub type Assignment = BTreeMap<Var, bool>;

fn add_coeff(a: i64, b: i64) -> i64 {
    a.checked_add(b).expect("coefficient overflow")
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

fn mul_coeff(a: i64, b: i64) -> i64 {
    a.checked_mul(b).expect("coefficient overflow")
}

/// A product of distinct binary variables. The empty product is the
/// constant monomial 1.
///
/// Monomials are ordered by degree first, then lexicographically on the
/// variable order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<Var>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn new(vars: impl IntoIterator<Item = Var>) -> Self {
        let mut vars: Vec<Var> = vars.into_iter().collect();
        vars.sort_unstable();
        vars.dedup();
        Monomial(vars)
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![v])
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: Var) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// True if every variable of `other` occurs in `self`.
    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().all(|v| other.contains(*v))
    }

    /// Idempotent product: `x * x = x`.
    pub fn product(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    pub fn without(&self, v: Var) -> Monomial {
        Monomial(self.0.iter().copied().filter(|&w| w != v).collect())
    }

    /// Value under `lookup`, or the first variable it cannot resolve.
    pub fn evaluate_with(&self, mut lookup: impl FnMut(Var) -> Option<bool>) -> std::result::Result<bool, Var> {
        let mut all = true;
        for &v in &self.0 {
            match lookup(v) {
                Some(b) => all &= b,
                None => return Err(v),
            }
        }
        Ok(all)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Multilinear polynomial with exact integer coefficients over binary
/// variables. Zero coefficients are never stored, so structural equality
/// coincides with functional equality on `{0,1}^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, i64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: i64) -> Self {
        let mut p = Poly::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(v: Var) -> Self {
        Poly::monomial(Monomial::var(v), 1)
    }

    pub fn monomial(m: Monomial, c: i64) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, i64)>) -> Self {
        let mut p = Poly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Adds `c * m` in place, dropping the term if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: i64) {
        if c == 0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = add_coeff(*e.get(), c);
                if s == 0 {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, i64)> + ExactSizeIterator {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> i64 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    pub fn constant_term(&self) -> i64 {
        self.coeff(&Monomial::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.vars().iter().copied()).collect()
    }

    pub fn mentions(&self, v: Var) -> bool {
        self.terms.keys().any(|m| m.contains(v))
    }

    /// Smallest value over all 0/1 assignments that the coefficient signs
    /// alone allow: the constant plus every negative coefficient.
    pub fn lower_bound(&self) -> i64 {
        self.terms
            .iter()
            .filter(|(m, &c)| m.is_one() || c < 0)
            .fold(0, |acc, (_, &c)| add_coeff(acc, c))
    }

    /// Largest value the coefficient signs allow: the constant plus every
    /// positive coefficient.
    pub fn upper_bound(&self) -> i64 {
        self.terms
            .iter()
            .filter(|(m, &c)| m.is_one() || c > 0)
            .fold(0, |acc, (_, &c)| add_coeff(acc, c))
    }

    pub fn scale(&self, k: i64) -> Poly {
        if k == 0 {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, &c)| (m.clone(), mul_coeff(c, k))).collect(),
        }
    }

    /// Divides every coefficient by `k`, which must divide all of them.
    pub fn exact_div(&self, k: i64) -> Poly {
        assert!(k != 0);
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| {
                    assert_eq!(c % k, 0, "inexact division");
                    (m.clone(), c / k)
                })
                .collect(),
        }
    }

    pub fn square(&self) -> Poly {
        self * self
    }

    /// Replaces every occurrence of `v` by `r` and renormalizes.
    pub fn substitute(&self, v: Var, r: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, &c) in &self.terms {
            if m.contains(v) {
                let rest = m.without(v);
                for (rm, rc) in r.terms() {
                    out.add_term(rest.product(rm), mul_coeff(c, rc));
                }
            } else {
                out.add_term(m.clone(), c);
            }
        }
        out
    }

    /// Substitutes a constant for `v`.
    pub fn fix(&self, v: Var, value: bool) -> Poly {
        let mut out = Poly::zero();
        for (m, &c) in &self.terms {
            if m.contains(v) {
                if value {
                    out.add_term(m.without(v), c);
                }
            } else {
                out.add_term(m.clone(), c);
            }
        }
        out
    }

    /// Substitutes every variable of `a` that occurs here.
    pub fn fix_all(&self, a: &Assignment) -> Poly {
        let mut out = Poly::zero();
        'terms: for (m, &c) in &self.terms {
            let mut rest = Vec::with_capacity(m.degree());
            for &v in m.vars() {
                match a.get(&v) {
                    Some(true) => {}
                    Some(false) => continue 'terms,
                    None => rest.push(v),
                }
            }
            out.add_term(Monomial(rest), c);
        }
        out
    }

    /// Drops every term whose monomial is divisible by `m`.
    pub fn drop_multiples_of(&self, m: &Monomial) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(t, _)| !m.divides(t))
                .map(|(t, &c)| (t.clone(), c))
                .collect(),
        }
    }

    pub fn evaluate_with(&self, mut lookup: impl FnMut(Var) -> Option<bool>) -> Result<i64> {
        let mut acc = 0i64;
        for (m, &c) in &self.terms {
            if m.evaluate_with(&mut lookup).map_err(Error::MissingVar)? {
                acc = add_coeff(acc, c);
            }
        }
        Ok(acc)
    }

    /// Divides out the gcd of all coefficients and fixes the sign so the
    /// leading non-constant term is positive. Two residuals that constrain
    /// the same thing to zero normalize to the same polynomial when they
    /// are integer multiples of each other.
    pub fn normalized(&self) -> Poly {
        let g = self.terms.values().fold(0i64, |g, &c| gcd(g, c));
        if g == 0 {
            return Poly::zero();
        }
        let lead = self.terms.iter().find(|(m, _)| !m.is_one()).map_or(self.constant_term(), |(_, &c)| c);
        self.exact_div(if lead < 0 { -g } else { g })
    }

    /// Exact value at `a`, which must cover every variable of `self`.
    pub fn evaluate(&self, a: &Assignment) -> Result<i64> {
        self.evaluate_with(|v| a.get(&v).copied())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        let constant = self.constant_term();
        let ordered = self
            .terms
            .iter()
            .filter(|(m, _)| !m.is_one())
            .map(|(m, &c)| (Some(m), c))
            .chain((constant != 0).then_some((None, constant)));
        for (m, c) in ordered {
            let mag = c.unsigned_abs();
            if first {
                if c < 0 {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if c < 0 { " - " } else { " + " })?;
            }
            first = false;
            match m {
                None => write!(f, "{mag}")?,
                Some(m) if mag == 1 => write!(f, "{m}")?,
                Some(m) => write!(f, "{mag} {m}")?,
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Poly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Poly> {
        super::parse_poly(s)
    }
}

impl Add for &Poly {
    type Output = Poly;

    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;

    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), c.checked_neg().expect("coefficient overflow"));
        }
        out
    }
}

impl Mul for &Poly {
    type Output = Poly;

    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &rhs.terms {
                out.add_term(a.product(b), mul_coeff(ca, cb));
            }
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;

    fn neg(self) -> Poly {
        self.scale(-1)
    }
}

macro_rules! forward_owned {
    ($($tr:ident $f:ident),*) => {$(
        impl $tr for Poly {
            type Output = Poly;
            fn $f(self, rhs: Poly) -> Poly { (&self).$f(&rhs) }
        }
        impl $tr<&Poly> for Poly {
            type Output = Poly;
            fn $f(self, rhs: &Poly) -> Poly { (&self).$f(rhs) }
        }
    )*};
}

forward_owned!(Add add, Sub sub, Mul mul);

impl Neg for Poly {
    type Output = Poly;

    fn neg(self) -> Poly {
        (&self).neg()
    }
}

impl std::iter::Sum for Poly {
    fn sum<I: Iterator<Item = Poly>>(iter: I) -> Poly {
        iter.fold(Poly::zero(), |acc, p| acc + p)
    }
}

impl serde::Serialize for Monomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl serde::Serialize for Poly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
