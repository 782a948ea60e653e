//! Exact finite sums `Σ c_j · e^{2πi θ_j}` with rational coefficients and
//! rational phases.
//!
//! Every character integral of the systems in this crate lands in this set,
//! so equality can be decided exactly rather than up to a tolerance. Deciding
//! whether such a sum vanishes reduces, one prime of the common denominator
//! at a time, to the same question for smaller cyclotomic fields.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Zero};

use super::number::{frac, fmt_rat, to_f64, Rational};

#[derive(Clone, Debug, Default)]
pub struct PhaseSum {
    // phase in [0, 1) -> nonzero coefficient
    terms: BTreeMap<Rational, Rational>,
}

impl PhaseSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(c, Rational::zero())
    }

    /// `c · e^{2πi θ}`.
    pub fn monomial(c: Rational, phase: Rational) -> Self {
        let mut s = Self::zero();
        s.add_term(c, phase);
        s
    }

    /// `e^{2πi θ}`.
    pub fn root(phase: Rational) -> Self {
        Self::monomial(Rational::one(), phase)
    }

    pub fn add_term(&mut self, c: Rational, phase: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(frac(&phase)) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Rational, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// True when no terms remain after merging equal phases. A sum can vanish
    /// without being structurally empty, see [`PhaseSum::is_zero`].
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(p, v)| (p.clone(), v * c)).collect(),
        }
    }

    /// Multiplies by `e^{2πi θ}`.
    pub fn rotate(&self, phase: &Rational) -> Self {
        let mut out = Self::zero();
        for (p, c) in &self.terms {
            out.add_term(c.clone(), p + phase);
        }
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = Self::zero();
        for (p, c) in &self.terms {
            out.add_term(c.clone(), -p);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (p, c) in &other.terms {
            self.add_term(c.clone(), p.clone());
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(-c, p.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (p, c) in &self.terms {
            for (q, d) in &other.terms {
                out.add_term(c * d, p + q);
            }
        }
        out
    }

    /// `|z|²` as an exact sum.
    pub fn norm_sqr(&self) -> Self {
        self.mul(&self.conj())
    }

    /// Single-term sums: `(coefficient, phase)`.
    pub fn as_monomial(&self) -> Option<(&Rational, &Rational)> {
        if self.terms.len() == 1 {
            self.terms.iter().next().map(|(p, c)| (c, p))
        } else {
            None
        }
    }

    /// `|z|²` as a rational, available when at most one term survives.
    pub fn abs_sqr_rational(&self) -> Option<Rational> {
        if self.terms.is_empty() {
            return Some(Rational::zero());
        }
        self.as_monomial().map(|(c, _)| c * c)
    }

    /// The value as a rational number when it is real and rational by
    /// structure (only phases 0 and 1/2).
    pub fn as_rational(&self) -> Option<Rational> {
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let mut acc = Rational::zero();
        for (p, c) in &self.terms {
            if p.is_zero() {
                acc += c;
            } else if *p == half {
                acc -= c;
            } else {
                return None;
            }
        }
        Some(acc)
    }

    pub fn to_complex(&self) -> Complex64 {
        self.terms
            .iter()
            .map(|(p, c)| {
                let angle = std::f64::consts::TAU * to_f64(p);
                Complex64::from_polar(to_f64(c), angle)
            })
            .sum()
    }

    /// Exact test for `Σ c_j e^{2πi θ_j} = 0`.
    pub fn is_zero(&self) -> bool {
        if self.terms.is_empty() {
            return true;
        }
        let n = self
            .terms
            .keys()
            .fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
        let n = n.to_biguint().expect("denominators are positive");
        let terms: Vec<(BigUint, Rational)> = self
            .terms
            .iter()
            .map(|(p, c)| {
                let a = (p.numer() * (BigInt::from(n.clone()) / p.denom()))
                    .to_biguint()
                    .expect("phases are in [0, 1)");
                (a, c.clone())
            })
            .collect();
        let primes: Vec<BigUint> = if n.is_one() {
            Vec::new()
        } else {
            num_prime::nt_funcs::factorize(n.clone()).into_keys().collect()
        };
        vanishes(&n, &primes, terms)
    }

    pub fn exact_eq(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }
}

impl fmt::Display for PhaseSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(p, c)| {
                if p.is_zero() {
                    fmt_rat(c)
                } else {
                    format!("{}·e(2πi·{})", fmt_rat(c), fmt_rat(p))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Does `Σ c · ζ_n^a` vanish in `Q(ζ_n)`? `primes` lists the distinct prime
/// divisors of the original modulus; only those dividing `n` are used.
fn vanishes(n: &BigUint, primes: &[BigUint], terms: Vec<(BigUint, Rational)>) -> bool {
    let mut merged: BTreeMap<BigUint, Rational> = BTreeMap::new();
    for (a, c) in terms {
        *merged.entry(a % n).or_insert_with(Rational::zero) += c;
    }
    merged.retain(|_, c| !c.is_zero());
    if merged.is_empty() {
        return true;
    }
    if n.is_one() {
        return false;
    }
    let p = primes
        .iter()
        .find(|p| (n % *p).is_zero())
        .expect("some listed prime divides n")
        .clone();
    let m = n / &p;

    if (&m % &p).is_zero() {
        // Q(ζ_n) has basis {ζ_n^r : 0 <= r < p} over Q(ζ_m), with ζ_n^p = ζ_m.
        let mut groups: BTreeMap<BigUint, Vec<(BigUint, Rational)>> = BTreeMap::new();
        for (a, c) in merged {
            let (q, r) = a.div_rem(&p);
            groups.entry(r).or_default().push((q, c));
        }
        return groups.into_values().all(|g| vanishes(&m, primes, g));
    }

    // p exactly divides n: ζ_n^a = ζ_p^(a·u) · ζ_m^(a·v) with u·m + v·p ≡ 1 (mod n),
    // and the only relation among 1, ζ_p, …, ζ_p^(p-1) over Q(ζ_m) is their sum.
    let u = m.modpow(&(&p - 2u32), &p);
    let v = mod_inverse(&p, &m);
    let mut groups: BTreeMap<BigUint, Vec<(BigUint, Rational)>> = BTreeMap::new();
    for (a, c) in merged {
        let r = (&a * &u) % &p;
        let b = (&a * &v) % &m;
        groups.entry(r).or_default().push((b, c));
    }
    let group_count = BigUint::from(groups.len());
    if group_count < p {
        return groups.into_values().all(|g| vanishes(&m, primes, g));
    }
    let mut it = groups.into_values();
    let reference = it.next().expect("p >= 2 groups");
    it.all(|g| {
        let mut diff = g;
        diff.extend(reference.iter().map(|(b, c)| (b.clone(), -c.clone())));
        vanishes(&m, primes, diff)
    })
}

/// Inverse of `a` modulo `m` for coprime `a`, `m` (returns 0 when m = 1).
fn mod_inverse(a: &BigUint, m: &BigUint) -> BigUint {
    if m.is_one() {
        return BigUint::zero();
    }
    let a = BigInt::from_biguint(Sign::Plus, a.clone());
    let mi = BigInt::from_biguint(Sign::Plus, m.clone());
    let e = a.extended_gcd(&mi);
    debug_assert!(e.gcd.is_one());
    let x = e.x.mod_floor(&mi);
    x.to_biguint().expect("mod_floor is non-negative")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::number::rat;

    fn root(p: i64, q: i64) -> PhaseSum {
        PhaseSum::root(rat(p, q))
    }

    #[test]
    fn merges_equal_phases() {
        let s = root(1, 3).add(&root(4, 3));
        assert_eq!(s.len(), 1);
        assert_eq!(s.as_monomial().unwrap().0, &rat(2, 1));
    }

    #[test]
    fn half_plus_half_at_antipodes_vanishes() {
        let s = PhaseSum::monomial(rat(1, 2), rat(0, 1)).add(&PhaseSum::monomial(rat(1, 2), rat(1, 2)));
        assert!(s.is_zero());
        assert!(!s.is_empty());
    }

    #[test]
    fn full_sets_of_roots_vanish() {
        for n in [2i64, 3, 4, 5, 6, 8, 9, 12, 15, 30, 49] {
            let mut s = PhaseSum::zero();
            for a in 0..n {
                s.add_assign(&root(a, n));
            }
            assert!(s.is_zero(), "sum of all {n}-th roots");
            // dropping one root leaves a nonzero sum
            let t = s.sub(&root(0, n));
            assert!(!t.is_zero(), "n = {n}");
        }
    }

    #[test]
    fn primitive_relations_in_composite_fields() {
        // cross-check against floating point on small hand-picked sums
        let cases: Vec<Vec<(i64, i64, i64)>> = vec![
            vec![(1, 1, 6), (-1, 1, 3), (-1, 0, 1)],
            vec![(1, 1, 10), (-1, 3, 10), (1, 2, 5), (-1, 1, 5)],
            vec![(1, 1, 15), (1, 4, 15), (1, 7, 15), (1, 13, 15)],
            vec![(2, 1, 4), (2, 3, 4)],
            vec![(1, 1, 12), (1, 5, 12), (1, 9, 12)],
        ];
        for case in cases {
            let mut s = PhaseSum::zero();
            for (c, p, q) in &case {
                s.add_term(rat(*c, 1), rat(*p, *q));
            }
            let numeric = s.to_complex().norm() < 1e-12;
            assert_eq!(s.is_zero(), numeric, "case {case:?}");
        }
    }

    #[test]
    fn decimal_denominators_are_handled() {
        let a = rat(70710678118, 100000000000);
        let s = PhaseSum::root(a.clone()).sub(&PhaseSum::root(a.clone() + rat(1, 1)));
        assert!(s.is_zero());
        let t = PhaseSum::root(a.clone()).add(&PhaseSum::root(a + rat(1, 2)));
        assert!(t.is_zero());
    }

    #[test]
    fn conj_and_norm() {
        let z = root(1, 5).scale(&rat(3, 1));
        assert_eq!(z.norm_sqr().as_rational().unwrap(), rat(9, 1));
        assert!(z.conj().exact_eq(&root(4, 5).scale(&rat(3, 1))));
    }
}
