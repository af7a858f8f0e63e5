//! Finite fields F_q with q = p^r, capped at q ≤ 2^20.
//!
//! Elements are stored as a single rank in 0..q encoding the coefficient
//! tuple (a_0, ..., a_{r-1}) over F_p, constant term first, with a_0 the most
//! significant digit.  Rank order therefore coincides with lexicographic
//! order on coefficient tuples, which fixes every enumeration in the crate.
//!
//! For r > 1 the field is F_p[x] modulo the lexicographically smallest monic
//! irreducible of degree r, found by exhaustive search with the polynomial
//! irreducibility test of [`crate::polyring`] applied at the prime level.

use std::fmt;
use std::sync::Arc;

use crate::error::{precondition, Error, Result};

/// Largest permitted field size q = p^r.
pub const FIELD_SIZE_CAP: u64 = 1 << 20;

/// An element of a [`FiniteField`], as a rank in 0..q.  Ranks only make sense
/// relative to the field that produced them; all arithmetic goes through the
/// field object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(pub(crate) u64);

impl FieldElement {
    /// Rank of this element in the field's lexicographic element order.
    pub fn rank(self) -> u64 {
        self.0
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct FieldRepr {
    p: u64,
    r: u32,
    q: u64,
    /// Extension modulus coefficients over F_p, constant first, length r + 1,
    /// monic.  Empty when r == 1.
    modulus: Vec<u64>,
}

/// A finite field F_q, cheap to clone and compare.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteField(Arc<FieldRepr>);

impl fmt::Debug for FiniteField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q())?;
        if self.r() > 1 {
            write!(f, " (p={}, r={})", self.p(), self.r())?;
        }
        Ok(())
    }
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

fn checked_pow(p: u64, r: u32) -> Option<u64> {
    let mut acc = 1u64;
    for _ in 0..r {
        acc = acc.checked_mul(p)?;
        if acc > FIELD_SIZE_CAP {
            return None;
        }
    }
    Some(acc)
}

/// Construct F_{p^r}.  Errors: "not prime" if p is composite, "field too
/// large" if p^r exceeds the cap.
pub fn construct_field(p: u64, r: u32) -> Result<FiniteField> {
    if !is_prime_u64(p) {
        return Err(Error::NotPrime(p));
    }
    if r == 0 {
        return Err(precondition("extension degree r must be at least 1"));
    }
    let q = checked_pow(p, r).ok_or(Error::FieldTooLarge { p, r })?;
    if r == 1 {
        return Ok(FiniteField(Arc::new(FieldRepr {
            p,
            r,
            q,
            modulus: Vec::new(),
        })));
    }
    let base = FiniteField(Arc::new(FieldRepr {
        p,
        r: 1,
        q: p,
        modulus: Vec::new(),
    }));
    // Scan monic degree-r candidates in lexicographic coefficient order and
    // keep the first irreducible one.
    let mut modulus = None;
    'search: for rank in 0..q {
        let digits = decode_digits(rank, p, r);
        let mut coeffs: Vec<FieldElement> =
            digits.iter().map(|&d| FieldElement(d)).collect();
        coeffs.push(FieldElement(1));
        let cand = crate::polyring::Poly::from_coeffs(&base, coeffs);
        if crate::polyring::is_irreducible(&cand)? {
            modulus = Some(digits);
            break 'search;
        }
    }
    // A monic irreducible of every degree exists over every finite field.
    let modulus = modulus.expect("irreducible modulus exists");
    let mut full = modulus;
    full.push(1);
    Ok(FiniteField(Arc::new(FieldRepr { p, r, q, modulus: full })))
}

/// (a_0, ..., a_{r-1}) with a_0 most significant.
fn decode_digits(rank: u64, p: u64, r: u32) -> Vec<u64> {
    let mut digits = vec![0u64; r as usize];
    let mut tmp = rank;
    for i in (0..r as usize).rev() {
        digits[i] = tmp % p;
        tmp /= p;
    }
    digits
}

fn encode_digits(digits: &[u64], p: u64) -> u64 {
    let mut rank = 0u64;
    for &d in digits {
        rank = rank * p + d;
    }
    rank
}

impl FiniteField {
    pub fn p(&self) -> u64 {
        self.0.p
    }

    pub fn r(&self) -> u32 {
        self.0.r
    }

    pub fn q(&self) -> u64 {
        self.0.q
    }

    /// Extension modulus coefficients over F_p (constant first, monic,
    /// length r + 1); empty for prime fields.
    pub fn modulus_coeffs(&self) -> &[u64] {
        &self.0.modulus
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    pub fn one(&self) -> FieldElement {
        if self.0.r == 1 {
            FieldElement(1)
        } else {
            // (1, 0, ..., 0): constant digit is most significant.
            FieldElement(self.0.p.pow(self.0.r - 1))
        }
    }

    pub fn is_zero(&self, a: FieldElement) -> bool {
        a.0 == 0
    }

    /// Element from residues mod p, constant term first.  Short slices are
    /// zero-padded.
    pub fn elem_from_coeffs(&self, coeffs: &[u64]) -> Result<FieldElement> {
        if coeffs.len() > self.0.r as usize {
            return Err(precondition(format!(
                "element coefficient tuple longer than extension degree {}",
                self.0.r
            )));
        }
        let mut digits = vec![0u64; self.0.r as usize];
        for (i, &c) in coeffs.iter().enumerate() {
            digits[i] = c % self.0.p;
        }
        Ok(FieldElement(encode_digits(&digits, self.0.p)))
    }

    /// For prime fields: the element representing n mod p.  For extensions:
    /// the constant n mod p.
    pub fn from_int(&self, n: i64) -> FieldElement {
        let p = self.0.p as i64;
        let res = n.rem_euclid(p) as u64;
        self.elem_from_coeffs(&[res]).expect("constant fits")
    }

    /// Residues mod p, constant term first, length r.
    pub fn coeffs(&self, a: FieldElement) -> Vec<u64> {
        decode_digits(a.0, self.0.p, self.0.r)
    }

    /// All q elements in lexicographic coefficient order.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.0.q).map(FieldElement)
    }

    /// The q - 1 nonzero elements in lexicographic coefficient order.
    pub fn units(&self) -> Vec<FieldElement> {
        (1..self.0.q).map(FieldElement).collect()
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let p = self.0.p;
        if self.0.r == 1 {
            return FieldElement((a.0 + b.0) % p);
        }
        let da = decode_digits(a.0, p, self.0.r);
        let db = decode_digits(b.0, p, self.0.r);
        let sum: Vec<u64> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
        FieldElement(encode_digits(&sum, p))
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        let p = self.0.p;
        if self.0.r == 1 {
            return FieldElement((p - a.0) % p);
        }
        let da = decode_digits(a.0, p, self.0.r);
        let neg: Vec<u64> = da.iter().map(|&x| (p - x) % p).collect();
        FieldElement(encode_digits(&neg, p))
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let p = self.0.p;
        if self.0.r == 1 {
            return FieldElement((a.0 * b.0) % p);
        }
        let da = decode_digits(a.0, p, self.0.r);
        let db = decode_digits(b.0, p, self.0.r);
        let mut prod = vec![0u64; 2 * self.0.r as usize - 1];
        for (i, &x) in da.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in db.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % p;
            }
        }
        let red = reduce_mod(&prod, &self.0.modulus, p);
        let mut digits = vec![0u64; self.0.r as usize];
        digits[..red.len()].copy_from_slice(&red);
        FieldElement(encode_digits(&digits, p))
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::NotAUnit("0".to_string()));
        }
        let p = self.0.p;
        if self.0.r == 1 {
            return Ok(FieldElement(pow_mod_u64(a.0, p - 2, p)));
        }
        // Extended Euclid in F_p[x] against the extension modulus.
        let da = decode_digits(a.0, p, self.0.r);
        let inv = poly_inv_mod(&da, &self.0.modulus, p)
            .ok_or_else(|| Error::NotAUnit(self.elem_to_string(a)))?;
        let mut digits = vec![0u64; self.0.r as usize];
        digits[..inv.len()].copy_from_slice(&inv);
        Ok(FieldElement(encode_digits(&digits, p)))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: FieldElement, mut e: u64) -> FieldElement {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative order of a nonzero element.
    pub fn elem_order(&self, a: FieldElement) -> Result<u64> {
        if a.0 == 0 {
            return Err(Error::NotAUnit("0".to_string()));
        }
        let group = self.0.q - 1;
        let mut order = group;
        for (l, _) in crate::unitgroup::factor_u64(group) {
            while order % l == 0 && self.pow(a, order / l) == self.one() {
                order /= l;
            }
        }
        Ok(order)
    }

    /// The lexicographically least generator of F_q^*.
    pub fn multiplicative_generator(&self) -> FieldElement {
        let group = self.0.q - 1;
        for u in self.units() {
            if self.elem_order(u).expect("unit") == group {
                return u;
            }
        }
        unreachable!("F_q^* is cyclic")
    }

    /// "2" for prime fields, "a0.a1" sub-tuple form for extensions.
    pub fn elem_to_string(&self, a: FieldElement) -> String {
        if self.0.r == 1 {
            return a.0.to_string();
        }
        let digits = decode_digits(a.0, self.0.p, self.0.r);
        digits
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }

    /// Parse "2" (prime field) or "1.0" (extension sub-tuple).
    pub fn parse_elem(&self, s: &str) -> Result<FieldElement> {
        let parts: Vec<&str> = s.split('.').collect();
        if self.0.r == 1 && parts.len() != 1 {
            return Err(Error::Parse(format!(
                "sub-tuple element {s:?} in a prime field"
            )));
        }
        let mut coeffs = Vec::with_capacity(parts.len());
        for part in parts {
            let v: u64 = part
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad field element {s:?}")))?;
            coeffs.push(v);
        }
        self.elem_from_coeffs(&coeffs)
    }
}

fn pow_mod_u64(mut base: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    acc
}

/// Remainder of a dense F_p[x] coefficient vector modulo a monic modulus.
fn reduce_mod(poly: &[u64], modulus: &[u64], p: u64) -> Vec<u64> {
    let mut rem: Vec<u64> = poly.to_vec();
    let m_deg = modulus.len() - 1;
    while rem.len() > m_deg {
        let lead = *rem.last().unwrap();
        let top = rem.len() - 1;
        if lead != 0 {
            for (i, &mc) in modulus.iter().enumerate().take(m_deg) {
                let idx = top - m_deg + i;
                rem[idx] = (rem[idx] + (p - mc % p) * lead) % p;
            }
        }
        rem.pop();
    }
    while rem.last() == Some(&0) {
        rem.pop();
    }
    rem
}

fn poly_deg(a: &[u64]) -> Option<usize> {
    a.iter().rposition(|&c| c != 0)
}

/// Inverse of a mod m in F_p[x] (m monic, deg a < deg m), or None if not coprime.
fn poly_inv_mod(a: &[u64], m: &[u64], p: u64) -> Option<Vec<u64>> {
    // Standard extended Euclid, tracking only the coefficient of a.
    let mut r0: Vec<u64> = m.to_vec();
    let mut r1: Vec<u64> = a.to_vec();
    let mut s0: Vec<u64> = vec![];
    let mut s1: Vec<u64> = vec![1];
    let trim = |v: &mut Vec<u64>| {
        while v.last() == Some(&0) {
            v.pop();
        }
    };
    trim(&mut r0);
    trim(&mut r1);
    while !r1.is_empty() {
        // r0 = q * r1 + r2
        let mut rem = r0.clone();
        let mut quot = vec![0u64; rem.len().saturating_sub(r1.len()) + 1];
        let lead_inv = pow_mod_u64(*r1.last().unwrap(), p - 2, p);
        while poly_deg(&rem).map_or(false, |d| d + 1 >= r1.len()) {
            let d = poly_deg(&rem).unwrap();
            let shift = d + 1 - r1.len();
            let c = rem[d] * lead_inv % p;
            quot[shift] = c;
            for (i, &rc) in r1.iter().enumerate() {
                rem[shift + i] = (rem[shift + i] + (p - rc * c % p)) % p;
            }
            trim(&mut rem);
        }
        // s2 = s0 - q * s1
        let mut s2 = vec![0u64; s0.len().max(quot.len() + s1.len())];
        for (i, &c) in s0.iter().enumerate() {
            s2[i] = c;
        }
        for (i, &qc) in quot.iter().enumerate() {
            if qc == 0 {
                continue;
            }
            for (j, &sc) in s1.iter().enumerate() {
                s2[i + j] = (s2[i + j] + (p - qc * sc % p)) % p;
            }
        }
        trim(&mut s2);
        r0 = r1;
        r1 = rem;
        s0 = s1;
        s1 = s2;
    }
    // r0 = gcd; invertible iff gcd is a nonzero constant.
    if r0.len() != 1 {
        return None;
    }
    let g_inv = pow_mod_u64(r0[0], p - 2, p);
    let mut out: Vec<u64> = s0.iter().map(|&c| c * g_inv % p).collect();
    trim(&mut out);
    // Reduce mod m in case Euclid left degree slack.
    Some(reduce_mod(&out, m, p))
}

/// Parse a field spec: "p=3", "p=2,r=2", or a bare prime power like "9".
pub fn parse_field_spec(s: &str) -> Result<(u64, u32)> {
    let s = s.trim();
    if let Ok(q) = s.parse::<u64>() {
        if q < 2 {
            return Err(Error::Parse(format!("field size {q} too small")));
        }
        let mut p = 2;
        while q % p != 0 {
            p += 1;
            if p * p > q {
                p = q;
                break;
            }
        }
        let mut r = 0u32;
        let mut rest = q;
        while rest % p == 0 {
            rest /= p;
            r += 1;
        }
        if rest != 1 {
            return Err(Error::Parse(format!("{q} is not a prime power")));
        }
        return Ok((p, r));
    }
    let mut p: Option<u64> = None;
    let mut r: u32 = 1;
    for part in s.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad field spec {s:?}")))?;
        match key.trim() {
            "p" => {
                p = Some(value.trim().parse().map_err(|_| {
                    Error::Parse(format!("bad p in field spec {s:?}"))
                })?)
            }
            "r" => {
                r = value.trim().parse().map_err(|_| {
                    Error::Parse(format!("bad r in field spec {s:?}"))
                })?
            }
            other => {
                return Err(Error::Parse(format!(
                    "unknown field spec key {other:?}"
                )))
            }
        }
    }
    let p = p.ok_or_else(|| Error::Parse(format!("field spec {s:?} lacks p")))?;
    Ok((p, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_composite_characteristic() {
        let err = construct_field(6, 1).unwrap_err();
        assert!(err.to_string().contains("not prime"));
    }

    #[test]
    fn rejects_oversized_field() {
        let err = construct_field(2, 21).unwrap_err();
        assert!(err.to_string().contains("field too large"));
        assert!(construct_field(2, 20).is_ok());
    }

    #[test]
    fn f4_modulus_is_smallest_irreducible() {
        let f4 = construct_field(2, 2).unwrap();
        // T^2 + T + 1 is the only irreducible quadratic over F_2.
        assert_eq!(f4.modulus_coeffs(), &[1, 1, 1]);
    }

    #[test]
    fn f3_units_in_order() {
        let f3 = construct_field(3, 1).unwrap();
        let units: Vec<u64> = f3.units().iter().map(|u| u.rank()).collect();
        assert_eq!(units, vec![1, 2]);
    }

    #[test]
    fn element_string_round_trip() {
        let f9 = construct_field(3, 2).unwrap();
        for e in f9.elements() {
            let s = f9.elem_to_string(e);
            assert!(s.contains('.'));
            assert_eq!(f9.parse_elem(&s).unwrap(), e);
        }
        let f5 = construct_field(5, 1).unwrap();
        assert_eq!(f5.parse_elem("4").unwrap(), f5.from_int(4));
    }

    #[test]
    fn field_spec_forms() {
        assert_eq!(parse_field_spec("p=3").unwrap(), (3, 1));
        assert_eq!(parse_field_spec("p=2,r=2").unwrap(), (2, 2));
        assert_eq!(parse_field_spec("9").unwrap(), (3, 2));
        assert_eq!(parse_field_spec("13").unwrap(), (13, 1));
        assert!(parse_field_spec("12").is_err());
    }

    fn axioms(f: &FiniteField) {
        let els: Vec<FieldElement> = f.elements().collect();
        for &a in &els {
            assert_eq!(f.add(a, f.zero()), a);
            assert_eq!(f.mul(a, f.one()), a);
            assert_eq!(f.add(a, f.neg(a)), f.zero());
            if !f.is_zero(a) {
                let inv = f.inv(a).unwrap();
                assert_eq!(f.mul(a, inv), f.one());
            }
            // Frobenius fixes F_q: a^q = a.
            assert_eq!(f.pow(a, f.q()), a);
        }
        for &a in &els {
            for &b in &els {
                assert_eq!(f.add(a, b), f.add(b, a));
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for &c in &els {
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
                }
            }
        }
    }

    #[test]
    fn axioms_exhaustive_small_fields() {
        for (p, r) in [(2, 1), (3, 1), (5, 1), (2, 2), (3, 2), (2, 3)] {
            let f = construct_field(p, r).unwrap();
            axioms(&f);
        }
    }

    #[test]
    fn generator_has_full_order() {
        for (p, r) in [(3, 1), (7, 1), (2, 2), (3, 2), (13, 1)] {
            let f = construct_field(p, r).unwrap();
            let g = f.multiplicative_generator();
            assert_eq!(f.elem_order(g).unwrap(), f.q() - 1);
        }
    }
}
