//! Polynomials over a finite field: arithmetic, enumeration, irreducibility,
//! factorization, and the arithmetic functions built on factorization
//! (von Mangoldt, Möbius, Euler phi), plus the coefficient-reversal
//! involution X*(T) = T^deg(X) · X(1/T).
//!
//! Coefficients are stored constant term first with no zero coefficients
//! above the leading term; the zero polynomial has an empty coefficient
//! vector.  All enumerations are lexicographic on coefficient tuples with
//! the constant term as the most significant position.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{precondition, Error, Result};
use crate::field::{FieldElement, FiniteField};

/// Cap on the number of polynomials any single enumeration may visit.
pub const ENUM_BUDGET: u128 = 100_000_000;

/// Fixed seed for the randomized equal-degree splitting inside `factor`.
/// Factorization output is deterministic: the factor list is sorted, and the
/// generator is reseeded per input polynomial.
pub const FACTOR_SEED: u64 = 0x6671_7661_7221;

#[derive(Clone, PartialEq, Eq)]
pub struct Poly {
    field: FiniteField,
    coeffs: Vec<FieldElement>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly[{}]", self)
    }
}

impl fmt::Display for Poly {
    /// Canonical text form: comma-separated coefficients, constant first,
    /// extension-field coefficients as dot-joined sub-tuples.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .map(|&c| self.field.elem_to_string(c))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

impl PartialOrd for Poly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Poly {
    /// Degree first, then lexicographic on the coefficient tuple (constant
    /// term most significant).  Total order used to sort factor lists.
    fn cmp(&self, other: &Self) -> Ordering {
        self.coeffs
            .len()
            .cmp(&other.coeffs.len())
            .then_with(|| self.coeffs.cmp(&other.coeffs))
    }
}

impl Poly {
    pub fn zero(field: &FiniteField) -> Poly {
        Poly {
            field: field.clone(),
            coeffs: Vec::new(),
        }
    }

    pub fn one(field: &FiniteField) -> Poly {
        Poly::constant(field, field.one())
    }

    pub fn constant(field: &FiniteField, c: FieldElement) -> Poly {
        let coeffs = if field.is_zero(c) { vec![] } else { vec![c] };
        Poly {
            field: field.clone(),
            coeffs,
        }
    }

    /// c · T^k.
    pub fn monomial(field: &FiniteField, c: FieldElement, k: usize) -> Poly {
        if field.is_zero(c) {
            return Poly::zero(field);
        }
        let mut coeffs = vec![field.zero(); k + 1];
        coeffs[k] = c;
        Poly {
            field: field.clone(),
            coeffs,
        }
    }

    pub fn from_coeffs(field: &FiniteField, mut coeffs: Vec<FieldElement>) -> Poly {
        while coeffs.last().map_or(false, |&c| field.is_zero(c)) {
            coeffs.pop();
        }
        Poly {
            field: field.clone(),
            coeffs,
        }
    }

    /// Convenience for prime fields: coefficients as integers, constant first.
    pub fn from_ints(field: &FiniteField, ints: &[i64]) -> Poly {
        let coeffs = ints.iter().map(|&n| field.from_int(n)).collect();
        Poly::from_coeffs(field, coeffs)
    }

    pub fn field(&self) -> &FiniteField {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn coeff(&self, i: usize) -> FieldElement {
        self.coeffs.get(i).copied().unwrap_or(self.field.zero())
    }

    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }

    pub fn leading_coeff(&self) -> Option<FieldElement> {
        self.coeffs.last().copied()
    }

    pub fn constant_term(&self) -> FieldElement {
        self.coeff(0)
    }

    pub fn is_monic(&self) -> bool {
        self.leading_coeff() == Some(self.field.one())
    }

    pub fn eval(&self, x: FieldElement) -> FieldElement {
        let f = &self.field;
        let mut acc = f.zero();
        for &c in self.coeffs.iter().rev() {
            acc = f.add(f.mul(acc, x), c);
        }
        acc
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let f = &self.field;
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(f.add(self.coeff(i), other.coeff(i)));
        }
        Poly::from_coeffs(f, out)
    }

    pub fn neg(&self) -> Poly {
        let f = &self.field;
        let out = self.coeffs.iter().map(|&c| f.neg(c)).collect();
        Poly::from_coeffs(f, out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let f = &self.field;
        if self.is_zero() || other.is_zero() {
            return Poly::zero(f);
        }
        let mut out = vec![f.zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if f.is_zero(a) {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = f.add(out[i + j], f.mul(a, b));
            }
        }
        Poly::from_coeffs(f, out)
    }

    pub fn mul_elem(&self, c: FieldElement) -> Poly {
        let f = &self.field;
        let out = self.coeffs.iter().map(|&a| f.mul(a, c)).collect();
        Poly::from_coeffs(f, out)
    }

    /// self · T^k.
    pub fn mul_t_power(&self, k: usize) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let f = &self.field;
        let mut out = vec![f.zero(); k];
        out.extend_from_slice(&self.coeffs);
        Poly {
            field: f.clone(),
            coeffs: out,
        }
    }

    /// Residue mod T^k: truncation to the k lowest coefficients.
    pub fn mod_t_power(&self, k: usize) -> Poly {
        let take = self.coeffs.len().min(k);
        Poly::from_coeffs(&self.field, self.coeffs[..take].to_vec())
    }

    pub fn make_monic(&self) -> Poly {
        match self.leading_coeff() {
            None => self.clone(),
            Some(l) => {
                if l == self.field.one() {
                    self.clone()
                } else {
                    let inv = self.field.inv(l).expect("nonzero lead");
                    self.mul_elem(inv)
                }
            }
        }
    }

    pub fn derivative(&self) -> Poly {
        let f = &self.field;
        if self.coeffs.len() <= 1 {
            return Poly::zero(f);
        }
        let mut out = Vec::with_capacity(self.coeffs.len() - 1);
        for (i, &c) in self.coeffs.iter().enumerate().skip(1) {
            out.push(f.mul(c, f.from_int(i as i64)));
        }
        Poly::from_coeffs(f, out)
    }
}

/// Quotient and remainder with deg r < deg b.  Errors on division by zero.
pub fn euclidean_division(a: &Poly, b: &Poly) -> Result<(Poly, Poly)> {
    if b.is_zero() {
        return Err(Error::DivisionByZero);
    }
    let f = a.field().clone();
    if f != *b.field() {
        return Err(Error::MismatchedField);
    }
    let db = b.degree().unwrap();
    if a.is_zero() || a.degree().unwrap() < db {
        return Ok((Poly::zero(&f), a.clone()));
    }
    let da = a.degree().unwrap();
    let lead_inv = f.inv(b.leading_coeff().unwrap())?;
    let mut rem = a.coeffs.clone();
    let mut quot = vec![f.zero(); da - db + 1];
    for top in (db..=da).rev() {
        let c = f.mul(rem[top], lead_inv);
        if f.is_zero(c) {
            continue;
        }
        quot[top - db] = c;
        for (i, &bc) in b.coeffs.iter().enumerate() {
            let idx = top - db + i;
            rem[idx] = f.sub(rem[idx], f.mul(c, bc));
        }
    }
    rem.truncate(db);
    Ok((Poly::from_coeffs(&f, quot), Poly::from_coeffs(&f, rem)))
}

pub fn rem(a: &Poly, b: &Poly) -> Result<Poly> {
    Ok(euclidean_division(a, b)?.1)
}

/// Monic gcd; gcd(0, 0) = 0.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    let mut x = a.clone();
    let mut y = b.clone();
    while !y.is_zero() {
        let r = rem(&x, &y).expect("nonzero divisor");
        x = y;
        y = r;
    }
    x.make_monic()
}

/// Extended gcd: returns (g, s, t) with s·a + t·b = g and g monic (or zero).
pub fn xgcd(a: &Poly, b: &Poly) -> (Poly, Poly, Poly) {
    let f = a.field();
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (Poly::one(f), Poly::zero(f));
    let (mut t0, mut t1) = (Poly::zero(f), Poly::one(f));
    while !r1.is_zero() {
        let (q, r2) = euclidean_division(&r0, &r1).expect("nonzero divisor");
        let s2 = s0.sub(&q.mul(&s1));
        let t2 = t0.sub(&q.mul(&t1));
        r0 = r1;
        r1 = r2;
        s0 = s1;
        s1 = s2;
        t0 = t1;
        t1 = t2;
    }
    if let Some(l) = r0.leading_coeff() {
        let inv = f.inv(l).expect("nonzero lead");
        r0 = r0.mul_elem(inv);
        s0 = s0.mul_elem(inv);
        t0 = t0.mul_elem(inv);
    }
    (r0, s0, t0)
}

/// base^e mod m, with e allowed up to u128 for equal-degree split exponents.
pub fn pow_mod(base: &Poly, mut e: u128, m: &Poly) -> Result<Poly> {
    let f = base.field();
    let mut b = rem(base, m)?;
    let mut acc = rem(&Poly::one(f), m)?;
    while e > 0 {
        if e & 1 == 1 {
            acc = rem(&acc.mul(&b), m)?;
        }
        b = rem(&b.mul(&b), m)?;
        e >>= 1;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Enumeration and ranking
// ---------------------------------------------------------------------------

/// Rank of a monic polynomial among monics of its degree, in lexicographic
/// order on (c_0, ..., c_{n-1}).
pub fn monic_rank(f: &Poly) -> u64 {
    debug_assert!(f.is_monic());
    let q = f.field().q();
    let n = f.degree().unwrap();
    let mut rank = 0u64;
    for i in 0..n {
        rank = rank * q + f.coeff(i).rank();
    }
    rank
}

/// Inverse of [`monic_rank`].
pub fn unrank_monic(field: &FiniteField, n: usize, rank: u64) -> Poly {
    let q = field.q();
    let mut coeffs = vec![field.zero(); n + 1];
    coeffs[n] = field.one();
    let mut tmp = rank;
    for i in (0..n).rev() {
        coeffs[i] = FieldElement(tmp % q);
        tmp /= q;
    }
    debug_assert_eq!(tmp, 0, "rank out of range for degree {n}");
    Poly {
        field: field.clone(),
        coeffs,
    }
}

/// Rank of a polynomial of degree < m among all residues of degree < m.
pub fn rank_below(f: &Poly, m: usize) -> u64 {
    debug_assert!(f.degree().map_or(true, |d| d < m));
    let q = f.field().q();
    let mut rank = 0u64;
    for i in 0..m {
        rank = rank * q + f.coeff(i).rank();
    }
    rank
}

/// Inverse of [`rank_below`].
pub fn unrank_below(field: &FiniteField, m: usize, rank: u64) -> Poly {
    let q = field.q();
    let mut coeffs = vec![field.zero(); m];
    let mut tmp = rank;
    for i in (0..m).rev() {
        coeffs[i] = FieldElement(tmp % q);
        tmp /= q;
    }
    debug_assert_eq!(tmp, 0);
    Poly::from_coeffs(field, coeffs)
}

fn checked_q_pow(field: &FiniteField, n: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..n {
        acc = acc.saturating_mul(field.q() as u128);
    }
    acc
}

/// All monic polynomials of degree n in lexicographic order.  Errors when the
/// stream would exceed the enumeration budget.
pub fn enumerate_monic(
    field: &FiniteField,
    n: usize,
) -> Result<impl Iterator<Item = Poly> + '_> {
    let count = checked_q_pow(field, n);
    if count > ENUM_BUDGET {
        return Err(Error::Budget {
            what: "monic enumeration size q^n",
            value: count,
            cap: ENUM_BUDGET,
        });
    }
    let f = field.clone();
    Ok((0..count as u64).map(move |r| unrank_monic(&f, n, r)))
}

/// All polynomials of degree < m in lexicographic order (budgeted).
pub fn enumerate_below(
    field: &FiniteField,
    m: usize,
) -> Result<impl Iterator<Item = Poly> + '_> {
    let count = checked_q_pow(field, m);
    if count > ENUM_BUDGET {
        return Err(Error::Budget {
            what: "residue enumeration size q^m",
            value: count,
            cap: ENUM_BUDGET,
        });
    }
    let f = field.clone();
    Ok((0..count as u64).map(move |r| unrank_below(&f, m, r)))
}

// ---------------------------------------------------------------------------
// Irreducibility and factorization
// ---------------------------------------------------------------------------

/// Irreducibility of a nonconstant polynomial, by checking that
/// gcd(f, T^{q^i} - T mod f) is trivial for every i ≤ deg f / 2.
/// Errors with "degree zero" on constants (and on the zero polynomial).
pub fn is_irreducible(f: &Poly) -> Result<bool> {
    match f.degree() {
        None | Some(0) => return Err(Error::DegreeZero),
        Some(1) => return Ok(true),
        Some(_) => {}
    }
    let field = f.field();
    let q = field.q();
    let fm = f.make_monic();
    let n = fm.degree().unwrap();
    let t = Poly::monomial(field, field.one(), 1);
    let mut g = rem(&t, &fm)?;
    for _ in 1..=n / 2 {
        g = pow_mod(&g, q as u128, &fm)?;
        let d = gcd(&fm, &g.sub(&t));
        if d.degree() != Some(0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A factorization unit · Π P_i^{e_i} with the P_i monic irreducible,
/// sorted by (degree, coefficient tuple).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub unit: FieldElement,
    pub factors: Vec<(Poly, u32)>,
}

impl Factorization {
    pub fn product(&self, field: &FiniteField) -> Poly {
        let mut acc = Poly::constant(field, self.unit);
        for (p, e) in &self.factors {
            for _ in 0..*e {
                acc = acc.mul(p);
            }
        }
        acc
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|(_, e)| *e == 1)
    }
}

/// Full factorization of a nonzero polynomial: distinct-degree splitting,
/// then seeded equal-degree splitting (quadratic-residue gcds for odd
/// characteristic, trace-map gcds for characteristic 2).
pub fn factor(f: &Poly) -> Result<Factorization> {
    if f.is_zero() {
        return Err(precondition("cannot factor the zero polynomial"));
    }
    let field = f.field().clone();
    let unit = f.leading_coeff().unwrap();
    let monic = f.make_monic();
    let mut rng = ChaCha8Rng::seed_from_u64(FACTOR_SEED ^ monic_seed_mix(&monic));
    let mut factors: Vec<(Poly, u32)> = Vec::new();
    factor_monic_into(&monic, 1, &mut factors, &mut rng)?;
    factors.sort_by(|a, b| a.0.cmp(&b.0));
    // Merge duplicates produced along different recursion paths.
    let mut merged: Vec<(Poly, u32)> = Vec::new();
    for (p, e) in factors {
        if let Some(last) = merged.last_mut() {
            if last.0 == p {
                last.1 += e;
                continue;
            }
        }
        merged.push((p, e));
    }
    let fact = Factorization {
        unit,
        factors: merged,
    };
    debug_assert_eq!(fact.product(&field), *f);
    Ok(fact)
}

fn monic_seed_mix(f: &Poly) -> u64 {
    // Stable per-input tweak so repeated calls are reproducible but distinct
    // inputs do not share split sequences.
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &c in f.coeffs() {
        h ^= c.rank();
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn factor_monic_into(
    f: &Poly,
    mult: u32,
    out: &mut Vec<(Poly, u32)>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let field = f.field().clone();
    match f.degree() {
        None => return Err(precondition("cannot factor the zero polynomial")),
        Some(0) => return Ok(()),
        Some(_) => {}
    }
    let deriv = f.derivative();
    if deriv.is_zero() {
        // f = g^p: take the p-th root coefficientwise.
        let root = p_th_root(f);
        return factor_monic_into(&root, mult * field.p() as u32, out, rng);
    }
    let d = gcd(f, &deriv);
    let squarefree = euclidean_division(f, &d)?.0;
    // Factor the squarefree part, then peel multiplicities off f itself.
    let mut sf_factors: Vec<Poly> = Vec::new();
    distinct_degree_split(&squarefree, &mut sf_factors, rng)?;
    let mut rest = f.clone();
    for p in sf_factors {
        let mut e = 0u32;
        loop {
            let (q, r) = euclidean_division(&rest, &p)?;
            if !r.is_zero() {
                break;
            }
            rest = q;
            e += 1;
        }
        debug_assert!(e >= 1);
        out.push((p, e * mult));
    }
    if rest.degree() != Some(0) {
        // Residual pure p-th-power content not visible in f / gcd(f, f').
        factor_monic_into(&rest, mult, out, rng)?;
    }
    Ok(())
}

/// p-th root of a monic polynomial with zero derivative.
fn p_th_root(f: &Poly) -> Poly {
    let field = f.field();
    let p = field.p() as usize;
    let q = field.q();
    // a ↦ a^{q/p} inverts the Frobenius x ↦ x^p on F_q.
    let e = q / field.p();
    let n = f.degree().unwrap();
    debug_assert_eq!(n % p, 0);
    let mut coeffs = Vec::with_capacity(n / p + 1);
    for j in 0..=n / p {
        coeffs.push(field.pow(f.coeff(j * p), e));
    }
    Poly::from_coeffs(field, coeffs)
}

fn distinct_degree_split(
    f: &Poly,
    out: &mut Vec<Poly>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let field = f.field().clone();
    let q = field.q();
    let t = Poly::monomial(&field, field.one(), 1);
    let mut rest = f.clone();
    let mut h = rem(&t, f)?;
    let mut d = 0usize;
    while rest.degree().map_or(false, |deg| deg > 0) {
        d += 1;
        if 2 * d > rest.degree().unwrap() {
            out.push(rest.clone());
            return Ok(());
        }
        h = pow_mod(&h, q as u128, &rest)?;
        let g = gcd(&rest, &h.sub(&t));
        if g.degree().map_or(false, |deg| deg > 0) {
            equal_degree_split(&g, d, out, rng)?;
            rest = euclidean_division(&rest, &g)?.0;
            h = rem(&h, &rest)?;
        }
    }
    Ok(())
}

fn equal_degree_split(
    g: &Poly,
    d: usize,
    out: &mut Vec<Poly>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let field = g.field().clone();
    let deg = g.degree().unwrap();
    if deg == d {
        out.push(g.clone());
        return Ok(());
    }
    let q = field.q() as u128;
    let exponent = if field.p() != 2 {
        let qd = q.checked_pow(d as u32).ok_or(Error::Budget {
            what: "equal-degree split exponent q^d",
            value: u128::MAX,
            cap: u128::MAX / 2,
        })?;
        (qd - 1) / 2
    } else {
        0
    };
    for _attempt in 0..10_000 {
        let a = random_poly_below(&field, deg, rng);
        if a.degree().map_or(true, |ad| ad < 1) {
            continue;
        }
        let b = if field.p() != 2 {
            let be = pow_mod(&a, exponent, g)?;
            be.sub(&Poly::one(&field))
        } else {
            // Trace map to F_2 splits equal-degree products in char 2.
            let reps = (field.r() as usize) * d;
            let mut acc = rem(&a, g)?;
            let mut cur = rem(&a, g)?;
            for _ in 1..reps {
                cur = rem(&cur.mul(&cur), g)?;
                acc = acc.add(&cur);
            }
            acc
        };
        let s = gcd(g, &b);
        if let Some(sd) = s.degree() {
            if sd > 0 && sd < deg {
                let t = euclidean_division(g, &s)?.0;
                equal_degree_split(&s, d, out, rng)?;
                equal_degree_split(&t, d, out, rng)?;
                return Ok(());
            }
        }
    }
    Err(precondition("equal-degree splitting failed to converge"))
}

fn random_poly_below(field: &FiniteField, deg: usize, rng: &mut ChaCha8Rng) -> Poly {
    let q = field.q();
    let coeffs: Vec<FieldElement> = (0..deg)
        .map(|_| FieldElement(rng.random_range(0..q)))
        .collect();
    Poly::from_coeffs(field, coeffs)
}

// ---------------------------------------------------------------------------
// Arithmetic functions
// ---------------------------------------------------------------------------

/// Λ(N) = deg P when N = c·P^k for a monic irreducible P, else 0.
pub fn von_mangoldt(n: &Poly) -> Result<u64> {
    if n.is_zero() {
        return Err(precondition("von Mangoldt undefined at 0"));
    }
    if n.degree() == Some(0) {
        return Ok(0);
    }
    let fact = factor(n)?;
    if fact.factors.len() == 1 {
        Ok(fact.factors[0].0.degree().unwrap() as u64)
    } else {
        Ok(0)
    }
}

/// μ(N): (-1)^k for squarefree N with k distinct irreducible factors, else 0.
pub fn mobius(n: &Poly) -> Result<i64> {
    if n.is_zero() {
        return Err(precondition("Möbius undefined at 0"));
    }
    let fact = factor(n)?;
    if !fact.is_squarefree() {
        return Ok(0);
    }
    Ok(if fact.factors.len() % 2 == 0 { 1 } else { -1 })
}

/// φ(Q) = #(F_q[T]/Q)^* = Π (q^{d e} - q^{d(e-1)}); φ(constant) = 1.
pub fn euler_phi(qpoly: &Poly) -> Result<u64> {
    if qpoly.is_zero() {
        return Err(precondition("Euler phi undefined at 0"));
    }
    if qpoly.degree() == Some(0) {
        return Ok(1);
    }
    let q = qpoly.field().q() as u128;
    let fact = factor(qpoly)?;
    let mut phi: u128 = 1;
    for (p, e) in &fact.factors {
        let d = p.degree().unwrap() as u32;
        let qd = q.pow(d * *e);
        let qd1 = q.pow(d * (*e - 1));
        phi *= qd - qd1;
    }
    u64::try_from(phi).map_err(|_| Error::Budget {
        what: "phi(Q)",
        value: phi,
        cap: u64::MAX as u128,
    })
}

/// All monic divisors of Q, from its factorization, sorted.
pub fn monic_divisors(qpoly: &Poly) -> Result<Vec<Poly>> {
    let field = qpoly.field().clone();
    let fact = factor(qpoly)?;
    let mut divisors = vec![Poly::one(&field)];
    for (p, e) in &fact.factors {
        let mut next = Vec::with_capacity(divisors.len() * (*e as usize + 1));
        for d in &divisors {
            let mut cur = d.clone();
            next.push(cur.clone());
            for _ in 0..*e {
                cur = cur.mul(p);
                next.push(cur.clone());
            }
        }
        divisors = next;
    }
    divisors.sort();
    Ok(divisors)
}

/// The involution X* = T^deg(X) · X(1/T): coefficient reversal with any
/// leading zeros of the reversal stripped.  Undefined at 0.
pub fn involution(x: &Poly) -> Result<Poly> {
    if x.is_zero() {
        return Err(precondition("involution undefined at 0"));
    }
    let mut rev: Vec<FieldElement> = x.coeffs().to_vec();
    rev.reverse();
    Ok(Poly::from_coeffs(x.field(), rev))
}

// ---------------------------------------------------------------------------
// Irreducible enumeration (sieve) and von Mangoldt tables
// ---------------------------------------------------------------------------

/// Ranks of monic irreducibles for every degree 1..=dmax, by sieving each
/// degree with the irreducibles of at most half that degree.
fn irreducible_ranks_up_to(field: &FiniteField, dmax: usize) -> Result<Vec<Vec<u64>>> {
    let q = field.q();
    if checked_q_pow(field, dmax) > ENUM_BUDGET {
        return Err(Error::Budget {
            what: "irreducible sieve size q^d",
            value: checked_q_pow(field, dmax),
            cap: ENUM_BUDGET,
        });
    }
    let mut by_deg: Vec<Vec<u64>> = vec![Vec::new(); dmax + 1];
    for deg in 1..=dmax {
        let size = (q as u128).pow(deg as u32) as usize;
        let mut composite = vec![false; size];
        for e in 1..=deg / 2 {
            let cof = deg - e;
            let cof_count = (q as u128).pow(cof as u32) as u64;
            for &pr in &by_deg[e] {
                let p = unrank_monic(field, e, pr);
                for mr in 0..cof_count {
                    let m = unrank_monic(field, cof, mr);
                    let prod = p.mul(&m);
                    composite[monic_rank(&prod) as usize] = true;
                }
            }
        }
        by_deg[deg] = (0..size as u64)
            .filter(|&r| !composite[r as usize])
            .collect();
    }
    Ok(by_deg)
}

/// Monic irreducibles of degree exactly d, in lexicographic order.
pub fn irreducibles(field: &FiniteField, d: usize) -> Result<Vec<Poly>> {
    if d == 0 {
        return Err(Error::DegreeZero);
    }
    let ranks = irreducible_ranks_up_to(field, d)?;
    Ok(ranks[d]
        .iter()
        .map(|&r| unrank_monic(field, d, r))
        .collect())
}

/// Number of monic irreducibles of degree n by the divisor sum
/// (1/n) Σ_{d|n} μ(d) q^{n/d}.
pub fn irreducible_count(field: &FiniteField, n: usize) -> u128 {
    let q = field.q() as i128;
    let mut total: i128 = 0;
    for d in 1..=n {
        if n % d != 0 {
            continue;
        }
        let mu = mobius_int(d as u64);
        if mu == 0 {
            continue;
        }
        total += mu as i128 * q.pow((n / d) as u32);
    }
    debug_assert!(total > 0 && total % n as i128 == 0);
    (total / n as i128) as u128
}

fn mobius_int(n: u64) -> i64 {
    let mut m = n;
    let mut k = 0;
    let mut d = 2;
    while d * d <= m {
        if m % d == 0 {
            m /= d;
            if m % d == 0 {
                return 0;
            }
            k += 1;
        }
        d += 1;
    }
    if m > 1 {
        k += 1;
    }
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

/// The monic prime powers of degree n with their Λ values:
/// (P^{n/d}, d) for every monic irreducible P of degree d | n.
pub fn lambda_support(field: &FiniteField, n: usize) -> Result<Vec<(Poly, u64)>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let ranks = irreducible_ranks_up_to(field, n)?;
    let mut out = Vec::new();
    for d in 1..=n {
        if n % d != 0 {
            continue;
        }
        let k = n / d;
        for &r in &ranks[d] {
            let p = unrank_monic(field, d, r);
            let mut power = p.clone();
            for _ in 1..k {
                power = power.mul(&p);
            }
            out.push((power, d as u64));
        }
    }
    Ok(out)
}

/// Λ values for all monic polynomials of degree n, indexed by monic rank.
pub fn lambda_table(field: &FiniteField, n: usize) -> Result<Vec<u8>> {
    let count = checked_q_pow(field, n);
    if count > ENUM_BUDGET {
        return Err(Error::Budget {
            what: "von Mangoldt table size q^n",
            value: count,
            cap: ENUM_BUDGET,
        });
    }
    let mut table = vec![0u8; count as usize];
    for (p, lam) in lambda_support(field, n)? {
        table[monic_rank(&p) as usize] = lam as u8;
    }
    Ok(table)
}

/// Ψ(n) = Σ_{N monic, deg N = n} Λ(N), computed by summing over the prime
/// powers of degree n.  The prime polynomial theorem makes this exactly q^n.
pub fn psi_total(field: &FiniteField, n: usize) -> Result<u128> {
    if n == 0 {
        return Ok(0);
    }
    let mut total: u128 = 0;
    for (_, lam) in lambda_support(field, n)? {
        total += lam as u128;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse a polynomial: the canonical comma list "c0,c1,..." (sub-tuples
/// "a0.a1" for extension coefficients), or for prime fields the pretty form
/// "T^2+2T+1".
pub fn parse_poly(field: &FiniteField, s: &str) -> Result<Poly> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty polynomial".to_string()));
    }
    if s.contains('T') || s.contains('t') {
        return parse_pretty(field, s);
    }
    let mut coeffs = Vec::new();
    for part in s.split(',') {
        coeffs.push(field.parse_elem(part)?);
    }
    Ok(Poly::from_coeffs(field, coeffs))
}

fn parse_pretty(field: &FiniteField, s: &str) -> Result<Poly> {
    if field.r() != 1 {
        return Err(Error::Parse(
            "pretty polynomial form is only accepted over prime fields".to_string(),
        ));
    }
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut terms: Vec<(i64, String)> = Vec::new();
    let mut sign = 1i64;
    let mut cur = String::new();
    for (i, ch) in compact.chars().enumerate() {
        match ch {
            '+' | '-' if i > 0 => {
                terms.push((sign, std::mem::take(&mut cur)));
                sign = if ch == '-' { -1 } else { 1 };
            }
            '-' => sign = -1,
            '+' => {}
            _ => cur.push(ch),
        }
    }
    terms.push((sign, cur));
    let mut acc = Poly::zero(field);
    for (sgn, term) in terms {
        if term.is_empty() {
            return Err(Error::Parse(format!("bad polynomial {s:?}")));
        }
        let term_upper = term.replace('t', "T");
        let (coeff_str, deg) = match term_upper.find('T') {
            None => (term_upper.as_str(), 0usize),
            Some(pos) => {
                let deg = match term_upper[pos + 1..].strip_prefix('^') {
                    None if term_upper.len() == pos + 1 => 1usize,
                    None => {
                        return Err(Error::Parse(format!("bad term {term:?}")));
                    }
                    Some(d) => d
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad exponent in {term:?}")))?,
                };
                (&term_upper[..pos], deg)
            }
        };
        let c: i64 = if coeff_str.is_empty() {
            1
        } else {
            coeff_str
                .parse()
                .map_err(|_| Error::Parse(format!("bad coefficient in {term:?}")))?
        };
        let elem = field.from_int(sgn * c);
        acc = acc.add(&Poly::monomial(field, elem, deg));
    }
    Ok(acc)
}

/// Pretty form "T^2+2T+1" for prime fields; falls back to the comma list for
/// extension fields.
pub fn pretty(f: &Poly) -> String {
    if f.is_zero() {
        return "0".to_string();
    }
    if f.field().r() != 1 {
        return f.to_string();
    }
    let mut parts = Vec::new();
    for (i, &c) in f.coeffs().iter().enumerate().rev() {
        let cv = c.rank();
        if cv == 0 {
            continue;
        }
        let part = match i {
            0 => cv.to_string(),
            1 if cv == 1 => "T".to_string(),
            1 => format!("{cv}T"),
            _ if cv == 1 => format!("T^{i}"),
            _ => format!("{cv}T^{i}"),
        };
        parts.push(part);
    }
    parts.join("+")
}
