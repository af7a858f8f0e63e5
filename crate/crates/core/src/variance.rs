//! Variance of prime-polynomial counts in intersections of arithmetic
//! progressions and short intervals.
//!
//! The counting functions here sum the polynomial von Mangoldt function Λ
//! over short intervals I(C;h) = C + {polynomials of degree ≤ h}, optionally
//! restricted to a residue class A mod Q.  The central quantity is the
//! variance of these counts over all interval centers and coprime classes,
//! which this module computes by three independent routes:
//!
//! 1. direct enumeration of every (interval, class) cell,
//! 2. the same enumeration centered at the exact mean ("modified" variance),
//! 3. a spectral identity expressing the modified variance through Dirichlet
//!    character sums modulo the dual modulus Q̃ = T^{n−h}·Q*.
//!
//! Routes 2 and 3 agree exactly in exact arithmetic; the implementation
//! checks them against each other to floating tolerance.  The module also
//! carries the dual congruence transfer that underlies route 3, main-term
//! reports for the variance asymptotics, and the hybrid equidistribution
//! scan over random square-free moduli.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::characters::{self, CharacterCensus};
use crate::error::{precondition, Error, Result};
use crate::field::FiniteField;
use crate::numerics::KahanF64;
use crate::polyring::{self, Poly};
use crate::unitgroup::{build_unit_group, UnitGroup};

/// Cap on q^n·φ(Q) for the direct variance enumeration.
pub const VARIANCE_BUDGET: u128 = 100_000_000;

/// Cap on q^{n+h+1} below which the fully literal (center, member) double
/// loop is run as an extra oracle alongside the aggregated enumeration.
const LITERAL_CAP: u128 = 100_000;

/// Fixed chunk width for data-parallel character sweeps; partial sums are
/// merged in chunk order so results are independent of thread count.
const CHAR_CHUNK: usize = 1024;

/// Cap on φ(Q̃) above which a variance report skips the spectral route (with
/// an explanatory note) instead of building an oversized character group.
/// The direct routes still cross-check each other in such reports.
pub const SPECTRAL_PHI_CAP: u128 = 200_000;

fn qpow(q: u64, e: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..e {
        acc = acc.saturating_mul(q as u128);
    }
    acc
}

fn coprime_check(a: &Poly, q: &Poly) -> Result<()> {
    if polyring::gcd(a, q).degree() == Some(0) {
        Ok(())
    } else {
        Err(precondition(format!(
            "residue class must be coprime to the modulus: gcd({a}, {q}) is not a unit"
        )))
    }
}

fn factorization_string(f: &Poly) -> Result<String> {
    let fac = polyring::factor(f)?;
    let mut parts = Vec::new();
    for (p, e) in &fac.factors {
        if *e == 1 {
            parts.push(format!("({})", polyring::pretty(p)));
        } else {
            parts.push(format!("({})^{}", polyring::pretty(p), e));
        }
    }
    if parts.is_empty() {
        parts.push("1".to_string());
    }
    Ok(parts.join(" * "))
}

// ---------------------------------------------------------------------------
// Counting functions
// ---------------------------------------------------------------------------

/// ν(C;h): total Λ-mass of the short interval I(C;h), skipping polynomials
/// with vanishing constant term.  Requires a monic center and 0 ≤ h < deg C.
pub fn nu(c: &Poly, h: usize) -> Result<u64> {
    let deg = c
        .degree()
        .ok_or_else(|| precondition("interval center must be nonzero"))?;
    if !c.is_monic() {
        return Err(precondition("interval center must be monic"));
    }
    if h >= deg {
        return Err(precondition(format!(
            "interval width h = {h} must satisfy h < deg C = {deg}"
        )));
    }
    let field = c.field().clone();
    let mut total = 0u64;
    for g in polyring::enumerate_below(&field, h + 1)? {
        let f = c.add(&g);
        if field.is_zero(f.constant_term()) {
            continue;
        }
        total += polyring::von_mangoldt(&f)?;
    }
    Ok(total)
}

/// Ψ(n;Q,A): Λ-mass of monic polynomials of degree n congruent to A mod Q.
pub fn psi_progression(n: usize, q: &Poly, a: &Poly) -> Result<u64> {
    if q.is_zero() {
        return Err(precondition("modulus must be nonzero"));
    }
    coprime_check(a, q)?;
    if n == 0 {
        return Ok(0);
    }
    let field = q.field().clone();
    let a_red = polyring::rem(a, q)?;
    let mut total = 0u64;
    for (p, lam) in polyring::lambda_support(&field, n)? {
        if polyring::rem(&p, q)? == a_red {
            total += lam;
        }
    }
    Ok(total)
}

/// Ψ(C,h;Q,A): Λ-mass of the short interval I(C;h) intersected with the
/// residue class A mod Q, skipping polynomials with vanishing constant term.
/// The summation is not restricted to monic polynomials, so any nonzero
/// center with deg C > h is accepted (a non-monic center yields an interval
/// of non-monic polynomials, which carry the Λ-value of their monic
/// normalization).
pub fn psi_hybrid(c: &Poly, h: usize, q: &Poly, a: &Poly) -> Result<u64> {
    let deg = c
        .degree()
        .ok_or_else(|| precondition("interval center must be nonzero"))?;
    if h >= deg {
        return Err(precondition(format!(
            "short interval requires deg C > h (got deg C = {deg}, h = {h})"
        )));
    }
    if q.is_zero() {
        return Err(precondition("modulus must be nonzero"));
    }
    coprime_check(a, q)?;
    let field = c.field().clone();
    let a_red = polyring::rem(a, q)?;
    let mut total = 0u64;
    for g in polyring::enumerate_below(&field, h + 1)? {
        let f = c.add(&g);
        if field.is_zero(f.constant_term()) {
            continue;
        }
        if polyring::rem(&f, q)? != a_red {
            continue;
        }
        total += polyring::von_mangoldt(&f)?;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Mean value
// ---------------------------------------------------------------------------

/// Exact mean of Ψ(C,h;Q,A) over all monic centers C of degree n and all
/// residue classes A coprime to Q, as a reduced rational.
///
/// Computed two ways and asserted equal: (a) direct enumeration of the
/// Λ-mass of degree-n monics with nonzero constant term coprime to Q
/// (additionally cross-checked by the fully literal double loop over
/// (center, member) pairs when small enough), and (b) the closed form
/// (q^n − Σ_{P|Q, deg P|n} deg P − [T∤Q]·Λ(T^n)) / (φ(Q)·q^{n−h−1}).
pub fn mean_value(n: usize, h: usize, q: &Poly) -> Result<Ratio<i128>> {
    let field = q.field().clone();
    let qm = q.make_monic();
    let dq = qm
        .degree()
        .ok_or_else(|| precondition("modulus must be nonzero"))?;
    if dq == 0 {
        return Err(precondition("mean value requires deg Q ≥ 1"));
    }
    if n == 0 {
        return Err(precondition("mean value requires n ≥ 1"));
    }
    if h >= n {
        return Err(precondition(format!(
            "mean value requires 0 ≤ h ≤ n−1 (got h = {h}, n = {n})"
        )));
    }
    let qq = field.q();
    let phi = polyring::euler_phi(&qm)? as i128;

    // Closed form.
    let qn = (qq as i128)
        .checked_pow(n as u32)
        .ok_or_else(|| precondition("q^n exceeds the exact integer range"))?;
    let fac = polyring::factor(&qm)?;
    let mut psum: i128 = 0;
    for (p, _) in &fac.factors {
        let d = p.degree().unwrap_or(0);
        if d > 0 && n % d == 0 {
            psum += d as i128;
        }
    }
    let t_coprime = !field.is_zero(qm.constant_term());
    let lam_tn = if t_coprime {
        polyring::von_mangoldt(&Poly::monomial(&field, field.one(), n))? as i128
    } else {
        0
    };
    let denom = phi
        .checked_mul((qq as i128).pow((n - h - 1) as u32))
        .ok_or_else(|| precondition("φ(Q)·q^{n−h−1} exceeds the exact integer range"))?;
    let closed = Ratio::new(qn - psum - lam_tn, denom);

    // Direct route, when the Λ table fits the enumeration budget.
    if qpow(qq, n) <= polyring::ENUM_BUDGET {
        let table = polyring::lambda_table(&field, n)?;
        let mut mass: i128 = 0;
        for (rank, &lam) in table.iter().enumerate() {
            if lam == 0 {
                continue;
            }
            let npoly = polyring::unrank_monic(&field, n, rank as u64);
            if field.is_zero(npoly.constant_term()) {
                continue;
            }
            if polyring::gcd(&npoly, &qm).degree() != Some(0) {
                continue;
            }
            mass += lam as i128;
        }
        // Each admissible N lies in exactly q^{h+1} intervals with monic
        // degree-n centers and in exactly one coprime class.
        let direct = Ratio::new((qq as i128).pow((h + 1) as u32) * mass, qn * phi);
        if direct != closed {
            return Err(Error::RouteDisagreement(format!(
                "mean value: direct {direct} vs closed form {closed}"
            )));
        }
        if qpow(qq, n + h + 1) <= LITERAL_CAP {
            // Coprimality hoisted off the member loop: one gcd per distinct
            // monic instead of one per (center, member) pair.
            let coprime: Vec<bool> = (0..table.len() as u64)
                .map(|r| {
                    polyring::gcd(&polyring::unrank_monic(&field, n, r), &qm).degree() == Some(0)
                })
                .collect();
            let lows: Vec<Poly> = polyring::enumerate_below(&field, h + 1)?.collect();
            let mut literal_mass: i128 = 0;
            for c in polyring::enumerate_monic(&field, n)? {
                for g in &lows {
                    let f = c.add(g);
                    if field.is_zero(f.constant_term()) {
                        continue;
                    }
                    let rank = polyring::monic_rank(&f) as usize;
                    if !coprime[rank] {
                        continue;
                    }
                    literal_mass += table[rank] as i128;
                }
            }
            let literal = Ratio::new(literal_mass, qn * phi);
            if literal != closed {
                return Err(Error::RouteDisagreement(format!(
                    "mean value: literal double loop {literal} vs closed form {closed}"
                )));
            }
        }
    }

    Ok(closed)
}

// ---------------------------------------------------------------------------
// Direct variance routes
// ---------------------------------------------------------------------------

/// Shared enumeration engine: (q^{h+1}/q^n) · Σ over distinct intervals and
/// coprime classes of (cell Λ-count − center)².  Interval cells are walked
/// class-by-class so memory stays at O(φ(Q)).
fn variance_about(n: usize, h: usize, q: &Poly, center: f64) -> Result<f64> {
    if n == 0 {
        return Err(precondition("variance requires n ≥ 1"));
    }
    if h >= n {
        return Err(precondition(format!(
            "variance requires 0 ≤ h ≤ n−1 (got h = {h}, n = {n})"
        )));
    }
    let field = q.field().clone();
    let qm = q.make_monic();
    let dq = qm
        .degree()
        .ok_or_else(|| precondition("modulus must be nonzero"))?;
    let qq = field.q();
    let phi = if dq == 0 { 1 } else { polyring::euler_phi(&qm)? };
    let cost = qpow(qq, n).saturating_mul(phi as u128);
    if cost > VARIANCE_BUDGET {
        return Err(Error::Budget {
            what: "variance enumeration q^n·phi(Q)",
            value: cost,
            cap: VARIANCE_BUDGET,
        });
    }
    let table = polyring::lambda_table(&field, n)?;
    let group = if dq >= 1 {
        Some(build_unit_group(&qm)?)
    } else {
        None
    };
    // Monic rank = Σ c_i·q^{n−1−i} with the constant coefficient heaviest,
    // so rank = low·q^{n−h−1} + class with low encoding c_0..c_h and class
    // encoding the interval-determining top coefficients c_{h+1}..c_{n−1}.
    let classes = qpow(qq, n - h - 1) as u64;
    let low_total = qpow(qq, h + 1) as u64;
    let low_start = qpow(qq, h) as u64; // ranks below this have c_0 = 0
    let mut counts = vec![0u32; phi as usize];
    let mut acc = KahanF64::new();
    for class_rank in 0..classes {
        for slot in counts.iter_mut() {
            *slot = 0;
        }
        for low_rank in low_start..low_total {
            let rank = low_rank * classes + class_rank;
            let lam = table[rank as usize];
            if lam == 0 {
                continue;
            }
            match &group {
                Some(gr) => {
                    let npoly = polyring::unrank_monic(&field, n, rank);
                    if let Ok(idx) = gr.unit_index(&polyring::rem(&npoly, &qm)?) {
                        counts[idx as usize] += lam as u32;
                    }
                }
                None => counts[0] += lam as u32,
            }
        }
        for &cnt in &counts {
            let d = cnt as f64 - center;
            acc.add(d * d);
        }
    }
    Ok(acc.value() * qpow(qq, h + 1) as f64 / qpow(qq, n) as f64)
}

/// Variance of Ψ(C,h;Q,A) about the heuristic center q^{h+1}/φ(Q), averaged
/// over monic centers of degree n:
/// (1/q^n) Σ_{C∈M_n} Σ_{(A,Q)=1} |Ψ(C,h;Q,A) − q^{h+1}/φ(Q)|².
/// A unit modulus (deg Q = 0) is accepted as the pure short-interval case.
pub fn variance_direct(n: usize, h: usize, q: &Poly) -> Result<f64> {
    let field = q.field().clone();
    let qm = q.make_monic();
    let dq = qm
        .degree()
        .ok_or_else(|| precondition("modulus must be nonzero"))?;
    let phi = if dq == 0 { 1 } else { polyring::euler_phi(&qm)? };
    let center = qpow(field.q(), h + 1) as f64 / phi as f64;
    variance_about(n, h, &qm, center)
}

/// Modified variance: same double sum as [`variance_direct`] but centered at
/// the exact mean from [`mean_value`].
pub fn variance_tilde_direct(n: usize, h: usize, q: &Poly) -> Result<f64> {
    let mean = mean_value(n, h, q)?;
    let center = *mean.numer() as f64 / *mean.denom() as f64;
    variance_about(n, h, &q.make_monic(), center)
}

// ---------------------------------------------------------------------------
// Dual congruence transfer
// ---------------------------------------------------------------------------

/// Rewrites the hybrid count Ψ(T^{h+1}B, h; Q, A) as a sum over a dual pair
/// of congruences: Σ Λ(N) over polynomials N of degree exactly n = h+1+deg B
/// with N ≡ B* mod T^{n−h} and N ≡ Ã* mod Q*, where X* denotes the
/// coefficient-reversal involution T^{deg X}·X(1/T) and Ã is the degree-n
/// representative A₀ + Q·T^{n−deg Q} of A mod Q.  Valid only when Q(0) ≠ 0.
pub fn dual_transfer(b: &Poly, h: usize, q: &Poly, a: &Poly) -> Result<u64> {
    let field = b.field().clone();
    let db = b
        .degree()
        .ok_or_else(|| precondition("dual transfer requires B ≠ 0"))?;
    let n = h + 1 + db;
    let qm = q.make_monic();
    let dq = qm
        .degree()
        .ok_or_else(|| precondition("modulus must be nonzero"))?;
    if field.is_zero(qm.constant_term()) {
        return Err(Error::InvolutionTransfer);
    }
    if dq > n {
        return Err(precondition(format!(
            "dual transfer requires deg Q ≤ h + 1 + deg B = {n} (got deg Q = {dq})"
        )));
    }
    coprime_check(a, &qm)?;

    let a0 = polyring::rem(a, &qm)?;
    let atilde = a0.add(&qm.mul(&Poly::monomial(&field, field.one(), n - dq)));
    debug_assert_eq!(atilde.degree(), Some(n));
    debug_assert!(atilde.is_monic());
    let astar = polyring::involution(&atilde)?;
    let bstar = polyring::involution(b)?;
    let tpow = Poly::monomial(&field, field.one(), n - h);
    let qstar = if dq == 0 {
        Poly::one(&field)
    } else {
        polyring::involution(&qm)?.make_monic()
    };

    // Chinese remainder: N ≡ B* mod T^{n−h}, N ≡ Ã* mod Q*.
    let modulus = tpow.mul(&qstar);
    let (g, s, t) = polyring::xgcd(&tpow, &qstar);
    if g.degree() != Some(0) {
        return Err(Error::RouteDisagreement(
            "dual moduli T^{n−h} and Q* are not coprime".into(),
        ));
    }
    let scale = field.inv(g.constant_term())?;
    let s = s.mul_elem(scale);
    let t = t.mul_elem(scale);
    // t·Q* ≡ 1 mod T^{n−h} and s·T^{n−h} ≡ 1 mod Q*.
    let n0 = polyring::rem(
        &bstar.mul(&t).mul(&qstar).add(&astar.mul(&s).mul(&tpow)),
        &modulus,
    )?;
    debug_assert_eq!(polyring::rem(&n0, &tpow)?, polyring::rem(&bstar, &tpow)?);

    let dmod = (n - h) + qstar.degree().unwrap_or(0);
    let mut total = 0u64;
    if dmod > n {
        if n0.degree() == Some(n) {
            total = polyring::von_mangoldt(&n0)?;
        }
    } else {
        for spoly in polyring::enumerate_below(&field, n - dmod + 1)? {
            let cand = n0.add(&spoly.mul(&modulus));
            if cand.degree() == Some(n) {
                total += polyring::von_mangoldt(&cand)?;
            }
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Character-sum engine
// ---------------------------------------------------------------------------

/// Aggregated Λ-weighted character sums over a unit group.  For each
/// character χ mod M let S_χ = Σ_{N monic, deg N = n} χ(N)Λ(N) (characters
/// vanish off units).  The engine accumulates:
///   - Σ |S_χ|² over even nontrivial χ,
///   - Σ |S_χ + 1|²/q^n over primitive even χ (squared Frobenius trace via
///     the explicit formula, where the trivial-zero count is 1),
///   - Σ |S_χ|²/q^n over primitive odd χ (requested separately since most
///     characters are odd and their sums are skipped otherwise).
pub(crate) struct CharacterAggregates {
    pub sum_s_sq_even_nontrivial: f64,
    pub sum_trace_sq_prim_even: f64,
    pub sum_trace_sq_prim_odd: f64,
    pub even_nontrivial_count: u64,
    pub prim_even_count: u64,
    pub prim_odd_count: u64,
}

#[derive(Default, Clone, Copy)]
struct ChunkPartial {
    s_even: f64,
    t_prim_even: f64,
    t_prim_odd: f64,
    n_even: u64,
    n_prim_even: u64,
    n_prim_odd: u64,
}

pub(crate) fn character_aggregates(
    group: &Arc<UnitGroup>,
    n: usize,
    need_odd: bool,
) -> Result<CharacterAggregates> {
    if n == 0 {
        return Err(precondition("character aggregates require n ≥ 1"));
    }
    let field = group.field().clone();
    let modulus = group.modulus().clone();
    let phi = group.phi() as usize;
    let k = group.num_generators();
    let qn_f = qpow(field.q(), n) as f64;

    // Λ-mass of degree-n monic prime powers, aggregated per unit class.
    let mut weights: Vec<u64> = vec![0; phi];
    for d in 1..=n {
        if n % d != 0 {
            continue;
        }
        for p in polyring::irreducibles(&field, d)? {
            let r = polyring::pow_mod(&p, (n / d) as u128, &modulus)?;
            if let Ok(idx) = group.unit_index(&r) {
                weights[idx as usize] += d as u64;
            }
        }
    }
    let mut class_w: Vec<f64> = Vec::new();
    let mut class_dlogs: Vec<u32> = Vec::new();
    for (i, &w) in weights.iter().enumerate() {
        if w > 0 {
            class_w.push(w as f64);
            class_dlogs.extend_from_slice(group.dlog_of_index(i as u32));
        }
    }
    let n_classes = class_w.len();

    let l = group.exponent();
    let cis: Vec<Complex64> = (0..l)
        .map(|j| Complex64::from_polar(1.0, TAU * j as f64 / l as f64))
        .collect();
    let orders: Vec<u64> = group.orders().to_vec();
    // Character index decodes to exponents with the last generator fastest.
    let mut strides = vec![1u64; k.max(1)];
    for i in (0..k.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * orders[i + 1];
    }
    let const_dlog: Vec<u32> = group.constant_gen_dlog().to_vec();
    let cosets: Vec<Vec<Vec<u32>>> = group
        .prime_cosets()
        .iter()
        .map(|(_, members)| members.clone())
        .collect();

    let n_chunks = phi.div_ceil(CHAR_CHUNK);
    let partials: Vec<ChunkPartial> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let start = ci * CHAR_CHUNK;
            let end = (start + CHAR_CHUNK).min(phi);
            let mut part = ChunkPartial::default();
            let mut s_even = KahanF64::new();
            let mut t_even = KahanF64::new();
            let mut t_odd = KahanF64::new();
            let mut wbuf = vec![0u64; k];
            for idx in start..end {
                if idx == 0 {
                    continue; // trivial character
                }
                for (i, w) in wbuf.iter_mut().enumerate() {
                    let e = (idx as u64 / strides[i]) % orders[i];
                    *w = e * (l / orders[i]);
                }
                let phase_of = |dlog: &[u32]| -> u64 {
                    let mut t = 0u64;
                    for (i, &d) in dlog.iter().enumerate() {
                        t += wbuf[i] * d as u64;
                    }
                    t % l
                };
                let even = phase_of(&const_dlog) == 0;
                if !even && !need_odd {
                    continue;
                }
                let primitive = cosets
                    .iter()
                    .all(|coset| coset.iter().any(|dl| phase_of(dl) != 0));
                if !even && !primitive {
                    continue;
                }
                let mut re = KahanF64::new();
                let mut im = KahanF64::new();
                for c in 0..n_classes {
                    let dlog = &class_dlogs[c * k..(c + 1) * k];
                    let z = cis[phase_of(dlog) as usize];
                    re.add(class_w[c] * z.re);
                    im.add(class_w[c] * z.im);
                }
                let s = Complex64::new(re.value(), im.value());
                if even {
                    s_even.add(s.norm_sqr());
                    part.n_even += 1;
                    if primitive {
                        let shifted = s + Complex64::new(1.0, 0.0);
                        t_even.add(shifted.norm_sqr() / qn_f);
                        part.n_prim_even += 1;
                    }
                } else {
                    t_odd.add(s.norm_sqr() / qn_f);
                    part.n_prim_odd += 1;
                }
            }
            part.s_even = s_even.value();
            part.t_prim_even = t_even.value();
            part.t_prim_odd = t_odd.value();
            part
        })
        .collect();

    let mut s_even = KahanF64::new();
    let mut t_even = KahanF64::new();
    let mut t_odd = KahanF64::new();
    let mut agg = CharacterAggregates {
        sum_s_sq_even_nontrivial: 0.0,
        sum_trace_sq_prim_even: 0.0,
        sum_trace_sq_prim_odd: 0.0,
        even_nontrivial_count: 0,
        prim_even_count: 0,
        prim_odd_count: 0,
    };
    for part in &partials {
        s_even.add(part.s_even);
        t_even.add(part.t_prim_even);
        t_odd.add(part.t_prim_odd);
        agg.even_nontrivial_count += part.n_even;
        agg.prim_even_count += part.n_prim_even;
        agg.prim_odd_count += part.n_prim_odd;
    }
    agg.sum_s_sq_even_nontrivial = s_even.value();
    agg.sum_trace_sq_prim_even = t_even.value();
    agg.sum_trace_sq_prim_odd = t_odd.value();
    Ok(agg)
}

// ---------------------------------------------------------------------------
// Spectral route
// ---------------------------------------------------------------------------

/// Result of the spectral variance identity modulo Q̃ = T^{n−h}·Q*.
#[derive(Debug, Clone)]
pub struct SpectralVariance {
    /// (1/((q−1)·q^{n−h−1}·φ(Q̃))) · Σ_{even χ̃ ≠ χ̃₀ mod Q̃} |Ψ(n,χ̃)|²,
    /// where Ψ(n,χ̃) sums χ̃(N)Λ(N) over all (not only monic) N of degree n.
    /// Equals the modified variance exactly.
    pub full: f64,
    /// q^{h+1}(q−1)/φ(Q̃) · Σ_{primitive even χ̃} |tr Θ^n_{χ̃}|²: the
    /// main term predicted by the equidistribution of Frobenius conjugacy
    /// classes, with traces obtained through the explicit formula.
    pub primitive_even_main: f64,
    /// The dual modulus Q̃ = T^{n−h}·Q* (monic normalization).
    pub qtilde: Poly,
    /// φ(Q̃), asserted equal to (q−1)·q^{n−h−1}·φ(Q).
    pub phi_qtilde: u64,
    /// Character census modulo Q̃.
    pub census: CharacterCensus,
}

/// Spectral evaluation of the modified variance via Dirichlet characters
/// modulo Q̃ = T^{n−h}·Q*.  Requires Q(0) ≠ 0 (the coefficient-reversal
/// involution loses degree information otherwise) and 1 ≤ deg Q ≤ n.
pub fn variance_spectral(n: usize, h: usize, q: &Poly) -> Result<SpectralVariance> {
    if n == 0 {
        return Err(precondition("spectral variance requires n ≥ 1"));
    }
    if h >= n {
        return Err(precondition(format!(
            "spectral variance requires 0 ≤ h ≤ n−1 (got h = {h}, n = {n})"
        )));
    }
    let field = q.field().clone();
    let qm = q.make_monic();
    let dq = qm
        .degree()
        .ok_or_else(|| precondition("modulus must be nonzero"))?;
    if dq == 0 {
        return Err(precondition(
            "spectral variance requires deg Q ≥ 1 (no characters mod a unit)",
        ));
    }
    if field.is_zero(qm.constant_term()) {
        return Err(Error::InvolutionTransfer);
    }
    if dq > n {
        return Err(precondition(format!(
            "spectral variance requires deg Q ≤ n (got deg Q = {dq}, n = {n})"
        )));
    }
    let qq = field.q();
    let qstar = polyring::involution(&qm)?.make_monic();
    let qtilde = Poly::monomial(&field, field.one(), n - h).mul(&qstar);
    let group = Arc::new(build_unit_group(&qtilde)?);
    let phi_qt = group.phi();
    let phi_q = polyring::euler_phi(&qm)?;
    let expected = (qq as u128 - 1) * qpow(qq, n - h - 1) * phi_q as u128;
    if phi_qt as u128 != expected {
        return Err(Error::RouteDisagreement(format!(
            "φ(Q̃) = {phi_qt} but (q−1)·q^{{n−h−1}}·φ(Q) = {expected}"
        )));
    }

    let agg = character_aggregates(&group, n, false)?;
    // Ψ(n,χ̃) over all degree-n polynomials is (q−1)·S_χ̃ for even χ̃ and
    // vanishes for odd χ̃.
    let qm1 = (qq - 1) as f64;
    let full = qm1 * qm1 * agg.sum_s_sq_even_nontrivial
        / (qm1 * qpow(qq, n - h - 1) as f64 * phi_qt as f64);
    let primitive_even_main =
        qpow(qq, h + 1) as f64 * qm1 / phi_qt as f64 * agg.sum_trace_sq_prim_even;
    let census = characters::character_census(&group);
    Ok(SpectralVariance {
        full,
        primitive_even_main,
        qtilde,
        phi_qtilde: phi_qt,
        census,
    })
}

// ---------------------------------------------------------------------------
// Squared-trace averages over primitive characters
// ---------------------------------------------------------------------------

/// Average of |tr Θ^n_χ|² over a family of primitive characters mod M,
/// computed through the explicit formula.
#[derive(Debug, Clone, Serialize)]
pub struct TraceMoment {
    pub modulus: String,
    pub phi: u64,
    /// Number of characters in the family.
    pub count: u64,
    pub average: f64,
}

/// Average squared Frobenius trace over primitive even characters mod M.
pub fn primitive_even_trace_moment(modulus: &Poly, n: usize) -> Result<TraceMoment> {
    let qm = modulus.make_monic();
    let group = Arc::new(build_unit_group(&qm)?);
    let agg = character_aggregates(&group, n, false)?;
    if agg.prim_even_count == 0 {
        return Err(precondition(format!(
            "no primitive even characters mod {}",
            polyring::pretty(&qm)
        )));
    }
    Ok(TraceMoment {
        modulus: polyring::pretty(&qm),
        phi: group.phi(),
        count: agg.prim_even_count,
        average: agg.sum_trace_sq_prim_even / agg.prim_even_count as f64,
    })
}

/// Average squared Frobenius trace over primitive odd characters mod M.
pub fn primitive_odd_trace_moment(modulus: &Poly, n: usize) -> Result<TraceMoment> {
    let qm = modulus.make_monic();
    let group = Arc::new(build_unit_group(&qm)?);
    let agg = character_aggregates(&group, n, true)?;
    if agg.prim_odd_count == 0 {
        return Err(precondition(format!(
            "no primitive odd characters mod {}",
            polyring::pretty(&qm)
        )));
    }
    Ok(TraceMoment {
        modulus: polyring::pretty(&qm),
        phi: group.phi(),
        count: agg.prim_odd_count,
        average: agg.sum_trace_sq_prim_odd / agg.prim_odd_count as f64,
    })
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Full record of one variance computation: configuration, the exact mean,
/// all computed routes, main-term comparisons, and the character census of
/// the dual modulus.  Exact integers are carried as strings so serialized
/// output never loses precision.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub version: String,
    pub q: u64,
    pub n: usize,
    pub h: usize,
    pub modulus: String,
    pub modulus_factorization: String,
    pub phi: u64,
    /// Exact mean as a reduced fraction "num/den".
    pub mean: String,
    pub mean_float: f64,
    pub v_direct: f64,
    pub v_tilde_direct: f64,
    pub v_spectral: Option<f64>,
    pub v_spectral_primitive_even_main: Option<f64>,
    pub spectral_note: Option<String>,
    pub theorem_main_term: Option<f64>,
    pub theorem_residual: Option<f64>,
    pub theorem_envelope: Option<f64>,
    pub theorem_constant: Option<f64>,
    pub theorem_ratio: Option<f64>,
    pub theorem_label: Option<String>,
    pub theorem_note: Option<String>,
    /// Exact interval Λ-mass sum Σ_C Σ_{N∈I(C;h),(N,Q)=1,N(0)≠0} Λ(N),
    /// asserted equal between closed form and brute force.
    pub s1: Option<String>,
    /// Same with Λ(N)² in place of Λ(N).
    pub s2: Option<String>,
    pub census_modulus: Option<String>,
    pub census: Option<CharacterCensus>,
    pub seed: u64,
    pub threads: String,
}

fn base_report(n: usize, h: usize, q: &Poly) -> Result<VarianceReport> {
    let field = q.field().clone();
    let qm = q.make_monic();
    let dq = qm
        .degree()
        .ok_or_else(|| precondition("modulus must be nonzero"))?;
    if dq == 0 {
        return Err(precondition("variance report requires deg Q ≥ 1"));
    }
    let qq = field.q();
    let phi = polyring::euler_phi(&qm)?;
    let mean = mean_value(n, h, &qm)?;
    let mean_float = *mean.numer() as f64 / *mean.denom() as f64;
    let v_direct = variance_direct(n, h, &qm)?;
    let v_tilde = variance_about(n, h, &qm, mean_float)?;

    let mut report = VarianceReport {
        version: crate::VERSION.to_string(),
        q: qq,
        n,
        h,
        modulus: polyring::pretty(&qm),
        modulus_factorization: factorization_string(&qm)?,
        phi,
        mean: mean.to_string(),
        mean_float,
        v_direct,
        v_tilde_direct: v_tilde,
        v_spectral: None,
        v_spectral_primitive_even_main: None,
        spectral_note: None,
        theorem_main_term: None,
        theorem_residual: None,
        theorem_envelope: None,
        theorem_constant: None,
        theorem_ratio: None,
        theorem_label: None,
        theorem_note: None,
        s1: None,
        s2: None,
        census_modulus: None,
        census: None,
        seed: 0,
        threads: String::new(),
    };

    if field.is_zero(qm.constant_term()) {
        return Err(Error::InvolutionTransfer);
    }
    let phi_qtilde_pred = (qq as u128 - 1)
        .saturating_mul(qpow(qq, n - h - 1))
        .saturating_mul(phi as u128);
    if dq > n {
        report.spectral_note = Some(format!(
            "spectral route skipped: requires deg Q ≤ n (deg Q = {dq}, n = {n})"
        ));
    } else if phi_qtilde_pred > SPECTRAL_PHI_CAP {
        report.spectral_note = Some(format!(
            "spectral route skipped: phi(Qtilde) = {phi_qtilde_pred} exceeds \
             the per-report cap {SPECTRAL_PHI_CAP}"
        ));
    } else {
        let spec = variance_spectral(n, h, &qm)?;
        // Exact identity between the modified variance and its spectral form.
        if (v_tilde - spec.full).abs() > 1e-6 * (1.0 + spec.full.abs()) {
            return Err(Error::RouteDisagreement(format!(
                "modified variance {v_tilde} vs spectral identity {}",
                spec.full
            )));
        }
        report.census_modulus = Some(polyring::pretty(&spec.qtilde));
        report.census = Some(spec.census);
        report.v_spectral = Some(spec.full);
        report.v_spectral_primitive_even_main = Some(spec.primitive_even_main);
    }
    Ok(report)
}

/// The standard single-case report: exact mean, all three variance routes,
/// and (when deg Q > h) the unconditional main-term comparison.
pub fn variance_report(n: usize, h: usize, q: &Poly) -> Result<VarianceReport> {
    let field = q.field().clone();
    let qm = q.make_monic();
    let mut report = base_report(n, h, &qm)?;
    let dq = qm.degree().unwrap_or(0);
    let qq = field.q();
    if dq > h {
        let phi = report.phi as f64;
        let main = report.n as f64 * qpow(qq, h + 1) as f64 - qpow(qq, 2 * (h + 1)) as f64 / phi;
        let residual = report.v_direct - main;
        let envelope = theorem_envelope(qq, n, h, dq, report.phi);
        report.theorem_main_term = Some(main);
        report.theorem_residual = Some(residual);
        report.theorem_envelope = Some(envelope);
        report.theorem_constant = Some(residual.abs() / envelope);
        report.theorem_label = Some("unconditional main term".into());
    } else {
        report.theorem_note = Some(format!(
            "main-term comparison skipped: requires deg Q > h (deg Q = {dq}, h = {h})"
        ));
    }
    Ok(report)
}

/// Error envelope for the unconditional main-term comparison:
/// n²q^{h+1}/q^{n/2} + q^{h+1}(deg Q)²/q^n + q^{2(h+1)}·deg Q/(φ(Q)·q^n).
pub fn theorem_envelope(q: u64, n: usize, h: usize, dq: usize, phi: u64) -> f64 {
    let qf = q as f64;
    let qn = qpow(q, n) as f64;
    (n * n) as f64 * qpow(q, h + 1) as f64 / qn.sqrt()
        + qpow(q, h + 1) as f64 * (dq * dq) as f64 / qn
        + qf.powi(2 * (h as i32 + 1)) * dq as f64 / (phi as f64 * qn)
}

/// Main-term report for the unconditional variance asymptotic: V compared to
/// n·q^{h+1} − q^{2(h+1)}/φ(Q), with the exact interval Λ-mass sums S1 and
/// S2 verified against brute force (integer equality).  Requires deg Q > h
/// and Q(0) ≠ 0.
pub fn theorem_i_report(n: usize, h: usize, q: &Poly) -> Result<VarianceReport> {
    let field = q.field().clone();
    let qm = q.make_monic();
    let dq = qm
        .degree()
        .ok_or_else(|| precondition("modulus must be nonzero"))?;
    if dq <= h {
        return Err(precondition(format!(
            "main-term report requires deg Q > h (got deg Q = {dq}, h = {h})"
        )));
    }
    if field.is_zero(qm.constant_term()) {
        return Err(precondition("main-term report requires Q(0) ≠ 0"));
    }
    let mut report = variance_report(n, h, &qm)?;
    let (s1, s2) = interval_mass_sums(n, h, &qm)?;
    report.s1 = Some(s1.to_string());
    report.s2 = Some(s2.to_string());
    Ok(report)
}

/// The two exact interval Λ-mass sums behind the main-term computation:
/// S1 = Σ_{C∈M_n} Σ_{N∈I(C;h), (N,Q)=1, N(0)≠0} Λ(N) and S2 the same with
/// Λ². Each is computed in closed form and by enumeration (plus the fully
/// literal double loop when small) and the routes are asserted equal.
fn interval_mass_sums(n: usize, h: usize, qm: &Poly) -> Result<(i128, i128)> {
    let field = qm.field().clone();
    let qq = field.q();
    let dq = qm.degree().unwrap_or(0);
    debug_assert!(dq > 0 && !field.is_zero(qm.constant_term()));

    // Closed forms.  T ∤ Q here, so the excluded prime power T^n (the only
    // one with vanishing constant term) is subtracted explicitly.
    let qn = (qq as i128)
        .checked_pow(n as u32)
        .ok_or_else(|| precondition("q^n exceeds the exact integer range"))?;
    let fac = polyring::factor(qm)?;
    let mut psum: i128 = 0;
    let mut psum_sq: i128 = 0;
    for (p, _) in &fac.factors {
        let d = p.degree().unwrap_or(0);
        if d > 0 && n % d == 0 {
            psum += d as i128;
            psum_sq += (d * d) as i128;
        }
    }
    let mut lambda_sq_total: i128 = 0;
    for d in 1..=n {
        if n % d == 0 {
            lambda_sq_total += (d * d) as i128 * polyring::irreducible_count(&field, d) as i128;
        }
    }
    let qh1 = (qq as i128).pow((h + 1) as u32);
    let s1_closed = qh1 * (qn - psum - 1);
    let s2_closed = qh1 * (lambda_sq_total - psum_sq - 1);

    // Enumerated route over degree-n monics (each admissible N lies in
    // exactly q^{h+1} intervals).
    let table = polyring::lambda_table(&field, n)?;
    let mut mass: i128 = 0;
    let mut mass_sq: i128 = 0;
    for (rank, &lam) in table.iter().enumerate() {
        if lam == 0 {
            continue;
        }
        let npoly = polyring::unrank_monic(&field, n, rank as u64);
        if field.is_zero(npoly.constant_term()) {
            continue;
        }
        if polyring::gcd(&npoly, qm).degree() != Some(0) {
            continue;
        }
        mass += lam as i128;
        mass_sq += (lam as i128) * (lam as i128);
    }
    let s1_enum = qh1 * mass;
    let s2_enum = qh1 * mass_sq;
    if s1_enum != s1_closed || s2_enum != s2_closed {
        return Err(Error::RouteDisagreement(format!(
            "interval mass sums: enumerated (S1 = {s1_enum}, S2 = {s2_enum}) \
             vs closed form (S1 = {s1_closed}, S2 = {s2_closed})"
        )));
    }

    // Fully literal double loop when affordable.
    if qpow(qq, n + h + 1) <= LITERAL_CAP {
        // Coprimality hoisted off the member loop: one gcd per distinct
        // monic instead of one per (center, member) pair.
        let coprime: Vec<bool> = (0..table.len() as u64)
            .map(|r| polyring::gcd(&polyring::unrank_monic(&field, n, r), qm).degree() == Some(0))
            .collect();
        let lows: Vec<Poly> = polyring::enumerate_below(&field, h + 1)?.collect();
        let mut lit1: i128 = 0;
        let mut lit2: i128 = 0;
        for c in polyring::enumerate_monic(&field, n)? {
            for g in &lows {
                let f = c.add(g);
                if field.is_zero(f.constant_term()) {
                    continue;
                }
                let rank = polyring::monic_rank(&f) as usize;
                if !coprime[rank] {
                    continue;
                }
                let lam = table[rank] as i128;
                lit1 += lam;
                lit2 += lam * lam;
            }
        }
        if lit1 != s1_closed || lit2 != s2_closed {
            return Err(Error::RouteDisagreement(format!(
                "interval mass sums: literal (S1 = {lit1}, S2 = {lit2}) \
                 vs closed form (S1 = {s1_closed}, S2 = {s2_closed})"
            )));
        }
    }
    Ok((s1_closed, s2_closed))
}

/// Conditional main-term report: V compared to the prediction
/// q^{h+1}(n−h−2+deg Q), valid under the hybrid equidistribution hypothesis
/// for the Frobenius conjugacy classes of the dual modulus family.
/// Requires n ≥ 5, 1 ≤ h ≤ n−4, Q square-free, 3 ≤ deg Q ≤ h+2, Q(0) ≠ 0.
pub fn theorem_iii_report(n: usize, h: usize, q: &Poly) -> Result<VarianceReport> {
    let field = q.field().clone();
    let qm = q.make_monic();
    let dq = qm
        .degree()
        .ok_or_else(|| precondition("modulus must be nonzero"))?;
    if n < 5 {
        return Err(precondition(format!(
            "conditional report requires n ≥ 5 (got n = {n})"
        )));
    }
    if h < 1 || h > n - 4 {
        return Err(precondition(format!(
            "conditional report requires 1 ≤ h ≤ n−4 (got h = {h}, n = {n})"
        )));
    }
    if !(3..=h + 2).contains(&dq) {
        return Err(precondition(format!(
            "conditional report requires 3 ≤ deg Q ≤ h+2 (got deg Q = {dq}, h = {h})"
        )));
    }
    if field.is_zero(qm.constant_term()) {
        return Err(precondition("conditional report requires Q(0) ≠ 0"));
    }
    if !polyring::factor(&qm)?.is_squarefree() {
        return Err(precondition("conditional report requires a square-free modulus"));
    }
    let mut report = base_report(n, h, &qm)?;
    let prediction = qpow(field.q(), h + 1) as f64 * (n - h - 2 + dq) as f64;
    report.theorem_main_term = Some(prediction);
    report.theorem_residual = Some(report.v_direct - prediction);
    report.theorem_ratio = Some(report.v_direct / prediction);
    report.theorem_label = Some("conditional on the hybrid equidistribution hypothesis".into());
    Ok(report)
}

// ---------------------------------------------------------------------------
// Hybrid equidistribution scan
// ---------------------------------------------------------------------------

/// One row of the equidistribution scan: the average squared Frobenius trace
/// over a family of primitive characters, against its matrix-integral
/// reference value.
#[derive(Debug, Clone, Serialize)]
pub struct ConjectureRow {
    /// "hybrid", "even-baseline", or "odd-baseline".
    pub kind: String,
    pub q: u64,
    pub modulus: String,
    pub phi: u64,
    /// Number of characters averaged over.
    pub characters: u64,
    pub n: usize,
    pub average: f64,
    pub reference: f64,
    pub deviation: f64,
}

/// Scans the hybrid family: for each field, draws `moduli_per_field` random
/// square-free monic Q of degree m with Q(0) ≠ 0 (deterministically from the
/// seed), and reports the average of |tr Θ^n_χ|² over primitive even
/// characters mod T^l·Q against the reference min{n, l+m−2}.  Alongside each
/// hybrid row it emits the two proven baselines: primitive even characters
/// mod T^l against min{n, l−2}, and primitive odd characters mod Q against
/// min{n, deg Q−1}.
pub fn conjecture_scan(
    l: usize,
    m: usize,
    n: usize,
    fields: &[FiniteField],
    moduli_per_field: usize,
    seed: u64,
) -> Result<Vec<ConjectureRow>> {
    if l < 4 {
        return Err(precondition(format!("scan requires l ≥ 4 (got l = {l})")));
    }
    if m < 3 {
        return Err(precondition(format!("scan requires m ≥ 3 (got m = {m})")));
    }
    if n == 0 {
        return Err(precondition("scan requires n ≥ 1"));
    }
    if moduli_per_field == 0 {
        return Err(precondition("scan requires at least one modulus per field"));
    }
    let mut rows = Vec::new();
    for field in fields {
        let qq = field.q();
        // Independent deterministic stream per (seed, q).
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ qq.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let total = qpow(qq, m);
        if total > u64::MAX as u128 {
            return Err(precondition("q^m exceeds the sampling range"));
        }
        let total = total as u64;
        let mut chosen: Vec<Poly> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut attempts = 0usize;
        while chosen.len() < moduli_per_field {
            attempts += 1;
            if attempts > 10_000 * moduli_per_field.max(1) {
                return Err(precondition(format!(
                    "could not find {moduli_per_field} square-free moduli of degree {m} \
                     with Q(0) ≠ 0 over F_{qq}"
                )));
            }
            let r = rng.random_range(0..total);
            if !seen.insert(r) {
                continue;
            }
            let qpoly = polyring::unrank_monic(field, m, r);
            if field.is_zero(qpoly.constant_term()) {
                continue;
            }
            if !polyring::factor(&qpoly)?.is_squarefree() {
                continue;
            }
            chosen.push(qpoly);
        }

        let tl = Poly::monomial(field, field.one(), l);
        let even_base = primitive_even_trace_moment(&tl, n)?;
        rows.push(ConjectureRow {
            kind: "even-baseline".into(),
            q: qq,
            modulus: even_base.modulus.clone(),
            phi: even_base.phi,
            characters: even_base.count,
            n,
            average: even_base.average,
            reference: n.min(l - 2) as f64,
            deviation: even_base.average - n.min(l - 2) as f64,
        });
        for qpoly in &chosen {
            let odd_base = primitive_odd_trace_moment(qpoly, n)?;
            rows.push(ConjectureRow {
                kind: "odd-baseline".into(),
                q: qq,
                modulus: odd_base.modulus.clone(),
                phi: odd_base.phi,
                characters: odd_base.count,
                n,
                average: odd_base.average,
                reference: n.min(m - 1) as f64,
                deviation: odd_base.average - n.min(m - 1) as f64,
            });
            let hybrid = primitive_even_trace_moment(&tl.mul(qpoly), n)?;
            rows.push(ConjectureRow {
                kind: "hybrid".into(),
                q: qq,
                modulus: hybrid.modulus.clone(),
                phi: hybrid.phi,
                characters: hybrid.count,
                n,
                average: hybrid.average,
                reference: n.min(l + m - 2) as f64,
                deviation: hybrid.average - n.min(l + m - 2) as f64,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
