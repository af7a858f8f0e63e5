//! The dual-congruence machinery behind the spectral variance route:
//! the four-step chain rewriting X* ≡ A (mod Q) as X ≡ Ã* (mod Q*),
//! independence of the dual class from the choice of degree-n
//! representative Ã, the coprime-class bijection A ↦ Ã*, the
//! two-character orthogonality expansion of the hybrid count, and the
//! unit-scaling partition of exact-degree centers into monic classes.

use std::sync::Arc;

use fqvar::characters::enumerate_characters;
use fqvar::field::{construct_field, FieldElement, FiniteField};
use fqvar::polyring::{self, Poly};
use fqvar::unitgroup::build_unit_group;
use fqvar::variance::{mean_value, psi_hybrid};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FIELDS: [u64; 2] = [3, 5];

fn field_of(q: u64) -> FiniteField {
    construct_field(q, 1).expect("prime field")
}

fn rand_elem(rng: &mut ChaCha8Rng, field: &FiniteField) -> FieldElement {
    let elems: Vec<FieldElement> = field.elements().collect();
    elems[rng.random_range(0..elems.len())]
}

fn rand_unit(rng: &mut ChaCha8Rng, field: &FiniteField) -> FieldElement {
    let units = field.units();
    units[rng.random_range(0..units.len())]
}

fn rand_poly_exact(rng: &mut ChaCha8Rng, field: &FiniteField, d: usize) -> Poly {
    let mut coeffs: Vec<FieldElement> = (0..d).map(|_| rand_elem(rng, field)).collect();
    coeffs.push(rand_unit(rng, field));
    Poly::from_coeffs(field, coeffs)
}

fn rand_monic_exact(rng: &mut ChaCha8Rng, field: &FiniteField, d: usize) -> Poly {
    let mut coeffs: Vec<FieldElement> = (0..d).map(|_| rand_elem(rng, field)).collect();
    coeffs.push(field.one());
    Poly::from_coeffs(field, coeffs)
}

/// Random monic modulus of exact degree d with Q(0) ≠ 0 (T ∤ Q).
fn rand_modulus(rng: &mut ChaCha8Rng, field: &FiniteField, d: usize) -> Poly {
    loop {
        let q = rand_monic_exact(rng, field, d);
        if !field.is_zero(q.constant_term()) {
            return q;
        }
    }
}

/// Random residue coprime to Q.
fn rand_coprime(rng: &mut ChaCha8Rng, field: &FiniteField, q: &Poly) -> Poly {
    let dq = q.degree().unwrap();
    loop {
        let a = Poly::from_coeffs(
            field,
            (0..dq.max(1)).map(|_| rand_elem(rng, field)).collect(),
        );
        if a.is_zero() {
            continue;
        }
        if polyring::gcd(&a, q).degree() == Some(0) {
            return a;
        }
    }
}

fn star(x: &Poly) -> Poly {
    polyring::involution(x).expect("involution of a nonzero polynomial")
}

/// The degree-n representative Ã = A₀ + Q·T^{n−deg Q} of A mod Q, where
/// A₀ is the least-degree representative.
fn degree_n_representative(a: &Poly, q: &Poly, n: usize) -> Poly {
    let field = q.field().clone();
    let dq = q.degree().unwrap();
    assert!(dq <= n);
    let a0 = polyring::rem(a, q).unwrap();
    a0.add(&q.mul(&Poly::monomial(&field, field.one(), n - dq)))
}

fn divides(d: &Poly, x: &Poly) -> bool {
    x.is_zero() || polyring::rem(x, d).unwrap().is_zero()
}

/// X* ≡ A (mod Q)
///   ⇔ X* − Ã = VQ for some V
///   ⇔ (X* − Ã)* = V′Q* for some V′
///   ⇔ X − Ã* = V′Q* for some V′
///   ⇔ X ≡ Ã* (mod Q*),
/// under T ∤ XQ and deg X = deg X* = deg Ã = n.
#[test]
fn congruence_transfers_through_reversal_step_by_step() {
    for q in FIELDS {
        let field = field_of(q);
        let mut rng = ChaCha8Rng::seed_from_u64(0x2001 + q);
        for i in 0..200 {
            let dq = rng.random_range(1..=3usize);
            let n = dq + rng.random_range(1..=3usize);
            let qpoly = rand_modulus(&mut rng, &field, dq);
            let qstar = star(&qpoly);
            let a = Poly::from_coeffs(
                &field,
                (0..dq).map(|_| rand_elem(&mut rng, &field)).collect(),
            );
            let atilde = degree_n_representative(&a, &qpoly, n);
            assert_eq!(atilde.degree(), Some(n));
            assert!(atilde.is_monic());
            let astar = star(&atilde);

            let x = if i % 2 == 0 {
                // Constructed so X* ≡ A mod Q: take W = Ã + V·Q of degree n
                // with W(0) ≠ 0 and set X = W*; then X* = W.
                loop {
                    let v = polyring::unrank_below(
                        &field,
                        n - dq,
                        rng.random_range(0..field.q().pow((n - dq) as u32)),
                    );
                    let w = atilde.add(&v.mul(&qpoly));
                    if !field.is_zero(w.constant_term()) {
                        break star(&w);
                    }
                }
            } else {
                // Uniform X of degree n with X(0) ≠ 0: generically off-class.
                loop {
                    let cand = rand_poly_exact(&mut rng, &field, n);
                    if !field.is_zero(cand.constant_term()) {
                        break cand;
                    }
                }
            };
            assert_eq!(x.degree(), Some(n));
            let xstar = star(&x);
            assert_eq!(xstar.degree(), Some(n), "T | X slipped through");

            // Step 1: X* ≡ A mod Q  ⇔  Q | X* − Ã.
            let b1 = polyring::rem(&xstar, &qpoly).unwrap() == polyring::rem(&a, &qpoly).unwrap();
            let d1 = xstar.sub(&atilde);
            let b2 = divides(&qpoly, &d1);
            assert_eq!(b1, b2, "congruence vs divisibility by Q, q={q}");

            // Step 2: Q | X* − Ã  ⇔  Q* | (X* − Ã)*.
            let b3 = d1.is_zero() || divides(&qstar, &star(&d1));
            assert_eq!(b2, b3, "divisibility transfer through reversal, q={q}");

            // Step 3: (X* − Ã)* = X − Ã* since deg X* = deg Ã and T ∤ X.
            if !d1.is_zero() {
                let d2 = x.sub(&astar);
                // The reversal of the difference at the common length n:
                // lifted by the forgotten power of T when leading terms of
                // X* and Ã agree.
                let lifted = star(&d1).mul_t_power(n - d1.degree().unwrap());
                assert_eq!(lifted, d2, "reversal of the difference, q={q}");
            }
            let b4 = divides(&qstar, &x.sub(&astar));
            assert_eq!(b3, b4, "dual divisibility matches, q={q}");

            // Step 4 (the combined statement): X* ≡ A mod Q ⇔ X ≡ Ã* mod Q*.
            let b5 = polyring::rem(&x, &qstar).unwrap()
                == polyring::rem(&astar, &qstar).unwrap();
            assert_eq!(b1, b5, "end-to-end dual congruence, q={q}");

            if i % 2 == 0 {
                assert!(b1, "constructed instance must satisfy X* ≡ A mod Q");
                // Witness: the quotient V with X* − Ã = VQ is exact.
                let (v, r) = polyring::euclidean_division(&d1, &qpoly).unwrap();
                assert!(r.is_zero());
                assert_eq!(atilde.add(&v.mul(&qpoly)), xstar);
            }
        }
    }
}

/// Any two degree-n representatives of A mod Q have reversals in the same
/// class mod Q*: the difference of representatives is Q·(M₁−M₂), whose
/// reversal at length n is T^w·Q*·(M₁−M₂)* for some w ≥ 0, and T ∤ Q*
/// makes the extra power of T harmless.
#[test]
fn dual_class_is_independent_of_the_degree_n_representative() {
    for q in FIELDS {
        let field = field_of(q);
        let mut rng = ChaCha8Rng::seed_from_u64(0x2002 + q);
        for _ in 0..100 {
            let dq = rng.random_range(1..=3usize);
            let n = dq + rng.random_range(1..=3usize);
            let qpoly = rand_modulus(&mut rng, &field, dq);
            let qstar = star(&qpoly);
            let a = Poly::from_coeffs(
                &field,
                (0..dq).map(|_| rand_elem(&mut rng, &field)).collect(),
            );

            let canonical = degree_n_representative(&a, &qpoly, n);
            // A second valid representative: A₀ + Q·M with any monic M of
            // degree n − deg Q.
            let m2 = rand_monic_exact(&mut rng, &field, n - dq);
            let alt = polyring::rem(&a, &qpoly).unwrap().add(&qpoly.mul(&m2));
            assert_eq!(alt.degree(), Some(n));
            assert!(alt.is_monic());

            let diff = star(&canonical).sub(&star(&alt));
            assert!(
                divides(&qstar, &diff),
                "Ã* class mod Q* depends on the representative, q={q}"
            );
        }
    }
}

/// A ↦ Ã* maps the coprime classes mod Q bijectively onto the coprime
/// classes mod Q*, and preserves coprimality instance by instance.
#[test]
fn dual_map_is_a_bijection_on_coprime_classes() {
    for q in FIELDS {
        let field = field_of(q);
        let mut rng = ChaCha8Rng::seed_from_u64(0x2003 + q);
        for _ in 0..10 {
            let dq = rng.random_range(1..=2usize);
            let n = dq + rng.random_range(1..=2usize);
            let qpoly = rand_modulus(&mut rng, &field, dq);
            let qstar_monic = star(&qpoly).make_monic();

            let mut images = std::collections::BTreeSet::new();
            let mut count = 0u64;
            for r in 0..field.q().pow(dq as u32) {
                let a = polyring::unrank_below(&field, dq, r);
                if a.is_zero() || polyring::gcd(&a, &qpoly).degree() != Some(0) {
                    continue;
                }
                count += 1;
                let astar = star(&degree_n_representative(&a, &qpoly, n));
                assert_eq!(
                    polyring::gcd(&astar, &qstar_monic).degree(),
                    Some(0),
                    "Ã* not coprime to Q* despite (A,Q)=1, q={q}"
                );
                let class = polyring::rem(&astar, &qstar_monic).unwrap();
                images.insert(format!("{class:?}"));
            }
            assert_eq!(count, polyring::euler_phi(&qpoly).unwrap());
            assert_eq!(
                images.len() as u64,
                count,
                "A ↦ Ã* not injective on coprime classes, q={q}"
            );
            // φ(Q) = φ(Q*), so injectivity gives surjectivity.
            assert_eq!(
                polyring::euler_phi(&qstar_monic).unwrap(),
                count,
                "φ(Q*) != φ(Q), q={q}"
            );
        }
    }
}

/// The two-character orthogonality expansion of the hybrid count:
///
///   Ψ(T^{h+1}B, h; Q, A)
///     = (1/(φ(T^{n−h}) φ(Q*))) Σ_{χ mod T^{n−h}} Σ_{χ′ mod Q*}
///         conj(χ(B*)) conj(χ′(Ã*)) Σ_{deg N = n} χχ′(N) Λ(N),
///
/// where the inner sum runs over all (not only monic) N of degree n.
#[test]
fn orthogonality_expansion_reproduces_the_hybrid_count() {
    for q in FIELDS {
        let field = field_of(q);
        let (n, h) = if q == 3 { (4usize, 1usize) } else { (3, 0) };
        let db = n - h - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(0x2004 + q);

        // Shared machinery per field: unit groups and the Λ-support.
        let dq = 2usize;
        let qpoly = rand_modulus(&mut rng, &field, dq);
        let qstar_monic = star(&qpoly).make_monic();
        let tpow = Poly::monomial(&field, field.one(), n - h);
        let g_t = Arc::new(build_unit_group(&tpow).unwrap());
        let g_q = Arc::new(build_unit_group(&qstar_monic).unwrap());
        let chis_t = enumerate_characters(&g_t);
        let chis_q = enumerate_characters(&g_q);
        let support = polyring::lambda_support(&field, n).unwrap();
        let units: Vec<FieldElement> = field.units();

        // Precompute per-character value vectors over the Λ-support and the
        // field units, so the pair loop is a plain dot product.
        let tables_t: Vec<(Vec<Complex64>, Vec<Complex64>)> = chis_t
            .iter()
            .map(|chi| {
                (
                    support.iter().map(|(p, _)| chi.evaluate(p)).collect(),
                    units
                        .iter()
                        .map(|&c| chi.evaluate(&Poly::constant(&field, c)))
                        .collect(),
                )
            })
            .collect();
        let tables_q: Vec<(Vec<Complex64>, Vec<Complex64>)> = chis_q
            .iter()
            .map(|chi| {
                (
                    support.iter().map(|(p, _)| chi.evaluate(p)).collect(),
                    units
                        .iter()
                        .map(|&c| chi.evaluate(&Poly::constant(&field, c)))
                        .collect(),
                )
            })
            .collect();

        let phi_t = g_t.phi() as f64;
        let phi_q = g_q.phi() as f64;

        for _ in 0..20 {
            let b = rand_monic_exact(&mut rng, &field, db);
            let a = rand_coprime(&mut rng, &field, &qpoly);
            let atilde_star = star(&degree_n_representative(&a, &qpoly, n));
            let bstar = star(&b);

            let mut total = Complex64::new(0.0, 0.0);
            for (it, chi_t) in chis_t.iter().enumerate() {
                let cb = chi_t.evaluate(&bstar).conj();
                if cb.norm_sqr() == 0.0 {
                    continue;
                }
                for (iq, chi_q) in chis_q.iter().enumerate() {
                    let ca = chi_q.evaluate(&atilde_star).conj();
                    if ca.norm_sqr() == 0.0 {
                        continue;
                    }
                    // Σ over all N of degree n = (Σ over units c of χχ′(c))
                    //   · (Σ over monic N of χχ′(N) Λ(N)).
                    let mut unit_sum = Complex64::new(0.0, 0.0);
                    for k in 0..units.len() {
                        unit_sum += tables_t[it].1[k] * tables_q[iq].1[k];
                    }
                    let mut monic_sum = Complex64::new(0.0, 0.0);
                    for (k, (_, w)) in support.iter().enumerate() {
                        monic_sum += tables_t[it].0[k] * tables_q[iq].0[k] * (*w as f64);
                    }
                    total += cb * ca * unit_sum * monic_sum;
                }
            }
            let expansion = total / (phi_t * phi_q);

            let direct = psi_hybrid(&b.mul_t_power(h + 1), h, &qpoly, &a).unwrap() as f64;
            assert!(
                (expansion.re - direct).abs() < 1e-6 && expansion.im.abs() < 1e-6,
                "orthogonality expansion mismatch: q={q}, got {expansion}, want {direct}"
            );
        }
    }
}

/// Exact-degree centers split into unit multiples of monic centers:
/// summing |Ψ(T^{h+1}B, h; Q, A) − mean|² over all B of exact degree
/// n−h−1 equals (q−1) times the sum over monic B only.
#[test]
fn exact_degree_center_sum_is_unit_count_times_monic_sum() {
    for q in FIELDS {
        let field = field_of(q);
        let (n, h) = (3usize, 1usize);
        let db = n - h - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(0x2005 + q);
        let qpoly = rand_modulus(&mut rng, &field, 2);
        let mean = {
            let m = mean_value(n, h, &qpoly).unwrap();
            *m.numer() as f64 / *m.denom() as f64
        };

        let coprime_residues: Vec<Poly> = (0..field.q().pow(2))
            .map(|r| polyring::unrank_below(&field, 2, r))
            .filter(|a| !a.is_zero() && polyring::gcd(a, &qpoly).degree() == Some(0))
            .collect();

        let mut monic_sum = 0.0f64;
        let mut all_sum = 0.0f64;
        for r in 0..field.q().pow(db as u32) {
            let b_monic = polyring::unrank_monic(&field, db, r);
            for a in &coprime_residues {
                let v = psi_hybrid(&b_monic.mul_t_power(h + 1), h, &qpoly, a).unwrap() as f64;
                monic_sum += (v - mean) * (v - mean);
            }
            for c in field.units() {
                let b = b_monic.mul_elem(c);
                for a in &coprime_residues {
                    let v = psi_hybrid(&b.mul_t_power(h + 1), h, &qpoly, a).unwrap() as f64;
                    all_sum += (v - mean) * (v - mean);
                }
            }
        }
        let scaled = all_sum / (field.q() - 1) as f64;
        assert!(
            (scaled - monic_sum).abs() <= 1e-9 * monic_sum.max(1.0),
            "unit-scaling partition failed: q={q}, all/{} = {scaled}, monic = {monic_sum}",
            field.q() - 1
        );
    }
}
