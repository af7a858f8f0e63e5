//! Exploratory generalized Dirichlet series.
//!
//! For a progression character χ mod Q₁ and a short-interval character χ*
//! whose modulus is a power of T, the coefficient function
//!
//! ```text
//!     F(N) = χ(N) · χ*(N*),        N*(T) = T^{deg N} N(1/T),
//! ```
//!
//! is completely multiplicative on monic polynomials with N(0) ≠ 0, because
//! the coefficient-reversal involution is multiplicative there.  The series
//!
//! ```text
//!     C(u) = Σ_{n ≥ 0} c_n u^n,    c_n = Σ_{N monic, deg N = n, N(0) ≠ 0} F(N),
//! ```
//!
//! generalizes both the progression L-functions (χ* trivial) and the
//! short-interval sums (χ trivial).  Whether these hybrid series are rational
//! in u is not known in general; this module is an experiment harness, not a
//! theorem.  It computes the coefficients by direct enumeration, verifies
//! them against the truncated Euler product
//!
//! ```text
//!     C(u) = Π_{P ≠ T} (1 − F(P) u^{deg P})^{-1},
//! ```
//!
//! and probes for a finite linear recurrence (equivalently, rationality with
//! a bounded denominator) by windowed Hankel least squares.  Outcomes are
//! reported, never asserted: "no recurrence up to the probed order" is a
//! legitimate result, not an error.


use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::characters::DirichletCharacter;
use crate::error::{precondition, Error, Result};
use crate::numerics::{least_squares, polynomial_roots, KahanComplex};
use crate::polyring::{involution, irreducibles, unrank_monic, Poly, ENUM_BUDGET};

/// Ranks per parallel work unit when enumerating coefficients.
const RANK_CHUNK: u64 = 8192;

/// Tolerance for the Euler-product cross-check.
pub const EULER_TOL: f64 = 1e-6;

fn qpow128(q: u64, e: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..e {
        acc = acc.saturating_mul(q as u128);
    }
    acc
}

/// The exponent m when `modulus` = T^m with m ≥ 1, else None.
fn t_power_exponent(modulus: &Poly) -> Option<usize> {
    let m = modulus.degree()?;
    if m == 0 || !modulus.is_monic() {
        return None;
    }
    for i in 0..m {
        if modulus.coeff(i).rank() != 0 {
            return None;
        }
    }
    Some(m)
}

/// The coefficient function F(N) = χ(N)·χ*(N*).  Requires N(0) ≠ 0 so that
/// the reversal N* keeps the degree and stays a unit at T.
pub fn hybrid_value(
    chi: &DirichletCharacter,
    chi_star: &DirichletCharacter,
    n: &Poly,
) -> Result<Complex64> {
    if n.is_zero() || n.constant_term().rank() == 0 {
        return Err(precondition(
            "the generalized coefficient function requires N(0) ≠ 0",
        ));
    }
    let star = involution(n)?;
    Ok(chi.evaluate(n) * chi_star.evaluate(&star))
}

/// A truncated generalized series: coefficients c_0..c_nmax of
/// Σ χ(N)χ*(N*) u^{deg N} over monic N with N(0) ≠ 0.
#[derive(Debug, Clone)]
pub struct GenLSeries {
    pub chi: DirichletCharacter,
    pub chi_star: DirichletCharacter,
    /// c_0..c_nmax; c_0 = 1 (the empty product N = 1).
    pub coeffs: Vec<Complex64>,
    pub nmax: usize,
}

/// Direct enumeration of the first nmax+1 coefficients.
///
/// Preconditions: χ* has modulus T^m (m ≥ 1), both characters live over the
/// same field, and q^nmax is within the enumeration budget.  Each degree is
/// summed in fixed-size rank chunks that are reduced in chunk order, so the
/// result is bit-identical regardless of thread count.
pub fn genl_coefficients(
    chi: &DirichletCharacter,
    chi_star: &DirichletCharacter,
    nmax: usize,
) -> Result<GenLSeries> {
    if chi.modulus().field() != chi_star.modulus().field() {
        return Err(Error::MismatchedField);
    }
    if t_power_exponent(chi_star.modulus()).is_none() {
        return Err(precondition(
            "the short-interval twist must have modulus a power of T",
        ));
    }
    let field = chi.modulus().field().clone();
    let q = field.q();
    let work = qpow128(q, nmax);
    if work > ENUM_BUDGET {
        return Err(Error::Budget {
            what: "generalized series enumeration q^nmax",
            value: work,
            cap: ENUM_BUDGET,
        });
    }

    let mut coeffs = Vec::with_capacity(nmax + 1);
    coeffs.push(Complex64::new(1.0, 0.0));
    for n in 1..=nmax {
        // Constant coefficient is the most significant rank digit, so the
        // monics with N(0) = 0 occupy exactly the ranks below q^{n-1}.
        let start = (qpow128(q, n - 1)) as u64;
        let end = (qpow128(q, n)) as u64;
        let chunks: Vec<(u64, u64)> = {
            let mut v = Vec::new();
            let mut lo = start;
            while lo < end {
                let hi = (lo + RANK_CHUNK).min(end);
                v.push((lo, hi));
                lo = hi;
            }
            v
        };
        let partials: Vec<Complex64> = chunks
            .par_iter()
            .map(|&(lo, hi)| {
                let mut acc = KahanComplex::new();
                for r in lo..hi {
                    let f = unrank_monic(&field, n, r);
                    let v = chi.evaluate(&f);
                    if v.norm_sqr() == 0.0 {
                        continue;
                    }
                    // N(0) ≠ 0 here, so the reversal cannot fail.
                    let star = involution(&f).expect("nonzero polynomial");
                    acc.add(v * chi_star.evaluate(&star));
                }
                acc.value()
            })
            .collect();
        let mut total = KahanComplex::new();
        for p in partials {
            total.add(p);
        }
        let c = total.value();
        let bound = (q as f64).powi(n as i32) * (1.0 + 1e-9) + 1e-9;
        if c.norm() > bound {
            return Err(Error::RouteDisagreement(format!(
                "coefficient bound violated: |c_{n}| = {} exceeds q^{n}",
                c.norm()
            )));
        }
        coeffs.push(c);
    }
    Ok(GenLSeries {
        chi: chi.clone(),
        chi_star: chi_star.clone(),
        coeffs,
        nmax,
    })
}

/// Cross-checks the enumerated coefficients against the Euler product over
/// all monic irreducibles P ≠ T of degree ≤ degree_cut, expanded to degree
/// degree_cut.  Both sides agree exactly in exact arithmetic, because every
/// monic N with N(0) ≠ 0 and deg N ≤ degree_cut factors into such primes.
///
/// Returns the maximum coefficient deviation; deviations above `EULER_TOL`
/// are reported as a route disagreement (they would indicate a bug, not a
/// mathematical discovery).
pub fn euler_product_check(series: &GenLSeries, degree_cut: usize) -> Result<f64> {
    if degree_cut > series.nmax {
        return Err(precondition(
            "euler product check requires degree_cut ≤ nmax",
        ));
    }
    let field = series.chi.modulus().field().clone();
    let mut acc = vec![Complex64::new(0.0, 0.0); degree_cut + 1];
    acc[0] = Complex64::new(1.0, 0.0);
    for d in 1..=degree_cut {
        for p in irreducibles(&field, d)? {
            if p.constant_term().rank() == 0 {
                continue; // the prime T itself
            }
            let fp = hybrid_value(&series.chi, &series.chi_star, &p)?;
            // Multiply by (1 - fp·u^d)^{-1}, truncated: forward recurrence.
            for i in d..=degree_cut {
                let add = acc[i - d] * fp;
                acc[i] += add;
            }
        }
    }
    let mut dev: f64 = 0.0;
    for n in 0..=degree_cut {
        dev = dev.max((acc[n] - series.coeffs[n]).norm());
    }
    if dev > EULER_TOL {
        return Err(Error::RouteDisagreement(format!(
            "euler product deviates from direct enumeration by {dev:.3e} \
             within degree {degree_cut}"
        )));
    }
    Ok(dev)
}

/// One zero of the fitted recurrence denominator 1 − Σ x_j u^j, with its
/// modulus and the modulus rescaled by √q (so the critical circle
/// |u| = q^{-1/2} reads as 1.0 and the pole circle |u| = q^{-1} as q^{-1/2}).
#[derive(Debug, Clone, Serialize)]
pub struct ZeroInfo {
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    pub abs_times_sqrt_q: f64,
}

/// A linear recurrence c_n = Σ_{j=1}^{order} x_j c_{n-j} fitted over the
/// window n = order..=nmax.
#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceFit {
    pub order: usize,
    /// x_1..x_order as (re, im) pairs.
    pub coefficients: Vec<(f64, f64)>,
    /// max_n |replay − c_n| / max(1, |c_n|) over the fit window.
    pub residual: f64,
    /// Relative singular-value threshold used in the least-squares solve.
    pub threshold: f64,
    /// Singular values of the Hankel system, descending.
    pub singular_values: Vec<f64>,
    /// Zeros of the denominator 1 − Σ x_j u^j (trailing negligible
    /// coefficients trimmed first), sorted by modulus.
    pub zeros: Vec<ZeroInfo>,
}

/// Result of the rationality probe.  Finding no recurrence is a reported
/// outcome, not an error: for genuinely hybrid series it is one of the
/// possible answers to an open question.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RecurrenceOutcome {
    Found { fit: RecurrenceFit },
    NoRecurrence {
        max_order: usize,
        /// Order whose least-squares fit came closest.
        best_order: usize,
        best_residual: f64,
        /// Singular values of that best attempt, descending.
        singular_values: Vec<f64>,
    },
}

/// Searches for the smallest order r ≤ max_order such that a length-r
/// recurrence fits c_r..c_nmax with relative replay residual below `tol`.
/// Each candidate order is solved by least squares on the Hankel system with
/// relative singular-value threshold `tol`; fitting is single-threaded.
///
/// Requires nmax ≥ 2·max_order + 4 so every candidate system is comfortably
/// overdetermined.
pub fn detect_recurrence(
    series: &GenLSeries,
    max_order: usize,
    tol: f64,
) -> Result<RecurrenceOutcome> {
    if max_order == 0 {
        return Err(precondition("recurrence probe requires max_order ≥ 1"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(precondition("recurrence tolerance must be positive"));
    }
    if series.nmax < 2 * max_order + 4 {
        return Err(precondition(format!(
            "recurrence probe requires nmax ≥ 2·max_order + 4 \
             (got nmax = {}, max_order = {})",
            series.nmax, max_order
        )));
    }
    let c = &series.coeffs;
    let nmax = series.nmax;
    let q = series.chi.modulus().field().q();
    let sqrt_q = (q as f64).sqrt();

    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for r in 1..=max_order {
        let rows: Vec<Vec<Complex64>> = (r..=nmax)
            .map(|n| (1..=r).map(|j| c[n - j]).collect())
            .collect();
        let rhs: Vec<Complex64> = (r..=nmax).map(|n| c[n]).collect();
        let (x, singular_values) = least_squares(&rows, &rhs, tol);
        let mut residual: f64 = 0.0;
        for n in r..=nmax {
            let mut pred = Complex64::new(0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                pred += xj * c[n - 1 - j];
            }
            let rel = (pred - c[n]).norm() / c[n].norm().max(1.0);
            residual = residual.max(rel);
        }
        if residual < tol {
            let coefficients: Vec<(f64, f64)> = x.iter().map(|z| (z.re, z.im)).collect();
            // Denominator 1 − Σ x_j u^j; trim negligible trailing terms so
            // the root finder sees a genuine leading coefficient.
            let mut denom: Vec<Complex64> = Vec::with_capacity(r + 1);
            denom.push(Complex64::new(1.0, 0.0));
            for xj in &x {
                denom.push(-xj);
            }
            // Coefficients are only determined up to least-squares noise, so
            // trailing terms below 1e-6 of the largest are treated as zero;
            // keeping them would manufacture spurious far-out roots.
            let maxabs = denom.iter().map(|z| z.norm()).fold(0.0, f64::max);
            while denom.len() > 1 && denom.last().unwrap().norm() <= 1e-6 * maxabs {
                denom.pop();
            }
            let mut zeros: Vec<ZeroInfo> = polynomial_roots(&denom)?
                .into_iter()
                .map(|z| ZeroInfo {
                    re: z.re,
                    im: z.im,
                    abs: z.norm(),
                    abs_times_sqrt_q: z.norm() * sqrt_q,
                })
                .collect();
            zeros.sort_by(|a, b| {
                (a.abs, a.re, a.im)
                    .partial_cmp(&(b.abs, b.re, b.im))
                    .unwrap()
            });
            return Ok(RecurrenceOutcome::Found {
                fit: RecurrenceFit {
                    order: r,
                    coefficients,
                    residual,
                    threshold: tol,
                    singular_values,
                    zeros,
                },
            });
        }
        match &best {
            Some((_, b, _)) if *b <= residual => {}
            _ => best = Some((r, residual, singular_values)),
        }
    }
    let (best_order, best_residual, singular_values) = best.expect("max_order ≥ 1");
    Ok(RecurrenceOutcome::NoRecurrence {
        max_order,
        best_order,
        best_residual,
        singular_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::characters::{enumerate_characters, trivial_character};
    use crate::field::{construct_field, FiniteField};
    use crate::lfunctions::l_polynomial;
    use crate::polyring::parse_poly;
    use crate::unitgroup::{build_unit_group, UnitGroup};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn group_of(field: &FiniteField, s: &str) -> Arc<UnitGroup> {
        let q = parse_poly(field, s).unwrap();
        Arc::new(build_unit_group(&q).unwrap())
    }

    /// With both characters trivial (χ mod T, χ* mod T^2), the coefficients
    /// count monics with nonzero constant term: c_n = q^n − q^{n-1}.  The
    /// probe must find the order-2 recurrence c_n = q·c_{n-1} (the order-1
    /// window would need c_1 = q·c_0, which fails), with denominator zero at
    /// u = 1/q — the pole of the zeta-like series.
    #[test]
    fn trivial_pair_counts_and_recurrence() {
        let field = construct_field(3, 1).unwrap();
        let chi = trivial_character(&group_of(&field, "T"));
        let chistar = trivial_character(&group_of(&field, "T^2"));
        let series = genl_coefficients(&chi, &chistar, 10).unwrap();
        assert_eq!(series.coeffs.len(), 11);
        assert!((series.coeffs[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for n in 1..=10usize {
            let expect = 3f64.powi(n as i32) - 3f64.powi(n as i32 - 1);
            assert!(
                (series.coeffs[n] - Complex64::new(expect, 0.0)).norm() < 1e-9,
                "c_{n} should equal q^n - q^(n-1)"
            );
        }
        let dev = euler_product_check(&series, 6).unwrap();
        assert!(dev < 1e-9);

        match detect_recurrence(&series, 3, 1e-8).unwrap() {
            RecurrenceOutcome::Found { fit } => {
                // Coefficient recovery is limited by the conditioning of the
                // normal equations, so 1e-5 here, while the replay residual
                // stays at the requested 1e-8.
                assert_eq!(fit.order, 2);
                assert!((fit.coefficients[0].0 - 3.0).abs() < 1e-5);
                assert!(fit.coefficients[0].1.abs() < 1e-5);
                assert!(fit.coefficients[1].0.abs() < 1e-5);
                assert!(fit.residual < 1e-8);
                assert_eq!(fit.zeros.len(), 1);
                let z = &fit.zeros[0];
                assert!((z.re - 1.0 / 3.0).abs() < 1e-5 && z.im.abs() < 1e-5);
                assert!((z.abs_times_sqrt_q - 3f64.sqrt() / 3.0).abs() < 1e-4);
            }
            other => panic!("expected a recurrence, got {other:?}"),
        }
    }

    /// With χ* trivial the series collapses to the classical progression
    /// L-function with its T-Euler-factor removed:
    /// Σ c_n u^n = L(u,χ)·(1 − χ(T)u), a polynomial.  The minimal windowed
    /// recurrence for a polynomial series is the zero recurrence of order
    /// deg + 1 (any shorter order would need the generating polynomial to
    /// keep vanishing past its own degree), so the probe must report that
    /// order, all-zero coefficients, and no denominator zeros.
    #[test]
    fn classical_reduction_matches_l_polynomial() {
        let field = construct_field(3, 1).unwrap();
        let group = group_of(&field, "T^2+1");
        let chi = enumerate_characters(&group)[1].clone();
        let chistar = trivial_character(&group_of(&field, "T"));
        let series = genl_coefficients(&chi, &chistar, 12).unwrap();

        let lp = l_polynomial(&chi).unwrap();
        let t = parse_poly(&field, "T").unwrap();
        let chi_t = chi.evaluate(&t);
        let mut expected = vec![Complex64::new(0.0, 0.0); series.nmax + 1];
        for (i, &li) in lp.coeffs.iter().enumerate() {
            expected[i] += li;
            if i + 1 <= series.nmax {
                expected[i + 1] -= chi_t * li;
            }
        }
        for n in 0..=series.nmax {
            assert!(
                (series.coeffs[n] - expected[n]).norm() < 1e-9,
                "coefficient {n} disagrees with L(u,χ)(1-χ(T)u)"
            );
        }
        euler_product_check(&series, 6).unwrap();

        let deg_s = expected
            .iter()
            .rposition(|z| z.norm() > 1e-9)
            .expect("nonzero series");
        match detect_recurrence(&series, 4, 1e-6).unwrap() {
            RecurrenceOutcome::Found { fit } => {
                assert_eq!(fit.order, deg_s + 1);
                for (re, im) in &fit.coefficients {
                    assert!(re.abs() < 1e-6 && im.abs() < 1e-6);
                }
                assert!(fit.zeros.is_empty());
            }
            other => panic!("expected the zero recurrence, got {other:?}"),
        }
    }

    /// F(N) = χ(N)χ*(N*) is completely multiplicative on monics with
    /// nonzero constant term, because the reversal involution is.
    #[test]
    fn hybrid_value_is_multiplicative() {
        let field = construct_field(3, 1).unwrap();
        let chi = enumerate_characters(&group_of(&field, "T^2+1"))[1].clone();
        let chistar = enumerate_characters(&group_of(&field, "T^3"))[1].clone();
        assert!(!chistar.is_trivial());

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let random_monic = |rng: &mut ChaCha8Rng| {
            let d = rng.random_range(1..=5usize);
            let mut ints = vec![0i64; d + 1];
            ints[0] = rng.random_range(1..3i64);
            for item in ints.iter_mut().take(d).skip(1) {
                *item = rng.random_range(0..3i64);
            }
            ints[d] = 1;
            Poly::from_ints(&field, &ints)
        };
        for _ in 0..1000 {
            let a = random_monic(&mut rng);
            let b = random_monic(&mut rng);
            let ab = a.mul(&b);
            let lhs = hybrid_value(&chi, &chistar, &ab).unwrap();
            let rhs =
                hybrid_value(&chi, &chistar, &a).unwrap() * hybrid_value(&chi, &chistar, &b).unwrap();
            assert!((lhs - rhs).norm() < 1e-9);
        }
    }

    /// A genuinely hybrid pair must run end to end: coefficients within the
    /// q^n bound, Euler product consistent, probe returning some outcome,
    /// and the whole pipeline bit-identical across runs.
    #[test]
    fn hybrid_pair_reports_deterministically() {
        let field = construct_field(3, 1).unwrap();
        let chi = enumerate_characters(&group_of(&field, "T^2+1"))[1].clone();
        let chistar = enumerate_characters(&group_of(&field, "T^3"))[1].clone();

        let a = genl_coefficients(&chi, &chistar, 10).unwrap();
        let b = genl_coefficients(&chi, &chistar, 10).unwrap();
        for n in 0..=10usize {
            assert_eq!(a.coeffs[n].re.to_bits(), b.coeffs[n].re.to_bits());
            assert_eq!(a.coeffs[n].im.to_bits(), b.coeffs[n].im.to_bits());
            assert!(a.coeffs[n].norm() <= 3f64.powi(n as i32) + 1e-6);
        }
        euler_product_check(&a, 5).unwrap();
        match detect_recurrence(&a, 3, 1e-6).unwrap() {
            RecurrenceOutcome::Found { fit } => assert!(fit.residual < 1e-6),
            RecurrenceOutcome::NoRecurrence { best_residual, .. } => {
                assert!(best_residual >= 1e-6)
            }
        }
    }

    /// Tampering with a coefficient must trip the Euler cross-check.
    #[test]
    fn euler_check_flags_tampered_series() {
        let field = construct_field(3, 1).unwrap();
        let chi = trivial_character(&group_of(&field, "T"));
        let chistar = trivial_character(&group_of(&field, "T^2"));
        let mut series = genl_coefficients(&chi, &chistar, 6).unwrap();
        series.coeffs[3] += Complex64::new(0.01, 0.0);
        match euler_product_check(&series, 6) {
            Err(Error::RouteDisagreement(_)) => {}
            other => panic!("expected a route disagreement, got {other:?}"),
        }
    }

    #[test]
    fn preconditions_and_budget_are_enforced() {
        let field = construct_field(3, 1).unwrap();
        let chi = trivial_character(&group_of(&field, "T"));
        let good_star = trivial_character(&group_of(&field, "T^2"));
        let bad_star = trivial_character(&group_of(&field, "T+1"));

        match genl_coefficients(&chi, &bad_star, 4) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("power of T")),
            other => panic!("expected a precondition error, got {other:?}"),
        }
        match genl_coefficients(&chi, &good_star, 60) {
            Err(e) => assert!(e.is_budget()),
            Ok(_) => panic!("expected a budget error"),
        }

        let series = genl_coefficients(&chi, &good_star, 8).unwrap();
        assert!(matches!(
            detect_recurrence(&series, 3, 1e-6),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            euler_product_check(&series, 9),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            hybrid_value(&chi, &good_star, &parse_poly(&field, "T^2+T").unwrap()),
            Err(Error::Precondition(_))
        ));
    }
}
