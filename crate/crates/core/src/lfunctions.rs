//! Dirichlet L-polynomials over F_q[T], their completed form, unitarized
//! Frobenius eigenphases, traces, and the two independent trace routes.
//!
//! For nontrivial χ mod Q the series Σ_n (Σ_{N∈M_n} χ(N)) u^n terminates at
//! degree deg Q − 1.  For primitive χ the completed polynomial divides out
//! the trivial zero at u = 1 when χ is even, leaving degree
//! d = deg Q − 1 − λ_χ whose inverse roots all have modulus q^{1/2}; the
//! normalized root phases form the spectrum used throughout the variance
//! experiments.

use num_complex::Complex64;

use crate::characters::DirichletCharacter;
use crate::error::{precondition, Error, Result};
use crate::numerics::{polynomial_roots, KahanComplex};
use crate::polyring::{enumerate_monic, lambda_support};

/// Numerical tolerance for identities that are exact in exact arithmetic.
pub const IDENTITY_TOL: f64 = 1e-6;

/// Allowed relative deviation of inverse-root magnitudes from q^{1/2}.
pub const RH_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct LPolynomial {
    pub character: DirichletCharacter,
    /// c_0..c_D with c_n = Σ_{N ∈ M_n} χ(N); c_0 = 1.
    pub coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct FrobeniusSpectrum {
    pub character: DirichletCharacter,
    /// deg Q − 1 − λ_χ.
    pub d: usize,
    /// Eigenphases θ_1 ≤ ... ≤ θ_d in [0, 2π).
    pub phases: Vec<f64>,
    /// max_j ||α_j| − q^{1/2}| / q^{1/2} over the inverse roots α_j.
    pub rh_max_deviation: f64,
}

/// L(u,χ) as a coefficient vector, by direct monic enumeration degree by
/// degree.  One coefficient beyond deg Q − 1 is computed and must vanish
/// (nontrivial χ); the trivial character has no finite L-polynomial.
pub fn l_polynomial(chi: &DirichletCharacter) -> Result<LPolynomial> {
    if chi.is_trivial() {
        return Err(Error::NoFiniteLPolynomial);
    }
    let group = chi.group();
    let field = group.field().clone();
    let deg_q = group.modulus().degree().unwrap();
    let mut coeffs = Vec::with_capacity(deg_q);
    for n in 0..=deg_q {
        let mut acc = KahanComplex::new();
        for npoly in enumerate_monic(&field, n)? {
            acc.add(chi.evaluate(&npoly));
        }
        coeffs.push(acc.value());
    }
    let tail = coeffs.pop().unwrap();
    if tail.norm() > IDENTITY_TOL {
        return Err(Error::RouteDisagreement(format!(
            "L-coefficient beyond degree {} has magnitude {:.3e}, expected 0",
            deg_q - 1,
            tail.norm()
        )));
    }
    Ok(LPolynomial {
        character: chi.clone(),
        coeffs,
    })
}

/// Completed L-polynomial: for even primitive χ divide out the trivial zero
/// (1 − u); odd primitive χ passes through unchanged.  The resulting degree
/// is d = deg Q − 1 − λ_χ.
pub fn completed_l(l: &LPolynomial) -> Result<LPolynomial> {
    let chi = &l.character;
    if !chi.is_primitive() || chi.is_trivial() {
        return Err(Error::CompletionRequiresPrimitive);
    }
    if chi.is_odd() {
        return Ok(l.clone());
    }
    // L(u) = (1 − u)·L*(u): L* coefficients are the partial sums of L's,
    // and the full sum L(1) is the division remainder.
    let mut partial = Complex64::new(0.0, 0.0);
    let mut coeffs = Vec::with_capacity(l.coeffs.len().saturating_sub(1));
    for (i, c) in l.coeffs.iter().enumerate() {
        partial += c;
        if i + 1 < l.coeffs.len() {
            coeffs.push(partial);
        }
    }
    if partial.norm() > IDENTITY_TOL {
        return Err(Error::TrivialZeroStructure {
            remainder: partial.norm(),
        });
    }
    Ok(LPolynomial {
        character: chi.clone(),
        coeffs,
    })
}

/// Eigenphases of the unitarized Frobenius: roots u_j of the completed
/// polynomial give inverse roots α_j = 1/u_j with |α_j| = q^{1/2}; the
/// phases of α_j/q^{1/2} are sorted ascending in [0, 2π).
pub fn frobenius_spectrum(chi: &DirichletCharacter) -> Result<FrobeniusSpectrum> {
    let l = l_polynomial(chi)?;
    let lstar = completed_l(&l)?;
    let d = lstar.coeffs.len().saturating_sub(1);
    let q = chi.group().field().q() as f64;
    let sqrt_q = q.sqrt();
    let mut phases = Vec::with_capacity(d);
    let mut rh_max_deviation = 0.0f64;
    if d > 0 {
        let roots = polynomial_roots(&lstar.coeffs)?;
        for u in roots {
            if u.norm() < 1e-12 {
                // An L-polynomial has constant term 1, so a root at the
                // origin means the solver failed outright.
                return Err(Error::RootFinder {
                    residual: f64::INFINITY,
                });
            }
            let alpha = u.inv();
            let dev = (alpha.norm() - sqrt_q).abs() / sqrt_q;
            rh_max_deviation = rh_max_deviation.max(dev);
            if dev > RH_TOL {
                return Err(Error::RhViolation { deviation: dev });
            }
            let mut theta = (alpha / sqrt_q).arg();
            if theta < 0.0 {
                theta += 2.0 * std::f64::consts::PI;
            }
            if theta >= 2.0 * std::f64::consts::PI {
                theta -= 2.0 * std::f64::consts::PI;
            }
            phases.push(theta);
        }
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    Ok(FrobeniusSpectrum {
        character: chi.clone(),
        d,
        phases,
        rh_max_deviation,
    })
}

impl FrobeniusSpectrum {
    /// Σ_j e^(i n θ_j).
    pub fn trace_power(&self, n: u32) -> Complex64 {
        let mut acc = KahanComplex::new();
        for &theta in &self.phases {
            acc.add(Complex64::from_polar(1.0, n as f64 * theta));
        }
        acc.value()
    }
}

/// Σ χ(N)Λ(N) over degree-n polynomials, monic only or all leading
/// coefficients.  For even χ the all-polynomial sum is (q−1) times the monic
/// sum; for odd χ it vanishes.
pub fn psi_chi(chi: &DirichletCharacter, n: usize, monic_only: bool) -> Result<Complex64> {
    if n == 0 {
        return Err(precondition("psi requires n ≥ 1"));
    }
    let group = chi.group();
    let field = group.field().clone();
    let support = lambda_support(&field, n)?;
    let mut acc = KahanComplex::new();
    if monic_only {
        for (npoly, w) in &support {
            let v = chi.evaluate(npoly);
            acc.add(v * *w as f64);
        }
    } else {
        for c in field.units() {
            for (npoly, w) in &support {
                let v = chi.evaluate(&npoly.mul_elem(c));
                acc.add(v * *w as f64);
            }
        }
    }
    Ok(acc.value())
}

/// tr Θ^n_χ by the spectrum route, cross-checked against the explicit
/// formula −q^{−n/2}(Σ_{M_n} χ(N)Λ(N) + λ_χ); disagreement beyond
/// 10^{-6}·max(d,1) is an error.  n = 0 returns d.
pub fn trace_theta(chi: &DirichletCharacter, n: u32) -> Result<Complex64> {
    let spectrum = frobenius_spectrum(chi)?;
    trace_theta_from_spectrum(&spectrum, n)
}

/// Same cross-check when the spectrum is already at hand.
pub fn trace_theta_from_spectrum(spectrum: &FrobeniusSpectrum, n: u32) -> Result<Complex64> {
    if n == 0 {
        return Ok(Complex64::new(spectrum.d as f64, 0.0));
    }
    let chi = &spectrum.character;
    let spectral = spectrum.trace_power(n);
    let q = chi.group().field().q() as f64;
    let psi = psi_chi(chi, n as usize, true)?;
    let explicit = -(psi + chi.lambda_chi() as f64) / q.powf(n as f64 / 2.0);
    let tol = IDENTITY_TOL * (spectrum.d.max(1) as f64);
    if (spectral - explicit).norm() > tol {
        return Err(Error::ExplicitFormulaMismatch {
            spectrum: (spectral.re, spectral.im),
            explicit: (explicit.re, explicit.im),
            tol,
        });
    }
    Ok(spectral)
}
