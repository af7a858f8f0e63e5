//! Dirichlet characters modulo a polynomial Q: enumeration over the unit
//! group's generator basis, even/odd and primitive classification, and the
//! census counts.
//!
//! A character is stored as its exponent vector (a_1..a_k) with
//! χ(g_i) = e(a_i/m_i).  Values are exact phases t ∈ [0, L) with L the group
//! exponent, converted to complex doubles only at accumulation time through a
//! shared root-of-unity table.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{precondition, Result};
use crate::polyring::{self, Poly};
use crate::unitgroup::UnitGroup;

impl std::fmt::Debug for DirichletCharacter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "DirichletCharacter(mod {}, exps = {:?})",
            self.group.modulus(),
            self.exps
        )
    }
}

#[derive(Clone)]
pub struct DirichletCharacter {
    group: Arc<UnitGroup>,
    exps: Vec<u32>,
    /// weights[i] = exps[i] * (L / m_i): phase of u is Σ weights[i]·dlog_i mod L.
    weights: Vec<u64>,
    even: bool,
    primitive: OnceLock<bool>,
    cis: Arc<OnceLock<Vec<Complex64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct CharacterCensus {
    pub total: u64,
    pub even: u64,
    pub primitive_even: u64,
    pub nonprimitive_even: u64,
}

fn weights_for(group: &UnitGroup, exps: &[u32]) -> Vec<u64> {
    let l = group.exponent();
    group
        .orders()
        .iter()
        .zip(exps)
        .map(|(&m, &a)| a as u64 * (l / m))
        .collect()
}

fn phase_dot(weights: &[u64], dlog: &[u32], l: u64) -> u64 {
    let mut t = 0u64;
    for (w, &d) in weights.iter().zip(dlog) {
        t += w * d as u64;
    }
    t % l
}

impl DirichletCharacter {
    fn new(
        group: Arc<UnitGroup>,
        exps: Vec<u32>,
        cis: Arc<OnceLock<Vec<Complex64>>>,
    ) -> DirichletCharacter {
        let weights = weights_for(&group, &exps);
        let even = phase_dot(&weights, group.constant_gen_dlog(), group.exponent()) == 0;
        DirichletCharacter {
            group,
            exps,
            weights,
            even,
            primitive: OnceLock::new(),
            cis,
        }
    }

    pub fn group(&self) -> &Arc<UnitGroup> {
        &self.group
    }

    pub fn modulus(&self) -> &Poly {
        self.group.modulus()
    }

    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    pub fn is_trivial(&self) -> bool {
        self.exps.iter().all(|&a| a == 0)
    }

    /// Even = trivial on the constants F_q^*.
    pub fn is_even(&self) -> bool {
        self.even
    }

    pub fn is_odd(&self) -> bool {
        !self.even
    }

    /// 1 for even characters, 0 for odd.
    pub fn lambda_chi(&self) -> u32 {
        self.even as u32
    }

    /// Primitive = not induced from any proper divisor of Q, i.e. nontrivial
    /// on every subgroup { u ≡ 1 mod Q/P } for P | Q.
    pub fn is_primitive(&self) -> bool {
        *self.primitive.get_or_init(|| {
            let l = self.group.exponent();
            self.group.prime_cosets().iter().all(|(_, coset)| {
                coset
                    .iter()
                    .any(|dlog| phase_dot(&self.weights, dlog, l) != 0)
            })
        })
    }

    /// Denominator of the exact phases: the unit-group exponent L.
    pub fn phase_denominator(&self) -> u64 {
        self.group.exponent()
    }

    /// Exact phase t ∈ [0, L) of the unit with the given table index.
    pub fn phase_of_unit(&self, idx: u32) -> u64 {
        phase_dot(&self.weights, self.group.dlog_of_index(idx), self.group.exponent())
    }

    fn cis_table(&self) -> &[Complex64] {
        self.cis.get_or_init(|| {
            let l = self.group.exponent();
            (0..l)
                .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / l as f64))
                .collect()
        })
    }

    /// e(t/L) for an exact phase t.
    pub fn cis(&self, t: u64) -> Complex64 {
        self.cis_table()[t as usize]
    }

    pub fn evaluate_unit(&self, idx: u32) -> Complex64 {
        let t = self.phase_of_unit(idx);
        self.cis(t)
    }

    /// χ(N): zero when gcd(N, Q) ≠ 1.
    pub fn evaluate(&self, n: &Poly) -> Complex64 {
        match self.group.unit_index(n) {
            Ok(idx) => self.evaluate_unit(idx),
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }
}

/// All φ(Q) characters mod Q in lexicographic exponent order; the first is
/// the trivial character.  They share one lazily built root-of-unity table.
pub fn enumerate_characters(group: &Arc<UnitGroup>) -> Vec<DirichletCharacter> {
    let cis: Arc<OnceLock<Vec<Complex64>>> = Arc::new(OnceLock::new());
    let orders = group.orders().to_vec();
    let k = orders.len();
    let mut out = Vec::with_capacity(group.phi() as usize);
    let mut exps = vec![0u32; k];
    loop {
        out.push(DirichletCharacter::new(
            group.clone(),
            exps.clone(),
            cis.clone(),
        ));
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            exps[pos] += 1;
            if (exps[pos] as u64) < orders[pos] {
                break;
            }
            exps[pos] = 0;
        }
        if exps.iter().all(|&e| e == 0) {
            return out;
        }
    }
}

pub fn trivial_character(group: &Arc<UnitGroup>) -> DirichletCharacter {
    let k = group.num_generators();
    DirichletCharacter::new(group.clone(), vec![0; k], Arc::new(OnceLock::new()))
}

/// Character with the given exponent vector (a_i < m_i required).
pub fn character_from_exps(group: &Arc<UnitGroup>, exps: Vec<u32>) -> Result<DirichletCharacter> {
    if exps.len() != group.num_generators() {
        return Err(precondition("exponent vector length must match generator count"));
    }
    for (a, &m) in exps.iter().zip(group.orders()) {
        if *a as u64 >= m {
            return Err(precondition("character exponent out of range"));
        }
    }
    Ok(DirichletCharacter::new(
        group.clone(),
        exps,
        Arc::new(OnceLock::new()),
    ))
}

/// Census by direct flag enumeration over all φ(Q) characters.
pub fn character_census(group: &Arc<UnitGroup>) -> CharacterCensus {
    let orders = group.orders().to_vec();
    let k = orders.len();
    let l = group.exponent();
    let cg = group.constant_gen_dlog().to_vec();
    let cosets = group.prime_cosets();
    let mut total = 0u64;
    let mut even = 0u64;
    let mut primitive_even = 0u64;
    let mut exps = vec![0u32; k];
    loop {
        total += 1;
        let weights = weights_for(group, &exps);
        if phase_dot(&weights, &cg, l) == 0 {
            even += 1;
            let primitive = cosets
                .iter()
                .all(|(_, coset)| coset.iter().any(|d| phase_dot(&weights, d, l) != 0));
            if primitive {
                primitive_even += 1;
            }
        }
        let mut pos = k;
        let mut done = false;
        loop {
            if pos == 0 {
                done = true;
                break;
            }
            pos -= 1;
            exps[pos] += 1;
            if (exps[pos] as u64) < orders[pos] {
                break;
            }
            exps[pos] = 0;
        }
        if done || exps.iter().all(|&e| e == 0) {
            break;
        }
    }
    CharacterCensus {
        total,
        even,
        primitive_even,
        nonprimitive_even: even - primitive_even,
    }
}

/// Closed-form primitive-even count: (Σ_{D|Q} μ(D) φ(Q/D) + μ(Q)(q−2)) / (q−1).
///
/// The divisor sum counts all primitive characters; evenness cuts it by
/// (q−1) except for the trivial-conductor term, which is a whole even
/// character rather than 1/(q−1) of one — hence the μ(Q)(q−2) correction,
/// which vanishes unless Q is squarefree.
pub fn primitive_even_count(modulus: &Poly) -> Result<u64> {
    if modulus.degree().map_or(true, |d| d < 1) {
        return Err(precondition("primitive-even count requires deg Q ≥ 1"));
    }
    let q = modulus.field().q() as i128;
    let monic = modulus.make_monic();
    let mut s: i128 = 0;
    for d in polyring::monic_divisors(&monic)? {
        let mu = polyring::mobius(&d)? as i128;
        if mu == 0 {
            continue;
        }
        let (quot, _) = polyring::euclidean_division(&monic, &d)?;
        s += mu * polyring::euler_phi(&quot)? as i128;
    }
    s += polyring::mobius(&monic)? as i128 * (q - 2);
    debug_assert!(s % (q - 1) == 0 && s >= 0);
    Ok((s / (q - 1)) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::construct_field;
    use crate::polyring::{enumerate_below, gcd, parse_poly, rem};
    use crate::unitgroup::build_unit_group;

    fn group_for(q: (u64, u32), s: &str) -> Arc<UnitGroup> {
        let f = construct_field(q.0, q.1).unwrap();
        let m = parse_poly(&f, s).unwrap();
        Arc::new(build_unit_group(&m).unwrap())
    }

    #[test]
    fn orthogonality_relations() {
        for (q, s) in [((3, 1), "0,0,1"), ((3, 1), "1,1,1"), ((5, 1), "0,1,1")] {
            let g = group_for(q, s);
            let chars = enumerate_characters(&g);
            assert_eq!(chars.len() as u64, g.phi());
            // Column orthogonality: Σ_χ χ(a) conj(χ(b)) = φ·[a = b].
            for a in 0..g.phi() as u32 {
                for b in 0..g.phi() as u32 {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for chi in &chars {
                        sum += chi.evaluate_unit(a) * chi.evaluate_unit(b).conj();
                    }
                    let expect = if a == b { g.phi() as f64 } else { 0.0 };
                    assert!((sum.re - expect).abs() < 1e-9 && sum.im.abs() < 1e-9);
                }
            }
            // Row orthogonality: Σ_u χ(u) = 0 for nontrivial χ.
            for chi in chars.iter().skip(1) {
                let mut sum = Complex64::new(0.0, 0.0);
                for idx in 0..g.phi() as u32 {
                    sum += chi.evaluate_unit(idx);
                }
                assert!(sum.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn even_iff_trivial_on_all_constants() {
        let g = group_for((5, 1), "1,1,1");
        let f = g.field().clone();
        for chi in enumerate_characters(&g) {
            let mut trivial_on_constants = true;
            for c in f.units() {
                let v = chi.evaluate(&Poly::constant(&f, c));
                if (v - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
                    trivial_on_constants = false;
                }
            }
            assert_eq!(chi.is_even(), trivial_on_constants);
            assert_eq!(chi.lambda_chi(), chi.is_even() as u32);
        }
    }

    #[test]
    fn primitive_flag_matches_induction_oracle() {
        // χ is induced mod a proper divisor D iff it is trivial on
        // { u ≡ 1 mod D, gcd(u, Q) = 1 }.
        for (q, s) in [((3, 1), "0,0,1,1"), ((3, 1), "0,1,1"), ((5, 1), "0,0,1")] {
            let g = group_for(q, s);
            let f = g.field().clone();
            let modulus = g.modulus().clone();
            let divisors = polyring::monic_divisors(&modulus).unwrap();
            for chi in enumerate_characters(&g) {
                let mut induced_proper = false;
                for d in &divisors {
                    if d == &modulus {
                        continue;
                    }
                    let mut trivial_on = true;
                    let cof = polyring::euclidean_division(&modulus, d).unwrap().0;
                    for s in enumerate_below(&f, cof.degree().unwrap_or(0)).unwrap() {
                        let u = rem(&Poly::one(&f).add(&d.mul(&s)), &modulus).unwrap();
                        if gcd(&u, &modulus).degree() != Some(0) {
                            continue;
                        }
                        if (chi.evaluate(&u) - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
                            trivial_on = false;
                            break;
                        }
                    }
                    if trivial_on {
                        induced_proper = true;
                        break;
                    }
                }
                assert_eq!(chi.is_primitive(), !induced_proper, "exps {:?}", chi.exps());
            }
        }
    }

    #[test]
    fn census_worked_examples() {
        // T^2 over F_3: 6 characters, 3 even, 2 primitive even.
        let g = group_for((3, 1), "0,0,1");
        let c = character_census(&g);
        assert_eq!(
            c,
            CharacterCensus {
                total: 6,
                even: 3,
                primitive_even: 2,
                nonprimitive_even: 1
            }
        );
        assert_eq!(primitive_even_count(g.modulus()).unwrap(), 2);

        // T^2(T+1) over F_3: primitive-even count 2.
        let g = group_for((3, 1), "0,0,1,1");
        let c = character_census(&g);
        assert_eq!(c.total, 12);
        assert_eq!(c.even, 6);
        assert_eq!(c.primitive_even, 2);
        assert_eq!(primitive_even_count(g.modulus()).unwrap(), 2);
    }

    #[test]
    fn census_formula_matches_scan() {
        let cases: [((u64, u32), &str); 8] = [
            ((3, 1), "0,1"),       // T (degree 1)
            ((3, 1), "0,1,1"),     // T(T+1) squarefree: correction term active
            ((3, 1), "1,0,1"),     // irreducible quadratic
            ((3, 1), "0,0,0,1"),   // T^3
            ((3, 1), "2,1,1,1"),   // mixed cubic
            ((5, 1), "0,1,1"),     // T(T+1) over F_5
            ((5, 1), "2,0,1"),     // irreducible quadratic over F_5
            ((2, 2), "1.0,1.0,1.0"), // quadratic over F_4
        ];
        for (q, s) in cases {
            let g = group_for(q, s);
            let c = character_census(&g);
            let qn = g.field().q();
            assert_eq!(c.total, g.phi());
            assert_eq!(c.even, g.phi() / (qn - 1), "even count {s}");
            assert_eq!(
                primitive_even_count(g.modulus()).unwrap(),
                c.primitive_even,
                "formula vs scan for {s}"
            );
        }
    }

    #[test]
    fn trivial_character_values() {
        let g = group_for((3, 1), "1,1,1");
        let chi = trivial_character(&g);
        assert!(chi.is_trivial() && chi.is_even());
        assert!(!chi.is_primitive());
        let f = g.field().clone();
        let t = parse_poly(&f, "0,1").unwrap();
        // gcd(T, T^2+T+1) = 1 so χ_0(T) = 1.
        assert!((chi.evaluate(&t) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // Non-unit maps to 0.
        let m = g.modulus().clone();
        assert_eq!(chi.evaluate(&m), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn exps_roundtrip_and_validation() {
        let g = group_for((3, 1), "0,0,1");
        let chars = enumerate_characters(&g);
        for chi in &chars {
            let again = character_from_exps(&g, chi.exps().to_vec()).unwrap();
            assert_eq!(again.is_even(), chi.is_even());
            for idx in 0..g.phi() as u32 {
                assert_eq!(again.phase_of_unit(idx), chi.phase_of_unit(idx));
            }
        }
        let bad = vec![u32::MAX; g.num_generators()];
        assert!(character_from_exps(&g, bad).is_err());
    }
}
