//! The unit group (F_q[T]/Q)^* as an explicit abelian group: an independent
//! generating set with orders, plus a full discrete-log table over all φ(Q)
//! residues.
//!
//! Construction: factor Q, build each local group (F_q[T]/P^e)^* with a
//! generic abelian-basis algorithm (element of maximal order, quotient by it,
//! recurse, lift with the divisibility adjustment), CRT-lift the local bases,
//! and fill the table with one odometer pass over exponent vectors.  The same
//! basis algorithm handles every local factor, including T^l whose one-unit
//! part is a p-group.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{precondition, Error, Result};
use crate::field::FiniteField;
use crate::polyring::{
    self, enumerate_below, euclidean_division, factor, gcd, rank_below, rem, xgcd, Poly,
};

/// Cap on φ(Q) for the discrete-log table.
pub const UNIT_GROUP_CAP: u64 = 1_000_000;

/// Fixed seed for the randomized search for maximal-order elements in large
/// local factors.  Recorded on the group and echoed in reports.
pub const UNITGROUP_SEED: u64 = 0x756e_6974;

/// Local groups up to this size find maximal-order elements by full scan;
/// larger ones start with seeded sampling.
const FULL_SCAN_LIMIT: usize = 1 << 16;

impl std::fmt::Debug for UnitGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "UnitGroup(mod {}, phi = {}, orders = {:?})",
            self.modulus, self.phi, self.orders
        )
    }
}

pub struct UnitGroup {
    field: FiniteField,
    modulus: Poly,
    phi: u64,
    generators: Vec<Poly>,
    orders: Vec<u64>,
    exponent: u64,
    units: Vec<Poly>,
    index_of: HashMap<u64, u32>,
    dlogs: Vec<u32>, // flattened, stride = generators.len()
    /// dlog of a fixed multiplicative generator of F_q^* embedded as a
    /// constant residue.
    constant_gen_dlog: Vec<u32>,
    /// For each distinct monic irreducible P | Q: dlog vectors of the
    /// subgroup { u ≡ 1 mod Q/P }.
    prime_cosets: Vec<(Poly, Vec<Vec<u32>>)>,
    seed: u64,
}

pub(crate) fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn lcm_u64(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd_u64(a, b) * b
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A finite abelian group given by explicit residues with multiplication
/// mod a fixed modulus.  Elements are indices into `elems`.
struct RawGroup {
    modulus: Poly,
    elems: Vec<Poly>,
    index: HashMap<u64, u32>,
    deg: usize,
}

impl RawGroup {
    fn new(modulus: Poly, elems: Vec<Poly>) -> RawGroup {
        let deg = modulus.degree().unwrap();
        let index = elems
            .iter()
            .enumerate()
            .map(|(i, e)| (rank_below(e, deg), i as u32))
            .collect();
        RawGroup {
            modulus,
            elems,
            index,
            deg,
        }
    }

    fn mul(&self, a: u32, b: u32) -> u32 {
        let prod = rem(
            &self.elems[a as usize].mul(&self.elems[b as usize]),
            &self.modulus,
        )
        .expect("nonzero modulus");
        self.index[&rank_below(&prod, self.deg)]
    }

    fn identity(&self) -> u32 {
        self.index[&rank_below(&Poly::one(self.modulus.field()), self.deg)]
    }
}

/// One level of the quotient chain: a group whose elements are the coset
/// representatives in `members`, with multiplication inherited from `raw`
/// and canonicalized through `canon`.
struct QuotientLevel<'a> {
    raw: &'a RawGroup,
    canon: Vec<u32>,
    members: Vec<u32>,
    order_factored: Vec<(u64, u32)>,
}

impl<'a> QuotientLevel<'a> {
    fn mul(&self, a: u32, b: u32) -> u32 {
        self.canon[self.raw.mul(a, b) as usize]
    }

    fn identity(&self) -> u32 {
        self.canon[self.raw.identity() as usize]
    }

    fn pow(&self, a: u32, mut e: u64) -> u32 {
        let mut base = a;
        let mut acc = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    fn order_of(&self, a: u32) -> u64 {
        let id = self.identity();
        let group: u64 = self.order_factored.iter().map(|(p, e)| p.pow(*e)).product();
        let mut order = group;
        for &(l, _) in &self.order_factored {
            while order % l == 0 && self.pow(a, order / l) == id {
                order /= l;
            }
        }
        order
    }
}

/// Basis of the group at the given quotient level: list of (raw element
/// index, order), a direct-sum decomposition.  Returns None when the
/// maximal-order search (sampling path) turns out inconsistent, in which
/// case the caller retries with a full scan.
fn basis_of_level(level: &QuotientLevel<'_>, rng: Option<&mut ChaCha8Rng>) -> Option<Vec<(u32, u64)>> {
    if level.members.len() == 1 {
        return Some(Vec::new());
    }
    let id = level.identity();
    // Element of maximal order = group exponent (abelian).
    let (w, m) = match rng {
        Some(rng) if level.members.len() > FULL_SCAN_LIMIT => {
            // Seeded sampling with lcm combination.
            let mut best = (id, 1u64);
            for _ in 0..96 {
                let pick = level.members[rng.random_range(0..level.members.len())];
                let x = level.canon[pick as usize];
                let ox = level.order_of(x);
                if ox % best.1 == 0 {
                    if ox > best.1 {
                        best = (x, ox);
                    }
                } else if best.1 % ox != 0 {
                    // Combine to realize lcm(best.1, ox).
                    let l = lcm_u64(best.1, ox);
                    let combined = combine_orders(level, best.0, best.1, x, ox);
                    best = (combined, l);
                }
            }
            best
        }
        _ => {
            let mut best = (id, 1u64);
            for &rep in &level.members {
                let o = level.order_of(rep);
                if o > best.1 {
                    best = (rep, o);
                }
            }
            best
        }
    };
    debug_assert_eq!(level.order_of(w), m);
    // Discrete logs within <w>.
    let mut w_log: HashMap<u32, u64> = HashMap::new();
    let mut cur = id;
    for j in 0..m {
        w_log.insert(cur, j);
        cur = level.mul(cur, w);
    }
    // Quotient by <w>: coset representative = smallest member index.
    let mut new_canon = level.canon.clone();
    let mut assigned: HashMap<u32, u32> = HashMap::new();
    let mut sub_members: Vec<u32> = Vec::new();
    for &x in &level.members {
        if assigned.contains_key(&x) {
            continue;
        }
        sub_members.push(x);
        let mut cur = x;
        for _ in 0..m {
            assigned.insert(cur, x);
            cur = level.mul(cur, w);
        }
    }
    for idx in 0..new_canon.len() as u32 {
        let rep = level.canon[idx as usize];
        if let Some(&coset) = assigned.get(&rep) {
            new_canon[idx as usize] = coset;
        }
    }
    if sub_members.len() as u64 * m != level.members.len() as u64 {
        return None; // w's order was not the exponent: cosets uneven
    }
    let sub_level = QuotientLevel {
        raw: level.raw,
        canon: new_canon,
        members: sub_members,
        order_factored: factor_u64(level.members.len() as u64 / m),
    };
    let sub_basis = basis_of_level(&sub_level, None)?;
    // Lift: y has order m_i in the quotient; adjust by a power of w so the
    // lift has order exactly m_i here.
    let mut out = vec![(w, m)];
    for (y, mi) in sub_basis {
        let ym = level.pow(y, mi);
        let c = match w_log.get(&ym) {
            Some(&c) => c,
            None => return None,
        };
        if c % mi != 0 {
            return None; // maximality assumption violated
        }
        let adj = level.pow(w, m - (c / mi) % m);
        let lifted = level.mul(y, adj);
        debug_assert_eq!(level.order_of(lifted), mi);
        out.push((lifted, mi));
    }
    Some(out)
}

/// An element of order lcm(oa, ob) built from a of order oa and b of order ob.
fn combine_orders(level: &QuotientLevel<'_>, a: u32, oa: u64, b: u32, ob: u64) -> u32 {
    // Split lcm into coprime parts a' | oa, b' | ob.
    let l = lcm_u64(oa, ob);
    let mut a_part = 1u64;
    let mut b_part = 1u64;
    for (p, e) in factor_u64(l) {
        let pe = p.pow(e);
        if oa % pe == 0 {
            a_part *= pe;
        } else {
            b_part *= pe;
        }
    }
    let xa = level.pow(a, oa / a_part);
    let xb = level.pow(b, ob / b_part);
    level.mul(xa, xb)
}

/// Basis of a raw local group, retrying with a full scan if the seeded
/// sampling path proves inconsistent.
fn abelian_basis(raw: &RawGroup, seed: u64) -> Result<Vec<(Poly, u64)>> {
    let top = QuotientLevel {
        raw,
        canon: (0..raw.elems.len() as u32).collect(),
        members: (0..raw.elems.len() as u32).collect(),
        order_factored: factor_u64(raw.elems.len() as u64),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let found = basis_of_level(&top, Some(&mut rng))
        .or_else(|| basis_of_level(&top, None))
        .ok_or_else(|| {
            Error::RouteDisagreement("abelian basis construction failed".to_string())
        })?;
    let product: u64 = found.iter().map(|(_, o)| o).product();
    if product != raw.elems.len() as u64 {
        return Err(Error::RouteDisagreement(
            "abelian basis orders do not multiply to the group size".to_string(),
        ));
    }
    Ok(found
        .into_iter()
        .map(|(i, o)| (raw.elems[i as usize].clone(), o))
        .collect())
}

/// Build the unit group mod Q with a full discrete-log table.
/// Errors when φ(Q) exceeds [`UNIT_GROUP_CAP`].
pub fn build_unit_group(q_in: &Poly) -> Result<UnitGroup> {
    if q_in.degree().map_or(true, |d| d < 1) {
        return Err(precondition("modulus must have degree at least 1"));
    }
    let field = q_in.field().clone();
    let modulus = q_in.make_monic();
    let phi = polyring::euler_phi(&modulus)?;
    if phi > UNIT_GROUP_CAP {
        return Err(Error::Budget {
            what: "phi(Q) discrete-log table",
            value: phi as u128,
            cap: UNIT_GROUP_CAP as u128,
        });
    }
    let fact = factor(&modulus)?;
    // Local bases, CRT-lifted to residues mod Q.
    let mut generators: Vec<Poly> = Vec::new();
    let mut orders: Vec<u64> = Vec::new();
    for (p, e) in &fact.factors {
        let mut local_mod = p.clone();
        for _ in 1..*e {
            local_mod = local_mod.mul(p);
        }
        let local_deg = local_mod.degree().unwrap();
        let mut local_units = Vec::new();
        for res in enumerate_below(&field, local_deg)? {
            if gcd(&res, p).degree() == Some(0) {
                local_units.push(res);
            }
        }
        let raw = RawGroup::new(local_mod.clone(), local_units);
        let local_basis = abelian_basis(&raw, UNITGROUP_SEED)?;
        if fact.factors.len() == 1 {
            for (g, o) in local_basis {
                generators.push(g);
                orders.push(o);
            }
        } else {
            let cofactor = euclidean_division(&modulus, &local_mod)?.0;
            let (g1, s, t) = xgcd(&local_mod, &cofactor);
            debug_assert_eq!(g1.degree(), Some(0));
            // u ≡ g mod P^e, u ≡ 1 mod Q/P^e.
            for (g, o) in local_basis {
                let lifted = rem(
                    &g.mul(&t).mul(&cofactor).add(&s.mul(&local_mod)),
                    &modulus,
                )?;
                generators.push(lifted);
                orders.push(o);
            }
        }
    }
    let k = generators.len();
    let exponent = orders.iter().fold(1u64, |acc, &o| lcm_u64(acc, o));

    // One odometer pass over exponent vectors fills the table.
    let deg_q = modulus.degree().unwrap();
    let mut units: Vec<Poly> = Vec::with_capacity(phi as usize);
    let mut dlogs: Vec<u32> = Vec::with_capacity(phi as usize * k);
    let mut index_of: HashMap<u64, u32> = HashMap::with_capacity(phi as usize);
    let mut exps = vec![0u32; k];
    // prefix[i] = Π_{j ≤ i} g_j^{exps[j]}, prefix[-1] treated as 1.
    let mut prefix: Vec<Poly> = vec![Poly::one(&field); k.max(1)];
    loop {
        let cur = if k == 0 {
            Poly::one(&field)
        } else {
            prefix[k - 1].clone()
        };
        let rank = rank_below(&cur, deg_q);
        let idx = units.len() as u32;
        if index_of.insert(rank, idx).is_some() {
            return Err(Error::RouteDisagreement(
                "generator basis produced a repeated residue".to_string(),
            ));
        }
        units.push(cur);
        dlogs.extend_from_slice(&exps);
        // Odometer increment, least-significant digit last.
        let mut pos = k;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            exps[pos] += 1;
            if (exps[pos] as u64) < orders[pos] {
                // Advance prefix[pos] incrementally, reset lower digits.
                prefix[pos] = rem(&prefix[pos].mul(&generators[pos]), &modulus)?;
                for j in pos + 1..k {
                    prefix[j] = prefix[j - 1].clone();
                }
                break;
            }
            exps[pos] = 0;
        }
        if exps.iter().all(|&e| e == 0) {
            break;
        }
        if units.len() as u64 > phi {
            return Err(Error::RouteDisagreement(
                "odometer exceeded phi(Q)".to_string(),
            ));
        }
    }
    if units.len() as u64 != phi {
        return Err(Error::RouteDisagreement(format!(
            "unit table has {} entries, phi(Q) = {phi}",
            units.len()
        )));
    }

    // dlog of a generator of F_q^* as a constant residue.
    let const_gen = Poly::constant(&field, field.multiplicative_generator());
    let const_rank = rank_below(&const_gen, deg_q);
    let gi = *index_of.get(&const_rank).expect("constants are units");
    let constant_gen_dlog = dlogs[gi as usize * k..(gi as usize + 1) * k].to_vec();

    // Subgroups { u ≡ 1 mod Q/P } for each distinct P | Q.
    let mut prime_cosets = Vec::new();
    for (p, _) in &fact.factors {
        let q_over_p = euclidean_division(&modulus, p)?.0;
        let mut coset = Vec::new();
        for s in enumerate_below(&field, p.degree().unwrap())? {
            let u = rem(&Poly::one(&field).add(&q_over_p.mul(&s)), &modulus)?;
            if let Some(&idx) = index_of.get(&rank_below(&u, deg_q)) {
                coset.push(dlogs[idx as usize * k..(idx as usize + 1) * k].to_vec());
            }
        }
        prime_cosets.push((p.clone(), coset));
    }

    Ok(UnitGroup {
        field,
        modulus,
        phi,
        generators,
        orders,
        exponent,
        units,
        index_of,
        dlogs,
        constant_gen_dlog,
        prime_cosets,
        seed: UNITGROUP_SEED,
    })
}

impl UnitGroup {
    pub fn field(&self) -> &FiniteField {
        &self.field
    }

    pub fn modulus(&self) -> &Poly {
        &self.modulus
    }

    pub fn phi(&self) -> u64 {
        self.phi
    }

    pub fn generators(&self) -> &[Poly] {
        &self.generators
    }

    pub fn orders(&self) -> &[u64] {
        &self.orders
    }

    /// lcm of the generator orders = exponent of the group.
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All units in odometer (exponent-vector) order.
    pub fn units(&self) -> &[Poly] {
        &self.units
    }

    /// Index of a residue coprime to Q; errors with "not a unit" otherwise.
    pub fn unit_index(&self, n: &Poly) -> Result<u32> {
        if n.field() != &self.field {
            return Err(Error::MismatchedField);
        }
        let r = rem(n, &self.modulus)?;
        let deg_q = self.modulus.degree().unwrap();
        self.index_of
            .get(&rank_below(&r, deg_q))
            .copied()
            .ok_or_else(|| Error::NotAUnit(n.to_string()))
    }

    pub fn dlog_of_index(&self, idx: u32) -> &[u32] {
        let k = self.generators.len();
        &self.dlogs[idx as usize * k..(idx as usize + 1) * k]
    }

    pub fn residue_of_index(&self, idx: u32) -> &Poly {
        &self.units[idx as usize]
    }

    /// Exponent vector of N over the generator basis.
    pub fn discrete_log(&self, n: &Poly) -> Result<Vec<u32>> {
        Ok(self.dlog_of_index(self.unit_index(n)?).to_vec())
    }

    pub(crate) fn constant_gen_dlog(&self) -> &[u32] {
        &self.constant_gen_dlog
    }

    pub(crate) fn prime_cosets(&self) -> &[(Poly, Vec<Vec<u32>>)] {
        &self.prime_cosets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::construct_field;
    use crate::polyring::{enumerate_monic, parse_poly};

    fn check_group(g: &UnitGroup) {
        let phi = polyring::euler_phi(g.modulus()).unwrap();
        assert_eq!(g.phi(), phi);
        let product: u64 = g.orders().iter().product();
        assert_eq!(product, phi, "orders must multiply to phi");
        // Round-trip: every unit's dlog reproduces it.
        let field = g.field().clone();
        for idx in 0..g.phi() as u32 {
            let exps = g.dlog_of_index(idx);
            let mut acc = Poly::one(&field);
            for (i, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    acc = rem(&acc.mul(&g.generators()[i]), g.modulus()).unwrap();
                }
            }
            assert_eq!(&acc, g.residue_of_index(idx));
        }
    }

    #[test]
    fn small_moduli_exhaustive() {
        let f3 = construct_field(3, 1).unwrap();
        for s in ["0,1", "1,1", "1,0,1", "0,0,1", "1,1,1", "0,1,1", "2,1,1,1"] {
            let q = parse_poly(&f3, s).unwrap();
            let g = build_unit_group(&q).unwrap();
            check_group(&g);
        }
        let f4 = construct_field(2, 2).unwrap();
        let q = parse_poly(&f4, "0.1,1.0,1.0").unwrap();
        let g = build_unit_group(&q).unwrap();
        check_group(&g);
    }

    #[test]
    fn dlog_is_homomorphism() {
        let f5 = construct_field(5, 1).unwrap();
        let q = parse_poly(&f5, "1,0,0,1").unwrap(); // T^3 + 1
        let g = build_unit_group(&q).unwrap();
        check_group(&g);
        let units = g.units().to_vec();
        for (i, a) in units.iter().enumerate().step_by(7) {
            for b in units.iter().skip(i % 3).step_by(11) {
                let la = g.discrete_log(a).unwrap();
                let lb = g.discrete_log(b).unwrap();
                let prod = rem(&a.mul(b), g.modulus()).unwrap();
                let lp = g.discrete_log(&prod).unwrap();
                for j in 0..g.num_generators() {
                    assert_eq!(
                        (la[j] as u64 + lb[j] as u64) % g.orders()[j],
                        lp[j] as u64
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_non_units() {
        let f3 = construct_field(3, 1).unwrap();
        let q = parse_poly(&f3, "0,0,1").unwrap(); // T^2
        let g = build_unit_group(&q).unwrap();
        let t = parse_poly(&f3, "0,1").unwrap();
        let err = g.discrete_log(&t).unwrap_err();
        assert!(err.to_string().contains("not a unit"));
        let zero = Poly::zero(&f3);
        assert!(g.discrete_log(&zero).is_err());
    }

    #[test]
    fn cap_enforced() {
        let f5 = construct_field(5, 1).unwrap();
        // deg 10 irreducible-ish modulus pushes phi over the cap; T^10 has
        // phi = 4 * 5^9 = 7,812,500.
        let q = Poly::monomial(&f5, f5.one(), 10);
        let err = build_unit_group(&q).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn prime_power_and_composite_moduli() {
        let f2 = construct_field(2, 1).unwrap();
        // T^5: one-unit 2-group of order 16.
        let q = Poly::monomial(&f2, f2.one(), 5);
        let g = build_unit_group(&q).unwrap();
        check_group(&g);
        assert_eq!(g.phi(), 16);
        // (T)(T+1)^2(T^2+T+1): composite with repeated factor.
        let t = parse_poly(&f2, "0,1").unwrap();
        let t1 = parse_poly(&f2, "1,1").unwrap();
        let irr = parse_poly(&f2, "1,1,1").unwrap();
        let q2 = t.mul(&t1).mul(&t1).mul(&irr);
        let g2 = build_unit_group(&q2).unwrap();
        check_group(&g2);
    }

    #[test]
    fn large_cyclic_group_uses_sampling() {
        // Irreducible quintic over F_13: phi = 13^5 - 1 = 371292 > 2^16,
        // exercising the sampled maximal-order search.
        let f13 = construct_field(13, 1).unwrap();
        let q = enumerate_monic(&f13, 5)
            .unwrap()
            .find(|c| polyring::is_irreducible(c).unwrap())
            .unwrap();
        let g = build_unit_group(&q).unwrap();
        assert_eq!(g.phi(), 371291 + 1);
        let product: u64 = g.orders().iter().product();
        assert_eq!(product, g.phi());
        // Cyclic: a single generator of full order.
        assert_eq!(g.exponent(), g.phi());
        // Spot-check round-trips.
        for idx in (0..g.phi() as u32).step_by(7919) {
            let u = g.residue_of_index(idx).clone();
            assert_eq!(g.unit_index(&u).unwrap(), idx);
        }
    }
}
