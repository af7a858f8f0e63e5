//! Numerical kernels: simultaneous (Durand–Kerner) polynomial root finding
//! over complex coefficients, a Jacobi eigensolver for small Hermitian
//! matrices, and a thresholded least-squares solver built on it.
//!
//! All routines are deterministic: fixed initial configurations, fixed sweep
//! orders, no randomness.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative residual each root must reach.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-9;

const MAX_ROOT_ITERS: usize = 500;

pub fn eval_poly(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// All complex roots of c_0 + c_1 z + ... + c_d z^d (with multiplicity).
/// Requires a non-negligible leading coefficient; every returned root has
/// relative residual |p(z)| / Σ|c_i||z|^i ≤ 1e-9.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let maxabs = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if coeffs.is_empty() || maxabs == 0.0 {
        // No meaningful residual exists for the zero polynomial.
        return Err(Error::RootFinder {
            residual: f64::INFINITY,
        });
    }
    let d = coeffs.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[d];
    if lead.norm() < 1e-12 * maxabs {
        return Err(Error::RootFinder {
            residual: f64::INFINITY,
        });
    }
    // Monic normalization.
    let a: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    // Cauchy bound on root magnitudes.
    let bound = 1.0 + a[..d].iter().map(|c| c.norm()).fold(0.0, f64::max);
    // Deterministic non-symmetric start: powers of 0.4 + 0.9i scaled to the bound.
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = Vec::with_capacity(d);
    let mut w = Complex64::new(1.0, 0.0);
    for _ in 0..d {
        w *= seed;
        z.push(w * bound);
    }
    for _ in 0..MAX_ROOT_ITERS {
        let mut max_step = 0.0f64;
        for i in 0..d {
            let pz = eval_poly(&a, z[i]);
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                // Coincident iterates: nudge deterministically.
                z[i] += Complex64::new(1e-4 * bound, 1e-4 * bound);
                max_step = f64::INFINITY;
                continue;
            }
            let step = pz / denom;
            z[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step <= 1e-14 * (1.0 + bound) {
            break;
        }
    }
    // Residual verification.
    for &zi in &z {
        let mut scale = 0.0f64;
        let mut zp = 1.0f64;
        for c in &a {
            scale += c.norm() * zp;
            zp *= zi.norm();
        }
        let res = eval_poly(&a, zi).norm();
        if res > ROOT_RESIDUAL_TOL * scale.max(1.0) {
            return Err(Error::RootFinder { residual: res });
        }
    }
    Ok(z)
}

/// Eigen-decomposition A = V diag(values) V^H of a Hermitian matrix, by
/// cyclic complex Jacobi rotations.  `vectors[k]` is the k-th eigenvector
/// (column), matching `values[k]`; values ascending.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
}

pub fn hermitian_eigen(matrix: &[Vec<Complex64>]) -> HermitianEigen {
    let n = matrix.len();
    let mut a: Vec<Vec<Complex64>> = matrix.to_vec();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    let frob: f64 = a
        .iter()
        .flat_map(|row| row.iter().map(|c| c.norm_sqr()))
        .sum::<f64>()
        .sqrt();
    let stop = (1e-15 * frob.max(1e-300)).powi(2);
    for _ in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q].norm_sqr();
            }
        }
        if off <= stop * n as f64 * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = a[p][q];
                let gn = g.norm();
                if gn <= 1e-300 {
                    continue;
                }
                let alpha = a[p][p].re;
                let beta = a[q][q].re;
                let phase = g / gn;
                let tau = (beta - alpha) / (2.0 * gn);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns: col_p' = c·col_p − s·phasē·col_q ; col_q' = s·phase·col_p + c·col_q.
                let sp = phase * s;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = aip * c - aiq * sp.conj();
                    a[i][q] = aip * sp + aiq * c;
                }
                for i in 0..n {
                    let ap = a[p][i];
                    let aq = a[q][i];
                    a[p][i] = ap * c - aq * sp;
                    a[q][i] = ap * sp.conj() + aq * c;
                }
                for i in 0..n {
                    let vip = v[i][p];
                    let viq = v[i][q];
                    v[i][p] = vip * c - viq * sp.conj();
                    v[i][q] = vip * sp + viq * c;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].re.partial_cmp(&a[j][j].re).unwrap());
    HermitianEigen {
        values: order.iter().map(|&i| a[i][i].re).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..n).map(|i| v[i][k]).collect())
            .collect(),
    }
}

/// Minimum-norm least-squares solution of (rows)·x ≈ rhs via the normal
/// equations and a relative singular-value threshold.  Returns the solution
/// and the singular values of the system matrix, descending.
pub fn least_squares(
    rows: &[Vec<Complex64>],
    rhs: &[Complex64],
    rel_threshold: f64,
) -> (Vec<Complex64>, Vec<f64>) {
    let r = rows.first().map_or(0, |row| row.len());
    // G = H^H H, b = H^H rhs.
    let mut g = vec![vec![Complex64::new(0.0, 0.0); r]; r];
    let mut b = vec![Complex64::new(0.0, 0.0); r];
    for (row, &y) in rows.iter().zip(rhs) {
        for i in 0..r {
            let ci = row[i].conj();
            for j in 0..r {
                g[i][j] += ci * row[j];
            }
            b[i] += ci * y;
        }
    }
    let eig = hermitian_eigen(&g);
    let sigmas: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let sigma_max = sigmas.iter().cloned().fold(0.0, f64::max);
    let mut x = vec![Complex64::new(0.0, 0.0); r];
    for (k, vec_k) in eig.vectors.iter().enumerate() {
        if sigmas[k] <= rel_threshold * sigma_max || sigmas[k] == 0.0 {
            continue;
        }
        let mut proj = Complex64::new(0.0, 0.0);
        for i in 0..r {
            proj += vec_k[i].conj() * b[i];
        }
        let coef = proj / eig.values[k];
        for i in 0..r {
            x[i] += coef * vec_k[i];
        }
    }
    let mut descending = sigmas;
    descending.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (x, descending)
}

/// Compensated (Kahan) summation of complex values.
#[derive(Clone, Copy, Default)]
pub struct KahanComplex {
    sum: Complex64,
    comp: Complex64,
}

impl KahanComplex {
    pub fn new() -> KahanComplex {
        KahanComplex::default()
    }

    pub fn add(&mut self, v: Complex64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> Complex64 {
        self.sum
    }
}

/// Compensated (Kahan) summation of real values.
#[derive(Clone, Copy, Default)]
pub struct KahanF64 {
    sum: f64,
    comp: f64,
}

impl KahanF64 {
    pub fn new() -> KahanF64 {
        KahanF64::default()
    }

    pub fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}
