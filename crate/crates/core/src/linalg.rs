//! Dense helpers shared by the Fock-space code.
//!
//! Complex products are routed through real GEMMs (split into real and
//! imaginary parts), which is several times faster than nalgebra's generic
//! complex kernel. Exactly real inputs skip the imaginary work entirely.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub fn split(m: &CMat) -> (RMat, RMat) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

pub fn join(re: &RMat, im: Option<&RMat>) -> CMat {
    match im {
        Some(im) => re.zip_map(im, C64::new),
        None => re.map(|x| C64::new(x, 0.0)),
    }
}

pub fn lift(re: &RMat) -> CMat {
    join(re, None)
}

/// Real part of `m` when every imaginary entry is exactly zero.
pub fn as_real(m: &CMat) -> Option<RMat> {
    if m.iter().all(|z| z.im == 0.0) {
        Some(m.map(|z| z.re))
    } else {
        None
    }
}

fn nonzero(m: &RMat) -> bool {
    m.iter().any(|&x| x != 0.0)
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let (ai_nz, bi_nz) = (nonzero(&ai), nonzero(&bi));
    match (ai_nz, bi_nz) {
        (false, false) => lift(&(&ar * &br)),
        (false, true) => join(&(&ar * &br), Some(&(&ar * &bi))),
        (true, false) => join(&(&ar * &br), Some(&(&ai * &br))),
        (true, true) => {
            let re = &ar * &br - &ai * &bi;
            let im = &ar * &bi + &ai * &br;
            join(&re, Some(&im))
        }
    }
}

/// `u * rho * u†`.
pub fn sandwich(u: &CMat, rho: &CMat) -> CMat {
    matmul(&matmul(u, rho), &u.adjoint())
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).map(|z| z * 0.5)
}

pub fn hermiticity_error(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = hermitian_part(m);
    let mut vals: Vec<f64> = match as_real(&h) {
        Some(r) => r.symmetric_eigenvalues().iter().copied().collect(),
        None => h.symmetric_eigenvalues().iter().copied().collect(),
    };
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigen-decomposition of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMat) -> (DVector<f64>, CMat) {
    let h = hermitian_part(m);
    match as_real(&h) {
        Some(r) => {
            let e = r.symmetric_eigen();
            (e.eigenvalues, lift(&e.eigenvectors))
        }
        None => {
            let e = h.symmetric_eigen();
            (e.eigenvalues, e.eigenvectors)
        }
    }
}

/// `V f(Λ) V†` for a Hermitian input, with `f` applied to each eigenvalue.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = f(v);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    matmul(&scaled, &vecs.adjoint())
}

/// Square root of a positive semidefinite matrix; negative eigenvalues
/// (truncation noise) are floored at zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    hermitian_function(m, |v| v.max(0.0).sqrt())
}

pub fn trace_norm_hermitian(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// Exponential of a real antisymmetric tridiagonal generator
/// `G[k+1,k] = s_k`, `G[k,k+1] = -s_k`.
///
/// With `T = diag(i^k)` the matrix `T† (iG) T` is the real symmetric
/// tridiagonal `J` with off-diagonal `s_k`, so
/// `exp(tG)[j,k] = Re(i^{j-k} (C - iS))[j,k]` where `C = V cos(tΛ) Vᵀ`,
/// `S = V sin(tΛ) Vᵀ`. Only real symmetric eigen-work is needed and any
/// scale `t` reuses the same decomposition.
#[derive(Debug, Clone)]
pub struct ChainExp {
    vectors: RMat,
    values: DVector<f64>,
}

impl ChainExp {
    pub fn new(sub: &[f64]) -> Self {
        let dim = sub.len() + 1;
        let mut j = RMat::zeros(dim, dim);
        for (k, &s) in sub.iter().enumerate() {
            j[(k + 1, k)] = s;
            j[(k, k + 1)] = s;
        }
        let e = j.symmetric_eigen();
        ChainExp {
            vectors: e.eigenvectors,
            values: e.eigenvalues,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// First `ncols` columns of `exp(tG)`.
    pub fn columns(&self, t: f64, ncols: usize) -> RMat {
        let dim = self.dim();
        let ncols = ncols.min(dim);
        let mut vc = self.vectors.clone();
        let mut vs = self.vectors.clone();
        for (l, &lam) in self.values.iter().enumerate() {
            let (s, c) = (t * lam).sin_cos();
            vc.column_mut(l).iter_mut().for_each(|x| *x *= c);
            vs.column_mut(l).iter_mut().for_each(|x| *x *= s);
        }
        let head = self.vectors.rows(0, ncols).transpose();
        let c = &vc * &head;
        let s = &vs * &head;
        RMat::from_fn(dim, ncols, |j, k| {
            match (j as i64 - k as i64).rem_euclid(4) {
                0 => c[(j, k)],
                1 => s[(j, k)],
                2 => -c[(j, k)],
                _ => -s[(j, k)],
            }
        })
    }

    pub fn exp(&self, t: f64) -> RMat {
        self.columns(t, self.dim())
    }
}

/// Cached decomposition of the truncated `a† - a` generator at `dim`.
pub fn quadrature_chain(dim: usize) -> Arc<ChainExp> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ChainExp>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("chain cache poisoned").get(&dim) {
        return Arc::clone(hit);
    }
    let sub: Vec<f64> = (1..dim).map(|k| (k as f64).sqrt()).collect();
    let chain = Arc::new(ChainExp::new(&sub));
    cache
        .lock()
        .expect("chain cache poisoned")
        .entry(dim)
        .or_insert(chain)
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_exp(g: &RMat) -> RMat {
        let n = g.nrows();
        let mut out = RMat::identity(n, n);
        let mut term = RMat::identity(n, n);
        for k in 1..80 {
            term = &term * g / k as f64;
            out += &term;
        }
        out
    }

    #[test]
    fn chain_exp_matches_taylor() {
        let sub = [0.3, -0.7, 1.1, 0.2, 0.5];
        let mut g = RMat::zeros(6, 6);
        for (k, &s) in sub.iter().enumerate() {
            g[(k + 1, k)] = s;
            g[(k, k + 1)] = -s;
        }
        let oracle = taylor_exp(&(&g * 0.8));
        let got = ChainExp::new(&sub).exp(0.8);
        assert!((oracle - got).amax() < 1e-12);
    }

    #[test]
    fn matmul_agrees_with_naive_product() {
        let a = CMat::from_fn(4, 3, |i, j| {
            C64::new(i as f64 - j as f64, 0.5 * (i * j) as f64)
        });
        let b = CMat::from_fn(3, 5, |i, j| C64::new((i + 2 * j) as f64, -(i as f64)));
        assert!(max_abs(&(matmul(&a, &b) - &a * &b)) < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let g = CMat::from_fn(3, 3, |i, j| C64::new((i + j) as f64, i as f64 - j as f64));
        let p = matmul(&g, &g.adjoint());
        let r = psd_sqrt(&p);
        assert!(max_abs(&(matmul(&r, &r) - p)) < 1e-10);
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
    }
}
