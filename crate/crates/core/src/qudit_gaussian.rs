//! Qudit families, their local Gaussian limit, the classical lattice
//! register, a tomography stand-in and the quantum-gap witness.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::channels::{make_displaced_thermal, make_thermal, ModeParams};
use crate::dts_protocols::{FamilyDims, LedgerEntry, MemoryLedger};
use crate::error::{finite, invalid, Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::metrics::{bures_distance, hellinger_distance, lemma4_gap};

/// Spectrum gaps below this are treated as degenerate.
const GAP_MIN: f64 = 1e-12;

/// `ρ_θ = U_ξ diag(μ) U_ξ†` with `ξ` holding `(ξ^R, ξ^I)` for each pair
/// `j < k` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuditParametrization {
    mu: Vec<f64>,
    xi: Vec<(f64, f64)>,
}

/// Pairs `(j, k)` with `j < k`, in the order used by `ξ`.
pub fn pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d)
        .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
        .collect()
}

fn check_spectrum(mu: &[f64]) -> Result<()> {
    if mu.len() < 2 {
        return invalid("need d >= 2");
    }
    for &m in mu {
        finite(m, "spectrum")?;
    }
    if mu.iter().any(|&m| m <= 0.0) {
        return invalid("spectrum must be positive");
    }
    if mu.windows(2).any(|w| w[0] - w[1] <= GAP_MIN) {
        return invalid("spectrum must be strictly decreasing");
    }
    let s: f64 = mu.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return invalid(format!("spectrum sums to {s}"));
    }
    Ok(())
}

impl QuditParametrization {
    pub fn new(mu: Vec<f64>, xi: Vec<(f64, f64)>) -> Result<Self> {
        check_spectrum(&mu)?;
        let d = mu.len();
        if xi.len() != d * (d - 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: d * (d - 1) / 2,
                got: xi.len(),
            });
        }
        for &(r, i) in &xi {
            finite(r, "xi")?;
            finite(i, "xi")?;
        }
        Ok(QuditParametrization { mu, xi })
    }

    pub fn diagonal(mu: Vec<f64>) -> Result<Self> {
        let d = mu.len();
        Self::new(mu, vec![(0.0, 0.0); d * d.saturating_sub(1) / 2])
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn xi(&self) -> &[(f64, f64)] {
        &self.xi
    }

    /// `T^I_{j,k} = iE_{j,k} − iE_{k,j}`.
    pub fn generator_imag(d: usize, j: usize, k: usize) -> CMat {
        let mut t = CMat::zeros(d, d);
        t[(j, k)] = C64::i();
        t[(k, j)] = -C64::i();
        t
    }

    /// `T^R_{k,j} = E_{j,k} + E_{k,j}`.
    pub fn generator_real(d: usize, j: usize, k: usize) -> CMat {
        let mut t = CMat::zeros(d, d);
        t[(j, k)] = C64::new(1.0, 0.0);
        t[(k, j)] = C64::new(1.0, 0.0);
        t
    }

    /// Hermitian `H` with `U_ξ = exp(iH)`.
    pub fn hamiltonian(&self) -> CMat {
        let d = self.d();
        let mut h = CMat::zeros(d, d);
        for (&(j, k), &(xr, xi)) in pairs(d).iter().zip(&self.xi) {
            let s = (self.mu[j] - self.mu[k]).sqrt();
            h += Self::generator_imag(d, j, k) * C64::new(xi / s, 0.0);
            h += Self::generator_real(d, j, k) * C64::new(xr / s, 0.0);
        }
        h
    }

    pub fn unitary(&self) -> CMat {
        let (vals, vecs) = linalg::hermitian_eigen(&self.hamiltonian());
        let mut scaled = vecs.clone();
        for (j, &v) in vals.iter().enumerate() {
            let p = C64::from_polar(1.0, v);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= p);
        }
        linalg::matmul(&scaled, &vecs.adjoint())
    }
}

pub fn build_qudit_state(param: &QuditParametrization) -> CMat {
    let rho0 = CMat::from_diagonal(&DVector::from_iterator(
        param.d(),
        param.mu.iter().map(|&m| C64::new(m, 0.0)),
    ));
    if param.xi.iter().all(|&(r, i)| r == 0.0 && i == 0.0) {
        return rho0;
    }
    linalg::sandwich(&param.unitary(), &rho0)
}

/// Local coordinates `δθ = (δμ, δξ)`, with `δμ` in the chart
/// `(μ_1, …, μ_{d−1})` and `δξ` ordered like `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalParameter {
    pub delta_mu: Vec<f64>,
    pub delta_xi: Vec<(f64, f64)>,
}

impl LocalParameter {
    pub fn zero(d: usize) -> Self {
        LocalParameter {
            delta_mu: vec![0.0; d - 1],
            delta_xi: vec![(0.0, 0.0); d * (d - 1) / 2],
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.delta_mu
            .iter()
            .copied()
            .chain(self.delta_xi.iter().flat_map(|&(r, i)| [r, i]))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `θ_0 + δθ/√n`.
    pub fn apply_to(&self, theta0: &QuditParametrization, n: u64) -> Result<QuditParametrization> {
        let d = theta0.d();
        self.check_dims(d)?;
        let s = (n as f64).sqrt();
        let mut mu: Vec<f64> = theta0.mu[..d - 1]
            .iter()
            .zip(&self.delta_mu)
            .map(|(m, dm)| m + dm / s)
            .collect();
        mu.push(1.0 - mu.iter().sum::<f64>());
        let xi = theta0
            .xi
            .iter()
            .zip(&self.delta_xi)
            .map(|(&(r, i), &(dr, di))| (r + dr / s, i + di / s))
            .collect();
        QuditParametrization::new(mu, xi)
    }

    fn check_dims(&self, d: usize) -> Result<()> {
        if self.delta_mu.len() != d - 1 {
            return Err(Error::DimensionMismatch {
                expected: d - 1,
                got: self.delta_mu.len(),
            });
        }
        if self.delta_xi.len() != d * (d - 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: d * (d - 1) / 2,
                got: self.delta_xi.len(),
            });
        }
        Ok(())
    }
}

/// `N(δμ, V) ⊗ ⊗_{j<k} ρ_{α_{j,k}, β_{j,k}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    pub delta_mu: DVector<f64>,
    pub v: DMatrix<f64>,
    pub mode_params: BTreeMap<(usize, usize), ModeParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QlanTarget {
    pub target: GaussianTarget,
    /// `‖δθ‖∞ ≤ n^{x/2}`; a violation is reported, not fatal.
    pub within_neighborhood: bool,
}

/// Fisher information of the spectrum in the chart `(μ_1, …, μ_{d−1})`:
/// `F = diag(1/μ_j) + J/μ_d`.
pub fn spectrum_fisher(mu: &[f64]) -> DMatrix<f64> {
    let d = mu.len();
    let last = mu[d - 1];
    DMatrix::from_fn(d - 1, d - 1, |i, j| {
        let diag = if i == j { 1.0 / mu[i] } else { 0.0 };
        diag + 1.0 / last
    })
}

/// Closed-form inverse of [`spectrum_fisher`]: `diag(μ) − μμᵀ`.
pub fn spectrum_covariance(mu: &[f64]) -> DMatrix<f64> {
    let d = mu.len();
    DMatrix::from_fn(d - 1, d - 1, |i, j| {
        let diag = if i == j { mu[i] } else { 0.0 };
        diag - mu[i] * mu[j]
    })
}

pub fn qlan_target(
    theta0: &QuditParametrization,
    delta: &LocalParameter,
    n: u64,
    x: f64,
) -> Result<QlanTarget> {
    let d = theta0.d();
    delta.check_dims(d)?;
    finite(x, "x")?;
    let mu = theta0.mu();
    let mut modes = BTreeMap::new();
    for (&(j, k), &(dr, di)) in pairs(d).iter().zip(&delta.delta_xi) {
        let alpha = C64::new(di, dr) / (2.0 * (mu[j] - mu[k]).sqrt());
        modes.insert((j, k), ModeParams::new(alpha, mu[k] / mu[j])?);
    }
    Ok(QlanTarget {
        target: GaussianTarget {
            delta_mu: DVector::from_column_slice(&delta.delta_mu),
            v: spectrum_covariance(mu),
            mode_params: modes,
        },
        within_neighborhood: delta.sup_norm() <= (n as f64).powf(x / 2.0),
    })
}

/// Interface to a local asymptotic normality map; only the ideal map is
/// provided, whose error `n^{−κ(x)}` is added analytically.
pub trait LocalNormalApproximation {
    fn forward(
        &self,
        theta0: &QuditParametrization,
        delta: &LocalParameter,
        n: u64,
        x: f64,
    ) -> Result<QlanTarget>;

    /// Error charged for one application at sample size `n`.
    fn error_term(&self, n: u64, x: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdealQlan;

impl LocalNormalApproximation for IdealQlan {
    fn forward(
        &self,
        theta0: &QuditParametrization,
        delta: &LocalParameter,
        n: u64,
        x: f64,
    ) -> Result<QlanTarget> {
        qlan_target(theta0, delta, n, x)
    }

    fn error_term(&self, n: u64, x: f64) -> Result<f64> {
        Ok((n as f64).powf(-kappa(x)?.value))
    }
}

/// `κ(x)` with the maximiser that certifies it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kappa {
    pub value: f64,
    pub y: f64,
    pub z: f64,
    pub eta: f64,
}

pub const KAPPA_X_MAX: f64 = 2.0 / 9.0;
/// Grid step of the κ search.
pub const KAPPA_STEP: f64 = 1e-3;

pub fn kappa_feasible(x: f64, y: f64, z: f64, eta: f64) -> bool {
    (1.0 + x) / 2.0 < z && z < 1.0 && y > 0.0 && eta > 0.0 && eta > x - y
}

pub fn kappa_objective(x: f64, y: f64, z: f64, eta: f64) -> f64 {
    ((1.0 - z - eta) / 2.0)
        .min((1.0 - 3.0 * x) / 4.0 - y)
        .min((2.0 - 9.0 * eta) / 24.0)
}

/// Maximum of the objective over the feasible set: a grid of step
/// [`KAPPA_STEP`] in `(y, z, η)` followed by a shrinking coordinate search.
/// The grid skips `z` values whose first term already caps the objective
/// below the incumbent, which leaves the grid maximum unchanged.
pub fn kappa(x: f64) -> Result<Kappa> {
    finite(x, "x")?;
    if !(0.0..KAPPA_X_MAX).contains(&x) {
        return invalid(format!("x = {x} outside [0, 2/9)"));
    }
    let h = KAPPA_STEP;
    let z0 = (1.0 + x) / 2.0;
    let y_top = (1.0 - 3.0 * x) / 4.0;
    let eta_top = 2.0 / 9.0;
    let mut best = Kappa {
        value: f64::NEG_INFINITY,
        y: 0.0,
        z: 0.0,
        eta: 0.0,
    };
    let mut iz = 1;
    loop {
        let z = z0 + iz as f64 * h;
        if z >= 1.0 || (1.0 - z) / 2.0 <= best.value {
            break;
        }
        let mut iy = 1;
        while iy as f64 * h <= y_top {
            let y = iy as f64 * h;
            let mut ie = 1;
            while ie as f64 * h <= eta_top {
                let eta = ie as f64 * h;
                if kappa_feasible(x, y, z, eta) {
                    let v = kappa_objective(x, y, z, eta);
                    if v > best.value {
                        best = Kappa {
                            value: v,
                            y,
                            z,
                            eta,
                        };
                    }
                }
                ie += 1;
            }
            iy += 1;
        }
        iz += 1;
    }
    if !best.value.is_finite() {
        return Err(Error::Numerical(format!(
            "no feasible grid point at x = {x}"
        )));
    }
    let mut step = h / 2.0;
    while step > 1e-12 {
        let mut moved = false;
        for (dy, dz, de) in [
            (1.0, 0.0, 0.0),
            (-1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0),
            (0.0, -1.0, 0.0),
            (0.0, 0.0, 1.0),
            (0.0, 0.0, -1.0),
            (1.0, 0.0, -1.0),
            (-1.0, 0.0, 1.0),
        ] {
            let (y, z, eta) = (best.y + dy * step, best.z + dz * step, best.eta + de * step);
            if kappa_feasible(x, y, z, eta) {
                let v = kappa_objective(x, y, z, eta);
                if v > best.value {
                    best = Kappa {
                        value: v,
                        y,
                        z,
                        eta,
                    };
                    moved = true;
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    Ok(best)
}

/// Multivariate normal law.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianSpec {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian parameters"));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 || cov.clone().cholesky().is_none() {
            return invalid("covariance must be symmetric positive definite");
        }
        Ok(GaussianSpec { mean, cov })
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, var),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Pushforward under `u ↦ √γ u`.
pub fn classical_amplify(spec: &GaussianSpec, gamma: f64) -> Result<GaussianSpec> {
    finite(gamma, "gamma")?;
    if gamma < 1.0 {
        return invalid(format!("gain {gamma} < 1"));
    }
    GaussianSpec::new(&spec.mean * gamma.sqrt(), &spec.cov * gamma)
}

/// Rounding register: the cube `‖u‖∞ ≤ n^{δ/2}` cut into cells of side
/// `n^{−δ/2}` centred on the lattice `(n^{−δ/2} ℤ)^{f_c}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeCode {
    n: u64,
    delta: f64,
    f_c: usize,
}

impl LatticeCode {
    pub fn new(n: u64, delta: f64, f_c: usize) -> Result<Self> {
        finite(delta, "delta")?;
        if n < 2 || !(delta > 0.0 && delta < 1.0) || f_c == 0 {
            return invalid("lattice code needs n >= 2, delta in (0, 1), f_c >= 1");
        }
        Ok(LatticeCode { n, delta, f_c })
    }

    pub fn spacing(&self) -> f64 {
        (self.n as f64).powf(-self.delta / 2.0)
    }

    pub fn half_width(&self) -> f64 {
        (self.n as f64).powf(self.delta / 2.0)
    }

    /// Largest lattice index kept on each axis.
    pub fn max_index(&self) -> i64 {
        (self.half_width() / self.spacing() + 1e-9).floor() as i64
    }

    pub fn dim(&self) -> usize {
        self.f_c
    }

    /// `f_c δ log₂ n`.
    pub fn memory_bits(&self) -> f64 {
        self.f_c as f64 * self.delta * (self.n as f64).log2()
    }

    /// `log₂` of the number of lattice points actually used.
    pub fn lattice_bits(&self) -> f64 {
        self.f_c as f64 * ((2 * self.max_index() + 1) as f64).log2()
    }

    /// Rounding map; points outside the cube go to the origin.
    pub fn compress(&self, u: &[f64]) -> Vec<i64> {
        let b = self.half_width();
        if u.iter().any(|v| v.abs() > b) {
            return vec![0; self.f_c];
        }
        let h = self.spacing();
        let m = self.max_index();
        u.iter()
            .map(|v| ((v / h).round() as i64).clamp(-m, m))
            .collect()
    }

    /// Uniform draw in the cell of lattice point `t`.
    pub fn decode<R: Rng + ?Sized>(&self, t: &[i64], rng: &mut R) -> Vec<f64> {
        let h = self.spacing();
        t.iter()
            .map(|&i| (i as f64 + rng.random::<f64>() - 0.5) * h)
            .collect()
    }

    /// Exact law of the lattice index for a one-dimensional Gaussian.
    pub fn compress_law_1d(&self, spec: &GaussianSpec) -> Result<BTreeMap<i64, f64>> {
        let (normal, _) = scalar_normal(spec)?;
        let h = self.spacing();
        let b = self.half_width();
        let m = self.max_index();
        let mut law = BTreeMap::new();
        for i in -m..=m {
            let lo = ((i as f64 - 0.5) * h).max(-b);
            let hi = ((i as f64 + 0.5) * h).min(b);
            law.insert(i, (normal.cdf(hi) - normal.cdf(lo)).max(0.0));
        }
        *law.get_mut(&0).unwrap() += normal.cdf(-b) + normal.sf(b);
        Ok(law)
    }

    /// Total-variation distance between a one-dimensional Gaussian and
    /// decode∘compress of it, by Simpson quadrature on each cell.
    pub fn decode_error_1d(&self, spec: &GaussianSpec) -> Result<f64> {
        let (normal, _) = scalar_normal(spec)?;
        let law = self.compress_law_1d(spec)?;
        let h = self.spacing();
        let pdf = |u: f64| statrs::distribution::Continuous::pdf(&normal, u);
        let mut tv = 0.0;
        let mut covered_lo = f64::INFINITY;
        let mut covered_hi = f64::NEG_INFINITY;
        for (&i, &p) in &law {
            let lo = (i as f64 - 0.5) * h;
            let hi = (i as f64 + 0.5) * h;
            covered_lo = covered_lo.min(lo);
            covered_hi = covered_hi.max(hi);
            let q = p / h;
            tv += simpson(|u| (pdf(u) - q).abs(), lo, hi, 64);
        }
        tv += normal.cdf(covered_lo) + normal.sf(covered_hi);
        Ok(0.5 * tv)
    }

    /// Probability that a Gaussian leaves the cube.
    pub fn truncation_mass_1d(&self, spec: &GaussianSpec) -> Result<f64> {
        let (normal, _) = scalar_normal(spec)?;
        let b = self.half_width();
        Ok(normal.cdf(-b) + normal.sf(b))
    }
}

/// `P(‖u − m‖∞ > r)` bounded by the union over axes of the two-sided tail.
pub fn gaussian_tail_bound(spec: &GaussianSpec, r: f64) -> f64 {
    (0..spec.dim())
        .map(|i| erfc(r / (2.0 * spec.cov[(i, i)]).sqrt()))
        .sum::<f64>()
        .min(1.0)
}

fn scalar_normal(spec: &GaussianSpec) -> Result<(Normal, f64)> {
    if spec.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: spec.dim(),
        });
    }
    let sd = spec.cov[(0, 0)].sqrt();
    let n = Normal::new(spec.mean[0], sd).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((n, sd))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Total variation between two one-dimensional Gaussians by quadrature.
pub fn gaussian_tv_1d(a: &GaussianSpec, b: &GaussianSpec) -> Result<f64> {
    let (na, sa) = scalar_normal(a)?;
    let (nb, sb) = scalar_normal(b)?;
    let lo = (a.mean[0] - 12.0 * sa).min(b.mean[0] - 12.0 * sb);
    let hi = (a.mean[0] + 12.0 * sa).max(b.mean[0] + 12.0 * sb);
    use statrs::distribution::Continuous;
    Ok(0.5 * simpson(|u| (na.pdf(u) - nb.pdf(u)).abs(), lo, hi, 20_000))
}

/// Measurement settings of the tomography stand-in: the computational basis
/// and, for every pair `j < k`, the bases `(|j⟩ ± |k⟩)/√2` and
/// `(|j⟩ ± i|k⟩)/√2` completed by the other computational vectors.
pub fn tomography_settings(d: usize) -> usize {
    1 + d * (d - 1)
}

/// Projection onto the closest density matrix in 2-norm (eigenvalue
/// clipping with the deficit spread over the kept eigenvalues).
pub fn project_to_density(m: &CMat) -> CMat {
    let h = linalg::hermitian_part(m);
    let t = h.trace().re;
    let h = h / C64::new(t, 0.0);
    let (vals, vecs) = linalg::hermitian_eigen(&h);
    let d = vals.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut lam: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut acc = 0.0;
    let mut i = d;
    while i > 0 {
        let share = acc / i as f64;
        if lam[i - 1] + share < 0.0 {
            acc += lam[i - 1];
            lam[i - 1] = 0.0;
            i -= 1;
        } else {
            break;
        }
    }
    let share = acc / i.max(1) as f64;
    for l in lam.iter_mut().take(i) {
        *l += share;
    }
    let mut out = CMat::zeros(d, d);
    for (pos, &idx) in order.iter().enumerate() {
        let v = vecs.column(idx);
        out += &v * v.adjoint() * C64::new(lam[pos], 0.0);
    }
    out
}

fn draw_counts<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut left = shots;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            out.push(left);
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0);
        out.push(c);
        left -= c;
        mass -= p;
    }
    out
}

/// Linear-inversion tomography from `copies` single-copy measurements split
/// evenly over the settings, projected to a density matrix.
pub fn tomography_sim<R: Rng + ?Sized>(rho: &CMat, copies: u64, rng: &mut R) -> Result<CMat> {
    let d = rho.nrows();
    let settings = tomography_settings(d) as u64;
    if copies < (d * d) as u64 || copies < settings {
        return invalid(format!("{copies} copies too few for d = {d}"));
    }
    let per = copies / settings;
    let mut est = CMat::zeros(d, d);
    let diag: Vec<f64> = (0..d).map(|i| rho[(i, i)].re.max(0.0)).collect();
    let counts = draw_counts(&diag, per, rng);
    for i in 0..d {
        est[(i, i)] = C64::new(counts[i] as f64 / per as f64, 0.0);
    }
    for (j, k) in pairs(d) {
        let mid = 0.5 * (rho[(j, j)].re + rho[(k, k)].re);
        let rest: Vec<f64> = (0..d)
            .filter(|&l| l != j && l != k)
            .map(|l| rho[(l, l)].re.max(0.0))
            .collect();
        let mut frac = |shift: f64| {
            let mut probs = vec![(mid + shift).max(0.0), (mid - shift).max(0.0)];
            probs.extend(&rest);
            let c = draw_counts(&probs, per, rng);
            (c[0] as f64 - c[1] as f64) / per as f64
        };
        let re = 0.5 * frac(rho[(j, k)].re);
        let im = -0.5 * frac(-rho[(j, k)].im);
        est[(j, k)] = C64::new(re, im);
        est[(k, j)] = C64::new(re, -im);
    }
    Ok(project_to_density(&est))
}

/// `(n+1)^{3d²} e^{−nε²}`, in the log domain and capped at one.
pub fn tomography_envelope(n: u64, d: usize, eps: f64) -> f64 {
    let l = 3.0 * (d * d) as f64 * ((n + 1) as f64).ln() - n as f64 * eps * eps;
    l.min(0.0).exp()
}

/// Perturbation for the gap witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// `(δξ^R, δξ^I)` on pair `(j, k)`.
    Quantum {
        j: usize,
        k: usize,
        re: f64,
        im: f64,
    },
    /// Shift of spectrum coordinate `index`.
    Classical { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub value: f64,
    pub applicable: bool,
    pub d_h: f64,
    pub d_b: f64,
    pub beta: f64,
    pub alpha_re: f64,
    pub alpha_im: f64,
}

/// `(d_H − d_B)²/8` between `ρ^thm_β` and `ρ_{α(s),β}` for a perturbation of
/// one off-diagonal parameter. Perturbations of the spectrum keep the family
/// jointly diagonal, so the witness is zero and flagged as not applicable.
pub fn theorem2_witness(
    theta0: &QuditParametrization,
    s: Perturbation,
    cutoff: usize,
) -> Result<Witness> {
    let d = theta0.d();
    match s {
        Perturbation::Classical { index, value } => {
            if index + 1 >= d {
                return invalid(format!("spectrum coordinate {index} outside the chart"));
            }
            finite(value, "perturbation")?;
            Ok(Witness {
                value: 0.0,
                applicable: false,
                d_h: 0.0,
                d_b: 0.0,
                beta: 0.0,
                alpha_re: 0.0,
                alpha_im: 0.0,
            })
        }
        Perturbation::Quantum { j, k, re, im } => {
            let idx = pairs(d).iter().position(|&p| p == (j, k)).ok_or_else(|| {
                Error::InvalidParameter(format!("pair ({j}, {k}) not in j < k < {d}"))
            })?;
            let mut local = LocalParameter::zero(d);
            local.delta_xi[idx] = (re, im);
            let t = qlan_target(theta0, &local, 1, 1.0)?;
            let p = t.target.mode_params[&(j, k)];
            if p.alpha().norm() == 0.0 {
                return Ok(Witness {
                    value: 0.0,
                    applicable: true,
                    d_h: 0.0,
                    d_b: 0.0,
                    beta: p.beta(),
                    alpha_re: 0.0,
                    alpha_im: 0.0,
                });
            }
            let thermal = make_thermal(p.beta(), cutoff)?;
            let shifted = make_displaced_thermal(&p, cutoff)?;
            let d_h = hellinger_distance(&thermal, &shifted)?;
            let d_b = bures_distance(&thermal, &shifted)?;
            Ok(Witness {
                value: lemma4_gap(d_h, d_b)?,
                applicable: true,
                d_h,
                d_b,
                beta: p.beta(),
                alpha_re: p.alpha().re,
                alpha_im: p.alpha().im,
            })
        }
    }
}

/// Memory of the qudit protocol with `f_c` spectrum and `f_q` off-diagonal
/// parameters.
pub fn qudit_ledger(family: FamilyDims, n: u64, delta: f64) -> MemoryLedger {
    let l = (n as f64).log2();
    let (fc, fq) = (family.f_c as f64, family.f_q as f64);
    MemoryLedger::from_entries(
        vec![
            LedgerEntry {
                label: "estimate",
                cbits: 0.5 * (fc + fq) * l,
                qubits: 0.0,
            },
            LedgerEntry {
                label: "classical_lattice",
                cbits: fc * delta * l,
                qubits: 0.0,
            },
            LedgerEntry {
                label: "quantum_modes",
                cbits: 0.0,
                qubits: fq * delta * l,
            },
        ],
        family,
    )
}

/// Full qudit family: `d − 1` spectrum and `d(d − 1)` off-diagonal parameters.
pub fn full_family(d: usize) -> FamilyDims {
    FamilyDims {
        f_c: (d - 1) as u32,
        f_q: (d * (d - 1)) as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_xi_is_diagonal() {
        let p = QuditParametrization::diagonal(vec![0.5, 0.3, 0.2]).unwrap();
        let rho = build_qudit_state(&p);
        assert_eq!(rho[(0, 0)].re, 0.5);
        assert_eq!(rho[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn bad_spectra_rejected() {
        assert!(QuditParametrization::diagonal(vec![0.5, 0.5]).is_err());
        assert!(QuditParametrization::diagonal(vec![1.2, -0.2]).is_err());
        assert!(QuditParametrization::diagonal(vec![0.6, 0.3]).is_err());
    }

    #[test]
    fn unitary_is_unitary() {
        let p = QuditParametrization::new(
            vec![0.5, 0.3, 0.2],
            vec![(0.1, -0.2), (0.3, 0.05), (-0.4, 0.2)],
        )
        .unwrap();
        let u = p.unitary();
        let err = linalg::max_abs(&(linalg::matmul(&u, &u.adjoint()) - CMat::identity(3, 3)));
        assert!(err < 1e-9);
    }

    #[test]
    fn kappa_small_x_near_one_twelfth() {
        let k = kappa(0.0).unwrap();
        assert!(kappa_feasible(0.0, k.y, k.z, k.eta));
        assert!((k.value - 1.0 / 12.0).abs() < 2e-3);
        assert!(kappa(0.3).is_err());
    }

    #[test]
    fn lattice_rounding_and_decoding() {
        let c = LatticeCode::new(10_000, 0.4, 1).unwrap();
        let h = c.spacing();
        let t = c.compress(&[3.0 * h]);
        assert_eq!(t, vec![3]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let u = c.decode(&t, &mut rng);
            assert!((u[0] - 3.0 * h).abs() <= 0.5 * h);
        }
        assert_eq!(c.compress(&[1e6]), vec![0]);
    }

    #[test]
    fn projection_gives_a_state() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(1.1, 0.0),
                C64::new(0.3, 0.2),
                C64::new(0.3, -0.2),
                C64::new(-0.1, 0.0),
            ],
        );
        let p = project_to_density(&m);
        let ev = linalg::hermitian_eigenvalues(&p);
        assert!(ev[0] >= -1e-12);
        assert!((p.trace().re - 1.0).abs() < 1e-12);
    }
}
