//! Lower bounds on memory from mesh distinguishability and Fano's
//! inequality, and audits of protocol ledgers against them.

use serde::Serialize;

use crate::dts_protocols::MemoryLedger;
use crate::error::{finite, invalid, Error, Result};
use crate::linalg::{self, CMat};

/// Cubic mesh around `theta0` with spacing `log₂ n / √n` on each of `f`
/// axes. `t_theta` scales the count lower bound and is family dependent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshSpec {
    pub n: u64,
    pub f: u32,
    pub theta0: Vec<f64>,
    pub t_theta: f64,
}

impl MeshSpec {
    pub fn new(n: u64, theta0: Vec<f64>) -> Result<Self> {
        if n < 3 {
            return invalid("mesh needs n >= 3");
        }
        if theta0.is_empty() {
            return invalid("mesh needs at least one parameter");
        }
        for &t in &theta0 {
            finite(t, "theta0")?;
        }
        Ok(MeshSpec {
            n,
            f: theta0.len() as u32,
            theta0,
            t_theta: 1.0,
        })
    }

    pub fn with_t_theta(mut self, t: f64) -> Result<Self> {
        finite(t, "t_theta")?;
        if t <= 0.0 {
            return invalid("t_theta must be positive");
        }
        self.t_theta = t;
        Ok(self)
    }

    pub fn spacing(&self) -> f64 {
        let n = self.n as f64;
        n.log2() / n.sqrt()
    }

    /// `T_Θ (√n / log₂ n)^f`, floored at one.
    pub fn count_lower_bound(&self) -> f64 {
        let n = self.n as f64;
        (self.t_theta * (n.sqrt() / n.log2()).powi(self.f as i32)).max(1.0)
    }

    /// The first `per_axis` points along each axis of the mesh.
    pub fn points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let h = self.spacing();
        let mut out = vec![self.theta0.clone()];
        for axis in 0..self.theta0.len() {
            let mut next = Vec::new();
            for p in &out {
                for k in 0..per_axis {
                    let mut q = p.clone();
                    q[axis] += k as f64 * h;
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshDistance {
    pub min: f64,
    pub pairs: usize,
}

fn half_trace_norm(a: &CMat, b: &CMat) -> f64 {
    0.5 * linalg::trace_norm_hermitian(&(a - b))
}

/// Smallest pairwise trace distance among the states of `points`.
pub fn min_mesh_distance<F>(points: &[Vec<f64>], family: F) -> Result<MeshDistance>
where
    F: Fn(&[f64]) -> Result<CMat>,
{
    if points.len() < 2 {
        return invalid("mesh needs at least two points");
    }
    let states = points
        .iter()
        .map(|p| family(p))
        .collect::<Result<Vec<_>>>()?;
    let mut min = f64::INFINITY;
    let mut pairs = 0;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            if states[i].shape() != states[j].shape() {
                return Err(Error::DimensionMismatch {
                    expected: states[i].nrows(),
                    got: states[j].nrows(),
                });
            }
            min = min.min(half_trace_norm(&states[i], &states[j]));
            pairs += 1;
        }
    }
    Ok(MeshDistance { min, pairs })
}

/// Least-squares slope through the origin of `‖ρ_θ − ρ_{θ+s e_i}‖₁`
/// against `s` for each axis `i`; returns the per-axis constants.
pub fn fit_expansion_constant<F>(theta0: &[f64], separations: &[f64], family: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<CMat>,
{
    if separations.is_empty() || separations.iter().any(|&s| !(s > 0.0)) {
        return invalid("separations must be positive");
    }
    let base = family(theta0)?;
    (0..theta0.len())
        .map(|axis| {
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for &s in separations {
                let mut q = theta0.to_vec();
                q[axis] += s;
                let d = 2.0 * half_trace_norm(&base, &family(&q)?);
                sxy += s * d;
                sxx += s * s;
            }
            Ok(sxy / sxx)
        })
        .collect()
}

/// `−x log₂ x`, zero at zero.
fn h(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FanoBound {
    /// `(1 − p) log₂ |M| − h(p)`.
    pub bits: f64,
    /// `(f/2) log₂ n − f log₂ log₂ n`.
    pub asymptotic: f64,
}

pub fn fano_lower_bound(mesh_size: f64, p_err: f64, f: u32, n: u64) -> Result<FanoBound> {
    finite(mesh_size, "mesh_size")?;
    finite(p_err, "p_err")?;
    if !(0.0..1.0).contains(&p_err) {
        return invalid(format!("error probability {p_err} outside [0, 1)"));
    }
    if mesh_size < 1.0 {
        return invalid("mesh size below one");
    }
    if n < 3 {
        return invalid("need n >= 3");
    }
    Ok(FanoBound {
        bits: (1.0 - p_err) * mesh_size.log2() - h(p_err),
        asymptotic: asymptotic_bound(f, n),
    })
}

pub fn asymptotic_bound(f: u32, n: u64) -> f64 {
    let l = (n as f64).log2();
    f as f64 * (0.5 * l - l.log2())
}

/// Discrimination error `n^{−C log₂ n / 16}` for an expansion constant `C`.
pub fn analytic_error_probability(n: u64, c: f64) -> f64 {
    let l = (n as f64).log2();
    (-(c * l / 16.0) * l).exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub n: u64,
    pub f: u32,
    /// Fano bound on the mutual information with a perfectly discriminated
    /// mesh of the guaranteed size.
    pub mutual_information_bits: f64,
    /// Lower bound on the memory, `log₂ T_Θ + (f/2) log₂ n − f log₂ log₂ n`.
    pub n_enc_bound: f64,
    /// Bits plus qubits.
    pub ledger_total: f64,
    pub slack: f64,
    /// Memory of the construction achieving the bound.
    pub achievability_total: f64,
    pub slack_vs_achievability: f64,
    /// Additive shift of the bound from `T_Θ`, in bits.
    pub t_theta_bits: f64,
    pub verdict: Verdict,
}

/// Memory of the achieving construction: `[(1/2+δ)f_c + f_q/2] log₂ n`
/// bits and `f_q δ log₂ n` qubits.
pub fn achievability_total(f_c: u32, f_q: u32, n: u64, delta: f64) -> f64 {
    let l = (n as f64).log2();
    ((0.5 + delta) * f_c as f64 + 0.5 * f_q as f64 + f_q as f64 * delta) * l
}

pub fn audit(
    ledger: &MemoryLedger,
    f: u32,
    n: u64,
    delta: f64,
    t_theta: f64,
) -> Result<AuditReport> {
    finite(delta, "delta")?;
    if ledger.family.total() != f {
        return invalid(format!(
            "ledger has {} independent parameters, audit asked for f = {f}",
            ledger.family.total()
        ));
    }
    let mesh = MeshSpec::new(n, vec![0.0; f.max(1) as usize])?.with_t_theta(t_theta)?;
    let (mi, bound) = if f == 0 {
        (0.0, 0.0)
    } else {
        let fano = fano_lower_bound(mesh.count_lower_bound(), 0.0, f, n)?;
        (fano.bits, fano.asymptotic + t_theta.log2())
    };
    let total = ledger.total();
    let ach = achievability_total(ledger.family.f_c, ledger.family.f_q, n, delta);
    Ok(AuditReport {
        n,
        f,
        mutual_information_bits: mi,
        n_enc_bound: bound,
        ledger_total: total,
        slack: total - bound,
        achievability_total: ach,
        slack_vs_achievability: total - ach,
        t_theta_bits: t_theta.log2(),
        verdict: if total >= bound {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    })
}

/// Largest `log₂ n` at which `c log₂ n ≤ f log₂ log₂ n`: a ledger falling
/// short of `(f/2) log₂ n` by `c log₂ n` fails for every larger `n`.
pub fn violation_threshold(f: u32, c: f64) -> Result<f64> {
    if !(c > 0.0) || f == 0 {
        return invalid("need f >= 1 and a positive shortfall");
    }
    let g = |l: f64| c * l - f as f64 * l.log2();
    // g is convex with its minimum at f/(c ln 2); the last root lies above it
    let lo0 = (f as f64 / (c * std::f64::consts::LN_2)).max(2.0);
    if g(lo0) > 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (lo0, lo0 * 2.0);
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
