//! The eight compression protocols for `n` copies of a displaced thermal
//! state, simulated on the single tracked mode.
//!
//! After the concentrating beam splitter the n-copy state is
//! `ρ_{√n α, β} ⊗ (ρ^thm_β)^{⊗(n−1)}`. Splitting off `m` copies' worth of
//! amplitude for a heterodyne estimate leaves `ρ_{sα,β}` with `s² = n − m`.
//! The encoder displaces by `−s â*` and truncates; the decoder re-displaces
//! and amplifies by `γ = n/s²`. Because the amplifier is covariant under
//! displacements and `√γ s = √n`, the error on the tracked mode equals
//! `½‖A^γ(P_K(ρ_{x,β})) − ρ_{√γ x,β}‖₁` with `x = s(α − â*)`. Only `|x|`
//! matters (phase covariance), so every per-draw matrix is real.
//! Cases with unknown `β` add the exact thermal-codec error on `n − 1` modes
//! and the distance between `ρ^thm_β̂` and `ρ^thm_β` (triangle inequality).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::channels::{
    self, displaced_thermal_real, heterodyne_noise, heterodyne_tail, Amplifier, AmplifierKraus,
    ModeParams, Truncation,
};
use crate::error::{finite, invalid, Error, Result};
use crate::linalg::{RMat, C64};
use crate::metrics::thermal_trace_distance;
use crate::thermal_codec::{exact_codec_error, robust_floor};

/// Which of `(|α|, φ, β)` are unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    /// Everything known.
    Known,
    /// Only `β` unknown.
    Thermal,
    /// `α` unknown, `β` known.
    Displacement,
    /// `α` and `β` unknown.
    DisplacementThermal,
    /// Only the phase unknown.
    Phase,
    /// Phase and `β` unknown.
    PhaseThermal,
    /// Only the modulus unknown.
    Modulus,
    /// Modulus and `β` unknown.
    ModulusThermal,
}

impl Case {
    pub const ALL: [Case; 8] = [
        Case::Known,
        Case::Thermal,
        Case::Displacement,
        Case::DisplacementThermal,
        Case::Phase,
        Case::PhaseThermal,
        Case::Modulus,
        Case::ModulusThermal,
    ];

    pub fn from_id(id: u8) -> Result<Case> {
        Case::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("case {id} outside 0..=7")))
    }

    pub fn id(self) -> u8 {
        Case::ALL.iter().position(|&c| c == self).unwrap() as u8
    }

    pub fn beta_unknown(self) -> bool {
        matches!(
            self,
            Case::Thermal | Case::DisplacementThermal | Case::PhaseThermal | Case::ModulusThermal
        )
    }

    /// Number of unknown parameters moving the eigenvalues (classical) and
    /// the eigenbasis (quantum).
    pub fn family(self) -> FamilyDims {
        let f_c = u32::from(self.beta_unknown());
        let f_q = match self {
            Case::Known | Case::Thermal => 0,
            Case::Displacement | Case::DisplacementThermal => 2,
            _ => 1,
        };
        FamilyDims { f_c, f_q }
    }

    fn estimates_displacement(self) -> bool {
        !matches!(self, Case::Known | Case::Thermal)
    }

    /// Exponent of the copies spent on the heterodyne estimate.
    fn split_exponent(self, delta: f64) -> f64 {
        match self {
            Case::Displacement | Case::DisplacementThermal => 1.0 - delta,
            _ => 1.0 - delta / 2.0,
        }
    }

    fn truncation_exponent(self, delta: f64) -> f64 {
        match self {
            Case::Displacement | Case::DisplacementThermal => 2.0 * delta,
            _ => delta,
        }
    }

    /// Exponent of the radius around `α` used by the error budget.
    fn radius_exponent(self, delta: f64) -> f64 {
        match self {
            Case::Displacement | Case::DisplacementThermal => -0.5 + 0.75 * delta,
            _ => -0.5 + 0.375 * delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FamilyDims {
    pub f_c: u32,
    pub f_q: u32,
}

impl FamilyDims {
    pub fn total(&self) -> u32 {
        self.f_c + self.f_q
    }
}

/// Ranges of the unknown parameters; only the ones the case treats as
/// unknown are used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamRanges {
    /// `|Re α|, |Im α| ≤ alpha_box`.
    pub alpha_box: f64,
    pub abs_alpha: (f64, f64),
    pub phase: (f64, f64),
    pub beta: (f64, f64),
}

impl ParamRanges {
    pub fn around(params: &ModeParams) -> Self {
        let a = params.alpha().norm();
        let top = (2.0 * a).max(1.0);
        ParamRanges {
            alpha_box: top,
            abs_alpha: (0.0, top),
            phase: (0.0, 2.0 * PI),
            beta: (0.0, 0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub case: Case,
    pub n: u64,
    pub delta: f64,
    pub params: ModeParams,
    pub ranges: ParamRanges,
    /// Fixed tracked-mode cutoff; `None` sizes it per draw.
    pub cutoff: Option<usize>,
    pub seed: u64,
    pub mc_samples: usize,
}

impl ProtocolConfig {
    pub fn new(case: Case, n: u64, delta: f64, params: ModeParams) -> Self {
        ProtocolConfig {
            case,
            n,
            delta,
            ranges: ParamRanges::around(&params),
            params,
            cutoff: None,
            seed: 0,
            mc_samples: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        finite(self.delta, "delta")?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid(format!("delta = {} outside (0, 1)", self.delta));
        }
        if self.n < 2 {
            return invalid("protocols need n >= 2");
        }
        if self.case.estimates_displacement() && self.mc_samples == 0 {
            return invalid("mc_samples must be positive");
        }
        let a = self.params.alpha();
        let r = &self.ranges;
        let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo - 1e-12 && x <= hi + 1e-12;
        let ok = match self.case {
            Case::Displacement | Case::DisplacementThermal => {
                r.alpha_box > 0.0 && a.re.abs() <= r.alpha_box && a.im.abs() <= r.alpha_box
            }
            Case::Phase | Case::PhaseThermal => {
                let width = r.phase.1 - r.phase.0;
                let rel = (a.arg() - r.phase.0).rem_euclid(2.0 * PI);
                width > 0.0
                    && width <= 2.0 * PI + 1e-12
                    && (a.norm() == 0.0 || rel <= width + 1e-12)
            }
            Case::Modulus | Case::ModulusThermal => {
                r.abs_alpha.1 > r.abs_alpha.0
                    && r.abs_alpha.0 >= 0.0
                    && inside(a.norm(), r.abs_alpha)
            }
            Case::Known | Case::Thermal => true,
        };
        if !ok {
            return invalid(format!(
                "parameters {a} outside the ranges of case {}",
                self.case.id()
            ));
        }
        if self.case.beta_unknown() && !inside(self.params.beta(), self.ranges.beta) {
            return invalid(format!("beta {} outside its range", self.params.beta()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub label: &'static str,
    pub cbits: f64,
    pub qubits: f64,
}

/// Memory of one protocol, in bits (log base 2).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryLedger {
    pub cbits: f64,
    pub qubits: f64,
    pub breakdown: Vec<LedgerEntry>,
    pub family: FamilyDims,
}

impl MemoryLedger {
    pub fn from_entries(breakdown: Vec<LedgerEntry>, family: FamilyDims) -> Self {
        MemoryLedger {
            // an empty f64 sum is -0.0; adding zero normalises it
            cbits: breakdown.iter().map(|e| e.cbits).sum::<f64>() + 0.0,
            qubits: breakdown.iter().map(|e| e.qubits).sum::<f64>() + 0.0,
            breakdown,
            family,
        }
    }

    pub fn cbits_ceil(&self) -> u64 {
        ceil_bits(self.cbits)
    }

    pub fn qubits_ceil(&self) -> u64 {
        ceil_bits(self.qubits)
    }

    /// Bits plus qubits.
    pub fn total(&self) -> f64 {
        self.cbits + self.qubits
    }
}

fn ceil_bits(x: f64) -> u64 {
    // shave rounding noise so exact integers are not bumped up
    (x - 1e-9).ceil().max(0.0) as u64
}

pub fn ledger_for(case: Case, n: u64, delta: f64) -> MemoryLedger {
    let l = (n as f64).log2();
    let mut e = Vec::new();
    match case {
        Case::Known | Case::Thermal => {}
        Case::Displacement | Case::DisplacementThermal => {
            e.push(LedgerEntry {
                label: "estimate",
                cbits: l,
                qubits: 0.0,
            });
            e.push(LedgerEntry {
                label: "quantum_mode",
                cbits: 0.0,
                qubits: 2.0 * delta * l,
            });
        }
        _ => {
            e.push(LedgerEntry {
                label: "estimate",
                cbits: 0.5 * l,
                qubits: 0.0,
            });
            e.push(LedgerEntry {
                label: "quantum_mode",
                cbits: 0.0,
                qubits: delta * l,
            });
        }
    }
    if case.beta_unknown() {
        e.push(LedgerEntry {
            label: "thermal_codec",
            cbits: (0.5 + delta) * l,
            qubits: 0.0,
        });
    }
    MemoryLedger::from_entries(e, case.family())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaEstimatorStats {
    pub mean: f64,
    pub empirical_variance: f64,
    /// `β(1−β)²/(n−1)`, from the per-sample geometric Fisher information.
    pub predicted_variance_geometric: f64,
    /// `1/((n−1) F)` with `F = (β²+1)/(β(1−β)³)`.
    pub predicted_variance_quoted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub max_leakage: f64,
    pub mean_leakage: f64,
    pub max_cutoff: usize,
    /// Fraction of draws whose estimate fell outside the budget radius.
    pub outside_radius_fraction: f64,
    pub gamma: f64,
    pub truncation_k: u64,
    pub codec_error: Option<f64>,
    pub beta_estimator: Option<BetaEstimatorStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub epsilon_hat: f64,
    pub epsilon_stderr: f64,
    pub ledger: MemoryLedger,
    pub diagnostics: Diagnostics,
}

/// Largest estimate over a grid of configurations, the computable stand-in
/// for the supremum over the parameter set.
pub fn grid_max(results: &[RunResult]) -> Option<f64> {
    results.iter().map(|r| r.epsilon_hat).reduce(f64::max)
}

pub fn fisher_geometric(beta: f64) -> f64 {
    1.0 / (beta * (1.0 - beta).powi(2))
}

pub fn fisher_quoted(beta: f64) -> f64 {
    (beta * beta + 1.0) / (beta * (1.0 - beta).powi(3))
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    est_copies: f64,
    s: f64,
    gamma: f64,
    k: u64,
    radius: f64,
}

fn geometry(case: Case, n: u64, delta: f64) -> Geometry {
    let nf = n as f64;
    let est_copies = nf.powf(case.split_exponent(delta));
    let s2 = nf - est_copies;
    Geometry {
        est_copies,
        s: s2.sqrt(),
        gamma: nf / s2,
        k: robust_floor(nf.powf(case.truncation_exponent(delta))),
        radius: nf.powf(case.radius_exponent(delta)),
    }
}

/// Cell index on `[0, width]` with `cells` cells; boundary values go to the
/// lower cell.
fn cell(u: f64, width: f64, cells: u64) -> u64 {
    let h = width / cells as f64;
    let k = (u / h).ceil() - 1.0;
    k.clamp(0.0, (cells - 1) as f64) as u64
}

fn cells_per_axis(n: u64) -> u64 {
    ((n as f64).sqrt().ceil() as u64).max(1)
}

/// Rounded estimate `â*` and the raw estimate `â` for one draw.
fn estimate<R: Rng + ?Sized>(cfg: &ProtocolConfig, g: &Geometry, rng: &mut R) -> (C64, C64) {
    let alpha = cfg.params.alpha();
    let noise = heterodyne_noise(cfg.params.beta(), rng) / g.est_copies.sqrt();
    let r = &cfg.ranges;
    let cells = cells_per_axis(cfg.n);
    match cfg.case {
        Case::Displacement | Case::DisplacementThermal => {
            let a_hat = alpha + noise;
            let a = r.alpha_box;
            let h = 2.0 * a / cells as f64;
            let centre = |u: f64| -a + (cell(u + a, 2.0 * a, cells) as f64 + 0.5) * h;
            (a_hat, C64::new(centre(a_hat.re), centre(a_hat.im)))
        }
        Case::Phase | Case::PhaseThermal => {
            let (lo, hi) = r.phase;
            let a_hat = alpha + noise * C64::from_polar(1.0, lo);
            let width = hi - lo;
            let mut rel = (a_hat.arg() - lo).rem_euclid(2.0 * PI);
            if rel > width {
                rel = if rel - width < 2.0 * PI - rel {
                    width
                } else {
                    0.0
                };
            }
            let h = width / cells as f64;
            let phi = lo + (cell(rel, width, cells) as f64 + 0.5) * h;
            (a_hat, C64::from_polar(alpha.norm(), phi))
        }
        Case::Modulus | Case::ModulusThermal => {
            let phi = alpha.arg();
            let rot = C64::from_polar(1.0, phi);
            let a_hat = alpha + noise * rot;
            let (lo, hi) = r.abs_alpha;
            let u = (a_hat * rot.conj()).re.clamp(lo, hi);
            let h = (hi - lo) / cells as f64;
            let m = lo + (cell(u - lo, hi - lo, cells) as f64 + 0.5) * h;
            (a_hat, rot * m)
        }
        Case::Known | Case::Thermal => (alpha, alpha),
    }
}

/// `β̂ = m̄/(1+m̄)` from the total photon count of `copies` thermal modes,
/// drawn as a Poisson mixture over a Gamma rate (exactly negative binomial).
fn estimate_beta<R: Rng + ?Sized>(beta: f64, copies: u64, rng: &mut R) -> f64 {
    if beta == 0.0 || copies == 0 {
        return 0.0;
    }
    let rate = Gamma::new(copies as f64, beta / (1.0 - beta))
        .expect("valid gamma")
        .sample(rng);
    let total = if rate > 0.0 {
        Poisson::new(rate).expect("valid poisson").sample(rng)
    } else {
        0.0
    };
    let mean = total / copies as f64;
    mean / (1.0 + mean)
}

/// Cutoff holding a displaced thermal state with amplitude `x` and thermal
/// parameter `beta` up to far-tail weight, rounded up to a multiple of 32.
pub fn tracked_cutoff(x: f64, beta: f64) -> usize {
    let nbar = beta / (1.0 - beta);
    let mean = x * x + nbar;
    let var = x * x * (2.0 * nbar + 1.0) + nbar * (nbar + 1.0);
    let c = mean + 12.0 * var.sqrt() + 16.0 * (1.0 + nbar);
    (c.ceil() as usize).div_ceil(32).max(1) * 32
}

/// Leakage above which a fixed cutoff aborts the run.
pub const LEAKAGE_ABORT: f64 = 1e-6;

struct Draw {
    x: f64,
    beta_hat: Option<f64>,
    outside: bool,
    cutoff: usize,
}

struct DrawOutcome {
    error: f64,
    leakage: f64,
}

fn tracked_error(x: f64, beta: f64, gamma: f64, k: u64, amp: &AmplifierKraus) -> DrawOutcome {
    let c = amp.cutoff();
    let (input, leak_in) = displaced_thermal_real(x, beta, c);
    let truncated = if (k as usize) < c {
        Truncation::new(k as usize).apply_real(&input)
    } else {
        input
    };
    let out = amp.apply_real(&truncated);
    let (target, leak_target) = displaced_thermal_real(gamma.sqrt() * x, beta, c);
    let leak_out = leak_in + (truncated.trace() - out.trace()).max(0.0);
    let diff: RMat = out - target;
    let td = 0.5
        * diff
            .symmetric_eigenvalues()
            .iter()
            .map(|v| v.abs())
            .sum::<f64>();
    DrawOutcome {
        error: td,
        leakage: leak_out.max(leak_target),
    }
}

pub fn run_case(cfg: &ProtocolConfig) -> Result<RunResult> {
    cfg.validate()?;
    let ledger = ledger_for(cfg.case, cfg.n, cfg.delta);
    let beta = cfg.params.beta();
    let g = geometry(cfg.case, cfg.n, cfg.delta);
    match cfg.case {
        Case::Known => {
            return Ok(RunResult {
                epsilon_hat: 0.0,
                epsilon_stderr: 0.0,
                ledger,
                diagnostics: Diagnostics {
                    max_leakage: 0.0,
                    mean_leakage: 0.0,
                    max_cutoff: 0,
                    outside_radius_fraction: 0.0,
                    gamma: 1.0,
                    truncation_k: 0,
                    codec_error: None,
                    beta_estimator: None,
                },
            })
        }
        Case::Thermal => {
            let e = exact_codec_error(cfg.n, beta, cfg.delta)?;
            return Ok(RunResult {
                epsilon_hat: e,
                epsilon_stderr: 0.0,
                ledger,
                diagnostics: Diagnostics {
                    max_leakage: 0.0,
                    mean_leakage: 0.0,
                    max_cutoff: 0,
                    outside_radius_fraction: 0.0,
                    gamma: 1.0,
                    truncation_k: 0,
                    codec_error: Some(e),
                    beta_estimator: None,
                },
            });
        }
        _ => {}
    }

    let beta_out = Amplifier::new(g.gamma)?.output_beta(beta);
    let draws: Vec<Draw> = (0..cfg.mc_samples as u64)
        .map(|i| {
            let mut rng = channels::stream(cfg.seed, i);
            let (a_hat, a_star) = estimate(cfg, &g, &mut rng);
            let beta_hat = cfg
                .case
                .beta_unknown()
                .then(|| estimate_beta(beta, cfg.n - 1, &mut rng));
            let x = g.s * (cfg.params.alpha() - a_star).norm();
            let cutoff = cfg
                .cutoff
                .unwrap_or_else(|| tracked_cutoff(g.gamma.sqrt() * x, beta_out.max(beta)));
            Draw {
                x,
                beta_hat,
                outside: (a_hat - cfg.params.alpha()).norm() > g.radius,
                cutoff,
            }
        })
        .collect();

    let mut tables: BTreeMap<usize, AmplifierKraus> = BTreeMap::new();
    let amp = Amplifier::new(g.gamma)?;
    for d in &draws {
        tables
            .entry(d.cutoff)
            .or_insert_with(|| amp.kraus(d.cutoff));
    }

    let outcomes: Vec<DrawOutcome> = draws
        .par_iter()
        .map(|d| tracked_error(d.x, beta, g.gamma, g.k, &tables[&d.cutoff]))
        .collect();

    if cfg.cutoff.is_some() {
        if let Some((d, o)) = draws
            .iter()
            .zip(&outcomes)
            .find(|(_, o)| o.leakage > LEAKAGE_ABORT)
        {
            return Err(Error::CutoffTooSmall {
                cutoff: d.cutoff,
                needed: tracked_cutoff(g.gamma.sqrt() * d.x, beta_out.max(beta)),
                what: format!(
                    "tracked amplitude {:.4} (leakage {:.2e})",
                    g.gamma.sqrt() * d.x,
                    o.leakage
                ),
            });
        }
    }

    let codec = if cfg.case.beta_unknown() {
        Some(exact_codec_error(cfg.n - 1, beta, cfg.delta)?)
    } else {
        None
    };
    let mut errors = Vec::with_capacity(draws.len());
    for (d, o) in draws.iter().zip(&outcomes) {
        let mut e = o.error;
        if let (Some(c), Some(bh)) = (codec, d.beta_hat) {
            e += c + thermal_trace_distance(bh, beta)?;
        }
        errors.push(e.min(1.0));
    }
    let m = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / m;
    let var = if errors.len() > 1 {
        errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };

    let beta_estimator = cfg.case.beta_unknown().then(|| {
        let bh: Vec<f64> = draws.iter().filter_map(|d| d.beta_hat).collect();
        let k = bh.len() as f64;
        let bm = bh.iter().sum::<f64>() / k;
        let bv = if bh.len() > 1 {
            bh.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let copies = (cfg.n - 1) as f64;
        BetaEstimatorStats {
            mean: bm,
            empirical_variance: bv,
            predicted_variance_geometric: 1.0 / (copies * fisher_geometric(beta)),
            predicted_variance_quoted: 1.0 / (copies * fisher_quoted(beta)),
        }
    });

    Ok(RunResult {
        epsilon_hat: mean,
        epsilon_stderr: (var / m).sqrt(),
        ledger,
        diagnostics: Diagnostics {
            max_leakage: outcomes.iter().map(|o| o.leakage).fold(0.0, f64::max),
            mean_leakage: outcomes.iter().map(|o| o.leakage).sum::<f64>() / m,
            max_cutoff: draws.iter().map(|d| d.cutoff).max().unwrap_or(0),
            outside_radius_fraction: draws.iter().filter(|d| d.outside).count() as f64 / m,
            gamma: g.gamma,
            truncation_k: g.k,
            codec_error: codec,
            beta_estimator,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalTerms {
    pub codec: f64,
    pub estimation: f64,
}

/// Separately evaluated terms whose sum bounds the protocol error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBudget {
    /// Probability that the estimate misses `α` by more than `radius`.
    pub heterodyne_tail: f64,
    pub amplifier_mismatch: f64,
    /// Truncation error at the largest tracked amplitude within `radius`.
    pub truncation: f64,
    pub thermal: Option<ThermalTerms>,
    pub radius: f64,
}

impl ErrorBudget {
    pub fn total(&self) -> f64 {
        self.heterodyne_tail
            + self.amplifier_mismatch
            + self.truncation
            + self
                .thermal
                .as_ref()
                .map_or(0.0, |t| t.codec + t.estimation)
    }
}

/// `½‖A^γ(ρ_{x,β}) − ρ_{√γ x,β}‖₁`, independent of `x` by covariance.
pub fn amplifier_mismatch(gamma: f64, beta: f64) -> Result<f64> {
    let amp = Amplifier::new(gamma)?;
    thermal_trace_distance(amp.output_beta(beta), beta)
}

/// Width of the confidence band of `β̂`, in standard deviations.
pub const BETA_BAND: f64 = 4.0;

pub fn error_budget(cfg: &ProtocolConfig) -> Result<ErrorBudget> {
    cfg.validate()?;
    let beta = cfg.params.beta();
    let g = geometry(cfg.case, cfg.n, cfg.delta);
    let thermal = if cfg.case.beta_unknown() {
        let codec = if cfg.case == Case::Thermal {
            exact_codec_error(cfg.n, beta, cfg.delta)?
        } else {
            exact_codec_error(cfg.n - 1, beta, cfg.delta)?
        };
        let estimation = if cfg.case == Case::Thermal || beta == 0.0 {
            0.0
        } else {
            let spread = BETA_BAND / ((cfg.n - 1) as f64 * fisher_geometric(beta)).sqrt();
            let up = (beta + spread).min(1.0 - 1e-12);
            let down = (beta - spread).max(0.0);
            erfc(BETA_BAND / 2f64.sqrt())
                + thermal_trace_distance(beta, up)?.max(thermal_trace_distance(beta, down)?)
        };
        Some(ThermalTerms { codec, estimation })
    } else {
        None
    };
    if !cfg.case.estimates_displacement() {
        return Ok(ErrorBudget {
            heterodyne_tail: 0.0,
            amplifier_mismatch: 0.0,
            truncation: 0.0,
            thermal,
            radius: 0.0,
        });
    }
    let heterodyne_tail = heterodyne_tail(beta, g.radius * g.est_copies.sqrt());
    let cells = cells_per_axis(cfg.n) as f64;
    let rounding = match cfg.case {
        Case::Displacement | Case::DisplacementThermal => {
            cfg.ranges.alpha_box * 2.0 / cells / 2f64.sqrt()
        }
        Case::Phase | Case::PhaseThermal => {
            let h = (cfg.ranges.phase.1 - cfg.ranges.phase.0) / cells;
            2.0 * cfg.params.alpha().norm() * (h / 4.0).sin()
        }
        _ => (cfg.ranges.abs_alpha.1 - cfg.ranges.abs_alpha.0) / cells / 2.0,
    };
    let x_max = g.s * (g.radius + rounding);
    let truncation = if g.k as f64 >= 1e6 {
        0.0
    } else {
        let c = tracked_cutoff(x_max, beta).max(g.k as usize + 1);
        let (rho, _) = displaced_thermal_real(x_max, beta, c);
        let cut = Truncation::new(g.k as usize).apply_real(&rho);
        0.5 * (cut - rho)
            .symmetric_eigenvalues()
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
    };
    Ok(ErrorBudget {
        heterodyne_tail,
        amplifier_mismatch: amplifier_mismatch(g.gamma, beta)?,
        truncation: truncation.min(1.0),
        thermal,
        radius: g.radius,
    })
}

/// Matrix form of the tracked-mode error for a given `|x|`; exposed for
/// cross-checks against the general channel code.
pub fn tracked_mode_error(x: f64, beta: f64, gamma: f64, k: u64, cutoff: usize) -> Result<f64> {
    let amp = Amplifier::new(gamma)?;
    Ok(tracked_error(x, beta, gamma, k, &amp.kraus(cutoff)).error)
}
