//! Single-mode states, channels and the heterodyne measurement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{finite, invalid, Error, Result};
use crate::fock_engine::{self, Channel, ModeState, Modes};
use crate::linalg::{self, CMat, RMat, C64};

/// Deterministic random stream `index` of run `seed`.
///
/// Every stochastic routine takes its generator from here, so a draw can be
/// replayed on its own regardless of how work was scheduled.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Displacement `α` and thermal parameter `β ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    alpha: C64,
    beta: f64,
}

impl ModeParams {
    pub fn new(alpha: C64, beta: f64) -> Result<Self> {
        finite(alpha.re, "alpha")?;
        finite(alpha.im, "alpha")?;
        check_beta(beta)?;
        Ok(ModeParams { alpha, beta })
    }

    pub fn thermal(beta: f64) -> Result<Self> {
        ModeParams::new(C64::new(0.0, 0.0), beta)
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `β / (1 − β)`.
    pub fn thermal_photons(&self) -> f64 {
        self.beta / (1.0 - self.beta)
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<f64> {
    finite(beta, "beta")?;
    if !(0.0..1.0).contains(&beta) {
        return invalid(format!("beta = {beta} outside [0, 1)"));
    }
    Ok(beta)
}

pub fn make_thermal(beta: f64, cutoff: usize) -> Result<ModeState> {
    check_beta(beta)?;
    let w: Vec<f64> = (0..=cutoff)
        .map(|j| (1.0 - beta) * beta.powi(j as i32))
        .collect();
    ModeState::from_diagonal(&w, cutoff, beta.powi(cutoff as i32 + 1))
}

/// Last thermal component kept when building displaced states.
fn thermal_reach(beta: f64, cutoff: usize, x: f64) -> usize {
    if beta == 0.0 {
        return 0;
    }
    let by_weight = (18.0 * std::f64::consts::LN_10 / -beta.ln()).ceil();
    let by_rows = ((cutoff as f64).sqrt() + x + 6.0).powi(2).ceil();
    by_weight.min(by_rows) as usize
}

/// Real matrix of `D_x ρ^thm_β D_x†` for real `x ≥ 0`, with its leakage.
///
/// The displacement acts in a padded space large enough that every kept
/// thermal component is displaced without touching the padded edge; rows
/// and columns above `cutoff` are then dropped, so the reported leakage is
/// the weight that genuinely lies above the cutoff.
pub(crate) fn displaced_thermal_real(x: f64, beta: f64, cutoff: usize) -> (RMat, f64) {
    let d = cutoff + 1;
    if x == 0.0 {
        let m = RMat::from_fn(d, d, |i, j| {
            if i == j {
                (1.0 - beta) * beta.powi(i as i32)
            } else {
                0.0
            }
        });
        return (m, beta.powi(cutoff as i32 + 1));
    }
    let kmax = thermal_reach(beta, cutoff, x);
    let reach = (kmax as f64).sqrt() + x;
    let need = (reach * reach + 8.0 * reach + 32.0).ceil() as usize;
    let dim = need.max(cutoff + 16).max(kmax + 16).div_ceil(32) * 32;
    let cols = fock_engine::real_displacement_columns(x, dim, kmax + 1);
    let mut w = cols.rows(0, d).into_owned();
    for k in 0..=kmax {
        let s = ((1.0 - beta) * beta.powi(k as i32)).sqrt();
        w.column_mut(k).iter_mut().for_each(|v| *v *= s);
    }
    let m = &w * w.transpose();
    let leak = (1.0 - m.trace()).clamp(0.0, 1.0);
    (m, leak)
}

pub fn make_displaced_thermal(params: &ModeParams, cutoff: usize) -> Result<ModeState> {
    let alpha = params.alpha();
    let (real, leak) = displaced_thermal_real(alpha.norm(), params.beta(), cutoff);
    let phi = alpha.arg();
    let m = if phi == 0.0 {
        linalg::lift(&real)
    } else {
        CMat::from_fn(cutoff + 1, cutoff + 1, |j, k| {
            C64::from_polar(real[(j, k)], (j as f64 - k as f64) * phi)
        })
    };
    ModeState::new(m, cutoff, Modes::One, leak)
}

/// Quantum-limited phase-insensitive amplifier of gain `γ`, defined as the
/// reduced action of the two-mode squeezer with `r = acosh √γ` on the
/// signal and a vacuum ancilla.
#[derive(Debug, Clone, Copy)]
pub struct Amplifier {
    gamma: f64,
}

impl Amplifier {
    pub fn new(gamma: f64) -> Result<Self> {
        finite(gamma, "gamma")?;
        if gamma < 1.0 {
            return invalid(format!("amplifier gain {gamma} < 1"));
        }
        Ok(Amplifier { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn squeeze_parameter(&self) -> f64 {
        self.gamma.sqrt().acosh()
    }

    /// Thermal parameter of the output for a displaced thermal input,
    /// from `n̄ → γ n̄ + γ − 1`.
    pub fn output_beta(&self, beta: f64) -> f64 {
        let g = self.gamma;
        (g * beta + (g - 1.0) * (1.0 - beta)) / g
    }

    /// Alternative closed form `[βγ + 4(1−β)γ(γ−1)] / [γ + (1−β)(γ−1)]`
    /// sometimes quoted for the output thermal parameter; kept so reports
    /// can show how far it is from the constructed channel.
    pub fn quoted_output_beta(&self, beta: f64) -> f64 {
        let g = self.gamma;
        (beta * g + 4.0 * (1.0 - beta) * g * (g - 1.0)) / (g + (1.0 - beta) * (g - 1.0))
    }

    /// Kraus amplitudes for inputs with at most `cutoff` photons.
    pub fn kraus(&self, cutoff: usize) -> AmplifierKraus {
        let r = self.squeeze_parameter();
        let columns = (0..=cutoff)
            .map(|m| {
                if r == 0.0 {
                    vec![1.0]
                } else {
                    squeezer_column(m, r, cutoff - m)
                }
            })
            .collect();
        AmplifierKraus { cutoff, columns }
    }
}

/// Amplitudes `⟨m+j, j| S(r) |m, 0⟩ = tanh^j r · √C(m+j, j) / cosh^{m+1} r`
/// for `j ≤ keep`, accumulated in the log domain.
fn squeezer_column(m: usize, r: f64, keep: usize) -> Vec<f64> {
    let log_t = r.tanh().ln();
    let mut log_c = -((m + 1) as f64) * r.cosh().ln();
    let mut out = Vec::with_capacity(keep + 1);
    for j in 0..=keep {
        if j > 0 {
            log_c += log_t + 0.5 * (((m + j) as f64) / j as f64).ln();
        }
        if log_c < -745.0 && j > 0 {
            break;
        }
        out.push(log_c.exp());
    }
    out
}

/// Amplifier restricted to a fixed cutoff: `columns[m][j]` is the
/// amplitude for `|m⟩ → |m+j⟩` with `j` photons left in the ancilla.
#[derive(Debug, Clone)]
pub struct AmplifierKraus {
    cutoff: usize,
    columns: Vec<Vec<f64>>,
}

impl AmplifierKraus {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitude(&self, m: usize, j: usize) -> f64 {
        self.columns
            .get(m)
            .and_then(|c| c.get(j))
            .copied()
            .unwrap_or(0.0)
    }

    /// Real-matrix action used on the protocol hot path.
    pub(crate) fn apply_real(&self, rho: &RMat) -> RMat {
        let d = self.cutoff + 1;
        let mut out = RMat::zeros(d, d);
        for m in 0..d {
            let cm = &self.columns[m];
            for mp in 0..d {
                let v = rho[(m, mp)];
                if v == 0.0 {
                    continue;
                }
                let cp = &self.columns[mp];
                for j in 0..cm.len().min(cp.len()) {
                    out[(m + j, mp + j)] += cm[j] * cp[j] * v;
                }
            }
        }
        out
    }
}

impl Channel for AmplifierKraus {
    fn apply_to(&self, state: &ModeState) -> Result<ModeState> {
        if state.modes() != Modes::One {
            return Err(Error::ModeMismatch {
                expected: 1,
                got: state.modes().count(),
            });
        }
        if state.cutoff() != self.cutoff {
            return Err(Error::DimensionMismatch {
                expected: self.cutoff + 1,
                got: state.dim(),
            });
        }
        let rho = state.matrix();
        let d = self.cutoff + 1;
        let mut out = CMat::zeros(d, d);
        for m in 0..d {
            let cm = &self.columns[m];
            for mp in 0..d {
                let v = rho[(m, mp)];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let cp = &self.columns[mp];
                for j in 0..cm.len().min(cp.len()) {
                    out[(m + j, mp + j)] += v * (cm[j] * cp[j]);
                }
            }
        }
        let tr = out.diagonal().iter().map(|z| z.re).sum();
        Ok(state.with_matrix(out, state.propagated_leakage(tr)))
    }
}

impl Channel for Amplifier {
    fn apply_to(&self, state: &ModeState) -> Result<ModeState> {
        self.kraus(state.cutoff()).apply_to(state)
    }
}

/// `P_K ρ P_K + (Tr ρ − Tr P_K ρ) |0⟩⟨0|`.
///
/// The discarded weight is measured against the input trace, so the output
/// trace equals the input trace exactly even for leaky inputs.
#[derive(Debug, Clone, Copy)]
pub struct Truncation {
    k: usize,
}

impl Truncation {
    pub fn new(k: usize) -> Self {
        Truncation { k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub(crate) fn apply_real(&self, rho: &RMat) -> RMat {
        let mut out = RMat::zeros(rho.nrows(), rho.ncols());
        let k = self.k.min(rho.nrows() - 1);
        out.view_mut((0, 0), (k + 1, k + 1))
            .copy_from(&rho.view((0, 0), (k + 1, k + 1)));
        let lost = rho.trace() - out.trace();
        out[(0, 0)] += lost;
        out
    }
}

impl Channel for Truncation {
    fn apply_to(&self, state: &ModeState) -> Result<ModeState> {
        if state.modes() != Modes::One {
            return Err(Error::ModeMismatch {
                expected: 1,
                got: state.modes().count(),
            });
        }
        if self.k > state.cutoff() {
            return Err(Error::CutoffTooSmall {
                cutoff: state.cutoff(),
                needed: self.k,
                what: "truncation projector".into(),
            });
        }
        let rho = state.matrix();
        let k = self.k;
        let mut out = CMat::zeros(rho.nrows(), rho.ncols());
        out.view_mut((0, 0), (k + 1, k + 1))
            .copy_from(&rho.view((0, 0), (k + 1, k + 1)));
        let kept: f64 = (0..=k).map(|i| rho[(i, i)].re).sum();
        out[(0, 0)] += C64::new(state.trace() - kept, 0.0);
        Ok(state.with_matrix(out, state.leakage()))
    }
}

/// Photon counting followed by re-preparation of the observed number state.
#[derive(Debug, Clone, Copy, Default)]
pub struct NumberDephasing;

impl Channel for NumberDephasing {
    fn apply_to(&self, state: &ModeState) -> Result<ModeState> {
        let diag = CMat::from_diagonal(&state.matrix().diagonal());
        Ok(state.with_matrix(diag, state.leakage()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeterodyneSample {
    pub value: C64,
    pub pdf_at_value: f64,
}

/// Outcome density `((1−β)/π) exp(−(1−β)|â − α|²)` of a heterodyne
/// measurement on `ρ_{α,β}`.
pub fn heterodyne_pdf(params: &ModeParams, a_hat: C64) -> f64 {
    let k = 1.0 - params.beta();
    k / std::f64::consts::PI * (-k * (a_hat - params.alpha()).norm_sqr()).exp()
}

/// Per-axis standard deviation of the heterodyne outcome.
pub fn heterodyne_sigma(beta: f64) -> f64 {
    (0.5 / (1.0 - beta)).sqrt()
}

/// Probability that the outcome lands farther than `radius` from `α`.
pub fn heterodyne_tail(beta: f64, radius: f64) -> f64 {
    (-(1.0 - beta) * radius * radius).exp()
}

/// Standard complex normal pair scaled to the heterodyne spread.
pub(crate) fn heterodyne_noise<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> C64 {
    let s = heterodyne_sigma(beta);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

pub fn heterodyne_sample<R: Rng + ?Sized>(params: &ModeParams, rng: &mut R) -> HeterodyneSample {
    let value = params.alpha() + heterodyne_noise(params.beta(), rng);
    HeterodyneSample {
        value,
        pdf_at_value: heterodyne_pdf(params, value),
    }
}
