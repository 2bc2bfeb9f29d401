//! Truncated Fock-space states and operators for one or two bosonic modes.
//!
//! Two-mode vectors use the index `n1 * (cutoff + 1) + n2`. The two-mode
//! unitaries are stored block-diagonally (beam splitters conserve the total
//! photon number, the two-mode squeezer conserves the photon difference), so
//! applying them never touches a dense two-mode operator.

use nalgebra::DMatrix;

use crate::error::{finite, invalid, Error, Result};
use crate::linalg::{self, CMat, ChainExp, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modes {
    One,
    Two,
}

impl Modes {
    pub fn count(self) -> usize {
        match self {
            Modes::One => 1,
            Modes::Two => 2,
        }
    }

    pub fn dim(self, cutoff: usize) -> usize {
        (cutoff + 1).pow(self.count() as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

#[derive(Debug, Clone)]
pub struct ModeState {
    matrix: CMat,
    cutoff: usize,
    modes: Modes,
    leakage: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StateDiagnostics {
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub leakage: f64,
}

impl ModeState {
    pub fn new(matrix: CMat, cutoff: usize, modes: Modes, leakage: f64) -> Result<Self> {
        let dim = modes.dim(cutoff);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        if !(0.0..=1.0).contains(&leakage) {
            return invalid(format!("leakage {leakage} outside [0, 1]"));
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("density matrix"));
        }
        Ok(ModeState {
            matrix,
            cutoff,
            modes,
            leakage,
        })
    }

    pub fn from_diagonal(weights: &[f64], cutoff: usize, leakage: f64) -> Result<Self> {
        if weights.len() != cutoff + 1 {
            return Err(Error::DimensionMismatch {
                expected: cutoff + 1,
                got: weights.len(),
            });
        }
        let m = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            cutoff + 1,
            weights.iter().map(|&w| C64::new(w, 0.0)),
        ));
        ModeState::new(m, cutoff, Modes::One, leakage)
    }

    pub fn number_state(k: usize, cutoff: usize) -> Result<Self> {
        if k > cutoff {
            return Err(Error::CutoffTooSmall {
                cutoff,
                needed: k,
                what: "number state".into(),
            });
        }
        let mut w = vec![0.0; cutoff + 1];
        w[k] = 1.0;
        ModeState::from_diagonal(&w, cutoff, 0.0)
    }

    pub fn vacuum(cutoff: usize) -> Self {
        ModeState::number_state(0, cutoff).expect("vacuum always fits")
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn modes(&self) -> Modes {
        self.modes
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    fn require_single(&self) -> Result<()> {
        if self.modes != Modes::One {
            return Err(Error::ModeMismatch {
                expected: 1,
                got: self.modes.count(),
            });
        }
        Ok(())
    }

    pub fn mean_photon(&self) -> Result<f64> {
        self.require_single()?;
        Ok(self
            .matrix
            .diagonal()
            .iter()
            .enumerate()
            .map(|(k, z)| k as f64 * z.re)
            .sum())
    }

    /// `Tr(ρ a)`.
    pub fn first_moment(&self) -> Result<C64> {
        self.require_single()?;
        Ok((0..self.cutoff)
            .map(|k| self.matrix[(k + 1, k)] * ((k + 1) as f64).sqrt())
            .sum())
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn tensor(&self, other: &ModeState) -> Result<ModeState> {
        self.require_single()?;
        other.require_single()?;
        if self.cutoff != other.cutoff {
            return Err(Error::DimensionMismatch {
                expected: self.cutoff + 1,
                got: other.cutoff + 1,
            });
        }
        let leak = 1.0 - (1.0 - self.leakage) * (1.0 - other.leakage);
        ModeState::new(
            self.matrix.kronecker(&other.matrix),
            self.cutoff,
            Modes::Two,
            leak.clamp(0.0, 1.0),
        )
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        let eig = linalg::hermitian_eigenvalues(&self.matrix);
        StateDiagnostics {
            hermiticity_error: linalg::hermiticity_error(&self.matrix),
            min_eigenvalue: eig.first().copied().unwrap_or(0.0),
            trace: self.trace(),
            leakage: self.leakage,
        }
    }

    pub(crate) fn with_matrix(&self, matrix: CMat, leakage: f64) -> ModeState {
        ModeState {
            matrix,
            cutoff: self.cutoff,
            modes: self.modes,
            leakage: leakage.clamp(0.0, 1.0),
        }
    }

    /// Leakage after an operation changed the trace: lost weight is added,
    /// never subtracted.
    pub(crate) fn propagated_leakage(&self, new_trace: f64) -> f64 {
        (self.leakage + (self.trace() - new_trace).max(0.0)).min(1.0)
    }
}

/// Anything that maps states to states.
pub trait Channel {
    fn apply_to(&self, state: &ModeState) -> Result<ModeState>;
}

pub fn apply<C: Channel + ?Sized>(channel: &C, state: &ModeState) -> Result<ModeState> {
    channel.apply_to(state)
}

#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    matrix: CMat,
}

/// Operator on the truncated space, stored as a direct sum of blocks over
/// disjoint index sets.
#[derive(Debug, Clone)]
pub struct FockOperator {
    blocks: Vec<Block>,
    cutoff: usize,
    modes: Modes,
    unitary: bool,
    margin: usize,
    identity: bool,
    advisory: Option<String>,
}

/// Unitarity tolerance on the checked sub-block.
pub const UNITARY_TOL: f64 = 1e-8;

impl FockOperator {
    pub fn identity(cutoff: usize, modes: Modes) -> Self {
        let dim = modes.dim(cutoff);
        FockOperator {
            blocks: vec![Block {
                indices: (0..dim).collect(),
                matrix: CMat::identity(dim, dim),
            }],
            cutoff,
            modes,
            unitary: true,
            margin: 0,
            identity: true,
            advisory: None,
        }
    }

    pub fn from_dense(matrix: CMat, cutoff: usize, modes: Modes) -> Result<Self> {
        let dim = modes.dim(cutoff);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows(),
            });
        }
        Ok(FockOperator {
            blocks: vec![Block {
                indices: (0..dim).collect(),
                matrix,
            }],
            cutoff,
            modes,
            unitary: false,
            margin: 0,
            identity: false,
            advisory: None,
        })
    }

    fn claim_unitary(mut self, margin: usize) -> Result<Self> {
        self.unitary = true;
        self.margin = margin;
        let upto = self.cutoff.saturating_sub(margin);
        let defect = self.unitarity_defect(upto);
        if defect > UNITARY_TOL {
            return Err(Error::Numerical(format!(
                "unitarity defect {defect:e} on photon numbers <= {upto}"
            )));
        }
        Ok(self)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn modes(&self) -> Modes {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.modes.dim(self.cutoff)
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// Photon numbers above `cutoff - margin` are excluded from the
    /// unitarity claim.
    pub fn unitarity_margin(&self) -> usize {
        self.margin
    }

    pub fn advisory(&self) -> Option<&str> {
        self.advisory.as_deref()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    fn max_photon(&self, index: usize) -> usize {
        match self.modes {
            Modes::One => index,
            Modes::Two => {
                let d = self.cutoff + 1;
                (index / d).max(index % d)
            }
        }
    }

    /// `max |U†U - I|` over basis vectors with every mode holding at most
    /// `upto` photons.
    pub fn unitarity_defect(&self, upto: usize) -> f64 {
        let mut worst = 0.0f64;
        for b in &self.blocks {
            let keep: Vec<usize> = (0..b.indices.len())
                .filter(|&i| self.max_photon(b.indices[i]) <= upto)
                .collect();
            if keep.is_empty() {
                continue;
            }
            let gram = linalg::matmul(&b.matrix.adjoint(), &b.matrix);
            for &i in &keep {
                for &j in &keep {
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
                }
            }
        }
        worst
    }

    pub fn to_dense(&self) -> CMat {
        let dim = self.dim();
        let mut out = CMat::zeros(dim, dim);
        for b in &self.blocks {
            for (a, &i) in b.indices.iter().enumerate() {
                for (c, &j) in b.indices.iter().enumerate() {
                    out[(i, j)] = b.matrix[(a, c)];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> FockOperator {
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.matrix = b.matrix.adjoint();
        }
        out
    }

    pub fn compose(&self, other: &FockOperator) -> Result<FockOperator> {
        if self.cutoff != other.cutoff || self.modes != other.modes {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let dense = linalg::matmul(&self.to_dense(), &other.to_dense());
        let mut op = FockOperator::from_dense(dense, self.cutoff, self.modes)?;
        op.margin = self.margin.max(other.margin);
        Ok(op)
    }

    fn check_state(&self, state: &ModeState) -> Result<()> {
        if state.modes() != self.modes {
            return Err(Error::ModeMismatch {
                expected: self.modes.count(),
                got: state.modes().count(),
            });
        }
        if state.cutoff() != self.cutoff {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        Ok(())
    }
}

impl Channel for FockOperator {
    fn apply_to(&self, state: &ModeState) -> Result<ModeState> {
        self.check_state(state)?;
        if self.identity {
            return Ok(state.clone());
        }
        let rho = state.matrix();
        let out = if self.blocks.len() == 1 {
            linalg::sandwich(&self.blocks[0].matrix, rho)
        } else {
            let dim = self.dim();
            let mut out = CMat::zeros(dim, dim);
            let adj: Vec<CMat> = self.blocks.iter().map(|b| b.matrix.adjoint()).collect();
            for a in &self.blocks {
                let rows = rho.select_rows(a.indices.iter());
                for (b, b_adj) in self.blocks.iter().zip(&adj) {
                    let sub = rows.select_columns(b.indices.iter());
                    if sub.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                        continue;
                    }
                    let piece = linalg::matmul(&linalg::matmul(&a.matrix, &sub), b_adj);
                    for (p, &i) in a.indices.iter().enumerate() {
                        for (q, &j) in b.indices.iter().enumerate() {
                            out[(i, j)] = piece[(p, q)];
                        }
                    }
                }
            }
            out
        };
        let tr = out.diagonal().iter().map(|z| z.re).sum();
        Ok(state.with_matrix(out, state.propagated_leakage(tr)))
    }
}

/// Smallest cutoff at which `D_α` is expected to be faithful on low photon
/// numbers.
pub fn recommended_displacement_cutoff(abs_alpha: f64) -> usize {
    (4.0 * (abs_alpha * abs_alpha + abs_alpha + 1.0)).ceil() as usize
}

/// Default cutoff for a family with amplitudes up to `alpha_max` and thermal
/// parameter up to `beta_max`.
pub fn default_cutoff(alpha_max: f64, beta_max: f64) -> usize {
    let c = (8.0 * (alpha_max * alpha_max + 1.0) / (1.0 - beta_max)).ceil();
    (c as usize).max(32)
}

/// Real displacement `D_x` (x ≥ 0 real) in a space of dimension `dim`,
/// first `ncols` columns.
pub(crate) fn real_displacement_columns(x: f64, dim: usize, ncols: usize) -> DMatrix<f64> {
    linalg::quadrature_chain(dim).columns(x, ncols)
}

/// `exp(α a† − ᾱ a)` of the generator truncated at `cutoff`.
///
/// The truncated generator is anti-Hermitian, so the result is unitary on
/// the whole truncated space (margin 0); its low-photon columns approximate
/// the true displacement when `cutoff` follows
/// [`recommended_displacement_cutoff`].
pub fn displacement_matrix(alpha: C64, cutoff: usize) -> Result<FockOperator> {
    finite(alpha.re, "alpha")?;
    finite(alpha.im, "alpha")?;
    let x = alpha.norm();
    if cutoff == 0 && x > 0.5 {
        return invalid("cutoff 0 cannot represent a displacement with |alpha| > 0.5");
    }
    if x == 0.0 {
        return Ok(FockOperator::identity(cutoff, Modes::One));
    }
    let dim = cutoff + 1;
    let phi = alpha.arg();
    let real = real_displacement_columns(x, dim, dim);
    let m = CMat::from_fn(dim, dim, |j, k| {
        let phase = (j as f64 - k as f64) * phi;
        C64::from_polar(1.0, phase) * real[(j, k)]
    });
    let mut op = FockOperator::from_dense(m, cutoff, Modes::One)?.claim_unitary(0)?;
    if cutoff < recommended_displacement_cutoff(x) {
        op.advisory = Some(format!(
            "cutoff {cutoff} below the recommended {} for |alpha| = {x}",
            recommended_displacement_cutoff(x)
        ));
    }
    Ok(op)
}

fn chain_block(indices: Vec<usize>, sub: &[f64], scale: f64) -> Block {
    let m = if sub.is_empty() {
        DMatrix::identity(1, 1)
    } else {
        ChainExp::new(sub).exp(scale)
    };
    Block {
        indices,
        matrix: linalg::lift(&m),
    }
}

fn two_mode_index(cutoff: usize, n1: usize, n2: usize) -> usize {
    n1 * (cutoff + 1) + n2
}

/// Passive two-mode unitary `exp(τ(a1† a2 − a1 a2†))`, acting on coherent
/// amplitudes as `(α1, α2) → (cos τ α1 + sin τ α2, −sin τ α1 + cos τ α2)`.
///
/// Block-diagonal in the total photon number; each block is exactly
/// unitary (margin 0).
pub fn beam_splitter_unitary(tau: f64, cutoff: usize) -> Result<FockOperator> {
    finite(tau, "tau")?;
    if tau.abs() > std::f64::consts::PI {
        return invalid(format!("tau = {tau} outside [-pi, pi]"));
    }
    if tau == 0.0 {
        return Ok(FockOperator::identity(cutoff, Modes::Two));
    }
    let mut blocks = Vec::with_capacity(2 * cutoff + 1);
    for total in 0..=2 * cutoff {
        let lo = total.saturating_sub(cutoff);
        let hi = total.min(cutoff);
        // basis |total - k, k>, k = photons in mode 2
        let indices = (lo..=hi)
            .map(|k| two_mode_index(cutoff, total - k, k))
            .collect();
        let sub: Vec<f64> = (lo + 1..=hi)
            .map(|k| -((k * (total - k + 1)) as f64).sqrt())
            .collect();
        blocks.push(chain_block(indices, &sub, tau));
    }
    FockOperator {
        blocks,
        cutoff,
        modes: Modes::Two,
        unitary: false,
        margin: 0,
        identity: false,
        advisory: None,
    }
    .claim_unitary(0)
}

/// `exp(r(a† b† − a b))` truncated at `cutoff` photons per mode.
///
/// Block-diagonal in the photon difference `n1 − n2`; every block is the
/// exponential of a truncated anti-Hermitian chain, hence unitary
/// (margin 0).
pub fn two_mode_squeezer(r: f64, cutoff: usize) -> Result<FockOperator> {
    finite(r, "r")?;
    if r < 0.0 {
        return invalid(format!("squeeze parameter {r} < 0"));
    }
    if r == 0.0 {
        return Ok(FockOperator::identity(cutoff, Modes::Two));
    }
    let mut blocks = Vec::with_capacity(2 * cutoff + 1);
    for diff in -(cutoff as i64)..=(cutoff as i64) {
        let m = diff.unsigned_abs() as usize;
        let len = cutoff - m + 1;
        let indices = (0..len)
            .map(|j| {
                if diff >= 0 {
                    two_mode_index(cutoff, m + j, j)
                } else {
                    two_mode_index(cutoff, j, m + j)
                }
            })
            .collect();
        let sub: Vec<f64> = (0..len - 1)
            .map(|j| (((m + j + 1) * (j + 1)) as f64).sqrt())
            .collect();
        blocks.push(chain_block(indices, &sub, r));
    }
    FockOperator {
        blocks,
        cutoff,
        modes: Modes::Two,
        unitary: false,
        margin: 0,
        identity: false,
        advisory: None,
    }
    .claim_unitary(0)
}

pub fn partial_trace(state: &ModeState, keep: Subsystem) -> Result<ModeState> {
    if state.modes() != Modes::Two {
        return Err(Error::ModeMismatch {
            expected: 2,
            got: state.modes().count(),
        });
    }
    let c = state.cutoff();
    let d = c + 1;
    let rho = state.matrix();
    let out = CMat::from_fn(d, d, |i, j| {
        (0..d)
            .map(|k| match keep {
                Subsystem::First => rho[(two_mode_index(c, i, k), two_mode_index(c, j, k))],
                Subsystem::Second => rho[(two_mode_index(c, k, i), two_mode_index(c, k, j))],
            })
            .sum()
    });
    ModeState::new(out, c, Modes::One, state.leakage())
}
