//! Trace, Bures and Hellinger distances, their closed forms for the pair
//! (thermal, displaced thermal), and the Hellinger–Bures gap.

use crate::channels::{check_beta, NumberDephasing};
use crate::error::{invalid, Error, Result};
use crate::fock_engine::{apply, ModeState};
use crate::linalg::{self, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceReport {
    pub trace: f64,
    pub bures: f64,
    pub hellinger: f64,
}

fn check_pair(a: &ModeState, b: &ModeState) -> Result<()> {
    if a.cutoff() != b.cutoff() || a.modes() != b.modes() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

pub fn trace_distance(a: &ModeState, b: &ModeState) -> Result<f64> {
    check_pair(a, b)?;
    Ok(0.5 * linalg::trace_norm_hermitian(&(a.matrix() - b.matrix())))
}

/// `Tr|√a √b|`, the root fidelity.
pub fn root_fidelity(a: &ModeState, b: &ModeState) -> Result<f64> {
    check_pair(a, b)?;
    let sb = linalg::psd_sqrt(b.matrix());
    Ok(root_fidelity_with(a, &sb))
}

fn root_fidelity_with(a: &ModeState, sqrt_b: &linalg::CMat) -> f64 {
    let inner = linalg::matmul(&linalg::matmul(sqrt_b, a.matrix()), sqrt_b);
    linalg::hermitian_eigenvalues(&inner)
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum()
}

/// `Re Tr(√a √b)`.
pub fn affinity(a: &ModeState, b: &ModeState) -> Result<f64> {
    check_pair(a, b)?;
    let sa = linalg::psd_sqrt(a.matrix());
    let sb = linalg::psd_sqrt(b.matrix());
    Ok(affinity_with(&sa, &sb))
}

fn affinity_with(sa: &linalg::CMat, sb: &linalg::CMat) -> f64 {
    // Tr(AB) = Σ_ij A_ij B_ji; B Hermitian so B_ji = conj(B_ij)
    sa.iter()
        .zip(sb.iter())
        .map(|(x, y)| (x * y.conj()).re)
        .sum()
}

fn from_overlap(f: f64) -> f64 {
    (2.0 - 2.0 * f).max(0.0).sqrt()
}

pub fn bures_distance(a: &ModeState, b: &ModeState) -> Result<f64> {
    Ok(from_overlap(root_fidelity(a, b)?))
}

pub fn hellinger_distance(a: &ModeState, b: &ModeState) -> Result<f64> {
    Ok(from_overlap(affinity(a, b)?))
}

pub fn distances(a: &ModeState, b: &ModeState) -> Result<DistanceReport> {
    check_pair(a, b)?;
    let sa = linalg::psd_sqrt(a.matrix());
    let sb = linalg::psd_sqrt(b.matrix());
    Ok(DistanceReport {
        trace: trace_distance(a, b)?,
        bures: from_overlap(root_fidelity_with(a, &sb)),
        hellinger: from_overlap(affinity_with(&sa, &sb)),
    })
}

/// Exact `½‖ρ^thm_{b1} − ρ^thm_{b2}‖₁` of the untruncated states:
/// `max_k |b2^k − b1^k|`, attained where the geometric weights cross.
pub fn thermal_trace_distance(b1: f64, b2: f64) -> Result<f64> {
    check_beta(b1)?;
    check_beta(b2)?;
    let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
    if lo == hi {
        return Ok(0.0);
    }
    if lo == 0.0 {
        return Ok(hi);
    }
    let cross = ((1.0 - hi) / (1.0 - lo)).ln() / (lo / hi).ln();
    let k0 = cross.ceil().max(1.0) as i32;
    Ok((k0 - 1..=k0 + 1)
        .filter(|&k| k >= 1)
        .map(|k| hi.powi(k) - lo.powi(k))
        .fold(0.0, f64::max))
}

/// Unit in which the displacement amplitude enters a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeConvention {
    /// `α` of `D_α = exp(α a† − ᾱ a)`.
    Fock,
    /// Quadrature-mean amplitude `√2 α`; the exponent reads `|α|²/(4γ)`.
    Quadrature,
}

pub fn bures_gamma(beta: f64) -> f64 {
    (1.0 + beta) / (1.0 - beta)
}

pub fn hellinger_gamma(beta: f64) -> f64 {
    (beta.sqrt() + 1.0).powi(2) / (2.0 * (1.0 - beta))
}

fn closed_form(alpha: C64, gamma: f64, conv: AmplitudeConvention) -> f64 {
    let denom = match conv {
        AmplitudeConvention::Fock => 2.0 * gamma,
        AmplitudeConvention::Quadrature => 4.0 * gamma,
    };
    from_overlap((-alpha.norm_sqr() / denom).exp())
}

/// Bures distance between `ρ^thm_β` and `ρ_{α,β}`.
pub fn closed_form_bures(alpha: C64, beta: f64) -> f64 {
    closed_form_bures_in(alpha, beta, AmplitudeConvention::Fock)
}

/// Hellinger distance between `ρ^thm_β` and `ρ_{α,β}`.
pub fn closed_form_hellinger(alpha: C64, beta: f64) -> f64 {
    closed_form_hellinger_in(alpha, beta, AmplitudeConvention::Fock)
}

pub fn closed_form_bures_in(alpha: C64, beta: f64, conv: AmplitudeConvention) -> f64 {
    closed_form(alpha, bures_gamma(beta), conv)
}

pub fn closed_form_hellinger_in(alpha: C64, beta: f64, conv: AmplitudeConvention) -> f64 {
    closed_form(alpha, hellinger_gamma(beta), conv)
}

/// Tolerance below which `d_h < d_b` is treated as rounding.
pub const GAP_TOL: f64 = 1e-8;

/// `(d_h − d_b)² / 8`.
pub fn lemma4_gap(d_h: f64, d_b: f64) -> Result<f64> {
    if !(d_h.is_finite() && d_b.is_finite()) || d_b < -GAP_TOL {
        return invalid(format!(
            "distances must be finite and non-negative: {d_h}, {d_b}"
        ));
    }
    if d_h < d_b - GAP_TOL {
        return invalid(format!("hellinger {d_h} below bures {d_b}"));
    }
    Ok((d_h - d_b).max(0.0).powi(2) / 8.0)
}

/// Outcome of running a pair through the number-dephasing encoder with the
/// identity decoder.
#[derive(Debug, Clone, Copy)]
pub struct CommutingEncoderCheck {
    pub epsilon: f64,
    pub gap: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Any encoder with commuting outputs must pay recovery error `ε` with
/// `d_H − d_B ≤ 2√(2ε)`; this evaluates both sides for photon counting.
pub fn commuting_encoder_check(a: &ModeState, b: &ModeState) -> Result<CommutingEncoderCheck> {
    let ea = trace_distance(&apply(&NumberDephasing, a)?, a)?;
    let eb = trace_distance(&apply(&NumberDephasing, b)?, b)?;
    let epsilon = ea.max(eb);
    let d = distances(a, b)?;
    let gap = d.hellinger - d.bures;
    let bound = 2.0 * (2.0 * epsilon).sqrt();
    Ok(CommutingEncoderCheck {
        epsilon,
        gap,
        bound,
        holds: gap <= bound + 1e-6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{make_displaced_thermal, make_thermal, ModeParams};

    fn dts(alpha: f64, beta: f64, c: usize) -> ModeState {
        make_displaced_thermal(&ModeParams::new(C64::new(alpha, 0.0), beta).unwrap(), c).unwrap()
    }

    #[test]
    fn identical_and_orthogonal() {
        let a = dts(0.7, 0.3, 30);
        let d = distances(&a, &a).unwrap();
        assert!(d.trace < 1e-12 && d.bures < 1e-6 && d.hellinger < 1e-6);
        let v = ModeState::vacuum(5);
        let one = ModeState::number_state(1, 5).unwrap();
        assert!((trace_distance(&v, &one).unwrap() - 1.0).abs() < 1e-12);
        assert!(trace_distance(&v, &ModeState::vacuum(6)).is_err());
    }

    #[test]
    fn close_thermal_states_differ_by_beta_gap() {
        let a = make_thermal(0.3, 200).unwrap();
        let b = make_thermal(0.31, 200).unwrap();
        let td = trace_distance(&a, &b).unwrap();
        assert!((td - 0.01).abs() < 1e-12);
        assert!((thermal_trace_distance(0.3, 0.31).unwrap() - td).abs() < 1e-12);
        // first-order expansion 2Δβ/(1−β′)² overshoots by a factor ~4
        let expansion = 2.0 * 0.01 / (1.0f64 - 0.31).powi(2);
        assert!(expansion / td > 4.0);
    }

    #[test]
    fn thermal_trace_distance_matches_matrix_sum() {
        for &(b1, b2) in &[(0.0, 0.4), (0.2, 0.7), (0.6, 0.55), (0.5, 0.5)] {
            let a = make_thermal(b1, 300).unwrap();
            let b = make_thermal(b2, 300).unwrap();
            let m = trace_distance(&a, &b).unwrap();
            assert!(
                (thermal_trace_distance(b1, b2).unwrap() - m).abs() < 1e-12,
                "{b1} {b2}"
            );
        }
    }

    #[test]
    fn commuting_thermal_pair_has_no_gap() {
        let a = make_thermal(0.2, 150).unwrap();
        let b = make_thermal(0.5, 150).unwrap();
        let d = distances(&a, &b).unwrap();
        assert!((d.hellinger - d.bures).abs() < 1e-7);
    }

    #[test]
    fn vacuum_versus_unit_coherent_state() {
        let d = distances(&ModeState::vacuum(40), &dts(1.0, 0.0, 40)).unwrap();
        assert!((d.bures - (2.0 - 2.0 * (-0.5f64).exp()).sqrt()).abs() < 1e-5);
        assert!((d.hellinger - (2.0 - 2.0 * (-1.0f64).exp()).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn closed_forms() {
        let zero = C64::new(0.0, 0.0);
        assert_eq!(closed_form_bures(zero, 0.4), 0.0);
        assert_eq!(closed_form_hellinger(zero, 0.4), 0.0);
        let one = C64::new(1.0, 0.0);
        let q = closed_form_bures_in(one, 0.0, AmplitudeConvention::Quadrature);
        assert!((q - (2.0 - 2.0 * (-0.25f64).exp()).sqrt()).abs() < 1e-15);
        let d = distances(&make_thermal(0.3, 200).unwrap(), &dts(1.0, 0.3, 200)).unwrap();
        assert!((closed_form_bures(one, 0.3) - d.bures).abs() < 1e-6);
        assert!((closed_form_hellinger(one, 0.3) - d.hellinger).abs() < 1e-6);
        let quad = closed_form_hellinger_in(one, 0.3, AmplitudeConvention::Quadrature);
        assert!((quad - d.hellinger).abs() > 0.05);
    }

    #[test]
    fn gap_arithmetic() {
        assert_eq!(lemma4_gap(0.3, 0.3).unwrap(), 0.0);
        assert!((lemma4_gap(2f64.sqrt(), 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(lemma4_gap(0.1, 0.2).is_err());
        let d = distances(&make_thermal(0.3, 120).unwrap(), &dts(1.0, 0.3, 120)).unwrap();
        assert!(lemma4_gap(d.hellinger, d.bures).unwrap() > 0.0);
    }

    #[test]
    fn commuting_encoder_bound_on_displaced_pair() {
        let c =
            commuting_encoder_check(&make_thermal(0.3, 60).unwrap(), &dts(1.0, 0.3, 60)).unwrap();
        assert!(c.holds && c.gap > 0.0 && c.epsilon > 0.0);
    }
}
