//! Exact error of the interval codec for `n` copies of a thermal state.
//!
//! The encoder measures the total photon number `m`, stores the index of the
//! interval containing it, and the decoder re-prepares a uniformly chosen
//! total from that interval (uniform over photon vectors of that total); the
//! last, unbounded interval is decoded to one fixed vector. Original and
//! decoded states are diagonal with weights depending only on the total, so
//! the n-mode trace distance reduces to a one-dimensional sum over `m`.

use statrs::function::gamma::ln_gamma;

use crate::channels::check_beta;
use crate::error::{finite, invalid, Result};

/// `⌊x⌋`, except that values within relative 1e-9 of an integer snap to it
/// (so `1024^0.7 = 128` is not floored to 127 by rounding noise).
pub fn robust_floor(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r.max(0.0) as u64
    } else {
        x.floor().max(0.0) as u64
    }
}

/// Intervals `L_0 = {0}`, `L_i = {(i−1)w+1, …, iw}` for `0 < i < t`, and the
/// tail `L_t = {(t−1)w+1, …}`, with `t + 1 = ⌊n^{1/2+δ}⌋` and
/// `w = ⌊n^{(1−δ)/2}⌋`. With `t = 0` the single interval is all of ℕ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalScheme {
    n: u64,
    delta: f64,
    t: u64,
    width: u64,
}

impl IntervalScheme {
    pub fn new(n: u64, delta: f64) -> Result<Self> {
        finite(delta, "delta")?;
        if n == 0 {
            return invalid("need at least one copy");
        }
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta = {delta} outside (0, 1)"));
        }
        let nf = n as f64;
        let count = robust_floor(nf.powf(0.5 + delta)).max(1);
        let width = robust_floor(nf.powf(0.5 * (1.0 - delta))).max(1);
        Ok(IntervalScheme {
            n,
            delta,
            t: count - 1,
            width,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    /// First total photon number of the tail interval.
    pub fn tail_start(&self) -> u64 {
        if self.t == 0 {
            0
        } else {
            (self.t - 1) * self.width + 1
        }
    }

    pub fn interval_index(&self, m: u64) -> u64 {
        if m == 0 || self.t == 0 {
            return 0;
        }
        m.div_ceil(self.width).min(self.t)
    }

    /// Inclusive bounds of interval `i`; `None` as upper bound for the tail.
    pub fn bounds(&self, i: u64) -> Option<(u64, Option<u64>)> {
        if i > self.t {
            return None;
        }
        if i == self.t {
            return Some((self.tail_start(), None));
        }
        if i == 0 {
            return Some((0, Some(0)));
        }
        Some(((i - 1) * self.width + 1, Some(i * self.width)))
    }
}

pub fn codec_memory_bits(scheme: &IntervalScheme) -> f64 {
    ((scheme.t() + 1) as f64).log2()
}

/// Law of the total photon number of `n` thermal copies: negative binomial
/// with weights `C(n+m−1, m) (1−β)^n β^m`, kept in the log domain.
#[derive(Debug, Clone)]
pub struct PhotonTotalLaw {
    n: u64,
    beta: f64,
    start: u64,
    log_weights: Vec<f64>,
    tail_bound: f64,
}

/// Weights more than this many nats below the peak are dropped.
const LOG_SPAN: f64 = 60.0;

impl PhotonTotalLaw {
    pub fn new(n: u64, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if n == 0 {
            return invalid("need at least one copy");
        }
        if beta == 0.0 {
            return Ok(PhotonTotalLaw {
                n,
                beta,
                start: 0,
                log_weights: vec![0.0],
                tail_bound: 0.0,
            });
        }
        let nf = n as f64;
        let (lb, l1b) = (beta.ln(), (1.0 - beta).ln());
        let log_w = |m: u64| {
            let mf = m as f64;
            ln_gamma(nf + mf) - ln_gamma(mf + 1.0) - ln_gamma(nf) + nf * l1b + mf * lb
        };
        // the ratio w(m+1)/w(m) = β(n+m)/(m+1) drops below one past the mode
        let mode = ((beta * nf - 1.0) / (1.0 - beta)).ceil().max(0.0) as u64;
        let peak = log_w(mode);
        let mut down = Vec::new();
        let (mut cur, mut m) = (peak, mode);
        while m > 0 {
            let prev = cur - lb - ((nf + m as f64 - 1.0) / m as f64).ln();
            if prev < peak - LOG_SPAN {
                break;
            }
            down.push(prev);
            cur = prev;
            m -= 1;
        }
        let start = m;
        down.reverse();
        let mut weights = down;
        weights.push(peak);
        let mut m = mode;
        let mut last = peak;
        loop {
            let next = last + lb + ((nf + m as f64) / (m as f64 + 1.0)).ln();
            m += 1;
            if next < peak - LOG_SPAN {
                break;
            }
            weights.push(next);
            last = next;
        }
        let ratio = beta * (nf + m as f64) / (m as f64 + 1.0);
        let tail_bound = (last.exp()) * ratio / (1.0 - ratio).max(f64::MIN_POSITIVE);
        let below = if start > 0 {
            (peak - LOG_SPAN).exp() * start as f64
        } else {
            0.0
        };
        Ok(PhotonTotalLaw {
            n,
            beta,
            start,
            log_weights: weights,
            tail_bound: tail_bound + below,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Inclusive support range `[lo, hi]` that is represented.
    pub fn support(&self) -> (u64, u64) {
        (self.start, self.start + self.log_weights.len() as u64 - 1)
    }

    pub fn log_weight(&self, m: u64) -> f64 {
        let (lo, hi) = self.support();
        if m < lo || m > hi {
            f64::NEG_INFINITY
        } else {
            self.log_weights[(m - lo) as usize]
        }
    }

    pub fn weight(&self, m: u64) -> f64 {
        self.log_weight(m).exp()
    }

    /// Upper bound on the probability outside the represented support.
    pub fn outside_mass_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn total_mass(&self) -> f64 {
        self.log_weights.iter().map(|l| l.exp()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecError {
    pub total: f64,
    /// Contribution of the bounded intervals.
    pub regular: f64,
    /// Contribution of the tail interval.
    pub tail: f64,
    /// Probability of landing in the tail interval.
    pub tail_mass: f64,
    /// Bound on the probability ignored by the adaptive support.
    pub ignored_mass: f64,
}

pub fn exact_codec_error(n: u64, beta: f64, delta: f64) -> Result<f64> {
    Ok(exact_codec_error_detailed(n, beta, delta)?.total)
}

pub fn exact_codec_error_detailed(n: u64, beta: f64, delta: f64) -> Result<CodecError> {
    let scheme = IntervalScheme::new(n, delta)?;
    check_beta(beta)?;
    if beta == 0.0 {
        return Ok(CodecError {
            total: 0.0,
            regular: 0.0,
            tail: 0.0,
            tail_mass: 0.0,
            ignored_mass: 0.0,
        });
    }
    let law = PhotonTotalLaw::new(n, beta)?;
    let (lo, hi) = law.support();
    let w = scheme.width() as f64;

    let mut regular = 0.0;
    let mut tail_mass = 0.0;
    let mut m = lo;
    while m <= hi {
        let i = scheme.interval_index(m);
        if i == scheme.t() {
            tail_mass += (m..=hi).map(|k| law.weight(k)).sum::<f64>();
            break;
        }
        let (a, b) = scheme.bounds(i).expect("index within scheme");
        let b = b.expect("bounded interval");
        if i == 0 {
            m = b + 1;
            continue;
        }
        let members: Vec<f64> = (a.max(lo)..=b.min(hi)).map(|k| law.weight(k)).collect();
        let s: f64 = members.iter().sum();
        let avg = s / w;
        let inside: f64 = members.iter().map(|x| (x - avg).abs()).sum();
        let outside = (scheme.width() as f64 - members.len() as f64) * avg;
        regular += 0.5 * (inside + outside);
        m = b + 1;
    }
    let t0 = scheme.tail_start() as f64;
    let nf = n as f64;
    let fixed_vector = (nf * (1.0 - beta).ln() + nf * t0 * beta.ln()).exp();
    let tail = (tail_mass - fixed_vector).max(0.0);
    let total = (regular + tail).clamp(0.0, 1.0);
    Ok(CodecError {
        total,
        regular,
        tail,
        tail_mass,
        ignored_mass: law.outside_mass_bound(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robust_floor_snaps_exact_powers() {
        assert_eq!(robust_floor(1024f64.powf(0.7)), 128);
        assert_eq!(robust_floor(2.9999), 2);
        assert_eq!(robust_floor(7.0), 7);
    }

    #[test]
    fn interval_examples() {
        let s = IntervalScheme::new(256, 0.2).unwrap();
        assert_eq!(s.width(), 9);
        assert_eq!(s.interval_index(0), 0);
        assert_eq!(s.interval_index(9), 1);
        assert_eq!(s.interval_index(10), 2);
        let beyond = (s.t() - 1) * s.width() + 1;
        assert_eq!(s.interval_index(beyond), s.t());
        assert_eq!(s.interval_index(beyond + 1000), s.t());
        assert_eq!(s.interval_index(beyond - 1), s.t() - 1);
    }

    #[test]
    fn memory_examples() {
        let s = IntervalScheme::new(1024, 0.2).unwrap();
        assert_eq!(codec_memory_bits(&s), 7.0);
        assert_eq!(
            codec_memory_bits(&IntervalScheme::new(1, 0.2).unwrap()),
            0.0
        );
        let mut prev = 0.0;
        for n in 1..3000 {
            let b = codec_memory_bits(&IntervalScheme::new(n, 0.2).unwrap());
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn law_normalises() {
        for &(n, b) in &[(1u64, 0.3), (7, 0.9), (1000, 0.5), (65536, 0.3)] {
            let law = PhotonTotalLaw::new(n, b).unwrap();
            assert!((law.total_mass() - 1.0).abs() < 1e-9, "n={n} b={b}");
            assert!(law.outside_mass_bound() < 1e-12);
        }
    }

    #[test]
    fn zero_beta_is_lossless() {
        assert_eq!(exact_codec_error(50, 0.0, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(exact_codec_error(0, 0.3, 0.2).is_err());
        assert!(exact_codec_error(10, 1.0, 0.2).is_err());
        assert!(IntervalScheme::new(10, 0.0).is_err());
    }
}
