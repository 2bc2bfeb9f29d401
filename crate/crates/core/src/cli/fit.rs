//! Log-log slope fits of sweep output.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::SweepRow;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: Option<f64>,
    /// 95% confidence interval; needs at least three points.
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub points: usize,
}

/// Ordinary least squares of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let k = x.len();
    if k < 2 || y.len() != k {
        return None;
    }
    let kf = k as f64;
    let mx = x.iter().sum::<f64>() / kf;
    let my = y.iter().sum::<f64>() / kf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (stderr, ci_low, ci_high) = if k > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        let se = (rss / (kf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, kf - 2.0)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        (Some(se), Some(slope - t * se), Some(slope + t * se))
    } else {
        (None, None, None)
    };
    Some(SlopeFit {
        slope,
        intercept,
        stderr,
        ci_low,
        ci_high,
        points: k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFit {
    pub case: u8,
    pub delta: f64,
    pub beta: f64,
    pub fit: Option<SlopeFit>,
    /// Rows dropped because `ε̂ ≤ 0`.
    pub skipped: usize,
}

/// Slope of `log₂ ε̂` against `log₂ n` per `(case, δ, β)` group, in order of
/// first appearance.
pub fn fit_rows(rows: &[SweepRow]) -> Vec<GroupFit> {
    let mut order: Vec<(u8, u64, u64)> = Vec::new();
    let mut groups: BTreeMap<(u8, u64, u64), (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        let key = (r.case, r.delta.to_bits(), r.beta.to_bits());
        let g = groups.entry(key).or_insert_with(|| {
            order.push(key);
            (Vec::new(), Vec::new(), 0)
        });
        if r.epsilon_hat > 0.0 && r.n > 0 {
            g.0.push((r.n as f64).log2());
            g.1.push(r.epsilon_hat.log2());
        } else {
            g.2 += 1;
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (x, y, skipped) = &groups[&key];
            GroupFit {
                case: key.0,
                delta: f64::from_bits(key.1),
                beta: f64::from_bits(key.2),
                fit: ols(x, y),
                skipped: *skipped,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = ols(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-15);
        assert!(f.stderr.unwrap() < 1e-12);
    }

    #[test]
    fn interval_covers_noisy_slope() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.1, 0.9, 2.2, 2.8, 4.1, 5.0];
        let f = ols(&x, &y).unwrap();
        assert!(f.ci_low.unwrap() < 1.0 && 1.0 < f.ci_high.unwrap());
        assert!(ols(&[1.0], &[1.0]).is_none());
    }
}
