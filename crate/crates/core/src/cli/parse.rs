//! Parsers for command-line values: complex literals, sample-size lists
//! and ranges, case names, intervals.

use crate::dts_protocols::Case;
use crate::linalg::C64;

fn float(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

/// `a`, `bi`, `a+bi`, `a-bi`, with `i` alone meaning one.
pub fn complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty complex literal".into());
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return Ok(C64::new(float(&t)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (float(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => float(other)?,
    };
    Ok(C64::new(re, im))
}

fn count(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Some((b, e)) = s.split_once('^') {
        let b: u64 = b.parse().map_err(|_| format!("bad base in {s:?}"))?;
        let e: u32 = e.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
        return b.checked_pow(e).ok_or_else(|| format!("{s} overflows"));
    }
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v = float(s)?;
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(format!("not a sample size: {s:?}"));
    }
    Ok(v as u64)
}

/// Comma-separated sizes; `b^p..b^q` expands to every power in between.
pub fn sizes(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (ba, ea) = a
                .trim()
                .split_once('^')
                .ok_or_else(|| format!("range {part:?} needs b^p..b^q"))?;
            let (bb, eb) = b
                .trim()
                .split_once('^')
                .ok_or_else(|| format!("range {part:?} needs b^p..b^q"))?;
            if ba != bb {
                return Err(format!("range {part:?} mixes bases"));
            }
            let lo: u32 = ea
                .parse()
                .map_err(|_| format!("bad exponent in {part:?}"))?;
            let hi: u32 = eb
                .parse()
                .map_err(|_| format!("bad exponent in {part:?}"))?;
            if hi < lo {
                return Err(format!("empty range {part:?}"));
            }
            for e in lo..=hi {
                out.push(count(&format!("{ba}^{e}"))?);
            }
        } else {
            out.push(count(part)?);
        }
    }
    if out.is_empty() {
        return Err("empty size list".into());
    }
    Ok(out)
}

/// A single size, in any form accepted by [`sizes`] except ranges.
pub fn sizes_one(s: &str) -> Result<u64, String> {
    count(s)
}

pub fn floats(s: &str) -> Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(float)
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

pub fn complexes(s: &str) -> Result<Vec<C64>, String> {
    let v = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(complex)
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

/// `lo:hi`.
pub fn interval(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("interval {s:?} needs lo:hi"))?;
    let (a, b) = (float(a)?, float(b)?);
    if b <= a {
        return Err(format!("empty interval {s:?}"));
    }
    Ok((a, b))
}

const NAMES: [&str; 8] = [
    "known",
    "thermal",
    "displacement",
    "displacement-thermal",
    "phase",
    "phase-thermal",
    "modulus",
    "modulus-thermal",
];

pub fn case(s: &str) -> Result<Case, String> {
    let t = s.trim().to_ascii_lowercase();
    if let Ok(id) = t.parse::<u8>() {
        return Case::from_id(id).map_err(|e| e.to_string());
    }
    NAMES
        .iter()
        .position(|&n| n == t)
        .map(|i| Case::ALL[i])
        .ok_or_else(|| format!("unknown case {s:?}; use 0-7 or one of {}", NAMES.join(", ")))
}

pub fn cases(s: &str) -> Result<Vec<Case>, String> {
    let v = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(case)
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty case list".into());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(complex("0.3+0i").unwrap(), C64::new(0.3, 0.0));
        assert_eq!(complex("0.3-0.2i").unwrap(), C64::new(0.3, -0.2));
        assert_eq!(complex("-0.2i").unwrap(), C64::new(0.0, -0.2));
        assert_eq!(complex("1e-3-2E+1i").unwrap(), C64::new(1e-3, -20.0));
        assert_eq!(complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(complex("2").unwrap(), C64::new(2.0, 0.0));
        assert!(complex("0.3+").is_err());
        assert!(complex("abc").is_err());
    }

    #[test]
    fn size_lists_and_ranges() {
        assert_eq!(sizes("2^8..2^10").unwrap(), vec![256, 512, 1024]);
        assert_eq!(sizes("100,1e3,10^4").unwrap(), vec![100, 1000, 10_000]);
        assert!(sizes("2^3..3^4").is_err());
        assert!(sizes("").is_err());
        assert!(sizes("1.5").is_err());
    }

    #[test]
    fn case_names() {
        assert_eq!(case("thermal").unwrap(), Case::Thermal);
        assert_eq!(case("2").unwrap(), Case::Displacement);
        assert!(case("9").is_err());
    }
}
