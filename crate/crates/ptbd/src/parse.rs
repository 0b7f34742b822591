//! Parsers for command-line values.

use anyhow::{bail, Context};

/// `60,55,50`.
pub fn dims(s: &str) -> anyhow::Result<Vec<usize>> {
    let d = s
        .split(',')
        .map(|w| w.trim().parse::<usize>().with_context(|| format!("invalid extent `{w}`")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if d.is_empty() || d.contains(&0) {
        bail!("dimensions must be positive, got `{s}`");
    }
    Ok(d)
}

/// A nonnegative real, also accepted as a power of two: `0.125`, `2^-3`.
pub fn eta(s: &str) -> anyhow::Result<f64> {
    let v = match s.trim().split_once('^') {
        Some((base, exp)) => {
            let base: f64 = base.trim().parse().with_context(|| format!("invalid base in `{s}`"))?;
            let exp: i32 = exp.trim().parse().with_context(|| format!("invalid exponent in `{s}`"))?;
            base.powi(exp)
        }
        None => s.trim().parse().with_context(|| format!("invalid number `{s}`"))?,
    };
    if !(v.is_finite() && v >= 0.0) {
        bail!("eta must be finite and nonnegative, got `{s}`");
    }
    Ok(v)
}

/// Exponent of an exact power of two given as `2^e` or as a number.
pub fn power_of_two_exponent(s: &str) -> anyhow::Result<i32> {
    let v = eta(s)?;
    let e = v.log2().round();
    if v <= 0.0 || 2f64.powi(e as i32) != v {
        bail!("`{s}` is not a power of two");
    }
    Ok(e as i32)
}

/// `1..8` (inclusive), `3`, or `1,2,4`.
pub fn sizes(s: &str) -> anyhow::Result<Vec<usize>> {
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().with_context(|| format!("invalid range start in `{s}`"))?;
        let b: usize = b.trim().trim_start_matches('=').parse().with_context(|| format!("invalid range end in `{s}`"))?;
        (a..=b).collect()
    } else {
        dims(s)?
    };
    if out.is_empty() || out.contains(&0) {
        bail!("sizes must be a nonempty set of positive integers, got `{s}`");
    }
    Ok(out)
}
