//! Parsers for the list-valued command line flags.

use anyhow::{bail, Context, Result};

/// Parses a grid flag: either a comma-separated list (`0,0.5,1`) or a
/// log-spaced range `min:max:count` with `min > 0`. The result is sorted
/// ascending and deduplicated.
pub fn parse_grid(raw: &str) -> Result<Vec<f64>> {
    let mut values = if raw.contains(':') {
        let parts: Vec<&str> = raw.split(':').collect();
        if parts.len() != 3 {
            bail!("expected min:max:count, got {raw:?}");
        }
        let min: f64 = parts[0].parse().context("bad range minimum")?;
        let max: f64 = parts[1].parse().context("bad range maximum")?;
        let count: usize = parts[2].parse().context("bad range count")?;
        if !(min > 0.0) || !(max >= min) || count < 2 {
            bail!("log-spaced range needs 0 < min <= max and count >= 2");
        }
        let (lmin, lmax) = (min.ln(), max.ln());
        (0..count)
            .map(|i| (lmin + (lmax - lmin) * i as f64 / (count - 1) as f64).exp())
            .collect()
    } else {
        raw.split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid value {s:?}")))
            .collect::<Result<Vec<f64>>>()?
    };
    if values.is_empty() {
        bail!("empty grid");
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        bail!("grid values must be finite and nonnegative");
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    Ok(values)
}

/// Parses a seed list: `1,2,3` or an inclusive range `1..20`.
pub fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = if let Some((a, b)) = raw.split_once("..") {
        let start: u64 = a.trim().parse().context("bad range start")?;
        let end: u64 = b.trim().parse().context("bad range end")?;
        if end < start {
            bail!("seed range end before start");
        }
        (start..=end).collect()
    } else {
        raw.split(',')
            .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed {s:?}")))
            .collect::<Result<Vec<u64>>>()?
    };
    if seeds.is_empty() {
        bail!("empty seed list");
    }
    Ok(seeds)
}

/// Parses `f1,f2,f3` sample-split fractions.
pub fn parse_split(raw: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad fraction {s:?}")))
        .collect::<Result<Vec<f64>>>()?;
    if parts.len() != 3 {
        bail!("expected three fractions f1,f2,f3, got {raw:?}");
    }
    Ok((parts[0], parts[1], parts[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_list_is_sorted_and_deduped() {
        assert_eq!(parse_grid("1,0.5,1,0").unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_log_range() {
        let g = parse_grid("1:100:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert!((g[1] - 10.0).abs() < 1e-9);
        assert!((g[2] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn grid_rejects_negatives() {
        assert!(parse_grid("-1,2").is_err());
        assert!(parse_grid("0:10:3").is_err());
    }

    #[test]
    fn seeds_range_and_list() {
        assert_eq!(parse_seeds("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_seeds("7,3").unwrap(), vec![7, 3]);
        assert!(parse_seeds("5..2").is_err());
    }

    #[test]
    fn split_needs_three_parts() {
        assert_eq!(parse_split("0.5,0.25,0.25").unwrap(), (0.5, 0.25, 0.25));
        assert!(parse_split("0.5,0.5").is_err());
    }
}
