//! Parsing of size lists and annealing-time grids given on the command line.

use hubbard_anneal::anneal::{log_grid, snap_to_step};

use crate::UsageError;

/// `"8"`, `"2,4,6"`, `"2..20"` or `"2..20..2"` (inclusive). Without an
/// explicit step a range advances by `default_step`.
pub fn parse_sizes(text: &str, default_step: usize) -> Result<Vec<usize>, UsageError> {
    let bad = || UsageError(format!("cannot read size list {text:?}"));
    let text = text.trim();
    if text.contains("..") {
        let parts: Vec<&str> = text.split("..").collect();
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        let (lo, hi, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, default_step),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return Err(bad()),
        };
        if step == 0 || hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).step_by(step).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
        .collect()
}

/// Comma-separated reals.
pub fn parse_reals(text: &str) -> Result<Vec<f64>, UsageError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| UsageError(format!("cannot read number {s:?}")))
        })
        .collect()
}

/// `"lo:hi:log10"` (log grid with that many points per decade), or an
/// explicit list. Every value is snapped to a multiple of `tau`.
pub fn parse_time_grid(text: &str, tau: f64) -> Result<Vec<f64>, UsageError> {
    let bad = |why: &str| UsageError(format!("cannot read T_A grid {text:?}: {why}"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, spacing] = parts.as_slice() else {
            return Err(bad("expected lo:hi:logN"));
        };
        let lo: f64 = lo.trim().parse().map_err(|_| bad("lower end"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad("upper end"))?;
        let per_decade: usize = spacing
            .trim()
            .strip_prefix("log")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("spacing must look like log10"))?;
        return log_grid(lo, hi, per_decade, tau).map_err(|e| bad(&e.to_string()));
    }
    let mut out = parse_reals(text)?;
    for t in &mut out {
        if !(*t > 0.0) {
            return Err(bad("times must be positive"));
        }
        *t = snap_to_step(*t, tau);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_sizes("8", 2).unwrap(), vec![8]);
        assert_eq!(parse_sizes("2, 4,6", 2).unwrap(), vec![2, 4, 6]);
        assert_eq!(parse_sizes("2..20", 2).unwrap().len(), 10);
        assert_eq!(parse_sizes("3..6", 1).unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(parse_sizes("20..200..60", 2).unwrap(), vec![20, 80, 140, 200]);
        assert!(parse_sizes("4..2", 1).is_err());
        assert!(parse_sizes("x", 1).is_err());
    }

    #[test]
    fn grids() {
        let g = parse_time_grid("1:40:log10", 0.025).unwrap();
        assert_eq!(g.first(), Some(&1.0));
        assert!(g.len() >= 16);
        assert_eq!(parse_time_grid("10,5,5.01", 0.025).unwrap(), vec![5.0, 10.0]);
        assert!(parse_time_grid("1:40:lin", 0.025).is_err());
        assert!(parse_time_grid("-1", 0.025).is_err());
    }
}
