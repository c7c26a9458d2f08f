//! Residual-energy analysis: power-law fits, onset of the asymptotic
//! `ΔE ∝ T_A^{−p}` regime, system-size scaling and a shot-based energy
//! estimator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::error::{Error, Result};
use crate::records::SweepRecord;
use crate::simcore::{Pauli, PauliSum, StateVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }
}

/// Least squares on `(ln x, ln y)`; `y ≈ prefactor · x^exponent`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::arg(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::arg("power-law fit needs positive finite data"));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::arg("power-law fit needs at least two distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
        points: points.len(),
    })
}

/// Log-log slopes between neighbouring points; `NaN` where undefined.
pub fn local_slopes(curve: &[(f64, f64)]) -> Vec<f64> {
    curve
        .windows(2)
        .map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x0 > 0.0 && x1 > 0.0 && y0 > 0.0 && y1 > 0.0 {
                (y1 / y0).ln() / (x1 / x0).ln()
            } else {
                f64::NAN
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnsetConfig {
    /// Expected decay power `p` in `ΔE ∝ T_A^{−p}`.
    pub power: f64,
    /// Allowed deviation of each local slope from `−p`.
    pub tolerance: f64,
    /// Shortest suffix accepted as an onset.
    pub min_points: usize,
}

impl OnsetConfig {
    pub fn new(power: f64) -> Self {
        OnsetConfig {
            power,
            tolerance: 0.25,
            min_points: 3,
        }
    }

    pub fn with_tolerance(self, tolerance: f64) -> Self {
        OnsetConfig { tolerance, ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Onset {
    /// `ΔE` at the first point of the regime.
    pub epsilon: f64,
    /// Geometric mean of `ΔE · T_A^p` over the regime.
    pub alpha: f64,
    /// `T_A` at the first point of the regime.
    pub t_a: f64,
    pub start: usize,
    pub points: usize,
}

/// Longest tail of `curve` (sorted by `T_A`) where every local slope lies
/// within the tolerance of `−p`. `None` when that tail is too short.
pub fn detect_onset(curve: &[(f64, f64)], cfg: &OnsetConfig) -> Result<Option<Onset>> {
    if curve.len() < 6 {
        return Err(Error::arg(format!(
            "onset detection needs at least 6 points, got {}",
            curve.len()
        )));
    }
    if curve.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::arg("curve must be sorted by strictly increasing T_A"));
    }
    let slopes = local_slopes(curve);
    let mut start = curve.len() - 1;
    while start > 0 && (slopes[start - 1] + cfg.power).abs() <= cfg.tolerance {
        start -= 1;
    }
    let points = curve.len() - start;
    if points < cfg.min_points.max(2) {
        return Ok(None);
    }
    let tail = &curve[start..];
    let log_mean = tail
        .iter()
        .map(|&(t, e)| e.ln() + cfg.power * t.ln())
        .sum::<f64>()
        / points as f64;
    Ok(Some(Onset {
        epsilon: tail[0].1,
        alpha: log_mean.exp(),
        t_a: tail[0].0,
        start,
        points,
    }))
}

/// Per-size residual curves, sorted by `T_A`.
pub fn residual_curves(records: &[SweepRecord]) -> BTreeMap<usize, Vec<(f64, f64)>> {
    let mut out: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        out.entry(r.l).or_default().push((r.t_a, r.delta_e));
    }
    for curve in out.values_mut() {
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        curve.dedup_by(|a, b| a.0 == b.0);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeOnset {
    #[serde(rename = "L")]
    pub l: usize,
    pub alpha: f64,
    pub epsilon: f64,
    #[serde(rename = "T_A_onset")]
    pub t_a: f64,
    pub points: usize,
    /// `T_A` values inside the regime where `ΔE` rose from the previous point.
    pub increases: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub power: f64,
    pub onsets: Vec<SizeOnset>,
    /// Sizes whose curve shows no regime (or is too short to test).
    #[serde(rename = "no-onset")]
    pub no_onset: Vec<usize>,
    /// `α(L) ∝ L^a`.
    pub alpha_fit: Option<PowerLawFit>,
    /// `ε(L) ∝ L^{−b}`; the fit exponent is `−b`.
    pub epsilon_fit: Option<PowerLawFit>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `(a + b)/p`: growth of the annealing time at which the regime starts.
    pub onset_time_exponent: Option<f64>,
    /// `a/p`: growth of the annealing time for a fixed target residual.
    pub fixed_precision_exponent: Option<f64>,
}

/// Fit `α(L)` and `ε(L)` across sizes. Records must share `U`, schedule and
/// grouping. Fewer than three sizes with an onset leave the fits empty.
pub fn scaling_report(records: &[SweepRecord], cfg: &OnsetConfig) -> Result<ScalingReport> {
    if let Some(first) = records.first() {
        if records.iter().any(|r| {
            r.u != first.u || r.schedule != first.schedule || r.grouping != first.grouping
        }) {
            return Err(Error::arg(
                "scaling report needs records with a single U, schedule and grouping",
            ));
        }
    }
    let mut onsets = Vec::new();
    let mut no_onset = Vec::new();
    for (l, curve) in residual_curves(records) {
        let found = if curve.len() < 6 {
            None
        } else {
            detect_onset(&curve, cfg)?
        };
        match found {
            Some(o) => onsets.push(SizeOnset {
                l,
                alpha: o.alpha,
                epsilon: o.epsilon,
                t_a: o.t_a,
                points: o.points,
                increases: curve[o.start..]
                    .windows(2)
                    .filter(|w| w[1].1 > w[0].1)
                    .map(|w| w[1].0)
                    .collect(),
            }),
            None => no_onset.push(l),
        }
    }
    let (alpha_fit, epsilon_fit) = if onsets.len() >= 3 {
        let a: Vec<_> = onsets.iter().map(|o| (o.l as f64, o.alpha)).collect();
        let e: Vec<_> = onsets.iter().map(|o| (o.l as f64, o.epsilon)).collect();
        (fit_power_law(&a).ok(), fit_power_law(&e).ok())
    } else {
        (None, None)
    };
    let a = alpha_fit.as_ref().map(|f| f.exponent);
    let b = epsilon_fit.as_ref().map(|f| -f.exponent);
    Ok(ScalingReport {
        power: cfg.power,
        onsets,
        no_onset,
        onset_time_exponent: a.zip(b).map(|(a, b)| (a + b) / cfg.power),
        fixed_precision_exponent: a.map(|a| a / cfg.power),
        alpha_fit,
        epsilon_fit,
        a,
        b,
    })
}

impl ScalingReport {
    /// Plain-text table.
    pub fn to_table(&self) -> String {
        let mut s = format!("p = {}\n{:>4} {:>14} {:>14} {:>10}\n", self.power, "L", "alpha", "epsilon", "T_A");
        for o in &self.onsets {
            s += &format!("{:>4} {:>14.6e} {:>14.6e} {:>10.4}\n", o.l, o.alpha, o.epsilon, o.t_a);
        }
        for l in &self.no_onset {
            s += &format!("{l:>4} {:>14}\n", "no onset");
        }
        for o in self.onsets.iter().filter(|o| !o.increases.is_empty()) {
            s += &format!("L = {}: residual rises in the regime at T_A = {:?}\n", o.l, o.increases);
        }
        let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        s += &format!(
            "a = {}  b = {}  (a+b)/p = {}  a/p = {}\n",
            show(self.a),
            show(self.b),
            show(self.onset_time_exponent),
            show(self.fixed_precision_exponent)
        );
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub shots_per_group: usize,
}

/// Estimate `⟨op⟩` from measurements. Terms are split into an all-`X`, an
/// all-`Y` and an all-`Z` group; each group is measured in its own basis
/// (`H` on every qubit for `X`, `−X` for `Y`) with `shots` samples.
pub fn estimate_energy_sampling(
    state: &StateVector,
    op: &PauliSum,
    shots: usize,
    seed: u64,
) -> Result<SamplingEstimate> {
    if shots < 100 {
        return Err(Error::arg(format!("need at least 100 shots per group, got {shots}")));
    }
    let n = state.n_qubits();
    let mut groups: [Vec<(f64, usize)>; 3] = Default::default();
    for term in op.terms() {
        let first = term.ops().first().map(|o| o.1);
        let Some(kind) = first else {
            continue;
        };
        if term.ops().iter().any(|o| o.1 != kind) {
            return Err(Error::arg("sampling estimator needs single-letter Pauli strings"));
        }
        if let Some(q) = term.max_qubit() {
            if q >= n {
                return Err(Error::arg(format!("term acts on qubit {q} of a {n}-qubit state")));
            }
        }
        let mask = term.ops().iter().fold(0usize, |m, o| m | 1 << o.0);
        let g = match kind {
            Pauli::X => 0,
            Pauli::Y => 1,
            Pauli::Z => 2,
        };
        groups[g].push((term.coeff, mask));
    }
    let mut estimate = op.offset();
    let mut variance = 0.0;
    for (g, terms) in groups.iter().enumerate() {
        if terms.is_empty() {
            continue;
        }
        let mut rotated = state.clone();
        for q in 0..n {
            match g {
                0 => rotated.apply(&Gate::H(q))?,
                1 => rotated.apply(&Gate::MinusX(q))?,
                _ => {}
            }
        }
        let group_seed = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(g as u64 + 1);
        let values: Vec<f64> = rotated
            .sample_indices(shots, group_seed)?
            .into_iter()
            .map(|idx| {
                terms
                    .iter()
                    .map(|&(c, m)| if (idx & m).count_ones() % 2 == 0 { c } else { -c })
                    .sum()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / shots as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (shots - 1) as f64;
        estimate += mean;
        variance += var / shots as f64;
    }
    Ok(SamplingEstimate {
        estimate,
        stderr: variance.sqrt(),
        shots_per_group: shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::PauliTerm;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, 7.0 * x * x * x)).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.exponent - 3.0).abs() < 1e-12);
        assert!((f.prefactor - 7.0).abs() < 1e-10);
        let flat = fit_power_law(&[(1.0, 2.0), (2.0, 2.0), (5.0, 2.0)]).unwrap();
        assert!(flat.exponent.abs() < 1e-15);
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, -2.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn onset_on_pure_power_law() {
        let curve: Vec<_> = (1..=40).map(|t| (t as f64, 5.0 / (t * t) as f64)).collect();
        let o = detect_onset(&curve, &OnsetConfig::new(2.0)).unwrap().unwrap();
        assert!((o.alpha - 5.0).abs() < 1e-12);
        assert_eq!(o.epsilon, 5.0);
        let slow: Vec<_> = (1..=40).map(|t| (t as f64, 1.0 / t as f64)).collect();
        assert!(detect_onset(&slow, &OnsetConfig::new(2.0)).unwrap().is_none());
    }

    #[test]
    fn onset_input_checks() {
        let short: Vec<_> = (1..5).map(|t| (t as f64, 1.0)).collect();
        assert!(detect_onset(&short, &OnsetConfig::new(2.0)).is_err());
        let unsorted: Vec<_> = (1..9).rev().map(|t| (t as f64, 1.0)).collect();
        assert!(detect_onset(&unsorted, &OnsetConfig::new(2.0)).is_err());
    }

    #[test]
    fn diagonal_operator_on_basis_state_is_exact() {
        let state = StateVector::basis(3, &[1, 0, 1]).unwrap();
        let op = PauliSum::new(
            vec![
                PauliTerm::new(0.5, [(0, Pauli::Z)]).unwrap(),
                PauliTerm::new(2.0, [(0, Pauli::Z), (2, Pauli::Z)]).unwrap(),
            ],
            1.0,
        );
        let est = estimate_energy_sampling(&state, &op, 100, 3).unwrap();
        assert_eq!(est.estimate, state.expectation(&op).unwrap());
        assert_eq!(est.stderr, 0.0);
        assert!(estimate_energy_sampling(&state, &op, 10, 3).is_err());
    }
}
