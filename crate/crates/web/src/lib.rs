//! Browser bindings: Bethe ground energies, residual-energy curves from the
//! statevector anneal, and gate counts for circuits too large to run.
//!
//! Every entry point returns a JSON string; `www/main.js` draws it.

use hubbard_anneal::anneal::{
    build_anneal_circuit, log_grid, run_anneal, step_gate_formula, AnnealSchedule, GroupingMode,
    RunOptions, ScheduleKind,
};
use hubbard_anneal::bethe;
use hubbard_anneal::hamiltonian::HubbardParams;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Anneals in the page stay small enough to answer within a second or two.
pub const MAX_DEMO_SITES: usize = 6;

fn half(l: usize, u: f64) -> Result<HubbardParams, String> {
    HubbardParams::half_filled(l, 1.0, u).map_err(|e| e.to_string())
}

/// `[{L, E0, per_site}]` for even `L` up to `l_max`.
pub fn bethe_rows(l_max: usize, u: f64) -> Result<String, String> {
    if !(2..=400).contains(&l_max) {
        return Err(format!("L must lie in 2..=400, got {l_max}"));
    }
    let mut rows = Vec::new();
    for l in (2..=l_max).step_by(2) {
        let e0 = bethe::bethe_energy(&half(l, u)?).map_err(|e| e.to_string())?;
        rows.push(json!({ "L": l, "E0": e0, "per_site": e0 / l as f64 }));
    }
    Ok(serde_json::Value::from(rows).to_string())
}

/// `{points: [[T_A, dE]], slopes}` for a half-filled chain.
pub fn curve(l: usize, u: f64, sinusoidal: bool, lo: f64, hi: f64, per_decade: usize) -> Result<String, String> {
    if l > MAX_DEMO_SITES {
        return Err(format!("the page runs at most L = {MAX_DEMO_SITES}"));
    }
    if hi > 200.0 {
        return Err("T_A above 200 takes too long in the page".into());
    }
    let p = half(l, u)?;
    let kind = if sinusoidal { ScheduleKind::Sinusoidal } else { ScheduleKind::Linear };
    let tau = 0.025;
    let grid = log_grid(lo, hi, per_decade, tau).map_err(|e| e.to_string())?;
    let mut points = Vec::with_capacity(grid.len());
    for t_a in grid {
        let s = AnnealSchedule::new(kind, t_a, tau).map_err(|e| e.to_string())?;
        let out = run_anneal(&p, &s, GroupingMode::XxYyZz, &RunOptions::default())
            .map_err(|e| e.to_string())?;
        points.push((t_a, out.record.delta_e.max(1e-300)));
    }
    let slopes = hubbard_anneal::analysis::local_slopes(&points);
    Ok(json!({ "points": points, "slopes": slopes }).to_string())
}

/// Gate totals without executing anything.
pub fn counts(l: usize, t_a: f64, tau: f64) -> Result<String, String> {
    let p = half(l, 4.0)?;
    let s = AnnealSchedule::new(ScheduleKind::Linear, t_a, tau).map_err(|e| e.to_string())?;
    if s.n_steps() * step_gate_formula(l).total() > 5_000_000 {
        return Err("circuit too large to build in the page".into());
    }
    let c = build_anneal_circuit(&p, &s, GroupingMode::XxYyZz, true).map_err(|e| e.to_string())?;
    let all = c.count_gates();
    Ok(json!({
        "qubits": 2 * l,
        "steps": s.n_steps(),
        "per_step": step_gate_formula(l).total(),
        "prep": c.prep_counts().total(),
        "boundary": c.boundary_counts().total(),
        "trotter": c.trotter_counts().total(),
        "total": all.total(),
        "depth": c.depth(),
    })
    .to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bethe_table(l_max: usize, u: f64) -> Result<String, JsError> {
    js(bethe_rows(l_max, u))
}

#[wasm_bindgen]
pub fn residual_curve(
    l: usize,
    u: f64,
    sinusoidal: bool,
    lo: f64,
    hi: f64,
    per_decade: usize,
) -> Result<String, JsError> {
    js(curve(l, u, sinusoidal, lo, hi, per_decade))
}

#[wasm_bindgen]
pub fn gate_counts(l: usize, t_a: f64, tau: f64) -> Result<String, JsError> {
    js(counts(l, t_a, tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bethe_rows_are_json() {
        let v: serde_json::Value = serde_json::from_str(&bethe_rows(6, 4.0).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 3);
        assert!((v[0]["E0"].as_f64().unwrap() + 0.828427).abs() < 1e-6);
        assert!(bethe_rows(1, 4.0).is_err());
    }

    #[test]
    fn curve_decreases_overall() {
        let v: serde_json::Value = serde_json::from_str(&curve(2, 4.0, false, 1.0, 20.0, 5).unwrap()).unwrap();
        let pts = v["points"].as_array().unwrap();
        let first = pts[0][1].as_f64().unwrap();
        let last = pts.last().unwrap()[1].as_f64().unwrap();
        assert!(last < first);
        assert!(curve(8, 4.0, false, 1.0, 2.0, 5).is_err());
    }

    #[test]
    fn counts_match_step_formula() {
        let v: serde_json::Value = serde_json::from_str(&counts(20, 1.0, 0.025).unwrap()).unwrap();
        assert_eq!(v["per_step"], 356);
        assert_eq!(v["steps"], 40);
        assert_eq!(v["qubits"], 40);
    }
}
