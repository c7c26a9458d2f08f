//! Annealing schedules, second-order product-formula circuits and their
//! execution on the statevector engine.
//!
//! `H(s) = H_hop + g(s)·U Σ n↑n↓`, with `g(s) = s` (linear) or
//! `(sin(πs − π/2) + 1)/2` (sinusoidal). Step `n` is evaluated at the
//! midpoint `s_n = (nτ − τ/2)/T_A`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bethe;
use crate::circuit::{Circuit, Gate, GateCounts, SegmentKind};
use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::hamiltonian::{self, HubbardParams, SectorBasis, DENSE_ED_MAX_DIM};
use crate::records::SweepRecord;
use crate::simcore::StateVector;
use crate::stateprep;

/// Largest step accepted by [`AnnealSchedule::new`].
pub const MAX_TAU: f64 = 0.1;
pub const DEFAULT_TAU: f64 = 0.025;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Linear,
    Sinusoidal,
}

impl ScheduleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Sinusoidal => "sinusoidal",
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "sinusoidal" | "sin" => Ok(ScheduleKind::Sinusoidal),
            _ => Err(Error::arg(format!("unknown schedule `{s}`"))),
        }
    }
}

/// How the hopping terms are split into commuting groups.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupingMode {
    /// All `XX` terms, all `YY` terms, then the interaction.
    #[default]
    #[serde(rename = "xx-yy-zz")]
    XxYyZz,
    /// `XX + YY` on odd bonds, on even bonds, then the interaction. Every
    /// factor conserves both particle numbers.
    #[serde(rename = "xy-parity")]
    XyParity,
}

impl GroupingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GroupingMode::XxYyZz => "xx-yy-zz",
            GroupingMode::XyParity => "xy-parity",
        }
    }
}

impl std::str::FromStr for GroupingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xx-yy-zz" => Ok(GroupingMode::XxYyZz),
            "xy-parity" => Ok(GroupingMode::XyParity),
            _ => Err(Error::arg(format!("unknown grouping `{s}`"))),
        }
    }
}

/// Interaction multiplier `g(s)`.
pub fn interaction_strength(kind: ScheduleKind, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::arg(format!("s must lie in [0, 1], got {s}")));
    }
    Ok(match kind {
        ScheduleKind::Linear => s,
        ScheduleKind::Sinusoidal => ((PI * s - PI / 2.0).sin() + 1.0) / 2.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    kind: ScheduleKind,
    t_a: f64,
    tau: f64,
    n_steps: usize,
}

impl AnnealSchedule {
    /// `T_A/τ` must be an integer (to 1e-9 relative) and `τ ≤ 0.1`.
    pub fn new(kind: ScheduleKind, t_a: f64, tau: f64) -> Result<Self> {
        if !(t_a > 0.0 && t_a.is_finite()) {
            return Err(Error::arg(format!("T_A must be positive, got {t_a}")));
        }
        if !(tau > 0.0 && tau <= MAX_TAU) {
            return Err(Error::arg(format!("τ must lie in (0, {MAX_TAU}], got {tau}")));
        }
        let ratio = t_a / tau;
        let n_steps = ratio.round();
        if n_steps < 1.0 || (ratio - n_steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::arg(format!(
                "T_A = {t_a} is not an integer multiple of τ = {tau}"
            )));
        }
        Ok(AnnealSchedule {
            kind,
            t_a,
            tau,
            n_steps: n_steps as usize,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn total_time(&self) -> f64 {
        self.t_a
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Midpoint `s_n` of step `n` (1-based).
    pub fn s_at_step(&self, n: usize) -> f64 {
        ((n as f64 - 0.5) / self.n_steps as f64).clamp(0.0, 1.0)
    }

    pub fn interaction_at_step(&self, n: usize) -> f64 {
        interaction_strength(self.kind, self.s_at_step(n)).expect("midpoints lie in [0, 1]")
    }
}

/// Nearest positive multiple of `tau`, printed-clean to 12 significant digits.
pub fn snap_to_step(x: f64, tau: f64) -> f64 {
    let v = (x / tau).round().max(1.0) * tau;
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Logarithmic grid from `lo` to `hi` with `per_decade` points per decade,
/// each value rounded to a positive multiple of `tau`. `hi` itself is added
/// unless the last grid point already lies within half a spacing of it.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize, tau: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || per_decade == 0 || !(tau > 0.0) {
        return Err(Error::arg(format!(
            "bad grid {lo}:{hi} with {per_decade} points per decade and tau {tau}"
        )));
    }
    let step = 1.0 / per_decade as f64;
    let count = ((hi / lo).log10() / step + 1e-9).floor() as usize;
    let mut raw: Vec<f64> = (0..=count).map(|i| lo * 10f64.powf(i as f64 * step)).collect();
    if raw.last().is_some_and(|&x| hi / x > 10f64.powf(step / 2.0)) {
        raw.push(hi);
    }
    let mut out: Vec<f64> = raw
        .into_iter()
        .map(|x| snap_to_step(x, tau))
        .collect();
    out.dedup_by(|a, b| (*a - *b).abs() < tau / 2.0);
    Ok(out)
}

/// Nearest-neighbour qubit pairs of both spin blocks, even bonds first.
fn bonds(l: usize, parity: Option<usize>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for p in [0, 1] {
        if parity.is_some_and(|q| q != p) {
            continue;
        }
        for block in [0, l] {
            for i in (p..l.saturating_sub(1)).step_by(2) {
                out.push((block + i, block + i + 1));
            }
        }
    }
    out
}

fn touched(bonds: &[(usize, usize)]) -> Vec<usize> {
    let mut q: Vec<usize> = bonds.iter().flat_map(|&(a, b)| [a, b]).collect();
    q.sort_unstable();
    q.dedup();
    q
}

/// `exp(−iθ Σ X_aX_b)` via Hadamard conjugation.
fn push_xx(c: &mut Circuit, bonds: &[(usize, usize)], theta: f64) -> Result<()> {
    let qs = touched(bonds);
    for &q in &qs {
        c.push(Gate::H(q))?;
    }
    for &(a, b) in bonds {
        c.push(Gate::Rzz { a, b, angle: theta })?;
    }
    for &q in &qs {
        c.push(Gate::H(q))?;
    }
    Ok(())
}

/// `exp(−iθ Σ Y_aY_b)`, using `(+X) Z (−X) = Y`.
fn push_yy(c: &mut Circuit, bonds: &[(usize, usize)], theta: f64) -> Result<()> {
    let qs = touched(bonds);
    for &q in &qs {
        c.push(Gate::MinusX(q))?;
    }
    for &(a, b) in bonds {
        c.push(Gate::Rzz { a, b, angle: theta })?;
    }
    for &q in &qs {
        c.push(Gate::PlusX(q))?;
    }
    Ok(())
}

/// `exp(−iθ Σ_i (Z_iZ_{i+L} − Z_i − Z_{i+L}))`.
fn push_zz(c: &mut Circuit, l: usize, theta: f64) -> Result<()> {
    for q in 0..2 * l {
        c.push(Gate::Rz {
            qubit: q,
            angle: -2.0 * theta,
        })?;
    }
    for i in 0..l {
        c.push(Gate::Rzz {
            a: i,
            b: i + l,
            angle: theta,
        })?;
    }
    Ok(())
}

/// The three groups of one step; `A(w)` and `C(w)` evolve the hopping for a
/// time `w·τ`, `B(w)` the interaction.
struct Lowering<'a> {
    params: &'a HubbardParams,
    grouping: GroupingMode,
    tau: f64,
}

impl Lowering<'_> {
    /// Angle of `exp(−i w τ (−t/2) P P)` for `RZZ`.
    fn hop_angle(&self, w: f64) -> f64 {
        -self.params.t * w * self.tau / 2.0
    }

    fn outer(&self, c: &mut Circuit, w: f64) -> Result<()> {
        let l = self.params.l;
        match self.grouping {
            GroupingMode::XxYyZz => push_xx(c, &bonds(l, None), self.hop_angle(w)),
            GroupingMode::XyParity => {
                let b = bonds(l, Some(1));
                push_xx(c, &b, self.hop_angle(w))?;
                push_yy(c, &b, self.hop_angle(w))
            }
        }
    }

    fn middle(&self, c: &mut Circuit) -> Result<()> {
        let l = self.params.l;
        match self.grouping {
            GroupingMode::XxYyZz => push_yy(c, &bonds(l, None), self.hop_angle(1.0)),
            GroupingMode::XyParity => {
                let b = bonds(l, Some(0));
                push_xx(c, &b, self.hop_angle(1.0))?;
                push_yy(c, &b, self.hop_angle(1.0))
            }
        }
    }

    fn interaction_half(&self, c: &mut Circuit, g: f64) -> Result<()> {
        push_zz(c, self.params.l, g * self.params.u * self.tau / 8.0)
    }
}

/// One symmetric step `A/2 · B/2 · C · B/2 · A/2` with interaction factor `g`.
pub fn trotter_step_at(
    params: &HubbardParams,
    grouping: GroupingMode,
    g: f64,
    tau: f64,
) -> Result<Circuit> {
    params.validate()?;
    let low = Lowering {
        params,
        grouping,
        tau,
    };
    let mut c = Circuit::new(params.n_qubits(), format!("step g={g} tau={tau}"));
    c.segment(SegmentKind::Step(1), |c| {
        low.outer(c, 0.5)?;
        low.interaction_half(c, g)?;
        low.middle(c)?;
        low.interaction_half(c, g)?;
        low.outer(c, 0.5)
    })?;
    Ok(c)
}

/// Standalone symmetric step `n` of a schedule.
pub fn trotter_step(
    params: &HubbardParams,
    schedule: &AnnealSchedule,
    grouping: GroupingMode,
    n: usize,
) -> Result<Circuit> {
    if n == 0 || n > schedule.n_steps() {
        return Err(Error::arg(format!(
            "step index {n} outside 1..={}",
            schedule.n_steps()
        )));
    }
    trotter_step_at(params, grouping, schedule.interaction_at_step(n), schedule.tau())
}

/// Gate counts of one merged step of the default grouping.
pub fn step_gate_formula(l: usize) -> GateCounts {
    GateCounts {
        one_qubit: 12 * l,
        two_qubit: (6 * l).saturating_sub(4),
    }
}

/// Product-formula steps only, without state preparation.
///
/// With `merge`, the trailing half of the first hopping group of step `n`
/// and the leading half of step `n+1` are fused into one full-angle block.
/// The very first half block is then tagged [`SegmentKind::Boundary`] and each
/// step segment reads `B/2 · C · B/2 · A`, with `A` a half block only in the
/// last step.
pub fn build_trotter_circuit(
    params: &HubbardParams,
    schedule: &AnnealSchedule,
    grouping: GroupingMode,
    merge: bool,
) -> Result<Circuit> {
    params.validate()?;
    let low = Lowering {
        params,
        grouping,
        tau: schedule.tau(),
    };
    let n_steps = schedule.n_steps();
    let mut c = Circuit::new(
        params.n_qubits(),
        format!(
            "anneal L={} U={} t={} schedule={} grouping={} T_A={} tau={}",
            params.l,
            params.u,
            params.t,
            schedule.kind().as_str(),
            grouping.as_str(),
            schedule.total_time(),
            schedule.tau()
        ),
    );
    if merge {
        c.segment(SegmentKind::Boundary, |c| low.outer(c, 0.5))?;
    }
    for n in 1..=n_steps {
        let g = schedule.interaction_at_step(n);
        c.segment(SegmentKind::Step(n), |c| {
            if !merge {
                low.outer(c, 0.5)?;
            }
            low.interaction_half(c, g)?;
            low.middle(c)?;
            low.interaction_half(c, g)?;
            let tail = if merge && n < n_steps { 1.0 } else { 0.5 };
            low.outer(c, tail)
        })?;
    }
    Ok(c)
}

/// State preparation followed by every product-formula step.
pub fn build_anneal_circuit(
    params: &HubbardParams,
    schedule: &AnnealSchedule,
    grouping: GroupingMode,
    merge: bool,
) -> Result<Circuit> {
    let prep = stateprep::prep_circuit(params)?;
    let steps = build_trotter_circuit(params, schedule, grouping, merge)?;
    let mut c = Circuit::new(steps.n_qubits(), steps.label());
    c.append(&prep)?;
    c.append(&steps)?;
    Ok(c)
}

/// Where the reference ground energy comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum E0Source {
    /// Free-fermion sum at `U = 0`, dense ED for small sectors, Bethe ansatz
    /// otherwise.
    #[default]
    Auto,
    Bethe,
    Ed,
    Value(f64),
}

pub fn reference_energy(params: &HubbardParams, source: E0Source) -> Result<f64> {
    match source {
        E0Source::Value(e) => Ok(e),
        E0Source::Bethe => bethe::bethe_energy(params),
        E0Source::Ed => Ok(hamiltonian::exact_diag(params, 1.0)?.energy),
        E0Source::Auto => {
            if params.u == 0.0 {
                return stateprep::free_fermion_energy(params);
            }
            match SectorBasis::new(params, DENSE_ED_MAX_DIM) {
                Ok(_) => Ok(hamiltonian::exact_diag(params, 1.0)?.energy),
                Err(Error::Capacity { .. }) => bethe::bethe_energy(params),
                Err(e) => Err(e),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub merge: bool,
    pub e0: E0Source,
    /// Recorded only; the simulation is deterministic.
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            merge: true,
            e0: E0Source::Auto,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnnealOutcome {
    pub record: SweepRecord,
    pub state: StateVector,
    /// `|‖ψ‖² − 1|` of the final state.
    pub norm_deviation: f64,
}

/// Prepare, anneal and measure `⟨H_H⟩` exactly.
pub fn run_anneal(
    params: &HubbardParams,
    schedule: &AnnealSchedule,
    grouping: GroupingMode,
    opts: &RunOptions,
) -> Result<AnnealOutcome> {
    let clock = Stopwatch::start();
    let e0 = reference_energy(params, opts.e0)?;
    let circuit = build_anneal_circuit(params, schedule, grouping, opts.merge)?;
    let mut state = StateVector::zero(params.n_qubits())?;
    state.apply_circuit(&circuit)?;
    let h = hamiltonian::qubit_hamiltonian(params, 1.0)?;
    let final_energy = state.expectation(&h)?;
    let counts = circuit.count_gates();
    let record = SweepRecord {
        l: params.l,
        u: params.u,
        t: params.t,
        schedule: schedule.kind(),
        grouping,
        t_a: schedule.total_time(),
        tau: schedule.tau(),
        steps: schedule.n_steps(),
        final_energy,
        e0,
        delta_e: final_energy - e0,
        gates_1q: counts.one_qubit,
        gates_2q: counts.two_qubit,
        wall_seconds: clock.seconds(),
        seed: opts.seed,
    };
    Ok(AnnealOutcome {
        record,
        norm_deviation: (state.norm_sqr() - 1.0).abs(),
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: usize, u: f64) -> HubbardParams {
        HubbardParams::half_filled(l, 1.0, u).unwrap()
    }

    #[test]
    fn schedule_endpoints() {
        use ScheduleKind::*;
        assert_eq!(interaction_strength(Linear, 0.0).unwrap(), 0.0);
        assert_eq!(interaction_strength(Linear, 1.0).unwrap(), 1.0);
        assert!((interaction_strength(Sinusoidal, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(interaction_strength(Sinusoidal, 1.2).is_err());
        let h = 1e-6;
        let g = |s| interaction_strength(Sinusoidal, s).unwrap();
        assert!(((g(h) - g(0.0)) / h).abs() < 1e-5);
        assert!(((g(1.0) - g(1.0 - h)) / h).abs() < 1e-5);
    }

    #[test]
    fn schedule_validation() {
        assert!(AnnealSchedule::new(ScheduleKind::Linear, 1.0, 0.3).is_err());
        assert!(AnnealSchedule::new(ScheduleKind::Linear, 1.01, 0.025).is_err());
        assert!(AnnealSchedule::new(ScheduleKind::Linear, -1.0, 0.025).is_err());
        let s = AnnealSchedule::new(ScheduleKind::Linear, 40.0, 0.025).unwrap();
        assert_eq!(s.n_steps(), 1600);
        assert!((s.s_at_step(1) - 0.5 / 1600.0).abs() < 1e-15);
    }

    #[test]
    fn step_counts_follow_formula() {
        for l in [2, 3, 6, 20] {
            let c = trotter_step_at(&params(l + l % 2, 4.0), GroupingMode::XxYyZz, 0.3, 0.025).unwrap();
            let l = l + l % 2;
            let merged_equivalent = c.count_gates().total() - (6 * l - 2);
            assert_eq!(merged_equivalent, step_gate_formula(l).total());
        }
        let p = params(2, 4.0);
        let s = AnnealSchedule::new(ScheduleKind::Linear, 0.1, 0.025).unwrap();
        let c = build_trotter_circuit(&p, &s, GroupingMode::XxYyZz, true).unwrap();
        assert_eq!(c.trotter_counts(), GateCounts { one_qubit: 4 * 24, two_qubit: 4 * 8 });
        assert_eq!(c.boundary_counts(), GateCounts { one_qubit: 8, two_qubit: 2 });
    }

    #[test]
    fn step_index_is_checked() {
        let s = AnnealSchedule::new(ScheduleKind::Linear, 0.1, 0.025).unwrap();
        assert!(trotter_step(&params(2, 4.0), &s, GroupingMode::XxYyZz, 0).is_err());
        assert!(trotter_step(&params(2, 4.0), &s, GroupingMode::XxYyZz, 5).is_err());
    }

    #[test]
    fn merged_and_unmerged_agree() {
        let p = params(2, 4.0);
        let s = AnnealSchedule::new(ScheduleKind::Sinusoidal, 0.5, 0.05).unwrap();
        let mut a = StateVector::zero(4).unwrap();
        let mut b = a.clone();
        for g in [GroupingMode::XxYyZz, GroupingMode::XyParity] {
            a.apply_circuit(&build_anneal_circuit(&p, &s, g, true).unwrap()).unwrap();
            b.apply_circuit(&build_anneal_circuit(&p, &s, g, false).unwrap()).unwrap();
            assert!(a.fidelity(&b) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn grid_snaps_to_tau() {
        let g = log_grid(5.0, 40.0, 10, 0.025).unwrap();
        assert_eq!(g.first(), Some(&5.0));
        assert_eq!(g.len(), 10);
        for x in &g {
            AnnealSchedule::new(ScheduleKind::Linear, *x, 0.025).unwrap();
        }
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(log_grid(1.0, 0.5, 10, 0.025).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("linear".parse::<ScheduleKind>().unwrap(), ScheduleKind::Linear);
        assert_eq!("xy-parity".parse::<GroupingMode>().unwrap(), GroupingMode::XyParity);
        assert!("cubic".parse::<ScheduleKind>().is_err());
    }
}
