//! Cross-checks of each pipeline stage against independent references.
//!
//! The references here are deliberately naive: dense matrices assembled
//! element by element from Pauli strings, determinants for Slater states,
//! and full eigendecompositions for time evolution. None of them call into
//! the state-vector kernels, the sector Hamiltonian or the Givens compiler
//! they are checking.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{self, OnsetConfig};
use crate::anneal::{self, AnnealSchedule, GroupingMode, RunOptions, ScheduleKind};
use crate::bethe;
use crate::circuit::{self, Circuit};
use crate::clock::Stopwatch;
use crate::hamiltonian::{self, HubbardParams, SectorBasis, MAX_ED_DIM, MAX_TDSE_DIM};
use crate::simcore::{Pauli, PauliSum, StateVector};
use crate::stateprep;
use crate::{Error, Result};

/// Published half-filling ground energies `E0(L)` at `t = 1` for
/// `U ∈ {4, 8, 16}`, six decimals.
pub const REFERENCE_GROUND_ENERGIES: [(usize, [f64; 3]); 10] = [
    (2, [-0.828427, -0.472136, -0.246211]),
    (4, [-1.953145, -1.117172, -0.582635]),
    (6, [-3.092565, -1.768099, -0.921917]),
    (8, [-4.235807, -2.420831, -1.262136]),
    (10, [-5.380619, -3.074389, -1.602785]),
    (12, [-6.526243, -3.728396, -1.943669]),
    (14, [-7.67235, -4.382676, -2.284694]),
    (16, [-8.818767, -5.037134, -2.625814]),
    (18, [-9.965399, -5.691715, -2.966997]),
    (20, [-11.112185, -6.346385, -3.308227]),
];

/// Interaction strengths matching the columns of [`REFERENCE_GROUND_ENERGIES`].
pub const REFERENCE_U: [f64; 3] = [4.0, 8.0, 16.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Fidelity,
    AbsDiff,
    Slope,
    Ratio,
    Distance,
    Count,
}

/// Acceptance region for a case's metric value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Between(f64, f64),
}

impl Bound {
    pub fn contains(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(hi) => v <= hi,
            Bound::AtLeast(lo) => v >= lo,
            Bound::Between(lo, hi) => (lo..=hi).contains(&v),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Bound::AtMost(hi) => write!(f, "<= {hi:e}"),
            Bound::AtLeast(lo) => write!(f, ">= {lo}"),
            Bound::Between(lo, hi) => write!(f, "in [{lo}, {hi}]"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCase {
    pub id: &'static str,
    pub metric: Metric,
    /// Scalar summary of the pipeline side, when one exists.
    pub pipeline: Option<f64>,
    /// Scalar summary of the reference side, when one exists.
    pub oracle: Option<f64>,
    pub value: f64,
    pub bound: Bound,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl OracleCase {
    fn new(id: &'static str, metric: Metric, value: f64, bound: Bound) -> Self {
        OracleCase {
            id,
            metric,
            pipeline: None,
            oracle: None,
            value,
            bound,
            passed: bound.contains(value),
            detail: String::new(),
            seconds: 0.0,
        }
    }

    fn values(mut self, pipeline: f64, oracle: f64) -> Self {
        self.pipeline = Some(pipeline);
        self.oracle = Some(oracle);
        self
    }

    fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn errored(id: &'static str, err: &Error) -> Self {
        OracleCase {
            id,
            metric: Metric::Count,
            pipeline: None,
            oracle: None,
            value: f64::NAN,
            bound: Bound::AtMost(0.0),
            passed: false,
            detail: format!("error: {err}"),
            seconds: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
    pub seconds: f64,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OracleCase> {
        self.cases.iter().filter(|c| !c.passed)
    }

    pub fn case(&self, id: &str) -> Option<&OracleCase> {
        self.cases.iter().find(|c| c.id == id)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.cases {
            let sides = match (c.pipeline, c.oracle) {
                (Some(p), Some(o)) => format!(" pipeline={p:.10} oracle={o:.10}"),
                _ => String::new(),
            };
            out.push_str(&format!(
                "{} {:<28} {:?} {:.6e} {}{}{}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.metric,
                c.value,
                c.bound,
                sides,
                if c.detail.is_empty() {
                    String::new()
                } else {
                    format!("  ({})", c.detail)
                },
            ));
        }
        let failed = self.failures().count();
        out.push_str(&format!(
            "{} cases, {} failed, {:.1}s\n",
            self.cases.len(),
            failed,
            self.seconds
        ));
        out
    }

    pub fn to_junit_xml(&self) -> String {
        let failed = self.failures().count();
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str(&format!(
            "<testsuite name=\"oracles\" tests=\"{}\" failures=\"{failed}\" time=\"{:.3}\">\n",
            self.cases.len(),
            self.seconds
        ));
        for c in &self.cases {
            out.push_str(&format!(
                "  <testcase classname=\"oracles\" name=\"{}\" time=\"{:.3}\"",
                xml_escape(c.id),
                c.seconds
            ));
            if c.passed {
                out.push_str("/>\n");
            } else {
                let msg = format!("{:?} {:e} not {}", c.metric, c.value, c.bound);
                out.push_str(&format!(
                    ">\n    <failure message=\"{}\">{}</failure>\n  </testcase>\n",
                    xml_escape(&msg),
                    xml_escape(&c.detail)
                ));
            }
        }
        out.push_str("</testsuite>\n");
        out
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

type CaseFn = fn() -> Result<OracleCase>;

const CASES: &[(&str, CaseFn)] = &[
    ("prep_particle_support", prep_particle_support),
    ("step_depth_constant", step_depth_constant),
    ("qasm_rzz_matrix", qasm_rzz_matrix),
    ("qasm_grammar_anneal", qasm_grammar_anneal),
    ("qasm_export_round_trip", qasm_export_round_trip),
    ("interaction_expansion", interaction_expansion),
    ("jw_spectrum_all_sectors", jw_spectrum_all_sectors),
    ("tdse_overlap_second_order", tdse_overlap_second_order),
    ("tdse_fidelity", tdse_fidelity),
    ("givens_vs_ed", givens_vs_ed),
    ("givens_vs_slater", givens_vs_slater),
    ("free_step_vs_dense", free_step_vs_dense),
    ("step_operator_order", step_operator_order),
    ("step_state_order", step_state_order),
    ("residual_vs_tdse", residual_vs_tdse),
    ("bethe_vs_ed", bethe_vs_ed),
    ("bethe_vs_jw", bethe_vs_jw),
    ("reference_table_bethe", reference_table_bethe),
    ("reference_table_ed", reference_table_ed),
    ("onset_refined_grid", onset_refined_grid),
    ("sampling_stderr_slope", sampling_stderr_slope),
];

/// Identifiers of every case, in execution order.
pub fn case_ids() -> Vec<&'static str> {
    CASES.iter().map(|c| c.0).collect()
}

/// Run every case. Failures and errors are recorded, never raised.
pub fn run_oracle_suite() -> OracleReport {
    run_selected(|_| true)
}

/// Run the cases whose id satisfies `select`.
pub fn run_selected(select: impl Fn(&str) -> bool + Sync) -> OracleReport {
    let clock = Stopwatch::start();
    let chosen: Vec<_> = CASES.iter().filter(|c| select(c.0)).collect();
    let run = |&&(id, f): &&(&'static str, CaseFn)| {
        let t = Stopwatch::start();
        let mut case = f().unwrap_or_else(|e| OracleCase::errored(id, &e));
        case.id = id;
        case.seconds = t.seconds();
        case
    };
    #[cfg(feature = "parallel")]
    let cases = {
        use rayon::prelude::*;
        chosen.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cases = chosen.iter().map(run).collect();
    OracleReport {
        cases,
        seconds: clock.seconds(),
    }
}

// ---------------------------------------------------------------------------
// Dense references.

/// `⟨i|P|j⟩` for a Pauli string, from the 2×2 factors.
fn pauli_element(ops: &[(usize, Pauli)], i: usize, j: usize) -> Complex64 {
    let mut flips = 0usize;
    let mut v = Complex64::new(1.0, 0.0);
    for &(q, p) in ops {
        let (a, b) = ((i >> q) & 1, (j >> q) & 1);
        let e = match p {
            Pauli::X => Complex64::new((a != b) as u8 as f64, 0.0),
            Pauli::Y => match (a, b) {
                (0, 1) => Complex64::new(0.0, -1.0),
                (1, 0) => Complex64::new(0.0, 1.0),
                _ => Complex64::new(0.0, 0.0),
            },
            Pauli::Z => Complex64::new(if a == b { 1.0 - 2.0 * a as f64 } else { 0.0 }, 0.0),
        };
        v *= e;
        flips |= 1 << q;
    }
    // Untouched qubits must agree.
    if (i ^ j) & !flips != 0 {
        return Complex64::new(0.0, 0.0);
    }
    v
}

/// Matrix of `op` restricted to the register indices in `rows`.
fn dense_restricted(op: &PauliSum, rows: &[usize]) -> DMatrix<Complex64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |r, c| {
        let (i, j) = (rows[r], rows[c]);
        let mut v: Complex64 = op
            .terms()
            .iter()
            .map(|t| pauli_element(t.ops(), i, j) * t.coeff)
            .sum();
        if i == j {
            v += op.offset();
        }
        v
    })
}

fn real_symmetric(m: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let imag = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-12 {
        return Err(Error::Solver(format!("operator has imaginary part {imag:e}")));
    }
    Ok(m.map(|z| z.re))
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// `exp(−iτH)` by full eigendecomposition.
fn dense_expm(h: &DMatrix<f64>, tau: f64) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(h.clone());
    let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -tau * e)));
    &q * d * q.adjoint()
}

fn full_register(n_qubits: usize) -> Vec<usize> {
    (0..1usize << n_qubits).collect()
}

/// Register indices whose spin blocks hold the given particle numbers.
fn sector_indices(params: &HubbardParams) -> Vec<usize> {
    let l = params.l;
    let low = (1usize << l) - 1;
    (0..1usize << (2 * l))
        .filter(|i| {
            (i & low).count_ones() as usize == params.n_up
                && (i >> l).count_ones() as usize == params.n_down
        })
        .collect()
}

/// Lowest eigenvalue of the Jordan-Wigner operator inside a particle sector.
pub fn jw_sector_ground_energy(params: &HubbardParams, s: f64) -> Result<f64> {
    Ok(jw_sector_spectrum(params, s)?[0])
}

/// Ascending spectrum of the Jordan-Wigner operator inside a particle sector.
pub fn jw_sector_spectrum(params: &HubbardParams, s: f64) -> Result<Vec<f64>> {
    let op = hamiltonian::qubit_hamiltonian(params, s)?;
    let rows = sector_indices(params);
    if rows.len() > MAX_TDSE_DIM {
        return Err(Error::Capacity {
            what: "dense sector operator",
            required: rows.len(),
            limit: MAX_TDSE_DIM,
        });
    }
    let m = real_symmetric(&dense_restricted(&op, &rows))?;
    Ok(sorted_eigenvalues(m))
}

fn column(m: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let x = nalgebra::DVector::from_column_slice(v);
    (m * x).iter().copied().collect()
}

/// Circuit unitary assembled column by column from basis states.
fn circuit_unitary(c: &Circuit) -> Result<DMatrix<Complex64>> {
    let dim = 1usize << c.n_qubits();
    let mut u = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[j] = Complex64::new(1.0, 0.0);
        let mut s = StateVector::from_amplitudes(amps)?;
        s.apply_circuit(c)?;
        for (i, a) in s.amplitudes().iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}

/// `min_φ ‖A − e^{iφ}B‖_F`.
fn phase_free_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    (a.norm_squared() + b.norm_squared() - 2.0 * overlap.norm())
        .max(0.0)
        .sqrt()
}

fn vec_overlap(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    vec_overlap(a, b).norm_sqr() / (na * nb)
}

fn state_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    (2.0 - 2.0 * vec_overlap(a, b).norm()).max(0.0).sqrt()
}

fn random_state(dim: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Determinant of `q[:, cols]` by Gaussian elimination with partial pivoting.
fn minor_det(q: &DMatrix<f64>, cols: &[usize]) -> f64 {
    let n = cols.len();
    let mut a: Vec<Vec<f64>> = (0..n).map(|r| cols.iter().map(|&c| q[(r, c)]).collect()).collect();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs()))
            .unwrap();
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        det *= a[k][k];
        for r in k + 1..n {
            let f = a[r][k] / a[k][k];
            for c in k..n {
                a[r][c] -= f * a[k][c];
            }
        }
    }
    det
}

fn bits(mask: usize, l: usize) -> Vec<usize> {
    (0..l).filter(|i| (mask >> i) & 1 == 1).collect()
}

/// Register amplitudes of the two-species Slater determinant built from the
/// lowest open-chain orbitals.
fn slater_state(params: &HubbardParams) -> Result<Vec<Complex64>> {
    let l = params.l;
    let orbitals = |n: usize| -> Result<Option<DMatrix<f64>>> {
        if n == 0 {
            return Ok(None);
        }
        // Independent construction: diagonalize the hopping matrix directly.
        let h = DMatrix::from_fn(l, l, |i, j| {
            if i.abs_diff(j) == 1 {
                -params.t
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..l).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        Ok(Some(DMatrix::from_fn(n, l, |m, j| eig.eigenvectors[(j, order[m])])))
    };
    let (qu, qd) = (orbitals(params.n_up)?, orbitals(params.n_down)?);
    let det = |q: &Option<DMatrix<f64>>, mask: usize, n: usize| match q {
        None => (mask == 0) as u8 as f64,
        Some(q) if mask.count_ones() as usize == n => minor_det(q, &bits(mask, l)),
        Some(_) => 0.0,
    };
    let dim = 1usize << (2 * l);
    let low = (1usize << l) - 1;
    Ok((0..dim)
        .map(|i| {
            Complex64::new(
                det(&qu, i & low, params.n_up) * det(&qd, i >> l, params.n_down),
                0.0,
            )
        })
        .collect())
}

fn prep_state(params: &HubbardParams) -> Result<StateVector> {
    let mut s = StateVector::zero(params.n_qubits())?;
    s.apply_circuit(&stateprep::prep_circuit(params)?)?;
    Ok(s)
}

fn half(l: usize, u: f64) -> Result<HubbardParams> {
    HubbardParams::half_filled(l, 1.0, u)
}

// ---------------------------------------------------------------------------
// Cases.

fn prep_particle_support() -> Result<OracleCase> {
    let mut bad = 0usize;
    let mut checked = 0usize;
    for l in 1..=4 {
        for n_up in 0..=l {
            for n_down in 0..=l {
                let p = HubbardParams::new(l, 1.0, 4.0, n_up, n_down)?;
                let s = prep_state(&p)?;
                let ok = |i: usize| {
                    (i & ((1 << l) - 1)).count_ones() as usize == n_up
                        && (i >> l).count_ones() as usize == n_down
                };
                for (i, a) in s.amplitudes().iter().enumerate() {
                    if a.norm() > 1e-12 {
                        checked += 1;
                        bad += !ok(i) as usize;
                    }
                }
                for i in s.sample_indices(500, 11)? {
                    checked += 1;
                    bad += !ok(i) as usize;
                }
            }
        }
    }
    Ok(OracleCase::new("", Metric::Count, bad as f64, Bound::AtMost(0.0))
        .detail(format!("{checked} amplitudes and samples checked, L <= 4")))
}

fn step_depth_constant() -> Result<OracleCase> {
    let depth = |l| -> Result<usize> {
        Ok(anneal::trotter_step_at(&half(l, 4.0)?, GroupingMode::XxYyZz, 0.5, 0.025)?.depth())
    };
    let (a, b) = (depth(6)?, depth(12)?);
    Ok(
        OracleCase::new("", Metric::AbsDiff, a.abs_diff(b) as f64, Bound::AtMost(0.0))
            .values(a as f64, b as f64)
            .detail("step depth at L=6 and L=12"),
    )
}

fn qasm_rzz_matrix() -> Result<OracleCase> {
    let theta = 0.37;
    let mut c = Circuit::new(2, "rzz");
    c.push(circuit::Gate::Rzz {
        a: 0,
        b: 1,
        angle: theta,
    })?;
    let text = c.to_qasm();
    let prog = circuit::parse_qasm(&text)?;
    let lines = prog.gates.len();
    let mut lowered = DMatrix::zeros(4, 4);
    for j in 0..4 {
        let mut amps = vec![Complex64::new(0.0, 0.0); 4];
        amps[j] = Complex64::new(1.0, 0.0);
        let mut s = StateVector::from_amplitudes(amps)?;
        prog.apply_to(&mut s)?;
        for (i, a) in s.amplitudes().iter().enumerate() {
            lowered[(i, j)] = *a;
        }
    }
    let target = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        4,
        [1.0, -1.0, -1.0, 1.0].map(|z: f64| Complex64::from_polar(1.0, -theta * z)),
    ));
    let d = phase_free_distance(&lowered, &target);
    let mut case = OracleCase::new("", Metric::Distance, d, Bound::AtMost(1e-12))
        .detail(format!("{lines} QASM lines"));
    if lines != 3 {
        case.passed = false;
    }
    Ok(case)
}

#[cfg(feature = "qasm-grammar")]
fn external_parse(text: &str) -> std::result::Result<usize, String> {
    use openqasm::{Decl, Parser, SourceCache, Stmt};
    let mut cache = SourceCache::new();
    let mut parser = Parser::new(&mut cache);
    parser.parse_source(text.to_string(), None::<&str>);
    let program = parser
        .done()
        .map_err(|e| format!("{} parse errors", e.len()))?;
    program
        .type_check()
        .map_err(|e| format!("{} type errors", e.len()))?;
    Ok(program
        .decls
        .iter()
        .filter(|d| match &*d.inner {
            Decl::Stmt(s) => matches!(&*s.inner, Stmt::Gate { .. } | Stmt::CX { .. } | Stmt::U { .. }),
            _ => false,
        })
        .count())
}

#[cfg(not(feature = "qasm-grammar"))]
fn external_parse(_: &str) -> std::result::Result<usize, String> {
    Err("built without the external QASM grammar".into())
}

fn qasm_grammar_anneal() -> Result<OracleCase> {
    let p = half(2, 4.0)?;
    let sched = AnnealSchedule::new(ScheduleKind::Linear, 1.0, 0.025)?;
    let c = anneal::build_anneal_circuit(&p, &sched, GroupingMode::XxYyZz, true)?;
    let text = c.to_qasm();
    let ours = circuit::parse_qasm(&text)?.gates.len();
    Ok(match external_parse(&text) {
        Ok(n) => OracleCase::new("", Metric::Count, n.abs_diff(ours) as f64, Bound::AtMost(0.0))
            .values(ours as f64, n as f64)
            .detail("gate statements: internal parser vs external grammar"),
        Err(e) => OracleCase::new("", Metric::Count, f64::NAN, Bound::AtMost(0.0)).detail(e),
    })
}

fn qasm_export_round_trip() -> Result<OracleCase> {
    let p = half(2, 4.0)?;
    let sched = AnnealSchedule::new(ScheduleKind::Linear, 0.025, 0.025)?;
    let c = anneal::build_anneal_circuit(&p, &sched, GroupingMode::XxYyZz, true)?;
    let text = c.to_qasm();
    let external = external_parse(&text);
    let prog = circuit::parse_qasm(&text)?;
    let mut a = StateVector::zero(4)?;
    a.apply_circuit(&c)?;
    let b = prog.simulate()?;
    let f = a.fidelity(&b);
    let mut case = OracleCase::new("", Metric::Fidelity, f, Bound::AtLeast(1.0 - 1e-12));
    match external {
        Ok(n) if n == prog.gates.len() => {
            case = case.detail(format!("{n} statements parsed externally"));
        }
        Ok(n) => {
            case.passed = false;
            case = case.detail(format!("external {n} vs internal {}", prog.gates.len()));
        }
        Err(e) => {
            case.passed = false;
            case = case.detail(e);
        }
    }
    Ok(case)
}

fn interaction_expansion() -> Result<OracleCase> {
    let (l, u) = (2usize, 4.0);
    let p = half(l, u)?;
    let op = hamiltonian::qubit_hamiltonian(&p, 1.0)?;
    // (U/4)(1 − Z_i)(1 − Z_j) = (U/4)(1 − Z_i − Z_j + Z_i Z_j)
    let mut expect: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
    let mut offset = 0.0;
    for i in 0..l {
        offset += u / 4.0;
        *expect.entry(vec![i]).or_default() -= u / 4.0;
        *expect.entry(vec![i + l]).or_default() -= u / 4.0;
        *expect.entry(vec![i, i + l]).or_default() += u / 4.0;
    }
    let mut got: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
    for t in op.terms().iter().filter(|t| t.is_diagonal()) {
        let mut qs: Vec<usize> = t.ops().iter().map(|o| o.0).collect();
        qs.sort_unstable();
        *got.entry(qs).or_default() += t.coeff;
    }
    let mut diff = (op.offset() - offset).abs();
    for k in expect.keys().chain(got.keys()) {
        let (a, b) = (expect.get(k).copied().unwrap_or(0.0), got.get(k).copied().unwrap_or(0.0));
        diff = diff.max((a - b).abs());
    }
    Ok(OracleCase::new("", Metric::AbsDiff, diff, Bound::AtMost(1e-15))
        .values(op.offset(), offset)
        .detail("offset and Z/ZZ coefficients at L=2, U=4"))
}

fn jw_spectrum_all_sectors() -> Result<OracleCase> {
    let l = 3;
    let base = HubbardParams::new(l, 1.0, 4.0, 0, 0)?;
    let op = hamiltonian::qubit_hamiltonian(&base, 1.0)?;
    let jw = sorted_eigenvalues(real_symmetric(&dense_restricted(&op, &full_register(2 * l)))?);
    let mut fermion = Vec::new();
    for n_up in 0..=l {
        for n_down in 0..=l {
            let p = HubbardParams::new(l, 1.0, 4.0, n_up, n_down)?;
            fermion.extend(hamiltonian::sector_spectrum(&p, 1.0)?);
        }
    }
    fermion.sort_by(f64::total_cmp);
    if fermion.len() != jw.len() {
        return Err(Error::Solver(format!(
            "{} sector eigenvalues vs {} register eigenvalues",
            fermion.len(),
            jw.len()
        )));
    }
    let diff = jw
        .iter()
        .zip(&fermion)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(OracleCase::new("", Metric::AbsDiff, diff, Bound::AtMost(1e-10))
        .values(fermion[0], jw[0])
        .detail("64 eigenvalues, L=3, U=4"))
}

/// Circuit final state (sector coefficients) and the dense TDSE state.
fn circuit_and_tdse(
    params: &HubbardParams,
    sched: &AnnealSchedule,
) -> Result<(Vec<Complex64>, Vec<Complex64>, f64)> {
    let out = anneal::run_anneal(params, sched, GroupingMode::XxYyZz, &RunOptions::default())?;
    let basis = SectorBasis::new(params, MAX_ED_DIM)?;
    let circ = basis.project(&out.state)?;
    let tdse = hamiltonian::tdse_reference(params, sched)?;
    Ok((circ, tdse, out.record.delta_e))
}

fn tdse_overlap_second_order() -> Result<OracleCase> {
    let tau = 0.025;
    let p = half(2, 4.0)?;
    let sched = AnnealSchedule::new(ScheduleKind::Linear, 20.0, tau)?;
    let (c, t, _) = circuit_and_tdse(&p, &sched)?;
    let f = fidelity(&c, &t);
    Ok(OracleCase::new("", Metric::Fidelity, f, Bound::AtLeast(1.0 - 10.0 * tau * tau))
        .detail("L=2, U=4, T_A=20, tau=0.025"))
}

fn tdse_fidelity() -> Result<OracleCase> {
    let p = half(2, 4.0)?;
    let sched = AnnealSchedule::new(ScheduleKind::Linear, 20.0, 0.025)?;
    let (c, t, _) = circuit_and_tdse(&p, &sched)?;
    Ok(OracleCase::new("", Metric::Fidelity, fidelity(&c, &t), Bound::AtLeast(0.999))
        .detail("L=2, U=4, T_A=20, tau=0.025"))
}

fn givens_vs_ed() -> Result<OracleCase> {
    let p = HubbardParams::new(5, 1.0, 4.0, 3, 2)?;
    let gs = hamiltonian::exact_diag(&p, 0.0)?;
    let s = prep_state(&p)?;
    let coeffs = gs.basis.project(&s)?;
    let f = fidelity(&coeffs, &gs.complex_vector());
    let e = stateprep::free_fermion_energy(&p)?;
    Ok(OracleCase::new("", Metric::Fidelity, f, Bound::AtLeast(1.0 - 1e-10))
        .values(e, gs.energy)
        .detail("L=5, (3,2), overlap with the s=0 ground vector"))
}

fn givens_vs_slater() -> Result<OracleCase> {
    let mut worst = 1.0f64;
    for (l, nu, nd) in [(2, 1, 1), (3, 2, 1), (4, 2, 2), (5, 3, 2), (6, 3, 3), (6, 1, 4)] {
        let p = HubbardParams::new(l, 1.0, 0.0, nu, nd)?;
        let s = prep_state(&p)?;
        worst = worst.min(fidelity(s.amplitudes(), &slater_state(&p)?));
    }
    Ok(OracleCase::new("", Metric::Fidelity, worst, Bound::AtLeast(1.0 - 1e-12))
        .detail("determinant amplitudes, six fillings up to L=6"))
}

fn free_step_vs_dense() -> Result<OracleCase> {
    let tau = 0.025;
    let p = half(2, 0.0)?;
    let step = anneal::trotter_step_at(&p, GroupingMode::XxYyZz, 0.0, tau)?;
    let h = real_symmetric(&dense_restricted(
        &hamiltonian::qubit_hamiltonian(&p, 0.0)?,
        &full_register(4),
    ))?;
    let v = random_state(16, 5);
    let mut s = StateVector::from_amplitudes(v.clone())?;
    s.apply_circuit(&step)?;
    let exact = column(&dense_expm(&h, tau), &v);
    let f = fidelity(s.amplitudes(), &exact);
    Ok(OracleCase::new("", Metric::Fidelity, f, Bound::AtLeast(1.0 - 10.0 * tau.powi(6)))
        .detail("L=2, U=0, random register state"))
}

fn step_operator_error(params: &HubbardParams, g: f64, tau: f64) -> Result<f64> {
    let step = anneal::trotter_step_at(params, GroupingMode::XxYyZz, g, tau)?;
    let h = real_symmetric(&dense_restricted(
        &hamiltonian::qubit_hamiltonian_scaled(params, g)?,
        &full_register(params.n_qubits()),
    ))?;
    Ok(phase_free_distance(&circuit_unitary(&step)?, &dense_expm(&h, tau)))
}

/// One-step operator distance at `τ` and `τ/2` for `L = 2`, `U = 4`, `s = 1/2`.
pub fn step_order_ratio(tau: f64) -> Result<(f64, f64)> {
    let p = half(2, 4.0)?;
    let (a, b) = (step_operator_error(&p, 0.5, tau)?, step_operator_error(&p, 0.5, tau / 2.0)?);
    Ok((a, b))
}

fn step_operator_order() -> Result<OracleCase> {
    let (a, b) = step_order_ratio(0.1)?;
    Ok(OracleCase::new("", Metric::Ratio, a / b, Bound::Between(6.5, 9.5))
        .values(a, b)
        .detail("operator distance, L=2, U=4, s=1/2, tau=0.1 vs 0.05"))
}

/// Error of a single product-formula step applied to the exactly evolved
/// state at the middle of a fixed-`T_A` linear anneal (`L = 2`, `U = 4`).
pub fn midpoint_step_error(t_a: f64, tau: f64) -> Result<f64> {
    let p = half(2, 4.0)?;
    let sched = AnnealSchedule::new(ScheduleKind::Linear, t_a, tau)?;
    let reg = full_register(4);
    let ham = |g: f64| -> Result<DMatrix<f64>> {
        real_symmetric(&dense_restricted(&hamiltonian::qubit_hamiltonian_scaled(&p, g)?, &reg))
    };
    let mut v = prep_state(&p)?.amplitudes().to_vec();
    let mid = sched.n_steps() / 2;
    for n in 1..=mid {
        v = column(&dense_expm(&ham(sched.interaction_at_step(n))?, tau), &v);
    }
    let g = sched.interaction_at_step(mid + 1);
    let exact = column(&dense_expm(&ham(g)?, tau), &v);
    let mut s = StateVector::from_amplitudes(v)?;
    s.apply_circuit(&anneal::trotter_step_at(&p, GroupingMode::XxYyZz, g, tau)?)?;
    Ok(state_distance(s.amplitudes(), &exact))
}

/// Final-state distance between the circuit and the TDSE oracle for a full
/// linear anneal at half filling.
pub fn anneal_state_error(l: usize, u: f64, t_a: f64, tau: f64) -> Result<f64> {
    let p = half(l, u)?;
    let sched = AnnealSchedule::new(ScheduleKind::Linear, t_a, tau)?;
    let (c, t, _) = circuit_and_tdse(&p, &sched)?;
    let n = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let c: Vec<_> = c.iter().map(|x| x / n).collect();
    Ok(state_distance(&c, &t))
}

fn step_state_order() -> Result<OracleCase> {
    let t_a = 10.0;
    let (a, b) = (midpoint_step_error(t_a, 0.1)?, midpoint_step_error(t_a, 0.05)?);
    let (fa, fb) = (anneal_state_error(2, 4.0, t_a, 0.1)?, anneal_state_error(2, 4.0, t_a, 0.05)?);
    Ok(OracleCase::new("", Metric::Ratio, a / b, Bound::Between(6.5, 9.5))
        .values(a, b)
        .detail(format!(
            "T_A=10 mid-anneal step, tau=0.1 vs 0.05; whole-anneal state error ratio {:.2}",
            fa / fb
        )))
}

fn residual_vs_tdse() -> Result<OracleCase> {
    let p = half(2, 4.0)?;
    let sched = AnnealSchedule::new(ScheduleKind::Linear, 40.0, 0.025)?;
    let (_, t, de) = circuit_and_tdse(&p, &sched)?;
    let h = hamiltonian::SectorHamiltonian::new(&p, MAX_ED_DIM)?;
    let e0 = hamiltonian::exact_diag(&p, 1.0)?.energy;
    let tdse_de = h.energy(1.0, &t) - e0;
    let ratio = de / tdse_de;
    Ok(OracleCase::new("", Metric::Ratio, ratio, Bound::Between(0.5, 2.0))
        .values(de, tdse_de)
        .detail("L=2, U=4, linear, T_A=40"))
}

fn bethe_vs_ed() -> Result<OracleCase> {
    let mut worst = 0.0f64;
    for l in [2, 4, 6] {
        for u in REFERENCE_U {
            let p = half(l, u)?;
            let d = (bethe::bethe_energy(&p)? - hamiltonian::exact_diag(&p, 1.0)?.energy).abs();
            worst = worst.max(d);
        }
    }
    Ok(OracleCase::new("", Metric::AbsDiff, worst, Bound::AtMost(1e-8))
        .detail("L=2,4,6 half filling, U=4,8,16"))
}

fn bethe_vs_jw() -> Result<OracleCase> {
    let mut worst = 0.0f64;
    for (l, nu, nd) in [(2, 1, 1), (3, 2, 1), (4, 2, 2), (4, 3, 1), (5, 3, 2), (6, 3, 3)] {
        let p = HubbardParams::new(l, 1.0, 4.0, nu, nd)?;
        let d = (bethe::bethe_energy(&p)? - jw_sector_ground_energy(&p, 1.0)?).abs();
        worst = worst.max(d);
    }
    Ok(OracleCase::new("", Metric::AbsDiff, worst, Bound::AtMost(1e-8))
        .detail("dense register operator in the sector, L <= 6, U=4"))
}

fn reference_table_bethe() -> Result<OracleCase> {
    let mut worst = 0.0f64;
    for (l, row) in REFERENCE_GROUND_ENERGIES {
        for (u, e) in REFERENCE_U.iter().zip(row) {
            worst = worst.max((bethe::bethe_energy(&half(l, *u)?)? - e).abs());
        }
    }
    Ok(OracleCase::new("", Metric::AbsDiff, worst, Bound::AtMost(1e-5))
        .detail("30 entries, L=2..20"))
}

fn reference_table_ed() -> Result<OracleCase> {
    let mut worst = 0.0f64;
    for (l, row) in REFERENCE_GROUND_ENERGIES.iter().filter(|r| r.0 <= 10) {
        for (u, e) in REFERENCE_U.iter().zip(row) {
            let ed = hamiltonian::exact_diag(&half(*l, *u)?, 1.0)?.energy;
            worst = worst.max((ed - e).abs());
        }
    }
    Ok(OracleCase::new("", Metric::AbsDiff, worst, Bound::AtMost(1e-5))
        .detail("15 entries, L=2..10"))
}

/// Residual curve `(T_A, ΔE)` of a linear anneal on a log grid.
pub fn residual_curve(
    params: &HubbardParams,
    kind: ScheduleKind,
    lo: f64,
    hi: f64,
    per_decade: usize,
    tau: f64,
) -> Result<Vec<(f64, f64)>> {
    anneal::log_grid(lo, hi, per_decade, tau)?
        .into_iter()
        .map(|t_a| {
            let sched = AnnealSchedule::new(kind, t_a, tau)?;
            let out = anneal::run_anneal(params, &sched, GroupingMode::XxYyZz, &RunOptions::default())?;
            Ok((t_a, out.record.delta_e))
        })
        .collect()
}

fn onset_refined_grid() -> Result<OracleCase> {
    let p = half(4, 8.0)?;
    let cfg = OnsetConfig::new(2.0);
    let coarse = residual_curve(&p, ScheduleKind::Linear, 5.0, 40.0, 10, 0.025)?;
    let fine = residual_curve(&p, ScheduleKind::Linear, 5.0, 40.0, 20, 0.025)?;
    let a = analysis::detect_onset(&coarse, &cfg)?;
    let b = analysis::detect_onset(&fine, &cfg)?;
    Ok(match (a, b) {
        (Some(a), Some(b)) => {
            let rel = (a.epsilon - b.epsilon).abs() / b.epsilon;
            OracleCase::new("", Metric::Ratio, rel, Bound::AtMost(0.3))
                .values(a.epsilon, b.epsilon)
                .detail(format!("onset at T_A={:.3} vs {:.3}", a.t_a, b.t_a))
        }
        (a, b) => OracleCase::new("", Metric::Ratio, f64::NAN, Bound::AtMost(0.3)).detail(format!(
            "no onset on the {} grid",
            match (a.is_some(), b.is_some()) {
                (false, false) => "coarse or refined",
                (false, true) => "coarse",
                _ => "refined",
            }
        )),
    })
}

/// Half-filled ground state placed on the register, with its energy.
pub fn ground_register_state(l: usize, u: f64) -> Result<(StateVector, f64)> {
    let p = half(l, u)?;
    let gs = hamiltonian::exact_diag(&p, 1.0)?;
    Ok((gs.basis.embed(&gs.complex_vector())?, gs.energy))
}

fn sampling_stderr_slope() -> Result<OracleCase> {
    let (state, _) = ground_register_state(2, 4.0)?;
    let op = hamiltonian::qubit_hamiltonian(&half(2, 4.0)?, 1.0)?;
    let mut pts = Vec::new();
    for (k, shots) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
        let est = analysis::estimate_energy_sampling(&state, &op, shots, 17 + k as u64)?;
        pts.push((shots as f64, est.stderr));
    }
    let fit = analysis::fit_power_law(&pts)?;
    Ok(OracleCase::new("", Metric::Slope, fit.exponent, Bound::Between(-0.6, -0.4))
        .detail("stderr vs shots, 1e3..1e5"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_elements() {
        let y = [(0, Pauli::Y)];
        assert_eq!(pauli_element(&y, 0, 1), Complex64::new(0.0, -1.0));
        assert_eq!(pauli_element(&y, 1, 0), Complex64::new(0.0, 1.0));
        let zx = [(0, Pauli::Z), (1, Pauli::X)];
        assert_eq!(pauli_element(&zx, 0b11, 0b01), Complex64::new(-1.0, 0.0));
        assert_eq!(pauli_element(&zx, 0b111, 0b001), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn determinant() {
        let q = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!((minor_det(&q, &[0, 2]) - (6.0 - 12.0)).abs() < 1e-14);
        assert!((minor_det(&q, &[1, 0]) - (8.0 - 5.0)).abs() < 1e-14);
    }

    #[test]
    fn report_formats() {
        let r = OracleReport {
            cases: vec![
                OracleCase::new("a", Metric::AbsDiff, 0.0, Bound::AtMost(1e-9)),
                OracleCase::new("b<", Metric::Ratio, 3.0, Bound::Between(6.5, 9.5)),
            ],
            seconds: 0.0,
        };
        assert!(!r.all_passed());
        let xml = r.to_junit_xml();
        assert!(xml.contains("failures=\"1\""));
        assert!(xml.contains("b&lt;"));
        assert!(r.to_text().contains("FAIL b<"));
    }

    #[test]
    fn ids_unique() {
        let mut ids = case_ids();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), CASES.len());
    }
}
