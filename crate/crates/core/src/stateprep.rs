//! Free-fermion ground state of the hopping term and its Givens-rotation
//! preparation circuit.
//!
//! A Slater determinant with orbital matrix `Q` (rows = occupied orbitals,
//! columns = sites) is reduced by adjacent-column rotations to `[D | 0]` with
//! `D` diagonal `±1`. Replaying those rotations in reverse on the occupied
//! reference `|1…1 0…0⟩` prepares the determinant up to a global sign.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, SegmentKind};
use crate::error::{Error, Result};
use crate::hamiltonian::HubbardParams;

/// Rotations whose target entry is already below this are skipped.
const SKIP_EPS: f64 = 1e-14;
const ORTHO_TOL: f64 = 1e-8;

/// Single-particle energy `−2t cos k`.
pub fn band_energy(t: f64, k: f64) -> f64 {
    -2.0 * t * k.cos()
}

/// The `n` open-chain momenta `mπ/(L+1)` with the lowest band energy.
pub fn select_momenta(l: usize, n: usize, t: f64) -> Result<Vec<f64>> {
    if n == 0 || n > l {
        return Err(Error::arg(format!("need 1 ≤ N ≤ L, got N = {n}, L = {l}")));
    }
    let mut ks: Vec<f64> = (1..=l).map(|m| m as f64 * PI / (l + 1) as f64).collect();
    ks.sort_by(|a, b| band_energy(t, *a).total_cmp(&band_energy(t, *b)));
    if n < l && t != 0.0 {
        let gap = band_energy(t, ks[n]) - band_energy(t, ks[n - 1]);
        assert!(gap > 1e-12, "degenerate Fermi level at L = {l}, N = {n}");
    }
    ks.truncate(n);
    Ok(ks)
}

/// Sum of occupied band energies for both spin species.
pub fn free_fermion_energy(params: &HubbardParams) -> Result<f64> {
    let mut e = 0.0;
    for n in [params.n_up, params.n_down] {
        if n > 0 {
            e += select_momenta(params.l, n, params.t)?
                .iter()
                .map(|&k| band_energy(params.t, k))
                .sum::<f64>();
        }
    }
    Ok(e)
}

/// Orbitals as rows of an `N × L` real matrix with orthonormal rows.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitalMatrix {
    q: DMatrix<f64>,
}

impl OrbitalMatrix {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() > q.ncols() {
            return Err(Error::arg("more orbitals than sites"));
        }
        let gram = &q * q.transpose();
        let residual = (gram - DMatrix::identity(q.nrows(), q.nrows())).amax();
        if !(residual <= ORTHO_TOL) {
            return Err(Error::arg(format!(
                "orbital rows are not orthonormal (Gram residual {residual:e})"
            )));
        }
        Ok(OrbitalMatrix { q })
    }

    /// Open-chain standing waves `√(2/(L+1)) sin(k j)`, `j = 1..L`.
    pub fn free_fermion(l: usize, n: usize, t: f64) -> Result<Self> {
        let ks = select_momenta(l, n, t)?;
        let norm = (2.0 / (l + 1) as f64).sqrt();
        Self::new(DMatrix::from_fn(n, l, |m, j| norm * (ks[m] * (j + 1) as f64).sin()))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn orbitals(&self) -> usize {
        self.q.nrows()
    }

    pub fn sites(&self) -> usize {
        self.q.ncols()
    }
}

/// Rotation of columns `(site, site+1)` by `[[c, s], [−s, c]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GivensRotation {
    pub site: usize,
    pub theta: f64,
}

impl GivensRotation {
    /// `Q ← Q·G`.
    pub fn apply_columns(&self, q: &mut DMatrix<f64>) {
        let (s, c) = self.theta.sin_cos();
        let a = self.site;
        for r in 0..q.nrows() {
            let (x, y) = (q[(r, a)], q[(r, a + 1)]);
            q[(r, a)] = c * x - s * y;
            q[(r, a + 1)] = s * x + c * y;
        }
    }
}

/// Rotations in elimination order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GivensPlan {
    pub rotations: Vec<GivensRotation>,
}

impl GivensPlan {
    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }
}

/// Givens decomposition of an orbital matrix.
///
/// The rows are first mixed among themselves (which changes the determinant
/// by at most a sign) so that row `i` vanishes beyond column `L−N+i`. Each row
/// is then cleared right to left with rotations on adjacent columns, for at
/// most `N(L−N)` rotations. Applying the plan's rotations to the columns of
/// `Q` leaves a matrix whose last `L−N` columns are zero.
pub fn givens_decompose(q: &OrbitalMatrix) -> GivensPlan {
    let (n, l) = (q.orbitals(), q.sites());
    let mut m = q.matrix().clone();
    if n == 0 {
        return GivensPlan::default();
    }
    let free = l - n;
    for col in (free + 1..l).rev() {
        let keep = col - free;
        for i in 0..keep {
            let (x, y) = (m[(i + 1, col)], m[(i, col)]);
            let rho = x.hypot(y);
            if y.abs() < SKIP_EPS || rho == 0.0 {
                continue;
            }
            let (c, s) = (x / rho, y / rho);
            for j in 0..l {
                let (top, bottom) = (m[(i, j)], m[(i + 1, j)]);
                m[(i, j)] = c * top - s * bottom;
                m[(i + 1, j)] = s * top + c * bottom;
            }
        }
    }
    let mut plan = GivensPlan::default();
    for i in 0..n {
        for j in (i + 1..=free + i).rev() {
            let (x, y) = (m[(i, j - 1)], m[(i, j)]);
            if y.abs() < SKIP_EPS {
                continue;
            }
            let rot = GivensRotation {
                site: j - 1,
                theta: (-y).atan2(x),
            };
            rot.apply_columns(&mut m);
            plan.rotations.push(rot);
        }
    }
    plan
}

/// Append one spin block's preparation: occupy the first `n` modes, then
/// replay the plan in reverse as `CNOT · CRY(−2θ) · CNOT` blocks.
fn push_block(c: &mut Circuit, offset: usize, n: usize, plan: &GivensPlan) -> Result<()> {
    for q in 0..n {
        c.push(Gate::X(offset + q))?;
    }
    for rot in plan.rotations.iter().rev() {
        let (a, b) = (offset + rot.site, offset + rot.site + 1);
        c.push(Gate::Cnot {
            control: b,
            target: a,
        })?;
        c.push(Gate::Cry {
            control: a,
            target: b,
            angle: -2.0 * rot.theta,
        })?;
        c.push(Gate::Cnot {
            control: b,
            target: a,
        })?;
    }
    Ok(())
}

/// Plans for the spin-up and spin-down blocks.
pub fn prep_plans(params: &HubbardParams) -> Result<(GivensPlan, GivensPlan)> {
    params.validate()?;
    let plan = |n: usize| -> Result<GivensPlan> {
        if n == 0 {
            return Ok(GivensPlan::default());
        }
        Ok(givens_decompose(&OrbitalMatrix::free_fermion(params.l, n, params.t)?))
    };
    Ok((plan(params.n_up)?, plan(params.n_down)?))
}

/// Circuit preparing the ground state of the hopping term in the
/// `(N↑, N↓)` sector from `|0…0⟩`.
pub fn prep_circuit(params: &HubbardParams) -> Result<Circuit> {
    let (up, down) = prep_plans(params)?;
    let mut c = Circuit::new(
        params.n_qubits(),
        format!(
            "free-fermion ground state L={} N_up={} N_down={}",
            params.l, params.n_up, params.n_down
        ),
    );
    c.segment(SegmentKind::Prep, |c| {
        push_block(c, 0, params.n_up, &up)?;
        push_block(c, params.l, params.n_down, &down)
    })?;
    Ok(c)
}
