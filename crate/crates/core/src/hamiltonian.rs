//! Hubbard Hamiltonian in qubit form, plus the classical references used to
//! check the quantum pipeline: fixed-particle-number exact diagonalization and
//! piecewise-constant time evolution inside that sector.
//!
//! The interaction is always written as `g·U Σ n↑n↓`; `g` is the schedule's
//! interaction factor (`g = s` for the linear schedule).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::{AddAssign, Mul};

use crate::anneal::AnnealSchedule;
use crate::error::{Error, Result};
use crate::simcore::{Pauli, PauliSum, PauliTerm, StateVector, MAX_QUBITS};

/// Largest sector handled by [`exact_diag`].
pub const MAX_ED_DIM: usize = 1_000_000;
/// Largest sector handled by [`tdse_reference`].
pub const MAX_TDSE_DIM: usize = 4096;
/// Above this dimension the ground state is found iteratively.
pub const DENSE_ED_MAX_DIM: usize = 1024;
/// Above this dimension step exponentials use a Krylov subspace.
const DENSE_EXPM_MAX_DIM: usize = 256;

const LANCZOS_BASIS: usize = 40;
const LANCZOS_RESTARTS: usize = 200;
const LANCZOS_TOL: f64 = 1e-10;
const KRYLOV_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HubbardParams {
    /// Number of sites.
    pub l: usize,
    /// Hopping amplitude `t_H`.
    pub t: f64,
    /// On-site repulsion.
    pub u: f64,
    pub n_up: usize,
    pub n_down: usize,
}

impl HubbardParams {
    pub fn new(l: usize, t: f64, u: f64, n_up: usize, n_down: usize) -> Result<Self> {
        let p = HubbardParams {
            l,
            t,
            u,
            n_up,
            n_down,
        };
        p.validate()?;
        Ok(p)
    }

    /// `N = L` electrons with `N↑ = N↓ = L/2`; `L` must be even.
    pub fn half_filled(l: usize, t: f64, u: f64) -> Result<Self> {
        if l % 2 != 0 {
            return Err(Error::arg(format!(
                "half filling with N↑ = N↓ needs an even number of sites, got L = {l}"
            )));
        }
        Self::new(l, t, u, l / 2, l / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::arg("lattice needs at least one site"));
        }
        if self.n_up > self.l || self.n_down > self.l {
            return Err(Error::arg(format!(
                "particle numbers ({}, {}) exceed L = {}",
                self.n_up, self.n_down, self.l
            )));
        }
        if !self.t.is_finite() || !self.u.is_finite() {
            return Err(Error::arg("t_H and U must be finite"));
        }
        if self.u < 0.0 {
            return Err(Error::arg(format!("U must be non-negative, got {}", self.u)));
        }
        Ok(())
    }

    /// Fails when the `2L`-qubit register cannot be addressed by bit masks.
    pub fn check_register(&self) -> Result<()> {
        if 2 * self.l >= usize::BITS as usize {
            return Err(Error::Capacity {
                what: "register qubits",
                required: 2 * self.l,
                limit: usize::BITS as usize - 1,
            });
        }
        Ok(())
    }

    pub fn with_u(self, u: f64) -> Self {
        HubbardParams { u, ..self }
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.l
    }

    pub fn n_particles(&self) -> usize {
        self.n_up + self.n_down
    }

    pub fn up_qubit(&self, site: usize) -> usize {
        site
    }

    pub fn down_qubit(&self, site: usize) -> usize {
        self.l + site
    }
}

/// Jordan-Wigner qubit Hamiltonian `(1−s)H_I + sH_H` on `2L` qubits.
pub fn qubit_hamiltonian(params: &HubbardParams, s: f64) -> Result<PauliSum> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::arg(format!("s must lie in [0, 1], got {s}")));
    }
    qubit_hamiltonian_scaled(params, s)
}

/// Qubit Hamiltonian with the interaction scaled by `g`.
///
/// `−(t/2) Σ (XX + YY)` over neighbouring qubits of each spin block, plus
/// `(gU/4) Σ_i (I − Z_i)(I − Z_{i+L})` expanded into `Z`, `ZZ` and a constant.
/// Zero-valued interaction terms are omitted.
pub fn qubit_hamiltonian_scaled(params: &HubbardParams, g: f64) -> Result<PauliSum> {
    params.validate()?;
    params.check_register()?;
    if !g.is_finite() {
        return Err(Error::arg("interaction factor must be finite"));
    }
    let l = params.l;
    let mut op = PauliSum::default();
    for block in [0, l] {
        for i in 0..l.saturating_sub(1) {
            let (a, b) = (block + i, block + i + 1);
            op.push(PauliTerm::new(-params.t / 2.0, [(a, Pauli::X), (b, Pauli::X)])?);
            op.push(PauliTerm::new(-params.t / 2.0, [(a, Pauli::Y), (b, Pauli::Y)])?);
        }
    }
    let w = g * params.u / 4.0;
    if w != 0.0 {
        for i in 0..l {
            op.push(PauliTerm::new(w, [(i, Pauli::Z), (i + l, Pauli::Z)])?);
            op.push(PauliTerm::new(-w, [(i, Pauli::Z)])?);
            op.push(PauliTerm::new(-w, [(i + l, Pauli::Z)])?);
            op.add_offset(w);
        }
    }
    Ok(op)
}

/// `N↑ = Σ (I − Z_i)/2` or `N↓` as a Pauli sum.
pub fn number_operator(params: &HubbardParams, down: bool) -> Result<PauliSum> {
    let base = if down { params.l } else { 0 };
    let mut op = PauliSum::new(Vec::new(), params.l as f64 / 2.0);
    for i in 0..params.l {
        op.push(PauliTerm::new(-0.5, [(base + i, Pauli::Z)])?);
    }
    Ok(op)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn masks_with_popcount(l: usize, n: usize) -> Vec<usize> {
    (0..1usize << l)
        .filter(|m| m.count_ones() as usize == n)
        .collect()
}

/// Occupation basis of the fixed-`(N↑, N↓)` subspace.
///
/// Basis state `k = iu · n_down_states + id` has spin-up occupation
/// `up_masks[iu]` and spin-down occupation `down_masks[id]`, both sorted
/// ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorBasis {
    l: usize,
    up: Vec<usize>,
    down: Vec<usize>,
}

impl SectorBasis {
    pub fn new(params: &HubbardParams, max_dim: usize) -> Result<Self> {
        params.validate()?;
        params.check_register()?;
        let dim = binomial(params.l, params.n_up) * binomial(params.l, params.n_down);
        if dim > max_dim as u128 {
            return Err(Error::Capacity {
                what: "sector dimension",
                required: usize::try_from(dim).unwrap_or(usize::MAX),
                limit: max_dim,
            });
        }
        Ok(SectorBasis {
            l: params.l,
            up: masks_with_popcount(params.l, params.n_up),
            down: masks_with_popcount(params.l, params.n_down),
        })
    }

    pub fn dim(&self) -> usize {
        self.up.len() * self.down.len()
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn up_masks(&self) -> &[usize] {
        &self.up
    }

    pub fn down_masks(&self) -> &[usize] {
        &self.down
    }

    /// `(up_mask, down_mask)` of basis state `k`.
    pub fn occupations(&self, k: usize) -> (usize, usize) {
        let nd = self.down.len();
        (self.up[k / nd], self.down[k % nd])
    }

    pub fn index_of(&self, up_mask: usize, down_mask: usize) -> Option<usize> {
        let iu = self.up.binary_search(&up_mask).ok()?;
        let id = self.down.binary_search(&down_mask).ok()?;
        Some(iu * self.down.len() + id)
    }

    /// Amplitude index of basis state `k` in the `2L`-qubit register.
    pub fn register_index(&self, k: usize) -> usize {
        let (u, d) = self.occupations(k);
        u | (d << self.l)
    }

    /// Sector components of a register state.
    pub fn project(&self, state: &StateVector) -> Result<Vec<Complex64>> {
        self.check_register(state.n_qubits())?;
        let amps = state.amplitudes();
        Ok((0..self.dim())
            .map(|k| amps[self.register_index(k)])
            .collect())
    }

    /// Register state whose only support is the sector.
    pub fn embed(&self, coeffs: &[Complex64]) -> Result<StateVector> {
        if coeffs.len() != self.dim() {
            return Err(Error::arg(format!(
                "{} coefficients for a sector of dimension {}",
                coeffs.len(),
                self.dim()
            )));
        }
        let n = 2 * self.l;
        if n > MAX_QUBITS {
            return Err(Error::Capacity {
                what: "statevector qubits",
                required: n,
                limit: MAX_QUBITS,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (k, c) in coeffs.iter().enumerate() {
            amps[self.register_index(k)] = *c;
        }
        StateVector::from_amplitudes(amps)
    }

    /// Probability weight of `state` outside the sector.
    pub fn leakage(&self, state: &StateVector) -> Result<f64> {
        let inside: f64 = self.project(state)?.iter().map(|c| c.norm_sqr()).sum();
        Ok((state.norm_sqr() - inside).max(0.0))
    }

    fn check_register(&self, n_qubits: usize) -> Result<()> {
        if n_qubits != 2 * self.l {
            return Err(Error::arg(format!(
                "state has {n_qubits} qubits, sector needs {}",
                2 * self.l
            )));
        }
        Ok(())
    }
}

/// `c†_to c_from` on a register occupation with Jordan-Wigner mode order.
/// Returns the resulting occupation and sign, or `None` if it annihilates.
pub fn fermion_hop(occ: usize, to: usize, from: usize) -> Option<(usize, f64)> {
    if occ & (1 << from) == 0 {
        return None;
    }
    let below = |m: usize, q: usize| (m & ((1usize << q) - 1)).count_ones();
    let mut sign = below(occ, from);
    let occ = occ & !(1 << from);
    if occ & (1 << to) != 0 {
        return None;
    }
    sign += below(occ, to);
    let occ = occ | (1 << to);
    Some((occ, if sign % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Hubbard Hamiltonian restricted to one sector, stored as the two one-body
/// hopping blocks plus the double-occupancy diagonal.
#[derive(Clone, Debug)]
pub struct SectorHamiltonian {
    basis: SectorBasis,
    t: f64,
    u: f64,
    /// `hop_up[iu]` lists `(source iu', amplitude)`.
    hop_up: Vec<Vec<(usize, f64)>>,
    hop_down: Vec<Vec<(usize, f64)>>,
    double_occ: Vec<f64>,
}

impl SectorHamiltonian {
    pub fn new(params: &HubbardParams, max_dim: usize) -> Result<Self> {
        let basis = SectorBasis::new(params, max_dim)?;
        let l = params.l;
        // The Jordan-Wigner strings of a same-species hop cancel on the other
        // species, so each block's hopping can be built in isolation.
        let block = |masks: &[usize], offset: usize| -> Vec<Vec<(usize, f64)>> {
            let mut rows = vec![Vec::new(); masks.len()];
            for (src, &m) in masks.iter().enumerate() {
                for i in 0..l.saturating_sub(1) {
                    for (to, from) in [(i, i + 1), (i + 1, i)] {
                        if let Some((occ, sign)) = fermion_hop(m << offset, to + offset, from + offset)
                        {
                            let dst = masks.binary_search(&(occ >> offset)).expect("hop stays in sector");
                            rows[dst].push((src, -params.t * sign));
                        }
                    }
                }
            }
            rows
        };
        let hop_up = block(&basis.up, 0);
        let hop_down = block(&basis.down, l);
        let double_occ = (0..basis.dim())
            .map(|k| {
                let (u, d) = basis.occupations(k);
                (u & d).count_ones() as f64
            })
            .collect();
        Ok(SectorHamiltonian {
            basis,
            t: params.t,
            u: params.u,
            hop_up,
            hop_down,
            double_occ,
        })
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn hopping(&self) -> f64 {
        self.t
    }

    /// `y = H(g) x`.
    pub fn apply<T>(&self, g: f64, x: &[T], y: &mut [T])
    where
        T: Copy + Default + Send + Sync + AddAssign + Mul<f64, Output = T>,
    {
        let nd = self.basis.down.len();
        let gu = g * self.u;
        let row = |(iu, out): (usize, &mut [T])| {
            for (id, y) in out.iter_mut().enumerate() {
                let k = iu * nd + id;
                let mut acc = x[k] * (gu * self.double_occ[k]);
                for &(src, a) in &self.hop_up[iu] {
                    acc += x[src * nd + id] * a;
                }
                for &(src, a) in &self.hop_down[id] {
                    acc += x[iu * nd + src] * a;
                }
                *y = acc;
            }
        };
        #[cfg(feature = "parallel")]
        if y.len() >= 1 << 14 {
            y.par_chunks_mut(nd).enumerate().for_each(row);
            return;
        }
        y.chunks_mut(nd).enumerate().for_each(row);
    }

    /// Dense matrix assembled directly from register-level fermion operators.
    pub fn dense(&self, g: f64) -> DMatrix<f64> {
        let dim = self.dim();
        let l = self.basis.l;
        let mut h = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let occ = self.basis.register_index(k);
            h[(k, k)] = g * self.u * self.double_occ[k];
            for block in [0, l] {
                for i in 0..l.saturating_sub(1) {
                    for (to, from) in [(block + i, block + i + 1), (block + i + 1, block + i)] {
                        if let Some((new, sign)) = fermion_hop(occ, to, from) {
                            let j = self
                                .basis
                                .index_of(new & ((1 << l) - 1), new >> l)
                                .expect("hop stays in sector");
                            h[(j, k)] += -self.t * sign;
                        }
                    }
                }
            }
        }
        h
    }

    pub fn energy(&self, g: f64, v: &[Complex64]) -> f64 {
        let mut hv = vec![Complex64::default(); v.len()];
        self.apply(g, v, &mut hv);
        v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Lowest eigenpair within a sector.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    /// Normalised, real, largest-magnitude component positive.
    pub vector: Vec<f64>,
    pub basis: SectorBasis,
}

impl GroundState {
    pub fn complex_vector(&self) -> Vec<Complex64> {
        self.vector.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }
}

/// Sector ground state of `H(s)` on the linear path.
pub fn exact_diag(params: &HubbardParams, s: f64) -> Result<GroundState> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::arg(format!("s must lie in [0, 1], got {s}")));
    }
    exact_diag_scaled(params, s)
}

/// Sector ground state with the interaction scaled by `g`.
pub fn exact_diag_scaled(params: &HubbardParams, g: f64) -> Result<GroundState> {
    let h = SectorHamiltonian::new(params, MAX_ED_DIM)?;
    let dim = h.dim();
    let (energy, mut vector) = if dim <= DENSE_ED_MAX_DIM {
        let eig = SymmetricEigen::new(h.dense(g));
        let k = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("sector is never empty");
        (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect())
    } else {
        lanczos_ground(|x, y| h.apply(g, x, y), dim)?
    };
    let pivot = vector
        .iter()
        .copied()
        .max_by(|a: &f64, b: &f64| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    if pivot < 0.0 {
        vector.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(GroundState {
        energy,
        vector,
        basis: h.basis,
    })
}

/// All eigenvalues of the sector matrix, ascending (dense; small sectors only).
pub fn sector_spectrum(params: &HubbardParams, g: f64) -> Result<Vec<f64>> {
    let h = SectorHamiltonian::new(params, MAX_TDSE_DIM)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(h.dense(g)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    n
}

/// Restarted Lanczos with full reorthogonalisation; the Ritz vector of each
/// cycle seeds the next.
fn lanczos_ground<F>(apply: F, dim: usize) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut start);
    let m_max = LANCZOS_BASIS.min(dim);
    let mut last_residual = f64::INFINITY;
    for _ in 0..LANCZOS_RESTARTS {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut w = vec![0.0; dim];
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(&w, v);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = dot(&w, &w).sqrt();
            if basis.len() == m_max || b < 1e-13 {
                beta.push(b);
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (k, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty Krylov space");
        let y = eig.eigenvectors.column(k);
        let mut ritz = vec![0.0; dim];
        for (c, v) in y.iter().zip(&basis) {
            ritz.iter_mut().zip(v).for_each(|(r, x)| *r += c * x);
        }
        normalize(&mut ritz);
        apply(&ritz, &mut w);
        let residual = w
            .iter()
            .zip(&ritz)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        last_residual = residual;
        if residual <= LANCZOS_TOL * theta.abs().max(1.0) || m < m_max {
            return Ok((dot(&w, &ritz), ritz));
        }
        start = ritz;
    }
    Err(Error::NonConvergence {
        context: "Lanczos ground state".into(),
        residual: last_residual,
    })
}

/// Piecewise-constant evolution of the `s = 0` sector ground state: one exact
/// exponential `exp(−iτH(g(s_n)))` per step at the midpoints of the schedule,
/// with no operator splitting.
pub fn tdse_reference(params: &HubbardParams, schedule: &AnnealSchedule) -> Result<Vec<Complex64>> {
    let h = SectorHamiltonian::new(params, MAX_TDSE_DIM)?;
    let init = exact_diag_scaled(params, 0.0)?.complex_vector();
    tdse_evolve(&h, schedule, &init)
}

/// Evolve `initial` through every step of `schedule`.
pub fn tdse_evolve(
    h: &SectorHamiltonian,
    schedule: &AnnealSchedule,
    initial: &[Complex64],
) -> Result<Vec<Complex64>> {
    if initial.len() != h.dim() {
        return Err(Error::arg("initial vector does not match the sector"));
    }
    if h.dim() > MAX_TDSE_DIM {
        return Err(Error::Capacity {
            what: "time-evolution sector dimension",
            required: h.dim(),
            limit: MAX_TDSE_DIM,
        });
    }
    let mut v = initial.to_vec();
    for n in 1..=schedule.n_steps() {
        let g = schedule.interaction_at_step(n);
        v = expm_apply(h, g, schedule.tau(), &v)?;
    }
    Ok(v)
}

/// `exp(−iτH(g)) v`.
pub fn expm_apply(h: &SectorHamiltonian, g: f64, tau: f64, v: &[Complex64]) -> Result<Vec<Complex64>> {
    if h.dim() <= DENSE_EXPM_MAX_DIM {
        let eig = SymmetricEigen::new(h.dense(g));
        let q = &eig.eigenvectors;
        let n = h.dim();
        let mut coeff = vec![Complex64::default(); n];
        for (k, c) in coeff.iter_mut().enumerate() {
            let proj: Complex64 = (0..n).map(|i| v[i] * q[(i, k)]).sum();
            *c = proj * Complex64::from_polar(1.0, -tau * eig.eigenvalues[k]);
        }
        return Ok((0..n)
            .map(|i| (0..n).map(|k| coeff[k] * q[(i, k)]).sum())
            .collect());
    }
    krylov_expm(h, g, tau, v, 0)
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn krylov_expm(
    h: &SectorHamiltonian,
    g: f64,
    tau: f64,
    v: &[Complex64],
    depth: u32,
) -> Result<Vec<Complex64>> {
    let norm = cdot(v, v).re.sqrt();
    if norm == 0.0 {
        return Ok(v.to_vec());
    }
    let dim = v.len();
    let m_max = LANCZOS_BASIS.min(dim);
    let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|x| x / norm).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::default(); dim];
    loop {
        let j = basis.len() - 1;
        h.apply(g, &basis[j], &mut w);
        alpha.push(cdot(&basis[j], &w).re);
        for _ in 0..2 {
            for b in &basis {
                let c = cdot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = cdot(&w, &w).re.sqrt();
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        // First column of exp(−iτT).
        let small: Vec<Complex64> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| {
                        let q = &eig.eigenvectors;
                        Complex64::from_polar(q[(i, k)] * q[(0, k)], -tau * eig.eigenvalues[k])
                    })
                    .sum()
            })
            .collect();
        let error = b * small[m - 1].norm();
        if error < KRYLOV_TOL || b < 1e-14 || m == dim {
            let mut out = vec![Complex64::default(); dim];
            for (c, basis_vec) in small.iter().zip(&basis) {
                out.iter_mut().zip(basis_vec).for_each(|(o, x)| *o += c * x * norm);
            }
            return Ok(out);
        }
        if m == m_max {
            if depth >= 20 {
                return Err(Error::NonConvergence {
                    context: "Krylov exponential".into(),
                    residual: error,
                });
            }
            let half = krylov_expm(h, g, tau / 2.0, v, depth + 1)?;
            return krylov_expm(h, g, tau / 2.0, &half, depth + 1);
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(l: usize, u: f64, nu: usize, nd: usize) -> HubbardParams {
        HubbardParams::new(l, 1.0, u, nu, nd).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(HubbardParams::new(0, 1.0, 4.0, 0, 0).is_err());
        assert!(HubbardParams::new(2, 1.0, 4.0, 3, 1).is_err());
        assert!(HubbardParams::new(2, 1.0, -1.0, 1, 1).is_err());
        assert!(HubbardParams::half_filled(3, 1.0, 4.0).is_err());
        assert_eq!(HubbardParams::half_filled(4, 1.0, 4.0).unwrap().n_up, 2);
    }

    #[test]
    fn s_zero_has_only_hopping() {
        let h = qubit_hamiltonian(&p(2, 4.0, 1, 1), 0.0).unwrap();
        assert_eq!(h.terms().len(), 4);
        assert!(h.terms().iter().all(|t| !t.is_diagonal() && t.coeff == -0.5));
        assert_eq!(h.offset(), 0.0);
    }

    #[test]
    fn s_one_interaction_coefficients() {
        let h = qubit_hamiltonian(&p(2, 4.0, 1, 1), 1.0).unwrap();
        assert_eq!(h.offset(), 2.0);
        let singles: Vec<_> = h.terms().iter().filter(|t| t.ops().len() == 1).collect();
        assert_eq!(singles.len(), 4);
        assert!(singles.iter().all(|t| t.coeff == -1.0));
        assert!(qubit_hamiltonian(&p(2, 4.0, 1, 1), 1.5).is_err());
    }

    #[test]
    fn no_bond_between_spin_blocks() {
        let h = qubit_hamiltonian(&p(3, 4.0, 1, 1), 0.0).unwrap();
        for t in h.terms() {
            let qs: Vec<_> = t.ops().iter().map(|o| o.0).collect();
            assert_ne!(qs, vec![2, 3]);
        }
    }

    #[test]
    fn sector_dimension_is_binomial_product() {
        let b = SectorBasis::new(&p(5, 4.0, 3, 2), MAX_ED_DIM).unwrap();
        assert_eq!(b.dim(), 10 * 10);
        assert!(matches!(
            SectorBasis::new(&HubbardParams::half_filled(20, 1.0, 4.0).unwrap(), MAX_ED_DIM),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn fermion_signs() {
        // c†_0 c_2 on |0,1,1⟩ passes one occupied mode.
        assert_eq!(fermion_hop(0b110, 0, 2), Some((0b011, -1.0)));
        assert_eq!(fermion_hop(0b010, 0, 1), Some((0b001, 1.0)));
        assert_eq!(fermion_hop(0b011, 0, 1), None);
        assert_eq!(fermion_hop(0b100, 0, 1), None);
    }

    #[test]
    fn two_site_ground_energy() {
        let e = exact_diag(&p(2, 4.0, 1, 1), 1.0).unwrap().energy;
        assert!((e - (2.0 - 8f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn factorized_apply_matches_dense() {
        let h = SectorHamiltonian::new(&p(4, 3.0, 2, 1), MAX_ED_DIM).unwrap();
        let dense = h.dense(0.7);
        for k in 0..h.dim() {
            let mut e = vec![0.0; h.dim()];
            e[k] = 1.0;
            let mut col = vec![0.0; h.dim()];
            h.apply(0.7, &e, &mut col);
            for (i, c) in col.iter().enumerate() {
                assert!((c - dense[(i, k)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let h = SectorHamiltonian::new(&p(6, 4.0, 3, 3), MAX_ED_DIM).unwrap();
        let dense = sector_spectrum(&p(6, 4.0, 3, 3), 1.0).unwrap()[0];
        let (e, v) = lanczos_ground(|x, y| h.apply(1.0, x, y), h.dim()).unwrap();
        assert!((e - dense).abs() < 1e-10);
        assert!((dot(&v, &v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn krylov_matches_dense_exponential() {
        let h = SectorHamiltonian::new(&p(6, 4.0, 3, 3), MAX_ED_DIM).unwrap();
        let v: Vec<Complex64> = (0..h.dim())
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let norm = cdot(&v, &v).re.sqrt();
        let v: Vec<_> = v.iter().map(|x| x / norm).collect();
        let a = krylov_expm(&h, 0.6, 0.3, &v, 0).unwrap();
        let eig = SymmetricEigen::new(h.dense(0.6));
        let n = h.dim();
        let q = &eig.eigenvectors;
        for i in (0..n).step_by(17) {
            let exact: Complex64 = (0..n)
                .map(|k| {
                    let proj: Complex64 = (0..n).map(|j| v[j] * q[(j, k)]).sum();
                    proj * q[(i, k)] * Complex64::from_polar(1.0, -0.3 * eig.eigenvalues[k])
                })
                .sum();
            assert!((exact - a[i]).norm() < 1e-11);
        }
    }

    #[test]
    fn embed_and_project_round_trip() {
        let params = p(3, 4.0, 2, 1);
        let g = exact_diag(&params, 0.5).unwrap();
        let state = g.basis.embed(&g.complex_vector()).unwrap();
        assert!(g.basis.leakage(&state).unwrap() < 1e-15);
        let back = g.basis.project(&state).unwrap();
        assert!(back.iter().zip(&g.vector).all(|(a, b)| (a.re - b).abs() < 1e-15));
    }
}
