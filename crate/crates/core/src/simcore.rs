//! Dense statevector simulation.
//!
//! Gates are applied by in-place updates of amplitude pairs separated by
//! `2^q`; no operator is ever materialised as a `2^n × 2^n` matrix. Qubit `q`
//! is bit `q` of the amplitude index.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};

/// Largest register the engine will allocate (4 GiB of amplitudes).
pub const MAX_QUBITS: usize = 28;

/// Imaginary part tolerated (and then dropped) in an expectation value.
const IMAG_TOL: f64 = 1e-10;

#[cfg(feature = "parallel")]
const PAR_MIN_LEN: usize = 1 << 14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// 2×2 complex matrix in row-major order.
pub type Matrix2 = [[Complex64; 2]; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                what: "statevector qubits",
                required: n_qubits,
                limit: MAX_QUBITS,
            });
        }
        let mut amps = vec![ZERO; 1usize << n_qubits];
        amps[0] = ONE;
        Ok(StateVector { n_qubits, amps })
    }

    /// Computational basis state; `bits[i]` is the value of qubit `i`.
    pub fn basis(n_qubits: usize, bits: &[u8]) -> Result<Self> {
        if bits.len() != n_qubits {
            return Err(Error::arg(format!(
                "bitstring has {} entries for {} qubits",
                bits.len(),
                n_qubits
            )));
        }
        let mut index = 0usize;
        for (q, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => index |= 1 << q,
                other => return Err(Error::arg(format!("bit value {other} at position {q}"))),
            }
        }
        let mut state = Self::zero(n_qubits)?;
        state.amps[0] = ZERO;
        state.amps[index] = ONE;
        Ok(state)
    }

    /// Wrap raw amplitudes. The vector must have length `2^n` and unit norm.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::arg(format!("amplitude count {len} is not a power of two")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                what: "statevector qubits",
                required: n_qubits,
                limit: MAX_QUBITS,
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::arg(format!("state norm² is {norm}, expected 1")));
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            Err(Error::arg(format!(
                "qubit {q} out of range for {} qubits",
                self.n_qubits
            )))
        } else {
            Ok(())
        }
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::arg(format!("two-qubit gate acts twice on qubit {a}")));
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::H(q) => {
                self.check_qubit(q)?;
                let s = FRAC_1_SQRT_2;
                for_each_pair(&mut self.amps, q, move |_, a0, a1| {
                    let (x, y) = (*a0, *a1);
                    *a0 = (x + y) * s;
                    *a1 = (x - y) * s;
                });
            }
            Gate::PlusX(q) | Gate::MinusX(q) => {
                self.check_qubit(q)?;
                let off = if matches!(gate, Gate::PlusX(_)) { I } else { -I };
                let s = FRAC_1_SQRT_2;
                for_each_pair(&mut self.amps, q, move |_, a0, a1| {
                    let (x, y) = (*a0, *a1);
                    *a0 = (x + off * y) * s;
                    *a1 = (off * x + y) * s;
                });
            }
            Gate::Rz { qubit, angle } => {
                self.check_qubit(qubit)?;
                let p0 = Complex64::from_polar(1.0, -angle / 2.0);
                let p1 = p0.conj();
                for_each_pair(&mut self.amps, qubit, move |_, a0, a1| {
                    *a0 *= p0;
                    *a1 *= p1;
                });
            }
            Gate::Rzz { a, b, angle } => {
                self.check_pair(a, b)?;
                let even = Complex64::from_polar(1.0, -angle);
                let odd = even.conj();
                for_each_amp(&mut self.amps, move |i, amp| {
                    let parity = ((i >> a) ^ (i >> b)) & 1;
                    *amp *= if parity == 0 { even } else { odd };
                });
            }
            Gate::X(q) => {
                self.check_qubit(q)?;
                for_each_pair(&mut self.amps, q, |_, a0, a1| std::mem::swap(a0, a1));
            }
            Gate::Cnot { control, target } => {
                self.check_pair(control, target)?;
                for_each_pair(&mut self.amps, target, move |i, a0, a1| {
                    if (i >> control) & 1 == 1 {
                        std::mem::swap(a0, a1);
                    }
                });
            }
            Gate::Cry {
                control,
                target,
                angle,
            } => {
                self.check_pair(control, target)?;
                let (s, c) = (angle / 2.0).sin_cos();
                for_each_pair(&mut self.amps, target, move |i, a0, a1| {
                    if (i >> control) & 1 == 1 {
                        let (x, y) = (*a0, *a1);
                        *a0 = x * c - y * s;
                        *a1 = x * s + y * c;
                    }
                });
            }
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits() > self.n_qubits {
            return Err(Error::arg(format!(
                "circuit on {} qubits applied to a {}-qubit state",
                circuit.n_qubits(),
                self.n_qubits
            )));
        }
        circuit.gates().iter().try_for_each(|g| self.apply(g))
    }

    /// Apply an arbitrary 2×2 matrix to qubit `q`.
    pub fn apply_matrix1(&mut self, q: usize, m: &Matrix2) -> Result<()> {
        self.check_qubit(q)?;
        let m = *m;
        for_each_pair(&mut self.amps, q, move |_, a0, a1| {
            let (x, y) = (*a0, *a1);
            *a0 = m[0][0] * x + m[0][1] * y;
            *a1 = m[1][0] * x + m[1][1] * y;
        });
        Ok(())
    }

    /// Apply `m` to `target` on the subspace where `control` is 1.
    pub fn apply_controlled1(&mut self, control: usize, target: usize, m: &Matrix2) -> Result<()> {
        self.check_pair(control, target)?;
        let m = *m;
        for_each_pair(&mut self.amps, target, move |i, a0, a1| {
            if (i >> control) & 1 == 1 {
                let (x, y) = (*a0, *a1);
                *a0 = m[0][0] * x + m[0][1] * y;
                *a1 = m[1][0] * x + m[1][1] * y;
            }
        });
        Ok(())
    }

    /// Exact `⟨ψ|op|ψ⟩`.
    pub fn expectation(&self, op: &PauliSum) -> Result<f64> {
        let mut total = Complex64::new(op.offset(), 0.0);
        for term in op.terms() {
            total += term.coeff * self.pauli_expectation(term)?;
        }
        let scale = 1.0 + op.terms().iter().map(|t| t.coeff.abs()).sum::<f64>();
        if total.im.abs() > IMAG_TOL * scale {
            return Err(Error::Solver(format!(
                "expectation has imaginary part {:e}; operator is not Hermitian",
                total.im
            )));
        }
        Ok(total.re)
    }

    /// `⟨ψ|P|ψ⟩` for a single Pauli string (coefficient ignored).
    pub fn pauli_expectation(&self, term: &PauliTerm) -> Result<Complex64> {
        if let Some(q) = term.max_qubit() {
            self.check_qubit(q)?;
        }
        let masks = term.masks();
        let value: Complex64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, amp)| {
                let j = i ^ masks.flip;
                let sign = if (i & masks.sign).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                self.amps[j].conj() * amp * sign
            })
            .sum();
        Ok(value * masks.phase)
    }

    /// Draw `shots` basis-state indices i.i.d. from `|amplitude|²`.
    pub fn sample_indices(&self, shots: usize, seed: u64) -> Result<Vec<usize>> {
        if shots == 0 {
            return Err(Error::arg("shots must be at least 1"));
        }
        let dist = WeightedIndex::new(self.probabilities())
            .map_err(|e| Error::Solver(format!("sampling weights: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..shots).map(|_| dist.sample(&mut rng)).collect())
    }

    /// Like [`sample_indices`](Self::sample_indices) but expanded to bits,
    /// `result[shot][q]` being the value of qubit `q`.
    pub fn sample_bitstrings(&self, shots: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
        let n = self.n_qubits;
        Ok(self
            .sample_indices(shots, seed)?
            .into_iter()
            .map(|idx| (0..n).map(|q| ((idx >> q) & 1) as u8).collect())
            .collect())
    }
}

fn for_each_pair<F>(amps: &mut [Complex64], q: usize, f: F)
where
    F: Fn(usize, &mut Complex64, &mut Complex64) + Send + Sync,
{
    let stride = 1usize << q;
    let width = stride << 1;
    let body = |(chunk_idx, chunk): (usize, &mut [Complex64])| {
        let base = chunk_idx * width;
        let (lo, hi) = chunk.split_at_mut(stride);
        for (off, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
            f(base + off, a0, a1);
        }
    };
    #[cfg(feature = "parallel")]
    if amps.len() >= PAR_MIN_LEN {
        amps.par_chunks_exact_mut(width).enumerate().for_each(body);
        return;
    }
    amps.chunks_exact_mut(width).enumerate().for_each(body);
}

fn for_each_amp<F>(amps: &mut [Complex64], f: F)
where
    F: Fn(usize, &mut Complex64) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if amps.len() >= PAR_MIN_LEN {
        amps.par_iter_mut().enumerate().for_each(|(i, a)| f(i, a));
        return;
    }
    amps.iter_mut().enumerate().for_each(|(i, a)| f(i, a));
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Bit masks describing how a Pauli string acts on basis states:
/// `P|i⟩ = phase · (−1)^{popcount(i & sign)} |i ⊕ flip⟩`.
#[derive(Clone, Copy, Debug)]
pub struct PauliMasks {
    pub flip: usize,
    pub sign: usize,
    pub phase: Complex64,
}

/// Real coefficient times a tensor product of single-qubit Paulis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    ops: Vec<(usize, Pauli)>,
}

impl PauliTerm {
    pub fn new(coeff: f64, ops: impl IntoIterator<Item = (usize, Pauli)>) -> Result<Self> {
        if !coeff.is_finite() {
            return Err(Error::arg("Pauli coefficient must be finite"));
        }
        let mut ops: Vec<_> = ops.into_iter().collect();
        ops.sort_by_key(|&(q, _)| q);
        if ops.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::arg("Pauli string repeats a qubit index"));
        }
        Ok(PauliTerm { coeff, ops })
    }

    /// Operators sorted by qubit index.
    pub fn ops(&self) -> &[(usize, Pauli)] {
        &self.ops
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.ops.last().map(|&(q, _)| q)
    }

    /// True when every factor is `Z`.
    pub fn is_diagonal(&self) -> bool {
        self.ops.iter().all(|&(_, p)| p == Pauli::Z)
    }

    pub fn masks(&self) -> PauliMasks {
        let mut flip = 0;
        let mut sign = 0;
        let mut n_y = 0u32;
        for &(q, p) in &self.ops {
            match p {
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    sign |= 1 << q;
                    n_y += 1;
                }
                Pauli::Z => sign |= 1 << q,
            }
        }
        let phase = match n_y % 4 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        };
        PauliMasks { flip, sign, phase }
    }
}

/// `offset · I + Σ coeff_k P_k` with real coefficients (Hermitian).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    terms: Vec<PauliTerm>,
    offset: f64,
}

impl PauliSum {
    pub fn new(terms: Vec<PauliTerm>, offset: f64) -> Self {
        PauliSum { terms, offset }
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn push(&mut self, term: PauliTerm) {
        self.terms.push(term);
    }

    pub fn add_offset(&mut self, value: f64) {
        self.offset += value;
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.terms.iter().filter_map(PauliTerm::max_qubit).max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-14
    }

    #[test]
    fn basis_states_follow_little_endian_convention() {
        let s = StateVector::basis(1, &[0]).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO]);
        let s = StateVector::basis(2, &[1, 0]).unwrap();
        assert_eq!(s.amplitudes()[1], ONE);
        let s = StateVector::basis(4, &[1, 1, 0, 0]).unwrap();
        assert_eq!(s.amplitudes()[3], ONE);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_rejects_length_mismatch() {
        assert!(matches!(
            StateVector::basis(3, &[1, 0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn zero_rejects_oversized_register() {
        assert!(matches!(
            StateVector::zero(MAX_QUBITS + 1),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn hadamard_makes_plus_state() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&Gate::H(0)).unwrap();
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close(s.amplitudes()[0], r));
        assert!(close(s.amplitudes()[1], r));
    }

    #[test]
    fn plus_x_then_minus_x_is_identity() {
        let amps: Vec<_> = (0..8)
            .map(|k| Complex64::new((k as f64).cos(), (k as f64 * 0.7).sin()))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let s0 = StateVector::from_amplitudes(amps.iter().map(|a| a / norm).collect()).unwrap();
        let mut s = s0.clone();
        s.apply(&Gate::PlusX(1)).unwrap();
        s.apply(&Gate::MinusX(1)).unwrap();
        for (a, b) in s.amplitudes().iter().zip(s0.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn rzz_on_zero_state_is_full_angle_phase() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&Gate::Rzz {
            a: 0,
            b: 1,
            angle: PI / 4.0,
        })
        .unwrap();
        assert!(close(s.amplitudes()[0], Complex64::from_polar(1.0, -PI / 4.0)));
    }

    #[test]
    fn gate_argument_errors() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(s.apply(&Gate::H(2)).is_err());
        assert!(s.apply(&Gate::Cnot { control: 1, target: 1 }).is_err());
        assert!(s
            .apply(&Gate::Rzz {
                a: 0,
                b: 0,
                angle: 0.1
            })
            .is_err());
    }

    #[test]
    fn cnot_and_cry_act_only_when_control_set() {
        let mut s = StateVector::basis(2, &[0, 0]).unwrap();
        s.apply(&Gate::Cnot { control: 0, target: 1 }).unwrap();
        assert_eq!(s.amplitudes()[0], ONE);
        let mut s = StateVector::basis(2, &[1, 0]).unwrap();
        s.apply(&Gate::Cnot { control: 0, target: 1 }).unwrap();
        assert_eq!(s.amplitudes()[3], ONE);
        s.apply(&Gate::Cry {
            control: 0,
            target: 1,
            angle: PI,
        })
        .unwrap();
        // RY(π)|1⟩ = −|0⟩
        assert!(close(s.amplitudes()[1], -ONE));
    }

    #[test]
    fn z_expectation_on_zero_is_one() {
        let s = StateVector::zero(1).unwrap();
        let op = PauliSum::new(vec![PauliTerm::new(1.0, [(0, Pauli::Z)]).unwrap()], 0.0);
        assert!((s.expectation(&op).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_rejects_out_of_range_term() {
        let s = StateVector::zero(1).unwrap();
        let op = PauliSum::new(vec![PauliTerm::new(1.0, [(3, Pauli::Z)]).unwrap()], 0.0);
        assert!(s.expectation(&op).is_err());
    }

    #[test]
    fn y_masks_give_correct_action() {
        // Y|0⟩ = i|1⟩, so ⟨+i|Y|+i⟩ = 1 where |+i⟩ = (|0⟩ + i|1⟩)/√2.
        let r = FRAC_1_SQRT_2;
        let s = StateVector::from_amplitudes(vec![Complex64::new(r, 0.0), Complex64::new(0.0, r)])
            .unwrap();
        let y = PauliTerm::new(1.0, [(0, Pauli::Y)]).unwrap();
        assert!(close(s.pauli_expectation(&y).unwrap(), ONE));
    }

    #[test]
    fn pauli_term_rejects_repeated_qubit() {
        assert!(PauliTerm::new(1.0, [(1, Pauli::X), (1, Pauli::Z)]).is_err());
    }

    #[test]
    fn sampling_deterministic_state() {
        let s = StateVector::zero(1).unwrap();
        let shots = s.sample_bitstrings(100, 7).unwrap();
        assert_eq!(shots.len(), 100);
        assert!(shots.iter().all(|b| b == &[0]));
        assert!(s.sample_indices(0, 1).is_err());
    }

    #[test]
    fn sampling_bell_state_matches_born_rule() {
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let s = StateVector::from_amplitudes(vec![r, ZERO, ZERO, r]).unwrap();
        let idx = s.sample_indices(10_000, 11).unwrap();
        let frac = idx.iter().filter(|&&i| i == 3).count() as f64 / 1e4;
        assert!((frac - 0.5).abs() < 0.05, "{frac}");
        assert!(idx.iter().all(|&i| i == 0 || i == 3));
        assert_eq!(idx, s.sample_indices(10_000, 11).unwrap());
    }
}
