//! Flat gate-list circuits: counting, greedy depth, JSON and OpenQASM 2.0 export.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod qasm;

pub use qasm::{parse_qasm, to_qasm, QasmGate, QasmProgram};

/// Gate set used by the annealing and preparation circuits.
///
/// `PlusX`/`MinusX` are `(1/√2)[[1, ±i], [±i, 1]]`; `Rz(θ) = e^{-iθZ/2}`;
/// `Rzz(θ) = e^{-iθ Z⊗Z}` (full angle); `Cry(θ)` applies `RY(θ)` to the
/// target when the control is 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "GateRecord", try_from = "GateRecord")]
pub enum Gate {
    H(usize),
    PlusX(usize),
    MinusX(usize),
    Rz { qubit: usize, angle: f64 },
    Rzz { a: usize, b: usize, angle: f64 },
    X(usize),
    Cnot { control: usize, target: usize },
    Cry { control: usize, target: usize, angle: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    PlusX,
    MinusX,
    #[serde(rename = "RZ")]
    Rz,
    #[serde(rename = "RZZ")]
    Rzz,
    X,
    #[serde(rename = "CNOT")]
    Cnot,
    #[serde(rename = "CRY")]
    Cry,
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::PlusX(_) => GateKind::PlusX,
            Gate::MinusX(_) => GateKind::MinusX,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::Rzz { .. } => GateKind::Rzz,
            Gate::X(_) => GateKind::X,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Cry { .. } => GateKind::Cry,
        }
    }

    /// First qubit and, for two-qubit gates, the second (target) qubit.
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::PlusX(q) | Gate::MinusX(q) | Gate::X(q) => (q, None),
            Gate::Rz { qubit, .. } => (qubit, None),
            Gate::Rzz { a, b, .. } => (a, Some(b)),
            Gate::Cnot { control, target } | Gate::Cry { control, target, .. } => {
                (control, Some(target))
            }
        }
    }

    pub fn arity(&self) -> usize {
        if self.qubits().1.is_some() {
            2
        } else {
            1
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rz { angle, .. } | Gate::Rzz { angle, .. } | Gate::Cry { angle, .. } => {
                Some(angle)
            }
            _ => None,
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::PlusX(q) => Gate::MinusX(q),
            Gate::MinusX(q) => Gate::PlusX(q),
            Gate::Rz { qubit, angle } => Gate::Rz {
                qubit,
                angle: -angle,
            },
            Gate::Rzz { a, b, angle } => Gate::Rzz { a, b, angle: -angle },
            Gate::Cry {
                control,
                target,
                angle,
            } => Gate::Cry {
                control,
                target,
                angle: -angle,
            },
            g => g,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let (a, b) = self.qubits();
        for q in std::iter::once(a).chain(b) {
            if q >= n_qubits {
                return Err(Error::arg(format!(
                    "{:?} uses qubit {q} in a {n_qubits}-qubit circuit",
                    self.kind()
                )));
            }
        }
        if b == Some(a) {
            return Err(Error::arg(format!("{:?} acts twice on qubit {a}", self.kind())));
        }
        if let Some(angle) = self.angle() {
            if !angle.is_finite() {
                return Err(Error::arg("gate angle must be finite"));
            }
        }
        Ok(())
    }
}

/// Serialized form of a gate: `{"kind": "RZZ", "qubits": [0, 1], "angle": 0.1}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateRecord {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl From<Gate> for GateRecord {
    fn from(g: Gate) -> Self {
        let (a, b) = g.qubits();
        GateRecord {
            kind: g.kind(),
            qubits: std::iter::once(a).chain(b).collect(),
            angle: g.angle(),
        }
    }
}

impl TryFrom<GateRecord> for Gate {
    type Error = Error;

    fn try_from(r: GateRecord) -> Result<Self> {
        let one = |r: &GateRecord| match r.qubits.as_slice() {
            [q] => Ok(*q),
            _ => Err(Error::arg(format!("{:?} takes one qubit", r.kind))),
        };
        let two = |r: &GateRecord| match r.qubits.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::arg(format!("{:?} takes two qubits", r.kind))),
        };
        let angle = |r: &GateRecord| {
            r.angle
                .ok_or_else(|| Error::arg(format!("{:?} needs an angle", r.kind)))
        };
        Ok(match r.kind {
            GateKind::H => Gate::H(one(&r)?),
            GateKind::PlusX => Gate::PlusX(one(&r)?),
            GateKind::MinusX => Gate::MinusX(one(&r)?),
            GateKind::X => Gate::X(one(&r)?),
            GateKind::Rz => Gate::Rz {
                qubit: one(&r)?,
                angle: angle(&r)?,
            },
            GateKind::Rzz => {
                let (a, b) = two(&r)?;
                Gate::Rzz {
                    a,
                    b,
                    angle: angle(&r)?,
                }
            }
            GateKind::Cnot => {
                let (control, target) = two(&r)?;
                Gate::Cnot { control, target }
            }
            GateKind::Cry => {
                let (control, target) = two(&r)?;
                Gate::Cry {
                    control,
                    target,
                    angle: angle(&r)?,
                }
            }
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub one_qubit: usize,
    pub two_qubit: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.one_qubit + self.two_qubit
    }

    fn tally<'a>(gates: impl IntoIterator<Item = &'a Gate>) -> Self {
        gates.into_iter().fold(GateCounts::default(), |mut c, g| {
            if g.arity() == 1 {
                c.one_qubit += 1;
            } else {
                c.two_qubit += 1;
            }
            c
        })
    }
}

impl Add for GateCounts {
    type Output = GateCounts;

    fn add(self, rhs: Self) -> Self {
        GateCounts {
            one_qubit: self.one_qubit + rhs.one_qubit,
            two_qubit: self.two_qubit + rhs.two_qubit,
        }
    }
}

impl AddAssign for GateCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// What a contiguous run of gates implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// Initial-state preparation.
    Prep,
    /// Product-formula step `n` (1-based).
    Step(usize),
    /// Leading half-step of the first hopping group when steps are merged.
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    label: String,
    gates: Vec<Gate>,
    #[serde(default)]
    segments: Vec<Segment>,
}

impl Circuit {
    pub fn new(n_qubits: usize, label: impl Into<String>) -> Self {
        Circuit {
            n_qubits,
            label: label.into(),
            gates: Vec::new(),
            segments: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Append gates pushed by `build` and tag them as one segment.
    pub fn segment<F>(&mut self, kind: SegmentKind, build: F) -> Result<()>
    where
        F: FnOnce(&mut Circuit) -> Result<()>,
    {
        let start = self.gates.len();
        build(self)?;
        let end = self.gates.len();
        self.segments.push(Segment { kind, start, end });
        Ok(())
    }

    /// Concatenate `other` after `self`, keeping its segment tags.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::arg("appended circuit is wider than the target"));
        }
        let offset = self.gates.len();
        self.gates.extend_from_slice(&other.gates);
        self.segments.extend(other.segments.iter().map(|s| Segment {
            kind: s.kind,
            start: s.start + offset,
            end: s.end + offset,
        }));
        Ok(())
    }

    pub fn count_gates(&self) -> GateCounts {
        GateCounts::tally(&self.gates)
    }

    /// Gate counts restricted to segments matching `pred`.
    pub fn count_segments(&self, pred: impl Fn(SegmentKind) -> bool) -> GateCounts {
        self.segments
            .iter()
            .filter(|s| pred(s.kind))
            .map(|s| GateCounts::tally(&self.gates[s.start..s.end]))
            .fold(GateCounts::default(), Add::add)
    }

    /// Gates attributed to product-formula steps.
    pub fn trotter_counts(&self) -> GateCounts {
        self.count_segments(|k| matches!(k, SegmentKind::Step(_)))
    }

    pub fn prep_counts(&self) -> GateCounts {
        self.count_segments(|k| k == SegmentKind::Prep)
    }

    pub fn boundary_counts(&self) -> GateCounts {
        self.count_segments(|k| k == SegmentKind::Boundary)
    }

    pub fn step_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s.kind, SegmentKind::Step(_)))
            .count()
    }

    /// Number of layers in the as-soon-as-possible schedule where gates that
    /// share a qubit cannot share a layer.
    pub fn depth(&self) -> usize {
        let mut frontier = vec![0usize; self.n_qubits];
        let mut depth = 0;
        for g in &self.gates {
            let layer = match g.qubits() {
                (a, None) => frontier[a] + 1,
                (a, Some(b)) => frontier[a].max(frontier[b]) + 1,
            };
            let (a, b) = g.qubits();
            frontier[a] = layer;
            if let Some(b) = b {
                frontier[b] = layer;
            }
            depth = depth.max(layer);
        }
        depth
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialization is infallible")
    }

    pub fn to_qasm(&self) -> String {
        to_qasm(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_gate(n: usize) -> impl Strategy<Value = Gate> {
        let q = 0..n;
        let pair = (0..n, 0..n - 1).prop_map(|(a, b)| (a, if b >= a { b + 1 } else { b }));
        let angle = -3.0f64..3.0;
        prop_oneof![
            q.clone().prop_map(Gate::H),
            q.clone().prop_map(Gate::PlusX),
            q.clone().prop_map(Gate::X),
            (q, angle.clone()).prop_map(|(qubit, angle)| Gate::Rz { qubit, angle }),
            (pair.clone(), angle.clone()).prop_map(|((a, b), angle)| Gate::Rzz { a, b, angle }),
            pair.clone().prop_map(|(control, target)| Gate::Cnot { control, target }),
            (pair, angle).prop_map(|((control, target), angle)| Gate::Cry {
                control,
                target,
                angle
            }),
        ]
    }

    fn circuit_from(n: usize, gates: Vec<Gate>) -> Circuit {
        let mut c = Circuit::new(n, "random");
        for g in gates {
            c.push(g).unwrap();
        }
        c
    }

    #[test]
    fn empty_circuit_counts_and_depth() {
        let c = Circuit::new(3, "empty");
        assert_eq!(c.count_gates(), GateCounts::default());
        assert_eq!(c.depth(), 0);
    }

    #[test]
    fn parallel_hadamards_have_depth_one() {
        let c = circuit_from(5, (0..5).map(Gate::H).collect());
        assert_eq!(c.depth(), 1);
        assert_eq!(c.count_gates().one_qubit, 5);
    }

    #[test]
    fn push_validates_qubits() {
        let mut c = Circuit::new(2, "x");
        assert!(c.push(Gate::H(2)).is_err());
        assert!(c.push(Gate::Cnot { control: 0, target: 0 }).is_err());
        assert!(c
            .push(Gate::Rz {
                qubit: 0,
                angle: f64::NAN
            })
            .is_err());
    }

    #[test]
    fn json_dump_uses_kind_qubits_angle() {
        let c = circuit_from(
            2,
            vec![
                Gate::H(0),
                Gate::Rzz {
                    a: 0,
                    b: 1,
                    angle: 0.5,
                },
            ],
        );
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(v["gates"][0]["kind"], "H");
        assert_eq!(v["gates"][1]["kind"], "RZZ");
        assert_eq!(v["gates"][1]["qubits"], serde_json::json!([0, 1]));
        assert_eq!(v["gates"][1]["angle"], 0.5);
        let back: Circuit = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #[test]
        fn counts_and_depth_compose(
            a in prop::collection::vec(arb_gate(5), 0..40),
            b in prop::collection::vec(arb_gate(5), 0..40),
        ) {
            let ca = circuit_from(5, a);
            let cb = circuit_from(5, b);
            let mut ab = ca.clone();
            ab.append(&cb).unwrap();
            prop_assert_eq!(ab.count_gates(), ca.count_gates() + cb.count_gates());
            prop_assert!(ab.depth() <= ca.depth() + cb.depth());
            prop_assert!(ab.depth() >= ca.depth().max(cb.depth()));
        }
    }
}
