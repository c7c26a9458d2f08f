//! OpenQASM 2.0 text export, plus a reader for the subset the exporter emits.
//!
//! Lowering: `RZZ(θ)` becomes `cx a,b; rz(2θ) b; cx a,b;`, `±X` becomes
//! `rx(∓π/2)`, and `CRY(θ)` becomes the controlled-RY `cu3(θ,0,0)`. Only
//! gates from the original `qelib1.inc` are used.

use std::f64::consts::PI;
use std::fmt::Write;

use num_complex::Complex64;

use super::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::simcore::{Matrix2, StateVector};

pub fn to_qasm(circuit: &Circuit) -> String {
    let mut out = String::new();
    out.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    if !circuit.label().is_empty() {
        for line in circuit.label().lines() {
            let _ = writeln!(out, "// {line}");
        }
    }
    let _ = writeln!(out, "qreg q[{}];", circuit.n_qubits());
    for gate in circuit.gates() {
        write_gate(&mut out, gate);
    }
    out
}

fn write_gate(out: &mut String, gate: &Gate) {
    let _ = match *gate {
        Gate::H(q) => writeln!(out, "h q[{q}];"),
        Gate::PlusX(q) => writeln!(out, "rx(-pi/2) q[{q}];"),
        Gate::MinusX(q) => writeln!(out, "rx(pi/2) q[{q}];"),
        Gate::X(q) => writeln!(out, "x q[{q}];"),
        Gate::Rz { qubit, angle } => writeln!(out, "rz({angle:?}) q[{qubit}];"),
        Gate::Rzz { a, b, angle } => writeln!(
            out,
            "cx q[{a}],q[{b}];\nrz({:?}) q[{b}];\ncx q[{a}],q[{b}];",
            2.0 * angle
        ),
        Gate::Cnot { control, target } => writeln!(out, "cx q[{control}],q[{target}];"),
        Gate::Cry {
            control,
            target,
            angle,
        } => writeln!(out, "cu3({angle:?},0,0) q[{control}],q[{target}];"),
    };
}

/// One parsed gate application.
#[derive(Clone, Debug, PartialEq)]
pub struct QasmGate {
    pub name: String,
    pub params: Vec<f64>,
    pub qubits: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QasmProgram {
    pub n_qubits: usize,
    pub gates: Vec<QasmGate>,
}

impl QasmProgram {
    /// Run the program from `|0…0⟩`.
    pub fn simulate(&self) -> Result<StateVector> {
        let mut state = StateVector::zero(self.n_qubits)?;
        self.apply_to(&mut state)?;
        Ok(state)
    }

    pub fn apply_to(&self, state: &mut StateVector) -> Result<()> {
        self.gates.iter().try_for_each(|g| g.apply_to(state))
    }
}

impl QasmGate {
    fn expect(&self, n_params: usize, n_qubits: usize) -> Result<()> {
        if self.params.len() != n_params || self.qubits.len() != n_qubits {
            return Err(Error::Qasm(format!(
                "`{}` takes {n_params} parameters and {n_qubits} qubits",
                self.name
            )));
        }
        Ok(())
    }

    /// Apply using the `qelib1.inc` definitions of each gate.
    pub fn apply_to(&self, state: &mut StateVector) -> Result<()> {
        let p = &self.params;
        match self.name.as_str() {
            "h" => {
                self.expect(0, 1)?;
                let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                state.apply_matrix1(self.qubits[0], &[[r, r], [r, -r]])
            }
            "x" => {
                self.expect(0, 1)?;
                state.apply_matrix1(self.qubits[0], &u3(PI, 0.0, PI))
            }
            "rx" => {
                self.expect(1, 1)?;
                state.apply_matrix1(self.qubits[0], &u3(p[0], -PI / 2.0, PI / 2.0))
            }
            "ry" => {
                self.expect(1, 1)?;
                state.apply_matrix1(self.qubits[0], &u3(p[0], 0.0, 0.0))
            }
            "rz" | "u1" => {
                self.expect(1, 1)?;
                state.apply_matrix1(self.qubits[0], &u3(0.0, 0.0, p[0]))
            }
            "u3" => {
                self.expect(3, 1)?;
                state.apply_matrix1(self.qubits[0], &u3(p[0], p[1], p[2]))
            }
            "cx" => {
                self.expect(0, 2)?;
                state.apply_controlled1(self.qubits[0], self.qubits[1], &u3(PI, 0.0, PI))
            }
            "cu3" => {
                self.expect(3, 2)?;
                state.apply_controlled1(self.qubits[0], self.qubits[1], &u3(p[0], p[1], p[2]))
            }
            other => Err(Error::Qasm(format!("unsupported gate `{other}`"))),
        }
    }
}

/// OpenQASM 2.0 `U(θ,φ,λ)`.
fn u3(theta: f64, phi: f64, lambda: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let e = |x: f64| Complex64::from_polar(1.0, x);
    [
        [Complex64::new(c, 0.0), -e(lambda) * s],
        [e(phi) * s, e(phi + lambda) * c],
    ]
}

/// Parse the flat OpenQASM 2.0 subset written by [`to_qasm`]: a single `qreg`
/// and gate applications with constant-expression parameters.
pub fn parse_qasm(text: &str) -> Result<QasmProgram> {
    let mut stripped = String::with_capacity(text.len());
    for line in text.lines() {
        stripped.push_str(line.split("//").next().unwrap_or(""));
        stripped.push('\n');
    }
    let mut n_qubits = None;
    let mut reg_name = String::new();
    let mut gates = Vec::new();
    let mut saw_header = false;
    for raw in stripped.split(';') {
        let stmt = raw.trim();
        if stmt.is_empty() {
            continue;
        }
        if let Some(version) = stmt.strip_prefix("OPENQASM") {
            if version.trim() != "2.0" {
                return Err(Error::Qasm(format!("unsupported version `{}`", version.trim())));
            }
            saw_header = true;
            continue;
        }
        if !saw_header {
            return Err(Error::Qasm("missing OPENQASM 2.0 header".into()));
        }
        if stmt.starts_with("include") || stmt.starts_with("creg") || stmt.starts_with("barrier")
        {
            continue;
        }
        if let Some(decl) = stmt.strip_prefix("qreg") {
            let (name, size) = parse_indexed(decl.trim())?;
            if n_qubits.is_some() {
                return Err(Error::Qasm("only one qreg is supported".into()));
            }
            n_qubits = Some(size);
            reg_name = name;
            continue;
        }
        let n = n_qubits.ok_or_else(|| Error::Qasm("gate before qreg".into()))?;
        gates.push(parse_gate(stmt, &reg_name, n)?);
    }
    Ok(QasmProgram {
        n_qubits: n_qubits.ok_or_else(|| Error::Qasm("no qreg declared".into()))?,
        gates,
    })
}

fn parse_indexed(s: &str) -> Result<(String, usize)> {
    let open = s.find('[').ok_or_else(|| Error::Qasm(format!("expected `name[i]`, got `{s}`")))?;
    let close = s.rfind(']').ok_or_else(|| Error::Qasm(format!("unclosed `[` in `{s}`")))?;
    let index = s[open + 1..close]
        .trim()
        .parse()
        .map_err(|_| Error::Qasm(format!("bad index in `{s}`")))?;
    Ok((s[..open].trim().to_string(), index))
}

fn parse_gate(stmt: &str, reg: &str, n_qubits: usize) -> Result<QasmGate> {
    let (head, args) = match stmt.find(')') {
        Some(close) => (&stmt[..=close], &stmt[close + 1..]),
        None => {
            let split = stmt
                .find(char::is_whitespace)
                .ok_or_else(|| Error::Qasm(format!("no operands in `{stmt}`")))?;
            (&stmt[..split], &stmt[split..])
        }
    };
    let (name, params) = match head.find('(') {
        Some(open) => {
            let inner = &head[open + 1..head.len() - 1];
            let params = inner
                .split(',')
                .map(|e| eval_expr(e.trim()))
                .collect::<Result<Vec<_>>>()?;
            (head[..open].trim().to_string(), params)
        }
        None => (head.trim().to_string(), Vec::new()),
    };
    let qubits = args
        .split(',')
        .map(|a| {
            let (r, i) = parse_indexed(a.trim())?;
            if r != reg {
                return Err(Error::Qasm(format!("unknown register `{r}`")));
            }
            if i >= n_qubits {
                return Err(Error::Qasm(format!("qubit {i} out of range")));
            }
            Ok(i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QasmGate {
        name,
        params,
        qubits,
    })
}

/// Constant expressions over numbers, `pi`, `+ - * /`, unary minus and parentheses.
fn eval_expr(src: &str) -> Result<f64> {
    let tokens: Vec<char> = src.chars().filter(|c| !c.is_whitespace()).collect();
    let mut pos = 0;
    let v = expr(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(Error::Qasm(format!("trailing input in `{src}`")));
    }
    Ok(v)
}

fn expr(t: &[char], pos: &mut usize) -> Result<f64> {
    let mut v = term(t, pos)?;
    while let Some(&op) = t.get(*pos) {
        if op != '+' && op != '-' {
            break;
        }
        *pos += 1;
        let rhs = term(t, pos)?;
        v = if op == '+' { v + rhs } else { v - rhs };
    }
    Ok(v)
}

fn term(t: &[char], pos: &mut usize) -> Result<f64> {
    let mut v = factor(t, pos)?;
    while let Some(&op) = t.get(*pos) {
        if op != '*' && op != '/' {
            break;
        }
        *pos += 1;
        let rhs = factor(t, pos)?;
        v = if op == '*' { v * rhs } else { v / rhs };
    }
    Ok(v)
}

fn factor(t: &[char], pos: &mut usize) -> Result<f64> {
    match t.get(*pos) {
        Some('-') => {
            *pos += 1;
            Ok(-factor(t, pos)?)
        }
        Some('+') => {
            *pos += 1;
            factor(t, pos)
        }
        Some('(') => {
            *pos += 1;
            let v = expr(t, pos)?;
            if t.get(*pos) != Some(&')') {
                return Err(Error::Qasm("unbalanced parentheses".into()));
            }
            *pos += 1;
            Ok(v)
        }
        Some('p') => {
            if t.get(*pos..*pos + 2) == Some(&['p', 'i']) {
                *pos += 2;
                Ok(PI)
            } else {
                Err(Error::Qasm("unknown identifier in expression".into()))
            }
        }
        Some(c) if c.is_ascii_digit() || *c == '.' => {
            let start = *pos;
            while let Some(&c) = t.get(*pos) {
                let exp_sign = (c == '-' || c == '+') && matches!(t.get(*pos - 1), Some('e' | 'E'));
                if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                    *pos += 1;
                } else {
                    break;
                }
            }
            let s: String = t[start..*pos].iter().collect();
            s.parse()
                .map_err(|_| Error::Qasm(format!("bad number `{s}`")))
        }
        _ => Err(Error::Qasm("unexpected end of expression".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(g: Gate, n: usize) -> Circuit {
        let mut c = Circuit::new(n, "");
        c.push(g).unwrap();
        c
    }

    #[test]
    fn hadamard_line() {
        let text = to_qasm(&single(Gate::H(0), 1));
        assert!(text.lines().any(|l| l == "h q[0];"));
        assert!(text.starts_with("OPENQASM 2.0;"));
    }

    #[test]
    fn rzz_lowers_to_three_lines() {
        let text = to_qasm(&single(
            Gate::Rzz {
                a: 0,
                b: 1,
                angle: 0.3,
            },
            2,
        ));
        let body: Vec<_> = text.lines().skip(3).collect();
        assert_eq!(body, ["cx q[0],q[1];", "rz(0.6) q[1];", "cx q[0],q[1];"]);
    }

    #[test]
    fn expressions() {
        assert!((eval_expr("-pi/2").unwrap() + PI / 2.0).abs() < 1e-15);
        assert_eq!(eval_expr("2*(1+3)").unwrap(), 8.0);
        assert_eq!(eval_expr("1.5e-3").unwrap(), 1.5e-3);
        assert_eq!(eval_expr("-1e+2").unwrap(), -100.0);
        assert!(eval_expr("2*").is_err());
        assert!(eval_expr("foo").is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_qasm("qreg q[2];").is_err());
        assert!(parse_qasm("OPENQASM 2.0;\nh q[0];").is_err());
        assert!(parse_qasm("OPENQASM 2.0;\nqreg q[1];\nh q[3];").is_err());
        assert!(parse_qasm("OPENQASM 2.0;\nqreg q[1];\nfoo q[0];")
            .unwrap()
            .simulate()
            .is_err());
    }

    #[test]
    fn angles_round_trip_exactly() {
        let angle = -0.012_345_678_901_234_567;
        let c = single(Gate::Rz { qubit: 0, angle }, 1);
        let p = parse_qasm(&to_qasm(&c)).unwrap();
        assert_eq!(p.gates[0].params[0], angle);
    }
}
