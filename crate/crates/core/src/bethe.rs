//! Open-boundary Bethe-ansatz equations for the Hubbard chain and their
//! ground-state root set.
//!
//! Unknowns are the charge momenta `k_1 < … < k_N` and spin rapidities
//! `λ_1 < … < λ_{N↓}`. With `φ(x) = −2 arctan(2xt/U)` the residuals are
//!
//! ```text
//! R_j = 2k_j(L+1) − 2πj − Σ_b Σ_r φ(2 sin k_j + 2bλ_r)
//! S_r = Σ_b Σ_l φ(2b sin k_l + 2λ_r) + 2πr − Σ_b Σ_{s≠r} φ(λ_r + bλ_s)
//! ```
//!
//! with `b = ±1`, and the energy is `−2t Σ cos k_j`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::hamiltonian::HubbardParams;
use crate::stateprep;

pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 60;
const MAX_SUBDIVISIONS: u32 = 24;

/// `φ(x) = −2 arctan(c x)` with `c = 2t/U`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseFunction {
    c: f64,
}

impl PhaseFunction {
    pub fn new(t: f64, u: f64) -> Result<Self> {
        if !(u > 0.0) || !u.is_finite() || !t.is_finite() {
            return Err(Error::arg(format!(
                "phase function needs finite t and U > 0, got t = {t}, U = {u}"
            )));
        }
        Ok(PhaseFunction { c: 2.0 * t / u })
    }

    pub fn value(&self, x: f64) -> f64 {
        -2.0 * (self.c * x).atan()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let y = self.c * x;
        -2.0 * self.c / (1.0 + y * y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetheRoots {
    pub k: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl BetheRoots {
    fn pack(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.k.len() + self.lambda.len(),
            self.k.iter().chain(&self.lambda).copied(),
        )
    }

    fn unpack(x: &DVector<f64>, n: usize) -> Self {
        BetheRoots {
            k: x.as_slice()[..n].to_vec(),
            lambda: x.as_slice()[n..].to_vec(),
        }
    }

    /// Strict ordering with every `k` inside `(0, π)`.
    pub fn is_ordered(&self) -> bool {
        self.k.iter().all(|&k| k > 0.0 && k < PI)
            && self.k.windows(2).all(|w| w[0] < w[1])
            && self.lambda.windows(2).all(|w| w[0] < w[1])
            && self.k.iter().chain(&self.lambda).all(|x| x.is_finite())
    }
}

fn check_sizes(roots: &BetheRoots, params: &HubbardParams) -> Result<()> {
    params.validate()?;
    if roots.k.len() != params.n_particles() || roots.lambda.len() != params.n_down {
        return Err(Error::arg(format!(
            "expected {} momenta and {} rapidities, got {} and {}",
            params.n_particles(),
            params.n_down,
            roots.k.len(),
            roots.lambda.len()
        )));
    }
    Ok(())
}

/// `[R_1 … R_N, S_1 … S_{N↓}]`.
pub fn residual(roots: &BetheRoots, params: &HubbardParams) -> Result<Vec<f64>> {
    check_sizes(roots, params)?;
    let phi = PhaseFunction::new(params.t, params.u)?;
    Ok(residual_with(&phi, roots, params.l))
}

fn residual_with(phi: &PhaseFunction, roots: &BetheRoots, l: usize) -> Vec<f64> {
    let (k, lam) = (&roots.k, &roots.lambda);
    let mut out = Vec::with_capacity(k.len() + lam.len());
    for (j, &kj) in k.iter().enumerate() {
        let sk = 2.0 * kj.sin();
        let sum: f64 = lam
            .iter()
            .map(|&lr| phi.value(sk + 2.0 * lr) + phi.value(sk - 2.0 * lr))
            .sum();
        out.push(2.0 * kj * (l + 1) as f64 - 2.0 * PI * (j + 1) as f64 - sum);
    }
    for (r, &lr) in lam.iter().enumerate() {
        let charge: f64 = k
            .iter()
            .map(|&kl| {
                let sk = 2.0 * kl.sin();
                phi.value(sk + 2.0 * lr) + phi.value(-sk + 2.0 * lr)
            })
            .sum();
        let spin: f64 = lam
            .iter()
            .enumerate()
            .filter(|&(s, _)| s != r)
            .map(|(_, &ls)| phi.value(lr + ls) + phi.value(lr - ls))
            .sum();
        out.push(charge + 2.0 * PI * (r + 1) as f64 - spin);
    }
    out
}

/// Analytic Jacobian of [`residual`] with respect to `(k, λ)`.
pub fn jacobian(roots: &BetheRoots, params: &HubbardParams) -> Result<DMatrix<f64>> {
    check_sizes(roots, params)?;
    let phi = PhaseFunction::new(params.t, params.u)?;
    Ok(jacobian_with(&phi, roots, params.l))
}

fn jacobian_with(phi: &PhaseFunction, roots: &BetheRoots, l: usize) -> DMatrix<f64> {
    let (k, lam) = (&roots.k, &roots.lambda);
    let n = k.len();
    let m = n + lam.len();
    let mut jac = DMatrix::zeros(m, m);
    for (j, &kj) in k.iter().enumerate() {
        let (s, c) = kj.sin_cos();
        let mut diag = 2.0 * (l + 1) as f64;
        for (r, &lr) in lam.iter().enumerate() {
            let dp = phi.derivative(2.0 * s + 2.0 * lr);
            let dm = phi.derivative(2.0 * s - 2.0 * lr);
            diag -= (dp + dm) * 2.0 * c;
            jac[(j, n + r)] = -(dp - dm) * 2.0;
        }
        jac[(j, j)] = diag;
    }
    for (r, &lr) in lam.iter().enumerate() {
        let row = n + r;
        let mut diag = 0.0;
        for (l_idx, &kl) in k.iter().enumerate() {
            let (s, c) = kl.sin_cos();
            let dp = phi.derivative(2.0 * s + 2.0 * lr);
            let dm = phi.derivative(-2.0 * s + 2.0 * lr);
            jac[(row, l_idx)] = (dp - dm) * 2.0 * c;
            diag += (dp + dm) * 2.0;
        }
        for (s_idx, &ls) in lam.iter().enumerate() {
            if s_idx == r {
                continue;
            }
            let dp = phi.derivative(lr + ls);
            let dm = phi.derivative(lr - ls);
            diag -= dp + dm;
            jac[(row, n + s_idx)] = -(dp - dm);
        }
        jac[(row, row)] = diag;
    }
    jac
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton at fixed `U` from `start`.
fn newton(params: &HubbardParams, start: BetheRoots) -> Result<BetheRoots> {
    let phi = PhaseFunction::new(params.t, params.u)?;
    let n = start.k.len();
    let mut x = start.pack();
    let mut roots = start;
    let mut f = residual_with(&phi, &roots, params.l);
    for _ in 0..MAX_ITERATIONS {
        if inf_norm(&f) < RESIDUAL_TOL {
            return Ok(roots);
        }
        let jac = jacobian_with(&phi, &roots, params.l);
        let rhs = -DVector::from_column_slice(&f);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Solver("singular Bethe Jacobian".into()))?;
        let current = two_norm(&f);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial_x = &x + &step * alpha;
            let trial = BetheRoots::unpack(&trial_x, n);
            if trial.is_ordered() {
                let trial_f = residual_with(&phi, &trial, params.l);
                if two_norm(&trial_f) < current {
                    x = trial_x;
                    roots = trial;
                    f = trial_f;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if inf_norm(&f) < RESIDUAL_TOL {
        return Ok(roots);
    }
    Err(Error::NonConvergence {
        context: format!("Bethe Newton at L = {}, U = {}", params.l, params.u),
        residual: inf_norm(&f),
    })
}

/// Free momenta and the rapidities solving the spin equations with `k` frozen,
/// one rapidity at a time by bisection.
fn decoupled_start(params: &HubbardParams) -> Result<BetheRoots> {
    let phi = PhaseFunction::new(params.t, params.u)?;
    let n = params.n_particles();
    let k: Vec<f64> = (1..=n).map(|j| j as f64 * PI / (params.l + 1) as f64).collect();
    let mut lambda: Vec<f64> = (1..=params.n_down).map(|r| r as f64 * params.u).collect();
    let spin_eq = |lam: &[f64], r: usize, x: f64| -> f64 {
        let charge: f64 = k
            .iter()
            .map(|&kl| {
                let sk = 2.0 * kl.sin();
                phi.value(sk + 2.0 * x) + phi.value(-sk + 2.0 * x)
            })
            .sum();
        let spin: f64 = lam
            .iter()
            .enumerate()
            .filter(|&(s, _)| s != r)
            .map(|(_, &ls)| phi.value(x + ls) + phi.value(x - ls))
            .sum();
        charge + 2.0 * PI * (r + 1) as f64 - spin
    };
    for _sweep in 0..200 {
        let mut change = 0.0f64;
        for r in 0..lambda.len() {
            let mut span = params.u.max(1.0);
            while !(spin_eq(&lambda, r, -span) > 0.0 && spin_eq(&lambda, r, span) < 0.0) {
                span *= 2.0;
                if span > 1e12 {
                    return Err(Error::Solver("cannot bracket a spin rapidity".into()));
                }
            }
            let (mut lo, mut hi) = (-span, span);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if spin_eq(&lambda, r, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 * span {
                    break;
                }
            }
            let new = 0.5 * (lo + hi);
            change = change.max((new - lambda[r]).abs());
            lambda[r] = new;
        }
        if change < 1e-12 * params.u.max(1.0) {
            break;
        }
    }
    lambda.sort_by(f64::total_cmp);
    Ok(BetheRoots { k, lambda })
}

/// Solve at `params.u` starting from a converged solution at `from_u`,
/// subdividing the `U` step when Newton fails.
fn continue_to(params: &HubbardParams, from_u: f64, roots: &BetheRoots, depth: u32) -> Result<BetheRoots> {
    let target = params.u;
    let scale = target / from_u;
    let scaled = BetheRoots {
        k: roots.k.clone(),
        lambda: roots.lambda.iter().map(|l| l * scale).collect(),
    };
    let phi = PhaseFunction::new(params.t, target)?;
    let pick = if two_norm(&residual_with(&phi, &scaled, params.l))
        < two_norm(&residual_with(&phi, roots, params.l))
    {
        scaled
    } else {
        roots.clone()
    };
    match newton(params, pick) {
        Ok(r) => Ok(r),
        Err(e) if depth >= MAX_SUBDIVISIONS => Err(e),
        Err(_) => {
            let mid = (from_u * target).sqrt();
            let half = continue_to(&params.with_u(mid), from_u, roots, depth + 1)?;
            continue_to(params, mid, &half, depth + 1)
        }
    }
}

/// Ground-state roots by homotopy in `U`: start where the equations nearly
/// decouple and halve `U` per stage down to the target.
pub fn solve_ground_state(params: &HubbardParams) -> Result<BetheRoots> {
    params.validate()?;
    PhaseFunction::new(params.t, params.u)?;
    if params.n_up < params.n_down {
        return Err(Error::arg("expected N↑ ≥ N↓"));
    }
    let target = params.u;
    let n = params.n_particles().max(1) as f64;
    let mut u = target;
    while u < 64.0 * params.t.abs() * n {
        u *= 2.0;
    }
    let start_params = params.with_u(u);
    let mut roots = newton(&start_params, decoupled_start(&start_params)?)?;
    while u > target {
        let next = (u / 2.0).max(target);
        let next = if next / target < 1.0 + 1e-12 { target } else { next };
        roots = continue_to(&params.with_u(next), u, &roots, 0)?;
        u = next;
    }
    if !roots.is_ordered() {
        return Err(Error::Solver("root ordering violated".into()));
    }
    Ok(roots)
}

/// `−2t Σ cos k_j`.
pub fn ground_energy(roots: &BetheRoots, params: &HubbardParams) -> f64 {
    -2.0 * params.t * roots.k.iter().map(|k| k.cos()).sum::<f64>()
}

/// Ground energy from the roots; at `U = 0` the free-fermion sum.
pub fn bethe_energy(params: &HubbardParams) -> Result<f64> {
    if params.u == 0.0 {
        return stateprep::free_fermion_energy(params);
    }
    Ok(ground_energy(&solve_ground_state(params)?, params))
}

/// One row of a Bethe table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetheSolution {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_down")]
    pub n_down: usize,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub residual_norm: f64,
    pub solve_time: f64,
}

pub fn solve_with_report(params: &HubbardParams) -> Result<BetheSolution> {
    let clock = Stopwatch::start();
    let roots = solve_ground_state(params)?;
    let solve_time = clock.seconds();
    Ok(BetheSolution {
        l: params.l,
        u: params.u,
        n: params.n_particles(),
        n_down: params.n_down,
        e0: ground_energy(&roots, params),
        residual_norm: inf_norm(&residual(&roots, params)?),
        solve_time,
    })
}

/// Median wall time of `repeats` half-filled solves per `L`.
pub fn timing_study(ls: &[usize], t: f64, u: f64, repeats: usize) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(ls.len());
    for &l in ls {
        let params = HubbardParams::half_filled(l, t, u)?;
        let mut times = Vec::with_capacity(repeats.max(1));
        for _ in 0..repeats.max(1) {
            let clock = Stopwatch::start();
            solve_ground_state(&params)?;
            times.push(clock.seconds());
        }
        times.sort_by(f64::total_cmp);
        out.push((l, times[times.len() / 2]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half(l: usize, u: f64) -> HubbardParams {
        HubbardParams::half_filled(l, 1.0, u).unwrap()
    }

    #[test]
    fn phase_function_is_odd_and_bounded() {
        let phi = PhaseFunction::new(1.0, 4.0).unwrap();
        for x in [-50.0, -1.3, 0.0, 0.2, 7.0] {
            assert!((phi.value(-x) + phi.value(x)).abs() < 1e-15);
            assert!(phi.value(x).abs() < PI);
        }
        assert!(PhaseFunction::new(1.0, 0.0).is_err());
    }

    #[test]
    fn two_site_energy() {
        let p = half(2, 4.0);
        let roots = solve_ground_state(&p).unwrap();
        assert!((ground_energy(&roots, &p) - (2.0 - 8f64.sqrt())).abs() < 1e-9);
        assert!(inf_norm(&residual(&roots, &p).unwrap()) < RESIDUAL_TOL);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = HubbardParams::new(6, 1.0, 3.0, 3, 2).unwrap();
        let roots = BetheRoots {
            k: vec![0.3, 0.7, 1.1, 1.6, 2.2],
            lambda: vec![-0.4, 0.9],
        };
        let jac = jacobian(&roots, &p).unwrap();
        let h = 1e-6;
        let mut x = roots.pack();
        for c in 0..x.len() {
            x[c] += h;
            let fp = residual(&BetheRoots::unpack(&x, 5), &p).unwrap();
            x[c] -= 2.0 * h;
            let fm = residual(&BetheRoots::unpack(&x, 5), &p).unwrap();
            x[c] += h;
            for r in 0..x.len() {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert!((fd - jac[(r, c)]).abs() < 1e-6 * (1.0 + fd.abs()), "({r},{c})");
            }
        }
    }

    #[test]
    fn zero_interaction_is_rejected() {
        assert!(solve_ground_state(&half(4, 0.0)).is_err());
        assert!((bethe_energy(&half(2, 0.0)).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn size_mismatch_is_an_argument_error() {
        let r = BetheRoots {
            k: vec![1.0],
            lambda: vec![],
        };
        assert!(matches!(residual(&r, &half(2, 4.0)), Err(Error::InvalidArgument(_))));
    }
}
