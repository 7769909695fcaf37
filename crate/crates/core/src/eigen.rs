//! The nonlinear Perron–Frobenius eigenproblem `Tψ = ρψ` for
//!
//! ```text
//! Tf(x) = max_u Σ_y kernel(x,u,y) · weights(x,u,y) · f(y)
//! ```
//!
//! `T` is monotone and positively one-homogeneous. Power iteration from
//! `f₀ = 𝟙` with sup-norm normalization is stopped by the Collatz–Wielandt
//! bracket `min_x Tf/f ≤ ρ ≤ max_x Tf/f`, which certifies the eigenvalue
//! regardless of how fast the iteration converges. The growth rate is
//! `λ = log ρ`.
//!
//! For a fixed stationary policy `φ` the operator is linear with matrix
//! `M_φ`, and [`fixed_policy_gain`] returns `log ρ(M_φ)`. Maximizing that over
//! the finitely many deterministic policies ([`enumerate_policy_gains`])
//! gives an independent route to `λ`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::linalg;
use crate::model::{MdpModel, Policy};
use crate::variational::{epsilon_model, EpsilonParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Relative bracket width `(upper - lower) / lower` at which to stop.
    pub tol: f64,
    pub max_iter: usize,
    /// Regularization strength used when the direct iteration is refused or
    /// fails.
    pub eps_fallback: Option<f64>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_iter: 100_000,
            eps_fallback: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub rho: f64,
    pub log_rho: f64,
    /// Positive eigenfunction, sup-norm 1.
    pub psi: Vec<f64>,
    /// Greedy policy at `psi`, ties to the lowest action index.
    pub v_star: Policy,
    pub cw_lower: f64,
    pub cw_upper: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `Some(ε)` when the reported solution is that of the ε-regularized model.
    pub regularized: Option<f64>,
}

fn check_len(model: &MdpModel, f: &[f64]) -> Result<()> {
    if f.len() != model.n_states() {
        return Err(Error::DimensionMismatch {
            what: "value function",
            expected: model.n_states(),
            found: f.len(),
        });
    }
    Ok(())
}

/// Evaluates `Tf` into `out` and records the maximizing action per state.
fn t_into(model: &MdpModel, f: &[f64], out: &mut [f64], choice: &mut [usize]) {
    for x in 0..model.n_states() {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for u in 0..model.n_actions() {
            let v: f64 = model.gain_row(x, u).iter().zip(f).map(|(g, fy)| g * fy).sum();
            if v > best {
                best = v;
                arg = u;
            }
        }
        out[x] = best;
        choice[x] = arg;
    }
}

/// One application of `T`, with the greedy (argmax) policy.
pub fn apply_t(model: &MdpModel, f: &[f64]) -> Result<(Vec<f64>, Policy)> {
    check_len(model, f)?;
    let s = model.n_states();
    let mut out = vec![0.0; s];
    let mut choice = vec![0; s];
    t_into(model, f, &mut out, &mut choice);
    Ok((out, Policy::deterministic(&choice, model.n_actions())?))
}

/// `T⁽ⁿ⁾ f`; `n = 0` is the identity.
pub fn apply_tn(model: &MdpModel, f: &[f64], n: usize) -> Result<Vec<f64>> {
    check_len(model, f)?;
    let s = model.n_states();
    let mut cur = f.to_vec();
    let mut next = vec![0.0; s];
    let mut choice = vec![0; s];
    for _ in 0..n {
        t_into(model, &cur, &mut next, &mut choice);
        core::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

fn ratio_bracket(tf: &[f64], f: &[f64]) -> (f64, f64) {
    tf.iter()
        .zip(f)
        .map(|(t, v)| t / v)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        })
}

/// Collatz–Wielandt bracket `(min_x Tf/f, max_x Tf/f)` for `f ≫ 0`.
pub fn cw_bounds(model: &MdpModel, f: &[f64]) -> Result<(f64, f64)> {
    check_len(model, f)?;
    if let Some(index) = f.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::NonpositiveF { index });
    }
    let (tf, _) = apply_t(model, f)?;
    Ok(ratio_bracket(&tf, f))
}

/// Monotone homogeneous map driven by the power iteration.
trait Operator {
    fn dim(&self) -> usize;
    fn apply(&self, f: &[f64], out: &mut [f64]);
}

struct Bellman<'a> {
    model: &'a MdpModel,
}

impl Operator for Bellman<'_> {
    fn dim(&self) -> usize {
        self.model.n_states()
    }

    fn apply(&self, f: &[f64], out: &mut [f64]) {
        let mut choice = vec![0; self.dim()];
        t_into(self.model, f, out, &mut choice);
    }
}

struct Linear<'a> {
    m: &'a [f64],
    n: usize,
}

impl Operator for Linear<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, f: &[f64], out: &mut [f64]) {
        linalg::mat_vec(self.m, f, self.n, out);
    }
}

#[derive(Debug, Clone)]
struct PowerOutcome {
    rho: f64,
    lower: f64,
    upper: f64,
    psi: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn normalize_max(v: &mut [f64]) {
    let m = v.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
}

/// Normalized power iteration with Collatz–Wielandt stopping.
///
/// If the bracket makes no progress for `max_iter / 2` consecutive steps the
/// iteration switches to the two-step operator `T∘T`, whose eigenvalue is
/// `ρ²`; this breaks period-2 oscillation without moving the fixed point.
fn power_iterate<O: Operator>(op: &O, tol: f64, max_iter: usize) -> PowerOutcome {
    let n = op.dim();
    let mut f = vec![1.0; n];
    let mut tf = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut two_step = false;
    let mut best_width = f64::INFINITY;
    let mut stall = 0usize;
    let stall_limit = (max_iter / 2).max(1);
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;

    for it in 1..=max_iter {
        if two_step {
            op.apply(&f, &mut tmp);
            op.apply(&tmp, &mut tf);
        } else {
            op.apply(&f, &mut tf);
        }
        (lower, upper) = ratio_bracket(&tf, &f);
        let width = (upper - lower) / lower;
        if width <= tol {
            return if two_step {
                finish_two_step(op, f, lower, upper, tol, it)
            } else {
                PowerOutcome {
                    rho: libm::sqrt(lower * upper),
                    lower,
                    upper,
                    psi: f,
                    iterations: it,
                    converged: true,
                }
            };
        }
        if width < best_width * (1.0 - 1e-9) {
            best_width = width;
            stall = 0;
        } else {
            stall += 1;
            if stall >= stall_limit && !two_step {
                two_step = true;
                best_width = f64::INFINITY;
                stall = 0;
            }
        }
        normalize_max(&mut tf);
        core::mem::swap(&mut f, &mut tf);
    }

    let (lower, upper) = if two_step {
        (libm::sqrt(lower), libm::sqrt(upper))
    } else {
        (lower, upper)
    };
    PowerOutcome {
        rho: libm::sqrt(lower * upper),
        lower,
        upper,
        psi: f,
        iterations: max_iter,
        converged: false,
    }
}

/// Converts a converged `T∘T` eigenvector into one for `T` via
/// `ψ = f + Tf/ρ` (exact for period-2 structure), falling back to the
/// square-rooted two-step bracket when that candidate is not tight enough.
fn finish_two_step<O: Operator>(
    op: &O,
    f: Vec<f64>,
    lower2: f64,
    upper2: f64,
    tol: f64,
    iterations: usize,
) -> PowerOutcome {
    let n = op.dim();
    let rho = libm::sqrt(libm::sqrt(lower2 * upper2));
    let mut g = vec![0.0; n];
    op.apply(&f, &mut g);
    for (gi, fi) in g.iter_mut().zip(&f) {
        *gi = fi + *gi / rho;
    }
    normalize_max(&mut g);
    let mut tg = vec![0.0; n];
    op.apply(&g, &mut tg);
    let (lo, hi) = ratio_bracket(&tg, &g);
    if g.iter().all(|&v| v > 0.0) && (hi - lo) / lo <= tol {
        return PowerOutcome {
            rho: libm::sqrt(lo * hi),
            lower: lo,
            upper: hi,
            psi: g,
            iterations,
            converged: true,
        };
    }
    let (lower, upper) = (libm::sqrt(lower2), libm::sqrt(upper2));
    PowerOutcome {
        rho: libm::sqrt(lower * upper),
        lower,
        upper,
        psi: f,
        iterations,
        converged: true,
    }
}

fn to_solution(model: &MdpModel, out: PowerOutcome, regularized: Option<f64>) -> EigenSolution {
    let s = model.n_states();
    let mut tf = vec![0.0; s];
    let mut choice = vec![0; s];
    t_into(model, &out.psi, &mut tf, &mut choice);
    EigenSolution {
        rho: out.rho,
        log_rho: libm::log(out.rho),
        psi: out.psi,
        v_star: Policy::deterministic(&choice, model.n_actions())
            .expect("argmax is in range"),
        cw_lower: out.lower,
        cw_upper: out.upper,
        iterations: out.iterations,
        converged: out.converged,
        regularized,
    }
}

fn no_convergence(sol: EigenSolution) -> Error {
    Error::NoConvergence(Box::new(sol))
}

/// Solves `Tψ = ρψ` by normalized power iteration.
///
/// Models with a reducible gain graph are refused unless
/// `opts.eps_fallback` is set. With `eps_fallback`, any model whose gain is
/// not strictly positive, or whose direct iteration does not converge, is
/// replaced by its ε-regularized version with uniform γ and the result is
/// flagged through [`EigenSolution::regularized`]. All fields then refer to
/// the regularized model.
pub fn solve_eigen(model: &MdpModel, opts: &EigenOptions) -> Result<EigenSolution> {
    if let Some(eps) = opts.eps_fallback {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter("eps_fallback must be positive".into()));
        }
    }
    let positive = model.gain_data().iter().all(|&g| g > 0.0);
    match opts.eps_fallback {
        Some(eps) if !positive => return solve_regularized(model, eps, opts),
        None if !model.gain_irreducible() => return Err(Error::ReducibleGain),
        _ => {}
    }
    let out = power_iterate(&Bellman { model }, opts.tol, opts.max_iter);
    let sol = to_solution(model, out, None);
    if sol.converged {
        return Ok(sol);
    }
    match opts.eps_fallback {
        Some(eps) => solve_regularized(model, eps, opts),
        None => Err(no_convergence(sol)),
    }
}

fn solve_regularized(model: &MdpModel, eps: f64, opts: &EigenOptions) -> Result<EigenSolution> {
    let reg = epsilon_model(model, &EpsilonParams::uniform(model.n_states(), eps))?;
    let out = power_iterate(&Bellman { model: &reg }, opts.tol, opts.max_iter);
    let sol = to_solution(&reg, out, Some(eps));
    if sol.converged {
        Ok(sol)
    } else {
        Err(no_convergence(sol))
    }
}

/// Iterates `f ← Tf / ‖Tf‖∞` from `𝟙`, yielding the Collatz–Wielandt bracket
/// of each iterate.
pub fn brackets(model: &MdpModel) -> impl Iterator<Item = (f64, f64)> + '_ {
    let s = model.n_states();
    let mut f = vec![1.0; s];
    let mut tf = vec![0.0; s];
    let mut choice = vec![0; s];
    core::iter::from_fn(move || {
        t_into(model, &f, &mut tf, &mut choice);
        let b = ratio_bracket(&tf, &f);
        normalize_max(&mut tf);
        core::mem::swap(&mut f, &mut tf);
        Some(b)
    })
}

/// Growth rate `log ρ(M_φ)` under a fixed stationary policy.
///
/// Requires `M_φ` irreducible; otherwise [`Error::ReducibleGain`].
pub fn fixed_policy_gain(model: &MdpModel, phi: &Policy, opts: &EigenOptions) -> Result<f64> {
    let m = phi.gain_matrix(model)?;
    let s = model.n_states();
    let irreducible = if s == 1 {
        m[0] > 0.0
    } else {
        linalg::is_strongly_connected(s, |x, y| m[x * s + y] > 0.0)
    };
    if !irreducible {
        return Err(Error::ReducibleGain);
    }
    let out = power_iterate(&Linear { m: &m, n: s }, opts.tol, opts.max_iter);
    if !out.converged {
        return Err(no_convergence(EigenSolution {
            rho: out.rho,
            log_rho: libm::log(out.rho),
            psi: out.psi,
            v_star: Policy::deterministic(&vec![0; s], model.n_actions())?,
            cw_lower: out.lower,
            cw_upper: out.upper,
            iterations: out.iterations,
            converged: false,
            regularized: None,
        }));
    }
    Ok(libm::log(out.rho))
}

/// `log` of the spectral radius of an arbitrary nonnegative matrix: the
/// maximum over its strongly connected components. `-∞` for nilpotent
/// matrices.
pub fn log_spectral_radius(m: &[f64], n: usize, opts: &EigenOptions) -> Result<ExtReal> {
    let mut best = ExtReal::NegInf;
    for comp in linalg::strongly_connected_components(n, |x, y| m[x * n + y] > 0.0) {
        let k = comp.len();
        let rate = if k == 1 {
            let d = m[comp[0] * n + comp[0]];
            if d > 0.0 {
                ExtReal::Finite(libm::log(d))
            } else {
                ExtReal::NegInf
            }
        } else {
            let mut sub = vec![0.0; k * k];
            for (i, &a) in comp.iter().enumerate() {
                for (j, &b) in comp.iter().enumerate() {
                    sub[i * k + j] = m[a * n + b];
                }
            }
            let out = power_iterate(&Linear { m: &sub, n: k }, opts.tol, opts.max_iter);
            if !out.converged {
                return Err(Error::NoConvergence(Box::new(EigenSolution {
                    rho: out.rho,
                    log_rho: libm::log(out.rho),
                    psi: out.psi,
                    v_star: Policy::deterministic(&vec![0; k], 1)?,
                    cw_lower: out.lower,
                    cw_upper: out.upper,
                    iterations: out.iterations,
                    converged: false,
                    regularized: None,
                })));
            }
            ExtReal::Finite(libm::log(out.rho))
        };
        if rate > best {
            best = rate;
        }
    }
    Ok(best)
}

/// Exhaustive table of deterministic stationary policies.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub best_policy: Policy,
    pub best_gain: ExtReal,
    /// `(choices, gain)` in lexicographic order of `choices`, state 0 most
    /// significant.
    pub rows: Vec<(Vec<usize>, ExtReal)>,
}

pub const DEFAULT_POLICY_CAP: u128 = 1_000_000;

/// Evaluates `log ρ(M_v)` for every deterministic policy `v` and returns the
/// maximum (first in lexicographic order on ties). Reducible `M_v` are
/// handled through their strongly connected components.
pub fn enumerate_policy_gains(
    model: &MdpModel,
    cap: u128,
    opts: &EigenOptions,
) -> Result<PolicyTable> {
    let s = model.n_states();
    let a = model.n_actions();
    let count = (a as u128).checked_pow(s as u32).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::TooManyPolicies { count, cap });
    }
    let mut choices = vec![0usize; s];
    let mut rows = Vec::with_capacity(count as usize);
    let mut best: Option<(usize, ExtReal)> = None;
    for idx in 0..count as usize {
        let mut r = idx;
        for x in (0..s).rev() {
            choices[x] = r % a;
            r /= a;
        }
        let phi = Policy::deterministic(&choices, a)?;
        let gain = log_spectral_radius(&phi.gain_matrix(model)?, s, opts)?;
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((idx, gain));
        }
        rows.push((choices.clone(), gain));
    }
    let (bi, best_gain) = best.expect("at least one policy");
    Ok(PolicyTable {
        best_policy: Policy::deterministic(&rows[bi].0, a)?,
        best_gain,
        rows,
    })
}
