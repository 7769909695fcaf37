//! Occupation-measure characterization of the growth rate.
//!
//! An occupation measure is a joint law `η(x,u,y) = η₀(x) η₁(u|x) η₂(y|x,u)`
//! on state–action–next-state triples. It is feasible when its state
//! marginal is invariant, `Σ_{x,u} η(x,u,y) = η₀(y)`. Over feasible measures
//!
//! ```text
//! λ = sup_η Ψ₀(η),   Ψ₀(η) = −Σ_{x,u} η̃(x,u) · D(η₂(·|x,u) ‖ kernel(x,u,·) · weights(x,u,·))
//! ```
//!
//! where the second argument of `D` is the unnormalized measure `e^r p`.
//! Any finite `g` gives the dual bound `λ ≤ max_x [log (T e^g)(x) − g(x)]`,
//! tight at `g = log ψ`. The two bounds sandwich `λ` and form a
//! [`Certificate`].

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eigen::{solve_eigen, EigenOptions, EigenSolution};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::generators::unit_f64;
use crate::linalg;
use crate::model::MdpModel;

/// Tolerance on the stationarity residual for a measure to count as
/// feasible in a [`Certificate`].
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    n_states: usize,
    n_actions: usize,
    joint: Vec<f64>,
}

impl OccupationMeasure {
    /// Wraps a flat `[x][u][y]` joint law. Entries must be nonnegative with
    /// total mass 1 within `1e-12`.
    pub fn new(n_states: usize, n_actions: usize, joint: Vec<f64>) -> Result<Self> {
        let len = n_states * n_actions * n_states;
        if joint.len() != len || len == 0 {
            return Err(Error::DimensionMismatch {
                what: "occupation measure",
                expected: len,
                found: joint.len(),
            });
        }
        if joint.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "occupation measure entries must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = joint.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotDistribution { sum });
        }
        Ok(OccupationMeasure {
            n_states,
            n_actions,
            joint,
        })
    }

    fn normalized(n_states: usize, n_actions: usize, mut joint: Vec<f64>) -> Result<Self> {
        let sum: f64 = joint.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::NotDistribution { sum });
        }
        joint.iter_mut().for_each(|v| *v /= sum);
        Self::new(n_states, n_actions, joint)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn get(&self, x: usize, u: usize, y: usize) -> f64 {
        self.joint[(x * self.n_actions + u) * self.n_states + y]
    }

    fn row(&self, x: usize, u: usize) -> &[f64] {
        let o = (x * self.n_actions + u) * self.n_states;
        &self.joint[o..o + self.n_states]
    }

    /// State marginal `η₀(x) = Σ_{u,y} η(x,u,y)`.
    pub fn eta0(&self) -> Vec<f64> {
        let sa = self.n_actions * self.n_states;
        self.joint.chunks(sa).map(|c| c.iter().sum()).collect()
    }

    /// State–action marginal `η̃(x,u)`, flat `s × a`.
    pub fn eta_tilde(&self) -> Vec<f64> {
        self.joint.chunks(self.n_states).map(|c| c.iter().sum()).collect()
    }

    /// `η₁(u|x)`, undefined where `η₀(x) = 0`.
    pub fn eta1(&self, x: usize, u: usize) -> Option<f64> {
        let e0: f64 = (0..self.n_actions).map(|v| self.row(x, v).iter().sum::<f64>()).sum();
        (e0 > 0.0).then(|| self.row(x, u).iter().sum::<f64>() / e0)
    }

    /// `η₂(·|x,u)`, undefined where `η̃(x,u) = 0`.
    pub fn eta2(&self, x: usize, u: usize) -> Option<Vec<f64>> {
        let row = self.row(x, u);
        let m: f64 = row.iter().sum();
        (m > 0.0).then(|| row.iter().map(|v| v / m).collect())
    }

    /// `t·self + (1 − t)·other`.
    pub fn mix(&self, other: &OccupationMeasure, t: f64) -> Result<OccupationMeasure> {
        if self.joint.len() != other.joint.len() {
            return Err(Error::DimensionMismatch {
                what: "occupation measure",
                expected: self.joint.len(),
                found: other.joint.len(),
            });
        }
        let joint = self
            .joint
            .iter()
            .zip(&other.joint)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        Self::normalized(self.n_states, self.n_actions, joint)
    }

    /// Same conditional laws `η₁`, `η₂`, with `η₀` replaced by the exact
    /// stationary distribution of the induced chain. States with `η₀ = 0`
    /// use the uniform action law and the model kernel.
    pub fn project_feasible(&self, model: &MdpModel) -> Result<OccupationMeasure> {
        let (s, a) = (self.n_states, self.n_actions);
        let mut cond = vec![0.0; s * a * s];
        for x in 0..s {
            let e0: f64 = (0..a).map(|u| self.row(x, u).iter().sum::<f64>()).sum();
            for u in 0..a {
                let o = (x * a + u) * s;
                if e0 > 0.0 {
                    let e1 = self.row(x, u).iter().sum::<f64>() / e0;
                    if let Some(r) = self.eta2(x, u) {
                        cond[o..o + s].iter_mut().zip(&r).for_each(|(c, v)| *c = e1 * v);
                    }
                } else {
                    let k = model.kernel_row(x, u);
                    cond[o..o + s]
                        .iter_mut()
                        .zip(k)
                        .for_each(|(c, v)| *c = v / a as f64);
                }
            }
        }
        assemble(s, a, &cond)
    }
}

/// Builds `η₀ η₁ η₂` from the conditional tensor `cond(x,u,y) = η₁(u|x) η₂(y|x,u)`
/// with `η₀` stationary for the induced chain.
fn assemble(s: usize, a: usize, cond: &[f64]) -> Result<OccupationMeasure> {
    let mut k = vec![0.0; s * s];
    for x in 0..s {
        for u in 0..a {
            let o = (x * a + u) * s;
            for y in 0..s {
                k[x * s + y] += cond[o + y];
            }
        }
    }
    let eta0 = linalg::any_stationary_distribution(&k, s)?;
    let joint = cond
        .iter()
        .enumerate()
        .map(|(i, c)| eta0[i / (a * s)] * c)
        .collect();
    OccupationMeasure::normalized(s, a, joint)
}

fn check_distribution(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| !(v >= 0.0)) || !((sum - 1.0).abs() <= 1e-9) {
        return Err(Error::NotDistribution { sum });
    }
    Ok(())
}

/// `D(p‖q) = Σ_{p_i>0} p_i log(p_i/q_i)`, `+∞` off absolute continuity.
pub fn relative_entropy(p: &[f64], q: &[f64]) -> Result<ExtReal> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "distribution",
            expected: p.len(),
            found: q.len(),
        });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Ok(ExtReal::PosInf);
            }
            d += pi * libm::log(pi / qi);
        }
    }
    Ok(ExtReal::Finite(d))
}

/// `η̃ · D(η₂ ‖ gain)` for one `(x,u)` row, written in terms of the joint row
/// `m = η̃ η₂`: `Σ_y m(y) log(m(y) / (η̃ · gain(y)))`. `None` when `m`
/// charges a point of zero gain.
fn row_divergence(m: &[f64], gain: &[f64]) -> Option<f64> {
    let mass: f64 = m.iter().sum();
    if mass == 0.0 {
        return Some(0.0);
    }
    let mut acc = 0.0;
    for (&mi, &gi) in m.iter().zip(gain) {
        if mi > 0.0 {
            if gi <= 0.0 {
                return None;
            }
            acc += mi * libm::log(mi / (mass * gi));
        }
    }
    Some(acc)
}

fn check_measure(model: &MdpModel, eta: &OccupationMeasure) -> Result<()> {
    if eta.n_states != model.n_states() || eta.n_actions != model.n_actions() {
        return Err(Error::DimensionMismatch {
            what: "occupation measure",
            expected: model.n_states() * model.n_actions() * model.n_states(),
            found: eta.joint.len(),
        });
    }
    Ok(())
}

/// Objective `Ψ₀(η) = −Σ_{x,u} η̃(x,u) D(η₂(·|x,u) ‖ kernel · weights)`.
///
/// Defined for any mass-one `η`; feasibility is not checked. `−∞` when `η₂`
/// charges a transition of zero gain.
pub fn objective_psi0(model: &MdpModel, eta: &OccupationMeasure) -> Result<ExtReal> {
    check_measure(model, eta)?;
    let mut total = 0.0;
    for x in 0..model.n_states() {
        for u in 0..model.n_actions() {
            match row_divergence(eta.row(x, u), model.gain_row(x, u)) {
                Some(d) => total -= d,
                None => return Ok(ExtReal::NegInf),
            }
        }
    }
    Ok(ExtReal::Finite(total))
}

/// Uncontrolled objective over pair laws `α(x,y)` (flat `s × s`):
/// `−Σ_x α₀(x) D(α₁(·|x) ‖ kernel(x,·) · weights(x,·))`. Requires a
/// single-action model.
pub fn donsker_varadhan_objective(model: &MdpModel, alpha: &[f64]) -> Result<ExtReal> {
    let s = model.n_states();
    if model.n_actions() != 1 {
        return Err(Error::InvalidParameter("uncontrolled objective needs exactly one action".into()));
    }
    if alpha.len() != s * s {
        return Err(Error::DimensionMismatch { what: "pair law", expected: s * s, found: alpha.len() });
    }
    let mut total = 0.0;
    for x in 0..s {
        match row_divergence(&alpha[x * s..(x + 1) * s], model.gain_row(x, 0)) {
            Some(d) => total -= d,
            None => return Ok(ExtReal::NegInf),
        }
    }
    Ok(ExtReal::Finite(total))
}

/// Invariance residual `Σ_{x,u} η(x,u,y) − η₀(y)` per state, with its
/// sup-norm.
pub fn stationarity_residual(eta: &OccupationMeasure) -> (Vec<f64>, f64) {
    let (s, a) = (eta.n_states, eta.n_actions);
    let mut r: Vec<f64> = eta.eta0().iter().map(|v| -v).collect();
    for (i, &v) in eta.joint.iter().enumerate() {
        r[i % s] += v;
    }
    let _ = a;
    let m = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    (r, m)
}

/// Optimal occupation measure from an eigen solution: the stationary law of
/// the twisted kernel `p*(y|x) = gain(x,v*(x),y) ψ(y) / (ρ ψ(x))` under the
/// greedy policy `v*`.
pub fn twisted_occupation(model: &MdpModel, eig: &EigenSolution) -> Result<OccupationMeasure> {
    if !eig.converged {
        return Err(Error::NotConverged);
    }
    let (s, a) = (model.n_states(), model.n_actions());
    if eig.psi.len() != s || eig.v_star.n_states() != s || eig.v_star.n_actions() != a {
        return Err(Error::DimensionMismatch { what: "eigen solution", expected: s, found: eig.psi.len() });
    }
    let choices = eig.v_star.choices().ok_or_else(|| Error::InvalidPolicy("v_star must be deterministic".into()))?;
    let mut cond = vec![0.0; s * a * s];
    for x in 0..s {
        let u = choices[x];
        let g = model.gain_row(x, u);
        let denom = eig.rho * eig.psi[x];
        let o = (x * a + u) * s;
        let mut sum = 0.0;
        for y in 0..s {
            let p = g[y] * eig.psi[y] / denom;
            cond[o + y] = p;
            sum += p;
        }
        if !((sum - 1.0).abs() <= 1e-8) {
            return Err(Error::RowSumViolation { state: x, sum });
        }
        cond[o..o + s].iter_mut().for_each(|p| *p /= sum);
    }
    assemble(s, a, &cond)
}

/// Occupation measure of the greedy policy at `psi`, tilted by `psi` and
/// normalized row by row. Equals [`twisted_occupation`] when `psi` is an
/// exact eigenfunction; for an approximate one (e.g. from a regularized
/// model) it is still feasible for `model`, so its objective is a valid
/// lower bound.
pub fn tilted_occupation(model: &MdpModel, psi: &[f64]) -> Result<OccupationMeasure> {
    let (s, a) = (model.n_states(), model.n_actions());
    let (_, policy) = crate::eigen::apply_t(model, psi)?;
    let choices = policy.choices().expect("greedy policy is deterministic");
    let mut cond = vec![0.0; s * a * s];
    for x in 0..s {
        let u = choices[x];
        let o = (x * a + u) * s;
        let g = model.gain_row(x, u);
        let mut sum = 0.0;
        for y in 0..s {
            cond[o + y] = g[y] * psi[y];
            sum += cond[o + y];
        }
        if !(sum > 0.0) {
            return Err(Error::DeadState { state: x });
        }
        cond[o..o + s].iter_mut().for_each(|p| *p /= sum);
    }
    assemble(s, a, &cond)
}

fn dirichlet_row(rng: &mut ChaCha8Rng, support: impl Iterator<Item = bool>, out: &mut [f64]) {
    let mut sum = 0.0;
    for (o, on) in out.iter_mut().zip(support) {
        *o = if on { -libm::log(1.0 - unit_f64(rng)) } else { 0.0 };
        sum += *o;
    }
    if sum > 0.0 {
        out.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Random feasible occupation measure: Dirichlet(1) action laws, Dirichlet(1)
/// next-state laws on the kernel support, and the exact stationary state law
/// of the induced chain.
pub fn random_feasible(model: &MdpModel, seed: u64) -> Result<OccupationMeasure> {
    let (s, a) = (model.n_states(), model.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut act = vec![0.0; a];
    let mut next = vec![0.0; s];
    for _ in 0..10 {
        let mut cond = vec![0.0; s * a * s];
        for x in 0..s {
            dirichlet_row(&mut rng, core::iter::repeat(true), &mut act);
            for u in 0..a {
                let k = model.kernel_row(x, u);
                dirichlet_row(&mut rng, k.iter().map(|&v| v > 0.0), &mut next);
                let o = (x * a + u) * s;
                for y in 0..s {
                    cond[o + y] = act[u] * next[y];
                }
            }
        }
        let mut kmat = vec![0.0; s * s];
        for (i, c) in cond.iter().enumerate() {
            kmat[(i / (a * s)) * s + i % s] += c;
        }
        let Ok(eta0) = linalg::stationary_distribution(&kmat, s) else {
            continue;
        };
        let joint = cond
            .iter()
            .enumerate()
            .map(|(i, c)| eta0[i / (a * s)] * c)
            .collect();
        return OccupationMeasure::normalized(s, a, joint);
    }
    Err(Error::SingularChain)
}

/// `max_x [log (T e^g)(x) − g(x)]`, an upper bound on the growth rate for
/// every finite `g`.
pub fn dual_bound(model: &MdpModel, g: &[f64]) -> Result<f64> {
    let s = model.n_states();
    if g.len() != s {
        return Err(Error::DimensionMismatch { what: "dual vector", expected: s, found: g.len() });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("dual vector must be finite".into()));
    }
    let shift = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eg: Vec<f64> = g.iter().map(|v| libm::exp(v - shift)).collect();
    let (teg, _) = crate::eigen::apply_t(model, &eg)?;
    let mut best = f64::NEG_INFINITY;
    for x in 0..s {
        if !(teg[x] > 0.0) {
            return Err(Error::DeadState { state: x });
        }
        best = best.max(libm::log(teg[x]) + shift - g[x]);
    }
    Ok(best)
}

/// Primal/dual bracket around the growth rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// `Ψ₀` at the witness measure.
    pub primal_lower: ExtReal,
    /// Dual bound at the witness vector.
    pub dual_upper: ExtReal,
    pub gap: f64,
    pub eta: OccupationMeasure,
    pub g: Vec<f64>,
}

impl Certificate {
    /// Evaluates both sides. The measure must be feasible within
    /// [`FEASIBILITY_TOL`].
    pub fn new(model: &MdpModel, eta: OccupationMeasure, g: Vec<f64>) -> Result<Self> {
        let (_, res) = stationarity_residual(&eta);
        if !(res <= FEASIBILITY_TOL) {
            return Err(Error::InvalidParameter(format!(
                "certificate measure is not stationary (residual {res:e})"
            )));
        }
        let primal_lower = objective_psi0(model, &eta)?;
        let dual_upper = match dual_bound(model, &g) {
            Ok(v) => ExtReal::Finite(v),
            Err(Error::DeadState { .. }) => ExtReal::PosInf,
            Err(e) => return Err(e),
        };
        let gap = dual_upper.to_f64() - primal_lower.to_f64();
        Ok(Certificate {
            primal_lower,
            dual_upper,
            gap,
            eta,
            g,
        })
    }

    /// Certificate from an eigen solution: twisted measure and `g = log ψ`.
    pub fn from_eigen(model: &MdpModel, eig: &EigenSolution) -> Result<Self> {
        let eta = twisted_occupation(model, eig)?;
        let g = eig.psi.iter().map(|&p| libm::log(p)).collect();
        Self::new(model, eta, g)
    }
}

/// Regularization parameters: strength ε and a full-support law γ on states.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonParams {
    pub epsilon: f64,
    pub gamma: Vec<f64>,
}

impl EpsilonParams {
    pub fn new(epsilon: f64, gamma: Vec<f64>) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter("epsilon must be finite and nonnegative".into()));
        }
        let sum: f64 = gamma.iter().sum();
        if gamma.is_empty() || gamma.iter().any(|&v| !(v > 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("gamma must be a full-support distribution".into()));
        }
        Ok(EpsilonParams { epsilon, gamma })
    }

    pub fn uniform(n_states: usize, epsilon: f64) -> Self {
        EpsilonParams {
            epsilon,
            gamma: vec![1.0 / n_states as f64; n_states],
        }
    }
}

/// The regularized model with kernel `(gain + εγ) / (a + ε)` and constant
/// weight `a + ε`, where `a(x,u) = Σ_y gain(x,u,y)`. Its gain is
/// `gain + εγ`, so every multi-step reward dominates the original one and
/// grows with ε.
pub fn epsilon_model(model: &MdpModel, params: &EpsilonParams) -> Result<MdpModel> {
    let (s, a) = (model.n_states(), model.n_actions());
    if params.gamma.len() != s {
        return Err(Error::DimensionMismatch { what: "gamma", expected: s, found: params.gamma.len() });
    }
    let eps = params.epsilon;
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter("epsilon must be nonnegative".into()));
    }
    let mut kernel = vec![0.0; s * a * s];
    let mut weights = vec![0.0; s * a * s];
    for x in 0..s {
        for u in 0..a {
            let g = model.gain_row(x, u);
            let total = g.iter().sum::<f64>() + eps;
            if !(total > 0.0) {
                return Err(Error::ZeroGainRow { x, u });
            }
            let o = (x * a + u) * s;
            for y in 0..s {
                kernel[o + y] = (g[y] + eps * params.gamma[y]) / total;
                weights[o + y] = total;
            }
        }
    }
    let meta = if model.metadata().is_empty() {
        format!("epsilon-regularized (epsilon={eps})")
    } else {
        format!("{}; epsilon-regularized (epsilon={eps})", model.metadata())
    };
    MdpModel::new(
        model.states().to_vec(),
        model.actions().to_vec(),
        kernel,
        weights,
        meta,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// `log ρ_ε`; for non-converged points the last bracket midpoint.
    pub lambda_eps: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

/// `λ_ε` along a strictly decreasing grid of positive ε. Solver failures are
/// recorded per point instead of aborting the sweep.
pub fn epsilon_sweep(
    model: &MdpModel,
    grid: &[f64],
    gamma: &[f64],
    opts: &EigenOptions,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() || grid.iter().any(|&e| !(e > 0.0)) || grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter(
            "epsilon grid must be positive and strictly decreasing".into(),
        ));
    }
    let direct = EigenOptions { eps_fallback: None, ..*opts };
    let mut out = Vec::with_capacity(grid.len());
    for &epsilon in grid {
        let params = EpsilonParams::new(epsilon, gamma.to_vec())?;
        let point = match epsilon_model(model, &params).and_then(|m| solve_eigen(&m, &direct)) {
            Ok(sol) => SweepPoint {
                epsilon,
                lambda_eps: Some(sol.log_rho),
                converged: true,
                iterations: sol.iterations,
                error: None,
            },
            Err(Error::NoConvergence(sol)) => SweepPoint {
                epsilon,
                lambda_eps: Some(sol.log_rho),
                converged: false,
                iterations: sol.iterations,
                error: Some(format!("{}", Error::NoConvergence(sol.clone()))),
            },
            Err(e) => SweepPoint {
                epsilon,
                lambda_eps: None,
                converged: false,
                iterations: 0,
                error: Some(format!("{e}")),
            },
        };
        out.push(point);
    }
    Ok(out)
}

/// Whether converged sweep values never increase as ε decreases, up to
/// `slack`.
pub fn sweep_is_monotone(points: &[SweepPoint], slack: f64) -> bool {
    let vals: Vec<f64> = points
        .iter()
        .filter(|p| p.converged)
        .filter_map(|p| p.lambda_eps)
        .collect();
    vals.windows(2).all(|w| w[1] <= w[0] + slack)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizeOptions {
    /// Budget of mirror-ascent steps over all outer rounds.
    pub iters: usize,
    pub step: f64,
    pub penalty: f64,
    pub tol: f64,
    /// Seed of the random feasible starting point.
    pub seed: u64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            iters: 20000,
            step: 0.1,
            penalty: 10.0,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizeOutcome {
    /// Best iterate after projection onto the feasible set.
    pub eta_hat: OccupationMeasure,
    /// `Ψ₀(eta_hat)`, a lower bound on the growth rate.
    pub value: f64,
    /// Stationarity residual of `eta_hat`.
    pub residual: f64,
    /// Stationarity residual of the raw iterate at termination.
    pub iterate_residual: f64,
    /// Multipliers of the stationarity constraints.
    pub multipliers: Vec<f64>,
    /// `dual_bound(−multipliers)`, an upper bound on the growth rate.
    pub dual_upper: f64,
    pub outer_rounds: usize,
    pub steps: usize,
    pub converged: bool,
}

/// State of the augmented Lagrangian
/// `L(η) = Ψ₀(η) − ⟨g, c(η)⟩ − (penalty/2) |c(η)|²`, with `c` the
/// stationarity residual.
struct Lagrangian<'a> {
    model: &'a MdpModel,
    g: Vec<f64>,
    penalty: f64,
}

impl Lagrangian<'_> {
    fn value(&self, eta: &[f64]) -> f64 {
        let (s, a) = (self.model.n_states(), self.model.n_actions());
        let mut psi = 0.0;
        for x in 0..s {
            for u in 0..a {
                let o = (x * a + u) * s;
                psi -= row_divergence(&eta[o..o + s], self.model.gain_row(x, u))
                    .unwrap_or(f64::INFINITY);
            }
        }
        let c = residual_of(eta, s, a);
        psi - self.g.iter().zip(&c).map(|(g, c)| g * c).sum::<f64>()
            - 0.5 * self.penalty * c.iter().map(|c| c * c).sum::<f64>()
    }

    /// `∂L/∂η(x,u,y) = log(gain η̃ / η) − (g(y) − g(x)) − penalty (c(y) − c(x))`
    /// on the support of `η`.
    fn gradient(&self, eta: &[f64], out: &mut [f64]) {
        let (s, a) = (self.model.n_states(), self.model.n_actions());
        let c = residual_of(eta, s, a);
        for x in 0..s {
            for u in 0..a {
                let o = (x * a + u) * s;
                let mass: f64 = eta[o..o + s].iter().sum();
                let gain = self.model.gain_row(x, u);
                for y in 0..s {
                    out[o + y] = if eta[o + y] > 0.0 {
                        libm::log(gain[y] * mass / eta[o + y])
                            - (self.g[y] - self.g[x])
                            - self.penalty * (c[y] - c[x])
                    } else {
                        0.0
                    };
                }
            }
        }
    }
}

fn residual_of(eta: &[f64], s: usize, a: usize) -> Vec<f64> {
    let mut c = vec![0.0; s];
    for (i, &v) in eta.iter().enumerate() {
        c[i % s] += v;
        c[i / (a * s)] -= v;
    }
    c
}

/// Weighted least-squares multipliers making the Lagrangian gradient as
/// constant as possible on the support of `eta`; exact at the optimum.
fn fit_multipliers(model: &MdpModel, eta: &[f64]) -> Vec<f64> {
    let (s, a) = (model.n_states(), model.n_actions());
    if s == 1 {
        return vec![0.0];
    }
    let zero = Lagrangian { model, g: vec![0.0; s], penalty: 0.0 };
    let mut grad = vec![0.0; eta.len()];
    zero.gradient(eta, &mut grad);
    // unknowns: g(1..s) and the constant κ; g(0) = 0
    let n = s;
    let mut ata = vec![0.0; n * n];
    let mut atb = vec![0.0; n];
    let mut coef = vec![0.0; n];
    for (i, &w) in eta.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let (x, y) = (i / (a * s), i % s);
        coef.iter_mut().for_each(|c| *c = 0.0);
        // residual: grad + g(x) − g(y) − κ
        if x > 0 {
            coef[x - 1] += 1.0;
        }
        if y > 0 {
            coef[y - 1] -= 1.0;
        }
        coef[n - 1] = -1.0;
        for r in 0..n {
            if coef[r] == 0.0 {
                continue;
            }
            atb[r] -= w * coef[r] * grad[i];
            for c in 0..n {
                ata[r * n + c] += w * coef[r] * coef[c];
            }
        }
    }
    match linalg::solve(&ata, &atb, n) {
        Some(z) => {
            let mut g = vec![0.0; s];
            g[1..].copy_from_slice(&z[..s - 1]);
            g
        }
        None => vec![0.0; s],
    }
}

/// Entropic mirror ascent on the joint simplex with an augmented Lagrangian
/// for the stationarity constraints.
///
/// Each outer round runs up to 500 mirror-ascent steps on `L`, then updates
/// `g ← g + penalty · c`. Steps carry heavy-ball momentum in log space; a
/// step that lowers `L` is retried without momentum, then with half the step
/// size. A round ends early once the `η`-weighted mean deviation of `∇L`
/// drops below `tol / 10`. The run stops when the change of `Ψ₀` between
/// rounds, the residual and that deviation are all within `tol`.
///
/// Every round's iterate is projected onto the feasible set and the best
/// projected value is returned, so `value` never exceeds the growth rate.
/// Starts from `start` when given, else from
/// [`random_feasible`]`(model, opts.seed)`. Entries that start at zero stay
/// zero.
pub fn maximize(
    model: &MdpModel,
    opts: &MaximizeOptions,
    start: Option<&OccupationMeasure>,
) -> Result<MaximizeOutcome> {
    if !(opts.step > 0.0) || !(opts.penalty > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("step, penalty and tol must be positive".into()));
    }
    let (s, a) = (model.n_states(), model.n_actions());
    let init = match start {
        Some(e) => {
            check_measure(model, e)?;
            e.clone()
        }
        None => random_feasible(model, opts.seed)?,
    };
    let mut eta = init.joint.clone();
    let mut lag = Lagrangian {
        model,
        g: fit_multipliers(model, &eta),
        penalty: opts.penalty,
    };
    let mut grad = vec![0.0; eta.len()];
    let mut trial = vec![0.0; eta.len()];
    let mut step = vec![0.0; eta.len()];
    let mut velocity = vec![0.0; eta.len()];

    let psi_of = |e: &[f64]| -> f64 {
        let m = OccupationMeasure { n_states: s, n_actions: a, joint: e.to_vec() };
        objective_psi0(model, &m).map(|v| v.to_f64()).unwrap_or(f64::NEG_INFINITY)
    };

    let mut best: Option<(OccupationMeasure, f64)> = None;
    let consider = |e: &[f64], best: &mut Option<(OccupationMeasure, f64)>| -> Result<()> {
        let m = OccupationMeasure { n_states: s, n_actions: a, joint: e.to_vec() };
        let proj = m.project_feasible(model)?;
        let v = objective_psi0(model, &proj)?.to_f64();
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            *best = Some((proj, v));
        }
        Ok(())
    };
    consider(&eta, &mut best)?;

    const INNER_STEPS: usize = 500;
    const MOMENTUM: f64 = 0.9;
    let mut steps = 0usize;
    let mut rounds = 0usize;
    let mut prev_psi = psi_of(&eta);
    let mut converged = false;
    let mut t = opts.step;

    while steps < opts.iters {
        rounds += 1;
        let mut lval = lag.value(&eta);
        let mut spread = f64::INFINITY;
        for _ in 0..INNER_STEPS {
            if steps >= opts.iters {
                break;
            }
            lag.gradient(&eta, &mut grad);
            let (top, avg) = eta
                .iter()
                .zip(&grad)
                .filter(|(e, _)| **e > 0.0)
                .fold((f64::NEG_INFINITY, 0.0), |(m, s), (e, g)| (m.max(*g), s + e * g));
            // mass-weighted mean deviation of the gradient; zero exactly at a
            // stationary point
            spread = eta.iter().zip(&grad).map(|(e, g)| e * (g - avg).abs()).sum();
            if spread <= 0.1 * opts.tol {
                break;
            }
            steps += 1;
            let mut accepted = None;
            let mut beta = MOMENTUM;
            for _ in 0..60 {
                let mut top_d = f64::NEG_INFINITY;
                for ((d, &g), &v) in step.iter_mut().zip(&grad).zip(&velocity) {
                    *d = t * (g - top) + beta * v;
                    top_d = top_d.max(*d);
                }
                let mut z = 0.0;
                for ((tr, &e), &d) in trial.iter_mut().zip(&eta).zip(&step) {
                    *tr = if e > 0.0 { e * libm::exp(d - top_d) } else { 0.0 };
                    z += *tr;
                }
                trial.iter_mut().for_each(|v| *v /= z);
                let nv = lag.value(&trial);
                if nv >= lval {
                    accepted = Some(nv);
                    break;
                }
                // restart: drop the momentum first, then shrink the step
                if beta > 0.0 {
                    beta = 0.0;
                } else {
                    t *= 0.5;
                }
            }
            let Some(nv) = accepted else { break };
            core::mem::swap(&mut eta, &mut trial);
            core::mem::swap(&mut velocity, &mut step);
            lval = nv;
            t = (1.02 * t).min(1e6);
        }
        let c = residual_of(&eta, s, a);
        let res = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        consider(&eta, &mut best)?;
        let psi = psi_of(&eta);
        if (psi - prev_psi).abs() <= opts.tol && res <= opts.tol && spread <= opts.tol {
            converged = true;
            break;
        }
        prev_psi = psi;
        for (g, c) in lag.g.iter_mut().zip(&c) {
            *g += opts.penalty * c;
        }
    }

    let (eta_hat, value) = best.expect("initial point was considered");
    let (_, residual) = stationarity_residual(&eta_hat);
    let iterate_residual = residual_of(&eta, s, a)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let refit = fit_multipliers(model, eta_hat.joint());
    let dual_of = |g: &[f64]| {
        let w: Vec<f64> = g.iter().map(|v| -v).collect();
        dual_bound(model, &w).unwrap_or(f64::INFINITY)
    };
    let (d_run, d_fit) = (dual_of(&lag.g), dual_of(&refit));
    let (multipliers, dual_upper) = if d_fit < d_run { (refit, d_fit) } else { (lag.g, d_run) };
    let outcome = MaximizeOutcome {
        eta_hat,
        value,
        residual,
        iterate_residual,
        multipliers,
        dual_upper,
        outer_rounds: rounds,
        steps,
        converged,
    };
    if converged {
        Ok(outcome)
    } else {
        Err(Error::MaximizerNoConvergence(Box::new(outcome)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_graph_model, random_positive_model};

    #[test]
    fn relative_entropy_basics() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(relative_entropy(&p, &p).unwrap(), ExtReal::Finite(0.0));
        let d = relative_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap().to_f64();
        assert!((d - core::f64::consts::LN_2).abs() < 1e-15);
        let d = relative_entropy(&[0.5, 0.5], &[0.25, 0.75]).unwrap().to_f64();
        let expect = 0.5 * libm::log(2.0) + 0.5 * libm::log(2.0 / 3.0);
        assert!((d - expect).abs() < 1e-15);
        assert!((d - 0.143_841_036).abs() < 1e-8);
        assert_eq!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), ExtReal::PosInf);
        assert!(matches!(
            relative_entropy(&[0.5, 0.4], &[0.5, 0.5]),
            Err(Error::NotDistribution { .. })
        ));
    }

    #[test]
    fn untilted_measure_scores_expected_log_weight() {
        let m = random_positive_model(3, 2, 5, 0.7);
        let eta = random_feasible(&m, 1).unwrap();
        // replace η₂ by the kernel rows
        let (s, a) = (3, 2);
        let mut joint = vec![0.0; s * a * s];
        let et = eta.eta_tilde();
        for x in 0..s {
            for u in 0..a {
                for y in 0..s {
                    joint[(x * a + u) * s + y] = et[x * a + u] * m.kernel(x, u, y);
                }
            }
        }
        let e = OccupationMeasure::normalized(s, a, joint.clone()).unwrap();
        let psi = objective_psi0(&m, &e).unwrap().to_f64();
        let expect: f64 = e
            .joint()
            .iter()
            .zip(m.weight_data())
            .map(|(j, w)| j * libm::log(*w))
            .sum();
        assert!((psi - expect).abs() < 1e-14);
    }

    #[test]
    fn off_edge_mass_is_minus_infinity() {
        let m = gen_graph_model(&[vec![vec![true, true], vec![true, false]]]).unwrap();
        // mass on the forbidden 1 -> 1 transition
        let eta = OccupationMeasure::new(2, 1, vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(objective_psi0(&m, &eta).unwrap(), ExtReal::NegInf);
    }

    #[test]
    fn residual_of_uniform_on_asymmetric_model() {
        let eta = OccupationMeasure::new(2, 1, vec![0.5, 0.2, 0.2, 0.1]).unwrap();
        let (r, m) = stationarity_residual(&eta);
        // inflow (0.7, 0.3) vs η₀ (0.7, 0.3) balanced; perturb instead
        assert!(m < 1e-15, "{r:?}");
        let eta = OccupationMeasure::new(2, 1, vec![0.5, 0.3, 0.1, 0.1]).unwrap();
        let (r, m) = stationarity_residual(&eta);
        assert!((r[0] - (0.6 - 0.8)).abs() < 1e-15 && (m - 0.2).abs() < 1e-15);
    }

    #[test]
    fn singleton_twist_is_point_mass() {
        let c: f64 = 0.8;
        let m = MdpModel::indexed(1, 1, vec![1.0], vec![libm::exp(c)]).unwrap();
        let sol = solve_eigen(&m, &EigenOptions::default()).unwrap();
        let eta = twisted_occupation(&m, &sol).unwrap();
        assert_eq!(eta.joint(), &[1.0]);
        assert!((objective_psi0(&m, &eta).unwrap().to_f64() - c).abs() < 1e-15);
    }

    #[test]
    fn twisted_requires_convergence() {
        let m = random_positive_model(2, 2, 3, 0.5);
        let mut sol = solve_eigen(&m, &EigenOptions::default()).unwrap();
        sol.converged = false;
        assert!(matches!(twisted_occupation(&m, &sol), Err(Error::NotConverged)));
        sol.converged = true;
        sol.rho *= 1.1;
        assert!(matches!(twisted_occupation(&m, &sol), Err(Error::RowSumViolation { .. })));
    }

    #[test]
    fn random_feasible_is_stationary_and_deterministic() {
        let m = random_positive_model(4, 3, 9, 0.5);
        for seed in 0..20 {
            let e = random_feasible(&m, seed).unwrap();
            assert!((e.joint().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(stationarity_residual(&e).1 <= 1e-10);
        }
        assert_eq!(random_feasible(&m, 4).unwrap(), random_feasible(&m, 4).unwrap());
    }

    #[test]
    fn dual_bound_at_zero_is_log_max_row_gain() {
        let m = random_positive_model(3, 2, 2, 0.5);
        let expect = (0..3)
            .flat_map(|x| (0..2).map(move |u| (x, u)))
            .map(|(x, u)| m.row_gain(x, u))
            .fold(0.0, f64::max);
        assert!((dual_bound(&m, &[0.0; 3]).unwrap() - libm::log(expect)).abs() < 1e-14);
        let dead = MdpModel::indexed(2, 1, vec![0.5, 0.5, 0.5, 0.5], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(dual_bound(&dead, &[0.0, 0.0]), Err(Error::DeadState { state: 1 })));
    }

    #[test]
    fn epsilon_zero_keeps_the_gain() {
        let m = random_positive_model(3, 2, 4, 0.5);
        let m0 = epsilon_model(&m, &EpsilonParams::uniform(3, 0.0)).unwrap();
        for (g0, g) in m0.gain_data().iter().zip(m.gain_data()) {
            assert!((g0 - g).abs() <= 1e-15 * g.max(1.0));
        }
        let fib = gen_graph_model(&[vec![vec![true, true], vec![true, false]]]).unwrap();
        let e = epsilon_model(&fib, &EpsilonParams::uniform(2, 0.3)).unwrap();
        let r = crate::model::validate(&e).unwrap();
        assert!(r.a0_plus && r.a1_plus && r.stochastic_ok);
    }

    #[test]
    fn zero_gain_row_needs_epsilon() {
        let m = MdpModel::indexed(2, 1, vec![0.5, 0.5, 0.5, 0.5], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            epsilon_model(&m, &EpsilonParams::uniform(2, 0.0)),
            Err(Error::ZeroGainRow { x: 1, u: 0 })
        ));
        assert!(epsilon_model(&m, &EpsilonParams::uniform(2, 0.1)).is_ok());
    }

    #[test]
    fn epsilon_params_validation() {
        assert!(EpsilonParams::new(0.1, vec![0.5, 0.5]).is_ok());
        assert!(EpsilonParams::new(0.1, vec![1.0, 0.0]).is_err());
        assert!(EpsilonParams::new(-0.1, vec![1.0]).is_err());
    }

    #[test]
    fn single_state_sweep_is_closed_form() {
        let w = 1.7;
        let m = MdpModel::indexed(1, 1, vec![1.0], vec![w]).unwrap();
        let grid = [1e-1, 1e-2, 1e-3];
        let pts = epsilon_sweep(&m, &grid, &[1.0], &EigenOptions::default()).unwrap();
        for (p, e) in pts.iter().zip(grid) {
            assert!((p.lambda_eps.unwrap() - libm::log(w + e)).abs() < 1e-14);
        }
        assert!(sweep_is_monotone(&pts, 1e-9));
        assert!(epsilon_sweep(&m, &[1e-3, 1e-2], &[1.0], &EigenOptions::default()).is_err());
    }

    #[test]
    fn maximize_singleton_is_immediate() {
        let m = MdpModel::indexed(1, 1, vec![1.0], vec![3.0]).unwrap();
        let out = maximize(&m, &MaximizeOptions::default(), None).unwrap();
        assert!((out.value - libm::log(3.0)).abs() < 1e-15);
        assert_eq!(out.outer_rounds, 1);
    }

    #[test]
    fn mixing_keeps_feasibility() {
        let m = random_positive_model(3, 2, 8, 0.5);
        let a = random_feasible(&m, 1).unwrap();
        let b = random_feasible(&m, 2).unwrap();
        let c = a.mix(&b, 0.3).unwrap();
        assert!(stationarity_residual(&c).1 < 1e-12);
    }
}
