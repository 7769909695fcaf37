//! Finite controlled-chain data model.
//!
//! A model carries a transition tensor `kernel(x,u,y) = p(y|x,u)` and a
//! nonnegative weight tensor `weights(x,u,y) = e^{r(x,u,y)}`, both laid out
//! row-major as `[x][u][y]`. Everything downstream consumes the product
//! `gain(x,u,y) = kernel · weights`, which is cached at construction.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;

/// Row sums within this distance of 1 pass silently.
pub const ROW_SUM_EXACT: f64 = 1e-12;
/// Row sums within this distance of 1 are reported and renormalized; beyond
/// it the kernel is rejected.
pub const ROW_SUM_HARD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    states: Vec<String>,
    actions: Vec<String>,
    kernel: Vec<f64>,
    weights: Vec<f64>,
    gain: Vec<f64>,
    metadata: String,
}

impl MdpModel {
    /// Builds a model from flat `[x][u][y]` tensors.
    ///
    /// Checks shapes, label uniqueness and the weight domain. Stochasticity
    /// of the kernel is left to [`validate`].
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        kernel: Vec<f64>,
        weights: Vec<f64>,
        metadata: String,
    ) -> Result<Self> {
        let s = states.len();
        let a = actions.len();
        if s == 0 {
            return Err(Error::InvalidParameter("model needs at least one state".into()));
        }
        if a == 0 {
            return Err(Error::InvalidParameter("model needs at least one action".into()));
        }
        check_distinct(&states, "state")?;
        check_distinct(&actions, "action")?;
        let len = s * a * s;
        if kernel.len() != len {
            return Err(Error::DimensionMismatch {
                what: "kernel",
                expected: len,
                found: kernel.len(),
            });
        }
        if weights.len() != len {
            return Err(Error::DimensionMismatch {
                what: "weights",
                expected: len,
                found: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                let (x, u, y) = unflatten(i, a, s);
                return Err(Error::InvalidWeight { x, u, y, value: w });
            }
        }
        if let Some(i) = kernel.iter().position(|k| !k.is_finite()) {
            let (x, u, y) = unflatten(i, a, s);
            return Err(Error::InvalidParameter(format!(
                "kernel entry ({x},{u},{y}) is not finite"
            )));
        }
        let gain = kernel.iter().zip(&weights).map(|(k, w)| k * w).collect();
        Ok(MdpModel {
            states,
            actions,
            kernel,
            weights,
            gain,
            metadata,
        })
    }

    /// Same as [`MdpModel::new`] with labels `"0".."s-1"` and `"0".."a-1"`.
    pub fn indexed(s: usize, a: usize, kernel: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::new(
            index_labels(s),
            index_labels(a),
            kernel,
            weights,
            String::new(),
        )
    }

    pub fn with_metadata(mut self, metadata: impl Into<String>) -> Self {
        self.metadata = metadata.into();
        self
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn metadata(&self) -> &str {
        &self.metadata
    }

    #[inline]
    fn offset(&self, x: usize, u: usize) -> usize {
        (x * self.n_actions() + u) * self.n_states()
    }

    pub fn kernel(&self, x: usize, u: usize, y: usize) -> f64 {
        self.kernel[self.offset(x, u) + y]
    }

    pub fn weight(&self, x: usize, u: usize, y: usize) -> f64 {
        self.weights[self.offset(x, u) + y]
    }

    pub fn gain(&self, x: usize, u: usize, y: usize) -> f64 {
        self.gain[self.offset(x, u) + y]
    }

    pub fn kernel_row(&self, x: usize, u: usize) -> &[f64] {
        let o = self.offset(x, u);
        &self.kernel[o..o + self.n_states()]
    }

    pub fn weight_row(&self, x: usize, u: usize) -> &[f64] {
        let o = self.offset(x, u);
        &self.weights[o..o + self.n_states()]
    }

    /// `kernel(x,u,·) · weights(x,u,·)`.
    pub fn gain_row(&self, x: usize, u: usize) -> &[f64] {
        let o = self.offset(x, u);
        &self.gain[o..o + self.n_states()]
    }

    /// One-step expected multiplicative reward `a(x,u) = Σ_y kernel · weights`.
    pub fn row_gain(&self, x: usize, u: usize) -> f64 {
        self.gain_row(x, u).iter().sum()
    }

    pub fn kernel_data(&self) -> &[f64] {
        &self.kernel
    }

    pub fn weight_data(&self) -> &[f64] {
        &self.weights
    }

    pub fn gain_data(&self) -> &[f64] {
        &self.gain
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Copy of the model with every kernel row divided by its sum. Rows
    /// summing to zero are left untouched.
    pub fn renormalized(&self) -> MdpModel {
        let s = self.n_states();
        let mut kernel = self.kernel.clone();
        for row in kernel.chunks_mut(s) {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|k| *k /= sum);
            }
        }
        MdpModel::new(
            self.states.clone(),
            self.actions.clone(),
            kernel,
            self.weights.clone(),
            self.metadata.clone(),
        )
        .expect("renormalizing preserves shapes")
    }

    /// Edge `x → y` iff some action moves there with positive gain.
    pub fn gain_edge(&self, x: usize, y: usize) -> bool {
        (0..self.n_actions()).any(|u| self.gain(x, u, y) > 0.0)
    }

    /// Strong connectivity of the gain graph. A single state needs a
    /// positive self-loop.
    pub fn gain_irreducible(&self) -> bool {
        let s = self.n_states();
        if s == 1 {
            return self.gain_edge(0, 0);
        }
        linalg::is_strongly_connected(s, |x, y| self.gain_edge(x, y))
    }
}

pub(crate) fn index_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn check_distinct(labels: &[String], what: &str) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::InvalidParameter(format!("duplicate {what} label {l:?}")));
        }
    }
    Ok(())
}

fn unflatten(i: usize, a: usize, s: usize) -> (usize, usize, usize) {
    (i / (a * s), (i / s) % a, i % s)
}

/// A kernel row whose sum is off by more than [`ROW_SUM_EXACT`], or which
/// has a negative entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RowViolation {
    pub x: usize,
    pub u: usize,
    pub sum: f64,
    pub min_entry: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub stochastic_ok: bool,
    /// Rows within [`ROW_SUM_HARD`] but not [`ROW_SUM_EXACT`]; callers should
    /// solve [`MdpModel::renormalized`] when this is nonempty.
    pub violations: Vec<RowViolation>,
    /// Every weight is strictly positive.
    pub a0_plus: bool,
    /// Every kernel entry is strictly positive.
    pub a1_plus: bool,
    pub dead_states: Vec<usize>,
    pub gain_irreducible: bool,
}

/// Checks stochasticity and the positivity structure of a model.
pub fn validate(model: &MdpModel) -> Result<FeasibilityReport> {
    let s = model.n_states();
    let a = model.n_actions();
    let mut soft = Vec::new();
    let mut hard = Vec::new();
    for x in 0..s {
        for u in 0..a {
            let row = model.kernel_row(x, u);
            let sum: f64 = row.iter().sum();
            let min_entry = row.iter().copied().fold(f64::INFINITY, f64::min);
            let dev = (sum - 1.0).abs();
            let v = RowViolation { x, u, sum, min_entry };
            if min_entry < 0.0 || dev > ROW_SUM_HARD {
                hard.push(v);
            } else if dev > ROW_SUM_EXACT {
                soft.push(v);
            }
        }
    }
    if !hard.is_empty() {
        return Err(Error::NotStochastic { violations: hard });
    }
    let a0_plus = model.weight_data().iter().all(|&w| w > 0.0);
    let a1_plus = model.kernel_data().iter().all(|&k| k > 0.0);
    let dead_states = (0..s)
        .filter(|&x| (0..a).all(|u| model.row_gain(x, u) <= 0.0))
        .collect();
    Ok(FeasibilityReport {
        stochastic_ok: soft.is_empty(),
        violations: soft,
        a0_plus,
        a1_plus,
        dead_states,
        gain_irreducible: model.gain_irreducible(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Deterministic,
    Randomized,
}

/// Randomized stationary Markov policy `φ(u|x)`, stored as an `s × a`
/// row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    phi: Vec<f64>,
    kind: PolicyKind,
}

impl Policy {
    pub fn deterministic(choices: &[usize], n_actions: usize) -> Result<Self> {
        let s = choices.len();
        if s == 0 || n_actions == 0 {
            return Err(Error::InvalidPolicy("empty policy".into()));
        }
        let mut phi = vec![0.0; s * n_actions];
        for (x, &u) in choices.iter().enumerate() {
            if u >= n_actions {
                return Err(Error::InvalidPolicy(format!(
                    "action {u} at state {x} out of range"
                )));
            }
            phi[x * n_actions + u] = 1.0;
        }
        Ok(Policy {
            n_states: s,
            n_actions,
            phi,
            kind: PolicyKind::Deterministic,
        })
    }

    /// Builds a policy from a flat `s × a` matrix. One-hot matrices are
    /// classified as deterministic.
    pub fn from_matrix(n_states: usize, n_actions: usize, phi: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidPolicy("empty policy".into()));
        }
        if phi.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                what: "policy",
                expected: n_states * n_actions,
                found: phi.len(),
            });
        }
        let mut one_hot = true;
        for (x, row) in phi.chunks(n_actions).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidPolicy(format!("row {x} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_EXACT {
                return Err(Error::InvalidPolicy(format!("row {x} sums to {sum}")));
            }
            one_hot &= row.iter().filter(|&&p| p == 1.0).count() == 1
                && row.iter().all(|&p| p == 0.0 || p == 1.0);
        }
        let kind = if one_hot {
            PolicyKind::Deterministic
        } else {
            PolicyKind::Randomized
        };
        Ok(Policy {
            n_states,
            n_actions,
            phi,
            kind,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Policy {
            n_states,
            n_actions,
            phi: vec![p; n_states * n_actions],
            kind: if n_actions == 1 {
                PolicyKind::Deterministic
            } else {
                PolicyKind::Randomized
            },
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn prob(&self, x: usize, u: usize) -> f64 {
        self.phi[x * self.n_actions + u]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.phi[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.phi
    }

    /// Chosen action per state, for deterministic policies.
    pub fn choices(&self) -> Option<Vec<usize>> {
        match self.kind {
            PolicyKind::Deterministic => Some(
                (0..self.n_states)
                    .map(|x| self.row(x).iter().position(|&p| p == 1.0).unwrap())
                    .collect(),
            ),
            PolicyKind::Randomized => None,
        }
    }

    pub(crate) fn check_against(&self, model: &MdpModel) -> Result<()> {
        if self.n_states != model.n_states() {
            return Err(Error::DimensionMismatch {
                what: "policy states",
                expected: model.n_states(),
                found: self.n_states,
            });
        }
        if self.n_actions != model.n_actions() {
            return Err(Error::DimensionMismatch {
                what: "policy actions",
                expected: model.n_actions(),
                found: self.n_actions,
            });
        }
        Ok(())
    }

    /// The linear gain matrix `M_φ(x,y) = Σ_u φ(u|x) · gain(x,u,y)`.
    pub fn gain_matrix(&self, model: &MdpModel) -> Result<Vec<f64>> {
        self.check_against(model)?;
        let s = model.n_states();
        let mut m = vec![0.0; s * s];
        for x in 0..s {
            for u in 0..model.n_actions() {
                let p = self.prob(x, u);
                if p == 0.0 {
                    continue;
                }
                for (out, g) in m[x * s..(x + 1) * s].iter_mut().zip(model.gain_row(x, u)) {
                    *out += p * g;
                }
            }
        }
        Ok(m)
    }
}
