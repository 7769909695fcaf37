//! Builders for the standard model families.
//!
//! - [`gen_graph_model`]: counting directed paths in a family of graphs.
//!   With `p(y|x,u) = 1/d_u(x)` on edges and `e^r = d_u(x)`, the gain
//!   `kernel · weights` is exactly the adjacency indicator, so `ρ` is the
//!   growth rate of the number of paths one can steer through.
//! - [`gen_portfolio_model`]: risk-adjusted growth of wealth driven by a
//!   finite-state factor chain, over a discretized allocation simplex.
//! - [`gen_exit_model`]: slowest exit rate from a subset of states.
//! - [`random_positive_model`]: strictly positive random instances for tests
//!   and benchmarks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{index_labels, MdpModel};

/// One model action per graph; `graphs[u][x][y]` is the edge `x → y` of
/// graph `u`. All graphs share the vertex set.
pub fn gen_graph_model(graphs: &[Vec<Vec<bool>>]) -> Result<MdpModel> {
    let a = graphs.len();
    if a == 0 {
        return Err(Error::InvalidParameter("at least one graph is required".into()));
    }
    let s = graphs[0].len();
    let mut kernel = vec![0.0; s * a * s];
    let mut weights = vec![0.0; s * a * s];
    for (u, g) in graphs.iter().enumerate() {
        if g.len() != s {
            return Err(Error::DimensionMismatch {
                what: "graph vertices",
                expected: s,
                found: g.len(),
            });
        }
        for (x, row) in g.iter().enumerate() {
            if row.len() != s {
                return Err(Error::DimensionMismatch {
                    what: "adjacency row",
                    expected: s,
                    found: row.len(),
                });
            }
            let d = row.iter().filter(|&&e| e).count();
            if d == 0 {
                return Err(Error::DanglingVertex { graph: u, vertex: x });
            }
            let o = (x * a + u) * s;
            for (y, &e) in row.iter().enumerate() {
                if e {
                    kernel[o + y] = 1.0 / d as f64;
                    weights[o + y] = d as f64;
                }
            }
        }
    }
    let actions = (0..a).map(|u| format!("g{u}")).collect();
    MdpModel::new(
        index_labels(s),
        actions,
        kernel,
        weights,
        String::from("graph path counting: kernel 1/out-degree on edges, weight out-degree"),
    )
}

/// Finitely supported law of the price-relative vector given a factor
/// transition `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceLaw {
    /// `(probability, price relatives)`; each vector strictly positive.
    pub atoms: Vec<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioParams {
    /// Factor transition matrix, `m × m` rows.
    pub q: Vec<Vec<f64>>,
    /// `laws[x][y]`: price-relative law on the transition `x → y`.
    pub laws: Vec<Vec<PriceLaw>>,
    /// Risk sensitivity θ ≠ 0.
    pub theta: f64,
    /// Log of the per-period bank multiplier, > 0.
    pub r_bank: f64,
    /// Allocation grid; each point `a` has `a_i ≥ 0`, `Σ a_i ≤ 1`.
    pub grid: Vec<Vec<f64>>,
}

/// Builds the risk-adjusted portfolio model.
///
/// With `B(a,w) = e^{r_bank} + ⟨a, w − e^{r_bank}𝟙⟩` and
/// `μ(x,a,y) = Σ_w ν(w) · exp(−(θ/2) log B(a,w))`, the model has kernel
/// `q(y|x) μ(x,a,y) / Σ_{y'} q(y'|x) μ(x,a,y')` and weight
/// `Σ_y q(y|x) μ(x,a,y)` in every `y` slot. Its growth rate is that of
/// `E[exp(−(θ/2) log V_n)]` for the wealth process `V_n`.
pub fn gen_portfolio_model(params: &PortfolioParams) -> Result<MdpModel> {
    let PortfolioParams {
        q,
        laws,
        theta,
        r_bank,
        grid,
    } = params;
    let (theta, r_bank) = (*theta, *r_bank);
    if !(theta != 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter("theta must be finite and nonzero".into()));
    }
    if !(r_bank > 0.0 && r_bank.is_finite()) {
        return Err(Error::InvalidParameter("r_bank must be positive".into()));
    }
    let s = q.len();
    if s == 0 || grid.is_empty() {
        return Err(Error::InvalidParameter("need at least one factor state and grid point".into()));
    }
    let assets = grid[0].len();
    for (x, row) in q.iter().enumerate() {
        if row.len() != s {
            return Err(Error::DimensionMismatch { what: "q row", expected: s, found: row.len() });
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("q row {x} is not a distribution")));
        }
    }
    if laws.len() != s || laws.iter().any(|r| r.len() != s) {
        return Err(Error::DimensionMismatch { what: "price laws", expected: s, found: laws.len() });
    }
    for row in laws {
        for law in row {
            if law.atoms.is_empty() {
                return Err(Error::InvalidParameter("empty price law".into()));
            }
            let total: f64 = law.atoms.iter().map(|(p, _)| p).sum();
            if law.atoms.iter().any(|(p, _)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter("price law probabilities must sum to 1".into()));
            }
            for (_, w) in &law.atoms {
                if w.len() != assets {
                    return Err(Error::DimensionMismatch { what: "price relatives", expected: assets, found: w.len() });
                }
                if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidParameter("price relatives must be strictly positive".into()));
                }
            }
        }
    }
    for (i, pt) in grid.iter().enumerate() {
        if pt.len() != assets {
            return Err(Error::DimensionMismatch { what: "grid point", expected: assets, found: pt.len() });
        }
        let sum: f64 = pt.iter().sum();
        if pt.iter().any(|&v| !(v >= 0.0)) || sum > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!("grid point {i} is outside the simplex")));
        }
    }

    let a = grid.len();
    let bank = libm::exp(r_bank);
    let mut kernel = vec![0.0; s * a * s];
    let mut weights = vec![0.0; s * a * s];
    for x in 0..s {
        for (ai, pt) in grid.iter().enumerate() {
            let mut qmu = vec![0.0; s];
            for y in 0..s {
                let mut mu = 0.0;
                for (prob, w) in &laws[x][y].atoms {
                    let bracket = bank
                        + pt.iter().zip(w).map(|(ak, wk)| ak * (wk - bank)).sum::<f64>();
                    if !(bracket > 0.0) {
                        return Err(Error::NonpositiveWealthFactor { x, action: ai, y });
                    }
                    mu += prob * libm::exp(-0.5 * theta * libm::log(bracket));
                }
                qmu[y] = q[x][y] * mu;
            }
            let total: f64 = qmu.iter().sum();
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::ZeroDenominator { x, action: ai });
            }
            let o = (x * a + ai) * s;
            for y in 0..s {
                kernel[o + y] = qmu[y] / total;
                weights[o + y] = total;
            }
        }
    }
    let actions = grid
        .iter()
        .map(|pt| {
            let parts: Vec<String> = pt.iter().map(|v| format!("{v}")).collect();
            format!("[{}]", parts.join(","))
        })
        .collect();
    MdpModel::new(
        index_labels(s),
        actions,
        kernel,
        weights,
        format!(
            "portfolio: theta={theta}, r_bank={r_bank}; lambda is the growth rate of E[exp(-(theta/2) log V_n)]"
        ),
    )
}

/// All points of the simplex `{a ≥ 0, Σ a ≤ 1}` in `m` dimensions whose
/// coordinates are multiples of `1/k`, in lexicographic order.
pub fn simplex_grid(m: usize, k: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == m {
            out.push(cur.iter().map(|&c| c as f64 / k as f64).collect());
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(m, k, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        out.push(vec![0.0; m]);
        return out;
    }
    rec(m, k, k, &mut Vec::new(), &mut out);
    out
}

/// Slowest-exit model on `S₁ = S \ S₀`.
///
/// With `d(i,u) = Σ_{j∈S₁} p(j|i,u)` the kernel is `p(j|i,u)/d(i,u)` on
/// `S₁` and the weight is `d(i,u)`, so `E[Π weights] = P(τ > n)`.
pub fn gen_exit_model(family: &[Vec<Vec<f64>>], exit_set: &[usize]) -> Result<MdpModel> {
    let a = family.len();
    if a == 0 {
        return Err(Error::InvalidParameter("at least one matrix is required".into()));
    }
    let n = family[0].len();
    for (u, p) in family.iter().enumerate() {
        if p.len() != n || p.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { what: "exit matrix", expected: n, found: p.len() });
        }
        for (i, row) in p.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "row {i} of matrix {u} is not a distribution"
                )));
            }
        }
    }
    if exit_set.iter().any(|&i| i >= n) {
        return Err(Error::InvalidParameter("exit state out of range".into()));
    }
    let keep: Vec<usize> = (0..n).filter(|i| !exit_set.contains(i)).collect();
    if exit_set.is_empty() || keep.is_empty() {
        return Err(Error::InvalidParameter("exit set must be a nonempty proper subset".into()));
    }
    let s = keep.len();
    let mut kernel = vec![0.0; s * a * s];
    let mut weights = vec![0.0; s * a * s];
    for (xi, &i) in keep.iter().enumerate() {
        for (u, p) in family.iter().enumerate() {
            let d: f64 = keep.iter().map(|&j| p[i][j]).sum();
            if !(d > 0.0) {
                return Err(Error::CertainExit { state: i, action: u });
            }
            let o = (xi * a + u) * s;
            for (yj, &j) in keep.iter().enumerate() {
                kernel[o + yj] = p[i][j] / d;
                weights[o + yj] = d;
            }
        }
    }
    let states = keep.iter().map(|i| format!("{i}")).collect();
    MdpModel::new(
        states,
        index_labels(a),
        kernel,
        weights,
        String::from("exit rate: lambda = slowest decay rate of P(tau > n)"),
    )
}

pub(crate) fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Random model with every kernel entry and weight strictly positive.
///
/// Kernel rows are normalized uniform(0.05, 1) draws; log-weights are
/// uniform in `[-log_spread, log_spread]`.
pub fn random_positive_model(s: usize, a: usize, seed: u64, log_spread: f64) -> MdpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernel = vec![0.0; s * a * s];
    let mut weights = vec![0.0; s * a * s];
    for row in kernel.chunks_mut(s) {
        for k in row.iter_mut() {
            *k = 0.05 + 0.95 * unit_f64(&mut rng);
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|k| *k /= sum);
    }
    for w in weights.iter_mut() {
        *w = libm::exp(log_spread * (2.0 * unit_f64(&mut rng) - 1.0));
    }
    MdpModel::indexed(s, a, kernel, weights)
        .expect("shapes are consistent")
        .with_metadata(format!("random positive model s={s} a={a} seed={seed}"))
}
