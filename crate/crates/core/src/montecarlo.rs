//! Monte Carlo estimates of the growth rate under a fixed stationary policy.
//!
//! Path `k` draws from ChaCha8 keyed by `seed`, on stream `k`; step `m` uses
//! the two `u64` words at positions `2m` and `2m + 1` (action, then next
//! state). Any path can be regenerated on its own and results do not depend
//! on evaluation order.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::generators::unit_f64;
use crate::model::{MdpModel, Policy};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `X_0 .. X_n`.
    pub states: Vec<usize>,
    /// `U_0 .. U_{n-1}`.
    pub actions: Vec<usize>,
    /// `Σ log weights`; `−∞` once a zero weight is crossed.
    pub log_product: ExtReal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub n: usize,
    pub paths: usize,
    pub batches: usize,
    pub x0: usize,
    pub seed: u64,
}

impl McOptions {
    pub fn new(n: usize, paths: usize, seed: u64) -> Self {
        McOptions {
            n,
            paths,
            batches: 20,
            x0: 0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEstimate {
    /// `(1/n) log` of the sample mean of the path products.
    pub point: ExtReal,
    /// Standard error from the spread of per-batch estimates. `None` when a
    /// batch has no surviving path.
    pub stderr: Option<f64>,
    /// Sample mean of `(1/n) log_product`, for comparison; `−∞` if any path
    /// died.
    pub mean_log: ExtReal,
    pub n: usize,
    pub paths: usize,
    pub batches: usize,
    pub seed: u64,
}

fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn check(model: &MdpModel, policy: &Policy, n: usize, x0: usize) -> Result<()> {
    policy.check_against(model)?;
    if n == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if x0 >= model.n_states() {
        return Err(Error::InvalidParameter("initial state out of range".into()));
    }
    Ok(())
}

fn run_path(model: &MdpModel, policy: &Policy, n: usize, x0: usize, seed: u64, path: u64, keep: bool) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let mut states = Vec::new();
    let mut actions = Vec::new();
    if keep {
        states.reserve(n + 1);
        actions.reserve(n);
        states.push(x0);
    }
    let mut x = x0;
    let mut log = 0.0;
    let mut dead = false;
    for _ in 0..n {
        let ua = unit_f64(&mut rng);
        let uy = unit_f64(&mut rng);
        let u = pick(policy.row(x), ua);
        let y = pick(model.kernel_row(x, u), uy);
        let w = model.weight(x, u, y);
        if w > 0.0 {
            log += libm::log(w);
        } else {
            dead = true;
        }
        if keep {
            actions.push(u);
            states.push(y);
        }
        x = y;
    }
    Trajectory {
        states,
        actions,
        log_product: if dead { ExtReal::NegInf } else { ExtReal::Finite(log) },
    }
}

/// One trajectory of length `n` from `x0`: path 0 of the given seed.
pub fn simulate(model: &MdpModel, policy: &Policy, n: usize, x0: usize, seed: u64) -> Result<Trajectory> {
    simulate_path(model, policy, n, x0, seed, 0)
}

/// Trajectory number `path` of the stream family keyed by `seed`.
pub fn simulate_path(
    model: &MdpModel,
    policy: &Policy,
    n: usize,
    x0: usize,
    seed: u64,
    path: u64,
) -> Result<Trajectory> {
    check(model, policy, n, x0)?;
    Ok(run_path(model, policy, n, x0, seed, path, true))
}

/// `log Σ exp(v)` over the finite entries, `None` if there are none.
fn log_sum_exp(v: &[f64]) -> Option<f64> {
    let m = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let s: f64 = v.iter().filter(|x| x.is_finite()).map(|x| libm::exp(x - m)).sum();
    Some(m + libm::log(s))
}

/// Estimates `(1/n) log E[Π weights]` under `policy` from `opts.paths`
/// independent paths.
pub fn estimate_growth(model: &MdpModel, policy: &Policy, opts: &McOptions) -> Result<GrowthEstimate> {
    check(model, policy, opts.n, opts.x0)?;
    if opts.batches < 2 {
        return Err(Error::InvalidParameter("need at least 2 batches".into()));
    }
    if opts.paths == 0 || opts.paths % opts.batches != 0 {
        return Err(Error::InvalidParameter("paths must be a positive multiple of batches".into()));
    }
    let logs: Vec<f64> = (0..opts.paths as u64)
        .map(|k| run_path(model, policy, opts.n, opts.x0, opts.seed, k, false).log_product.to_f64())
        .collect();
    let n = opts.n as f64;
    let total = log_sum_exp(&logs).ok_or(Error::AllPathsDead)?;
    let point = (total - libm::log(opts.paths as f64)) / n;

    let per = opts.paths / opts.batches;
    let mut batch_points = Vec::with_capacity(opts.batches);
    for chunk in logs.chunks(per) {
        match log_sum_exp(chunk) {
            Some(t) => batch_points.push((t - libm::log(per as f64)) / n),
            None => break,
        }
    }
    let stderr = (batch_points.len() == opts.batches).then(|| {
        let b = opts.batches as f64;
        let p0 = batch_points[0];
        let mean = p0 + batch_points.iter().map(|p| p - p0).sum::<f64>() / b;
        let var = batch_points.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (b - 1.0);
        libm::sqrt(var / b)
    });
    let mean_log = if logs.iter().all(|v| v.is_finite()) {
        ExtReal::Finite(logs.iter().sum::<f64>() / (opts.paths as f64 * n))
    } else {
        ExtReal::NegInf
    };
    Ok(GrowthEstimate {
        point: ExtReal::Finite(point),
        stderr,
        mean_log,
        n: opts.n,
        paths: opts.paths,
        batches: opts.batches,
        seed: opts.seed,
    })
}
