//! Small dense helpers: Gaussian elimination, stationary distributions and
//! graph connectivity. Matrices are row-major `n × n` slices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `1e-13` times the largest entry.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            rhs.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for k in r + 1..n {
            acc -= m[r * n + k] * x[k];
        }
        x[r] = acc / m[r * n + r];
    }
    Some(x)
}

/// Stationary distribution `π P = π`, `Σ π = 1` of a row-stochastic matrix.
///
/// Solves the transposed system with the last equation replaced by the
/// normalization, then applies one step of iterative refinement.
pub fn stationary_distribution(p: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // row i of A is the i-th balance equation: Σ_j π_j P(j,i) - π_i = 0
            a[i * n + j] = p[j * n + i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut pi = solve(&a, &b, n).ok_or(Error::SingularChain)?;
    let r: Vec<f64> = (0..n)
        .map(|i| b[i] - (0..n).map(|j| a[i * n + j] * pi[j]).sum::<f64>())
        .collect();
    if let Some(dx) = solve(&a, &r, n) {
        pi.iter_mut().zip(&dx).for_each(|(p, d)| *p += d);
    }
    let scale = pi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if pi.iter().any(|&v| v < -1e-9 * scale) {
        return Err(Error::SingularChain);
    }
    pi.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SingularChain);
    }
    pi.iter_mut().for_each(|v| *v /= total);
    Ok(pi)
}

/// Stationary distribution of a possibly reducible row-stochastic matrix:
/// the unique one when it exists, otherwise the one supported on the first
/// closed communicating class.
pub fn any_stationary_distribution(p: &[f64], n: usize) -> Result<Vec<f64>> {
    if let Ok(pi) = stationary_distribution(p, n) {
        return Ok(pi);
    }
    let comps = strongly_connected_components(n, |i, j| p[i * n + j] > 0.0);
    let closed = comps
        .iter()
        .find(|c| c.iter().all(|&i| (0..n).all(|j| p[i * n + j] <= 0.0 || c.contains(&j))))
        .ok_or(Error::SingularChain)?;
    let k = closed.len();
    let mut sub = vec![0.0; k * k];
    for (a, &i) in closed.iter().enumerate() {
        for (b, &j) in closed.iter().enumerate() {
            sub[a * k + b] = p[i * n + j];
        }
    }
    let local = stationary_distribution(&sub, k)?;
    let mut pi = vec![0.0; n];
    for (a, &i) in closed.iter().enumerate() {
        pi[i] = local[a];
    }
    Ok(pi)
}

/// `y = M x`.
pub fn mat_vec(m: &[f64], x: &[f64], n: usize, y: &mut [f64]) {
    for (i, out) in y.iter_mut().enumerate().take(n) {
        *out = m[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn reach(n: usize, start: usize, edge: &dyn Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for w in 0..n {
            if !seen[w] && edge(v, w) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Strong connectivity of the directed graph on `0..n` with the given edge
/// predicate.
pub fn is_strongly_connected(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    if n == 0 {
        return false;
    }
    reach(n, 0, &edge).iter().all(|&b| b) && reach(n, 0, &|a, b| edge(b, a)).iter().all(|&b| b)
}

/// Strongly connected components, each as a sorted list of vertices.
/// Components are returned in order of their smallest vertex.
pub fn strongly_connected_components(
    n: usize,
    edge: impl Fn(usize, usize) -> bool,
) -> Vec<Vec<usize>> {
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for v in 0..n {
        if assigned[v] {
            continue;
        }
        let fwd = reach(n, v, &edge);
        let bwd = reach(n, v, &|a, b| edge(b, a));
        let comp: Vec<usize> = (0..n).filter(|&w| fwd[w] && bwd[w]).collect();
        for &w in &comp {
            assigned[w] = true;
        }
        out.push(comp);
    }
    out
}
