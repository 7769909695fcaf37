#![allow(dead_code)]

use nalgebra::DMatrix;
use riskgrowth::generators::{gen_exit_model, gen_graph_model};
use riskgrowth::MdpModel;

pub const GOLDEN: f64 = 1.618_033_988_749_895;

pub fn fibonacci() -> MdpModel {
    gen_graph_model(&[vec![vec![true, true], vec![true, false]]]).unwrap()
}

/// Number of length-`n` walks starting at each vertex, by explicit
/// recursion over walks.
pub fn walk_counts(adj: &[Vec<bool>], n: usize) -> Vec<u128> {
    fn count(adj: &[Vec<bool>], x: usize, n: usize, memo: &mut Vec<Vec<Option<u128>>>) -> u128 {
        if n == 0 {
            return 1;
        }
        if let Some(c) = memo[x][n] {
            return c;
        }
        let c = (0..adj.len())
            .filter(|&y| adj[x][y])
            .map(|y| count(adj, y, n - 1, memo))
            .sum();
        memo[x][n] = Some(c);
        c
    }
    let mut memo = vec![vec![None; n + 1]; adj.len()];
    (0..adj.len()).map(|x| count(adj, x, n, &mut memo)).collect()
}

/// Naive enumeration of all binary words of length `n` with no two
/// consecutive ones, split by first symbol.
pub fn no_two_ones_words(n: usize) -> (u64, u64) {
    let (mut zero, mut one) = (0, 0);
    for w in 0u64..(1 << n) {
        if w & (w >> 1) != 0 {
            continue;
        }
        if (w >> (n - 1)) & 1 == 0 {
            zero += 1;
        } else {
            one += 1;
        }
    }
    (zero, one)
}

/// Simple random walk on `{0..n-1}` with absorbing ends.
pub fn walk_matrix(n: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; n]; n];
    p[0][0] = 1.0;
    p[n - 1][n - 1] = 1.0;
    for i in 1..n - 1 {
        p[i][i - 1] = 0.5;
        p[i][i + 1] = 0.5;
    }
    p
}

pub fn walk_exit_model() -> MdpModel {
    gen_exit_model(&[walk_matrix(5)], &[0, 4]).unwrap()
}

/// Largest eigenvalue modulus from nalgebra's dense Schur decomposition.
pub fn dense_spectral_radius(m: &[f64], n: usize) -> f64 {
    let a = DMatrix::from_row_slice(n, n, m);
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Power iteration with nalgebra on `M + I`, which removes the oscillation
/// of periodic matrices; ratio of successive 1-norms minus one.
pub fn dense_power_iteration(m: &[f64], n: usize, steps: usize) -> f64 {
    let a = DMatrix::from_row_slice(n, n, m) + DMatrix::identity(n, n);
    let mut v = nalgebra::DVector::from_element(n, 1.0);
    let mut r = 0.0;
    for _ in 0..steps {
        let w = &a * &v;
        r = w.lp_norm(1) / v.lp_norm(1);
        v = w / r;
    }
    r - 1.0
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
