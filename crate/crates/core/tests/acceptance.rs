mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskgrowth::generators::{
    gen_graph_model, gen_portfolio_model, random_positive_model, simplex_grid, PortfolioParams,
    PriceLaw,
};
use riskgrowth::variational::sweep_is_monotone;
use riskgrowth::{
    apply_t, apply_tn, cw_bounds, dual_bound, enumerate_policy_gains, epsilon_sweep,
    estimate_growth, fixed_policy_gain, maximize, objective_psi0, random_feasible, solve_eigen,
    stationarity_residual, twisted_occupation, EigenOptions, EigenSolution, Error, MaximizeOptions,
    McOptions, MdpModel, Policy,
};

type Check = Result<String, String>;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn positive_vec(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<f64> {
    (0..n).map(|_| (spread * (2.0 * unit(rng) - 1.0)).exp()).collect()
}

/// Twenty positive models with 1..=6 states and 1..=4 actions.
fn suite() -> Vec<MdpModel> {
    (0..20)
        .map(|k| random_positive_model(1 + k % 6, 1 + (k / 6) % 4, 1000 + k as u64, 0.7))
        .collect()
}

fn solve(m: &MdpModel) -> Result<EigenSolution, String> {
    solve_eigen(m, &EigenOptions::default()).map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn strong_duality() -> Check {
    let mut worst: f64 = 0.0;
    for (k, m) in suite().iter().enumerate() {
        let sol = solve(m)?;
        let eta = twisted_occupation(m, &sol).map_err(|e| e.to_string())?;
        let primal = objective_psi0(m, &eta).map_err(|e| e.to_string())?.to_f64();
        let g: Vec<f64> = sol.psi.iter().map(|p| p.ln()).collect();
        let dual = dual_bound(m, &g).map_err(|e| e.to_string())?;
        let err = (primal - sol.log_rho).abs().max((dual - sol.log_rho).abs());
        ensure(err <= 1e-8, || format!("model {k}: duality error {err:e}"))?;
        worst = worst.max(err);
    }
    Ok(format!("max error {worst:.1e}"))
}

fn policy_optimality() -> Check {
    let opts = EigenOptions::default();
    let mut worst: f64 = 0.0;
    for (k, m) in suite().iter().enumerate() {
        let sol = solve(m)?;
        let table = enumerate_policy_gains(m, 1 << 20, &opts).map_err(|e| e.to_string())?;
        let best = table.best_gain.to_f64();
        let err = (best - sol.log_rho).abs();
        ensure(err <= 1e-8, || format!("model {k}: enumeration off by {err:e}"))?;
        let v_gain = fixed_policy_gain(m, &sol.v_star, &opts).map_err(|e| e.to_string())?;
        let same = table.best_policy == sol.v_star;
        ensure(same || (v_gain - best).abs() <= 1e-8, || {
            format!("model {k}: v_star is not an argmax")
        })?;
        worst = worst.max(err);
    }
    Ok(format!("max error {worst:.1e}"))
}

fn cw_sandwich() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut widest: f64 = 0.0;
    for (k, m) in suite().iter().enumerate() {
        let sol = solve(m)?;
        for _ in 0..100 {
            let f = positive_vec(&mut rng, m.n_states(), 3.0);
            let (lo, hi) = cw_bounds(m, &f).map_err(|e| e.to_string())?;
            let slack = 1e-12 * sol.rho;
            ensure(lo <= sol.rho + slack && sol.rho <= hi + slack, || {
                format!("model {k}: [{lo}, {hi}] misses {}", sol.rho)
            })?;
        }
        let (lo, hi) = cw_bounds(m, &sol.psi).map_err(|e| e.to_string())?;
        ensure(hi - lo <= 1e-8 * sol.rho, || format!("model {k}: width {:e} at psi", hi - lo))?;
        widest = widest.max((hi - lo) / sol.rho);
    }
    Ok(format!("relative width at psi {widest:.1e}"))
}

fn weak_duality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut primal_gap, mut dual_gap) = (f64::INFINITY, f64::INFINITY);
    for (k, m) in suite().iter().enumerate() {
        let sol = solve(m)?;
        for j in 0..100 {
            let eta = random_feasible(m, 7919 * k as u64 + j).map_err(|e| e.to_string())?;
            let v = objective_psi0(m, &eta).map_err(|e| e.to_string())?.to_f64();
            ensure(v <= sol.log_rho + 1e-9, || format!("model {k}: Ψ₀ = {v} above λ"))?;
            primal_gap = primal_gap.min(sol.log_rho - v);
            let g: Vec<f64> = (0..m.n_states()).map(|_| 4.0 * unit(&mut rng) - 2.0).collect();
            let d = dual_bound(m, &g).map_err(|e| e.to_string())?;
            ensure(d >= sol.log_rho - 1e-9, || format!("model {k}: dual {d} below λ"))?;
            dual_gap = dual_gap.min(d - sol.log_rho);
        }
    }
    Ok(format!("closest primal {primal_gap:.1e}, closest dual {dual_gap:.1e}"))
}

fn golden_ratio() -> Check {
    let fib = fibonacci();
    let opts = EigenOptions { eps_fallback: Some(1e-9), ..EigenOptions::default() };
    let sol = solve_eigen(&fib, &opts).map_err(|e| e.to_string())?;
    let adj = vec![vec![true, true], vec![true, false]];
    let n40 = walk_counts(&adj, 40)[0] as f64;
    let n39 = walk_counts(&adj, 39)[0] as f64;
    let count_rho = n40 / n39;
    ensure((count_rho - GOLDEN).abs() <= 1e-12, || format!("count ratio {count_rho}"))?;
    ensure((sol.rho - count_rho).abs() <= 1e-6, || format!("rho {} vs {count_rho}", sol.rho))?;

    let reg = riskgrowth::epsilon_model(&fib, &riskgrowth::EpsilonParams::uniform(2, 1e-9))
        .map_err(|e| e.to_string())?;
    let eta = twisted_occupation(&reg, &sol).map_err(|e| e.to_string())?;
    let p01 = eta.eta2(0, 0).ok_or("state 0 has no mass")?[1];
    // entropy rate of the chain that leaves 0 for 1 with probability p
    let h = |p: f64| -(p * p.ln() + (1.0 - p) * (1.0 - p).ln()) / (1.0 + p);
    let grid_p = (1..1_000_000)
        .map(|i| i as f64 * 1e-6)
        .max_by(|a, b| h(*a).total_cmp(&h(*b)))
        .unwrap();
    ensure((p01 - 0.38197).abs() <= 1e-4 && (p01 - grid_p).abs() <= 1e-4, || {
        format!("pi(1|0) = {p01}, grid maximizer {grid_p}")
    })?;
    Ok(format!("rho {:.9}, pi(1|0) {p01:.6}", sol.rho))
}

fn exit_rate() -> Check {
    let m = walk_exit_model();
    let sol = solve(&m)?;
    let p = walk_matrix(5);
    let block: Vec<f64> = (1..4).flat_map(|i| (1..4).map(move |j| (i, j))).map(|(i, j)| p[i][j]).collect();
    let oracle = dense_power_iteration(&block, 3, 2000).ln();
    let exact = (std::f64::consts::FRAC_PI_4).cos().ln();
    ensure((oracle - exact).abs() <= 1e-12, || format!("oracle {oracle}, exact {exact}"))?;
    let err = (sol.log_rho - oracle).abs();
    ensure(err <= 1e-8, || format!("lambda {} vs {oracle}", sol.log_rho))?;
    Ok(format!("error {err:.1e}"))
}

fn portfolio() -> Check {
    let (theta, r_bank) = (1.5, 0.03);
    let law = |s: f64| PriceLaw {
        atoms: vec![(0.4, vec![s]), (0.3, vec![1.25]), (0.3, vec![2.1 - s])],
    };
    let q = vec![vec![0.7, 0.3], vec![0.2, 0.8]];
    let laws = vec![vec![law(0.9), law(1.05)], vec![law(0.8), law(1.15)]];
    let bank = PortfolioParams {
        q: q.clone(),
        laws: laws.clone(),
        theta,
        r_bank,
        grid: vec![vec![0.0]],
    };
    let m = gen_portfolio_model(&bank).map_err(|e| e.to_string())?;
    let bank_err = (solve(&m)?.log_rho + 0.5 * theta * r_bank).abs();
    ensure(bank_err <= 1e-12, || format!("bank-only error {bank_err:e}"))?;

    let grid = simplex_grid(1, 4);
    let params = PortfolioParams { q, laws, theta, r_bank, grid };
    let m = gen_portfolio_model(&params).map_err(|e| e.to_string())?;
    let sol = solve(&m)?;
    let table = enumerate_policy_gains(&m, 1 << 20, &EigenOptions::default()).map_err(|e| e.to_string())?;
    let err = (table.best_gain.to_f64() - sol.log_rho).abs();
    ensure(err <= 1e-8, || format!("enumeration off by {err:e}"))?;
    Ok(format!("bank-only {bank_err:.1e}, 2x5 instance {err:.1e}"))
}

fn epsilon_family() -> Check {
    let adj = vec![vec![true, true, false], vec![true, false, true], vec![false, true, false]];
    let m = gen_graph_model(&[adj]).map_err(|e| e.to_string())?;
    let grid = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let opts = EigenOptions::default();
    let points = epsilon_sweep(&m, &grid, &[1.0 / 3.0; 3], &opts).map_err(|e| e.to_string())?;
    ensure(points.iter().all(|p| p.converged), || "a sweep point did not converge".into())?;
    ensure(sweep_is_monotone(&points, 1e-9), || format!("not monotone: {points:?}"))?;
    let fallback = solve_eigen(&m, &EigenOptions { eps_fallback: Some(1e-9), ..opts })
        .map_err(|e| e.to_string())?;
    let last = points.last().and_then(|p| p.lambda_eps).ok_or("missing last point")?;
    let err = (last - fallback.log_rho).abs();
    ensure(err <= 1e-3, || format!("lambda_1e-6 {last} vs fallback {}", fallback.log_rho))?;
    Ok(format!("lambda_0.1 {:.6}, lambda_1e-6 {last:.6}", points[0].lambda_eps.unwrap()))
}

fn operator_laws() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..50u64 {
        let (s, a) = (1 + (k % 5) as usize, 1 + (k % 3) as usize);
        let m = random_positive_model(s, a, 5000 + k, 1.0);
        let f = positive_vec(&mut rng, s, 2.0);
        let g: Vec<f64> = f.iter().map(|v| v * (1.0 + unit(&mut rng))).collect();
        let (mm, nn) = (1 + (k % 4) as usize, 1 + (k % 7) as usize);
        let whole = apply_tn(&m, &f, mm + nn).map_err(|e| e.to_string())?;
        let split = apply_tn(&m, &apply_tn(&m, &f, nn).unwrap(), mm).unwrap();
        for (w, v) in whole.iter().zip(&split) {
            ensure(rel(*w, *v) <= 1e-10, || format!("triple {k}: semigroup {w} vs {v}"))?;
        }
        let (tf, _) = apply_t(&m, &f).unwrap();
        let (tg, _) = apply_t(&m, &g).unwrap();
        ensure(tf.iter().zip(&tg).all(|(x, y)| x <= y), || format!("triple {k}: not monotone"))?;
        let c = 0.1 + 5.0 * unit(&mut rng);
        let scaled: Vec<f64> = f.iter().map(|v| c * v).collect();
        let (tc, _) = apply_t(&m, &scaled).unwrap();
        for (x, y) in tc.iter().zip(&tf) {
            ensure(rel(*x, c * y) <= 1e-12, || format!("triple {k}: not homogeneous"))?;
        }
    }
    Ok("50 triples".into())
}

/// `(1/n) log (M_v^n 𝟙)(x0)`, the exact target of the estimator.
fn finite_horizon_rate(m: &MdpModel, v: &Policy, n: usize, x0: usize) -> f64 {
    let s = m.n_states();
    let g = v.gain_matrix(m).unwrap();
    let mut f = vec![1.0; s];
    let mut log_scale = 0.0;
    for _ in 0..n {
        let next: Vec<f64> = (0..s).map(|x| (0..s).map(|y| g[x * s + y] * f[y]).sum()).collect();
        let top = next.iter().cloned().fold(0.0, f64::max);
        log_scale += top.ln();
        f = next.iter().map(|v| v / top).collect();
    }
    (log_scale + f[x0].ln()) / n as f64
}

fn monte_carlo() -> Check {
    let mut report = Vec::new();
    for k in 0..5u64 {
        let m = random_positive_model(2 + (k % 3) as usize, 2, 300 + k, 0.2);
        let sol = solve(&m)?;
        let est = estimate_growth(&m, &sol.v_star, &McOptions::new(200, 10_000, k))
            .map_err(|e| e.to_string())?;
        let se = est.stderr.ok_or("no stderr")?;
        let exact = finite_horizon_rate(&m, &sol.v_star, 200, 0);
        let point = est.point.to_f64();
        let dev = (point - exact).abs();
        ensure(dev <= 3.0 * se, || format!("model {k}: deviation {dev:e} > 3 x {se:e}"))?;
        let transient = (exact - sol.log_rho).abs();
        ensure((point - sol.log_rho).abs() <= 3.0 * se + transient, || {
            format!("model {k}: {point} vs log rho {} beyond 3 x {se:e} + {transient:e}", sol.log_rho)
        })?;
        report.push(format!("{:.1}", dev / se));
    }
    let c: f64 = 0.37;
    let chain = MdpModel::indexed(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![c.exp(); 4]).unwrap();
    let one = Policy::deterministic(&[0, 0], 1).unwrap();
    let est = estimate_growth(&chain, &one, &McOptions::new(10, 40, 1)).map_err(|e| e.to_string())?;
    let err = (est.point.to_f64() - c).abs();
    ensure(err <= 1e-14 && est.stderr == Some(0.0), || {
        format!("deterministic chain: error {err:e}, stderr {:?}", est.stderr)
    })?;
    Ok(format!("deviations from the n = 200 rate in stderr units [{}]", report.join(", ")))
}

fn maximizer() -> Check {
    let mut worst: f64 = 0.0;
    for k in 0..10u64 {
        let m = random_positive_model(2 + (k % 4) as usize, 1 + (k % 3) as usize, 700 + k, 0.5);
        let sol = solve(&m)?;
        let opts = MaximizeOptions { seed: k, ..MaximizeOptions::default() };
        let out = match maximize(&m, &opts, None) {
            Ok(o) => o,
            Err(Error::MaximizerNoConvergence(o)) => *o,
            Err(e) => return Err(e.to_string()),
        };
        let residual = stationarity_residual(&out.eta_hat).1;
        ensure(out.value >= sol.log_rho - 1e-4, || format!("model {k}: value {} far below", out.value))?;
        ensure(out.value <= sol.log_rho + 1e-9, || format!("model {k}: value {} above λ", out.value))?;
        ensure(residual <= 1e-6, || format!("model {k}: residual {residual:e}"))?;
        worst = worst.max(sol.log_rho - out.value);
    }
    Ok(format!("largest gap {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("strong duality on 20 positive models", strong_duality),
        ("policy enumeration matches log rho", policy_optimality),
        ("Collatz-Wielandt sandwich", cw_sandwich),
        ("weak duality for random measures and multipliers", weak_duality),
        ("golden-ratio capacity", golden_ratio),
        ("random-walk exit rate", exit_rate),
        ("portfolio sanity", portfolio),
        ("epsilon family", epsilon_family),
        ("semigroup and operator laws", operator_laws),
        ("Monte Carlo agreement", monte_carlo),
        ("variational maximizer", maximizer),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        match result {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail} ({ms:.0} ms)", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {why} ({ms:.0} ms)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
