use std::io::Write;
use std::path::Path;
use std::time::Instant;

use riskgrowth::generators::{gen_exit_model, gen_graph_model, gen_portfolio_model, simplex_grid};
use riskgrowth::variational::sweep_is_monotone;
use riskgrowth::{
    cw_bounds, epsilon_model, epsilon_sweep, estimate_growth, maximize, solve_eigen, validate,
    Certificate, EigenOptions, EigenSolution, EpsilonParams, Error, MaximizeOptions,
    MaximizeOutcome, McOptions, MdpModel,
};

use crate::io::{self, IoError};
use crate::json::{format_f64, tensor, Value};
use crate::{Cli, Command, GenKind, EXIT_INVALID, EXIT_IO, EXIT_NO_CONVERGENCE, EXIT_OK, EXIT_USAGE, TOOL_VERSION};

#[derive(Debug)]
pub enum Failure {
    Io(IoError),
    Usage(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Io(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Io(IoError::Model(e))
    }
}

type Outcome = Result<(String, i32), Failure>;

fn kind_name(e: &Error) -> &'static str {
    match e {
        Error::DimensionMismatch { .. } => "DimensionMismatch",
        Error::NotStochastic { .. } => "NotStochastic",
        Error::InvalidWeight { .. } => "InvalidWeight",
        Error::InvalidParameter(_) => "InvalidParameter",
        Error::InvalidPolicy(_) => "InvalidPolicy",
        Error::DanglingVertex { .. } => "DanglingVertex",
        Error::NonpositiveWealthFactor { .. } => "NonpositiveWealthFactor",
        Error::ZeroDenominator { .. } => "ZeroDenominator",
        Error::CertainExit { .. } => "CertainExit",
        Error::NonpositiveF { .. } => "NonpositiveF",
        Error::NoConvergence(_) => "NoConvergence",
        Error::ReducibleGain => "ReducibleGain",
        Error::TooManyPolicies { .. } => "TooManyPolicies",
        Error::NotDistribution { .. } => "NotDistribution",
        Error::NotConverged => "NotConverged",
        Error::RowSumViolation { .. } => "RowSumViolation",
        Error::SingularChain => "SingularChain",
        Error::MaximizerNoConvergence(_) => "MaximizerNoConvergence",
        Error::DeadState { .. } => "DeadState",
        Error::ZeroGainRow { .. } => "ZeroGainRow",
        Error::AllPathsDead => "AllPathsDead",
    }
}

pub fn error_doc(kind: &str, message: &str, code: i32, detail: Option<(&str, Value)>) -> Value {
    let mut err = Value::obj()
        .with("kind", kind)
        .with("message", message)
        .with("exit_code", code as usize);
    if let Some((k, v)) = detail {
        err = err.with(k, v);
    }
    Value::obj().with("error", err)
}

fn violations_json(v: &[riskgrowth::RowViolation]) -> Value {
    Value::Arr(
        v.iter()
            .map(|r| {
                Value::obj()
                    .with("x", r.x)
                    .with("u", r.u)
                    .with("sum", r.sum)
                    .with("min_entry", r.min_entry)
            })
            .collect(),
    )
}

fn failure_doc(f: &Failure) -> (Value, i32) {
    match f {
        Failure::Usage(msg) => (error_doc("Usage", msg, EXIT_USAGE, None), EXIT_USAGE),
        Failure::Io(e) => {
            let msg = e.to_string();
            match e {
                IoError::Io { .. } => (error_doc("Io", &msg, EXIT_IO, None), EXIT_IO),
                IoError::Parse { line, column, .. } => {
                    let at = Value::obj().with("line", *line).with("column", *column);
                    (error_doc("ParseError", &msg, EXIT_INVALID, Some(("position", at))), EXIT_INVALID)
                }
                IoError::Schema { field, .. } => (
                    error_doc("SchemaError", &msg, EXIT_INVALID, Some(("field", field.as_str().into()))),
                    EXIT_INVALID,
                ),
                IoError::Model(m) => {
                    let code = match m {
                        Error::NoConvergence(_) | Error::MaximizerNoConvergence(_) => EXIT_NO_CONVERGENCE,
                        _ => EXIT_INVALID,
                    };
                    let detail = match m {
                        Error::NotStochastic { violations } => Some(("violations", violations_json(violations))),
                        _ => None,
                    };
                    (error_doc(kind_name(m), &msg, code, detail), code)
                }
            }
        }
    }
}

/// Runs a parsed command and returns the stdout document and exit code.
pub fn dispatch(cli: &Cli, err: &mut dyn Write) -> (String, i32) {
    let clock = Clock::new(!cli.no_timings);
    let result = match &cli.command {
        Command::Validate { model } => cmd_validate(model),
        Command::Solve {
            model,
            tol,
            max_iter,
            eps_fallback,
        } => cmd_solve(
            model,
            &EigenOptions {
                tol: *tol,
                max_iter: *max_iter,
                eps_fallback: *eps_fallback,
            },
            clock,
            err,
        ),
        Command::Variational {
            model,
            iters,
            step,
            penalty,
            tol,
            seed,
        } => cmd_variational(
            model,
            &MaximizeOptions {
                iters: *iters,
                step: *step,
                penalty: *penalty,
                tol: *tol,
                seed: *seed,
            },
            clock,
            err,
        ),
        Command::Bounds { model, f } => cmd_bounds(model, f),
        Command::Mc {
            model,
            policy,
            n,
            paths,
            batches,
            x0,
            seed,
        } => cmd_mc(
            model,
            policy,
            &McOptions {
                n: *n,
                paths: *paths,
                batches: *batches,
                x0: *x0,
                seed: *seed,
            },
            clock,
        ),
        Command::Gen { kind } => cmd_gen(kind),
        Command::EpsSweep {
            model,
            grid,
            gamma,
            tol,
            max_iter,
            out,
        } => cmd_sweep(model, grid, gamma, *tol, *max_iter, out),
    };
    match result {
        Ok(ok) => ok,
        Err(f) => {
            let (doc, code) = failure_doc(&f);
            let _ = writeln!(err, "error: {}", match &f {
                Failure::Io(e) => e.to_string(),
                Failure::Usage(m) => m.clone(),
            });
            (doc.render(), code)
        }
    }
}

#[derive(Clone, Copy)]
struct Clock {
    enabled: bool,
    start: Instant,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Clock {
            enabled,
            start: Instant::now(),
        }
    }

    fn ms(since: Instant) -> f64 {
        since.elapsed().as_secs_f64() * 1e3
    }

    /// Appends a `timings` object unless timings are disabled.
    fn attach(&self, doc: Value, phases: &[(&str, f64)]) -> Value {
        if !self.enabled {
            return doc;
        }
        let mut t = Value::obj();
        for (k, v) in phases {
            t = t.with(k, *v);
        }
        doc.with("timings", t.with("total_ms", Self::ms(self.start)))
    }
}

/// Loads and validates, renormalizing rows that are only slightly off.
fn load_checked(path: &Path, err: &mut dyn Write) -> Result<(MdpModel, bool), Failure> {
    let model = io::load_model(path)?;
    let report = validate(&model)?;
    if report.violations.is_empty() {
        Ok((model, false))
    } else {
        let _ = writeln!(err, "warning: renormalized {} kernel row(s)", report.violations.len());
        Ok((model.renormalized(), true))
    }
}

fn cmd_validate(path: &Path) -> Outcome {
    let model = io::load_model(path)?;
    let r = validate(&model)?;
    let doc = Value::obj()
        .with("command", "validate")
        .with("states", model.n_states())
        .with("actions", model.n_actions())
        .with("stochastic_ok", r.stochastic_ok)
        .with("violations", violations_json(&r.violations))
        .with("a0_plus", r.a0_plus)
        .with("a1_plus", r.a1_plus)
        .with("dead_states", r.dead_states)
        .with("gain_irreducible", r.gain_irreducible)
        .with("tool_version", TOOL_VERSION);
    Ok((doc.render(), EXIT_OK))
}

fn certificate_json(c: &Certificate, bound: f64) -> Value {
    let eta = c.eta.joint();
    Value::obj()
        .with("primal_lower", c.primal_lower)
        .with("dual_upper", c.dual_upper)
        .with("gap", c.gap)
        .with("gap_bound", bound)
        .with("g", c.g.clone())
        .with("eta", tensor(eta, c.eta.n_actions(), c.eta.n_states()))
}

fn cmd_solve(path: &Path, opts: &EigenOptions, clock: Clock, err: &mut dyn Write) -> Outcome {
    let (model, renormalized) = load_checked(path, err)?;
    let t = Instant::now();
    let (sol, converged) = match solve_eigen(&model, opts) {
        Ok(sol) => (sol, true),
        Err(Error::NoConvergence(sol)) => (*sol, false),
        Err(e) => return Err(e.into()),
    };
    let eigen_ms = Clock::ms(t);
    let t = Instant::now();
    let bound = 10.0 * opts.tol * sol.log_rho.abs().max(1.0);
    let cert = if converged {
        let target = match sol.regularized {
            Some(eps) => epsilon_model(&model, &EpsilonParams::uniform(model.n_states(), eps))?,
            None => model.clone(),
        };
        Some(Certificate::from_eigen(&target, &sol)?)
    } else {
        None
    };
    let cert_ms = Clock::ms(t);
    let certified = cert.as_ref().is_some_and(|c| c.gap <= bound);
    let doc = solve_report(&sol, converged, renormalized, cert.as_ref(), bound, certified);
    let doc = clock
        .attach(doc, &[("eigen_ms", eigen_ms), ("certificate_ms", cert_ms)])
        .with("tool_version", TOOL_VERSION);
    if !converged {
        let _ = writeln!(err, "warning: power iteration did not converge");
    } else if !certified {
        let _ = writeln!(err, "warning: certificate gap exceeds {}", format_f64(bound));
    }
    let code = if certified { EXIT_OK } else { EXIT_NO_CONVERGENCE };
    Ok((doc.render(), code))
}

fn solve_report(
    sol: &EigenSolution,
    converged: bool,
    renormalized: bool,
    cert: Option<&Certificate>,
    bound: f64,
    certified: bool,
) -> Value {
    Value::obj()
        .with("command", "solve")
        .with("lambda", sol.log_rho)
        .with("rho", sol.rho)
        .with("psi", sol.psi.clone())
        .with("policy", io::policy_to_json(&sol.v_star))
        .with("certificate", cert.map_or(Value::Null, |c| certificate_json(c, bound)))
        .with("certified", certified)
        .with("regularized", sol.regularized.is_some())
        .with("epsilon", sol.regularized)
        .with("renormalized", renormalized)
        .with("converged", converged)
        .with("iterations", sol.iterations)
        .with("cw_lower", sol.cw_lower)
        .with("cw_upper", sol.cw_upper)
}

fn maximize_report(o: &MaximizeOutcome, lambda: Option<f64>) -> Value {
    let eta = &o.eta_hat;
    Value::obj()
        .with("command", "variational")
        .with("value", o.value)
        .with("dual_upper", o.dual_upper)
        .with("gap", o.dual_upper - o.value)
        .with("lambda_eigen", lambda)
        .with("residual", o.residual)
        .with("iterate_residual", o.iterate_residual)
        .with("converged", o.converged)
        .with("outer_rounds", o.outer_rounds)
        .with("steps", o.steps)
        .with("multipliers", o.multipliers.clone())
        .with("eta", tensor(eta.joint(), eta.n_actions(), eta.n_states()))
}

fn cmd_variational(path: &Path, opts: &MaximizeOptions, clock: Clock, err: &mut dyn Write) -> Outcome {
    let (model, _) = load_checked(path, err)?;
    let t = Instant::now();
    let (out, converged) = match maximize(&model, opts, None) {
        Ok(o) => (o, true),
        Err(Error::MaximizerNoConvergence(o)) => (*o, false),
        Err(e) => return Err(e.into()),
    };
    let max_ms = Clock::ms(t);
    let lambda = solve_eigen(&model, &EigenOptions::default()).ok().map(|s| s.log_rho);
    let doc = clock
        .attach(maximize_report(&out, lambda), &[("maximize_ms", max_ms)])
        .with("tool_version", TOOL_VERSION);
    if !converged {
        let _ = writeln!(err, "warning: maximizer did not converge");
    }
    Ok((doc.render(), if converged { EXIT_OK } else { EXIT_NO_CONVERGENCE }))
}

fn cmd_bounds(path: &Path, f_path: &Path) -> Outcome {
    let model = io::load_model(path)?;
    let f = io::load_vector(f_path, model.n_states())?;
    let (lo, hi) = cw_bounds(&model, &f)?;
    let doc = Value::obj()
        .with("command", "bounds")
        .with("lower", lo)
        .with("upper", hi)
        .with("log_lower", lo.ln())
        .with("log_upper", hi.ln())
        .with("tool_version", TOOL_VERSION);
    Ok((doc.render(), EXIT_OK))
}

fn cmd_mc(path: &Path, policy: &Path, opts: &McOptions, clock: Clock) -> Outcome {
    let model = io::load_model(path)?;
    validate(&model)?;
    let phi = io::load_policy(policy, &model)?;
    let t = Instant::now();
    let est = estimate_growth(&model, &phi, opts)?;
    let mc_ms = Clock::ms(t);
    let doc = Value::obj()
        .with("command", "mc")
        .with("point", est.point)
        .with("stderr", est.stderr)
        .with("mean_log", est.mean_log)
        .with("n", est.n)
        .with("paths", est.paths)
        .with("batches", est.batches)
        .with("x0", opts.x0)
        .with("seed", est.seed);
    let doc = clock.attach(doc, &[("simulate_ms", mc_ms)]).with("tool_version", TOOL_VERSION);
    Ok((doc.render(), EXIT_OK))
}

/// `"110;101;010"` to a boolean adjacency matrix.
pub fn parse_adjacency(text: &str) -> Result<Vec<Vec<bool>>, Failure> {
    text.split(';')
        .map(|row| {
            row.trim()
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Failure::Usage(format!("adjacency {text:?}: unexpected character {c:?}"))),
                })
                .collect()
        })
        .collect()
}

/// `"0.5,0.5;1,0"` to a dense matrix.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>, Failure> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Failure::Usage(format!("matrix {text:?}: bad number {v:?}")))
                })
                .collect()
        })
        .collect()
}

fn check_square(rows: &[Vec<impl Sized>], what: &str) -> Result<(), Failure> {
    if rows.iter().any(|r| r.len() != rows.len()) {
        return Err(Failure::Usage(format!("{what} must be square")));
    }
    Ok(())
}

fn cmd_gen(kind: &GenKind) -> Outcome {
    let (name, model, out) = match kind {
        GenKind::Graph { adjacency, out } => {
            let graphs = adjacency.iter().map(|a| parse_adjacency(a)).collect::<Result<Vec<_>, _>>()?;
            for g in &graphs {
                check_square(g, "adjacency")?;
            }
            ("graph", gen_graph_model(&graphs)?, out)
        }
        GenKind::Portfolio { params, resolution, out } => {
            let (mut p, has_grid) = io::load_portfolio_params(params)?;
            if !has_grid {
                let m = p
                    .laws
                    .first()
                    .and_then(|r| r.first())
                    .and_then(|l| l.atoms.first())
                    .map_or(0, |a| a.1.len());
                p.grid = simplex_grid(m, *resolution);
            }
            ("portfolio", gen_portfolio_model(&p)?, out)
        }
        GenKind::Exit { matrix, exit_set, out } => {
            let family = matrix.iter().map(|m| parse_matrix(m)).collect::<Result<Vec<_>, _>>()?;
            for m in &family {
                check_square(m, "matrix")?;
            }
            ("exit", gen_exit_model(&family, exit_set)?, out)
        }
    };
    io::save_model(&model, out)?;
    let doc = Value::obj()
        .with("command", "gen")
        .with("kind", name)
        .with("out", out.display().to_string())
        .with("states", model.n_states())
        .with("actions", model.n_actions())
        .with("metadata", model.metadata())
        .with("tool_version", TOOL_VERSION);
    Ok((doc.render(), EXIT_OK))
}

fn parse_gamma(text: &str, s: usize) -> Result<Vec<f64>, Failure> {
    if text == "uniform" {
        return Ok(vec![1.0 / s as f64; s]);
    }
    let g = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("gamma: bad number {v:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if g.len() != s {
        return Err(Failure::Usage(format!("gamma needs {s} entries, found {}", g.len())));
    }
    Ok(g)
}

fn cmd_sweep(path: &Path, grid: &[f64], gamma: &str, tol: f64, max_iter: usize, out: &Path) -> Outcome {
    let model = io::load_model(path)?;
    validate(&model)?;
    let gamma = parse_gamma(gamma, model.n_states())?;
    let opts = EigenOptions {
        tol,
        max_iter,
        eps_fallback: None,
    };
    let points = epsilon_sweep(&model, grid, &gamma, &opts)?;
    let mut csv = String::from("epsilon,lambda_eps,converged,iterations\n");
    for p in &points {
        let lam = p.lambda_eps.map(format_f64).unwrap_or_default();
        csv.push_str(&format!("{},{lam},{},{}\n", format_f64(p.epsilon), p.converged, p.iterations));
    }
    io::write_file(out, &csv)?;
    let all = points.iter().all(|p| p.converged);
    let code = if all && sweep_is_monotone(&points, 1e-9) {
        EXIT_OK
    } else {
        EXIT_NO_CONVERGENCE
    };
    Ok((csv, code))
}
