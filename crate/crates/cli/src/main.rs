//! `qpolar`: command-line front end for the scaling analysis library.
//!
//! Every subcommand prints either JSON (with the tool version and the full
//! resolved configuration) or CSV. Errors go to standard error as a single
//! JSON line; the exit status is 2 for usage errors, 3 for violated
//! preconditions and 4 for failed internal invariants.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use qpolar::de::{self, ErasureProb, ProfileCaps};
use qpolar::ensemble::{self, AvgProfile, RhoTable};
use qpolar::kernel::{profile_poly, Kernel};
use qpolar::lyapunov::{self, InequalityGrid, LyapunovFn, OperatorSpec};
use qpolar::numeric::fmt_real;

use output::{Failure, Output};

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "qpolar",
    version,
    about = "Scaling analysis of q-ary polar codes on erasure channels"
)]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Serialize)]
struct RunConfig {
    /// Seed for every stochastic computation.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Grid points for supremum searches.
    #[arg(long, global = true, default_value_t = lyapunov::DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Width of the golden-section refinement bracket.
    #[arg(long, global = true, default_value_t = lyapunov::DEFAULT_REFINE_TOL)]
    refine_tol: f64,
    /// Output format; defaults to json (text table for `rho --exact`).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "QPOLAR_THREADS")]
    threads: Option<usize>,
    /// Directory for cached rho tables.
    #[arg(long, global = true, env = "QPOLAR_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Erasure probability psi_i(x) of one child channel.
    Psi {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        i: usize,
        #[arg(long)]
        x: f64,
    },
    /// Erasure probabilities of all q^n effective channels.
    Profile {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        eps: f64,
        /// Emit a histogram with this many bins instead of every channel.
        #[arg(long)]
        hist: Option<usize>,
    },
    /// Picks the k most reliable channels.
    Construct {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        k: usize,
    },
    /// Contraction constant sup (T V)(x) / V(x) for V = (x(1-x))^beta.
    Lambda {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long)]
        beta: f64,
        /// Use V = T^depth (x(1-x))^beta instead.
        #[arg(long)]
        iterate: Option<u32>,
    },
    /// Tail bound after n stages, or the alphabet threshold with --q0.
    Bound {
        #[arg(long)]
        q0: bool,
        #[arg(long, required_unless_present = "q0")]
        q: Option<usize>,
        #[arg(long, required_unless_present = "q0")]
        n: Option<u32>,
        #[arg(long)]
        gamma: f64,
        #[arg(long, required_unless_present = "q0")]
        beta: Option<f64>,
        #[arg(long, required_if_eq("q0", "true"))]
        delta: Option<f64>,
    },
    /// Gaussian constant m(beta), and the estimate m(beta)/sqrt(q) (1/4)^(1/2-beta) with --q.
    Mbeta {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        q: Option<usize>,
    },
    /// Ensemble erasure probabilities rho(m, i, d, q).
    Rho {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        q: u32,
        #[arg(long, conflicts_with = "mc")]
        exact: bool,
        /// Monte Carlo trials per cell.
        #[arg(long)]
        mc: Option<u64>,
    },
    /// Averaged erasure polynomials phibar_i(x).
    Phibar {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        x: f64,
    },
    /// lambda_m = sup gbar_1 / g_0 for the random-kernel ensemble.
    LambdaM {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        beta: f64,
    },
    /// Concavity of gbar_1..gbar_depth and the ln lambda_m regression.
    Conjectures {
        #[arg(long, value_delimiter = ',')]
        m_list: Vec<u32>,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        depth: u32,
    },
    /// Evaluates the analytic inequalities behind the closed-form bound.
    CheckInequalities {
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 16, 256])]
        q: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.3, 0.5])]
        beta: Vec<f64>,
        /// Points per axis.
        #[arg(long, default_value_t = 10_000)]
        points: usize,
    },
    /// Monte Carlo of the polarization Markov chain.
    McChain {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        x0: f64,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        eta: f64,
    },
    /// Samples (x, (T V)(x) / V(x)) on (0, 1).
    RatioCurve {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
}

#[derive(Debug, Args, Serialize)]
struct OpArgs {
    /// `rs`, `ensemble` or `file:<kernel file>`.
    #[arg(long)]
    op: String,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e.to_string().lines().next().unwrap_or("usage error").to_string();
            return Failure::Usage(first.trim_start_matches("error: ").to_string()).report();
        }
    };
    if let Some(n) = cli.config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return Failure::Invariant(format!("thread pool: {e}")).report();
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn require<T: Copy>(v: Option<T>, flag: &str, op: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--{flag} is required for --op {op}")))
}

fn rho_table(config: &RunConfig, m: u32, q: u32) -> Result<RhoTable, Failure> {
    let table = match &config.cache_dir {
        Some(dir) => RhoTable::load_or_build(dir, m, q)?,
        None => RhoTable::build(m, q)?,
    };
    let report = table.check_identities();
    if !(report.row_sums && report.duality) {
        return Err(Failure::Invariant(format!(
            "rho table for m={m}, q={q} fails exact identities: {report:?}"
        )));
    }
    Ok(table)
}

fn operator(config: &RunConfig, args: &OpArgs) -> Result<OperatorSpec, Failure> {
    if args.op == "rs" {
        return Ok(OperatorSpec::rs(require(args.q, "q", "rs")? as usize)?);
    }
    if args.op == "ensemble" {
        let m = require(args.m, "m", "ensemble")?;
        let q = require(args.q, "q", "ensemble")?;
        return Ok(AvgProfile::new(&rho_table(config, m, q)?).operator());
    }
    if let Some(path) = args.op.strip_prefix("file:") {
        let kernel = Kernel::load(std::path::Path::new(path))?;
        return Ok(profile_poly(&kernel)?.operator(path));
    }
    Err(Failure::Usage(format!(
        "unknown operator `{}` (expected rs, ensemble or file:<path>)",
        args.op
    )))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = &cli.config;
    let mut out = Output::new(cli)?;
    match &cli.command {
        Command::Psi { q, i, x } => {
            let value = de::psi(*q, *i, *x)?;
            out.emit(
                json!({ "psi": value }),
                (
                    "q,i,x,psi",
                    vec![vec![q.to_string(), i.to_string(), fmt_real(*x), fmt_real(value)]],
                ),
            )?;
        }
        Command::Profile { q, n, eps, hist } => match hist {
            Some(bins) => {
                let stream = de::profile_stream(*q, *n, *eps, ProfileCaps::default())?;
                let bins = de::histogram(stream.map(|(_, x)| x.value()), *bins);
                let rows = bins
                    .iter()
                    .map(|b| vec![fmt_real(b.lo), fmt_real(b.hi), b.count.to_string()])
                    .collect();
                out.emit(json!({ "histogram": bins }), ("bin_lo,bin_hi,count", rows))?;
            }
            None => {
                let p = de::profile(*q, *n, *eps)?;
                let rows = p
                    .rates()
                    .enumerate()
                    .map(|(k, r)| vec![k.to_string(), fmt_real(r)])
                    .collect();
                out.emit(
                    json!({ "channels": p.len(), "mean": p.mean(), "rates": p.rates().collect::<Vec<_>>() }),
                    ("index,rate", rows),
                )?;
            }
        },
        Command::Construct { q, n, eps, k } => {
            let stream = de::profile_stream(*q, *n, *eps, ProfileCaps::default())?;
            let rates: Vec<(u64, ErasureProb)> = stream.collect();
            let sel = de::select_channels_streaming(rates.iter().copied(), *k);
            let rows = sel
                .indices
                .iter()
                .map(|&i| vec![i.to_string(), fmt_real(rates[i as usize].1.value())])
                .collect();
            out.emit(json!(sel), ("index,rate", rows))?;
        }
        Command::Lambda { op, beta, iterate } => {
            let op = operator(config, op)?;
            let base = LyapunovFn::power(*beta)?;
            let v = match iterate {
                Some(depth) => LyapunovFn::iterate(base, op.clone(), *depth),
                None => base,
            };
            let r = lyapunov::lambda_sup(&op, &v, config.grid_points, config.refine_tol)?;
            out.emit_report(&r, "operator,beta,lambda,grid_lambda,argmax_x", |r| {
                vec![
                    r.operator.clone(),
                    r.beta.map(fmt_real).unwrap_or_default(),
                    fmt_real(r.lambda),
                    fmt_real(r.grid_lambda),
                    fmt_real(r.argmax_x),
                ]
            })?;
        }
        Command::Bound {
            q0: true, gamma, delta, ..
        } => {
            let delta = delta.ok_or_else(|| Failure::Usage("--delta is required with --q0".into()))?;
            let t = lyapunov::q0_threshold(*gamma, delta)?;
            out.emit_report(&t, "gamma,delta,beta,ln_q0,q0", |t| {
                [t.gamma, t.delta, t.beta, t.ln_q0, t.q0].map(fmt_real).to_vec()
            })?;
        }
        Command::Bound { q, n, gamma, beta, .. } => {
            let (q, n, beta) = (q.unwrap_or_default(), n.unwrap_or_default(), beta.unwrap_or_default());
            let t = lyapunov::theorem1_bound(q, n, *gamma, beta)?;
            out.emit_report(&t, "q,n,gamma,beta,threshold,exponent,bound", |t| {
                vec![
                    t.q.to_string(),
                    t.n.to_string(),
                    fmt_real(t.gamma),
                    fmt_real(t.beta),
                    fmt_real(t.threshold),
                    fmt_real(t.exponent),
                    fmt_real(t.bound),
                ]
            })?;
        }
        Command::Mbeta { beta, q } => {
            let m = lyapunov::m_beta(*beta)?;
            let estimate = q.map(|q| lyapunov::lambda_tilde(q, *beta)).transpose()?;
            out.emit(
                json!({ "m_beta": m, "lambda_tilde": estimate }),
                (
                    "beta,m_beta,lambda_tilde",
                    vec![vec![
                        fmt_real(*beta),
                        fmt_real(m),
                        estimate.map(fmt_real).unwrap_or_default(),
                    ]],
                ),
            )?;
        }
        Command::Rho { m, q, exact, mc } => match mc {
            Some(trials) => {
                let mut cells = Vec::new();
                for i in 0..*m {
                    for d in 0..=*m {
                        let seed = config.seed ^ ((i as u64) << 32 | d as u64);
                        cells.push((i, d, ensemble::rho_mc(*m, i, d, *q, *trials, seed)?));
                    }
                }
                let rows = cells
                    .iter()
                    .map(|(i, d, e)| vec![i.to_string(), d.to_string(), fmt_real(e.mean), fmt_real(e.std_err)])
                    .collect();
                let value: Vec<Value> = cells
                    .iter()
                    .map(|(i, d, e)| json!({ "i": i, "d": d, "mean": e.mean, "std_err": e.std_err }))
                    .collect();
                out.emit(json!({ "trials": trials, "cells": value }), ("i,d,mean,std_err", rows))?;
            }
            None => {
                if !exact {
                    return Err(Failure::Usage("rho needs --exact or --mc <trials>".into()));
                }
                let table = rho_table(config, *m, *q)?;
                out.emit_rho(&table)?;
            }
        },
        Command::Phibar { m, q, x } => {
            let avg = AvgProfile::new(&rho_table(config, *m, *q)?);
            let kids = avg.phi_bar_all(ErasureProb::new(*x)?);
            let rows = kids
                .iter()
                .enumerate()
                .map(|(i, c)| vec![i.to_string(), fmt_real(c.value())])
                .collect();
            let values: Vec<f64> = kids.iter().map(|c| c.value()).collect();
            out.emit(json!({ "phi_bar": values }), ("i,phi_bar", rows))?;
        }
        Command::LambdaM { m, q, beta } => {
            let avg = AvgProfile::new(&rho_table(config, *m, *q)?);
            let r = ensemble::lambda_m(&avg, *beta, config.grid_points, config.refine_tol)?;
            out.emit_report(&r, "operator,beta,lambda,grid_lambda,argmax_x", |r| {
                vec![
                    r.operator.clone(),
                    r.beta.map(fmt_real).unwrap_or_default(),
                    fmt_real(r.lambda),
                    fmt_real(r.grid_lambda),
                    fmt_real(r.argmax_x),
                ]
            })?;
        }
        Command::Conjectures { m_list, q, beta, depth } => {
            let avgs = m_list
                .iter()
                .map(|&m| Ok(AvgProfile::new(&rho_table(config, m, *q)?)))
                .collect::<Result<Vec<_>, Failure>>()?;
            let concavity = avgs
                .iter()
                .map(|a| ensemble::check_conjecture1(a, *beta, *depth, config.grid_points))
                .collect::<qpolar::Result<Vec<_>>>()?;
            let regression = if avgs.len() >= 2 {
                Some(ensemble::check_conjecture2(
                    &avgs,
                    *beta,
                    config.grid_points,
                    config.refine_tol,
                )?)
            } else {
                None
            };
            let mut rows = Vec::new();
            for report in &concavity {
                for level in &report.levels {
                    rows.push(vec![
                        report.m.to_string(),
                        level.level.to_string(),
                        fmt_real(level.max_second_difference),
                        level.concave.to_string(),
                    ]);
                }
            }
            out.emit(
                json!({ "concavity": concavity, "regression": regression }),
                ("m,level,max_second_difference,concave", rows),
            )?;
        }
        Command::CheckInequalities { q, beta, points } => {
            let report = lyapunov::check_proof_inequalities(&InequalityGrid {
                points: *points,
                qs: q.clone(),
                betas: beta.clone(),
            });
            let rows = report
                .margins
                .iter()
                .map(|m| {
                    vec![
                        m.name.to_string(),
                        m.q.map(|q| q.to_string()).unwrap_or_default(),
                        m.beta.map(fmt_real).unwrap_or_default(),
                        fmt_real(m.min_slack),
                        fmt_real(m.witness_x),
                        m.witness_y.map(fmt_real).unwrap_or_default(),
                    ]
                })
                .collect();
            out.emit(json!(report), ("name,q,beta,min_slack,witness_x,witness_y", rows))?;
            if !report.passed() {
                return Err(Failure::Invariant(format!(
                    "{} inequality checks have negative slack",
                    report.violations().len()
                )));
            }
        }
        Command::McChain { q, n, x0, trials, eta } => {
            let est = de::mc_chain(*q, *n, *x0, *trials, *eta, config.seed)?;
            out.emit_report(
                &est,
                "trials,unpolarized,unpolarized_fraction,unpolarized_std_err,mean,mean_std_err",
                |e| {
                    vec![
                        e.trials.to_string(),
                        e.unpolarized.to_string(),
                        fmt_real(e.unpolarized_fraction),
                        fmt_real(e.unpolarized_std_err),
                        fmt_real(e.mean),
                        fmt_real(e.mean_std_err),
                    ]
                },
            )?;
        }
        Command::RatioCurve { op, beta, points } => {
            let op = operator(config, op)?;
            let curve = lyapunov::ratio_curve(&op, &LyapunovFn::power(*beta)?, *points);
            let rows = curve.iter().map(|&(x, r)| vec![fmt_real(x), fmt_real(r)]).collect();
            let value: Vec<Value> = curve.iter().map(|&(x, r)| json!({ "x": x, "ratio": r })).collect();
            out.emit(json!({ "operator": op.to_string(), "curve": value }), ("x,ratio", rows))?;
        }
    }
    out.finish()
}
