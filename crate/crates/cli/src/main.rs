//! `mkdiv` command-line front end.
//!
//! Exit status: 0 on success, 1 on configuration or domain errors, 2 when a
//! verification command finds a deviation beyond its tolerance.

mod json;

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use mkdiv::certify::{certify, elicit_check, random_sample_pairs, CERTIFY_TOL};
use mkdiv::distributions::{write_grid_csv, QuantileGrid};
use mkdiv::functionals::{check_axioms, AxiomParams};
use mkdiv::numeric::Execution;
use mkdiv::payoff::cheapest_payoff;
use mkdiv::robust::{solve_worst_case, SolveOptions};
use mkdiv::spec::{parse_distortion, parse_generator, DistSpec, FunctionalSpec, MarketSpecString, ScoreSpec};
use mkdiv::transport::mk_divergence_report;
use mkdiv::{DEFAULT_DELTA, DEFAULT_GRID_M, DEFAULT_TOL};

/// Environment variable overriding the default grid size.
const GRID_ENV: &str = "MKDIV_GRID_M";

#[derive(Parser, Debug)]
#[command(
    name = "mkdiv",
    version,
    about = "Monge-Kantorovich divergences with scoring-function costs"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Quadrature nodes on the u-grid [default: $MKDIV_GRID_M or 10000]
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Tail truncation level of the u-grid
    #[arg(long, global = true, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Absolute tolerance on the calibrated divergence
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Write the JSON result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the solution quantile grid as CSV (`u,value`)
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Evaluate nodes and instances on the thread pool
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// MK divergence between two distributions
    Divergence {
        #[arg(long)]
        score: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// Certify the closed-form coupling against the exact oracle
    Verify {
        #[arg(long)]
        score: String,
        /// Largest instance size
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Worst-case distortion risk measure over a Bregman-Wasserstein ball
    WorstCase {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        distortion: String,
        #[arg(long = "ref")]
        reference: String,
        #[arg(long)]
        eps: f64,
    },
    /// Cheapest payoff within a Bregman-Wasserstein ball around a benchmark
    Payoff {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        benchmark: String,
        #[arg(long)]
        market: String,
        #[arg(long)]
        eps: f64,
    },
    /// Compare expected-score minimisers with the elicited functional
    ElicitCheck {
        #[arg(long)]
        score: String,
        /// Defaults to the functional the score elicits
        #[arg(long)]
        functional: Option<String>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest accepted |argmin − T(F)|
        #[arg(long, default_value_t = 1e-5)]
        max_dev: f64,
    },
    /// Check risk-measure axioms of a functional on random sample pairs
    Axioms {
        #[arg(long)]
        functional: String,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[arg(long, default_value_t = 25)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Global {
    fn grid_m(&self) -> Result<usize> {
        if let Some(m) = self.m {
            return Ok(m);
        }
        match std::env::var(GRID_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .with_context(|| format!("{GRID_ENV} must be a positive integer, got `{v}`")),
            Err(_) => Ok(DEFAULT_GRID_M),
        }
    }

    fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Serial
        }
    }

    fn solve_options(&self) -> Result<SolveOptions> {
        Ok(SolveOptions {
            m: self.grid_m()?,
            delta: self.delta,
            tol: self.tol,
            execution: self.execution(),
        })
    }
}

fn grid_json(grid: &QuantileGrid) -> Value {
    json!({ "M": grid.m(), "delta": grid.delta(), "nodes": grid.nodes() })
}

fn write_csv(global: &Global, grid: &QuantileGrid) -> Result<()> {
    if let Some(path) = &global.csv {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        write_grid_csv(grid, file)?;
    }
    Ok(())
}

/// Run a command, returning its JSON result and whether it passed.
fn run(cli: &Cli) -> Result<(Value, bool)> {
    let g = &cli.global;
    match &cli.command {
        Command::Divergence { score, from, to } => {
            let spec = ScoreSpec::parse(score)?;
            let (f1, f2) = (DistSpec::parse(from)?, DistSpec::parse(to)?);
            let r = mk_divergence_report(
                &spec.build()?,
                &f1.load()?,
                &f2.load()?,
                g.grid_m()?,
                g.delta,
                g.execution(),
            )?;
            Ok((
                json!({
                    "value": r.value,
                    "coupling": r.coupling.name(),
                    "score": spec.render(),
                    "from": f1.to_string(),
                    "to": f2.to_string(),
                    "grid": { "M": r.m, "delta": r.delta, "exact_atoms": r.exact_atoms },
                }),
                true,
            ))
        }
        Command::Verify {
            score,
            n,
            instances,
            seed,
        } => {
            let spec = ScoreSpec::parse(score)?;
            let report = certify(&spec.build()?, *instances, *n, *seed, g.execution())?;
            let mut v = serde_json::to_value(&report)?;
            v["score"] = json!(spec.render());
            v["tolerance"] = json!(CERTIFY_TOL);
            Ok((v, report.passed))
        }
        Command::WorstCase {
            phi,
            distortion,
            reference,
            eps,
        } => {
            let gen = parse_generator(phi)?;
            let d = parse_distortion(distortion)?;
            let reference = DistSpec::parse(reference)?;
            let sol = solve_worst_case(gen, &d, &reference.load()?, *eps, &g.solve_options()?)?;
            write_csv(g, &sol.worst_quantile)?;
            let mut v = serde_json::to_value(&sol)?;
            v["grid"] = grid_json(&sol.worst_quantile);
            Ok((v, true))
        }
        Command::Payoff {
            phi,
            benchmark,
            market,
            eps,
        } => {
            let gen = parse_generator(phi)?;
            let bench = DistSpec::parse(benchmark)?.load()?;
            let market = MarketSpecString::parse(market)?.build_relative(std::path::Path::new(""))?;
            let sol = cheapest_payoff(gen, &bench, &market, *eps, &g.solve_options()?)?;
            write_csv(g, &sol.payoff_quantile)?;
            let mut v = serde_json::to_value(&sol)?;
            v["grid"] = grid_json(&sol.payoff_quantile);
            Ok((v, true))
        }
        Command::ElicitCheck {
            score,
            functional,
            samples,
            seed,
            max_dev,
        } => {
            let spec = ScoreSpec::parse(score)?;
            let t = functional.as_deref().map(FunctionalSpec::parse).transpose()?;
            let t = t.map(|t| t.build()).transpose()?;
            let report = elicit_check(&spec.build()?, t.as_ref(), *samples, *seed, *max_dev, g.execution())?;
            let mut v = serde_json::to_value(&report)?;
            v["score"] = json!(spec.render());
            Ok((v, report.passed))
        }
        Command::Axioms {
            functional,
            pairs,
            size,
            seed,
        } => {
            let spec = FunctionalSpec::parse(functional)?;
            let samples = random_sample_pairs(*pairs, *size, -3.0, 3.0, *seed);
            let report = check_axioms(&spec.build()?, &samples, &AxiomParams::default())?;
            let mut v = serde_json::to_value(&report)?;
            v["functional"] = json!(spec.render());
            v["all_passed"] = json!(report.all_passed());
            // The report is the result; failing axioms are findings, not errors.
            Ok((v, true))
        }
    }
}

fn emit(global: &Global, text: &str) -> Result<()> {
    match &global.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = run(&cli).and_then(|(v, passed)| {
        emit(&cli.global, &json::render(&v))?;
        Ok(passed)
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
