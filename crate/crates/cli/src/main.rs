//! Command-line front end: validate, laplace, sample, simulate, verify.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cirjump::coefficients::{validate, Severity};
use cirjump::model::Model;
use cirjump::paths::{absorbed_cir_path, branching_path, euler_path, exact_skeleton, simulate_many, uniform_grid, Scheme};
use cirjump::samplers::Component;
use cirjump::verify::{draw_samples, run_suite, McOptions, Suite, SuiteReport, SuiteSettings};
use cirjump::{Error, Result};

use config::{RunConfig, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "cirjump", version, about = "Exact transition laws and path simulation for a CIR process with positive jumps")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "CIRJUMP_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Check the coefficient and jump-measure conditions.
    Validate { config: PathBuf },
    /// Print the analytic transform on a grid of λ as CSV.
    Laplace {
        config: PathBuf,
        #[command(flatten)]
        window: Window,
        #[arg(long, value_parser = parse_component, default_value = "K")]
        component: Component,
        /// Comma-separated λ values.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Draw from a transition law or one of its components.
    Sample {
        config: PathBuf,
        #[command(flatten)]
        window: Window,
        #[arg(long, value_parser = parse_component, default_value = "K")]
        component: Component,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write draws here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate paths and write one CSV per path plus a manifest.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        window: Window,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        config: PathBuf,
        #[command(flatten)]
        window: Window,
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Clone, Copy)]
struct Window {
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    y: Option<f64>,
}

fn parse_component(s: &str) -> std::result::Result<Component, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Resolved {
    s: f64,
    t: f64,
    y: f64,
}

impl Window {
    fn resolve(&self, cfg: &RunConfig) -> Resolved {
        Resolved {
            s: self.s.unwrap_or(cfg.run.s),
            t: self.t.or(cfg.run.t).unwrap_or(cfg.t_max),
            y: self.y.or(cfg.run.y).unwrap_or(cfg.x0),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                _ => 1,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Validate { config } => cmd_validate(cli, &RunConfig::load(config)?),
        Command::Laplace {
            config,
            window,
            component,
            lambdas,
        } => {
            let cfg = RunConfig::load(config)?;
            let model = cfg.model()?;
            let w = window.resolve(&cfg);
            let lambdas = lambdas.clone().unwrap_or_else(|| cfg.run.lambdas.clone());
            let mut out = std::io::stdout().lock();
            writeln!(out, "lambda,value,error_estimate").map_err(io)?;
            for l in lambdas {
                let e = model.laplace(*component, w.s, w.t, w.y, l)?;
                writeln!(out, "{:.16e},{:.16e},{:.16e}", l, e.value, e.error_estimate).map_err(io)?;
            }
            Ok(true)
        }
        Command::Sample {
            config,
            window,
            component,
            n,
            seed,
            output,
        } => {
            let cfg = RunConfig::load(config)?;
            let model = cfg.model()?;
            cmd_sample(cli, &cfg, &model, window.resolve(&cfg), *component, *n, *seed, output.as_deref())
        }
        Command::Simulate {
            config,
            window,
            scheme,
            h,
            n,
            seed,
            output_dir,
        } => {
            let cfg = RunConfig::load(config)?;
            let scheme = match scheme {
                Some(s) => *s,
                None => match &cfg.run.scheme {
                    Some(name) => name.parse().map_err(|e: Error| Error::Config(format!("run.scheme: {e}")))?,
                    None => Scheme::ExactSkeleton,
                },
            };
            let dir = output_dir
                .clone()
                .or_else(|| cfg.run.output_dir.clone())
                .ok_or_else(|| Error::Config("simulate needs --output-dir or run.output_dir".into()))?;
            let model = cfg.model()?;
            let w = window.resolve(&cfg);
            cmd_simulate(
                cli,
                &model,
                w,
                scheme,
                h.unwrap_or(cfg.run.h),
                n.unwrap_or(cfg.run.n),
                seed.unwrap_or(cfg.run.seed),
                &dir,
            )
        }
        Command::Verify {
            config,
            window,
            suite,
            n,
            seed,
        } => {
            let cfg = RunConfig::load(config)?;
            let model = cfg.model()?;
            let w = window.resolve(&cfg);
            let mut st = SuiteSettings::for_model(&model);
            st.s = w.s;
            st.t = w.t;
            st.y = w.y;
            st.u = cfg.run.u.unwrap_or(0.5 * (w.s + w.t));
            st.euler_steps = cfg.run.euler_steps.clone();
            st.mc = McOptions {
                n: n.unwrap_or(cfg.run.n),
                seed: seed.unwrap_or(cfg.run.seed),
                workers: cli.threads,
                lambda_grid: cfg.run.lambdas.clone(),
                thresholds: cfg.thresholds,
            };
            let report = run_suite(&model, *suite, &st)?;
            print_suite(cli.format, &report)?;
            Ok(report.passed)
        }
    }
}

fn io(e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("i/o error: {e}"))
}

fn cmd_validate(cli: &Cli, cfg: &RunConfig) -> Result<bool> {
    let coeffs = cfg.coefficients()?;
    let nu = cfg.jump_measure()?;
    let report = validate(&coeffs, &nu);
    let hard = report.status();
    let restrictive = report.require_exact_samplers();
    let mut out = std::io::stdout().lock();
    match cli.format {
        Format::Json => {
            let v = json!({"schema_version": SCHEMA_VERSION, "report": report});
            writeln!(out, "{v}").map_err(io)?;
        }
        Format::Table => {
            for c in &report.checks {
                let tag = match c.severity {
                    Severity::Pass => "PASS",
                    Severity::Warning => "WARN",
                    Severity::Error => "FAIL",
                };
                writeln!(out, "{tag:<5} {:<24} {}", c.name, c.detail).map_err(io)?;
            }
        }
    }
    match hard.and(restrictive) {
        Ok(()) => Ok(true),
        Err(e) => {
            eprintln!("error: {e}");
            Ok(false)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    cli: &Cli,
    cfg: &RunConfig,
    model: &Model,
    w: Resolved,
    component: Component,
    n: Option<usize>,
    seed: Option<u64>,
    output: Option<&Path>,
) -> Result<bool> {
    let opts = McOptions {
        n: n.unwrap_or(cfg.run.n),
        seed: seed.unwrap_or(cfg.run.seed),
        workers: cli.threads,
        ..McOptions::default()
    };
    let law = model.transition(component, w.s, w.t, w.y)?;
    let xs = draw_samples(&opts, |rng| law.sample(rng))?;
    let nf = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    let zero_fraction = xs.iter().filter(|x| **x == 0.0).count() as f64 / nf;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "component": component.to_string(),
        "s": w.s, "t": w.t, "y": w.y,
        "n": xs.len(), "seed": opts.seed,
        "mean": mean, "variance": variance, "zero_fraction": zero_fraction,
    });
    let write_draws = |sink: &mut dyn Write| -> std::io::Result<()> {
        writeln!(sink, "value")?;
        for x in &xs {
            writeln!(sink, "{x:.16e}")?;
        }
        sink.flush()
    };
    match output {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).map_err(io)?);
            write_draws(&mut f).map_err(io)?;
            println!("{summary}");
        }
        None => {
            write_draws(&mut BufWriter::new(std::io::stdout().lock())).map_err(io)?;
            eprintln!("{summary}");
        }
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(cli: &Cli, model: &Model, w: Resolved, scheme: Scheme, h: f64, n: usize, seed: u64, dir: &Path) -> Result<bool> {
    let grid = uniform_grid(w.s, w.t, h)?;
    let paths = simulate_many(n, seed, cli.threads, |stream| match scheme {
        Scheme::Euler => euler_path(stream, model, &grid, w.y),
        Scheme::ExactSkeleton => exact_skeleton(stream, model, &grid, w.y),
        Scheme::Branching => branching_path(stream, model, &grid, w.y),
        Scheme::AbsorbedCir => absorbed_cir_path(stream, model.engine(), w.y, &grid),
    })?;
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut files = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        let name = format!("path_{i:06}.csv");
        let mut f = BufWriter::new(File::create(dir.join(&name)).map_err(io)?);
        writeln!(f, "time,value,jump_flag").map_err(io)?;
        for ((t, v), j) in p.times.iter().zip(&p.values).zip(&p.jump_flags) {
            writeln!(f, "{t:.16e},{v:.16e},{}", u8::from(*j)).map_err(io)?;
        }
        f.flush().map_err(io)?;
        files.push(json!({"file": name, "stream": p.seed.stream_id, "jumps": p.jumps.points.len()}));
    }
    let delta = model.jump_source().ok().map(|src| src.delta());
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "scheme": scheme.to_string(),
        "s": w.s, "t": w.t, "y": w.y, "h": h,
        "grid_points": grid.len(),
        "n": n, "seed": seed,
        "delta": delta,
        "paths": files,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), text).map_err(io)?;
    println!("{}", json!({"schema_version": SCHEMA_VERSION, "paths": n, "output_dir": dir}));
    Ok(true)
}

fn print_suite(format: Format, report: &SuiteReport) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match format {
        Format::Json => {
            for c in &report.checks {
                let line = json!({"schema_version": SCHEMA_VERSION, "suite": report.suite, "check": c.name, "passed": c.passed, "detail": c.detail});
                writeln!(out, "{line}").map_err(io)?;
            }
            let line = json!({"schema_version": SCHEMA_VERSION, "suite": report.suite, "passed": report.passed});
            writeln!(out, "{line}").map_err(io)?;
        }
        Format::Table => {
            writeln!(out, "{:<6} {:<40} summary", "status", "check").map_err(io)?;
            for c in &report.checks {
                writeln!(out, "{:<6} {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, brief(&c.detail)).map_err(io)?;
            }
            writeln!(out, "suite {}: {}", report.suite, if report.passed { "PASS" } else { "FAIL" }).map_err(io)?;
        }
    }
    Ok(())
}

/// Scalar fields of a check's detail, one line.
fn brief(v: &serde_json::Value) -> String {
    match v.as_object() {
        Some(map) => map
            .iter()
            .filter(|(_, x)| x.is_number() || x.is_boolean())
            .map(|(k, x)| match (x.as_u64(), x.as_f64()) {
                (Some(i), _) => format!("{k}={i}"),
                (None, Some(f)) => format!("{k}={f:.4e}"),
                _ => format!("{k}={x}"),
            })
            .collect::<Vec<_>>()
            .join(" "),
        None => v.to_string(),
    }
}
