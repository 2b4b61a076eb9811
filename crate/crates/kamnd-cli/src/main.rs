use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kamnd::report::{
    self, json_document, list_examples, resolve, write_artifacts, Artifact, Format, ReportError, RunConfig, Settings,
    SEED_ENV,
};

/// Nondegeneracy conditions, resonance webs and torus classification for
/// integrable Hamiltonians F(ξ).
#[derive(Parser)]
#[command(name = "kamnd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Jet, condition verdicts and torus classification at one point
    Analyze(Common),
    /// Condition margins on a grid, with failure cells and zero curves
    Scan(Common),
    /// Resonant sets for all primitive k up to --max-norm
    Web(Common),
    /// Sampled check of the implications between conditions
    Hierarchy(Common),
    /// Compare the analytic derivatives and linear algebra with independent oracles
    Selftest(Common),
    /// List the builtin models
    ListExamples {
        #[arg(long)]
        format: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Builtin model: quadratic, norm, mixed, quartic, linear
    #[arg(long)]
    model: Option<String>,
    /// Expression in x1..xd
    #[arg(long, allow_hyphen_values = true)]
    expr: Option<String>,
    /// Model document in JSON
    #[arg(long)]
    model_json: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Frequency vector of the linear model, comma separated
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    /// Box as lo:hi per axis, comma separated; one interval applies to every axis
    #[arg(long, allow_hyphen_values = true)]
    region: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Nodes per axis
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    max_norm: Option<i64>,
    #[arg(long)]
    tol_det: Option<f64>,
    #[arg(long)]
    tol_rank: Option<f64>,
    #[arg(long)]
    tol_russmann: Option<f64>,
    #[arg(long)]
    tol_res: Option<f64>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma separated subset of json, csv, svg
    #[arg(long)]
    format: Option<String>,
    /// TOML file with the same keys as the flags
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn settings(self) -> (Settings, Option<PathBuf>) {
        let s = Settings {
            model: self.model,
            expr: self.expr,
            model_json: self.model_json,
            dim: self.dim,
            omega: self.omega,
            region: self.region,
            point: self.point,
            grid: self.grid,
            samples: self.samples,
            max_norm: self.max_norm,
            tol_det: self.tol_det,
            tol_rank: self.tol_rank,
            tol_russmann: self.tol_russmann,
            tol_res: self.tol_res,
            fd_step: self.fd_step,
            seed: self.seed,
            out: self.out,
            format: self.format,
        };
        (s, self.config)
    }
}

enum Failure {
    Usage(String),
    Check,
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load(common: Common) -> Result<(RunConfig, bool), Failure> {
    let (flags, path) = common.settings();
    let file = path
        .map(|p| Settings::from_file(&p))
        .transpose()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let explicit_format = flags.format.is_some() || file.as_ref().is_some_and(|f| f.format.is_some());
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = resolve(flags, file, env_seed.as_deref()).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((cfg, explicit_format))
}

/// With `--out`, write the artifacts and print the summary. Without it,
/// print the JSON document when JSON was asked for explicitly and the
/// summary otherwise.
fn emit(cfg: &RunConfig, explicit_format: bool, summary: &str, artifacts: &[Artifact]) -> Result<(), Failure> {
    if let Some(dir) = &cfg.out {
        let paths = write_artifacts(dir, artifacts).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        print!("{summary}");
        for p in paths {
            println!("wrote {}", p.display());
        }
        return Ok(());
    }
    let json = artifacts.iter().find(|a| a.name.ends_with(".json"));
    match json {
        Some(a) if explicit_format && cfg.wants(Format::Json) => {
            print!("{}", a.contents);
            eprint!("{summary}");
        }
        _ => print!("{summary}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze(c) => {
            let (cfg, ex) = load(c)?;
            let r = report::analyze(&cfg)?;
            emit(&cfg, ex, &r.summary(), &r.artifacts())
        }
        Command::Scan(c) => {
            let (cfg, ex) = load(c)?;
            let r = report::scan(&cfg)?;
            emit(&cfg, ex, &r.summary(), &r.artifacts())
        }
        Command::Web(c) => {
            let (cfg, ex) = load(c)?;
            let r = report::web(&cfg)?;
            emit(&cfg, ex, &r.summary(), &r.artifacts())
        }
        Command::Hierarchy(c) => {
            let (cfg, ex) = load(c)?;
            let doc = report::hierarchy(&cfg)?;
            emit(&cfg, ex, &doc.report.to_table(), &doc.artifacts())?;
            if doc.report.counterexample_count() > 0 {
                return Err(Failure::Check);
            }
            Ok(())
        }
        Command::Selftest(c) => {
            let (cfg, ex) = load(c)?;
            let doc = report::selftest(&cfg);
            emit(&cfg, ex, &doc.report.to_table(), &doc.artifacts())?;
            if !doc.report.passed {
                return Err(Failure::Check);
            }
            Ok(())
        }
        Command::ListExamples { format } => {
            let examples = list_examples();
            match format.as_deref() {
                Some("json") => print!("{}", json_document(&examples)),
                None | Some("text") => {
                    for e in &examples {
                        println!("{:<10} {:<40} domain {}", e.name, e.expr, e.domain);
                        if let Some(x) = &e.excluded {
                            println!("{:<10} excluded where {x} = 0", "");
                        }
                        println!("{:<10} default region {}", "", e.default_region);
                    }
                }
                Some(other) => return Err(Failure::Usage(format!("unknown format {other:?}; use text or json"))),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
