//! `latelump` command-line interface.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 assumption failure, 4 convergence criterion unmet, 5 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use latelump::config::{Criterion, RunConfig};
use latelump::eigen::SpectrumLabel;
use latelump::feedback::BasisChoice;
use latelump::report;
use latelump::Error;

const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.json");
const CONFIG_SCHEMA: &str = include_str!("../../../schema/config.schema.json");

#[derive(Parser)]
#[command(name = "latelump", version, about = "Late-lumping boundary feedback and observer design")]
struct Cli {
    /// Configuration file (JSON); the built-in default is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "LATELUMP_OUT", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Approx {
    /// Override the approximation order.
    #[arg(long)]
    n: Option<usize>,
    /// Override the eigenbasis (open_loop, intermediate, desired).
    #[arg(long, value_parser = parse_basis)]
    basis: Option<BasisChoice>,
}

#[derive(Subcommand)]
enum Command {
    /// Write one spectrum as CSV.
    Spectrum {
        /// open_loop, intermediate, desired, closed_loop, observer_intermediate,
        /// observer_desired or observer_closed_loop.
        #[arg(long, value_parser = parse_label)]
        which: SpectrumLabel,
        #[command(flatten)]
        approx: Approx,
    },
    /// Gains, kernel coefficients and assumption checks as JSON.
    Design {
        #[command(flatten)]
        approx: Approx,
    },
    /// Spectral convergence sweep over approximation orders.
    Converge {
        #[arg(long)]
        n_min: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, value_parser = parse_basis)]
        basis: Option<BasisChoice>,
        /// Use `max Re <= MARGIN` instead of the disk criterion.
        #[arg(long, allow_hyphen_values = true)]
        margin: Option<f64>,
    },
    /// Closed-loop time-domain simulation.
    Simulate {
        #[command(flatten)]
        approx: Approx,
    },
    /// Observer convergence sweep and error simulation.
    Observe {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        n_min: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
    },
}

fn parse_label(s: &str) -> Result<SpectrumLabel, String> {
    SpectrumLabel::parse(s).ok_or_else(|| format!("unknown dynamics label '{s}'"))
}

fn parse_basis(s: &str) -> Result<BasisChoice, String> {
    match s {
        "open_loop" => Ok(BasisChoice::OpenLoop),
        "intermediate" => Ok(BasisChoice::Intermediate),
        "desired" => Ok(BasisChoice::Desired),
        _ => Err(format!("unknown basis '{s}'")),
    }
}

enum Failure {
    Io(String),
    Config(String),
    Assumption(String),
    Convergence(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Assumption(_) => 3,
            Failure::Convergence(_) => 4,
            Failure::Numerical(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Config(m) | Failure::Assumption(m) | Failure::Convergence(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Json(_) => Failure::Config(m),
            Error::Io(_) => Failure::Io(m),
            Error::GapUndefined(_) | Error::Simplicity { .. } => Failure::Assumption(m),
            _ => Failure::Numerical(m),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let text = match path {
        None => DEFAULT_CONFIG.to_string(),
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("parse: {e}")))?;
    let schema: serde_json::Value = serde_json::from_str(CONFIG_SCHEMA).expect("shipped schema is JSON");
    let validator = jsonschema::validator_for(&schema).expect("shipped schema compiles");
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    if !errors.is_empty() {
        return Err(Failure::Config(format!("schema: {}", errors.join("; "))));
    }
    RunConfig::from_json(&text).map_err(|e| Failure::Config(e.to_string()))
}

fn apply(cfg: &mut RunConfig, a: &Approx) {
    if let Some(n) = a.n {
        cfg.approximation.n = n;
    }
    if let Some(b) = a.basis {
        cfg.approximation.basis = b;
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, content: &str) -> Result<(), Failure> {
        let p = self.dir.join(name);
        fs::write(&p, content).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
        println!("wrote {}", p.display());
        Ok(())
    }

    /// Run metadata, kept apart from the deterministic data files.
    fn metadata(&self, command: &str) -> Result<(), Failure> {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "unix_time": secs,
        });
        self.write(&format!("{command}.meta.json"), &report::to_json(&meta))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = load_config(cli.config.as_deref())?;
    let out = Output::new(&cli.out)?;
    match cli.command {
        Command::Spectrum { which, approx } => {
            apply(&mut cfg, &approx);
            cfg.validate()?;
            let s = report::compute_spectrum(&cfg, which)?;
            out.write(&format!("spectrum_{}.csv", which.as_str()), &report::spectrum_csv(&s))?;
            out.metadata("spectrum")?;
        }
        Command::Design { approx } => {
            apply(&mut cfg, &approx);
            cfg.validate()?;
            let r = report::design(&cfg)?;
            out.write("design.json", &report::to_json(&r))?;
            out.metadata("design")?;
            if !r.assumptions_ok {
                return Err(Failure::Assumption("assumption check failed; see design.json".into()));
            }
        }
        Command::Converge { n_min, n_max, basis, margin } => {
            apply(&mut cfg, &Approx { n: None, basis });
            if let Some(v) = n_min {
                cfg.convergence.n_min = v;
            }
            if let Some(v) = n_max {
                cfg.convergence.n_max = v;
            }
            if let Some(m) = margin {
                cfg.convergence.criterion = Criterion::Margin(m);
            }
            cfg.validate()?;
            let r = report::converge(&cfg)?;
            out.write("converge.json", &report::to_json(&r))?;
            out.write("converge.csv", &report::sweep_csv(&r.rows))?;
            out.metadata("converge")?;
            println!("minimal order: {:?}", r.minimal_order.suffix);
            if !r.criterion_met {
                return Err(Failure::Convergence("criterion unmet at the largest tested order".into()));
            }
        }
        Command::Simulate { approx } => {
            apply(&mut cfg, &approx);
            cfg.validate()?;
            let (tr, s) = report::run_simulation(&cfg)?;
            out.write("simulate.csv", &report::trace_csv(&tr))?;
            out.write("simulate.json", &report::to_json(&s))?;
            out.metadata("simulate")?;
        }
        Command::Observe { n, n_min, n_max } => {
            apply(&mut cfg, &Approx { n, basis: None });
            if let Some(v) = n_min {
                cfg.convergence.n_min = v;
            }
            if let Some(v) = n_max {
                cfg.convergence.n_max = v;
            }
            cfg.validate()?;
            let (r, tr) = report::observe(&cfg)?;
            out.write("observe.json", &report::to_json(&r))?;
            out.write("observe_converge.csv", &report::sweep_csv(&r.converge.rows))?;
            out.write("observe_trace.csv", &report::trace_csv(&tr))?;
            out.metadata("observe")?;
            if !r.converge.criterion_met {
                return Err(Failure::Convergence("observer criterion unmet at the largest tested order".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
