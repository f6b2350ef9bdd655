use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use spikechain_cli::{cmd_check, cmd_kernel, cmd_solve, cmd_sweep, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Boundary spike chains on a curvature segment: ground state, interaction
/// kernel, continuum shooting, exact balance solve, and verification.
#[derive(Parser)]
#[command(name = "spikechain", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single-eps pipeline and write its artifacts.
    Solve(RunArgs),
    /// Run the eps sweep plus the full verification suite.
    Sweep(RunArgs),
    /// Build (or reuse) the cached ground-state and kernel tables.
    Kernel(RunArgs),
    /// Revalidate previously written artifacts without re-solving.
    Check(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (key = value lines); flags override its values.
    config: Option<PathBuf>,

    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated eps list.
    #[arg(long)]
    eps: Option<String>,
    /// Geometry kind: quadratic | cubic | samples.
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    h0: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    s_begin: Option<f64>,
    #[arg(long)]
    samples_file: Option<String>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    gs_tol: Option<f64>,
    #[arg(long)]
    kernel_s_min: Option<f64>,
    #[arg(long)]
    kernel_s_max: Option<f64>,
    #[arg(long)]
    kernel_ds: Option<f64>,
    #[arg(long)]
    shoot_tol_factor: Option<f64>,
    #[arg(long)]
    solve_tol_factor: Option<f64>,
    #[arg(long)]
    c_admis: Option<f64>,
    #[arg(long)]
    cache_dir: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Comma-separated check names gating the exit status, or "all".
    #[arg(long)]
    checks: Option<String>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let cwd = PathBuf::from(".");
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                let base = path.parent().unwrap_or(Path::new("."));
                RunConfig::parse(&text, base)?
            }
            None => RunConfig::default(),
        };
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            if let Some(v) = value {
                cfg.set(key, &v, &cwd)?;
            }
            Ok(())
        };
        set("p", self.p.map(|v| v.to_string()))?;
        set("eps", self.eps)?;
        set("geometry", self.geometry)?;
        set("b", self.b.map(|v| v.to_string()))?;
        set("h0", self.h0.map(|v| v.to_string()))?;
        set("a", self.a.map(|v| v.to_string()))?;
        set("beta", self.beta.map(|v| v.to_string()))?;
        set("s_begin", self.s_begin.map(|v| v.to_string()))?;
        set("samples_file", self.samples_file)?;
        set("r_max", self.r_max.map(|v| v.to_string()))?;
        set("gs_tol", self.gs_tol.map(|v| v.to_string()))?;
        set("kernel_s_min", self.kernel_s_min.map(|v| v.to_string()))?;
        set("kernel_s_max", self.kernel_s_max.map(|v| v.to_string()))?;
        set("kernel_ds", self.kernel_ds.map(|v| v.to_string()))?;
        set(
            "shoot_tol_factor",
            self.shoot_tol_factor.map(|v| v.to_string()),
        )?;
        set(
            "solve_tol_factor",
            self.solve_tol_factor.map(|v| v.to_string()),
        )?;
        set("c_admis", self.c_admis.map(|v| v.to_string()))?;
        set("cache_dir", self.cache_dir)?;
        set("out_dir", self.out_dir)?;
        set("checks", self.checks)?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = (|| -> Result<bool> {
        match cli.command {
            Command::Solve(args) => cmd_solve(&args.into_config()?),
            Command::Sweep(args) => cmd_sweep(&args.into_config()?),
            Command::Kernel(args) => cmd_kernel(&args.into_config()?),
            Command::Check(args) => cmd_check(&args.into_config()?),
        }
    })();
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more selected checks failed");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
