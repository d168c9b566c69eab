use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bfdk_core::config::parse_config;
use bfdk_core::diagnostics::{entropy, l12_distance, moment, weighted_norm};
use bfdk_core::equilibrium::{fermi_radius, fermi_temperature, macro_moments, solve_fd_params};
use bfdk_core::integrator::run_simulation;
use bfdk_core::snapshot::read_snapshot;
use bfdk_core::verify::{run_all, run_suite, VerificationReport, REPORT_CSV_HEADER, SUITES};
use bfdk_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bfdk", version, about = "Velocity-grid solver for the homogeneous Boltzmann-Fermi-Dirac equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a key after parsing, e.g. `--set time.t_end=2`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; takes precedence over `output.dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured initial data and write snapshots and diagnostics.
    Run(ConfigArgs),
    /// Fermi-Dirac parameters for a density and temperature.
    Equilibrium {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        temperature: f64,
    },
    /// Run one property suite, or `all`.
    Verify {
        suite: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Weighted L1 distance `||f - g||_{1,2}` between two snapshots.
    Compare { a: PathBuf, b: PathBuf },
    /// Moments and norms of one snapshot.
    Moments {
        snapshot: PathBuf,
        /// Moment orders to tabulate.
        #[arg(long, value_delimiter = ',', default_value = "0,2,4,6")]
        orders: Vec<f64>,
    },
}

fn load(args: &ConfigArgs) -> Result<bfdk_core::config::SimulationConfig> {
    let mut config = parse_config(&args.config, &args.overrides)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(dir) = &args.out {
        config.output.dir = Some(dir.clone());
    }
    Ok(config)
}

fn cmd_run(args: &ConfigArgs) -> Result<ExitCode> {
    let config = load(args)?;
    let traj = run_simulation(&config)?;
    let last = traj.records.last().context("run produced no diagnostics")?;
    println!("steps = {}", traj.steps);
    println!("t = {}", last.time);
    println!("entropy = {:.12e}", last.entropy);
    println!("min_f = {:.6e}", traj.raw_min);
    println!("max_f = {:.6e}", traj.raw_max);
    match &config.output.dir {
        Some(dir) => println!("output = {}", dir.display()),
        None => eprintln!("no output directory set; nothing written"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_equilibrium(rho: f64, temperature: f64) -> Result<ExitCode> {
    let (t_f, r_f) = (fermi_temperature(rho), fermi_radius(rho));
    match solve_fd_params(rho, temperature, [0.0; 3]) {
        Ok(p) => {
            println!("state = fermi-dirac");
            println!("a = {:.12e}", p.a);
            println!("c = {:.12e}", p.c);
        }
        Err(Error::SaturationRegime { .. }) => println!("state = saturated"),
        Err(e) => return Err(e.into()),
    }
    println!("T_F = {t_f:.12e}");
    println!("r_F = {r_f:.12e}");
    Ok(ExitCode::SUCCESS)
}

fn write_reports(dir: &Path, config: &bfdk_core::config::SimulationConfig, reports: &[VerificationReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), config.echo())?;
    let mut csv = format!("{REPORT_CSV_HEADER}\n");
    let mut text = String::new();
    for r in reports {
        csv.push_str(&r.csv_rows());
        text.push_str(&r.to_text());
        text.push('\n');
    }
    fs::write(dir.join("report.csv"), csv)?;
    fs::write(dir.join("report.txt"), text)?;
    Ok(())
}

fn cmd_verify(suite: &str, args: &ConfigArgs) -> Result<ExitCode> {
    let config = load(args)?;
    let reports = if suite == "all" {
        run_all(&config)?
    } else if SUITES.contains(&suite) {
        vec![run_suite(suite, &config)?]
    } else {
        bail!("unknown suite `{suite}`; expected one of {} or all", SUITES.join(", "));
    };
    for r in &reports {
        print!("{}", r.to_text());
        println!();
    }
    if let Some(dir) = &config.output.dir {
        write_reports(dir, &config, &reports)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.suite.as_str()).collect();
    if failed.is_empty() {
        println!("verify: all {} suites pass", reports.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: failed suites: {}", failed.join(", "));
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_compare(a: &Path, b: &Path) -> Result<ExitCode> {
    let fa = read_snapshot(a).with_context(|| format!("reading {}", a.display()))?;
    let fb = read_snapshot(b).with_context(|| format!("reading {}", b.display()))?;
    let d = l12_distance(&fa.field, &fb.field)?;
    println!("{d:.12e}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_moments(path: &Path, orders: &[f64]) -> Result<ExitCode> {
    let snap = read_snapshot(path).with_context(|| format!("reading {}", path.display()))?;
    let f = &snap.field;
    let grid = f.grid();
    println!("# n = {}, radius = {}, t = {}, gamma = {}", grid.n_per_axis(), grid.radius(), snap.time, snap.gamma);
    println!("{:<12} {:>22}", "quantity", "value");
    for &s in orders {
        println!("{:<12} {:>22.12e}", format!("m_{s}"), moment(f, s));
    }
    for (name, p, s) in [("|f|_1,0", 1.0, 0.0), ("|f|_1,2", 1.0, 2.0), ("|f|_2,0", 2.0, 0.0), ("|f|_inf,0", f64::INFINITY, 0.0)] {
        println!("{name:<12} {:>22.12e}", weighted_norm(f, p, s)?);
    }
    println!("{:<12} {:>22.12e}", "S", entropy(f));
    if let Ok(m) = macro_moments(f) {
        println!("{:<12} {:>22.12e}", "T", m.temperature);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Equilibrium { rho, temperature } => cmd_equilibrium(*rho, *temperature),
        Command::Verify { suite, config } => cmd_verify(suite, config),
        Command::Compare { a, b } => cmd_compare(a, b),
        Command::Moments { snapshot, orders } => cmd_moments(snapshot, orders),
    }
}
