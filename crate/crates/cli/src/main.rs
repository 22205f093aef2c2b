use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aquaglide::config::{parse_value, ScenarioConfig};
use aquaglide::experiments::{
    self, load_preset, run_preset, run_single, run_sweep, summary_line, Axis, OutputFormat,
    ReduceGeometry, SweepSpec, PRESET_NAMES,
};
use aquaglide::{Error, ErrorCategory, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "aquaglide", version, about = "Aquatic-aerial glider simulator")]
struct Cli {
    /// Suppress summary output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Trajectory format.
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Sweep a scenario over one or more parameter axes.
    Sweep {
        /// Sweep file: `{"base": <config path>, "axes": [...]}`.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
        /// Concurrent members (0 uses every core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Run a bundled study preset.
    Preset {
        /// Preset name, or `list`.
        name: String,
        /// Base scenario config (defaults to the shipped defaults).
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Reduce balance measurements to aerodynamic coefficients.
    Reduce {
        /// CSV with header `alpha_deg,Fz,Fx[,M]`.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tunnel speed, m/s.
        #[arg(long, default_value_t = ReduceGeometry::default().speed)]
        speed: f64,
        /// Reference area, m^2.
        #[arg(long, default_value_t = ReduceGeometry::default().area)]
        area: f64,
        /// Air density, kg/m^3.
        #[arg(long, default_value_t = ReduceGeometry::default().rho)]
        rho: f64,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    base: PathBuf,
    axes: Vec<Axis>,
}

fn load_doc(path: &Path) -> Result<(serde_json::Value, PathBuf)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc = parse_value(&text, &path.display().to_string())?;
    // Catch schema errors before fanning out.
    ScenarioConfig::from_value(doc.clone(), &path.display().to_string())?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((doc, dir))
}

fn run(cli: Cli) -> Result<bool> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Simulate { config, output } => {
            let r = run_single(&config, &output.out, output.format)?;
            if !quiet {
                println!("{}", summary_line(&r.trajectory.summary));
                println!("wrote {} and {}", r.trajectory_path.display(), r.sidecar_path.display());
            }
            Ok(r.trajectory.summary.valid)
        }
        Command::Sweep { config, output, jobs } => {
            let text = fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let file: SweepFile = serde_json::from_str(&text).map_err(|e| Error::Config {
                source_name: config.display().to_string(),
                message: e.to_string(),
            })?;
            let dir = config.parent().unwrap_or(Path::new(""));
            let (base, base_dir) = load_doc(&dir.join(&file.base))?;
            let spec = SweepSpec::new(base, base_dir, file.axes);
            let result = run_sweep(&spec, jobs, Some(&output.out), output.format)?;
            if !quiet {
                print_rows(&result);
            }
            Ok(result.rows.iter().all(|r| r.summary.is_none_or(|s| s.valid)))
        }
        Command::Preset { name, config, output, jobs } => {
            if name == "list" {
                for n in PRESET_NAMES {
                    println!("{n:16} {}", load_preset(n)?.description);
                }
                return Ok(true);
            }
            let base = config.as_deref().map(load_doc).transpose()?;
            let report = run_preset(&name, base, jobs, Some(&output.out), output.format)?;
            if !quiet {
                print_rows(&report.sweep);
                println!("{}", serde_json::to_string(&report.metrics).expect("metrics serialize"));
            }
            Ok(report.sweep.rows.iter().all(|r| r.summary.is_none_or(|s| s.valid)))
        }
        Command::Reduce { input, out, speed, area, rho } => {
            let file = fs::File::open(&input).map_err(|e| Error::io(&input, e))?;
            let rows = experiments::reduce_coeffs(file, &ReduceGeometry { speed, area, rho })?;
            match out {
                Some(path) => {
                    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    experiments::write_coeffs(&rows, f)?;
                }
                None => experiments::write_coeffs(&rows, std::io::stdout().lock())?,
            }
            Ok(true)
        }
    }
}

fn print_rows(result: &experiments::SweepResult) {
    for row in &result.rows {
        match (&row.summary, &row.error) {
            (Some(s), _) => println!("{}: {}", row.value, summary_line(s)),
            (None, Some(e)) => println!("{}: failed: {e}", row.value),
            (None, None) => {}
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: flight did not terminate before max_time");
            ExitCode::from(ErrorCategory::Unterminated.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
