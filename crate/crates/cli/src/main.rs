//! `qdiss`: command-line front end for the driven-dissipation simulator.
//!
//! Experiment subcommands (`ringdown`, `reset`, `cool`, `spectroscopy`) read
//! an optional TOML config, run the sweep, and write a CSV table plus a
//! `manifest.json` recording the resolved settings, seed, wall time, and a
//! digest of the physical constants. `analytic` evaluates closed-form
//! quantities on the spot and `fit` reduces two-column CSV data.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 3 for numerical
//! failures. Errors are emitted to stderr as a single JSON object.

mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand};

use qdiss::analytics::{self, PhotonStatistics};
use qdiss::calibration;
use qdiss::constants::mhz;

use config::{ExperimentKind, Frequency, RunConfig, Temperature};
use output::{constants_fingerprint, write_csv, write_manifest, Manifest};

/// Why a run failed: bad inputs (exit 2) or a numerical problem (exit 3).
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Numerical(_) => "numerical",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<qdiss::Error> for Failure {
    fn from(e: qdiss::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "qdiss",
    version,
    about = "Simulator for on-demand cavity reset and refrigeration",
    propagate_version = true
)]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for the CSV table and manifest.json (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for synthetic measurement noise; overrides the config file.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for sweep points; defaults to all cores.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map the drive-induced cavity decay rate over a pump grid.
    Ringdown,
    /// Simulate the photon drain and dephasing transient after a readout.
    Reset,
    /// Map qubit dephasing against drive power and injected photons.
    Cool,
    /// Sweep the hybridized mode frequencies against dissipator flux bias.
    Spectroscopy,
    /// Evaluate a closed-form quantity and print it to stdout.
    Analytic {
        #[command(subcommand)]
        what: AnalyticCommand,
    },
    /// Fit a model to two-column CSV data and print the result as JSON.
    Fit {
        #[command(subcommand)]
        what: FitCommand,
    },
}

#[derive(Subcommand)]
enum AnalyticCommand {
    /// Bose-Einstein occupation of a mode in a thermal bath.
    Thermal {
        /// Mode frequency with unit suffix, e.g. 5.594GHz.
        #[arg(long = "f", value_name = "FREQ")]
        frequency: String,
        /// Bath temperature with unit suffix, e.g. 115mK.
        #[arg(long = "T", value_name = "TEMP")]
        temperature: String,
    },
    /// Photon-shot-noise dephasing rate at a given occupation.
    Dephasing {
        /// Dispersive shift, e.g. 200kHz.
        #[arg(long, value_name = "FREQ")]
        chi: String,
        /// Photon decay rate, e.g. 57/us or 477kHz.
        #[arg(long, value_name = "FREQ")]
        kappa: String,
        /// Mean photon number.
        #[arg(long, value_name = "N")]
        n_bar: f64,
        /// Treat the photons as a coherent tone instead of a thermal state.
        #[arg(long)]
        coherent: bool,
    },
    /// Cavity loss induced by a sideband exchange of the given strength.
    InducedLoss {
        /// Sideband exchange rate, e.g. 5MHz.
        #[arg(long, value_name = "FREQ")]
        g_p: String,
        /// Dissipator linewidth; defaults to the reference device's 60MHz.
        #[arg(long, value_name = "FREQ")]
        kappa_diss: Option<String>,
    },
}

#[derive(Subcommand)]
enum FitCommand {
    /// Fit amplitude * exp(-rate * t) + offset to (t, y) rows.
    Exponential {
        /// Two-column CSV, optional header row.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
    /// Fit a Lorentzian line on a flat floor to (f, power) rows.
    Lorentzian {
        /// Two-column CSV, optional header row.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
    /// Fit the dissipator flux tuning curve to (phi, frequency) rows.
    FluxCurve {
        /// Two-column CSV, optional header row; frequencies in rad/us.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Pin the coupler shift instead of floating it, e.g. -350MHz.
        #[arg(long, value_name = "FREQ")]
        alpha: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let body = serde_json::json!({
                "error": { "kind": failure.kind(), "message": failure.message() }
            });
            eprintln!("{body}");
            ExitCode::from(failure.exit_code())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        // Repeated initialization keeps the first pool, which is fine here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match &cli.command {
        Command::Analytic { what } => analytic(what),
        Command::Fit { what } => fit(what),
        Command::Ringdown => experiment(&cli, ExperimentKind::Ringdown),
        Command::Reset => experiment(&cli, ExperimentKind::Reset),
        Command::Cool => experiment(&cli, ExperimentKind::Cool),
        Command::Spectroscopy => experiment(&cli, ExperimentKind::Spectroscopy),
    }
}

fn experiment(cli: &Cli, kind: ExperimentKind) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Config)?,
        None => RunConfig::default(),
    };
    if let Some(declared) = config.experiment {
        if declared != kind {
            return Err(Failure::Config(format!(
                "config file declares experiment `{}` but the `{}` subcommand was invoked",
                declared.name(),
                kind.name()
            )));
        }
    }

    let seed = cli.seed.or(config.seed);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    let started = Instant::now();
    let result = match kind {
        ExperimentKind::Ringdown => run::ringdown(&config, seed)?,
        ExperimentKind::Reset => run::reset(&config, seed)?,
        ExperimentKind::Cool => run::cool(&config, seed)?,
        ExperimentKind::Spectroscopy => run::spectroscopy(&config, seed)?,
        ExperimentKind::Analytic | ExperimentKind::Fit => {
            unreachable!("not sweep experiments")
        }
    };

    write_csv(&out_dir.join(result.file_name), &result.table).map_err(Failure::Numerical)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        experiment: kind.name(),
        seed,
        wall_time_ms: started.elapsed().as_millis(),
        constants_sha256: constants_fingerprint(),
        config: serde_json::to_value(&config).map_err(|e| Failure::Numerical(e.to_string()))?,
        outputs: vec![result.file_name.to_string()],
        summary: result.summary,
    };
    write_manifest(&out_dir, &manifest).map_err(Failure::Numerical)?;
    println!(
        "wrote {} and manifest.json to {}",
        result.file_name,
        out_dir.display()
    );
    Ok(())
}

fn parse_frequency(text: &str, flag: &str) -> Result<f64, Failure> {
    Frequency::from_str(text)
        .map(|f| f.0)
        .map_err(|e| Failure::Config(format!("--{flag}: {e}")))
}

fn parse_temperature(text: &str, flag: &str) -> Result<f64, Failure> {
    Temperature::from_str(text)
        .map(|t| t.0)
        .map_err(|e| Failure::Config(format!("--{flag}: {e}")))
}

fn analytic(command: &AnalyticCommand) -> Result<(), Failure> {
    match command {
        AnalyticCommand::Thermal {
            frequency,
            temperature,
        } => {
            let omega = parse_frequency(frequency, "f")?;
            let temp = parse_temperature(temperature, "T")?;
            if omega <= 0.0 {
                return Err(Failure::Config("--f must be positive".into()));
            }
            if temp < 0.0 {
                return Err(Failure::Config("--T must not be negative".into()));
            }
            println!("{:.6}", analytics::thermal_occupation(omega, temp));
        }
        AnalyticCommand::Dephasing {
            chi,
            kappa,
            n_bar,
            coherent,
        } => {
            let chi = parse_frequency(chi, "chi")?;
            let kappa = parse_frequency(kappa, "kappa")?;
            let statistics = if *coherent {
                PhotonStatistics::Coherent
            } else {
                PhotonStatistics::Thermal
            };
            println!("{:.6}", analytics::photon_dephasing(chi, kappa, *n_bar, statistics));
        }
        AnalyticCommand::InducedLoss { g_p, kappa_diss } => {
            let g_p = parse_frequency(g_p, "g-p")?;
            let kappa_diss = match kappa_diss {
                Some(text) => parse_frequency(text, "kappa-diss")?,
                None => mhz(60.0),
            };
            let loss = analytics::effective_loss(g_p, kappa_diss)
                .map_err(|e| Failure::Config(e.to_string()))?;
            println!("{:.6}", loss.rate);
        }
    }
    Ok(())
}

fn fit(command: &FitCommand) -> Result<(), Failure> {
    let result = match command {
        FitCommand::Exponential { data } => {
            let (x, y) = read_xy(data)?;
            calibration::fit_exponential(&x, &y)?
        }
        FitCommand::Lorentzian { data } => {
            let (x, y) = read_xy(data)?;
            calibration::fit_lorentzian(&x, &y)?
        }
        FitCommand::FluxCurve { data, alpha } => {
            let (x, y) = read_xy(data)?;
            let alpha = alpha
                .as_deref()
                .map(|text| parse_frequency(text, "alpha"))
                .transpose()?;
            let points: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
            calibration::fit_flux_curve(&points, alpha)?
        }
    };
    let body =
        serde_json::to_string_pretty(&result).map_err(|e| Failure::Numerical(e.to_string()))?;
    println!("{body}");
    Ok(())
}

/// Reads a two-column numeric CSV, tolerating a single header row.
fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        if record.len() < 2 {
            return Err(Failure::Config(format!(
                "{}: row {} has {} columns, need 2",
                path.display(),
                i + 1,
                record.len()
            )));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                x.push(a);
                y.push(b);
            }
            _ if i == 0 => {}
            _ => {
                return Err(Failure::Config(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if x.is_empty() {
        return Err(Failure::Config(format!(
            "{}: no numeric data rows",
            path.display()
        )));
    }
    Ok((x, y))
}
