use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edca_core::config::ConfigDocument;
use edca_core::delay::service_models;
use edca_core::par::Strategy;
use edca_core::platoon::{GapMapping, KappaMode};
use edca_core::report;
use edca_core::sim::run_all;
use edca_core::sweep::{analyze, axis_values, SweepAxis, SweepContext};
use edca_core::Error;

const DEFAULT_CONFIG_NAME: &str = "edca.toml";

#[derive(Debug, Parser)]
#[command(name = "edca", version, about = "EDCA delay model, simulator and platoon sweeps")]
struct Cli {
    /// Scenario file (TOML). Relative paths are also looked up in the
    /// config directory.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory searched for configs; `edca.toml` there is the default.
    #[arg(long, global = true, env = "EDCA_CONFIG_DIR", value_name = "DIR")]
    config_dir: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "results", value_name = "DIR")]
    out: PathBuf,

    /// Run sweep points and simulation runs one at a time.
    #[arg(long, global = true)]
    sequential: bool,

    /// Worker threads for parallel work (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the fixed point and report delay moments and reliability.
    Analyze {
        /// Delay budgets in ms at which to report reliability.
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
        /// Also write the service time distributions.
        #[arg(long)]
        distribution: bool,
        /// Write the effective configuration to `config.toml`.
        #[arg(long)]
        dump_config: bool,
    },
    /// Sweep one parameter and tabulate delay moments (or reliability for `tau`).
    Sweep {
        /// n_stations, data_rate, packet_bits, lambda0, lambda1, headway or tau (ms).
        #[arg(long)]
        axis: SweepAxis,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long, value_enum)]
        mapping: Option<MappingArg>,
    },
    /// Run the discrete-event simulator.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Headway sweep of stability, acceptance, delay and reliability.
    Platoon {
        #[command(flatten)]
        range: RangeArgs,
        /// Only one mapping; both are written by default.
        #[arg(long, value_enum)]
        mapping: Option<MappingArg>,
        #[arg(long, value_enum)]
        kappa_mode: Option<KappaArg>,
        /// Append simulated delay columns.
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Critical delay over headways.
    Stability {
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long, value_enum)]
        kappa_mode: Option<KappaArg>,
    },
}

#[derive(Debug, Args)]
struct RangeArgs {
    #[arg(long, requires = "to", conflicts_with = "values")]
    from: Option<f64>,
    #[arg(long, requires = "from")]
    to: Option<f64>,
    /// Number of points, endpoints included.
    #[arg(long, default_value_t = 9)]
    steps: usize,
    #[arg(long)]
    log_spaced: bool,
    /// Explicit comma-separated points.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

impl RangeArgs {
    fn points(&self, default: (f64, f64)) -> Result<Vec<f64>, Error> {
        if !self.values.is_empty() {
            if self.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep values must be finite".into()));
            }
            return Ok(self.values.clone());
        }
        let (from, to) = match (self.from, self.to) {
            (Some(f), Some(t)) => (f, t),
            _ => default,
        };
        axis_values(from, to, self.steps, self.log_spaced)
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<u32>,
    /// Simulated seconds per run.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MappingArg {
    Linear,
    #[value(alias = "logarithmic")]
    Log,
}

impl From<MappingArg> for GapMapping {
    fn from(m: MappingArg) -> Self {
        match m {
            MappingArg::Linear => GapMapping::Linear,
            MappingArg::Log => GapMapping::Logarithmic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KappaArg {
    Deterministic,
    Sampled,
}

impl From<KappaArg> for KappaMode {
    fn from(k: KappaArg) -> Self {
        match k {
            KappaArg::Deterministic => KappaMode::Deterministic,
            KappaArg::Sampled => KappaMode::Sampled,
        }
    }
}

fn mapping_name(m: GapMapping) -> &'static str {
    match m {
        GapMapping::Linear => "linear",
        GapMapping::Logarithmic => "log",
    }
}

fn exit_code(e: &Error, simulating: bool) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Simulation(_) => 4,
        Error::Io(_) | Error::Csv(_) => 1,
        _ if simulating => 4,
        _ => 3,
    }
}

fn resolve_config(cli: &Cli) -> Result<ConfigDocument, Error> {
    match (&cli.config, &cli.config_dir) {
        (Some(p), Some(dir)) if p.is_relative() && !p.exists() => ConfigDocument::load(&dir.join(p)),
        (Some(p), _) => ConfigDocument::load(p),
        (None, Some(dir)) if dir.join(DEFAULT_CONFIG_NAME).is_file() => {
            ConfigDocument::load(&dir.join(DEFAULT_CONFIG_NAME))
        }
        (None, _) => Ok(ConfigDocument::default()),
    }
}

fn apply_sim_args(doc: &mut ConfigDocument, a: &SimArgs) -> Result<(), Error> {
    if let Some(s) = a.seed {
        doc.sim.seed = s;
    }
    if let Some(r) = a.runs {
        doc.sim.runs = r;
    }
    if let Some(d) = a.duration {
        doc.sim.duration_s = d;
    }
    doc.sim_config().map(|_| ())
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir)?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), Error>) -> Result<(), Error> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let mut doc = resolve_config(cli)?;
    let strategy = if cli.sequential { Strategy::Sequential } else { Strategy::Parallel };
    #[cfg(feature = "parallel")]
    if cli.threads > 0 {
        if let Err(e) = edca_core::par::set_threads(cli.threads) {
            log::warn!("thread pool: {e}");
        }
    }

    // Validate everything the command needs before anything touches the disk.
    match &cli.command {
        Command::Simulate { sim } | Command::Platoon { sim, .. } => apply_sim_args(&mut doc, sim)?,
        _ => {}
    }
    match &cli.command {
        Command::Platoon { kappa_mode: Some(k), .. } | Command::Stability { kappa_mode: Some(k), .. } => {
            doc.platoon.kappa_mode = (*k).into();
        }
        _ => {}
    }
    if let Command::Sweep { mapping: Some(m), .. } = &cli.command {
        doc.platoon.gap.mapping = (*m).into();
    }
    let ctx = SweepContext {
        scenario: doc.scenario()?,
        solver: doc.solver_options()?,
        platoon: doc.platoon_setup()?,
        strategy,
    };

    match &cli.command {
        Command::Analyze { tau, distribution, dump_config } => {
            let taus: Vec<f64> = tau.iter().map(|t| t * 1e-3).collect();
            let a = analyze(&ctx.scenario, &ctx.solver)?;
            report::write_analysis(io::stdout().lock(), &a, &taus)?;
            let out = Output::create(&cli.out)?;
            out.write("analysis.txt", |w| report::write_analysis(w, &a, &taus))?;
            if !taus.is_empty() {
                let rows: Vec<_> = taus.iter().map(|&t| (t, a.reliability(t))).collect();
                out.write("reliability.csv", |w| report::write_reliability(w, &rows))?;
            }
            if *distribution {
                let models = service_models(&ctx.scenario, &a.solution, ctx.solver.grid)?;
                for (ac, m) in models.iter().enumerate() {
                    out.write(&format!("service_ac{ac}.csv"), |w| report::write_distribution(w, &m.distribution()))?;
                }
            }
            if *dump_config {
                let text = doc.to_toml()?;
                out.write("config.toml", |w| Ok(w.write_all(text.as_bytes())?))?;
            }
        }
        Command::Sweep { axis, range, .. } => {
            let default = match axis {
                SweepAxis::NStations => (10.0, 500.0),
                SweepAxis::DataRate => (62.5e3, 100e6),
                SweepAxis::PacketBits => (10.0, 10_000.0),
                SweepAxis::Lambda0 | SweepAxis::Lambda1 => (1.0, 100.0),
                SweepAxis::Headway => (2.0, 10.0),
                SweepAxis::Tau => (0.0, 20.0),
            };
            let xs = range.points(default)?;
            let out = Output::create(&cli.out)?;
            if *axis == SweepAxis::Tau {
                let taus: Vec<f64> = xs.iter().map(|t| t * 1e-3).collect();
                let rows = ctx.reliability_curve(&taus)?;
                out.write("sweep_tau.csv", |w| report::write_reliability(w, &rows))?;
            } else {
                let rows = ctx.delay_sweep(*axis, &xs);
                out.write(&format!("sweep_{axis}.csv"), |w| report::write_delay_sweep(w, &rows))?;
            }
        }
        Command::Simulate { .. } => {
            let cfg = doc.sim_config()?;
            let runs = run_all(&cfg, strategy).map_err(|e| match e {
                Error::Config(m) => Error::Config(m),
                other => Error::Simulation(other.to_string()),
            })?;
            let out = Output::create(&cli.out)?;
            report::write_sim(io::stdout().lock(), &runs)?;
            out.write("simulation.csv", |w| report::write_sim(w, &runs))?;
        }
        Command::Platoon { range, mapping, simulate, .. } => {
            let ys = range.points((2.0, 10.0))?;
            let mappings = match mapping {
                Some(m) => vec![GapMapping::from(*m)],
                None => vec![GapMapping::Linear, GapMapping::Logarithmic],
            };
            let sim = if *simulate { Some(doc.sim_config()?) } else { None };
            let out = Output::create(&cli.out)?;
            for m in mappings {
                let rows = ctx.platoon_sweep(&ys, m, sim.as_ref());
                out.write(&format!("platoon_{}.csv", mapping_name(m)), |w| {
                    report::write_platoon(w, &rows, sim.is_some())
                })?;
            }
        }
        Command::Stability { range, .. } => {
            let ys = range.points((2.0, 10.0))?;
            let rows: Vec<_> = ys
                .iter()
                .filter_map(|&y| match ctx.platoon.evaluate(y) {
                    Ok(r) => Some(r),
                    Err(e) => {
                        log::warn!("headway {y} m: {e}");
                        None
                    }
                })
                .collect();
            let out = Output::create(&cli.out)?;
            out.write("stability.csv", |w| report::write_stability(w, &rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let simulating = matches!(cli.command, Command::Simulate { .. } | Command::Platoon { simulate: true, .. });
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e, simulating))
        }
    }
}
