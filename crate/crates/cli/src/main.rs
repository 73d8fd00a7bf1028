//! `qbat` command-line front end.
//!
//! Exit codes: 0 success, 1 other failure (I/O, no resonance found), 2
//! configuration error, 3 numerical breakdown.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qbat::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(
                qbat::Error::InvalidParameter(_)
                | qbat::Error::BasisTooLarge { .. }
                | qbat::Error::EmptySector(_)
                | qbat::Error::UnsupportedExcitation(_),
            ) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qbat", version, about = "Bosonic quantum battery simulator")]
struct Cli {
    /// Output directory root; each run writes into a subdirectory.
    #[arg(long, global = true, env = "QBAT_OUT", default_value = "qbat-out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Battery single-particle cutoff.
    #[arg(long, global = true)]
    modes_battery: Option<usize>,
    /// Charger single-particle cutoff.
    #[arg(long, global = true)]
    modes_charger: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time evolution of one configuration.
    Simulate(RunArgs),
    /// Transfer-ratio spectrum over one swept parameter.
    Scan(RunArgs),
    /// Locate and fine-tune resonances in a window.
    Resonance(RunArgs),
    /// Two-level model predictions.
    Tlm(RunArgs),
    /// Regenerate a preset figure data set.
    Reproduce {
        /// One of: fig2a fig2b fig2g fig3a fig3b fig4 fig5 fig6 fig7 fig8 fig9.
        figure: String,
        /// Intra-battery couplings for fig7 and fig8 (comma separated).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        g_b: Vec<f64>,
        /// Battery sizes, overriding the preset (comma separated).
        #[arg(long, value_delimiter = ',')]
        n_b: Vec<usize>,
    },
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_b: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    g_b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    g_bc: Option<f64>,
    #[arg(long)]
    omega_c: Option<f64>,
    /// Targeted battery excitation.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    charger_level: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

impl RunArgs {
    fn load(&self, cli: &Cli) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => config::load(p)?,
            None => RunConfig::default(),
        };
        let s = &mut c.system;
        s.n_b = self.n_b.or(s.n_b);
        s.g_b = self.g_b.or(s.g_b);
        s.g_bc = self.g_bc.or(s.g_bc);
        s.omega_c = self.omega_c.or(s.omega_c);
        s.n = self.n.or(s.n);
        s.charger_level = self.charger_level.or(s.charger_level);
        let n = &mut c.numerics;
        n.modes_battery = cli.modes_battery.or(n.modes_battery);
        n.modes_charger = cli.modes_charger.or(n.modes_charger);
        n.t_end = self.t_end.or(n.t_end);
        n.points = self.points.or(n.points);
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qbat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<PathBuf, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(a) => run::simulate(&a.load(cli)?, &cli.out),
        Command::Scan(a) => run::scan(&a.load(cli)?, &cli.out),
        Command::Resonance(a) => run::resonance(&a.load(cli)?, &cli.out),
        Command::Tlm(a) => run::tlm(&a.load(cli)?, &cli.out),
        Command::Reproduce { figure, g_b, n_b } => {
            let preset = run::Preset {
                modes_battery: cli.modes_battery,
                modes_charger: cli.modes_charger,
                g_b_values: g_b.clone(),
                particle_counts: n_b.clone(),
            };
            run::reproduce(figure, &preset, &cli.out)
        }
    }
}
