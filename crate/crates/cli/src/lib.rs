//! Command-line front end: one subcommand per workflow, INI configuration,
//! CSV outputs and a JSON run manifest.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod manifest;

pub use config::load_config;
pub use manifest::{sha256_hex, RunManifest};

use matml::io::Table;

/// Failures grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration: exit 1.
    Usage(String),
    /// Bad data, unreadable input or a solver failure: exit 2.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Failure(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => m,
        }
    }

    /// Prefixes the message with a path.
    pub fn at(self, path: &Path) -> CliError {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            CliError::Failure(m) => CliError::Failure(format!("{}: {m}", path.display())),
        }
    }
}

impl From<matml::Error> for CliError {
    fn from(e: matml::Error) -> Self {
        match e {
            matml::Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("io error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "matml", version, about = "Data-driven materials physics workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// INI configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving outputs and manifest.json.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Config override `Section.key=value`; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Also write whitespace-separated `.dat` copies of plot data.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    AllenCahn,
    Schnakenberg,
    SteadyDiffusion,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a direct numerical simulation.
    Dns {
        #[arg(long, value_enum)]
        solver: Solver,
        #[command(flatten)]
        common: Common,
    },
    /// Stepwise identification on library CSVs.
    Vsi {
        /// Operator matrix, one labelled column per operator.
        #[arg(long)]
        chi: PathBuf,
        /// Target vector, one column.
        #[arg(long)]
        y: PathBuf,
        /// Optional `node,time_index` provenance of each row.
        #[arg(long)]
        dof_map: Option<PathBuf>,
        /// Also run the confirmation test.
        #[arg(long)]
        confirm: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Non-local derivatives of point-cloud data.
    Graph {
        /// Input CSV; defaults to the path given in the settings.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train, evaluate or scan an integrable network.
    Idnn {
        #[command(subcommand)]
        action: IdnnAction,
    },
    /// Active-learning loop on the synthetic free-energy oracle.
    ActiveLearning {
        #[command(flatten)]
        common: Common,
    },
    /// Allen-Cahn ensemble to reduced-order model.
    AllenCahnRom {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Subcommand)]
enum IdnnAction {
    /// Fit a network to `x_k` points with `y` values and/or `dy_k` gradients.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Antiderivative value and gradient at the given points.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Hessian convexity flags at the given points or on a grid.
    ConvexityScan {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// What a subcommand did, for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub config: String,
    pub seeds: Vec<(String, u64)>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub summary: Vec<(String, String)>,
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    let (name, common, result) = dispatch(cli.command);
    let result = result.and_then(|outcome| {
        RunManifest::new(name, &common.out_dir, outcome, start.elapsed().as_secs_f64()).write(&common.out_dir)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("matml {name}: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> (&'static str, Common, CliResult<Outcome>) {
    match command {
        Command::Dns { solver, common } => {
            let r = commands::dns(solver, &common);
            ("dns", common, r)
        }
        Command::Vsi { chi, y, dof_map, confirm, common } => {
            let r = commands::vsi(&chi, &y, dof_map.as_deref(), confirm, &common);
            ("vsi", common, r)
        }
        Command::Graph { input, common } => {
            let r = commands::graph(input.as_deref(), &common);
            ("graph", common, r)
        }
        Command::Idnn { action } => match action {
            IdnnAction::Train { data, common } => {
                let r = commands::idnn_train(&data, &common);
                ("idnn train", common, r)
            }
            IdnnAction::Eval { model, points, common } => {
                let r = commands::idnn_eval(&model, &points, &common);
                ("idnn eval", common, r)
            }
            IdnnAction::ConvexityScan { model, points, common } => {
                let r = commands::idnn_scan(&model, points.as_deref(), &common);
                ("idnn convexity-scan", common, r)
            }
        },
        Command::ActiveLearning { common } => {
            let r = commands::active_learning(&common);
            ("active-learning", common, r)
        }
        Command::AllenCahnRom { common } => {
            let r = commands::allen_cahn_rom(&common);
            ("allen-cahn-rom", common, r)
        }
    }
}

/// Writes `table` as CSV at `path`; with `gnuplot` also a whitespace
/// variant next to it with extension `.dat`. Returns the written paths.
pub fn emit_plot_data(table: &Table, path: &Path, gnuplot: bool) -> CliResult<Vec<PathBuf>> {
    table.write_csv(path).map_err(|e| CliError::from(e).at(path))?;
    let mut out = vec![path.to_path_buf()];
    if gnuplot {
        let dat = path.with_extension("dat");
        let file = std::fs::File::create(&dat).map_err(|e| CliError::from(e).at(&dat))?;
        table.to_gnuplot(std::io::BufWriter::new(file)).map_err(|e| CliError::from(e).at(&dat))?;
        out.push(dat);
    }
    Ok(out)
}

/// Reads a CSV table, naming the path on failure.
pub fn read_table(path: &Path) -> CliResult<Table> {
    if !path.is_file() {
        return Err(CliError::Failure(format!("{}: no such file", path.display())));
    }
    Table::read_csv(path).map_err(|e| CliError::from(e).at(path))
}
