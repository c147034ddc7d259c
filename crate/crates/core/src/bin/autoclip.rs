use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use autoclip::experiments::{
    cmd_calibrate, cmd_equivalence, cmd_theory_curves, cmd_train, exit_code, infer_model, lazy_region, lazy_table, load_dataset,
    require_pass, similarity_default_data, similarity_table, similarity_trace, six_significant, theta_grid, CsvTable, CurveSettings,
    DataFormat, LazySetting,
};
use autoclip::{AccountantMethod, Error, OptimizerKind, Result};

#[derive(Parser)]
#[command(name = "autoclip", version, about = "Private optimization with automatic clipping")]
struct Cli {
    /// Defaults to 0, or to the config's seed for `train`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// JSON run config (train) or curve settings (theory-curves).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Setting {
    Logistic,
    Mean,
}

#[derive(Subcommand)]
enum Command {
    /// Noise multiplier for a privacy budget.
    Calibrate {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        sample_rate: f64,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value = "rdp")]
        method: AccountantMethod,
    },
    /// Private training from a JSON config.
    Train { path: Option<PathBuf> },
    /// Clipped batch gradients over a parameter grid.
    LazyRegion {
        #[arg(long, value_enum)]
        setting: Setting,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        theta_min: f64,
        #[arg(long, default_value_t = 5.0)]
        theta_max: f64,
    },
    /// Paired-run check that the threshold folds into the learning rate.
    Equivalence {
        #[arg(long)]
        kind: OptimizerKind,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        /// Pair Abadi clipping instead; expected to fail.
        #[arg(long)]
        control: bool,
    },
    /// Convergence-bound curves and fitted slopes.
    TheoryCurves {
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        coef: Option<f64>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
    },
    /// Dot-product similarity of clipped gradients along an SGD run.
    Similarity {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: DataFormat,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        r: f64,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
        #[arg(long, default_value_t = 64.0)]
        batch_size: f64,
    },
}

fn emit(table: &CsvTable, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => table.write(&path),
        None => {
            print!("{}", String::from_utf8_lossy(&table.to_bytes()?));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = cli.out_dir.clone();
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Calibrate { eps, delta, sample_rate, steps, method } => {
            let rec = cmd_calibrate(eps, delta, sample_rate, steps, method)?;
            println!("sigma = {}", six_significant(rec.sigma));
            println!("{}", serde_json::to_string_pretty(&rec)?);
            if let Some(d) = out_dir {
                autoclip::experiments::write_json(&d.join("calibration.json"), &rec)?;
            }
        }
        Command::Train { path } => {
            let path = path.or(cli.config).ok_or_else(|| Error::InvalidArgument("train needs a config path".into()))?;
            let m = cmd_train(&path, out_dir.as_deref(), cli.seed)?;
            println!("sigma = {} steps = {} eps = {}", six_significant(m.sigma), m.steps, six_significant(m.eps_spent));
            println!("{}", serde_json::to_string_pretty(&m.final_metrics)?);
        }
        Command::LazyRegion { setting, r, gamma, grid, theta_min, theta_max } => {
            let setting = match setting {
                Setting::Logistic => LazySetting::Logistic,
                Setting::Mean => LazySetting::Mean,
            };
            let r = r.unwrap_or(setting.default_r());
            let gamma = gamma.unwrap_or(setting.default_gamma());
            let rows = lazy_region(setting, r, gamma, &theta_grid(theta_min, theta_max, grid)?, seed)?;
            let name = format!("lazy_region_{}.csv", if setting == LazySetting::Logistic { "logistic" } else { "mean" });
            emit(&lazy_table(&rows, setting, r, gamma), out_dir.map(|d| d.join(name)))?;
        }
        Command::Equivalence { kind, steps, trials, control } => {
            let report = cmd_equivalence(kind, steps, trials, seed, control)?;
            emit(&report.table(), out_dir.map(|d| d.join("equivalence.csv")))?;
            let verdict = match (control, report.pass) {
                (false, true) => "PASS",
                (false, false) => "FAIL",
                (true, true) => "FAIL (expected-negative control)",
                (true, false) => "control unexpectedly within tolerance",
            };
            eprintln!("{kind}: {verdict}, tolerance {:e}", report.tolerance);
            require_pass(&report)?;
        }
        Command::TheoryCurves { xi, gamma, coef, t_min, t_max } => {
            let mut s = match &cli.config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?)?,
                None => CurveSettings::default(),
            };
            s.xi = xi.unwrap_or(s.xi);
            s.gamma = gamma.unwrap_or(s.gamma);
            s.coef = coef.unwrap_or(s.coef);
            s.t_min = t_min.unwrap_or(s.t_min);
            s.t_max = t_max.unwrap_or(s.t_max);
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("."));
            let summary = cmd_theory_curves(&s, &dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Similarity { dataset, format, steps, r, lr, batch_size } => {
            let data = match dataset {
                Some(p) => load_dataset(&p, format)?,
                None => similarity_default_data(seed)?,
            };
            let spec = infer_model(&data);
            let rows = similarity_trace(&spec, &data, steps, r, lr, batch_size / data.len() as f64, seed)?;
            emit(&similarity_table(&rows), out_dir.map(|d| d.join("similarity.csv")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
