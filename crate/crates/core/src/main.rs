use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cointkit::critical::JohansenDet;
use cointkit::dataset::Schema;
use cointkit::report::commands::{self, parse_process, BUNDLED_FRANCE};
use cointkit::report::{Config, Context, Format, ReportBundle};
use cointkit::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "cointkit", version, about = "Unit-root, cointegration and integral-fit reports for annual series")]
struct Cli {
    /// Comma-delimited dataset; the bundled France reconstruction when omitted.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// TOML file with relation presets; the bundled presets when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Relation preset for the per-relation commands.
    #[arg(long, global = true, default_value = "trivariate")]
    preset: String,
    /// Master seed for Monte Carlo calibration; the config seed when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Tsv)]
    format: FormatArg,
    /// Write tables, figures and metadata under this directory instead of
    /// printing tables to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rate columns are in percent; divide them by 100 at ingest.
    #[arg(long, global = true)]
    percent_input: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FormatArg {
    Tsv,
    Structured,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Descriptive statistics of the series and their differences.
    Descstats,
    /// ADF and DF-GLS grids on levels and differences.
    Unitroot {
        /// Test only these series over the full grid.
        #[arg(long = "series")]
        series: Vec<String>,
    },
    /// Residual unit-root tests and first-stage diagnostics for a relation.
    EngleGranger,
    /// Johansen trace tests over deterministic specifications and lags.
    Johansen {
        #[arg(long = "det", value_parser = parse_det)]
        dets: Vec<JohansenDet>,
        #[command(flatten)]
        lags: LagRange,
    },
    /// Cointegrating relations from a VECM.
    Vecm {
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[command(flatten)]
        lags: LagRange,
    },
    /// Cumulative-curve fit compared with regression and VECM coefficients.
    Cumfit,
    /// Monte Carlo size or power of one test.
    Calibrate {
        /// adf, adf-trend, dfgls, dfgls-trend, johansen, engle-granger,
        /// breusch-godfrey, jarque-bera or arch-lm.
        #[arg(long)]
        test: String,
        /// random-walk, white-noise, ar1, arch1, trend, triangular or
        /// independent-walks; the test's null process when omitted.
        #[arg(long)]
        process: Option<String>,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = 200)]
        length: usize,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
    },
    /// Every table and figure for every configured relation.
    ReportAll,
}

#[derive(Args, Debug, Clone, Copy)]
struct LagRange {
    #[arg(long, default_value_t = 1)]
    min_lag: usize,
    #[arg(long, default_value_t = 4)]
    max_lag: usize,
}

impl LagRange {
    fn range(self) -> Result<std::ops::RangeInclusive<usize>> {
        if self.min_lag == 0 || self.min_lag > self.max_lag {
            return Err(Error::InvalidArgument(format!("lag range {}..={} is empty or starts at 0", self.min_lag, self.max_lag)));
        }
        Ok(self.min_lag..=self.max_lag)
    }
}

fn parse_det(s: &str) -> std::result::Result<JohansenDet, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn context(cli: &Cli) -> Result<Context> {
    let config = match &cli.config {
        Some(p) => Config::from_toml(&fs::read_to_string(p)?)?,
        None => Config::bundled(),
    };
    let schema = Schema::default().with_percent_input(cli.percent_input);
    match &cli.data {
        Some(p) => {
            let label = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
            Context::from_text(&fs::read_to_string(p)?, label, &schema, config, cli.seed)
        }
        None => Context::from_text(BUNDLED_FRANCE, "bundled:france.csv", &schema, config, cli.seed),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let ctx = context(cli)?;
    let preset = cli.preset.as_str();
    let (name, params, bundle): (&str, serde_json::Value, ReportBundle) = match &cli.command {
        Command::Descstats => ("descstats", json!({}), commands::descstats(&ctx)?),
        Command::Unitroot { series } => ("unitroot", json!({ "series": series }), commands::unitroot(&ctx, series)?),
        Command::EngleGranger => ("engle-granger", json!({ "preset": preset }), commands::engle_granger_cmd(&ctx, preset)?),
        Command::Johansen { dets, lags } => {
            let dets = if dets.is_empty() { JohansenDet::ALL.to_vec() } else { dets.clone() };
            let labels: Vec<&str> = dets.iter().map(|d| d.label()).collect();
            let p = json!({ "preset": preset, "deterministic": labels, "lags": [lags.min_lag, lags.max_lag] });
            ("johansen", p, commands::johansen_cmd(&ctx, preset, &dets, lags.range()?)?)
        }
        Command::Vecm { rank, lags } => {
            let p = json!({ "preset": preset, "rank": rank, "lags": [lags.min_lag, lags.max_lag] });
            ("vecm", p, commands::vecm_cmd(&ctx, preset, &[*rank], lags.range()?)?)
        }
        Command::Cumfit => ("cumfit", json!({ "preset": preset }), commands::cumfit_cmd(&ctx, preset)?),
        Command::Calibrate { test, process, reps, length, level } => {
            let proc = process.as_deref().map(parse_process).transpose()?;
            let p = json!({ "test": test, "process": process, "reps": reps, "length": length, "level": level });
            ("calibrate", p, commands::calibrate_cmd(test, proc, *reps, *length, *level, ctx.seed)?)
        }
        Command::ReportAll => ("report-all", json!({}), commands::report_all(&ctx)?),
    };
    let format = match cli.format {
        FormatArg::Tsv => Format::Tsv,
        FormatArg::Structured => Format::Structured,
    };
    match &cli.out {
        Some(dir) => {
            let meta = bundle.metadata(name, &ctx, params);
            bundle.write(dir, format, &meta)?;
        }
        None => print!("{}", bundle.render(format)?),
    }
    for d in &bundle.diagnostics {
        eprintln!("diagnostic: {d}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
