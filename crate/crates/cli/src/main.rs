use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afdm_core::sweep::{
    figure_recipe, hwi_preset, recipe_names, run_analysis, run_sweep, write_csv, write_json, OutputFormat, Series,
    SweepConfig, SweepResult,
};
use afdm_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "afdm", version, about = "MIMO-AFDM/OFDM link simulator under hardware impairments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweep with analytic curves attached.
    Simulate(RunArgs),
    /// Analytic curves only, no Monte Carlo.
    Analyze(RunArgs),
    /// List the available presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Figure recipe (fig3, fig10, ...) or hardware preset (ideal, scheme1, scheme2, ...).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; a directory for multi-series figure recipes. Stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Worker threads (all cores when unset).
    #[arg(long, env = "AFDM_WORKERS")]
    workers: Option<usize>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParams(_) | Error::SearchSpace { .. } => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_series(args: &RunArgs) -> Result<Vec<Series>, Failure> {
    let base = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            Some(SweepConfig::from_toml_str(&text)?)
        }
        None => None,
    };
    let mut series = match (args.preset.as_deref(), base) {
        (Some(name), base) if figure_recipe(name).is_some() => {
            if base.is_some() {
                return Err(Failure::Config(format!("figure recipe `{name}` cannot be combined with --config")));
            }
            figure_recipe(name).unwrap_or_default()
        }
        (Some(name), base) => {
            let hwi = hwi_preset(name).ok_or_else(|| {
                Failure::Config(format!("unknown preset `{name}` (figures: {})", recipe_names().join(", ")))
            })?;
            vec![Series { label: name.to_string(), config: SweepConfig { hwi, ..base.unwrap_or_default() } }]
        }
        (None, Some(cfg)) => vec![Series { label: "sweep".into(), config: cfg }],
        (None, None) => return Err(Failure::Config("either --config or --preset is required".into())),
    };
    for s in &mut series {
        if let Some(seed) = args.seed {
            s.config.seed = seed;
        }
        s.config.validate()?;
    }
    Ok(series)
}

fn write_result(result: &SweepResult, format: OutputFormat, out: impl Write) -> Result<(), Failure> {
    match format {
        OutputFormat::Csv => write_csv(result, out)?,
        OutputFormat::Json => write_json(result, out)?,
    }
    Ok(())
}

fn output_path(args: &RunArgs, series: &[Series], label: &str) -> Result<Option<PathBuf>, Failure> {
    let Some(out) = &args.out else {
        return if series.len() > 1 {
            Err(Failure::Config("multi-series recipes need --out <directory>".into()))
        } else {
            Ok(None)
        };
    };
    if series.len() == 1 {
        return Ok(Some(out.clone()));
    }
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let ext = match args.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    Ok(Some(Path::new(out).join(format!("{label}.{ext}"))))
}

fn run(args: &RunArgs, analytic_only: bool) -> Result<(), Failure> {
    let series = load_series(args)?;
    // Resolve every destination before spending compute.
    let paths = series.iter().map(|s| output_path(args, &series, &s.label)).collect::<Result<Vec<_>, _>>()?;
    for (s, path) in series.iter().zip(paths) {
        let result =
            if analytic_only { run_analysis(&s.config, args.workers)? } else { run_sweep(&s.config, args.workers)? };
        match path {
            Some(p) => {
                let file = std::fs::File::create(&p)
                    .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display())))?;
                write_result(&result, args.format, file)?;
                eprintln!("{}: {} rows -> {}", s.label, result.rows.len(), p.display());
            }
            None => write_result(&result, args.format, std::io::stdout().lock())?,
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => run(args, false),
        Command::Analyze(args) => run(args, true),
        Command::Presets => {
            println!("figures: {}", recipe_names().join(" "));
            println!("hardware: ideal scheme1 scheme2 scheme1-additive scheme2-additive");
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
