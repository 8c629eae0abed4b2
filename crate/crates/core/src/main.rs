use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use darcy_bvc::study::{parse_config, run_study, RawConfig};

/// Convergence studies for boundary-value-corrected BDM mixed elements.
#[derive(Parser, Debug)]
#[command(name = "darcy-bvc", version)]
struct Cli {
    /// Plain-text `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// circle | ring
    #[arg(long)]
    domain: Option<String>,
    /// Velocity degree (BDM_k).
    #[arg(long)]
    k: Option<usize>,
    /// Taylor order of the boundary correction (default k).
    #[arg(long)]
    m: Option<usize>,
    /// corrected | uncorrected-strong
    #[arg(long)]
    mode: Option<String>,
    /// Refinement levels, e.g. `1..4`.
    #[arg(long)]
    levels: Option<String>,
    /// CSV report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Directory for VTK field files.
    #[arg(long)]
    export_fields: Option<PathBuf>,
    /// Directory for coordinate-format system dumps.
    #[arg(long)]
    dump_system: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Solve levels concurrently.
    #[arg(long)]
    parallel: bool,
}

fn run(cli: Cli) -> darcy_bvc::Result<()> {
    let text = cli.config.as_ref().map(std::fs::read_to_string).transpose()?;
    let flags = RawConfig {
        domain: cli.domain,
        k: cli.k,
        m: cli.m,
        mode: cli.mode,
        levels: cli.levels,
        report: cli.report,
        json: cli.json,
        export_fields: cli.export_fields,
        dump_system: cli.dump_system,
        seed: cli.seed,
        parallel: cli.parallel.then_some(true),
        ..Default::default()
    };
    let (config, warnings) = parse_config(text.as_deref(), flags)?;
    for w in warnings {
        log::warn!("{w}");
    }
    let report = run_study(&config)?;
    print!("{}", report.to_table());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
