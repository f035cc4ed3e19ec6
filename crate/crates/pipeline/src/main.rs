use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use puddlemap_pipeline::{
    cmd_classify, cmd_correlate, cmd_georef, cmd_resect, cmd_segment, cmd_sofi, service, PipelineConfig, PipelineError,
};

/// Surface-water extent from fixed street cameras.
#[derive(Parser)]
#[command(name = "puddlemap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment every frame; writes segments/<id>.pgm and features.csv.
    Segment(Args),
    /// Train on seeded segments and write per-frame water masks.
    Classify(Args),
    /// Solve the camera from GCPs; writes camera.txt and residuals.csv.
    Resect(Args),
    /// Project mask pixels onto the DEM as GeoJSON points.
    Georef(Args),
    /// Pixel and projected SOFI per frame.
    Sofi(Args),
    /// Phase split, per-phase correlation and lag against the well series.
    Correlate(Args),
    /// Serve the JSON API for the annotation client.
    Serve(Args),
}

#[derive(clap::Args)]
struct Args {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` overrides of configuration entries.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl Args {
    /// Pulls a `--config` that appeared after the first override.
    fn split(self) -> Result<(Option<PathBuf>, Vec<String>), PipelineError> {
        let mut config = self.config;
        let mut rest = Vec::new();
        let mut it = self.overrides.into_iter();
        while let Some(tok) = it.next() {
            if tok == "--config" {
                let path = it.next().ok_or_else(|| PipelineError::Config("`--config` needs a path".into()))?;
                config = Some(PathBuf::from(path));
            } else if let Some(path) = tok.strip_prefix("--config=") {
                config = Some(PathBuf::from(path));
            } else {
                rest.push(tok);
            }
        }
        Ok((config, rest))
    }
}

type Stage = fn(&PipelineConfig) -> Result<puddlemap_pipeline::Outcome, PipelineError>;

fn run(command: Command) -> Result<(), PipelineError> {
    let (args, stage): (Args, Option<Stage>) = match command {
        Command::Segment(a) => (a, Some(cmd_segment)),
        Command::Classify(a) => (a, Some(cmd_classify)),
        Command::Resect(a) => (a, Some(cmd_resect)),
        Command::Georef(a) => (a, Some(cmd_georef)),
        Command::Sofi(a) => (a, Some(cmd_sofi)),
        Command::Correlate(a) => (a, Some(cmd_correlate)),
        Command::Serve(a) => (a, None),
    };
    let (config_path, overrides) = args.split()?;
    let config = PipelineConfig::load(config_path.as_deref(), &overrides)?;
    match stage {
        Some(stage) => {
            let outcome = stage(&config)?;
            for path in &outcome.written {
                log::debug!("wrote {}", path.display());
            }
            Ok(())
        }
        None => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| PipelineError::Input(e.to_string()))?;
            runtime.block_on(service::serve(config))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{} ({})", e, e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
