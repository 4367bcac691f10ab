use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sts_influence::config::AnalysisConfig;
use sts_influence::embed::{registry, ModelFamily};
use sts_influence::pipeline::{run_stages, BackendFactory, PipelineError, Stage};

#[derive(Parser)]
#[command(name = "sts-influence", version, about = "Measure semantic influence of source documents on a target document")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only print errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage.
    Run(RunArgs),
    /// Load, clean, split and segment the corpus.
    Preprocess(RunArgs),
    /// Embed every sentence with every selected model.
    Embed(RunArgs),
    /// Score influencers against the target parts and against each other.
    Score(RunArgs),
    /// Compute statistics, votes and rankings.
    Ensemble(RunArgs),
    /// Write tables, radar charts, the summary and report.json.
    Report(RunArgs),
    /// Inspect the model registry.
    Models {
        #[command(subcommand)]
        command: ModelsCommand,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Analysis config (TOML).
    #[arg(short, long, default_value = "analysis.toml")]
    config: PathBuf,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides run.output_dir.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ModelsCommand {
    /// List known models.
    List {
        #[arg(long)]
        json: bool,
        /// Only models of this family (SBERT, ALBERT, DistilBERT, RoBERTa, TinyBERT, Reference).
        #[arg(long)]
        family: Option<String>,
    },
}

#[derive(Debug)]
enum CliError {
    User(String),
    Pipeline(PipelineError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Pipeline(e) => e.exit_code() as u8,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::User(m) => f.write_str(m),
            CliError::Pipeline(e) => write!(f, "{e}"),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

fn factory() -> &'static dyn BackendFactory {
    #[cfg(feature = "onnx")]
    return &sts_influence_onnx::OnnxFactory;
    #[cfg(not(feature = "onnx"))]
    return &sts_influence::pipeline::ReferenceOnly;
}

fn load_config(args: &RunArgs) -> Result<AnalysisConfig, CliError> {
    let mut cfg = AnalysisConfig::load(&args.config).map_err(PipelineError::from)?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::User("--threads must be positive".into()));
        }
        cfg.run.threads = Some(n);
    }
    if let Some(dir) = &args.output_dir {
        cfg.run.output_dir = absolute(dir);
    }
    Ok(cfg)
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
    }
}

fn stages(args: &RunArgs, stages: &[Stage]) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    run_stages(&cfg, factory(), stages)?;
    if stages.contains(&Stage::Report) {
        println!("{}", cfg.output_dir().join("report").display());
    }
    Ok(())
}

fn list_models(json: bool, family: Option<&str>) -> Result<(), CliError> {
    let family = match family {
        Some(f) => Some(ModelFamily::parse(f).ok_or_else(|| CliError::User(format!("unknown model family {f:?}")))?),
        None => None,
    };
    let models: Vec<_> = registry().into_iter().filter(|m| family.is_none_or(|f| m.family == f)).collect();
    if json {
        let text = serde_json::to_string_pretty(&models).map_err(|e| CliError::User(e.to_string()))?;
        println!("{text}");
        return Ok(());
    }
    println!("{:<11} {:<10} {:<37} {:>10} {:>5} {:<7}", "NAME", "FAMILY", "IDENTIFIER", "MAX_TOKENS", "DIMS", "POOLING");
    for m in models {
        let dims = m.dims.map_or("vocab".to_string(), |d| d.to_string());
        println!("{:<11} {:<10} {:<37} {:>10} {:>5} {:<7}", m.name, m.family.as_str(), m.identifier, m.max_tokens, dims, m.pooling.to_string());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Run(a) => stages(a, &Stage::ALL),
        Command::Preprocess(a) => stages(a, &[Stage::Preprocess]),
        Command::Embed(a) => stages(a, &[Stage::Embed]),
        Command::Score(a) => stages(a, &[Stage::Score]),
        Command::Ensemble(a) => stages(a, &[Stage::Ensemble]),
        Command::Report(a) => stages(a, &[Stage::Report]),
        Command::Models { command: ModelsCommand::List { json, family } } => list_models(*json, family.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
