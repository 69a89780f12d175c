use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use agentgate::benchgen::{self, CategoryCounts, GenSpec};
use agentgate::eval::{self, EvalError, Split};
use agentgate_cli::request::RouteRequest;
use agentgate_cli::server::{self, render_response, AppState};
use agentgate_cli::{build_input, AppConfig, Overrides};
use anyhow::Context;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "agentgate", version, about = "Structured routing over an agent registry")]
struct Cli {
    /// TOML or JSON settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log filter, e.g. `info` or `agentgate=debug`.
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct PipelineArgs {
    /// Registry JSON file (defaults to the built-in demo catalog).
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Cloud hand-off threshold on effective confidence.
    #[arg(long)]
    tau: Option<f64>,
    /// Edge decider: rule, rank or remote.
    #[arg(long)]
    backend: Option<String>,
    /// Optional cloud decider used when confidence falls below tau.
    #[arg(long)]
    cloud: Option<String>,
    /// Number of candidates retrieved from the registry.
    #[arg(long)]
    k: Option<usize>,
    /// Semantic hint weight of the lexical scorer.
    #[arg(long)]
    lambda: Option<f64>,
    /// Chat-completions URL for the remote decider.
    #[arg(long)]
    remote_endpoint: Option<String>,
    #[arg(long)]
    remote_model: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Route a single query and print the structured output.
    Route {
        #[arg(long)]
        query: String,
        #[arg(long)]
        context: Option<String>,
        /// Comma-separated agent names; retrieved from the registry when omitted.
        #[arg(long, value_delimiter = ',')]
        candidates: Option<Vec<String>>,
        /// Include the per-attempt trace.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Score a backend on a benchmark file.
    Eval {
        #[arg(long)]
        bench: PathBuf,
        /// train, validation or test; all instances when omitted.
        #[arg(long)]
        split: Option<String>,
        /// Where to write report.json; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Generate a benchmark file.
    Gen {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// call,plan,direct,escalate
        #[arg(long, default_value = "200,60,40,20")]
        counts: String,
        #[arg(long, default_value_t = 0.25)]
        hard_frac: f64,
        /// Comma-separated domain keys; all ten when omitted.
        #[arg(long, value_delimiter = ',')]
        domains: Option<Vec<String>>,
    },
    /// Run the HTTP service.
    Serve {
        /// Address to bind, e.g. 0.0.0.0:8080.
        #[arg(long)]
        listen: Option<String>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

/// Failure with a chosen exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self { code: 1, error: e.into() }
    }
}

fn overrides(cli: &Cli, p: &PipelineArgs, listen: Option<String>) -> Overrides {
    Overrides {
        registry: p.registry.clone(),
        tau: p.tau,
        backend: p.backend.clone(),
        cloud: p.cloud.clone(),
        k: p.k,
        lambda: p.lambda,
        listen,
        log_level: cli.log_level.clone(),
        remote_endpoint: p.remote_endpoint.clone(),
        remote_model: p.remote_model.clone(),
    }
}

fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(level)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config_path = cli.config.as_deref();
    match &cli.command {
        Command::Route { query, context, candidates, trace, pipeline } => {
            let cfg = AppConfig::load(config_path, overrides(&cli, pipeline, None))?;
            init_logging(&cfg.log_level);
            let registry = cfg.registry()?;
            let router = cfg.router()?;
            let req = RouteRequest { query: query.clone(), context: context.clone(), candidates: candidates.clone() };
            let input = build_input(&registry, cfg.k, &cfg.safeguards, req)?;
            let (output, t) = router.route(&input)?;
            println!("{}", render_response(&output, trace.then_some(&t)));
        }
        Command::Eval { bench, split, out, pipeline } => {
            let cfg = AppConfig::load(config_path, overrides(&cli, pipeline, None))?;
            init_logging(&cfg.log_level);
            let split = split.as_deref().map(str::parse::<Split>).transpose().map_err(anyhow::Error::msg)?;
            let instances = eval::load_benchmark(bench).map_err(|e| {
                let code = match e {
                    EvalError::Io(_) | EvalError::MalformedLine { .. } | EvalError::InvalidGold { .. } => 2,
                    _ => 1,
                };
                Failure { code, error: anyhow::Error::new(e).context(format!("loading {}", bench.display())) }
            })?;
            let instances = eval::filter_split(instances, split);
            let router = cfg.router()?;
            let report = eval::evaluate(&router, &instances)?;
            tracing::info!(
                instances = instances.len(),
                action_accuracy = report.action_accuracy,
                escalation_recall = report.escalation_recall,
                "evaluation done"
            );
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
        }
        Command::Gen { seed, out, counts, hard_frac, domains } => {
            let counts: CategoryCounts = counts.parse()?;
            let mut spec = GenSpec { seed: *seed, counts, hard_negative_fraction: *hard_frac, ..GenSpec::default() };
            if let Some(d) = domains {
                spec.domains = d.clone();
            }
            write_or_print(out.as_deref(), &benchgen::generate_jsonl(&spec)?)?;
        }
        Command::Serve { listen, pipeline } => {
            let cfg = AppConfig::load(config_path, overrides(&cli, pipeline, listen.clone()))?;
            init_logging(&cfg.log_level);
            let state = AppState::new(cfg.router()?, cfg.registry()?, cfg.k, cfg.safeguards.clone());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(Arc::new(state), &cfg.listen))
                .with_context(|| format!("serving on {}", cfg.listen))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            // Skip causes already quoted by the message above them.
            let mut msg = String::new();
            for cause in f.error.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg = if msg.is_empty() { cause } else { format!("{msg}: {cause}") };
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(f.code)
        }
    }
}
