mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Overrides;

#[derive(Parser)]
#[command(name = "vidroute", version, about = "Modality-routed video clip retrieval and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Flat JSON config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-modality retrieval depth (also the linear fusion constant).
    #[arg(long)]
    depth: Option<usize>,
    /// linear | rrf
    #[arg(long)]
    fusion: Option<String>,
    #[arg(long)]
    rrf_k: Option<f64>,
    /// rule | llm | replay | oracle | all
    #[arg(long)]
    router: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rayon worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct RouterArgs {
    /// JSONL of {query_id, raw_response} for the replay router.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// multi | single
    #[arg(long)]
    mode: Option<String>,
    /// Fail instead of searching all modalities when the router errors.
    #[arg(long)]
    no_fallback: bool,
    /// Append LLM requests and responses to this JSONL file.
    #[arg(long)]
    audit_log: Option<PathBuf>,
    /// Search each modality with the router's rewritten query.
    #[arg(long)]
    use_rewrites: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus.jsonl and queries.jsonl into --out.
    GenCorpus {
        #[arg(long)]
        videos: Option<usize>,
        #[arg(long)]
        clips_per_video: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Build per-modality indices from a corpus into --out.
    BuildIndex {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Also build the fused-caption index used by the all-text method.
        #[arg(long)]
        with_fused: bool,
        #[arg(long)]
        dim: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Route one query and print the decision.
    Route {
        text: String,
        /// Query id used to look up replay entries.
        #[arg(long, default_value = "adhoc")]
        query_id: String,
        #[command(flatten)]
        router: RouterArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Route, search and fuse one query; print the ranked clips.
    Query {
        text: String,
        #[arg(long, default_value = "adhoc")]
        query_id: String,
        #[arg(long)]
        index_dir: Option<PathBuf>,
        /// Results to print.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[command(flatten)]
        router: RouterArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate methods over a query set and write the report.
    Evaluate {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        index_dir: Option<PathBuf>,
        /// Comma-separated: routed, all-text, late-fusion-all, single(asr|ocr|visuals)
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Also write the breakdown tables as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        router: RouterArgs,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn into_overrides(self) -> (Overrides, Option<PathBuf>) {
        let o = Overrides {
            seed: self.seed,
            depth: self.depth,
            fusion: self.fusion,
            rrf_k: self.rrf_k,
            router: self.router,
            out: self.out,
            workers: self.workers,
            ..Overrides::default()
        };
        (o, self.config)
    }
}

impl RouterArgs {
    fn apply(self, o: &mut Overrides) {
        o.replay = self.replay;
        o.mode = self.mode;
        o.no_fallback = self.no_fallback;
        o.audit_log = self.audit_log;
        o.use_rewrites = self.use_rewrites;
    }
}

/// Exit status classes: 1 for invalid input or usage, 2 for failures while
/// running.
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    use commands::Request;
    let request = match cli.command {
        Command::GenCorpus { videos, clips_per_video, common } => {
            let (mut o, cfg) = common.into_overrides();
            o.videos = videos;
            o.clips_per_video = clips_per_video;
            (Request::GenCorpus, o, cfg)
        }
        Command::BuildIndex { corpus, with_fused, dim, common } => {
            let (mut o, cfg) = common.into_overrides();
            o.corpus = corpus;
            o.with_fused = with_fused;
            o.dim = dim;
            (Request::BuildIndex, o, cfg)
        }
        Command::Route { text, query_id, router, common } => {
            let (mut o, cfg) = common.into_overrides();
            router.apply(&mut o);
            (Request::Route { text, query_id }, o, cfg)
        }
        Command::Query { text, query_id, index_dir, top, router, common } => {
            let (mut o, cfg) = common.into_overrides();
            router.apply(&mut o);
            o.index_dir = index_dir;
            (Request::Query { text, query_id, top }, o, cfg)
        }
        Command::Evaluate { corpus, queries, index_dir, methods, csv, router, common } => {
            let (mut o, cfg) = common.into_overrides();
            router.apply(&mut o);
            o.corpus = corpus;
            o.queries = queries;
            o.index_dir = index_dir;
            o.methods = methods;
            o.csv = csv;
            (Request::Evaluate, o, cfg)
        }
    };
    let (request, overrides, config_path) = request;
    let config = config::RunConfig::resolve(overrides, config_path.as_deref()).map_err(Failure::Usage)?;
    commands::run(request, config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
