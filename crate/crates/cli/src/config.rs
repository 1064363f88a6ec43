//! Run configuration: flat JSON file merged under command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;
use vidroute::embed::{DEFAULT_DIM, MIN_DIM, REFERENCE_EMBEDDER};
use vidroute::fusion::{FusionConfig, FusionMethod, DEFAULT_RRF_K};
use vidroute::index::DEFAULT_DEPTH;
use vidroute::router::{LlmSettings, RouterConfig, RoutingMode};
use vidroute::Modality;

pub const MIN_DEPTH: usize = 10;
pub const DEFAULT_SEED: u64 = 1;

/// Every key the config file accepts. Credentials are deliberately absent.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub index_dir: Option<PathBuf>,
    pub embedder: Option<String>,
    pub dim: Option<usize>,
    pub depth: Option<usize>,
    pub fusion: Option<String>,
    pub rrf_k: Option<f64>,
    pub router: Option<String>,
    pub mode: Option<String>,
    pub fallback: Option<bool>,
    pub replay: Option<PathBuf>,
    pub audit_log: Option<PathBuf>,
    pub llm_base_url: Option<String>,
    pub llm_model: Option<String>,
    pub llm_timeout_s: Option<u64>,
    pub llm_max_retries: Option<u32>,
    pub llm_max_in_flight: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub seed: Option<u64>,
    pub videos: Option<usize>,
    pub clips_per_video: Option<usize>,
    pub workers: Option<usize>,
    pub with_fused: Option<bool>,
    pub use_rewrites: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        if let Some(obj) = value.as_object() {
            if let Some(k) = obj.keys().find(|k| k.to_ascii_lowercase().contains("key") || k.contains("token")) {
                return Err(format!(
                    "config {}: `{k}` is not allowed; credentials are read from {} only",
                    path.display(),
                    vidroute::router::ENV_API_KEY
                ));
            }
        }
        serde_json::from_value(value).map_err(|e| format!("config {}: {e}", path.display()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RouterKind {
    Rule,
    Llm,
    Replay,
    Oracle,
    All,
}

impl FromStr for RouterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rule" => Ok(RouterKind::Rule),
            "llm" => Ok(RouterKind::Llm),
            "replay" => Ok(RouterKind::Replay),
            "oracle" => Ok(RouterKind::Oracle),
            "all" => Ok(RouterKind::All),
            other => Err(format!("unknown router `{other}` (expected rule, llm, replay, oracle or all)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodSpec {
    Routed,
    AllText,
    LateFusionAll,
    Single(Modality),
}

impl FromStr for MethodSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.trim().to_ascii_lowercase();
        let single = lower
            .strip_prefix("single(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| lower.strip_prefix("single:"));
        if let Some(m) = single {
            return m.parse().map(MethodSpec::Single);
        }
        match lower.as_str() {
            "routed" => Ok(MethodSpec::Routed),
            "all-text" => Ok(MethodSpec::AllText),
            "late-fusion-all" => Ok(MethodSpec::LateFusionAll),
            _ => Err(format!(
                "unknown method `{s}` (expected routed, all-text, late-fusion-all or single(asr|ocr|visuals))"
            )),
        }
    }
}

/// Values shared by several subcommands; `None` means "not given on the
/// command line".
#[derive(Debug, Default)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub index_dir: Option<PathBuf>,
    pub dim: Option<usize>,
    pub depth: Option<usize>,
    pub fusion: Option<String>,
    pub rrf_k: Option<f64>,
    pub router: Option<String>,
    pub mode: Option<String>,
    pub no_fallback: bool,
    pub replay: Option<PathBuf>,
    pub audit_log: Option<PathBuf>,
    pub methods: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub seed: Option<u64>,
    pub videos: Option<usize>,
    pub clips_per_video: Option<usize>,
    pub workers: Option<usize>,
    pub with_fused: bool,
    pub use_rewrites: bool,
}

#[derive(Debug)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub index_dir: Option<PathBuf>,
    pub embedder: String,
    pub dim: usize,
    pub depth: usize,
    pub fusion: FusionConfig,
    pub router: RouterKind,
    pub routing: RouterConfig,
    pub replay: Option<PathBuf>,
    pub audit_log: Option<PathBuf>,
    pub methods: Vec<MethodSpec>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub seed: u64,
    pub seed_given: bool,
    pub videos: usize,
    pub clips_per_video: usize,
    pub workers: Option<usize>,
    pub with_fused: bool,
    pub use_rewrites: bool,
}

fn parse<T: FromStr<Err = String>>(s: Option<String>, default: T) -> Result<T, String> {
    s.map_or(Ok(default), |s| s.parse())
}

impl RunConfig {
    /// Flags override the config file, which overrides the environment
    /// (LLM endpoint and model only), which overrides built-in defaults.
    pub fn resolve(flags: Overrides, config_path: Option<&Path>) -> Result<Self, String> {
        let file = match config_path {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let fusion_method: FusionMethod = parse(flags.fusion.or(file.fusion), FusionMethod::Linear)?;
        let rrf_k = flags.rrf_k.or(file.rrf_k).unwrap_or(DEFAULT_RRF_K);
        if !(rrf_k > 0.0 && rrf_k.is_finite()) {
            return Err(format!("rrf_k must be positive, got {rrf_k}"));
        }
        let depth = flags.depth.or(file.depth).unwrap_or(DEFAULT_DEPTH);
        if depth < MIN_DEPTH {
            return Err(format!("depth must be at least {MIN_DEPTH}, got {depth}"));
        }
        let dim = flags.dim.or(file.dim).unwrap_or(DEFAULT_DIM);
        if dim < MIN_DIM {
            return Err(format!("dim must be at least {MIN_DIM}, got {dim}"));
        }
        let embedder = file.embedder.unwrap_or_else(|| REFERENCE_EMBEDDER.to_owned());
        if embedder != REFERENCE_EMBEDDER {
            return Err(format!("unknown embedder `{embedder}` (available: {REFERENCE_EMBEDDER})"));
        }

        let mut llm = LlmSettings::default().with_env();
        if let Some(url) = file.llm_base_url {
            llm.base_url = Some(url);
        }
        if let Some(model) = file.llm_model {
            llm.model = model;
        }
        if let Some(t) = file.llm_timeout_s {
            llm.timeout = Duration::from_secs(t);
        }
        if let Some(r) = file.llm_max_retries {
            llm.max_retries = r;
        }
        if let Some(n) = file.llm_max_in_flight {
            if n == 0 {
                return Err("llm_max_in_flight must be at least 1".into());
            }
            llm.max_in_flight = n;
        }
        let routing = RouterConfig {
            mode: parse(flags.mode.or(file.mode), RoutingMode::Multi)?,
            fallback_on_error: !flags.no_fallback && file.fallback.unwrap_or(true),
            llm,
        };

        let methods = flags
            .methods
            .or(file.methods)
            .unwrap_or_else(|| vec!["late-fusion-all".into(), "routed".into()])
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<MethodSpec>, _>>()?;
        if methods.is_empty() {
            return Err("at least one evaluation method is required".into());
        }
        let workers = flags.workers.or(file.workers);
        if workers == Some(0) {
            return Err("workers must be at least 1".into());
        }
        let seed_given = flags.seed.is_some() || file.seed.is_some();

        Ok(RunConfig {
            corpus: flags.corpus.or(file.corpus),
            queries: flags.queries.or(file.queries),
            index_dir: flags.index_dir.or(file.index_dir),
            embedder,
            dim,
            depth,
            fusion: FusionConfig { method: fusion_method, rrf_k },
            router: parse(flags.router.or(file.router), RouterKind::Rule)?,
            routing,
            replay: flags.replay.or(file.replay),
            audit_log: flags.audit_log.or(file.audit_log),
            methods,
            out: flags.out.or(file.out),
            csv: flags.csv.or(file.csv),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            seed_given,
            videos: flags.videos.or(file.videos).unwrap_or(200),
            clips_per_video: flags.clips_per_video.or(file.clips_per_video).unwrap_or(5),
            workers,
            with_fused: flags.with_fused || file.with_fused.unwrap_or(false),
            use_rewrites: flags.use_rewrites || file.use_rewrites.unwrap_or(false),
        })
    }

    pub fn require_file(&self, what: &str, path: &Option<PathBuf>) -> Result<PathBuf, String> {
        let p = path.clone().ok_or_else(|| format!("no {what} given (flag or config key)"))?;
        if !p.is_file() {
            return Err(format!("{what} {} does not exist", p.display()));
        }
        Ok(p)
    }

    pub fn require_dir(&self, what: &str, path: &Option<PathBuf>) -> Result<PathBuf, String> {
        let p = path.clone().ok_or_else(|| format!("no {what} given (flag or config key)"))?;
        if !p.is_dir() {
            return Err(format!("{what} {} does not exist", p.display()));
        }
        Ok(p)
    }

    /// Checks router prerequisites that can be verified without contacting
    /// anything.
    pub fn validate_router(&self) -> Result<(), String> {
        match self.router {
            RouterKind::Replay => {
                self.require_file("replay file", &self.replay)?;
            }
            RouterKind::Llm if self.routing.llm.base_url.is_none() => {
                return Err(format!(
                    "the llm router needs an endpoint: set {} or llm_base_url",
                    vidroute::router::ENV_BASE_URL
                ));
            }
            _ => {}
        }
        if let Some(log) = &self.audit_log {
            let parent = log.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(format!("audit log directory {} does not exist", parent.display()));
            }
        }
        Ok(())
    }
}
