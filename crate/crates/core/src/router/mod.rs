//! Query routing: which modality indices to search, and with what text.
//!
//! Every router returns a [`RoutingDecision`]: one to three distinct
//! modalities in confidence order, each with a non-empty query string. The
//! [`route`] entry point applies the fallback-to-all policy and the
//! single-modality constraint on top of any [`Router`].

mod llm;
mod parse;
mod prompt;
mod rules;

use std::fmt;

use serde::Serialize;

use crate::corpus::{Modality, QueryRecord};
use crate::error::RouterError;

pub use llm::{
    AuditLog, ChatBackend, HttpChatBackend, LlmRouter, LlmSettings, ReplayBackend, ENV_API_KEY, ENV_BASE_URL,
    ENV_MODEL,
};
pub use parse::{extract_first_object, parse_router_response};
pub use prompt::{build_router_prompt, RouterPrompt, PROMPT_VERSION};
pub use rules::{cue_scores, rule_route, RuleRouter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    Rule,
    Llm,
    FallbackAll,
    Oracle,
    All,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Rule => "RULE",
            Origin::Llm => "LLM",
            Origin::FallbackAll => "FALLBACK_ALL",
            Origin::Oracle => "ORACLE",
            Origin::All => "ALL",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub modality: Modality,
    pub query: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingDecision {
    selections: Vec<Selection>,
    origin: Origin,
    raw_response: Option<String>,
}

impl RoutingDecision {
    /// Builds a decision, dropping duplicate modalities (first wins) and
    /// substituting `fallback_text` for empty queries. Returns `None` when
    /// nothing is selected.
    pub fn new(
        selections: impl IntoIterator<Item = (Modality, String)>,
        origin: Origin,
        fallback_text: &str,
    ) -> Option<Self> {
        let mut out: Vec<Selection> = Vec::with_capacity(3);
        for (modality, query) in selections {
            if out.iter().any(|s| s.modality == modality) {
                continue;
            }
            let query = if query.trim().is_empty() { fallback_text.to_owned() } else { query };
            out.push(Selection { modality, query });
        }
        if out.is_empty() {
            return None;
        }
        Some(Self { selections: out, origin, raw_response: None })
    }

    /// All three modalities in fixed order with the original text.
    pub fn all(text: &str, origin: Origin) -> Self {
        Self::new(Modality::ALL.map(|m| (m, text.to_owned())), origin, text).expect("non-empty")
    }

    pub fn single(modality: Modality, text: &str, origin: Origin) -> Self {
        Self::new([(modality, text.to_owned())], origin, text).expect("non-empty")
    }

    pub fn with_raw_response(mut self, raw: impl Into<String>) -> Self {
        self.raw_response = Some(raw.into());
        self
    }

    pub fn selections(&self) -> &[Selection] {
        &self.selections
    }

    pub fn modalities(&self) -> impl Iterator<Item = Modality> + '_ {
        self.selections.iter().map(|s| s.modality)
    }

    pub fn contains(&self, m: Modality) -> bool {
        self.selections.iter().any(|s| s.modality == m)
    }

    pub fn len(&self) -> usize {
        self.selections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn raw_response(&self) -> Option<&str> {
        self.raw_response.as_deref()
    }

    /// Optimized query for a selected modality.
    pub fn query_for(&self, m: Modality) -> Option<&str> {
        self.selections.iter().find(|s| s.modality == m).map(|s| s.query.as_str())
    }

    /// Total modality order: selected in confidence order, then the rest in
    /// fixed order.
    pub fn total_order(&self) -> Vec<Modality> {
        let mut order: Vec<Modality> = self.modalities().collect();
        order.extend(Modality::ALL.into_iter().filter(|m| !self.contains(*m)));
        order
    }

    /// Keeps only the highest-confidence selection.
    pub fn constrained_single(mut self) -> Self {
        self.selections.truncate(1);
        self
    }

    /// `{"asr": "...", "ocr": "..."}` with only selected keys, in confidence order.
    pub fn wire_json(&self) -> String {
        let parts: Vec<String> = self
            .selections
            .iter()
            .map(|s| {
                let v = serde_json::to_string(&s.query).expect("string serialization is infallible");
                format!("\"{}\": {v}", s.modality.wire_name())
            })
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// First (highest-confidence) modality of a decision.
pub fn constrain_single(d: &RoutingDecision) -> Modality {
    d.selections[0].modality
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingMode {
    #[default]
    Multi,
    Single,
}

impl std::str::FromStr for RoutingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "multi" => Ok(RoutingMode::Multi),
            "single" => Ok(RoutingMode::Single),
            other => Err(format!("unknown routing mode `{other}` (expected multi or single)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouterConfig {
    pub mode: RoutingMode,
    pub fallback_on_error: bool,
    pub llm: LlmSettings,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self { mode: RoutingMode::Multi, fallback_on_error: true, llm: LlmSettings::default() }
    }
}

pub trait Router: Send + Sync {
    fn route(&self, query: &QueryRecord) -> Result<RoutingDecision, RouterError>;

    /// Short backend label for reports.
    fn name(&self) -> &'static str;

    /// External calls issued so far (LLM requests); zero for local routers.
    fn calls(&self) -> usize {
        0
    }
}

impl<R: Router + ?Sized> Router for Box<R> {
    fn route(&self, query: &QueryRecord) -> Result<RoutingDecision, RouterError> {
        (**self).route(query)
    }

    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn calls(&self) -> usize {
        (**self).calls()
    }
}

/// Routes to the query's labelled source modality; unlabelled and dense
/// queries get all three.
pub struct OracleRouter;

impl Router for OracleRouter {
    fn route(&self, query: &QueryRecord) -> Result<RoutingDecision, RouterError> {
        Ok(match query.source.and_then(|s| s.modality()) {
            Some(m) => RoutingDecision::single(m, &query.text, Origin::Oracle),
            None => RoutingDecision::all(&query.text, Origin::Oracle),
        })
    }

    fn name(&self) -> &'static str {
        "oracle"
    }
}

/// Always searches every modality.
pub struct SelectAllRouter;

impl Router for SelectAllRouter {
    fn route(&self, query: &QueryRecord) -> Result<RoutingDecision, RouterError> {
        Ok(RoutingDecision::all(&query.text, Origin::All))
    }

    fn name(&self) -> &'static str {
        "all"
    }
}

/// Routes one query under `config`: backend errors become a fallback-to-all
/// decision when enabled, and single mode keeps only the top selection.
pub fn route(router: &dyn Router, query: &QueryRecord, config: &RouterConfig) -> Result<RoutingDecision, RouterError> {
    if query.text.trim().is_empty() {
        return Err(RouterError::EmptyQuery);
    }
    let decision = match router.route(query) {
        Ok(d) => d,
        Err(e) if config.fallback_on_error => {
            log::warn!("router `{}` failed for query {}: {e}; searching all modalities", router.name(), query.query_id);
            RoutingDecision::all(&query.text, Origin::FallbackAll)
        }
        Err(e) => return Err(e),
    };
    Ok(match config.mode {
        RoutingMode::Multi => decision,
        RoutingMode::Single => decision.constrained_single(),
    })
}
