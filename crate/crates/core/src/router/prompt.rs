//! Routing prompt rendering. The instruction text lives in a versioned asset.

const TEMPLATE_V1: &str = include_str!("../../assets/router_prompt_v1.txt");

pub const PROMPT_VERSION: &str = "router_prompt_v1";

/// The two chat messages sent to an LLM router.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouterPrompt {
    pub system: String,
    pub user: String,
}

impl RouterPrompt {
    pub fn for_query(text: &str) -> Self {
        Self { system: TEMPLATE_V1.trim_end().to_owned(), user: text.to_owned() }
    }

    /// Single-string form: instructions followed by the verbatim query.
    pub fn render(&self) -> String {
        format!("{}\n\nQuery: {}\n", self.system, self.user)
    }
}

pub fn build_router_prompt(text: &str) -> String {
    RouterPrompt::for_query(text).render()
}
