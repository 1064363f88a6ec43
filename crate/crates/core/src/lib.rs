//! Modality-routed retrieval over video clips.
//!
//! Each clip carries up to three text channels (speech transcript, on-screen
//! text, visual caption). Queries are routed to a subset of per-channel flat
//! indices, the per-channel ranked lists are fused, and [`eval`] scores the
//! result against graded clip-level relevance.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fusion;
pub mod index;
pub mod pipeline;
pub mod router;
pub mod synth;

pub use corpus::{ClipRecord, ClipRef, Corpus, IndexField, Modality, QueryRecord, SourceLabel};
pub use embed::{Embedder, EmbedderSpec, UnitVector};
pub use error::{CorpusError, EmbedError, EvalError, FusionError, IndexError, ParseClipIdError, RouterError};
pub use eval::{run_evaluation, EvalConfig, EvalReport, Method};
pub use exec::Execution;
pub use fusion::{FusedRanking, FusionConfig, FusionMethod};
pub use index::ModalityIndex;
pub use pipeline::{retrieve, IndexSet, SearchConfig};
pub use router::{route, Router, RouterConfig, RoutingDecision};
