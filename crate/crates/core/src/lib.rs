//! Susceptibility-to-influence analytics over social interaction logs.
//!
//! The pipeline reconstructs exposure and adoption histories from event
//! logs, scores each user with the influence-driven (IAR) and spontaneous
//! (SAR) adoption rates, builds reciprocal friendship networks, and tests
//! homophily and the generalized friendship paradox against randomized
//! baselines. A synthetic generator provides ground-truth corpora.

pub mod analytics;
pub mod error;
pub mod ingest;
pub mod netbuild;
pub mod nullmodels;
pub mod predict;
pub mod stats;
pub mod suscept;
pub mod synth;

#[cfg(test)]
mod testutil;

pub use analytics::{GfpReport, NetworkGfp, ParadoxGrid};
pub use error::{Error, Result};
pub use ingest::{CorpusWindow, EventKind, InteractionEvent, UserMeta};
pub use netbuild::{Edge, FriendshipNetwork, NetworkKind, NodeFeatures};
pub use nullmodels::{BaselineSummary, NullConfig, NullModel, NullStatistic, NullSummary};
pub use predict::{FeatureMatrix, FitReport, ForestParams, RandomForest};
pub use stats::CorrelationResult;
pub use synth::{SynthConfig, SynthCorpus};
pub use suscept::{Metric, ScoreTable, SusceptibilityScore, UserHistory};
