//! Knowledge-driven support for architectural decision making.
//!
//! The crate is organised around the four activities of an iterative design
//! loop:
//!
//! * [`speclang`] parses and binds the architect's quality requirements and
//!   constraints.
//! * [`inference`] proposes ranked, explained candidate decisions and searches
//!   whole configurations with simulated annealing.
//! * [`analysis`] detects incompatibilities, unresolved dependencies and
//!   violated quality requirements, and suggests new requirements.
//! * [`session`] drives the loop, keeps the decision log and folds accepted
//!   refinement outcomes back into the next iteration's specification.
//!
//! [`kb`] holds the architectural knowledge everything else reasons over.

pub mod analysis;
pub mod inference;
pub mod kb;
pub mod session;
pub mod speclang;

mod names;

pub use analysis::{analyze, AnalysisReport, Issue, IssueDetail, QaEvaluation, Severity, Suggestion, Threshold};
pub use inference::{
    anneal, generate_candidates, score_configuration, AnnealParams, CandidateDecision, Configuration,
    ScoreBreakdown, ScoreWeights,
};
pub use kb::{load_kb, DecisionId, ElementId, KbError, KindId, KnowledgeBase};
pub use session::{Phase, Session, SessionError};
pub use speclang::{bind_spec, parse_spec, serialize_spec, ArchSpec, BoundSpec};
