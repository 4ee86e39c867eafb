//! promptctl: an orchestration engine for multi-round prompt engineering,
//! treated as a discrete optimal-control loop.
//!
//! An episode picks a prompt from a monotonically expanding candidate set,
//! sends it to a backend, records the round, expands the set from the
//! response, and stops by strategy or by budget. On top of that loop sit
//! the built-in strategies (progressive hints, least-to-most decomposition,
//! beam search over prompt sequences), pool-based prompt search, response
//! ensembles with majority voting, and lockstep multi-agent sessions.
//!
//! Everything is replayable: randomness is an explicit 64-bit seed, and the
//! scripted mock backend makes whole runs byte-identical across machines.

pub mod answer;
pub mod backend;
pub mod candidates;
pub mod engine;
pub mod ensemble;
pub mod harness;
pub mod multiagent;
pub mod score;
pub mod search;
pub mod seed;
pub mod strategies;
pub mod task;
pub mod text;
pub mod transcript;

pub use answer::{extract_answer, AnswerKind, CanonicalAnswer};
pub use backend::{generate, Backend, BackendConfig, BackendError, GenParams, GenerationRequest};
pub use candidates::{CandidateEntry, PromptCandidateSet, Provenance};
pub use engine::{run_episode, Episode, EpisodeConfig, EpisodeError, Strategy, StrategyError};
pub use score::{
    identification_score, regularized_objective, Budget, EvaluationFunction, Objective,
};
pub use task::Task;
pub use text::{concat, Text};
pub use transcript::{Round, Termination, Transcript};
