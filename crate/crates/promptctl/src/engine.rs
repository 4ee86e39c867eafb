//! The episode loop: select a prompt from the candidate set, call the
//! backend, record the round, expand the set, stop by strategy or budget.
//!
//! The engine enforces the control-problem constraints at runtime rather
//! than trusting strategies: the chosen prompt must be a member of the
//! current candidate set, derived entries must reference recorded rounds,
//! and no transcript can exceed the budget.

use crate::answer::extract_answer;
use crate::backend::{Backend, BackendError, GenParams, GenerationRequest};
use crate::candidates::{CandidateEntry, PromptCandidateSet, Provenance};
use crate::score::Budget;
use crate::seed::derive_seed;
use crate::task::Task;
use crate::text::{concat, Text};
use crate::transcript::{Round, Termination, Transcript};

/// A strategy failed to produce a prompt (bad internal state, exhausted
/// templates, ...). The engine treats this as a contract violation.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct StrategyError(pub String);

/// The controller interface: how prompts are chosen, how the candidate set
/// grows, and when to stop.
pub trait Strategy {
    /// Short name recorded in reports.
    fn name(&self) -> &'static str;

    /// The initial candidate set P_1. Must be non-empty.
    fn initial_prompts(&self, task: &Task) -> Vec<Text>;

    /// Choose the next prompt. Must return a member of `candidates`; the
    /// engine verifies membership.
    fn next_prompt(
        &mut self,
        task: &Task,
        transcript: &Transcript,
        candidates: &PromptCandidateSet,
    ) -> Result<Text, StrategyError>;

    /// Entries to add to the candidate set after a round completes.
    fn expand(
        &mut self,
        task: &Task,
        candidates: &PromptCandidateSet,
        new_round: &Round,
    ) -> Vec<CandidateEntry>;

    /// Whether the episode should stop after the latest round.
    fn should_stop(&self, task: &Task, transcript: &Transcript) -> bool;
}

/// Per-episode configuration. The backend is passed alongside so that one
/// client can serve many concurrent episodes.
#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub budget: Budget,
    pub master_seed: u64,
    pub params: GenParams,
}

impl EpisodeConfig {
    pub fn new(budget: Budget, master_seed: u64) -> EpisodeConfig {
        EpisodeConfig {
            budget,
            master_seed,
            params: GenParams::default(),
        }
    }
}

/// A finished (or aborted) episode: the transcript plus the per-round
/// candidate-set snapshots.
#[derive(Debug, Clone)]
pub struct Episode {
    pub transcript: Transcript,
    snapshots: Vec<PromptCandidateSet>,
    final_candidates: PromptCandidateSet,
}

impl Episode {
    /// One snapshot per completed round: snapshot(t) is the candidate set
    /// P_t from which round t's prompt was chosen. Consecutive snapshots
    /// satisfy inclusion.
    pub fn snapshot_candidates(&self) -> &[PromptCandidateSet] {
        &self.snapshots
    }

    /// The candidate set after the final expansion.
    pub fn final_candidates(&self) -> &PromptCandidateSet {
        &self.final_candidates
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineErrorKind {
    #[error("strategy contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// An aborted episode. Carries the partial record (termination = error).
#[derive(Debug, thiserror::Error)]
#[error("episode aborted: {kind}")]
pub struct EpisodeError {
    pub kind: EngineErrorKind,
    pub episode: Episode,
}

/// Step-wise episode execution. `run_episode` drives this to completion;
/// multi-agent sessions step many drivers in lockstep and inject routed
/// candidates between rounds.
pub struct EpisodeDriver<'a> {
    task: Task,
    strategy: Box<dyn Strategy + 'a>,
    config: EpisodeConfig,
    backend: &'a Backend,
    /// Added to the round index when deriving per-round seeds; sessions use
    /// it to give each agent a disjoint seed lane.
    seed_offset: u64,
    /// Prefix applied to the executed prompt but not to candidate-set
    /// membership (the multi-agent instruction).
    prompt_prefix: Option<Text>,
    transcript: Transcript,
    candidates: PromptCandidateSet,
    snapshots: Vec<PromptCandidateSet>,
    done: Option<Termination>,
}

impl<'a> EpisodeDriver<'a> {
    pub fn new(
        task: Task,
        strategy: Box<dyn Strategy + 'a>,
        config: EpisodeConfig,
        backend: &'a Backend,
    ) -> Result<Self, EpisodeError> {
        Self::with_seed_lane(task, strategy, config, backend, 0, None)
    }

    /// Construct a driver with an explicit seed lane and prompt prefix.
    pub fn with_seed_lane(
        task: Task,
        strategy: Box<dyn Strategy + 'a>,
        config: EpisodeConfig,
        backend: &'a Backend,
        seed_offset: u64,
        prompt_prefix: Option<Text>,
    ) -> Result<Self, EpisodeError> {
        let initial = strategy.initial_prompts(&task);
        // Pessimistic until the episode ends cleanly: an interrupted
        // record is an error record.
        let transcript = Transcript {
            task_id: task.id.clone(),
            rounds: Vec::new(),
            termination: Termination::Error,
            final_answer: None,
        };
        let mut driver = EpisodeDriver {
            task,
            strategy,
            config,
            backend,
            seed_offset,
            prompt_prefix,
            transcript,
            candidates: PromptCandidateSet::new(),
            snapshots: Vec::new(),
            done: None,
        };
        if initial.is_empty() {
            driver.done = Some(Termination::Error);
            return Err(EpisodeError {
                kind: EngineErrorKind::Contract(
                    "strategy produced an empty initial candidate set".into(),
                ),
                episode: driver.into_episode(),
            });
        }
        for prompt in initial {
            driver.candidates.insert(CandidateEntry::initial(prompt));
        }
        Ok(driver)
    }

    pub fn is_done(&self) -> bool {
        self.done.is_some()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn candidates(&self) -> &PromptCandidateSet {
        &self.candidates
    }

    /// Rounds completed so far.
    pub fn rounds(&self) -> u32 {
        self.transcript.len()
    }

    /// Insert an externally produced candidate (a routed message). Takes
    /// effect from the next round's snapshot on.
    pub fn inject(&mut self, entry: CandidateEntry) {
        self.candidates.insert(entry);
    }

    /// Execute one round. Returns the termination cause once the episode
    /// stops, or `None` while it continues. On `Err` the driver is done and
    /// the partial record has an error termination.
    pub fn step(&mut self) -> Result<Option<Termination>, EngineErrorKind> {
        if let Some(t) = self.done {
            return Ok(Some(t));
        }
        let t = self.transcript.len() + 1;

        let chosen = self
            .strategy
            .next_prompt(&self.task, &self.transcript, &self.candidates)
            .map_err(|e| self.fail(EngineErrorKind::Contract(e.0)))?;
        if !self.candidates.contains(&chosen) {
            return Err(self.fail(EngineErrorKind::Contract(format!(
                "round {t} prompt is not a candidate: {:?}",
                chosen.as_str()
            ))));
        }

        let executed = match &self.prompt_prefix {
            Some(prefix) => concat([prefix, &chosen]),
            None => chosen.clone(),
        };
        let seed = derive_seed(self.config.master_seed, self.seed_offset + u64::from(t));
        let request = GenerationRequest {
            prompt: executed.clone(),
            seed,
            params: self.config.params,
        };
        let response = self
            .backend
            .generate(&request)
            .map_err(|e| self.fail(EngineErrorKind::Backend(e)))?;

        // P_t as seen when round t's prompt was chosen.
        self.snapshots.push(self.candidates.clone());
        let round = Round {
            index: t,
            prompt: executed,
            response,
            seed_used: seed,
            backend_id: self.backend.id().to_string(),
        };
        self.transcript.rounds.push(round);
        let round = self.transcript.rounds.last().unwrap().clone();

        for entry in self.strategy.expand(&self.task, &self.candidates, &round) {
            if let Provenance::Derived { round: k } = entry.provenance {
                if k == 0 || k > t {
                    return Err(self.fail(EngineErrorKind::Contract(format!(
                        "expansion references round {k}, but only {t} rounds exist"
                    ))));
                }
            }
            self.candidates.insert(entry);
        }

        let termination = if self.strategy.should_stop(&self.task, &self.transcript) {
            Some(Termination::StrategyStop)
        } else if t >= self.config.budget.max_rounds {
            Some(Termination::BudgetExhausted)
        } else {
            None
        };
        if let Some(term) = termination {
            self.transcript.termination = term;
            self.transcript.final_answer = self
                .transcript
                .last_response()
                .and_then(|r| extract_answer(r, self.task.answer_kind));
            self.done = Some(term);
        }
        Ok(termination)
    }

    fn fail(&mut self, kind: EngineErrorKind) -> EngineErrorKind {
        self.transcript.termination = Termination::Error;
        self.done = Some(Termination::Error);
        kind
    }

    pub fn into_episode(self) -> Episode {
        Episode {
            transcript: self.transcript,
            snapshots: self.snapshots,
            final_candidates: self.candidates,
        }
    }
}

/// Run one full episode: the forward-controller realization of the
/// prompt-engineering control problem under the cutoff budget.
pub fn run_episode(
    task: &Task,
    strategy: Box<dyn Strategy + '_>,
    config: EpisodeConfig,
    backend: &Backend,
) -> Result<Episode, EpisodeError> {
    let mut driver = EpisodeDriver::new(task.clone(), strategy, config, backend)?;
    loop {
        match driver.step() {
            Ok(Some(_)) => return Ok(driver.into_episode()),
            Ok(None) => {}
            Err(kind) => {
                return Err(EpisodeError {
                    kind,
                    episode: driver.into_episode(),
                })
            }
        }
    }
}
