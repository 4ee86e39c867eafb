//! Lockstep multi-agent sessions with routed messages and a summed
//! objective.
//!
//! Each agent runs its own episode driver: its own task, strategy,
//! candidate set and seed lane. Rounds are barrier-synchronized; after all
//! round-t responses complete, every response is routed along the topology
//! edges into the receivers' candidate sets (as routed entries naming the
//! sender and round), and only then does round t+1 start. Agents stop
//! independently; a shared budget bounds everyone.
//!
//! With one agent and no edges the session is exactly one engine episode:
//! seed lanes are `agent_index * 10^6 + t` with agent indices assigned
//! from sorted ids, so a single agent gets the engine's own schedule.

use std::collections::{HashMap, HashSet};

use crate::backend::Backend;
use crate::candidates::{CandidateEntry, PromptCandidateSet, Provenance};
use crate::engine::{Episode, EpisodeConfig, EpisodeDriver, Strategy, StrategyError};
use crate::score::{Budget, EvaluationFunction};
use crate::task::Task;
use crate::text::Text;
use crate::transcript::{Round, Transcript};

/// Seed-lane stride between agents; rounds never get near it.
const AGENT_SEED_STRIDE: u64 = 1_000_000;

/// One agent: a role instruction, a task, a strategy and an evaluator.
pub struct AgentSpec {
    pub id: String,
    pub initial_instruction: Text,
    pub task: Task,
    pub evaluator: EvaluationFunction,
    pub strategy: Box<dyn Strategy>,
}

/// Directed routing edges (sender id, receiver id).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    pub edges: Vec<(String, String)>,
}

impl Topology {
    pub fn new(edges: Vec<(String, String)>) -> Topology {
        Topology { edges }
    }

    pub fn empty() -> Topology {
        Topology::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("a session needs at least one agent")]
    NoAgents,
    #[error("duplicate agent id {0:?}")]
    DuplicateAgent(String),
    #[error("topology references unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("self-edges are not allowed ({0:?})")]
    SelfEdge(String),
}

/// One agent's session outcome. `score` is absent when the agent errored.
#[derive(Debug)]
pub struct AgentOutcome {
    pub id: String,
    pub transcript: Transcript,
    pub snapshots: Vec<PromptCandidateSet>,
    pub final_candidates: PromptCandidateSet,
    pub score: Option<f64>,
    pub error: Option<String>,
}

/// Per-agent outcomes plus the summed objective. The total omits errored
/// agents, which are listed separately.
#[derive(Debug)]
pub struct SessionResult {
    pub agents: Vec<AgentOutcome>,
    pub total: f64,
    pub errored: Vec<String>,
}

/// Exact sum of the present per-agent scores, accumulated in sorted-id
/// order so the value is independent of agent ordering.
pub fn total_objective(result: &SessionResult) -> f64 {
    let mut scored: Vec<(&str, f64)> = result
        .agents
        .iter()
        .filter_map(|a| a.score.map(|s| (a.id.as_str(), s)))
        .collect();
    scored.sort_by(|a, b| a.0.cmp(b.0));
    scored.into_iter().map(|(_, s)| s).sum()
}

/// Run a lockstep session.
pub fn run_session(
    agents: Vec<AgentSpec>,
    topology: &Topology,
    budget: Budget,
    backend: &Backend,
    master_seed: u64,
) -> Result<SessionResult, SessionError> {
    if agents.is_empty() {
        return Err(SessionError::NoAgents);
    }
    let mut ids = HashSet::new();
    for agent in &agents {
        if !ids.insert(agent.id.clone()) {
            return Err(SessionError::DuplicateAgent(agent.id.clone()));
        }
    }
    for (from, to) in &topology.edges {
        if !ids.contains(from) {
            return Err(SessionError::UnknownAgent(from.clone()));
        }
        if !ids.contains(to) {
            return Err(SessionError::UnknownAgent(to.clone()));
        }
        if from == to {
            return Err(SessionError::SelfEdge(from.clone()));
        }
    }

    // Stable agent indices from sorted ids: seed lanes are independent of
    // the configuration order.
    let mut sorted_ids: Vec<String> = agents.iter().map(|a| a.id.clone()).collect();
    sorted_ids.sort();
    let lane_of: HashMap<&str, u64> = sorted_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i as u64 * AGENT_SEED_STRIDE))
        .collect();

    struct Seat<'a> {
        id: String,
        task: Task,
        evaluator: EvaluationFunction,
        driver: Option<EpisodeDriver<'a>>,
        finished: Option<Episode>,
        failed: Option<String>,
    }

    impl Seat<'_> {
        fn active(&self) -> bool {
            self.driver.as_ref().is_some_and(|d| !d.is_done())
        }
    }

    let mut seats: Vec<Seat> = Vec::with_capacity(agents.len());
    for agent in agents {
        let lane = lane_of[agent.id.as_str()];
        let config = EpisodeConfig::new(budget, master_seed);
        let (driver, finished, failed) = match EpisodeDriver::with_seed_lane(
            agent.task.clone(),
            agent.strategy,
            config,
            backend,
            lane,
            Some(agent.initial_instruction.clone()),
        ) {
            Ok(driver) => (Some(driver), None, None),
            Err(e) => (None, Some(e.episode), Some(e.kind.to_string())),
        };
        seats.push(Seat {
            id: agent.id,
            task: agent.task,
            evaluator: agent.evaluator,
            driver,
            finished,
            failed,
        });
    }

    for t in 1..=budget.max_rounds {
        // Round phase: every active agent takes one step.
        let mut routed: Vec<(String, u32, Text)> = Vec::new();
        for seat in &mut seats {
            let Some(driver) = seat.driver.as_mut() else { continue };
            if driver.is_done() {
                continue;
            }
            match driver.step() {
                Ok(_) => {
                    if let Some(round) = driver.transcript().rounds.last() {
                        if round.index == t {
                            routed.push((seat.id.clone(), t, round.response.clone()));
                        }
                    }
                }
                Err(kind) => seat.failed = Some(kind.to_string()),
            }
        }
        // Barrier phase: round-t responses enter receivers' candidate sets,
        // in sorted-sender then edge-declaration order so insertion order
        // is independent of how the agent list was given.
        routed.sort_by(|a, b| a.0.cmp(&b.0));
        for (sender, round, response) in &routed {
            for (from, to) in &topology.edges {
                if from != sender {
                    continue;
                }
                if let Some(seat) = seats.iter_mut().find(|s| &s.id == to) {
                    if seat.failed.is_none() {
                        if let Some(driver) = seat.driver.as_mut() {
                            driver.inject(CandidateEntry::routed(
                                response.clone(),
                                sender.clone(),
                                *round,
                            ));
                        }
                    }
                }
            }
        }
        if !seats.iter().any(|s| s.active()) {
            break;
        }
    }

    let mut outcomes = Vec::with_capacity(seats.len());
    let mut errored = Vec::new();
    for mut seat in seats {
        let episode = match seat.driver.take() {
            Some(driver) => driver.into_episode(),
            None => seat.finished.take().expect("seat without driver holds an episode"),
        };
        let failed = seat.failed;
        let score = if failed.is_none() {
            Some(seat.evaluator.score(&episode.transcript, &seat.task))
        } else {
            errored.push(seat.id.clone());
            None
        };
        outcomes.push(AgentOutcome {
            id: seat.id,
            snapshots: episode.snapshot_candidates().to_vec(),
            final_candidates: episode.final_candidates().clone(),
            transcript: episode.transcript,
            score,
            error: failed,
        });
    }
    let mut result = SessionResult {
        total: 0.0,
        agents: outcomes,
        errored,
    };
    result.total = total_objective(&result);
    Ok(result)
}

/// Wrap a strategy so every prompt (initial, chosen, expanded) carries an
/// instruction prefix. Used to express a session agent as a plain engine
/// episode.
pub struct WithInstruction<S> {
    pub instruction: Text,
    pub inner: S,
}

impl<S: Strategy> Strategy for WithInstruction<S> {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn initial_prompts(&self, task: &Task) -> Vec<Text> {
        self.inner
            .initial_prompts(task)
            .into_iter()
            .map(|p| crate::text::concat([&self.instruction, &p]))
            .collect()
    }

    fn next_prompt(
        &mut self,
        task: &Task,
        transcript: &Transcript,
        candidates: &PromptCandidateSet,
    ) -> Result<Text, StrategyError> {
        let inner = self.inner.next_prompt(task, transcript, candidates)?;
        Ok(crate::text::concat([&self.instruction, &inner]))
    }

    fn expand(
        &mut self,
        task: &Task,
        candidates: &PromptCandidateSet,
        new_round: &Round,
    ) -> Vec<CandidateEntry> {
        self.inner
            .expand(task, candidates, new_round)
            .into_iter()
            .map(|e| CandidateEntry {
                prompt: crate::text::concat([&self.instruction, &e.prompt]),
                provenance: e.provenance,
            })
            .collect()
    }

    fn should_stop(&self, task: &Task, transcript: &Transcript) -> bool {
        self.inner.should_stop(task, transcript)
    }
}

/// A routing-aware strategy: prompt with the most recently routed message
/// when one exists, otherwise re-ask the question. Never stops on its own.
#[derive(Debug, Default)]
pub struct RoutedRelay;

impl Strategy for RoutedRelay {
    fn name(&self) -> &'static str {
        "relay"
    }

    fn initial_prompts(&self, task: &Task) -> Vec<Text> {
        vec![task.question.clone()]
    }

    fn next_prompt(
        &mut self,
        task: &Task,
        _transcript: &Transcript,
        candidates: &PromptCandidateSet,
    ) -> Result<Text, StrategyError> {
        let latest_routed = candidates
            .entries()
            .iter()
            .rev()
            .find(|e| matches!(e.provenance, Provenance::Routed { .. }));
        Ok(latest_routed
            .map(|e| e.prompt.clone())
            .unwrap_or_else(|| task.question.clone()))
    }

    fn expand(
        &mut self,
        _task: &Task,
        _candidates: &PromptCandidateSet,
        _new_round: &Round,
    ) -> Vec<CandidateEntry> {
        Vec::new()
    }

    fn should_stop(&self, _task: &Task, _transcript: &Transcript) -> bool {
        false
    }
}
