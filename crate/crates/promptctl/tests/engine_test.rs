//! Episode-loop behaviour: convergence, budget, contracts, snapshots,
//! replay.

use promptctl::backend::{script_of, Backend, BackendConfig, MockScript};
use promptctl::candidates::{CandidateEntry, PromptCandidateSet};
use promptctl::engine::{run_episode, EpisodeConfig, Strategy, StrategyError};
use promptctl::score::{regularized_objective, Budget, Objective};
use promptctl::strategies::{LtmStrategy, PhpStrategy};
use promptctl::task::Task;
use promptctl::text::Text;
use promptctl::transcript::{Round, Termination, Transcript};
use promptctl::AnswerKind;

fn numeric_task(question: &str, truth: &str) -> Task {
    Task::new("t1", "", question, Some(truth), AnswerKind::Numeric).unwrap()
}

fn mock(script: MockScript) -> Backend {
    Backend::new(BackendConfig::Mock { script })
}

fn config(max_rounds: u32, seed: u64) -> EpisodeConfig {
    EpisodeConfig::new(Budget::new(max_rounds).unwrap(), seed)
}

/// Answers the bare question; never expands, never stops.
struct NeverStop;

impl Strategy for NeverStop {
    fn name(&self) -> &'static str {
        "never-stop"
    }

    fn initial_prompts(&self, task: &Task) -> Vec<Text> {
        vec![task.question.clone()]
    }

    fn next_prompt(
        &mut self,
        task: &Task,
        _transcript: &Transcript,
        _candidates: &PromptCandidateSet,
    ) -> Result<Text, StrategyError> {
        Ok(task.question.clone())
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

/// Returns a prompt that is never in the candidate set.
struct Rogue;

impl Strategy for Rogue {
    fn name(&self) -> &'static str {
        "rogue"
    }

    fn initial_prompts(&self, task: &Task) -> Vec<Text> {
        vec![task.question.clone()]
    }

    fn next_prompt(
        &mut self,
        _task: &Task,
        _transcript: &Transcript,
        _candidates: &PromptCandidateSet,
    ) -> Result<Text, StrategyError> {
        Ok(Text::new("not a candidate"))
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

/// Expands with a derived entry referencing a round that does not exist.
struct BadExpansion;

impl Strategy for BadExpansion {
    fn name(&self) -> &'static str {
        "bad-expansion"
    }

    fn initial_prompts(&self, task: &Task) -> Vec<Text> {
        vec![task.question.clone()]
    }

    fn next_prompt(
        &mut self,
        task: &Task,
        _transcript: &Transcript,
        _candidates: &PromptCandidateSet,
    ) -> Result<Text, StrategyError> {
        Ok(task.question.clone())
    }

    fn expand(
        &mut self,
        _task: &Task,
        _candidates: &PromptCandidateSet,
        _new_round: &Round,
    ) -> Vec<CandidateEntry> {
        vec![CandidateEntry::derived("ghost", 99)]
    }

    fn should_stop(&self, _task: &Task, _transcript: &Transcript) -> bool {
        false
    }
}

#[test]
fn php_converges_in_two_rounds_on_a_constant_mock() {
    let task = numeric_task("What is X?", "730391");
    let backend = mock(MockScript::constant("The answer is 730391."));
    let episode = run_episode(&task, Box::new(PhpStrategy::new()), config(10, 7), &backend)
        .expect("episode runs");
    assert_eq!(episode.transcript.len(), 2);
    assert_eq!(episode.transcript.termination, Termination::StrategyStop);
    assert_eq!(
        episode.transcript.final_answer.as_ref().unwrap().as_str(),
        "730391"
    );
    // second prompt reuses the first answer as a hint
    assert!(episode.transcript.rounds[1]
        .prompt
        .contains("Hint: the answer is close to 730391"));
}

#[test]
fn php_termination_round_tracks_when_the_mock_turns_correct() {
    // wrong for rounds 1..k-1, correct from round k on -> stop at k+1
    for k in [1u32, 2, 3] {
        let task = numeric_task("What is X?", "730391");
        let script = match k {
            1 => script_of(&[], "730391"),
            2 => script_of(&[("close to 111", "730391")], "111"),
            3 => script_of(
                &[("close to 111, 222", "730391"), ("close to 111", "222")],
                "111",
            ),
            _ => unreachable!(),
        };
        let episode = run_episode(&task, Box::new(PhpStrategy::new()), config(10, 1), &mock(script))
            .expect("episode runs");
        assert_eq!(
            episode.transcript.len(),
            k + 1,
            "k = {k}: expected termination at round {}",
            k + 1
        );
        assert_eq!(episode.transcript.termination, Termination::StrategyStop);
        assert_eq!(
            episode.transcript.final_answer.as_ref().unwrap().as_str(),
            "730391"
        );
    }
}

#[test]
fn budget_of_one_exhausts_after_one_round() {
    let task = numeric_task("2+2?", "4");
    let backend = mock(MockScript::constant("4"));
    let episode =
        run_episode(&task, Box::new(NeverStop), config(1, 3), &backend).expect("episode runs");
    assert_eq!(episode.transcript.len(), 1);
    assert_eq!(episode.transcript.termination, Termination::BudgetExhausted);
}

#[test]
fn ltm_runs_exactly_three_rounds_for_unit_decomposition() {
    let task = Task::new(
        "t1",
        "Solve it.",
        "What is 5+5?",
        Some("10"),
        AnswerKind::Numeric,
    )
    .unwrap();
    let backend = mock(script_of(
        &[("In order to solve", "first add 5 and 5")],
        "10",
    ));
    let episode = run_episode(&task, Box::new(LtmStrategy::new(1)), config(10, 5), &backend)
        .expect("episode runs");
    assert_eq!(episode.transcript.len(), 3);
    assert_eq!(episode.transcript.termination, Termination::StrategyStop);
}

#[test]
fn out_of_set_prompts_abort_with_contract_violation() {
    let task = numeric_task("2+2?", "4");
    let backend = mock(MockScript::constant("4"));
    let err = run_episode(&task, Box::new(Rogue), config(3, 1), &backend)
        .expect_err("rogue strategy must abort");
    assert!(err.kind.to_string().contains("not a candidate"));
    assert_eq!(err.episode.transcript.termination, Termination::Error);
    assert!(err.episode.transcript.is_empty());
}

#[test]
fn phantom_round_references_abort_with_contract_violation() {
    let task = numeric_task("2+2?", "4");
    let backend = mock(MockScript::constant("4"));
    let err = run_episode(&task, Box::new(BadExpansion), config(3, 1), &backend)
        .expect_err("phantom derived rounds must abort");
    assert!(err.kind.to_string().contains("99"));
    assert_eq!(err.episode.transcript.termination, Termination::Error);
}

#[test]
fn snapshots_stay_flat_without_expansion() {
    let task = numeric_task("2+2?", "4");
    let backend = mock(MockScript::constant("nothing to extract"));
    let episode =
        run_episode(&task, Box::new(NeverStop), config(4, 9), &backend).expect("episode runs");
    let snapshots = episode.snapshot_candidates();
    assert_eq!(snapshots.len(), 4);
    for snapshot in snapshots {
        assert_eq!(snapshot.len(), 1);
    }
}

#[test]
fn php_snapshots_grow_by_one_hint_prompt_per_round() {
    let task = numeric_task("What is X?", "730391");
    // fresh wrong answer each round so every expansion adds a new prompt
    let script = script_of(
        &[("close to 111, 222", "333"), ("close to 111", "222")],
        "111",
    );
    let episode = run_episode(&task, Box::new(PhpStrategy::new()), config(3, 2), &mock(script))
        .expect("episode runs");
    assert_eq!(episode.transcript.len(), 3);
    let sizes: Vec<usize> = episode.snapshot_candidates().iter().map(|s| s.len()).collect();
    assert_eq!(sizes, [1, 2, 3]);
}

#[test]
fn snapshot_inclusion_chain_holds() {
    let task = numeric_task("What is X?", "730391");
    let script = script_of(&[("close to 111", "222")], "111");
    let episode = run_episode(&task, Box::new(PhpStrategy::new()), config(5, 4), &mock(script))
        .expect("episode runs");
    let snapshots = episode.snapshot_candidates();
    for window in snapshots.windows(2) {
        assert!(window[0].is_subset_of(&window[1]));
    }
    // every executed prompt is a member of its round's snapshot
    for (round, snapshot) in episode.transcript.rounds.iter().zip(snapshots) {
        assert!(snapshot.contains(&round.prompt));
    }
}

#[test]
fn emitted_transcripts_never_exceed_budget() {
    let task = numeric_task("2+2?", "4");
    let backend = mock(MockScript::constant("no digits at all, ever"));
    for t in [1u32, 2, 5] {
        let episode = run_episode(
            &task,
            Box::new(PhpStrategy::new()),
            config(t, 11),
            &backend,
        )
        .expect("episode runs");
        assert!(episode.transcript.len() <= t);
        let objective = regularized_objective(0.0, episode.transcript.len().max(1), Budget::new(t).unwrap());
        assert!(matches!(objective, Objective::Finite(_)));
    }
}

#[test]
fn identical_runs_replay_byte_identically() {
    let task = numeric_task("What is X?", "730391");
    let script = script_of(&[("close to", "730391")], "120");
    let run = |seed: u64| {
        let episode = run_episode(
            &task,
            Box::new(PhpStrategy::new()),
            config(6, seed),
            &mock(script.clone()),
        )
        .expect("episode runs");
        episode.transcript.to_jsonl()
    };
    assert_eq!(run(42), run(42));
    // the seed is recorded per round, so different masters differ somewhere
    let a = run(42);
    let b = run(43);
    assert_ne!(a, b);
}

#[test]
fn final_answer_extracted_even_on_budget_exhaustion() {
    let task = numeric_task("2+2?", "4");
    let backend = mock(MockScript::constant("maybe 5?"));
    let episode =
        run_episode(&task, Box::new(NeverStop), config(2, 1), &backend).expect("episode runs");
    assert_eq!(episode.transcript.termination, Termination::BudgetExhausted);
    assert_eq!(episode.transcript.final_answer.as_ref().unwrap().as_str(), "5");
}
