//! Progressive-Hint Prompting.
//!
//! Every prior extracted answer becomes a hint appended to the question:
//! `<Question> Hint: the answer is close to a_1, ..., a_{t-1}`. The episode
//! stops once the latest answer reiterates a hint already in the prompt —
//! stopping compares extracted answers, not raw substrings, since hints are
//! answers by construction.
//!
//! A round whose response yields no extractable answer contributes no hint;
//! the expansion falls back to the bare question (already a candidate), and
//! the next round retries with the hints collected so far.

use crate::answer::{extract_answer, AnswerKind, CanonicalAnswer};
use crate::candidates::{CandidateEntry, PromptCandidateSet};
use crate::engine::{Strategy, StrategyError};
use crate::task::Task;
use crate::text::{concat, Text};
use crate::transcript::{Round, Transcript};

const HINT_LEAD: &str = "Hint: the answer is close to";

/// Hints extracted from prior responses, in generation order. Duplicates
/// are retained: a repeated answer still appears once per round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhpState {
    pub hints: Vec<CanonicalAnswer>,
}

impl PhpState {
    pub fn new() -> PhpState {
        PhpState::default()
    }
}

/// The round-t prompt: the bare question when no hints exist, otherwise the
/// question followed by the full hint list.
pub fn php_next_prompt(task: &Task, state: &PhpState) -> Text {
    if state.hints.is_empty() {
        return task.question.clone();
    }
    let listed = state
        .hints
        .iter()
        .map(|h| h.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    concat([&task.question, &Text::new(HINT_LEAD), &Text::new(listed)])
}

/// True iff the latest response's extracted answer equals a hint already in
/// the state (i.e. the response reiterates a portion of the prompt).
pub fn php_should_stop(latest_response: &Text, state: &PhpState, kind: AnswerKind) -> bool {
    match extract_answer(latest_response, kind) {
        Some(answer) => state.hints.contains(&answer),
        None => false,
    }
}

/// The single candidate added after round `round_index`: the next hint
/// prompt when the response yields an answer, the bare-question retry when
/// it does not.
pub fn php_expand(response: &Text, state: &PhpState, task: &Task, round_index: u32) -> CandidateEntry {
    match extract_answer(response, task.answer_kind) {
        Some(answer) => {
            let mut next = state.clone();
            next.hints.push(answer);
            CandidateEntry::derived(php_next_prompt(task, &next), round_index)
        }
        None => CandidateEntry::derived(task.question.clone(), round_index),
    }
}

/// [`Strategy`] adapter over the PHP rules.
#[derive(Debug, Default)]
pub struct PhpStrategy {
    state: PhpState,
}

impl PhpStrategy {
    pub fn new() -> PhpStrategy {
        PhpStrategy::default()
    }
}

impl Strategy for PhpStrategy {
    fn name(&self) -> &'static str {
        "php"
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
        Ok(php_next_prompt(task, &self.state))
    }

    fn expand(
        &mut self,
        task: &Task,
        _candidates: &PromptCandidateSet,
        new_round: &Round,
    ) -> Vec<CandidateEntry> {
        let entry = php_expand(&new_round.response, &self.state, task, new_round.index);
        if let Some(answer) = extract_answer(&new_round.response, task.answer_kind) {
            self.state.hints.push(answer);
        }
        vec![entry]
    }

    fn should_stop(&self, task: &Task, transcript: &Transcript) -> bool {
        // Hints from rounds 1..t-1 only; the engine expands before it asks,
        // so recompute the prior state from the transcript.
        let Some(latest) = transcript.rounds.last() else {
            return false;
        };
        let prior = PhpState {
            hints: transcript.rounds[..transcript.rounds.len() - 1]
                .iter()
                .filter_map(|r| extract_answer(&r.response, task.answer_kind))
                .collect(),
        };
        php_should_stop(&latest.response, &prior, task.answer_kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::AnswerKind;

    fn task() -> Task {
        Task::new(
            "t",
            "",
            "<Question>",
            Some("730391"),
            AnswerKind::Numeric,
        )
        .unwrap()
    }

    fn hint(s: &str) -> CanonicalAnswer {
        CanonicalAnswer::canonicalize(s, AnswerKind::Numeric).unwrap()
    }

    #[test]
    fn bare_question_without_hints() {
        assert_eq!(php_next_prompt(&task(), &PhpState::new()).as_str(), "<Question>");
    }

    #[test]
    fn one_hint_prompt_matches_formula() {
        let state = PhpState {
            hints: vec![hint("730391")],
        };
        assert_eq!(
            php_next_prompt(&task(), &state).as_str(),
            "<Question> Hint: the answer is close to 730391"
        );
    }

    #[test]
    fn hints_listed_in_generation_order() {
        let state = PhpState {
            hints: vec![hint("100"), hint("120")],
        };
        assert_eq!(
            php_next_prompt(&task(), &state).as_str(),
            "<Question> Hint: the answer is close to 100, 120"
        );
    }

    #[test]
    fn stops_only_on_reiterated_answer() {
        let with_hint = PhpState {
            hints: vec![hint("730391")],
        };
        assert!(php_should_stop(
            &Text::new("therefore 730391."),
            &with_hint,
            AnswerKind::Numeric
        ));
        assert!(!php_should_stop(
            &Text::new("therefore 42."),
            &with_hint,
            AnswerKind::Numeric
        ));
        assert!(!php_should_stop(
            &Text::new("anything"),
            &PhpState::new(),
            AnswerKind::Numeric
        ));
    }

    #[test]
    fn expansion_appends_the_new_answer() {
        let t = task();
        let entry = php_expand(&Text::new("it is 730391."), &PhpState::new(), &t, 1);
        assert!(entry.prompt.contains("close to 730391"));

        let second = php_expand(
            &Text::new("call it 5"),
            &PhpState {
                hints: vec![hint("3")],
            },
            &t,
            2,
        );
        assert!(second.prompt.contains("close to 3, 5"));
    }

    #[test]
    fn unextractable_response_retries_bare_question() {
        let t = task();
        let entry = php_expand(&Text::new("no idea"), &PhpState::new(), &t, 1);
        assert_eq!(entry.prompt, t.question);
    }
}
