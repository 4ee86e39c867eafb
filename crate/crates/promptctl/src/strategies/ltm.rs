//! Least-to-Most decomposition.
//!
//! The first T rounds ask the model to break the task down, producing
//! sub-tasks z_1^r .. z_T^r (with z_0^r standing for the original
//! question). Rounds T+1 .. 2T+1 then solve the sub-tasks in reverse order
//! in a dialogue format: each prompt is the previous prompt, the previous
//! response, and the next sub-task, concatenated. An episode always runs
//! exactly 2T+1 rounds.

use crate::candidates::{CandidateEntry, PromptCandidateSet};
use crate::engine::{Strategy, StrategyError};
use crate::task::Task;
use crate::text::{concat, Text};
use crate::transcript::{Round, Transcript};

/// Rolling dialogue state: every prompt and response so far, in round
/// order. The first `t_decomp` responses are the sub-tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct LtmState {
    pub t_decomp: u32,
    prompts: Vec<Text>,
    responses: Vec<Text>,
}

impl LtmState {
    pub fn new(t_decomp: u32) -> LtmState {
        LtmState {
            t_decomp,
            prompts: Vec::new(),
            responses: Vec::new(),
        }
    }

    /// Record a completed round.
    pub fn record(&mut self, prompt: Text, response: Text) {
        self.prompts.push(prompt);
        self.responses.push(response);
    }

    /// The sub-tasks z_1^r .. z_T^r gathered during the decomposition
    /// phase (all of them once T rounds have completed).
    pub fn subtasks(&self) -> &[Text] {
        let upto = (self.t_decomp as usize).min(self.responses.len());
        &self.responses[..upto]
    }

    pub fn rounds_recorded(&self) -> u32 {
        self.responses.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LtmError {
    #[error("round {t} is out of range: LtM with T={t_decomp} runs rounds 1..={max}")]
    OutOfRange { t: u32, t_decomp: u32, max: u32 },
    #[error("round {t} needs {needed} recorded rounds, state has {have}")]
    MissingHistory { t: u32, needed: u32, have: u32 },
}

/// The round-t prompt of the LtM schedule.
///
/// - t in 1..=T: `<Description> In order to solve <z_{t-1}^r>, we have to
///   solve:` with z_0^r = the original question;
/// - t = T+1: `<Description> <z_T^r>`;
/// - t in T+2..=2T+1: `<z_{t-1}^p> <z_{t-1}^r> <z_{2T+1-t}^r>`.
pub fn ltm_prompt(task: &Task, t: u32, state: &LtmState) -> Result<Text, LtmError> {
    let t_decomp = state.t_decomp;
    let max = 2 * t_decomp + 1;
    if t == 0 || t > max {
        return Err(LtmError::OutOfRange { t, t_decomp, max });
    }
    if state.rounds_recorded() < t - 1 {
        return Err(LtmError::MissingHistory {
            t,
            needed: t - 1,
            have: state.rounds_recorded(),
        });
    }
    // z_k^r with z_0^r standing for the original question
    let response_at = |k: u32| -> &Text {
        if k == 0 {
            &task.question
        } else {
            &state.responses[(k - 1) as usize]
        }
    };
    let prompt = if t <= t_decomp {
        let glue = format!("In order to solve {}, we have to solve:", response_at(t - 1));
        concat([&task.description, &Text::new(glue)])
    } else if t == t_decomp + 1 {
        concat([&task.description, response_at(t_decomp)])
    } else {
        let prev_prompt = &state.prompts[(t - 2) as usize];
        let subtask = response_at(2 * t_decomp + 1 - t);
        concat([prev_prompt, response_at(t - 1), subtask])
    };
    Ok(prompt)
}

/// [`Strategy`] adapter over the LtM schedule. Each expansion contributes
/// the next scheduled prompt to the candidate set, and the episode stops
/// after round 2T+1.
#[derive(Debug)]
pub struct LtmStrategy {
    state: LtmState,
}

impl LtmStrategy {
    pub fn new(t_decomp: u32) -> LtmStrategy {
        LtmStrategy {
            state: LtmState::new(t_decomp.max(1)),
        }
    }

    fn total_rounds(&self) -> u32 {
        2 * self.state.t_decomp + 1
    }
}

impl Strategy for LtmStrategy {
    fn name(&self) -> &'static str {
        "ltm"
    }

    fn initial_prompts(&self, task: &Task) -> Vec<Text> {
        match ltm_prompt(task, 1, &self.state) {
            Ok(p) => vec![p],
            Err(_) => Vec::new(),
        }
    }

    fn next_prompt(
        &mut self,
        task: &Task,
        transcript: &Transcript,
        _candidates: &PromptCandidateSet,
    ) -> Result<Text, StrategyError> {
        let t = transcript.len() + 1;
        ltm_prompt(task, t, &self.state).map_err(|e| StrategyError(e.to_string()))
    }

    fn expand(
        &mut self,
        task: &Task,
        _candidates: &PromptCandidateSet,
        new_round: &Round,
    ) -> Vec<CandidateEntry> {
        self.state
            .record(new_round.prompt.clone(), new_round.response.clone());
        let next = new_round.index + 1;
        if next > self.total_rounds() {
            return Vec::new();
        }
        match ltm_prompt(task, next, &self.state) {
            Ok(prompt) => vec![CandidateEntry::derived(prompt, new_round.index)],
            Err(_) => Vec::new(),
        }
    }

    fn should_stop(&self, _task: &Task, transcript: &Transcript) -> bool {
        transcript.len() >= self.total_rounds()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::AnswerKind;

    fn task() -> Task {
        Task::new(
            "t",
            "<Description>",
            "<Question>",
            None,
            AnswerKind::String,
        )
        .unwrap()
    }

    #[test]
    fn round_one_asks_for_decomposition() {
        let state = LtmState::new(1);
        assert_eq!(
            ltm_prompt(&task(), 1, &state).unwrap().as_str(),
            "<Description> In order to solve <Question>, we have to solve:"
        );
    }

    #[test]
    fn round_t_plus_one_poses_the_last_subtask() {
        let mut state = LtmState::new(1);
        state.record(Text::new("p1"), Text::new("<z_1^r>"));
        assert_eq!(
            ltm_prompt(&task(), 2, &state).unwrap().as_str(),
            "<Description> <z_1^r>"
        );
    }

    #[test]
    fn dialogue_rounds_chain_and_end_on_the_question() {
        let mut state = LtmState::new(1);
        state.record(Text::new("p1"), Text::new("<z_1^r>"));
        state.record(Text::new("<z_2^p>"), Text::new("<z_2^r>"));
        assert_eq!(
            ltm_prompt(&task(), 3, &state).unwrap().as_str(),
            "<z_2^p> <z_2^r> <Question>"
        );
    }

    #[test]
    fn out_of_range_rounds_are_rejected() {
        let state = LtmState::new(1);
        assert!(matches!(
            ltm_prompt(&task(), 4, &state),
            Err(LtmError::OutOfRange { .. })
        ));
        assert!(matches!(
            ltm_prompt(&task(), 0, &state),
            Err(LtmError::OutOfRange { .. })
        ));
        assert!(matches!(
            ltm_prompt(&task(), 3, &state),
            Err(LtmError::MissingHistory { .. })
        ));
    }

    #[test]
    fn deeper_decomposition_walks_subtasks_in_reverse() {
        let mut state = LtmState::new(2);
        state.record(Text::new("p1"), Text::new("S1"));
        state.record(Text::new("p2"), Text::new("S2"));
        // t = 3 = T+1
        assert_eq!(
            ltm_prompt(&task(), 3, &state).unwrap().as_str(),
            "<Description> S2"
        );
        state.record(Text::new("<Description> S2"), Text::new("A1"));
        // t = 4: [z_3^p z_3^r z_1^r]
        assert_eq!(
            ltm_prompt(&task(), 4, &state).unwrap().as_str(),
            "<Description> S2 A1 S1"
        );
        state.record(Text::new("<Description> S2 A1 S1"), Text::new("A2"));
        // t = 5 = 2T+1: [z_4^p z_4^r z_0^r]
        assert_eq!(
            ltm_prompt(&task(), 5, &state).unwrap().as_str(),
            "<Description> S2 A1 S1 A2 <Question>"
        );
    }
}
