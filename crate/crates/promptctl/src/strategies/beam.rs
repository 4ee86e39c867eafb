//! Beam search over prompt sequences, in the tree-search spirit of ToT.
//!
//! [`beam_step`] is the pure kernel: expand every kept sequence by every
//! generated continuation, score the extended sequences, keep the top W.
//! [`BeamStrategy`] adapts it to the episode loop: each round the beam
//! ranks candidate follow-up prompts built from the latest response, all
//! ranked candidates join the candidate set, and the best one is executed
//! next round.

use std::sync::Arc;

use crate::answer::extract_answer;
use crate::candidates::{CandidateEntry, PromptCandidateSet};
use crate::engine::{Strategy, StrategyError};
use crate::task::Task;
use crate::text::{concat, Text};
use crate::transcript::{Round, Transcript};

/// One kept hypothesis: a prompt sequence and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamEntry {
    pub sequence: Vec<Text>,
    pub score: f64,
}

/// The kept hypotheses, sorted by score descending, at most `width` of
/// them. `stalled` is set when a step produced no continuations.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub entries: Vec<BeamEntry>,
    pub width: usize,
    pub stalled: bool,
}

impl Beam {
    /// A beam holding a single scored sequence.
    pub fn seeded(sequence: Vec<Text>, score: f64, width: usize) -> Beam {
        Beam {
            entries: vec![BeamEntry { sequence, score }],
            width,
            stalled: false,
        }
    }

    pub fn best(&self) -> Option<&BeamEntry> {
        self.entries.first()
    }
}

/// One expansion step. Every entry is extended by every continuation the
/// expander yields for it; extended sequences are scored and the top
/// `width` survive, ties broken by earlier insertion order. An expander
/// that yields nothing leaves the beam unchanged and flags it stalled.
pub fn beam_step(
    beam: &Beam,
    mut expander: impl FnMut(&[Text]) -> Vec<Text>,
    mut scorer: impl FnMut(&[Text]) -> f64,
    width: usize,
) -> Beam {
    assert!(width >= 1, "beam width must be at least 1");
    let mut children: Vec<BeamEntry> = Vec::new();
    for entry in &beam.entries {
        for continuation in expander(&entry.sequence) {
            let mut sequence = entry.sequence.clone();
            sequence.push(continuation);
            let score = scorer(&sequence);
            children.push(BeamEntry { sequence, score });
        }
    }
    if children.is_empty() {
        let mut unchanged = beam.clone();
        unchanged.stalled = true;
        return unchanged;
    }
    // stable sort: insertion order wins ties
    children.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    children.truncate(width);
    Beam {
        entries: children,
        width,
        stalled: false,
    }
}

/// Deterministic sequence scorer type for [`BeamStrategy`].
pub type SequenceScorer = Arc<dyn Fn(&Task, &[Text]) -> f64 + Send + Sync>;

/// [`Strategy`] adapter: a beam over prompt sequences where only the best
/// hypothesis is executed each round.
///
/// The default scorer is a deterministic hash-based prior over sequences;
/// callers with a real value signal plug their own in via `with_scorer`.
/// Stops once two consecutive rounds extract the same answer.
pub struct BeamStrategy {
    width: usize,
    scorer: SequenceScorer,
    executed: Vec<Text>,
    ranked_next: Vec<Text>,
}

impl BeamStrategy {
    pub fn new(width: usize) -> BeamStrategy {
        BeamStrategy {
            width: width.max(1),
            scorer: Arc::new(|task, seq| hash_prior(task, seq)),
            executed: Vec::new(),
            ranked_next: Vec::new(),
        }
    }

    pub fn with_scorer(mut self, scorer: SequenceScorer) -> BeamStrategy {
        self.scorer = scorer;
        self
    }

    /// Follow-up prompts derived from a response: a verification prompt for
    /// the extracted answer, a reconsideration prompt quoting the head of
    /// the response, and the bare question as a retry.
    fn continuations(task: &Task, round: &Round) -> Vec<Text> {
        let mut out = Vec::new();
        if let Some(answer) = extract_answer(&round.response, task.answer_kind) {
            out.push(concat([
                &task.question,
                &Text::new(format!("Verify that the answer is {answer} and state it.")),
            ]));
        }
        let head: String = round
            .response
            .as_str()
            .split_whitespace()
            .take(8)
            .collect::<Vec<_>>()
            .join(" ");
        if !head.is_empty() {
            out.push(concat([
                &task.question,
                &Text::new(format!("Reconsider this reasoning: {head}")),
            ]));
        }
        out.push(task.question.clone());
        out
    }
}

/// FNV-1a over the task id and sequence, mapped to [0, 1).
fn hash_prior(task: &Task, sequence: &[Text]) -> f64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    eat(task.id.as_bytes());
    for text in sequence {
        eat(text.as_str().as_bytes());
    }
    crate::seed::unit_from_seed(h)
}

impl Strategy for BeamStrategy {
    fn name(&self) -> &'static str {
        "beam"
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
        Ok(self
            .ranked_next
            .first()
            .cloned()
            .unwrap_or_else(|| task.question.clone()))
    }

    fn expand(
        &mut self,
        task: &Task,
        _candidates: &PromptCandidateSet,
        new_round: &Round,
    ) -> Vec<CandidateEntry> {
        self.executed.push(new_round.prompt.clone());
        let continuations = Self::continuations(task, new_round);
        let scorer = Arc::clone(&self.scorer);
        let beam = beam_step(
            &Beam::seeded(self.executed.clone(), 0.0, self.width),
            |_| continuations.clone(),
            |seq| scorer(task, seq),
            self.width,
        );
        self.ranked_next = beam
            .entries
            .iter()
            .filter_map(|e| e.sequence.last().cloned())
            .collect();
        self.ranked_next
            .iter()
            .map(|p| CandidateEntry::derived(p.clone(), new_round.index))
            .collect()
    }

    fn should_stop(&self, task: &Task, transcript: &Transcript) -> bool {
        let n = transcript.rounds.len();
        if n < 2 {
            return false;
        }
        let last = extract_answer(&transcript.rounds[n - 1].response, task.answer_kind);
        let prev = extract_answer(&transcript.rounds[n - 2].response, task.answer_kind);
        matches!((last, prev), (Some(a), Some(b)) if a == b)
    }
}
