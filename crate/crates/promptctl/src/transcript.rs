//! Episode transcripts: the ordered (prompt, response) record.

use serde::{Deserialize, Serialize};

use crate::answer::CanonicalAnswer;
use crate::text::Text;

/// One interaction round. Immutable once recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    /// 1-based round index.
    pub index: u32,
    pub prompt: Text,
    pub response: Text,
    pub seed_used: u64,
    pub backend_id: String,
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StrategyStop,
    BudgetExhausted,
    Error,
}

/// The full record of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub task_id: String,
    pub rounds: Vec<Round>,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<CanonicalAnswer>,
}

impl Transcript {
    /// Number of completed rounds (the stopping time).
    pub fn len(&self) -> u32 {
        self.rounds.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn last_response(&self) -> Option<&Text> {
        self.rounds.last().map(|r| &r.response)
    }

    /// Round indices must be 1..=len consecutive.
    pub fn indices_consecutive(&self) -> bool {
        self.rounds
            .iter()
            .enumerate()
            .all(|(i, r)| r.index == (i + 1) as u32)
    }

    /// One JSONL line per round; the last line carries the termination.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let last = self.rounds.len().saturating_sub(1);
        for (i, round) in self.rounds.iter().enumerate() {
            let mut line = serde_json::json!({
                "task_id": self.task_id,
                "t": round.index,
                "prompt": round.prompt,
                "response": round.response,
                "seed": round.seed_used,
            });
            if i == last {
                line["termination"] = serde_json::to_value(self.termination).unwrap();
            }
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_marks_termination_on_last_line() {
        let t = Transcript {
            task_id: "t1".into(),
            rounds: vec![
                Round {
                    index: 1,
                    prompt: Text::new("q"),
                    response: Text::new("a"),
                    seed_used: 7,
                    backend_id: "mock".into(),
                },
                Round {
                    index: 2,
                    prompt: Text::new("q2"),
                    response: Text::new("a2"),
                    seed_used: 8,
                    backend_id: "mock".into(),
                },
            ],
            termination: Termination::StrategyStop,
            final_answer: None,
        };
        let jsonl = t.to_jsonl();
        let lines: Vec<&str> = jsonl.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(!lines[0].contains("termination"));
        assert!(lines[1].contains("\"termination\":\"strategy_stop\""));
        assert!(t.indices_consecutive());
    }
}
