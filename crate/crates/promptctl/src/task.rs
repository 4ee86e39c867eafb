//! Tasks: the query a whole episode is trying to answer.

use serde::{Deserialize, Serialize};

use crate::answer::{AnswerKind, CanonicalAnswer};
use crate::text::Text;

/// A task (query) with an optional ground truth for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    /// Optional preamble; LtM-style prompts prepend it to every round.
    #[serde(default)]
    pub description: Text,
    pub question: Text,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<CanonicalAnswer>,
    pub answer_kind: AnswerKind,
}

impl Task {
    /// Build a task, canonicalizing the ground truth under `answer_kind`.
    pub fn new(
        id: impl Into<String>,
        description: impl Into<Text>,
        question: impl Into<Text>,
        ground_truth: Option<&str>,
        answer_kind: AnswerKind,
    ) -> Result<Task, TaskError> {
        let question = question.into();
        if question.is_empty() {
            return Err(TaskError::EmptyQuestion);
        }
        let ground_truth = match ground_truth {
            Some(raw) => Some(
                CanonicalAnswer::canonicalize(raw, answer_kind)
                    .ok_or_else(|| TaskError::BadGroundTruth(raw.to_string()))?,
            ),
            None => None,
        };
        Ok(Task {
            id: id.into(),
            description: description.into(),
            question,
            ground_truth,
            answer_kind,
        })
    }

    /// Validate a deserialized task (corpus lines arrive through serde).
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.question.is_empty() {
            return Err(TaskError::EmptyQuestion);
        }
        if let Some(truth) = &self.ground_truth {
            let again = CanonicalAnswer::canonicalize(truth.as_str(), self.answer_kind)
                .ok_or_else(|| TaskError::BadGroundTruth(truth.as_str().to_string()))?;
            if &again != truth {
                return Err(TaskError::BadGroundTruth(truth.as_str().to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("task question must be non-empty")]
    EmptyQuestion,
    #[error("ground truth {0:?} is not canonical for the task's answer kind")]
    BadGroundTruth(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_truth_is_canonicalized() {
        let t = Task::new("t", "", "What is 6*7?", Some("42."), AnswerKind::Numeric).unwrap();
        assert_eq!(t.ground_truth.unwrap().as_str(), "42");
    }

    #[test]
    fn empty_question_rejected() {
        assert_eq!(
            Task::new("t", "", "", None, AnswerKind::Numeric).unwrap_err(),
            TaskError::EmptyQuestion
        );
    }

    #[test]
    fn validate_rejects_non_canonical_truth() {
        let json = r#"{"id":"t","question":"q","ground_truth":"042","answer_kind":"numeric"}"#;
        let task: Task = serde_json::from_str(json).unwrap();
        assert!(task.validate().is_err());
    }
}
