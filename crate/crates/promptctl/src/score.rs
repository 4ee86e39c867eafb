//! Evaluation of responses and the episode-length regularizer.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::answer::CanonicalAnswer;
use crate::task::Task;
use crate::transcript::Transcript;

/// Round budget: episodes may not exceed `max_rounds` interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_rounds: u32,
}

impl Budget {
    pub fn new(max_rounds: u32) -> Result<Budget, BudgetError> {
        if max_rounds == 0 {
            return Err(BudgetError::Zero);
        }
        Ok(Budget { max_rounds })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum BudgetError {
    #[error("budget must allow at least one round")]
    Zero,
}

/// 1 iff the extracted answer is present and equals the truth after
/// canonicalization, else 0.
pub fn identification_score(answer: Option<&CanonicalAnswer>, truth: &CanonicalAnswer) -> f64 {
    match answer {
        Some(a) if a == truth => 1.0,
        _ => 0.0,
    }
}

/// A score plus the cutoff regularizer. Episodes that overshoot the budget
/// are infeasible outright; the value is distinguished, never a finite
/// sentinel that could leak into arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Finite(f64),
    Infeasible,
}

impl Objective {
    pub fn is_finite(&self) -> bool {
        matches!(self, Objective::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Objective::Finite(v) => Some(*v),
            Objective::Infeasible => None,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Finite(v) => write!(f, "{v}"),
            Objective::Infeasible => f.write_str("infeasible"),
        }
    }
}

/// score + R(tau), with R(tau) = 0 for tau <= T and -inf (infeasible) beyond.
pub fn regularized_objective(score: f64, tau: u32, budget: Budget) -> Objective {
    debug_assert!(tau >= 1);
    if tau <= budget.max_rounds {
        Objective::Finite(score)
    } else {
        Objective::Infeasible
    }
}

/// Task-specific scoring of a final response.
///
/// The identification kind is the 0/1 correctness check; `Custom` is an
/// extension point for open-ended tasks, which have no fixed definition
/// here.
#[derive(Clone)]
pub enum EvaluationFunction {
    Identification,
    Custom(Arc<dyn Fn(&Transcript, &Task) -> f64 + Send + Sync>),
}

impl EvaluationFunction {
    /// Score a finished transcript against its task.
    ///
    /// Identification compares the transcript's final answer to the task's
    /// ground truth; a task without ground truth scores 0.
    pub fn score(&self, transcript: &Transcript, task: &Task) -> f64 {
        match self {
            EvaluationFunction::Identification => match &task.ground_truth {
                Some(truth) => identification_score(transcript.final_answer.as_ref(), truth),
                None => 0.0,
            },
            EvaluationFunction::Custom(f) => f(transcript, task),
        }
    }
}

impl fmt::Debug for EvaluationFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluationFunction::Identification => f.write_str("Identification"),
            EvaluationFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Default for EvaluationFunction {
    fn default() -> Self {
        EvaluationFunction::Identification
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::AnswerKind;

    fn ans(s: &str) -> CanonicalAnswer {
        CanonicalAnswer::canonicalize(s, AnswerKind::Numeric).unwrap()
    }

    #[test]
    fn identification_matches_exactly() {
        let truth = ans("730391");
        assert_eq!(identification_score(Some(&ans("730391")), &truth), 1.0);
        assert_eq!(identification_score(Some(&ans("730392")), &truth), 0.0);
        assert_eq!(identification_score(None, &truth), 0.0);
    }

    #[test]
    fn regularizer_cutoff() {
        let budget = Budget::new(5).unwrap();
        assert_eq!(regularized_objective(1.0, 3, budget), Objective::Finite(1.0));
        assert_eq!(regularized_objective(1.0, 6, budget), Objective::Infeasible);
        assert_eq!(regularized_objective(0.0, 5, budget), Objective::Finite(0.0));
    }
}
