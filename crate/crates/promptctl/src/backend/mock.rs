//! The scripted mock backend.
//!
//! A script is an ordered list of substring rules, each with a weighted set
//! of outcomes, plus a default response. Rule selection is by longest
//! matcher first, then list order; the outcome draw is keyed entirely by
//! the request seed. This is the desk-scale stand-in for a real model:
//! substring rules can script convergence scenarios round by round, and
//! outcome weights script stochastic behaviour.

use serde::{Deserialize, Serialize};

use crate::seed::weighted_index;
use crate::text::Text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockOutcome {
    pub text: Text,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    /// Substring pattern over the prompt. An empty matcher matches every
    /// prompt (at the lowest priority).
    #[serde(rename = "match")]
    pub matcher: String,
    pub outcomes: Vec<MockOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(rename = "default")]
    pub default_response: Text,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MockScriptError {
    #[error("rule {rule} ({matcher:?}) has no outcomes")]
    NoOutcomes { rule: usize, matcher: String },
    #[error("rule {rule} ({matcher:?}) has a non-positive weight")]
    BadWeight { rule: usize, matcher: String },
    #[error("script is not valid JSON: {0}")]
    Json(String),
}

impl MockScript {
    /// A script with no rules: every prompt gets `default_response`.
    pub fn constant(default_response: impl Into<Text>) -> MockScript {
        MockScript {
            rules: Vec::new(),
            default_response: default_response.into(),
        }
    }

    pub fn new(
        rules: Vec<MockRule>,
        default_response: impl Into<Text>,
    ) -> Result<MockScript, MockScriptError> {
        let script = MockScript {
            rules,
            default_response: default_response.into(),
        };
        script.validate()?;
        Ok(script)
    }

    pub fn from_json(json: &str) -> Result<MockScript, MockScriptError> {
        let script: MockScript =
            serde_json::from_str(json).map_err(|e| MockScriptError::Json(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), MockScriptError> {
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.outcomes.is_empty() {
                return Err(MockScriptError::NoOutcomes {
                    rule: i,
                    matcher: rule.matcher.clone(),
                });
            }
            for outcome in &rule.outcomes {
                if !(outcome.weight > 0.0) {
                    return Err(MockScriptError::BadWeight {
                        rule: i,
                        matcher: rule.matcher.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// The matching rule under the priority order: longest matcher first,
    /// then list order.
    fn select_rule(&self, prompt: &Text) -> Option<&MockRule> {
        let mut best: Option<(usize, &MockRule)> = None;
        for rule in &self.rules {
            if !prompt.contains(&rule.matcher) {
                continue;
            }
            match best {
                Some((len, _)) if rule.matcher.len() <= len => {}
                _ => best = Some((rule.matcher.len(), rule)),
            }
        }
        best.map(|(_, rule)| rule)
    }

    /// Respond to a prompt. Pure in (prompt, seed): the outcome draw uses a
    /// per-call sampler derived from the seed, never shared state.
    pub fn respond(&self, prompt: &Text, seed: u64) -> Text {
        match self.select_rule(prompt) {
            Some(rule) => {
                let weights: Vec<f64> = rule.outcomes.iter().map(|o| o.weight).collect();
                rule.outcomes[weighted_index(seed, &weights)].text.clone()
            }
            None => self.default_response.clone(),
        }
    }
}

/// Convenience for test scripts: each pair is (matcher, single response).
pub fn script_of(pairs: &[(&str, &str)], default_response: &str) -> MockScript {
    MockScript {
        rules: pairs
            .iter()
            .map(|(m, r)| MockRule {
                matcher: m.to_string(),
                outcomes: vec![MockOutcome {
                    text: Text::new(*r),
                    weight: 1.0,
                }],
            })
            .collect(),
        default_response: Text::new(default_response),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_seed;

    #[test]
    fn single_outcome_rule_fires() {
        let script = script_of(&[("2+2", "4")], "dunno");
        assert_eq!(script.respond(&Text::new("what is 2+2?"), 1).as_str(), "4");
        assert_eq!(script.respond(&Text::new("what is 3+3?"), 1).as_str(), "dunno");
    }

    #[test]
    fn longest_matcher_wins_then_list_order() {
        let script = MockScript::new(
            vec![
                MockRule {
                    matcher: "close".into(),
                    outcomes: vec![MockOutcome {
                        text: Text::new("short"),
                        weight: 1.0,
                    }],
                },
                MockRule {
                    matcher: "close to 42".into(),
                    outcomes: vec![MockOutcome {
                        text: Text::new("long"),
                        weight: 1.0,
                    }],
                },
                MockRule {
                    matcher: "los".into(),
                    outcomes: vec![MockOutcome {
                        text: Text::new("tie-loser"),
                        weight: 1.0,
                    }],
                },
            ],
            "none",
        )
        .unwrap();
        assert_eq!(
            script.respond(&Text::new("hint: close to 42"), 5).as_str(),
            "long"
        );
        // "close" (5 bytes) beats "los" (3 bytes); both match
        assert_eq!(script.respond(&Text::new("close by"), 5).as_str(), "short");
    }

    #[test]
    fn same_seed_same_response() {
        let script = MockScript::new(
            vec![MockRule {
                matcher: "".into(),
                outcomes: vec![
                    MockOutcome {
                        text: Text::new("4"),
                        weight: 0.6,
                    },
                    MockOutcome {
                        text: Text::new("5"),
                        weight: 0.4,
                    },
                ],
            }],
            "",
        )
        .unwrap();
        let p = Text::new("q");
        for seed in [0u64, 1, 99, u64::MAX] {
            assert_eq!(script.respond(&p, seed), script.respond(&p, seed));
        }
    }

    #[test]
    fn weighted_outcomes_hit_their_frequencies() {
        // Brute-force frequency count over the seeded sampler.
        let script = MockScript::new(
            vec![MockRule {
                matcher: "".into(),
                outcomes: vec![
                    MockOutcome {
                        text: Text::new("4"),
                        weight: 0.6,
                    },
                    MockOutcome {
                        text: Text::new("5"),
                        weight: 0.4,
                    },
                ],
            }],
            "",
        )
        .unwrap();
        let p = Text::new("q");
        let n = 10_000;
        let hits = (0..n)
            .filter(|i| script.respond(&p, derive_seed(2024, *i)).as_str() == "4")
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.6).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn validation_rejects_bad_scripts() {
        assert!(matches!(
            MockScript::from_json(r#"{"rules":[{"match":"x","outcomes":[]}],"default":"d"}"#),
            Err(MockScriptError::NoOutcomes { .. })
        ));
        assert!(matches!(
            MockScript::from_json(
                r#"{"rules":[{"match":"x","outcomes":[{"text":"y","weight":0.0}]}],"default":"d"}"#
            ),
            Err(MockScriptError::BadWeight { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"rules":[{"match":"2+2","outcomes":[{"text":"4","weight":1.0}]}],"default":"hm"}"#;
        let script = MockScript::from_json(json).unwrap();
        assert_eq!(script.rules.len(), 1);
        assert_eq!(script.default_response.as_str(), "hm");
    }
}
