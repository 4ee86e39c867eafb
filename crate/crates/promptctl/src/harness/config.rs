//! TOML configuration: one document with [backend], [strategy], [budget]
//! and the optional [ensemble], [ape] and [multiagent] sections. Every key
//! is documented in the repository README.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::backend::{Backend, BackendConfig, GenParams, HttpConfig, MockScript};
use crate::ensemble::Combiner;
use crate::multiagent::{AgentSpec, Topology};
use crate::score::{Budget, EvaluationFunction};
use crate::strategies::StrategyConfig;
use crate::task::Task;
use crate::text::Text;

use super::HarnessError;

fn default_max_rounds() -> u32 {
    10
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_retries() -> u32 {
    2
}

fn default_max_in_flight() -> usize {
    8
}

fn default_true() -> bool {
    true
}

fn default_replicas() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendSection,
    #[serde(default)]
    pub strategy: Option<StrategyConfig>,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default)]
    pub ape: Option<ApeSection>,
    #[serde(default)]
    pub multiagent: Option<MultiagentSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
}

impl Default for BudgetSection {
    fn default() -> Self {
        BudgetSection {
            max_rounds: default_max_rounds(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum BackendSection {
    Mock {
        /// Path to the JSON mock script, relative to the config file.
        script: PathBuf,
    },
    Http {
        base_url: String,
        model: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_max_retries")]
        max_retries: u32,
        #[serde(default = "default_max_in_flight")]
        max_in_flight: usize,
        #[serde(default = "default_true")]
        send_seed: bool,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    #[serde(default)]
    pub combiner: CombinerName,
    #[serde(default)]
    pub threshold: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerName {
    #[default]
    Majority,
    ComplexityThreshold,
}

impl CombinerName {
    pub fn build(self, threshold: u32) -> Combiner {
        match self {
            CombinerName::Majority => Combiner::Majority,
            CombinerName::ComplexityThreshold => Combiner::ComplexityThreshold(threshold),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApeSection {
    /// Finite uniform support: one candidate prompt per line.
    pub prompts_file: Option<PathBuf>,
    /// Backend-proposal sampling when no prompts file is given.
    #[serde(default)]
    pub meta_prompt: Option<String>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiagentSection {
    /// Path to the session TOML, relative to the config file.
    pub session: PathBuf,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<(RunConfig, PathBuf), HarnessError> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path)?;
        let config: RunConfig =
            toml::from_str(&content).map_err(|e| HarnessError::Config(e.to_string()))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((config, base))
    }

    pub fn budget(&self) -> Result<Budget, HarnessError> {
        Budget::new(self.budget.max_rounds).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn strategy(&self) -> StrategyConfig {
        self.strategy.clone().unwrap_or(StrategyConfig::Php)
    }

    /// Build the backend, resolving mock-script paths against `base` and
    /// reading the API key from `api_key` (the CLI passes
    /// PROMPTCTL_API_KEY).
    pub fn build_backend(
        &self,
        base: &Path,
        api_key: Option<String>,
    ) -> Result<Backend, HarnessError> {
        let config = match &self.backend {
            BackendSection::Mock { script } => {
                let path = base.join(script);
                let json = std::fs::read_to_string(&path).map_err(|e| {
                    HarnessError::Config(format!("cannot read mock script {}: {e}", path.display()))
                })?;
                let script =
                    MockScript::from_json(&json).map_err(|e| HarnessError::Config(e.to_string()))?;
                BackendConfig::Mock { script }
            }
            BackendSection::Http {
                base_url,
                model,
                timeout_ms,
                max_retries,
                max_in_flight,
                send_seed,
            } => BackendConfig::Http(HttpConfig {
                base_url: base_url.clone(),
                model: model.clone(),
                timeout_ms: *timeout_ms,
                max_retries: *max_retries,
                max_in_flight: *max_in_flight,
                api_key,
                send_seed: *send_seed,
            }),
        };
        Ok(Backend::new(config))
    }
}

/// Session config for `promptctl multiagent`: the agent roster and the
/// routing edges.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    #[serde(default)]
    pub budget: Option<u32>,
    pub agents: Vec<AgentEntry>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub id: String,
    #[serde(default)]
    pub instruction: String,
    pub task: Task,
    #[serde(default)]
    pub strategy: Option<StrategyConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub from: String,
    pub to: String,
}

impl SessionConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<SessionConfig, HarnessError> {
        let content = std::fs::read_to_string(path)?;
        toml::from_str(&content).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn build_agents(&self) -> Result<Vec<AgentSpec>, HarnessError> {
        let mut agents = Vec::with_capacity(self.agents.len());
        for entry in &self.agents {
            entry
                .task
                .validate()
                .map_err(|e| HarnessError::Config(format!("agent {}: {e}", entry.id)))?;
            let strategy = entry
                .strategy
                .clone()
                .unwrap_or(StrategyConfig::Php)
                .build()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            agents.push(AgentSpec {
                id: entry.id.clone(),
                initial_instruction: Text::new(entry.instruction.clone()),
                task: entry.task.clone(),
                evaluator: EvaluationFunction::Identification,
                strategy,
            });
        }
        Ok(agents)
    }

    pub fn topology(&self) -> Topology {
        Topology::new(
            self.edges
                .iter()
                .map(|e| (e.from.clone(), e.to.clone()))
                .collect(),
        )
    }
}

/// Shared generation parameters are fixed for now; the engine default.
pub fn gen_params() -> GenParams {
    GenParams::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_mock_config_parses() {
        let toml = r#"
            [backend]
            kind = "mock"
            script = "script.json"

            [strategy]
            kind = "php"

            [budget]
            max_rounds = 5
        "#;
        let config: RunConfig = toml::from_str(toml).unwrap();
        assert_eq!(config.budget.max_rounds, 5);
        assert_eq!(config.strategy(), StrategyConfig::Php);
        assert!(matches!(config.backend, BackendSection::Mock { .. }));
    }

    #[test]
    fn http_backend_and_ltm_strategy_parse() {
        let toml = r#"
            [backend]
            kind = "http"
            base_url = "http://localhost:8080/v1"
            model = "m1"

            [strategy]
            kind = "ltm"
            t_decomp = 2

            [ensemble]
            replicas = 25
            combiner = "complexity_threshold"
            threshold = 3
        "#;
        let config: RunConfig = toml::from_str(toml).unwrap();
        assert_eq!(
            config.strategy(),
            StrategyConfig::Ltm { t_decomp: 2 }
        );
        let ensemble = config.ensemble.unwrap();
        assert_eq!(ensemble.replicas, 25);
        assert_eq!(ensemble.combiner, CombinerName::ComplexityThreshold);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let toml = r#"
            [backend]
            kind = "mock"
            script = "s.json"
            surprise = 1
        "#;
        assert!(toml::from_str::<RunConfig>(toml).is_err());
    }

    #[test]
    fn session_config_parses() {
        let toml = r#"
            budget = 4

            [[agents]]
            id = "a"
            instruction = "You are solver A."

            [agents.task]
            id = "t1"
            question = "2+2?"
            ground_truth = "4"
            answer_kind = "numeric"

            [agents.strategy]
            kind = "php"

            [[edges]]
            from = "a"
            to = "b"
        "#;
        let session: SessionConfig = toml::from_str(toml).unwrap();
        assert_eq!(session.budget, Some(4));
        assert_eq!(session.agents.len(), 1);
        assert_eq!(session.edges.len(), 1);
    }
}
