//! Built-in episode strategies: progressive hints, least-to-most
//! decomposition, and beam search over prompt sequences.

mod beam;
mod ltm;
mod php;

pub use beam::{beam_step, Beam, BeamEntry, BeamStrategy};
pub use ltm::{ltm_prompt, LtmError, LtmState, LtmStrategy};
pub use php::{php_expand, php_next_prompt, php_should_stop, PhpState, PhpStrategy};

use serde::{Deserialize, Serialize};

use crate::engine::Strategy;

/// Declarative strategy selection for configs and the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StrategyConfig {
    Php,
    Ltm { t_decomp: u32 },
    Beam { width: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyConfigError {
    #[error("ltm t_decomp must be at least 1")]
    ZeroDecomp,
    #[error("beam width must be at least 1")]
    ZeroWidth,
}

impl StrategyConfig {
    pub fn build(&self) -> Result<Box<dyn Strategy>, StrategyConfigError> {
        match self {
            StrategyConfig::Php => Ok(Box::new(PhpStrategy::new())),
            StrategyConfig::Ltm { t_decomp } => {
                if *t_decomp == 0 {
                    return Err(StrategyConfigError::ZeroDecomp);
                }
                Ok(Box::new(LtmStrategy::new(*t_decomp)))
            }
            StrategyConfig::Beam { width } => {
                if *width == 0 {
                    return Err(StrategyConfigError::ZeroWidth);
                }
                Ok(Box::new(BeamStrategy::new(*width)))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::Php => "php",
            StrategyConfig::Ltm { .. } => "ltm",
            StrategyConfig::Beam { .. } => "beam",
        }
    }
}
