//! Pool-based black-box prompt search: sample N prompts, score them,
//! discard the worst M, resample, iterate.
//!
//! The sampler realizes the prior over proposed prompts — either a finite
//! weighted support or a backend that proposes one prompt per seeded call.
//! Elitism is structural: whenever M < N the survivors include the best
//! member, so the per-pool maximum never decreases.

use std::sync::Arc;

use crate::backend::{Backend, BackendError, GenParams, GenerationRequest};
use crate::seed::derive_seed;
use crate::text::Text;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("search contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// The prior over proposed prompts.
#[derive(Clone)]
pub enum PromptSampler {
    /// Finite weighted support; draws are with replacement.
    Finite { support: Vec<(Text, f64)> },
    /// One proposal per generate call, keyed by the draw seed.
    BackendProposal {
        meta_prompt: Text,
        backend: Arc<Backend>,
        params: GenParams,
    },
}

impl PromptSampler {
    pub fn finite(support: Vec<(Text, f64)>) -> Result<PromptSampler, SearchError> {
        if support.is_empty() {
            return Err(SearchError::Contract("finite sampler needs support".into()));
        }
        if support.iter().any(|(_, w)| !(*w > 0.0)) {
            return Err(SearchError::Contract(
                "finite sampler weights must be positive".into(),
            ));
        }
        Ok(PromptSampler::Finite { support })
    }

    pub fn finite_uniform(prompts: Vec<Text>) -> Result<PromptSampler, SearchError> {
        Self::finite(prompts.into_iter().map(|p| (p, 1.0)).collect())
    }

    /// The default meta-prompt wraps the task text the way an instruction
    /// proposer would see it.
    pub fn backend_proposal(task_text: &Text, backend: Arc<Backend>) -> PromptSampler {
        PromptSampler::BackendProposal {
            meta_prompt: Text::new(format!(
                "Propose an instruction that would make a model solve: {task_text}"
            )),
            backend,
            params: GenParams::default(),
        }
    }

    pub fn draw(&self, seed: u64) -> Result<Text, SearchError> {
        match self {
            PromptSampler::Finite { support } => {
                let weights: Vec<f64> = support.iter().map(|(_, w)| *w).collect();
                let idx = crate::seed::weighted_index(seed, &weights);
                Ok(support[idx].0.clone())
            }
            PromptSampler::BackendProposal {
                meta_prompt,
                backend,
                params,
            } => {
                let request = GenerationRequest {
                    prompt: meta_prompt.clone(),
                    seed,
                    params: *params,
                };
                Ok(backend.generate(&request)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolMember {
    pub prompt: Text,
    pub score: Option<f64>,
}

/// The sub-candidate set under optimization. Size is exactly N after init
/// and after every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub members: Vec<PoolMember>,
}

impl Pool {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Highest-scoring member (earliest position wins ties). None until
    /// scored.
    pub fn best(&self) -> Option<(&Text, f64)> {
        let mut best: Option<(&Text, f64)> = None;
        for member in &self.members {
            let Some(score) = member.score else { continue };
            match best {
                Some((_, s)) if score <= s => {}
                _ => best = Some((&member.prompt, score)),
            }
        }
        best
    }

    /// Order-insensitive digest of the member prompts (FNV-1a over the
    /// sorted prompt list), for compact trace lines.
    pub fn digest(&self) -> String {
        let mut prompts: Vec<&str> = self.members.iter().map(|m| m.prompt.as_str()).collect();
        prompts.sort_unstable();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in prompts {
            for b in p.as_bytes() {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Scores one candidate prompt. Implemented by closures.
pub trait PromptEvaluator {
    fn score(&mut self, prompt: &Text) -> Result<f64, SearchError>;
}

impl<F> PromptEvaluator for F
where
    F: FnMut(&Text) -> Result<f64, SearchError>,
{
    fn score(&mut self, prompt: &Text) -> Result<f64, SearchError> {
        self(prompt)
    }
}

/// Draw the initial pool: N independent draws seeded by
/// `derive_seed(master, 0..N-1)`, scores unset.
pub fn ape_init(sampler: &PromptSampler, n: usize, master_seed: u64) -> Result<Pool, SearchError> {
    if n == 0 {
        return Err(SearchError::Contract("pool capacity N must be >= 1".into()));
    }
    let mut members = Vec::with_capacity(n);
    for k in 0..n {
        let prompt = sampler.draw(derive_seed(master_seed, k as u64))?;
        members.push(PoolMember {
            prompt,
            score: None,
        });
    }
    Ok(Pool { members })
}

/// One search step: keep the N-M highest-scoring members (ties keep the
/// earlier pool position), then draw and score M fresh prompts with seeds
/// derived from (master, iteration_index, slot).
pub fn ape_step(
    pool: &Pool,
    evaluator: &mut dyn PromptEvaluator,
    m: usize,
    sampler: &PromptSampler,
    master_seed: u64,
    iteration_index: u64,
) -> Result<Pool, SearchError> {
    let n = pool.len();
    if m > n {
        return Err(SearchError::Contract(format!(
            "cannot discard {m} members from a pool of {n}"
        )));
    }
    if pool.members.iter().any(|mm| mm.score.is_none()) {
        return Err(SearchError::Contract(
            "ape_step requires every member to be scored".into(),
        ));
    }

    // Stable sort indices by score descending; survivors keep pool order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        pool.members[b]
            .score
            .partial_cmp(&pool.members[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut keep = vec![false; n];
    for &idx in order.iter().take(n - m) {
        keep[idx] = true;
    }
    let mut members: Vec<PoolMember> = pool
        .members
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, mm)| mm.clone())
        .collect();

    let lane = derive_seed(master_seed, iteration_index);
    for slot in 0..m {
        let prompt = sampler.draw(derive_seed(lane, slot as u64))?;
        let score = evaluator.score(&prompt)?;
        members.push(PoolMember {
            prompt,
            score: Some(score),
        });
    }
    Ok(Pool { members })
}

/// When to stop iterating: a hard cap plus a patience window on the
/// best-ever score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub max_iterations: u32,
    /// Stop after this many consecutive iterations without improvement.
    pub patience: u32,
}

/// One trace line per iteration: the pool's best at that point.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationTrace {
    pub iteration: u32,
    pub best_score: f64,
    pub best_prompt: Text,
    pub pool_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApeResult {
    pub best_prompt: Text,
    pub best_score: f64,
    pub trace: Vec<IterationTrace>,
}

/// The full loop: init, score, then step until the stop rule fires.
/// The best-ever score in the result is non-decreasing across iterations
/// by construction.
pub fn ape_run(
    sampler: &PromptSampler,
    evaluator: &mut dyn PromptEvaluator,
    n: usize,
    m: usize,
    stop: StopRule,
    master_seed: u64,
) -> Result<ApeResult, SearchError> {
    if m > n {
        return Err(SearchError::Contract(format!(
            "cannot discard {m} members from a pool of {n}"
        )));
    }
    let mut pool = ape_init(sampler, n, master_seed)?;
    for member in &mut pool.members {
        member.score = Some(evaluator.score(&member.prompt)?);
    }

    let mut trace = Vec::new();
    let record = |pool: &Pool, iteration: u32, trace: &mut Vec<IterationTrace>| {
        let (prompt, score) = pool.best().expect("scored pool has a best member");
        trace.push(IterationTrace {
            iteration,
            best_score: score,
            best_prompt: prompt.clone(),
            pool_digest: pool.digest(),
        });
    };

    let mut iteration = 1u32;
    record(&pool, iteration, &mut trace);
    let (p, s) = pool.best().expect("scored pool has a best member");
    let mut best_prompt = p.clone();
    let mut best_score = s;
    let mut unimproved = 0u32;

    while iteration < stop.max_iterations && unimproved < stop.patience {
        pool = ape_step(&pool, evaluator, m, sampler, master_seed, u64::from(iteration))?;
        iteration += 1;
        record(&pool, iteration, &mut trace);
        let (p, s) = pool.best().expect("scored pool has a best member");
        if s > best_score {
            best_score = s;
            best_prompt = p.clone();
            unimproved = 0;
        } else {
            unimproved += 1;
        }
    }

    Ok(ApeResult {
        best_prompt,
        best_score,
        trace,
    })
}
