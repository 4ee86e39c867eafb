//! Response ensembles: fan the same task out over M1 prompt variants and
//! M2 seeded replicas each, then combine the answers.
//!
//! Cell (i, j) always uses seed `derive_seed(master, i * M2 + j)`, so the
//! matrix is identical whether cells are generated sequentially or
//! concurrently. Combiners are pure functions over the completed matrix
//! and invariant under any permutation of its cells.

use std::collections::HashMap;
use std::sync::Arc;

use crate::answer::{extract_answer, CanonicalAnswer};
use crate::backend::{Backend, BackendError, GenParams, GenerationRequest};
use crate::seed::derive_seed;
use crate::task::Task;
use crate::text::Text;

/// Pluggable combiner signature.
pub type CustomCombiner = Arc<dyn Fn(&ResponseMatrix) -> Option<CanonicalAnswer> + Send + Sync>;

/// The ensemble function En(.) applied to the response set.
#[derive(Clone)]
pub enum Combiner {
    /// Mode of the extracted answers; ties go to the canonical minimum.
    Majority,
    /// Majority restricted to responses with at least this many non-empty
    /// lines; falls back to plain majority when nothing qualifies.
    ComplexityThreshold(u32),
    Custom(CustomCombiner),
}

impl std::fmt::Debug for Combiner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Combiner::Majority => f.write_str("Majority"),
            Combiner::ComplexityThreshold(k) => write!(f, "ComplexityThreshold({k})"),
            Combiner::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Combiner {
    pub fn label(&self) -> String {
        match self {
            Combiner::Majority => "majority".into(),
            Combiner::ComplexityThreshold(k) => format!("complexity_threshold({k})"),
            Combiner::Custom(_) => "custom".into(),
        }
    }
}

/// M1 prompt variants, M2 replicas each, and the combiner to apply.
#[derive(Debug, Clone)]
pub struct EnsemblePlan {
    pub variants: Vec<Text>,
    pub replicas: u32,
    pub combiner: Combiner,
    pub params: GenParams,
}

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("ensemble contract violation: {0}")]
    Contract(String),
    #[error("cell (variant {variant}, replica {replica}) failed: {source}")]
    Cell {
        variant: usize,
        replica: usize,
        source: BackendError,
        /// Cells completed before the failure, for diagnostics.
        completed: usize,
    },
}

impl EnsemblePlan {
    pub fn new(
        variants: Vec<Text>,
        replicas: u32,
        combiner: Combiner,
    ) -> Result<EnsemblePlan, EnsembleError> {
        if variants.is_empty() {
            return Err(EnsembleError::Contract("need at least one variant".into()));
        }
        if replicas == 0 {
            return Err(EnsembleError::Contract("need at least one replica".into()));
        }
        Ok(EnsemblePlan {
            variants,
            replicas,
            combiner,
            params: GenParams::default(),
        })
    }
}

/// One generated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub variant: usize,
    pub replica: usize,
    pub response: Text,
    pub seed: u64,
    pub extracted: Option<CanonicalAnswer>,
}

/// All M1 x M2 cells, row-major by variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    pub variants: usize,
    pub replicas: usize,
    cells: Vec<Cell>,
}

impl ResponseMatrix {
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, variant: usize, replica: usize) -> &Cell {
        &self.cells[variant * self.replicas + replica]
    }

    /// Test-only constructor for synthetic matrices.
    pub fn from_cells(variants: usize, replicas: usize, cells: Vec<Cell>) -> ResponseMatrix {
        assert_eq!(cells.len(), variants * replicas);
        ResponseMatrix {
            variants,
            replicas,
            cells,
        }
    }
}

fn fill_cell(
    plan: &EnsemblePlan,
    task: &Task,
    backend: &Backend,
    master_seed: u64,
    variant: usize,
    replica: usize,
) -> Result<Cell, BackendError> {
    let seed = derive_seed(master_seed, (variant * plan.replicas as usize + replica) as u64);
    let request = GenerationRequest {
        prompt: plan.variants[variant].clone(),
        seed,
        params: plan.params,
    };
    let response = backend.generate(&request)?;
    let extracted = extract_answer(&response, task.answer_kind);
    Ok(Cell {
        variant,
        replica,
        response,
        seed,
        extracted,
    })
}

/// Generate the full matrix sequentially.
pub fn run_ensemble(
    plan: &EnsemblePlan,
    task: &Task,
    backend: &Backend,
    master_seed: u64,
) -> Result<ResponseMatrix, EnsembleError> {
    let mut cells = Vec::with_capacity(plan.variants.len() * plan.replicas as usize);
    for variant in 0..plan.variants.len() {
        for replica in 0..plan.replicas as usize {
            let cell = fill_cell(plan, task, backend, master_seed, variant, replica).map_err(
                |source| EnsembleError::Cell {
                    variant,
                    replica,
                    source,
                    completed: cells.len(),
                },
            )?;
            cells.push(cell);
        }
    }
    Ok(ResponseMatrix {
        variants: plan.variants.len(),
        replicas: plan.replicas as usize,
        cells,
    })
}

/// Generate the matrix with up to `jobs` worker threads. Cells are keyed by
/// index, so the result is bit-identical to the sequential path.
pub fn run_ensemble_with_jobs(
    plan: &EnsemblePlan,
    task: &Task,
    backend: &Backend,
    master_seed: u64,
    jobs: usize,
) -> Result<ResponseMatrix, EnsembleError> {
    let total = plan.variants.len() * plan.replicas as usize;
    let jobs = jobs.clamp(1, total.max(1));
    if jobs == 1 {
        return run_ensemble(plan, task, backend, master_seed);
    }
    let mut slots: Vec<Option<Result<Cell, EnsembleError>>> = Vec::new();
    slots.resize_with(total, || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if idx >= total {
                    break;
                }
                let variant = idx / plan.replicas as usize;
                let replica = idx % plan.replicas as usize;
                let outcome = fill_cell(plan, task, backend, master_seed, variant, replica)
                    .map_err(|source| EnsembleError::Cell {
                        variant,
                        replica,
                        source,
                        completed: 0,
                    });
                slots.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });
    let slots = slots.into_inner().unwrap();
    let mut cells = Vec::with_capacity(total);
    let mut completed = 0usize;
    let mut failure: Option<EnsembleError> = None;
    for slot in slots {
        match slot {
            Some(Ok(cell)) => {
                completed += 1;
                cells.push(cell);
            }
            Some(Err(e)) if failure.is_none() => failure = Some(e),
            _ => {}
        }
    }
    if let Some(mut e) = failure {
        if let EnsembleError::Cell {
            completed: ref mut c,
            ..
        } = e
        {
            *c = completed;
        }
        return Err(e);
    }
    Ok(ResponseMatrix {
        variants: plan.variants.len(),
        replicas: plan.replicas as usize,
        cells,
    })
}

/// Mode of the present extracted answers. Ties break to the canonical
/// minimum; a matrix with no extractable answers yields `None`.
pub fn combine_majority(matrix: &ResponseMatrix) -> Option<CanonicalAnswer> {
    majority_of(matrix.cells().iter())
}

fn majority_of<'a>(cells: impl Iterator<Item = &'a Cell>) -> Option<CanonicalAnswer> {
    let mut counts: HashMap<&CanonicalAnswer, usize> = HashMap::new();
    for cell in cells {
        if let Some(answer) = &cell.extracted {
            *counts.entry(answer).or_insert(0) += 1;
        }
    }
    let mut best: Option<(&CanonicalAnswer, usize)> = None;
    for (answer, count) in counts {
        best = Some(match best {
            None => (answer, count),
            Some((b_ans, b_count)) => {
                if count > b_count
                    || (count == b_count
                        && answer.canonical_cmp(b_ans) == std::cmp::Ordering::Less)
                {
                    (answer, count)
                } else {
                    (b_ans, b_count)
                }
            }
        });
    }
    best.map(|(answer, _)| answer.clone())
}

/// Non-empty line count: the pinned complexity proxy.
pub fn response_complexity(response: &Text) -> u32 {
    response
        .as_str()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count() as u32
}

/// Majority vote over cells whose response complexity is at least `k`;
/// plain majority over everything when no cell qualifies.
pub fn combine_complexity_filtered(matrix: &ResponseMatrix, k: u32) -> Option<CanonicalAnswer> {
    let qualified: Vec<&Cell> = matrix
        .cells()
        .iter()
        .filter(|c| response_complexity(&c.response) >= k)
        .collect();
    if qualified.is_empty() {
        return combine_majority(matrix);
    }
    majority_of(qualified.into_iter())
}

/// Apply the plan's combiner.
pub fn combine(combiner: &Combiner, matrix: &ResponseMatrix) -> Option<CanonicalAnswer> {
    match combiner {
        Combiner::Majority => combine_majority(matrix),
        Combiner::ComplexityThreshold(k) => combine_complexity_filtered(matrix, *k),
        Combiner::Custom(f) => f(matrix),
    }
}

/// Probability that a majority of K independent p-Bernoulli draws is
/// correct: the analytic reference for majority-vote accuracy.
pub fn binomial_majority_accuracy(p: f64, k: u32) -> Result<f64, EnsembleError> {
    if k % 2 == 0 || k == 0 {
        return Err(EnsembleError::Contract(
            "majority accuracy is defined for odd K".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(EnsembleError::Contract("p must lie in [0, 1]".into()));
    }
    let k = k as i32;
    let mut total = 0.0f64;
    // C(k, j) accumulated multiplicatively; exact in f64 for the K used here.
    let mut binom = 1.0f64;
    for j in 0..=k {
        if j > k / 2 {
            total += binom * p.powi(j) * (1.0 - p).powi(k - j);
        }
        binom = binom * f64::from(k - j) / f64::from(j + 1);
    }
    Ok(total.min(1.0))
}
