//! Task ingestion, batch execution, scoring reports and run persistence.

pub mod config;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::engine::{run_episode, Episode, EpisodeConfig};
use crate::score::{regularized_objective, Budget, EvaluationFunction, Objective};
use crate::strategies::StrategyConfig;
use crate::task::Task;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("corpus line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus error: duplicate task id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Load a JSONL corpus: one task per line, UTF-8, unique ids.
pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<Task>, HarnessError> {
    let content = std::fs::read_to_string(path)?;
    parse_tasks(&content)
}

pub fn parse_tasks(content: &str) -> Result<Vec<Task>, HarnessError> {
    let mut tasks = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let task: Task = serde_json::from_str(line).map_err(|e| HarnessError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        task.validate().map_err(|e| HarnessError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(first_line) = seen.insert(task.id.clone(), line_no) {
            return Err(HarnessError::DuplicateId {
                id: task.id,
                first_line,
                second_line: line_no,
            });
        }
        tasks.push(task);
    }
    Ok(tasks)
}

/// One report row per task, in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task_id: String,
    pub strategy: String,
    pub score: Option<f64>,
    pub rounds: u32,
    /// The regularized objective; absent on errored episodes.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Batch results plus exact aggregates. Aggregates are `None` for an empty
/// corpus (undefined, not zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    /// Mean identification score across all rows; errored rows count 0.
    pub accuracy: Option<f64>,
    pub mean_rounds: Option<f64>,
}

impl RunReport {
    pub fn from_rows(rows: Vec<ReportRow>) -> RunReport {
        if rows.is_empty() {
            return RunReport {
                rows,
                accuracy: None,
                mean_rounds: None,
            };
        }
        let n = rows.len() as f64;
        let accuracy = rows.iter().map(|r| r.score.unwrap_or(0.0)).sum::<f64>() / n;
        let mean_rounds = rows.iter().map(|r| f64::from(r.rounds)).sum::<f64>() / n;
        RunReport {
            rows,
            accuracy: Some(accuracy),
            mean_rounds: Some(mean_rounds),
        }
    }
}

/// A finished batch: the report plus every episode record (partial records
/// for errored tasks), in task order.
#[derive(Debug)]
pub struct BatchOutcome {
    pub report: RunReport,
    pub episodes: Vec<Episode>,
}

/// Run one episode per task. Per-task failures are recorded in their row
/// and the batch continues. `jobs` bounds worker threads; rows come back
/// in task order regardless of schedule.
pub fn run_batch(
    tasks: &[Task],
    strategy: &StrategyConfig,
    budget: Budget,
    master_seed: u64,
    backend: &Backend,
    jobs: usize,
) -> Result<BatchOutcome, HarnessError> {
    // surfacing bad strategy parameters before any episode runs
    strategy
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let run_one = |task: &Task| -> (ReportRow, Episode) {
        let built = strategy.build().expect("validated above");
        let config = EpisodeConfig::new(budget, master_seed);
        match run_episode(task, built, config, backend) {
            Ok(episode) => {
                let score = EvaluationFunction::Identification.score(&episode.transcript, task);
                let rounds = episode.transcript.len();
                let objective = match regularized_objective(score, rounds.max(1), budget) {
                    Objective::Finite(v) => Some(v),
                    Objective::Infeasible => None,
                };
                let row = ReportRow {
                    task_id: task.id.clone(),
                    strategy: strategy.name().to_string(),
                    score: Some(score),
                    rounds,
                    objective,
                    error: None,
                };
                (row, episode)
            }
            Err(e) => {
                let rounds = e.episode.transcript.len();
                let row = ReportRow {
                    task_id: task.id.clone(),
                    strategy: strategy.name().to_string(),
                    score: None,
                    rounds,
                    objective: None,
                    error: Some(e.kind.to_string()),
                };
                (row, e.episode)
            }
        }
    };

    let jobs = jobs.clamp(1, tasks.len().max(1));
    let results: Vec<(ReportRow, Episode)> = if jobs == 1 {
        tasks.iter().map(run_one).collect()
    } else {
        let mut slots: Vec<Option<(ReportRow, Episode)>> = Vec::new();
        slots.resize_with(tasks.len(), || None);
        let slots = std::sync::Mutex::new(slots);
        let next = std::sync::atomic::AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if idx >= tasks.len() {
                        break;
                    }
                    let outcome = run_one(&tasks[idx]);
                    slots.lock().unwrap()[idx] = Some(outcome);
                });
            }
        });
        slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|s| s.expect("every slot filled"))
            .collect()
    };

    let (rows, episodes): (Vec<ReportRow>, Vec<Episode>) = results.into_unzip();
    Ok(BatchOutcome {
        report: RunReport::from_rows(rows),
        episodes,
    })
}

trait IntoUnzip<A, B> {
    fn into_unzip(self) -> (Vec<A>, Vec<B>);
}

impl<A, B> IntoUnzip<A, B> for Vec<(A, B)> {
    fn into_unzip(self) -> (Vec<A>, Vec<B>) {
        let mut left = Vec::with_capacity(self.len());
        let mut right = Vec::with_capacity(self.len());
        for (a, b) in self {
            left.push(a);
            right.push(b);
        }
        (left, right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Jsonl,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "jsonl" => Ok(ReportFormat::Jsonl),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "-".to_string(),
    }
}

/// Deterministic rendering of a report.
///
/// Table: a header line, one line per row, and an aggregate footer when
/// rows exist (an empty report renders the header only). JSONL: one line
/// per row followed by one aggregate line.
pub fn emit_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Jsonl => {
            let mut out = String::new();
            for row in &report.rows {
                out.push_str(&serde_json::to_string(row).unwrap());
                out.push('\n');
            }
            let aggregate = serde_json::json!({
                "accuracy": report.accuracy,
                "mean_rounds": report.mean_rounds,
            });
            out.push_str(&aggregate.to_string());
            out.push('\n');
            out
        }
        ReportFormat::Table => {
            let mut out = String::new();
            let header = ["task_id", "strategy", "score", "rounds", "objective", "error"];
            let mut table: Vec<[String; 6]> = Vec::with_capacity(report.rows.len());
            for row in &report.rows {
                table.push([
                    row.task_id.clone(),
                    row.strategy.clone(),
                    fmt_opt(row.score),
                    row.rounds.to_string(),
                    fmt_opt(row.objective),
                    row.error.clone().unwrap_or_else(|| "-".to_string()),
                ]);
            }
            let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for row in &table {
                for (i, cell) in row.iter().enumerate() {
                    widths[i] = widths[i].max(cell.len());
                }
            }
            let render = |cells: &[String]| -> String {
                cells
                    .iter()
                    .enumerate()
                    .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            let header_cells: Vec<String> = header.iter().map(|s| s.to_string()).collect();
            out.push_str(&render(&header_cells));
            out.push('\n');
            for row in &table {
                out.push_str(&render(row));
                out.push('\n');
            }
            if !report.rows.is_empty() {
                out.push_str(&format!(
                    "accuracy: {}  mean_rounds: {}\n",
                    fmt_opt(report.accuracy),
                    fmt_opt(report.mean_rounds)
                ));
            }
            out
        }
    }
}

/// Parse a persisted report back from its JSONL rendering.
pub fn parse_report_jsonl(content: &str) -> Result<RunReport, HarnessError> {
    let mut rows = Vec::new();
    let mut lines = content.lines().filter(|l| !l.trim().is_empty()).peekable();
    while let Some(line) = lines.next() {
        if lines.peek().is_none() {
            // aggregate line: recomputed below
            let _: serde_json::Value = serde_json::from_str(line).map_err(|e| {
                HarnessError::Parse {
                    line: 0,
                    message: e.to_string(),
                }
            })?;
            break;
        }
        rows.push(
            serde_json::from_str(line).map_err(|e| HarnessError::Parse {
                line: 0,
                message: e.to_string(),
            })?,
        );
    }
    Ok(RunReport::from_rows(rows))
}

/// Write transcripts and the report under `out_dir`:
/// `transcripts/<task_id>.jsonl` per task plus `report.jsonl`.
pub fn persist_run(
    out_dir: impl AsRef<Path>,
    outcome: &BatchOutcome,
) -> Result<(), HarnessError> {
    let out_dir = out_dir.as_ref();
    let transcripts = out_dir.join("transcripts");
    std::fs::create_dir_all(&transcripts)?;
    for episode in &outcome.episodes {
        let path = transcripts.join(format!("{}.jsonl", episode.transcript.task_id));
        let mut file = std::fs::File::create(path)?;
        file.write_all(episode.transcript.to_jsonl().as_bytes())?;
    }
    let mut report = std::fs::File::create(out_dir.join("report.jsonl"))?;
    report.write_all(emit_report(&outcome.report, ReportFormat::Jsonl).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_parses_to_nothing() {
        assert!(parse_tasks("").unwrap().is_empty());
        assert!(parse_tasks("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn one_line_one_task() {
        let tasks =
            parse_tasks(r#"{"id":"t1","question":"2+2?","answer_kind":"numeric"}"#).unwrap();
        assert_eq!(tasks.len(), 1);
        assert_eq!(tasks[0].id, "t1");
    }

    #[test]
    fn malformed_line_names_its_line_number() {
        let content = "{\"id\":\"a\",\"question\":\"q\",\"answer_kind\":\"numeric\"}\nnot json\n";
        match parse_tasks(content) {
            Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_name_both_lines() {
        let line = r#"{"id":"dup","question":"q","answer_kind":"numeric"}"#;
        let content = format!("{line}\n{line}\n");
        match parse_tasks(&content) {
            Err(HarnessError::DuplicateId {
                id,
                first_line,
                second_line,
            }) => {
                assert_eq!(id, "dup");
                assert_eq!((first_line, second_line), (1, 2));
            }
            other => panic!("expected duplicate-id error, got {other:?}"),
        }
    }

    #[test]
    fn empty_report_renders_header_only() {
        let report = RunReport::from_rows(Vec::new());
        let table = emit_report(&report, ReportFormat::Table);
        assert_eq!(table.lines().count(), 1);
        assert!(table.starts_with("task_id"));
        assert_eq!(report.accuracy, None);
        assert_eq!(report.mean_rounds, None);
    }

    #[test]
    fn one_row_renders_one_data_line() {
        let report = RunReport::from_rows(vec![ReportRow {
            task_id: "t1".into(),
            strategy: "php".into(),
            score: Some(1.0),
            rounds: 2,
            objective: Some(1.0),
            error: None,
        }]);
        let table = emit_report(&report, ReportFormat::Table);
        assert_eq!(table.lines().count(), 3); // header + row + aggregates
        let jsonl = emit_report(&report, ReportFormat::Jsonl);
        assert_eq!(jsonl.lines().count(), 2); // row + aggregate
        let parsed = parse_report_jsonl(&jsonl).unwrap();
        assert_eq!(parsed, report);
    }
}
