//! `metrics.csv`: one row per evaluation, appended as training proceeds.
//!
//! | column | meaning |
//! |---|---|
//! | `seed` | run seed |
//! | `iteration` | training iterations completed |
//! | `steps` | environment steps completed |
//! | `eval_return` | mean environment return of evaluation episodes |
//! | `satisfaction_rate` | fraction of evaluation steps whose true next state satisfies the formula |
//! | `violations` | evaluation steps violating the formula |
//! | `eval_episodes` | evaluation episodes completed |
//! | `goal_fraction` | completed evaluation episodes ending on a target (grid only) |
//! | `train_return` | mean environment return of training episodes finished this iteration |
//! | `constraint_reward_rate` | fraction of training steps earning the constraint reward |
//! | `disagreement_rate` | fraction of training steps where predicted and true verdicts differ |
//! | `forward_loss`, `policy_loss`, `value_loss`, `entropy` | losses of the last update |
//!
//! Empty cells mean "not defined for this row".

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use system3::trainer::{EvalReport, IterationMetrics};

use crate::HarnessError;

pub const HEADER: &str = "seed,iteration,steps,eval_return,satisfaction_rate,violations,eval_episodes,goal_fraction,\
train_return,constraint_reward_rate,disagreement_rate,forward_loss,policy_loss,value_loss,entropy";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub iteration: u64,
    pub steps: u64,
    pub eval: EvalReport,
    /// Whether a goal formula was scored.
    pub has_goal: bool,
    pub train: Option<IterationMetrics>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let e = &self.eval;
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.iteration,
            self.steps,
            e.mean_return,
            e.satisfaction_rate,
            e.violations,
            e.episodes,
            opt(self.has_goal.then(|| e.goal_fraction())),
        );
        match &self.train {
            Some(t) => {
                let _ = write!(
                    s,
                    ",{},{},{},{},{},{},{}",
                    opt(t.mean_episode_return),
                    t.constraint_reward_rate,
                    t.disagreement_rate,
                    t.forward_loss,
                    t.policy_loss,
                    t.value_loss,
                    t.entropy
                );
            }
            None => s.push_str(",,,,,,,"),
        }
        s
    }
}

/// Appends rows to a CSV file, writing the header when the file is new.
pub fn append_rows(path: &Path, header: &str, rows: &[String]) -> Result<(), HarnessError> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| HarnessError::io(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(header);
        text.push('\n');
    }
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

/// Numeric columns of a CSV file. Rows with the wrong field count or an
/// unparsable requested cell are skipped and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    /// `rows[i][j]` is column `columns[j]`; `None` for empty cells.
    pub rows: Vec<Vec<Option<f64>>>,
    pub skipped: usize,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| HarnessError::Config("empty metrics file".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let mut rows = Vec::new();
        let mut skipped = 0;
        'rows: for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != columns.len() {
                skipped += 1;
                continue;
            }
            let mut row = Vec::with_capacity(cells.len());
            for c in cells {
                let c = c.trim();
                if c.is_empty() {
                    row.push(None);
                } else {
                    match c.parse::<f64>() {
                        Ok(v) => row.push(Some(v)),
                        Err(_) => {
                            skipped += 1;
                            continue 'rows;
                        }
                    }
                }
            }
            rows.push(row);
        }
        Ok(Table { columns, rows, skipped })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// `(x, y)` pairs where both cells are present.
    pub fn series(&self, x: &str, y: &str) -> Option<Vec<(f64, f64)>> {
        let (xi, yi) = (self.column_index(x)?, self.column_index(y)?);
        Some(
            self.rows
                .iter()
                .filter_map(|r| Some((r[xi]?, r[yi]?)))
                .collect(),
        )
    }
}
