//! Experiment orchestration and the checkpoint-based verbs.
//!
//! A run directory looks like
//!
//! ```text
//! <out>/config.txt            resolved settings; reloadable with --config
//! <out>/constraint.fl         copies of the inputs the snapshot refers to
//! <out>/eval_constraint.fl
//! <out>/layout.map
//! <out>/seed-<n>/metrics.csv
//! <out>/seed-<n>/checkpoints/step-<steps>.ckpt
//! ```

use std::path::{Path, PathBuf};

use system3::dsl::{parse, to_text, BoundFormula};
use system3::env::{EnvKind, EnvSpec};
use system3::trainer::{bind_constraint, evaluate_policy, read_bundle, Selection, TrainError, Trainer};

use crate::config::{read_constraint, RunConfig, Settings};
use crate::metrics::{append_rows, MetricsRow, HEADER};
use crate::HarnessError;

/// Goal test for grid evaluations: the agent stands on a target cell.
pub const GOAL_FORMULA: &str = "exists g in target: norm1(s - g) <= 0";

pub const VERSION_TAG: &str = concat!("system3 ", env!("CARGO_PKG_VERSION"));

fn from_train(e: TrainError) -> HarnessError {
    match e {
        TrainError::Config(_) | TrainError::Constraint(_) => HarnessError::Config(e.to_string()),
        other => HarnessError::Runtime(other.to_string()),
    }
}

fn bind(src: &str, spec: &EnvSpec, what: &str) -> Result<BoundFormula, HarnessError> {
    bind_constraint(src, &spec.build_base(0)).map_err(|e| HarnessError::Config(format!("{what}: {e}")))
}

fn goal_for(spec: &EnvSpec) -> Result<Option<BoundFormula>, HarnessError> {
    match spec.kind {
        EnvKind::Grid { .. } => bind(GOAL_FORMULA, spec, "goal formula").map(Some),
        EnvKind::CartPole => Ok(None),
    }
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

/// Everything one seed needs, resolved once up front.
struct Plan<'a> {
    config: &'a RunConfig,
    spec: EnvSpec,
    constraint: Option<String>,
    eval_formula: Option<BoundFormula>,
    goal: Option<BoundFormula>,
}

/// Trains every seed, evaluating and checkpointing every `eval_every`
/// steps (at the first iteration boundary at or past each multiple, plus
/// once at the end). Returns the last metrics row of each seed.
pub fn run_train(
    config: &RunConfig,
    overwrite: bool,
    progress: &(dyn Fn(&MetricsRow) + Sync),
) -> Result<Vec<MetricsRow>, HarnessError> {
    let spec = config.env_spec()?;
    let constraint = config.constraint_source()?;
    let eval_src = config.eval_constraint_source()?;
    if let Some(src) = &constraint {
        bind(src, &spec, "constraint")?;
    }
    let eval_formula = eval_src.as_deref().map(|s| bind(s, &spec, "eval_constraint")).transpose()?;
    let goal = goal_for(&spec)?;

    for &seed in &config.seeds {
        let dir = seed_dir(&config.out, seed);
        if dir.join("metrics.csv").exists() {
            if !overwrite {
                return Err(HarnessError::Config(format!(
                    "{} already holds results; pass --overwrite to replace them",
                    dir.display()
                )));
            }
            std::fs::remove_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        }
    }
    create_dir(&config.out)?;
    write_snapshot(config, constraint.as_deref(), eval_src.as_deref())?;

    let plan = Plan {
        config,
        spec,
        constraint,
        eval_formula,
        goal,
    };
    if config.parallel_seeds && config.seeds.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = config
                .seeds
                .iter()
                .map(|&seed| {
                    let plan = &plan;
                    scope.spawn(move || train_seed(plan, seed, progress))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(HarnessError::Runtime("seed worker panicked".into()))))
                .collect()
        })
    } else {
        config.seeds.iter().map(|&seed| train_seed(&plan, seed, progress)).collect()
    }
}

fn write_snapshot(config: &RunConfig, constraint: Option<&str>, eval_src: Option<&str>) -> Result<(), HarnessError> {
    let out = &config.out;
    let mut snap = config.clone();
    snap.out = PathBuf::from(".");
    if let Some(src) = constraint {
        write(&out.join("constraint.fl"), src)?;
        snap.constraint = Some(PathBuf::from("constraint.fl"));
    }
    if let Some(src) = eval_src {
        write(&out.join("eval_constraint.fl"), src)?;
        snap.eval_constraint = Some(PathBuf::from("eval_constraint.fl"));
    }
    if let Some(layout) = &config.layout {
        let text = std::fs::read_to_string(layout).map_err(|e| HarnessError::io(layout, e))?;
        write(&out.join("layout.map"), &text)?;
        snap.layout = Some(PathBuf::from("layout.map"));
    }
    write(&out.join("config.txt"), &format!("# {VERSION_TAG}\n{}", snap.to_text()))
}

fn train_seed(plan: &Plan, seed: u64, progress: &(dyn Fn(&MetricsRow) + Sync)) -> Result<MetricsRow, HarnessError> {
    let config = plan.config;
    let dir = seed_dir(&config.out, seed);
    let ckpt_dir = dir.join("checkpoints");
    create_dir(&ckpt_dir)?;
    let metrics = dir.join("metrics.csv");
    append_rows(&metrics, HEADER, &[])?;

    let mut trainer =
        Trainer::new(config.system.clone(), plan.spec.clone(), plan.constraint.as_deref(), seed).map_err(from_train)?;
    let mut next_eval = config.eval_every;
    let mut saved: Vec<PathBuf> = Vec::new();
    let mut last = None;
    while !trainer.is_finished() {
        let m = trainer.train_iteration().map_err(from_train)?;
        let steps = trainer.steps();
        if steps < next_eval && !trainer.is_finished() {
            continue;
        }
        while next_eval <= steps {
            next_eval += config.eval_every;
        }
        let ckpt = ckpt_dir.join(format!("step-{steps:010}.ckpt"));
        write(&ckpt, &trainer.save())?;
        saved.push(ckpt);
        if config.keep_checkpoints > 0 && saved.len() > config.keep_checkpoints {
            let old = saved.remove(0);
            std::fs::remove_file(&old).map_err(|e| HarnessError::io(&old, e))?;
        }
        let eval = trainer
            .evaluate(plan.eval_formula.as_ref(), plan.goal.as_ref(), config.eval_horizon)
            .map_err(from_train)?;
        let row = MetricsRow {
            seed,
            iteration: trainer.iteration(),
            steps,
            eval,
            has_goal: plan.goal.is_some(),
            train: Some(m),
        };
        append_rows(&metrics, HEADER, &[row.to_csv()])?;
        progress(&row);
        last = Some(row);
    }
    last.ok_or_else(|| HarnessError::Config("total_steps must be at least 1".into()))
}

/// Run settings saved next to a checkpoint (`<out>/seed-N/checkpoints/x`).
fn run_snapshot(checkpoint: &Path) -> Option<RunConfig> {
    let path = checkpoint.parent()?.parent()?.parent()?.join("config.txt");
    let settings = Settings::load(&path).ok()?;
    RunConfig::from_settings(&settings).ok()
}

/// Greedy evaluation of a checkpoint on the evaluation environment it was
/// trained with. The formula is `constraint` if given, else the run's
/// evaluation formula, else the training formula.
pub fn run_eval(checkpoint: &Path, constraint: Option<&Path>, horizon: usize) -> Result<MetricsRow, HarnessError> {
    if horizon == 0 {
        return Err(HarnessError::Config("`eval_horizon` must be at least 1".into()));
    }
    let text = std::fs::read_to_string(checkpoint).map_err(|e| HarnessError::io(checkpoint, e))?;
    let bundle = read_bundle(&text).map_err(|e| HarnessError::Runtime(format!("{}: {e}", checkpoint.display())))?;
    let src = match constraint {
        Some(path) => Some(read_constraint(path)?),
        None => match run_snapshot(checkpoint) {
            Some(cfg) => cfg.eval_constraint_source()?,
            None => bundle.constraint.clone(),
        },
    };
    let formula = src.as_deref().map(|s| bind(s, &bundle.env_spec, "constraint")).transpose()?;
    let goal = goal_for(&bundle.env_spec)?;
    let mut env = bundle.env_spec.build_base(bundle.eval_seed);
    let eval = evaluate_policy(&bundle.model, &mut env, formula.as_ref(), goal.as_ref(), horizon, Selection::Greedy)
        .map_err(from_train)?;
    Ok(MetricsRow {
        seed: bundle.seed,
        iteration: bundle.iteration,
        steps: bundle.steps,
        eval,
        has_goal: goal.is_some(),
        train: None,
    })
}

/// `V(s)` at every cell of a grid checkpoint, indexed `[y][x]`.
pub fn value_grid(checkpoint: &Path) -> Result<Vec<Vec<f64>>, HarnessError> {
    let text = std::fs::read_to_string(checkpoint).map_err(|e| HarnessError::io(checkpoint, e))?;
    let bundle = read_bundle(&text).map_err(|e| HarnessError::Runtime(format!("{}: {e}", checkpoint.display())))?;
    let EnvKind::Grid { layout, .. } = &bundle.env_spec.kind else {
        return Err(HarnessError::Config(format!(
            "{} is a {} checkpoint; value-grid needs a grid checkpoint",
            checkpoint.display(),
            bundle.env_spec.name()
        )));
    };
    (0..layout.height())
        .map(|y| {
            (0..layout.width())
                .map(|x| {
                    bundle
                        .model
                        .value(&[x as f64, y as f64])
                        .map_err(|e| HarnessError::Runtime(e.to_string()))
                })
                .collect()
        })
        .collect()
}

/// CSV with header `y,x0,x1,...`; one row per grid row, `y` ascending.
pub fn value_grid_csv(values: &[Vec<f64>]) -> String {
    let w = values.first().map_or(0, Vec::len);
    let mut s = String::from("y");
    for x in 0..w {
        s.push_str(&format!(",x{x}"));
    }
    s.push('\n');
    for (y, row) in values.iter().enumerate() {
        s.push_str(&y.to_string());
        for v in row {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    s
}

pub fn parse_value_grid_csv(text: &str) -> Result<Vec<Vec<f64>>, HarnessError> {
    let bad = |line: usize| HarnessError::Config(format!("value grid line {line}: malformed"));
    let mut lines = text.lines();
    let width = lines.next().ok_or_else(|| bad(1))?.split(',').count() - 1;
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != width + 1 || cells[0] != i.to_string() {
                return Err(bad(i + 2));
            }
            cells[1..].iter().map(|c| c.parse().map_err(|_| bad(i + 2))).collect()
        })
        .collect()
}

/// Parses and binds a constraint file against the configured environment;
/// returns the formula in canonical text form.
pub fn check_constraint(path: &Path, config: &RunConfig) -> Result<String, HarnessError> {
    let src = read_constraint(path)?;
    let spec = config.env_spec()?;
    let located = |e: &dyn std::fmt::Display| HarnessError::Config(format!("{}: {e}", path.display()));
    bind_constraint(&src, &spec.build_base(0)).map_err(|e| located(&e))?;
    let formula = parse(&src).map_err(|e| located(&e))?;
    Ok(to_text(&formula))
}
