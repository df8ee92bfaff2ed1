//! Learning curves from `metrics.csv` files: trailing rolling means per seed,
//! then the mean and min-max band across seeds of each labelled group.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::metrics::Table;
use crate::svg::{band_chart, BandSeries};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlotOptions {
    /// Smoothing window for returns.
    pub return_window: usize,
    /// Smoothing window for violations and the remaining metrics.
    pub violation_window: usize,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            return_window: 20,
            violation_window: 10,
        }
    }
}

/// Trailing mean over the last `window` values (fewer at the start).
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let slice = &values[(i + 1).saturating_sub(window)..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Mean, min and max across seeds at each step, over the steps all seeds
/// reached.
pub fn across_seeds(seeds: &[Vec<(f64, f64)>]) -> Vec<(f64, f64, f64, f64)> {
    let Some(len) = seeds.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    (0..len)
        .map(|i| {
            let ys: Vec<f64> = seeds.iter().map(|s| s[i].1).collect();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (seeds[0][i].0, mean, lo, hi)
        })
        .collect()
}

/// Label for a metrics file: `label=path` if given, else the run directory
/// name (`<run>/seed-N/metrics.csv`).
pub fn split_label(arg: &str) -> (String, PathBuf) {
    if let Some((label, path)) = arg.split_once('=') {
        return (label.to_string(), PathBuf::from(path));
    }
    let path = PathBuf::from(arg);
    let label = path
        .parent()
        .and_then(Path::parent)
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| arg.to_string());
    (label, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSummary {
    pub written: Vec<PathBuf>,
    pub skipped_rows: usize,
}

const METRICS: [(&str, &str, bool); 4] = [
    ("eval_return", "Evaluation return", true),
    ("violations", "Constraint violations per evaluation", false),
    ("satisfaction_rate", "Constraint satisfaction rate", false),
    ("forward_loss", "Forward-model loss", false),
];

/// Writes `<metric>.svg` and `<metric>_smoothed.csv` for each metric.
pub fn emit_curves(inputs: &[(String, PathBuf)], out_dir: &Path, opts: PlotOptions) -> Result<PlotSummary, HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::Config("plot needs at least one metrics file".into()));
    }
    let mut groups: BTreeMap<usize, (String, Vec<Table>)> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut skipped = 0;
    for (label, path) in inputs {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let table = Table::parse(&text)?;
        skipped += table.skipped;
        let idx = match order.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                order.push(label.clone());
                order.len() - 1
            }
        };
        groups.entry(idx).or_insert_with(|| (label.clone(), Vec::new())).1.push(table);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (column, title, is_return) in METRICS {
        let window = if is_return { opts.return_window } else { opts.violation_window };
        let mut series = Vec::new();
        let mut csv = String::from("label,steps,mean,min,max\n");
        for (label, tables) in groups.values() {
            let seeds: Vec<Vec<(f64, f64)>> = tables
                .iter()
                .filter_map(|t| t.series("steps", column))
                .filter(|s| !s.is_empty())
                .map(|s| {
                    let ys: Vec<f64> = s.iter().map(|p| p.1).collect();
                    s.iter().zip(rolling_mean(&ys, window)).map(|(p, y)| (p.0, y)).collect()
                })
                .collect();
            let points = across_seeds(&seeds);
            for p in &points {
                let _ = writeln!(csv, "{label},{},{},{},{}", p.0, p.1, p.2, p.3);
            }
            series.push(BandSeries {
                label: label.clone(),
                points,
            });
        }
        if series.iter().all(|s| s.points.is_empty()) {
            continue;
        }
        let svg_path = out_dir.join(format!("{column}.svg"));
        let csv_path = out_dir.join(format!("{column}_smoothed.csv"));
        let chart = band_chart(&format!("{title} (rolling mean {window})"), "environment steps", column, &series);
        std::fs::write(&svg_path, chart).map_err(|e| HarnessError::io(&svg_path, e))?;
        std::fs::write(&csv_path, csv).map_err(|e| HarnessError::io(&csv_path, e))?;
        written.push(svg_path);
        written.push(csv_path);
    }
    Ok(PlotSummary {
        written,
        skipped_rows: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_one_is_identity() {
        let v = vec![3.0, -1.0, 2.5, 0.1];
        assert_eq!(rolling_mean(&v, 1), v);
    }

    #[test]
    fn constant_stays_constant() {
        let v = vec![0.7; 50];
        for w in [1, 20, 100] {
            assert!(rolling_mean(&v, w).iter().all(|&x| (x - 0.7).abs() < 1e-14));
        }
    }

    #[test]
    fn trailing_window() {
        assert_eq!(rolling_mean(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.0, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn band_spans_seeds() {
        let seeds = vec![
            vec![(0.0, 1.0), (1.0, 5.0)],
            vec![(0.0, 3.0), (1.0, 2.0)],
            vec![(0.0, 2.0), (1.0, 8.0), (2.0, 9.0)],
        ];
        let agg = across_seeds(&seeds);
        assert_eq!(agg, vec![(0.0, 2.0, 1.0, 3.0), (1.0, 5.0, 2.0, 8.0)]);
    }

    #[test]
    fn labels_default_to_the_run_directory() {
        assert_eq!(split_label("runs/s3/seed-0/metrics.csv").0, "s3");
        assert_eq!(split_label("base=x.csv"), ("base".to_string(), PathBuf::from("x.csv")));
    }
}
