use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use system3_harness::config::{RunConfig, Settings, KEYS};
use system3_harness::metrics::{append_rows, MetricsRow, HEADER};
use system3_harness::plot::{emit_curves, split_label, PlotOptions};
use system3_harness::run::{
    check_constraint, run_eval, run_train, seed_dir, value_grid, value_grid_csv, VERSION_TAG,
};
use system3_harness::svg::heatmap;
use system3_harness::HarnessError;

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

/// `--config` plus one flag per settings key.
fn with_settings(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(value_parser!(PathBuf))
            .help("settings file; flags override its entries"),
    );
    KEYS.iter().fold(cmd, |cmd, (key, help)| {
        let long: &'static str = Box::leak(flag(key).into_boxed_str());
        let arg = Arg::new(*key).long(long).value_name("VALUE").help(*help);
        cmd.arg(if *key == "total_steps" { arg.visible_alias("steps") } else { arg })
    })
}

fn settings(m: &ArgMatches) -> Result<RunConfig, HarnessError> {
    let mut s = match m.get_one::<PathBuf>("config") {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            s.set(key, v)?;
        }
    }
    RunConfig::from_settings(&s)
}

fn cli() -> Command {
    let checkpoint = || {
        Arg::new("checkpoint")
            .long("checkpoint")
            .required(true)
            .value_name("FILE")
            .value_parser(value_parser!(PathBuf))
    };
    Command::new("system3")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Constraint-shaped actor-critic training with a learned forward model")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            with_settings(Command::new("train").about("train every seed of an experiment")).arg(
                Arg::new("overwrite")
                    .long("overwrite")
                    .action(ArgAction::SetTrue)
                    .help("replace existing results in the output directory"),
            ),
        )
        .subcommand(
            Command::new("eval")
                .about("greedy evaluation of a checkpoint")
                .arg(checkpoint())
                .arg(
                    Arg::new("constraint")
                        .long("constraint")
                        .value_name("FILE")
                        .value_parser(value_parser!(PathBuf))
                        .help("formula to score; defaults to the run's evaluation formula"),
                )
                .arg(
                    Arg::new("horizon")
                        .long("horizon")
                        .default_value("1000")
                        .value_parser(value_parser!(usize))
                        .help("evaluation steps"),
                )
                .arg(
                    Arg::new("output")
                        .long("output")
                        .value_name("FILE")
                        .value_parser(value_parser!(PathBuf))
                        .help("CSV to append to; defaults to eval.csv in the seed directory"),
                ),
        )
        .subcommand(
            Command::new("plot")
                .about("learning curves from metrics files (`label=path` or `<run>/seed-N/metrics.csv`)")
                .arg(Arg::new("metrics").required(true).num_args(1..).value_name("METRICS"))
                .arg(
                    Arg::new("out")
                        .long("out")
                        .required(true)
                        .value_name("DIR")
                        .value_parser(value_parser!(PathBuf)),
                )
                .arg(
                    Arg::new("return-window")
                        .long("return-window")
                        .default_value("20")
                        .value_parser(value_parser!(usize)),
                )
                .arg(
                    Arg::new("violation-window")
                        .long("violation-window")
                        .default_value("10")
                        .value_parser(value_parser!(usize)),
                ),
        )
        .subcommand(
            Command::new("value-grid")
                .about("state values of a grid checkpoint as CSV and SVG")
                .arg(checkpoint())
                .arg(
                    Arg::new("out")
                        .long("out")
                        .required(true)
                        .value_name("DIR")
                        .value_parser(value_parser!(PathBuf)),
                ),
        )
        .subcommand(
            with_settings(Command::new("check-constraint").about("parse and bind a constraint file"))
                .arg(Arg::new("file").required(true).value_parser(value_parser!(PathBuf))),
        )
}

fn default_eval_csv(checkpoint: &Path) -> PathBuf {
    checkpoint
        .parent()
        .and_then(Path::parent)
        .map_or_else(|| PathBuf::from("eval.csv"), |d| d.join("eval.csv"))
}

fn dispatch(m: &ArgMatches) -> Result<(), HarnessError> {
    match m.subcommand() {
        Some(("train", sub)) => {
            let config = settings(sub)?;
            eprintln!("{VERSION_TAG}: training `{}` into {}", config.name, config.out.display());
            let progress = |row: &MetricsRow| {
                let e = &row.eval;
                eprintln!(
                    "seed {} step {} return {:.3} satisfaction {:.3} violations {}",
                    row.seed, row.steps, e.mean_return, e.satisfaction_rate, e.violations
                );
            };
            let rows = run_train(&config, sub.get_flag("overwrite"), &progress)?;
            println!("{HEADER}");
            for row in rows {
                println!("{}", row.to_csv());
            }
            for &seed in &config.seeds {
                eprintln!("metrics: {}", seed_dir(&config.out, seed).join("metrics.csv").display());
            }
            Ok(())
        }
        Some(("eval", sub)) => {
            let ckpt = sub.get_one::<PathBuf>("checkpoint").expect("required");
            let constraint = sub.get_one::<PathBuf>("constraint");
            let horizon = *sub.get_one::<usize>("horizon").expect("defaulted");
            let row = run_eval(ckpt, constraint.map(PathBuf::as_path), horizon)?;
            let out = sub.get_one::<PathBuf>("output").cloned().unwrap_or_else(|| default_eval_csv(ckpt));
            append_rows(&out, HEADER, &[row.to_csv()])?;
            println!("{HEADER}");
            println!("{}", row.to_csv());
            Ok(())
        }
        Some(("plot", sub)) => {
            let inputs: Vec<(String, PathBuf)> =
                sub.get_many::<String>("metrics").expect("required").map(|a| split_label(a)).collect();
            let opts = PlotOptions {
                return_window: *sub.get_one::<usize>("return-window").expect("defaulted"),
                violation_window: *sub.get_one::<usize>("violation-window").expect("defaulted"),
            };
            let out = sub.get_one::<PathBuf>("out").expect("required");
            let summary = emit_curves(&inputs, out, opts)?;
            if summary.skipped_rows > 0 {
                eprintln!("warning: skipped {} malformed rows", summary.skipped_rows);
            }
            for p in summary.written {
                println!("{}", p.display());
            }
            Ok(())
        }
        Some(("value-grid", sub)) => {
            let ckpt = sub.get_one::<PathBuf>("checkpoint").expect("required");
            let out = sub.get_one::<PathBuf>("out").expect("required");
            let values = value_grid(ckpt)?;
            std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
            let csv = out.join("value_grid.csv");
            let svg = out.join("value_grid.svg");
            std::fs::write(&csv, value_grid_csv(&values)).map_err(|e| HarnessError::io(&csv, e))?;
            std::fs::write(&svg, heatmap("V(s)", &values)).map_err(|e| HarnessError::io(&svg, e))?;
            println!("{}\n{}", csv.display(), svg.display());
            Ok(())
        }
        Some(("check-constraint", sub)) => {
            let config = settings(sub)?;
            let file = sub.get_one::<PathBuf>("file").expect("required");
            println!("{}", check_constraint(file, &config)?);
            Ok(())
        }
        _ => unreachable!("subcommand required"),
    }
}

fn main() -> ExitCode {
    match dispatch(&cli().get_matches()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn flags_override_settings() {
        let m = cli().get_matches_from(["system3", "train", "--name", "x", "--total-steps", "640", "--seeds", "1,2"]);
        let (_, sub) = m.subcommand().unwrap();
        let cfg = settings(sub).unwrap();
        assert_eq!(cfg.system.total_steps, 640);
        assert_eq!(cfg.seeds, vec![1, 2]);
    }
}
