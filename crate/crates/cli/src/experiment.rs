//! The encoding-comparison study: every encoding against every seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pel_core::encodings::EncodingKind;
use pel_core::training::{
    accuracies_for, results_csv, run_trials, sign_test, EncodingSummary, SignTest, TrialFailure,
    TrialReport, TrialSetup,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Loaded};
use crate::error::{CliError, CliResult};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "accuracy_plot.tsv";

/// Paired comparison of one encoding against the independent baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub label: String,
    /// Seeds where both trials succeeded.
    pub paired: usize,
    pub test: Option<SignTest>,
}

/// Contents of `summary.json`. Holds no timings or host details, so reruns
/// produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub dataset: String,
    pub samples: usize,
    pub seeds: Vec<u64>,
    pub trials: usize,
    pub failed_trials: usize,
    /// Best mean test accuracy first.
    pub encodings: Vec<EncodingSummary>,
    pub baseline: String,
    pub best_combined: Option<String>,
    pub comparisons: Vec<BaselineComparison>,
    pub failures: Vec<TrialFailure>,
    pub artifact_choices: Vec<String>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    pub seed_offset: u64,
    /// Overrides the config's `output_dir` (taken relative to the working
    /// directory rather than the config file).
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub report: TrialReport,
    pub summary: ExperimentSummary,
}

/// Run the study and write `results.csv`, `summary.json` and
/// `accuracy_plot.tsv`. Failed trials are counted, not fatal.
pub fn run_experiment(
    loaded: &Loaded<ExperimentConfig>,
    opts: &ExperimentOptions,
) -> CliResult<ExperimentOutcome> {
    let cfg = &loaded.config;
    let data = cfg.dataset.load(&loaded.base)?;
    let specs = cfg.build_specs(&data)?;
    let output_dir = match &opts.output {
        Some(p) => p.clone(),
        None => loaded.base.join(&cfg.output_dir),
    };
    fs::create_dir_all(&output_dir).map_err(|e| {
        CliError::Config(format!(
            "output_dir: cannot create {}: {e}",
            output_dir.display()
        ))
    })?;

    let seeds: Vec<u64> = (0..cfg.n_seeds as u64)
        .map(|s| s + opts.seed_offset)
        .collect();
    let setup = TrialSetup {
        data: &data,
        arch: &cfg.architecture,
        train: &cfg.train,
    };
    let report = run_trials(setup, &specs, &seeds)?;

    let baseline = report
        .summary
        .iter()
        .find(|s| s.encoding_id == EncodingKind::Independent.id())
        .map(EncodingSummary::label)
        .expect("config requires an independent baseline");
    let best_combined = report
        .summary
        .iter()
        .find(|s| s.encoding_id != EncodingKind::Independent.id() && s.count > 0)
        .map(EncodingSummary::label);
    let comparisons = compare_to_baseline(&report);

    let mut artifact_choices = cfg.dataset.artifact_choices();
    artifact_choices.push(format!(
        "train/test split fraction {}",
        cfg.train.train_fraction
    ));
    artifact_choices
        .push("seed s drives the split, the initialization and the shuffle of trial s".into());
    let summary = ExperimentSummary {
        dataset: format!("{:?}", data.provenance).to_lowercase(),
        samples: data.len(),
        seeds,
        trials: report.records.len() + report.failures.len(),
        failed_trials: report.failures.len(),
        encodings: report.summary.clone(),
        baseline,
        best_combined,
        comparisons,
        failures: report.failures.clone(),
        artifact_choices,
        config: cfg.clone(),
    };

    write(
        &output_dir.join(RESULTS_FILE),
        &results_csv(&report.records),
    )?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write(&output_dir.join(SUMMARY_FILE), &(json + "\n"))?;
    write(&output_dir.join(PLOT_FILE), &plot_tsv(&report.summary))?;
    Ok(ExperimentOutcome {
        output_dir,
        report,
        summary,
    })
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn compare_to_baseline(report: &TrialReport) -> Vec<BaselineComparison> {
    let Some(base) = report
        .summary
        .iter()
        .find(|s| s.encoding_id == EncodingKind::Independent.id())
    else {
        return Vec::new();
    };
    let base_acc: BTreeMap<u64, f64> =
        accuracies_for(&report.records, &base.encoding_id, &base.pairing_id)
            .into_iter()
            .collect();
    report
        .summary
        .iter()
        .filter(|s| !(s.encoding_id == base.encoding_id && s.pairing_id == base.pairing_id))
        .map(|s| {
            let (a, b): (Vec<f64>, Vec<f64>) =
                accuracies_for(&report.records, &s.encoding_id, &s.pairing_id)
                    .into_iter()
                    .filter_map(|(seed, acc)| base_acc.get(&seed).map(|&b| (acc, b)))
                    .unzip();
            BaselineComparison {
                label: s.label(),
                paired: a.len(),
                test: sign_test(&a, &b).ok(),
            }
        })
        .collect()
}

/// `label, encoding_id, pairing_id, mean, std, stderr, count`, in summary
/// order; one bar with an error bar per row.
pub fn plot_tsv(summary: &[EncodingSummary]) -> String {
    let mut out = String::from("label\tencoding_id\tpairing_id\tmean\tstd\tstderr\tcount\n");
    for s in summary {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.label(),
            s.encoding_id,
            s.pairing_id,
            s.mean,
            s.std,
            s.stderr,
            s.count
        );
    }
    out
}

/// Human-readable table of a summary.
pub fn summary_table(summary: &ExperimentSummary) -> String {
    let width = summary
        .encodings
        .iter()
        .map(|s| s.label().len())
        .max()
        .unwrap_or(8)
        .max(8);
    let mut out = format!(
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>5}  {:>6}\n",
        "encoding", "mean", "std", "stderr", "train", "n", "failed"
    );
    for s in &summary.encodings {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.4}  {:>6.4}  {:>6.4}  {:>6.4}  {:>5}  {:>6}",
            s.label(),
            s.mean,
            s.std,
            s.stderr,
            s.mean_train,
            s.count,
            s.failed
        );
    }
    let _ = writeln!(
        out,
        "{} trials, {} failed; baseline {}",
        summary.trials, summary.failed_trials, summary.baseline
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, mean: f64) -> EncodingSummary {
        EncodingSummary {
            encoding_id: id.into(),
            pairing_id: "p".into(),
            count: 3,
            failed: 0,
            mean,
            std: 0.1,
            stderr: 0.05,
            min: 0.0,
            max: 1.0,
            mean_train: 0.9,
        }
    }

    #[test]
    fn plot_rows_follow_summary_order() {
        let tsv = plot_tsv(&[row("linear", 0.9), row("independent", 0.8)]);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "linear[p]\tlinear\tp\t0.9\t0.1\t0.05\t3");
        assert!(lines[2].starts_with("independent[p]\t"));
    }
}
