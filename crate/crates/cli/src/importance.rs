//! Importance reports: an axis sweep or a dataset-wide map.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pel_core::data::{split, Dataset};
use pel_core::encodings::EncodingSpec;
use pel_core::importance::{
    importance_axis_sweep, importance_map, linspace, AxisSweep, ImportanceMap,
};
use pel_core::photonic::{ArchitectureConfig, PNNModel};
use pel_core::training::{train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ImportanceConfig, Loaded, ModelSource};
use crate::error::{CliError, CliResult};

pub const MAP_CSV: &str = "importance_map.csv";
pub const MAP_JSON: &str = "importance_map.json";

pub fn sweep_file(axis: usize) -> String {
    format!("importance_sweep_x{axis}.tsv")
}

/// `lo:hi:steps`, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts[..] else {
            return Err(format!("expected lo:hi:steps, got '{s}'"));
        };
        let lo: f64 = lo
            .trim()
            .parse()
            .map_err(|_| format!("'{lo}' is not a number"))?;
        let hi: f64 = hi
            .trim()
            .parse()
            .map_err(|_| format!("'{hi}' is not a number"))?;
        let steps: usize = steps
            .trim()
            .parse()
            .map_err(|_| format!("'{steps}' is not a step count"))?;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(format!(
                "grid bounds must be finite with lo <= hi, got {lo}:{hi}"
            ));
        }
        if steps == 0 {
            return Err("grid needs at least one step".into());
        }
        Ok(Self { lo, hi, steps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImportanceMode {
    Sweep { axis: usize, grid: Grid },
    Map,
}

#[derive(Debug, Clone)]
pub enum ImportanceReport {
    Sweep(AxisSweep),
    Map(ImportanceMap),
}

#[derive(Debug, Clone)]
pub struct ImportanceOutcome {
    pub files: Vec<PathBuf>,
    pub report: ImportanceReport,
}

fn build_model(
    source: &ModelSource,
    base: &Path,
    data: &Dataset,
    spec: &EncodingSpec,
) -> CliResult<PNNModel> {
    let n_inputs = spec.n_inputs();
    let sample = |arch: &ArchitectureConfig, seed: u64| -> CliResult<PNNModel> {
        arch.validate()
            .map_err(|e| CliError::Config(format!("model.architecture: {e}")))?;
        let ports = arch.port_count(n_inputs, data.class_count);
        // same stream a trial with this seed initializes from
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(PNNModel::random(arch, ports, &mut rng)?)
    };
    match source {
        ModelSource::Identity => Ok(PNNModel::identity(n_inputs)),
        ModelSource::Fresh { architecture, seed } => sample(architecture, *seed),
        ModelSource::Trained {
            architecture,
            train: cfg,
            seed,
        } => {
            cfg.validate()
                .map_err(|e| CliError::Config(format!("model.train: {e}")))?;
            let model = sample(architecture, *seed)?;
            let (train_set, _) = split(data, cfg.train_fraction, *seed)?;
            let config = TrainConfig {
                seed: *seed,
                ..cfg.clone()
            };
            Ok(train(&model, &train_set, spec, &config)?.model)
        }
        ModelSource::File { path } => {
            let path = base.join(path);
            let text = fs::read_to_string(&path).map_err(|e| {
                CliError::Config(format!("model.path: cannot read {}: {e}", path.display()))
            })?;
            let model =
                PNNModel::from_json(&text).map_err(|e| CliError::from(e).context("model.path"))?;
            if model.n_inputs < n_inputs {
                return Err(CliError::Config(format!(
                    "model.path: model has {} inputs, encoding needs {n_inputs}",
                    model.n_inputs
                )));
            }
            Ok(model)
        }
    }
}

/// Compute the report and write it under the output directory.
pub fn run_importance(
    loaded: &Loaded<ImportanceConfig>,
    mode: ImportanceMode,
    output: Option<PathBuf>,
) -> CliResult<ImportanceOutcome> {
    let cfg = &loaded.config;
    let data = cfg.dataset.load(&loaded.base)?;
    let spec = cfg
        .encoding
        .build(&data.feature_ranges)
        .map_err(|e| CliError::Config(format!("encoding: {e}")))?;
    let model = build_model(&cfg.model, &loaded.base, &data, &spec)?;
    let output_dir = output.unwrap_or_else(|| loaded.base.join(&cfg.output_dir));
    fs::create_dir_all(&output_dir).map_err(|e| {
        CliError::Config(format!(
            "output_dir: cannot create {}: {e}",
            output_dir.display()
        ))
    })?;

    match mode {
        ImportanceMode::Sweep { axis, grid } => {
            if axis >= spec.n_features() {
                return Err(CliError::Config(format!(
                    "--sweep {axis}: encoding has {} features",
                    spec.n_features()
                )));
            }
            let points = linspace(grid.lo, grid.hi, grid.steps);
            // every grid point must be encodable, not just skipped
            for &v in &points {
                let mut x = vec![0.0; spec.n_features()];
                x[axis] = v;
                spec.check_sample(&x)
                    .map_err(|e| CliError::Config(format!("--grid: {e}")))?;
            }
            let sweep = importance_axis_sweep(&model, &spec, axis, &points)?;
            let path = output_dir.join(sweep_file(axis));
            write(&path, &sweep.to_tsv())?;
            Ok(ImportanceOutcome {
                files: vec![path],
                report: ImportanceReport::Sweep(sweep),
            })
        }
        ImportanceMode::Map => {
            let map = importance_map(&model, &spec, &data.x)?;
            let csv = output_dir.join(MAP_CSV);
            let json = output_dir.join(MAP_JSON);
            write(&csv, &map.to_csv())?;
            write(
                &json,
                &(serde_json::to_string_pretty(&map).expect("map serializes") + "\n"),
            )?;
            Ok(ImportanceOutcome {
                files: vec![csv, json],
                report: ImportanceReport::Map(map),
            })
        }
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// One-paragraph description for the terminal.
pub fn describe(outcome: &ImportanceOutcome) -> String {
    let files: Vec<String> = outcome
        .files
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    match &outcome.report {
        ImportanceReport::Sweep(s) => format!(
            "sweep of x{}: {} points, {} skipped as singular\nwrote {}\n",
            s.axis,
            s.points.len(),
            s.skipped(),
            files.join(", ")
        ),
        ImportanceReport::Map(m) => {
            let sentinels: usize = m.pairs.iter().map(|p| p.sentinel_count).sum();
            let mut out = format!(
                "importance map over {} samples ({})\n",
                m.samples, m.spec_id
            );
            for f in &m.features {
                out += &format!(
                    "  x{}: mean {:.6}, flagged {:.3}\n",
                    f.feature, f.mean_importance, f.flagged_fraction
                );
            }
            for p in &m.pairs {
                out += &format!(
                    "  R(x{}, x{}): mean {:.6}, sentinels {}, flagged {}\n",
                    p.j, p.k, p.mean_ratio, p.sentinel_count, p.flagged_count
                );
            }
            out += &format!("sentinel count: {sentinels}\nwrote {}\n", files.join(", "));
            out
        }
    }
}
