//! Datasets: Iris ingestion, the synthetic n-sphere task, normalization and
//! stratified splits. Everything random is a pure function of a seed.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming the default Iris CSV location.
pub const IRIS_PATH_ENV: &str = "PEL_IRIS_PATH";

pub const IRIS_CLASSES: [&str; 3] = ["setosa", "versicolor", "virginica"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Iris,
    Nsphere,
    Custom,
}

/// Per-feature `[-1, 1]` normalization, kept for inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn apply(&self, v: f64) -> f64 {
        -1.0 + 2.0 * (v - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, v: f64) -> f64 {
        self.min + (v + 1.0) * (self.max - self.min) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub feature_ranges: Vec<(f64, f64)>,
    pub class_count: usize,
    pub provenance: Provenance,
    /// Set by [`normalize`].
    pub normalization: Option<Vec<Normalization>>,
}

impl Dataset {
    pub fn new(
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        class_count: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::shape(x.len(), y.len(), "labels"));
        }
        let n_features = x.first().map_or(0, Vec::len);
        for (i, row) in x.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::shape(n_features, row.len(), format!("sample {i}")));
            }
            if let Some(f) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "sample {i} feature {f} is not finite"
                )));
            }
        }
        if let Some(i) = y.iter().position(|&c| c >= class_count) {
            return Err(Error::Validation(format!(
                "sample {i} has label {} outside [0, {class_count})",
                y[i]
            )));
        }
        let feature_ranges = ranges(&x, n_features);
        Ok(Self {
            x,
            y,
            feature_ranges,
            class_count,
            provenance,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_ranges.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &c in &self.y {
            counts[c] += 1;
        }
        counts
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let x: Vec<Vec<f64>> = idx.iter().map(|&i| self.x[i].clone()).collect();
        let feature_ranges = ranges(&x, self.n_features());
        Self {
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_ranges,
            class_count: self.class_count,
            provenance: self.provenance,
            normalization: self.normalization.clone(),
        }
    }

    /// CSV with numeric labels, readable by [`load_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        let header: Vec<String> = (0..self.n_features()).map(|f| format!("x{f}")).collect();
        writeln!(out, "{},label", header.join(","))?;
        for (row, label) in self.x.iter().zip(&self.y) {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{label}", vals.join(","))?;
        }
        fs::write(path, out)?;
        Ok(())
    }
}

fn ranges(x: &[Vec<f64>], n_features: usize) -> Vec<(f64, f64)> {
    (0..n_features)
        .map(|f| {
            x.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
                    (lo.min(row[f]), hi.max(row[f]))
                })
        })
        .collect()
}

enum Labels {
    Iris,
    Numeric,
}

fn parse_csv(
    text: &str,
    labels: Labels,
    n_features: Option<usize>,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if first {
            first = false;
            if fields[0].parse::<f64>().is_err() {
                continue; // header
            }
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected features and a label, got '{line}'"),
            });
        }
        let (feats, label) = fields.split_at(fields.len() - 1);
        if let Some(n) = n_features {
            if feats.len() != n {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {n} features, found {}", feats.len()),
                });
            }
        } else if let Some(prev) = x.first().map(Vec::len) {
            if feats.len() != prev {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {prev} features, found {}", feats.len()),
                });
            }
        }
        let row = feats
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("'{f}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = label[0];
        let class = match labels {
            Labels::Iris => {
                let name = label.to_ascii_lowercase();
                let name = name.strip_prefix("iris-").unwrap_or(&name);
                IRIS_CLASSES
                    .iter()
                    .position(|c| *c == name)
                    .ok_or_else(|| {
                        Error::Validation(format!("line {line_no}: unknown Iris class '{label}'"))
                    })?
            }
            Labels::Numeric => label.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("label '{label}' is not a class index"),
            })?,
        };
        x.push(row);
        y.push(class);
    }
    if x.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no data rows".into(),
        });
    }
    Ok((x, y))
}

/// Load Iris: four numeric features then a class name, optional header.
/// Classes map setosa -> 0, versicolor -> 1, virginica -> 2; the `Iris-`
/// prefix is accepted.
pub fn load_iris(path: &Path) -> Result<Dataset> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let (x, y) = parse_csv(&text, Labels::Iris, Some(4))?;
    Dataset::new(x, y, IRIS_CLASSES.len(), Provenance::Iris)
}

/// Load a CSV of numeric features with an integer label in the last column.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let (x, y) = parse_csv(&text, Labels::Numeric, None)?;
    let class_count = y.iter().max().map_or(0, |m| m + 1);
    Dataset::new(x, y, class_count, Provenance::Custom)
}

/// Synthetic radius classification on the cube `[-1, 1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NSphereConfig {
    #[serde(default = "NSphereConfig::default_dims")]
    pub n_dims: usize,
    #[serde(default = "NSphereConfig::default_samples")]
    pub n_samples: usize,
    /// Label 1 inside this radius. Defaults to the radius that splits the
    /// cube's volume in half.
    #[serde(default)]
    pub radius_threshold: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl NSphereConfig {
    fn default_dims() -> usize {
        4
    }

    fn default_samples() -> usize {
        1000
    }

    pub fn threshold(&self) -> f64 {
        self.radius_threshold
            .unwrap_or_else(|| balanced_threshold(self.n_dims))
    }
}

impl Default for NSphereConfig {
    fn default() -> Self {
        Self {
            n_dims: 4,
            n_samples: 1000,
            radius_threshold: None,
            seed: 0,
        }
    }
}

/// Median of `||x||` for `x` uniform on `[-1, 1]^n`, estimated from a fixed
/// Monte-Carlo sample of 200 000 points.
pub fn balanced_threshold(n_dims: usize) -> f64 {
    const SAMPLES: usize = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ba1a);
    let mut norms: Vec<f64> = (0..SAMPLES)
        .map(|_| {
            (0..n_dims)
                .map(|_| rng.gen_range(-1.0f64..1.0).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    norms.sort_by(f64::total_cmp);
    0.5 * (norms[SAMPLES / 2 - 1] + norms[SAMPLES / 2])
}

/// Uniform samples in `[-1, 1]^n`, label 1 when `||x||_2 < threshold`.
pub fn gen_nsphere(config: &NSphereConfig) -> Result<Dataset> {
    if config.n_dims < 2 {
        return Err(Error::Validation("n-sphere needs n_dims >= 2".into()));
    }
    if config.n_samples < 2 {
        return Err(Error::Validation("n-sphere needs n_samples >= 2".into()));
    }
    let threshold = config.threshold();
    if !(threshold > 0.0) {
        return Err(Error::Validation(format!(
            "radius threshold {threshold} must be > 0"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let x: Vec<Vec<f64>> = (0..config.n_samples)
        .map(|_| {
            (0..config.n_dims)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let y: Vec<usize> = x.iter().map(|row| nsphere_label(row, threshold)).collect();
    let inside = y.iter().filter(|&&c| c == 1).count();
    if inside == 0 || inside == y.len() {
        return Err(Error::Validation(format!(
            "radius threshold {threshold} puts all {} samples in one class; try about {:.4}",
            y.len(),
            balanced_threshold(config.n_dims)
        )));
    }
    Dataset::new(x, y, 2, Provenance::Nsphere)
}

pub fn nsphere_label(x: &[f64], threshold: f64) -> usize {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    usize::from(r < threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    #[default]
    MinmaxSymmetric,
}

/// Affinely map every feature onto `[-1, 1]`.
pub fn normalize(data: &Dataset, mode: NormalizeMode) -> Result<Dataset> {
    match mode {
        NormalizeMode::MinmaxSymmetric => {}
    }
    let maps = data
        .feature_ranges
        .iter()
        .enumerate()
        .map(|(f, &(min, max))| {
            if max > min {
                Ok(Normalization { min, max })
            } else {
                Err(Error::Validation(format!(
                    "feature {f} is constant ({min}); cannot normalize"
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<Vec<f64>> = data
        .x
        .iter()
        .map(|row| row.iter().zip(&maps).map(|(&v, m)| m.apply(v)).collect())
        .collect();
    let mut out = Dataset::new(x, data.y.clone(), data.class_count, data.provenance)?;
    out.normalization = Some(maps);
    Ok(out)
}

/// Stratified split: each class is shuffled with `seed` and
/// `round(train_fraction * count)` of it (at least one, at most all but one)
/// goes to the training set. Both halves keep the original row order.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train fraction {train_fraction} must be in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..data.class_count {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.y[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Validation(format!(
                "class {class} has {} sample(s); stratified split needs at least 2",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_train =
            ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(name: &str, text: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("pel-data-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn empty_file_is_parse_error() {
        let p = write_tmp("empty.csv", "");
        assert!(matches!(load_iris(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn header_is_skipped_and_names_mapped() {
        let p = write_tmp(
            "small.csv",
            "sl,sw,pl,pw,class\n5.1,3.5,1.4,0.2,setosa\n7.0,3.2,4.7,1.4,Iris-versicolor\n6.3,3.3,6.0,2.5,virginica\n",
        );
        let d = load_iris(&p).unwrap();
        assert_eq!(d.y, vec![0, 1, 2]);
        assert_eq!(d.x[1], vec![7.0, 3.2, 4.7, 1.4]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let p = write_tmp(
            "bad.csv",
            "5.1,3.5,1.4,0.2,setosa\n5.1,abc,1.4,0.2,setosa\n",
        );
        assert!(matches!(load_iris(&p), Err(Error::Parse { line: 2, .. })));
        let p = write_tmp("short.csv", "5.1,3.5,1.4,setosa\n");
        assert!(matches!(load_iris(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn unknown_class_is_validation_error() {
        let p = write_tmp("unk.csv", "5.1,3.5,1.4,0.2,rose\n");
        assert!(matches!(load_iris(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn nsphere_is_deterministic_and_consistent() {
        let cfg = NSphereConfig::default();
        let a = gen_nsphere(&cfg).unwrap();
        let b = gen_nsphere(&cfg).unwrap();
        assert_eq!(a, b);
        let t = cfg.threshold();
        for (row, &label) in a.x.iter().zip(&a.y) {
            assert_eq!(label, nsphere_label(row, t));
            assert!(row.iter().all(|v| (-1.0..1.0).contains(v)));
        }
    }

    #[test]
    fn nsphere_rejects_single_class() {
        let cfg = NSphereConfig {
            n_dims: 3,
            radius_threshold: Some(2.0 * 3f64.sqrt()),
            ..Default::default()
        };
        assert!(matches!(gen_nsphere(&cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn normalize_maps_to_unit_interval() {
        let d = Dataset::new(
            vec![vec![0.0], vec![5.0], vec![10.0]],
            vec![0, 1, 0],
            2,
            Provenance::Custom,
        )
        .unwrap();
        let n = normalize(&d, NormalizeMode::MinmaxSymmetric).unwrap();
        assert_eq!(n.x, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        let m = n.normalization.as_ref().unwrap()[0];
        assert_eq!(m.invert(0.0), 5.0);
    }

    #[test]
    fn unit_range_data_is_unchanged() {
        let x = vec![vec![-1.0, 0.25], vec![0.3, 1.0], vec![1.0, -1.0]];
        let d = Dataset::new(x.clone(), vec![0, 1, 0], 2, Provenance::Custom).unwrap();
        let n = normalize(&d, NormalizeMode::MinmaxSymmetric).unwrap();
        for (a, b) in n.x.iter().flatten().zip(x.iter().flatten()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn normalize_rejects_constant_feature() {
        let d = Dataset::new(
            vec![vec![1.0, 2.0], vec![1.0, 3.0]],
            vec![0, 1],
            2,
            Provenance::Custom,
        )
        .unwrap();
        match normalize(&d, NormalizeMode::MinmaxSymmetric) {
            Err(Error::Validation(msg)) => assert!(msg.contains("feature 0")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_needs_two_per_class() {
        let d = Dataset::new(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0, 0, 1],
            2,
            Provenance::Custom,
        )
        .unwrap();
        assert!(split(&d, 0.5, 0).is_err());
        assert!(split(&d, 1.0, 0).is_err());
    }
}
