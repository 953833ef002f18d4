//! Gradient feature importance of the composed map `x -> g(x) -> y^(L)`.
//!
//! `R_{j->c} = |d y_c / d x_j|` is taken on the pre-detection field and
//! evaluated in forward mode, one tangent per feature. The network's factor
//! cancels in `R_{j->c} / R_{k->c}` only when the network is complex
//! differentiable in the shared input, i.e. for meshes without modReLU; with
//! modReLU the empirical ratio can depend on the weights and the output.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diff::{forward_jvp, Complex, DualReal};
use crate::encodings::{ratio_or_inf, EncodingSpec};
use crate::error::{Error, Result};
use crate::photonic::PNNModel;

/// Why a pointwise importance was excluded from aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceFlag {
    /// An activation sat on its kink; the value uses the zero subgradient.
    NonSmooth,
    /// The encoding has no derivative at this point.
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceContext {
    pub x: Vec<f64>,
    pub spec_id: String,
    pub model_id: String,
}

/// Importance of every feature for every output at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceResult {
    /// `per_output[j][c] = R_{j->c}`; zero where flagged as singular.
    pub per_output: Vec<Vec<f64>>,
    pub flags: Vec<Option<ImportanceFlag>>,
    pub context: ImportanceContext,
}

impl ImportanceResult {
    pub fn get(&self, feature: usize, output: usize) -> f64 {
        self.per_output[feature][output]
    }

    pub fn is_flagged(&self, feature: usize) -> bool {
        self.flags[feature].is_some()
    }
}

/// Empirical `R_{j,k->c}` for every output next to the analytic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeImportanceResult {
    pub j: usize,
    pub k: usize,
    /// Ratio at the output with the largest `R_{k->c}`; `+inf` when every
    /// denominator vanishes.
    pub ratio: f64,
    pub analytic: f64,
    pub empirical_per_output: Vec<f64>,
    /// `max_c |ratio_c - ratio| / ratio` over finite entries.
    pub spread: f64,
    /// Outputs with `R_{k->c} = 0`.
    pub sentinel_count: usize,
    pub non_smooth: bool,
}

impl RelativeImportanceResult {
    pub fn is_sentinel(&self) -> bool {
        self.ratio.is_infinite()
    }

    /// Output-independence check at relative tolerance `tol`.
    pub fn consistent(&self, tol: f64) -> bool {
        self.spread <= tol
    }
}

/// Stable short identifier of a model's structure and weights (FNV-1a).
pub fn model_id(model: &PNNModel) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(model.n_inputs as u64);
    eat(model.layers.len() as u64);
    for p in model.params() {
        eat(p.to_bits());
    }
    format!("{h:016x}")
}

/// Encoder plus network with the parameters frozen, ready for tangents.
struct Probe<'a> {
    spec: &'a EncodingSpec,
    n_ports: usize,
    net: crate::photonic::RealizedModel<DualReal>,
}

struct Tangent {
    derivs: Vec<Complex<f64>>,
    non_smooth: bool,
}

impl<'a> Probe<'a> {
    fn new(model: &PNNModel, spec: &'a EncodingSpec) -> Result<Self> {
        if spec.n_inputs() > model.n_inputs {
            return Err(Error::shape(
                model.n_inputs,
                spec.n_inputs(),
                "encoded inputs vs model ports",
            ));
        }
        Ok(Self {
            spec,
            n_ports: model.n_inputs,
            net: model.realize_const(),
        })
    }

    fn tangent(&self, x: &[f64], j: usize) -> Result<Tangent> {
        let jvp = forward_jvp(
            |xd: &[DualReal]| {
                let mut input = self.spec.encode_with(xd);
                input.resize(self.n_ports, Complex::zero());
                self.net.field(&input)
            },
            x,
            j,
        )?;
        Ok(Tangent {
            derivs: jvp.derivs,
            non_smooth: jvp.non_smooth,
        })
    }
}

/// `R_{j->c}` rows per feature with each feature's flag.
type PointImportance = (Vec<Vec<f64>>, Vec<Option<ImportanceFlag>>);

fn point_importance(probe: &Probe, x: &[f64], n_outputs: usize) -> Result<PointImportance> {
    probe.spec.check_sample(x)?;
    let mut per_output = Vec::with_capacity(x.len());
    let mut flags = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        if probe.spec.is_singular(x, j) {
            per_output.push(vec![0.0; n_outputs]);
            flags.push(Some(ImportanceFlag::Singular));
            continue;
        }
        let t = probe.tangent(x, j)?;
        let row: Vec<f64> = t.derivs.iter().map(|d| d.modulus()).collect();
        if row.iter().any(|v| !v.is_finite()) {
            per_output.push(vec![0.0; n_outputs]);
            flags.push(Some(ImportanceFlag::Singular));
            continue;
        }
        flags.push(t.non_smooth.then_some(ImportanceFlag::NonSmooth));
        per_output.push(row);
    }
    Ok((per_output, flags))
}

/// `R_{j->c}` for every feature and output at `x`.
pub fn importance_at(model: &PNNModel, spec: &EncodingSpec, x: &[f64]) -> Result<ImportanceResult> {
    let probe = Probe::new(model, spec)?;
    let (per_output, flags) = point_importance(&probe, x, model.n_outputs())?;
    Ok(ImportanceResult {
        per_output,
        flags,
        context: ImportanceContext {
            x: x.to_vec(),
            spec_id: spec.to_string(),
            model_id: model_id(model),
        },
    })
}

/// Pointwise `R_{j->c}` with its flag, if any.
pub fn feature_importance(
    model: &PNNModel,
    spec: &EncodingSpec,
    x: &[f64],
    j: usize,
    c: usize,
) -> Result<(f64, Option<ImportanceFlag>)> {
    if j >= spec.n_features() {
        return Err(Error::Usage(format!(
            "feature {j} out of range for {} features",
            spec.n_features()
        )));
    }
    if c >= model.n_outputs() {
        return Err(Error::Usage(format!(
            "output {c} out of range for {} outputs",
            model.n_outputs()
        )));
    }
    spec.check_sample(x)?;
    if spec.is_singular(x, j) {
        return Ok((0.0, Some(ImportanceFlag::Singular)));
    }
    let probe = Probe::new(model, spec)?;
    let t = probe.tangent(x, j)?;
    let r = t.derivs[c].modulus();
    if !r.is_finite() {
        return Ok((0.0, Some(ImportanceFlag::Singular)));
    }
    Ok((r, t.non_smooth.then_some(ImportanceFlag::NonSmooth)))
}

/// `R_{j->c} / R_{k->c}` for all outputs, for features sharing one input.
pub fn relative_importance_empirical(
    model: &PNNModel,
    spec: &EncodingSpec,
    x: &[f64],
    j: usize,
    k: usize,
) -> Result<RelativeImportanceResult> {
    spec.check_sample(x)?;
    spec.co_encoded(j, k)?;
    if spec.is_singular(x, j) || spec.is_singular(x, k) {
        return Err(Error::Singular(format!(
            "features {j}, {k} sit on a singular point of {}",
            spec.id()
        )));
    }
    let analytic = spec.relative_importance(x, j, k)?;
    let probe = Probe::new(model, spec)?;
    let tj = probe.tangent(x, j)?;
    let tk = probe.tangent(x, k)?;
    let mut best: Option<(f64, f64)> = None; // (denominator, ratio)
    let mut sentinel_count = 0;
    let empirical_per_output: Vec<f64> = tj
        .derivs
        .iter()
        .zip(&tk.derivs)
        .map(|(dj, dk)| {
            let (num, den) = (dj.modulus(), dk.modulus());
            let r = ratio_or_inf(num, den);
            if den == 0.0 {
                sentinel_count += 1;
            } else if best.is_none_or(|(d, _)| den > d) {
                best = Some((den, r));
            }
            r
        })
        .collect();
    let ratio = best.map_or(f64::INFINITY, |(_, r)| r);
    let spread = if ratio.is_finite() && ratio > 0.0 {
        empirical_per_output
            .iter()
            .filter(|r| r.is_finite())
            .map(|r| (r - ratio).abs() / ratio)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(RelativeImportanceResult {
        j,
        k,
        ratio,
        analytic,
        empirical_per_output,
        spread,
        sentinel_count,
        non_smooth: tj.non_smooth || tk.non_smooth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAggregate {
    pub feature: usize,
    /// Mean of unflagged `R_{j->c}` over samples and outputs.
    pub mean_importance: f64,
    pub flagged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAggregate {
    pub j: usize,
    pub k: usize,
    /// Mean of finite, unflagged reported ratios.
    pub mean_ratio: f64,
    pub sentinel_count: usize,
    pub flagged_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMap {
    pub spec_id: String,
    pub model_id: String,
    pub samples: usize,
    pub features: Vec<FeatureAggregate>,
    pub pairs: Vec<PairAggregate>,
}

impl ImportanceMap {
    /// `feature,mean_importance,flagged_fraction`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,mean_importance,flagged_fraction\n");
        for f in &self.features {
            let _ = writeln!(
                out,
                "{},{},{}",
                f.feature, f.mean_importance, f.flagged_fraction
            );
        }
        out
    }

    /// Parse [`to_csv`](Self::to_csv) output back into `(feature, mean, flagged)` rows.
    pub fn parse_csv(text: &str) -> Result<Vec<FeatureAggregate>> {
        text.lines()
            .enumerate()
            .skip(1)
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let bad = |m: &str| Error::Parse {
                    line: i + 1,
                    message: m.to_string(),
                };
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 3 {
                    return Err(bad("expected 3 columns"));
                }
                Ok(FeatureAggregate {
                    feature: f[0].parse().map_err(|_| bad("feature index"))?,
                    mean_importance: f[1].parse().map_err(|_| bad("mean_importance"))?,
                    flagged_fraction: f[2].parse().map_err(|_| bad("flagged_fraction"))?,
                })
            })
            .collect()
    }
}

/// Aggregate importance over a dataset. Samples are evaluated in parallel
/// and reduced in sample order, so the result does not depend on the thread
/// count.
pub fn importance_map(
    model: &PNNModel,
    spec: &EncodingSpec,
    x: &[Vec<f64>],
) -> Result<ImportanceMap> {
    if x.is_empty() {
        return Err(Error::Validation(
            "importance map needs at least one sample".into(),
        ));
    }
    let probe = Probe::new(model, spec)?;
    let n_out = model.n_outputs();
    let points: Vec<PointImportance> = x
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            point_importance(&probe, row, n_out).map_err(|e| match e {
                Error::Domain(m) => Error::Domain(format!("sample {i}: {m}")),
                other => other,
            })
        })
        .collect::<Result<_>>()?;

    let n_features = spec.n_features();
    let mut features = Vec::with_capacity(n_features);
    for j in 0..n_features {
        let mut sum = 0.0;
        let mut used = 0usize;
        let mut flagged = 0usize;
        for (per_output, flags) in &points {
            if flags[j].is_some() {
                flagged += 1;
                continue;
            }
            sum += per_output[j].iter().sum::<f64>();
            used += 1;
        }
        if used == 0 {
            return Err(Error::Validation(format!(
                "every sample is flagged for feature {j}; nothing to aggregate"
            )));
        }
        features.push(FeatureAggregate {
            feature: j,
            mean_importance: sum / (used * n_out) as f64,
            flagged_fraction: flagged as f64 / x.len() as f64,
        });
    }

    let mut pairs = Vec::new();
    for &(j, k) in &spec.pairing.pairs {
        let ratios: Vec<Option<f64>> = x
            .par_iter()
            .map(
                |row| match relative_importance_empirical(model, spec, row, j, k) {
                    Ok(r) if !r.non_smooth => Ok(Some(r.ratio)),
                    Ok(_) | Err(Error::Singular(_)) => Ok(None),
                    Err(e) => Err(e),
                },
            )
            .collect::<Result<_>>()?;
        let mut sum = 0.0;
        let mut used = 0usize;
        let mut sentinel_count = 0;
        let mut flagged_count = 0;
        for r in ratios {
            match r {
                None => flagged_count += 1,
                Some(v) if v.is_infinite() => sentinel_count += 1,
                Some(v) => {
                    sum += v;
                    used += 1;
                }
            }
        }
        pairs.push(PairAggregate {
            j,
            k,
            mean_ratio: if used == 0 {
                f64::NAN
            } else {
                sum / used as f64
            },
            sentinel_count,
            flagged_count,
        });
    }

    Ok(ImportanceMap {
        spec_id: spec.to_string(),
        model_id: model_id(model),
        samples: x.len(),
        features,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x_j: f64,
    /// `R_{j->c}` per output; `None` where the point was skipped.
    pub importance: Option<Vec<f64>>,
    pub flag: Option<ImportanceFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSweep {
    pub axis: usize,
    pub n_outputs: usize,
    pub points: Vec<SweepPoint>,
}

impl AxisSweep {
    pub fn skipped(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.importance.is_none())
            .count()
    }

    /// Tab-separated `x_j, R_c0, R_c1, ...`; skipped points are left out.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("x_j");
        for c in 0..self.n_outputs {
            let _ = write!(out, "\tR_c{c}");
        }
        out.push('\n');
        for p in &self.points {
            if let Some(r) = &p.importance {
                let _ = write!(out, "{}", p.x_j);
                for v in r {
                    let _ = write!(out, "\t{v}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parse [`to_tsv`](Self::to_tsv) output into rows of numbers.
    pub fn parse_tsv(text: &str) -> Result<Vec<Vec<f64>>> {
        text.lines()
            .enumerate()
            .skip(1)
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                line.split('\t')
                    .map(|v| {
                        v.parse::<f64>().map_err(|_| Error::Parse {
                            line: i + 1,
                            message: format!("'{v}' is not a number"),
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

/// Importance of feature `axis` at points on its own axis (all other
/// features zero). Singular points, such as the radial origin, are skipped
/// and flagged.
pub fn importance_axis_sweep(
    model: &PNNModel,
    spec: &EncodingSpec,
    axis: usize,
    grid: &[f64],
) -> Result<AxisSweep> {
    let n = spec.n_features();
    if axis >= n {
        return Err(Error::Usage(format!(
            "axis {axis} out of range for {n} features"
        )));
    }
    let probe = Probe::new(model, spec)?;
    let n_outputs = model.n_outputs();
    let mut points = Vec::with_capacity(grid.len());
    for &v in grid {
        let mut x = vec![0.0; n];
        x[axis] = v;
        spec.check_sample(&x)?;
        if spec.is_singular(&x, axis) {
            points.push(SweepPoint {
                x_j: v,
                importance: None,
                flag: Some(ImportanceFlag::Singular),
            });
            continue;
        }
        let t = probe.tangent(&x, axis)?;
        let row: Vec<f64> = t.derivs.iter().map(|d| d.modulus()).collect();
        if row.iter().any(|r| !r.is_finite()) {
            points.push(SweepPoint {
                x_j: v,
                importance: None,
                flag: Some(ImportanceFlag::Singular),
            });
            continue;
        }
        points.push(SweepPoint {
            x_j: v,
            importance: Some(row),
            flag: t.non_smooth.then_some(ImportanceFlag::NonSmooth),
        });
    }
    Ok(AxisSweep {
        axis,
        n_outputs,
        points,
    })
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{EncodingKind, FeaturePairing};

    fn pair_spec(kind: EncodingKind) -> EncodingSpec {
        EncodingSpec::raw(
            kind,
            FeaturePairing {
                pairs: vec![(0, 1)],
                singles: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn identity_network_linear_encoding() {
        let model = PNNModel::identity(1);
        let spec = pair_spec(EncodingKind::Linear);
        let (r, flag) = feature_importance(&model, &spec, &[0.3, -0.8], 0, 0).unwrap();
        assert_eq!((r, flag), (1.0, None));
        let (r, _) = feature_importance(&model, &spec, &[0.3, -0.8], 1, 0).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn identity_network_exponential_phase_slot() {
        let model = PNNModel::identity(1);
        let spec = pair_spec(EncodingKind::Exponential);
        let (r, _) = feature_importance(&model, &spec, &[2.0, 0.7], 1, 0).unwrap();
        assert!((r - 2.0).abs() < 1e-15);
        let rel = relative_importance_empirical(&model, &spec, &[2.0, 0.7], 0, 1).unwrap();
        assert!((rel.ratio - 0.5).abs() < 1e-15);
    }

    #[test]
    fn radial_origin_is_flagged_and_skipped() {
        let model = PNNModel::identity(1);
        let spec = pair_spec(EncodingKind::EngineeredRadial { beta: 0.0 });
        let (r, flag) = feature_importance(&model, &spec, &[0.0, 0.0], 0, 0).unwrap();
        assert_eq!((r, flag), (0.0, Some(ImportanceFlag::Singular)));
        let sweep = importance_axis_sweep(&model, &spec, 0, &[-1.0, 0.0, 0.5]).unwrap();
        assert_eq!(sweep.skipped(), 1);
        for p in sweep.points.iter().filter(|p| p.x_j != 0.0) {
            assert!((p.importance.as_ref().unwrap()[0] - 1.0).abs() < 1e-15);
        }
        assert_eq!(sweep.to_tsv(), "x_j\tR_c0\n-1\t1\n0.5\t1\n");
    }

    #[test]
    fn not_co_encoded_is_usage_error() {
        let model = PNNModel::identity(2);
        let spec =
            EncodingSpec::raw(EncodingKind::Independent, FeaturePairing::all_singles(2)).unwrap();
        assert!(matches!(
            relative_importance_empirical(&model, &spec, &[0.1, 0.2], 0, 1),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn zero_denominator_gives_sentinel() {
        let model = PNNModel::identity(1);
        let spec = pair_spec(EncodingKind::Exponential);
        let rel = relative_importance_empirical(&model, &spec, &[0.0, 0.4], 0, 1).unwrap();
        assert!(rel.is_sentinel());
        assert_eq!(rel.sentinel_count, 1);
        assert!(rel.analytic.is_infinite());
    }

    #[test]
    fn zero_weights_give_zero_map() {
        let mut model = PNNModel::identity(2);
        model.set_params(&vec![0.0; model.param_count()]).unwrap();
        let spec = pair_spec(EncodingKind::Linear);
        let map = importance_map(&model, &spec, &[vec![0.1, 0.2], vec![-0.5, 0.9]]).unwrap();
        assert!(map.features.iter().all(|f| f.mean_importance == 0.0));
        let back = ImportanceMap::parse_csv(&map.to_csv()).unwrap();
        assert_eq!(back, map.features);
    }

    #[test]
    fn all_flagged_feature_is_an_error() {
        let model = PNNModel::identity(1);
        let spec = pair_spec(EncodingKind::EngineeredRadial { beta: 1.0 });
        assert!(importance_map(&model, &spec, &[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(-1.0, 1.0, 5), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }
}
