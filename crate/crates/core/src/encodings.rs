//! Encoding functions that map real features onto complex optical inputs.
//!
//! A pair of features `(x_j, x_k)` shares one input through `g(x_j, x_k)`.
//! Because the network only sees `g`, the ratio of the two features'
//! importances is fixed by `|dg/dx_j| / |dg/dx_k|` whatever the weights are.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::diff::{Complex, ComplexValue, Real};
use crate::error::{Error, Result};

/// Rounding slack on the arcsin domain; values inside it are clamped to
/// `[-1, 1]`.
const ARCSIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EncodingKind {
    /// One feature per input, carried in the real amplitude.
    Independent,
    /// `x_j + i x_k`.
    Linear,
    /// `x_j e^{i x_k}`.
    Exponential,
    /// Two sine-response amplitude modulators, one shifted by `pi/2`:
    /// `i (sin x_j + i sin x_k)`.
    HwLinear,
    /// Sine-response amplitude modulator followed by a phase shifter:
    /// `i sin(x_j) e^{i x_k}`.
    HwExponential,
    /// `sqrt(x_j^2 + x_k^2) e^{i beta atan2(x_k, x_j)}`.
    EngineeredRadial { beta: f64 },
}

impl EncodingKind {
    pub fn name(&self) -> &'static str {
        match self {
            EncodingKind::Independent => "independent",
            EncodingKind::Linear => "linear",
            EncodingKind::Exponential => "exponential",
            EncodingKind::HwLinear => "hw_linear",
            EncodingKind::HwExponential => "hw_exponential",
            EncodingKind::EngineeredRadial { .. } => "engineered_radial",
        }
    }

    /// Stable label used in result files.
    pub fn id(&self) -> String {
        match self {
            EncodingKind::EngineeredRadial { beta } => format!("engineered_radial(beta={beta})"),
            other => other.name().to_string(),
        }
    }

    pub fn is_hardware(&self) -> bool {
        matches!(self, EncodingKind::HwLinear | EncodingKind::HwExponential)
    }

    /// Slots fed through a sine modulator (arcsin pre-mapping applies there).
    fn sine_slots(&self) -> [bool; 2] {
        match self {
            EncodingKind::HwLinear => [true, true],
            EncodingKind::HwExponential => [true, false],
            _ => [false, false],
        }
    }

    /// Slots that drive a phase.
    fn phase_slots(&self) -> [bool; 2] {
        match self {
            EncodingKind::Exponential | EncodingKind::HwExponential => [false, true],
            _ => [false, false],
        }
    }

    /// `g(x_j, x_k)` for a co-encoded pair.
    pub fn encode_pair<T: Real>(&self, xj: T, xk: T) -> Complex<T> {
        match *self {
            // an independent "pair" degenerates to the first feature alone
            EncodingKind::Independent => Complex::from_real(xj),
            EncodingKind::Linear => Complex::new(xj, xk),
            EncodingKind::Exponential => Complex::cis(xk).scale(xj),
            EncodingKind::HwLinear => Complex::new(-xk.sin(), xj.sin()),
            EncodingKind::HwExponential => Complex::cis(xk).scale(xj.sin()).mul_i(),
            EncodingKind::EngineeredRadial { beta } => {
                let r = (xj * xj + xk * xk).sqrt();
                Complex::from_polar(r, xk.atan2(xj).scale(beta))
            }
        }
    }
}

pub fn encode_independent(x: f64) -> ComplexValue {
    Complex::new(x, 0.0)
}

pub fn encode_linear(xj: f64, xk: f64) -> ComplexValue {
    EncodingKind::Linear.encode_pair(xj, xk)
}

pub fn encode_exponential(xj: f64, xk: f64) -> ComplexValue {
    EncodingKind::Exponential.encode_pair(xj, xk)
}

pub fn encode_hw_linear(xj: f64, xk: f64) -> ComplexValue {
    EncodingKind::HwLinear.encode_pair(xj, xk)
}

pub fn encode_hw_exponential(xj: f64, xk: f64) -> ComplexValue {
    EncodingKind::HwExponential.encode_pair(xj, xk)
}

pub fn encode_engineered_radial(xj: f64, xk: f64, beta: f64) -> ComplexValue {
    EncodingKind::EngineeredRadial { beta }.encode_pair(xj, xk)
}

/// Analytic `(dg/dx_j, dg/dx_k)`.
pub fn encoding_jacobian(
    kind: EncodingKind,
    xj: f64,
    xk: f64,
) -> Result<(ComplexValue, ComplexValue)> {
    let one = Complex::one();
    Ok(match kind {
        EncodingKind::Independent => {
            return Err(Error::Usage(
                "independent encoding does not combine features".into(),
            ))
        }
        EncodingKind::Linear => (one, Complex::i()),
        EncodingKind::Exponential => {
            let e = Complex::cis(xk);
            (e, e.scale(xj).mul_i())
        }
        EncodingKind::HwLinear => (Complex::new(0.0, xj.cos()), Complex::new(-xk.cos(), 0.0)),
        EncodingKind::HwExponential => {
            let e = Complex::cis(xk);
            (e.scale(xj.cos()).mul_i(), -e.scale(xj.sin()))
        }
        EncodingKind::EngineeredRadial { beta } => {
            let r = xj.hypot(xk);
            if r == 0.0 {
                return Err(Error::Singular(
                    "engineered radial encoding has no derivative at the origin".into(),
                ));
            }
            let e = Complex::cis(beta * xk.atan2(xj));
            (
                e * Complex::new(xj / r, -beta * xk / r),
                e * Complex::new(xk / r, beta * xj / r),
            )
        }
    })
}

/// `|dg/dx_j| / |dg/dx_k|`; `+inf` when the denominator vanishes.
pub fn relative_importance_analytic(kind: EncodingKind, xj: f64, xk: f64) -> Result<f64> {
    let (dj, dk) = encoding_jacobian(kind, xj, xk)?;
    Ok(ratio_or_inf(dj.modulus(), dk.modulus()))
}

pub(crate) fn ratio_or_inf(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Assignment of features to optical inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct FeaturePairing {
    pub pairs: Vec<(usize, usize)>,
    #[serde(default)]
    pub singles: Vec<usize>,
}

/// Where a feature lands: input index and slot (0 = first argument of `g`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub input: usize,
    pub slot: usize,
    pub paired: bool,
}

impl FeaturePairing {
    pub fn all_singles(n_features: usize) -> Self {
        Self {
            pairs: Vec::new(),
            singles: (0..n_features).collect(),
        }
    }

    pub fn input_count(&self) -> usize {
        self.pairs.len() + self.singles.len()
    }

    pub fn feature_count(&self) -> usize {
        2 * self.pairs.len() + self.singles.len()
    }

    /// Every feature in `0..n_features` must appear exactly once.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let mut seen = vec![false; n_features];
        let all = self
            .pairs
            .iter()
            .flat_map(|&(j, k)| [j, k])
            .chain(self.singles.iter().copied());
        for f in all {
            if f >= n_features {
                return Err(Error::Validation(format!(
                    "pairing references feature {f} but data has {n_features} features"
                )));
            }
            if seen[f] {
                return Err(Error::Validation(format!("feature {f} assigned twice")));
            }
            seen[f] = true;
        }
        if let Some(f) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!(
                "feature {f} is not assigned to any input"
            )));
        }
        Ok(())
    }

    pub fn placement(&self, feature: usize) -> Option<Placement> {
        for (i, &(j, k)) in self.pairs.iter().enumerate() {
            if j == feature {
                return Some(Placement {
                    input: i,
                    slot: 0,
                    paired: true,
                });
            }
            if k == feature {
                return Some(Placement {
                    input: i,
                    slot: 1,
                    paired: true,
                });
            }
        }
        self.singles
            .iter()
            .position(|&s| s == feature)
            .map(|i| Placement {
                input: self.pairs.len() + i,
                slot: 0,
                paired: false,
            })
    }

    /// Compact label, e.g. `0-1_2-3` or `s0_s1_s2_s3`.
    pub fn id(&self) -> String {
        let parts: Vec<String> = self
            .pairs
            .iter()
            .map(|(j, k)| format!("{j}-{k}"))
            .chain(self.singles.iter().map(|s| format!("s{s}")))
            .collect();
        parts.join("_")
    }
}

/// The three ways of splitting four features into two pairs.
pub fn four_feature_pairings() -> Vec<FeaturePairing> {
    [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))]
        .into_iter()
        .map(|(a, b)| FeaturePairing {
            pairs: vec![a, b],
            singles: vec![],
        })
        .collect()
}

/// `v -> scale * v + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        scale: 1.0,
        offset: 0.0,
    };

    /// Maps `[lo, hi]` onto `[to_lo, to_hi]`, endpoints exactly.
    pub fn between(lo: f64, hi: f64, to_lo: f64, to_hi: f64) -> Self {
        let scale = (to_hi - to_lo) / (hi - lo);
        Self {
            scale,
            offset: to_lo - lo * scale,
        }
    }

    pub fn apply<T: Real>(&self, v: T) -> T {
        v.scale(self.scale) + T::from_f64(self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PrescaleMode {
    /// Features are used as given.
    Identity,
    /// Each feature's range goes to `[-1, 1]`; phase slots to `phase_range`.
    #[default]
    Minmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrescaleConfig {
    #[serde(default)]
    pub mode: PrescaleMode,
    #[serde(default = "PrescaleConfig::default_phase_range")]
    pub phase_range: [f64; 2],
}

impl PrescaleConfig {
    fn default_phase_range() -> [f64; 2] {
        [-PI, PI]
    }
}

impl Default for PrescaleConfig {
    fn default() -> Self {
        Self {
            mode: PrescaleMode::Minmax,
            phase_range: Self::default_phase_range(),
        }
    }
}

/// Serialized form of an [`EncodingSpec`] before it is fitted to data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub pairing: Vec<(usize, usize)>,
    #[serde(default)]
    pub singles: Vec<usize>,
    #[serde(default)]
    pub prescale: PrescaleConfig,
    /// Map sine-modulated slots through `arcsin` so hardware encodings
    /// reproduce the ideal ones up to a global phase.
    #[serde(
        default = "EncodingConfig::default_arcsin",
        skip_serializing_if = "Option::is_none"
    )]
    pub arcsin: Option<bool>,
}

impl EncodingConfig {
    fn default_arcsin() -> Option<bool> {
        None
    }

    pub fn new(kind: EncodingKind, pairing: FeaturePairing) -> Self {
        Self {
            kind: kind.name().to_string(),
            beta: match kind {
                EncodingKind::EngineeredRadial { beta } => Some(beta),
                _ => None,
            },
            pairing: pairing.pairs,
            singles: pairing.singles,
            prescale: PrescaleConfig::default(),
            arcsin: None,
        }
    }

    pub fn kind(&self) -> Result<EncodingKind> {
        let kind = match self.kind.as_str() {
            "independent" => EncodingKind::Independent,
            "linear" => EncodingKind::Linear,
            "exponential" => EncodingKind::Exponential,
            "hw_linear" => EncodingKind::HwLinear,
            "hw_exponential" => EncodingKind::HwExponential,
            "engineered_radial" => EncodingKind::EngineeredRadial {
                beta: self.beta.unwrap_or(0.0),
            },
            other => {
                return Err(Error::Validation(format!(
                    "unknown encoding kind '{other}'"
                )));
            }
        };
        if self.beta.is_some() && !matches!(kind, EncodingKind::EngineeredRadial { .. }) {
            return Err(Error::Validation(format!(
                "beta is only valid for engineered_radial, not {}",
                self.kind
            )));
        }
        Ok(kind)
    }

    pub fn pairing(&self) -> FeaturePairing {
        FeaturePairing {
            pairs: self.pairing.clone(),
            singles: self.singles.clone(),
        }
    }

    /// Fit the prescale to per-feature `(min, max)` ranges.
    pub fn build(&self, feature_ranges: &[(f64, f64)]) -> Result<EncodingSpec> {
        let kind = self.kind()?;
        let pairing = self.pairing();
        pairing.validate(feature_ranges.len())?;
        if kind == EncodingKind::Independent && !pairing.pairs.is_empty() {
            return Err(Error::Validation(
                "independent encoding cannot have pairs".into(),
            ));
        }
        let [lo, hi] = self.prescale.phase_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Validation(format!(
                "phase_range [{lo}, {hi}] must be increasing"
            )));
        }
        let arcsin = self.arcsin.unwrap_or(true) && kind.is_hardware();
        let mut prescale = vec![Affine::IDENTITY; feature_ranges.len()];
        if self.prescale.mode == PrescaleMode::Minmax {
            let phase = kind.phase_slots();
            for (f, &(min, max)) in feature_ranges.iter().enumerate() {
                if !(max > min) {
                    return Err(Error::Validation(format!(
                        "feature {f} has an empty range [{min}, {max}]"
                    )));
                }
                let place = pairing.placement(f).expect("pairing was validated");
                prescale[f] = if place.paired && phase[place.slot] {
                    Affine::between(min, max, lo, hi)
                } else {
                    Affine::between(min, max, -1.0, 1.0)
                };
            }
        }
        Ok(EncodingSpec {
            kind,
            pairing,
            prescale,
            arcsin,
        })
    }
}

/// A fitted encoding: kind, feature-to-input assignment and the per-feature
/// affine prescale applied before `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingSpec {
    pub kind: EncodingKind,
    pub pairing: FeaturePairing,
    pub prescale: Vec<Affine>,
    pub arcsin: bool,
}

impl EncodingSpec {
    /// Unit prescale, no arcsin pre-mapping.
    pub fn raw(kind: EncodingKind, pairing: FeaturePairing) -> Result<Self> {
        let n = pairing.feature_count();
        pairing.validate(n)?;
        Ok(Self {
            kind,
            pairing,
            prescale: vec![Affine::IDENTITY; n],
            arcsin: false,
        })
    }

    pub fn with_arcsin(mut self, arcsin: bool) -> Self {
        self.arcsin = arcsin && self.kind.is_hardware();
        self
    }

    pub fn n_features(&self) -> usize {
        self.prescale.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.pairing.input_count()
    }

    pub fn id(&self) -> String {
        self.kind.id()
    }

    fn premapped(&self, placement: Placement) -> bool {
        self.arcsin && placement.paired && self.kind.sine_slots()[placement.slot]
    }

    /// Argument handed to `g` for one feature.
    fn slot_value<T: Real>(&self, feature: usize, x: T, placement: Placement) -> T {
        let v = self.prescale[feature].apply(x);
        if !self.premapped(placement) {
            return v;
        }
        if v.value().abs() > 1.0 {
            // rounding slack admitted by `check_sample`
            T::from_f64(v.value().signum()).asin()
        } else {
            v.asin()
        }
    }

    /// Checks the sample length and the arcsin domain of premapped slots.
    pub fn check_sample(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::shape(self.n_features(), x.len(), "feature vector"));
        }
        if !self.arcsin {
            return Ok(());
        }
        for (f, &v) in x.iter().enumerate() {
            let place = self
                .pairing
                .placement(f)
                .expect("spec pairing covers every feature");
            if !self.premapped(place) {
                continue;
            }
            let s = self.prescale[f].apply(v);
            if !(s.abs() <= 1.0 + ARCSIN_SLACK) {
                return Err(Error::Domain(format!(
                    "feature {f} = {v} prescales to {s}, outside the arcsin domain [-1, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Encode one sample without domain checks; see [`check_sample`](Self::check_sample).
    pub fn encode_with<T: Real>(&self, x: &[T]) -> Vec<Complex<T>> {
        let mut inputs = Vec::with_capacity(self.n_inputs());
        for (i, &(j, k)) in self.pairing.pairs.iter().enumerate() {
            let pj = Placement {
                input: i,
                slot: 0,
                paired: true,
            };
            let pk = Placement {
                input: i,
                slot: 1,
                paired: true,
            };
            let a = self.slot_value(j, x[j], pj);
            let b = self.slot_value(k, x[k], pk);
            inputs.push(self.kind.encode_pair(a, b));
        }
        for (i, &s) in self.pairing.singles.iter().enumerate() {
            let p = Placement {
                input: self.pairing.pairs.len() + i,
                slot: 0,
                paired: false,
            };
            inputs.push(Complex::from_real(self.slot_value(s, x[s], p)));
        }
        inputs
    }

    pub fn encode_sample(&self, x: &[f64]) -> Result<Vec<ComplexValue>> {
        self.check_sample(x)?;
        Ok(self.encode_with(x))
    }

    /// True where `x_j` sits on a point without a derivative: the origin of
    /// the radial encoding or the edge of the arcsin domain.
    pub fn is_singular(&self, x: &[f64], feature: usize) -> bool {
        let Some(place) = self.pairing.placement(feature) else {
            return false;
        };
        if !place.paired {
            return false;
        }
        let (j, k) = self.pairing.pairs[place.input];
        if self.premapped(place) && self.prescale[feature].apply(x[feature]).abs() >= 1.0 {
            return true;
        }
        if let EncodingKind::EngineeredRadial { .. } = self.kind {
            let a = self.prescale[j].apply(x[j]);
            let b = self.prescale[k].apply(x[k]);
            return a == 0.0 && b == 0.0;
        }
        false
    }

    /// `d(slot argument)/dx` for one feature: prescale times the arcsin
    /// factor.
    fn chain_factor(&self, x: &[f64], feature: usize, place: Placement) -> f64 {
        let a = self.prescale[feature];
        if self.premapped(place) {
            let v = a.apply(x[feature]);
            a.scale / (1.0 - v * v).sqrt()
        } else {
            a.scale
        }
    }

    /// Analytic `R_{j,k}` for raw features, including the prescale chain.
    pub fn relative_importance(&self, x: &[f64], j: usize, k: usize) -> Result<f64> {
        let (pj, pk) = self.co_encoded(j, k)?;
        let (first, second) = self.pairing.pairs[pj.input];
        let a = self.slot_value(first, x[first], Placement { slot: 0, ..pj });
        let b = self.slot_value(second, x[second], Placement { slot: 1, ..pj });
        let (d0, d1) = encoding_jacobian(self.kind, a, b)?;
        let slot_deriv = |slot: usize| {
            if slot == 0 {
                d0.modulus()
            } else {
                d1.modulus()
            }
        };
        let num = slot_deriv(pj.slot) * self.chain_factor(x, j, pj).abs();
        let den = slot_deriv(pk.slot) * self.chain_factor(x, k, pk).abs();
        Ok(ratio_or_inf(num, den))
    }

    pub(crate) fn co_encoded(&self, j: usize, k: usize) -> Result<(Placement, Placement)> {
        let pj = self.pairing.placement(j);
        let pk = self.pairing.placement(k);
        match (pj, pk) {
            (Some(a), Some(b)) if a.paired && b.paired && a.input == b.input && j != k => {
                Ok((a, b))
            }
            _ => Err(Error::Usage(format!(
                "features {j} and {k} are not encoded in the same input"
            ))),
        }
    }
}

impl fmt::Display for EncodingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.kind.id(), self.pairing.id())
    }
}

/// Encode every row of `x`. Columns are the pairs in order, then the singles.
pub fn encode_dataset(x: &[Vec<f64>], spec: &EncodingSpec) -> Result<Vec<Vec<ComplexValue>>> {
    x.iter()
        .enumerate()
        .map(|(i, row)| {
            spec.encode_sample(row).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("sample {i}: {msg}")),
                other => other,
            })
        })
        .collect()
}

/// Fit `config` to a dataset's feature ranges.
pub fn spec_for(config: &EncodingConfig, data: &Dataset) -> Result<EncodingSpec> {
    config.build(&data.feature_ranges)
}
