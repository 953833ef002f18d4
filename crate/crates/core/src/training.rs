//! Softmax-on-intensity loss, mini-batch training and multi-seed trials.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset};
use crate::diff::{Complex, ComplexValue, GradTape, Real, Var};
use crate::encodings::{encode_dataset, EncodingSpec};
use crate::error::{Error, Result};
use crate::photonic::{ArchitectureConfig, PNNModel, RealizedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    SoftmaxCrossEntropyOnIntensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "TrainConfig::default_epochs")]
    pub epochs: usize,
    #[serde(default = "TrainConfig::default_lr")]
    pub learning_rate: f64,
    #[serde(default = "TrainConfig::default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub loss: Loss,
    /// Seeds mini-batch shuffling in [`train`]; trials override it per seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "TrainConfig::default_train_fraction")]
    pub train_fraction: f64,
}

impl TrainConfig {
    fn default_epochs() -> usize {
        300
    }

    fn default_lr() -> f64 {
        0.01
    }

    fn default_batch() -> usize {
        16
    }

    fn default_train_fraction() -> f64 {
        0.8
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Validation("train.epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("train.batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!(
                "train.learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "train.train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0) {
                return Err(Error::Validation(
                    "adam needs beta1, beta2 in [0, 1) and epsilon > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.01,
            batch_size: 16,
            optimizer: Optimizer::default(),
            loss: Loss::default(),
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

fn check_readout(model: &PNNModel, class_count: usize, label: usize) -> Result<()> {
    if class_count > model.n_outputs() {
        return Err(Error::Usage(format!(
            "{class_count} classes but the model has {} outputs",
            model.n_outputs()
        )));
    }
    if label >= class_count {
        return Err(Error::Usage(format!(
            "label {label} out of range for {class_count} classes"
        )));
    }
    Ok(())
}

/// Cross-entropy of the softmax over the first `class_count` detected
/// intensities. Generic so the same code runs on plain values and on the
/// tape.
fn sample_loss<T: Real>(field: &[Complex<T>], class_count: usize, label: usize) -> T {
    let logits: Vec<T> = field[..class_count]
        .iter()
        .map(|z| z.modulus_sq())
        .collect();
    // shift by the largest logit as a constant; the gradient is unaffected
    let m = logits
        .iter()
        .map(|l| l.value())
        .fold(f64::NEG_INFINITY, f64::max);
    let sum = logits
        .iter()
        .fold(T::zero(), |acc, &l| acc + (l - T::from_f64(m)).exp());
    sum.ln() + T::from_f64(m) - logits[label]
}

/// `(loss, softmax scores)` for one encoded input.
pub fn loss_and_scores(
    model: &PNNModel,
    encoded_input: &[ComplexValue],
    label: usize,
    class_count: usize,
) -> Result<(f64, Vec<f64>)> {
    check_readout(model, class_count, label)?;
    let (y, _) = model.forward_field(encoded_input)?;
    let loss = sample_loss(&y, class_count, label);
    let logits: Vec<f64> = y[..class_count].iter().map(|z| z.modulus_sq()).collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok((loss, exps.iter().map(|e| e / total).collect()))
}

fn pad(input: &[ComplexValue], ports: usize) -> Result<Vec<ComplexValue>> {
    if input.len() > ports {
        return Err(Error::shape(
            ports,
            input.len(),
            "encoded inputs vs model ports",
        ));
    }
    let mut v = input.to_vec();
    v.resize(ports, Complex::zero());
    Ok(v)
}

/// Encode a dataset and zero-pad every row to the model's port count.
pub fn encode_padded(
    model: &PNNModel,
    spec: &EncodingSpec,
    x: &[Vec<f64>],
) -> Result<Vec<Vec<ComplexValue>>> {
    encode_dataset(x, spec)?
        .iter()
        .map(|row| pad(row, model.n_inputs))
        .collect()
}

fn batch_loss_on<T: Real>(
    net: &RealizedModel<T>,
    inputs: &[Vec<ComplexValue>],
    labels: &[usize],
    batch: &[usize],
    class_count: usize,
    mut per_sample: Option<&mut [f64]>,
) -> T {
    let mut total = T::zero();
    for &i in batch {
        let x: Vec<Complex<T>> = inputs[i].iter().map(|&z| Complex::lift(z)).collect();
        let (y, _) = net.field(&x);
        let l = sample_loss(&y, class_count, labels[i]);
        if let Some(slots) = per_sample.as_deref_mut() {
            slots[i] = l.value();
        }
        total = total + l;
    }
    total.scale(1.0 / batch.len() as f64)
}

/// Mean loss over `inputs` at an explicit parameter vector (no wrapping or
/// clipping). Inputs must already be encoded and padded.
pub fn mean_loss_at(
    model: &PNNModel,
    params: &[f64],
    inputs: &[Vec<ComplexValue>],
    labels: &[usize],
    class_count: usize,
) -> Result<f64> {
    validate_batch(model, params, inputs, labels, class_count)?;
    let all: Vec<usize> = (0..inputs.len()).collect();
    Ok(batch_loss_on(
        &model.realize(params),
        inputs,
        labels,
        &all,
        class_count,
        None,
    )
    .value())
}

/// Mean loss and its gradient with respect to every parameter, by reverse
/// mode on a fresh tape.
pub fn loss_gradient(
    model: &PNNModel,
    params: &[f64],
    inputs: &[Vec<ComplexValue>],
    labels: &[usize],
    class_count: usize,
) -> Result<(f64, Vec<f64>)> {
    validate_batch(model, params, inputs, labels, class_count)?;
    let all: Vec<usize> = (0..inputs.len()).collect();
    let mut tape = GradTape::new();
    grad_on_tape(
        &mut tape,
        model,
        params,
        inputs,
        labels,
        &all,
        class_count,
        None,
    )
    .map_err(|node| Error::Numeric { node })
}

fn validate_batch(
    model: &PNNModel,
    params: &[f64],
    inputs: &[Vec<ComplexValue>],
    labels: &[usize],
    class_count: usize,
) -> Result<()> {
    if params.len() != model.param_count() {
        return Err(Error::shape(
            model.param_count(),
            params.len(),
            "model parameters",
        ));
    }
    if inputs.len() != labels.len() {
        return Err(Error::shape(inputs.len(), labels.len(), "labels"));
    }
    if inputs.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    for (x, &l) in inputs.iter().zip(labels) {
        if x.len() != model.n_inputs {
            return Err(Error::shape(model.n_inputs, x.len(), "model input"));
        }
        check_readout(model, class_count, l)?;
    }
    Ok(())
}

/// Returns the index of the first non-finite tape node on failure.
#[allow(clippy::too_many_arguments)]
fn grad_on_tape(
    tape: &mut GradTape,
    model: &PNNModel,
    params: &[f64],
    inputs: &[Vec<ComplexValue>],
    labels: &[usize],
    batch: &[usize],
    class_count: usize,
    per_sample: Option<&mut [f64]>,
) -> std::result::Result<(f64, Vec<f64>), usize> {
    tape.clear();
    let tape = &*tape;
    let vars: Vec<Var> = tape.vars(params);
    let net = model.realize(&vars);
    let loss = batch_loss_on(&net, inputs, labels, batch, class_count, per_sample);
    if let Some(node) = tape.first_non_finite() {
        return Err(node);
    }
    let grad = tape.backward(loss).wrt_all(&vars);
    Ok((loss.value(), grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: PNNModel,
    /// Mean sample loss of each epoch, each sample measured just before the
    /// step that used it.
    pub loss_history: Vec<f64>,
}

struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Mini-batch training with a seeded shuffle each epoch. After every step
/// the parameters are loaded back through [`PNNModel::set_params`], which
/// wraps phases and clips gains into their physical ranges.
pub fn train(
    model: &PNNModel,
    data: &Dataset,
    spec: &EncodingSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("cannot train on an empty dataset".into()));
    }
    let inputs = encode_padded(model, spec, &data.x)?;
    for &l in &data.y {
        check_readout(model, data.class_count, l)?;
    }
    let mut model = model.clone();
    let mut params = model.params();
    let mut adam = match config.optimizer {
        Optimizer::Sgd => None,
        Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } => Some(Adam {
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
            t: 0,
        }),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut tape = GradTape::new();
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut sample_losses = vec![0.0; data.len()];

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (loss, grad) = grad_on_tape(
                &mut tape,
                &model,
                &params,
                &inputs,
                &data.y,
                batch,
                data.class_count,
                Some(&mut sample_losses),
            )
            .map_err(|node| Error::Diverged {
                epoch,
                message: format!("non-finite value at tape node {node}"),
            })?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    message: format!("loss {loss} or its gradient is not finite"),
                });
            }
            match adam.as_mut() {
                Some(adam) => adam.step(&mut params, &grad, config.learning_rate),
                None => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= config.learning_rate * g;
                    }
                }
            }
            model.set_params(&params).map_err(|e| Error::Diverged {
                epoch,
                message: e.to_string(),
            })?;
            params = model.params();
        }
        // summed in sample order so the value does not depend on the shuffle
        loss_history.push(sample_losses.iter().sum::<f64>() / data.len() as f64);
    }
    Ok(TrainOutcome {
        model,
        loss_history,
    })
}

/// Index of the largest of the first `class_count` intensities; ties go to
/// the lowest index.
pub fn predict(
    model: &PNNModel,
    encoded_input: &[ComplexValue],
    class_count: usize,
) -> Result<usize> {
    check_readout(model, class_count, 0)?;
    let (y, _) = model.forward_field(encoded_input)?;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (c, z) in y[..class_count].iter().enumerate() {
        let v = z.modulus_sq();
        if v > best_val {
            best = c;
            best_val = v;
        }
    }
    Ok(best)
}

/// Fraction of samples whose predicted class equals the label.
pub fn evaluate(model: &PNNModel, data: &Dataset, spec: &EncodingSpec) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let inputs = encode_padded(model, spec, &data.x)?;
    let mut correct = 0usize;
    for (x, &label) in inputs.iter().zip(&data.y) {
        if predict(model, x, data.class_count)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub encoding_id: String,
    pub pairing_id: String,
    pub seed: u64,
    pub final_train_accuracy: f64,
    pub test_accuracy: f64,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub encoding_id: String,
    pub pairing_id: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSummary {
    pub encoding_id: String,
    pub pairing_id: String,
    pub count: usize,
    pub failed: usize,
    pub mean: f64,
    /// Sample standard deviation (`n - 1`); zero for a single trial.
    pub std: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
    pub mean_train: f64,
}

impl EncodingSummary {
    pub fn label(&self) -> String {
        format!("{}[{}]", self.encoding_id, self.pairing_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    /// Sorted by mean test accuracy, best first.
    pub summary: Vec<EncodingSummary>,
}

/// Everything a trial needs besides the encoding and the seed.
#[derive(Debug, Clone, Copy)]
pub struct TrialSetup<'a> {
    pub data: &'a Dataset,
    pub arch: &'a ArchitectureConfig,
    pub train: &'a TrainConfig,
}

/// One trial: split with `seed`, sample a model from `seed`, train with
/// `seed` driving the shuffle, evaluate.
pub fn run_trial(setup: TrialSetup, spec: &EncodingSpec, seed: u64) -> Result<TrialRecord> {
    let (train_set, test_set) = split(setup.data, setup.train.train_fraction, seed)?;
    let ports = setup
        .arch
        .port_count(spec.n_inputs(), setup.data.class_count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let model = PNNModel::random(setup.arch, ports, &mut rng)?;
    let config = TrainConfig {
        seed,
        ..setup.train.clone()
    };
    let outcome = train(&model, &train_set, spec, &config)?;
    Ok(TrialRecord {
        encoding_id: spec.id(),
        pairing_id: spec.pairing.id(),
        seed,
        final_train_accuracy: evaluate(&outcome.model, &train_set, spec)?,
        test_accuracy: evaluate(&outcome.model, &test_set, spec)?,
        loss_history: outcome.loss_history,
    })
}

/// Run every encoding against every seed. Trial `t` of each encoding uses the
/// same split, initialization and shuffle seeds, so encodings are compared
/// pairwise. Trials run on the current rayon pool; results come back in
/// `(encoding, seed)` order regardless of scheduling.
pub fn run_trials(
    setup: TrialSetup,
    encodings: &[EncodingSpec],
    seeds: &[u64],
) -> Result<TrialReport> {
    if seeds.is_empty() {
        return Err(Error::Validation("need at least one seed".into()));
    }
    if encodings.is_empty() {
        return Err(Error::Validation("need at least one encoding".into()));
    }
    setup.train.validate()?;
    setup.arch.validate()?;
    let jobs: Vec<(usize, u64)> = (0..encodings.len())
        .flat_map(|e| seeds.iter().map(move |&s| (e, s)))
        .collect();
    let outcomes: Vec<Result<TrialRecord>> = jobs
        .par_iter()
        .map(|&(e, s)| run_trial(setup, &encodings[e], s))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(e, seed), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.push(r),
            Err(err) => failures.push(TrialFailure {
                encoding_id: encodings[e].id(),
                pairing_id: encodings[e].pairing.id(),
                seed,
                error: err.to_string(),
            }),
        }
    }
    let summary = summarize(encodings, &records, &failures);
    Ok(TrialReport {
        records,
        failures,
        summary,
    })
}

fn summarize(
    encodings: &[EncodingSpec],
    records: &[TrialRecord],
    failures: &[TrialFailure],
) -> Vec<EncodingSummary> {
    let mut seen: Vec<(String, String)> = Vec::new();
    for spec in encodings {
        let key = (spec.id(), spec.pairing.id());
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    let mut summary: Vec<EncodingSummary> = seen
        .into_iter()
        .map(|(encoding_id, pairing_id)| {
            let mine: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.encoding_id == encoding_id && r.pairing_id == pairing_id)
                .collect();
            let failed = failures
                .iter()
                .filter(|f| f.encoding_id == encoding_id && f.pairing_id == pairing_id)
                .count();
            let acc: Vec<f64> = mine.iter().map(|r| r.test_accuracy).collect();
            let train: Vec<f64> = mine.iter().map(|r| r.final_train_accuracy).collect();
            let stats = Stats::of(&acc);
            EncodingSummary {
                encoding_id,
                pairing_id,
                count: acc.len(),
                failed,
                mean: stats.mean,
                std: stats.std,
                stderr: stats.stderr,
                min: stats.min,
                max: stats.max,
                mean_train: Stats::of(&train).mean,
            }
        })
        .collect();
    summary.sort_by(|a, b| {
        b.mean
            .total_cmp(&a.mean)
            .then_with(|| a.label().cmp(&b.label()))
    });
    summary
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// NaN moments for an empty slice.
    pub fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                stderr: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            stderr: std / n.sqrt(),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Exact one-sided sign test of `a > b` over paired observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub mean_difference: f64,
    /// `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`; ties dropped.
    pub p_value: f64,
}

pub fn sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len(), "paired samples"));
    }
    if a.is_empty() {
        return Err(Error::Validation(
            "sign test needs at least one pair".into(),
        ));
    }
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Greater) => wins += 1,
            Some(std::cmp::Ordering::Less) => losses += 1,
            _ => ties += 1,
        }
    }
    let n = wins + losses;
    let p_value = if n == 0 {
        1.0
    } else {
        // ln C(n, k) accumulated term by term to stay in range for large n
        let ln_half_n = n as f64 * 0.5f64.ln();
        let mut ln_c = 0.0;
        let mut tail = 0.0;
        for k in 0..=n {
            if k > 0 {
                ln_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
            }
            if k >= wins {
                tail += (ln_c + ln_half_n).exp();
            }
        }
        tail.min(1.0)
    };
    let mean_difference = a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
    Ok(SignTest {
        wins,
        losses,
        ties,
        mean_difference,
        p_value,
    })
}

/// `encoding_id,pairing_id,seed,train_acc,test_acc`
pub fn results_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("encoding_id,pairing_id,seed,train_acc,test_acc\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.encoding_id, r.pairing_id, r.seed, r.final_train_accuracy, r.test_accuracy
        );
    }
    out
}

/// A row of a results CSV as read back.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub encoding_id: String,
    pub pairing_id: String,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "encoding_id,pairing_id,seed,train_acc,test_acc")) => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing results header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            Ok(ResultRow {
                encoding_id: f[0].to_string(),
                pairing_id: f[1].to_string(),
                seed: f[2].parse().map_err(|_| bad("seed"))?,
                train_acc: f[3].parse().map_err(|_| bad("train_acc"))?,
                test_acc: f[4].parse().map_err(|_| bad("test_acc"))?,
            })
        })
        .collect()
}

/// Test accuracies of one encoding, ordered by seed.
pub fn accuracies_for(
    records: &[TrialRecord],
    encoding_id: &str,
    pairing_id: &str,
) -> Vec<(u64, f64)> {
    let mut v: Vec<(u64, f64)> = records
        .iter()
        .filter(|r| r.encoding_id == encoding_id && r.pairing_id == pairing_id)
        .map(|r| (r.seed, r.test_accuracy))
        .collect();
    v.sort_by_key(|&(s, _)| s);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::encodings::{EncodingKind, FeaturePairing};

    fn toy() -> (PNNModel, Dataset, EncodingSpec) {
        let x = vec![
            vec![0.9, 0.1],
            vec![0.8, -0.2],
            vec![-0.7, 0.3],
            vec![-0.9, -0.1],
        ];
        let data = Dataset::new(x, vec![0, 0, 1, 1], 2, Provenance::Custom).unwrap();
        let spec =
            EncodingSpec::raw(EncodingKind::Independent, FeaturePairing::all_singles(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = PNNModel::random(&ArchitectureConfig::default(), 2, &mut rng).unwrap();
        (model, data, spec)
    }

    #[test]
    fn uniform_intensities_give_ln3() {
        let model = PNNModel::identity(3);
        let (loss, scores) = loss_and_scores(&model, &[Complex::one(); 3], 1, 3).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-15);
        assert!(scores.iter().all(|s| (s - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn dominant_intensity_drives_loss_down() {
        let model = PNNModel::identity(2);
        let mut last = f64::INFINITY;
        for a in [1.0, 2.0, 3.0, 5.0] {
            let (loss, scores) =
                loss_and_scores(&model, &[Complex::new(a, 0.0), Complex::zero()], 0, 2).unwrap();
            assert!(loss < last && scores[0] > 0.5);
            last = loss;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn label_out_of_range() {
        let model = PNNModel::identity(2);
        assert!(matches!(
            loss_and_scores(&model, &[Complex::one(); 2], 2, 2),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            loss_and_scores(&model, &[Complex::one(); 2], 0, 3),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (model, data, spec) = toy();
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 0.0,
            ..Default::default()
        };
        let out = train(&model, &data, &spec, &cfg).unwrap();
        assert_eq!(out.model, model);
        assert_eq!(out.loss_history.len(), 5);
        assert!(out.loss_history.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn single_sgd_step_is_minus_lr_gradient() {
        let (model, data, spec) = toy();
        let one = Dataset::new(vec![data.x[0].clone()], vec![0], 2, Provenance::Custom).unwrap();
        let lr = 1e-3;
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: lr,
            optimizer: Optimizer::Sgd,
            ..Default::default()
        };
        let inputs = encode_padded(&model, &spec, &one.x).unwrap();
        let (_, grad) = loss_gradient(&model, &model.params(), &inputs, &one.y, 2).unwrap();
        let out = train(&model, &one, &spec, &cfg).unwrap();
        let mut expected = model.clone();
        let stepped: Vec<f64> = model
            .params()
            .iter()
            .zip(&grad)
            .map(|(p, g)| p - lr * g)
            .collect();
        expected.set_params(&stepped).unwrap();
        assert_eq!(out.model.params(), expected.params());
    }

    #[test]
    fn constant_predictor_scores_one_third() {
        let mut model = PNNModel::identity(3);
        model.detection = crate::photonic::Detection::Intensity;
        let mut p = vec![0.0; model.param_count()];
        let n = p.len();
        p[n - 6] = 1.0; // bias of output 0
        model.set_params(&p).unwrap();
        let x: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 * 0.1, 0.0, 0.0]).collect();
        let y = vec![0, 1, 2, 0, 1, 2, 0, 1, 2];
        let data = Dataset::new(x, y, 3, Provenance::Custom).unwrap();
        let spec =
            EncodingSpec::raw(EncodingKind::Independent, FeaturePairing::all_singles(3)).unwrap();
        assert!((evaluate(&model, &data, &spec).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let model = PNNModel::identity(3);
        assert_eq!(predict(&model, &[Complex::one(); 3], 3).unwrap(), 0);
        let x = [Complex::zero(), Complex::one(), Complex::one()];
        assert_eq!(predict(&model, &x, 3).unwrap(), 1);
    }

    #[test]
    fn sign_test_values() {
        let t = sign_test(&[1.0, 1.0, 1.0, 1.0, 1.0], &[0.0; 5]).unwrap();
        assert_eq!((t.wins, t.losses), (5, 0));
        assert!((t.p_value - 1.0 / 32.0).abs() < 1e-15);
        let t = sign_test(&[1.0, 0.0, 0.5], &[0.0, 1.0, 0.5]).unwrap();
        assert_eq!((t.wins, t.losses, t.ties), (1, 1, 1));
        assert!((t.p_value - 0.75).abs() < 1e-15);
    }

    #[test]
    fn stats_single_value() {
        let s = Stats::of(&[0.7]);
        assert_eq!((s.mean, s.std, s.min, s.max), (0.7, 0.0, 0.7, 0.7));
    }

    #[test]
    fn results_csv_round_trip() {
        let r = TrialRecord {
            encoding_id: "linear".into(),
            pairing_id: "0-1_2-3".into(),
            seed: 4,
            final_train_accuracy: 0.9583333333333334,
            test_accuracy: 0.9,
            loss_history: vec![],
        };
        let rows = parse_results_csv(&results_csv(std::slice::from_ref(&r))).unwrap();
        assert_eq!(rows[0].seed, 4);
        assert_eq!(rows[0].train_acc, r.final_train_accuracy);
    }
}
