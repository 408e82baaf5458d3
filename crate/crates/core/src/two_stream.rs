//! Human-pose (HP) and object-augmented (OHP) streams, object gating, score
//! fusion, and the training and evaluation loops.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{argmax, cross_entropy, GcnModel, Gradients, Sgd, Tensor3};
use crate::graph::PartitionedAdjacency;

pub const DEFAULT_GATE_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fusion {
    #[default]
    Average,
    Maximum,
}

impl FromStr for Fusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(Self::Average),
            "max" => Ok(Self::Maximum),
            _ => Err(Error::Config(format!("unknown fusion rule '{s}'"))),
        }
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Average => "avg",
            Self::Maximum => "max",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Streams {
    #[serde(rename = "HP")]
    Hp,
    #[serde(rename = "HP+OHP")]
    HpOhp,
}

impl fmt::Display for Streams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hp => "HP",
            Self::HpOhp => "HP+OHP",
        })
    }
}

/// Uses the object stream iff an object was found in at least `theta` of the
/// sampled frames. No detections always gives HP.
pub fn gate(object_present: &[bool], theta: f64) -> Streams {
    let hits = object_present.iter().filter(|&&b| b).count();
    if hits == 0 || object_present.is_empty() {
        return Streams::Hp;
    }
    if hits as f64 / object_present.len() as f64 >= theta {
        Streams::HpOhp
    } else {
        Streams::Hp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
    pub streams_used: Streams,
}

/// Combines two probability vectors. Maximum fusion renormalizes the
/// elementwise maximum.
pub fn fuse(p_hp: &[f64], p_ohp: &[f64], fusion: Fusion) -> Result<Prediction> {
    if p_hp.len() != p_ohp.len() || p_hp.is_empty() {
        return Err(Error::ShapeMismatch(format!("cannot fuse {} and {} class scores", p_hp.len(), p_ohp.len())));
    }
    let probabilities: Vec<f64> = match fusion {
        Fusion::Average => p_hp.iter().zip(p_ohp).map(|(a, b)| (a + b) / 2.0).collect(),
        Fusion::Maximum => {
            let m: Vec<f64> = p_hp.iter().zip(p_ohp).map(|(a, b)| a.max(*b)).collect();
            let s: f64 = m.iter().sum();
            m.iter().map(|v| v / s).collect()
        }
    };
    let predicted_class = argmax(&probabilities);
    Ok(Prediction { probabilities, predicted_class, streams_used: Streams::HpOhp })
}

/// One stream's network input and the clip's normalized adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamInput {
    pub tensor: Tensor3,
    pub adjacency: PartitionedAdjacency,
    /// Mean pixel position of each node relative to the gravity center.
    pub mean_pose: Vec<Option<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub clip_id: String,
    pub label: usize,
    pub hp: StreamInput,
    /// Object-augmented input, present whenever an object graph was built.
    pub ohp: Option<StreamInput>,
    /// Gate decision from the sampled frames.
    pub streams: Streams,
}

#[derive(Debug, Clone)]
pub struct TwoStreamModel {
    pub hp: GcnModel,
    pub ohp: Option<GcnModel>,
    pub fusion: Fusion,
}

impl TwoStreamModel {
    pub fn num_classes(&self) -> usize {
        self.hp.num_classes()
    }

    pub fn predict(&self, sample: &Sample) -> Result<Prediction> {
        let p_hp = self.hp.predict(&sample.hp.tensor, &sample.hp.adjacency)?;
        match (&self.ohp, &sample.ohp, sample.streams) {
            (Some(model), Some(input), Streams::HpOhp) => {
                let p_ohp = model.predict(&input.tensor, &input.adjacency)?;
                fuse(&p_hp, &p_ohp, self.fusion)
            }
            _ => Ok(Prediction { predicted_class: argmax(&p_hp), probabilities: p_hp, streams_used: Streams::Hp }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// The learning rate is multiplied by `decay_factor` every `decay_every` epochs.
    pub decay_every: usize,
    pub decay_factor: f64,
    pub seed: u64,
    /// Train the object stream on every clip instead of gated clips only.
    pub ohp_on_all_clips: bool,
    /// Evaluate the held-out split every this many epochs; 0 means only after
    /// the last epoch.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            lr: 0.01,
            momentum: 0.9,
            decay_every: 30,
            decay_factor: 0.1,
            seed: 0,
            ohp_on_all_clips: false,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.decay_every == 0 {
            return Err(Error::Config("epochs, batch_size and decay_every must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("invalid lr={} momentum={}", self.lr, self.momentum)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Config(format!("decay_factor must be in (0, 1], got {}", self.decay_factor)));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.decay_factor.powi((epoch / self.decay_every) as i32)
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub stream: String,
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub top1: f64,
}

pub fn metrics_to_jsonl(history: &[EpochMetrics]) -> String {
    history.iter().map(|m| serde_json::to_string(m).expect("metrics serialize") + "\n").collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub top1: f64,
    pub loss: f64,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<usize>>,
}

fn evaluation_from(results: &[(usize, Vec<f64>)], num_classes: usize) -> Result<Evaluation> {
    if results.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut confusion = vec![vec![0; num_classes]; num_classes];
    let mut loss = 0.0;
    let mut correct = 0;
    for (label, probs) in results {
        let pred = argmax(probs);
        if *label >= num_classes {
            return Err(Error::IndexOutOfRange { index: *label, len: num_classes });
        }
        confusion[*label][pred] += 1;
        correct += usize::from(pred == *label);
        loss += cross_entropy(probs, *label)?;
    }
    Ok(Evaluation { top1: correct as f64 / results.len() as f64, loss: loss / results.len() as f64, confusion })
}

/// Accuracy of a single stream on `(input, label)` pairs.
pub fn evaluate_stream(model: &GcnModel, data: &[(&StreamInput, usize)]) -> Result<Evaluation> {
    let results =
        data.par_iter().map(|(input, label)| Ok((*label, model.predict(&input.tensor, &input.adjacency)?))).collect::<Result<Vec<_>>>()?;
    evaluation_from(&results, model.num_classes())
}

/// Accuracy of the gated two-stream prediction.
pub fn evaluate(model: &TwoStreamModel, samples: &[Sample]) -> Result<Evaluation> {
    let results = samples.par_iter().map(|s| Ok((s.label, model.predict(s)?.probabilities))).collect::<Result<Vec<_>>>()?;
    evaluation_from(&results, model.num_classes())
}

/// Mini-batch SGD on one stream. Gradients of a batch are computed in
/// parallel and summed in sample order.
pub fn train_stream(
    model: &mut GcnModel,
    train: &[(&StreamInput, usize)],
    held_out: &[(&StreamInput, usize)],
    config: &TrainConfig,
    stream: &str,
) -> Result<(Sgd, Vec<EpochMetrics>)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut opt = Sgd::new(model, config.lr, config.momentum)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    for epoch in 0..config.epochs {
        opt.lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let frozen = &*model;
            let per_sample = batch
                .par_iter()
                .map(|&i| {
                    let (input, label) = train[i];
                    frozen.loss_and_grads(&input.tensor, &input.adjacency, label)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut total = Gradients::zeros_like(model);
            for (&i, (loss, grads, predicted)) in batch.iter().zip(&per_sample) {
                loss_sum += loss;
                correct += usize::from(*predicted == train[i].1);
                total.add_assign(grads);
            }
            total.scale(1.0 / batch.len() as f64);
            opt.step(model, &total);
        }
        let n = train.len() as f64;
        history.push(EpochMetrics {
            stream: stream.into(),
            epoch: epoch + 1,
            split: "train".into(),
            loss: loss_sum / n,
            top1: correct as f64 / n,
        });
        let last = epoch + 1 == config.epochs;
        let due = config.eval_every > 0 && (epoch + 1) % config.eval_every == 0;
        if !held_out.is_empty() && (last || due) {
            let ev = evaluate_stream(model, held_out)?;
            history.push(EpochMetrics { stream: stream.into(), epoch: epoch + 1, split: "test".into(), loss: ev.loss, top1: ev.top1 });
        }
    }
    Ok((opt, history))
}

/// Optimizer state of each stream after training.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub hp: Sgd,
    pub ohp: Option<Sgd>,
    pub history: Vec<EpochMetrics>,
}

/// Trains both streams independently, then records the fused held-out
/// accuracy. The object stream sees only gated clips unless configured
/// otherwise.
pub fn train(model: &mut TwoStreamModel, train_set: &[Sample], held_out: &[Sample], config: &TrainConfig) -> Result<TrainState> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hp_train: Vec<_> = train_set.iter().map(|s| (&s.hp, s.label)).collect();
    let hp_test: Vec<_> = held_out.iter().map(|s| (&s.hp, s.label)).collect();
    let (hp_opt, mut history) = train_stream(&mut model.hp, &hp_train, &hp_test, config, "hp")?;

    let mut ohp_opt = None;
    if let Some(ohp) = &mut model.ohp {
        fn pick(s: &Sample, all: bool) -> Option<&StreamInput> {
            s.ohp.as_ref().filter(|_| all || s.streams == Streams::HpOhp)
        }
        let all = config.ohp_on_all_clips;
        let ohp_train: Vec<_> = train_set.iter().filter_map(|s| pick(s, all).map(|i| (i, s.label))).collect();
        let ohp_test: Vec<_> = held_out.iter().filter_map(|s| pick(s, all).map(|i| (i, s.label))).collect();
        if !ohp_train.is_empty() {
            let cfg = TrainConfig { seed: config.seed.wrapping_add(1), ..config.clone() };
            let (opt, h) = train_stream(ohp, &ohp_train, &ohp_test, &cfg, "ohp")?;
            ohp_opt = Some(opt);
            history.extend(h);
        }
    }
    if !held_out.is_empty() {
        let ev = evaluate(model, held_out)?;
        history.push(EpochMetrics { stream: "fused".into(), epoch: config.epochs, split: "test".into(), loss: ev.loss, top1: ev.top1 });
    }
    Ok(TrainState { hp: hp_opt, ohp: ohp_opt, history })
}
