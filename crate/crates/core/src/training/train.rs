use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use funssl_autograd::{adam_update, AdamState, Graph, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::pit::{pit_mse, pit_mse_value};
use super::Sample;
use crate::error::{Error, Result};
use crate::network::{model_forward, read_container, write_container, Checkpoint, Model};

pub const LOSS_CSV: &str = "loss.csv";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const TRAIN_STATE: &str = "train_state.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Multiplicative learning-rate decay per epoch.
    pub decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Global gradient-norm clip; off when `None`.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            decay: 0.95,
            epochs: 200,
            batch_size: 8,
            seed: 0,
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.lr0 > 0.0 && self.decay > 0.0 && self.batch_size > 0;
        if !positive || self.max_grad_norm.is_some_and(|m| m <= 0.0) {
            return Err(Error::Config(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        self.lr0 * self.decay.powi(epoch as i32)
    }

    pub fn steps_per_epoch(&self, n_samples: usize) -> usize {
        n_samples.div_ceil(self.batch_size)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// One row of the loss log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: u64,
    pub split: Split,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub lr: f64,
    /// Mean of the batch losses, each taken before its update.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub improved: bool,
}

/// Mean PIT-MSE of `model` over `samples`.
pub fn evaluate_loss(model: &Model, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Input("no samples to evaluate".into()));
    }
    let q = model.config.n_sources;
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let pred = model.infer(&s.features)?;
            Ok(pit_mse_value(&pred, &s.target, q)?.0 as f64)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

struct SampleGrad {
    loss: f32,
    max_output: f32,
    grads: Vec<Tensor<f32>>,
}

fn sample_gradient(model: &Model, s: &Sample) -> Result<SampleGrad> {
    let mut g = Graph::new();
    let p = model.params.bind(&mut g, true);
    let x = g.constant(s.features.clone());
    let y = model_forward(&mut g, &model.config, &p, x)?;
    let (l, _) = pit_mse(&mut g, y, &s.target, model.config.n_sources)?;
    let loss = g.value(l).data()[0];
    let max_output = g.value(y).max_abs();
    if !loss.is_finite() {
        return Ok(SampleGrad {
            loss,
            max_output,
            grads: Vec::new(),
        });
    }
    let mut grads = g.backward(l)?;
    let grads = p
        .vars
        .iter()
        .zip(&model.params.tensors)
        .map(|(&v, t)| grads.take_or_zeros(v, t.shape()))
        .collect();
    Ok(SampleGrad {
        loss,
        max_output,
        grads,
    })
}

/// Model, optimizer and progress of one training run.
pub struct Trainer {
    pub model: Model,
    pub config: TrainConfig,
    pub adam: AdamState<f32>,
    /// Completed epochs.
    pub epoch: usize,
    pub step: u64,
    pub best: Option<f64>,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = AdamState::new(&model.params.tensors);
        Ok(Self {
            model,
            config,
            adam,
            epoch: 0,
            step: 0,
            best: None,
        })
    }

    /// Sample order for `epoch`, a function of the seed and the epoch only.
    pub fn epoch_order(&self, n: usize, epoch: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx
    }

    /// Batch-mean loss and gradient, with the parameters unchanged.
    pub fn batch_gradient(&self, batch: &[&Sample]) -> Result<(f64, Vec<Tensor<f32>>)> {
        let per: Vec<SampleGrad> = batch
            .par_iter()
            .map(|s| sample_gradient(&self.model, s))
            .collect::<Result<_>>()?;
        if let Some((i, bad)) = per.iter().enumerate().find(|(_, s)| !s.loss.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite loss on sample {} at step {} (max |output| {})",
                batch[i].id, self.step, bad.max_output
            )));
        }
        let scale = 1.0 / batch.len() as f32;
        let mut total: Vec<Tensor<f32>> = self.model.params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect();
        for s in &per {
            for (acc, g) in total.iter_mut().zip(&s.grads) {
                acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, &b)| *a += b);
            }
        }
        for t in &mut total {
            t.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        let loss = per.iter().map(|s| s.loss as f64).sum::<f64>() / batch.len() as f64;
        Ok((loss, total))
    }

    /// One optimizer step on `batch`; returns the loss before the update.
    pub fn train_step(&mut self, batch: &[&Sample], lr: f64) -> Result<f64> {
        let (loss, mut grads) = self.batch_gradient(batch)?;
        if let Some(max) = self.config.max_grad_norm {
            let norm = grads
                .iter()
                .flat_map(|t| t.data())
                .map(|&v| (v as f64) * (v as f64))
                .sum::<f64>()
                .sqrt();
            if norm > max {
                let k = (max / norm) as f32;
                grads.iter_mut().for_each(|t| t.data_mut().iter_mut().for_each(|v| *v *= k));
            }
        }
        adam_update(&mut self.model.params.tensors, &grads, &mut self.adam, lr)
            .map_err(|e| Error::Numerical(format!("optimizer step {}: {e}", self.step)))?;
        self.step += 1;
        Ok(loss)
    }

    /// Runs the next epoch over `train`, returning the per-step loss records.
    pub fn run_epoch(&mut self, train: &[Sample]) -> Result<Vec<LossRecord>> {
        if train.is_empty() {
            return Err(Error::Input("empty training set".into()));
        }
        let epoch = self.epoch;
        let lr = self.config.lr(epoch);
        let order = self.epoch_order(train.len(), epoch);
        let mut records = Vec::with_capacity(self.config.steps_per_epoch(train.len()));
        for idx in order.chunks(self.config.batch_size) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &train[i]).collect();
            let loss = self.train_step(&batch, lr)?;
            records.push(LossRecord {
                epoch,
                step: self.step,
                split: Split::Train,
                loss,
                lr,
            });
        }
        self.epoch += 1;
        Ok(records)
    }

    /// Trains until `config.epochs` epochs are complete. With `out`, appends to
    /// the loss CSV and refreshes the last/best checkpoints and optimizer state
    /// after every epoch. The best checkpoint follows the validation loss, or
    /// the training loss when no validation set is given.
    pub fn fit(
        &mut self,
        train: &[Sample],
        val: Option<&[Sample]>,
        out: Option<&Path>,
        mut on_epoch: impl FnMut(&EpochSummary),
    ) -> Result<Vec<EpochSummary>> {
        if let Some(dir) = out {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let csv = dir.join(LOSS_CSV);
            if self.epoch == 0 || !csv.exists() {
                std::fs::write(&csv, "epoch,step,split,loss,lr\n").map_err(|e| Error::io(&csv, e))?;
            }
        }
        let mut summaries = Vec::new();
        while self.epoch < self.config.epochs {
            let mut records = self.run_epoch(train)?;
            let epoch = self.epoch - 1;
            let lr = self.config.lr(epoch);
            let train_loss = records.iter().map(|r| r.loss).sum::<f64>() / records.len() as f64;
            let val_loss = val.map(|v| evaluate_loss(&self.model, v)).transpose()?;
            if let Some(v) = val_loss {
                records.push(LossRecord {
                    epoch,
                    step: self.step,
                    split: Split::Val,
                    loss: v,
                    lr,
                });
            }
            let criterion = val_loss.unwrap_or(train_loss);
            let improved = self.best.is_none_or(|b| criterion < b);
            if improved {
                self.best = Some(criterion);
            }
            if let Some(dir) = out {
                append_records(&dir.join(LOSS_CSV), &records)?;
                let extra = json!({ "epoch": self.epoch, "step": self.step, "loss": criterion });
                Checkpoint::save(&self.model, &dir.join(LAST_CHECKPOINT), extra.clone())?;
                if improved {
                    Checkpoint::save(&self.model, &dir.join(BEST_CHECKPOINT), extra)?;
                }
                self.save_state(&dir.join(TRAIN_STATE))?;
            }
            let summary = EpochSummary {
                epoch,
                lr,
                train_loss,
                val_loss,
                improved,
            };
            on_epoch(&summary);
            summaries.push(summary);
        }
        Ok(summaries)
    }

    /// Optimizer moments and progress counters.
    pub fn save_state(&self, path: &Path) -> Result<()> {
        let meta = json!({
            "format": "funssl-train-state",
            "config": self.config,
            "epoch": self.epoch,
            "step": self.step,
            "best": self.best,
            "adam_step": self.adam.step,
            "beta1": self.adam.beta1,
            "beta2": self.adam.beta2,
            "eps": self.adam.eps,
        });
        let names: Vec<(String, String)> = self
            .model
            .params
            .names
            .iter()
            .map(|n| (format!("m.{n}"), format!("v.{n}")))
            .collect();
        let mut tensors = Vec::with_capacity(2 * names.len());
        for ((m_name, v_name), (m, v)) in names.iter().zip(self.adam.m.iter().zip(&self.adam.v)) {
            tensors.push((m_name.as_str(), m));
            tensors.push((v_name.as_str(), v));
        }
        write_container(path, meta, &tensors)
    }

    /// Continues a run from the files `fit` wrote into `dir`. The stored
    /// training configuration is used unless `config` overrides it.
    pub fn resume(dir: &Path, config: Option<TrainConfig>) -> Result<Self> {
        let (model, _) = Checkpoint::load(&dir.join(LAST_CHECKPOINT))?;
        let path = dir.join(TRAIN_STATE);
        let (meta, tensors) = read_container(&path)?;
        if meta.get("format").and_then(|v| v.as_str()) != Some("funssl-train-state") {
            return Err(Error::format(&path, "not a training state file"));
        }
        let field = |k: &str| meta.get(k).cloned().ok_or_else(|| Error::format(&path, format!("missing {k}")));
        let parse = |k: &str| -> Result<f64> {
            field(k)?.as_f64().ok_or_else(|| Error::format(&path, format!("{k} is not a number")))
        };
        let stored: TrainConfig =
            serde_json::from_value(field("config")?).map_err(|e| Error::format(&path, format!("config: {e}")))?;
        let n = model.params.len();
        if tensors.len() != 2 * n {
            return Err(Error::format(&path, format!("{} moment tensors for {n} parameters", tensors.len())));
        }
        let mut m = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for (i, pair) in tensors.chunks_exact(2).enumerate() {
            let name = &model.params.names[i];
            let shape = model.params.tensors[i].shape();
            if pair[0].0 != format!("m.{name}") || pair[1].0 != format!("v.{name}") {
                return Err(Error::format(&path, format!("moments out of order at {name}")));
            }
            if pair[0].1.shape() != shape || pair[1].1.shape() != shape {
                return Err(Error::format(&path, format!("moment shape mismatch for {name}")));
            }
            m.push(pair[0].1.clone());
            v.push(pair[1].1.clone());
        }
        let adam = AdamState {
            m,
            v,
            step: parse("adam_step")? as u64,
            beta1: parse("beta1")?,
            beta2: parse("beta2")?,
            eps: parse("eps")?,
        };
        let config = config.unwrap_or(stored);
        config.validate()?;
        Ok(Self {
            model,
            config,
            adam,
            epoch: parse("epoch")? as usize,
            step: parse("step")? as u64,
            best: field("best")?.as_f64(),
        })
    }
}

fn append_records(path: &Path, records: &[LossRecord]) -> Result<()> {
    let mut s = String::new();
    for r in records {
        let split = match r.split {
            Split::Train => "train",
            Split::Val => "val",
        };
        writeln!(s, "{},{},{split},{},{}", r.epoch, r.step, r.loss, r.lr).expect("string write");
    }
    let mut f = OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?;
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}
