use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::metrics::{argmax_rows, error_rate, r_squared};
use crate::data::{Dataset, TargetValues};
use crate::error::{Error, Result};
use crate::nn::{Mode, Network, Task};
use crate::rng::{stream_rng, DROPOUT_STREAM, SHUFFLE_STREAM};

const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dropout_rate: f64,
    pub task: Task,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            epochs: 40,
            batch_size: 64,
            seed: 0,
            dropout_rate: 0.0,
            task: Task::Regression,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must be in [0, 1)".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("Adam epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the per-batch losses.
    pub train_loss: f64,
    /// Error rate (classification) or R² (regression) on the held-out set.
    pub eval_metric: Option<f64>,
    pub wall_ms: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n: usize,
    pub loss: f64,
    pub error_rate: Option<f64>,
    pub r_squared: Option<f64>,
    pub rmse: Option<f64>,
}

impl EvalMetrics {
    /// The headline number for the task.
    pub fn primary(&self) -> f64 {
        self.error_rate.or(self.r_squared).unwrap_or(f64::NAN)
    }
}

pub fn train(
    net: &mut Network,
    train_data: &Dataset,
    eval_data: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<History> {
    train_with(net, train_data, eval_data, cfg, |_| {})
}

/// Seeded mini-batch Adam. Data order and dropout masks come from separate
/// streams of `cfg.seed`, so the run is a pure function of its inputs.
pub fn train_with<F: FnMut(&EpochRecord)>(
    net: &mut Network,
    train_data: &Dataset,
    eval_data: Option<&Dataset>,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<History> {
    cfg.validate()?;
    if cfg.task != net.task() {
        return Err(Error::Config(
            "training task does not match the network".into(),
        ));
    }
    if cfg.dropout_rate != net.config().dropout_rate {
        return Err(Error::Config(format!(
            "training dropout {} differs from the network's {}",
            cfg.dropout_rate,
            net.config().dropout_rate
        )));
    }
    let m = train_data.n_obs();
    if m == 0 {
        return Err(Error::Dimension("training set is empty".into()));
    }
    check_targets(net.task(), train_data.targets())?;
    let batch_size = if cfg.batch_size > m {
        log::warn!(
            "batch size {} exceeds {m} observations; clamping",
            cfg.batch_size
        );
        m
    } else {
        cfg.batch_size
    };

    let adam = cfg.adam();
    let names = net.parameter_names();
    let mut state = AdamState::new(&net.parameters());
    let mut shuffle_rng = stream_rng(cfg.seed, SHUFFLE_STREAM);
    let mut dropout_rng = stream_rng(cfg.seed, DROPOUT_STREAM);
    let mut history = History::default();
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for rows in order.chunks(batch_size) {
            let (x, targets) = train_data.batch(rows);
            let (out, trace) = net.forward(&x, Mode::Train, &mut dropout_rng)?;
            if !out.all_finite() {
                return Err(Error::NonFinite {
                    layer: "network output".into(),
                    batch: step,
                });
            }
            let head = net.loss(&out, targets.as_targets())?;
            if !head.loss.is_finite() {
                return Err(Error::NonFinite {
                    layer: "loss".into(),
                    batch: step,
                });
            }
            let grads = net.backward(&trace, &head.grad)?;
            if let Some(i) = grads.params.iter().position(|g| !g.all_finite()) {
                return Err(Error::NonFinite {
                    layer: names[i].clone(),
                    batch: step,
                });
            }
            adam_step(&mut net.parameters_mut(), &grads.params, &mut state, &adam)?;
            loss_sum += head.loss;
            n_batches += 1;
            step += 1;
        }
        let eval_metric = match eval_data {
            Some(d) => Some(evaluate(net, d)?.primary()),
            None => None,
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            eval_metric,
            wall_ms: start.elapsed().as_millis() as u64,
            seed: cfg.seed,
        };
        log::info!(
            "epoch {epoch}: train loss {:.6}, eval {:?}",
            record.train_loss,
            record.eval_metric
        );
        on_epoch(&record);
        history.records.push(record);
    }
    Ok(history)
}

fn check_targets(task: Task, targets: &TargetValues) -> Result<()> {
    match (task, targets) {
        (Task::Classification { classes }, TargetValues::Classes(c)) => {
            if let Some(&bad) = c.iter().find(|&&l| l >= classes) {
                return Err(Error::InvalidValue(format!(
                    "label {bad} outside 0..{classes}"
                )));
            }
            Ok(())
        }
        (Task::Regression, TargetValues::Values(_)) => Ok(()),
        _ => Err(Error::Config(
            "dataset targets do not match the network task".into(),
        )),
    }
}

/// Eval-mode loss and task metrics over the whole dataset.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<EvalMetrics> {
    let m = data.n_obs();
    if m == 0 {
        return Err(Error::Dimension("evaluation set is empty".into()));
    }
    check_targets(net.task(), data.targets())?;
    let rows: Vec<usize> = (0..m).collect();
    let mut outputs = Vec::with_capacity(m * net.task().n_outputs());
    for chunk in rows.chunks(EVAL_CHUNK) {
        let (x, _) = data.batch(chunk);
        outputs.extend_from_slice(net.predict(&x)?.data());
    }
    let out = crate::tensor::Tensor::new(&[m, net.task().n_outputs()], outputs)?;
    let head = net.loss(&out, data.targets().as_targets())?;
    match data.targets() {
        TargetValues::Classes(labels) => Ok(EvalMetrics {
            n: m,
            loss: head.loss,
            error_rate: Some(error_rate(&argmax_rows(&out), labels)?),
            r_squared: None,
            rmse: None,
        }),
        TargetValues::Values(values) => Ok(EvalMetrics {
            n: m,
            loss: head.loss,
            error_rate: None,
            r_squared: Some(if m >= 2 {
                r_squared(out.data(), values)?
            } else {
                0.0
            }),
            rmse: Some(head.loss),
        }),
    }
}

/// Writes one JSON object per epoch.
pub fn write_jsonl(history: &History, path: &Path) -> Result<()> {
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for r in &history.records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}
