use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_with_grad, Grads, ModelInput, NeuralError, VisionTapas};
use crate::qa::SupervisionTarget;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainExample {
    pub input: ModelInput,
    pub target: SupervisionTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Weight of the cell-selection term in the loss.
    pub cell_loss_weight: f64,
    /// Linear warmup length in steps.
    pub warmup_steps: usize,
    /// Learning rate at the last step as a fraction of `learning_rate`;
    /// decays linearly after warmup.
    pub final_lr_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            cell_loss_weight: 1.0,
            warmup_steps: 0,
            final_lr_fraction: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub op_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<LossPoint>,
    pub steps: usize,
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &VisionTapas) -> Self {
        let z = model.params().zeros_like().0;
        Self { m: z.clone(), v: z, t: 0 }
    }

    fn step(&mut self, model: &mut VisionTapas, g: &Grads, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.adam_eps);
        for i in 0..self.m.len() {
            let p = model.params_mut().get_mut(i);
            Zip::from(p)
                .and(&mut self.m[i])
                .and(&mut self.v[i])
                .and(g.get(i))
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn lr_at(step: usize, total: usize, cfg: &TrainConfig) -> f64 {
    if step < cfg.warmup_steps {
        return cfg.learning_rate * (step + 1) as f64 / cfg.warmup_steps as f64;
    }
    let span = total.saturating_sub(cfg.warmup_steps).max(1) as f64;
    let frac = (step - cfg.warmup_steps) as f64 / span;
    cfg.learning_rate * (1.0 - frac * (1.0 - cfg.final_lr_fraction))
}

/// Mean loss and op accuracy over `data` without updating the model.
pub fn evaluate(model: &VisionTapas, data: &[TrainExample], lambda: f64) -> Result<(f64, f64), NeuralError> {
    let mut total = 0.0;
    let mut hits = 0;
    for ex in data {
        let out = model.forward(&ex.input)?;
        total += super::loss(&out, &ex.target, lambda).total;
        hits += usize::from(argmax(&out.op_logits) == ex.target.op.index());
    }
    let n = data.len().max(1) as f64;
    Ok((total / n, hits as f64 / n))
}

pub fn train(
    model: &mut VisionTapas,
    train_set: &[TrainExample],
    validation: &[TrainExample],
    cfg: &TrainConfig,
) -> Result<TrainReport, NeuralError> {
    train_with(model, train_set, validation, cfg, |_| {})
}

/// Adam on shuffled mini-batches. `on_point` sees each curve point as soon as
/// it is computed.
pub fn train_with(
    model: &mut VisionTapas,
    train_set: &[TrainExample],
    validation: &[TrainExample],
    cfg: &TrainConfig,
    mut on_point: impl FnMut(&LossPoint),
) -> Result<TrainReport, NeuralError> {
    if train_set.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let batch = cfg.batch_size.max(1);
    let batches_per_epoch = train_set.len().div_ceil(batch);
    let total_steps = batches_per_epoch * cfg.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curve = Vec::new();
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut hits = 0;
        for chunk in order.chunks(batch) {
            let mut g = model.params().zeros_like();
            for &i in chunk {
                let ex = &train_set[i];
                let (out, cache) = model.forward_cached(&ex.input)?;
                let (l, dl, dc) = loss_with_grad(&out, &ex.target, cfg.cell_loss_weight);
                if !l.total.is_finite() {
                    return Err(NeuralError::DivergedLoss { step, value: l.total });
                }
                epoch_loss += l.total;
                hits += usize::from(argmax(&out.op_logits) == ex.target.op.index());
                g.add_assign(&model.backward(&ex.input, &cache, &dl, &dc));
            }
            g.scale(1.0 / chunk.len() as f64);
            adam.step(model, &g, lr_at(step, total_steps, cfg), cfg);
            step += 1;
        }
        let n = train_set.len() as f64;
        let point = LossPoint {
            epoch,
            split: Split::Train,
            loss: epoch_loss / n,
            op_acc: hits as f64 / n,
        };
        on_point(&point);
        curve.push(point);
        if !validation.is_empty() {
            let (loss, op_acc) = evaluate(model, validation, cfg.cell_loss_weight)?;
            let point = LossPoint {
                epoch,
                split: Split::Validation,
                loss,
                op_acc,
            };
            on_point(&point);
            curve.push(point);
        }
    }
    if !model.params().all_finite() {
        return Err(NeuralError::DivergedLoss {
            step,
            value: f64::NAN,
        });
    }
    Ok(TrainReport { curve, steps: step })
}

/// CSV with columns `epoch,split,loss,op_acc`.
pub fn write_loss_curve<W: std::io::Write>(points: &[LossPoint], w: W) -> Result<(), NeuralError> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(p).map_err(|e| NeuralError::Io(std::io::Error::other(e)))?;
    }
    out.flush()?;
    Ok(())
}
