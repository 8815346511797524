//! Local mini-batch SGD.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::LocalObjective;
use super::FlError;

/// Local training schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingHyperparams {
    /// Number of SGD steps per round (`I`).
    pub local_steps: usize,
    /// Mini-batch size (`b`); capped at the shard size.
    pub batch_size: usize,
    /// Learning rate (`eta`).
    pub learning_rate: f64,
}

/// A client's model change after one round of local training.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub client: usize,
    pub round: usize,
    pub delta: Vec<f64>,
    /// Mean mini-batch loss over the local steps.
    pub mean_loss: f64,
}

/// Runs `local_steps` SGD steps from `start` and returns `theta_I - theta_0`.
/// Batches are drawn without replacement; the shard is reshuffled whenever
/// fewer than a full batch remains.
pub fn local_sgd<O: LocalObjective + ?Sized, R: Rng + ?Sized>(
    client: usize,
    round: usize,
    start: &[f64],
    objective: &O,
    hp: &TrainingHyperparams,
    rng: &mut R,
) -> Result<LocalUpdate, FlError> {
    let n = objective.num_samples();
    if n == 0 {
        return Err(FlError::EmptyShard { client });
    }
    if start.len() != objective.dim() {
        return Err(FlError::Shape(format!("{} parameters for a model of {}", start.len(), objective.dim())));
    }
    let bs = hp.batch_size.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pos = 0;
    let mut params = start.to_vec();
    let mut grad = vec![0.0; params.len()];
    let mut loss_sum = 0.0;
    for step in 0..hp.local_steps {
        if pos + bs > n {
            order.shuffle(rng);
            pos = 0;
        }
        let loss = objective.loss_and_grad(&params, &order[pos..pos + bs], &mut grad);
        pos += bs;
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= hp.learning_rate * g;
        }
        if !loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(FlError::NumericalDivergence { client, step });
        }
        loss_sum += loss;
    }
    let delta = params.iter().zip(start).map(|(p, s)| p - s).collect();
    Ok(LocalUpdate { client, round, delta, mean_loss: loss_sum / hp.local_steps.max(1) as f64 })
}
