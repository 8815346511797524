//! Server-side aggregation rules and model evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::model::{log_sum_exp, Classifier};
use super::FlError;

/// Reference aggregation rules compared against the coded scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    /// Every update arrives; average over all `M`.
    QflIdeal,
    /// The PS cannot tell who arrived and divides by `M` regardless.
    Anon,
    /// The PS knows who arrived and averages over that set.
    NonAnon,
}

fn sum_in_client_order(updates: &BTreeMap<usize, Vec<f64>>, dim: usize) -> Result<Vec<f64>, FlError> {
    let mut acc = vec![0.0; dim];
    for (client, u) in updates {
        if u.len() != dim {
            return Err(FlError::Shape(format!("update of client {client} has length {}, expected {dim}", u.len())));
        }
        for (a, v) in acc.iter_mut().zip(u) {
            *a += v;
        }
    }
    Ok(acc)
}

fn divided(mut v: Vec<f64>, n: usize) -> Vec<f64> {
    let n = n as f64;
    for x in &mut v {
        *x /= n;
    }
    v
}

fn common_dim(updates: &BTreeMap<usize, Vec<f64>>) -> Option<usize> {
    updates.values().next().map(Vec::len)
}

/// `(1/|W|) sum_{m in W} delta_m` over the decoded set `W`.
pub fn aggregate_proposed(updates: &BTreeMap<usize, Vec<f64>>) -> Result<Vec<f64>, FlError> {
    let dim = common_dim(updates).ok_or(FlError::EmptyAggregation)?;
    Ok(divided(sum_in_client_order(updates, dim)?, updates.len()))
}

/// Applies a benchmark rule to the updates that reached the PS. Returns a
/// zero vector of length `dim` when nothing arrived.
pub fn aggregate_benchmark(
    kind: BenchmarkKind,
    arrived: &BTreeMap<usize, Vec<f64>>,
    clients: usize,
    dim: usize,
) -> Result<Vec<f64>, FlError> {
    if clients == 0 {
        return Err(FlError::EmptyAggregation);
    }
    if let Some(&m) = arrived.keys().find(|&&m| m >= clients) {
        return Err(FlError::Shape(format!("client {m} outside 0..{clients}")));
    }
    match kind {
        BenchmarkKind::QflIdeal => {
            if arrived.len() != clients {
                return Err(FlError::MissingUpdates { expected: clients, got: arrived.len() });
            }
            Ok(divided(sum_in_client_order(arrived, dim)?, clients))
        }
        BenchmarkKind::Anon => Ok(divided(sum_in_client_order(arrived, dim)?, clients)),
        BenchmarkKind::NonAnon if arrived.is_empty() => Ok(vec![0.0; dim]),
        BenchmarkKind::NonAnon => Ok(divided(sum_in_client_order(arrived, dim)?, arrived.len())),
    }
}

/// Accuracy and mean cross-entropy of a classifier on a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Ties in the argmax go to the lowest class index.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, data: &Dataset) -> Result<Evaluation, FlError> {
    if data.is_empty() {
        return Err(FlError::EmptyDataset);
    }
    let mut logits = vec![0.0; model.classes()];
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..data.len() {
        model.logits(data.features(i), &mut logits);
        let y = data.label(i) as usize;
        let mut best = 0;
        for (k, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = k;
            }
        }
        correct += usize::from(best == y);
        loss += log_sum_exp(&logits) - logits[y];
    }
    let n = data.len() as f64;
    Ok(Evaluation { accuracy: correct as f64 / n, loss: loss / n })
}
