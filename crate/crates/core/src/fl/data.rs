//! In-memory labelled datasets and their split across clients.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::FlError;

/// Dense row-major features with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    classes: usize,
    features: Vec<f32>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(dim: usize, classes: usize, features: Vec<f32>, labels: Vec<u8>) -> Result<Self, FlError> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(FlError::Shape(format!(
                "{} feature values for {} samples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(FlError::Shape(format!("label {bad} outside {classes} classes")));
        }
        Ok(Dataset { dim, classes, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// The first `n` samples.
    pub fn truncate(mut self, n: usize) -> Self {
        let n = n.min(self.len());
        self.labels.truncate(n);
        self.features.truncate(n * self.dim);
        self
    }

    pub fn class_counts(&self) -> Vec<usize> {
        histogram(self.labels.iter().copied(), self.classes)
    }
}

fn histogram(labels: impl Iterator<Item = u8>, classes: usize) -> Vec<usize> {
    let mut h = vec![0; classes];
    for l in labels {
        h[l as usize] += 1;
    }
    h
}

/// Isotropic Gaussian clusters, one per class, with centres drawn from
/// `N(0, separation^2 I)` and unit-variance noise around each centre.
pub fn gaussian_mixture<R: Rng + ?Sized>(
    samples: usize,
    dim: usize,
    classes: usize,
    separation: f64,
    rng: &mut R,
) -> Result<Dataset, FlError> {
    if classes == 0 || classes > 256 {
        return Err(FlError::Shape(format!("unsupported class count {classes}")));
    }
    let centres: Vec<f64> =
        (0..classes * dim).map(|_| separation * Distribution::<f64>::sample(&StandardNormal, rng)).collect();
    let mut features = Vec::with_capacity(samples * dim);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let c = i % classes;
        labels.push(c as u8);
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(rng);
            features.push((centres[c * dim + j] + z) as f32);
        }
    }
    Dataset::new(dim, classes, features, labels)
}

/// How samples are distributed over clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemeRepr", into = "SchemeRepr")]
pub enum PartitionScheme {
    /// A uniform random split into equal shards.
    Iid,
    /// Client `m` holds only classes `(m k + j) mod C` for `j < k`.
    ClassesPerClient(usize),
}

/// Serialized as `"iid"` or a bare class count.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SchemeRepr {
    Count(usize),
    Name(String),
}

impl From<PartitionScheme> for SchemeRepr {
    fn from(s: PartitionScheme) -> Self {
        match s {
            PartitionScheme::Iid => SchemeRepr::Name("iid".into()),
            PartitionScheme::ClassesPerClient(k) => SchemeRepr::Count(k),
        }
    }
}

impl TryFrom<SchemeRepr> for PartitionScheme {
    type Error = String;

    fn try_from(r: SchemeRepr) -> Result<Self, String> {
        match r {
            SchemeRepr::Count(0) => Err("classes per client must be positive".into()),
            SchemeRepr::Count(k) => Ok(PartitionScheme::ClassesPerClient(k)),
            SchemeRepr::Name(s) => s.parse().map_err(|e: FlError| e.to_string()),
        }
    }
}

impl std::fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PartitionScheme::Iid => write!(f, "iid"),
            PartitionScheme::ClassesPerClient(k) => write!(f, "{k}class"),
        }
    }
}

impl std::str::FromStr for PartitionScheme {
    type Err = FlError;

    fn from_str(s: &str) -> Result<Self, FlError> {
        let s = s.trim().to_ascii_lowercase();
        if s == "iid" {
            return Ok(PartitionScheme::Iid);
        }
        s.strip_suffix("class")
            .and_then(|k| k.parse().ok())
            .filter(|&k| k > 0)
            .map(PartitionScheme::ClassesPerClient)
            .ok_or_else(|| FlError::Config(format!("unknown partition scheme '{s}'")))
    }
}

/// Per-client sample indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPartition {
    pub shards: Vec<Vec<usize>>,
    pub histograms: Vec<Vec<usize>>,
}

impl DatasetPartition {
    pub fn clients(&self) -> usize {
        self.shards.len()
    }

    /// Distinct classes present in client `m`'s shard.
    pub fn classes_of(&self, m: usize) -> Vec<usize> {
        self.histograms[m].iter().enumerate().filter(|(_, &n)| n > 0).map(|(c, _)| c).collect()
    }
}

/// Splits `data` over `clients` shards. Shards are disjoint and of equal size;
/// leftover samples are dropped.
pub fn partition_dataset<R: Rng + ?Sized>(
    data: &Dataset,
    clients: usize,
    scheme: PartitionScheme,
    rng: &mut R,
) -> Result<DatasetPartition, FlError> {
    if clients == 0 {
        return Err(FlError::Partition("no clients".into()));
    }
    let shards = match scheme {
        PartitionScheme::Iid => {
            let mut idx: Vec<usize> = (0..data.len()).collect();
            idx.shuffle(rng);
            let per = data.len() / clients;
            if per == 0 {
                return Err(FlError::Partition(format!("{} samples for {clients} clients", data.len())));
            }
            idx.chunks(per).take(clients).map(|c| c.to_vec()).collect::<Vec<_>>()
        }
        PartitionScheme::ClassesPerClient(k) => class_shards(data, clients, k, rng)?,
    };
    let histograms = shards
        .iter()
        .map(|s| histogram(s.iter().map(|&i| data.label(i)), data.classes()))
        .collect();
    Ok(DatasetPartition { shards, histograms })
}

fn class_shards<R: Rng + ?Sized>(
    data: &Dataset,
    clients: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>, FlError> {
    let c = data.classes();
    if k == 0 || k > c {
        return Err(FlError::Partition(format!("{k} classes per client with {c} classes")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for i in 0..data.len() {
        by_class[data.label(i) as usize].push(i);
    }
    for v in &mut by_class {
        v.shuffle(rng);
    }
    let assigned = |m: usize| (0..k).map(move |j| (m * k + j) % c);
    let mut appearances = vec![0usize; c];
    for m in 0..clients {
        for cls in assigned(m) {
            appearances[cls] += 1;
        }
    }
    // Every (client, class) pair gets the same number of samples.
    let per_pair = (0..c)
        .filter(|&cls| appearances[cls] > 0)
        .map(|cls| by_class[cls].len() / appearances[cls])
        .min()
        .unwrap_or(0);
    if per_pair == 0 {
        return Err(FlError::Partition(format!(
            "not enough samples for {clients} clients with {k} classes each"
        )));
    }
    let mut cursor = vec![0usize; c];
    let mut shards = Vec::with_capacity(clients);
    for m in 0..clients {
        let mut shard = Vec::with_capacity(k * per_pair);
        for cls in assigned(m) {
            shard.extend_from_slice(&by_class[cls][cursor[cls]..cursor[cls] + per_pair]);
            cursor[cls] += per_pair;
        }
        shard.shuffle(rng);
        shards.push(shard);
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn data(n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        gaussian_mixture(n, 4, 10, 2.0, &mut rng).unwrap()
    }

    #[test]
    fn shapes_are_checked() {
        assert!(Dataset::new(2, 2, vec![0.0; 3], vec![0, 1]).is_err());
        assert!(Dataset::new(1, 2, vec![0.0; 2], vec![0, 2]).is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("iid".parse::<PartitionScheme>().unwrap(), PartitionScheme::Iid);
        assert_eq!("5class".parse::<PartitionScheme>().unwrap(), PartitionScheme::ClassesPerClient(5));
        assert!("0class".parse::<PartitionScheme>().is_err());
        assert_eq!(PartitionScheme::ClassesPerClient(1).to_string(), "1class");
    }

    #[test]
    fn class_partition_has_the_requested_classes() {
        let d = data(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in [1, 2, 5] {
            let p = partition_dataset(&d, 10, PartitionScheme::ClassesPerClient(k), &mut rng).unwrap();
            let sizes: HashSet<usize> = p.shards.iter().map(Vec::len).collect();
            assert_eq!(sizes.len(), 1);
            for m in 0..10 {
                let want: Vec<usize> = {
                    let mut v: Vec<usize> = (0..k).map(|j| (m * k + j) % 10).collect();
                    v.sort();
                    v
                };
                assert_eq!(p.classes_of(m), want);
            }
            let all: Vec<usize> = p.shards.concat();
            assert_eq!(all.len(), all.iter().collect::<HashSet<_>>().len());
        }
    }

    #[test]
    fn iid_partition_is_disjoint_and_equal() {
        let d = data(1003);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = partition_dataset(&d, 10, PartitionScheme::Iid, &mut rng).unwrap();
        assert!(p.shards.iter().all(|s| s.len() == 100));
        let all: HashSet<usize> = p.shards.concat().into_iter().collect();
        assert_eq!(all.len(), 1000);
    }

    #[test]
    fn infeasible_partition_is_an_error() {
        let d = data(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(partition_dataset(&d, 10, PartitionScheme::Iid, &mut rng).is_err());
        assert!(partition_dataset(&d, 10, PartitionScheme::ClassesPerClient(11), &mut rng).is_err());
    }
}
