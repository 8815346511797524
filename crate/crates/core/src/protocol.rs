//! One communication round and full multi-round experiments.
//!
//! A round of the proposed scheme:
//!
//! 1. the PS broadcasts the global model (error-free downlink);
//! 2. every client runs local SGD and encodes its update as a field message;
//! 3. slot 1: each client broadcasts its message, heard by the PS and its
//!    peers subject to outage; slots 2..M: each client sends its masked relay
//!    codewords to the PS, again subject to outage;
//! 4. the PS prunes and decodes. If the surviving system is not full rank,
//!    all links are redrawn and the round's communication is repeated, up to
//!    `retry_limit` attempts. The decoded updates are averaged over the
//!    decoded set.
//!
//! The benchmarks share the clients' local training and quantization and see
//! the same first-attempt direct links, but have no relaying.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{sample_connectivity, ChannelError, ConnectivityRealization};
use crate::config::{ConfigError, ExperimentConfig, ExperimentData, QuantizerMode};
use crate::dnc::{transmit, ColumnSource, DncError, EncodingMatrix};
use crate::fl::{
    aggregate_benchmark, aggregate_proposed, evaluate, local_sgd, partition_dataset, BenchmarkKind, DatasetPartition,
    FlError, LocalUpdate, MlpArch, MlpObjective, Model,
};
use crate::galois::{GaloisError, GaloisField};
use crate::quantizer::{EncodedUpdate, Message, QuantizerError, QuantizerSpec, UpdateCodec};
use crate::report::MetricRecord;
use crate::rng::{stream, Purpose};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Fl(#[from] FlError),
    #[error(transparent)]
    Dnc(#[from] DncError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error("no decodable round after {attempts} attempts")]
    RoundFailure { attempts: usize },
    #[error("decoded message of client {client} differs from the one sent")]
    DecodeMismatch { client: usize },
}

/// Aggregation scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Coded relaying with retransmission and decoded-set averaging.
    Proposed,
    /// Every update arrives.
    QflIdeal,
    /// Direct links only, PS divides by `M`.
    Anon,
    /// Direct links only, PS averages what arrived.
    NonAnon,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::QflIdeal, Method::Anon, Method::NonAnon];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::QflIdeal => "qfl_ideal",
            Method::Anon => "anon",
            Method::NonAnon => "non_anon",
        }
    }

    fn benchmark(self) -> Option<BenchmarkKind> {
        match self {
            Method::Proposed => None,
            Method::QflIdeal => Some(BenchmarkKind::QflIdeal),
            Method::Anon => Some(BenchmarkKind::Anon),
            Method::NonAnon => Some(BenchmarkKind::NonAnon),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| format!("unknown method '{s}' (expected proposed, qfl_ideal, anon or non_anon)"))
    }
}

/// How the PS obtained a decoded client's message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecoveryPath {
    /// Its first-slot uplink arrived.
    Direct,
    /// Only through relay codewords.
    Relay,
}

/// Result of the communication phase of the proposed scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Communication {
    pub decoded: BTreeMap<usize, Message>,
    pub retransmissions: usize,
    pub attribution: BTreeMap<usize, RecoveryPath>,
    /// Link states of the successful attempt.
    pub realization: ConnectivityRealization,
}

/// Runs the two-stage exchange until the PS can decode, drawing the link
/// states of attempt `a` from `draw(a)`. Every decoded message is checked
/// against the one sent.
pub fn communicate<F>(
    code: &EncodingMatrix,
    field: &GaloisField,
    messages: &[Message],
    retry_limit: usize,
    mut draw: F,
) -> Result<Communication, ProtocolError>
where
    F: FnMut(usize) -> Result<ConnectivityRealization, ProtocolError>,
{
    for attempt in 0..retry_limit {
        let r = draw(attempt)?;
        let (sys, codewords) = transmit(code, messages, &r.heard(), &r.direct, &r.relay, field)?;
        if !sys.is_decodable(field) {
            continue;
        }
        let decoded = sys.decode_codewords(&codewords, field)?;
        for (&m, msg) in &decoded {
            if *msg != messages[m] {
                return Err(ProtocolError::DecodeMismatch { client: m });
            }
        }
        let attribution = decoded
            .keys()
            .map(|&m| (m, if r.direct[m] { RecoveryPath::Direct } else { RecoveryPath::Relay }))
            .collect();
        debug_assert!(sys.provenance.iter().all(|s| match *s {
            ColumnSource::Direct { client } => r.direct[client],
            ColumnSource::Relay { client, slot } => r.relay[client][slot],
        }));
        return Ok(Communication { decoded, retransmissions: attempt, attribution, realization: r });
    }
    Err(ProtocolError::RoundFailure { attempts: retry_limit })
}

/// What happened in one round of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: usize,
    pub method: Method,
    /// Clients whose update entered the aggregate, ascending.
    pub decoded: Vec<usize>,
    pub retransmissions: usize,
    /// Reconstructed updates of the decoded clients.
    pub updates: BTreeMap<usize, Vec<f64>>,
    pub aggregate: Vec<f64>,
    pub attribution: BTreeMap<usize, RecoveryPath>,
    /// What each client sent.
    pub sent: Vec<EncodedUpdate>,
    /// Mean local training loss over all clients.
    pub local_loss: f64,
}

/// Per-trial state shared by all methods: data split, initial model, code
/// and codec.
#[derive(Debug, Clone)]
pub struct Trial<'a> {
    pub config: &'a ExperimentConfig,
    pub data: &'a ExperimentData,
    pub seed: u64,
    pub partition: DatasetPartition,
    pub arch: MlpArch,
    pub field: GaloisField,
    pub code: EncodingMatrix,
    pub codec: UpdateCodec,
    pub outage: f64,
    pub initial: Model,
}

impl<'a> Trial<'a> {
    pub fn new(config: &'a ExperimentConfig, data: &'a ExperimentData, seed: u64) -> Result<Self, ProtocolError> {
        config.validate()?;
        let m = config.experiment.clients;
        let partition = partition_dataset(
            &data.train,
            m,
            config.data.classes_per_client,
            &mut stream(seed, Purpose::Partition, &[]),
        )?;
        let arch = MlpArch::new(data.train.dim(), config.experiment.hidden, data.train.classes());
        let initial = Model::init(arch, &mut stream(seed, Purpose::ModelInit, &[]));
        let field = GaloisField::new(config.code.field)?;
        let code = EncodingMatrix::build(m, &field)?;
        let outage = config.channel.outage_probability()?;
        let mut trial = Trial {
            config,
            data,
            seed,
            partition,
            arch,
            field,
            code,
            codec: UpdateCodec::Lossless { dim: arch.num_params() },
            outage,
            initial,
        };
        if config.quantizer.mode == QuantizerMode::Stochastic {
            let range = match config.quantizer.range {
                Some(c) => c,
                None => trial.dry_run_range()?,
            };
            let spec = QuantizerSpec::symmetric(config.quantizer.bits, arch.num_params(), range)?;
            trial.codec = UpdateCodec::Stochastic(spec);
        }
        Ok(trial)
    }

    /// `headroom * max |delta|` over a round of local training at the initial
    /// model, using round index 0 (real rounds start at 1).
    fn dry_run_range(&self) -> Result<f64, ProtocolError> {
        let updates = self.local_updates(&self.initial, 0)?;
        let peak = updates.iter().flat_map(|u| u.delta.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(if peak > 0.0 { self.config.quantizer.headroom * peak } else { 1.0 })
    }

    pub fn clients(&self) -> usize {
        self.config.experiment.clients
    }

    /// Quantizer range in use, if quantizing.
    pub fn quantizer_range(&self) -> Option<f64> {
        match &self.codec {
            UpdateCodec::Stochastic(spec) => Some(spec.upper()[0]),
            UpdateCodec::Lossless { .. } => None,
        }
    }

    /// Local SGD for every client from `global`.
    pub fn local_updates(&self, global: &Model, round: usize) -> Result<Vec<LocalUpdate>, ProtocolError> {
        let hp = self.config.training();
        (0..self.clients())
            .into_par_iter()
            .map(|m| {
                let objective = MlpObjective { arch: self.arch, data: &self.data.train, indices: &self.partition.shards[m] };
                let mut rng = stream(self.seed, Purpose::LocalTraining, &[round as u64, m as u64]);
                local_sgd(m, round, &global.params, &objective, &hp, &mut rng).map_err(ProtocolError::from)
            })
            .collect()
    }

    pub fn encode_updates(&self, updates: &[LocalUpdate], round: usize) -> Result<Vec<EncodedUpdate>, ProtocolError> {
        updates
            .par_iter()
            .map(|u| {
                let mut rng = stream(self.seed, Purpose::Quantization, &[round as u64, u.client as u64]);
                self.codec.encode(&u.delta, &self.field, &mut rng).map_err(ProtocolError::from)
            })
            .collect()
    }

    /// Link states for `attempt` of `round`. Every method sees the same
    /// first attempt.
    pub fn connectivity(&self, round: usize, attempt: usize) -> Result<ConnectivityRealization, ProtocolError> {
        let mut rng = stream(self.seed, Purpose::Channel, &[round as u64, attempt as u64]);
        Ok(sample_connectivity(self.clients(), self.outage, &mut rng)?)
    }

    pub fn run_round(&self, global: &Model, round: usize, method: Method) -> Result<RoundOutcome, ProtocolError> {
        let local = self.local_updates(global, round)?;
        let local_loss = local.iter().map(|u| u.mean_loss).sum::<f64>() / local.len() as f64;
        let sent = self.encode_updates(&local, round)?;
        let m = self.clients();
        let dim = self.arch.num_params();
        let (updates, retransmissions, attribution, aggregate) = match method.benchmark() {
            None => {
                let messages: Vec<Message> = sent.iter().map(|e| e.message.clone()).collect();
                let comm = communicate(&self.code, &self.field, &messages, self.config.experiment.retry_limit, |a| {
                    self.connectivity(round, a)
                })?;
                let updates = comm
                    .decoded
                    .iter()
                    .map(|(&c, msg)| Ok((c, self.codec.decode(msg, &self.field)?)))
                    .collect::<Result<BTreeMap<_, _>, ProtocolError>>()?;
                let aggregate = aggregate_proposed(&updates)?;
                (updates, comm.retransmissions, comm.attribution, aggregate)
            }
            Some(kind) => {
                let arrived: Vec<bool> = match kind {
                    BenchmarkKind::QflIdeal => vec![true; m],
                    _ => self.connectivity(round, 0)?.direct,
                };
                let updates: BTreeMap<usize, Vec<f64>> = (0..m)
                    .filter(|&c| arrived[c])
                    .map(|c| (c, sent[c].reconstruction.clone()))
                    .collect();
                let aggregate = aggregate_benchmark(kind, &updates, m, dim)?;
                let attribution = updates.keys().map(|&c| (c, RecoveryPath::Direct)).collect();
                (updates, 0, attribution, aggregate)
            }
        };
        Ok(RoundOutcome {
            round,
            method,
            decoded: updates.keys().copied().collect(),
            retransmissions,
            updates,
            aggregate,
            attribution,
            sent,
            local_loss,
        })
    }

    /// All rounds of one method. Failed rounds leave the model unchanged and
    /// are recorded with `decoded_count = 0`.
    pub fn run(&self, method: Method) -> Result<MethodRun, ProtocolError> {
        let mut model = self.initial.clone();
        let mut records = Vec::with_capacity(self.config.experiment.rounds);
        let mut failures = 0;
        for round in 1..=self.config.experiment.rounds {
            let start = Instant::now();
            let (decoded_count, retransmissions) = match self.run_round(&model, round, method) {
                Ok(out) => {
                    model.apply(&out.aggregate);
                    (out.decoded.len(), out.retransmissions)
                }
                Err(ProtocolError::RoundFailure { attempts }) => {
                    failures += 1;
                    (0, attempts.saturating_sub(1))
                }
                Err(e) => return Err(e),
            };
            let test = evaluate(&model, &self.data.test)?;
            let train = evaluate(&model, &self.data.train)?;
            let wall_time_ms =
                if self.config.experiment.record_wall_time { start.elapsed().as_millis() as u64 } else { 0 };
            records.push(MetricRecord {
                trial: self.seed,
                round,
                method,
                test_accuracy: test.accuracy,
                train_loss: train.loss,
                decoded_count,
                retransmissions,
                wall_time_ms,
            });
        }
        Ok(MethodRun { method, records, failures, model })
    }
}

/// One method's trajectory within a trial.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub records: Vec<MetricRecord>,
    pub failures: usize,
    pub model: Model,
}

/// Metrics of a full experiment, sorted by `(trial, round, method)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<MetricRecord>,
    pub failures: usize,
    /// Quantizer range used in each trial, if quantizing.
    pub quantizer_ranges: Vec<Option<f64>>,
}

/// Runs every configured method for every trial. Trials run in parallel on
/// the current rayon pool; the output does not depend on the pool size.
pub fn run_experiment(config: &ExperimentConfig, data: &ExperimentData) -> Result<ExperimentResult, ProtocolError> {
    config.validate()?;
    let e = &config.experiment;
    let per_trial = (0..e.trials as u64)
        .into_par_iter()
        .map(|i| {
            let trial = Trial::new(config, data, e.seed.wrapping_add(i))?;
            let runs = e.methods.iter().map(|&m| trial.run(m)).collect::<Result<Vec<_>, _>>()?;
            Ok((trial.quantizer_range(), runs))
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    let mut records = Vec::new();
    let mut failures = 0;
    let mut quantizer_ranges = Vec::new();
    for (range, runs) in per_trial {
        quantizer_ranges.push(range);
        for run in runs {
            failures += run.failures;
            records.extend(run.records);
        }
    }
    records.sort_by_key(|r| (r.trial, r.round, r.method));
    Ok(ExperimentResult { records, failures, quantizer_ranges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DataSource;
    use crate::fl::PartitionScheme;

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.experiment.clients = 3;
        c.experiment.rounds = 2;
        c.experiment.trials = 1;
        c.experiment.batch_size = 16;
        c.experiment.learning_rate = 0.1;
        c.data.source = DataSource::Synthetic;
        c.data.synthetic_train = 120;
        c.data.synthetic_test = 60;
        c.data.synthetic_dim = 6;
        c.data.synthetic_classes = 3;
        c.data.classes_per_client = PartitionScheme::Iid;
        c
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("non-anon".parse::<Method>().unwrap(), Method::NonAnon);
        assert!("fedprox".parse::<Method>().is_err());
    }

    #[test]
    fn lossless_channel_decodes_everyone_first_time() {
        let mut c = small_config();
        c.channel.outage = Some(0.0);
        let data = c.data.load(1).unwrap();
        let trial = Trial::new(&c, &data, 7).unwrap();
        let out = trial.run_round(&trial.initial, 1, Method::Proposed).unwrap();
        assert_eq!(out.decoded, vec![0, 1, 2]);
        assert_eq!(out.retransmissions, 0);
        let mean: Vec<f64> = (0..trial.arch.num_params())
            .map(|j| out.sent.iter().map(|s| s.reconstruction[j]).sum::<f64>() / 3.0)
            .collect();
        assert_eq!(out.aggregate, mean);
    }

    #[test]
    fn near_certain_outage_fails_the_round() {
        let mut c = small_config();
        c.channel.outage = Some(1.0 - 1e-12);
        c.experiment.retry_limit = 3;
        let data = c.data.load(1).unwrap();
        let trial = Trial::new(&c, &data, 7).unwrap();
        let err = trial.run_round(&trial.initial, 1, Method::Proposed).unwrap_err();
        assert!(matches!(err, ProtocolError::RoundFailure { attempts: 3 }));
        let run = trial.run(Method::Proposed).unwrap();
        assert_eq!(run.failures, 2);
        assert_eq!(run.model, trial.initial);
    }

    #[test]
    fn relay_recovers_a_lost_direct_link() {
        let field = GaloisField::gf256();
        let code = EncodingMatrix::build(3, &field).unwrap();
        let messages: Vec<Message> = (0..3u32)
            .map(|m| Message { symbols: (0..5).map(|i| crate::galois::FieldSymbol(m * 40 + i)).collect() })
            .collect();
        let mut r = ConnectivityRealization::all_up(3);
        r.direct[1] = false;
        let comm = communicate(&code, &field, &messages, 1, |_| Ok(r.clone())).unwrap();
        assert_eq!(comm.decoded.keys().copied().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(comm.attribution[&1], RecoveryPath::Relay);
        assert_eq!(comm.attribution[&0], RecoveryPath::Direct);
        assert_eq!(comm.decoded[&1], messages[1]);
    }

    #[test]
    fn experiments_are_reproducible() {
        let c = small_config();
        let data = c.data.load(1).unwrap();
        let a = run_experiment(&c, &data).unwrap();
        let b = run_experiment(&c, &data).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 2 * 4);
    }
}
