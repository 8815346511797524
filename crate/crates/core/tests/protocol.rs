use std::collections::BTreeMap;

use coded_fl::channel::sample_connectivity;
use coded_fl::config::{DataSource, ExperimentConfig, QuantizerMode};
use coded_fl::dnc::EncodingMatrix;
use coded_fl::fl::{
    aggregate_benchmark, evaluate, local_sgd, BenchmarkKind, MlpObjective, Model, PartitionScheme,
};
use coded_fl::galois::{FieldSymbol, GaloisField};
use coded_fl::protocol::{communicate, run_experiment, Method, ProtocolError, Trial};
use coded_fl::quantizer::Message;
use coded_fl::rng::{stream, Purpose};
use rand::Rng;

fn synthetic(clients: usize, rounds: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.experiment.clients = clients;
    c.experiment.rounds = rounds;
    c.experiment.trials = 2;
    c.experiment.batch_size = 16;
    c.experiment.learning_rate = 0.1;
    c.data.source = DataSource::Synthetic;
    c.data.synthetic_train = 240;
    c.data.synthetic_test = 80;
    c.data.synthetic_dim = 8;
    c.data.synthetic_classes = 4;
    c.data.classes_per_client = PartitionScheme::ClassesPerClient(2);
    c
}

#[test]
fn lossless_perfect_channel_is_plain_fedavg() {
    let mut c = synthetic(4, 4);
    c.channel.outage = Some(0.0);
    c.quantizer.mode = QuantizerMode::Lossless;
    let data = c.data.load(1).unwrap();
    let trial = Trial::new(&c, &data, 99).unwrap();
    let run = trial.run(Method::Proposed).unwrap();

    let hp = c.training();
    let mut params = trial.initial.params.clone();
    for round in 1..=c.experiment.rounds {
        let mut sum = vec![0.0; params.len()];
        for m in 0..4 {
            let obj = MlpObjective { arch: trial.arch, data: &data.train, indices: &trial.partition.shards[m] };
            let mut rng = stream(99, Purpose::LocalTraining, &[round as u64, m as u64]);
            let u = local_sgd(m, round, &params, &obj, &hp, &mut rng).unwrap();
            for (s, d) in sum.iter_mut().zip(&u.delta) {
                *s += d;
            }
        }
        for (p, s) in params.iter_mut().zip(&sum) {
            *p += s / 4.0;
        }
        let acc = evaluate(&Model { arch: trial.arch, params: params.clone() }, &data.test).unwrap().accuracy;
        assert_eq!(run.records[round - 1].test_accuracy, acc);
    }
    assert_eq!(run.model.params, params);
}

#[test]
fn perfect_channel_makes_every_method_identical() {
    let mut c = synthetic(4, 3);
    c.channel.outage = Some(0.0);
    let data = c.data.load(2).unwrap();
    let result = run_experiment(&c, &data).unwrap();
    let by_method = |m: Method| {
        result.records.iter().filter(|r| r.method == m).map(|r| (r.test_accuracy, r.train_loss)).collect::<Vec<_>>()
    };
    let reference = by_method(Method::QflIdeal);
    for m in [Method::Proposed, Method::Anon, Method::NonAnon] {
        assert_eq!(by_method(m), reference, "{m}");
    }
}

#[test]
fn without_cooperation_the_scheme_reduces_to_non_anonymous_averaging() {
    let mut c = synthetic(5, 1);
    c.channel.outage = Some(0.4);
    let data = c.data.load(3).unwrap();
    let trial = Trial::new(&c, &data, 5).unwrap();
    let mut compared = 0;
    for round in 1..=12 {
        let local = trial.local_updates(&trial.initial, round).unwrap();
        let sent = trial.encode_updates(&local, round).unwrap();
        let messages: Vec<Message> = sent.iter().map(|e| e.message.clone()).collect();
        let link = trial.connectivity(round, 0).unwrap().without_d2d().without_relays();
        let comm = communicate(&trial.code, &trial.field, &messages, 1, |_| Ok(link.clone()));
        let arrived: BTreeMap<usize, Vec<f64>> =
            (0..5).filter(|&k| link.direct[k]).map(|k| (k, sent[k].reconstruction.clone())).collect();
        match comm {
            Ok(comm) => {
                assert_eq!(comm.decoded.keys().copied().collect::<Vec<_>>(), arrived.keys().copied().collect::<Vec<_>>());
                let decoded: BTreeMap<usize, Vec<f64>> = comm
                    .decoded
                    .iter()
                    .map(|(&k, msg)| (k, trial.codec.decode(msg, &trial.field).unwrap()))
                    .collect();
                let ours = coded_fl::fl::aggregate_proposed(&decoded).unwrap();
                let theirs = aggregate_benchmark(BenchmarkKind::NonAnon, &arrived, 5, ours.len()).unwrap();
                assert_eq!(ours, theirs);
                compared += 1;
            }
            Err(ProtocolError::RoundFailure { .. }) => assert!(arrived.is_empty()),
            Err(e) => panic!("{e}"),
        }
    }
    assert!(compared >= 8);
}

#[test]
fn nearly_everyone_is_decoded_at_the_reference_outage() {
    let (m, p_e, rounds) = (10, 0.1945, 2_000);
    let field = GaloisField::gf256();
    let code = EncodingMatrix::build(m, &field).unwrap();
    let mut rng = stream(8, Purpose::Verification, &[]);
    let mut total = 0usize;
    for _ in 0..rounds {
        let messages: Vec<Message> = (0..m)
            .map(|_| Message { symbols: (0..4).map(|_| FieldSymbol(rng.random_range(0..256))).collect() })
            .collect();
        let comm = communicate(&code, &field, &messages, 10, |_| Ok(sample_connectivity(m, p_e, &mut rng)?)).unwrap();
        total += comm.decoded.len();
    }
    let mean = total as f64 / rounds as f64;
    assert!(mean > m as f64 - 0.01, "mean |W| = {mean}");
}

#[test]
fn metrics_do_not_depend_on_thread_count() {
    let mut c = synthetic(4, 3);
    c.channel.outage = Some(0.3);
    let data = c.data.load(4).unwrap();
    let run_with = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&c, &data).unwrap())
    };
    assert_eq!(run_with(1), run_with(3));
}

#[test]
fn failed_rounds_leave_the_model_alone() {
    let mut c = synthetic(3, 2);
    c.channel.outage = Some(1.0 - 1e-12);
    c.experiment.retry_limit = 2;
    c.experiment.methods = vec![Method::Proposed];
    let data = c.data.load(5).unwrap();
    let trial = Trial::new(&c, &data, 1).unwrap();
    let run = trial.run(Method::Proposed).unwrap();
    assert_eq!(run.failures, 2);
    assert_eq!(run.model, trial.initial);
    assert!(run.records.iter().all(|r| r.decoded_count == 0 && r.retransmissions == 1));
}
