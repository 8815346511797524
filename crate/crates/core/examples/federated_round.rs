// A single communication round of the coded scheme on synthetic data,
// showing which clients the PS decoded and by which path.

use coded_fl::config::{DataSource, ExperimentConfig};
use coded_fl::fl::PartitionScheme;
use coded_fl::protocol::{Method, Trial};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut c = ExperimentConfig::default();
    c.experiment.clients = 5;
    c.experiment.batch_size = 32;
    c.experiment.learning_rate = 0.1;
    c.data.source = DataSource::Synthetic;
    c.data.synthetic_train = 500;
    c.data.synthetic_test = 200;
    c.data.classes_per_client = PartitionScheme::ClassesPerClient(2);
    c.channel.outage = Some(0.35);

    let data = c.data.load(c.experiment.seed)?;
    let trial = Trial::new(&c, &data, c.experiment.seed)?;
    println!("{} parameters, quantizer range {:?}", trial.arch.num_params(), trial.quantizer_range());
    for m in 0..trial.clients() {
        println!("client {m} holds classes {:?}", trial.partition.classes_of(m));
    }
    for round in 1..=3 {
        let out = trial.run_round(&trial.initial, round, Method::Proposed)?;
        println!(
            "round {round}: W = {:?} after {} retransmissions, paths {:?}",
            out.decoded, out.retransmissions, out.attribution
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
