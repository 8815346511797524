// The coded scheme against ideal, anonymous and non-anonymous baselines
// on a label-skewed synthetic task.

use coded_fl::config::{DataSource, ExperimentConfig};
use coded_fl::fl::PartitionScheme;
use coded_fl::protocol::run_experiment;
use coded_fl::report::final_accuracy;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut c = ExperimentConfig::default();
    c.experiment.clients = 5;
    c.experiment.rounds = 8;
    c.experiment.trials = 2;
    c.experiment.batch_size = 32;
    c.experiment.learning_rate = 0.1;
    c.data.source = DataSource::Synthetic;
    c.data.synthetic_train = 500;
    c.data.synthetic_test = 250;
    c.data.synthetic_classes = 5;
    c.data.classes_per_client = PartitionScheme::ClassesPerClient(1);
    c.channel.outage = Some(0.3);

    let data = c.data.load(c.experiment.seed)?;
    let result = run_experiment(&c, &data)?;
    for (method, acc) in final_accuracy(&result.records) {
        println!("{:<10} {:.3} +- {:.3}", method.name(), acc.mean, acc.stderr);
    }
    println!("{} failed rounds", result.failures);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
