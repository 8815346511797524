// Writes a run with its manifest, then repeats it from the manifest and
// compares the metrics byte for byte.

use coded_fl::config::{DataSource, ExperimentConfig};
use coded_fl::protocol::run_experiment;
use coded_fl::report::{metrics_csv, write_run, RunManifest, MANIFEST_FILE, METRICS_FILE};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut c = ExperimentConfig::default();
    c.experiment.clients = 3;
    c.experiment.rounds = 2;
    c.experiment.trials = 2;
    c.experiment.batch_size = 16;
    c.data.source = DataSource::Synthetic;
    c.data.synthetic_train = 150;
    c.data.synthetic_test = 60;

    let dir = std::env::temp_dir().join(format!("coded-fl-example-{}", std::process::id()));
    let data = c.data.load(c.experiment.seed)?;
    let first = run_experiment(&c, &data)?;
    let manifest = write_run(&dir, &c, &first.records)?;
    println!("config hash {}", manifest.config_hash);

    let loaded = RunManifest::read(&dir.join(MANIFEST_FILE))?;
    let data = loaded.config.data.load(loaded.config.experiment.seed)?;
    let again = run_experiment(&loaded.config, &data)?;
    let on_disk = std::fs::read_to_string(dir.join(METRICS_FILE))?;
    assert_eq!(on_disk, metrics_csv(&again.records));
    println!("{} rows reproduced exactly", again.records.len());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
