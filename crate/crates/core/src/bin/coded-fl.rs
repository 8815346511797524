use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coded_fl::config::{parse_config, Overrides};
use coded_fl::dnc::EncodingMatrix;
use coded_fl::fl::PartitionScheme;
use coded_fl::galois::{FieldSpec, GaloisField};
use coded_fl::protocol::{run_experiment, Method, ProtocolError};
use coded_fl::report::{final_accuracy, write_run, RunManifest};
use coded_fl::theory::{self, AssumptionConstants, QuantizationTerms};
use coded_fl::verify;

const CONFIG_ERROR: u8 = 1;
const RUN_FAILURE: u8 = 2;
const VERIFY_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "coded-fl", version, about = "Coded cooperative federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write metrics.csv, summary.csv and manifest.json.
    Run(RunArgs),
    /// Print outage, participation and bound quantities over a grid.
    Theory(TheoryArgs),
    /// Run the MDS, erasure, outage and participation checks.
    Verify {
        #[arg(long, env = "CODED_FL_SEED", default_value_t = 1)]
        seed: u64,
    },
    /// Print the encoding matrix as CSV of integer symbols.
    DumpCode {
        #[arg(long, default_value_t = 10)]
        clients: usize,
        /// gf256, gf65536 or a prime modulus such as p257.
        #[arg(long, default_value = "gf256", value_parser = parse_field)]
        field: FieldSpec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest")]
    preset: Option<String>,
    /// Re-run the config recorded in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, env = "CODED_FL_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    snr_db: Option<f64>,
    /// Per-link outage probability, bypassing the SNR model.
    #[arg(long)]
    outage: Option<f64>,
    #[arg(long)]
    data_path: Option<PathBuf>,
    /// iid or e.g. 1class.
    #[arg(long)]
    partition: Option<PartitionScheme>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 5, 10])]
    clients: Vec<usize>,
    #[arg(long = "pe", value_delimiter = ',', default_values_t = [0.0, 0.1, 0.1945, 0.3])]
    p_e: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    smoothness: f64,
    #[arg(long, default_value_t = 1.0)]
    gradient_variance: f64,
    #[arg(long, default_value_t = 1.0)]
    dissimilarity: f64,
    #[arg(long, default_value_t = 1.0)]
    initial_gap: f64,
    /// Constant per-round quantization variance.
    #[arg(long, default_value_t = 0.0)]
    quantization: f64,
    #[arg(long, default_value_t = 1024)]
    batch_size: u64,
    #[arg(long, default_value_t = 5)]
    local_steps: u64,
    #[arg(long, default_value_t = 20)]
    rounds: u64,
    #[arg(long)]
    csv: bool,
}

fn parse_field(s: &str) -> Result<FieldSpec, String> {
    match s.to_ascii_lowercase().as_str() {
        "gf256" => Ok(FieldSpec::GF256),
        "gf65536" => Ok(FieldSpec::GF65536),
        other => other
            .strip_prefix('p')
            .and_then(|p| p.parse().ok())
            .map(|modulus| FieldSpec::Prime { modulus })
            .ok_or_else(|| format!("unknown field '{s}' (gf256, gf65536 or p<modulus>)")),
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn run(args: RunArgs) -> ExitCode {
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(CONFIG_ERROR, e);
        }
    }
    let overrides = Overrides {
        clients: args.clients,
        rounds: args.rounds,
        trials: args.trials,
        seed: args.seed,
        learning_rate: args.learning_rate,
        methods: args.methods,
        snr: args.snr,
        snr_db: args.snr_db,
        outage: args.outage,
        data_path: args.data_path,
        partition: args.partition,
    };
    let config = match &args.manifest {
        Some(path) => RunManifest::read(path).map_err(|e| e.to_string()).and_then(|m| {
            let mut c = m.config;
            c.apply(&overrides).map_err(|e| e.to_string())?;
            Ok(c)
        }),
        None => parse_config(args.config.as_deref(), args.preset.as_deref(), &overrides).map_err(|e| e.to_string()),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    let data = match config.data.load(config.experiment.seed) {
        Ok(d) => d,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    let result = match run_experiment(&config, &data) {
        Ok(r) => r,
        Err(ProtocolError::Config(e)) => return fail(CONFIG_ERROR, e),
        Err(e) => return fail(RUN_FAILURE, e),
    };
    if let Err(e) = write_run(&args.out, &config, &result.records) {
        return fail(RUN_FAILURE, e);
    }
    for (method, acc) in final_accuracy(&result.records) {
        println!("{:<10} final accuracy {:.4} +- {:.4}", method.name(), acc.mean, acc.stderr);
    }
    let total = result.records.len();
    if result.failures > 0 {
        eprintln!("{} of {total} rounds failed after the retry limit", result.failures);
    }
    println!("wrote {}", args.out.display());
    if total > 0 && result.failures == total {
        return fail(RUN_FAILURE, "every round failed");
    }
    ExitCode::SUCCESS
}

fn theory_report(args: TheoryArgs) -> ExitCode {
    let constants = AssumptionConstants {
        smoothness: args.smoothness,
        gradient_variance: args.gradient_variance,
        dissimilarity: vec![args.dissimilarity],
        initial_gap: args.initial_gap,
        quantization: QuantizationTerms::Constant(args.quantization),
        batch_size: args.batch_size,
        local_steps: args.local_steps,
        rounds: args.rounds,
    };
    let rows = match theory::theory_table(&args.clients, &args.p_e, &constants) {
        Ok(r) => r,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    if args.csv {
        println!("clients,p_e,dominant_outage,kbar_inverse,kstar,bound");
    } else {
        println!("{:>4} {:>8} {:>14} {:>10} {:>8} {:>12}", "M", "p_e", "outage", "1/Kbar", "K*", "bound");
    }
    for r in rows {
        let bound = r.bound.map_or_else(|| "-".to_string(), |b| format!("{b:.6}"));
        if args.csv {
            println!("{},{},{},{},{},{}", r.clients, r.p_e, r.dominant_outage, r.kbar_inverse, r.kstar, bound);
        } else {
            println!(
                "{:>4} {:>8.4} {:>14.6e} {:>10.6} {:>8.4} {:>12}",
                r.clients, r.p_e, r.dominant_outage, r.kbar_inverse, r.kstar, bound
            );
        }
    }
    if !args.csv {
        println!("bound '-' means I exceeds (T I)^(1/4) / K*^(3/4) for these constants");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Theory(args) => theory_report(args),
        Command::Verify { seed } => {
            let reports = verify::run_all(seed);
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(VERIFY_FAILURE)
            }
        }
        Command::DumpCode { clients, field, out } => {
            let code = GaloisField::new(field)
                .map_err(|e| e.to_string())
                .and_then(|f| EncodingMatrix::build(clients, &f).map_err(|e| e.to_string()));
            let csv = match code {
                Ok(c) => c.to_csv(),
                Err(e) => return fail(CONFIG_ERROR, e),
            };
            match out {
                Some(path) => match std::fs::write(&path, csv) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(RUN_FAILURE, format!("{}: {e}", path.display())),
                },
                None => {
                    print!("{csv}");
                    ExitCode::SUCCESS
                }
            }
        }
    }
}
