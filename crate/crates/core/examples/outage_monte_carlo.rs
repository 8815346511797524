// Link outage from the fading model, and how rarely the PS misses a
// client once D2D relaying is in play.

use coded_fl::channel::ChannelParams;
use coded_fl::theory::client_outage_dominant;
use coded_fl::verify::{single_attempt_outage, single_attempt_outage_exact};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let link = ChannelParams::new(3.0, 0.6, 1.0)?;
    println!("SNR 3, R 0.6: threshold {:.6}, P_e {:.6}", link.threshold(), link.outage());
    for db in [0.0, 5.0, 10.0] {
        println!("SNR {db:>4} dB: P_e {:.6}", ChannelParams::from_db(db, 0.6, 1.0)?.outage());
    }

    println!("{:>3} {:>5} {:>10} {:>10} {:>10}", "M", "p_e", "simulated", "exact", "p^(2M-1)");
    for m in [2, 3] {
        for p in [0.2, 0.3] {
            let est = single_attempt_outage(m, p, 0, 100_000, 11)?;
            println!(
                "{m:>3} {p:>5} {:>10.6} {:>10.6} {:>10.6}",
                est.rate(),
                single_attempt_outage_exact(m, p),
                client_outage_dominant(m, p)?
            );
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
