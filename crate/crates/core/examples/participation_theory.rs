// Random participation: the averaging weight 1/|W| and its closed form
// against simulation.

use coded_fl::theory::{alpha_bar, client_outage_dominant, kbar_inverse, kbar_inverse_bound, kstar};
use coded_fl::verify::participation_monte_carlo;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>3} {:>6} {:>10} {:>10} {:>8}", "M", "q", "1/Kbar", "bound", "K*");
    for m in [2, 5, 10] {
        for q in [0.05, 0.3] {
            println!(
                "{m:>3} {q:>6} {:>10.6} {:>10.6} {:>8.4}",
                kbar_inverse(m, q)?,
                kbar_inverse_bound(m, q)?,
                kstar(m, q)?
            );
        }
    }

    let p_e = 0.1945;
    let q = client_outage_dominant(5, p_e)?;
    println!("M=5, p_e={p_e}: client outage ~ {q:.3e}");

    let deltas: Vec<Vec<f64>> = (0..5).map(|m| vec![m as f64 - 2.0, 1.0]).collect();
    let est = participation_monte_carlo(&deltas, 0.3, 50_000, 2);
    let a = alpha_bar(5, 0.3)?;
    let total: Vec<f64> = (0..2).map(|j| deltas.iter().map(|d| d[j]).sum()).collect();
    for j in 0..2 {
        println!(
            "coord {j}: E[sum/|W|] {:.4} (target {:.4}), E[sum/|W|^2] {:.4} (target {:.4})",
            est.average.mean[j],
            total[j] / 5.0,
            est.weighted.mean[j],
            a * total[j]
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
