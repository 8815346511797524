// The non-convex convergence bound: its four terms and how it shrinks
// with the number of rounds.

use coded_fl::theory::{kstar, local_steps_limit, theorem1_bound, theorem1_terms, AssumptionConstants, QuantizationTerms};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ks = kstar(10, 0.1945)?;
    let mut c = AssumptionConstants {
        smoothness: 1.0,
        gradient_variance: 4.0,
        dissimilarity: vec![0.5; 10],
        initial_gap: 2.3,
        quantization: QuantizationTerms::Constant(1e-4),
        batch_size: 1024,
        local_steps: 1,
        rounds: 100,
    };
    println!("K* = {ks:.4}");
    println!("{:>8} {:>12} {:>12} {:>12} {:>12} {:>12}", "T", "gap", "quant", "noise", "dissim", "total");
    for t in [100u64, 1_000, 10_000, 100_000, 1_000_000] {
        c.rounds = t;
        let terms = theorem1_terms(&c, ks)?;
        let checked = match theorem1_bound(&c, ks) {
            Ok(_) => "",
            Err(_) => "  (I above limit)",
        };
        println!(
            "{t:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}{checked}",
            terms.initial_gap,
            terms.quantization,
            terms.gradient_noise,
            terms.dissimilarity,
            terms.total()
        );
    }
    println!("largest admissible I at T = 10^6: {:.2}", local_steps_limit(&c, ks));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
