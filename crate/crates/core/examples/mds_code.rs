// Builds the systematic encoding matrix and checks that any M of its
// columns are independent.

use coded_fl::dnc::{verify_mds, EncodingMatrix};
use coded_fl::galois::GaloisField;
use coded_fl::rng::{stream, Purpose};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let field = GaloisField::gf256();
    let code = EncodingMatrix::build(3, &field)?;
    print!("{}", code.to_csv());
    let block = code.client_block(1);
    println!("client 1 relay block:");
    for r in 0..block.rows() {
        println!("  {:?}", block.row(r).iter().map(|s| s.0).collect::<Vec<_>>());
    }

    for m in [3, 4, 8] {
        let code = EncodingMatrix::build(m, &field)?;
        let mut rng = stream(7, Purpose::Verification, &[m as u64]);
        let v = verify_mds(&code, &field, 2_000, &mut rng);
        println!(
            "M={m}: {} subsets {}, passed={}",
            v.subsets_checked,
            if v.exhaustive { "(all)" } else { "(sampled)" },
            v.passed
        );
        assert!(v.passed);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
