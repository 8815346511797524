// Stochastic quantization of a model update: unbiasedness, the variance
// bound, and packing into field symbols.

use coded_fl::galois::GaloisField;
use coded_fl::quantizer::{message_len, QuantizerSpec, UpdateCodec};
use coded_fl::rng::{stream, Purpose};
use coded_fl::verify::quantizer_statistics;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = QuantizerSpec::symmetric(4, 5, 1.0)?;
    let x = [-0.93, -0.2, 0.0, 0.41, 0.999];
    let mut rng = stream(5, Purpose::Quantization, &[]);
    let stats = quantizer_statistics(&x, &spec, 20_000, &mut rng);
    println!("input {:?}", x);
    println!("mean  {:?}", stats.mean.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("mse {:.6} <= bound {:.6}, max |z| {:.2}", stats.mse, stats.bound, stats.max_z());

    let field = GaloisField::gf256();
    let spec = QuantizerSpec::symmetric(8, 1000, 0.05)?;
    let delta: Vec<f64> = (0..1000).map(|j| 0.05 * ((j as f64) * 0.37).sin()).collect();
    let codec = UpdateCodec::Stochastic(spec);
    let enc = codec.encode(&delta, &field, &mut rng)?;
    assert_eq!(codec.decode(&enc.message, &field)?, enc.reconstruction);
    println!("1000 coordinates at 8 bits -> {} GF(256) symbols", message_len(1000, 8, &field));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
