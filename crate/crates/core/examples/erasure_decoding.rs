// One pass through the two-slot erasure network: clients exchange
// messages, relay coded combinations, and the PS decodes what it can.

use coded_fl::channel::sample_connectivity;
use coded_fl::dnc::{transmit, EncodingMatrix};
use coded_fl::galois::{FieldSymbol, GaloisField};
use coded_fl::quantizer::Message;
use coded_fl::rng::{stream, Purpose};
use rand::Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let field = GaloisField::gf256();
    let m = 4;
    let code = EncodingMatrix::build(m, &field)?;
    let mut rng = stream(3, Purpose::Channel, &[]);
    let messages: Vec<Message> = (0..m)
        .map(|_| Message { symbols: (0..16).map(|_| FieldSymbol(rng.random_range(0..256))).collect() })
        .collect();

    let mut decodable = 0;
    for attempt in 0..20 {
        let link = sample_connectivity(m, 0.7, &mut rng)?;
        let (system, received) = transmit(&code, &messages, &link.heard(), &link.direct, &link.relay, &field)?;
        if !system.is_decodable(&field) {
            println!("attempt {attempt}: rank {} < |W| = {}, retransmit", system.rank(&field), system.clients.len());
            continue;
        }
        decodable += 1;
        let decoded = system.decode_codewords(&received, &field)?;
        for (client, msg) in &decoded {
            assert_eq!(msg, &messages[*client]);
        }
        println!("attempt {attempt}: W = {:?} decoded exactly", decoded.keys().collect::<Vec<_>>());
    }
    println!("{decodable}/20 realizations decodable");
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
