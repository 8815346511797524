// Arithmetic in GF(2^8) and solving a small linear system over it.

use coded_fl::galois::{solve, FieldSymbol, GaloisField, SymbolMatrix};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let f = GaloisField::gf256();
    let (a, b) = (FieldSymbol(0x53), FieldSymbol(0xCA));
    let prod = f.mul(a, b);
    println!("{} + {} = {}", a.0, b.0, f.add(a, b).0);
    println!("{} * {} = {}", a.0, b.0, prod.0);
    assert_eq!(f.div(prod, b)?, a);

    let inv = f.inv(a)?;
    assert_eq!(f.mul(a, inv), FieldSymbol::ONE);
    println!("1/{} = {}", a.0, inv.0);

    // x = A^-1 c for a 3x3 system
    let m = SymbolMatrix::from_u32_rows(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 10]]);
    let x = SymbolMatrix::from_u32_rows(&[vec![11], vec![22], vec![33]]);
    let c = m.mul(&x, &f)?;
    let solved = solve(&m, &c, &f)?;
    assert_eq!(solved, x);
    println!("recovered x = {:?}", solved.column(0).iter().map(|s| s.0).collect::<Vec<_>>());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
