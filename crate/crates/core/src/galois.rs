//! Finite-field arithmetic and exact linear solving.
//!
//! Two field families are supported: binary extension fields GF(2^w) for
//! `1 <= w <= 16` given by a reduction polynomial, and prime fields GF(p) for
//! `p < 2^32`. Binary fields use log/antilog tables built once at
//! construction; prime fields use 64-bit modular arithmetic.
//!
//! Elements are identified with integers in `[0, order)`. For binary fields
//! the integer is the coefficient bit pattern of the polynomial
//! representation; for prime fields it is the residue.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by field construction and linear algebra over a field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GaloisError {
    #[error("unsupported binary extension width {0} (expected 1..=16)")]
    UnsupportedWidth(u32),
    #[error("polynomial {poly:#x} does not have degree {width}")]
    WrongDegree { width: u32, poly: u32 },
    #[error("polynomial {poly:#x} is reducible over GF(2)")]
    ReduciblePolynomial { poly: u32 },
    #[error("modulus {0} is not prime")]
    CompositeModulus(u32),
    #[error("symbol {value} is outside a field of order {order}")]
    SymbolOutOfRange { value: u32, order: u32 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("system is rank deficient (rank {rank}, {unknowns} unknowns)")]
    RankDeficient { rank: usize, unknowns: usize },
    #[error("system is inconsistent")]
    Inconsistent,
}

/// Description of a field, as it appears in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    /// GF(2^width) with the given reduction polynomial (bit `width` set).
    BinaryExtension { width: u32, poly: u32 },
    /// GF(p).
    Prime { modulus: u32 },
}

impl FieldSpec {
    /// GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x^2 + 1.
    pub const GF256: FieldSpec = FieldSpec::BinaryExtension { width: 8, poly: 0x11D };
    /// GF(2^16) with reduction polynomial x^16 + x^12 + x^3 + x + 1.
    pub const GF65536: FieldSpec = FieldSpec::BinaryExtension { width: 16, poly: 0x1100B };
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::GF256
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::BinaryExtension { width, poly } => write!(f, "GF(2^{width}) mod {poly:#x}"),
            FieldSpec::Prime { modulus } => write!(f, "GF({modulus})"),
        }
    }
}

/// A field element. The value is only meaningful together with its field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(transparent)]
pub struct FieldSymbol(pub u32);

impl FieldSymbol {
    pub const ZERO: FieldSymbol = FieldSymbol(0);
    pub const ONE: FieldSymbol = FieldSymbol(1);

    #[inline]
    pub fn value(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone)]
struct LogTables {
    // exp has 2 * (order - 1) entries so log[a] + log[b] never needs a reduction.
    exp: Vec<u32>,
    log: Vec<u32>,
}

#[derive(Debug, Clone)]
enum Repr {
    Binary { width: u32, tables: LogTables },
    Prime { modulus: u64 },
}

/// A finite field. Immutable after construction and cheap to share.
#[derive(Debug, Clone)]
pub struct GaloisField {
    spec: FieldSpec,
    order: u32,
    repr: Repr,
}

impl PartialEq for GaloisField {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Eq for GaloisField {}

impl GaloisField {
    /// Builds a field, verifying irreducibility or primality.
    pub fn new(spec: FieldSpec) -> Result<Self, GaloisError> {
        match spec {
            FieldSpec::BinaryExtension { width, poly } => {
                if !(1..=16).contains(&width) {
                    return Err(GaloisError::UnsupportedWidth(width));
                }
                if poly_degree(poly) != Some(width) {
                    return Err(GaloisError::WrongDegree { width, poly });
                }
                if !is_irreducible_gf2(poly) {
                    return Err(GaloisError::ReduciblePolynomial { poly });
                }
                let order = 1u32 << width;
                let tables = build_log_tables(width, poly);
                Ok(GaloisField { spec, order, repr: Repr::Binary { width, tables } })
            }
            FieldSpec::Prime { modulus } => {
                if !is_prime(modulus) {
                    return Err(GaloisError::CompositeModulus(modulus));
                }
                Ok(GaloisField { spec, order: modulus, repr: Repr::Prime { modulus: modulus as u64 } })
            }
        }
    }

    /// GF(2^8) mod 0x11D.
    pub fn gf256() -> Self {
        Self::new(FieldSpec::GF256).expect("0x11D is irreducible")
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// True for fields of characteristic 2.
    pub fn is_binary(&self) -> bool {
        matches!(self.repr, Repr::Binary { .. })
    }

    /// The element with numeric value `value`.
    pub fn element(&self, value: u32) -> Result<FieldSymbol, GaloisError> {
        if value < self.order {
            Ok(FieldSymbol(value))
        } else {
            Err(GaloisError::SymbolOutOfRange { value, order: self.order })
        }
    }

    #[inline]
    pub fn add(&self, a: FieldSymbol, b: FieldSymbol) -> FieldSymbol {
        match &self.repr {
            Repr::Binary { .. } => FieldSymbol(a.0 ^ b.0),
            Repr::Prime { modulus } => FieldSymbol(((a.0 as u64 + b.0 as u64) % modulus) as u32),
        }
    }

    #[inline]
    pub fn neg(&self, a: FieldSymbol) -> FieldSymbol {
        match &self.repr {
            Repr::Binary { .. } => a,
            Repr::Prime { modulus } => {
                if a.0 == 0 {
                    a
                } else {
                    FieldSymbol((*modulus - a.0 as u64) as u32)
                }
            }
        }
    }

    #[inline]
    pub fn sub(&self, a: FieldSymbol, b: FieldSymbol) -> FieldSymbol {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FieldSymbol, b: FieldSymbol) -> FieldSymbol {
        match &self.repr {
            Repr::Binary { tables, .. } => {
                if a.0 == 0 || b.0 == 0 {
                    FieldSymbol::ZERO
                } else {
                    let l = tables.log[a.0 as usize] + tables.log[b.0 as usize];
                    FieldSymbol(tables.exp[l as usize])
                }
            }
            Repr::Prime { modulus } => FieldSymbol(((a.0 as u64 * b.0 as u64) % modulus) as u32),
        }
    }

    pub fn inv(&self, a: FieldSymbol) -> Result<FieldSymbol, GaloisError> {
        if a.is_zero() {
            return Err(GaloisError::ZeroInverse);
        }
        Ok(match &self.repr {
            Repr::Binary { tables, .. } => {
                let n = self.order - 1;
                let l = tables.log[a.0 as usize];
                FieldSymbol(tables.exp[((n - l) % n) as usize])
            }
            Repr::Prime { modulus } => FieldSymbol(pow_mod(a.0 as u64, modulus - 2, *modulus) as u32),
        })
    }

    pub fn div(&self, a: FieldSymbol, b: FieldSymbol) -> Result<FieldSymbol, GaloisError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: FieldSymbol, mut e: u64) -> FieldSymbol {
        let mut base = a;
        let mut acc = FieldSymbol::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// `dst[i] += c * src[i]` for every `i`.
    pub fn scale_add_into(&self, dst: &mut [FieldSymbol], src: &[FieldSymbol], c: FieldSymbol) {
        debug_assert_eq!(dst.len(), src.len());
        if c.is_zero() {
            return;
        }
        match &self.repr {
            Repr::Binary { tables, width } => {
                if c == FieldSymbol::ONE {
                    for (d, s) in dst.iter_mut().zip(src) {
                        d.0 ^= s.0;
                    }
                } else if *width <= 8 && src.len() > 64 {
                    let table = self.product_table(c, tables);
                    for (d, s) in dst.iter_mut().zip(src) {
                        d.0 ^= table[s.0 as usize];
                    }
                } else {
                    let lc = tables.log[c.0 as usize];
                    for (d, s) in dst.iter_mut().zip(src) {
                        if s.0 != 0 {
                            d.0 ^= tables.exp[(tables.log[s.0 as usize] + lc) as usize];
                        }
                    }
                }
            }
            Repr::Prime { modulus } => {
                let c = c.0 as u64;
                for (d, s) in dst.iter_mut().zip(src) {
                    d.0 = ((d.0 as u64 + c * s.0 as u64) % modulus) as u32;
                }
            }
        }
    }

    /// `row[i] *= c` for every `i`.
    pub fn scale_in_place(&self, row: &mut [FieldSymbol], c: FieldSymbol) {
        if c == FieldSymbol::ONE {
            return;
        }
        for v in row.iter_mut() {
            *v = self.mul(*v, c);
        }
    }

    fn product_table(&self, c: FieldSymbol, tables: &LogTables) -> [u32; 256] {
        let mut table = [0u32; 256];
        let lc = tables.log[c.0 as usize];
        for (v, slot) in table.iter_mut().enumerate().take(self.order as usize).skip(1) {
            *slot = tables.exp[(tables.log[v] + lc) as usize];
        }
        table
    }
}

fn poly_degree(p: u32) -> Option<u32> {
    if p == 0 {
        None
    } else {
        Some(31 - p.leading_zeros())
    }
}

/// Remainder of `a` divided by `b` over GF(2)[x].
fn poly_mod_gf2(mut a: u32, b: u32) -> u32 {
    let db = poly_degree(b).expect("nonzero divisor");
    while let Some(da) = poly_degree(a) {
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

/// Trial division by every polynomial of degree 1..=deg/2.
fn is_irreducible_gf2(poly: u32) -> bool {
    let deg = match poly_degree(poly) {
        Some(d) if d >= 1 => d,
        _ => return false,
    };
    for d in 1..=deg / 2 {
        for divisor in (1u32 << d)..(1u32 << (d + 1)) {
            if poly_mod_gf2(poly, divisor) == 0 {
                return false;
            }
        }
    }
    true
}

/// Carry-less multiplication followed by reduction modulo `poly`.
fn mul_reduce(a: u32, b: u32, width: u32, poly: u32) -> u32 {
    let mut acc = 0u32;
    let mut a = a;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & (1 << width) != 0 {
            a ^= poly;
        }
    }
    acc
}

fn build_log_tables(width: u32, poly: u32) -> LogTables {
    let order = 1u32 << width;
    let n = order - 1;
    // The polynomial need not be primitive, so search for a generator.
    let generator = (1..order)
        .find(|&g| {
            let mut x = 1u32;
            for k in 1..=n {
                x = mul_reduce(x, g, width, poly);
                if x == 1 {
                    return k == n;
                }
            }
            false
        })
        .unwrap_or(1);
    let mut exp = vec![0u32; 2 * n as usize];
    let mut log = vec![0u32; order as usize];
    let mut x = 1u32;
    for k in 0..n {
        exp[k as usize] = x;
        log[x as usize] = k;
        x = mul_reduce(x, generator, width, poly);
    }
    for k in n..2 * n {
        exp[k as usize] = exp[(k - n) as usize];
    }
    LogTables { exp, log }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let n = n as u64;
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

fn pow_mod(mut base: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    acc
}

/// Dense row-major matrix of field symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<FieldSymbol>,
}

impl SymbolMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SymbolMatrix { rows, cols, entries: vec![FieldSymbol::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, FieldSymbol::ONE);
        }
        m
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<FieldSymbol>) -> Result<Self, GaloisError> {
        if entries.len() != rows * cols {
            return Err(GaloisError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(SymbolMatrix { rows, cols, entries })
    }

    /// Convenience constructor from raw integer rows. Panics on ragged input.
    pub fn from_u32_rows(rows: &[Vec<u32>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let entries = rows.iter().flatten().map(|&v| FieldSymbol(v)).collect();
        SymbolMatrix { rows: r, cols: c, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[FieldSymbol] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> FieldSymbol {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: FieldSymbol) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldSymbol] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [FieldSymbol] {
        &mut self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<FieldSymbol> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Submatrix on the given row and column index lists (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                out.set(i, j, self.get(r, c));
            }
        }
        out
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.select(&rows, cols)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|v| v.is_zero())
    }

    /// Matrix product over `field`.
    pub fn mul(&self, other: &SymbolMatrix, field: &GaloisField) -> Result<SymbolMatrix, GaloisError> {
        if self.cols != other.rows {
            return Err(GaloisError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = SymbolMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                let (dst, src) = (r * out.cols, k * other.cols);
                field.scale_add_into(
                    &mut out.entries[dst..dst + other.cols],
                    &other.entries[src..src + other.cols],
                    a,
                );
            }
        }
        Ok(out)
    }
}

/// Rank by Gaussian elimination.
pub fn rank(a: &SymbolMatrix, field: &GaloisField) -> usize {
    let mut m = a.clone();
    let mut rank = 0;
    for col in 0..m.cols {
        if rank == m.rows {
            break;
        }
        let Some(p) = (rank..m.rows).find(|&r| !m.get(r, col).is_zero()) else {
            continue;
        };
        swap_rows(&mut m, rank, p);
        let inv = field.inv(m.get(rank, col)).expect("pivot is nonzero");
        field.scale_in_place(m.row_mut(rank), inv);
        let pivot_row = m.row(rank).to_vec();
        for r in rank + 1..m.rows {
            let f = m.get(r, col);
            if !f.is_zero() {
                field.scale_add_into(m.row_mut(r), &pivot_row, field.neg(f));
            }
        }
        rank += 1;
    }
    rank
}

fn swap_rows(m: &mut SymbolMatrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    let cols = m.cols;
    let (lo, hi) = (a.min(b), a.max(b));
    let (head, tail) = m.entries.split_at_mut(hi * cols);
    head[lo * cols..(lo + 1) * cols].swap_with_slice(&mut tail[..cols]);
}

/// Solves `a * x = c` for `x`, where `a` is `n x k` with `n >= k` and `c` is
/// `n x d`. Returns the unique `k x d` solution.
///
/// Gauss-Jordan elimination with the first nonzero entry of each column as
/// pivot. Fails with [`GaloisError::RankDeficient`] when `a` has rank below
/// `k`, and with [`GaloisError::Inconsistent`] when the surplus equations
/// disagree with the solution.
pub fn solve(a: &SymbolMatrix, c: &SymbolMatrix, field: &GaloisField) -> Result<SymbolMatrix, GaloisError> {
    let (n, k) = (a.rows, a.cols);
    if c.rows != n {
        return Err(GaloisError::DimensionMismatch(format!(
            "coefficient matrix has {n} rows, right-hand side has {}",
            c.rows
        )));
    }
    if n < k {
        return Err(GaloisError::RankDeficient { rank: rank(a, field), unknowns: k });
    }
    let mut a = a.clone();
    let mut c = c.clone();
    for col in 0..k {
        let Some(p) = (col..n).find(|&r| !a.get(r, col).is_zero()) else {
            // Columns before this one are already reduced, so the rank is
            // at most `col` plus whatever the remaining columns contribute.
            return Err(GaloisError::RankDeficient { rank: rank(&a, field), unknowns: k });
        };
        swap_rows(&mut a, col, p);
        swap_rows(&mut c, col, p);
        let inv = field.inv(a.get(col, col))?;
        field.scale_in_place(a.row_mut(col), inv);
        field.scale_in_place(c.row_mut(col), inv);
        let a_pivot = a.row(col).to_vec();
        let c_pivot = c.row(col).to_vec();
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a.get(r, col);
            if f.is_zero() {
                continue;
            }
            let f = field.neg(f);
            field.scale_add_into(a.row_mut(r), &a_pivot, f);
            field.scale_add_into(c.row_mut(r), &c_pivot, f);
        }
    }
    if (k..n).any(|r| c.row(r).iter().any(|v| !v.is_zero())) {
        return Err(GaloisError::Inconsistent);
    }
    let x = c.entries[..k * c.cols].to_vec();
    SymbolMatrix::from_entries(k, c.cols, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Schoolbook carry-less product then long division; independent of the tables.
    fn clmul_reduce_oracle(a: u32, b: u32, poly: u32) -> u32 {
        let mut prod = 0u64;
        for i in 0..32 {
            if b >> i & 1 == 1 {
                prod ^= (a as u64) << i;
            }
        }
        let deg = 31 - poly.leading_zeros();
        for bit in (deg..64).rev() {
            if prod >> bit & 1 == 1 {
                prod ^= (poly as u64) << (bit - deg);
            }
        }
        prod as u32
    }

    fn fields() -> Vec<GaloisField> {
        vec![
            GaloisField::gf256(),
            GaloisField::new(FieldSpec::GF65536).unwrap(),
            GaloisField::new(FieldSpec::Prime { modulus: 101 }).unwrap(),
            GaloisField::new(FieldSpec::Prime { modulus: 65_521 }).unwrap(),
            // Irreducible but not primitive.
            GaloisField::new(FieldSpec::BinaryExtension { width: 8, poly: 0x11B }).unwrap(),
        ]
    }

    #[test]
    fn constructs_standard_fields() {
        assert_eq!(GaloisField::gf256().order(), 256);
        assert_eq!(GaloisField::new(FieldSpec::Prime { modulus: 101 }).unwrap().order(), 101);
    }

    #[test]
    fn rejects_reducible_and_composite() {
        assert_eq!(
            GaloisField::new(FieldSpec::BinaryExtension { width: 8, poly: 0x100 }).unwrap_err(),
            GaloisError::ReduciblePolynomial { poly: 0x100 }
        );
        // x^8 + 1 = (x + 1)^8
        assert!(GaloisField::new(FieldSpec::BinaryExtension { width: 8, poly: 0x101 }).is_err());
        assert_eq!(
            GaloisField::new(FieldSpec::Prime { modulus: 91 }).unwrap_err(),
            GaloisError::CompositeModulus(91)
        );
        assert!(GaloisField::new(FieldSpec::Prime { modulus: 1 }).is_err());
        assert!(matches!(
            GaloisField::new(FieldSpec::BinaryExtension { width: 8, poly: 0x1D }),
            Err(GaloisError::WrongDegree { .. })
        ));
        assert!(GaloisField::new(FieldSpec::BinaryExtension { width: 17, poly: 0x2_0009 }).is_err());
    }

    #[test]
    fn irreducible_count_matches_necklace_formula() {
        // Number of irreducible degree-8 polynomials over GF(2) is 30.
        let count = (0x100u32..0x200).filter(|&p| is_irreducible_gf2(p)).count();
        assert_eq!(count, 30);
    }

    #[test]
    fn characteristic_two_self_inverse() {
        let f = GaloisField::gf256();
        for a in 0..256 {
            assert_eq!(f.add(FieldSymbol(a), FieldSymbol(a)), FieldSymbol::ZERO);
        }
    }

    #[test]
    fn mul_matches_carryless_oracle() {
        let f = GaloisField::gf256();
        assert_eq!(clmul_reduce_oracle(0x02, 0x80, 0x11D), 0x1D);
        assert_eq!(f.mul(FieldSymbol(0x02), FieldSymbol(0x80)), FieldSymbol(0x1D));
        for a in 0..256 {
            for b in 0..256 {
                assert_eq!(f.mul(FieldSymbol(a), FieldSymbol(b)).0, clmul_reduce_oracle(a, b, 0x11D));
            }
        }
        let g = GaloisField::new(FieldSpec::BinaryExtension { width: 8, poly: 0x11B }).unwrap();
        assert_eq!(g.mul(FieldSymbol(0x57), FieldSymbol(0x83)), FieldSymbol(0xC1));
    }

    #[test]
    fn exhaustive_inverses() {
        for f in fields() {
            for a in 1..f.order() {
                let a = FieldSymbol(a);
                assert_eq!(f.mul(a, f.inv(a).unwrap()), FieldSymbol::ONE, "{} a={a}", f.spec());
            }
            assert_eq!(f.inv(FieldSymbol::ZERO), Err(GaloisError::ZeroInverse));
        }
    }

    #[test]
    fn field_axioms_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in fields() {
            for _ in 0..10_000 {
                let [a, b, c] = [0; 3].map(|_| FieldSymbol(rng.random_range(0..f.order())));
                assert_eq!(f.add(a, b), f.add(b, a));
                assert_eq!(f.mul(a, b), f.mul(b, a));
                assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                assert_eq!(f.sub(f.add(a, b), b), a);
            }
        }
    }

    #[test]
    fn scale_add_matches_scalar_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in fields() {
            let src: Vec<FieldSymbol> = (0..200).map(|_| FieldSymbol(rng.random_range(0..f.order()))).collect();
            let mut dst: Vec<FieldSymbol> = (0..200).map(|_| FieldSymbol(rng.random_range(0..f.order()))).collect();
            let c = FieldSymbol(rng.random_range(0..f.order()));
            let expect: Vec<_> = dst.iter().zip(&src).map(|(&d, &s)| f.add(d, f.mul(c, s))).collect();
            f.scale_add_into(&mut dst, &src, c);
            assert_eq!(dst, expect);
        }
    }

    #[test]
    fn solve_identity_and_scalar() {
        let f = GaloisField::gf256();
        let c = SymbolMatrix::from_u32_rows(&[vec![1, 2, 3], vec![4, 5, 6]]);
        assert_eq!(solve(&SymbolMatrix::identity(2), &c, &f).unwrap(), c);

        let a = SymbolMatrix::from_u32_rows(&[vec![0x53]]);
        let c = SymbolMatrix::from_u32_rows(&[vec![0x10]]);
        let x = solve(&a, &c, &f).unwrap();
        assert_eq!(x.get(0, 0), f.mul(FieldSymbol(0x10), f.inv(FieldSymbol(0x53)).unwrap()));
    }

    fn random_matrix(rng: &mut ChaCha8Rng, f: &GaloisField, r: usize, c: usize) -> SymbolMatrix {
        let entries = (0..r * c).map(|_| FieldSymbol(rng.random_range(0..f.order()))).collect();
        SymbolMatrix::from_entries(r, c, entries).unwrap()
    }

    #[test]
    fn solve_round_trips_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in fields() {
            let mut solved = 0;
            while solved < 200 {
                let k = rng.random_range(1..=10);
                let n = rng.random_range(k..=12);
                let a = random_matrix(&mut rng, &f, n, k);
                if rank(&a, &f) < k {
                    assert!(matches!(
                        solve(&a, &SymbolMatrix::zeros(n, 1), &f),
                        Err(GaloisError::RankDeficient { .. })
                    ));
                    continue;
                }
                let x = random_matrix(&mut rng, &f, k, 3);
                let c = a.mul(&x, &f).unwrap();
                assert_eq!(solve(&a, &c, &f).unwrap(), x);
                solved += 1;
            }
        }
    }

    #[test]
    fn solve_detects_deficiency_and_inconsistency() {
        let f = GaloisField::gf256();
        let a = SymbolMatrix::from_u32_rows(&[vec![1, 1], vec![2, 2], vec![3, 3]]);
        let c = SymbolMatrix::zeros(3, 1);
        assert!(matches!(solve(&a, &c, &f), Err(GaloisError::RankDeficient { rank: 1, unknowns: 2 })));

        let a = SymbolMatrix::from_u32_rows(&[vec![1], vec![1]]);
        let c = SymbolMatrix::from_u32_rows(&[vec![5], vec![6]]);
        assert_eq!(solve(&a, &c, &f), Err(GaloisError::Inconsistent));

        let a = SymbolMatrix::from_u32_rows(&[vec![1, 0]]);
        assert!(matches!(solve(&a, &SymbolMatrix::zeros(1, 1), &f), Err(GaloisError::RankDeficient { .. })));
    }

    #[test]
    fn rank_of_known_matrices() {
        let f = GaloisField::gf256();
        assert_eq!(rank(&SymbolMatrix::identity(4), &f), 4);
        assert_eq!(rank(&SymbolMatrix::zeros(3, 3), &f), 0);
        let dup = SymbolMatrix::from_u32_rows(&[vec![1, 7, 1], vec![9, 3, 9]]);
        assert_eq!(rank(&dup, &f), 2);
        assert_eq!(rank(&dup.select_columns(&[0, 2]), &f), 1);
    }
}
