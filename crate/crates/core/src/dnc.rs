//! Diversity network code: construction, masking by connectivity, PS-side
//! assembly, pruning and decoding.
//!
//! Clients are indexed `0..M`. The encoding matrix is `M x M^2`,
//!
//! ```text
//! A = [ I_M | A_0 | A_1 | ... | A_{M-1} ]
//! ```
//!
//! where `A_m` is the `M x (M-1)` block client `m` uses for its relay slots.
//! Column `m` of the identity block is client `m`'s direct transmission and
//! column `M + m (M-1) + s` is its relay codeword in slot `s`.
//!
//! The parity part `[A_0 | ... | A_{M-1}]` is a Cauchy matrix
//! `P[i][j] = 1 / (x_i - y_j)` over `M^2` distinct points (see
//! `cauchy_points`), so every square submatrix of it is nonsingular and
//! `[I | P]` has the property that any `M` columns are linearly independent.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::galois::{rank, solve, FieldSymbol, GaloisError, GaloisField, SymbolMatrix};
use crate::quantizer::Message;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DncError {
    #[error("field of order {order} is too small for {clients} clients (needs at least {needed})")]
    FieldTooSmall { clients: usize, order: u32, needed: u64 },
    #[error("need at least one client")]
    NoClients,
    #[error("client {client} must hold its own message")]
    SelfLinkDown { client: usize },
    #[error("client {client} has no copy of message {missing}")]
    MissingMessage { client: usize, missing: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("undecodable: rank {rank} < {unknowns} unknown messages")]
    Undecodable { rank: usize, unknowns: usize },
    #[error("decoding produced an inconsistent system")]
    Inconsistent,
    #[error(transparent)]
    Galois(#[from] GaloisError),
}

/// The systematic `M x M^2` DNC matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingMatrix {
    clients: usize,
    matrix: SymbolMatrix,
}

/// Distinct evaluation points for the Cauchy block.
///
/// In characteristic 2 consecutive integers give `x ^ y` differences that
/// repeat symmetrically across rows, which makes some masked minors singular.
/// There we take `0, 1, a, a^2, ...` with `a` the class of the polynomial `x`,
/// falling back to consecutive integers if `a` has too small an order.
fn cauchy_points(field: &GaloisField, count: usize) -> Result<Vec<FieldSymbol>, DncError> {
    if field.is_binary() {
        let a = field.element(2)?;
        let mut points = vec![FieldSymbol::ZERO, FieldSymbol::ONE];
        let mut p = a;
        while points.len() < count && p != FieldSymbol::ONE {
            points.push(p);
            p = field.mul(p, a);
        }
        if points.len() >= count {
            points.truncate(count);
            return Ok(points);
        }
    }
    (0..count).map(|v| Ok(field.element(v as u32)?)).collect()
}

impl EncodingMatrix {
    /// Deterministic construction for `clients` clients over `field`.
    pub fn build(clients: usize, field: &GaloisField) -> Result<Self, DncError> {
        if clients == 0 {
            return Err(DncError::NoClients);
        }
        let m = clients;
        let needed = (m as u64) * (m as u64);
        if (field.order() as u64) < needed {
            return Err(DncError::FieldTooSmall { clients: m, order: field.order(), needed });
        }
        let parity_cols = m * (m - 1);
        let points = cauchy_points(field, m * m)?;
        let mut matrix = SymbolMatrix::zeros(m, m * m);
        for i in 0..m {
            matrix.set(i, i, FieldSymbol::ONE);
            let x = points[i];
            for j in 0..parity_cols {
                let y = points[m + j];
                let entry = field.inv(field.sub(x, y))?;
                matrix.set(i, m + j, entry);
            }
        }
        Ok(EncodingMatrix { clients: m, matrix })
    }

    /// Wraps an arbitrary `M x M^2` matrix, e.g. to exercise [`verify_mds`].
    pub fn from_matrix(matrix: SymbolMatrix) -> Result<Self, DncError> {
        let m = matrix.rows();
        if m == 0 || matrix.cols() != m * m {
            return Err(DncError::Shape(format!("expected M x M^2, got {}x{}", m, matrix.cols())));
        }
        Ok(EncodingMatrix { clients: m, matrix })
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn matrix(&self) -> &SymbolMatrix {
        &self.matrix
    }

    /// Column of `A` carrying relay slot `slot` of `client`.
    pub fn relay_column(&self, client: usize, slot: usize) -> usize {
        self.clients + client * (self.clients - 1) + slot
    }

    /// The `M x (M-1)` block `A_m`.
    pub fn client_block(&self, client: usize) -> SymbolMatrix {
        let cols: Vec<usize> = (0..self.clients - 1).map(|s| self.relay_column(client, s)).collect();
        self.matrix.select_columns(&cols)
    }

    /// Integer symbol values as CSV, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.matrix.rows() {
            let line: Vec<String> = self.matrix.row(r).iter().map(|v| v.0.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Result of an MDS check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdsVerdict {
    pub passed: bool,
    pub exhaustive: bool,
    pub subsets_checked: u64,
    /// First `M`-column subset found to be singular.
    pub counterexample: Option<Vec<usize>>,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Checks that every `M`-column submatrix is nonsingular: exhaustively when
/// there are at most `budget` subsets, otherwise on `budget` uniformly random
/// subsets drawn from `rng`.
pub fn verify_mds<R: Rng + ?Sized>(
    code: &EncodingMatrix,
    field: &GaloisField,
    budget: u64,
    rng: &mut R,
) -> MdsVerdict {
    let m = code.clients;
    let n = m * m;
    let total = binomial(n as u64, m as u64);
    let singular = |cols: &[usize]| rank(&code.matrix.select_columns(cols), field) < m;

    if total <= budget as u128 {
        let mut cols: Vec<usize> = (0..m).collect();
        let mut checked = 0u64;
        loop {
            checked += 1;
            if singular(&cols) {
                return MdsVerdict { passed: false, exhaustive: true, subsets_checked: checked, counterexample: Some(cols) };
            }
            if !next_combination(&mut cols, n) {
                break;
            }
        }
        MdsVerdict { passed: true, exhaustive: true, subsets_checked: checked, counterexample: None }
    } else {
        for checked in 1..=budget {
            let mut cols = sample(rng, n, m).into_vec();
            cols.sort_unstable();
            if singular(&cols) {
                return MdsVerdict { passed: false, exhaustive: false, subsets_checked: checked, counterexample: Some(cols) };
            }
        }
        MdsVerdict { passed: true, exhaustive: false, subsets_checked: budget, counterexample: None }
    }
}

/// Advances `cols` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(cols: &mut [usize], n: usize) -> bool {
    let k = cols.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if cols[i] < n - k + i {
            cols[i] += 1;
            for j in i + 1..k {
                cols[j] = cols[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Client `m`'s block with the rows of undecoded messages zeroed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedBlock {
    pub client: usize,
    pub block: SymbolMatrix,
}

/// Applies the D2D reception pattern of `client` to its block. `heard[z]`
/// says whether `client` decoded message `z` in the first slot.
pub fn mask_client_block(code: &EncodingMatrix, client: usize, heard: &[bool]) -> Result<MaskedBlock, DncError> {
    let m = code.clients;
    if heard.len() != m || client >= m {
        return Err(DncError::Shape(format!("mask of length {} for client {client} of {m}", heard.len())));
    }
    if !heard[client] {
        return Err(DncError::SelfLinkDown { client });
    }
    let mut block = code.client_block(client);
    for (z, &up) in heard.iter().enumerate() {
        if !up {
            block.row_mut(z).fill(FieldSymbol::ZERO);
        }
    }
    Ok(MaskedBlock { client, block })
}

impl MaskedBlock {
    /// Relay codewords for the given slots. `known[z]` is the client's copy
    /// of message `z`, if it has one; every nonzero row must be known.
    pub fn encode(
        &self,
        known: &[Option<&Message>],
        slots: &[usize],
        field: &GaloisField,
    ) -> Result<Vec<Message>, DncError> {
        let len = known.iter().flatten().map(|m| m.len()).next().unwrap_or(0);
        slots
            .iter()
            .map(|&s| {
                let mut acc = vec![FieldSymbol::ZERO; len];
                for (z, msg) in known.iter().enumerate() {
                    let coeff = self.block.get(z, s);
                    if coeff.is_zero() {
                        continue;
                    }
                    let msg = msg.ok_or(DncError::MissingMessage { client: self.client, missing: z })?;
                    if msg.len() != len {
                        return Err(DncError::Shape("messages differ in length".into()));
                    }
                    field.scale_add_into(&mut acc, &msg.symbols, coeff);
                }
                Ok(Message { symbols: acc })
            })
            .collect()
    }
}

/// Where a column of the PS-side matrix was transmitted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnSource {
    /// First-slot transmission of a client's own message.
    Direct { client: usize },
    /// Relay codeword of `client` in relay slot `slot` (0-based).
    Relay { client: usize, slot: usize },
}

/// Encoding matrix of everything that reached the PS, `M x M^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsMatrix {
    pub matrix: SymbolMatrix,
    pub provenance: Vec<ColumnSource>,
}

/// Builds the PS-side matrix from masked blocks and the uplink erasures.
/// `direct[m]` is client `m`'s first-slot uplink; `relay[m][s]` its uplink in
/// relay slot `s`.
pub fn assemble_ps_matrix(
    masked: &[MaskedBlock],
    direct: &[bool],
    relay: &[Vec<bool>],
) -> Result<PsMatrix, DncError> {
    let m = direct.len();
    if masked.len() != m || relay.len() != m {
        return Err(DncError::Shape(format!(
            "{} blocks, {} direct links, {} relay vectors",
            masked.len(),
            m,
            relay.len()
        )));
    }
    let mut matrix = SymbolMatrix::zeros(m, m * m);
    let mut provenance = Vec::with_capacity(m * m);
    for (c, &up) in direct.iter().enumerate() {
        if up {
            matrix.set(c, c, FieldSymbol::ONE);
        }
        provenance.push(ColumnSource::Direct { client: c });
    }
    for (c, block) in masked.iter().enumerate() {
        if block.client != c || block.block.rows() != m || block.block.cols() != m.saturating_sub(1) {
            return Err(DncError::Shape(format!("block {c} is malformed")));
        }
        if relay[c].len() != m - 1 {
            return Err(DncError::Shape(format!("relay vector {c} has length {}", relay[c].len())));
        }
        for s in 0..m - 1 {
            let col = m + c * (m - 1) + s;
            if relay[c][s] {
                for z in 0..m {
                    matrix.set(z, col, block.block.get(z, s));
                }
            }
            provenance.push(ColumnSource::Relay { client: c, slot: s });
        }
    }
    Ok(PsMatrix { matrix, provenance })
}

/// The PS system with all-zero rows and columns removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedSystem {
    /// Clients whose messages appear in some received column, ascending.
    pub clients: Vec<usize>,
    /// Surviving column indices of the PS matrix, ascending.
    pub columns: Vec<usize>,
    /// `|clients| x |columns|`.
    pub matrix: SymbolMatrix,
    pub provenance: Vec<ColumnSource>,
}

/// Drops all-zero rows and columns.
pub fn prune(ps: &PsMatrix) -> PrunedSystem {
    let a = &ps.matrix;
    let clients: Vec<usize> = (0..a.rows()).filter(|&r| a.row(r).iter().any(|v| !v.is_zero())).collect();
    let columns: Vec<usize> = (0..a.cols()).filter(|&c| (0..a.rows()).any(|r| !a.get(r, c).is_zero())).collect();
    let matrix = a.select(&clients, &columns);
    let provenance = columns.iter().map(|&c| ps.provenance[c]).collect();
    PrunedSystem { clients, columns, matrix, provenance }
}

impl PrunedSystem {
    pub fn rank(&self, field: &GaloisField) -> usize {
        rank(&self.matrix, field)
    }

    /// Whether every involved message can be solved for.
    pub fn is_decodable(&self, field: &GaloisField) -> bool {
        !self.clients.is_empty() && self.rank(field) == self.clients.len()
    }

    /// Clients whose individual message is determined by the received
    /// codewords, even if the full system is not solvable.
    pub fn recoverable_clients(&self, field: &GaloisField) -> Vec<usize> {
        let base = self.rank(field);
        let w = self.clients.len();
        if base == w {
            return self.clients.clone();
        }
        let cols = self.matrix.cols();
        self.clients
            .iter()
            .enumerate()
            .filter(|&(i, _)| {
                let mut entries = Vec::with_capacity(w * (cols + 1));
                for r in 0..w {
                    entries.extend_from_slice(self.matrix.row(r));
                    entries.push(if r == i { FieldSymbol::ONE } else { FieldSymbol::ZERO });
                }
                let aug = SymbolMatrix::from_entries(w, cols + 1, entries).expect("sized above");
                rank(&aug, field) == base
            })
            .map(|(_, &c)| c)
            .collect()
    }

    /// Solves for the involved messages given one received codeword per
    /// surviving column (`codewords[j]` belongs to `columns[j]`).
    pub fn decode_codewords(
        &self,
        codewords: &[Message],
        field: &GaloisField,
    ) -> Result<BTreeMap<usize, Message>, DncError> {
        if codewords.len() != self.columns.len() {
            return Err(DncError::Shape(format!(
                "{} codewords for {} columns",
                codewords.len(),
                self.columns.len()
            )));
        }
        if self.clients.is_empty() {
            return Ok(BTreeMap::new());
        }
        let k = codewords[0].len();
        if codewords.iter().any(|c| c.len() != k) {
            return Err(DncError::Shape("codewords differ in length".into()));
        }
        let entries = codewords.iter().flat_map(|c| c.symbols.iter().copied()).collect();
        let rhs = SymbolMatrix::from_entries(codewords.len(), k, entries)?;
        // U A = C  <=>  A^T U^T = C^T, with one codeword per row of C^T.
        let solution = match solve(&self.matrix.transpose(), &rhs, field) {
            Ok(x) => x,
            Err(GaloisError::RankDeficient { rank, unknowns }) => return Err(DncError::Undecodable { rank, unknowns }),
            Err(GaloisError::Inconsistent) => return Err(DncError::Inconsistent),
            Err(e) => return Err(e.into()),
        };
        Ok(self
            .clients
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, Message { symbols: solution.row(i).to_vec() }))
            .collect())
    }
}

/// Decodes with codewords laid out as a `k x |V|` matrix (one row per message
/// coordinate, one column per surviving codeword).
pub fn decode_messages(
    sys: &PrunedSystem,
    received: &SymbolMatrix,
    field: &GaloisField,
) -> Result<BTreeMap<usize, Message>, DncError> {
    if received.cols() != sys.columns.len() {
        return Err(DncError::Shape(format!(
            "received matrix has {} columns, system has {}",
            received.cols(),
            sys.columns.len()
        )));
    }
    let t = received.transpose();
    let codewords: Vec<Message> = (0..t.rows()).map(|r| Message { symbols: t.row(r).to_vec() }).collect();
    sys.decode_codewords(&codewords, field)
}

/// Everything the PS receives in one attempt, computed from what each client
/// actually knows: `heard[m][z]` says whether client `m` holds message `z`.
///
/// Returns the pruned system and the codewords for its surviving columns.
pub fn transmit(
    code: &EncodingMatrix,
    messages: &[Message],
    heard: &[Vec<bool>],
    direct: &[bool],
    relay: &[Vec<bool>],
    field: &GaloisField,
) -> Result<(PrunedSystem, Vec<Message>), DncError> {
    let m = code.clients();
    if messages.len() != m || heard.len() != m {
        return Err(DncError::Shape(format!("{} messages, {} masks for {m} clients", messages.len(), heard.len())));
    }
    let masked = (0..m).map(|c| mask_client_block(code, c, &heard[c])).collect::<Result<Vec<_>, _>>()?;
    let ps = assemble_ps_matrix(&masked, direct, relay)?;
    let sys = prune(&ps);
    let mut codewords = Vec::with_capacity(sys.columns.len());
    for source in &sys.provenance {
        match *source {
            ColumnSource::Direct { client } => codewords.push(messages[client].clone()),
            ColumnSource::Relay { client, slot } => {
                let known: Vec<Option<&Message>> =
                    messages.iter().zip(&heard[client]).map(|(msg, &h)| h.then_some(msg)).collect();
                let mut out = masked[client].encode(&known, &[slot], field)?;
                codewords.push(out.pop().expect("one slot requested"));
            }
        }
    }
    Ok((sys, codewords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf() -> GaloisField {
        GaloisField::gf256()
    }

    fn msg(v: &[u32]) -> Message {
        Message { symbols: v.iter().map(|&x| FieldSymbol(x)).collect() }
    }

    #[test]
    fn single_client_code_is_identity() {
        let code = EncodingMatrix::build(1, &gf()).unwrap();
        assert_eq!(code.matrix(), &SymbolMatrix::identity(1));
    }

    #[test]
    fn systematic_and_mds_for_small_m() {
        let f = gf();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (m, subsets) in [(2usize, 6u64), (3, 84), (4, 1820)] {
            let code = EncodingMatrix::build(m, &f).unwrap();
            assert_eq!(code.matrix().select_columns(&(0..m).collect::<Vec<_>>()), SymbolMatrix::identity(m));
            let v = verify_mds(&code, &f, 10_000, &mut rng);
            assert!(v.passed && v.exhaustive, "M = {m}: {v:?}");
            assert_eq!(v.subsets_checked, subsets);
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let f = gf();
        let a = EncodingMatrix::build(5, &f).unwrap().to_csv();
        let b = EncodingMatrix::build(5, &f).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_small_fields() {
        let f = GaloisField::new(crate::galois::FieldSpec::Prime { modulus: 23 }).unwrap();
        assert!(EncodingMatrix::build(4, &f).is_ok());
        assert!(matches!(EncodingMatrix::build(5, &f), Err(DncError::FieldTooSmall { .. })));
        assert!(EncodingMatrix::build(16, &gf()).is_ok());
        assert!(EncodingMatrix::build(17, &gf()).is_err());
        assert_eq!(EncodingMatrix::build(0, &gf()), Err(DncError::NoClients));
    }

    #[test]
    fn duplicated_column_is_reported() {
        let f = gf();
        let mut a = EncodingMatrix::build(2, &f).unwrap().matrix().clone();
        for r in 0..2 {
            let v = a.get(r, 2);
            a.set(r, 3, v);
        }
        let code = EncodingMatrix::from_matrix(a).unwrap();
        let v = verify_mds(&code, &f, 100, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(!v.passed);
        assert_eq!(v.counterexample, Some(vec![2, 3]));
    }

    #[test]
    fn identity_pair_is_nonsingular() {
        let code = EncodingMatrix::build(2, &gf()).unwrap();
        assert_eq!(rank(&code.matrix().select_columns(&[0, 1]), &gf()), 2);
    }

    #[test]
    fn masking() {
        let f = gf();
        let code = EncodingMatrix::build(3, &f).unwrap();
        let full = mask_client_block(&code, 0, &[true; 3]).unwrap();
        assert_eq!(full.block, code.client_block(0));

        let only_self = mask_client_block(&code, 1, &[false, true, false]).unwrap();
        for z in 0..3 {
            assert_eq!(only_self.block.row(z).iter().all(|v| v.is_zero()), z != 1);
        }

        // Client 0 misses message 1: that row is zeroed, rows 0 and 2 kept.
        let partial = mask_client_block(&code, 0, &[true, false, true]).unwrap();
        let block = code.client_block(0);
        assert!(partial.block.row(1).iter().all(|v| v.is_zero()));
        assert_eq!(partial.block.row(0), block.row(0));
        assert_eq!(partial.block.row(2), block.row(2));

        assert_eq!(mask_client_block(&code, 2, &[true, true, false]), Err(DncError::SelfLinkDown { client: 2 }));
    }

    #[test]
    fn assembly_extremes() {
        let f = gf();
        let code = EncodingMatrix::build(3, &f).unwrap();
        let masked: Vec<_> = (0..3).map(|c| mask_client_block(&code, c, &[true; 3]).unwrap()).collect();
        let up = assemble_ps_matrix(&masked, &[true; 3], &vec![vec![true; 2]; 3]).unwrap();
        assert_eq!(&up.matrix, code.matrix());
        let sys = prune(&up);
        assert_eq!(sys.clients, vec![0, 1, 2]);
        assert_eq!(sys.columns, (0..9).collect::<Vec<_>>());

        let down = assemble_ps_matrix(&masked, &[false; 3], &vec![vec![false; 2]; 3]).unwrap();
        assert!(down.matrix.is_zero());
        let sys = prune(&down);
        assert!(sys.clients.is_empty() && sys.columns.is_empty());
        assert!(!sys.is_decodable(&f));
    }

    #[test]
    fn two_client_direct_failure() {
        // Client 1's direct link is down; both relays up with full D2D.
        let f = gf();
        let code = EncodingMatrix::build(2, &f).unwrap();
        let masked: Vec<_> = (0..2).map(|c| mask_client_block(&code, c, &[true; 2]).unwrap()).collect();
        let ps = assemble_ps_matrix(&masked, &[true, false], &[vec![true], vec![true]]).unwrap();
        let mut expect = code.matrix().clone();
        expect.set(1, 1, FieldSymbol::ZERO);
        assert_eq!(ps.matrix, expect);
        let sys = prune(&ps);
        assert_eq!(sys.columns, vec![0, 2, 3]);
        assert_eq!(sys.clients, vec![0, 1]);
        assert!(sys.is_decodable(&f));
    }

    #[test]
    fn prune_is_idempotent() {
        let f = gf();
        let code = EncodingMatrix::build(3, &f).unwrap();
        let masked: Vec<_> = (0..3)
            .map(|c| {
                let mut heard = [true; 3];
                heard[(c + 1) % 3] = false;
                mask_client_block(&code, c, &heard).unwrap()
            })
            .collect();
        let ps = assemble_ps_matrix(&masked, &[false, true, false], &[vec![true, false], vec![false, false], vec![false, true]])
            .unwrap();
        let once = prune(&ps);
        let again = prune(&PsMatrix { matrix: once.matrix.clone(), provenance: once.provenance.clone() });
        assert_eq!(again.matrix, once.matrix);
        assert_eq!(again.clients, (0..once.clients.len()).collect::<Vec<_>>());
    }

    #[test]
    fn full_reception_decodes_from_identity() {
        let f = gf();
        let code = EncodingMatrix::build(3, &f).unwrap();
        let messages = vec![msg(&[1, 2]), msg(&[3, 4]), msg(&[250, 0])];
        let heard = vec![vec![true; 3]; 3];
        let (sys, cw) = transmit(&code, &messages, &heard, &[true; 3], &vec![vec![true; 2]; 3], &f).unwrap();
        let out = sys.decode_codewords(&cw, &f).unwrap();
        assert_eq!(out.into_values().collect::<Vec<_>>(), messages);
    }

    #[test]
    fn relay_recovers_missing_direct() {
        // Client 0's direct link is down, clients 1 and 2 decoded U_0 and
        // their first relay codewords reach the PS.
        let f = gf();
        let code = EncodingMatrix::build(3, &f).unwrap();
        let messages = vec![msg(&[7, 8, 9]), msg(&[10, 11, 12]), msg(&[13, 14, 15])];
        let heard = vec![vec![true, false, false], vec![true, true, false], vec![true, false, true]];
        let direct = [false, true, true];
        let relay = vec![vec![false, false], vec![true, false], vec![true, false]];
        let (sys, cw) = transmit(&code, &messages, &heard, &direct, &relay, &f).unwrap();
        assert_eq!(sys.clients, vec![0, 1, 2]);
        assert_eq!(sys.columns, vec![1, 2, 5, 7]);
        let out = sys.decode_codewords(&cw, &f).unwrap();
        assert_eq!(out[&0], messages[0]);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn too_few_columns_is_undecodable() {
        let f = gf();
        let code = EncodingMatrix::build(2, &f).unwrap();
        let messages = vec![msg(&[1]), msg(&[2])];
        let heard = vec![vec![true, true]; 2];
        let (sys, cw) = transmit(&code, &messages, &heard, &[false, false], &[vec![true], vec![false]], &f).unwrap();
        assert_eq!(sys.clients, vec![0, 1]);
        assert_eq!(sys.columns.len(), 1);
        assert_eq!(sys.decode_codewords(&cw, &f), Err(DncError::Undecodable { rank: 1, unknowns: 2 }));
        assert!(sys.recoverable_clients(&f).is_empty());
    }

    #[test]
    fn matrix_layout_decode_matches_codeword_decode() {
        let f = gf();
        let code = EncodingMatrix::build(2, &f).unwrap();
        let messages = vec![msg(&[1, 5]), msg(&[2, 6])];
        let heard = vec![vec![true, true]; 2];
        let (sys, cw) = transmit(&code, &messages, &heard, &[false, true], &[vec![true], vec![false]], &f).unwrap();
        let k = cw[0].len();
        let mut received = SymbolMatrix::zeros(k, cw.len());
        for (j, c) in cw.iter().enumerate() {
            for i in 0..k {
                received.set(i, j, c.symbols[i]);
            }
        }
        assert_eq!(decode_messages(&sys, &received, &f).unwrap(), sys.decode_codewords(&cw, &f).unwrap());
    }

    #[test]
    fn client_cannot_encode_unheard_message() {
        let f = gf();
        let code = EncodingMatrix::build(2, &f).unwrap();
        let block = mask_client_block(&code, 0, &[true, true]).unwrap();
        let m0 = msg(&[1]);
        assert_eq!(
            block.encode(&[Some(&m0), None], &[0], &f),
            Err(DncError::MissingMessage { client: 0, missing: 1 })
        );
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(9, 3), 84);
        assert_eq!(binomial(16, 4), 1820);
        assert_eq!(binomial(100, 10), 17_310_309_456_440);
        assert_eq!(binomial(3, 4), 0);
    }
}
