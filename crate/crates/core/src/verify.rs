//! Property suites: MDS structure, erasure recovery, single-attempt outage,
//! participation identities and quantizer statistics.
//!
//! Each suite returns the raw statistics so callers can apply their own
//! tolerances; [`run_all`] applies the default ones and is what the
//! `verify` subcommand prints.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{sample_connectivity, ConnectivityRealization};
use crate::dnc::{assemble_ps_matrix, mask_client_block, prune, transmit, verify_mds, DncError, EncodingMatrix, MdsVerdict, PsMatrix};
use crate::galois::{FieldSymbol, GaloisField, SymbolMatrix};
use crate::quantizer::{dequantize, quantize, variance_bound, Message, QuantizerSpec};
use crate::rng::{stream, Purpose};
use crate::theory::{alpha_bar, client_outage_dominant, kbar_inverse};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// MDS check of the `M`-client code: exhaustive when `C(M^2, M) <= budget`,
/// otherwise `budget` random column subsets.
pub fn mds_check(clients: usize, field: &GaloisField, budget: u64, seed: u64) -> Result<MdsVerdict, DncError> {
    let code = EncodingMatrix::build(clients, field)?;
    let mut rng = stream(seed, Purpose::Verification, &[1, clients as u64]);
    Ok(verify_mds(&code, field, budget, &mut rng))
}

/// Statistics of random-erasure decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundTripStats {
    pub realizations: u64,
    pub decodable: u64,
    /// Decodable realizations whose decoded messages all matched.
    pub exact: u64,
    pub messages_checked: u64,
}

/// Draws `realizations` link patterns at outage `p_e` and random messages of
/// `len` symbols, and checks that every decodable system returns the sent
/// messages exactly.
pub fn erasure_round_trip(
    clients: usize,
    realizations: u64,
    p_e: f64,
    len: usize,
    field: &GaloisField,
    seed: u64,
) -> Result<RoundTripStats, DncError> {
    let code = EncodingMatrix::build(clients, field)?;
    let order = field.order();
    let chunks = 64u64;
    let per = realizations.div_ceil(chunks);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream(seed, Purpose::Verification, &[2, clients as u64, chunk]);
            let mut s = RoundTripStats { realizations: 0, decodable: 0, exact: 0, messages_checked: 0 };
            let n = per.min(realizations.saturating_sub(chunk * per));
            for _ in 0..n {
                let messages: Vec<Message> = (0..clients)
                    .map(|_| Message { symbols: (0..len).map(|_| FieldSymbol(rng.random_range(0..order))).collect() })
                    .collect();
                let r = sample_connectivity(clients, p_e, &mut rng).expect("valid probability");
                let (sys, codewords) = transmit(&code, &messages, &r.heard(), &r.direct, &r.relay, field)?;
                s.realizations += 1;
                if !sys.is_decodable(field) {
                    continue;
                }
                s.decodable += 1;
                let decoded = sys.decode_codewords(&codewords, field)?;
                s.messages_checked += decoded.len() as u64;
                if decoded.len() == sys.clients.len() && decoded.iter().all(|(&m, msg)| *msg == messages[m]) {
                    s.exact += 1;
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>, DncError>>()?;
    Ok(parts.into_iter().fold(
        RoundTripStats { realizations: 0, decodable: 0, exact: 0, messages_checked: 0 },
        |a, b| RoundTripStats {
            realizations: a.realizations + b.realizations,
            decodable: a.decodable + b.decodable,
            exact: a.exact + b.exact,
            messages_checked: a.messages_checked + b.messages_checked,
        },
    ))
}

/// Counts for one reading of the per-client recovery guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReadingCount {
    /// `(pattern, client)` pairs where the premise holds.
    pub cases: u64,
    /// Of those, pairs where the client's message was not recoverable.
    pub violations: u64,
}

/// Exhaustive check over every erasure pattern of an `M`-client round.
///
/// For client `m`, `N_m` is the set of clients holding `U_m` after the first
/// slot (including `m`). Three premises are evaluated:
///
/// - `interference_free`: the received codewords sent by members of `N_m`
///   involve only messages of `N_m`, and there are at least `|N_m|` of them.
///   Recovery is checked from those codewords alone. This is what the MDS
///   structure guarantees.
/// - `involving`: at least `|N_m|` received codewords involve `U_m` (relay
///   codewords of `N_m` plus `m`'s direct transmission).
/// - `from_members`: at least `|N_m|` received codewords of any kind were
///   sent by members of `N_m`.
///
/// The last two premises can be met by a single relay codeword that mixes
/// `U_m` with a message from outside `N_m`, so no linear code satisfies
/// them; they are reported for comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoveryGuarantee {
    pub clients: usize,
    pub patterns: u64,
    pub interference_free: ReadingCount,
    pub involving: ReadingCount,
    pub from_members: ReadingCount,
    /// First violation of `interference_free`, if any.
    pub counterexample: Option<(usize, ConnectivityRealization)>,
}

fn realization_from_bits(clients: usize, bits: u64) -> ConnectivityRealization {
    let mut r = ConnectivityRealization::all_up(clients);
    let mut i = 0;
    let mut next = || {
        let b = bits >> i & 1 == 1;
        i += 1;
        b
    };
    for a in 0..clients {
        for k in 0..clients {
            if a != k {
                r.d2d[a][k] = next();
            }
        }
    }
    for a in 0..clients {
        r.direct[a] = next();
    }
    for a in 0..clients {
        for s in 0..clients - 1 {
            r.relay[a][s] = next();
        }
    }
    r
}

/// Whether `e_client` lies in the span of the selected columns of `ps`.
fn recoverable_from(ps: &PsMatrix, columns: &[usize], client: usize, field: &GaloisField) -> bool {
    let mut kept = PsMatrix { matrix: SymbolMatrix::zeros(ps.matrix.rows(), ps.matrix.cols()), provenance: ps.provenance.clone() };
    for &c in columns {
        for r in 0..ps.matrix.rows() {
            kept.matrix.set(r, c, ps.matrix.get(r, c));
        }
    }
    prune(&kept).recoverable_clients(field).contains(&client)
}

pub fn recovery_guarantee(clients: usize, field: &GaloisField) -> Result<RecoveryGuarantee, DncError> {
    recovery_guarantee_for(&EncodingMatrix::build(clients, field)?, field)
}

/// [`recovery_guarantee`] for an arbitrary code.
pub fn recovery_guarantee_for(code: &EncodingMatrix, field: &GaloisField) -> Result<RecoveryGuarantee, DncError> {
    let m = code.clients();
    let nbits = 2 * m * (m - 1) + m;
    if nbits > 24 {
        return Err(DncError::Shape(format!("{nbits}-bit pattern space is too large to enumerate")));
    }
    let zero = ReadingCount { cases: 0, violations: 0 };
    let mut out = RecoveryGuarantee {
        clients: m,
        patterns: 1 << nbits,
        interference_free: zero,
        involving: zero,
        from_members: zero,
        counterexample: None,
    };
    for bits in 0..1u64 << nbits {
        let r = realization_from_bits(m, bits);
        let heard = r.heard();
        let masked = (0..m).map(|c| mask_client_block(code, c, &heard[c])).collect::<Result<Vec<_>, _>>()?;
        let ps = assemble_ps_matrix(&masked, &r.direct, &r.relay)?;
        let full = prune(&ps);
        let recovered = full.recoverable_clients(field);
        for u in 0..m {
            let members: Vec<usize> = (0..m).filter(|&k| r.d2d[u][k]).collect();
            let need = members.len() as u64;
            // Received columns sent by members of N_u.
            let mut cols = Vec::new();
            for &k in &members {
                if r.direct[k] {
                    cols.push(k);
                }
                for s in 0..m - 1 {
                    if r.relay[k][s] {
                        cols.push(code.relay_column(k, s));
                    }
                }
            }
            let relays = cols.iter().filter(|&&c| c >= m).count() as u64;
            let got = recovered.contains(&u);

            let involving = relays + u64::from(r.direct[u]);
            if involving >= need {
                out.involving.cases += 1;
                out.involving.violations += u64::from(!got);
            }
            if cols.len() as u64 >= need {
                out.from_members.cases += 1;
                out.from_members.violations += u64::from(!got);
                let closed = cols
                    .iter()
                    .all(|&c| (0..m).all(|z| ps.matrix.get(z, c).is_zero() || members.contains(&z)));
                if closed {
                    out.interference_free.cases += 1;
                    if !recoverable_from(&ps, &cols, u, field) {
                        out.interference_free.violations += 1;
                        if out.counterexample.is_none() {
                            out.counterexample = Some((u, r.clone()));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Frequency with which the PS's received system does not involve a
/// client's message at all, in a single attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageEstimate {
    pub trials: u64,
    /// Attempts where the client's message entered no received codeword.
    pub misses: u64,
    /// Attempts where its message was not in the span of what arrived, so
    /// not recoverable even by partial decoding.
    pub unrecoverable: u64,
    /// Attempts where the client was absent or the whole system was not
    /// decodable, i.e. the protocol would not deliver it this attempt.
    pub undelivered: u64,
}

impl OutageEstimate {
    pub fn rate(&self) -> f64 {
        self.misses as f64 / self.trials as f64
    }

    /// Binomial standard error of [`rate`](Self::rate).
    pub fn stderr(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

pub fn single_attempt_outage(
    clients: usize,
    p_e: f64,
    client: usize,
    trials: u64,
    seed: u64,
) -> Result<OutageEstimate, DncError> {
    let field = GaloisField::gf256();
    let code = EncodingMatrix::build(clients, &field)?;
    let chunks = 64u64;
    let per = trials.div_ceil(chunks);
    let misses = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream(seed, Purpose::Verification, &[3, clients as u64, p_e.to_bits(), chunk]);
            let n = per.min(trials.saturating_sub(chunk * per));
            let (mut misses, mut unrecoverable, mut undelivered) = (0u64, 0u64, 0u64);
            for _ in 0..n {
                let r = sample_connectivity(clients, p_e, &mut rng).expect("valid probability");
                let heard = r.heard();
                let masked =
                    (0..clients).map(|c| mask_client_block(&code, c, &heard[c])).collect::<Result<Vec<_>, _>>()?;
                let sys = prune(&assemble_ps_matrix(&masked, &r.direct, &r.relay)?);
                let present = sys.clients.contains(&client);
                misses += u64::from(!present);
                unrecoverable += u64::from(!present || !sys.recoverable_clients(&field).contains(&client));
                undelivered += u64::from(!present || !sys.is_decodable(&field));
            }
            Ok((misses, unrecoverable, undelivered))
        })
        .collect::<Result<Vec<_>, DncError>>()?
        .into_iter()
        .fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(OutageEstimate { trials, misses: misses.0, unrecoverable: misses.1, undelivered: misses.2 })
}

/// `P(client not involved)` in closed form: its direct link and own relays
/// fail, and every peer either missed it or lost all its relay slots.
pub fn single_attempt_outage_exact(clients: usize, p_e: f64) -> f64 {
    let m = clients as i32;
    let p = p_e;
    p.powi(m) * (p + (1.0 - p) * p.powi(m - 1)).powi(m - 1)
}

/// Monte Carlo estimate with its standard error, per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateEstimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Estimates `E[sum_{m in W} delta_m / |W| | W != {}]` and
/// `E[sum_{m in W} delta_m / |W|^2 | W != {}]` when each client is
/// independently absent with probability `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipationEstimate {
    pub draws: u64,
    pub average: CoordinateEstimate,
    pub weighted: CoordinateEstimate,
}

pub fn participation_monte_carlo(deltas: &[Vec<f64>], q: f64, draws: u64, seed: u64) -> ParticipationEstimate {
    let m = deltas.len();
    let d = deltas.first().map_or(0, Vec::len);
    let mut rng = stream(seed, Purpose::Verification, &[4, m as u64, q.to_bits()]);
    let mut s1 = vec![0.0; d];
    let mut q1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    let mut q2 = vec![0.0; d];
    let mut present = vec![false; m];
    let mut n = 0u64;
    while n < draws {
        let mut k = 0usize;
        for p in present.iter_mut() {
            *p = rng.random::<f64>() >= q;
            k += usize::from(*p);
        }
        if k == 0 {
            continue;
        }
        n += 1;
        let inv = 1.0 / k as f64;
        for j in 0..d {
            let sum: f64 = (0..m).filter(|&c| present[c]).map(|c| deltas[c][j]).sum();
            let a = sum * inv;
            let b = sum * inv * inv;
            s1[j] += a;
            q1[j] += a * a;
            s2[j] += b;
            q2[j] += b * b;
        }
    }
    let finish = |s: &[f64], q: &[f64]| {
        let nf = n as f64;
        let mean: Vec<f64> = s.iter().map(|v| v / nf).collect();
        let stderr =
            mean.iter().zip(q).map(|(mu, qq)| ((qq / nf - mu * mu).max(0.0) * nf / (nf - 1.0) / nf).sqrt()).collect();
        CoordinateEstimate { mean, stderr }
    };
    ParticipationEstimate { draws: n, average: finish(&s1, &q1), weighted: finish(&s2, &q2) }
}

/// Statistics of repeated stochastic quantization of one input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizerStats {
    pub input: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Empirical `E||Q(x) - x||^2`.
    pub mse: f64,
    /// Analytical bound on that error.
    pub bound: f64,
}

impl QuantizerStats {
    /// Largest `|mean - x| / stderr` over coordinates with nonzero spread.
    pub fn max_z(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.input)
            .zip(&self.stderr)
            .map(|((m, x), s)| if *s > 0.0 { (m - x).abs() / s } else if m == x { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

pub fn quantizer_statistics<R: Rng + ?Sized>(input: &[f64], spec: &QuantizerSpec, draws: u64, rng: &mut R) -> QuantizerStats {
    let d = input.len();
    let mut s = vec![0.0; d];
    let mut sq = vec![0.0; d];
    let mut err = 0.0;
    for _ in 0..draws {
        let q = quantize(input, spec, rng).expect("input matches spec");
        let v = dequantize(&q, spec);
        for j in 0..d {
            s[j] += v[j];
            sq[j] += v[j] * v[j];
            err += (v[j] - input[j]).powi(2);
        }
    }
    let n = draws as f64;
    let mean: Vec<f64> = s.iter().map(|v| v / n).collect();
    let stderr = mean.iter().zip(&sq).map(|(mu, q)| ((q / n - mu * mu).max(0.0) / (n - 1.0)).sqrt()).collect();
    QuantizerStats { input: input.to_vec(), mean, stderr, mse: err / n, bound: variance_bound(spec) }
}

/// Runs the suites at reduced sizes with default tolerances.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    let field = GaloisField::gf256();
    let mut out = Vec::new();

    for m in 2..=10 {
        let report = match mds_check(m, &field, 10_000, seed) {
            Ok(v) => CheckReport {
                name: format!("mds M={m}"),
                passed: v.passed,
                detail: format!(
                    "{} {} subsets{}",
                    if v.exhaustive { "all" } else { "sampled" },
                    v.subsets_checked,
                    v.counterexample.map(|c| format!(", singular: {c:?}")).unwrap_or_default()
                ),
            },
            Err(e) => CheckReport { name: format!("mds M={m}"), passed: false, detail: e.to_string() },
        };
        out.push(report);
    }

    for m in 2..=6 {
        let name = format!("erasure round trip M={m}");
        out.push(match erasure_round_trip(m, 2_000, 0.3, 16, &field, seed) {
            Ok(s) => CheckReport {
                name,
                passed: s.exact == s.decodable,
                detail: format!("{}/{} decodable realizations exact", s.exact, s.decodable),
            },
            Err(e) => CheckReport { name, passed: false, detail: e.to_string() },
        });
    }

    out.push(match recovery_guarantee(3, &field) {
        Ok(g) => CheckReport {
            name: "recovery guarantee M=3".into(),
            passed: g.interference_free.violations == 0,
            detail: format!(
                "{} patterns; interference-free premise {}/{} violated; literal premises {}/{} and {}/{}",
                g.patterns,
                g.interference_free.violations,
                g.interference_free.cases,
                g.involving.violations,
                g.involving.cases,
                g.from_members.violations,
                g.from_members.cases
            ),
        },
        Err(e) => CheckReport { name: "recovery guarantee M=3".into(), passed: false, detail: e.to_string() },
    });

    for (m, p) in [(2, 0.3), (3, 0.3)] {
        let name = format!("single-attempt outage M={m} p={p}");
        out.push(match single_attempt_outage(m, p, 0, 200_000, seed) {
            Ok(est) => {
                let lo = client_outage_dominant(m, p).expect("valid");
                let exact = single_attempt_outage_exact(m, p);
                let rate = est.rate();
                CheckReport {
                    name,
                    passed: rate >= lo && rate <= 2.0 * lo && (rate - exact).abs() <= 4.0 * est.stderr(),
                    detail: format!("rate {rate:.6} (exact {exact:.6}), dominant term {lo:.6}"),
                }
            }
            Err(e) => CheckReport { name, passed: false, detail: e.to_string() },
        });
    }

    for m in [2usize, 5, 8] {
        let q = 0.3;
        let mut rng = stream(seed, Purpose::Verification, &[5, m as u64]);
        let deltas: Vec<Vec<f64>> = (0..m).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let est = participation_monte_carlo(&deltas, q, 20_000, seed);
        let ab = alpha_bar(m, q).expect("valid");
        let mut worst: f64 = 0.0;
        for j in 0..4 {
            let total: f64 = deltas.iter().map(|d| d[j]).sum();
            worst = worst.max((est.average.mean[j] - total / m as f64).abs() / est.average.stderr[j]);
            worst = worst.max((est.weighted.mean[j] - ab * total).abs() / est.weighted.stderr[j]);
        }
        out.push(CheckReport {
            name: format!("participation identities M={m} q={q}"),
            passed: worst <= 4.0,
            detail: format!("max |z| = {worst:.2}, 1/Kbar = {:.6}", kbar_inverse(m, q).expect("valid")),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outage_closed_form_small_cases() {
        let p: f64 = 0.3;
        assert!((single_attempt_outage_exact(1, p) - p).abs() < 1e-15);
        assert!((single_attempt_outage_exact(2, p) - p.powi(3) * (2.0 - p)).abs() < 1e-15);
        assert!((single_attempt_outage_exact(3, p) - p.powi(5) * (1.0 + (1.0 - p) * p).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn recovery_guarantee_for_two_clients() {
        let g = recovery_guarantee(2, &GaloisField::gf256()).unwrap();
        assert_eq!(g.patterns, 1 << 6);
        assert_eq!(g.interference_free.violations, 0);
        assert!(g.interference_free.cases > 0);
    }

    #[test]
    fn round_trip_is_exact() {
        let s = erasure_round_trip(3, 500, 0.3, 8, &GaloisField::gf256(), 1).unwrap();
        assert_eq!(s.realizations, 500);
        assert!(s.decodable > 0);
        assert_eq!(s.exact, s.decodable);
    }

    #[test]
    fn quantizer_statistics_are_sane() {
        let spec = QuantizerSpec::uniform(2, 2, -1.0, 1.0).unwrap();
        let mut rng = stream(0, Purpose::Verification, &[]);
        let s = quantizer_statistics(&[0.1, -0.5], &spec, 20_000, &mut rng);
        assert!(s.max_z() < 5.0);
        assert!(s.mse <= s.bound);
    }
}
