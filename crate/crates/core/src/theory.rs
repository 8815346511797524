//! Closed-form outage, participation and convergence quantities.
//!
//! With `q` the probability that the PS cannot see a given client's update,
//! the decoded set `W` is a Bernoulli(1 - q) subset of the clients. Averaging
//! over `W` conditioned on `W != {}`:
//!
//! * `E[sum_{m in W} x_m / |W|] = mean(x)`,
//! * `E[1/|W|] = 1/K_bar = sum_v (1/v) C(M,v) (1-q)^v q^(M-v) / (1 - q^M)`,
//! * `E[sum_{m in W} x_m / |W|^2] = alpha_bar * sum(x)` with `alpha_bar = 1/(M K_bar)`.
//!
//! `K_star` is the lower bound on `K_bar` obtained from
//! `1/K_bar <= 2 / ((M+1)(1-q)(1-q^M))` with `q ~ P_e^(2M-1)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("probability must lie in [0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("need at least one client")]
    NoClients,
    #[error("step-size condition violated: I = {local_steps} > (T I)^(1/4) / K*^(3/4) = {limit}")]
    ConditionViolated { local_steps: u64, limit: f64 },
    #[error("invalid constant: {0}")]
    InvalidConstant(String),
}

fn check_prob(p: f64) -> Result<(), TheoryError> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(TheoryError::InvalidProbability(p))
    }
}

/// Probability that client `m` is invisible to the PS because no one relays
/// it and all of its own transmissions fail: `p_e^(2M-1)`.
pub fn client_outage_dominant(clients: usize, p_e: f64) -> Result<f64, TheoryError> {
    check_prob(p_e)?;
    if clients == 0 {
        return Err(TheoryError::NoClients);
    }
    Ok(p_e.powi(2 * clients as i32 - 1))
}

/// Exact `C(n, k)` as an integer; exact for every `n <= 64`.
pub fn binomial_exact(n: u32, k: u32) -> u128 {
    crate::dnc::binomial(n as u64, k as u64)
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    sum + c
}

/// `E[1/|W| | W != {}]` for `|W| ~ Binomial(M, 1 - q)`.
pub fn kbar_inverse(clients: usize, q: f64) -> Result<f64, TheoryError> {
    check_prob(q)?;
    if clients == 0 {
        return Err(TheoryError::NoClients);
    }
    let m = clients as u32;
    let p = 1.0 - q;
    let norm = -(q.ln() * m as f64).exp_m1(); // 1 - q^M, accurate for small q^M
    let norm = if q == 0.0 { 1.0 } else { norm };
    let s = compensated_sum((1..=m).map(|v| {
        let c = binomial_exact(m, v) as f64;
        c * p.powi(v as i32) * q.powi((m - v) as i32) / v as f64
    }));
    Ok(s / norm)
}

/// `alpha_bar = (1/K_bar) / M`.
pub fn alpha_bar(clients: usize, q: f64) -> Result<f64, TheoryError> {
    Ok(kbar_inverse(clients, q)? / clients as f64)
}

/// Upper bound `2 / ((M+1)(1-q)(1-q^M))` on `1/K_bar`.
pub fn kbar_inverse_bound(clients: usize, q: f64) -> Result<f64, TheoryError> {
    check_prob(q)?;
    if clients == 0 {
        return Err(TheoryError::NoClients);
    }
    let m = clients as f64;
    Ok(2.0 / ((m + 1.0) * (1.0 - q) * (1.0 - q.powi(clients as i32))))
}

/// `K* = (M+1)(1 - p_e^(2M-1))(1 - p_e^(M(2M-1))) / 2`.
pub fn kstar(clients: usize, p_e: f64) -> Result<f64, TheoryError> {
    check_prob(p_e)?;
    if clients == 0 {
        return Err(TheoryError::NoClients);
    }
    let m = clients as i32;
    let q = p_e.powi(2 * m - 1);
    let q_m = p_e.powi(m * (2 * m - 1));
    Ok((m as f64 + 1.0) * (1.0 - q) * (1.0 - q_m) / 2.0)
}

/// Per-round, per-client quantization variance terms `J^2_{m,r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizationTerms {
    /// The same `J^2` for every client and round.
    Constant(f64),
    /// `values[r][m]` for rounds `0..T`.
    Measured(Vec<Vec<f64>>),
}

impl QuantizationTerms {
    /// `sum_r sum_m J^2_{m,r} / M`.
    fn averaged_sum(&self, clients: usize, rounds: u64) -> Result<f64, TheoryError> {
        match self {
            QuantizationTerms::Constant(j2) => Ok(j2 * rounds as f64),
            QuantizationTerms::Measured(rows) => {
                if rows.len() as u64 != rounds || rows.iter().any(|r| r.len() != clients) {
                    return Err(TheoryError::InvalidConstant(format!(
                        "measured J^2 must be {rounds} rows of {clients} values"
                    )));
                }
                Ok(rows.iter().map(|r| r.iter().sum::<f64>() / clients as f64).sum())
            }
        }
    }
}

/// Constants of the smoothness, variance and dissimilarity assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    /// Smoothness `L`.
    pub smoothness: f64,
    /// Stochastic-gradient variance `sigma^2`.
    pub gradient_variance: f64,
    /// Dissimilarity bounds `D_m`, one per client.
    pub dissimilarity: Vec<f64>,
    /// `E[F(theta_0)] - F*`.
    pub initial_gap: f64,
    pub quantization: QuantizationTerms,
    pub batch_size: u64,
    pub local_steps: u64,
    pub rounds: u64,
}

impl AssumptionConstants {
    pub fn clients(&self) -> usize {
        self.dissimilarity.len()
    }

    fn validate(&self) -> Result<(), TheoryError> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !(self.smoothness.is_finite() && self.smoothness > 0.0) {
            return Err(TheoryError::InvalidConstant("L must be positive".into()));
        }
        if !finite_nonneg(self.gradient_variance) || !finite_nonneg(self.initial_gap) {
            return Err(TheoryError::InvalidConstant("sigma^2 and F0 - F* must be non-negative".into()));
        }
        if self.dissimilarity.is_empty() || !self.dissimilarity.iter().all(|&d| finite_nonneg(d)) {
            return Err(TheoryError::InvalidConstant("need one non-negative D_m per client".into()));
        }
        if self.batch_size == 0 || self.local_steps == 0 || self.rounds == 0 {
            return Err(TheoryError::InvalidConstant("b, I and T must be positive".into()));
        }
        Ok(())
    }
}

/// The four terms of the convergence bound, in order: initial gap,
/// quantization, gradient noise, data dissimilarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub initial_gap: f64,
    pub quantization: f64,
    pub gradient_noise: f64,
    pub dissimilarity: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.initial_gap + self.quantization + self.gradient_noise + self.dissimilarity
    }
}

/// Step size `eta = K* / sqrt(8 L T I)` paired with the bound.
pub fn theorem1_step_size(c: &AssumptionConstants, kstar: f64) -> f64 {
    kstar / (8.0 * c.smoothness * c.rounds as f64 * c.local_steps as f64).sqrt()
}

/// Largest admissible number of local steps, `(T I)^(1/4) / K*^(3/4)`.
pub fn local_steps_limit(c: &AssumptionConstants, kstar: f64) -> f64 {
    ((c.rounds * c.local_steps) as f64).powf(0.25) / kstar.powf(0.75)
}

/// Evaluates the right-hand side of the bound on
/// `(1/T) sum_r E||grad F(theta_r)||^2` without checking the step-size
/// condition.
pub fn theorem1_terms(c: &AssumptionConstants, kstar: f64) -> Result<BoundTerms, TheoryError> {
    c.validate()?;
    if !(kstar.is_finite() && kstar > 0.0) {
        return Err(TheoryError::InvalidConstant("K* must be positive".into()));
    }
    let m = c.clients();
    let ti = (c.rounds * c.local_steps) as f64;
    let tik = ti * kstar;
    let j_sum = c.quantization.averaged_sum(m, c.rounds)?;
    let d_avg = c.dissimilarity.iter().map(|d| d * d).sum::<f64>() / m as f64;

    let initial_gap = 496.0 * c.smoothness / (11.0 * tik.sqrt()) * c.initial_gap;
    let quantization = 31.0 / (88.0 * ti.powf(1.5) * kstar.sqrt()) * j_sum;
    let gradient_noise =
        (39.0 / (88.0 * tik.sqrt()) + 1.0 / (88.0 * tik.powf(0.75))) * c.gradient_variance / c.batch_size as f64;
    let dissimilarity = (4.0 / (11.0 * tik.sqrt())
        + 1.0 / (22.0 * tik.powf(0.75))
        + 31.0 / (22.0 * ti.powf(0.25) * kstar.powf(1.25)))
        * d_avg;
    Ok(BoundTerms { initial_gap, quantization, gradient_noise, dissimilarity })
}

/// The bound, refused when `I > (T I)^(1/4) / K*^(3/4)`.
pub fn theorem1_bound(c: &AssumptionConstants, kstar: f64) -> Result<f64, TheoryError> {
    let terms = theorem1_terms(c, kstar)?;
    let limit = local_steps_limit(c, kstar);
    if c.local_steps as f64 > limit {
        return Err(TheoryError::ConditionViolated { local_steps: c.local_steps, limit });
    }
    Ok(terms.total())
}

/// One row of the theory table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryRow {
    pub clients: usize,
    pub p_e: f64,
    pub dominant_outage: f64,
    pub kbar_inverse: f64,
    pub kstar: f64,
    /// `None` when the step-size condition fails for these constants.
    pub bound: Option<f64>,
}

/// Tabulates the analytical quantities over a grid. `constants` supplies
/// everything except `M` (taken from each row; `D_m` is broadcast from the
/// first entry).
pub fn theory_table(
    clients: &[usize],
    p_es: &[f64],
    constants: &AssumptionConstants,
) -> Result<Vec<TheoryRow>, TheoryError> {
    let mut rows = Vec::new();
    for &m in clients {
        for &p in p_es {
            let q = client_outage_dominant(m, p)?;
            let ks = kstar(m, p)?;
            let mut c = constants.clone();
            let d = constants.dissimilarity.first().copied().unwrap_or(0.0);
            c.dissimilarity = vec![d; m];
            if let QuantizationTerms::Measured(_) = c.quantization {
                return Err(TheoryError::InvalidConstant("theory table needs a constant J^2".into()));
            }
            let bound = match theorem1_bound(&c, ks) {
                Ok(b) => Some(b),
                Err(TheoryError::ConditionViolated { .. }) => None,
                Err(e) => return Err(e),
            };
            rows.push(TheoryRow {
                clients: m,
                p_e: p,
                dominant_outage: q,
                kbar_inverse: kbar_inverse(m, q)?,
                kstar: ks,
                bound,
            });
        }
    }
    Ok(rows)
}
