//! Rayleigh block-fading outage model and per-round connectivity sampling.
//!
//! A transmission at rate `R` over a link with average SNR `snr` fails when
//! `|h|^2 < g` with `g = (2^{2R} - 1) / snr`. For `h ~ CN(0, sigma2)` this gives
//! the outage probability `P_e = 1 - exp(-g / (2 sigma2))`. All links are
//! i.i.d., so one `P_e` describes D2D, direct and relay slots alike.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("SNR must be positive, got {0}")]
    NonPositiveSnr(f64),
    #[error("sigma^2 must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("rate must be non-negative, got {0}")]
    NegativeRate(f64),
    #[error("outage probability must lie in [0, 1), got {0}")]
    InvalidProbability(f64),
}

/// Link parameters. `snr` is a linear power ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub snr: f64,
    pub rate: f64,
    pub sigma2: f64,
}

impl ChannelParams {
    pub fn new(snr: f64, rate: f64, sigma2: f64) -> Result<Self, ChannelError> {
        let p = ChannelParams { snr, rate, sigma2 };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with the SNR given in decibels.
    pub fn from_db(snr_db: f64, rate: f64, sigma2: f64) -> Result<Self, ChannelError> {
        Self::new(db_to_linear(snr_db), rate, sigma2)
    }

    fn validate(&self) -> Result<(), ChannelError> {
        // `!(x > 0)` also rejects NaN.
        if !(self.snr > 0.0) {
            return Err(ChannelError::NonPositiveSnr(self.snr));
        }
        if !(self.sigma2 > 0.0) {
            return Err(ChannelError::NonPositiveVariance(self.sigma2));
        }
        if !(self.rate >= 0.0) {
            return Err(ChannelError::NegativeRate(self.rate));
        }
        Ok(())
    }

    /// Fading threshold `g = (2^{2R} - 1) / snr`.
    pub fn threshold(&self) -> f64 {
        (2f64.powf(2.0 * self.rate) - 1.0) / self.snr
    }

    /// Per-transmission outage probability.
    pub fn outage(&self) -> f64 {
        -(-self.threshold() / (2.0 * self.sigma2)).exp_m1()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `1 - exp(-g / (2 sigma2))`, validated.
pub fn outage_probability(params: &ChannelParams) -> Result<f64, ChannelError> {
    params.validate()?;
    Ok(params.outage())
}

/// One round's link states (`true` = link up).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConnectivityRealization {
    /// `d2d[m][k]`: client `k` decoded client `m`'s first-slot message.
    /// The diagonal is always `true`.
    pub d2d: Vec<Vec<bool>>,
    /// `direct[m]`: client `m`'s first-slot message reached the PS.
    pub direct: Vec<bool>,
    /// `relay[m][s]`: client `m`'s relay codeword in slot `s` reached the PS.
    pub relay: Vec<Vec<bool>>,
}

impl ConnectivityRealization {
    /// Every link up.
    pub fn all_up(clients: usize) -> Self {
        ConnectivityRealization {
            d2d: vec![vec![true; clients]; clients],
            direct: vec![true; clients],
            relay: vec![vec![true; clients.saturating_sub(1)]; clients],
        }
    }

    /// Every link down except the trivial self links.
    pub fn all_down(clients: usize) -> Self {
        let mut d2d = vec![vec![false; clients]; clients];
        for (m, row) in d2d.iter_mut().enumerate() {
            row[m] = true;
        }
        ConnectivityRealization {
            d2d,
            direct: vec![false; clients],
            relay: vec![vec![false; clients.saturating_sub(1)]; clients],
        }
    }

    pub fn clients(&self) -> usize {
        self.direct.len()
    }

    /// Messages held by client `k` after the first slot (column `k` of `d2d`).
    pub fn heard_by(&self, k: usize) -> Vec<bool> {
        self.d2d.iter().map(|row| row[k]).collect()
    }

    /// `heard_by` for every client.
    pub fn heard(&self) -> Vec<Vec<bool>> {
        (0..self.clients()).map(|k| self.heard_by(k)).collect()
    }

    /// Cuts all client-to-client links, leaving only self links.
    pub fn without_d2d(mut self) -> Self {
        for (m, row) in self.d2d.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = m == k;
            }
        }
        self
    }

    /// Drops every relay slot.
    pub fn without_relays(mut self) -> Self {
        for row in &mut self.relay {
            row.fill(false);
        }
        self
    }
}

/// Draws every off-diagonal D2D entry, direct entry and relay entry as an
/// independent Bernoulli(1 - p_e) variable, in that order.
pub fn sample_connectivity<R: Rng + ?Sized>(
    clients: usize,
    p_e: f64,
    rng: &mut R,
) -> Result<ConnectivityRealization, ChannelError> {
    if !(0.0..1.0).contains(&p_e) {
        return Err(ChannelError::InvalidProbability(p_e));
    }
    let mut up = || rng.random::<f64>() >= p_e;
    let mut d2d = vec![vec![true; clients]; clients];
    for (m, row) in d2d.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            if m != k {
                *v = up();
            }
        }
    }
    let direct = (0..clients).map(|_| up()).collect();
    let relay = (0..clients).map(|_| (0..clients.saturating_sub(1)).map(|_| up()).collect()).collect();
    Ok(ConnectivityRealization { d2d, direct, relay })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn outage_limits() {
        assert!(ChannelParams::new(1e300, 0.6, 1.0).unwrap().outage() < 1e-299);
        assert_eq!(ChannelParams::new(3.0, 0.0, 1.0).unwrap().outage(), 0.0);
    }

    #[test]
    fn outage_at_reference_point() {
        // R = 0.6, SNR = 3, sigma^2 = 1.
        let p = ChannelParams::new(3.0, 0.6, 1.0).unwrap();
        let g = (2f64.powf(1.2) - 1.0) / 3.0;
        assert!((p.threshold() - g).abs() < 1e-15);
        assert!((p.threshold() - 0.432_465_570).abs() < 1e-9);
        assert!((p.outage() - (1.0 - (-g / 2.0).exp())).abs() < 1e-15);
        assert!((p.outage() - 0.194_452_239).abs() < 1e-9);
    }

    #[test]
    fn db_conversion() {
        let p = ChannelParams::from_db(10.0, 0.6, 1.0).unwrap();
        assert!((p.snr - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ChannelParams::new(0.0, 0.6, 1.0).is_err());
        assert!(ChannelParams::new(3.0, 0.6, -1.0).is_err());
        assert!(ChannelParams::new(3.0, -0.1, 1.0).is_err());
        assert!(ChannelParams::new(f64::NAN, 0.6, 1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_connectivity(3, 1.0, &mut rng).is_err());
        assert!(sample_connectivity(3, -0.1, &mut rng).is_err());
    }

    #[test]
    fn extreme_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_connectivity(4, 0.0, &mut rng).unwrap(), ConnectivityRealization::all_up(4));
        assert_eq!(sample_connectivity(4, 1.0 - 1e-9, &mut rng).unwrap(), ConnectivityRealization::all_down(4));
    }

    #[test]
    fn same_seed_same_sequence() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| sample_connectivity(5, 0.3, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn link_removal_helpers() {
        let r = ConnectivityRealization::all_up(3).without_d2d().without_relays();
        assert_eq!(r.heard_by(1), vec![false, true, false]);
        assert!(r.relay.iter().flatten().all(|&v| !v));
        assert!(r.direct.iter().all(|&v| v));
    }
}
