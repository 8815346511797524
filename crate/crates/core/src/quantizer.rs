//! Stochastic quantization of model updates and the exact finite-field codec.
//!
//! A coordinate `x` clipped to `[lower, upper]` is rounded to one of the two
//! neighbouring knobs of a uniform grid with `2^B - 1` intervals of width
//! `kappa = (upper - lower) / (2^B - 1)`. It rounds up with probability
//! `(x - knob_below) / kappa`, so the quantizer is unbiased and its squared
//! error per coordinate is at most `kappa^2 / 4`.
//!
//! Knob indices are packed into field symbols as little-endian base-`|F|`
//! digits, a fixed number of digits per coordinate.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galois::{FieldSymbol, GaloisField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantizerError {
    #[error("quantizer needs 1..=32 bits, got {0}")]
    InvalidBits(u32),
    #[error("bound vectors have lengths {lower} and {upper}")]
    BoundLengthMismatch { lower: usize, upper: usize },
    #[error("invalid range [{lower}, {upper}] in dimension {dim}")]
    InvalidRange { dim: usize, lower: f64, upper: f64 },
    #[error("input has dimension {got}, quantizer expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("message has {got} symbols, expected {expected}")]
    SymbolCountMismatch { expected: usize, got: usize },
    #[error("symbol {value} is not in a field of order {order}")]
    SymbolOutOfRange { value: u32, order: u32 },
    #[error("decoded value {value} does not fit in {bits} bits")]
    IndexOverflow { value: u64, bits: u32 },
}

/// Uniform stochastic quantizer with per-dimension bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    bits: u32,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl QuantizerSpec {
    pub fn new(bits: u32, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, QuantizerError> {
        if !(1..=32).contains(&bits) {
            return Err(QuantizerError::InvalidBits(bits));
        }
        if lower.len() != upper.len() {
            return Err(QuantizerError::BoundLengthMismatch { lower: lower.len(), upper: upper.len() });
        }
        for (dim, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            // Zero-width ranges are allowed; they quantize to a constant.
            if !(l.is_finite() && u.is_finite() && u >= l) {
                return Err(QuantizerError::InvalidRange { dim, lower: l, upper: u });
            }
        }
        Ok(QuantizerSpec { bits, lower, upper })
    }

    /// Same range `[lower, upper]` in all `dim` coordinates.
    pub fn uniform(bits: u32, dim: usize, lower: f64, upper: f64) -> Result<Self, QuantizerError> {
        Self::new(bits, vec![lower; dim], vec![upper; dim])
    }

    /// `[-c, c]` in every coordinate.
    pub fn symmetric(bits: u32, dim: usize, c: f64) -> Result<Self, QuantizerError> {
        Self::uniform(bits, dim, -c, c)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Number of representable values, `2^B`.
    pub fn levels(&self) -> u64 {
        1u64 << self.bits
    }

    /// Knob spacing in dimension `j`.
    pub fn kappa(&self, j: usize) -> f64 {
        (self.upper[j] - self.lower[j]) / (self.levels() - 1) as f64
    }

    /// Reconstruction value of knob `index` in dimension `j`.
    #[inline]
    pub fn knob(&self, j: usize, index: u32) -> f64 {
        self.lower[j] + index as f64 * self.kappa(j)
    }
}

/// Knob indices of one quantized vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizedUpdate {
    pub indices: Vec<u32>,
}

/// Finite-field representation of a client payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    pub symbols: Vec<FieldSymbol>,
}

impl Message {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Stochastically rounds `delta` onto the knob grid of `spec`.
pub fn quantize<R: Rng + ?Sized>(
    delta: &[f64],
    spec: &QuantizerSpec,
    rng: &mut R,
) -> Result<QuantizedUpdate, QuantizerError> {
    if delta.len() != spec.dim() {
        return Err(QuantizerError::DimensionMismatch { expected: spec.dim(), got: delta.len() });
    }
    let top = (spec.levels() - 1) as f64;
    let indices = delta
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let (lo, hi) = (spec.lower[j], spec.upper[j]);
            let kappa = spec.kappa(j);
            if kappa == 0.0 {
                return 0;
            }
            let x = x.clamp(lo, hi);
            let mut t = (x - lo) / kappa;
            let nearest = t.round();
            if (t - nearest).abs() < 1e-9 {
                t = nearest;
            }
            let below = t.floor().min(top);
            let frac = t - below;
            let up = frac > 0.0 && rng.random::<f64>() < frac;
            (below as u32) + up as u32
        })
        .collect();
    Ok(QuantizedUpdate { indices })
}

/// Real values represented by `q`.
pub fn dequantize(q: &QuantizedUpdate, spec: &QuantizerSpec) -> Vec<f64> {
    q.indices.iter().enumerate().map(|(j, &i)| spec.knob(j, i)).collect()
}

/// Lemma-style variance bound `delta^2 / (2^B - 1)^2` with
/// `delta^2 = (1/4) sum_j (upper_j - lower_j)^2`.
pub fn variance_bound(spec: &QuantizerSpec) -> f64 {
    let delta_sq: f64 =
        spec.lower.iter().zip(&spec.upper).map(|(l, u)| (u - l) * (u - l)).sum::<f64>() / 4.0;
    let levels = (spec.levels() - 1) as f64;
    delta_sq / (levels * levels)
}

/// Variance bound expressed through the range of the accumulated gradient
/// `sum_i grad_i`: the update is `-eta` times that sum, so the quantizer range
/// is `eta` times the gradient range and the bound is `eta^2 J^2`.
pub fn gradient_variance_bound(bits: u32, grad_lower: &[f64], grad_upper: &[f64], eta: f64) -> Result<f64, QuantizerError> {
    let spec = QuantizerSpec::new(bits, grad_lower.to_vec(), grad_upper.to_vec())?;
    Ok(eta * eta * variance_bound(&spec))
}

/// Smallest `n` with `order^n >= 2^bits`.
pub fn digits_per_value(bits: u32, order: u32) -> usize {
    let target = 1u128 << bits;
    let mut cap = 1u128;
    let mut n = 0;
    while cap < target {
        cap *= order as u128;
        n += 1;
    }
    n
}

/// Symbols per message for a `dim`-dimensional payload of `bits`-bit values.
pub fn message_len(dim: usize, bits: u32, field: &GaloisField) -> usize {
    dim * digits_per_value(bits, field.order())
}

fn pack_words(values: impl ExactSizeIterator<Item = u64>, bits: u32, field: &GaloisField) -> Message {
    let n = digits_per_value(bits, field.order());
    let base = field.order() as u64;
    let mut symbols = Vec::with_capacity(values.len() * n);
    for mut v in values {
        for _ in 0..n {
            symbols.push(FieldSymbol((v % base) as u32));
            v /= base;
        }
    }
    Message { symbols }
}

fn unpack_words(msg: &Message, dim: usize, bits: u32, field: &GaloisField) -> Result<Vec<u64>, QuantizerError> {
    let n = digits_per_value(bits, field.order());
    if msg.len() != dim * n {
        return Err(QuantizerError::SymbolCountMismatch { expected: dim * n, got: msg.len() });
    }
    let base = field.order() as u128;
    let limit = 1u128 << bits;
    msg.symbols
        .chunks(n.max(1))
        .take(dim)
        .map(|digits| {
            let mut v = 0u128;
            for d in digits.iter().rev() {
                if d.0 >= field.order() {
                    return Err(QuantizerError::SymbolOutOfRange { value: d.0, order: field.order() });
                }
                v = v * base + d.0 as u128;
            }
            if v >= limit {
                return Err(QuantizerError::IndexOverflow { value: v as u64, bits });
            }
            Ok(v as u64)
        })
        .collect()
}

/// Packs knob indices into a message (encoder `E`).
pub fn to_message(q: &QuantizedUpdate, bits: u32, field: &GaloisField) -> Message {
    pack_words(q.indices.iter().map(|&i| i as u64), bits, field)
}

/// Inverse of [`to_message`].
pub fn from_message(msg: &Message, spec: &QuantizerSpec, field: &GaloisField) -> Result<QuantizedUpdate, QuantizerError> {
    let words = unpack_words(msg, spec.dim(), spec.bits(), field)?;
    Ok(QuantizedUpdate { indices: words.into_iter().map(|w| w as u32).collect() })
}

/// How a client turns its real-valued update into a message.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateCodec {
    /// Stochastic quantization followed by digit packing.
    Stochastic(QuantizerSpec),
    /// The IEEE-754 bit pattern of every coordinate, packed exactly.
    Lossless { dim: usize },
}

/// A client payload ready for transmission, with the value the receiver will
/// reconstruct from it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedUpdate {
    pub message: Message,
    pub quantized: Option<QuantizedUpdate>,
    pub reconstruction: Vec<f64>,
}

impl UpdateCodec {
    pub fn dim(&self) -> usize {
        match self {
            UpdateCodec::Stochastic(spec) => spec.dim(),
            UpdateCodec::Lossless { dim } => *dim,
        }
    }

    fn bits(&self) -> u32 {
        match self {
            UpdateCodec::Stochastic(spec) => spec.bits(),
            UpdateCodec::Lossless { .. } => 64,
        }
    }

    /// Symbols per message over `field`.
    pub fn message_len(&self, field: &GaloisField) -> usize {
        self.dim() * digits_per_value(self.bits(), field.order())
    }

    pub fn encode<R: Rng + ?Sized>(
        &self,
        delta: &[f64],
        field: &GaloisField,
        rng: &mut R,
    ) -> Result<EncodedUpdate, QuantizerError> {
        match self {
            UpdateCodec::Stochastic(spec) => {
                let q = quantize(delta, spec, rng)?;
                let message = to_message(&q, spec.bits(), field);
                let reconstruction = dequantize(&q, spec);
                Ok(EncodedUpdate { message, quantized: Some(q), reconstruction })
            }
            UpdateCodec::Lossless { dim } => {
                if delta.len() != *dim {
                    return Err(QuantizerError::DimensionMismatch { expected: *dim, got: delta.len() });
                }
                let message = pack_words(delta.iter().map(|v| v.to_bits()), 64, field);
                Ok(EncodedUpdate { message, quantized: None, reconstruction: delta.to_vec() })
            }
        }
    }

    pub fn decode(&self, msg: &Message, field: &GaloisField) -> Result<Vec<f64>, QuantizerError> {
        match self {
            UpdateCodec::Stochastic(spec) => Ok(dequantize(&from_message(msg, spec, field)?, spec)),
            UpdateCodec::Lossless { dim } => {
                Ok(unpack_words(msg, *dim, 64, field)?.into_iter().map(f64::from_bits).collect())
            }
        }
    }
}
