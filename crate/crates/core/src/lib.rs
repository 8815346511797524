//! Coded cooperative federated learning over unreliable links.
//!
//! Clients quantize their model updates, map them to finite-field messages,
//! share them over lossy device-to-device links, and relay masked linear
//! combinations to a parameter server. The server decodes whichever updates
//! the surviving codewords determine and averages them.
//!
//! The crate is organised bottom-up:
//!
//! - [`galois`]: field arithmetic and linear algebra over GF(2^w) and GF(p)
//! - [`dnc`]: the systematic MDS encoding matrix, masking, pruning, decoding
//! - [`channel`]: Rayleigh outage model and connectivity sampling
//! - [`quantizer`]: stochastic quantization and the field message codec
//! - [`fl`]: MLP model, datasets, local SGD and aggregation rules
//! - [`protocol`]: one communication round and full experiments
//! - [`theory`]: closed-form participation statistics and the convergence bound
//! - [`config`], [`report`], [`verify`]: configuration, CSV output, property suites

pub mod channel;
pub mod config;
pub mod dnc;
pub mod fl;
pub mod galois;
pub mod protocol;
pub mod quantizer;
pub mod report;
pub mod rng;
pub mod theory;
pub mod verify;
