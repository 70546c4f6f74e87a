//! Numerics for first-order phase coexistence of the ferromagnetic Potts model
//! with an external field on regular trees and random regular graphs.
//!
//! * [`numerics`]: belief propagation, the Bethe functional, the critical line,
//!   random-cluster pre-messages and the two-spin Ising reduction.
//! * [`graphs`]: pairing-model graphs, cycle counts, ghost augmentation,
//!   spectral checks and the degree-modification construction.
//! * [`sampler`]: Edwards–Sokal / Swendsen–Wang chains and FK-Ising sweeps.
//! * [`exact`]: brute-force partition functions and tree measures.
//! * [`asymptotics`]: cycle-conditioning constants, cavity ratios and the
//!   mixture-weight planner.
//!
//! Colors are 0-based throughout: color `0` is the color favored by the field.

pub mod asymptotics;
pub mod error;
pub mod exact;
pub mod graphs;
pub mod numerics;
pub mod rng;
pub mod sampler;
pub mod sum;
pub mod unionfind;

pub use error::{Error, Result};
pub use numerics::{ColorLaw, ModelParams};
