//! Discrete-time single-input single-output Lur'e systems with saturation
//! feedback: validation, gain-interval analysis, spectral splitting,
//! simulation with mode tracking, exact quadratic-field arithmetic and
//! numerical oracles.

pub mod exact;
pub mod export;
pub mod fixtures;
pub mod lure;
pub mod oracles;
pub mod poly;
pub mod realization;
pub mod spectral;
pub mod stability;
pub mod testkit;
