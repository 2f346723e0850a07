//! Simulation library for a distributed small-cell hybrid mmWave downlink.
//!
//! `N` small-cell base stations (SBSs), each with an `M`-antenna ULA and
//! `N_R` RF chains, jointly serve `K` users that each have a `P`-antenna ULA
//! and `N_D` RF chains. The crate provides:
//!
//! * [`numerics`]: complex matrices, Jacobi SVD, log-det capacity.
//! * [`channel`]: clustered mmWave channels.
//! * [`beamforming`]: strongest-path analog beamformers, equivalent channels,
//!   SVD / zero-forcing digital precoders and a codebook beam search.
//! * [`estimation`]: beam sweeping and pilot-based equivalent-channel estimation.
//! * [`rate`]: closed-form, SINR-decomposition and Monte Carlo sum-rates.
//! * [`experiments`]: seeded parameter sweeps producing averaged rate curves.
//! * [`rng`]: per-trial ChaCha streams.

// `!(x > 0.0)` is how parameters reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod numerics;
pub mod rate;
pub mod rng;

pub use channel::{ArrayGeometry, ChannelRealization, ClusterModel, PathSet, SystemChannels};
pub use error::{Error, Result};
pub use experiments::{CurveSet, ScenarioConfig};
pub use numerics::{ComplexMatrix, SvdResult, C64};
pub use rng::SimRng;
