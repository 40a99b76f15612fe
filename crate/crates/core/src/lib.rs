//! Nonasymptotic and second-order bounds for variable-length stop-feedback
//! (VLSF) coding of a common message over a two-user discrete memoryless
//! broadcast channel.
//!
//! The crate is organized bottom-up:
//!
//! * [`gauss`]: normal distribution functions, quantile and adaptive quadrature.
//! * [`channel`]: channels, input distributions, information density and the
//!   single-letter statistics (mutual information, dispersion, third moment).
//! * [`tail`]: exact (grid-quantized, certified) tail probabilities of the
//!   information density for a fixed input type, and the max over types.
//! * [`converse`]: the converse lower bound on the average blocklength and its
//!   inversion into an upper bound on `log M`.
//! * [`achievability`]: threshold stopping simulations and the achievability
//!   design recipe.
//! * [`asymptotics`]: second-order coefficients of the asymptotic expansion.
//! * [`randwalk`]: two coupled random walks and their maximal stopping time.
//!
//! All logarithms are natural; information quantities are in nats.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod achievability;
pub mod asymptotics;
pub mod bound;
pub mod channel;
pub mod converse;
pub mod error;
pub mod gauss;
pub mod mc;
pub mod randwalk;
pub mod tail;

pub use bound::{BoundCurve, BoundKind, BoundPoint};
pub use channel::{BroadcastPair, ChannelStatistics, DMChannel, InputDistribution};
pub use error::{Error, Result};
