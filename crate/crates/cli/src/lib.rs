//! Pieces of the `vlsf` command-line tool that are shared with its tests.

pub mod experiment;
pub mod output;

use std::fmt;

use anyhow::Context;
use vlsf_core::channel::{optimize_common_input, DMChannel};
use vlsf_core::BroadcastPair;

/// Default sup-norm tolerance when checking that both channels share a
/// capacity-achieving input.
pub const DEFAULT_MAXIMIZER_TOL: f64 = 1e-6;

/// Bad command-line input; maps to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Parses a comma-separated list of numbers such as `100,200,400`.
pub fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, UsageError> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| UsageError(format!("{what}: '{s}' is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(UsageError(format!("{what}: the list is empty")));
    }
    Ok(values)
}

/// Parses a blocklength grid: nonempty, positive and strictly increasing.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, UsageError> {
    let ls = parse_list(text, "l grid")?;
    if ls.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(UsageError("l grid: values must be positive".into()));
    }
    if ls.windows(2).any(|w| w[1] <= w[0]) {
        return Err(UsageError("l grid: values must be strictly increasing".into()));
    }
    Ok(ls)
}

pub fn check_epsilon(eps: f64) -> Result<f64, UsageError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(eps)
    } else {
        Err(UsageError(format!("epsilon {eps} must lie in (0, 1)")))
    }
}

pub fn load_channel(spec: &str) -> anyhow::Result<DMChannel> {
    DMChannel::from_spec(spec).with_context(|| format!("loading channel '{spec}'"))
}

pub fn load_pair(spec1: &str, spec2: &str, tolerance: f64) -> anyhow::Result<BroadcastPair> {
    let w1 = load_channel(spec1)?;
    let w2 = load_channel(spec2)?;
    optimize_common_input(&w1, &w2, tolerance).context("finding the common capacity-achieving input")
}

/// Converts nats to the requested unit.
pub fn scale_log(value: f64, bits: bool) -> f64 {
    if bits {
        value / std::f64::consts::LN_2
    } else {
        value
    }
}
