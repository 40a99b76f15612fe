//! Discrete memoryless channels, input distributions and the single-letter
//! statistics of the information density.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-12;

/// A discrete memoryless channel `W(y|x)` stored as a row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMChannel {
    input_size: usize,
    output_size: usize,
    matrix: Vec<f64>,
}

/// On-disk JSON form of a channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelFile {
    pub input_size: usize,
    pub output_size: usize,
    pub rows: Vec<Vec<f64>>,
}

impl DMChannel {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let input_size = rows.len();
        if input_size < 2 {
            return Err(Error::InvalidChannel(format!(
                "input alphabet must have at least 2 symbols, got {input_size}"
            )));
        }
        let output_size = rows[0].len();
        if output_size < 2 {
            return Err(Error::InvalidChannel(format!(
                "output alphabet must have at least 2 symbols, got {output_size}"
            )));
        }
        let mut matrix = Vec::with_capacity(input_size * output_size);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != output_size {
                return Err(Error::InvalidChannel(format!(
                    "row {x} has {} entries, expected {output_size}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidChannel(format!("row {x} has entry {bad} outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidChannel(format!("row {x} sums to {sum}")));
            }
            matrix.extend_from_slice(row);
        }
        Ok(Self {
            input_size,
            output_size,
            matrix,
        })
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        check_probability("crossover probability", p)?;
        Self::from_rows(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Binary erasure channel with erasure probability `e`; output 2 is the erasure.
    pub fn bec(e: f64) -> Result<Self> {
        check_probability("erasure probability", e)?;
        Self::from_rows(vec![vec![1.0 - e, 0.0, e], vec![0.0, 1.0 - e, e]])
    }

    /// Z-channel: input 0 is received noiselessly, input 1 flips to 0 with
    /// probability `p`.
    pub fn z_channel(p: f64) -> Result<Self> {
        check_probability("flip probability", p)?;
        Self::from_rows(vec![vec![1.0, 0.0], vec![p, 1.0 - p]])
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let file: ChannelFile = serde_json::from_str(json).map_err(|e| Error::InvalidChannel(e.to_string()))?;
        let channel = Self::from_rows(file.rows)?;
        if channel.input_size != file.input_size || channel.output_size != file.output_size {
            return Err(Error::InvalidChannel(format!(
                "declared size {}x{} does not match rows {}x{}",
                file.input_size, file.output_size, channel.input_size, channel.output_size
            )));
        }
        Ok(channel)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Parses a shorthand (`bsc:0.11`, `bec:0.3`, `zchan:0.2`) or, failing
    /// that, reads a JSON channel file from the given path.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec.parse() {
            Ok(channel) => Ok(channel),
            Err(err @ Error::InvalidChannel(_)) if looks_like_shorthand(spec) => Err(err),
            Err(_) => Self::load(spec),
        }
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            input_size: self.input_size,
            output_size: self.output_size,
            rows: self.rows().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    /// `W(y|x)`.
    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.matrix[x * self.output_size + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.matrix[x * self.output_size..(x + 1) * self.output_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.matrix.chunks_exact(self.output_size)
    }

    /// Output marginal `PW(y)`.
    pub fn output_distribution(&self, p: &InputDistribution) -> Vec<f64> {
        let mut out = vec![0.0; self.output_size];
        for (x, row) in self.rows().enumerate() {
            let px = p.prob(x);
            if px == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += px * w;
            }
        }
        out
    }

    /// Channel with output labels permuted: output `y` becomes `perm[y]`.
    pub fn permute_outputs(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.output_size {
            return Err(Error::SizeMismatch {
                expected: self.output_size,
                got: perm.len(),
            });
        }
        let rows = self
            .rows()
            .map(|row| {
                let mut out = vec![0.0; self.output_size];
                for (y, &w) in row.iter().enumerate() {
                    out[perm[y]] = w;
                }
                out
            })
            .collect();
        Self::from_rows(rows)
    }
}

fn looks_like_shorthand(spec: &str) -> bool {
    matches!(
        spec.split_once(':').map(|(k, _)| k.to_ascii_lowercase()),
        Some(k) if k == "bsc" || k == "bec" || k == "zchan"
    )
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidChannel(format!("{name} {p} outside [0, 1]")));
    }
    Ok(())
}

impl FromStr for DMChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidChannel(format!("unrecognized channel shorthand `{s}`")))?;
        let value: f64 = param
            .trim()
            .parse()
            .map_err(|_| Error::InvalidChannel(format!("bad parameter in `{s}`")))?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "bsc" => Self::bsc(value),
            "bec" => Self::bec(value),
            "zchan" => Self::z_channel(value),
            other => Err(Error::InvalidChannel(format!("unknown channel kind `{other}`"))),
        }
    }
}

/// A probability distribution on the input alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDistribution {
    probs: Vec<f64>,
}

impl InputDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!("entry {bad} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(size: usize) -> Self {
        Self {
            probs: vec![1.0 / size as f64; size],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    #[inline]
    pub fn prob(&self, x: usize) -> f64 {
        self.probs[x]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Moments of the single-letter information density under `P × W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStatistics {
    /// `I(P, W)` in nats.
    pub mutual_information: f64,
    /// `V(P, W)` in nats².
    pub info_variance: f64,
    /// `T(P, W) = E|i − I|³` in nats³.
    pub third_abs_moment: f64,
}

fn check_sizes(p: &InputDistribution, w: &DMChannel) -> Result<()> {
    if p.len() != w.input_size() {
        return Err(Error::SizeMismatch {
            expected: w.input_size(),
            got: p.len(),
        });
    }
    Ok(())
}

/// Single-letter information density `log W(y|x) − log PW(y)` in nats.
///
/// Returns `−∞` when `W(y|x) = 0`. Fails when `W(y|x) > 0` but `PW(y) = 0`,
/// which only happens when `x` has zero probability under `p`.
pub fn info_density(p: &InputDistribution, w: &DMChannel, x: usize, y: usize) -> Result<f64> {
    check_sizes(p, w)?;
    if x >= w.input_size() || y >= w.output_size() {
        return Err(Error::InvalidParameter(format!("symbol pair ({x}, {y}) out of range")));
    }
    let out = w.output_distribution(p);
    density_from_marginal(w, &out, x, y)
}

pub(crate) fn density_from_marginal(w: &DMChannel, out: &[f64], x: usize, y: usize) -> Result<f64> {
    let wyx = w.prob(x, y);
    if wyx == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if out[y] == 0.0 {
        return Err(Error::UndefinedDensity { x, y });
    }
    Ok(wyx.ln() - out[y].ln())
}

/// Table `d[x][y]` of information densities for inputs in the support of `p`.
/// Entries for `x` outside the support, or with `W(y|x) = 0`, are `−∞`.
pub fn density_table(p: &InputDistribution, w: &DMChannel) -> Result<Vec<Vec<f64>>> {
    check_sizes(p, w)?;
    let out = w.output_distribution(p);
    (0..w.input_size())
        .map(|x| {
            (0..w.output_size())
                .map(|y| {
                    if p.prob(x) == 0.0 && out[y] == 0.0 {
                        Ok(f64::NEG_INFINITY)
                    } else {
                        density_from_marginal(w, &out, x, y)
                    }
                })
                .collect()
        })
        .collect()
}

/// Exact `I`, `V` and `T` by enumeration over the alphabet; pairs with
/// `P(x)W(y|x) = 0` are skipped.
pub fn channel_statistics(p: &InputDistribution, w: &DMChannel) -> Result<ChannelStatistics> {
    check_sizes(p, w)?;
    let out = w.output_distribution(p);
    let mut atoms = Vec::with_capacity(w.input_size() * w.output_size());
    for x in 0..w.input_size() {
        let px = p.prob(x);
        if px == 0.0 {
            continue;
        }
        for y in 0..w.output_size() {
            let joint = px * w.prob(x, y);
            if joint > 0.0 {
                atoms.push((joint, density_from_marginal(w, &out, x, y)?));
            }
        }
    }
    let mi: f64 = atoms.iter().map(|(m, d)| m * d).sum();
    let var: f64 = atoms.iter().map(|(m, d)| m * (d - mi).powi(2)).sum();
    let third: f64 = atoms.iter().map(|(m, d)| m * (d - mi).abs().powi(3)).sum();
    Ok(ChannelStatistics {
        mutual_information: mi.max(0.0),
        info_variance: var,
        third_abs_moment: third,
    })
}

/// Divergences `D(W(·|x) ‖ PW)` for every input symbol.
fn conditional_divergences(p: &InputDistribution, w: &DMChannel) -> Vec<f64> {
    let out = w.output_distribution(p);
    w.rows()
        .map(|row| {
            row.iter()
                .zip(&out)
                .filter(|(&wyx, _)| wyx > 0.0)
                .map(|(&wyx, &py)| wyx * (wyx / py).ln())
                .sum()
        })
        .collect()
}

/// Result of a single-channel capacity computation.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub input: InputDistribution,
    pub capacity: f64,
    pub iterations: usize,
    /// Final `max_x D(W(·|x)‖PW) − I(P, W)`, an upper bound on the capacity error.
    pub gap: f64,
}

pub const CAPACITY_REL_TOLERANCE: f64 = 1e-10;
pub const CAPACITY_MAX_ITERATIONS: usize = 100_000;

/// Capacity-achieving input via alternating maximization, started from the
/// uniform input.
///
/// Iterates until `max_x D_x − I ≤ 1e-10·I`. If the iteration cap is reached,
/// the result is still accepted when the absolute gap is below `1e-6`
/// (slow sublinear convergence when some inputs are unused at the optimum).
pub fn blahut_arimoto(w: &DMChannel) -> Result<CapacityResult> {
    let n = w.input_size();
    let mut p = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    loop {
        let dist = InputDistribution { probs: p.clone() };
        let d = conditional_divergences(&dist, w);
        let lower: f64 = p.iter().zip(&d).map(|(pi, di)| pi * di).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = (upper - lower).max(0.0);
        if gap <= CAPACITY_REL_TOLERANCE * lower.max(0.0) || gap == 0.0 {
            return Ok(CapacityResult {
                input: dist,
                capacity: lower.max(0.0),
                iterations,
                gap,
            });
        }
        if iterations >= CAPACITY_MAX_ITERATIONS {
            if gap <= 1e-6 {
                return Ok(CapacityResult {
                    input: dist,
                    capacity: lower,
                    iterations,
                    gap,
                });
            }
            return Err(Error::CapacityNotConverged {
                gap: gap / lower.max(f64::MIN_POSITIVE),
                iterations,
            });
        }
        // Multiplicative update, shifted by the max for numerical range.
        let mut next: Vec<f64> = p.iter().zip(&d).map(|(pi, di)| pi * (di - upper).exp()).collect();
        let norm: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= norm);
        p = next;
        iterations += 1;
    }
}

/// Maximizer of `I(P, W)` over a regular simplex grid with `resolution`
/// subdivisions per coordinate. Only sensible for small input alphabets.
pub fn grid_search_capacity(w: &DMChannel, resolution: usize) -> Result<(InputDistribution, f64)> {
    let n = w.input_size();
    let mut best: Option<(InputDistribution, f64)> = None;
    let mut counts = vec![0usize; n];
    let mut visit = |counts: &[usize]| -> Result<()> {
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / resolution as f64).collect();
        let dist = InputDistribution { probs };
        let mi = channel_statistics(&dist, w)?.mutual_information;
        if best.as_ref().is_none_or(|(_, b)| mi > *b) {
            best = Some((dist, mi));
        }
        Ok(())
    };
    compositions(n, resolution, &mut counts, 0, &mut visit)?;
    Ok(best.expect("simplex grid is never empty"))
}

fn compositions(
    parts: usize,
    total: usize,
    counts: &mut [usize],
    index: usize,
    visit: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if index + 1 == parts {
        counts[index] = total;
        return visit(counts);
    }
    for c in 0..=total {
        counts[index] = c;
        compositions(parts, total - c, counts, index + 1, visit)?;
    }
    Ok(())
}

/// Two channels over a common input alphabet together with the common
/// capacity-achieving input and everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastPair {
    w1: DMChannel,
    w2: DMChannel,
    pstar: InputDistribution,
    stats1: ChannelStatistics,
    stats2: ChannelStatistics,
    rho1: f64,
    rho2: f64,
    common_maximizer_gap: f64,
}

impl BroadcastPair {
    /// Builds the pair for a given input distribution without any optimization.
    pub fn with_input(w1: DMChannel, w2: DMChannel, pstar: InputDistribution) -> Result<Self> {
        if w1.input_size() != w2.input_size() {
            return Err(Error::SizeMismatch {
                expected: w1.input_size(),
                got: w2.input_size(),
            });
        }
        let stats1 = channel_statistics(&pstar, &w1)?;
        let stats2 = channel_statistics(&pstar, &w2)?;
        let (v1, v2) = (stats1.info_variance, stats2.info_variance);
        // ϱ is undefined with a zero dispersion; fall back to the symmetric value.
        let (rho1, rho2) = if v1 > 0.0 && v2 > 0.0 {
            ((v1 / v2).powf(0.25), (v2 / v1).powf(0.25))
        } else {
            (1.0, 1.0)
        };
        Ok(Self {
            w1,
            w2,
            pstar,
            stats1,
            stats2,
            rho1,
            rho2,
            common_maximizer_gap: 0.0,
        })
    }

    pub fn w1(&self) -> &DMChannel {
        &self.w1
    }
    pub fn w2(&self) -> &DMChannel {
        &self.w2
    }
    pub fn channel(&self, k: usize) -> &DMChannel {
        if k == 0 {
            &self.w1
        } else {
            &self.w2
        }
    }
    pub fn pstar(&self) -> &InputDistribution {
        &self.pstar
    }
    pub fn stats1(&self) -> &ChannelStatistics {
        &self.stats1
    }
    pub fn stats2(&self) -> &ChannelStatistics {
        &self.stats2
    }
    pub fn c1(&self) -> f64 {
        self.stats1.mutual_information
    }
    pub fn c2(&self) -> f64 {
        self.stats2.mutual_information
    }
    pub fn v1(&self) -> f64 {
        self.stats1.info_variance
    }
    pub fn v2(&self) -> f64 {
        self.stats2.info_variance
    }
    /// `C = min(C₁, C₂)`.
    pub fn capacity(&self) -> f64 {
        self.c1().min(self.c2())
    }
    /// `V = √(V₁V₂)`.
    pub fn v_geo(&self) -> f64 {
        (self.v1() * self.v2()).sqrt()
    }
    pub fn rho1(&self) -> f64 {
        self.rho1
    }
    pub fn rho2(&self) -> f64 {
        self.rho2
    }
    /// `‖P₁* − P₂*‖∞` between the per-channel maximizers.
    pub fn common_maximizer_gap(&self) -> f64 {
        self.common_maximizer_gap
    }
    /// True when both decoders see the same channel matrix.
    pub fn identical_channels(&self) -> bool {
        self.w1 == self.w2
    }
    /// Relative capacity mismatch `|C₁ − C₂| / C`.
    pub fn capacity_mismatch(&self) -> f64 {
        let c = self.capacity();
        if c > 0.0 {
            (self.c1() - self.c2()).abs() / c
        } else {
            0.0
        }
    }
}

/// Maximizes `I(P, W₁)` and `I(P, W₂)` separately and checks that the two
/// maximizers agree to within `tolerance` in the sup norm.
pub fn optimize_common_input(w1: &DMChannel, w2: &DMChannel, tolerance: f64) -> Result<BroadcastPair> {
    if w1.input_size() != w2.input_size() {
        return Err(Error::SizeMismatch {
            expected: w1.input_size(),
            got: w2.input_size(),
        });
    }
    let first = blahut_arimoto(w1)?;
    let second = if w1 == w2 { first.clone() } else { blahut_arimoto(w2)? };
    if w1.input_size() <= 3 {
        cross_check_grid(w1, &first)?;
        if w1 != w2 {
            cross_check_grid(w2, &second)?;
        }
    }
    let gap = first.input.max_abs_diff(&second.input);
    if gap > tolerance {
        return Err(Error::CommonMaximizerViolation { gap, tolerance });
    }
    let mut pair = BroadcastPair::with_input(w1.clone(), w2.clone(), first.input)?;
    pair.common_maximizer_gap = gap;
    Ok(pair)
}

fn cross_check_grid(w: &DMChannel, result: &CapacityResult) -> Result<()> {
    let resolution = if w.input_size() == 2 { 1000 } else { 100 };
    let (_, grid) = grid_search_capacity(w, resolution)?;
    if grid > result.capacity + 1e-9 {
        return Err(Error::OptimizerMismatch {
            ba: result.capacity,
            grid,
        });
    }
    Ok(())
}
