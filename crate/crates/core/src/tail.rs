//! Tail probabilities of the information density `i_{P_{x^t},W}(x^t; Y^t)` for
//! input sequences of a fixed type, and their maximum over all types.
//!
//! Every per-letter density value is snapped onto a uniform grid of width
//! `step`. With [`Rounding::Up`] each grid value is at least the true value, so
//! a tail `P[sum > λ]` computed on the grid is an upper bound on the true tail
//! and overshoots it by at most a shift of `t·step` in `λ`. Sums of grid
//! indices are exact integers, so equal values merge without tolerance games.
//!
//! Two evaluation routes are provided:
//!
//! * [`type_tail_prob`] convolves per-symbol [`QuantizedPmf`]s, raising each to
//!   its multiplicity by repeated squaring.
//! * [`TailEngine`] is used for the max over types. The law of the output
//!   counts of `n` uses of symbol `x` does not depend on the type, only the
//!   grid positions of the atoms do, so the engine caches the count masses
//!   (Pascal rows of a binomial chain) and rebuilds only the positions for
//!   each type. The final convolution is replaced by a two-pointer tail sweep.

use rayon::prelude::*;

use crate::channel::{channel_statistics, DMChannel, InputDistribution};
use crate::error::{Error, Result};
use crate::gauss;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_MAX_ATOMS: usize = 1 << 26;
pub const DEFAULT_MAX_TYPES: usize = 100_000;
/// Universal Berry–Esseen constant used by the CLT approximation.
pub const BERRY_ESSEEN_CONSTANT: f64 = 6.0;

const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Up,
    Down,
    Nearest,
}

impl Rounding {
    fn index(self, value: f64, step: f64) -> i64 {
        let scaled = value / step;
        let idx = match self {
            Rounding::Up => scaled.ceil(),
            Rounding::Down => scaled.floor(),
            Rounding::Nearest => scaled.round(),
        };
        idx as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMode {
    /// Exact enumeration on the grid; certified upper bound.
    Exact,
    /// Normal approximation with a Berry–Esseen correction; not certified.
    Clt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConfig {
    pub step: f64,
    pub max_atoms: usize,
    pub max_types: usize,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            max_atoms: DEFAULT_MAX_ATOMS,
            max_types: DEFAULT_MAX_TYPES,
        }
    }
}

impl TailConfig {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid step {} must be positive",
                self.step
            )));
        }
        Ok(())
    }
}

/// A tail probability and whether it is a certified upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProb {
    pub value: f64,
    pub certified: bool,
}

/// Composition (type) of an input sequence: how often each symbol occurs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositionType {
    counts: Vec<usize>,
}

impl CompositionType {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    /// Type of an explicit sequence over an alphabet of `alphabet` symbols.
    pub fn of_sequence(seq: &[usize], alphabet: usize) -> Self {
        let mut counts = vec![0; alphabet];
        for &x in seq {
            counts[x] += 1;
        }
        Self { counts }
    }

    pub fn t(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    /// Normalized counts; `None` for the empty sequence.
    pub fn distribution(&self) -> Option<InputDistribution> {
        let t = self.t();
        if t == 0 {
            return None;
        }
        let probs = self.counts.iter().map(|&c| c as f64 / t as f64).collect();
        InputDistribution::new(probs).ok()
    }

    /// All compositions of `t` into `alphabet` parts, in lexicographic order.
    pub fn enumerate(t: usize, alphabet: usize) -> Vec<CompositionType> {
        let mut out = Vec::new();
        let mut counts = vec![0; alphabet];
        fill_compositions(t, 0, &mut counts, &mut out);
        out
    }

    /// Output marginal `P_{x^t}W(y)`, scaled by `t` (i.e. `Σ_x n_x W(y|x)`).
    fn scaled_marginal(&self, w: &DMChannel) -> Vec<f64> {
        let mut out = vec![0.0; w.output_size()];
        for (x, &n) in self.counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            for (o, &wyx) in out.iter_mut().zip(w.row(x)) {
                *o += n as f64 * wyx;
            }
        }
        out
    }
}

fn fill_compositions(remaining: usize, index: usize, counts: &mut Vec<usize>, out: &mut Vec<CompositionType>) {
    if index + 1 == counts.len() {
        counts[index] = remaining;
        out.push(CompositionType::new(counts.clone()));
        return;
    }
    for c in 0..=remaining {
        counts[index] = c;
        fill_compositions(remaining - c, index + 1, counts, out);
    }
}

/// Number of compositions of `t` into `alphabet` parts, `C(t+k−1, k−1)`.
pub fn type_count(t: usize, alphabet: usize) -> u128 {
    let k = alphabet as u128 - 1;
    let n = t as u128 + k;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Probability mass function supported on a grid `{i·step}`, stored sparsely
/// as `(index, mass)` pairs with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPmf {
    step: f64,
    atoms: Vec<(i64, f64)>,
}

impl QuantizedPmf {
    /// Point mass at grid index `index`.
    pub fn point(index: i64, step: f64) -> Self {
        Self {
            step,
            atoms: vec![(index, 1.0)],
        }
    }

    /// Builds a PMF from arbitrary atoms, merging equal indices and dropping
    /// zero masses.
    pub fn from_atoms(step: f64, mut atoms: Vec<(i64, f64)>) -> Self {
        atoms.retain(|&(_, m)| m > 0.0);
        atoms.sort_unstable_by_key(|&(i, _)| i);
        Self {
            step,
            atoms: merge_sorted(atoms),
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Value of the smallest atom.
    pub fn origin(&self) -> f64 {
        self.atoms.first().map_or(0.0, |&(i, _)| i as f64 * self.step)
    }

    pub fn atoms(&self) -> &[(i64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atom values in nats with their masses.
    pub fn values(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().map(move |&(i, m)| (i as f64 * self.step, m))
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, m)| m).sum()
    }

    pub fn mean(&self) -> f64 {
        self.values().map(|(v, m)| v * m).sum()
    }

    /// `P[X > λ]`.
    pub fn tail_above(&self, lambda: f64) -> f64 {
        let thr = threshold_index(lambda, self.step);
        let start = self.atoms.partition_point(|&(i, _)| i <= thr);
        self.atoms[start..].iter().map(|&(_, m)| m).sum()
    }

    /// Law of the sum of two independent variables on the same grid.
    pub fn convolve(&self, other: &Self, max_atoms: usize) -> Result<Self> {
        assert_eq!(self.step, other.step, "convolving PMFs on different grids");
        let raw = self.atoms.len().saturating_mul(other.atoms.len());
        let mut atoms = Vec::with_capacity(raw.min(max_atoms.saturating_add(1)));
        for &(i, a) in &self.atoms {
            for &(j, b) in &other.atoms {
                atoms.push((i + j, a * b));
            }
        }
        let out = Self::from_atoms(self.step, atoms);
        if out.len() > max_atoms {
            return Err(Error::GridOverflow {
                atoms: out.len(),
                limit: max_atoms,
            });
        }
        Ok(out)
    }

    /// `n`-fold self-convolution by binary exponentiation.
    pub fn power(&self, n: usize, max_atoms: usize) -> Result<Self> {
        let mut result = Self::point(0, self.step);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.convolve(&base, max_atoms)?;
            }
            n >>= 1;
            if n > 0 {
                base = base.convolve(&base, max_atoms)?;
            }
        }
        Ok(result)
    }

    /// Checks the total mass; masses are never renormalized.
    pub fn check_mass(&self) -> Result<()> {
        let drift = (self.total_mass() - 1.0).abs();
        if drift > MASS_TOLERANCE {
            return Err(Error::MassDrift { drift });
        }
        Ok(())
    }
}

fn merge_sorted(atoms: Vec<(i64, f64)>) -> Vec<(i64, f64)> {
    let mut out: Vec<(i64, f64)> = Vec::with_capacity(atoms.len());
    for (i, m) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += m,
            _ => out.push((i, m)),
        }
    }
    out
}

/// Largest grid index `k` with `k·step ≤ λ`; atoms with index `> k` lie
/// strictly above `λ`.
pub(crate) fn threshold_index(lambda: f64, step: f64) -> i64 {
    if lambda.is_nan() {
        return i64::MIN;
    }
    let scaled = (lambda / step).floor();
    if scaled <= i64::MIN as f64 {
        return i64::MIN;
    }
    if scaled >= i64::MAX as f64 {
        return i64::MAX;
    }
    let mut k = scaled as i64;
    while k as f64 * step > lambda {
        k -= 1;
    }
    k
}

/// `P[A + B > thr]` on grid indices, for sorted sparse atoms.
fn sum_tail(a: &[(i64, f64)], b: &[(i64, f64)], thr: i64) -> f64 {
    let mut suffix = vec![0.0; b.len() + 1];
    for j in (0..b.len()).rev() {
        suffix[j] = suffix[j + 1] + b[j].1;
    }
    let mut j = b.len();
    let mut total = 0.0;
    for &(ia, ma) in a {
        let need = thr.saturating_sub(ia);
        while j > 0 && b[j - 1].0 > need {
            j -= 1;
        }
        total += ma * suffix[j];
    }
    total
}

/// Tail of the sum of independent per-symbol laws.
fn tail_of_independent_sum(mut parts: Vec<QuantizedPmf>, thr: i64, max_atoms: usize) -> Result<f64> {
    let last = match parts.pop() {
        Some(p) => p,
        None => return Ok(if 0 > thr { 1.0 } else { 0.0 }),
    };
    if parts.is_empty() {
        return Ok(last.atoms[last.atoms.partition_point(|&(i, _)| i <= thr)..]
            .iter()
            .map(|&(_, m)| m)
            .sum());
    }
    let mut acc = parts.swap_remove(0);
    for p in &parts {
        acc = acc.convolve(p, max_atoms)?;
    }
    Ok(sum_tail(&acc.atoms, &last.atoms, thr))
}

fn check_type(ty: &CompositionType, w: &DMChannel) -> Result<()> {
    if ty.alphabet_size() != w.input_size() {
        return Err(Error::SizeMismatch {
            expected: w.input_size(),
            got: ty.alphabet_size(),
        });
    }
    Ok(())
}

/// Law of one summand `log W(Y|x) / P_{x^t}W(Y)` with `Y ~ W(·|x)`, each value
/// snapped to the grid according to `rounding`.
pub fn symbol_density_pmf(
    ty: &CompositionType,
    w: &DMChannel,
    x: usize,
    step: f64,
    rounding: Rounding,
) -> Result<QuantizedPmf> {
    check_type(ty, w)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid step {step} must be positive")));
    }
    if x >= w.input_size() || ty.counts()[x] == 0 {
        return Err(Error::InvalidParameter(format!(
            "symbol {x} does not occur in the type {:?}",
            ty.counts()
        )));
    }
    let t = ty.t() as f64;
    let marginal = ty.scaled_marginal(w);
    let atoms = (0..w.output_size())
        .filter(|&y| w.prob(x, y) > 0.0)
        .map(|y| {
            let value = w.prob(x, y).ln() - (marginal[y] / t).ln();
            (rounding.index(value, step), w.prob(x, y))
        })
        .collect();
    Ok(QuantizedPmf::from_atoms(step, atoms))
}

/// `P[i_{P_{x^t},W}(x^t; Y^t) > λ]` for any `x^t` of type `ty`, computed on the
/// grid with upward rounding by repeated-squaring convolution. The result is a
/// certified upper bound on the true tail.
pub fn type_tail_prob(ty: &CompositionType, w: &DMChannel, lambda: f64, cfg: &TailConfig) -> Result<TailProb> {
    check_type(ty, w)?;
    cfg.validate()?;
    let thr = threshold_index(lambda, cfg.step);
    let mut parts = Vec::new();
    for (x, &n) in ty.counts().iter().enumerate() {
        if n == 0 {
            continue;
        }
        let pmf = symbol_density_pmf(ty, w, x, cfg.step, Rounding::Up)?;
        let pmf = pmf.power(n, cfg.max_atoms)?;
        pmf.check_mass()?;
        parts.push(pmf);
    }
    let value = tail_of_independent_sum(parts, thr, cfg.max_atoms)?;
    Ok(TailProb {
        value: value.clamp(0.0, 1.0),
        certified: true,
    })
}

/// `max` over all types of length `t` of the tail at `λ`.
///
/// Builds a fresh [`TailEngine`]; use an engine directly when evaluating many
/// `(t, λ)` pairs on the same channel.
pub fn max_tail_over_types(t: usize, w: &DMChannel, lambda: f64, mode: TailMode, cfg: &TailConfig) -> Result<TailProb> {
    let mut engine = TailEngine::new(w.clone(), *cfg)?;
    engine.max_tail(t, lambda, mode)
}

/// Pascal rows of `Binomial(n, p)` for `n = 0, 1, …`.
#[derive(Debug, Clone)]
struct BinomialRows {
    p: f64,
    rows: Vec<Vec<f64>>,
}

impl BinomialRows {
    fn new(p: f64) -> Self {
        Self {
            p,
            rows: vec![vec![1.0]],
        }
    }

    fn ensure(&mut self, n: usize) {
        let q = 1.0 - self.p;
        while self.rows.len() <= n {
            let prev = self.rows.last().expect("row 0 always present");
            let mut row = Vec::with_capacity(prev.len() + 1);
            row.push(prev[0] * q);
            for k in 1..prev.len() {
                row.push(prev[k] * q + prev[k - 1] * self.p);
            }
            row.push(prev[prev.len() - 1] * self.p);
            self.rows.push(row);
        }
    }

    fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }
}

/// Output-count law of repeated uses of one input symbol, as a chain of
/// conditional binomials over the outputs it can produce.
#[derive(Debug, Clone)]
struct SymbolLaw {
    outputs: Vec<usize>,
    chain: Vec<BinomialRows>,
}

impl SymbolLaw {
    fn new(row: &[f64]) -> Self {
        let outputs: Vec<usize> = (0..row.len()).filter(|&y| row[y] > 0.0).collect();
        let mut chain = Vec::new();
        let mut remaining: f64 = outputs.iter().map(|&y| row[y]).sum();
        for &y in outputs.iter().take(outputs.len().saturating_sub(1)) {
            chain.push(BinomialRows::new((row[y] / remaining).min(1.0)));
            remaining -= row[y];
        }
        Self { outputs, chain }
    }

    fn ensure(&mut self, n: usize) {
        for rows in &mut self.chain {
            rows.ensure(n);
        }
    }

    /// Atoms `(Σ_y k_y·idx_y, P[k])` of the summed grid index over `n` uses,
    /// sorted by index. `idx` is indexed like `self.outputs`.
    fn sum_atoms(&self, n: usize, idx: &[i64]) -> Vec<(i64, f64)> {
        match self.outputs.len() {
            1 => vec![(n as i64 * idx[0], 1.0)],
            2 => {
                let row = self.chain[0].row(n);
                let diff = idx[0] - idx[1];
                let base = n as i64 * idx[1];
                let mut atoms: Vec<(i64, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m > 0.0)
                    .map(|(k, &m)| (base + k as i64 * diff, m))
                    .collect();
                if diff < 0 {
                    atoms.reverse();
                } else if diff == 0 {
                    return vec![(base, atoms.iter().map(|a| a.1).sum())];
                }
                atoms
            }
            _ => {
                let mut atoms = Vec::new();
                self.enumerate_chain(0, n, 0, 1.0, idx, &mut atoms);
                atoms.sort_unstable_by_key(|&(i, _)| i);
                merge_sorted(atoms)
            }
        }
    }

    fn enumerate_chain(
        &self,
        level: usize,
        left: usize,
        value: i64,
        mass: f64,
        idx: &[i64],
        out: &mut Vec<(i64, f64)>,
    ) {
        if level == self.chain.len() {
            out.push((value + left as i64 * idx[level], mass));
            return;
        }
        let row = self.chain[level].row(left);
        for (k, &m) in row.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            self.enumerate_chain(level + 1, left - k, value + k as i64 * idx[level], mass * m, idx, out);
        }
    }
}

/// Reusable evaluator of `max_{x^t} P[i(x^t; Y^t) > λ]` for one channel.
#[derive(Debug, Clone)]
pub struct TailEngine {
    channel: DMChannel,
    cfg: TailConfig,
    laws: Vec<SymbolLaw>,
}

impl TailEngine {
    pub fn new(channel: DMChannel, cfg: TailConfig) -> Result<Self> {
        cfg.validate()?;
        let laws = channel.rows().map(SymbolLaw::new).collect();
        Ok(Self { channel, cfg, laws })
    }

    pub fn channel(&self) -> &DMChannel {
        &self.channel
    }

    pub fn config(&self) -> &TailConfig {
        &self.cfg
    }

    /// Grows the cached count laws to cover sequences of length `t`.
    pub fn prepare(&mut self, t: usize) {
        for law in &mut self.laws {
            law.ensure(t);
        }
    }

    /// Upward-rounded grid indices of `log W(y|x)/P_{x^t}W(y)`, per symbol, in
    /// the order of each symbol's supported outputs.
    fn grid_indices(&self, ty: &CompositionType) -> Vec<Vec<i64>> {
        let t = ty.t() as f64;
        let marginal = ty.scaled_marginal(&self.channel);
        self.laws
            .iter()
            .enumerate()
            .map(|(x, law)| {
                law.outputs
                    .iter()
                    .map(|&y| {
                        let value = self.channel.prob(x, y).ln() - (marginal[y] / t).ln();
                        Rounding::Up.index(value, self.cfg.step)
                    })
                    .collect()
            })
            .collect()
    }

    /// Certified upper bound on the tail for one type. Requires
    /// [`prepare`](Self::prepare) with at least `ty.t()`.
    pub fn type_tail(&self, ty: &CompositionType, lambda: f64) -> Result<f64> {
        check_type(ty, &self.channel)?;
        let t = ty.t();
        let thr = threshold_index(lambda, self.cfg.step);
        if t == 0 {
            return Ok(if 0 > thr { 1.0 } else { 0.0 });
        }
        let idx = self.grid_indices(ty);
        let (mut lo, mut hi) = (0i64, 0i64);
        for (x, &n) in ty.counts().iter().enumerate() {
            if n == 0 {
                continue;
            }
            let n = n as i64;
            lo += n * idx[x].iter().copied().min().expect("nonempty support");
            hi += n * idx[x].iter().copied().max().expect("nonempty support");
        }
        if hi <= thr {
            return Ok(0.0);
        }
        if lo > thr {
            return Ok(1.0);
        }
        let parts: Vec<QuantizedPmf> = ty
            .counts()
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(x, &n)| QuantizedPmf {
                step: self.cfg.step,
                atoms: self.laws[x].sum_atoms(n, &idx[x]),
            })
            .collect();
        let value = tail_of_independent_sum(parts, thr, self.cfg.max_atoms)?;
        Ok(value.clamp(0.0, 1.0))
    }

    /// Maximum tail over every type of length `t`.
    pub fn max_tail(&mut self, t: usize, lambda: f64, mode: TailMode) -> Result<TailProb> {
        match mode {
            TailMode::Exact => {
                let count = type_count(t, self.channel.input_size());
                if count > self.cfg.max_types as u128 {
                    return Err(Error::TypeEnumerationOverflow {
                        count,
                        limit: self.cfg.max_types,
                    });
                }
                self.prepare(t);
                let types = CompositionType::enumerate(t, self.channel.input_size());
                let value = types
                    .par_iter()
                    .map(|ty| self.type_tail(ty, lambda))
                    .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
                Ok(TailProb { value, certified: true })
            }
            TailMode::Clt => {
                let types = CompositionType::enumerate(t, self.channel.input_size());
                let value = types
                    .par_iter()
                    .map(|ty| clt_type_tail(ty, &self.channel, lambda))
                    .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
                Ok(TailProb {
                    value,
                    certified: false,
                })
            }
        }
    }
}

/// Normal approximation of the type tail with a Berry–Esseen correction,
/// `Q((λ − tI)/√(tV)) + 6T/(√t V^{3/2})`, clipped to `[0, 1]`.
pub fn clt_type_tail(ty: &CompositionType, w: &DMChannel, lambda: f64) -> Result<f64> {
    check_type(ty, w)?;
    let Some(p) = ty.distribution() else {
        return Ok(if 0.0 > lambda { 1.0 } else { 0.0 });
    };
    let t = ty.t() as f64;
    let stats = channel_statistics(&p, w)?;
    let mean = t * stats.mutual_information;
    if stats.info_variance <= 0.0 {
        return Ok(if mean > lambda { 1.0 } else { 0.0 });
    }
    let sd = (t * stats.info_variance).sqrt();
    let correction = BERRY_ESSEEN_CONSTANT * stats.third_abs_moment / (t.sqrt() * stats.info_variance.powf(1.5));
    Ok((gauss::q((lambda - mean) / sd) + correction).clamp(0.0, 1.0))
}
