//! Converse bound on the average blocklength and its inversion into an upper
//! bound on the code size.
//!
//! For a code of size `M` and target error `ε`,
//! `l ≥ Σ_t (1 − L_t)⁺` with
//! `L_t = Π_k max_{x^t} P[i_k(x^t; Y_k^t) > λ_t] + ε_M·(1 + min_k max_{x^t} P[…])`,
//! `λ_t = ln M − ln ln M − δ − (|X| − 1)·ln(t + 1)` and `ε_M = ε + 1/ln M`.

use crate::asymptotics;
use crate::bound::{BoundKind, BoundPoint};
use crate::channel::BroadcastPair;
use crate::error::{Error, Result};
use crate::tail::{TailConfig, TailEngine, TailMode};

pub const DEFAULT_DELTA: f64 = 1e-3;
/// Consecutive zero summands after which the series is truncated.
pub const ZERO_RUN: usize = 64;
/// Bisection tolerance on `ln M`, in nats.
pub const LOGM_TOLERANCE: f64 = 1e-3;
const VERIFY_OFFSET: f64 = 0.01;
const SCAN_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverseConfig {
    pub log_m: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Fixed horizon when `auto_extend` is off; otherwise an optional
    /// override of the initial guess.
    pub t_max: Option<usize>,
    pub auto_extend: bool,
    pub tail_mode: TailMode,
    pub tail: TailConfig,
}

impl ConverseConfig {
    pub fn new(log_m: f64, epsilon: f64) -> Self {
        Self {
            log_m,
            epsilon,
            delta: DEFAULT_DELTA,
            t_max: None,
            auto_extend: true,
            tail_mode: TailMode::Exact,
            tail: TailConfig::default(),
        }
    }

    /// Builds the configuration from an integer code size.
    pub fn with_m(m: u64, epsilon: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!("code size {m} must be at least 2")));
        }
        Ok(Self::new((m as f64).ln(), epsilon))
    }

    /// `ε + 1/ln M`.
    pub fn eps_m(&self) -> f64 {
        self.epsilon + 1.0 / self.log_m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {} must lie in (0, 1)",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta {} must be positive",
                self.delta
            )));
        }
        if !(self.log_m > 1.0 && self.log_m.is_finite()) {
            return Err(Error::LogMDomain { log_m: self.log_m });
        }
        if !self.auto_extend && self.t_max.is_none() {
            return Err(Error::InvalidParameter("a fixed horizon needs t_max".into()));
        }
        Ok(())
    }
}

/// `ln M − ln ln M − δ − (|X| − 1)·ln(t + 1)`.
pub fn lambda_t(log_m: f64, delta: f64, t: usize, input_size: usize) -> Result<f64> {
    if !(log_m > 1.0) {
        return Err(Error::LogMDomain { log_m });
    }
    Ok(log_m - log_m.ln() - delta - (input_size as f64 - 1.0) * ((t + 1) as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtValue {
    pub t: usize,
    pub lambda: f64,
    pub tail1: f64,
    pub tail2: f64,
    /// `L_t`; may exceed 1.
    pub value: f64,
    pub certified: bool,
}

impl LtValue {
    /// `(1 − L_t)⁺`.
    pub fn summand(&self) -> f64 {
        (1.0 - self.value).max(0.0)
    }
}

/// How the series was truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// `ε_M ≥ 1`: every summand vanishes.
    Vacuous,
    /// A run of [`ZERO_RUN`] zero summands.
    ZeroRun,
    /// The configured fixed horizon.
    Horizon,
    /// The auto-extension ceiling.
    Ceiling,
    /// The partial sum already exceeded the caller's limit.
    Exceeded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverseResult {
    /// Lower bound on the average blocklength (a partial sum, hence valid
    /// under any truncation).
    pub bound: f64,
    /// Largest `t` included in the sum.
    pub last_t: Option<usize>,
    pub stop: StopRule,
    pub certified: bool,
}

/// Evaluates the converse for a fixed broadcast pair, reusing the per-channel
/// tail caches across calls.
#[derive(Debug, Clone)]
pub struct ConverseEvaluator {
    engines: Vec<TailEngine>,
    input_size: usize,
    capacity: f64,
    v_geo: f64,
    rho: (f64, f64),
    tail: TailConfig,
}

impl ConverseEvaluator {
    pub fn new(pair: &BroadcastPair, tail: TailConfig) -> Result<Self> {
        let mut engines = vec![TailEngine::new(pair.w1().clone(), tail)?];
        if !pair.identical_channels() {
            engines.push(TailEngine::new(pair.w2().clone(), tail)?);
        }
        Ok(Self {
            engines,
            input_size: pair.w1().input_size(),
            capacity: pair.capacity(),
            v_geo: pair.v_geo(),
            rho: (pair.rho1(), pair.rho2()),
            tail,
        })
    }

    pub fn tail_config(&self) -> &TailConfig {
        &self.tail
    }

    fn check_tail_config(&self, cfg: &ConverseConfig) -> Result<()> {
        if cfg.tail != self.tail {
            return Err(Error::InvalidParameter(
                "converse configuration uses a different tail grid than the evaluator".into(),
            ));
        }
        Ok(())
    }

    pub fn l_t(&mut self, cfg: &ConverseConfig, t: usize) -> Result<LtValue> {
        cfg.validate()?;
        self.check_tail_config(cfg)?;
        self.l_t_unchecked(cfg, t)
    }

    fn l_t_unchecked(&mut self, cfg: &ConverseConfig, t: usize) -> Result<LtValue> {
        let lambda = lambda_t(cfg.log_m, cfg.delta, t, self.input_size)?;
        let first = self.engines[0].max_tail(t, lambda, cfg.tail_mode)?;
        let second = match self.engines.get_mut(1) {
            Some(engine) => engine.max_tail(t, lambda, cfg.tail_mode)?,
            None => first,
        };
        let value = first.value * second.value + cfg.eps_m() * (1.0 + first.value.min(second.value));
        Ok(LtValue {
            t,
            lambda,
            tail1: first.value,
            tail2: second.value,
            value,
            certified: first.certified && second.certified,
        })
    }

    /// Initial horizon `2·(λ/C + Q̃⁻¹(ε)·√(Vλ/C³))` with `λ = ln M`.
    pub fn initial_horizon(&self, cfg: &ConverseConfig) -> usize {
        let lambda = cfg.log_m;
        let c = self.capacity;
        let q = asymptotics::q_tilde_inverse(cfg.epsilon, self.rho.0, self.rho.1).unwrap_or(0.0);
        let guess = 2.0 * (lambda / c + q * (self.v_geo * lambda / (c * c * c)).sqrt());
        if guess.is_finite() && guess > 1.0 {
            guess.ceil().min(1e8) as usize
        } else {
            1
        }
    }

    /// `Σ_t (1 − L_t)⁺` with the configured truncation.
    pub fn lower_bound_l(&mut self, cfg: &ConverseConfig) -> Result<ConverseResult> {
        self.lower_bound_until(cfg, f64::INFINITY)
    }

    /// As [`lower_bound_l`](Self::lower_bound_l), but stops as soon as the
    /// partial sum exceeds `limit`.
    pub fn lower_bound_until(&mut self, cfg: &ConverseConfig, limit: f64) -> Result<ConverseResult> {
        cfg.validate()?;
        self.check_tail_config(cfg)?;
        let certified = cfg.tail_mode == TailMode::Exact;
        if cfg.eps_m() >= 1.0 {
            return Ok(ConverseResult {
                bound: 0.0,
                last_t: None,
                stop: StopRule::Vacuous,
                certified,
            });
        }
        let initial = cfg.t_max.unwrap_or_else(|| self.initial_horizon(cfg));
        let ceiling = if cfg.auto_extend {
            initial.saturating_mul(10).saturating_add(1000)
        } else {
            initial
        };
        let mut sum = 0.0;
        let mut zeros = 0usize;
        let mut t = 0usize;
        loop {
            let lt = self.l_t_unchecked(cfg, t)?;
            let s = lt.summand();
            sum += s;
            if s > 0.0 {
                zeros = 0;
            } else {
                zeros += 1;
            }
            let stop = if sum > limit {
                Some(StopRule::Exceeded)
            } else if cfg.auto_extend && zeros >= ZERO_RUN && (sum > 0.0 || t >= initial) {
                // A zero prefix (possible in the CLT mode) does not end the series.
                Some(StopRule::ZeroRun)
            } else if t >= ceiling {
                Some(if cfg.auto_extend {
                    StopRule::Ceiling
                } else {
                    StopRule::Horizon
                })
            } else {
                None
            };
            if let Some(stop) = stop {
                return Ok(ConverseResult {
                    bound: sum,
                    last_t: Some(t),
                    stop,
                    certified,
                });
            }
            t += 1;
        }
    }

    /// Inverts the converse: smallest `ln M` (to [`LOGM_TOLERANCE`]) at which
    /// the bound exceeds `l_target`, i.e. an upper bound on the largest
    /// achievable `ln M` at average blocklength `l_target`.
    pub fn max_logm(&mut self, l_target: f64, opts: &ConverseOptions) -> Result<MaxLogM> {
        if !(l_target > 0.0 && l_target.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "target blocklength {l_target} must be positive"
            )));
        }
        let mut evaluations = 0usize;
        let mut fits = |log_m: f64, this: &mut Self| -> Result<bool> {
            evaluations += 1;
            let cfg = opts.config(log_m);
            Ok(this.lower_bound_until(&cfg, l_target)?.bound <= l_target)
        };
        let bottom = 3f64.ln();
        let top = (10.0 * self.capacity * l_target).max(bottom + 1.0);
        if !fits(bottom, self)? {
            return Ok(MaxLogM {
                log_m: bottom,
                certified: opts.tail_mode == TailMode::Exact,
                evaluations,
                verified: true,
                degenerate: true,
            });
        }
        if fits(top, self)? {
            // Approximate tails can saturate at every t, leaving no finite bound.
            if opts.tail_mode == TailMode::Clt {
                return Ok(MaxLogM {
                    log_m: f64::INFINITY,
                    certified: false,
                    evaluations,
                    verified: false,
                    degenerate: true,
                });
            }
            return Err(Error::BracketFailure(format!(
                "bound at ln M = {top} still fits within l = {l_target}"
            )));
        }

        // Bracket around the first-order guess before bisecting.
        let guess = (self.capacity * l_target / (1.0 - opts.epsilon)).clamp(bottom, top);
        let (mut lo, mut hi) = (bottom, top);
        let width = 16.0;
        if fits(guess, self)? {
            lo = guess;
            let mut probe = guess + width;
            while probe < top {
                if fits(probe, self)? {
                    lo = probe;
                    probe += width;
                } else {
                    hi = probe;
                    break;
                }
            }
        } else {
            hi = guess;
            let mut probe = guess - width;
            while probe > bottom {
                if fits(probe, self)? {
                    lo = probe;
                    break;
                }
                hi = probe;
                probe -= width;
            }
        }
        while hi - lo > LOGM_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if fits(mid, self)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }

        let mut verified = !fits(hi + VERIFY_OFFSET, self)?;
        if !verified {
            // Non-monotone behaviour: fall back to scanning the whole bracket.
            let mut last_fit = None;
            for i in 0..=SCAN_POINTS {
                let x = bottom + (top - bottom) * i as f64 / SCAN_POINTS as f64;
                if fits(x, self)? {
                    last_fit = Some(i);
                }
            }
            let i = last_fit.ok_or_else(|| Error::BracketFailure("grid scan found no feasible ln M".into()))?;
            if i == SCAN_POINTS {
                return Err(Error::BracketFailure("grid scan fits at the top of the bracket".into()));
            }
            lo = bottom + (top - bottom) * i as f64 / SCAN_POINTS as f64;
            hi = bottom + (top - bottom) * (i + 1) as f64 / SCAN_POINTS as f64;
            while hi - lo > LOGM_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                if fits(mid, self)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            verified = !fits(hi + VERIFY_OFFSET, self)?;
        }
        Ok(MaxLogM {
            log_m: hi,
            certified: opts.tail_mode == TailMode::Exact,
            evaluations,
            verified,
            degenerate: false,
        })
    }
}

/// Settings for [`converse_max_logm`] other than `ln M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverseOptions {
    pub epsilon: f64,
    pub delta: f64,
    pub tail_mode: TailMode,
    pub tail: TailConfig,
}

impl ConverseOptions {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            delta: DEFAULT_DELTA,
            tail_mode: TailMode::Exact,
            tail: TailConfig::default(),
        }
    }

    pub fn config(&self, log_m: f64) -> ConverseConfig {
        ConverseConfig {
            delta: self.delta,
            tail_mode: self.tail_mode,
            tail: self.tail,
            ..ConverseConfig::new(log_m, self.epsilon)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxLogM {
    /// Upper bound on `ln M*` in nats.
    pub log_m: f64,
    pub certified: bool,
    pub evaluations: usize,
    /// The bound also exceeds the target `0.01` nats above the result.
    pub verified: bool,
    /// Even the bracket bottom `ln 3` violates the target, or (approximate
    /// tails only) the bracket top still meets it and `log_m` is infinite.
    pub degenerate: bool,
}

impl MaxLogM {
    pub fn point(&self, l_target: f64) -> BoundPoint {
        BoundPoint {
            avg_blocklength: l_target,
            log_m: self.log_m,
            kind: BoundKind::Converse,
            certified: self.certified,
        }
    }
}

pub fn l_t(cfg: &ConverseConfig, pair: &BroadcastPair, t: usize) -> Result<LtValue> {
    ConverseEvaluator::new(pair, cfg.tail)?.l_t(cfg, t)
}

pub fn converse_lower_bound_l(cfg: &ConverseConfig, pair: &BroadcastPair) -> Result<ConverseResult> {
    ConverseEvaluator::new(pair, cfg.tail)?.lower_bound_l(cfg)
}

pub fn converse_max_logm(l_target: f64, pair: &BroadcastPair, opts: &ConverseOptions) -> Result<MaxLogM> {
    ConverseEvaluator::new(pair, opts.tail)?.max_logm(l_target, opts)
}
