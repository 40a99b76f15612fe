//! Threshold-decoding stop-feedback scheme and its achievability bound.
//!
//! Each decoder accumulates its own information density and stops the first
//! time the running sum reaches its threshold; the transmission lasts until
//! both have stopped. Common randomness is a single Bernoulli(`q`) coin which,
//! when it lands heads, stops both decoders at time zero. That branch costs no
//! channel uses and at most `q` error, so the average blocklength is
//! `(1 − q)·E[max(τ₁, τ₂)]` and the coin never needs to be simulated.

use crate::bound::{BoundKind, BoundPoint};
use crate::channel::{density_table, BroadcastPair};
use crate::error::{Error, Result};
use crate::mc::{run_trials, DiscreteSampler, SampleSummary};

/// Simulation settings for one pair of thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub q: f64,
    pub trials: u64,
    pub seed: u64,
    /// Cap on the number of channel uses per trial; `None` picks
    /// `50·max(γ)/C` (at least 100).
    pub max_steps: Option<u64>,
    /// Also run an independent impostor codeword to estimate `P[τ_k ≥ τ̄_k]`.
    pub impostor: bool,
}

impl SimConfig {
    pub fn new(gamma: f64, trials: u64, seed: u64) -> Self {
        Self {
            gamma1: gamma,
            gamma2: gamma,
            q: 0.0,
            trials,
            seed,
            max_steps: None,
            impostor: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma1.is_finite() && self.gamma2.is_finite()) {
            return Err(Error::InvalidParameter("thresholds must be finite".into()));
        }
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return Err(Error::InvalidParameter("thresholds must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidParameter(format!("q = {} outside [0, 1]", self.q)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("at least one trial is required".into()));
        }
        Ok(())
    }

    pub fn resolved_max_steps(&self, capacity: f64) -> u64 {
        self.max_steps.unwrap_or_else(|| {
            let gamma = self.gamma1.max(self.gamma2);
            if capacity > 0.0 {
                ((50.0 * gamma / capacity).ceil() as u64).max(100)
            } else {
                100
            }
        })
    }
}

/// Outcome of a single simulated transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub tau1: u64,
    pub tau2: u64,
    /// Impostor crossed no later than the true codeword, per decoder.
    pub impostor_wins: [bool; 2],
    pub censored: bool,
}

impl TrialOutcome {
    pub fn max_tau(&self) -> u64 {
        self.tau1.max(self.tau2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingEstimate {
    pub mean_max_tau: f64,
    pub std_error: f64,
    pub mean_tau1: f64,
    pub mean_tau2: f64,
    pub std_error_tau1: f64,
    pub std_error_tau2: f64,
    /// Frequencies of `τ̄_k ≤ τ_k` per decoder, when the impostor was run.
    pub pairwise_error: Option<[SampleSummary; 2]>,
    pub censored_fraction: f64,
    pub trials: u64,
}

impl StoppingEstimate {
    /// `(1 − q)·E[max(τ₁, τ₂)]`.
    pub fn avg_blocklength(&self, q: f64) -> f64 {
        (1.0 - q) * self.mean_max_tau
    }

    pub fn is_valid(&self) -> bool {
        self.censored_fraction == 0.0
    }
}

/// Runs every trial and returns the raw outcomes in trial order.
pub fn simulate_trials(pair: &BroadcastPair, cfg: &SimConfig) -> Result<Vec<TrialOutcome>> {
    cfg.validate()?;
    let pstar = pair.pstar();
    let d1 = density_table(pstar, pair.w1())?;
    let d2 = density_table(pstar, pair.w2())?;
    let input = DiscreteSampler::new(pstar.probs());
    let out1: Vec<DiscreteSampler> = pair.w1().rows().map(DiscreteSampler::new).collect();
    let out2: Vec<DiscreteSampler> = pair.w2().rows().map(DiscreteSampler::new).collect();
    let max_steps = cfg.resolved_max_steps(pair.capacity());
    let gammas = [cfg.gamma1, cfg.gamma2];
    let impostor = cfg.impostor;

    Ok(run_trials(cfg.trials, cfg.seed, |rng| {
        let mut tau: [Option<u64>; 2] = [None, None];
        let mut impostor_tau: [Option<u64>; 2] = [None, None];
        for k in 0..2 {
            if gammas[k] <= 0.0 {
                tau[k] = Some(0);
                impostor_tau[k] = Some(0);
            }
        }
        let mut sums = [0.0f64; 2];
        let mut fake = [0.0f64; 2];
        let mut n = 0u64;
        let mut censored = false;
        while tau[0].is_none() || tau[1].is_none() {
            if n == max_steps {
                censored = true;
                break;
            }
            n += 1;
            // Always draw the full tuple so trials stay coupled across thresholds.
            let x = input.sample(rng);
            let y = [out1[x].sample(rng), out2[x].sample(rng)];
            let x_bar = if impostor { Some(input.sample(rng)) } else { None };
            for k in 0..2 {
                if tau[k].is_some() {
                    continue;
                }
                let table = if k == 0 { &d1 } else { &d2 };
                sums[k] += table[x][y[k]];
                if let Some(xb) = x_bar {
                    fake[k] += table[xb][y[k]];
                    if impostor_tau[k].is_none() && fake[k] >= gammas[k] {
                        impostor_tau[k] = Some(n);
                    }
                }
                if sums[k] >= gammas[k] {
                    tau[k] = Some(n);
                }
            }
        }
        let wins = [0, 1].map(|k| match (tau[k], impostor_tau[k]) {
            (Some(t), Some(tb)) => tb <= t,
            _ => false,
        });
        TrialOutcome {
            tau1: tau[0].unwrap_or(max_steps),
            tau2: tau[1].unwrap_or(max_steps),
            impostor_wins: wins,
            censored,
        }
    }))
}

/// Monte Carlo estimate of `E[max(τ₁, τ₂)]` (and optionally the pairwise
/// error frequencies). Fails with [`Error::CensoredRuns`] if any trial hits
/// the step cap.
pub fn simulate_stopping(pair: &BroadcastPair, cfg: &SimConfig) -> Result<StoppingEstimate> {
    let outcomes = simulate_trials(pair, cfg)?;
    let censored = outcomes.iter().filter(|o| o.censored).count();
    if censored > 0 {
        return Err(Error::CensoredRuns {
            censored,
            trials: outcomes.len(),
            max_steps: cfg.resolved_max_steps(pair.capacity()),
        });
    }
    Ok(summarize(&outcomes, cfg.impostor))
}

pub fn summarize(outcomes: &[TrialOutcome], impostor: bool) -> StoppingEstimate {
    let max = SampleSummary::of(outcomes.iter().map(|o| o.max_tau() as f64));
    let t1 = SampleSummary::of(outcomes.iter().map(|o| o.tau1 as f64));
    let t2 = SampleSummary::of(outcomes.iter().map(|o| o.tau2 as f64));
    let pairwise_error = impostor
        .then(|| [0, 1].map(|k| SampleSummary::of(outcomes.iter().map(|o| f64::from(u8::from(o.impostor_wins[k]))))));
    let censored = outcomes.iter().filter(|o| o.censored).count();
    StoppingEstimate {
        mean_max_tau: max.mean,
        std_error: max.std_error,
        mean_tau1: t1.mean,
        mean_tau2: t2.mean,
        std_error_tau1: t1.std_error,
        std_error_tau2: t2.std_error,
        pairwise_error,
        censored_fraction: censored as f64 / outcomes.len().max(1) as f64,
        trials: outcomes.len() as u64,
    }
}

/// `q + (1 − q)(M − 1)e^{−γ}`, clipped to `[0, 1]`, with `M = e^{log_m}`.
pub fn remark2_error_bound(log_m: f64, gamma: f64, q: f64) -> f64 {
    if log_m <= 0.0 {
        return q.clamp(0.0, 1.0);
    }
    // ln(M − 1) = ln M + ln(1 − 1/M)
    let log_m_minus_1 = log_m + (-(-log_m).exp()).ln_1p();
    let tail = (log_m_minus_1 - gamma).exp();
    (q + (1.0 - q) * tail).clamp(0.0, 1.0)
}

/// Inputs of the achievability design recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    pub l_prime: f64,
    pub epsilon: f64,
    /// Moment order `r ≥ 3` entering the remainder exponent `(r+1)/(4r+2)`.
    pub r: u32,
    pub b1: f64,
}

impl DesignParams {
    pub fn new(l_prime: f64, epsilon: f64) -> Self {
        Self {
            l_prime,
            epsilon,
            r: 3,
            b1: 1.0,
        }
    }
}

/// Closed-form part of the recipe: thresholds, coin bias and code size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recipe {
    pub params: DesignParams,
    /// `g(C·l′)`.
    pub g: f64,
    /// Common threshold `γ = C(l′ − g(C l′))`.
    pub gamma: f64,
    /// `q = (l′ε − 1)/(l′ − 1)`.
    pub q: f64,
    /// `log M̃ = γ − ln l′`.
    pub log_m: f64,
    /// `q + (1 − q)(M̃ − 1)e^{−γ}`, never above `ε`.
    pub eps_bound: f64,
}

/// `g(x) = √((V₁+V₂)/(2πC²))·√(x/C) + b₁·x^{(r+1)/(4r+2)}·ln x`.
pub fn recipe_g(pair: &BroadcastPair, r: u32, b1: f64, x: f64) -> f64 {
    let c = pair.capacity();
    let lead = ((pair.v1() + pair.v2()) / (2.0 * std::f64::consts::PI * c * c)).sqrt() * (x / c).sqrt();
    let exponent = f64::from(r + 1) / f64::from(4 * r + 2);
    lead + b1 * x.powf(exponent) * x.ln()
}

pub fn design_recipe(pair: &BroadcastPair, params: DesignParams) -> Result<Recipe> {
    let DesignParams {
        l_prime,
        epsilon,
        r,
        b1,
    } = params;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must lie in (0, 1)")));
    }
    if r < 3 {
        return Err(Error::InvalidParameter(format!(
            "moment order r = {r} must be at least 3"
        )));
    }
    if !(l_prime > 1.0) || l_prime * epsilon < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "l' = {l_prime} must exceed 1 and satisfy l' * eps >= 1"
        )));
    }
    let c = pair.capacity();
    if !(c > 0.0) {
        return Err(Error::InvalidParameter("capacity must be positive".into()));
    }
    let g = recipe_g(pair, r, b1, c * l_prime);
    let gamma = c * (l_prime - g);
    if !(gamma > 0.0) {
        return Err(Error::RecipeInfeasible(format!(
            "threshold gamma = {gamma} is not positive for l' = {l_prime}, b1 = {b1}"
        )));
    }
    let q = (l_prime * epsilon - 1.0) / (l_prime - 1.0);
    let log_m = gamma - l_prime.ln();
    if log_m < 0.0 {
        return Err(Error::RecipeInfeasible(format!(
            "threshold gamma = {gamma} is below ln l' = {}; fewer than one message",
            l_prime.ln()
        )));
    }
    Ok(Recipe {
        params,
        g,
        gamma,
        q,
        log_m,
        eps_bound: remark2_error_bound(log_m, gamma, q),
    })
}

/// Result of running the design recipe through the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct AchievablePoint {
    pub recipe: Recipe,
    pub sim: SimConfig,
    pub estimate: StoppingEstimate,
    /// `(1 − q)·mean`, with `log M̃`; Monte Carlo, never certified.
    pub point: BoundPoint,
    /// Standard error of `point.avg_blocklength`.
    pub blocklength_std_error: f64,
    /// Whether the measured `E[max(τ₁, τ₂)]` stayed within `l′`.
    pub meets_l_prime: bool,
}

pub fn design_achievable_point(
    pair: &BroadcastPair,
    params: DesignParams,
    trials: u64,
    seed: u64,
) -> Result<AchievablePoint> {
    let recipe = design_recipe(pair, params)?;
    let sim = SimConfig {
        q: recipe.q,
        ..SimConfig::new(recipe.gamma, trials, seed)
    };
    let estimate = simulate_stopping(pair, &sim)?;
    let point = BoundPoint {
        avg_blocklength: estimate.avg_blocklength(recipe.q),
        log_m: recipe.log_m,
        kind: BoundKind::Achievability,
        certified: false,
    };
    Ok(AchievablePoint {
        blocklength_std_error: (1.0 - recipe.q) * estimate.std_error,
        meets_l_prime: estimate.mean_max_tau <= params.l_prime,
        recipe,
        sim,
        estimate,
        point,
    })
}

/// Searches `l′` so that the simulated average blocklength `(1 − q)·E[max τ]`
/// matches `l_target` to within one standard error. Trials share the seed, so
/// the measured blocklength is monotone in `l′` and bisection applies.
pub fn design_for_blocklength(
    pair: &BroadcastPair,
    l_target: f64,
    epsilon: f64,
    r: u32,
    b1: f64,
    trials: u64,
    seed: u64,
) -> Result<AchievablePoint> {
    if !(l_target > 0.0) {
        return Err(Error::InvalidParameter("target blocklength must be positive".into()));
    }
    let run = |l_prime: f64| {
        let params = DesignParams {
            l_prime,
            epsilon,
            r,
            b1,
        };
        design_achievable_point(pair, params, trials, seed)
    };
    let floor = (1.0 / epsilon).max(1.0 + 1e-9);
    // Smallest feasible l′ at or above the target.
    let mut lo = l_target.max(floor);
    let mut lo_point = loop {
        match run(lo) {
            Ok(p) => break p,
            Err(Error::RecipeInfeasible(_)) if lo < 1e9 => lo *= 1.5,
            Err(e) => return Err(e),
        }
    };
    if lo_point.point.avg_blocklength >= l_target {
        return Ok(lo_point);
    }
    let mut hi = lo * 1.5;
    let mut hi_point = run(hi)?;
    while hi_point.point.avg_blocklength < l_target {
        lo = hi;
        lo_point = hi_point;
        hi *= 1.5;
        if hi > 1e9 {
            return Err(Error::BracketFailure(format!(
                "no l' reaches average blocklength {l_target}"
            )));
        }
        hi_point = run(hi)?;
    }
    for _ in 0..60 {
        let best =
            if (lo_point.point.avg_blocklength - l_target).abs() <= (hi_point.point.avg_blocklength - l_target).abs() {
                &lo_point
            } else {
                &hi_point
            };
        if (best.point.avg_blocklength - l_target).abs() <= best.blocklength_std_error.max(1e-9) || hi - lo < 1e-9 * hi
        {
            return Ok(best.clone());
        }
        let mid = 0.5 * (lo + hi);
        let mid_point = run(mid)?;
        if mid_point.point.avg_blocklength < l_target {
            lo = mid;
            lo_point = mid_point;
        } else {
            hi = mid;
            hi_point = mid_point;
        }
    }
    Ok(
        if (lo_point.point.avg_blocklength - l_target).abs() <= (hi_point.point.avg_blocklength - l_target).abs() {
            lo_point
        } else {
            hi_point
        },
    )
}
