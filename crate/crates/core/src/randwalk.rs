//! Pairs of threshold-crossing random walks.
//!
//! `U_n = W_1 + … + W_n` and `V_n = Z_1 + … + Z_n` with i.i.d. pairs
//! `(W_i, Z_i)` drawn from a finite joint law. The quantity of interest is
//! `E[max(τ₁, τ₂)]` where `τ₁`, `τ₂` are the first crossings of a common
//! threshold `γ`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{density_table, BroadcastPair, DMChannel, InputDistribution};
use crate::error::{Error, Result};
use crate::gauss;
use crate::mc::{run_trials, DiscreteSampler, SampleSummary};

const PROB_TOLERANCE: f64 = 1e-12;
const MEAN_EQUALITY_TOLERANCE: f64 = 1e-12;

/// Joint increment law of the two walks.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec {
    atoms: Vec<(f64, f64, f64)>,
    mu_w: f64,
    mu_z: f64,
    sigma2: f64,
    r_moment: u32,
}

/// On-disk form: `{"atoms": [[w, z, p], ...], "r_moment": 3}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkFile {
    pub atoms: Vec<(f64, f64, f64)>,
    #[serde(default = "default_r")]
    pub r_moment: u32,
}

fn default_r() -> u32 {
    3
}

impl WalkSpec {
    /// Builds a spec from `(w, z, prob)` triples. All moments of a finite law
    /// are finite, so `r_moment` only records the order the caller relies on.
    pub fn new(atoms: Vec<(f64, f64, f64)>, r_moment: u32) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("walk law has no atoms".into()));
        }
        if r_moment < 3 {
            return Err(Error::InvalidParameter(format!("moment order {r_moment} is below 3")));
        }
        for &(w, z, p) in &atoms {
            if !(w.is_finite() && z.is_finite()) {
                return Err(Error::InvalidDistribution(format!("non-finite increment ({w}, {z})")));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!("probability {p} outside [0, 1]")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.2).sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        let mu_w: f64 = atoms.iter().map(|&(w, _, p)| p * w).sum();
        let mu_z: f64 = atoms.iter().map(|&(_, z, p)| p * z).sum();
        let sigma2 = if mu_w > 0.0 && mu_z > 0.0 {
            let d_mean: f64 = atoms.iter().map(|&(w, z, p)| p * (w / mu_w - z / mu_z)).sum();
            atoms
                .iter()
                .map(|&(w, z, p)| p * (w / mu_w - z / mu_z - d_mean).powi(2))
                .sum()
        } else {
            f64::NAN
        };
        Ok(Self {
            atoms,
            mu_w,
            mu_z,
            sigma2,
            r_moment,
        })
    }

    /// Product law of two independent marginals given as `(value, prob)`.
    pub fn independent(w: &[(f64, f64)], z: &[(f64, f64)]) -> Result<Self> {
        let atoms = w
            .iter()
            .flat_map(|&(a, pa)| z.iter().map(move |&(b, pb)| (a, b, pa * pb)))
            .collect();
        Self::new(atoms, 3)
    }

    /// Joint law of the two information densities `(i₁(X;Y₁), i₂(X;Y₂))`
    /// with `X ~ P*` and outputs conditionally independent given `X`.
    pub fn from_broadcast_pair(pair: &BroadcastPair) -> Result<Self> {
        let p = pair.pstar();
        let d1 = density_table(p, pair.w1())?;
        let d2 = density_table(p, pair.w2())?;
        let mut atoms = Vec::new();
        for x in 0..p.len() {
            let px = p.prob(x);
            if px == 0.0 {
                continue;
            }
            for (y1, &a) in pair.w1().row(x).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (y2, &b) in pair.w2().row(x).iter().enumerate() {
                    if b > 0.0 {
                        atoms.push((d1[x][y1], d2[x][y2], px * a * b));
                    }
                }
            }
        }
        Self::new(atoms, 3)
    }

    pub fn from_file(file: WalkFile) -> Result<Self> {
        Self::new(file.atoms, file.r_moment)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let file: WalkFile =
            serde_json::from_str(&text).map_err(|e| Error::InvalidDistribution(format!("{}: {e}", path.display())))?;
        Self::from_file(file)
    }

    pub fn atoms(&self) -> &[(f64, f64, f64)] {
        &self.atoms
    }
    pub fn mu_w(&self) -> f64 {
        self.mu_w
    }
    pub fn mu_z(&self) -> f64 {
        self.mu_z
    }
    /// `Var(W/μ_W − Z/μ_Z)`; NaN if a mean is not positive.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn r_moment(&self) -> u32 {
        self.r_moment
    }

    pub fn equal_means(&self) -> bool {
        (self.mu_w - self.mu_z).abs() <= MEAN_EQUALITY_TOLERANCE * self.mu_w.abs().max(self.mu_z.abs()).max(1.0)
    }

    fn check_drift(&self) -> Result<()> {
        if self.mu_w > 0.0 && self.mu_z > 0.0 {
            Ok(())
        } else {
            Err(Error::NonpositiveDrift {
                mu_w: self.mu_w,
                mu_z: self.mu_z,
            })
        }
    }
}

/// Marginal law `(i(x;y), P(x)W(y|x))` of one information density.
pub fn density_increments(p: &InputDistribution, w: &DMChannel) -> Result<Vec<(f64, f64)>> {
    let d = density_table(p, w)?;
    let mut out = Vec::new();
    for (x, dx) in d.iter().enumerate() {
        for (y, &wy) in w.row(x).iter().enumerate() {
            let mass = p.prob(x) * wy;
            if mass > 0.0 {
                out.push((dx[y], mass));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingStats {
    pub gamma: f64,
    pub mean_max: f64,
    pub std_error: f64,
    pub mean_tau1: f64,
    pub mean_tau2: f64,
    pub trials: u64,
}

/// Simulates both walks up to a single threshold.
pub fn simulate_walk_pair(spec: &WalkSpec, gamma: f64, trials: u64, seed: u64) -> Result<StoppingStats> {
    Ok(simulate_walk_grid(spec, &[gamma], trials, seed)?.remove(0))
}

/// Simulates every threshold in `gammas` from the same sample paths: trial
/// `i` uses the same increments for every threshold, so the statistics are
/// identical to separate runs and `τ` is monotone in `γ` trialwise.
pub fn simulate_walk_grid(spec: &WalkSpec, gammas: &[f64], trials: u64, seed: u64) -> Result<Vec<StoppingStats>> {
    spec.check_drift()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    if gammas.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidParameter("thresholds must be finite".into()));
    }
    let mut order: Vec<usize> = (0..gammas.len()).collect();
    order.sort_by(|&a, &b| gammas[a].total_cmp(&gammas[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| gammas[i]).collect();
    let probs: Vec<f64> = spec.atoms.iter().map(|a| a.2).collect();
    let sampler = DiscreteSampler::new(&probs);
    let atoms = &spec.atoms;
    let g = sorted.len();

    let paths = run_trials(trials, seed, |rng| {
        let mut taus = vec![(0u64, 0u64); g];
        let (mut u, mut v) = (0.0f64, 0.0f64);
        let (mut i1, mut i2) = (0usize, 0usize);
        let mut n = 0u64;
        loop {
            while i1 < g && u >= sorted[i1] {
                taus[i1].0 = n;
                i1 += 1;
            }
            while i2 < g && v >= sorted[i2] {
                taus[i2].1 = n;
                i2 += 1;
            }
            if i1 == g && i2 == g {
                break;
            }
            let (w, z, _) = atoms[sampler.sample(rng)];
            u += w;
            v += z;
            n += 1;
        }
        taus
    });

    let mut out = vec![None; gammas.len()];
    for (slot, &orig) in order.iter().enumerate() {
        let max = SampleSummary::of(paths.iter().map(|t| t[slot].0.max(t[slot].1) as f64));
        let t1 = SampleSummary::of(paths.iter().map(|t| t[slot].0 as f64));
        let t2 = SampleSummary::of(paths.iter().map(|t| t[slot].1 as f64));
        out[orig] = Some(StoppingStats {
            gamma: sorted[slot],
            mean_max: max.mean,
            std_error: max.std_error,
            mean_tau1: t1.mean,
            mean_tau2: t2.mean,
            trials,
        });
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

/// `γ/min(μ_W, μ_Z) + (σ/√(2π))·√(γ/μ_W)·1{μ_W = μ_Z}`, without the
/// higher-order remainder.
pub fn lemma1_upper_bound(spec: &WalkSpec, gamma: f64) -> Result<f64> {
    spec.check_drift()?;
    let gamma = gamma.max(0.0);
    let mut bound = gamma / spec.mu_w.min(spec.mu_z);
    if spec.equal_means() {
        bound += (spec.sigma2 / (2.0 * std::f64::consts::PI)).sqrt() * (gamma / spec.mu_w).sqrt();
    }
    Ok(bound)
}

/// The √γ coefficient `σ/√(2π·μ_W)` predicted for equal-mean walks.
pub fn lemma1_coefficient(spec: &WalkSpec) -> Result<f64> {
    spec.check_drift()?;
    Ok((spec.sigma2 / (2.0 * std::f64::consts::PI * spec.mu_w)).sqrt())
}

/// `ψ(x) = e^{−x²/2} + x·√(π/2)·(erf(x/√2) − sgn x)`, evaluated on `|x|` so
/// that it is exactly even.
pub fn psi(x: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        return 1.0;
    }
    // erf(a/√2) − 1 = −erfc(a/√2), avoiding cancellation for large a.
    (-0.5 * a * a).exp() - a * gauss::SQRT_HALF_PI * gauss::erfc(a / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// Two-sided 95% interval for the slope.
    pub ci: (f64, f64),
    /// `σ/√(2π·μ_W)`.
    pub predicted: f64,
    pub stats: Vec<StoppingStats>,
}

/// Least-squares fit of `mean_max − γ/μ_W` against `√γ` (with intercept)
/// over the threshold grid.
pub fn coefficient_regression(spec: &WalkSpec, gammas: &[f64], trials: u64, seed: u64) -> Result<RegressionResult> {
    if gammas.len() < 3 {
        return Err(Error::InvalidParameter(
            "regression needs at least three thresholds".into(),
        ));
    }
    if gammas.iter().any(|&g| g <= 0.0) {
        return Err(Error::InvalidParameter("regression thresholds must be positive".into()));
    }
    let stats = simulate_walk_grid(spec, gammas, trials, seed)?;
    let mu = spec.mu_w.min(spec.mu_z);
    let xs: Vec<f64> = stats.iter().map(|s| s.gamma.sqrt()).collect();
    let ys: Vec<f64> = stats.iter().map(|s| s.mean_max - s.gamma / mu).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = xs.len() - 2;
    let slope_std_error = (rss / dof as f64 / sxx).sqrt();
    let half = student_t_975(dof) * slope_std_error;
    Ok(RegressionResult {
        slope,
        intercept,
        slope_std_error,
        ci: (slope - half, slope + half),
        predicted: lemma1_coefficient(spec)?,
        stats,
    })
}

fn student_t_975(dof: usize) -> f64 {
    const TABLE: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    match dof {
        0 => f64::INFINITY,
        1..=10 => TABLE[dof - 1],
        11..=30 => 2.042 + (2.228 - 2.042) * (30 - dof) as f64 / 20.0,
        _ => 1.96,
    }
}
