//! Converse, achievability and asymptotic curves over a blocklength grid.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use vlsf_core::achievability::{design_for_blocklength, AchievablePoint};
use vlsf_core::asymptotics::asymptotic_curves;
use vlsf_core::converse::{ConverseEvaluator, ConverseOptions, MaxLogM, DEFAULT_DELTA};
use vlsf_core::tail::{TailConfig, TailMode, DEFAULT_STEP};

use crate::output::{num, CsvWriter, PartialFile};
use crate::{check_epsilon, load_pair, scale_log, UsageError, DEFAULT_MAXIMIZER_TOL};

pub const CSV_HEADER: [&str; 9] = [
    "l",
    "converse_logm",
    "achiev_logm",
    "achiev_stderr",
    "asym_lower",
    "asym_upper",
    "eps",
    "seed",
    "labels",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub channel1: String,
    pub channel2: String,
    pub epsilon: f64,
    pub ls: Vec<f64>,
    pub seed: u64,
    pub trials: u64,
    pub out: PathBuf,
    /// Defaults to the CSV path with a `.gp` extension.
    pub plot: Option<PathBuf>,
    pub tail_mode: TailMode,
    pub step: f64,
    pub delta: f64,
    pub r: u32,
    pub b1: f64,
    pub bits: bool,
    pub maximizer_tol: f64,
}

impl ExperimentConfig {
    pub fn new(channel1: &str, channel2: &str, epsilon: f64, ls: Vec<f64>, out: impl Into<PathBuf>) -> Self {
        Self {
            channel1: channel1.to_string(),
            channel2: channel2.to_string(),
            epsilon,
            ls,
            seed: 1,
            trials: 10_000,
            out: out.into(),
            plot: None,
            tail_mode: TailMode::Exact,
            step: DEFAULT_STEP,
            delta: DEFAULT_DELTA,
            r: 3,
            b1: 1.0,
            bits: false,
            maximizer_tol: DEFAULT_MAXIMIZER_TOL,
        }
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        check_epsilon(self.epsilon)?;
        if self.ls.is_empty() {
            return Err(UsageError("l grid: the list is empty".into()));
        }
        if self.ls.iter().any(|&l| !(l > 0.0 && l.is_finite())) || self.ls.windows(2).any(|w| w[1] <= w[0]) {
            return Err(UsageError(
                "l grid: values must be positive and strictly increasing".into(),
            ));
        }
        if self.trials == 0 {
            return Err(UsageError("trials must be positive".into()));
        }
        Ok(())
    }

    pub fn plot_path(&self) -> PathBuf {
        self.plot.clone().unwrap_or_else(|| self.out.with_extension("gp"))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRow {
    pub l: f64,
    pub converse: MaxLogM,
    pub achievability: AchievablePoint,
    pub asym_lower: f64,
    pub asym_upper: f64,
}

impl ExperimentRow {
    fn labels(&self) -> String {
        let converse = if !self.converse.certified {
            "approximate"
        } else if self.converse.verified {
            "certified"
        } else {
            "unverified"
        };
        format!("converse={converse};achiev=montecarlo;asym=approximate")
    }
}

/// Runs the experiment, writing the CSV and the plot script. On failure no
/// partial CSV is left behind.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let pair = load_pair(&cfg.channel1, &cfg.channel2, cfg.maximizer_tol)?;
    let tail = TailConfig::with_step(cfg.step);
    let opts = ConverseOptions {
        delta: cfg.delta,
        tail_mode: cfg.tail_mode,
        tail,
        ..ConverseOptions::new(cfg.epsilon)
    };
    let curves = asymptotic_curves(&pair, cfg.epsilon, &cfg.ls)?;
    if let Some(w) = &curves.warning {
        eprintln!("warning: {w}");
    }
    let mut evaluator = ConverseEvaluator::new(&pair, tail)?;

    let file = PartialFile::create(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut csv = CsvWriter::new(file, &CSV_HEADER)?;
    let mut rows = Vec::with_capacity(cfg.ls.len());
    for (i, &l) in cfg.ls.iter().enumerate() {
        let converse = evaluator
            .max_logm(l, &opts)
            .with_context(|| format!("converse bound at l = {l}"))?;
        let achievability = design_for_blocklength(&pair, l, cfg.epsilon, cfg.r, cfg.b1, cfg.trials, cfg.seed)
            .with_context(|| format!("achievability design at l = {l}"))?;
        let row = ExperimentRow {
            l,
            converse,
            achievability,
            asym_lower: curves.lower.points[i].log_m,
            asym_upper: curves.upper.points[i].log_m,
        };
        csv.row(&[
            num(l),
            num(scale_log(row.converse.log_m, cfg.bits)),
            num(scale_log(row.achievability.point.log_m, cfg.bits)),
            num(row.achievability.blocklength_std_error),
            num(scale_log(row.asym_lower, cfg.bits)),
            num(scale_log(row.asym_upper, cfg.bits)),
            num(cfg.epsilon),
            cfg.seed.to_string(),
            row.labels(),
        ])?;
        rows.push(row);
    }
    let file = csv.into_inner()?;
    let plot_path = cfg.plot_path();
    std::fs::write(&plot_path, plot_script(&cfg.out, cfg.bits))
        .with_context(|| format!("writing {}", plot_path.display()))?;
    file.commit()?;
    Ok(rows)
}

/// A gnuplot script that plots the experiment CSV.
pub fn plot_script(csv: &Path, bits: bool) -> String {
    let unit = if bits { "bits" } else { "nats" };
    let name = csv.display();
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key left top");
    let _ = writeln!(s, "set xlabel 'average blocklength'");
    let _ = writeln!(s, "set ylabel 'log M ({unit})'");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(
        s,
        "plot '{name}' using 1:2 skip 1 with linespoints title 'converse', \\\n     \
         '{name}' using 1:3:4 skip 1 with xerrorbars title 'achievability', \\\n     \
         '{name}' using 1:5 skip 1 with lines dashtype 2 title 'asymptotic lower', \\\n     \
         '{name}' using 1:6 skip 1 with lines dashtype 3 title 'asymptotic upper'"
    );
    s
}
