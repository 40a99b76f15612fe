use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use vlsf_cli::experiment::{run_experiment, ExperimentConfig};
use vlsf_cli::output::{num, CsvWriter};
use vlsf_cli::{
    check_epsilon, load_channel, load_pair, parse_grid, parse_list, scale_log, UsageError, DEFAULT_MAXIMIZER_TOL,
};
use vlsf_core::achievability::{
    design_achievable_point, design_for_blocklength, remark2_error_bound, simulate_stopping, DesignParams, SimConfig,
};
use vlsf_core::asymptotics::{asymptotic_curves, critical_epsilon_symmetric};
use vlsf_core::channel::{blahut_arimoto, channel_statistics};
use vlsf_core::converse::{ConverseEvaluator, ConverseOptions, DEFAULT_DELTA};
use vlsf_core::randwalk::{density_increments, lemma1_upper_bound, simulate_walk_grid, WalkSpec};
use vlsf_core::tail::{TailConfig, TailMode, DEFAULT_STEP};

/// Finite-length bounds and simulations for variable-length stop-feedback
/// codes over two-receiver broadcast channels with a common message.
#[derive(Debug, Parser)]
#[command(name = "vlsf", version)]
struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true, env = "VLSF_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect channel definitions.
    #[command(subcommand)]
    Channel(ChannelCommand),
    /// Nonasymptotic bounds on log M.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Second-order asymptotic expansion.
    #[command(subcommand)]
    Asymptotics(AsymptoticsCommand),
    /// Monte Carlo simulation of the threshold-decoding scheme.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Two-walk maximum stopping time experiments.
    #[command(subcommand)]
    Randwalk(RandwalkCommand),
    /// Full experiments writing a CSV and a gnuplot script.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Subcommand)]
enum ChannelCommand {
    /// Check that channel definitions parse and are stochastic.
    Validate {
        /// Channel shorthand (bsc:p, bec:e, zchan:p) or JSON file.
        #[arg(required = true)]
        channels: Vec<String>,
    },
    /// Capacity, dispersion and related quantities.
    Info {
        /// Channel shorthand or JSON file.
        #[arg(long)]
        channel1: String,
        /// When given, also report the joint broadcast quantities.
        #[arg(long)]
        channel2: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MAXIMIZER_TOL)]
        maximizer_tol: f64,
    },
}

#[derive(Debug, Args)]
struct PairArgs {
    /// First receiver's channel (shorthand or JSON file).
    #[arg(long)]
    channel1: String,
    /// Second receiver's channel (shorthand or JSON file).
    #[arg(long)]
    channel2: String,
    /// Tolerance on the distance between the two capacity-achieving inputs.
    #[arg(long, default_value_t = DEFAULT_MAXIMIZER_TOL)]
    maximizer_tol: f64,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn open(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }
}

#[derive(Debug, Args)]
struct TailArgs {
    /// Exact enumeration of the tails (certified).
    #[arg(long, conflicts_with = "clt")]
    exact: bool,
    /// Normal approximation of the tails (fast, not certified).
    #[arg(long)]
    clt: bool,
    /// Grid step in nats for the exact tails.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// Slack in the converse threshold, in nats.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
}

impl TailArgs {
    fn mode(&self) -> TailMode {
        if self.clt {
            TailMode::Clt
        } else {
            TailMode::Exact
        }
    }

    fn options(&self, eps: f64) -> ConverseOptions {
        ConverseOptions {
            delta: self.delta,
            tail_mode: self.mode(),
            tail: TailConfig::with_step(self.step),
            ..ConverseOptions::new(eps)
        }
    }
}

#[derive(Debug, Subcommand)]
enum BoundsCommand {
    /// Upper bound on log M at each average blocklength.
    Converse {
        #[command(flatten)]
        pair: PairArgs,
        /// Target error probability in (0, 1).
        #[arg(long)]
        eps: f64,
        /// Comma-separated average blocklengths.
        #[arg(long)]
        l: String,
        #[command(flatten)]
        tail: TailArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Achievable point from the threshold design.
    Achiev {
        #[command(flatten)]
        pair: PairArgs,
        /// Target error probability in (0, 1).
        #[arg(long)]
        eps: f64,
        /// Design blocklength l'.
        #[arg(long, required_unless_present = "l", conflicts_with = "l")]
        lprime: Option<f64>,
        /// Target average blocklength; l' is searched to meet it.
        #[arg(long)]
        l: Option<f64>,
        /// Coefficient of the remainder term in the threshold recipe.
        #[arg(long, default_value_t = 1.0)]
        b1: f64,
        /// Moment order used in the remainder exponent.
        #[arg(long, default_value_t = 3)]
        r: u32,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Subcommand)]
enum AsymptoticsCommand {
    /// Lower and upper second-order curves on a grid of blocklengths.
    Curve {
        #[command(flatten)]
        pair: PairArgs,
        /// Target error probability in (0, 1).
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        lmin: f64,
        #[arg(long)]
        lmax: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Report log M in bits.
        #[arg(long)]
        bits: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Error probability at which the symmetric square-root term changes sign.
    CriticalEps,
}

#[derive(Debug, Subcommand)]
enum SimulateCommand {
    /// Simulate the stopping times for given thresholds.
    Vlsf {
        #[command(flatten)]
        pair: PairArgs,
        /// Threshold in nats (both decoders unless --gamma2 is given).
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        gamma2: Option<f64>,
        /// Probability of stopping both decoders at time zero.
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        max_steps: Option<u64>,
        /// Code size (nats) used for the error-bound column.
        #[arg(long)]
        log_m: Option<f64>,
        /// Also estimate the pairwise error with an independent codeword.
        #[arg(long)]
        impostor: bool,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Subcommand)]
enum RandwalkCommand {
    /// Mean of the larger crossing time against the two-walk expansion.
    Verify {
        /// JSON file with {"atoms": [[w, z, p], ...], "r_moment": r}.
        #[arg(long, required_unless_present = "channel", conflicts_with = "channel")]
        spec: Option<PathBuf>,
        /// Build two independent walks from this channel's information density.
        #[arg(long)]
        channel: Option<String>,
        /// Comma-separated thresholds.
        #[arg(long)]
        gammas: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Converse, achievability and asymptotic curves over an l grid.
    Run {
        #[command(flatten)]
        pair: PairArgs,
        /// Target error probability in (0, 1).
        #[arg(long)]
        eps: f64,
        /// Comma-separated, strictly increasing average blocklengths.
        #[arg(long)]
        l: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Coefficient of the remainder term in the threshold recipe.
        #[arg(long, default_value_t = 1.0)]
        b1: f64,
        #[arg(long, default_value_t = 3)]
        r: u32,
        #[command(flatten)]
        tail: TailArgs,
        /// Report log M in bits.
        #[arg(long)]
        bits: bool,
        /// CSV output path.
        #[arg(long, short)]
        out: PathBuf,
        /// Gnuplot script path; defaults to the CSV path with extension .gp.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Channel(c) => channel(c),
        Command::Bounds(c) => bounds(c),
        Command::Asymptotics(c) => asymptotics(c),
        Command::Simulate(c) => simulate(c),
        Command::Randwalk(c) => randwalk(c),
        Command::Experiment(c) => experiment(c),
    }
}

fn channel(cmd: ChannelCommand) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    match cmd {
        ChannelCommand::Validate { channels } => {
            for spec in &channels {
                let w = load_channel(spec)?;
                writeln!(
                    out,
                    "{spec}: ok ({} inputs, {} outputs)",
                    w.input_size(),
                    w.output_size()
                )?;
            }
        }
        ChannelCommand::Info {
            channel1,
            channel2,
            maximizer_tol,
        } => {
            let specs: Vec<&String> = std::iter::once(&channel1).chain(channel2.as_ref()).collect();
            for spec in &specs {
                let w = load_channel(spec)?;
                let cap = blahut_arimoto(&w)?;
                let stats = channel_statistics(&cap.input, &w)?;
                writeln!(out, "channel {spec}")?;
                writeln!(out, "  input distribution: {:?}", cap.input.probs())?;
                writeln!(
                    out,
                    "  capacity: {} nats ({} bits)",
                    stats.mutual_information,
                    scale_log(stats.mutual_information, true)
                )?;
                writeln!(out, "  dispersion: {}", stats.info_variance)?;
                writeln!(out, "  third absolute moment: {}", stats.third_abs_moment)?;
            }
            if let Some(c2) = &channel2 {
                let pair = load_pair(&channel1, c2, maximizer_tol)?;
                writeln!(out, "pair")?;
                writeln!(out, "  common capacity: {} nats", pair.capacity())?;
                writeln!(out, "  geometric dispersion: {}", pair.v_geo())?;
                writeln!(out, "  rho1: {}  rho2: {}", pair.rho1(), pair.rho2())?;
                writeln!(out, "  maximizer gap: {:e}", pair.common_maximizer_gap())?;
            }
        }
    }
    Ok(())
}

fn bounds(cmd: BoundsCommand) -> anyhow::Result<()> {
    match cmd {
        BoundsCommand::Converse {
            pair,
            eps,
            l,
            tail,
            out,
        } => {
            let eps = check_epsilon(eps)?;
            let ls = parse_grid(&l)?;
            let bp = load_pair(&pair.channel1, &pair.channel2, pair.maximizer_tol)?;
            let opts = tail.options(eps);
            let mut evaluator = ConverseEvaluator::new(&bp, opts.tail)?;
            let mut csv = CsvWriter::new(out.open()?, &["l", "log_m_nats", "log_m_bits", "mode", "certified"])?;
            let mode = match tail.mode() {
                TailMode::Exact => "exact",
                TailMode::Clt => "clt",
            };
            for l in ls {
                let r = evaluator.max_logm(l, &opts)?;
                if r.log_m.is_infinite() {
                    eprintln!("warning: approximate tails saturate at l = {l}; no finite bound");
                } else if !r.verified {
                    eprintln!("warning: monotonicity check failed at l = {l}");
                }
                let p = r.point(l);
                csv.row(&[
                    num(l),
                    num(p.log_m),
                    num(p.log_m_bits()),
                    mode.to_string(),
                    (p.certified && r.verified).to_string(),
                ])?;
            }
            csv.into_inner()?;
        }
        BoundsCommand::Achiev {
            pair,
            eps,
            lprime,
            l,
            b1,
            r,
            trials,
            seed,
            out,
        } => {
            let eps = check_epsilon(eps)?;
            let bp = load_pair(&pair.channel1, &pair.channel2, pair.maximizer_tol)?;
            let point = match (lprime, l) {
                (Some(lp), _) => design_achievable_point(
                    &bp,
                    DesignParams {
                        l_prime: lp,
                        epsilon: eps,
                        r,
                        b1,
                    },
                    trials,
                    seed,
                )?,
                (None, Some(l)) => design_for_blocklength(&bp, l, eps, r, b1, trials, seed)?,
                (None, None) => bail!(UsageError("either --lprime or --l is required".into())),
            };
            if !point.meets_l_prime {
                eprintln!(
                    "warning: simulated E[max tau] = {} exceeds l' = {}",
                    point.estimate.mean_max_tau, point.recipe.params.l_prime
                );
            }
            let mut csv = CsvWriter::new(out.open()?, &SIM_HEADER)?;
            csv.row(&[
                num(point.point.avg_blocklength),
                num(point.recipe.log_m),
                num(point.recipe.eps_bound),
                num(point.estimate.mean_max_tau),
                num(point.estimate.std_error),
                seed.to_string(),
            ])?;
            csv.into_inner()?;
        }
    }
    Ok(())
}

const SIM_HEADER: [&str; 6] = ["l", "log_m_nats", "eps_bound", "mean_max_tau", "stderr", "seed"];

fn asymptotics(cmd: AsymptoticsCommand) -> anyhow::Result<()> {
    match cmd {
        AsymptoticsCommand::CriticalEps => {
            println!("{}", critical_epsilon_symmetric()?);
        }
        AsymptoticsCommand::Curve {
            pair,
            eps,
            lmin,
            lmax,
            points,
            bits,
            out,
        } => {
            let eps = check_epsilon(eps)?;
            if !(lmin > 0.0 && lmax > lmin) || points < 2 {
                bail!(UsageError("need 0 < lmin < lmax and at least two points".into()));
            }
            let bp = load_pair(&pair.channel1, &pair.channel2, pair.maximizer_tol)?;
            let ls: Vec<f64> = (0..points)
                .map(|i| lmin + (lmax - lmin) * i as f64 / (points - 1) as f64)
                .collect();
            let curves = asymptotic_curves(&bp, eps, &ls)?;
            if let Some(w) = &curves.warning {
                eprintln!("warning: {w}");
            }
            let mut csv = CsvWriter::new(out.open()?, &["l", "lower_logm", "upper_logm"])?;
            for (lo, up) in curves.lower.points.iter().zip(&curves.upper.points) {
                csv.row(&[
                    num(lo.avg_blocklength),
                    num(scale_log(lo.log_m, bits)),
                    num(scale_log(up.log_m, bits)),
                ])?;
            }
            csv.into_inner()?;
        }
    }
    Ok(())
}

fn simulate(cmd: SimulateCommand) -> anyhow::Result<()> {
    let SimulateCommand::Vlsf {
        pair,
        gamma,
        gamma2,
        q,
        trials,
        seed,
        max_steps,
        log_m,
        impostor,
        out,
    } = cmd;
    if !(0.0..=1.0).contains(&q) {
        bail!(UsageError(format!("q = {q} must lie in [0, 1]")));
    }
    let bp = load_pair(&pair.channel1, &pair.channel2, pair.maximizer_tol)?;
    let cfg = SimConfig {
        gamma1: gamma,
        gamma2: gamma2.unwrap_or(gamma),
        q,
        trials,
        seed,
        max_steps,
        impostor,
    };
    let est = simulate_stopping(&bp, &cfg)?;
    if let Some(pe) = &est.pairwise_error {
        for (k, s) in pe.iter().enumerate() {
            eprintln!("pairwise error, decoder {}: {} (stderr {})", k + 1, s.mean, s.std_error);
        }
    }
    let (log_m_field, bound_field) = match log_m {
        Some(m) => (num(m), num(remark2_error_bound(m, cfg.gamma1.min(cfg.gamma2), q))),
        None => (String::new(), String::new()),
    };
    let mut csv = CsvWriter::new(out.open()?, &SIM_HEADER)?;
    csv.row(&[
        num(est.avg_blocklength(q)),
        log_m_field,
        bound_field,
        num(est.mean_max_tau),
        num(est.std_error),
        seed.to_string(),
    ])?;
    csv.into_inner()?;
    Ok(())
}

fn randwalk(cmd: RandwalkCommand) -> anyhow::Result<()> {
    let RandwalkCommand::Verify {
        spec,
        channel,
        gammas,
        trials,
        seed,
        out,
    } = cmd;
    let gammas = parse_list(&gammas, "gammas")?;
    let walk = match (spec, channel) {
        (Some(path), _) => WalkSpec::load(&path)?,
        (None, Some(c)) => {
            let w = load_channel(&c)?;
            let cap = blahut_arimoto(&w)?;
            let inc = density_increments(&cap.input, &w)?;
            WalkSpec::independent(&inc, &inc)?
        }
        (None, None) => bail!(UsageError("either --spec or --channel is required".into())),
    };
    let stats = simulate_walk_grid(&walk, &gammas, trials, seed)?;
    let mut csv = CsvWriter::new(out.open()?, &["gamma", "mean_max", "stderr", "bound"])?;
    for s in &stats {
        csv.row(&[
            num(s.gamma),
            num(s.mean_max),
            num(s.std_error),
            num(lemma1_upper_bound(&walk, s.gamma)?),
        ])?;
    }
    csv.into_inner()?;
    Ok(())
}

fn experiment(cmd: ExperimentCommand) -> anyhow::Result<()> {
    let ExperimentCommand::Run {
        pair,
        eps,
        l,
        trials,
        seed,
        b1,
        r,
        tail,
        bits,
        out,
        plot,
    } = cmd;
    let cfg = ExperimentConfig {
        epsilon: check_epsilon(eps)?,
        seed,
        trials,
        plot,
        tail_mode: tail.mode(),
        step: tail.step,
        delta: tail.delta,
        r,
        b1,
        bits,
        maximizer_tol: pair.maximizer_tol,
        ..ExperimentConfig::new(&pair.channel1, &pair.channel2, eps, parse_grid(&l)?, out)
    };
    let rows = run_experiment(&cfg)?;
    eprintln!("wrote {} rows to {}", rows.len(), cfg.out.display());
    Ok(())
}
