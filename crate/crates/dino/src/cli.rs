//! Command-line front end.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dino_core::datagen::{GenConfig, ProblemConfig};
use dino_core::linalg::{DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
use dino_core::metrics::{self, EvalConfig, Metric};
use dino_core::models::{RdConfig, ToyConfig};
use dino_core::netop::Activation;
use dino_core::training::{AdamConfig, LossConfig, LossVariant, MsMode, MsRedraw, TrainConfig};

use crate::exec::{self, with_threads};
use crate::io;
use crate::pipeline::{self, Arch, ArchConfig, BasesMethod, RunDir, TrainRequest};

#[derive(Debug, Parser)]
#[command(name = "dino", version, about = "Derivative-informed neural operators: generate, bases, train, eval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample (m, q(m), truncated SVD of ∇q(m)) training tuples.
    Generate(GenerateArgs),
    /// Compute reduced input/output bases from a dataset.
    Bases(BasesArgs),
    /// Train a neural operator.
    Train(TrainArgs),
    /// Evaluate a trained operator on a held-out dataset.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    /// Nonlinear reaction–diffusion on the unit square.
    Rd,
    /// Closed-form map q = B tanh(C m).
    Toy,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "rd")]
    pub problem: ProblemKind,
    /// Grid points per side (rd).
    #[arg(long, default_value_t = 17, value_parser = clap::value_parser!(u64).range(3..))]
    pub grid: u64,
    /// Coefficient of the cubic reaction term (rd).
    #[arg(long, default_value_t = 1.0)]
    pub c_nl: f64,
    #[arg(long, default_value_t = 1.0)]
    pub prior_delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub prior_gamma: f64,
    /// Parameter dimension (toy).
    #[arg(long, default_value_t = 40)]
    pub toy_dm: usize,
    /// Observable dimension (toy).
    #[arg(long, default_value_t = 8)]
    pub toy_dq: usize,
    /// Inner width (toy).
    #[arg(long, default_value_t = 6)]
    pub toy_p: usize,
    /// Seed of the toy map's factors.
    #[arg(long, default_value_t = 0)]
    pub toy_seed: u64,
    /// Number of samples.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Stored Jacobian rank; defaults to d_Q.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub rank: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_OVERSAMPLE)]
    pub oversample: usize,
    #[arg(long, default_value_t = DEFAULT_POWER_ITERS)]
    pub power_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; output does not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BasesArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "derivative")]
    pub method: BasesMethod,
    #[arg(long, default_value_t = 50)]
    pub input_rank: usize,
    #[arg(long, default_value_t = 25)]
    pub output_rank: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    L2,
    H1full,
    H1trunc,
    H1truncms,
}

impl From<LossKind> for LossVariant {
    fn from(k: LossKind) -> Self {
        match k {
            LossKind::L2 => LossVariant::L2,
            LossKind::H1full => LossVariant::H1Full,
            LossKind::H1trunc => LossVariant::H1Truncated,
            LossKind::H1truncms => LossVariant::H1TruncatedMs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ActivationKind {
    Softplus,
    Tanh,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Optional held-out dataset for per-epoch validation loss.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Bases directory (required for dipnet).
    #[arg(long)]
    pub bases: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dipnet")]
    pub arch: Arch,
    #[arg(long, value_enum, default_value = "l2")]
    pub loss: LossKind,
    /// Weight of the Jacobian term.
    #[arg(long, default_value_t = 1.0)]
    pub h1_weight: f64,
    /// Subsample size for h1truncms.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Draw separate row and column index sets.
    #[arg(long)]
    pub ms_independent: bool,
    /// Rescale the subsampled penalty to be unbiased.
    #[arg(long)]
    pub ms_rescale: bool,
    /// Redraw subsample indices once per epoch instead of per batch.
    #[arg(long)]
    pub ms_per_epoch: bool,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 6)]
    pub hidden_layers: usize,
    #[arg(long, default_value_t = 50)]
    pub width: usize,
    #[arg(long, value_enum, default_value = "softplus")]
    pub activation: ActivationKind,
    /// Seed for shuffling and subsampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed for weight initialization; defaults to --seed.
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Checkpoint cadence in epochs (0: final epoch only).
    #[arg(long, default_value_t = 10)]
    pub checkpoint_every: usize,
    /// Continue from the newest checkpoint in --out.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Held-out dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated subset of l2,h1,grad,gn,rgn.
    #[arg(long, default_value = "l2,h1,grad,gn,rgn")]
    pub metrics: String,
    #[arg(long, default_value_t = 0.01)]
    pub noise_pct: f64,
    #[arg(long, default_value_t = 4)]
    pub n_misfit: usize,
    /// Seed of the noise draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report directory; defaults to <run>/eval.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn problem_config(args: &GenerateArgs) -> ProblemConfig {
    match args.problem {
        ProblemKind::Rd => ProblemConfig::ReactionDiffusion {
            rd: RdConfig { grid_n: args.grid as usize, c_nl: args.c_nl, ..RdConfig::default() },
            prior_delta: args.prior_delta,
            prior_gamma: args.prior_gamma,
        },
        ProblemKind::Toy => {
            ProblemConfig::Toy(ToyConfig { d_m: args.toy_dm, d_q: args.toy_dq, p: args.toy_p, seed: args.toy_seed })
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let cfg = problem_config(args);
    let gen = GenConfig {
        n_samples: args.n,
        rank: args.rank.map(|r| r as usize),
        oversample: args.oversample,
        power_iters: args.power_iters,
        seed: args.seed,
    };
    let (ds, stats) = with_threads(args.threads, || exec::generate_dataset(&cfg, &gen))??;
    io::save_dataset(&args.out, &ds)?;
    eprintln!(
        "wrote {} samples (d_M = {}, d_Q = {}, r = {}) to {}: {} Newton iterations, {} linearized solves",
        ds.len(),
        ds.d_m(),
        ds.d_q(),
        ds.rank(),
        args.out.display(),
        stats.newton_iterations,
        stats.linearized_solves
    );
    Ok(())
}

fn bases(args: &BasesArgs) -> anyhow::Result<()> {
    let ds = io::load_dataset(&args.data)?;
    let (pair, ev_in, ev_out) = pipeline::compute_bases(&ds, args.method, args.input_rank, args.output_rank)?;
    io::save_bases(&args.out, &pair, (&ev_in, &ev_out), Some(display(&args.data)))?;
    eprintln!("wrote {}x{} input and {}x{} output bases to {}", ds.d_m(), args.input_rank, ds.d_q(), args.output_rank, args.out.display());
    Ok(())
}

fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let data = io::load_dataset(&args.data)?;
    let test = args.test_data.as_deref().map(io::load_dataset).transpose()?;
    let bases = match (&args.bases, args.arch) {
        (Some(dir), Arch::Dipnet) => Some(io::load_bases(dir)?.0),
        (None, Arch::Dipnet) => bail!("--arch dipnet needs --bases <dir> (see `dino bases`)"),
        (_, Arch::Generic) => None,
    };
    let arch = ArchConfig {
        arch: args.arch,
        hidden_layers: args.hidden_layers,
        width: args.width,
        activation: match args.activation {
            ActivationKind::Softplus => Activation::Softplus,
            ActivationKind::Tanh => Activation::Tanh,
        },
        init_seed: args.init_seed.unwrap_or(args.seed),
    };
    let loss = LossConfig {
        variant: args.loss.into(),
        h1_weight: args.h1_weight,
        k: args.k,
        ms_mode: if args.ms_independent { MsMode::Independent } else { MsMode::Dependent },
        ms_rescale: args.ms_rescale,
        ms_redraw: if args.ms_per_epoch { MsRedraw::PerEpoch } else { MsRedraw::PerBatch },
    };
    loss.validate(loss.needs_jacobians().then_some(data.rank()))
        .with_context(|| format!("--loss {:?} on data with stored rank {}", args.loss, data.rank()))?;
    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        loss,
        adam: AdamConfig { lr: args.lr, ..AdamConfig::default() },
    };
    let model = pipeline::build_model(&arch, data.d_m(), data.d_q(), bases)?;
    let manifest = io::RunManifest {
        format: io::run::FORMAT.into(),
        version: io::run::VERSION,
        arch: args.arch,
        spec: model.spec.clone(),
        init_seed: arch.init_seed,
        train: config,
        data: display(&args.data),
        test_data: args.test_data.as_deref().map(display),
        bases: args.bases.as_deref().map(display),
        checkpoint_every: args.checkpoint_every,
        weights: None,
    };
    let run = RunDir { path: args.out.clone(), manifest, checkpoint_every: args.checkpoint_every, resume: args.resume };
    let request = TrainRequest { model, data: &data, test: test.as_ref(), config, verbose: !args.quiet };
    let (_, history) = with_threads(args.threads, || pipeline::train(request, Some(run)))??;
    if let Some(last) = history.last() {
        eprintln!("finished {} epochs, final train loss {:.6e}", history.len(), last.train_loss);
    }
    Ok(())
}

pub fn parse_metrics(list: &str) -> anyhow::Result<Vec<Metric>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m = Metric::parse(name)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        bail!("--metrics selects nothing");
    }
    Ok(out)
}

fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let (model, _) = io::load_model(&args.run)?;
    let ds = io::load_dataset(&args.data)?;
    let cfg = EvalConfig { metrics: parse_metrics(&args.metrics)?, noise_pct: args.noise_pct, n_misfit: args.n_misfit, seed: args.seed };
    let report = metrics::evaluate(&model, &ds, &cfg)?;
    let out = args.out.clone().unwrap_or_else(|| args.run.join("eval"));
    let doc = io::save_report(&out, &display(&args.run), &display(&args.data), &report)?;
    for m in &doc.metrics {
        println!("{:<5} {:.6}", m.metric.name(), m.accuracy);
    }
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Bases(a) => bases(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
    }
}
