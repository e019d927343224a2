use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cogmask::dataset::{DatasetKind, ProbeResponseDataset};
use cogmask::detect::{run_detector, Decision, DetectorConfig, NoiseModel};
use cogmask::harness::{irl_report, run_config_file};
use cogmask::margins::{margin_constraint, margin_utility};
use cogmask::mask::{mask_eta_sweep, MaskingProblem};
use cogmask::scenarios::{generate_experiment, Scenario};
use cogmask::{Error, Strategy};

#[derive(Parser)]
#[command(name = "cogmask", version, about = "Revealed-preference IRL detectors and cognition masking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run { config: PathBuf },
    /// Feasibility verdict, relaxation statistic, margin and reconstruction summary.
    Irl {
        dataset: PathBuf,
        /// Strategy whose margin to report: sqrt, quadratic or knorm:<order>.
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Mask a dataset's responses at extent eta.
    Mask {
        dataset: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        seed: u64,
        /// Defaults to sqrt (constraint-known) or knorm:2 (utility-known).
        #[arg(long)]
        strategy: Option<String>,
        /// Write the masked dataset here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the noisy detector on a dataset of measured responses.
    Detect {
        dataset: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Generate a scenario dataset of naive responses.
    Generate {
        /// waveform-u1, waveform-u2 or beam.
        #[arg(long)]
        scenario: String,
        #[arg(long, short = 'k', default_value_t = 20)]
        horizon: usize,
        #[arg(long, short = 'm', default_value_t = 4)]
        dim: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_strategy(name: &str) -> cogmask::Result<Strategy> {
    match name {
        "sqrt" => Ok(Strategy::sqrt_sum()),
        "quadratic" => Ok(Strategy::quadratic_sum()),
        _ => match name.strip_prefix("knorm:") {
            Some(k) => Strategy::k_norm(k.parse().map_err(|_| Error::InvalidArgument(format!("bad norm order `{k}`")))?),
            None => Err(Error::InvalidArgument(format!("unknown strategy `{name}`"))),
        },
    }
}

fn default_strategy(d: &ProbeResponseDataset, name: Option<&str>) -> cogmask::Result<Strategy> {
    match (name, d.kind()) {
        (Some(n), _) => parse_strategy(n),
        (None, DatasetKind::ConstraintKnown) => Ok(Strategy::sqrt_sum()),
        (None, DatasetKind::UtilityKnown) => Strategy::k_norm(2.0),
    }
}

fn execute(cmd: Command) -> cogmask::Result<bool> {
    match cmd {
        Command::Run { config } => {
            let art = run_config_file(&config)?;
            for a in &art.summary.assertions {
                println!("{} {}  {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            for f in &art.summary.failures {
                println!("ERROR {}: {}", f.cell, f.error);
            }
            println!("artifacts in {}", art.dir.display());
            Ok(art.summary.passed)
        }
        Command::Irl { dataset, strategy } => {
            let d = ProbeResponseDataset::load(&dataset)?;
            let r = irl_report(&d)?;
            println!("kind: {}  K={}  m={}", d.kind().as_str(), d.horizon(), d.dim());
            println!("verdict: {}", if r.feasible { "rationalizable" } else { "not rationalizable" });
            println!("stat_phi: {:e}", r.stat_phi);
            if let Some(theta) = &r.theta {
                let k = d.horizon();
                println!("lp residual: {:e}", r.residual);
                println!("reconstruction passes relative optimality: {}", r.reconstruction_ok);
                for t in 0..k {
                    println!("  t={t:<3} value={:.6e} multiplier={:.6e}", theta[t], theta[k + t]);
                }
            }
            if let Some(name) = strategy {
                let s = parse_strategy(&name)?;
                let m = match d.kind() {
                    DatasetKind::ConstraintKnown => margin_utility(&s, &d)?,
                    DatasetKind::UtilityKnown => margin_constraint(&s, &d)?,
                };
                println!("margin of {name}: {:e} (binding pair {:?})", m.margin, m.binding_pair);
            }
            Ok(true)
        }
        Command::Mask { dataset, eta, seed, strategy, out } => {
            let d = ProbeResponseDataset::load(&dataset)?;
            let s = default_strategy(&d, strategy.as_deref())?;
            let mut p = MaskingProblem::from_dataset(s, &d, eta);
            p.solver.seed = seed;
            let r = mask_eta_sweep(&p, &[eta]).pop().expect("one grid point")?;
            println!("eta: {eta}  cap: {:e}", r.cap);
            println!("margin before: {:e}  after: {:e}", r.margin_before, r.margin_after);
            println!("loss: {:e}", r.loss);
            if let Some(out) = out {
                r.masked_dataset(&p)?.save(&out)?;
                println!("masked dataset written to {}", out.display());
            }
            Ok(true)
        }
        Command::Detect { dataset, gamma, sigma2, seed, samples } => {
            let d = ProbeResponseDataset::load(&dataset)?;
            let noise = NoiseModel::gaussian(sigma2, d.dim())?;
            let cfg = DetectorConfig { significance: gamma, quantile_samples: samples, seed, ..Default::default() };
            let o = run_detector(&d, &noise, &cfg)?;
            println!("statistic: {:e}  threshold: {:e}", o.statistic, o.threshold);
            println!("decision: {}", if o.decision == Decision::Cognitive { "cognitive" } else { "not cognitive" });
            Ok(true)
        }
        Command::Generate { scenario, horizon, dim, seed, out } => {
            let ex = generate_experiment(Scenario::parse(&scenario)?, horizon, dim, seed)?;
            ex.dataset.save(&out)?;
            println!("{} dataset (K={horizon}, m={dim}) written to {}", scenario, out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::InvalidArgument(_) | Error::InvalidDataset(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
