//! Experiment runner: sweeps, Monte-Carlo validations and their artifacts
//! (CSV tables, SVG charts, `summary.json`).

mod config;
mod plot;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

pub use config::{load_config, validate_config, ExperimentConfig, ExperimentKind};
pub use plot::{Chart, Series};

use crate::dataset::{DatasetKind, ProbeResponseDataset};
use crate::detect::{estimate_type1, stat_phi, substream, Decision, DetectorConfig, NoiseModel};
use crate::error::{Error, Result};
use crate::mask::{mask_eta_sweep, MaskingProblem, MaskingReport};
use crate::rp::{check_constraint_rationalizable, check_utility_rationalizable, reconstruct_strategy, relative_optimality_check};
use crate::scenarios::{generate_experiment, misspec_bound, MisspecModel, MisspecOutcome, Scenario};
use crate::spsa::{spsa_lambda_sweep, SpsaConfig, SweepCell};

/// Slack on the η-sweep assertions.
pub const SWEEP_TOL: f64 = 1e-6;
/// Slack on the misspecification bound.
pub const MISSPEC_TOL: f64 = 1e-8;
/// Loss allowed for the λ = 0 SPSA control.
pub const CONTROL_LOSS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub failures: Vec<CellFailure>,
    pub metrics: BTreeMap<String, f64>,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct ArtifactSet {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Summary,
}

struct Run {
    dir: PathBuf,
    files: Vec<PathBuf>,
    assertions: Vec<Assertion>,
    failures: Vec<CellFailure>,
    metrics: BTreeMap<String, f64>,
}

impl Run {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, contents)?;
        self.files.push(p);
        Ok(())
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { name: name.into(), passed, detail: detail.into() });
    }

    fn fail(&mut self, cell: impl Into<String>, e: &Error) {
        self.failures.push(CellFailure { cell: cell.into(), error: e.to_string() });
    }
}

/// Maps `f` over `items` on a bounded pool of scoped threads; output order
/// follows input order, so results do not depend on scheduling.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let n = items.len();
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n).max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("filled")).collect()
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() { f64::NAN } else { crate::numeric::median(v) }
}

fn nondecreasing(v: &[f64], tol: f64) -> bool {
    v.windows(2).all(|w| w[1] >= w[0] - tol)
}

/// Runs one configured experiment and writes its artifacts to `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ArtifactSet> {
    let diagnostics = validate_config(config);
    if !diagnostics.is_empty() {
        return Err(Error::Config(diagnostics.join("; ")));
    }
    fs::create_dir_all(&config.output_dir)?;
    let mut run = Run {
        dir: config.output_dir.clone(),
        files: Vec::new(),
        assertions: Vec::new(),
        failures: Vec::new(),
        metrics: BTreeMap::new(),
    };
    match config.experiment {
        ExperimentKind::MaskEtaSweepWaveform | ExperimentKind::MaskEtaSweepBeam => eta_sweep(config, &mut run)?,
        ExperimentKind::SpsaLambdaSweep => lambda_sweep(config, &mut run)?,
        ExperimentKind::Type1Bound => type1(config, &mut run)?,
        ExperimentKind::MisspecBound => misspec(config, &mut run)?,
        ExperimentKind::SingleDatasetIrl => irl(config, &mut run)?,
    }
    let passed = run.failures.is_empty() && run.assertions.iter().all(|a| a.passed);
    let mut summary = Summary {
        experiment: config.experiment.name(),
        seed: config.seed,
        passed,
        assertions: run.assertions,
        failures: run.failures,
        metrics: run.metrics,
        files: run.files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect(),
        config: config.clone(),
    };
    summary.files.push("summary.json".into());
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    let path = run.dir.join("summary.json");
    fs::write(&path, json + "\n")?;
    run.files.push(path);
    Ok(ArtifactSet { dir: run.dir, files: run.files, summary })
}

fn scenarios(config: &ExperimentConfig) -> Result<Vec<Scenario>> {
    config.scenarios.iter().map(|s| Scenario::parse(s)).collect()
}

fn masking_problem(scenario: Scenario, config: &ExperimentConfig, seed: u64) -> Result<MaskingProblem> {
    let ex = generate_experiment(scenario, config.k, config.m, seed)?;
    let mut p = MaskingProblem::from_dataset(ex.strategy, &ex.dataset, 0.0);
    p.solver.seed = seed;
    Ok(p)
}

fn eta_sweep(config: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let scs = scenarios(config)?;
    let results: Vec<Result<Vec<Result<MaskingReport>>>> =
        par_map(&scs, |&sc| Ok(mask_eta_sweep(&masking_problem(sc, config, config.seed)?, &config.eta)));
    let mut chart = Chart {
        title: "Radar utility loss versus masking extent".into(),
        x_label: "eta".into(),
        y_label: "loss".into(),
        ..Default::default()
    };
    for (sc, res) in scs.iter().zip(results) {
        let name = sc.name();
        let reports = match res {
            Ok(r) => r,
            Err(e) => {
                run.fail(name, &e);
                continue;
            }
        };
        let mut csv = String::from("eta,loss,margin_before,margin_after,solver_restarts\n");
        let mut ok = Vec::new();
        for (eta, r) in config.eta.iter().zip(reports) {
            match r {
                Ok(r) => {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{}",
                        num(*eta),
                        num(r.loss),
                        num(r.margin_before),
                        num(r.margin_after),
                        r.diagnostics.restarts
                    );
                    ok.push(r);
                }
                Err(e) => run.fail(format!("{name} eta={eta}"), &e),
            }
        }
        run.write(&format!("eta_sweep_{name}.csv"), &csv)?;
        if let Some(r) = ok.iter().find(|r| r.eta == 0.0) {
            run.check(format!("{name}: loss(0) <= 1e-9"), r.loss <= 1e-9, format!("loss {:e}", r.loss));
        }
        if let Some(r) = ok.iter().find(|r| r.eta == 1.0) {
            run.check(
                format!("{name}: margin_after(1) <= {SWEEP_TOL:e}"),
                r.margin_after <= SWEEP_TOL,
                format!("margin {:e}", r.margin_after),
            );
        }
        let losses: Vec<f64> = ok.iter().map(|r| r.loss).collect();
        run.check(format!("{name}: loss nondecreasing in eta"), nondecreasing(&losses, SWEEP_TOL), format!("{losses:?}"));
        let worst = ok
            .iter()
            .map(|r| r.margin_after - (1.0 - r.eta) * r.margin_before)
            .fold(f64::NEG_INFINITY, f64::max);
        run.check(
            format!("{name}: margin_after <= (1 - eta) margin_before"),
            worst <= SWEEP_TOL,
            format!("largest excess {worst:e}"),
        );
        if let Some(r) = ok.last() {
            run.metrics.insert(format!("{name}.loss_at_max_eta"), r.loss);
        }
        chart.series.push(Series { name: name.into(), points: ok.iter().map(|r| (r.eta, r.loss)).collect() });
    }
    run.write("eta_sweep.svg", &chart.render())
}

fn lambda_sweep(config: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let mut lambdas = config.lambda.clone();
    if lambdas[0] != 0.0 {
        lambdas.insert(0, 0.0);
    }
    for sc in scenarios(config)? {
        let name = sc.name();
        let cells: Vec<(f64, u64)> = config
            .gamma
            .iter()
            .flat_map(|&g| (0..config.seeds as u64).map(move |j| (g, config.seed + j)))
            .collect();
        let results: Vec<Result<Vec<SweepCell>>> = par_map(&cells, |&(gamma, seed)| {
            let problem = masking_problem(sc, config, seed)?;
            let noise = NoiseModel::gaussian(config.noise_variance, config.m)?;
            let detector = DetectorConfig {
                significance: gamma,
                quantile_samples: config.quantile_samples,
                replicates: config.replicates,
                seed,
            };
            let base = SpsaConfig { iterations: config.iterations, replicates: config.replicates, seed, ..Default::default() };
            spsa_lambda_sweep(&problem, &noise, &detector, &base, &lambdas)
        });
        let mut per_seed = String::from("seed,gamma,lambda,loss,cond_type1,source_lambda\n");
        let mut table = String::from("lambda,gamma,loss,cond_type1,iterations\n");
        let mut loss_chart = Chart {
            title: format!("{name}: radar loss versus lambda (median over seeds)"),
            x_label: "lambda".into(),
            y_label: "loss".into(),
            log_x: true,
            ..Default::default()
        };
        let mut err_chart = Chart {
            title: format!("{name}: conditional Type-I error versus lambda"),
            x_label: "lambda".into(),
            y_label: "conditional Type-I error".into(),
            log_x: true,
            ..Default::default()
        };
        for &gamma in &config.gamma {
            let mut by_lambda: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = vec![Default::default(); lambdas.len()];
            for (&(g, seed), res) in cells.iter().zip(&results) {
                if g != gamma {
                    continue;
                }
                match res {
                    Ok(sweep) => {
                        for (i, c) in sweep.iter().enumerate() {
                            let src = c.source_lambda.map_or("naive".to_string(), num);
                            let _ = writeln!(per_seed, "{seed},{},{},{},{},{src}", num(gamma), num(c.lambda), num(c.loss), num(c.type1));
                            by_lambda[i].0.push(c.loss);
                            by_lambda[i].1.push(c.type1);
                            by_lambda[i].2.push((c.trace.objectives.len() - 1) as f64);
                        }
                        if let Some(c) = sweep.iter().find(|c| c.lambda == 0.0) {
                            run.check(
                                format!("{name} gamma={gamma} seed={seed}: lambda=0 control within {CONTROL_LOSS_TOL:e} of naive"),
                                c.loss.abs() <= CONTROL_LOSS_TOL,
                                format!("loss {:e}", c.loss),
                            );
                        }
                    }
                    Err(e) => run.fail(format!("{name} gamma={gamma} seed={seed}"), e),
                }
            }
            let meds: Vec<(f64, f64, f64)> = by_lambda
                .iter()
                .map(|(l, p, it)| (median(l), median(p), median(it)))
                .collect();
            for (lam, (l, p, it)) in lambdas.iter().zip(&meds) {
                let _ = writeln!(table, "{},{},{},{},{}", num(*lam), num(gamma), num(*l), num(*p), num(*it));
            }
            let losses: Vec<f64> = meds.iter().map(|m| m.0).collect();
            let errs: Vec<f64> = meds.iter().map(|m| m.1).collect();
            run.check(format!("{name} gamma={gamma}: median loss nondecreasing in lambda"), nondecreasing(&losses, 0.0), format!("{losses:?}"));
            run.check(
                format!("{name} gamma={gamma}: median conditional Type-I nondecreasing in lambda"),
                nondecreasing(&errs, 0.0),
                format!("{errs:?}"),
            );
            let pts = |f: fn(&(f64, f64, f64)) -> f64| lambdas.iter().zip(&meds).map(|(l, m)| (*l, f(m))).collect();
            loss_chart.series.push(Series { name: format!("gamma={gamma}"), points: pts(|m| m.0) });
            err_chart.series.push(Series { name: format!("gamma={gamma}"), points: pts(|m| m.1) });
        }
        run.write(&format!("lambda_sweep_{name}.csv"), &table)?;
        run.write(&format!("lambda_sweep_{name}_seeds.csv"), &per_seed)?;
        run.write(&format!("lambda_sweep_{name}_loss.svg"), &loss_chart.render())?;
        run.write(&format!("lambda_sweep_{name}_type1.svg"), &err_chart.render())?;
    }
    Ok(())
}

fn type1(config: &ExperimentConfig, run: &mut Run) -> Result<()> {
    for sc in scenarios(config)? {
        let name = sc.name();
        let results = par_map(&config.gamma, |&gamma| {
            let ex = generate_experiment(sc, config.k, config.m, config.seed)?;
            let noise = NoiseModel::gaussian(config.noise_variance, config.m)?;
            let det = DetectorConfig {
                significance: gamma,
                quantile_samples: config.quantile_samples,
                replicates: config.replicates,
                seed: config.seed,
            };
            estimate_type1(&ex.dataset, &noise, &det, config.trials)
        });
        let mut csv = String::from("gamma,trials,rate,stderr\n");
        let mut chart = Chart {
            title: format!("{name}: empirical Type-I error"),
            x_label: "gamma".into(),
            y_label: "P(H1 | H0)".into(),
            ..Default::default()
        };
        let mut pts = Vec::new();
        for (&gamma, res) in config.gamma.iter().zip(results) {
            match res {
                Ok(est) => {
                    let _ = writeln!(csv, "{},{},{},{}", num(gamma), est.trials, num(est.rate), num(est.stderr));
                    let mut trace = String::from("trial,statistic,threshold,decision,stream\n");
                    for r in &est.records {
                        let d = if r.decision == Decision::Cognitive { "cognitive" } else { "not-cognitive" };
                        let _ = writeln!(trace, "{},{},{},{d},{}", r.trial, num(r.statistic), num(r.threshold), r.stream);
                    }
                    run.write(&format!("type1_trials_{name}_gamma{gamma}.csv"), &trace)?;
                    let limit = gamma + 3.0 * est.stderr;
                    run.check(
                        format!("{name}: rate <= gamma + 3 stderr at gamma={gamma}"),
                        est.rate <= limit,
                        format!("rate {} vs limit {limit}", est.rate),
                    );
                    pts.push((gamma, est.rate));
                }
                Err(e) => run.fail(format!("{name} gamma={gamma}"), &e),
            }
        }
        chart.series.push(Series { name: "empirical".into(), points: pts });
        chart.series.push(Series { name: "gamma".into(), points: config.gamma.iter().map(|g| (*g, *g)).collect() });
        run.write(&format!("type1_{name}.csv"), &csv)?;
        run.write(&format!("type1_{name}.svg"), &chart.render())?;
    }
    Ok(())
}

fn misspec_instance(config: &ExperimentConfig, i: usize, sc: Scenario, eta: f64) -> Result<MisspecOutcome> {
    let seed = config.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
    let problem = masking_problem(sc, config, seed)?.with_eta(eta);
    let report = mask_eta_sweep(&problem, &[eta]).pop().expect("one grid point")?;
    let zeta = MisspecModel::random(config.k, config.m, config.zeta_bound, &mut substream(config.seed, 10_000 + i as u64));
    misspec_bound(&problem.strategy, &report.naive_dataset(&problem)?, &report.masked_dataset(&problem)?, &zeta, eta)
}

fn misspec(config: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let scs = scenarios(config)?;
    let jobs: Vec<(usize, Scenario, f64)> =
        (0..config.instances).map(|i| (i, scs[i % scs.len()], config.eta[(i / scs.len()) % config.eta.len()])).collect();
    let results = par_map(&jobs, |&(i, sc, eta)| misspec_instance(config, i, sc, eta));
    let mut csv = String::from("instance,scenario,eta,eta_eff,lower_bound,d1,d2,naive_margin,vacuous,holds\n");
    let (mut checked, mut held, mut worst) = (0usize, 0usize, f64::INFINITY);
    for (&(i, sc, eta), res) in jobs.iter().zip(results) {
        match res {
            Ok(o) => {
                let holds = o.vacuous || o.eta_eff >= o.lower_bound - MISSPEC_TOL;
                if !o.vacuous {
                    checked += 1;
                    held += holds as usize;
                    worst = worst.min(o.eta_eff - o.lower_bound);
                }
                let _ = writeln!(
                    csv,
                    "{i},{},{},{},{},{},{},{},{},{holds}",
                    sc.name(),
                    num(eta),
                    num(o.eta_eff),
                    num(o.lower_bound),
                    num(o.d1),
                    num(o.d2),
                    num(o.naive_margin),
                    o.vacuous
                );
            }
            Err(e) => run.fail(format!("instance {i} ({})", sc.name()), &e),
        }
    }
    run.write("misspec.csv", &csv)?;
    run.metrics.insert("misspec.nonvacuous_instances".into(), checked as f64);
    run.metrics.insert("misspec.min_eta_eff_minus_bound".into(), worst);
    run.check(
        format!("eta_eff >= lower bound - {MISSPEC_TOL:e} on every non-vacuous instance"),
        held == checked,
        format!("{held}/{checked} instances hold, smallest gap {worst:e}"),
    );
    Ok(())
}

fn irl(config: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let path = config.dataset.as_deref().expect("validated");
    let d = ProbeResponseDataset::load(path)?;
    let report = irl_report(&d)?;
    let mut csv = String::from("t,value,multiplier\n");
    if let Some(theta) = &report.theta {
        let k = d.horizon();
        for t in 0..k {
            let _ = writeln!(csv, "{t},{},{}", num(theta[t]), num(theta[k + t]));
        }
    }
    run.write("irl_theta.csv", &csv)?;
    run.metrics.insert("feasible".into(), report.feasible as u8 as f64);
    run.metrics.insert("stat_phi".into(), report.stat_phi);
    if report.feasible {
        run.check("certificate residual within tolerance", report.residual <= crate::lp::FEAS_TOL, format!("{:e}", report.residual));
        run.check("reconstruction passes relative optimality", report.reconstruction_ok, String::new());
    }
    Ok(())
}

/// Feasibility verdict, relaxation statistic and reconstruction check for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlReport {
    pub feasible: bool,
    pub residual: f64,
    pub stat_phi: f64,
    pub theta: Option<Vec<f64>>,
    pub reconstruction_ok: bool,
}

pub fn irl_report(d: &ProbeResponseDataset) -> Result<IrlReport> {
    let cert = match d.kind() {
        DatasetKind::ConstraintKnown => check_utility_rationalizable(d)?,
        DatasetKind::UtilityKnown => check_constraint_rationalizable(d)?,
    };
    let reconstruction_ok = if cert.feasible {
        relative_optimality_check(&reconstruct_strategy(&cert, d)?, d)
    } else {
        false
    };
    Ok(IrlReport {
        feasible: cert.feasible,
        residual: cert.lp_residual,
        stat_phi: stat_phi(d)?,
        theta: cert.feasible.then(|| cert.theta.clone()),
        reconstruction_ok,
    })
}

/// Convenience for callers holding a path: load, validate, run.
pub fn run_config_file(path: impl AsRef<Path>) -> Result<ArtifactSet> {
    run_experiment(&load_config(path)?)
}
