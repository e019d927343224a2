//! Simultaneous-perturbation masking against the noisy detectors: minimize
//! `Ĵ(β) = Σ_t u_t(β*_t) − u_t(β_t) − λ·P̂(H1 | β)` over the per-step budget sets,
//! with `P̂` the conditional Type-I estimate over frozen noise realizations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DatasetKind, ProbeResponseDataset};
use crate::detect::{substream, ConditionalType1, DetectorConfig, NoiseModel};
use crate::error::{Error, Result};
use crate::mask::{solve_naive, MaskingProblem};
use crate::sets::{positive_weights, weighted_simplex, FeasibleSet};
use crate::strategy::Strategy;

pub const SPSA_CONVENTION: &str =
    "minimize loss - lambda * P(H1); descent update beta - step / ((1 + lambda) * ||Delta||_F) * g";

const DELTA_STREAM: u64 = 7;
const PATIENCE: usize = 500;
const MAX_HALVINGS: usize = 3;
const SNAPSHOT_EVERY: usize = 100;

/// Euclidean projection onto `{β ≥ 0 : α'β = 1}`.
pub fn project_budget(x: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
    if x.len() != alpha.len() {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    positive_weights(alpha)?;
    Ok(weighted_simplex(x, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `η₀ / (i + 1)`.
    Harmonic(f64),
}

impl StepSchedule {
    pub fn at(self, i: usize) -> f64 {
        match self {
            StepSchedule::Constant(e) => e,
            StepSchedule::Harmonic(e) => e / (i + 1) as f64,
        }
    }

    fn base(self) -> f64 {
        match self {
            StepSchedule::Constant(e) | StepSchedule::Harmonic(e) => e,
        }
    }

    fn halved(self) -> Self {
        match self {
            StepSchedule::Constant(e) => StepSchedule::Constant(0.5 * e),
            StepSchedule::Harmonic(e) => StepSchedule::Harmonic(0.5 * e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpsaConfig {
    pub lambda: f64,
    pub iterations: usize,
    /// Perturbation size δ.
    pub delta: f64,
    pub step: StepSchedule,
    /// Frozen noise realizations R.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        SpsaConfig {
            lambda: 1.0,
            iterations: 2000,
            delta: 0.02,
            step: StepSchedule::Constant(0.05),
            replicates: 50,
            seed: 0,
        }
    }
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("λ = {} must be nonnegative", self.lambda)));
        }
        if !(self.delta > 0.0) || !(self.step.base() > 0.0) {
            return Err(Error::InvalidArgument("δ and the step size must be positive".into()));
        }
        if self.iterations == 0 || self.replicates == 0 {
            return Err(Error::InvalidArgument("iterations and replicates must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which detector is being confused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpsaVariant {
    /// Budgets known, the utility is hidden; iterates stay on `α_t'β = 1`.
    UtilityKnownConstraint,
    /// Utility known, the constraint is hidden; iterates stay in the norm ball.
    ConstraintKnownUtility,
}

impl SpsaVariant {
    pub fn of(kind: DatasetKind) -> Self {
        match kind {
            DatasetKind::ConstraintKnown => SpsaVariant::UtilityKnownConstraint,
            DatasetKind::UtilityKnown => SpsaVariant::ConstraintKnownUtility,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpsaStatus {
    Completed,
    /// The divergence guard ran out of halvings; the best iterate is still reported.
    Aborted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub loss: f64,
    pub type1: f64,
}

/// An evaluated response profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub responses: Vec<Vec<f64>>,
    pub loss: f64,
    pub type1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpsaTrace {
    pub variant: SpsaVariant,
    pub lambda: f64,
    /// `Ĵ` at every iterate, starting with the naive responses.
    pub objectives: Vec<f64>,
    /// Every tenth iterate, with its loss and `P̂`.
    pub history: Vec<TracePoint>,
    pub naive_responses: Vec<Vec<f64>>,
    /// The best-objective iterate.
    pub best: Candidate,
    pub best_objective: f64,
    pub baseline_type1: f64,
    pub threshold: f64,
    pub step_halvings: usize,
    pub status: SpsaStatus,
    /// Naive, snapshot and best iterates, for pooling across λ.
    pub candidates: Vec<Candidate>,
    pub convention: &'static str,
}

impl SpsaTrace {
    pub fn final_loss(&self) -> f64 {
        self.best.loss
    }

    pub fn final_type1(&self) -> f64 {
        self.best.type1
    }
}

/// Two-sided SPSA gradient estimate `Δ (f(x + δΔ) − f(x − δΔ)) / (2δ)`, `Δ ∈ {±1}ⁿ`.
pub fn spsa_gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], delta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dir: Vec<f64> = (0..x.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let plus: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + delta * d).collect();
    let minus: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a - delta * d).collect();
    let diff = (f(&plus) - f(&minus)) / (2.0 * delta);
    dir.iter().map(|d| d * diff).collect()
}

struct Landscape<'a> {
    problem: &'a MaskingProblem,
    utilities: Vec<Strategy>,
    naive_value: Vec<f64>,
    sets: Vec<FeasibleSet>,
    estimator: &'a ConditionalType1,
    m: usize,
}

impl<'a> Landscape<'a> {
    fn new(problem: &'a MaskingProblem, naive: &[Vec<f64>], estimator: &'a ConditionalType1) -> Result<Self> {
        let k = problem.horizon();
        let utilities: Vec<Strategy> = (0..k).map(|t| problem.step_utility(t)).collect();
        let naive_value = utilities.iter().zip(naive).map(|(u, b)| u.value(b)).collect();
        let sets = (0..k)
            .map(|t| {
                Ok(match problem.kind {
                    DatasetKind::ConstraintKnown => FeasibleSet::Hyperplane(problem.probes[t].clone()),
                    DatasetKind::UtilityKnown => problem.feasible_set(t, None)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Landscape { problem, utilities, naive_value, sets, estimator, m: naive[0].len() })
    }

    fn unflatten(&self, x: &[f64]) -> Vec<Vec<f64>> {
        x.chunks(self.m).map(|c| c.iter().map(|v| v.max(0.0)).collect()).collect()
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        x.chunks(self.m).zip(&self.sets).flat_map(|(c, s)| s.project(c)).collect()
    }

    fn evaluate(&self, x: &[f64]) -> Candidate {
        let responses = self.unflatten(x);
        let loss = self.utilities.iter().zip(&responses).zip(&self.naive_value).map(|((u, b), v)| v - u.value(b)).sum();
        // A profile whose multipliers cannot be recovered is scored as undetected.
        let type1 = self.estimator.estimate(&self.problem.strategy, &responses).unwrap_or(0.0);
        Candidate { responses, loss, type1 }
    }
}

fn objective(c: &Candidate, lambda: f64) -> f64 {
    c.loss - lambda * c.type1
}

fn estimator_for(
    problem: &MaskingProblem,
    naive: &[Vec<f64>],
    noise: &NoiseModel,
    detector: &DetectorConfig,
    config: &SpsaConfig,
) -> Result<ConditionalType1> {
    let reference = ProbeResponseDataset::observed(problem.kind, problem.probes.clone(), naive.to_vec(), problem.budgets.clone())?;
    let cfg = DetectorConfig { replicates: config.replicates, seed: config.seed, ..detector.clone() };
    ConditionalType1::new(&reference, noise, &cfg)
}

/// Runs SPSA masking from the naive responses. `detector` supplies γ and the
/// quantile sample count; realizations and Δ draws derive from `config.seed`.
pub fn spsa_mask(
    problem: &MaskingProblem,
    noise: &NoiseModel,
    detector: &DetectorConfig,
    config: &SpsaConfig,
) -> Result<SpsaTrace> {
    config.validate()?;
    detector.validate()?;
    let naive = solve_naive(problem)?;
    let estimator = estimator_for(problem, &naive, noise, detector, config)?;
    run(problem, &naive, &estimator, config)
}

fn run(problem: &MaskingProblem, naive: &[Vec<f64>], estimator: &ConditionalType1, config: &SpsaConfig) -> Result<SpsaTrace> {
    let land = Landscape::new(problem, naive, estimator)?;
    let lambda = config.lambda;
    let mut rng = substream(config.seed, DELTA_STREAM);
    let mut x: Vec<f64> = naive.iter().flatten().copied().collect();
    let start = land.evaluate(&x);
    let baseline_type1 = start.type1;
    let mut best = start.clone();
    let mut best_x = x.clone();
    let mut best_objective = objective(&start, lambda);
    let mut objectives = vec![best_objective];
    let mut history = vec![TracePoint { iteration: 0, objective: best_objective, loss: start.loss, type1: start.type1 }];
    let mut candidates = vec![start];
    let mut step = config.step;
    let mut halvings = 0;
    let mut stale = 0;
    let mut status = SpsaStatus::Completed;
    let scale = 1.0 / ((1.0 + lambda) * (x.len() as f64).sqrt());
    let mut eval = |z: &[f64]| objective(&land.evaluate(z), lambda);

    for i in 0..config.iterations {
        let g = spsa_gradient(&mut eval, &x, config.delta, &mut rng);
        let eta = step.at(i) * scale;
        let moved: Vec<f64> = x.iter().zip(&g).map(|(a, gi)| a - eta * gi).collect();
        x = land.project(&moved);
        let c = land.evaluate(&x);
        let j = objective(&c, lambda);
        objectives.push(j);
        let iteration = i + 1;
        if iteration % 10 == 0 {
            history.push(TracePoint { iteration, objective: j, loss: c.loss, type1: c.type1 });
        }
        if iteration % SNAPSHOT_EVERY == 0 {
            candidates.push(c.clone());
        }
        if j < best_objective {
            best_objective = j;
            best = c;
            best_x = x.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= PATIENCE {
                if halvings == MAX_HALVINGS {
                    status = SpsaStatus::Aborted;
                    break;
                }
                halvings += 1;
                step = step.halved();
                x = best_x.clone();
                stale = 0;
            }
        }
    }
    candidates.push(best.clone());
    Ok(SpsaTrace {
        variant: SpsaVariant::of(problem.kind),
        lambda,
        objectives,
        history,
        naive_responses: naive.to_vec(),
        best,
        best_objective,
        baseline_type1,
        threshold: estimator.threshold,
        step_halvings: halvings,
        status,
        candidates,
        convention: SPSA_CONVENTION,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub lambda: f64,
    pub loss: f64,
    pub type1: f64,
    /// λ of the run whose candidate was selected; `None` for the naive profile.
    pub source_lambda: Option<f64>,
    pub responses: Vec<Vec<f64>>,
    pub trace: SpsaTrace,
}

/// One SPSA run per λ on shared realizations; each λ then reports the
/// minimizer of `loss − λ·P̂` over every candidate evaluated in the sweep.
pub fn spsa_lambda_sweep(
    problem: &MaskingProblem,
    noise: &NoiseModel,
    detector: &DetectorConfig,
    base: &SpsaConfig,
    lambdas: &[f64],
) -> Result<Vec<SweepCell>> {
    base.validate()?;
    detector.validate()?;
    let naive = solve_naive(problem)?;
    let estimator = estimator_for(problem, &naive, noise, detector, base)?;
    let traces = lambdas
        .iter()
        .map(|&lambda| run(problem, &naive, &estimator, &SpsaConfig { lambda, ..base.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let pool: Vec<(Option<f64>, &Candidate)> = traces
        .iter()
        .flat_map(|tr| tr.candidates.iter().enumerate().map(move |(i, c)| (if i == 0 { None } else { Some(tr.lambda) }, c)))
        .collect();
    Ok(lambdas
        .iter()
        .zip(traces.iter())
        .map(|(&lambda, tr)| {
            let (src, c) = pool
                .iter()
                .min_by(|a, b| {
                    objective(a.1, lambda).total_cmp(&objective(b.1, lambda)).then(a.1.loss.total_cmp(&b.1.loss))
                })
                .expect("pool contains the naive profile");
            SweepCell {
                lambda,
                loss: c.loss,
                type1: c.type1,
                source_lambda: *src,
                responses: c.responses.clone(),
                trace: tr.clone(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{generate_experiment, Scenario};

    #[test]
    fn projection_examples() {
        assert_eq!(project_budget(&[2.0, 0.0], &[1.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project_budget(&[0.5, 0.5], &[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert!(project_budget(&[0.5, 0.5], &[1.0, 0.0]).is_err());
    }

    fn setup(scenario: Scenario) -> (MaskingProblem, NoiseModel, DetectorConfig) {
        let ex = generate_experiment(scenario, 6, 3, 2).unwrap();
        let problem = MaskingProblem::from_dataset(ex.strategy, &ex.dataset, 0.0);
        let var = if scenario == Scenario::Beam { 0.01 } else { 0.3 };
        (problem, NoiseModel::gaussian(var, 3).unwrap(), DetectorConfig { quantile_samples: 500, ..Default::default() })
    }

    #[test]
    fn zero_lambda_keeps_naive() {
        let (p, noise, det) = setup(Scenario::WaveformU1);
        let cfg = SpsaConfig { lambda: 0.0, iterations: 200, ..Default::default() };
        let tr = spsa_mask(&p, &noise, &det, &cfg).unwrap();
        assert!(tr.final_loss().abs() <= 1e-12);
        assert_eq!(tr.final_type1(), tr.baseline_type1);
    }

    #[test]
    fn iterates_feasible_and_reproducible() {
        for sc in [Scenario::WaveformU1, Scenario::Beam] {
            let (p, noise, det) = setup(sc);
            let cfg = SpsaConfig { lambda: 100.0, iterations: 300, seed: 5, ..Default::default() };
            let a = spsa_mask(&p, &noise, &det, &cfg).unwrap();
            let b = spsa_mask(&p, &noise, &det, &cfg).unwrap();
            assert_eq!(a, b);
            for c in &a.candidates {
                for (t, r) in c.responses.iter().enumerate() {
                    let set = match p.kind {
                        DatasetKind::ConstraintKnown => FeasibleSet::Hyperplane(p.probes[t].clone()),
                        DatasetKind::UtilityKnown => p.feasible_set(t, None).unwrap(),
                    };
                    assert!(set.contains(r, 1e-10), "{r:?}");
                }
            }
        }
    }

    #[test]
    fn sweep_is_monotone() {
        let (p, noise, det) = setup(Scenario::WaveformU1);
        let base = SpsaConfig { iterations: 300, ..Default::default() };
        let cells = spsa_lambda_sweep(&p, &noise, &det, &base, &[0.0, 1.0, 10.0, 100.0, 1000.0]).unwrap();
        assert!(cells[0].loss.abs() <= 1e-12);
        for w in cells.windows(2) {
            assert!(w[1].loss >= w[0].loss && w[1].type1 >= w[0].type1);
        }
    }
}
