//! Margin-capped masking: the least costly responses whose feasibility margin
//! is at most `(1 − η)` times the naive one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DatasetKind, ProbeResponseDataset};
use crate::error::{Error, Result};
use crate::margins::{margin_generic, IrlSystem, MultiplierRule, PairModel};
use crate::numeric::blend;
use crate::rp::ConstraintTerm;
use crate::scenarios::{maximize_numeric_dim, naive_beam, naive_waveform};
use crate::sets::FeasibleSet;
use crate::strategy::{Family, Strategy};

/// Recorded in every report: the masking extent convention.
pub const ETA_CONVENTION: &str = "cap = (1 - eta) * margin_before; eta = 1 masks fully, eta = 0 leaves naive responses";

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of starts: the naive point plus `restarts - 1` dithered copies.
    pub restarts: usize,
    /// Projected-gradient iterations per penalty stage.
    pub max_iterations: usize,
    pub initial_penalty: f64,
    /// Penalty weight doubles per stage until the cap holds or this is exceeded.
    pub max_penalty: f64,
    /// Accepted excess of the margin over the cap.
    pub tolerance: f64,
    /// Relative size of the multiplicative dither on restarts.
    pub dither: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            restarts: 8,
            max_iterations: 200,
            initial_penalty: 1.0,
            max_penalty: 1e8,
            tolerance: 1e-8,
            dither: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaskingProblem {
    /// The strategy to hide: a utility for constraint-known problems, the
    /// constraint (`‖·‖_κ` or linear) for utility-known ones.
    pub strategy: Strategy,
    pub kind: DatasetKind,
    pub probes: Vec<Vec<f64>>,
    /// γ_t, required for utility-known problems.
    pub budgets: Option<Vec<f64>>,
    pub eta: f64,
    pub solver: SolverConfig,
}

impl MaskingProblem {
    pub fn from_dataset(strategy: Strategy, d: &ProbeResponseDataset, eta: f64) -> Self {
        MaskingProblem {
            strategy,
            kind: d.kind(),
            probes: d.probes().to_vec(),
            budgets: d.budgets().map(|b| b.to_vec()),
            eta,
            solver: SolverConfig::default(),
        }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        MaskingProblem { eta, ..self.clone() }
    }

    pub fn horizon(&self) -> usize {
        self.probes.len()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidArgument(format!("η = {} is outside [0, 1]", self.eta)));
        }
        if self.probes.is_empty() {
            return Err(Error::InvalidArgument("no probes".into()));
        }
        match self.kind {
            DatasetKind::ConstraintKnown => {
                if self.probes.iter().flatten().any(|a| !(*a > 0.0)) {
                    return Err(Error::InvalidArgument("probes must be strictly positive".into()));
                }
            }
            DatasetKind::UtilityKnown => {
                let b = self
                    .budgets
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("utility-known masking needs budgets γ_t".into()))?;
                if b.len() != self.probes.len() {
                    return Err(Error::InvalidArgument("one budget per probe required".into()));
                }
                if !matches!(self.strategy.family, Family::KNorm(_) | Family::LinearBudget(_)) {
                    return Err(Error::InvalidArgument(
                        "utility-known masking supports norm or linear constraints".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn template(&self, responses: Vec<Vec<f64>>) -> Result<ProbeResponseDataset> {
        ProbeResponseDataset::observed(self.kind, self.probes.clone(), responses, self.budgets.clone())
    }

    pub(crate) fn feasible_set(&self, t: usize, terms: Option<&[ConstraintTerm]>) -> Result<FeasibleSet> {
        if let Some(terms) = terms {
            let mut parts = Vec::with_capacity(terms.len());
            for term in terms {
                parts.push(match term {
                    ConstraintTerm::ProbeBudget => FeasibleSet::Budget(self.probes[t].clone()),
                    ConstraintTerm::NormCap { kappa, radius } => FeasibleSet::NormBall { kappa: *kappa, radius: *radius },
                    ConstraintTerm::Level { strategy, level } => match &strategy.family {
                        Family::LinearBudget(w) => FeasibleSet::Budget(w.iter().map(|x| x / level).collect()),
                        Family::KNorm(k) => FeasibleSet::NormBall { kappa: *k, radius: *level },
                        _ => return Err(Error::InvalidArgument("no projection for this constraint term".into())),
                    },
                });
            }
            return Ok(if parts.len() == 1 { parts.pop().expect("one part") } else { FeasibleSet::Intersection(parts) });
        }
        Ok(match self.kind {
            DatasetKind::ConstraintKnown => FeasibleSet::Budget(self.probes[t].clone()),
            DatasetKind::UtilityKnown => {
                let g = self.budgets.as_ref().expect("validated")[t];
                match &self.strategy.family {
                    Family::KNorm(k) => FeasibleSet::NormBall { kappa: *k, radius: g },
                    Family::LinearBudget(w) => FeasibleSet::Budget(w.iter().map(|x| x / g).collect()),
                    _ => unreachable!("validated"),
                }
            }
        })
    }

    /// The function whose loss the radar pays at step t.
    pub(crate) fn step_utility(&self, t: usize) -> Strategy {
        match self.kind {
            DatasetKind::ConstraintKnown => self.strategy.clone(),
            DatasetKind::UtilityKnown => Strategy::cobb_douglas(self.probes[t].clone()).expect("nonnegative probes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub restarts: usize,
    /// Penalty `Σ (slack − cap)⁺` at the returned responses.
    pub best_penalty_residual: f64,
    pub final_penalty_weight: f64,
    /// Starts that needed the blend-to-anchor restoration step.
    pub restorations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskingReport {
    pub naive_responses: Vec<Vec<f64>>,
    pub masked_responses: Vec<Vec<f64>>,
    pub loss: f64,
    pub per_step_loss: Vec<f64>,
    pub margin_before: f64,
    pub margin_after: f64,
    pub eta: f64,
    pub cap: f64,
    pub diagnostics: SolverDiagnostics,
    pub convention: &'static str,
}

impl MaskingReport {
    /// The dataset the adversary observes under masking.
    pub fn masked_dataset(&self, problem: &MaskingProblem) -> Result<ProbeResponseDataset> {
        ProbeResponseDataset::new(problem.kind, problem.probes.clone(), self.masked_responses.clone(), problem.budgets.clone())
    }

    pub fn naive_dataset(&self, problem: &MaskingProblem) -> Result<ProbeResponseDataset> {
        ProbeResponseDataset::new(problem.kind, problem.probes.clone(), self.naive_responses.clone(), problem.budgets.clone())
    }
}

/// Per-step maximizers of the radar's problem.
pub fn solve_naive(problem: &MaskingProblem) -> Result<Vec<Vec<f64>>> {
    problem.validate()?;
    (0..problem.horizon())
        .map(|t| {
            let a = &problem.probes[t];
            match problem.kind {
                DatasetKind::ConstraintKnown => naive_waveform(&problem.strategy, a),
                DatasetKind::UtilityKnown => {
                    let g = problem.budgets.as_ref().expect("validated")[t];
                    match problem.strategy.family {
                        Family::KNorm(k) => naive_beam(a, k, g),
                        _ => {
                            let set = problem.feasible_set(t, None)?;
                            maximize_numeric_dim(&problem.step_utility(t), &set, a.len(), t)
                        }
                    }
                }
            }
        })
        .collect()
}

fn solve_naive_multi(problem: &MaskingProblem, terms: &[ConstraintTerm]) -> Result<Vec<Vec<f64>>> {
    (0..problem.horizon())
        .map(|t| {
            let set = problem.feasible_set(t, Some(terms))?;
            if terms.iter().any(|c| matches!(c, ConstraintTerm::ProbeBudget)) {
                let closed = naive_waveform(&problem.strategy, &problem.probes[t])?;
                if set.contains(&closed, 1e-12) {
                    return Ok(closed);
                }
            }
            maximize_numeric_dim(&problem.strategy, &set, problem.probes[t].len(), t)
        })
        .collect()
}

enum CapModel<'a> {
    Pair(PairModel<'a>),
    Generic {
        sys: &'a dyn IrlSystem,
        strategy: &'a Strategy,
        template: &'a ProbeResponseDataset,
    },
}

impl CapModel<'_> {
    fn margin(&self, b: &[Vec<f64>]) -> Result<f64> {
        match self {
            CapModel::Pair(pm) => Ok(pm.margin(b)?.margin),
            CapModel::Generic { sys, strategy, template } => {
                Ok(margin_generic(*sys, strategy, &template.with_observed_responses(b.to_vec())?)?.margin)
            }
        }
    }

    fn penalty_value(&self, b: &[Vec<f64>], cap: f64) -> Result<f64> {
        Ok(self.penalty(b, cap, false)?.0)
    }

    fn penalty(&self, b: &[Vec<f64>], cap: f64, with_grad: bool) -> Result<(f64, Vec<Vec<f64>>)> {
        match self {
            CapModel::Pair(pm) => pair_penalty(pm, b, cap, with_grad),
            CapModel::Generic { sys, strategy, template } => {
                let value = |x: &[Vec<f64>]| -> Result<f64> {
                    let r = sys.residuals(strategy, &template.with_observed_responses(x.to_vec())?)?;
                    Ok(r.iter().map(|v| (-v - cap).max(0.0)).sum())
                };
                let p0 = value(b)?;
                let mut grads = vec![vec![0.0; b[0].len()]; b.len()];
                if with_grad {
                    let h = 1e-7;
                    for t in 0..b.len() {
                        for j in 0..b[t].len() {
                            let mut x = b.to_vec();
                            x[t][j] += h;
                            grads[t][j] = (value(&x)? - p0) / h;
                        }
                    }
                }
                Ok((p0, grads))
            }
        }
    }
}

fn lambda_jacobian(pm: &PairModel<'_>, t: usize, b: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = b.len();
    let ni = pm.terms();
    let mut jac = vec![vec![0.0; m]; ni];
    for j in 0..m {
        let h = 1e-6 * b[j].abs().max(1e-2);
        let mut up = b.to_vec();
        up[j] += h;
        let lu = pm.multipliers(t, &up)?;
        let (ld, width) = if b[j] - h >= 0.0 {
            let mut dn = b.to_vec();
            dn[j] -= h;
            (pm.multipliers(t, &dn)?, 2.0 * h)
        } else {
            (pm.multipliers(t, b)?, h)
        };
        for i in 0..ni {
            jac[i][j] = (lu[i] - ld[i]) / width;
        }
    }
    Ok(jac)
}

/// `Σ_{s≠t} (slack_{s,t} − cap)⁺` and its gradient over the response profile.
fn pair_penalty(pm: &PairModel<'_>, b: &[Vec<f64>], cap: f64, with_grad: bool) -> Result<(f64, Vec<Vec<f64>>)> {
    let ev = pm.evaluate(b)?;
    let k = b.len();
    let m = b[0].len();
    let ni = pm.terms();
    let mut total = 0.0;
    let mut grads = vec![vec![0.0; m]; k];
    let fgrad: Vec<Vec<f64>> = if with_grad { b.iter().map(|x| pm.f.gradient(x)).collect() } else { Vec::new() };
    let sigma = pm.sigma;
    for t in 0..k {
        let mut count = 0.0;
        let mut sum_dh = vec![0.0; ni];
        for s in 0..k {
            if s == t {
                continue;
            }
            let excess = pm.slack(&ev, b, s, t) - cap;
            if excess <= 0.0 {
                continue;
            }
            total += excess;
            if !with_grad {
                continue;
            }
            count += 1.0;
            for i in 0..ni {
                sum_dh[i] += pm.h(t, i, &b[s]) - ev.own[t][i];
                let gh = pm.h_grad(t, i, &b[s]);
                for j in 0..m {
                    grads[s][j] += sigma * ev.lambdas[t][i] * gh[j];
                }
            }
            for j in 0..m {
                grads[s][j] -= sigma * fgrad[s][j];
            }
        }
        if with_grad && count > 0.0 {
            let jac = lambda_jacobian(pm, t, &b[t])?;
            for j in 0..m {
                grads[t][j] += sigma * count * fgrad[t][j];
            }
            for i in 0..ni {
                let gh = pm.h_grad(t, i, &b[t]);
                for j in 0..m {
                    grads[t][j] += sigma * (sum_dh[i] * jac[i][j] - count * ev.lambdas[t][i] * gh[j]);
                }
            }
        }
    }
    Ok((total, grads))
}

const REFINE_ROUNDS: usize = 10;

struct Engine<'a> {
    cfg: &'a SolverConfig,
    sets: Vec<FeasibleSet>,
    utils: Vec<Strategy>,
    naive: Vec<Vec<f64>>,
    naive_vals: Vec<f64>,
    anchor: Vec<Vec<f64>>,
    model: CapModel<'a>,
}

struct Outcome {
    best: Vec<Vec<f64>>,
    diagnostics: SolverDiagnostics,
}

impl Engine<'_> {
    fn per_step_loss(&self, b: &[Vec<f64>]) -> Vec<f64> {
        b.iter().enumerate().map(|(t, x)| self.naive_vals[t] - self.utils[t].value(x)).collect()
    }

    fn loss(&self, b: &[Vec<f64>]) -> f64 {
        self.per_step_loss(b).iter().sum()
    }

    fn project(&self, b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        b.iter().zip(&self.sets).map(|(x, s)| s.project(x)).collect()
    }

    fn feasible(&self, b: &[Vec<f64>], cap: f64) -> Result<bool> {
        Ok(self.model.margin(b)? <= cap + self.cfg.tolerance)
    }

    fn objective(&self, b: &[Vec<f64>], cap: f64, rho: f64) -> Result<f64> {
        Ok(self.loss(b) + rho * self.model.penalty_value(b, cap)?)
    }

    fn stage(&self, mut b: Vec<Vec<f64>>, cap: f64, rho: f64, step: &mut f64, iters: &mut usize) -> Result<Vec<Vec<f64>>> {
        for _ in 0..self.cfg.max_iterations {
            *iters += 1;
            let (p, pg) = self.model.penalty(&b, cap, true)?;
            let f0 = self.loss(&b) + rho * p;
            let grad: Vec<Vec<f64>> = b
                .iter()
                .enumerate()
                .map(|(t, x)| {
                    let lg = self.utils[t].gradient(x);
                    lg.iter().zip(&pg[t]).map(|(l, q)| -l + rho * q).collect()
                })
                .collect();
            let mut accepted = None;
            for _ in 0..50 {
                let trial: Vec<Vec<f64>> = b
                    .iter()
                    .zip(&grad)
                    .map(|(x, g)| x.iter().zip(g).map(|(a, d)| a - *step * d).collect())
                    .collect();
                let trial = self.project(&trial);
                let d2: f64 = trial.iter().flatten().zip(b.iter().flatten()).map(|(p, q)| (p - q).powi(2)).sum();
                if d2 == 0.0 {
                    break;
                }
                if self.objective(&trial, cap, rho)? <= f0 - 1e-4 * d2 / *step {
                    accepted = Some((trial, d2));
                    *step = (*step * 1.5).min(1e3);
                    break;
                }
                *step *= 0.3;
            }
            match accepted {
                Some((trial, d2)) => {
                    b = trial;
                    if d2 < 1e-24 {
                        break;
                    }
                }
                None => {
                    *step = step.max(1e-12);
                    break;
                }
            }
        }
        Ok(b)
    }

    /// Largest τ in [0, 1] with `blend(from, to, τ)` meeting the cap, assuming `from` does.
    fn toward(&self, from: &[Vec<f64>], to: &[Vec<f64>], cap: f64) -> Result<Vec<Vec<f64>>> {
        if self.feasible(to, cap)? {
            return Ok(to.to_vec());
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if self.feasible(&blend(from, to, mid), cap)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(blend(from, to, lo))
    }

    /// Smallest τ with `blend(b, anchor, τ)` meeting the cap.
    fn restore(&self, b: &[Vec<f64>], cap: f64) -> Result<Option<Vec<Vec<f64>>>> {
        if !self.feasible(&self.anchor, cap)? {
            return Ok(None);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.feasible(&blend(b, &self.anchor, mid), cap)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(blend(b, &self.anchor, hi)))
    }

    fn run(&self, cap: f64, warm: &[Vec<Vec<f64>>]) -> Result<Outcome> {
        let cfg = self.cfg;
        let mut diag = SolverDiagnostics::default();
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        let mut best_margin = (f64::INFINITY, self.naive.clone());
        let mut consider = |b: Vec<Vec<f64>>, engine: &Self, best: &mut Option<(f64, Vec<Vec<f64>>)>| -> Result<()> {
            let margin = engine.model.margin(&b)?;
            if margin < best_margin.0 {
                best_margin = (margin, b.clone());
            }
            if margin <= cap + cfg.tolerance {
                let l = engine.loss(&b);
                if best.as_ref().is_none_or(|(bl, _)| l < *bl) {
                    *best = Some((l, b));
                }
            }
            Ok(())
        };

        consider(self.naive.clone(), self, &mut best)?;
        if best.is_some() {
            diag.restarts = 1;
            return Ok(Outcome { best: self.naive.clone(), diagnostics: diag });
        }
        let warm: Vec<Vec<Vec<f64>>> = warm.iter().map(|w| self.project(w)).collect();
        for w in &warm {
            consider(w.clone(), self, &mut best)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut starts = vec![self.naive.clone()];
        for _ in 1..cfg.restarts.max(1) {
            let d: Vec<Vec<f64>> = self
                .naive
                .iter()
                .map(|x| {
                    x.iter()
                        .map(|v| v * (1.0 + cfg.dither * rng.random_range(-1.0..1.0)) + cfg.dither * 0.01 * rng.random::<f64>())
                        .collect()
                })
                .collect();
            starts.push(self.project(&d));
        }
        starts.extend(warm);
        diag.restarts = starts.len();

        for start in starts {
            let mut b = start;
            let mut rho = cfg.initial_penalty;
            let mut step = 1e-2;
            loop {
                b = self.stage(b, cap, rho, &mut step, &mut diag.iterations)?;
                diag.final_penalty_weight = diag.final_penalty_weight.max(rho);
                if self.feasible(&b, cap)? {
                    break;
                }
                rho *= 2.0;
                if rho > cfg.max_penalty {
                    break;
                }
            }
            if !self.feasible(&b, cap)? {
                match self.restore(&b, cap)? {
                    Some(r) => {
                        diag.restorations += 1;
                        b = r;
                    }
                    None => {
                        consider(b, self, &mut best)?;
                        continue;
                    }
                }
                // Re-optimize from the restored point and keep whichever is cheaper.
                for _ in 0..REFINE_ROUNDS {
                    let mut trial = self.stage(b.clone(), cap, rho.min(cfg.max_penalty), &mut step, &mut diag.iterations)?;
                    if !self.feasible(&trial, cap)? {
                        match self.restore(&trial, cap)? {
                            Some(r) => trial = r,
                            None => break,
                        }
                    }
                    if self.loss(&trial) < self.loss(&b) - 1e-12 {
                        b = trial;
                    } else {
                        break;
                    }
                }
            }
            let polished = self.toward(&b, &self.naive, cap)?;
            if self.loss(&polished) < self.loss(&b) {
                b = polished;
            }
            consider(b, self, &mut best)?;
        }
        match best {
            Some((_, b)) => {
                diag.best_penalty_residual = self.model.penalty_value(&b, cap)?;
                Ok(Outcome { best: b, diagnostics: diag })
            }
            None => Err(Error::Masking { cap, best_margin: best_margin.0, best: best_margin.1 }),
        }
    }
}

/// A profile identical across steps and feasible at every step; it has zero
/// margin under any pairwise system, and serves as the restoration target.
fn constant_anchor(problem: &MaskingProblem, sets: &[FeasibleSet], naive: &[Vec<f64>], terms: Option<&[ConstraintTerm]>) -> Result<Vec<Vec<f64>>> {
    let k = problem.horizon();
    let m = problem.probes[0].len();
    let mut c = match problem.kind {
        DatasetKind::ConstraintKnown => {
            let top: Vec<f64> = (0..m).map(|i| problem.probes.iter().map(|a| a[i]).fold(0.0, f64::max)).collect();
            let uses_budget = terms.is_none_or(|ts| ts.iter().any(|c| matches!(c, ConstraintTerm::ProbeBudget)));
            if uses_budget {
                naive_waveform(&problem.strategy, &top)?
            } else {
                naive[0].clone()
            }
        }
        DatasetKind::UtilityKnown => {
            let budgets = problem.budgets.as_ref().expect("validated");
            let tmin = (0..k).min_by(|&a, &b| budgets[a].total_cmp(&budgets[b])).expect("K ≥ 1");
            let mean: Vec<f64> = (0..m).map(|i| problem.probes.iter().map(|a| a[i]).sum::<f64>() / k as f64).collect();
            match problem.strategy.family {
                Family::KNorm(kappa) => naive_beam(&mean, kappa, budgets[tmin])?,
                _ => naive[tmin].clone(),
            }
        }
    };
    let mut guard = 0;
    while !sets.iter().all(|s| s.contains(&c, 1e-12)) {
        c.iter_mut().for_each(|v| *v *= 0.9);
        guard += 1;
        if guard > 2000 {
            return Err(Error::InvalidArgument("no common feasible response across steps".into()));
        }
    }
    Ok(vec![best_common_response(problem, sets, c); k])
}

/// Projected-gradient ascent of `Σ_t u_t(c)` over the intersection of the step sets.
fn best_common_response(problem: &MaskingProblem, sets: &[FeasibleSet], start: Vec<f64>) -> Vec<f64> {
    let utils: Vec<Strategy> = (0..problem.horizon()).map(|t| problem.step_utility(t)).collect();
    let total = |c: &[f64]| utils.iter().map(|u| u.value(c)).sum::<f64>();
    let common = FeasibleSet::Intersection(sets.to_vec());
    let inside = |c: &[f64]| sets.iter().all(|s| s.contains(c, 1e-12));
    let mut c = start;
    let mut step = 1e-2;
    for _ in 0..300 {
        let g: Vec<f64> = utils.iter().map(|u| u.gradient(&c)).fold(vec![0.0; c.len()], |acc, g| {
            acc.iter().zip(&g).map(|(a, b)| a + b).collect()
        });
        let f0 = total(&c);
        let mut moved = false;
        for _ in 0..30 {
            let trial = common.project(&c.iter().zip(&g).map(|(x, d)| x + step * d).collect::<Vec<_>>());
            if inside(&trial) && total(&trial) > f0 + 1e-12 {
                c = trial;
                step *= 1.5;
                moved = true;
                break;
            }
            step *= 0.3;
        }
        if !moved {
            break;
        }
    }
    c
}

enum ModelSpec<'a> {
    Single,
    Multi(&'a [ConstraintTerm]),
    Generic(&'a dyn IrlSystem),
}

fn run_masking(problem: &MaskingProblem, spec: ModelSpec<'_>, warm: &[Vec<Vec<f64>>]) -> Result<MaskingReport> {
    problem.validate()?;
    let terms = match &spec {
        ModelSpec::Multi(ts) => Some(*ts),
        _ => None,
    };
    if let ModelSpec::Multi(ts) = &spec {
        if ts.is_empty() {
            return Err(Error::InvalidArgument("need at least one constraint term".into()));
        }
        if problem.kind != DatasetKind::ConstraintKnown {
            return Err(Error::InvalidArgument("vector constraints need a constraint-known problem".into()));
        }
    }
    let naive = match terms {
        Some(ts) => solve_naive_multi(problem, ts)?,
        None => solve_naive(problem)?,
    };
    let template = problem.template(naive.clone())?;
    let sets = (0..problem.horizon()).map(|t| problem.feasible_set(t, terms)).collect::<Result<Vec<_>>>()?;
    let utils: Vec<Strategy> = (0..problem.horizon()).map(|t| problem.step_utility(t)).collect();
    let naive_vals = naive.iter().zip(&utils).map(|(b, u)| u.value(b)).collect();
    let anchor = constant_anchor(problem, &sets, &naive, terms)?;
    let model = match spec {
        ModelSpec::Single => CapModel::Pair(PairModel::single(&problem.strategy, &template)),
        ModelSpec::Multi(ts) => CapModel::Pair(PairModel::multi(&problem.strategy, &template, ts, MultiplierRule::Lenient)),
        ModelSpec::Generic(sys) => CapModel::Generic { sys, strategy: &problem.strategy, template: &template },
    };
    let engine = Engine { cfg: &problem.solver, sets, utils, naive: naive.clone(), naive_vals, anchor, model };
    let margin_before = engine.model.margin(&naive)?;
    let cap = (1.0 - problem.eta) * margin_before;
    let out = engine.run(cap, warm)?;
    let per_step_loss = engine.per_step_loss(&out.best);
    Ok(MaskingReport {
        margin_after: engine.model.margin(&out.best)?,
        loss: per_step_loss.iter().sum(),
        per_step_loss,
        naive_responses: naive,
        masked_responses: out.best,
        margin_before,
        eta: problem.eta,
        cap,
        diagnostics: out.diagnostics,
        convention: ETA_CONVENTION,
    })
}

/// Masks a utility against an observer who knows the linear budgets.
pub fn mask_utility(problem: &MaskingProblem) -> Result<MaskingReport> {
    if problem.kind != DatasetKind::ConstraintKnown {
        return Err(Error::InvalidArgument("mask_utility needs a constraint-known problem".into()));
    }
    run_masking(problem, ModelSpec::Single, &[])
}

/// Masks a constraint against an observer who knows the per-step utilities.
pub fn mask_constraint(problem: &MaskingProblem) -> Result<MaskingReport> {
    if problem.kind != DatasetKind::UtilityKnown {
        return Err(Error::InvalidArgument("mask_constraint needs a utility-known problem".into()));
    }
    run_masking(problem, ModelSpec::Single, &[])
}

pub fn mask_utility_multi(problem: &MaskingProblem, constraints: &[ConstraintTerm]) -> Result<MaskingReport> {
    run_masking(problem, ModelSpec::Multi(constraints), &[])
}

pub fn mask_generic(problem: &MaskingProblem, irl: &dyn IrlSystem) -> Result<MaskingReport> {
    run_masking(problem, ModelSpec::Generic(irl), &[])
}

/// Single-constraint masking with extra feasible starting profiles.
pub fn mask_with_warm_starts(problem: &MaskingProblem, warm: &[Vec<Vec<f64>>]) -> Result<MaskingReport> {
    run_masking(problem, ModelSpec::Single, warm)
}

/// Runs an η-grid from the largest η down, seeding each cell with the
/// responses of the tighter cells. Since a tighter solution is feasible for
/// every looser cap, the reported loss is nondecreasing in η.
/// Reports come back in the order of `etas`.
pub fn mask_eta_sweep(problem: &MaskingProblem, etas: &[f64]) -> Vec<Result<MaskingReport>> {
    let mut order: Vec<usize> = (0..etas.len()).collect();
    order.sort_by(|&a, &b| etas[b].total_cmp(&etas[a]));
    let mut out: Vec<Option<Result<MaskingReport>>> = (0..etas.len()).map(|_| None).collect();
    let mut warm: Vec<Vec<Vec<f64>>> = Vec::new();
    for i in order {
        let r = mask_with_warm_starts(&problem.with_eta(etas[i]), &warm);
        if let Ok(rep) = &r {
            warm.push(rep.masked_responses.clone());
        }
        out[i] = Some(r);
    }
    out.into_iter().map(|r| r.expect("every cell visited")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::margin_utility;
    use crate::scenarios::{generate_experiment, Scenario};

    #[test]
    fn eta_zero_keeps_naive() {
        let ex = generate_experiment(Scenario::WaveformU1, 6, 3, 1).unwrap();
        let p = MaskingProblem::from_dataset(ex.strategy.clone(), &ex.dataset, 0.0);
        let r = mask_utility(&p).unwrap();
        assert_eq!(r.loss, 0.0);
        assert_eq!(r.masked_responses, ex.dataset.responses());
    }

    #[test]
    fn full_masking_meets_zero_cap() {
        let ex = generate_experiment(Scenario::WaveformU1, 6, 3, 2).unwrap();
        let p = MaskingProblem::from_dataset(ex.strategy.clone(), &ex.dataset, 1.0);
        let r = mask_utility(&p).unwrap();
        assert!(r.margin_after <= 1e-6);
        assert!(r.loss > 0.0);
        let d = r.masked_dataset(&p).unwrap();
        assert!((margin_utility(&ex.strategy, &d).unwrap().margin - r.margin_after).abs() < 1e-12);
    }

    #[test]
    fn beam_half_masking() {
        let ex = generate_experiment(Scenario::Beam, 6, 3, 3).unwrap();
        let p = MaskingProblem::from_dataset(ex.strategy.clone(), &ex.dataset, 0.5);
        let r = mask_constraint(&p).unwrap();
        assert!(r.margin_after <= r.cap + 1e-6);
        for (b, g) in r.masked_responses.iter().zip(ex.dataset.budgets().unwrap()) {
            assert!(b.iter().all(|x| *x >= 0.0));
            assert!(b.iter().map(|x| x * x).sum::<f64>().sqrt() <= g + 1e-9);
        }
    }

    #[test]
    fn rejects_bad_eta() {
        let ex = generate_experiment(Scenario::WaveformU1, 3, 2, 1).unwrap();
        let p = MaskingProblem::from_dataset(ex.strategy, &ex.dataset, 1.5);
        assert!(mask_utility(&p).is_err());
    }
}
