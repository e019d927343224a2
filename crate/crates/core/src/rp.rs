//! Afriat-type inequality systems: feasibility, reconstruction and projection.
//!
//! θ is laid out as `[θ_1..θ_K, λ_1..λ_K]` for single-constraint systems and
//! `[θ_1..θ_K, λ_{1,1}..λ_{1,I}, .., λ_{K,I}]` for the multi-constraint one.

use crate::dataset::{DatasetKind, ProbeResponseDataset};
use crate::error::{Error, Result};
use crate::lp::{LinearSystem, LpOutcome};
use crate::numeric::{dot, median};
use crate::strategy::Strategy;

/// Strict-positivity floor for utilities and multipliers.
pub const DELTA_POS: f64 = 1e-6;
/// Absolute tolerance for satisfied inequalities.
pub const TOL: f64 = 1e-8;
/// Largest active-set enumeration the oracle will attempt.
pub const ENUMERATION_LIMIT: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Rows must be `≤ 0` (utility reconstruction).
    LessEq,
    /// Rows must be `≥ 0` (constraint reconstruction).
    GreaterEq,
}

/// One pairwise inequality `θ_s − θ_t − λ_t · data`, `data = h_t(β_s) − h_t(β_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfriatRow {
    pub s: usize,
    pub t: usize,
    pub data: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalitySystem {
    pub horizon: usize,
    pub direction: Direction,
    pub rows: Vec<AfriatRow>,
    /// Set for K = 1: no pairwise inequalities, feasible by convention.
    pub trivial: bool,
}

impl InequalitySystem {
    pub fn row_value(&self, row: &AfriatRow, theta: &[f64]) -> f64 {
        let k = self.horizon;
        theta[row.s] - theta[row.t] - theta[k + row.t] * row.data
    }

    /// Residuals with the convention `≤ 0` means satisfied.
    pub fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match self.direction {
                Direction::LessEq => self.row_value(r, theta),
                Direction::GreaterEq => -self.row_value(r, theta),
            })
            .collect()
    }

    pub fn is_satisfied(&self, theta: &[f64], tol: f64) -> bool {
        self.residuals(theta).iter().all(|r| *r <= tol)
    }

    /// Relaxes each data term by ε: `data + ε` for `≤` systems, `data − ε` for `≥`.
    pub fn relaxed(&self, eps: f64) -> Self {
        let shift = match self.direction {
            Direction::LessEq => eps,
            Direction::GreaterEq => -eps,
        };
        InequalitySystem {
            rows: self.rows.iter().map(|r| AfriatRow { data: r.data + shift, ..*r }).collect(),
            ..self.clone()
        }
    }

    /// Smallest ε ≥ 0 making `relaxed(ε)` feasible.
    ///
    /// With positive multipliers the system is feasible iff no cycle has every
    /// relaxed term weakly adverse and one strictly adverse, so the answer is
    /// the largest bottleneck weight over all cycles (widest-path closure).
    pub fn min_relaxation(&self) -> f64 {
        let k = self.horizon;
        if self.trivial {
            return 0.0;
        }
        let mut w = vec![vec![f64::NEG_INFINITY; k]; k];
        for r in &self.rows {
            w[r.s][r.t] = w[r.s][r.t].max(match self.direction {
                Direction::LessEq => -r.data,
                Direction::GreaterEq => r.data,
            });
        }
        for m in 0..k {
            for i in 0..k {
                let wim = w[i][m];
                if wim == f64::NEG_INFINITY {
                    continue;
                }
                for j in 0..k {
                    let via = wim.min(w[m][j]);
                    if via > w[i][j] {
                        w[i][j] = via;
                    }
                }
            }
        }
        (0..k).map(|i| w[i][i]).fold(0.0, f64::max)
    }

    pub(crate) fn to_linear(&self) -> LinearSystem {
        let k = self.horizon;
        let mut sys = LinearSystem::new(2 * k, vec![DELTA_POS; 2 * k]);
        for r in &self.rows {
            let mut a = vec![0.0; 2 * k];
            a[r.s] += 1.0;
            a[r.t] -= 1.0;
            a[k + r.t] -= r.data;
            if self.direction == Direction::GreaterEq {
                a.iter_mut().for_each(|x| *x = -*x);
            }
            sys.push_le(a, 0.0);
        }
        sys
    }

    /// LP feasibility of the system with the positivity floors.
    pub fn solve(&self) -> Result<Option<(Vec<f64>, f64)>> {
        if self.trivial {
            return Ok(Some((vec![DELTA_POS; 2 * self.horizon], 0.0)));
        }
        match self.to_linear().solve()? {
            LpOutcome::Feasible { x, residual } => Ok(Some((x, residual))),
            LpOutcome::Infeasible => Ok(None),
        }
    }
}

pub fn build_afriat_system(d: &ProbeResponseDataset) -> InequalitySystem {
    let k = d.horizon();
    let direction = match d.kind() {
        DatasetKind::ConstraintKnown => Direction::LessEq,
        DatasetKind::UtilityKnown => Direction::GreaterEq,
    };
    let mut rows = Vec::with_capacity(k * k.saturating_sub(1));
    for t in 0..k {
        let own = d.anchor_value(t, &d.responses()[t]);
        for s in 0..k {
            if s != t {
                let data = d.anchor_value(t, &d.responses()[s]) - own;
                rows.push(AfriatRow { s, t, data });
            }
        }
    }
    InequalitySystem { horizon: k, direction, rows, trivial: k == 1 }
}

/// Outcome of a feasibility test. When infeasible, `theta` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCertificate {
    pub theta: Vec<f64>,
    pub feasible: bool,
    /// K × I flags, multi-constraint tests only.
    pub active_flags: Option<Vec<Vec<bool>>>,
    pub lp_residual: f64,
    pub trivial: bool,
    pub kind: DatasetKind,
    /// Constraint terms of a multi-constraint test.
    pub constraints: Option<Vec<ConstraintTerm>>,
}

fn certify(d: &ProbeResponseDataset, sys: &InequalitySystem) -> Result<FeasibilityCertificate> {
    let (feasible, theta, lp_residual) = match sys.solve()? {
        Some((x, r)) => (true, x, r),
        None => (false, Vec::new(), f64::NAN),
    };
    Ok(FeasibilityCertificate {
        theta,
        feasible,
        active_flags: None,
        lp_residual,
        trivial: sys.trivial,
        kind: d.kind(),
        constraints: None,
    })
}

pub fn check_utility_rationalizable(d: &ProbeResponseDataset) -> Result<FeasibilityCertificate> {
    if d.kind() != DatasetKind::ConstraintKnown {
        return Err(Error::InvalidArgument("utility test needs a constraint-known dataset".into()));
    }
    certify(d, &build_afriat_system(d))
}

pub fn check_constraint_rationalizable(d: &ProbeResponseDataset) -> Result<FeasibilityCertificate> {
    if d.kind() != DatasetKind::UtilityKnown {
        return Err(Error::InvalidArgument("constraint test needs a utility-known dataset".into()));
    }
    certify(d, &build_afriat_system(d))
}

/// One component g_i(α, β) of a vector constraint `g(α, β) ≤ 0`.
#[derive(Debug, Clone)]
pub enum ConstraintTerm {
    /// α'β − 1.
    ProbeBudget,
    /// ‖β‖_κ − radius.
    NormCap { kappa: f64, radius: f64 },
    /// s(β) − level for a fixed increasing strategy.
    Level { strategy: Strategy, level: f64 },
}

impl PartialEq for ConstraintTerm {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ConstraintTerm::ProbeBudget, ConstraintTerm::ProbeBudget) => true,
            (
                ConstraintTerm::NormCap { kappa: a, radius: r },
                ConstraintTerm::NormCap { kappa: b, radius: q },
            ) => a == b && r == q,
            _ => false,
        }
    }
}

impl ConstraintTerm {
    pub fn value(&self, probe: &[f64], b: &[f64]) -> f64 {
        match self {
            ConstraintTerm::ProbeBudget => dot(probe, b) - 1.0,
            ConstraintTerm::NormCap { kappa, radius } => {
                b.iter().map(|x| x.abs().powf(*kappa)).sum::<f64>().powf(1.0 / kappa) - radius
            }
            ConstraintTerm::Level { strategy, level } => strategy.value(b) - level,
        }
    }

    pub fn gradient(&self, probe: &[f64], b: &[f64]) -> Vec<f64> {
        match self {
            ConstraintTerm::ProbeBudget => probe.to_vec(),
            ConstraintTerm::NormCap { kappa, .. } => {
                Strategy::k_norm(*kappa).expect("kappa validated").gradient(b)
            }
            ConstraintTerm::Level { strategy, .. } => strategy.gradient(b),
        }
    }
}

struct MultiLayout {
    k: usize,
    i: usize,
}

impl MultiLayout {
    fn lambda(&self, t: usize, i: usize) -> usize {
        self.k + t * self.i + i
    }
    fn z(&self, t: usize, i: usize) -> usize {
        self.k + self.k * self.i + t * self.i + i
    }
    fn n(&self) -> usize {
        self.k + 2 * self.k * self.i
    }
}

fn multi_rows(d: &ProbeResponseDataset, constraints: &[ConstraintTerm], n: usize, lay: &MultiLayout) -> Vec<Vec<f64>> {
    let k = lay.k;
    let mut rows = Vec::new();
    for s in 0..k {
        for t in 0..k {
            if s == t {
                continue;
            }
            let mut a = vec![0.0; n];
            a[t] += 1.0;
            a[s] -= 1.0;
            for (i, g) in constraints.iter().enumerate() {
                a[lay.lambda(s, i)] -= g.value(&d.probes()[s], &d.responses()[t]);
            }
            rows.push(a);
        }
    }
    rows
}

/// Variable state of a binary selector in the branch-and-bound tree.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Fix {
    Free,
    Zero,
    One,
}

fn relaxation(
    d: &ProbeResponseDataset,
    constraints: &[ConstraintTerm],
    lay: &MultiLayout,
    fixes: &[Fix],
) -> Result<Option<(Vec<f64>, f64)>> {
    let n = lay.n();
    let mut lower = vec![0.0; n];
    for t in 0..lay.k {
        lower[t] = DELTA_POS;
        for i in 0..lay.i {
            if fixes[t * lay.i + i] == Fix::One {
                lower[lay.z(t, i)] = 1.0;
                lower[lay.lambda(t, i)] = DELTA_POS;
            }
        }
    }
    let mut sys = LinearSystem::new(n, lower);
    for a in multi_rows(d, constraints, n, lay) {
        sys.push_le(a, 0.0);
    }
    for t in 0..lay.k {
        let mut cover = vec![0.0; n];
        for i in 0..lay.i {
            let mut a = vec![0.0; n];
            a[lay.lambda(t, i)] = -1.0;
            a[lay.z(t, i)] = DELTA_POS;
            sys.push_le(a, 0.0);
            let mut cap = vec![0.0; n];
            cap[lay.z(t, i)] = 1.0;
            let ub = if fixes[t * lay.i + i] == Fix::Zero { 0.0 } else { 1.0 };
            sys.push_le(cap, ub);
            cover[lay.z(t, i)] = -1.0;
        }
        sys.push_le(cover, -1.0);
    }
    match sys.solve()? {
        LpOutcome::Feasible { x, residual } => Ok(Some((x, residual))),
        LpOutcome::Infeasible => Ok(None),
    }
}

fn validate_multi(d: &ProbeResponseDataset, constraints: &[ConstraintTerm]) -> Result<()> {
    if constraints.is_empty() {
        return Err(Error::InvalidArgument("need at least one constraint term".into()));
    }
    if d.kind() != DatasetKind::ConstraintKnown {
        return Err(Error::InvalidArgument("multi-constraint test needs a constraint-known dataset".into()));
    }
    Ok(())
}

/// Mixed-integer test with at least one multiplier ≥ δ per step, solved by
/// depth-first branch and bound on the selectors.
pub fn check_multiconstraint_rationalizable(
    d: &ProbeResponseDataset,
    constraints: &[ConstraintTerm],
) -> Result<FeasibilityCertificate> {
    validate_multi(d, constraints)?;
    let lay = MultiLayout { k: d.horizon(), i: constraints.len() };
    let mut stack = vec![vec![Fix::Free; lay.k * lay.i]];
    let node_limit = 10_000;
    let mut nodes = 0;
    let mut found = None;
    while let Some(fixes) = stack.pop() {
        nodes += 1;
        if nodes > node_limit {
            return Err(Error::Solver(format!("branch and bound exceeded {node_limit} nodes")));
        }
        let Some((x, residual)) = relaxation(d, constraints, &lay, &fixes)? else {
            continue;
        };
        let active = |t: usize, i: usize| x[lay.lambda(t, i)] >= DELTA_POS * (1.0 - 1e-9);
        let uncovered = (0..lay.k).find(|&t| !(0..lay.i).any(|i| active(t, i)));
        match uncovered {
            None => {
                found = Some((x, residual));
                break;
            }
            Some(t) => {
                let branch = (0..lay.i)
                    .filter(|&i| fixes[t * lay.i + i] == Fix::Free)
                    .max_by(|&a, &b| x[lay.z(t, a)].total_cmp(&x[lay.z(t, b)]));
                let Some(i) = branch else { continue };
                let mut zero = fixes.clone();
                zero[t * lay.i + i] = Fix::Zero;
                let mut one = fixes;
                one[t * lay.i + i] = Fix::One;
                stack.push(zero);
                stack.push(one);
            }
        }
    }
    Ok(multi_certificate(d, constraints, &lay, found))
}

fn multi_certificate(
    d: &ProbeResponseDataset,
    constraints: &[ConstraintTerm],
    lay: &MultiLayout,
    found: Option<(Vec<f64>, f64)>,
) -> FeasibilityCertificate {
    let (feasible, theta, residual, flags) = match found {
        Some((x, r)) => {
            let theta = x[..lay.k + lay.k * lay.i].to_vec();
            let flags = (0..lay.k)
                .map(|t| (0..lay.i).map(|i| theta[lay.lambda(t, i)] >= DELTA_POS * (1.0 - 1e-9)).collect())
                .collect();
            (true, theta, r, Some(flags))
        }
        None => (false, Vec::new(), f64::NAN, None),
    };
    FeasibilityCertificate {
        theta,
        feasible,
        active_flags: flags,
        lp_residual: residual,
        trivial: lay.k == 1,
        kind: d.kind(),
        constraints: Some(constraints.to_vec()),
    }
}

/// Exhaustive oracle: tries every pattern choosing one active constraint per step.
pub fn enumerate_multiconstraint(
    d: &ProbeResponseDataset,
    constraints: &[ConstraintTerm],
) -> Result<FeasibilityCertificate> {
    validate_multi(d, constraints)?;
    let lay = MultiLayout { k: d.horizon(), i: constraints.len() };
    let patterns = (lay.i as f64).powi(lay.k as i32);
    if patterns > ENUMERATION_LIMIT {
        return Err(Error::EnumerationOverflow { patterns, limit: ENUMERATION_LIMIT });
    }
    let n = lay.k + lay.k * lay.i;
    let rows = multi_rows(d, constraints, n, &lay);
    for p in 0..patterns as usize {
        let mut lower = vec![0.0; n];
        let mut code = p;
        for t in 0..lay.k {
            lower[t] = DELTA_POS;
            lower[lay.lambda(t, code % lay.i)] = DELTA_POS;
            code /= lay.i;
        }
        let mut sys = LinearSystem::new(n, lower);
        for a in &rows {
            sys.push_le(a.clone(), 0.0);
        }
        if let LpOutcome::Feasible { mut x, residual } = sys.solve()? {
            x.extend(std::iter::repeat_n(0.0, lay.k * lay.i));
            return Ok(multi_certificate(d, constraints, &lay, Some((x, residual))));
        }
    }
    Ok(multi_certificate(d, constraints, &lay, None))
}

/// How a [`PiecewiseStrategy`] combines its pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combiner {
    /// Lower envelope, for reconstructed utilities.
    Min,
    /// Upper envelope, for reconstructed constraints.
    Max,
}

/// Set-valued estimate: `min_t` (or `max_t`) of `θ_t + Σ_i λ_{t,i} (h_{t,i}(β) − h_{t,i}(β_t))`.
#[derive(Debug, Clone)]
pub struct PiecewiseStrategy {
    pub offsets: Vec<f64>,
    pub slopes: Vec<Vec<f64>>,
    pub combiner: Combiner,
    dataset: ProbeResponseDataset,
    constraints: Option<Vec<ConstraintTerm>>,
}

impl PiecewiseStrategy {
    pub fn pieces(&self) -> usize {
        self.offsets.len()
    }

    pub fn piece_value(&self, t: usize, b: &[f64]) -> f64 {
        let d = &self.dataset;
        let bt = &d.responses()[t];
        let lift: f64 = match &self.constraints {
            None => self.slopes[t][0] * (d.anchor_value(t, b) - d.anchor_value(t, bt)),
            Some(cs) => cs
                .iter()
                .zip(&self.slopes[t])
                .map(|(g, l)| l * (g.value(&d.probes()[t], b) - g.value(&d.probes()[t], bt)))
                .sum(),
        };
        self.offsets[t] + lift
    }
}

/// Anything that can be evaluated at a response.
pub trait ValueFn {
    fn value_at(&self, b: &[f64]) -> f64;
}

impl ValueFn for Strategy {
    fn value_at(&self, b: &[f64]) -> f64 {
        self.value(b)
    }
}

impl ValueFn for PiecewiseStrategy {
    fn value_at(&self, b: &[f64]) -> f64 {
        let it = (0..self.pieces()).map(|t| self.piece_value(t, b));
        match self.combiner {
            Combiner::Min => it.fold(f64::INFINITY, f64::min),
            Combiner::Max => it.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub fn reconstruct_strategy(
    cert: &FeasibilityCertificate,
    d: &ProbeResponseDataset,
) -> Result<PiecewiseStrategy> {
    if !cert.feasible {
        return Err(Error::InfeasibleCertificate);
    }
    let k = d.horizon();
    let offsets = cert.theta[..k].to_vec();
    let (slopes, combiner) = match &cert.constraints {
        None => (
            (0..k).map(|t| vec![cert.theta[k + t]]).collect(),
            match d.kind() {
                DatasetKind::ConstraintKnown => Combiner::Min,
                DatasetKind::UtilityKnown => Combiner::Max,
            },
        ),
        Some(cs) => {
            let i = cs.len();
            ((0..k).map(|t| cert.theta[k + t * i..k + (t + 1) * i].to_vec()).collect(), Combiner::Min)
        }
    };
    Ok(PiecewiseStrategy {
        offsets,
        slopes,
        combiner,
        dataset: d.clone(),
        constraints: cert.constraints.clone(),
    })
}

/// θ built from a strategy: values at the responses and scalarized multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub theta: Vec<f64>,
    /// Steps whose multiplier fell below the positivity floor.
    pub degenerate: Vec<bool>,
}

/// Median of the componentwise ratios `∇s_i / ∇h_i`, skipping zero denominators.
pub(crate) fn scalarized_ratio(num: &[f64], den: &[f64], t: usize) -> Result<f64> {
    let ratios: Vec<f64> = num
        .iter()
        .zip(den)
        .filter(|(_, d)| d.abs() > 1e-300)
        .map(|(n, d)| n / d)
        .collect();
    if ratios.is_empty() {
        return Err(Error::ZeroGradient { t });
    }
    Ok(median(&ratios))
}

pub(crate) fn multiplier(s: &Strategy, d: &ProbeResponseDataset, t: usize, b: &[f64]) -> Result<f64> {
    scalarized_ratio(&s.gradient(b), &d.anchor_gradient(t, b), t)
}

pub fn project_strategy(s: &Strategy, d: &ProbeResponseDataset) -> Result<Projection> {
    let k = d.horizon();
    let mut theta = vec![0.0; 2 * k];
    let mut degenerate = vec![false; k];
    for t in 0..k {
        let b = &d.responses()[t];
        theta[t] = s.value(b);
        let lam = multiplier(s, d, t, b)?;
        theta[k + t] = lam;
        degenerate[t] = lam < DELTA_POS;
    }
    Ok(Projection { theta, degenerate })
}

/// Pairwise relative optimality on the dataset, with absolute slack `tol`.
pub fn relative_optimality_check_tol(s: &dyn ValueFn, d: &ProbeResponseDataset, tol: f64) -> bool {
    let k = d.horizon();
    let vals: Vec<f64> = d.responses().iter().map(|b| s.value_at(b)).collect();
    for t in 0..k {
        let own = d.anchor_value(t, &d.responses()[t]);
        for q in 0..k {
            if q == t {
                continue;
            }
            let other = d.anchor_value(t, &d.responses()[q]);
            let ok = match d.kind() {
                DatasetKind::ConstraintKnown => other > own || vals[t] >= vals[q] - tol,
                DatasetKind::UtilityKnown => other < own || vals[q] >= vals[t] - tol,
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

pub fn relative_optimality_check(s: &dyn ValueFn, d: &ProbeResponseDataset) -> bool {
    relative_optimality_check_tol(s, d, 1e-7)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn garp() -> ProbeResponseDataset {
        ProbeResponseDataset::new(
            DatasetKind::ConstraintKnown,
            vec![vec![2.0, 1.0], vec![1.0, 2.0]],
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn garp_system_shape() {
        let sys = build_afriat_system(&garp());
        assert_eq!(sys.rows.len(), 2);
        for r in &sys.rows {
            assert!((r.data + 0.5).abs() < 1e-15);
        }
        // Cross-budget spend α_1'β_2 = 0.5.
        assert_eq!(dot(&garp().probes()[0], &garp().responses()[1]), 0.5);
    }

    #[test]
    fn garp_infeasible_and_sign_oracle() {
        let cert = check_utility_rationalizable(&garp()).unwrap();
        assert!(!cert.feasible);
        // Summing the two rows gives 0.5(λ1 + λ2) ≤ 0, impossible with λ ≥ δ.
        let sys = build_afriat_system(&garp());
        let sum: f64 = sys.rows.iter().map(|r| -r.data).sum();
        assert!(sum > 0.0);
    }

    #[test]
    fn single_point_trivial() {
        let d = ProbeResponseDataset::new(DatasetKind::ConstraintKnown, vec![vec![1.0]], vec![vec![0.3]], None).unwrap();
        let sys = build_afriat_system(&d);
        assert!(sys.trivial && sys.rows.is_empty());
        let cert = check_utility_rationalizable(&d).unwrap();
        assert!(cert.feasible);
        let r = reconstruct_strategy(&cert, &d).unwrap();
        assert_eq!(r.pieces(), 1);
        assert!((r.value_at(&[0.3]) - cert.theta[0]).abs() < 1e-15);
    }

    #[test]
    fn three_point_system_dimensions() {
        let d = ProbeResponseDataset::new(
            DatasetKind::ConstraintKnown,
            vec![vec![1.0, 1.0]; 3],
            vec![vec![0.5, 0.5]; 3],
            None,
        )
        .unwrap();
        let sys = build_afriat_system(&d);
        assert_eq!(sys.rows.len(), 6);
        assert_eq!(sys.to_linear().n, 6);
    }

    #[test]
    fn median_scalarization_hand_example() {
        // u = Σ√β at β = (0.25, 1), α = (1, 1): ratios 1 and 0.5, median 0.75.
        let d = ProbeResponseDataset::new(DatasetKind::ConstraintKnown, vec![vec![0.8, 0.2]], vec![vec![0.25, 1.0]], None)
            .unwrap();
        let p = project_strategy(&Strategy::sqrt_sum(), &d).unwrap();
        // ∇u = (1, 0.5); ∇g = (0.8, 0.2); ratios 1.25, 2.5 -> 1.875.
        assert!((p.theta[1] - 1.875).abs() < 1e-12);
    }

    #[test]
    fn constant_utility_is_degenerate() {
        let d = garp();
        let p = project_strategy(&Strategy::constant(0.0), &d).unwrap();
        assert_eq!(p.theta[2..], [0.0, 0.0]);
        assert!(p.degenerate.iter().all(|x| *x));
    }

    #[test]
    fn zero_constraint_gradient_errors() {
        let d = ProbeResponseDataset::new(DatasetKind::ConstraintKnown, vec![vec![0.0, 0.0]], vec![vec![0.5, 0.5]], None)
            .unwrap();
        assert!(matches!(project_strategy(&Strategy::sqrt_sum(), &d), Err(Error::ZeroGradient { t: 0 })));
    }

    #[test]
    fn multi_garp_infeasible_both_ways() {
        let cs = [ConstraintTerm::ProbeBudget];
        assert!(!check_multiconstraint_rationalizable(&garp(), &cs).unwrap().feasible);
        assert!(!enumerate_multiconstraint(&garp(), &cs).unwrap().feasible);
    }

    #[test]
    fn enumeration_guard() {
        let d = ProbeResponseDataset::new(
            DatasetKind::ConstraintKnown,
            vec![vec![1.0]; 12],
            vec![vec![0.5]; 12],
            None,
        )
        .unwrap();
        let cs = vec![ConstraintTerm::ProbeBudget; 3];
        assert!(matches!(enumerate_multiconstraint(&d, &cs), Err(Error::EnumerationOverflow { .. })));
    }
}
