//! Feasibility margins of a strategy against a dataset.
//!
//! For each ordered pair (s, t) the slack of the projected inequality is
//! `σ (f(β_t) − f(β_s) + Σ_i λ_{t,i} (h_{t,i}(β_s) − h_{t,i}(β_t)))`, with σ = +1
//! for utilities and σ = −1 for constraints. The margin is the largest slack,
//! clipped at zero.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{DatasetKind, ProbeResponseDataset};
use crate::error::{Error, Result};
use crate::numeric::norm2;
use crate::rp::{build_afriat_system, project_strategy, scalarized_ratio, ConstraintTerm};
use crate::strategy::Strategy;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginResult {
    pub margin: f64,
    /// (s, t) attaining the largest slack, when the system has pairs.
    pub binding_pair: Option<(usize, usize)>,
    /// Row index attaining the largest slack for generic evaluators.
    pub binding_row: Option<usize>,
    pub theta_used: Vec<f64>,
}

/// How KKT multipliers are recovered for vector constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiplierRule {
    /// Nonnegative least squares; fail if the relative stationarity residual exceeds the tolerance.
    Strict(f64),
    /// Nonnegative least squares, residual ignored.
    Lenient,
}

impl Default for MultiplierRule {
    fn default() -> Self {
        MultiplierRule::Strict(1e-6)
    }
}

#[derive(Clone)]
pub(crate) enum Anchors<'a> {
    /// The dataset's own h_t (linear budget or Cobb-Douglas).
    Dataset,
    Terms(&'a [ConstraintTerm], MultiplierRule),
}

/// Pairwise slack model over an arbitrary response profile.
#[derive(Clone)]
pub(crate) struct PairModel<'a> {
    pub f: &'a Strategy,
    pub d: &'a ProbeResponseDataset,
    pub anchors: Anchors<'a>,
    pub sigma: f64,
}

pub(crate) struct Evaluated {
    pub values: Vec<f64>,
    pub lambdas: Vec<Vec<f64>>,
    /// own[t][i] = h_{t,i}(β_t)
    pub own: Vec<Vec<f64>>,
}

impl<'a> PairModel<'a> {
    pub fn single(f: &'a Strategy, d: &'a ProbeResponseDataset) -> Self {
        let sigma = match d.kind() {
            DatasetKind::ConstraintKnown => 1.0,
            DatasetKind::UtilityKnown => -1.0,
        };
        PairModel { f, d, anchors: Anchors::Dataset, sigma }
    }

    pub fn multi(f: &'a Strategy, d: &'a ProbeResponseDataset, terms: &'a [ConstraintTerm], rule: MultiplierRule) -> Self {
        PairModel { f, d, anchors: Anchors::Terms(terms, rule), sigma: 1.0 }
    }

    pub fn terms(&self) -> usize {
        match &self.anchors {
            Anchors::Dataset => 1,
            Anchors::Terms(ts, _) => ts.len(),
        }
    }

    pub fn h(&self, t: usize, i: usize, b: &[f64]) -> f64 {
        match &self.anchors {
            Anchors::Dataset => self.d.anchor_value(t, b),
            Anchors::Terms(ts, _) => ts[i].value(&self.d.probes()[t], b),
        }
    }

    pub fn h_grad(&self, t: usize, i: usize, b: &[f64]) -> Vec<f64> {
        match &self.anchors {
            Anchors::Dataset => self.d.anchor_gradient(t, b),
            Anchors::Terms(ts, _) => ts[i].gradient(&self.d.probes()[t], b),
        }
    }

    pub fn multipliers(&self, t: usize, b: &[f64]) -> Result<Vec<f64>> {
        let grad = self.f.gradient(b);
        match &self.anchors {
            Anchors::Dataset => Ok(vec![scalarized_ratio(&grad, &self.h_grad(t, 0, b), t)?]),
            Anchors::Terms(ts, rule) => {
                if ts.len() == 1 {
                    return Ok(vec![scalarized_ratio(&grad, &self.h_grad(t, 0, b), t)?]);
                }
                let grads: Vec<Vec<f64>> = (0..ts.len()).map(|i| self.h_grad(t, i, b)).collect();
                let vals: Vec<f64> = (0..ts.len()).map(|i| self.h(t, i, b)).collect();
                kkt_multipliers(&grad, &grads, &vals, *rule, t)
            }
        }
    }

    pub fn evaluate(&self, betas: &[Vec<f64>]) -> Result<Evaluated> {
        let k = betas.len();
        let ni = self.terms();
        let mut values = Vec::with_capacity(k);
        let mut lambdas = Vec::with_capacity(k);
        let mut own = Vec::with_capacity(k);
        for (t, b) in betas.iter().enumerate() {
            values.push(self.f.value(b));
            lambdas.push(self.multipliers(t, b)?);
            own.push((0..ni).map(|i| self.h(t, i, b)).collect());
        }
        Ok(Evaluated { values, lambdas, own })
    }

    pub fn slack(&self, ev: &Evaluated, betas: &[Vec<f64>], s: usize, t: usize) -> f64 {
        let lift: f64 = (0..self.terms())
            .map(|i| ev.lambdas[t][i] * (self.h(t, i, &betas[s]) - ev.own[t][i]))
            .sum();
        self.sigma * (ev.values[t] - ev.values[s] + lift)
    }

    pub fn margin(&self, betas: &[Vec<f64>]) -> Result<MarginResult> {
        let ev = self.evaluate(betas)?;
        let k = betas.len();
        let mut best = 0.0;
        let mut binding = None;
        let mut top = f64::NEG_INFINITY;
        for t in 0..k {
            for s in 0..k {
                if s == t {
                    continue;
                }
                let v = self.slack(&ev, betas, s, t);
                if v > top {
                    top = v;
                    binding = Some((s, t));
                }
            }
        }
        if top > best {
            best = top;
        }
        let mut theta = ev.values;
        theta.extend(ev.lambdas.into_iter().flatten());
        Ok(MarginResult { margin: best, binding_pair: binding, binding_row: None, theta_used: theta })
    }
}

/// Nonnegative least squares over the active constraints, by subset enumeration.
fn kkt_multipliers(grad: &[f64], grads: &[Vec<f64>], vals: &[f64], rule: MultiplierRule, t: usize) -> Result<Vec<f64>> {
    let ni = grads.len();
    let mut candidates: Vec<usize> = (0..ni).filter(|&i| vals[i] >= -1e-6).collect();
    if candidates.is_empty() {
        candidates = (0..ni).collect();
    }
    let target = DVector::from_column_slice(grad);
    let mut best = (norm2(grad), vec![0.0; ni]);
    for mask in 1u32..(1 << candidates.len()) {
        let subset: Vec<usize> = (0..candidates.len()).filter(|j| mask & (1 << j) != 0).map(|j| candidates[j]).collect();
        let m = grad.len();
        let a = DMatrix::from_fn(m, subset.len(), |r, c| grads[subset[c]][r]);
        let Ok(sol) = a.clone().svd(true, true).solve(&target, 1e-12) else { continue };
        if sol.iter().any(|x| *x < -1e-12) {
            continue;
        }
        let res = (&a * &sol - &target).norm();
        if res < best.0 - 1e-15 {
            let mut lam = vec![0.0; ni];
            for (c, &i) in subset.iter().enumerate() {
                lam[i] = sol[c].max(0.0);
            }
            best = (res, lam);
        }
    }
    let scale = norm2(grad).max(1e-300);
    if let MultiplierRule::Strict(tol) = rule {
        if best.0 / scale > tol {
            return Err(Error::Kkt { t, residual: best.0 / scale });
        }
    }
    Ok(best.1)
}

pub fn margin_utility(u: &Strategy, d: &ProbeResponseDataset) -> Result<MarginResult> {
    if d.kind() != DatasetKind::ConstraintKnown {
        return Err(Error::InvalidArgument("utility margin needs a constraint-known dataset".into()));
    }
    PairModel::single(u, d).margin(d.responses())
}

pub fn margin_constraint(g: &Strategy, d: &ProbeResponseDataset) -> Result<MarginResult> {
    if d.kind() != DatasetKind::UtilityKnown {
        return Err(Error::InvalidArgument("constraint margin needs a utility-known dataset".into()));
    }
    PairModel::single(g, d).margin(d.responses())
}

/// Margin for the vector-constraint case with strict KKT recovery.
pub fn margin_utility_multi(u: &Strategy, d: &ProbeResponseDataset, constraints: &[ConstraintTerm]) -> Result<MarginResult> {
    margin_utility_multi_with(u, d, constraints, MultiplierRule::default())
}

pub fn margin_utility_multi_with(
    u: &Strategy,
    d: &ProbeResponseDataset,
    constraints: &[ConstraintTerm],
    rule: MultiplierRule,
) -> Result<MarginResult> {
    if constraints.is_empty() {
        return Err(Error::InvalidArgument("need at least one constraint term".into()));
    }
    PairModel::multi(u, d, constraints, rule).margin(d.responses())
}

/// An IRL procedure seen through its inequality residuals (≤ 0 means satisfied).
pub trait IrlSystem {
    fn residuals(&self, s: &Strategy, d: &ProbeResponseDataset) -> Result<Vec<f64>>;
}

/// The full Afriat system evaluated at the projection of the strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct AfriatEvaluator;

impl IrlSystem for AfriatEvaluator {
    fn residuals(&self, s: &Strategy, d: &ProbeResponseDataset) -> Result<Vec<f64>> {
        let p = project_strategy(s, d)?;
        Ok(build_afriat_system(d).residuals(&p.theta))
    }
}

/// Only the pairs (t, t+1) and (t+1, t) of the Afriat system.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdjacentAfriatEvaluator;

impl IrlSystem for AdjacentAfriatEvaluator {
    fn residuals(&self, s: &Strategy, d: &ProbeResponseDataset) -> Result<Vec<f64>> {
        let p = project_strategy(s, d)?;
        let sys = build_afriat_system(d);
        let all = sys.residuals(&p.theta);
        Ok(sys
            .rows
            .iter()
            .zip(all)
            .filter(|(r, _)| r.s.abs_diff(r.t) == 1)
            .map(|(_, v)| v)
            .collect())
    }
}

/// Always satisfied with zero slack.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroEvaluator;

impl IrlSystem for ZeroEvaluator {
    fn residuals(&self, _s: &Strategy, d: &ProbeResponseDataset) -> Result<Vec<f64>> {
        Ok(vec![0.0; d.horizon()])
    }
}

pub fn margin_generic(sys: &dyn IrlSystem, s: &Strategy, d: &ProbeResponseDataset) -> Result<MarginResult> {
    let r = sys.residuals(s, d)?;
    margin_from_residuals(&r)
}

pub(crate) fn margin_from_residuals(r: &[f64]) -> Result<MarginResult> {
    let mut margin = 0.0;
    let mut row = None;
    for (i, v) in r.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("residual {i} is not finite")));
        }
        if -v > margin || (row.is_none() && -v >= margin) {
            margin = margin.max(-v);
            row = Some(i);
        }
    }
    Ok(MarginResult { margin, binding_pair: None, binding_row: row, theta_used: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_arithmetic() {
        let m = margin_from_residuals(&[-3.0, -1.0, -2.0]).unwrap();
        assert_eq!(m.margin, 3.0);
        assert_eq!(m.binding_row, Some(0));
        assert_eq!(margin_from_residuals(&[1.0, 0.5]).unwrap().margin, 0.0);
    }

    #[test]
    fn single_point_has_zero_margin() {
        let d = ProbeResponseDataset::new(DatasetKind::ConstraintKnown, vec![vec![1.0, 1.0]], vec![vec![0.5, 0.5]], None).unwrap();
        assert_eq!(margin_utility(&Strategy::sqrt_sum(), &d).unwrap().margin, 0.0);
    }

    #[test]
    fn two_point_sqrt_matches_grid_scan() {
        let d = ProbeResponseDataset::new(
            DatasetKind::ConstraintKnown,
            vec![vec![1.0, 1.0], vec![1.0, 2.0]],
            vec![vec![0.5, 0.5], vec![2.0 / 3.0, 1.0 / 6.0]],
            None,
        )
        .unwrap();
        let u = Strategy::sqrt_sum();
        let m = margin_utility(&u, &d).unwrap();
        assert!(m.margin > 0.0);
        // Grid oracle: smallest ε on a 1e-6 grid at which every row of the
        // projected ≤ system, shifted by +ε, is ≥ 0 (i.e., the whole system flips).
        let p = project_strategy(&u, &d).unwrap();
        let sys = build_afriat_system(&d);
        let slacks: Vec<f64> = sys.residuals(&p.theta).iter().map(|r| -r).collect();
        let mut eps = 0.0;
        while slacks.iter().any(|s| -s + eps < 0.0) {
            eps += 1e-6;
        }
        assert!((eps - m.margin).abs() <= 1e-6, "{eps} vs {}", m.margin);
    }
}
