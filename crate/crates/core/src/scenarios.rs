//! Waveform-adaptation and beam-allocation scenarios, the Kalman/Riccati
//! machinery behind them, and the misspecification bound.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DatasetKind, ProbeResponseDataset};
use crate::error::{Error, Result};
use crate::margins::{margin_constraint, margin_utility};
use crate::numeric::dot;
use crate::sets::{positive_weights, FeasibleSet};
use crate::strategy::{Family, Strategy};

/// `x_{n+1} = A x_n + w`, `y_n = C x_n + v`, `w ~ N(0, Q)`, `v ~ N(0, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSystem {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub sigma0: DMatrix<f64>,
}

impl LinearGaussianSystem {
    /// `Q = diag(α)`, `R = diag(1/β)`, `Σ₀ = Q`.
    pub fn from_precisions(a: DMatrix<f64>, c: DMatrix<f64>, alpha: &[f64], beta: &[f64]) -> Result<Self> {
        positive_weights(alpha)?;
        positive_weights(beta)?;
        if !a.is_square() || a.nrows() != alpha.len() || c.ncols() != a.nrows() || c.nrows() != beta.len() {
            return Err(Error::InvalidArgument("inconsistent system dimensions".into()));
        }
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(alpha));
        let r = DMatrix::from_diagonal(&DVector::from_iterator(beta.len(), beta.iter().map(|b| 1.0 / b)));
        Ok(LinearGaussianSystem { a, c, sigma0: q.clone(), q, r })
    }

    /// One step of the predicted-covariance Riccati recursion.
    pub fn riccati_map(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let (a, c) = (&self.a, &self.c);
        let innov = c * s * c.transpose() + &self.r;
        let inv = innov.clone().cholesky().map(|ch| ch.inverse()).unwrap_or_else(|| {
            innov.try_inverse().expect("innovation covariance is invertible")
        });
        let upd = s - s * c.transpose() * inv * c * s;
        let next = a * upd * a.transpose() + &self.q;
        (&next + next.transpose()) * 0.5
    }

    /// PBH tests for detectability of (A, C) and stabilizability of (A, √Q).
    pub fn check_existence(&self) -> Result<()> {
        let n = self.a.nrows();
        let sqrt_q = self.q.map(|v| v.max(0.0).sqrt());
        for lam in self.a.complex_eigenvalues().iter() {
            if lam.norm() < 1.0 - 1e-12 {
                continue;
            }
            let shifted = self.a.map(|v| Complex::new(v, 0.0)) - DMatrix::<Complex<f64>>::identity(n, n) * *lam;
            let mut obs = DMatrix::<Complex<f64>>::zeros(n + self.c.nrows(), n);
            obs.view_mut((0, 0), (n, n)).copy_from(&shifted);
            obs.view_mut((n, 0), (self.c.nrows(), n)).copy_from(&self.c.map(|v| Complex::new(v, 0.0)));
            if complex_rank(&obs) < n {
                return Err(Error::Existence(format!("(A, C) not detectable at eigenvalue {lam}")));
            }
            let mut ctr = DMatrix::<Complex<f64>>::zeros(n, 2 * n);
            ctr.view_mut((0, 0), (n, n)).copy_from(&shifted);
            ctr.view_mut((0, n), (n, n)).copy_from(&sqrt_q.map(|v| Complex::new(v, 0.0)));
            if complex_rank(&ctr) < n {
                return Err(Error::Existence(format!("(A, √Q) not stabilizable at eigenvalue {lam}")));
            }
        }
        Ok(())
    }
}

fn complex_rank(m: &DMatrix<Complex<f64>>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > 1e-10 * top.max(1.0)).count()
}

/// Steady-state predicted covariance by fixed-point iteration from `Σ = Q`.
pub fn are_solve(sys: &LinearGaussianSystem) -> Result<DMatrix<f64>> {
    sys.check_existence()?;
    let mut s = sys.q.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..200_000 {
        let next = sys.riccati_map(&s);
        residual = (&next - &s).norm();
        s = next;
        if residual <= 1e-12 {
            break;
        }
    }
    let check = (sys.riccati_map(&s) - &s).norm();
    if check > 1e-10 {
        return Err(Error::Riccati { residual: check.max(residual) });
    }
    Ok(s)
}

/// Per-target kinematics for beam allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetModel {
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub sigma0: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionHorizon {
    Asymptotic,
    Steps(usize),
}

/// α(i) = trace of the inverse predicted covariance of target i.
pub fn predicted_precision_probe(targets: &[TargetModel], horizon: PredictionHorizon) -> Result<Vec<f64>> {
    targets
        .iter()
        .map(|tm| {
            let cov = match horizon {
                PredictionHorizon::Steps(n) => {
                    let mut s = tm.sigma0.clone();
                    for _ in 0..n {
                        s = &tm.a * s * tm.a.transpose() + &tm.q;
                    }
                    s
                }
                PredictionHorizon::Asymptotic => {
                    let radius = tm.a.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
                    if radius >= 1.0 {
                        return Err(Error::Unstable { radius });
                    }
                    lyapunov(&tm.a, &tm.q)?
                }
            };
            let inv = cov
                .try_inverse()
                .ok_or_else(|| Error::InvalidArgument("predicted covariance is singular".into()))?;
            Ok(inv.trace())
        })
        .collect()
}

/// Solves `Σ = A Σ A' + Q` through the Kronecker form.
fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let kron = a.kronecker(a);
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - kron;
    let rhs = DVector::from_column_slice(q.as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("Lyapunov system is singular".into()))?;
    let s = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&s + s.transpose()) * 0.5)
}

/// Maximizer of `u` over `{β ≥ 0 : α'β ≤ 1}`.
pub fn naive_waveform(u: &Strategy, alpha: &[f64]) -> Result<Vec<f64>> {
    positive_weights(alpha)?;
    match &u.family {
        Family::SqrtSum => {
            let inv_sum: f64 = alpha.iter().map(|a| 1.0 / a).sum();
            Ok(alpha.iter().map(|a| 1.0 / (a * a) / inv_sum).collect())
        }
        Family::QuadraticSum => Ok(best_vertex(alpha, |i| 1.0 / (alpha[i] * alpha[i]))),
        Family::LinearBudget(w) => Ok(best_vertex(alpha, |i| w[i] / alpha[i])),
        Family::CobbDouglas(a) if a.iter().sum::<f64>() > 0.0 => {
            let total: f64 = a.iter().sum();
            Ok(a.iter().zip(alpha).map(|(ai, al)| ai / total / al).collect())
        }
        _ => maximize_numeric(u, &FeasibleSet::Budget(alpha.to_vec())),
    }
}

fn best_vertex(alpha: &[f64], score: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut best = 0;
    for i in 1..alpha.len() {
        if score(i) > score(best) {
            best = i;
        }
    }
    let mut v = vec![0.0; alpha.len()];
    v[best] = 1.0 / alpha[best];
    v
}

/// Maximizer of the Cobb-Douglas utility with exponents α under `‖β‖_κ ≤ γ`.
pub fn naive_beam(alpha: &[f64], kappa: f64, gamma: f64) -> Result<Vec<f64>> {
    if alpha.iter().any(|a| *a < 0.0 || !a.is_finite()) {
        return Err(Error::InvalidArgument("exponents must be nonnegative".into()));
    }
    let total: f64 = alpha.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("all-zero exponents have no unique maximizer".into()));
    }
    if !(kappa > 1.0 && gamma > 0.0) {
        return Err(Error::InvalidArgument("need κ > 1 and γ > 0".into()));
    }
    Ok(alpha.iter().map(|a| gamma * (a / total).powf(1.0 / kappa)).collect())
}

/// Projected-gradient ascent with multi-start, for families without a closed form.
pub(crate) fn maximize_numeric(u: &Strategy, set: &FeasibleSet) -> Result<Vec<f64>> {
    let m = match set {
        FeasibleSet::Budget(w) | FeasibleSet::Hyperplane(w) => w.len(),
        FeasibleSet::Intersection(p) => match &p[0] {
            FeasibleSet::Budget(w) | FeasibleSet::Hyperplane(w) => w.len(),
            _ => return Err(Error::InvalidArgument("intersection must start with a budget".into())),
        },
        FeasibleSet::NormBall { .. } => return Err(Error::InvalidArgument("dimension unknown for a bare ball".into())),
    };
    maximize_numeric_dim(u, set, m, 0)
}

pub(crate) fn maximize_numeric_dim(u: &Strategy, set: &FeasibleSet, m: usize, t: usize) -> Result<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = vec![set.project(&vec![1.0 / m as f64; m])];
    for i in 0..m {
        let mut e = vec![1e-3; m];
        e[i] = 10.0;
        starts.push(set.project(&e));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let mut b = start;
        let mut step = 1.0;
        for _ in 0..5000 {
            let g = u.gradient(&b);
            let f0 = u.value(&b);
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = set.project(&b.iter().zip(&g).map(|(x, d)| x + step * d).collect::<Vec<_>>());
                let d2: f64 = trial.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum();
                if u.value(&trial) >= f0 + 1e-4 * d2 / step && d2 > 0.0 {
                    moved = d2 > 1e-28;
                    b = trial;
                    step = (step * 2.0).min(1e6);
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let v = u.value(&b);
        if !v.is_finite() {
            return Err(Error::NaiveSolve { t, best: b });
        }
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, b));
        }
    }
    Ok(best.expect("at least one start").1)
}

/// Additive perturbations of the adversary's response measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct MisspecModel {
    pub perturbations: Vec<Vec<f64>>,
    pub bound: f64,
}

impl MisspecModel {
    pub fn new(perturbations: Vec<Vec<f64>>, bound: f64) -> Result<Self> {
        for (t, z) in perturbations.iter().enumerate() {
            let n = dot(z, z).sqrt();
            if n > bound * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!("‖ζ_{t}‖ = {n} exceeds the bound {bound}")));
            }
        }
        Ok(MisspecModel { perturbations, bound })
    }

    /// Random perturbations, uniform in direction, norm uniform in `[0, bound]`.
    pub fn random(k: usize, m: usize, bound: f64, rng: &mut impl Rng) -> Self {
        let normal = rand_distr::StandardNormal;
        let perturbations = (0..k)
            .map(|_| {
                let v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(normal)).collect();
                let n = dot(&v, &v).sqrt().max(1e-300);
                let r = bound * rng.random::<f64>();
                v.iter().map(|x| x * r / n).collect()
            })
            .collect();
        MisspecModel { perturbations, bound }
    }

    fn shift(&self, responses: &[Vec<f64>]) -> Vec<Vec<f64>> {
        responses
            .iter()
            .zip(&self.perturbations)
            .map(|(b, z)| b.iter().zip(z).map(|(x, y)| x + y).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisspecOutcome {
    pub eta_eff: f64,
    pub lower_bound: f64,
    pub d1: f64,
    pub d2: f64,
    /// Margin of the strategy on the unperturbed naive data.
    pub naive_margin: f64,
    /// Set when the bound's denominator is not positive.
    pub vacuous: bool,
}

/// Effective masking extent under misspecified measurements and its lower bound.
///
/// `eta_eff = 1 − M(masked + ζ) / M(naive + ζ)`, so that it equals η when ζ = 0
/// and the cap binds.
pub fn misspec_bound(
    s: &Strategy,
    naive: &ProbeResponseDataset,
    masked: &ProbeResponseDataset,
    zeta: &MisspecModel,
    eta: f64,
) -> Result<MisspecOutcome> {
    let margin = |d: &ProbeResponseDataset| -> Result<f64> {
        Ok(match d.kind() {
            DatasetKind::ConstraintKnown => margin_utility(s, d)?.margin,
            DatasetKind::UtilityKnown => margin_constraint(s, d)?.margin,
        })
    };
    let spread: Vec<f64> = naive
        .responses()
        .iter()
        .zip(&zeta.perturbations)
        .map(|(b, z)| dot(&s.gradient(b), z))
        .collect();
    let d1 = spread.iter().cloned().fold(f64::INFINITY, f64::min);
    let d2 = spread.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let naive_margin = margin(naive)?;
    let bar_naive = naive.with_observed_responses(zeta.shift(naive.responses()))?;
    let bar_masked = masked.with_observed_responses(zeta.shift(masked.responses()))?;
    let denom_eff = margin(&bar_naive)?;
    let eta_eff = if denom_eff > 0.0 { 1.0 - margin(&bar_masked)? / denom_eff } else { f64::NAN };
    let denom = naive_margin - d2;
    let vacuous = !(denom > 0.0);
    let lower_bound = if vacuous { f64::NEG_INFINITY } else { eta - (1.0 - eta) * (d2 - d1) / denom };
    Ok(MisspecOutcome { eta_eff, lower_bound, d1, d2, naive_margin, vacuous })
}

/// Named scenario presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Waveform adaptation, `u = Σ √β_i`.
    WaveformU1,
    /// Waveform adaptation, `u = Σ β_i²`.
    WaveformU2,
    /// Beam allocation, Cobb-Douglas utilities under `‖β‖₂ ≤ γ_t`.
    Beam,
}

impl Scenario {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "waveform-u1" => Ok(Scenario::WaveformU1),
            "waveform-u2" => Ok(Scenario::WaveformU2),
            "beam" => Ok(Scenario::Beam),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario `{other}` (expected waveform-u1, waveform-u2 or beam)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::WaveformU1 => "waveform-u1",
            Scenario::WaveformU2 => "waveform-u2",
            Scenario::Beam => "beam",
        }
    }

    /// The radar's hidden strategy in this scenario.
    pub fn strategy(self) -> Strategy {
        match self {
            Scenario::WaveformU1 => Strategy::sqrt_sum(),
            Scenario::WaveformU2 => Strategy::quadratic_sum(),
            Scenario::Beam => Strategy::k_norm(2.0).expect("valid order"),
        }
    }
}

/// A generated dataset with naive responses and the strategy that produced it.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: Scenario,
    pub dataset: ProbeResponseDataset,
    pub strategy: Strategy,
}

pub const WAVEFORM_PROBE_RANGE: (f64, f64) = (0.2, 2.5);
pub const BEAM_PROBE_RANGE: (f64, f64) = (0.1, 0.7);
pub const BEAM_BUDGET_RANGE: (f64, f64) = (0.5, 2.0);

pub fn generate_experiment(scenario: Scenario, k: usize, m: usize, seed: u64) -> Result<Experiment> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidArgument("K and m must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strategy = scenario.strategy();
    let dataset = match scenario {
        Scenario::WaveformU1 | Scenario::WaveformU2 => {
            let (lo, hi) = WAVEFORM_PROBE_RANGE;
            let probes: Vec<Vec<f64>> = (0..k).map(|_| (0..m).map(|_| rng.random_range(lo..=hi)).collect()).collect();
            let responses = probes.iter().map(|a| naive_waveform(&strategy, a)).collect::<Result<Vec<_>>>()?;
            ProbeResponseDataset::new(DatasetKind::ConstraintKnown, probes, responses, None)?
        }
        Scenario::Beam => {
            let (lo, hi) = BEAM_PROBE_RANGE;
            let (glo, ghi) = BEAM_BUDGET_RANGE;
            let mut probes = Vec::with_capacity(k);
            let mut budgets = Vec::with_capacity(k);
            for _ in 0..k {
                probes.push((0..m).map(|_| rng.random_range(lo..=hi)).collect::<Vec<f64>>());
                budgets.push(rng.random_range(glo..=ghi));
            }
            let responses = probes
                .iter()
                .zip(&budgets)
                .map(|(a, g)| naive_beam(a, 2.0, *g))
                .collect::<Result<Vec<_>>>()?;
            ProbeResponseDataset::new(DatasetKind::UtilityKnown, probes, responses, Some(budgets))?
        }
    };
    Ok(Experiment { scenario, dataset, strategy })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_are_root() {
        let sys = LinearGaussianSystem::from_precisions(
            DMatrix::from_element(1, 1, 0.9),
            DMatrix::from_element(1, 1, 1.0),
            &[1.0],
            &[1.0],
        )
        .unwrap();
        let s = are_solve(&sys).unwrap()[(0, 0)];
        // σ = 0.81 σ / (σ + 1) + 1  <=>  σ² − 0.81 σ − 1 = 0.
        let root = (0.81 + (0.81f64 * 0.81 + 4.0).sqrt()) / 2.0;
        assert!((s - root).abs() <= 1e-10, "{s} vs {root}");
    }

    #[test]
    fn zero_dynamics_are() {
        let sys = LinearGaussianSystem::from_precisions(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            &[0.7],
            &[2.0],
        )
        .unwrap();
        assert!((are_solve(&sys).unwrap()[(0, 0)] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn undetectable_rejected() {
        let sys = LinearGaussianSystem::from_precisions(
            DMatrix::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.5]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            &[1.0, 1.0],
            &[1.0],
        )
        .unwrap();
        assert!(matches!(are_solve(&sys), Err(Error::Existence(_))));
    }

    #[test]
    fn precision_probe_examples() {
        let tm = TargetModel {
            a: DMatrix::from_element(1, 1, 0.5),
            q: DMatrix::from_element(1, 1, 1.0),
            sigma0: DMatrix::from_element(1, 1, 2.0),
        };
        let a = predicted_precision_probe(std::slice::from_ref(&tm), PredictionHorizon::Asymptotic).unwrap();
        assert!((a[0] - 0.75).abs() < 1e-12);
        let a0 = predicted_precision_probe(std::slice::from_ref(&tm), PredictionHorizon::Steps(0)).unwrap();
        assert!((a0[0] - 0.5).abs() < 1e-15);
        let unstable = TargetModel { a: DMatrix::from_element(1, 1, 1.5), ..tm };
        assert!(matches!(
            predicted_precision_probe(std::slice::from_ref(&unstable), PredictionHorizon::Asymptotic),
            Err(Error::Unstable { .. })
        ));
        assert!(predicted_precision_probe(&[unstable], PredictionHorizon::Steps(5)).is_ok());
    }

    #[test]
    fn naive_examples() {
        let u = Strategy::sqrt_sum();
        assert_eq!(naive_waveform(&u, &[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        let b = naive_waveform(&u, &[1.0, 2.0]).unwrap();
        assert!((b[0] - 2.0 / 3.0).abs() < 1e-15 && (b[1] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(naive_waveform(&Strategy::quadratic_sum(), &[1.0, 2.0]).unwrap(), vec![1.0, 0.0]);
        let beam = naive_beam(&[0.2, 0.6, 0.2], 2.0, 1.0).unwrap();
        for (x, y) in beam.iter().zip([0.2f64.sqrt(), 0.6f64.sqrt(), 0.2f64.sqrt()]) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(naive_beam(&[0.0, 0.0], 2.0, 1.0).is_err());
    }

    #[test]
    fn numeric_fallback_matches_closed_form() {
        let u = Strategy::cobb_douglas(vec![0.2, 0.5, 0.3]).unwrap();
        let alpha = [1.3, 0.4, 2.0];
        let closed = naive_waveform(&u, &alpha).unwrap();
        let num = maximize_numeric(&u, &FeasibleSet::Budget(alpha.to_vec())).unwrap();
        assert!((u.value(&closed) - u.value(&num)).abs() < 1e-8);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_experiment(Scenario::Beam, 8, 4, 11).unwrap();
        let b = generate_experiment(Scenario::Beam, 8, 4, 11).unwrap();
        assert_eq!(a.dataset, b.dataset);
        for (r, g) in a.dataset.responses().iter().zip(a.dataset.budgets().unwrap()) {
            assert!((dot(r, r).sqrt() - g).abs() < 1e-12);
        }
        assert!(Scenario::parse("radar").is_err());
    }
}
