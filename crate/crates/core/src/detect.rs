//! Noise-aware revealed-preference detectors.
//!
//! The adversary observes `β̂_t = β_t + ω_t` and rejects "cognitive" when the
//! smallest relaxation `φ*` making the Afriat system feasible exceeds the
//! `(1 − γ)` quantile of a noise-only bound `L`.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{DatasetKind, ProbeResponseDataset};
use crate::error::{Error, Result};
use crate::numeric::dot;
use crate::rp::{build_afriat_system, project_strategy, Direction, Projection, DELTA_POS};
use crate::strategy::Strategy;

pub type Sampler = Arc<dyn Fn(&mut ChaCha8Rng, usize) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum NoiseLaw {
    GaussianIid { variance: f64 },
    Degenerate,
    Custom(Sampler),
}

impl fmt::Debug for NoiseLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseLaw::GaussianIid { variance } => write!(f, "GaussianIid({variance})"),
            NoiseLaw::Degenerate => write!(f, "Degenerate"),
            NoiseLaw::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Measurement noise on each response.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub law: NoiseLaw,
    pub dim: usize,
}

impl NoiseModel {
    pub fn gaussian(variance: f64, dim: usize) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::InvalidArgument(format!("variance {variance} must be nonnegative")));
        }
        Ok(NoiseModel { law: NoiseLaw::GaussianIid { variance }, dim })
    }

    pub fn degenerate(dim: usize) -> Self {
        NoiseModel { law: NoiseLaw::Degenerate, dim }
    }

    pub fn custom(dim: usize, f: impl Fn(&mut ChaCha8Rng, usize) -> Vec<f64> + Send + Sync + 'static) -> Self {
        NoiseModel { law: NoiseLaw::Custom(Arc::new(f)), dim }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.law {
            NoiseLaw::Degenerate => vec![0.0; self.dim],
            NoiseLaw::GaussianIid { variance } => {
                let n = Normal::new(0.0, variance.sqrt()).expect("validated variance");
                (0..self.dim).map(|_| n.sample(rng)).collect()
            }
            NoiseLaw::Custom(f) => {
                let v = f(rng, self.dim);
                assert_eq!(v.len(), self.dim, "custom sampler returned the wrong dimension");
                v
            }
        }
    }

    pub fn sample_profile(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..k).map(|_| self.sample(rng)).collect()
    }
}

/// RNG for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const QUANTILE_STREAM: u64 = 0;
const REALIZATION_STREAM: u64 = 1;
const TRIAL_STREAM_BASE: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Significance level γ.
    pub significance: f64,
    /// Monte-Carlo draws for the threshold quantile.
    pub quantile_samples: usize,
    /// Frozen noise realizations for the conditional Type-I estimate.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { significance: 0.1, quantile_samples: 10_000, replicates: 50, seed: 0 }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::InvalidArgument(format!("significance {} must lie in (0, 1)", self.significance)));
        }
        if self.quantile_samples == 0 || self.replicates == 0 {
            return Err(Error::InvalidArgument("sample counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// H0: responses are consistent with constrained utility maximization.
    Cognitive,
    /// H1: rejected.
    NotCognitive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
}

/// Infimum of ε ≥ 0 for which the ε-relaxed Afriat system of the (noisy)
/// dataset is feasible, computed exactly from cycle bottlenecks. The feasible
/// set is open at φ* unless the binding cycle's relaxed terms tie.
pub fn stat_phi(d: &ProbeResponseDataset) -> Result<f64> {
    Ok(build_afriat_system(d).min_relaxation())
}

/// Smallest ε for which θ fixed at `projection` satisfies the relaxed system.
pub fn stat_phi_conditional(d: &ProbeResponseDataset, projection: &Projection) -> f64 {
    let sys = build_afriat_system(d);
    let k = d.horizon();
    let theta = &projection.theta;
    let mut phi = 0.0f64;
    for r in &sys.rows {
        let lam = theta[k + r.t].max(DELTA_POS);
        let gap = (theta[r.s] - theta[r.t]) / lam;
        let need = match sys.direction {
            Direction::LessEq => gap - r.data,
            Direction::GreaterEq => r.data - gap,
        };
        phi = phi.max(need);
    }
    phi
}

/// Which noise bound the threshold uses.
#[derive(Debug, Clone, Copy)]
pub enum NoiseStatistic<'a> {
    /// Linear budgets: `L_g = max_{s,t} α_t'(ω_t − ω_s)`.
    Budget,
    /// Cobb-Douglas utilities with β̂ held at the observed responses.
    Utility { observed: &'a [Vec<f64>] },
}

pub fn noise_statistic(probes: &[Vec<f64>], omega: &[Vec<f64>], variant: NoiseStatistic<'_>) -> f64 {
    let k = probes.len();
    let mut best = 0.0f64;
    match variant {
        NoiseStatistic::Budget => {
            for t in 0..k {
                let own = dot(&probes[t], &omega[t]);
                for s in 0..k {
                    best = best.max(own - dot(&probes[t], &omega[s]));
                }
            }
        }
        NoiseStatistic::Utility { observed } => {
            let clean: Vec<Vec<f64>> =
                observed.iter().zip(omega).map(|(b, w)| b.iter().zip(w).map(|(x, y)| x - y).collect()).collect();
            for t in 0..k {
                let u = Strategy::cobb_douglas(probes[t].clone()).expect("nonnegative probes");
                let (ot, ct) = (u.value(&observed[t]), u.value(&clean[t]));
                for s in 0..k {
                    let gap = (u.value(&observed[s]) - ot) - (u.value(&clean[s]) - ct);
                    best = best.max(gap);
                }
            }
        }
    }
    best
}

/// Empirical `(1 − γ)` quantile of the noise bound over `n_q` fresh draws.
pub fn quantile_threshold(
    probes: &[Vec<f64>],
    noise: &NoiseModel,
    gamma: f64,
    n_q: usize,
    variant: NoiseStatistic<'_>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let k = probes.len();
    let mut samples: Vec<f64> = (0..n_q.max(1))
        .map(|_| noise_statistic(probes, &noise.sample_profile(k, rng), variant))
        .collect();
    samples.sort_by(|a, b| a.total_cmp(b));
    order_statistic(&samples, 1.0 - gamma)
}

/// The ⌈p·n⌉-th smallest value of a sorted sample.
pub(crate) fn order_statistic(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[idx - 1]
}

fn variant_for(d: &ProbeResponseDataset) -> NoiseStatistic<'_> {
    match d.kind() {
        DatasetKind::ConstraintKnown => NoiseStatistic::Budget,
        DatasetKind::UtilityKnown => NoiseStatistic::Utility { observed: d.responses() },
    }
}

/// Runs the test on a noisy dataset; the threshold uses the config's seed.
pub fn run_detector(d: &ProbeResponseDataset, noise: &NoiseModel, config: &DetectorConfig) -> Result<DetectionOutcome> {
    config.validate()?;
    let mut rng = substream(config.seed, QUANTILE_STREAM);
    let threshold =
        quantile_threshold(d.probes(), noise, config.significance, config.quantile_samples, variant_for(d), &mut rng);
    let statistic = stat_phi(d)?;
    Ok(decide(statistic, threshold))
}

fn decide(statistic: f64, threshold: f64) -> DetectionOutcome {
    let decision = if statistic <= threshold { Decision::Cognitive } else { Decision::NotCognitive };
    DetectionOutcome { statistic, threshold, decision }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
    /// RNG substream that produced this trial's noise.
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Type1Estimate {
    pub rate: f64,
    pub stderr: f64,
    pub trials: usize,
    pub rejections: usize,
    pub records: Vec<TrialRecord>,
}

/// Empirical `P(H1 | H0)` over noisy copies of a dataset of exact naive responses.
pub fn estimate_type1(
    clean: &ProbeResponseDataset,
    noise: &NoiseModel,
    config: &DetectorConfig,
    trials: usize,
) -> Result<Type1Estimate> {
    config.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let k = clean.horizon();
    let budget_threshold = match clean.kind() {
        DatasetKind::ConstraintKnown => {
            let mut rng = substream(config.seed, QUANTILE_STREAM);
            Some(quantile_threshold(
                clean.probes(),
                noise,
                config.significance,
                config.quantile_samples,
                NoiseStatistic::Budget,
                &mut rng,
            ))
        }
        DatasetKind::UtilityKnown => None,
    };
    let mut records = Vec::with_capacity(trials);
    let mut rejections = 0;
    for trial in 0..trials {
        let stream = TRIAL_STREAM_BASE + trial as u64;
        let mut rng = substream(config.seed, stream);
        let omega = noise.sample_profile(k, &mut rng);
        let noisy = add_noise(clean, &omega)?;
        let threshold = match budget_threshold {
            Some(t) => t,
            None => quantile_threshold(
                clean.probes(),
                noise,
                config.significance,
                config.quantile_samples,
                NoiseStatistic::Utility { observed: noisy.responses() },
                &mut rng,
            ),
        };
        let out = decide(stat_phi(&noisy)?, threshold);
        if out.decision == Decision::NotCognitive {
            rejections += 1;
        }
        records.push(TrialRecord { trial, statistic: out.statistic, threshold, decision: out.decision, stream });
    }
    let rate = rejections as f64 / trials as f64;
    Ok(Type1Estimate {
        rate,
        stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
        trials,
        rejections,
        records,
    })
}

pub(crate) fn add_noise(d: &ProbeResponseDataset, omega: &[Vec<f64>]) -> Result<ProbeResponseDataset> {
    d.with_observed_responses(
        d.responses().iter().zip(omega).map(|(b, w)| b.iter().zip(w).map(|(x, y)| x + y).collect()).collect(),
    )
}

/// Conditional Type-I estimator over frozen noise realizations and a frozen
/// threshold, so the estimate is a deterministic function of the responses.
#[derive(Debug, Clone)]
pub struct ConditionalType1 {
    pub realizations: Vec<Vec<Vec<f64>>>,
    pub threshold: f64,
    template: ProbeResponseDataset,
}

impl ConditionalType1 {
    /// Freezes `config.replicates` realizations and the threshold. For
    /// utility-known data the threshold's β̂ is the reference responses plus
    /// the first frozen realization.
    pub fn new(reference: &ProbeResponseDataset, noise: &NoiseModel, config: &DetectorConfig) -> Result<Self> {
        config.validate()?;
        let k = reference.horizon();
        let mut rng = substream(config.seed, REALIZATION_STREAM);
        let realizations: Vec<Vec<Vec<f64>>> = (0..config.replicates).map(|_| noise.sample_profile(k, &mut rng)).collect();
        let observed = add_noise(reference, &realizations[0])?;
        let mut qrng = substream(config.seed, QUANTILE_STREAM);
        let threshold = quantile_threshold(
            reference.probes(),
            noise,
            config.significance,
            config.quantile_samples,
            variant_for(&observed),
            &mut qrng,
        );
        Ok(ConditionalType1 { realizations, threshold, template: reference.clone() })
    }

    /// Fraction of realizations whose conditional statistic exceeds the threshold.
    pub fn estimate(&self, s: &Strategy, responses: &[Vec<f64>]) -> Result<f64> {
        let d = self.template.with_observed_responses(responses.to_vec())?;
        let proj = project_strategy(s, &d)?;
        let mut hits = 0usize;
        for omega in &self.realizations {
            if stat_phi_conditional(&add_noise(&d, omega)?, &proj) > self.threshold {
                hits += 1;
            }
        }
        Ok(hits as f64 / self.realizations.len() as f64)
    }
}

pub fn conditional_type1_estimate(
    d: &ProbeResponseDataset,
    s: &Strategy,
    noise: &NoiseModel,
    config: &DetectorConfig,
) -> Result<f64> {
    ConditionalType1::new(d, noise, config)?.estimate(s, d.responses())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rp::InequalitySystem;
    use crate::scenarios::{generate_experiment, Scenario};

    fn garp() -> ProbeResponseDataset {
        ProbeResponseDataset::new(
            DatasetKind::ConstraintKnown,
            vec![vec![2.0, 1.0], vec![1.0, 2.0]],
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn garp_statistic() {
        assert_eq!(stat_phi(&garp()).unwrap(), 0.5);
        let noise = NoiseModel::degenerate(2);
        let cfg = DetectorConfig { quantile_samples: 1000, ..Default::default() };
        let out = run_detector(&garp(), &noise, &cfg).unwrap();
        assert_eq!(out.threshold, 0.0);
        assert_eq!(out.decision, Decision::NotCognitive);
    }

    /// Brute force: every simple cycle must not be strictly adverse at φ*,
    /// and some cycle is adverse just below it.
    fn cycle_oracle(sys: &InequalitySystem) -> f64 {
        let k = sys.horizon;
        let mut w = vec![vec![f64::NEG_INFINITY; k]; k];
        for r in &sys.rows {
            w[r.s][r.t] = match sys.direction {
                Direction::LessEq => -r.data,
                Direction::GreaterEq => r.data,
            };
        }
        fn walk(w: &[Vec<f64>], start: usize, at: usize, used: &mut Vec<bool>, bottleneck: f64, best: &mut f64) {
            for nxt in 0..w.len() {
                let b = bottleneck.min(w[at][nxt]);
                if nxt == start {
                    *best = best.max(b);
                } else if nxt > start && !used[nxt] {
                    used[nxt] = true;
                    walk(w, start, nxt, used, b, best);
                    used[nxt] = false;
                }
            }
        }
        let mut best = 0.0f64;
        for start in 0..k {
            let mut used = vec![false; k];
            used[start] = true;
            walk(&w, start, start, &mut used, f64::INFINITY, &mut best);
        }
        best
    }

    #[test]
    fn statistic_matches_cycle_enumeration() {
        for (scenario, var) in [(Scenario::WaveformU1, 0.3), (Scenario::Beam, 0.01)] {
            for seed in 0..10 {
                let ex = generate_experiment(scenario, 5, 3, seed).unwrap();
                let noise = NoiseModel::gaussian(var, 3).unwrap();
                let mut rng = substream(seed, 9);
                let noisy = add_noise(&ex.dataset, &noise.sample_profile(5, &mut rng)).unwrap();
                let sys = build_afriat_system(&noisy);
                let exact = stat_phi(&noisy).unwrap();
                assert!((exact - cycle_oracle(&sys)).abs() <= 1e-12);
                if exact > 1e-3 {
                    assert!(sys.relaxed(exact * 0.9).solve().unwrap().is_none());
                    assert!(sys.relaxed(exact * 1.1).solve().unwrap().is_some());
                }
                let proj = project_strategy(&ex.strategy, &ex.dataset).unwrap();
                assert!(stat_phi_conditional(&noisy, &proj) >= exact - 1e-9);
            }
        }
    }

    #[test]
    fn clean_data_accepted() {
        let ex = generate_experiment(Scenario::WaveformU1, 8, 4, 1).unwrap();
        assert_eq!(stat_phi(&ex.dataset).unwrap(), 0.0);
        let out = run_detector(&ex.dataset, &NoiseModel::degenerate(4), &DetectorConfig::default()).unwrap();
        assert_eq!(out.decision, Decision::Cognitive);
    }

    #[test]
    fn order_statistic_convention() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(order_statistic(&v, 0.9), 9.0);
        assert_eq!(order_statistic(&v, 0.95), 10.0);
        assert_eq!(order_statistic(&v, 0.0), 1.0);
    }

    #[test]
    fn determinism() {
        let ex = generate_experiment(Scenario::WaveformU1, 5, 4, 3).unwrap();
        let noise = NoiseModel::gaussian(0.3, 4).unwrap();
        let cfg = DetectorConfig { quantile_samples: 1000, seed: 42, ..Default::default() };
        let a = estimate_type1(&ex.dataset, &noise, &cfg, 20).unwrap();
        let b = estimate_type1(&ex.dataset, &noise, &cfg, 20).unwrap();
        assert_eq!(a, b);
    }
}
