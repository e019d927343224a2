//! Parametric utility and constraint families with gradients.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Value-and-gradient evaluator for user-supplied strategies.
pub type Evaluator = Arc<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>;

/// Parametric family of a [`Strategy`].
#[derive(Clone)]
pub enum Family {
    /// `Σ √β_i`.
    SqrtSum,
    /// `Σ β_i²`.
    QuadraticSum,
    /// `Π β_i^{a_i}` with nonnegative exponents.
    CobbDouglas(Vec<f64>),
    /// `w'β`.
    LinearBudget(Vec<f64>),
    /// `‖β‖_κ`, κ > 1.
    KNorm(f64),
    Custom(Evaluator),
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::SqrtSum => write!(f, "SqrtSum"),
            Family::QuadraticSum => write!(f, "QuadraticSum"),
            Family::CobbDouglas(a) => write!(f, "CobbDouglas({a:?})"),
            Family::LinearBudget(w) => write!(f, "LinearBudget({w:?})"),
            Family::KNorm(k) => write!(f, "KNorm({k})"),
            Family::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Utility,
    Constraint,
}

/// A utility or constraint function. Negative arguments are clamped to zero
/// for the families that are only defined on the orthant (sqrt, Cobb-Douglas).
#[derive(Debug, Clone)]
pub struct Strategy {
    pub family: Family,
    pub role: Role,
}

const FD_STEP: f64 = 1e-7;

impl Strategy {
    pub fn new(family: Family, role: Role) -> Result<Self> {
        match &family {
            Family::CobbDouglas(a) | Family::LinearBudget(a) => {
                if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::InvalidArgument(
                        "weights must be finite and nonnegative".into(),
                    ));
                }
            }
            Family::KNorm(k)
                if !(k.is_finite() && *k > 1.0) => {
                    return Err(Error::InvalidArgument(format!("norm order {k} must exceed 1")));
                }
            _ => {}
        }
        Ok(Strategy { family, role })
    }

    pub fn sqrt_sum() -> Self {
        Strategy { family: Family::SqrtSum, role: Role::Utility }
    }

    pub fn quadratic_sum() -> Self {
        Strategy { family: Family::QuadraticSum, role: Role::Utility }
    }

    pub fn cobb_douglas(exponents: Vec<f64>) -> Result<Self> {
        Self::new(Family::CobbDouglas(exponents), Role::Utility)
    }

    pub fn k_norm(kappa: f64) -> Result<Self> {
        Self::new(Family::KNorm(kappa), Role::Constraint)
    }

    pub fn linear_budget(weights: Vec<f64>) -> Result<Self> {
        Self::new(Family::LinearBudget(weights), Role::Constraint)
    }

    pub fn custom(role: Role, f: impl Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static) -> Self {
        Strategy { family: Family::Custom(Arc::new(f)), role }
    }

    /// The constant-zero utility, whose projection is degenerate.
    pub fn constant(c: f64) -> Self {
        Self::custom(Role::Utility, move |b| (c, vec![0.0; b.len()]))
    }

    pub fn value(&self, b: &[f64]) -> f64 {
        match &self.family {
            Family::SqrtSum => b.iter().map(|x| x.max(0.0).sqrt()).sum(),
            Family::QuadraticSum => b.iter().map(|x| x * x).sum(),
            Family::CobbDouglas(a) => cobb_douglas(a, b),
            Family::LinearBudget(w) => w.iter().zip(b).map(|(w, x)| w * x).sum(),
            Family::KNorm(k) => b.iter().map(|x| x.abs().powf(*k)).sum::<f64>().powf(1.0 / k),
            Family::Custom(f) => f(b).0,
        }
    }

    /// Analytic gradient. Entries may be infinite or NaN on the orthant boundary;
    /// use [`Strategy::gradient`] for a finite answer everywhere.
    pub fn analytic_gradient(&self, b: &[f64]) -> Vec<f64> {
        match &self.family {
            Family::SqrtSum => b.iter().map(|x| 0.5 / x.sqrt()).collect(),
            Family::QuadraticSum => b.iter().map(|x| 2.0 * x).collect(),
            Family::CobbDouglas(a) => {
                let v = cobb_douglas(a, b);
                a.iter()
                    .zip(b)
                    .map(|(ai, x)| if *ai == 0.0 { 0.0 } else { ai * v / x })
                    .collect()
            }
            Family::LinearBudget(w) => w.clone(),
            Family::KNorm(k) => {
                let n = self.value(b);
                if n == 0.0 {
                    return vec![0.0; b.len()];
                }
                b.iter()
                    .map(|x| x.signum() * x.abs().powf(k - 1.0) / n.powf(k - 1.0))
                    .collect()
            }
            Family::Custom(f) => f(b).1,
        }
    }

    /// Gradient with a one-sided finite-difference fallback for coordinates on
    /// the boundary (β_i ≤ 0) or where the analytic value is not finite.
    pub fn gradient(&self, b: &[f64]) -> Vec<f64> {
        let mut g = self.analytic_gradient(b);
        let base = self.value(b);
        for i in 0..b.len() {
            if b[i] <= 0.0 || !g[i].is_finite() {
                let mut x = b.to_vec();
                x[i] = b[i].max(0.0) + FD_STEP;
                g[i] = (self.value(&x) - base) / FD_STEP;
            }
        }
        g
    }

    /// Central finite-difference gradient, used by tests and custom fallbacks.
    pub fn fd_gradient(&self, b: &[f64], h: f64) -> Vec<f64> {
        (0..b.len())
            .map(|i| {
                let mut p = b.to_vec();
                let mut q = b.to_vec();
                p[i] += h;
                q[i] -= h;
                (self.value(&p) - self.value(&q)) / (2.0 * h)
            })
            .collect()
    }
}

fn cobb_douglas(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(ai, x)| if *ai == 0.0 { 1.0 } else { x.max(0.0).powf(*ai) })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<Strategy> {
        vec![
            Strategy::sqrt_sum(),
            Strategy::quadratic_sum(),
            Strategy::cobb_douglas(vec![0.3, 0.5, 0.2, 1.0]).unwrap(),
            Strategy::linear_budget(vec![1.0, 2.0, 0.5, 0.1]).unwrap(),
            Strategy::k_norm(2.0).unwrap(),
            Strategy::k_norm(3.5).unwrap(),
        ]
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in families() {
            for _ in 0..50 {
                let b: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..2.0)).collect();
                let g = s.gradient(&b);
                let fd = s.fd_gradient(&b, 1e-6);
                for (x, y) in g.iter().zip(&fd) {
                    let rel = (x - y).abs() / x.abs().max(y.abs()).max(1e-8);
                    assert!(rel <= 1e-5, "{:?}: {x} vs {y}", s.family);
                }
            }
        }
    }

    #[test]
    fn boundary_gradient_is_finite() {
        let s = Strategy::sqrt_sum();
        let g = s.gradient(&[0.0, 1.0]);
        assert!(g.iter().all(|x| x.is_finite()));
        assert!(g[0] > 100.0);
        let cd = Strategy::cobb_douglas(vec![0.5, 0.5]).unwrap();
        assert!(cd.gradient(&[0.0, 0.0]).iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Strategy::k_norm(1.0).is_err());
        assert!(Strategy::cobb_douglas(vec![-1.0]).is_err());
    }

    #[test]
    fn monotone_on_orthant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for s in families() {
            for _ in 0..50 {
                let b: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..2.0)).collect();
                let mut c = b.clone();
                let i = rng.random_range(0..4);
                c[i] += rng.random_range(0.0..1.0);
                assert!(s.value(&c) >= s.value(&b) - 1e-12);
            }
        }
    }
}
