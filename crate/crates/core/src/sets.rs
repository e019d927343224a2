//! Per-step feasible response sets and exact Euclidean projections onto them.

use crate::error::{Error, Result};
use crate::numeric::dot;

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// `{β ≥ 0 : w'β ≤ 1}`.
    Budget(Vec<f64>),
    /// `{β ≥ 0 : w'β = 1}`.
    Hyperplane(Vec<f64>),
    /// `{β ≥ 0 : ‖β‖_κ ≤ radius}`.
    NormBall { kappa: f64, radius: f64 },
    /// Intersection, projected by Dykstra's alternating scheme.
    Intersection(Vec<FeasibleSet>),
}

impl FeasibleSet {
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::Budget(w) => {
                let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
                if dot(w, &clipped) <= 1.0 {
                    clipped
                } else {
                    weighted_simplex(x, w)
                }
            }
            FeasibleSet::Hyperplane(w) => weighted_simplex(x, w),
            FeasibleSet::NormBall { kappa, radius } => norm_ball(x, *kappa, *radius),
            FeasibleSet::Intersection(parts) => dykstra(parts, x),
        }
    }

    /// Membership with absolute tolerance.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.iter().any(|v| *v < -tol) {
            return false;
        }
        match self {
            FeasibleSet::Budget(w) => dot(w, x) <= 1.0 + tol,
            FeasibleSet::Hyperplane(w) => (dot(w, x) - 1.0).abs() <= tol,
            FeasibleSet::NormBall { kappa, radius } => knorm(x, *kappa) <= radius + tol,
            FeasibleSet::Intersection(parts) => parts.iter().all(|p| p.contains(x, tol)),
        }
    }
}

fn knorm(x: &[f64], kappa: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(kappa)).sum::<f64>().powf(1.0 / kappa)
}

/// Projection onto `{β ≥ 0 : w'β = 1}` with `w > 0`, by the sorted-threshold method:
/// `β_i = max(0, x_i − τ w_i)` with τ chosen so the budget is exactly spent.
pub(crate) fn weighted_simplex(x: &[f64], w: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| (x[b] / w[b]).total_cmp(&(x[a] / w[a])));
    let mut num = 0.0;
    let mut den = 0.0;
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        num += w[i] * x[i];
        den += w[i] * w[i];
        let cand = (num - 1.0) / den;
        let next_ok = match order.get(k + 1) {
            Some(&j) => cand >= x[j] / w[j],
            None => true,
        };
        if cand < x[i] / w[i] && next_ok {
            tau = cand;
            break;
        }
        tau = cand;
    }
    let mut out: Vec<f64> = x.iter().zip(w).map(|(xi, wi)| (xi - tau * wi).max(0.0)).collect();
    // Remove the last rounding error from the equality.
    let spend = dot(w, &out);
    if spend > 0.0 {
        let f = 1.0 / spend;
        out.iter_mut().for_each(|v| *v *= f);
    }
    out
}

fn norm_ball(x: &[f64], kappa: f64, radius: f64) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let n = knorm(&clipped, kappa);
    if n <= radius {
        return clipped;
    }
    if (kappa - 2.0).abs() < 1e-15 {
        return clipped.iter().map(|v| v * radius / n).collect();
    }
    // β_i + μ κ β_i^{κ-1} = x_i per coordinate; bisect on μ for ‖β‖_κ = radius.
    let coord = |xi: f64, mu: f64| -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, xi);
        for _ in 0..100 {
            let b = 0.5 * (lo + hi);
            if b + mu * kappa * b.powf(kappa - 1.0) > xi {
                hi = b;
            } else {
                lo = b;
            }
        }
        0.5 * (lo + hi)
    };
    let eval = |mu: f64| -> Vec<f64> { clipped.iter().map(|&xi| coord(xi, mu)).collect() };
    let mut hi = 1.0;
    while knorm(&eval(hi), kappa) > radius {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if knorm(&eval(mid), kappa) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    eval(hi)
}

fn dykstra(parts: &[FeasibleSet], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut y = x.to_vec();
    let mut incr = vec![vec![0.0; m]; parts.len()];
    for _ in 0..5000 {
        let prev = y.clone();
        for (p, inc) in parts.iter().zip(incr.iter_mut()) {
            let shifted: Vec<f64> = y.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
            let z = p.project(&shifted);
            for i in 0..m {
                inc[i] = shifted[i] - z[i];
            }
            y = z;
        }
        let change: f64 = y.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < 1e-15 && parts.iter().all(|p| p.contains(&y, 1e-12)) {
            break;
        }
    }
    y
}

/// Checks that weights are strictly positive.
pub(crate) fn positive_weights(w: &[f64]) -> Result<()> {
    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("weights must be strictly positive".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simplex_examples() {
        assert_eq!(weighted_simplex(&[2.0, 0.0], &[1.0, 1.0]), vec![1.0, 0.0]);
        assert_eq!(weighted_simplex(&[0.5, 0.5], &[1.0, 1.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn budget_projection_is_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..2.0)).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..2.0)).collect();
            let set = FeasibleSet::Budget(w.clone());
            let p = set.project(&x);
            assert!(set.contains(&p, 1e-12));
            let dp: f64 = p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
            for _ in 0..50 {
                let mut y: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
                let s = dot(&w, &y);
                if s > 1.0 {
                    y.iter_mut().for_each(|v| *v /= s);
                }
                let dy: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                assert!(dp <= dy + 1e-12);
            }
        }
    }

    #[test]
    fn ball_projection() {
        let set = FeasibleSet::NormBall { kappa: 2.0, radius: 1.0 };
        let p = set.project(&[3.0, -1.0, 4.0]);
        assert!((p[0] - 0.6).abs() < 1e-15 && p[1] == 0.0 && (p[2] - 0.8).abs() < 1e-15);
        let set3 = FeasibleSet::NormBall { kappa: 3.0, radius: 1.0 };
        let q = set3.project(&[2.0, 1.0]);
        assert!((knorm(&q, 3.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dykstra_intersection() {
        let set = FeasibleSet::Intersection(vec![
            FeasibleSet::Budget(vec![1.0, 1.0]),
            FeasibleSet::NormBall { kappa: 2.0, radius: 0.5 },
        ]);
        let p = set.project(&[2.0, 2.0]);
        let s = 0.5 / 2f64.sqrt();
        assert!((p[0] - s).abs() < 1e-9 && (p[1] - s).abs() < 1e-9);
        assert!(set.contains(&p, 1e-10));
    }
}
