//! Dense feasibility LP: find `x ≥ lower` with `A x ≤ b`.
//!
//! Phase one of the simplex method on a condensed (Tucker) tableau with a
//! single artificial column, Bland's rule for anti-cycling. The tableau holds
//! only structural columns, so memory is rows × (n + 2) even for the
//! O(K²)-row Afriat systems.

use crate::error::{Error, Result};

/// `rows[i]' x ≤ rhs[i]` for all i, `x ≥ lower`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// A vertex of the feasible region and its worst row violation.
    Feasible { x: Vec<f64>, residual: f64 },
    Infeasible,
}

const PIVOT_EPS: f64 = 1e-11;
/// Phase-one objective below which the system counts as feasible.
pub const FEAS_TOL: f64 = 1e-8;

impl LinearSystem {
    pub fn new(n: usize, lower: Vec<f64>) -> Self {
        assert_eq!(lower.len(), n);
        LinearSystem { n, rows: Vec::new(), rhs: Vec::new(), lower }
    }

    pub fn push_le(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.n);
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    /// Largest row violation at `x`, each row scaled by its largest coefficient.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.rows.iter().zip(&self.rhs) {
            let scale = row_scale(a);
            let v = (a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - b) / scale;
            worst = worst.max(v);
        }
        for (xi, li) in x.iter().zip(&self.lower) {
            worst = worst.max(li - xi);
        }
        worst
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.n;
        let m = self.rows.len();
        // Shift x = lower + y, scale each row, and lay out the tableau:
        // basic_i = T[i][rhs] + Σ_j T[i][j] nonbasic_j.
        let width = n + 2;
        let art = n;
        let rhs_col = n + 1;
        let mut t = vec![0.0; m * width];
        for i in 0..m {
            let a = &self.rows[i];
            let scale = row_scale(a);
            let shift: f64 = a.iter().zip(&self.lower).map(|(p, q)| p * q).sum();
            let r = (self.rhs[i] - shift) / scale;
            if a.iter().all(|x| *x == 0.0) && r < -FEAS_TOL {
                return Ok(LpOutcome::Infeasible);
            }
            let row = &mut t[i * width..(i + 1) * width];
            for j in 0..n {
                row[j] = -a[j] / scale;
            }
            row[art] = 1.0;
            row[rhs_col] = r;
        }
        // Variable ids: y_j = j, artificial = n, slack_i = n + 1 + i.
        let mut basic: Vec<usize> = (0..m).map(|i| n + 1 + i).collect();
        let mut nonbasic: Vec<usize> = (0..=n).collect();

        let worst = (0..m)
            .min_by(|&a, &b| t[a * width + rhs_col].total_cmp(&t[b * width + rhs_col]))
            .filter(|&i| t[i * width + rhs_col] < 0.0);
        if let Some(k) = worst {
            pivot(&mut t, width, m, k, art);
            std::mem::swap(&mut basic[k], &mut nonbasic[art]);
            let limit = 50 * (m + n) + 1000;
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > limit {
                    return Err(Error::Solver(format!("simplex exceeded {limit} pivots")));
                }
                let Some(obj) = basic.iter().position(|&v| v == n) else {
                    break;
                };
                let orow = &t[obj * width..(obj + 1) * width];
                if orow[rhs_col] <= FEAS_TOL * 1e-3 {
                    break;
                }
                // Bland: smallest variable id with a negative reduced cost.
                let entering = (0..=n)
                    .filter(|&j| orow[j] < -PIVOT_EPS)
                    .min_by_key(|&j| nonbasic[j]);
                let Some(col) = entering else {
                    if orow[rhs_col] > FEAS_TOL {
                        return Ok(LpOutcome::Infeasible);
                    }
                    break;
                };
                let mut leave: Option<(usize, f64)> = None;
                for i in 0..m {
                    let c = t[i * width + col];
                    if c < -PIVOT_EPS {
                        let ratio = t[i * width + rhs_col].max(0.0) / -c;
                        leave = match leave {
                            None => Some((i, ratio)),
                            Some((bi, br)) => {
                                if ratio < br - 1e-14 || (ratio <= br + 1e-14 && basic[i] < basic[bi]) {
                                    Some((i, ratio))
                                } else {
                                    Some((bi, br))
                                }
                            }
                        };
                    }
                }
                let Some((row, _)) = leave else {
                    return Err(Error::Solver("phase-one objective unbounded".into()));
                };
                pivot(&mut t, width, m, row, col);
                std::mem::swap(&mut basic[row], &mut nonbasic[col]);
            }
        }
        let mut x = self.lower.clone();
        for (i, &v) in basic.iter().enumerate() {
            if v < n {
                x[v] += t[i * width + rhs_col].max(0.0);
            }
        }
        let residual = self.residual(&x);
        if residual > 1e3 * FEAS_TOL {
            return Err(Error::Solver(format!("vertex violates the system by {residual:.3e}")));
        }
        Ok(LpOutcome::Feasible { x, residual })
    }
}

fn row_scale(a: &[f64]) -> f64 {
    let s = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Jordan exchange of the basic variable in `r` with the nonbasic in `c`.
fn pivot(t: &mut [f64], width: usize, m: usize, r: usize, c: usize) {
    let p = t[r * width + c];
    {
        let row = &mut t[r * width..(r + 1) * width];
        for (j, v) in row.iter_mut().enumerate() {
            *v = if j == c { 1.0 / p } else { -*v / p };
        }
    }
    let prow: Vec<f64> = t[r * width..(r + 1) * width].to_vec();
    for i in 0..m {
        if i == r {
            continue;
        }
        let row = &mut t[i * width..(i + 1) * width];
        let f = row[c];
        if f == 0.0 {
            continue;
        }
        for j in 0..width {
            if j == c {
                row[j] = f * prow[c];
            } else {
                row[j] += f * prow[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_feasible_at_lower_bound() {
        let mut s = LinearSystem::new(2, vec![0.0, 0.0]);
        s.push_le(vec![1.0, 1.0], 1.0);
        match s.solve().unwrap() {
            LpOutcome::Feasible { x, .. } => assert_eq!(x, vec![0.0, 0.0]),
            _ => panic!(),
        }
    }

    #[test]
    fn needs_pivots() {
        // x + y >= 2, x <= 1.5, y <= 1.5
        let mut s = LinearSystem::new(2, vec![0.0, 0.0]);
        s.push_le(vec![-1.0, -1.0], -2.0);
        s.push_le(vec![1.0, 0.0], 1.5);
        s.push_le(vec![0.0, 1.0], 1.5);
        match s.solve().unwrap() {
            LpOutcome::Feasible { x, residual } => {
                assert!(x[0] + x[1] >= 2.0 - 1e-9 && x[0] <= 1.5 + 1e-9 && x[1] <= 1.5 + 1e-9);
                assert!(residual <= 1e-9);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn detects_infeasible() {
        // x + y >= 3 with x, y <= 1
        let mut s = LinearSystem::new(2, vec![0.0, 0.0]);
        s.push_le(vec![-1.0, -1.0], -3.0);
        s.push_le(vec![1.0, 0.0], 1.0);
        s.push_le(vec![0.0, 1.0], 1.0);
        assert_eq!(s.solve().unwrap(), LpOutcome::Infeasible);
        let mut z = LinearSystem::new(1, vec![0.0]);
        z.push_le(vec![0.0], -1.0);
        assert_eq!(z.solve().unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn respects_lower_bounds() {
        // x - y <= -1, x >= 2 -> y >= 3
        let mut s = LinearSystem::new(2, vec![2.0, 0.0]);
        s.push_le(vec![1.0, -1.0], -1.0);
        match s.solve().unwrap() {
            LpOutcome::Feasible { x, .. } => {
                assert!(x[0] >= 2.0 && x[1] >= x[0] + 1.0 - 1e-9);
            }
            _ => panic!(),
        }
    }
}
