//! Probe/response datasets and their text file format.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::dot;
use crate::strategy::Strategy;

/// Which side of the radar's decision problem the observer knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// Linear budgets α_t'β ≤ 1 are known; the utility is reconstructed.
    ConstraintKnown,
    /// Per-step Cobb-Douglas utilities with exponents α_t are known; the constraint is reconstructed.
    UtilityKnown,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::ConstraintKnown => "constraint-known",
            DatasetKind::UtilityKnown => "utility-known",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "constraint-known" => Some(DatasetKind::ConstraintKnown),
            "utility-known" => Some(DatasetKind::UtilityKnown),
            _ => None,
        }
    }
}

/// Batch of probe/response pairs seen by the adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResponseDataset {
    kind: DatasetKind,
    probes: Vec<Vec<f64>>,
    responses: Vec<Vec<f64>>,
    budgets: Option<Vec<f64>>,
    observed: bool,
}

/// Tolerance on the budget check for constraint-known datasets.
pub const BUDGET_TOL: f64 = 1e-8;

impl ProbeResponseDataset {
    /// Builds a dataset of exact responses and checks every invariant.
    pub fn new(
        kind: DatasetKind,
        probes: Vec<Vec<f64>>,
        responses: Vec<Vec<f64>>,
        budgets: Option<Vec<f64>>,
    ) -> Result<Self> {
        let d = Self::observed(kind, probes, responses, budgets)?;
        d.check_exact()?;
        Ok(ProbeResponseDataset { observed: false, ..d })
    }

    /// Builds a dataset of measured responses (noisy or misspecified). Only
    /// shapes and probes are checked; responses may leave the orthant.
    pub fn observed(
        kind: DatasetKind,
        probes: Vec<Vec<f64>>,
        responses: Vec<Vec<f64>>,
        budgets: Option<Vec<f64>>,
    ) -> Result<Self> {
        let k = probes.len();
        if k == 0 {
            return Err(Error::InvalidDataset("horizon K must be at least 1".into()));
        }
        if responses.len() != k {
            return Err(Error::InvalidDataset(format!(
                "{k} probes but {} responses",
                responses.len()
            )));
        }
        let m = probes[0].len();
        if m == 0 {
            return Err(Error::InvalidDataset("dimension m must be at least 1".into()));
        }
        for (t, (a, b)) in probes.iter().zip(&responses).enumerate() {
            if a.len() != m || b.len() != m {
                return Err(Error::InvalidDataset(format!("record {t} is not {m}-dimensional")));
            }
            if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidDataset(format!("probe {t} has a negative or non-finite entry")));
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidDataset(format!("response {t} is not finite")));
            }
        }
        if let Some(g) = &budgets {
            if g.len() != k {
                return Err(Error::InvalidDataset(format!("{k} probes but {} budgets", g.len())));
            }
            if g.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::InvalidDataset("budgets must be positive".into()));
            }
        }
        Ok(ProbeResponseDataset { kind, probes, responses, budgets, observed: true })
    }

    fn check_exact(&self) -> Result<()> {
        for (t, b) in self.responses.iter().enumerate() {
            if b.iter().any(|x| *x < 0.0) {
                return Err(Error::InvalidDataset(format!("response {t} has a negative entry")));
            }
            if self.kind == DatasetKind::ConstraintKnown {
                let spend = dot(&self.probes[t], b);
                if spend > 1.0 + BUDGET_TOL {
                    return Err(Error::InvalidDataset(format!(
                        "response {t} exceeds its budget (α'β = {spend})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same probes and budgets with new exact responses.
    pub fn with_responses(&self, responses: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.kind, self.probes.clone(), responses, self.budgets.clone())
    }

    /// Same probes and budgets with new measured responses.
    pub fn with_observed_responses(&self, responses: Vec<Vec<f64>>) -> Result<Self> {
        Self::observed(self.kind, self.probes.clone(), responses, self.budgets.clone())
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.probes.len()
    }

    pub fn dim(&self) -> usize {
        self.probes[0].len()
    }

    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    pub fn responses(&self) -> &[Vec<f64>] {
        &self.responses
    }

    pub fn budgets(&self) -> Option<&[f64]> {
        self.budgets.as_deref()
    }

    pub fn is_observed(&self) -> bool {
        self.observed
    }

    /// The known per-step function h_t: α_t'β − 1 for constraint-known data,
    /// the Cobb-Douglas utility with exponents α_t for utility-known data.
    pub fn anchor(&self, t: usize) -> Strategy {
        match self.kind {
            DatasetKind::ConstraintKnown => {
                Strategy::linear_budget(self.probes[t].clone()).expect("probes validated")
            }
            DatasetKind::UtilityKnown => {
                Strategy::cobb_douglas(self.probes[t].clone()).expect("probes validated")
            }
        }
    }

    /// h_t(β) including the −1 offset of the linear budget.
    pub fn anchor_value(&self, t: usize, b: &[f64]) -> f64 {
        match self.kind {
            DatasetKind::ConstraintKnown => dot(&self.probes[t], b) - 1.0,
            DatasetKind::UtilityKnown => self.anchor(t).value(b),
        }
    }

    pub fn anchor_gradient(&self, t: usize, b: &[f64]) -> Vec<f64> {
        match self.kind {
            DatasetKind::ConstraintKnown => self.probes[t].clone(),
            DatasetKind::UtilityKnown => self.anchor(t).gradient(b),
        }
    }

    /// Serializes to the line-oriented text format (17 significant digits).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "cogmask-dataset 1");
        let _ = writeln!(s, "kind {}", self.kind.as_str());
        let _ = writeln!(s, "K {}", self.horizon());
        let _ = writeln!(s, "m {}", self.dim());
        let _ = writeln!(s, "budgets {}", if self.budgets.is_some() { "yes" } else { "no" });
        let _ = writeln!(s, "observed {}", if self.observed { "yes" } else { "no" });
        let _ = writeln!(s, "# alpha[1..m] beta[1..m] [gamma]");
        for t in 0..self.horizon() {
            let mut fields: Vec<String> = self.probes[t]
                .iter()
                .chain(&self.responses[t])
                .map(|x| format!("{x:.16e}"))
                .collect();
            if let Some(g) = &self.budgets {
                fields.push(format!("{:.16e}", g[t]));
            }
            let _ = writeln!(s, "{}", fields.join(" "));
        }
        s
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let perr = |line: usize, column: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            column,
            message,
        };
        let eof = text.lines().count() + 1;
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

        let mut header = |key: &str| -> Result<(usize, String)> {
            let (n, l) = lines
                .next()
                .ok_or_else(|| perr(eof, 1, format!("missing header `{key}`")))?;
            let mut it = l.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(k), Some(v), None) if k == key => Ok((n, v.to_string())),
                _ => Err(perr(n, 1, format!("expected `{key} <value>`"))),
            }
        };
        let (n, v) = header("cogmask-dataset")?;
        if v != "1" {
            return Err(perr(n, 17, format!("unsupported format version {v}")));
        }
        let (n, v) = header("kind")?;
        let kind = DatasetKind::parse(&v).ok_or_else(|| perr(n, 6, format!("unknown kind `{v}`")))?;
        let (n, v) = header("K")?;
        let k: usize = v.parse().map_err(|_| perr(n, 3, format!("bad horizon `{v}`")))?;
        let (n, v) = header("m")?;
        let m: usize = v.parse().map_err(|_| perr(n, 3, format!("bad dimension `{v}`")))?;
        let (n, v) = header("budgets")?;
        let has_budgets = match v.as_str() {
            "yes" => true,
            "no" => false,
            _ => return Err(perr(n, 9, format!("expected yes/no, got `{v}`"))),
        };
        let (n, v) = header("observed")?;
        let observed = match v.as_str() {
            "yes" => true,
            "no" => false,
            _ => return Err(perr(n, 10, format!("expected yes/no, got `{v}`"))),
        };

        let width = 2 * m + usize::from(has_budgets);
        let mut probes = Vec::with_capacity(k);
        let mut responses = Vec::with_capacity(k);
        let mut budgets = Vec::new();
        for (n, l) in lines {
            let mut vals = Vec::with_capacity(width);
            let mut col = 1;
            for tok in l.split(' ') {
                if !tok.is_empty() {
                    let x: f64 = tok.parse().map_err(|_| perr(n, col, format!("bad number `{tok}`")))?;
                    vals.push(x);
                }
                col += tok.len() + 1;
            }
            if vals.len() != width {
                return Err(perr(n, 1, format!("expected {width} fields, found {}", vals.len())));
            }
            probes.push(vals[..m].to_vec());
            responses.push(vals[m..2 * m].to_vec());
            if has_budgets {
                budgets.push(vals[2 * m]);
            }
        }
        if probes.len() != k {
            return Err(perr(eof, 1, format!("header says K = {k} but {} records follow", probes.len())));
        }
        let budgets = has_budgets.then_some(budgets);
        if observed {
            Self::observed(kind, probes, responses, budgets)
        } else {
            Self::new(kind, probes, responses, budgets)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn validation() {
        assert!(ProbeResponseDataset::new(
            DatasetKind::ConstraintKnown,
            vec![vec![1.0]],
            vec![vec![1.5]],
            None
        )
        .is_err());
        assert!(ProbeResponseDataset::new(
            DatasetKind::ConstraintKnown,
            vec![vec![1.0]],
            vec![vec![-0.1]],
            None
        )
        .is_err());
        assert!(ProbeResponseDataset::observed(
            DatasetKind::ConstraintKnown,
            vec![vec![1.0]],
            vec![vec![-0.1]],
            None
        )
        .is_ok());
        assert!(ProbeResponseDataset::new(DatasetKind::ConstraintKnown, vec![], vec![], None).is_err());
    }

    #[test]
    fn round_trip() {
        let d = garp();
        let back = ProbeResponseDataset::from_text(&d.to_text(), "mem").unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn parse_error_has_position() {
        let text = garp().to_text().replace("5.0000000000000000e-1", "oops");
        match ProbeResponseDataset::from_text(&text, "x.txt") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 8);
                assert!(column > 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
