//! Rank statistics for comparing language rankings across tasks.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::ledger::{Iso, TaskId};

/// Largest sample size whose p-value is computed by full enumeration.
pub const EXACT_MAX_N: usize = 8;
pub const SIGNIFICANCE: f64 = 0.05;
const EPS: f64 = 1e-12;

/// Ranks with 1 = largest value; tied values share the mean of their
/// positional ranks.
pub fn rank_vector(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Insufficient(format!(
            "ranking needs at least 2 values, got {}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("cannot rank non-finite value {v}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*b].total_cmp(&values[*a]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankVector {
    pub labels: Vec<Iso>,
    pub ranks: Vec<f64>,
}

impl RankVector {
    pub fn from_scores(scores: &BTreeMap<Iso, f64>) -> Result<Self> {
        let values: Vec<f64> = scores.values().copied().collect();
        Ok(RankVector {
            labels: scores.keys().copied().collect(),
            ranks: rank_vector(&values)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    TApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpearmanFit {
    pub rho: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n: usize,
    pub method: PMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Spearman {
    Defined(SpearmanFit),
    /// One input is constant, so rho is undefined.
    Degenerate { n: usize },
}

impl Spearman {
    pub fn fit(&self) -> Option<&SpearmanFit> {
        match self {
            Spearman::Defined(f) => Some(f),
            Spearman::Degenerate { .. } => None,
        }
    }

    pub fn rho(&self) -> Option<f64> {
        self.fit().map(|f| f.rho)
    }

    pub fn p_value(&self) -> Option<f64> {
        self.fit().map(|f| f.p_value)
    }

    pub fn is_significant(&self) -> bool {
        self.p_value().is_some_and(|p| p < SIGNIFICANCE)
    }
}

/// Pearson correlation, `None` when either side has zero variance.
fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Fraction of permutations of `ry` whose |rho| reaches |rho|.
fn exact_p(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    let mut perm = ry.to_vec();
    let n = perm.len();
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut visit = |p: &[f64]| {
        total += 1;
        if pearson(rx, p).is_some_and(|r| r.abs() >= rho.abs() - EPS) {
            hits += 1;
        }
    };
    // Heap's algorithm, iterative
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

fn t_approx_p(rho: f64, n: usize) -> f64 {
    if (1.0 - rho.abs()) < EPS {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Spearman rank correlation of two aligned samples. p is two-sided: exact
/// enumeration of all permutations when `n <= 8`, else the Student t
/// approximation with `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "spearman inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Insufficient(format!("spearman needs at least 3 pairs, got {n}")));
    }
    let rx = rank_vector(x)?;
    let ry = rank_vector(y)?;
    let Some(rho) = pearson(&rx, &ry) else {
        return Ok(Spearman::Degenerate { n });
    };
    let (p_value, method) = if n <= EXACT_MAX_N {
        (exact_p(&rx, &ry, rho), PMethod::Exact)
    } else {
        (t_approx_p(rho, n), PMethod::TApprox)
    };
    Ok(Spearman::Defined(SpearmanFit { rho, p_value, n, method }))
}

/// Spearman on the labels both samples share.
pub fn spearman_labeled(x: &BTreeMap<Iso, f64>, y: &BTreeMap<Iso, f64>) -> Result<Spearman> {
    let (a, b): (Vec<f64>, Vec<f64>) = x
        .iter()
        .filter_map(|(k, v)| y.get(k).map(|w| (*v, *w)))
        .unzip();
    spearman(&a, &b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub tasks: Vec<TaskId>,
    /// Labels common to every task, the alignment set.
    pub labels: Vec<Iso>,
    /// Symmetric; `cells[i][i]` is the self-correlation.
    pub cells: Vec<Vec<Spearman>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<&Spearman> {
        let i = self.tasks.iter().position(|t| t.as_str() == a)?;
        let j = self.tasks.iter().position(|t| t.as_str() == b)?;
        Some(&self.cells[i][j])
    }
}

/// Pairwise Spearman between per-task language scores, aligned on the
/// intersection of labels over all tasks.
pub fn task_correlation_matrix(scores: &[(TaskId, BTreeMap<Iso, f64>)]) -> Result<CorrelationMatrix> {
    if scores.len() < 2 {
        return Err(Error::Insufficient(format!(
            "correlation matrix needs at least 2 tasks, got {}",
            scores.len()
        )));
    }
    let mut common: BTreeSet<Iso> = scores[0].1.keys().copied().collect();
    for (_, s) in &scores[1..] {
        common.retain(|l| s.contains_key(l));
    }
    if common.len() < 3 {
        return Err(Error::Insufficient(format!(
            "tasks share {} labels, at least 3 are needed",
            common.len()
        )));
    }
    let aligned: Vec<Vec<f64>> = scores
        .iter()
        .map(|(_, s)| common.iter().map(|l| s[l]).collect())
        .collect();
    let n = aligned.len();
    let mut cells = vec![vec![Spearman::Degenerate { n: common.len() }; n]; n];
    for i in 0..n {
        for j in i..n {
            let r = spearman(&aligned[i], &aligned[j])?;
            cells[i][j] = r;
            cells[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        tasks: scores.iter().map(|(t, _)| t.clone()).collect(),
        labels: common.into_iter().collect(),
        cells,
    })
}
