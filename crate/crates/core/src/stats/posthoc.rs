use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::fixed6;

use super::{check_groups, descriptives, excludes_zero, srange::studentized_range_quantile};
use super::{GroupSample, PairwiseComparison};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PosthocTest {
    #[default]
    DunnettC,
    TukeyHsd,
}

impl PosthocTest {
    pub fn run(self, groups: &[GroupSample], alpha: f64) -> Result<Vec<PairwiseComparison>> {
        match self {
            Self::DunnettC => dunnett_c(groups, alpha),
            Self::TukeyHsd => tukey_hsd(groups, alpha),
        }
    }
}

struct Summary {
    n: f64,
    mean: f64,
    var: f64,
}

fn summaries(groups: &[GroupSample]) -> Result<Vec<Summary>> {
    groups
        .iter()
        .map(|g| {
            let d = descriptives(&g.observations)?;
            Ok(Summary {
                n: d.n as f64,
                mean: d.mean,
                var: d.variance()?,
            })
        })
        .collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha {alpha} must lie in (0, 1)")))
    }
}

/// Evaluates `one(i, j)` for every `i < j` in parallel and lays the results
/// out row by row: for each group `i`, its comparison with every other group.
fn both_orientations<F>(groups: &[GroupSample], one: F) -> Vec<PairwiseComparison>
where
    F: Fn(usize, usize) -> PairwiseComparison + Sync,
{
    let k = groups.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let upper: Vec<PairwiseComparison> = pairs.par_iter().map(|&(i, j)| one(i, j)).collect();
    let index = |i: usize, j: usize| {
        // Position of (i, j), i < j, in the row-major upper triangle.
        i * k - i * (i + 1) / 2 + (j - i - 1)
    };
    let mut out = Vec::with_capacity(k * (k - 1));
    for i in 0..k {
        for j in 0..k {
            if i < j {
                out.push(upper[index(i, j)].clone());
            } else if i > j {
                out.push(upper[index(j, i)].reversed());
            }
        }
    }
    out
}

/// Tukey HSD with the Tukey-Kramer adjustment for unequal group sizes.
pub fn tukey_hsd(groups: &[GroupSample], alpha: f64) -> Result<Vec<PairwiseComparison>> {
    check_alpha(alpha)?;
    check_groups(groups, 2, 2)?;
    let stats = summaries(groups)?;
    let k = groups.len();
    let n_total: f64 = stats.iter().map(|s| s.n).sum();
    let df = n_total - k as f64;
    let ssw: f64 = stats.iter().map(|s| (s.n - 1.0) * s.var).sum();
    let mse = ssw / df;
    let q = studentized_range_quantile(alpha, k, df)?;
    Ok(both_orientations(groups, |i, j| {
        let (a, b) = (&stats[i], &stats[j]);
        let diff = a.mean - b.mean;
        let se = (mse * (1.0 / a.n + 1.0 / b.n)).sqrt();
        let half = q / std::f64::consts::SQRT_2 * se;
        finish(groups, i, j, diff, se, half, mse == 0.0)
    }))
}

/// Dunnett's C: unequal-variance intervals whose critical value mixes the
/// per-group studentized-range quantiles `q(alpha, k, n_i - 1)`.
pub fn dunnett_c(groups: &[GroupSample], alpha: f64) -> Result<Vec<PairwiseComparison>> {
    check_alpha(alpha)?;
    check_groups(groups, 2, 2)?;
    let stats = summaries(groups)?;
    let k = groups.len();
    let quantiles: Vec<f64> = stats
        .iter()
        .map(|s| studentized_range_quantile(alpha, k, s.n - 1.0))
        .collect::<Result<_>>()?;
    Ok(both_orientations(groups, |i, j| {
        let (a, b) = (&stats[i], &stats[j]);
        let diff = a.mean - b.mean;
        let (vi, vj) = (a.var / a.n, b.var / b.n);
        let se = (vi + vj).sqrt();
        let half = dunnett_c_critical_range(quantiles[i], vi, quantiles[j], vj);
        finish(groups, i, j, diff, se, half, vi + vj == 0.0)
    }))
}

/// `(q_i v_i + q_j v_j) / (v_i + v_j) · sqrt(v_i + v_j) / √2` with
/// `v = s² / n`.
fn dunnett_c_critical_range(qi: f64, vi: f64, qj: f64, vj: f64) -> f64 {
    let v = vi + vj;
    if v == 0.0 {
        return 0.0;
    }
    (qi * vi + qj * vj) / v * v.sqrt() / std::f64::consts::SQRT_2
}

fn finish(
    groups: &[GroupSample],
    i: usize,
    j: usize,
    diff: f64,
    se: f64,
    half: f64,
    degenerate: bool,
) -> PairwiseComparison {
    let (ci_low, ci_high) = (diff - half, diff + half);
    PairwiseComparison {
        group_i: groups[i].group_id.clone(),
        group_j: groups[j].group_id.clone(),
        mean_difference: diff,
        standard_error: se,
        ci_low,
        ci_high,
        significant: excludes_zero(ci_low, ci_high),
        degenerate,
    }
}

/// Pairwise table as CSV.
pub fn pairwise_csv(rows: &[PairwiseComparison]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    w.write_record([
        "group_i",
        "group_j",
        "mean_difference",
        "std_error",
        "ci_low",
        "ci_high",
        "significant",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.group_i.clone(),
            r.group_j.clone(),
            fixed6(r.mean_difference),
            fixed6(r.standard_error),
            fixed6(r.ci_low),
            fixed6(r.ci_high),
            r.significant.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
