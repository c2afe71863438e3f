use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::special::{chi2_sf, f_sf};

use super::{check_groups, mean, midranks, sum_sq_dev, Df, GroupSample, OmnibusResult};

/// One-way ANOVA F test.
pub fn anova_oneway(groups: &[GroupSample]) -> Result<OmnibusResult> {
    check_groups(groups, 2, 1)?;
    let k = groups.len();
    let n_total: usize = groups.iter().map(GroupSample::len).sum();
    if n_total <= k {
        return Err(Error::InsufficientData(format!(
            "ANOVA needs more observations ({n_total}) than groups ({k})"
        )));
    }
    Ok(f_test("one-way ANOVA", groups.iter().map(|g| g.observations.as_slice())))
}

fn f_test<'a>(name: &'static str, groups: impl Iterator<Item = &'a [f64]>) -> OmnibusResult {
    let groups: Vec<&[f64]> = groups.collect();
    let k = groups.len();
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let grand = mean(&all);
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in &groups {
        let m = mean(g);
        ssb += g.len() as f64 * (m - grand) * (m - grand);
        ssw += sum_sq_dev(g, m);
    }
    let df_b = (k - 1) as f64;
    let df_w = (n_total - k) as f64;
    let df = Df::Two(df_b, df_w);
    if ssw == 0.0 {
        let (statistic, p_value) = if ssb == 0.0 { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
        return OmnibusResult {
            test_name: name,
            statistic,
            df,
            p_value,
            degenerate: true,
        };
    }
    let f = (ssb / df_b) / (ssw / df_w);
    OmnibusResult {
        test_name: name,
        statistic: f,
        df,
        p_value: f_sf(f, df_b, df_w),
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeveneCenter {
    #[default]
    Mean,
    /// Brown-Forsythe variant.
    Median,
}

/// Levene's test: ANOVA on absolute deviations from each group's center.
pub fn levene(groups: &[GroupSample], center: LeveneCenter) -> Result<OmnibusResult> {
    check_groups(groups, 2, 2)?;
    let deviations: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let c = match center {
                LeveneCenter::Mean => mean(&g.observations),
                LeveneCenter::Median => super::descriptives(&g.observations)
                    .expect("validated group")
                    .median,
            };
            g.observations.iter().map(|x| (x - c).abs()).collect()
        })
        .collect();
    let name = match center {
        LeveneCenter::Mean => "Levene",
        LeveneCenter::Median => "Brown-Forsythe",
    };
    Ok(f_test(name, deviations.iter().map(Vec::as_slice)))
}

/// Kruskal-Wallis H with tie correction; chi-square approximation, `k - 1` df.
pub fn kruskal_wallis(groups: &[GroupSample]) -> Result<OmnibusResult> {
    check_groups(groups, 2, 1)?;
    let (pooled, sizes) = pool(groups);
    let ranks = midranks(&pooled);
    let h = h_statistic(&ranks, &sizes, tie_correction(&pooled));
    let df = (groups.len() - 1) as f64;
    Ok(OmnibusResult {
        test_name: "Kruskal-Wallis",
        statistic: h.unwrap_or(0.0),
        df: Df::One(df),
        p_value: h.map_or(1.0, |h| chi2_sf(h, df)),
        degenerate: h.is_none(),
    })
}

/// Kruskal-Wallis with a Monte Carlo permutation p-value: the fraction of
/// `n_resamples` random relabellings whose H is at least the observed H.
pub fn kruskal_wallis_permutation(
    groups: &[GroupSample],
    n_resamples: usize,
    seed: u64,
) -> Result<OmnibusResult> {
    check_groups(groups, 2, 1)?;
    if n_resamples == 0 {
        return Err(Error::InvalidInput("n_resamples must be positive".into()));
    }
    let (pooled, sizes) = pool(groups);
    let mut ranks = midranks(&pooled);
    let correction = tie_correction(&pooled);
    let Some(observed) = h_statistic(&ranks, &sizes, correction) else {
        return Ok(OmnibusResult {
            test_name: "Kruskal-Wallis (permutation)",
            statistic: 0.0,
            df: Df::One((groups.len() - 1) as f64),
            p_value: 1.0,
            degenerate: true,
        });
    };
    let threshold = observed - 1e-12 * observed.abs().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n_resamples {
        ranks.shuffle(&mut rng);
        if h_statistic(&ranks, &sizes, correction).unwrap_or(0.0) >= threshold {
            hits += 1;
        }
    }
    Ok(OmnibusResult {
        test_name: "Kruskal-Wallis (permutation)",
        statistic: observed,
        df: Df::One((groups.len() - 1) as f64),
        p_value: hits as f64 / n_resamples as f64,
        degenerate: false,
    })
}

fn pool(groups: &[GroupSample]) -> (Vec<f64>, Vec<usize>) {
    let pooled = groups.iter().flat_map(|g| g.observations.iter().copied()).collect();
    let sizes = groups.iter().map(GroupSample::len).collect();
    (pooled, sizes)
}

fn tie_correction(pooled: &[f64]) -> f64 {
    let n = pooled.len() as f64;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    for run in sorted.chunk_by(|a, b| a == b) {
        let t = run.len() as f64;
        ties += t * t * t - t;
    }
    if n < 2.0 {
        return 0.0;
    }
    1.0 - ties / (n * n * n - n)
}

/// H from ranks laid out group after group; `None` when every value is tied.
fn h_statistic(ranks: &[f64], sizes: &[usize], correction: f64) -> Option<f64> {
    if correction <= 0.0 {
        return None;
    }
    let n = ranks.len() as f64;
    let mut offset = 0;
    let mut acc = 0.0;
    for &size in sizes {
        let r: f64 = ranks[offset..offset + size].iter().sum();
        acc += r * r / size as f64;
        offset += size;
    }
    let h = 12.0 / (n * (n + 1.0)) * acc - 3.0 * (n + 1.0);
    Some((h / correction).max(0.0))
}
