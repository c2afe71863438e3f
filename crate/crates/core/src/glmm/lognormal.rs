use crate::error::{Error, Result};
use crate::quad::brent;

use super::linalg::{mat_mul, spd_inverse, symmetrize, zeros, Mat};
use super::{ClusteredOutcomes, FitResult, ModelFamily, BOUNDARY_SIGMA2};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Treatment of zero outcomes, which have no logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ZeroHandling {
    /// Refuse to fit and list the offending units.
    #[default]
    Error,
    /// Drop zero outcomes before fitting.
    ExcludeZeros,
    /// Model `log(y + ε)`.
    Offset(f64),
}

/// Within-cluster summaries of `log y`.
#[derive(Debug, Clone, Copy)]
struct Cluster {
    n: f64,
    mean: f64,
    /// Within-cluster sum of squares.
    w: f64,
}

fn clusters_of(data: &ClusteredOutcomes, zero_handling: ZeroHandling) -> Result<(Vec<Cluster>, usize)> {
    let offset = match zero_handling {
        ZeroHandling::Error => {
            let bad: Vec<String> = data
                .observations()
                .iter()
                .filter(|o| o.y == 0.0)
                .map(|o| o.unit_id.clone())
                .collect();
            if !bad.is_empty() {
                return Err(Error::ZeroOutcome(bad));
            }
            0.0
        }
        ZeroHandling::ExcludeZeros => 0.0,
        ZeroHandling::Offset(eps) => {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::InvalidInput(format!("log offset must be positive, got {eps}")));
            }
            eps
        }
    };
    let mut out = Vec::new();
    let mut n_units = 0;
    for ys in data.grouped() {
        let logs: Vec<f64> = ys
            .iter()
            .filter(|y| offset > 0.0 || **y > 0.0)
            .map(|y| (y + offset).ln())
            .collect();
        if logs.is_empty() {
            continue;
        }
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let w = logs.iter().map(|x| (x - mean) * (x - mean)).sum();
        n_units += logs.len();
        out.push(Cluster { n, mean, w });
    }
    if out.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "random-intercept variance needs at least 2 clusters, got {}",
            out.len()
        )));
    }
    Ok((out, n_units))
}

/// Profile quantities at variance ratio `γ = σu²/σe²`: GLS mean, residual
/// variance, profile log-likelihood and its derivative in `γ`.
struct Profile {
    mu: f64,
    sigma_e2: f64,
    loglik: f64,
    slope: f64,
}

fn profile(cl: &[Cluster], gamma: f64) -> Profile {
    let n_total: f64 = cl.iter().map(|c| c.n).sum();
    let wts: Vec<f64> = cl.iter().map(|c| c.n / (1.0 + c.n * gamma)).collect();
    let sw: f64 = wts.iter().sum();
    let mu = cl.iter().zip(&wts).map(|(c, w)| w * c.mean).sum::<f64>() / sw;
    let within: f64 = cl.iter().map(|c| c.w).sum();
    let between: f64 = cl
        .iter()
        .zip(&wts)
        .map(|(c, w)| w * (c.mean - mu) * (c.mean - mu))
        .sum();
    let sigma_e2 = (within + between) / n_total;
    let log_det: f64 = cl.iter().map(|c| (1.0 + c.n * gamma).ln()).sum();
    let loglik = -0.5 * (n_total * LN_2PI + n_total * sigma_e2.ln() + log_det + n_total);
    let weighted: f64 = cl
        .iter()
        .map(|c| {
            let d = c.mean - mu;
            let r = 1.0 + c.n * gamma;
            c.n * c.n * d * d / (r * r)
        })
        .sum();
    let trace: f64 = cl.iter().map(|c| c.n / (1.0 + c.n * gamma)).sum();
    Profile {
        mu,
        sigma_e2,
        loglik,
        slope: 0.5 * (weighted / sigma_e2 - trace),
    }
}

/// Per-cluster scores of the Gaussian random-intercept log-likelihood in
/// `(μ, σu², σe²)`.
fn scores(cl: &[Cluster], mu: f64, su2: f64, se2: f64) -> Vec<[f64; 3]> {
    cl.iter()
        .map(|c| {
            let d = c.mean - mu;
            let lam = se2 + c.n * su2;
            [
                c.n * d / lam,
                -0.5 * (c.n / lam - c.n * c.n * d * d / (lam * lam)),
                -0.5 * ((c.n - 1.0) / se2 + 1.0 / lam - c.w / (se2 * se2) - c.n * d * d / (lam * lam)),
            ]
        })
        .collect()
}

fn total_score(cl: &[Cluster], p: &[f64]) -> Vec<f64> {
    scores(cl, p[0], p[1], p[2])
        .iter()
        .fold(vec![0.0; 3], |mut acc, g| {
            for i in 0..3 {
                acc[i] += g[i];
            }
            acc
        })
}

fn information(cl: &[Cluster], p: &[f64]) -> Mat {
    let mut a = zeros(3);
    for i in 0..3 {
        let step = 1e-6 * p[i].abs().max(1e-3);
        let mut up = p.to_vec();
        let mut down = p.to_vec();
        up[i] += step;
        down[i] -= step;
        let gu = total_score(cl, &up);
        let gd = total_score(cl, &down);
        for j in 0..3 {
            a[j][i] = -(gu[j] - gd[j]) / (2.0 * step);
        }
    }
    symmetrize(&mut a);
    a
}

/// Maximizes the profile likelihood over `γ ≥ 0`: a log-spaced scan
/// locates the best region, then the derivative root is polished.
fn best_gamma(cl: &[Cluster]) -> Result<f64> {
    let grid: Vec<f64> = std::iter::once(0.0).chain(gamma_grid()).collect();
    let (i, _) = grid
        .iter()
        .map(|&g| profile(cl, g).loglik)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, l)| if l > best.1 { (i, l) } else { best });
    if i == grid.len() - 1 || (i == 0 && profile(cl, 0.0).slope <= 0.0) {
        return Ok(grid[i]);
    }
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[i + 1];
    let slope = |g: f64| profile(cl, g).slope;
    if slope(lo) > 0.0 && slope(hi) < 0.0 {
        brent(slope, lo, hi, 1e-15 * hi, 300).map_err(Error::Numerical)
    } else {
        Ok(grid[i])
    }
}

fn gamma_grid() -> impl Iterator<Item = f64> {
    (0..=280).map(|i| 10f64.powf(-8.0 + i as f64 * 0.05))
}

/// Gaussian random-intercept model for `log y` by maximum likelihood:
/// `log y_ij = μ + u_j + e_ij`, `u_j ~ N(0, σu²)`, `e_ij ~ N(0, σe²)`.
///
/// `beta0` is `μ`, `sigma2` is `σu²` and `residual_variance` is `σe²`. When
/// every `log y` is identical the likelihood is unbounded; the exact limits
/// are returned with `converged = false`. Data with no within-cluster
/// variation at all (for instance one unit per cluster) is an error.
pub fn fit_lognormal_ri(data: &ClusteredOutcomes, zero_handling: ZeroHandling) -> Result<FitResult> {
    let (cl, n_units) = clusters_of(data, zero_handling)?;
    let diagnostics = data.diagnostics();
    let n_total: f64 = cl.iter().map(|c| c.n).sum();
    let grand = cl.iter().map(|c| c.n * c.mean).sum::<f64>() / n_total;
    let spread: f64 = cl
        .iter()
        .map(|c| c.w + c.n * (c.mean - grand) * (c.mean - grand))
        .sum();
    let base = FitResult {
        family: ModelFamily::LogNormal,
        beta0: grand,
        sigma2: 0.0,
        residual_variance: Some(0.0),
        se_beta0_naive: 0.0,
        se_beta0_sandwich: 0.0,
        se_sigma2: None,
        se_sigma2_naive: None,
        loglik: f64::INFINITY,
        n_quadrature: 0,
        converged: false,
        iterations: 0,
        loglik_trace: Vec::new(),
        n_units,
        n_clusters: cl.len(),
        diagnostics,
    };
    if spread == 0.0 {
        return Ok(base);
    }
    if cl.iter().all(|c| c.w == 0.0) {
        // The likelihood grows without bound as σe² → 0.
        return Err(Error::Degenerate(
            "log outcomes never vary within a cluster; the residual variance is not identified".into(),
        ));
    }

    let gamma = best_gamma(&cl)?;
    let p = profile(&cl, gamma);
    let (mu, se2) = (p.mu, p.sigma_e2);
    let su2 = gamma * se2;
    let params = [mu, su2, se2];

    // On the boundary σu² is held at zero and only (μ, σe²) are free.
    let boundary = su2 < BOUNDARY_SIGMA2;
    let free: Vec<usize> = if boundary { vec![0, 2] } else { vec![0, 1, 2] };
    let full = information(&cl, &params);
    let a: Mat = free.iter().map(|&i| free.iter().map(|&j| full[i][j]).collect()).collect();
    let a_inv = spd_inverse(&a)?;
    let mut b = zeros(free.len());
    for g in scores(&cl, mu, su2, se2) {
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                b[r][c] += g[i] * g[j];
            }
        }
    }
    let v = mat_mul(&mat_mul(&a_inv, &b), &a_inv);
    Ok(FitResult {
        beta0: mu,
        sigma2: su2,
        residual_variance: Some(se2),
        se_beta0_naive: a_inv[0][0].sqrt(),
        se_beta0_sandwich: v[0][0].max(0.0).sqrt(),
        se_sigma2: (!boundary).then(|| v[1][1].max(0.0).sqrt()),
        se_sigma2_naive: (!boundary).then(|| a_inv[1][1].sqrt()),
        loglik: p.loglik,
        converged: true,
        loglik_trace: vec![p.loglik],
        ..base
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(clusters: &[&[f64]]) -> ClusteredOutcomes {
        ClusteredOutcomes::from_triples(clusters.iter().enumerate().flat_map(|(j, ys)| {
            ys.iter()
                .enumerate()
                .map(move |(i, y)| (format!("u{j}-{i}"), format!("c{j}"), *y))
        }))
        .unwrap()
    }

    /// ML estimates for a balanced one-way layout from the ANOVA sums.
    fn balanced_oracle(groups: &[Vec<f64>]) -> (f64, f64, f64) {
        let j = groups.len() as f64;
        let n = groups[0].len() as f64;
        let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / n).collect();
        let grand = means.iter().sum::<f64>() / j;
        let ssw: f64 = groups
            .iter()
            .zip(&means)
            .map(|(g, m)| g.iter().map(|x| (x - m).powi(2)).sum::<f64>())
            .sum();
        let ssb: f64 = means.iter().map(|m| n * (m - grand).powi(2)).sum();
        let se2 = ssw / (j * (n - 1.0));
        let lambda = ssb / j;
        if lambda > se2 {
            (grand, (lambda - se2) / n, se2)
        } else {
            (grand, 0.0, (ssw + ssb) / (j * n))
        }
    }

    #[test]
    fn balanced_closed_form() {
        let logs = vec![
            vec![0.1, 0.5, -0.2, 0.3],
            vec![1.4, 1.1, 1.9, 1.2],
            vec![0.7, 0.2, 0.9, 0.4],
        ];
        let ys: Vec<Vec<f64>> = logs.iter().map(|g| g.iter().map(|x: &f64| x.exp()).collect()).collect();
        let refs: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let fit = fit_lognormal_ri(&data(&refs), ZeroHandling::Error).unwrap();
        let (mu, su2, se2) = balanced_oracle(&logs);
        assert!((fit.beta0 - mu).abs() < 1e-8);
        assert!((fit.sigma2 - su2).abs() < 1e-8);
        assert!((fit.residual_variance.unwrap() - se2).abs() < 1e-8);
        // Scores vanish at the optimum.
        let g = total_score(&clusters_of(&data(&refs), ZeroHandling::Error).unwrap().0, &[
            fit.beta0,
            fit.sigma2,
            fit.residual_variance.unwrap(),
        ]);
        assert!(g.iter().all(|x| x.abs() < 1e-6));
    }

    #[test]
    fn balanced_boundary() {
        // Cluster means nearly equal: the between mean square is below the
        // within one and the estimate sits at zero.
        let logs = vec![vec![0.0, 1.0, -1.0], vec![0.05, 1.0, -1.0]];
        let ys: Vec<Vec<f64>> = logs.iter().map(|g| g.iter().map(|x: &f64| x.exp()).collect()).collect();
        let refs: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let fit = fit_lognormal_ri(&data(&refs), ZeroHandling::Error).unwrap();
        let (mu, su2, se2) = balanced_oracle(&logs);
        assert_eq!(su2, 0.0);
        assert_eq!(fit.sigma2, 0.0);
        assert!((fit.beta0 - mu).abs() < 1e-12);
        assert!((fit.residual_variance.unwrap() - se2).abs() < 1e-12);
        assert!(fit.se_sigma2.is_none());
    }

    #[test]
    fn singleton_clusters_are_rejected() {
        let err = fit_lognormal_ri(&data(&[&[0.01], &[90.0], &[3.0]]), ZeroHandling::Error).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }

    #[test]
    fn constant_logs() {
        let fit = fit_lognormal_ri(&data(&[&[2.0, 2.0], &[2.0]]), ZeroHandling::Error).unwrap();
        assert_eq!(fit.sigma2, 0.0);
        assert!((fit.beta0 - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_handling() {
        let d = data(&[&[0.0, 1.0, 2.0], &[3.0, 0.0, 5.0], &[1.0, 2.0]]);
        match fit_lognormal_ri(&d, ZeroHandling::Error) {
            Err(Error::ZeroOutcome(ids)) => assert_eq!(ids, ["u0-0", "u1-1"]),
            other => panic!("expected zero-outcome error, got {other:?}"),
        }
        let fit = fit_lognormal_ri(&d, ZeroHandling::ExcludeZeros).unwrap();
        assert_eq!(fit.n_units, 6);
        let fit = fit_lognormal_ri(&d, ZeroHandling::Offset(0.5)).unwrap();
        assert_eq!(fit.n_units, 8);
    }
}
