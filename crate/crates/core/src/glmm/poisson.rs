use crate::error::{Error, Result};
use crate::quad::GaussHermite;
use crate::special::ln_gamma;

use super::linalg::{spd_inverse, symmetrize, zeros, Mat};
use super::optim::{maximize, Objective};
use super::{ClusteredOutcomes, FitResult, ModelFamily, BOUNDARY_SIGMA2};

const MAX_ITER: usize = 500;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Poisson sufficient statistics of one cluster.
#[derive(Debug, Clone, Copy)]
struct ClusterStats {
    /// Σ y
    s: f64,
    /// number of units
    n: f64,
    /// Σ lnΓ(y + 1)
    c: f64,
}

/// Marginal likelihood of the random-intercept Poisson model in the
/// parameters `θ = (β0, σ)`. The likelihood is even in `σ`, so `σ` is left
/// unconstrained and `σ² = σ²` can never go negative.
struct PoissonModel {
    clusters: Vec<ClusterStats>,
    nodes: Vec<f64>,
    ln_weights: Vec<f64>,
}

impl PoissonModel {
    fn new(data: &ClusteredOutcomes, n_quadrature: usize) -> Result<Self> {
        if n_quadrature == 0 {
            return Err(Error::InvalidInput("n_quadrature must be at least 1".into()));
        }
        if data.n_clusters() < 2 {
            return Err(Error::InsufficientData(format!(
                "random-intercept variance needs at least 2 clusters, got {}",
                data.n_clusters()
            )));
        }
        if data.observations().iter().all(|o| o.y == 0.0) {
            return Err(Error::Degenerate("all outcomes are zero".into()));
        }
        let clusters = data
            .grouped()
            .iter()
            .map(|ys| ClusterStats {
                s: ys.iter().sum(),
                n: ys.len() as f64,
                c: ys.iter().map(|y| ln_gamma(y + 1.0)).sum(),
            })
            .collect();
        let rule = GaussHermite::new(n_quadrature);
        Ok(Self {
            clusters,
            ln_weights: rule.weights.iter().map(|w| w.ln()).collect(),
            nodes: rule.nodes,
        })
    }

    /// Log marginal likelihood of one cluster and its gradient in `(β0, σ)`.
    ///
    /// With `u = σ z`, `z ~ N(0, 1)`, the integrand is `exp f(z)` where
    /// `f(z) = S(β + s z) − n e^(β + s z) − z²/2 − ln√(2π) − C` and `s = |σ|`.
    /// The rule is centred on the mode `ẑ` of `f` and scaled by
    /// `τ = (−f''(ẑ))^(-1/2)`; differentiating through `ẑ` and `τ` gives the
    /// exact gradient of the quadrature approximation.
    fn cluster(&self, cs: ClusterStats, beta: f64, sigma: f64) -> (f64, [f64; 2]) {
        let s = sigma.abs();
        let sign = if sigma < 0.0 { -1.0 } else { 1.0 };
        let big_s = cs.s;
        let e_at = |z: f64| cs.n * (beta + s * z).exp();
        let f_at = |z: f64| big_s * (beta + s * z) - e_at(z) - 0.5 * z * z - LN_SQRT_2PI - cs.c;

        let zhat = mode(cs, beta, s);
        let e = e_at(zhat);
        let a = s * s * e + 1.0;
        let tau = a.powf(-0.5);
        let fhat = f_at(zhat);

        let scale = std::f64::consts::SQRT_2 * tau;
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.ln_weights)
            .map(|(&x, &lw)| lw + x * x + f_at(zhat + scale * x) - fhat)
            .collect();
        let m = terms.iter().fold(f64::NEG_INFINITY, |acc, t| acc.max(*t));
        let total: f64 = terms.iter().map(|t| (t - m).exp()).sum();
        let ll = scale.ln() + fhat + m + total.ln();

        // Derivatives of f at the mode.
        let f_zb = -s * e;
        let f_zs = big_s - e - s * zhat * e;
        let f_zzz = -s * s * s * e;
        let f_zzb = -s * s * e;
        let f_zzs = -2.0 * s * e - s * s * zhat * e;
        let dz = [f_zb / a, f_zs / a];
        let half_tau3 = 0.5 * tau * tau * tau;
        let dtau = [
            half_tau3 * (f_zzz * dz[0] + f_zzb),
            half_tau3 * (f_zzz * dz[1] + f_zzs),
        ];

        let mut grad = [dtau[0] / tau, dtau[1] / tau];
        for ((&x, t), _) in self.nodes.iter().zip(&terms).zip(0..) {
            let w = (t - m).exp() / total;
            if w == 0.0 {
                continue;
            }
            let z = zhat + scale * x;
            let ek = e_at(z);
            let f_b = big_s - ek;
            let f_s = z * (big_s - ek);
            let f_z = s * big_s - s * ek - z;
            let sq2x = std::f64::consts::SQRT_2 * x;
            grad[0] += w * (f_b + f_z * (dz[0] + sq2x * dtau[0]));
            grad[1] += w * (f_s + f_z * (dz[1] + sq2x * dtau[1]));
        }
        grad[1] *= sign;
        (ll, grad)
    }

    fn loglik_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let mut ll = 0.0;
        let mut g = vec![0.0; 2];
        for &cs in &self.clusters {
            let (l, gj) = self.cluster(cs, theta[0], theta[1]);
            ll += l;
            g[0] += gj[0];
            g[1] += gj[1];
        }
        (ll, g)
    }

    fn scores(&self, theta: &[f64]) -> Vec<[f64; 2]> {
        self.clusters
            .iter()
            .map(|&cs| self.cluster(cs, theta[0], theta[1]).1)
            .collect()
    }

    /// Hessian of the log-likelihood by central differences of the analytic
    /// gradient.
    fn hessian(&self, theta: &[f64]) -> Mat {
        let mut h = zeros(2);
        for i in 0..2 {
            let step = 1e-5 * theta[i].abs().max(1.0);
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[i] += step;
            down[i] -= step;
            let (_, gu) = self.loglik_grad(&up);
            let (_, gd) = self.loglik_grad(&down);
            for j in 0..2 {
                h[j][i] = (gu[j] - gd[j]) / (2.0 * step);
            }
        }
        symmetrize(&mut h);
        h
    }
}

/// Root of `h(z) = sS − s n e^(β + s z) − z`, which is concave and
/// decreasing. Newton started right of the root moves monotonically left
/// and never overshoots, so the exponential cannot overflow.
fn mode(cs: ClusterStats, beta: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let h0 = s * (cs.s - cs.n * beta.exp());
    // When h(0) > 0 we have S > 0 and h((ln(S/n) − β)/s) = −z < 0.
    let mut z = if h0 <= 0.0 {
        0.0
    } else {
        ((cs.s / cs.n).ln() - beta) / s
    };
    for _ in 0..200 {
        let e = cs.n * (beta + s * z).exp();
        let h = s * cs.s - s * e - z;
        let step = h / (s * s * e + 1.0);
        z += step;
        if step.abs() <= 1e-14 * z.abs().max(1.0) {
            break;
        }
    }
    z
}

/// Log marginal likelihood and its analytic gradient in `(β0, σ)`.
pub fn poisson_loglik(
    data: &ClusteredOutcomes,
    n_quadrature: usize,
    beta0: f64,
    sigma: f64,
) -> Result<(f64, [f64; 2])> {
    let model = PoissonModel::new(data, n_quadrature)?;
    let (ll, g) = model.loglik_grad(&[beta0, sigma]);
    Ok((ll, [g[0], g[1]]))
}

/// Naive and sandwich standard errors at a parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustSe {
    pub se_beta0_naive: f64,
    pub se_beta0_sandwich: f64,
    pub se_sigma_naive: f64,
    pub se_sigma_sandwich: f64,
    /// Delta-method SEs of `σ²`; `None` at the zero boundary.
    pub se_sigma2_naive: Option<f64>,
    pub se_sigma2_sandwich: Option<f64>,
    /// Sum of the per-cluster scores (zero at an exact optimum).
    pub score_sum: [f64; 2],
}

fn robust_se(model: &PoissonModel, beta0: f64, sigma: f64) -> Result<RobustSe> {
    let theta = [beta0, sigma];
    let info: Mat = model
        .hessian(&theta)
        .iter()
        .map(|r| r.iter().map(|v| -v).collect())
        .collect();
    let a_inv = spd_inverse(&info)?;
    let scores = model.scores(&theta);
    let mut b = zeros(2);
    for g in &scores {
        for i in 0..2 {
            for j in 0..2 {
                b[i][j] += g[i] * g[j];
            }
        }
    }
    let v = super::linalg::mat_mul(&super::linalg::mat_mul(&a_inv, &b), &a_inv);
    let score_sum = scores
        .iter()
        .fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
    let se_sigma_naive = a_inv[1][1].sqrt();
    let se_sigma_sandwich = v[1][1].max(0.0).sqrt();
    let boundary = sigma * sigma < BOUNDARY_SIGMA2;
    let delta = |se: f64| (!boundary).then(|| 2.0 * sigma.abs() * se);
    Ok(RobustSe {
        se_beta0_naive: a_inv[0][0].sqrt(),
        se_beta0_sandwich: v[0][0].max(0.0).sqrt(),
        se_sigma_naive,
        se_sigma_sandwich,
        se_sigma2_naive: delta(se_sigma_naive),
        se_sigma2_sandwich: delta(se_sigma_sandwich),
        score_sum,
    })
}

/// Cluster-robust standard errors `A⁻¹ B A⁻¹` for a fitted Poisson model,
/// where `A` is the observed information and `B = Σ_j g_j g_jᵀ` sums the
/// outer products of the per-cluster scores.
pub fn sandwich_se(fit: &FitResult, data: &ClusteredOutcomes) -> Result<RobustSe> {
    if fit.family != ModelFamily::Poisson {
        return Err(Error::InvalidInput("sandwich_se expects a Poisson fit".into()));
    }
    let model = PoissonModel::new(data, fit.n_quadrature)?;
    robust_se(&model, fit.beta0, fit.sigma2.sqrt())
}

fn starting_values(data: &ClusteredOutcomes) -> [f64; 2] {
    let diag = data.diagnostics();
    let log_means: Vec<f64> = data
        .grouped()
        .iter()
        .map(|ys| ys.iter().sum::<f64>() / ys.len() as f64)
        .filter(|m| *m > 0.0)
        .map(f64::ln)
        .collect();
    let sd = if log_means.len() >= 2 {
        let mean = log_means.iter().sum::<f64>() / log_means.len() as f64;
        let ss: f64 = log_means.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (log_means.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    [diag.outcome_mean.ln(), sd.max(0.1)]
}

/// Fits the two-level random-intercept Poisson model
/// `y_ij ~ Poisson(exp(β0 + u_j))`, `u_j ~ N(0, σ²)`, by adaptive
/// Gauss-Hermite quadrature with `n_quadrature` nodes per cluster
/// (1 node is the Laplace approximation).
pub fn fit_poisson_ri(data: &ClusteredOutcomes, n_quadrature: usize) -> Result<FitResult> {
    let model = PoissonModel::new(data, n_quadrature)?;
    let eval = |theta: &[f64]| model.loglik_grad(theta);
    let hess = |theta: &[f64]| model.hessian(theta);
    let objective = Objective {
        eval: &eval,
        hessian: Some(&hess),
    };
    let out = maximize(&objective, starting_values(data).to_vec(), MAX_ITER);
    let beta0 = out.x[0];
    let sigma = out.x[1].abs();
    let se = robust_se(&model, beta0, sigma)?;
    Ok(FitResult {
        family: ModelFamily::Poisson,
        beta0,
        sigma2: sigma * sigma,
        residual_variance: None,
        se_beta0_naive: se.se_beta0_naive,
        se_beta0_sandwich: se.se_beta0_sandwich,
        se_sigma2: se.se_sigma2_sandwich,
        se_sigma2_naive: se.se_sigma2_naive,
        loglik: out.value,
        n_quadrature,
        converged: out.converged,
        iterations: out.iterations,
        loglik_trace: out.trace,
        n_units: data.len(),
        n_clusters: data.n_clusters(),
        diagnostics: data.diagnostics(),
    })
}
