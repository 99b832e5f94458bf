//! Per-object Gaussian-Beta belief over geometric change `l` and consistency `v`.
//!
//! The measurement model is a two-hypothesis mixture: with probability `v`
//! the object is unchanged and the TSDF discrepancy is `N(0, sigma_m^2)`;
//! otherwise it is `N(l, sigma_m^2)`. Against a `N(l | mu, sigma^2) Beta(v | a, b)`
//! prior the exact posterior is a two-component Gaussian-Beta mixture, which is
//! projected back onto a single Gaussian-Beta by matching first and second moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{ObjectRecord, Observation};
use crate::sim::Stationarity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBetaState {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GaussianBetaState {
    /// `E[v]`, the probability that the object is unchanged.
    pub fn expected_consistency(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn consistency_variance(&self) -> f64 {
        let n = self.alpha + self.beta;
        self.alpha * self.beta / (n * n * (n + 1.0))
    }

    pub fn is_valid(&self) -> bool {
        self.mu.is_finite()
            && self.sigma.is_finite()
            && self.sigma > 0.0
            && self.alpha.is_finite()
            && self.alpha > 0.0
            && self.beta.is_finite()
            && self.beta > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsistencyParams {
    /// Std of the TSDF-discrepancy measurement.
    pub sigma_m: f64,
    /// Objects whose `E[v]` drops below this are removed from the library.
    pub removal_threshold: f64,
    /// Cap on `alpha + beta`.
    pub n_max: f64,
    /// Per-update pseudo-count from the stationarity label; 0 disables it.
    pub rho_s: f64,
    pub prior_static: [f64; 2],
    pub prior_dynamic: [f64; 2],
    pub initial_mu: f64,
    pub initial_sigma: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self {
            sigma_m: 0.1,
            removal_threshold: 0.4,
            n_max: 50.0,
            rho_s: 0.0,
            prior_static: [9.0, 1.0],
            prior_dynamic: [6.0, 4.0],
            initial_mu: 0.0,
            initial_sigma: 0.2,
        }
    }
}

impl ConsistencyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_m > 0.0) {
            return Err(Error::InvalidParameter("sigma_m must be positive".into()));
        }
        if !(self.removal_threshold > 0.0 && self.removal_threshold < 1.0) {
            return Err(Error::InvalidParameter("removal_threshold must lie in (0, 1)".into()));
        }
        if !(self.n_max > 0.0 && self.rho_s >= 0.0 && self.initial_sigma > 0.0) {
            return Err(Error::InvalidParameter("invalid consistency filter settings".into()));
        }
        for [a, b] in [self.prior_static, self.prior_dynamic] {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidParameter("Beta priors must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn prior(&self, stationarity: Stationarity) -> GaussianBetaState {
        let [alpha, beta] = match stationarity {
            Stationarity::LikelyStatic => self.prior_static,
            Stationarity::LikelyDynamic => self.prior_dynamic,
        };
        GaussianBetaState {
            mu: self.initial_mu,
            sigma: self.initial_sigma,
            alpha,
            beta,
        }
    }
}

/// Result of one filter update, with the mixture weights for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyUpdate {
    pub state: GaussianBetaState,
    /// Posterior weight of the unchanged hypothesis; `w_changed = 1 - w_consistent`.
    pub w_consistent: f64,
    pub w_changed: f64,
    /// Set when the Beta variance had to be clamped to stay representable.
    pub variance_clamped: bool,
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean) * (x - mean) / var + (2.0 * std::f64::consts::PI * var).ln())
}

/// Recovers Beta parameters from a mean and variance.
pub fn beta_from_moments(mean: f64, var: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0 && mean < 1.0) {
        return Err(Error::InvalidParameter(format!("Beta mean {mean} outside (0, 1)")));
    }
    let max_var = mean * (1.0 - mean);
    if !(var > 0.0 && var < max_var) {
        return Err(Error::InvalidParameter(format!(
            "Beta variance {var} outside (0, {max_var})"
        )));
    }
    let k = max_var / var - 1.0;
    Ok((mean * k, (1.0 - mean) * k))
}

/// Mean TSDF value of the object's reconstruction at the observed points.
///
/// Unobserved voxels read as `+tau`. Points whose trilinear stencil leaves
/// the object grid are skipped; `None` means no point could be sampled.
pub fn compute_delta(obj: &ObjectRecord, obs: &Observation) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for p in &obs.points {
        if let Some(v) = obj.tsdf.sample_trilinear(*p) {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Bayesian update of the belief with one discrepancy measurement `delta`.
pub fn update_consistency(
    state: &GaussianBetaState,
    delta: f64,
    stationarity: Stationarity,
    params: &ConsistencyParams,
) -> Result<ConsistencyUpdate> {
    if !state.is_valid() {
        return Err(Error::InvalidParameter(format!("invalid consistency state {state:?}")));
    }
    if !delta.is_finite() {
        return Err(Error::NonFinite("consistency measurement"));
    }
    let GaussianBetaState {
        mu,
        sigma,
        alpha,
        beta,
    } = *state;
    let sm2 = params.sigma_m * params.sigma_m;
    let s2 = sigma * sigma;
    let n = alpha + beta;

    let log_w1 = (alpha / n).ln() + log_normal_pdf(delta, 0.0, sm2);
    let log_w2 = (beta / n).ln() + log_normal_pdf(delta, mu, sm2 + s2);
    let top = log_w1.max(log_w2);
    let e1 = (log_w1 - top).exp();
    let e2 = (log_w2 - top).exp();
    let w1 = e1 / (e1 + e2);
    let w2 = e2 / (e1 + e2);

    // Changed hypothesis: conjugate Gaussian update of l.
    let mu2 = (sm2 * mu + s2 * delta) / (sm2 + s2);
    let var2 = sm2 * s2 / (sm2 + s2);
    let mean_l = w1 * mu + w2 * mu2;
    let second_l = w1 * (s2 + mu * mu) + w2 * (var2 + mu2 * mu2);
    let var_l = (second_l - mean_l * mean_l).max(f64::MIN_POSITIVE);

    let mean_v = (w1 * (alpha + 1.0) + w2 * alpha) / (n + 1.0);
    let second_v = (w1 * (alpha + 1.0) * (alpha + 2.0) + w2 * alpha * (alpha + 1.0))
        / ((n + 1.0) * (n + 2.0));
    let mut var_v = second_v - mean_v * mean_v;
    let limit = mean_v * (1.0 - mean_v);
    let mut variance_clamped = false;
    if !(var_v > 0.0 && var_v < limit) {
        var_v = if var_v >= limit { 0.999 * limit } else { f64::EPSILON * limit };
        variance_clamped = true;
    }
    let (mut a, mut b) = beta_from_moments(mean_v, var_v)?;

    if params.rho_s > 0.0 {
        match stationarity {
            Stationarity::LikelyStatic => a += params.rho_s,
            Stationarity::LikelyDynamic => b += params.rho_s,
        }
    }
    if a + b > params.n_max {
        let scale = params.n_max / (a + b);
        a *= scale;
        b *= scale;
    }

    Ok(ConsistencyUpdate {
        state: GaussianBetaState {
            mu: mean_l,
            sigma: var_l.sqrt(),
            alpha: a,
            beta: b,
        },
        w_consistent: w1,
        w_changed: w2,
        variance_clamped,
    })
}
