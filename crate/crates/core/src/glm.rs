//! Maximum-likelihood fits of gaussian and logistic submodels and the
//! extended BIC built on them.

use crate::dataset::{dot, Dataset, ResponseFamily};
use crate::error::{Error, Result};
use crate::linalg::pivoted_cholesky;
use crate::model::ModelIndex;

/// IRLS iteration cap.
pub const IRLS_MAX_ITER: usize = 100;
/// IRLS convergence: max-norm of the score at the optimum.
pub const IRLS_GRAD_TOL: f64 = 1e-8;
/// Coefficient magnitude that triggers a separation error during IRLS.
pub const IRLS_COEF_CAP: f64 = 1e4;
/// Relative floor on the residual sum of squares before taking its log.
pub const RSS_FLOOR_REL: f64 = 1e-12;

/// Result of a maximum-likelihood fit.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// Fitted coefficients, intercept first (length `|S| + 1`).
    pub coefficients: Vec<f64>,
    /// Log-likelihood at the optimum.
    pub max_log_likelihood: f64,
    /// Whether the gradient criterion was met within the iteration cap.
    pub converged: bool,
    /// Number of iterations used (0 for the closed-form gaussian fit).
    pub iterations: usize,
}

/// Ordinary least squares fit of the gaussian submodel `S`, with the error
/// variance profiled out (`sigma^2 = RSS/n`).
pub fn fit_gaussian(data: &Dataset, model: &ModelIndex) -> Result<FitResult> {
    if data.family() != ResponseFamily::Gaussian {
        return Err(Error::Config("fit_gaussian needs a gaussian response".into()));
    }
    let n = data.n();
    let m = model.size();
    if m + 1 >= n {
        return Err(Error::SingularFit(format!(
            "model size {m} too large for n = {n} (needs |S| < n - 1)"
        )));
    }
    let tss = data.y_sum_squares();
    let (beta, rss) = if m == 0 {
        (Vec::new(), tss)
    } else {
        let gram = data.gram(model);
        let xty = data.xty(model);
        let chol = pivoted_cholesky(&gram, m).ok_or_else(|| {
            Error::SingularFit(format!("collinear columns in X_S for S = {model}"))
        })?;
        let beta = chol.solve(&xty);
        let explained = dot(&beta, &xty);
        (beta, (tss - explained).max(0.0))
    };
    let rss_floored = rss.max(RSS_FLOOR_REL * tss);
    let nf = n as f64;
    let loglik = -(nf / 2.0) * ((2.0 * std::f64::consts::PI * rss_floored / nf).ln() + 1.0);
    if !loglik.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite gaussian log-likelihood for S = {model} (RSS = {rss_floored})"
        )));
    }
    let mut coefficients = Vec::with_capacity(m + 1);
    coefficients.push(0.0); // intercept of the centered regression
    coefficients.extend_from_slice(&beta);
    Ok(FitResult {
        coefficients,
        max_log_likelihood: loglik,
        converged: true,
        iterations: 0,
    })
}

/// Log-likelihood of a 0/1 response under logits `eta`.
pub fn logistic_log_likelihood(y: &[f64], eta: &[f64]) -> f64 {
    // y*eta - ln(1 + exp(eta)), with ln(1+e^x) = max(x,0) + ln1p(e^-|x|)
    y.iter()
        .zip(eta)
        .map(|(&yi, &e)| yi * e - (e.max(0.0) + (-e.abs()).exp().ln_1p()))
        .sum()
}

/// Newton/IRLS maximum-likelihood fit of the logistic submodel `S`, with an
/// intercept column prepended.
pub fn fit_logistic(data: &Dataset, model: &ModelIndex) -> Result<FitResult> {
    if data.family() != ResponseFamily::Binomial {
        return Err(Error::Config("fit_logistic needs a binomial response".into()));
    }
    let n = data.n();
    let m = model.size();
    let d = m + 1;
    let y = data.y();

    // design with intercept first
    let col = |j: usize, i: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            data.column(model.members()[j - 1])[i]
        }
    };

    let mut theta = vec![0.0; d];
    let mut eta = vec![0.0; n];
    let mut loglik = logistic_log_likelihood(y, &eta);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=IRLS_MAX_ITER {
        iterations = iter;
        // score and expected information at the current theta
        let mu: Vec<f64> = eta.iter().map(|&e| 1.0 / (1.0 + (-e).exp())).collect();
        let mut grad = vec![0.0; d];
        for j in 0..d {
            grad[j] = (0..n).map(|i| col(j, i) * (y[i] - mu[i])).sum();
        }
        let gmax = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if gmax <= IRLS_GRAD_TOL {
            converged = true;
            iterations = iter - 1;
            break;
        }
        let mut hess = vec![0.0; d * d];
        for i in 0..n {
            let w = mu[i] * (1.0 - mu[i]);
            for a in 0..d {
                let ca = col(a, i);
                for b in a..d {
                    hess[a * d + b] += w * ca * col(b, i);
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[a * d + b] = hess[b * d + a];
            }
        }
        let chol = pivoted_cholesky(&hess, d).ok_or_else(|| {
            Error::SingularFit(format!("singular information matrix for S = {model}"))
        })?;
        let step = chol.solve(&grad);

        // full Newton step, halved while it degrades the log-likelihood
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
            let cand_eta: Vec<f64> = (0..n)
                .map(|i| (0..d).map(|j| col(j, i) * cand[j]).sum())
                .collect();
            let cand_ll = logistic_log_likelihood(y, &cand_eta);
            if cand_ll.is_finite() && cand_ll >= loglik - 1e-12 {
                theta = cand;
                eta = cand_eta;
                loglik = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::Numeric(format!(
                "IRLS step failed to improve the log-likelihood for S = {model}"
            )));
        }
        if theta.iter().any(|t| t.abs() > IRLS_COEF_CAP) {
            return Err(Error::Separation(format!(
                "coefficient magnitude exceeded {IRLS_COEF_CAP} for S = {model}"
            )));
        }
    }

    if !loglik.is_finite() {
        return Err(Error::Numeric(format!("non-finite logistic log-likelihood for S = {model}")));
    }
    Ok(FitResult {
        coefficients: theta,
        max_log_likelihood: loglik,
        converged,
        iterations,
    })
}

/// Extended BIC of model `S`:
/// `-2 maxloglik + (ln n + 2 gamma ln p) |S|`.
///
/// The penalty counts exactly the `|S|` selected coefficients; the intercept
/// and the gaussian variance are not charged.
pub fn ebic(data: &Dataset, model: &ModelIndex, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("ebic needs gamma in [0,1], got {gamma}")));
    }
    let fit = match data.family() {
        ResponseFamily::Gaussian => fit_gaussian(data, model)?,
        ResponseFamily::Binomial => fit_logistic(data, model)?,
    };
    if !fit.converged {
        return Err(Error::Numeric(format!(
            "maximum-likelihood fit did not converge for S = {model} ({} iterations)",
            fit.iterations
        )));
    }
    let n = data.n() as f64;
    let p = data.p() as f64;
    Ok(-2.0 * fit.max_log_likelihood + (n.ln() + 2.0 * gamma * p.ln()) * model.size() as f64)
}
