//! Priors over the model space and over regression coefficients.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::ModelIndex;

/// Prior over the model space.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum ModelPriorSpec {
    /// Independent Bernoulli inclusion with probability `omega` per variable.
    Bernoulli { omega: f64 },
    /// Beta-binomial: Bernoulli inclusion with a Beta(a, b) hyperprior on
    /// the inclusion probability, marginalized out.
    BetaBinomial { a: f64, b: f64 },
    /// Size-penalizing prior proportional to `binom(p, |S|)^-gamma`.
    EbicGamma { gamma: f64 },
    /// Uniform over all `2^p` models.
    Uniform,
}

impl ModelPriorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelPriorSpec::Bernoulli { omega } => {
                if !(omega > 0.0 && omega < 1.0) {
                    return Err(Error::Config(format!(
                        "bernoulli prior needs omega in (0,1), got {omega}"
                    )));
                }
            }
            ModelPriorSpec::BetaBinomial { a, b } => {
                if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
                    return Err(Error::Config(format!(
                        "beta-binomial prior needs a, b > 0, got a = {a}, b = {b}"
                    )));
                }
            }
            ModelPriorSpec::EbicGamma { gamma } => {
                if !(0.0..=1.0).contains(&gamma) {
                    return Err(Error::Config(format!(
                        "ebic-gamma prior needs gamma in [0,1], got {gamma}"
                    )));
                }
            }
            ModelPriorSpec::Uniform => {}
        }
        Ok(())
    }
}

impl std::fmt::Display for ModelPriorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelPriorSpec::Bernoulli { omega } => write!(f, "bernoulli(omega={omega})"),
            ModelPriorSpec::BetaBinomial { a, b } => write!(f, "beta-binomial(a={a},b={b})"),
            ModelPriorSpec::EbicGamma { gamma } => write!(f, "ebic-gamma(gamma={gamma})"),
            ModelPriorSpec::Uniform => write!(f, "uniform"),
        }
    }
}

/// Prior on the coefficients of a normal linear model, conditional on the
/// error variance.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum CoefficientPriorSpec {
    /// Zellner's prior: `beta_S | sigma^2 ~ N(0, sigma^2 g (X_S^T X_S)^-1)`.
    GPrior { g: f64 },
    /// Ridge: `beta_S | sigma^2 ~ N(0, sigma^2 g I)`.
    Ridge { g: f64 },
}

impl CoefficientPriorSpec {
    pub fn g(&self) -> f64 {
        match *self {
            CoefficientPriorSpec::GPrior { g } | CoefficientPriorSpec::Ridge { g } => g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.g();
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Config(format!("coefficient prior needs g > 0, got {g}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for CoefficientPriorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoefficientPriorSpec::GPrior { g } => write!(f, "g-prior(g={g})"),
            CoefficientPriorSpec::Ridge { g } => write!(f, "ridge(g={g})"),
        }
    }
}

/// `ln binom(p, k)` via log-gamma.
pub fn ln_choose(p: usize, k: usize) -> f64 {
    debug_assert!(k <= p);
    ln_gamma(p as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((p - k) as f64 + 1.0)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log prior mass of model `model`, up to an additive constant shared by
/// all models of the same `p`.
///
/// Constant conventions per kind:
/// - `Bernoulli`: exactly normalized, `|S| ln w + (p-|S|) ln(1-w)`.
/// - `BetaBinomial`: exactly normalized, `ln B(a+|S|, b+p-|S|) - ln B(a, b)`.
/// - `EbicGamma`: `-gamma ln binom(p, |S|)`, unnormalized.
/// - `Uniform`: `0`, unnormalized.
pub fn log_model_prior(model: &ModelIndex, spec: &ModelPriorSpec) -> Result<f64> {
    spec.validate()?;
    let p = model.p();
    let k = model.size();
    Ok(match *spec {
        ModelPriorSpec::Bernoulli { omega } => {
            k as f64 * omega.ln() + (p - k) as f64 * (1.0 - omega).ln()
        }
        ModelPriorSpec::BetaBinomial { a, b } => {
            ln_beta(a + k as f64, b + (p - k) as f64) - ln_beta(a, b)
        }
        ModelPriorSpec::EbicGamma { gamma } => -gamma * ln_choose(p, k),
        ModelPriorSpec::Uniform => 0.0,
    })
}

/// Log of the normalizing constant `sum_S exp(log_model_prior(S))` for a
/// model space of size `2^p`, computed by summing over model sizes.
pub fn log_prior_normalizer(spec: &ModelPriorSpec, p: usize) -> Result<f64> {
    spec.validate()?;
    match *spec {
        ModelPriorSpec::Bernoulli { .. } | ModelPriorSpec::BetaBinomial { .. } => Ok(0.0),
        ModelPriorSpec::EbicGamma { gamma } => {
            // sum_k binom(p,k)^(1-gamma), via log-sum-exp over sizes
            let terms: Vec<f64> = (0..=p).map(|k| (1.0 - gamma) * ln_choose(p, k)).collect();
            Ok(log_sum_exp(&terms))
        }
        ModelPriorSpec::Uniform => Ok(p as f64 * std::f64::consts::LN_2),
    }
}

/// `log_model_prior` shifted so masses sum to one over the model space.
pub fn log_model_prior_normalized(model: &ModelIndex, spec: &ModelPriorSpec) -> Result<f64> {
    Ok(log_model_prior(model, spec)? - log_prior_normalizer(spec, model.p())?)
}

/// Max-shifted `ln sum exp`; `-inf` entries are skipped.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
