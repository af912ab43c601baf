//! Exact enumeration oracle and chain diagnostics.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::PosteriorKernel;
use crate::model::ModelIndex;
use crate::sampler::log_proposal;

/// Enumeration refuses beyond `2^25` models.
pub const ENUMERATION_MAX_P: usize = 25;
/// The exact transition-matrix check refuses beyond `2^12` states.
pub const TRANSITION_MAX_P: usize = 12;

/// Fully enumerated posterior over a small model space.
#[derive(Clone, Debug)]
pub struct ExactPosterior {
    p: usize,
    probs: Vec<f64>,
    pips: Vec<f64>,
    log_normalizer: f64,
}

impl ExactPosterior {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Normalized model probabilities indexed by bitmask (bit `j-1` set
    /// means variable `j` included).
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, model: &ModelIndex) -> f64 {
        self.probs[model.to_bitmask().unwrap() as usize]
    }

    /// Exact posterior inclusion probabilities.
    pub fn pips(&self) -> &[f64] {
        &self.pips
    }

    /// `ln sum_S exp(log kernel(S))`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// Total variation distance between the post-burn-in empirical model
    /// distribution of `accepted` and the exact posterior.
    pub fn tv_distance(&self, accepted: &[ModelIndex], burn_in: usize) -> Result<f64> {
        if burn_in >= accepted.len() {
            return Err(Error::Config(format!(
                "burn-in {burn_in} not smaller than trace length {}",
                accepted.len()
            )));
        }
        let kept = &accepted[burn_in..];
        let mut counts: HashMap<u64, u64> = HashMap::new();
        for model in kept {
            *counts.entry(model.to_bitmask().unwrap()).or_insert(0) += 1;
        }
        let total = kept.len() as f64;
        let mut tv = 0.0;
        for (mask, &prob) in self.probs.iter().enumerate() {
            let freq = counts.get(&(mask as u64)).copied().unwrap_or(0) as f64 / total;
            tv += (freq - prob).abs();
        }
        Ok(0.5 * tv)
    }

    /// `max_j |estimate_j - pi_j|`.
    pub fn max_pip_gap(&self, estimate: &[f64]) -> f64 {
        self.pips
            .iter()
            .zip(estimate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Enumerates all `2^p` models, normalizing the kernel with a max-shifted
/// sum of exponentials. Models with `-inf` kernel get probability zero.
pub fn enumerate_posterior(kernel: &PosteriorKernel) -> Result<ExactPosterior> {
    let p = kernel.p();
    if p > ENUMERATION_MAX_P {
        return Err(Error::Config(format!(
            "enumeration over 2^{p} models refused (limit p <= {ENUMERATION_MAX_P})"
        )));
    }
    let n_models = 1usize << p;
    let evaluator = kernel.evaluator();
    let log_values: Vec<f64> = (0..n_models)
        .into_par_iter()
        .map(|mask| {
            let model = ModelIndex::from_bitmask(mask as u64, p).unwrap();
            evaluator.log_kernel(&model)
        })
        .collect::<Result<_>>()?;

    let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Numeric("every model has zero posterior mass".into()));
    }
    let mut probs: Vec<f64> = log_values.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for q in probs.iter_mut() {
        *q /= total;
    }
    let mut pips = vec![0.0; p];
    for (mask, &prob) in probs.iter().enumerate() {
        let mut bits = mask;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            pips[j] += prob;
            bits &= bits - 1;
        }
    }
    Ok(ExactPosterior {
        p,
        probs,
        pips,
        log_normalizer: max + total.ln(),
    })
}

/// Builds the exact one-step Metropolis-Hastings transition kernel for the
/// independence proposal `r_trunc` and returns the stationarity residual
/// `max_S' |sum_S pi(S) P(S' | S) - pi(S')|`.
pub fn stationarity_check(kernel: &PosteriorKernel, r_trunc: &[f64]) -> Result<f64> {
    let p = kernel.p();
    if p > TRANSITION_MAX_P {
        return Err(Error::Config(format!(
            "transition matrix over 2^{p} states refused (limit p <= {TRANSITION_MAX_P})"
        )));
    }
    if r_trunc.len() != p {
        return Err(Error::Config(format!(
            "proposal vector has length {}, expected {p}",
            r_trunc.len()
        )));
    }
    let n = 1usize << p;
    let exact = enumerate_posterior(kernel)?;
    let models: Vec<ModelIndex> =
        (0..n).map(|m| ModelIndex::from_bitmask(m as u64, p).unwrap()).collect();
    let log_k: Vec<f64> = models
        .iter()
        .map(|m| kernel.log_kernel_uncached(m))
        .collect::<Result<_>>()?;
    let log_q: Vec<f64> = models.iter().map(|m| log_proposal(m, r_trunc)).collect();

    // accumulate pi P without materializing the n x n matrix
    let mut pi_p = vec![0.0; n];
    for s in 0..n {
        let pi_s = exact.probs()[s];
        let mut stay = 1.0;
        for v in 0..n {
            if v == s {
                continue;
            }
            let alpha = if log_k[v] == f64::NEG_INFINITY {
                0.0
            } else if log_k[s] == f64::NEG_INFINITY {
                1.0
            } else {
                ((log_k[v] - log_k[s]) + (log_q[s] - log_q[v])).min(0.0).exp()
            };
            let prob = log_q[v].exp() * alpha;
            pi_p[v] += pi_s * prob;
            stay -= prob;
        }
        pi_p[s] += pi_s * stay;
    }
    Ok(pi_p
        .iter()
        .zip(exact.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Empirical inclusion frequencies over iterations `burn_in+1 ..= T`.
pub fn inclusion_frequencies(
    accepted: &[ModelIndex],
    p: usize,
    burn_in: usize,
) -> Result<Vec<f64>> {
    if burn_in >= accepted.len() {
        return Err(Error::Config(format!(
            "burn-in {burn_in} not smaller than trace length {}",
            accepted.len()
        )));
    }
    let kept = &accepted[burn_in..];
    let mut counts = vec![0u64; p];
    for model in kept {
        for &j in model.members() {
            counts[(j - 1) as usize] += 1;
        }
    }
    Ok(counts.iter().map(|&c| c as f64 / kept.len() as f64).collect())
}

/// Mean acceptance over iterations `burn_in+1 ..= T`.
pub fn acceptance_rate(accept_flags: &[bool], burn_in: usize) -> Result<f64> {
    if burn_in >= accept_flags.len() {
        return Err(Error::Config(format!(
            "burn-in {burn_in} leaves an empty window (length {})",
            accept_flags.len()
        )));
    }
    let kept = &accept_flags[burn_in..];
    Ok(kept.iter().filter(|&&a| a).count() as f64 / kept.len() as f64)
}

/// Running acceptance rate after each iteration.
pub fn cumulative_acceptance(accept_flags: &[bool]) -> Vec<f64> {
    let mut out = Vec::with_capacity(accept_flags.len());
    let mut hits = 0u64;
    for (t, &a) in accept_flags.iter().enumerate() {
        if a {
            hits += 1;
        }
        out.push(hits as f64 / (t + 1) as f64);
    }
    out
}

/// Rolling-window acceptance rates (one value per complete window).
pub fn rolling_acceptance(accept_flags: &[bool], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > accept_flags.len() {
        return Err(Error::Config(format!(
            "window {window} invalid for series of length {}",
            accept_flags.len()
        )));
    }
    let mut out = Vec::with_capacity(accept_flags.len() - window + 1);
    let mut hits = accept_flags[..window].iter().filter(|&&a| a).count() as i64;
    out.push(hits as f64 / window as f64);
    for t in window..accept_flags.len() {
        hits += accept_flags[t] as i64 - accept_flags[t - window] as i64;
        out.push(hits as f64 / window as f64);
    }
    Ok(out)
}

/// Effective sample size of a 0/1 indicator series via Geyer's initial
/// positive sequence: autocorrelations are summed in consecutive pairs
/// until a pair turns non-positive, and `ESS = N / (2 sum(pairs) - 1)`.
///
/// A constant series has no autocorrelation structure to estimate; by
/// convention its ESS is the series length.
pub fn ess_indicator(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 100 {
        return Err(Error::Config(format!("ess needs at least 100 points, got {n}")));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let c0: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    if c0 <= 0.0 {
        return Ok(nf);
    }
    let autocov = |lag: usize| -> f64 {
        series[..n - lag]
            .iter()
            .zip(&series[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / nf
    };
    let mut tau = 0.0;
    let mut lag = 0usize;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    tau -= 1.0;
    if tau <= 0.0 {
        return Ok(nf);
    }
    Ok(nf / tau)
}

/// The median probability model: all variables with `pip >= 0.5`
/// (inclusive).
pub fn median_probability_model(pips: &[f64]) -> ModelIndex {
    let members = pips
        .iter()
        .enumerate()
        .filter(|(_, pip)| **pip >= 0.5)
        .map(|(j, _)| j as u32 + 1);
    ModelIndex::new(members, pips.len()).unwrap()
}

/// Initial proposal probabilities from (approximate) marginal posterior
/// odds: `PO_j = kernel({j}) / kernel({})`, mapped through the logistic and
/// clamped to `[1/p, 0.9]`.
pub fn marginal_odds_init(kernel: &PosteriorKernel) -> Result<Vec<f64>> {
    let p = kernel.p();
    let log_null = kernel.log_kernel(&ModelIndex::empty(p))?;
    if log_null == f64::NEG_INFINITY {
        return Err(Error::Config(
            "marginal-odds initialization needs a null model with positive mass".into(),
        ));
    }
    let lower = 1.0 / p as f64;
    let mut r0 = Vec::with_capacity(p);
    for j in 1..=p as u32 {
        let log_single = kernel.log_kernel(&ModelIndex::new([j], p)?)?;
        let delta = log_single - log_null;
        let marginal = 1.0 / (1.0 + (-delta).exp());
        r0.push(marginal.max(lower).min(0.9));
    }
    Ok(r0)
}
