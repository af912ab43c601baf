//! Serial model-space samplers: the adaptive independence sampler, its
//! fixed-proposal variant, and the local single-flip (MC3) baseline.
//!
//! The adaptive sampler proposes each variable independently with its own
//! probability `r_j`, accepts with the usual independence Metropolis-Hastings
//! ratio, and after every iteration moves `r_j` toward the empirical
//! inclusion frequency of variable `j` among the sampled models:
//!
//! `r_j(t) = (L_j r_j(0) + sum_i 1{j in S(i)}) / (L_j + t)`
//!
//! so the proposal converges to the posterior inclusion probabilities while
//! the per-step change shrinks like `O(1/t)` (diminishing adaptation).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::analysis::marginal_odds_init;
use crate::error::{Error, Result};
use crate::kernel::PosteriorKernel;
use crate::model::ModelIndex;

/// Attempts to sample a starting model with a finite kernel before falling
/// back to the empty model.
pub const START_RETRIES: usize = 16;

/// How the initial proposal probabilities are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialProposal {
    /// `r_j(0) = q / p` for all `j` (prior expected model size `q`).
    ConstantQ(f64),
    /// An explicit vector in `(0,1)^p`.
    Fixed(Vec<f64>),
    /// Clamped marginal posterior odds from the `p + 1` kernel evaluations
    /// of the null model and all singletons.
    MarginalOdds,
}

impl InitialProposal {
    fn describe(&self) -> String {
        match self {
            InitialProposal::ConstantQ(q) => format!("q/p:{q}"),
            InitialProposal::Fixed(_) => "vector".to_string(),
            InitialProposal::MarginalOdds => "marginal-odds".to_string(),
        }
    }
}

/// Adaptation weights `L_j` (pseudo-sample size of the prior on `pi_j`).
#[derive(Clone, Debug, PartialEq)]
pub enum AdaptWeight {
    Constant(f64),
    PerVariable(Vec<f64>),
}

impl AdaptWeight {
    fn describe(&self) -> String {
        match self {
            AdaptWeight::Constant(l) => format!("const:{l}"),
            AdaptWeight::PerVariable(_) => "per-variable".to_string(),
        }
    }

    pub(crate) fn resolve(&self, p: usize) -> Result<Vec<f64>> {
        let l = match self {
            AdaptWeight::Constant(l) => vec![*l; p],
            AdaptWeight::PerVariable(v) => {
                if v.len() != p {
                    return Err(Error::Config(format!(
                        "adaptation weights have length {}, expected {p}",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if l.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Config("adaptation weights must be positive".into()));
        }
        Ok(l)
    }
}

/// Configuration of a serial adaptive run.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Number of iterations `T`.
    pub iterations: usize,
    /// Burn-in `b`; all iterations are traced, burn-in only affects the
    /// automatic stopping frequencies and downstream summaries.
    pub burn_in: usize,
    pub r0: InitialProposal,
    pub adapt_weight: AdaptWeight,
    /// Truncation bound: proposals are clamped to `[epsilon, 1 - epsilon]`.
    pub epsilon: f64,
    pub seed: u64,
    /// Optional starting model; sampled from `r0` when absent.
    pub start: Option<ModelIndex>,
    /// Stop at the first `t > burn_in` with
    /// `max_j |f_j(t) - r_j(t)| <= delta`, where `f` are the post-burn-in
    /// inclusion frequencies.
    pub auto_stop: Option<f64>,
}

impl SamplerConfig {
    /// Defaults: `L_j = p`, `epsilon = min(1/p, 0.25)`, `r0 = q/p` with
    /// `q = min(5, p/2)`, no burn-in, no auto-stop.
    pub fn new(p: usize, iterations: usize, seed: u64) -> Self {
        SamplerConfig {
            iterations,
            burn_in: 0,
            r0: InitialProposal::ConstantQ(5.0f64.min(p as f64 / 2.0)),
            adapt_weight: AdaptWeight::Constant(p as f64),
            epsilon: (1.0 / p as f64).min(0.25),
            seed,
            start: None,
            auto_stop: None,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("need at least one iteration".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be smaller than T = {}",
                self.burn_in, self.iterations
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        if let Some(delta) = self.auto_stop {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::Config(format!(
                    "auto-stop delta must lie in (0,1), got {delta}"
                )));
            }
        }
        if let Some(start) = &self.start {
            if start.p() != p {
                return Err(Error::Config(format!(
                    "start model has p = {}, kernel has p = {p}",
                    start.p()
                )));
            }
        }
        if let InitialProposal::ConstantQ(q) = self.r0 {
            if !(q > 0.0 && q < p as f64) {
                return Err(Error::Config(format!("q must lie in (0, p), got {q}")));
            }
        }
        Ok(())
    }

    pub(crate) fn resolve_r0(&self, kernel: &PosteriorKernel) -> Result<Vec<f64>> {
        let p = kernel.p();
        let r0 = match &self.r0 {
            InitialProposal::ConstantQ(q) => vec![q / p as f64; p],
            InitialProposal::Fixed(v) => v.clone(),
            InitialProposal::MarginalOdds => marginal_odds_init(kernel)?,
        };
        if r0.len() != p {
            return Err(Error::Config(format!(
                "initial proposal vector has length {}, expected {p}",
                r0.len()
            )));
        }
        if r0.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::Config(
                "initial proposal probabilities must lie in (0,1)".into(),
            ));
        }
        Ok(r0)
    }
}

/// Adaptive state of a chain: the proposal vector and everything needed to
/// reproduce it exactly from counts.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalState {
    r: Vec<f64>,
    r0: Vec<f64>,
    l: Vec<f64>,
    epsilon: f64,
    counts: Vec<u64>,
    t: u64,
}

impl ProposalState {
    pub fn new(r0: Vec<f64>, l: Vec<f64>, epsilon: f64) -> Result<Self> {
        if r0.len() != l.len() || r0.is_empty() {
            return Err(Error::Config("r0 and L must have equal positive length".into()));
        }
        if r0.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::Config("r0 must lie in (0,1)^p".into()));
        }
        if l.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Config("L must be positive".into()));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::Config(format!("epsilon must lie in (0,0.5), got {epsilon}")));
        }
        let p = r0.len();
        Ok(ProposalState {
            r: r0.clone(),
            r0,
            l,
            epsilon,
            counts: vec![0; p],
            t: 0,
        })
    }

    pub fn p(&self) -> usize {
        self.r.len()
    }

    /// Current (untruncated) proposal probabilities.
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn r0(&self) -> &[f64] {
        &self.r0
    }

    pub fn adapt_weights(&self) -> &[f64] {
        &self.l
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Inclusion counts of the accepted models so far.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Iterations absorbed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// The truncated view `[epsilon, 1 - epsilon]` used for proposing.
    pub fn truncated(&self) -> Vec<f64> {
        truncate(&self.r, self.epsilon)
    }

    /// Advances one iteration with the accepted model.
    ///
    /// Returns `(max_j |r_j(t) - r_j(t-1)|, bound_exceeded)`, where the bound
    /// is the per-variable diminishing-adaptation bound `2 / (L_j + t - 1)`.
    pub fn update(&mut self, accepted: &ModelIndex) -> (f64, bool) {
        self.t += 1;
        for &j in accepted.members() {
            self.counts[(j - 1) as usize] += 1;
        }
        let tf = self.t as f64;
        let mut max_delta = 0.0f64;
        let mut exceeded = false;
        for j in 0..self.r.len() {
            let new_r = (self.l[j] * self.r0[j] + self.counts[j] as f64) / (self.l[j] + tf);
            let delta = (new_r - self.r[j]).abs();
            if delta > 2.0 / (self.l[j] + tf - 1.0) {
                exceeded = true;
            }
            max_delta = max_delta.max(delta);
            self.r[j] = new_r;
        }
        (max_delta, exceeded)
    }

    /// Recomputes `r` from `(r0, L, counts, t)`; bit-identical to the stored
    /// vector at every point in time.
    pub fn recomputed_r(&self) -> Vec<f64> {
        let tf = self.t as f64;
        (0..self.r.len())
            .map(|j| (self.l[j] * self.r0[j] + self.counts[j] as f64) / (self.l[j] + tf))
            .collect()
    }

    /// Pseudo-posterior variance of the inclusion probability of variable
    /// `j` (1-based): `r_j (1 - r_j) / (L_j + t + 1)`.
    pub fn pseudo_posterior_variance(&self, j: u32) -> f64 {
        let idx = (j - 1) as usize;
        self.r[idx] * (1.0 - self.r[idx]) / (self.l[idx] + self.t as f64 + 1.0)
    }
}

/// Componentwise clamp of the proposal vector to `[epsilon, 1 - epsilon]`.
pub fn truncate(r: &[f64], epsilon: f64) -> Vec<f64> {
    r.iter().map(|&x| x.clamp(epsilon, 1.0 - epsilon)).collect()
}

fn truncate_into(r: &[f64], epsilon: f64, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(r) {
        *o = x.clamp(epsilon, 1.0 - epsilon);
    }
}

/// Draws a model by including each variable `j` independently with
/// probability `r_trunc[j-1]`. Always consumes exactly `p` uniform draws.
pub fn propose<R: Rng>(r_trunc: &[f64], rng: &mut R) -> ModelIndex {
    let mut members = Vec::new();
    for (j, &pr) in r_trunc.iter().enumerate() {
        if rng.random::<f64>() < pr {
            members.push(j as u32 + 1);
        }
    }
    // indices are produced sorted and in range
    ModelIndex::new(members, r_trunc.len()).unwrap()
}

/// Log proposal mass of `model` under the independent Bernoulli proposal:
/// `sum_{j in V} ln r_j + sum_{j not in V} ln(1 - r_j)`.
pub fn log_proposal(model: &ModelIndex, r_trunc: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut members = model.members().iter().peekable();
    for (j, &pr) in r_trunc.iter().enumerate() {
        if members.peek() == Some(&&(j as u32 + 1)) {
            members.next();
            total += pr.ln();
        } else {
            total += (1.0 - pr).ln();
        }
    }
    total
}

/// Log acceptance probability of the independence Metropolis-Hastings move
/// from `current` to `proposed`:
///
/// `min{0, [log k(V) - log k(S)] + [log q(S; r) - log q(V; r)]}`.
///
/// The proposal ratio is accumulated over the symmetric difference only,
/// which is algebraically identical to the full-product ratio. A `-inf`
/// proposed kernel auto-rejects.
pub fn accept_log_ratio(
    log_kernel_current: f64,
    log_kernel_proposed: f64,
    current: &ModelIndex,
    proposed: &ModelIndex,
    r_trunc: &[f64],
) -> f64 {
    if log_kernel_proposed == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let (only_current, only_proposed) = current.symmetric_difference(proposed);
    let logit = |j: u32| {
        let r = r_trunc[(j - 1) as usize];
        r.ln() - (1.0 - r).ln()
    };
    let proposal_term: f64 = only_current.iter().map(|&j| logit(j)).sum::<f64>()
        - only_proposed.iter().map(|&j| logit(j)).sum::<f64>();
    let log_alpha = (log_kernel_proposed - log_kernel_current) + proposal_term;
    log_alpha.min(0.0)
}

/// Full record of a sampler run. All iterations are stored; burn-in is
/// applied downstream.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub proposed: Vec<ModelIndex>,
    pub accepted: Vec<ModelIndex>,
    pub accept_flags: Vec<bool>,
    /// Log kernel of the accepted model at each iteration.
    pub log_kernel: Vec<f64>,
    pub start_model: ModelIndex,
    /// Final adaptive state; `None` for the fixed-proposal and MC3 chains.
    pub final_state: Option<ProposalState>,
    pub seed: u64,
    pub kernel_id: String,
    /// One-line echo of the effective configuration.
    pub header_echo: String,
    /// Iteration at which the automatic stopping rule fired, if it did.
    pub stopped_at: Option<usize>,
    /// Iterations violating the diminishing-adaptation bound (always 0).
    pub adaptation_violations: usize,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn p(&self) -> usize {
        self.start_model.p()
    }

    /// Column sums of the accepted-model indicators, recounted from the
    /// records.
    pub fn inclusion_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.p()];
        for model in &self.accepted {
            for &j in model.members() {
                counts[(j - 1) as usize] += 1;
            }
        }
        counts
    }
}

enum EngineMode {
    Adaptive(ProposalState),
    FixedR(Vec<f64>),
}

enum EngineStart {
    SampleFromR0,
    Model(ModelIndex),
}

#[allow(clippy::too_many_arguments)]
fn run_engine(
    kernel: &PosteriorKernel,
    mut mode: EngineMode,
    start: EngineStart,
    iterations: usize,
    burn_in: usize,
    auto_stop: Option<f64>,
    seed: u64,
    header_echo: String,
    rng: &mut ChaCha12Rng,
) -> Result<ChainTrace> {
    let p = kernel.p();

    let (mut current, mut log_k_cur) = match start {
        EngineStart::Model(model) => {
            let lk = kernel.log_kernel(&model)?;
            if lk == f64::NEG_INFINITY {
                return Err(Error::Config(format!(
                    "starting model {model} has zero posterior mass"
                )));
            }
            (model, lk)
        }
        EngineStart::SampleFromR0 => {
            let r0 = match &mode {
                EngineMode::Adaptive(state) => state.r0().to_vec(),
                EngineMode::FixedR(r) => r.clone(),
            };
            let mut found = None;
            for _ in 0..START_RETRIES {
                let cand = propose(&r0, rng);
                let lk = kernel.log_kernel(&cand)?;
                if lk > f64::NEG_INFINITY {
                    found = Some((cand, lk));
                    break;
                }
            }
            match found {
                Some(pair) => pair,
                None => {
                    let empty = ModelIndex::empty(p);
                    let lk = kernel.log_kernel(&empty)?;
                    if lk == f64::NEG_INFINITY {
                        return Err(Error::Config(
                            "no starting model with finite kernel found (even the null model \
                             has zero mass)"
                                .into(),
                        ));
                    }
                    (empty, lk)
                }
            }
        }
    };

    let start_model = current.clone();
    let mut proposed_rec = Vec::with_capacity(iterations);
    let mut accepted_rec = Vec::with_capacity(iterations);
    let mut accept_flags = Vec::with_capacity(iterations);
    let mut log_kernels = Vec::with_capacity(iterations);
    let mut r_trunc = vec![0.0; p];
    if let EngineMode::FixedR(r) = &mode {
        r_trunc.copy_from_slice(r);
    }
    let mut counts_at_burn_in: Option<Vec<u64>> = if burn_in == 0 { Some(vec![0; p]) } else { None };
    let mut stopped_at = None;
    let mut adaptation_violations = 0usize;

    for t in 1..=iterations {
        if let EngineMode::Adaptive(state) = &mode {
            truncate_into(state.r(), state.epsilon(), &mut r_trunc);
        }
        let proposal = propose(&r_trunc, rng);
        let log_k_prop = kernel.log_kernel(&proposal).map_err(|e| {
            Error::Numeric(format!("kernel failure at iteration {t}: {e}"))
        })?;
        let log_alpha = accept_log_ratio(log_k_cur, log_k_prop, &current, &proposal, &r_trunc);
        let u: f64 = rng.random();
        let accept = log_alpha >= 0.0 || u.ln() < log_alpha;
        if accept {
            current = proposal.clone();
            log_k_cur = log_k_prop;
        }
        proposed_rec.push(proposal);
        accepted_rec.push(current.clone());
        accept_flags.push(accept);
        log_kernels.push(log_k_cur);

        if let EngineMode::Adaptive(state) = &mut mode {
            let (_, exceeded) = state.update(&current);
            if exceeded {
                adaptation_violations += 1;
            }
            if t == burn_in {
                counts_at_burn_in = Some(state.counts().to_vec());
            }
            if let (Some(delta), Some(base)) = (auto_stop, counts_at_burn_in.as_ref()) {
                if t > burn_in {
                    let span = (t - burn_in) as f64;
                    let max_gap = state
                        .counts()
                        .iter()
                        .zip(base)
                        .zip(state.r())
                        .map(|((&c, &c0), &r)| ((c - c0) as f64 / span - r).abs())
                        .fold(0.0f64, f64::max);
                    if max_gap <= delta {
                        stopped_at = Some(t);
                        break;
                    }
                }
            }
        }
    }

    Ok(ChainTrace {
        proposed: proposed_rec,
        accepted: accepted_rec,
        accept_flags,
        log_kernel: log_kernels,
        start_model,
        final_state: match mode {
            EngineMode::Adaptive(state) => Some(state),
            EngineMode::FixedR(_) => None,
        },
        seed,
        kernel_id: kernel.id().to_string(),
        header_echo,
        stopped_at,
        adaptation_violations,
    })
}

#[allow(clippy::too_many_arguments)]
fn echo(
    sampler: &str,
    kernel: &PosteriorKernel,
    iterations: usize,
    burn_in: usize,
    epsilon: f64,
    r0: &str,
    l: &str,
    seed: u64,
    start: &str,
    auto_stop: Option<f64>,
) -> String {
    let stop = match auto_stop {
        Some(d) => format!("{d}"),
        None => "none".to_string(),
    };
    format!(
        "seed={seed} sampler={sampler} kernel={} p={} T={iterations} burn_in={burn_in} \
         L={l} epsilon={epsilon} r0={r0} start={start} auto_stop={stop}",
        kernel.id(),
        kernel.p(),
    )
}

/// Runs the adaptive independence sampler for `cfg.iterations` iterations.
pub fn run_madasub(kernel: &PosteriorKernel, cfg: &SamplerConfig) -> Result<ChainTrace> {
    let p = kernel.p();
    cfg.validate(p)?;
    let r0 = cfg.resolve_r0(kernel)?;
    let l = cfg.adapt_weight.resolve(p)?;
    let state = ProposalState::new(r0, l, cfg.epsilon)?;
    let header = echo(
        "madasub",
        kernel,
        cfg.iterations,
        cfg.burn_in,
        cfg.epsilon,
        &cfg.r0.describe(),
        &cfg.adapt_weight.describe(),
        cfg.seed,
        &cfg.start.as_ref().map_or("sampled".to_string(), |s| s.to_hex()),
        cfg.auto_stop,
    );
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let start = match &cfg.start {
        Some(model) => EngineStart::Model(model.clone()),
        None => EngineStart::SampleFromR0,
    };
    run_engine(
        kernel,
        EngineMode::Adaptive(state),
        start,
        cfg.iterations,
        cfg.burn_in,
        cfg.auto_stop,
        cfg.seed,
        header,
        &mut rng,
    )
}

/// Entry point for the parallel runner: resumes a chain segment with a given
/// state and a continuing RNG. Not part of the public surface.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_segment(
    kernel: &PosteriorKernel,
    state: ProposalState,
    start: Option<ModelIndex>,
    iterations: usize,
    seed: u64,
    header_echo: String,
    rng: &mut ChaCha12Rng,
) -> Result<ChainTrace> {
    let start = match start {
        Some(model) => EngineStart::Model(model),
        None => EngineStart::SampleFromR0,
    };
    run_engine(
        kernel,
        EngineMode::Adaptive(state),
        start,
        iterations,
        0,
        None,
        seed,
        header_echo,
        rng,
    )
}

pub(crate) fn segment_echo(
    kernel: &PosteriorKernel,
    iterations: usize,
    epsilon: f64,
    r0: &InitialProposal,
    l: &AdaptWeight,
    seed: u64,
    start: &Option<ModelIndex>,
) -> String {
    echo(
        "madasub",
        kernel,
        iterations,
        0,
        epsilon,
        &r0.describe(),
        &l.describe(),
        seed,
        &start.as_ref().map_or("sampled".to_string(), |s| s.to_hex()),
        None,
    )
}

/// Independence sampler with a fixed proposal vector `r` (no adaptation,
/// no truncation; `r` must already lie strictly inside `(0,1)^p`).
pub fn run_independence_fixed(
    kernel: &PosteriorKernel,
    r: &[f64],
    iterations: usize,
    seed: u64,
) -> Result<ChainTrace> {
    let p = kernel.p();
    if r.len() != p {
        return Err(Error::Config(format!(
            "proposal vector has length {}, expected {p}",
            r.len()
        )));
    }
    if r.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(Error::Config("fixed proposal probabilities must lie in (0,1)".into()));
    }
    if iterations == 0 {
        return Err(Error::Config("need at least one iteration".into()));
    }
    let header = echo(
        "independence-fixed",
        kernel,
        iterations,
        0,
        0.0,
        "vector",
        "none",
        seed,
        "sampled",
        None,
    );
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    run_engine(
        kernel,
        EngineMode::FixedR(r.to_vec()),
        EngineStart::SampleFromR0,
        iterations,
        0,
        None,
        seed,
        header,
        &mut rng,
    )
}

/// Local MC3 baseline: each iteration picks one variable uniformly at random
/// and proposes toggling it (a symmetric proposal).
pub fn run_mc3(
    kernel: &PosteriorKernel,
    iterations: usize,
    seed: u64,
    start: Option<ModelIndex>,
) -> Result<ChainTrace> {
    let p = kernel.p();
    if iterations == 0 {
        return Err(Error::Config("need at least one iteration".into()));
    }
    let start = start.unwrap_or_else(|| ModelIndex::empty(p));
    if start.p() != p {
        return Err(Error::Config(format!(
            "start model has p = {}, kernel has p = {p}",
            start.p()
        )));
    }
    let mut log_k_cur = kernel.log_kernel(&start)?;
    if log_k_cur == f64::NEG_INFINITY {
        return Err(Error::Config(format!(
            "starting model {start} has zero posterior mass"
        )));
    }
    let header = echo(
        "mc3",
        kernel,
        iterations,
        0,
        0.0,
        "none",
        "none",
        seed,
        &start.to_hex(),
        None,
    );
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut current = start.clone();
    let mut proposed_rec = Vec::with_capacity(iterations);
    let mut accepted_rec = Vec::with_capacity(iterations);
    let mut accept_flags = Vec::with_capacity(iterations);
    let mut log_kernels = Vec::with_capacity(iterations);

    for t in 1..=iterations {
        let j = rng.random_range(0..p) as u32 + 1;
        let proposal = current.toggled(j)?;
        let log_k_prop = kernel.log_kernel(&proposal).map_err(|e| {
            Error::Numeric(format!("kernel failure at iteration {t}: {e}"))
        })?;
        let log_alpha = if log_k_prop == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            (log_k_prop - log_k_cur).min(0.0)
        };
        let u: f64 = rng.random();
        let accept = log_alpha >= 0.0 || u.ln() < log_alpha;
        if accept {
            current = proposal.clone();
            log_k_cur = log_k_prop;
        }
        proposed_rec.push(proposal);
        accepted_rec.push(current.clone());
        accept_flags.push(accept);
        log_kernels.push(log_k_cur);
    }

    Ok(ChainTrace {
        proposed: proposed_rec,
        accepted: accepted_rec,
        accept_flags,
        log_kernel: log_kernels,
        start_model: start,
        final_state: None,
        seed,
        kernel_id: kernel.id().to_string(),
        header_echo: header,
        stopped_at: None,
        adaptation_violations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn truncate_clamps_both_ends() {
        assert_eq!(truncate(&[0.001], 0.05), vec![0.05]);
        assert_eq!(truncate(&[0.999], 0.05), vec![0.95]);
        assert_eq!(truncate(&[0.5], 0.05), vec![0.5]);
    }

    #[test]
    fn propose_is_uniform_for_half_probabilities() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let rt = [0.5, 0.5];
        let mut counts = [0u64; 4];
        let draws = 100_000;
        for _ in 0..draws {
            let v = propose(&rt, &mut rng);
            counts[v.to_bitmask().unwrap() as usize] += 1;
        }
        let expected = draws as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9% quantile of chi-squared with 3 degrees of freedom
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn propose_mean_size_matches_sum_of_probabilities() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let epsilon = 0.1;
        let rt = [0.1, 0.35, 0.6, 0.85, 0.25];
        let target: f64 = rt.iter().sum();
        assert!(target >= epsilon * rt.len() as f64);
        let draws = 100_000;
        let total: usize = (0..draws).map(|_| propose(&rt, &mut rng).size()).sum();
        let mean = total as f64 / draws as f64;
        let var: f64 = rt.iter().map(|r| r * (1.0 - r)).sum();
        let se = (var / draws as f64).sqrt();
        assert!((mean - target).abs() <= 3.0 * se, "mean {mean} vs {target}");
    }

    #[test]
    fn propose_is_seed_deterministic() {
        let rt = [0.3, 0.7, 0.5];
        let mut a = ChaCha12Rng::seed_from_u64(99);
        let mut b = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..50 {
            assert_eq!(propose(&rt, &mut a), propose(&rt, &mut b));
        }
    }

    #[test]
    fn log_proposal_uniform_case() {
        let rt = [0.5; 3];
        for mask in 0u64..8 {
            let v = ModelIndex::from_bitmask(mask, 3).unwrap();
            assert!((log_proposal(&v, &rt) - 3.0 * 0.5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn log_proposal_normalizes() {
        let rt = [0.12, 0.5, 0.77, 0.31, 0.9, 0.05, 0.66, 0.44, 0.2, 0.58];
        let total: f64 = (0u64..1 << 10)
            .map(|m| log_proposal(&ModelIndex::from_bitmask(m, 10).unwrap(), &rt).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_proposal_argmax_is_median_probability_model() {
        let rt = [0.62, 0.18, 0.53, 0.91, 0.33, 0.49];
        let mut best = (f64::NEG_INFINITY, 0u64);
        for m in 0u64..1 << 6 {
            let lp = log_proposal(&ModelIndex::from_bitmask(m, 6).unwrap(), &rt);
            if lp > best.0 {
                best = (lp, m);
            }
        }
        let mpm: u64 = rt
            .iter()
            .enumerate()
            .filter(|(_, r)| **r >= 0.5)
            .map(|(j, _)| 1u64 << j)
            .sum();
        assert_eq!(best.1, mpm);
    }

    #[test]
    fn accept_ratio_is_zero_for_identical_models() {
        let rt = [0.3, 0.7];
        let s = ModelIndex::new([1], 2).unwrap();
        assert_eq!(accept_log_ratio(-5.0, -5.0, &s, &s, &rt), 0.0);
    }

    #[test]
    fn accept_ratio_is_zero_for_perfect_proposal() {
        // target equal to the proposal: the ratio cancels for every pair
        let rt = vec![0.22, 0.58, 0.81];
        let kernel = PosteriorKernel::independent_bernoulli(rt.clone()).unwrap();
        for s_mask in 0u64..8 {
            for v_mask in 0u64..8 {
                let s = ModelIndex::from_bitmask(s_mask, 3).unwrap();
                let v = ModelIndex::from_bitmask(v_mask, 3).unwrap();
                let la = accept_log_ratio(
                    kernel.log_kernel(&s).unwrap(),
                    kernel.log_kernel(&v).unwrap(),
                    &s,
                    &v,
                    &rt,
                );
                assert!(la.abs() < 1e-12, "({s}, {v}): {la}");
            }
        }
    }

    #[test]
    fn symmetric_difference_ratio_matches_full_products() {
        let rt = [0.15, 0.6, 0.93];
        let kernel = PosteriorKernel::uniform(3);
        for s_mask in 0u64..8 {
            for v_mask in 0u64..8 {
                let s = ModelIndex::from_bitmask(s_mask, 3).unwrap();
                let v = ModelIndex::from_bitmask(v_mask, 3).unwrap();
                let ks = kernel.log_kernel(&s).unwrap();
                let kv = kernel.log_kernel(&v).unwrap();
                let fast = accept_log_ratio(ks, kv, &s, &v, &rt);
                let brute = ((kv - ks) + (log_proposal(&s, &rt) - log_proposal(&v, &rt))).min(0.0);
                assert!((fast - brute).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn update_matches_hand_arithmetic() {
        // L = 20, r0 = 0.5, one inclusion: (20 * 0.5 + 1) / 21
        let mut state = ProposalState::new(vec![0.5, 0.5], vec![20.0, 20.0], 0.1).unwrap();
        state.update(&ModelIndex::new([1], 2).unwrap());
        assert!((state.r()[0] - 11.0 / 21.0).abs() < 1e-15);
        assert!((state.r()[1] - 10.0 / 21.0).abs() < 1e-15);
        assert_eq!(state.counts(), &[1, 0]);
        assert_eq!(state.t(), 1);
    }

    #[test]
    fn never_included_variable_decays_monotonically() {
        let mut state = ProposalState::new(vec![0.4], vec![8.0], 0.01).unwrap();
        let mut prev = state.r()[0];
        for t in 1..=200u64 {
            state.update(&ModelIndex::empty(1));
            let r = state.r()[0];
            assert!(r < prev);
            assert!((r - 8.0 * 0.4 / (8.0 + t as f64)).abs() < 1e-15);
            prev = r;
        }
    }

    #[test]
    fn closed_form_agrees_with_recursive_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let p = 4;
        let mut state =
            ProposalState::new(vec![0.3, 0.5, 0.7, 0.2], vec![4.0, 10.0, 1.5, 40.0], 0.05)
                .unwrap();
        let mut recursive: Vec<f64> = state.r().to_vec();
        for _ in 0..10_000 {
            let mask: u64 = rng.random_range(0..1 << p);
            let model = ModelIndex::from_bitmask(mask, p).unwrap();
            let t_new = state.t() as f64 + 1.0;
            for j in 0..p {
                let ind = if model.contains(j as u32 + 1) { 1.0 } else { 0.0 };
                let l = state.adapt_weights()[j];
                recursive[j] = (1.0 - 1.0 / (l + t_new)) * recursive[j] + ind / (l + t_new);
            }
            state.update(&model);
            for j in 0..p {
                assert!((recursive[j] - state.r()[j]).abs() < 1e-12);
            }
        }
        // bit-for-bit reconstruction from counts
        let recomputed = state.recomputed_r();
        for j in 0..p {
            assert_eq!(recomputed[j].to_bits(), state.r()[j].to_bits());
        }
    }

    #[test]
    fn pseudo_posterior_variance_query() {
        let mut state = ProposalState::new(vec![0.5], vec![10.0], 0.1).unwrap();
        // prior variance: r0 (1 - r0) / (L + 1)
        assert!((state.pseudo_posterior_variance(1) - 0.25 / 11.0).abs() < 1e-15);
        state.update(&ModelIndex::new([1], 1).unwrap());
        let r = state.r()[0];
        assert!((state.pseudo_posterior_variance(1) - r * (1.0 - r) / 12.0).abs() < 1e-15);
    }

    #[test]
    fn seed_determinism_of_runs() {
        let kernel = PosteriorKernel::independent_bernoulli(vec![0.3, 0.6, 0.2, 0.8]).unwrap();
        let cfg = SamplerConfig::new(4, 500, 7);
        let a = run_madasub(&kernel, &cfg).unwrap();
        let b = run_madasub(&kernel, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfect_fixed_proposal_accepts_everything() {
        let r = vec![0.25, 0.5, 0.75, 0.4];
        let kernel = PosteriorKernel::independent_bernoulli(r.clone()).unwrap();
        let trace = run_independence_fixed(&kernel, &r, 10_000, 11).unwrap();
        assert!(trace.accept_flags.iter().all(|&a| a));
    }

    #[test]
    fn adaptive_run_with_huge_weight_accepts_almost_everything() {
        // with L ~ 1e12 the proposal stays pinned at r0 = target
        let r = vec![0.3, 0.5, 0.2];
        let kernel = PosteriorKernel::independent_bernoulli(r.clone()).unwrap();
        let mut cfg = SamplerConfig::new(3, 2000, 5);
        cfg.r0 = InitialProposal::Fixed(r);
        cfg.adapt_weight = AdaptWeight::Constant(1e12);
        cfg.epsilon = 0.01;
        let trace = run_madasub(&kernel, &cfg).unwrap();
        let rate =
            trace.accept_flags.iter().filter(|&&a| a).count() as f64 / trace.len() as f64;
        assert!(rate >= 0.999, "rate = {rate}");
    }

    #[test]
    fn trace_invariants_hold() {
        let kernel = PosteriorKernel::independent_bernoulli(vec![0.4, 0.3, 0.7, 0.5, 0.2]).unwrap();
        let cfg = SamplerConfig::new(5, 2000, 13);
        let trace = run_madasub(&kernel, &cfg).unwrap();
        // accepted[t] == proposed[t] iff the flag is set, else the previous model
        let mut prev = trace.start_model.clone();
        for t in 0..trace.len() {
            if trace.accept_flags[t] {
                assert_eq!(trace.accepted[t], trace.proposed[t]);
            } else {
                assert_eq!(trace.accepted[t], prev);
            }
            prev = trace.accepted[t].clone();
        }
        // sampler-maintained counts equal recounted column sums
        let state = trace.final_state.as_ref().unwrap();
        assert_eq!(state.counts(), trace.inclusion_counts().as_slice());
        assert_eq!(state.t(), trace.len() as u64);
        // no diminishing-adaptation violations, bit-exact reconstruction
        assert_eq!(trace.adaptation_violations, 0);
        let recomputed = state.recomputed_r();
        for j in 0..5 {
            assert_eq!(recomputed[j].to_bits(), state.r()[j].to_bits());
        }
    }

    #[test]
    fn auto_stop_fires_and_reports_iteration() {
        let kernel = PosteriorKernel::independent_bernoulli(vec![0.5, 0.5]).unwrap();
        let mut cfg = SamplerConfig::new(2, 100_000, 3);
        cfg.burn_in = 100;
        cfg.auto_stop = Some(0.02);
        let trace = run_madasub(&kernel, &cfg).unwrap();
        let t_c = trace.stopped_at.expect("should stop early");
        assert_eq!(trace.len(), t_c);
        assert!(t_c > 100 && t_c < 100_000);
        // the stopping condition held at t_c
        let state = trace.final_state.unwrap();
        let base: Vec<u64> = {
            let mut counts = vec![0u64; 2];
            for model in &trace.accepted[..100] {
                for &j in model.members() {
                    counts[(j - 1) as usize] += 1;
                }
            }
            counts
        };
        let span = (t_c - 100) as f64;
        let max_gap = state
            .counts()
            .iter()
            .zip(&base)
            .zip(state.r())
            .map(|((&c, &c0), &r)| ((c - c0) as f64 / span - r).abs())
            .fold(0.0f64, f64::max);
        assert!(max_gap <= 0.02);
    }

    #[test]
    fn start_falls_back_to_null_model() {
        // only the null model has mass; sampling from r0 = 0.9 nearly always
        // proposes something else
        let mut table = vec![f64::NEG_INFINITY; 16];
        table[0] = 0.0;
        let kernel = PosteriorKernel::from_table(4, table).unwrap();
        let mut cfg = SamplerConfig::new(4, 50, 21);
        cfg.r0 = InitialProposal::Fixed(vec![0.9; 4]);
        let trace = run_madasub(&kernel, &cfg).unwrap();
        assert!(trace.accepted.iter().all(|m| m.is_empty()));
    }

    #[test]
    fn zero_mass_everywhere_is_a_config_error() {
        let kernel = PosteriorKernel::from_table(2, vec![f64::NEG_INFINITY; 4]).unwrap();
        let cfg = SamplerConfig::new(2, 10, 1);
        assert!(matches!(run_madasub(&kernel, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn mc3_accepts_every_move_under_uniform_kernel() {
        let kernel = PosteriorKernel::uniform(6);
        let trace = run_mc3(&kernel, 5000, 2, None).unwrap();
        assert!(trace.accept_flags.iter().all(|&a| a));
        // neighbouring models differ by exactly one variable
        let mut prev = trace.start_model.clone();
        for model in &trace.accepted {
            let (a, b) = prev.symmetric_difference(model);
            assert_eq!(a.len() + b.len(), 1);
            prev = model.clone();
        }
    }

    #[test]
    fn mc3_gets_trapped_by_a_two_point_target() {
        // mass concentrated on the null and full models; single-flip moves
        // must pass through a deep valley
        let p = 4;
        let mut table = vec![-30.0; 16];
        table[0] = 0.0;
        table[15] = 0.0;
        let kernel = PosteriorKernel::from_table(p, table).unwrap();
        let trace = run_mc3(&kernel, 20_000, 4, None).unwrap();
        let post: &[bool] = &trace.accept_flags[10_000..];
        let rate = post.iter().filter(|&&a| a).count() as f64 / post.len() as f64;
        assert!(rate < 0.01, "rate = {rate}");
    }

    #[test]
    fn independence_chain_with_one_variable_is_two_state() {
        // p = 1: exact two-state Markov chain with hand-computable acceptance
        let kernel = PosteriorKernel::from_table(1, vec![0.0, (3.0f64).ln()]).unwrap();
        let r = 0.5;
        let trace = run_independence_fixed(&kernel, &[r], 200_000, 6).unwrap();
        // from {}: propose {1} w.p. 1/2, accept min(1, 3) = 1
        // from {1}: propose {} w.p. 1/2, accept min(1, 1/3) = 1/3
        // stationary pi = (1/4, 3/4); long-run acceptance =
        //   pi0 * (1/2 * 1 + 1/2 * 1) + pi1 * (1/2 * 1/3 + 1/2 * 1)
        let expect = 0.25 * 1.0 + 0.75 * (0.5 / 3.0 + 0.5);
        let rate =
            trace.accept_flags.iter().filter(|&&a| a).count() as f64 / trace.len() as f64;
        assert!((rate - expect).abs() < 0.01, "rate {rate} vs {expect}");
        let f1 = trace.accepted.iter().filter(|m| !m.is_empty()).count() as f64
            / trace.len() as f64;
        assert!((f1 - 0.75).abs() < 0.01, "f1 = {f1}");
    }

    #[test]
    fn config_validation_errors() {
        let kernel = PosteriorKernel::uniform(4);
        let mut cfg = SamplerConfig::new(4, 0, 1);
        assert!(run_madasub(&kernel, &cfg).is_err());
        cfg = SamplerConfig::new(4, 10, 1);
        cfg.burn_in = 10;
        assert!(run_madasub(&kernel, &cfg).is_err());
        cfg = SamplerConfig::new(4, 10, 1);
        cfg.epsilon = 0.5;
        assert!(run_madasub(&kernel, &cfg).is_err());
        cfg = SamplerConfig::new(4, 10, 1);
        cfg.r0 = InitialProposal::Fixed(vec![0.5; 3]);
        assert!(run_madasub(&kernel, &cfg).is_err());
        cfg = SamplerConfig::new(4, 10, 1);
        cfg.r0 = InitialProposal::ConstantQ(4.5);
        assert!(run_madasub(&kernel, &cfg).is_err());
    }

    proptest! {
        #[test]
        fn truncate_is_idempotent(
            values in proptest::collection::vec(0.0f64..=1.0, 1..20),
            epsilon in 0.001f64..0.49,
        ) {
            let once = truncate(&values, epsilon);
            let twice = truncate(&once, epsilon);
            prop_assert_eq!(&once, &twice);
            for v in &once {
                prop_assert!(*v >= epsilon && *v <= 1.0 - epsilon);
            }
        }

        #[test]
        fn adaptation_step_respects_bound(
            r0 in 0.05f64..0.95,
            l in 0.5f64..200.0,
            masks in proptest::collection::vec(0u64..4, 1..300),
        ) {
            let mut state = ProposalState::new(vec![r0, r0], vec![l, l], 0.01).unwrap();
            let mut prev = state.r().to_vec();
            for mask in masks {
                let model = ModelIndex::from_bitmask(mask, 2).unwrap();
                let (_, exceeded) = state.update(&model);
                prop_assert!(!exceeded);
                let bound = 2.0 / (l + state.t() as f64 - 1.0);
                for j in 0..2 {
                    prop_assert!((state.r()[j] - prev[j]).abs() <= bound);
                }
                prev = state.r().to_vec();
            }
        }
    }
}
