//! Unnormalized log-posterior kernels over the model space.
//!
//! Every sampler consumes a [`PosteriorKernel`]: an evaluator of
//! `log pi(y | X, S) + log pi(S)` up to an additive constant, together with
//! a memo cache keyed by the canonical model encoding. Marginal likelihoods
//! are reported as log Bayes factors against the null model, so kernels stay
//! bounded and are comparable across implementations.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::dataset::{Dataset, ResponseFamily};
use crate::error::{Error, Result};
use crate::glm;
use crate::linalg::pivoted_cholesky;
use crate::model::ModelIndex;
use crate::priors::{log_model_prior, CoefficientPriorSpec, ModelPriorSpec};

/// Log marginal likelihood of the gaussian model `S` under a flat intercept
/// prior, Jeffreys prior on the variance, and a normal prior on the
/// coefficients, reported as the log Bayes factor against the null model.
///
/// Rank-deficient g-prior submodels (including any `|S| >= n - 1`) return
/// `-inf`: the g-prior is undefined there and such models carry no posterior
/// mass.
pub fn log_marginal_conjugate_linear(
    data: &Dataset,
    model: &ModelIndex,
    prior: &CoefficientPriorSpec,
) -> Result<f64> {
    prior.validate()?;
    if data.family() != ResponseFamily::Gaussian {
        return Err(Error::Config(
            "conjugate linear marginal needs a gaussian response".into(),
        ));
    }
    let n = data.n();
    let m = model.size();
    if m == 0 {
        return Ok(0.0);
    }
    let tss = data.y_sum_squares();
    if !(tss > 0.0) {
        return Err(Error::Numeric("response has zero variance".into()));
    }
    let g = prior.g();
    let nm1 = (n - 1) as f64;

    let value = match prior {
        CoefficientPriorSpec::GPrior { .. } => {
            if m >= n - 1 {
                return Ok(f64::NEG_INFINITY);
            }
            let gram = data.gram(model);
            let Some(chol) = pivoted_cholesky(&gram, m) else {
                return Ok(f64::NEG_INFINITY);
            };
            let explained = chol.quad_form(&data.xty(model));
            let rss = (tss - explained).max(0.0);
            0.5 * (nm1 - m as f64) * (1.0 + g).ln()
                - 0.5 * nm1 * ((tss + g * rss) / tss).ln()
        }
        CoefficientPriorSpec::Ridge { .. } => {
            let mut a = data.gram(model);
            for i in 0..m {
                a[i * m + i] += 1.0 / g;
            }
            let Some(chol) = pivoted_cholesky(&a, m) else {
                return Ok(f64::NEG_INFINITY);
            };
            let q = (tss - chol.quad_form(&data.xty(model))).max(tss * 1e-15);
            -0.5 * (m as f64 * g.ln() + chol.log_det()) - 0.5 * nm1 * (q / tss).ln()
        }
    };
    if value.is_nan() {
        return Err(Error::Numeric(format!(
            "non-finite conjugate marginal for S = {model}"
        )));
    }
    Ok(value)
}

enum EvalKind {
    ConjugateLinear {
        coef_prior: CoefficientPriorSpec,
        model_prior: ModelPriorSpec,
    },
    Ebic {
        gamma: f64,
    },
    IndependentBernoulli {
        log_incl: Vec<f64>,
        log_excl: Vec<f64>,
    },
    Table {
        log_values: Vec<f64>,
    },
    Uniform,
}

/// The pure (cache-free) kernel evaluator; shared across chains.
pub(crate) struct Evaluator {
    p: usize,
    data: Option<Arc<Dataset>>,
    kind: EvalKind,
    id: String,
}

impl Evaluator {
    pub(crate) fn p(&self) -> usize {
        self.p
    }

    pub(crate) fn log_kernel(&self, model: &ModelIndex) -> Result<f64> {
        if model.p() != self.p {
            return Err(Error::Config(format!(
                "model has p = {}, kernel has p = {}",
                model.p(),
                self.p
            )));
        }
        match &self.kind {
            EvalKind::ConjugateLinear {
                coef_prior,
                model_prior,
            } => {
                let data = self.data.as_ref().unwrap();
                let marginal = log_marginal_conjugate_linear(data, model, coef_prior)?;
                Ok(marginal + log_model_prior(model, model_prior)?)
            }
            EvalKind::Ebic { gamma } => {
                let data = self.data.as_ref().unwrap();
                match glm::ebic(data, model, *gamma) {
                    Ok(v) => Ok(-0.5 * v),
                    // undefined fits carry no posterior mass
                    Err(Error::SingularFit(_)) | Err(Error::Separation(_)) => {
                        Ok(f64::NEG_INFINITY)
                    }
                    Err(e) => Err(e),
                }
            }
            EvalKind::IndependentBernoulli { log_incl, log_excl } => {
                let mut total = 0.0;
                let mut members = model.members().iter().peekable();
                for j in 0..self.p {
                    if members.peek() == Some(&&(j as u32 + 1)) {
                        members.next();
                        total += log_incl[j];
                    } else {
                        total += log_excl[j];
                    }
                }
                Ok(total)
            }
            EvalKind::Table { log_values } => {
                let mask = model.to_bitmask().unwrap() as usize;
                Ok(log_values[mask])
            }
            EvalKind::Uniform => Ok(0.0),
        }
    }
}

enum CacheSlot {
    /// One owner, no locking; the default.
    Private(RefCell<HashMap<Vec<u32>, f64>>),
    /// Shareable across chains; insert-if-absent under a lock.
    Shared(Arc<Mutex<HashMap<Vec<u32>, f64>>>),
}

/// A posterior kernel: deterministic evaluator plus memo cache.
///
/// Evaluation of the same model is bit-identical across repeats, across
/// cached/uncached paths, and across private/shared cache modes. `-inf` is a
/// legal value (zero posterior mass); genuine numerical breakdown is an
/// error.
pub struct PosteriorKernel {
    eval: Arc<Evaluator>,
    cache: CacheSlot,
    computed: AtomicU64,
    cache_cap: Option<usize>,
}

impl PosteriorKernel {
    fn from_eval(eval: Evaluator) -> Self {
        PosteriorKernel {
            eval: Arc::new(eval),
            cache: CacheSlot::Private(RefCell::new(HashMap::new())),
            computed: AtomicU64::new(0),
            cache_cap: None,
        }
    }

    /// Conjugate normal-linear kernel: g-prior or ridge marginal plus a
    /// model prior.
    pub fn conjugate_linear(
        data: Arc<Dataset>,
        coef_prior: CoefficientPriorSpec,
        model_prior: ModelPriorSpec,
    ) -> Result<Self> {
        coef_prior.validate()?;
        model_prior.validate()?;
        if data.family() != ResponseFamily::Gaussian {
            return Err(Error::Config(
                "conjugate linear kernel needs a gaussian response".into(),
            ));
        }
        if !(data.y_sum_squares() > 0.0) {
            return Err(Error::Config("response has zero variance".into()));
        }
        let id = format!("conjugate-linear[{coef_prior}|{model_prior}]");
        Ok(Self::from_eval(Evaluator {
            p: data.p(),
            data: Some(data),
            kind: EvalKind::ConjugateLinear {
                coef_prior,
                model_prior,
            },
            id,
        }))
    }

    /// EBIC kernel: `log kernel(S) = -EBIC_gamma(S) / 2`, gaussian or
    /// logistic depending on the dataset's family.
    pub fn ebic(data: Arc<Dataset>, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!(
                "ebic kernel needs gamma in [0,1], got {gamma}"
            )));
        }
        let id = format!("ebic[gamma={gamma},family={}]", data.family());
        Ok(Self::from_eval(Evaluator {
            p: data.p(),
            data: Some(data),
            kind: EvalKind::Ebic { gamma },
            id,
        }))
    }

    /// Synthetic target of independent Bernoulli form with the given
    /// inclusion probabilities.
    pub fn independent_bernoulli(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::Config(
                "independent bernoulli target needs probabilities in (0,1)".into(),
            ));
        }
        let p = probs.len();
        let log_incl: Vec<f64> = probs.iter().map(|r| r.ln()).collect();
        let log_excl: Vec<f64> = probs.iter().map(|r| (1.0 - r).ln()).collect();
        Ok(Self::from_eval(Evaluator {
            p,
            data: None,
            kind: EvalKind::IndependentBernoulli { log_incl, log_excl },
            id: format!("independent-bernoulli[p={p}]"),
        }))
    }

    /// Synthetic target given by an explicit table of `2^p` log values
    /// indexed by bitmask (bit `j-1` = variable `j`).
    pub fn from_table(p: usize, log_values: Vec<f64>) -> Result<Self> {
        if p > 25 {
            return Err(Error::Config(format!("table kernel limited to p <= 25, got {p}")));
        }
        if log_values.len() != 1usize << p {
            return Err(Error::Config(format!(
                "table kernel needs 2^{p} = {} values, got {}",
                1usize << p,
                log_values.len()
            )));
        }
        if log_values.iter().any(|v| v.is_nan()) {
            return Err(Error::Config("table kernel values must not be NaN".into()));
        }
        Ok(Self::from_eval(Evaluator {
            p,
            data: None,
            kind: EvalKind::Table { log_values },
            id: format!("table[p={p}]"),
        }))
    }

    /// Flat target over all models.
    pub fn uniform(p: usize) -> Self {
        Self::from_eval(Evaluator {
            p,
            data: None,
            kind: EvalKind::Uniform,
            id: format!("uniform[p={p}]"),
        })
    }

    pub fn p(&self) -> usize {
        self.eval.p()
    }

    /// Human-readable kernel identifier (echoed into trace files).
    pub fn id(&self) -> &str {
        &self.eval.id
    }

    /// Switches this handle to a fresh shared cache; handles forked from it
    /// will see (and fill) the same cache.
    pub fn with_shared_cache(mut self) -> Self {
        self.cache = CacheSlot::Shared(Arc::new(Mutex::new(HashMap::new())));
        self
    }

    /// Caps the number of cached entries (insertions stop at the cap).
    pub fn with_cache_cap(mut self, cap: usize) -> Self {
        self.cache_cap = Some(cap);
        self
    }

    /// A new handle over the same evaluator: a fresh private cache in
    /// private mode, the same shared cache in shared mode.
    pub fn fork(&self) -> Self {
        PosteriorKernel {
            eval: Arc::clone(&self.eval),
            cache: match &self.cache {
                CacheSlot::Private(_) => CacheSlot::Private(RefCell::new(HashMap::new())),
                CacheSlot::Shared(map) => CacheSlot::Shared(Arc::clone(map)),
            },
            computed: AtomicU64::new(0),
            cache_cap: self.cache_cap,
        }
    }

    /// Number of underlying (non-memoized) evaluations through this handle.
    pub fn evaluations(&self) -> u64 {
        self.computed.load(Ordering::Relaxed)
    }

    pub(crate) fn evaluator(&self) -> &Arc<Evaluator> {
        &self.eval
    }

    /// Evaluates the kernel without touching the cache.
    pub fn log_kernel_uncached(&self, model: &ModelIndex) -> Result<f64> {
        self.eval.log_kernel(model)
    }

    /// Evaluates the kernel through the memo cache.
    pub fn log_kernel(&self, model: &ModelIndex) -> Result<f64> {
        match &self.cache {
            CacheSlot::Private(cell) => {
                if let Some(&v) = cell.borrow().get(model.members()) {
                    return Ok(v);
                }
                let v = self.eval.log_kernel(model)?;
                self.computed.fetch_add(1, Ordering::Relaxed);
                let mut map = cell.borrow_mut();
                if self.cache_cap.is_none_or(|cap| map.len() < cap) {
                    map.insert(model.members().to_vec(), v);
                }
                Ok(v)
            }
            CacheSlot::Shared(shared) => {
                if let Some(&v) = shared.lock().unwrap().get(model.members()) {
                    return Ok(v);
                }
                let v = self.eval.log_kernel(model)?;
                self.computed.fetch_add(1, Ordering::Relaxed);
                let mut map = shared.lock().unwrap();
                if self.cache_cap.is_none_or(|cap| map.len() < cap) {
                    map.entry(model.members().to_vec()).or_insert(v);
                }
                Ok(v)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_data(n: usize, p: usize, seed: u64) -> Arc<Dataset> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                1.5 * columns[0][i] - columns[1][i] + noise
            })
            .collect();
        Arc::new(Dataset::new(columns, y, None, ResponseFamily::Gaussian).unwrap())
    }

    #[test]
    fn null_model_bayes_factor_is_zero() {
        let data = gaussian_data(12, 3, 1);
        for prior in [
            CoefficientPriorSpec::GPrior { g: 12.0 },
            CoefficientPriorSpec::Ridge { g: 3.0 },
        ] {
            let bf = log_marginal_conjugate_linear(&data, &ModelIndex::empty(3), &prior).unwrap();
            assert_eq!(bf, 0.0);
        }
    }

    #[test]
    fn gprior_invariant_under_column_scaling() {
        let base = gaussian_data(20, 4, 2);
        let mut scaled_cols: Vec<Vec<f64>> = (1..=4u32)
            .map(|j| base.column(j).to_vec())
            .collect();
        let scales = [3.0, 0.02, 150.0, 7.5];
        for (col, s) in scaled_cols.iter_mut().zip(scales) {
            for v in col.iter_mut() {
                *v *= s;
            }
        }
        let scaled = Dataset::new(scaled_cols, base.y().to_vec(), None, ResponseFamily::Gaussian)
            .unwrap();
        let prior = CoefficientPriorSpec::GPrior { g: 20.0 };
        for mask in 1u64..16 {
            let model = ModelIndex::from_bitmask(mask, 4).unwrap();
            let a = log_marginal_conjugate_linear(&base, &model, &prior).unwrap();
            let b = log_marginal_conjugate_linear(&scaled, &model, &prior).unwrap();
            assert!((a - b).abs() < 1e-8, "model {model}: {a} vs {b}");
        }
    }

    #[test]
    fn rank_deficiency_gives_minus_infinity() {
        let data = gaussian_data(6, 8, 3);
        let prior = CoefficientPriorSpec::GPrior { g: 6.0 };
        // |S| >= n - 1 = 5
        let big = ModelIndex::new([1, 2, 3, 4, 5], 8).unwrap();
        assert_eq!(
            log_marginal_conjugate_linear(&data, &big, &prior).unwrap(),
            f64::NEG_INFINITY
        );
        // duplicated column
        let x = vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.2, 1.1, -0.8];
        let dup = Dataset::new(
            vec![x.clone(), x.iter().map(|v| -2.0 * v).collect()],
            vec![0.1, 0.4, -0.3, 1.2, 0.0, -0.7, 0.9, 0.5],
            None,
            ResponseFamily::Gaussian,
        )
        .unwrap();
        assert_eq!(
            log_marginal_conjugate_linear(&dup, &ModelIndex::full(2), &prior).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn uniform_kernel_is_flat() {
        let k = PosteriorKernel::uniform(6);
        for mask in [0u64, 7, 63] {
            assert_eq!(k.log_kernel(&ModelIndex::from_bitmask(mask, 6).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn ebic_kernel_is_half_negative_ebic() {
        let data = gaussian_data(40, 10, 4);
        let kernel = PosteriorKernel::ebic(Arc::clone(&data), 0.7).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..5 {
            let mask: u64 = rng.random_range(0..1024);
            let model = ModelIndex::from_bitmask(mask, 10).unwrap();
            let expect = -0.5 * glm::ebic(&data, &model, 0.7).unwrap();
            assert_eq!(kernel.log_kernel(&model).unwrap(), expect);
        }
    }

    #[test]
    fn cache_is_transparent_and_counts_computations() {
        let data = gaussian_data(15, 5, 5);
        let kernel = PosteriorKernel::conjugate_linear(
            data,
            CoefficientPriorSpec::GPrior { g: 15.0 },
            ModelPriorSpec::Uniform,
        )
        .unwrap();
        let model = ModelIndex::new([1, 4], 5).unwrap();
        let fresh = kernel.log_kernel_uncached(&model).unwrap();
        let first = kernel.log_kernel(&model).unwrap();
        let second = kernel.log_kernel(&model).unwrap();
        assert_eq!(first.to_bits(), second.to_bits());
        assert_eq!(first.to_bits(), fresh.to_bits());
        assert_eq!(kernel.evaluations(), 1);
    }

    #[test]
    fn shared_and_private_caches_agree() {
        let data = gaussian_data(18, 6, 6);
        let private = PosteriorKernel::conjugate_linear(
            Arc::clone(&data),
            CoefficientPriorSpec::Ridge { g: 2.0 },
            ModelPriorSpec::Bernoulli { omega: 0.3 },
        )
        .unwrap();
        let shared = private.fork().with_shared_cache();
        let other = shared.fork();
        for mask in 0u64..64 {
            let model = ModelIndex::from_bitmask(mask, 6).unwrap();
            let a = private.log_kernel(&model).unwrap();
            let b = shared.log_kernel(&model).unwrap();
            let c = other.log_kernel(&model).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
            assert_eq!(a.to_bits(), c.to_bits());
        }
        // `other` shares `shared`'s cache, so nothing was recomputed there
        assert_eq!(shared.evaluations(), 64);
        assert_eq!(other.evaluations(), 0);
    }

    #[test]
    fn repeated_evaluations_bit_identical() {
        let data = gaussian_data(25, 8, 7);
        let kernel = PosteriorKernel::conjugate_linear(
            data,
            CoefficientPriorSpec::GPrior { g: 25.0 },
            ModelPriorSpec::BetaBinomial { a: 1.0, b: 1.0 },
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        for _ in 0..1000 {
            let mask: u64 = rng.random_range(0..256);
            let model = ModelIndex::from_bitmask(mask, 8).unwrap();
            let a = kernel.log_kernel_uncached(&model).unwrap();
            let b = kernel.log_kernel(&model).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn table_kernel_validates_shape() {
        assert!(PosteriorKernel::from_table(2, vec![0.0; 3]).is_err());
        assert!(PosteriorKernel::from_table(2, vec![0.0; 4]).is_ok());
        assert!(PosteriorKernel::from_table(26, vec![]).is_err());
    }
}
