//! Synthetic dataset generation with an AR(1) Toeplitz correlation
//! structure, for verification and experiment reproduction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Dataset, ResponseFamily};
use crate::error::{Error, Result};
use crate::model::ModelIndex;

/// How the true coefficient vector is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientSignal {
    /// An explicit length-`p` vector.
    Fixed(Vec<f64>),
    /// `s0 ~ Uniform{0..=max_active}` active variables drawn uniformly,
    /// each coefficient `~ Uniform(low, high)`.
    RandomSparse { max_active: usize, low: f64, high: f64 },
}

/// A simulation design: `n x p` covariates with `Cov(X_k, X_l) = rho^|k-l|`
/// and a gaussian or logistic response.
#[derive(Clone, Debug, PartialEq)]
pub struct SimDesign {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub signal: CoefficientSignal,
    pub family: ResponseFamily,
    /// Error variance of the gaussian response (ignored for binomial).
    pub noise_variance: f64,
    pub intercept: f64,
    pub seed: u64,
}

impl SimDesign {
    /// The randomized design: `s0 ~ U{0..=10}`, active set uniform, effects
    /// `U(-2, 2)`, unit noise.
    pub fn randomized(n: usize, p: usize, rho: f64, seed: u64) -> Self {
        SimDesign {
            n,
            p,
            rho,
            signal: CoefficientSignal::RandomSparse { max_active: 10, low: -2.0, high: 2.0 },
            family: ResponseFamily::Gaussian,
            noise_variance: 1.0,
            intercept: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 1 {
            return Err(Error::Config(format!(
                "design needs n >= 2 and p >= 1, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::Config(format!(
                "Toeplitz covariance with rho = {} is not positive definite",
                self.rho
            )));
        }
        if self.family == ResponseFamily::Gaussian && !(self.noise_variance > 0.0) {
            return Err(Error::Config(format!(
                "gaussian noise variance must be positive, got {}",
                self.noise_variance
            )));
        }
        match &self.signal {
            CoefficientSignal::Fixed(beta) => {
                if beta.len() != self.p {
                    return Err(Error::Config(format!(
                        "coefficient vector has length {}, expected {}",
                        beta.len(),
                        self.p
                    )));
                }
            }
            CoefficientSignal::RandomSparse { max_active, low, high } => {
                if *max_active > self.p {
                    return Err(Error::Config(format!(
                        "max_active = {max_active} exceeds p = {}",
                        self.p
                    )));
                }
                if !(low < high) {
                    return Err(Error::Config(format!(
                        "coefficient range ({low}, {high}) is empty"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A generated dataset together with the ground truth that produced it.
#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub dataset: Dataset,
    pub beta: Vec<f64>,
    pub active: ModelIndex,
}

/// Draws a dataset from the design.
///
/// Rows are sampled as a stationary AR(1) sequence
/// `X_1 = Z_1`, `X_j = rho X_{j-1} + sqrt(1 - rho^2) Z_j`, which is the
/// closed-form Cholesky factor of the Toeplitz matrix `rho^|k-l|` applied
/// to iid standard normals.
pub fn generate_dataset(design: &SimDesign) -> Result<SimulatedData> {
    design.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(design.seed);
    let (n, p) = (design.n, design.p);

    let beta: Vec<f64> = match &design.signal {
        CoefficientSignal::Fixed(beta) => beta.clone(),
        CoefficientSignal::RandomSparse { max_active, low, high } => {
            let s0 = rng.random_range(0..=*max_active);
            // partial Fisher-Yates for a uniform size-s0 subset
            let mut pool: Vec<usize> = (0..p).collect();
            for i in 0..s0 {
                let k = rng.random_range(i..p);
                pool.swap(i, k);
            }
            let mut active: Vec<usize> = pool[..s0].to_vec();
            active.sort_unstable();
            let mut beta = vec![0.0; p];
            for &j in &active {
                beta[j] = rng.random_range(*low..*high);
            }
            beta
        }
    };

    let scale = (1.0 - design.rho * design.rho).sqrt();
    let mut columns = vec![Vec::with_capacity(n); p];
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut prev: f64 = StandardNormal.sample(&mut rng);
        columns[0].push(prev);
        for col in columns.iter_mut().take(p).skip(1) {
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = design.rho * prev + scale * z;
            col.push(prev);
        }
        let linear: f64 = design.intercept
            + beta
                .iter()
                .zip(columns.iter())
                .map(|(b, col)| b * col.last().unwrap())
                .sum::<f64>();
        let yi = match design.family {
            ResponseFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(&mut rng);
                linear + design.noise_variance.sqrt() * z
            }
            ResponseFamily::Binomial => {
                let prob = 1.0 / (1.0 + (-linear).exp());
                if rng.random::<f64>() < prob {
                    1.0
                } else {
                    0.0
                }
            }
        };
        y.push(yi);
    }

    let active = ModelIndex::new(
        beta.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j as u32 + 1),
        p,
    )?;
    let dataset = Dataset::new(columns, y, None, design.family)?;
    Ok(SimulatedData { dataset, beta, active })
}
