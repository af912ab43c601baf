//! Shared fixtures and independent oracles for the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use madasub::{
    CoefficientPriorSpec, CoefficientSignal, Dataset, ModelIndex, ModelPriorSpec,
    PosteriorKernel, ResponseFamily, SimDesign,
};

/// Recursive adaptive Simpson quadrature with an absolute tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `ln int_lo^hi exp(ln_f(x)) dx`, max-factored over a coarse scan so the
/// scaled integrand stays O(1).
pub fn log_integral(ln_f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let grid = 512;
    let mut peak = f64::NEG_INFINITY;
    for i in 0..=grid {
        let x = lo + (hi - lo) * i as f64 / grid as f64;
        peak = peak.max(ln_f(x));
    }
    let scaled = |x: f64| (ln_f(x) - peak).exp();
    let integral = adaptive_simpson(&scaled, lo, hi, 1e-11);
    peak + integral.ln()
}

/// Log marginal likelihood of a gaussian submodel with `|S| <= 1` by direct
/// numerical integration over the intercept (analytic), the coefficient and
/// the log error variance. Completely independent of the closed-form
/// conjugate algebra used by the library.
pub fn log_marginal_by_quadrature(
    data: &Dataset,
    model: &ModelIndex,
    prior: &CoefficientPriorSpec,
) -> f64 {
    assert!(model.size() <= 1, "quadrature oracle handles |S| <= 1");
    let n = data.n() as f64;
    let y = data.y();
    let tss: f64 = y.iter().map(|v| v * v).sum();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();

    if model.is_empty() {
        let ln_f =
            |u: f64| -0.5 * (n - 1.0) * (ln_2pi + u) - 0.5 * n.ln() - 0.5 * tss * (-u).exp();
        let u_star = (tss / (n - 1.0)).ln();
        return log_integral(&ln_f, u_star - 25.0, u_star + 50.0);
    }

    let x = data.column(model.members()[0]);
    let xtx: f64 = x.iter().map(|v| v * v).sum();
    let xty: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let gv = match prior {
        CoefficientPriorSpec::GPrior { g } => g / xtx,
        CoefficientPriorSpec::Ridge { g } => *g,
    };

    let ln_f = move |u: f64, beta: f64| {
        let sigma2 = u.exp();
        let rss = tss - 2.0 * beta * xty + beta * beta * xtx;
        -0.5 * (n - 1.0) * (ln_2pi + u)
            - 0.5 * n.ln()
            - 0.5 * (ln_2pi + u + gv.ln())
            - beta * beta / (2.0 * sigma2 * gv)
            - 0.5 * rss / sigma2
    };

    let beta_hat = xty / xtx;
    let rss_hat = (tss - xty * beta_hat).max(tss * 1e-12);
    let u_star = (rss_hat / (n - 1.0)).ln();
    let ln_outer = |u: f64| {
        let sigma2 = u.exp();
        let shrink = xtx + 1.0 / gv;
        let center = xty / shrink;
        let width = 14.0 * (sigma2 / shrink).sqrt() + 14.0 * (sigma2 * gv).sqrt();
        log_integral(&|b| ln_f(u, b), center - width, center + width)
    };
    log_integral(&ln_outer, u_star - 25.0, u_star + 50.0)
}

/// Fixed 8x2 gaussian toy dataset for the quadrature comparisons.
pub fn toy_dataset() -> Dataset {
    let x1 = vec![0.5, -1.2, 2.0, 0.3, -0.7, 1.5, -2.1, 0.9];
    let x2 = vec![1.0, 0.4, -0.6, 1.8, -1.3, 0.2, 0.7, -2.0];
    let y = vec![1.2, -0.5, 2.3, 0.8, -1.0, 1.9, -2.4, 0.6];
    Dataset::new(vec![x1, x2], y, None, ResponseFamily::Gaussian).unwrap()
}

/// The fixed-seed `p = 8, n = 40` conjugate instance used by the ergodicity
/// and parallel-correctness gates.
pub fn reference_instance() -> (Arc<Dataset>, PosteriorKernel) {
    let design = SimDesign {
        n: 40,
        p: 8,
        rho: 0.5,
        signal: CoefficientSignal::Fixed(vec![1.2, 0.0, 2.0, 0.0, -1.5, 0.0, 0.0, 0.0]),
        family: ResponseFamily::Gaussian,
        noise_variance: 1.0,
        intercept: 0.0,
        seed: 20_240_801,
    };
    let data = Arc::new(madasub::generate_dataset(&design).unwrap().dataset);
    let kernel = PosteriorKernel::conjugate_linear(
        Arc::clone(&data),
        CoefficientPriorSpec::GPrior { g: 40.0 },
        ModelPriorSpec::Uniform,
    )
    .unwrap();
    (data, kernel)
}

/// The illustrative simulation design: `n = 60`, `p = 20`, Toeplitz
/// `rho = 0.9`, effects `(0.4, 0.8, 1.2, 1.6, 2.0, 0, ..., 0)`.
pub fn illustrative_design(seed: u64) -> SimDesign {
    let mut beta = vec![0.0; 20];
    for (k, b) in [0.4, 0.8, 1.2, 1.6, 2.0].into_iter().enumerate() {
        beta[k] = b;
    }
    SimDesign {
        n: 60,
        p: 20,
        rho: 0.9,
        signal: CoefficientSignal::Fixed(beta),
        family: ResponseFamily::Gaussian,
        noise_variance: 1.0,
        intercept: 0.0,
        seed,
    }
}

/// Proposal probabilities `r(t)` reconstructed from a trace for every `t`,
/// returned as the iteration-indexed trajectory evaluator.
pub struct ProposalTrajectory {
    r0: Vec<f64>,
    l: Vec<f64>,
    cumulative: Vec<Vec<u64>>,
}

impl ProposalTrajectory {
    pub fn from_accepted(accepted: &[ModelIndex], r0: Vec<f64>, l: Vec<f64>) -> Self {
        let p = r0.len();
        let mut cumulative = Vec::with_capacity(accepted.len() + 1);
        let mut counts = vec![0u64; p];
        cumulative.push(counts.clone());
        for model in accepted {
            for &j in model.members() {
                counts[(j - 1) as usize] += 1;
            }
            cumulative.push(counts.clone());
        }
        ProposalTrajectory { r0, l, cumulative }
    }

    /// `r_j` after iteration `t` (so `t = 0` is the initial vector).
    pub fn r_at(&self, t: usize) -> Vec<f64> {
        let counts = &self.cumulative[t];
        (0..self.r0.len())
            .map(|j| (self.l[j] * self.r0[j] + counts[j] as f64) / (self.l[j] + t as f64))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.cumulative.len() - 1
    }
}
