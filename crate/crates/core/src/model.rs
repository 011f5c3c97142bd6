//! Expected number of novel impressions per access (value of access, VoA).
//!
//! Posts are created by a Poisson process of rate `lambda`; the user refreshes
//! a timeline holding at most `k` posts. Between two accesses `A` posts are
//! created and the access yields `min(A, k)` novel impressions. Averaging over
//! the inter-access time gives the evaluators below.

use serde::Serialize;

use crate::error::{Result, VoaError};
use crate::quad;

/// Largest capacity accepted by the conditional-sum evaluators.
pub const MAX_SUM_CAPACITY: f64 = 1e6;

/// `(lambda, mu, k, cost)`: creation rate and access rate (per hour), timeline
/// capacity and cost per access.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub mu: f64,
    pub k: f64,
    pub cost: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, mu: f64, k: f64, cost: f64) -> Result<Self> {
        let params = ModelParams { lambda, mu, k, cost };
        params.validate()?;
        Ok(params)
    }

    /// Average number of posts created between two accesses.
    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_mu(|mu| mu > 0.0, "mu must be > 0")
    }

    pub(crate) fn validate_with_mu(&self, mu_ok: impl Fn(f64) -> bool, mu_msg: &str) -> Result<()> {
        check_nonneg("lambda", self.lambda)?;
        check_nonneg("k", self.k)?;
        check_nonneg("cost", self.cost)?;
        if !self.mu.is_finite() || !mu_ok(self.mu) {
            return Err(VoaError::domain(format!("{mu_msg}, got {}", self.mu)));
        }
        Ok(())
    }

    /// The capacity as an integer, for the evaluators that sum over it.
    pub fn integer_k(&self) -> Result<u64> {
        integer_capacity(self.k)
    }
}

pub(crate) fn check_nonneg(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(VoaError::domain(format!("{name} must be finite and >= 0, got {value}")))
    }
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(VoaError::domain(format!("{name} must be finite and > 0, got {value}")))
    }
}

pub(crate) fn integer_capacity(k: f64) -> Result<u64> {
    check_nonneg("k", k)?;
    if k.fract() != 0.0 || k > MAX_SUM_CAPACITY {
        return Err(VoaError::domain(format!(
            "k must be an integer in [0, {MAX_SUM_CAPACITY}], got {k}"
        )));
    }
    Ok(k as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Exponential inter-access times, timeline always holds `k` posts.
    FixedK,
    /// Fixed-K closed form evaluated at a real-valued mean size.
    AverageK,
    /// Delivered timeline size is Poisson with mean `alpha`.
    PoissonK,
    /// Constant inter-access time `1 / mu`.
    DeterministicTau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VoaEstimate {
    pub mean: f64,
    pub variant: Variant,
    /// `(lambda / (lambda + mu))^k`: probability that at least `k` posts were
    /// created since the previous access. Only reported for [`Variant::FixedK`].
    pub fill_probability: Option<f64>,
}

/// `ln(lambda / (lambda + mu))` computed without forming the ratio.
fn log_ratio(lambda: f64, mu: f64) -> f64 {
    -(mu / lambda).ln_1p()
}

/// Closed form for exponential inter-access times:
/// `(lambda / mu) * (1 - (lambda / (lambda + mu))^k)`. `k` may be real.
pub fn voa_exponential(params: &ModelParams) -> Result<VoaEstimate> {
    params.validate()?;
    let ModelParams { lambda, mu, k, .. } = *params;
    let (mean, fill) = if lambda == 0.0 {
        (0.0, if k == 0.0 { 1.0 } else { 0.0 })
    } else {
        let exponent = k * log_ratio(lambda, mu);
        (lambda / mu * -exponent.exp_m1(), exponent.exp())
    };
    Ok(VoaEstimate {
        mean,
        variant: Variant::FixedK,
        fill_probability: Some(fill),
    })
}

/// Finite-sum form of the exponential model,
/// `k - mu/(lambda+mu) * (k * sum r^i - sum i r^i)` for `i = 0..=k`.
/// Kept as an independent check of [`voa_exponential`].
pub fn voa_summation_oracle(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let k = params.integer_k()?;
    let ModelParams { lambda, mu, .. } = *params;
    let ratio = lambda / (lambda + mu);
    let mut powers = Neumaier::default();
    let mut weighted = Neumaier::default();
    let mut term = 1.0;
    for i in 0..=k {
        powers.add(term);
        weighted.add(i as f64 * term);
        term *= ratio;
        if term == 0.0 {
            break;
        }
    }
    let kf = k as f64;
    Ok(kf - mu / (lambda + mu) * (kf * powers.total() - weighted.total()))
}

/// `E[min(A, k)]` with `A ~ Poisson(lambda * tau)`: the VoA when accesses are
/// exactly `tau` hours apart.
pub fn voa_deterministic(lambda: f64, tau: f64, k: u64) -> Result<f64> {
    check_nonneg("lambda", lambda)?;
    check_nonneg("tau", tau)?;
    let mean = lambda * tau;
    if !mean.is_finite() {
        return Err(VoaError::domain("lambda * tau overflows"));
    }
    if mean == 0.0 || k == 0 {
        return Ok(0.0);
    }
    // k - sum_{i<=k} (k - i) P(A = i); pmf carried in log space so that
    // exp(-mean) underflowing for mean > 700 does not zero every term.
    let log_mean = mean.ln();
    let mut log_pmf = -mean;
    let mut deficit = Neumaier::default();
    for i in 0..k {
        deficit.add((k - i) as f64 * log_pmf.exp());
        log_pmf += log_mean - ((i + 1) as f64).ln();
    }
    Ok(k as f64 - deficit.total())
}

/// Timeline size Poisson with mean `alpha`: `(lambda/mu) (1 - exp(-alpha mu / (lambda + mu)))`.
pub fn voa_poisson_k(lambda: f64, mu: f64, alpha: f64) -> Result<f64> {
    check_nonneg("lambda", lambda)?;
    check_positive("mu", mu)?;
    check_nonneg("alpha", alpha)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(lambda / mu * -(-alpha * mu / (lambda + mu)).exp_m1())
}

/// Fixed-K closed form evaluated at the real-valued mean timeline size.
pub fn voa_average_k(lambda: f64, mu: f64, alpha: f64) -> Result<f64> {
    let params = ModelParams::new(lambda, mu, alpha, 0.0)?;
    Ok(voa_exponential(&params)?.mean)
}

/// Numerically integrates `E(V | tau)` against the exponential inter-access
/// density. The range is cut where the remaining density mass is below 1e-12.
pub fn voa_quadrature_oracle(params: &ModelParams) -> Result<f64> {
    const TAIL_MASS: f64 = 1e-12;
    const TOLERANCE: f64 = 1e-8;
    params.validate()?;
    let k = params.integer_k()?;
    let ModelParams { lambda, mu, .. } = *params;
    if lambda == 0.0 || k == 0 {
        return Ok(0.0);
    }
    let upper = -TAIL_MASS.ln() / mu;
    // Split where most of the mass sits so the first bisections are not wasted.
    let knots = [0.0, 0.5 / mu, 2.0 / mu, 8.0 / mu, upper];
    let integrand = |tau: f64| voa_deterministic(lambda, tau, k).unwrap_or(f64::NAN) * mu * (-mu * tau).exp();
    let mut total = 0.0;
    for pair in knots.windows(2) {
        total += quad::integrate(integrand, pair[0], pair[1], TOLERANCE / 4.0)?;
    }
    if !total.is_finite() {
        return Err(VoaError::Convergence {
            tolerance: TOLERANCE,
            estimate: f64::INFINITY,
        });
    }
    Ok(total)
}

/// Dispatches on `variant`. `k` is the capacity for fixed and deterministic
/// models and the mean size `alpha` for the average and Poisson ones.
pub fn evaluate(variant: Variant, params: &ModelParams) -> Result<VoaEstimate> {
    let mean = match variant {
        Variant::FixedK => return voa_exponential(params),
        Variant::AverageK => voa_average_k(params.lambda, params.mu, params.k)?,
        Variant::PoissonK => voa_poisson_k(params.lambda, params.mu, params.k)?,
        Variant::DeterministicTau => {
            params.validate()?;
            voa_deterministic(params.lambda, 1.0 / params.mu, params.integer_k()?)?
        }
    };
    Ok(VoaEstimate {
        mean,
        variant,
        fill_probability: None,
    })
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}
