//! Utility per hour `U(mu) = mu * VoA - c * mu` and the access rate that
//! maximizes it.

use serde::Serialize;

use crate::error::{Result, VoaError};
use crate::model::{check_positive, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalRateResult {
    pub mu_star: f64,
    pub utility_at_star: f64,
    /// Set when `k <= c`: the utility never increases on `mu >= 0`.
    pub clamped: bool,
}

fn validate(params: &ModelParams) -> Result<()> {
    params.validate_with_mu(|mu| mu >= 0.0, "mu must be >= 0")
}

/// `lambda * (1 - (lambda / (lambda + mu))^k) - c * mu`, zero at `mu = 0`.
pub fn utility(params: &ModelParams) -> Result<f64> {
    validate(params)?;
    let ModelParams { lambda, mu, k, cost } = *params;
    if mu == 0.0 {
        return Ok(0.0);
    }
    if lambda == 0.0 {
        return Ok(-cost * mu);
    }
    let exponent = -k * (mu / lambda).ln_1p();
    Ok(lambda * -exponent.exp_m1() - cost * mu)
}

/// `dU/dmu = k (lambda / (lambda + mu))^(k+1) - c`.
pub fn utility_gradient(params: &ModelParams) -> Result<f64> {
    validate(params)?;
    let ModelParams { lambda, mu, k, cost } = *params;
    let ratio_power = if mu == 0.0 {
        1.0
    } else if lambda == 0.0 {
        0.0
    } else {
        (-(k + 1.0) * (mu / lambda).ln_1p()).exp()
    };
    Ok(k * ratio_power - cost)
}

/// `mu* = lambda ((k / c)^(1/(k+1)) - 1)`, or 0 (clamped) when `k <= c`.
pub fn optimal_access_rate(lambda: f64, k: u32, cost: f64) -> Result<OptimalRateResult> {
    check_positive("lambda", lambda)?;
    check_positive("cost", cost)?;
    if k < 1 {
        return Err(VoaError::domain("k must be >= 1"));
    }
    let kf = f64::from(k);
    if kf <= cost {
        return Ok(OptimalRateResult {
            mu_star: 0.0,
            utility_at_star: 0.0,
            clamped: true,
        });
    }
    let mu_star = lambda * ((kf / cost).ln() / (kf + 1.0)).exp_m1();
    let utility_at_star = utility(&ModelParams {
        lambda,
        mu: mu_star,
        k: kf,
        cost,
    })?;
    Ok(OptimalRateResult {
        mu_star,
        utility_at_star,
        clamped: false,
    })
}

/// Golden-section maximization of [`utility`] on `[0, search_upper]`.
/// Fails when the maximizer ends up against `search_upper`.
pub fn optimal_access_rate_numeric(lambda: f64, k: u32, cost: f64, search_upper: f64) -> Result<f64> {
    const TOLERANCE: f64 = 1e-8;
    check_positive("search_upper", search_upper)?;
    check_positive("lambda", lambda)?;
    crate::model::check_nonneg("cost", cost)?;
    let objective = |mu: f64| {
        utility(&ModelParams {
            lambda,
            mu,
            k: f64::from(k),
            cost,
        })
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, search_upper);
    let mut left = hi - inv_phi * (hi - lo);
    let mut right = lo + inv_phi * (hi - lo);
    let mut f_left = objective(left)?;
    let mut f_right = objective(right)?;
    while hi - lo > TOLERANCE {
        if f_left >= f_right {
            hi = right;
            right = left;
            f_right = f_left;
            left = hi - inv_phi * (hi - lo);
            f_left = objective(left)?;
        } else {
            lo = left;
            left = right;
            f_left = f_right;
            right = lo + inv_phi * (hi - lo);
            f_right = objective(right)?;
        }
    }
    let best = 0.5 * (lo + hi);
    if search_upper - best <= 2.0 * TOLERANCE {
        return Err(VoaError::SearchBound { upper: search_upper });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 4.487;

    fn p(mu: f64, k: f64, cost: f64) -> ModelParams {
        ModelParams {
            lambda: LAMBDA,
            mu,
            k,
            cost,
        }
    }

    #[test]
    fn utility_examples() {
        assert_eq!(utility(&p(0.0, 10.0, 1.0)).unwrap(), 0.0);
        let u = utility(&p(1.0, 10.0, 1.0)).unwrap();
        assert!((u - 2.886_978_015_639_3).abs() < 1e-12);
        let u = utility(&p(1.0, 10.0, 0.0)).unwrap();
        assert!((u - 3.886_978_015_639_3).abs() < 1e-12);
        assert!(utility(&p(-1.0, 10.0, 1.0)).is_err());
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(utility_gradient(&p(0.0, 10.0, 1.0)).unwrap(), 9.0);
        let g = utility_gradient(&p(1.0, 10.0, 1.0)).unwrap();
        // high-precision reference value
        assert!((g - 0.093_533_778_678_148_69).abs() < 1e-12);
        let h = 1e-6;
        let fd = (utility(&p(1.0 + h, 10.0, 1.0)).unwrap() - utility(&p(1.0 - h, 10.0, 1.0)).unwrap()) / (2.0 * h);
        assert!((g - fd).abs() < 1e-5);
        let star = optimal_access_rate(LAMBDA, 10, 1.0).unwrap().mu_star;
        assert!(utility_gradient(&p(star, 10.0, 1.0)).unwrap().abs() < 1e-9);
    }

    #[test]
    fn optimal_rate_examples() {
        let r = optimal_access_rate(LAMBDA, 2, 1.0).unwrap();
        assert!((r.mu_star - 1.1663).abs() < 5e-4);
        assert!(!r.clamped);
        let r = optimal_access_rate(LAMBDA, 20, 1.0).unwrap();
        assert!((r.mu_star - 0.688).abs() < 5e-4);
        let r = optimal_access_rate(LAMBDA, 1, 1.0).unwrap();
        assert!(r.clamped);
        assert_eq!(r.mu_star, 0.0);
    }

    #[test]
    fn optimal_rate_rejects_bad_input() {
        assert!(optimal_access_rate(0.0, 2, 1.0).is_err());
        assert!(optimal_access_rate(LAMBDA, 2, 0.0).is_err());
        assert!(optimal_access_rate(LAMBDA, 0, 1.0).is_err());
    }

    #[test]
    fn numeric_examples() {
        let m = optimal_access_rate_numeric(LAMBDA, 2, 1.0, 20.0).unwrap();
        assert!((m - 1.1663).abs() < 1e-4);
        let m = optimal_access_rate_numeric(LAMBDA, 20, 1.0, 20.0).unwrap();
        assert!((m - 0.688).abs() < 1e-3);
        let m = optimal_access_rate_numeric(LAMBDA, 1, 1.0, 20.0).unwrap();
        assert!(m.abs() < 1e-6);
    }

    #[test]
    fn numeric_reports_short_interval() {
        let err = optimal_access_rate_numeric(LAMBDA, 2, 1.0, 0.5).unwrap_err();
        assert!(matches!(err, VoaError::SearchBound { .. }));
    }

    #[test]
    fn optimal_rate_peaks_at_interior_k() {
        let rates: Vec<f64> = (1..=50)
            .map(|k| optimal_access_rate(LAMBDA, k, 1.0).unwrap().mu_star)
            .collect();
        let argmax = rates.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(argmax > 0 && argmax < 49, "argmax at index {argmax}");
        assert!(rates[argmax] > rates[0] && rates[argmax] > rates[49]);
    }
}
