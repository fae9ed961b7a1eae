//! Closed forms for two agents with quadratic costs `c_i(p) = C_i p^2 / 2`
//! under the SGE contract paying agent 1 the share `λ` when both succeed.

use crate::error::{Error, Result};
use crate::numeric::bisect;

fn check_costs(c1: f64, c2: f64) -> Result<()> {
    for (k, c) in [(1, c1), (2, c2)] {
        if !(c.is_finite() && c > 1.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "cost scale C{k} must exceed 1, got {c}"
            )));
        }
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::ParameterOutOfRange(format!(
            "share must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}

/// The unique equilibrium `(p_1, p_2)`.
pub fn two_agent_equilibrium(c1: f64, c2: f64, lambda: f64) -> Result<(f64, f64)> {
    check_costs(c1, c2)?;
    check_lambda(lambda)?;
    let d = c1 * c2 - lambda * (1.0 - lambda);
    Ok(((c2 - (1.0 - lambda)) / d, (c1 - lambda) / d))
}

/// `(dp_1/dλ, dp_2/dλ)`.
pub fn two_agent_derivatives(c1: f64, c2: f64, lambda: f64) -> Result<(f64, f64)> {
    check_costs(c1, c2)?;
    check_lambda(lambda)?;
    let d = c1 * c2 - lambda * (1.0 - lambda);
    let t = 2.0 * lambda - 1.0;
    let d1 = c1 * c2 - c2 * t - (1.0 - lambda).powi(2);
    let d2 = -c1 * c2 - c1 * t + lambda * lambda;
    Ok((d1 / (d * d), d2 / (d * d)))
}

/// `(lower, upper)`: `λ* = 0` for `w <= lower` and `λ* = 1` for `w >= upper`.
pub fn two_agent_thresholds(c1: f64, c2: f64) -> Result<(f64, f64)> {
    check_costs(c1, c2)?;
    let cc = c1 * c2;
    Ok(((cc - c1) / (cc + c2 - 1.0), (cc + c1 - 1.0) / (cc - c2)))
}

/// Maximizer of `w p_1 + p_2` over `λ ∈ [0, 1]`. Interior optima solve
/// `p_2'(λ) / p_1'(λ) = -w`; the ratio is strictly decreasing.
pub fn two_agent_optimal_lambda(c1: f64, c2: f64, w: f64) -> Result<f64> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "objective weight must be positive, got {w}"
        )));
    }
    let (lower, upper) = two_agent_thresholds(c1, c2)?;
    if w <= lower {
        return Ok(0.0);
    }
    if w >= upper {
        return Ok(1.0);
    }
    let gap = |l: f64| {
        let (d1, d2) = two_agent_derivatives(c1, c2, l).expect("validated above");
        d2 / d1 + w
    };
    Ok(bisect(gap, 0.0, 1.0, 1e-12))
}
