//! Convex effort-cost functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Precision of the bisection used to invert tabulated derivatives.
const INVERSE_TOL: f64 = 1e-12;

/// Strictly convex cost of choosing success probability `p`, with `c'(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFn {
    /// `c(p) = (scale / exponent) * p^exponent`, so `c'(p) = scale * p^(exponent - 1)`.
    Power { scale: f64, exponent: f64 },
    /// Derivative samples on a uniform grid over `[0, 1]`, interpolated linearly.
    Tabulated { derivative: Vec<f64> },
}

impl CostFn {
    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        let c = CostFn::Power { scale, exponent };
        c.validate()?;
        Ok(c)
    }

    pub fn quadratic(scale: f64) -> Result<Self> {
        Self::power(scale, 2.0)
    }

    pub fn tabulated(derivative: Vec<f64>) -> Result<Self> {
        let c = CostFn::Tabulated { derivative };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CostFn::Power { scale, exponent } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::invalid(format!(
                        "power cost scale must be positive, got {scale}"
                    )));
                }
                if !(exponent.is_finite() && *exponent >= 2.0) {
                    return Err(Error::invalid(format!(
                        "power cost exponent must be >= 2, got {exponent}"
                    )));
                }
            }
            CostFn::Tabulated { derivative } => {
                if derivative.len() < 2 {
                    return Err(Error::invalid(
                        "tabulated derivative needs at least two samples",
                    ));
                }
                if derivative[0] != 0.0 {
                    return Err(Error::invalid("tabulated derivative must be 0 at p = 0"));
                }
                if derivative.iter().any(|d| !d.is_finite())
                    || derivative.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(Error::invalid(
                        "tabulated derivative must be finite and strictly increasing",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, p: f64) -> f64 {
        match self {
            CostFn::Power { scale, exponent } => scale / exponent * p.powf(*exponent),
            CostFn::Tabulated { derivative } => {
                // exact integral of the piecewise-linear derivative
                let h = 1.0 / (derivative.len() - 1) as f64;
                let mut acc = 0.0;
                let mut x = 0.0;
                for w in derivative.windows(2) {
                    if x >= p {
                        break;
                    }
                    let width = (p - x).min(h);
                    let end = w[0] + (w[1] - w[0]) * width / h;
                    acc += 0.5 * (w[0] + end) * width;
                    x += h;
                }
                acc
            }
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match self {
            CostFn::Power { scale, exponent } => scale * p.powf(exponent - 1.0),
            CostFn::Tabulated { derivative } => {
                let m = derivative.len() - 1;
                let x = p.clamp(0.0, 1.0) * m as f64;
                let k = (x.floor() as usize).min(m - 1);
                let t = x - k as f64;
                derivative[k] + (derivative[k + 1] - derivative[k]) * t
            }
        }
    }

    /// `c'(1)`, the marginal cost of certain success.
    pub fn derivative_at_one(&self) -> f64 {
        self.derivative(1.0)
    }

    /// `(c')^{-1}(r)` for `r` in `[0, c'(1)]`; saturates at the interval ends.
    pub fn inverse_derivative(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self {
            CostFn::Power { scale, exponent } => {
                (r / scale).powf(1.0 / (exponent - 1.0)).min(1.0)
            }
            CostFn::Tabulated { derivative } => {
                if r >= *derivative.last().unwrap() {
                    return 1.0;
                }
                bisect(|x| self.derivative(x) - r, 0.0, 1.0, INVERSE_TOL)
            }
        }
    }

    /// The cost `c / factor`.
    pub fn scaled_down(&self, factor: f64) -> CostFn {
        match self {
            CostFn::Power { scale, exponent } => CostFn::Power {
                scale: scale / factor,
                exponent: *exponent,
            },
            CostFn::Tabulated { derivative } => CostFn::Tabulated {
                derivative: derivative.iter().map(|d| d / factor).collect(),
            },
        }
    }
}

/// One cost function per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostModel {
    agents: Vec<CostFn>,
}

impl CostModel {
    pub fn new(agents: Vec<CostFn>) -> Result<Self> {
        crate::model::subset::check_agent_count(agents.len())?;
        for c in &agents {
            c.validate()?;
        }
        Ok(CostModel { agents })
    }

    /// Quadratic costs `c_i(p) = C_i p^2 / 2`.
    pub fn quadratic(scales: &[f64]) -> Result<Self> {
        Self::new(
            scales
                .iter()
                .map(|&c| CostFn::quadratic(c))
                .collect::<Result<_>>()?,
        )
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, i: usize) -> &CostFn {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[CostFn] {
        &self.agents
    }

    #[inline]
    pub fn derivative(&self, i: usize, p: f64) -> f64 {
        self.agents[i].derivative(p)
    }

    #[inline]
    pub fn inverse_derivative(&self, i: usize, r: f64) -> f64 {
        self.agents[i].inverse_derivative(r)
    }

    /// Rescale to the strategically equivalent game with unit budget.
    pub fn normalize_budget(&self, budget: f64) -> Result<CostModel> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::invalid(format!("budget must be positive, got {budget}")));
        }
        Ok(CostModel {
            agents: self.agents.iter().map(|c| c.scaled_down(budget)).collect(),
        })
    }

    /// Small-budget admissibility: `c_i'(1) > 1` for every agent.
    pub fn is_small_budget(&self) -> bool {
        self.agents.iter().all(|c| c.derivative_at_one() > 1.0)
    }

    /// First agent violating small-budget admissibility, if any.
    pub fn check_small_budget(&self) -> Result<()> {
        match self
            .agents
            .iter()
            .position(|c| c.derivative_at_one() <= 1.0)
        {
            None => Ok(()),
            Some(agent) => Err(Error::NotAdmissible {
                agent,
                derivative_at_one: self.agents[agent].derivative_at_one(),
                gain: 1.0,
            }),
        }
    }

    /// `sum_i p_i c_i'(p_i)`, the expected total payment any FGN contract
    /// implementing `p` must make.
    pub fn weighted_marginal_cost(&self, p: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .map(|(i, &pi)| pi * self.derivative(i, pi))
            .sum()
    }
}
