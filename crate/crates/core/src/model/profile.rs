use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::subset::check_agent_count;

/// Per-agent success probabilities, each in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Profile(Vec<f64>);

impl Profile {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        check_agent_count(p.len())?;
        if let Some((i, &v)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0 && **v < 1.0))
        {
            return Err(Error::invalid(format!(
                "profile entry {} = {v} outside [0, 1)",
                i + 1
            )));
        }
        Ok(Profile(p))
    }

    pub fn zeros(n: usize) -> Self {
        Profile(vec![0.0; n])
    }

    /// Errors unless every coordinate lies in the open interval `(0, 1)`.
    pub fn require_interior(&self) -> Result<()> {
        match self.0.iter().position(|&v| v <= 0.0 || v >= 1.0) {
            None => Ok(()),
            Some(agent) => Err(Error::DegenerateProfile {
                agent,
                value: self.0[agent],
            }),
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `q` weakly dominates `self` coordinate-wise, allowing `slack`.
    pub fn dominated_by(&self, q: &[f64], slack: f64) -> bool {
        self.0.iter().zip(q).all(|(a, b)| *b >= *a - slack)
    }
}

impl Deref for Profile {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for Profile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Profile::new(v).map_err(serde::de::Error::custom)
    }
}
