//! Feasible central limit statistics and confidence intervals for
//! `<int_0^t Sigma_s ds, B>`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{adjusted_increments, gamma_hat_from_pairings, test_pairings};
use crate::inference::normal::normal_quantile;
use crate::operator::{FiniteRankOperator, HSOperator};
use crate::semigroup::SemigroupSpec;
use crate::simulate::PathSample;

/// Values of `<Gamma_hat B, B>` below this are treated as the degenerate
/// event `<Gamma B, B> = 0`.
pub const DEGENERACY_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltStat {
    /// Standardized statistic; NaN when degenerate.
    pub value: f64,
    /// `Delta^{-1/2} <SARCV_t - target, B>`.
    pub numerator: f64,
    /// `<Gamma_hat_t B, B>`.
    pub denom_sq: f64,
    pub degenerate: bool,
}

impl CltStat {
    /// Builds the statistic from the pairings `c_i = <d_i^{(x)2}, B>` and the
    /// hypothesized value `<target, B>`.
    pub fn from_pairings(c: &[f64], dt: f64, target: f64) -> Result<Self> {
        let denom_sq = gamma_hat_from_pairings(c, dt)?;
        let estimate: f64 = c.iter().sum();
        let numerator = (estimate - target) / dt.sqrt();
        let degenerate = !(denom_sq >= DEGENERACY_FLOOR);
        let value = if degenerate { f64::NAN } else { numerator / denom_sq.sqrt() };
        Ok(CltStat { value, numerator, denom_sq, degenerate })
    }
}

/// Confidence interval for `<int Sigma, B>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub degenerate: bool,
}

impl Interval {
    pub fn from_pairings(c: &[f64], dt: f64, level: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&level) {
            return Err(Error::Argument(format!("confidence level {level} outside [0, 1)")));
        }
        let gamma = gamma_hat_from_pairings(c, dt)?;
        let estimate: f64 = c.iter().sum();
        let degenerate = !(gamma >= DEGENERACY_FLOOR);
        let z = normal_quantile(0.5 * (1.0 + level));
        let half = if degenerate { 0.0 } else { z * (dt * gamma).sqrt() };
        Ok(Interval { estimate, lower: estimate - half, upper: estimate + half, degenerate })
    }

    pub fn contains(&self, x: f64) -> bool {
        !self.degenerate && self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn pairings(path: &PathSample, s: &SemigroupSpec, b: &FiniteRankOperator, t: f64) -> Result<Vec<f64>> {
    test_pairings(&adjusted_increments(path, s)?, b, t)
}

/// `Delta^{-1/2} <SARCV_t - target, B> / sqrt(<Gamma_hat_t B, B>)`.
pub fn feasible_t_stat(
    path: &PathSample,
    s: &SemigroupSpec,
    b: &FiniteRankOperator,
    t: f64,
    target: &HSOperator,
) -> Result<CltStat> {
    let c = pairings(path, s, b, t)?;
    CltStat::from_pairings(&c, path.dt(), b.pair(target)?)
}

/// `<SARCV_t, B> -/+ z_{(1+level)/2} Delta^{1/2} sqrt(<Gamma_hat_t B, B>)`.
pub fn ci_functional(
    path: &PathSample,
    s: &SemigroupSpec,
    b: &FiniteRankOperator,
    t: f64,
    level: f64,
) -> Result<Interval> {
    let c = pairings(path, s, b, t)?;
    Interval::from_pairings(&c, path.dt(), level)
}
