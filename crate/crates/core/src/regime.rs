//! Classification of a model by the decay of
//! `p(t) = int_0^T ||(S(t) - I) sigma_s||_HS ds` as `t -> 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::simpson_weights;
use crate::semigroup::{grid_steps, Direction, SemigroupSpec};
use crate::volatility::VolModel;

/// Exponents within this distance of a case boundary are assigned to the
/// boundary case, to absorb finite-grid regression error.
pub const EXPONENT_TOLERANCE: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeCase {
    /// `p = o(t^{3/4})`.
    I,
    /// `p = o(t^{1/2})`.
    II,
    /// `p = O(t^{1/2})`.
    III,
    /// No rate.
    IV,
}

impl RegimeCase {
    pub fn from_exponent(e: f64) -> Self {
        if e > 0.75 + EXPONENT_TOLERANCE {
            RegimeCase::I
        } else if e > 0.5 + EXPONENT_TOLERANCE {
            RegimeCase::II
        } else if e >= 0.5 - EXPONENT_TOLERANCE {
            RegimeCase::III
        } else {
            RegimeCase::IV
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RegimeCase::I => "(i)",
            RegimeCase::II => "(ii)",
            RegimeCase::III => "(iii)",
            RegimeCase::IV => "(iv)",
        }
    }

    /// Which limit theorems apply in this case.
    pub fn statement(&self) -> &'static str {
        match self {
            RegimeCase::I => "SARCV and RV both satisfy the law of large numbers and the central limit theorem",
            RegimeCase::II => {
                "RV satisfies the law of large numbers; SARCV satisfies the law of large numbers and the central limit theorem"
            }
            RegimeCase::III => "SARCV satisfies the law of large numbers and the central limit theorem; RV may fail the central limit theorem",
            RegimeCase::IV => "SARCV satisfies the law of large numbers; no central limit theorem is guaranteed and RV may be inconsistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub t_grid: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Fitted exponent of `p(t) ~ t^e`; infinite when `p` vanishes.
    pub exponent: f64,
    pub case: RegimeCase,
    pub statement: String,
}

/// `||(S(t) - I) sigma_s||_HS`.
fn moved_hs_norm(s: &SemigroupSpec, vol: &VolModel, t: f64, at: f64) -> Result<f64> {
    let space = vol.space();
    let p = s.propagator(&space, t, Direction::Forward)?;
    let cols = vol.columns_at(at)?;
    let mut moved = cols.clone();
    p.apply_columns(&mut moved);
    let diff = moved - cols;
    let mut total = 0.0;
    for c in diff.column_iter() {
        total += space.inner_coeffs(c.as_slice(), c.as_slice());
    }
    Ok(total.max(0.0).sqrt())
}

/// Estimates the decay exponent of `p(t)` over `t_grid` by log–log
/// regression and classifies the model.
pub fn vol_regularity_index(
    s: &SemigroupSpec,
    vol: &VolModel,
    t_grid: &[f64],
    horizon: f64,
) -> Result<RegularityReport> {
    s.check_space(&vol.space())?;
    if t_grid.len() < 2 {
        return Err(Error::Argument("at least two probe times are needed".into()));
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) || !(horizon > 0.0) {
        return Err(Error::Argument("probe times and horizon must be positive".into()));
    }
    let (intervals, h) = if vol.is_time_constant() {
        (0, 0.0)
    } else if let Some(dx) = vol.time_grid_step() {
        (grid_steps(horizon, dx)?, dx)
    } else {
        (200, horizon / 200.0)
    };
    let mut p_values = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let p = if intervals == 0 {
            horizon * moved_hs_norm(s, vol, t, 0.0)?
        } else {
            let w = simpson_weights(intervals, h);
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let at = if k == intervals { horizon } else { k as f64 * h };
                acc += wk * moved_hs_norm(s, vol, t, at)?;
            }
            acc
        };
        p_values.push(p);
    }
    let scale = p_values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let exponent = if scale <= 1e-300 || p_values.iter().all(|&p| p <= 1e-14 * scale.max(1.0)) {
        f64::INFINITY
    } else {
        let pts: Vec<(f64, f64)> =
            t_grid.iter().zip(&p_values).filter(|(_, &p)| p > 0.0).map(|(&t, &p)| (t.ln(), p.ln())).collect();
        if pts.len() < 2 {
            return Err(Error::Numerical("too few positive probe values for a fit".into()));
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    let case = if exponent.is_infinite() { RegimeCase::I } else { RegimeCase::from_exponent(exponent) };
    Ok(RegularityReport { t_grid: t_grid.to_vec(), p_values, exponent, case, statement: case.statement().to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{GridFunction, SpaceSpec};
    use crate::volatility::KernelShape;
    use nalgebra::DVector;

    #[test]
    fn identity_semigroup_is_case_one() {
        let s = SpaceSpec::l2(0.0, 1.0, 16).unwrap();
        let vol = VolModel::constant_kernel(s, KernelShape::Gaussian { scale: 1.0, length: 0.2 }, 16).unwrap();
        let r = vol_regularity_index(&SemigroupSpec::Identity, &vol, &[0.0625, 0.125, 0.25], 1.0).unwrap();
        assert!(r.exponent.is_infinite());
        assert_eq!(r.case, RegimeCase::I);
    }

    #[test]
    fn shifted_indicator_has_exponent_one_half() {
        let j = 256;
        let s = SpaceSpec::l2(0.0, 1.0, j).unwrap();
        let x = GridFunction::indicator(s, 0.0, 1.0).unwrap();
        let vol = VolModel::rank_one_frozen(x, SemigroupSpec::NilpotentShift, DVector::from_vec(vec![1.0])).unwrap();
        let t_grid: Vec<f64> = [1usize, 2, 4, 8].iter().map(|k| *k as f64 / j as f64).collect();
        let r = vol_regularity_index(&SemigroupSpec::NilpotentShift, &vol, &t_grid, 0.5).unwrap();
        assert!((r.exponent - 0.5).abs() < 0.02, "{}", r.exponent);
        assert_eq!(r.case, RegimeCase::III);
    }

    #[test]
    fn case_boundaries() {
        assert_eq!(RegimeCase::from_exponent(1.0), RegimeCase::I);
        assert_eq!(RegimeCase::from_exponent(0.65), RegimeCase::II);
        assert_eq!(RegimeCase::from_exponent(0.49), RegimeCase::III);
        assert_eq!(RegimeCase::from_exponent(0.25), RegimeCase::IV);
    }
}
