//! Volatility processes `sigma_s` and their integrated second moments.
//!
//! The driving cylindrical noise is truncated to `M` orthonormal directions.
//! Every model is represented through the columns `sigma_s eps_m`, so that
//! `Sigma_s = sigma_s sigma_s*` has kernel `C_s C_s'` in the frame of the
//! state space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::HSOperator;
use crate::quadrature::simpson_weights;
use crate::semigroup::{grid_steps, Direction, Propagator, SemigroupSpec};
use crate::space::{h1_coeffs_from_values, GridFunction, SpaceSpec};

/// Shape of a time-constant integral kernel `q(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelShape {
    Zero,
    /// `scale * exp(-(x - y)^2 / (2 length^2))`.
    Gaussian {
        scale: f64,
        length: f64,
    },
    /// `scale * exp(-|x - y| / length)`.
    Exponential {
        scale: f64,
        length: f64,
    },
}

impl KernelShape {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            KernelShape::Zero => 0.0,
            KernelShape::Gaussian { scale, length } => {
                let d = (x - y) / length;
                scale * (-0.5 * d * d).exp()
            }
            KernelShape::Exponential { scale, length } => scale * (-(x - y).abs() / length).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            KernelShape::Zero => Ok(()),
            KernelShape::Gaussian { scale, length } | KernelShape::Exponential { scale, length } => {
                if scale.is_finite() && length > 0.0 && length.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Argument("kernel scale must be finite and length positive".into()))
                }
            }
        }
    }
}

/// Nonnegative scalar profile `c(s)` multiplying `Sigma_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Modulation {
    /// `scale * s^exponent`.
    Power { scale: f64, exponent: f64 },
    /// `intercept + slope * s`.
    Affine { intercept: f64, slope: f64 },
}

impl Modulation {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Modulation::Power { scale, exponent } => {
                if s == 0.0 && exponent > 0.0 {
                    0.0
                } else {
                    scale * s.powf(exponent)
                }
            }
            Modulation::Affine { intercept, slope } => intercept + slope * s,
        }
    }

    fn sqrt_at(&self, s: f64) -> Result<f64> {
        let c = self.eval(s);
        if c < 0.0 || !c.is_finite() {
            return Err(Error::Domain(format!("modulation c({s}) = {c} is not a valid variance scale")));
        }
        Ok(c.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Volatility {
    /// `sigma f(x) = int q(x, y) f(y) dy`, with the materialized columns and
    /// the kernel of `Sigma`.
    Kernel { shape: KernelShape, columns: DMatrix<f64>, sigma_sq: DMatrix<f64> },
    /// `sigma_s u = <e, u> S(s) X` for a unit noise direction `e`.
    RankOneFrozen { direction: DVector<f64>, path: GridFunction, semigroup: SemigroupSpec },
    /// `sigma e_j = q_j^{1/2} e_j` on the sine basis.
    HeatDiagonal { sqrt_weights: DVector<f64> },
    /// `Sigma_s = c(s) * base Sigma_s`, i.e. `sigma_s = sqrt(c(s)) * base sigma_s`.
    TimeModulated { modulation: Modulation, base: Box<Volatility> },
}

impl Volatility {
    fn noise_dim(&self) -> usize {
        match self {
            Volatility::Kernel { columns, .. } => columns.ncols(),
            Volatility::RankOneFrozen { direction, .. } => direction.len(),
            Volatility::HeatDiagonal { sqrt_weights } => sqrt_weights.len(),
            Volatility::TimeModulated { base, .. } => base.noise_dim(),
        }
    }

    fn is_time_constant(&self) -> bool {
        match self {
            Volatility::Kernel { .. } | Volatility::HeatDiagonal { .. } => true,
            Volatility::RankOneFrozen { semigroup, .. } => *semigroup == SemigroupSpec::Identity,
            Volatility::TimeModulated { .. } => false,
        }
    }

    fn needs_grid_times(&self) -> bool {
        match self {
            Volatility::RankOneFrozen { semigroup, .. } => semigroup.is_shift(),
            Volatility::TimeModulated { base, .. } => base.needs_grid_times(),
            _ => false,
        }
    }

    fn columns_at(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok(match self {
            Volatility::Kernel { columns, .. } => columns.clone(),
            Volatility::RankOneFrozen { direction, path, semigroup } => {
                let x = semigroup.apply(s, path)?;
                x.coeffs() * direction.transpose()
            }
            Volatility::HeatDiagonal { sqrt_weights } => DMatrix::from_diagonal(sqrt_weights),
            Volatility::TimeModulated { modulation, base } => base.columns_at(s)? * modulation.sqrt_at(s)?,
        })
    }

    fn sigma_sq_at(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok(match self {
            Volatility::Kernel { sigma_sq, .. } => sigma_sq.clone(),
            Volatility::RankOneFrozen { direction, path, semigroup } => {
                let x = semigroup.apply(s, path)?;
                x.coeffs() * x.coeffs().transpose() * direction.norm_squared()
            }
            Volatility::HeatDiagonal { sqrt_weights } => {
                DMatrix::from_diagonal(&sqrt_weights.component_mul(sqrt_weights))
            }
            Volatility::TimeModulated { modulation, base } => base.sigma_sq_at(s)? * modulation.sqrt_at(s)?.powi(2),
        })
    }

    fn apply(&self, space: &SpaceSpec, s: f64, u: &[f64]) -> Result<DVector<f64>> {
        Ok(match self {
            Volatility::Kernel { columns, .. } => columns * DVector::from_column_slice(u),
            Volatility::RankOneFrozen { direction, path, semigroup } => {
                let w: f64 = direction.iter().zip(u).map(|(a, b)| a * b).sum();
                semigroup.apply(s, path)?.into_coeffs() * w
            }
            Volatility::HeatDiagonal { sqrt_weights } => {
                DVector::from_iterator(space.dim(), sqrt_weights.iter().zip(u).map(|(q, v)| q * v))
            }
            Volatility::TimeModulated { modulation, base } => base.apply(space, s, u)? * modulation.sqrt_at(s)?,
        })
    }
}

/// A volatility process together with a constant drift.
#[derive(Debug, Clone, PartialEq)]
pub struct VolModel {
    space: SpaceSpec,
    volatility: Volatility,
    drift: Option<GridFunction>,
}

impl VolModel {
    /// Integral-kernel volatility with noise on `noise_cells` cells of the
    /// spatial domain (`M`).
    ///
    /// On `L2(a, b)` the orthonormal noise frame is `h_U^{-1/2} 1_{cell}`, so
    /// column `m` holds `q(x_k, y_m) sqrt(h_U)`. On `H1` the noise lives in
    /// `L2(0, 1)` and each column is the nodal interpolant of
    /// `q(., y_m) / sqrt(M)`.
    pub fn constant_kernel(space: SpaceSpec, shape: KernelShape, noise_cells: usize) -> Result<Self> {
        space.validate()?;
        shape.validate()?;
        if noise_cells == 0 {
            return Err(Error::Argument("noise truncation must be at least 1".into()));
        }
        let j = space.dim();
        let (a, b) = space.domain();
        let hu = (b - a) / noise_cells as f64;
        let ys: Vec<f64> = (0..noise_cells).map(|m| a + (m as f64 + 0.5) * hu).collect();
        let xs = space.grid_points();
        let columns = match space {
            SpaceSpec::L2 { .. } => DMatrix::from_fn(j, noise_cells, |k, m| shape.eval(xs[k], ys[m]) * hu.sqrt()),
            SpaceSpec::H1 { .. } => {
                let mut c = DMatrix::zeros(j, noise_cells);
                for m in 0..noise_cells {
                    let vals: Vec<f64> = xs.iter().map(|&x| shape.eval(x, ys[m]) * hu.sqrt()).collect();
                    c.set_column(m, &DVector::from_vec(h1_coeffs_from_values(&vals)));
                }
                c
            }
            SpaceSpec::Spectral { .. } => {
                return Err(Error::Argument(
                    "kernel volatilities are defined on L2 and H1 grids; use a diagonal model on the sine basis".into(),
                ))
            }
        };
        let sigma_sq = &columns * columns.transpose();
        let sigma_sq = (&sigma_sq + sigma_sq.transpose()) * 0.5;
        Ok(VolModel { space, volatility: Volatility::Kernel { shape, columns, sigma_sq }, drift: None })
    }

    /// `sigma_s = e (x) S(s) X` with `e` normalized.
    pub fn rank_one_frozen(path: GridFunction, semigroup: SemigroupSpec, direction: DVector<f64>) -> Result<Self> {
        let space = path.space();
        semigroup.check_space(&space)?;
        let norm = direction.norm();
        if direction.is_empty() || !(norm > 0.0) {
            return Err(Error::Argument("rank-one direction must be a nonzero vector".into()));
        }
        Ok(VolModel {
            space,
            volatility: Volatility::RankOneFrozen { direction: direction / norm, path, semigroup },
            drift: None,
        })
    }

    /// Diagonal covariance with `q_j^{1/2} = scale * j^{-(r + 1/2 + eps)}`.
    pub fn heat_diagonal(space: SpaceSpec, scale: f64, r: f64, eps: f64) -> Result<Self> {
        let SpaceSpec::Spectral { modes } = space else {
            return Err(Error::Argument("diagonal heat covariance needs a spectral space".into()));
        };
        if !(scale.is_finite() && r.is_finite() && eps >= 0.0) {
            return Err(Error::Argument("invalid heat covariance parameters".into()));
        }
        let w = DVector::from_fn(modes, |i, _| scale * ((i + 1) as f64).powf(-(r + 0.5 + eps)));
        Ok(VolModel { space, volatility: Volatility::HeatDiagonal { sqrt_weights: w }, drift: None })
    }

    /// Diagonal covariance from explicit weights `q_j^{1/2}`.
    pub fn diagonal(space: SpaceSpec, sqrt_weights: Vec<f64>) -> Result<Self> {
        if !matches!(space, SpaceSpec::Spectral { .. }) || sqrt_weights.len() != space.dim() {
            return Err(Error::Dimension("diagonal weights must match the spectral modes".into()));
        }
        Ok(VolModel {
            space,
            volatility: Volatility::HeatDiagonal { sqrt_weights: DVector::from_vec(sqrt_weights) },
            drift: None,
        })
    }

    /// Scales `Sigma_s` by `c(s)`.
    pub fn time_modulated(self, modulation: Modulation) -> Self {
        VolModel {
            space: self.space,
            volatility: Volatility::TimeModulated { modulation, base: Box::new(self.volatility) },
            drift: self.drift,
        }
    }

    pub fn with_drift(mut self, drift: GridFunction) -> Result<Self> {
        self.space.check_same(&drift.space())?;
        self.drift = Some(drift);
        Ok(self)
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn volatility(&self) -> &Volatility {
        &self.volatility
    }

    pub fn drift(&self) -> Option<&GridFunction> {
        self.drift.as_ref()
    }

    /// `M`.
    pub fn noise_dim(&self) -> usize {
        self.volatility.noise_dim()
    }

    pub fn is_time_constant(&self) -> bool {
        self.volatility.is_time_constant()
    }

    /// Grid step that evaluation times must be multiples of, if any.
    pub fn time_grid_step(&self) -> Option<f64> {
        if self.volatility.needs_grid_times() {
            self.space.step()
        } else {
            None
        }
    }

    /// Constant diagonal weights when the model is an unmodulated diagonal
    /// covariance on the sine basis.
    pub fn diagonal_weights(&self) -> Option<&DVector<f64>> {
        match &self.volatility {
            Volatility::HeatDiagonal { sqrt_weights } => Some(sqrt_weights),
            _ => None,
        }
    }

    /// `sigma_s u` for a noise coordinate vector `u` of length `M`.
    pub fn sigma_apply(&self, s: f64, u: &[f64]) -> Result<GridFunction> {
        if u.len() != self.noise_dim() {
            return Err(Error::Dimension(format!(
                "noise vector of length {} for {} noise modes",
                u.len(),
                self.noise_dim()
            )));
        }
        let c = self.volatility.apply(&self.space, s, u)?;
        Ok(GridFunction::from_parts_unchecked(self.space, c))
    }

    /// Columns `sigma_s eps_m`, `J x M`.
    pub fn columns_at(&self, s: f64) -> Result<DMatrix<f64>> {
        self.volatility.columns_at(s)
    }

    /// `Sigma_s = sigma_s sigma_s*`.
    pub fn sigma_sq_at(&self, s: f64) -> Result<HSOperator> {
        let k = self.volatility.sigma_sq_at(s)?;
        HSOperator::new(self.space, (&k + k.transpose()) * 0.5, true)
    }

    /// `||sigma_s||_HS`.
    pub fn hs_norm_at(&self, s: f64) -> Result<f64> {
        let c = self.columns_at(s)?;
        let mut total = 0.0;
        for col in c.column_iter() {
            total += self.space.inner_coeffs(col.as_slice(), col.as_slice());
        }
        Ok(total.max(0.0).sqrt())
    }
}

/// Optional transport of the integrand to a terminal time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    None,
    /// `S(T - s) Sigma_s S(T - s)*`.
    Terminal {
        horizon: f64,
        semigroup: SemigroupSpec,
    },
}

/// Default number of Simpson intervals for smooth integrands.
const SIMPSON_INTERVALS: usize = 200;

/// `int_0^t Sigma_s ds`, optionally weighted.
pub fn integrated_volatility(vol: &VolModel, t: f64, weighting: Weighting) -> Result<HSOperator> {
    integrated_volatility_between(vol, 0.0, t, weighting)
}

/// `int_u^t Sigma_s ds`, optionally weighted.
///
/// Constant unweighted integrands are integrated exactly. Otherwise composite
/// Simpson is used, on the spatial grid step when the integrand involves a
/// shift semigroup (those are only defined at grid times) and on 201 nodes
/// otherwise.
pub fn integrated_volatility_between(vol: &VolModel, u: f64, t: f64, weighting: Weighting) -> Result<HSOperator> {
    if !(u >= 0.0 && u <= t && t.is_finite()) {
        return Err(Error::Argument(format!("integration window [{u}, {t}] is invalid")));
    }
    let space = vol.space();
    let terminal = match weighting {
        Weighting::None => None,
        Weighting::Terminal { horizon, semigroup } => {
            semigroup.check_space(&space)?;
            if horizon < t {
                return Err(Error::Argument(format!("terminal time {horizon} precedes {t}")));
            }
            Some((horizon, semigroup))
        }
    };
    if t == u {
        return Ok(HSOperator::zeros(space));
    }
    if terminal.is_none() && vol.is_time_constant() {
        let k = vol.volatility.sigma_sq_at(0.0)? * (t - u);
        return HSOperator::new(space, (&k + k.transpose()) * 0.5, true);
    }
    let shift_grid = vol.time_grid_step().is_some() || terminal.map(|(_, s)| s.is_shift()).unwrap_or(false);
    let (intervals, h) = if shift_grid {
        let dx = space.step().unwrap();
        grid_steps(u, dx)?;
        grid_steps(terminal.map(|(hz, _)| hz).unwrap_or(t), dx)?;
        (grid_steps(t - u, dx)?, dx)
    } else {
        (SIMPSON_INTERVALS, (t - u) / SIMPSON_INTERVALS as f64)
    };
    let weights = simpson_weights(intervals, h);
    let j = space.dim();
    let mut acc = DMatrix::zeros(j, j);
    let constant = if vol.is_time_constant() { Some(vol.volatility.sigma_sq_at(0.0)?) } else { None };
    for (k, w) in weights.iter().enumerate() {
        let s = if k == intervals { t } else { u + k as f64 * h };
        let mut q = match &constant {
            Some(c) => c.clone(),
            None => vol.volatility.sigma_sq_at(s)?,
        };
        if let Some((horizon, semigroup)) = terminal {
            let p = semigroup.propagator(&space, (horizon - s).max(0.0), Direction::Forward)?;
            transport(&p, &mut q);
        }
        acc += q * *w;
    }
    HSOperator::new(space, (&acc + acc.transpose()) * 0.5, true)
}

/// `Q -> P Q P'` in place.
pub(crate) fn transport(p: &Propagator, q: &mut DMatrix<f64>) {
    if p.is_identity() {
        return;
    }
    p.apply_columns(q);
    q.transpose_mut();
    p.apply_columns(q);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kernel_gives_zero_response() {
        let s = SpaceSpec::l2(0.0, 1.0, 6).unwrap();
        let v = VolModel::constant_kernel(s, KernelShape::Zero, 6).unwrap();
        let out = v.sigma_apply(0.3, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn heat_diagonal_matches_dense_operator() {
        let s = SpaceSpec::spectral(5).unwrap();
        let v = VolModel::heat_diagonal(s, 0.7, 2.0, 0.1).unwrap();
        let u = [0.3, -1.0, 2.0, 0.5, -0.25];
        let got = v.sigma_apply(0.0, &u).unwrap();
        let dense = v.columns_at(0.0).unwrap() * DVector::from_column_slice(&u);
        assert!((got.coeffs() - dense).amax() < 1e-15);
        for j in 0..5 {
            let q = 0.7 * ((j + 1) as f64).powf(-2.6);
            assert!((got.coeffs()[j] - q * u[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_one_response_is_shifted_path() {
        let s = SpaceSpec::l2(0.0, 2.0, 20).unwrap();
        let x = GridFunction::indicator(s, 0.0, 1.0).unwrap();
        let v =
            VolModel::rank_one_frozen(x.clone(), SemigroupSpec::NilpotentShift, DVector::from_vec(vec![1.0])).unwrap();
        let out = v.sigma_apply(0.3, &[2.5]).unwrap();
        let want = SemigroupSpec::NilpotentShift.apply(0.3, &x).unwrap().scale(2.5);
        assert_eq!(out, want);
        assert!(!v.is_time_constant());
        assert_eq!(v.time_grid_step(), Some(0.1));
    }

    #[test]
    fn kernel_sigma_approximates_integral_of_kernel_product() {
        let s = SpaceSpec::l2(0.0, 1.0, 64).unwrap();
        let shape = KernelShape::Gaussian { scale: 1.0, length: 0.2 };
        let v = VolModel::constant_kernel(s, shape, 256).unwrap();
        let sig = v.sigma_sq_at(0.0).unwrap();
        let (x, y) = (s.grid_points()[10], s.grid_points()[40]);
        let want = crate::quadrature::integrate(|z| shape.eval(x, z) * shape.eval(y, z), 0.0, 1.0, 2000);
        assert!((sig.kernel()[(10, 40)] - want).abs() < 1e-4);
    }

    #[test]
    fn constant_integral_is_linear_in_time() {
        let s = SpaceSpec::l2(0.0, 1.0, 8).unwrap();
        let v = VolModel::constant_kernel(s, KernelShape::Gaussian { scale: 1.0, length: 0.3 }, 8).unwrap();
        let sig = v.sigma_sq_at(0.0).unwrap();
        let iv = integrated_volatility(&v, 0.7, Weighting::None).unwrap();
        assert!((iv.kernel() - sig.kernel() * 0.7).amax() < 1e-14);
        assert_eq!(integrated_volatility(&v, 0.0, Weighting::None).unwrap().hs_norm(), 0.0);
    }

    #[test]
    fn linear_modulation_integrates_to_half_t_squared() {
        let s = SpaceSpec::l2(0.0, 1.0, 8).unwrap();
        let base = VolModel::constant_kernel(s, KernelShape::Gaussian { scale: 1.0, length: 0.3 }, 8).unwrap();
        let sig = base.sigma_sq_at(0.0).unwrap();
        let v = base.time_modulated(Modulation::Power { scale: 1.0, exponent: 1.0 });
        let t = 0.8;
        let iv = integrated_volatility(&v, t, Weighting::None).unwrap();
        assert!((iv.kernel() - sig.kernel() * (t * t / 2.0)).amax() < 1e-12);
    }
}
