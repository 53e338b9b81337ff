//! Frozen reference models used by the validation campaigns.
//!
//! Shift semigroups only act on grid-commensurate times, so the spatial grid
//! of every shift model is tied to the sample size: `J = n` cells on
//! `L2(0, 1)` and `n + 1` nodes on `H1(0, 1)`. The noise is truncated to a
//! fixed number of cells independent of `n`.

use nalgebra::DVector;

use crate::error::Result;
use crate::inference::montecarlo::Model;
use crate::operator::FiniteRankOperator;
use crate::semigroup::SemigroupSpec;
use crate::simulate::SimConfig;
use crate::space::{GridFunction, SpaceSpec};
use crate::volatility::{KernelShape, VolModel};

/// Noise truncation `M` of the kernel models.
pub const NOISE_CELLS: usize = 32;

/// Kernel of the constant-volatility models.
pub const KERNEL: KernelShape = KernelShape::Gaussian { scale: 1.0, length: 0.15 };

/// Diffusivity of the heat reference model.
pub const HEAT_KAPPA: f64 = 1.0;

/// Smoothness index `r` of the heat reference covariance.
pub const HEAT_R: f64 = 2.0;

/// Spectral modes of the heat reference model.
pub const HEAT_MODES: usize = 256;

/// `1_{[0, 1/2]}`.
pub fn half_indicator(space: SpaceSpec) -> Result<GridFunction> {
    GridFunction::indicator(space, 0.0, 0.5)
}

/// `delta_{3/4} - delta_{1/4}` on `H1`.
pub fn evaluation_spread(space: SpaceSpec) -> Result<GridFunction> {
    GridFunction::evaluation(space, 0.75)?.sub(&GridFunction::evaluation(space, 0.25)?)
}

/// Constant Gaussian-kernel volatility under the nilpotent shift on
/// `L2(0, 1)` with `n` cells, horizon 1, tested against
/// `1_{[0,1/2]} (x) 1_{[0,1/2]}`.
pub fn constant_kernel_shift(n: usize) -> Result<Model> {
    let space = SpaceSpec::l2(0.0, 1.0, n)?;
    let vol = VolModel::constant_kernel(space, KERNEL, NOISE_CELLS)?;
    let h = half_indicator(space)?;
    Ok(Model {
        semigroup: SemigroupSpec::NilpotentShift,
        vol,
        sim: SimConfig::new(n, 1.0, 0, GridFunction::zeros(space)),
        functionals: vec![FiniteRankOperator::tensor_square(&h)],
    })
}

/// Constant Gaussian-kernel volatility under the Sobolev shift on `H1(0, 1)`
/// with `n + 1` nodes, tested against `(delta_{3/4} - delta_{1/4})^{(x)2}`.
pub fn sobolev_kernel(n: usize) -> Result<Model> {
    let space = SpaceSpec::h1(n + 1)?;
    let vol = VolModel::constant_kernel(space, KERNEL, NOISE_CELLS)?;
    let d = evaluation_spread(space)?;
    Ok(Model {
        semigroup: SemigroupSpec::SobolevShift,
        vol,
        sim: SimConfig::new(n, 1.0, 0, GridFunction::zeros(space)),
        functionals: vec![FiniteRankOperator::tensor_square(&d)],
    })
}

/// Diagonal covariance `q_j = j^{-(2r + 1)}` under the heat semigroup on
/// the first `HEAT_MODES` sine modes.
pub fn heat_diagonal(n: usize) -> Result<Model> {
    let space = SpaceSpec::spectral(HEAT_MODES)?;
    let vol = VolModel::heat_diagonal(space, 1.0, HEAT_R, 0.0)?;
    let e1 = GridFunction::basis(space, 1)?;
    Ok(Model {
        semigroup: SemigroupSpec::Heat { kappa: HEAT_KAPPA },
        vol,
        sim: SimConfig::new(n, 1.0, 0, GridFunction::zeros(space)),
        functionals: vec![FiniteRankOperator::tensor_square(&e1)],
    })
}

/// `sigma_s = e (x) S(s) 1_{[0,1]}` under the nilpotent shift on `L2(0, 1)`.
pub fn rank_one_indicator_shift(n: usize) -> Result<Model> {
    let space = SpaceSpec::l2(0.0, 1.0, n)?;
    let x = GridFunction::indicator(space, 0.0, 1.0)?;
    let vol = VolModel::rank_one_frozen(x, SemigroupSpec::NilpotentShift, DVector::from_element(1, 1.0))?;
    let h = half_indicator(space)?;
    Ok(Model {
        semigroup: SemigroupSpec::NilpotentShift,
        vol,
        sim: SimConfig::new(n, 1.0, 0, GridFunction::zeros(space)),
        functionals: vec![FiniteRankOperator::tensor_square(&h)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_models_are_grid_commensurate() {
        for n in [16, 64] {
            let m = constant_kernel_shift(n).unwrap();
            assert_eq!(m.vol.space().dim(), n);
            assert_eq!(m.vol.noise_dim(), NOISE_CELLS);
            let m = sobolev_kernel(n).unwrap();
            assert_eq!(m.vol.space().dim(), n + 1);
        }
    }

    #[test]
    fn spread_has_unit_distance_norm() {
        // ||delta_x - delta_y||^2 = k(x,x) + k(y,y) - 2 k(x,y) = |x - y|
        let d = evaluation_spread(SpaceSpec::h1(65).unwrap()).unwrap();
        assert!((d.norm() - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
