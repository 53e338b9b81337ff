//! Semigroup-adjusted realised covariation for mild solutions of semilinear
//! stochastic partial differential equations.
//!
//! The crate simulates `Y_t = S(t) Y_0 + int S(t - s) alpha ds + int S(t - s) sigma_s dW_s`
//! on discretized Hilbert spaces and estimates the integrated volatility
//! `int Sigma_s ds`, `Sigma_s = sigma_s sigma_s*`, from the increments
//! `Y_{i Delta} - S(Delta) Y_{(i-1) Delta}`:
//!
//! ```
//! use mildvol::prelude::*;
//!
//! let n = 64;
//! let space = SpaceSpec::l2(0.0, 1.0, n).unwrap();
//! let vol = VolModel::constant_kernel(space, KernelShape::Gaussian { scale: 1.0, length: 0.2 }, n).unwrap();
//! let cfg = SimConfig::new(n, 1.0, 7, GridFunction::zeros(space));
//! let path = simulate_mild(&vol, &SemigroupSpec::NilpotentShift, &cfg).unwrap();
//! let est = sarcv(&path, &SemigroupSpec::NilpotentShift, 1.0).unwrap();
//! let truth = integrated_volatility(&vol, 1.0, Weighting::None).unwrap();
//! assert!(est.hs_distance(&truth).unwrap() < truth.hs_norm());
//! ```

pub mod counterexample;
pub mod discrete;
pub mod error;
pub mod estimators;
pub mod fbm;
pub mod inference;
pub mod io;
pub mod operator;
#[cfg(test)]
mod proptests;
pub mod quadrature;
pub mod regime;
pub mod scenarios;
pub mod semigroup;
pub mod simulate;
pub mod space;
pub mod volatility;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::estimators::{
        adjusted_increments, conditional_cov_estimator, gamma_hat_qform, gamma_theoretical_qform, raw_increments,
        rho_qform, rv, sampv_qform, sarcv, IncrementSeries, PairingSet,
    };
    pub use crate::inference::{ci_functional, feasible_t_stat, CltStat, Interval};
    pub use crate::operator::{FiniteRankOperator, HSOperator, RankOneTestTensor};
    pub use crate::semigroup::{favard_probe, Direction, SemigroupSpec};
    pub use crate::simulate::{simulate_mild, PathSample, SimConfig};
    pub use crate::space::{truncate_basis, Band, GridFunction, SpaceSpec};
    pub use crate::volatility::{
        integrated_volatility, integrated_volatility_between, KernelShape, Modulation, VolModel, Weighting,
    };
}
