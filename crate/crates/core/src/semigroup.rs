//! Strongly continuous semigroups acting on the discretized spaces.
//!
//! * `NilpotentShift` on `L2(a, b)`: `(S(t)f)(x) = f(x + t)` for `x + t <= b`,
//!   zero beyond.
//! * `SobolevShift` on `H1(0, 1)`: `(S(t)f)(x) = f(min(x + t, 1))`.
//! * `Heat { kappa }` on the sine basis: mode `j` decays by
//!   `exp(-pi^2 j^2 kappa t)`.
//!
//! Shifts act exactly on the grid, so `t` must be a whole number of grid steps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{h1_coeffs_from_values, h1_node_values, GridFunction, SpaceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SemigroupSpec {
    Identity,
    NilpotentShift,
    SobolevShift,
    Heat { kappa: f64 },
}

/// Whether a semigroup or its adjoint is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Adjoint,
}

/// `S(t)` or `S(t)*` resolved against a space, ready to act on coefficient
/// vectors in place.
#[derive(Debug, Clone)]
pub enum Propagator {
    Identity,
    Nilpotent { steps: usize },
    NilpotentAdjoint { steps: usize },
    Sobolev { steps: usize },
    SobolevAdjoint { steps: usize },
    Diagonal(Vec<f64>),
}

/// Converts a time to a whole number of grid steps.
pub fn grid_steps(t: f64, dx: f64) -> Result<usize> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("semigroup time {t} must be finite and nonnegative")));
    }
    let k = t / dx;
    let r = k.round();
    if (k - r).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::Grid(format!("time {t} is not a multiple of the grid step {dx}")));
    }
    Ok(r as usize)
}

impl SemigroupSpec {
    pub fn validate(&self) -> Result<()> {
        if let SemigroupSpec::Heat { kappa } = *self {
            if !(kappa > 0.0 && kappa.is_finite()) {
                return Err(Error::Argument(format!("heat diffusivity {kappa} must be positive")));
            }
        }
        Ok(())
    }

    /// Checks that the semigroup is defined on `space`.
    pub fn check_space(&self, space: &SpaceSpec) -> Result<()> {
        self.validate()?;
        let ok = matches!(
            (self, space),
            (SemigroupSpec::Identity, _)
                | (SemigroupSpec::NilpotentShift, SpaceSpec::L2 { .. })
                | (SemigroupSpec::SobolevShift, SpaceSpec::H1 { .. })
                | (SemigroupSpec::Heat { .. }, SpaceSpec::Spectral { .. })
        );
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!("{self:?} is not defined on {space:?}")))
        }
    }

    /// Whether the semigroup restricts admissible times to the spatial grid.
    pub fn is_shift(&self) -> bool {
        matches!(self, SemigroupSpec::NilpotentShift | SemigroupSpec::SobolevShift)
    }

    pub fn is_self_adjoint(&self) -> bool {
        matches!(self, SemigroupSpec::Identity | SemigroupSpec::Heat { .. })
    }

    /// Checks that `t` is admissible on `space` without building anything.
    pub fn check_time(&self, space: &SpaceSpec, t: f64) -> Result<()> {
        self.propagator(space, t, Direction::Forward).map(|_| ())
    }

    pub fn propagator(&self, space: &SpaceSpec, t: f64, dir: Direction) -> Result<Propagator> {
        self.check_space(space)?;
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Domain(format!("semigroup time {t} must be finite and nonnegative")));
        }
        Ok(match (*self, dir) {
            (SemigroupSpec::Identity, _) => Propagator::Identity,
            (SemigroupSpec::NilpotentShift, d) => {
                let steps = grid_steps(t, space.step().unwrap())?;
                match d {
                    Direction::Forward => Propagator::Nilpotent { steps },
                    Direction::Adjoint => Propagator::NilpotentAdjoint { steps },
                }
            }
            (SemigroupSpec::SobolevShift, d) => {
                let steps = grid_steps(t, space.step().unwrap())?;
                match d {
                    Direction::Forward => Propagator::Sobolev { steps },
                    Direction::Adjoint => Propagator::SobolevAdjoint { steps },
                }
            }
            (SemigroupSpec::Heat { kappa }, _) => {
                Propagator::Diagonal((1..=space.dim()).map(|j| (-PI * PI * (j * j) as f64 * kappa * t).exp()).collect())
            }
        })
    }

    /// `S(t) f`.
    pub fn apply(&self, t: f64, f: &GridFunction) -> Result<GridFunction> {
        self.act(t, f, Direction::Forward)
    }

    /// `S(t)* f`.
    pub fn apply_adjoint(&self, t: f64, f: &GridFunction) -> Result<GridFunction> {
        self.act(t, f, Direction::Adjoint)
    }

    pub fn act(&self, t: f64, f: &GridFunction, dir: Direction) -> Result<GridFunction> {
        let p = self.propagator(&f.space(), t, dir)?;
        let mut c = f.coeffs().clone();
        p.apply(c.as_mut_slice());
        Ok(GridFunction::from_parts_unchecked(f.space(), c))
    }
}

impl Propagator {
    pub fn is_identity(&self) -> bool {
        match self {
            Propagator::Identity => true,
            Propagator::Nilpotent { steps }
            | Propagator::NilpotentAdjoint { steps }
            | Propagator::Sobolev { steps }
            | Propagator::SobolevAdjoint { steps } => *steps == 0,
            Propagator::Diagonal(d) => d.iter().all(|&v| v == 1.0),
        }
    }

    /// Applies the operator to a coefficient vector in place.
    pub fn apply(&self, c: &mut [f64]) {
        let j = c.len();
        match self {
            Propagator::Identity => {}
            Propagator::Nilpotent { steps } => {
                let m = *steps;
                for k in 0..j {
                    c[k] = if k + m < j { c[k + m] } else { 0.0 };
                }
            }
            Propagator::NilpotentAdjoint { steps } => {
                let m = *steps;
                for k in (0..j).rev() {
                    c[k] = if k >= m { c[k - m] } else { 0.0 };
                }
            }
            Propagator::Sobolev { steps } => {
                if *steps == 0 {
                    return;
                }
                let mut v = h1_node_values(c);
                let last = j - 1;
                for k in 0..j {
                    v[k] = v[(k + steps).min(last)];
                }
                c.copy_from_slice(&h1_coeffs_from_values(&v));
            }
            Propagator::SobolevAdjoint { steps } => {
                if *steps == 0 {
                    return;
                }
                // (S* g)(0) = g(0); its slope is g(0) on [0, t] and g'(x - t) beyond
                let m = *steps;
                let v = h1_node_values(c);
                let dx = 1.0 / (j - 1) as f64;
                let slope = |i: usize| (v[i] - v[i - 1]) / dx;
                let mut w = vec![0.0; j];
                w[0] = v[0];
                for i in 1..j {
                    let s = if i <= m { v[0] } else { slope(i - m) };
                    w[i] = w[i - 1] + dx * s;
                }
                c.copy_from_slice(&h1_coeffs_from_values(&w));
            }
            Propagator::Diagonal(d) => {
                for (x, f) in c.iter_mut().zip(d) {
                    *x *= f;
                }
            }
        }
    }

    pub fn apply_vector(&self, v: &mut DVector<f64>) {
        self.apply(v.as_mut_slice());
    }

    /// Applies the operator to every column of `m`.
    pub fn apply_columns(&self, m: &mut DMatrix<f64>) {
        if matches!(self, Propagator::Identity) {
            return;
        }
        for mut col in m.column_iter_mut() {
            self.apply(col.as_mut_slice());
        }
    }
}

/// `max_{t in grid} t^{-gamma} || f - S(t) f ||`, a finite-resolution proxy
/// for membership of `f` in the Favard class of order `gamma`.
pub fn favard_probe(s: &SemigroupSpec, gamma: f64, f: &GridFunction, t_grid: &[f64], dir: Direction) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Argument(format!("Favard exponent {gamma} outside (0, 1]")));
    }
    if t_grid.is_empty() {
        return Err(Error::Argument("empty time grid".into()));
    }
    let mut best: f64 = 0.0;
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(Error::Argument(format!("probe time {t} must be positive")));
        }
        let moved = s.act(t, f, dir)?;
        let d = f.sub(&moved)?.norm();
        best = best.max(d * t.powf(-gamma));
    }
    Ok(best)
}
