//! Experiment configuration files.
//!
//! A config is a TOML document. Unknown keys are rejected, and every error
//! message carries the line of the offending entry.

use std::path::Path;

use mildvol::discrete::CaseTag;
use mildvol::inference::{EstimatorKind, Model};
use mildvol::operator::FiniteRankOperator;
use mildvol::semigroup::SemigroupSpec;
use mildvol::simulate::SimConfig;
use mildvol::space::{GridFunction, SpaceSpec};
use mildvol::volatility::{KernelShape, Modulation, VolModel};
use mildvol::{Error, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use toml::Spanned;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub space: Spanned<SpaceSpec>,
    pub semigroup: Spanned<SemigroupSpec>,
    pub volatility: Spanned<VolSpec>,
    pub simulation: Spanned<SimSpec>,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    /// Run directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub functionals: Vec<Spanned<FunctionalSpec>>,
    #[serde(default)]
    pub campaign: Option<Spanned<CampaignSpec>>,
    #[serde(default)]
    pub discrete: Option<Spanned<DiscreteSpec>>,
    #[serde(default)]
    pub regime: Option<Spanned<RegimeSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VolSpec {
    /// Constant integral kernel with noise on `noise_cells` cells.
    Kernel {
        shape: KernelShape,
        noise_cells: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulation: Option<Modulation>,
    },
    /// `sigma_s = e (x) S(s) 1_{[lo, hi]}` with the configured semigroup.
    RankOneIndicator {
        lo: f64,
        hi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulation: Option<Modulation>,
    },
    /// `q_j^{1/2} = scale j^{-(r + 1/2 + eps)}` on the sine basis.
    HeatDiagonal {
        scale: f64,
        r: f64,
        #[serde(default)]
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulation: Option<Modulation>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub n: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "one_usize")]
    pub substeps: usize,
    /// `Y_0 = 1_{[lo, hi]}`; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<[f64; 2]>,
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Sarcv
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// Test operator `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalSpec {
    /// `1_{[lo, hi]} (x) 1_{[lo, hi]}`.
    IntervalAverage { lo: f64, hi: f64 },
    /// `delta_x (x) delta_x` on `H1`.
    Evaluation { x: f64 },
    /// `(delta_x - delta_y)^{(x)2}` on `H1`.
    Spread { x: f64, y: f64 },
    /// `e_j (x) e_j` on the sine basis.
    Mode { j: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSpec {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Refine the spatial grid with `n` so shift semigroups stay
    /// grid-commensurate.
    #[serde(default = "yes")]
    pub tie_grid: bool,
    /// Exit with status 3 unless the mean errors strictly decrease.
    #[serde(default = "yes")]
    pub require_decreasing: bool,
    /// Accepted coverage band of the confidence intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_band: Option<[f64; 2]>,
}

fn default_level() -> f64 {
    0.95
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSpec {
    #[serde(default = "default_case")]
    pub case: CaseTag,
    /// Nodes for pointwise estimates.
    #[serde(default)]
    pub points: Vec<f64>,
    /// Spatial bins of the heat pipeline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

fn default_case() -> CaseTag {
    CaseTag::B
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub t_grid: Vec<f64>,
}

/// Line (1-based) of a byte offset.
pub fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn at<T>(src: &str, s: &Spanned<T>, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {}: {msg}", line_of(src, s.span().start)))
}

impl ExperimentConfig {
    pub fn parse(src: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string().trim_end().into()))?;
        cfg.validate(src)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&src).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self, src: &str) -> Result<()> {
        let space = *self.space.get_ref();
        space.validate().map_err(|e| at(src, &self.space, e))?;
        let sg = *self.semigroup.get_ref();
        sg.validate().map_err(|e| at(src, &self.semigroup, e))?;
        sg.check_space(&space).map_err(|e| at(src, &self.semigroup, e))?;
        let sim = self.simulation.get_ref();
        if sim.n == 0 || sim.substeps == 0 || !(sim.horizon > 0.0) {
            return Err(at(src, &self.simulation, "n and substeps must be positive and the horizon > 0"));
        }
        let (a, b) = space.domain();
        let inside = |x: f64| (a..=b).contains(&x);
        for f in &self.functionals {
            let ok = match *f.get_ref() {
                FunctionalSpec::IntervalAverage { lo, hi } => {
                    lo <= hi && inside(lo) && inside(hi) && !matches!(space, SpaceSpec::H1 { .. })
                }
                FunctionalSpec::Evaluation { x } => inside(x) && matches!(space, SpaceSpec::H1 { .. }),
                FunctionalSpec::Spread { x, y } => inside(x) && inside(y) && matches!(space, SpaceSpec::H1 { .. }),
                FunctionalSpec::Mode { j } => matches!(space, SpaceSpec::Spectral { modes } if j >= 1 && j <= modes),
            };
            if !ok {
                return Err(at(
                    src,
                    f,
                    format!("functional lies outside the domain [{a}, {b}] or does not fit the space"),
                ));
            }
        }
        if let Some(c) = &self.campaign {
            let g = &c.get_ref().n_grid;
            if g.is_empty() || g[0] == 0 || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(at(src, c, "n_grid must be nonempty, positive and strictly increasing"));
            }
            if c.get_ref().replications == 0 {
                return Err(at(src, c, "replications must be positive"));
            }
            if !(0.0..1.0).contains(&c.get_ref().level) {
                return Err(at(src, c, "level must lie in [0, 1)"));
            }
        }
        if let Some(r) = &self.regime {
            if r.get_ref().t_grid.len() < 2 || r.get_ref().t_grid.iter().any(|t| !(*t > 0.0)) {
                return Err(at(src, r, "t_grid needs at least two positive times"));
            }
        }
        if let Some(d) = &self.discrete {
            if d.get_ref().points.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(at(src, d, "points must lie in [0, 1]"));
            }
        }
        // build once so that model errors surface as config errors
        self.model(sim.n).map_err(|e| at(src, &self.volatility, e))?;
        Ok(())
    }

    pub fn space(&self) -> SpaceSpec {
        *self.space.get_ref()
    }

    pub fn semigroup(&self) -> SemigroupSpec {
        *self.semigroup.get_ref()
    }

    pub fn sim(&self) -> &SimSpec {
        self.simulation.get_ref()
    }

    /// Space at sample size `n`, refined so that the sampling step is a
    /// multiple of the grid step.
    pub fn space_for(&self, n: usize) -> Result<SpaceSpec> {
        let tie = self.campaign.as_ref().map(|c| c.get_ref().tie_grid).unwrap_or(false);
        let base = self.space();
        if !tie || n == self.sim().n {
            return Ok(base);
        }
        let scale = n as f64 / self.sim().n as f64;
        match base {
            SpaceSpec::L2 { a, b, points } => SpaceSpec::l2(a, b, rescale(points as f64, scale)?),
            SpaceSpec::H1 { nodes } => SpaceSpec::h1(rescale((nodes - 1) as f64, scale)? + 1),
            spectral => Ok(spectral),
        }
    }

    /// Model at sample size `n`.
    pub fn model(&self, n: usize) -> Result<Model> {
        let space = self.space_for(n)?;
        let sg = self.semigroup();
        let (vol, modulation) = match self.volatility.get_ref() {
            VolSpec::Kernel { shape, noise_cells, modulation } => {
                (VolModel::constant_kernel(space, *shape, *noise_cells)?, modulation)
            }
            VolSpec::RankOneIndicator { lo, hi, modulation } => {
                let x = GridFunction::indicator(space, *lo, *hi)?;
                (VolModel::rank_one_frozen(x, sg, DVector::from_element(1, 1.0))?, modulation)
            }
            VolSpec::HeatDiagonal { scale, r, eps, modulation } => {
                (VolModel::heat_diagonal(space, *scale, *r, *eps)?, modulation)
            }
        };
        let vol = match modulation {
            Some(m) => vol.time_modulated(*m),
            None => vol,
        };
        let functionals =
            self.functionals.iter().map(|f| functional(space, f.get_ref())).collect::<Result<Vec<_>>>()?;
        let sim = self.sim();
        let y0 = match sim.initial {
            Some([lo, hi]) => GridFunction::indicator(space, lo, hi)?,
            None => GridFunction::zeros(space),
        };
        Ok(Model {
            semigroup: sg,
            vol,
            sim: SimConfig::new(n, sim.horizon, self.seed, y0).with_substeps(sim.substeps),
            functionals,
        })
    }
}

fn rescale(cells: f64, scale: f64) -> Result<usize> {
    let v = cells * scale;
    if (v - v.round()).abs() > 1e-9 || v < 1.0 {
        return Err(Error::Config(format!("grid of {cells} cells cannot be scaled by {scale}")));
    }
    Ok(v.round() as usize)
}

fn functional(space: SpaceSpec, f: &FunctionalSpec) -> Result<FiniteRankOperator> {
    let h = match *f {
        FunctionalSpec::IntervalAverage { lo, hi } => GridFunction::indicator(space, lo, hi)?,
        FunctionalSpec::Evaluation { x } => GridFunction::evaluation(space, x)?,
        FunctionalSpec::Spread { x, y } => {
            GridFunction::evaluation(space, x)?.sub(&GridFunction::evaluation(space, y)?)?
        }
        FunctionalSpec::Mode { j } => GridFunction::basis(space, j)?,
    };
    Ok(FiniteRankOperator::tensor_square(&h))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 3

[space]
kind = "l2"
a = 0.0
b = 1.0
points = 32

[semigroup]
kind = "nilpotent-shift"

[volatility]
kind = "kernel"
noise_cells = 8
shape = { kind = "gaussian", scale = 1.0, length = 0.15 }

[simulation]
n = 32

[[functionals]]
kind = "interval-average"
lo = 0.0
hi = 0.5

[campaign]
n_grid = [32, 64]
replications = 4
"#;

    #[test]
    fn parses_and_roundtrips() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.space_for(64).unwrap().dim(), 64);
        let again = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let src = SAMPLE.replace("n = 32\n", "n = 32\nsteps = 4\n");
        let line = src.lines().position(|l| l.starts_with("steps")).unwrap() + 1;
        let msg = ExperimentConfig::parse(&src).unwrap_err().to_string();
        assert!(msg.contains("steps") && msg.contains(&format!("line {line},")), "{msg}");
    }

    #[test]
    fn out_of_domain_functionals_point_at_their_entry() {
        let src = SAMPLE.replace("hi = 0.5", "hi = 1.5");
        let msg = ExperimentConfig::parse(&src).unwrap_err().to_string();
        let want = SAMPLE.lines().position(|l| l.starts_with("[[functionals]]")).unwrap() + 1;
        assert!(msg.contains(&format!("line {want}")) || msg.contains(&format!("line {}", want + 1)), "{msg}");
    }
}
