//! Seeded Monte Carlo campaigns over a grid of sample sizes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{adjusted_increments, raw_increments, test_pairings};
use crate::inference::clt::{CltStat, Interval};
use crate::inference::stats::{
    convergence_rate_fit, mean_and_se, normality_diagnostics, sample_variance, NormalityReport, RateFit,
};
use crate::operator::FiniteRankOperator;
use crate::semigroup::SemigroupSpec;
use crate::simulate::{simulate_mild, SimConfig};
use crate::volatility::{integrated_volatility, VolModel, Weighting};

/// One fully specified model at a given sample size.
#[derive(Debug, Clone)]
pub struct Model {
    pub semigroup: SemigroupSpec,
    pub vol: VolModel,
    /// Simulation settings; the seed is replaced per replication.
    pub sim: SimConfig,
    /// Test operators for functional statistics.
    pub functionals: Vec<FiniteRankOperator>,
}

impl Model {
    /// Estimation horizon.
    pub fn horizon(&self) -> f64 {
        self.sim.horizon
    }
}

/// Builds the model for sample size `n`. Spatial resolution may depend on
/// `n`, as it must for shift semigroups.
pub trait ModelFactory: Sync {
    fn build(&self, n: usize) -> Result<Model>;
}

impl<F> ModelFactory for F
where
    F: Fn(usize) -> Result<Model> + Sync,
{
    fn build(&self, n: usize) -> Result<Model> {
        self(n)
    }
}

/// Seed of replication `rep`.
pub fn replication_seed(seed_base: u64, rep: usize) -> u64 {
    seed_base.wrapping_add(rep as u64)
}

/// Runs `f(rep, seed)` for `rep = 0..reps` on the current rayon pool and
/// returns the results in replication order.
pub fn replicate<T, F>(reps: usize, seed_base: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync + Send,
{
    (0..reps).into_par_iter().map(|r| f(r, replication_seed(seed_base, r))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Sarcv,
    Rv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSummary {
    pub index: usize,
    /// `<int Sigma, B>`.
    pub truth: f64,
    /// Fraction of non-degenerate intervals covering the truth.
    pub coverage: Option<f64>,
    pub degenerate_fraction: f64,
    pub stat_variance: Option<f64>,
    pub normality: Option<NormalityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub n: usize,
    pub error_mean: Option<f64>,
    pub error_se: Option<f64>,
    pub functionals: Vec<FunctionalSummary>,
}

/// Per-replication output of a coverage campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawStat {
    pub n: usize,
    pub replicate: usize,
    pub functional: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub numerator: f64,
    pub denom_sq: f64,
    pub degenerate: bool,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub label: String,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed_base: u64,
    pub level: Option<f64>,
    pub rows: Vec<McRow>,
    pub rate: Option<RateFit>,
    #[serde(skip)]
    pub raw: Vec<RawStat>,
    #[serde(skip)]
    pub raw_errors: Vec<(usize, usize, f64)>,
}

impl McReport {
    pub fn error_means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error_mean.unwrap_or(f64::NAN)).collect()
    }

    /// Whether the mean errors strictly decrease along the grid.
    pub fn strictly_decreasing(&self) -> bool {
        self.error_means().windows(2).all(|w| w[1] < w[0])
    }
}

fn check_grid(n_grid: &[usize], reps: usize) -> Result<()> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return Err(Error::Config("n grid must be nonempty, positive and strictly increasing".into()));
    }
    if reps == 0 {
        return Err(Error::Config("at least one replication is needed".into()));
    }
    Ok(())
}

/// Monte Carlo mean of `||estimator_T - int_0^T Sigma_s ds||_HS` per `n`.
pub fn lln_experiment(
    factory: &dyn ModelFactory,
    n_grid: &[usize],
    reps: usize,
    seed_base: u64,
    kind: EstimatorKind,
) -> Result<McReport> {
    check_grid(n_grid, reps)?;
    let mut rows = Vec::new();
    let mut raw_errors = Vec::new();
    for &n in n_grid {
        let model = factory.build(n)?;
        let t = model.horizon();
        let target = integrated_volatility(&model.vol, t, Weighting::None)?;
        let errors = replicate(reps, seed_base, |_, seed| {
            let path = simulate_mild(&model.vol, &model.semigroup, &model.sim.clone().with_seed(seed))?;
            let inc = match kind {
                EstimatorKind::Sarcv => adjusted_increments(&path, &model.semigroup)?,
                EstimatorKind::Rv => raw_increments(&path),
            };
            inc.sum_of_squares(t)?.hs_distance(&target)
        })?;
        raw_errors.extend(errors.iter().enumerate().map(|(r, e)| (n, r, *e)));
        let (mean, se) = mean_and_se(&errors);
        rows.push(McRow { n, error_mean: Some(mean), error_se: Some(se), functionals: Vec::new() });
    }
    let rate = if n_grid.len() >= 3 {
        let means: Vec<f64> = rows.iter().map(|r| r.error_mean.unwrap()).collect();
        convergence_rate_fit(n_grid, &means).ok()
    } else {
        None
    };
    let label = match kind {
        EstimatorKind::Sarcv => "lln-sarcv",
        EstimatorKind::Rv => "lln-rv",
    };
    Ok(McReport {
        label: label.into(),
        n_grid: n_grid.to_vec(),
        replications: reps,
        seed_base,
        level: None,
        rows,
        rate,
        raw: Vec::new(),
        raw_errors,
    })
}

/// Coverage of the feasible confidence intervals for `<int_0^T Sigma, B>`
/// for every test operator of the model, together with the distribution of
/// the standardized statistics.
pub fn coverage_experiment(
    factory: &dyn ModelFactory,
    n_grid: &[usize],
    reps: usize,
    level: f64,
    seed_base: u64,
) -> Result<McReport> {
    check_grid(n_grid, reps)?;
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Config(format!("confidence level {level} outside [0, 1)")));
    }
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for &n in n_grid {
        let model = factory.build(n)?;
        if model.functionals.is_empty() {
            return Err(Error::Config("coverage experiments need at least one functional".into()));
        }
        let t = model.horizon();
        let target = integrated_volatility(&model.vol, t, Weighting::None)?;
        let truths: Vec<f64> = model.functionals.iter().map(|b| b.pair(&target)).collect::<Result<_>>()?;
        let per_rep = replicate(reps, seed_base, |rep, seed| {
            let path = simulate_mild(&model.vol, &model.semigroup, &model.sim.clone().with_seed(seed))?;
            let inc = adjusted_increments(&path, &model.semigroup)?;
            let mut out = Vec::with_capacity(model.functionals.len());
            for (f, b) in model.functionals.iter().enumerate() {
                let c = test_pairings(&inc, b, t)?;
                let st = CltStat::from_pairings(&c, path.dt(), truths[f])?;
                let ci = Interval::from_pairings(&c, path.dt(), level)?;
                out.push(RawStat {
                    n,
                    replicate: rep,
                    functional: f,
                    estimate: ci.estimate,
                    lower: ci.lower,
                    upper: ci.upper,
                    value: st.value,
                    numerator: st.numerator,
                    denom_sq: st.denom_sq,
                    degenerate: st.degenerate,
                    covered: ci.contains(truths[f]),
                });
            }
            Ok(out)
        })?;
        let flat: Vec<RawStat> = per_rep.into_iter().flatten().collect();
        let mut summaries = Vec::new();
        for (f, truth) in truths.iter().enumerate() {
            let mine: Vec<&RawStat> = flat.iter().filter(|r| r.functional == f).collect();
            let live: Vec<&RawStat> = mine.iter().copied().filter(|r| !r.degenerate).collect();
            let values: Vec<f64> = live.iter().map(|r| r.value).collect();
            let coverage = if live.is_empty() {
                None
            } else {
                Some(live.iter().filter(|r| r.covered).count() as f64 / live.len() as f64)
            };
            summaries.push(FunctionalSummary {
                index: f,
                truth: *truth,
                coverage,
                degenerate_fraction: (mine.len() - live.len()) as f64 / mine.len() as f64,
                stat_variance: (values.len() >= 2).then(|| sample_variance(&values)),
                normality: normality_diagnostics(&values).ok(),
            });
        }
        raw.extend(flat);
        rows.push(McRow { n, error_mean: None, error_se: None, functionals: summaries });
    }
    Ok(McReport {
        label: "clt-coverage".into(),
        n_grid: n_grid.to_vec(),
        replications: reps,
        seed_base,
        level: Some(level),
        rows,
        rate: None,
        raw,
        raw_errors: Vec::new(),
    })
}
