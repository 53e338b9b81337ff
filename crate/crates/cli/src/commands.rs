use std::path::PathBuf;

use mildvol::counterexample::{rv_clt, rv_lln, sarcv_clt_sharpness, RvCltConfig, RvLlnConfig, SharpnessConfig};
use mildvol::discrete::{
    heat_target, local_average_ingest, pointwise_vol_estimate, sigma_hat_discrete, sigma_hat_heat, DiscreteSample,
};
use mildvol::inference::{coverage_experiment, lln_experiment, EstimatorKind, Model};
use mildvol::io::{write_discrete, write_operator, write_path};
use mildvol::prelude::*;
use mildvol::regime::vol_regularity_index;
use serde::Serialize;

use crate::config::{DiscreteSpec, ExperimentConfig};
use crate::output::{opt, sha256_hex, RunDir, Stamp};
use crate::{Cli, Command, Which};

pub enum Status {
    Passed,
    Failed,
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Passed
    } else {
        Status::Failed
    }
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Simulate => "simulate",
        Command::Estimate => "estimate",
        Command::ValidateLln => "validate-lln",
        Command::ValidateClt => "validate-clt",
        Command::Counterexample { which: Which::RvLln, .. } => "counterexample-rv-lln",
        Command::Counterexample { which: Which::RvClt, .. } => "counterexample-rv-clt",
        Command::Counterexample { which: Which::SarcvCltSharpness, .. } => "counterexample-sarcv-clt-sharpness",
        Command::RegimeReport => "regime-report",
        Command::DiscreteDemo => "discrete-demo",
        Command::HeatDemo => "heat-demo",
    }
}

/// A loaded configuration with its hash and run directory.
struct Run {
    cfg: ExperimentConfig,
    stamp: Stamp,
    dir: RunDir,
}

fn out_dir(cli: &Cli, configured: Option<&str>, command: &str) -> PathBuf {
    cli.out.clone().or_else(|| configured.map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("runs").join(command))
}

fn load(cli: &Cli) -> Result<Run> {
    let command = name(&cli.command);
    let path = cli.config.as_ref().ok_or_else(|| Error::Config(format!("{command} needs --config")))?;
    let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let dir = RunDir::create(&out_dir(cli, cfg.output.as_deref(), command))?;
    dir.write_text("config.toml", &cfg.to_toml()?)?;
    let stamp = Stamp {
        command: command.into(),
        version: crate::output::VERSION,
        config_hash: sha256_hex(&bytes),
        seed: cfg.seed,
    };
    Ok(Run { cfg, stamp, dir })
}

pub fn run(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Counterexample { which, hurst, replications, n_grid } => {
            counterexample(cli, *which, *hurst, *replications, n_grid.clone())
        }
        cmd => {
            let run = load(cli)?;
            let st = match cmd {
                Command::Simulate => simulate(&run),
                Command::Estimate => estimate(&run),
                Command::ValidateLln => validate_lln(&run),
                Command::ValidateClt => validate_clt(&run),
                Command::RegimeReport => regime_report(&run),
                Command::DiscreteDemo => discrete_demo(&run),
                Command::HeatDemo => heat_demo(&run),
                Command::Counterexample { .. } => unreachable!(),
            }?;
            println!("{}: wrote {}", run.stamp.command, run.dir.path("").display());
            Ok(st)
        }
    }
}

fn base_model(run: &Run) -> Result<Model> {
    run.cfg.model(run.cfg.sim().n)
}

fn simulate_model(m: &Model) -> Result<PathSample> {
    simulate_mild(&m.vol, &m.semigroup, &m.sim)
}

#[derive(Serialize)]
struct SimulateResult {
    n: usize,
    dt: f64,
    space: SpaceSpec,
    semigroup: SemigroupSpec,
    terminal_norm: f64,
}

fn simulate(run: &Run) -> Result<Status> {
    let model = base_model(run)?;
    let path = simulate_model(&model)?;
    write_path(&run.dir.path("path.csv"), &path)?;
    let res = SimulateResult {
        n: path.n(),
        dt: path.dt(),
        space: path.space(),
        semigroup: path.semigroup(),
        terminal_norm: path.observation(path.n()).norm(),
    };
    run.dir.write_report(&run.stamp, None, &res)?;
    Ok(Status::Passed)
}

#[derive(Serialize)]
struct FunctionalEstimate {
    index: usize,
    truth: f64,
    estimate: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    covered: Option<bool>,
}

#[derive(Serialize)]
struct EstimateResult {
    estimator: EstimatorKind,
    n: usize,
    horizon: f64,
    hs_error: f64,
    truth_hs_norm: f64,
    functionals: Vec<FunctionalEstimate>,
}

fn estimate(run: &Run) -> Result<Status> {
    let model = base_model(run)?;
    let path = simulate_model(&model)?;
    let t = model.horizon();
    let est = match run.cfg.estimator {
        EstimatorKind::Sarcv => sarcv(&path, &model.semigroup, t)?,
        EstimatorKind::Rv => rv(&path, t)?,
    };
    let truth = integrated_volatility(&model.vol, t, Weighting::None)?;
    write_operator(run.dir.create_file("estimate.csv")?, &est)?;
    write_operator(run.dir.create_file("truth.csv")?, &truth)?;
    let mut functionals = Vec::new();
    for (index, b) in model.functionals.iter().enumerate() {
        let tv = b.pair(&truth)?;
        let f = match run.cfg.estimator {
            EstimatorKind::Sarcv => {
                let ci = ci_functional(&path, &model.semigroup, b, t, 0.95)?;
                let live = !ci.degenerate;
                FunctionalEstimate {
                    index,
                    truth: tv,
                    estimate: ci.estimate,
                    lower: live.then_some(ci.lower),
                    upper: live.then_some(ci.upper),
                    covered: live.then(|| ci.contains(tv)),
                }
            }
            EstimatorKind::Rv => FunctionalEstimate {
                index,
                truth: tv,
                estimate: b.pair(&est)?,
                lower: None,
                upper: None,
                covered: None,
            },
        };
        functionals.push(f);
    }
    let rows: Vec<Vec<String>> = functionals
        .iter()
        .map(|f| {
            vec![
                f.index.to_string(),
                f.truth.to_string(),
                f.estimate.to_string(),
                opt(f.lower),
                opt(f.upper),
                f.covered.map(|c| c.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    run.dir.write_table("functionals.csv", &["functional", "truth", "estimate", "lower", "upper", "covered"], &rows)?;
    let res = EstimateResult {
        estimator: run.cfg.estimator,
        n: path.n(),
        horizon: t,
        hs_error: est.hs_distance(&truth)?,
        truth_hs_norm: truth.hs_norm(),
        functionals,
    };
    run.dir.write_report(&run.stamp, None, &res)?;
    Ok(Status::Passed)
}

fn campaign(run: &Run) -> Result<&crate::config::CampaignSpec> {
    run.cfg
        .campaign
        .as_ref()
        .map(|c| c.get_ref())
        .ok_or_else(|| Error::Config(format!("{} needs a [campaign] section", run.stamp.command)))
}

fn validate_lln(run: &Run) -> Result<Status> {
    let c = campaign(run)?;
    let factory = |n: usize| run.cfg.model(n);
    let report = lln_experiment(&factory, &c.n_grid, c.replications, run.cfg.seed, run.cfg.estimator)?;
    let rows: Vec<Vec<String>> =
        report.rows.iter().map(|r| vec![r.n.to_string(), opt(r.error_mean), opt(r.error_se)]).collect();
    run.dir.write_table("errors.csv", &["n", "error_mean", "error_se"], &rows)?;
    let raw: Vec<Vec<String>> =
        report.raw_errors.iter().map(|(n, r, e)| vec![n.to_string(), r.to_string(), e.to_string()]).collect();
    run.dir.write_table("replications.csv", &["n", "replicate", "error"], &raw)?;
    let decreasing = report.strictly_decreasing();
    let passed = !c.require_decreasing || decreasing;
    if !decreasing {
        println!("DIVERGENT: mean errors are not strictly decreasing in n");
    }
    run.dir.write_report(&run.stamp, Some(passed), &report)?;
    Ok(status(passed))
}

fn validate_clt(run: &Run) -> Result<Status> {
    let c = campaign(run)?;
    let factory = |n: usize| run.cfg.model(n);
    let report = coverage_experiment(&factory, &c.n_grid, c.replications, c.level, run.cfg.seed)?;
    let mut rows = Vec::new();
    for r in &report.rows {
        for f in &r.functionals {
            let norm = f.normality.as_ref();
            rows.push(vec![
                r.n.to_string(),
                f.index.to_string(),
                f.truth.to_string(),
                opt(f.coverage),
                f.degenerate_fraction.to_string(),
                opt(f.stat_variance),
                opt(norm.map(|x| x.ks_distance)),
                opt(norm.map(|x| x.mean)),
                opt(norm.map(|x| x.skewness)),
                opt(norm.map(|x| x.excess_kurtosis)),
            ]);
        }
    }
    run.dir.write_table(
        "coverage.csv",
        &[
            "n",
            "functional",
            "truth",
            "coverage",
            "degenerate_fraction",
            "stat_variance",
            "ks_distance",
            "stat_mean",
            "skewness",
            "excess_kurtosis",
        ],
        &rows,
    )?;
    let raw: Vec<Vec<String>> = report
        .raw
        .iter()
        .map(|s| {
            vec![
                s.n.to_string(),
                s.replicate.to_string(),
                s.functional.to_string(),
                s.estimate.to_string(),
                s.lower.to_string(),
                s.upper.to_string(),
                s.value.to_string(),
                s.degenerate.to_string(),
                s.covered.to_string(),
            ]
        })
        .collect();
    run.dir.write_table(
        "replications.csv",
        &["n", "replicate", "functional", "estimate", "lower", "upper", "statistic", "degenerate", "covered"],
        &raw,
    )?;
    let passed = match c.coverage_band {
        Some([lo, hi]) => {
            report.rows.iter().flat_map(|r| &r.functionals).all(|f| f.coverage.is_some_and(|v| (lo..=hi).contains(&v)))
        }
        None => true,
    };
    run.dir.write_report(&run.stamp, Some(passed), &report)?;
    Ok(status(passed))
}

fn counterexample(
    cli: &Cli,
    which: Which,
    hurst: Option<f64>,
    replications: Option<usize>,
    n_grid: Option<Vec<usize>>,
) -> Result<Status> {
    let command = name(&cli.command);
    let dir = RunDir::create(&out_dir(cli, None, command))?;
    macro_rules! overrides {
        ($cfg:expr) => {{
            let mut c = $cfg;
            if let Some(r) = replications {
                c.replications = r;
            }
            if let Some(g) = n_grid.clone() {
                c.n_grid = g;
            }
            if let Some(s) = cli.seed {
                c.seed_base = s;
            }
            c
        }};
    }
    let stamp = |params: &str, seed: u64| Stamp {
        command: command.into(),
        version: crate::output::VERSION,
        config_hash: sha256_hex(params.as_bytes()),
        seed,
    };
    let header_lln = [
        "n",
        "rv_error_mean",
        "rv_error_se",
        "sarcv_error_mean",
        "sarcv_error_se",
        "remainder_sq_mean",
        "lower_bound_scaling",
    ];
    match which {
        Which::RvLln => {
            let mut cfg = overrides!(RvLlnConfig::default());
            if let Some(h) = hurst {
                cfg.hurst = h;
            }
            let st = stamp(&serde_json::to_string(&cfg)?, cfg.seed_base);
            let rep = rv_lln(&cfg)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.rv_error_mean.to_string(),
                        r.rv_error_se.to_string(),
                        r.sarcv_error_mean.to_string(),
                        r.sarcv_error_se.to_string(),
                        r.remainder_sq_mean.to_string(),
                        r.lower_bound_scaling.to_string(),
                    ]
                })
                .collect();
            dir.write_table("errors.csv", &header_lln, &rows)?;
            println!(
                "rv-lln: RV error {:.4} -> {:.4}{}; SARCV error decrease {:.1}%",
                rep.rows[0].rv_error_mean,
                rep.rows.last().unwrap().rv_error_mean,
                if rep.divergent { " DIVERGENT" } else { "" },
                100.0 * rep.sarcv_decrease
            );
            dir.write_report(&st, None, &rep)?;
        }
        Which::RvClt => {
            if hurst.is_some() {
                return Err(Error::Config("rv-clt uses an indicator path; --hurst does not apply".into()));
            }
            let cfg = overrides!(RvCltConfig::default());
            let st = stamp(&serde_json::to_string(&cfg)?, cfg.seed_base);
            let rep = rv_clt(&cfg)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.rv_bias_mean.to_string(),
                        r.rv_bias_se.to_string(),
                        r.sarcv_bias_mean.to_string(),
                        r.sarcv_bias_se.to_string(),
                        r.predicted_rv_bias.to_string(),
                    ]
                })
                .collect();
            dir.write_table(
                "bias.csv",
                &["n", "rv_bias_mean", "rv_bias_se", "sarcv_bias_mean", "sarcv_bias_se", "predicted_rv_bias"],
                &rows,
            )?;
            println!("rv-clt: RV sqrt(n)-bias growth x{:.3}; SARCV centered: {}", rep.rv_growth, rep.sarcv_centered);
            dir.write_report(&st, None, &rep)?;
        }
        Which::SarcvCltSharpness => {
            let mut cfg = overrides!(SharpnessConfig::default());
            if let Some(h) = hurst {
                cfg.hurst = h;
            }
            let st = stamp(&serde_json::to_string(&cfg)?, cfg.seed_base);
            let rep = sarcv_clt_sharpness(&cfg)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| vec![r.n.to_string(), r.scaled_error.to_string(), r.scaled_bias.to_string()])
                .collect();
            dir.write_table("scaled_errors.csv", &["n", "scaled_error", "scaled_bias"], &rows)?;
            println!(
                "sarcv-clt-sharpness: scaled error ratio {:.3}{}",
                rep.ratio,
                if rep.divergent { " DIVERGENT" } else { "" }
            );
            dir.write_report(&st, None, &rep)?;
        }
    }
    Ok(Status::Passed)
}

fn default_t_grid(space: SpaceSpec) -> Vec<f64> {
    let base = space.step().unwrap_or(1.0 / 512.0);
    [1.0, 2.0, 4.0, 8.0].iter().map(|k| k * base).collect()
}

fn regime_report(run: &Run) -> Result<Status> {
    let model = base_model(run)?;
    let t_grid = match &run.cfg.regime {
        Some(r) => r.get_ref().t_grid.clone(),
        None => default_t_grid(model.vol.space()),
    };
    let rep = vol_regularity_index(&model.semigroup, &model.vol, &t_grid, model.horizon())?;
    let rows: Vec<Vec<String>> =
        rep.t_grid.iter().zip(&rep.p_values).map(|(t, p)| vec![t.to_string(), p.to_string()]).collect();
    run.dir.write_table("regularity.csv", &["t", "p"], &rows)?;
    println!("regime {}: {}", rep.case.label(), rep.statement);
    run.dir.write_report(&run.stamp, None, &rep)?;
    Ok(Status::Passed)
}

fn discrete_spec(run: &Run) -> DiscreteSpec {
    run.cfg.discrete.as_ref().map(|d| d.get_ref().clone()).unwrap_or(DiscreteSpec {
        case: mildvol::discrete::CaseTag::B,
        points: Vec::new(),
        bins: None,
    })
}

#[derive(Serialize)]
struct PointRow {
    x: f64,
    total: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    quarticity: f64,
}

#[derive(Serialize)]
struct DiscreteResult {
    case: mildvol::discrete::CaseTag,
    n: usize,
    m: usize,
    hs_error: f64,
    truth_hs_norm: f64,
    points: Vec<PointRow>,
}

fn discrete_demo(run: &Run) -> Result<Status> {
    let spec = discrete_spec(run);
    if !matches!(run.cfg.space(), SpaceSpec::H1 { .. }) {
        return Err(Error::Config("discrete-demo samples an H1 path; set [space] kind = \"h1\"".into()));
    }
    let model = base_model(run)?;
    let path = simulate_model(&model)?;
    let data = DiscreteSample::from_h1_path(&path, spec.case)?;
    write_discrete(run.dir.create_file("samples.csv")?, &data)?;
    let est = sigma_hat_discrete(&data, spec.case)?;
    let truth = integrated_volatility(&model.vol, model.horizon(), Weighting::None)?;
    write_operator(run.dir.create_file("estimate.csv")?, &est)?;
    let mut points = Vec::new();
    let mut cumulative = Vec::new();
    for &x in &spec.points {
        let p = pointwise_vol_estimate(&data, x, spec.case)?;
        let ci = p.interval(0.95)?;
        let live = !ci.degenerate;
        points.push(PointRow {
            x,
            total: p.total(),
            lower: live.then_some(ci.lower),
            upper: live.then_some(ci.upper),
            quarticity: p.quarticity,
        });
        cumulative.push(p.cumulative);
    }
    if !points.is_empty() {
        let mut header = vec!["i".to_string()];
        header.extend(spec.points.iter().map(|x| format!("x={x}")));
        let rows: Vec<Vec<String>> = (0..=data.n())
            .map(|i| std::iter::once(i.to_string()).chain(cumulative.iter().map(|c| c[i].to_string())).collect())
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        run.dir.write_table("pointwise.csv", &header, &rows)?;
    }
    let res = DiscreteResult {
        case: spec.case,
        n: data.n(),
        m: data.m(),
        hs_error: est.hs_distance(&truth)?,
        truth_hs_norm: truth.hs_norm(),
        points,
    };
    run.dir.write_report(&run.stamp, None, &res)?;
    Ok(Status::Passed)
}

#[derive(Serialize)]
struct HeatResult {
    n: usize,
    bins: usize,
    horizon: f64,
    hs_error: f64,
    target_hs_norm: f64,
}

fn heat_demo(run: &Run) -> Result<Status> {
    if !matches!(run.cfg.space(), SpaceSpec::Spectral { .. }) {
        return Err(Error::Config("heat-demo needs [space] kind = \"spectral\"".into()));
    }
    let bins = discrete_spec(run).bins.unwrap_or(run.cfg.sim().n);
    let model = base_model(run)?;
    let t = model.horizon();
    let path = simulate_model(&model)?;
    let data = local_average_ingest(&path, bins)?;
    write_discrete(run.dir.create_file("samples.csv")?, &data)?;
    let est = sigma_hat_heat(&data, t)?;
    let target = heat_target(&model.vol, t, bins).map_err(|e| Error::Config(e.to_string()))?;
    write_operator(run.dir.create_file("estimate.csv")?, &est)?;
    write_operator(run.dir.create_file("target.csv")?, &target)?;
    let res = HeatResult {
        n: data.n(),
        bins,
        horizon: t,
        hs_error: est.hs_distance(&target)?,
        target_hs_norm: target.hs_norm(),
    };
    run.dir.write_report(&run.stamp, None, &res)?;
    Ok(Status::Passed)
}
