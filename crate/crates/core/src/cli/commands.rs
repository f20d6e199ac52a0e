use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::output::{
    ensure_dir, json_num, json_vec, open_input, read_json, write_csv, write_json, write_with, Manifest,
};
use super::{BoundArgs, CliError, CliResult, DiagnoseArgs, Example1Args, HammersteinArgs, IdentifyArgs, OutputFormat};
use crate::experiments::{run_campaign_with_threads, CampaignResult, Example1Config};
use crate::hammerstein::basis::{gram_rank_ratio, RANK_TOL};
use crate::hammerstein::bound::bound_terms;
use crate::hammerstein::pipeline::{run_pipeline, SimulationConfig};
use crate::hammerstein::{n0_optimal, optimal_m, BoundInputs, HammersteinModel, ModelSpec};
use crate::identify::{SparseIdentifier, StepRecord};
use crate::io::{encode_support, read_samples, write_stats, write_support_history, write_trajectory, SupportRow, TrajectoryLine};
use crate::numeric::format_number;
use crate::random::replicate_seed;
use crate::rls::{RegressionSample, RlsState};
use crate::sparsifier::{schedule_validity_trace, track_support, ThresholdSchedule};

/// Caps the number of worker threads used for replicate fan-out.
pub const THREADS_ENV: &str = "SPARSE_SYSID_THREADS";

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::Input(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn example1(args: &Example1Args) -> CliResult<()> {
    let mut config = match &args.config {
        Some(path) => read_json::<Example1Config>(path)?,
        None => Example1Config::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(k) = args.replicates {
        config.replicates = k;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    config.validate()?;
    let result = run_campaign_with_threads(&config, threads_from_env()?)?;

    let out = &args.out;
    ensure_dir(out)?;
    write_json(out, "config.json", &config)?;
    for rep in &result.replicates {
        let dir = out.join(format!("replicate_{}", rep.replicate));
        ensure_dir(&dir)?;
        let lines: Vec<TrajectoryLine> = rep
            .trajectory
            .iter()
            .map(|t| TrajectoryLine {
                n: t.n,
                theta: t.theta.clone(),
                beta: t.beta.clone(),
                alpha: t.alpha,
                lambda_min: t.stats.lambda_min,
                r_n: t.stats.r_n,
            })
            .collect();
        write_with(&dir, "trajectory.csv", |w| write_trajectory(w, &lines))?;
        let support: Vec<SupportRow> = rep
            .trajectory
            .iter()
            .map(|t| SupportRow { n: t.n, alpha: t.alpha, support_zero: t.support_zero.clone() })
            .collect();
        write_with(&dir, "support_history.csv", |w| write_support_history(w, &support))?;
    }

    match args.format {
        OutputFormat::Csv => write_example1_csv(out, &result)?,
        OutputFormat::Json => write_example1_json(out, &result)?,
    }

    let seeds: Vec<u64> = (0..config.replicates).map(|j| replicate_seed(config.seed, j)).collect();
    Manifest::new("example1", &config, json!({ "campaign": config.seed, "replicates": seeds }))?.write(out)
}

const METHODS: [&str; 3] = ["algorithm1", "least_squares", "lasso"];

/// `(method, coordinate, n, estimate)` in method, coordinate, checkpoint order.
fn summary_rows(result: &CampaignResult) -> Vec<(&'static str, usize, usize, f64)> {
    let mut rows = Vec::new();
    for method in METHODS {
        for l in 0..result.config.r {
            for avg in &result.averages {
                let v = match method {
                    "algorithm1" => &avg.algorithm1,
                    "least_squares" => &avg.least_squares,
                    _ => &avg.lasso,
                };
                rows.push((method, l + 1, avg.n, v[l]));
            }
        }
    }
    rows
}

fn write_example1_csv(out: &std::path::Path, result: &CampaignResult) -> CliResult<()> {
    let rows: Vec<Vec<String>> = summary_rows(result)
        .into_iter()
        .map(|(m, l, n, v)| vec![m.to_string(), l.to_string(), n.to_string(), format_number(v)])
        .collect();
    write_csv(out, "summary.csv", &["method", "coordinate", "n", "estimate"], &rows)?;

    let rows: Vec<Vec<String>> = result
        .replicates
        .iter()
        .map(|r| {
            vec![
                r.replicate.to_string(),
                r.seed.to_string(),
                r.support.settled_index.map_or(String::new(), |i| i.to_string()),
                encode_support(&r.support.final_support),
                r.support.matches_truth.map_or(String::new(), |b| b.to_string()),
                format_number(r.metrics.precision),
                format_number(r.metrics.recall),
            ]
        })
        .collect();
    write_csv(
        out,
        "support.csv",
        &["replicate", "seed", "settled_index", "final_support", "matches_truth", "precision", "recall"],
        &rows,
    )?;

    let rows: Vec<Vec<String>> = result
        .replicates
        .iter()
        .flat_map(|r| {
            r.checkpoints.iter().map(move |c| {
                vec![r.replicate.to_string(), c.n.to_string(), format_number(c.lasso_kkt), c.lasso_converged.to_string()]
            })
        })
        .collect();
    write_csv(out, "lasso.csv", &["replicate", "n", "kkt_residual", "converged"], &rows)
}

fn write_example1_json(out: &std::path::Path, result: &CampaignResult) -> CliResult<()> {
    let summary: Vec<Value> = summary_rows(result)
        .into_iter()
        .map(|(m, l, n, v)| json!({ "method": m, "coordinate": l, "n": n, "estimate": json_num(v) }))
        .collect();
    write_json(out, "summary.json", &summary)?;

    let support: Vec<Value> = result
        .replicates
        .iter()
        .map(|r| {
            json!({
                "replicate": r.replicate,
                "seed": r.seed,
                "report": r.support,
                "metrics": r.metrics,
            })
        })
        .collect();
    write_json(out, "support.json", &json!({ "replicates": support, "summary": result.support_summary }))?;

    let lasso: Vec<Value> = result
        .replicates
        .iter()
        .flat_map(|r| {
            r.checkpoints.iter().map(move |c| {
                json!({ "replicate": r.replicate, "n": c.n, "kkt_residual": c.lasso_kkt, "converged": c.lasso_converged })
            })
        })
        .collect();
    write_json(out, "lasso.json", &lasso)
}

/// Settings for `identify` and `diagnose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyConfig {
    #[serde(default = "ThresholdSchedule::example1_default")]
    pub schedule: ThresholdSchedule,
    #[serde(default = "default_p0_scale")]
    pub p0_scale: f64,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    /// Known zero set (1-based), used to report `matches_truth`.
    #[serde(default)]
    pub truth_zero: Option<BTreeSet<usize>>,
}

fn default_p0_scale() -> f64 {
    100.0
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self { schedule: ThresholdSchedule::example1_default(), p0_scale: default_p0_scale(), theta0: None, truth_zero: None }
    }
}

fn load_identify_config(path: Option<&std::path::Path>) -> CliResult<IdentifyConfig> {
    let Some(path) = path else {
        return Ok(IdentifyConfig::default());
    };
    let value: Value = read_json(path)?;
    let parsed = if value.get("kind").is_some() {
        serde_json::from_value::<ThresholdSchedule>(value).map(|schedule| IdentifyConfig { schedule, ..Default::default() })
    } else {
        serde_json::from_value::<IdentifyConfig>(value)
    };
    parsed.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_samples(path: &std::path::Path) -> CliResult<Vec<RegressionSample>> {
    read_samples(open_input(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn initial_state(config: &IdentifyConfig, r: usize) -> CliResult<RlsState> {
    let theta0 = match &config.theta0 {
        Some(t) if t.len() != r => {
            return Err(CliError::Input(format!("theta0 has {} entries, data has {r} regressors", t.len())))
        }
        Some(t) => nalgebra::DVector::from_column_slice(t),
        None => nalgebra::DVector::zeros(r),
    };
    Ok(RlsState::new(r, &theta0, config.p0_scale)?)
}

pub fn identify(args: &IdentifyArgs) -> CliResult<()> {
    let config = load_identify_config(args.config.as_deref())?;
    let schedule = config.schedule.clone().validated()?;
    let samples = load_samples(&args.data)?;
    let r = samples[0].dim();
    let mut identifier = SparseIdentifier::new(initial_state(&config, r)?, schedule.clone())?;
    let records = identifier.run(&samples)?;

    let out = &args.out;
    ensure_dir(out)?;
    let lines: Vec<TrajectoryLine> = records
        .iter()
        .map(|s| TrajectoryLine {
            n: s.n,
            theta: s.theta.clone(),
            beta: s.estimate.beta.clone(),
            alpha: s.estimate.alpha_used,
            lambda_min: s.stats.lambda_min,
            r_n: s.stats.r_n,
        })
        .collect();
    write_with(out, "trajectory.csv", |w| write_trajectory(w, &lines))?;
    let support: Vec<SupportRow> = records
        .iter()
        .map(|s| SupportRow { n: s.n, alpha: s.estimate.alpha_used, support_zero: s.estimate.support_zero.clone() })
        .collect();
    write_with(out, "support_history.csv", |w| write_support_history(w, &support))?;
    write_stats_file(out, &records)?;

    let stats: Vec<_> = records.iter().map(|s| s.stats).collect();
    let validity = schedule_validity_trace(&schedule, &stats)?;
    let rows: Vec<Vec<String>> =
        validity.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), format_number(*v)]).collect();
    write_csv(out, "validity.csv", &["n", "ratio"], &rows)?;

    let history: Vec<_> = records.iter().map(|s| s.estimate.clone()).collect();
    let report = track_support(&history, config.truth_zero.as_ref())?;
    let last = records.last().expect("non-empty stream");
    let final_json = json!({
        "n": last.n,
        "theta": json_vec(&last.theta),
        "beta": json_vec(&last.estimate.beta),
        "alpha": last.estimate.alpha_used,
        "support_zero": last.estimate.support_zero,
        "stats": last.stats,
        "settled_index": report.settled_index,
        "matches_truth": report.matches_truth,
    });
    write_json(out, "final.json", &final_json)?;

    Manifest::new("identify", &json!({ "data": args.data, "config": config }), Value::Null)?.write(out)
}

fn write_stats_file(out: &std::path::Path, records: &[StepRecord]) -> CliResult<()> {
    let stats: Vec<_> = records.iter().map(|s| (s.n, s.stats)).collect();
    write_with(out, "stats.csv", |w| write_stats(w, &stats))
}

pub fn diagnose(args: &DiagnoseArgs) -> CliResult<()> {
    let config = load_identify_config(args.config.as_deref())?;
    let samples = load_samples(&args.data)?;
    let mut state = initial_state(&config, samples[0].dim())?;
    let mut stats = Vec::with_capacity(samples.len());
    for s in &samples {
        state.step(s)?;
        stats.push((state.step_count(), state.excitation_stats()?));
    }
    ensure_dir(&args.out)?;
    write_with(&args.out, "stats.csv", |w| write_stats(w, &stats))?;
    Manifest::new("diagnose", &json!({ "data": args.data, "config": config }), Value::Null)?.write(&args.out)
}

pub fn hammerstein(args: &HammersteinArgs) -> CliResult<()> {
    let spec: ModelSpec = read_json(&args.model)?;
    let model = HammersteinModel::from_spec(&spec)?;
    let mut sim = match &args.config {
        Some(path) => read_json::<SimulationConfig>(path)?,
        None => SimulationConfig::new(3000, 0, 0.1),
    };
    if let Some(seed) = args.seed {
        sim.reseed(seed);
    }
    if let Some(n) = args.n {
        sim.n = n;
    }
    sim.validate()?;
    let run = run_pipeline(&model, &sim)?;

    if let Ok(ratio) = gram_rank_ratio(model.basis(), &run.io.u) {
        if ratio < RANK_TOL {
            eprintln!("warning: basis functions are nearly linearly dependent on the inputs (eigenvalue ratio {ratio:e})");
        }
    }

    let out = &args.out;
    ensure_dir(out)?;
    let rows: Vec<Vec<String>> = (0..run.io.len())
        .map(|k| vec![(k + 1).to_string(), format_number(run.io.u[k]), format_number(run.io.y[k])])
        .collect();
    write_csv(out, "io.csv", &["k", "u", "y"], &rows)?;

    let mut header = vec!["row".to_string()];
    header.extend((1..=model.m()).map(|j| format!("g_{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..run.m_hat.nrows())
        .map(|i| {
            let mut row = vec![(i + 1).to_string()];
            row.extend(run.m_hat.row(i).iter().map(|&x| format_number(x)));
            row
        })
        .collect();
    write_csv(out, "M_matrix.csv", &header, &rows)?;

    let mut rows = Vec::new();
    if let Some((b, c)) = &run.factors {
        rows.extend(b.iter().enumerate().map(|(i, &x)| vec!["b".into(), (i + 1).to_string(), format_number(x)]));
        rows.extend(c.iter().enumerate().map(|(j, &x)| vec!["c".into(), (j + 1).to_string(), format_number(x)]));
    }
    write_csv(out, "factors.csv", &["factor", "index", "value"], &rows)?;

    let effective: BTreeSet<usize> = (1..=model.m()).filter(|j| !run.noneffective.contains(j)).collect();
    let truth = model.noneffective_truth();
    write_json(
        out,
        "effective_basis.json",
        &json!({
            "m": model.m(),
            "effective": effective,
            "noneffective": run.noneffective,
            "truth_noneffective": truth,
            "matches_truth": run.noneffective == truth,
            "factor_relative_error": run.factor_relative_error(),
            "alpha": run.final_estimate.alpha_used,
            "growth": {
                "c1": run.growth.c1,
                "c2": run.growth.c2,
                "c3": run.growth.c3,
                "c4": run.growth.c4,
                "within_band": run.growth.within_band,
            },
        }),
    )?;

    let rows: Vec<Vec<String>> = run
        .growth
        .rows
        .iter()
        .map(|g| vec![g.n.to_string(), format_number(g.r_over_n), format_number(g.lambda_over_n)])
        .collect();
    write_csv(out, "growth_check.csv", &["n", "r_over_n", "lambda_over_n"], &rows)?;

    Manifest::new(
        "hammerstein",
        &json!({ "model": spec, "simulation": sim }),
        json!({ "input": sim.seed, "noise": sim.noise.seed }),
    )?
    .write(out)
}

pub fn bound(args: &BoundArgs) -> CliResult<()> {
    let inputs: BoundInputs = read_json(&args.config)?;
    inputs.validate()?;
    let terms = bound_terms(&inputs)?;
    let m_opt = optimal_m(inputs.c0, inputs.c5, inputs.epsilon);
    let n0_opt = n0_optimal(inputs.c0, inputs.c2, inputs.c3, inputs.c5, inputs.epsilon)?;
    let report = json!({
        "k1": terms.k1,
        "k2": terms.k2,
        "terms": terms.terms,
        "n0": terms.n0,
        "optimal_m": m_opt,
        "n0_optimal": n0_opt,
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Numeric(e.to_string()))?;
    println!("{text}");
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_json(out, "bound.json", &report)?;
        Manifest::new("bound", &inputs, Value::Null)?.write(out)?;
    }
    Ok(())
}
