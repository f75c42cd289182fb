//! Experiment harness: JSON configuration, seeded repeated trials, L2 error
//! metrics with median aggregation, and CSV/SVG emission.
//!
//! Determinism contract: one truth per trial, derived from
//! `base_seed ^ trial`; every method runs against that same truth with its
//! own derived stream. Reruns with the same base seed produce byte-identical
//! CSV files. Trials may execute in parallel (capped by `KVIFF_THREADS`)
//! without affecting any output byte.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::filters::{run_filter, KvifConfig, KvifInit, MethodConfig};
use crate::kernel::KernelSpec;
use crate::models::{scenario_by_name, simulate_truth, ScenarioSpec, TruthRun};

fn default_repeats() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment: a scenario, the methods to run on it, and the trial plan.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub methods: Vec<MethodSpec>,
    pub num_particles: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub plot: bool,
}

/// A method entry: the method name plus its parameters (KVIFF only).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: String,
    #[serde(default)]
    pub kviff: Option<KviffParams>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KviffParams {
    pub epsilon: f64,
    pub num_steps: usize,
    pub init: String,
    pub kernel: KernelParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub bandwidth: f64,
}

impl ExperimentConfig {
    /// Validate the config and resolve it into a scenario plus runnable
    /// method configs.
    pub fn resolve(&self) -> Result<(ScenarioSpec, Vec<MethodConfig>)> {
        if self.repeats < 1 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.num_particles < 1 {
            return Err(Error::Config("num_particles must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be non-empty".into()));
        }
        let scenario = scenario_by_name(&self.scenario)
            .map_err(|e| Error::Config(format!("scenario: {e}")))?;

        let mut names = Vec::new();
        let mut methods = Vec::new();
        for spec in &self.methods {
            if names.contains(&spec.method) {
                return Err(Error::Config(format!("duplicate method `{}`", spec.method)));
            }
            names.push(spec.method.clone());
            let method = match spec.method.as_str() {
                "kf" => {
                    if scenario.linear.is_none() {
                        return Err(Error::Config(format!(
                            "kf is only valid on linear scenarios, not `{}`",
                            self.scenario
                        )));
                    }
                    MethodConfig::Kf
                }
                "pf" => MethodConfig::Pf,
                "enkf" => MethodConfig::Enkf,
                "kviff" => {
                    let params = spec.kviff.as_ref().ok_or_else(|| {
                        Error::Config("kviff method requires a `kviff` parameter block".into())
                    })?;
                    let kernel = KernelSpec::rbf(params.kernel.bandwidth)
                        .map_err(|e| Error::Config(format!("kviff.kernel: {e}")))?;
                    let init = KvifInit::parse(&params.init)
                        .map_err(|e| Error::Config(format!("kviff.init: {e}")))?;
                    MethodConfig::Kviff(
                        KvifConfig::new(kernel, params.epsilon, params.num_steps, init)
                            .map_err(|e| Error::Config(format!("kviff: {e}")))?,
                    )
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown method `{other}` (expected kf|pf|enkf|kviff)"
                    )))
                }
            };
            if spec.kviff.is_some() && spec.method != "kviff" {
                return Err(Error::Config(format!(
                    "method `{}` does not take a kviff block",
                    spec.method
                )));
            }
            methods.push(method);
        }
        Ok((scenario, methods))
    }
}

/// Parse and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_with_overrides(path, &[])
}

/// Parse a config file, apply dotted-path overrides, then validate.
pub fn load_config_with_overrides(
    path: &Path,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut raw: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    apply_overrides(&mut raw, overrides)?;
    let config: ExperimentConfig =
        serde_json::from_value(raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.resolve()?;
    Ok(config)
}

/// Apply `key=value` overrides to a raw config document. A key starting with
/// `kviff.` targets the parameter block of every kviff method entry; any
/// other key is a top-level config field. Values parse as JSON scalars, with
/// a bare-string fallback.
pub fn apply_overrides(
    raw: &mut serde_json::Value,
    overrides: &[(String, String)],
) -> Result<()> {
    for (key, value) in overrides {
        let parsed: serde_json::Value = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.clone()));
        let segments: Vec<&str> = key.split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(Error::Config(format!("malformed override key `{key}`")));
        }
        if segments[0] == "kviff" {
            if segments.len() < 2 {
                return Err(Error::Config("override key `kviff` needs a sub-field".into()));
            }
            let methods = raw
                .get_mut("methods")
                .and_then(|m| m.as_array_mut())
                .ok_or_else(|| Error::Config("config has no methods array".into()))?;
            let mut touched = false;
            for entry in methods.iter_mut() {
                if entry.get("method").and_then(|m| m.as_str()) == Some("kviff") {
                    let block = entry
                        .as_object_mut()
                        .ok_or_else(|| Error::Config("method entry must be an object".into()))?
                        .entry("kviff")
                        .or_insert_with(|| serde_json::json!({}));
                    set_path(block, &segments[1..], parsed.clone())?;
                    touched = true;
                }
            }
            if !touched {
                return Err(Error::Config(format!(
                    "override `{key}` matched no kviff method entry"
                )));
            }
        } else {
            set_path(raw, &segments, parsed)?;
        }
    }
    Ok(())
}

fn set_path(root: &mut serde_json::Value, path: &[&str], value: serde_json::Value) -> Result<()> {
    let mut node = root;
    for seg in &path[..path.len() - 1] {
        node = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override path `{seg}` is not an object")))?
            .entry(seg.to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config("override target is not an object".into()))?
        .insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

/// One (method, trial) run: the per-step errors and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub trial: usize,
    pub per_step_error: Vec<f64>,
    pub aggregate_error: f64,
    pub wall_time: f64,
}

/// Per-method summary across trials.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: String,
    /// Pointwise median of the per-step error curves across trials.
    pub median_per_step: Vec<f64>,
    /// Median across trials of the per-trial mean error (the headline value).
    pub median_aggregate: f64,
    /// Time-mean of the pointwise median curve (the alternative aggregation).
    pub mean_of_median_curve: f64,
    pub median_wall_time: f64,
}

/// Everything an experiment produces, before any file is written.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub scenario: String,
    pub records: Vec<RunRecord>,
    pub summaries: Vec<MethodSummary>,
    /// True states `x_1..x_K` of trial 0, for trajectory overlays.
    pub truth_first_trial: Vec<DVector<f64>>,
    /// Per-method estimates on trial 0.
    pub estimates_first_trial: Vec<(String, Vec<DVector<f64>>)>,
}

/// Euclidean error per step between estimates and true states.
pub fn l2_error_series(
    estimates: &[DVector<f64>],
    truth_states: &[DVector<f64>],
) -> Result<Vec<f64>> {
    if estimates.len() != truth_states.len() {
        return Err(Error::usage(format!(
            "l2_error_series: {} estimates vs {} states",
            estimates.len(),
            truth_states.len()
        )));
    }
    Ok(estimates.iter().zip(truth_states).map(|(e, x)| (e - x).norm()).collect())
}

/// Median with the midpoint convention for even counts. For odd counts the
/// result is an order statistic of the input.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median: non-comparable value"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a method's stream within one trial, disjoint from the truth
/// stream and from every other method's.
pub fn method_seed(trial_seed: u64, method_index: usize) -> u64 {
    splitmix64(trial_seed ^ splitmix64(method_index as u64 + 1))
}

/// Run every configured method against `repeats` shared truths. Trials run
/// in parallel when a pool is available; records are ordered (method, trial)
/// regardless of scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (scenario, methods) = config.resolve()?;
    let method_names: Vec<String> =
        config.methods.iter().map(|m| m.method.clone()).collect();

    let truths: Vec<TruthRun> = (0..config.repeats)
        .map(|t| simulate_truth(&scenario, config.base_seed ^ t as u64))
        .collect::<Result<_>>()?;

    struct Job {
        method_index: usize,
        trial: usize,
    }
    let jobs: Vec<Job> = (0..methods.len())
        .flat_map(|m| (0..config.repeats).map(move |t| Job { method_index: m, trial: t }))
        .collect();

    let results: Vec<(RunRecord, Option<Vec<DVector<f64>>>)> = jobs
        .par_iter()
        .map(|job| {
            let truth = &truths[job.trial];
            let seed = method_seed(truth.seed, job.method_index);
            let start = Instant::now();
            let run = run_filter(
                &scenario,
                &methods[job.method_index],
                config.num_particles,
                truth,
                seed,
            )
            .map_err(|e| {
                Error::Numerical(format!(
                    "trial {} (seed {}, method {}): {e}",
                    job.trial, truth.seed, method_names[job.method_index]
                ))
            })?;
            let wall_time = start.elapsed().as_secs_f64();
            let per_step = l2_error_series(&run.estimates, &truth.states[1..])?;
            let aggregate = per_step.iter().sum::<f64>() / per_step.len() as f64;
            let record = RunRecord {
                method: method_names[job.method_index].clone(),
                trial: job.trial,
                per_step_error: per_step,
                aggregate_error: aggregate,
                wall_time,
            };
            let estimates = (job.trial == 0).then_some(run.estimates);
            Ok((record, estimates))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(results.len());
    let mut estimates_first_trial = Vec::with_capacity(methods.len());
    for (record, estimates) in results {
        if let Some(est) = estimates {
            estimates_first_trial.push((record.method.clone(), est));
        }
        records.push(record);
    }

    let k_max = scenario.horizon;
    let summaries = method_names
        .iter()
        .map(|name| {
            let rows: Vec<&RunRecord> =
                records.iter().filter(|r| &r.method == name).collect();
            let median_per_step: Vec<f64> = (0..k_max)
                .map(|k| {
                    let col: Vec<f64> = rows.iter().map(|r| r.per_step_error[k]).collect();
                    median(&col)
                })
                .collect();
            let aggregates: Vec<f64> = rows.iter().map(|r| r.aggregate_error).collect();
            let walls: Vec<f64> = rows.iter().map(|r| r.wall_time).collect();
            MethodSummary {
                method: name.clone(),
                median_aggregate: median(&aggregates),
                mean_of_median_curve: median_per_step.iter().sum::<f64>() / k_max as f64,
                median_per_step,
                median_wall_time: median(&walls),
            }
        })
        .collect();

    Ok(ExperimentOutput {
        scenario: config.scenario.clone(),
        records,
        summaries,
        truth_first_trial: truths[0].states[1..].to_vec(),
        estimates_first_trial,
    })
}

// ---------------------------------------------------------------------------
// file outputs
// ---------------------------------------------------------------------------

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Long-format per-trial errors: `method,trial,step,error`, LF endings,
/// shortest-roundtrip floats.
pub fn write_runs_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut out = String::from("method,trial,step,error\n");
    for r in records {
        for (i, e) in r.per_step_error.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", r.method, r.trial, i + 1, e));
        }
    }
    write_file(path, &out)
}

/// Pointwise median error curves: `method,step,median_error`.
pub fn write_summary_csv(summaries: &[MethodSummary], path: &Path) -> Result<()> {
    let mut out = String::from("method,step,median_error\n");
    for s in summaries {
        for (i, e) in s.median_per_step.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", s.method, i + 1, e));
        }
    }
    write_file(path, &out)
}

/// Scalar aggregates, both aggregation orders:
/// `method,median_aggregate,mean_of_median_curve`.
pub fn write_aggregate_csv(summaries: &[MethodSummary], path: &Path) -> Result<()> {
    let mut out = String::from("method,median_aggregate,mean_of_median_curve\n");
    for s in summaries {
        out.push_str(&format!(
            "{},{},{}\n",
            s.method, s.median_aggregate, s.mean_of_median_curve
        ));
    }
    write_file(path, &out)
}

const SVG_PALETTE: [&str; 6] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

const SVG_W: f64 = 860.0;
const SVG_H: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

fn render_svg_lines(
    series: &[(String, Vec<(f64, f64)>)],
    x_label: &str,
    y_label: &str,
) -> Result<String> {
    if series.is_empty() || series.iter().any(|(_, pts)| pts.is_empty()) {
        return Err(Error::usage("svg plot needs non-empty series"));
    }
    let all = series.iter().flat_map(|(_, pts)| pts.iter());
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        let pad = y0.abs().max(1.0) * 0.1;
        y0 -= pad;
        y1 += pad;
    }
    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let sx = move |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let sy = move |y: f64| MARGIN_T + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // axes
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_T + plot_h
    ));
    // ticks
    for t in 0..=4 {
        let fx = x0 + (x1 - x0) * t as f64 / 4.0;
        let px = sx(fx);
        svg.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{fx:.3}</text>\n",
            MARGIN_T + plot_h + 20.0
        ));
        let fy = y0 + (y1 - y0) * t as f64 / 4.0;
        let py = sy(fy);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{MARGIN_L}\" y2=\"{py:.2}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{fy:.4}</text>\n",
            MARGIN_L - 8.0,
            py + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">{x_label}</text>\n",
        MARGIN_L + plot_w / 2.0,
        SVG_H - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.2})\">{y_label}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));
    // series
    for (idx, (name, pts)) in series.iter().enumerate() {
        let color = SVG_PALETTE[idx % SVG_PALETTE.len()];
        let mut points = String::new();
        for (x, y) in pts {
            points.push_str(&format!("{:.2},{:.2} ", sx(*x), sy(*y)));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.trim_end()
        ));
        let ly = MARGIN_T + 18.0 * idx as f64 + 10.0;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            MARGIN_L + plot_w + 12.0,
            MARGIN_L + plot_w + 36.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{name}</text>\n",
            MARGIN_L + plot_w + 42.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Line chart of named step series (value vs 1-based step). Byte output is
/// deterministic for fixed input.
pub fn write_svg_plot(series: &[(String, Vec<f64>)], path: &Path) -> Result<()> {
    if series.is_empty() {
        return Err(Error::usage("write_svg_plot: no series"));
    }
    let len = series[0].1.len();
    if series.iter().any(|(_, v)| v.len() != len || v.is_empty()) {
        return Err(Error::usage("write_svg_plot: series must be non-empty and equal length"));
    }
    let xy: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, vals)| {
            (
                name.clone(),
                vals.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect(),
            )
        })
        .collect();
    write_file(path, &render_svg_lines(&xy, "step", "value")?)
}

/// Planar trajectory overlay (first two state dimensions of each series).
pub fn write_svg_trajectories(
    series: &[(String, Vec<DVector<f64>>)],
    path: &Path,
) -> Result<()> {
    if series.is_empty() {
        return Err(Error::usage("write_svg_trajectories: no series"));
    }
    let xy: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, states)| {
            let pts = states
                .iter()
                .map(|x| {
                    if x.len() >= 2 {
                        (x[0], x[1])
                    } else {
                        (x[0], 0.0)
                    }
                })
                .collect();
            (name.clone(), pts)
        })
        .collect();
    write_file(path, &render_svg_lines(&xy, "x1", "x2")?)
}

/// Write `runs.csv`, `summary.csv`, `aggregate.csv`, and (optionally) the
/// two SVG charts into `dir`. Returns the written paths.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let runs = dir.join("runs.csv");
    write_runs_csv(&output.records, &runs)?;
    written.push(runs);

    let summary = dir.join("summary.csv");
    write_summary_csv(&output.summaries, &summary)?;
    written.push(summary);

    let aggregate = dir.join("aggregate.csv");
    write_aggregate_csv(&output.summaries, &aggregate)?;
    written.push(aggregate);

    if plot {
        let error_series: Vec<(String, Vec<f64>)> = output
            .summaries
            .iter()
            .map(|s| (s.method.clone(), s.median_per_step.clone()))
            .collect();
        let error_svg = dir.join("error.svg");
        write_svg_plot(&error_series, &error_svg)?;
        written.push(error_svg);

        let mut traj: Vec<(String, Vec<DVector<f64>>)> =
            vec![("truth".to_string(), output.truth_first_trial.clone())];
        traj.extend(output.estimates_first_trial.iter().cloned());
        let traj_svg = dir.join("trajectory.svg");
        write_svg_trajectories(&traj, &traj_svg)?;
        written.push(traj_svg);
    }
    Ok(written)
}

/// Build a rayon pool capped by the `KVIFF_THREADS` environment variable and
/// run `f` inside it; with the variable unset, run in the ambient pool.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("KVIFF_THREADS") {
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|_| Error::Config(format!("KVIFF_THREADS=`{raw}` is not a number")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}
