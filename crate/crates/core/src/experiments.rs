//! Experiment runners over grids of random instances.
//!
//! Every run is a pure function of its [`ExperimentConfig`]. Randomness is
//! addressed by substream: instance `i` of cell `(s, n)` uses
//! `derive_seed(seed, [s, n, i])`, and its multistart for a given sense uses
//! `derive_seed(seed, [s, n, i, 1])` (min) or `[s, n, i, 2]` (max). Both sweep
//! orders therefore see identical start vectors, and output files do not
//! depend on the number of worker threads.
//!
//! CSV schemas (header row always written):
//!
//! | file | columns |
//! |------|---------|
//! | `extrema_count.csv` | vertices, steps, instance_id, unique_local_minima, unique_local_maxima |
//! | `extrema_count_cells.csv` | vertices, steps, instances, starts, mean_unique_local_minima, mean_unique_local_maxima, mean_unique_local_extrema, mean_distinct_minimum_values, mean_distinct_maximum_values, reference_mean |
//! | `sweep_frequencies.csv` | vertices, steps, instance_id, sense, extremum_id, value, freq_left_to_right, freq_right_to_left |
//! | `sweep_agreement.csv` | vertices, steps, instance_id, sense, starts, unique_left_to_right, unique_right_to_left, disagreement_fraction, best_left_to_right, best_right_to_left |
//! | `initial_vs_optimized.csv` | vertices, steps, instance_id, sense, start_id, start_value, optimized_value |
//! | `initial_vs_optimized_correlation.csv` | vertices, steps, instance_id, sense, pairs, correlation |
//! | `deviation_v{s}_n{n}_{sense}.csv` | sample_size, avg_rel_dev_optimized, avg_rel_dev_random, max_rel_dev_optimized, max_rel_dev_random |

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::generate::{generate_instance, GenError, GenParams};
use crate::graph::EdgeSelection;
use crate::instance::{write_document, FormatError, Instance};
use crate::rng::{self, derive_seed};
use crate::search::{multistart, MultistartReport, OptimizationProblem, SearchError, Sense, SweepStrategy, VALUE_CLUSTER_TOL};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("relative deviations need non-negative q and f (instance {instance} of cell {vertices}x{steps})")]
    NegativeData {
        vertices: usize,
        steps: usize,
        instance: usize,
    },
    #[error("relative deviations need a non-zero best value (instance {instance} of cell {vertices}x{steps})")]
    ZeroBest {
        vertices: usize,
        steps: usize,
        instance: usize,
    },
}

/// Generator settings shared by every cell; vertices, steps and seed come
/// from the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSettings {
    pub disconnect_fraction: f64,
    pub lower_mean: f64,
    pub width_mean: f64,
    pub qf_mean: f64,
    pub marginal_slack: f64,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        let p = GenParams::default();
        Self {
            disconnect_fraction: p.disconnect_fraction,
            lower_mean: p.lower_mean,
            width_mean: p.width_mean,
            qf_mean: p.qf_mean,
            marginal_slack: p.marginal_slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub vertices: Vec<usize>,
    pub steps: Vec<usize>,
    pub instances: usize,
    pub starts: usize,
    pub seed: u64,
    /// The first entry drives single-strategy experiments.
    pub strategies: Vec<SweepStrategy>,
    pub senses: Vec<Sense>,
    pub generator: GeneratorSettings,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::extrema_count()
    }
}

impl ExperimentConfig {
    /// 4/6/8 vertices by 2/4/6 steps, 50 instances of 300 starts.
    pub fn extrema_count() -> Self {
        Self {
            vertices: vec![4, 6, 8],
            steps: vec![2, 4, 6],
            instances: 50,
            starts: 300,
            seed: 0,
            strategies: vec![SweepStrategy::LeftToRight],
            senses: vec![Sense::Min, Sense::Max],
            generator: GeneratorSettings::default(),
            output_dir: PathBuf::from("results"),
        }
    }

    pub fn sweep_comparison() -> Self {
        Self {
            vertices: vec![6],
            steps: vec![4],
            instances: 20,
            starts: 300,
            strategies: vec![SweepStrategy::LeftToRight, SweepStrategy::RightToLeft],
            ..Self::extrema_count()
        }
    }

    pub fn initial_vs_optimized() -> Self {
        Self {
            vertices: vec![8],
            steps: vec![6],
            instances: 5,
            starts: 300,
            senses: vec![Sense::Max],
            ..Self::extrema_count()
        }
    }

    /// 8 vertices, 8 steps, 30 parameter sets of 500 starts.
    pub fn deviation() -> Self {
        Self {
            vertices: vec![8],
            steps: vec![8],
            instances: 30,
            starts: 500,
            senses: vec![Sense::Min],
            ..Self::extrema_count()
        }
    }

    /// Overlays the keys present in a JSON document onto `base`.
    pub fn from_document(text: &str, base: Self) -> Result<Self, ExperimentError> {
        let overlay: Value = serde_json::from_str(text).map_err(FormatError::from)?;
        let Value::Object(overlay) = overlay else {
            return Err(ExperimentError::Config("config must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(base).map_err(FormatError::from)?;
        let target = merged.as_object_mut().expect("config serialises to an object");
        for (k, v) in overlay {
            if k == "generator" {
                if let (Some(Value::Object(dst)), Value::Object(src)) = (target.get_mut("generator"), &v) {
                    for (gk, gv) in src {
                        dst.insert(gk.clone(), gv.clone());
                    }
                    continue;
                }
            }
            target.insert(k, v);
        }
        let config: Self = serde_json::from_value(merged).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path, base: Self) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_document(&text, base)
    }

    pub fn check(&self) -> Result<(), ExperimentError> {
        let fail = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.vertices.is_empty() || self.steps.is_empty() {
            return fail("vertices and steps must be non-empty");
        }
        if self.vertices.iter().any(|&v| v < 2) {
            return fail("every vertex count must be at least 2");
        }
        if self.steps.iter().any(|&n| n < 1) {
            return fail("every step count must be at least 1");
        }
        if self.instances < 1 || self.starts < 1 {
            return fail("instances and starts must be at least 1");
        }
        if self.strategies.is_empty() || self.senses.is_empty() {
            return fail("strategies and senses must be non-empty");
        }
        Ok(())
    }

    fn cells(&self) -> Vec<(usize, usize)> {
        self.vertices
            .iter()
            .flat_map(|&s| self.steps.iter().map(move |&n| (s, n)))
            .collect()
    }

    fn gen_params(&self, vertices: usize, steps: usize, instance: usize) -> GenParams {
        let g = &self.generator;
        GenParams {
            vertices,
            steps,
            disconnect_fraction: g.disconnect_fraction,
            lower_mean: g.lower_mean,
            width_mean: g.width_mean,
            qf_mean: g.qf_mean,
            marginal_slack: g.marginal_slack,
            seed: derive_seed(self.seed, &[vertices as u64, steps as u64, instance as u64]),
        }
    }

    /// Instance `instance` of cell `(vertices, steps)`.
    pub fn instance(&self, vertices: usize, steps: usize, instance: usize) -> Result<Instance, ExperimentError> {
        Ok(generate_instance(&self.gen_params(vertices, steps, instance))?)
    }

    fn multistart_seed(&self, vertices: usize, steps: usize, instance: usize, sense: Sense) -> u64 {
        let tag = match sense {
            Sense::Min => 1,
            Sense::Max => 2,
        };
        derive_seed(self.seed, &[vertices as u64, steps as u64, instance as u64, tag])
    }

    fn strategy(&self) -> SweepStrategy {
        self.strategies[0]
    }
}

fn problem(inst: &Instance, sense: Sense) -> Result<OptimizationProblem, ExperimentError> {
    Ok(OptimizationProblem::new(
        inst.bounds.clone(),
        inst.q.clone(),
        inst.f.clone(),
        inst.steps,
        sense,
    )?)
}

fn run_instance(
    config: &ExperimentConfig,
    inst: &Instance,
    (s, n, i): (usize, usize, usize),
    sense: Sense,
    strategy: SweepStrategy,
) -> Result<MultistartReport, ExperimentError> {
    Ok(multistart(
        &problem(inst, sense)?,
        config.starts,
        config.multistart_seed(s, n, i, sense),
        strategy,
    )?)
}

/// Reference mean local-extrema counts for 4/6/8 vertices by 2/4/6 steps,
/// measured over 200 instances of 1500 starts each. Qualitative comparison only.
pub fn reference_mean(vertices: usize, steps: usize) -> Option<f64> {
    let row = match vertices {
        4 => [1.9, 13.4, 80.6],
        6 => [3.2, 46.8, 251.2],
        8 => [5.3, 100.3, 411.4],
        _ => return None,
    };
    match steps {
        2 => Some(row[0]),
        4 => Some(row[1]),
        6 => Some(row[2]),
        _ => None,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), ExperimentError> {
    let err = |source| ExperimentError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))?;
    Ok(())
}

fn write_summary(path: &Path, value: &Value) -> Result<(), ExperimentError> {
    std::fs::write(path, write_document(value)?).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

// ---------------------------------------------------------------------------
// extrema counts

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub vertices: usize,
    pub steps: usize,
    pub instance_id: usize,
    pub unique_local_minima: usize,
    pub unique_local_maxima: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountCellRow {
    pub vertices: usize,
    pub steps: usize,
    pub instances: usize,
    pub starts: usize,
    pub mean_unique_local_minima: f64,
    pub mean_unique_local_maxima: f64,
    /// Average of the minima and maxima means.
    pub mean_unique_local_extrema: f64,
    pub mean_distinct_minimum_values: f64,
    pub mean_distinct_maximum_values: f64,
    pub reference_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremaCount {
    pub rows: Vec<CountRow>,
    pub cells: Vec<CountCellRow>,
}

impl ExtremaCount {
    pub fn cell(&self, vertices: usize, steps: usize) -> Option<&CountCellRow> {
        self.cells.iter().find(|c| c.vertices == vertices && c.steps == steps)
    }

    pub fn write(&self, config: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
        let dir = &config.output_dir;
        ensure_dir(dir)?;
        let rows_path = dir.join("extrema_count.csv");
        write_csv(
            &rows_path,
            &self.rows,
            &["vertices", "steps", "instance_id", "unique_local_minima", "unique_local_maxima"],
        )?;
        let cells_path = dir.join("extrema_count_cells.csv");
        write_csv(
            &cells_path,
            &self.cells,
            &[
                "vertices",
                "steps",
                "instances",
                "starts",
                "mean_unique_local_minima",
                "mean_unique_local_maxima",
                "mean_unique_local_extrema",
                "mean_distinct_minimum_values",
                "mean_distinct_maximum_values",
                "reference_mean",
            ],
        )?;
        let summary_path = dir.join("extrema_count_summary.json");
        write_summary(
            &summary_path,
            &json!({ "experiment": "exp-count", "config": config, "cells": self.cells }),
        )?;
        Ok(vec![rows_path, cells_path, summary_path])
    }
}

/// Counts distinct local minima and maxima (by selection schedule) reached
/// from `starts` random extremal starts, per instance, for every grid cell.
pub fn run_extrema_count(config: &ExperimentConfig) -> Result<ExtremaCount, ExperimentError> {
    config.check()?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (s, n) in config.cells() {
        let per_instance = (0..config.instances)
            .into_par_iter()
            .map(|i| {
                let inst = config.instance(s, n, i)?;
                let lo = run_instance(config, &inst, (s, n, i), Sense::Min, config.strategy())?;
                let hi = run_instance(config, &inst, (s, n, i), Sense::Max, config.strategy())?;
                Ok((
                    CountRow {
                        vertices: s,
                        steps: n,
                        instance_id: i,
                        unique_local_minima: lo.unique_extrema.len(),
                        unique_local_maxima: hi.unique_extrema.len(),
                    },
                    lo.distinct_values(VALUE_CLUSTER_TOL).len(),
                    hi.distinct_values(VALUE_CLUSTER_TOL).len(),
                ))
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        let mins = mean(per_instance.iter().map(|r| r.0.unique_local_minima as f64));
        let maxs = mean(per_instance.iter().map(|r| r.0.unique_local_maxima as f64));
        cells.push(CountCellRow {
            vertices: s,
            steps: n,
            instances: config.instances,
            starts: config.starts,
            mean_unique_local_minima: mins,
            mean_unique_local_maxima: maxs,
            mean_unique_local_extrema: 0.5 * (mins + maxs),
            mean_distinct_minimum_values: mean(per_instance.iter().map(|r| r.1 as f64)),
            mean_distinct_maximum_values: mean(per_instance.iter().map(|r| r.2 as f64)),
            reference_mean: reference_mean(s, n),
        });
        rows.extend(per_instance.into_iter().map(|r| r.0));
    }
    Ok(ExtremaCount { rows, cells })
}

// ---------------------------------------------------------------------------
// sweep order comparison

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFrequencyRow {
    pub vertices: usize,
    pub steps: usize,
    pub instance_id: usize,
    pub sense: Sense,
    pub extremum_id: usize,
    pub value: f64,
    pub freq_left_to_right: f64,
    pub freq_right_to_left: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAgreementRow {
    pub vertices: usize,
    pub steps: usize,
    pub instance_id: usize,
    pub sense: Sense,
    pub starts: usize,
    pub unique_left_to_right: usize,
    pub unique_right_to_left: usize,
    /// Fraction of starts where the two orders end in different extrema.
    pub disagreement_fraction: f64,
    pub best_left_to_right: f64,
    pub best_right_to_left: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepComparison {
    pub frequencies: Vec<SweepFrequencyRow>,
    pub agreement: Vec<SweepAgreementRow>,
}

impl SweepComparison {
    pub fn write(&self, config: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
        let dir = &config.output_dir;
        ensure_dir(dir)?;
        let freq = dir.join("sweep_frequencies.csv");
        write_csv(
            &freq,
            &self.frequencies,
            &[
                "vertices",
                "steps",
                "instance_id",
                "sense",
                "extremum_id",
                "value",
                "freq_left_to_right",
                "freq_right_to_left",
            ],
        )?;
        let agree = dir.join("sweep_agreement.csv");
        write_csv(
            &agree,
            &self.agreement,
            &[
                "vertices",
                "steps",
                "instance_id",
                "sense",
                "starts",
                "unique_left_to_right",
                "unique_right_to_left",
                "disagreement_fraction",
                "best_left_to_right",
                "best_right_to_left",
            ],
        )?;
        let mean_disagreement = mean(self.agreement.iter().map(|r| r.disagreement_fraction));
        let summary = dir.join("sweep_summary.json");
        write_summary(
            &summary,
            &json!({
                "experiment": "exp-sweep",
                "config": config,
                "mean_disagreement_fraction": mean_disagreement,
            }),
        )?;
        Ok(vec![freq, agree, summary])
    }
}

fn compare_orders(
    (s, n, i): (usize, usize, usize),
    sense: Sense,
    ltr: &MultistartReport,
    rtl: &MultistartReport,
) -> (Vec<SweepFrequencyRow>, SweepAgreementRow) {
    let mut ids: HashMap<&Vec<EdgeSelection>, usize> = HashMap::new();
    let mut rows: Vec<SweepFrequencyRow> = Vec::new();
    let starts = ltr.starts as f64;
    for (report, left) in [(ltr, true), (rtl, false)] {
        for e in &report.unique_extrema {
            let next = rows.len();
            let id = *ids.entry(&e.selections).or_insert(next);
            if id == rows.len() {
                rows.push(SweepFrequencyRow {
                    vertices: s,
                    steps: n,
                    instance_id: i,
                    sense,
                    extremum_id: id,
                    value: e.value,
                    freq_left_to_right: 0.0,
                    freq_right_to_left: 0.0,
                });
            }
            let freq = e.hits as f64 / starts;
            if left {
                rows[id].freq_left_to_right = freq;
            } else {
                rows[id].freq_right_to_left = freq;
            }
        }
    }
    let differ = ltr
        .runs
        .iter()
        .zip(&rtl.runs)
        .filter(|(a, b)| ltr.unique_extrema[a.extremum].selections != rtl.unique_extrema[b.extremum].selections)
        .count();
    let agreement = SweepAgreementRow {
        vertices: s,
        steps: n,
        instance_id: i,
        sense,
        starts: ltr.starts,
        unique_left_to_right: ltr.unique_extrema.len(),
        unique_right_to_left: rtl.unique_extrema.len(),
        disagreement_fraction: differ as f64 / starts,
        best_left_to_right: ltr.best.value,
        best_right_to_left: rtl.best.value,
    };
    (rows, agreement)
}

/// Feeds the same starts to both sweep orders and compares where they end.
pub fn run_sweep_comparison(config: &ExperimentConfig) -> Result<SweepComparison, ExperimentError> {
    config.check()?;
    let mut frequencies = Vec::new();
    let mut agreement = Vec::new();
    for (s, n) in config.cells() {
        let parts = (0..config.instances)
            .into_par_iter()
            .map(|i| {
                let inst = config.instance(s, n, i)?;
                let mut out = Vec::new();
                for &sense in &config.senses {
                    let ltr = run_instance(config, &inst, (s, n, i), sense, SweepStrategy::LeftToRight)?;
                    let rtl = run_instance(config, &inst, (s, n, i), sense, SweepStrategy::RightToLeft)?;
                    out.push(compare_orders((s, n, i), sense, &ltr, &rtl));
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        for (rows, agree) in parts.into_iter().flatten() {
            frequencies.extend(rows);
            agreement.push(agree);
        }
    }
    Ok(SweepComparison { frequencies, agreement })
}

// ---------------------------------------------------------------------------
// initial versus optimised values

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub vertices: usize,
    pub steps: usize,
    pub instance_id: usize,
    pub sense: Sense,
    pub start_id: usize,
    pub start_value: f64,
    pub optimized_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub vertices: usize,
    pub steps: usize,
    pub instance_id: usize,
    pub sense: Sense,
    pub pairs: usize,
    /// Pearson coefficient; NaN when either side is constant.
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialVsOptimized {
    pub pairs: Vec<ScatterRow>,
    pub correlations: Vec<CorrelationRow>,
}

impl InitialVsOptimized {
    pub fn write(&self, config: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
        let dir = &config.output_dir;
        ensure_dir(dir)?;
        let pairs = dir.join("initial_vs_optimized.csv");
        write_csv(
            &pairs,
            &self.pairs,
            &["vertices", "steps", "instance_id", "sense", "start_id", "start_value", "optimized_value"],
        )?;
        let corr = dir.join("initial_vs_optimized_correlation.csv");
        write_csv(
            &corr,
            &self.correlations,
            &["vertices", "steps", "instance_id", "sense", "pairs", "correlation"],
        )?;
        let finite: Vec<f64> = self
            .correlations
            .iter()
            .map(|c| c.correlation)
            .filter(|c| c.is_finite())
            .collect();
        let summary = dir.join("initial_vs_optimized_summary.json");
        write_summary(
            &summary,
            &json!({
                "experiment": "exp-scatter",
                "config": config,
                "mean_correlation": mean(finite.iter().copied()),
                "instances_with_defined_correlation": finite.len(),
            }),
        )?;
        Ok(vec![pairs, corr, summary])
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs.iter().copied());
    let my = mean(ys.iter().copied());
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn run_initial_vs_optimized(config: &ExperimentConfig) -> Result<InitialVsOptimized, ExperimentError> {
    config.check()?;
    let mut pairs = Vec::new();
    let mut correlations = Vec::new();
    for (s, n) in config.cells() {
        let parts = (0..config.instances)
            .into_par_iter()
            .map(|i| {
                let inst = config.instance(s, n, i)?;
                let mut out = Vec::new();
                for &sense in &config.senses {
                    let report = run_instance(config, &inst, (s, n, i), sense, config.strategy())?;
                    let rows: Vec<ScatterRow> = report
                        .runs
                        .iter()
                        .enumerate()
                        .map(|(k, r)| ScatterRow {
                            vertices: s,
                            steps: n,
                            instance_id: i,
                            sense,
                            start_id: k,
                            start_value: r.start_value,
                            optimized_value: r.value,
                        })
                        .collect();
                    let xs: Vec<f64> = rows.iter().map(|r| r.start_value).collect();
                    let ys: Vec<f64> = rows.iter().map(|r| r.optimized_value).collect();
                    let corr = CorrelationRow {
                        vertices: s,
                        steps: n,
                        instance_id: i,
                        sense,
                        pairs: rows.len(),
                        correlation: pearson(&xs, &ys),
                    };
                    out.push((rows, corr));
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        for (rows, corr) in parts.into_iter().flatten() {
            pairs.extend(rows);
            correlations.push(corr);
        }
    }
    Ok(InitialVsOptimized { pairs, correlations })
}

// ---------------------------------------------------------------------------
// deviation curves

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub sample_size: usize,
    pub avg_rel_dev_optimized: f64,
    pub avg_rel_dev_random: f64,
    pub max_rel_dev_optimized: f64,
    pub max_rel_dev_random: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationCurve {
    pub vertices: usize,
    pub steps: usize,
    pub sense: Sense,
    pub rows: Vec<DeviationRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationCurves {
    pub curves: Vec<DeviationCurve>,
}

impl DeviationCurves {
    pub fn write(&self, config: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
        let dir = &config.output_dir;
        ensure_dir(dir)?;
        let mut paths = Vec::new();
        let mut finals = Vec::new();
        for c in &self.curves {
            let path = dir.join(format!("deviation_v{}_n{}_{}.csv", c.vertices, c.steps, c.sense));
            write_csv(
                &path,
                &c.rows,
                &[
                    "sample_size",
                    "avg_rel_dev_optimized",
                    "avg_rel_dev_random",
                    "max_rel_dev_optimized",
                    "max_rel_dev_random",
                ],
            )?;
            paths.push(path);
            let first = &c.rows[0];
            let last = c.rows.last().expect("at least one start");
            finals.push(json!({
                "vertices": c.vertices,
                "steps": c.steps,
                "sense": c.sense,
                "single_start": first,
                "full_budget": last,
            }));
        }
        let summary = dir.join("deviation_summary.json");
        write_summary(
            &summary,
            &json!({ "experiment": "exp-dev", "config": config, "curves": finals }),
        )?;
        paths.push(summary);
        Ok(paths)
    }
}

/// Relative deviation of `value` from `best` in percent, oriented so that
/// worse values give positive deviations.
fn relative_deviation(sense: Sense, value: f64, best: f64) -> f64 {
    let gap = match sense {
        Sense::Min => value - best,
        Sense::Max => best - value,
    };
    100.0 * gap / best.abs()
}

/// Running best over a shuffled sequence of starts, with and without local
/// optimisation, measured against the best value seen over the whole budget.
/// Averages and maxima are taken across the instances of a cell.
pub fn run_deviation_curves(config: &ExperimentConfig) -> Result<DeviationCurves, ExperimentError> {
    config.check()?;
    let mut curves = Vec::new();
    for (s, n) in config.cells() {
        for &sense in &config.senses {
            let per_instance = (0..config.instances)
                .into_par_iter()
                .map(|i| {
                    let inst = config.instance(s, n, i)?;
                    if inst.q.values().iter().chain(inst.f.values()).any(|v| *v < 0.0) {
                        return Err(ExperimentError::NegativeData { vertices: s, steps: n, instance: i });
                    }
                    let report = run_instance(config, &inst, (s, n, i), sense, config.strategy())?;
                    let mut order: Vec<usize> = (0..report.runs.len()).collect();
                    let mut shuffle_rng = rng::substream(config.seed, &[s as u64, n as u64, i as u64, 3]);
                    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut shuffle_rng);

                    let best = report
                        .runs
                        .iter()
                        .flat_map(|r| [r.value, r.start_value])
                        .reduce(|a, b| if sense.better(b, a) { b } else { a })
                        .expect("at least one start");
                    if best == 0.0 {
                        return Err(ExperimentError::ZeroBest { vertices: s, steps: n, instance: i });
                    }
                    let mut run_opt = f64::NAN;
                    let mut run_rand = f64::NAN;
                    let devs: Vec<(f64, f64)> = order
                        .iter()
                        .map(|&k| {
                            let r = &report.runs[k];
                            if run_opt.is_nan() || sense.better(r.value, run_opt) {
                                run_opt = r.value;
                            }
                            if run_rand.is_nan() || sense.better(r.start_value, run_rand) {
                                run_rand = r.start_value;
                            }
                            (
                                relative_deviation(sense, run_opt, best),
                                relative_deviation(sense, run_rand, best),
                            )
                        })
                        .collect();
                    Ok(devs)
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            let rows = (0..config.starts)
                .map(|k| {
                    let opt = per_instance.iter().map(|d| d[k].0);
                    let rnd = per_instance.iter().map(|d| d[k].1);
                    DeviationRow {
                        sample_size: k + 1,
                        avg_rel_dev_optimized: mean(opt.clone()),
                        avg_rel_dev_random: mean(rnd.clone()),
                        max_rel_dev_optimized: opt.fold(0.0, f64::max),
                        max_rel_dev_random: rnd.fold(0.0, f64::max),
                    }
                })
                .collect();
            curves.push(DeviationCurve {
                vertices: s,
                steps: n,
                sense,
                rows,
            });
        }
    }
    Ok(DeviationCurves { curves })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(base: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            vertices: vec![4],
            steps: vec![2, 3],
            instances: 4,
            starts: 20,
            seed: 9,
            ..base
        }
    }

    #[test]
    fn config_overlay() {
        let c = ExperimentConfig::from_document(
            r#"{"instances": 3, "generator": {"lower_mean": 2.0}}"#,
            ExperimentConfig::deviation(),
        )
        .unwrap();
        assert_eq!(c.instances, 3);
        assert_eq!(c.vertices, vec![8]);
        assert_eq!(c.generator.lower_mean, 2.0);
        assert_eq!(c.generator.qf_mean, 1.5);
        assert!(ExperimentConfig::from_document(r#"{"starts": 0}"#, ExperimentConfig::default()).is_err());
        assert!(ExperimentConfig::from_document(r#"{"bogus": 1}"#, ExperimentConfig::default()).is_err());
        assert!(ExperimentConfig::from_document("[1]", ExperimentConfig::default()).is_err());
    }

    #[test]
    fn extrema_count_is_deterministic() {
        let c = small(ExperimentConfig::extrema_count());
        let a = run_extrema_count(&c).unwrap();
        assert_eq!(a, run_extrema_count(&c).unwrap());
        assert_eq!(a.rows.len(), 8);
        assert_eq!(a.cells.len(), 2);
        assert!(a.rows.iter().all(|r| r.unique_local_minima >= 1 && r.unique_local_maxima >= 1));
        assert_eq!(reference_mean(6, 4), Some(46.8));
        assert_eq!(reference_mean(5, 4), None);
    }

    #[test]
    fn sweep_frequencies_sum_to_one() {
        let c = small(ExperimentConfig::sweep_comparison());
        let r = run_sweep_comparison(&c).unwrap();
        for a in &r.agreement {
            let rows: Vec<_> = r
                .frequencies
                .iter()
                .filter(|f| f.instance_id == a.instance_id && f.steps == a.steps && f.sense == a.sense)
                .collect();
            let l: f64 = rows.iter().map(|f| f.freq_left_to_right).sum();
            let rr: f64 = rows.iter().map(|f| f.freq_right_to_left).sum();
            assert!((l - 1.0).abs() < 1e-12 && (rr - 1.0).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&a.disagreement_fraction));
        }
    }

    #[test]
    fn scatter_pairs_improve() {
        let c = small(ExperimentConfig::initial_vs_optimized());
        let r = run_initial_vs_optimized(&c).unwrap();
        assert_eq!(r.pairs.len(), 2 * 4 * 20);
        assert!(r.pairs.iter().all(|p| p.optimized_value >= p.start_value));
        assert_eq!(r, run_initial_vs_optimized(&c).unwrap());
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 1.0], &[0.0, 3.0]).is_nan());
    }

    #[test]
    fn deviation_curves_shape() {
        let c = ExperimentConfig {
            vertices: vec![5],
            steps: vec![4],
            instances: 3,
            starts: 30,
            seed: 2,
            senses: vec![Sense::Min, Sense::Max],
            ..ExperimentConfig::deviation()
        };
        let r = run_deviation_curves(&c).unwrap();
        assert_eq!(r.curves.len(), 2);
        for curve in &r.curves {
            assert_eq!(curve.rows.len(), 30);
            for w in curve.rows.windows(2) {
                assert!(w[1].avg_rel_dev_optimized <= w[0].avg_rel_dev_optimized + 1e-12);
                assert!(w[1].max_rel_dev_random <= w[0].max_rel_dev_random + 1e-12);
            }
            for row in &curve.rows {
                assert!(row.avg_rel_dev_optimized <= row.avg_rel_dev_random);
                assert!(row.avg_rel_dev_optimized >= 0.0);
            }
            assert_eq!(curve.rows.last().unwrap().max_rel_dev_optimized, 0.0);
        }
    }
}
