//! Local search over extremal weight vectors.
//!
//! Replacing the weight function at one step `k` while the others stay fixed
//! is a one-step problem with `q_l = q T_{w_1..w_{k-1}}` and
//! `f_r = T_{w_{k+1}..w_n} f`, solved exactly by
//! [`extremal_selection`](crate::graph::extremal_selection). Sweeping over the
//! split points until no replacement helps gives a local minimum. Maximisation
//! runs the same search on `-f`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{push_left, push_right, Gamble, MassFunction, WeightVector};
use crate::graph::{
    extremal_selection, selection_from_rankings, selection_of, EdgeSelection, IntervalBounds, ModelError,
    WeightFunction,
};
use crate::rng::{self, StreamRng};

/// Default acceptance tolerance, relative to `max(1, |value|)`.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{what} has {found} entries, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("the number of steps must be at least 1")]
    NoSteps,
    #[error("step {step} is out of range for {steps} steps")]
    StepOutOfRange { step: usize, steps: usize },
    #[error("start vector has {found} steps, problem has {expected}")]
    StartLength { expected: usize, found: usize },
    #[error("at least one start is required")]
    NoStarts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    /// Maps a value to the minimisation frame and back (an involution).
    fn internal(self, v: f64) -> f64 {
        match self {
            Sense::Min => v,
            Sense::Max => -v,
        }
    }

    /// True when `a` is strictly better than `b` in this sense.
    pub fn better(self, a: f64, b: f64) -> bool {
        self.internal(a) < self.internal(b)
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Min => "min",
            Sense::Max => "max",
        })
    }
}

impl FromStr for Sense {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" => Ok(Sense::Min),
            "max" => Ok(Sense::Max),
            other => Err(format!("unknown sense `{other}` (expected min or max)")),
        }
    }
}

/// Order in which split points are visited during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepStrategy {
    LeftToRight,
    RightToLeft,
}

impl fmt::Display for SweepStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepStrategy::LeftToRight => "left-to-right",
            SweepStrategy::RightToLeft => "right-to-left",
        })
    }
}

impl FromStr for SweepStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left-to-right" | "ltr" => Ok(SweepStrategy::LeftToRight),
            "right-to-left" | "rtl" => Ok(SweepStrategy::RightToLeft),
            other => Err(format!(
                "unknown strategy `{other}` (expected left-to-right or right-to-left)"
            )),
        }
    }
}

/// Bound `<q, T_{w_1} ... T_{w_n} f>` to be minimised or maximised over
/// `w` in the feasible set.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    bounds: IntervalBounds,
    q: MassFunction,
    f: Gamble,
    steps: usize,
    sense: Sense,
    objective: Array1<f64>,
}

impl OptimizationProblem {
    pub fn new(
        bounds: IntervalBounds,
        q: MassFunction,
        f: Gamble,
        steps: usize,
        sense: Sense,
    ) -> Result<Self, SearchError> {
        bounds.ensure_valid()?;
        let s = bounds.num_states();
        if q.len() != s {
            return Err(SearchError::Dimension { what: "q", expected: s, found: q.len() });
        }
        if f.len() != s {
            return Err(SearchError::Dimension { what: "f", expected: s, found: f.len() });
        }
        if steps == 0 {
            return Err(SearchError::NoSteps);
        }
        let objective = match sense {
            Sense::Min => f.array().clone(),
            Sense::Max => -f.array(),
        };
        Ok(Self {
            bounds,
            q,
            f,
            steps,
            sense,
            objective,
        })
    }

    pub fn with_sense(&self, sense: Sense) -> Self {
        Self::new(self.bounds.clone(), self.q.clone(), self.f.clone(), self.steps, sense)
            .expect("already validated")
    }

    pub fn bounds(&self) -> &IntervalBounds {
        &self.bounds
    }

    pub fn q(&self) -> &MassFunction {
        &self.q
    }

    pub fn f(&self) -> &Gamble {
        &self.f
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    fn prefix(&self, steps: &[WeightFunction]) -> Array1<f64> {
        steps
            .iter()
            .fold(self.q.array().clone(), |q, w| push_left(&self.bounds, q.view(), w))
    }

    fn suffix(&self, steps: &[WeightFunction]) -> Array1<f64> {
        steps
            .iter()
            .rev()
            .fold(self.objective.clone(), |g, w| push_right(&self.bounds, w, g.view()))
    }

    fn internal_value(&self, steps: &[WeightFunction]) -> f64 {
        self.q.array().dot(&self.suffix(steps))
    }

    /// Objective of `wvec` in the problem's own sense (the plain expectation).
    pub fn value(&self, wvec: &WeightVector) -> f64 {
        self.sense.internal(self.internal_value(wvec.steps()))
    }
}

/// Best replacement for one step of a weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub weight: WeightFunction,
    pub selection: EdgeSelection,
    /// Objective after the replacement.
    pub value: f64,
}

/// Solves the one-step problem at `step` (0-based) with every other step of
/// `wvec` fixed.
pub fn improve_at(problem: &OptimizationProblem, wvec: &WeightVector, step: usize) -> Result<Improvement, SearchError> {
    let n = wvec.len();
    if n != problem.steps {
        return Err(SearchError::StartLength { expected: problem.steps, found: n });
    }
    if step >= n {
        return Err(SearchError::StepOutOfRange { step, steps: n });
    }
    let ql = problem.prefix(&wvec.steps()[..step]);
    let fr = problem.suffix(&wvec.steps()[step + 1..]);
    let selection = extremal_selection(&problem.bounds, slice(&ql), slice(&fr));
    let weight = WeightFunction::from_selection(&problem.bounds, &selection);
    let internal = ql.dot(&push_right(&problem.bounds, &weight, fr.view()));
    Ok(Improvement {
        weight,
        selection,
        value: problem.sense.internal(internal),
    })
}

/// Largest decrease of the (minimisation-frame) objective that a single
/// [`improve_at`] could still achieve; `<= tol` at a fixed point.
pub fn fixed_point_gap(problem: &OptimizationProblem, wvec: &WeightVector) -> Result<f64, SearchError> {
    let current = problem.internal_value(wvec.steps());
    let mut gap: f64 = 0.0;
    for k in 0..wvec.len() {
        let imp = improve_at(problem, wvec, k)?;
        gap = gap.max(current - problem.sense.internal(imp.value));
    }
    Ok(gap)
}

fn slice(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("owned arrays are contiguous")
}

/// Result of one local search run.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOptimum {
    pub selections: Vec<EdgeSelection>,
    pub schedule: WeightVector,
    pub value: f64,
    pub start_value: f64,
    /// Full passes over the split points, including the final pass that
    /// changed nothing.
    pub sweeps: usize,
    pub improvements: usize,
    /// Objective after snapping non-extremal start steps, then after every
    /// accepted replacement. Strictly decreasing for `Min`, increasing for
    /// `Max`.
    pub trace: Vec<f64>,
}

struct Descent<'a> {
    problem: &'a OptimizationProblem,
    steps: Vec<WeightFunction>,
    sels: Vec<EdgeSelection>,
    value: f64,
    trace: Vec<f64>,
    improvements: usize,
    tol: f64,
}

impl Descent<'_> {
    /// Tries to replace step `k` given its left mass `ql` and right gamble `fr`.
    fn try_step(&mut self, k: usize, ql: &Array1<f64>, fr: &Array1<f64>) -> bool {
        let bounds = &self.problem.bounds;
        let sel = extremal_selection(bounds, slice(ql), slice(fr));
        if sel == self.sels[k] {
            return false;
        }
        let current = ql.dot(&push_right(bounds, &self.steps[k], fr.view()));
        let w = WeightFunction::from_selection(bounds, &sel);
        let candidate = ql.dot(&push_right(bounds, &w, fr.view()));
        if candidate < current - self.tol * current.abs().max(1.0) {
            self.steps[k] = w;
            self.sels[k] = sel;
            self.value = candidate;
            self.trace.push(candidate);
            self.improvements += 1;
            true
        } else {
            false
        }
    }

    fn sweep_left_to_right(&mut self) -> usize {
        let n = self.steps.len();
        let bounds = &self.problem.bounds;
        // suffix[k] = T_{w_k..w_n} g; stays exact for indices > k during the pass
        let mut suffix = vec![self.problem.objective.clone(); n + 1];
        for k in (0..n).rev() {
            suffix[k] = push_right(bounds, &self.steps[k], suffix[k + 1].view());
        }
        let mut ql = self.problem.q.array().clone();
        let mut accepted = 0;
        for k in 0..n {
            if self.try_step(k, &ql, &suffix[k + 1]) {
                accepted += 1;
            }
            ql = push_left(&self.problem.bounds, ql.view(), &self.steps[k]);
        }
        accepted
    }

    fn sweep_right_to_left(&mut self) -> usize {
        let n = self.steps.len();
        let bounds = &self.problem.bounds;
        let mut prefix = vec![self.problem.q.array().clone(); n + 1];
        for k in 0..n {
            prefix[k + 1] = push_left(bounds, prefix[k].view(), &self.steps[k]);
        }
        let mut fr = self.problem.objective.clone();
        let mut accepted = 0;
        for k in (0..n).rev() {
            if self.try_step(k, &prefix[k], &fr) {
                accepted += 1;
            }
            fr = push_right(&self.problem.bounds, &self.steps[k], fr.view());
        }
        accepted
    }
}

/// Runs the split-point descent from `start` until a full sweep accepts no
/// replacement. A replacement is accepted only if it lowers the objective by
/// more than `tol * max(1, |value|)`.
///
/// Start steps that are not extremal are first replaced by their one-step
/// optimum, which never worsens the objective.
pub fn local_optimize(
    problem: &OptimizationProblem,
    start: &WeightVector,
    strategy: SweepStrategy,
    tol: f64,
) -> Result<LocalOptimum, SearchError> {
    let n = problem.steps;
    if start.len() != n {
        return Err(SearchError::StartLength { expected: n, found: start.len() });
    }
    let bounds = &problem.bounds;
    let mut steps = start.steps().to_vec();
    let start_internal = problem.internal_value(&steps);

    let mut sels = Vec::with_capacity(n);
    for k in 0..n {
        let sel = match selection_of(bounds, &steps[k]) {
            Some(sel) => sel,
            None => {
                let ql = problem.prefix(&steps[..k]);
                let fr = problem.suffix(&steps[k + 1..]);
                let sel = extremal_selection(bounds, slice(&ql), slice(&fr));
                steps[k] = WeightFunction::from_selection(bounds, &sel);
                sel
            }
        };
        sels.push(sel);
    }
    let value = problem.internal_value(&steps);

    let mut descent = Descent {
        problem,
        steps,
        sels,
        value,
        trace: vec![value],
        improvements: 0,
        tol,
    };
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let accepted = match strategy {
            SweepStrategy::LeftToRight => descent.sweep_left_to_right(),
            SweepStrategy::RightToLeft => descent.sweep_right_to_left(),
        };
        if accepted == 0 {
            break;
        }
    }

    let sense = problem.sense;
    Ok(LocalOptimum {
        selections: descent.sels,
        schedule: WeightVector::new(descent.steps),
        value: sense.internal(descent.value),
        start_value: sense.internal(start_internal),
        sweeps,
        improvements: descent.improvements,
        trace: descent.trace.into_iter().map(|v| sense.internal(v)).collect(),
    })
}

/// One extremal selection per step, each induced by a pair of independent
/// uniform random rankings of the states.
pub fn random_extremal_selections(bounds: &IntervalBounds, steps: usize, rng: &mut StreamRng) -> Vec<EdgeSelection> {
    let s = bounds.num_states();
    (0..steps)
        .map(|_| {
            let h = rng::permutation(rng, s);
            let f = rng::permutation(rng, s);
            selection_from_rankings(bounds, &h, &f)
        })
        .collect()
}

pub fn random_extremal_vector(bounds: &IntervalBounds, steps: usize, seed: u64) -> WeightVector {
    let mut rng = rng::substream(seed, &[]);
    selections_to_vector(bounds, &random_extremal_selections(bounds, steps, &mut rng))
}

pub fn selections_to_vector(bounds: &IntervalBounds, sels: &[EdgeSelection]) -> WeightVector {
    sels.iter().map(|s| WeightFunction::from_selection(bounds, s)).collect()
}

/// Distinct local extremum reached by one or more starts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremumRecord {
    pub selections: Vec<EdgeSelection>,
    pub value: f64,
    pub hits: usize,
    /// Index of the first start that reached it.
    pub first_start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub start_value: f64,
    pub value: f64,
    pub sweeps: usize,
    pub improvements: usize,
    /// Index into [`MultistartReport::unique_extrema`].
    pub extremum: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistartReport {
    pub sense: Sense,
    pub strategy: SweepStrategy,
    pub best: LocalOptimum,
    /// Ordered by first appearance.
    pub unique_extrema: Vec<ExtremumRecord>,
    /// One entry per start, in start order.
    pub runs: Vec<RunOutcome>,
    pub starts: usize,
    /// `None` when the starts were supplied explicitly.
    pub seed: Option<u64>,
}

impl MultistartReport {
    /// Distinct extremum values after merging values closer than `abs_tol`,
    /// sorted ascending.
    pub fn distinct_values(&self, abs_tol: f64) -> Vec<f64> {
        let mut values: Vec<f64> = self.unique_extrema.iter().map(|e| e.value).collect();
        values.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::new();
        for v in values {
            match out.last() {
                Some(last) if (v - last).abs() <= abs_tol => {}
                _ => out.push(v),
            }
        }
        out
    }
}

/// Absolute tolerance used when reporting distinct extremum values.
pub const VALUE_CLUSTER_TOL: f64 = 1e-9;

/// Local search from `starts` random extremal vectors. Start `i` is drawn
/// from substream `(seed, i)`, so the report does not depend on the number of
/// worker threads.
pub fn multistart(
    problem: &OptimizationProblem,
    starts: usize,
    seed: u64,
    strategy: SweepStrategy,
) -> Result<MultistartReport, SearchError> {
    if starts == 0 {
        return Err(SearchError::NoStarts);
    }
    let runs = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::substream(seed, &[i as u64]);
            let sels = random_extremal_selections(&problem.bounds, problem.steps, &mut rng);
            local_optimize(problem, &selections_to_vector(&problem.bounds, &sels), strategy, DEFAULT_TOL)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(problem.sense, strategy, runs, Some(seed)))
}

/// Local search from each of the given start vectors.
pub fn multistart_from(
    problem: &OptimizationProblem,
    starts: &[WeightVector],
    strategy: SweepStrategy,
) -> Result<MultistartReport, SearchError> {
    if starts.is_empty() {
        return Err(SearchError::NoStarts);
    }
    let runs = starts
        .par_iter()
        .map(|s| local_optimize(problem, s, strategy, DEFAULT_TOL))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(problem.sense, strategy, runs, None))
}

fn aggregate(sense: Sense, strategy: SweepStrategy, runs: Vec<LocalOptimum>, seed: Option<u64>) -> MultistartReport {
    let mut index: HashMap<Vec<EdgeSelection>, usize> = HashMap::new();
    let mut unique: Vec<ExtremumRecord> = Vec::new();
    let mut outcomes = Vec::with_capacity(runs.len());
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        let id = *index.entry(run.selections.clone()).or_insert_with(|| {
            unique.push(ExtremumRecord {
                selections: run.selections.clone(),
                value: run.value,
                hits: 0,
                first_start: i,
            });
            unique.len() - 1
        });
        unique[id].hits += 1;
        outcomes.push(RunOutcome {
            start_value: run.start_value,
            value: run.value,
            sweeps: run.sweeps,
            improvements: run.improvements,
            extremum: id,
        });
        if sense.better(run.value, runs[best].value) {
            best = i;
        }
    }
    let starts = runs.len();
    MultistartReport {
        sense,
        strategy,
        best: runs.into_iter().nth(best).expect("at least one run"),
        unique_extrema: unique,
        runs: outcomes,
        starts,
        seed,
    }
}
