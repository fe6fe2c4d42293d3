//! Exact bounds by exhaustive enumeration of extremal weight vectors.
//!
//! Optimal schedules can always be found among vectors whose every step is
//! extremal, so enumerating all `(2^e)^n` of them gives the exact minimum and
//! maximum. Only usable on small instances; requests beyond the configured
//! caps are refused rather than truncated.

use ndarray::Array1;
use rayon::prelude::*;
use thiserror::Error;

use crate::chain::{push_left, Gamble, MassFunction};
use crate::graph::{EdgeSelection, IntervalBounds, WeightFunction};

pub const DEFAULT_EDGE_CAP: usize = 20;
pub const DEFAULT_BUDGET: u128 = 1 << 24;
/// Longest argmin/argmax list kept in a result; the counts are always exact.
pub const MAX_LISTED_OPTIMA: usize = 1 << 16;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{edges} non-degenerate edges exceed the enumeration cap of {cap}")]
    TooManyEdges { edges: usize, cap: usize },
    #[error("{candidates} candidate weight vectors exceed the evaluation budget of {budget}")]
    BudgetExceeded { candidates: String, budget: u128 },
    #[error("q and f must have {expected} entries")]
    Dimension { expected: usize },
}

/// All `2^e` extremal weight functions in lexicographic selection order.
pub fn enumerate_extremal(
    bounds: &IntervalBounds,
    cap: usize,
) -> Result<Vec<(EdgeSelection, WeightFunction)>, OracleError> {
    let e = bounds.num_edges();
    if e > cap || e >= 64 {
        return Err(OracleError::TooManyEdges { edges: e, cap });
    }
    Ok((0..1u64 << e)
        .map(|i| {
            let sel = EdgeSelection::from_index(e, i);
            let w = WeightFunction::from_selection(bounds, &sel);
            (sel, w)
        })
        .collect())
}

/// Exact extrema of `<q, T_w f>` over all `n`-step extremal schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactBounds {
    pub min: f64,
    pub max: f64,
    /// Schedules within `1e-12 * max(1, |min|)` of the minimum, sorted
    /// canonically; at most [`MAX_LISTED_OPTIMA`] are listed.
    pub argmin: Vec<Vec<EdgeSelection>>,
    pub argmax: Vec<Vec<EdgeSelection>>,
    pub argmin_count: u64,
    pub argmax_count: u64,
    pub evaluated: u64,
}

/// Tie tolerance for argmin/argmax membership.
pub const TIE_TOL: f64 = 1e-12;

struct Enumerator<'a> {
    bounds: &'a IntervalBounds,
    candidates: Vec<WeightFunction>,
    f: &'a Array1<f64>,
    steps: usize,
}

#[derive(Default)]
struct Collected {
    count: u64,
    listed: Vec<Vec<usize>>,
}

impl Enumerator<'_> {
    fn extremes(&self, q: &Array1<f64>, depth: usize, out: &mut (f64, f64)) {
        if depth == self.steps {
            let v = q.dot(self.f);
            out.0 = out.0.min(v);
            out.1 = out.1.max(v);
            return;
        }
        for w in &self.candidates {
            self.extremes(&push_left(self.bounds, q.view(), w), depth + 1, out);
        }
    }

    fn collect(
        &self,
        q: &Array1<f64>,
        path: &mut Vec<usize>,
        keep: &impl Fn(f64) -> bool,
        out: &mut Collected,
    ) {
        if path.len() == self.steps {
            if keep(q.dot(self.f)) {
                out.count += 1;
                if out.listed.len() < MAX_LISTED_OPTIMA {
                    out.listed.push(path.clone());
                }
            }
            return;
        }
        for (i, w) in self.candidates.iter().enumerate() {
            path.push(i);
            self.collect(&push_left(self.bounds, q.view(), w), path, keep, out);
            path.pop();
        }
    }

    /// Runs `collect` on each first-step branch in parallel, merging in
    /// canonical order.
    fn collect_all(&self, q: &Array1<f64>, keep: impl Fn(f64) -> bool + Sync) -> Collected {
        let parts: Vec<Collected> = (0..self.candidates.len())
            .into_par_iter()
            .map(|i| {
                let mut out = Collected::default();
                let mut path = vec![i];
                let q1 = push_left(self.bounds, q.view(), &self.candidates[i]);
                self.collect(&q1, &mut path, &keep, &mut out);
                out
            })
            .collect();
        let mut merged = Collected::default();
        for p in parts {
            merged.count += p.count;
            let room = MAX_LISTED_OPTIMA - merged.listed.len();
            merged.listed.extend(p.listed.into_iter().take(room));
        }
        merged
    }
}

pub fn exact_bounds(
    bounds: &IntervalBounds,
    q: &MassFunction,
    f: &Gamble,
    steps: usize,
    edge_cap: usize,
    budget: u128,
) -> Result<ExactBounds, OracleError> {
    let s = bounds.num_states();
    if q.len() != s || f.len() != s {
        return Err(OracleError::Dimension { expected: s });
    }
    if steps == 0 {
        let v = q.dot(f);
        return Ok(ExactBounds {
            min: v,
            max: v,
            argmin: vec![vec![]],
            argmax: vec![vec![]],
            argmin_count: 1,
            argmax_count: 1,
            evaluated: 1,
        });
    }
    let e = bounds.num_edges();
    let exponent = e.checked_mul(steps).filter(|x| *x < 127);
    let candidates_total = exponent.map(|x| 1u128 << x);
    match candidates_total {
        Some(c) if c <= budget => {}
        _ => {
            return Err(OracleError::BudgetExceeded {
                candidates: format!("2^{}", e as u128 * steps as u128),
                budget,
            })
        }
    }
    let candidates = enumerate_extremal(bounds, edge_cap)?;
    let sels: Vec<EdgeSelection> = candidates.iter().map(|(s, _)| s.clone()).collect();
    let en = Enumerator {
        bounds,
        candidates: candidates.into_iter().map(|(_, w)| w).collect(),
        f: f.array(),
        steps,
    };

    let (min, max) = (0..en.candidates.len())
        .into_par_iter()
        .map(|i| {
            let mut out = (f64::INFINITY, f64::NEG_INFINITY);
            let q1 = push_left(bounds, q.array().view(), &en.candidates[i]);
            en.extremes(&q1, 1, &mut out);
            out
        })
        .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));

    let lo_cut = min + TIE_TOL * min.abs().max(1.0);
    let hi_cut = max - TIE_TOL * max.abs().max(1.0);
    let lows = en.collect_all(q.array(), |v| v <= lo_cut);
    let highs = en.collect_all(q.array(), |v| v >= hi_cut);
    let named = |paths: Vec<Vec<usize>>| -> Vec<Vec<EdgeSelection>> {
        paths
            .into_iter()
            .map(|p| p.into_iter().map(|i| sels[i].clone()).collect())
            .collect()
    };
    Ok(ExactBounds {
        min,
        max,
        argmin: named(lows.listed),
        argmax: named(highs.listed),
        argmin_count: lows.count,
        argmax_count: highs.count,
        evaluated: candidates_total.expect("checked") as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::example_one;
    use crate::graph::Bound;

    fn triangle() -> IntervalBounds {
        let lo = vec![vec![0.0, 0.1, 0.2], vec![0.1, 0.0, 0.3], vec![0.2, 0.3, 0.0]];
        let up = vec![vec![0.0, 0.2, 0.4], vec![0.2, 0.0, 0.5], vec![0.4, 0.5, 0.0]];
        IntervalBounds::from_rows(&lo, &up, &[1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn enumeration_sizes() {
        let all = enumerate_extremal(&example_one(), DEFAULT_EDGE_CAP).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].0.choices(), &[Bound::Lower]);
        assert_eq!(enumerate_extremal(&triangle(), DEFAULT_EDGE_CAP).unwrap().len(), 8);
        let degenerate = IntervalBounds::from_rows(
            &[vec![0.0, 0.3], vec![0.3, 0.0]],
            &[vec![0.0, 0.3], vec![0.3, 0.0]],
            &[1.0, 1.0],
        )
        .unwrap();
        assert_eq!(enumerate_extremal(&degenerate, DEFAULT_EDGE_CAP).unwrap().len(), 1);
        assert_eq!(
            enumerate_extremal(&triangle(), 2),
            Err(OracleError::TooManyEdges { edges: 3, cap: 2 })
        );
    }

    #[test]
    fn example_one_bounds() {
        let b = example_one();
        let q = MassFunction::new(vec![1.0, 0.0]).unwrap();
        let f = Gamble::new(vec![0.0, 1.0]).unwrap();
        let r = exact_bounds(&b, &q, &f, 2, DEFAULT_EDGE_CAP, DEFAULT_BUDGET).unwrap();
        assert!((r.min - 0.18).abs() < 1e-12);
        assert!((r.max - 0.74).abs() < 1e-12);
        assert_eq!(r.argmin_count, 1);
        assert_eq!(r.argmax_count, 2);
        assert_eq!(r.argmin[0][0].choices(), &[Bound::Upper]);

        let r = exact_bounds(&b, &q, &f, 1, DEFAULT_EDGE_CAP, DEFAULT_BUDGET).unwrap();
        assert!((r.min - 0.2).abs() < 1e-12);
        assert!((r.max - 0.9).abs() < 1e-12);
        assert_eq!(r.argmin, vec![vec![EdgeSelection::new(vec![Bound::Lower])]]);

        let r = exact_bounds(&b, &q, &f, 0, DEFAULT_EDGE_CAP, DEFAULT_BUDGET).unwrap();
        assert_eq!((r.min, r.max), (0.0, 0.0));
    }

    #[test]
    fn budget_refusal() {
        let q = MassFunction::new(vec![1.0, 0.0, 0.0]).unwrap();
        let f = Gamble::new(vec![0.0, 1.0, 2.0]).unwrap();
        let err = exact_bounds(&triangle(), &q, &f, 9, DEFAULT_EDGE_CAP, DEFAULT_BUDGET).unwrap_err();
        assert!(matches!(err, OracleError::BudgetExceeded { .. }));
        assert!(err.to_string().contains("16777216"));
    }

    #[test]
    fn all_ties_are_counted() {
        // q = pi makes every schedule give <pi, f>
        let b = triangle();
        let q = crate::chain::invariant_distribution(&b);
        let f = Gamble::new(vec![0.0, 1.0, 2.0]).unwrap();
        let r = exact_bounds(&b, &q, &f, 2, DEFAULT_EDGE_CAP, DEFAULT_BUDGET).unwrap();
        assert!((r.max - r.min).abs() < 1e-12);
        assert_eq!(r.argmin_count, 64);
        assert_eq!(r.argmin.len(), 64);
        let mut sorted = r.argmin.clone();
        sorted.sort();
        assert_eq!(sorted, r.argmin);
    }
}
