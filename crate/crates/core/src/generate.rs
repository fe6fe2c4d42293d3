//! Seeded random instances.
//!
//! Draw order for one instance (all from the substream of `seed`):
//! 1. adjacency: one uniform per unordered pair in lexicographic order,
//!    repeated until the graph is connected;
//! 2. per edge, lexicographically: `lower ~ Exp(lower_mean)`, then
//!    `X ~ Exp(width_mean)`, `upper = lower * (1 + X)`;
//! 3. `q(x) ~ Exp(qf_mean)` for every state, then `f(x)` likewise.
//!
//! `W(x) = (1 + marginal_slack) * sum_y upper(x,y)`, so every feasible weight
//! function has strictly positive loops.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Gamble, MassFunction};
use crate::graph::{IntervalBounds, ModelError, StateSpace};
use crate::instance::Instance;
use crate::rng;

pub const CONNECT_RETRIES: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("no connected graph after {0} attempts")]
    RetriesExhausted(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub vertices: usize,
    pub steps: usize,
    pub disconnect_fraction: f64,
    pub lower_mean: f64,
    pub width_mean: f64,
    pub qf_mean: f64,
    pub marginal_slack: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            vertices: 4,
            steps: 2,
            disconnect_fraction: 0.25,
            lower_mean: 0.8,
            width_mean: 1.0,
            qf_mean: 1.5,
            marginal_slack: 0.1,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn check(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidParams(m.to_string()));
        if self.vertices < 2 {
            return bad("vertices must be at least 2");
        }
        if !(0.0..1.0).contains(&self.disconnect_fraction) {
            return bad("disconnect_fraction must lie in [0, 1)");
        }
        if ![self.lower_mean, self.width_mean, self.qf_mean].iter().all(|m| m.is_finite() && *m > 0.0) {
            return bad("distribution means must be positive");
        }
        if !self.marginal_slack.is_finite() || self.marginal_slack <= 0.0 {
            return bad("marginal_slack must be positive");
        }
        Ok(())
    }
}

fn connected(adj: &Array2<bool>) -> bool {
    let s = adj.nrows();
    let mut seen = vec![false; s];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for y in 0..s {
            if adj[[x, y]] && !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen.into_iter().all(|v| v)
}

fn draw_adjacency<R: Rng>(rng: &mut R, params: &GenParams) -> Result<Array2<bool>, GenError> {
    let s = params.vertices;
    for _ in 0..CONNECT_RETRIES {
        let mut adj = Array2::from_elem((s, s), false);
        for a in 0..s {
            for b in a + 1..s {
                let present = rng.random::<f64>() >= params.disconnect_fraction;
                adj[[a, b]] = present;
                adj[[b, a]] = present;
            }
        }
        if connected(&adj) {
            return Ok(adj);
        }
    }
    Err(GenError::RetriesExhausted(CONNECT_RETRIES))
}

pub fn generate_instance(params: &GenParams) -> Result<Instance, GenError> {
    params.check()?;
    let s = params.vertices;
    let mut rng = rng::substream(params.seed, &[]);
    let adj = draw_adjacency(&mut rng, params)?;

    let mut lower = Array2::zeros((s, s));
    let mut upper = Array2::zeros((s, s));
    for a in 0..s {
        for b in a + 1..s {
            if adj[[a, b]] {
                let lo = rng::exponential(&mut rng, params.lower_mean);
                let up = lo * (1.0 + rng::exponential(&mut rng, params.width_mean));
                lower[[a, b]] = lo;
                lower[[b, a]] = lo;
                upper[[a, b]] = up;
                upper[[b, a]] = up;
            }
        }
    }
    let q: Vec<f64> = (0..s).map(|_| rng::exponential(&mut rng, params.qf_mean)).collect();
    let f: Vec<f64> = (0..s).map(|_| rng::exponential(&mut rng, params.qf_mean)).collect();
    let marginal: Array1<f64> = upper.rows().into_iter().map(|r| (1.0 + params.marginal_slack) * r.sum()).collect();

    let bounds = IntervalBounds::new_valid(StateSpace::numbered(s)?, lower, upper, marginal)?;
    Ok(Instance {
        bounds,
        q: MassFunction::new(q).expect("finite draws"),
        f: Gamble::new(f).expect("finite draws"),
        steps: params.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let p = GenParams { vertices: 4, seed: 7, ..Default::default() };
        assert_eq!(generate_instance(&p).unwrap(), generate_instance(&p).unwrap());
        let other = GenParams { seed: 8, ..p.clone() };
        assert_ne!(generate_instance(&p).unwrap(), generate_instance(&other).unwrap());
    }

    #[test]
    fn always_valid_with_positive_loops() {
        for seed in 0..200 {
            let p = GenParams { vertices: 2 + (seed as usize % 7), seed, ..Default::default() };
            let inst = generate_instance(&p).unwrap();
            let report = inst.bounds.validate();
            assert!(report.is_valid(), "seed {seed}: {report}");
            assert!(report.warnings.is_empty());
            let b = &inst.bounds;
            for x in 0..b.num_states() {
                assert!(b.min_loop(x) > 0.0);
                for y in 0..b.num_states() {
                    assert!(b.lower(x, y) <= b.upper(x, y));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        let p = GenParams { vertices: 1, ..Default::default() };
        assert!(matches!(generate_instance(&p), Err(GenError::InvalidParams(_))));
        let p = GenParams { disconnect_fraction: 1.0, ..Default::default() };
        assert!(generate_instance(&p).is_err());
        let p = GenParams { marginal_slack: 0.0, ..Default::default() };
        assert!(generate_instance(&p).is_err());
    }

    #[test]
    fn retry_cap_is_reported() {
        let p = GenParams { vertices: 8, disconnect_fraction: 0.999, ..Default::default() };
        assert_eq!(generate_instance(&p), Err(GenError::RetriesExhausted(CONNECT_RETRIES)));
    }
}
