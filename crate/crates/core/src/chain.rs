//! Transition operators induced by weight functions.
//!
//! `T_w f(x) = sum_y w(x,y)/W(x) f(y)` acts on gambles from the left of the
//! matrix, `q T_w(y) = sum_x q(x) w(x,y)/W(x)` acts on mass functions from the
//! right. Products over a [`WeightVector`] compose step by step.

use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

use crate::graph::{approx_eq, IntervalBounds, WeightFunction, REL_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("{what} has a non-finite entry at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("not a probability mass function: {0}")]
    NotProbability(String),
    #[error("transition matrix row {row} is not stochastic")]
    NotStochastic { row: usize },
    #[error("a state path needs at least 2 states, got {0}")]
    PathTooShort(usize),
    #[error("state index {0} is out of range")]
    StateOutOfRange(usize),
}

fn finite(what: &'static str, values: &[f64]) -> Result<(), ChainError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(ChainError::NonFinite { what, index }),
        None => Ok(()),
    }
}

/// State-indexed mass, either a probability mass function or a general
/// signed vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    values: Array1<f64>,
    probability: bool,
}

impl MassFunction {
    pub fn new(values: Vec<f64>) -> Result<Self, ChainError> {
        finite("mass function", &values)?;
        Ok(Self {
            values: Array1::from(values),
            probability: false,
        })
    }

    /// A mass function flagged as a probability distribution: non-negative
    /// entries summing to 1 within `1e-12`.
    pub fn probability(values: Vec<f64>) -> Result<Self, ChainError> {
        finite("probability mass function", &values)?;
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(ChainError::NotProbability(format!("negative entry {v}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > REL_TOL {
            return Err(ChainError::NotProbability(format!("entries sum to {sum}")));
        }
        Ok(Self {
            values: Array1::from(values),
            probability: true,
        })
    }

    pub(crate) fn from_array(values: Array1<f64>) -> Self {
        Self {
            values,
            probability: false,
        }
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    pub fn values(&self) -> &[f64] {
        self.values.as_slice().expect("contiguous")
    }

    pub fn array(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `<q, f>`.
    pub fn dot(&self, f: &Gamble) -> f64 {
        self.values.dot(&f.values)
    }
}

/// Real-valued function on the states.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamble {
    values: Array1<f64>,
}

impl Gamble {
    pub fn new(values: Vec<f64>) -> Result<Self, ChainError> {
        finite("gamble", &values)?;
        Ok(Self {
            values: Array1::from(values),
        })
    }

    pub(crate) fn from_array(values: Array1<f64>) -> Self {
        Self { values }
    }

    /// Indicator of state `x` on `s` states.
    pub fn indicator(s: usize, x: usize) -> Self {
        let mut values = Array1::zeros(s);
        values[x] = 1.0;
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        self.values.as_slice().expect("contiguous")
    }

    pub fn array(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self {
            values: -&self.values,
        }
    }
}

/// Row-stochastic matrix `P_w(x,y) = w(x,y)/W(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Array2<f64>,
}

impl TransitionMatrix {
    /// Wraps an arbitrary row-stochastic matrix. Not necessarily induced by
    /// any weight function.
    pub fn from_rows(rows: Array2<f64>) -> Result<Self, ChainError> {
        for (x, row) in rows.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) || !approx_eq(row.sum(), 1.0, 1.0) {
                return Err(ChainError::NotStochastic { row: x });
            }
        }
        Ok(Self { rows })
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.rows[[x, y]]
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    /// `max_{x,y} |pi(x) P(x,y) - pi(y) P(y,x)|`.
    pub fn detailed_balance_residual(&self, pi: &MassFunction) -> f64 {
        let s = self.rows.nrows();
        let mut worst: f64 = 0.0;
        for x in 0..s {
            for y in x + 1..s {
                let flow = pi.values[x] * self.rows[[x, y]] - pi.values[y] * self.rows[[y, x]];
                worst = worst.max(flow.abs());
            }
        }
        worst
    }
}

/// Ordered weight functions, one per time step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightVector(Vec<WeightFunction>);

impl WeightVector {
    pub fn new(steps: Vec<WeightFunction>) -> Self {
        Self(steps)
    }

    pub fn steps(&self) -> &[WeightFunction] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&WeightFunction> {
        self.0.get(k)
    }

    pub fn replace(&mut self, k: usize, w: WeightFunction) -> WeightFunction {
        std::mem::replace(&mut self.0[k], w)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, WeightFunction> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<WeightFunction> {
        self.0
    }
}

impl FromIterator<WeightFunction> for WeightVector {
    fn from_iter<I: IntoIterator<Item = WeightFunction>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub(crate) fn push_right(bounds: &IntervalBounds, w: &WeightFunction, f: ArrayView1<f64>) -> Array1<f64> {
    w.matrix().dot(&f) / bounds.marginals()
}

pub(crate) fn push_left(bounds: &IntervalBounds, q: ArrayView1<f64>, w: &WeightFunction) -> Array1<f64> {
    let h = &q / bounds.marginals();
    h.dot(w.matrix())
}

pub fn transition_matrix(bounds: &IntervalBounds, w: &WeightFunction) -> TransitionMatrix {
    let marg = bounds.marginals();
    let rows = Array2::from_shape_fn(w.matrix().dim(), |(x, y)| w.weight(x, y) / marg[x]);
    TransitionMatrix { rows }
}

/// `T_w f`.
pub fn apply_right(bounds: &IntervalBounds, w: &WeightFunction, f: &Gamble) -> Gamble {
    Gamble::from_array(push_right(bounds, w, f.values.view()))
}

/// `q T_w`.
pub fn apply_left(bounds: &IntervalBounds, q: &MassFunction, w: &WeightFunction) -> MassFunction {
    MassFunction::from_array(push_left(bounds, q.values.view(), w))
}

/// `<q, T_{w_1} ... T_{w_n} f>`, evaluated right to left; the empty vector
/// gives `<q, f>`.
pub fn expectation(bounds: &IntervalBounds, q: &MassFunction, wvec: &WeightVector, f: &Gamble) -> f64 {
    let g = wvec
        .iter()
        .rev()
        .fold(f.values.clone(), |g, w| push_right(bounds, w, g.view()));
    q.values.dot(&g)
}

/// `pi(x) = W(x) / W`, shared by every feasible weight function.
pub fn invariant_distribution(bounds: &IntervalBounds) -> MassFunction {
    MassFunction {
        values: bounds.marginals() / bounds.total(),
        probability: true,
    }
}

pub fn detailed_balance_residual(bounds: &IntervalBounds, w: &WeightFunction) -> f64 {
    transition_matrix(bounds, w).detailed_balance_residual(&invariant_distribution(bounds))
}

/// Lower probability of observing `path` from the invariant distribution:
/// the product of the smallest attainable weights along the path divided by
/// `W` times the masses of the interior states. Loop steps use
/// [`IntervalBounds::min_loop`].
pub fn sequence_lower_probability(bounds: &IntervalBounds, path: &[usize]) -> Result<f64, ChainError> {
    if path.len() < 2 {
        return Err(ChainError::PathTooShort(path.len()));
    }
    if let Some(&x) = path.iter().find(|&&x| x >= bounds.num_states()) {
        return Err(ChainError::StateOutOfRange(x));
    }
    let numerator: f64 = path
        .windows(2)
        .map(|p| {
            if p[0] == p[1] {
                bounds.min_loop(p[0])
            } else {
                bounds.lower(p[0], p[1])
            }
        })
        .product();
    let interior: f64 = path[1..path.len() - 1].iter().map(|&x| bounds.marginal(x)).product();
    Ok(numerator / (bounds.total() * interior))
}
