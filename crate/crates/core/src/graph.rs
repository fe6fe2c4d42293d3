//! Interval weight model.
//!
//! A graph on `s` states carries symmetric off-diagonal weight intervals
//! `[lower(x,y), upper(x,y)]` and a fixed weight mass `W(x)` per state. A
//! concrete [`WeightFunction`] picks one weight per edge inside its interval;
//! the residual `W(x) - sum_y w(x,y)` sits on the loop at `x`.
//!
//! Extremal weight functions put every non-degenerate edge at one of its
//! endpoints and are identified by an [`EdgeSelection`].

use std::collections::{HashSet, VecDeque};
use std::fmt;

use ndarray::{Array1, Array2};
use serde::Serialize;
use thiserror::Error;

/// Relative tolerance for equality of weights and for invariant checks.
pub const REL_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn approx_eq(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= REL_TOL * scale.max(a.abs()).max(b.abs())
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("need at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("duplicate state label `{0}`")]
    DuplicateLabel(String),
    #[error("{what}: expected {expected} entries, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} has a non-finite entry at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("{what} has a non-zero diagonal entry at state {state} (loops are derived, not input)")]
    NonZeroDiagonal { what: &'static str, state: usize },
    #[error("invalid interval bounds:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("weight matrix is {found}x{found}, expected {expected}x{expected}")]
    Shape { expected: usize, found: usize },
    #[error("weight ({a},{b}) is not finite")]
    NonFinite { a: usize, b: usize },
    #[error("weights ({a},{b}) and ({b},{a}) differ")]
    Asymmetric { a: usize, b: usize },
    #[error("weight ({a},{b}) = {value} lies outside its interval")]
    OutOfInterval { a: usize, b: usize, value: f64 },
    #[error("loop weight at state {state} would be negative ({value})")]
    NegativeLoop { state: usize, value: f64 },
}

/// Ordered, labelled set of states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self, ModelError> {
        if labels.len() < 2 {
            return Err(ModelError::TooFewStates(labels.len()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(ModelError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// States labelled `1..=s`.
    pub fn numbered(s: usize) -> Result<Self, ModelError> {
        Self::new((1..=s).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Unordered edge `{a, b}` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    Symmetry,
    Order,
    Feasibility,
    Convention,
    Connectivity,
    Positivity,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Symmetry => "SYMMETRY",
            ViolationKind::Order => "ORDER",
            ViolationKind::Feasibility => "FEASIBILITY",
            ViolationKind::Convention => "CONVENTION",
            ViolationKind::Connectivity => "CONNECTIVITY",
            ViolationKind::Positivity => "POSITIVITY",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Location {
    State(usize),
    Pair(usize, usize),
    /// Number of connected components of the positive-lower-weight graph.
    Components(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::State(x) => write!(f, "state {}", x + 1),
            Location::Pair(x, y) => write!(f, "pair ({},{})", x + 1, y + 1),
            Location::Components(c) => write!(f, "{c} components"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: Location,
}

/// Non-fatal finding: a state whose loop weight can reach zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroLoopWarning {
    pub state: usize,
    pub min_loop: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<ZeroLoopWarning>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "valid")?;
        }
        for v in &self.violations {
            writeln!(f, "{} at {}", v.kind, v.location)?;
        }
        for w in &self.warnings {
            writeln!(
                f,
                "warning: loop at state {} can drop to {} (no strictly positive loop)",
                w.state + 1,
                w.min_loop
            )?;
        }
        Ok(())
    }
}

/// Interval weights plus fixed per-state weight mass.
///
/// Construction checks only shapes and finiteness; [`IntervalBounds::validate`]
/// checks the model constraints. Every other operation assumes valid bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBounds {
    states: StateSpace,
    lower: Array2<f64>,
    upper: Array2<f64>,
    marginal: Array1<f64>,
    total: f64,
    edges: Vec<Edge>,
}

fn check_matrix(what: &'static str, m: &Array2<f64>, s: usize) -> Result<(), ModelError> {
    let (r, c) = m.dim();
    if r != s {
        return Err(ModelError::Dimension { what, expected: s, found: r });
    }
    if c != s {
        return Err(ModelError::Dimension { what, expected: s, found: c });
    }
    if let Some(index) = m.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite { what, index });
    }
    for x in 0..s {
        if m[[x, x]] != 0.0 {
            return Err(ModelError::NonZeroDiagonal { what, state: x });
        }
    }
    Ok(())
}

impl IntervalBounds {
    pub fn new(
        states: StateSpace,
        lower: Array2<f64>,
        upper: Array2<f64>,
        marginal: Array1<f64>,
    ) -> Result<Self, ModelError> {
        let s = states.len();
        check_matrix("lower", &lower, s)?;
        check_matrix("upper", &upper, s)?;
        if marginal.len() != s {
            return Err(ModelError::Dimension {
                what: "marginal",
                expected: s,
                found: marginal.len(),
            });
        }
        if let Some(index) = marginal.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { what: "marginal", index });
        }
        let mut edges = Vec::new();
        for a in 0..s {
            for b in a + 1..s {
                if lower[[a, b]] < upper[[a, b]] {
                    edges.push(Edge { a, b });
                }
            }
        }
        let total = marginal.sum();
        Ok(Self {
            states,
            lower,
            upper,
            marginal,
            total,
            edges,
        })
    }

    /// Builds bounds from nested rows with states labelled `1..=s`.
    pub fn from_rows(
        lower: &[Vec<f64>],
        upper: &[Vec<f64>],
        marginal: &[f64],
    ) -> Result<Self, ModelError> {
        let states = StateSpace::numbered(marginal.len())?;
        Self::new(
            states,
            rows_to_array("lower", lower, marginal.len())?,
            rows_to_array("upper", upper, marginal.len())?,
            Array1::from(marginal.to_vec()),
        )
    }

    /// Same as [`IntervalBounds::new`] but rejects bounds that fail validation.
    pub fn new_valid(
        states: StateSpace,
        lower: Array2<f64>,
        upper: Array2<f64>,
        marginal: Array1<f64>,
    ) -> Result<Self, ModelError> {
        let b = Self::new(states, lower, upper, marginal)?;
        b.ensure_valid()?;
        Ok(b)
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn lower(&self, x: usize, y: usize) -> f64 {
        self.lower[[x, y]]
    }

    pub fn upper(&self, x: usize, y: usize) -> f64 {
        self.upper[[x, y]]
    }

    pub fn lower_matrix(&self) -> &Array2<f64> {
        &self.lower
    }

    pub fn upper_matrix(&self) -> &Array2<f64> {
        &self.upper
    }

    pub fn marginal(&self, x: usize) -> f64 {
        self.marginal[x]
    }

    pub fn marginals(&self) -> &Array1<f64> {
        &self.marginal
    }

    /// `W = sum_x W(x)`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Non-degenerate edges (`lower < upper`) in lexicographic order. This is
    /// the index set of every [`EdgeSelection`].
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Smallest attainable loop weight, `max(0, W(x) - sum_{y != x} upper(x,y))`.
    pub fn min_loop(&self, x: usize) -> f64 {
        (self.marginal[x] - self.upper.row(x).sum()).max(0.0)
    }

    pub fn validate(&self) -> ValidationReport {
        let s = self.num_states();
        let mut report = ValidationReport::default();
        let mut push = |kind, location| report.violations.push(Violation { kind, location });

        for x in 0..s {
            if self.marginal[x] <= 0.0 {
                push(ViolationKind::Positivity, Location::State(x));
            }
        }
        for x in 0..s {
            for y in x + 1..s {
                let (lo, lo_t) = (self.lower[[x, y]], self.lower[[y, x]]);
                let (up, up_t) = (self.upper[[x, y]], self.upper[[y, x]]);
                if lo < 0.0 || lo_t < 0.0 || up < 0.0 || up_t < 0.0 {
                    push(ViolationKind::Positivity, Location::Pair(x, y));
                }
                if !approx_eq(lo, lo_t, 0.0) || !approx_eq(up, up_t, 0.0) {
                    push(ViolationKind::Symmetry, Location::Pair(x, y));
                }
                if lo > up || lo_t > up_t {
                    push(ViolationKind::Order, Location::Pair(x, y));
                }
                if (up > 0.0 && lo <= 0.0) || (up_t > 0.0 && lo_t <= 0.0) {
                    push(ViolationKind::Convention, Location::Pair(x, y));
                }
            }
        }
        for x in 0..s {
            let w = self.marginal[x];
            let sum_up = self.upper.row(x).sum();
            if sum_up > w && !approx_eq(sum_up, w, 0.0) {
                push(ViolationKind::Feasibility, Location::State(x));
            }
        }
        let components = self.count_components();
        if components > 1 {
            push(ViolationKind::Connectivity, Location::Components(components));
        }

        for x in 0..s {
            let min_loop = self.marginal[x] - self.upper.row(x).sum();
            if min_loop <= REL_TOL * self.marginal[x].abs() {
                report.warnings.push(ZeroLoopWarning {
                    state: x,
                    min_loop: min_loop.max(0.0),
                });
            }
        }
        report
    }

    pub fn ensure_valid(&self) -> Result<(), ModelError> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(ModelError::Invalid(report))
        }
    }

    fn count_components(&self) -> usize {
        let s = self.num_states();
        let mut seen = vec![false; s];
        let mut components = 0;
        for root in 0..s {
            if seen[root] {
                continue;
            }
            components += 1;
            seen[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(x) = queue.pop_front() {
                for y in 0..s {
                    if !seen[y] && y != x && (self.lower[[x, y]] > 0.0 || self.lower[[y, x]] > 0.0) {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
        }
        components
    }
}

pub(crate) fn rows_to_array(
    what: &'static str,
    rows: &[Vec<f64>],
    s: usize,
) -> Result<Array2<f64>, ModelError> {
    if rows.len() != s {
        return Err(ModelError::Dimension { what, expected: s, found: rows.len() });
    }
    let mut m = Array2::zeros((s, s));
    for (x, row) in rows.iter().enumerate() {
        if row.len() != s {
            return Err(ModelError::Dimension { what, expected: s, found: row.len() });
        }
        for (y, v) in row.iter().enumerate() {
            m[[x, y]] = *v;
        }
    }
    Ok(m)
}

/// Endpoint chosen for one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bound {
    Lower,
    Upper,
}

/// Endpoint choice for every non-degenerate edge, indexed like
/// [`IntervalBounds::edges`]. Equal selections denote equal weight functions,
/// so this is the canonical key for extremal weight functions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeSelection(Vec<Bound>);

impl EdgeSelection {
    pub fn new(choices: Vec<Bound>) -> Self {
        Self(choices)
    }

    pub fn uniform(bound: Bound, edges: usize) -> Self {
        Self(vec![bound; edges])
    }

    /// The `index`-th selection in lexicographic order (`Lower < Upper`, first
    /// edge most significant).
    pub fn from_index(edges: usize, index: u64) -> Self {
        Self(
            (0..edges)
                .map(|j| {
                    if (index >> (edges - 1 - j)) & 1 == 1 {
                        Bound::Upper
                    } else {
                        Bound::Lower
                    }
                })
                .collect(),
        )
    }

    pub fn choices(&self) -> &[Bound] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for EdgeSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for b in &self.0 {
            f.write_str(match b {
                Bound::Lower => "L",
                Bound::Upper => "U",
            })?;
        }
        Ok(())
    }
}

/// One symmetric weight assignment in the feasible set. The full matrix is
/// stored, with loop weights on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    weights: Array2<f64>,
}

impl WeightFunction {
    /// Checks an off-diagonal assignment against `bounds` and derives loops.
    /// The diagonal of `offdiag` is ignored.
    pub fn from_offdiag(bounds: &IntervalBounds, offdiag: &Array2<f64>) -> Result<Self, WeightError> {
        let s = bounds.num_states();
        let (r, c) = offdiag.dim();
        if r != s || c != s {
            return Err(WeightError::Shape { expected: s, found: r.max(c) });
        }
        let mut weights = offdiag.clone();
        for x in 0..s {
            weights[[x, x]] = 0.0;
        }
        for a in 0..s {
            for b in 0..s {
                if a == b {
                    continue;
                }
                let v = weights[[a, b]];
                if !v.is_finite() {
                    return Err(WeightError::NonFinite { a, b });
                }
                if !approx_eq(v, weights[[b, a]], 0.0) {
                    return Err(WeightError::Asymmetric { a, b });
                }
                let (lo, up) = (bounds.lower(a, b), bounds.upper(a, b));
                if (v < lo && !approx_eq(v, lo, 0.0)) || (v > up && !approx_eq(v, up, 0.0)) {
                    return Err(WeightError::OutOfInterval { a, b, value: v });
                }
            }
        }
        Self::with_loops(bounds, weights)
    }

    fn with_loops(bounds: &IntervalBounds, mut weights: Array2<f64>) -> Result<Self, WeightError> {
        for x in 0..bounds.num_states() {
            let w = bounds.marginal(x);
            let residual = w - weights.row(x).sum();
            if residual < -REL_TOL * w {
                return Err(WeightError::NegativeLoop { state: x, value: residual });
            }
            weights[[x, x]] = residual.max(0.0);
        }
        Ok(Self { weights })
    }

    /// Extremal weight function of `sel`; degenerate edges sit at their
    /// (single) value.
    ///
    /// # Panics
    /// If `sel` does not have one entry per non-degenerate edge, or if the
    /// bounds are infeasible.
    pub fn from_selection(bounds: &IntervalBounds, sel: &EdgeSelection) -> Self {
        assert_eq!(
            sel.len(),
            bounds.num_edges(),
            "selection has {} entries but bounds have {} non-degenerate edges",
            sel.len(),
            bounds.num_edges()
        );
        let mut weights = bounds.lower_matrix().clone();
        for (edge, choice) in bounds.edges().iter().zip(sel.choices()) {
            if *choice == Bound::Upper {
                let v = bounds.upper(edge.a, edge.b);
                weights[[edge.a, edge.b]] = v;
                weights[[edge.b, edge.a]] = v;
            }
        }
        Self::with_loops(bounds, weights).expect("feasible bounds give non-negative loops")
    }

    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.weights[[x, y]]
    }

    pub fn loop_weight(&self, x: usize) -> f64 {
        self.weights[[x, x]]
    }

    /// Full weight matrix including loops.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn num_states(&self) -> usize {
        self.weights.nrows()
    }

    /// Re-checks every invariant against `bounds`.
    pub fn check(&self, bounds: &IntervalBounds) -> Result<(), WeightError> {
        let again = Self::from_offdiag(bounds, &self.weights)?;
        for x in 0..self.num_states() {
            let w = bounds.marginal(x);
            let row: f64 = self.weights.row(x).sum();
            if !approx_eq(row, w, w) || !approx_eq(again.loop_weight(x), self.loop_weight(x), w) {
                return Err(WeightError::NegativeLoop {
                    state: x,
                    value: self.loop_weight(x),
                });
            }
        }
        Ok(())
    }
}

/// Shorthand for [`WeightFunction::from_selection`].
pub fn weight_from_selection(bounds: &IntervalBounds, sel: &EdgeSelection) -> WeightFunction {
    WeightFunction::from_selection(bounds, sel)
}

/// `psi(x,y) = (h(x) - h(y)) (f(y) - f(x))` with `h = q / W`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiField {
    values: Array2<f64>,
}

impl PsiField {
    fn from_scaled(h: &[f64], f: &[f64]) -> Self {
        let s = h.len();
        let values = Array2::from_shape_fn((s, s), |(x, y)| (h[x] - h[y]) * (f[y] - f[x]));
        Self { values }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[[x, y]]
    }

    /// Lower endpoint where `psi > 0`, upper where `psi <= 0`.
    pub fn selection(&self, bounds: &IntervalBounds) -> EdgeSelection {
        EdgeSelection(
            bounds
                .edges()
                .iter()
                .map(|e| {
                    if self.values[[e.a, e.b]] > 0.0 {
                        Bound::Lower
                    } else {
                        Bound::Upper
                    }
                })
                .collect(),
        )
    }
}

/// # Panics
/// If `q` or `f` does not have one entry per state.
pub fn psi_field(bounds: &IntervalBounds, q: &[f64], f: &[f64]) -> PsiField {
    let s = bounds.num_states();
    assert!(q.len() == s && f.len() == s, "q and f must have {s} entries");
    let h: Vec<f64> = q.iter().zip(bounds.marginals()).map(|(q, w)| q / w).collect();
    PsiField::from_scaled(&h, f)
}

/// Selection and weight function minimising the one-step expectation
/// `<q, T_w f>` over the feasible set.
pub fn extremal_weight(bounds: &IntervalBounds, q: &[f64], f: &[f64]) -> (WeightFunction, EdgeSelection) {
    let sel = extremal_selection(bounds, q, f);
    (WeightFunction::from_selection(bounds, &sel), sel)
}

pub fn extremal_selection(bounds: &IntervalBounds, q: &[f64], f: &[f64]) -> EdgeSelection {
    psi_field(bounds, q, f).selection(bounds)
}

/// Selection induced directly by two state rankings, `psi(x,y) =
/// (rank_h(x) - rank_h(y)) (rank_f(y) - rank_f(x))`.
pub(crate) fn selection_from_rankings(bounds: &IntervalBounds, h: &[usize], f: &[usize]) -> EdgeSelection {
    EdgeSelection(
        bounds
            .edges()
            .iter()
            .map(|e| {
                let dh = h[e.a] as i64 - h[e.b] as i64;
                let df = f[e.b] as i64 - f[e.a] as i64;
                if dh * df > 0 {
                    Bound::Lower
                } else {
                    Bound::Upper
                }
            })
            .collect(),
    )
}

/// The selection reproducing `w`, or `None` when some non-degenerate edge
/// sits strictly inside its interval.
pub fn selection_of(bounds: &IntervalBounds, w: &WeightFunction) -> Option<EdgeSelection> {
    bounds
        .edges()
        .iter()
        .map(|e| {
            let v = w.weight(e.a, e.b);
            if approx_eq(v, bounds.lower(e.a, e.b), 0.0) {
                Some(Bound::Lower)
            } else if approx_eq(v, bounds.upper(e.a, e.b), 0.0) {
                Some(Bound::Upper)
            } else {
                None
            }
        })
        .collect::<Option<Vec<_>>>()
        .map(EdgeSelection)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::array;

    pub(crate) fn example_one() -> IntervalBounds {
        IntervalBounds::from_rows(
            &[vec![0.0, 0.2], vec![0.2, 0.0]],
            &[vec![0.0, 0.9], vec![0.9, 0.0]],
            &[1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn example_one_is_valid() {
        let report = example_one().validate();
        assert!(report.is_valid(), "{report}");
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn infeasible_marginal() {
        let b = IntervalBounds::from_rows(
            &[vec![0.0, 0.2], vec![0.2, 0.0]],
            &[vec![0.0, 0.9], vec![0.9, 0.0]],
            &[0.5, 1.0],
        )
        .unwrap();
        let r = b.validate();
        assert_eq!(
            r.violations,
            vec![Violation {
                kind: ViolationKind::Feasibility,
                location: Location::State(0)
            }]
        );
    }

    #[test]
    fn convention_violation() {
        // the only edge has lower 0, so the graph is also disconnected
        let b = IntervalBounds::from_rows(
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
            &[vec![0.0, 0.5], vec![0.5, 0.0]],
            &[1.0, 1.0],
        )
        .unwrap();
        let r = b.validate();
        assert!(r.violations.contains(&Violation {
            kind: ViolationKind::Convention,
            location: Location::Pair(0, 1)
        }));
        assert!(r.has(ViolationKind::Connectivity));
    }

    #[test]
    fn two_components() {
        let mut lo = vec![vec![0.0; 4]; 4];
        let mut up = vec![vec![0.0; 4]; 4];
        for (a, b) in [(0, 1), (2, 3)] {
            lo[a][b] = 0.1;
            lo[b][a] = 0.1;
            up[a][b] = 0.3;
            up[b][a] = 0.3;
        }
        let b = IntervalBounds::from_rows(&lo, &up, &[1.0; 4]).unwrap();
        let r = b.validate();
        assert_eq!(
            r.violations,
            vec![Violation {
                kind: ViolationKind::Connectivity,
                location: Location::Components(2)
            }]
        );
    }

    #[test]
    fn symmetry_order_positivity() {
        let b = IntervalBounds::from_rows(
            &[vec![0.0, 0.2, 0.1], vec![0.3, 0.0, 0.5], vec![0.1, 0.5, 0.0]],
            &[vec![0.0, 0.4, 0.2], vec![0.4, 0.0, 0.4], vec![0.2, 0.4, 0.0]],
            &[1.0, 1.0, -1.0],
        )
        .unwrap();
        let r = b.validate();
        assert!(r.violations.contains(&Violation {
            kind: ViolationKind::Symmetry,
            location: Location::Pair(0, 1)
        }));
        assert!(r.violations.contains(&Violation {
            kind: ViolationKind::Order,
            location: Location::Pair(1, 2)
        }));
        assert!(r.violations.contains(&Violation {
            kind: ViolationKind::Positivity,
            location: Location::State(2)
        }));
    }

    #[test]
    fn structural_errors() {
        let err = IntervalBounds::from_rows(&[vec![0.0, 0.2]], &[vec![0.0, 0.9], vec![0.9, 0.0]], &[1.0, 1.0]);
        assert!(matches!(err, Err(ModelError::Dimension { what: "lower", .. })));
        let err = IntervalBounds::from_rows(
            &[vec![0.1, 0.2], vec![0.2, 0.0]],
            &[vec![0.0, 0.9], vec![0.9, 0.0]],
            &[1.0, 1.0],
        );
        assert!(matches!(err, Err(ModelError::NonZeroDiagonal { .. })));
        assert!(matches!(StateSpace::numbered(1), Err(ModelError::TooFewStates(1))));
        assert!(matches!(
            StateSpace::new(vec!["a".into(), "a".into()]),
            Err(ModelError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn zero_loop_is_a_warning() {
        let b = IntervalBounds::from_rows(
            &[vec![0.0, 0.2], vec![0.2, 0.0]],
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
            &[1.0, 1.0],
        )
        .unwrap();
        let r = b.validate();
        assert!(r.is_valid());
        assert_eq!(r.warnings.len(), 2);
    }

    #[test]
    fn example_one_extremal_functions() {
        let b = example_one();
        let w = weight_from_selection(&b, &EdgeSelection::new(vec![Bound::Upper]));
        let expected = array![[0.1, 0.9], [0.9, 0.1]];
        assert!(w.matrix().iter().zip(expected.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
        let w2 = weight_from_selection(&b, &EdgeSelection::new(vec![Bound::Lower]));
        assert!((w2.loop_weight(0) - 0.8).abs() < 1e-15);
        assert_eq!(w2.weight(0, 1), 0.2);
        assert!(w.check(&b).is_ok() && w2.check(&b).is_ok());
    }

    #[test]
    fn degenerate_bounds_have_one_function() {
        let b = IntervalBounds::from_rows(
            &[vec![0.0, 0.3], vec![0.3, 0.0]],
            &[vec![0.0, 0.3], vec![0.3, 0.0]],
            &[1.0, 2.0],
        )
        .unwrap();
        assert_eq!(b.num_edges(), 0);
        let w = weight_from_selection(&b, &EdgeSelection::new(vec![]));
        assert_eq!(w.loop_weight(1), 1.7);
        assert_eq!(selection_of(&b, &w), Some(EdgeSelection::new(vec![])));
    }

    #[test]
    fn psi_examples() {
        let b = example_one();
        assert_eq!(psi_field(&b, &[1.0, 0.0], &[0.0, 1.0]).get(0, 1), 1.0);
        let p = psi_field(&b, &[1.0, 0.0], &[0.9, 0.1]);
        assert!((p.get(0, 1) + 0.8).abs() < 1e-15);
        assert_eq!(p.get(0, 1), p.get(1, 0));
        let p = psi_field(&b, &[0.3, 0.3], &[0.9, 0.1]);
        assert_eq!(p.get(0, 1), 0.0);
    }

    #[test]
    fn extremal_weight_examples() {
        let b = example_one();
        let (w, sel) = extremal_weight(&b, &[1.0, 0.0], &[0.9, 0.1]);
        assert_eq!(sel.choices(), &[Bound::Upper]);
        assert_eq!(w.weight(0, 1), 0.9);
        let (_, sel) = extremal_weight(&b, &[1.0, 0.0], &[0.2, 0.8]);
        assert_eq!(sel.choices(), &[Bound::Lower]);
        // psi == 0 everywhere: ties go to the upper endpoint
        let (_, sel) = extremal_weight(&b, &[0.5, 0.5], &[0.2, 0.8]);
        assert_eq!(sel.choices(), &[Bound::Upper]);
    }

    #[test]
    fn selection_of_examples() {
        let b = example_one();
        let w = WeightFunction::from_offdiag(&b, &array![[0.0, 0.9], [0.9, 0.0]]).unwrap();
        assert_eq!(selection_of(&b, &w), Some(EdgeSelection::new(vec![Bound::Upper])));
        let mid = WeightFunction::from_offdiag(&b, &array![[0.0, 0.55], [0.55, 0.0]]).unwrap();
        assert_eq!(selection_of(&b, &mid), None);
    }

    #[test]
    fn from_offdiag_rejects_bad_weights() {
        let b = example_one();
        assert!(matches!(
            WeightFunction::from_offdiag(&b, &array![[0.0, 0.95], [0.95, 0.0]]),
            Err(WeightError::OutOfInterval { .. })
        ));
        assert!(matches!(
            WeightFunction::from_offdiag(&b, &array![[0.0, 0.5], [0.6, 0.0]]),
            Err(WeightError::Asymmetric { .. })
        ));
    }

    #[test]
    fn selection_index_order() {
        assert_eq!(EdgeSelection::from_index(3, 0).to_string(), "LLL");
        assert_eq!(EdgeSelection::from_index(3, 1).to_string(), "LLU");
        assert_eq!(EdgeSelection::from_index(3, 6).to_string(), "UUL");
        assert!(EdgeSelection::from_index(3, 3) < EdgeSelection::from_index(3, 4));
    }
}
