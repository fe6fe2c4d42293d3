use proptest::prelude::*;

use iwalk::generate::{generate_instance, GenParams};
use iwalk::oracle::{exact_bounds, DEFAULT_BUDGET};
use iwalk::search::selections_to_vector;
use iwalk::{
    apply_right, multistart, psi_field, selection_of, weight_from_selection, EdgeSelection, Gamble, Instance,
    OptimizationProblem, Sense, SweepStrategy, WeightVector,
};

fn instance(vertices: usize, steps: usize, seed: u64) -> Instance {
    generate_instance(&GenParams {
        vertices,
        steps,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn naive(inst: &Instance, wvec: &WeightVector, f: &[f64]) -> f64 {
    let b = &inst.bounds;
    let s = b.num_states();
    let mut row = inst.q.values().to_vec();
    for w in wvec.iter() {
        let mut next = vec![0.0; s];
        for x in 0..s {
            for y in 0..s {
                next[y] += row[x] * w.weight(x, y) / b.marginal(x);
            }
        }
        row = next;
    }
    row.iter().zip(f).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_round_trip(seed in any::<u64>(), s in 2usize..8, index in any::<u64>()) {
        let b = instance(s, 1, seed).bounds;
        let e = b.num_edges();
        let sel = EdgeSelection::from_index(e, index & ((1u64 << e) - 1));
        let w = weight_from_selection(&b, &sel);
        prop_assert!(w.check(&b).is_ok());
        prop_assert_eq!(selection_of(&b, &w), Some(sel));
    }

    #[test]
    fn psi_is_symmetric_and_zero_on_loops(seed in any::<u64>(), s in 2usize..8) {
        let inst = instance(s, 1, seed);
        let psi = psi_field(&inst.bounds, inst.q.values(), inst.f.values());
        for x in 0..s {
            prop_assert_eq!(psi.get(x, x), 0.0);
            for y in 0..s {
                prop_assert_eq!(psi.get(x, y), psi.get(y, x));
            }
        }
    }

    #[test]
    fn right_action_is_linear(seed in any::<u64>(), s in 2usize..8, a in -3.0f64..3.0) {
        let inst = instance(s, 1, seed);
        let b = &inst.bounds;
        let w = weight_from_selection(b, &EdgeSelection::from_index(b.num_edges(), seed & ((1u64 << b.num_edges()) - 1)));
        let f = inst.f.values();
        let g: Vec<f64> = inst.q.values().iter().map(|v| v - 1.0).collect();
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
        let lhs = apply_right(b, &w, &Gamble::new(combo).unwrap());
        let tf = apply_right(b, &w, &inst.f);
        let tg = apply_right(b, &w, &Gamble::new(g).unwrap());
        for x in 0..s {
            let rhs = a * tf.values()[x] + tg.values()[x];
            prop_assert!((lhs.values()[x] - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn cached_value_matches_dense_product(seed in any::<u64>(), s in 2usize..7, steps in 1usize..6) {
        let inst = instance(s, steps, seed);
        let problem = OptimizationProblem::new(inst.bounds.clone(), inst.q.clone(), inst.f.clone(), steps, Sense::Min).unwrap();
        let report = multistart(&problem, 8, seed, SweepStrategy::RightToLeft).unwrap();
        let dense = naive(&inst, &report.best.schedule, inst.f.values());
        prop_assert!((report.best.value - dense).abs() <= 1e-12 * dense.abs().max(1.0));
        for e in &report.unique_extrema {
            let dense = naive(&inst, &selections_to_vector(&inst.bounds, &e.selections), inst.f.values());
            prop_assert!((e.value - dense).abs() <= 1e-12 * dense.abs().max(1.0));
        }
    }

    #[test]
    fn maximum_is_negated_minimum(seed in any::<u64>(), s in 2usize..5, steps in 1usize..3) {
        let inst = instance(s, steps, seed);
        let up = exact_bounds(&inst.bounds, &inst.q, &inst.f, steps, 20, DEFAULT_BUDGET).unwrap();
        let down = exact_bounds(&inst.bounds, &inst.q, &inst.f.negated(), steps, 20, DEFAULT_BUDGET).unwrap();
        prop_assert!((up.max + down.min).abs() <= 1e-12 * up.max.abs().max(1.0));
        prop_assert_eq!(up.argmax_count, down.argmin_count);
    }

    #[test]
    fn local_optima_bracket_the_exact_range(seed in any::<u64>(), s in 2usize..5, steps in 1usize..4) {
        let inst = instance(s, steps, seed);
        let exact = exact_bounds(&inst.bounds, &inst.q, &inst.f, steps, 20, DEFAULT_BUDGET).unwrap();
        for sense in [Sense::Min, Sense::Max] {
            let problem = OptimizationProblem::new(inst.bounds.clone(), inst.q.clone(), inst.f.clone(), steps, sense).unwrap();
            let report = multistart(&problem, 16, seed, SweepStrategy::LeftToRight).unwrap();
            for e in &report.unique_extrema {
                prop_assert!(e.value >= exact.min - 1e-12 * exact.min.abs().max(1.0));
                prop_assert!(e.value <= exact.max + 1e-12 * exact.max.abs().max(1.0));
            }
        }
    }
}

#[test]
fn multistart_ignores_thread_count() {
    let inst = instance(6, 4, 17);
    let problem = OptimizationProblem::new(inst.bounds, inst.q, inst.f, 4, Sense::Max).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| multistart(&problem, 100, 5, SweepStrategy::LeftToRight).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn generator_statistics() {
    let mut absent = 0usize;
    let mut pairs = 0usize;
    let mut lower_sum = 0.0;
    let mut present = 0usize;
    let mut seed = 0;
    while pairs < 10_000 {
        let b = instance(8, 1, seed).bounds;
        seed += 1;
        for x in 0..8 {
            for y in x + 1..8 {
                pairs += 1;
                if b.upper(x, y) == 0.0 {
                    absent += 1;
                } else {
                    present += 1;
                    lower_sum += b.lower(x, y);
                }
            }
        }
    }
    let fraction = absent as f64 / pairs as f64;
    let mean = lower_sum / present as f64;
    assert!((fraction - 0.25).abs() <= 0.02, "absent fraction {fraction}");
    assert!((mean - 0.8).abs() <= 0.02, "mean lower weight {mean}");
}
