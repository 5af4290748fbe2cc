//! Small hand-built instances used throughout the test suites and docs.

use std::collections::BTreeSet;

use crate::model::{Cost, Instance, ResourceKind, Task};

fn task(id: &str, duration: i64, earliest: i64, deadline: i64, demands: &[i64]) -> Task {
    Task {
        id: id.to_string(),
        duration,
        earliest_start: earliest,
        deadline,
        demands: demands.to_vec(),
    }
}

/// One resource `k1` at unit cost 1; tasks A, B, C of duration 2 inside the
/// window `[0, 4]` with demands 2, 1, 2 and the single edge A before B.
///
/// A and B are forced to starts 0 and 2; C ranges over `{0, 1, 2}` with the
/// optimum 3 at `C = 2`.
pub fn toy_a() -> Instance {
    let tasks = vec![
        task("A", 2, 0, 4, &[2]),
        task("B", 2, 0, 4, &[1]),
        task("C", 2, 0, 4, &[2]),
    ];
    let resources = vec![ResourceKind {
        id: "k1".to_string(),
        unit_cost: Cost::from_integer(1),
    }];
    let precedence: BTreeSet<(String, String)> =
        [("A".to_string(), "B".to_string())].into_iter().collect();
    Instance::new(tasks, resources, precedence)
}

/// [`toy_a`] with C's demand lowered to 1; the optimum drops to 2.
pub fn toy_a_prime() -> Instance {
    let tasks = vec![
        task("A", 2, 0, 4, &[2]),
        task("B", 2, 0, 4, &[1]),
        task("C", 2, 0, 4, &[1]),
    ];
    let resources = vec![ResourceKind {
        id: "k1".to_string(),
        unit_cost: Cost::from_integer(1),
    }];
    let precedence: BTreeSet<(String, String)> =
        [("A".to_string(), "B".to_string())].into_iter().collect();
    Instance::new(tasks, resources, precedence)
}

/// Three singleton processes whose scheduling order changes the final cost.
///
/// Task `a` is pinned to `[0, 2)` at height 2, task `b` can sit anywhere in
/// `[0, 4]` at height 2, and task `g` occupies one unit inside `[4, 6]`.
/// Scheduling `a` before `b` lets `b` dodge into `[2, 4)` for a peak of 2;
/// scheduling `b` first commits it to `[0, 2)` (the smoothest cold-start
/// placement) and the peak doubles to 4. Verified exhaustively in tests.
pub fn toy_ord() -> Instance {
    let tasks = vec![
        task("a", 2, 0, 2, &[2]),
        task("b", 2, 0, 4, &[2]),
        task("g", 1, 4, 6, &[1]),
    ];
    let resources = vec![ResourceKind {
        id: "k1".to_string(),
        unit_cost: Cost::from_integer(1),
    }];
    Instance::new(tasks, resources, BTreeSet::new())
}
