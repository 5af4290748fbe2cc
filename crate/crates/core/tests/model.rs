mod common;

use std::collections::BTreeSet;

use num_rational::Ratio;
use proptest::prelude::*;

use ripsched_core::fixtures::{toy_a, toy_a_prime};
use ripsched_core::generate::{generate_with_witness, GenConfig};
use ripsched_core::model::{
    apply_delta, build_usage_profile, check_schedule, lower_bound, objective_cost,
    validate_instance, Cost, Instance, ReconfigDelta, ResourceKind, Schedule, StartMap, Task,
    Verdict, Violation,
};

fn schedule(pairs: &[(&str, i64)]) -> Schedule {
    Schedule::from_pairs(pairs.iter().map(|(id, s)| (id.to_string(), *s)))
}

fn starts(pairs: &[(&str, i64)]) -> StartMap {
    pairs.iter().map(|(id, s)| (id.to_string(), *s)).collect()
}

#[test]
fn toy_a_is_valid() {
    assert!(validate_instance(&toy_a()).is_ok());
}

#[test]
fn back_edge_reports_a_cycle() {
    let base = toy_a();
    let mut precedence = base.precedence().clone();
    precedence.insert(("B".to_string(), "A".to_string()));
    let inst = Instance::new(base.tasks().to_vec(), base.resources().to_vec(), precedence);
    let report = validate_instance(&inst);
    assert!(!report.is_ok());
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::PrecedenceCycle { cycle } if cycle.len() == 3)));
    let text = report.to_string();
    assert!(text.contains("cycle"), "got: {text}");
}

#[test]
fn shrunken_window_reports_the_task() {
    let base = toy_a();
    let mut tasks = base.tasks().to_vec();
    tasks[0].deadline = 1; // A needs e + d = 2
    let inst = Instance::new(tasks, base.resources().to_vec(), base.precedence().clone());
    let report = validate_instance(&inst);
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::WindowTooSmall { task } if task == "A")));
    assert!(report.to_string().contains("window too small for A"));
}

#[test]
fn dangling_precedence_and_bad_fields_are_reported() {
    let tasks = vec![Task {
        id: "A".to_string(),
        duration: 0,
        earliest_start: -1,
        deadline: 4,
        demands: vec![-1, 2],
    }];
    let resources = vec![ResourceKind {
        id: "k1".to_string(),
        unit_cost: Cost::from_integer(1),
    }];
    let precedence: BTreeSet<(String, String)> =
        [("A".to_string(), "Z".to_string())].into_iter().collect();
    let report = validate_instance(&Instance::new(tasks, resources, precedence));
    let kinds: Vec<_> = report.violations.iter().map(std::mem::discriminant).collect();
    assert!(kinds.len() >= 4, "expected several violations: {report}");
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::UnknownPrecedenceTask { missing, .. } if missing == "Z")));
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::DemandArityMismatch { got: 2, expected: 1, .. })));
}

#[test]
fn feasibility_examples() {
    let inst = toy_a();
    assert_eq!(
        check_schedule(&inst, &schedule(&[("A", 0), ("B", 2), ("C", 2)])).unwrap(),
        Verdict::Feasible
    );

    match check_schedule(&inst, &schedule(&[("A", 0), ("B", 1), ("C", 0)])).unwrap() {
        Verdict::Infeasible(violations) => {
            assert!(violations.iter().any(|v| v.to_string().contains("A\u{2192}B")));
        }
        v => panic!("expected precedence violation, got {v:?}"),
    }

    match check_schedule(&inst, &schedule(&[("A", 0), ("B", 2), ("C", 3)])).unwrap() {
        Verdict::Infeasible(violations) => {
            assert!(violations.iter().any(|v| v.to_string().contains("task C")));
        }
        v => panic!("expected window violation, got {v:?}"),
    }

    let err = check_schedule(&inst, &schedule(&[("A", 0)])).unwrap_err();
    assert!(err.to_string().contains("missing assignments"));
}

#[test]
fn objective_examples() {
    let inst = toy_a();
    assert_eq!(
        objective_cost(&inst, &schedule(&[("A", 0), ("B", 2), ("C", 0)])).unwrap(),
        Cost::from_integer(4)
    );
    assert_eq!(
        objective_cost(&inst, &schedule(&[("A", 0), ("B", 2), ("C", 2)])).unwrap(),
        Cost::from_integer(3)
    );

    let empty = Instance::new(vec![], vec![], BTreeSet::new());
    assert_eq!(
        objective_cost(&empty, &Schedule::default()).unwrap(),
        Cost::from_integer(0)
    );

    let err = objective_cost(&inst, &schedule(&[("A", 0), ("B", 1), ("C", 0)])).unwrap_err();
    assert!(err.to_string().contains("infeasible"));
}

#[test]
fn usage_profile_examples() {
    let inst = toy_a();
    let p = build_usage_profile(&inst, &starts(&[("A", 0)])).unwrap();
    assert_eq!(p.resource(0), &[2, 2, 0, 0]);

    let p = build_usage_profile(&inst, &StartMap::new()).unwrap();
    assert!(p.is_zero());

    let p = build_usage_profile(&inst, &starts(&[("A", 0), ("B", 2), ("C", 2)])).unwrap();
    assert_eq!(p.resource(0), &[2, 2, 3, 3]);

    let err = build_usage_profile(&inst, &starts(&[("C", 3)])).unwrap_err();
    assert!(err.to_string().contains("outside window"));
}

#[test]
fn lower_bound_examples() {
    // Energy: ceil(10 / 4) = 3. Compulsory parts need precedence-tightened
    // windows: A pinned to [0,2) at demand 2, B to [2,4) at demand 1.
    let lb = lower_bound(&toy_a());
    assert_eq!(lb.per_resource, vec![3]);
    assert_eq!(lb.total, Cost::from_integer(3));
    let (_, optimum) = common::brute_force_optimum(&toy_a()).unwrap();
    assert_eq!(optimum, lb.total);

    // A single task filling its whole window is compulsory everywhere.
    let inst = Instance::new(
        vec![Task {
            id: "only".to_string(),
            duration: 5,
            earliest_start: 0,
            deadline: 5,
            demands: vec![7],
        }],
        vec![ResourceKind {
            id: "k1".to_string(),
            unit_cost: Cost::from_integer(2),
        }],
        BTreeSet::new(),
    );
    let lb = lower_bound(&inst);
    assert_eq!(lb.per_resource, vec![7]);
    assert_eq!(lb.total, Cost::from_integer(14));

    // All-zero demands bound to zero.
    let base = toy_a();
    let tasks = base
        .tasks()
        .iter()
        .map(|t| Task {
            demands: vec![0],
            ..t.clone()
        })
        .collect();
    let inst = Instance::new(tasks, base.resources().to_vec(), base.precedence().clone());
    assert_eq!(lower_bound(&inst).total, Cost::from_integer(0));
}

#[test]
fn lower_bound_valid_on_small_instances() {
    for seed in 0..20u64 {
        let cfg = GenConfig {
            processes: 1 + (seed as usize % 3),
            tasks_min: 3,
            tasks_max: 6,
            resources: 1 + (seed as usize % 2),
            window_slack: 2,
            start_spread: 2,
            seed,
            ..GenConfig::default()
        };
        let (inst, _) = generate_with_witness(&cfg).unwrap();
        let (_, optimum) = common::brute_force_optimum(&inst).expect("feasible by construction");
        let lb = lower_bound(&inst);
        assert!(
            lb.total <= optimum,
            "seed {seed}: bound {} exceeds optimum {}",
            lb.total,
            optimum
        );
    }
}

#[test]
fn apply_delta_examples() {
    let inst = toy_a();

    // Lowering C's demand drops the brute-force optimum to 2.
    let mut delta = ReconfigDelta::default();
    delta.modified.insert(
        "C".to_string(),
        Task {
            id: "C".to_string(),
            duration: 2,
            earliest_start: 0,
            deadline: 4,
            demands: vec![1],
        },
    );
    let updated = apply_delta(&inst, &delta).unwrap();
    assert_eq!(updated, toy_a_prime());
    let (_, optimum) = common::brute_force_optimum(&updated).unwrap();
    assert_eq!(optimum, Cost::from_integer(2));
    // Value semantics: the original is untouched.
    assert_eq!(inst, toy_a());

    assert_eq!(apply_delta(&inst, &ReconfigDelta::default()).unwrap(), inst);

    // Removing A leaves B's predecessor edge dangling.
    let mut delta = ReconfigDelta::default();
    delta.removed.insert("A".to_string());
    let err = apply_delta(&inst, &delta).unwrap_err();
    assert!(err.to_string().contains("invalid"), "got: {err}");
    // Removing the edge as well makes it legal.
    delta
        .removed_precedence
        .insert(("A".to_string(), "B".to_string()));
    let updated = apply_delta(&inst, &delta).unwrap();
    assert_eq!(updated.n_tasks(), 2);

    let mut delta = ReconfigDelta::default();
    delta.removed.insert("nope".to_string());
    assert!(apply_delta(&inst, &delta).is_err());
}

#[test]
fn check_schedule_matches_direct_constraint_oracle() {
    // Enumerate every start combination (feasible or not) over a padded
    // range on tiny instances and compare verdicts with the oracle.
    for seed in 0..5u64 {
        let cfg = GenConfig {
            processes: 2,
            tasks_min: 3,
            tasks_max: 4,
            window_slack: 1,
            start_spread: 1,
            seed,
            ..GenConfig::default()
        };
        let (inst, _) = generate_with_witness(&cfg).unwrap();
        let horizon = inst.horizon();
        let n = inst.n_tasks();
        let span = (horizon.end - horizon.start + 1).max(1);
        let combos = (span as u64).pow(n as u32);
        for code in 0..combos.min(4000) {
            let mut rem = code;
            let mut s = StartMap::new();
            for task in inst.tasks() {
                let offset = (rem % span as u64) as i64;
                rem /= span as u64;
                s.insert(task.id.clone(), horizon.start + offset);
            }
            let verdict = check_schedule(&inst, &Schedule::new(s.clone())).unwrap();
            assert_eq!(
                verdict.is_feasible(),
                common::direct_feasible(&inst, &s),
                "verdict mismatch on {s:?}"
            );
        }
    }
}

proptest! {
    #[test]
    fn objective_scales_linearly_in_costs(num in 1i64..20, den in 1i64..10) {
        let inst = toy_a();
        let sched = schedule(&[("A", 0), ("B", 2), ("C", 2)]);
        let base = objective_cost(&inst, &sched).unwrap();

        let lambda = Ratio::new(num, den);
        let scaled = Instance::new(
            inst.tasks().to_vec(),
            inst.resources()
                .iter()
                .map(|r| ResourceKind { id: r.id.clone(), unit_cost: r.unit_cost * lambda })
                .collect(),
            inst.precedence().clone(),
        );
        prop_assert_eq!(objective_cost(&scaled, &sched).unwrap(), base * lambda);
    }

    #[test]
    fn profiles_add_over_disjoint_partial_schedules(split in 0u8..8) {
        let inst = toy_a();
        let all = [("A", 0i64), ("B", 2), ("C", 1)];
        let mut one = StartMap::new();
        let mut two = StartMap::new();
        for (i, (id, s)) in all.iter().enumerate() {
            if split & (1 << i) != 0 {
                one.insert(id.to_string(), *s);
            } else {
                two.insert(id.to_string(), *s);
            }
        }
        let mut union = one.clone();
        union.extend(two.clone());

        let mut sum = build_usage_profile(&inst, &one).unwrap();
        sum.add_assign(&build_usage_profile(&inst, &two).unwrap());
        prop_assert_eq!(build_usage_profile(&inst, &union).unwrap(), sum);
    }

    #[test]
    fn add_then_remove_is_identity(start in 0i64..3) {
        let inst = toy_a();
        let task = inst.task_by_id("C").unwrap();
        let base = build_usage_profile(&inst, &starts(&[("A", 0), ("B", 2)])).unwrap();
        let mut p = base.clone();
        p.apply_task(task, start, 1);
        p.apply_task(task, start, -1);
        prop_assert_eq!(p, base);
    }
}
