mod common;

use std::collections::BTreeSet;

use ripsched_core::decompose::{
    build_process_graph, decompose_processes, edge_features, node_features, ProcessStatus,
};
use ripsched_core::fixtures::toy_a;
use ripsched_core::generate::{generate_instance, GenConfig};
use ripsched_core::model::{Cost, Instance, ResourceKind, Task, UsageProfile};

fn task(id: &str, duration: i64, earliest: i64, deadline: i64, demands: &[i64]) -> Task {
    Task {
        id: id.to_string(),
        duration,
        earliest_start: earliest,
        deadline,
        demands: demands.to_vec(),
    }
}

fn one_resource(tasks: Vec<Task>, precedence: &[(&str, &str)]) -> Instance {
    Instance::new(
        tasks,
        vec![ResourceKind {
            id: "k1".to_string(),
            unit_cost: Cost::from_integer(1),
        }],
        precedence
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
    )
}

#[test]
fn toy_a_splits_into_two_processes() {
    let inst = toy_a();
    let procs = decompose_processes(&inst);
    assert_eq!(procs.len(), 2);
    assert_eq!(procs[0].task_indices, vec![0, 1]); // A, B
    assert_eq!(procs[1].task_indices, vec![2]); // C
    assert_eq!(procs[0].window_start, 0);
    assert_eq!(procs[0].window_end, 4);
}

#[test]
fn no_edges_means_singletons_and_a_chain_means_one() {
    let tasks = vec![
        task("a", 1, 0, 2, &[1]),
        task("b", 1, 0, 2, &[1]),
        task("c", 1, 0, 2, &[1]),
    ];
    let inst = one_resource(tasks.clone(), &[]);
    assert_eq!(decompose_processes(&inst).len(), 3);

    let chain = one_resource(tasks, &[("a", "b"), ("b", "c")]);
    let procs = decompose_processes(&chain);
    assert_eq!(procs.len(), 1);
    assert_eq!(procs[0].task_indices, vec![0, 1, 2]);
}

#[test]
fn overlap_edges_follow_closed_windows() {
    let inst = toy_a();
    let procs = decompose_processes(&inst);
    let rpu = UsageProfile::zero(inst.horizon(), 1);
    let graph = build_process_graph(&inst, procs, &rpu, &[0]).unwrap();
    assert_eq!(graph.edges.len(), 1, "windows [0,4] overlap");

    // Disjoint: [0,2] vs [3,5].
    let inst = one_resource(
        vec![task("a", 1, 0, 2, &[1]), task("b", 1, 3, 5, &[1])],
        &[],
    );
    let procs = decompose_processes(&inst);
    let rpu = UsageProfile::zero(inst.horizon(), 1);
    let graph = build_process_graph(&inst, procs, &rpu, &[0]).unwrap();
    assert!(graph.edges.is_empty());

    // Touching endpoints: closed [0,2] and [2,5] share t = 2.
    let inst = one_resource(
        vec![task("a", 1, 0, 2, &[1]), task("b", 1, 2, 5, &[1])],
        &[],
    );
    let procs = decompose_processes(&inst);
    let rpu = UsageProfile::zero(inst.horizon(), 1);
    let graph = build_process_graph(&inst, procs, &rpu, &[0]).unwrap();
    assert_eq!(graph.edges.len(), 1);
}

#[test]
fn node_feature_examples() {
    let inst = toy_a();
    let procs = decompose_processes(&inst);
    let rpu = UsageProfile::zero(inst.horizon(), 1);

    let f = node_features(&procs[0], &inst, &rpu, &[0]).unwrap();
    assert_eq!(f, [4.0, 1.5, 0.0, 0.0]);

    let f = node_features(&procs[1], &inst, &rpu, &[0]).unwrap();
    assert_eq!(f, [2.0, 2.0, 0.0, 0.0]);
}

#[test]
fn scheduled_order_code_appears_in_features() {
    let inst = toy_a();
    let mut procs = decompose_processes(&inst);
    procs[0].status = ProcessStatus::Scheduled { order: 3 };
    let rpu = UsageProfile::zero(inst.horizon(), 1);
    let f = node_features(&procs[0], &inst, &rpu, &[0]).unwrap();
    assert_eq!(f[2], 3.0);
}

#[test]
fn usage_feature_reads_the_profile() {
    let inst = toy_a();
    let procs = decompose_processes(&inst);
    let starts = [("A".to_string(), 0i64), ("B".to_string(), 2)]
        .into_iter()
        .collect();
    let rpu = ripsched_core::model::build_usage_profile(&inst, &starts).unwrap();
    let caps = rpu.peaks();
    // Profile [2,2,1,1]; window [0,4] clamps to the horizon; cap 2.
    let f = node_features(&procs[1], &inst, &rpu, &caps).unwrap();
    assert!((f[3] - 3.0).abs() < 1e-12, "sum 6 / cap 2 = 3, got {}", f[3]);
}

#[test]
fn degenerate_cost_vector_is_an_error() {
    let inst = Instance::new(
        vec![task("a", 1, 0, 2, &[1])],
        vec![ResourceKind {
            id: "k1".to_string(),
            unit_cost: Cost::from_integer(0),
        }],
        BTreeSet::new(),
    );
    let procs = decompose_processes(&inst);
    let rpu = UsageProfile::zero(inst.horizon(), 1);
    let err = node_features(&procs[0], &inst, &rpu, &[0]).unwrap_err();
    assert!(err.to_string().contains("degenerate cost vector"));
}

#[test]
fn edge_feature_examples() {
    let inst = toy_a();
    let procs = decompose_processes(&inst);
    let rpu = UsageProfile::zero(inst.horizon(), 1);

    let f = edge_features(&procs[0], &procs[1], &inst, &rpu, &[0]).unwrap();
    assert_eq!(f, [0.0, 4.0, 1.0, 0.0, 0.0, 0.0, 0.0]);

    // Disjoint resource use in a three-resource instance.
    let inst = Instance::new(
        vec![task("a", 1, 0, 2, &[1, 0, 0]), task("b", 1, 0, 2, &[0, 1, 0])],
        (1..=3)
            .map(|k| ResourceKind {
                id: format!("k{k}"),
                unit_cost: Cost::from_integer(1),
            })
            .collect(),
        BTreeSet::new(),
    );
    let procs = decompose_processes(&inst);
    let rpu = UsageProfile::zero(inst.horizon(), 3);
    let f = edge_features(&procs[0], &procs[1], &inst, &rpu, &[0, 0, 0]).unwrap();
    assert_eq!(f[2], 0.0, "no shared resource kinds");

    let err = edge_features(
        &decompose_processes(&one_resource(
            vec![task("a", 1, 0, 2, &[1]), task("b", 1, 3, 5, &[1])],
            &[],
        ))[0],
        &decompose_processes(&one_resource(
            vec![task("a", 1, 0, 2, &[1]), task("b", 1, 3, 5, &[1])],
            &[],
        ))[1],
        &inst,
        &rpu,
        &[0, 0, 0],
    )
    .unwrap_err();
    assert!(err.to_string().contains("non-overlapping"));
}

#[test]
fn edge_features_are_symmetric_up_to_the_usage_swap() {
    for seed in 0..10u64 {
        let cfg = GenConfig {
            processes: 3,
            tasks_min: 5,
            tasks_max: 8,
            resources: 2,
            seed,
            ..GenConfig::default()
        };
        let inst = generate_instance(&cfg).unwrap();
        let procs = decompose_processes(&inst);
        let witness = ripsched_core::model::schedule::earliest_start_schedule(&inst).unwrap();
        let rpu =
            ripsched_core::model::build_usage_profile(&inst, witness.starts()).unwrap();
        let caps = rpu.peaks();
        for a in 0..procs.len() {
            for b in a + 1..procs.len() {
                let fwd = edge_features(&procs[a], &procs[b], &inst, &rpu, &caps);
                let rev = edge_features(&procs[b], &procs[a], &inst, &rpu, &caps);
                match (fwd, rev) {
                    (Ok(mut fwd), Ok(rev)) => {
                        fwd.swap(3, 4);
                        assert_eq!(fwd, rev);
                    }
                    (Err(_), Err(_)) => {}
                    other => panic!("asymmetric overlap outcome: {other:?}"),
                }
            }
        }
    }
}

#[test]
fn partition_property_over_fuzzed_instances() {
    for seed in 0..1000u64 {
        let cfg = GenConfig {
            processes: 1 + (seed % 5) as usize,
            tasks_min: 1 + (seed % 5) as usize,
            tasks_max: 10,
            seed,
            ..GenConfig::default()
        };
        let inst = generate_instance(&cfg).unwrap();
        let procs = decompose_processes(&inst);
        let mut seen = BTreeSet::new();
        for p in &procs {
            for &i in &p.task_indices {
                assert!(seen.insert(i), "seed {seed}: task {i} in two processes");
            }
        }
        assert_eq!(seen.len(), inst.n_tasks(), "seed {seed}: partition incomplete");
        // Every precedence edge stays inside one process.
        for (a, b) in inst.precedence() {
            let ia = inst.index_of(a).unwrap();
            let ib = inst.index_of(b).unwrap();
            let pa = procs.iter().position(|p| p.task_indices.contains(&ia));
            let pb = procs.iter().position(|p| p.task_indices.contains(&ib));
            assert_eq!(pa, pb, "seed {seed}: edge {a}->{b} crosses processes");
        }
    }
}

#[test]
fn overlap_criterion_matches_quadratic_oracle() {
    for seed in 0..50u64 {
        let cfg = GenConfig {
            processes: 4,
            tasks_min: 6,
            tasks_max: 12,
            window_slack: 2,
            start_spread: 6,
            seed,
            ..GenConfig::default()
        };
        let inst = generate_instance(&cfg).unwrap();
        let procs = decompose_processes(&inst);
        let rpu = UsageProfile::zero(inst.horizon(), inst.n_resources());
        let caps = rpu.peaks();
        let graph = build_process_graph(&inst, procs.clone(), &rpu, &caps).unwrap();

        for a in 0..procs.len() {
            for b in a + 1..procs.len() {
                // Quadratic task-pair oracle over closed windows.
                let mut expect = false;
                for &u in &procs[a].task_indices {
                    for &v in &procs[b].task_indices {
                        let tu = inst.task(u);
                        let tv = inst.task(v);
                        if tu.earliest_start.max(tv.earliest_start)
                            <= tu.deadline.min(tv.deadline)
                        {
                            expect = true;
                        }
                    }
                }
                let got = graph.edges.iter().any(|e| (e.a, e.b) == (a, b));
                assert_eq!(got, expect, "seed {seed} pair ({a},{b})");
            }
        }
    }
}

#[test]
fn features_are_deterministic_bitwise() {
    let inst = generate_instance(&GenConfig {
        seed: 77,
        ..GenConfig::default()
    })
    .unwrap();
    let procs = decompose_processes(&inst);
    let witness = ripsched_core::model::schedule::earliest_start_schedule(&inst).unwrap();
    let rpu = ripsched_core::model::build_usage_profile(&inst, witness.starts()).unwrap();
    let caps = rpu.peaks();
    let a = build_process_graph(&inst, procs.clone(), &rpu, &caps).unwrap();
    let b = build_process_graph(&inst, procs, &rpu, &caps).unwrap();
    assert_eq!(a.node_features, b.node_features);
    assert_eq!(a.edges, b.edges);
}

#[test]
fn debug_dump_golden() {
    let inst = toy_a();
    let procs = decompose_processes(&inst);
    let rpu = UsageProfile::zero(inst.horizon(), 1);
    let graph = build_process_graph(&inst, procs, &rpu, &[0]).unwrap();
    let expected = "\
node 0 tasks=A,B window=[0,4] status=unscheduled feat=[4.0, 1.5, 0.0, 0.0]
node 1 tasks=C window=[0,4] status=unscheduled feat=[2.0, 2.0, 0.0, 0.0]
edge 0-1 feat=[0.0, 4.0, 1.0, 0.0, 0.0, 0.0, 0.0]
";
    assert_eq!(graph.debug_dump(&inst), expected);
}
