mod common;

use proptest::prelude::*;

use ripsched_core::episode::{Episode, SolveOptions};
use ripsched_core::fixtures::toy_a;
use ripsched_core::generate::{generate_instance, GenConfig};
use ripsched_core::model::Cost;
use ripsched_core::nn::Mat;
use ripsched_core::ordering::OrderingPolicy;
use ripsched_core::selection::{
    candidate_features, collect_selection_tuples, rank_loss, rank_loss_gradients,
    rank_loss_value, ranking_accuracy, score, select, train_selector, train_selector_on_tuples,
    CandidateFeatures, SelectionPolicy, SelectionTuple, SelectorConfig, SelectorParams,
    SelectorTrainConfig,
};

/// The toy instance with A and B committed; C's subproblem has exactly the
/// two candidates {C: 2} (cost 3) and {C: 0} (cost 4).
fn toy_c_state() -> (Episode, Vec<ripsched_core::subproblem::CandidateSolution>) {
    let inst = toy_a();
    let mut episode = Episode::cold_start(&inst, SolveOptions::default()).unwrap();
    let chain = episode.solve_candidates(0).unwrap();
    episode.commit_candidate(0, &chain[0]).unwrap();
    let candidates = episode.solve_candidates(1).unwrap();
    assert_eq!(candidates.len(), 2);
    (episode, candidates)
}

#[test]
fn candidate_feature_examples() {
    let (episode, candidates) = toy_c_state();
    let inst = toy_a();

    // {C: 2}: local profile [0,0,2,2] has one rise of 2, peak 2 at index 2
    // of a 4-step horizon.
    let f = candidate_features(&candidates[0], episode.graph(), episode.rpu(), &inst);
    assert_eq!(f.total_variation, 2.0);
    assert_eq!(f.peak, 2.0);
    assert_eq!(f.peak_position, 0.5);
    assert!((f.rms - 2.0_f64.sqrt()).abs() < 1e-12, "sqrt(8/4): {}", f.rms);

    // Latest feasible start leaves zero slack.
    assert_eq!(f.min_slack, 0.0);

    // A zero-demand candidate has a flat zero local profile.
    let mut zero = candidates[0].clone();
    zero.local_profile = ripsched_core::model::UsageProfile::zero(inst.horizon(), 1);
    let f = candidate_features(&zero, episode.graph(), episode.rpu(), &inst);
    assert_eq!((f.rms, f.total_variation, f.peak), (0.0, 0.0, 0.0));
}

#[test]
fn rank_loss_examples() {
    let one = Cost::from_integer(1);
    let two = Cost::from_integer(2);
    let loss = rank_loss(&[0.0, 0.0], &[one, two]).unwrap();
    assert!((loss - 2f64.ln()).abs() < 1e-12);

    let loss = rank_loss(&[-10.0, 10.0], &[one, two]).unwrap();
    assert!(loss < 1e-8, "saturated pair: {loss}");

    let loss = rank_loss(&[3.0, -1.0], &[one, one]).unwrap();
    assert_eq!(loss, 0.0);

    assert!(rank_loss(&[1.0], &[one]).is_err());
    assert!(rank_loss(&[1.0, 2.0], &[one]).is_err());
}

proptest! {
    #[test]
    fn rank_loss_is_shift_invariant(shift in -50.0f64..50.0, s1 in -5.0f64..5.0, s2 in -5.0f64..5.0) {
        let objs = [Cost::from_integer(1), Cost::from_integer(3)];
        let base = rank_loss(&[s1, s2], &objs).unwrap();
        let shifted = rank_loss(&[s1 + shift, s2 + shift], &objs).unwrap();
        prop_assert!((base - shifted).abs() < 1e-9);
    }

    #[test]
    fn rank_loss_decreases_as_the_better_score_drops(s in -3.0f64..3.0, drop in 0.01f64..5.0) {
        let objs = [Cost::from_integer(1), Cost::from_integer(3)];
        let before = rank_loss(&[s, 0.0], &objs).unwrap();
        let after = rank_loss(&[s - drop, 0.0], &objs).unwrap();
        prop_assert!(after < before);
    }
}

fn zeroed_params() -> SelectorParams {
    let mut params = SelectorParams::seeded(
        &SelectorConfig {
            hidden: 6,
            gat_layers: 2,
            mlp_hidden: 5,
        },
        1,
    );
    for (_, m) in params.tensors_mut() {
        for v in m.data_mut() {
            *v = 0.0;
        }
    }
    params
}

#[test]
fn zero_weights_score_zero_everywhere() {
    let (episode, candidates) = toy_c_state();
    let inst = toy_a();
    let params = zeroed_params();
    let state = episode.encode();
    for cand in &candidates {
        let f = candidate_features(cand, episode.graph(), episode.rpu(), &inst);
        assert_eq!(score(&params, &state, &f).unwrap(), 0.0);
    }
    // Equal scores: the learned policy falls back to the first index.
    let mut policy = SelectionPolicy::Learned(params);
    let pick = select(
        &mut policy,
        &candidates,
        &state,
        episode.graph(),
        episode.rpu(),
        &inst,
    )
    .unwrap();
    assert_eq!(pick, 0);
}

/// Straight-line scalar reference of the selector forward pass: attention
/// encoder, mean pooling, then the two-layer perceptron. Independent of the
/// tape machinery.
fn reference_score(
    params: &SelectorParams,
    state: &ripsched_core::qnet::GraphState,
    feats: &CandidateFeatures,
) -> f64 {
    let slope = ripsched_core::nn::LEAKY_SLOPE;
    let matvec = |m: &Mat, v: &[f64]| -> Vec<f64> {
        (0..m.rows())
            .map(|r| (0..m.cols()).map(|c| m.at(r, c) * v[c]).sum())
            .collect()
    };
    let n = state.n_nodes();
    let mut nodes: Vec<Vec<f64>> = state.node_features.iter().map(|f| f.to_vec()).collect();
    for layer in &params.encoder {
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            // Self entry first, then neighbors ascending by target.
            let mut entries: Vec<(usize, Option<[f64; 7]>)> = vec![(i, None)];
            let mut outgoing: Vec<(usize, [f64; 7])> = state
                .edges
                .iter()
                .filter(|(from, _, _)| *from == i)
                .map(|&(_, to, f)| (to, f))
                .collect();
            outgoing.sort_by_key(|&(to, _)| to);
            entries.extend(outgoing.into_iter().map(|(to, f)| (to, Some(f))));

            let self_part = matvec(&layer.theta_self, &nodes[i]);
            let mut logits = Vec::new();
            let mut messages = Vec::new();
            for (j, edge) in &entries {
                let msg = matvec(&layer.theta_msg, &nodes[*j]);
                let mut pre: Vec<f64> =
                    self_part.iter().zip(&msg).map(|(a, b)| a + b).collect();
                if let Some(e) = edge {
                    for (p, ev) in pre.iter_mut().zip(matvec(&layer.theta_edge, e)) {
                        *p += ev;
                    }
                }
                let logit: f64 = pre
                    .iter()
                    .enumerate()
                    .map(|(r, &x)| {
                        layer.attention.at(r, 0) * if x > 0.0 { x } else { slope * x }
                    })
                    .sum();
                logits.push(logit);
                messages.push(msg);
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            let mut out = vec![0.0; layer.theta_msg.rows()];
            for (w, msg) in exps.iter().zip(&messages) {
                for (o, m) in out.iter_mut().zip(msg) {
                    *o += w / total * m;
                }
            }
            next.push(out);
        }
        nodes = next;
    }
    let hidden_dim = nodes[0].len();
    let mut pooled = vec![0.0; hidden_dim];
    for node in &nodes {
        for (p, v) in pooled.iter_mut().zip(node) {
            *p += v / n as f64;
        }
    }
    let mut joined = pooled;
    joined.extend_from_slice(&feats.to_vec());
    let mut hidden = matvec(&params.mlp_hidden_weight, &joined);
    for (h, r) in hidden.iter_mut().zip(0..) {
        *h += params.mlp_hidden_bias.at(r, 0);
        if *h <= 0.0 {
            *h *= slope;
        }
    }
    let out: f64 = (0..hidden.len())
        .map(|c| params.mlp_out_weight.at(0, c) * hidden[c])
        .sum();
    out + params.mlp_out_bias.at(0, 0)
}

#[test]
fn scores_match_the_straight_line_reference() {
    let (episode, candidates) = toy_c_state();
    let inst = toy_a();
    let state = episode.encode();
    for seed in 0..3u64 {
        let params = SelectorParams::seeded(
            &SelectorConfig {
                hidden: 7,
                gat_layers: 2,
                mlp_hidden: 6,
            },
            100 + seed,
        );
        for cand in &candidates {
            let f = candidate_features(cand, episode.graph(), episode.rpu(), &inst);
            let got = score(&params, &state, &f).unwrap();
            let expect = reference_score(&params, &state, &f);
            let rel = (got - expect).abs() / (got.abs() + expect.abs()).max(1e-10);
            assert!(rel < 1e-10, "seed {seed}: {got} vs {expect}");
        }
    }
}

#[test]
fn selector_examples_on_the_toy_subproblem() {
    let (episode, candidates) = toy_c_state();
    let inst = toy_a();
    let state = episode.encode();

    // Completion times: {C: 0} finishes at 2, {C: 2} at 4. The earliest
    // completion commits the costlier profile here.
    let mut mct = SelectionPolicy::Mct;
    let pick = select(&mut mct, &candidates, &state, episode.graph(), episode.rpu(), &inst)
        .unwrap();
    assert_eq!(candidates[pick].starts["C"], 0);
    assert_eq!(candidates[pick].objective, Cost::from_integer(4));

    // Total variation prefers the smooth extension [2,2,3,3].
    for mut policy in [SelectionPolicy::Tv, SelectionPolicy::Mad] {
        let pick = select(
            &mut policy,
            &candidates,
            &state,
            episode.graph(),
            episode.rpu(),
            &inst,
        )
        .unwrap();
        assert_eq!(candidates[pick].starts["C"], 2, "{}", policy.name());
        assert_eq!(candidates[pick].objective, Cost::from_integer(3));
    }

    // A single candidate is forced for every policy.
    let single = &candidates[..1];
    for mut policy in [
        SelectionPolicy::Mct,
        SelectionPolicy::Tv,
        SelectionPolicy::Mad,
        SelectionPolicy::rand(4),
        SelectionPolicy::Learned(zeroed_params()),
    ] {
        let pick = select(&mut policy, single, &state, episode.graph(), episode.rpu(), &inst)
            .unwrap();
        assert_eq!(pick, 0);
    }

    let mut policy = SelectionPolicy::Mct;
    assert!(select(&mut policy, &[], &state, episode.graph(), episode.rpu(), &inst).is_err());
}

#[test]
fn rank_gradients_match_finite_differences() {
    let cfg = SelectorTrainConfig {
        net: SelectorConfig {
            hidden: 6,
            gat_layers: 2,
            mlp_hidden: 5,
        },
        ..SelectorTrainConfig::default()
    };
    // The toy fixture's second iteration yields the {C: 2}/{C: 0} pool whose
    // rollouts finish at costs 3 and 4.
    let (tuples, _) = collect_selection_tuples(
        &[toy_a()],
        &OrderingPolicy::Ccpm,
        &SelectionPolicy::Mct,
        &cfg,
    )
    .unwrap();
    let tuple = tuples
        .iter()
        .find(|t| t.objectives.iter().any(|o| *o != t.objectives[0]))
        .expect("need a tuple with distinct outcomes");

    for seed in 0..3u64 {
        let params = SelectorParams::seeded(&cfg.net, 70 + seed);
        let (_, grads) = rank_loss_gradients(&params, tuple).unwrap();
        let step = 1e-5;
        for t_idx in 0..params.tensors().len() {
            let len = params.tensors()[t_idx].1.len();
            for i in 0..len {
                let mut plus = params.clone();
                plus.tensors_mut()[t_idx].1.data_mut()[i] += step;
                let mut minus = params.clone();
                minus.tensors_mut()[t_idx].1.data_mut()[i] -= step;
                let numeric = (rank_loss_value(&plus, tuple).unwrap()
                    - rank_loss_value(&minus, tuple).unwrap())
                    / (2.0 * step);
                let analytic = grads[t_idx].data()[i];
                assert!(
                    common::fd_rel_err(numeric, analytic) < 1e-4,
                    "seed {seed} tensor {t_idx} entry {i}: {numeric} vs {analytic}"
                );
            }
        }
    }
}

#[test]
fn training_ranks_held_out_candidates_better_than_chance() {
    let instances: Vec<_> = (0..30)
        .map(|i| {
            generate_instance(&GenConfig {
                processes: 3,
                tasks_min: 5,
                tasks_max: 8,
                seed: 500 + i,
                ..GenConfig::default()
            })
            .unwrap()
        })
        .collect();
    let cfg = SelectorTrainConfig {
        net: SelectorConfig {
            hidden: 10,
            gat_layers: 2,
            mlp_hidden: 8,
        },
        epochs: 30,
        ..SelectorTrainConfig::default()
    };
    let (train, held_out) = instances.split_at(20);
    let (params, log) = train_selector(
        train,
        &OrderingPolicy::Ccpm,
        &SelectionPolicy::Mct,
        &cfg,
        9,
    )
    .unwrap();
    assert!(log.tuples > 0);

    let (eval_tuples, _) = collect_selection_tuples(
        held_out,
        &OrderingPolicy::Ccpm,
        &SelectionPolicy::Mct,
        &cfg,
    )
    .unwrap();
    let informative: Vec<SelectionTuple> = eval_tuples
        .into_iter()
        .filter(|t| t.objectives.iter().any(|o| *o != t.objectives[0]))
        .collect();
    assert!(!informative.is_empty(), "held-out set carries no signal");
    let accuracy = ranking_accuracy(&params, &informative).unwrap();
    assert!(accuracy > 0.5, "held-out pairwise accuracy {accuracy}");
}

#[test]
fn selector_training_is_deterministic_and_rejects_empty_data() {
    let instances: Vec<_> = (0..4)
        .map(|i| {
            generate_instance(&GenConfig {
                processes: 3,
                tasks_min: 5,
                tasks_max: 7,
                seed: 600 + i,
                ..GenConfig::default()
            })
            .unwrap()
        })
        .collect();
    let cfg = SelectorTrainConfig {
        net: SelectorConfig {
            hidden: 6,
            gat_layers: 1,
            mlp_hidden: 5,
        },
        epochs: 3,
        ..SelectorTrainConfig::default()
    };
    let run = || {
        train_selector(
            &instances,
            &OrderingPolicy::Ccpm,
            &SelectionPolicy::Mct,
            &cfg,
            21,
        )
        .unwrap()
    };
    let (a, log_a) = run();
    let (b, log_b) = run();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);

    let err = train_selector_on_tuples(&[], &cfg, 0).unwrap_err();
    assert!(err.to_string().contains("empty"));

    // Random baselines are rejected up front.
    assert!(train_selector(
        &instances,
        &OrderingPolicy::rand(1),
        &SelectionPolicy::Mct,
        &cfg,
        0,
    )
    .is_err());
}

#[test]
fn selector_choice_changes_the_final_toy_cost() {
    let inst = toy_a();
    let run = |selector: &mut SelectionPolicy| {
        let mut policy = OrderingPolicy::Ccpm;
        ripsched_core::episode::run_with_order(
            &inst,
            &mut policy,
            selector,
            SolveOptions::default(),
        )
        .unwrap()
        .objective
    };
    assert_eq!(run(&mut SelectionPolicy::Tv), Cost::from_integer(3));
    assert_eq!(run(&mut SelectionPolicy::Mct), Cost::from_integer(4));
}
