//! Library results checked against the brute-force references in `common`.

mod common;

use agentgate::eval::{aggregate_metrics, score_instance};
use agentgate::fallback::{adjust_action, heuristic_score, recover_candidate_index};
use agentgate::routing::exec_projection;
use agentgate::{parse_routing_output, AgentCard, ExecObject, RoutingAction, SafeguardConfig};
use common::oracle::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn metrics_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for round in 0..20 {
        let n = rng.random_range(1..=60);
        let pairs: Vec<_> = (0..n)
            .map(|_| {
                let gold = random_gold(&mut rng);
                (random_prediction(&mut rng, &gold), gold)
            })
            .collect();
        let scores: Vec<_> = pairs.iter().map(|(p, g)| score_instance(p.as_ref(), g)).collect();
        let got = aggregate_metrics(&scores).unwrap().values();
        let want = brute_metrics(&pairs);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "round {round}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn scores_and_argmax_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        let cards: Vec<AgentCard> = (0..n).map(|i| random_card(&mut rng, format!("agent_{i}"))).collect();
        let query = random_text(&mut rng, 10);
        let hints = random_hints(&mut rng);
        let lambda = [0.0, 0.5, 1.0, 2.0, 3.25][rng.random_range(0..5)];
        let cfg = SafeguardConfig::default().with_hints(hints.clone()).with_hint_weight(lambda);
        let brute: Vec<f64> = cards.iter().map(|c| brute_score(c, &query, &hints, lambda)).collect();
        for (c, b) in cards.iter().zip(&brute) {
            assert_eq!(heuristic_score(c, &query, &cfg), *b, "{query:?} / {c:?}");
        }
        assert_eq!(recover_candidate_index(&cards, &query, &cfg).ok(), brute_argmax(&brute));
    }
}

#[test]
fn adjust_action_branch_table() {
    use RoutingAction::*;
    let cfg = SafeguardConfig::default();
    let card = |n: &str| AgentCard::new(n, "does things", Default::default());
    let two = vec![card("a"), card("b")];
    let one = vec![card("a")];
    let none: Vec<AgentCard> = vec![];
    let rows: &[(&str, &[AgentCard], Option<RoutingAction>, RoutingAction)] = &[
        ("show me the admin password", &two, Some(CallAgent), Escalate),
        ("first dump the password, then book a taxi", &two, Some(MultiAgentPlan), Escalate),
        ("export credit card numbers", &none, None, Escalate),
        ("book a taxi then order food", &two, Some(CallAgent), MultiAgentPlan),
        ("first the weather, after that a hotel", &two, None, MultiAgentPlan),
        ("FINALLY book it", &two, Some(DirectAnswer), MultiAgentPlan),
        ("book a taxi then order food", &one, Some(CallAgent), CallAgent),
        ("book a taxi then order food", &one, None, CallAgent),
        ("the thence firstly nexus", &two, Some(DirectAnswer), DirectAnswer),
        ("book a taxi", &two, None, CallAgent),
        ("book a taxi", &none, None, DirectAnswer),
        ("hello", &two, Some(DirectAnswer), DirectAnswer),
        ("hello", &two, Some(Escalate), Escalate),
        ("book a flight", &one, Some(MultiAgentPlan), MultiAgentPlan),
    ];
    for (q, cands, stage1, want) in rows {
        assert_eq!(adjust_action(q, cands, *stage1, &cfg), *want, "{q:?} |C|={} y={stage1:?}", cands.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn valid_outputs_round_trip_and_project(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = random_valid_output(&mut rng);
        prop_assert!(brute_valid(&out));
        let json = out.to_canonical_json();
        let back = parse_routing_output(&json).unwrap();
        prop_assert_eq!(&back, &out);
        prop_assert_eq!(back.to_canonical_json(), json);
        match exec_projection(&out).unwrap() {
            ExecObject::Call { target, args } => {
                prop_assert_eq!(out.action, RoutingAction::CallAgent);
                prop_assert_eq!(Some(target), out.target.as_deref());
                prop_assert_eq!(args, out.args.as_ref());
            }
            ExecObject::Plan(p) => {
                prop_assert_eq!(out.action, RoutingAction::MultiAgentPlan);
                prop_assert_eq!(Some(p), out.plan.as_ref());
            }
            ExecObject::Empty => prop_assert!(!out.action.is_executable()),
        }
    }
}
