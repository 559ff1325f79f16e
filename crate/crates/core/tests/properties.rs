mod common;

use std::collections::{BTreeSet, HashMap, VecDeque};

use fixedbitset::FixedBitSet;
use proptest::prelude::*;

use common::*;
use loft_core::determinize::{determinize, export_domain, parse_domain, PddlOptions};
use loft_core::learner::learn_operators;
use loft_core::operators::{
    equivalent_operator_sets, read_deterministic, read_probabilistic, write_deterministic,
    write_probabilistic,
};
use loft_core::planner::{hadd, hadd_fixpoint, Budget, GroundTask, Heuristic, SkeletonSearch};
use loft_core::symbolic::{apply_substitution, ground_effects};
use loft_core::{LearnerConfig, Substitution, SymbolicState};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn unify_is_an_equivalence_relation((e1, e2, e3) in effect_triple()) {
        check_unify_equivalence(&e1, &e2, &e3)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ground_effects_recovers_applied_effects(e in effect_set(), bits in proptest::collection::vec(any::<bool>(), 16)) {
        // a state where every delete holds and no add does
        let mut s: SymbolicState = ground_atoms()
            .into_iter()
            .zip(bits)
            .filter(|(_, b)| *b)
            .map(|(x, _)| x)
            .collect();
        for x in e.add() {
            s.remove(x);
        }
        for x in e.delete() {
            s.insert(x.clone());
        }
        prop_assert_eq!(ground_effects(&s, &s.apply(&e)), e);
    }

    #[test]
    fn identity_substitution_is_identity(e in effect_set()) {
        let atoms: BTreeSet<_> = e.add().iter().chain(e.delete()).cloned().collect();
        let terms = e.terms();
        let id = Substitution::identity(&terms);
        prop_assert_eq!(apply_substitution(&atoms, &id).unwrap(), atoms);
    }

    #[test]
    fn clustering_matches_brute_force(data in transitions(20)) {
        check_clustering(&data)?;
    }

    #[test]
    fn score_matches_exhaustive_oracle(fixture in score_fixture()) {
        check_score(&fixture)?;
    }

    #[test]
    fn probabilities_match_recounted_support(data in transitions(12)) {
        check_probabilities(&data)?;
    }

    #[test]
    fn learning_is_deterministic(data in transitions(12)) {
        let cfg = LearnerConfig::default();
        prop_assert_eq!(learn_operators(&data, &cfg), learn_operators(&data, &cfg));
    }

    #[test]
    fn determinize_counts_outcomes(ops in proptest::collection::vec(probabilistic_operator(), 1..4)) {
        let nonempty: usize = ops.iter().map(|o| o.outcomes.iter().filter(|x| !x.effects.is_empty()).count()).sum();
        prop_assert_eq!(determinize(&ops, 0.0).len(), nonempty);
        let mut last = usize::MAX;
        for p_min in [0.0, 0.001, 0.1, 0.3, 0.5, 0.9, 1.0] {
            let n = determinize(&ops, p_min).len();
            prop_assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn operator_files_round_trip(ops in proptest::collection::vec(probabilistic_operator(), 0..4)) {
        let text = write_probabilistic(&ops);
        let back = read_probabilistic(&text, &spec()).unwrap();
        prop_assert_eq!(&back, &ops);
        prop_assert_eq!(write_probabilistic(&back), text);
        let det = determinize(&ops, 0.0);
        let text = write_deterministic(&det);
        let back = read_deterministic(&text, &spec()).unwrap();
        prop_assert_eq!(&back, &det);
        prop_assert_eq!(write_deterministic(&back), text);
    }

    #[test]
    fn pddl_round_trips_up_to_renaming(ops in proptest::collection::vec(probabilistic_operator(), 0..4), strict in any::<bool>()) {
        let det = determinize(&ops, 0.0);
        let text = export_domain(&det, &spec(), PddlOptions { strict }).unwrap();
        let back = parse_domain(&text, &spec()).unwrap();
        prop_assert!(equivalent_operator_sets(&back, &det));
    }

    #[test]
    fn hadd_matches_fixpoint((ops, init, goal) in propositional_fixture()) {
        let task = propositional_task(&ops, &init, &goal);
        prop_assert_eq!(hadd(&task, &task.init), hadd_fixpoint(&task, &task.init));
    }

    #[test]
    fn hadd_is_zero_exactly_on_goal_states((ops, init, goal) in propositional_fixture()) {
        let task = propositional_task(&ops, &init, &goal);
        let satisfied = goal.iter().all(|g| init.contains(g));
        prop_assert_eq!(hadd(&task, &task.init) == Some(0), satisfied);
    }

    #[test]
    fn removing_operators_never_lowers_hadd((ops, init, goal) in propositional_fixture(), drop in any::<usize>()) {
        prop_assume!(!ops.is_empty());
        let full = propositional_task(&ops, &init, &goal);
        let mut fewer = ops.clone();
        fewer.remove(drop % ops.len());
        let reduced = propositional_task(&fewer, &init, &goal);
        let h = |t: &GroundTask| hadd(t, &t.init).unwrap_or(u64::MAX);
        prop_assert!(h(&reduced) >= h(&full));
    }

    #[test]
    fn blind_search_finds_shortest_plans((ops, init, goal) in propositional_fixture()) {
        let task = propositional_task(&ops, &init, &goal);
        let shortest = bfs_length(&task);
        let mut budget = Budget::new(1_000_000, 0, None);
        let found = SkeletonSearch::graph(&task, Heuristic::Blind).next(&mut budget);
        prop_assert_eq!(found.as_ref().map(Vec::len), shortest);
        let mut budget = Budget::new(20_000, 0, None);
        if let Some(path) = SkeletonSearch::new(&task, Heuristic::Blind).next(&mut budget) {
            prop_assert_eq!(Some(path.len()), shortest);
        }
    }

    #[test]
    fn first_hadd_skeleton_reaches_the_goal((ops, init, goal) in propositional_fixture()) {
        let task = propositional_task(&ops, &init, &goal);
        let mut budget = Budget::new(20_000, 0, None);
        if let Some(path) = SkeletonSearch::new(&task, Heuristic::HAdd).next(&mut budget) {
            let mut s = task.init.clone();
            for k in path {
                prop_assert!(task.ops[k].applicable(&s));
                s = task.ops[k].apply(&s);
            }
            prop_assert!(task.is_goal(&s));
        }
    }
}

fn bfs_length(task: &GroundTask) -> Option<usize> {
    let mut dist: HashMap<FixedBitSet, usize> = HashMap::new();
    let mut queue = VecDeque::from([task.init.clone()]);
    dist.insert(task.init.clone(), 0);
    while let Some(s) = queue.pop_front() {
        let d = dist[&s];
        if task.is_goal(&s) {
            return Some(d);
        }
        for o in task.ops.iter().filter(|o| o.applicable(&s)) {
            let next = o.apply(&s);
            if !dist.contains_key(&next) {
                dist.insert(next.clone(), d + 1);
                queue.push_back(next);
            }
        }
    }
    None
}

#[test]
fn hadd_matches_hand_computation() {
    let fixtures = hadd_fixtures();
    assert_eq!(fixtures.len(), 10);
    for f in &fixtures {
        check_hadd_fixture(f).unwrap();
    }
}
