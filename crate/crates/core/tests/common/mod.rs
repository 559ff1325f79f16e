//! Fixture generators and brute-force oracles shared by the property
//! suites and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use loft_core::domains::DomainSpec;
use loft_core::learner::{
    cluster_lifted_effects, learn_for_controller, score_preconditions, EffectCluster,
};
use loft_core::planner::{hadd, hadd_fixpoint, GroundTask};
use loft_core::symbolic::unify;
use loft_core::{
    Action, ControllerSpec, DeterministicOperator, EffectSet, GroundAtom, LearnerConfig,
    LiftedAtom, ObjectRef, Outcome, Predicate, ProbabilisticOperator, SymbolicState,
    SymbolicTransition, Variable,
};

pub const A_OBJECTS: usize = 3;

pub fn predicates() -> Vec<Predicate> {
    vec![
        Predicate::new("P", &["a"]),
        Predicate::new("Q", &["a", "a"]),
        Predicate::new("R", &[]),
        Predicate::new("S", &["a", "b"]),
    ]
}

pub fn controller() -> ControllerSpec {
    ControllerSpec::new("Act", &["a"], 0)
}

pub fn spec() -> DomainSpec {
    DomainSpec {
        name: "fixture".into(),
        types: vec!["a".into(), "b".into()],
        predicates: predicates(),
        controllers: vec![controller()],
        oracle_operators: Vec::new(),
        goal_predicates: Vec::new(),
    }
}

pub fn a(i: usize) -> ObjectRef {
    ObjectRef::new(&format!("a{i}"), "a")
}

pub fn objects() -> Vec<ObjectRef> {
    (0..A_OBJECTS)
        .map(a)
        .chain([ObjectRef::new("b0", "b")])
        .collect()
}

/// Every well-typed atom over the four fixture objects (16 in total).
pub fn ground_atoms() -> Vec<GroundAtom> {
    atoms_over(&objects())
}

fn atoms_over<T: loft_core::symbolic::Term>(terms: &[T]) -> Vec<loft_core::Atom<T>> {
    let mut out = Vec::new();
    for p in predicates() {
        let mut args: Vec<Vec<T>> = vec![Vec::new()];
        for ty in p.arg_types() {
            args = args
                .into_iter()
                .flat_map(|prefix| {
                    terms.iter().filter(|t| t.ty() == &**ty).map(move |t| {
                        let mut next = prefix.clone();
                        next.push(t.clone());
                        next
                    })
                })
                .collect();
        }
        for args in args {
            out.push(p.atom(args).expect("typed"));
        }
    }
    out
}

pub fn lifted_atoms_over(vars: &[Variable]) -> Vec<LiftedAtom> {
    atoms_over(vars)
}

/// Type-preserving renaming of the `a` objects; `perm[i]` is the image of `a{i}`.
pub fn rename_object(o: &ObjectRef, perm: &[usize]) -> ObjectRef {
    match o
        .name()
        .strip_prefix('a')
        .and_then(|n| n.parse::<usize>().ok())
    {
        Some(i) if o.ty() == "a" => a(perm[i]),
        _ => o.clone(),
    }
}

pub fn rename_effects(e: &EffectSet<ObjectRef>, perm: &[usize]) -> EffectSet<ObjectRef> {
    e.map_terms(|o| rename_object(o, perm))
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn effect_set() -> impl Strategy<Value = EffectSet<ObjectRef>> {
    let atoms = ground_atoms();
    proptest::collection::vec(
        prop_oneof![6 => Just(0u8), 1 => Just(1u8), 1 => Just(2u8)],
        atoms.len(),
    )
    .prop_map(move |tags| {
        let mut add = BTreeSet::new();
        let mut del = BTreeSet::new();
        for (t, atom) in tags.iter().zip(&atoms) {
            match t {
                1 => {
                    add.insert(atom.clone());
                }
                2 => {
                    del.insert(atom.clone());
                }
                _ => {}
            }
        }
        EffectSet::new(add, del).expect("disjoint by construction")
    })
}

fn perm_strategy() -> impl Strategy<Value = Vec<usize>> {
    Just((0..A_OBJECTS).collect::<Vec<_>>()).prop_shuffle()
}

/// Either a renamed copy of `prev` or a fresh random effect set.
fn related(prev: EffectSet<ObjectRef>) -> impl Strategy<Value = EffectSet<ObjectRef>> {
    let renamed = perm_strategy().prop_map(move |p| rename_effects(&prev, &p));
    prop_oneof![renamed, effect_set()]
}

pub fn effect_triple() -> impl Strategy<
    Value = (
        EffectSet<ObjectRef>,
        EffectSet<ObjectRef>,
        EffectSet<ObjectRef>,
    ),
> {
    effect_set()
        .prop_flat_map(|e1| (Just(e1.clone()), related(e1)))
        .prop_flat_map(|(e1, e2)| (Just(e1), Just(e2.clone()), related(e2)))
}

pub fn brute_unifiable(e1: &EffectSet<ObjectRef>, e2: &EffectSet<ObjectRef>) -> bool {
    permutations(A_OBJECTS)
        .iter()
        .any(|p| &rename_effects(e1, p) == e2)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

pub fn check_unify_equivalence(
    e1: &EffectSet<ObjectRef>,
    e2: &EffectSet<ObjectRef>,
    e3: &EffectSet<ObjectRef>,
) -> Result<(), TestCaseError> {
    for e in [e1, e2, e3] {
        let id = unify(e, e);
        check(id.is_some(), || format!("{e} does not unify with itself"))?;
    }
    let u12 = unify(e1, e2);
    let u21 = unify(e2, e1);
    let u23 = unify(e2, e3);
    let u13 = unify(e1, e3);
    check(u12.is_some() == brute_unifiable(e1, e2), || {
        format!("unify({e1}, {e2}) disagrees with brute force")
    })?;
    check(u12.is_some() == u21.is_some(), || {
        format!("asymmetric on {e1} / {e2}")
    })?;
    check(u13.is_some() == brute_unifiable(e1, e3), || {
        format!("unify({e1}, {e3}) disagrees with brute force")
    })?;
    if let Some(s) = &u12 {
        check(s.apply_effects(e1).ok().as_ref() == Some(e2), || {
            format!("unifier does not map {e1} onto {e2}")
        })?;
        check(s.is_injective(), || "unifier is not injective".into())?;
        let back = s.inverse().apply_effects(e2);
        check(back.ok().as_ref() == Some(e1), || {
            "inverse unifier does not map back".into()
        })?;
    }
    if let (Some(s12), Some(s23)) = (&u12, &u23) {
        check(u13.is_some(), || {
            format!("transitivity fails for {e1}, {e2}, {e3}")
        })?;
        let composed = s12.then(s23).apply_effects(e1);
        check(composed.ok().as_ref() == Some(e3), || {
            "composed unifier does not map e1 onto e3".into()
        })?;
    }
    Ok(())
}

/// A transition of the fixture controller: each of the 16 atoms holds
/// before with probability `density` and flips with probability `flip`.
fn transition(density: f64, flip: f64) -> impl Strategy<Value = SymbolicTransition> {
    let atoms = ground_atoms();
    let n = atoms.len();
    (
        0..A_OBJECTS,
        proptest::collection::vec(proptest::bool::weighted(density), n),
        proptest::collection::vec(proptest::bool::weighted(flip), n),
    )
        .prop_map(move |(arg, before, flips)| {
            let mut s = SymbolicState::new();
            let mut s2 = SymbolicState::new();
            for ((atom, b), f) in atoms.iter().zip(&before).zip(&flips) {
                if *b {
                    s.insert(atom.clone());
                }
                if b ^ f {
                    s2.insert(atom.clone());
                }
            }
            let action = Action::new(controller(), vec![a(arg)], Vec::new()).expect("valid action");
            SymbolicTransition::new(s, action, s2)
        })
}

pub fn transitions(max: usize) -> impl Strategy<Value = Vec<SymbolicTransition>> {
    proptest::collection::vec(transition(0.3, 0.08), 1..=max)
}

/// Same cluster iff some renaming fixing the action argument maps one
/// transition's effects onto the other's.
pub fn brute_same_cluster(t1: &SymbolicTransition, t2: &SymbolicTransition) -> bool {
    permutations(A_OBJECTS).iter().any(|p| {
        rename_object(&t1.action.discrete_args[0], p) == t2.action.discrete_args[0]
            && &rename_effects(t1.effects(), p) == t2.effects()
    })
}

pub fn check_clustering(data: &[SymbolicTransition]) -> Result<(), TestCaseError> {
    let clusters = cluster_lifted_effects(data);
    let mut seen = vec![0usize; data.len()];
    for c in &clusters {
        for (i, _) in &c.members {
            seen[*i] += 1;
        }
    }
    check(seen.iter().all(|&n| n == 1), || {
        format!("not a partition: {seen:?}")
    })?;
    let mut expected: Vec<Vec<usize>> = Vec::new();
    for i in 0..data.len() {
        match expected
            .iter_mut()
            .find(|class| brute_same_cluster(&data[class[0]], &data[i]))
        {
            Some(class) => class.push(i),
            None => expected.push(vec![i]),
        }
    }
    let got: Vec<Vec<usize>> = clusters
        .iter()
        .map(|c| c.members.iter().map(|(i, _)| *i).collect())
        .collect();
    check(got == expected, || {
        format!("clusters {got:?}, brute force {expected:?}")
    })?;
    for c in &clusters {
        for (i, binding) in &c.members {
            let ground = binding.apply_effects(&c.effects);
            check(ground.ok().as_ref() == Some(data[*i].effects()), || {
                format!("member {i} binding does not reproduce its effects")
            })?;
        }
    }
    Ok(())
}

/// Every injective, type-preserving map from `vars` into the fixture objects.
pub fn injective_maps(vars: &[Variable]) -> Vec<BTreeMap<Variable, ObjectRef>> {
    fn go(
        vars: &[Variable],
        pool: &[ObjectRef],
        cur: &mut BTreeMap<Variable, ObjectRef>,
        out: &mut Vec<BTreeMap<Variable, ObjectRef>>,
    ) {
        let Some((v, rest)) = vars.split_first() else {
            out.push(cur.clone());
            return;
        };
        for o in pool {
            if o.ty() == v.ty() && !cur.values().any(|u| u == o) {
                cur.insert(v.clone(), o.clone());
                go(rest, pool, cur, out);
                cur.remove(v);
            }
        }
    }
    let mut out = Vec::new();
    go(vars, &objects(), &mut BTreeMap::new(), &mut out);
    out
}

fn ground(atoms: &BTreeSet<LiftedAtom>, m: &BTreeMap<Variable, ObjectRef>) -> BTreeSet<GroundAtom> {
    atoms.iter().map(|x| x.map_args(|v| m[v].clone())).collect()
}

fn vars_of<'a>(atoms: impl Iterator<Item = &'a LiftedAtom>, leading: &[Variable]) -> Vec<Variable> {
    let mut vs: BTreeSet<Variable> = leading.iter().cloned().collect();
    for x in atoms {
        vs.extend(x.args().iter().cloned());
    }
    vs.into_iter().collect()
}

pub fn oracle_holds(
    pre: &BTreeSet<LiftedAtom>,
    leading: &[Variable],
    t: &SymbolicTransition,
) -> bool {
    let vars = vars_of(pre.iter(), leading);
    injective_maps(&vars).iter().any(|m| {
        leading
            .iter()
            .zip(&t.action.discrete_args)
            .all(|(v, o)| &m[v] == o)
            && ground(pre, m).iter().all(|g| t.s.contains(g))
    })
}

pub fn oracle_explains(
    pre: &BTreeSet<LiftedAtom>,
    effects: &EffectSet<Variable>,
    leading: &[Variable],
    t: &SymbolicTransition,
) -> bool {
    let vars = vars_of(
        pre.iter().chain(effects.add()).chain(effects.delete()),
        leading,
    );
    injective_maps(&vars).iter().any(|m| {
        leading
            .iter()
            .zip(&t.action.discrete_args)
            .all(|(v, o)| &m[v] == o)
            && ground(pre, m).iter().all(|g| t.s.contains(g))
            && &ground(effects.add(), m) == t.effects().add()
            && &ground(effects.delete(), m) == t.effects().delete()
    })
}

pub fn oracle_score(
    pre: &BTreeSet<LiftedAtom>,
    cluster: &EffectCluster,
    data: &[SymbolicTransition],
    explained: &BTreeSet<usize>,
    beta: f64,
) -> f64 {
    let mut tp = 0;
    let mut fp = 0;
    for (i, t) in data.iter().enumerate() {
        if oracle_explains(pre, &cluster.effects, &cluster.leading, t) {
            if !explained.contains(&i) {
                tp += 1;
            }
        } else if oracle_holds(pre, &cluster.leading, t) {
            fp += 1;
        }
    }
    beta * tp as f64 - fp as f64
}

/// Data, a cluster choice, picks into the candidate-atom list and the
/// already-explained indices.
pub type ScoreFixture = (Vec<SymbolicTransition>, usize, Vec<usize>, Vec<bool>);

pub fn score_fixture() -> impl Strategy<Value = ScoreFixture> {
    (
        proptest::collection::vec(transition(0.35, 0.12), 1..=6),
        any::<usize>(),
        proptest::collection::vec(any::<usize>(), 0..=3),
        proptest::collection::vec(any::<bool>(), 6),
    )
}

pub fn check_score(
    (data, which, picks, explained_bits): &ScoreFixture,
) -> Result<(), TestCaseError> {
    let clusters = cluster_lifted_effects(data);
    let cluster = &clusters[which % clusters.len()];
    let mut vars: BTreeSet<Variable> = cluster.leading.iter().cloned().collect();
    vars.extend(cluster.effects.terms());
    vars.insert(Variable::new("?x9", "a"));
    let vars: Vec<Variable> = vars.into_iter().collect();
    let candidates = lifted_atoms_over(&vars);
    let pre: BTreeSet<LiftedAtom> = picks
        .iter()
        .map(|k| candidates[k % candidates.len()].clone())
        .collect();
    let explained: BTreeSet<usize> = explained_bits
        .iter()
        .enumerate()
        .filter(|(i, b)| **b && *i < data.len())
        .map(|(i, _)| i)
        .collect();
    let cfg = LearnerConfig::default();
    let got = score_preconditions(&pre, cluster, data, &explained, &cfg);
    let want = oracle_score(&pre, cluster, data, &explained, cfg.beta);
    check(got == want, || {
        format!("score {got} but exhaustive oracle gives {want} for {pre:?}")
    })
}

/// Learned probabilities equal support counts recomputed by enumeration.
pub fn check_probabilities(data: &[SymbolicTransition]) -> Result<(), TestCaseError> {
    let ops = learn_for_controller(data, &LearnerConfig::default());
    for op in &ops {
        let leading = &op.params[..1];
        let support = data
            .iter()
            .filter(|t| oracle_holds(&op.preconditions, leading, t))
            .count();
        check(support > 0, || format!("{} has no support", op.name))?;
        for o in &op.outcomes {
            let hits = data
                .iter()
                .filter(|t| oracle_explains(&op.preconditions, &o.effects, leading, t))
                .count();
            let want = hits as f64 / support as f64;
            check(o.probability == want, || {
                format!("{}: p = {} but counts give {want}", op.name, o.probability)
            })?;
            check(o.probability > 0.0 && o.probability <= 1.0, || {
                "probability outside (0, 1]".into()
            })?;
        }
    }
    Ok(())
}

/// Random probabilistic operators over the fixture vocabulary.
pub fn probabilistic_operator() -> impl Strategy<Value = ProbabilisticOperator> {
    let params = vec![
        Variable::indexed(0, "a"),
        Variable::indexed(1, "a"),
        Variable::indexed(2, "b"),
    ];
    let atoms = lifted_atoms_over(&params);
    let n = atoms.len();
    let outcome = (
        proptest::collection::vec(
            prop_oneof![5 => Just(0u8), 1 => Just(1u8), 1 => Just(2u8)],
            n,
        ),
        1u32..=1000,
    );
    (
        proptest::collection::vec(proptest::bool::weighted(0.1), n),
        proptest::collection::vec(outcome, 1..=3),
        0usize..100,
    )
        .prop_map(move |(pre_bits, outcomes, k)| {
            let pre: BTreeSet<LiftedAtom> = atoms
                .iter()
                .zip(&pre_bits)
                .filter(|(_, b)| **b)
                .map(|(x, _)| x.clone())
                .collect();
            let outcomes = outcomes
                .into_iter()
                .map(|(tags, w)| {
                    let mut add = BTreeSet::new();
                    let mut del = BTreeSet::new();
                    for (t, x) in tags.iter().zip(&atoms) {
                        match t {
                            1 => {
                                add.insert(x.clone());
                            }
                            2 => {
                                del.insert(x.clone());
                            }
                            _ => {}
                        }
                    }
                    Outcome {
                        effects: EffectSet::new(add, del).expect("disjoint"),
                        probability: w as f64 / 1000.0,
                    }
                })
                .collect();
            ProbabilisticOperator::new(
                format!("Act_{k}"),
                controller(),
                params.clone(),
                pre,
                outcomes,
            )
            .expect("all variables are parameters")
        })
}

/// hAdd on a propositional task: `(pre, add, del)` over atom names.
pub struct HaddFixture {
    pub name: &'static str,
    pub ops: Vec<(Vec<&'static str>, Vec<&'static str>, Vec<&'static str>)>,
    pub init: Vec<&'static str>,
    pub goal: Vec<&'static str>,
    pub expected: Option<u64>,
}

fn prop(name: &str) -> GroundAtom {
    Predicate::new(name, &[]).atom(vec![]).expect("nullary")
}

fn lifted_prop(name: &str) -> LiftedAtom {
    Predicate::new(name, &[]).atom(vec![]).expect("nullary")
}

pub fn propositional_task(
    ops: &[(Vec<&str>, Vec<&str>, Vec<&str>)],
    init: &[&str],
    goal: &[&str],
) -> GroundTask {
    let c = ControllerSpec::new("Op", &[], 0);
    let ops: Vec<DeterministicOperator> = ops
        .iter()
        .enumerate()
        .map(|(k, (pre, add, del))| {
            let set = |xs: &Vec<&str>| xs.iter().map(|x| lifted_prop(x)).collect::<BTreeSet<_>>();
            DeterministicOperator::new(
                format!("Op{k}"),
                c.clone(),
                Vec::new(),
                set(pre),
                EffectSet::new(set(add), set(del)).expect("disjoint"),
            )
            .expect("valid")
        })
        .collect();
    let init: SymbolicState = init.iter().map(|x| prop(x)).collect();
    let goal: BTreeSet<GroundAtom> = goal.iter().map(|x| prop(x)).collect();
    GroundTask::new(&ops, &BTreeSet::new(), &init, &goal)
}

pub fn hadd_fixtures() -> Vec<HaddFixture> {
    let op = |pre: &[&'static str], add: &[&'static str], del: &[&'static str]| {
        (pre.to_vec(), add.to_vec(), del.to_vec())
    };
    vec![
        HaddFixture {
            name: "goal already true",
            ops: vec![op(&[], &["p"], &[])],
            init: vec!["p"],
            goal: vec!["p"],
            expected: Some(0),
        },
        HaddFixture {
            name: "one step",
            ops: vec![op(&[], &["p"], &[])],
            init: vec![],
            goal: vec!["p"],
            expected: Some(1),
        },
        HaddFixture {
            name: "chain of two",
            ops: vec![op(&[], &["p"], &[]), op(&["p"], &["q"], &[])],
            init: vec![],
            goal: vec!["q"],
            expected: Some(2),
        },
        HaddFixture {
            name: "independent goals add",
            ops: vec![op(&[], &["p"], &[]), op(&[], &["q"], &[])],
            init: vec![],
            goal: vec!["p", "q"],
            expected: Some(2),
        },
        HaddFixture {
            name: "shared achiever counted twice",
            ops: vec![op(&[], &["p"], &[]), op(&["p"], &["q", "r"], &[])],
            init: vec![],
            goal: vec!["q", "r"],
            expected: Some(4),
        },
        HaddFixture {
            name: "unreachable goal",
            ops: vec![op(&[], &["p"], &[])],
            init: vec![],
            goal: vec!["q"],
            expected: None,
        },
        HaddFixture {
            name: "cheapest achiever wins",
            ops: vec![
                op(&[], &["p"], &[]),
                op(&["p"], &["q"], &[]),
                op(&[], &["q"], &[]),
            ],
            init: vec![],
            goal: vec!["q"],
            expected: Some(1),
        },
        HaddFixture {
            name: "conjunctive precondition sums",
            ops: vec![
                op(&[], &["p"], &[]),
                op(&[], &["q"], &[]),
                op(&["p", "q"], &["r"], &[]),
            ],
            init: vec![],
            goal: vec!["r"],
            expected: Some(3),
        },
        HaddFixture {
            name: "deletes are ignored",
            ops: vec![op(&[], &["p"], &["s"]), op(&["p", "s"], &["g"], &[])],
            init: vec!["s"],
            goal: vec!["g"],
            expected: Some(2),
        },
        HaddFixture {
            name: "mixed goals with alternatives",
            ops: vec![
                op(&["a"], &["b"], &[]),
                op(&["b"], &["c"], &[]),
                op(&["a", "d"], &["c"], &[]),
                op(&["b"], &["d"], &[]),
            ],
            init: vec!["a"],
            goal: vec!["b", "c"],
            expected: Some(3),
        },
    ]
}

pub fn check_hadd_fixture(f: &HaddFixture) -> Result<(), TestCaseError> {
    let task = propositional_task(&f.ops, &f.init, &f.goal);
    let got = hadd(&task, &task.init);
    let reference = hadd_fixpoint(&task, &task.init);
    check(got == f.expected, || {
        format!("{}: hadd {got:?}, expected {:?}", f.name, f.expected)
    })?;
    check(reference == f.expected, || {
        format!(
            "{}: fixpoint {reference:?}, expected {:?}",
            f.name, f.expected
        )
    })
}

/// Random propositional tasks over atoms `v0..v5`.
pub type PropTask = (
    Vec<(Vec<&'static str>, Vec<&'static str>, Vec<&'static str>)>,
    Vec<&'static str>,
    Vec<&'static str>,
);

pub fn propositional_fixture() -> impl Strategy<Value = PropTask> {
    const NAMES: [&str; 6] = ["v0", "v1", "v2", "v3", "v4", "v5"];
    let subset = || proptest::sample::subsequence(NAMES.to_vec(), 0..=3);
    let op = (
        subset(),
        proptest::sample::subsequence(NAMES.to_vec(), 1..=2),
        subset(),
    )
        .prop_map(|(pre, add, del): (Vec<&str>, Vec<&str>, Vec<&str>)| {
            let del: Vec<&str> = del.into_iter().filter(|d| !add.contains(d)).collect();
            (pre, add, del)
        });
    (
        proptest::collection::vec(op, 0..=8),
        proptest::sample::subsequence(NAMES.to_vec(), 0..=3),
        proptest::sample::subsequence(NAMES.to_vec(), 1..=3),
    )
}
