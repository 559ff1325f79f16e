use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use crate::symbolic::{find_match, AtomIndex, EffectSet, LiftedAtom, ObjectRef, Variable};

use super::{EffectCluster, LearnerConfig, SymbolicTransition};

/// A transition with its atoms indexed for repeated matching.
pub(crate) struct Indexed<'a> {
    state: AtomIndex<'a, ObjectRef>,
    add: AtomIndex<'a, ObjectRef>,
    del: AtomIndex<'a, ObjectRef>,
    n_add: usize,
    n_del: usize,
    args: &'a [ObjectRef],
}

impl<'a> Indexed<'a> {
    pub(crate) fn new(t: &'a SymbolicTransition) -> Self {
        Self {
            state: AtomIndex::new(t.s.iter()),
            add: AtomIndex::new(t.effects().add().iter()),
            del: AtomIndex::new(t.effects().delete().iter()),
            n_add: t.effects().add().len(),
            n_del: t.effects().delete().len(),
            args: &t.action.discrete_args,
        }
    }

    fn anchors(&self, leading: &[Variable]) -> Option<Vec<(Variable, ObjectRef)>> {
        if leading.len() != self.args.len() {
            return None;
        }
        Some(
            leading
                .iter()
                .cloned()
                .zip(self.args.iter().cloned())
                .collect(),
        )
    }

    pub(crate) fn holds(&self, pre: &[&LiftedAtom], leading: &[Variable]) -> bool {
        let Some(anchors) = self.anchors(leading) else {
            return false;
        };
        let constraints: Vec<_> = pre.iter().map(|a| (*a, &self.state)).collect();
        find_match(&constraints, &anchors).is_some()
    }

    pub(crate) fn explains(
        &self,
        pre: &[&LiftedAtom],
        effects: &EffectSet<Variable>,
        leading: &[Variable],
    ) -> bool {
        if effects.add().len() != self.n_add || effects.delete().len() != self.n_del {
            return false;
        }
        let Some(anchors) = self.anchors(leading) else {
            return false;
        };
        let constraints: Vec<_> = pre
            .iter()
            .map(|a| (*a, &self.state))
            .chain(effects.add().iter().map(|a| (a, &self.add)))
            .chain(effects.delete().iter().map(|a| (a, &self.del)))
            .collect();
        find_match(&constraints, &anchors).is_some()
    }
}

/// Whether `pre` holds in `t.s` under some injective substitution that
/// binds `leading` to the action's discrete arguments.
pub fn precondition_holds(
    pre: &BTreeSet<LiftedAtom>,
    leading: &[Variable],
    t: &SymbolicTransition,
) -> bool {
    let pre: Vec<&LiftedAtom> = pre.iter().collect();
    Indexed::new(t).holds(&pre, leading)
}

/// Whether one substitution makes `pre` hold in `t.s` and maps `effects`
/// exactly onto the ground effects of `t`.
pub fn explains(
    pre: &BTreeSet<LiftedAtom>,
    effects: &EffectSet<Variable>,
    leading: &[Variable],
    t: &SymbolicTransition,
) -> bool {
    let pre: Vec<&LiftedAtom> = pre.iter().collect();
    Indexed::new(t).explains(&pre, effects, leading)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Counts {
    tp: usize,
    fp: usize,
}

impl Counts {
    fn score(self, beta: f64) -> f64 {
        beta * self.tp as f64 - self.fp as f64
    }
}

fn count(
    cand: &BTreeSet<LiftedAtom>,
    cluster: &EffectCluster,
    data: &[Indexed<'_>],
    explained: &BTreeSet<usize>,
) -> Counts {
    let pre: Vec<&LiftedAtom> = cand.iter().collect();
    let mut c = Counts { tp: 0, fp: 0 };
    for (i, t) in data.iter().enumerate() {
        if t.explains(&pre, &cluster.effects, &cluster.leading) {
            if !explained.contains(&i) {
                c.tp += 1;
            }
        } else if t.holds(&pre, &cluster.leading) {
            c.fp += 1;
        }
    }
    c
}

/// `beta * TP - FP`. A true positive is a transition explained by `cand`
/// and the cluster's effects that is not in `explained`; a false positive
/// is one where `cand` holds but the effects cannot be made to follow.
pub fn score_preconditions(
    cand: &BTreeSet<LiftedAtom>,
    cluster: &EffectCluster,
    data: &[SymbolicTransition],
    explained: &BTreeSet<usize>,
    config: &LearnerConfig,
) -> f64 {
    let indexed: Vec<Indexed<'_>> = data.iter().map(Indexed::new).collect();
    count(cand, cluster, &indexed, explained).score(config.beta)
}

/// Lifted previous states of the unexplained members. Objects outside the
/// action and effect objects are admitted up to `max_aux` at a time, chosen
/// among those sharing an atom with a bound object.
fn seeds(
    cluster: &EffectCluster,
    data: &[SymbolicTransition],
    explained: &BTreeSet<usize>,
    max_aux: usize,
) -> Vec<BTreeSet<LiftedAtom>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, binding) in &cluster.members {
        if explained.contains(i) {
            continue;
        }
        let s = &data[*i].s;
        let inverse = binding.inverse();
        let bound: BTreeSet<&ObjectRef> = binding.iter().map(|(_, o)| o).collect();
        let neighbours: BTreeSet<&ObjectRef> = s
            .iter()
            .filter(|a| a.args().iter().any(|o| bound.contains(o)))
            .flat_map(|a| a.args().iter())
            .filter(|o| !bound.contains(o))
            .collect();
        let neighbours: Vec<&ObjectRef> = neighbours.into_iter().collect();
        for aux in subsets(&neighbours, max_aux) {
            let mut sub = inverse.clone();
            for (k, o) in aux.iter().enumerate() {
                sub.insert((*o).clone(), Variable::indexed(binding.len() + k, o.ty()));
            }
            let seed: BTreeSet<LiftedAtom> =
                s.iter().filter_map(|a| sub.apply_atom(a).ok()).collect();
            if seen.insert(seed.clone()) {
                out.push(seed);
            }
        }
    }
    out
}

fn subsets<'a, T>(items: &[&'a T], max: usize) -> Vec<Vec<&'a T>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![(Vec::new(), 0usize)];
    for _ in 0..max {
        let mut next = Vec::new();
        for (set, start) in &frontier {
            for (j, item) in items.iter().enumerate().skip(*start) {
                let mut s: Vec<&'a T> = set.clone();
                s.push(*item);
                out.push(s.clone());
                next.push((s, j + 1));
            }
        }
        frontier = next;
    }
    out
}

struct Node {
    score: f64,
    seq: usize,
    cand: BTreeSet<LiftedAtom>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // higher score first, then earlier insertion
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn inner_search(
    cluster: &EffectCluster,
    data: &[SymbolicTransition],
    indexed: &[Indexed<'_>],
    explained: &BTreeSet<usize>,
    config: &LearnerConfig,
) -> Option<BTreeSet<LiftedAtom>> {
    let mut open = BinaryHeap::new();
    let mut visited: HashSet<BTreeSet<LiftedAtom>> = HashSet::new();
    let mut seq = 0;
    for seed in seeds(cluster, data, explained, config.max_aux) {
        visited.insert(seed.clone());
        let score = count(&seed, cluster, indexed, explained).score(config.beta);
        open.push(Node {
            score,
            seq,
            cand: seed,
        });
        seq += 1;
    }
    let mut best: Option<(f64, BTreeSet<LiftedAtom>)> = None;
    let mut iters = 0;
    while let Some(node) = open.pop() {
        if iters == config.max_inner_iters {
            break;
        }
        iters += 1;
        if best.as_ref().is_none_or(|(b, _)| node.score > *b) {
            best = Some((node.score, node.cand.clone()));
        }
        let best_score = best.as_ref().map_or(f64::NEG_INFINITY, |(b, _)| *b);
        let mut improved = false;
        for atom in &node.cand {
            let mut succ = node.cand.clone();
            succ.remove(atom);
            if !visited.insert(succ.clone()) {
                continue;
            }
            let score = count(&succ, cluster, indexed, explained).score(config.beta);
            improved |= score > best_score;
            open.push(Node {
                score,
                seq,
                cand: succ,
            });
            seq += 1;
        }
        if !improved {
            break;
        }
    }
    best.filter(|(score, _)| *score > 0.0).map(|(_, cand)| cand)
}

/// Inner best-first search over atom removals, started from the lifted
/// previous states of the cluster's unexplained members. `None` when the
/// best candidate does not score above zero.
pub fn learn_precondition_set(
    cluster: &EffectCluster,
    data: &[SymbolicTransition],
    explained: &BTreeSet<usize>,
    config: &LearnerConfig,
) -> Option<BTreeSet<LiftedAtom>> {
    let indexed: Vec<Indexed<'_>> = data.iter().map(Indexed::new).collect();
    inner_search(cluster, data, &indexed, explained, config)
}

/// Outer greedy search: accepts inner-search results while each explains
/// at least one new transition, up to `max_outer_steps`.
pub fn learn_precondition_sets(
    cluster: &EffectCluster,
    data: &[SymbolicTransition],
    config: &LearnerConfig,
) -> Vec<BTreeSet<LiftedAtom>> {
    let indexed: Vec<Indexed<'_>> = data.iter().map(Indexed::new).collect();
    let mut explained = BTreeSet::new();
    let mut out = Vec::new();
    for _ in 0..config.max_outer_steps {
        let Some(pre) = inner_search(cluster, data, &indexed, &explained, config) else {
            break;
        };
        let atoms: Vec<&LiftedAtom> = pre.iter().collect();
        let fresh: Vec<usize> = cluster
            .members
            .iter()
            .map(|(i, _)| *i)
            .filter(|i| {
                !explained.contains(i)
                    && indexed[*i].explains(&atoms, &cluster.effects, &cluster.leading)
            })
            .collect();
        if fresh.is_empty() {
            break;
        }
        explained.extend(fresh);
        out.push(pre);
    }
    out
}
