use std::collections::{BTreeMap, BTreeSet};

use super::{find_match, Atom, AtomIndex, EffectSet, ObjectRef, Substitution, Term};

fn predicate_signature<T: Term>(atoms: &BTreeSet<Atom<T>>) -> Vec<&str> {
    // BTreeSet iteration is already sorted by predicate name first.
    atoms.iter().map(|a| a.predicate().name()).collect()
}

fn type_histogram<'a, T: Term + 'a>(terms: impl Iterator<Item = &'a T>) -> BTreeMap<String, usize> {
    let unique: BTreeSet<&T> = terms.collect();
    let mut hist = BTreeMap::new();
    for t in unique {
        *hist.entry(t.ty().to_string()).or_insert(0) += 1;
    }
    hist
}

/// Finds a type-preserving bijection `σ` such that `σ(left) == right` for
/// every pair of atom sets, and `σ(a) == b` for every anchor `(a, b)`.
///
/// Cheap signature checks (set sizes, predicate multisets, per-type term
/// counts) reject most non-unifiable inputs before any search.
pub fn find_bijection<A: Term, B: Term>(
    pairs: &[(&BTreeSet<Atom<A>>, &BTreeSet<Atom<B>>)],
    anchors: &[(A, B)],
) -> Option<Substitution<A, B>> {
    for (l, r) in pairs {
        if l.len() != r.len() || predicate_signature(l) != predicate_signature(r) {
            return None;
        }
    }
    for (a, b) in anchors {
        if a.ty() != b.ty() {
            return None;
        }
    }
    let left_terms = pairs
        .iter()
        .flat_map(|(l, _)| l.iter().flat_map(|a| a.args().iter()))
        .chain(anchors.iter().map(|(a, _)| a));
    let right_terms = pairs
        .iter()
        .flat_map(|(_, r)| r.iter().flat_map(|a| a.args().iter()))
        .chain(anchors.iter().map(|(_, b)| b));
    if type_histogram(left_terms) != type_histogram(right_terms) {
        return None;
    }
    // anchors must themselves be a partial bijection
    let mut seed: Vec<(A, B)> = Vec::with_capacity(anchors.len());
    for (a, b) in anchors {
        match seed.iter().find(|(k, _)| k == a) {
            Some((_, v)) if v == b => continue,
            Some(_) => return None,
            None => {
                if seed.iter().any(|(_, v)| v == b) {
                    return None;
                }
                seed.push((a.clone(), b.clone()));
            }
        }
    }
    let indices: Vec<AtomIndex<'_, B>> = pairs
        .iter()
        .map(|(_, r)| AtomIndex::new(r.iter()))
        .collect();
    let constraints: Vec<(&Atom<A>, &AtomIndex<'_, B>)> = pairs
        .iter()
        .zip(&indices)
        .flat_map(|((l, _), idx)| l.iter().map(move |a| (a, idx)))
        .collect();
    find_match(&constraints, &seed)
}

/// Unifies two ground effect sets: a bijection over the objects of `e1`
/// mapping adds onto adds and deletes onto deletes.
pub fn unify(
    e1: &EffectSet<ObjectRef>,
    e2: &EffectSet<ObjectRef>,
) -> Option<Substitution<ObjectRef, ObjectRef>> {
    unify_anchored(e1, e2, &[])
}

/// As [`unify`], with some object correspondences fixed in advance (used to
/// tie together the discrete arguments of two actions).
pub fn unify_anchored<A: Term, B: Term>(
    e1: &EffectSet<A>,
    e2: &EffectSet<B>,
    anchors: &[(A, B)],
) -> Option<Substitution<A, B>> {
    find_bijection(&[(e1.add(), e2.add()), (e1.delete(), e2.delete())], anchors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{Predicate, Variable};

    fn block(n: &str) -> ObjectRef {
        ObjectRef::new(n, "block")
    }

    fn target(n: &str) -> ObjectRef {
        ObjectRef::new(n, "target")
    }

    fn effects(add: Vec<Atom<ObjectRef>>, del: Vec<Atom<ObjectRef>>) -> EffectSet<ObjectRef> {
        EffectSet::new(add.into_iter().collect(), del.into_iter().collect()).unwrap()
    }

    #[test]
    fn single_atom_rename() {
        let holding = Predicate::new("Holding", &["block"]);
        let e1 = effects(vec![holding.atom(vec![block("b1")]).unwrap()], vec![]);
        let e2 = effects(vec![holding.atom(vec![block("b7")]).unwrap()], vec![]);
        let s = unify(&e1, &e2).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(&block("b1")), Some(&block("b7")));
    }

    #[test]
    fn rejects_non_bijective() {
        let on = Predicate::new("On", &["block", "block"]);
        let e1 = effects(vec![on.atom(vec![block("a"), block("b")]).unwrap()], vec![]);
        let e2 = effects(vec![on.atom(vec![block("c"), block("c")]).unwrap()], vec![]);
        assert!(unify(&e1, &e2).is_none());
        assert!(unify(&e2, &e1).is_none());
    }

    #[test]
    fn covers_with_delete() {
        let covers = Predicate::new("Covers", &["block", "target"]);
        let holding = Predicate::new("Holding", &["block"]);
        let e1 = effects(
            vec![covers.atom(vec![block("b1"), target("t1")]).unwrap()],
            vec![holding.atom(vec![block("b1")]).unwrap()],
        );
        let e2 = effects(
            vec![covers.atom(vec![block("b2"), target("t2")]).unwrap()],
            vec![holding.atom(vec![block("b2")]).unwrap()],
        );
        let s = unify(&e1, &e2).unwrap();
        assert_eq!(s.get(&block("b1")), Some(&block("b2")));
        assert_eq!(s.get(&target("t1")), Some(&target("t2")));
    }

    #[test]
    fn add_and_delete_are_not_interchangeable() {
        let p = Predicate::new("P", &["block"]);
        let e1 = effects(vec![p.atom(vec![block("a")]).unwrap()], vec![]);
        let e2 = effects(vec![], vec![p.atom(vec![block("a")]).unwrap()]);
        assert!(unify(&e1, &e2).is_none());
    }

    #[test]
    fn anchors_pin_action_arguments() {
        let holding = Predicate::new("Holding", &["block"]);
        let e1 = effects(vec![holding.atom(vec![block("b1")]).unwrap()], vec![]);
        let e2 = effects(vec![holding.atom(vec![block("b2")]).unwrap()], vec![]);
        assert!(unify_anchored(&e1, &e2, &[(block("b1"), block("b2"))]).is_some());
        // action argument is the held block in one and a bystander in the other
        assert!(unify_anchored(&e1, &e2, &[(block("b9"), block("b2"))]).is_none());
    }

    #[test]
    fn empty_sets_unify() {
        let e: EffectSet<ObjectRef> = EffectSet::default();
        assert!(unify(&e, &e).unwrap().is_empty());
    }

    #[test]
    fn lifted_renaming() {
        let on = Predicate::new("On", &["block", "block"]);
        let v = |n: &str| Variable::new(n, "block");
        let l: BTreeSet<_> = [on.atom(vec![v("a"), v("b")]).unwrap()]
            .into_iter()
            .collect();
        let r: BTreeSet<_> = [on.atom(vec![v("y"), v("x")]).unwrap()]
            .into_iter()
            .collect();
        let s = find_bijection(&[(&l, &r)], &[]).unwrap();
        assert_eq!(s.get(&v("?a")), Some(&v("?y")));
    }
}
