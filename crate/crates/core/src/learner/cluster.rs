use crate::symbolic::{unify_anchored, EffectSet, ObjectRef, Substitution, Variable};

use super::SymbolicTransition;

/// Transitions of one controller whose ground effects unify, labelled with
/// the lifted effects of the first member.
#[derive(Clone, Debug)]
pub struct EffectCluster {
    pub effects: EffectSet<Variable>,
    /// Variables bound to the controller's discrete arguments, in order.
    pub leading: Vec<Variable>,
    /// Index into the controller's data and the binding of the cluster
    /// variables to that transition's objects.
    pub members: Vec<(usize, Substitution<Variable, ObjectRef>)>,
}

/// Lifts a transition: discrete action arguments become `?x0..`, remaining
/// effect objects follow in order of first appearance.
pub fn lift_effects(
    t: &SymbolicTransition,
) -> (
    EffectSet<Variable>,
    Vec<Variable>,
    Substitution<Variable, ObjectRef>,
) {
    let mut binding: Substitution<Variable, ObjectRef> = Substitution::new();
    let mut leading = Vec::new();
    for (i, o) in t.action.discrete_args.iter().enumerate() {
        let v = Variable::indexed(i, o.ty());
        leading.push(v.clone());
        binding.insert(v, o.clone());
    }
    let mut next = leading.len();
    for o in t.effects().terms_in_order() {
        if t.action.discrete_args.contains(&o) {
            continue;
        }
        binding.insert(Variable::indexed(next, o.ty()), o);
        next += 1;
    }
    let inverse = binding.inverse();
    let lifted = inverse
        .apply_effects(t.effects())
        .expect("binding covers every effect object");
    (lifted, leading, binding)
}

/// Partitions `data` into classes of effects that unify with the discrete
/// action arguments held in correspondence. Clusters are ordered by their
/// first member.
pub fn cluster_lifted_effects(data: &[SymbolicTransition]) -> Vec<EffectCluster> {
    let mut clusters: Vec<EffectCluster> = Vec::new();
    for (i, t) in data.iter().enumerate() {
        let placed = clusters.iter_mut().any(|c| {
            let anchors: Vec<(Variable, ObjectRef)> = c
                .leading
                .iter()
                .cloned()
                .zip(t.action.discrete_args.iter().cloned())
                .collect();
            if anchors.len() != t.action.discrete_args.len() {
                return false;
            }
            match unify_anchored(&c.effects, t.effects(), &anchors) {
                Some(sub) => {
                    c.members.push((i, sub));
                    true
                }
                None => false,
            }
        });
        if !placed {
            let (effects, leading, binding) = lift_effects(t);
            clusters.push(EffectCluster {
                effects,
                leading,
                members: vec![(i, binding)],
            });
        }
    }
    clusters
}
