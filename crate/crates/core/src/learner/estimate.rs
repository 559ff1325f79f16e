use std::collections::BTreeSet;

use crate::domains::ControllerSpec;
use crate::operators::{Outcome, ProbabilisticOperator};
use crate::symbolic::{find_bijection, EffectSet, LiftedAtom, Substitution, Variable};

use super::preconditions::Indexed;
use super::{EffectCluster, LearnerError, SymbolicTransition};

fn var_index(v: &Variable) -> usize {
    v.name()
        .strip_prefix("?x")
        .and_then(|n| n.parse().ok())
        .unwrap_or(0)
}

struct Draft {
    pre: BTreeSet<LiftedAtom>,
    leading: Vec<Variable>,
    outcomes: Vec<EffectSet<Variable>>,
    next_var: usize,
}

impl Draft {
    fn new(pre: &BTreeSet<LiftedAtom>, cluster: &EffectCluster) -> Self {
        let next_var = pre
            .iter()
            .flat_map(|a| a.args().iter())
            .chain(cluster.effects.terms().iter())
            .chain(&cluster.leading)
            .map(|v| var_index(v) + 1)
            .max()
            .unwrap_or(0);
        Self {
            pre: pre.clone(),
            leading: cluster.leading.clone(),
            outcomes: vec![cluster.effects.clone()],
            next_var,
        }
    }

    /// Adds the cluster's effects if `pre` equals this draft's
    /// preconditions up to a renaming fixing the leading variables.
    fn absorb(&mut self, pre: &BTreeSet<LiftedAtom>, cluster: &EffectCluster) -> bool {
        if cluster.leading != self.leading {
            return false;
        }
        let anchors: Vec<(Variable, Variable)> = self
            .leading
            .iter()
            .map(|v| (v.clone(), v.clone()))
            .collect();
        let Some(rename) = find_bijection(&[(pre, &self.pre)], &anchors) else {
            return false;
        };
        let mut rename: Substitution<Variable, Variable> = rename;
        for v in cluster.effects.terms_in_order() {
            if rename.get(&v).is_none() {
                rename.insert(v.clone(), Variable::indexed(self.next_var, v.ty()));
                self.next_var += 1;
            }
        }
        let effects = rename
            .apply_effects(&cluster.effects)
            .expect("renaming covers every effect variable");
        if !self.outcomes.contains(&effects) {
            self.outcomes.push(effects);
        }
        true
    }
}

/// Groups learned (preconditions, cluster) pairs into operators, one per
/// distinct precondition set up to renaming. Probabilities are left at 0.
pub fn make_operators(
    controller: &ControllerSpec,
    learned: &[(BTreeSet<LiftedAtom>, &EffectCluster)],
) -> Vec<ProbabilisticOperator> {
    let mut drafts: Vec<Draft> = Vec::new();
    for (pre, cluster) in learned {
        if !drafts.iter_mut().any(|d| d.absorb(pre, cluster)) {
            drafts.push(Draft::new(pre, cluster));
        }
    }
    drafts
        .into_iter()
        .enumerate()
        .map(|(k, d)| {
            let mut rest: BTreeSet<Variable> = d
                .pre
                .iter()
                .flat_map(|a| a.args().iter().cloned())
                .collect();
            for e in &d.outcomes {
                rest.extend(e.terms());
            }
            let mut rest: Vec<Variable> = rest
                .into_iter()
                .filter(|v| !d.leading.contains(v))
                .collect();
            rest.sort_by_key(var_index);
            let params: Vec<Variable> = d.leading.iter().cloned().chain(rest).collect();
            let outcomes = d
                .outcomes
                .into_iter()
                .map(|effects| Outcome {
                    effects,
                    probability: 0.0,
                })
                .collect();
            ProbabilisticOperator::new(
                format!("{}_{k}", controller.name),
                controller.clone(),
                params,
                d.pre,
                outcomes,
            )
            .expect("learned operators list all their variables")
        })
        .collect()
}

/// Sets each outcome's probability to the fraction of transitions where
/// the preconditions hold in which that outcome's effects also follow
/// under the same substitution. Outcomes that never follow are dropped.
pub fn estimate_parameters(
    mut op: ProbabilisticOperator,
    data: &[SymbolicTransition],
) -> Result<ProbabilisticOperator, LearnerError> {
    let indexed: Vec<Indexed<'_>> = data.iter().map(Indexed::new).collect();
    let pre: Vec<&LiftedAtom> = op.preconditions.iter().collect();
    let leading = &op.params[..op.controller.discrete_params.len()];
    let support: Vec<&Indexed<'_>> = indexed.iter().filter(|t| t.holds(&pre, leading)).collect();
    if support.is_empty() {
        return Err(LearnerError::DivisionByZeroData(op.name.clone()));
    }
    for outcome in &mut op.outcomes {
        let hits = support
            .iter()
            .filter(|t| t.explains(&pre, &outcome.effects, leading))
            .count();
        outcome.probability = hits as f64 / support.len() as f64;
    }
    op.outcomes.retain(|o| o.probability > 0.0);
    if op.outcomes.is_empty() {
        return Err(LearnerError::DivisionByZeroData(op.name.clone()));
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Action;
    use crate::learner::cluster_lifted_effects;
    use crate::symbolic::{ObjectRef, Predicate, SymbolicState};

    fn pick(b: &str, top: Option<bool>) -> SymbolicTransition {
        let c = ControllerSpec::new("Pick", &["obj"], 6);
        let o = ObjectRef::new(b, "obj");
        let hand = Predicate::new("HandEmpty", &[]).atom(vec![]).unwrap();
        let s: SymbolicState = [hand].into_iter().collect();
        let s2 = match top {
            None => s.clone(),
            Some(top) => {
                let g = Predicate::new(if top { "HoldingTop" } else { "HoldingSide" }, &["obj"]);
                [g.atom(vec![o.clone()]).unwrap()].into_iter().collect()
            }
        };
        SymbolicTransition::new(s, Action::new(c, vec![o], vec![0.0; 6]).unwrap(), s2)
    }

    #[test]
    fn counts_give_probabilities() {
        let mut data = Vec::new();
        for i in 0..6 {
            data.push(pick(&format!("a{i}"), Some(true)));
        }
        for i in 0..4 {
            data.push(pick(&format!("b{i}"), Some(false)));
        }
        let clusters = cluster_lifted_effects(&data);
        let pre: BTreeSet<LiftedAtom> = [Predicate::new("HandEmpty", &[]).atom(vec![]).unwrap()]
            .into_iter()
            .collect();
        let learned: Vec<_> = clusters.iter().map(|c| (pre.clone(), c)).collect();
        let ops = make_operators(&data[0].action.controller, &learned);
        assert_eq!(ops.len(), 1);
        let op = estimate_parameters(ops[0].clone(), &data).unwrap();
        let ps: Vec<f64> = op.outcomes.iter().map(|o| o.probability).collect();
        assert_eq!(ps, [0.6, 0.4]);
    }

    #[test]
    fn no_support_is_an_error() {
        let data = vec![pick("a", Some(true))];
        let clusters = cluster_lifted_effects(&data);
        let pre: BTreeSet<LiftedAtom> = [Predicate::new("Never", &[]).atom(vec![]).unwrap()]
            .into_iter()
            .collect();
        let ops = make_operators(&data[0].action.controller, &[(pre, &clusters[0])]);
        assert!(matches!(
            estimate_parameters(ops[0].clone(), &data),
            Err(LearnerError::DivisionByZeroData(_))
        ));
    }

    #[test]
    fn different_preconditions_stay_separate() {
        let data = vec![pick("a", Some(true)), pick("b", Some(false))];
        let clusters = cluster_lifted_effects(&data);
        let x0 = Variable::indexed(0, "obj");
        let p1: BTreeSet<LiftedAtom> = [Predicate::new("Light", &["obj"])
            .atom(vec![x0.clone()])
            .unwrap()]
        .into_iter()
        .collect();
        let p2: BTreeSet<LiftedAtom> = [Predicate::new("Heavy", &["obj"]).atom(vec![x0]).unwrap()]
            .into_iter()
            .collect();
        let ops = make_operators(
            &data[0].action.controller,
            &[(p1, &clusters[0]), (p2, &clusters[1])],
        );
        assert_eq!(ops.len(), 2);
        assert_eq!(ops[1].name, "Pick_1");
    }
}
