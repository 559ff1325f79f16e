//! Learning probabilistic operators from symbolic transitions.
//!
//! Per controller: cluster transitions by lifted effects, learn one or more
//! precondition sets per cluster, merge effects that share a precondition
//! set up to renaming, then estimate outcome probabilities by counting.

mod cluster;
mod estimate;
mod preconditions;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domains::{Action, Domain, LowLevelState};
use crate::operators::ProbabilisticOperator;
use crate::symbolic::{ground_effects, EffectSet, ObjectRef, SymbolicState};

pub use cluster::{cluster_lifted_effects, lift_effects, EffectCluster};
pub use estimate::{estimate_parameters, make_operators};
pub use preconditions::{
    explains, learn_precondition_set, learn_precondition_sets, precondition_holds,
    score_preconditions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("operator {0}: preconditions never hold in the data")]
    DivisionByZeroData(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Weight of true positives against false positives.
    pub beta: f64,
    pub max_inner_iters: usize,
    pub max_outer_steps: usize,
    /// Objects outside the action and effect objects allowed in a seed.
    pub max_aux: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            beta: 10.0,
            max_inner_iters: 100,
            max_outer_steps: 8,
            max_aux: 1,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(format!("beta must be positive, got {}", self.beta));
        }
        if self.max_inner_iters == 0 || self.max_outer_steps == 0 {
            return Err("iteration limits must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicTransition {
    pub s: SymbolicState,
    /// Continuous arguments are kept but not used for learning.
    pub action: Action,
    pub s_next: SymbolicState,
    effects: EffectSet<ObjectRef>,
}

impl SymbolicTransition {
    pub fn new(s: SymbolicState, action: Action, s_next: SymbolicState) -> Self {
        let effects = ground_effects(&s, &s_next);
        Self {
            s,
            action,
            s_next,
            effects,
        }
    }

    /// Parses both endpoints of a low-level transition.
    pub fn from_low_level(
        domain: &Domain,
        x: &LowLevelState,
        action: Action,
        x_next: &LowLevelState,
    ) -> Self {
        Self::new(domain.parse(x), action, domain.parse(x_next))
    }

    pub fn effects(&self) -> &EffectSet<ObjectRef> {
        &self.effects
    }
}

/// Alg. 1 for a single controller. All transitions must share it.
pub fn learn_for_controller(
    data: &[SymbolicTransition],
    config: &LearnerConfig,
) -> Vec<ProbabilisticOperator> {
    let Some(first) = data.first() else {
        return Vec::new();
    };
    let controller = first.action.controller.clone();
    debug_assert!(data.iter().all(|t| t.action.controller == controller));
    let clusters = cluster_lifted_effects(data);
    let mut learned = Vec::new();
    for cluster in &clusters {
        // no-op clusters cannot contribute a useful outcome
        if cluster.effects.is_empty() {
            continue;
        }
        for pre in learn_precondition_sets(cluster, data, config) {
            learned.push((pre, cluster));
        }
    }
    let mut out = Vec::new();
    for op in make_operators(&controller, &learned) {
        match estimate_parameters(op, data) {
            Ok(op) => out.push(op),
            Err(e) => log::warn!("{e}"),
        }
    }
    out
}

/// Learns operators for every controller seen in `data`, in controller
/// name order. Controllers are processed in parallel.
pub fn learn_operators(
    data: &[SymbolicTransition],
    config: &LearnerConfig,
) -> Vec<ProbabilisticOperator> {
    let mut by_controller: BTreeMap<&str, Vec<SymbolicTransition>> = BTreeMap::new();
    for t in data {
        by_controller
            .entry(&t.action.controller.name)
            .or_default()
            .push(t.clone());
    }
    let groups: Vec<Vec<SymbolicTransition>> = by_controller.into_values().collect();
    groups
        .par_iter()
        .map(|d| learn_for_controller(d, config))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{ControllerSpec, DomainConfig, DomainId};
    use crate::symbolic::Predicate;

    #[test]
    fn empty_dataset_learns_nothing() {
        assert!(learn_operators(&[], &LearnerConfig::default()).is_empty());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = LearnerConfig {
            beta: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cover_pick_from_two_transitions() {
        let d = Domain::from_id(DomainId::Cover, &DomainConfig::default());
        let pick = d.controller("Pick").unwrap().clone();
        let holding = d.spec().predicate("Holding").unwrap().clone();
        let hand = d.spec().predicate("HandEmpty").unwrap().clone();
        let mk = |b: &str| {
            let o = ObjectRef::new(b, "block");
            let s: SymbolicState = [hand.atom(vec![]).unwrap()].into_iter().collect();
            let s2: SymbolicState = [holding.atom(vec![o.clone()]).unwrap()]
                .into_iter()
                .collect();
            SymbolicTransition::new(
                s,
                Action::new(pick.clone(), vec![o], vec![0.2]).unwrap(),
                s2,
            )
        };
        let ops = learn_operators(&[mk("b1"), mk("b3")], &LearnerConfig::default());
        assert_eq!(ops.len(), 1);
        assert_eq!(ops[0].name, "Pick_0");
        assert_eq!(ops[0].outcomes.len(), 1);
        assert_eq!(ops[0].outcomes[0].probability, 1.0);
        assert_eq!(
            ops[0].outcomes[0].effects.to_string(),
            "Holding(?x0) not-HandEmpty()"
        );
        let pre: Vec<String> = ops[0].preconditions.iter().map(|a| a.to_string()).collect();
        assert_eq!(pre, ["HandEmpty()"]);
    }

    #[test]
    fn single_transition_outcome_has_probability_one() {
        let c = ControllerSpec::new("Wash", &["obj"], 0);
        let p = Predicate::new("IsClean", &["obj"]);
        let o = ObjectRef::new("o", "obj");
        let t = SymbolicTransition::new(
            SymbolicState::new(),
            Action::new(c, vec![o.clone()], vec![]).unwrap(),
            [p.atom(vec![o]).unwrap()].into_iter().collect(),
        );
        let ops = learn_operators(&[t], &LearnerConfig::default());
        assert_eq!(ops.len(), 1);
        assert_eq!(ops[0].outcomes[0].probability, 1.0);
    }
}
