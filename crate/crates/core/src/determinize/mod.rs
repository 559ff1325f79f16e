//! All-outcome determinization and PDDL import/export.

mod pddl;

pub use pddl::{
    export_domain, export_probabilistic_domain, export_problem, parse_domain,
    parse_probabilistic_domain, parse_problem, PddlError, PddlOptions,
};

use std::collections::{BTreeMap, BTreeSet};

use crate::operators::{DeterministicOperator, ProbabilisticOperator};
use crate::symbolic::{EffectSet, Variable};

/// Default threshold below which outcomes are dropped.
pub const P_MIN: f64 = 0.001;

/// One deterministic operator per outcome with probability at least
/// `p_min`. Outcomes are numbered per controller in descending probability
/// (ties by effect order), so the first `Pick` outcome is `Pick0`.
///
/// Outcomes with no effects are skipped: they cannot make progress in a
/// search and only add self-loops.
pub fn determinize(ops: &[ProbabilisticOperator], p_min: f64) -> Vec<DeterministicOperator> {
    assert!((0.0..=1.0).contains(&p_min), "p_min must lie in [0, 1]");
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for op in ops {
        let mut outcomes: Vec<_> = op
            .outcomes
            .iter()
            .filter(|o| o.probability >= p_min && !o.effects.is_empty())
            .collect();
        outcomes.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then_with(|| a.effects.cmp(&b.effects))
        });
        for o in outcomes {
            let k = counters.entry(op.controller.name.to_string()).or_insert(0);
            let name = format!("{}{}", op.controller.name, k);
            *k += 1;
            let params = used_params(op, &o.effects);
            out.push(
                DeterministicOperator::new(
                    name,
                    op.controller.clone(),
                    params,
                    op.preconditions.clone(),
                    o.effects.clone(),
                )
                .expect("outcome of a valid operator is valid"),
            );
        }
    }
    out
}

/// Controller parameters plus the variables this outcome actually uses.
fn used_params(op: &ProbabilisticOperator, effects: &EffectSet<Variable>) -> Vec<Variable> {
    let used: BTreeSet<&Variable> = op
        .preconditions
        .iter()
        .chain(effects.add())
        .chain(effects.delete())
        .flat_map(|a| a.args())
        .collect();
    let leading = op.controller.discrete_params.len();
    op.params
        .iter()
        .enumerate()
        .filter(|(i, p)| *i < leading || used.contains(p))
        .map(|(_, p)| p.clone())
        .collect()
}

/// Strips the index suffix from an action name (`Pick0`, `Pick_3`).
pub fn controller_of(action_name: &str) -> &str {
    action_name
        .trim_end_matches(|c: char| c.is_ascii_digit())
        .trim_end_matches('_')
}
