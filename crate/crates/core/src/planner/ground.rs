use std::collections::{BTreeSet, HashMap, HashSet};

use fixedbitset::FixedBitSet;

use crate::domains::ControllerSpec;
use crate::operators::DeterministicOperator;
use crate::symbolic::{Atom, GroundAtom, ObjectRef, SymbolicState, Variable};

/// Every assignment of distinct, type-matching objects to the parameters of
/// each operator, as `(operator index, objects in parameter order)`.
pub fn ground_operators(
    ops: &[DeterministicOperator],
    objects: &BTreeSet<ObjectRef>,
) -> Vec<(usize, Vec<ObjectRef>)> {
    let objects: Vec<&ObjectRef> = objects.iter().collect();
    let mut out = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        let mut binding: Vec<ObjectRef> = Vec::with_capacity(op.params.len());
        enumerate(&op.params, &objects, &mut binding, &mut |b| {
            out.push((i, b.to_vec()))
        });
    }
    out
}

fn enumerate(
    params: &[Variable],
    objects: &[&ObjectRef],
    binding: &mut Vec<ObjectRef>,
    emit: &mut dyn FnMut(&[ObjectRef]),
) {
    let depth = binding.len();
    if depth == params.len() {
        emit(binding);
        return;
    }
    for &o in objects {
        if o.ty() == params[depth].ty() && !binding.contains(o) {
            binding.push(o.clone());
            enumerate(params, objects, binding, emit);
            binding.pop();
        }
    }
}

/// Dense ids for ground atoms.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    ids: HashMap<GroundAtom, u32>,
    atoms: Vec<GroundAtom>,
}

impl Interner {
    pub fn intern(&mut self, atom: &GroundAtom) -> u32 {
        if let Some(&id) = self.ids.get(atom) {
            return id;
        }
        let id = self.atoms.len() as u32;
        self.ids.insert(atom.clone(), id);
        self.atoms.push(atom.clone());
        id
    }

    pub fn get(&self, atom: &GroundAtom) -> Option<u32> {
        self.ids.get(atom).copied()
    }

    pub fn atom(&self, id: u32) -> &GroundAtom {
        &self.atoms[id as usize]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct GroundOperator {
    /// Index of the lifted operator.
    pub op: usize,
    pub name: String,
    pub controller: ControllerSpec,
    /// Objects bound to the operator parameters, in order.
    pub binding: Vec<ObjectRef>,
    pub pre: Vec<u32>,
    pub add: Vec<u32>,
    pub del: Vec<u32>,
}

impl GroundOperator {
    pub fn discrete_args(&self) -> &[ObjectRef] {
        &self.binding[..self.controller.discrete_params.len()]
    }

    pub fn applicable(&self, state: &FixedBitSet) -> bool {
        self.pre.iter().all(|&p| state.contains(p as usize))
    }

    pub fn apply(&self, state: &FixedBitSet) -> FixedBitSet {
        let mut next = state.clone();
        for &d in &self.del {
            next.set(d as usize, false);
        }
        for &a in &self.add {
            next.insert(a as usize);
        }
        next
    }
}

/// A grounded planning task: reachable ground operators plus interned
/// initial state and goal.
#[derive(Clone, Debug)]
pub struct GroundTask {
    pub interner: Interner,
    pub ops: Vec<GroundOperator>,
    pub init: FixedBitSet,
    pub goal: Vec<u32>,
    /// For each atom, the operators that have it as a precondition.
    pub pre_of: Vec<Vec<usize>>,
}

fn ground_atoms(
    atoms: &BTreeSet<Atom<Variable>>,
    params: &[Variable],
    binding: &[ObjectRef],
) -> Vec<GroundAtom> {
    atoms
        .iter()
        .map(|a| {
            a.map_args(|v| {
                let i = params
                    .iter()
                    .position(|p| p == v)
                    .expect("operator variables are parameters");
                binding[i].clone()
            })
        })
        .collect()
}

impl GroundTask {
    pub fn new(
        ops: &[DeterministicOperator],
        objects: &BTreeSet<ObjectRef>,
        init: &SymbolicState,
        goal: &BTreeSet<GroundAtom>,
    ) -> Self {
        struct Raw {
            op: usize,
            binding: Vec<ObjectRef>,
            pre: Vec<GroundAtom>,
            add: Vec<GroundAtom>,
            del: Vec<GroundAtom>,
        }
        let raw: Vec<Raw> = ground_operators(ops, objects)
            .into_iter()
            .map(|(i, binding)| {
                let op = &ops[i];
                Raw {
                    op: i,
                    pre: ground_atoms(&op.preconditions, &op.params, &binding),
                    add: ground_atoms(op.effects.add(), &op.params, &binding),
                    del: ground_atoms(op.effects.delete(), &op.params, &binding),
                    binding,
                }
            })
            .collect();
        // relaxed reachability prunes groundings that can never fire
        let mut reachable: HashSet<&GroundAtom> = init.iter().collect();
        let mut used = vec![false; raw.len()];
        loop {
            let mut changed = false;
            for (k, r) in raw.iter().enumerate() {
                if !used[k] && r.pre.iter().all(|p| reachable.contains(p)) {
                    used[k] = true;
                    changed = true;
                    reachable.extend(r.add.iter());
                }
            }
            if !changed {
                break;
            }
        }
        let mut interner = Interner::default();
        for a in init.iter() {
            interner.intern(a);
        }
        let goal_ids: Vec<u32> = goal.iter().map(|g| interner.intern(g)).collect();
        let mut ground = Vec::new();
        for (r, _) in raw.into_iter().zip(used).filter(|(_, u)| *u) {
            let op = &ops[r.op];
            let intern_all = |xs: &[GroundAtom], interner: &mut Interner| -> Vec<u32> {
                xs.iter().map(|a| interner.intern(a)).collect()
            };
            let pre = intern_all(&r.pre, &mut interner);
            let add = intern_all(&r.add, &mut interner);
            let del = intern_all(&r.del, &mut interner);
            ground.push(GroundOperator {
                op: r.op,
                name: op.name.clone(),
                controller: op.controller.clone(),
                binding: r.binding,
                pre,
                add,
                del,
            });
        }
        let n = interner.len();
        let mut init_bits = FixedBitSet::with_capacity(n);
        for a in init.iter() {
            init_bits.insert(interner.get(a).expect("interned") as usize);
        }
        let mut pre_of = vec![Vec::new(); n];
        for (k, o) in ground.iter().enumerate() {
            for &p in &o.pre {
                pre_of[p as usize].push(k);
            }
        }
        Self {
            interner,
            ops: ground,
            init: init_bits,
            goal: goal_ids,
            pre_of,
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.interner.len()
    }

    pub fn is_goal(&self, state: &FixedBitSet) -> bool {
        self.goal.iter().all(|&g| state.contains(g as usize))
    }

    pub fn decode(&self, state: &FixedBitSet) -> SymbolicState {
        state
            .ones()
            .map(|i| self.interner.atom(i as u32).clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{EffectSet, Predicate};

    fn op(n_params: usize) -> DeterministicOperator {
        let c = ControllerSpec::new("Act", &[], 0);
        let params: Vec<Variable> = (0..n_params)
            .map(|i| Variable::indexed(i, "block"))
            .collect();
        let p = Predicate::new("P", &vec!["block"; n_params]);
        let eff = EffectSet::new(
            [p.atom(params.clone()).unwrap()].into_iter().collect(),
            BTreeSet::new(),
        )
        .unwrap();
        DeterministicOperator::new("Act0", c, params, BTreeSet::new(), eff).unwrap()
    }

    fn blocks(n: usize) -> BTreeSet<ObjectRef> {
        (0..n)
            .map(|i| ObjectRef::new(&format!("b{i}"), "block"))
            .collect()
    }

    #[test]
    fn grounding_counts() {
        assert_eq!(ground_operators(&[op(1)], &blocks(3)).len(), 3);
        // distinct bindings: 3 * 2, not 3 * 3
        assert_eq!(ground_operators(&[op(2)], &blocks(3)).len(), 6);
        assert_eq!(ground_operators(&[op(0)], &blocks(3)).len(), 1);
        let mixed: BTreeSet<ObjectRef> = blocks(2)
            .into_iter()
            .chain([ObjectRef::new("t", "target")])
            .collect();
        assert_eq!(ground_operators(&[op(1)], &mixed).len(), 2);
    }
}
