use std::collections::HashMap;

use super::{Atom, Substitution, Term};

/// Atoms grouped by predicate name for candidate lookup during matching.
pub struct AtomIndex<'a, B> {
    by_predicate: HashMap<&'a str, Vec<&'a Atom<B>>>,
    len: usize,
}

impl<'a, B: Term> AtomIndex<'a, B> {
    pub fn new(atoms: impl IntoIterator<Item = &'a Atom<B>>) -> Self {
        let mut by_predicate: HashMap<&'a str, Vec<&'a Atom<B>>> = HashMap::new();
        let mut len = 0;
        for atom in atoms {
            by_predicate
                .entry(atom.predicate().name())
                .or_default()
                .push(atom);
            len += 1;
        }
        Self { by_predicate, len }
    }

    pub fn candidates(&self, predicate: &str) -> &[&'a Atom<B>] {
        self.by_predicate
            .get(predicate)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn count(&self, predicate: &str) -> usize {
        self.candidates(predicate).len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Finds an injective, type-preserving binding that extends `seed` and maps
/// every constrained atom into its target index. Returns the first binding
/// found, or `None`.
///
/// Exact set equality is obtained by the caller checking cardinalities: an
/// injective binding maps distinct atoms to distinct atoms.
pub fn find_match<A: Term, B: Term>(
    constraints: &[(&Atom<A>, &AtomIndex<'_, B>)],
    seed: &[(A, B)],
) -> Option<Substitution<A, B>> {
    let mut binding: Vec<(A, B)> = seed.to_vec();
    for (atom, index) in constraints {
        if index.count(atom.predicate().name()) == 0 {
            return None;
        }
    }
    let mut remaining: Vec<usize> = (0..constraints.len()).collect();
    if search(constraints, &mut remaining, &mut binding) {
        Some(binding.into_iter().collect())
    } else {
        None
    }
}

fn lookup<'b, A: Term, B: Term>(binding: &'b [(A, B)], key: &A) -> Option<&'b B> {
    binding.iter().find(|(k, _)| k == key).map(|(_, v)| v)
}

fn image_used<A: Term, B: Term>(binding: &[(A, B)], value: &B) -> bool {
    binding.iter().any(|(_, v)| v == value)
}

/// Pushes the bindings needed for `lifted -> ground`; returns how many were
/// pushed, or `None` (with nothing pushed) when inconsistent.
fn extend<A: Term, B: Term>(
    lifted: &Atom<A>,
    ground: &Atom<B>,
    binding: &mut Vec<(A, B)>,
) -> Option<usize> {
    let start = binding.len();
    for (a, b) in lifted.args().iter().zip(ground.args()) {
        if a.ty() != b.ty() {
            binding.truncate(start);
            return None;
        }
        match lookup(binding, a) {
            Some(bound) if bound == b => {}
            Some(_) => {
                binding.truncate(start);
                return None;
            }
            None => {
                if image_used(binding, b) {
                    binding.truncate(start);
                    return None;
                }
                binding.push((a.clone(), b.clone()));
            }
        }
    }
    Some(binding.len() - start)
}

fn consistent<A: Term, B: Term>(lifted: &Atom<A>, ground: &Atom<B>, binding: &[(A, B)]) -> bool {
    let mut local: Vec<(&A, &B)> = Vec::new();
    for (a, b) in lifted.args().iter().zip(ground.args()) {
        if a.ty() != b.ty() {
            return false;
        }
        if let Some(bound) = lookup(binding, a) {
            if bound != b {
                return false;
            }
            continue;
        }
        if let Some((_, lb)) = local.iter().find(|(la, _)| *la == a) {
            if *lb != b {
                return false;
            }
            continue;
        }
        if image_used(binding, b) || local.iter().any(|(_, lb)| *lb == b) {
            return false;
        }
        local.push((a, b));
    }
    true
}

fn search<A: Term, B: Term>(
    constraints: &[(&Atom<A>, &AtomIndex<'_, B>)],
    remaining: &mut Vec<usize>,
    binding: &mut Vec<(A, B)>,
) -> bool {
    if remaining.is_empty() {
        return true;
    }
    // Most constrained atom first.
    let mut best: Option<(usize, usize)> = None;
    for (pos, &ci) in remaining.iter().enumerate() {
        let (atom, index) = constraints[ci];
        let mut n = 0;
        for cand in index.candidates(atom.predicate().name()) {
            if consistent(atom, cand, binding) {
                n += 1;
                if let Some((_, b)) = best {
                    if n >= b {
                        break;
                    }
                }
            }
        }
        if n == 0 {
            return false;
        }
        if best.is_none_or(|(_, b)| n < b) {
            best = Some((pos, n));
        }
    }
    let (pos, _) = best.expect("remaining is non-empty");
    let ci = remaining.swap_remove(pos);
    let (atom, index) = constraints[ci];
    let mut found = false;
    for cand in index.candidates(atom.predicate().name()) {
        if let Some(pushed) = extend(atom, cand, binding) {
            if search(constraints, remaining, binding) {
                found = true;
                break;
            }
            let len = binding.len();
            binding.truncate(len - pushed);
        }
    }
    // restore the original order so callers see an unchanged list
    remaining.push(ci);
    let last = remaining.len() - 1;
    remaining.swap(pos, last);
    found
}
