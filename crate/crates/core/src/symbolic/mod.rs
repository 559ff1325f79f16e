//! Typed objects, predicates, atoms and effect sets.
//!
//! Everything here is immutable once built and cheap to clone: names are
//! reference counted, so atoms can be copied freely between states, clusters
//! and search nodes.

mod matching;
mod unify;

pub use matching::{find_match, AtomIndex};
pub use unify::{find_bijection, unify, unify_anchored};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use thiserror::Error;

/// Shared identifier used for object, variable, type and predicate names.
pub type Name = Arc<str>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("variable {0} has no binding")]
    UnboundVariable(String),
    #[error("predicate {predicate} expects {expected} arguments, got {got}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        got: usize,
    },
    #[error("argument {index} of {predicate} must have type {expected}, got {got}")]
    TypeMismatch {
        predicate: String,
        index: usize,
        expected: String,
        got: String,
    },
    #[error("atom {0} is both added and deleted")]
    ConflictingEffect(String),
    #[error("cannot parse atom {0:?}")]
    BadAtomSyntax(String),
}

/// Anything that can fill a predicate slot: objects and variables.
pub trait Term: Clone + Ord + Hash + fmt::Debug + fmt::Display + Send + Sync {
    fn name(&self) -> &str;
    fn ty(&self) -> &str;
}

/// A typed object of a planning problem.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectRef {
    name: Name,
    ty: Name,
}

impl ObjectRef {
    pub fn new(name: &str, ty: &str) -> Self {
        Self {
            name: name.into(),
            ty: ty.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ty(&self) -> &str {
        &self.ty
    }
}

impl Term for ObjectRef {
    fn name(&self) -> &str {
        &self.name
    }
    fn ty(&self) -> &str {
        &self.ty
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Debug for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.ty)
    }
}

/// A typed placeholder; names carry their leading `?`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable {
    name: Name,
    ty: Name,
}

impl Variable {
    pub fn new(name: &str, ty: &str) -> Self {
        let name: Name = if name.starts_with('?') {
            name.into()
        } else {
            format!("?{name}").into()
        };
        Self {
            name,
            ty: ty.into(),
        }
    }

    /// The canonical `?x{index}` variable used for lifting.
    pub fn indexed(index: usize, ty: &str) -> Self {
        Self {
            name: format!("?x{index}").into(),
            ty: ty.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ty(&self) -> &str {
        &self.ty
    }
}

impl Term for Variable {
    fn name(&self) -> &str {
        &self.name
    }
    fn ty(&self) -> &str {
        &self.ty
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.ty)
    }
}

/// A named relation with typed argument slots.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    name: Name,
    arg_types: Arc<[Name]>,
}

impl Predicate {
    pub fn new(name: &str, arg_types: &[&str]) -> Self {
        Self {
            name: name.into(),
            arg_types: arg_types.iter().map(|t| Name::from(*t)).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arg_types.len()
    }

    pub fn arg_types(&self) -> &[Name] {
        &self.arg_types
    }

    /// Builds an atom, checking arity and argument types.
    pub fn atom<T: Term>(&self, args: Vec<T>) -> Result<Atom<T>, SymbolicError> {
        Atom::new(self.clone(), args)
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity())
    }
}

/// A predicate applied to terms. Ordering is by predicate name, then by
/// argument names, which gives the canonical iteration order for sets.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom<T> {
    predicate: Predicate,
    args: Vec<T>,
}

pub type GroundAtom = Atom<ObjectRef>;
pub type LiftedAtom = Atom<Variable>;

impl<T: Term> Atom<T> {
    pub fn new(predicate: Predicate, args: Vec<T>) -> Result<Self, SymbolicError> {
        if predicate.arity() != args.len() {
            return Err(SymbolicError::ArityMismatch {
                predicate: predicate.name().to_string(),
                expected: predicate.arity(),
                got: args.len(),
            });
        }
        for (index, (arg, ty)) in args.iter().zip(predicate.arg_types()).enumerate() {
            if arg.ty() != &**ty {
                return Err(SymbolicError::TypeMismatch {
                    predicate: predicate.name().to_string(),
                    index,
                    expected: ty.to_string(),
                    got: arg.ty().to_string(),
                });
            }
        }
        Ok(Self { predicate, args })
    }

    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    pub fn args(&self) -> &[T] {
        &self.args
    }

    /// Replaces every argument through `f`. Types are carried by the
    /// caller's mapping, so the result is only checked in debug builds.
    pub fn map_args<U: Term>(&self, mut f: impl FnMut(&T) -> U) -> Atom<U> {
        let args: Vec<U> = self.args.iter().map(&mut f).collect();
        debug_assert!(args
            .iter()
            .zip(self.predicate.arg_types())
            .all(|(a, t)| a.ty() == &**t));
        Atom {
            predicate: self.predicate.clone(),
            args,
        }
    }

    pub fn try_map_args<U: Term, E>(
        &self,
        mut f: impl FnMut(&T) -> Result<U, E>,
    ) -> Result<Atom<U>, E> {
        let args = self
            .args
            .iter()
            .map(&mut f)
            .collect::<Result<Vec<U>, E>>()?;
        Ok(Atom {
            predicate: self.predicate.clone(),
            args,
        })
    }
}

impl<T: Term> fmt::Display for Atom<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate.name())?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl<T: Term> fmt::Debug for Atom<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Splits `Pred(a,b)` into its name and argument names.
pub fn split_atom_text(text: &str) -> Result<(&str, Vec<&str>), SymbolicError> {
    let bad = || SymbolicError::BadAtomSyntax(text.to_string());
    let open = text.find('(').ok_or_else(bad)?;
    if !text.ends_with(')') || open == 0 {
        return Err(bad());
    }
    let name = &text[..open];
    let inner = &text[open + 1..text.len() - 1];
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    if args.iter().any(|a| a.is_empty()) {
        return Err(bad());
    }
    Ok((name, args))
}

/// The set of ground atoms true in a low-level state.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolicState {
    atoms: BTreeSet<GroundAtom>,
}

impl SymbolicState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, atom: GroundAtom) -> bool {
        self.atoms.insert(atom)
    }

    pub fn remove(&mut self, atom: &GroundAtom) -> bool {
        self.atoms.remove(atom)
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundAtom> {
        self.atoms.iter()
    }

    pub fn atoms(&self) -> &BTreeSet<GroundAtom> {
        &self.atoms
    }

    /// True when every atom of `goal` holds here.
    pub fn satisfies<'a>(&self, goal: impl IntoIterator<Item = &'a GroundAtom>) -> bool {
        goal.into_iter().all(|g| self.atoms.contains(g))
    }

    /// Objects mentioned by any atom.
    pub fn objects(&self) -> BTreeSet<ObjectRef> {
        self.atoms
            .iter()
            .flat_map(|a| a.args().iter().cloned())
            .collect()
    }

    /// Keeps only atoms whose predicate passes `keep`.
    pub fn filter_predicates(&self, mut keep: impl FnMut(&Predicate) -> bool) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .filter(|a| keep(a.predicate()))
                .cloned()
                .collect(),
        }
    }

    /// Applies ground effects: deletes first, then adds.
    pub fn apply(&self, effects: &EffectSet<ObjectRef>) -> Self {
        let mut atoms: BTreeSet<GroundAtom> =
            self.atoms.difference(&effects.delete).cloned().collect();
        atoms.extend(effects.add.iter().cloned());
        Self { atoms }
    }
}

impl FromIterator<GroundAtom> for SymbolicState {
    fn from_iter<I: IntoIterator<Item = GroundAtom>>(iter: I) -> Self {
        Self {
            atoms: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a SymbolicState {
    type Item = &'a GroundAtom;
    type IntoIter = std::collections::btree_set::Iter<'a, GroundAtom>;
    fn into_iter(self) -> Self::IntoIter {
        self.atoms.iter()
    }
}

impl fmt::Debug for SymbolicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.atoms.iter()).finish()
    }
}

/// Add and delete lists; the two are always disjoint.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EffectSet<T> {
    add: BTreeSet<Atom<T>>,
    delete: BTreeSet<Atom<T>>,
}

impl<T: Term> Default for EffectSet<T> {
    fn default() -> Self {
        Self {
            add: BTreeSet::new(),
            delete: BTreeSet::new(),
        }
    }
}

impl<T: Term> EffectSet<T> {
    pub fn new(add: BTreeSet<Atom<T>>, delete: BTreeSet<Atom<T>>) -> Result<Self, SymbolicError> {
        if let Some(a) = add.intersection(&delete).next() {
            return Err(SymbolicError::ConflictingEffect(a.to_string()));
        }
        Ok(Self { add, delete })
    }

    pub fn add(&self) -> &BTreeSet<Atom<T>> {
        &self.add
    }

    pub fn delete(&self) -> &BTreeSet<Atom<T>> {
        &self.delete
    }

    pub fn is_empty(&self) -> bool {
        self.add.is_empty() && self.delete.is_empty()
    }

    pub fn len(&self) -> usize {
        self.add.len() + self.delete.len()
    }

    /// Terms mentioned by any effect atom, in canonical atom order
    /// (adds first, then deletes), without duplicates.
    pub fn terms_in_order(&self) -> Vec<T> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for atom in self.add.iter().chain(self.delete.iter()) {
            for t in atom.args() {
                if seen.insert(t.clone()) {
                    out.push(t.clone());
                }
            }
        }
        out
    }

    pub fn terms(&self) -> BTreeSet<T> {
        self.add
            .iter()
            .chain(self.delete.iter())
            .flat_map(|a| a.args().iter().cloned())
            .collect()
    }

    pub fn map_terms<U: Term>(&self, mut f: impl FnMut(&T) -> U) -> EffectSet<U> {
        EffectSet {
            add: self.add.iter().map(|a| a.map_args(&mut f)).collect(),
            delete: self.delete.iter().map(|a| a.map_args(&mut f)).collect(),
        }
    }
}

impl<T: Term> fmt::Display for EffectSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in &self.add {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{a}")?;
        }
        for a in &self.delete {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "not-{a}")?;
        }
        Ok(())
    }
}

impl<T: Term> fmt::Debug for EffectSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

/// Ground effects of a symbolic transition: `add = next - prev`,
/// `delete = prev - next`.
pub fn ground_effects(prev: &SymbolicState, next: &SymbolicState) -> EffectSet<ObjectRef> {
    EffectSet {
        add: next.atoms.difference(&prev.atoms).cloned().collect(),
        delete: prev.atoms.difference(&next.atoms).cloned().collect(),
    }
}

/// A finite map between terms; used both for grounding (variables to
/// objects) and for renaming.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution<K: Ord, V> {
    map: BTreeMap<K, V>,
}

/// Variables to objects.
pub type Grounding = Substitution<Variable, ObjectRef>;

impl<K: Term, V: Term> Default for Substitution<K, V> {
    fn default() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }
}

impl<K: Term, V: Term> Substitution<K, V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &K) -> Option<&V> {
        self.map.get(key)
    }

    pub fn insert(&mut self, key: K, value: V) -> Option<V> {
        self.map.insert(key, value)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &V)> {
        self.map.iter()
    }

    pub fn contains_key(&self, key: &K) -> bool {
        self.map.contains_key(key)
    }

    /// True when no two keys share an image.
    pub fn is_injective(&self) -> bool {
        let images: BTreeSet<&V> = self.map.values().collect();
        images.len() == self.map.len()
    }

    pub fn inverse(&self) -> Substitution<V, K> {
        Substitution {
            map: self
                .map
                .iter()
                .map(|(k, v)| (v.clone(), k.clone()))
                .collect(),
        }
    }

    /// `other ∘ self`: first apply `self`, then `other`. Keys of `self`
    /// whose image is unbound in `other` are dropped.
    pub fn then<W: Term>(&self, other: &Substitution<V, W>) -> Substitution<K, W> {
        Substitution {
            map: self
                .map
                .iter()
                .filter_map(|(k, v)| other.get(v).map(|w| (k.clone(), w.clone())))
                .collect(),
        }
    }

    pub fn apply_atom(&self, atom: &Atom<K>) -> Result<Atom<V>, SymbolicError> {
        atom.try_map_args(|t| {
            self.map
                .get(t)
                .cloned()
                .ok_or_else(|| SymbolicError::UnboundVariable(t.to_string()))
        })
    }

    pub fn apply_effects(&self, effects: &EffectSet<K>) -> Result<EffectSet<V>, SymbolicError> {
        Ok(EffectSet {
            add: apply_substitution(&effects.add, self)?,
            delete: apply_substitution(&effects.delete, self)?,
        })
    }
}

impl<T: Term> Substitution<T, T> {
    pub fn identity<'a>(terms: impl IntoIterator<Item = &'a T>) -> Self
    where
        T: 'a,
    {
        Self {
            map: terms.into_iter().map(|t| (t.clone(), t.clone())).collect(),
        }
    }
}

impl<K: Term, V: Term> FromIterator<(K, V)> for Substitution<K, V> {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Self {
            map: iter.into_iter().collect(),
        }
    }
}

impl<K: Term, V: Term> fmt::Debug for Substitution<K, V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}↦{v}")?;
        }
        f.write_str("}")
    }
}

/// Grounds (or renames) a set of atoms. Fails if some argument has no image.
pub fn apply_substitution<K: Term, V: Term>(
    atoms: &BTreeSet<Atom<K>>,
    sub: &Substitution<K, V>,
) -> Result<BTreeSet<Atom<V>>, SymbolicError> {
    atoms.iter().map(|a| sub.apply_atom(a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(name: &str, types: &[&str]) -> Predicate {
        Predicate::new(name, types)
    }

    fn obj(n: &str) -> ObjectRef {
        ObjectRef::new(n, "o")
    }

    fn state(atoms: &[GroundAtom]) -> SymbolicState {
        atoms.iter().cloned().collect()
    }

    #[test]
    fn ground_effects_identity_is_empty() {
        let a = pred("A", &["o"]).atom(vec![obj("o1")]).unwrap();
        let s = state(&[a]);
        let e = ground_effects(&s, &s);
        assert!(e.is_empty());
    }

    #[test]
    fn ground_effects_pick_transition() {
        let hand = pred("HandEmpty", &[]).atom::<ObjectRef>(vec![]).unwrap();
        let b1 = ObjectRef::new("b1", "block");
        let holding = pred("Holding", &["block"]).atom(vec![b1]).unwrap();
        let e = ground_effects(
            &state(std::slice::from_ref(&hand)),
            &state(std::slice::from_ref(&holding)),
        );
        assert_eq!(e.add().iter().cloned().collect::<Vec<_>>(), vec![holding]);
        assert_eq!(e.delete().iter().cloned().collect::<Vec<_>>(), vec![hand]);
    }

    #[test]
    fn ground_effects_matches_brute_force_difference() {
        let a = pred("A", &["o"]).atom(vec![obj("o1")]).unwrap();
        let b = pred("B", &["o"]).atom(vec![obj("o2")]).unwrap();
        let c = pred("C", &["o"]).atom(vec![obj("o1")]).unwrap();
        let prev = state(&[a.clone(), b.clone()]);
        let next = state(&[b, c.clone()]);
        let e = ground_effects(&prev, &next);
        // brute force: walk both lists
        let add: Vec<_> = next.iter().filter(|x| !prev.contains(x)).cloned().collect();
        let del: Vec<_> = prev.iter().filter(|x| !next.contains(x)).cloned().collect();
        assert_eq!(add, vec![c]);
        assert_eq!(del, vec![a]);
        assert_eq!(e.add().iter().cloned().collect::<Vec<_>>(), add);
        assert_eq!(e.delete().iter().cloned().collect::<Vec<_>>(), del);
    }

    #[test]
    fn atom_rejects_bad_arity_and_type() {
        let on = pred("On", &["block", "block"]);
        assert!(matches!(
            on.atom(vec![ObjectRef::new("a", "block")]),
            Err(SymbolicError::ArityMismatch { .. })
        ));
        assert!(matches!(
            on.atom(vec![
                ObjectRef::new("a", "block"),
                ObjectRef::new("t", "target")
            ]),
            Err(SymbolicError::TypeMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn effect_set_rejects_overlap() {
        let a = pred("A", &["o"]).atom(vec![obj("o1")]).unwrap();
        let set: BTreeSet<_> = [a].into_iter().collect();
        assert!(EffectSet::new(set.clone(), set).is_err());
    }

    #[test]
    fn apply_substitution_examples() {
        let p = pred("P", &["o"]);
        let x = Variable::new("?x", "o");
        let atoms: BTreeSet<_> = [p.atom(vec![x.clone()]).unwrap()].into_iter().collect();
        let sub: Grounding = [(x, obj("o1"))].into_iter().collect();
        let out = apply_substitution(&atoms, &sub).unwrap();
        assert_eq!(
            out.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            ["P(o1)"]
        );

        let on = pred("On", &["block", "block"]);
        let clear = pred("Clear", &["block"]);
        let a = Variable::new("?a", "block");
        let b = Variable::new("?b", "block");
        let atoms: BTreeSet<_> = [
            on.atom(vec![a.clone(), b.clone()]).unwrap(),
            clear.atom(vec![a.clone()]).unwrap(),
        ]
        .into_iter()
        .collect();
        let partial: Grounding = [(a.clone(), ObjectRef::new("b1", "block"))]
            .into_iter()
            .collect();
        assert_eq!(
            apply_substitution(&atoms, &partial),
            Err(SymbolicError::UnboundVariable("?b".into()))
        );
        let full: Grounding = [
            (a, ObjectRef::new("b1", "block")),
            (b, ObjectRef::new("b2", "block")),
        ]
        .into_iter()
        .collect();
        let out: Vec<String> = apply_substitution(&atoms, &full)
            .unwrap()
            .iter()
            .map(|a| a.to_string())
            .collect();
        assert_eq!(out, ["Clear(b1)", "On(b1,b2)"]);
    }

    #[test]
    fn identity_substitution_is_identity() {
        let p = pred("P", &["o", "o"]);
        let atoms: BTreeSet<_> = [p.atom(vec![obj("a"), obj("b")]).unwrap()]
            .into_iter()
            .collect();
        let id = Substitution::identity([obj("a"), obj("b")].iter());
        assert_eq!(apply_substitution(&atoms, &id).unwrap(), atoms);
    }

    #[test]
    fn split_atom_text_handles_zero_arity() {
        assert_eq!(
            split_atom_text("HandEmpty()").unwrap(),
            ("HandEmpty", vec![])
        );
        assert_eq!(split_atom_text("On(a,b)").unwrap(), ("On", vec!["a", "b"]));
        assert!(split_atom_text("On(a,)").is_err());
        assert!(split_atom_text("On").is_err());
    }

    #[test]
    fn apply_then_ground_effects_recovers_effects() {
        let a = pred("A", &["o"]).atom(vec![obj("o1")]).unwrap();
        let b = pred("B", &["o"]).atom(vec![obj("o2")]).unwrap();
        let c = pred("C", &["o"]).atom(vec![obj("o3")]).unwrap();
        let s = state(&[a.clone(), b]);
        let eff = EffectSet::new([c].into_iter().collect(), [a].into_iter().collect()).unwrap();
        assert_eq!(ground_effects(&s, &s.apply(&eff)), eff);
    }
}
