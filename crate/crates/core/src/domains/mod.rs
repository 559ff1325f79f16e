//! Simulated environments: state and action types, the environment trait,
//! and the three concrete domains.

mod blocks;
mod config;
mod cover;
mod painting;

pub use blocks::Blocks;
pub use config::{BlocksConfig, ConfigError, CoverConfig, DomainConfig, PaintingConfig};
pub use cover::Cover;
pub use painting::Painting;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::DeterministicOperator;
use crate::symbolic::{split_atom_text, GroundAtom, Name, ObjectRef, Predicate, SymbolicState};

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("malformed action: {0}")]
    MalformedAction(String),
    #[error("could not generate a solvable problem after {0} attempts")]
    GenerationFailed(usize),
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("predicate {0} cannot be withheld")]
    BadWithheld(String),
    #[error("bad problem or state record: {0}")]
    BadRecord(String),
}

/// A parameterized skill: typed discrete arguments plus a real vector.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ControllerSpec {
    pub name: Name,
    pub discrete_params: Arc<[Name]>,
    pub continuous_dim: usize,
}

impl ControllerSpec {
    pub fn new(name: &str, discrete_params: &[&str], continuous_dim: usize) -> Self {
        Self {
            name: name.into(),
            discrete_params: discrete_params.iter().map(|t| Name::from(*t)).collect(),
            continuous_dim,
        }
    }
}

impl fmt::Debug for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{:?}/{}",
            self.name, &*self.discrete_params, self.continuous_dim
        )
    }
}

#[derive(Clone, PartialEq)]
pub struct Action {
    pub controller: ControllerSpec,
    pub discrete_args: Vec<ObjectRef>,
    pub continuous_args: Vec<f64>,
}

impl Action {
    pub fn new(
        controller: ControllerSpec,
        discrete_args: Vec<ObjectRef>,
        continuous_args: Vec<f64>,
    ) -> Result<Self, DomainError> {
        let a = Self {
            controller,
            discrete_args,
            continuous_args,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let c = &self.controller;
        if self.discrete_args.len() != c.discrete_params.len() {
            return Err(DomainError::MalformedAction(format!(
                "{} takes {} objects, got {}",
                c.name,
                c.discrete_params.len(),
                self.discrete_args.len()
            )));
        }
        for (o, t) in self.discrete_args.iter().zip(c.discrete_params.iter()) {
            if o.ty() != &**t {
                return Err(DomainError::MalformedAction(format!(
                    "{} expects a {t}, got {o:?}",
                    c.name
                )));
            }
        }
        if self.continuous_args.len() != c.continuous_dim {
            return Err(DomainError::MalformedAction(format!(
                "{} takes {} reals, got {}",
                c.name,
                c.continuous_dim,
                self.continuous_args.len()
            )));
        }
        if self.continuous_args.iter().any(|v| !v.is_finite()) {
            return Err(DomainError::MalformedAction(format!(
                "{} has a non-finite argument",
                c.name
            )));
        }
        Ok(())
    }

    pub fn to_record(&self) -> ActionRecord {
        ActionRecord {
            controller: self.controller.name.to_string(),
            objects: self
                .discrete_args
                .iter()
                .map(|o| o.name().to_string())
                .collect(),
            params: self.continuous_args.clone(),
        }
    }

    pub fn from_record(
        rec: &ActionRecord,
        spec: &DomainSpec,
        objects: &BTreeMap<String, ObjectRef>,
    ) -> Result<Self, DomainError> {
        let controller = spec.controller(&rec.controller).cloned().ok_or_else(|| {
            DomainError::BadRecord(format!("unknown controller {}", rec.controller))
        })?;
        let args = rec
            .objects
            .iter()
            .map(|n| {
                objects
                    .get(n)
                    .cloned()
                    .ok_or_else(|| DomainError::BadRecord(format!("unknown object {n}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Action::new(controller, args, rec.params.clone())
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.controller.name)?;
        for (i, o) in self.discrete_args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{o}")?;
        }
        write!(f, "; {:?})", self.continuous_args)
    }
}

/// Serialized form of an action; objects are referenced by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub controller: String,
    pub objects: Vec<String>,
    pub params: Vec<f64>,
}

pub type Attributes = BTreeMap<String, Vec<f64>>;

/// Object-oriented continuous state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LowLevelState {
    objects: BTreeMap<ObjectRef, Attributes>,
    globals: Attributes,
}

impl LowLevelState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_object(&mut self, obj: ObjectRef, attrs: Attributes) {
        self.objects.insert(obj, attrs);
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectRef> {
        self.objects.keys()
    }

    pub fn object_set(&self) -> BTreeSet<ObjectRef> {
        self.objects.keys().cloned().collect()
    }

    pub fn objects_of_type<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = &'a ObjectRef> + 'a {
        self.objects.keys().filter(move |o| o.ty() == ty)
    }

    pub fn object_map(&self) -> BTreeMap<String, ObjectRef> {
        self.objects
            .keys()
            .map(|o| (o.name().to_string(), o.clone()))
            .collect()
    }

    pub fn attrs(&self, obj: &ObjectRef) -> Option<&Attributes> {
        self.objects.get(obj)
    }

    /// Panics on a missing object or attribute: schemas are fixed per type.
    pub fn get(&self, obj: &ObjectRef, attr: &str) -> &[f64] {
        self.objects
            .get(obj)
            .and_then(|a| a.get(attr))
            .unwrap_or_else(|| panic!("{obj:?} has no attribute {attr}"))
    }

    pub fn scalar(&self, obj: &ObjectRef, attr: &str) -> f64 {
        self.get(obj, attr)[0]
    }

    pub fn set(&mut self, obj: &ObjectRef, attr: &str, value: Vec<f64>) {
        self.objects
            .get_mut(obj)
            .unwrap_or_else(|| panic!("unknown object {obj:?}"))
            .insert(attr.to_string(), value);
    }

    pub fn set_scalar(&mut self, obj: &ObjectRef, attr: &str, value: f64) {
        self.set(obj, attr, vec![value]);
    }

    pub fn global(&self, name: &str) -> Option<&[f64]> {
        self.globals.get(name).map(Vec::as_slice)
    }

    pub fn set_global(&mut self, name: &str, value: Vec<f64>) {
        self.globals.insert(name.to_string(), value);
    }

    pub fn is_finite(&self) -> bool {
        self.objects
            .values()
            .chain(std::iter::once(&self.globals))
            .flat_map(|a| a.values())
            .flatten()
            .all(|v| v.is_finite())
    }

    pub fn to_record(&self) -> StateRecord {
        StateRecord {
            objects: self
                .objects
                .iter()
                .map(|(o, a)| ObjectRecord {
                    name: o.name().to_string(),
                    ty: o.ty().to_string(),
                    attrs: a.clone(),
                })
                .collect(),
            globals: self.globals.clone(),
        }
    }

    pub fn from_record(rec: &StateRecord) -> Result<Self, DomainError> {
        let mut x = Self::new();
        for o in &rec.objects {
            x.add_object(ObjectRef::new(&o.name, &o.ty), o.attrs.clone());
        }
        x.globals = rec.globals.clone();
        if !x.is_finite() {
            return Err(DomainError::BadRecord("non-finite attribute".into()));
        }
        Ok(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub attrs: Attributes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub objects: Vec<ObjectRecord>,
    #[serde(default)]
    pub globals: Attributes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub objects: BTreeSet<ObjectRef>,
    pub x0: LowLevelState,
    pub goal: BTreeSet<GroundAtom>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub x0: StateRecord,
    pub goal: Vec<String>,
}

impl Problem {
    pub fn new(x0: LowLevelState, goal: BTreeSet<GroundAtom>) -> Self {
        let objects = x0.object_set();
        debug_assert!(goal
            .iter()
            .all(|g| g.args().iter().all(|o| objects.contains(o))));
        Self { objects, x0, goal }
    }

    pub fn to_record(&self) -> ProblemRecord {
        ProblemRecord {
            x0: self.x0.to_record(),
            goal: self.goal.iter().map(|g| g.to_string()).collect(),
        }
    }

    pub fn from_record(rec: &ProblemRecord, spec: &DomainSpec) -> Result<Self, DomainError> {
        let x0 = LowLevelState::from_record(&rec.x0)?;
        let objects = x0.object_map();
        let goal = rec
            .goal
            .iter()
            .map(|g| spec.ground_atom(g, &objects))
            .collect::<Result<BTreeSet<_>, _>>()?;
        Ok(Self::new(x0, goal))
    }
}

/// Static description of a domain.
#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub name: String,
    pub types: Vec<Name>,
    pub predicates: Vec<Predicate>,
    pub controllers: Vec<ControllerSpec>,
    pub oracle_operators: Vec<DeterministicOperator>,
    /// Predicates that appear in goals; never withheld.
    pub goal_predicates: Vec<String>,
}

impl DomainSpec {
    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name() == name)
    }

    pub fn controller(&self, name: &str) -> Option<&ControllerSpec> {
        self.controllers.iter().find(|c| &*c.name == name)
    }

    pub fn ground_atom(
        &self,
        text: &str,
        objects: &BTreeMap<String, ObjectRef>,
    ) -> Result<GroundAtom, DomainError> {
        let (name, args) =
            split_atom_text(text).map_err(|e| DomainError::BadRecord(e.to_string()))?;
        let pred = self
            .predicate(name)
            .ok_or_else(|| DomainError::BadRecord(format!("unknown predicate {name}")))?;
        let args = args
            .iter()
            .map(|a| {
                objects
                    .get(*a)
                    .cloned()
                    .ok_or_else(|| DomainError::BadRecord(format!("unknown object {a}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        pred.atom(args)
            .map_err(|e| DomainError::BadRecord(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemSize {
    Train,
    Eval,
}

/// A deterministic simulator with its abstraction and samplers.
pub trait Environment: Send + Sync {
    fn spec(&self) -> &DomainSpec;

    /// `f(x, a)`; infeasible actions leave the state unchanged. The action
    /// has already been validated against its controller.
    fn simulate(&self, x: &LowLevelState, action: &Action) -> LowLevelState;

    /// All ground atoms whose classifiers hold in `x`.
    fn parse(&self, x: &LowLevelState) -> SymbolicState;

    fn sample(
        &self,
        controller: &ControllerSpec,
        x: &LowLevelState,
        args: &[ObjectRef],
        rng: &mut dyn RngCore,
    ) -> Vec<f64>;

    /// A random candidate problem; solvability is checked by [`Domain`].
    fn propose_problem(&self, size: ProblemSize, rng: &mut dyn RngCore) -> Problem;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainId {
    Cover,
    Blocks,
    Painting,
}

impl DomainId {
    pub const ALL: [DomainId; 3] = [DomainId::Cover, DomainId::Blocks, DomainId::Painting];

    pub fn name(self) -> &'static str {
        match self {
            DomainId::Cover => "cover",
            DomainId::Blocks => "blocks",
            DomainId::Painting => "painting",
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainId {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cover" => Ok(DomainId::Cover),
            "blocks" => Ok(DomainId::Blocks),
            "painting" => Ok(DomainId::Painting),
            _ => Err(DomainError::UnknownDomain(s.to_string())),
        }
    }
}

const GENERATION_ATTEMPTS: usize = 200;
const GENERATION_EXPANSIONS: u64 = 200_000;

/// A shareable environment handle with an optional predicate mask.
#[derive(Clone)]
pub struct Domain {
    env: Arc<dyn Environment>,
    withheld: Arc<BTreeSet<String>>,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("name", &self.spec().name)
            .field("withheld", &self.withheld)
            .finish()
    }
}

impl Domain {
    pub fn new(env: Arc<dyn Environment>) -> Self {
        Self {
            env,
            withheld: Arc::new(BTreeSet::new()),
        }
    }

    pub fn from_id(id: DomainId, config: &DomainConfig) -> Self {
        match id {
            DomainId::Cover => Self::new(Arc::new(Cover::new(config.cover.clone()))),
            DomainId::Blocks => Self::new(Arc::new(Blocks::new(config.blocks.clone()))),
            DomainId::Painting => Self::new(Arc::new(Painting::new(config.painting.clone()))),
        }
    }

    /// The same environment with `names` removed from every parsed state.
    pub fn with_withheld<I, S>(&self, names: I) -> Result<Self, DomainError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let spec = self.spec();
        let mut withheld = (*self.withheld).clone();
        for n in names {
            let n = n.into();
            if spec.predicate(&n).is_none() || spec.goal_predicates.contains(&n) {
                return Err(DomainError::BadWithheld(n));
            }
            withheld.insert(n);
        }
        Ok(Self {
            env: self.env.clone(),
            withheld: Arc::new(withheld),
        })
    }

    pub fn withheld(&self) -> &BTreeSet<String> {
        &self.withheld
    }

    pub fn spec(&self) -> &DomainSpec {
        self.env.spec()
    }

    pub fn name(&self) -> &str {
        &self.spec().name
    }

    /// Predicates visible through [`Domain::parse`].
    pub fn predicates(&self) -> Vec<Predicate> {
        self.spec()
            .predicates
            .iter()
            .filter(|p| !self.withheld.contains(p.name()))
            .cloned()
            .collect()
    }

    pub fn controllers(&self) -> &[ControllerSpec] {
        &self.spec().controllers
    }

    pub fn controller(&self, name: &str) -> Option<&ControllerSpec> {
        self.spec().controller(name)
    }

    pub fn oracle_operators(&self) -> &[DeterministicOperator] {
        &self.spec().oracle_operators
    }

    pub fn simulate(
        &self,
        x: &LowLevelState,
        action: &Action,
    ) -> Result<LowLevelState, DomainError> {
        action.validate()?;
        if self.spec().controller(&action.controller.name) != Some(&action.controller) {
            return Err(DomainError::MalformedAction(format!(
                "controller {} is not part of {}",
                action.controller.name,
                self.name()
            )));
        }
        Ok(self.env.simulate(x, action))
    }

    pub fn parse(&self, x: &LowLevelState) -> SymbolicState {
        let s = self.env.parse(x);
        if self.withheld.is_empty() {
            s
        } else {
            s.filter_predicates(|p| !self.withheld.contains(p.name()))
        }
    }

    /// Parse without the ablation mask; used for goal checks.
    pub fn parse_full(&self, x: &LowLevelState) -> SymbolicState {
        self.env.parse(x)
    }

    pub fn goal_reached(&self, x: &LowLevelState, goal: &BTreeSet<GroundAtom>) -> bool {
        self.env.parse(x).satisfies(goal)
    }

    pub fn sample(
        &self,
        controller: &ControllerSpec,
        x: &LowLevelState,
        args: &[ObjectRef],
        rng: &mut dyn RngCore,
    ) -> Vec<f64> {
        self.env.sample(controller, x, args, rng)
    }

    /// Every typed binding of controller arguments to distinct objects.
    pub fn action_bindings(
        &self,
        objects: &BTreeSet<ObjectRef>,
    ) -> Vec<(ControllerSpec, Vec<ObjectRef>)> {
        let mut out = Vec::new();
        for c in self.controllers() {
            let mut partial: Vec<Vec<ObjectRef>> = vec![Vec::new()];
            for ty in c.discrete_params.iter() {
                let mut next = Vec::new();
                for p in &partial {
                    for o in objects.iter().filter(|o| o.ty() == &**ty && !p.contains(o)) {
                        let mut q = p.clone();
                        q.push(o.clone());
                        next.push(q);
                    }
                }
                partial = next;
            }
            out.extend(partial.into_iter().map(|args| (c.clone(), args)));
        }
        out
    }

    /// Rejection-samples problems until one is symbolically solvable with
    /// the oracle operators and its goal does not already hold.
    pub fn generate_problem(
        &self,
        size: ProblemSize,
        rng: &mut dyn RngCore,
    ) -> Result<Problem, DomainError> {
        for _ in 0..GENERATION_ATTEMPTS {
            let problem = self.env.propose_problem(size, rng);
            let s0 = self.env.parse(&problem.x0);
            if s0.satisfies(&problem.goal) {
                continue;
            }
            if crate::planner::symbolic_plan(
                self.oracle_operators(),
                &problem.objects,
                &s0,
                &problem.goal,
                GENERATION_EXPANSIONS,
            )
            .is_some()
            {
                return Ok(problem);
            }
        }
        Err(DomainError::GenerationFailed(GENERATION_ATTEMPTS))
    }
}

pub(crate) fn obj_attrs(pairs: &[(&str, Vec<f64>)]) -> Attributes {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

/// Builds the oracle operators of a domain from compact text, panicking on
/// errors since these are compile-time constants.
pub(crate) fn oracle_from_text(spec: &DomainSpec, text: &str) -> Vec<DeterministicOperator> {
    crate::operators::read_deterministic(text, spec)
        .unwrap_or_else(|e| panic!("bad oracle operators for {}: {e}", spec.name))
}
