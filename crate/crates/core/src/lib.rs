//! Learning symbolic operators from transition data and planning with them
//! in hybrid (discrete plus continuous) domains.
//!
//! The pipeline: [`datagen`] collects transitions from [`domains`], the
//! [`learner`] turns them into probabilistic operators, [`determinize`]
//! splits those into deterministic ones, and the [`planner`] uses them for
//! search-then-sample planning. [`harness`] runs the experiments.

pub mod datagen;
pub mod determinize;
pub mod domains;
pub mod harness;
pub mod learner;
pub mod operators;
pub mod planner;
pub mod symbolic;

pub use domains::{
    Action, ControllerSpec, Domain, DomainConfig, DomainId, DomainSpec, Environment, LowLevelState,
    Problem, ProblemSize,
};
pub use learner::{LearnerConfig, SymbolicTransition};
pub use operators::{DeterministicOperator, Outcome, ProbabilisticOperator};
pub use symbolic::{
    Atom, EffectSet, GroundAtom, LiftedAtom, ObjectRef, Predicate, Substitution, SymbolicState,
    Variable,
};
