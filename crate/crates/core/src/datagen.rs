//! Offline datasets: oracle demonstrations on training problems plus random
//! negative transitions from demonstrated states.
//!
//! Files are JSON lines. The first line is a header with the format
//! version, domain, seed and length; every further line is one transition.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domains::{
    Action, ActionRecord, Domain, DomainError, DomainId, DomainSpec, LowLevelState, ProblemSize,
    StateRecord,
};
use crate::learner::SymbolicTransition;
use crate::planner::{self, PlannerConfig};
use crate::symbolic::GroundAtom;

pub const DATASET_FORMAT: &str = "loft-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Fresh problems tried per demonstration before giving up.
const DEMO_ATTEMPTS: usize = 10;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("oracle planner failed on {0} consecutive training problems")]
    OracleFailure(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Demo,
    Negative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub x: LowLevelState,
    pub action: Action,
    pub x_next: LowLevelState,
    pub goal: BTreeSet<GroundAtom>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub domain: DomainId,
    pub seed: u64,
    pub transitions: Vec<Transition>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenConfig {
    pub n_demos: usize,
    /// Number of negatives; the per-domain default when absent.
    pub negatives: Option<usize>,
    pub demo_planner: PlannerConfig,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            n_demos: 20,
            negatives: None,
            demo_planner: PlannerConfig {
                max_expansions: 100_000,
                max_sampler_calls: 200_000,
                ..PlannerConfig::default()
            },
        }
    }
}

impl DatagenConfig {
    pub fn negatives_for(&self, id: DomainId) -> usize {
        self.negatives.unwrap_or(match id {
            DomainId::Cover | DomainId::Blocks => 100,
            DomainId::Painting => 2500,
        })
    }
}

/// Solves `n_problems` training problems with the oracle operators and
/// records every executed transition.
pub fn collect_demonstrations(
    domain: &Domain,
    n_problems: usize,
    planner_config: &PlannerConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<Transition>, DatagenError> {
    let mut out = Vec::new();
    for _ in 0..n_problems {
        let mut solved = false;
        for _ in 0..DEMO_ATTEMPTS {
            let problem = domain.generate_problem(ProblemSize::Train, rng)?;
            let result = planner::solve(
                domain,
                domain.oracle_operators(),
                &problem,
                planner_config,
                rng,
            );
            let Some(plan) = result.plan else {
                log::debug!("oracle failed on a training problem; regenerating");
                continue;
            };
            let mut x = problem.x0.clone();
            for action in plan {
                let x_next = domain.simulate(&x, &action)?;
                out.push(Transition {
                    x,
                    action,
                    x_next: x_next.clone(),
                    goal: problem.goal.clone(),
                    provenance: Provenance::Demo,
                });
                x = x_next;
            }
            solved = true;
            break;
        }
        if !solved {
            return Err(DatagenError::OracleFailure(DEMO_ATTEMPTS));
        }
    }
    Ok(out)
}

/// States visited by the demonstrations (each pre-state, plus the final
/// state of every episode) paired with the episode goal.
fn demo_states(demos: &[Transition]) -> Vec<(&LowLevelState, &BTreeSet<GroundAtom>)> {
    let mut out = Vec::new();
    for (i, t) in demos.iter().enumerate() {
        out.push((&t.x, &t.goal));
        let continues = demos.get(i + 1).is_some_and(|n| n.x == t.x_next);
        if !continues {
            out.push((&t.x_next, &t.goal));
        }
    }
    out
}

/// `k` transitions from uniformly chosen demonstrated states, each with a
/// uniformly chosen controller, discrete arguments and a sampler draw.
pub fn collect_negatives(
    domain: &Domain,
    demos: &[Transition],
    k: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Transition>, DatagenError> {
    let states = demo_states(demos);
    if states.is_empty() || k == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let (x, goal) = states[rng.gen_range(0..states.len())];
        let controller = &domain.controllers()[rng.gen_range(0..domain.controllers().len())];
        let bindings: Vec<Vec<_>> = domain
            .action_bindings(&x.object_set())
            .into_iter()
            .filter(|(c, _)| c == controller)
            .map(|(_, args)| args)
            .collect();
        if bindings.is_empty() {
            continue;
        }
        let args = bindings[rng.gen_range(0..bindings.len())].clone();
        let theta = domain.sample(controller, x, &args, rng);
        let action = Action::new(controller.clone(), args, theta)?;
        let x_next = domain.simulate(x, &action)?;
        out.push(Transition {
            x: x.clone(),
            action,
            x_next,
            goal: goal.clone(),
            provenance: Provenance::Negative,
        });
    }
    Ok(out)
}

/// Demonstrations followed by negatives.
pub fn collect_dataset(
    domain: &Domain,
    id: DomainId,
    config: &DatagenConfig,
    seed: u64,
    rng: &mut dyn RngCore,
) -> Result<Dataset, DatagenError> {
    let mut transitions =
        collect_demonstrations(domain, config.n_demos, &config.demo_planner, rng)?;
    let negatives = collect_negatives(domain, &transitions, config.negatives_for(id), rng)?;
    transitions.extend(negatives);
    Ok(Dataset {
        domain: id,
        seed,
        transitions,
    })
}

/// Number of transitions kept for a data fraction: `ceil(fraction * n)`.
pub fn subsample_size(n: usize, fraction: f64) -> usize {
    let f = fraction.clamp(0.0, 1.0);
    // guard against products like 0.1 * 120 = 12.000000000000002
    (((f * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Uniform sample without replacement, kept in original order.
pub fn subsample(dataset: &Dataset, fraction: f64, rng: &mut dyn RngCore) -> Dataset {
    assert!(fraction.is_finite(), "fraction must be finite");
    let n = dataset.transitions.len();
    let m = subsample_size(n, fraction);
    let mut picked = index::sample(rng, n, m).into_vec();
    picked.sort_unstable();
    Dataset {
        domain: dataset.domain,
        seed: dataset.seed,
        transitions: picked
            .into_iter()
            .map(|i| dataset.transitions[i].clone())
            .collect(),
    }
}

/// Parses every transition with `domain` (which may withhold predicates).
pub fn to_symbolic(domain: &Domain, dataset: &Dataset) -> Vec<SymbolicTransition> {
    dataset
        .transitions
        .iter()
        .map(|t| SymbolicTransition::from_low_level(domain, &t.x, t.action.clone(), &t.x_next))
        .collect()
}

/// Transitions whose stored next state differs from re-simulation.
pub fn replay_mismatches(domain: &Domain, dataset: &Dataset) -> Vec<usize> {
    dataset
        .transitions
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            domain
                .simulate(&t.x, &t.action)
                .map_or(true, |x| x != t.x_next)
        })
        .map(|(i, _)| i)
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    domain: DomainId,
    seed: u64,
    transitions: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRecord {
    tag: Provenance,
    x: StateRecord,
    action: ActionRecord,
    x_next: StateRecord,
    goal: Vec<String>,
}

pub fn write_dataset(dataset: &Dataset, mut w: impl Write) -> Result<(), DatagenError> {
    let header = Header {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        domain: dataset.domain,
        seed: dataset.seed,
        transitions: dataset.transitions.len(),
    };
    let json = |e| DatagenError::Json { line: 0, source: e };
    writeln!(w, "{}", serde_json::to_string(&header).map_err(json)?)?;
    for t in &dataset.transitions {
        let rec = TransitionRecord {
            tag: t.provenance,
            x: t.x.to_record(),
            action: t.action.to_record(),
            x_next: t.x_next.to_record(),
            goal: t.goal.iter().map(|g| g.to_string()).collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&rec).map_err(json)?)?;
    }
    Ok(())
}

pub fn read_dataset(r: impl BufRead, spec: &DomainSpec) -> Result<Dataset, DatagenError> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| DatagenError::Format("empty dataset file".into()))?;
    let header: Header =
        serde_json::from_str(&first?).map_err(|e| DatagenError::Json { line: 1, source: e })?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(DatagenError::Format(format!(
            "unsupported dataset format {} v{}",
            header.format, header.version
        )));
    }
    if header.domain.name() != spec.name {
        return Err(DatagenError::Format(format!(
            "dataset is for {}, not {}",
            header.domain, spec.name
        )));
    }
    let mut transitions = Vec::with_capacity(header.transitions);
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TransitionRecord =
            serde_json::from_str(&line).map_err(|e| DatagenError::Json {
                line: i + 1,
                source: e,
            })?;
        let x = LowLevelState::from_record(&rec.x)?;
        let objects: BTreeMap<_, _> = x.object_map();
        let action = Action::from_record(&rec.action, spec, &objects)?;
        let x_next = LowLevelState::from_record(&rec.x_next)?;
        let goal = rec
            .goal
            .iter()
            .map(|g| spec.ground_atom(g, &objects))
            .collect::<Result<BTreeSet<_>, _>>()?;
        transitions.push(Transition {
            x,
            action,
            x_next,
            goal,
            provenance: rec.tag,
        });
    }
    if transitions.len() != header.transitions {
        return Err(DatagenError::Format(format!(
            "header announces {} transitions, found {}",
            header.transitions,
            transitions.len()
        )));
    }
    Ok(Dataset {
        domain: header.domain,
        seed: header.seed,
        transitions,
    })
}
