//! Search-then-sample planning: A* over ground operators yields plan
//! skeletons, backtracking over sampler draws refines them into actions.

mod ground;
mod heuristic;
mod refine;
mod search;

pub use ground::{ground_operators, GroundOperator, GroundTask, Interner};
pub use heuristic::{hadd, hadd_fixpoint, Heuristic};
pub use search::SkeletonSearch;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::domains::{Action, ControllerSpec, Domain, Problem};
use crate::operators::DeterministicOperator;
use crate::symbolic::{GroundAtom, ObjectRef, SymbolicState};

/// How `n_samples` is counted when backtracking re-enters a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleBudget {
    /// Up to `n_samples` draws every time the step is visited.
    PerVisit,
    /// Up to `n_samples` draws for the step over the whole refinement.
    PerStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub n_samples: usize,
    pub sample_budget: SampleBudget,
    pub heuristic: Heuristic,
    pub max_expansions: u64,
    pub max_sampler_calls: u64,
    /// Optional wall-clock limit in milliseconds on top of the budgets.
    pub timeout_ms: Option<u64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n_samples: 10,
            sample_budget: SampleBudget::PerVisit,
            heuristic: Heuristic::HAdd,
            max_expansions: 10_000,
            max_sampler_calls: 100_000,
            timeout_ms: None,
        }
    }
}

/// Node-expansion and sampler-call allowance for one solve.
#[derive(Clone, Debug)]
pub struct Budget {
    max_expansions: u64,
    max_sampler_calls: u64,
    deadline: Option<Instant>,
    pub expansions: u64,
    pub sampler_calls: u64,
}

impl Budget {
    pub fn new(max_expansions: u64, max_sampler_calls: u64, timeout: Option<Duration>) -> Self {
        Self {
            max_expansions,
            max_sampler_calls,
            deadline: timeout.map(|t| Instant::now() + t),
            expansions: 0,
            sampler_calls: 0,
        }
    }

    pub fn from_config(cfg: &PlannerConfig) -> Self {
        Self::new(
            cfg.max_expansions,
            cfg.max_sampler_calls,
            cfg.timeout_ms.map(Duration::from_millis),
        )
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn take_expansion(&mut self) -> bool {
        if self.expansions >= self.max_expansions || self.timed_out() {
            return false;
        }
        self.expansions += 1;
        true
    }

    pub fn take_sample(&mut self) -> bool {
        if self.sampler_calls >= self.max_sampler_calls || self.timed_out() {
            return false;
        }
        self.sampler_calls += 1;
        true
    }
}

/// A controller with its discrete arguments bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionTemplate {
    pub controller: ControllerSpec,
    pub discrete_args: Vec<ObjectRef>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonStep {
    pub template: ActionTemplate,
    /// Symbolic state expected after this step.
    pub expected: SymbolicState,
    pub operator: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanSkeleton {
    pub steps: Vec<SkeletonStep>,
}

impl PlanSkeleton {
    pub fn from_ops(task: &GroundTask, ops: &[usize]) -> Self {
        let mut state = task.init.clone();
        let steps = ops
            .iter()
            .map(|&k| {
                let op = &task.ops[k];
                state = op.apply(&state);
                SkeletonStep {
                    template: ActionTemplate {
                        controller: op.controller.clone(),
                        discrete_args: op.discrete_args().to_vec(),
                    },
                    expected: task.decode(&state),
                    operator: op.name.clone(),
                }
            })
            .collect();
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub skeletons: u64,
    pub expansions: u64,
    pub sampler_calls: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub plan: Option<Vec<Action>>,
    pub stats: PlanStats,
}

impl SolveResult {
    pub fn solved(&self) -> bool {
        self.plan.is_some()
    }
}

/// Executes `plan` from the problem's initial state and checks the goal.
pub fn replay_reaches_goal(domain: &Domain, problem: &Problem, plan: &[Action]) -> bool {
    let mut x = problem.x0.clone();
    for a in plan {
        match domain.simulate(&x, a) {
            Ok(y) => x = y,
            Err(_) => return false,
        }
    }
    domain.goal_reached(&x, &problem.goal)
}

/// First A* plan over the symbolic task only, as ground operators.
pub fn symbolic_plan(
    ops: &[DeterministicOperator],
    objects: &BTreeSet<ObjectRef>,
    init: &SymbolicState,
    goal: &BTreeSet<GroundAtom>,
    max_expansions: u64,
) -> Option<Vec<GroundOperator>> {
    let task = GroundTask::new(ops, objects, init, goal);
    let mut budget = Budget::new(max_expansions, 0, None);
    let mut search = SkeletonSearch::graph(&task, Heuristic::HAdd);
    search
        .next(&mut budget)
        .map(|path| path.into_iter().map(|k| task.ops[k].clone()).collect())
}

/// Alternates skeleton search and refinement until a plan is found or the
/// budget runs out. Returned plans have been replayed to the goal.
pub fn solve(
    domain: &Domain,
    ops: &[DeterministicOperator],
    problem: &Problem,
    config: &PlannerConfig,
    rng: &mut dyn RngCore,
) -> SolveResult {
    let start = Instant::now();
    let mut budget = Budget::from_config(config);
    let mut stats = PlanStats::default();
    let s0 = domain.parse(&problem.x0);
    let task = GroundTask::new(ops, &problem.objects, &s0, &problem.goal);
    let mut search = SkeletonSearch::new(&task, config.heuristic);
    let mut plan = None;
    while let Some(path) = search.next(&mut budget) {
        stats.skeletons += 1;
        let skeleton = PlanSkeleton::from_ops(&task, &path);
        match refine::refine(
            domain,
            &problem.x0,
            &skeleton,
            config.n_samples,
            config.sample_budget,
            rng,
            &mut budget,
        ) {
            refine::Refined::Found(actions) => {
                if replay_reaches_goal(domain, problem, &actions) {
                    plan = Some(actions);
                    break;
                }
                log::warn!("refined plan failed replay; trying next skeleton");
            }
            refine::Refined::Failed => {}
            refine::Refined::OutOfBudget => break,
        }
    }
    stats.expansions = budget.expansions;
    stats.sampler_calls = budget.sampler_calls;
    stats.wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    SolveResult { plan, stats }
}

/// Planning without operators: every sequence of action templates, shortest
/// first and in lexicographic order, is refined with the goal as the only
/// acceptance test.
///
/// A draw that leaves the state unchanged is discarded: the resulting prefix
/// is equivalent to a shorter skeleton that was already tried.
pub fn solve_no_operators(
    domain: &Domain,
    problem: &Problem,
    config: &PlannerConfig,
    rng: &mut dyn RngCore,
) -> SolveResult {
    let start = Instant::now();
    let mut budget = Budget::from_config(config);
    let mut stats = PlanStats::default();
    let templates: Vec<ActionTemplate> = domain
        .action_bindings(&problem.objects)
        .into_iter()
        .map(|(controller, discrete_args)| ActionTemplate {
            controller,
            discrete_args,
        })
        .collect();
    let mut plan = None;
    if domain.goal_reached(&problem.x0, &problem.goal) {
        plan = Some(Vec::new());
    } else if !templates.is_empty() {
        let mut length = 1;
        'outer: loop {
            let mut idx = vec![0usize; length];
            loop {
                if !budget.take_expansion() {
                    break 'outer;
                }
                stats.skeletons += 1;
                let seq: Vec<&ActionTemplate> = idx.iter().map(|&i| &templates[i]).collect();
                let mut actions = Vec::new();
                match refine_to_goal(
                    domain,
                    problem,
                    &seq,
                    &problem.x0,
                    config,
                    rng,
                    &mut budget,
                    &mut actions,
                ) {
                    Some(true) => {
                        plan = Some(actions);
                        break 'outer;
                    }
                    Some(false) => {}
                    None => break 'outer,
                }
                // odometer increment, last position fastest
                let mut pos = length;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < templates.len() {
                        break;
                    }
                    idx[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX {
                    break;
                }
            }
            length += 1;
        }
    }
    if let Some(p) = &plan {
        debug_assert!(replay_reaches_goal(domain, problem, p));
    }
    stats.expansions = budget.expansions;
    stats.sampler_calls = budget.sampler_calls;
    stats.wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    SolveResult { plan, stats }
}

/// `Some(true)` on success, `Some(false)` when this skeleton is exhausted,
/// `None` when the budget ran out.
#[allow(clippy::too_many_arguments)]
fn refine_to_goal(
    domain: &Domain,
    problem: &Problem,
    seq: &[&ActionTemplate],
    x: &crate::domains::LowLevelState,
    config: &PlannerConfig,
    rng: &mut dyn RngCore,
    budget: &mut Budget,
    actions: &mut Vec<Action>,
) -> Option<bool> {
    let Some((first, rest)) = seq.split_first() else {
        return Some(domain.goal_reached(x, &problem.goal));
    };
    let tries = if first.controller.continuous_dim == 0 {
        1
    } else {
        config.n_samples
    };
    let mut seen: Vec<Vec<f64>> = Vec::new();
    for _ in 0..tries {
        if !budget.take_sample() {
            return None;
        }
        let theta = domain.sample(&first.controller, x, &first.discrete_args, rng);
        if seen.contains(&theta) {
            continue;
        }
        seen.push(theta.clone());
        let action = Action {
            controller: first.controller.clone(),
            discrete_args: first.discrete_args.clone(),
            continuous_args: theta,
        };
        let next = domain
            .simulate(x, &action)
            .expect("templates are well formed");
        if next == *x {
            continue;
        }
        actions.push(action);
        match refine_to_goal(domain, problem, rest, &next, config, rng, budget, actions) {
            Some(true) => return Some(true),
            None => return None,
            Some(false) => {
                actions.pop();
            }
        }
    }
    Some(false)
}
