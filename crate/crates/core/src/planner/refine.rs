use rand::RngCore;

use super::{Budget, PlanSkeleton, SampleBudget};
use crate::domains::{Action, Domain, LowLevelState};

pub(crate) enum Refined {
    Found(Vec<Action>),
    Failed,
    OutOfBudget,
}

/// Depth-first backtracking over sampler draws. A draw is kept only if the
/// parsed next state equals the skeleton's expected state for that step.
pub(crate) fn refine(
    domain: &Domain,
    x0: &LowLevelState,
    skeleton: &PlanSkeleton,
    n_samples: usize,
    mode: SampleBudget,
    rng: &mut dyn RngCore,
    budget: &mut Budget,
) -> Refined {
    let mut per_step = vec![n_samples; skeleton.steps.len()];
    let mut actions = Vec::with_capacity(skeleton.steps.len());
    let mut ctx = Ctx {
        domain,
        skeleton,
        n_samples,
        mode,
        per_step: &mut per_step,
        rng,
        budget,
    };
    match ctx.dfs(0, x0, &mut actions) {
        Step::Found => Refined::Found(actions),
        Step::Failed => Refined::Failed,
        Step::OutOfBudget => Refined::OutOfBudget,
    }
}

enum Step {
    Found,
    Failed,
    OutOfBudget,
}

struct Ctx<'a, 'r> {
    domain: &'a Domain,
    skeleton: &'a PlanSkeleton,
    n_samples: usize,
    mode: SampleBudget,
    per_step: &'a mut Vec<usize>,
    rng: &'r mut dyn RngCore,
    budget: &'a mut Budget,
}

impl Ctx<'_, '_> {
    fn dfs(&mut self, t: usize, x: &LowLevelState, actions: &mut Vec<Action>) -> Step {
        if t == self.skeleton.steps.len() {
            return Step::Found;
        }
        let step = &self.skeleton.steps[t];
        let controller = &step.template.controller;
        let tries = if controller.continuous_dim == 0 {
            1
        } else {
            self.n_samples
        };
        let mut seen: Vec<Vec<f64>> = Vec::new();
        for _ in 0..tries {
            if self.mode == SampleBudget::PerStep {
                if self.per_step[t] == 0 {
                    return Step::Failed;
                }
                self.per_step[t] -= 1;
            }
            if !self.budget.take_sample() {
                return Step::OutOfBudget;
            }
            let theta = self
                .domain
                .sample(controller, x, &step.template.discrete_args, self.rng);
            if seen.contains(&theta) {
                continue;
            }
            seen.push(theta.clone());
            let action = Action {
                controller: controller.clone(),
                discrete_args: step.template.discrete_args.clone(),
                continuous_args: theta,
            };
            let next = self
                .domain
                .simulate(x, &action)
                .expect("templates are well formed");
            if self.domain.parse(&next) != step.expected {
                continue;
            }
            actions.push(action);
            match self.dfs(t + 1, &next, actions) {
                Step::Found => return Step::Found,
                Step::OutOfBudget => return Step::OutOfBudget,
                Step::Failed => {
                    actions.pop();
                }
            }
        }
        Step::Failed
    }
}
