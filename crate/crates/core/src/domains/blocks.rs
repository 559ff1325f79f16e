//! Cubes on a square table. Towers are built with `Pick`, `Stack` and
//! `PutOnTable`; only the last takes a continuous argument, the table
//! position, and fails when the footprint hits another block on the table.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use super::{
    obj_attrs, oracle_from_text, Action, BlocksConfig, ControllerSpec, DomainSpec, Environment,
    LowLevelState, Problem, ProblemSize,
};
use crate::symbolic::{GroundAtom, ObjectRef, Predicate, SymbolicState};

const TOL: f64 = 1e-6;

const ORACLE: &str = "# loft operators v1
operator PickFromTable
controller Pick
params ?x0:block
pre Clear(?x0) HandEmpty() OnTable(?x0)
effects Holding(?x0) not-Clear(?x0) not-HandEmpty() not-OnTable(?x0)
end
operator Unstack
controller Pick
params ?x0:block ?x1:block
pre Clear(?x0) HandEmpty() On(?x0,?x1)
effects Clear(?x1) Holding(?x0) not-Clear(?x0) not-HandEmpty() not-On(?x0,?x1)
end
operator Stack
controller Stack
params ?x0:block ?x1:block
pre Clear(?x0) Holding(?x1)
effects Clear(?x1) HandEmpty() On(?x1,?x0) not-Clear(?x0) not-Holding(?x1)
end
operator PutOnTable
controller PutOnTable
params ?x0:block
pre Holding(?x0)
effects Clear(?x0) HandEmpty() OnTable(?x0) not-Holding(?x0)
end
";

pub struct Blocks {
    cfg: BlocksConfig,
    spec: DomainSpec,
    on: Predicate,
    on_table: Predicate,
    clear: Predicate,
    holding: Predicate,
    hand_empty: Predicate,
}

impl Blocks {
    pub fn new(cfg: BlocksConfig) -> Self {
        let on = Predicate::new("On", &["block", "block"]);
        let on_table = Predicate::new("OnTable", &["block"]);
        let clear = Predicate::new("Clear", &["block"]);
        let holding = Predicate::new("Holding", &["block"]);
        let hand_empty = Predicate::new("HandEmpty", &[]);
        let mut spec = DomainSpec {
            name: "blocks".into(),
            types: vec!["block".into()],
            predicates: vec![
                on.clone(),
                on_table.clone(),
                clear.clone(),
                holding.clone(),
                hand_empty.clone(),
            ],
            controllers: vec![
                ControllerSpec::new("Pick", &["block"], 0),
                ControllerSpec::new("Stack", &["block"], 0),
                ControllerSpec::new("PutOnTable", &[], 2),
            ],
            oracle_operators: Vec::new(),
            goal_predicates: vec!["On".into()],
        };
        spec.oracle_operators = oracle_from_text(&spec, ORACLE);
        Self {
            cfg,
            spec,
            on,
            on_table,
            clear,
            holding,
            hand_empty,
        }
    }

    fn held(x: &LowLevelState, b: &ObjectRef) -> bool {
        x.scalar(b, "held") > 0.5
    }

    fn held_block(x: &LowLevelState) -> Option<ObjectRef> {
        x.objects_of_type("block")
            .find(|b| Self::held(x, b))
            .cloned()
    }

    fn is_on(&self, x: &LowLevelState, a: &ObjectRef, b: &ObjectRef) -> bool {
        if a == b || Self::held(x, a) || Self::held(x, b) {
            return false;
        }
        let pa = x.get(a, "pose");
        let pb = x.get(b, "pose");
        (pa[0] - pb[0]).abs() < TOL
            && (pa[1] - pb[1]).abs() < TOL
            && (pa[2] - pb[2] - self.cfg.block_size).abs() < TOL
    }

    fn is_clear(&self, x: &LowLevelState, b: &ObjectRef) -> bool {
        !Self::held(x, b) && !x.objects_of_type("block").any(|a| self.is_on(x, a, b))
    }

    fn on_table(&self, x: &LowLevelState, b: &ObjectRef) -> bool {
        !Self::held(x, b) && (x.get(b, "pose")[2] - self.cfg.block_size / 2.0).abs() < TOL
    }

    fn put_on_table(&self, x: &LowLevelState, px: f64, py: f64) -> Option<LowLevelState> {
        let h = Self::held_block(x)?;
        let half = self.cfg.block_size / 2.0;
        let w = self.cfg.workspace;
        if px < half || px > w - half || py < half || py > w - half {
            return None;
        }
        let size = self.cfg.block_size;
        let collides = x.objects_of_type("block").any(|o| {
            let p = x.get(o, "pose");
            self.on_table(x, o) && (p[0] - px).abs() < size && (p[1] - py).abs() < size
        });
        if collides {
            return None;
        }
        let mut y = x.clone();
        y.set(&h, "pose", vec![px, py, half]);
        y.set_scalar(&h, "held", 0.0);
        Some(y)
    }

    /// Random towers: a shuffled order cut at random points.
    fn random_towers(n: usize, p_new: f64, rng: &mut dyn RngCore) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut towers: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match towers.last_mut() {
                Some(t) if !rng.gen_bool(p_new) => t.push(i),
                _ => towers.push(vec![i]),
            }
        }
        towers
    }

    fn tower_bases(&self, n: usize, rng: &mut dyn RngCore) -> Option<Vec<(f64, f64)>> {
        let half = self.cfg.block_size / 2.0;
        let hi = self.cfg.workspace - half;
        let sep = self.cfg.block_size + 0.02;
        'attempt: for _ in 0..1000 {
            let mut out: Vec<(f64, f64)> = Vec::new();
            for _ in 0..n {
                let p = (rng.gen_range(half..=hi), rng.gen_range(half..=hi));
                if out
                    .iter()
                    .any(|q| (q.0 - p.0).abs() < sep && (q.1 - p.1).abs() < sep)
                {
                    continue 'attempt;
                }
                out.push(p);
            }
            return Some(out);
        }
        None
    }
}

impl Environment for Blocks {
    fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    fn simulate(&self, x: &LowLevelState, action: &Action) -> LowLevelState {
        let next = match &*action.controller.name {
            "Pick" => {
                let b = &action.discrete_args[0];
                if Self::held_block(x).is_none() && self.is_clear(x, b) {
                    let mut y = x.clone();
                    y.set_scalar(b, "held", 1.0);
                    Some(y)
                } else {
                    None
                }
            }
            "Stack" => {
                let b = &action.discrete_args[0];
                match Self::held_block(x) {
                    Some(h) if h != *b && self.is_clear(x, b) => {
                        let p = x.get(b, "pose");
                        let mut y = x.clone();
                        y.set(&h, "pose", vec![p[0], p[1], p[2] + self.cfg.block_size]);
                        y.set_scalar(&h, "held", 0.0);
                        Some(y)
                    }
                    _ => None,
                }
            }
            "PutOnTable" => {
                self.put_on_table(x, action.continuous_args[0], action.continuous_args[1])
            }
            _ => None,
        };
        next.unwrap_or_else(|| x.clone())
    }

    fn parse(&self, x: &LowLevelState) -> SymbolicState {
        let mut s = SymbolicState::new();
        let blocks: Vec<&ObjectRef> = x.objects_of_type("block").collect();
        let mut any_held = false;
        for &b in &blocks {
            if Self::held(x, b) {
                any_held = true;
                s.insert(self.holding.atom(vec![b.clone()]).expect("typed"));
                continue;
            }
            if self.on_table(x, b) {
                s.insert(self.on_table.atom(vec![b.clone()]).expect("typed"));
            }
            if self.is_clear(x, b) {
                s.insert(self.clear.atom(vec![b.clone()]).expect("typed"));
            }
            for &c in &blocks {
                if self.is_on(x, b, c) {
                    s.insert(self.on.atom(vec![b.clone(), c.clone()]).expect("typed"));
                }
            }
        }
        if !any_held {
            s.insert(self.hand_empty.atom(vec![]).expect("typed"));
        }
        s
    }

    fn sample(
        &self,
        controller: &ControllerSpec,
        _x: &LowLevelState,
        _args: &[ObjectRef],
        rng: &mut dyn RngCore,
    ) -> Vec<f64> {
        if controller.continuous_dim == 0 {
            return Vec::new();
        }
        let half = self.cfg.block_size / 2.0;
        let hi = self.cfg.workspace - half;
        vec![rng.gen_range(half..=hi), rng.gen_range(half..=hi)]
    }

    fn propose_problem(&self, size: ProblemSize, rng: &mut dyn RngCore) -> Problem {
        let range = match size {
            ProblemSize::Train => self.cfg.train_blocks,
            ProblemSize::Eval => self.cfg.eval_blocks,
        };
        loop {
            let n = rng.gen_range(range[0]..=range[1]);
            let blocks: Vec<ObjectRef> = (0..n)
                .map(|i| ObjectRef::new(&format!("b{i}"), "block"))
                .collect();
            let init = Self::random_towers(n, 0.5, rng);
            let Some(bases) = self.tower_bases(init.len(), rng) else {
                continue;
            };
            let mut x = LowLevelState::new();
            for (tower, (bx, by)) in init.iter().zip(bases) {
                for (level, &i) in tower.iter().enumerate() {
                    let z = self.cfg.block_size * (level as f64 + 0.5);
                    x.add_object(
                        blocks[i].clone(),
                        obj_attrs(&[("pose", vec![bx, by, z]), ("held", vec![0.0])]),
                    );
                }
            }
            let goal_towers = Self::random_towers(n, 0.35, rng);
            let goal: BTreeSet<GroundAtom> = goal_towers
                .iter()
                .flat_map(|t| t.windows(2))
                .map(|w| {
                    self.on
                        .atom(vec![blocks[w[1]].clone(), blocks[w[0]].clone()])
                        .expect("typed")
                })
                .collect();
            if goal.is_empty() {
                continue;
            }
            return Problem::new(x, goal);
        }
    }
}
