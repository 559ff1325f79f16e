//! Blocks and targets on the unit line. Picks and places are only possible
//! inside the allowed regions; the grasp offset chosen at pick time fixes
//! where a block can later be put down.

use std::collections::BTreeSet;

use rand::{Rng, RngCore};

use super::{
    obj_attrs, oracle_from_text, Action, ControllerSpec, CoverConfig, DomainSpec, Environment,
    LowLevelState, Problem, ProblemSize,
};
use crate::symbolic::{GroundAtom, ObjectRef, Predicate, SymbolicState};

const EPS: f64 = 1e-9;

const ORACLE: &str = "# loft operators v1
operator Pick
controller Pick
params ?x0:block
pre HandEmpty()
effects Holding(?x0) not-HandEmpty()
end
operator PickFromTarget
controller Pick
params ?x0:block ?x1:target
pre Covers(?x0,?x1) HandEmpty()
effects Holding(?x0) not-Covers(?x0,?x1) not-HandEmpty()
end
operator Place
controller Place
params ?x0:target ?x1:block
pre Holding(?x1)
effects Covers(?x1,?x0) HandEmpty() not-Holding(?x1)
end
";

pub struct Cover {
    cfg: CoverConfig,
    spec: DomainSpec,
    covers: Predicate,
    holding: Predicate,
    hand_empty: Predicate,
}

impl Cover {
    pub fn new(cfg: CoverConfig) -> Self {
        let covers = Predicate::new("Covers", &["block", "target"]);
        let holding = Predicate::new("Holding", &["block"]);
        let hand_empty = Predicate::new("HandEmpty", &[]);
        let mut spec = DomainSpec {
            name: "cover".into(),
            types: vec!["block".into(), "target".into()],
            predicates: vec![covers.clone(), holding.clone(), hand_empty.clone()],
            controllers: vec![
                ControllerSpec::new("Pick", &["block"], 1),
                ControllerSpec::new("Place", &["target"], 1),
            ],
            oracle_operators: Vec::new(),
            goal_predicates: vec!["Covers".into()],
        };
        spec.oracle_operators = oracle_from_text(&spec, ORACLE);
        Self {
            cfg,
            spec,
            covers,
            holding,
            hand_empty,
        }
    }

    fn allowed(&self, loc: f64) -> bool {
        self.cfg
            .allowed_regions
            .iter()
            .any(|r| r[0] <= loc && loc <= r[1])
    }

    fn extent(x: &LowLevelState, o: &ObjectRef) -> (f64, f64) {
        let c = x.scalar(o, "pose");
        let w = x.scalar(o, "width");
        (c - w / 2.0, c + w / 2.0)
    }

    fn held_block(x: &LowLevelState) -> Option<ObjectRef> {
        x.objects_of_type("block")
            .find(|b| x.scalar(b, "held") > 0.5)
            .cloned()
    }

    fn pick(&self, x: &LowLevelState, b: &ObjectRef, loc: f64) -> Option<LowLevelState> {
        if Self::held_block(x).is_some() || !self.allowed(loc) {
            return None;
        }
        let (lo, hi) = Self::extent(x, b);
        if loc < lo || loc > hi {
            return None;
        }
        let mut y = x.clone();
        y.set_scalar(b, "held", 1.0);
        y.set_scalar(b, "grasp", loc - x.scalar(b, "pose"));
        Some(y)
    }

    fn place(&self, x: &LowLevelState, t: &ObjectRef, loc: f64) -> Option<LowLevelState> {
        let b = Self::held_block(x)?;
        if !self.allowed(loc) {
            return None;
        }
        let w = x.scalar(&b, "width");
        let c = loc - x.scalar(&b, "grasp");
        let (lo, hi) = (c - w / 2.0, c + w / 2.0);
        if lo < 0.0 || hi > 1.0 {
            return None;
        }
        let collides = x
            .objects_of_type("block")
            .filter(|o| **o != b && x.scalar(o, "held") < 0.5)
            .any(|o| {
                let (olo, ohi) = Self::extent(x, o);
                lo < ohi && olo < hi
            });
        let (tlo, thi) = Self::extent(x, t);
        if collides || !(lo <= tlo + EPS && thi <= hi + EPS) {
            return None;
        }
        let mut y = x.clone();
        y.set_scalar(&b, "pose", c);
        y.set_scalar(&b, "held", 0.0);
        y.set_scalar(&b, "grasp", 0.0);
        Some(y)
    }
}

/// Centers for intervals of the given widths, pairwise separated by at
/// least `gap`, lying inside `zone`.
pub(crate) fn spaced_centers(
    rng: &mut dyn RngCore,
    zone: [f64; 2],
    widths: &[f64],
    gap: f64,
) -> Option<Vec<f64>> {
    'attempt: for _ in 0..1000 {
        let mut placed: Vec<(f64, f64)> = Vec::new();
        for &w in widths {
            let lo = zone[0] + w / 2.0;
            let hi = zone[1] - w / 2.0;
            if lo > hi {
                return None;
            }
            let c = rng.gen_range(lo..=hi);
            if placed
                .iter()
                .any(|&(pc, pw)| (pc - c).abs() < (pw + w) / 2.0 + gap)
            {
                continue 'attempt;
            }
            placed.push((c, w));
        }
        return Some(placed.into_iter().map(|(c, _)| c).collect());
    }
    None
}

impl Environment for Cover {
    fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    fn simulate(&self, x: &LowLevelState, action: &Action) -> LowLevelState {
        let loc = action.continuous_args[0];
        let obj = &action.discrete_args[0];
        let next = match &*action.controller.name {
            "Pick" => self.pick(x, obj, loc),
            "Place" => self.place(x, obj, loc),
            _ => None,
        };
        next.unwrap_or_else(|| x.clone())
    }

    fn parse(&self, x: &LowLevelState) -> SymbolicState {
        let mut s = SymbolicState::new();
        let held = Self::held_block(x);
        match &held {
            Some(b) => {
                s.insert(self.holding.atom(vec![b.clone()]).expect("typed"));
            }
            None => {
                s.insert(self.hand_empty.atom(vec![]).expect("typed"));
            }
        }
        for b in x.objects_of_type("block") {
            if held.as_ref() == Some(b) {
                continue;
            }
            let (lo, hi) = Self::extent(x, b);
            for t in x.objects_of_type("target") {
                let (tlo, thi) = Self::extent(x, t);
                if lo <= tlo + EPS && thi <= hi + EPS {
                    s.insert(self.covers.atom(vec![b.clone(), t.clone()]).expect("typed"));
                }
            }
        }
        s
    }

    fn sample(
        &self,
        _controller: &ControllerSpec,
        _x: &LowLevelState,
        _args: &[ObjectRef],
        rng: &mut dyn RngCore,
    ) -> Vec<f64> {
        let total: f64 = self.cfg.allowed_regions.iter().map(|r| r[1] - r[0]).sum();
        let mut u = rng.gen_range(0.0..total);
        for r in &self.cfg.allowed_regions {
            let len = r[1] - r[0];
            if u <= len {
                return vec![r[0] + u];
            }
            u -= len;
        }
        let last = self
            .cfg
            .allowed_regions
            .last()
            .expect("validated non-empty");
        vec![last[1]]
    }

    fn propose_problem(&self, size: ProblemSize, rng: &mut dyn RngCore) -> Problem {
        let range = match size {
            ProblemSize::Train => self.cfg.train_objects,
            ProblemSize::Eval => self.cfg.eval_objects,
        };
        loop {
            let n = rng.gen_range(range[0]..=range[1]);
            let bw: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(self.cfg.block_width[0]..=self.cfg.block_width[1]))
                .collect();
            let tw: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(self.cfg.target_width[0]..=self.cfg.target_width[1]))
                .collect();
            let Some(bc) = spaced_centers(rng, self.cfg.block_zone, &bw, 0.01) else {
                continue;
            };
            // a single block can never cover two targets
            let Some(tc) = spaced_centers(rng, self.cfg.target_zone, &tw, self.cfg.block_width[1])
            else {
                continue;
            };
            let mut x = LowLevelState::new();
            let blocks: Vec<ObjectRef> = (0..n)
                .map(|i| ObjectRef::new(&format!("b{i}"), "block"))
                .collect();
            let targets: Vec<ObjectRef> = (0..n)
                .map(|i| ObjectRef::new(&format!("t{i}"), "target"))
                .collect();
            for i in 0..n {
                x.add_object(
                    blocks[i].clone(),
                    obj_attrs(&[
                        ("pose", vec![bc[i]]),
                        ("width", vec![bw[i]]),
                        ("held", vec![0.0]),
                        ("grasp", vec![0.0]),
                    ]),
                );
                x.add_object(
                    targets[i].clone(),
                    obj_attrs(&[("pose", vec![tc[i]]), ("width", vec![tw[i]])]),
                );
            }
            let k = rng.gen_range(1..=n);
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = rng.gen_range(i..n);
                idx.swap(i, j);
            }
            let goal: BTreeSet<GroundAtom> = idx[..k]
                .iter()
                .map(|&i| {
                    self.covers
                        .atom(vec![blocks[i].clone(), targets[i].clone()])
                        .expect("typed")
                })
                .collect();
            return Problem::new(x, goal);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{Domain, DomainConfig, DomainId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (Cover, LowLevelState, ObjectRef, ObjectRef) {
        let env = Cover::new(CoverConfig::default());
        let b = ObjectRef::new("b1", "block");
        let t = ObjectRef::new("t1", "target");
        let mut x = LowLevelState::new();
        x.add_object(
            b.clone(),
            obj_attrs(&[
                ("pose", vec![0.2]),
                ("width", vec![0.12]),
                ("held", vec![0.0]),
                ("grasp", vec![0.0]),
            ]),
        );
        x.add_object(
            t.clone(),
            obj_attrs(&[("pose", vec![0.7]), ("width", vec![0.05])]),
        );
        (env, x, b, t)
    }

    fn act(env: &Cover, name: &str, o: &ObjectRef, loc: f64) -> Action {
        Action::new(
            env.spec.controller(name).unwrap().clone(),
            vec![o.clone()],
            vec![loc],
        )
        .unwrap()
    }

    #[test]
    fn pick_inside_extent_and_region_holds_block() {
        let (env, x, b, _) = fixture();
        let y = env.simulate(&x, &act(&env, "Pick", &b, 0.21));
        assert!(env.parse(&y).iter().any(|a| a.to_string() == "Holding(b1)"));
        assert!((y.scalar(&b, "grasp") - 0.01).abs() < 1e-12);
    }

    #[test]
    fn pick_outside_allowed_region_is_noop() {
        let (env, mut x, b, _) = fixture();
        // block straddles the gap between the two regions
        x.set_scalar(&b, "pose", 0.5);
        let y = env.simulate(&x, &act(&env, "Pick", &b, 0.5));
        assert_eq!(y, x);
        let y = env.simulate(&x, &act(&env, "Pick", &b, 0.3));
        assert_eq!(y, x);
    }

    #[test]
    fn covers_matches_interval_containment() {
        let (env, x, b, t) = fixture();
        let held = env.simulate(&x, &act(&env, "Pick", &b, 0.2));
        for loc in [0.66, 0.68, 0.70, 0.72, 0.74, 0.75, 0.80] {
            let y = env.simulate(&held, &act(&env, "Place", &t, loc));
            // oracle: block [loc-0.06, loc+0.06] contains target [0.675, 0.725]
            let contains = loc - 0.06 <= 0.675 + EPS && 0.725 <= loc + 0.06 + EPS;
            let covers = env
                .parse(&y)
                .iter()
                .any(|a| a.to_string() == "Covers(b1,t1)");
            assert_eq!(covers, contains, "loc {loc}");
            assert_eq!(y == held, !contains);
        }
    }

    #[test]
    fn sampler_stays_in_allowed_regions() {
        let env = Cover::new(CoverConfig::default());
        let (_, x, b, _) = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pick = env.spec.controller("Pick").unwrap().clone();
        for _ in 0..10_000 {
            let v = env.sample(&pick, &x, std::slice::from_ref(&b), &mut rng)[0];
            assert!(env.allowed(v));
        }
    }

    #[test]
    fn eval_suite_plan_length_is_about_three() {
        let d = Domain::from_id(DomainId::Cover, &DomainConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut total = 0;
        for _ in 0..60 {
            let p = d.generate_problem(ProblemSize::Eval, &mut rng).unwrap();
            total += 2 * p.goal.len();
        }
        let mean = total as f64 / 60.0;
        assert!((2.5..=3.5).contains(&mean), "mean {mean}");
    }
}
