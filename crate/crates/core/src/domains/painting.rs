//! Objects are picked from a table, washed, dried, painted and placed into
//! a shelf or a box. The shelf only accepts side-grasped objects and the box
//! only top-grasped ones, so the grasp chosen at pick time decides which
//! placements can succeed several steps later.

use std::collections::BTreeSet;

use rand::{Rng, RngCore};

use super::config::Region;
use super::{
    obj_attrs, oracle_from_text, Action, ControllerSpec, DomainSpec, Environment, LowLevelState,
    PaintingConfig, Problem, ProblemSize,
};
use crate::symbolic::{GroundAtom, ObjectRef, Predicate, SymbolicState};

const TOL: f64 = 1e-6;
const GRASP_NONE: f64 = 0.0;
const GRASP_TOP: f64 = 1.0;
const GRASP_SIDE: f64 = 2.0;

const ORACLE: &str = "# loft operators v1
operator PickSide
controller Pick
params ?x0:obj
pre HandEmpty() OnTable(?x0)
effects Holding(?x0) HoldingSide(?x0) not-HandEmpty() not-OnTable(?x0)
end
operator PickTop
controller Pick
params ?x0:obj
pre HandEmpty() OnTable(?x0)
effects Holding(?x0) HoldingTop(?x0) not-HandEmpty() not-OnTable(?x0)
end
operator Wash
controller Wash
params ?x0:obj
pre Holding(?x0) IsDirty(?x0)
effects IsClean(?x0) IsWet(?x0) not-IsDirty(?x0) not-IsDry(?x0)
end
operator Dry
controller Dry
params ?x0:obj
pre Holding(?x0) IsWet(?x0)
effects IsDry(?x0) not-IsWet(?x0)
end
operator PaintShelf
controller Paint
params ?x0:obj
pre Holding(?x0) IsBlank(?x0) IsClean(?x0) IsDry(?x0)
effects IsShelfColor(?x0) not-IsBlank(?x0)
end
operator PaintBox
controller Paint
params ?x0:obj
pre Holding(?x0) IsBlank(?x0) IsClean(?x0) IsDry(?x0)
effects IsBoxColor(?x0) not-IsBlank(?x0)
end
operator PlaceShelf
controller Place
params ?x0:obj
pre Holding(?x0) HoldingSide(?x0)
effects HandEmpty() InShelf(?x0) not-Holding(?x0) not-HoldingSide(?x0)
end
operator PlaceBox
controller Place
params ?x0:obj
pre Holding(?x0) HoldingTop(?x0)
effects HandEmpty() InBox(?x0) not-Holding(?x0) not-HoldingTop(?x0)
end
";

const UNARY: [&str; 13] = [
    "OnTable",
    "Holding",
    "HoldingSide",
    "HoldingTop",
    "InShelf",
    "InBox",
    "IsDirty",
    "IsClean",
    "IsDry",
    "IsWet",
    "IsBlank",
    "IsShelfColor",
    "IsBoxColor",
];

pub struct Painting {
    cfg: PaintingConfig,
    spec: DomainSpec,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Place {
    Table,
    Shelf,
    Box,
}

impl Painting {
    pub fn new(cfg: PaintingConfig) -> Self {
        let mut predicates: Vec<Predicate> =
            UNARY.iter().map(|n| Predicate::new(n, &["obj"])).collect();
        predicates.push(Predicate::new("HandEmpty", &[]));
        let mut spec = DomainSpec {
            name: "painting".into(),
            types: vec!["obj".into()],
            predicates,
            controllers: vec![
                ControllerSpec::new("Pick", &["obj"], 6),
                ControllerSpec::new("Place", &[], 6),
                ControllerSpec::new("Wash", &["obj"], 1),
                ControllerSpec::new("Dry", &["obj"], 1),
                ControllerSpec::new("Paint", &[], 1),
            ],
            oracle_operators: Vec::new(),
            goal_predicates: vec![
                "InShelf".into(),
                "InBox".into(),
                "IsShelfColor".into(),
                "IsBoxColor".into(),
            ],
        };
        spec.oracle_operators = oracle_from_text(&spec, ORACLE);
        Self { cfg, spec }
    }

    fn pred(&self, name: &str) -> &Predicate {
        self.spec.predicate(name).expect("declared predicate")
    }

    fn held(x: &LowLevelState, o: &ObjectRef) -> bool {
        x.scalar(o, "held") > 0.5
    }

    fn held_object(x: &LowLevelState) -> Option<ObjectRef> {
        x.objects_of_type("obj").find(|o| Self::held(x, o)).cloned()
    }

    fn inside(&self, r: &Region, px: f64, py: f64) -> bool {
        let h = self.cfg.object_size / 2.0;
        r.x[0] + h <= px + TOL
            && px <= r.x[1] - h + TOL
            && r.y[0] + h <= py + TOL
            && py <= r.y[1] - h + TOL
    }

    fn region_of(&self, px: f64, py: f64) -> Option<Place> {
        if self.inside(&self.cfg.table, px, py) {
            Some(Place::Table)
        } else if self.inside(&self.cfg.shelf, px, py) {
            Some(Place::Shelf)
        } else if self.inside(&self.cfg.box_region, px, py) {
            Some(Place::Box)
        } else {
            None
        }
    }

    fn location(&self, x: &LowLevelState, o: &ObjectRef) -> Option<Place> {
        if Self::held(x, o) {
            return None;
        }
        let p = x.get(o, "pose");
        self.region_of(p[0], p[1])
    }

    fn reachable(&self, base: &[f64], grip: &[f64]) -> bool {
        (base[0] - grip[0]).hypot(base[1] - grip[1]) <= self.cfg.reach + TOL
    }

    fn pick(&self, x: &LowLevelState, o: &ObjectRef, theta: &[f64]) -> Option<LowLevelState> {
        let (base, grip) = theta.split_at(3);
        if Self::held_object(x).is_some()
            || self.location(x, o) != Some(Place::Table)
            || !self.reachable(base, grip)
        {
            return None;
        }
        let p = x.get(o, "pose");
        let size = self.cfg.object_size;
        if (grip[0] - p[0]).hypot(grip[1] - p[1]) > self.cfg.grip_tolerance
            || grip[2] < 0.0
            || grip[2] > size + 0.1
        {
            return None;
        }
        let grasp = if grip[2] > size {
            GRASP_TOP
        } else {
            GRASP_SIDE
        };
        let mut y = x.clone();
        y.set_scalar(o, "held", 1.0);
        y.set_scalar(o, "grasp", grasp);
        Some(y)
    }

    fn place(&self, x: &LowLevelState, theta: &[f64]) -> Option<LowLevelState> {
        let (base, grip) = theta.split_at(3);
        let o = Self::held_object(x)?;
        if !self.reachable(base, grip) {
            return None;
        }
        let grasp = x.scalar(&o, "grasp");
        let ok = match self.region_of(grip[0], grip[1])? {
            Place::Table => true,
            Place::Shelf => grasp == GRASP_SIDE,
            Place::Box => grasp == GRASP_TOP,
        };
        let size = self.cfg.object_size;
        let collides = x.objects_of_type("obj").any(|other| {
            if *other == o || Self::held(x, other) {
                return false;
            }
            let p = x.get(other, "pose");
            (p[0] - grip[0]).abs() < size && (p[1] - grip[1]).abs() < size
        });
        if !ok || collides {
            return None;
        }
        let mut y = x.clone();
        y.set(&o, "pose", vec![grip[0], grip[1], size / 2.0]);
        y.set_scalar(&o, "held", 0.0);
        y.set_scalar(&o, "grasp", GRASP_NONE);
        Some(y)
    }

    fn wash(&self, x: &LowLevelState, o: &ObjectRef, effort: f64) -> Option<LowLevelState> {
        let dirt = x.scalar(o, "dirt");
        if !Self::held(x, o) || dirt <= 0.0 || (effort - dirt).abs() > TOL {
            return None;
        }
        let mut y = x.clone();
        y.set_scalar(o, "dirt", 0.0);
        y.set_scalar(o, "wet", 1.0);
        Some(y)
    }

    fn dry(&self, x: &LowLevelState, o: &ObjectRef, effort: f64) -> Option<LowLevelState> {
        let wet = x.scalar(o, "wet");
        if !Self::held(x, o) || wet <= 0.0 || (effort - wet).abs() > TOL {
            return None;
        }
        let mut y = x.clone();
        y.set_scalar(o, "wet", 0.0);
        Some(y)
    }

    fn paint(&self, x: &LowLevelState, color: f64) -> Option<LowLevelState> {
        let o = Self::held_object(x)?;
        if x.scalar(&o, "dirt") > 0.0 || x.scalar(&o, "wet") > 0.0 {
            return None;
        }
        let mut y = x.clone();
        y.set_scalar(&o, "color", color);
        Some(y)
    }

    fn uniform_in(&self, r: &Region, rng: &mut dyn RngCore) -> (f64, f64) {
        let h = self.cfg.object_size / 2.0;
        (
            rng.gen_range(r.x[0] + h..=r.x[1] - h),
            rng.gen_range(r.y[0] + h..=r.y[1] - h),
        )
    }

    fn with_base(&self, grip: [f64; 3]) -> Vec<f64> {
        let offset = self.cfg.reach * 0.8;
        vec![grip[0] - offset, grip[1], 0.0, grip[0], grip[1], grip[2]]
    }
}

impl Environment for Painting {
    fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    fn simulate(&self, x: &LowLevelState, action: &Action) -> LowLevelState {
        let th = &action.continuous_args;
        let next = match &*action.controller.name {
            "Pick" => self.pick(x, &action.discrete_args[0], th),
            "Place" => self.place(x, th),
            "Wash" => self.wash(x, &action.discrete_args[0], th[0]),
            "Dry" => self.dry(x, &action.discrete_args[0], th[0]),
            "Paint" => self.paint(x, th[0]),
            _ => None,
        };
        next.unwrap_or_else(|| x.clone())
    }

    fn parse(&self, x: &LowLevelState) -> SymbolicState {
        let mut s = SymbolicState::new();
        let mut add = |name: &str, o: &ObjectRef| {
            s.insert(self.pred(name).atom(vec![o.clone()]).expect("typed"));
        };
        let mut any_held = false;
        for o in x.objects_of_type("obj") {
            if Self::held(x, o) {
                any_held = true;
                add("Holding", o);
                let g = x.scalar(o, "grasp");
                if g == GRASP_SIDE {
                    add("HoldingSide", o);
                } else if g == GRASP_TOP {
                    add("HoldingTop", o);
                }
            }
            match self.location(x, o) {
                Some(Place::Table) => add("OnTable", o),
                Some(Place::Shelf) => add("InShelf", o),
                Some(Place::Box) => add("InBox", o),
                None => {}
            }
            add(
                if x.scalar(o, "dirt") > 0.0 {
                    "IsDirty"
                } else {
                    "IsClean"
                },
                o,
            );
            add(
                if x.scalar(o, "wet") > 0.0 {
                    "IsWet"
                } else {
                    "IsDry"
                },
                o,
            );
            let c = x.scalar(o, "color");
            if c.abs() < TOL {
                add("IsBlank", o);
            } else if (c - self.cfg.shelf_color).abs() < TOL {
                add("IsShelfColor", o);
            } else if (c - self.cfg.box_color).abs() < TOL {
                add("IsBoxColor", o);
            }
        }
        if !any_held {
            s.insert(self.pred("HandEmpty").atom(vec![]).expect("typed"));
        }
        s
    }

    fn sample(
        &self,
        controller: &ControllerSpec,
        x: &LowLevelState,
        args: &[ObjectRef],
        rng: &mut dyn RngCore,
    ) -> Vec<f64> {
        let size = self.cfg.object_size;
        match &*controller.name {
            "Pick" => {
                let p = x.get(&args[0], "pose");
                let j = self.cfg.grip_tolerance / 2.0;
                let gx = p[0] + rng.gen_range(-j..=j) / std::f64::consts::SQRT_2;
                let gy = p[1] + rng.gen_range(-j..=j) / std::f64::consts::SQRT_2;
                let gz = if rng.gen_bool(0.5) {
                    size + rng.gen_range(0.01..0.05)
                } else {
                    rng.gen_range(0.2 * size..0.8 * size)
                };
                self.with_base([gx, gy, gz])
            }
            "Place" => {
                let region = if rng.gen_bool(0.5) {
                    &self.cfg.shelf
                } else {
                    &self.cfg.box_region
                };
                let (gx, gy) = self.uniform_in(region, rng);
                self.with_base([gx, gy, size / 2.0])
            }
            "Wash" => vec![x.scalar(&args[0], "dirt")],
            "Dry" => vec![x.scalar(&args[0], "wet")],
            "Paint" => vec![if rng.gen_bool(0.5) {
                self.cfg.shelf_color
            } else {
                self.cfg.box_color
            }],
            _ => vec![0.0; controller.continuous_dim],
        }
    }

    fn propose_problem(&self, size: ProblemSize, rng: &mut dyn RngCore) -> Problem {
        let range = match size {
            ProblemSize::Train => self.cfg.train_objects,
            ProblemSize::Eval => self.cfg.eval_objects,
        };
        let s = self.cfg.object_size;
        let sep = s + 0.02;
        loop {
            let n = rng.gen_range(range[0]..=range[1]);
            let mut poses: Vec<(f64, f64)> = Vec::new();
            for _ in 0..n {
                for _ in 0..500 {
                    let p = self.uniform_in(&self.cfg.table, rng);
                    if poses
                        .iter()
                        .all(|q| (q.0 - p.0).abs() >= sep || (q.1 - p.1).abs() >= sep)
                    {
                        poses.push(p);
                        break;
                    }
                }
            }
            if poses.len() < n {
                continue;
            }
            let mut x = LowLevelState::new();
            let mut goal: BTreeSet<GroundAtom> = BTreeSet::new();
            for (i, (px, py)) in poses.into_iter().enumerate() {
                let o = ObjectRef::new(&format!("o{i}"), "obj");
                let dirt = if rng.gen_bool(self.cfg.p_clean) {
                    0.0
                } else {
                    rng.gen_range(0.1..=1.0)
                };
                let wet = if rng.gen_bool(self.cfg.p_dry) {
                    0.0
                } else {
                    rng.gen_range(0.1..=1.0)
                };
                x.add_object(
                    o.clone(),
                    obj_attrs(&[
                        ("pose", vec![px, py, s / 2.0]),
                        ("held", vec![0.0]),
                        ("grasp", vec![GRASP_NONE]),
                        ("dirt", vec![dirt]),
                        ("wet", vec![wet]),
                        ("color", vec![0.0]),
                    ]),
                );
                let (place, color) = if rng.gen_bool(0.5) {
                    ("InShelf", "IsShelfColor")
                } else {
                    ("InBox", "IsBoxColor")
                };
                goal.insert(self.pred(place).atom(vec![o.clone()]).expect("typed"));
                goal.insert(self.pred(color).atom(vec![o]).expect("typed"));
            }
            return Problem::new(x, goal);
        }
    }
}
