use std::cmp::Reverse;
use std::collections::BinaryHeap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::ground::GroundTask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    HAdd,
    Blind,
}

impl Heuristic {
    pub fn name(self) -> &'static str {
        match self {
            Heuristic::HAdd => "hadd",
            Heuristic::Blind => "blind",
        }
    }

    /// `None` means the goal is unreachable even under delete relaxation
    /// (only detected by hAdd).
    pub fn evaluate(self, task: &GroundTask, state: &FixedBitSet) -> Option<u64> {
        match self {
            Heuristic::HAdd => hadd(task, state),
            Heuristic::Blind => Some(0),
        }
    }
}

impl std::str::FromStr for Heuristic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hadd" => Ok(Heuristic::HAdd),
            "blind" => Ok(Heuristic::Blind),
            other => Err(format!("unknown heuristic {other:?}")),
        }
    }
}

/// Additive delete-relaxation heuristic, computed with a generalized
/// Dijkstra over atoms: an operator fires once all its preconditions have
/// been settled, at cost `1 + sum of precondition costs`.
pub fn hadd(task: &GroundTask, state: &FixedBitSet) -> Option<u64> {
    let n = task.num_atoms();
    let mut cost = vec![u64::MAX; n];
    let mut heap: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
    for i in state.ones() {
        cost[i] = 0;
        heap.push(Reverse((0, i as u32)));
    }
    let mut unsat: Vec<usize> = task.ops.iter().map(|o| o.pre.len()).collect();
    let mut op_cost: Vec<u64> = vec![1; task.ops.len()];
    let relax =
        |atom: u32, c: u64, cost: &mut Vec<u64>, heap: &mut BinaryHeap<Reverse<(u64, u32)>>| {
            if c < cost[atom as usize] {
                cost[atom as usize] = c;
                heap.push(Reverse((c, atom)));
            }
        };
    for (k, o) in task.ops.iter().enumerate() {
        if o.pre.is_empty() {
            for &a in &o.add {
                relax(a, op_cost[k], &mut cost, &mut heap);
            }
        }
    }
    let mut remaining_goals = task
        .goal
        .iter()
        .filter(|&&g| !state.contains(g as usize))
        .count();
    while let Some(Reverse((c, atom))) = heap.pop() {
        if c > cost[atom as usize] {
            continue;
        }
        if c > 0 && task.goal.contains(&atom) {
            remaining_goals -= 1;
            if remaining_goals == 0 {
                break;
            }
        }
        for &k in &task.pre_of[atom as usize] {
            unsat[k] -= 1;
            op_cost[k] += c;
            if unsat[k] == 0 {
                let oc = op_cost[k];
                for &a in &task.ops[k].add {
                    relax(a, oc, &mut cost, &mut heap);
                }
            }
        }
    }
    let mut total: u64 = 0;
    for &g in &task.goal {
        let c = cost[g as usize];
        if c == u64::MAX {
            return None;
        }
        total += c;
    }
    Some(total)
}

/// Reference hAdd by naive fixpoint iteration; slow, used to check [`hadd`].
pub fn hadd_fixpoint(task: &GroundTask, state: &FixedBitSet) -> Option<u64> {
    let n = task.num_atoms();
    let mut cost = vec![u64::MAX; n];
    for i in state.ones() {
        cost[i] = 0;
    }
    loop {
        let mut changed = false;
        for o in &task.ops {
            let mut c: u64 = 1;
            let mut ok = true;
            for &p in &o.pre {
                if cost[p as usize] == u64::MAX {
                    ok = false;
                    break;
                }
                c += cost[p as usize];
            }
            if !ok {
                continue;
            }
            for &a in &o.add {
                if c < cost[a as usize] {
                    cost[a as usize] = c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    task.goal.iter().try_fold(0u64, |acc, &g| {
        (cost[g as usize] != u64::MAX).then(|| acc + cost[g as usize])
    })
}
