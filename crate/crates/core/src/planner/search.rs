use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use fixedbitset::FixedBitSet;

use super::ground::GroundTask;
use super::heuristic::Heuristic;
use super::Budget;

struct Node {
    state: FixedBitSet,
    g: u32,
    parent: Option<usize>,
    op: Option<usize>,
}

/// Resumable A* over a ground task. Each call to [`SkeletonSearch::next`]
/// returns the next path to a goal state in order of `f = g + h`, ties
/// broken by lower `h` and then insertion order.
///
/// The search is over paths, not states: there is no duplicate detection,
/// so every distinct path to a goal is eventually yielded. Goal nodes are
/// returned when popped and never expanded. Steps that leave the state
/// unchanged are skipped.
pub struct SkeletonSearch<'a> {
    task: &'a GroundTask,
    heuristic: Heuristic,
    nodes: Vec<Node>,
    open: BinaryHeap<Reverse<(u64, u64, u64, usize)>>,
    closed: Option<HashSet<FixedBitSet>>,
    seq: u64,
}

impl<'a> SkeletonSearch<'a> {
    pub fn new(task: &'a GroundTask, heuristic: Heuristic) -> Self {
        let mut s = Self {
            task,
            heuristic,
            nodes: Vec::new(),
            open: BinaryHeap::new(),
            closed: None,
            seq: 0,
        };
        if let Some(h) = heuristic.evaluate(task, &task.init) {
            s.push(task.init.clone(), 0, h, None, None);
        }
        s
    }

    /// State-space variant that expands each state at most once. It finds
    /// one shortest-f plan but does not enumerate alternatives.
    pub fn graph(task: &'a GroundTask, heuristic: Heuristic) -> Self {
        let mut s = Self::new(task, heuristic);
        s.closed = Some(HashSet::new());
        s
    }

    fn push(
        &mut self,
        state: FixedBitSet,
        g: u32,
        h: u64,
        parent: Option<usize>,
        op: Option<usize>,
    ) {
        let id = self.nodes.len();
        self.nodes.push(Node {
            state,
            g,
            parent,
            op,
        });
        self.open.push(Reverse((g as u64 + h, h, self.seq, id)));
        self.seq += 1;
    }

    fn path(&self, mut id: usize) -> Vec<usize> {
        let mut ops = Vec::new();
        while let Some(op) = self.nodes[id].op {
            ops.push(op);
            id = self.nodes[id].parent.expect("non-root nodes have parents");
        }
        ops.reverse();
        ops
    }

    /// Next skeleton as a list of ground operator indices, or `None` when
    /// the open list or the budget is exhausted.
    pub fn next(&mut self, budget: &mut Budget) -> Option<Vec<usize>> {
        while let Some(Reverse((_, _, _, id))) = self.open.pop() {
            let g = self.nodes[id].g;
            if self.task.is_goal(&self.nodes[id].state) {
                return Some(self.path(id));
            }
            if let Some(closed) = &mut self.closed {
                if !closed.insert(self.nodes[id].state.clone()) {
                    continue;
                }
            }
            if !budget.take_expansion() {
                return None;
            }
            let state = self.nodes[id].state.clone();
            for (k, op) in self.task.ops.iter().enumerate() {
                if !op.applicable(&state) {
                    continue;
                }
                let child = op.apply(&state);
                if child == state {
                    continue;
                }
                let Some(h) = self.heuristic.evaluate(self.task, &child) else {
                    continue;
                };
                self.push(child, g + 1, h, Some(id), Some(k));
            }
        }
        None
    }
}
