//! Exact references: shortest paths on the 8-connected grid and converged
//! value-propagation fixed points. Everything here is plain scalar `f64`
//! code, independent of the tensor engine.

mod propagation;

pub use propagation::{
    max_product_values, mvprop_fixed_point, mvprop_path_enumeration, vprop_fixed_point,
    OracleError,
};

use crate::grid::{Action, Cell, Grid};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Unit cost per move.
    Hops,
    /// 1 per cardinal move, sqrt(2) per diagonal move.
    L2,
}

impl Metric {
    fn weight(self, a: Action) -> f64 {
        match self {
            Metric::Hops => 1.0,
            Metric::L2 => a.cost(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathResult {
    pub reachable: bool,
    /// Number of moves on `path`.
    pub steps: usize,
    /// Euclidean length of `path`.
    pub cost: f64,
    pub path: Vec<Cell>,
}

impl PathResult {
    fn unreachable() -> Self {
        Self {
            reachable: false,
            steps: 0,
            cost: f64::INFINITY,
            path: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    priority: f64,
    seq: u64,
    index: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // min-heap on (priority, insertion order)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first search from `from` to `to` over non-blocked cells. With a zero
/// heuristic this is Dijkstra. Neighbors are expanded in action order and
/// only strict improvements replace a predecessor, so ties resolve
/// deterministically.
fn search(
    blocked: &Grid<bool>,
    from: Cell,
    to: Cell,
    metric: Metric,
    heuristic: impl Fn(Cell) -> f64,
) -> PathResult {
    if !blocked.contains(from) || !blocked.contains(to) || blocked[from] || blocked[to] {
        return PathResult::unreachable();
    }
    let n = blocked.as_slice().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let start = blocked.index(from);
    let goal = blocked.index(to);
    dist[start] = 0.0;
    heap.push(Frontier {
        priority: heuristic(from),
        seq,
        index: start,
    });
    while let Some(Frontier { index, .. }) = heap.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == goal {
            break;
        }
        let c = blocked.cell_at(index);
        for a in Action::ALL {
            let Some(nc) = blocked.neighbor(c, a) else { continue };
            let ni = blocked.index(nc);
            if blocked[nc] || closed[ni] {
                continue;
            }
            let nd = dist[index] + metric.weight(a);
            if nd < dist[ni] {
                dist[ni] = nd;
                prev[ni] = Some(index);
                seq += 1;
                heap.push(Frontier {
                    priority: nd + heuristic(nc),
                    seq,
                    index: ni,
                });
            }
        }
    }
    if !dist[goal].is_finite() {
        return PathResult::unreachable();
    }
    let mut path = vec![to];
    let mut cur = goal;
    while let Some(p) = prev[cur] {
        path.push(blocked.cell_at(p));
        cur = p;
    }
    path.reverse();
    let cost = path
        .windows(2)
        .map(|w| if w[0].x != w[1].x && w[0].y != w[1].y { std::f64::consts::SQRT_2 } else { 1.0 })
        .sum();
    PathResult {
        reachable: true,
        steps: path.len() - 1,
        cost,
        path,
    }
}

/// Dijkstra over the 8-connected graph of non-blocked cells.
pub fn shortest_path(blocked: &Grid<bool>, from: Cell, to: Cell, metric: Metric) -> PathResult {
    search(blocked, from, to, metric, |_| 0.0)
}

/// Hop distance from `from` to every cell (`None` when unreachable or blocked).
pub fn hop_distances(blocked: &Grid<bool>, from: Cell) -> Grid<Option<usize>> {
    let mut dist = Grid::filled(blocked.width(), blocked.height(), None);
    if !blocked.contains(from) || blocked[from] {
        return dist;
    }
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c].expect("queued cells have a distance");
        for a in Action::ALL {
            if let Some(nc) = blocked.neighbor(c, a) {
                if !blocked[nc] && dist[nc].is_none() {
                    dist[nc] = Some(d + 1);
                    queue.push_back(nc);
                }
            }
        }
    }
    dist
}

/// Octile distance: the exact L2 path length on an empty 8-connected grid.
pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.x.abs_diff(b.x) as f64;
    let dy = a.y.abs_diff(b.y) as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

/// A* path under the L2 metric with the octile heuristic; `occupied` cells are
/// treated as blocked (the target itself never is).
pub fn astar_path(blocked: &Grid<bool>, occupied: &[Cell], from: Cell, target: Cell) -> PathResult {
    let mut mask = blocked.clone();
    for &c in occupied {
        if mask.contains(c) && c != target && c != from {
            mask[c] = true;
        }
    }
    search(&mask, from, target, Metric::L2, |c| octile(c, target))
}

/// First move of an A* path toward `target`, or `None` to stay put.
pub fn astar_next_move(
    blocked: &Grid<bool>,
    occupied: &[Cell],
    from: Cell,
    target: Cell,
) -> Option<Action> {
    let res = astar_path(blocked, occupied, from, target);
    if !res.reachable || res.steps == 0 {
        return None;
    }
    let next = res.path[1];
    Action::ALL
        .into_iter()
        .find(|&a| from.step(a, blocked.width(), blocked.height()) == Some(next))
}
