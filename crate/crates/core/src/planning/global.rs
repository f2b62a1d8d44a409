use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::costmap::{CostGrid, INSCRIBED};
use crate::grid::Pose2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no path to the goal")]
    NoPath,
    #[error("invalid planning input: {0}")]
    Input(String),
}

/// Cell-center waypoints from start to goal with the accumulated step cost.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Path {
    pub waypoints: Vec<(f64, f64)>,
    pub cells: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Path {
    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
            .sum()
    }
}

/// Cost of moving `length` meters into a cell of cost `cost`.
#[inline]
pub fn step_cost(length: f64, cost: u8) -> f64 {
    length * (1.0 + f64::from(cost) / 64.0)
}

#[inline]
pub(crate) fn passable(cost: u8) -> bool {
    cost < INSCRIBED
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    cost: f64,
    row: usize,
    col: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, then on (row, col).
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| (other.row, other.col).cmp(&(self.row, self.col)))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBOURS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Minimum-cost 8-connected path between the cells containing `start` and
/// `goal`. Cells at or above the inscribed cost are impassable.
pub fn plan_global(master: &CostGrid, start: &Pose2, goal: &Pose2) -> Result<Path, PlanError> {
    let meta = master.meta;
    let locate = |p: &Pose2, what: &str| -> Result<(usize, usize), PlanError> {
        let cell = meta
            .world_to_cell(p.x, p.y)
            .ok_or_else(|| PlanError::Input(format!("{what} ({:.2}, {:.2}) is off the map", p.x, p.y)))?;
        let cost = master.get(cell.0, cell.1);
        if !passable(cost) {
            return Err(PlanError::Input(format!("{what} lies in a cell of cost {cost}")));
        }
        Ok(cell)
    };
    let s = locate(start, "start")?;
    let g = locate(goal, "goal")?;

    let n = meta.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let si = meta.index(s.0, s.1);
    let gi = meta.index(g.0, g.1);
    dist[si] = 0.0;
    heap.push(Open { cost: 0.0, row: s.1, col: s.0 });
    let diag = std::f64::consts::SQRT_2 * meta.resolution;

    while let Some(Open { cost, row, col }) = heap.pop() {
        let i = meta.index(col, row);
        if closed[i] {
            continue;
        }
        closed[i] = true;
        if i == gi {
            break;
        }
        for (dc, dr) in NEIGHBOURS {
            let (nc, nr) = (col as i64 + dc, row as i64 + dr);
            if !meta.in_bounds(nc, nr) {
                continue;
            }
            let j = meta.index(nc as usize, nr as usize);
            let c = master.cells[j];
            if closed[j] || !passable(c) {
                continue;
            }
            let len = if dc != 0 && dr != 0 { diag } else { meta.resolution };
            let nd = cost + step_cost(len, c);
            if nd < dist[j] {
                dist[j] = nd;
                parent[j] = i;
                heap.push(Open { cost: nd, row: nr as usize, col: nc as usize });
            }
        }
    }
    if !closed[gi] {
        return Err(PlanError::NoPath);
    }

    let mut cells = vec![gi];
    while *cells.last().unwrap() != si {
        cells.push(parent[*cells.last().unwrap()]);
    }
    cells.reverse();
    let cells: Vec<(usize, usize)> = cells.into_iter().map(|i| meta.cell_of_index(i)).collect();
    Ok(Path {
        waypoints: cells.iter().map(|&(c, r)| meta.cell_center(c, r)).collect(),
        cells,
        total_cost: dist[gi],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::LETHAL;
    use crate::grid::GridMeta;

    fn grid(w: usize, h: usize) -> CostGrid {
        CostGrid::new(GridMeta::new(1.0, 0.0, 0.0, w, h))
    }

    fn at(c: usize, r: usize) -> Pose2 {
        Pose2::new(c as f64 + 0.5, r as f64 + 0.5, 0.0)
    }

    /// Exhaustive depth-first enumeration of simple paths (small grids only).
    fn exhaustive_min(g: &CostGrid, s: (usize, usize), t: (usize, usize)) -> Option<f64> {
        fn dfs(g: &CostGrid, cur: (usize, usize), t: (usize, usize), seen: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if acc >= *best {
                return;
            }
            if cur == t {
                *best = acc;
                return;
            }
            for (dc, dr) in NEIGHBOURS {
                let (nc, nr) = (cur.0 as i64 + dc, cur.1 as i64 + dr);
                if !g.meta.in_bounds(nc, nr) {
                    continue;
                }
                let (nc, nr) = (nc as usize, nr as usize);
                let j = g.meta.index(nc, nr);
                if seen[j] || g.cells[j] >= 253 {
                    continue;
                }
                let len = if dc != 0 && dr != 0 { 2f64.sqrt() } else { 1.0 };
                seen[j] = true;
                dfs(g, (nc, nr), t, seen, acc + len * (1.0 + g.cells[j] as f64 / 64.0), best);
                seen[j] = false;
            }
        }
        let mut seen = vec![false; g.meta.len()];
        seen[g.meta.index(s.0, s.1)] = true;
        let mut best = f64::INFINITY;
        dfs(g, s, t, &mut seen, 0.0, &mut best);
        best.is_finite().then_some(best)
    }

    #[test]
    fn empty_grid_diagonal() {
        let g = grid(5, 5);
        let p = plan_global(&g, &at(0, 0), &at(4, 4)).unwrap();
        assert_eq!(p.cells, vec![(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]);
        assert_eq!(p.len() - 1, 4);
        let oracle = exhaustive_min(&g, (0, 0), (4, 4)).unwrap();
        assert!((p.total_cost - oracle).abs() < 1e-9);
    }

    #[test]
    fn routes_through_gap() {
        let mut g = grid(5, 5);
        for r in 0..5 {
            if r != 3 {
                g.set(2, r, LETHAL);
            }
        }
        let p = plan_global(&g, &at(0, 0), &at(4, 0)).unwrap();
        assert!(p.cells.contains(&(2, 3)));
        let oracle = exhaustive_min(&g, (0, 0), (4, 0)).unwrap();
        assert!((p.total_cost - oracle).abs() < 1e-9);
    }

    #[test]
    fn enclosed_goal() {
        let mut g = grid(5, 5);
        for (c, r) in [(1, 1), (2, 1), (3, 1), (1, 2), (3, 2), (1, 3), (2, 3), (3, 3)] {
            g.set(c, r, LETHAL);
        }
        assert_eq!(plan_global(&g, &at(0, 0), &at(2, 2)), Err(PlanError::NoPath));
    }

    #[test]
    fn blocked_endpoints() {
        let mut g = grid(3, 3);
        g.set(2, 2, 253);
        assert!(matches!(plan_global(&g, &at(0, 0), &at(2, 2)), Err(PlanError::Input(_))));
        g.set(0, 0, 255);
        assert!(matches!(plan_global(&g, &at(0, 0), &at(1, 1)), Err(PlanError::Input(_))));
        assert!(matches!(plan_global(&g, &Pose2::new(-1.0, 0.0, 0.0), &at(1, 1)), Err(PlanError::Input(_))));
    }

    #[test]
    fn waypoints_avoid_impassable() {
        let mut g = grid(6, 6);
        for (i, c) in g.cells.iter_mut().enumerate() {
            *c = ((i * 37) % 256) as u8;
        }
        g.set(0, 0, 0);
        g.set(5, 5, 0);
        if let Ok(p) = plan_global(&g, &at(0, 0), &at(5, 5)) {
            assert!(p.cells.iter().all(|&(c, r)| g.get(c, r) < 253));
            for w in p.cells.windows(2) {
                let (dc, dr) = (w[0].0.abs_diff(w[1].0), w[0].1.abs_diff(w[1].1));
                assert!(dc <= 1 && dr <= 1 && dc + dr > 0);
            }
            let oracle = exhaustive_min(&g, (0, 0), (5, 5)).unwrap();
            assert!((p.total_cost - oracle).abs() < 1e-9);
        }
    }
}
