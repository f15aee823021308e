use super::Frontier;
use crate::grid::{Action, Cell, Grid};
use std::collections::BinaryHeap;
use thiserror::Error;

/// Largest grid side the scalar fixed-point oracles accept.
pub const ORACLE_MAX_SIDE: usize = 16;

const TOLERANCE: f64 = 1e-12;
const DIVERGENCE_LIMIT: f64 = 1e6;
const MAX_SWEEPS: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle grids are limited to {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE}, got {0}x{1}")]
    TooLarge(usize, usize),
    #[error("field grids disagree in size")]
    SizeMismatch,
    #[error("value propagation diverged: |v| = {value:.3e} at {cell} after {sweeps} sweeps")]
    Diverged { cell: Cell, value: f64, sweeps: usize },
    #[error("no convergence after {0} sweeps")]
    NotConverged(usize),
}

fn check(grids: &[&Grid<f64>]) -> Result<(usize, usize), OracleError> {
    let (w, h) = (grids[0].width(), grids[0].height());
    if grids.iter().any(|g| g.width() != w || g.height() != h) {
        return Err(OracleError::SizeMismatch);
    }
    if w > ORACLE_MAX_SIDE || h > ORACLE_MAX_SIDE {
        return Err(OracleError::TooLarge(w, h));
    }
    Ok((w, h))
}

/// In-bounds neighbors of `c` including `c` itself.
fn neighborhood(c: Cell, w: usize, h: usize) -> impl Iterator<Item = Cell> {
    Action::ALL
        .into_iter()
        .filter_map(move |a| c.step(a, w, h))
        .chain(std::iter::once(c))
}

/// Iterates `v <- max(v, max_n p*v_n + r*(1 - p))` from `v = r` until the
/// largest change drops below 1e-12. Out-of-grid neighbors count as value 0.
pub fn mvprop_fixed_point(r: &Grid<f64>, p: &Grid<f64>) -> Result<Grid<f64>, OracleError> {
    let (w, h) = check(&[r, p])?;
    let mut v = r.clone();
    for _ in 0..MAX_SWEEPS {
        let mut next = v.clone();
        let mut delta = 0.0f64;
        for c in r.cells() {
            let (pc, rc) = (p[c], r[c]);
            let mut best = v[c];
            let inside = neighborhood(c, w, h).map(|n| v[n]);
            let border = (8 + 1 - neighborhood(c, w, h).count()).min(1);
            for vn in inside.chain(std::iter::repeat(0.0).take(border)) {
                best = best.max(pc * vn + rc * (1.0 - pc));
            }
            delta = delta.max((best - v[c]).abs());
            next[c] = best;
        }
        v = next;
        if delta < TOLERANCE {
            return Ok(v);
        }
    }
    Err(OracleError::NotConverged(MAX_SWEEPS))
}

/// Iterates `v <- max(v, max_n p*v_n + r_in[n] - r_out)` from `v = 0` over
/// in-bounds neighbors until the largest change drops below 1e-12.
pub fn vprop_fixed_point(
    r_in: &Grid<f64>,
    r_out: &Grid<f64>,
    p: &Grid<f64>,
) -> Result<Grid<f64>, OracleError> {
    let (w, h) = check(&[r_in, r_out, p])?;
    let mut v = Grid::filled(w, h, 0.0);
    for sweep in 0..MAX_SWEEPS {
        let mut next = v.clone();
        let mut delta = 0.0f64;
        for c in r_in.cells() {
            let mut best: f64 = v[c];
            for n in neighborhood(c, w, h) {
                best = best.max(p[c] * v[n] + r_in[n] - r_out[c]);
            }
            if best.abs() > DIVERGENCE_LIMIT {
                return Err(OracleError::Diverged {
                    cell: c,
                    value: best,
                    sweeps: sweep + 1,
                });
            }
            delta = delta.max((best - v[c]).abs());
            next[c] = best;
        }
        v = next;
        if delta < TOLERANCE {
            return Ok(v);
        }
    }
    Err(OracleError::NotConverged(MAX_SWEEPS))
}

/// Maximum, over every simple 8-connected path starting at each cell, of
///
/// `sum_{l<k} [prod_{m<l} p(c_m)] r(c_l) (1 - p(c_l)) + [prod_{m<k} p(c_m)] r(c_k)`,
///
/// found by exhaustive depth-first enumeration with a branch-and-bound cut.
/// Practical up to roughly 5x5.
pub fn mvprop_path_enumeration(r: &Grid<f64>, p: &Grid<f64>) -> Result<Grid<f64>, OracleError> {
    let (w, h) = check(&[r, p])?;
    let r_max = r.as_slice().iter().copied().fold(0.0f64, f64::max);
    let mut out = Grid::filled(w, h, 0.0);
    let mut visited = Grid::filled(w, h, false);
    for start in r.cells() {
        let mut best = f64::NEG_INFINITY;
        enumerate(r, p, start, 0.0, 1.0, r_max, &mut visited, &mut best);
        out[start] = best;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    r: &Grid<f64>,
    p: &Grid<f64>,
    cur: Cell,
    partial: f64,
    prefix: f64,
    r_max: f64,
    visited: &mut Grid<bool>,
    best: &mut f64,
) {
    *best = best.max(partial + prefix * r[cur]);
    if partial + prefix * r_max <= *best {
        return;
    }
    visited[cur] = true;
    let next_partial = partial + prefix * r[cur] * (1.0 - p[cur]);
    let next_prefix = prefix * p[cur];
    for a in Action::ALL {
        if let Some(n) = cur.step(a, r.width(), r.height()) {
            if !visited[n] {
                enumerate(r, p, n, next_partial, next_prefix, r_max, visited, best);
            }
        }
    }
    visited[cur] = false;
}

/// `max over paths c -> goal of prod p(c_i)` over the path cells excluding
/// the goal, computed as `exp(-d)` where `d` is the Dijkstra distance from the
/// goal with cost `-ln p(c)` for entering `c`. Cells with `p = 0` are
/// impassable and get value 0; the goal gets 1.
pub fn max_product_values(p: &Grid<f64>, goal: Cell) -> Grid<f64> {
    let (w, h) = (p.width(), p.height());
    let mut dist = Grid::filled(w, h, f64::INFINITY);
    let mut closed = Grid::filled(w, h, false);
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    dist[goal] = 0.0;
    heap.push(Frontier {
        priority: 0.0,
        seq,
        index: p.index(goal),
    });
    while let Some(Frontier { index, .. }) = heap.pop() {
        let c = p.cell_at(index);
        if closed[c] {
            continue;
        }
        closed[c] = true;
        for a in Action::ALL {
            let Some(n) = c.step(a, w, h) else { continue };
            if closed[n] || p[n] <= 0.0 {
                continue;
            }
            let nd = dist[c] - p[n].ln();
            if nd < dist[n] {
                dist[n] = nd;
                seq += 1;
                heap.push(Frontier {
                    priority: nd,
                    seq,
                    index: p.index(n),
                });
            }
        }
    }
    Grid::from_vec(w, h, dist.into_vec().into_iter().map(|d| (-d).exp()).collect())
        .expect("same size")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reward_propagates_nothing() {
        let r = Grid::filled(4, 4, 0.0);
        let p = Grid::filled(4, 4, 0.7);
        let v = mvprop_fixed_point(&r, &p).unwrap();
        assert!(v.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_goal_uniform_p_is_power_of_chebyshev_distance() {
        let goal = Cell::new(2, 3);
        let mut r = Grid::filled(6, 5, 0.0);
        r[goal] = 1.0;
        let p = Grid::filled(6, 5, 0.6);
        let v = mvprop_fixed_point(&r, &p).unwrap();
        for c in v.cells() {
            let want = 0.6f64.powi(c.chebyshev(goal) as i32);
            assert!((v[c] - want).abs() < 1e-12, "{c}: {} vs {want}", v[c]);
        }
    }

    #[test]
    fn vprop_equal_in_out_and_zero_p_stays_zero() {
        let r = Grid::filled(3, 3, 0.4);
        let p = Grid::filled(3, 3, 0.0);
        let v = vprop_fixed_point(&r, &r, &p).unwrap();
        assert!(v.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vprop_chain_with_absorbing_goal() {
        // p = 1, r_in = 1 at the goal, r_out = 0.1 elsewhere and r_out = r_in at
        // the goal (absorbing): v = max(0, 1 - 0.1 d) with d the 8-connected distance.
        let goal = Cell::new(1, 2);
        let (w, h) = (14, 5);
        let mut r_in = Grid::filled(w, h, 0.0);
        r_in[goal] = 1.0;
        let mut r_out = Grid::filled(w, h, 0.1);
        r_out[goal] = 1.0;
        let p = Grid::filled(w, h, 1.0);
        let v = vprop_fixed_point(&r_in, &r_out, &p).unwrap();
        for c in v.cells() {
            let d = c.chebyshev(goal) as f64;
            let want = if c == goal { 0.0 } else { (1.0 - 0.1 * d).max(0.0) };
            assert!((v[c] - want).abs() < 1e-12, "{c}: {} vs {want}", v[c]);
        }
    }

    #[test]
    fn vprop_chain_without_absorbing_goal_diverges() {
        let goal = Cell::new(0, 0);
        let mut r_in = Grid::filled(7, 1, 0.0);
        r_in[goal] = 1.0;
        let r_out = Grid::filled(7, 1, 0.1);
        let p = Grid::filled(7, 1, 1.0);
        let v = vprop_fixed_point(&r_in, &r_out, &p);
        assert!(matches!(v, Err(OracleError::Diverged { .. })));
    }

    #[test]
    fn vprop_divergence_is_reported() {
        let r_in = Grid::filled(2, 2, 0.9);
        let r_out = Grid::filled(2, 2, 0.1);
        let p = Grid::filled(2, 2, 1.0);
        let err = vprop_fixed_point(&r_in, &r_out, &p).unwrap_err();
        assert!(matches!(err, OracleError::Diverged { .. }));
    }

    #[test]
    fn oversized_grids_are_rejected() {
        let g = Grid::filled(17, 3, 0.0);
        assert_eq!(
            mvprop_fixed_point(&g, &g).unwrap_err(),
            OracleError::TooLarge(17, 3)
        );
    }

    #[test]
    fn max_product_blocks_on_zero_p() {
        let mut p = Grid::filled(3, 3, 0.5);
        for y in 0..3 {
            p[Cell::new(1, y)] = 0.0;
        }
        let v = max_product_values(&p, Cell::new(0, 1));
        assert_eq!(v[Cell::new(0, 1)], 1.0);
        assert!((v[Cell::new(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(v[Cell::new(2, 2)], 0.0);
        assert_eq!(v[Cell::new(1, 1)], 0.0);
    }
}
