//! Connected components of plane fibers `{f = t}` by marching squares.
//!
//! Nodes of a `(res + 1)^2` grid on `[-L, L]^2` are classified by the sign of
//! `f - t` (zero counts as inside). Each crossing edge is a vertex of the
//! extracted polyline; the segments inside one cell join their edges in a
//! union-find. Ambiguous (saddle) cells are resolved by the value at the cell
//! centre. The grid is processed one row of cells at a time, so memory stays
//! linear in `res`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polymap::PolyMap;
use crate::scanner::Fanout;

const NONE: u32 = u32::MAX;

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn add(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let g = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = g;
            i = g;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }

    fn roots(&mut self) -> usize {
        (0..self.parent.len() as u32).filter(|&i| self.find(i) == i).count()
    }
}

fn check_plane_map(map: &PolyMap) -> Result<()> {
    if map.n() != 2 || map.p() != 1 {
        return Err(Error::InvalidDimensions { n: map.n(), p: map.p() });
    }
    if map.is_constant() {
        return Err(Error::ConstantMap);
    }
    Ok(())
}

/// Number of connected components of `{f = t} ∩ [-L, L]^2` on a `res x res`
/// cell grid. Arcs cut by the box boundary count as separate components.
pub fn fiber_components_2d(map: &PolyMap, t: f64, half_width: f64, res: usize) -> Result<usize> {
    check_plane_map(map)?;
    if res < 64 || res > 1 << 20 {
        return Err(Error::Config(alloc::string::String::from("res must be in [64, 2^20]")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) || !t.is_finite() {
        return Err(Error::Config(alloc::string::String::from("box half-width must be positive and t finite")));
    }
    let ev = map.evaluator();
    let h = 2.0 * half_width / res as f64;
    let coord = |i: usize| -half_width + h * i as f64;
    let mut scratch = Vec::new();
    let mut g = |x: f64, y: f64| {
        let mut out = [0.0];
        ev.value_into(&[x, y], &mut scratch, &mut out);
        out[0] - t
    };
    let row = |j: usize, g: &mut dyn FnMut(f64, f64) -> f64| -> Vec<bool> {
        (0..=res).map(|i| g(coord(i), coord(j)) >= 0.0).collect()
    };

    let mut uf = UnionFind { parent: Vec::new() };
    let mut below = row(0, &mut g);
    // ids of crossing horizontal edges on the current bottom row
    let mut bottom_ids: Vec<u32> = vec![NONE; res];
    for i in 0..res {
        if below[i] != below[i + 1] {
            bottom_ids[i] = uf.add();
        }
    }
    for j in 0..res {
        let above = row(j + 1, &mut g);
        let mut top_ids: Vec<u32> = vec![NONE; res];
        for i in 0..res {
            if above[i] != above[i + 1] {
                top_ids[i] = uf.add();
            }
        }
        let mut left_id = if below[0] != above[0] { uf.add() } else { NONE };
        for i in 0..res {
            let right_id = if below[i + 1] != above[i + 1] { uf.add() } else { NONE };
            // edges: 0 bottom, 1 right, 2 top, 3 left
            let e = [bottom_ids[i], right_id, top_ids[i], left_id];
            let crossing: Vec<usize> = (0..4).filter(|&k| e[k] != NONE).collect();
            match crossing.len() {
                2 => uf.union(e[crossing[0]], e[crossing[1]]),
                4 => {
                    let c0 = below[i];
                    let centre = g(coord(i) + 0.5 * h, coord(j) + 0.5 * h) >= 0.0;
                    if centre == c0 {
                        // c0 and c2 joined through the centre: cut off c1 and c3
                        uf.union(e[0], e[1]);
                        uf.union(e[2], e[3]);
                    } else {
                        uf.union(e[3], e[0]);
                        uf.union(e[1], e[2]);
                    }
                }
                _ => {}
            }
            left_id = right_id;
        }
        below = above;
        bottom_ids = top_ids;
    }
    Ok(uf.roots())
}

/// Component counts over a grid of values, with the jumps between neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberCensus {
    pub t_grid: Vec<f64>,
    pub box_half_width: f64,
    pub resolution: usize,
    pub counts: Vec<usize>,
    /// Adjacent `(t_k, t_{k+1})` with different counts.
    pub jumps: Vec<(f64, f64)>,
    /// Per candidate value: whether a jump brackets it (endpoints included).
    pub witnessed: Vec<(f64, bool)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberConfig {
    pub box_half_width: f64,
    pub resolution: usize,
    /// Values sampled in addition to the refinement around each candidate.
    pub background: Vec<f64>,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig {
            box_half_width: 20.0,
            resolution: 2000,
            background: (-4..=4).map(|k| k as f64 * 0.5).collect(),
        }
    }
}

/// Counts fiber components on an explicit grid of values (sorted, deduplicated).
pub fn fiber_census<F: Fanout>(map: &PolyMap, t_grid: &[f64], cfg: &FiberConfig, fanout: &F) -> Result<FiberCensus> {
    check_plane_map(map)?;
    let mut grid: Vec<f64> = t_grid.to_vec();
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Config(alloc::string::String::from("t grid values must be finite")));
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let counts: Vec<Result<usize>> =
        fanout.run(grid.len(), |k| fiber_components_2d(map, grid[k], cfg.box_half_width, cfg.resolution));
    let counts: Vec<usize> = counts.into_iter().collect::<Result<_>>()?;
    let jumps = grid.windows(2).zip(counts.windows(2)).filter(|(_, c)| c[0] != c[1]).map(|(t, _)| (t[0], t[1])).collect();
    Ok(FiberCensus {
        t_grid: grid,
        box_half_width: cfg.box_half_width,
        resolution: cfg.resolution,
        counts,
        jumps,
        witnessed: Vec::new(),
    })
}

/// Census on the background grid refined by `c + {-0.1, -0.05, 0, 0.05, 0.1}`
/// around each candidate `c`; a candidate is witnessed when a jump brackets it.
pub fn atypical_witness<F: Fanout>(map: &PolyMap, candidates: &[f64], cfg: &FiberConfig, fanout: &F) -> Result<FiberCensus> {
    let mut grid = cfg.background.clone();
    for &c in candidates {
        for d in [-0.1, -0.05, 0.0, 0.05, 0.1] {
            grid.push(c + d);
        }
    }
    let mut census = fiber_census(map, &grid, cfg, fanout)?;
    census.witnessed = candidates
        .iter()
        .map(|&c| (c, census.jumps.iter().any(|&(a, b)| a <= c && c <= b)))
        .collect();
    Ok(census)
}
