//! Geometry of the wrapped `L x L` grid.
//!
//! Nodes are identified by row-major ids (`id = y * L + x`). All distances are
//! circular Manhattan distances. The displacement table groups every nonzero
//! displacement vector by its length; it backs both the distance histogram and
//! the weak-tie sampler.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use std::sync::LazyLock;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: u32,
    pub y: u32,
}

impl Coord {
    pub const fn new(x: u32, y: u32) -> Self {
        Coord { x, y }
    }
}

/// An `s x s` axis-aligned window of the torus starting at `origin`, wrapping allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Square {
    pub origin: Coord,
    pub side: u32,
}

impl Square {
    pub fn new(origin: Coord, side: u32) -> Self {
        Square { origin, side }
    }

    pub fn area(&self) -> usize {
        self.side as usize * self.side as usize
    }
}

#[derive(Debug)]
pub struct TorusGeometry {
    side: u32,
    /// Displacements `(dx, dy)` with `dx, dy in [0, L)`, sorted by distance.
    displacements: Vec<(u32, u32)>,
    /// `shell_start[d]..shell_start[d + 1]` indexes the displacements at distance `d`.
    shell_start: Vec<usize>,
}

static GEOMETRY_CACHE: LazyLock<Mutex<HashMap<u32, Arc<TorusGeometry>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

impl TorusGeometry {
    pub fn new(side: u32) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidConfig(format!("torus side must be >= 2, got {side}")));
        }
        if (side as u64) * (side as u64) > u32::MAX as u64 {
            return Err(Error::InvalidConfig(format!("torus side {side} too large")));
        }
        let max_d = 2 * (side / 2) as usize;
        let mut counts = vec![0usize; max_d + 2];
        for dy in 0..side {
            for dx in 0..side {
                counts[axis_distance(dx, side) as usize + axis_distance(dy, side) as usize] += 1;
            }
        }
        // Distance 0 is the zero displacement only, which is excluded.
        counts[0] = 0;
        let mut shell_start = vec![0usize; max_d + 2];
        for d in 1..=max_d + 1 {
            shell_start[d] = shell_start[d - 1] + counts[d - 1];
        }
        let mut fill = shell_start.clone();
        let mut displacements = vec![(0u32, 0u32); (side as usize).pow(2) - 1];
        for dy in 0..side {
            for dx in 0..side {
                let d = (axis_distance(dx, side) + axis_distance(dy, side)) as usize;
                if d == 0 {
                    continue;
                }
                displacements[fill[d]] = (dx, dy);
                fill[d] += 1;
            }
        }
        Ok(TorusGeometry { side, displacements, shell_start })
    }

    /// Shared, cached geometry for side `L`.
    pub fn shared(side: u32) -> Result<Arc<Self>> {
        let mut cache = GEOMETRY_CACHE.lock().expect("geometry cache poisoned");
        if let Some(g) = cache.get(&side) {
            return Ok(Arc::clone(g));
        }
        let g = Arc::new(TorusGeometry::new(side)?);
        cache.insert(side, Arc::clone(&g));
        Ok(g)
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn node_count(&self) -> usize {
        (self.side as usize).pow(2)
    }

    /// Largest distance realized on this torus, `2 * floor(L / 2)`.
    pub fn max_distance(&self) -> u32 {
        2 * (self.side / 2)
    }

    pub fn id(&self, c: Coord) -> NodeId {
        c.y * self.side + c.x
    }

    pub fn coord(&self, id: NodeId) -> Coord {
        Coord::new(id % self.side, id / self.side)
    }

    pub fn wrap(&self, x: i64, y: i64) -> Coord {
        let l = self.side as i64;
        Coord::new(x.rem_euclid(l) as u32, y.rem_euclid(l) as u32)
    }

    pub fn offset(&self, c: Coord, dx: u32, dy: u32) -> Coord {
        Coord::new((c.x + dx) % self.side, (c.y + dy) % self.side)
    }

    pub fn distance(&self, a: Coord, b: Coord) -> u32 {
        let dx = a.x.abs_diff(b.x);
        let dy = a.y.abs_diff(b.y);
        dx.min(self.side - dx) + dy.min(self.side - dy)
    }

    pub fn distance_ids(&self, a: NodeId, b: NodeId) -> u32 {
        self.distance(self.coord(a), self.coord(b))
    }

    /// Number of nodes at distance `d` from any fixed node.
    pub fn count_at(&self, d: u32) -> usize {
        let d = d as usize;
        if d == 0 || d + 1 >= self.shell_start.len() {
            return 0;
        }
        self.shell_start[d + 1] - self.shell_start[d]
    }

    /// Displacements at exactly distance `d`, in row-major `(dx, dy)` order.
    pub fn shell(&self, d: u32) -> &[(u32, u32)] {
        let d = d as usize;
        if d == 0 || d + 1 >= self.shell_start.len() {
            return &[];
        }
        &self.displacements[self.shell_start[d]..self.shell_start[d + 1]]
    }

    /// All displacements with `1 <= distance <= radius`.
    pub fn ball(&self, radius: u32) -> &[(u32, u32)] {
        let r = (radius as usize).min(self.shell_start.len() - 2);
        &self.displacements[..self.shell_start[r + 1]]
    }

    pub fn distance_histogram(&self) -> BTreeMap<u32, usize> {
        (1..=self.max_distance())
            .map(|d| (d, self.count_at(d)))
            .filter(|&(_, c)| c > 0)
            .collect()
    }

    pub fn square_contains(&self, sq: &Square, c: Coord) -> bool {
        let rx = (c.x + self.side - sq.origin.x) % self.side;
        let ry = (c.y + self.side - sq.origin.y) % self.side;
        rx < sq.side && ry < sq.side
    }

    /// Cells of `sq` in row-major local order.
    pub fn square_cells(&self, sq: &Square) -> Vec<Coord> {
        let mut out = Vec::with_capacity(sq.area());
        for j in 0..sq.side {
            for i in 0..sq.side {
                out.push(self.offset(sq.origin, i, j));
            }
        }
        out
    }

    /// The horizontal run `anchor, anchor + (1, 0), ..., anchor + (k - 1, 0)`.
    pub fn canonical_seed_cluster(&self, anchor: Coord, k: u32) -> Result<Vec<Coord>> {
        if k == 0 || k > self.side {
            return Err(Error::InvalidCluster { k, side: self.side });
        }
        Ok((0..k).map(|i| self.offset(anchor, i, 0)).collect())
    }
}

fn axis_distance(delta: u32, side: u32) -> u32 {
    delta.min(side - delta)
}

/// Partition of the torus into square blocks of `block_side` cells per axis.
///
/// `ragged` layouts follow plain integer division and leave a narrow last strip
/// when `block_side` does not divide `L`. `merged` layouts fold that remainder
/// into the last full strip so that every strip is at least `block_side` wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    side: u32,
    block_side: u32,
    strips: u32,
}

impl BlockGrid {
    pub fn ragged(side: u32, block_side: u32) -> Result<Self> {
        check_block_side(side, block_side)?;
        Ok(BlockGrid { side, block_side, strips: side.div_ceil(block_side) })
    }

    pub fn merged(side: u32, block_side: u32) -> Result<Self> {
        check_block_side(side, block_side)?;
        Ok(BlockGrid { side, block_side, strips: (side / block_side).max(1) })
    }

    pub fn strips(&self) -> u32 {
        self.strips
    }

    pub fn block_count(&self) -> usize {
        (self.strips as usize).pow(2)
    }

    pub fn block_index(&self, c: Coord) -> (u32, u32) {
        let last = self.strips - 1;
        ((c.x / self.block_side).min(last), (c.y / self.block_side).min(last))
    }

    pub fn flat_index(&self, b: (u32, u32)) -> usize {
        b.1 as usize * self.strips as usize + b.0 as usize
    }

    /// The block itself plus its 8 surrounding blocks, with wraparound.
    pub fn adjacent_blocks(&self, b: (u32, u32)) -> Vec<(u32, u32)> {
        let s = self.strips as i64;
        let mut out: Vec<(u32, u32)> = Vec::with_capacity(9);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let nb = (
                    (b.0 as i64 + dx).rem_euclid(s) as u32,
                    (b.1 as i64 + dy).rem_euclid(s) as u32,
                );
                if !out.contains(&nb) {
                    out.push(nb);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn are_adjacent(&self, a: (u32, u32), b: (u32, u32)) -> bool {
        let s = self.strips;
        let cyc = |p: u32, q: u32| {
            let d = p.abs_diff(q);
            d.min(s - d) <= 1
        };
        cyc(a.0, b.0) && cyc(a.1, b.1)
    }

    pub fn torus_side(&self) -> u32 {
        self.side
    }
}

fn check_block_side(side: u32, block_side: u32) -> Result<()> {
    if block_side == 0 || block_side > side {
        return Err(Error::InvalidConfig(format!(
            "block side {block_side} outside [1, {side}]"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_histogram(l: u32) -> BTreeMap<u32, usize> {
        let g = TorusGeometry::new(l).unwrap();
        let mut h = BTreeMap::new();
        let origin = Coord::new(0, 0);
        for y in 0..l {
            for x in 0..l {
                let c = Coord::new(x, y);
                if c != origin {
                    *h.entry(g.distance(origin, c)).or_insert(0) += 1;
                }
            }
        }
        h
    }

    #[test]
    fn distance_examples() {
        let g8 = TorusGeometry::new(8).unwrap();
        assert_eq!(g8.distance(Coord::new(0, 0), Coord::new(7, 0)), 1);
        assert_eq!(g8.distance(Coord::new(0, 0), Coord::new(4, 4)), 8);
        let g5 = TorusGeometry::new(5).unwrap();
        assert_eq!(g5.distance(Coord::new(1, 1), Coord::new(1, 1)), 0);
    }

    #[test]
    fn histogram_l4_matches_enumeration() {
        let g = TorusGeometry::new(4).unwrap();
        // 15 displacements: d=1: 4, d=2: 6, d=3: 4, d=4: 1
        let expected: BTreeMap<u32, usize> = [(1, 4), (2, 6), (3, 4), (4, 1)].into_iter().collect();
        assert_eq!(g.distance_histogram(), expected);
        assert_eq!(brute_histogram(4), expected);
    }

    #[test]
    fn histogram_l2() {
        let g = TorusGeometry::new(2).unwrap();
        let expected: BTreeMap<u32, usize> = [(1, 2), (2, 1)].into_iter().collect();
        assert_eq!(g.distance_histogram(), expected);
    }

    #[test]
    fn histogram_matches_brute_force_up_to_32() {
        for l in 2..=32 {
            let g = TorusGeometry::new(l).unwrap();
            let h = g.distance_histogram();
            assert_eq!(h, brute_histogram(l), "L={l}");
            assert_eq!(h.values().sum::<usize>(), (l * l - 1) as usize);
            if l >= 3 {
                assert_eq!(h[&1], 4);
            }
            if l % 2 == 1 {
                for d in 1..=(l - 1) / 2 {
                    assert_eq!(h[&d], 4 * d as usize, "L={l} d={d}");
                }
            }
        }
    }

    #[test]
    fn shells_hold_displacements_of_their_distance() {
        let g = TorusGeometry::new(9).unwrap();
        let origin = Coord::new(0, 0);
        for d in 1..=g.max_distance() {
            for &(dx, dy) in g.shell(d) {
                assert_eq!(g.distance(origin, Coord::new(dx, dy)), d);
            }
        }
        assert_eq!(g.ball(1).len(), 4);
        assert_eq!(g.ball(2).len(), 12);
    }

    #[test]
    fn block_examples() {
        let b = BlockGrid::ragged(8, 4).unwrap();
        assert_eq!(b.block_index(Coord::new(5, 1)), (1, 0));
        assert_eq!(b.adjacent_blocks((0, 0)), vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        let b9 = BlockGrid::ragged(9, 4).unwrap();
        assert_eq!(b9.strips(), 3);
        assert_eq!(b9.block_index(Coord::new(8, 8)), (2, 2));
        assert_eq!(b9.adjacent_blocks((0, 0)).len(), 9);
        assert!(BlockGrid::ragged(8, 0).is_err());
        assert!(BlockGrid::ragged(8, 9).is_err());
    }

    #[test]
    fn merged_blocks_have_wide_last_strip() {
        let b = BlockGrid::merged(64, 19).unwrap();
        assert_eq!(b.strips(), 3);
        assert_eq!(b.block_index(Coord::new(63, 0)), (2, 0));
        assert_eq!(b.block_index(Coord::new(37, 0)), (1, 0));
    }

    #[test]
    fn seed_cluster_examples() {
        let g = TorusGeometry::new(8).unwrap();
        assert_eq!(
            g.canonical_seed_cluster(Coord::new(0, 0), 2).unwrap(),
            vec![Coord::new(0, 0), Coord::new(1, 0)]
        );
        assert_eq!(
            g.canonical_seed_cluster(Coord::new(7, 3), 3).unwrap(),
            vec![Coord::new(7, 3), Coord::new(0, 3), Coord::new(1, 3)]
        );
        assert_eq!(g.canonical_seed_cluster(Coord::new(2, 2), 1).unwrap(), vec![Coord::new(2, 2)]);
        assert!(matches!(
            g.canonical_seed_cluster(Coord::new(0, 0), 9),
            Err(Error::InvalidCluster { .. })
        ));
    }

    #[test]
    fn square_membership() {
        let g = TorusGeometry::new(6).unwrap();
        let sq = Square::new(Coord::new(5, 5), 2);
        assert!(g.square_contains(&sq, Coord::new(0, 0)));
        assert!(g.square_contains(&sq, Coord::new(5, 0)));
        assert!(!g.square_contains(&sq, Coord::new(1, 0)));
        assert_eq!(g.square_cells(&sq).len(), 4);
    }
}
