//! Measurable censuses for the lower-bound arguments and a Monte Carlo trial of the
//! recursive-spreading property behind the upper bounds.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dag::long_tie_threshold;
use crate::engine::{detect_new_seed_cluster, run_contagion, ContagionTrace};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{GraphParams, SmallWorldGraph, Variant};
use crate::seeding::derive_seed;
use crate::torus::{BlockGrid, Coord, NodeId, Square};

/// `ceil(n^delta)`, robust to floating error on exact powers.
pub fn disk_radius(n: usize, delta: f64) -> u32 {
    let x = (n as f64).powf(delta);
    let c = x.ceil();
    if c - 1.0 >= x - 1e-9 {
        (c - 1.0).max(0.0) as u32
    } else {
        c as u32
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("delta {delta} outside (0, 1/2)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeCounts {
    /// Annulus `2r < d <= L` nodes with at least `k` weak ties into `D`.
    pub z1: usize,
    /// Disk `d <= 2r` nodes (including `D`) with at least `k` weak ties into `D`.
    pub z2: usize,
}

/// Reverse index over every weak tie, counting or not, for repeated census queries.
pub struct BridgeCensus<'g> {
    graph: &'g SmallWorldGraph,
    start: Vec<u32>,
    owners: Vec<NodeId>,
}

impl<'g> BridgeCensus<'g> {
    pub fn new(graph: &'g SmallWorldGraph) -> Self {
        let n = graph.node_count();
        let m = graph.m() as usize;
        let mut start = vec![0u32; n + 1];
        for &t in graph.all_weak_ties() {
            start[t as usize + 1] += 1;
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut owners = vec![0; graph.all_weak_ties().len()];
        for (i, &t) in graph.all_weak_ties().iter().enumerate() {
            owners[fill[t as usize] as usize] = (i / m) as NodeId;
            fill[t as usize] += 1;
        }
        BridgeCensus { graph, start, owners }
    }

    /// Census around `center` with `D = {d <= r}` for `r = ceil(n^delta)`.
    pub fn census(&self, center: Coord, delta: f64, k: u32) -> Result<BridgeCounts> {
        check_delta(delta)?;
        let geom = self.graph.geometry();
        let r = disk_radius(self.graph.node_count(), delta);
        Ok(self.census_radius(center, r, k, geom.side()))
    }

    fn census_radius(&self, center: Coord, r: u32, k: u32, outer: u32) -> BridgeCounts {
        let geom = self.graph.geometry();
        let mut hits: Vec<NodeId> = Vec::new();
        let c_id = geom.id(center);
        let mut cells = vec![c_id];
        cells.extend(geom.ball(r).iter().map(|&(dx, dy)| geom.id(geom.offset(center, dx, dy))));
        for cell in cells {
            let cell = cell as usize;
            hits.extend_from_slice(&self.owners[self.start[cell] as usize..self.start[cell + 1] as usize]);
        }
        hits.sort_unstable();
        let mut counts = BridgeCounts { z1: 0, z2: 0 };
        let mut i = 0;
        while i < hits.len() {
            let owner = hits[i];
            let mut j = i;
            while j < hits.len() && hits[j] == owner {
                j += 1;
            }
            if (j - i) as u32 >= k {
                let d = geom.distance_ids(owner, c_id);
                if d <= 2 * r {
                    counts.z2 += 1;
                } else if d <= outer {
                    counts.z1 += 1;
                }
            }
            i = j;
        }
        counts
    }
}

/// `(Z1, Z2)` around `center`: wide bridges into the disk of radius `ceil(n^delta)`.
pub fn wide_bridge_census(graph: &SmallWorldGraph, center: Coord, delta: f64, k: u32) -> Result<BridgeCounts> {
    BridgeCensus::new(graph).census(center, delta, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanBridgeCounts {
    pub radius: u32,
    pub mean_z1: f64,
    pub mean_z2: f64,
}

/// Census averaged over every node as center.
pub fn mean_wide_bridge_census(graph: &SmallWorldGraph, delta: f64, k: u32) -> Result<MeanBridgeCounts> {
    check_delta(delta)?;
    let census = BridgeCensus::new(graph);
    let geom = graph.geometry();
    let r = disk_radius(graph.node_count(), delta);
    let (mut z1, mut z2) = (0usize, 0usize);
    for c in 0..graph.node_count() as NodeId {
        let b = census.census_radius(geom.coord(c), r, k, geom.side());
        z1 += b.z1;
        z2 += b.z2;
    }
    let n = graph.node_count() as f64;
    Ok(MeanBridgeCounts { radius: r, mean_z1: z1 as f64 / n, mean_z2: z2 as f64 / n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCensusReport {
    pub threshold: f64,
    pub violating_nodes: Vec<Coord>,
    pub any: bool,
    /// Block side used for the spread check (at least the short-tie reach).
    pub block_side: u32,
    /// `Some(true)` if every round only touched blocks adjacent to earlier ones; `None`
    /// when the check was skipped (violators present or no trace supplied).
    pub adjacent_spread: Option<bool>,
    pub first_jump: Option<BlockJump>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockJump {
    pub node: Coord,
    pub round: u32,
}

/// Nodes owning at least `k` weak ties longer than `n^(1/2 - delta)`; if there are none and a
/// trace is supplied, also checks that spread only reaches blocks adjacent to touched ones.
pub fn long_tie_block_census(
    graph: &SmallWorldGraph,
    delta: f64,
    k: u32,
    trace: Option<&ContagionTrace>,
) -> Result<BlockCensusReport> {
    check_delta(delta)?;
    let n = graph.node_count();
    let geom = graph.geometry();
    let threshold = (n as f64).powf(0.5 - delta);
    let violating_nodes: Vec<Coord> = (0..n as NodeId)
        .filter(|&u| {
            graph.weak_ties(u).iter().filter(|&&t| geom.distance_ids(u, t) as f64 > threshold).count() >= k as usize
        })
        .map(|u| geom.coord(u))
        .collect();
    let any = !violating_nodes.is_empty();
    // Every infection then has a source within max(R, threshold) of it, so blocks at least
    // that wide (merged, never narrower at the seam) make the adjacency claim exact.
    let block_side = (threshold.floor() as u32).max(graph.strong_radius()).max(1);
    let mut report = BlockCensusReport {
        threshold,
        violating_nodes,
        any,
        block_side,
        adjacent_spread: None,
        first_jump: None,
    };
    if let (false, Some(trace)) = (any, trace) {
        let jump = first_block_jump(graph, trace, block_side)?;
        report.adjacent_spread = Some(jump.is_none());
        report.first_jump = jump;
    }
    Ok(report)
}

fn first_block_jump(graph: &SmallWorldGraph, trace: &ContagionTrace, block_side: u32) -> Result<Option<BlockJump>> {
    let geom = graph.geometry();
    let blocks = BlockGrid::merged(geom.side(), block_side)?;
    let mut touched = vec![false; blocks.block_count()];
    let mut by_round: Vec<Vec<NodeId>> = Vec::new();
    for (v, r) in trace.infected_round.iter().enumerate() {
        if let Some(r) = *r {
            if by_round.len() <= r as usize {
                by_round.resize(r as usize + 1, Vec::new());
            }
            by_round[r as usize].push(v as NodeId);
        }
    }
    for (round, nodes) in by_round.iter().enumerate() {
        let mut fresh = Vec::new();
        for &v in nodes {
            let b = blocks.block_index(geom.coord(v));
            if round > 0 && !blocks.adjacent_blocks(b).iter().any(|&nb| touched[blocks.flat_index(nb)]) {
                return Ok(Some(BlockJump { node: geom.coord(v), round: round as u32 }));
            }
            fresh.push(b);
        }
        for b in fresh {
            touched[blocks.flat_index(b)] = true;
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeavyWitness {
    pub nodes: Vec<Coord>,
    pub long_ties: usize,
}

/// Searches for a connected (strong + weak, undirected) set of at most `k^2 - k + 1` nodes
/// carrying at least `C(k+1, 2)` long ties. Exact for `k` in `{2, 3}`.
pub fn heavy_connected_subset_search(graph: &SmallWorldGraph, k: u32, epsilon: f64) -> Result<Option<HeavyWitness>> {
    if !(2..=3).contains(&k) {
        return Err(Error::Unsupported(format!("heavy subset search supports k in {{2, 3}}, got {k}")));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::OutOfRange(format!("epsilon {epsilon} outside (0, 1/2)")));
    }
    let n = graph.node_count();
    let geom = graph.geometry();
    let threshold = long_tie_threshold(n, epsilon);
    let m = graph.m() as usize;

    // long[v]: long ties incident to v; long_pairs holds (owner, target) for the exact count
    let mut long = vec![0u32; n];
    let mut long_edges: Vec<(NodeId, NodeId)> = Vec::new();
    for (i, &t) in graph.all_weak_ties().iter().enumerate() {
        let o = (i / m) as NodeId;
        if geom.distance_ids(o, t) >= threshold {
            long[o as usize] += 1;
            long[t as usize] += 1;
            long_edges.push((o, t));
        }
    }
    if long_edges.is_empty() {
        return Ok(None);
    }
    let mut reverse: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for (i, &t) in graph.all_weak_ties().iter().enumerate() {
        reverse[t as usize].push((i / m) as NodeId);
    }
    let max_long = *long.iter().max().expect("nonempty") as usize;
    let size_cap = (k * k - k + 1) as usize;
    let need = (k * (k + 1) / 2) as usize;

    // Order: long-incident nodes first, so every witness has its minimum at one of them.
    let key = |v: NodeId| ((long[v as usize] == 0) as u64) << 32 | v as u64;
    let adjacency: Vec<Vec<NodeId>> = (0..n as NodeId)
        .map(|v| {
            let mut out: Vec<NodeId> = graph.strong_neighbors(v).collect();
            out.extend_from_slice(graph.weak_ties(v));
            out.extend_from_slice(&reverse[v as usize]);
            out.sort_unstable();
            out.dedup();
            out.retain(|&u| u != v);
            out
        })
        .collect();
    let exact_count = |set: &[NodeId]| -> usize {
        let members: HashSet<NodeId> = set.iter().copied().collect();
        long_edges.iter().filter(|(o, t)| members.contains(o) || members.contains(t)).count()
    };

    let mut seeds: Vec<NodeId> = (0..n as NodeId).filter(|&v| long[v as usize] > 0).collect();
    seeds.sort_unstable_by_key(|&v| key(v));
    for &v in &seeds {
        let root_key = key(v);
        // Any set rooted here lies within size_cap - 1 hops; skip if that ball is too light.
        let mut ball: HashSet<NodeId> = HashSet::from([v]);
        let mut layer = vec![v];
        for _ in 1..size_cap {
            let mut next = Vec::new();
            for &u in &layer {
                for &w in &adjacency[u as usize] {
                    if key(w) > root_key && ball.insert(w) {
                        next.push(w);
                    }
                }
            }
            layer = next;
        }
        let reachable = long_edges.iter().filter(|(o, t)| ball.contains(o) || ball.contains(t)).count();
        if reachable < need {
            continue;
        }
        let ext: Vec<NodeId> = adjacency[v as usize].iter().copied().filter(|&u| key(u) > root_key).collect();
        let mut sub = vec![v];
        let mut ctx = Esu {
            adjacency: &adjacency,
            key: &key,
            root_key,
            long: &long,
            max_long,
            size_cap,
            need,
            exact_count: &exact_count,
        };
        if let Some(w) = ctx.extend(&mut sub, ext, long[v as usize] as usize) {
            let long_ties = exact_count(&w);
            return Ok(Some(HeavyWitness { nodes: w.iter().map(|&u| geom.coord(u)).collect(), long_ties }));
        }
    }
    Ok(None)
}

struct Esu<'a, K, C>
where
    K: Fn(NodeId) -> u64,
    C: Fn(&[NodeId]) -> usize,
{
    adjacency: &'a [Vec<NodeId>],
    key: &'a K,
    root_key: u64,
    long: &'a [u32],
    max_long: usize,
    size_cap: usize,
    need: usize,
    exact_count: &'a C,
}

impl<K, C> Esu<'_, K, C>
where
    K: Fn(NodeId) -> u64,
    C: Fn(&[NodeId]) -> usize,
{
    /// ESU enumeration of connected sets containing the root, each visited once.
    fn extend(&mut self, sub: &mut Vec<NodeId>, mut ext: Vec<NodeId>, long_sum: usize) -> Option<Vec<NodeId>> {
        if long_sum >= self.need && (self.exact_count)(sub) >= self.need {
            return Some(sub.clone());
        }
        let room = self.size_cap - sub.len();
        if room == 0 || long_sum + room * self.max_long < self.need {
            return None;
        }
        while let Some(w) = ext.pop() {
            let in_nbhd: HashSet<NodeId> =
                sub.iter().flat_map(|&u| self.adjacency[u as usize].iter().copied()).chain(sub.iter().copied()).collect();
            let mut next_ext = ext.clone();
            for &u in &self.adjacency[w as usize] {
                if (self.key)(u) > self.root_key && !in_nbhd.contains(&u) && !next_ext.contains(&u) {
                    next_ext.push(u);
                }
            }
            sub.push(w);
            let found = self.extend(sub, next_ext, long_sum + self.long[w as usize] as usize);
            sub.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub side: u32,
    pub m: u32,
    pub gamma: f64,
    pub variant: Variant,
    pub k: u32,
    pub delta: f64,
    pub trials: u32,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEstimate {
    pub config: TrialConfig,
    pub subsquare_side: u32,
    pub a_origin: Coord,
    pub b_origin: Coord,
    pub successes: u32,
    pub success_rate: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u32, trials: u32) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Side `floor(L^(1 - delta))` of the two subsquares (area `n^(1 - delta)`).
pub fn subsquare_side(side: u32, delta: f64) -> u32 {
    ((side as f64).powf(1.0 - delta) + 1e-9).floor() as u32
}

/// Seeds all of `A` at the origin, runs `k` rounds and asks whether `B` (diagonally
/// opposite) holds a fully infected grid-connected `k`-set. Each trial uses a fresh graph.
pub fn recursive_spreading_trial(config: &TrialConfig, exec: Execution) -> Result<TrialEstimate> {
    if config.trials == 0 {
        return Err(Error::Precondition("trials must be >= 1".into()));
    }
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::OutOfRange(format!("delta {} outside (0, 1)", config.delta)));
    }
    let side = config.side;
    let a = subsquare_side(side, config.delta);
    if a < config.k.max(1) {
        return Err(Error::Precondition(format!("subsquare side {a} smaller than k = {}", config.k)));
    }
    if 2 * a > side {
        return Err(Error::Precondition(format!(
            "subsquares of side {a} cannot be disjoint on a torus of side {side}"
        )));
    }
    let a_sq = Square::new(Coord::new(0, 0), a);
    let b_sq = Square::new(Coord::new(side / 2, side / 2), a);
    let base = GraphParams { side, m: config.m, gamma: config.gamma, variant: config.variant, rng_seed: 0 };
    base.validate()?;
    let results: Vec<Result<bool>> = exec.map_indexed(config.trials as usize, |i| {
        let params = GraphParams { rng_seed: derive_seed(config.rng_seed, &[i as u64]), ..base };
        let graph = SmallWorldGraph::generate(params)?;
        let geom = graph.geometry();
        let seeds: Vec<NodeId> = geom.square_cells(&a_sq).into_iter().map(|c| geom.id(c)).collect();
        let trace = run_contagion(&graph, config.k, &seeds, config.k)?;
        Ok(detect_new_seed_cluster(&trace, geom, &b_sq, config.k, config.k).is_some())
    });
    let mut successes = 0u32;
    for r in results {
        successes += r? as u32;
    }
    let n = config.trials as f64;
    let p = successes as f64 / n;
    Ok(TrialEstimate {
        config: config.clone(),
        subsquare_side: a,
        a_origin: a_sq.origin,
        b_origin: b_sq.origin,
        successes,
        success_rate: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
        ci95: wilson_interval(successes, config.trials),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_rounding() {
        assert_eq!(disk_radius(1024, 0.2), 4);
        assert_eq!(disk_radius(4096, 0.15), 4); // 3.48
        assert_eq!(disk_radius(65536, 0.25), 16);
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2775).abs() < 1e-3);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn trial_geometry_errors() {
        let cfg = TrialConfig {
            side: 16,
            m: 2,
            gamma: 2.3,
            variant: Variant::W,
            k: 2,
            delta: 0.05,
            trials: 2,
            rng_seed: 1,
        };
        assert!(recursive_spreading_trial(&cfg, Execution::Sequential).is_err());
        let ok = TrialConfig { delta: 0.3, ..cfg };
        let est = recursive_spreading_trial(&ok, Execution::Sequential).unwrap();
        assert_eq!(est.subsquare_side, 6);
        assert!(est.ci95.0 <= est.success_rate && est.success_rate <= est.ci95.1);
    }

    #[test]
    fn unsupported_heavy_k() {
        let g = SmallWorldGraph::generate(GraphParams { side: 8, m: 4, gamma: 2.0, variant: Variant::W, rng_seed: 1 })
            .unwrap();
        assert!(matches!(heavy_connected_subset_search(&g, 4, 0.1), Err(Error::Unsupported(_))));
    }
}
