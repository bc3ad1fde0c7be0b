//! Round-synchronous k-complex contagion.
//!
//! The engine is frontier driven: each uninfected node keeps a counter of infected
//! influence sources (with multiplicity). When a node is infected in round `t`, all of
//! its dependents have their counters bumped; any counter reaching `k` schedules that
//! node for round `t + 1`. Counters only ever see sources infected in rounds `<= t`,
//! which gives the synchronous semantics without rescanning the graph.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SmallWorldGraph;
use crate::torus::{Coord, NodeId, Square, TorusGeometry};

const NEVER: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContagionTrace {
    pub k: u32,
    /// Infection round per node; 0 for seeds, `None` if never infected.
    pub infected_round: Vec<Option<u32>>,
    /// Newly infected counts for rounds `1..=rounds_elapsed`.
    pub frontier_sizes: Vec<usize>,
    pub rounds_elapsed: u32,
    pub covered: bool,
    pub seeds: Vec<NodeId>,
}

impl ContagionTrace {
    pub fn infected_count(&self) -> usize {
        self.infected_round.iter().filter(|r| r.is_some()).count()
    }

    pub fn coverage_fraction(&self) -> f64 {
        self.infected_count() as f64 / self.infected_round.len() as f64
    }

    pub fn round_of(&self, v: NodeId) -> Option<u32> {
        self.infected_round[v as usize]
    }

    pub fn is_seed(&self, v: NodeId) -> bool {
        self.infected_round[v as usize] == Some(0)
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            covered: self.covered,
            rounds: self.rounds_elapsed,
            frontier_sizes: self.frontier_sizes.clone(),
        }
    }
}

/// Default cap on rounds: four times the torus side.
pub fn default_max_rounds(side: u32) -> u32 {
    4 * side
}

pub fn run_contagion(
    graph: &SmallWorldGraph,
    k: u32,
    seeds: &[NodeId],
    max_rounds: u32,
) -> Result<ContagionTrace> {
    let n = graph.node_count();
    if k == 0 {
        return Err(Error::Precondition("k must be >= 1".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Precondition("seed set is empty".into()));
    }
    if let Some(&bad) = seeds.iter().find(|&&s| s as usize >= n) {
        return Err(Error::Precondition(format!("seed {bad} out of range")));
    }

    let mut round = vec![NEVER; n];
    let mut counter = vec![0u32; n];
    let mut frontier: Vec<NodeId> = Vec::with_capacity(seeds.len());
    for &s in seeds {
        if round[s as usize] == NEVER {
            round[s as usize] = 0;
            frontier.push(s);
        }
    }
    let seed_list = frontier.clone();
    let mut infected = frontier.len();
    let mut frontier_sizes = Vec::new();
    let mut t = 0u32;
    let mut next: Vec<NodeId> = Vec::new();

    while t < max_rounds && infected < n {
        next.clear();
        for &s in &frontier {
            graph.for_each_dependent(s, |d| {
                let du = d as usize;
                if round[du] == NEVER {
                    counter[du] += 1;
                    if counter[du] == k {
                        next.push(d);
                    }
                }
            });
        }
        if next.is_empty() {
            break;
        }
        t += 1;
        for &v in &next {
            round[v as usize] = t;
        }
        infected += next.len();
        frontier_sizes.push(next.len());
        std::mem::swap(&mut frontier, &mut next);
    }

    Ok(ContagionTrace {
        k,
        infected_round: round.into_iter().map(|r| (r != NEVER).then_some(r)).collect(),
        frontier_sizes,
        rounds_elapsed: t,
        covered: infected == n,
        seeds: seed_list,
    })
}

/// Rounds until every node is infected, or `None` when the cascade did not cover the graph.
pub fn rounds_to_full(trace: &ContagionTrace) -> Option<u32> {
    trace.covered.then_some(trace.rounds_elapsed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub covered: bool,
    pub rounds: u32,
    pub frontier_sizes: Vec<usize>,
}

/// CSV with columns `node_x,node_y,infected_round`; never-infected rows leave the round empty.
pub fn write_trace_csv<W: Write>(trace: &ContagionTrace, geom: &TorusGeometry, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_x", "node_y", "infected_round"])?;
    for (id, r) in trace.infected_round.iter().enumerate() {
        let c = geom.coord(id as NodeId);
        let r = r.map(|r| r.to_string()).unwrap_or_default();
        w.write_record([c.x.to_string(), c.y.to_string(), r])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed (translation-only) polyominoes of `size` cells, each normalized to min x = min y = 0.
pub fn fixed_polyominoes(size: usize) -> Vec<Vec<(u32, u32)>> {
    if size == 0 {
        return Vec::new();
    }
    let mut shapes: BTreeSet<Vec<(i32, i32)>> = BTreeSet::new();
    shapes.insert(vec![(0, 0)]);
    for _ in 1..size {
        let mut grown = BTreeSet::new();
        for shape in &shapes {
            for &(x, y) in shape {
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let cell = (x + dx, y + dy);
                    if shape.contains(&cell) {
                        continue;
                    }
                    let mut s = shape.clone();
                    s.push(cell);
                    grown.insert(normalize(s));
                }
            }
        }
        shapes = grown;
    }
    shapes
        .into_iter()
        .map(|s| s.into_iter().map(|(x, y)| (x as u32, y as u32)).collect())
        .collect()
}

fn normalize(mut cells: Vec<(i32, i32)>) -> Vec<(i32, i32)> {
    let mx = cells.iter().map(|c| c.0).min().unwrap_or(0);
    let my = cells.iter().map(|c| c.1).min().unwrap_or(0);
    for c in &mut cells {
        c.0 -= mx;
        c.1 -= my;
    }
    cells.sort_unstable();
    cells
}

/// Largest `k` for which cluster detection enumerates every connected shape.
pub const EXHAUSTIVE_SHAPE_LIMIT: u32 = 4;

fn cluster_shapes(k: u32) -> Vec<Vec<(u32, u32)>> {
    if k <= EXHAUSTIVE_SHAPE_LIMIT {
        return fixed_polyominoes(k as usize);
    }
    vec![(0..k).map(|i| (i, 0)).collect(), (0..k).map(|i| (0, i)).collect()]
}

/// Earliest round `<= deadline_round` by which some grid-connected `k`-set inside
/// `region` is fully infected. Shapes are exhaustive for `k <= 4`, straight runs otherwise.
pub fn detect_new_seed_cluster(
    trace: &ContagionTrace,
    geom: &TorusGeometry,
    region: &Square,
    k: u32,
    deadline_round: u32,
) -> Option<(Vec<Coord>, u32)> {
    let s = region.side;
    if k == 0 || s == 0 {
        return None;
    }
    // A region spanning the whole torus lets shapes wrap across its edge.
    let wraps = s >= geom.side();
    let mut best: Option<(Vec<Coord>, u32)> = None;
    for shape in cluster_shapes(k) {
        let w = shape.iter().map(|c| c.0).max().unwrap_or(0) + 1;
        let h = shape.iter().map(|c| c.1).max().unwrap_or(0) + 1;
        let (ax, ay) = if wraps { (s, s) } else { (s.saturating_sub(w - 1), s.saturating_sub(h - 1)) };
        if !wraps && (w > s || h > s) {
            continue;
        }
        for oy in 0..ay {
            for ox in 0..ax {
                let mut worst = 0u32;
                let mut ok = true;
                for &(cx, cy) in &shape {
                    let c = geom.offset(region.origin, (ox + cx) % geom.side(), (oy + cy) % geom.side());
                    match trace.infected_round[geom.id(c) as usize] {
                        Some(r) if r <= deadline_round => worst = worst.max(r),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok && best.as_ref().is_none_or(|b| worst < b.1) {
                    let cells = shape
                        .iter()
                        .map(|&(cx, cy)| {
                            geom.offset(region.origin, (ox + cx) % geom.side(), (oy + cy) % geom.side())
                        })
                        .collect();
                    best = Some((cells, worst));
                }
            }
        }
    }
    best
}
