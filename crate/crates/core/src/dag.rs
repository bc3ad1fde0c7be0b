//! Route-of-infection DAG and the lower-bound combinatorics built on it.
//!
//! Every non-seed infected node `v` gets `k` out-edges to the influence sources that
//! first caused its infection. Edges are classified short or long: grid edges are
//! always short, weak ties are long iff their length is at least `ceil(n^(1/2 - eps))`.

use std::collections::{HashSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::ContagionTrace;
use crate::error::{Error, Result};
use crate::graph::{SmallWorldGraph, TieKind, Variant};
use crate::torus::NodeId;

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TieClass {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagEdge {
    pub infector: NodeId,
    pub kind: TieKind,
    pub length: u32,
    pub class: TieClass,
}

/// `ceil(n^(1/2 - eps))`, robust to floating error on exact powers.
pub fn long_tie_threshold(n: usize, epsilon: f64) -> u32 {
    let x = (n as f64).powf(0.5 - epsilon);
    let c = x.ceil();
    if c - 1.0 >= x - 1e-9 {
        (c - 1.0).max(1.0) as u32
    } else {
        c.max(1.0) as u32
    }
}

pub fn classify(kind: TieKind, length: u32, threshold: u32) -> TieClass {
    if kind == TieKind::Weak && length >= threshold {
        TieClass::Long
    } else {
        TieClass::Short
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfectionDag {
    k: u32,
    epsilon: f64,
    long_threshold: u32,
    rounds: Vec<Option<u32>>,
    edge_start: Vec<u32>,
    edges: Vec<DagEdge>,
}

impl InfectionDag {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn long_threshold(&self) -> u32 {
        self.long_threshold
    }

    pub fn node_count(&self) -> usize {
        self.rounds.len()
    }

    pub fn round(&self, v: NodeId) -> Option<u32> {
        self.rounds[v as usize]
    }

    pub fn is_seed(&self, v: NodeId) -> bool {
        self.rounds[v as usize] == Some(0)
    }

    pub fn out_edges(&self, v: NodeId) -> &[DagEdge] {
        let v = v as usize;
        &self.edges[self.edge_start[v] as usize..self.edge_start[v + 1] as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Infected nodes sorted by `(round, id)`: every edge points backward in this order.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut order: Vec<NodeId> = (0..self.rounds.len() as NodeId)
            .filter(|&v| self.rounds[v as usize].is_some())
            .collect();
        order.sort_by_key(|&v| (self.rounds[v as usize], v));
        order
    }

    /// Checks acyclicity (via strictly decreasing rounds) and out-degree `k` for non-seeds.
    pub fn validate(&self, graph: &SmallWorldGraph) -> Result<()> {
        for v in 0..self.rounds.len() as NodeId {
            let edges = self.out_edges(v);
            match self.rounds[v as usize] {
                None | Some(0) if !edges.is_empty() => {
                    return Err(Error::Corrupted(format!("node {v} is a seed or uninfected but has dag edges")));
                }
                Some(r) if r > 0 => {
                    if edges.len() != self.k as usize {
                        return Err(Error::Corrupted(format!("node {v} has out-degree {}", edges.len())));
                    }
                    let sources = graph.influence_sources(v);
                    let mut available = sources.clone();
                    for e in edges {
                        match self.rounds[e.infector as usize] {
                            Some(ru) if ru < r => {}
                            _ => {
                                return Err(Error::Corrupted(format!(
                                    "edge {v} -> {} does not go back in time",
                                    e.infector
                                )))
                            }
                        }
                        let pos = available
                            .iter()
                            .position(|s| s.node == e.infector && s.kind == e.kind && s.length == e.length)
                            .ok_or_else(|| {
                                Error::Corrupted(format!("edge {v} -> {} is not an influence source", e.infector))
                            })?;
                        available.swap_remove(pos);
                        if e.class != classify(e.kind, e.length, self.long_threshold) {
                            return Err(Error::Corrupted(format!("edge {v} -> {} misclassified", e.infector)));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// CSV with columns `v,infector,tie_kind,length,class`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["v", "infector", "tie_kind", "length", "class"])?;
        for v in 0..self.rounds.len() as NodeId {
            for e in self.out_edges(v) {
                w.write_record([
                    v.to_string(),
                    e.infector.to_string(),
                    match e.kind {
                        TieKind::Strong => "strong".into(),
                        TieKind::Weak => "weak".into(),
                    },
                    e.length.to_string(),
                    match e.class {
                        TieClass::Short => "short".into(),
                        TieClass::Long => "long".into(),
                    },
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds `D(G, A)`: infectors are the `k` earliest influence sources, ordered by
/// `(round, id, strong-before-weak)`. A K^I multi-edge fills one slot per edge.
pub fn build_dag(graph: &SmallWorldGraph, trace: &ContagionTrace, k: u32, epsilon: f64) -> Result<InfectionDag> {
    let n = graph.node_count();
    if trace.infected_round.len() != n {
        return Err(Error::Corrupted(format!(
            "trace has {} nodes, graph has {n}",
            trace.infected_round.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::OutOfRange(format!("epsilon {epsilon} outside (0, 1/2)")));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be >= 1".into()));
    }
    let threshold = long_tie_threshold(n, epsilon);
    let rounds = &trace.infected_round;
    let mut edge_start = Vec::with_capacity(n + 1);
    let mut edges = Vec::new();
    edge_start.push(0u32);
    for v in 0..n as NodeId {
        if let Some(rv) = rounds[v as usize].filter(|&r| r > 0) {
            let mut earlier: Vec<(u32, NodeId, TieKind, u32)> = graph
                .influence_sources(v)
                .into_iter()
                .filter_map(|s| match rounds[s.node as usize] {
                    Some(r) if r < rv => Some((r, s.node, s.kind, s.length)),
                    _ => None,
                })
                .collect();
            if earlier.len() < k as usize {
                return Err(Error::Corrupted(format!(
                    "node {v} infected at round {rv} with only {} earlier sources",
                    earlier.len()
                )));
            }
            earlier.sort_unstable();
            edges.extend(earlier.into_iter().take(k as usize).map(|(_, node, kind, length)| DagEdge {
                infector: node,
                kind,
                length,
                class: classify(kind, length, threshold),
            }));
        }
        edge_start.push(edges.len() as u32);
    }
    Ok(InfectionDag { k, epsilon, long_threshold: threshold, rounds: rounds.clone(), edge_start, edges })
}

/// `A(S)`: nodes reachable from `s` along short dag edges, `s` included.
pub fn short_closure(dag: &InfectionDag, s: &[NodeId]) -> Vec<NodeId> {
    let mut seen: HashSet<NodeId> = HashSet::with_capacity(s.len() * 4);
    let mut queue: VecDeque<NodeId> = VecDeque::new();
    for &v in s {
        if seen.insert(v) {
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        for e in dag.out_edges(v) {
            if e.class == TieClass::Short && seen.insert(e.infector) {
                queue.push_back(e.infector);
            }
        }
    }
    let mut out: Vec<NodeId> = seen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Long weak ties incident to a node set (as owner or target), each tie counted once.
pub fn long_ties_incident(graph: &SmallWorldGraph, nodes: &[NodeId], threshold: u32) -> usize {
    let members: HashSet<NodeId> = nodes.iter().copied().collect();
    let geom = graph.geometry();
    let mut count = 0;
    for &u in nodes {
        count += graph.weak_ties(u).iter().filter(|&&t| geom.distance_ids(u, t) >= threshold).count();
    }
    // The reverse index holds only ties that count as influence; in W that omits ties
    // landing inside the strong ball, which can only be long when the threshold is tiny.
    if graph.variant() == Variant::W && threshold <= graph.strong_radius() {
        let m = graph.m() as usize;
        for (i, &t) in graph.all_weak_ties().iter().enumerate() {
            let owner = (i / m) as NodeId;
            if members.contains(&t) && !members.contains(&owner) && geom.distance_ids(owner, t) >= threshold {
                count += 1;
            }
        }
        return count;
    }
    for &v in nodes {
        for &w in graph.weak_owners_of(v) {
            if !members.contains(&w) && geom.distance_ids(w, v) >= threshold {
                count += 1;
            }
        }
    }
    count
}

/// `L(S)`: long ties incident to `A(S)`.
pub fn long_tie_count(graph: &SmallWorldGraph, dag: &InfectionDag, s: &[NodeId]) -> usize {
    let closure = short_closure(dag, s);
    long_ties_incident(graph, &closure, dag.long_threshold)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathViolation {
    /// Dag path from the later-infected node back to the earlier one.
    pub path: Vec<NodeId>,
    pub round_gap: i64,
}

/// Verifies that along every dag path the round difference is at least the path length.
///
/// With `g(v) = max over u reachable from v of (len(v, u) + round(u))`, the property holds
/// iff `g(v) <= round(v)` for every infected `v`. `g` is computed in topological order.
pub fn check_path_time_consistency(dag: &InfectionDag) -> std::result::Result<(), PathViolation> {
    let n = dag.node_count();
    let mut g: Vec<i64> = vec![i64::MIN; n];
    let mut via: Vec<Option<NodeId>> = vec![None; n];
    // ascending rounds suffice only if edges go back in time, which is what we are checking,
    // so use a real topological sort (Kahn) on the dag edges.
    let order = match topo_sinks_first(dag) {
        Some(o) => o,
        None => {
            return Err(PathViolation { path: find_cycle(dag), round_gap: 0 });
        }
    };
    for &v in &order {
        let rv = dag.rounds[v as usize].map(|r| r as i64).unwrap_or(0);
        let mut best = rv;
        let mut arg = None;
        for e in dag.out_edges(v) {
            let cand = g[e.infector as usize] + 1;
            if cand > best {
                best = cand;
                arg = Some(e.infector);
            }
        }
        g[v as usize] = best;
        via[v as usize] = arg;
        if best > rv {
            let mut path = vec![v];
            let mut cur = v;
            while let Some(next) = via[cur as usize] {
                path.push(next);
                cur = next;
            }
            let end = *path.last().expect("nonempty path");
            let gap = rv - dag.rounds[end as usize].map(|r| r as i64).unwrap_or(0);
            return Err(PathViolation { path, round_gap: gap });
        }
    }
    Ok(())
}

fn topo_sinks_first(dag: &InfectionDag) -> Option<Vec<NodeId>> {
    let n = dag.node_count();
    let mut pending: Vec<u32> = (0..n as NodeId).map(|v| dag.out_edges(v).len() as u32).collect();
    let mut preds: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for v in 0..n as NodeId {
        for e in dag.out_edges(v) {
            preds[e.infector as usize].push(v);
        }
    }
    let mut queue: VecDeque<NodeId> = (0..n as NodeId).filter(|&v| pending[v as usize] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &preds[u as usize] {
            pending[v as usize] -= 1;
            if pending[v as usize] == 0 {
                queue.push_back(v);
            }
        }
    }
    (order.len() == n).then_some(order)
}

fn find_cycle(dag: &InfectionDag) -> Vec<NodeId> {
    let n = dag.node_count();
    let mut color = vec![0u8; n];
    let mut stack: Vec<NodeId> = Vec::new();
    fn dfs(dag: &InfectionDag, v: NodeId, color: &mut [u8], stack: &mut Vec<NodeId>) -> Option<Vec<NodeId>> {
        color[v as usize] = 1;
        stack.push(v);
        for e in dag.out_edges(v) {
            let u = e.infector;
            if color[u as usize] == 1 {
                let start = stack.iter().position(|&x| x == u).expect("on stack");
                let mut cyc = stack[start..].to_vec();
                cyc.push(u);
                return Some(cyc);
            }
            if color[u as usize] == 0 {
                if let Some(c) = dfs(dag, u, color, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        color[v as usize] = 2;
        None
    }
    for v in 0..n as NodeId {
        if color[v as usize] == 0 {
            if let Some(c) = dfs(dag, v, &mut color, &mut stack) {
                return c;
            }
        }
    }
    Vec::new()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessCase {
    /// Some `v` in `B` has `|A(v)| >= k`; witness is `A(v0)` for the earliest such `v0`.
    MinimalClosure,
    /// Every `v` in `B` has `|A(v)| < k`; witness is `A(B)`.
    ClusterClosure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EitherOrVerdict {
    Intersects,
    HeavySubset { case: WitnessCase, witness: Vec<NodeId>, long_ties: usize },
    Violation { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EitherOrReport {
    pub verdict: EitherOrVerdict,
    /// Number of `L(S) >= k + (k-1) + ...` inequalities checked on the no-intersection branch.
    pub prop_checks: usize,
}

fn binom2(k: u32) -> usize {
    (k as usize) * (k as usize + 1) / 2
}

/// `k + (k - 1) + ... + (k - s + 1)`.
pub fn required_long_ties(k: u32, s: usize) -> usize {
    (0..s.min(k as usize)).map(|i| k as usize - i).sum()
}

/// Is `nodes` connected using strong ties and weak ties in either direction?
pub fn is_connected_set(graph: &SmallWorldGraph, nodes: &[NodeId]) -> bool {
    if nodes.is_empty() {
        return true;
    }
    let members: HashSet<NodeId> = nodes.iter().copied().collect();
    let mut seen: HashSet<NodeId> = HashSet::new();
    let mut queue = VecDeque::from([nodes[0]]);
    seen.insert(nodes[0]);
    while let Some(u) = queue.pop_front() {
        for &v in nodes {
            if seen.contains(&v) {
                continue;
            }
            let linked = graph.is_strong_tie(u, v)
                || graph.weak_ties(u).contains(&v)
                || graph.weak_ties(v).contains(&u);
            if linked && members.contains(&v) {
                seen.insert(v);
                queue.push_back(v);
            }
        }
    }
    seen.len() == members.len()
}

/// Checks `L(S) >= k + ... + (k - s + 1)` with `s = min(|A(S)|, k)` over a family of
/// subsets of `A(B)`: every singleton, every prefix of `A(B)` in infection order, `B`
/// itself, and all subsets when `|A(B)| <= 10`. Returns the number of checks made.
pub fn check_long_tie_inequality(
    graph: &SmallWorldGraph,
    dag: &InfectionDag,
    b: &[NodeId],
) -> std::result::Result<usize, String> {
    let k = dag.k;
    let closure_b = short_closure(dag, b);
    let mut checks = 0usize;
    let mut check = |s: &[NodeId]| -> std::result::Result<(), String> {
        let closure = short_closure(dag, s);
        let need = required_long_ties(k, closure.len());
        let have = long_ties_incident(graph, &closure, dag.long_threshold);
        checks += 1;
        if have < need {
            Err(format!("S={s:?}: |A(S)|={} but L(S)={have} < {need}", closure.len()))
        } else {
            Ok(())
        }
    };
    for &v in &closure_b {
        check(&[v])?;
    }
    let mut ordered = closure_b.clone();
    ordered.sort_by_key(|&v| (dag.rounds[v as usize], v));
    for i in 1..=ordered.len() {
        check(&ordered[..i])?;
    }
    check(b)?;
    if closure_b.len() <= 10 {
        for mask in 1u32..(1 << closure_b.len()) {
            let subset: Vec<NodeId> = closure_b
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &v)| v)
                .collect();
            check(&subset)?;
        }
    }
    Ok(checks)
}

/// Either `A` meets `A(B)`, or a connected set of at most `k^2 - k + 1` nodes carries at
/// least `C(k+1, 2)` long ties. The witness is constructed as in the two-case argument.
pub fn check_either_or(
    graph: &SmallWorldGraph,
    dag: &InfectionDag,
    a: &[NodeId],
    b: &[NodeId],
    k: u32,
) -> Result<EitherOrReport> {
    if graph.variant() != Variant::W {
        return Err(Error::Precondition("either-or check applies to W graphs only".into()));
    }
    if k != dag.k {
        return Err(Error::Precondition(format!("k={k} but dag built with k={}", dag.k)));
    }
    if let Some(&v) = b.iter().find(|&&v| dag.rounds[v as usize].is_none()) {
        return Err(Error::Precondition(format!("cluster node {v} never infected")));
    }
    let closure_b = short_closure(dag, b);
    let a_set: HashSet<NodeId> = a.iter().copied().collect();
    if closure_b.iter().any(|v| a_set.contains(v)) {
        return Ok(EitherOrReport { verdict: EitherOrVerdict::Intersects, prop_checks: 0 });
    }

    let prop_checks = match check_long_tie_inequality(graph, dag, b) {
        Ok(c) => c,
        Err(reason) => {
            return Ok(EitherOrReport {
                verdict: EitherOrVerdict::Violation { reason: format!("long-tie count inequality: {reason}") },
                prop_checks: 0,
            })
        }
    };

    let size_cap = (k * k - k + 1) as usize;
    let need = binom2(k);
    let heavy_v = b.iter().copied().find(|&v| short_closure(dag, &[v]).len() >= k as usize);
    let (case, witness) = match heavy_v {
        Some(v) => {
            let mut order = short_closure(dag, &[v]);
            order.sort_by_key(|&u| (dag.rounds[u as usize], u));
            let v0 = order
                .into_iter()
                .find(|&u| short_closure(dag, &[u]).len() >= k as usize)
                .expect("v itself qualifies");
            (WitnessCase::MinimalClosure, short_closure(dag, &[v0]))
        }
        None => (WitnessCase::ClusterClosure, closure_b),
    };
    let long_ties = long_ties_incident(graph, &witness, dag.long_threshold);
    let verdict = if witness.len() > size_cap {
        EitherOrVerdict::Violation { reason: format!("witness size {} exceeds {size_cap}", witness.len()) }
    } else if long_ties < need {
        EitherOrVerdict::Violation { reason: format!("witness carries {long_ties} long ties, need {need}") }
    } else if !is_connected_set(graph, &witness) {
        EitherOrVerdict::Violation { reason: "witness is not connected".into() }
    } else {
        EitherOrVerdict::HeavySubset { case, witness, long_ties }
    };
    Ok(EitherOrReport { verdict, prop_checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_contagion;
    use crate::graph::GraphParams;
    use crate::torus::Coord;

    #[test]
    fn threshold_rounding() {
        // 1024^0.4 = 16 exactly
        assert_eq!(long_tie_threshold(1024, 0.1), 16);
        assert_eq!(long_tie_threshold(4096, 0.1), 28); // 27.86
        assert_eq!(long_tie_threshold(256, 0.25), 4);
    }

    #[test]
    fn required_sums() {
        assert_eq!(required_long_ties(2, 2), 3);
        assert_eq!(required_long_ties(3, 3), 6);
        assert_eq!(required_long_ties(3, 1), 3);
        assert_eq!(required_long_ties(3, 5), 6);
        assert_eq!(required_long_ties(2, 0), 0);
    }

    fn run(side: u32, gamma: f64, variant: Variant, seed: u64, k: u32) -> (SmallWorldGraph, ContagionTrace) {
        let g = SmallWorldGraph::generate(GraphParams { side, m: 2, gamma, variant, rng_seed: seed }).unwrap();
        let seeds: Vec<NodeId> = g
            .geometry()
            .canonical_seed_cluster(Coord::new(0, 0), k)
            .unwrap()
            .into_iter()
            .map(|c| g.id(c))
            .collect();
        let t = run_contagion(&g, k, &seeds, 4 * side).unwrap();
        (g, t)
    }

    #[test]
    fn dag_invariants_hold() {
        for variant in [Variant::W, Variant::I] {
            let (g, t) = run(12, 2.5, variant, 3, 2);
            let dag = build_dag(&g, &t, 2, 0.1).unwrap();
            dag.validate(&g).unwrap();
            check_path_time_consistency(&dag).unwrap();
            assert_eq!(dag.edge_count(), 2 * (t.infected_count() - t.seeds.len()));
        }
    }

    #[test]
    fn closure_basics() {
        let (g, t) = run(12, 2.5, Variant::W, 3, 2);
        let dag = build_dag(&g, &t, 2, 0.1).unwrap();
        assert!(short_closure(&dag, &[]).is_empty());
        let mut seeds = t.seeds.clone();
        seeds.sort_unstable();
        assert_eq!(short_closure(&dag, &seeds), seeds);
    }

    #[test]
    fn corrupt_trace_is_rejected() {
        let (g, mut t) = run(12, 2.5, Variant::W, 3, 2);
        let v = (0..144).find(|&v| t.infected_round[v] == Some(3)).unwrap();
        t.infected_round[v] = Some(1);
        assert!(matches!(build_dag(&g, &t, 2, 0.1), Err(Error::Corrupted(_))));
    }

    #[test]
    fn tampered_rounds_fail_path_check() {
        let (g, t) = run(10, 2.5, Variant::W, 8, 2);
        let mut dag = build_dag(&g, &t, 2, 0.1).unwrap();
        let v = (0..100u32).find(|&v| dag.round(v) == Some(4)).unwrap();
        let target = dag.out_edges(v)[0].infector;
        dag.rounds[target as usize] = Some(4);
        let err = check_path_time_consistency(&dag).unwrap_err();
        assert!(err.path.len() >= 2);
    }

    #[test]
    fn either_or_intersects_on_grid_spread() {
        let (g, t) = run(16, 3.2, Variant::W, 1, 2);
        let dag = build_dag(&g, &t, 2, 0.1).unwrap();
        let b: Vec<NodeId> = vec![g.id(Coord::new(2, 0)), g.id(Coord::new(3, 0))];
        let a = t.seeds.clone();
        let rep = check_either_or(&g, &dag, &a, &b, 2).unwrap();
        assert_eq!(rep.verdict, EitherOrVerdict::Intersects);
        let (gi, ti) = run(16, 3.2, Variant::I, 1, 2);
        let dagi = build_dag(&gi, &ti, 2, 0.1).unwrap();
        assert!(check_either_or(&gi, &dagi, &a, &b, 2).is_err());
    }
}
