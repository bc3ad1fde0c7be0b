//! Reference implementations used as oracles. Deliberately naive: no shared code paths
//! with the library beyond reading the raw weak-tie lists.
#![allow(dead_code)]

use std::collections::VecDeque;

use kcontagion::graph::{SmallWorldGraph, Variant};

pub fn torus_distance(side: u32, a: u32, b: u32) -> u32 {
    let (ax, ay) = (a % side, a / side);
    let (bx, by) = (b % side, b / side);
    let dx = ax.abs_diff(bx);
    let dy = ay.abs_diff(by);
    dx.min(side - dx) + dy.min(side - dy)
}

pub fn radius(m: u32) -> u32 {
    (1..).find(|r| r * r >= m).unwrap()
}

/// Influence multiset of `u` by scanning every node for strong ties.
pub fn naive_sources(g: &SmallWorldGraph, u: u32) -> Vec<u32> {
    let side = g.side();
    let n = side * side;
    let r = radius(g.m());
    let mut out: Vec<u32> = (0..n).filter(|&v| v != u && torus_distance(side, u, v) <= r).collect();
    for &t in g.weak_ties(u) {
        let coincides = torus_distance(side, u, t) <= r;
        if g.variant() == Variant::I || !coincides {
            out.push(t);
        }
    }
    out
}

/// Round-by-round rescan: every uninfected node recounts its infected sources.
pub fn naive_rescan(g: &SmallWorldGraph, k: u32, seeds: &[u32], max_rounds: u32) -> Vec<Option<u32>> {
    let n = g.node_count() as u32;
    let sources: Vec<Vec<u32>> = (0..n).map(|u| naive_sources(g, u)).collect();
    let mut round: Vec<Option<u32>> = vec![None; n as usize];
    for &s in seeds {
        round[s as usize] = Some(0);
    }
    for t in 1..=max_rounds {
        let newly: Vec<u32> = (0..n)
            .filter(|&u| round[u as usize].is_none())
            .filter(|&u| sources[u as usize].iter().filter(|&&s| round[s as usize].is_some()).count() >= k as usize)
            .collect();
        if newly.is_empty() {
            break;
        }
        for u in newly {
            round[u as usize] = Some(t);
        }
    }
    round
}

/// Largest BFS distance from the seeds along reverse influence edges, or `None` if some
/// node is unreachable.
pub fn reverse_bfs_eccentricity(g: &SmallWorldGraph, seeds: &[u32]) -> Option<u32> {
    let n = g.node_count() as u32;
    let mut dependents: Vec<Vec<u32>> = vec![Vec::new(); n as usize];
    for u in 0..n {
        for s in naive_sources(g, u) {
            dependents[s as usize].push(u);
        }
    }
    let mut dist: Vec<Option<u32>> = vec![None; n as usize];
    let mut queue = VecDeque::new();
    for &s in seeds {
        dist[s as usize] = Some(0);
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        let d = dist[u as usize].unwrap();
        for &v in &dependents[u as usize] {
            if dist[v as usize].is_none() {
                dist[v as usize] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist.into_iter().try_fold(0, |acc, d| d.map(|d| acc.max(d)))
}

/// Boolean transitive closure by repeated squaring of the adjacency matrix.
pub fn reachability_matrix(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut m = vec![vec![false; n]; n];
    for i in 0..n {
        m[i][i] = true;
    }
    for &(a, b) in edges {
        m[a][b] = true;
    }
    let mut steps = 1;
    while steps < n {
        let mut next = m.clone();
        for i in 0..n {
            for j in 0..n {
                if m[i][j] {
                    for l in 0..n {
                        if m[j][l] {
                            next[i][l] = true;
                        }
                    }
                }
            }
        }
        m = next;
        steps *= 2;
    }
    m
}

/// Is `set` connected via strong ties and weak ties in either direction? Pairwise scan.
pub fn naive_connected(g: &SmallWorldGraph, set: &[u32]) -> bool {
    if set.is_empty() {
        return true;
    }
    let side = g.side();
    let r = radius(g.m());
    let linked = |a: u32, b: u32| {
        torus_distance(side, a, b) <= r || g.weak_ties(a).contains(&b) || g.weak_ties(b).contains(&a)
    };
    let mut seen = vec![set[0]];
    let mut frontier = vec![set[0]];
    while let Some(u) = frontier.pop() {
        for &v in set {
            if !seen.contains(&v) && linked(u, v) {
                seen.push(v);
                frontier.push(v);
            }
        }
    }
    seen.len() == set.len()
}

/// Long weak ties incident to `set`, by scanning every tie in the graph.
pub fn naive_long_ties(g: &SmallWorldGraph, set: &[u32], threshold: u32) -> usize {
    let m = g.m() as usize;
    g.all_weak_ties()
        .iter()
        .enumerate()
        .filter(|&(i, &t)| {
            let o = (i / m) as u32;
            torus_distance(g.side(), o, t) >= threshold && (set.contains(&o) || set.contains(&t))
        })
        .count()
}
