//! Kleinberg small-world graphs: torus strong ties plus `m` sampled weak ties per node.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{rng_from_seed, SimRng};
use crate::torus::{Coord, NodeId, TorusGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Weak ties drawn without replacement; no multi-edges.
    W,
    /// Weak ties drawn independently; repeats allowed.
    I,
}

impl Variant {
    pub fn as_byte(self) -> u8 {
        match self {
            Variant::W => b'W',
            Variant::I => b'I',
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            b'W' => Some(Variant::W),
            b'I' => Some(Variant::I),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::W => "W",
            Variant::I => "I",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "W" | "w" => Ok(Variant::W),
            "I" | "i" => Ok(Variant::I),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TieKind {
    Strong,
    Weak,
}

/// One entry of a node's influence multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceSource {
    pub node: NodeId,
    pub kind: TieKind,
    pub length: u32,
}

/// `lambda = 1 / sum_d count(d) * d^-gamma`, so that `lambda / d^gamma` sums to one over `q != p`.
pub fn normalization_constant(geom: &TorusGeometry, gamma: f64) -> f64 {
    let total: f64 = (1..=geom.max_distance())
        .map(|d| geom.count_at(d) as f64 * (d as f64).powf(-gamma))
        .sum();
    1.0 / total
}

/// Inverse-CDF sampler over the exact weak-tie distance distribution.
#[derive(Debug, Clone)]
pub struct DistanceSampler {
    lambda: f64,
    /// `cumulative[i]` is `P(distance <= i + 1)`.
    cumulative: Vec<f64>,
}

impl DistanceSampler {
    pub fn new(geom: &TorusGeometry, gamma: f64) -> Self {
        let lambda = normalization_constant(geom, gamma);
        let mut acc = 0.0;
        let cumulative = (1..=geom.max_distance())
            .map(|d| {
                acc += lambda * geom.count_at(d) as f64 * (d as f64).powf(-gamma);
                acc
            })
            .collect();
        DistanceSampler { lambda, cumulative }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Probability that a single weak tie has length exactly `d`.
    pub fn distance_pmf(&self, d: u32) -> f64 {
        let i = d as usize;
        match i {
            0 => 0.0,
            1 => self.cumulative.first().copied().unwrap_or(0.0),
            _ if i <= self.cumulative.len() => self.cumulative[i - 1] - self.cumulative[i - 2],
            _ => 0.0,
        }
    }

    pub fn sample_distance<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1) as u32 + 1
    }

    /// Draw order: one `f64` for the distance, then one uniform index into that shell.
    pub fn sample_displacement<R: Rng + ?Sized>(
        &self,
        geom: &TorusGeometry,
        rng: &mut R,
    ) -> (u32, u32) {
        let d = self.sample_distance(rng);
        let shell = geom.shell(d);
        shell[rng.gen_range(0..shell.len())]
    }
}

/// Smallest `r` with `r * r >= m`.
pub fn strong_radius(m: u32) -> u32 {
    let mut r = (m as f64).sqrt() as u32;
    while r * r < m {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= m {
        r -= 1;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub side: u32,
    pub m: u32,
    pub gamma: f64,
    pub variant: Variant,
    pub rng_seed: u64,
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be >= 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        let r = strong_radius(self.m);
        if self.side < 2 * r + 1 {
            return Err(Error::InvalidConfig(format!(
                "L={} too small for m={} (need L >= {})",
                self.side,
                self.m,
                2 * r + 1
            )));
        }
        Ok(())
    }
}

/// A generated graph. Strong ties are implicit: `u ~ v` iff `distance(u, v) <= ceil(sqrt(m))`.
///
/// In variant `W` a weak tie landing inside the strong neighborhood duplicates an
/// existing edge and does not add influence; in variant `I` every tie counts.
#[derive(Debug, Clone)]
pub struct SmallWorldGraph {
    geom: Arc<TorusGeometry>,
    params: GraphParams,
    strong_radius: u32,
    weak: Vec<NodeId>,
    weak_in_start: Vec<u32>,
    weak_in: Vec<NodeId>,
}

impl PartialEq for SmallWorldGraph {
    fn eq(&self, other: &Self) -> bool {
        self.params.side == other.params.side
            && self.params.m == other.params.m
            && self.params.gamma.to_bits() == other.params.gamma.to_bits()
            && self.params.variant == other.params.variant
            && self.params.rng_seed == other.params.rng_seed
            && self.weak == other.weak
    }
}

impl SmallWorldGraph {
    pub fn generate(params: GraphParams) -> Result<Self> {
        params.validate()?;
        let geom = TorusGeometry::shared(params.side)?;
        let sampler = DistanceSampler::new(&geom, params.gamma);
        let mut rng = rng_from_seed(params.rng_seed);
        let weak = sample_weak_ties(&geom, &sampler, params.m, params.variant, &mut rng);
        Ok(Self::assemble(geom, params, weak))
    }

    /// Builds a graph from explicit weak-tie lists (row-major, `m` per node).
    pub fn from_parts(params: GraphParams, weak: Vec<NodeId>) -> Result<Self> {
        params.validate()?;
        let geom = TorusGeometry::shared(params.side)?;
        let n = geom.node_count();
        let m = params.m as usize;
        if weak.len() != n * m {
            return Err(Error::LengthMismatch { expected: n * m, found: weak.len() });
        }
        for (u, ties) in weak.chunks_exact(m).enumerate() {
            for (j, &t) in ties.iter().enumerate() {
                if t as usize >= n {
                    return Err(Error::TargetOutOfRange { id: t as u64, n });
                }
                if t as usize == u {
                    return Err(Error::InvalidConfig(format!("node {u} has a weak self-loop")));
                }
                if params.variant == Variant::W && ties[..j].contains(&t) {
                    return Err(Error::InvalidConfig(format!(
                        "node {u} repeats target {t} in a W graph"
                    )));
                }
            }
        }
        Ok(Self::assemble(geom, params, weak))
    }

    fn assemble(geom: Arc<TorusGeometry>, params: GraphParams, weak: Vec<NodeId>) -> Self {
        let n = geom.node_count();
        let m = params.m as usize;
        let radius = strong_radius(params.m);
        let counts_tie = |owner: usize, target: NodeId| {
            params.variant == Variant::I || geom.distance_ids(owner as NodeId, target) > radius
        };
        let mut indeg = vec![0u32; n + 1];
        for (u, ties) in weak.chunks_exact(m).enumerate() {
            for &t in ties {
                if counts_tie(u, t) {
                    indeg[t as usize + 1] += 1;
                }
            }
        }
        for i in 1..=n {
            indeg[i] += indeg[i - 1];
        }
        let weak_in_start = indeg;
        let mut fill = weak_in_start.clone();
        let mut weak_in = vec![0; weak_in_start[n] as usize];
        for (u, ties) in weak.chunks_exact(m).enumerate() {
            for &t in ties {
                if counts_tie(u, t) {
                    weak_in[fill[t as usize] as usize] = u as NodeId;
                    fill[t as usize] += 1;
                }
            }
        }
        SmallWorldGraph { geom, params, strong_radius: radius, weak, weak_in_start, weak_in }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn shared_geometry(&self) -> Arc<TorusGeometry> {
        Arc::clone(&self.geom)
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn side(&self) -> u32 {
        self.params.side
    }

    pub fn m(&self) -> u32 {
        self.params.m
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn variant(&self) -> Variant {
        self.params.variant
    }

    pub fn rng_seed(&self) -> u64 {
        self.params.rng_seed
    }

    pub fn node_count(&self) -> usize {
        self.geom.node_count()
    }

    pub fn strong_radius(&self) -> u32 {
        self.strong_radius
    }

    pub fn weak_ties(&self, u: NodeId) -> &[NodeId] {
        let m = self.params.m as usize;
        &self.weak[u as usize * m..(u as usize + 1) * m]
    }

    pub fn all_weak_ties(&self) -> &[NodeId] {
        &self.weak
    }

    pub fn is_strong_tie(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.geom.distance_ids(u, v) <= self.strong_radius
    }

    /// Whether the weak tie `owner -> target` adds to `owner`'s influence multiset.
    pub fn weak_tie_counts(&self, owner: NodeId, target: NodeId) -> bool {
        self.params.variant == Variant::I || !self.is_strong_tie(owner, target)
    }

    pub fn strong_neighbors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let c = self.geom.coord(u);
        self.geom
            .ball(self.strong_radius)
            .iter()
            .map(move |&(dx, dy)| self.geom.id(self.geom.offset(c, dx, dy)))
    }

    /// Owners of counting weak ties that point at `v`, with multiplicity.
    pub fn weak_owners_of(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.weak_in[self.weak_in_start[v] as usize..self.weak_in_start[v + 1] as usize]
    }

    /// Nodes whose infection counts toward `u`'s threshold: strong neighbors once each,
    /// then `u`'s own counting weak-tie targets, one entry per tie.
    pub fn influence_sources(&self, u: NodeId) -> Vec<InfluenceSource> {
        let mut out: Vec<InfluenceSource> = Vec::new();
        let c = self.geom.coord(u);
        for &(dx, dy) in self.geom.ball(self.strong_radius) {
            let v = self.geom.id(self.geom.offset(c, dx, dy));
            out.push(InfluenceSource { node: v, kind: TieKind::Strong, length: self.geom.distance_ids(u, v) });
        }
        for &t in self.weak_ties(u) {
            if self.weak_tie_counts(u, t) {
                out.push(InfluenceSource { node: t, kind: TieKind::Weak, length: self.geom.distance_ids(u, t) });
            }
        }
        out
    }

    /// Calls `f` once per influence edge leaving `s`: every node that counts `s` as a source.
    #[inline]
    pub fn for_each_dependent(&self, s: NodeId, mut f: impl FnMut(NodeId)) {
        let c = self.geom.coord(s);
        for &(dx, dy) in self.geom.ball(self.strong_radius) {
            f(self.geom.id(self.geom.offset(c, dx, dy)));
        }
        for &w in self.weak_owners_of(s) {
            f(w);
        }
    }

    pub fn coord(&self, u: NodeId) -> Coord {
        self.geom.coord(u)
    }

    pub fn id(&self, c: Coord) -> NodeId {
        self.geom.id(c)
    }

    pub fn tie_length(&self, owner: NodeId, slot: usize) -> u32 {
        self.geom.distance_ids(owner, self.weak_ties(owner)[slot])
    }
}

fn sample_weak_ties(
    geom: &TorusGeometry,
    sampler: &DistanceSampler,
    m: u32,
    variant: Variant,
    rng: &mut SimRng,
) -> Vec<NodeId> {
    let n = geom.node_count();
    let m = m as usize;
    let mut weak = Vec::with_capacity(n * m);
    for u in 0..n as NodeId {
        let c = geom.coord(u);
        let start = weak.len();
        while weak.len() - start < m {
            let (dx, dy) = sampler.sample_displacement(geom, rng);
            let t = geom.id(geom.offset(c, dx, dy));
            if variant == Variant::W && weak[start..].contains(&t) {
                continue;
            }
            weak.push(t);
        }
    }
    weak
}
