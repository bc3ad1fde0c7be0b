//! Parameter sweeps with replica management, per-record seeds and flat-file outputs.
//!
//! Points are enumerated variant-major, then gamma, then side. Replica `j` of point `i`
//! uses the graph seed `derive_seed(base_seed, [i, j])`.

use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytics::fit_scaling_exponent;
use crate::dag::{build_dag, check_either_or, check_path_time_consistency, EitherOrVerdict};
use crate::diagnostics::{long_tie_block_census, wide_bridge_census};
use crate::engine::{default_max_rounds, rounds_to_full, run_contagion};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{GraphParams, SmallWorldGraph, Variant};
use crate::seeding::derive_seed;
use crate::torus::{Coord, NodeId};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub variants: Vec<Variant>,
    pub sides: Vec<u32>,
    pub m: u32,
    pub k: u32,
    pub gammas: Vec<f64>,
    pub replicas: u32,
    pub base_seed: u64,
    /// Round cap; `None` means `4L`.
    #[serde(default)]
    pub max_rounds: Option<u32>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Build the infection dag and run its checks (either-or only on W).
    #[serde(default)]
    pub dag_checks: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Wide-bridge census around the seed cluster at this delta.
    #[serde(default)]
    pub bridge_delta: Option<f64>,
    /// Long-tie block census at this delta, with the spread check on the run's trace.
    #[serde(default)]
    pub block_delta: Option<f64>,
}

fn default_epsilon() -> f64 {
    crate::dag::DEFAULT_EPSILON
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec { dag_checks: false, epsilon: default_epsilon(), bridge_delta: None, block_delta: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub variant: Variant,
    pub gamma: f64,
    pub side: u32,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.variants.is_empty() || self.sides.is_empty() || self.gammas.is_empty() {
            return bad("variants, sides and gammas must be nonempty".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be >= 1".into());
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.m < self.k {
            return bad(format!("m = {} < k = {}", self.m, self.k));
        }
        if self.max_rounds == Some(0) {
            return bad("max_rounds must be >= 1".into());
        }
        let d = &self.diagnostics;
        if !(d.epsilon > 0.0 && d.epsilon < 0.5) {
            return bad(format!("epsilon {} outside (0, 1/2)", d.epsilon));
        }
        for delta in [d.bridge_delta, d.block_delta].into_iter().flatten() {
            if !(delta > 0.0 && delta < 0.5) {
                return bad(format!("census delta {delta} outside (0, 1/2)"));
            }
        }
        for p in self.points() {
            self.graph_params(&p, 0).validate()?;
            if self.k > p.side {
                return bad(format!("k = {} exceeds side {}", self.k, p.side));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &variant in &self.variants {
            for &gamma in &self.gammas {
                for &side in &self.sides {
                    out.push(SweepPoint { index: out.len(), variant, gamma, side });
                }
            }
        }
        out
    }

    pub fn replica_seed(&self, point: usize, replica: u32) -> u64 {
        derive_seed(self.base_seed, &[point as u64, replica as u64])
    }

    fn graph_params(&self, p: &SweepPoint, seed: u64) -> GraphParams {
        GraphParams { side: p.side, m: self.m, gamma: p.gamma, variant: p.variant, rng_seed: seed }
    }

    pub fn max_rounds_for(&self, side: u32) -> u32 {
        self.max_rounds.unwrap_or_else(|| default_max_rounds(side))
    }
}

/// One replica of one point. `rounds_to_full` is empty exactly when `covered` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub point_index: usize,
    pub variant: Variant,
    pub side: u32,
    pub m: u32,
    pub k: u32,
    pub gamma: f64,
    pub replica: u32,
    pub rng_seed: u64,
    pub covered: bool,
    pub rounds_to_full: Option<u32>,
    pub rounds_elapsed: u32,
    pub coverage_fraction: f64,
    pub wall_time_ms: f64,
    pub dag_ok: Option<bool>,
    pub either_or: Option<String>,
    pub bridge_z1: Option<usize>,
    pub bridge_z2: Option<usize>,
    pub block_violators: Option<usize>,
    pub block_adjacent: Option<bool>,
    pub error: Option<String>,
}

pub const RECORD_COLUMNS: [&str; 20] = [
    "point_index",
    "variant",
    "side",
    "m",
    "k",
    "gamma",
    "replica",
    "rng_seed",
    "covered",
    "rounds_to_full",
    "rounds_elapsed",
    "coverage_fraction",
    "wall_time_ms",
    "dag_ok",
    "either_or",
    "bridge_z1",
    "bridge_z2",
    "block_violators",
    "block_adjacent",
    "error",
];

impl ExperimentRecord {
    /// Copy with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        ExperimentRecord { wall_time_ms: 0.0, ..self.clone() }
    }
}

fn run_replica(spec: &ExperimentSpec, p: &SweepPoint, replica: u32) -> ExperimentRecord {
    let seed = spec.replica_seed(p.index, replica);
    let mut rec = ExperimentRecord {
        point_index: p.index,
        variant: p.variant,
        side: p.side,
        m: spec.m,
        k: spec.k,
        gamma: p.gamma,
        replica,
        rng_seed: seed,
        covered: false,
        rounds_to_full: None,
        rounds_elapsed: 0,
        coverage_fraction: 0.0,
        wall_time_ms: 0.0,
        dag_ok: None,
        either_or: None,
        bridge_z1: None,
        bridge_z2: None,
        block_violators: None,
        block_adjacent: None,
        error: None,
    };
    let start = Instant::now();
    if let Err(e) = fill_replica(spec, p, seed, &mut rec) {
        rec.error = Some(e.to_string());
    }
    rec.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    rec
}

fn fill_replica(spec: &ExperimentSpec, p: &SweepPoint, seed: u64, rec: &mut ExperimentRecord) -> Result<()> {
    let graph = SmallWorldGraph::generate(spec.graph_params(p, seed))?;
    let geom = graph.geometry();
    let seeds: Vec<NodeId> =
        geom.canonical_seed_cluster(Coord::new(0, 0), spec.k)?.into_iter().map(|c| geom.id(c)).collect();
    let trace = run_contagion(&graph, spec.k, &seeds, spec.max_rounds_for(p.side))?;
    rec.covered = trace.covered;
    rec.rounds_to_full = rounds_to_full(&trace);
    rec.rounds_elapsed = trace.rounds_elapsed;
    rec.coverage_fraction = trace.coverage_fraction();

    let d = &spec.diagnostics;
    if d.dag_checks {
        let dag = build_dag(&graph, &trace, spec.k, d.epsilon)?;
        rec.dag_ok = Some(dag.validate(&graph).is_ok() && check_path_time_consistency(&dag).is_ok());
        if p.variant == Variant::W {
            let b: Vec<NodeId> = geom
                .canonical_seed_cluster(Coord::new(p.side / 2, p.side / 2), spec.k)?
                .into_iter()
                .map(|c| geom.id(c))
                .collect();
            if b.iter().all(|&v| trace.infected_round[v as usize].is_some()) {
                let rep = check_either_or(&graph, &dag, &seeds, &b, spec.k)?;
                rec.either_or = Some(
                    match rep.verdict {
                        EitherOrVerdict::Intersects => "intersects",
                        EitherOrVerdict::HeavySubset { .. } => "heavy_subset",
                        EitherOrVerdict::Violation { .. } => "violation",
                    }
                    .to_string(),
                );
            }
        }
    }
    if let Some(delta) = d.bridge_delta {
        let z = wide_bridge_census(&graph, Coord::new(0, 0), delta, spec.k)?;
        rec.bridge_z1 = Some(z.z1);
        rec.bridge_z2 = Some(z.z2);
    }
    if let Some(delta) = d.block_delta {
        let rep = long_tie_block_census(&graph, delta, spec.k, Some(&trace))?;
        rec.block_violators = Some(rep.violating_nodes.len());
        rec.block_adjacent = rep.adjacent_spread;
    }
    Ok(())
}

/// Runs every replica of every point. Failures are recorded per record; the sweep continues.
pub fn run_sweep(spec: &ExperimentSpec, exec: Execution) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    let points = spec.points();
    let r = spec.replicas as usize;
    Ok(exec.map_indexed(points.len() * r, |i| run_replica(spec, &points[i / r], (i % r) as u32)))
}

pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != RECORD_COLUMNS {
        return Err(Error::Format(format!("record header mismatch: {header:?}")));
    }
    let mut out = Vec::new();
    for row in rd.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point_index: usize,
    pub variant: Variant,
    pub side: u32,
    pub m: u32,
    pub k: u32,
    pub gamma: f64,
    pub replicas: usize,
    pub covered_count: usize,
    pub coverage_rate: f64,
    /// Median of `rounds_to_full` with not-covered runs as `+inf`; empty if the median is infinite.
    pub median_rounds: Option<f64>,
    /// Mean over covered replicas only.
    pub mean_rounds: Option<f64>,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub variant: Variant,
    pub gamma: f64,
    pub sides: Vec<u32>,
    pub exponent: f64,
    pub stderr: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub points: Vec<PointSummary>,
    pub fits: Vec<FitSummary>,
}

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "point_index",
    "variant",
    "side",
    "m",
    "k",
    "gamma",
    "replicas",
    "covered_count",
    "coverage_rate",
    "median_rounds",
    "mean_rounds",
    "errors",
];

/// Median with `None` standing for `+inf`.
pub fn median_with_infinity(values: &[Option<u32>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.map_or(f64::INFINITY, f64::from)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    med.is_finite().then_some(med)
}

pub fn summarize(records: &[ExperimentRecord]) -> Summary {
    let mut indices: Vec<usize> = records.iter().map(|r| r.point_index).collect();
    indices.sort_unstable();
    indices.dedup();
    let points: Vec<PointSummary> = indices
        .into_iter()
        .map(|idx| {
            let rs: Vec<&ExperimentRecord> = records.iter().filter(|r| r.point_index == idx).collect();
            let first = rs[0];
            let covered: Vec<u32> = rs.iter().filter_map(|r| r.rounds_to_full).collect();
            let covered_count = rs.iter().filter(|r| r.covered).count();
            PointSummary {
                point_index: idx,
                variant: first.variant,
                side: first.side,
                m: first.m,
                k: first.k,
                gamma: first.gamma,
                replicas: rs.len(),
                covered_count,
                coverage_rate: covered_count as f64 / rs.len() as f64,
                median_rounds: median_with_infinity(&rs.iter().map(|r| r.rounds_to_full).collect::<Vec<_>>()),
                mean_rounds: (!covered.is_empty())
                    .then(|| covered.iter().map(|&x| x as f64).sum::<f64>() / covered.len() as f64),
                errors: rs.iter().filter(|r| r.error.is_some()).count(),
            }
        })
        .collect();

    let mut groups: Vec<(Variant, f64)> = Vec::new();
    for p in &points {
        if !groups.iter().any(|g| g.0 == p.variant && g.1.to_bits() == p.gamma.to_bits()) {
            groups.push((p.variant, p.gamma));
        }
    }
    let fits = groups
        .into_iter()
        .filter_map(|(variant, gamma)| {
            let mut members: Vec<&PointSummary> =
                points.iter().filter(|p| p.variant == variant && p.gamma.to_bits() == gamma.to_bits()).collect();
            members.sort_by_key(|p| p.side);
            let samples: Option<Vec<(f64, f64)>> =
                members.iter().map(|p| p.median_rounds.map(|t| ((p.side as f64).powi(2), t))).collect();
            let fit = fit_scaling_exponent(&samples?).ok()?;
            Some(FitSummary {
                variant,
                gamma,
                sides: members.iter().map(|p| p.side).collect(),
                exponent: fit.exponent,
                stderr: fit.stderr,
                r_squared: fit.r_squared,
            })
        })
        .collect();
    Summary { points, fits }
}

impl Summary {
    pub fn write_points_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(SUMMARY_COLUMNS)?;
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
