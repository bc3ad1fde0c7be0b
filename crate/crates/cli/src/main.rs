use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use kcontagion::analytics::{classify_regime, fit_scaling_exponent, Regime};
use kcontagion::dag::{build_dag, check_either_or, check_path_time_consistency, DEFAULT_EPSILON};
use kcontagion::diagnostics::{
    heavy_connected_subset_search, long_tie_block_census, recursive_spreading_trial, wide_bridge_census, TrialConfig,
};
use kcontagion::engine::{default_max_rounds, run_contagion, write_trace_csv};
use kcontagion::exec::Execution;
use kcontagion::experiment::{read_records_csv, run_sweep, summarize, write_records_csv, ExperimentSpec};
use kcontagion::format::{deserialize, serialize, write_edge_list};
use kcontagion::graph::{GraphParams, SmallWorldGraph, Variant};
use kcontagion::torus::{Coord, NodeId};

const OUTPUT_DIR_ENV: &str = "KCONTAGION_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "kcontagion", version, about = "k-complex contagion on Kleinberg small-world tori")]
struct Cli {
    /// Worker threads for replica/trial parallelism (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Run independent tasks on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph and write it in binary form.
    Generate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write a text edge list ("owner target" per line).
        #[arg(long)]
        edge_list: Option<PathBuf>,
    },
    /// Run one contagion from a k-seed cluster and print its summary.
    Run {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 2)]
        k: u32,
        /// Anchor of the seed cluster as "x,y".
        #[arg(long, default_value = "0,0", value_parser = parse_coord)]
        anchor: Coord,
        #[arg(long)]
        max_rounds: Option<u32>,
        /// Per-node infection rounds as CSV.
        #[arg(long)]
        trace_csv: Option<PathBuf>,
    },
    /// Run a parameter sweep from a JSON config; flags override its keys.
    Sweep(SweepArgs),
    /// Structural checks on a single graph.
    #[command(subcommand)]
    Diagnose(Diagnose),
    /// Monte Carlo estimate of the new-seed-in-B probability.
    Trial {
        #[arg(long)]
        side: u32,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value = "W")]
        variant: Variant,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 200)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Regime table over a gamma grid as CSV.
    Predict {
        #[arg(long, value_delimiter = ',', default_value = "W,I")]
        variants: Vec<Variant>,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        ks: Vec<u32>,
        #[arg(long, default_value_t = 0.0)]
        gamma_min: f64,
        #[arg(long, default_value_t = 4.0)]
        gamma_max: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
    },
    /// Fit the log-log scaling exponent of rounds against n.
    Fit {
        /// CSV with columns `n,rounds`.
        #[arg(long, conflicts_with = "records")]
        samples: Option<PathBuf>,
        /// Sweep records CSV; fits medians per (variant, gamma).
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long)]
    side: u32,
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value = "W")]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ParamArgs {
    fn params(&self) -> GraphParams {
        GraphParams { side: self.side, m: self.m, gamma: self.gamma, variant: self.variant, rng_seed: self.seed }
    }
}

/// Either a graph file or generation parameters.
#[derive(Args, Clone)]
struct GraphArgs {
    #[arg(long, conflicts_with_all = ["side", "gamma"])]
    graph: Option<PathBuf>,
    #[arg(long)]
    side: Option<u32>,
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value = "W")]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GraphArgs {
    fn load(&self) -> Result<SmallWorldGraph> {
        if let Some(path) = &self.graph {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(deserialize(&bytes)?);
        }
        let (Some(side), Some(gamma)) = (self.side, self.gamma) else {
            bail!("either --graph or both --side and --gamma are required");
        };
        Ok(SmallWorldGraph::generate(GraphParams {
            side,
            m: self.m,
            gamma,
            variant: self.variant,
            rng_seed: self.seed,
        })?)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
    #[arg(long, value_delimiter = ',')]
    sides: Option<Vec<u32>>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long)]
    replicas: Option<u32>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    max_rounds: Option<u32>,
    #[arg(long)]
    dag_checks: bool,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    bridge_delta: Option<f64>,
    #[arg(long)]
    block_delta: Option<f64>,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Diagnose {
    /// Build the infection dag, run its checks, optionally export it.
    Dag {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Wide-bridge, long-tie block, or heavy-subset census.
    Census {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_enum)]
        kind: CensusKind,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 0.15)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value = "0,0", value_parser = parse_coord)]
        center: Coord,
    },
    /// Either-or check between the seed cluster and a second k-cluster.
    Eitheror {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Anchor of the second cluster; defaults to the torus center.
        #[arg(long, value_parser = parse_coord)]
        target: Option<Coord>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CensusKind {
    Bridge,
    Block,
    Heavy,
}

fn parse_coord(s: &str) -> Result<Coord, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected \"x,y\", got {s:?}"))?;
    let x = x.trim().parse().map_err(|e| format!("{e}"))?;
    let y = y.trim().parse().map_err(|e| format!("{e}"))?;
    Ok(Coord::new(x, y))
}

fn cluster(graph: &SmallWorldGraph, anchor: Coord, k: u32) -> Result<Vec<NodeId>> {
    let geom = graph.geometry();
    Ok(geom.canonical_seed_cluster(geom.wrap(anchor.x as i64, anchor.y as i64), k)?.into_iter().map(|c| geom.id(c)).collect())
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    #[cfg(feature = "parallel")]
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match cli.command {
        Command::Generate { params, out, edge_list } => {
            let graph = SmallWorldGraph::generate(params.params())?;
            fs::write(&out, serialize(&graph)).with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = edge_list {
                let mut w = create(&path)?;
                write_edge_list(&graph, &mut w)?;
                w.flush()?;
            }
            print_json(&json!({ "params": graph.params(), "out": out }))?;
        }
        Command::Run { graph, k, anchor, max_rounds, trace_csv } => {
            let graph = graph.load()?;
            let seeds = cluster(&graph, anchor, k)?;
            let trace = run_contagion(&graph, k, &seeds, max_rounds.unwrap_or(default_max_rounds(graph.side())))?;
            if let Some(path) = trace_csv {
                write_trace_csv(&trace, graph.geometry(), create(&path)?)?;
            }
            print_json(&json!({
                "params": graph.params(),
                "k": k,
                "covered": trace.covered,
                "rounds_elapsed": trace.rounds_elapsed,
                "coverage_fraction": trace.coverage_fraction(),
                "frontier_sizes": trace.frontier_sizes,
            }))?;
        }
        Command::Sweep(args) => return sweep(args, exec),
        Command::Diagnose(d) => diagnose(d)?,
        Command::Trial { side, m, gamma, variant, k, delta, trials, seed } => {
            let cfg = TrialConfig { side, m, gamma, variant, k, delta, trials, rng_seed: seed };
            let est = recursive_spreading_trial(&cfg, exec)?;
            print_json(&serde_json::to_value(est)?)?;
        }
        Command::Predict { variants, ks, gamma_min, gamma_max, step } => {
            if !(step > 0.0) || gamma_max < gamma_min || gamma_min < 0.0 {
                bail!("need 0 <= gamma_min <= gamma_max and step > 0");
            }
            let steps = ((gamma_max - gamma_min) / step + 1e-9).floor() as u64;
            let mut out = io::stdout().lock();
            writeln!(out, "variant,k,gamma,regime,justification")?;
            for &variant in &variants {
                for &k in &ks {
                    for i in 0..=steps {
                        let gamma = gamma_min + i as f64 * step;
                        let v = classify_regime(variant, gamma, k)?;
                        let regime = match v.regime {
                            Regime::Fast => "fast",
                            Regime::Slow => "slow",
                            Regime::Unknown => "unknown",
                        };
                        writeln!(out, "{variant},{k},{gamma:.6},{regime},\"{}\"", v.justification)?;
                    }
                }
            }
        }
        Command::Fit { samples, records } => fit(samples, records)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: SweepArgs, exec: Execution) -> Result<ExitCode> {
    let mut spec: ExperimentSpec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentSpec {
            schema_version: kcontagion::experiment::SCHEMA_VERSION,
            variants: vec![Variant::W],
            sides: vec![],
            m: 2,
            k: 2,
            gammas: vec![],
            replicas: 10,
            base_seed: 0,
            max_rounds: None,
            diagnostics: Default::default(),
            output_dir: None,
        },
    };
    if let Some(v) = args.variants {
        spec.variants = v;
    }
    if let Some(v) = args.sides {
        spec.sides = v;
    }
    if let Some(v) = args.m {
        spec.m = v;
    }
    if let Some(v) = args.k {
        spec.k = v;
    }
    if let Some(v) = args.gammas {
        spec.gammas = v;
    }
    if let Some(v) = args.replicas {
        spec.replicas = v;
    }
    if let Some(v) = args.base_seed {
        spec.base_seed = v;
    }
    if args.max_rounds.is_some() {
        spec.max_rounds = args.max_rounds;
    }
    if args.dag_checks {
        spec.diagnostics.dag_checks = true;
    }
    if let Some(v) = args.epsilon {
        spec.diagnostics.epsilon = v;
    }
    if args.bridge_delta.is_some() {
        spec.diagnostics.bridge_delta = args.bridge_delta;
    }
    if args.block_delta.is_some() {
        spec.diagnostics.block_delta = args.block_delta;
    }
    // flag (or env var) wins over the config file, which wins over the working directory
    let dir = args
        .output_dir
        .or_else(|| spec.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    spec.validate()?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let records = run_sweep(&spec, exec)?;
    let summary = summarize(&records);
    let mut written: Vec<String> = Vec::new();
    let outcome = (|| -> Result<()> {
        fs::write(dir.join("spec.json"), serde_json::to_string_pretty(&spec)?)?;
        written.push("spec.json".into());
        let mut w = create(&dir.join("records.csv"))?;
        write_records_csv(&records, &mut w)?;
        w.flush()?;
        written.push("records.csv".into());
        summary.write_points_csv(create(&dir.join("summary.csv"))?)?;
        written.push("summary.csv".into());
        fs::write(dir.join("summary.json"), summary.to_json()?)?;
        written.push("summary.json".into());
        Ok(())
    })();
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let manifest = json!({
        "files": written,
        "complete": outcome.is_ok(),
        "records": records.len(),
        "failed_records": failed,
        "io_error": outcome.as_ref().err().map(|e| format!("{e:#}")),
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    outcome?;
    for f in &summary.fits {
        eprintln!("fit {} gamma={}: exponent {:.4} (se {:.4}, r2 {:.3})", f.variant, f.gamma, f.exponent, f.stderr, f.r_squared);
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn diagnose(d: Diagnose) -> Result<()> {
    match d {
        Diagnose::Dag { graph, k, epsilon, csv } => {
            let graph = graph.load()?;
            let seeds = cluster(&graph, Coord::new(0, 0), k)?;
            let trace = run_contagion(&graph, k, &seeds, default_max_rounds(graph.side()))?;
            let dag = build_dag(&graph, &trace, k, epsilon)?;
            if let Some(path) = csv {
                dag.write_csv(create(&path)?)?;
            }
            let valid = dag.validate(&graph);
            let paths = check_path_time_consistency(&dag);
            print_json(&json!({
                "params": graph.params(),
                "k": k,
                "epsilon": epsilon,
                "long_threshold": dag.long_threshold(),
                "edges": dag.edge_count(),
                "valid": valid.is_ok(),
                "valid_error": valid.err().map(|e| e.to_string()),
                "path_consistent": paths.is_ok(),
                "path_violation": paths.err(),
            }))?;
        }
        Diagnose::Census { graph, kind, k, delta, epsilon, center } => {
            let graph = graph.load()?;
            let value = match kind {
                CensusKind::Bridge => {
                    let z = wide_bridge_census(&graph, center, delta, k)?;
                    json!({ "center": center, "delta": delta, "k": k, "z1": z.z1, "z2": z.z2 })
                }
                CensusKind::Block => {
                    let seeds = cluster(&graph, Coord::new(0, 0), k)?;
                    let trace = run_contagion(&graph, k, &seeds, default_max_rounds(graph.side()))?;
                    serde_json::to_value(long_tie_block_census(&graph, delta, k, Some(&trace))?)?
                }
                CensusKind::Heavy => {
                    json!({ "k": k, "epsilon": epsilon, "witness": heavy_connected_subset_search(&graph, k, epsilon)? })
                }
            };
            print_json(&json!({ "params": graph.params(), "census": value }))?;
        }
        Diagnose::Eitheror { graph, k, epsilon, target } => {
            let graph = graph.load()?;
            let a = cluster(&graph, Coord::new(0, 0), k)?;
            let half = graph.side() / 2;
            let b = cluster(&graph, target.unwrap_or(Coord::new(half, half)), k)?;
            let trace = run_contagion(&graph, k, &a, default_max_rounds(graph.side()))?;
            let dag = build_dag(&graph, &trace, k, epsilon)?;
            let report = check_either_or(&graph, &dag, &a, &b, k)?;
            print_json(&json!({ "params": graph.params(), "k": k, "epsilon": epsilon, "report": report }))?;
        }
    }
    Ok(())
}

fn fit(samples: Option<PathBuf>, records: Option<PathBuf>) -> Result<()> {
    match (samples, records) {
        (Some(path), None) => {
            let mut rd = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
            let rows: Vec<(f64, f64)> = rd.deserialize().collect::<Result<_, _>>()?;
            let f = fit_scaling_exponent(&rows)?;
            print_json(&serde_json::to_value(f)?)?;
        }
        (None, Some(path)) => {
            let recs = read_records_csv(File::open(&path).with_context(|| format!("reading {}", path.display()))?)?;
            print_json(&serde_json::to_value(summarize(&recs).fits)?)?;
        }
        _ => bail!("pass exactly one of --samples or --records"),
    }
    Ok(())
}
