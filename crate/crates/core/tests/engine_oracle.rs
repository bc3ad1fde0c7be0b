mod common;

use kcontagion::engine::{detect_new_seed_cluster, run_contagion, rounds_to_full};
use kcontagion::graph::{GraphParams, SmallWorldGraph, Variant};
use kcontagion::torus::{Coord, Square, TorusGeometry};
use proptest::prelude::*;

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::W), Just(Variant::I)]
}

fn graph(side: u32, m: u32, gamma: f64, variant: Variant, seed: u64) -> SmallWorldGraph {
    SmallWorldGraph::generate(GraphParams { side, m, gamma, variant, rng_seed: seed }).unwrap()
}

fn seed_cluster(g: &SmallWorldGraph, anchor: Coord, k: u32) -> Vec<u32> {
    let geom = g.geometry();
    geom.canonical_seed_cluster(anchor, k).unwrap().into_iter().map(|c| geom.id(c)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_naive_rescan(
        side in 6u32..=12,
        m in 2u32..=4,
        k in 1u32..=3,
        v in variant(),
        gamma in prop::sample::select(vec![0.0, 1.0, 2.0, 2.5, 3.5]),
        seed in any::<u64>(),
        ax in 0u32..12,
        ay in 0u32..12,
    ) {
        let g = graph(side, m, gamma, v, seed);
        let seeds = seed_cluster(&g, Coord::new(ax % side, ay % side), k);
        let t = run_contagion(&g, k, &seeds, 4 * side).unwrap();
        prop_assert_eq!(&t.infected_round, &common::naive_rescan(&g, k, &seeds, 4 * side));
    }

    #[test]
    fn frontier_accounting(side in 6u32..=12, m in 2u32..=3, k in 1u32..=2, v in variant(), seed in any::<u64>()) {
        let g = graph(side, m, 2.5, v, seed);
        let seeds = seed_cluster(&g, Coord::new(0, 0), k);
        let t = run_contagion(&g, k, &seeds, 4 * side).unwrap();
        prop_assert_eq!(t.frontier_sizes.len() as u32, t.rounds_elapsed);
        prop_assert_eq!(t.frontier_sizes.iter().sum::<usize>() + seeds.len(), t.infected_count());
        prop_assert!(t.frontier_sizes.iter().all(|&f| f > 0));
        prop_assert_eq!(t.covered, t.infected_count() == g.node_count());
        for (r, &size) in t.frontier_sizes.iter().enumerate() {
            let count = t.infected_round.iter().filter(|&&x| x == Some(r as u32 + 1)).count();
            prop_assert_eq!(count, size);
        }
    }

    #[test]
    fn more_seeds_never_slow_anything(side in 6u32..=10, seed in any::<u64>(), extra in 0u32..100) {
        let g = graph(side, 2, 2.5, Variant::W, seed);
        let base = seed_cluster(&g, Coord::new(0, 0), 2);
        let mut more = base.clone();
        more.push(extra % (side * side));
        let a = run_contagion(&g, 2, &base, 4 * side).unwrap();
        let b = run_contagion(&g, 2, &more, 4 * side).unwrap();
        for (ra, rb) in a.infected_round.iter().zip(&b.infected_round) {
            if let Some(ra) = ra {
                prop_assert!(rb.is_some_and(|rb| rb <= *ra));
            }
        }
    }

    #[test]
    fn k1_matches_bfs_eccentricity(side in 6u32..=12, m in 1u32..=4, v in variant(), seed in any::<u64>()) {
        let g = graph(side, m, 2.0, v, seed);
        let seeds = vec![0u32];
        let t = run_contagion(&g, 1, &seeds, 10 * side).unwrap();
        prop_assert_eq!(rounds_to_full(&t), common::reverse_bfs_eccentricity(&g, &seeds));
    }
}

#[test]
fn k_cluster_grid_only_spread_on_pure_torus_like_graph() {
    // gamma large: almost all weak ties are short; coverage still happens via the grid
    let g = graph(10, 2, 8.0, Variant::W, 1);
    let seeds = seed_cluster(&g, Coord::new(3, 3), 2);
    let t = run_contagion(&g, 2, &seeds, 40).unwrap();
    assert!(t.covered);
}

#[test]
fn single_seed_with_k2_stays_put_on_grid() {
    // a lone seed can never give any node two infected sources
    let g = graph(8, 2, 8.0, Variant::W, 3);
    let t = run_contagion(&g, 2, &[0], 20).unwrap();
    assert_eq!(t.infected_count(), 1);
    assert_eq!(t.rounds_elapsed, 0);
    assert!(!t.covered);
}

#[test]
fn detection_respects_region_and_deadline() {
    let geom = TorusGeometry::new(8).unwrap();
    let g = graph(8, 2, 2.5, Variant::W, 9);
    let seeds = seed_cluster(&g, Coord::new(0, 0), 2);
    let t = run_contagion(&g, 2, &seeds, 32).unwrap();
    let region = Square::new(Coord::new(0, 0), 2);
    let (cells, r) = detect_new_seed_cluster(&t, &geom, &region, 2, 0).unwrap();
    assert_eq!(r, 0);
    assert_eq!(cells.len(), 2);
    let whole = Square::new(Coord::new(0, 0), 8);
    let (_, r) = detect_new_seed_cluster(&t, &geom, &whole, 2, 32).unwrap();
    assert_eq!(r, 0);
}
