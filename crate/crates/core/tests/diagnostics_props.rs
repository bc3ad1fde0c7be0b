mod common;

use kcontagion::dag::{build_dag, check_either_or, long_tie_threshold, EitherOrVerdict};
use kcontagion::diagnostics::{
    disk_radius, heavy_connected_subset_search, long_tie_block_census, mean_wide_bridge_census,
    recursive_spreading_trial, wide_bridge_census, BridgeCounts, TrialConfig,
};
use kcontagion::engine::run_contagion;
use kcontagion::exec::Execution;
use kcontagion::graph::{GraphParams, SmallWorldGraph, Variant};
use kcontagion::torus::Coord;
use proptest::prelude::*;

fn graph(side: u32, m: u32, gamma: f64, variant: Variant, seed: u64) -> SmallWorldGraph {
    SmallWorldGraph::generate(GraphParams { side, m, gamma, variant, rng_seed: seed }).unwrap()
}

fn naive_census(g: &SmallWorldGraph, center: Coord, delta: f64, k: u32) -> BridgeCounts {
    let side = g.side();
    let n = side * side;
    let c = center.y * side + center.x;
    let r = disk_radius(n as usize, delta);
    let mut out = BridgeCounts { z1: 0, z2: 0 };
    for u in 0..n {
        let into_d = g.weak_ties(u).iter().filter(|&&t| common::torus_distance(side, t, c) <= r).count();
        if into_d >= k as usize {
            let d = common::torus_distance(side, u, c);
            if d <= 2 * r {
                out.z2 += 1;
            } else if d <= side {
                out.z1 += 1;
            }
        }
    }
    out
}

fn short_ties(side: u32) -> Vec<u32> {
    let n = side * side;
    (0..n).flat_map(|u| [(u + 1) % n, (u + side) % n]).collect()
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::W), Just(Variant::I)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bridge_census_matches_scan(side in 6u32..=32, m in 2u32..=4, k in 1u32..=3, v in variant(), gamma in 0.0f64..2.0,
                                  delta in 0.05f64..0.45, seed in any::<u64>(), x in 0u32..32, y in 0u32..32) {
        let params = GraphParams { side, m, gamma, variant: v, rng_seed: seed };
        prop_assume!(params.validate().is_ok());
        let g = SmallWorldGraph::generate(params).unwrap();
        let c = Coord::new(x % side, y % side);
        prop_assert_eq!(wide_bridge_census(&g, c, delta, k).unwrap(), naive_census(&g, c, delta, k));
    }

    #[test]
    fn spread_stays_block_local_without_violators(side in 16u32..=32, gamma in 4.0f64..9.0, seed in any::<u64>()) {
        let g = graph(side, 2, gamma, Variant::W, seed);
        let seeds = [0u32, 1];
        let t = run_contagion(&g, 2, &seeds, 4 * side).unwrap();
        let rep = long_tie_block_census(&g, 0.25, 2, Some(&t)).unwrap();
        if !rep.any {
            prop_assert_eq!(rep.adjacent_spread, Some(true), "jump at {:?}", rep.first_jump);
        }
    }

    #[test]
    fn heavy_search_matches_brute_force(gamma in 1.0f64..3.0, seed in any::<u64>()) {
        let g = graph(8, 2, gamma, Variant::W, seed);
        let n = g.node_count() as u32;
        let thr = long_tie_threshold(n as usize, 0.1);
        let mut exists = false;
        'outer: for a in 0..n {
            for b in a..n {
                for c in b..n {
                    let mut set = vec![a, b, c];
                    set.dedup();
                    if common::naive_long_ties(&g, &set, thr) >= 3 && common::naive_connected(&g, &set) {
                        exists = true;
                        break 'outer;
                    }
                }
            }
        }
        let found = heavy_connected_subset_search(&g, 2, 0.1).unwrap();
        prop_assert_eq!(found.is_some(), exists);
        if let Some(w) = found {
            let ids: Vec<u32> = w.nodes.iter().map(|&c| g.id(c)).collect();
            prop_assert!(ids.len() <= 3);
            prop_assert!(common::naive_connected(&g, &ids));
            prop_assert_eq!(common::naive_long_ties(&g, &ids, thr), w.long_ties);
            prop_assert!(w.long_ties >= 3);
        }
    }

    #[test]
    fn no_heavy_subset_forces_intersection(side in 12u32..=20, gamma in prop::sample::select(vec![2.8, 3.2]), seed in any::<u64>()) {
        let g = graph(side, 2, gamma, Variant::W, seed);
        prop_assume!(heavy_connected_subset_search(&g, 2, 0.1).unwrap().is_none());
        let geom = g.geometry();
        let a: Vec<u32> = geom.canonical_seed_cluster(Coord::new(0, 0), 2).unwrap().into_iter().map(|c| geom.id(c)).collect();
        let b: Vec<u32> = geom.canonical_seed_cluster(Coord::new(side / 2, side / 2), 2).unwrap().into_iter().map(|c| geom.id(c)).collect();
        let t = run_contagion(&g, 2, &a, 4 * side).unwrap();
        prop_assume!(b.iter().all(|&v| t.infected_round[v as usize].is_some()));
        let dag = build_dag(&g, &t, 2, 0.1).unwrap();
        prop_assert_eq!(check_either_or(&g, &dag, &a, &b, 2).unwrap().verdict, EitherOrVerdict::Intersects);
    }
}

#[test]
fn census_fixtures() {
    let side = 32;
    let params = GraphParams { side, m: 2, gamma: 1.0, variant: Variant::W, rng_seed: 0 };
    let g = SmallWorldGraph::from_parts(params, short_ties(side)).unwrap();
    // ceil(1024^0.2) = 4; grid-neighbor ties into D only come from D's rim, which lies in the disk
    let c = Coord::new(16, 16);
    let base = wide_bridge_census(&g, c, 0.2, 2).unwrap();
    assert_eq!(base.z1, 0);
    // one annulus node with both ties into D
    let mut ties = short_ties(side);
    let far = 16 * side; // (0, 16), at distance 16 > 2r = 8 from the center
    ties[2 * far as usize] = 16 * side + 16;
    ties[2 * far as usize + 1] = 16 * side + 17;
    let planted = SmallWorldGraph::from_parts(params, ties).unwrap();
    let z = wide_bridge_census(&planted, c, 0.2, 2).unwrap();
    assert_eq!(z.z1, 1);
    assert_eq!(z.z2, base.z2);
    assert_eq!(z, naive_census(&planted, c, 0.2, 2));
}

#[test]
fn zero_census_when_no_node_has_two_ties_into_d() {
    let side = 16;
    let n = side * side;
    // a node's two targets are 8 apart, so they never share a disk of radius 2
    let ties: Vec<u32> = (0..n)
        .flat_map(|u| {
            let (x, y) = (u % side, u / side);
            [((y + 8) % side) * side + (x + 8) % side, y * side + (x + 8) % side]
        })
        .collect();
    let g = SmallWorldGraph::from_parts(GraphParams { side, m: 2, gamma: 1.0, variant: Variant::W, rng_seed: 0 }, ties)
        .unwrap();
    assert_eq!(disk_radius(256, 0.1), 2);
    let z = wide_bridge_census(&g, Coord::new(0, 0), 0.1, 2).unwrap();
    assert_eq!(z, BridgeCounts { z1: 0, z2: 0 });
}

#[test]
fn example_l64_matches_scan() {
    let g = graph(64, 2, 1.0, Variant::W, 42);
    for c in [Coord::new(0, 0), Coord::new(31, 7), Coord::new(63, 63)] {
        assert_eq!(wide_bridge_census(&g, c, 0.2, 2).unwrap(), naive_census(&g, c, 0.2, 2));
    }
    let mean = mean_wide_bridge_census(&g, 0.2, 2).unwrap();
    assert_eq!(mean.radius, 6); // 4096^0.2 = 5.28
}

#[test]
fn planted_long_tie_owner_is_listed() {
    let side = 32;
    let mut ties = short_ties(side);
    // node 5 at (5, 0): two ties of length 32 > 1024^0.25 = 5.66
    ties[10] = 16 * side + 21;
    ties[11] = 16 * side + 20;
    let g = SmallWorldGraph::from_parts(GraphParams { side, m: 2, gamma: 3.0, variant: Variant::W, rng_seed: 0 }, ties)
        .unwrap();
    let rep = long_tie_block_census(&g, 0.25, 2, None).unwrap();
    assert!(rep.any);
    assert_eq!(rep.violating_nodes, vec![Coord::new(5, 0)]);
    assert_eq!(rep.adjacent_spread, None);
}

#[test]
fn large_gamma_usually_has_no_violators() {
    let hits = (0..50u64)
        .filter(|&s| long_tie_block_census(&graph(64, 2, 8.0, Variant::W, s), 0.25, 2, None).unwrap().any)
        .count();
    println!("gamma=8, L=64: violators present in {hits}/50 graphs");
    assert!(hits < 50);
}

#[test]
fn heavy_search_fixtures() {
    let side = 20;
    let params = GraphParams { side, m: 2, gamma: 3.0, variant: Variant::W, rng_seed: 0 };
    let g = SmallWorldGraph::from_parts(params, short_ties(side)).unwrap();
    assert!(heavy_connected_subset_search(&g, 2, 0.1).unwrap().is_none());
    assert!(heavy_connected_subset_search(&g, 3, 0.1).unwrap().is_none());

    // nodes 0 and 1 own long ties: 2 + 1 = 3 long ties on a connected pair
    let mut ties = short_ties(side);
    ties[0] = 10 * side + 10;
    ties[1] = 10 * side + 11;
    ties[2] = 10 * side + 12;
    let g = SmallWorldGraph::from_parts(params, ties).unwrap();
    let w = heavy_connected_subset_search(&g, 2, 0.1).unwrap().expect("planted witness");
    assert!(w.long_ties >= 3);
    assert!(w.nodes.contains(&Coord::new(0, 0)) && w.nodes.contains(&Coord::new(1, 0)));
    // k = 3 needs 6 long ties on at most 7 nodes
    assert!(heavy_connected_subset_search(&g, 3, 0.1).unwrap().is_none());
}

#[test]
fn trial_rates_separate_fast_from_slow() {
    let base = TrialConfig {
        side: 64,
        m: 2,
        gamma: 2.3,
        variant: Variant::W,
        k: 2,
        delta: 0.17,
        trials: 60,
        rng_seed: 5,
    };
    let fast = recursive_spreading_trial(&base, Execution::default()).unwrap();
    let slow = recursive_spreading_trial(&TrialConfig { gamma: 3.5, ..base.clone() }, Execution::default()).unwrap();
    assert!(fast.success_rate > slow.success_rate + 0.05, "{} vs {}", fast.success_rate, slow.success_rate);
    let seq = recursive_spreading_trial(&base, Execution::Sequential).unwrap();
    assert_eq!(seq, fast);
}

#[test]
fn trial_rejects_overlapping_subsquares() {
    let cfg = TrialConfig { side: 32, m: 2, gamma: 2.3, variant: Variant::W, k: 2, delta: 0.1, trials: 1, rng_seed: 0 };
    assert!(recursive_spreading_trial(&cfg, Execution::Sequential).is_err());
}
