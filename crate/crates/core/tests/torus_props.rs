mod common;

use kcontagion::torus::{BlockGrid, Coord, TorusGeometry};
use proptest::prelude::*;

proptest! {
    #[test]
    fn distance_is_a_metric(side in 2u32..40, a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
        let g = TorusGeometry::new(side).unwrap();
        let n = side * side;
        let (a, b, c) = (a % n, b % n, c % n);
        let d = |x, y| g.distance_ids(x, y);
        prop_assert_eq!(d(a, b), d(b, a));
        prop_assert_eq!(d(a, a), 0);
        prop_assert!(d(a, c) <= d(a, b) + d(b, c));
        prop_assert!(d(a, b) <= g.max_distance());
        prop_assert_eq!(d(a, b), common::torus_distance(side, a, b));
    }

    #[test]
    fn ids_round_trip(side in 2u32..64, id in any::<u32>()) {
        let g = TorusGeometry::new(side).unwrap();
        let id = id % (side * side);
        prop_assert_eq!(g.id(g.coord(id)), id);
    }

    #[test]
    fn histogram_counts_every_other_node(side in 2u32..48) {
        let g = TorusGeometry::new(side).unwrap();
        let total: usize = g.distance_histogram().values().sum();
        prop_assert_eq!(total, g.node_count() - 1);
        for (&d, &count) in &g.distance_histogram() {
            prop_assert_eq!(g.shell(d).len(), count);
        }
    }

    #[test]
    fn nearby_nodes_fall_in_adjacent_blocks(side in 4u32..48, bs in 1u32..12, a in any::<u32>(), dx in 0u32..12, dy in 0u32..12) {
        let bs = bs.min(side);
        let blocks = BlockGrid::merged(side, bs).unwrap();
        let g = TorusGeometry::new(side).unwrap();
        let ca = g.coord(a % (side * side));
        let (dx, dy) = (dx % (bs + 1), dy % (bs + 1));
        let cb = g.offset(ca, dx, dy);
        prop_assert!(blocks.are_adjacent(blocks.block_index(ca), blocks.block_index(cb)));
    }

    #[test]
    fn seed_cluster_is_grid_connected(side in 3u32..20, k in 1u32..6, x in 0u32..20, y in 0u32..20) {
        let g = TorusGeometry::new(side).unwrap();
        prop_assume!(k <= side);
        let cells = g.canonical_seed_cluster(Coord::new(x % side, y % side), k).unwrap();
        prop_assert_eq!(cells.len(), k as usize);
        for w in cells.windows(2) {
            prop_assert_eq!(g.distance(w[0], w[1]), 1);
        }
    }
}
