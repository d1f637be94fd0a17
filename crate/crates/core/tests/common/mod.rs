//! Reference graphs shared by the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use lfhtc::bitset::BitSet;
use lfhtc::graph::LatentFactorGraph;

/// Five observed nodes and one global latent factor; edges are 1-based.
pub fn one_factor_five(directed: &[(usize, usize)]) -> LatentFactorGraph {
    LatentFactorGraph::from_indices(
        5,
        &directed.iter().map(|&(u, v)| (u - 1, v - 1)).collect::<Vec<_>>(),
        &[BitSet::from_iter(0..5)],
    )
    .unwrap()
}

/// Chain 2-3-4-5 with a skip 3-5 under a global factor; identifiable.
pub fn chain_skip() -> LatentFactorGraph {
    one_factor_five(&[(2, 3), (3, 4), (4, 5), (3, 5)])
}

/// Collider into node 3 under a global factor; finite-to-one but not
/// identifiable.
pub fn collider() -> LatentFactorGraph {
    one_factor_five(&[(1, 3), (2, 3), (3, 4), (4, 5)])
}

/// Disconnected edge 1-2 next to the 3-4-5 block; infinite-to-one.
pub fn split_chain() -> LatentFactorGraph {
    one_factor_five(&[(1, 2), (3, 4), (4, 5), (3, 5)])
}

/// Six observed edges under a global factor; infinite-to-one by parameter
/// count.
pub fn dense_chain() -> LatentFactorGraph {
    one_factor_five(&[(1, 2), (2, 3), (3, 4), (4, 5), (1, 3), (3, 5)])
}

/// Sequential-treatment graph: randomized doses T1, T2, outcomes O1..O3, a
/// latent trait over the outcomes, and a proxy measurement Z.
pub fn sequential_trial() -> LatentFactorGraph {
    LatentFactorGraph::new(
        ["Z", "T1", "O1", "O2", "T2", "O3"].iter().map(|s| s.to_string()).collect(),
        vec!["L".into()],
        [
            ("T1", "O1"),
            ("O1", "O2"),
            ("O2", "T2"),
            ("T2", "O3"),
            ("T1", "O2"),
            ("T1", "T2"),
            ("T1", "O3"),
            ("O1", "T2"),
        ]
        .iter()
        .map(|&(a, b)| (a.to_string(), b.to_string()))
        .collect(),
        ["Z", "O1", "O2", "O3"]
            .iter()
            .map(|&v| ("L".to_string(), v.to_string()))
            .collect(),
    )
    .unwrap()
}

/// Three overlapping factors over five nodes with directed edges 4-5 and
/// 3-5; infinite-to-one although its projection is identifiable.
pub fn three_factor() -> LatentFactorGraph {
    LatentFactorGraph::from_indices(
        5,
        &[(3, 4), (2, 4)],
        &[
            BitSet::from_iter([0, 1, 2, 3]),
            BitSet::from_iter([3, 4]),
            BitSet::from_iter([2, 4]),
        ],
    )
    .unwrap()
}

/// One factor with children {1,3,4} over the chain 2-3-4-5 plus skip 3-5;
/// its projection is identifiable.
pub fn sparse_factor() -> LatentFactorGraph {
    LatentFactorGraph::from_indices(
        5,
        &[(1, 2), (2, 3), (3, 4), (2, 4)],
        &[BitSet::from_iter([0, 2, 3])],
    )
    .unwrap()
}

/// Six nodes, factors over {1,2,3,4} and {4,5,6}, chains 1-2-3 and 4-5,
/// 4-6; identifiable.
pub fn two_factor_chains() -> LatentFactorGraph {
    LatentFactorGraph::from_indices(
        6,
        &[(0, 1), (1, 2), (3, 4), (3, 5)],
        &[BitSet::from_iter(0..4), BitSet::from_iter(3..6)],
    )
    .unwrap()
}
