//! Census of unlabeled DAGs with a fixed latent attachment pattern.
//!
//! Two graphs with the same latent structure are isomorphic when a
//! permutation of the observed nodes maps one edge set onto the other while
//! fixing every latent node's child set. The enumerator emits one canonical
//! representative per class; the classifier counts, per edge count, how many
//! classes are generically finite-to-one, criterion-identifiable, and
//! (optionally) identifiable after projection.

use crate::bitset::BitSet;
use crate::criterion::{htc_identifiable, lfhtc_identifiable};
use crate::dimension::{is_finite_to_one, DimensionError, Verdict};
use crate::graph::{GraphError, LatentFactorGraph};
use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CensusError {
    #[error("{0} observed nodes exceeds the enumeration budget of {1}")]
    Budget(usize, usize),
    #[error("graph error: {0}")]
    Graph(#[from] GraphError),
    #[error("dimension error: {0}")]
    Dimension(#[from] DimensionError),
}

/// Observed node count plus the child set of each latent factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentPattern {
    pub d: usize,
    pub child_sets: Vec<BitSet>,
}

impl LatentPattern {
    /// One latent factor covering every observed node.
    pub fn global(d: usize) -> Self {
        Self { d, child_sets: vec![BitSet::from_iter(0..d)] }
    }

    /// Two overlapping factors on six nodes: children 1..4 and 4..6.
    pub fn two_factor_six() -> Self {
        Self {
            d: 6,
            child_sets: vec![BitSet::from_iter(0..4), BitSet::from_iter(3..6)],
        }
    }

    /// Pattern of an existing graph (its latent structure; directed edges are
    /// ignored).
    pub fn from_graph(g: &LatentFactorGraph) -> Self {
        Self {
            d: g.num_observed(),
            child_sets: (0..g.num_latent()).map(|h| g.ch_lat_of(h).clone()).collect(),
        }
    }

    fn graph(&self, edges: &[(u8, u8)]) -> Result<LatentFactorGraph, GraphError> {
        LatentFactorGraph::from_indices(
            self.d,
            &edges.iter().map(|&(u, v)| (u as usize, v as usize)).collect::<Vec<_>>(),
            &self.child_sets,
        )
    }
}

/// All observed-node permutations that fix every latent child set, by brute
/// force over the symmetric group.
pub fn stabilizer(pattern: &LatentPattern) -> Vec<Vec<usize>> {
    (0..pattern.d)
        .permutations(pattern.d)
        .filter(|p| {
            pattern.child_sets.iter().all(|cs| {
                let mapped: BitSet = cs.iter().map(|v| p[v]).collect();
                mapped == *cs
            })
        })
        .collect()
}

/// Canonical form of a raw edge list under a permutation group: the
/// lexicographic minimum of the sorted relabeled lists. Mirrors
/// [`LatentFactorGraph::canonical_form`] without building a graph.
fn canonical_edges(edges: &[(u8, u8)], perms: &[Vec<usize>]) -> Vec<(u8, u8)> {
    let mut best: Option<Vec<(u8, u8)>> = None;
    let mut buf: Vec<(u8, u8)> = Vec::with_capacity(edges.len());
    for p in perms {
        buf.clear();
        buf.extend(edges.iter().map(|&(u, v)| (p[u as usize] as u8, p[v as usize] as u8)));
        buf.sort_unstable();
        if best.as_ref().is_none_or(|b| buf < *b) {
            best = Some(buf.clone());
        }
    }
    best.unwrap_or_default()
}

fn is_acyclic_edges(d: usize, edges: &[(u8, u8)]) -> bool {
    let mut indeg = [0u8; 8];
    let mut out: Vec<u8> = vec![0; d]; // adjacency bitmasks, d <= 7
    for &(u, v) in edges {
        out[u as usize] |= 1 << v;
        indeg[v as usize] += 1;
    }
    let mut queue: Vec<usize> = (0..d).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        let mut bits = out[v];
        while bits != 0 {
            let c = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.push(c);
            }
        }
    }
    seen == d
}

const ENUMERATION_BUDGET: usize = 7;

/// Enumerates one representative per isomorphism class of DAGs over the
/// pattern with at most `max_edges` observed edges.
///
/// The representative is the class's canonical edge list. When the stabilizer
/// is the full symmetric group only upper-triangular edge subsets need to be
/// scanned (every DAG class contains one); otherwise all acyclic edge subsets
/// are scanned. Duplicates are removed by canonical form.
pub fn enumerate_unlabeled(
    pattern: &LatentPattern,
    max_edges: usize,
) -> Result<Vec<LatentFactorGraph>, CensusError> {
    let d = pattern.d;
    if d > ENUMERATION_BUDGET {
        return Err(CensusError::Budget(d, ENUMERATION_BUDGET));
    }
    let perms = stabilizer(pattern);
    let full_symmetric = perms.len() == (1..=d).product::<usize>();
    let mut pairs: Vec<(u8, u8)> = Vec::new();
    for u in 0..d as u8 {
        for v in 0..d as u8 {
            if u != v && (!full_symmetric || u < v) {
                pairs.push((u, v));
            }
        }
    }
    let mut seen: HashSet<Vec<(u8, u8)>> = HashSet::new();
    let mut out = Vec::new();
    for size in 0..=max_edges.min(pairs.len()) {
        for subset in pairs.iter().copied().combinations(size) {
            if !full_symmetric && !is_acyclic_edges(d, &subset) {
                continue;
            }
            let key = canonical_edges(&subset, &perms);
            if seen.insert(key.clone()) {
                out.push(pattern.graph(&key)?);
            }
        }
    }
    Ok(out)
}

/// One row of the census: class counts for a fixed number of observed edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensusRow {
    pub edges: usize,
    pub total: u64,
    pub finite_to_one: u64,
    pub lfhtc: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub htc: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
pub struct CensusConfig {
    pub max_edges: usize,
    /// Subset-size bound for the criterion search.
    pub k: usize,
    /// Also classify the latent projection with the mixed-graph criterion.
    pub with_htc: bool,
    /// Jacobian trials per graph for the finite-to-one verdict.
    pub trials: usize,
    pub seed: u64,
}

impl Default for CensusConfig {
    fn default() -> Self {
        Self { max_edges: 9, k: 2, with_htc: false, trials: 3, seed: 0 }
    }
}

struct Tally {
    total: u64,
    finite: u64,
    lfhtc: u64,
    htc: u64,
}

/// Classifies every class in the pattern and aggregates counts per edge
/// count. Classification is parallel over classes; counts are commutative, so
/// the result is independent of worker count and enumeration order.
pub fn census(pattern: &LatentPattern, cfg: &CensusConfig) -> Result<Vec<CensusRow>, CensusError> {
    let graphs = enumerate_unlabeled(pattern, cfg.max_edges)?;
    let tallies: Result<Vec<(usize, Tally)>, CensusError> = graphs
        .par_iter()
        .map(|g| {
            let edges = g.directed_edges().len();
            let identifiable = lfhtc_identifiable(g, cfg.k).0;
            let seed = cfg.seed ^ graph_seed(g);
            let mut verdict = is_finite_to_one(g, seed, cfg.trials)?;
            // identifiability implies finite-to-one; a disagreeing rank test
            // sampled an unlucky point, so escalate the trial count
            let mut trials = cfg.trials;
            while identifiable && verdict != Verdict::FiniteToOne && trials < cfg.trials * 8 {
                trials *= 2;
                verdict = is_finite_to_one(g, seed, trials)?;
            }
            let htc = cfg.with_htc && htc_identifiable(&g.latent_projection()).0;
            Ok((
                edges,
                Tally {
                    total: 1,
                    finite: (verdict == Verdict::FiniteToOne) as u64,
                    lfhtc: identifiable as u64,
                    htc: htc as u64,
                },
            ))
        })
        .collect();
    let mut rows: Vec<CensusRow> = (0..=cfg.max_edges)
        .map(|edges| CensusRow {
            edges,
            total: 0,
            finite_to_one: 0,
            lfhtc: 0,
            htc: cfg.with_htc.then_some(0),
        })
        .collect();
    for (edges, tally) in tallies? {
        let row = &mut rows[edges];
        row.total += tally.total;
        row.finite_to_one += tally.finite;
        row.lfhtc += tally.lfhtc;
        if let Some(h) = row.htc.as_mut() {
            *h += tally.htc;
        }
    }
    for row in &rows {
        debug_assert!(row.lfhtc <= row.finite_to_one && row.finite_to_one <= row.total);
    }
    Ok(rows)
}

/// Stable per-graph seed derived from the canonical edge list, so results do
/// not depend on enumeration order.
fn graph_seed(g: &LatentFactorGraph) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &(u, v) in g.directed_edges() {
        for byte in [u as u8, v as u8] {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// Renders census rows as CSV with the column layout
/// `edges,total,finite_to_one,lfhtc[,htc]`.
pub fn rows_to_csv(rows: &[CensusRow]) -> String {
    let with_htc = rows.iter().any(|r| r.htc.is_some());
    let mut out = String::from(if with_htc {
        "edges,total,finite_to_one,lfhtc,htc\n"
    } else {
        "edges,total,finite_to_one,lfhtc\n"
    });
    for r in rows {
        out.push_str(&format!("{},{},{},{}", r.edges, r.total, r.finite_to_one, r.lfhtc));
        if let Some(h) = r.htc {
            out.push_str(&format!(",{h}"));
        }
        out.push('\n');
    }
    out
}
