//! Latent-factor graphs and mixed graphs.
//!
//! A latent-factor graph has observed nodes, latent source nodes whose edges
//! point only at observed nodes, and may contain directed cycles among the
//! observed part. A mixed graph has observed nodes with directed and
//! bidirected edges and is the target of latent projection.
//!
//! Nodes are stored by dense integer index with a label table; file order
//! defines index order, and all derived sets are bitsets over indices.

use crate::bitset::BitSet;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("latent node with parent: edge into {0:?}")]
    LatentWithParent(String),
    #[error("self-loop at {0:?}")]
    SelfLoop(String),
    #[error("unknown endpoint {0:?}")]
    UnknownEndpoint(String),
    #[error("edge ({0:?}, {1:?}) has endpoints of the wrong kind for its list")]
    EdgeKind(String, String),
    #[error("unexpected field {0:?} for this graph kind")]
    UnexpectedField(String),
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("permutation {0:?} is not a permutation of the observed nodes")]
    NotAPermutation(Vec<usize>),
    #[error("permutation {0:?} does not preserve the latent edges")]
    LatentEdgeViolation(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Observed,
    Latent,
}

/// Identity of a node: its unique label and fixed kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub name: String,
    pub kind: NodeKind,
}

/// Serialized form shared by latent-factor and mixed graph files.
#[derive(Serialize, Deserialize)]
struct GraphFile {
    observed: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    latent: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    directed: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    latent_edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bidirected: Option<Vec<(String, String)>>,
}

/// Directed graph over observed and latent nodes where every latent node is a
/// source with edges only into observed nodes. Cycles among observed nodes are
/// permitted. Immutable after construction.
///
/// Equality compares node labels and edge sets; the stored edge order (file
/// order) only determines iteration order.
#[derive(Clone, Eq)]
pub struct LatentFactorGraph {
    obs_labels: Vec<String>,
    lat_labels: Vec<String>,
    directed: Vec<(usize, usize)>,
    latent_edges: Vec<(usize, usize)>,
    pa_obs: Vec<BitSet>,
    ch_obs: Vec<BitSet>,
    pa_lat: Vec<BitSet>,
    ch_lat: Vec<BitSet>,
    index: HashMap<String, (NodeKind, usize)>,
}

impl LatentFactorGraph {
    pub fn new(
        observed: Vec<String>,
        latent: Vec<String>,
        directed: Vec<(String, String)>,
        latent_edges: Vec<(String, String)>,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::new();
        for (i, l) in observed.iter().enumerate() {
            if index.insert(l.clone(), (NodeKind::Observed, i)).is_some() {
                return Err(GraphError::DuplicateLabel(l.clone()));
            }
        }
        for (i, l) in latent.iter().enumerate() {
            if index.insert(l.clone(), (NodeKind::Latent, i)).is_some() {
                return Err(GraphError::DuplicateLabel(l.clone()));
            }
        }
        let d = observed.len();
        let nl = latent.len();
        let mut g = Self {
            obs_labels: observed,
            lat_labels: latent,
            directed: Vec::new(),
            latent_edges: Vec::new(),
            pa_obs: vec![BitSet::new(); d],
            ch_obs: vec![BitSet::new(); d],
            pa_lat: vec![BitSet::new(); d],
            ch_lat: vec![BitSet::new(); nl],
            index,
        };
        for (u, v) in directed {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let ui = g.lookup(&u)?;
            let vi = g.lookup(&v)?;
            match (ui, vi) {
                ((NodeKind::Observed, a), (NodeKind::Observed, b)) => {
                    if !g.ch_obs[a].contains(b) {
                        g.directed.push((a, b));
                        g.ch_obs[a].insert(b);
                        g.pa_obs[b].insert(a);
                    }
                }
                (_, (NodeKind::Latent, _)) => return Err(GraphError::LatentWithParent(v)),
                _ => return Err(GraphError::EdgeKind(u, v)),
            }
        }
        for (h, v) in latent_edges {
            if h == v {
                return Err(GraphError::SelfLoop(h));
            }
            let hi = g.lookup(&h)?;
            let vi = g.lookup(&v)?;
            match (hi, vi) {
                ((NodeKind::Latent, a), (NodeKind::Observed, b)) => {
                    if !g.ch_lat[a].contains(b) {
                        g.latent_edges.push((a, b));
                        g.ch_lat[a].insert(b);
                        g.pa_lat[b].insert(a);
                    }
                }
                (_, (NodeKind::Latent, _)) => return Err(GraphError::LatentWithParent(v)),
                _ => return Err(GraphError::EdgeKind(h, v)),
            }
        }
        Ok(g)
    }

    /// Builds a graph over index-named nodes `"1".."d"` and `"h1".."hl"`.
    pub fn from_indices(
        d: usize,
        directed: &[(usize, usize)],
        latent_children: &[BitSet],
    ) -> Result<Self, GraphError> {
        Self::new(
            (1..=d).map(|i| i.to_string()).collect(),
            (1..=latent_children.len()).map(|i| format!("h{i}")).collect(),
            directed
                .iter()
                .map(|&(u, v)| ((u + 1).to_string(), (v + 1).to_string()))
                .collect(),
            latent_children
                .iter()
                .enumerate()
                .flat_map(|(h, cs)| {
                    cs.iter().map(move |v| (format!("h{}", h + 1), (v + 1).to_string()))
                })
                .collect(),
        )
    }

    fn lookup(&self, label: &str) -> Result<(NodeKind, usize), GraphError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| GraphError::UnknownEndpoint(label.to_string()))
    }

    pub fn num_observed(&self) -> usize {
        self.obs_labels.len()
    }

    pub fn num_latent(&self) -> usize {
        self.lat_labels.len()
    }

    pub fn obs_label(&self, v: usize) -> &str {
        &self.obs_labels[v]
    }

    pub fn lat_label(&self, h: usize) -> &str {
        &self.lat_labels[h]
    }

    pub fn obs_index(&self, label: &str) -> Option<usize> {
        match self.index.get(label) {
            Some((NodeKind::Observed, i)) => Some(*i),
            _ => None,
        }
    }

    pub fn lat_index(&self, label: &str) -> Option<usize> {
        match self.index.get(label) {
            Some((NodeKind::Latent, i)) => Some(*i),
            _ => None,
        }
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.index
            .get(label)
            .map(|&(kind, _)| NodeId { name: label.to_string(), kind })
    }

    /// All nodes in index order, observed before latent.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        let observed = self
            .obs_labels
            .iter()
            .map(|l| NodeId { name: l.clone(), kind: NodeKind::Observed });
        let latent = self
            .lat_labels
            .iter()
            .map(|l| NodeId { name: l.clone(), kind: NodeKind::Latent });
        observed.chain(latent)
    }

    /// Directed observed-to-observed edges in file order.
    pub fn directed_edges(&self) -> &[(usize, usize)] {
        &self.directed
    }

    /// Latent-to-observed edges in file order.
    pub fn latent_edge_list(&self) -> &[(usize, usize)] {
        &self.latent_edges
    }

    /// Observed parents of an observed node.
    pub fn pa_observed(&self, v: usize) -> &BitSet {
        &self.pa_obs[v]
    }

    /// Observed children of an observed node.
    pub fn ch_observed(&self, v: usize) -> &BitSet {
        &self.ch_obs[v]
    }

    /// Latent parents of one observed node.
    pub fn pa_lat_of(&self, v: usize) -> &BitSet {
        &self.pa_lat[v]
    }

    /// Observed children of a latent node.
    pub fn ch_lat_of(&self, h: usize) -> &BitSet {
        &self.ch_lat[h]
    }

    /// Union of latent parents over a set of observed nodes.
    pub fn pa_latent(&self, s: &BitSet) -> BitSet {
        let mut out = BitSet::new();
        for v in s.iter() {
            out.union_with(&self.pa_lat[v]);
        }
        out
    }

    /// Union of observed children over a set of latent nodes.
    pub fn ch_of_latents(&self, hs: &BitSet) -> BitSet {
        let mut out = BitSet::new();
        for h in hs.iter() {
            out.union_with(&self.ch_lat[h]);
        }
        out
    }

    /// Observed nodes half-trek reachable from `u` while avoiding the latent
    /// nodes in `h_avoid`, excluding the members of `u` themselves.
    ///
    /// A half-trek is a directed path optionally prefixed by a single latent
    /// fork `v <- h -> x1`. Reachability closes the fork children and directed
    /// children of `u` under directed edges.
    pub fn htr(&self, u: &BitSet, h_avoid: &BitSet) -> BitSet {
        let mut seeds = BitSet::new();
        for v in u.iter() {
            seeds.union_with(&self.ch_obs[v]);
        }
        let forks = self.pa_latent(u).difference(h_avoid);
        seeds.union_with(&self.ch_of_latents(&forks));
        let mut reach = seeds.clone();
        let mut stack: Vec<usize> = seeds.iter().collect();
        while let Some(w) = stack.pop() {
            for c in self.ch_obs[w].iter() {
                if !reach.contains(c) {
                    reach.insert(c);
                    stack.push(c);
                }
            }
        }
        reach.difference(u)
    }

    /// Replaces shared latent parents by bidirected edges.
    pub fn latent_projection(&self) -> MixedGraph {
        let d = self.num_observed();
        let mut bid: Vec<(usize, usize)> = Vec::new();
        let mut seen = vec![BitSet::new(); d];
        for h in 0..self.num_latent() {
            let children = self.ch_lat[h].to_vec();
            for (i, &v) in children.iter().enumerate() {
                for &w in &children[i + 1..] {
                    if !seen[v].contains(w) {
                        seen[v].insert(w);
                        bid.push((v, w));
                    }
                }
            }
        }
        bid.sort_unstable();
        MixedGraph::from_indexed(self.obs_labels.clone(), self.directed.clone(), bid)
    }

    /// Observed part acyclic (latent sources never create cycles).
    pub fn is_acyclic(&self) -> bool {
        let d = self.num_observed();
        let mut indeg: Vec<usize> = (0..d).map(|v| self.pa_obs[v].len()).collect();
        let mut queue: Vec<usize> = (0..d).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for c in self.ch_obs[v].iter() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        seen == d
    }

    /// Canonical key under a group of observed-node permutations:
    /// lexicographic minimum of the sorted relabeled edge lists.
    ///
    /// Every permutation must fix each latent node's child set, so latent
    /// edges are preserved and equal keys coincide with isomorphism under the
    /// group.
    pub fn canonical_form(&self, perms: &[Vec<usize>]) -> Result<CanonicalKey, GraphError> {
        let d = self.num_observed();
        if perms.is_empty() {
            return Err(GraphError::NotAPermutation(Vec::new()));
        }
        for p in perms {
            if p.len() != d || {
                let mut seen = vec![false; d];
                p.iter().any(|&i| i >= d || std::mem::replace(&mut seen[i], true))
            } {
                return Err(GraphError::NotAPermutation(p.clone()));
            }
            for h in 0..self.num_latent() {
                let mapped: BitSet = self.ch_lat[h].iter().map(|v| p[v]).collect();
                if mapped != self.ch_lat[h] {
                    return Err(GraphError::LatentEdgeViolation(p.clone()));
                }
            }
        }
        let lat_part: Vec<(u16, u16)> = {
            let mut e: Vec<(u16, u16)> = self
                .latent_edges
                .iter()
                .map(|&(h, v)| (h as u16, v as u16))
                .collect();
            e.sort_unstable();
            e
        };
        let mut best: Option<Vec<(u16, u16)>> = None;
        let mut buf: Vec<(u16, u16)> = Vec::with_capacity(self.directed.len());
        for p in perms {
            buf.clear();
            buf.extend(self.directed.iter().map(|&(u, v)| (p[u] as u16, p[v] as u16)));
            buf.sort_unstable();
            if best.as_ref().is_none_or(|b| buf < *b) {
                best = Some(buf.clone());
            }
        }
        Ok(CanonicalKey {
            directed: best.unwrap_or_default(),
            latent: lat_part,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = GraphFile {
            observed: self.obs_labels.clone(),
            latent: self.lat_labels.clone(),
            directed: self
                .directed
                .iter()
                .map(|&(u, v)| (self.obs_labels[u].clone(), self.obs_labels[v].clone()))
                .collect(),
            latent_edges: self
                .latent_edges
                .iter()
                .map(|&(h, v)| (self.lat_labels[h].clone(), self.obs_labels[v].clone()))
                .collect(),
            bidirected: None,
        };
        serde_json::to_value(file).expect("graph serialization cannot fail")
    }
}

impl PartialEq for LatentFactorGraph {
    fn eq(&self, other: &Self) -> bool {
        fn sorted(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
            let mut v = edges.to_vec();
            v.sort_unstable();
            v
        }
        self.obs_labels == other.obs_labels
            && self.lat_labels == other.lat_labels
            && sorted(&self.directed) == sorted(&other.directed)
            && sorted(&self.latent_edges) == sorted(&other.latent_edges)
    }
}

impl std::fmt::Debug for LatentFactorGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LatentFactorGraph {}", self.to_json())
    }
}

/// Canonical edge-list key returned by [`LatentFactorGraph::canonical_form`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CanonicalKey {
    pub directed: Vec<(u16, u16)>,
    pub latent: Vec<(u16, u16)>,
}

/// Parses the latent-factor graph JSON format.
pub fn parse_graph(text: &str) -> Result<LatentFactorGraph, GraphError> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
    if file.bidirected.is_some() {
        return Err(GraphError::UnexpectedField("bidirected".into()));
    }
    LatentFactorGraph::new(file.observed, file.latent, file.directed, file.latent_edges)
}

/// Parses the mixed graph JSON format (observed, directed, bidirected).
pub fn parse_mixed_graph(text: &str) -> Result<MixedGraph, GraphError> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
    if !file.latent.is_empty() || !file.latent_edges.is_empty() {
        return Err(GraphError::UnexpectedField("latent".into()));
    }
    MixedGraph::new(file.observed, file.directed, file.bidirected.unwrap_or_default())
}

/// Observed nodes with directed and bidirected edges.
///
/// Equality compares node labels and edge sets, like
/// [`LatentFactorGraph`].
#[derive(Clone, Eq)]
pub struct MixedGraph {
    obs_labels: Vec<String>,
    directed: Vec<(usize, usize)>,
    bidirected: Vec<(usize, usize)>,
    pa: Vec<BitSet>,
    ch: Vec<BitSet>,
    sib: Vec<BitSet>,
    index: HashMap<String, usize>,
}

impl MixedGraph {
    pub fn new(
        observed: Vec<String>,
        directed: Vec<(String, String)>,
        bidirected: Vec<(String, String)>,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::new();
        for (i, l) in observed.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(GraphError::DuplicateLabel(l.clone()));
            }
        }
        let resolve = |label: &String| {
            index
                .get(label)
                .copied()
                .ok_or_else(|| GraphError::UnknownEndpoint(label.clone()))
        };
        let mut dir = Vec::new();
        let mut bid = Vec::new();
        for (u, v) in &directed {
            if u == v {
                return Err(GraphError::SelfLoop(u.clone()));
            }
            dir.push((resolve(u)?, resolve(v)?));
        }
        for (u, v) in &bidirected {
            if u == v {
                return Err(GraphError::SelfLoop(u.clone()));
            }
            let (a, b) = (resolve(u)?, resolve(v)?);
            bid.push((a.min(b), a.max(b)));
        }
        Ok(Self::from_indexed(observed, dir, bid))
    }

    fn from_indexed(
        obs_labels: Vec<String>,
        directed: Vec<(usize, usize)>,
        bidirected: Vec<(usize, usize)>,
    ) -> Self {
        let d = obs_labels.len();
        let index = obs_labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let mut g = Self {
            obs_labels,
            directed: Vec::new(),
            bidirected: Vec::new(),
            pa: vec![BitSet::new(); d],
            ch: vec![BitSet::new(); d],
            sib: vec![BitSet::new(); d],
            index,
        };
        for (u, v) in directed {
            if !g.ch[u].contains(v) {
                g.directed.push((u, v));
                g.ch[u].insert(v);
                g.pa[v].insert(u);
            }
        }
        for (u, v) in bidirected {
            let (a, b) = (u.min(v), u.max(v));
            if !g.sib[a].contains(b) {
                g.bidirected.push((a, b));
                g.sib[a].insert(b);
                g.sib[b].insert(a);
            }
        }
        g
    }

    pub fn num_observed(&self) -> usize {
        self.obs_labels.len()
    }

    pub fn obs_label(&self, v: usize) -> &str {
        &self.obs_labels[v]
    }

    pub fn obs_index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn directed_edges(&self) -> &[(usize, usize)] {
        &self.directed
    }

    /// Bidirected edges as ordered `(min, max)` pairs.
    pub fn bidirected_edges(&self) -> &[(usize, usize)] {
        &self.bidirected
    }

    pub fn pa(&self, v: usize) -> &BitSet {
        &self.pa[v]
    }

    pub fn ch(&self, v: usize) -> &BitSet {
        &self.ch[v]
    }

    /// Bidirected neighbors.
    pub fn sib(&self, v: usize) -> &BitSet {
        &self.sib[v]
    }

    /// Half-trek reachability in the mixed graph: directed children and
    /// siblings of `u`, closed under directed edges, excluding `u` itself.
    pub fn htr(&self, u: &BitSet) -> BitSet {
        let mut seeds = BitSet::new();
        for v in u.iter() {
            seeds.union_with(&self.ch[v]);
            seeds.union_with(&self.sib[v]);
        }
        let mut reach = seeds.clone();
        let mut stack: Vec<usize> = seeds.iter().collect();
        while let Some(w) = stack.pop() {
            for c in self.ch[w].iter() {
                if !reach.contains(c) {
                    reach.insert(c);
                    stack.push(c);
                }
            }
        }
        reach.difference(u)
    }

    /// Inverse of latent projection: one fresh latent node with exactly two
    /// children per bidirected edge.
    pub fn bidirected_expansion(&self) -> LatentFactorGraph {
        let mut lat_labels: Vec<String> = Vec::with_capacity(self.bidirected.len());
        let mut latent_edges = Vec::with_capacity(2 * self.bidirected.len());
        for &(v, w) in &self.bidirected {
            let mut name = format!("h({},{})", self.obs_labels[v], self.obs_labels[w]);
            while self.index.contains_key(&name) || lat_labels.contains(&name) {
                name.push('\'');
            }
            latent_edges.push((name.clone(), self.obs_labels[v].clone()));
            latent_edges.push((name.clone(), self.obs_labels[w].clone()));
            lat_labels.push(name);
        }
        LatentFactorGraph::new(
            self.obs_labels.clone(),
            lat_labels,
            self.directed
                .iter()
                .map(|&(u, v)| (self.obs_labels[u].clone(), self.obs_labels[v].clone()))
                .collect(),
            latent_edges,
        )
        .expect("expansion of a valid mixed graph is valid")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = GraphFile {
            observed: self.obs_labels.clone(),
            latent: Vec::new(),
            directed: self
                .directed
                .iter()
                .map(|&(u, v)| (self.obs_labels[u].clone(), self.obs_labels[v].clone()))
                .collect(),
            latent_edges: Vec::new(),
            bidirected: Some(
                self.bidirected
                    .iter()
                    .map(|&(u, v)| (self.obs_labels[u].clone(), self.obs_labels[v].clone()))
                    .collect(),
            ),
        };
        serde_json::to_value(file).expect("graph serialization cannot fail")
    }
}

impl PartialEq for MixedGraph {
    fn eq(&self, other: &Self) -> bool {
        fn sorted(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
            let mut v = edges.to_vec();
            v.sort_unstable();
            v
        }
        self.obs_labels == other.obs_labels
            && sorted(&self.directed) == sorted(&other.directed)
            && sorted(&self.bidirected) == sorted(&other.bidirected)
    }
}

impl std::fmt::Debug for MixedGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MixedGraph {}", self.to_json())
    }
}
