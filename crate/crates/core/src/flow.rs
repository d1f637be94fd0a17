//! Integer max-flow on directed graphs with unit node capacities.
//!
//! Node capacities are enforced by splitting every capacity-1 node into an
//! in/out pair joined by a unit arc. Augmentation uses shortest paths
//! (breadth-first search), and the optimal flow is decomposed into unit paths
//! that are node-disjoint except at the source and sink.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeCap {
    One,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcCap {
    Finite(u32),
    Unbounded,
}

/// A flow network under construction. The source and sink must be unbounded;
/// unbounded arc capacities are replaced internally by a bound that no flow
/// can exceed.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    caps: Vec<NodeCap>,
    arcs: Vec<(usize, usize, ArcCap)>,
    source: usize,
    sink: usize,
}

impl FlowNetwork {
    pub fn new() -> Self {
        Self {
            caps: Vec::new(),
            arcs: Vec::new(),
            source: usize::MAX,
            sink: usize::MAX,
        }
    }

    pub fn add_node(&mut self, cap: NodeCap) -> usize {
        self.caps.push(cap);
        self.caps.len() - 1
    }

    pub fn set_source(&mut self, s: usize) {
        debug_assert_eq!(self.caps[s], NodeCap::Unbounded);
        self.source = s;
    }

    pub fn set_sink(&mut self, t: usize) {
        debug_assert_eq!(self.caps[t], NodeCap::Unbounded);
        self.sink = t;
    }

    pub fn add_arc(&mut self, from: usize, to: usize) {
        self.arcs.push((from, to, ArcCap::Unbounded));
    }

    pub fn add_arc_with_cap(&mut self, from: usize, to: usize, cap: u32) {
        self.arcs.push((from, to, ArcCap::Finite(cap)));
    }

    pub fn num_nodes(&self) -> usize {
        self.caps.len()
    }

    /// Arcs in insertion order as `(from, to)` pairs.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.arcs.iter().map(|&(u, v, _)| (u, v))
    }

    pub fn node_cap(&self, node: usize) -> NodeCap {
        self.caps[node]
    }

    /// Maximum s-t flow value together with a decomposition into unit paths
    /// (node sequences from source to sink, in original node ids).
    ///
    /// Returns `(0, [])` when the sink is unreachable.
    pub fn max_flow(&self) -> (u32, Vec<Vec<usize>>) {
        assert!(self.source != usize::MAX && self.sink != usize::MAX, "source and sink must be set");
        debug_assert!(self.arcs.iter().all(|&(u, v, _)| {
            v != self.source && u != self.sink && (u, v) != (self.source, self.sink)
        }));
        let n = self.caps.len();
        // split: node i -> in 2i, out 2i+1; unbounded nodes keep a single
        // conceptual identity but still use both halves with a wide arc.
        let unit_nodes = self.caps.iter().filter(|c| **c == NodeCap::One).count() as u32;
        let big = unit_nodes + 1;
        let mut g = Residual::new(2 * n);
        for (i, cap) in self.caps.iter().enumerate() {
            let c = match cap {
                NodeCap::One => 1,
                NodeCap::Unbounded => big,
            };
            g.add(2 * i, 2 * i + 1, c);
        }
        for &(u, v, cap) in &self.arcs {
            let c = match cap {
                ArcCap::Finite(c) => c,
                ArcCap::Unbounded => big,
            };
            g.add(2 * u + 1, 2 * v, c);
        }
        let s = 2 * self.source;
        let t = 2 * self.sink + 1;
        let value = g.edmonds_karp(s, t);
        let paths = g
            .decompose(s, t, value)
            .into_iter()
            .map(|p| {
                let mut out: Vec<usize> = Vec::with_capacity(p.len() / 2);
                for node in p {
                    let orig = node / 2;
                    if out.last() != Some(&orig) {
                        out.push(orig);
                    }
                }
                out
            })
            .collect();
        (value, paths)
    }
}

impl Default for FlowNetwork {
    fn default() -> Self {
        Self::new()
    }
}

struct Residual {
    // paired arcs: edge 2k is forward, 2k+1 its reverse
    to: Vec<usize>,
    cap: Vec<u32>,
    adj: Vec<Vec<usize>>,
}

impl Residual {
    fn new(n: usize) -> Self {
        Self {
            to: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, u: usize, v: usize, c: u32) {
        let e = self.to.len();
        self.to.push(v);
        self.cap.push(c);
        self.to.push(u);
        self.cap.push(0);
        self.adj[u].push(e);
        self.adj[v].push(e + 1);
    }

    fn edmonds_karp(&mut self, s: usize, t: usize) -> u32 {
        let mut value = 0;
        let mut pred: Vec<usize> = vec![usize::MAX; self.adj.len()];
        loop {
            pred.fill(usize::MAX);
            let mut queue = VecDeque::new();
            queue.push_back(s);
            'bfs: while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if self.cap[e] > 0 && pred[v] == usize::MAX && v != s {
                        pred[v] = e;
                        if v == t {
                            break 'bfs;
                        }
                        queue.push_back(v);
                    }
                }
            }
            if pred[t] == usize::MAX {
                return value;
            }
            // unit node capacities make every augmentation a single unit
            let mut bottleneck = u32::MAX;
            let mut v = t;
            while v != s {
                let e = pred[v];
                bottleneck = bottleneck.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = pred[v];
                self.cap[e] -= bottleneck;
                self.cap[e ^ 1] += bottleneck;
                v = self.to[e ^ 1];
            }
            value += bottleneck;
        }
    }

    /// Walks `value` units of flow from `s`, consuming arc flow as it goes.
    fn decompose(&mut self, s: usize, t: usize, value: u32) -> Vec<Vec<usize>> {
        // flow on forward arc 2k equals the residual capacity of its reverse
        let mut paths = Vec::with_capacity(value as usize);
        for _ in 0..value {
            let mut path = vec![s];
            let mut u = s;
            while u != t {
                let e = self.adj[u]
                    .iter()
                    .copied()
                    .find(|&e| e % 2 == 0 && self.cap[e ^ 1] > 0)
                    .expect("flow conservation guarantees an outgoing unit");
                self.cap[e ^ 1] -= 1;
                u = self.to[e];
                path.push(u);
            }
            paths.push(path);
        }
        paths
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn simple_net(arcs: &[(usize, usize)], n_internal: usize) -> FlowNetwork {
        let mut net = FlowNetwork::new();
        let s = net.add_node(NodeCap::Unbounded);
        let t = net.add_node(NodeCap::Unbounded);
        for _ in 0..n_internal {
            net.add_node(NodeCap::One);
        }
        net.set_source(s);
        net.set_sink(t);
        for &(u, v) in arcs {
            net.add_arc(u, v);
        }
        net
    }

    #[test]
    fn empty_network_has_no_flow() {
        let net = simple_net(&[], 0);
        assert_eq!(net.max_flow(), (0, vec![]));
    }

    #[test]
    fn single_unit_path() {
        // s=0, t=1, a=2
        let net = simple_net(&[(0, 2), (2, 1)], 1);
        let (v, paths) = net.max_flow();
        assert_eq!(v, 1);
        assert_eq!(paths, vec![vec![0, 2, 1]]);
    }

    #[test]
    fn node_capacity_limits_parallel_routes() {
        // two arcs from s converge on one unit node
        let net = simple_net(&[(0, 2), (0, 3), (2, 4), (3, 4), (4, 1)], 3);
        let (v, paths) = net.max_flow();
        assert_eq!(v, 1);
        assert_eq!(paths.len(), 1);
    }

    #[test]
    fn paths_are_internally_disjoint_and_directed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(0..=8);
            let mut arcs = Vec::new();
            for u in 0..n + 2 {
                for v in 0..n + 2 {
                    // no arcs into s (0), out of t (1), or directly s to t
                    if u != v && v != 0 && u != 1 && (u, v) != (0, 1) && rng.gen_bool(0.3) {
                        arcs.push((u, v));
                    }
                }
            }
            let net = simple_net(&arcs, n);
            let (value, paths) = net.max_flow();
            assert_eq!(value as usize, paths.len());
            let mut used = std::collections::HashSet::new();
            for p in &paths {
                assert_eq!(p.first(), Some(&0));
                assert_eq!(p.last(), Some(&1));
                for w in p.windows(2) {
                    assert!(arcs.contains(&(w[0], w[1])), "path uses a missing arc");
                }
                for &x in &p[1..p.len() - 1] {
                    assert!(used.insert(x), "internal node reused across paths");
                }
            }
            assert_eq!(value, brute_force_max_disjoint(&arcs, n + 2));
        }
    }

    #[test]
    fn invariant_under_insertion_order() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = rng.gen_range(1..=7);
            let mut arcs = Vec::new();
            for u in 0..n + 2 {
                for v in 0..n + 2 {
                    if u != v && v != 0 && u != 1 && (u, v) != (0, 1) && rng.gen_bool(0.35) {
                        arcs.push((u, v));
                    }
                }
            }
            let base = simple_net(&arcs, n).max_flow().0;
            let mut shuffled = arcs.clone();
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.gen_range(0..=i));
            }
            assert_eq!(simple_net(&shuffled, n).max_flow().0, base);
        }
    }

    /// Brute force: maximum number of internally node-disjoint s-t paths,
    /// by exhaustive search over simple paths.
    fn brute_force_max_disjoint(arcs: &[(usize, usize)], n: usize) -> u32 {
        fn simple_paths(
            arcs: &[(usize, usize)],
            n: usize,
            u: usize,
            used: &mut Vec<bool>,
            path: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if u == 1 {
                out.push(path.clone());
                return;
            }
            for v in 0..n {
                if !used[v] && arcs.contains(&(u, v)) {
                    used[v] = true;
                    path.push(v);
                    simple_paths(arcs, n, v, used, path, out);
                    path.pop();
                    used[v] = false;
                }
            }
        }
        let mut all = Vec::new();
        let mut used = vec![false; n];
        used[0] = true;
        simple_paths(arcs, n, 0, &mut used, &mut vec![0], &mut all);
        // maximum family of pairwise internally-disjoint paths
        fn best(all: &[Vec<usize>], chosen: &mut Vec<usize>, start: usize, taken: u32) -> u32 {
            let mut best_v = taken;
            for i in start..all.len() {
                let internal = &all[i][1..all[i].len() - 1];
                if internal.iter().all(|x| !chosen.contains(x)) {
                    chosen.extend_from_slice(internal);
                    best_v = best_v.max(best(all, chosen, i + 1, taken + 1));
                    chosen.truncate(chosen.len() - internal.len());
                }
            }
            best_v
        }
        best(&all, &mut Vec::new(), 0, 0)
    }
}
