//! The latent-factor half-trek criterion and its flow-graph reduction.
//!
//! A triple of node sets `(Y, Z, H)` witnesses that the direct effects into a
//! node `v` solve an invertible linear system in covariance entries. Checking
//! a candidate triple, and searching for one, reduces to a max-flow problem on
//! a network whose unit node capacities encode the no-sided-intersection rule
//! for systems of half-treks. The recursive algorithm certifies whole graphs,
//! and a mixed-graph variant covers the classical criterion on latent
//! projections.

use crate::bitset::BitSet;
use crate::flow::{FlowNetwork, NodeCap};
use crate::graph::{LatentFactorGraph, MixedGraph};
use itertools::Itertools;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CriterionError {
    #[error("malformed triple: {0}")]
    MalformedTriple(String),
    #[error("certificate refers to unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid certificate JSON: {0}")]
    Json(String),
}

/// A candidate witness `(Y, Z, H)` for one node `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HtcTriple {
    pub v: usize,
    pub y: BitSet,
    pub z: BitSet,
    pub h: BitSet,
}

impl HtcTriple {
    pub fn trivial(v: usize) -> Self {
        Self {
            v,
            y: BitSet::new(),
            z: BitSet::new(),
            h: BitSet::new(),
        }
    }

    /// Structural well-formedness, independent of whether the criterion holds.
    fn validate(&self, g: &LatentFactorGraph) -> Result<(), CriterionError> {
        let pa = g.pa_observed(self.v);
        if self.y.len() != pa.len() + self.h.len() {
            return Err(CriterionError::MalformedTriple(format!(
                "|Y| = {} but |pa_V(v)| + |H| = {}",
                self.y.len(),
                pa.len() + self.h.len()
            )));
        }
        if self.z.len() != self.h.len() {
            return Err(CriterionError::MalformedTriple(format!(
                "|Z| = {} but |H| = {}",
                self.z.len(),
                self.h.len()
            )));
        }
        if !self.z.is_disjoint(pa) {
            return Err(CriterionError::MalformedTriple("Z meets pa_V(v)".into()));
        }
        let mut excluded = self.z.clone();
        excluded.insert(self.v);
        if !self.y.is_disjoint(&excluded) {
            return Err(CriterionError::MalformedTriple("Y meets Z or v".into()));
        }
        Ok(())
    }
}

/// One half-trek: a directed path from `source`, optionally entered through a
/// latent fork. `rest` holds the directed part; a trivial trek has no fork and
/// an empty `rest`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfTrek {
    pub source: usize,
    pub fork: Option<usize>,
    pub rest: Vec<usize>,
}

impl HalfTrek {
    pub fn target(&self) -> usize {
        self.rest.last().copied().unwrap_or(self.source)
    }

    /// Left side: the source, plus the fork when present.
    fn left(&self) -> (usize, Option<usize>) {
        (self.source, self.fork)
    }

    /// Right side as (latent fork, observed nodes). Without a fork the source
    /// itself belongs to the right side.
    fn right(&self) -> (Option<usize>, BitSet) {
        let mut obs: BitSet = self.rest.iter().copied().collect();
        if self.fork.is_none() {
            obs.insert(self.source);
        }
        (self.fork, obs)
    }
}

/// A system of half-treks with pairwise distinct sources and targets and no
/// sided intersection.
pub type HalfTrekSystem = Vec<HalfTrek>;

/// Checks the sided-intersection invariant of a decoded system directly.
pub fn system_has_no_sided_intersection(system: &HalfTrekSystem) -> bool {
    for (i, a) in system.iter().enumerate() {
        for b in &system[i + 1..] {
            if a.source == b.source || a.target() == b.target() {
                return false;
            }
            let (la, fa) = a.left();
            let (lb, fb) = b.left();
            if la == lb || (fa.is_some() && fa == fb) {
                return false;
            }
            let (ra_f, ra) = a.right();
            let (rb_f, rb) = b.right();
            if (ra_f.is_some() && ra_f == rb_f) || !ra.is_disjoint(&rb) {
                return false;
            }
        }
    }
    true
}

/// Roles of flow-graph nodes, used to decode flow paths back into half-treks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Source,
    Sink,
    Obs(usize),
    Lat(usize),
    ObsPrime(usize),
    LatPrime(usize),
}

/// The flow graph for one `(v, A, Z)` instance, with the node-role table
/// needed to decode unit paths into half-treks.
pub struct FlowGraph {
    net: FlowNetwork,
    roles: Vec<Role>,
    target: u32,
}

impl FlowGraph {
    /// Max-flow value compared against `|pa_V(v)| + |Z|`; on success the
    /// decoded half-trek system is returned.
    pub fn solve(&self) -> Option<HalfTrekSystem> {
        let (value, paths) = self.net.max_flow();
        if value != self.target {
            return None;
        }
        Some(paths.iter().map(|p| self.decode(p)).collect())
    }

    pub fn max_flow_value(&self) -> u32 {
        self.net.max_flow().0
    }

    fn decode(&self, path: &[usize]) -> HalfTrek {
        let mut nodes = path.iter().map(|&n| self.roles[n]);
        assert_eq!(nodes.next(), Some(Role::Source));
        let source = match nodes.next() {
            Some(Role::Obs(y)) => y,
            r => panic!("unexpected role after source: {r:?}"),
        };
        let mut fork = None;
        let mut rest = Vec::new();
        for role in nodes {
            match role {
                Role::Lat(h) => fork = Some(h),
                Role::LatPrime(h) => debug_assert_eq!(fork, Some(h)),
                Role::ObsPrime(w) if w != source || fork.is_some() => rest.push(w),
                Role::ObsPrime(_) | Role::Sink => {}
                r => panic!("unexpected role inside path: {r:?}"),
            }
        }
        HalfTrek { source, fork, rest }
    }
}

/// Builds the flow graph for node `v`, allowed source set `a`, and sink-side
/// set `z`.
///
/// Nodes: the allowed observed nodes and all latent nodes, primed copies of
/// every observed and latent node, and `s`, `t`. Arcs: `s` to each allowed
/// node; allowed node to each of its latent parents; every unprimed node to
/// its primed copy; primed latent to primed child for each latent edge;
/// primed observed to primed observed for each directed edge whose head is
/// outside `z`; primed copies of `pa_V(v)` and `z` to `t`. All nodes except
/// `s`, `t` have capacity one.
pub fn build_flow_graph(
    g: &LatentFactorGraph,
    v: usize,
    a: &BitSet,
    z: &BitSet,
) -> FlowGraph {
    let d = g.num_observed();
    let nl = g.num_latent();
    let mut net = FlowNetwork::new();
    let mut roles = Vec::new();
    let mut add = |net: &mut FlowNetwork, role: Role, cap: NodeCap| {
        let id = net.add_node(cap);
        roles.push(role);
        id
    };
    let s = add(&mut net, Role::Source, NodeCap::Unbounded);
    let t = add(&mut net, Role::Sink, NodeCap::Unbounded);
    let obs: Vec<Option<usize>> = (0..d)
        .map(|w| a.contains(w).then(|| add(&mut net, Role::Obs(w), NodeCap::One)))
        .collect();
    let lat: Vec<usize> = (0..nl).map(|h| add(&mut net, Role::Lat(h), NodeCap::One)).collect();
    let obs_p: Vec<usize> = (0..d).map(|w| add(&mut net, Role::ObsPrime(w), NodeCap::One)).collect();
    let lat_p: Vec<usize> = (0..nl).map(|h| add(&mut net, Role::LatPrime(h), NodeCap::One)).collect();
    net.set_source(s);
    net.set_sink(t);
    for w in a.iter() {
        net.add_arc(s, obs[w].unwrap());
    }
    for w in a.iter() {
        for h in g.pa_lat_of(w).iter() {
            net.add_arc(obs[w].unwrap(), lat[h]);
        }
    }
    for w in a.iter() {
        net.add_arc(obs[w].unwrap(), obs_p[w]);
    }
    for h in 0..nl {
        net.add_arc(lat[h], lat_p[h]);
    }
    for &(h, w) in g.latent_edge_list() {
        net.add_arc(lat_p[h], obs_p[w]);
    }
    for &(u, w) in g.directed_edges() {
        if !z.contains(w) {
            net.add_arc(obs_p[u], obs_p[w]);
        }
    }
    let sinks = g.pa_observed(v).union(z);
    let target = sinks.len() as u32;
    for w in sinks.iter() {
        net.add_arc(obs_p[w], t);
    }
    FlowGraph { net, roles, target }
}

/// Checks a candidate triple against the criterion for `v = triple.v`.
///
/// Returns the decoded half-trek system when the criterion holds, `None` when
/// it fails, and an error only for structurally malformed triples.
pub fn check_triple(
    g: &LatentFactorGraph,
    triple: &HtcTriple,
) -> Result<Option<HalfTrekSystem>, CriterionError> {
    triple.validate(g)?;
    // latent parents shared between Y and Z + v must lie in H
    let mut zv = triple.z.clone();
    zv.insert(triple.v);
    let shared = g.pa_latent(&triple.y).intersection(&g.pa_latent(&zv));
    if !shared.is_subset(&triple.h) {
        return Ok(None);
    }
    Ok(build_flow_graph(g, triple.v, &triple.y, &triple.z).solve())
}

/// How the search for a triple treats previously solved nodes.
#[derive(Debug, Clone, Copy)]
pub enum SearchMode<'a> {
    /// Recursive mode: `Z` is drawn from solved nodes and sources that are
    /// half-trek reachable from `Z + v` must already be solved.
    Solved(&'a BitSet),
    /// Raw single-node decision with no recursion constraints.
    Unrestricted,
}

/// Which latent nodes may enter `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HPool {
    /// Only latent nodes with at least four children; sound by the pruning
    /// argument for the search.
    AtLeastFourChildren,
    /// Every latent node; exponentially larger and used only to validate the
    /// pruning.
    AllLatents,
}

/// Searches for a triple for `v` with `|H| <= k`.
///
/// `H` is iterated by increasing cardinality then lexicographically by node
/// index, `Z` lexicographically, so the first witness found is deterministic.
pub fn find_triple(
    g: &LatentFactorGraph,
    v: usize,
    mode: SearchMode,
    k: usize,
    pool: HPool,
) -> Option<(HtcTriple, HalfTrekSystem)> {
    let candidates: Vec<usize> = (0..g.num_latent())
        .filter(|&h| pool == HPool::AllLatents || g.ch_lat_of(h).len() >= 4)
        .collect();
    let pa_v = g.pa_observed(v);
    for size in 0..=k.min(candidates.len()) {
        for h_sel in candidates.iter().copied().combinations(size) {
            let h: BitSet = h_sel.iter().copied().collect();
            let mut z_pool = g.ch_of_latents(&h);
            if let SearchMode::Solved(solved) = mode {
                z_pool = z_pool.intersection(solved);
            }
            z_pool.remove(v);
            z_pool = z_pool.difference(pa_v);
            let z_pool = z_pool.to_vec();
            if z_pool.len() < size {
                continue;
            }
            for z_sel in z_pool.iter().copied().combinations(size) {
                let z: BitSet = z_sel.iter().copied().collect();
                let mut zv = z.clone();
                zv.insert(v);
                let mut blocked = z.clone();
                blocked.insert(v);
                blocked.union_with(&g.ch_of_latents(&g.pa_latent(&zv).difference(&h)));
                if let SearchMode::Solved(solved) = mode {
                    blocked.union_with(&g.htr(&zv, &h).difference(solved));
                }
                let a = blocked.complement(g.num_observed());
                if a.len() < pa_v.len() + z.len() {
                    continue;
                }
                if let Some(system) = build_flow_graph(g, v, &a, &z).solve() {
                    let y: BitSet = system.iter().map(|t| t.source).collect();
                    return Some((HtcTriple { v, y, z, h }, system));
                }
            }
        }
    }
    None
}

/// One certificate entry: either a node solved trivially (no observed
/// parents) or a witnessing triple with its half-trek system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertEntry {
    Trivial { v: usize },
    Witness { triple: HtcTriple, system: HalfTrekSystem },
}

impl CertEntry {
    pub fn node(&self) -> usize {
        match self {
            CertEntry::Trivial { v } => *v,
            CertEntry::Witness { triple, .. } => triple.v,
        }
    }
}

/// Ordered solve certificate. Every entry's prerequisites (the nodes of `Z`
/// and the half-trek-reachable part of `Y`) appear earlier in the order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Certificate {
    pub entries: Vec<CertEntry>,
}

impl Certificate {
    /// Set of nodes covered by the certificate.
    pub fn covered(&self) -> BitSet {
        self.entries.iter().map(|e| e.node()).collect()
    }

    /// Replays the certificate entry by entry with the prefix as solved set.
    pub fn verify(&self, g: &LatentFactorGraph) -> Result<(), CriterionError> {
        let mut solved = BitSet::new();
        for entry in &self.entries {
            match entry {
                CertEntry::Trivial { v } => {
                    if !g.pa_observed(*v).is_empty() {
                        return Err(CriterionError::MalformedTriple(format!(
                            "node {:?} marked trivial but has observed parents",
                            g.obs_label(*v)
                        )));
                    }
                }
                CertEntry::Witness { triple, .. } => {
                    let mut zv = triple.z.clone();
                    zv.insert(triple.v);
                    let mut prereq = triple.z.clone();
                    prereq.union_with(&triple.y.intersection(&g.htr(&zv, &triple.h)));
                    if !prereq.is_subset(&solved) {
                        return Err(CriterionError::MalformedTriple(format!(
                            "prerequisites of node {:?} not solved earlier",
                            g.obs_label(triple.v)
                        )));
                    }
                    if check_triple(g, triple)?.is_none() {
                        return Err(CriterionError::MalformedTriple(format!(
                            "triple for node {:?} fails the criterion",
                            g.obs_label(triple.v)
                        )));
                    }
                }
            }
            solved.insert(entry.node());
        }
        Ok(())
    }

    pub fn to_json(&self, g: &LatentFactorGraph) -> Value {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|e| match e {
                CertEntry::Trivial { v } => json!({ "v": g.obs_label(*v), "trivial": true }),
                CertEntry::Witness { triple, system } => {
                    let labels = |s: &BitSet| -> Vec<&str> {
                        s.iter().map(|i| g.obs_label(i)).collect()
                    };
                    let sys: Vec<Vec<&str>> = system
                        .iter()
                        .map(|trek| {
                            let mut nodes = vec![g.obs_label(trek.source)];
                            if let Some(h) = trek.fork {
                                nodes.push(g.lat_label(h));
                            }
                            nodes.extend(trek.rest.iter().map(|&w| g.obs_label(w)));
                            nodes
                        })
                        .collect();
                    json!({
                        "v": g.obs_label(triple.v),
                        "Y": labels(&triple.y),
                        "Z": labels(&triple.z),
                        "H": triple.h.iter().map(|h| g.lat_label(h)).collect::<Vec<_>>(),
                        "system": sys,
                    })
                }
            })
            .collect();
        Value::Array(entries)
    }

    pub fn from_json(g: &LatentFactorGraph, v: &Value) -> Result<Self, CriterionError> {
        let arr = v
            .as_array()
            .ok_or_else(|| CriterionError::Json("certificate must be an array".into()))?;
        let obs = |val: &Value| -> Result<usize, CriterionError> {
            let s = val
                .as_str()
                .ok_or_else(|| CriterionError::Json("node labels must be strings".into()))?;
            g.obs_index(s).ok_or_else(|| CriterionError::UnknownNode(s.into()))
        };
        let mut entries = Vec::new();
        for e in arr {
            let v_id = obs(e.get("v").ok_or_else(|| CriterionError::Json("entry without v".into()))?)?;
            if e.get("trivial").and_then(Value::as_bool) == Some(true) {
                entries.push(CertEntry::Trivial { v: v_id });
                continue;
            }
            let set = |key: &str| -> Result<BitSet, CriterionError> {
                match e.get(key) {
                    None => Ok(BitSet::new()),
                    Some(Value::Array(items)) => items.iter().map(&obs).collect(),
                    Some(_) => Err(CriterionError::Json(format!("{key} must be an array"))),
                }
            };
            let y = set("Y")?;
            let z = set("Z")?;
            let h: BitSet = match e.get("H") {
                None => BitSet::new(),
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|val| {
                        let s = val.as_str().ok_or_else(|| {
                            CriterionError::Json("node labels must be strings".into())
                        })?;
                        g.lat_index(s).ok_or_else(|| CriterionError::UnknownNode(s.into()))
                    })
                    .collect::<Result<_, _>>()?,
                Some(_) => return Err(CriterionError::Json("H must be an array".into())),
            };
            let system = match e.get("system") {
                None => Vec::new(),
                Some(Value::Array(treks)) => treks
                    .iter()
                    .map(|trek| {
                        let nodes = trek.as_array().ok_or_else(|| {
                            CriterionError::Json("trek must be an array".into())
                        })?;
                        let mut iter = nodes.iter();
                        let source = obs(iter.next().ok_or_else(|| {
                            CriterionError::Json("empty trek".into())
                        })?)?;
                        let mut fork = None;
                        let mut rest = Vec::new();
                        for val in iter {
                            let s = val.as_str().ok_or_else(|| {
                                CriterionError::Json("node labels must be strings".into())
                            })?;
                            if rest.is_empty() && fork.is_none() {
                                if let Some(h) = g.lat_index(s) {
                                    fork = Some(h);
                                    continue;
                                }
                            }
                            rest.push(
                                g.obs_index(s)
                                    .ok_or_else(|| CriterionError::UnknownNode(s.into()))?,
                            );
                        }
                        Ok(HalfTrek { source, fork, rest })
                    })
                    .collect::<Result<_, _>>()?,
                Some(_) => return Err(CriterionError::Json("system must be an array".into())),
            };
            entries.push(CertEntry::Witness {
                triple: HtcTriple { v: v_id, y, z, h },
                system,
            });
        }
        Ok(Certificate { entries })
    }
}

/// Recursively tests whether every column of the direct-effect matrix is
/// identifiable, searching triples with `|H| <= k`.
///
/// Starts from the nodes without observed parents and adds nodes by repeated
/// passes until a fixpoint. Returns whether all nodes were solved, plus the
/// certificate in solve order (valid for the solved prefix either way).
pub fn lfhtc_identifiable(g: &LatentFactorGraph, k: usize) -> (bool, Certificate) {
    let d = g.num_observed();
    let mut cert = Certificate::default();
    let mut solved = BitSet::new();
    for v in 0..d {
        if g.pa_observed(v).is_empty() {
            solved.insert(v);
            cert.entries.push(CertEntry::Trivial { v });
        }
    }
    loop {
        let mut changed = false;
        for v in 0..d {
            if solved.contains(v) {
                continue;
            }
            if let Some((triple, system)) = find_triple(
                g,
                v,
                SearchMode::Solved(&solved),
                k,
                HPool::AtLeastFourChildren,
            ) {
                solved.insert(v);
                cert.entries.push(CertEntry::Witness { triple, system });
                changed = true;
            }
        }
        if solved.len() == d || !changed {
            break;
        }
    }
    (solved.len() == d, cert)
}

/// Certificate for the mixed-graph criterion: per node, the source set used.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MixedCertificate {
    pub entries: Vec<(usize, BitSet)>,
}

/// The half-trek criterion on a mixed graph, checked recursively.
///
/// For node `v` the source set must avoid `v` and its bidirected neighbors,
/// and sources that are half-trek reachable from `v` must be previously
/// solved. The flow network mirrors the latent-factor one, except that a
/// half-trek may open with a single bidirected step and intersections are
/// only possible at observed nodes.
pub fn htc_identifiable(m: &MixedGraph) -> (bool, MixedCertificate) {
    let d = m.num_observed();
    let mut cert = MixedCertificate::default();
    let mut solved = BitSet::new();
    for v in 0..d {
        if m.pa(v).is_empty() {
            solved.insert(v);
            cert.entries.push((v, BitSet::new()));
        }
    }
    loop {
        let mut changed = false;
        for v in 0..d {
            if solved.contains(v) {
                continue;
            }
            let mut blocked = BitSet::from_iter([v]);
            blocked.union_with(m.sib(v));
            blocked.union_with(&m.htr(&BitSet::from_iter([v])).difference(&solved));
            let a = blocked.complement(d);
            if let Some(y) = htc_flow(m, v, &a) {
                solved.insert(v);
                cert.entries.push((v, y));
                changed = true;
            }
        }
        if solved.len() == d || !changed {
            break;
        }
    }
    (solved.len() == d, cert)
}

/// Max-flow check for the mixed-graph criterion; returns the source set on
/// success.
fn htc_flow(m: &MixedGraph, v: usize, a: &BitSet) -> Option<BitSet> {
    let d = m.num_observed();
    let pa = m.pa(v);
    if a.len() < pa.len() {
        return None;
    }
    let mut net = FlowNetwork::new();
    let s = net.add_node(NodeCap::Unbounded);
    let t = net.add_node(NodeCap::Unbounded);
    let obs: Vec<Option<usize>> = (0..d)
        .map(|w| a.contains(w).then(|| net.add_node(NodeCap::One)))
        .collect();
    let obs_p: Vec<usize> = (0..d).map(|_| net.add_node(NodeCap::One)).collect();
    net.set_source(s);
    net.set_sink(t);
    for w in a.iter() {
        net.add_arc(s, obs[w].unwrap());
        net.add_arc(obs[w].unwrap(), obs_p[w]);
        for x in m.sib(w).iter() {
            net.add_arc(obs[w].unwrap(), obs_p[x]);
        }
    }
    for &(u, w) in m.directed_edges() {
        net.add_arc(obs_p[u], obs_p[w]);
    }
    for w in pa.iter() {
        net.add_arc(obs_p[w], t);
    }
    let (value, paths) = net.max_flow();
    if value as usize != pa.len() {
        return None;
    }
    let id_of = |node: usize| obs.iter().position(|&x| x == Some(node));
    Some(paths.iter().map(|p| id_of(p[1]).expect("path starts at a source node")).collect())
}
