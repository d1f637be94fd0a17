//! Reduction from CNF satisfiability to a single-node criterion check.
//!
//! Searching a witness triple without a cardinality bound is NP-complete; the
//! construction here maps a CNF formula to a latent-factor graph and a target
//! node such that the formula is satisfiable exactly when the node admits a
//! witness. A brute-force satisfiability oracle validates the reduction.

use crate::criterion::{find_triple, HPool, SearchMode};
use crate::graph::{GraphError, LatentFactorGraph};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("literal {0} out of range for {1} variables")]
    BadLiteral(i32, usize),
    #[error("formula has {0} variables, above the search budget of {1}")]
    Budget(usize, usize),
    #[error("invalid DIMACS input: {0}")]
    Dimacs(String),
    #[error("graph construction failed: {0}")]
    Graph(#[from] GraphError),
}

/// A formula in conjunctive normal form. Clauses hold signed 1-based variable
/// indices; an empty clause is permitted and unsatisfiable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i32>>) -> Result<Self, CnfError> {
        for clause in &clauses {
            for &lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > num_vars {
                    return Err(CnfError::BadLiteral(lit, num_vars));
                }
            }
        }
        Ok(Self { num_vars, clauses })
    }

    /// Parses DIMACS CNF: a `p cnf <vars> <clauses>` header, `c` comment
    /// lines, and zero-terminated clauses.
    pub fn parse_dimacs(text: &str) -> Result<Self, CnfError> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                let mut parts = rest.split_whitespace();
                if parts.next() != Some("cnf") {
                    return Err(CnfError::Dimacs("expected 'p cnf <vars> <clauses>'".into()));
                }
                let vars = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| CnfError::Dimacs("bad variable count".into()))?;
                let n_clauses = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| CnfError::Dimacs("bad clause count".into()))?;
                header = Some((vars, n_clauses));
                continue;
            }
            for tok in line.split_whitespace() {
                let lit: i32 = tok
                    .parse()
                    .map_err(|_| CnfError::Dimacs(format!("bad literal {tok:?}")))?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else {
                    current.push(lit);
                }
            }
        }
        if !current.is_empty() {
            clauses.push(current);
        }
        let Some((vars, declared)) = header else {
            return Err(CnfError::Dimacs("missing 'p cnf' header".into()));
        };
        if clauses.len() != declared {
            return Err(CnfError::Dimacs(format!(
                "declared {declared} clauses, found {}",
                clauses.len()
            )));
        }
        Self::new(vars, clauses)
    }

    /// Exhaustive satisfiability check, bounded to 20 variables.
    pub fn brute_force_sat(&self) -> Result<bool, CnfError> {
        if self.num_vars > 20 {
            return Err(CnfError::Budget(self.num_vars, 20));
        }
        'outer: for assignment in 0u32..1 << self.num_vars {
            for clause in &self.clauses {
                let satisfied = clause.iter().any(|&lit| {
                    let bit = assignment >> (lit.unsigned_abs() - 1) & 1 == 1;
                    if lit > 0 {
                        bit
                    } else {
                        !bit
                    }
                });
                if !satisfied {
                    continue 'outer;
                }
            }
            return Ok(true);
        }
        Ok(false)
    }
}

/// Node and edge counts of [`reduce_cnf`] in closed form:
/// `1 + 2M + sum_i (A_i + B_i + 5)` plus one latent node per pair inside
/// each occurrence cluster.
pub fn reduction_node_count(f: &CnfFormula) -> usize {
    let m = f.clauses.len();
    let mut total = 1 + 2 * m;
    for i in 1..=f.num_vars {
        let (a, b) = occurrence_counts(f, i);
        total += a + b + 5 + (a + 1) * a / 2 + (b + 1) * b / 2;
    }
    total
}

fn occurrence_counts(f: &CnfFormula, var: usize) -> (usize, usize) {
    let mut a = 0;
    let mut b = 0;
    for clause in &f.clauses {
        for &lit in clause {
            if lit.unsigned_abs() as usize == var {
                if lit > 0 {
                    a += 1;
                } else {
                    b += 1;
                }
            }
        }
    }
    (a, b)
}

/// Builds the latent-factor graph of the hardness reduction and returns it
/// with the index of the target node `v`.
///
/// Per clause `k` there is a node `w_k` with `w_k -> v` and a private latent
/// parent shared with `v`. Per variable there are occurrence nodes wired to
/// the clauses containing the corresponding literal, cluster heads, a shared
/// node `q_i`, one latent per polarity covering its cluster plus `q_i` and
/// `v`, and one latent per pair inside each cluster. Inert nodes for
/// zero-occurrence polarities are kept.
pub fn reduce_cnf(f: &CnfFormula) -> Result<(LatentFactorGraph, usize), CnfError> {
    let m = f.clauses.len();
    let mut observed: Vec<String> = vec!["v".into()];
    let mut latent: Vec<String> = Vec::new();
    let mut directed: Vec<(String, String)> = Vec::new();
    let mut latent_edges: Vec<(String, String)> = Vec::new();

    for k in 1..=m {
        let w = format!("w{k}");
        let h = format!("h_w{k}_v");
        observed.push(w.clone());
        latent.push(h.clone());
        directed.push((w.clone(), "v".into()));
        latent_edges.push((h.clone(), w));
        latent_edges.push((h, "v".into()));
    }

    for i in 1..=f.num_vars {
        let (a_i, b_i) = occurrence_counts(f, i);
        let pos_cluster: Vec<String> = (1..=a_i).map(|j| format!("u{i}_{j}")).collect();
        let neg_cluster: Vec<String> = (1..=b_i).map(|j| format!("nu{i}_{j}")).collect();
        let u_head = format!("u{i}");
        let nu_head = format!("nu{i}");
        let q = format!("q{i}");
        observed.extend(pos_cluster.iter().cloned());
        observed.extend(neg_cluster.iter().cloned());
        observed.push(u_head.clone());
        observed.push(nu_head.clone());
        observed.push(q.clone());

        // wire the j-th occurrence, counted left to right across clauses
        let mut pos_seen = 0;
        let mut neg_seen = 0;
        for (k, clause) in f.clauses.iter().enumerate() {
            for &lit in clause {
                if lit.unsigned_abs() as usize != i {
                    continue;
                }
                let w = format!("w{}", k + 1);
                if lit > 0 {
                    directed.push((pos_cluster[pos_seen].clone(), w));
                    pos_seen += 1;
                } else {
                    directed.push((neg_cluster[neg_seen].clone(), w));
                    neg_seen += 1;
                }
            }
        }

        let v_label = "v".to_string();
        let h_pos = format!("h{i}");
        let h_neg = format!("hn{i}");
        latent.push(h_pos.clone());
        latent.push(h_neg.clone());
        for child in pos_cluster.iter().chain([&u_head, &q, &v_label]) {
            latent_edges.push((h_pos.clone(), child.clone()));
        }
        for child in neg_cluster.iter().chain([&nu_head, &q, &v_label]) {
            latent_edges.push((h_neg.clone(), child.clone()));
        }

        // one latent per pair inside each cluster, heads included
        let mut full_pos = vec![u_head.clone()];
        full_pos.extend(pos_cluster.iter().cloned());
        let mut full_neg = vec![nu_head.clone()];
        full_neg.extend(neg_cluster.iter().cloned());
        for cluster in [full_pos, full_neg] {
            for x in 0..cluster.len() {
                for y in x + 1..cluster.len() {
                    let h = format!("h_{}_{}", cluster[x], cluster[y]);
                    latent.push(h.clone());
                    latent_edges.push((h.clone(), cluster[x].clone()));
                    latent_edges.push((h, cluster[y].clone()));
                }
            }
        }
    }

    let g = LatentFactorGraph::new(observed, latent, directed, latent_edges)?;
    let v = g.obs_index("v").expect("target node exists");
    Ok((g, v))
}

/// Search budget: beyond this many variables the subset enumeration in the
/// reduction search is refused.
pub const SAT_VAR_BUDGET: usize = 8;

/// Decides satisfiability through the reduction: build the graph and search
/// a witness triple for the target node with unbounded subset size, latent
/// candidates restricted to nodes with at least four children.
pub fn sat_via_lfhtc(f: &CnfFormula) -> Result<bool, CnfError> {
    if f.num_vars > SAT_VAR_BUDGET {
        return Err(CnfError::Budget(f.num_vars, SAT_VAR_BUDGET));
    }
    let (g, v) = reduce_cnf(f)?;
    let k = g.num_latent();
    Ok(find_triple(&g, v, SearchMode::Unrestricted, k, HPool::AtLeastFourChildren).is_some())
}

/// Convenience wrapper used by tests to compare the two deciders.
pub fn oracle_agree(f: &CnfFormula) -> Result<bool, CnfError> {
    Ok(sat_via_lfhtc(f)? == f.brute_force_sat()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn formula(num_vars: usize, clauses: &[&[i32]]) -> CnfFormula {
        CnfFormula::new(num_vars, clauses.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    /// The reduction example: (x1 or not x1) and (x1 or x2) and (not x1 or x2).
    fn tautology_mix() -> CnfFormula {
        formula(2, &[&[1, -1], &[1, 2], &[-1, 2]])
    }

    #[test]
    fn reduction_matches_hand_construction() {
        let (g, v) = reduce_cnf(&tautology_mix()).unwrap();
        assert_eq!(g.obs_label(v), "v");
        let observed: Vec<&str> = (0..g.num_observed()).map(|i| g.obs_label(i)).collect();
        assert_eq!(
            observed,
            vec![
                "v", "w1", "w2", "w3", "u1_1", "u1_2", "nu1_1", "nu1_2", "u1", "nu1", "q1",
                "u2_1", "u2_2", "u2", "nu2", "q2",
            ]
        );
        // clause latents, polarity latents, pairwise latents
        let latents: Vec<&str> = (0..g.num_latent()).map(|i| g.lat_label(i)).collect();
        assert_eq!(latents.len(), 3 + 4 + 3 + 3 + 3);
        assert!(latents.contains(&"h_w1_v"));
        assert!(latents.contains(&"h1"));
        assert!(latents.contains(&"hn2"));
        assert!(latents.contains(&"h_u1_u1_1"));
        // occurrence wiring
        let dir: Vec<(String, String)> = g
            .directed_edges()
            .iter()
            .map(|&(a, b)| (g.obs_label(a).into(), g.obs_label(b).into()))
            .collect();
        for (a, b) in [
            ("u1_1", "w1"),
            ("u1_2", "w2"),
            ("nu1_1", "w1"),
            ("nu1_2", "w3"),
            ("u2_1", "w2"),
            ("u2_2", "w3"),
            ("w1", "v"),
            ("w2", "v"),
            ("w3", "v"),
        ] {
            assert!(dir.contains(&(a.into(), b.into())), "missing edge {a} -> {b}");
        }
        assert_eq!(dir.len(), 9);
        assert_eq!(g.num_observed() + g.num_latent(), reduction_node_count(&tautology_mix()));
        // full latent wiring
        let children = |label: &str| -> Vec<&str> {
            g.ch_lat_of(g.lat_index(label).unwrap())
                .iter()
                .map(|i| g.obs_label(i))
                .collect()
        };
        assert_eq!(children("h_w1_v"), vec!["v", "w1"]);
        assert_eq!(children("h_w2_v"), vec!["v", "w2"]);
        assert_eq!(children("h_w3_v"), vec!["v", "w3"]);
        assert_eq!(children("h1"), vec!["v", "u1_1", "u1_2", "u1", "q1"]);
        assert_eq!(children("hn1"), vec!["v", "nu1_1", "nu1_2", "nu1", "q1"]);
        assert_eq!(children("h2"), vec!["v", "u2_1", "u2_2", "u2", "q2"]);
        // the negative cluster of x2 is empty: hn2 covers only nu2, q2, v
        assert_eq!(children("hn2"), vec!["v", "nu2", "q2"]);
        for pair in ["h_u1_u1_1", "h_u1_u1_2", "h_u1_1_u1_2", "h_nu1_nu1_1", "h_u2_u2_1"] {
            assert_eq!(children(pair).len(), 2, "pairwise latent {pair}");
        }
    }

    #[test]
    fn reduction_of_empty_formula() {
        let (g, v) = reduce_cnf(&formula(0, &[])).unwrap();
        assert_eq!(g.num_observed(), 1);
        assert_eq!(g.num_latent(), 0);
        assert_eq!(v, 0);
        assert!(sat_via_lfhtc(&formula(0, &[])).unwrap());
    }

    #[test]
    fn reduction_of_single_positive_clause() {
        let f = formula(1, &[&[1]]);
        let (g, _) = reduce_cnf(&f).unwrap();
        let labels: Vec<&str> = (0..g.num_observed()).map(|i| g.obs_label(i)).collect();
        assert_eq!(labels, vec!["v", "w1", "u1_1", "u1", "nu1", "q1"]);
        let latents: Vec<&str> = (0..g.num_latent()).map(|i| g.lat_label(i)).collect();
        assert_eq!(latents, vec!["h_w1_v", "h1", "hn1", "h_u1_u1_1"]);
        let h1 = g.lat_index("h1").unwrap();
        let children: Vec<&str> = g.ch_lat_of(h1).iter().map(|i| g.obs_label(i)).collect();
        assert_eq!(children, vec!["v", "u1_1", "u1", "q1"]);
        assert!(sat_via_lfhtc(&f).unwrap());
    }

    #[test]
    fn node_count_formula_on_random_formulas() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(0..=4);
            let clauses: Vec<Vec<i32>> = (0..m)
                .map(|_| {
                    let mut clause = Vec::new();
                    for v in 1..=n {
                        if rng.gen_bool(0.6) {
                            clause.push(if rng.gen_bool(0.5) { v as i32 } else { -(v as i32) });
                        }
                    }
                    clause
                })
                .collect();
            let f = CnfFormula::new(n, clauses).unwrap();
            let (g, _) = reduce_cnf(&f).unwrap();
            assert_eq!(g.num_observed() + g.num_latent(), reduction_node_count(&f));
        }
    }

    #[test]
    fn sat_examples() {
        assert!(sat_via_lfhtc(&tautology_mix()).unwrap());
        assert!(sat_via_lfhtc(&formula(2, &[&[1, 2]])).unwrap());
        assert!(!sat_via_lfhtc(&formula(1, &[&[1], &[-1]])).unwrap());
        // an empty clause is unsatisfiable by definition
        assert!(!sat_via_lfhtc(&formula(1, &[&[1], &[]])).unwrap());
        assert!(!formula(1, &[&[1], &[]]).brute_force_sat().unwrap());
    }

    #[test]
    fn deciders_agree_on_random_three_variable_formulas() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let m = rng.gen_range(0..=3);
            let clauses: Vec<Vec<i32>> = (0..m)
                .map(|_| {
                    let len = rng.gen_range(0..=3);
                    (0..len)
                        .map(|_| {
                            let v: i32 = rng.gen_range(1..=3);
                            if rng.gen_bool(0.5) {
                                v
                            } else {
                                -v
                            }
                        })
                        .collect()
                })
                .collect();
            let f = CnfFormula::new(3, clauses).unwrap();
            assert!(oracle_agree(&f).unwrap(), "deciders disagree on {f:?}");
        }
    }

    #[test]
    fn budget_errors() {
        let wide = CnfFormula::new(9, vec![vec![1]]).unwrap();
        assert_eq!(sat_via_lfhtc(&wide), Err(CnfError::Budget(9, 8)));
        let huge = CnfFormula::new(21, vec![]).unwrap();
        assert_eq!(huge.brute_force_sat(), Err(CnfError::Budget(21, 20)));
    }

    #[test]
    fn dimacs_parsing() {
        let f = CnfFormula::parse_dimacs("c comment\np cnf 3 2\n1 -2 0\n2 3 0\n").unwrap();
        assert_eq!(f, formula(3, &[&[1, -2], &[2, 3]]));
        let multi_line = CnfFormula::parse_dimacs("p cnf 2 1\n1\n-2 0\n").unwrap();
        assert_eq!(multi_line, formula(2, &[&[1, -2]]));
        assert!(CnfFormula::parse_dimacs("1 2 0").is_err());
        assert!(CnfFormula::parse_dimacs("p cnf 1 2\n1 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("p cnf 1 1\n2 0\n").is_err());
    }

    #[test]
    fn invalid_literals_rejected() {
        assert_eq!(CnfFormula::new(1, vec![vec![0]]), Err(CnfError::BadLiteral(0, 1)));
        assert_eq!(CnfFormula::new(1, vec![vec![2]]), Err(CnfError::BadLiteral(2, 1)));
    }
}
