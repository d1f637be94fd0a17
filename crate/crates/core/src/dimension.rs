//! Jacobian-rank dimension tests.
//!
//! The parametrization of the covariance model factors through the cone of
//! latent covariance matrices. Its image dimension is the generic rank of the
//! Jacobian, which a rank at a random rational point bounds from below; the
//! tests here evaluate exact integer Jacobians at prime-valued points and max
//! over trials. A graph is generically finite-to-one exactly when the image
//! dimension matches the domain dimension.

use crate::graph::{LatentFactorGraph, MixedGraph};
use crate::rational::primes;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimensionError {
    #[error("could not sample a regular point after {0} attempts")]
    SamplingExhausted(usize),
}

/// Verdict of the finite-to-one test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "finite-to-one")]
    FiniteToOne,
    #[serde(rename = "infinite-to-one")]
    InfiniteToOne,
    #[serde(rename = "trivially-infinite")]
    TriviallyInfinite,
}

/// Dimension summary printed by the CLI.
///
/// The ranks are exact at the sampled points and lower-bound the generic
/// dimensions; the trial count records how many points were tried.
#[derive(Debug, Clone, Serialize)]
pub struct DimReport {
    pub dim_im_tau: usize,
    pub dim_theta: usize,
    pub dim_image: usize,
    pub verdict: Verdict,
    pub trials: usize,
}

/// Integer-valued parameter point: primes on every free coordinate.
///
/// Direct-effect coordinates take the smallest primes on purpose: they feed
/// the adjugate of `I - Lambda`, whose magnitude dominates the elimination
/// cost downstream.
struct PrimePoint {
    lambda: Vec<Vec<BigInt>>,
    gamma: Vec<Vec<BigInt>>,
    omega_diag: Vec<BigInt>,
}

fn prime_point(g: &LatentFactorGraph, seed: u64, trial: usize) -> PrimePoint {
    let d = g.num_observed();
    let l = g.num_latent();
    let n_coords = g.directed_edges().len() + g.latent_edge_list().len() + d;
    let offset = (seed % 16) as usize + trial;
    let table = primes(n_coords + offset);
    let mut vals = table[offset..].iter().map(|&p| BigInt::from(p));
    let mut lambda = vec![vec![BigInt::zero(); d]; d];
    for &(u, v) in g.directed_edges() {
        lambda[u][v] = vals.next().unwrap();
    }
    let mut gamma = vec![vec![BigInt::zero(); d]; l];
    for &(h, v) in g.latent_edge_list() {
        gamma[h][v] = vals.next().unwrap();
    }
    let omega_diag = (0..d).map(|_| vals.next().unwrap()).collect();
    PrimePoint { lambda, gamma, omega_diag }
}

/// Upper-triangle row index set for symmetric matrices.
fn upper_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for a in 0..d {
        for b in a..d {
            out.push((a, b));
        }
    }
    out
}

/// Jacobian of `(Gamma, Omega_diag) -> Omega_diag + Gamma^T Gamma`,
/// vectorized over the upper triangle. Column order: noise variances first,
/// then latent edges.
fn tau_jacobian(g: &LatentFactorGraph, point: &PrimePoint) -> Vec<Vec<BigInt>> {
    let d = g.num_observed();
    let pairs = upper_pairs(d);
    pairs
        .iter()
        .map(|&(a, b)| {
            let mut row = Vec::with_capacity(d + g.latent_edge_list().len());
            for v in 0..d {
                row.push(if a == v && b == v { BigInt::one() } else { BigInt::zero() });
            }
            for &(h, v) in g.latent_edge_list() {
                let mut e = BigInt::zero();
                if a == v {
                    e += &point.gamma[h][b];
                }
                if b == v {
                    e += &point.gamma[h][a];
                }
                row.push(e);
            }
            row
        })
        .collect()
}

/// Adjugate of an integer matrix by cofactor expansion; the inverse times the
/// determinant, still integer.
fn adjugate(m: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = m.len();
    if n == 0 {
        return Vec::new();
    }
    let minor = |skip_r: usize, skip_c: usize| -> Vec<Vec<BigInt>> {
        (0..n)
            .filter(|&r| r != skip_r)
            .map(|r| {
                (0..n)
                    .filter(|&c| c != skip_c)
                    .map(|c| m[r][c].clone())
                    .collect()
            })
            .collect()
    };
    (0..n)
        .map(|c| {
            (0..n)
                .map(|r| {
                    let cof = crate::rational::integer_determinant(minor(r, c));
                    if (r + c) % 2 == 0 {
                        cof
                    } else {
                        -cof
                    }
                })
                .collect()
        })
        .collect()
}

/// Jacobian of the full parametrization `(Lambda, Gamma, Omega_diag) -> Sigma`
/// at an integer point, with columns scaled by powers of `det(I - Lambda)` so
/// that everything stays integer. Column scaling preserves rank.
///
/// With `N = (I - Lambda)^-1`, the differentials are
/// `dSigma = dN^T Omega N + N^T dOmega N + N^T Omega dN` and
/// `dN = N dLambda N`; substituting the adjugate for `N` clears denominators.
/// Column order: noise variances, latent edges, directed edges.
fn full_jacobian(
    g: &LatentFactorGraph,
    point: &PrimePoint,
) -> Result<Vec<Vec<BigInt>>, DimensionError> {
    let d = g.num_observed();
    // I - Lambda and its adjugate
    let i_minus: Vec<Vec<BigInt>> = (0..d)
        .map(|r| {
            (0..d)
                .map(|c| {
                    let base = if r == c { BigInt::one() } else { BigInt::zero() };
                    base - &point.lambda[r][c]
                })
                .collect()
        })
        .collect();
    let adj = adjugate(&i_minus);
    // omega and t = adj^T omega adj (a determinant-squared multiple of sigma)
    let mut omega = vec![vec![BigInt::zero(); d]; d];
    for a in 0..d {
        for b in 0..d {
            let mut e = if a == b { point.omega_diag[a].clone() } else { BigInt::zero() };
            for row in &point.gamma {
                e += &row[a] * &row[b];
            }
            omega[a][b] = e;
        }
    }
    let mut t = vec![vec![BigInt::zero(); d]; d];
    for a in 0..d {
        for b in 0..d {
            let mut e = BigInt::zero();
            for c in 0..d {
                let mut inner = BigInt::zero();
                for x in 0..d {
                    inner += &omega[c][x] * &adj[x][b];
                }
                e += &adj[c][a] * inner;
            }
            t[a][b] = e;
        }
    }
    // gamma rows times adjugate
    let gamma_adj: Vec<Vec<BigInt>> = point
        .gamma
        .iter()
        .map(|row| {
            (0..d)
                .map(|b| (0..d).map(|x| &row[x] * &adj[x][b]).sum())
                .collect()
        })
        .collect();
    let cols = d + g.latent_edge_list().len() + g.directed_edges().len();
    let jac = upper_pairs(d)
        .into_iter()
        .map(|(a, b)| {
            let mut row = Vec::with_capacity(cols);
            for adj_v in &adj {
                row.push(&adj_v[a] * &adj_v[b]);
            }
            for &(h, v) in g.latent_edge_list() {
                row.push(&adj[v][a] * &gamma_adj[h][b] + &gamma_adj[h][a] * &adj[v][b]);
            }
            for &(w, v) in g.directed_edges() {
                row.push(&adj[v][a] * &t[w][b] + &t[a][w] * &adj[v][b]);
            }
            row
        })
        .collect();
    Ok(jac)
}

fn det_is_zero(g: &LatentFactorGraph, point: &PrimePoint) -> bool {
    let d = g.num_observed();
    let m: Vec<Vec<BigInt>> = (0..d)
        .map(|r| {
            (0..d)
                .map(|c| {
                    let base = if r == c { BigInt::one() } else { BigInt::zero() };
                    base - &point.lambda[r][c]
                })
                .collect()
        })
        .collect();
    crate::rational::integer_determinant(m).is_zero()
}

const MAX_REDRAWS: usize = 32;

/// Draws a prime point with invertible `I - Lambda`, shifting the prime table
/// on failure.
fn regular_prime_point(
    g: &LatentFactorGraph,
    seed: u64,
    trial: usize,
) -> Result<PrimePoint, DimensionError> {
    for attempt in 0..MAX_REDRAWS {
        let p = prime_point(g, seed, trial + attempt * 7);
        if !det_is_zero(g, &p) {
            return Ok(p);
        }
    }
    Err(DimensionError::SamplingExhausted(MAX_REDRAWS))
}

/// Dimension of the cone of latent covariance matrices: max over trials of
/// the exact Jacobian rank at prime points.
pub fn dim_im_tau(g: &LatentFactorGraph, seed: u64, trials: usize) -> usize {
    let mut best = 0;
    for trial in 0..trials.max(1) {
        let point = prime_point(g, seed, trial);
        best = best.max(crate::rational::integer_rank(tau_jacobian(g, &point)));
    }
    best
}

/// Parameter-count comparison: the graph is generically infinite-to-one
/// whenever the domain dimension exceeds the dimension of the cone of
/// symmetric matrices.
pub fn is_trivially_infinite(g: &LatentFactorGraph, seed: u64) -> bool {
    let d = g.num_observed();
    g.directed_edges().len() + dim_im_tau(g, seed, 3) > d * (d + 1) / 2
}

/// Decides generically finite-to-one by comparing the image dimension
/// against the domain dimension `|D_V| + dim Im(tau)`.
pub fn is_finite_to_one(
    g: &LatentFactorGraph,
    seed: u64,
    trials: usize,
) -> Result<Verdict, DimensionError> {
    Ok(report_inner(g, seed, trials, false)?.verdict)
}

/// Full dimension report, as printed by the CLI.
pub fn dim_report(g: &LatentFactorGraph, seed: u64, trials: usize) -> Result<DimReport, DimensionError> {
    report_inner(g, seed, trials, true)
}

fn report_inner(
    g: &LatentFactorGraph,
    seed: u64,
    trials: usize,
    exact_image: bool,
) -> Result<DimReport, DimensionError> {
    let trials = trials.max(1);
    let d = g.num_observed();
    let mut tau_trials = trials;
    let mut dim_tau = dim_im_tau(g, seed, tau_trials);
    let mut dim_image = 0;
    loop {
        let dim_theta = g.directed_edges().len() + dim_tau;
        // one extra pivot distinguishes "image fills the domain" from an
        // undercounted tau rank
        let stop = if exact_image { usize::MAX } else { dim_theta + 1 };
        for trial in 0..trials {
            if !exact_image && dim_image >= dim_theta {
                break;
            }
            let point = regular_prime_point(g, seed ^ 0x9e37, trial)?;
            let jac = full_jacobian(g, &point)?;
            dim_image = dim_image.max(integer_rank_capped(jac, stop));
        }
        if dim_image > dim_theta {
            // the image certifies a larger domain than the tau trials found
            tau_trials *= 2;
            let better = dim_im_tau(g, seed, tau_trials);
            debug_assert!(better > dim_tau, "image rank exceeded the domain dimension");
            if better == dim_tau {
                break; // give up rather than loop; report as-is
            }
            dim_tau = better;
            continue;
        }
        break;
    }
    let dim_theta = g.directed_edges().len() + dim_tau;
    let verdict = if dim_theta > d * (d + 1) / 2 {
        Verdict::TriviallyInfinite
    } else if dim_image == dim_theta {
        Verdict::FiniteToOne
    } else {
        Verdict::InfiniteToOne
    };
    debug_assert!(dim_image <= dim_theta.min(d * (d + 1) / 2));
    Ok(DimReport { dim_im_tau: dim_tau, dim_theta, dim_image, verdict, trials })
}

/// Bareiss rank that may stop once `stop` pivots are found.
fn integer_rank_capped(mut m: Vec<Vec<BigInt>>, stop: usize) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut rank = 0;
    let mut prev = BigInt::one();
    let mut col = 0;
    while rank < rows && col < cols && rank < stop {
        let Some(pr) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            col += 1;
            continue;
        };
        m.swap(rank, pr);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                let num = &m[rank][col] * &m[r][c] - &m[r][col] * &m[rank][c];
                m[r][c] = num / &prev;
            }
            m[r][col] = BigInt::zero();
        }
        prev = m[rank][col].clone();
        rank += 1;
        col += 1;
    }
    rank
}

/// Parameter-count test for a mixed graph: directed edges plus noise
/// variances plus bidirected edges against the covariance dimension.
pub fn mixed_trivially_infinite(m: &MixedGraph) -> bool {
    let d = m.num_observed();
    m.directed_edges().len() + d + m.bidirected_edges().len() > d * (d + 1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitset::BitSet;

    fn one_factor(d: usize, directed: &[(usize, usize)]) -> LatentFactorGraph {
        LatentFactorGraph::from_indices(
            d,
            &directed.iter().map(|&(u, v)| (u - 1, v - 1)).collect::<Vec<_>>(),
            &[BitSet::from_iter(0..d)],
        )
        .unwrap()
    }

    #[test]
    fn tau_dimension_of_one_factor_models() {
        // single factor over five nodes: latent edges + diagonal = 10
        let g = one_factor(5, &[(1, 2), (2, 3), (3, 4), (4, 5), (1, 3), (3, 5)]);
        assert_eq!(dim_im_tau(&g, 0, 3), 10);
        // no latent nodes: diagonal embedding only
        let bare = LatentFactorGraph::from_indices(4, &[(0, 1)], &[]).unwrap();
        assert_eq!(dim_im_tau(&bare, 0, 1), 4);
    }

    #[test]
    fn tau_dimension_with_overlapping_factors() {
        // three factors over five nodes: 8 latent edges + 5 variances but
        // dimension drops to 11
        let g = LatentFactorGraph::from_indices(
            5,
            &[(3, 4), (2, 4)],
            &[
                BitSet::from_iter([0, 1, 2, 3]),
                BitSet::from_iter([3, 4]),
                BitSet::from_iter([2, 4]),
            ],
        )
        .unwrap();
        assert_eq!(dim_im_tau(&g, 0, 3), 11);
    }

    #[test]
    fn tau_dimension_bounded_by_parameter_count() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let d = rng.gen_range(1..=5);
            let nl = rng.gen_range(0..=3);
            let latent: Vec<BitSet> = (0..nl)
                .map(|_| {
                    let mut s: BitSet = (0..d).filter(|_| rng.gen_bool(0.5)).collect();
                    s.insert(rng.gen_range(0..d));
                    s
                })
                .collect();
            let g = LatentFactorGraph::from_indices(d, &[], &latent).unwrap();
            let tau = dim_im_tau(&g, 7, 3);
            assert!(tau <= d * (d + 1) / 2);
            assert!(tau <= g.latent_edge_list().len() + d);
        }
    }

    #[test]
    fn trivially_infinite_by_edge_count() {
        // six observed edges on a full one-factor model: 6 + 10 > 15
        let g = one_factor(5, &[(1, 2), (2, 3), (3, 4), (4, 5), (1, 3), (3, 5)]);
        assert!(is_trivially_infinite(&g, 0));
        // four edges: 4 + 10 <= 15
        let g = one_factor(5, &[(2, 3), (3, 4), (4, 5), (3, 5)]);
        assert!(!is_trivially_infinite(&g, 0));
        let empty = LatentFactorGraph::from_indices(3, &[], &[]).unwrap();
        assert!(!is_trivially_infinite(&empty, 0));
    }

    #[test]
    fn finite_to_one_trichotomy() {
        let chain_skip = one_factor(5, &[(2, 3), (3, 4), (4, 5), (3, 5)]);
        assert_eq!(is_finite_to_one(&chain_skip, 0, 3).unwrap(), Verdict::FiniteToOne);
        let collider = one_factor(5, &[(1, 3), (2, 3), (3, 4), (4, 5)]);
        assert_eq!(is_finite_to_one(&collider, 0, 3).unwrap(), Verdict::FiniteToOne);
        let split = one_factor(5, &[(1, 2), (3, 4), (4, 5), (3, 5)]);
        assert_eq!(is_finite_to_one(&split, 0, 3).unwrap(), Verdict::InfiniteToOne);
    }

    #[test]
    fn report_is_consistent() {
        let g = one_factor(5, &[(2, 3), (3, 4), (4, 5), (3, 5)]);
        let rep = dim_report(&g, 0, 3).unwrap();
        assert_eq!(rep.dim_im_tau, 10);
        assert_eq!(rep.dim_theta, 14);
        assert_eq!(rep.dim_image, 14);
        assert_eq!(rep.verdict, Verdict::FiniteToOne);
        assert!(rep.dim_image <= rep.dim_theta.min(15));
    }

    #[test]
    fn cyclic_graph_dimensions() {
        // two-cycle under a factor over both nodes: three covariance degrees
        // of freedom cannot carry five parameters
        let g = LatentFactorGraph::from_indices(
            2,
            &[(0, 1), (1, 0)],
            &[BitSet::from_iter(0..2)],
        )
        .unwrap();
        assert_eq!(dim_im_tau(&g, 0, 3), 3);
        let rep = dim_report(&g, 0, 3).unwrap();
        assert_eq!(rep.verdict, Verdict::TriviallyInfinite);
        assert_eq!(rep.dim_theta, 5);
    }

    #[test]
    fn rank_stabilizes_across_trials() {
        let g = one_factor(5, &[(1, 2), (3, 4), (4, 5), (3, 5)]);
        let r3 = dim_report(&g, 1, 3).unwrap();
        let r6 = dim_report(&g, 1, 6).unwrap();
        assert_eq!(r3.dim_image, r6.dim_image);
        assert_eq!(r3.dim_im_tau, r6.dim_im_tau);
    }

    #[test]
    fn identifiable_graphs_are_finite_to_one() {
        use crate::criterion::lfhtc_identifiable;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let mut hits = 0;
        for iter in 0..40 {
            let d = rng.gen_range(2..=5);
            let mut directed = Vec::new();
            for u in 0..d {
                for v in u + 1..d {
                    if rng.gen_bool(0.4) {
                        directed.push((u, v));
                    }
                }
            }
            let latent = vec![BitSet::from_iter(0..d)];
            let g = LatentFactorGraph::from_indices(d, &directed, &latent).unwrap();
            if lfhtc_identifiable(&g, 2).0 {
                hits += 1;
                assert_eq!(
                    is_finite_to_one(&g, iter, 3).unwrap(),
                    Verdict::FiniteToOne,
                    "identifiable graph classified infinite: {g:?}"
                );
            }
        }
        assert!(hits > 5);
    }

    #[test]
    fn mixed_parameter_count_test() {
        // complete bidirected graph over five nodes plus four directed edges
        let g = one_factor(5, &[(2, 3), (3, 4), (4, 5), (3, 5)]);
        assert!(mixed_trivially_infinite(&g.latent_projection()));
        // sparse projection stays under the bound
        let sparse = LatentFactorGraph::from_indices(
            5,
            &[(1, 2), (2, 3), (3, 4), (2, 4)],
            &[BitSet::from_iter([0, 2, 3])],
        )
        .unwrap();
        assert!(!mixed_trivially_infinite(&sparse.latent_projection()));
        let empty = MixedGraph::new(vec!["a".into(), "b".into()], vec![], vec![]).unwrap();
        assert!(!mixed_trivially_infinite(&empty));
    }
}
