//! Forward parametrization of the covariance model.
//!
//! A parameter set consists of the direct-effect matrix with support on the
//! observed edges, the latent-effect matrix with support on the latent edges,
//! and positive noise variances. The observable covariance matrix is
//! `(I - Lambda)^-T (Omega_diag + Gamma^T Gamma) (I - Lambda)^-1`, computed
//! exactly over rationals. Sampling is deterministic in the seed.

use crate::graph::LatentFactorGraph;
use crate::rational::{primes, Rational};
use crate::rmatrix::{MatrixError, RMatrix};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("I - Lambda is singular")]
    SingularLambda,
    #[error("could not sample regular Lambda after {0} attempts")]
    SamplingExhausted(usize),
    #[error("parameter support violates the graph at ({0}, {1})")]
    SupportViolation(usize, usize),
    #[error("matrix error: {0}")]
    Matrix(#[from] MatrixError),
    #[error("invalid parameter file: {0}")]
    Json(String),
}

/// Sampling flavor for [`sample_params`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Distinct small primes on every free coordinate.
    Primes,
    /// Fractions with numerator and denominator uniform in `1..=97`.
    SmallRationals,
}

/// A point of the parameter space: `(Lambda, Gamma, Omega_diag)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterSet {
    /// `d x d`, support on the directed observed edges.
    pub lambda: RMatrix,
    /// `l x d`, support on the latent edges.
    pub gamma: RMatrix,
    /// Positive diagonal of the noise covariance.
    pub omega_diag: Vec<Rational>,
}

impl ParameterSet {
    /// Validates dimensions, support, and positivity against a graph.
    pub fn validate(&self, g: &LatentFactorGraph) -> Result<(), ModelError> {
        let d = g.num_observed();
        let l = g.num_latent();
        if self.lambda.rows() != d
            || self.lambda.cols() != d
            || self.gamma.rows() != l
            || self.gamma.cols() != d
            || self.omega_diag.len() != d
        {
            return Err(ModelError::Matrix(MatrixError::DimensionMismatch(
                "parameter set does not match graph dimensions".into(),
            )));
        }
        for r in 0..d {
            for c in 0..d {
                if !self.lambda[(r, c)].is_zero() && !g.ch_observed(r).contains(c) {
                    return Err(ModelError::SupportViolation(r, c));
                }
            }
        }
        for h in 0..l {
            for c in 0..d {
                if !self.gamma[(h, c)].is_zero() && !g.ch_lat_of(h).contains(c) {
                    return Err(ModelError::SupportViolation(h, c));
                }
            }
        }
        if self.omega_diag.iter().any(|w| !w.is_positive()) {
            return Err(ModelError::Json("omega_diag entries must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lambda": self.lambda.to_json(),
            "gamma": self.gamma.to_json(),
            "omega_diag": self.omega_diag.iter().map(crate::rmatrix::entry_to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, ModelError> {
        let field = |k: &str| v.get(k).ok_or_else(|| ModelError::Json(format!("missing field {k:?}")));
        let lambda = RMatrix::from_json(field("lambda")?)?;
        let gamma = RMatrix::from_json(field("gamma")?)?;
        let omega_diag = field("omega_diag")?
            .as_array()
            .ok_or_else(|| ModelError::Json("omega_diag must be an array".into()))?
            .iter()
            .map(|e| crate::rmatrix::entry_from_json(e).ok_or_else(|| ModelError::Json("bad omega_diag entry".into())))
            .collect::<Result<_, _>>()?;
        Ok(Self { lambda, gamma, omega_diag })
    }
}

/// Latent covariance matrix `Omega = Omega_diag + Gamma^T Gamma`.
pub fn omega(params: &ParameterSet) -> RMatrix {
    let d = params.lambda.rows();
    let gtg = params.gamma.transpose().mul(&params.gamma).expect("gamma dimensions");
    RMatrix::from_fn(d, d, |r, c| {
        if r == c {
            &gtg[(r, c)] + &params.omega_diag[r]
        } else {
            gtg[(r, c)].clone()
        }
    })
}

fn i_minus_lambda(lambda: &RMatrix) -> RMatrix {
    RMatrix::identity(lambda.rows()).sub(lambda).expect("square")
}

/// Observable covariance matrix
/// `Sigma = (I - Lambda)^-T Omega (I - Lambda)^-1`.
pub fn sigma(params: &ParameterSet) -> Result<RMatrix, ModelError> {
    let m = i_minus_lambda(&params.lambda);
    let n = m.inverse().map_err(|e| match e {
        MatrixError::Singular => ModelError::SingularLambda,
        other => ModelError::Matrix(other),
    })?;
    Ok(n.transpose().mul(&omega(params))?.mul(&n)?)
}

/// Recovers the latent covariance matrix from a covariance matrix and the
/// full direct-effect matrix: `(I - Lambda)^T Sigma (I - Lambda)`.
pub fn omega_from_sigma(sigma: &RMatrix, lambda: &RMatrix) -> Result<RMatrix, ModelError> {
    let m = i_minus_lambda(lambda);
    if m.determinant()?.is_zero() {
        return Err(ModelError::SingularLambda);
    }
    Ok(m.transpose().mul(sigma)?.mul(&m)?)
}

/// Draws a deterministic parameter set with support on the graph.
///
/// `Primes` mode places distinct small primes on the free coordinates of
/// `Lambda` and `Gamma` (edge file order) and on the noise variances (node
/// order); the seed rotates and shuffles the assignment. `SmallRationals`
/// draws fractions from `1..=97`. Either way, a singular `I - Lambda` is
/// rejected and redrawn a bounded number of times.
pub fn sample_params(
    g: &LatentFactorGraph,
    seed: u64,
    mode: SampleMode,
) -> Result<ParameterSet, ModelError> {
    const MAX_ATTEMPTS: usize = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let params = draw(g, &mut rng, mode, seed);
        if !i_minus_lambda(&params.lambda).determinant()?.is_zero() {
            return Ok(params);
        }
    }
    Err(ModelError::SamplingExhausted(MAX_ATTEMPTS))
}

fn draw(g: &LatentFactorGraph, rng: &mut ChaCha8Rng, mode: SampleMode, seed: u64) -> ParameterSet {
    let d = g.num_observed();
    let l = g.num_latent();
    let n_coords = g.directed_edges().len() + g.latent_edge_list().len() + d;
    let mut values: Vec<Rational> = match mode {
        SampleMode::Primes => {
            // rotate the prime table by the seed, then shuffle deterministically
            let offset = (seed % 64) as usize;
            let table = primes(n_coords + offset);
            let mut vals: Vec<Rational> = table[offset..]
                .iter()
                .map(|&p| Rational::from_integer(BigInt::from(p)))
                .collect();
            for i in (1..vals.len()).rev() {
                vals.swap(i, rng.gen_range(0..=i));
            }
            vals
        }
        SampleMode::SmallRationals => (0..n_coords)
            .map(|_| {
                Rational::new(BigInt::from(rng.gen_range(1..=97)), BigInt::from(rng.gen_range(1..=97)))
            })
            .collect(),
    };
    values.reverse(); // pop from the front of the logical order
    let mut next = move || values.pop().expect("enough coordinates drawn");
    let mut lambda = RMatrix::zeros(d, d);
    for &(u, v) in g.directed_edges() {
        lambda[(u, v)] = next();
    }
    let mut gamma = RMatrix::zeros(l, d);
    for &(h, v) in g.latent_edge_list() {
        gamma[(h, v)] = next();
    }
    let omega_diag = (0..d).map(|_| next()).collect();
    ParameterSet { lambda, gamma, omega_diag }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitset::BitSet;
    use crate::rational::{rat, rat_int};

    fn one_factor(directed: &[(usize, usize)]) -> LatentFactorGraph {
        LatentFactorGraph::from_indices(
            5,
            &directed.iter().map(|&(u, v)| (u - 1, v - 1)).collect::<Vec<_>>(),
            &[BitSet::from_iter(0..5)],
        )
        .unwrap()
    }

    fn chain_with_skip() -> LatentFactorGraph {
        one_factor(&[(2, 3), (3, 4), (4, 5), (3, 5)])
    }

    #[test]
    fn omega_without_latent_effects_is_diagonal() {
        let p = ParameterSet {
            lambda: RMatrix::zeros(2, 2),
            gamma: RMatrix::zeros(1, 2),
            omega_diag: vec![rat_int(3), rat_int(5)],
        };
        let w = omega(&p);
        assert_eq!(w[(0, 0)], rat_int(3));
        assert_eq!(w[(1, 1)], rat_int(5));
        assert_eq!(w[(0, 1)], rat_int(0));
    }

    #[test]
    fn omega_one_factor_arithmetic() {
        let mut gamma = RMatrix::zeros(1, 2);
        gamma[(0, 0)] = rat_int(1);
        gamma[(0, 1)] = rat_int(1);
        let p = ParameterSet {
            lambda: RMatrix::zeros(2, 2),
            gamma,
            omega_diag: vec![rat_int(1), rat_int(1)],
        };
        let w = omega(&p);
        assert_eq!(w[(0, 0)], rat_int(2));
        assert_eq!(w[(0, 1)], rat_int(1));
        assert_eq!(w[(1, 0)], rat_int(1));
        assert_eq!(w[(1, 1)], rat_int(2));
    }

    #[test]
    fn omega_offdiagonal_part_has_rank_at_most_latent_count() {
        let g = chain_with_skip();
        for seed in 0..5 {
            let p = sample_params(&g, seed, SampleMode::SmallRationals).unwrap();
            let w = omega(&p);
            let mut low_rank = w.clone();
            for i in 0..5 {
                low_rank[(i, i)] = &w[(i, i)] - &p.omega_diag[i];
            }
            assert!(low_rank.rank() <= g.num_latent());
        }
    }

    #[test]
    fn sigma_equals_omega_without_directed_edges() {
        let g = LatentFactorGraph::from_indices(3, &[], &[BitSet::from_iter(0..3)]).unwrap();
        let p = sample_params(&g, 1, SampleMode::Primes).unwrap();
        assert_eq!(sigma(&p).unwrap(), omega(&p));
    }

    #[test]
    fn sigma_is_symmetric_and_positive_definite() {
        let g = chain_with_skip();
        for seed in [0, 7, 19] {
            let p = sample_params(&g, seed, SampleMode::Primes).unwrap();
            let s = sigma(&p).unwrap();
            assert!(s.is_symmetric());
            assert!(s.is_positive_definite());
        }
    }

    #[test]
    fn regression_ratio_identity_on_source_parent() {
        // T1 -> O1 with T1 a source: Sigma[T1,O1]/Sigma[T1,T1] = lambda
        let g = LatentFactorGraph::new(
            vec!["T1".into(), "O1".into()],
            vec!["L".into()],
            vec![("T1".into(), "O1".into())],
            vec![("L".into(), "O1".into())],
        )
        .unwrap();
        let p = sample_params(&g, 3, SampleMode::SmallRationals).unwrap();
        let s = sigma(&p).unwrap();
        let ratio = &s[(0, 1)] / &s[(0, 0)];
        assert_eq!(ratio, p.lambda[(0, 1)]);
    }

    #[test]
    fn omega_from_sigma_inverts_the_parametrization() {
        let g = chain_with_skip();
        for seed in 0..5 {
            let p = sample_params(&g, seed, SampleMode::SmallRationals).unwrap();
            let s = sigma(&p).unwrap();
            assert_eq!(omega_from_sigma(&s, &p.lambda).unwrap(), omega(&p));
        }
        // Lambda = 0 returns Sigma itself
        let s = RMatrix::identity(5);
        assert_eq!(omega_from_sigma(&s, &RMatrix::zeros(5, 5)).unwrap(), s);
    }

    #[test]
    fn sampling_is_deterministic_and_respects_support() {
        let g = chain_with_skip();
        for mode in [SampleMode::Primes, SampleMode::SmallRationals] {
            let a = sample_params(&g, 42, mode).unwrap();
            let b = sample_params(&g, 42, mode).unwrap();
            assert_eq!(a, b);
            let c = sample_params(&g, 43, mode).unwrap();
            assert_ne!(a, c);
            a.validate(&g).unwrap();
            for r in 0..5 {
                for col in 0..5 {
                    if !g.ch_observed(r).contains(col) {
                        assert!(a.lambda[(r, col)].is_zero());
                    } else {
                        assert!(!a.lambda[(r, col)].is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn primes_mode_assigns_distinct_primes() {
        let g = chain_with_skip();
        let p = sample_params(&g, 0, SampleMode::Primes).unwrap();
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in g.directed_edges() {
            assert!(seen.insert(p.lambda[(u, v)].clone()));
        }
        for &(h, v) in g.latent_edge_list() {
            assert!(seen.insert(p.gamma[(h, v)].clone()));
        }
        for w in &p.omega_diag {
            assert!(seen.insert(w.clone()));
        }
    }

    #[test]
    fn params_json_round_trip() {
        let g = chain_with_skip();
        let p = sample_params(&g, 9, SampleMode::SmallRationals).unwrap();
        let back = ParameterSet::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn singular_lambda_reported() {
        // 2-cycle with lambda12 = lambda21 = 1 makes I - Lambda singular
        let mut lambda = RMatrix::zeros(2, 2);
        lambda[(0, 1)] = rat_int(1);
        lambda[(1, 0)] = rat_int(1);
        let s = RMatrix::identity(2);
        assert_eq!(omega_from_sigma(&s, &lambda), Err(ModelError::SingularLambda));
        let p = ParameterSet {
            lambda,
            gamma: RMatrix::zeros(0, 2),
            omega_diag: vec![rat_int(1), rat_int(1)],
        };
        assert_eq!(sigma(&p), Err(ModelError::SingularLambda));
    }

    #[test]
    fn support_validation_catches_stray_entries() {
        let g = chain_with_skip();
        let mut p = sample_params(&g, 0, SampleMode::Primes).unwrap();
        p.lambda[(0, 1)] = rat(1, 2); // 1 -> 2 is not an edge
        assert_eq!(p.validate(&g), Err(ModelError::SupportViolation(0, 1)));
    }
}
