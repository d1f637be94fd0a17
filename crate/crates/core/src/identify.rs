//! Exact recovery of the direct-effect matrix from a covariance matrix.
//!
//! Each certificate entry for a node `v` yields a square linear system in the
//! unknown column of the direct-effect matrix plus auxiliary coefficients.
//! The system coefficients only read columns of the partially known matrix
//! that the certificate guarantees were solved earlier; an access guard turns
//! that guarantee into a runtime check. All solving is exact.

use crate::bitset::BitSet;
use crate::criterion::{CertEntry, Certificate, HtcTriple};
use crate::graph::LatentFactorGraph;
use crate::model::omega_from_sigma;
use crate::rational::Rational;
use crate::rmatrix::{MatrixError, RMatrix};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentifyError {
    #[error("column {0:?} required before it was solved")]
    MissingColumn(String),
    #[error("non-generic covariance input: singular system at node {0:?}")]
    NonGenericCovariance(String),
    #[error("certificate does not cover node {0:?}")]
    IncompleteCertificate(String),
    #[error("covariance matrix must be symmetric {0}x{0}")]
    BadCovariance(usize),
    #[error("matrix error: {0}")]
    Matrix(#[from] MatrixError),
}

/// Direct-effect matrix under construction, with solved columns tracked.
/// Reading an unsolved column is an error, never a silent zero.
#[derive(Debug, Clone)]
pub struct PartialLambda {
    mat: RMatrix,
    known: BitSet,
}

impl PartialLambda {
    pub fn new(d: usize) -> Self {
        Self { mat: RMatrix::zeros(d, d), known: BitSet::new() }
    }

    pub fn mark_known(&mut self, v: usize) {
        self.known.insert(v);
    }

    pub fn set(&mut self, w: usize, v: usize, value: Rational) {
        self.mat[(w, v)] = value;
    }

    pub fn is_known(&self, v: usize) -> bool {
        self.known.contains(v)
    }

    /// Entry `(w, v)`, guarded on column `v`.
    fn entry(&self, g: &LatentFactorGraph, w: usize, v: usize) -> Result<&Rational, IdentifyError> {
        if !self.known.contains(v) {
            return Err(IdentifyError::MissingColumn(g.obs_label(v).to_string()));
        }
        Ok(&self.mat[(w, v)])
    }

    pub fn into_matrix(self) -> RMatrix {
        self.mat
    }
}

/// The square system `M (lambda_col; psi) = c` for one node.
///
/// Columns are ordered parents-of-`v` first, then the auxiliary block indexed
/// by `Z`. Rows are indexed by `Y` in increasing node order.
#[derive(Debug, Clone)]
pub struct RecoverySystem {
    pub v: usize,
    pub parents: Vec<usize>,
    pub z_nodes: Vec<usize>,
    pub m: RMatrix,
    pub c: RMatrix,
}

/// Assembles the recovery system for one certificate triple.
///
/// For a row node `y` that is half-trek reachable from `Z + v`, coefficients
/// involve the known columns of the direct-effect matrix through
/// `(I - Lambda)^T Sigma` and `(I - Lambda)^T Sigma (I - Lambda)`; otherwise
/// the plain covariance entries suffice. Only columns indexed by `Z` and the
/// reachable part of `Y` are ever read.
pub fn build_system(
    g: &LatentFactorGraph,
    triple: &HtcTriple,
    sigma: &RMatrix,
    known: &PartialLambda,
) -> Result<RecoverySystem, IdentifyError> {
    let v = triple.v;
    let parents = g.pa_observed(v).to_vec();
    let z_nodes = triple.z.to_vec();
    let y_nodes = triple.y.to_vec();
    let n = parents.len();
    let r = z_nodes.len();
    debug_assert_eq!(y_nodes.len(), n + r);

    let mut zv = triple.z.clone();
    zv.insert(v);
    let htr = g.htr(&zv, &triple.h);

    // recursion precondition: columns indexed by Z and the reachable part of
    // Y must have been solved earlier
    let mut required = triple.z.clone();
    required.union_with(&triple.y.intersection(&htr));
    for col in required.iter() {
        if !known.is_known(col) {
            return Err(IdentifyError::MissingColumn(g.obs_label(col).to_string()));
        }
    }

    // [(I - Lambda)^T Sigma]_{y, c} reads column y of Lambda
    let left = |y: usize, col: usize| -> Result<Rational, IdentifyError> {
        let mut acc = sigma[(y, col)].clone();
        for w in g.pa_observed(y).iter() {
            acc -= known.entry(g, w, y)? * &sigma[(w, col)];
        }
        Ok(acc)
    };
    // [X (I - Lambda)]_{., z} reads column z of Lambda, given X rows on demand
    let right = |row: &dyn Fn(usize) -> Result<Rational, IdentifyError>,
                 z: usize|
     -> Result<Rational, IdentifyError> {
        let mut acc = row(z)?;
        for u in g.pa_observed(z).iter() {
            acc -= row(u)? * known.entry(g, u, z)?;
        }
        Ok(acc)
    };

    let mut m = RMatrix::zeros(n + r, n + r);
    let mut c = RMatrix::zeros(n + r, 1);
    for (i, &y) in y_nodes.iter().enumerate() {
        if htr.contains(y) {
            for (j, &p) in parents.iter().enumerate() {
                m[(i, j)] = left(y, p)?;
            }
            for (j, &z) in z_nodes.iter().enumerate() {
                m[(i, n + j)] = right(&|col| left(y, col), z)?;
            }
            c[(i, 0)] = left(y, v)?;
        } else {
            for (j, &p) in parents.iter().enumerate() {
                m[(i, j)] = sigma[(y, p)].clone();
            }
            for (j, &z) in z_nodes.iter().enumerate() {
                m[(i, n + j)] = right(&|col| Ok(sigma[(y, col)].clone()), z)?;
            }
            c[(i, 0)] = sigma[(y, v)].clone();
        }
    }
    Ok(RecoverySystem { v, parents, z_nodes, m, c })
}

/// Solves a recovery system exactly, returning the direct-effect column (in
/// `parents` order) and the auxiliary vector.
pub fn solve_column(
    g: &LatentFactorGraph,
    sys: &RecoverySystem,
) -> Result<(Vec<Rational>, Vec<Rational>), IdentifyError> {
    let n = sys.parents.len();
    if sys.m.rows() == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let x = sys.m.solve(&sys.c).map_err(|e| match e {
        MatrixError::Singular => {
            IdentifyError::NonGenericCovariance(g.obs_label(sys.v).to_string())
        }
        other => IdentifyError::Matrix(other),
    })?;
    let lambda_col = (0..n).map(|i| x[(i, 0)].clone()).collect();
    let psi = (n..sys.m.rows()).map(|i| x[(i, 0)].clone()).collect();
    Ok((lambda_col, psi))
}

/// Recovers the full direct-effect matrix and the latent covariance matrix
/// from a covariance matrix, following the certificate order.
pub fn recover_all(
    g: &LatentFactorGraph,
    cert: &Certificate,
    sigma: &RMatrix,
) -> Result<(RMatrix, RMatrix), IdentifyError> {
    let d = g.num_observed();
    if sigma.rows() != d || sigma.cols() != d || !sigma.is_symmetric() {
        return Err(IdentifyError::BadCovariance(d));
    }
    let covered = cert.covered();
    if let Some(missing) = (0..d).find(|v| !covered.contains(*v)) {
        return Err(IdentifyError::IncompleteCertificate(g.obs_label(missing).to_string()));
    }
    let mut lambda = PartialLambda::new(d);
    for entry in &cert.entries {
        match entry {
            CertEntry::Trivial { v } => {
                debug_assert!(g.pa_observed(*v).is_empty());
                lambda.mark_known(*v);
            }
            CertEntry::Witness { triple, .. } => {
                let sys = build_system(g, triple, sigma, &lambda)?;
                let (col, _psi) = solve_column(g, &sys)?;
                for (&w, value) in sys.parents.iter().zip(col) {
                    lambda.set(w, triple.v, value);
                }
                lambda.mark_known(triple.v);
            }
        }
    }
    let lambda = lambda.into_matrix();
    let omega = omega_from_sigma(sigma, &lambda).map_err(|_| {
        IdentifyError::NonGenericCovariance("omega recovery".into())
    })?;
    Ok((lambda, omega))
}
