//! Latent semantic indexing: rank-k truncated SVD of the TF-IDF
//! term-document matrix by seeded randomized subspace iteration.

use alloc::vec::Vec;

use super::linalg::{jacobi_svd, orthonormalize_columns, CscMatrix, Matrix};
use super::{SemanticError, TopicKind, TopicVector};
use crate::text::{vectorize, Corpus, DocumentId, SparseVector, TfIdfModel};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct SvdOptions {
    /// Extra sampled directions beyond `k`.
    pub oversample: usize,
    pub max_power_iterations: usize,
    /// Stop iterating once no leading singular value moves by more than this
    /// fraction of the largest one.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self { oversample: 10, max_power_iterations: 50, tolerance: 1e-12, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// rows x k, orthonormal columns.
    pub u: Matrix,
    /// Descending.
    pub sigma: Vec<f64>,
    /// cols x k.
    pub v: Matrix,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        us.matmul(&self.v.transpose())
    }
}

/// Range finder `Q` for `a` refined by subspace iteration, followed by an
/// exact SVD of the small projected matrix.
pub fn truncated_svd(a: &CscMatrix, k: usize, opts: &SvdOptions) -> Result<TruncatedSvd, SemanticError> {
    let max_rank = a.rows().min(a.cols());
    if k == 0 || k > max_rank {
        return Err(SemanticError::RankTooLarge { k, max: max_rank });
    }
    let l = (k + opts.oversample).min(max_rank);
    let mut q = a.mul_dense(&Matrix::gaussian(a.cols(), l, opts.seed));
    orthonormalize_columns(&mut q);

    let mut previous: Option<Vec<f64>> = None;
    let mut projected = project(a, &q);
    for _ in 0..opts.max_power_iterations {
        let mut z = a.tmul_dense(&q);
        orthonormalize_columns(&mut z);
        q = a.mul_dense(&z);
        orthonormalize_columns(&mut q);
        projected = project(a, &q);
        let sigma = &projected.1;
        if let Some(prev) = &previous {
            let scale = sigma[0].max(f64::MIN_POSITIVE);
            let moved = sigma[..k].iter().zip(prev).map(|(s, p)| (s - p).abs() / scale).fold(0.0, f64::max);
            if moved <= opts.tolerance {
                break;
            }
        }
        previous = Some(sigma[..k].to_vec());
    }

    // a^T q = u_m diag(sigma) v_m^T, so a ~ (q v_m) diag(sigma) u_m^T.
    let (u_m, mut sigma, v_m) = projected;
    let mut u = q.matmul(&v_m);
    let mut v = u_m;
    u.truncate_cols(k);
    v.truncate_cols(k);
    sigma.truncate(k);
    Ok(TruncatedSvd { u, sigma, v })
}

fn project(a: &CscMatrix, q: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    jacobi_svd(&a.tmul_dense(q))
}

/// Term-topic matrix and singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct LsiModel {
    /// vocabulary x k
    pub u: Matrix,
    pub sigma: Vec<f64>,
}

impl LsiModel {
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// `diag(sigma)^-1 * u^T * x`.
    pub fn fold_in(&self, x: &SparseVector) -> Result<TopicVector, SemanticError> {
        let x: Vec<(usize, f64)> = x.iter().filter(|&(i, _)| i < self.u.rows()).collect();
        if x.is_empty() {
            return Err(SemanticError::NoInferableContent);
        }
        let values = (0..self.k())
            .map(|t| {
                let col = self.u.col(t);
                x.iter().map(|&(i, w)| col[i] * w).sum::<f64>() / self.sigma[t]
            })
            .collect();
        Ok(TopicVector { kind: TopicKind::Lsi, values })
    }
}

#[derive(Debug, Clone)]
pub struct LsiFit {
    pub model: LsiModel,
    /// Training representation of every corpus document, in corpus order.
    pub document_topics: Vec<(DocumentId, TopicVector)>,
}

/// Smallest singular value, relative to the largest, still counted as rank.
const RANK_TOLERANCE: f64 = 1e-10;

pub fn train_lsi(corpus: &Corpus, tfidf: &TfIdfModel, k: usize, opts: &SvdOptions) -> Result<LsiFit, SemanticError> {
    let mut ids = Vec::with_capacity(corpus.len());
    let mut columns = Vec::with_capacity(corpus.len());
    for (id, bag) in corpus.documents() {
        ids.push(id.clone());
        columns.push(vectorize(Some(tfidf), bag));
    }
    let non_empty = columns.iter().filter(|c| !c.is_empty()).count();
    if non_empty < k {
        return Err(SemanticError::TooFewDocuments { needed: k, available: non_empty });
    }
    let a = CscMatrix::from_columns(corpus.vocabulary().len(), columns);
    let svd = truncated_svd(&a, k, opts)?;
    if svd.sigma[k - 1] <= RANK_TOLERANCE * svd.sigma[0] {
        return Err(SemanticError::RankDeficient { k });
    }
    let document_topics = ids
        .into_iter()
        .enumerate()
        .map(|(j, id)| (id, TopicVector { kind: TopicKind::Lsi, values: (0..k).map(|t| svd.v[(j, t)]).collect() }))
        .collect();
    Ok(LsiFit { model: LsiModel { u: svd.u, sigma: svd.sigma }, document_topics })
}
