//! Finite-dimensional subspaces of truncated `LCⁿ`.
//!
//! Subspaces are carried as orthonormal frames of [`TruncatedLoop`] columns.
//! All cross-Gram computations run over the union of the operands' bands
//! (after any shift), so nothing is dropped at the top of a truncation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{union_band, TruncatedLoop};
use crate::linalg::{self, CMatrix, CVector, C64};

/// Residual norm below which a vector is treated as dependent.
pub const DROP_TOL: f64 = 1e-10;
/// Relative singular-value cutoff for the `W ∩ zW⊥` null space.
pub const NULL_CUTOFF: f64 = 1e-9;
/// Smallest admissible Gram singular value of a filtration frame.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubspaceFrame {
    n: usize,
    columns: Vec<TruncatedLoop>,
}

impl SubspaceFrame {
    pub fn empty(n: usize) -> Self {
        Self { n, columns: Vec::new() }
    }

    /// Wraps columns that the caller guarantees are orthonormal.
    pub fn from_orthonormal(n: usize, columns: Vec<TruncatedLoop>) -> Result<Self> {
        if let Some(c) = columns.iter().find(|c| c.n() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: c.n() });
        }
        Ok(Self { n, columns })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[TruncatedLoop] {
        &self.columns
    }

    pub fn band(&self) -> Option<(i64, i64)> {
        union_band(&self.columns)
    }

    pub fn gram(&self) -> CMatrix {
        cross_gram(&self.columns, &self.columns)
    }

    /// `‖G − I‖_max` for the Gram matrix of the columns.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.dim();
        let g = self.gram() - CMatrix::identity(k, k);
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Norm of the component of `v` orthogonal to this subspace.
    pub fn residual(&self, v: &TruncatedLoop) -> Result<f64> {
        let mut r = v.clone();
        for c in &self.columns {
            let p = c.inner_product(&r)?;
            r = &r - &c.scale(p);
        }
        Ok(r.norm())
    }

    /// `Σ_j coeffs[j] · columns[j]`.
    pub fn combine(&self, coeffs: &[C64]) -> TruncatedLoop {
        let mut acc = TruncatedLoop::zero(self.n);
        for (c, w) in coeffs.iter().zip(&self.columns) {
            acc = &acc + &w.scale(*c);
        }
        acc
    }
}

/// `G[i][j] = (a_i, b_j)`.
pub fn cross_gram(a: &[TruncatedLoop], b: &[TruncatedLoop]) -> CMatrix {
    CMatrix::from_fn(a.len(), b.len(), |i, j| {
        a[i].inner_product(&b[j]).expect("frames share fiber dimension")
    })
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
///
/// Vectors whose residual after projection has norm below [`DROP_TOL`] are
/// dropped; the rank is the dimension of the returned frame.
pub fn orthonormalize(vectors: &[TruncatedLoop]) -> Result<SubspaceFrame> {
    let first = vectors.first().ok_or(Error::Empty("vector list"))?;
    let n = first.n();
    if let Some(v) = vectors.iter().find(|v| v.n() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: v.n() });
    }
    let Some((kmin, kmax)) = union_band(vectors) else {
        return Err(Error::AllZero);
    };
    if vectors.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::AllZero);
    }
    let mut basis: Vec<CVector> = Vec::new();
    for v in vectors {
        let mut r = v.to_dense(kmin, kmax);
        for _ in 0..2 {
            for q in &basis {
                let p = q.dotc(&r);
                r.axpy(-p, q, C64::new(1.0, 0.0));
            }
        }
        let norm = r.norm();
        if norm >= DROP_TOL {
            basis.push(r / C64::new(norm, 0.0));
        }
    }
    if basis.is_empty() {
        return Err(Error::AllZero);
    }
    let columns = basis.iter().map(|q| TruncatedLoop::from_dense(n, kmin, q)).collect();
    Ok(SubspaceFrame { n, columns })
}

/// Generators `g_1..g_n` and a depth `P`; spans `{z^p g_j : 0 ≤ p ≤ P}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiltrationSubspace {
    pub generators: Vec<TruncatedLoop>,
    pub depth: usize,
}

impl FiltrationSubspace {
    pub fn new(generators: Vec<TruncatedLoop>, depth: usize) -> Result<Self> {
        let f = Self { generators, depth };
        f.n()?;
        Ok(f)
    }

    /// Truncated `L₊Cⁿ`: generators `e_1..e_n`.
    pub fn hardy(n: usize, depth: usize) -> Self {
        Self { generators: (0..n).map(|j| TruncatedLoop::basis(n, j)).collect(), depth }
    }

    /// Fiber dimension; also checks there are exactly `n` generators of that dimension.
    pub fn n(&self) -> Result<usize> {
        let first = self.generators.first().ok_or(Error::Empty("filtration generators"))?;
        let n = first.n();
        if let Some(g) = self.generators.iter().find(|g| g.n() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: g.n() });
        }
        if self.generators.len() != n {
            return Err(Error::InvalidInput(format!(
                "a filtration in LC^{n} needs {n} generators, found {}",
                self.generators.len()
            )));
        }
        Ok(n)
    }

    pub fn with_depth(&self, depth: usize) -> Self {
        Self { generators: self.generators.clone(), depth }
    }

    /// `z^p · self` (generators shifted, same depth).
    pub fn shifted(&self, p: i64) -> Self {
        Self { generators: self.generators.iter().map(|g| g.shift(p)).collect(), depth: self.depth }
    }

    fn spanning_vectors(&self) -> Vec<TruncatedLoop> {
        (0..=self.depth as i64)
            .flat_map(|p| self.generators.iter().map(move |g| g.shift(p)))
            .collect()
    }
}

/// Orthonormal frame for `span{z^p g_j : 0 ≤ p ≤ depth}`, of dimension `n(depth + 1)`.
pub fn expand_filtration(f: &FiltrationSubspace) -> Result<SubspaceFrame> {
    f.n()?;
    let vectors = f.spanning_vectors();
    let sv = linalg::singular_values(&cross_gram(&vectors, &vectors));
    let min_singular = sv.last().copied().unwrap_or(0.0);
    if min_singular <= RANK_TOL {
        return Err(Error::RankDeficient { min_singular });
    }
    let frame = orthonormalize(&vectors)?;
    if frame.dim() != vectors.len() {
        return Err(Error::RankDeficient { min_singular });
    }
    Ok(frame)
}

/// Orthonormal frame for `W ∩ (zW)⊥`.
///
/// With `M[i][j] = (z w_i, w_j)`, a combination `Σ c_j w_j` is orthogonal to
/// all of `zW` exactly when `M c = 0`.
pub fn intersect_shift_complement(w: &SubspaceFrame) -> SubspaceFrame {
    if w.dim() == 0 {
        return SubspaceFrame::empty(w.n);
    }
    let shifted: Vec<TruncatedLoop> = w.columns.iter().map(|c| c.shift(1)).collect();
    let m = cross_gram(&shifted, &w.columns);
    let null = linalg::null_space(&m, NULL_CUTOFF);
    let columns = null
        .column_iter()
        .map(|c| w.combine(c.as_slice()))
        .collect();
    SubspaceFrame { n: w.n, columns }
}

/// Cosines of the principal angles between two subspaces, descending.
pub fn principal_angles(a: &SubspaceFrame, b: &SubspaceFrame) -> Result<Vec<f64>> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch { expected: a.n, found: b.n });
    }
    let g = cross_gram(&a.columns, &b.columns);
    Ok(linalg::singular_values(&g).into_iter().map(|s| s.clamp(0.0, 1.0)).collect())
}
