//! Complex dense linear-algebra kernels shared by all detectors: wide
//! pseudoinverse, orthogonal-complement projectors, dominant eigenvectors of
//! Hermitian matrices, and single power-iteration subspace updates.
//!
//! All operations are pure; values are safe to share across threads
//! read-only.

mod cmat;
mod decomp;

pub use cmat::CMat;

use crate::error::{Error, Result};
use crate::scalar::{czero, Scalar, C};
use decomp::{hermitian_eig, Cholesky};

/// Unit-norm complex vector (`| ||v|| - 1 |` within spec tolerance).
#[derive(Clone, Debug, PartialEq)]
pub struct UnitVec<T> {
    entries: Vec<C<T>>,
}

impl<T: Scalar> UnitVec<T> {
    /// Wraps a vector that is already unit norm.
    pub fn new(entries: Vec<C<T>>) -> Result<Self> {
        let norm = l2_norm(&entries);
        if (norm - T::one()).abs() > T::spec_tol(1e-12) {
            return Err(Error::ShapeError(format!("vector norm {norm} is not 1")));
        }
        Ok(Self { entries })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(entries: &[C<T>]) -> Result<Self> {
        let norm = l2_norm(entries);
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::NonFinite(format!("cannot normalize vector of norm {norm}")));
        }
        Ok(Self { entries: entries.iter().map(|&z| z / norm).collect() })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.entries
    }

    /// `|<self, other>|` with `other` normalized; 1 means collinear.
    pub fn alignment(&self, other: &[C<T>]) -> T {
        let n = l2_norm(other);
        let dot: C<T> =
            self.entries.iter().zip(other).map(|(&a, &b)| a.conj() * b).sum();
        dot.norm() / n
    }

    /// Angle in radians to another unit vector, ignoring phase.
    pub fn angle_to(&self, other: &UnitVec<T>) -> T {
        let a = self.alignment(other.as_slice()).min(T::one());
        a.acos()
    }
}

fn l2_norm<T: Scalar>(v: &[C<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Rotates `v` so its first entry of non-negligible magnitude becomes real
/// non-negative. Eigenvectors are unique only up to phase; this pins one
/// representative so results are deterministic.
fn fix_phase<T: Scalar>(v: &mut [C<T>]) {
    let max = v.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    if max.is_zero() {
        return;
    }
    let thresh = max * T::c(1e-9);
    if let Some(anchor) = v.iter().find(|z| z.norm() > thresh) {
        let phase = anchor.conj() / anchor.norm();
        for z in v.iter_mut() {
            *z = *z * phase;
        }
    }
}

/// Moore-Penrose pseudoinverse of a wide full-row-rank matrix:
/// `S^H (S S^H)^{-1}`.
///
/// `S` must be U x K with K >= U; a numerically singular Gram matrix yields
/// [`Error::RankDeficient`].
pub fn pinv_wide<T: Scalar>(s: &CMat<T>) -> Result<CMat<T>> {
    pinv_wide_guarded(s, None)
}

/// [`pinv_wide`] with an optional conditioning guard: when the Gram matrix's
/// condition proxy exceeds `limit`, a ridge of `rel * trace` is added before
/// inversion (and on outright factorization failure the ridge is tried once).
pub fn pinv_wide_guarded<T: Scalar>(s: &CMat<T>, guard: Option<(T, T)>) -> Result<CMat<T>> {
    if s.rows() > s.cols() {
        return Err(Error::ShapeError(format!(
            "pinv_wide expects a wide matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let gram = s.matmul(&s.herm());
    let chol = match (Cholesky::factor(&gram), guard) {
        (Ok(ch), Some((limit, rel))) if ch.cond_proxy() > limit => {
            Cholesky::factor(&ridged(&gram, rel))?
        }
        (Ok(ch), _) => ch,
        (Err(_), Some((_, rel))) => Cholesky::factor(&ridged(&gram, rel))?,
        (Err(e), None) => return Err(e),
    };
    // pinv = S^H G^{-1} = (G^{-1} S)^H since G is Hermitian.
    Ok(chol.solve(s).herm())
}

fn ridged<T: Scalar>(gram: &CMat<T>, rel: T) -> CMat<T> {
    let ridge = gram.trace_re() * rel;
    let mut g = gram.clone();
    for i in 0..g.rows() {
        g[(i, i)] = g[(i, i)] + C::new(ridge, T::zero());
    }
    g
}

/// Projector onto the orthogonal complement of `span(p)`: `I - p p^H`.
///
/// The result is Hermitian, idempotent, and annihilates `p`.
pub fn ortho_projector<T: Scalar>(p: &UnitVec<T>) -> CMat<T> {
    let n = p.dim();
    let mut m = CMat::identity(n);
    m.sub_outer(p.as_slice(), p.as_slice());
    m
}

/// Unit eigenvector of the largest eigenvalue of a Hermitian PSD matrix.
///
/// When the top eigenvalue is degenerate, any unit vector of the top
/// eigenspace may be returned. The phase is pinned by [`fix_phase`].
pub fn dominant_eigvec<T: Scalar>(a: &CMat<T>) -> Result<UnitVec<T>> {
    if a.rows() != a.cols() {
        return Err(Error::ShapeError(format!("expected square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let defect = a.herm_defect();
    let scale = a.frob().max(T::one());
    if defect > T::spec_tol(1e-10) * scale {
        return Err(Error::ShapeError(format!(
            "matrix is not Hermitian (defect {defect:e} vs scale {scale:e})"
        )));
    }
    let (_vals, vecs) = hermitian_eig(a, true);
    let v = vecs.expect("eigenvectors requested");
    let mut top = v.col(0);
    fix_phase(&mut top);
    UnitVec::normalized(&top)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max<T: Scalar>(a: &CMat<T>) -> T {
    let (vals, _) = hermitian_eig(a, false);
    vals[0]
}

/// Singular values of an arbitrary matrix, descending.
///
/// Computed as square roots of the eigenvalues of the smaller Gram matrix.
pub fn singular_values<T: Scalar>(m: &CMat<T>) -> Vec<T> {
    let gram = if m.rows() <= m.cols() { m.matmul(&m.herm()) } else { m.herm().matmul(m) };
    let (vals, _) = hermitian_eig(&gram, false);
    vals.into_iter().map(|v| v.max(T::zero()).sqrt()).collect()
}

/// One power-iteration step on `E E^H`: returns the normalized
/// `E (E^H p_prev)` plus a stall flag.
///
/// If the product vanishes, `p_prev` is returned unchanged and the flag is
/// set.
pub fn power_iter_step<T: Scalar>(e: &CMat<T>, p_prev: &UnitVec<T>) -> (UnitVec<T>, bool) {
    assert_eq!(e.rows(), p_prev.dim(), "power_iter_step shape mismatch");
    let eh_p = e.herm_matvec(p_prev.as_slice());
    let v = e.matvec(&eh_p);
    let norm = l2_norm(&v);
    if !(norm > T::zero()) || !norm.is_finite() {
        return (p_prev.clone(), true);
    }
    let entries = v.into_iter().map(|z| z / norm).collect();
    (UnitVec { entries }, false)
}

/// Outer product `u * v^H` as a matrix.
pub fn outer<T: Scalar>(u: &[C<T>], v: &[C<T>]) -> CMat<T> {
    let mut m = CMat::zeros(u.len(), v.len());
    for (r, &ur) in u.iter().enumerate() {
        for (c, &vc) in v.iter().enumerate() {
            m[(r, c)] = ur * vc.conj();
        }
    }
    m
}

/// Outer product with a plain (non-conjugated) row: `u * w^T`.
pub fn outer_t<T: Scalar>(u: &[C<T>], w: &[C<T>]) -> CMat<T> {
    let mut m = CMat::zeros(u.len(), w.len());
    for (r, &ur) in u.iter().enumerate() {
        for (c, &wc) in w.iter().enumerate() {
            m[(r, c)] = ur * wc;
        }
    }
    m
}

/// `P * m` where `P = I - p p^H`, computed as a rank-one update.
pub fn project_out<T: Scalar>(p: &UnitVec<T>, m: &CMat<T>) -> CMat<T> {
    // p^H M as a row, conjugated entrywise by herm_matvec.
    let ph_m_conj = m.herm_matvec(p.as_slice());
    let mut out = m.clone();
    for r in 0..out.rows() {
        let pr = p.as_slice()[r];
        for (o, &x) in out.row_mut(r).iter_mut().zip(&ph_m_conj) {
            *o -= pr * x.conj();
        }
    }
    out
}

pub(crate) use decomp::Cholesky as HpdCholesky;

/// Zero-filled complex vector.
pub fn zeros_vec<T: Scalar>(n: usize) -> Vec<C<T>> {
    vec![czero(); n]
}
