//! Cholesky factorization and a cyclic Jacobi eigensolver for Hermitian
//! matrices. These back the pseudoinverse and dominant-eigenvector kernels;
//! only the Hermitian case is supported.

use super::cmat::CMat;
use crate::error::{Error, Result};
use crate::scalar::{Scalar, C};

/// Cholesky factor `L` of a Hermitian positive definite matrix, `A = L L^H`.
pub(crate) struct Cholesky<T> {
    l: CMat<T>,
    diag_min: T,
    diag_max: T,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors `a`; fails if the matrix is not numerically positive definite.
    pub fn factor(a: &CMat<T>) -> Result<Self> {
        assert_eq!(a.rows(), a.cols(), "cholesky of a non-square matrix");
        let n = a.rows();
        let mut l = CMat::zeros(n, n);
        let max_diag = (0..n).map(|i| a[(i, i)].re).fold(T::zero(), T::max);
        let floor = max_diag * T::epsilon() * T::c(4.0 * n as f64);
        let mut diag_min = T::infinity();
        let mut diag_max = T::zero();
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d = d - l[(j, k)].norm_sqr();
            }
            if !(d > floor) || !d.is_finite() {
                return Err(Error::RankDeficient(format!(
                    "cholesky pivot {j} is {d:e} (floor {floor:e})"
                )));
            }
            let ljj = d.sqrt();
            l[(j, j)] = C::new(ljj, T::zero());
            diag_min = diag_min.min(ljj);
            diag_max = diag_max.max(ljj);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l, diag_min, diag_max })
    }

    /// Cheap condition-number proxy: `(max L_jj / min L_jj)^2`.
    pub fn cond_proxy(&self) -> T {
        let r = self.diag_max / self.diag_min;
        r * r
    }

    /// Solves `A X = B` for `X` given the factorization of `A`.
    pub fn solve(&self, b: &CMat<T>) -> CMat<T> {
        let n = self.l.rows();
        assert_eq!(b.rows(), n, "solve shape mismatch");
        let m = b.cols();
        let mut x = b.clone();
        // Forward: L y = b.
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[(i, k)];
                for c in 0..m {
                    let t = x[(k, c)];
                    x[(i, c)] = x[(i, c)] - lik * t;
                }
            }
            let d = self.l[(i, i)].re;
            for c in 0..m {
                x[(i, c)] = x[(i, c)] / d;
            }
        }
        // Backward: L^H x = y.
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = self.l[(k, i)].conj();
                for c in 0..m {
                    let t = x[(k, c)];
                    x[(i, c)] = x[(i, c)] - lki * t;
                }
            }
            let d = self.l[(i, i)].re;
            for c in 0..m {
                x[(i, c)] = x[(i, c)] / d;
            }
        }
        x
    }
}

/// Full eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and, when `want_vectors` is set,
/// the matrix whose columns are the matching eigenvectors. The input is
/// symmetrized first, so callers are responsible for rejecting matrices that
/// are far from Hermitian.
pub(crate) fn hermitian_eig<T: Scalar>(
    a: &CMat<T>,
    want_vectors: bool,
) -> (Vec<T>, Option<CMat<T>>) {
    assert_eq!(a.rows(), a.cols(), "eigendecomposition of a non-square matrix");
    let n = a.rows();
    // Work on the Hermitian average so rounding asymmetry cannot drift.
    let mut m = CMat::from_fn(n, n, |r, c| (a[(r, c)] + a[(c, r)].conj()) * T::c(0.5));
    let mut v = if want_vectors { Some(CMat::identity(n)) } else { None };
    let scale = m.frob();
    if scale > T::zero() {
        let off_tol = scale * T::epsilon() * T::c(n as f64);
        let rot_tol = scale * T::epsilon() * T::c(0.01);
        for _sweep in 0..64 {
            let mut off_sq = T::zero();
            for p in 0..n {
                for q in p + 1..n {
                    off_sq = off_sq + m[(p, q)].norm_sqr();
                }
            }
            if (off_sq + off_sq).sqrt() <= off_tol {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let g = m[(p, q)];
                    let ag = g.norm();
                    if ag <= rot_tol {
                        m[(p, q)] = C::new(T::zero(), T::zero());
                        m[(q, p)] = C::new(T::zero(), T::zero());
                        continue;
                    }
                    let app = m[(p, p)].re;
                    let aqq = m[(q, q)].re;
                    let tau = (aqq - app) / (ag + ag);
                    let t = if tau.is_zero() {
                        T::one()
                    } else {
                        tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt())
                    };
                    let ch = T::one() / (T::one() + t * t).sqrt();
                    let phase = g / ag;
                    let s = phase * (t * ch);
                    rotate(&mut m, p, q, ch, s);
                    if let Some(vm) = v.as_mut() {
                        rotate_cols(vm, p, q, ch, s);
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<T> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = v.map(|vm| {
        CMat::from_fn(n, n, |r, c| vm[(r, order[c])])
    });
    (sorted_vals, sorted_vecs)
}

/// Applies the two-sided rotation `J^H M J` on the (p, q) plane.
fn rotate<T: Scalar>(m: &mut CMat<T>, p: usize, q: usize, ch: T, s: C<T>) {
    let n = m.rows();
    // Column update: M <- M J.
    for i in 0..n {
        let mip = m[(i, p)];
        let miq = m[(i, q)];
        m[(i, p)] = mip * ch - miq * s.conj();
        m[(i, q)] = mip * s + miq * ch;
    }
    // Row update: M <- J^H M.
    for c in 0..n {
        let mpc = m[(p, c)];
        let mqc = m[(q, c)];
        m[(p, c)] = mpc * ch - mqc * s;
        m[(q, c)] = mpc * s.conj() + mqc * ch;
    }
    m[(p, q)] = C::new(T::zero(), T::zero());
    m[(q, p)] = C::new(T::zero(), T::zero());
    let dp = m[(p, p)];
    let dq = m[(q, q)];
    m[(p, p)] = C::new(dp.re, T::zero());
    m[(q, q)] = C::new(dq.re, T::zero());
}

/// Applies the one-sided column rotation `V <- V J` on the (p, q) plane.
fn rotate_cols<T: Scalar>(v: &mut CMat<T>, p: usize, q: usize, ch: T, s: C<T>) {
    let n = v.rows();
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * ch - viq * s.conj();
        v[(i, q)] = vip * s + viq * ch;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMat<f64> {
        let b = CMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &b + &b.herm()
    }

    #[test]
    fn cholesky_reconstructs_and_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let b = CMat::from_fn(5, 8, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let a = b.matmul(&b.herm()); // HPD with probability one
            let ch = Cholesky::factor(&a).unwrap();
            let x = ch.solve(&CMat::identity(5));
            let res = (&a.matmul(&x) - &CMat::identity(5)).frob();
            assert!(res < 1e-10, "inverse residual {res}");
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let b = CMat::from_vec(2, 1, vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let a = b.matmul(&b.herm()); // rank one
        assert!(matches!(Cholesky::factor(&a), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn jacobi_on_diagonal_matrix() {
        let a = CMat::from_fn(3, 3, |r, q| if r == q { c([3.0, 1.0, 2.0][r], 0.0) } else { c(0.0, 0.0) });
        let (vals, vecs) = hermitian_eig(&a, true);
        assert!((vals[0] - 3.0).abs() < 1e-14);
        assert!((vals[1] - 2.0).abs() < 1e-14);
        assert!((vals[2] - 1.0).abs() < 1e-14);
        let v = vecs.unwrap();
        assert!((v[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 3, 8, 17] {
            let a = random_hermitian(n, &mut rng);
            let (vals, vecs) = hermitian_eig(&a, true);
            let v = vecs.unwrap();
            // Unitarity.
            let vhv = v.herm().matmul(&v);
            assert!((&vhv - &CMat::identity(n)).frob() < 1e-12 * n as f64);
            // Reconstruction A = V diag(vals) V^H.
            let mut lam = CMat::zeros(n, n);
            for i in 0..n {
                lam[(i, i)] = c(vals[i], 0.0);
            }
            let rec = v.matmul(&lam).matmul(&v.herm());
            let rel = (&rec - &a).frob() / a.frob().max(1e-30);
            assert!(rel < 1e-13 * n as f64, "n={n} rel={rel}");
            // Descending order.
            for w in vals.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn jacobi_eigenvalues_match_trace_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(12, &mut rng);
        let (vals, _) = hermitian_eig(&a, false);
        let tr: f64 = (0..12).map(|i| a[(i, i)].re).sum();
        let sum: f64 = vals.iter().sum();
        assert!((tr - sum).abs() < 1e-11);
        let frob_sq: f64 = a.frob_sq();
        let val_sq: f64 = vals.iter().map(|v| v * v).sum();
        assert!((frob_sq - val_sq).abs() < 1e-10 * frob_sq.max(1.0));
    }
}
