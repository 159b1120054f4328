//! Reference receivers: LS channel estimation with LMMSE detection, the
//! genie-aided and estimated projection-onto-orthogonal-subspace receivers,
//! and the single-user SIMO matched-filter bound.

use crate::error::{Error, Result};
use crate::numerics::{dominant_eigvec, pinv_wide, CMat, HpdCholesky, UnitVec};
use crate::rng::cn01;
use crate::scalar::{czero, Scalar, C};
use crate::scenario::{Constellation, SystemConfig};
use rand::Rng;

/// Hard-decision output of a detector.
#[derive(Clone, Debug)]
pub struct DetectionResult<T: Scalar> {
    /// Soft symbol values, U x D.
    pub s_hat: CMat<T>,
    /// Hard bits in (user, slot, bit) order; always the hard slicing of
    /// `s_hat` (or, for soft-output detectors, the LLR signs, which agree).
    pub bits_hat: Vec<u8>,
    /// Per-bit LLRs in the same order, when the detector produces them.
    pub llrs: Option<Vec<T>>,
}

impl<T: Scalar> DetectionResult<T> {
    /// Builds the result by hard-slicing each entry of `s_hat`.
    pub fn from_soft(s_hat: CMat<T>, cons: &Constellation<T>) -> Self {
        let bits_hat = slice_bits(&s_hat, cons);
        Self { s_hat, bits_hat, llrs: None }
    }

    /// Sliced labels per (user, slot), recomputed from the stored bits.
    pub fn labels(&self, cons: &Constellation<T>) -> Vec<u8> {
        let bps = cons.bits_per_symbol();
        self.bits_hat
            .chunks_exact(bps)
            .map(|bits| bits.iter().enumerate().fold(0u8, |l, (i, &b)| l | (b << i)))
            .collect()
    }
}

/// Hard-slices a symbol matrix into flattened bits.
pub fn slice_bits<T: Scalar>(s_hat: &CMat<T>, cons: &Constellation<T>) -> Vec<u8> {
    let bps = cons.bits_per_symbol();
    let mut bits = Vec::with_capacity(s_hat.rows() * s_hat.cols() * bps);
    for u in 0..s_hat.rows() {
        for d in 0..s_hat.cols() {
            let label = cons.slice(s_hat[(u, d)]);
            for i in 0..bps {
                bits.push((label >> i) & 1);
            }
        }
    }
    bits
}

/// Least-squares channel estimate from the pilot phase:
/// `H_hat = Y_T pinv(S_T)`.
pub fn ls_chest<T: Scalar>(y_t: &CMat<T>, s_t: &CMat<T>) -> Result<CMat<T>> {
    if y_t.cols() != s_t.cols() {
        return Err(Error::ShapeError(format!(
            "ls_chest: Y_T has {} columns, S_T has {}",
            y_t.cols(),
            s_t.cols()
        )));
    }
    Ok(y_t.matmul(&pinv_wide(s_t)?))
}

/// LMMSE data detection with a channel estimate:
/// `s_hat = (H^H H + N0 I)^{-1} H^H y` per receive column, then slicing.
pub fn lmmse_detect<T: Scalar>(
    y_d: &CMat<T>,
    h_hat: &CMat<T>,
    n0: T,
    cons: &Constellation<T>,
) -> Result<DetectionResult<T>> {
    if y_d.rows() != h_hat.rows() {
        return Err(Error::ShapeError(format!(
            "lmmse_detect: Y_D has {} rows, H has {}",
            y_d.rows(),
            h_hat.rows()
        )));
    }
    if !(n0 >= T::zero()) {
        return Err(Error::InvalidConfig(format!("noise variance {n0} must be >= 0")));
    }
    let u = h_hat.cols();
    let mut gram = h_hat.herm().matmul(h_hat);
    for i in 0..u {
        gram[(i, i)] = gram[(i, i)] + C::new(n0, T::zero());
    }
    let chol = HpdCholesky::factor(&gram)?;
    let s_hat = chol.solve(&h_hat.herm().matmul(y_d));
    Ok(DetectionResult::from_soft(s_hat, cons))
}

/// Whether the projected system's noise is treated as white or explicitly
/// whitened in an orthonormal basis of the projector's range. The two are
/// algebraically identical; the whitened path exists as a cross-check.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum PosNoise {
    #[default]
    White,
    Whitened,
}

/// Genie projection receiver: nulls the jammer with the true channel `j`,
/// then runs LS channel estimation and LMMSE detection in the projected
/// system.
pub fn genie_pos_detect<T: Scalar>(
    y: &CMat<T>,
    j: &CMat<T>,
    s_t: &CMat<T>,
    n0: T,
    cons: &Constellation<T>,
    noise: PosNoise,
) -> Result<DetectionResult<T>> {
    let dir = UnitVec::normalized(&j.col(0))
        .map_err(|_| Error::InvalidJammer("zero jammer channel".into()))?;
    pos_with_direction(y, &dir, s_t, n0, cons, noise)
}

/// Projection receiver with an estimated jammer subspace: the direction is
/// the dominant left singular vector of `y_j`, a block of receive samples
/// taken while the UEs are silent.
pub fn pos_detect<T: Scalar>(
    y: &CMat<T>,
    y_j: &CMat<T>,
    s_t: &CMat<T>,
    n0: T,
    cons: &Constellation<T>,
    noise: PosNoise,
) -> Result<DetectionResult<T>> {
    if y_j.cols() < 1 || y_j.rows() != y.rows() {
        return Err(Error::ShapeError(format!(
            "pos_detect: estimation block is {}x{}",
            y_j.rows(),
            y_j.cols()
        )));
    }
    let dir = dominant_eigvec(&y_j.matmul(&y_j.herm()))?;
    pos_with_direction(y, &dir, s_t, n0, cons, noise)
}

/// Shared tail of the projection receivers.
pub fn pos_with_direction<T: Scalar>(
    y: &CMat<T>,
    dir: &UnitVec<T>,
    s_t: &CMat<T>,
    n0: T,
    cons: &Constellation<T>,
    noise: PosNoise,
) -> Result<DetectionResult<T>> {
    let t = s_t.cols();
    if t >= y.cols() {
        return Err(Error::ShapeError(format!(
            "pos: frame has {} columns but pilots occupy {t}",
            y.cols()
        )));
    }
    let y_p = crate::numerics::project_out(dir, y);
    let (y_eff, b_eff) = match noise {
        PosNoise::White => (y_p, y.rows()),
        PosNoise::Whitened => {
            // Restrict to an orthonormal basis Q of range(P); the noise is
            // exactly white there. Q = columns 2..B of a Householder
            // reflector taking e_1 to dir.
            let q = complement_basis(dir);
            (q.herm().matmul(&y_p), y.rows() - 1)
        }
    };
    let _ = b_eff;
    let h_p = ls_chest(&y_eff.col_block(0, t), s_t)?;
    lmmse_detect(&y_eff.col_block(t, y.cols()), &h_p, n0, cons)
}

/// Orthonormal basis of the orthogonal complement of `dir`, as the last
/// B - 1 columns of a unitary Householder reflector mapping `e_1` to `dir`.
fn complement_basis<T: Scalar>(dir: &UnitVec<T>) -> CMat<T> {
    let b = dir.dim();
    let d = dir.as_slice();
    // Reflector W = I - 2 v v^H / ||v||^2 with v = d - phase * e_1, chosen so
    // W e_1 = phase^-1 ... we want unitary W with first column equal to dir.
    let phase = if d[0].norm() > T::spec_tol(1e-14) { d[0] / d[0].norm() } else { C::new(T::one(), T::zero()) };
    let mut v: Vec<C<T>> = d.to_vec();
    v[0] = v[0] + phase; // v = d + phase e_1; then W = phase(I - 2vv^H/||v||^2) has W e_1 = -d... sign fixed below
    let vn: T = v.iter().map(|z| z.norm_sqr()).sum();
    let mut w = CMat::zeros(b, b);
    for r in 0..b {
        for c in 0..b {
            let eye = if r == c { C::new(T::one(), T::zero()) } else { czero() };
            let outer = v[r] * v[c].conj() * (T::c(2.0) / vn);
            // First column becomes -phase^* d after the reflection; scale by
            // -phase to make column 1 exactly dir (global phase is free for
            // the remaining columns).
            w[(r, c)] = (eye - outer) * (-phase);
        }
    }
    w.col_block(1, b)
}

/// Single-user SIMO matched-filter trial: draws one Rayleigh channel and `n`
/// data symbols, applies maximum-ratio combining with perfect channel
/// knowledge, and counts bit and symbol errors.
pub fn simo_mrc_trial<T: Scalar>(
    b: usize,
    n_symbols: usize,
    n0: T,
    cons: &Constellation<T>,
    rng: &mut impl Rng,
) -> (u64, u64) {
    let h: Vec<C<T>> = (0..b).map(|_| cn01::<T>(rng)).collect();
    let h_sq: T = h.iter().map(|z| z.norm_sqr()).sum();
    let sigma = n0.sqrt();
    let bps = cons.bits_per_symbol();
    let mut bit_errors = 0u64;
    let mut sym_errors = 0u64;
    for _ in 0..n_symbols {
        let label = rng.random_range(0..cons.size() as u8);
        let s = cons.point(label);
        // Matched filter: s_hat = h^H y / ||h||^2 = s + h^H n / ||h||^2.
        let mut noise_proj = czero::<T>();
        for hk in &h {
            noise_proj += hk.conj() * cn01::<T>(rng) * sigma;
        }
        let s_hat = s + noise_proj / h_sq;
        let hard = cons.slice(s_hat);
        if hard != label {
            sym_errors += 1;
            bit_errors += u64::from((hard ^ label).count_ones());
        }
        let _ = bps;
    }
    (bit_errors, sym_errors)
}

/// Jammerless single-input multiple-output bound: BER of a lone UE with `B`
/// receive antennas, perfect channel knowledge, and maximum-ratio combining,
/// per SNR grid point. Returns `(snr_db, ber, bits)` rows.
pub fn jl_simo_bound<T: Scalar>(
    cfg: &SystemConfig,
    snr_grid_db: &[f64],
    min_bits: u64,
    rng: &mut impl Rng,
) -> Vec<(f64, f64, u64)> {
    let cons = crate::scenario::make_constellation::<T>(cfg.constellation);
    let bps = cons.bits_per_symbol() as u64;
    snr_grid_db
        .iter()
        .map(|&snr_db| {
            let n0 = crate::scenario::noise_var::<T>(&SystemConfig { snr_db, ..cfg.clone() });
            let mut bits = 0u64;
            let mut errors = 0u64;
            while bits < min_bits {
                let (be, _) = simo_mrc_trial(cfg.b, cfg.d, n0, &cons, rng);
                errors += be;
                bits += cfg.d as u64 * bps;
            }
            (snr_db, errors as f64 / bits as f64, bits)
        })
        .collect()
}
