//! Joint jammer-mitigating detection by forward-backward splitting with a
//! box symbol prior.
//!
//! The detector minimizes `|| P~ Y (I_K - pinv(S~) S~) ||_F^2` over the
//! nulling direction and the data block of `S~`, alternating a gradient
//! step in `S~` (with Barzilai-Borwein step sizes), an entrywise projection
//! onto the constellation's convex hull, and a single power-iteration update
//! of the nulled subspace. Its only inputs are the receive matrix and the
//! pilots; no noise-variance estimate is needed.

use crate::baselines::DetectionResult;
use crate::error::{Error, Result};
use crate::fbs::{run_engine, EngineConfig, StepRule, UpdateRule};
use crate::numerics::{dominant_eigvec, pinv_wide, project_out, CMat, UnitVec};
use crate::scalar::{Scalar, C};
use crate::scenario::Constellation;
use serde::{Deserialize, Serialize};

/// Conditioning guard for the per-iteration pseudoinverse: above this
/// condition proxy, a ridge of `1e-9 * trace` is added to the Gram matrix.
/// The pilot block keeps `S~` well conditioned, so this fires only in
/// pathological runs.
pub(crate) const COND_LIMIT: f64 = 1e12;
pub(crate) const RIDGE_REL: f64 = 1e-9;

/// Iteration count, initial step size, and preprocessing regularizer scale.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MaedConfig {
    pub t_max: usize,
    pub tau0: f64,
    /// The preprocessing regularizer's top-left entry is
    /// `reg_scale * B * U * K`.
    pub reg_scale: f64,
}

impl Default for MaedConfig {
    fn default() -> Self {
        Self { t_max: 20, tau0: 0.1, reg_scale: 0.1 }
    }
}

/// Objective value `|| P~ Y (I_K - pinv(S~) S~) ||_F^2`.
pub fn objective<T: Scalar>(p: &UnitVec<T>, s_tilde: &CMat<T>, y: &CMat<T>) -> Result<T> {
    let e = residual(y, s_tilde)?;
    Ok(project_out(p, &e).frob_sq())
}

/// Residual `E = Y (I_K - pinv(S~) S~)`.
pub fn residual<T: Scalar>(y: &CMat<T>, s_tilde: &CMat<T>) -> Result<CMat<T>> {
    let pinv = pinv_wide(s_tilde)?;
    Ok(y - &y.matmul(&pinv).matmul(s_tilde))
}

/// Gradient of the objective in `S~`:
/// `-(Y pinv(S~))^H P~ Y (I_K - pinv(S~) S~)`.
pub fn gradient<T: Scalar>(s_tilde: &CMat<T>, p: &UnitVec<T>, y: &CMat<T>) -> Result<CMat<T>> {
    let pinv = pinv_wide(s_tilde)?;
    let a = y.matmul(&pinv);
    let e = y - &a.matmul(s_tilde);
    let pe = project_out(p, &e);
    Ok(-&a.herm().matmul(&pe))
}

/// Proximal step of the box prior: pilot columns are restored to `S_T` and
/// the real and imaginary parts of every data entry are clamped to
/// `[-lambda, lambda]`.
pub fn prox_box<T: Scalar>(x: &CMat<T>, s_t: &CMat<T>, lambda: T) -> CMat<T> {
    let t = s_t.cols();
    let clamp = |v: T| v.min(lambda).max(-lambda);
    let mut out = CMat::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            out[(r, c)] = if c < t {
                s_t[(r, c)]
            } else {
                let z = x[(r, c)];
                C::new(clamp(z.re), clamp(z.im))
            };
        }
    }
    out
}

/// Adaptive Barzilai-Borwein step size from successive iterate and gradient
/// differences: with `tau_s = ||dS||^2 / Re<dS, dG>` and
/// `tau_m = Re<dS, dG> / ||dG||^2`, returns `tau_m` when `2 tau_m > tau_s`
/// and `tau_s - tau_m / 2` otherwise. Any non-positive or non-finite
/// candidate falls back to `tau_prev`.
pub fn bb_stepsize<T: Scalar>(ds: &CMat<T>, dg: &CMat<T>, tau_prev: T) -> T {
    let sg = ds.inner_re(dg);
    let tau_s = ds.frob_sq() / sg;
    let tau_m = sg / dg.frob_sq();
    let candidate = if tau_m + tau_m > tau_s { tau_m } else { tau_s - tau_m * T::c(0.5) };
    if candidate > T::zero() && candidate.is_finite() {
        candidate
    } else {
        tau_prev
    }
}

/// Regularized initial direction: the dominant eigenvector of
/// `Y Y^H + Gamma`, where `Gamma` is zero except for its top-left entry
/// `reg_scale * B * U * K`. Strong jammers overshadow the regularizer and
/// get nulled immediately; without a jammer the regularizer steers the
/// eigenvector away from legitimate UE directions.
pub fn preprocess<T: Scalar>(y: &CMat<T>, n_users: usize, reg_scale: f64) -> Result<UnitVec<T>> {
    let b = y.rows();
    let k = y.cols();
    let mut a = y.matmul(&y.herm());
    a[(0, 0)] = a[(0, 0)] + C::new(T::c(reg_scale * (b * n_users * k) as f64), T::zero());
    dominant_eigvec(&a)
}

/// Per-run diagnostics of the iterative detectors.
#[derive(Clone, Debug)]
pub struct IterationReport<T> {
    /// The power-iteration subspace update hit a zero product at least once
    /// and kept the previous direction.
    pub stalled: bool,
    /// The pilot block equaled `S_T` exactly after every iteration.
    pub pilot_block_fixed: bool,
    /// Worst per-iteration deviation of the nulling direction from unit norm.
    pub max_unit_norm_err: T,
    /// Every iterate stayed finite.
    pub all_finite: bool,
    /// Step sizes actually used, one per iteration (useful for calibrating
    /// fixed schedules against the adaptive rule).
    pub taus_used: Vec<T>,
    /// Final estimate of the nulled (jammer) direction.
    pub nulled_direction: crate::numerics::UnitVec<T>,
}

/// Runs the detector on one receive matrix and returns hard decisions on
/// the data block.
pub fn run_maed<T: Scalar>(
    y: &CMat<T>,
    s_t: &CMat<T>,
    cons: &Constellation<T>,
    cfg: &MaedConfig,
) -> Result<DetectionResult<T>> {
    run_maed_with_report(y, s_t, cons, cfg).map(|(det, _)| det)
}

/// [`run_maed`] plus iteration diagnostics.
pub fn run_maed_with_report<T: Scalar>(
    y: &CMat<T>,
    s_t: &CMat<T>,
    cons: &Constellation<T>,
    cfg: &MaedConfig,
) -> Result<(DetectionResult<T>, IterationReport<T>)> {
    if cfg.t_max < 1 || !(cfg.tau0 > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "maed: t_max = {}, tau0 = {} out of range",
            cfg.t_max, cfg.tau0
        )));
    }
    let out = run_engine(
        y,
        s_t,
        EngineConfig {
            t_max: cfg.t_max,
            n_users: s_t.rows(),
            reg_scale: cfg.reg_scale,
            step: StepRule::BarzilaiBorwein { tau0: cfg.tau0 },
            update: UpdateRule::BoxProx { lambda: cons.lambda() },
            gammas: None,
            alphas: None,
        },
    )?;
    if out.stalled {
        log::debug!("maed: power iteration stalled at least once; kept previous direction");
    }
    let s_d = out.s_final.col_block(s_t.cols(), y.cols());
    let report = IterationReport {
        stalled: out.stalled,
        pilot_block_fixed: out.pilot_block_fixed,
        max_unit_norm_err: out.max_unit_norm_err,
        all_finite: out.all_finite,
        taus_used: out.taus_used,
        nulled_direction: out.p_final,
    };
    Ok((DetectionResult::from_soft(s_d, cons), report))
}
