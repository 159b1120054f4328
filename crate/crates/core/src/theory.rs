//! Executable desk-scale checks of the recovery theory: the eclipsing
//! criterion, exhaustive uniqueness verification of the joint estimation
//! objective on noiseless instances, and the eclipsing-probability bound.

use crate::channel::rayleigh;
use crate::error::{Error, Result};
use crate::jammer::{synthesize, JammerProfile};
use crate::numerics::{dominant_eigvec, lambda_max, ortho_projector, pinv_wide, singular_values, CMat};
use crate::rng::{trial_rng, Stream};
use crate::scalar::{Scalar, C};
use crate::scenario::{draw_frame, make_constellation, Constellation, SystemConfig};
use serde::Serialize;

/// Relative singular-value gap below which a matrix counts as rank one.
/// Exact rank is ill-posed in floating point; the criterion is algebraic.
const RANK_GAP_TOL: f64 = 1e-9;

/// Outcome of an eclipsing check.
#[derive(Clone, Debug)]
pub struct EclipseReport<T: Scalar> {
    pub eclipsed: bool,
    /// An alternative data matrix witnessing the eclipse, when one exists.
    pub witness: Option<CMat<T>>,
    /// Numerical rank of the witness's consistency matrix (1 when eclipsed).
    pub sigma_rank: usize,
}

/// The consistency matrix of the eclipsing criterion: `S_D - S_D~` stacked
/// over the row `w_D^T - w_T^T pinv(S_T) S_D~`. The jammer is eclipsed iff
/// some `S_D~ != S_D` makes this matrix rank one.
pub fn sigma_matrix<T: Scalar>(
    s_t: &CMat<T>,
    s_d: &CMat<T>,
    s_d_tilde: &CMat<T>,
    w: &[C<T>],
) -> Result<CMat<T>> {
    let u = s_d.rows();
    let d = s_d.cols();
    let t = s_t.cols();
    if s_t.rows() != u || s_d_tilde.rows() != u || s_d_tilde.cols() != d || w.len() != t + d {
        return Err(Error::ShapeError(format!(
            "sigma_matrix: S_T {}x{}, S_D {}x{}, S_D~ {}x{}, w len {}",
            s_t.rows(),
            t,
            u,
            d,
            s_d_tilde.rows(),
            s_d_tilde.cols(),
            w.len()
        )));
    }
    let pinv_t = pinv_wide(s_t)?;
    Ok(sigma_with_pinv(s_d, s_d_tilde, w, t, &pinv_t))
}

/// `sigma_matrix` with the pilot pseudoinverse precomputed (the brute-force
/// search reuses it across all candidates).
fn sigma_with_pinv<T: Scalar>(
    s_d: &CMat<T>,
    s_d_tilde: &CMat<T>,
    w: &[C<T>],
    t: usize,
    pinv_t: &CMat<T>,
) -> CMat<T> {
    let u = s_d.rows();
    let d = s_d.cols();
    let mut sigma = CMat::zeros(u + 1, d);
    for r in 0..u {
        for c in 0..d {
            sigma[(r, c)] = s_d[(r, c)] - s_d_tilde[(r, c)];
        }
    }
    // Bottom row: w_D^T - w_T^T pinv(S_T) S_D~.
    for c in 0..d {
        let mut acc = w[t + c];
        for i in 0..t {
            let mut m = C::new(T::zero(), T::zero());
            for r in 0..u {
                m += pinv_t[(i, r)] * s_d_tilde[(r, c)];
            }
            acc -= w[i] * m;
        }
        sigma[(u, c)] = acc;
    }
    sigma
}

/// Numerical rank-one test on singular values.
fn rank_le_one_info<T: Scalar>(m: &CMat<T>) -> (bool, usize) {
    let sv = singular_values(m);
    let floor = T::spec_tol(1e-12) * (T::one() + m.frob());
    let s1 = sv[0];
    if s1 <= floor {
        return (false, 0); // zero matrix: rank 0, not a witness
    }
    let s2 = sv.get(1).copied().unwrap_or(T::zero());
    if s2 <= T::spec_tol(RANK_GAP_TOL) * s1 {
        (true, 1)
    } else {
        (false, 2)
    }
}

/// Iterates over all label matrices of `S^(U x D)`, calling `f` for each
/// candidate and stopping early when `f` returns true.
fn enumerate_candidates(u_times_d: usize, m: usize, mut f: impl FnMut(&[u8]) -> bool) {
    let mut labels = vec![0u8; u_times_d];
    loop {
        if f(&labels) {
            return;
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == u_times_d {
                return;
            }
            labels[pos] += 1;
            if (labels[pos] as usize) < m {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

/// Exhaustively searches for an eclipsing witness.
///
/// Desk scale only: errors when `|S|^(U D)` exceeds 10^7 candidates.
pub fn is_eclipsed_bruteforce<T: Scalar>(
    s_t: &CMat<T>,
    s_d: &CMat<T>,
    w: &[C<T>],
    cons: &Constellation<T>,
) -> Result<EclipseReport<T>> {
    let u = s_d.rows();
    let d = s_d.cols();
    let m = cons.size();
    let count = (m as f64).powi((u * d) as i32);
    if count > 1e7 {
        return Err(Error::InvalidConfig(format!(
            "brute-force eclipse check over {count:.3e} candidates exceeds the 1e7 guard"
        )));
    }
    let pinv_t = pinv_wide(s_t)?;
    let true_labels: Vec<u8> = (0..u * d).map(|i| cons.slice(s_d[(i / d, i % d)])).collect();
    let mut report = EclipseReport { eclipsed: false, witness: None, sigma_rank: 0 };
    enumerate_candidates(u * d, m, |labels| {
        if labels == true_labels.as_slice() {
            return false;
        }
        let tilde = CMat::from_fn(u, d, |r, c| cons.point(labels[r * d + c]));
        let sigma = sigma_with_pinv(s_d, &tilde, w, s_t.cols(), &pinv_t);
        let (rank_one, rank) = rank_le_one_info(&sigma);
        if rank_one {
            report = EclipseReport { eclipsed: true, witness: Some(tilde), sigma_rank: rank };
            true
        } else {
            false
        }
    });
    Ok(report)
}

/// Residual `E = Y (I - pinv(S~) S~)` for a candidate transmit matrix.
fn residual<T: Scalar>(y: &CMat<T>, s_tilde: &CMat<T>) -> Result<CMat<T>> {
    let pinv = pinv_wide(s_tilde)?;
    Ok(y - &y.matmul(&pinv).matmul(s_tilde))
}

/// Value of the joint objective minimized over the nulling direction:
/// `min_p ||P E||_F^2 = ||E||_F^2 - lambda_max(E E^H)`.
pub fn objective_min_over_p<T: Scalar>(y: &CMat<T>, s_tilde: &CMat<T>) -> Result<T> {
    let e = residual(y, s_tilde)?;
    Ok(e.frob_sq() - lambda_max(&e.matmul(&e.herm())))
}

/// [`objective_min_over_p`], but values near zero are re-evaluated as the
/// direct `||P E||_F^2` at the minimizing eigenvector. The closed form
/// cancels two terms of size `||E||^2`, which floors its absolute accuracy
/// around `eps * ||E||^2`; the direct evaluation has no such cancellation.
fn objective_min_refined<T: Scalar>(y: &CMat<T>, s_tilde: &CMat<T>) -> Result<T> {
    let e = residual(y, s_tilde)?;
    let gram = e.matmul(&e.herm());
    let closed = e.frob_sq() - lambda_max(&gram);
    if closed > T::spec_tol(1e-9) * y.frob_sq() {
        return Ok(closed);
    }
    let p = dominant_eigvec(&gram)?;
    Ok(crate::numerics::project_out(&p, &e).frob_sq())
}

/// Per-seed outcome of the uniqueness verification.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub enum SeedOutcome {
    /// Unique zero at the true data matrix with collinear nulling direction
    /// and correct projected channel estimate.
    UniqueRecovery,
    /// Instance was eclipsed; uniqueness is not claimed there.
    EclipsedSkipped,
    /// Verification failed; the string names the violated assertion.
    Failed(String),
}

/// Aggregate report of [`verify_theorem1`].
#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    pub seeds: u64,
    pub unique_recoveries: u64,
    pub eclipsed_skipped: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
    /// Objective-zero threshold relative to `||Y||_F^2`.
    pub zero_tol: f64,
    /// Collinearity tolerance on `|<p_hat, j>|`.
    pub collinearity_tol: f64,
    pub outcomes: Vec<SeedOutcome>,
}

/// Exhaustively verifies, on noiseless instances, that the joint objective
/// has a unique zero at the true data matrix, with the minimizing direction
/// collinear with the jammer channel (up to phase) and the channel estimate
/// equal to the projected true channel.
///
/// Instances found to be eclipsed are skipped and counted.
pub fn verify_theorem1(
    cfg: &SystemConfig,
    profile: &JammerProfile,
    seeds: u64,
) -> Result<Theorem1Report> {
    cfg.validate()?;
    if cfg.snr_db != f64::INFINITY {
        return Err(Error::InvalidConfig(
            "/snr_db: uniqueness verification requires the noiseless setting (snr_db = inf)".into(),
        ));
    }
    let cons = make_constellation::<f64>(cfg.constellation);
    let m = cons.size();
    let count = (m as f64).powi((cfg.u * cfg.d) as i32);
    if count > 1e7 {
        return Err(Error::InvalidConfig(format!(
            "exhaustive verification over {count:.3e} candidates exceeds the 1e7 guard"
        )));
    }
    let zero_tol = 1e-16;
    let collinearity_tol = 1e-8;
    let mut report = Theorem1Report {
        seeds,
        unique_recoveries: 0,
        eclipsed_skipped: 0,
        failures: 0,
        first_failure: None,
        zero_tol,
        collinearity_tol,
        outcomes: Vec::with_capacity(seeds as usize),
    };
    for seed in 0..seeds {
        let outcome = verify_one_seed(cfg, profile, &cons, seed, zero_tol, collinearity_tol)?;
        match &outcome {
            SeedOutcome::UniqueRecovery => report.unique_recoveries += 1,
            SeedOutcome::EclipsedSkipped => report.eclipsed_skipped += 1,
            SeedOutcome::Failed(msg) => {
                report.failures += 1;
                if report.first_failure.is_none() {
                    report.first_failure = Some(format!("seed {seed}: {msg}"));
                }
            }
        }
        report.outcomes.push(outcome);
    }
    Ok(report)
}

fn verify_one_seed(
    cfg: &SystemConfig,
    profile: &JammerProfile,
    cons: &Constellation<f64>,
    seed: u64,
    zero_tol: f64,
    collinearity_tol: f64,
) -> Result<SeedOutcome> {
    let mut rng_h = trial_rng(cfg.seed, seed, Stream::Channel);
    let mut rng_f = trial_rng(cfg.seed, seed, Stream::Frame);
    let mut rng_j = trial_rng(cfg.seed, seed, Stream::Jammer);
    let real = rayleigh::<f64>(cfg.b, cfg.u, &mut rng_h);
    let frame = draw_frame(cfg, cons, &mut rng_f)?;
    let seq = synthesize(profile, cfg, &frame, cons, &mut rng_j)?;
    let y = crate::jammer::apply(&real.h.matmul(&frame.s()), &real.j, &seq.w)?;

    let eclipse = is_eclipsed_bruteforce(&frame.s_t, &frame.s_d, &seq.w, cons)?;
    if eclipse.eclipsed {
        return Ok(SeedOutcome::EclipsedSkipped);
    }

    let threshold = zero_tol * y.frob_sq();
    let true_labels: Vec<u8> =
        (0..cfg.u * cfg.d).map(|i| cons.slice(frame.s_d[(i / cfg.d, i % cfg.d)])).collect();
    let mut failure: Option<String> = None;
    let mut true_value = f64::INFINITY;
    enumerate_candidates(cfg.u * cfg.d, cons.size(), |labels| {
        let tilde = CMat::from_fn(cfg.u, cfg.d, |r, c| cons.point(labels[r * cfg.d + c]));
        let s_tilde = frame.s_t.hstack(&tilde);
        let value = match objective_min_refined(&y, &s_tilde) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(format!("objective evaluation failed: {e}"));
                return true;
            }
        };
        if labels == true_labels.as_slice() {
            true_value = value;
            if value > threshold {
                failure = Some(format!(
                    "objective at the true data matrix is {value:e} > {threshold:e}"
                ));
                return true;
            }
        } else if value <= threshold {
            failure = Some(format!("spurious zero {value:e} at an alternative data matrix"));
            return true;
        }
        false
    });
    if let Some(msg) = failure {
        return Ok(SeedOutcome::Failed(msg));
    }
    if !(true_value <= threshold) {
        return Ok(SeedOutcome::Failed("true data matrix never visited".into()));
    }

    // Minimizing direction at the truth must be collinear with j.
    let e = residual(&y, &frame.s())?;
    let p_hat = dominant_eigvec(&e.matmul(&e.herm()))?;
    let align = p_hat.alignment(real.j.col(0).as_slice());
    if (align - 1.0).abs() > collinearity_tol {
        return Ok(SeedOutcome::Failed(format!(
            "nulling direction misaligned with the jammer channel: |<p,j>| = {align}"
        )));
    }

    // Channel estimate: P Y_T pinv(S_T) must equal P H.
    let proj = ortho_projector(&p_hat);
    let y_t = y.col_block(0, cfg.t);
    let h_p = proj.matmul(&y_t).matmul(&pinv_wide(&frame.s_t)?);
    let truth = proj.matmul(&real.h);
    let rel = (&h_p - &truth).frob() / truth.frob();
    if rel > 1e-8 {
        return Ok(SeedOutcome::Failed(format!("projected channel estimate off by {rel:e}")));
    }
    Ok(SeedOutcome::UniqueRecovery)
}

/// Base-10 logarithm of the eclipsing-probability upper bound
/// `|S|^(3U) |S|^(-(U-3)D)`, i.e. `(3U - (U-3) D) log10 |S|`.
///
/// Computed in the log domain; the bound only decays for `U > 3`.
pub fn eclipse_bound_log10(constellation_size: usize, u: usize, d: usize) -> f64 {
    let exponent = 3 * u as i64 - (u as i64 - 3) * d as i64;
    exponent as f64 * (constellation_size as f64).log10()
}

/// Witness matrix as JSON-friendly rows of `[re, im]` pairs.
pub fn witness_rows<T: Scalar>(m: &CMat<T>) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|r| {
            m.row(r)
                .iter()
                .map(|z| [z.re.to_f64().unwrap(), z.im.to_f64().unwrap()])
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jammer::{JammerKind, SymbolLaw};
    use crate::numerics::UnitVec;
    use crate::rng::cn01;
    use crate::scenario::{ConstellationKind, PilotMode, PowerMode};
    use rand::Rng;

    fn tiny_cfg(b: usize, u: usize, t: usize, d: usize) -> SystemConfig {
        SystemConfig {
            b,
            u,
            k: t + d,
            t,
            d,
            constellation: ConstellationKind::Qpsk,
            snr_db: f64::INFINITY,
            seed: 424242,
            pilots: PilotMode::Hadamard,
        }
    }

    #[test]
    fn sigma_matrix_zero_for_true_data_and_silent_jammer() {
        let cfg = tiny_cfg(6, 2, 2, 3);
        let cons = make_constellation::<f64>(cfg.constellation);
        let mut rng = trial_rng(1, 0, Stream::Frame);
        let frame = draw_frame(&cfg, &cons, &mut rng).unwrap();
        let w = vec![C::new(0.0, 0.0); cfg.k];
        let sigma = sigma_matrix(&frame.s_t, &frame.s_d, &frame.s_d, &w).unwrap();
        assert_eq!(sigma.frob(), 0.0);
        let (rank_one, rank) = rank_le_one_info(&sigma);
        assert!(!rank_one, "rank 0 is not a witness");
        assert_eq!(rank, 0);
    }

    #[test]
    fn silent_jammer_with_single_entry_change_is_a_witness() {
        // w = 0: bottom row vanishes, so a one-entry difference gives rank 1.
        let cfg = tiny_cfg(6, 2, 2, 3);
        let cons = make_constellation::<f64>(cfg.constellation);
        let mut rng = trial_rng(2, 0, Stream::Frame);
        let frame = draw_frame(&cfg, &cons, &mut rng).unwrap();
        let w = vec![C::new(0.0, 0.0); cfg.k];
        let mut tilde = frame.s_d.clone();
        let old = cons.slice(tilde[(0, 0)]);
        tilde[(0, 0)] = cons.point(old ^ 1);
        let sigma = sigma_matrix(&frame.s_t, &frame.s_d, &tilde, &w).unwrap();
        let (rank_one, _) = rank_le_one_info(&sigma);
        assert!(rank_one);
    }

    #[test]
    fn inactive_jammer_is_always_eclipsed() {
        let cfg = tiny_cfg(4, 1, 1, 2);
        let cons = make_constellation::<f64>(cfg.constellation);
        let s_t = CMat::from_fn(1, 1, |_, _| C::new(1.0, 0.0));
        let mut rng = trial_rng(3, 0, Stream::Frame);
        let s_d = CMat::from_fn(1, 2, |_, _| cons.point(rng.random_range(0..4)));
        let w = vec![C::new(0.0, 0.0); 3];
        let report = is_eclipsed_bruteforce(&s_t, &s_d, &w, &cons).unwrap();
        assert!(report.eclipsed);
        assert_eq!(report.sigma_rank, 1);
    }

    #[test]
    fn impersonating_jammer_is_eclipsed_with_row_witness() {
        let cfg = tiny_cfg(8, 2, 2, 2);
        let cons = make_constellation::<f64>(cfg.constellation);
        let mut rng = trial_rng(4, 0, Stream::Frame);
        let frame = draw_frame(&cfg, &cons, &mut rng).unwrap();
        let ue = 1usize;
        let mut w: Vec<C<f64>> = frame.s_t.row(ue).to_vec();
        let w_d: Vec<C<f64>> = (0..cfg.d).map(|_| cons.point(rng.random_range(0..4))).collect();
        w.extend_from_slice(&w_d);
        let report = is_eclipsed_bruteforce(&frame.s_t, &frame.s_d, &w, &cons).unwrap();
        assert!(report.eclipsed, "pilot replay must eclipse");
        // The canonical witness replaces row `ue` by w_D; verify that this
        // particular candidate is indeed a witness.
        let mut tilde = frame.s_d.clone();
        tilde.set_row(ue, &w_d);
        let sigma = sigma_matrix(&frame.s_t, &frame.s_d, &tilde, &w).unwrap();
        let (rank_one, _) = rank_le_one_info(&sigma);
        assert!(rank_one);
    }

    #[test]
    fn random_gaussian_jamming_never_eclipses_in_200_draws() {
        let cfg = tiny_cfg(6, 2, 2, 3);
        let cons = make_constellation::<f64>(cfg.constellation);
        for seed in 0..200u64 {
            let mut rng_f = trial_rng(5, seed, Stream::Frame);
            let mut rng_j = trial_rng(5, seed, Stream::Jammer);
            let frame = draw_frame(&cfg, &cons, &mut rng_f).unwrap();
            let w: Vec<C<f64>> = (0..cfg.k).map(|_| cn01::<f64>(&mut rng_j)).collect();
            let report = is_eclipsed_bruteforce(&frame.s_t, &frame.s_d, &w, &cons).unwrap();
            assert!(!report.eclipsed, "seed {seed} unexpectedly eclipsed");
        }
    }

    #[test]
    fn bruteforce_guard_rejects_large_instances() {
        let cons = make_constellation::<f64>(ConstellationKind::Qam16);
        let s_t = crate::scenario::hadamard::<f64>(4);
        let s_d = CMat::<f64>::zeros(4, 4);
        let w = vec![C::new(0.0, 0.0); 8];
        assert!(is_eclipsed_bruteforce(&s_t, &s_d, &w, &cons).is_err());
    }

    #[test]
    fn closed_form_inner_minimization_matches_grid_search() {
        // 2-D oracle equivalence: min over the unit sphere by brute grid.
        let mut rng = trial_rng(6, 0, Stream::Sample);
        for _ in 0..5 {
            let e = CMat::from_fn(2, 4, |_, _| cn01::<f64>(&mut rng));
            let closed = e.frob_sq() - lambda_max(&e.matmul(&e.herm()));
            let mut grid_min = f64::INFINITY;
            let n = 400;
            for a in 0..n {
                let theta = std::f64::consts::FRAC_PI_2 * a as f64 / (n - 1) as f64;
                for b in 0..n {
                    let phi = 2.0 * std::f64::consts::PI * b as f64 / n as f64;
                    let p = UnitVec::new(vec![
                        C::new(theta.cos(), 0.0),
                        C::from_polar(theta.sin(), phi),
                    ])
                    .unwrap();
                    let pe = crate::numerics::project_out(&p, &e);
                    grid_min = grid_min.min(pe.frob_sq());
                }
            }
            assert!(grid_min + 1e-12 >= closed, "grid below closed form");
            assert!((grid_min - closed) <= 1e-3 * e.frob_sq(), "gap {}", grid_min - closed);
        }
    }

    #[test]
    fn theorem1_tiny_instances_recover_uniquely() {
        let cfg = tiny_cfg(6, 2, 2, 3);
        let profile =
            JammerProfile::new(JammerKind::Barrage, SymbolLaw::Gaussian, PowerMode::RhoE, 30.0);
        let report = verify_theorem1(&cfg, &profile, 10).unwrap();
        assert_eq!(report.unique_recoveries, 10, "{:?}", report.first_failure);
        assert_eq!(report.failures, 0);
    }

    #[test]
    fn theorem1_requires_noiseless_config() {
        let mut cfg = tiny_cfg(6, 2, 2, 3);
        cfg.snr_db = 20.0;
        let profile =
            JammerProfile::new(JammerKind::Barrage, SymbolLaw::Gaussian, PowerMode::RhoE, 30.0);
        assert!(verify_theorem1(&cfg, &profile, 1).is_err());
    }

    #[test]
    fn eclipsed_instance_is_skipped_not_asserted() {
        // A data-dependent jammer eclipses by construction; the verifier
        // must report the skip rather than a failure.
        let cfg = tiny_cfg(6, 2, 2, 3);
        let profile = JammerProfile::new(
            JammerKind::DataDependent,
            SymbolLaw::Gaussian,
            PowerMode::RhoP,
            30.0,
        );
        let report = verify_theorem1(&cfg, &profile, 5).unwrap();
        assert_eq!(report.failures, 0, "{:?}", report.first_failure);
        assert_eq!(report.eclipsed_skipped, 5);
    }

    #[test]
    fn eclipse_bound_examples() {
        // QPSK, U = 4, D = 20: (12 - 20) log10 4.
        let b = eclipse_bound_log10(4, 4, 20);
        assert!((b - (-8.0 * 4f64.log10())).abs() < 1e-12);
        assert!((b - (-4.816479930623699)).abs() < 1e-9);
        assert!(10f64.powf(b) <= 1.6e-5);
        // 16-QAM, U = 32, D = 128: exponent (96 - 3712) log10 16.
        let b = eclipse_bound_log10(16, 32, 128);
        assert!((b - (-3616.0 * 16f64.log10())).abs() < 1e-6);
        assert!((b + 4354.1).abs() < 0.1);
        // D = 0: vacuous bound above 1.
        assert!(eclipse_bound_log10(4, 4, 0) > 0.0);
        // Monotone decreasing in D for U > 3.
        for d in 1..30 {
            assert!(eclipse_bound_log10(4, 5, d + 1) < eclipse_bound_log10(4, 5, d));
        }
    }
}
