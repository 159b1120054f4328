//! Shared iteration engine of the joint detectors.
//!
//! One loop serves both algorithms; they differ only in the step-size rule
//! (adaptive Barzilai-Borwein vs. a trained schedule), the symbol update
//! (box projection vs. posterior-mean approximation), and the presence of
//! momentum and output scaling. Setting momentum to zero, scales to one,
//! and swapping the posterior-mean update for the box projection reduces
//! the general loop to the parameter-free algorithm exactly.

use crate::error::{Error, Result};
use crate::maed::{bb_stepsize, preprocess, prox_box, COND_LIMIT, RIDGE_REL};
use crate::numerics::{pinv_wide_guarded, power_iter_step, project_out, CMat, UnitVec};
use crate::scalar::Scalar;
use crate::scenario::Constellation;
use crate::somaed::pma_with_llrs;

pub(crate) enum StepRule<'a> {
    BarzilaiBorwein { tau0: f64 },
    Scheduled(&'a [f64]),
}

pub(crate) enum UpdateRule<'a, T: Scalar> {
    BoxProx { lambda: T },
    Pma { cons: &'a Constellation<T>, rhos: &'a [f64] },
}

pub(crate) struct EngineConfig<'a, T: Scalar> {
    pub t_max: usize,
    pub n_users: usize,
    pub reg_scale: f64,
    pub step: StepRule<'a>,
    pub update: UpdateRule<'a, T>,
    /// Momentum weights per iteration; `None` disables the momentum term.
    pub gammas: Option<&'a [f64]>,
    /// Output scales per iteration; `None` means unit scale.
    pub alphas: Option<&'a [f64]>,
}

pub(crate) struct EngineOutput<T: Scalar> {
    /// Final transmit-matrix iterate, U x K.
    pub s_final: CMat<T>,
    /// Final subspace estimate.
    pub p_final: UnitVec<T>,
    /// Whether the power iteration ever stalled (zero product).
    pub stalled: bool,
    /// Data-block LLRs of the last iteration (PMA update only).
    pub final_llrs: Option<Vec<T>>,
    /// True iff the pilot block equaled `S_T` exactly after every iteration.
    pub pilot_block_fixed: bool,
    /// Worst per-iteration deviation of the subspace estimate from unit norm.
    pub max_unit_norm_err: T,
    /// True iff every iterate stayed finite.
    pub all_finite: bool,
    /// Step sizes actually used per iteration.
    pub taus_used: Vec<T>,
}

/// Residual state: `a = Y pinv(S~)` and `e = Y (I - pinv(S~) S~)`.
fn residual_state<T: Scalar>(
    y: &CMat<T>,
    s: &CMat<T>,
    iteration: usize,
) -> Result<(CMat<T>, CMat<T>)> {
    let pinv = pinv_wide_guarded(s, Some((T::c(COND_LIMIT), T::c(RIDGE_REL))))
        .map_err(|_| Error::IterationRankFailure { iteration })?;
    let a = y.matmul(&pinv);
    let e = y - &a.matmul(s);
    Ok((a, e))
}

pub(crate) fn run_engine<T: Scalar>(
    y: &CMat<T>,
    s_t: &CMat<T>,
    cfg: EngineConfig<'_, T>,
) -> Result<EngineOutput<T>> {
    let b = y.rows();
    let k = y.cols();
    let u = s_t.rows();
    let t = s_t.cols();
    if b != s_t.rows() && u != s_t.rows() {
        unreachable!();
    }
    if t >= k {
        return Err(Error::ShapeError(format!(
            "engine: frame has {k} slots but pilots occupy {t}"
        )));
    }
    match &cfg.step {
        StepRule::Scheduled(taus) => assert!(taus.len() >= cfg.t_max, "step schedule too short"),
        StepRule::BarzilaiBorwein { tau0 } => assert!(*tau0 > 0.0, "tau0 must be positive"),
    }
    if let UpdateRule::Pma { rhos, .. } = &cfg.update {
        assert!(rhos.len() >= cfg.t_max, "precision schedule too short");
    }

    // S~(0) = [S_T, 0], p~(0) from the regularized projection.
    let mut s = s_t.hstack(&CMat::zeros(u, k - t));
    let mut p = preprocess(y, cfg.n_users, cfg.reg_scale)?;

    let mut tau: T = match &cfg.step {
        StepRule::BarzilaiBorwein { tau0 } => T::c(*tau0),
        StepRule::Scheduled(taus) => T::c(taus[0]),
    };
    let mut s_prev: Option<CMat<T>> = None;
    let mut grad_prev: Option<CMat<T>> = None;
    let mut delta_prev: Option<CMat<T>> = None;
    let mut stalled = false;
    let mut pilot_block_fixed = true;
    let mut max_unit_norm_err = T::zero();
    let mut all_finite = true;
    let mut final_llrs: Option<Vec<T>> = None;
    let mut taus_used = Vec::with_capacity(cfg.t_max);

    let (mut a, mut e) = residual_state(y, &s, 0)?;
    for iter in 0..cfg.t_max {
        // Gradient of the projected residual objective at the current state.
        let pe = project_out(&p, &e);
        let grad = -&a.herm().matmul(&pe);

        match &cfg.step {
            StepRule::BarzilaiBorwein { .. } => {
                if let (Some(sp), Some(gp)) = (&s_prev, &grad_prev) {
                    tau = bb_stepsize(&(&s - sp), &(&grad - gp), tau);
                }
            }
            StepRule::Scheduled(taus) => tau = T::c(taus[iter]),
        }
        taus_used.push(tau);
        s_prev = Some(s.clone());
        grad_prev = Some(grad.clone());

        // Momentum step; gamma = 0 reduces to the plain gradient step.
        let mut delta = grad.scale_re(-tau);
        if let Some(gammas) = cfg.gammas {
            let gamma = gammas[iter];
            if gamma != 0.0 {
                if let Some(dp) = &delta_prev {
                    delta = &delta + &dp.scale_re(T::c(gamma));
                }
            }
        }
        let mut x = &s + &delta;
        delta_prev = Some(delta);

        if let Some(alphas) = cfg.alphas {
            let alpha = alphas[iter];
            if alpha != 1.0 {
                x = x.scale_re(T::c(alpha));
            }
        }

        s = match &cfg.update {
            UpdateRule::BoxProx { lambda } => prox_box(&x, s_t, *lambda),
            UpdateRule::Pma { cons, rhos } => {
                let nu = T::one() / T::c(rhos[iter]);
                if iter + 1 == cfg.t_max {
                    let mut llrs = Vec::new();
                    let out = pma_with_llrs(&x, nu, s_t, cons, Some(&mut llrs));
                    final_llrs = Some(llrs);
                    out
                } else {
                    pma_with_llrs(&x, nu, s_t, cons, None)
                }
            }
        };

        // Iteration diagnostics.
        for r in 0..u {
            for c in 0..t {
                if s[(r, c)] != s_t[(r, c)] {
                    pilot_block_fixed = false;
                }
            }
        }
        all_finite &= s.is_finite();

        // Residual for the subspace update; also the gradient state of the
        // next iteration.
        let (na, ne) = residual_state(y, &s, iter + 1)?;
        a = na;
        e = ne;
        let (np, st) = power_iter_step(&e, &p);
        stalled |= st;
        let norm_err = (np
            .as_slice()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<T>()
            .sqrt()
            - T::one())
        .abs();
        max_unit_norm_err = max_unit_norm_err.max(norm_err);
        p = np;
    }

    Ok(EngineOutput {
        s_final: s,
        p_final: p,
        stalled,
        final_llrs,
        pilot_block_fixed,
        max_unit_norm_err,
        all_finite,
        taus_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::rayleigh;
    use crate::jammer::{apply, synthesize, JammerKind, JammerProfile, SymbolLaw};
    use crate::maed::{run_maed, MaedConfig};
    use crate::rng::{cn01, trial_rng, Stream};
    use crate::scalar::C;
    use crate::scenario::{
        draw_frame, make_constellation, noise_var, ConstellationKind, PilotMode, PowerMode,
        SystemConfig,
    };

    fn cfg(b: usize, u: usize, t: usize, d: usize, snr_db: f64) -> SystemConfig {
        SystemConfig {
            b,
            u,
            k: t + d,
            t,
            d,
            constellation: ConstellationKind::Qpsk,
            snr_db,
            seed: 0,
            pilots: PilotMode::Hadamard,
        }
    }

    fn jammed_receive(c: &SystemConfig, seed: u64) -> (CMat<f64>, CMat<f64>) {
        let cons = make_constellation::<f64>(c.constellation);
        let mut rf = trial_rng(seed, 0, Stream::Frame);
        let mut rc = trial_rng(seed, 0, Stream::Channel);
        let mut rj = trial_rng(seed, 0, Stream::Jammer);
        let mut rn = trial_rng(seed, 0, Stream::Noise);
        let frame = draw_frame(c, &cons, &mut rf).unwrap();
        let real = rayleigh::<f64>(c.b, c.u, &mut rc);
        let profile =
            JammerProfile::new(JammerKind::Barrage, SymbolLaw::Gaussian, PowerMode::RhoE, 30.0);
        let seq = synthesize(&profile, c, &frame, &cons, &mut rj).unwrap();
        let n0 = noise_var::<f64>(c);
        let noise = CMat::from_fn(c.b, c.k, |_, _| cn01::<f64>(&mut rn) * n0.sqrt());
        let y = &apply(&real.h.matmul(&frame.s()), &real.j, &seq.w).unwrap() + &noise;
        (y, frame.s_t)
    }

    #[test]
    fn general_loop_reduces_to_the_box_algorithm_bitwise() {
        // Zero momentum, unit scales, box update, BB steps: the general
        // (soft-output-shaped) loop must reproduce the parameter-free
        // algorithm's trajectory exactly.
        let c = cfg(12, 2, 2, 8, 15.0);
        let (y, s_t) = jammed_receive(&c, 42);
        let cons = make_constellation::<f64>(c.constellation);
        let mcfg = MaedConfig::default();
        let zeros = vec![0.0; mcfg.t_max];
        let ones = vec![1.0; mcfg.t_max];
        let reduced = run_engine(
            &y,
            &s_t,
            EngineConfig {
                t_max: mcfg.t_max,
                n_users: c.u,
                reg_scale: mcfg.reg_scale,
                step: StepRule::BarzilaiBorwein { tau0: mcfg.tau0 },
                update: UpdateRule::BoxProx { lambda: cons.lambda() },
                gammas: Some(&zeros),
                alphas: Some(&ones),
            },
        )
        .unwrap();
        let plain = run_engine(
            &y,
            &s_t,
            EngineConfig {
                t_max: mcfg.t_max,
                n_users: c.u,
                reg_scale: mcfg.reg_scale,
                step: StepRule::BarzilaiBorwein { tau0: mcfg.tau0 },
                update: UpdateRule::BoxProx { lambda: cons.lambda() },
                gammas: None,
                alphas: None,
            },
        )
        .unwrap();
        assert_eq!(reduced.s_final.as_slice(), plain.s_final.as_slice());
        assert_eq!(reduced.p_final, plain.p_final);
        // And both match the public detector's output block.
        let det = run_maed(&y, &s_t, &cons, &mcfg).unwrap();
        assert_eq!(
            det.s_hat.as_slice(),
            plain.s_final.col_block(c.t, c.k).as_slice()
        );
    }

    #[test]
    fn iterates_stay_finite_with_fixed_pilots_and_unit_directions() {
        for seed in [1u64, 2, 3] {
            let c = cfg(16, 4, 4, 10, 5.0);
            let (y, s_t) = jammed_receive(&c, seed);
            let cons = make_constellation::<f64>(c.constellation);
            let out = run_engine(
                &y,
                &s_t,
                EngineConfig {
                    t_max: 25,
                    n_users: c.u,
                    reg_scale: 0.1,
                    step: StepRule::BarzilaiBorwein { tau0: 0.1 },
                    update: UpdateRule::BoxProx { lambda: cons.lambda() },
                    gammas: None,
                    alphas: None,
                },
            )
            .unwrap();
            assert!(out.all_finite);
            assert!(out.pilot_block_fixed);
            assert!(out.max_unit_norm_err <= 1e-12);
            // Bounded by the box plus pilots.
            assert!(out.s_final.max_abs() <= s_t.max_abs().max(cons.lambda()) + 1e-12);
        }
    }
}

