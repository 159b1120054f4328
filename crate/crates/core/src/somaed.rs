//! Soft-output detection with a posterior-mean symbol estimator and trained
//! per-iteration parameters.
//!
//! The gradient-step outputs are modeled as the true symbols plus i.i.d.
//! circularly-symmetric Gaussian error of variance `nu`; per-bit LLRs follow
//! from that model (exact for QPSK, max-log for 16-QAM), are converted to
//! bit probabilities, and mapped back to symbol means. This replaces the box
//! projection of the parameter-free detector and yields soft outputs.

use crate::baselines::DetectionResult;
use crate::error::{Error, Result};
use crate::fbs::{run_engine, EngineConfig, StepRule, UpdateRule};
use crate::numerics::CMat;
use crate::scalar::{Scalar, C};
use crate::scenario::{Constellation, ConstellationKind};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// LLR magnitudes are clipped here before any tanh; tanh saturates to 1.0
/// in f64 far below this, so the clip only guards against overflow in
/// downstream arithmetic.
pub const LLR_CLIP: f64 = 80.0;

/// Bit probabilities are clipped into `[PROB_CLIP, 1 - PROB_CLIP]` so logs
/// of them stay finite.
pub const PROB_CLIP: f64 = 1e-12;

/// Per-bit LLRs for one received value under the Gaussian error model with
/// variance `nu`. Exact for QPSK; max-log for 16-QAM.
pub fn llr<T: Scalar>(x: C<T>, nu: T, cons: &Constellation<T>) -> Vec<T> {
    let mut out = vec![T::zero(); cons.bits_per_symbol()];
    llr_into(x, nu, cons, &mut out);
    out
}

pub(crate) fn llr_into<T: Scalar>(x: C<T>, nu: T, cons: &Constellation<T>, out: &mut [T]) {
    debug_assert!(nu > T::zero(), "error variance must be positive");
    let lambda = cons.lambda();
    let clip = T::c(LLR_CLIP);
    let clamp = |v: T| v.min(clip).max(-clip);
    match cons.kind() {
        ConstellationKind::Qpsk => {
            let four_lambda = lambda * T::c(4.0);
            out[0] = clamp(four_lambda * x.re / nu);
            out[1] = clamp(four_lambda * x.im / nu);
        }
        ConstellationKind::Qam16 => {
            let two_thirds = lambda * T::c(2.0 / 3.0);
            let axis_sign = |r: T| {
                two_thirds
                    * (T::c(4.0) * r + (r - two_thirds).abs() - (r + two_thirds).abs())
            };
            let axis_inner = |r: T| T::c(2.0) * two_thirds * (two_thirds - r.abs());
            out[0] = clamp(axis_sign(x.re) / nu);
            out[1] = clamp(axis_inner(x.re) / nu);
            out[2] = clamp(axis_sign(x.im) / nu);
            out[3] = clamp(axis_inner(x.im) / nu);
        }
    }
}

/// Converts an LLR to the probability that the bit is 1:
/// `p = (1 + tanh(L / 2)) / 2`, clipped away from {0, 1}.
#[inline]
pub fn bit_prob<T: Scalar>(llr: T) -> T {
    let p = (T::one() + (llr * T::c(0.5)).tanh()) * T::c(0.5);
    p.min(T::one() - T::c(PROB_CLIP)).max(T::c(PROB_CLIP))
}

/// Elementwise [`bit_prob`].
pub fn bit_probabilities<T: Scalar>(llrs: &[T]) -> Vec<T> {
    llrs.iter().map(|&l| bit_prob(l)).collect()
}

/// Symbol mean from per-bit probabilities.
pub fn symbol_mean<T: Scalar>(probs: &[T], cons: &Constellation<T>) -> C<T> {
    let lambda = cons.lambda();
    let two = T::c(2.0);
    match cons.kind() {
        ConstellationKind::Qpsk => C::new(
            lambda * (two * probs[0] - T::one()),
            lambda * (two * probs[1] - T::one()),
        ),
        ConstellationKind::Qam16 => {
            let third = lambda / T::c(3.0);
            C::new(
                third * (two * probs[0] - T::one()) * (T::c(3.0) - two * probs[1]),
                third * (two * probs[2] - T::one()) * (T::c(3.0) - two * probs[3]),
            )
        }
    }
}

/// Posterior-mean approximation over a full transmit matrix: pilot columns
/// are restored to `S_T` (they are known at the receiver), and every data
/// entry is replaced by the symbol mean of its bit posteriors.
pub fn pma<T: Scalar>(x: &CMat<T>, nu: T, s_t: &CMat<T>, cons: &Constellation<T>) -> CMat<T> {
    pma_with_llrs(x, nu, s_t, cons, None)
}

/// [`pma`] that can also export the data-block LLRs in (user, slot, bit)
/// order; used at the final iteration for soft outputs.
pub(crate) fn pma_with_llrs<T: Scalar>(
    x: &CMat<T>,
    nu: T,
    s_t: &CMat<T>,
    cons: &Constellation<T>,
    mut llrs_out: Option<&mut Vec<T>>,
) -> CMat<T> {
    let t = s_t.cols();
    let bps = cons.bits_per_symbol();
    let mut scratch = [T::zero(); 4];
    let mut probs = [T::zero(); 4];
    let mut out = CMat::zeros(x.rows(), x.cols());
    if let Some(v) = llrs_out.as_deref_mut() {
        v.clear();
        v.reserve(x.rows() * (x.cols() - t) * bps);
    }
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            if c < t {
                out[(r, c)] = s_t[(r, c)];
                continue;
            }
            llr_into(x[(r, c)], nu, cons, &mut scratch[..bps]);
            for i in 0..bps {
                probs[i] = bit_prob(scratch[i]);
            }
            out[(r, c)] = symbol_mean(&probs[..bps], cons);
            if let Some(v) = llrs_out.as_deref_mut() {
                v.extend_from_slice(&scratch[..bps]);
            }
        }
    }
    out
}

/// Trainable weights of one iteration.
#[derive(Copy, Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IterParams {
    /// Gradient step size.
    pub tau: f64,
    /// Momentum weight.
    pub gamma: f64,
    /// Output scale applied before the symbol estimator.
    pub alpha: f64,
    /// Error precision `1 / nu` of the Gaussian symbol-error model.
    pub rho: f64,
}

/// Per-iteration parameter schedule.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ParameterSet {
    pub iters: Vec<IterParams>,
}

impl ParameterSet {
    /// Untrained initialization: `tau = 0.1`, no momentum, unit scale, and a
    /// geometric precision ramp from 1 to 100 across the iterations
    /// (matching a shrinking residual error variance).
    pub fn default_init(t_max: usize) -> Self {
        assert!(t_max >= 1);
        let iters = (0..t_max)
            .map(|t| {
                let frac = if t_max > 1 { t as f64 / (t_max - 1) as f64 } else { 1.0 };
                IterParams { tau: 0.1, gamma: 0.0, alpha: 1.0, rho: 10f64.powf(2.0 * frac) }
            })
            .collect();
        Self { iters }
    }

    pub fn len(&self) -> usize {
        self.iters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iters.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (t, p) in self.iters.iter().enumerate() {
            let all_finite = p.tau.is_finite()
                && p.gamma.is_finite()
                && p.alpha.is_finite()
                && p.rho.is_finite();
            if !all_finite || !(p.rho > 0.0) || !(p.tau > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "/params/{t}: tau and rho must be positive and all weights finite, got {p:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn taus(&self) -> Vec<f64> {
        self.iters.iter().map(|p| p.tau).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.iters.iter().map(|p| p.gamma).collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.iters.iter().map(|p| p.alpha).collect()
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.iters.iter().map(|p| p.rho).collect()
    }
}

/// On-disk parameter format: one parameter set per constellation and
/// dimension tuple.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParameterFile {
    pub version: u32,
    pub constellation: ConstellationKind,
    pub b: usize,
    pub u: usize,
    pub k: usize,
    pub params: Vec<IterParams>,
}

impl ParameterFile {
    pub const VERSION: u32 = 1;

    pub fn new(
        constellation: ConstellationKind,
        b: usize,
        u: usize,
        k: usize,
        set: &ParameterSet,
    ) -> Self {
        Self { version: Self::VERSION, constellation, b, u, k, params: set.iters.clone() }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, serde_json::to_string_pretty(self)?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.version != Self::VERSION {
            return Err(Error::InvalidConfig(format!(
                "/version: unsupported parameter file version {}",
                file.version
            )));
        }
        let set = ParameterSet { iters: file.params.clone() };
        set.validate()?;
        Ok(file)
    }

    /// Checks the header against a system's dimensions.
    pub fn check_dims(
        &self,
        constellation: ConstellationKind,
        b: usize,
        u: usize,
        k: usize,
    ) -> Result<()> {
        if self.constellation != constellation || self.b != b || self.u != u || self.k != k {
            return Err(Error::InvalidConfig(format!(
                "parameter file is for {:?} B={} U={} K={}, system is {:?} B={b} U={u} K={k}",
                self.constellation, self.b, self.u, self.k, constellation
            )));
        }
        Ok(())
    }

    pub fn parameter_set(&self) -> ParameterSet {
        ParameterSet { iters: self.params.clone() }
    }
}

/// Iteration count and preprocessing scale for the soft-output detector.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SomaedConfig {
    pub t_max: usize,
    pub reg_scale: f64,
}

impl Default for SomaedConfig {
    fn default() -> Self {
        Self { t_max: 20, reg_scale: 0.1 }
    }
}

/// Soft detector outputs: consistent LLRs, bit probabilities, and symbol
/// means for the data block.
#[derive(Clone, Debug)]
pub struct SoftOutput<T: Scalar> {
    /// Per-bit LLRs in (user, slot, bit) order.
    pub llrs: Vec<T>,
    /// `bit_prob` of each LLR.
    pub bit_probs: Vec<T>,
    /// Symbol means of the final iteration, U x D.
    pub s_hat: CMat<T>,
}

/// Runs the soft-output detector with a parameter schedule.
///
/// Hard bits are the LLR signs (ties break toward 0), which coincide with
/// hard-slicing the symbol means.
pub fn run_somaed<T: Scalar>(
    y: &CMat<T>,
    s_t: &CMat<T>,
    cons: &Constellation<T>,
    params: &ParameterSet,
    cfg: &SomaedConfig,
) -> Result<(DetectionResult<T>, SoftOutput<T>)> {
    run_somaed_with_report(y, s_t, cons, params, cfg).map(|(det, soft, _)| (det, soft))
}

/// [`run_somaed`] plus iteration diagnostics.
pub fn run_somaed_with_report<T: Scalar>(
    y: &CMat<T>,
    s_t: &CMat<T>,
    cons: &Constellation<T>,
    params: &ParameterSet,
    cfg: &SomaedConfig,
) -> Result<(DetectionResult<T>, SoftOutput<T>, crate::maed::IterationReport<T>)> {
    if params.len() < cfg.t_max {
        return Err(Error::InvalidConfig(format!(
            "parameter schedule has {} iterations, detector needs {}",
            params.len(),
            cfg.t_max
        )));
    }
    params.validate()?;
    let taus = params.taus();
    let gammas = params.gammas();
    let alphas = params.alphas();
    let rhos = params.rhos();
    let out = run_engine(
        y,
        s_t,
        EngineConfig {
            t_max: cfg.t_max,
            n_users: s_t.rows(),
            reg_scale: cfg.reg_scale,
            step: StepRule::Scheduled(&taus),
            update: UpdateRule::Pma { cons, rhos: &rhos },
            gammas: Some(&gammas),
            alphas: Some(&alphas),
        },
    )?;
    let llrs = out.final_llrs.expect("PMA engine always produces final LLRs");
    let bit_probs = bit_probabilities(&llrs);
    let s_hat = out.s_final.col_block(s_t.cols(), y.cols());
    let bits_hat: Vec<u8> = llrs.iter().map(|&l| u8::from(l > T::zero())).collect();
    let det = DetectionResult { s_hat: s_hat.clone(), bits_hat, llrs: Some(llrs.clone()) };
    let report = crate::maed::IterationReport {
        stalled: out.stalled,
        pilot_block_fixed: out.pilot_block_fixed,
        max_unit_norm_err: out.max_unit_norm_err,
        all_finite: out.all_finite,
        taus_used: out.taus_used,
        nulled_direction: out.p_final,
    };
    Ok((det, SoftOutput { llrs, bit_probs, s_hat }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::rayleigh;
    use crate::jammer::{apply, synthesize, JammerKind, JammerProfile, SymbolLaw};
    use crate::rng::{cn01, trial_rng, Stream};
    use crate::scenario::{
        draw_frame, make_constellation, ConstellationKind, PilotMode, PowerMode, SystemConfig,
    };

    #[test]
    fn qpsk_llr_matches_exact_posterior() {
        let cons = make_constellation::<f64>(ConstellationKind::Qpsk);
        let lambda = cons.lambda();
        // Hand value: x = lambda (1 + i), nu = 1 gives [2, 2] since
        // 4 lambda^2 = 2.
        let l = llr(C::new(lambda, lambda), 1.0, &cons);
        assert!((l[0] - 2.0).abs() < 1e-12 && (l[1] - 2.0).abs() < 1e-12);
        // Zero input, zero LLRs.
        let l = llr(C::new(0.0, 0.0), 0.37, &cons);
        assert_eq!(l, vec![0.0, 0.0]);
        // Oracle: log-sum posterior ratio over the constellation with
        // per-axis variance nu / 2 equals the formula exactly for QPSK.
        let mut rng = trial_rng(1, 0, Stream::Sample);
        for _ in 0..50 {
            let x = cn01::<f64>(&mut rng);
            let nu = 0.63;
            let l = llr(x, nu, &cons);
            for bit in 0..2 {
                let mut num = 0.0f64;
                let mut den = 0.0f64;
                for label in 0..4u8 {
                    let s = cons.point(label);
                    let metric = (-(x - s).norm_sqr() / nu).exp();
                    if (label >> bit) & 1 == 1 {
                        num += metric;
                    } else {
                        den += metric;
                    }
                }
                let exact = (num / den).ln();
                assert!((l[bit] - exact).abs() <= 1e-10 * exact.abs().max(1.0));
            }
        }
    }

    #[test]
    fn qam16_llr_matches_max_log_oracle() {
        let cons = make_constellation::<f64>(ConstellationKind::Qam16);
        let mut rng = trial_rng(2, 0, Stream::Sample);
        for _ in 0..200 {
            let x = cn01::<f64>(&mut rng).scale(1.5);
            let nu = 0.4;
            let l = llr(x, nu, &cons);
            for bit in 0..4 {
                let mut best1 = f64::INFINITY;
                let mut best0 = f64::INFINITY;
                for label in 0..16u8 {
                    let d = (x - cons.point(label)).norm_sqr();
                    if (label >> bit) & 1 == 1 {
                        best1 = best1.min(d);
                    } else {
                        best0 = best0.min(d);
                    }
                }
                let maxlog = (best0 - best1) / nu;
                assert!(
                    (l[bit] - maxlog).abs() <= 1e-10 * maxlog.abs().max(1.0),
                    "bit {bit}: {l:?} vs {maxlog}"
                );
            }
        }
    }

    #[test]
    fn qam16_llr_signs_at_outer_point() {
        let cons = make_constellation::<f64>(ConstellationKind::Qam16);
        let lambda = cons.lambda();
        let l = llr(C::new(lambda, 0.0), 1.0, &cons);
        assert!(l[0] > 0.0, "sign bit favors 1 at +lambda");
        // Bit 2 value is (4 lambda / 3)(2 lambda / 3 - lambda) < 0: outer.
        let expect = (4.0 * lambda / 3.0) * (2.0 * lambda / 3.0 - lambda);
        assert!((l[1] - expect).abs() < 1e-12 && l[1] < 0.0);
    }

    #[test]
    fn bit_probabilities_formula_and_clipping() {
        assert_eq!(bit_prob(0.0f64), 0.5);
        assert!((bit_prob(2.0f64) - 0.8807970779778823).abs() < 1e-12);
        assert_eq!(bit_prob(1e6f64), 1.0 - PROB_CLIP);
        assert_eq!(bit_prob(-1e6f64), PROB_CLIP);
    }

    #[test]
    fn symbol_mean_table() {
        let qpsk = make_constellation::<f64>(ConstellationKind::Qpsk);
        let lambda = qpsk.lambda();
        // Indifferent bits give the constellation mean 0.
        let m = symbol_mean(&[0.5, 0.5], &qpsk);
        assert_eq!(m, C::new(0.0, 0.0));
        // Certain bit 1 on the real axis gives +lambda.
        let m = symbol_mean(&[1.0, 0.5], &qpsk);
        assert!((m.re - lambda).abs() < 1e-12);

        let qam = make_constellation::<f64>(ConstellationKind::Qam16);
        let lam = qam.lambda();
        // All-ones probabilities map to the inner corner point.
        let m = symbol_mean(&[1.0, 1.0, 1.0, 1.0], &qam);
        assert!((m.re - lam / 3.0).abs() < 1e-12 && (m.im - lam / 3.0).abs() < 1e-12);
        // And that point's Gray label is (1,1,1,1).
        assert_eq!(qam.slice(m), 0b1111);
    }

    #[test]
    fn pma_limits_and_box_containment() {
        for kind in [ConstellationKind::Qpsk, ConstellationKind::Qam16] {
            let cons = make_constellation::<f64>(kind);
            let s_t = crate::scenario::hadamard::<f64>(2);
            let mut rng = trial_rng(3, 0, Stream::Sample);
            // nu -> 0: hard decision to the nearest point.
            for label in 0..kind.size() as u8 {
                let point = cons.point(label);
                let x = CMat::from_fn(2, 4, |_, _| point + cn01::<f64>(&mut rng).scale(0.01));
                let out = pma(&x, 1e-8, &s_t, &cons);
                for c in 2..4 {
                    for r in 0..2 {
                        assert!((out[(r, c)] - cons.point(cons.slice(x[(r, c)]))).norm() < 1e-9);
                    }
                }
            }
            // nu -> inf: data entries collapse to the prior mean 0.
            let x = CMat::from_fn(2, 4, |_, _| cn01::<f64>(&mut rng));
            let out = pma(&x, 1e12, &s_t, &cons);
            for c in 2..4 {
                for r in 0..2 {
                    assert!(out[(r, c)].norm() < 1e-9);
                }
            }
            // Pilot block is exactly S_T, outputs inside the box.
            let x = CMat::from_fn(2, 4, |_, _| cn01::<f64>(&mut rng).scale(5.0));
            let out = pma(&x, 0.3, &s_t, &cons);
            for r in 0..2 {
                for c in 0..2 {
                    assert_eq!(out[(r, c)], s_t[(r, c)]);
                }
                for c in 2..4 {
                    let z = out[(r, c)];
                    assert!(z.re.abs() <= cons.lambda() && z.im.abs() <= cons.lambda());
                }
            }
        }
    }

    #[test]
    fn parameter_set_default_and_file_roundtrip() {
        let set = ParameterSet::default_init(20);
        set.validate().unwrap();
        assert_eq!(set.len(), 20);
        assert!((set.iters[0].rho - 1.0).abs() < 1e-12);
        assert!((set.iters[19].rho - 100.0).abs() < 1e-9);
        assert!(set.iters.windows(2).all(|w| w[1].rho > w[0].rho));

        let dir = std::env::temp_dir().join("jamsim_params");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.json");
        let file = ParameterFile::new(ConstellationKind::Qpsk, 32, 8, 40, &set);
        file.save(&path).unwrap();
        let back = ParameterFile::load(&path).unwrap();
        assert_eq!(back.parameter_set(), set);
        assert!(back.check_dims(ConstellationKind::Qpsk, 32, 8, 40).is_ok());
        assert!(back.check_dims(ConstellationKind::Qpsk, 64, 8, 40).is_err());
    }

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

    #[test]
    fn run_somaed_recovers_tiny_noiseless_instances() {
        let c = cfg(8, 2, 2, 8, f64::INFINITY);
        let cons = make_constellation::<f64>(c.constellation);
        // Trained-like schedule for these dimensions: moderate steps with
        // momentum converge where the untrained default is too slow.
        let params = ParameterSet {
            iters: (0..20)
                .map(|t| IterParams {
                    tau: 0.2,
                    gamma: 0.5,
                    alpha: 1.0,
                    rho: 10f64.powf(2.0 * t as f64 / 19.0),
                })
                .collect(),
        };
        let scfg = SomaedConfig::default();
        let mut exact = 0;
        let trials = 100;
        for i in 0..trials {
            let mut rf = trial_rng(4, i, Stream::Frame);
            let mut rc = trial_rng(4, i, Stream::Channel);
            let mut rj = trial_rng(4, i, Stream::Jammer);
            let frame = draw_frame(&c, &cons, &mut rf).unwrap();
            let real = rayleigh::<f64>(c.b, c.u, &mut rc);
            let profile =
                JammerProfile::new(JammerKind::Barrage, SymbolLaw::Gaussian, PowerMode::RhoE, 30.0);
            let seq = synthesize(&profile, &c, &frame, &cons, &mut rj).unwrap();
            let y = apply(&real.h.matmul(&frame.s()), &real.j, &seq.w).unwrap();
            let (det, soft) = run_somaed(&y, &frame.s_t, &cons, &params, &scfg).unwrap();
            if det.bits_hat == frame.bits(2) {
                exact += 1;
            }
            // Soft-output consistency identities.
            for (p, l) in soft.bit_probs.iter().zip(&soft.llrs) {
                assert!((p - bit_prob(*l)).abs() < 1e-15);
            }
            for u in 0..c.u {
                for d in 0..c.d {
                    let probs = &soft.bit_probs[(u * c.d + d) * 2..(u * c.d + d) * 2 + 2];
                    let m = symbol_mean(probs, &cons);
                    assert!((soft.s_hat[(u, d)] - m).norm() < 1e-12);
                }
            }
            // Bit decisions equal argmax of bit probabilities.
            for (bit, p) in det.bits_hat.iter().zip(&soft.bit_probs) {
                assert_eq!(*bit == 1, *p > 0.5);
            }
        }
        assert!(exact >= 90, "exact recoveries: {exact}/{trials}");
    }

    #[test]
    fn large_precisions_approach_hard_decision_iterates() {
        // Regression guard: with gamma = 0, alpha = 1, and huge rho, the
        // symbol update acts like a hard slicer on one frozen instance.
        let c = cfg(8, 2, 2, 4, 20.0);
        let cons = make_constellation::<f64>(c.constellation);
        let mut rf = trial_rng(5, 0, Stream::Frame);
        let mut rc = trial_rng(5, 0, Stream::Channel);
        let mut rn = trial_rng(5, 0, Stream::Noise);
        let frame = draw_frame(&c, &cons, &mut rf).unwrap();
        let real = rayleigh::<f64>(c.b, c.u, &mut rc);
        let n0 = crate::scenario::noise_var::<f64>(&c);
        let noise = CMat::from_fn(c.b, c.k, |_, _| cn01::<f64>(&mut rn) * n0.sqrt());
        let y = &real.h.matmul(&frame.s()) + &noise;
        let hard = ParameterSet {
            iters: (0..20)
                .map(|_| IterParams { tau: 0.1, gamma: 0.0, alpha: 1.0, rho: 1e9 })
                .collect(),
        };
        let (det, _) = run_somaed(&y, &frame.s_t, &cons, &hard, &SomaedConfig::default()).unwrap();
        // Every output entry sits exactly on a constellation point.
        for z in det.s_hat.as_slice() {
            let nearest = cons.point(cons.slice(*z));
            assert!((z - nearest).norm() < 1e-6, "entry {z:?} not a hard decision");
        }
    }

    #[test]
    fn run_somaed_checks_parameter_count() {
        let c = cfg(8, 2, 2, 4, 10.0);
        let cons = make_constellation::<f64>(c.constellation);
        let y = CMat::<f64>::zeros(c.b, c.k);
        let s_t = crate::scenario::hadamard::<f64>(2);
        let params = ParameterSet::default_init(5);
        let err = run_somaed(&y, &s_t, &cons, &params, &SomaedConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}
