//! Derivative-free training of the soft-output detector's per-iteration
//! weights.
//!
//! The loss is the weighted empirical binary cross-entropy between the
//! transmitted bits and the detector's final-iteration bit probabilities.
//! As a log-likelihood it is nonpositive and would be maximized; this
//! module minimizes its negation. Gradients are estimated from two loss
//! evaluations per step by simultaneous perturbation (or, opt-in, by
//! coordinate central differences) and fed to an Adam-style update.
//! Positivity of the step sizes and precisions is kept by optimizing their
//! logarithms.

use crate::channel::rayleigh;
use crate::error::{Error, Result};
use crate::jammer::{apply, synthesize, JammerKind, JammerProfile, SymbolLaw};
use crate::numerics::CMat;
use crate::rng::{cn01, mix, trial_rng, Stream};
use crate::scenario::{
    draw_frame, make_constellation, noise_var, Constellation, PowerMode, SystemConfig,
};
use crate::somaed::{run_somaed, ParameterSet, SomaedConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Jammer strengths (total receive energy relative to the average UE, dB)
/// represented in the training set.
pub const TRAIN_POWERS_DB: [f64; 6] =
    [f64::NEG_INFINITY, 0.0, 10.0, 20.0, 40.0, 80.0];

/// One training sample: a full receive matrix with its ground truth and a
/// difficulty weight.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub y: CMat<f64>,
    pub s_t: CMat<f64>,
    /// Transmitted data bits in (user, slot, bit) order.
    pub bits: Vec<u8>,
    pub jammer: String,
    pub snr_db: f64,
    /// Inverse of the baseline detector's loss on this sample.
    pub weight: f64,
}

/// Negated per-sample binary cross-entropy (base 2), nonnegative.
pub fn sample_bce(bit_probs: &[f64], bits: &[u8]) -> f64 {
    debug_assert_eq!(bit_probs.len(), bits.len());
    let mut acc = 0.0;
    for (&p, &b) in bit_probs.iter().zip(bits) {
        acc -= if b == 1 { p.log2() } else { (1.0 - p).log2() };
    }
    acc
}

/// Weighted loss of a parameter set over a batch of samples.
pub fn bce_loss(
    params: &ParameterSet,
    batch: &[&TrainingSample],
    cons: &Constellation<f64>,
    scfg: &SomaedConfig,
) -> Result<f64> {
    let per_sample: Vec<Result<f64>> = batch
        .par_iter()
        .map(|sample| {
            let (_, soft) = run_somaed(&sample.y, &sample.s_t, cons, params, scfg)?;
            Ok(sample.weight * sample_bce(&soft.bit_probs, &sample.bits))
        })
        .collect();
    let mut total = 0.0;
    for v in per_sample {
        total += v?;
    }
    if !total.is_finite() {
        return Err(Error::TrainingDiverged(format!("batch loss is {total}")));
    }
    Ok(total)
}

/// Generates pilot-jammer training samples over the six canonical power
/// levels and the given SNR grid, weighting each sample by the inverse of
/// the untrained baseline's loss on it.
pub fn make_training_set(
    cfg: &SystemConfig,
    n_samples: usize,
    snr_grid_db: &[f64],
    t_max: usize,
    seed: u64,
) -> Result<Vec<TrainingSample>> {
    cfg.validate()?;
    if snr_grid_db.is_empty() {
        return Err(Error::InvalidConfig("/train/snr_grid_db: must be nonempty".into()));
    }
    let cons = make_constellation::<f64>(cfg.constellation);
    let baseline = ParameterSet::default_init(t_max);
    let scfg = SomaedConfig { t_max, ..Default::default() };
    let samples: Vec<Result<TrainingSample>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let snr_db = snr_grid_db[(i as usize) % snr_grid_db.len()];
            let power_db = TRAIN_POWERS_DB[(i as usize) % TRAIN_POWERS_DB.len()];
            let sys = SystemConfig { snr_db, ..cfg.clone() };
            let profile =
                JammerProfile::new(JammerKind::Pilot, SymbolLaw::Gaussian, PowerMode::RhoE, power_db);
            let mut rc = trial_rng(seed, i, Stream::Channel);
            let mut rf = trial_rng(seed, i, Stream::Frame);
            let mut rn = trial_rng(seed, i, Stream::Noise);
            let mut rj = trial_rng(seed, i, Stream::Jammer);
            let real = rayleigh::<f64>(sys.b, sys.u, &mut rc);
            let frame = draw_frame(&sys, &cons, &mut rf)?;
            let seq = synthesize(&profile, &sys, &frame, &cons, &mut rj)?;
            let n0 = noise_var::<f64>(&sys);
            let mut y = apply(&real.h.matmul(&frame.s()), &real.j, &seq.w)?;
            if n0 > 0.0 {
                let noise = CMat::from_fn(sys.b, sys.k, |_, _| cn01::<f64>(&mut rn) * n0.sqrt());
                y = &y + &noise;
            }
            let bits = frame.bits(cons.bits_per_symbol());
            let (_, soft) = run_somaed(&y, &frame.s_t, &cons, &baseline, &scfg)?;
            // Inverse baseline loss, floored at one bit: near-perfect easy
            // samples would otherwise get weights around 1/(bits * clip)
            // and a single flipped bit on them would dwarf the whole set.
            let base_loss = sample_bce(&soft.bit_probs, &bits);
            Ok(TrainingSample {
                y,
                s_t: frame.s_t.clone(),
                bits,
                jammer: profile.describe(),
                snr_db,
                weight: 1.0 / base_loss.max(1.0),
            })
        })
        .collect();
    samples.into_iter().collect()
}

/// How loss gradients are estimated.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradEstimator {
    /// Simultaneous perturbation: two loss evaluations per estimate.
    #[default]
    Spsa,
    /// Coordinate central differences: two evaluations per parameter.
    CentralDiff,
}

/// Trainer options.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOpts {
    pub epochs: usize,
    /// Adam learning rate in the transformed parameter space.
    pub lr: f64,
    /// Perturbation radius for gradient estimates.
    pub spsa_c: f64,
    /// Gradient estimates averaged per step.
    pub grad_reps: usize,
    pub estimator: GradEstimator,
    pub seed: u64,
    /// Fraction of the provided samples held out for validation reporting.
    pub val_fraction: f64,
    pub t_max: usize,
}

impl Default for TrainOpts {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.02,
            spsa_c: 0.1,
            grad_reps: 1,
            estimator: GradEstimator::Spsa,
            seed: 1,
            val_fraction: 0.2,
            t_max: 20,
        }
    }
}

/// Outcome of a training run.
#[derive(Clone, Debug)]
pub struct TrainRun {
    /// Full-set loss after each epoch (entry 0 is the initialization).
    pub loss_history: Vec<f64>,
    /// Held-out loss after each epoch (empty when `val_fraction` is 0).
    pub val_history: Vec<f64>,
    /// `(epoch, new_batch_size)` whenever the schedule grew the batch.
    pub batch_events: Vec<(usize, usize)>,
    pub best: ParameterSet,
    pub best_loss: f64,
    pub init_loss: f64,
}

const BATCH_SCHEDULE: [usize; 4] = [1, 5, 10, 20];

/// Transformed parameter vector: `[ln tau..., gamma..., alpha..., ln rho...]`.
fn encode(params: &ParameterSet) -> Vec<f64> {
    let t = params.len();
    let mut theta = Vec::with_capacity(4 * t);
    theta.extend(params.iters.iter().map(|p| p.tau.ln()));
    theta.extend(params.iters.iter().map(|p| p.gamma));
    theta.extend(params.iters.iter().map(|p| p.alpha));
    theta.extend(params.iters.iter().map(|p| p.rho.ln()));
    theta
}

fn decode(theta: &[f64], t_max: usize) -> ParameterSet {
    ParameterSet {
        iters: (0..t_max)
            .map(|t| crate::somaed::IterParams {
                tau: theta[t].exp(),
                gamma: theta[t_max + t],
                alpha: theta[2 * t_max + t],
                rho: theta[3 * t_max + t].exp(),
            })
            .collect(),
    }
}

/// One simultaneous-perturbation gradient estimate of `f` at `theta`.
pub fn spsa_gradient(
    f: &mut impl FnMut(&[f64]) -> f64,
    theta: &[f64],
    c: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let delta: Vec<f64> =
        (0..theta.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let plus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + c * d).collect();
    let minus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t - c * d).collect();
    let diff = (f(&plus) - f(&minus)) / (2.0 * c);
    delta.iter().map(|d| diff / d).collect()
}

/// Coordinate central-difference gradient of `f` at `theta`.
pub fn central_diff_gradient(
    f: &mut impl FnMut(&[f64]) -> f64,
    theta: &[f64],
    c: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; theta.len()];
    let mut work = theta.to_vec();
    for i in 0..theta.len() {
        work[i] = theta[i] + c;
        let plus = f(&work);
        work[i] = theta[i] - c;
        let minus = f(&work);
        work[i] = theta[i];
        grad[i] = (plus - minus) / (2.0 * c);
    }
    grad
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    fn new(dim: usize, lr: f64) -> Self {
        Self { m: vec![0.0; dim], v: vec![0.0; dim], t: 0, lr }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            theta[i] -= self.lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}

/// Trains a parameter set on the given samples.
///
/// The batch size follows the 1 -> 5 -> 10 -> 20 schedule, growing whenever
/// the epoch loss fails to improve twice in a row. The returned best
/// parameters are tracked on the full sample set, so they are never worse
/// than the initialization there.
pub fn train(
    init: &ParameterSet,
    samples: &[TrainingSample],
    cons: &Constellation<f64>,
    opts: &TrainOpts,
) -> Result<TrainRun> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("/train: empty sample set".into()));
    }
    if init.len() < opts.t_max {
        return Err(Error::InvalidConfig(format!(
            "/train/t_max: initialization has {} iterations, requested {}",
            init.len(),
            opts.t_max
        )));
    }
    let scfg = SomaedConfig { t_max: opts.t_max, ..Default::default() };

    // Deterministic shuffle split into train and validation parts.
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut split_rng = ChaCha8Rng::seed_from_u64(mix(opts.seed, 0xdead));
    for i in (1..order.len()).rev() {
        order.swap(i, split_rng.random_range(0..=i));
    }
    let n_val = ((samples.len() as f64) * opts.val_fraction).round() as usize;
    let (val_idx, train_idx) = order.split_at(n_val.min(samples.len().saturating_sub(1)));
    let train_set: Vec<&TrainingSample> = train_idx.iter().map(|&i| &samples[i]).collect();
    let val_set: Vec<&TrainingSample> = val_idx.iter().map(|&i| &samples[i]).collect();
    let full_set: Vec<&TrainingSample> = samples.iter().collect();

    let mut theta = encode(init);
    let mut adam = Adam::new(theta.len(), opts.lr);
    let init_loss = bce_loss(init, &full_set, cons, &scfg)?;
    let mut best = init.clone();
    let mut best_loss = init_loss;
    let mut loss_history = vec![init_loss];
    let mut val_history = Vec::new();
    if !val_set.is_empty() {
        val_history.push(bce_loss(init, &val_set, cons, &scfg)?);
    }
    let mut batch_events = Vec::new();
    let mut batch_level = 0usize;
    let mut stagnant = 0u32;
    let mut best_train_loss = f64::INFINITY;

    log::info!(
        "training starts: {} train / {} val samples, batch size {}",
        train_set.len(),
        val_set.len(),
        BATCH_SCHEDULE[batch_level]
    );

    for epoch in 0..opts.epochs {
        let batch_size = BATCH_SCHEDULE[batch_level];
        let mut epoch_order: Vec<usize> = (0..train_set.len()).collect();
        let mut epoch_rng = ChaCha8Rng::seed_from_u64(mix(opts.seed, 1 + epoch as u64));
        for i in (1..epoch_order.len()).rev() {
            epoch_order.swap(i, epoch_rng.random_range(0..=i));
        }
        for chunk in epoch_order.chunks(batch_size) {
            let batch: Vec<&TrainingSample> = chunk.iter().map(|&i| train_set[i]).collect();
            let mut divergence: Option<Error> = None;
            let mut eval = |t: &[f64]| -> f64 {
                match bce_loss(&decode(t, opts.t_max), &batch, cons, &scfg) {
                    Ok(v) => v,
                    Err(e) => {
                        divergence = Some(e);
                        f64::NAN
                    }
                }
            };
            let mut grad = vec![0.0; theta.len()];
            for _ in 0..opts.grad_reps.max(1) {
                let g = match opts.estimator {
                    GradEstimator::Spsa => spsa_gradient(&mut eval, &theta, opts.spsa_c, &mut epoch_rng),
                    GradEstimator::CentralDiff => {
                        central_diff_gradient(&mut eval, &theta, opts.spsa_c)
                    }
                };
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b / opts.grad_reps.max(1) as f64;
                }
            }
            if let Some(e) = divergence {
                return Err(e);
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged("non-finite gradient estimate".into()));
            }
            adam.step(&mut theta, &grad);
        }

        let params = decode(&theta, opts.t_max);
        let train_loss = bce_loss(&params, &train_set, cons, &scfg)?;
        let full_loss = bce_loss(&params, &full_set, cons, &scfg)?;
        loss_history.push(full_loss);
        if !val_set.is_empty() {
            val_history.push(bce_loss(&params, &val_set, cons, &scfg)?);
        }
        if full_loss < best_loss {
            best_loss = full_loss;
            best = params;
        }
        // Batch growth on two consecutive epochs without improvement.
        if train_loss < best_train_loss * (1.0 - 1e-6) {
            best_train_loss = train_loss;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= 2 && batch_level + 1 < BATCH_SCHEDULE.len() {
                batch_level += 1;
                stagnant = 0;
                batch_events.push((epoch + 1, BATCH_SCHEDULE[batch_level]));
                log::info!(
                    "epoch {}: loss stagnant, batch size -> {}",
                    epoch + 1,
                    BATCH_SCHEDULE[batch_level]
                );
            }
        }
        log::info!(
            "epoch {:3}: batch {:2}, train loss {:.4e}, full loss {:.4e}",
            epoch + 1,
            batch_size,
            train_loss,
            full_loss
        );
    }

    Ok(TrainRun { loss_history, val_history, batch_events, best, best_loss, init_loss })
}

/// Writes a loss-history CSV (`epoch,loss,val_loss`).
pub fn write_loss_csv(run: &TrainRun, mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "epoch,loss,val_loss")?;
    for (i, loss) in run.loss_history.iter().enumerate() {
        let val = run
            .val_history
            .get(i)
            .map(|v| crate::harness::format_sig(*v, 6))
            .unwrap_or_default();
        writeln!(w, "{},{},{}", i, crate::harness::format_sig(*loss, 6), val)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ConstellationKind, PilotMode};

    fn desk_cfg() -> SystemConfig {
        SystemConfig {
            b: 16,
            u: 4,
            k: 20,
            t: 4,
            d: 16,
            constellation: ConstellationKind::Qpsk,
            snr_db: 8.0,
            seed: 7,
            pilots: PilotMode::Hadamard,
        }
    }

    #[test]
    fn sample_bce_reference_values() {
        // Perfect probabilities: loss near zero.
        let probs = [1.0 - 1e-12, 1e-12, 1.0 - 1e-12];
        let bits = [1u8, 0, 1];
        assert!(sample_bce(&probs, &bits) < 1e-9);
        // Indifferent probabilities: one bit of loss per bit.
        let probs = [0.5; 4];
        let bits = [0u8, 1, 0, 1];
        assert!((sample_bce(&probs, &bits) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bce_loss_is_linear_in_weights() {
        let cfg = desk_cfg();
        let samples = make_training_set(&cfg, 2, &[8.0], 8, 3).unwrap();
        let cons = make_constellation::<f64>(cfg.constellation);
        let scfg = SomaedConfig { t_max: 8, ..Default::default() };
        let params = ParameterSet::default_init(8);
        let refs: Vec<&TrainingSample> = samples.iter().collect();
        let total = bce_loss(&params, &refs, &cons, &scfg).unwrap();
        let each: Vec<f64> = samples
            .iter()
            .map(|s| bce_loss(&params, &[s], &cons, &scfg).unwrap())
            .collect();
        assert!((total - (each[0] + each[1])).abs() < 1e-9 * total.abs());
        // Doubling a weight doubles its contribution.
        let mut boosted = samples.clone();
        boosted[0].weight *= 2.0;
        let brefs: Vec<&TrainingSample> = boosted.iter().collect();
        let btotal = bce_loss(&params, &brefs, &cons, &scfg).unwrap();
        assert!((btotal - (2.0 * each[0] + each[1])).abs() < 1e-9 * btotal.abs());
    }

    #[test]
    fn training_set_covers_powers_and_weights_are_inverse_baseline() {
        let cfg = desk_cfg();
        let t_max = 8;
        let samples = make_training_set(&cfg, 12, &[10.0], t_max, 11).unwrap();
        assert_eq!(samples.len(), 12);
        // All samples are pilot jammers over exactly the canonical powers.
        for (i, s) in samples.iter().enumerate() {
            assert!(s.jammer.starts_with("pilot"), "{}", s.jammer);
            let p = TRAIN_POWERS_DB[i % 6];
            if p.is_finite() {
                assert!(s.jammer.contains(&format!("{p}dB")), "{}", s.jammer);
            }
        }
        // Each weight is exactly the inverse of the baseline detector's
        // (floored) loss on that sample, so easier samples weigh more.
        let cons = make_constellation::<f64>(cfg.constellation);
        let baseline = ParameterSet::default_init(t_max);
        let scfg = SomaedConfig { t_max, ..Default::default() };
        for s in &samples {
            let (_, soft) = run_somaed(&s.y, &s.s_t, &cons, &baseline, &scfg).unwrap();
            let base = sample_bce(&soft.bit_probs, &s.bits).max(1.0);
            assert!((s.weight - 1.0 / base).abs() <= 1e-9 * s.weight, "weight contract");
            assert!(s.weight > 0.0 && s.weight <= 1.0);
        }
        // Ordering: the smallest-baseline sample carries the largest weight.
        let max_w = samples.iter().map(|s| s.weight).fold(0.0, f64::max);
        let min_base_w = samples
            .iter()
            .map(|s| {
                let (_, soft) = run_somaed(&s.y, &s.s_t, &cons, &baseline, &scfg).unwrap();
                (sample_bce(&soft.bit_probs, &s.bits), s.weight)
            })
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap()
            .1;
        assert_eq!(max_w, min_base_w);
    }

    #[test]
    fn spsa_gradient_points_uphill_on_a_quadratic() {
        // Surrogate oracle: f(theta) = ||theta - target||^2 has gradient
        // 2 (theta - target); the SPSA estimate must correlate with it.
        let target: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut f = |theta: &[f64]| -> f64 {
            theta.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let theta: Vec<f64> = (0..16).map(|i| (i as f64 * 0.71).cos()).collect();
        let exact: Vec<f64> = theta.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Each estimate is unbiased, so the average over repetitions must
        // align with the analytic gradient.
        let reps = 50;
        let mut mean = vec![0.0; theta.len()];
        for _ in 0..reps {
            let est = spsa_gradient(&mut f, &theta, 1e-3, &mut rng);
            for (m, e) in mean.iter_mut().zip(&est) {
                *m += e / reps as f64;
            }
        }
        let dot: f64 = mean.iter().zip(&exact).map(|(a, b)| a * b).sum();
        let na: f64 = mean.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
        let cosine = dot / (na * nb);
        assert!(cosine >= 0.5, "cosine of averaged estimate {cosine}");
        // Central differences recover the gradient almost exactly.
        let cd = central_diff_gradient(&mut f, &theta, 1e-5);
        for (a, b) in cd.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let cfg = desk_cfg();
        let samples = make_training_set(&cfg, 4, &[8.0], 6, 13).unwrap();
        let cons = make_constellation::<f64>(cfg.constellation);
        let init = ParameterSet::default_init(6);
        let opts = TrainOpts { epochs: 2, lr: 0.0, t_max: 6, val_fraction: 0.0, ..Default::default() };
        let run = train(&init, &samples, &cons, &opts).unwrap();
        assert_eq!(run.best, init);
        assert_eq!(run.best_loss, run.init_loss);
    }

    #[test]
    fn encode_decode_roundtrip_keeps_positivity() {
        let set = ParameterSet::default_init(7);
        let theta = encode(&set);
        let back = decode(&theta, 7);
        for (a, b) in set.iters.iter().zip(&back.iters) {
            assert!((a.tau - b.tau).abs() < 1e-12);
            assert!((a.rho - b.rho).abs() < 1e-9 * a.rho);
        }
        // Large negative transformed values still decode to positive tau/rho.
        let theta = vec![-50.0; 28];
        let set = decode(&theta, 7);
        set.validate().unwrap();
    }

    #[test]
    fn short_training_improves_loss_on_small_set() {
        let cfg = desk_cfg();
        let samples = make_training_set(&cfg, 16, &[4.0, 8.0], 8, 17).unwrap();
        let cons = make_constellation::<f64>(cfg.constellation);
        let init = ParameterSet::default_init(8);
        let opts = TrainOpts {
            epochs: 15,
            t_max: 8,
            seed: 2,
            val_fraction: 0.0,
            ..Default::default()
        };
        let run = train(&init, &samples, &cons, &opts).unwrap();
        assert!(run.best_loss <= run.init_loss, "best must never be worse than init");
        assert!(
            run.best_loss < run.init_loss * 0.9,
            "expected at least 10% improvement: init {:.4e}, best {:.4e}",
            run.init_loss,
            run.best_loss
        );
        assert_eq!(run.loss_history.len(), opts.epochs + 1);
    }
}

/// Builds a warm-start parameter schedule by calibrating the step sizes
/// against the adaptive (Barzilai-Borwein) rule: `tau(t)` is set to the
/// per-iteration median of the steps the parameter-free detector takes on
/// the given samples. Momentum and scales start neutral; precisions use the
/// default ramp.
pub fn bb_calibrated_init(
    samples: &[TrainingSample],
    cons: &Constellation<f64>,
    t_max: usize,
) -> Result<ParameterSet> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("/train: empty sample set".into()));
    }
    let mcfg = crate::maed::MaedConfig { t_max, ..Default::default() };
    let all_taus: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| {
            crate::maed::run_maed_with_report(&s.y, &s.s_t, cons, &mcfg)
                .map(|(_, report)| report.taus_used)
        })
        .collect::<Result<_>>()?;
    let mut init = ParameterSet::default_init(t_max);
    for t in 0..t_max {
        let mut column: Vec<f64> = all_taus.iter().map(|r| r[t]).collect();
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        init.iters[t].tau = column[column.len() / 2];
    }
    Ok(init)
}
