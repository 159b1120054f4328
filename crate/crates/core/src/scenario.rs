//! System configuration, transmit constellations with Gray bit mapping,
//! pilot and frame generation, and SNR / jammer-power bookkeeping.

use crate::error::{Error, Result};
use crate::numerics::CMat;
use crate::rng::cn01;
use crate::scalar::{Scalar, C};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Supported transmit constellations.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Qpsk,
    Qam16,
}

impl ConstellationKind {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ConstellationKind::Qpsk => 2,
            ConstellationKind::Qam16 => 4,
        }
    }

    pub fn size(self) -> usize {
        1 << self.bits_per_symbol()
    }
}

/// A constellation normalized to unit average symbol energy, with the Gray
/// labels fixed by the sign conventions of the per-bit LLR expressions:
/// bit 1 is 1 iff Re > 0, and (16-QAM) bit 2 is 1 iff |Re| is the inner
/// level; bits 3 and 4 mirror this on the imaginary axis.
#[derive(Clone, Debug)]
pub struct Constellation<T> {
    kind: ConstellationKind,
    lambda: T,
    points: Vec<C<T>>,
}

impl<T: Scalar> Constellation<T> {
    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    /// Edge of the constellation's convex hull.
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.kind.bits_per_symbol()
    }

    pub fn size(&self) -> usize {
        self.kind.size()
    }

    /// Symbol for a label; bit `i` of the label is per-bit index `i`.
    pub fn point(&self, label: u8) -> C<T> {
        self.points[label as usize]
    }

    pub fn points(&self) -> &[C<T>] {
        &self.points
    }

    /// Bit `i` (0-based) of a label.
    #[inline]
    pub fn bit(label: u8, i: usize) -> u8 {
        (label >> i) & 1
    }

    /// Hard-slices a received value to the label of the nearest point.
    /// Decision-boundary ties break toward bit 0.
    pub fn slice(&self, x: C<T>) -> u8 {
        let axis = |v: T| -> (u8, u8) {
            let sign = u8::from(v > T::zero());
            let inner = match self.kind {
                ConstellationKind::Qpsk => 0,
                ConstellationKind::Qam16 => {
                    let two_thirds = self.lambda * T::c(2.0 / 3.0);
                    u8::from(v.abs() < two_thirds)
                }
            };
            (sign, inner)
        };
        let (b0, b1) = axis(x.re);
        let (b2, b3) = axis(x.im);
        match self.kind {
            ConstellationKind::Qpsk => b0 | (b2 << 1),
            ConstellationKind::Qam16 => b0 | (b1 << 1) | (b2 << 2) | (b3 << 3),
        }
    }

    /// Mean symbol energy, exact closed form over the point set.
    pub fn mean_energy(&self) -> T {
        let sum: T = self.points.iter().map(|p| p.norm_sqr()).sum();
        sum / T::c(self.points.len() as f64)
    }
}

/// Builds a constellation of the given kind.
///
/// QPSK points are `lambda (+-1 +- i)` with `lambda = sqrt(1/2)`; 16-QAM
/// uses per-axis levels `{+-lambda/3, +-lambda}` with `lambda = sqrt(9/10)`,
/// which yields unit mean symbol energy in both cases.
pub fn make_constellation<T: Scalar>(kind: ConstellationKind) -> Constellation<T> {
    let lambda = match kind {
        ConstellationKind::Qpsk => T::c(0.5).sqrt(),
        ConstellationKind::Qam16 => T::c(0.9).sqrt(),
    };
    let level = |sign: u8, inner: u8| -> T {
        let amp = match kind {
            ConstellationKind::Qpsk => lambda,
            ConstellationKind::Qam16 => {
                if inner == 1 {
                    lambda / T::c(3.0)
                } else {
                    lambda
                }
            }
        };
        if sign == 1 {
            amp
        } else {
            -amp
        }
    };
    let size = kind.size();
    let points = (0..size as u8)
        .map(|label| match kind {
            ConstellationKind::Qpsk => {
                C::new(level(Constellation::<T>::bit(label, 0), 0), level(Constellation::<T>::bit(label, 1), 0))
            }
            ConstellationKind::Qam16 => C::new(
                level(Constellation::<T>::bit(label, 0), Constellation::<T>::bit(label, 1)),
                level(Constellation::<T>::bit(label, 2), Constellation::<T>::bit(label, 3)),
            ),
        })
        .collect();
    Constellation { kind, lambda, points }
}

/// How the pilot matrix is constructed.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PilotMode {
    /// Sylvester Hadamard rows (+-1 entries), requires T = U a power of two.
    #[default]
    Hadamard,
    /// Rows of a Haar-random unitary, rescaled to unit per-entry energy.
    Haar,
}

/// Dimensions and operating point of the simulated uplink.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Basestation antennas.
    pub b: usize,
    /// Single-antenna users.
    pub u: usize,
    /// Coherence interval length, `k = t + d`.
    pub k: usize,
    /// Pilot slots.
    pub t: usize,
    /// Data slots.
    pub d: usize,
    pub constellation: ConstellationKind,
    /// Average receive SNR in dB; `+inf` means noiseless.
    #[serde(with = "serde_db")]
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub pilots: PilotMode,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, msg: String| Err(Error::InvalidConfig(format!("/{path}: {msg}")));
        if self.k != self.t + self.d {
            return fail("k", format!("k = {} must equal t + d = {}", self.k, self.t + self.d));
        }
        if self.t < self.u {
            return fail("t", format!("t = {} must be >= u = {} for full-row-rank pilots", self.t, self.u));
        }
        if self.d < 1 {
            return fail("d", "d must be >= 1".into());
        }
        if self.b <= self.u {
            return fail("b", format!("b = {} must exceed u = {}", self.b, self.u));
        }
        if self.snr_db.is_nan() {
            return fail("snr_db", "must not be NaN".into());
        }
        Ok(())
    }

    /// Bits carried by the data block of one frame.
    pub fn data_bits(&self) -> u64 {
        (self.u * self.d * self.constellation.bits_per_symbol()) as u64
    }
}

/// Serde helper for dB values that may be infinite ("inf" / "-inf" strings).
pub mod serde_db {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Db::deserialize(d)? {
            Db::Num(x) => Ok(x),
            Db::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("invalid dB value {other:?}"))),
            },
        }
    }
}

/// One transmitted frame: pilots, data symbols, and the underlying labels.
#[derive(Clone, Debug)]
pub struct Frame<T: Scalar> {
    /// Pilot matrix, U x T.
    pub s_t: CMat<T>,
    /// Data symbol matrix, U x D.
    pub s_d: CMat<T>,
    /// Constellation labels per (user, data slot), row-major U x D.
    pub labels: Vec<u8>,
}

impl<T: Scalar> Frame<T> {
    /// Full transmit matrix `[S_T, S_D]`.
    pub fn s(&self) -> CMat<T> {
        self.s_t.hstack(&self.s_d)
    }

    pub fn label(&self, u: usize, d: usize) -> u8 {
        self.labels[u * self.s_d.cols() + d]
    }

    /// Flattened transmitted bits in (user, slot, bit) order.
    pub fn bits(&self, bits_per_symbol: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.labels.len() * bits_per_symbol);
        for &label in &self.labels {
            for i in 0..bits_per_symbol {
                out.push((label >> i) & 1);
            }
        }
        out
    }
}

/// Builds the pilot matrix for the configured mode.
///
/// Deterministic mode produces Sylvester Hadamard rows with unit symbol
/// energy and requires `t == u` with `u` a power of two. Haar mode draws a
/// `t x t` Haar-unitary, keeps `u` rows, and rescales so every entry has
/// unit energy expectation (rows stay orthogonal).
pub fn make_pilots<T: Scalar>(cfg: &SystemConfig, rng: &mut impl Rng) -> Result<CMat<T>> {
    match cfg.pilots {
        PilotMode::Hadamard => {
            if cfg.t != cfg.u || !cfg.u.is_power_of_two() {
                return Err(Error::InvalidConfig(format!(
                    "no Hadamard pilot construction for u = {}, t = {}; need t = u a power of two",
                    cfg.u, cfg.t
                )));
            }
            Ok(hadamard(cfg.u))
        }
        PilotMode::Haar => {
            let q = haar_unitary(cfg.t, rng);
            let scale = T::c((cfg.t as f64).sqrt());
            Ok(q.col_block(0, cfg.t).row_block(0, cfg.u).scale_re(scale))
        }
    }
}

/// Sylvester Hadamard matrix of order `n` (power of two) with +-1 entries.
pub fn hadamard<T: Scalar>(n: usize) -> CMat<T> {
    assert!(n.is_power_of_two());
    let mut h = CMat::from_fn(1, 1, |_, _| C::new(T::one(), T::zero()));
    while h.rows() < n {
        let m = h.rows();
        let next = CMat::from_fn(2 * m, 2 * m, |r, c| {
            let v = h[(r % m, c % m)];
            if r >= m && c >= m {
                -v
            } else {
                v
            }
        });
        h = next;
    }
    h
}

/// Haar-distributed unitary via QR of a Gaussian matrix with the standard
/// phase correction (R's diagonal made real positive).
pub fn haar_unitary<T: Scalar>(n: usize, rng: &mut impl Rng) -> CMat<T> {
    let a = CMat::from_fn(n, n, |_, _| cn01::<T>(rng));
    // Modified Gram-Schmidt: columns of Q span the same flags as A.
    let mut q: Vec<Vec<C<T>>> = (0..n).map(|c| a.col(c)).collect();
    for j in 0..n {
        for i in 0..j {
            let proj: C<T> = q[i].iter().zip(&q[j]).map(|(&qi, &qj)| qi.conj() * qj).sum();
            for r in 0..n {
                let t = q[i][r] * proj;
                q[j][r] = q[j][r] - t;
            }
        }
        let norm: T = q[j].iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        for z in q[j].iter_mut() {
            *z = *z / norm;
        }
    }
    CMat::from_fn(n, n, |r, c| q[c][r])
}

/// Draws a frame: i.i.d. uniform bits mapped through the Gray labeling, plus
/// pilots from [`make_pilots`].
pub fn draw_frame<T: Scalar>(
    cfg: &SystemConfig,
    cons: &Constellation<T>,
    rng: &mut impl Rng,
) -> Result<Frame<T>> {
    let s_t = make_pilots::<T>(cfg, rng)?;
    let size = cons.size() as u8;
    let labels: Vec<u8> = (0..cfg.u * cfg.d).map(|_| rng.random_range(0..size)).collect();
    let s_d = CMat::from_fn(cfg.u, cfg.d, |u, d| cons.point(labels[u * cfg.d + d]));
    Ok(Frame { s_t, s_d, labels })
}

/// Per-entry complex noise variance `N0` for the configured average receive
/// SNR under i.i.d. CN(0,1) channel statistics: `N0 = U / SNR`.
pub fn noise_var<T: Scalar>(cfg: &SystemConfig) -> T {
    if cfg.snr_db == f64::INFINITY {
        return T::zero();
    }
    let snr = 10f64.powf(cfg.snr_db / 10.0);
    T::c(cfg.u as f64 / snr)
}

/// How a jammer's strength is quantified.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Ratio of total receive energy to the average UE's receive energy.
    RhoE,
    /// Ratio of receive power during the jammer's on-phase; `rho_p = rho_e / gamma`.
    RhoP,
}

/// Jammer power target plus the duty cycle linking the two normalizations.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct PowerSpec {
    pub mode: PowerMode,
    /// Target in dB; `-inf` disables the jammer.
    #[serde(with = "serde_db")]
    pub value_db: f64,
    /// Fraction of the coherence interval the jammer transmits in.
    pub duty_cycle: f64,
}

impl PowerSpec {
    /// Linear total-energy ratio `rho_e` implied by this spec.
    pub fn rho_e_linear(&self) -> f64 {
        if self.value_db == f64::NEG_INFINITY {
            return 0.0;
        }
        let lin = 10f64.powf(self.value_db / 10.0);
        match self.mode {
            PowerMode::RhoE => lin,
            PowerMode::RhoP => lin * self.duty_cycle,
        }
    }
}

/// Amplitude `g` that scales a unit-calibrated jamming sequence of expected
/// transmit energy `e_w` to the requested receive-power ratio:
/// `g^2 = rho_e * K / E_w` under CN(0,1) channel statistics.
pub fn jammer_gain<T: Scalar>(spec: &PowerSpec, cfg: &SystemConfig, e_w: T) -> Result<T> {
    let rho_e = spec.rho_e_linear();
    if rho_e == 0.0 {
        return Ok(T::zero());
    }
    if !(e_w > T::zero()) {
        return Err(Error::InvalidJammer(format!(
            "zero-energy jamming sequence with finite power target {} dB",
            spec.value_db
        )));
    }
    Ok((T::c(rho_e * cfg.k as f64) / e_w).sqrt())
}

impl<T: Scalar> CMat<T> {
    /// Copy of the row block `[start, end)`.
    pub fn row_block(&self, start: usize, end: usize) -> CMat<T> {
        assert!(start < end && end <= self.rows(), "row block out of range");
        CMat::from_fn(end - start, self.cols(), |r, c| self[(start + r, c)])
    }
}
