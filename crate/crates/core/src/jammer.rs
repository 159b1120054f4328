//! Smart-jammer transmit-sequence synthesis for all threat models.
//!
//! Jammer strength is calibrated in expectation against i.i.d. CN(0,1)
//! channel statistics, matching the `rho_e` / `rho_p` definitions in
//! [`crate::scenario`].

use crate::error::{Error, Result};
use crate::numerics::{outer_t, pinv_wide, CMat};
use crate::rng::cn01;
use crate::scalar::{czero, Scalar, C};
use crate::scenario::{jammer_gain, Constellation, Frame, PowerMode, PowerSpec, SystemConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Jammer activity patterns.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JammerKind {
    /// Transmits in every slot of the coherence interval (J1).
    Barrage,
    /// Transmits during the pilot phase only (J2).
    Pilot,
    /// Transmits during the data phase only (J3).
    Data,
    /// Transmits in `floor(alpha K)` randomly selected unit-length bursts (J4).
    Sparse,
    /// Silent jammer.
    None,
    /// Replays one UE's pilot sequence, then sends constellation symbols.
    Impersonate,
    /// Knows the transmit matrix and picks its sequence to cause eclipsing.
    DataDependent,
}

/// Law of the i.i.d. jamming symbols.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolLaw {
    /// Circularly-symmetric complex Gaussian, unit variance before scaling.
    Gaussian,
    /// Uniform draws from the transmit constellation.
    Constellation,
}

/// Full description of an attack.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JammerProfile {
    pub kind: JammerKind,
    #[serde(default = "default_law")]
    pub law: SymbolLaw,
    pub power_mode: PowerMode,
    /// Power target in dB (`-inf` disables the jammer).
    #[serde(with = "crate::scenario::serde_db")]
    pub power_db: f64,
    /// Burst fraction in (0, 1]; required iff `kind` is `Sparse`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse_alpha: Option<f64>,
    /// Impersonated UE index; required iff `kind` is `Impersonate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ue_index: Option<usize>,
}

fn default_law() -> SymbolLaw {
    SymbolLaw::Gaussian
}

impl JammerProfile {
    /// Convenience constructor for the common i.i.d. attacks.
    pub fn new(kind: JammerKind, law: SymbolLaw, power_mode: PowerMode, power_db: f64) -> Self {
        Self { kind, law, power_mode, power_db, sparse_alpha: None, ue_index: None }
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        match self.kind {
            JammerKind::Sparse => {
                let a = self.sparse_alpha.ok_or_else(|| {
                    Error::InvalidConfig("/jammer/sparse_alpha: required for sparse jammers".into())
                })?;
                if !(a > 0.0 && a <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "/jammer/sparse_alpha: {a} outside (0, 1]"
                    )));
                }
                if (a * cfg.k as f64).floor() < 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "/jammer/sparse_alpha: floor(alpha K) = 0 for K = {}",
                        cfg.k
                    )));
                }
            }
            JammerKind::Impersonate => {
                let u = self.ue_index.ok_or_else(|| {
                    Error::InvalidConfig("/jammer/ue_index: required for impersonation".into())
                })?;
                if u >= cfg.u {
                    return Err(Error::InvalidJammer(format!(
                        "impersonated UE {u} out of range (U = {})",
                        cfg.u
                    )));
                }
            }
            JammerKind::DataDependent => {
                if cfg.d < 1 {
                    return Err(Error::InvalidJammer("data-dependent attack needs D >= 1".into()));
                }
            }
            _ => {
                if self.sparse_alpha.is_some() {
                    return Err(Error::InvalidConfig(
                        "/jammer/sparse_alpha: only valid for sparse jammers".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Duty cycle implied by the activity pattern.
    pub fn duty_cycle(&self, cfg: &SystemConfig) -> f64 {
        match self.kind {
            JammerKind::Barrage | JammerKind::Impersonate | JammerKind::DataDependent => 1.0,
            JammerKind::Pilot => cfg.t as f64 / cfg.k as f64,
            JammerKind::Data => cfg.d as f64 / cfg.k as f64,
            JammerKind::Sparse => self.sparse_alpha.unwrap_or(0.0),
            JammerKind::None => 0.0,
        }
    }

    /// The power spec used for gain calibration.
    pub fn power_spec(&self, cfg: &SystemConfig) -> PowerSpec {
        PowerSpec {
            mode: self.power_mode,
            value_db: self.power_db,
            duty_cycle: self.duty_cycle(cfg),
        }
    }

    /// Short descriptor for metric rows and logs.
    pub fn describe(&self) -> String {
        let mode = match self.power_mode {
            PowerMode::RhoE => "rhoE",
            PowerMode::RhoP => "rhoP",
        };
        let law = match self.law {
            SymbolLaw::Gaussian => "gauss",
            SymbolLaw::Constellation => "const",
        };
        let kind = match self.kind {
            JammerKind::None => return "none".into(),
            JammerKind::Barrage => "barrage".into(),
            JammerKind::Pilot => "pilot".into(),
            JammerKind::Data => "data".into(),
            JammerKind::Sparse => format!("sparse(a={})", self.sparse_alpha.unwrap_or(f64::NAN)),
            JammerKind::Impersonate => {
                format!("impersonate(u={})", self.ue_index.unwrap_or(usize::MAX))
            }
            JammerKind::DataDependent => "data_dependent".into(),
        };
        format!("{kind}:{law}:{mode}={}dB", self.power_db)
    }
}

/// A synthesized jamming sequence over one coherence interval.
#[derive(Clone, Debug)]
pub struct JamSequence<T: Scalar> {
    /// Transmit symbols, length K (already scaled to the power target).
    pub w: Vec<C<T>>,
    /// Activity mask; `w[k] = 0` wherever `mask[k]` is false.
    pub mask: Vec<bool>,
}

impl<T: Scalar> JamSequence<T> {
    pub fn pilot_part(&self, t: usize) -> &[C<T>] {
        &self.w[..t]
    }

    pub fn data_part(&self, t: usize) -> &[C<T>] {
        &self.w[t..]
    }
}

fn draw_symbol<T: Scalar>(law: SymbolLaw, cons: &Constellation<T>, rng: &mut impl Rng) -> C<T> {
    match law {
        SymbolLaw::Gaussian => cn01::<T>(rng),
        SymbolLaw::Constellation => cons.point(rng.random_range(0..cons.size() as u8)),
    }
}

/// Synthesizes the jamming sequence for one frame.
///
/// The impersonating and data-dependent attacks model a genie jammer and
/// read the frame contents; all others only use its dimensions.
pub fn synthesize<T: Scalar>(
    profile: &JammerProfile,
    cfg: &SystemConfig,
    frame: &Frame<T>,
    cons: &Constellation<T>,
    rng: &mut impl Rng,
) -> Result<JamSequence<T>> {
    profile.validate(cfg)?;
    let k = cfg.k;
    let t = cfg.t;
    let mut w = vec![czero::<T>(); k];
    let mut mask = vec![false; k];
    let spec = profile.power_spec(cfg);

    let e_w: T = match profile.kind {
        JammerKind::None => {
            return Ok(JamSequence { w, mask });
        }
        JammerKind::Barrage => {
            for i in 0..k {
                w[i] = draw_symbol(profile.law, cons, rng);
                mask[i] = true;
            }
            T::c(k as f64)
        }
        JammerKind::Pilot => {
            for i in 0..t {
                w[i] = draw_symbol(profile.law, cons, rng);
                mask[i] = true;
            }
            T::c(t as f64)
        }
        JammerKind::Data => {
            for i in t..k {
                w[i] = draw_symbol(profile.law, cons, rng);
                mask[i] = true;
            }
            T::c(cfg.d as f64)
        }
        JammerKind::Sparse => {
            let alpha = profile.sparse_alpha.unwrap();
            let n_on = (alpha * k as f64).floor() as usize;
            // Exactly floor(alpha K) slots, sampled without replacement.
            for idx in rand::seq::index::sample(rng, k, n_on) {
                w[idx] = draw_symbol(profile.law, cons, rng);
                mask[idx] = true;
            }
            T::c(n_on as f64)
        }
        JammerKind::Impersonate => {
            let ue = profile.ue_index.unwrap();
            let pilot_row = frame.s_t.row(ue);
            let mut e = T::zero();
            for i in 0..t {
                w[i] = pilot_row[i];
                e = e + pilot_row[i].norm_sqr();
                mask[i] = true;
            }
            for i in t..k {
                w[i] = cons.point(rng.random_range(0..cons.size() as u8));
                mask[i] = true;
            }
            e + T::c(cfg.d as f64)
        }
        JammerKind::DataDependent => {
            // Pick one row of S_D, replace it with fresh constellation
            // symbols (guaranteed different), and solve for the data-phase
            // sequence that makes the alternative explanation consistent.
            let row = rng.random_range(0..cfg.u);
            let mut alt = frame.s_d.clone();
            loop {
                let candidate: Vec<C<T>> = (0..cfg.d)
                    .map(|_| cons.point(rng.random_range(0..cons.size() as u8)))
                    .collect();
                if candidate != frame.s_d.row(row) {
                    alt.set_row(row, &candidate);
                    break;
                }
            }
            let m = pinv_wide(&frame.s_t)?.matmul(&alt); // T x D
            for (i, slot) in w.iter_mut().take(t).enumerate() {
                *slot = cn01::<T>(rng);
                mask[i] = true;
            }
            // w_D^T = w_T^T M  =>  w_D[d] = sum_i w_T[i] M[i, d].
            for d in 0..cfg.d {
                let mut acc = czero::<T>();
                for i in 0..t {
                    acc += w[i] * m[(i, d)];
                }
                w[t + d] = acc;
                mask[t + d] = true;
            }
            // Expected energy over the pilot-part draw: T + ||M||_F^2.
            T::c(t as f64) + m.frob_sq()
        }
    };

    let g = jammer_gain::<T>(&spec, cfg, e_w)?;
    for z in w.iter_mut() {
        *z = *z * g;
    }
    Ok(JamSequence { w, mask })
}

/// Applies the jammer to a receive matrix: `Y0 + j w^T`.
pub fn apply<T: Scalar>(y0: &CMat<T>, j: &CMat<T>, w: &[C<T>]) -> Result<CMat<T>> {
    if j.cols() != 1 || j.rows() != y0.rows() || w.len() != y0.cols() {
        return Err(Error::ShapeError(format!(
            "apply: Y0 {}x{}, j {}x{}, w len {}",
            y0.rows(),
            y0.cols(),
            j.rows(),
            j.cols(),
            w.len()
        )));
    }
    Ok(y0 + &outer_t(&j.col(0), w))
}
