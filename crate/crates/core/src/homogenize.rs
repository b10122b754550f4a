//! Closed-form consequences of homogenizing the colored-noise dynamics:
//! the effective coupling `D = 2 E_inf[xi^2] B^2 tau`, the map from a
//! colored model to its white-noise limit, the Stratonovich-to-Ito drift
//! correction and the fluctuation-dissipation condition `A = D = gamma^2`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hilbert::{StateVector, C64};
use crate::models::{centered, ModelSpec, Regime};
use crate::noise::{stationary_second_moment, NoiseKind};
#[allow(unused_imports)]
use num_traits::Float;

/// Relative tolerance of the fluctuation-dissipation check.
pub const FD_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoupling {
    /// `D`
    pub diffusion: f64,
    /// `sqrt(D)`
    pub gamma: f64,
    pub kind: NoiseKind,
    pub coupling: f64,
    pub tau: f64,
    pub second_moment: f64,
}

pub fn effective_coupling(kind: NoiseKind, b: f64, tau: f64) -> Result<EffectiveCoupling> {
    let second_moment = stationary_second_moment(kind)?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter {
            name: "tau",
            value: tau,
        });
    }
    if !b.is_finite() {
        return Err(Error::InvalidParameter {
            name: "B",
            value: b,
        });
    }
    let diffusion = 2.0 * second_moment * b * b * tau;
    Ok(EffectiveCoupling {
        diffusion,
        gamma: diffusion.sqrt(),
        kind,
        coupling: b,
        tau,
        second_moment,
    })
}

/// Inverse of [`effective_coupling`]: the `B >= 0` that yields diffusion `d`.
pub fn coupling_for_diffusion(kind: NoiseKind, d: f64, tau: f64) -> Result<f64> {
    let second_moment = stationary_second_moment(kind)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            value: tau,
        });
    }
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "D",
            value: d,
        });
    }
    Ok((d / (2.0 * second_moment * tau)).sqrt())
}

/// White-noise limit of a model.
///
/// Colored channels get `gamma = sqrt(D)` from their `(kind, B, tau)`;
/// channels that are already Markovian keep their `gamma`. `A` is carried
/// over unchanged. An `ItoWhite` target requires `A = D` on every channel.
pub fn to_markovian(model: &ModelSpec, target: Regime) -> Result<ModelSpec> {
    if target == Regime::Colored {
        return Err(Error::RegimeMismatch {
            expected: Regime::StratonovichWhite,
            found: target,
        });
    }
    let mut out = model.with_regime(target);
    if model.regime == Regime::Colored {
        for ch in &mut out.channels {
            ch.gamma = effective_coupling(ch.kind, ch.b, ch.tau)?.gamma;
        }
    }
    if target == Regime::ItoWhite {
        for (k, ch) in out.channels.iter().enumerate() {
            if !fd_holds(ch.a, ch.diffusion()) {
                return Err(Error::FluctuationDissipation {
                    channel: k,
                    a: ch.a,
                    d: ch.diffusion(),
                });
            }
        }
    }
    Ok(out)
}

fn fd_holds(a: f64, d: f64) -> bool {
    (a - d).abs() <= FD_REL_TOL * a.abs().max(d.abs()).max(1.0)
}

/// `C psi = sum_k D_k (1/2 D_k^2 - <D_k^2>) psi`, the drift added when a
/// Stratonovich SSE is rewritten in Ito form.
pub fn correction(model: &ModelSpec, state: &StateVector) -> Result<Vec<C64>> {
    if model.regime == Regime::Colored {
        return Err(Error::RegimeMismatch {
            expected: Regime::StratonovichWhite,
            found: Regime::Colored,
        });
    }
    let psi = state.amplitudes();
    if psi.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: psi.len(),
        });
    }
    let mut out = alloc::vec![C64::new(0.0, 0.0); psi.len()];
    for ch in &model.channels {
        let d = ch.diffusion();
        let c = centered(&ch.operator, psi)?;
        for ((o, x2), x) in out.iter_mut().zip(&c.delta2).zip(psi) {
            *o += x2 * (0.5 * d) - x * (d * c.variance);
        }
    }
    Ok(out)
}

/// True iff `|A_k - gamma_k^2|` is within the relative FD tolerance on
/// every channel.
pub fn fd_check(model: &ModelSpec) -> bool {
    model
        .channels
        .iter()
        .all(|ch| fd_holds(ch.a, ch.diffusion()))
}
