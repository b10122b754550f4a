//! Right-hand sides of the four dynamical regimes.
//!
//! * `Colored`: per-path random ODE
//!   `dpsi/dt = -iH psi + sum_k [-A_k (D_k^2 - <D_k^2>) + B_k xi_k D_k] psi`
//!   with `D_k = O_k - <O_k>`.
//! * `StratonovichWhite`: drift `-iH psi - sum_k A_k (D_k^2 - <D_k^2>) psi`,
//!   diffusion `sqrt(D_k) D_k psi`, read in the Stratonovich sense.
//! * `ItoWhite`: the norm-preserving Ito SSE, drift
//!   `-iH psi - sum_k gamma_k^2/2 D_k^2 psi`, diffusion `gamma_k D_k psi`.
//! * `NaiveItoWhite`: the Stratonovich coefficients read as an Ito process.
//!
//! Expectations are always taken in the normalized ray, so the vector
//! fields are well defined on unnormalized states as well.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::hilbert::{
    self, centered_apply, expectation_raw, HermitianOperator, StateVector, C64, DEFAULT_TOL,
};
use crate::homogenize::{self, FD_REL_TOL};
use crate::noise::NoiseKind;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Colored,
    StratonovichWhite,
    ItoWhite,
    NaiveItoWhite,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::Colored,
        Regime::StratonovichWhite,
        Regime::ItoWhite,
        Regime::NaiveItoWhite,
    ];

    pub fn is_markovian(self) -> bool {
        self != Regime::Colored
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Colored => "colored",
            Regime::StratonovichWhite => "stratonovich_white",
            Regime::ItoWhite => "ito_white",
            Regime::NaiveItoWhite => "naive_ito_white",
        }
    }
}

impl core::str::FromStr for Regime {
    type Err = ();
    fn from_str(s: &str) -> core::result::Result<Self, ()> {
        Regime::ALL.into_iter().find(|r| r.name() == s).ok_or(())
    }
}

/// One noise channel coupled through the Hermitian operator `O_k`.
///
/// In the colored regime `(a, b, kind, tau)` are operative and `gamma`
/// holds the derived effective coupling `sqrt(D_k)`; in the Markovian
/// regimes `(a, gamma)` are operative.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseChannel {
    pub operator: HermitianOperator,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub kind: NoiseKind,
    pub tau: f64,
}

impl NoiseChannel {
    /// Colored channel; `gamma` is filled in from the effective coupling.
    pub fn colored(
        operator: HermitianOperator,
        kind: NoiseKind,
        tau: f64,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        let eff = homogenize::effective_coupling(kind, b, tau)?;
        Ok(Self {
            operator,
            a,
            b,
            gamma: eff.gamma,
            kind,
            tau,
        })
    }

    pub fn white(operator: HermitianOperator, a: f64, gamma: f64) -> Self {
        Self {
            operator,
            a,
            b: 0.0,
            gamma,
            kind: NoiseKind::White,
            tau: 0.0,
        }
    }

    /// White channel satisfying `A = gamma^2`.
    pub fn fluctuation_dissipation(operator: HermitianOperator, gamma: f64) -> Self {
        Self::white(operator, gamma * gamma, gamma)
    }

    /// Effective diffusion strength `D_k = gamma_k^2`.
    pub fn diffusion(&self) -> f64 {
        self.gamma * self.gamma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub hamiltonian: HermitianOperator,
    pub channels: Vec<NoiseChannel>,
    pub regime: Regime,
}

impl ModelSpec {
    /// Checks dimensions only; structural checks live in [`validate`].
    pub fn new(
        hamiltonian: HermitianOperator,
        channels: Vec<NoiseChannel>,
        regime: Regime,
    ) -> Result<Self> {
        let dim = hamiltonian.dim();
        for ch in &channels {
            if ch.operator.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ch.operator.dim(),
                });
            }
        }
        Ok(Self {
            hamiltonian,
            channels,
            regime,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn with_regime(&self, regime: Regime) -> Self {
        Self {
            regime,
            ..self.clone()
        }
    }

    pub fn operators(&self) -> Vec<HermitianOperator> {
        self.channels.iter().map(|c| c.operator.clone()).collect()
    }

    fn expect_regime(&self, allowed: &[Regime]) -> Result<()> {
        if allowed.contains(&self.regime) {
            Ok(())
        } else {
            Err(Error::RegimeMismatch {
                expected: allowed[0],
                found: self.regime,
            })
        }
    }

    fn check_state(&self, psi: &[C64]) -> Result<()> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.len(),
            });
        }
        Ok(())
    }
}

/// Drift and per-channel diffusion vectors of a white-noise SSE.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeCoefficients {
    pub drift: Vec<C64>,
    pub diffusions: Vec<Vec<C64>>,
}

impl SdeCoefficients {
    /// `2 Re<psi|a> + sum_k ||b_k||^2`, divided by `<psi|psi>`: the Ito
    /// growth rate of the squared norm.
    pub fn norm_growth_rate(&self, psi: &[C64]) -> f64 {
        let n2 = hilbert::norm_sqr(psi);
        let drift = 2.0 * hilbert::inner(psi, &self.drift).re;
        let diff: f64 = self.diffusions.iter().map(|b| hilbert::norm_sqr(b)).sum();
        (drift + diff) / n2
    }
}

/// Per-channel centered quantities at a given state.
pub(crate) struct Centered {
    /// `D psi`
    pub delta: Vec<C64>,
    /// `D^2 psi`
    pub delta2: Vec<C64>,
    /// `<D^2>`
    pub variance: f64,
}

pub(crate) fn centered(op: &HermitianOperator, psi: &[C64]) -> Result<Centered> {
    let mean = expectation_raw(op, psi)?;
    let delta = centered_apply(op, mean, psi);
    let delta2 = centered_apply(op, mean, &delta);
    let variance = hilbert::norm_sqr(&delta) / hilbert::norm_sqr(psi);
    Ok(Centered {
        delta,
        delta2,
        variance,
    })
}

fn schrodinger(model: &ModelSpec, psi: &[C64]) -> Vec<C64> {
    let minus_i = C64::new(0.0, -1.0);
    model
        .hamiltonian
        .apply(psi)
        .into_iter()
        .map(|x| x * minus_i)
        .collect()
}

fn axpy(y: &mut [C64], alpha: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Colored-regime vector field for fixed noise values.
pub fn colored_rhs(model: &ModelSpec, state: &StateVector, noise: &[f64]) -> Result<Vec<C64>> {
    model.expect_regime(&[Regime::Colored])?;
    colored_field(model, state.amplitudes(), noise)
}

pub(crate) fn colored_field(model: &ModelSpec, psi: &[C64], noise: &[f64]) -> Result<Vec<C64>> {
    model.check_state(psi)?;
    if noise.len() != model.channels.len() {
        return Err(Error::ChannelCountMismatch {
            expected: model.channels.len(),
            found: noise.len(),
        });
    }
    let mut out = schrodinger(model, psi);
    for (ch, &xi) in model.channels.iter().zip(noise) {
        if ch.a == 0.0 && ch.b == 0.0 {
            continue;
        }
        let c = centered(&ch.operator, psi)?;
        axpy(&mut out, real(-ch.a), &c.delta2);
        axpy(&mut out, real(ch.a * c.variance), psi);
        axpy(&mut out, real(ch.b * xi), &c.delta);
    }
    Ok(out)
}

/// Corrected Ito SSE coefficients.
pub fn ito_rhs(model: &ModelSpec, state: &StateVector) -> Result<SdeCoefficients> {
    model.expect_regime(&[Regime::ItoWhite])?;
    ito_coefficients(model, state.amplitudes())
}

pub(crate) fn ito_coefficients(model: &ModelSpec, psi: &[C64]) -> Result<SdeCoefficients> {
    model.check_state(psi)?;
    let mut drift = schrodinger(model, psi);
    let mut diffusions = Vec::with_capacity(model.channels.len());
    for ch in &model.channels {
        let c = centered(&ch.operator, psi)?;
        axpy(&mut drift, real(-0.5 * ch.diffusion()), &c.delta2);
        diffusions.push(c.delta.iter().map(|x| x * ch.gamma).collect());
    }
    Ok(SdeCoefficients { drift, diffusions })
}

/// Stratonovich SSE coefficients.
pub fn strat_rhs(model: &ModelSpec, state: &StateVector) -> Result<SdeCoefficients> {
    model.expect_regime(&[Regime::StratonovichWhite])?;
    strat_coefficients(model, state.amplitudes())
}

/// The Stratonovich coefficients, contracted by the integrator as Ito.
pub fn naive_ito_rhs(model: &ModelSpec, state: &StateVector) -> Result<SdeCoefficients> {
    model.expect_regime(&[Regime::NaiveItoWhite])?;
    strat_coefficients(model, state.amplitudes())
}

pub(crate) fn strat_coefficients(model: &ModelSpec, psi: &[C64]) -> Result<SdeCoefficients> {
    model.check_state(psi)?;
    let mut drift = schrodinger(model, psi);
    let mut diffusions = Vec::with_capacity(model.channels.len());
    for ch in &model.channels {
        let c = centered(&ch.operator, psi)?;
        axpy(&mut drift, real(-ch.a), &c.delta2);
        axpy(&mut drift, real(ch.a * c.variance), psi);
        let amp = ch.diffusion().sqrt();
        diffusions.push(c.delta.iter().map(|x| x * amp).collect());
    }
    Ok(SdeCoefficients { drift, diffusions })
}

/// Coefficients of whichever white-noise regime the model is in.
pub fn white_coefficients(model: &ModelSpec, psi: &[C64]) -> Result<SdeCoefficients> {
    match model.regime {
        Regime::ItoWhite => ito_coefficients(model, psi),
        Regime::StratonovichWhite | Regime::NaiveItoWhite => strat_coefficients(model, psi),
        Regime::Colored => Err(Error::RegimeMismatch {
            expected: Regime::ItoWhite,
            found: Regime::Colored,
        }),
    }
}

/// Predicted Ito growth rate of `||psi||^2` under the naive reading:
/// `sum_k D_k <D_k^2>`.
pub fn naive_growth_rate(model: &ModelSpec, state: &StateVector) -> Result<f64> {
    model.channels.iter().try_fold(0.0, |acc, ch| {
        Ok(acc + ch.diffusion() * hilbert::variance(&ch.operator, state)?)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Ok,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub severity: Severity,
    pub value: f64,
    pub message: String,
}

/// Structural checks on a model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub checks: Vec<Check>,
}

impl Diagnostics {
    fn push(&mut self, name: String, severity: Severity, value: f64, message: String) {
        self.checks.push(Check {
            name,
            severity,
            value,
            message,
        });
    }

    /// True when no hard check failed; warnings do not count.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.severity != Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Check> {
        self.checks
            .iter()
            .filter(|c| c.severity == Severity::Warning)
    }
}

fn fmt(args: core::fmt::Arguments<'_>) -> String {
    let mut s = String::new();
    let _ = s.write_fmt(args);
    s
}

/// Hermiticity residuals, pairwise commutators, coefficient signs and the
/// fluctuation-dissipation status of every channel.
pub fn validate(model: &ModelSpec) -> Diagnostics {
    let mut diag = Diagnostics::default();
    let sev = |bad: bool| if bad { Severity::Error } else { Severity::Ok };

    let res = model.hamiltonian.matrix().hermiticity_residual();
    diag.push(
        "hermitian:H".into(),
        sev(res > DEFAULT_TOL),
        res,
        fmt(format_args!("Hamiltonian Hermiticity residual {res:.3e}")),
    );

    for (k, ch) in model.channels.iter().enumerate() {
        let res = ch.operator.matrix().hermiticity_residual();
        diag.push(
            fmt(format_args!("hermitian:O{k}")),
            sev(res > DEFAULT_TOL),
            res,
            fmt(format_args!(
                "channel {k} operator Hermiticity residual {res:.3e}"
            )),
        );
        if ch.operator.dim() != model.dim() {
            diag.push(
                fmt(format_args!("dimension:O{k}")),
                Severity::Error,
                ch.operator.dim() as f64,
                fmt(format_args!(
                    "channel {k} operator has dimension {} but H has {}",
                    ch.operator.dim(),
                    model.dim()
                )),
            );
        }
    }

    for i in 0..model.channels.len() {
        for j in i + 1..model.channels.len() {
            let norm = model.channels[i]
                .operator
                .matrix()
                .commutator(model.channels[j].operator.matrix())
                .max_abs();
            let bad = norm > DEFAULT_TOL;
            let msg = if bad {
                fmt(format_args!(
                    "channels {i} and {j} do not commute: max |[O{i}, O{j}]| = {norm:.3e}"
                ))
            } else {
                fmt(format_args!("channels {i} and {j} commute"))
            };
            diag.push(fmt(format_args!("commute:O{i},O{j}")), sev(bad), norm, msg);
        }
    }

    for (k, ch) in model.channels.iter().enumerate() {
        let finite = ch.a.is_finite() && ch.b.is_finite() && ch.gamma.is_finite();
        diag.push(
            fmt(format_args!("sign:A{k}")),
            sev(!(ch.a >= 0.0) || !finite),
            ch.a,
            fmt(format_args!("channel {k}: A = {}", ch.a)),
        );
        diag.push(
            fmt(format_args!("sign:gamma{k}")),
            sev(!(ch.gamma >= 0.0)),
            ch.gamma,
            fmt(format_args!("channel {k}: gamma = {}", ch.gamma)),
        );
        if model.regime == Regime::Colored {
            let bad_kind = !ch.kind.is_colored();
            let bad_tau = !(ch.tau > 0.0) || !ch.tau.is_finite();
            diag.push(
                fmt(format_args!("colored:channel{k}")),
                sev(bad_kind || bad_tau),
                ch.tau,
                if bad_kind {
                    fmt(format_args!(
                        "channel {k}: colored regime needs an OU or SBM noise kind"
                    ))
                } else {
                    fmt(format_args!(
                        "channel {k}: {:?} noise with tau = {}",
                        ch.kind, ch.tau
                    ))
                },
            );
        }
        let d = ch.diffusion();
        let fd = (ch.a - d).abs() <= FD_REL_TOL * ch.a.abs().max(d).max(1.0);
        let severity = if fd || model.regime == Regime::Colored {
            Severity::Ok
        } else {
            Severity::Warning
        };
        diag.push(
            fmt(format_args!("fd:channel{k}")),
            severity,
            ch.a - d,
            if fd {
                fmt(format_args!("channel {k}: A = gamma^2 = {d}"))
            } else {
                fmt(format_args!("channel {k}: A = {} differs from gamma^2 = {d}; the Ito SSE is not norm preserving", ch.a))
            },
        );
    }
    diag
}
