//! TOML experiment configuration.
//!
//! ```toml
//! dimension = 2
//! regime = "ito_white"
//! hamiltonian = "zero"
//! initial_state = "plus"
//!
//! [[channels]]
//! operator = "pauli_z"
//! gamma = 1.0
//!
//! [integration]
//! dt = 1e-3
//! t_end = 1.0
//! sample_times = [0.0, 0.5, 1.0]
//!
//! [ensemble]
//! trajectories = 4000
//! master_seed = 7
//! ```
//!
//! Operators are a built-in name (`pauli_x`, `pauli_y`, `pauli_z` on a qubit;
//! `identity`, `zero`, `re_rho_ij`, `im_rho_ij` in any dimension), a scaled
//! name `{ named = "pauli_x", scale = 0.5 }`, or row-major rows of
//! `[re, im]` pairs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use qhomog_core::hilbert::{CMatrix, HermitianOperator, StateVector, C64};
use qhomog_core::homogenize::{coupling_for_diffusion, effective_coupling};
use qhomog_core::models::{ModelSpec, NoiseChannel, Regime};
use qhomog_core::noise::NoiseKind;
use qhomog_core::sde::{IntegrationConfig, DEFAULT_COLORED_STEPS_PER_TAU, DEFAULT_MARKOVIAN_DT};

use crate::ensemble::{Observable, DEFAULT_BATCHES};
use crate::sweep::SweepSettings;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: impl Into<String>, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Scaled { named: String, scale: f64 },
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindSpec {
    Ou,
    Sbm,
}

impl From<KindSpec> for NoiseKind {
    fn from(k: KindSpec) -> Self {
        match k {
            KindSpec::Ou => NoiseKind::Ou,
            KindSpec::Sbm => NoiseKind::Sbm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub operator: OperatorSpec,
    pub a: Option<f64>,
    pub gamma: Option<f64>,
    pub b: Option<f64>,
    pub kind: Option<KindSpec>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    pub operator: OperatorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSpec {
    pub dt: Option<f64>,
    pub t_end: f64,
    pub sample_times: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub renormalize: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub trajectories: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub workers: Option<usize>,
    pub batches: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub taus: Vec<f64>,
    pub steps_per_tau: Option<f64>,
    /// Times at which distances are reported; defaults to the integration
    /// sample times.
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub regimes: Vec<String>,
    /// Sample times up to this bound enter the naive norm-growth fit.
    pub growth_window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub dimension: usize,
    pub regime: String,
    pub hamiltonian: OperatorSpec,
    pub initial_state: StateSpec,
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    pub integration: IntegrationSpec,
    pub ensemble: EnsembleSpec,
    pub sweep: Option<SweepSpec>,
    pub compare: Option<CompareSpec>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        if cfg.dimension < 2 {
            return Err(field_err("dimension", "must be at least 2"));
        }
        Ok(cfg)
    }

    pub fn regime(&self) -> Result<Regime> {
        parse_regime(&self.regime).map_err(|m| field_err("regime", m))
    }

    pub fn hamiltonian(&self) -> Result<HermitianOperator> {
        build_operator(&self.hamiltonian, self.dimension).map_err(|m| field_err("hamiltonian", m))
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        build_state(&self.initial_state, self.dimension).map_err(|m| field_err("initial_state", m))
    }

    /// The model in the configured regime.
    pub fn model(&self) -> Result<ModelSpec> {
        self.model_in(self.regime()?)
    }

    /// The model in `regime`. Colored channels need `kind`, `tau` and one
    /// of `b` or `gamma`; white channels need `gamma` or a colored triple
    /// from which it follows. `a` defaults to `gamma^2`.
    pub fn model_in(&self, regime: Regime) -> Result<ModelSpec> {
        let h = self.hamiltonian()?;
        if self.channels.is_empty() {
            return Err(field_err("channels", "at least one channel is required"));
        }
        let channels = self
            .channels
            .iter()
            .enumerate()
            .map(|(k, ch)| self.channel(k, ch, regime))
            .collect::<Result<Vec<_>>>()?;
        ModelSpec::new(h, channels, regime).map_err(|e| field_err("channels", e))
    }

    fn channel(&self, k: usize, ch: &ChannelSpec, regime: Regime) -> Result<NoiseChannel> {
        let f = |name: &str| format!("channels[{k}].{name}");
        let op = build_operator(&ch.operator, self.dimension)
            .map_err(|m| field_err(f("operator"), m))?;
        let colored = match (ch.kind, ch.tau) {
            (Some(kind), Some(tau)) => {
                let kind = NoiseKind::from(kind);
                let b = match (ch.b, ch.gamma) {
                    (Some(b), _) => b,
                    (None, Some(g)) => coupling_for_diffusion(kind, g * g, tau)
                        .map_err(|e| field_err(f("tau"), e))?,
                    (None, None) => return Err(field_err(f("b"), "one of b or gamma is required")),
                };
                Some((kind, tau, b))
            }
            (Some(_), None) if regime == Regime::Colored => {
                return Err(field_err(f("tau"), "required for colored noise"))
            }
            (None, _) if regime == Regime::Colored => {
                return Err(field_err(
                    f("kind"),
                    "required for colored noise (ou or sbm)",
                ))
            }
            _ => None,
        };
        let gamma = match (ch.gamma, colored) {
            (_, Some((kind, tau, b))) if ch.b.is_some() => {
                effective_coupling(kind, b, tau)
                    .map_err(|e| field_err(f("b"), e))?
                    .gamma
            }
            (Some(g), _) => g,
            (None, _) => return Err(field_err(f("gamma"), "required for white-noise regimes")),
        };
        if let (Some(g), Some(_)) = (ch.gamma, ch.b) {
            if (g - gamma).abs() > 1e-9 * g.abs().max(1.0) {
                return Err(field_err(
                    f("gamma"),
                    format!("inconsistent with b: b implies gamma = {gamma}"),
                ));
            }
        }
        let a = ch.a.unwrap_or(gamma * gamma);
        if regime == Regime::Colored {
            let (kind, tau, b) = colored.expect("checked above");
            NoiseChannel::colored(op, kind, tau, a, b).map_err(|e| field_err(f("tau"), e))
        } else {
            Ok(NoiseChannel::white(op, a, gamma))
        }
    }

    /// Step size for `regime`: the configured `dt`, or the regime default
    /// (`1e-3`, or `tau_min / 50` for colored noise).
    pub fn dt_for(&self, regime: Regime) -> Result<f64> {
        if let Some(dt) = self.integration.dt {
            return Ok(dt);
        }
        let dt = if regime == Regime::Colored {
            let tau = self
                .channels
                .iter()
                .filter_map(|c| c.tau)
                .fold(f64::INFINITY, f64::min);
            tau / DEFAULT_COLORED_STEPS_PER_TAU
        } else {
            DEFAULT_MARKOVIAN_DT
        };
        let t_end = self.integration.t_end;
        Ok(if t_end > 0.0 { dt.min(t_end) } else { dt })
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.integration
            .sample_times
            .clone()
            .unwrap_or_else(|| vec![0.0, self.integration.t_end])
            .into_iter()
            .fold(Vec::new(), |mut acc, t| {
                if acc.last() != Some(&t) {
                    acc.push(t);
                }
                acc
            })
    }

    pub fn integration_for(&self, regime: Regime) -> Result<IntegrationConfig> {
        let mut cfg = IntegrationConfig::new(
            self.dt_for(regime)?,
            self.integration.t_end,
            self.sample_times(),
        );
        cfg.renormalize = self.integration.renormalize;
        cfg.validate().map_err(|e| field_err("integration", e))?;
        Ok(cfg)
    }

    /// Channel operators `O0, O1, ...` plus the configured observables, or
    /// `re_rho_01` when none are configured.
    pub fn observables(&self) -> Result<Vec<Observable>> {
        let mut out = Vec::new();
        for (k, ch) in self.channels.iter().enumerate() {
            let op = build_operator(&ch.operator, self.dimension)
                .map_err(|m| field_err(format!("channels[{k}].operator"), m))?;
            out.push(Observable::new(format!("O{k}"), op));
        }
        if self.observables.is_empty() {
            let op = build_operator(&OperatorSpec::Named("re_rho_01".into()), self.dimension)
                .map_err(|m| field_err("observables", m))?;
            out.push(Observable::new("re_rho_01", op));
        }
        for (k, o) in self.observables.iter().enumerate() {
            let op = build_operator(&o.operator, self.dimension)
                .map_err(|m| field_err(format!("observables[{k}].operator"), m))?;
            out.push(Observable::new(o.name.clone(), op));
        }
        let mut seen = HashSet::new();
        for o in &out {
            if !seen.insert(o.name.clone()) {
                return Err(field_err(
                    "observables",
                    format!("duplicate name `{}`", o.name),
                ));
            }
        }
        Ok(out)
    }

    pub fn batches(&self) -> usize {
        self.ensemble.batches.unwrap_or(DEFAULT_BATCHES)
    }

    pub fn sweep_settings(&self, master_seed: u64) -> Result<(Vec<f64>, SweepSettings)> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| field_err("sweep", "section is required for the sweep command"))?;
        if sweep.taus.is_empty() {
            return Err(field_err("sweep.taus", "must not be empty"));
        }
        if sweep.taus.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(field_err("sweep.taus", "must be strictly descending"));
        }
        let times = sweep.times.clone().unwrap_or_else(|| self.sample_times());
        let mut s = SweepSettings::new(times, self.ensemble.trajectories, master_seed);
        s.t_end = self.integration.t_end;
        s.renormalize = self.integration.renormalize;
        s.steps_per_tau = sweep.steps_per_tau.unwrap_or(DEFAULT_COLORED_STEPS_PER_TAU);
        s.batches = self.batches();
        let probe_dt = if s.t_end > 0.0 { s.t_end } else { 1.0 };
        IntegrationConfig::new(probe_dt, s.t_end, s.sample_times.clone())
            .validate()
            .map_err(|e| field_err("sweep.times", e))?;
        Ok((sweep.taus.clone(), s))
    }

    pub fn compare_regimes(&self) -> Result<Vec<Regime>> {
        let compare = self
            .compare
            .as_ref()
            .ok_or_else(|| field_err("compare", "section is required for the compare command"))?;
        if compare.regimes.is_empty() {
            return Err(field_err(
                "compare.regimes",
                "must list at least one regime",
            ));
        }
        let mut out = Vec::new();
        for (k, name) in compare.regimes.iter().enumerate() {
            let r =
                parse_regime(name).map_err(|m| field_err(format!("compare.regimes[{k}]"), m))?;
            if out.contains(&r) {
                return Err(field_err(format!("compare.regimes[{k}]"), "listed twice"));
            }
            out.push(r);
        }
        Ok(out)
    }
}

pub fn parse_regime(name: &str) -> std::result::Result<Regime, String> {
    name.parse::<Regime>().map_err(|_| {
        let known: Vec<&str> = Regime::ALL.iter().map(|r| r.name()).collect();
        format!(
            "unknown regime `{name}`, expected one of {}",
            known.join(", ")
        )
    })
}

fn named_operator(name: &str, dim: usize) -> std::result::Result<HermitianOperator, String> {
    let qubit = |op: HermitianOperator| {
        if dim == 2 {
            Ok(op)
        } else {
            Err(format!("`{name}` is only defined for dimension 2"))
        }
    };
    match name {
        "pauli_x" => qubit(HermitianOperator::pauli_x()),
        "pauli_y" => qubit(HermitianOperator::pauli_y()),
        "pauli_z" => qubit(HermitianOperator::pauli_z()),
        "identity" => HermitianOperator::identity(dim).map_err(|e| e.to_string()),
        "zero" => HermitianOperator::zero(dim).map_err(|e| e.to_string()),
        _ => {
            let (prefix, idx) = name
                .strip_prefix("re_rho_")
                .map(|r| ("re", r))
                .or_else(|| name.strip_prefix("im_rho_").map(|r| ("im", r)))
                .ok_or_else(|| format!("unknown operator `{name}`"))?;
            let digits: Vec<usize> = idx
                .chars()
                .filter_map(|c| c.to_digit(10).map(|d| d as usize))
                .collect();
            if digits.len() != 2 || idx.len() != 2 {
                return Err(format!("`{name}`: expected two single-digit indices"));
            }
            let obs = if prefix == "re" {
                Observable::re_rho(dim, digits[0], digits[1])
            } else {
                Observable::im_rho(dim, digits[0], digits[1])
            };
            obs.map(|o| o.operator).map_err(|e| e.to_string())
        }
    }
}

pub fn build_operator(
    spec: &OperatorSpec,
    dim: usize,
) -> std::result::Result<HermitianOperator, String> {
    match spec {
        OperatorSpec::Named(name) => named_operator(name, dim),
        OperatorSpec::Scaled { named, scale } => Ok(named_operator(named, dim)?.scaled(*scale)),
        OperatorSpec::Matrix(rows) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(format!("matrix must be {dim} x {dim}"));
            }
            let m = CMatrix::from_fn(dim, |i, j| C64::new(rows[i][j][0], rows[i][j][1]));
            HermitianOperator::new(m).map_err(|e| e.to_string())
        }
    }
}

pub fn build_state(spec: &StateSpec, dim: usize) -> std::result::Result<StateVector, String> {
    match spec {
        StateSpec::Named(name) if name == "plus" => {
            StateVector::uniform(dim).map_err(|e| e.to_string())
        }
        StateSpec::Named(name) => {
            let k = name
                .strip_prefix("basis_")
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or_else(|| format!("unknown state `{name}`, expected `plus` or `basis_<k>`"))?;
            StateVector::basis(dim, k).map_err(|e| e.to_string())
        }
        StateSpec::Amplitudes(amps) => {
            if amps.len() != dim {
                return Err(format!("expected {dim} amplitudes, got {}", amps.len()));
            }
            StateVector::normalized(amps.iter().map(|a| C64::new(a[0], a[1])).collect())
                .map_err(|e| e.to_string())
        }
    }
}
