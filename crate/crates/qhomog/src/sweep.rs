//! Fixed-diffusion sweeps of the colored-noise correlation time.

use qhomog_core::analysis::{power_law_order, LinearFit};
use qhomog_core::hilbert::StateVector;
use qhomog_core::homogenize::{coupling_for_diffusion, effective_coupling};
use qhomog_core::lindblad::GkslSpec;
use qhomog_core::models::{ModelSpec, NoiseChannel, Regime};
use qhomog_core::sde::{IntegrationConfig, DEFAULT_COLORED_STEPS_PER_TAU};
use qhomog_core::Error as CoreError;

use crate::ensemble::{self, Observable, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    /// Coupling `B` of channel 0.
    pub b: f64,
    pub gamma_eff: f64,
    pub time: f64,
    pub distance: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFit {
    /// Time at which distances were fitted against tau.
    pub time: f64,
    pub fit: LinearFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Log-log slope of distance against tau at the last sample time;
    /// `None` with fewer than two taus or a zero distance.
    pub fit: Option<SweepFit>,
}

impl SweepTable {
    /// Rows at `time`, in sweep order.
    pub fn at_time(&self, time: f64) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.time == time).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub sample_times: Vec<f64>,
    pub t_end: f64,
    pub renormalize: bool,
    pub steps_per_tau: f64,
    pub trajectories: usize,
    pub master_seed: u64,
    pub batches: usize,
}

impl SweepSettings {
    pub fn new(sample_times: Vec<f64>, trajectories: usize, master_seed: u64) -> Self {
        let t_end = sample_times.last().copied().unwrap_or(0.0);
        Self {
            sample_times,
            t_end,
            renormalize: true,
            steps_per_tau: DEFAULT_COLORED_STEPS_PER_TAU,
            trajectories,
            master_seed,
            batches: ensemble::DEFAULT_BATCHES,
        }
    }
}

/// The template at correlation time `tau`: every channel keeps its kind,
/// `A` and target `D = gamma^2`, with `B = sqrt(D / (2 E[xi^2] tau))`.
pub fn model_at_tau(template: &ModelSpec, tau: f64) -> Result<ModelSpec> {
    let channels = template
        .channels
        .iter()
        .map(|ch| {
            let b = coupling_for_diffusion(ch.kind, ch.diffusion(), tau)?;
            NoiseChannel::colored(ch.operator.clone(), ch.kind, tau, ch.a, b)
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    Ok(ModelSpec::new(
        template.hamiltonian.clone(),
        channels,
        Regime::Colored,
    )?)
}

/// Trace distance of the colored ensemble to the GKSL reference for each
/// `tau` (strictly descending), with `dt = tau / steps_per_tau`.
pub fn tau_sweep(
    template: &ModelSpec,
    taus: &[f64],
    reference: &GkslSpec,
    initial: &StateVector,
    settings: &SweepSettings,
    observables: &[Observable],
) -> Result<SweepTable> {
    if template.regime != Regime::Colored {
        return Err(CoreError::RegimeMismatch {
            expected: Regime::Colored,
            found: template.regime,
        }
        .into());
    }
    if taus.is_empty() || taus.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(CoreError::InvalidParameter {
            name: "taus (must be strictly descending)",
            value: taus.first().copied().unwrap_or(f64::NAN),
        }
        .into());
    }
    let mut rows = Vec::new();
    for &tau in taus {
        let model = model_at_tau(template, tau)?;
        let dt = (tau / settings.steps_per_tau).min(settings.t_end.max(f64::MIN_POSITIVE));
        let mut config = IntegrationConfig::new(dt, settings.t_end, settings.sample_times.clone());
        config.renormalize = settings.renormalize;
        let result = ensemble::run_batched(
            &model,
            initial,
            &config,
            observables,
            settings.trajectories,
            settings.master_seed,
            settings.batches,
        )?;
        let distances = ensemble::compare_to_master(&result, reference)?;
        let ch0 = &model.channels[0];
        let gamma_eff = effective_coupling(ch0.kind, ch0.b, tau)?.gamma;
        rows.extend(distances.into_iter().map(|d| SweepRow {
            tau,
            b: ch0.b,
            gamma_eff,
            time: d.time,
            distance: d.distance,
            stderr: d.stderr,
        }));
    }
    let fit = settings.sample_times.last().and_then(|&t| {
        let at: Vec<&SweepRow> = rows.iter().filter(|r| r.time == t).collect();
        if at.len() < 2 {
            return None;
        }
        let xs: Vec<f64> = at.iter().map(|r| r.tau).collect();
        let ys: Vec<f64> = at.iter().map(|r| r.distance).collect();
        power_law_order(&xs, &ys)
            .ok()
            .map(|fit| SweepFit { time: t, fit })
    });
    Ok(SweepTable { rows, fit })
}
