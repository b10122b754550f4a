//! Time stepping.
//!
//! The colored regime is a random ODE per path and is advanced with Heun's
//! method using the noise values at both ends of the step. The Ito regimes
//! use Euler-Maruyama; the Stratonovich regime uses the Heun
//! predictor-corrector with one set of Wiener increments shared by both
//! stages.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hilbert::{StateVector, C64};
use crate::models::{self, ModelSpec, Regime, SdeCoefficients};
use crate::noise::{self, RngStream};
#[allow(unused_imports)]
use num_traits::Float;

/// Colored-regime steps must satisfy `dt <= tau_min / COLORED_STEPS_PER_TAU_MIN`.
pub const COLORED_STEPS_PER_TAU_MIN: f64 = 10.0;
/// Default step for the Markovian regimes.
pub const DEFAULT_MARKOVIAN_DT: f64 = 1e-3;
/// Default colored step is `tau / DEFAULT_COLORED_STEPS_PER_TAU`.
pub const DEFAULT_COLORED_STEPS_PER_TAU: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_end: f64,
    pub sample_times: Vec<f64>,
    pub renormalize: bool,
    pub record_norm_drift: bool,
}

impl IntegrationConfig {
    /// Renormalizing configuration without per-step norm recording.
    pub fn new(dt: f64, t_end: f64, sample_times: Vec<f64>) -> Self {
        Self {
            dt,
            t_end,
            sample_times,
            renormalize: true,
            record_norm_drift: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t_end",
                value: self.t_end,
            });
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: self.dt,
            });
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: self.dt,
            });
        }
        let sorted = self.sample_times.windows(2).all(|w| w[0] <= w[1]);
        let inside = self
            .sample_times
            .iter()
            .all(|&t| (0.0..=self.t_end).contains(&t));
        if !sorted || !inside {
            return Err(Error::InvalidSampleTimes);
        }
        Ok(())
    }
}

/// A stretch of equal steps ending at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub steps: usize,
    pub h: f64,
    pub time: f64,
    /// Whether `time` is a sample time.
    pub record: bool,
}

/// Splits `[0, t_end]` at the sample times into legs of equal steps no
/// longer than `dt`, so every sample time is hit exactly.
pub fn schedule(dt: f64, t_end: f64, sample_times: &[f64]) -> Vec<Leg> {
    let mut legs = Vec::with_capacity(sample_times.len() + 1);
    let mut now = 0.0;
    let mut push = |target: f64, record: bool, now: &mut f64| {
        let span = target - *now;
        let steps = if span <= 0.0 {
            0
        } else {
            // Tolerate round-off when span is a multiple of dt.
            let ratio = span / dt;
            let n = ratio.round();
            if (ratio - n).abs() <= 1e-9 * n.max(1.0) {
                n.max(1.0) as usize
            } else {
                ratio.ceil() as usize
            }
        };
        let h = if steps == 0 { 0.0 } else { span / steps as f64 };
        legs.push(Leg {
            steps,
            h,
            time: target,
            record,
        });
        *now = target;
    };
    for &t in sample_times {
        push(t, true, &mut now);
    }
    if t_end > now {
        push(t_end, false, &mut now);
    }
    legs
}

/// Which trajectory of which ensemble: keys the per-channel RNG streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectorySeed {
    pub master: u64,
    pub index: u64,
}

impl TrajectorySeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    pub fn streams(&self, channels: usize) -> Vec<RngStream> {
        (0..channels)
            .map(|k| RngStream::derive(self.master, self.index, k as u64))
            .collect()
    }
}

impl From<u64> for TrajectorySeed {
    fn from(master: u64) -> Self {
        Self::new(master, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Squared norm at each sample time, before renormalization.
    pub sample_norms2: Vec<f64>,
    /// Squared norm after every step, before renormalization; empty unless
    /// `record_norm_drift` is set.
    pub step_norms2: Vec<f64>,
    /// Noise values at `t_end`; empty for white-noise regimes.
    pub final_noise: Vec<f64>,
}

/// Largest admissible colored step for the model.
pub fn colored_step_limit(model: &ModelSpec) -> f64 {
    model
        .channels
        .iter()
        .map(|ch| ch.tau / COLORED_STEPS_PER_TAU_MIN)
        .fold(f64::INFINITY, f64::min)
}

fn add_scaled(base: &[C64], terms: &[(&[C64], f64)]) -> Vec<C64> {
    let mut out = base.to_vec();
    for (v, s) in terms {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x * s;
        }
    }
    out
}

/// One Heun step of the colored random ODE. Returns the new state and the
/// advanced noise values.
pub fn step_colored(
    model: &ModelSpec,
    state: &StateVector,
    noise: &[f64],
    dt: f64,
    rngs: &mut [RngStream],
) -> Result<(StateVector, Vec<f64>)> {
    if model.regime != Regime::Colored {
        return Err(Error::RegimeMismatch {
            expected: Regime::Colored,
            found: model.regime,
        });
    }
    let limit = colored_step_limit(model);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit });
    }
    if noise.len() != model.channels.len() || rngs.len() != model.channels.len() {
        return Err(Error::ChannelCountMismatch {
            expected: model.channels.len(),
            found: noise.len().min(rngs.len()),
        });
    }
    let next_noise = model
        .channels
        .iter()
        .zip(noise)
        .zip(rngs.iter_mut())
        .map(|((ch, &xi), rng)| noise::colored_step(ch.kind, xi, dt, ch.tau, rng))
        .collect::<Result<Vec<f64>>>()?;
    let psi = state.amplitudes();
    let k1 = models::colored_field(model, psi, noise)?;
    let predictor = add_scaled(psi, &[(&k1, dt)]);
    let k2 = models::colored_field(model, &predictor, &next_noise)?;
    let next = add_scaled(psi, &[(&k1, 0.5 * dt), (&k2, 0.5 * dt)]);
    Ok((StateVector::new(next)?, next_noise))
}

/// Euler-Maruyama step with given Wiener increments.
pub fn euler_maruyama_step<F>(
    psi: &[C64],
    dt: f64,
    increments: &[f64],
    coefficients: F,
) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Result<SdeCoefficients>,
{
    let c = coefficients(psi)?;
    let mut out = add_scaled(psi, &[(&c.drift, dt)]);
    for (b, &dw) in c.diffusions.iter().zip(increments) {
        for (o, x) in out.iter_mut().zip(b) {
            *o += x * dw;
        }
    }
    Ok(out)
}

/// Heun (Stratonovich) predictor-corrector step with given increments.
pub fn heun_step<F>(psi: &[C64], dt: f64, increments: &[f64], coefficients: F) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Result<SdeCoefficients>,
{
    let c0 = coefficients(psi)?;
    let mut predictor = add_scaled(psi, &[(&c0.drift, dt)]);
    for (b, &dw) in c0.diffusions.iter().zip(increments) {
        for (o, x) in predictor.iter_mut().zip(b) {
            *o += x * dw;
        }
    }
    let c1 = coefficients(&predictor)?;
    let mut out = add_scaled(psi, &[(&c0.drift, 0.5 * dt), (&c1.drift, 0.5 * dt)]);
    for ((b0, b1), &dw) in c0.diffusions.iter().zip(&c1.diffusions).zip(increments) {
        for ((o, x0), x1) in out.iter_mut().zip(b0).zip(b1) {
            *o += (x0 + x1) * (0.5 * dw);
        }
    }
    Ok(out)
}

fn draw_increments(dt: f64, rngs: &mut [RngStream]) -> Result<Vec<f64>> {
    rngs.iter_mut()
        .map(|r| noise::white_increment(dt, r))
        .collect()
}

fn check_increments(model: &ModelSpec, n: usize) -> Result<()> {
    if n != model.channels.len() {
        return Err(Error::ChannelCountMismatch {
            expected: model.channels.len(),
            found: n,
        });
    }
    Ok(())
}

/// Euler-Maruyama step of an `ItoWhite` or `NaiveItoWhite` model with
/// pinned increments.
pub fn ito_step_with(
    model: &ModelSpec,
    state: &StateVector,
    dt: f64,
    increments: &[f64],
) -> Result<StateVector> {
    if !matches!(model.regime, Regime::ItoWhite | Regime::NaiveItoWhite) {
        return Err(Error::RegimeMismatch {
            expected: Regime::ItoWhite,
            found: model.regime,
        });
    }
    check_increments(model, increments.len())?;
    let next = euler_maruyama_step(state.amplitudes(), dt, increments, |p| {
        models::white_coefficients(model, p)
    })?;
    StateVector::new(next)
}

pub fn step_ito(
    model: &ModelSpec,
    state: &StateVector,
    dt: f64,
    rngs: &mut [RngStream],
) -> Result<StateVector> {
    let dw = draw_increments(dt, rngs)?;
    ito_step_with(model, state, dt, &dw)
}

/// Heun step of a `StratonovichWhite` model with pinned increments.
pub fn strat_step_with(
    model: &ModelSpec,
    state: &StateVector,
    dt: f64,
    increments: &[f64],
) -> Result<StateVector> {
    if model.regime != Regime::StratonovichWhite {
        return Err(Error::RegimeMismatch {
            expected: Regime::StratonovichWhite,
            found: model.regime,
        });
    }
    check_increments(model, increments.len())?;
    let next = heun_step(state.amplitudes(), dt, increments, |p| {
        models::strat_coefficients(model, p)
    })?;
    StateVector::new(next)
}

pub fn step_strat(
    model: &ModelSpec,
    state: &StateVector,
    dt: f64,
    rngs: &mut [RngStream],
) -> Result<StateVector> {
    let dw = draw_increments(dt, rngs)?;
    strat_step_with(model, state, dt, &dw)
}

/// Integrates one trajectory, dispatching on the model's regime.
pub fn integrate(
    model: &ModelSpec,
    initial: &StateVector,
    config: &IntegrationConfig,
    seed: TrajectorySeed,
) -> Result<Trajectory> {
    config.validate()?;
    if initial.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: initial.dim(),
        });
    }
    if !models::validate(model).passed() {
        return Err(Error::InvalidModel(
            "structural checks failed; run validate for details",
        ));
    }
    if model.regime == Regime::Colored {
        let limit = colored_step_limit(model);
        if config.dt > limit * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge {
                dt: config.dt,
                limit,
            });
        }
    }

    let mut rngs = seed.streams(model.channels.len());
    let mut noise_values = if model.regime == Regime::Colored {
        model
            .channels
            .iter()
            .zip(rngs.iter_mut())
            .map(|(ch, rng)| noise::sample_stationary(ch.kind, rng))
            .collect::<Result<Vec<f64>>>()?
    } else {
        Vec::new()
    };

    let legs = schedule(config.dt, config.t_end, &config.sample_times);
    let total_steps: usize = legs.iter().map(|l| l.steps).sum();
    let mut traj = Trajectory {
        times: Vec::with_capacity(config.sample_times.len()),
        states: Vec::with_capacity(config.sample_times.len()),
        sample_norms2: Vec::with_capacity(config.sample_times.len()),
        step_norms2: if config.record_norm_drift {
            Vec::with_capacity(total_steps)
        } else {
            Vec::new()
        },
        final_noise: Vec::new(),
    };

    let mut state = initial.clone();
    let mut last_norm2 = state.norm_sqr();
    let mut now = 0.0;
    for leg in legs {
        for _ in 0..leg.steps {
            state = match model.regime {
                Regime::Colored => {
                    let (s, xi) = step_colored(model, &state, &noise_values, leg.h, &mut rngs)?;
                    noise_values = xi;
                    s
                }
                Regime::ItoWhite | Regime::NaiveItoWhite => {
                    step_ito(model, &state, leg.h, &mut rngs)?
                }
                Regime::StratonovichWhite => step_strat(model, &state, leg.h, &mut rngs)?,
            };
            now += leg.h;
            last_norm2 = if config.renormalize {
                state.normalize()
            } else {
                state.norm_sqr()
            };
            if !last_norm2.is_finite() || last_norm2 <= 0.0 {
                return Err(Error::NonFinite(now));
            }
            if config.record_norm_drift {
                traj.step_norms2.push(last_norm2);
            }
        }
        now = leg.time;
        if leg.record {
            traj.times.push(leg.time);
            traj.states.push(state.clone());
            traj.sample_norms2.push(last_norm2);
        }
    }
    traj.final_noise = noise_values;
    Ok(traj)
}

/// Wiener increments for `steps` steps of size `dt` on one channel, handy
/// for building paired coarse/fine paths.
pub fn wiener_increments(dt: f64, steps: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut out = vec![0.0; steps];
    for x in &mut out {
        *x = noise::white_increment(dt, rng)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{norm_sqr, HermitianOperator};
    use crate::homogenize::correction;
    use crate::models::NoiseChannel;
    use crate::noise::NoiseKind;
    use alloc::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dist(a: &[C64], b: &[C64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Truncated Taylor series of `exp(-i H t)`, independent of the steppers.
    fn expm_minus_i(h: &HermitianOperator, t: f64, v: &[C64]) -> Vec<C64> {
        let mut term = v.to_vec();
        let mut sum = v.to_vec();
        for k in 1..60 {
            term = h
                .apply(&term)
                .iter()
                .map(|x| x * c(0.0, -t / k as f64))
                .collect();
            for (s, x) in sum.iter_mut().zip(&term) {
                *s += x;
            }
        }
        sum
    }

    fn colored_model(h: HermitianOperator, kind: NoiseKind, tau: f64, a: f64, b: f64) -> ModelSpec {
        ModelSpec::new(
            h,
            vec![NoiseChannel::colored(HermitianOperator::pauli_z(), kind, tau, a, b).unwrap()],
            Regime::Colored,
        )
        .unwrap()
    }

    fn white_model(regime: Regime, a: f64, gamma: f64) -> ModelSpec {
        ModelSpec::new(
            HermitianOperator::zero(2).unwrap(),
            vec![NoiseChannel::white(HermitianOperator::pauli_z(), a, gamma)],
            regime,
        )
        .unwrap()
    }

    #[test]
    fn schedule_hits_sample_times() {
        let legs = schedule(0.1, 1.0, &[0.0, 0.25, 0.5]);
        assert_eq!(legs.len(), 4);
        assert_eq!(legs[0].steps, 0);
        assert_eq!(legs[1].steps, 3);
        assert!((legs[1].h * 3.0 - 0.25).abs() < 1e-15);
        assert_eq!(legs[3].steps, 5);
        assert!(!legs[3].record);
        assert_eq!(schedule(1e-3, 1.0, &[1.0])[0].steps, 1000);
    }

    #[test]
    fn config_validation() {
        assert!(IntegrationConfig::new(0.1, 1.0, vec![0.5, 0.2])
            .validate()
            .is_err());
        assert!(IntegrationConfig::new(0.1, 1.0, vec![1.5])
            .validate()
            .is_err());
        assert!(IntegrationConfig::new(0.0, 1.0, vec![]).validate().is_err());
        assert!(IntegrationConfig::new(2.0, 1.0, vec![]).validate().is_err());
        assert!(IntegrationConfig::new(0.1, 0.0, vec![0.0])
            .validate()
            .is_ok());
    }

    #[test]
    fn colored_zero_coupling_leaves_state() {
        let model = colored_model(
            HermitianOperator::zero(2).unwrap(),
            NoiseKind::Ou,
            1.0,
            0.0,
            0.0,
        );
        let psi = StateVector::normalized(vec![c(0.6, 0.2), c(-0.1, 0.7)]).unwrap();
        let mut rngs = [RngStream::new(1)];
        let (next, xi) = step_colored(&model, &psi, &[0.3], 0.01, &mut rngs).unwrap();
        assert_eq!(next, psi);
        assert_ne!(xi[0], 0.3);
    }

    #[test]
    fn colored_step_guard() {
        let model = colored_model(
            HermitianOperator::zero(2).unwrap(),
            NoiseKind::Ou,
            0.1,
            1.0,
            1.0,
        );
        let mut rngs = [RngStream::new(1)];
        let err = step_colored(
            &model,
            &StateVector::uniform(2).unwrap(),
            &[0.0],
            0.02,
            &mut rngs,
        );
        assert!(matches!(err, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn colored_unitary_local_error_is_third_order() {
        let model = colored_model(HermitianOperator::pauli_x(), NoiseKind::Ou, 1.0, 0.0, 0.0);
        let zero = StateVector::basis(2, 0).unwrap();
        let err = |dt: f64| {
            let mut rngs = [RngStream::new(5)];
            let (next, _) = step_colored(&model, &zero, &[0.0], dt, &mut rngs).unwrap();
            let exact = [c(dt.cos(), 0.0), c(0.0, -dt.sin())];
            dist(next.amplitudes(), &exact)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!(e1 < 1e-5, "{e1}");
        assert!((order - 3.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn colored_frozen_noise_matches_second_order_taylor() {
        // tau huge: the noise is effectively frozen over one step, so the
        // step is Heun on an autonomous field. Compare with
        // psi + h f + h^2/2 (Df) f, Df from central differences.
        let tau = 1e12;
        let model = colored_model(
            HermitianOperator::pauli_x().scaled(0.4),
            NoiseKind::Ou,
            tau,
            0.8,
            1.3,
        );
        let psi = StateVector::normalized(vec![c(0.8, 0.1), c(0.3, -0.5)]).unwrap();
        let xi = [0.6];
        let f = |p: &[C64]| models::colored_field(&model, p, &xi).unwrap();
        let taylor = |h: f64| {
            let f0 = f(psi.amplitudes());
            let eps = 1e-6;
            let plus = add_scaled(psi.amplitudes(), &[(&f0, eps)]);
            let minus = add_scaled(psi.amplitudes(), &[(&f0, -eps)]);
            let (fp, fm) = (f(&plus), f(&minus));
            let jf: Vec<C64> = fp
                .iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect();
            add_scaled(psi.amplitudes(), &[(&f0, h), (&jf, 0.5 * h * h)])
        };
        let err = |h: f64| {
            let mut rngs = [RngStream::new(9)];
            let (next, _) = step_colored(&model, &psi, &xi, h, &mut rngs).unwrap();
            dist(next.amplitudes(), &taylor(h))
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-4, "{e1}");
        assert!((e1 / e2).log2() > 2.7, "order {}", (e1 / e2).log2());
    }

    #[test]
    fn ito_identity_cases() {
        let mut rngs = [RngStream::new(2)];
        let psi = StateVector::normalized(vec![c(0.6, 0.2), c(-0.1, 0.7)]).unwrap();
        let next = step_ito(
            &white_model(Regime::ItoWhite, 0.0, 0.0),
            &psi,
            0.01,
            &mut rngs,
        )
        .unwrap();
        assert_eq!(next, psi);
        let e = StateVector::basis(2, 0).unwrap();
        let next = step_ito(
            &white_model(Regime::ItoWhite, 1.0, 1.0),
            &e,
            0.01,
            &mut rngs,
        )
        .unwrap();
        assert!(dist(next.amplitudes(), e.amplitudes()) < 1e-15);
    }

    #[test]
    fn ito_pinned_increment_assembly() {
        let model = white_model(Regime::ItoWhite, 1.0, 1.0);
        let psi = StateVector::normalized(vec![c(0.6, 0.2), c(-0.1, 0.7)]).unwrap();
        let (dt, dw) = (0.01, 0.137);
        let next = ito_step_with(&model, &psi, dt, &[dw]).unwrap();
        let co = models::ito_rhs(&model, &psi).unwrap();
        let by_hand: Vec<C64> = psi
            .amplitudes()
            .iter()
            .zip(&co.drift)
            .zip(&co.diffusions[0])
            .map(|((p, a), b)| p + a * dt + b * dw)
            .collect();
        assert!(dist(next.amplitudes(), &by_hand) < 1e-16);
    }

    #[test]
    fn heun_without_diffusion_is_ode_heun() {
        let model = ModelSpec::new(
            HermitianOperator::pauli_x(),
            vec![NoiseChannel::white(HermitianOperator::pauli_z(), 0.7, 0.0)],
            Regime::StratonovichWhite,
        )
        .unwrap();
        let psi = StateVector::normalized(vec![c(0.6, 0.2), c(-0.1, 0.7)]).unwrap();
        let dt = 0.05;
        let next = strat_step_with(&model, &psi, dt, &[0.3]).unwrap();
        let f = |p: &[C64]| models::strat_coefficients(&model, p).unwrap().drift;
        let k1 = f(psi.amplitudes());
        let pred = add_scaled(psi.amplitudes(), &[(&k1, dt)]);
        let k2 = f(&pred);
        let heun = add_scaled(psi.amplitudes(), &[(&k1, 0.5 * dt), (&k2, 0.5 * dt)]);
        assert!(dist(next.amplitudes(), &heun) < 1e-16);
    }

    #[test]
    fn heun_with_additive_noise_matches_euler_maruyama() {
        let b = vec![c(0.3, -0.2), c(0.1, 0.4)];
        let coeff = |_: &[C64]| {
            Ok(SdeCoefficients {
                drift: vec![c(0.0, 0.0); 2],
                diffusions: vec![b.clone()],
            })
        };
        let psi = [c(1.0, 0.0), c(0.0, 0.0)];
        let h = heun_step(&psi, 0.01, &[0.2], coeff).unwrap();
        let e = euler_maruyama_step(&psi, 0.01, &[0.2], coeff).unwrap();
        assert!(dist(&h, &e) < 1e-16);
    }

    #[test]
    fn step_regime_checks() {
        let psi = StateVector::uniform(2).unwrap();
        assert!(ito_step_with(
            &white_model(Regime::StratonovichWhite, 1.0, 1.0),
            &psi,
            0.1,
            &[0.0]
        )
        .is_err());
        assert!(
            strat_step_with(&white_model(Regime::ItoWhite, 1.0, 1.0), &psi, 0.1, &[0.0]).is_err()
        );
        assert!(ito_step_with(
            &white_model(Regime::NaiveItoWhite, 1.0, 1.0),
            &psi,
            0.1,
            &[0.0]
        )
        .is_ok());
        assert!(ito_step_with(&white_model(Regime::ItoWhite, 1.0, 1.0), &psi, 0.1, &[]).is_err());
    }

    #[test]
    fn strat_drift_plus_correction_is_ito_drift_at_plus() {
        let strat = white_model(Regime::StratonovichWhite, 1.0, 1.0);
        let psi = StateVector::uniform(2).unwrap();
        let s = models::strat_rhs(&strat, &psi).unwrap();
        let cor = correction(&strat, &psi).unwrap();
        let i = models::ito_rhs(&strat.with_regime(Regime::ItoWhite), &psi).unwrap();
        let sum: Vec<C64> = s.drift.iter().zip(&cor).map(|(a, b)| a + b).collect();
        assert!(dist(&sum, &i.drift) < 1e-15);
        assert_eq!(s.diffusions, i.diffusions);
    }

    #[test]
    fn integrate_zero_horizon() {
        let model = white_model(Regime::ItoWhite, 1.0, 1.0);
        let psi = StateVector::uniform(2).unwrap();
        let traj = integrate(
            &model,
            &psi,
            &IntegrationConfig::new(0.1, 0.0, vec![0.0]),
            3.into(),
        )
        .unwrap();
        assert_eq!(traj.times, vec![0.0]);
        assert_eq!(traj.states, vec![psi]);
    }

    #[test]
    fn integrate_unitary_global_second_order() {
        let h = HermitianOperator::new(crate::hilbert::CMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => c(0.3, 0.0),
            (1, 1) => c(-0.5, 0.0),
            (0, 1) => c(0.4, -0.2),
            _ => c(0.4, 0.2),
        }))
        .unwrap();
        let model = ModelSpec::new(
            h.clone(),
            vec![
                NoiseChannel::colored(HermitianOperator::pauli_z(), NoiseKind::Ou, 1.0, 0.0, 0.0)
                    .unwrap(),
            ],
            Regime::Colored,
        )
        .unwrap();
        let psi = StateVector::normalized(vec![c(0.6, 0.2), c(-0.1, 0.7)]).unwrap();
        let exact = expm_minus_i(&h, 1.0, psi.amplitudes());
        let err = |dt: f64| {
            let mut cfg = IntegrationConfig::new(dt, 1.0, vec![1.0]);
            cfg.renormalize = false;
            let traj = integrate(&model, &psi, &cfg, 1.into()).unwrap();
            dist(traj.states[0].amplitudes(), &exact)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(
            ((e1 / e2).log2() - 2.0).abs() < 0.15,
            "order {}",
            (e1 / e2).log2()
        );
    }

    #[test]
    fn integrate_is_deterministic() {
        let model = colored_model(HermitianOperator::pauli_x(), NoiseKind::Sbm, 0.05, 1.0, 3.0);
        let psi = StateVector::uniform(2).unwrap();
        let mut cfg = IntegrationConfig::new(0.001, 0.2, vec![0.0, 0.1, 0.2]);
        cfg.record_norm_drift = true;
        let a = integrate(&model, &psi, &cfg, TrajectorySeed::new(4, 17)).unwrap();
        let b = integrate(&model, &psi, &cfg, TrajectorySeed::new(4, 17)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.step_norms2.len(), 200);
        assert!(a.final_noise[0].abs() <= 1.0);
        for s in &a.states {
            assert!((norm_sqr(s.amplitudes()) - 1.0).abs() < 1e-14);
        }
        let other = integrate(&model, &psi, &cfg, TrajectorySeed::new(4, 18)).unwrap();
        assert_ne!(a.states[2], other.states[2]);
    }

    #[test]
    fn integrate_rejects_invalid_models() {
        let model = ModelSpec::new(
            HermitianOperator::zero(2).unwrap(),
            vec![
                NoiseChannel::white(HermitianOperator::pauli_z(), 1.0, 1.0),
                NoiseChannel::white(HermitianOperator::pauli_x(), 1.0, 1.0),
            ],
            Regime::ItoWhite,
        )
        .unwrap();
        let cfg = IntegrationConfig::new(0.01, 0.1, vec![0.1]);
        assert!(matches!(
            integrate(&model, &StateVector::uniform(2).unwrap(), &cfg, 0.into()),
            Err(Error::InvalidModel(_))
        ));
        let colored = colored_model(
            HermitianOperator::zero(2).unwrap(),
            NoiseKind::Ou,
            0.05,
            1.0,
            1.0,
        );
        assert!(matches!(
            integrate(&colored, &StateVector::uniform(2).unwrap(), &cfg, 0.into()),
            Err(Error::StepTooLarge { .. })
        ));
    }
}
