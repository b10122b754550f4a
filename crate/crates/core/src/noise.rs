//! Driving noise processes: Ornstein-Uhlenbeck, spherical Brownian motion
//! and white-noise increments, together with the exact facts about their
//! stationary laws that the effective couplings are built from.
//!
//! Both colored processes solve `dxi = -xi dt/tau + g(xi) dW/sqrt(tau)`,
//! with `g = sqrt(2)` for OU (standard normal stationary law) and
//! `g = sqrt(1 - xi^2)` for SBM (uniform stationary law on `[-1, 1]`).

use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Ornstein-Uhlenbeck
    Ou,
    /// Spherical Brownian motion on `[-1, 1]`
    Sbm,
    White,
}

impl NoiseKind {
    pub fn is_colored(self) -> bool {
        !matches!(self, NoiseKind::White)
    }
}

/// Ratio of SBM step size to correlation time above which the
/// Euler-Maruyama update is refused.
pub const SBM_MAX_STEP_RATIO: f64 = 0.1;

/// Deterministic pseudo-random stream.
///
/// Streams are derived from `(master seed, trajectory, channel)` so every
/// trajectory owns its own sequence no matter which thread runs it.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn derive(master_seed: u64, trajectory: u64, channel: u64) -> Self {
        let mut key = [0u8; 32];
        let mut s = master_seed;
        let mut t = trajectory ^ 0xD1B5_4A32_D192_ED03;
        for chunk in key.chunks_exact_mut(8) {
            let word = splitmix64(&mut s) ^ splitmix64(&mut t).rotate_left(29);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(channel);
        Self(rng)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    /// Uniform sample in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        // 53 random mantissa bits
        let u = (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * u
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidParameter { name, value });
    }
    Ok(())
}

/// Exact OU transition over `dt`: mean `xi e^{-dt/tau}`, variance
/// `1 - e^{-2 dt/tau}`.
pub fn ou_step(xi: f64, dt: f64, tau: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("dt", dt)?;
    check_positive("tau", tau)?;
    let decay = (-dt / tau).exp();
    let spread = (-(-2.0 * dt / tau).exp_m1()).sqrt();
    Ok(xi * decay + spread * rng.standard_normal())
}

/// Euler-Maruyama SBM step followed by reflection into `[-1, 1]`.
pub fn sbm_step(xi: f64, dt: f64, tau: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("dt", dt)?;
    check_positive("tau", tau)?;
    if !(xi.abs() <= 1.0) {
        return Err(Error::NoiseOutOfRange(xi));
    }
    let limit = SBM_MAX_STEP_RATIO * tau;
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit });
    }
    let h = dt / tau;
    let diffusion = (1.0 - xi * xi).max(0.0).sqrt();
    let next = xi - xi * h + diffusion * h.sqrt() * rng.standard_normal();
    Ok(reflect_unit(next))
}

fn reflect_unit(mut x: f64) -> f64 {
    while x.abs() > 1.0 {
        x = 2.0 * x.signum() - x;
    }
    x
}

/// Sample of `N(0, dt)`.
pub fn white_increment(dt: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("dt", dt)?;
    Ok(dt.sqrt() * rng.standard_normal())
}

/// Draw from the stationary law: `N(0,1)` for OU, uniform on `[-1,1]` for SBM.
pub fn sample_stationary(kind: NoiseKind, rng: &mut RngStream) -> Result<f64> {
    match kind {
        NoiseKind::Ou => Ok(rng.standard_normal()),
        NoiseKind::Sbm => Ok(rng.uniform(-1.0, 1.0)),
        NoiseKind::White => Err(Error::UnsupportedNoiseKind(kind)),
    }
}

/// One step of the colored process of the given kind.
pub fn colored_step(
    kind: NoiseKind,
    xi: f64,
    dt: f64,
    tau: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    match kind {
        NoiseKind::Ou => ou_step(xi, dt, tau, rng),
        NoiseKind::Sbm => sbm_step(xi, dt, tau, rng),
        NoiseKind::White => Err(Error::UnsupportedNoiseKind(kind)),
    }
}

/// `E_inf[xi^2]` under the stationary law.
pub fn stationary_second_moment(kind: NoiseKind) -> Result<f64> {
    let m = stationary_moment(kind, 2)?;
    Ok(*m.numer() as f64 / *m.denom() as f64)
}

/// Exact `E_inf[xi^n]`: `(n-1)!!` for OU, `1/(n+1)` for SBM (even `n`);
/// zero for odd `n`.
pub fn stationary_moment(kind: NoiseKind, n: usize) -> Result<Ratio<i64>> {
    if n > 2 * MAX_GENERATOR_DEGREE {
        return Err(Error::DegreeTooHigh(n));
    }
    if n % 2 == 1 {
        return Ok(Ratio::zero());
    }
    match kind {
        NoiseKind::Ou => Ok(Ratio::from_integer(
            (1..n as i64).step_by(2).product::<i64>(),
        )),
        NoiseKind::Sbm => Ok(Ratio::new(1, n as i64 + 1)),
        NoiseKind::White => Err(Error::UnsupportedNoiseKind(kind)),
    }
}

pub const MAX_GENERATOR_DEGREE: usize = 8;

/// Polynomial in `xi` with exact rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<Ratio<i64>>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Ratio<i64>>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn from_integers(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Ratio::from_integer(c)).collect())
    }

    pub fn monomial(n: usize) -> Self {
        let mut coeffs = vec![Ratio::zero(); n + 1];
        coeffs[n] = Ratio::one();
        Self::new(coeffs)
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[Ratio<i64>] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| {
            acc * x + *c.numer() as f64 / *c.denom() as f64
        })
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * Ratio::from_integer(k as i64))
                .collect(),
        )
    }

    fn combine(&self, other: &Self, sign: i64) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..len)
                .map(|k| {
                    let a = self.coeffs.get(k).copied().unwrap_or_else(Ratio::zero);
                    let b = other.coeffs.get(k).copied().unwrap_or_else(Ratio::zero);
                    a + b * Ratio::from_integer(sign)
                })
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::new(Vec::new());
        }
        let mut coeffs = vec![Ratio::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self::new(coeffs)
    }
}

impl core::ops::Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, 1)
    }
}

impl core::ops::Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, -1)
    }
}

/// Backward generator (in units of `1/tau`) applied to a polynomial:
/// `-xi p'(xi) + g(xi)^2/2 p''(xi)`.
pub fn apply_generator(kind: NoiseKind, poly: &Polynomial) -> Result<Polynomial> {
    if poly.degree() > MAX_GENERATOR_DEGREE {
        return Err(Error::DegreeTooHigh(poly.degree()));
    }
    let half_g2 = match kind {
        NoiseKind::Ou => Polynomial::from_integers(&[1]),
        NoiseKind::Sbm => Polynomial::new(vec![Ratio::new(1, 2), Ratio::zero(), Ratio::new(-1, 2)]),
        NoiseKind::White => return Err(Error::UnsupportedNoiseKind(kind)),
    };
    let d1 = poly.derivative();
    let d2 = d1.derivative();
    let drift = Polynomial::monomial(1).mul(&d1);
    Ok(&half_g2.mul(&d2) - &drift)
}

/// Exact `E_inf[p(xi)]`.
pub fn stationary_expectation(kind: NoiseKind, poly: &Polynomial) -> Result<Ratio<i64>> {
    poly.coeffs()
        .iter()
        .enumerate()
        .try_fold(Ratio::zero(), |acc, (n, c)| {
            Ok(acc + c * stationary_moment(kind, n)?)
        })
}

/// Generates a sampled path of `steps + 1` noise values (stationary start).
pub fn sample_path(
    kind: NoiseKind,
    tau: f64,
    dt: f64,
    steps: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let mut xi = sample_stationary(kind, rng)?;
    let mut path = Vec::with_capacity(steps + 1);
    path.push(xi);
    for _ in 0..steps {
        xi = colored_step(kind, xi, dt, tau, rng)?;
        path.push(xi);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Ratio<i64> {
        Ratio::new(n, d)
    }

    #[test]
    fn ou_zero_step_limit_is_identity() {
        let mut rng = RngStream::new(7);
        let xi = ou_step(0.8, 1e-14, 1.0, &mut rng).unwrap();
        assert!((xi - 0.8).abs() < 1e-6);
    }

    #[test]
    fn invalid_steps_are_rejected() {
        let mut rng = RngStream::new(1);
        assert!(ou_step(0.0, 0.0, 1.0, &mut rng).is_err());
        assert!(ou_step(0.0, 0.1, -1.0, &mut rng).is_err());
        assert!(white_increment(-1.0, &mut rng).is_err());
        assert!(matches!(
            sbm_step(1.5, 0.01, 1.0, &mut rng),
            Err(Error::NoiseOutOfRange(_))
        ));
        assert!(matches!(
            sbm_step(0.0, 0.2, 1.0, &mut rng),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn sbm_boundary_moves_inward() {
        let mut rng = RngStream::new(3);
        for _ in 0..100 {
            assert!(sbm_step(1.0, 0.05, 1.0, &mut rng).unwrap() < 1.0);
            assert!(sbm_step(-1.0, 0.05, 1.0, &mut rng).unwrap() > -1.0);
        }
    }

    #[test]
    fn reflection_stays_inside() {
        assert_eq!(reflect_unit(1.25), 0.75);
        assert_eq!(reflect_unit(-1.5), -0.5);
        assert!(reflect_unit(3.7).abs() <= 1.0);
    }

    #[test]
    fn stationary_moments() {
        assert_eq!(stationary_second_moment(NoiseKind::Ou).unwrap(), 1.0);
        assert!((stationary_second_moment(NoiseKind::Sbm).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!(stationary_second_moment(NoiseKind::White).is_err());
        assert_eq!(stationary_moment(NoiseKind::Ou, 4).unwrap(), r(3, 1));
        assert_eq!(stationary_moment(NoiseKind::Ou, 6).unwrap(), r(15, 1));
        assert_eq!(stationary_moment(NoiseKind::Sbm, 4).unwrap(), r(1, 5));
        assert_eq!(stationary_moment(NoiseKind::Sbm, 3).unwrap(), r(0, 1));
    }

    #[test]
    fn generator_examples() {
        let xi = Polynomial::monomial(1);
        let minus_xi = Polynomial::from_integers(&[0, -1]);
        assert_eq!(apply_generator(NoiseKind::Ou, &xi).unwrap(), minus_xi);
        assert_eq!(apply_generator(NoiseKind::Sbm, &xi).unwrap(), minus_xi);

        let xi2 = Polynomial::monomial(2);
        assert_eq!(
            apply_generator(NoiseKind::Ou, &xi2).unwrap(),
            Polynomial::from_integers(&[2, 0, -2])
        );
        assert_eq!(
            apply_generator(NoiseKind::Sbm, &xi2).unwrap(),
            Polynomial::from_integers(&[1, 0, -3])
        );
        assert!(apply_generator(NoiseKind::White, &xi2).is_err());
        assert!(apply_generator(NoiseKind::Ou, &Polynomial::monomial(9)).is_err());
    }

    #[test]
    fn generator_annihilates_stationary_law() {
        for kind in [NoiseKind::Ou, NoiseKind::Sbm] {
            for n in 0..=MAX_GENERATOR_DEGREE {
                let image = apply_generator(kind, &Polynomial::monomial(n)).unwrap();
                assert_eq!(
                    stationary_expectation(kind, &image).unwrap(),
                    Ratio::zero(),
                    "{kind:?} n={n}"
                );
            }
        }
    }

    #[test]
    fn polynomial_eval_and_derivative() {
        let p = Polynomial::new(vec![r(1, 2), r(-3, 1), r(0, 1), r(2, 1)]);
        assert_eq!(p.degree(), 3);
        assert!((p.eval(1.5) - (0.5 - 4.5 + 2.0 * 3.375)).abs() < 1e-14);
        assert_eq!(
            p.derivative(),
            Polynomial::new(vec![r(-3, 1), r(0, 1), r(6, 1)])
        );
    }

    #[test]
    fn ou_two_half_steps_match_one_full_step() {
        // Composition of exact transitions: analytic mean and variance.
        let (xi, dt, tau): (f64, f64, f64) = (0.7, 0.3, 0.5);
        let full_mean = xi * (-dt / tau).exp();
        let full_var = 1.0 - (-2.0 * dt / tau).exp();
        let a = (-dt / (2.0 * tau)).exp();
        let half_var = 1.0 - (-dt / tau).exp();
        let two_mean = xi * a * a;
        let two_var = half_var * a * a + half_var;
        assert!((full_mean - two_mean).abs() < 1e-12);
        assert!((full_var - two_var).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_path() {
        let mut a = RngStream::derive(42, 3, 1);
        let mut b = RngStream::derive(42, 3, 1);
        let pa = sample_path(NoiseKind::Sbm, 1.0, 0.05, 1000, &mut a).unwrap();
        let pb = sample_path(NoiseKind::Sbm, 1.0, 0.05, 1000, &mut b).unwrap();
        assert_eq!(pa, pb);
        let mut c = RngStream::derive(42, 3, 2);
        let pc = sample_path(NoiseKind::Sbm, 1.0, 0.05, 1000, &mut c).unwrap();
        assert_ne!(pa, pc);
        let mut d = RngStream::derive(42, 4, 1);
        assert_ne!(
            pa[1..],
            sample_path(NoiseKind::Sbm, 1.0, 0.05, 1000, &mut d).unwrap()[1..]
        );
    }
}
