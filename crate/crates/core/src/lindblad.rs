//! GKSL master equation with Hermitian jump operators, integrated with
//! fixed-step RK4, plus the closed-form qubit dephasing solution.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hilbert::{eigenvalues, CMatrix, DensityMatrix, HermitianOperator, C64};
use crate::models::ModelSpec;
use crate::sde::schedule;
#[allow(unused_imports)]
use num_traits::Float;

const TRACE_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GkslSpec {
    pub hamiltonian: HermitianOperator,
    /// `(O_k, gamma_k)`
    pub terms: Vec<(HermitianOperator, f64)>,
}

impl GkslSpec {
    pub fn new(
        hamiltonian: HermitianOperator,
        terms: Vec<(HermitianOperator, f64)>,
    ) -> Result<Self> {
        for (op, gamma) in &terms {
            if op.dim() != hamiltonian.dim() {
                return Err(Error::DimensionMismatch {
                    expected: hamiltonian.dim(),
                    found: op.dim(),
                });
            }
            if !(*gamma >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "gamma",
                    value: *gamma,
                });
            }
        }
        Ok(Self { hamiltonian, terms })
    }

    /// The master equation unraveled by the model's Ito limit: one term
    /// per channel with `gamma_k = sqrt(D_k)`.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        Self::new(
            model.hamiltonian.clone(),
            model
                .channels
                .iter()
                .map(|ch| (ch.operator.clone(), ch.gamma))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
}

/// `-i[H, rho] + sum_k gamma_k^2 (O_k rho O_k - 1/2 {O_k^2, rho})`
pub fn gksl_rhs(spec: &GkslSpec, rho: &CMatrix) -> Result<CMatrix> {
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: rho.dim(),
        });
    }
    let mut out = spec
        .hamiltonian
        .matrix()
        .commutator(rho)
        .scale(C64::new(0.0, -1.0));
    for (op, gamma) in &spec.terms {
        let o = op.matrix();
        let o2 = o * o;
        let sandwich = &(o * rho) * o;
        let anti = o2.anticommutator(rho).scale(C64::new(0.5, 0.0));
        out = &out + &(&sandwich - &anti).scale(C64::new(gamma * gamma, 0.0));
    }
    Ok(out)
}

fn rk4_step(spec: &GkslSpec, rho: &CMatrix, h: f64) -> Result<CMatrix> {
    let half = C64::new(0.5 * h, 0.0);
    let k1 = gksl_rhs(spec, rho)?;
    let k2 = gksl_rhs(spec, &(rho + &k1.scale(half)))?;
    let k3 = gksl_rhs(spec, &(rho + &k2.scale(half)))?;
    let k4 = gksl_rhs(spec, &(rho + &k3.scale(C64::new(h, 0.0))))?;
    let sum = &(&k1 + &k2.scale(C64::new(2.0, 0.0))) + &(&k3.scale(C64::new(2.0, 0.0)) + &k4);
    Ok(rho + &sum.scale(C64::new(h / 6.0, 0.0)))
}

fn check_physical(rho: &CMatrix, time: f64) -> Result<()> {
    let tr = rho.trace();
    let trace_err = (tr - C64::new(1.0, 0.0)).norm();
    if !(trace_err <= TRACE_TOL) {
        return Err(Error::ToleranceBreach {
            what: "trace",
            value: trace_err,
            time,
        });
    }
    let herm = rho.hermiticity_residual();
    if !(herm <= HERMITIAN_TOL) {
        return Err(Error::ToleranceBreach {
            what: "Hermiticity",
            value: herm,
            time,
        });
    }
    let lowest = eigenvalues(rho)[0];
    if lowest < -POSITIVITY_TOL {
        return Err(Error::ToleranceBreach {
            what: "positivity",
            value: lowest,
            time,
        });
    }
    Ok(())
}

/// RK4 solution sampled at `sample_times` (sorted, within `[0, t_end]`).
/// Each sample is checked for trace, Hermiticity and positivity; a breach
/// aborts the run.
pub fn integrate_master(
    spec: &GkslSpec,
    rho0: &DensityMatrix,
    dt: f64,
    t_end: f64,
    sample_times: &[f64],
) -> Result<Vec<DensityMatrix>> {
    if rho0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: rho0.dim(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
        });
    }
    let sorted = sample_times.windows(2).all(|w| w[0] <= w[1]);
    if !sorted || sample_times.iter().any(|&t| !(0.0..=t_end).contains(&t)) {
        return Err(Error::InvalidSampleTimes);
    }
    let mut rho = rho0.matrix().clone();
    let mut out = Vec::with_capacity(sample_times.len());
    for leg in schedule(dt, t_end, sample_times) {
        for _ in 0..leg.steps {
            rho = rk4_step(spec, &rho, leg.h)?;
        }
        if leg.record {
            check_physical(&rho, leg.time)?;
            out.push(DensityMatrix::with_tolerance(
                rho.clone(),
                TRACE_TOL.max(POSITIVITY_TOL),
            )?);
        }
    }
    Ok(out)
}

/// Exact solution for `H = 0`, `O = sigma_z` on a qubit: populations fixed,
/// coherences multiplied by `exp(-2 gamma^2 t)`.
pub fn analytic_dephasing(rho0: &DensityMatrix, gamma: f64, t: f64) -> Result<DensityMatrix> {
    if rho0.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho0.dim(),
        });
    }
    let decay = (-2.0 * gamma * gamma * t).exp();
    let m = rho0.matrix();
    let out = CMatrix::from_fn(2, |i, j| if i == j { m[(i, j)] } else { m[(i, j)] * decay });
    Ok(DensityMatrix::with_tolerance(out, POSITIVITY_TOL)?)
}
