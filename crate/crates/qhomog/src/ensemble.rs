//! Monte Carlo ensembles of trajectories and their comparison with master
//! equation references.
//!
//! Trajectory `i` always draws from the streams keyed by `(seed, i, k)`, and
//! partial sums are combined pairwise in index order, so results do not
//! depend on how rayon schedules the work.

use qhomog_core::hilbert::{self, CMatrix, DensityMatrix, HermitianOperator, StateVector, C64};
use qhomog_core::homogenize::fd_check;
use qhomog_core::lindblad::{integrate_master, GkslSpec};
use qhomog_core::models::{ModelSpec, Regime};
use qhomog_core::sde::{integrate, IntegrationConfig, TrajectorySeed};
use qhomog_core::Error as CoreError;
use rayon::prelude::*;

pub const DEFAULT_BATCHES: usize = 20;

/// Master-equation step used for references.
pub const MASTER_DT: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("trajectory {index}: {source}")]
    Trajectory { index: usize, source: CoreError },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("need at least {needed} trajectories, got {got}")]
    TooFewTrajectories { needed: usize, got: usize },
    #[error("observable `{name}` has dimension {found}, model has {expected}")]
    ObservableDimension {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("sample times differ between the two ensembles")]
    TimesMismatch,
    #[error("{0}")]
    NotPaired(String),
}

pub type Result<T, E = EnsembleError> = std::result::Result<T, E>;

#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    pub operator: HermitianOperator,
}

impl Observable {
    pub fn new(name: impl Into<String>, operator: HermitianOperator) -> Self {
        Self {
            name: name.into(),
            operator,
        }
    }

    /// `Re rho_ij` as the expectation of `(|i><j| + |j><i|) / 2`.
    pub fn re_rho(dim: usize, i: usize, j: usize) -> Result<Self> {
        let m = element_operator(dim, i, j, C64::new(0.5, 0.0), C64::new(0.5, 0.0))?;
        Ok(Self::new(format!("re_rho_{i}{j}"), m))
    }

    /// `Im rho_ij` as the expectation of `(i|i><j| - i|j><i|) / 2`.
    pub fn im_rho(dim: usize, i: usize, j: usize) -> Result<Self> {
        let m = element_operator(dim, i, j, C64::new(0.0, 0.5), C64::new(0.0, -0.5))?;
        Ok(Self::new(format!("im_rho_{i}{j}"), m))
    }
}

fn element_operator(
    dim: usize,
    i: usize,
    j: usize,
    at_ij: C64,
    at_ji: C64,
) -> Result<HermitianOperator> {
    if i >= dim || j >= dim {
        return Err(CoreError::DimensionMismatch {
            expected: dim,
            found: i.max(j) + 1,
        }
        .into());
    }
    let mut m = CMatrix::zeros(dim);
    if i == j {
        m[(i, i)] = C64::new(at_ij.re + at_ji.re, 0.0);
    } else {
        m[(i, j)] = at_ij;
        m[(j, i)] = at_ji;
    }
    Ok(HermitianOperator::new(m)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub name: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `[batch][time]`
    pub batch_means: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub initial: DensityMatrix,
    /// Mean of `|psi><psi|` at each sample time.
    pub mean_rho: Vec<CMatrix>,
    /// `[batch][time]`
    pub batch_rho: Vec<Vec<CMatrix>>,
    pub observables: Vec<ObservableSeries>,
    /// Pre-normalization squared norm: mean, sample variance and standard
    /// error at each sample time.
    pub norm2_mean: Vec<f64>,
    pub norm2_variance: Vec<f64>,
    pub norm2_stderr: Vec<f64>,
    pub trajectories: usize,
    pub master_seed: u64,
}

impl EnsembleResult {
    pub fn batches(&self) -> usize {
        self.batch_rho.len()
    }

    pub fn observable(&self, name: &str) -> Option<&ObservableSeries> {
        self.observables.iter().find(|o| o.name == name)
    }

    pub fn mean_density(&self, k: usize) -> Result<DensityMatrix> {
        Ok(DensityMatrix::with_tolerance(
            self.mean_rho[k].clone(),
            1e-8,
        )?)
    }
}

/// Per-trajectory values at the sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub rho: Vec<CMatrix>,
    pub observables: Vec<Vec<f64>>,
    pub norm2: Vec<f64>,
}

/// Unnormalized outer products and linear expectations, so the means stay
/// consistent with each other when renormalization is off.
pub fn summarize(
    states: &[StateVector],
    norms2: &[f64],
    observables: &[Observable],
) -> TrajectorySummary {
    let rho: Vec<CMatrix> = states
        .iter()
        .map(|s| CMatrix::outer(s.amplitudes()))
        .collect();
    let observables = observables
        .iter()
        .map(|o| {
            states
                .iter()
                .map(|s| s.inner(&o.operator.apply(s.amplitudes())).re)
                .collect()
        })
        .collect();
    TrajectorySummary {
        rho,
        observables,
        norm2: norms2.to_vec(),
    }
}

/// Contiguous index ranges of near-equal size.
pub fn batch_ranges(m: usize, batches: usize) -> Vec<std::ops::Range<usize>> {
    let b = batches.clamp(1, m.max(1));
    (0..b).map(|k| (k * m / b)..((k + 1) * m / b)).collect()
}

fn pairwise<T: Clone>(items: &[T], add: &impl Fn(&T, &T) -> T) -> T {
    match items.len() {
        0 => panic!("pairwise sum of nothing"),
        1 => items[0].clone(),
        n => {
            let (l, r) = items.split_at(n / 2);
            add(&pairwise(l, add), &pairwise(r, add))
        }
    }
}

fn add_vec(a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn add_mats(a: &Vec<CMatrix>, b: &Vec<CMatrix>) -> Vec<CMatrix> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Sums of a batch, in trajectory order.
#[derive(Debug, Clone)]
struct BatchSums {
    count: usize,
    rho: Vec<CMatrix>,
    observables: Vec<Vec<f64>>,
    norm2: Vec<f64>,
    norm2_sq: Vec<f64>,
}

impl BatchSums {
    fn from_summaries(items: &[TrajectorySummary]) -> Self {
        let rho = pairwise(
            &items.iter().map(|s| s.rho.clone()).collect::<Vec<_>>(),
            &add_mats,
        );
        let n_obs = items[0].observables.len();
        let observables = (0..n_obs)
            .map(|o| {
                pairwise(
                    &items
                        .iter()
                        .map(|s| s.observables[o].clone())
                        .collect::<Vec<_>>(),
                    &add_vec,
                )
            })
            .collect();
        let norm2 = pairwise(
            &items.iter().map(|s| s.norm2.clone()).collect::<Vec<_>>(),
            &add_vec,
        );
        let sq: Vec<Vec<f64>> = items
            .iter()
            .map(|s| s.norm2.iter().map(|x| x * x).collect())
            .collect();
        BatchSums {
            count: items.len(),
            rho,
            observables,
            norm2,
            norm2_sq: pairwise(&sq, &add_vec),
        }
    }
}

fn stderr_of(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Combines per-trajectory summaries (in trajectory order, grouped by
/// batch) into an ensemble result.
pub fn aggregate(
    times: Vec<f64>,
    initial: DensityMatrix,
    observables: &[Observable],
    batches: &[Vec<TrajectorySummary>],
    master_seed: u64,
) -> EnsembleResult {
    let sums: Vec<BatchSums> = batches
        .iter()
        .map(|b| BatchSums::from_summaries(b))
        .collect();
    let m: usize = sums.iter().map(|s| s.count).sum();
    let mf = m as f64;
    let nt = times.len();

    let total_rho = pairwise(
        &sums.iter().map(|s| s.rho.clone()).collect::<Vec<_>>(),
        &add_mats,
    );
    let inv = C64::new(1.0 / mf, 0.0);
    let mean_rho = total_rho.iter().map(|r| r.scale(inv)).collect();
    let batch_rho = sums
        .iter()
        .map(|s| {
            s.rho
                .iter()
                .map(|r| r.scale(C64::new(1.0 / s.count as f64, 0.0)))
                .collect()
        })
        .collect();

    let series = observables
        .iter()
        .enumerate()
        .map(|(o, obs)| {
            let total = pairwise(
                &sums
                    .iter()
                    .map(|s| s.observables[o].clone())
                    .collect::<Vec<_>>(),
                &add_vec,
            );
            let batch_means: Vec<Vec<f64>> = sums
                .iter()
                .map(|s| {
                    s.observables[o]
                        .iter()
                        .map(|v| v / s.count as f64)
                        .collect()
                })
                .collect();
            let stderr = (0..nt)
                .map(|t| stderr_of(&batch_means.iter().map(|b| b[t]).collect::<Vec<_>>()))
                .collect();
            ObservableSeries {
                name: obs.name.clone(),
                mean: total.iter().map(|v| v / mf).collect(),
                stderr,
                batch_means,
            }
        })
        .collect();

    let n_total = pairwise(
        &sums.iter().map(|s| s.norm2.clone()).collect::<Vec<_>>(),
        &add_vec,
    );
    let sq_total = pairwise(
        &sums.iter().map(|s| s.norm2_sq.clone()).collect::<Vec<_>>(),
        &add_vec,
    );
    let norm2_mean: Vec<f64> = n_total.iter().map(|v| v / mf).collect();
    let norm2_variance = sq_total
        .iter()
        .zip(&norm2_mean)
        .map(|(sq, mean)| {
            if m < 2 {
                0.0
            } else {
                ((sq - mf * mean * mean) / (mf - 1.0)).max(0.0)
            }
        })
        .collect();
    let norm2_stderr = (0..nt)
        .map(|t| {
            stderr_of(
                &sums
                    .iter()
                    .map(|s| s.norm2[t] / s.count as f64)
                    .collect::<Vec<_>>(),
            )
        })
        .collect();

    EnsembleResult {
        times,
        initial,
        mean_rho,
        batch_rho,
        observables: series,
        norm2_mean,
        norm2_variance,
        norm2_stderr,
        trajectories: m,
        master_seed,
    }
}

/// Runs `m` trajectories of `model` from `initial` in `batches` contiguous
/// batches (clamped to `[1, m]`).
pub fn run_batched(
    model: &ModelSpec,
    initial: &StateVector,
    config: &IntegrationConfig,
    observables: &[Observable],
    m: usize,
    master_seed: u64,
    batches: usize,
) -> Result<EnsembleResult> {
    if m < 1 {
        return Err(EnsembleError::TooFewTrajectories { needed: 1, got: m });
    }
    for obs in observables {
        if obs.operator.dim() != model.dim() {
            return Err(EnsembleError::ObservableDimension {
                name: obs.name.clone(),
                expected: model.dim(),
                found: obs.operator.dim(),
            });
        }
    }
    let mut psi0 = initial.clone();
    psi0.normalize();
    let rho0 = hilbert::outer(&psi0);

    let mut grouped = Vec::new();
    let mut times = None;
    for range in batch_ranges(m, batches) {
        let batch: Vec<TrajectorySummary> = range
            .into_par_iter()
            .map(|i| {
                let traj = integrate(
                    model,
                    initial,
                    config,
                    TrajectorySeed::new(master_seed, i as u64),
                )
                .map_err(|source| EnsembleError::Trajectory { index: i, source })?;
                Ok((
                    traj.times.clone(),
                    summarize(&traj.states, &traj.sample_norms2, observables),
                ))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(|(t, s)| {
                times.get_or_insert(t);
                s
            })
            .collect();
        grouped.push(batch);
    }
    Ok(aggregate(
        times.unwrap_or_default(),
        rho0,
        observables,
        &grouped,
        master_seed,
    ))
}

/// [`run_batched`] with the default batch count.
pub fn run(
    model: &ModelSpec,
    initial: &StateVector,
    config: &IntegrationConfig,
    observables: &[Observable],
    m: usize,
    master_seed: u64,
) -> Result<EnsembleResult> {
    run_batched(
        model,
        initial,
        config,
        observables,
        m,
        master_seed,
        DEFAULT_BATCHES,
    )
}

/// Trace distance with a delta-method standard error from batch means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    pub time: f64,
    pub distance: f64,
    pub stderr: f64,
}

fn sign_matrix(diff: &CMatrix) -> CMatrix {
    hilbert::matrix_function(diff, |x| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// `D = tr|X|/2` is linearized as `Re tr(S X)/2` with `S = sign(X)` held
/// fixed, and the spread of that linear functional over paired batches
/// gives the error bar.
fn distance_with_error(
    mean_diff: &CMatrix,
    batch_diffs: &[CMatrix],
    time: f64,
) -> Result<Distance> {
    let distance = hilbert::trace_distance_matrices(mean_diff, &CMatrix::zeros(mean_diff.dim()))?;
    let s = sign_matrix(mean_diff);
    let projected: Vec<f64> = batch_diffs
        .iter()
        .map(|d| 0.5 * (&s * d).trace().re)
        .collect();
    Ok(Distance {
        time,
        distance,
        stderr: stderr_of(&projected),
    })
}

/// Trace distance between the ensemble mean and the master equation
/// solution at every sample time.
pub fn compare_to_master(result: &EnsembleResult, spec: &GkslSpec) -> Result<Vec<Distance>> {
    if spec.dim() != result.initial.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: result.initial.dim(),
            found: spec.dim(),
        }
        .into());
    }
    let t_end = result.times.last().copied().unwrap_or(0.0);
    let dt = if t_end > 0.0 {
        MASTER_DT.min(t_end)
    } else {
        MASTER_DT
    };
    let reference = integrate_master(spec, &result.initial, dt, t_end, &result.times)?;
    distances_to(
        result,
        &reference
            .iter()
            .map(|r| r.matrix().clone())
            .collect::<Vec<_>>(),
    )
}

/// Trace distances to an arbitrary reference sequence at the result's
/// sample times.
pub fn distances_to(result: &EnsembleResult, reference: &[CMatrix]) -> Result<Vec<Distance>> {
    if reference.len() != result.times.len() {
        return Err(EnsembleError::TimesMismatch);
    }
    result
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let diff = &result.mean_rho[k] - &reference[k];
            let batch: Vec<CMatrix> = result
                .batch_rho
                .iter()
                .map(|b| &b[k] - &reference[k])
                .collect();
            distance_with_error(&diff, &batch, t)
        })
        .collect()
}

/// Trace distance between two ensembles run on the same seeds and batch
/// layout; errors use paired batch differences.
pub fn paired_distances(a: &EnsembleResult, b: &EnsembleResult) -> Result<Vec<Distance>> {
    check_paired(a, b)?;
    a.times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let diff = &a.mean_rho[k] - &b.mean_rho[k];
            let batch: Vec<CMatrix> = a
                .batch_rho
                .iter()
                .zip(&b.batch_rho)
                .map(|(x, y)| &x[k] - &y[k])
                .collect();
            distance_with_error(&diff, &batch, t)
        })
        .collect()
}

fn check_paired(a: &EnsembleResult, b: &EnsembleResult) -> Result<()> {
    if a.times != b.times {
        return Err(EnsembleError::TimesMismatch);
    }
    if a.trajectories != b.trajectories
        || a.master_seed != b.master_seed
        || a.batches() != b.batches()
    {
        return Err(EnsembleError::NotPaired(
            "ensembles use different seeds or batch layouts".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedObservable {
    pub name: String,
    /// Mean of `strat - ito` at each time.
    pub difference: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `difference / stderr`, or 0 where both vanish.
    pub z: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PairedReport {
    pub distances: Vec<Distance>,
    pub observables: Vec<PairedObservable>,
    pub strat: EnsembleResult,
    pub ito: EnsembleResult,
}

impl PairedReport {
    pub fn max_abs_z(&self) -> f64 {
        self.observables
            .iter()
            .flat_map(|o| o.z.iter().map(|z| z.abs()))
            .fold(0.0, f64::max)
    }
}

/// Runs a Stratonovich model and its Ito counterpart on identical
/// per-trajectory seeds.
#[allow(clippy::too_many_arguments)]
pub fn paired_convention_test(
    strat: &ModelSpec,
    ito: &ModelSpec,
    initial: &StateVector,
    config: &IntegrationConfig,
    observables: &[Observable],
    m: usize,
    master_seed: u64,
) -> Result<PairedReport> {
    if strat.regime != Regime::StratonovichWhite {
        return Err(CoreError::RegimeMismatch {
            expected: Regime::StratonovichWhite,
            found: strat.regime,
        }
        .into());
    }
    if ito.regime != Regime::ItoWhite {
        return Err(CoreError::RegimeMismatch {
            expected: Regime::ItoWhite,
            found: ito.regime,
        }
        .into());
    }
    if strat.channels.len() != ito.channels.len() {
        return Err(CoreError::ChannelCountMismatch {
            expected: strat.channels.len(),
            found: ito.channels.len(),
        }
        .into());
    }
    if strat.hamiltonian != ito.hamiltonian {
        return Err(EnsembleError::NotPaired("Hamiltonians differ".into()));
    }
    for (k, (s, i)) in strat.channels.iter().zip(&ito.channels).enumerate() {
        if s.operator != i.operator || s.a != i.a || s.gamma != i.gamma {
            return Err(EnsembleError::NotPaired(format!(
                "channel {k} differs between the two models"
            )));
        }
    }
    if !fd_check(ito) {
        let (k, ch) = ito
            .channels
            .iter()
            .enumerate()
            .find(|(_, ch)| {
                (ch.a - ch.diffusion()).abs()
                    > qhomog_core::homogenize::FD_REL_TOL * ch.a.abs().max(ch.diffusion()).max(1.0)
            })
            .unwrap_or((0, &ito.channels[0]));
        return Err(CoreError::FluctuationDissipation {
            channel: k,
            a: ch.a,
            d: ch.diffusion(),
        }
        .into());
    }

    let s = run(strat, initial, config, observables, m, master_seed)?;
    let i = run(ito, initial, config, observables, m, master_seed)?;
    let distances = paired_distances(&s, &i)?;
    let observables = s
        .observables
        .iter()
        .zip(&i.observables)
        .map(|(a, b)| {
            let nt = a.mean.len();
            let difference: Vec<f64> = (0..nt).map(|t| a.mean[t] - b.mean[t]).collect();
            let stderr: Vec<f64> = (0..nt)
                .map(|t| {
                    let d: Vec<f64> = a
                        .batch_means
                        .iter()
                        .zip(&b.batch_means)
                        .map(|(x, y)| x[t] - y[t])
                        .collect();
                    stderr_of(&d)
                })
                .collect();
            let z = difference
                .iter()
                .zip(&stderr)
                .map(|(d, se)| {
                    if *se > 0.0 {
                        d / se
                    } else if *d == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY.copysign(*d)
                    }
                })
                .collect();
            PairedObservable {
                name: a.name.clone(),
                difference,
                stderr,
                z,
            }
        })
        .collect();
    Ok(PairedReport {
        distances,
        observables,
        strat: s,
        ito: i,
    })
}
