//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_rational::Ratio;
use qhomog::ensemble::{self, Observable};
use qhomog::sweep::{tau_sweep, SweepSettings, SweepTable};
use qhomog_core::analysis::{autocorrelation, fit_decay_time, linear_fit};
use qhomog_core::hilbert::{CMatrix, HermitianOperator, StateVector, C64};
use qhomog_core::homogenize::{correction, coupling_for_diffusion, to_markovian};
use qhomog_core::lindblad::GkslSpec;
use qhomog_core::models::{self, ModelSpec, NoiseChannel, Regime};
use qhomog_core::noise::{
    apply_generator, sample_path, stationary_expectation, NoiseKind, Polynomial, RngStream,
};
use qhomog_core::sde::IntegrationConfig;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn plus() -> StateVector {
    StateVector::uniform(2).unwrap()
}

fn qubit(regime: Regime, gamma: f64) -> ModelSpec {
    ModelSpec::new(
        HermitianOperator::zero(2).unwrap(),
        vec![NoiseChannel::fluctuation_dissipation(
            HermitianOperator::pauli_z(),
            gamma,
        )],
        regime,
    )
    .unwrap()
}

fn ito_vs_gksl() -> Outcome {
    let times = vec![0.1, 0.25, 0.5, 1.0];
    let cfg = IntegrationConfig::new(1e-3, 1.0, times.clone());
    let obs = [Observable::re_rho(2, 0, 1).unwrap()];
    let r = ensemble::run(
        &qubit(Regime::ItoWhite, 1.0),
        &plus(),
        &cfg,
        &obs,
        4000,
        1001,
    )
    .unwrap();
    let series = &r.observables[0];
    let errs: Vec<f64> = times
        .iter()
        .zip(&series.mean)
        .map(|(t, m)| (m - 0.5 * (-2.0 * t).exp()).abs())
        .collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst <= 0.03,
        format!("max |Re rho01 - exp(-2t)/2| = {worst:.4} (<= 0.03), per time {errs:.4?}"),
    )
}

fn colored_template(kind: NoiseKind) -> ModelSpec {
    let tau = 0.2;
    let b = coupling_for_diffusion(kind, 1.0, tau).unwrap();
    ModelSpec::new(
        HermitianOperator::zero(2).unwrap(),
        vec![NoiseChannel::colored(HermitianOperator::pauli_z(), kind, tau, 1.0, b).unwrap()],
        Regime::Colored,
    )
    .unwrap()
}

fn sweep(kind: NoiseKind, seed: u64) -> SweepTable {
    let template = colored_template(kind);
    let reference = GkslSpec::from_model(&template).unwrap();
    let settings = SweepSettings::new(vec![0.5], 4000, seed);
    tau_sweep(
        &template,
        &[0.2, 0.1, 0.05],
        &reference,
        &plus(),
        &settings,
        &[],
    )
    .unwrap()
}

fn monotone_within_errors(table: &SweepTable) -> (bool, String) {
    let rows = table.at_time(0.5);
    let mut ok = true;
    let mut parts = Vec::new();
    for w in rows.windows(2) {
        let slack = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        ok &= w[1].distance <= w[0].distance + slack;
    }
    for r in &rows {
        parts.push(format!(
            "tau={} D={:.4}+-{:.4} B={:.4} gamma_eff={:.12}",
            r.tau, r.distance, r.stderr, r.b, r.gamma_eff
        ));
    }
    (ok, parts.join("; "))
}

fn homogenization(kind: NoiseKind, bound: f64, seed: u64) -> Outcome {
    let table = sweep(kind, seed);
    let (monotone, rows) = monotone_within_errors(&table);
    let last = table.at_time(0.5).last().unwrap().distance;
    let order = table.fit.as_ref().map(|f| f.fit.slope).unwrap_or(f64::NAN);
    outcome(
        monotone && last <= bound,
        format!("non-increasing within 2 combined SE: {monotone}; distance at tau=0.05: {last:.4} (<= {bound}); fitted order {order:.2} (reported only); {rows}"),
    )
}

fn strat_ito_pair() -> Outcome {
    let strat = qubit(Regime::StratonovichWhite, 1.0);
    let ito = to_markovian(&strat, Regime::ItoWhite).unwrap();
    let cfg = IntegrationConfig::new(1e-3, 0.5, vec![0.1, 0.25, 0.5]);
    let obs = [
        Observable::new("sx", HermitianOperator::pauli_x()),
        Observable::new("sz", HermitianOperator::pauli_z()),
    ];
    let rep =
        ensemble::paired_convention_test(&strat, &ito, &plus(), &cfg, &obs, 4000, 1004).unwrap();
    let d = rep.distances.last().unwrap().distance;
    let z = rep.max_abs_z();
    outcome(
        d <= 0.02 && z <= 3.0,
        format!("trace distance at t=0.5: {d:.2e} (<= 0.02); max |z| = {z:.2} (<= 3)"),
    )
}

/// Random Hermitian matrices commuting by construction: `U diag U^dagger`
/// with one random unitary per model.
fn random_case(rng: &mut RngStream) -> (ModelSpec, StateVector) {
    let n = 2 + (rng.uniform(0.0, 7.0) as usize).min(6);
    let k = 1 + (rng.uniform(0.0, 3.0) as usize).min(2);
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for j in 0..n {
        let mut v: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
            .collect();
        v[j] += C64::new(2.0, 0.0);
        for u in &cols {
            let p: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= p * ui;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|x| x / norm).collect());
    }
    let u = CMatrix::from_fn(n, |i, j| cols[j][i]);
    let half = C64::new(0.5, 0.0);
    let channels = (0..k)
        .map(|_| {
            let diag: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let o = &(&u * &CMatrix::from_real_diagonal(&diag)) * &u.adjoint();
            let o = (&o + &o.adjoint()).scale(half);
            NoiseChannel::fluctuation_dissipation(
                HermitianOperator::new(o).unwrap(),
                rng.uniform(0.0, 2.0),
            )
        })
        .collect();
    let h = CMatrix::from_fn(n, |_, _| {
        C64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
    });
    let h = HermitianOperator::new((&h + &h.adjoint()).scale(half)).unwrap();
    let psi = StateVector::normalized(
        (0..n)
            .map(|_| C64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
            .collect(),
    )
    .unwrap();
    (
        ModelSpec::new(h, channels, Regime::StratonovichWhite).unwrap(),
        psi,
    )
}

fn drift_identity() -> Outcome {
    let mut rng = RngStream::new(1005);
    let (mut worst_drift, mut worst_norm) = (0.0f64, 0.0f64);
    let mut max_n = 0;
    for _ in 0..200 {
        let (strat, psi) = random_case(&mut rng);
        max_n = max_n.max(strat.dim());
        let ito = strat.with_regime(Regime::ItoWhite);
        let s = models::strat_rhs(&strat, &psi).unwrap();
        let i = models::ito_rhs(&ito, &psi).unwrap();
        let c = correction(&strat, &psi).unwrap();
        for ((a, b), d) in s.drift.iter().zip(&c).zip(&i.drift) {
            worst_drift = worst_drift.max((a + b - d).norm());
        }
        worst_norm = worst_norm.max(i.norm_growth_rate(psi.amplitudes()).abs());
    }
    outcome(
        worst_drift <= 1e-12 && worst_norm <= 1e-12,
        format!("200 cases up to N={max_n}: max |strat + correction - ito| = {worst_drift:.2e}, max |2Re<psi|a> + sum|b|^2| = {worst_norm:.2e} (both <= 1e-12)"),
    )
}

fn naive_ito() -> Outcome {
    let times = vec![0.0, 0.005, 0.01, 0.015, 0.02, 0.2];
    let mut cfg = IntegrationConfig::new(1e-3, 0.2, times.clone());
    cfg.renormalize = false;
    let model = qubit(Regime::NaiveItoWhite, 1.0);
    let predicted = models::naive_growth_rate(&model, &plus()).unwrap();
    let r = ensemble::run(&model, &plus(), &cfg, &[], 4000, 1006).unwrap();
    let fit = linear_fit(&times[..5], &r.norm2_mean[..5]).unwrap();
    let rel = (fit.slope - predicted).abs() / predicted;
    let excess = (r.norm2_mean[5] - 1.0) / r.norm2_stderr[5];
    outcome(
        rel <= 0.2 && excess >= 3.0,
        format!("fitted initial rate {:.4} vs <Delta^2> = {predicted} (rel {rel:.3} <= 0.2); mean norm^2 at t=0.2 = {:.4}, {excess:.1} SE above 1 (>= 3)", fit.slope, r.norm2_mean[5]),
    )
}

fn noise_facts() -> Outcome {
    let steps = 1_000_000;
    let mut notes = Vec::new();
    let mut ok = true;

    let mut rng = RngStream::new(1007);
    let ou = sample_path(NoiseKind::Ou, 1.0, 1.0, steps, &mut rng).unwrap();
    let m = ou.iter().sum::<f64>() / steps as f64;
    let var = ou.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / steps as f64;
    ok &= (var - 1.0).abs() <= 0.01;
    notes.push(format!("OU variance {var:.4}"));

    let mut rng = RngStream::new(1008);
    let sbm = sample_path(NoiseKind::Sbm, 1.0, 0.01, steps, &mut rng).unwrap();
    let m2 = sbm.iter().map(|x| x * x).sum::<f64>() / steps as f64;
    let bounded = sbm.iter().all(|x| x.abs() <= 1.0);
    ok &= (m2 - 1.0 / 3.0).abs() <= 0.01 && bounded;
    notes.push(format!("SBM E[xi^2] {m2:.4}, bounded {bounded}"));

    for (kind, seed) in [(NoiseKind::Ou, 1009), (NoiseKind::Sbm, 1010)] {
        let (tau, dt) = (1.0, 0.02);
        let mut rng = RngStream::new(seed);
        let path = sample_path(kind, tau, dt, steps, &mut rng).unwrap();
        let fitted = fit_decay_time(&autocorrelation(&path, dt, 3.0).unwrap(), dt).unwrap();
        ok &= (fitted - tau).abs() <= 0.1 * tau;
        notes.push(format!("{kind:?} decay time {fitted:.3}"));
    }

    for kind in [NoiseKind::Ou, NoiseKind::Sbm] {
        for n in 0..=4 {
            let lp = apply_generator(kind, &Polynomial::monomial(n)).unwrap();
            let e = stationary_expectation(kind, &lp).unwrap();
            ok &= e == Ratio::from_integer(0);
        }
    }
    notes.push("generator nullity exact for n <= 4".into());
    outcome(ok, notes.join("; "))
}

const RUN_CFG: &str = r#"
dimension = 2
regime = "stratonovich_white"
hamiltonian = { named = "pauli_x", scale = 0.5 }
initial_state = "plus"

[[channels]]
operator = "pauli_z"
kind = "ou"
tau = 0.05
gamma = 1.0

[[observables]]
name = "sx"
operator = "pauli_x"

[integration]
dt = 1e-3
t_end = 0.3
sample_times = [0.0, 0.1, 0.2, 0.3]
renormalize = false

[ensemble]
trajectories = 400
master_seed = 1008

[sweep]
taus = [0.1, 0.05]

[compare]
regimes = ["colored", "stratonovich_white", "ito_white", "naive_ito_white"]
"#;

fn reproducibility() -> Outcome {
    let dir = std::env::temp_dir().join(format!("qhomog-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, RUN_CFG).unwrap();
    let exe = env!("CARGO_BIN_EXE_qhomog");
    let invoke = |cmd: &str, out: &Path, workers: &str| {
        Command::new(exe)
            .args([
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--workers",
                workers,
                "--seed",
                "77",
            ])
            .output()
            .unwrap()
    };
    let mut ok = true;
    let mut compared = 0;
    for cmd in ["run", "sweep", "compare"] {
        let a = dir.join(format!("{cmd}-1"));
        let b = dir.join(format!("{cmd}-4"));
        ok &= invoke(cmd, &a, "1").status.success() && invoke(cmd, &b, "4").status.success();
        let mut names: Vec<_> = std::fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names
            .into_iter()
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
        {
            ok &= std::fs::read(a.join(&name)).unwrap() == std::fs::read(b.join(&name)).unwrap();
            compared += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(ok && compared >= 9, format!("{compared} CSV files byte-identical across --workers 1 and 4 for run, sweep and compare"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 Ito unraveling vs GKSL", ito_vs_gksl),
        ("2 OU homogenization limit", || {
            homogenization(NoiseKind::Ou, 0.05, 1002)
        }),
        ("3 SBM homogenization limit", || {
            homogenization(NoiseKind::Sbm, 0.08, 1003)
        }),
        ("4 Stratonovich-Ito equivalence", strat_ito_pair),
        ("5 drift identity", drift_identity),
        ("6 naive Ito inadmissibility", naive_ito),
        ("7 noise facts", noise_facts),
        ("8 reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {name} [{:.1}s]: {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
