//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use qnnent_cli::commands::{
    asymptotic_rms, ladder_runs, sweep_rows, Family, FourierNoiseRequest, SweepRequest, SweepRow,
};
use qnnent_core::trainer::sample_outputs;
use qnnent_core::wide::Wide;
use qnnent_core::{
    adjoint_gradient, default_training_set, entanglement_of_formation, fd_gradient_local, train,
    CMatrix4, DensityMatrix, FitSet, NoiseDistribution, NoiseKind, NoiseSpec,
    ParameterSchedule, PureState, RandomSource, TimeGrid, TrainOutcome, TrainingConfig,
    TrainingSample, C,
};

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, n: usize, title: &str, start: Instant, pass: bool, detail: String) {
        let status = if pass { "PASS" } else { "FAIL" };
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {n:>2} {status}: {title}: {detail} [{:.1}s]",
            start.elapsed().as_secs_f64()
        );
    }
}

fn random_ket(rng: &mut RandomSource) -> PureState<f64> {
    let amps = [(); 4].map(|_| C::new(rng.standard_normal(), rng.standard_normal()));
    PureState::normalized(amps).expect("nonzero ket")
}

fn random_mixed(rng: &mut RandomSource) -> DensityMatrix<f64> {
    let mut a = CMatrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            a[(i, j)] = C::new(rng.standard_normal(), rng.standard_normal());
        }
    }
    let m = a * a.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.scale(1.0 / tr).hermitian_part()).expect("physical")
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for k in i..=j {
                r[idx[k]] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn oracle_exactness(report: &mut Report) {
    let start = Instant::now();
    let ef = |psi: PureState<f64>| entanglement_of_formation(&psi.density_matrix());
    let (bell, flat, c, p) = (
        ef(PureState::bell()),
        ef(PureState::flat()),
        ef(PureState::c_state()),
        ef(PureState::p_state()),
    );
    let pass = (bell - 1.0).abs() <= 1e-10
        && flat.abs() <= 1e-10
        && c.abs() <= 1e-10
        && (p - 0.550).abs() <= 0.005
        && start.elapsed().as_secs_f64() < 1.0;
    report.record(
        1,
        "entanglement oracle",
        start,
        pass,
        format!("Bell {bell:.12}, Flat {flat:.1e}, C {c:.1e}, P {p:.6}"),
    );
}

fn gradient_agreement(report: &mut Report) {
    let start = Instant::now();
    let grid = TimeGrid::<f64>::default();
    let mut rng = RandomSource::from_seed(2024);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for i in 0..20 {
        let (tie_k, tie_eps) = (i % 2 == 0, i % 3 == 0);
        let rows = (0..grid.n_steps)
            .map(|_| {
                let mut r = [
                    rng.uniform(0.0, 0.02),
                    rng.uniform(0.0, 0.02),
                    rng.uniform(-0.01, 0.01),
                    rng.uniform(-0.01, 0.01),
                    rng.uniform(-0.01, 0.01),
                ];
                if tie_k {
                    r[1] = r[0];
                }
                if tie_eps {
                    r[3] = r[2];
                }
                r
            })
            .collect();
        let schedule = ParameterSchedule::new(rows, tie_k, tie_eps).unwrap();
        let sample = TrainingSample::new(random_ket(&mut rng), rng.uniform(0.0, 1.0)).unwrap();
        let adj = adjoint_gradient(&sample, &schedule, &grid).unwrap();
        let fd = fd_gradient_local::<f64, Wide>(&sample, &schedule, &grid, 1e-6).unwrap();
        for (a, f) in adj.iter().flatten().zip(fd.iter().flatten()) {
            if f.abs() > 1e-12 {
                worst = worst.max((a - f).abs() / f.abs());
                checked += 1;
            }
        }
    }
    let pass = worst <= 1e-5 && start.elapsed().as_secs_f64() < 60.0;
    report.record(
        2,
        "adjoint vs finite differences",
        start,
        pass,
        format!("20 pairs, {checked} elements, h 1e-6 with double-double perturbed step, worst relative error {worst:.2e}"),
    );
}

fn zero_noise_training(report: &mut Report) -> (TrainOutcome<f64>, Vec<f64>) {
    let start = Instant::now();
    let cfg = TrainingConfig::default();
    let out = train::<f64>(
        &default_training_set(),
        &cfg,
        &mut RandomSource::from_seed(cfg.seed),
    )
    .expect("training runs");
    let o = out.history.last().unwrap().per_sample_outputs.clone();
    let rms = out.final_rms();
    let pass =
        rms <= 5e-3 && o[0] >= 0.98 && o[1] <= 5e-3 && o[2] <= 5e-3 && (o[3] - 0.44).abs() <= 0.02;
    report.record(
        3,
        "zero-noise training",
        start,
        pass,
        format!(
            "rms {rms:.3e} after {} epochs; Bell {:.4}, Flat {:.2e}, C {:.2e}, P {:.4}",
            out.history.len(),
            o[0],
            o[1],
            o[2],
            o[3]
        ),
    );
    (out, o)
}

fn fourier_representability(
    report: &mut Report,
    trained: &TrainOutcome<f64>,
    outputs: &[f64],
) -> FitSet<f64> {
    let start = Instant::now();
    let cfg = TrainingConfig::default();
    let fits = FitSet::fit_schedule(&trained.schedule, &cfg.grid, cfg.fit_orders).unwrap();
    let mut worst_ratio = 0.0f64;
    let mut parts = Vec::new();
    for target in qnnent_core::FitTarget::ALL {
        let col = trained.schedule.column(target.column());
        let ptp = col.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - col.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = fits.get(target).rms_residual / ptp;
        worst_ratio = worst_ratio.max(ratio);
        parts.push(format!("{} {:.3}%", target.name(), 100.0 * ratio));
    }
    let fitted = sample_outputs(
        &default_training_set(),
        &qnnent_core::sample_to_schedule(&fits, &cfg.grid).unwrap(),
        &cfg.grid,
    )
    .unwrap();
    let worst_out = fitted
        .iter()
        .zip(outputs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let pass = worst_ratio <= 0.05 && worst_out <= 0.02;
    report.record(
        4,
        "Fourier representability",
        start,
        pass,
        format!(
            "residual/peak-to-peak {}; max output change {worst_out:.2e}",
            parts.join(", ")
        ),
    );
    fits
}

fn noise_ordering(report: &mut Report) {
    let start = Instant::now();
    let config = TrainingConfig {
        stop_rms: 0.0,
        ..TrainingConfig::default()
    };
    let mean_asymptotic = |kind: NoiseKind, amplitude: f64| {
        let req = FourierNoiseRequest {
            config: config.clone(),
            kind,
            distribution: NoiseDistribution::Gaussian,
            amplitudes: vec![amplitude],
            seeds: 5,
        };
        let runs = ladder_runs(&req).expect("noisy training runs");
        runs.iter().map(|r| asymptotic_rms(&r.outcome)).sum::<f64>() / runs.len() as f64
    };
    let zero = mean_asymptotic(NoiseKind::Magnitude, 0.0);
    let mag = mean_asymptotic(NoiseKind::Magnitude, 0.014);
    let phase = mean_asymptotic(NoiseKind::Phase, 0.014);
    let complex = mean_asymptotic(NoiseKind::Complex, 0.014);
    let in_band = |x: f64| (1.5 * zero..=4.0 * zero).contains(&x);
    let pass = phase <= 1.5 * zero
        && in_band(mag)
        && in_band(complex)
        && (complex - mag).abs() <= 0.25 * mag;
    report.record(
        5,
        "noise ordering of asymptotic rms at 0.014",
        start,
        pass,
        format!(
            "5 seeds: zero {zero:.3e}; magnitude {mag:.3e} ({:.1}x); phase {phase:.3e} ({:.1}x); complex {complex:.3e} ({:.1}x)",
            mag / zero,
            phase / zero,
            complex / zero
        ),
    );
}

fn sweep(fits: &FitSet<f64>, family: Family, noise: Option<NoiseSpec>) -> Vec<SweepRow> {
    let (from, to) = family.default_range();
    let req = SweepRequest {
        family,
        fits: *fits,
        noise,
        from,
        to,
        points: 31,
        seeds: 32,
    };
    sweep_rows(&req, &TimeGrid::default()).expect("sweep runs")
}

fn p_tracking(report: &mut Report, fits: &FitSet<f64>) {
    let start = Instant::now();
    let rows = sweep(fits, Family::P, None);
    let gap = rows
        .iter()
        .map(|r| (r.qnn_output - r.eof_clean).abs())
        .fold(0.0, f64::max);
    let over = rows
        .iter()
        .filter(|r| r.param > 0.0)
        .map(|r| r.qnn_output - r.eof_clean)
        .fold(f64::NEG_INFINITY, f64::max);
    let q: Vec<f64> = rows.iter().map(|r| r.qnn_output).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.eof_clean).collect();
    let rho = spearman(&q, &e);
    let pass = gap <= 0.12 && over <= 0.02 && rho >= 0.95;
    report.record(
        6,
        "P(gamma) tracking",
        start,
        pass,
        format!("max |qnn - E_F| {gap:.4}, max overshoot {over:.4}, Spearman {rho:.4}"),
    );
}

fn m_tracking(report: &mut Report, fits: &FitSet<f64>) {
    let start = Instant::now();
    let rows = sweep(fits, Family::M, None);
    let gap = rows
        .iter()
        .map(|r| (r.qnn_output - r.eof_clean).abs())
        .fold(0.0, f64::max);
    report.record(
        7,
        "M(delta) tracking",
        start,
        gap <= 0.12,
        format!("max |qnn - E_F| {gap:.4}"),
    );
}

fn noisy_testing(report: &mut Report, fits: &FitSet<f64>) {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for family in [Family::P, Family::M] {
        let mut deviation = Vec::new();
        for kind in NoiseKind::ALL {
            let rows = sweep(
                fits,
                family,
                Some(NoiseSpec::new(kind, 0.0069, 99).unwrap()),
            );
            let inside = rows
                .iter()
                .filter(|r| {
                    let lo = r.eof_clean.min(r.eof_noisy_mean) - 0.10;
                    let hi = r.eof_clean.max(r.eof_noisy_mean) + 0.10;
                    (lo..=hi).contains(&r.qnn_output)
                })
                .count();
            let frac = inside as f64 / rows.len() as f64;
            let dev = rows
                .iter()
                .map(|r| (r.qnn_output - r.eof_clean).abs())
                .sum::<f64>()
                / rows.len() as f64;
            pass &= frac >= 0.8;
            deviation.push((kind, dev));
            parts.push(format!(
                "{family:?}/{}: {:.0}% in band, mean dev {dev:.3}",
                kind.name(),
                100.0 * frac
            ));
        }
        let dev_of = |k: NoiseKind| deviation.iter().find(|(kk, _)| *kk == k).unwrap().1;
        pass &= dev_of(NoiseKind::Phase) <= dev_of(NoiseKind::Magnitude);
    }
    report.record(
        8,
        "noisy testing within BW band",
        start,
        pass,
        parts.join("; "),
    );
}

fn physicality(report: &mut Report) {
    let start = Instant::now();
    let mut rng = RandomSource::from_seed(77);
    let mut bad = 0usize;
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let kind = NoiseKind::ALL[i % 3];
        let spec = NoiseSpec::new(kind, 0.014, 0).unwrap();
        let rho = if i % 2 == 0 {
            random_mixed(&mut rng)
        } else {
            random_ket(&mut rng).density_matrix()
        };
        let out = spec.apply(&rho, &mut rng).expect("perturbation succeeds");
        let m = out.matrix();
        let herm = m.hermiticity_error();
        let tr = (m.trace().re - 1.0).abs().max(m.trace().im.abs());
        let neg = -out
            .eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(herm).max(tr).max(neg);
        if herm > 1e-12 || tr > 1e-12 || neg > 1e-12 {
            bad += 1;
        }
    }
    let pass = bad == 0 && start.elapsed().as_secs_f64() < 10.0;
    report.record(
        9,
        "physicality under noise",
        start,
        pass,
        format!("10000 calls, {bad} violations, worst invariant error {worst:.1e}"),
    );
}

fn cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_qnnent"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
                .map(|e| {
                    (
                        e.file_name().to_string_lossy().into_owned(),
                        fs::read(e.path()).unwrap(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

fn determinism(report: &mut Report) {
    let start = Instant::now();
    let tmp = tempfile::TempDir::new().unwrap();
    let p = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let fits = tmp
        .path()
        .join("train/fits.json")
        .to_string_lossy()
        .into_owned();
    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "train",
            vec![
                "train".into(),
                "--seed".into(),
                "5".into(),
                "--out".into(),
                p("train"),
            ],
        ),
        (
            "sweep",
            [
                "sweep-state",
                "--family",
                "M",
                "--fits",
                &fits,
                "--points",
                "6",
                "--seeds",
                "4",
                "--noise-kind",
                "complex",
                "--noise-amplitude",
                "0.0069",
                "--out",
            ]
            .iter()
            .map(|s| s.to_string())
            .chain([p("sweep")])
            .collect(),
        ),
        (
            "randomize",
            [
                "randomize-coeff",
                "--fits",
                &fits,
                "--which",
                "omega-eps",
                "--trials",
                "4",
                "--out",
            ]
            .iter()
            .map(|s| s.to_string())
            .chain([p("randomize")])
            .collect(),
        ),
        (
            "ladder",
            [
                "fourier-vs-noise",
                "--kind",
                "phase",
                "--amplitudes",
                "0,0.0069",
                "--grid-steps",
                "60",
                "--max-epochs",
                "5",
                "--out",
            ]
            .iter()
            .map(|s| s.to_string())
            .chain([p("ladder")])
            .collect(),
        ),
    ];
    let mut identical = 0;
    let mut failed = Vec::new();
    for (name, args) in &runs {
        let args: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        let replay = p(&format!("{name}-replay"));
        let manifest = tmp
            .path()
            .join(name)
            .join("manifest.json")
            .to_string_lossy()
            .into_owned();
        let ok = cli(&args) && cli(&["replay", "--manifest", &manifest, "--out", &replay]) && {
            let a = csvs(&tmp.path().join(name));
            !a.is_empty() && a == csvs(Path::new(&replay))
        };
        if ok {
            identical += 1;
        } else {
            failed.push(*name);
        }
    }
    report.record(
        10,
        "CLI determinism via manifest replay",
        start,
        failed.is_empty(),
        format!(
            "{identical}/{} commands byte-identical{}",
            runs.len(),
            if failed.is_empty() {
                String::new()
            } else {
                format!(", failed: {failed:?}")
            }
        ),
    );
}

fn main() {
    let mut report = Report { failures: 0 };
    oracle_exactness(&mut report);
    gradient_agreement(&mut report);
    let (trained, outputs) = zero_noise_training(&mut report);
    let fits = fourier_representability(&mut report, &trained, &outputs);
    noise_ordering(&mut report);
    p_tracking(&mut report, &fits);
    m_tracking(&mut report, &fits);
    noisy_testing(&mut report, &fits);
    physicality(&mut report);
    determinism(&mut report);
    println!("acceptance: {} of 10 criteria passed", 10 - report.failures);
    if report.failures > 0 {
        std::process::exit(1);
    }
}
