//! Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any
//! criterion fails. Runs as a plain binary (`harness = false`).

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Poisson};

use photostat::fitting::{fit_qcurve, fit_saturation, SaturationCurve, SaturationFitOptions, SaturationPoint};
use photostat::io::Report;
use photostat::model::{
    alpha_for_mean, coherent_deadtime_pn, invert_background, qs_model, saturation_law, BlinkingModel,
};
use photostat::simulator::{
    simulate_coherent_run, simulate_run, stationary_on_fraction, DetectionConfig, RunConfig,
    REFERENCE_OVERALL_EFFICIENCY,
};
use photostat::statistics::{
    bin_to_pulses, default_k_grid, estimate_pn, mandel_q_curve, sliding_variance, PulseBinning, PulseCountSeries,
};

const REP_PERIOD: f64 = 0.5e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn series_of(cfg: &RunConfig) -> PulseCountSeries {
    let sim = simulate_run(cfg).expect("valid run");
    let binning = PulseBinning::new(&cfg.excitation, cfg.detection.reject_window_mult, cfg.n_pulses);
    bin_to_pulses(&sim.tags, &binning).expect("sorted tags")
}

/// Q of the photon-number process of a two-state ON/OFF chain that emits
/// exactly one photon per ON pulse, summed over `k` pulses.
fn exact_chain_q(k: u64, off_prob: f64, on_prob: f64) -> f64 {
    let pi = on_prob / (off_prob + on_prob);
    let lambda = 1.0 - off_prob - on_prob;
    let mut acc = 0.0;
    let mut lm = 1.0;
    for m in 1..k {
        lm *= lambda;
        acc += (k - m) as f64 * lm;
    }
    let var = pi * (1.0 - pi) * (k as f64 + 2.0 * acc);
    var / (k as f64 * pi) - 1.0
}

fn c1_coherent_law() -> Outcome {
    let start = Instant::now();
    let alpha = alpha_for_mean(0.0462).unwrap();
    let law = coherent_deadtime_pn(alpha).unwrap();
    let elapsed = start.elapsed();
    let p1_ok = (law.p1 - 0.0451).abs() < 0.5e-4;
    let p2_ok = (law.p2 * 1e5 - 53.0).abs() < 0.5;
    let fast = elapsed < Duration::from_millis(1);
    Outcome::new(
        p1_ok && p2_ok && fast,
        format!(
            "alpha={alpha:.6} P(1)={:.6} (0.0451) P(2)={:.3e} (53e-5) in {:?}",
            law.p1, law.p2, elapsed
        ),
    )
}

fn c2_deadtime_q() -> Outcome {
    let start = Instant::now();
    let alpha = alpha_for_mean(0.0462).unwrap();
    let law = coherent_deadtime_pn(alpha).unwrap();
    let q_law = law.mandel_q();
    let analytic_ok = (q_law + 0.0231).abs() < 0.5e-4 && q_law == -law.mean / 2.0;

    let n = 10_000_000u64;
    let det = DetectionConfig::default();
    let tags = simulate_coherent_run(alpha, REP_PERIOD, &det, n, 2).unwrap();
    let binning = PulseBinning {
        rep_period_ps: photostat::seconds_to_ps(REP_PERIOD),
        reject_window_ps: photostat::seconds_to_ps(det.reject_window_mult * 2.8e-9),
        n_pulses: n,
    };
    let series = bin_to_pulses(&tags, &binning).unwrap();
    let point = mandel_q_curve(&series, &[1]).unwrap().points[0];
    let q_sim = point.q.unwrap_or(f64::NAN);
    let z = (q_sim - q_law) / point.stderr;
    let elapsed = start.elapsed();
    Outcome::new(
        analytic_ok && z.abs() <= 3.0 && elapsed < Duration::from_secs(60),
        format!(
            "Q law={q_law:.6} (-0.0231), simulated 1e7 pulses Q={q_sim:.6}±{:.6} (z={z:+.2}) in {}",
            point.stderr,
            secs(elapsed)
        ),
    )
}

fn c3_background_inversion() -> Outcome {
    match invert_background(0.0466, 5.0e-5) {
        Ok(d) => Outcome::new(
            (d.efficiency - 0.0445).abs() <= 0.0005 && (d.background_mean - 2.2e-3).abs() <= 0.2e-3,
            format!(
                "eta={:.5} (0.0445±0.0005) gamma={:.4e} (2.2e-3±0.2e-3)",
                d.efficiency, d.background_mean
            ),
        ),
        Err(e) => Outcome::new(false, format!("inversion failed: {e}")),
    }
}

fn c4_c6_reference_run() -> (Outcome, Outcome) {
    let start = Instant::now();
    let cfg = RunConfig::reference(1);
    let series = series_of(&cfg);
    let stats = estimate_pn(&series).unwrap();
    let curve = mandel_q_curve(&series, &default_k_grid(series.len())).unwrap();
    let elapsed = start.elapsed();

    let q1 = curve.points[0];
    let q = q1.q.unwrap_or(f64::NAN);
    let z = (q + 0.0445) / q1.stderr;
    let coherent = coherent_deadtime_pn(alpha_for_mean(stats.mean).unwrap()).unwrap();
    let ratio = stats.p(2) / coherent.p2;
    let c4 = Outcome::new(
        z.abs() <= 3.0 && (ratio - 0.10).abs() <= 0.05 && elapsed < Duration::from_secs(60),
        format!(
            "{} pulses: mean={:.5} Q(1)={q:.5}±{:.5} (z={z:+.2} vs -0.0445) P_S(2)/P_C(2)={:.3e}/{:.3e}={ratio:.3} (0.10±0.05) in {}",
            series.len(),
            stats.mean,
            q1.stderr,
            stats.p(2),
            coherent.p2,
            secs(elapsed)
        ),
    );

    let mut neg = Vec::new();
    let mut pos = Vec::new();
    let mut ok = true;
    for p in &curve.points {
        let v = p.q.unwrap_or(f64::NAN);
        if p.k <= 8 {
            ok &= v < 0.0;
            neg.push(format!("{}:{v:+.4}", p.k));
        } else if p.t > 1e-5 {
            ok &= v > 0.0;
            pos.push(format!("{}:{v:+.3}", p.k));
        }
    }
    let c6 = Outcome::new(ok, format!("k<=8 [{}]; T>1e-5s [{}]", neg.join(" "), pos.join(" ")));
    (c4, c6)
}

fn c5_blinking() -> Outcome {
    let start = Instant::now();
    let isc = 2e-4;
    let tt = 250e-6;
    let model = BlinkingModel::new(isc, tt, REP_PERIOD).unwrap();
    let exact_one = qs_model(1, &model).unwrap() == -1.0;

    let replicates = 64u64;
    let n = 4_000_000u64;
    let ks = [10u64, 100, 1_000, 10_000];
    let mut samples = vec![Vec::new(); ks.len()];
    let mut base = RunConfig::reference(0);
    base.emitter.isc_prob = isc;
    base.emitter.triplet_lifetime = tt;
    base.emitter.emission_prob = 1.0;
    base.detection.efficiency = 0.0;
    base.detection.background_mean = 0.0;
    base.detection.dark_rate = 0.0;
    base.n_pulses = n;
    for r in 0..replicates {
        let cfg = RunConfig {
            seed: 10_000 + r,
            ..base
        };
        let truth = simulate_run(&cfg).unwrap().truth;
        let series = PulseCountSeries::new(truth.emitted_counts(), REP_PERIOD);
        let curve = mandel_q_curve(&series, &ks).unwrap();
        for (i, p) in curve.points.iter().enumerate() {
            samples[i].push(p.q.unwrap_or(f64::NAN));
        }
    }

    let recovery = base.emitter.recovery_prob(REP_PERIOD);
    let mut ok = exact_one;
    let mut parts = vec![format!("Q_s(1)={}", qs_model(1, &model).unwrap())];
    for (i, &k) in ks.iter().enumerate() {
        let s = &samples[i];
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s.len() - 1) as f64;
        let se = (var / s.len() as f64).sqrt();
        let law = qs_model(k, &model).unwrap();
        let z = (mean - law) / se;
        ok &= z.abs() <= 3.0;
        parts.push(format!(
            "k={k}: MC={mean:.4}±{se:.4} law={law:.4} z={z:+.1} chain={:.4}",
            exact_chain_q(k, isc, recovery)
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(300);
    parts.push(format!("{replicates}x{n} pulses in {}", secs(elapsed)));
    Outcome::new(ok, parts.join("; "))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn c7_fit_recovery() -> Outcome {
    let start = Instant::now();
    let isc = 1e-4;
    let tt = REP_PERIOD / 2.5e-3;
    let runs = 100u64;
    let n = 4_000_000u64;
    let mut base = RunConfig::reference(0);
    base.emitter.isc_prob = isc;
    base.emitter.triplet_lifetime = tt;
    let on = stationary_on_fraction(&base.emitter, REP_PERIOD);
    base.detection.efficiency = REFERENCE_OVERALL_EFFICIENCY / (base.emitter.emission_prob * on);
    base.n_pulses = n;

    let (mut iscs, mut tts, mut abs_err) = (Vec::new(), Vec::new(), Vec::new());
    let mut failures = 0;
    for r in 0..runs {
        let series = series_of(&RunConfig {
            seed: 20_000 + r,
            ..base
        });
        let stats = estimate_pn(&series).unwrap();
        let curve = mandel_q_curve(&series, &default_k_grid(series.len())).unwrap();
        let fit = invert_background(stats.p(1), stats.p(2))
            .and_then(|d| fit_qcurve(&curve, d.efficiency, &Default::default()));
        match fit {
            Ok(f) => {
                let (p, t) = (f.value("isc_prob").unwrap(), f.value("triplet_lifetime").unwrap());
                iscs.push(p);
                tts.push(t);
                abs_err.push((p / isc - 1.0).abs());
            }
            Err(_) => {
                // a failed fit counts as an arbitrarily bad estimate
                failures += 1;
                iscs.push(f64::INFINITY);
                tts.push(f64::INFINITY);
                abs_err.push(f64::INFINITY);
            }
        }
    }
    let isc_err = median(&mut iscs) / isc - 1.0;
    let tt_err = median(&mut tts) / tt - 1.0;
    let q_ok = isc_err.abs() < 0.10 && tt_err.abs() < 0.10;

    // noiseless saturation data with constructed triplet dips
    let ratio = SaturationFitOptions::default().duration_ratio;
    let energies: Vec<f64> = (0..40).map(|i| 1e-3 * 10f64.powf(i as f64 * 5.0 / 39.0)).collect();
    let clean = SaturationCurve {
        points: energies
            .iter()
            .map(|&e| SaturationPoint {
                pulse_energy: e,
                rate: 160e3 * saturation_law(e, 5.6e-5, ratio),
                integration_time: 1.0,
            })
            .collect(),
    };
    let sat = fit_saturation(&clean, &Default::default());
    let sat_ok = sat.as_ref().is_ok_and(|f| {
        (f.value("max_rate").unwrap() / 160e3 - 1.0).abs() < 1e-6
            && (f.value("sat_energy").unwrap() / 5.6e-5 - 1.0).abs() < 1e-6
    });
    let dips: Vec<usize> = (0..40).filter(|i| i % 5 == 3).collect();
    let mut dipped = clean.clone();
    for &i in &dips {
        dipped.points[i].rate *= 0.3;
    }
    let dip_fit = fit_saturation(&dipped, &Default::default());
    let dip_ok = dip_fit.as_ref().is_ok_and(|f| f.rejected == dips);

    let elapsed = start.elapsed();
    Outcome::new(
        q_ok && sat_ok && dip_ok && elapsed < Duration::from_secs(600),
        format!(
            "{runs}x{n} pulses: median p*tau_rep err={isc_err:+.3} median tau_T err={tt_err:+.3} \
             (median |p err|={:.3}, {failures} failed fits); saturation exact={sat_ok} dips rejected={dip_ok} in {}",
            median(&mut abs_err),
            secs(elapsed)
        ),
    )
}

fn within(q: Option<f64>, target: f64, stderr: f64) -> bool {
    q.is_some_and(|v| (v - target).abs() <= 3.0 * stderr)
}

fn c8_estimators() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let n = 1_000_000usize;
    let ks = default_k_grid(10_000);

    let ones = PulseCountSeries::new(vec![1; n], REP_PERIOD);
    let det = mandel_q_curve(&ones, &ks)
        .unwrap()
        .points
        .iter()
        .all(|p| p.q == Some(-1.0))
        && estimate_pn(&ones).unwrap().mandel_q == Some(-1.0);
    notes.push(format!("deterministic={det}"));

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let poisson = Poisson::new(0.5).unwrap();
    let counts: Vec<u32> = (0..n).map(|_| poisson.sample(&mut rng) as u32).collect();
    let pois = PulseCountSeries::new(counts, REP_PERIOD);
    let curve = mandel_q_curve(&pois, &ks).unwrap();
    let pois_ok = curve.points.iter().all(|p| within(p.q, 0.0, p.stderr));
    let worst = curve
        .points
        .iter()
        .map(|p| p.q.unwrap_or(f64::NAN) / p.stderr)
        .fold(0.0f64, |a, z| a.max(z.abs()));
    notes.push(format!("poisson={pois_ok} (max |z|={worst:.2})"));

    let bern = Bernoulli::new(0.2).unwrap();
    let counts: Vec<u32> = (0..n).map(|_| bern.sample(&mut rng) as u32).collect();
    let iid = PulseCountSeries::new(counts, REP_PERIOD);
    let curve = mandel_q_curve(&iid, &ks).unwrap();
    let q1 = curve.points[0].q.unwrap();
    let flat = (q1 + 0.2).abs() < 0.01 && curve.points.iter().all(|p| within(p.q, q1, p.stderr));
    let q1_exact = estimate_pn(&iid).unwrap().mandel_q == Some(q1);
    notes.push(format!("iid flat={flat} Q(1)=pn={q1_exact}"));

    let zeros = PulseCountSeries::new(vec![0; 500], REP_PERIOD);
    let silent = sliding_variance(&zeros, 100)
        .unwrap()
        .entries
        .iter()
        .all(|e| e.v_w == 1.0);
    let regular = sliding_variance(&PulseCountSeries::new(vec![1; 500], REP_PERIOD), 100)
        .unwrap()
        .entries
        .iter()
        .all(|e| e.v_w == 0.0);
    let small: Vec<u32> = (0..300u32).map(|i| (i * i + 3 * i) % 7 % 3).collect();
    let small = PulseCountSeries::new(small, REP_PERIOD);
    let trace = sliding_variance(&small, 20).unwrap();
    let brute = trace.entries.len() == 281
        && trace.entries.iter().all(|e| {
            let w: Vec<f64> = small.counts[e.start..e.start + 20].iter().map(|&c| c as f64).collect();
            let m = w.iter().sum::<f64>() / 20.0;
            let v = w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 20.0;
            let expect = if m == 0.0 { 1.0 } else { v / m };
            (e.v_w - expect).abs() < 1e-12
        });
    let vw = silent && regular && brute;
    notes.push(format!("V_W conventions={vw}"));

    let elapsed = start.elapsed();
    notes.push(format!("in {}", secs(elapsed)));
    Outcome::new(
        det && pois_ok && flat && q1_exact && vw && elapsed < Duration::from_secs(60),
        notes.join("; "),
    )
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_photostat"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "`{}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

struct PipelineOutput {
    files: Vec<(String, Vec<u8>)>,
}

fn pipeline(dir: &Path) -> Result<PipelineOutput, String> {
    let config = dir.join("run.conf");
    std::fs::write(&config, photostat::io::config::reference_config_text()).map_err(|e| e.to_string())?;
    let tags = dir.join("run.phst");
    let out_dir = dir.join("analysis");
    run_cli(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        tags.to_str().unwrap(),
    ])?;
    let report = run_cli(&[
        "analyze",
        tags.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ])?;
    let eta = Report::parse(&report)
        .get("efficiency")
        .ok_or("report lacks efficiency")?
        .to_string();
    let fit = dir.join("fit.txt");
    run_cli(&[
        "fit",
        "qcurve",
        out_dir.join("qcurve.csv").to_str().unwrap(),
        "--efficiency",
        &eta,
        "--out",
        fit.to_str().unwrap(),
    ])?;
    let mut files = Vec::new();
    for path in [
        tags.clone(),
        dir.join("run.phst.truth.csv"),
        out_dir.join("report.txt"),
        out_dir.join("qcurve.csv"),
        out_dir.join("variance.csv"),
        out_dir.join("histogram.csv"),
        fit,
    ] {
        let name = path.strip_prefix(dir).unwrap().display().to_string();
        files.push((name, std::fs::read(&path).map_err(|e| e.to_string())?));
    }
    Ok(PipelineOutput { files })
}

fn c9_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    match (pipeline(a.path()), pipeline(b.path())) {
        (Ok(x), Ok(y)) => {
            let differing: Vec<&str> = x
                .files
                .iter()
                .zip(&y.files)
                .filter(|(f, g)| f.1 != g.1)
                .map(|(f, _)| f.0.as_str())
                .collect();
            Outcome::new(
                differing.is_empty(),
                if differing.is_empty() {
                    format!("{} output files byte-identical across two invocations", x.files.len())
                } else {
                    format!("differ: {}", differing.join(", "))
                },
            )
        }
        (Err(e), _) | (_, Err(e)) => Outcome::new(false, e),
    }
}

fn main() {
    let (c4, c6) = c4_c6_reference_run();
    let results = [
        ("C1 coherent dead-time law", c1_coherent_law()),
        ("C2 dead-time Mandel prediction", c2_deadtime_q()),
        ("C3 background inversion", c3_background_inversion()),
        ("C4 sub-Poissonian pulse statistics", c4),
        ("C5 blinking model", c5_blinking()),
        ("C6 Q(T) crossover", c6),
        ("C7 fit recovery", c7_fit_recovery()),
        ("C8 estimator properties", c8_estimators()),
        ("C9 pipeline determinism", c9_determinism()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
