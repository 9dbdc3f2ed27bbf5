use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use photostat::fitting::{self, QCurveFitOptions, SaturationFitOptions};
use photostat::io::{self, csv, report, ConfigMap, Report, RunSpec, TimetagFile, TimetagHeader};
use photostat::model::invert_background;
use photostat::simulator::{self, GroundTruth};
use photostat::statistics::{self, PulseBinning};
use photostat::{seconds_to_ps, Error, Result, PS_PER_S};

pub fn simulate(config: &Path, seed: Option<u64>, seeds: &[u64], pulses: Option<u64>, out: &Path) -> Result<()> {
    let text = fs::read_to_string(config)?;
    let mut map = ConfigMap::parse(&text)?;
    map.apply_env();
    if let Some(p) = pulses {
        map.set("n_pulses", p);
    }
    if seeds.is_empty() {
        if let Some(s) = seed {
            map.set("seed", s);
        }
        return simulate_one(&map, out);
    }
    seeds.par_iter().try_for_each(|&s| {
        let mut m = map.clone();
        m.set("seed", s);
        simulate_one(&m, &seeded_path(out, s))
    })
}

fn seeded_path(out: &Path, seed: u64) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}-seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}-seed{seed}"),
    };
    out.with_file_name(name)
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    out.with_file_name(name)
}

fn simulate_one(map: &ConfigMap, out: &Path) -> Result<()> {
    let spec = map.to_run_spec()?;
    let mut metadata = BTreeMap::new();
    let (header, tags, truth) = match &spec {
        RunSpec::Sps(run) => {
            let sim = simulator::simulate_run(run)?;
            metadata.insert("source".into(), "sps".into());
            metadata.insert(
                "rad_lifetime_ps".into(),
                seconds_to_ps(run.excitation.rad_lifetime).to_string(),
            );
            metadata.insert(
                "reject_window_mult".into(),
                run.detection.reject_window_mult.to_string(),
            );
            let header = TimetagHeader {
                rep_period_ps: run.rep_period_ps(),
                n_pulses: run.n_pulses,
                seed: run.seed,
                metadata,
            };
            (header, sim.tags, Some(sim.truth))
        }
        RunSpec::Coherent(c) => {
            let tags = simulator::simulate_coherent_run(c.alpha, c.rep_period, &c.detection, c.n_pulses, c.seed)?;
            metadata.insert("source".into(), "coherent".into());
            metadata.insert("rad_lifetime_ps".into(), seconds_to_ps(c.rad_lifetime).to_string());
            metadata.insert("reject_window_mult".into(), c.detection.reject_window_mult.to_string());
            let header = TimetagHeader {
                rep_period_ps: seconds_to_ps(c.rep_period),
                n_pulses: c.n_pulses,
                seed: c.seed,
                metadata,
            };
            (header, tags, None)
        }
    };
    let file = TimetagFile { header, tags };
    file.write(out)?;
    let tag_bytes = fs::read(out)?;

    let mut manifest = map.render();
    manifest.push_str(&format!("toolkit_version = {}\n", photostat::VERSION));
    manifest.push_str(&format!("output.timetags = {}\n", out.display()));
    manifest.push_str(&format!("output.timetags.sha256 = {}\n", io::content_hash(&tag_bytes)));
    if let Some(truth) = truth {
        let truth_path = sidecar(out, ".truth.csv");
        let text = csv::truth_to_csv(&truth);
        fs::write(&truth_path, &text)?;
        manifest.push_str(&format!("output.truth = {}\n", truth_path.display()));
        manifest.push_str(&format!(
            "output.truth.sha256 = {}\n",
            io::content_hash(text.as_bytes())
        ));
        summarize(&truth, file.tags.len());
    }
    fs::write(sidecar(out, ".manifest"), manifest)?;
    Ok(())
}

fn summarize(truth: &GroundTruth, n_tags: usize) {
    eprintln!(
        "simulated {} pulses: {} emitted photons, {} timetags, ON fraction {:.4}",
        truth.n_pulses,
        truth.emissions.len(),
        n_tags,
        truth.on_fraction()
    );
}

pub struct AnalyzeOptions {
    pub input: PathBuf,
    pub window: usize,
    pub k_grid: Vec<u64>,
    pub out_dir: PathBuf,
    pub rad_lifetime: Option<f64>,
    pub reject_mult: Option<f64>,
    pub bin_width: f64,
    pub span: f64,
}

fn meta_f64(file: &TimetagFile, key: &str) -> Option<f64> {
    file.header.metadata.get(key).and_then(|v| v.parse().ok())
}

pub fn analyze(opts: &AnalyzeOptions) -> Result<()> {
    let file = TimetagFile::read(&opts.input)?;
    let rad_ps = match opts.rad_lifetime {
        Some(s) => s * PS_PER_S,
        None => meta_f64(&file, "rad_lifetime_ps")
            .ok_or_else(|| Error::config("rad_lifetime", "not in file metadata; pass --rad-lifetime"))?,
    };
    let mult = opts
        .reject_mult
        .or_else(|| meta_f64(&file, "reject_window_mult"))
        .unwrap_or(10.0);
    let binning = PulseBinning {
        rep_period_ps: file.header.rep_period_ps,
        reject_window_ps: (mult * rad_ps).round() as u64,
        n_pulses: file.header.n_pulses,
    };
    let series = statistics::bin_to_pulses(&file.tags, &binning)?;
    let stats = statistics::estimate_pn(&series)?;
    let background = (stats.p(1) > 0.0 && stats.p(1) < 1.0)
        .then(|| invert_background(stats.p(1), stats.p(2)).ok())
        .flatten();
    let mut rep = report::stats_report(&series, &stats, background.as_ref());

    let ks = if opts.k_grid.is_empty() {
        statistics::default_k_grid(series.len())
    } else {
        opts.k_grid.clone()
    };
    let qcurve = statistics::mandel_q_curve(&series, &ks)?;
    let window = opts.window.min(series.len());
    let trace = statistics::sliding_variance(&series, window)?;
    let rep_ps = file.header.rep_period_ps;
    let hist = statistics::startstop_histogram(&file.tags, seconds_to_ps(opts.bin_width), seconds_to_ps(opts.span));

    fs::create_dir_all(&opts.out_dir)?;
    fs::write(opts.out_dir.join("qcurve.csv"), csv::qcurve_to_csv(&qcurve))?;
    fs::write(opts.out_dir.join("variance.csv"), csv::variance_to_csv(&trace))?;
    match &hist {
        Ok(h) => {
            fs::write(opts.out_dir.join("histogram.csv"), csv::histogram_to_csv(h))?;
            rep.int("g2.pairs", h.pairs)
                .int("g2.central_area", h.central_area(rep_ps))
                .num("g2.side_area", h.side_area(rep_ps, 1));
        }
        Err(_) => {
            fs::write(opts.out_dir.join("histogram.csv"), "bin_center,count\n")?;
            rep.text("g2.pairs", "single-channel");
        }
    }
    let text = rep.render();
    fs::write(opts.out_dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn emit(rep: &Report, out: Option<&Path>) -> Result<()> {
    let text = rep.render();
    if let Some(path) = out {
        fs::write(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

pub fn fit_sat(
    input: &Path,
    duration_ratio: Option<f64>,
    reject_sigmas: Option<f64>,
    reject_fraction: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let curve = csv::saturation_from_csv(&fs::read_to_string(input)?)?;
    let d = SaturationFitOptions::default();
    let opts = SaturationFitOptions {
        duration_ratio: duration_ratio.unwrap_or(d.duration_ratio),
        rejection_sigmas: reject_sigmas.unwrap_or(d.rejection_sigmas),
        rejection_fraction: reject_fraction.unwrap_or(d.rejection_fraction),
    };
    let fit = fitting::fit_saturation(&curve, &opts)?;
    emit(&report::fit_report("saturation", &fit), out)
}

pub fn fit_qcurve(input: &Path, efficiency: f64, out: Option<&Path>) -> Result<()> {
    let curve = csv::qcurve_from_csv(&fs::read_to_string(input)?)?;
    let fit = fitting::fit_qcurve(&curve, efficiency, &QCurveFitOptions::default())?;
    let mut rep = report::fit_report("qcurve", &fit);
    rep.num("efficiency", efficiency).num("rep_period", curve.rep_period);
    emit(&rep, out)
}

pub fn g2(input: &Path, bin_width: f64, span: f64, out: Option<&Path>) -> Result<()> {
    let file = TimetagFile::read(input)?;
    let hist = statistics::startstop_histogram(&file.tags, seconds_to_ps(bin_width), seconds_to_ps(span))?;
    let text = csv::histogram_to_csv(&hist);
    let rep_ps = file.header.rep_period_ps;
    eprintln!(
        "pairs = {}, central_area = {}, side_area = {:.1}",
        hist.pairs,
        hist.central_area(rep_ps),
        hist.side_area(rep_ps, 1)
    );
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn convert(input: &Path, output: &Path) -> Result<()> {
    TimetagFile::read(input)?.write(output)
}
