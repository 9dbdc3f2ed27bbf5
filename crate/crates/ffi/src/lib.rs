//! C ABI for the photostat toolkit.
//!
//! Every fallible function returns a [`PsStatus`]; on failure the message is
//! available from [`ps_last_error`] on the same thread. Objects crossing the
//! boundary are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use photostat::fitting::{self, QCurveFitOptions, SaturationCurve, SaturationFitOptions, SaturationPoint};
use photostat::io::{TimetagFile, TimetagHeader};
use photostat::model::{self, BlinkingModel, EmitterModel, ExcitationConfig};
use photostat::simulator::{self, DetectionConfig, RunConfig};
use photostat::statistics::{self, PulseBinning, PulseCountSeries, QCurve, QPoint};
use photostat::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Config = 3,
    Inversion = 4,
    Format = 5,
    OutOfOrder = 6,
    Io = 7,
    Fit = 8,
    DegenerateInput = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> PsStatus {
    match err {
        Error::InvalidParameter { .. } => PsStatus::InvalidParameter,
        Error::Config { .. } => PsStatus::Config,
        Error::Inversion(_) => PsStatus::Inversion,
        Error::Format { .. } => PsStatus::Format,
        Error::OutOfOrder { .. } => PsStatus::OutOfOrder,
        Error::Io(_) => PsStatus::Io,
        Error::Fit { .. } => PsStatus::Fit,
        Error::DegenerateInput(_) => PsStatus::DegenerateInput,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Buffer(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PsStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            PsStatus::NullPointer
        }
        Ok(Err(Failure::Buffer(needed))) => {
            set_error(format!("output buffer too small: need {needed} elements"));
            PsStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic");
            PsStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn input<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::param("path", "not valid UTF-8"))?;
    Ok(Path::new(s))
}

/// Message for the last failure on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Excited-state population σ for a pulse energy (pJ).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_saturation_law(
    pulse_energy: f64,
    sat_energy: f64,
    duration_ratio: f64,
    out_sigma: *mut f64,
) -> PsStatus {
    guard(|| {
        if !(pulse_energy >= 0.0 && sat_energy > 0.0 && duration_ratio > 0.0) {
            return Err(Error::param("pulse_energy", "energies and ratio must be positive").into());
        }
        *out(out_sigma, "out_sigma")? = model::saturation_law(pulse_energy, sat_energy, duration_ratio);
        Ok(())
    })
}

/// P(0), P(1), P(2) and the mean count of a coherent pulse of mean `alpha`
/// split onto two dead-time-limited detectors.
///
/// # Safety
/// All output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_coherent_deadtime_pn(
    alpha: f64,
    p0: *mut f64,
    p1: *mut f64,
    p2: *mut f64,
    mean: *mut f64,
) -> PsStatus {
    guard(|| {
        let law = model::coherent_deadtime_pn(alpha)?;
        *out(p0, "p0")? = law.p0;
        *out(p1, "p1")? = law.p1;
        *out(p2, "p2")? = law.p2;
        *out(mean, "mean")? = law.mean;
        Ok(())
    })
}

/// Solves for overall efficiency and background mean from measured P(1), P(2).
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_invert_background(
    p1: f64,
    p2: f64,
    efficiency: *mut f64,
    background_mean: *mut f64,
) -> PsStatus {
    guard(|| {
        let d = model::invert_background(p1, p2)?;
        *out(efficiency, "efficiency")? = d.efficiency;
        *out(background_mean, "background_mean")? = d.background_mean;
        Ok(())
    })
}

/// Source-level Mandel parameter of the blinking model for a `k`-pulse window.
///
/// # Safety
/// `out_q` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_qs_model(
    k: u64,
    isc_prob: f64,
    triplet_lifetime: f64,
    rep_period: f64,
    out_q: *mut f64,
) -> PsStatus {
    guard(|| {
        let m = BlinkingModel::new(isc_prob, triplet_lifetime, rep_period)?;
        *out(out_q, "out_q")? = model::qs_model(k, &m)?;
        Ok(())
    })
}

/// Flat simulation configuration. Times in seconds, energies in pJ.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsRunConfig {
    pub pulse_energy: f64,
    pub sat_energy: f64,
    pub pulse_duration: f64,
    pub rad_lifetime: f64,
    pub rep_period: f64,
    pub max_rate: f64,
    pub isc_prob: f64,
    pub triplet_lifetime: f64,
    pub bleach_prob: f64,
    pub emission_prob: f64,
    pub dead_time: f64,
    pub dark_rate: f64,
    pub split_ratio: f64,
    pub reject_window_mult: f64,
    pub efficiency: f64,
    pub background_mean: f64,
    pub n_pulses: u64,
    pub seed: u64,
}

impl From<&RunConfig> for PsRunConfig {
    fn from(c: &RunConfig) -> Self {
        PsRunConfig {
            pulse_energy: c.excitation.pulse_energy,
            sat_energy: c.excitation.sat_energy,
            pulse_duration: c.excitation.pulse_duration,
            rad_lifetime: c.excitation.rad_lifetime,
            rep_period: c.excitation.rep_period,
            max_rate: c.excitation.max_rate,
            isc_prob: c.emitter.isc_prob,
            triplet_lifetime: c.emitter.triplet_lifetime,
            bleach_prob: c.emitter.bleach_prob,
            emission_prob: c.emitter.emission_prob,
            dead_time: c.detection.dead_time,
            dark_rate: c.detection.dark_rate,
            split_ratio: c.detection.split_ratio,
            reject_window_mult: c.detection.reject_window_mult,
            efficiency: c.detection.efficiency,
            background_mean: c.detection.background_mean,
            n_pulses: c.n_pulses,
            seed: c.seed,
        }
    }
}

impl From<&PsRunConfig> for RunConfig {
    fn from(c: &PsRunConfig) -> Self {
        RunConfig {
            excitation: ExcitationConfig {
                pulse_energy: c.pulse_energy,
                sat_energy: c.sat_energy,
                pulse_duration: c.pulse_duration,
                rad_lifetime: c.rad_lifetime,
                rep_period: c.rep_period,
                max_rate: c.max_rate,
            },
            emitter: EmitterModel {
                isc_prob: c.isc_prob,
                triplet_lifetime: c.triplet_lifetime,
                bleach_prob: c.bleach_prob,
                emission_prob: c.emission_prob,
            },
            detection: DetectionConfig {
                dead_time: c.dead_time,
                dark_rate: c.dark_rate,
                split_ratio: c.split_ratio,
                reject_window_mult: c.reject_window_mult,
                efficiency: c.efficiency,
                background_mean: c.background_mean,
            },
            n_pulses: c.n_pulses,
            seed: c.seed,
        }
    }
}

/// Fills `config` with the single-molecule reference preset.
///
/// # Safety
/// `config` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_run_config_reference(seed: u64, config: *mut PsRunConfig) -> PsStatus {
    guard(|| {
        *out(config, "config")? = PsRunConfig::from(&RunConfig::reference(seed));
        Ok(())
    })
}

/// Opaque timetag record with its header.
pub struct PsTimetags {
    file: TimetagFile,
}

/// Opaque per-pulse count table.
pub struct PsSeries {
    series: PulseCountSeries,
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Runs the Monte Carlo simulation.
///
/// # Safety
/// `config` and `result` must be valid; free the result with `ps_timetags_free`.
#[no_mangle]
pub unsafe extern "C" fn ps_simulate(config: *const PsRunConfig, result: *mut *mut PsTimetags) -> PsStatus {
    guard(|| {
        let cfg = RunConfig::from(input(config, "config")?);
        let slot = out(result, "result")?;
        let sim = simulator::simulate_run(&cfg)?;
        let mut header = TimetagHeader {
            rep_period_ps: cfg.rep_period_ps(),
            n_pulses: cfg.n_pulses,
            seed: cfg.seed,
            metadata: Default::default(),
        };
        header.metadata.insert("source".into(), "sps".into());
        header.metadata.insert(
            "rad_lifetime_ps".into(),
            photostat::seconds_to_ps(cfg.excitation.rad_lifetime).to_string(),
        );
        header.metadata.insert(
            "reject_window_mult".into(),
            cfg.detection.reject_window_mult.to_string(),
        );
        *slot = boxed(PsTimetags {
            file: TimetagFile { header, tags: sim.tags },
        });
        Ok(())
    })
}

/// Reads a binary or CSV timetag file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `result` valid.
#[no_mangle]
pub unsafe extern "C" fn ps_timetags_read(path: *const c_char, result: *mut *mut PsTimetags) -> PsStatus {
    guard(|| {
        let slot = out(result, "result")?;
        let file = TimetagFile::read(path_arg(path)?)?;
        *slot = boxed(PsTimetags { file });
        Ok(())
    })
}

/// Writes a timetag file; a `.csv` extension selects the text format.
///
/// # Safety
/// `tags` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ps_timetags_write(tags: *const PsTimetags, path: *const c_char) -> PsStatus {
    guard(|| {
        let t = input(tags, "tags")?;
        t.file.write(path_arg(path)?)?;
        Ok(())
    })
}

/// Number of timetags; 0 for a null handle.
///
/// # Safety
/// `tags` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_timetags_len(tags: *const PsTimetags) -> usize {
    tags.as_ref().map_or(0, |t| t.file.tags.len())
}

/// Timetag `index` as picoseconds and channel (0 or 1).
///
/// # Safety
/// `tags` must be a live handle and the outputs valid.
#[no_mangle]
pub unsafe extern "C" fn ps_timetags_get(
    tags: *const PsTimetags,
    index: usize,
    time_ps: *mut u64,
    channel: *mut u8,
) -> PsStatus {
    guard(|| {
        let t = input(tags, "tags")?;
        let tag = t
            .file
            .tags
            .get(index)
            .ok_or_else(|| Error::param("index", format!("out of range for {} timetags", t.file.tags.len())))?;
        *out(time_ps, "time_ps")? = tag.time_ps;
        *out(channel, "channel")? = tag.channel.index();
        Ok(())
    })
}

/// # Safety
/// `tags` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_timetags_free(tags: *mut PsTimetags) {
    if !tags.is_null() {
        drop(Box::from_raw(tags));
    }
}

/// Wraps a count table.
///
/// # Safety
/// `counts` must hold `len` values and `result` be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_series_from_counts(
    counts: *const u32,
    len: usize,
    rep_period: f64,
    result: *mut *mut PsSeries,
) -> PsStatus {
    guard(|| {
        let c = slice(counts, len, "counts")?;
        if !(rep_period > 0.0 && rep_period.is_finite()) {
            return Err(Error::param("rep_period", "must be finite and > 0").into());
        }
        *out(result, "result")? = boxed(PsSeries {
            series: PulseCountSeries::new(c.to_vec(), rep_period),
        });
        Ok(())
    })
}

/// Bins timetags to pulses using the record's repetition period and pulse
/// count. Clicks later than `reject_window_ps` after their pulse are dropped.
///
/// # Safety
/// `tags` must be a live handle and `result` valid.
#[no_mangle]
pub unsafe extern "C" fn ps_series_from_timetags(
    tags: *const PsTimetags,
    reject_window_ps: u64,
    result: *mut *mut PsSeries,
) -> PsStatus {
    guard(|| {
        let t = input(tags, "tags")?;
        let slot = out(result, "result")?;
        let binning = PulseBinning {
            rep_period_ps: t.file.header.rep_period_ps,
            reject_window_ps,
            n_pulses: t.file.header.n_pulses,
        };
        let series = statistics::bin_to_pulses(&t.file.tags, &binning)?;
        *slot = boxed(PsSeries { series });
        Ok(())
    })
}

/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_series_len(series: *const PsSeries) -> usize {
    series.as_ref().map_or(0, |s| s.series.len())
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_series_free(series: *mut PsSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Photocount distribution. `probabilities` receives P(0..n_probabilities);
/// entries past the largest observed count are zero. `q` is NaN when the
/// series holds no counts.
///
/// # Safety
/// `probabilities` must hold `n_probabilities` values; other outputs valid.
#[no_mangle]
pub unsafe extern "C" fn ps_estimate_pn(
    series: *const PsSeries,
    probabilities: *mut f64,
    n_probabilities: usize,
    mean: *mut f64,
    q: *mut f64,
) -> PsStatus {
    guard(|| {
        let s = input(series, "series")?;
        let probs = slice_mut(probabilities, n_probabilities, "probabilities")?;
        let stats = statistics::estimate_pn(&s.series)?;
        for (n, p) in probs.iter_mut().enumerate() {
            *p = stats.p(n);
        }
        *out(mean, "mean")? = stats.mean;
        *out(q, "q")? = stats.mandel_q.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Q(kτ_rep) for strictly increasing `ks`. No-signal points give NaN.
///
/// # Safety
/// `ks`, `q` and `stderr` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ps_mandel_q_curve(
    series: *const PsSeries,
    ks: *const u64,
    len: usize,
    q: *mut f64,
    stderr: *mut f64,
) -> PsStatus {
    guard(|| {
        let s = input(series, "series")?;
        let ks = slice(ks, len, "ks")?;
        let q = slice_mut(q, len, "q")?;
        let se = slice_mut(stderr, len, "stderr")?;
        let curve = statistics::mandel_q_curve(&s.series, ks)?;
        for (i, p) in curve.points.iter().enumerate() {
            q[i] = p.q.unwrap_or(f64::NAN);
            se[i] = p.stderr;
        }
        Ok(())
    })
}

/// Sliding V_W trace; `v_w` must hold `series_len - window + 1` values.
///
/// # Safety
/// `v_w` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn ps_sliding_variance(
    series: *const PsSeries,
    window: usize,
    v_w: *mut f64,
    capacity: usize,
) -> PsStatus {
    guard(|| {
        let s = input(series, "series")?;
        let trace = statistics::sliding_variance(&s.series, window)?;
        if capacity < trace.entries.len() {
            return Err(Failure::Buffer(trace.entries.len()));
        }
        let dst = slice_mut(v_w, trace.entries.len(), "v_w")?;
        for (d, e) in dst.iter_mut().zip(&trace.entries) {
            *d = e.v_w;
        }
        Ok(())
    })
}

/// Blinking-model fit output.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsQCurveFit {
    pub isc_prob: f64,
    pub isc_prob_stderr: f64,
    pub triplet_lifetime: f64,
    pub triplet_lifetime_stderr: f64,
    pub residual_norm: f64,
    pub limiting_regime: bool,
}

/// Fits a measured Q(T) curve at fixed overall efficiency.
///
/// # Safety
/// `ks`, `q` and `stderr` must hold `len` values; `result` valid.
#[no_mangle]
pub unsafe extern "C" fn ps_fit_qcurve(
    ks: *const u64,
    q: *const f64,
    stderr: *const f64,
    len: usize,
    rep_period: f64,
    efficiency: f64,
    result: *mut PsQCurveFit,
) -> PsStatus {
    guard(|| {
        let ks = slice(ks, len, "ks")?;
        let q = slice(q, len, "q")?;
        let se = slice(stderr, len, "stderr")?;
        let slot = out(result, "result")?;
        let points = (0..len)
            .map(|i| QPoint {
                k: ks[i],
                t: ks[i] as f64 * rep_period,
                q: Some(q[i]).filter(|v| !v.is_nan()),
                stderr: se[i],
                n_windows: 0,
            })
            .collect();
        let curve = QCurve { rep_period, points };
        let fit = fitting::fit_qcurve(&curve, efficiency, &QCurveFitOptions::default())?;
        *slot = PsQCurveFit {
            isc_prob: fit.value("isc_prob").unwrap_or(f64::NAN),
            isc_prob_stderr: fit.uncertainty("isc_prob").unwrap_or(f64::NAN),
            triplet_lifetime: fit.value("triplet_lifetime").unwrap_or(f64::NAN),
            triplet_lifetime_stderr: fit.uncertainty("triplet_lifetime").unwrap_or(f64::NAN),
            residual_norm: fit.residual_norm,
            limiting_regime: fit.limiting_regime.unwrap_or(false),
        };
        Ok(())
    })
}

/// Saturation fit output.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsSaturationFit {
    pub max_rate: f64,
    pub max_rate_stderr: f64,
    pub sat_energy: f64,
    pub sat_energy_stderr: f64,
    pub residual_norm: f64,
    pub n_rejected: usize,
}

/// Two-step saturation fit. `rejected`, if non-null, receives 1 for each
/// point excluded from the final fit and 0 otherwise.
///
/// # Safety
/// Input arrays and `rejected` (if non-null) must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ps_fit_saturation(
    pulse_energy: *const f64,
    rate: *const f64,
    integration_time: *const f64,
    len: usize,
    duration_ratio: f64,
    result: *mut PsSaturationFit,
    rejected: *mut u8,
) -> PsStatus {
    guard(|| {
        let e = slice(pulse_energy, len, "pulse_energy")?;
        let r = slice(rate, len, "rate")?;
        let t = slice(integration_time, len, "integration_time")?;
        let slot = out(result, "result")?;
        let curve = SaturationCurve {
            points: (0..len)
                .map(|i| SaturationPoint {
                    pulse_energy: e[i],
                    rate: r[i],
                    integration_time: t[i],
                })
                .collect(),
        };
        let opts = SaturationFitOptions {
            duration_ratio,
            ..SaturationFitOptions::default()
        };
        let fit = fitting::fit_saturation(&curve, &opts)?;
        *slot = PsSaturationFit {
            max_rate: fit.value("max_rate").unwrap_or(f64::NAN),
            max_rate_stderr: fit.uncertainty("max_rate").unwrap_or(f64::NAN),
            sat_energy: fit.value("sat_energy").unwrap_or(f64::NAN),
            sat_energy_stderr: fit.uncertainty("sat_energy").unwrap_or(f64::NAN),
            residual_norm: fit.residual_norm,
            n_rejected: fit.n_points_rejected,
        };
        if !rejected.is_null() {
            let mask = std::slice::from_raw_parts_mut(rejected, len);
            mask.fill(0);
            for &i in &fit.rejected {
                mask[i] = 1;
            }
        }
        Ok(())
    })
}
