use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{dispersion, PulseCountSeries};
use crate::error::{Error, Result};

/// Mandel parameter of the photocount summed over `k` consecutive pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPoint {
    pub k: u64,
    /// Observation time `k·τ_rep` in seconds.
    pub t: f64,
    /// `None` when the series has no counts.
    pub q: Option<f64>,
    /// Block-bootstrap standard error; NaN when fewer than two blocks fit.
    pub stderr: f64,
    pub n_windows: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QCurve {
    pub rep_period: f64,
    pub points: Vec<QPoint>,
}

impl QCurve {
    pub fn get(&self, k: u64) -> Option<&QPoint> {
        self.points.iter().find(|p| p.k == k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QCurveOptions {
    pub bootstrap_reps: usize,
    /// Upper bound on the number of non-overlapping blocks.
    pub max_blocks: usize,
    pub seed: u64,
}

impl Default for QCurveOptions {
    fn default() -> Self {
        QCurveOptions {
            bootstrap_reps: 200,
            max_blocks: 32,
            seed: 0x51ce_b00c,
        }
    }
}

/// Powers of two from 1 up to `min(n_pulses, 100_000)`.
pub fn default_k_grid(n_pulses: usize) -> Vec<u64> {
    let limit = n_pulses.min(100_000) as u64;
    std::iter::successors(Some(1u64), |k| Some(k * 2))
        .take_while(|&k| k <= limit)
        .collect()
}

pub fn mandel_q_curve(series: &PulseCountSeries, ks: &[u64]) -> Result<QCurve> {
    mandel_q_curve_with(series, ks, &QCurveOptions::default())
}

/// Q(kτ_rep) from all windows sliding by one pulse.
///
/// The standard error comes from a bootstrap over non-overlapping blocks of
/// length `max(k, n / max_blocks)`; windows straddling block edges are left
/// out of the resampled estimates only.
pub fn mandel_q_curve_with(series: &PulseCountSeries, ks: &[u64], opts: &QCurveOptions) -> Result<QCurve> {
    let n = series.len() as u64;
    if n == 0 {
        return Err(Error::param("series", "must contain at least one pulse"));
    }
    if let Some(w) = ks.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "ks",
            format!("must be strictly increasing, got {} then {}", w[0], w[1]),
        ));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::param("ks", format!("k = {k} outside 1..={n}")));
    }
    let prefix = series.prefix_sums();
    let points = ks
        .par_iter()
        .map(|&k| q_point(&prefix, series.rep_period, k, opts))
        .collect();
    Ok(QCurve {
        rep_period: series.rep_period,
        points,
    })
}

#[derive(Clone, Copy, Default)]
struct Moments {
    count: u64,
    sum: u128,
    sum_sq: u128,
}

impl Moments {
    fn over(prefix: &[u64], k: usize, from: usize, to: usize) -> Self {
        let mut m = Moments::default();
        for i in from..to {
            let s = (prefix[i + k] - prefix[i]) as u128;
            m.count += 1;
            m.sum += s;
            m.sum_sq += s * s;
        }
        m
    }

    fn add(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn q(&self) -> Option<f64> {
        dispersion(self.count, self.sum, self.sum_sq).map(|v| v - 1.0)
    }
}

fn q_point(prefix: &[u64], rep_period: f64, k: u64, opts: &QCurveOptions) -> QPoint {
    let n = prefix.len() - 1;
    let ku = k as usize;
    let all = Moments::over(prefix, ku, 0, n - ku + 1);

    let block = ku.max(n.div_ceil(opts.max_blocks.max(1)));
    let n_blocks = n / block;
    let stderr = if n_blocks >= 2 {
        let blocks: Vec<Moments> = (0..n_blocks)
            .map(|b| Moments::over(prefix, ku, b * block, (b + 1) * block - ku + 1))
            .collect();
        bootstrap_stderr(&blocks, opts.bootstrap_reps, opts.seed ^ k.rotate_left(17))
    } else {
        f64::NAN
    };

    QPoint {
        k,
        t: k as f64 * rep_period,
        q: all.q(),
        stderr,
        n_windows: all.count,
    }
}

fn bootstrap_stderr(blocks: &[Moments], reps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut pooled = Moments::default();
        for _ in 0..blocks.len() {
            pooled.add(&blocks[rng.random_range(0..blocks.len())]);
        }
        if let Some(q) = pooled.q() {
            values.push(q);
        }
    }
    if values.len() < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}
