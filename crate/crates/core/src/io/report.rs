//! Key/value text reports. Floats are printed with 12 significant digits so
//! that reports are byte-identical across runs and platforms.

use crate::fitting::FitResult;
use crate::model::BackgroundDecomposition;
use crate::statistics::{PhotocountStats, PulseCountSeries};

pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.11e}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.text(key, fmt_num(value))
    }

    pub fn int(&mut self, key: impl Into<String>, value: u64) -> &mut Self {
        self.text(key, value.to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        Report {
            entries: text
                .lines()
                .filter_map(|l| l.split_once(" = "))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

pub fn stats_report(
    series: &PulseCountSeries,
    stats: &PhotocountStats,
    background: Option<&BackgroundDecomposition>,
) -> Report {
    let mut r = Report::new();
    r.int("n_pulses", stats.n_pulses)
        .int("total_counts", series.total())
        .int("rejected_count", series.rejected_count)
        .num("rep_period", series.rep_period);
    for (n, p) in stats.probabilities.iter().enumerate() {
        r.num(format!("P({n})"), *p);
    }
    r.num("mean", stats.mean);
    match (stats.variance_norm, stats.mandel_q) {
        (Some(v), Some(q)) => r.num("V", v).num("Q", q),
        _ => r.text("V", "no-signal").text("Q", "no-signal"),
    };
    match background {
        Some(b) => r
            .num("efficiency", b.efficiency)
            .num("background_mean", b.background_mean),
        None => r.text("efficiency", "n/a").text("background_mean", "n/a"),
    };
    r
}

pub fn fit_report(kind: &str, fit: &FitResult) -> Report {
    let mut r = Report::new();
    r.text("fit", kind);
    for p in &fit.parameters {
        r.num(p.name, p.value).num(format!("{}.stderr", p.name), p.uncertainty);
    }
    r.num("residual_norm", fit.residual_norm)
        .int("n_points_used", fit.n_points_used as u64)
        .int("n_points_rejected", fit.n_points_rejected as u64)
        .text(
            "rejected",
            format!(
                "[{}]",
                fit.rejected.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
            ),
        )
        .int("iterations", fit.iterations as u64)
        .text("converged", fit.converged.to_string());
    if let Some(regime) = fit.limiting_regime {
        r.text("limiting_regime", regime.to_string());
    }
    r
}
