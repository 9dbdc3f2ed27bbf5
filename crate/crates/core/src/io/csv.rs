//! Plot-ready CSV tables. A header row is mandatory; lines starting with `#`
//! are comments.

use crate::error::{Error, Result};
use crate::fitting::{SaturationCurve, SaturationPoint};
use crate::simulator::GroundTruth;
use crate::statistics::{QCurve, QPoint, StartStopHistogram, VarianceTrace};

use super::report::fmt_num;

pub const NO_SIGNAL: &str = "no-signal";

pub fn qcurve_to_csv(curve: &QCurve) -> String {
    let mut out = String::from("k,T,q,stderr\n");
    for p in &curve.points {
        let q = p.q.map(fmt_num).unwrap_or_else(|| NO_SIGNAL.into());
        out.push_str(&format!("{},{},{},{}\n", p.k, fmt_num(p.t), q, fmt_num(p.stderr)));
    }
    out
}

pub fn variance_to_csv(trace: &VarianceTrace) -> String {
    let mut out = format!("# window={}\nindex,mean,V_W\n", trace.window);
    for e in &trace.entries {
        out.push_str(&format!("{},{},{}\n", e.start, fmt_num(e.mean), fmt_num(e.v_w)));
    }
    out
}

/// Bin centers in seconds.
pub fn histogram_to_csv(hist: &StartStopHistogram) -> String {
    let mut out = String::from("bin_center,count\n");
    for (i, c) in hist.counts.iter().enumerate() {
        out.push_str(&format!("{},{}\n", fmt_num(hist.bin_center(i) / crate::PS_PER_S), c));
    }
    out
}

pub fn saturation_to_csv(curve: &SaturationCurve) -> String {
    let mut out = String::from("pulse_energy,rate,integration_time\n");
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_num(p.pulse_energy),
            fmt_num(p.rate),
            fmt_num(p.integration_time)
        ));
    }
    out
}

pub fn truth_to_csv(truth: &GroundTruth) -> String {
    let mut out = format!("# n_pulses={}\nkind,pulse_start,pulse_end,value\n", truth.n_pulses);
    for s in &truth.segments {
        out.push_str(&format!("state,{},{},{}\n", s.start, s.end, s.state.as_str()));
    }
    for &p in &truth.emissions {
        out.push_str(&format!("emit,{},{},1\n", p, p + 1));
    }
    out
}

struct Table<'a> {
    columns: Vec<&'a str>,
    rows: Vec<(u64, Vec<&'a str>)>,
}

fn parse_table<'a>(text: &'a str, expected: &[&str]) -> Result<Table<'a>> {
    let mut columns: Option<Vec<&str>> = None;
    let mut rows = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let here = offset;
        offset += line.len() as u64;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match &columns {
            None => {
                if cells != expected {
                    return Err(Error::format(
                        here,
                        format!("expected columns `{}`, found `{}`", expected.join(","), line),
                    ));
                }
                columns = Some(cells);
            }
            Some(cols) => {
                if cells.len() != cols.len() {
                    return Err(Error::format(here, format!("expected {} cells", cols.len())));
                }
                rows.push((here, cells));
            }
        }
    }
    let columns = columns.ok_or_else(|| Error::format(0, "missing header row"))?;
    Ok(Table { columns, rows })
}

fn cell_f64(offset: u64, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::format(offset, format!("`{s}` is not a number")))
}

pub fn qcurve_from_csv(text: &str) -> Result<QCurve> {
    let table = parse_table(text, &["k", "T", "q", "stderr"])?;
    debug_assert_eq!(table.columns.len(), 4);
    let mut points = Vec::with_capacity(table.rows.len());
    for (offset, cells) in &table.rows {
        let k = cells[0]
            .parse::<u64>()
            .map_err(|_| Error::format(*offset, format!("`{}` is not a window length", cells[0])))?;
        let q = if cells[2] == NO_SIGNAL {
            None
        } else {
            Some(cell_f64(*offset, cells[2])?)
        };
        points.push(QPoint {
            k,
            t: cell_f64(*offset, cells[1])?,
            q,
            stderr: cell_f64(*offset, cells[3])?,
            n_windows: 0,
        });
    }
    let rep_period = points
        .iter()
        .find(|p| p.k > 0)
        .map(|p| p.t / p.k as f64)
        .ok_or_else(|| Error::format(0, "empty Q(T) table"))?;
    Ok(QCurve { rep_period, points })
}

pub fn saturation_from_csv(text: &str) -> Result<SaturationCurve> {
    let table = parse_table(text, &["pulse_energy", "rate", "integration_time"])?;
    let points = table
        .rows
        .iter()
        .map(|(offset, c)| {
            Ok(SaturationPoint {
                pulse_energy: cell_f64(*offset, c[0])?,
                rate: cell_f64(*offset, c[1])?,
                integration_time: cell_f64(*offset, c[2])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SaturationCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qcurve_round_trip() {
        let curve = QCurve {
            rep_period: 0.5e-6,
            points: vec![
                QPoint {
                    k: 1,
                    t: 0.5e-6,
                    q: Some(-0.0445),
                    stderr: 1e-3,
                    n_windows: 10,
                },
                QPoint {
                    k: 2,
                    t: 1e-6,
                    q: None,
                    stderr: f64::NAN,
                    n_windows: 9,
                },
            ],
        };
        let text = qcurve_to_csv(&curve);
        assert!(text.starts_with("k,T,q,stderr\n1,5.00000000000e-7,-4.45000000000e-2,"));
        let back = qcurve_from_csv(&text).unwrap();
        assert_eq!(back.points[0].q, Some(-0.0445));
        assert_eq!(back.points[1].q, None);
        assert!(back.points[1].stderr.is_nan());
        assert!((back.rep_period - 0.5e-6).abs() < 1e-18);
    }

    #[test]
    fn column_mismatch_is_format_error() {
        let err = qcurve_from_csv("pulse_energy,rate,integration_time\n1,2,3\n").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
        let err = saturation_from_csv("# c\npulse_energy,rate,integration_time\n1,x,3\n").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 39, .. }), "{err}");
    }
}
