//! Plot-data emission: per-figure CSV series and a small self-contained
//! SVG renderer for line and CDF plots. Output is byte-stable across
//! reruns.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{primary_metric, wilson_interval, ExperimentKind, ResultTable};
use crate::error::{Error, Result};

/// One named series of (x, y) points.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn series_labels(table: &ResultTable, kind: ExperimentKind) -> Vec<(String, String, Option<f64>)> {
    // (label, scheme filter, sweep filter). CDF kinds with a multi-value
    // sweep split series per sweep value.
    let schemes: BTreeSet<&str> = table.rows.iter().map(|r| r.scheme.as_str()).collect();
    let sweeps: BTreeSet<u64> = table.rows.iter().map(|r| r.sweep_value.to_bits()).collect();
    let multi_sweep_cdf = matches!(
        kind,
        ExperimentKind::EnergyCdf | ExperimentKind::IcsiCdf | ExperimentKind::ParticipationCdf
    ) && sweeps.len() > 1;

    let mut out = Vec::new();
    for scheme in schemes {
        if multi_sweep_cdf {
            for bits in &sweeps {
                let sweep = f64::from_bits(*bits);
                out.push((format!("{scheme}@{sweep}"), scheme.to_string(), Some(sweep)));
            }
        } else {
            out.push((scheme.to_string(), scheme.to_string(), None));
        }
    }
    out
}

fn finite(values: impl Iterator<Item = f64>) -> Vec<f64> {
    values.filter(|v| v.is_finite()).collect()
}

/// Empirical CDF of the metric values: sorted x, y in (0, 1].
fn cdf_series(table: &ResultTable, kind: ExperimentKind) -> Vec<Series> {
    let metric = primary_metric(kind);
    series_labels(table, kind)
        .into_iter()
        .filter_map(|(label, scheme, sweep)| {
            let mut vals = finite(
                table
                    .rows
                    .iter()
                    .filter(|r| {
                        r.scheme == scheme
                            && r.metric == metric
                            && sweep.map_or(true, |s| r.sweep_value == s)
                    })
                    .map(|r| r.value),
            );
            if vals.is_empty() {
                return None;
            }
            vals.sort_by(f64::total_cmp);
            let n = vals.len() as f64;
            let points =
                vals.into_iter().enumerate().map(|(i, v)| (v, (i + 1) as f64 / n)).collect();
            Some(Series { label, points })
        })
        .collect()
}

/// Mean of the metric per sweep value; outage additionally carries the
/// Wilson 95% interval per point.
fn sweep_series(table: &ResultTable, kind: ExperimentKind) -> Vec<Series> {
    let metric = primary_metric(kind);
    let sweeps: BTreeSet<u64> = table.rows.iter().map(|r| r.sweep_value.to_bits()).collect();
    let schemes: BTreeSet<&str> = table.rows.iter().map(|r| r.scheme.as_str()).collect();
    schemes
        .into_iter()
        .map(|scheme| {
            let points = sweeps
                .iter()
                .filter_map(|bits| {
                    let sweep = f64::from_bits(*bits);
                    let vals = finite(
                        table.values(scheme, sweep, metric).into_iter(),
                    );
                    if vals.is_empty() {
                        return None;
                    }
                    Some((sweep, vals.iter().sum::<f64>() / vals.len() as f64))
                })
                .collect();
            Series { label: scheme.to_string(), points }
        })
        .collect()
}

fn write_series_csv(path: &Path, series: &[Series]) -> Result<()> {
    let mut w = csv::Writer::from_writer(fs::File::create(path)?);
    w.write_record(["x", "y", "scheme"])?;
    for s in series {
        for (x, y) in &s.points {
            w.write_record(&[x.to_string(), y.to_string(), s.label.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_outage_csv(path: &Path, table: &ResultTable) -> Result<()> {
    let sweeps: BTreeSet<u64> = table.rows.iter().map(|r| r.sweep_value.to_bits()).collect();
    let schemes: BTreeSet<String> =
        table.rows.iter().map(|r| r.scheme.clone()).collect();
    let mut w = csv::Writer::from_writer(fs::File::create(path)?);
    w.write_record(["x", "y", "y_lo", "y_hi", "scheme"])?;
    for scheme in &schemes {
        for bits in &sweeps {
            let sweep = f64::from_bits(*bits);
            let vals = table.values(scheme, sweep, "outage");
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as u64;
            let hits = vals.iter().filter(|&&v| v == 1.0).count() as u64;
            let (lo, hi) = wilson_interval(hits, n);
            w.write_record(&[
                sweep.to_string(),
                (hits as f64 / n as f64).to_string(),
                lo.to_string(),
                hi.to_string(),
                scheme.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

const SVG_COLORS: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

/// Minimal line plot: axes, tick labels, legend, one polyline per series.
fn render_svg(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 36.0, 50.0);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.0), b.max(p.0))
    });
    let (mut y0, mut y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.1), b.max(p.1))
    });
    if !(x0.is_finite() && x1.is_finite()) {
        x0 = 0.0;
        x1 = 1.0;
    }
    if !(y0.is_finite() && y1.is_finite()) {
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\
         <text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{title}</text>",
        w / 2.0
    );
    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>",
        h - mb,
        w - mr,
        h - mb,
        h - mb
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{fx:.3}</text>\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{fy:.3}</text>",
            px(fx),
            h - mb + 18.0,
            ml - 6.0,
            py(fy) + 4.0
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>\
         <text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>",
        (ml + w - mr) / 2.0,
        h - 12.0,
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = SVG_COLORS[i % SVG_COLORS.len()];
        let pts: Vec<String> =
            s.points.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
        let ly = mt + 14.0 * i as f64;
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            w - mr - 150.0,
            w - mr - 130.0,
            w - mr - 124.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>");
    svg
}

/// FL convergence: mean loss per round per scheme.
fn fl_series(table: &ResultTable) -> Vec<Series> {
    let schemes: BTreeSet<&str> = table.rows.iter().map(|r| r.scheme.as_str()).collect();
    let rounds: BTreeSet<u64> = table.rows.iter().map(|r| r.sweep_value.to_bits()).collect();
    schemes
        .into_iter()
        .map(|scheme| {
            let points = rounds
                .iter()
                .filter_map(|bits| {
                    let round = f64::from_bits(*bits);
                    let vals = finite(table.values(scheme, round, "loss").into_iter());
                    if vals.is_empty() {
                        return None;
                    }
                    Some((round, vals.iter().sum::<f64>() / vals.len() as f64))
                })
                .collect();
            Series { label: scheme.to_string(), points }
        })
        .collect()
}

/// Writes the per-figure CSV (and optional SVG) for one experiment's
/// result table. Returns the created paths; idempotent.
pub fn emit_plotdata(
    table: &ResultTable,
    kind: ExperimentKind,
    out_dir: &Path,
    with_svg: bool,
) -> Result<Vec<PathBuf>> {
    if table.rows.iter().all(|r| r.metric != primary_metric(kind)) {
        return Err(Error::EmptyTable(kind.name().to_string()));
    }
    fs::create_dir_all(out_dir)?;
    let mut outputs = Vec::new();

    let (series, x_label, y_label) = match kind {
        ExperimentKind::OutageVsPmax => {
            let path = out_dir.join(format!("{}_plot.csv", kind.name()));
            write_outage_csv(&path, table)?;
            outputs.push(path);
            (sweep_series(table, kind), "P_max (dBm)", "outage rate")
        }
        ExperimentKind::EnergyCdf | ExperimentKind::IcsiCdf => {
            let s = cdf_series(table, kind);
            let path = out_dir.join(format!("{}_plot.csv", kind.name()));
            write_series_csv(&path, &s)?;
            outputs.push(path);
            (s, "transmit energy (J)", "CDF")
        }
        ExperimentKind::ParticipationCdf => {
            let s = cdf_series(table, kind);
            let path = out_dir.join(format!("{}_plot.csv", kind.name()));
            write_series_csv(&path, &s)?;
            outputs.push(path);
            (s, "participating SNs", "CDF")
        }
        ExperimentKind::EnergyVsLatency => {
            let s = sweep_series(table, kind);
            let path = out_dir.join(format!("{}_plot.csv", kind.name()));
            write_series_csv(&path, &s)?;
            outputs.push(path);
            (s, "T_eff (ms)", "mean transmit energy (J)")
        }
        ExperimentKind::EnergyVsN | ExperimentKind::CompVsComm => {
            let s = sweep_series(table, kind);
            let path = out_dir.join(format!("{}_plot.csv", kind.name()));
            write_series_csv(&path, &s)?;
            outputs.push(path);
            (s, "number of SNs", "mean energy (J)")
        }
        ExperimentKind::FlConvergence => {
            let s = fl_series(table);
            let path = out_dir.join(format!("{}_plot.csv", kind.name()));
            write_series_csv(&path, &s)?;
            outputs.push(path);
            (s, "round", "training loss")
        }
    };

    if with_svg {
        let svg = render_svg(&series, kind.name(), x_label, y_label);
        let path = out_dir.join(format!("{}.svg", kind.name()));
        fs::write(&path, svg)?;
        outputs.push(path);
    }
    Ok(outputs)
}
