use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bsmd_core::demos::DemoReport;
use bsmd_core::workload::{moving_average, MetricSeries, Snapshot};
use plotters::prelude::*;

/// Writes only inside `root`.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().context("flushing csv")?;
        self.write(name, bytes)
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_metrics(out: &OutDir, series: &MetricSeries) -> Result<()> {
    out.csv(
        "metrics.csv",
        &["minute", "sent", "served", "mean_latency_s", "throughput"],
        series.minutes.iter().map(|m| {
            vec![m.minute.to_string(), m.sent.to_string(), m.served.to_string(), opt(m.mean_latency_s), opt(m.throughput)]
        }),
    )?;
    let s = &series.summary;
    out.csv(
        "summary.csv",
        &[
            "population",
            "total_messages",
            "served",
            "dropped",
            "avg_latency_s",
            "sd_latency_s",
            "avg_throughput",
            "sd_throughput",
            "max_sent_per_minute",
        ],
        [vec![
            s.population.to_string(),
            s.total_messages.to_string(),
            s.served.to_string(),
            s.dropped.to_string(),
            num(s.avg_latency_s),
            num(s.sd_latency_s),
            num(s.avg_throughput),
            num(s.sd_throughput),
            s.max_sent_per_minute.to_string(),
        ]],
    )?;
    Ok(())
}

pub fn write_snapshots(out: &OutDir, day_start: u64, snaps: &[Snapshot]) -> Result<()> {
    out.csv(
        "snapshots.csv",
        &["hour", "sent", "served", "dropped", "pending"],
        snaps.iter().map(|s| {
            let h = s.at.saturating_sub(day_start) as f64 / 3_600_000.0;
            vec![num(h), s.sent.to_string(), s.served.to_string(), s.dropped.to_string(), s.pending.to_string()]
        }),
    )?;
    Ok(())
}

pub fn write_report(out: &OutDir, report: &DemoReport) -> Result<()> {
    out.csv(&format!("{}.csv", report.demo), &report.header, report.rows.iter().cloned())?;
    out.csv(
        &format!("{}_checks.csv", report.demo),
        &["check", "passed", "detail"],
        report.checks.iter().map(|c| vec![c.name.clone(), c.passed.to_string(), c.detail.clone()]),
    )?;
    Ok(())
}

pub fn print_report(report: &DemoReport) {
    for c in &report.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{mark}  {}", c.name);
        } else {
            println!("{mark}  {} ({})", c.name, c.detail);
        }
    }
}

/// Per-minute series with a 15-minute moving average, as an SVG line chart.
pub fn plot_series(out: &OutDir, name: &str, caption: &str, series: &[Option<f64>]) -> Result<()> {
    let filled: Vec<f64> = series.iter().map(|x| x.unwrap_or(0.0)).collect();
    let smooth = moving_average(&filled, 15);
    let top = filled.iter().chain(&smooth).copied().fold(0.0, f64::max).max(1e-9) * 1.05;
    let path = out.path(name);
    let root = SVGBackend::new(&path, (960, 400)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(32)
        .y_label_area_size(56)
        .build_cartesian_2d(0f64..filled.len().max(1) as f64, 0f64..top)?;
    chart.configure_mesh().x_desc("minute of day").draw()?;
    chart.draw_series(LineSeries::new(filled.iter().enumerate().map(|(i, y)| (i as f64, *y)), BLUE.mix(0.35)))?;
    chart.draw_series(LineSeries::new(smooth.iter().enumerate().map(|(i, y)| (i as f64, *y)), RED))?;
    root.present()?;
    Ok(())
}
