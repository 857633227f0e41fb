//! CSV, JSON and SVG artifacts for Monte Carlo summaries and profiles.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{CoordSummary, McSummary, ProfileCurve};
use crate::error::{Error, Result};

/// Format header written as the first line of every CSV file.
pub const FORMAT_HEADER: &str = "# msdest v1";

fn csv_file(path: &Path, header: &[String]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{FORMAT_HEADER}")?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header)?;
    Ok(w)
}

fn names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}{j}")).collect()
}

fn hdr(fixed: &[&str], extra: Vec<String>) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).chain(extra).collect()
}

/// Writes `estimates.csv`, `normalized.csv`, `qq.csv`, `hist.csv`,
/// `summary.json` and, optionally, QQ and histogram SVGs into `dir`.
pub fn write_mc_outputs(summary: &McSummary, dir: &Path, emit_svg: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let d = summary.design.psi0.len();
    let mut written = Vec::new();

    let path = dir.join("estimates.csv");
    let mut w = csv_file(&path, &hdr(&["estimator", "replication"], names("psi", d)))?;
    for e in &summary.estimators {
        for (r, p) in &e.estimates {
            let mut row = vec![e.id.to_string(), r.to_string()];
            row.extend(p.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("normalized.csv");
    let mut w = csv_file(&path, &hdr(&["estimator", "replication"], names("z", d)))?;
    for e in &summary.estimators {
        if e.coords.iter().any(|c| c.normalized.is_empty()) {
            continue;
        }
        for (i, (r, _)) in e.estimates.iter().enumerate() {
            let mut row = vec![e.id.to_string(), r.to_string()];
            row.extend(e.coords.iter().map(|c| c.normalized[i].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("qq.csv");
    let mut w = csv_file(
        &path,
        &hdr(&["estimator", "coord", "theoretical", "sample"], vec![]),
    )?;
    for e in &summary.estimators {
        for (j, c) in e.coords.iter().enumerate() {
            for (a, b) in &c.qq {
                w.write_record([
                    e.id.to_string(),
                    (j + 1).to_string(),
                    a.to_string(),
                    b.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("hist.csv");
    let mut w = csv_file(
        &path,
        &hdr(
            &[
                "estimator",
                "coord",
                "lo",
                "hi",
                "count",
                "density",
                "normal_density",
            ],
            vec![],
        ),
    )?;
    for e in &summary.estimators {
        for (j, c) in e.coords.iter().enumerate() {
            for b in &c.hist {
                w.write_record([
                    e.id.to_string(),
                    (j + 1).to_string(),
                    b.lo.to_string(),
                    b.hi.to_string(),
                    b.count.to_string(),
                    b.density.to_string(),
                    b.normal_density.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("summary.json");
    let json = serde_json::json!({ "format": "msdest v1", "summary": summary });
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&json).map_err(|e| Error::Io(e.to_string()))?,
    )?;
    written.push(path);

    if emit_svg {
        for e in &summary.estimators {
            for (j, c) in e.coords.iter().enumerate() {
                if c.normalized.is_empty() {
                    continue;
                }
                let title = format!("{} psi{}", e.id, j + 1);
                for (kind, svg) in [("qq", qq_svg(c, &title)), ("hist", hist_svg(c, &title))] {
                    let path = dir.join(format!("{kind}_{}_{}.svg", e.id, j + 1));
                    std::fs::write(&path, svg)?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

/// `psi,mscd,mswd,kl,js`; undefined KL values are written as `inf`.
pub fn write_profile_csv(curve: &ProfileCurve, path: &Path) -> Result<()> {
    let mut w = csv_file(path, &hdr(&["psi", "mscd", "mswd", "kl", "js"], vec![]))?;
    for i in 0..curve.psi.len() {
        w.write_record(
            [
                curve.psi[i],
                curve.mscd[i],
                curve.mswd[i],
                curve.kl[i],
                curve.js[i],
            ]
            .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

const SIZE: f64 = 400.0;
const PAD: f64 = 40.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (SIZE - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        SIZE - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (SIZE - 2.0 * PAD)
    }
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        SIZE / 2.0
    )
}

fn qq_svg(c: &CoordSummary, title: &str) -> String {
    let lim =
        c.qq.iter()
            .fold(3.0f64, |m, (a, b)| m.max(a.abs()).max(b.abs()));
    let f = Frame {
        x: (-lim, lim),
        y: (-lim, lim),
    };
    let mut s = svg_open(&format!("QQ {title}"));
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"red\"/>",
        f.px(-lim),
        f.py(-lim),
        f.px(lim),
        f.py(lim)
    );
    for (a, b) in &c.qq {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"black\"/>",
            f.px(*a),
            f.py(*b)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn hist_svg(c: &CoordSummary, title: &str) -> String {
    let lo = c.hist.first().map_or(-4.0, |b| b.lo.min(-4.0));
    let hi = c.hist.last().map_or(4.0, |b| b.hi.max(4.0));
    let top = c.hist.iter().fold(0.45f64, |m, b| m.max(b.density)) * 1.05;
    let f = Frame {
        x: (lo, hi),
        y: (0.0, top),
    };
    let mut s = svg_open(&format!("Histogram {title}"));
    for b in &c.hist {
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#9ab\" stroke=\"#345\"/>",
            f.px(b.lo),
            f.py(b.density),
            f.px(b.hi) - f.px(b.lo),
            f.py(0.0) - f.py(b.density)
        );
    }
    let pts: Vec<String> = (0..=200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            format!("{:.2},{:.2}", f.px(x), f.py(crate::numeric::normal_pdf(x)))
        })
        .collect();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"red\"/>",
        pts.join(" ")
    );
    s.push_str("</svg>\n");
    s
}
