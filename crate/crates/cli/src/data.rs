//! Sample CSV files: a `# msdest v1 ...` line, then `y[,x1..]`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use msdest::{Model, Sample};

pub const HEADER: &str = "# msdest v1";

pub fn write_sample(path: &Path, sample: &Sample, meta: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(f, "{HEADER} {meta}")?;
    let mut w = csv::Writer::from_writer(f);
    let dx = sample.covariate_dim();
    let mut cols = vec!["y".to_string()];
    cols.extend((1..=dx).map(|j| format!("x{j}")));
    w.write_record(&cols)?;
    for t in 0..sample.len() {
        let mut row = vec![sample.y()[t].to_string()];
        if let Some(x) = sample.x_row(t) {
            row.extend(x.iter().map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a sample and check its columns against `model`.
pub fn read_sample(path: &Path, model: &Model) -> Result<Sample> {
    let mut r = BufReader::new(
        std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let mut first = String::new();
    r.read_line(&mut first)?;
    if !first.starts_with(HEADER) {
        bail!(
            "{} does not start with the {HEADER:?} header",
            path.display()
        );
    }
    let mut csv = csv::Reader::from_reader(r);
    let cols: Vec<String> = csv
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if cols.first().map(String::as_str) != Some("y") {
        bail!("first data column must be y");
    }
    let dx = cols.len() - 1;
    if dx != model.covariate_dim() {
        bail!(
            "model {} expects {} covariate column(s), data has {dx}",
            model.id(),
            model.covariate_dim()
        );
    }
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("row {} of {}", i + 1, path.display()))?;
        y.push(vals[0]);
        x.extend_from_slice(&vals[1..]);
    }
    Ok(if dx == 0 {
        Sample::unconditional(y)?
    } else {
        Sample::conditional(y, x, dx)?
    })
}
