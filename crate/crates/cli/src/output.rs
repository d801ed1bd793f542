use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use hystup::ChainStore;
use serde::Serialize;

/// Numbers are written in shortest round-trip form so files re-read exactly.
pub fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Columns `step`, one per parameter, `logL`.
pub fn write_chain(path: &Path, chains: &ChainStore, replica: usize) -> anyhow::Result<()> {
    let mut header = vec!["step".to_string()];
    header.extend(chains.param_names.iter().cloned());
    header.push("logL".into());
    let rows = (0..chains.len()).map(|s| {
        let mut row = vec![s as f64];
        row.extend_from_slice(chains.sample(replica, s));
        row.push(chains.log_l[replica][s]);
        row
    });
    write_csv(path, &header, rows)
}

/// Parameter names and per-step parameter rows of a chain file.
pub fn read_chain(path: &Path) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < 3 || header[0] != "step" || header[header.len() - 1] != "logL" {
        bail!("{} is not a chain file", path.display());
    }
    let n = header.len() - 2;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .take(n)
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{} row {}", path.display(), i + 1))?;
        rows.push(row);
    }
    Ok((header[1..=n].to_vec(), rows))
}
