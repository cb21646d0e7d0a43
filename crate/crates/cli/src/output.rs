//! Result files.
//!
//! `trace.csv` has the header
//! `iteration,x_1..x_d,p_1..p_d,queries_cumulative,oracle_welfare`.
//! What a row means depends on the algorithm:
//!
//! | algorithm | one row per | `x` | `p` | `oracle_welfare` |
//! |---|---|---|---|---|
//! | owel, owel-ud | outer iterate, then a final row | iterate (final: average bundle) | inner price | exact `SW(p)` |
//! | buntoprice | restart | validation mean | candidate price | exact `SW(p)` |
//! | limited-supply | episode | units sold | posted (base) price | realized `Z_tau` |
//! | structural-checks | trial | bundle | dual prices | `SW(x)` |
//!
//! `oracle_welfare` is empty when the ground-truth oracle is off. Numbers are
//! written in Rust's shortest round-trip form, so equal runs give equal
//! bytes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub bundle: Vec<f64>,
    pub price: Vec<f64>,
    pub queries: u64,
    pub oracle_welfare: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema: u32,
    pub algorithm: String,
    pub seed: u64,
    pub query_count: u64,
    pub benchmark: Option<f64>,
    pub achieved: Option<f64>,
    pub gap: Option<f64>,
    pub tolerance: Option<f64>,
    /// `None` when the gap cannot be judged (oracle off).
    pub passed: Option<bool>,
    pub runtime_seconds: f64,
    pub config_hash: String,
    pub details: serde_json::Value,
}

pub fn trace_header(d: usize) -> Vec<String> {
    let mut h = vec!["iteration".to_string()];
    h.extend((1..=d).map(|j| format!("x_{j}")));
    h.extend((1..=d).map(|j| format!("p_{j}")));
    h.push("queries_cumulative".into());
    h.push("oracle_welfare".into());
    h
}

pub fn trace_csv(d: usize, rows: &[TraceRow]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trace_header(d))?;
    for r in rows {
        anyhow::ensure!(
            r.bundle.len() == d && r.price.len() == d,
            "trace row {} has the wrong dimension",
            r.iteration
        );
        let mut rec = vec![r.iteration.to_string()];
        rec.extend(r.bundle.iter().map(f64::to_string));
        rec.extend(r.price.iter().map(f64::to_string));
        rec.push(r.queries.to_string());
        rec.push(r.oracle_welfare.map(|w| w.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Writes `trace.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, d: usize, rows: &[TraceRow], summary: &Summary) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("trace.csv"), &trace_csv(d, rows)?)?;
    let mut json = serde_json::to_vec_pretty(summary)?;
    json.push(b'\n');
    write_atomic(&dir.join("summary.json"), &json)?;
    Ok(())
}
