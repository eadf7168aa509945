//! CSV and JSON outputs and run manifests.
//!
//! Every CSV file starts with a `# cwp-<table> v1` comment line followed by
//! the header; floats are written with 17 significant digits so that values
//! round-trip exactly.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exact::ProportionsChain;
use crate::landscape::LandscapeReport;
use crate::mixing::MixingRecord;

pub const CSV_VERSION: u32 = 1;

/// Format a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Buffered CSV writer that emits the versioned comment line first.
pub struct CsvTable {
    inner: csv::Writer<File>,
}

impl CsvTable {
    pub fn create(path: &Path, table: &str, header: &[String]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = File::create(path)?;
        writeln!(f, "# cwp-{table} v{CSV_VERSION}")?;
        let mut inner = csv::Writer::from_writer(f);
        inner.write_record(header)?;
        Ok(CsvTable { inner })
    }

    pub fn row(&mut self, fields: Vec<String>) -> Result<()> {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Read a table written by [`CsvTable`]: returns the header and the rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = rdr.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for r in rdr.records() {
        rows.push(r?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// State table: `index, n_1..n_q, x_1..x_q, free_energy, pi`.
pub fn write_states(path: &Path, pc: &ProportionsChain) -> Result<()> {
    let q = pc.params.q;
    let mut header = vec!["index".to_string()];
    header.extend((1..=q).map(|k| format!("n_{k}")));
    header.extend((1..=q).map(|k| format!("x_{k}")));
    header.push("free_energy".into());
    header.push("pi".into());
    let mut t = CsvTable::create(path, "states", &header)?;
    let f = pc.free_energies();
    for i in 0..pc.len() {
        let mut row = vec![i.to_string()];
        row.extend(pc.space.state(i).iter().map(|c| c.to_string()));
        row.extend(pc.space.proportion(i).iter().map(|&x| fmt17(x)));
        row.push(fmt17(f[i]));
        row.push(fmt17(pc.chain.stationary[i]));
        t.row(row)?;
    }
    t.finish()
}

/// Edge list: `from, to, k, l, rate` (spins `k`, `l` are 1-based).
pub fn write_edges(path: &Path, pc: &ProportionsChain) -> Result<()> {
    let header: Vec<String> = ["from", "to", "k", "l", "rate"].iter().map(|s| s.to_string()).collect();
    let mut t = CsvTable::create(path, "edges", &header)?;
    for x in 0..pc.len() {
        for (k, l, y) in pc.space.moves(x) {
            t.row(vec![
                x.to_string(),
                y.to_string(),
                (k + 1).to_string(),
                (l + 1).to_string(),
                fmt17(pc.chain.rate(x, y)),
            ])?;
        }
    }
    t.finish()
}

pub fn write_critical_points(path: &Path, r: &LandscapeReport) -> Result<()> {
    let q = r.q;
    let mut header: Vec<String> = vec!["class".into(), "branch".into(), "root".into()];
    header.extend((1..=q).map(|k| format!("x_{k}")));
    header.extend(["free_energy", "morse_index", "gradient_norm"].iter().map(|s| s.to_string()));
    let mut t = CsvTable::create(path, "critical-points", &header)?;
    for c in &r.critical_points {
        let mut row = vec![format!("{:?}", c.class), c.branch.to_string(), format!("{:?}", c.root)];
        row.extend(c.x.iter().map(|&v| fmt17(v)));
        row.push(fmt17(c.free_energy));
        row.push(c.index.map_or("degenerate".into(), |i| i.to_string()));
        row.push(fmt17(c.gradient_norm));
        t.row(row)?;
    }
    t.finish()
}

pub const LADDER_HEADER: [&str; 12] =
    ["q", "beta", "n", "delta", "rate_kind", "states", "t_mix", "theta", "ratio", "limit", "rel_err", "worst_start"];

pub fn write_ladder(path: &Path, rows: &[MixingRecord]) -> Result<()> {
    let header: Vec<String> = LADDER_HEADER.iter().map(|s| s.to_string()).collect();
    let mut t = CsvTable::create(path, "mixing", &header)?;
    for r in rows {
        t.row(vec![
            r.q.to_string(),
            fmt17(r.beta),
            r.n.to_string(),
            fmt17(r.delta),
            r.kind.to_string(),
            r.states.to_string(),
            fmt17(r.t_mix),
            fmt17(r.theta),
            fmt17(r.ratio),
            fmt17(r.limit),
            fmt17(r.rel_err),
            r.worst_start.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
        ])?;
    }
    t.finish()
}

/// Curve table with a leading `t` column.
pub fn write_curve(path: &Path, table: &str, columns: &[String], rows: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(columns.iter().cloned());
    let mut t = CsvTable::create(path, table, &header)?;
    for (time, vals) in rows {
        let mut row = vec![fmt17(*time)];
        row.extend(vals.iter().map(|&v| fmt17(v)));
        t.row(row)?;
    }
    t.finish()
}

/// Record of a command invocation sufficient to repeat it.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector (without the program name).
    pub argv: Vec<String>,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}
