use std::fs;
use std::io::Write;
use std::path::Path;

use super::HarnessError;

pub const CSV_HEADER: [&str; 8] = [
    "policy",
    "p",
    "horizon",
    "regret",
    "runs",
    "std_error",
    "tau_mean",
    "degenerate_runs",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RegretRow {
    pub policy: String,
    pub p: f64,
    pub horizon: u64,
    pub regret: f64,
    pub runs: u64,
    pub std_error: f64,
    /// Mean stopping time over runs that left the exploration phase.
    pub tau_mean: Option<f64>,
    /// Runs containing a round whose mean is outside the metric's domain.
    pub degenerate_runs: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretTable {
    pub rows: Vec<RegretRow>,
}

impl RegretTable {
    pub fn find(&self, policy: &str, p: f64, horizon: u64) -> Option<&RegretRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && r.p == p && r.horizon == horizon)
    }

    /// Serialized CSV bytes; floats use the shortest round-trip form.
    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.policy.clone(),
                r.p.to_string(),
                r.horizon.to_string(),
                r.regret.to_string(),
                r.runs.to_string(),
                r.std_error.to_string(),
                r.tau_mean.map(|t| t.to_string()).unwrap_or_default(),
                r.degenerate_runs.to_string(),
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn from_csv_bytes(bytes: &[u8]) -> Result<Self, HarnessError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(bytes);
        let header = reader.headers().map_err(|e| HarnessError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(HarnessError::Parse {
                line: 1,
                message: format!("expected header {:?}", CSV_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| HarnessError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| record.get(i).unwrap_or_default();
            let err = |name: &str, e: &dyn std::fmt::Display| HarnessError::Parse {
                line,
                message: format!("column {name}: {e}"),
            };
            let float = |i: usize| -> Result<f64, HarnessError> {
                field(i).parse::<f64>().map_err(|e| err(CSV_HEADER[i], &e))
            };
            let int = |i: usize| -> Result<u64, HarnessError> {
                field(i).parse::<u64>().map_err(|e| err(CSV_HEADER[i], &e))
            };
            let tau_mean = match field(6) {
                "" => None,
                _ => Some(float(6)?),
            };
            rows.push(RegretRow {
                policy: field(0).to_owned(),
                p: float(1)?,
                horizon: int(2)?,
                regret: float(3)?,
                runs: int(4)?,
                std_error: float(5)?,
                tau_mean,
                degenerate_runs: int(7)?,
            });
        }
        Ok(Self { rows })
    }
}

/// Write `bytes` to `path` through a sibling temporary file and a rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_table(table: &RegretTable, path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, &table.to_csv_bytes())
}

pub fn read_table(path: &Path) -> Result<RegretTable, HarnessError> {
    let bytes = fs::read(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RegretTable::from_csv_bytes(&bytes)
}
