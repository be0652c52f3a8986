use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use tnlab::Result;

use crate::config::{Format, RunConfig, SCHEMA_VERSION};

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: u32,
    run_config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `rows` as one table. CSV files open with a `#` line carrying the
/// schema version and the run configuration as JSON.
pub fn write_table<R: Serialize>(cfg: &RunConfig, stem: &str, key: &str, rows: &[R]) -> Result<()> {
    let path = cfg.path(stem);
    let mut w = create(&path)?;
    match cfg.format {
        Format::Json => {
            let body = serde_json::json!({ key: rows });
            serde_json::to_writer_pretty(&mut w, &Document { schema_version: SCHEMA_VERSION, run_config: cfg, body })?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(w, "# schema_version={SCHEMA_VERSION} run_config={}", serde_json::to_string(cfg)?)?;
            let mut csv = csv::Writer::from_writer(&mut w);
            for r in rows {
                csv.serialize(r).map_err(|e| tnlab::Error::Internal(format!("csv: {e}")))?;
            }
            csv.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a structured JSON document regardless of `--format`.
pub fn write_json<T: Serialize>(cfg: &RunConfig, stem: &str, body: T) -> Result<()> {
    let mut w = create(&cfg.out_dir.join(format!("{stem}.json")))?;
    serde_json::to_writer_pretty(&mut w, &Document { schema_version: SCHEMA_VERSION, run_config: cfg, body })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
