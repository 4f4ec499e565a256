//! File formats and atomic artifact writes.
//!
//! * Netlists: `.bench` text.
//! * Keys: one line of `0`/`1` characters, bit 0 first.
//! * Oracle tables: CSV with header `inputs,outputs`, one row per sample,
//!   each cell a `0`/`1` string in pin order; pin names, seed and source sit
//!   in a sibling `<file>.meta.json`.
//! * Models: the binary format of [`lockrnn_core::drnn::encode_model`].
//! * Loss history: CSV `epoch,train_mse,dev_mse,eta`.
//! * Reports: JSON; per-pin averages: CSV `pin_index,real_avg,predicted_avg`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lockrnn_core::attacks::PinAverage;
use lockrnn_core::bits::BitVector;
use lockrnn_core::drnn::{decode_model, encode_model, EpochRecord, LstmNetwork};
use lockrnn_core::locking::Key;
use lockrnn_core::netlist::{parse_bench, serialize_bench, Netlist};
use lockrnn_core::simulator::IoTable;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Writes `bytes` to a temporary file beside `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_netlist(path: &Path) -> Result<Netlist, CliError> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(parse_bench(&read_text(path)?, &name)?)
}

pub fn write_netlist(path: &Path, n: &Netlist) -> Result<(), CliError> {
    write_atomic(path, serialize_bench(n).as_bytes())
}

pub fn read_key(path: &Path) -> Result<Key, CliError> {
    let text = read_text(path)?;
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
    Key::parse01(line).map_err(|e| CliError::format(path, e))
}

pub fn write_key(path: &Path, k: &Key) -> Result<(), CliError> {
    write_atomic(path, format!("{}\n", k.bits().to_string01()).as_bytes())
}

#[derive(Debug, Serialize, Deserialize)]
struct TableMeta {
    input_names: Vec<String>,
    output_names: Vec<String>,
    seed: Option<u64>,
    source: String,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn table_to_csv(t: &IoTable) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let bad = |e: csv::Error| CliError::Config(format!("csv encoding: {e}"));
    w.write_record(["inputs", "outputs"]).map_err(bad)?;
    for (x, y) in t.rows() {
        w.write_record([x.to_string01(), y.to_string01()]).map_err(bad)?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv encoding: {e}")))
}

pub fn write_table(path: &Path, t: &IoTable) -> Result<(), CliError> {
    let meta = TableMeta {
        input_names: t.input_names().to_vec(),
        output_names: t.output_names().to_vec(),
        seed: t.seed,
        source: t.source.clone(),
    };
    write_atomic(path, &table_to_csv(t)?)?;
    write_json(&meta_path(path), &meta)
}

pub fn read_table(path: &Path) -> Result<IoTable, CliError> {
    let mpath = meta_path(path);
    let meta: TableMeta = read_json(&mpath)?;
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e))?;
    let headers = r.headers().map_err(|e| CliError::format(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "inputs" || &headers[1] != "outputs" {
        return Err(CliError::format(path, "header must be `inputs,outputs`"));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        let parse = |s: &str| {
            BitVector::parse01(s).map_err(|e| CliError::format(path, format!("row {}: {e}", i + 1)))
        };
        rows.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    IoTable::new(meta.input_names, meta.output_names, rows, meta.seed, meta.source)
        .map_err(|e| CliError::format(path, e))
}

pub fn write_model(path: &Path, net: &LstmNetwork) -> Result<(), CliError> {
    write_atomic(path, &encode_model(net))
}

pub fn read_model(path: &Path) -> Result<LstmNetwork, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_model(&bytes).map_err(|e| CliError::format(path, e))
}

pub fn history_csv(history: &[EpochRecord]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in history {
        w.serialize(r).map_err(|e| CliError::Config(format!("csv encoding: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv encoding: {e}")))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PinRow {
    pub pin_index: usize,
    pub real_avg: f64,
    pub predicted_avg: f64,
}

pub fn pins_csv(pins: &[PinAverage]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in pins {
        w.serialize(PinRow {
            pin_index: p.pin_index,
            real_avg: p.real_avg,
            predicted_avg: p.predicted_avg,
        })
        .map_err(|e| CliError::Config(format!("csv encoding: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv encoding: {e}")))
}

pub fn read_pins_csv(path: &Path) -> Result<Vec<PinRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::format(path, e)))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::format(path, e))
}
