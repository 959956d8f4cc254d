//! File formats: trial data (TSV), posterior draws (CSV) and JSON reports.
//! Every output is assembled in memory first and written atomically.

use std::fs;
use std::path::{Path, PathBuf};

use bayes_lmm_core::data::{LoadReport, RawTrial};
use bayes_lmm_core::{CodedDataset, LevelMap, PosteriorDraws};
use serde::Serialize;

use crate::error::{AppError, AppResult};

/// Columns a data file must provide.
pub const REQUIRED_COLUMNS: [&str; 4] = ["subj", "item", "region", "rt"];

/// Split one line of a data file. Tab-separated files are split on tabs;
/// anything else on runs of whitespace. Surrounding double quotes are removed.
fn split_line(line: &str, tabs: bool) -> Vec<String> {
    let unquote = |f: &str| {
        let f = f.trim();
        f.strip_prefix('"')
            .and_then(|f| f.strip_suffix('"'))
            .unwrap_or(f)
            .to_string()
    };
    if tabs {
        line.split('\t').map(unquote).collect()
    } else {
        line.split_whitespace().map(unquote).collect()
    }
}

/// Read raw rows from a header-first data file. `condition_column` names the
/// column holding the condition label. Rows with one more field than the
/// header (R-style row names) have their first field dropped.
pub fn read_raw_trials(path: &Path, condition_column: &str) -> AppResult<Vec<RawTrial>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header_line)) = lines.next() else {
        return Err(AppError::format(
            path,
            "file is empty; expected a header row",
        ));
    };
    let tabs = header_line.contains('\t');
    let header = split_line(header_line, tabs);
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let [subj, item, region, rt] = REQUIRED_COLUMNS.map(column);
    let (subj, item, region, rt) = (subj?, item?, region?, rt?);
    let cond = column(condition_column)?;

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut fields = split_line(line, tabs);
        if fields.len() == header.len() + 1 {
            fields.remove(0);
        }
        if fields.len() != header.len() {
            return Err(AppError::format(
                path,
                format!(
                    "line {line_no}: expected {} fields, found {}",
                    header.len(),
                    fields.len()
                ),
            ));
        }
        let mut take = |i: usize| std::mem::take(&mut fields[i]);
        rows.push(RawTrial {
            row: line_no,
            subj: take(subj),
            item: take(item),
            region: take(region),
            condition_label: take(cond),
            rt: take(rt),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub region: String,
    pub levels: LevelMap,
    pub condition_column: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            region: "headnoun".into(),
            levels: LevelMap::default(),
            condition_column: "type".into(),
        }
    }
}

/// Load, filter and code a data file.
pub fn load_dataset(path: &Path, opts: &LoadOptions) -> AppResult<(CodedDataset, LoadReport)> {
    let raw = read_raw_trials(path, &opts.condition_column)?;
    CodedDataset::from_raw(raw, &opts.region, &opts.levels).map_err(|e| match e {
        bayes_lmm_core::Error::Data { .. } => AppError::format(path, e.to_string()),
        other => other.into(),
    })
}

/// The dataset as a tab-separated file with columns `subj item type region rt`.
pub fn dataset_tsv(data: &CodedDataset) -> Vec<u8> {
    let mut out = String::from("subj\titem\ttype\tregion\trt\n");
    for t in data.trial_records() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            t.subj, t.item, t.condition_label, t.region, t.rt
        ));
    }
    out.into_bytes()
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| AppError::Usage(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| AppError::Usage(format!("CSV encoding failed: {e}")))
}

/// Draws as CSV: one column per parameter, then `chain` and `iteration`.
pub fn draws_csv(draws: &PosteriorDraws) -> AppResult<Vec<u8>> {
    let mut header = draws.names.clone();
    header.push("chain".into());
    header.push("iteration".into());
    let rows = (0..draws.n_draws()).map(|s| {
        let mut r: Vec<String> = draws.row(s).iter().map(|v| v.to_string()).collect();
        r.push(draws.chain_ids[s].to_string());
        r.push(draws.iterations[s].to_string());
        r
    });
    csv_bytes(&header, rows)
}

pub fn read_draws_csv(path: &Path) -> AppResult<PosteriorDraws> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| AppError::format(path, e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| AppError::format(path, e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let n = header.len();
    if n < 3 || header[n - 2] != "chain" || header[n - 1] != "iteration" {
        return Err(AppError::format(
            path,
            "draws file must end with `chain` and `iteration` columns",
        ));
    }
    let names = header[..n - 2].to_vec();
    let (mut values, mut chains, mut iterations) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| AppError::format(path, e.to_string()))?;
        let bad = |what: &str| AppError::format(path, format!("row {}: invalid {what}", i + 2));
        for f in rec.iter().take(n - 2) {
            values.push(f.trim().parse::<f64>().map_err(|_| bad("number"))?);
        }
        chains.push(
            rec[n - 2]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad("chain"))?,
        );
        iterations.push(
            rec[n - 1]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad("iteration"))?,
        );
    }
    Ok(PosteriorDraws::from_parts(
        names, values, chains, iterations,
    )?)
}

/// Generic CSV from serializable rows; the header comes from the field names.
pub fn records_csv<T: Serialize>(rows: &[T]) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| AppError::Usage(format!("CSV encoding failed: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| AppError::Usage(format!("CSV encoding failed: {e}")))
}

pub fn table_csv(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> AppResult<Vec<u8>> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    csv_bytes(&header, rows)
}

pub fn json_bytes<T: Serialize>(value: &T) -> AppResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| AppError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}

/// Files produced by a command, written together once it finishes.
#[derive(Debug, Default)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl AsRef<Path>, bytes: Vec<u8>) {
        self.files.push((self.dir.join(name), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl AsRef<Path>, value: &T) -> AppResult<()> {
        let bytes = json_bytes(value)?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        let path = self.dir.join(name);
        self.files
            .iter()
            .find(|(p, _)| *p == path)
            .map(|(_, b)| b.as_slice())
    }

    pub fn write_all(&self) -> AppResult<()> {
        for (path, bytes) in &self.files {
            write_atomic(path, bytes)?;
        }
        Ok(())
    }
}
