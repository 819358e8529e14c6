//! CSV and JSON-lines ingestion and canonical serialization.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::{self, DeserializeOwned, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer};

use super::types::{BaselineRecord, Combo, InteractionRecord, Iso, LanguageInfo, RunRecord, TaskId};
use super::{Ledger, LoadOptions, Registry};
use crate::error::{Error, Result};

const LANGUAGE_HEADER: &[&str] = &["iso", "family", "genus", "script", "seen"];
const BASELINE_HEADER: &[&str] = &["model", "task", "target", "score"];
const RUN_HEADER: &[&str] = &["model", "task", "transfer", "target", "steps", "rep", "score"];
const INTERACTION_HEADER: &[&str] = &["model", "task", "combo", "eval", "score"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LedgerFormat {
    Csv,
    JsonLines,
}

impl LedgerFormat {
    fn extension(self) -> &'static str {
        match self {
            LedgerFormat::Csv => "csv",
            LedgerFormat::JsonLines => "jsonl",
        }
    }
}

/// Locations of the four ledger files. Only the registry is mandatory.
#[derive(Clone, Debug)]
pub struct LedgerPaths {
    pub languages: PathBuf,
    pub baselines: Option<PathBuf>,
    pub runs: Option<PathBuf>,
    pub interactions: Option<PathBuf>,
}

impl LedgerPaths {
    /// Resolves `<name>.csv`, falling back to `<name>.jsonl`, inside `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let find = |name: &str| {
            ["csv", "jsonl"]
                .iter()
                .map(|ext| dir.join(format!("{name}.{ext}")))
                .find(|p| p.is_file())
        };
        let languages = find("languages").ok_or_else(|| {
            Error::io(
                dir.join("languages.csv"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "language registry not found"),
            )
        })?;
        Ok(LedgerPaths {
            languages,
            baselines: find("baselines"),
            runs: find("runs"),
            interactions: find("interactions"),
        })
    }
}

#[derive(Deserialize)]
struct LanguageRow {
    iso: String,
    family: String,
    genus: String,
    script: String,
    seen: bool,
}

#[derive(Deserialize)]
struct BaselineRow {
    model: String,
    task: String,
    target: String,
    score: f64,
}

#[derive(Deserialize)]
struct RunRow {
    model: String,
    task: String,
    transfer: String,
    target: String,
    steps: u32,
    rep: u32,
    score: f64,
}

#[derive(Deserialize)]
struct InteractionRow {
    model: String,
    task: String,
    #[serde(deserialize_with = "combo_field")]
    combo: Vec<String>,
    eval: String,
    score: f64,
}

/// Accepts either `"ara+ben"` or `["ara", "ben"]`.
fn combo_field<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    struct ComboVisitor;

    impl<'de> Visitor<'de> for ComboVisitor {
        type Value = Vec<String>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("iso codes joined by '+' or a list of iso codes")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
            Ok(v.split('+').map(|s| s.trim().to_string()).collect())
        }

        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some(item) = seq.next_element::<String>()? {
                out.push(item);
            }
            Ok(out)
        }
    }

    d.deserialize_any(ComboVisitor)
}

fn detect_json_lines(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

/// Reads all rows of a ledger file, returning each with its 1-based line number.
fn read_rows<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<(u64, T)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if detect_json_lines(&text) {
        read_json_lines(path, &text, header)
    } else {
        read_csv(path, &text, header)
    }
}

fn check_columns<'a>(
    path: &Path,
    line: u64,
    found: impl IntoIterator<Item = &'a str>,
    header: &[&str],
) -> Result<()> {
    let found: Vec<&str> = found.into_iter().collect();
    for col in header {
        if !found.contains(col) {
            return Err(Error::parse(path, line, format!("missing column {col:?}")));
        }
    }
    for col in &found {
        if !header.contains(col) {
            return Err(Error::parse(path, line, format!("unexpected column {col:?}")));
        }
    }
    Ok(())
}

fn read_csv<T: DeserializeOwned>(path: &Path, text: &str, header: &[&str]) -> Result<Vec<(u64, T)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    check_columns(path, 1, headers.iter(), header)?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn read_json_lines<T: DeserializeOwned>(
    path: &Path,
    text: &str,
    header: &[&str],
) -> Result<Vec<(u64, T)>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| Error::parse(path, line, e.to_string()))?;
        let object = value
            .as_object()
            .ok_or_else(|| Error::parse(path, line, "expected a JSON object"))?;
        check_columns(path, line, object.keys().map(String::as_str), header)?;
        let row = T::deserialize(value).map_err(|e| Error::parse(path, line, e.to_string()))?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn at_line<T>(path: &Path, line: u64, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Parse { .. } | Error::Io { .. } => e,
        other => Error::parse(path, line, other.to_string()),
    })
}

pub fn load_language_registry(path: impl AsRef<Path>) -> Result<Registry> {
    let path = path.as_ref();
    let rows: Vec<(u64, LanguageRow)> = read_rows(path, LANGUAGE_HEADER)?;
    let mut entries = Vec::with_capacity(rows.len());
    let mut seen_isos = std::collections::BTreeMap::new();
    for (line, row) in rows {
        let iso = at_line(path, line, Iso::new(&row.iso))?;
        if let Some(first) = seen_isos.insert(iso, line) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate language {iso} (first defined on line {first})"),
            ));
        }
        for (name, value) in [("family", &row.family), ("genus", &row.genus), ("script", &row.script)] {
            if value.is_empty() {
                return Err(Error::parse(path, line, format!("empty {name} for {iso}")));
            }
        }
        entries.push(LanguageInfo {
            iso,
            family: row.family,
            genus: row.genus,
            script: row.script,
            seen: row.seen,
        });
    }
    Registry::new(entries)
}

fn task_id(path: &Path, line: u64, task: String) -> Result<TaskId> {
    at_line(path, line, TaskId::new(task))
}

fn load_baselines(path: &Path) -> Result<Vec<BaselineRecord>> {
    read_rows::<BaselineRow>(path, BASELINE_HEADER)?
        .into_iter()
        .map(|(line, row)| {
            Ok(BaselineRecord {
                model: row.model,
                task: task_id(path, line, row.task)?,
                target: at_line(path, line, Iso::new(&row.target))?,
                score: row.score,
            })
        })
        .collect()
}

fn load_runs(path: &Path) -> Result<Vec<RunRecord>> {
    read_rows::<RunRow>(path, RUN_HEADER)?
        .into_iter()
        .map(|(line, row)| {
            Ok(RunRecord {
                model: row.model,
                task: task_id(path, line, row.task)?,
                transfer: at_line(path, line, Iso::new(&row.transfer))?,
                target: at_line(path, line, Iso::new(&row.target))?,
                steps: row.steps,
                rep: row.rep,
                score: row.score,
            })
        })
        .collect()
}

fn load_interactions(path: &Path) -> Result<Vec<InteractionRecord>> {
    read_rows::<InteractionRow>(path, INTERACTION_HEADER)?
        .into_iter()
        .map(|(line, row)| {
            let langs = row
                .combo
                .iter()
                .map(|c| Iso::new(c))
                .collect::<Result<Vec<_>>>();
            let combo = at_line(path, line, langs.and_then(Combo::new))?;
            Ok(InteractionRecord {
                model: row.model,
                task: task_id(path, line, row.task)?,
                combo,
                eval: at_line(path, line, Iso::new(&row.eval))?,
                score: row.score,
            })
        })
        .collect()
}

/// Loads and validates a ledger against an already loaded registry.
pub fn load_ledger(paths: &LedgerPaths, registry: Registry, options: &LoadOptions) -> Result<Ledger> {
    let baselines = match &paths.baselines {
        Some(p) => load_baselines(p)?,
        None => Vec::new(),
    };
    let runs = match &paths.runs {
        Some(p) => load_runs(p)?,
        None => Vec::new(),
    };
    let interactions = match &paths.interactions {
        Some(p) => load_interactions(p)?,
        None => Vec::new(),
    };
    Ledger::from_records(registry, baselines, runs, interactions, options)
}

/// Loads `languages`, `baselines`, `runs` and `interactions` from a directory.
pub fn load_ledger_dir(dir: impl AsRef<Path>, options: &LoadOptions) -> Result<Ledger> {
    let paths = LedgerPaths::from_dir(dir)?;
    let registry = load_language_registry(&paths.languages)?;
    load_ledger(&paths, registry, options)
}

/// Canonical rendering of one ledger file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerFiles {
    pub languages: String,
    pub baselines: String,
    pub runs: String,
    pub interactions: String,
}

fn fmt_score(score: f64) -> String {
    // shortest representation that round-trips
    format!("{score}")
}

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn json_table(header: &[&str], rows: impl Iterator<Item = Vec<serde_json::Value>>) -> String {
    let mut out = String::new();
    for row in rows {
        let object: serde_json::Map<String, serde_json::Value> = header
            .iter()
            .map(|h| h.to_string())
            .zip(row)
            .collect();
        out.push_str(&serde_json::Value::Object(object).to_string());
        out.push('\n');
    }
    out
}

fn needs_quoting(field: &str) -> bool {
    field.contains([',', '"', '\n', '\r'])
}

fn csv_field(field: &str) -> String {
    if needs_quoting(field) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

impl LedgerFiles {
    pub fn render(ledger: &Ledger, format: LedgerFormat) -> Self {
        use serde_json::json;
        match format {
            LedgerFormat::Csv => LedgerFiles {
                languages: csv_table(
                    LANGUAGE_HEADER,
                    ledger.registry().iter().map(|l| {
                        vec![
                            l.iso.to_string(),
                            csv_field(&l.family),
                            csv_field(&l.genus),
                            csv_field(&l.script),
                            l.seen.to_string(),
                        ]
                    }),
                ),
                baselines: csv_table(
                    BASELINE_HEADER,
                    ledger.baseline_records().map(|r| {
                        vec![r.model, r.task.to_string(), r.target.to_string(), fmt_score(r.score)]
                    }),
                ),
                runs: csv_table(
                    RUN_HEADER,
                    ledger.run_records().map(|r| {
                        vec![
                            r.model,
                            r.task.to_string(),
                            r.transfer.to_string(),
                            r.target.to_string(),
                            r.steps.to_string(),
                            r.rep.to_string(),
                            fmt_score(r.score),
                        ]
                    }),
                ),
                interactions: csv_table(
                    INTERACTION_HEADER,
                    ledger.interaction_records().map(|r| {
                        vec![
                            r.model,
                            r.task.to_string(),
                            r.combo.to_string(),
                            r.eval.to_string(),
                            fmt_score(r.score),
                        ]
                    }),
                ),
            },
            LedgerFormat::JsonLines => LedgerFiles {
                languages: json_table(
                    LANGUAGE_HEADER,
                    ledger.registry().iter().map(|l| {
                        vec![
                            json!(l.iso.as_str()),
                            json!(l.family),
                            json!(l.genus),
                            json!(l.script),
                            json!(l.seen),
                        ]
                    }),
                ),
                baselines: json_table(
                    BASELINE_HEADER,
                    ledger.baseline_records().map(|r| {
                        vec![json!(r.model), json!(r.task.as_str()), json!(r.target.as_str()), json!(r.score)]
                    }),
                ),
                runs: json_table(
                    RUN_HEADER,
                    ledger.run_records().map(|r| {
                        vec![
                            json!(r.model),
                            json!(r.task.as_str()),
                            json!(r.transfer.as_str()),
                            json!(r.target.as_str()),
                            json!(r.steps),
                            json!(r.rep),
                            json!(r.score),
                        ]
                    }),
                ),
                interactions: json_table(
                    INTERACTION_HEADER,
                    ledger.interaction_records().map(|r| {
                        vec![
                            json!(r.model),
                            json!(r.task.as_str()),
                            json!(r.combo.to_string()),
                            json!(r.eval.as_str()),
                            json!(r.score),
                        ]
                    }),
                ),
            },
        }
    }

    pub fn write_dir(&self, dir: &Path, format: LedgerFormat) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ext = format.extension();
        for (name, body) in [
            ("languages", &self.languages),
            ("baselines", &self.baselines),
            ("runs", &self.runs),
            ("interactions", &self.interactions),
        ] {
            let path = dir.join(format!("{name}.{ext}"));
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Writes the ledger in canonical form: rows sorted by key, scores in
/// shortest round-trip notation.
pub fn write_ledger_dir(ledger: &Ledger, dir: impl AsRef<Path>, format: LedgerFormat) -> Result<()> {
    LedgerFiles::render(ledger, format).write_dir(dir.as_ref(), format)
}
