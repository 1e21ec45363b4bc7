//! Dataset ingestion: header-driven TSV files plus a per-line JSON adapter
//! for item metadata dumps.
//!
//! Structural problems (unreadable file, missing header column) abort the
//! load; individual bad rows are rejected, counted, and reported so a dirty
//! dump degrades gracefully instead of failing at row 4,000,000.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::PipelineError;

/// One user→item event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub user_key: String,
    pub item_key: String,
    pub timestamp: Option<i64>,
}

/// Item metadata as found in the dump.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ItemRecord {
    pub name: String,
    pub description: Option<String>,
    pub attributes: Option<String>,
}

impl ItemRecord {
    /// True when only the name is usable, so the densify stage must expand
    /// the item with generated background text before extraction.
    pub fn needs_expansion(&self) -> bool {
        self.description
            .as_deref()
            .map(|d| d.trim().is_empty())
            .unwrap_or(true)
    }
}

/// A row the loader skipped, with enough context to find it in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub file: String,
    pub line: usize,
    pub reason: String,
}

/// Load statistics: accepted counts plus every rejected row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub interactions: usize,
    pub items: usize,
    pub users: usize,
    pub rejected: Vec<RejectedRow>,
}

impl LoadReport {
    /// Human-readable summary written next to the build artifacts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "interactions  {}", self.interactions);
        let _ = writeln!(out, "items         {}", self.items);
        let _ = writeln!(out, "user profiles {}", self.users);
        let _ = writeln!(out, "rejected rows {}", self.rejected.len());
        for row in &self.rejected {
            let _ = writeln!(out, "  {}:{}: {}", row.file, row.line, row.reason);
        }
        out
    }
}

/// Everything the pipeline knows about the raw dump.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawDataset {
    /// In file order; duplicates preserved (the graph build counts them).
    pub interactions: Vec<Interaction>,
    pub items: BTreeMap<String, ItemRecord>,
    pub users: BTreeMap<String, String>,
    pub report: LoadReport,
}

/// Read the interaction file, the item metadata file, and (optionally) the
/// user-profile file, cross-checking every interaction against the item
/// set.
pub fn load_dataset(
    interactions: &Path,
    items: &Path,
    users: Option<&Path>,
) -> Result<RawDataset, PipelineError> {
    let mut report = LoadReport::default();

    let items_map = if is_json_lines(items) {
        load_items_jsonl(items, &mut report)?
    } else {
        load_items_tsv(items, &mut report)?
    };
    let users_map = match users {
        Some(path) => load_users(path, &mut report)?,
        None => BTreeMap::new(),
    };
    let interaction_rows = load_interactions(interactions, &items_map, &mut report)?;

    report.interactions = interaction_rows.len();
    report.items = items_map.len();
    report.users = users_map.len();
    Ok(RawDataset {
        interactions: interaction_rows,
        items: items_map,
        users: users_map,
        report,
    })
}

fn is_json_lines(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    )
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_lines(path: &Path) -> Result<Vec<String>, PipelineError> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::to_string)
        .collect())
}

/// Header-driven column lookup: returns the position of every named column,
/// erroring on the missing required ones.
struct Columns {
    file: String,
    positions: BTreeMap<String, usize>,
}

impl Columns {
    fn from_header(file: &str, header: &str) -> Columns {
        let positions = header
            .split('\t')
            .enumerate()
            .map(|(i, name)| (name.trim().to_string(), i))
            .collect();
        Columns {
            file: file.to_string(),
            positions,
        }
    }

    fn required(&self, field: &str) -> Result<usize, PipelineError> {
        self.positions.get(field).copied().ok_or_else(|| {
            PipelineError::MissingField {
                file: self.file.clone(),
                field: field.to_string(),
            }
        })
    }

    fn optional(&self, field: &str) -> Option<usize> {
        self.positions.get(field).copied()
    }
}

fn field<'a>(row: &'a [&str], index: usize) -> &'a str {
    row.get(index).copied().unwrap_or("").trim()
}

fn load_interactions(
    path: &Path,
    items: &BTreeMap<String, ItemRecord>,
    report: &mut LoadReport,
) -> Result<Vec<Interaction>, PipelineError> {
    let file = file_name(path);
    let lines = read_lines(path)?;
    let Some(header) = lines.first() else {
        return Err(PipelineError::FormatViolation {
            file,
            line: 1,
            message: "empty file, expected a header row".into(),
        });
    };
    let columns = Columns::from_header(&file, header);
    let user_col = columns.required("user_id")?;
    let item_col = columns.required("item_id")?;
    let stamp_col = columns.optional("timestamp");

    let mut out = Vec::new();
    let reject = |line: usize, reason: String, report: &mut LoadReport| {
        report.rejected.push(RejectedRow {
            file: file.clone(),
            line,
            reason,
        });
    };
    for (idx, raw) in lines.iter().enumerate().skip(1) {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: Vec<&str> = raw.split('\t').collect();
        let user_key = field(&row, user_col);
        let item_key = field(&row, item_col);
        if user_key.is_empty() || item_key.is_empty() {
            reject(line, "empty user_id or item_id".into(), report);
            continue;
        }
        if !items.contains_key(item_key) {
            reject(line, format!("unknown item {item_key:?}"), report);
            continue;
        }
        let timestamp = match stamp_col {
            None => None,
            Some(col) => {
                let text = field(&row, col);
                if text.is_empty() {
                    None
                } else {
                    match text.parse::<i64>() {
                        Ok(v) => Some(v),
                        Err(_) => {
                            reject(line, format!("bad timestamp {text:?}"), report);
                            continue;
                        }
                    }
                }
            }
        };
        out.push(Interaction {
            user_key: user_key.to_string(),
            item_key: item_key.to_string(),
            timestamp,
        });
    }
    Ok(out)
}

fn load_items_tsv(
    path: &Path,
    report: &mut LoadReport,
) -> Result<BTreeMap<String, ItemRecord>, PipelineError> {
    let file = file_name(path);
    let lines = read_lines(path)?;
    let Some(header) = lines.first() else {
        return Err(PipelineError::FormatViolation {
            file,
            line: 1,
            message: "empty file, expected a header row".into(),
        });
    };
    let columns = Columns::from_header(&file, header);
    let key_col = columns.required("item_id")?;
    let name_col = columns.required("name")?;
    let desc_col = columns.optional("description");
    let attr_col = columns.optional("attributes");

    let mut out = BTreeMap::new();
    for (idx, raw) in lines.iter().enumerate().skip(1) {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: Vec<&str> = raw.split('\t').collect();
        let key = field(&row, key_col);
        let name = field(&row, name_col);
        let mut reject = |reason: String| {
            report.rejected.push(RejectedRow {
                file: file.clone(),
                line,
                reason,
            });
        };
        if key.is_empty() || name.is_empty() {
            reject("empty item_id or name".into());
            continue;
        }
        if out.contains_key(key) {
            reject(format!("duplicate item {key:?}, keeping the first"));
            continue;
        }
        let pick = |col: Option<usize>| -> Option<String> {
            col.map(|c| field(&row, c))
                .filter(|v| !v.is_empty())
                .map(str::to_string)
        };
        out.insert(
            key.to_string(),
            ItemRecord {
                name: name.to_string(),
                description: pick(desc_col),
                attributes: pick(attr_col),
            },
        );
    }
    Ok(out)
}

/// Per-line JSON records: `{"item_id": …, "name": …, "description"?: …,
/// "attributes"?: string or array of strings}`.
fn load_items_jsonl(
    path: &Path,
    report: &mut LoadReport,
) -> Result<BTreeMap<String, ItemRecord>, PipelineError> {
    let file = file_name(path);
    let lines = read_lines(path)?;
    let mut out = BTreeMap::new();
    for (idx, raw) in lines.iter().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut reject = |reason: String| {
            report.rejected.push(RejectedRow {
                file: file.clone(),
                line,
                reason,
            });
        };
        let value: serde_json::Value = match serde_json::from_str(raw) {
            Ok(v) => v,
            Err(e) => {
                reject(format!("invalid JSON: {e}"));
                continue;
            }
        };
        let text_of = |key: &str| -> Option<String> {
            value
                .get(key)
                .and_then(|v| v.as_str())
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(str::to_string)
        };
        let (Some(key), Some(name)) = (text_of("item_id"), text_of("name")) else {
            reject("missing item_id or name".into());
            continue;
        };
        if out.contains_key(&key) {
            reject(format!("duplicate item {key:?}, keeping the first"));
            continue;
        }
        let attributes = match value.get("attributes") {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::String(s)) => {
                Some(s.trim().to_string()).filter(|s| !s.is_empty())
            }
            Some(serde_json::Value::Array(parts)) => {
                let joined = parts
                    .iter()
                    .filter_map(|p| p.as_str())
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .collect::<Vec<_>>()
                    .join(", ");
                Some(joined).filter(|s| !s.is_empty())
            }
            Some(other) => {
                reject(format!("attributes must be a string or array, got {other}"));
                continue;
            }
        };
        out.insert(
            key,
            ItemRecord {
                name,
                description: text_of("description"),
                attributes,
            },
        );
    }
    Ok(out)
}

fn load_users(
    path: &Path,
    report: &mut LoadReport,
) -> Result<BTreeMap<String, String>, PipelineError> {
    let file = file_name(path);
    let lines = read_lines(path)?;
    let Some(header) = lines.first() else {
        return Err(PipelineError::FormatViolation {
            file,
            line: 1,
            message: "empty file, expected a header row".into(),
        });
    };
    let columns = Columns::from_header(&file, header);
    let key_col = columns.required("user_id")?;
    let profile_col = columns.required("profile")?;

    let mut out = BTreeMap::new();
    for (idx, raw) in lines.iter().enumerate().skip(1) {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: Vec<&str> = raw.split('\t').collect();
        let key = field(&row, key_col);
        let profile = field(&row, profile_col);
        let mut reject = |reason: String| {
            report.rejected.push(RejectedRow {
                file: file.clone(),
                line,
                reason,
            });
        };
        if key.is_empty() {
            reject("empty user_id".into());
            continue;
        }
        if profile.is_empty() {
            reject(format!("empty profile for user {key:?}"));
            continue;
        }
        if out.contains_key(key) {
            reject(format!("duplicate user {key:?}, keeping the first"));
            continue;
        }
        out.insert(key.to_string(), profile.to_string());
    }
    Ok(out)
}
