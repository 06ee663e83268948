//! Raw log ingestion, rule-based cleaning, and size-outlier filtering.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::{Error, Result};

/// Defect class of a labelled log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Pass,
    #[serde(rename = "L0_L1")]
    L0L1,
    L2,
    L3,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Pass, Label::L0L1, Label::L2, Label::L3];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Pass => "Pass",
            Label::L0L1 => "L0_L1",
            Label::L2 => "L2",
            Label::L3 => "L3",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Pass" => Ok(Label::Pass),
            "L0_L1" => Ok(Label::L0L1),
            "L2" => Ok(Label::L2),
            "L3" => Ok(Label::L3),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

/// One software log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    /// Path relative to the scanned root, `/`-separated.
    pub id: String,
    /// Decoded text; invalid UTF-8 is replaced by U+FFFD.
    pub raw_text: String,
    /// Size of the file on disk.
    pub byte_size: u64,
    pub char_count: usize,
    pub label: Option<Label>,
    pub source_path: PathBuf,
}

impl LogRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        let raw_text = text.into();
        LogRecord {
            id: id.into(),
            byte_size: raw_text.len() as u64,
            char_count: raw_text.chars().count(),
            raw_text,
            label,
            source_path: PathBuf::new(),
        }
    }

    /// Replaces the text, keeping identity and label.
    pub fn with_text(&self, text: String) -> Self {
        LogRecord {
            byte_size: text.len() as u64,
            char_count: text.chars().count(),
            raw_text: text,
            ..self.clone()
        }
    }
}

#[derive(Debug, Default)]
pub struct ScanReport {
    pub records: Vec<LogRecord>,
    /// Files that could not be read.
    pub warnings: Vec<String>,
}

/// Reads a `path,label` manifest. Paths are relative to the manifest's root.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, Label)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Manifest { row: 0, reason: e.to_string() })?
        .clone();
    if headers.len() != 2 || &headers[0] != "path" || &headers[1] != "label" {
        return Err(Error::Manifest {
            row: 0,
            reason: format!("expected header \"path,label\", got {:?}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Manifest { row, reason: e.to_string() })?;
        if rec.len() != 2 {
            return Err(Error::Manifest {
                row,
                reason: format!("expected 2 fields, got {}", rec.len()),
            });
        }
        let label = rec[1].parse::<Label>().map_err(|e| Error::Manifest { row, reason: e.to_string() })?;
        rows.push((rec[0].to_string(), label));
    }
    Ok(rows)
}

pub fn write_manifest(path: &Path, rows: &[(String, Label)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["path", "label"]).map_err(io)?;
    for (p, l) in rows {
        w.write_record([p.as_str(), l.as_str()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_record(root: &Path, rel: &str, label: Option<Label>) -> std::io::Result<LogRecord> {
    let path = root.join(rel);
    let bytes = std::fs::read(&path)?;
    let raw_text = String::from_utf8_lossy(&bytes).into_owned();
    Ok(LogRecord {
        id: rel.to_string(),
        byte_size: bytes.len() as u64,
        char_count: raw_text.chars().count(),
        raw_text,
        label,
        source_path: path,
    })
}

/// Loads every file under `root` (or exactly the manifest's rows when a
/// manifest is given), sorted by id.
pub fn scan_corpus(root: &Path, manifest: Option<&Path>) -> Result<ScanReport> {
    let mut report = ScanReport::default();
    let entries: Vec<(String, Option<Label>)> = match manifest {
        Some(m) => read_manifest(m)?.into_iter().map(|(p, l)| (p, Some(l))).collect(),
        None => {
            let mut files = Vec::new();
            for entry in WalkDir::new(root).follow_links(true) {
                match entry {
                    Ok(e) if e.file_type().is_file() => {
                        let rel = e.path().strip_prefix(root).unwrap_or(e.path());
                        let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                        files.push((id, None));
                    }
                    Ok(_) => {}
                    Err(e) => report.warnings.push(format!("skipped entry: {e}")),
                }
            }
            files
        }
    };
    for (rel, label) in entries {
        match read_record(root, &rel, label) {
            Ok(rec) => report.records.push(rec),
            Err(e) => report.warnings.push(format!("skipped {rel}: {e}")),
        }
    }
    report.records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(report)
}

/// Cleaning rules of the pre-processing unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpuConfig {
    pub max_word_len: usize,
    pub max_line_len: usize,
    pub strip_numbers: bool,
    /// A log is kept when any pattern matches; empty keeps everything.
    pub category_patterns: Vec<String>,
}

impl Default for PpuConfig {
    fn default() -> Self {
        PpuConfig {
            max_word_len: 40,
            max_line_len: 300,
            strip_numbers: true,
            category_patterns: Vec::new(),
        }
    }
}

impl PpuConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_word_len < 1 {
            return Err(Error::Config("ppu.max_word_len must be at least 1".into()));
        }
        if self.max_line_len < self.max_word_len {
            return Err(Error::Config("ppu.max_line_len must be >= ppu.max_word_len".into()));
        }
        Ok(())
    }
}

/// Compiled form of a [`PpuConfig`].
#[derive(Clone, Debug)]
pub struct Ppu {
    cfg: PpuConfig,
    categories: Vec<Regex>,
}

impl Ppu {
    pub fn new(cfg: PpuConfig) -> Result<Self> {
        cfg.validate()?;
        let categories = cfg
            .category_patterns
            .iter()
            .map(|p| Regex::new(p))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Ppu { cfg, categories })
    }

    /// Whether a log belongs to one of the configured test categories.
    pub fn selects(&self, text: &str) -> bool {
        self.categories.is_empty() || self.categories.iter().any(|r| r.is_match(text))
    }

    pub fn clean(&self, text: &str) -> String {
        preprocess_log(text, &self.cfg)
    }
}

fn is_number(token: &str) -> bool {
    let digits = token.strip_prefix(['+', '-']).unwrap_or(token);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

/// Drops over-long lines whole, then removes over-long tokens and (optionally)
/// standalone integers along with the whitespace run in front of each.
/// Everything else is kept verbatim. Idempotent.
pub fn preprocess_log(text: &str, cfg: &PpuConfig) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        let (body, newline) = match line.strip_suffix('\n') {
            Some(b) => (b, "\n"),
            None => (line, ""),
        };
        if body.chars().count() > cfg.max_line_len {
            continue;
        }
        let mut rest = body;
        while !rest.is_empty() {
            let ws_len = rest.len() - rest.trim_start().len();
            let (ws, after) = rest.split_at(ws_len);
            let tok_len = after.find(char::is_whitespace).unwrap_or(after.len());
            let (tok, tail) = after.split_at(tok_len);
            let drop = !tok.is_empty()
                && (tok.chars().count() > cfg.max_word_len || (cfg.strip_numbers && is_number(tok)));
            if !drop {
                out.push_str(ws);
                out.push_str(tok);
            }
            rest = tail;
        }
        out.push_str(newline);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeFilterReport {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub hard_cap_bytes: u64,
    pub kept_ids: Vec<String>,
    pub dropped_ids: Vec<String>,
}

pub const DEFAULT_HARD_CAP_BYTES: u64 = 300_000;

/// Quantile of sorted data by linear interpolation between closest ranks
/// (`h = (n-1)·p`).
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Tukey fences on character counts plus an absolute byte cap.
pub fn tukey_filter(records: &[LogRecord], hard_cap_bytes: u64) -> Result<SizeFilterReport> {
    if records.is_empty() {
        return Err(Error::Empty("tukey filter needs at least one record"));
    }
    let mut sizes: Vec<f64> = records.iter().map(|r| r.char_count as f64).collect();
    sizes.sort_by(f64::total_cmp);
    let q1 = quantile_linear(&sizes, 0.25);
    let q3 = quantile_linear(&sizes, 0.75);
    let iqr = q3 - q1;
    let lower_bound = q1 - 1.5 * iqr;
    let upper_bound = q3 + 1.5 * iqr;
    let (mut kept_ids, mut dropped_ids) = (Vec::new(), Vec::new());
    for r in records {
        let size = r.char_count as f64;
        if size >= lower_bound && size <= upper_bound && r.byte_size <= hard_cap_bytes {
            kept_ids.push(r.id.clone());
        } else {
            dropped_ids.push(r.id.clone());
        }
    }
    Ok(SizeFilterReport {
        q1,
        q3,
        iqr,
        lower_bound,
        upper_bound,
        hard_cap_bytes,
        kept_ids,
        dropped_ids,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Character-count histogram with `n_bins` equal-width bins over `[min, max]`.
pub fn size_histogram(records: &[LogRecord], n_bins: usize) -> Result<Vec<HistBin>> {
    if n_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if records.is_empty() {
        return Err(Error::Empty("histogram of no records"));
    }
    let sizes: Vec<f64> = records.iter().map(|r| r.char_count as f64).collect();
    let min = sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sizes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / n_bins as f64;
    let mut bins: Vec<HistBin> = (0..n_bins)
        .map(|i| HistBin {
            lo: min + width * i as f64,
            hi: if i + 1 == n_bins { max } else { min + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for s in sizes {
        let idx = if width > 0.0 {
            (((s - min) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        bins[idx].count += 1;
    }
    Ok(bins)
}

/// Joins record texts in id order with a single newline between records.
pub fn build_training_corpus(records: &[LogRecord]) -> String {
    let mut sorted: Vec<&LogRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted.iter().map(|r| r.raw_text.as_str()).collect::<Vec<_>>().join("\n")
}
