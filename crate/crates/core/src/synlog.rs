//! Synthetic TM500-style logs with per-layer defect signatures.
//!
//! A log is a run of `I:` (indication) and `C:` (confirmation) blocks with
//! randomized parameters. Defect logs carry, with probability
//! `signature_strength`, one multi-line signature block for their layer.
//! Signature lines reuse the event names and keys of ordinary blocks, so
//! spotting a defect means reading the combination of lines, not a keyword.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_manifest, Label};
use crate::{seed, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynConfig {
    pub n_samples: usize,
    pub class_probs: BTreeMap<Label, f64>,
    pub mean_blocks_per_log: usize,
    /// Inclusive character range of an ordinary block.
    pub block_len_range: (usize, usize),
    pub signature_strength: f64,
    pub seed: u64,
}

impl Default for SynConfig {
    fn default() -> Self {
        SynConfig {
            n_samples: 3262,
            class_probs: [(Label::Pass, 0.62), (Label::L0L1, 0.21), (Label::L2, 0.12), (Label::L3, 0.05)]
                .into_iter()
                .collect(),
            mean_blocks_per_log: 24,
            block_len_range: (40, 140),
            signature_strength: 0.9,
            seed: 0,
        }
    }
}

impl SynConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        let total: f64 = self.class_probs.values().sum();
        if self.class_probs.values().any(|&p| !(0.0..=1.0).contains(&p)) || (total - 1.0).abs() > 1e-6 {
            return err(format!("synth.class_probs must be probabilities summing to 1, got sum {total}"));
        }
        if self.mean_blocks_per_log == 0 {
            return err("synth.mean_blocks_per_log must be positive".into());
        }
        let (lo, hi) = self.block_len_range;
        if lo == 0 || lo > hi {
            return err(format!("synth.block_len_range must satisfy 0 < min <= max, got ({lo}, {hi})"));
        }
        if !(self.signature_strength > 0.0 && self.signature_strength <= 1.0) {
            return err(format!("synth.signature_strength must be in (0, 1], got {}", self.signature_strength));
        }
        Ok(())
    }
}

/// Header line of every signature block of a label, used by tests and
/// diagnostics to check for presence.
pub fn signature_marker(label: Label) -> Option<&'static str> {
    match label {
        Label::Pass => None,
        Label::L0L1 => Some("phy sync state = lost"),
        Label::L2 => Some("rlc retransmission = limit reached"),
        Label::L3 => Some("rrc procedure = rejected"),
    }
}

// Each signature: marker line first, then a pool of supporting lines of
// which a few are picked.
fn signature_lines(label: Label) -> (&'static str, &'static [&'static str]) {
    match label {
        Label::Pass => ("", &[]),
        Label::L0L1 => (
            "I: PHY_STATUS",
            &[
                "  pdcch decode = failed",
                "  harq feedback = missing",
                "  uplink grant = dropped",
                "  timing advance = out of range",
                "  cell search = restarted",
            ],
        ),
        Label::L2 => (
            "I: RLC_STATUS",
            &[
                "  mac scheduler = stalled",
                "  pdcp discard timer = expired",
                "  bearer state = suspended",
                "  radio link = failure",
                "  buffer status = overflow",
            ],
        ),
        Label::L3 => (
            "I: RRC_STATUS",
            &[
                "  nas attach = failed",
                "  reject cause = congestion",
                "  security mode = failed",
                "  bearer setup = aborted",
                "  connection = released",
            ],
        ),
    }
}

const EVENTS: &[(&str, &[&str])] = &[
    ("PHY_STATUS", &["phy sync state = locked", "pdcch decode = ok", "harq feedback = ack", "cell search = complete"]),
    ("RLC_STATUS", &["rlc retransmission = nominal", "mac scheduler = running", "bearer state = active", "buffer status = normal"]),
    ("RRC_STATUS", &["rrc procedure = complete", "nas attach = accepted", "security mode = complete", "connection = established"]),
    ("CELL_CONFIG", &["bandwidth = wide", "duplex = fdd", "antenna ports = dual", "carrier = primary"]),
    ("UE_CONTEXT", &["ue category = standard", "drx = enabled", "measurement gap = off", "power class = default"]),
    ("THROUGHPUT", &["direction = downlink", "direction = uplink", "window = sliding", "unit = kbps"]),
    ("TIMER", &["name = supervision", "name = inactivity", "state = running", "state = stopped"]),
];

const COMMANDS: &[&str] = &[
    "SCEN_START", "CELL_SETUP", "UE_ADD", "BEARER_ADD", "TRAFFIC_START", "MEAS_CONFIG", "LOG_FLUSH", "SCEN_STOP",
];

const KEYS: &[&str] = &["ue_id", "cell_id", "earfcn", "rnti", "tx_power", "seq", "count", "bytes", "delay_ms"];

fn push_number_line(out: &mut String, rng: &mut impl Rng) {
    let key = KEYS.choose(rng).expect("non-empty");
    let _ = writeln!(out, "  {key} = {}", rng.random_range(0..100_000u32));
}

fn push_noise_line(out: &mut String, rng: &mut impl Rng) {
    match rng.random_range(0..20) {
        0 => {
            let blob: String = (0..rng.random_range(48..96))
                .map(|_| *b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/".choose(rng).expect("non-empty") as char)
                .collect();
            let _ = writeln!(out, "  payload = {blob}");
        }
        1 => {
            let n = rng.random_range(80..120);
            let values: Vec<String> = (0..n).map(|_| format!("{:02x}", rng.random::<u8>())).collect();
            let _ = writeln!(out, "  dump = {}", values.join(" "));
        }
        _ => push_number_line(out, rng),
    }
}

fn ordinary_block(rng: &mut impl Rng, target_len: usize) -> String {
    let mut out = String::new();
    if rng.random_bool(0.5) {
        let (event, lines) = EVENTS.choose(rng).expect("non-empty");
        let _ = writeln!(out, "I: {event}");
        while out.len() < target_len {
            if rng.random_bool(0.5) {
                let _ = writeln!(out, "  {}", lines.choose(rng).expect("non-empty"));
            } else {
                push_noise_line(&mut out, rng);
            }
        }
    } else {
        let cmd = COMMANDS.choose(rng).expect("non-empty");
        let _ = writeln!(out, "C: {cmd} status = OK");
        while out.len() < target_len {
            push_noise_line(&mut out, rng);
        }
    }
    out
}

fn signature_block(label: Label, rng: &mut impl Rng) -> String {
    let (header, pool) = signature_lines(label);
    let marker = signature_marker(label).expect("defect label");
    let mut picked: Vec<&str> = pool.choose_multiple(rng, 3).copied().collect();
    picked.shuffle(rng);
    let mut out = format!("{header}\n  {marker}\n");
    for line in picked {
        out.push_str(line);
        out.push('\n');
        if rng.random_bool(0.3) {
            push_number_line(&mut out, rng);
        }
    }
    out
}

/// One synthetic log; returns the text and whether a signature was injected.
pub fn generate_log_with_flag(label: Label, cfg: &SynConfig, rng: &mut impl Rng) -> (String, bool) {
    let mean = cfg.mean_blocks_per_log;
    let n_blocks = rng.random_range((mean / 2).max(1)..=(mean + mean / 2).max(1));
    let (lo, hi) = cfg.block_len_range;
    let mut blocks: Vec<String> = (0..n_blocks)
        .map(|_| {
            let len = rng.random_range(lo..=hi);
            ordinary_block(rng, len)
        })
        .collect();
    let signed = label != Label::Pass && rng.random_bool(cfg.signature_strength);
    if signed {
        let at = rng.random_range(0..=blocks.len());
        blocks.insert(at, signature_block(label, rng));
    }
    (blocks.concat(), signed)
}

pub fn generate_log(label: Label, cfg: &SynConfig, rng: &mut impl Rng) -> String {
    generate_log_with_flag(label, cfg, rng).0
}

/// Exact per-class counts by largest remainder, so empirical frequencies
/// track `class_probs` within one sample per class.
fn class_quota(cfg: &SynConfig) -> Vec<Label> {
    let n = cfg.n_samples;
    let mut counts: Vec<(Label, usize, f64)> = cfg
        .class_probs
        .iter()
        .map(|(&l, &p)| {
            let exact = p * n as f64;
            (l, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i].1 += 1;
    }
    let mut labels: Vec<Label> = counts.iter().flat_map(|&(l, c, _)| std::iter::repeat_n(l, c)).collect();
    labels.shuffle(&mut seed::rng(cfg.seed, "synlog-labels", 0));
    labels
}

/// In-memory dataset: `(file name, label, text)` per sample.
pub fn generate_samples(cfg: &SynConfig) -> Result<Vec<(String, Label, String)>> {
    cfg.validate()?;
    Ok(class_quota(cfg)
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut rng = seed::rng(cfg.seed, "synlog-file", i as u64);
            (format!("logs/log_{i:05}.log"), label, generate_log(label, cfg, &mut rng))
        })
        .collect())
}

/// Writes `logs/*.log` and `manifest.csv` under `out_dir`; returns the
/// manifest path.
pub fn generate_dataset(cfg: &SynConfig, out_dir: &Path) -> Result<PathBuf> {
    let samples = generate_samples(cfg)?;
    let logs = out_dir.join("logs");
    std::fs::create_dir_all(&logs).map_err(|e| Error::io(&logs, e))?;
    let mut rows = Vec::with_capacity(samples.len());
    for (name, label, text) in samples {
        let path = out_dir.join(&name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        rows.push((name, label));
    }
    let manifest = out_dir.join("manifest.csv");
    write_manifest(&manifest, &rows)?;
    Ok(manifest)
}
