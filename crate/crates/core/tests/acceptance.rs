//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! `LOGTRIAGE_ACCEPTANCE=1,4,9` runs a subset.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use common::gradcheck::*;
use logtriage::checkpoint::ModelCheckpoint;
use logtriage::classifier::*;
use logtriage::corpus::{preprocess_log, tukey_filter, Label, LogRecord, PpuConfig};
use logtriage::docembed::{embed_document, plan_chunks, EmbeddingProvider, MockProvider, Pooling};
use logtriage::lm::*;
use logtriage::pipeline::{fit_classifier, split_records, vocab_for, FitResult, Splits};
use logtriage::synlog::{generate_samples, SynConfig};
use logtriage::vocab::{CharVocab, PAD_ID};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and thresholds.
const GRAD_TOL: f64 = 1e-4;
const GRAD_INSTANCES: u64 = 20;
const EMBED_TOL: f64 = 1e-6;
const METRIC_TOL: f64 = 1e-12;
const HISTORY_TOL: f64 = 1e-6;
const BENCH_ACCURACY: f64 = 0.93;
const BENCH_MACRO_F1: f64 = 0.85;
const BENCH_RECALL: f64 = 0.7;
const DEPTH_ACCURACY: f64 = 0.90;
const SWEEP_GAIN: f64 = 0.05;

// Benchmark training schedule.
const BENCH_SEED: u64 = 2024;
const BENCH_MAX_LEN: usize = 5_000;
const BENCH_LR: f64 = 1e-3;
const BENCH_MAX_EPOCHS: usize = 8;
const BENCH_PATIENCE: usize = 2;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1. gradient correctness

fn c1_gradients() -> Outcome {
    let layers: Vec<(&str, Box<dyn Fn(u64) -> f64>)> = vec![
        ("embedding", Box::new(check_embedding)),
        ("conv1d", Box::new(|s| check_conv(s, false))),
        ("conv1d-patch", Box::new(|s| check_conv(s, true))),
        ("lstm", Box::new(|s| check_lstm(s, false))),
        ("lstm-reversed", Box::new(|s| check_lstm(s, true))),
        ("bilstm", Box::new(check_bilstm)),
        ("dense", Box::new(check_dense)),
        ("global-max-pool", Box::new(check_max_pool)),
        ("local-max-pool", Box::new(check_local_max_pool)),
        ("softmax-ce", Box::new(check_softmax_ce)),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, f) in &layers {
        let worst = (0..GRAD_INSTANCES).map(|s| f(1000 + s)).fold(0.0, f64::max);
        ok &= worst < GRAD_TOL;
        parts.push(format!("{name} {worst:.1e}"));
    }
    check(
        ok,
        format!("{GRAD_INSTANCES} instances per layer, worst relative error: {}", parts.join(", ")),
    )
}

// 2. parameter-count anchors

fn c2_param_counts() -> Outcome {
    let lm = lm_param_count(
        &LmConfig {
            embed_dim: 64,
            lstm_units: 1024,
            ..LmConfig::default()
        },
        97,
    );
    let corpus: String = (32u8..127).map(char::from).chain(['\n', '\t']).collect();
    let vocab = CharVocab::build(&corpus).unwrap();
    let arch = ArchConfig::default();
    let built = ResCnn::<f32>::build(&arch, &vocab, None, 0).unwrap().param_count();
    let formula = arch.param_count(vocab.size());
    check(
        lm == 4_566_177 && built == formula && (500_000..=1_000_000).contains(&built),
        format!("lm(V=97,E=64,H=1024) = {lm}; default classifier (V={}) = {built}", vocab.size()),
    )
}

// 3. sliding-window embedding vs brute force

/// Windows that cover `[0, L)` found by walking forward one stride at a time.
fn oracle_windows(len: usize, lc: usize, w: usize) -> Vec<usize> {
    let mut starts = vec![0];
    let mut s = 0;
    while s + lc < len {
        s += lc - w;
        starts.push(s);
    }
    starts
}

fn oracle_embedding(tokens: &[usize], mock: &MockProvider, lc: usize, w: usize, literal: bool) -> Vec<f64> {
    let starts = oracle_windows(tokens.len(), lc, w);
    let d = mock.dim();
    let mut total = vec![0.0; d];
    for &s in &starts {
        let mut sum = vec![0.0; d];
        let mut real = 0;
        for i in 0..lc {
            let (tok, is_real) = match tokens.get(s + i) {
                Some(&t) => (t, true),
                None => (PAD_ID, false),
            };
            if is_real || literal {
                let row = mock.row(tok);
                for j in 0..d {
                    sum[j] += row[j];
                }
            }
            real += is_real as usize;
        }
        let denom = if literal { lc } else { real } as f64;
        for j in 0..d {
            total[j] += sum[j] / denom;
        }
    }
    total.iter().map(|t| t / starts.len() as f64).collect()
}

fn c3_window_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut exact_cases, mut worst) = (0, 0.0f64);
    for case in 0..1000 {
        let lc = rng.random_range(1..=64);
        let w = rng.random_range(0..lc);
        let len = if case % 4 == 0 {
            // force the divisible, padding-free layout
            lc + (lc - w) * rng.random_range(0..8)
        } else {
            rng.random_range(1..=400)
        };
        let plan = plan_chunks(len, lc, w).map_err(|e| e.to_string())?;
        let starts = oracle_windows(len, lc, w);
        if plan.starts != starts {
            return Err(format!("case {case}: plan {:?} vs oracle {:?} (L={len}, lc={lc}, w={w})", plan.starts, starts));
        }
        let divisible = len >= lc && (len - w) % (lc - w) == 0;
        if divisible && plan.chunk_count() != (len - w) / (lc - w) {
            return Err(format!("case {case}: M = {} but (L-w)/(lc-w) = {}", plan.chunk_count(), (len - w) / (lc - w)));
        }
        let mock = MockProvider::new(rng.random_range(1..6), case, 64);
        let tokens: Vec<usize> = (0..len).map(|_| rng.random_range(1..40)).collect();
        for (pooling, literal) in [(Pooling::MaskAware, false), (Pooling::Literal, true)] {
            let got = embed_document(&tokens, &mock, lc, w, pooling).map_err(|e| e.to_string())?.vector;
            let want = oracle_embedding(&tokens, &mock, lc, w, literal);
            if divisible {
                if got != want {
                    return Err(format!("case {case}: inexact on a padding-free layout"));
                }
            } else {
                let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(err);
                if err > EMBED_TOL {
                    return Err(format!("case {case}: error {err:e}"));
                }
            }
        }
        exact_cases += divisible as usize;
    }
    Ok(format!("1000 cases ({exact_cases} padding-free, exact); worst error elsewhere {worst:.1e}"))
}

// 4. Tukey fences vs exact quarter-arithmetic oracle

/// `4·Q(p)` for p = k/4 with type-7 interpolation, in integers.
fn quadruple_quantile(sorted: &[u64], k: u64) -> u64 {
    let pos = (sorted.len() as u64 - 1) * k; // 4·h
    let (lo, frac) = ((pos / 4) as usize, pos % 4);
    let hi = (lo + 1).min(sorted.len() - 1);
    4 * sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn c4_tukey_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..1000 {
        let n = if case % 10 == 0 { rng.random_range(1..=10_000) } else { rng.random_range(1..=300) };
        let spread = rng.random_range(1..200_000u64);
        let records: Vec<LogRecord> = (0..n)
            .map(|i| {
                let chars = if rng.random_bool(0.05) { rng.random_range(0..spread * 5) } else { rng.random_range(0..spread) };
                LogRecord {
                    byte_size: chars + rng.random_range(0..chars / 10 + 1),
                    char_count: chars as usize,
                    ..LogRecord::new(format!("{i}"), "", None)
                }
            })
            .collect();
        let cap = rng.random_range(spread / 2..spread * 6 + 1);
        let report = tukey_filter(&records, cap).map_err(|e| e.to_string())?;
        let mut sorted: Vec<u64> = records.iter().map(|r| r.char_count as u64).collect();
        sorted.sort_unstable();
        let (q1x4, q3x4) = (quadruple_quantile(&sorted, 1), quadruple_quantile(&sorted, 3));
        // 8·lower = 8·Q1 - 12·IQR, 8·upper = 8·Q3 + 12·IQR, with Q in quarters
        let iqr_x4 = q3x4 - q1x4;
        let lower_x8 = 2 * q1x4 as i128 - 3 * iqr_x4 as i128;
        let upper_x8 = 2 * q3x4 as i128 + 3 * iqr_x4 as i128;
        if report.lower_bound != lower_x8 as f64 / 8.0 || report.upper_bound != upper_x8 as f64 / 8.0 {
            return Err(format!(
                "case {case}: bounds ({}, {}) vs oracle ({}, {})",
                report.lower_bound,
                report.upper_bound,
                lower_x8 as f64 / 8.0,
                upper_x8 as f64 / 8.0
            ));
        }
        let kept: Vec<String> = records
            .iter()
            .filter(|r| {
                let x8 = 8 * r.char_count as i128;
                x8 >= lower_x8 && x8 <= upper_x8 && r.byte_size <= cap
            })
            .map(|r| r.id.clone())
            .collect();
        if kept != report.kept_ids {
            return Err(format!("case {case}: kept sets differ"));
        }
    }
    Ok("1000 size lists (up to 10,000 entries), bounds and kept sets identical".into())
}

// 5. metrics vs per-sample brute force

fn c5_metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for case in 0..500 {
        let n = rng.random_range(1..400);
        let k = 4;
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| if rng.random_bool(0.6) { t } else { rng.random_range(0..k) })
            .collect();
        let m = Metrics::from_predictions(&truth, &pred, k).map_err(|e| e.to_string())?;
        let mut f1s = Vec::new();
        let mut diffs = Vec::new();
        for c in 0..k {
            let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
            for (&t, &p) in truth.iter().zip(&pred) {
                if p == c && t == c {
                    tp += 1.0;
                } else if p == c {
                    fp += 1.0;
                } else if t == c {
                    fn_ += 1.0;
                }
            }
            let precision: f64 = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let recall: f64 = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            f1s.push(f1);
            let pc = &m.per_class[c];
            diffs.extend([pc.precision - precision, pc.recall - recall, pc.f1 - f1]);
        }
        let accuracy = truth.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / n as f64;
        diffs.push(m.accuracy - accuracy);
        diffs.push(m.f1_macro - f1s.iter().sum::<f64>() / k as f64);
        diffs.push(m.f1_micro - accuracy);
        let err = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        if err > METRIC_TOL {
            return Err(format!("case {case}: deviation {err:e}"));
        }
        let rows: Vec<usize> = m.confusion.iter().map(|r| r.iter().sum()).collect();
        let counts: Vec<usize> = (0..k).map(|c| truth.iter().filter(|&&t| t == c).count()).collect();
        if rows != counts || m.total() != n {
            return Err(format!("case {case}: confusion rows {rows:?} vs class counts {counts:?}"));
        }
    }
    Ok(format!("500 prediction vectors, worst deviation {worst:.1e}; micro-F1 = accuracy"))
}

// shared synthetic benchmark

fn cleaned_samples(cfg: &SynConfig) -> Vec<LogRecord> {
    let ppu = PpuConfig::default();
    generate_samples(cfg)
        .unwrap()
        .into_iter()
        .map(|(id, label, text)| LogRecord::new(id, preprocess_log(&text, &ppu), Some(label)))
        .collect()
}

struct Bench {
    splits: Splits,
    vocab: CharVocab,
}

fn bench() -> &'static Bench {
    static BENCH: OnceLock<Bench> = OnceLock::new();
    BENCH.get_or_init(|| {
        let records = cleaned_samples(&SynConfig {
            seed: BENCH_SEED,
            ..SynConfig::default()
        });
        let splits = split_records(&records, 0.3, 0.1, BENCH_SEED).unwrap();
        let vocab = vocab_for(&splits.train).unwrap();
        Bench { splits, vocab }
    })
}

fn bench_train_config() -> TrainConfig {
    TrainConfig {
        lr: BENCH_LR,
        max_epochs: BENCH_MAX_EPOCHS,
        patience: BENCH_PATIENCE,
        seed: BENCH_SEED,
        ..TrainConfig::default()
    }
}

fn bench_arch(layers: usize) -> ArchConfig {
    let base = ArchConfig::default();
    ArchConfig {
        max_len: BENCH_MAX_LEN,
        conv_layers: vec![base.conv_layers[0]; layers],
        ..base
    }
}

fn run_bench(layers: usize) -> FitResult {
    let b = bench();
    let t = Instant::now();
    let fit = fit_classifier(&b.splits, &b.vocab, &bench_arch(layers), &bench_train_config(), None).unwrap();
    eprintln!(
        "  [{layers} conv layers] {} epochs in {:.0}s, test accuracy {:.4}",
        fit.outcome.history.epochs.len(),
        t.elapsed().as_secs_f64(),
        fit.test_metrics.accuracy
    );
    fit
}

fn three_layer_result() -> &'static (f64, f64, Vec<f64>) {
    static RESULT: OnceLock<(f64, f64, Vec<f64>)> = OnceLock::new();
    RESULT.get_or_init(|| {
        let m = run_bench(3).test_metrics;
        (m.accuracy, m.f1_macro, m.per_class.iter().map(|c| c.recall).collect())
    })
}

// 6. synthetic end-to-end

fn c6_end_to_end() -> Outcome {
    let b = bench();
    let (acc, f1, recalls) = three_layer_result();
    let recall_txt: Vec<String> = Label::ALL.iter().zip(recalls).map(|(l, r)| format!("{l} {r:.3}")).collect();
    check(
        *acc >= BENCH_ACCURACY && *f1 >= BENCH_MACRO_F1 && recalls.iter().all(|&r| r > BENCH_RECALL),
        format!(
            "{} train / {} val / {} test, max_len {BENCH_MAX_LEN}: accuracy {acc:.4}, macro-F1 {f1:.4}, recall [{}]",
            b.splits.train.len(),
            b.splits.val.len(),
            b.splits.test.len(),
            recall_txt.join(", ")
        ),
    )
}

// 7. overfit capacity

fn c7_overfit() -> Outcome {
    let records = cleaned_samples(&SynConfig {
        n_samples: 64,
        mean_blocks_per_log: 8,
        signature_strength: 1.0,
        seed: 7,
        ..SynConfig::default()
    });
    let arch = ArchConfig {
        max_len: 1_000,
        ..ArchConfig::default()
    };
    let vocab = vocab_for(&records).unwrap();
    let set = EncodedSet::encode(&records, &vocab, arch.max_len, arch.truncation).unwrap();
    let mut model = ResCnn::<f32>::build(&arch, &vocab, None, 7).unwrap();
    let cfg = TrainConfig {
        lr: BENCH_LR,
        max_epochs: 40,
        patience: 39,
        seed: 7,
        ..TrainConfig::default()
    };
    let out = train(&mut model, &set, &set, &cfg).map_err(|e| e.to_string())?;
    let first = out.history.epochs.iter().find(|e| e.val_accuracy == 1.0).map(|e| e.epoch);
    let best = out.history.epochs.iter().map(|e| e.val_accuracy).fold(0.0, f64::max);
    match first {
        Some(epoch) => Ok(format!("64 samples, default architecture: 100% train accuracy first at epoch {epoch}")),
        None => Err(format!("64 samples: best train accuracy {best:.4} after {} epochs", cfg.max_epochs)),
    }
}

// 8. robustness to depth

fn c8_depth() -> Outcome {
    let mut table = BTreeMap::new();
    for layers in 1..=4 {
        let acc = if layers == 3 { three_layer_result().0 } else { run_bench(layers).test_metrics.accuracy };
        table.insert(layers, acc);
    }
    let rows: Vec<String> = table.iter().map(|(l, a)| format!("{l} layer(s): {a:.4}")).collect();
    check(table.values().all(|&a| a >= DEPTH_ACCURACY), rows.join(" | "))
}

// 9. language model sanity

fn c9_lm() -> Outcome {
    let corpus = "ab".repeat(200);
    let vocab = CharVocab::build(&corpus).unwrap();
    let ids = vocab.encode_all(&corpus);
    let cfg = LmConfig {
        seq_len: 16,
        embed_dim: 16,
        lstm_units: 64,
        lr: 1e-2,
        batch_size: 32,
        max_epochs: 20,
        patience: 5,
        seed: 9,
        ..LmConfig::default()
    };
    let pairs = make_sequence_pairs(&ids, cfg.seq_len, 1).map_err(|e| e.to_string())?;
    let (ckpt, history) = lm_train(&pairs, &vocab, &cfg).map_err(|e| e.to_string())?;
    let model = CharLm::<f32>::from_checkpoint(&ckpt).map_err(|e| e.to_string())?;
    let ln_v = (vocab.size() as f64).ln();
    let p_b = model.next_char_probs(&vocab.encode_all("abababa")).map_err(|e| e.to_string())?[vocab.id('b')];
    let p_a = model.next_char_probs(&vocab.encode_all("bababab")).map_err(|e| e.to_string())?[vocab.id('a')];
    let rel = (history.initial_loss - ln_v).abs() / ln_v;
    check(
        p_a > 0.9 && p_b > 0.9 && rel <= 0.05,
        format!(
            "P(b|..a) = {p_b:.4}, P(a|..b) = {p_a:.4}; initial loss {:.4} vs ln V = {ln_v:.4} ({:.1}%)",
            history.initial_loss,
            100.0 * rel
        ),
    )
}

// 10. determinism and serialization

fn histories_match(a: &History, b: &History) -> bool {
    a.epochs.len() == b.epochs.len()
        && a.best_epoch == b.best_epoch
        && a.epochs.iter().zip(&b.epochs).all(|(x, y)| {
            [
                (x.train_loss, y.train_loss),
                (x.val_loss, y.val_loss),
                (x.train_accuracy, y.train_accuracy),
                (x.val_accuracy, y.val_accuracy),
            ]
            .iter()
            .all(|(p, q)| (p - q).abs() <= HISTORY_TOL)
        })
}

fn c10_determinism() -> Outcome {
    let records = cleaned_samples(&SynConfig {
        n_samples: 120,
        mean_blocks_per_log: 6,
        seed: 10,
        ..SynConfig::default()
    });
    let splits = split_records(&records, 0.3, 0.1, 10).unwrap();
    let vocab = vocab_for(&splits.train).unwrap();
    let arch = ArchConfig {
        max_len: 800,
        ..ArchConfig::default()
    };
    let cfg = TrainConfig {
        lr: BENCH_LR,
        max_epochs: 3,
        patience: 2,
        seed: 10,
        ..TrainConfig::default()
    };
    let a = fit_classifier(&splits, &vocab, &arch, &cfg, None).map_err(|e| e.to_string())?;
    let b = fit_classifier(&splits, &vocab, &arch, &cfg, None).map_err(|e| e.to_string())?;
    let same_history = histories_match(&a.outcome.history, &b.outcome.history);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clf.ckpt");
    a.outcome.checkpoint.save(&path).map_err(|e| e.to_string())?;
    let loaded = ResCnn::<f32>::from_checkpoint(&ModelCheckpoint::load(&path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut bit_identical = true;
    for r in &splits.test {
        let (ca, pa) = predict(&a.model, r).unwrap();
        let (cb, pb) = predict(&loaded, r).unwrap();
        bit_identical &= ca == cb && pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits());
    }

    let corpus = "I: CELL ok\nC: GO\n".repeat(30);
    let lm_vocab = CharVocab::build(&corpus).unwrap();
    let ids = lm_vocab.encode_all(&corpus);
    let lm_cfg = LmConfig {
        seq_len: 10,
        embed_dim: 8,
        lstm_units: 16,
        lr: 1e-2,
        batch_size: 16,
        max_epochs: 3,
        seed: 10,
        ..LmConfig::default()
    };
    let pairs = make_sequence_pairs(&ids, 10, 1).unwrap();
    let (la, ha) = lm_train(&pairs, &lm_vocab, &lm_cfg).map_err(|e| e.to_string())?;
    let (_, hb) = lm_train(&pairs, &lm_vocab, &lm_cfg).map_err(|e| e.to_string())?;
    let lm_same = ha.epoch_loss.iter().zip(&hb.epoch_loss).all(|(x, y)| (x - y).abs() <= HISTORY_TOL);
    let lm_path = dir.path().join("lm.ckpt");
    la.save(&lm_path).unwrap();
    let lm_a = CharLm::<f32>::from_checkpoint(&la).unwrap();
    let lm_b = CharLm::<f32>::from_checkpoint(&ModelCheckpoint::load(&lm_path).unwrap()).unwrap();
    let ctx = lm_vocab.encode_all("I: CE");
    let lm_bits = lm_a.next_char_probs(&ctx).unwrap() == lm_b.next_char_probs(&ctx).unwrap();

    check(
        same_history && bit_identical && lm_same && lm_bits,
        format!(
            "classifier history identical: {same_history}, LM history identical: {lm_same}; \
             round-trip predictions bit-identical: classifier {bit_identical} ({} logs), LM {lm_bits}",
            splits.test.len()
        ),
    )
}

// 11. context-length sweep

fn c11_context_sweep() -> Outcome {
    let records = cleaned_samples(&SynConfig {
        n_samples: 1_600,
        mean_blocks_per_log: 120,
        seed: 11,
        ..SynConfig::default()
    });
    let mean_len = records.iter().map(|r| r.char_count).sum::<usize>() as f64 / records.len() as f64;
    let splits = split_records(&records, 0.3, 0.1, 11).unwrap();
    let vocab = vocab_for(&splits.train).unwrap();
    let mut accs = Vec::new();
    for max_len in [500, 5_000] {
        let arch = ArchConfig {
            max_len,
            ..ArchConfig::default()
        };
        let t = Instant::now();
        let fit = fit_classifier(&splits, &vocab, &arch, &bench_train_config(), None).map_err(|e| e.to_string())?;
        eprintln!(
            "  [max_len {max_len}] {} epochs in {:.0}s, test accuracy {:.4}",
            fit.outcome.history.epochs.len(),
            t.elapsed().as_secs_f64(),
            fit.test_metrics.accuracy
        );
        accs.push(fit.test_metrics.accuracy);
    }
    check(
        (8_000.0..=12_000.0).contains(&mean_len) && accs[1] - accs[0] >= SWEEP_GAIN,
        format!(
            "mean cleaned log length {mean_len:.0} chars; accuracy@500 {:.4}, accuracy@5000 {:.4} (gain {:.1} points)",
            accs[0],
            accs[1],
            100.0 * (accs[1] - accs[0])
        ),
    )
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "gradient correctness", c1_gradients),
        (2, "parameter-count anchors", c2_param_counts),
        (3, "sliding-window embedding oracle", c3_window_oracle),
        (4, "Tukey filter oracle", c4_tukey_oracle),
        (5, "metrics oracle", c5_metrics_oracle),
        (6, "synthetic end-to-end benchmark", c6_end_to_end),
        (7, "overfit capacity", c7_overfit),
        (8, "robustness to conv depth", c8_depth),
        (9, "language model sanity", c9_lm),
        (10, "determinism and serialization", c10_determinism),
        (11, "context-length sweep", c11_context_sweep),
    ];
    let selected: Option<Vec<u32>> = std::env::var("LOGTRIAGE_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, f) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
