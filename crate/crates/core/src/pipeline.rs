//! End-to-end steps shared by the command-line tool and the benchmarks.

use crate::classifier::{evaluate, stratified_split, train, ArchConfig, EncodedSet, Metrics, ResCnn, TrainConfig, TrainOutcome};
use crate::corpus::{build_training_corpus, tukey_filter, LogRecord, Ppu, SizeFilterReport};
use crate::nn::Tensor;
use crate::vocab::CharVocab;
use crate::{Error, Result};

pub struct Preprocessed {
    /// Cleaned records that passed the category and size filters.
    pub records: Vec<LogRecord>,
    pub report: SizeFilterReport,
    /// Number of records rejected by the category patterns.
    pub unselected: usize,
}

/// Category selection, cleaning and the size filter.
pub fn preprocess(records: &[LogRecord], ppu: &Ppu, hard_cap_bytes: u64) -> Result<Preprocessed> {
    if records.is_empty() {
        return Err(Error::Empty("no logs found"));
    }
    let selected: Vec<&LogRecord> = records.iter().filter(|r| ppu.selects(&r.raw_text)).collect();
    let unselected = records.len() - selected.len();
    let cleaned: Vec<LogRecord> = selected.iter().map(|r| r.with_text(ppu.clean(&r.raw_text))).collect();
    if cleaned.is_empty() {
        return Err(Error::Empty("no logs matched the category patterns"));
    }
    let report = tukey_filter(&cleaned, hard_cap_bytes)?;
    let kept: std::collections::HashSet<&str> = report.kept_ids.iter().map(String::as_str).collect();
    let records = cleaned.iter().filter(|r| kept.contains(r.id.as_str())).cloned().collect();
    Ok(Preprocessed {
        records,
        report,
        unselected,
    })
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Vec<LogRecord>,
    pub val: Vec<LogRecord>,
    pub test: Vec<LogRecord>,
}

/// Stratified train/test split, then a stratified validation share carved
/// from the training part.
pub fn split_records(records: &[LogRecord], test_fraction: f64, val_fraction: f64, seed: u64) -> Result<Splits> {
    let labels = records
        .iter()
        .map(|r| {
            r.label
                .map(|l| l.index())
                .ok_or_else(|| Error::InvalidLabel(format!("record {} has no label", r.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rest, test) = stratified_split(&labels, test_fraction, crate::seed::derive(seed, "split-test", 0));
    let rest_labels: Vec<usize> = rest.iter().map(|&i| labels[i]).collect();
    let (train, val) = stratified_split(&rest_labels, val_fraction, crate::seed::derive(seed, "split-val", 0));
    let pick = |idx: &[usize], base: &[usize]| idx.iter().map(|&j| records[base[j]].clone()).collect::<Vec<_>>();
    let identity: Vec<usize> = (0..records.len()).collect();
    Ok(Splits {
        train: pick(&train, &rest),
        val: pick(&val, &rest),
        test: pick(&test, &identity),
    })
}

pub fn vocab_for(records: &[LogRecord]) -> Result<CharVocab> {
    CharVocab::build(&build_training_corpus(records))
}

pub struct FitResult {
    pub model: ResCnn<f32>,
    pub outcome: TrainOutcome,
    pub test_metrics: Metrics,
}

/// Builds, trains and tests a classifier. The validation set falls back to
/// the training set when the split left it empty.
pub fn fit_classifier(
    splits: &Splits,
    vocab: &CharVocab,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    init_embeddings: Option<&Tensor<f32>>,
) -> Result<FitResult> {
    let encode = |r: &[LogRecord]| EncodedSet::encode(r, vocab, arch.max_len, arch.truncation);
    let train_set = encode(&splits.train)?;
    let val_set = if splits.val.is_empty() { train_set.clone() } else { encode(&splits.val)? };
    let test_set = encode(&splits.test)?;
    let mut model = ResCnn::build(arch, vocab, init_embeddings, crate::seed::derive(cfg.seed, "classifier", 0))?;
    let outcome = train(&mut model, &train_set, &val_set, cfg)?;
    let test_metrics = evaluate(&model, &test_set)?;
    Ok(FitResult {
        model,
        outcome,
        test_metrics,
    })
}
