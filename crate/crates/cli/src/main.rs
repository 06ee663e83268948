use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use logtriage::checkpoint::ModelCheckpoint;
use logtriage::classifier::{evaluate, predict_text, EncodedSet, ResCnn};
use logtriage::config::{ProviderKind, RunConfig};
use logtriage::corpus::{build_training_corpus, scan_corpus, write_manifest, Label, LogRecord, Ppu};
use logtriage::docembed::{
    embed_document, write_doc_embeddings, DocEmbeddingStore, EmbedClassifier, EmbedTrainConfig, EmbeddingProvider,
    HttpProvider, HttpProviderConfig, MockProvider,
};
use logtriage::lm::{extract_char_embeddings, lm_train_with, make_sequence_pairs, read_embeddings, write_embeddings};
use logtriage::pipeline::{fit_classifier, preprocess, split_records, vocab_for};
use logtriage::synlog::generate_dataset;
use logtriage::vocab::CharVocab;

/// Character-level defect triage for telecom test logs.
///
/// Any configuration key can also be given as `--section.key=value`,
/// e.g. `--train.lr=0.001`.
#[derive(Parser, Debug)]
#[command(name = "logtriage", version)]
struct Cli {
    /// INI-style run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file, for lm-export-emb).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Classifier input length in characters.
    #[arg(long, global = true)]
    max_len: Option<usize>,
    /// Insert a bidirectional LSTM after the embedding layer.
    #[arg(long, global = true)]
    bilstm: bool,
    /// Token-embedding provider for `embed`: mock or http.
    #[arg(long, global = true)]
    provider: Option<String>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a labelled synthetic corpus (logs/ and manifest.csv).
    Synth,
    /// Clean and size-filter a corpus; writes cleaned logs, the training
    /// corpus, the vocabulary and a filter report.
    Preprocess {
        input: PathBuf,
        /// `path,label` manifest; defaults to INPUT/manifest.csv when present.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train the character language model on a preprocessed directory.
    LmTrain { data: PathBuf },
    /// Export the character embedding table of a language-model checkpoint.
    LmExportEmb { checkpoint: PathBuf },
    /// Train the classifier on a preprocessed, labelled directory.
    ClfTrain {
        data: PathBuf,
        /// Embedding table from lm-export-emb used to initialise the model.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Evaluate a classifier checkpoint on a labelled manifest.
    ClfEval {
        checkpoint: PathBuf,
        data: PathBuf,
        /// Defaults to DATA/test_manifest.csv, then DATA/manifest.csv.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Classify log files; prints one JSON line per file.
    ClfPredict {
        checkpoint: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Sliding-window document embeddings plus a softmax head over them.
    Embed { data: PathBuf },
    /// Train and test the classifier across input lengths.
    SweepContext {
        data: PathBuf,
        /// Comma-separated lengths; overrides sweep.grid.
        #[arg(long)]
        grid: Option<String>,
    },
}

/// Errors caused by the invocation rather than by the pipeline.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Splits `--section.key=value` / `--section.key value` overrides out of the
/// raw arguments, leaving everything else for clap.
fn extract_overrides(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let name = body.split('=').next().unwrap_or_default();
        if !name.contains('.') {
            rest.push(arg);
            continue;
        }
        if body.contains('=') {
            overrides.push(body.to_string());
        } else {
            let value = it.next().unwrap_or_default();
            overrides.push(format!("{body}={value}"));
        }
    }
    (rest, overrides)
}

fn build_config(cli: &Cli, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(n) = cli.max_len {
        cfg.arch.max_len = n;
    }
    if cli.bilstm {
        cfg.arch.bilstm_front = true;
    }
    if let Some(p) = &cli.provider {
        cfg.embed.provider = p.parse()?;
    }
    if let Some(e) = &cli.endpoint {
        cfg.embed.endpoint = Some(e.clone());
    }
    cfg.propagate_seed();
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = cfg.out.clone().ok_or_else(|| usage("--out is required for this command"))?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn require(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.exists() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Labelled records of a preprocessed directory.
fn load_labelled(data: &Path, manifest: Option<&Path>) -> anyhow::Result<Vec<LogRecord>> {
    require(data, "data directory")?;
    let manifest = manifest.map(Path::to_path_buf).unwrap_or_else(|| data.join("manifest.csv"));
    require(&manifest, "manifest")?;
    let report = scan_corpus(data, Some(&manifest))?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if report.records.is_empty() {
        return Err(usage("no logs found"));
    }
    Ok(report.records)
}

fn load_vocab_or_build(data: &Path, records: &[LogRecord]) -> anyhow::Result<CharVocab> {
    let path = data.join("vocab.json");
    if path.exists() {
        Ok(CharVocab::load(&path)?)
    } else {
        Ok(vocab_for(records)?)
    }
}

fn cmd_synth(cfg: &RunConfig) -> anyhow::Result<()> {
    let dir = out_dir(cfg)?;
    let manifest = generate_dataset(&cfg.synth, &dir)?;
    println!("wrote {} synthetic logs; manifest {}", cfg.synth.n_samples, manifest.display());
    Ok(())
}

fn cmd_preprocess(cfg: &RunConfig, input: &Path, manifest: Option<&Path>) -> anyhow::Result<()> {
    require(input, "input directory")?;
    let default_manifest = input.join("manifest.csv");
    let manifest = manifest
        .map(Path::to_path_buf)
        .or_else(|| default_manifest.exists().then_some(default_manifest));
    let scan = scan_corpus(input, manifest.as_deref())?;
    for w in &scan.warnings {
        log::warn!("{w}");
    }
    if scan.records.is_empty() {
        return Err(usage("no logs found"));
    }
    let out = out_dir(cfg)?;
    let ppu = Ppu::new(cfg.ppu.clone())?;
    let pre = preprocess(&scan.records, &ppu, cfg.hard_cap_bytes)?;
    if pre.records.is_empty() {
        return Err(usage("every log was removed by the size filter"));
    }
    let mut rows = Vec::new();
    for r in &pre.records {
        let path = out.join(&r.id);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, &r.raw_text).with_context(|| format!("writing {}", path.display()))?;
        if let Some(l) = r.label {
            rows.push((r.id.clone(), l));
        }
    }
    if !rows.is_empty() {
        write_manifest(&out.join("manifest.csv"), &rows)?;
    }
    let corpus = build_training_corpus(&pre.records);
    std::fs::write(out.join("corpus.txt"), &corpus)?;
    let vocab = CharVocab::build(&corpus)?;
    vocab.save(&out.join("vocab.json"))?;
    write_json(
        &out.join("filter_report.json"),
        &serde_json::json!({
            "scanned": scan.records.len(),
            "unselected": pre.unselected,
            "kept": pre.records.len(),
            "size_filter": pre.report,
        }),
    )?;
    println!(
        "kept {} of {} logs; vocabulary of {} ids; corpus {} chars",
        pre.records.len(),
        scan.records.len(),
        vocab.size(),
        corpus.chars().count()
    );
    Ok(())
}

fn cmd_lm_train(cfg: &RunConfig, data: &Path) -> anyhow::Result<()> {
    let corpus_path = data.join("corpus.txt");
    require(&corpus_path, "training corpus")?;
    let corpus = std::fs::read_to_string(&corpus_path)?;
    let vocab = match CharVocab::load(&data.join("vocab.json")) {
        Ok(v) => v,
        Err(_) => CharVocab::build(&corpus)?,
    };
    let out = out_dir(cfg)?;
    let ids = vocab.encode_all(&corpus);
    let pairs = make_sequence_pairs(&ids, cfg.lm.seq_len, cfg.lm.shift)?;
    let ckpt_path = out.join("lm.ckpt");
    let (ckpt, history) = lm_train_with(&pairs, &vocab, &cfg.lm, |_, ckpt| ckpt.save(&ckpt_path))?;
    ckpt.save(&ckpt_path)?;
    write_json(&out.join("lm_history.json"), &history)?;
    println!(
        "trained language model: {} pairs, best epoch {}, final loss {:.4}",
        pairs.len(),
        history.best_epoch,
        history.epoch_loss.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_lm_export(cfg: &RunConfig, checkpoint: &Path) -> anyhow::Result<()> {
    require(checkpoint, "checkpoint")?;
    let ckpt = ModelCheckpoint::load(checkpoint)?;
    let (table, vocab) = extract_char_embeddings(&ckpt)?;
    let out = cfg.out.clone().ok_or_else(|| usage("--out FILE is required"))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_embeddings(&out, &table, &vocab)?;
    println!("exported embeddings of shape ({}, {}) to {}", table.shape()[0], table.shape()[1], out.display());
    Ok(())
}

fn cmd_clf_train(cfg: &RunConfig, data: &Path, embeddings: Option<&Path>) -> anyhow::Result<()> {
    let records = load_labelled(data, None)?;
    let out = out_dir(cfg)?;
    let splits = split_records(&records, cfg.test_fraction, cfg.train.val_fraction, cfg.seed)?;
    let (vocab, init) = match embeddings {
        Some(path) => {
            require(path, "embedding file")?;
            let (table, hash) = read_embeddings(path)?;
            let vocab_path = data.join("vocab.json");
            require(&vocab_path, "vocabulary")?;
            let vocab = CharVocab::load(&vocab_path)?;
            if vocab.hash() != hash {
                bail!(usage(format!(
                    "embeddings in {} were built for a different vocabulary than {}",
                    path.display(),
                    vocab_path.display()
                )));
            }
            (vocab, Some(table))
        }
        None => (load_vocab_or_build(data, &splits.train)?, None),
    };
    let mut arch = cfg.arch.clone();
    if let Some(t) = &init {
        arch.embed_dim = t.shape()[1];
    }
    let fit = fit_classifier(&splits, &vocab, &arch, &cfg.train, init.as_ref())?;
    fit.outcome.checkpoint.save(&out.join("classifier.ckpt"))?;
    write_json(&out.join("history.json"), &fit.outcome.history)?;
    fit.test_metrics.write_report(&out.join("metrics.json"), &out.join("confusion.csv"))?;
    let rows = |rs: &[LogRecord]| rs.iter().filter_map(|r| Some((r.id.clone(), r.label?))).collect::<Vec<(String, Label)>>();
    write_manifest(&out.join("test_manifest.csv"), &rows(&splits.test))?;
    println!(
        "trained classifier ({} parameters), best epoch {}; test accuracy {:.4}, macro F1 {:.4}",
        fit.model.param_count(),
        fit.outcome.history.best_epoch,
        fit.test_metrics.accuracy,
        fit.test_metrics.f1_macro
    );
    Ok(())
}

fn load_classifier(path: &Path) -> anyhow::Result<ResCnn<f32>> {
    require(path, "checkpoint")?;
    Ok(ResCnn::from_checkpoint(&ModelCheckpoint::load(path)?)?)
}

fn cmd_clf_eval(cfg: &RunConfig, checkpoint: &Path, data: &Path, manifest: Option<&Path>) -> anyhow::Result<()> {
    let model = load_classifier(checkpoint)?;
    let manifest = match manifest {
        Some(m) => m.to_path_buf(),
        None => {
            let test = data.join("test_manifest.csv");
            if test.exists() {
                test
            } else {
                data.join("manifest.csv")
            }
        }
    };
    let records = load_labelled(data, Some(&manifest))?;
    let set = EncodedSet::encode(&records, &model.vocab, model.arch.max_len, model.arch.truncation)?;
    let metrics = evaluate(&model, &set)?;
    if let Some(out) = &cfg.out {
        std::fs::create_dir_all(out)?;
        metrics.write_report(&out.join("metrics.json"), &out.join("confusion.csv"))?;
    }
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn cmd_clf_predict(cfg: &RunConfig, checkpoint: &Path, files: &[PathBuf]) -> anyhow::Result<()> {
    let model = load_classifier(checkpoint)?;
    let ppu = Ppu::new(cfg.ppu.clone())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for file in files {
        require(file, "log file")?;
        let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
        let text = ppu.clean(&String::from_utf8_lossy(&bytes));
        let (class, probs) = predict_text(&model, &text)?;
        let probabilities: serde_json::Map<String, serde_json::Value> = Label::ALL
            .iter()
            .zip(&probs)
            .map(|(l, &p)| (l.as_str().to_string(), p.into()))
            .collect();
        let label = Label::from_index(class).map_or_else(|| class.to_string(), |l| l.as_str().to_string());
        let line = serde_json::json!({
            "path": file.display().to_string(),
            "class": label,
            "probabilities": probabilities,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn make_provider(cfg: &RunConfig) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
    let e = &cfg.embed;
    Ok(match e.provider {
        ProviderKind::Mock => Box::new(MockProvider::new(e.dim, cfg.seed, e.context)),
        ProviderKind::Http => {
            let endpoint = e
                .endpoint
                .clone()
                .ok_or_else(|| usage("--endpoint is required with --provider http"))?;
            let mut hc = HttpProviderConfig::new(endpoint, e.context, e.dim);
            hc.auth_token = e.auth_token.clone();
            hc.timeout = e.timeout;
            hc.cache_dir = e.cache_dir.clone();
            Box::new(HttpProvider::new(hc)?)
        }
    })
}

fn cmd_embed(cfg: &RunConfig, data: &Path) -> anyhow::Result<()> {
    let records = load_labelled(data, None)?;
    let out = out_dir(cfg)?;
    let vocab = load_vocab_or_build(data, &records)?;
    let provider = make_provider(cfg)?;
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let tokens = vocab.encode_all(&r.raw_text);
        if tokens.is_empty() {
            log::warn!("skipping empty log {}", r.id);
            continue;
        }
        let doc = embed_document(&tokens, provider.as_ref(), cfg.embed.context, cfg.embed.overlap(), cfg.embed.pooling)
            .with_context(|| format!("embedding {}", r.id))?;
        rows.push((r.clone(), doc.vector));
    }
    let store = DocEmbeddingStore {
        dim: provider.dim(),
        provider: provider.id(),
        rows: rows
            .iter()
            .map(|(r, v)| (r.id.clone(), v.iter().map(|&x| x as f32).collect()))
            .collect(),
    };
    write_doc_embeddings(&out.join("doc_embeddings.bin"), &store)?;

    let kept: Vec<LogRecord> = rows.iter().map(|(r, _)| r.clone()).collect();
    let splits = split_records(&kept, cfg.test_fraction, 0.0, cfg.seed)?;
    let features: std::collections::HashMap<&str, &Vec<f64>> = rows.iter().map(|(r, v)| (r.id.as_str(), v)).collect();
    let xy = |rs: &[LogRecord]| -> (Vec<Vec<f64>>, Vec<usize>) {
        rs.iter()
            .filter_map(|r| Some((features[r.id.as_str()].clone(), r.label?.index())))
            .unzip()
    };
    let (x_train, y_train) = xy(&splits.train);
    let (x_test, y_test) = xy(&splits.test);
    let head_cfg = EmbedTrainConfig {
        seed: cfg.seed,
        ..EmbedTrainConfig::default()
    };
    let head = EmbedClassifier::train(&x_train, &y_train, Label::COUNT, &head_cfg)?;
    let metrics = head.evaluate(&x_test, &y_test)?;
    metrics.write_report(&out.join("metrics.json"), &out.join("confusion.csv"))?;
    println!(
        "embedded {} documents with {} (d = {}); head test accuracy {:.4}, macro F1 {:.4}",
        rows.len(),
        provider.id(),
        provider.dim(),
        metrics.accuracy,
        metrics.f1_macro
    );
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, data: &Path, grid: Option<&str>) -> anyhow::Result<()> {
    let records = load_labelled(data, None)?;
    let out = out_dir(cfg)?;
    let grid: Vec<usize> = match grid {
        Some(g) => g
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| usage(format!("invalid grid entry {s:?}"))))
            .collect::<anyhow::Result<_>>()?,
        None => cfg.sweep_grid.clone(),
    };
    if grid.is_empty() {
        return Err(usage("the sweep grid is empty"));
    }
    let splits = split_records(&records, cfg.test_fraction, cfg.train.val_fraction, cfg.seed)?;
    let vocab = load_vocab_or_build(data, &splits.train)?;
    let mut csv = String::from("max_len,accuracy,f1_macro,f1_micro,best_epoch\n");
    for &len in &grid {
        let arch = logtriage::classifier::ArchConfig {
            max_len: len,
            ..cfg.arch.clone()
        };
        arch.validate()?;
        let fit = fit_classifier(&splits, &vocab, &arch, &cfg.train, None)?;
        let m = &fit.test_metrics;
        println!("max_len {len}: accuracy {:.4}, macro F1 {:.4}", m.accuracy, m.f1_macro);
        csv.push_str(&format!(
            "{len},{:.6},{:.6},{:.6},{}\n",
            m.accuracy, m.f1_macro, m.f1_micro, fit.outcome.history.best_epoch
        ));
    }
    std::fs::write(out.join("sweep.csv"), csv)?;
    Ok(())
}

fn run(cli: Cli, overrides: &[String]) -> anyhow::Result<()> {
    let cfg = build_config(&cli, overrides)?;
    match &cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Preprocess { input, manifest } => cmd_preprocess(&cfg, input, manifest.as_deref()),
        Command::LmTrain { data } => cmd_lm_train(&cfg, data),
        Command::LmExportEmb { checkpoint } => cmd_lm_export(&cfg, checkpoint),
        Command::ClfTrain { data, embeddings } => cmd_clf_train(&cfg, data, embeddings.as_deref()),
        Command::ClfEval {
            checkpoint,
            data,
            manifest,
        } => cmd_clf_eval(&cfg, checkpoint, data, manifest.as_deref()),
        Command::ClfPredict { checkpoint, files } => cmd_clf_predict(&cfg, checkpoint, files),
        Command::Embed { data } => cmd_embed(&cfg, data),
        Command::SweepContext { data, grid } => cmd_sweep(&cfg, data, grid.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<logtriage::Error>() {
            return if e.is_user_error() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (args, overrides) = extract_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_are_split_out() {
        let args = ["logtriage", "--arch.conv-layers", "64x3", "--train.lr=0.01", "--seed", "3", "synth"]
            .map(String::from)
            .to_vec();
        let (rest, overrides) = extract_overrides(args);
        assert_eq!(rest, ["logtriage", "--seed", "3", "synth"]);
        assert_eq!(overrides, ["arch.conv-layers=64x3", "train.lr=0.01"]);
    }
}
