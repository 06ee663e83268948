use logtriage::lm::*;
use logtriage::vocab::CharVocab;

fn toy_config() -> LmConfig {
    LmConfig {
        seq_len: 12,
        shift: 1,
        embed_dim: 8,
        lstm_units: 24,
        lr: 1e-2,
        batch_size: 16,
        max_epochs: 15,
        patience: 5,
        max_pairs_per_epoch: None,
        seed: 3,
    }
}

#[test]
fn learns_a_period_two_sequence() {
    let corpus = "ab".repeat(150);
    let vocab = CharVocab::build(&corpus).unwrap();
    let ids = vocab.encode_all(&corpus);
    let pairs = make_sequence_pairs(&ids, 12, 1).unwrap();
    let cfg = toy_config();
    let (ckpt, history) = lm_train(&pairs, &vocab, &cfg).unwrap();
    let ln_v = (vocab.size() as f64).ln();
    assert!((history.initial_loss - ln_v).abs() <= 0.05 * ln_v, "initial loss {}", history.initial_loss);
    assert!(history.epoch_loss[1] < history.epoch_loss[0]);

    let model = CharLm::<f32>::from_checkpoint(&ckpt).unwrap();
    let context = vocab.encode_all("abababa");
    let probs = model.next_char_probs(&context).unwrap();
    assert!(probs[vocab.id('b')] > 0.9, "{probs:?}");
}

#[test]
fn embeddings_export_round_trip() {
    let corpus = "I: ok\nC: go\n".repeat(10);
    let vocab = CharVocab::build(&corpus).unwrap();
    let ids = vocab.encode_all(&corpus);
    let pairs = make_sequence_pairs(&ids, 6, 1).unwrap();
    let cfg = LmConfig {
        max_epochs: 1,
        patience: 0,
        seq_len: 6,
        ..toy_config()
    };
    let (ckpt, _) = lm_train(&pairs, &vocab, &cfg).unwrap();
    let (table, v2) = extract_char_embeddings(&ckpt).unwrap();
    assert_eq!(table.shape(), &[vocab.size(), 8]);
    assert_eq!(v2, vocab);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.bin");
    write_embeddings(&path, &table, &vocab).unwrap();
    let (back, hash) = read_embeddings(&path).unwrap();
    assert_eq!(back, table);
    assert_eq!(hash, vocab.hash());
}
