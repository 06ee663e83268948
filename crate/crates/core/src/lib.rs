//! Character-level defect triage for telecom test logs.
//!
//! The pipeline runs raw logs through a rule-based cleaner and a size filter,
//! trains a character LSTM language model whose embedding table seeds a
//! residual 1D-CNN classifier, and offers a sliding-window pooling scheme for
//! embedding documents longer than any provider's context window.
//!
//! ```no_run
//! use logtriage::vocab::CharVocab;
//!
//! let vocab = CharVocab::build("I: CELL OK\nC: ATTACH\n").unwrap();
//! let ids = vocab.encode("I: OK", 8);
//! assert_eq!(ids.len(), 8);
//! ```

pub mod checkpoint;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod docembed;
pub mod error;
pub mod lm;
pub mod nn;
pub mod pipeline;
pub mod seed;
pub mod synlog;
pub mod vocab;

pub use error::{Error, Result};
