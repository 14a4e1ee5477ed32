//! Training-free compression of multi-vector document representations along
//! the token axis, with exhaustive MaxSim retrieval and IR evaluation.
//!
//! The pipeline is: read a [`store::Corpus`], compress every document with
//! one of the [`compress::Method`]s, search it with [`retrieval::search`]
//! and score the run with [`metrics::evaluate_run`]. [`sweep::run_sweep`]
//! ties these together over a grid of methods and keep ratios.

pub mod compress;
pub mod error;
pub mod importance;
pub mod matrix;
pub mod metrics;
pub mod retrieval;
pub mod rng;
pub mod store;
pub mod sweep;

pub use compress::{budget, compress_corpus, compress_document, CompressedDocument, CompressionConfig, Method};
pub use error::{Error, Result};
pub use importance::{build_idf_table, score_tokens, IdfTable, ImportanceScores, ScoringMethod};
pub use matrix::TokenMatrix;
pub use metrics::{evaluate_run, load_qrels, ndcg_at_k, read_run, recall_at_k, write_run, Gain, Qrels};
pub use retrieval::{maxsim, search, RankedList, ScoredDoc};
pub use store::{read_corpus, validate_corpus, write_corpus, Corpus, CorpusManifest, DocumentRecord};
