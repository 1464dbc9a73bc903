//! Tokenization, vocabulary construction and skip-gram embedding pretraining.

mod embedding;
mod skipgram;
mod tokenize;
mod vocab;

pub use embedding::EmbeddingTable;
pub use skipgram::{train_skipgram, SkipGramConfig};
pub use tokenize::{tokenize, TokenizerMode};
pub use vocab::{Vocabulary, OOV_ID, OOV_TOKEN, PAD_ID, PAD_TOKEN};
