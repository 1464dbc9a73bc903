//! Glue from a labelled corpus to model-ready splits and embeddings.

use serde::{Deserialize, Serialize};

use crate::corpus::{encode, split, Corpus, Post, Split, TokenizedPost, TRAIN_FRACTION};
use crate::error::Result;
use crate::text::{tokenize, train_skipgram, EmbeddingTable, SkipGramConfig, TokenizerMode, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    /// Maximum number of regular tokens kept in the vocabulary.
    pub vocab_size: usize,
    pub tokenizer: TokenizerMode,
    pub skipgram: SkipGramConfig,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            vocab_size: 2000,
            tokenizer: TokenizerMode::default(),
            skipgram: SkipGramConfig::default(),
        }
    }
}

/// The seeded train / dev / test partition of a corpus.
pub fn split_corpus(corpus: &Corpus, seed: u64) -> Result<Split<Post>> {
    split(&corpus.posts, TRAIN_FRACTION, seed)
}

/// Builds the vocabulary and skip-gram table from `posts` (training text only).
pub fn build_embeddings(posts: &[Post], cfg: &EmbedConfig) -> Result<(Vocabulary, EmbeddingTable)> {
    let tokens: Vec<Vec<String>> = posts.iter().map(|p| tokenize(&p.text, cfg.tokenizer)).collect();
    let vocab = Vocabulary::build(&tokens, cfg.vocab_size)?;
    let ids: Vec<Vec<usize>> = tokens.iter().map(|t| vocab.encode(t)).collect();
    let table = train_skipgram(&ids, vocab.len(), &cfg.skipgram)?;
    Ok((vocab, table))
}

pub fn encode_split(s: &Split<Post>, vocab: &Vocabulary, mode: TokenizerMode) -> Result<Split<TokenizedPost>> {
    Ok(Split {
        train: encode(&s.train, vocab, mode)?,
        dev: encode(&s.dev, vocab, mode)?,
        test: encode(&s.test, vocab, mode)?,
    })
}

/// Everything downstream of the corpus for one seed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingTable,
    pub data: Split<TokenizedPost>,
    pub num_locations: usize,
}

/// Splits with `seed`, embeds the train and dev text, and encodes all three parts.
pub fn prepare(corpus: &Corpus, cfg: &EmbedConfig, seed: u64) -> Result<Prepared> {
    let s = split_corpus(corpus, seed)?;
    let text: Vec<Post> = s.train.iter().chain(&s.dev).cloned().collect();
    let (vocab, embeddings) = build_embeddings(&text, cfg)?;
    let data = encode_split(&s, &vocab, cfg.tokenizer)?;
    Ok(Prepared {
        vocab,
        embeddings,
        data,
        num_locations: corpus.num_locations,
    })
}
