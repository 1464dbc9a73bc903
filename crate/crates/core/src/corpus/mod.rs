//! Labeled posts: schema, JSONL persistence, splitting, encoding and the
//! synthetic planted-correlation generator.

mod io;
mod post;
mod split;
mod synth;

pub use io::{load, read_jsonl, save, write_jsonl};
pub use post::{encode, Corpus, Emotion, Gender, Post, TokenizedPost, NUM_EMOTIONS};
pub use split::{split, Split, DEV_FRACTION, TRAIN_FRACTION};
pub use synth::{synthesize, SynthConfig, DEFAULT_PREVALENCE};
