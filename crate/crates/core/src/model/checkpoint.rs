//! Binary checkpoint: magic, a length-prefixed JSON manifest, then each
//! parameter's values as little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ParamStore, Partition};
use super::{ModelConfig, NpdModel};
use crate::autodiff::Tensor;
use crate::error::{NpdError, Result};
use crate::text::{TokenizerMode, Vocabulary};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NPDCKPT1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamMeta {
    pub name: String,
    pub partition: Partition,
    pub trainable: bool,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model: ModelConfig,
    pub num_emotions: usize,
    pub seed: u64,
    pub tokenizer: TokenizerMode,
    pub vocab_fingerprint: String,
    pub vocab: Vec<String>,
    pub params: Vec<ParamMeta>,
}

/// A trained model with everything needed to run it on raw text.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: NpdModel,
    pub vocab: Vocabulary,
    pub tokenizer: TokenizerMode,
    pub seed: u64,
}

impl Checkpoint {
    pub fn manifest(&self) -> Manifest {
        Manifest {
            model: self.model.config().clone(),
            num_emotions: self.model.config().num_emotions(),
            seed: self.seed,
            tokenizer: self.tokenizer,
            vocab_fingerprint: self.vocab.fingerprint(),
            vocab: self.vocab.tokens().to_vec(),
            params: self
                .model
                .params()
                .iter()
                .map(|p| ParamMeta {
                    name: p.name.clone(),
                    partition: p.partition,
                    trainable: p.trainable,
                    shape: p.value.shape().to_vec(),
                })
                .collect(),
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let manifest = serde_json::to_vec(&self.manifest()).map_err(std::io::Error::other)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(manifest.len() as u64).to_le_bytes())?;
        w.write_all(&manifest)?;
        for p in self.model.params().iter() {
            for v in p.value.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let fmt = |e: std::io::Error| NpdError::Format(format!("truncated checkpoint: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(fmt)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(NpdError::Format("not a checkpoint file (bad magic)".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(fmt)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut manifest = vec![0u8; len];
        r.read_exact(&mut manifest).map_err(fmt)?;
        let manifest: Manifest = serde_json::from_slice(&manifest)
            .map_err(|e| NpdError::Format(format!("bad checkpoint manifest: {e}")))?;

        let vocab = Vocabulary::from_tokens(manifest.vocab)?;
        if vocab.fingerprint() != manifest.vocab_fingerprint {
            return Err(NpdError::Format("vocabulary fingerprint mismatch".into()));
        }
        let mut store = ParamStore::new();
        let mut buf = [0u8; 8];
        for meta in manifest.params {
            let n: usize = meta.shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut buf).map_err(fmt)?;
                data.push(f64::from_le_bytes(buf));
            }
            store.push(meta.name, Tensor::new(meta.shape, data)?, meta.partition, meta.trainable);
        }
        if r.read(&mut buf).map_err(fmt)? != 0 {
            return Err(NpdError::Format("trailing bytes after checkpoint".into()));
        }
        let model = NpdModel::from_params(manifest.model, store)?;
        if model.vocab_size() != vocab.len() {
            return Err(NpdError::Format(format!(
                "embedding table has {} rows but vocabulary has {} tokens",
                model.vocab_size(),
                vocab.len()
            )));
        }
        Ok(Checkpoint {
            model,
            vocab,
            tokenizer: manifest.tokenizer,
            seed: manifest.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| NpdError::io(path, e))?;
        self.write(BufWriter::new(f)).map_err(|e| NpdError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| NpdError::io(path, e))?;
        Self::read(BufReader::new(f))
    }
}
