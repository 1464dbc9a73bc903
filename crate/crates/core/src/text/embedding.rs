use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::vocab::Vocabulary;
use crate::autodiff::Tensor;
use crate::error::{NpdError, Result};

/// Lookup table `D`: one row of `embed_dim` reals per vocabulary id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    matrix: Tensor,
}

impl EmbeddingTable {
    pub fn new(matrix: Tensor) -> Result<Self> {
        if matrix.ndim() != 2 || matrix.shape()[1] == 0 {
            return Err(NpdError::dim(
                "embedding",
                format!("table must be [vocab x dim] with dim >= 1, got {:?}", matrix.shape()),
            ));
        }
        if !matrix.is_finite() {
            return Err(NpdError::Contract("embedding table holds non-finite values".into()));
        }
        Ok(EmbeddingTable { matrix })
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.shape()[0]
    }

    pub fn embed_dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn into_matrix(self) -> Tensor {
        self.matrix
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.matrix.row(id)
    }

    /// `[ids.len() x embed_dim]` matrix of the requested rows.
    pub fn lookup(&self, ids: &[usize]) -> Result<Tensor> {
        let d = self.embed_dim();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= self.vocab_size() {
                return Err(NpdError::Contract(format!(
                    "token id {id} out of range for vocabulary of {}",
                    self.vocab_size()
                )));
            }
            data.extend_from_slice(self.row(id));
        }
        Tensor::matrix(ids.len(), d, data)
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.row(a), self.row(b));
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny)
        }
    }

    /// Text format: `<vocab_size> <embed_dim>` header, then one line per id:
    /// the token followed by its values. Values use shortest round-trip
    /// formatting, so save/load is bit-exact.
    pub fn write<W: Write>(&self, vocab: &Vocabulary, mut out: W) -> std::io::Result<()> {
        if vocab.len() != self.vocab_size() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!(
                    "vocabulary has {} tokens but table has {} rows",
                    vocab.len(),
                    self.vocab_size()
                ),
            ));
        }
        writeln!(out, "{} {}", self.vocab_size(), self.embed_dim())?;
        let mut line = String::new();
        for (id, token) in vocab.tokens().iter().enumerate() {
            line.clear();
            line.push_str(token);
            for v in self.row(id) {
                write!(line, " {v}").expect("write to String");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| NpdError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(vocab, &mut w).map_err(|e| NpdError::io(path, e))?;
        w.flush().map_err(|e| NpdError::io(path, e))
    }

    pub fn read<R: BufRead>(input: R) -> Result<(Vocabulary, EmbeddingTable)> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, message: String| NpdError::Parse { line, message };
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let header = header.map_err(|e| parse_err(1, e.to_string()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(1, format!("bad header `{header}`: {e}")))?;
        let [rows, dim] = dims[..] else {
            return Err(parse_err(1, format!("header must be `<vocab_size> <embed_dim>`, got `{header}`")));
        };
        let mut tokens = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or_default().to_owned();
            let values: Vec<f64> = fields
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(lineno, format!("bad value: {e}")))?;
            if values.len() != dim {
                return Err(parse_err(
                    lineno,
                    format!("expected {dim} values, found {}", values.len()),
                ));
            }
            tokens.push(token);
            data.extend(values);
        }
        if tokens.len() != rows {
            return Err(NpdError::Format(format!(
                "header declares {rows} rows, file has {}",
                tokens.len()
            )));
        }
        let vocab = Vocabulary::from_tokens(tokens)?;
        let table = EmbeddingTable::new(Tensor::matrix(rows, dim, data)?)?;
        Ok((vocab, table))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Vocabulary, EmbeddingTable)> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| NpdError::io(path, e))?;
        Self::read(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: usize, dim: usize) -> EmbeddingTable {
        let data = (0..rows * dim).map(|i| i as f64 * 0.5 - 1.0).collect();
        EmbeddingTable::new(Tensor::matrix(rows, dim, data).unwrap()).unwrap()
    }

    #[test]
    fn lookup_shapes_and_rows() {
        let t = table(4, 3);
        assert_eq!(t.lookup(&[]).unwrap().shape(), &[0, 3]);
        assert_eq!(t.lookup(&[2]).unwrap().data(), t.row(2));
        let twice = t.lookup(&[1, 1]).unwrap();
        assert_eq!(twice.row(0), twice.row(1));
        assert!(matches!(t.lookup(&[4]), Err(NpdError::Contract(_))));
    }

    #[test]
    fn file_layout() {
        let vocab = Vocabulary::from_tokens(vec!["<pad>".into(), "<unk>".into(), "好".into()]).unwrap();
        let t = table(3, 2);
        let mut buf = Vec::new();
        t.write(&vocab, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "3 2");
        assert_eq!(lines[3], "好 1 1.5");
    }

    #[test]
    fn malformed_files_name_the_line() {
        let err = EmbeddingTable::read("2 2\n<pad> 0 0\n<unk> 1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, NpdError::Parse { line: 3, .. }), "{err}");
        let err = EmbeddingTable::read("2 2\n<pad> 0 0\n<unk> 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, NpdError::Parse { line: 3, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn save_load_is_bit_exact(values in prop::collection::vec(-1e6f64..1e6, 6)) {
            let vocab = Vocabulary::from_tokens(vec!["<pad>".into(), "<unk>".into(), "w".into()]).unwrap();
            let t = EmbeddingTable::new(Tensor::matrix(3, 2, values).unwrap()).unwrap();
            let mut buf = Vec::new();
            t.write(&vocab, &mut buf).unwrap();
            let (v2, t2) = EmbeddingTable::read(buf.as_slice()).unwrap();
            prop_assert_eq!(v2, vocab);
            prop_assert_eq!(t2, t);
        }
    }
}
