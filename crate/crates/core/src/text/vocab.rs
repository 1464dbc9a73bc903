use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{NpdError, Result};

pub const PAD_ID: usize = 0;
pub const OOV_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<unk>";
const SPECIALS: usize = 2;

/// Frequency-capped token/id bijection with reserved PAD and OOV ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    max_size: usize,
}

impl Vocabulary {
    /// Keeps the `max_size` most frequent tokens; ties go to the token seen first.
    pub fn build<S: AsRef<str>>(corpus: &[Vec<S>], max_size: usize) -> Result<Self> {
        if max_size == 0 {
            return Err(NpdError::Config("vocabulary max_size must be >= 1".into()));
        }
        if corpus.iter().all(Vec::is_empty) {
            return Err(NpdError::Config("cannot build a vocabulary from an empty corpus".into()));
        }
        // token -> (count, first occurrence)
        let mut stats: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut position = 0;
        for tok in corpus.iter().flatten() {
            let tok = tok.as_ref();
            stats.entry(tok).or_insert((0, position)).0 += 1;
            position += 1;
        }
        let mut ranked: Vec<(&str, usize, usize)> =
            stats.into_iter().map(|(t, (c, first))| (t, c, first)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let mut id_to_token = vec![PAD_TOKEN.to_owned(), OOV_TOKEN.to_owned()];
        id_to_token.extend(
            ranked
                .into_iter()
                .filter(|(t, ..)| *t != PAD_TOKEN && *t != OOV_TOKEN)
                .take(max_size)
                .map(|(t, ..)| t.to_owned()),
        );
        Ok(Self::from_ids(id_to_token, max_size))
    }

    fn from_ids(id_to_token: Vec<String>, max_size: usize) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            token_to_id,
            id_to_token,
            max_size,
        }
    }

    /// Rebuilds a vocabulary from its id-ordered token list (as persisted).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < SPECIALS || tokens[PAD_ID] != PAD_TOKEN || tokens[OOV_ID] != OOV_TOKEN {
            return Err(NpdError::Format(format!(
                "token list must start with {PAD_TOKEN} and {OOV_TOKEN}"
            )));
        }
        let max_size = (tokens.len() - SPECIALS).max(1);
        let vocab = Self::from_ids(tokens, max_size);
        if vocab.token_to_id.len() != vocab.id_to_token.len() {
            return Err(NpdError::Format("duplicate token in vocabulary".into()));
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.len() <= SPECIALS
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(OOV_ID))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(OOV_TOKEN))
            .collect()
    }

    /// Hex SHA-256 over the id-ordered token list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.id_to_token {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect()
    }

    #[test]
    fn caps_at_max_size_and_maps_rest_to_oov() {
        let c = corpus(&["a a a b b c"]);
        let v = Vocabulary::build(&c, 2).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.encode(&["a", "b", "c"]), vec![2, 3, OOV_ID]);
    }

    #[test]
    fn keeps_everything_when_max_exceeds_distinct() {
        let v = Vocabulary::build(&corpus(&["x y z"]), 100).unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.len() <= v.max_size() + SPECIALS);
    }

    #[test]
    fn tie_at_cutoff_goes_to_first_occurrence() {
        // counts: q=3, m=2, k=2 (m seen first); cutoff 2 keeps q and m.
        let c = corpus(&["q m", "k q", "m k q"]);
        let v = Vocabulary::build(&c, 2).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "q", "m"]);
        assert_eq!(v.id("k"), None);
    }

    #[test]
    fn empty_corpus_rejected() {
        let empty: Vec<Vec<String>> = vec![vec![]];
        assert!(matches!(Vocabulary::build(&empty, 5), Err(NpdError::Config(_))));
        assert!(matches!(Vocabulary::build(&corpus(&["a"]), 0), Err(NpdError::Config(_))));
    }

    #[test]
    fn fingerprint_depends_on_order() {
        let a = Vocabulary::from_tokens(vec!["<pad>".into(), "<unk>".into(), "x".into(), "y".into()]).unwrap();
        let b = Vocabulary::from_tokens(vec!["<pad>".into(), "<unk>".into(), "y".into(), "x".into()]).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert!(Vocabulary::from_tokens(vec!["x".into()]).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(words in prop::collection::vec("[a-e]{1,3}", 1..40)) {
            let v = Vocabulary::build(&[words.clone()], 1000).unwrap();
            let ids = v.encode(&words);
            prop_assert_eq!(v.decode(&ids), words.iter().map(String::as_str).collect::<Vec<_>>());
            for (i, t) in v.tokens().iter().enumerate() {
                prop_assert_eq!(v.id(t), Some(i));
            }
        }
    }
}
