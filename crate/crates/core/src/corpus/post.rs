use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{NpdError, Result};
use crate::text::{tokenize, TokenizerMode, Vocabulary};

pub const NUM_EMOTIONS: usize = 5;

/// The five annotated emotions, in report column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Happiness,
    Sadness,
    Anger,
    Surprise,
    Fear,
}

impl Emotion {
    pub const ALL: [Emotion; NUM_EMOTIONS] = [
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Anger,
        Emotion::Surprise,
        Emotion::Fear,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Anger => "anger",
            Emotion::Surprise => "surprise",
            Emotion::Fear => "fear",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Emotion::Happiness => "Happiness",
            Emotion::Sadness => "Sadness",
            Emotion::Anger => "Anger",
            Emotion::Surprise => "Surprise",
            Emotion::Fear => "Fear",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                format!("unknown emotion `{s}` (expected one of happiness, sadness, anger, surprise, fear)")
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    /// Target for the gender discriminator: male = 1.
    pub fn bit(self) -> u8 {
        match self {
            Gender::Female => 0,
            Gender::Male => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Gender {
        if bit == 0 {
            Gender::Female
        } else {
            Gender::Male
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub text: String,
    /// Empty means "None".
    pub emotions: Vec<Emotion>,
    pub gender: Gender,
    pub location: usize,
}

impl Post {
    pub fn validate(&self, num_locations: Option<usize>) -> std::result::Result<(), String> {
        if self.text.trim().is_empty() {
            return Err("text is empty".into());
        }
        for (i, e) in self.emotions.iter().enumerate() {
            if self.emotions[..i].contains(e) {
                return Err(format!("duplicate emotion `{e}`"));
            }
        }
        if let Some(m) = num_locations {
            if self.location >= m {
                return Err(format!("location {} outside [0, {m})", self.location));
            }
        }
        Ok(())
    }

    pub fn emotion_bits(&self) -> [u8; NUM_EMOTIONS] {
        let mut bits = [0; NUM_EMOTIONS];
        for e in &self.emotions {
            bits[e.index()] = 1;
        }
        bits
    }
}

/// A list of posts plus the number of location classes `m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub posts: Vec<Post>,
    pub num_locations: usize,
}

impl Corpus {
    /// Infers `m` as `max(location) + 1` (at least 2).
    pub fn from_posts(posts: Vec<Post>) -> Self {
        let num_locations = posts.iter().map(|p| p.location + 1).max().unwrap_or(0).max(2);
        Corpus {
            posts,
            num_locations,
        }
    }
}

/// Model-ready form of a [`Post`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedPost {
    pub ids: Vec<usize>,
    pub emotions: [u8; NUM_EMOTIONS],
    pub gender: u8,
    pub location: usize,
}

pub fn encode(posts: &[Post], vocab: &Vocabulary, mode: TokenizerMode) -> Result<Vec<TokenizedPost>> {
    posts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let tokens = tokenize(&p.text, mode);
            if tokens.is_empty() {
                return Err(NpdError::Contract(format!("post {i} has no tokens after tokenization")));
            }
            Ok(TokenizedPost {
                ids: vocab.encode(&tokens),
                emotions: p.emotion_bits(),
                gender: p.gender.bit(),
                location: p.location,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::OOV_ID;

    fn post(text: &str, emotions: Vec<Emotion>) -> Post {
        Post {
            text: text.into(),
            emotions,
            gender: Gender::Female,
            location: 1,
        }
    }

    #[test]
    fn emotion_bits_follow_column_order() {
        let p = post("a", vec![Emotion::Happiness, Emotion::Fear]);
        assert_eq!(p.emotion_bits(), [1, 0, 0, 0, 1]);
        assert_eq!(post("a", vec![]).emotion_bits(), [0; 5]);
    }

    #[test]
    fn encode_keeps_all_oov_posts_and_rejects_empty() {
        let vocab = Vocabulary::build(&[vec!["known".to_string()]], 10).unwrap();
        let out = encode(&[post("x y", vec![])], &vocab, TokenizerMode::Whitespace).unwrap();
        assert_eq!(out[0].ids, vec![OOV_ID, OOV_ID]);
        let err = encode(
            &[post("known", vec![]), post("   ", vec![])],
            &vocab,
            TokenizerMode::Whitespace,
        )
        .unwrap_err();
        assert!(err.to_string().contains("post 1"), "{err}");
    }

    #[test]
    fn validation() {
        assert!(post("a", vec![Emotion::Anger, Emotion::Anger]).validate(None).is_err());
        assert!(post("", vec![]).validate(None).is_err());
        assert!(post("a", vec![]).validate(Some(1)).is_err());
        assert!(post("a", vec![]).validate(Some(2)).is_ok());
        assert!("joy".parse::<Emotion>().is_err());
    }
}
