use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::post::{Corpus, Emotion, Gender, Post};
use crate::error::{NpdError, Result};

/// Optional first record declaring the number of location classes.
#[derive(Serialize, Deserialize)]
struct Header {
    num_locations: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPost {
    text: String,
    emotions: Vec<String>,
    gender: String,
    location: u64,
}

fn parse_post(value: Value, line: usize) -> Result<Post> {
    let err = |message: String| NpdError::Parse { line, message };
    let raw: RawPost = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
    let emotions = raw
        .emotions
        .iter()
        .map(|e| e.parse::<Emotion>().map_err(&err))
        .collect::<Result<Vec<_>>>()?;
    let gender = match raw.gender.as_str() {
        "female" => Gender::Female,
        "male" => Gender::Male,
        other => {
            return Err(err(format!(
                "unknown gender `{other}` (expected female or male)"
            )))
        }
    };
    Ok(Post {
        text: raw.text,
        emotions,
        gender,
        location: raw.location as usize,
    })
}

/// One JSON object per line; blank lines are skipped.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Corpus> {
    let mut declared = None;
    let mut posts = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| NpdError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| NpdError::Parse {
            line: lineno,
            message: format!("malformed JSON: {e}"),
        })?;
        if posts.is_empty() && declared.is_none() && value.get("num_locations").is_some() {
            let h: Header = serde_json::from_value(value).map_err(|e| NpdError::Parse {
                line: lineno,
                message: format!("bad header record: {e}"),
            })?;
            declared = Some(h.num_locations);
            continue;
        }
        let post = parse_post(value, lineno)?;
        post.validate(declared).map_err(|message| NpdError::Parse {
            line: lineno,
            message,
        })?;
        posts.push(post);
    }
    Ok(match declared {
        Some(num_locations) => Corpus {
            posts,
            num_locations,
        },
        None => Corpus::from_posts(posts),
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| NpdError::io(path, e))?;
    read_jsonl(BufReader::new(file))
}

/// Writes the header record followed by one record per post.
pub fn write_jsonl<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    let header = Header {
        num_locations: corpus.num_locations,
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for p in &corpus.posts {
        writeln!(out, "{}", serde_json::to_string(p)?)?;
    }
    Ok(())
}

pub fn save(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| NpdError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_jsonl(corpus, &mut w).map_err(|e| NpdError::io(path, e))?;
    w.flush().map_err(|e| NpdError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_is_empty_corpus() {
        let c = read_jsonl("".as_bytes()).unwrap();
        assert!(c.posts.is_empty());
    }

    #[test]
    fn single_record() {
        let line = r#"{"text":"巴适得很","emotions":["happiness"],"gender":"male","location":3}"#;
        let c = read_jsonl(line.as_bytes()).unwrap();
        assert_eq!(c.posts.len(), 1);
        assert_eq!(c.posts[0].emotions, vec![Emotion::Happiness]);
        assert_eq!(c.num_locations, 4);
    }

    #[test]
    fn unknown_emotion_names_value_and_line() {
        let text = concat!(
            r#"{"text":"a","emotions":[],"gender":"male","location":0}"#,
            "\n",
            r#"{"text":"b","emotions":["joy"],"gender":"male","location":0}"#
        );
        let err = read_jsonl(text.as_bytes()).unwrap_err();
        assert!(matches!(err, NpdError::Parse { line: 2, .. }));
        assert!(err.to_string().contains("joy"), "{err}");
    }

    #[test]
    fn malformed_line_and_header_bounds() {
        let err = read_jsonl("{\"text\": ".as_bytes()).unwrap_err();
        assert!(matches!(err, NpdError::Parse { line: 1, .. }));
        let text = concat!(
            r#"{"num_locations":2}"#,
            "\n",
            r#"{"text":"b","emotions":[],"gender":"female","location":2}"#
        );
        assert!(matches!(read_jsonl(text.as_bytes()), Err(NpdError::Parse { line: 2, .. })));
    }

    fn arb_post() -> impl Strategy<Value = Post> {
        (
            "[a-z 巴适\"\\\\]{0,12}[a-z]",
            prop::sample::subsequence(Emotion::ALL.to_vec(), 0..=5),
            any::<bool>(),
            0usize..6,
        )
            .prop_map(|(text, emotions, male, location)| Post {
                text,
                emotions,
                gender: if male { Gender::Male } else { Gender::Female },
                location,
            })
    }

    proptest! {
        #[test]
        fn save_then_load_round_trips(posts in prop::collection::vec(arb_post(), 0..20)) {
            let corpus = Corpus { posts, num_locations: 6 };
            let mut buf = Vec::new();
            write_jsonl(&corpus, &mut buf).unwrap();
            prop_assert_eq!(read_jsonl(buf.as_slice()).unwrap(), corpus);
        }
    }
}
