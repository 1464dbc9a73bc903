use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use npd_core::corpus::{self, Emotion, SynthConfig};
use npd_core::evaluation::{self, AblationData, AblationPlan};
use npd_core::model::{Attribute, Checkpoint, ModelConfig, NpdModel};
use npd_core::par::Execution;
use npd_core::pipeline::{build_embeddings, encode_split, split_corpus, EmbedConfig};
use npd_core::text::{tokenize, EmbeddingTable, SkipGramConfig, TokenizerMode, Vocabulary};
use npd_core::training::{self, TrainingConfig};

use crate::{AblateArgs, CliError, EmbedArgs, EvalArgs, PredictArgs, SynthArgs, TrainArgs, TrainFlags};

type CliResult<T> = Result<T, CliError>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Written next to an embedding table so later steps tokenize the same way.
#[derive(Debug, Serialize, Deserialize)]
struct EmbedMeta {
    tokenizer: TokenizerMode,
    split_seed: u64,
    vocab_size: usize,
    skipgram: SkipGramConfig,
}

fn meta_path(embeddings: &Path) -> PathBuf {
    with_suffix(embeddings, ".meta.json")
}

fn load_embeddings(path: &Path, tokenizer: Option<TokenizerMode>) -> CliResult<(Vocabulary, EmbeddingTable, TokenizerMode)> {
    let (vocab, table) = EmbeddingTable::load(path)?;
    let recorded = meta_path(path)
        .exists()
        .then(|| read_json::<EmbedMeta>(&meta_path(path)))
        .transpose()?
        .map(|m| m.tokenizer);
    let mode = tokenizer.or(recorded).unwrap_or_default();
    Ok((vocab, table, mode))
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<SynthConfig>(p)?,
        None if a.null_signal => SynthConfig::null_signal(),
        None => SynthConfig::default(),
    };
    if a.null_signal {
        let base = SynthConfig::null_signal();
        cfg.gender_marker_prob = 0.0;
        cfg.location_marker_prob = 0.0;
        cfg.dialect_prob = 0.0;
        cfg.gender_affinity = base.gender_affinity;
        cfg.location_affinity = base.location_affinity;
    }
    if let Some(n) = a.n_posts {
        cfg.n_posts = n;
    }
    if let Some(m) = a.num_locations {
        cfg.num_locations = m;
        cfg.location_affinity.truncate(m);
    }
    cfg.seed = a.seed;
    let c = corpus::synthesize(&cfg)?;
    corpus::save(&c, &a.out)?;
    log::info!("wrote {} posts ({} locations) to {}", c.posts.len(), c.num_locations, a.out.display());
    Ok(())
}

pub fn embed(a: EmbedArgs) -> CliResult<()> {
    let c = corpus::load(&a.corpus)?;
    let s = split_corpus(&c, a.seed)?;
    let cfg = EmbedConfig {
        vocab_size: a.vocab_size,
        tokenizer: a.tokenizer,
        skipgram: SkipGramConfig {
            embed_dim: a.embed_dim,
            window: a.window,
            negatives_per_positive: a.negatives,
            epochs: a.epochs,
            learning_rate: a.learning_rate,
            seed: a.seed,
        },
    };
    let text: Vec<_> = s.train.iter().chain(&s.dev).cloned().collect();
    let (vocab, table) = build_embeddings(&text, &cfg)?;
    table.save(&vocab, &a.out)?;
    let meta = EmbedMeta {
        tokenizer: a.tokenizer,
        split_seed: a.seed,
        vocab_size: a.vocab_size,
        skipgram: cfg.skipgram,
    };
    write_file(&meta_path(&a.out), &serde_json::to_string_pretty(&meta).expect("serializable"))?;
    log::info!("wrote {} x {} embeddings to {}", vocab.len(), a.embed_dim, a.out.display());
    Ok(())
}

fn training_config(flags: &TrainFlags, seed: u64) -> CliResult<TrainingConfig> {
    let mut cfg = match &flags.train_config {
        Some(p) => read_json::<TrainingConfig>(p)?,
        None => TrainingConfig::default(),
    };
    if let Some(v) = flags.lr {
        cfg.mu = v;
    }
    if let Some(l) = &flags.lambdas {
        cfg.lambdas = [l[0], l[1], l[2]];
    }
    if let Some(v) = flags.l2 {
        cfg.l2_lambda = v;
    }
    if let Some(v) = flags.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.dropout {
        cfg.dropout_rate = v;
    }
    if let Some(v) = flags.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = flags.patience {
        cfg.patience = v;
    }
    if flags.no_clip {
        cfg.clip_norm = None;
    }
    if flags.sequential {
        cfg.execution = Execution::Sequential;
    }
    cfg.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

fn model_config(flags: &TrainFlags, template: ModelConfig) -> ModelConfig {
    let mut cfg = template;
    if let Some(h) = flags.hidden_dim {
        cfg = cfg.with_hidden(h);
    }
    if let Some(a) = flags.attention_dim {
        cfg.attention_dim = a;
    }
    if let Some(q) = flags.head_dim {
        cfg = cfg.with_head_dim(q);
    }
    cfg.fine_tune_embeddings = flags.fine_tune;
    cfg
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let c = corpus::load(&a.corpus)?;
    let (vocab, table, mode) = load_embeddings(&a.embeddings, a.tokenizer)?;
    let data = encode_split(&split_corpus(&c, a.seed)?, &vocab, mode)?;
    let cfg = training_config(&a.flags, a.seed)?;
    let mcfg = model_config(&a.flags, ModelConfig::new(a.variant, table.embed_dim(), c.num_locations));
    let model = NpdModel::new(mcfg, &table, a.seed)?;
    log::info!(
        "training {} on {} posts ({} dev), vocab {}",
        a.variant,
        data.train.len(),
        data.dev.len(),
        vocab.len()
    );
    let trained = training::train(model, &data.train, &data.dev, &cfg)?;
    let ck = Checkpoint {
        model: trained.model,
        vocab,
        tokenizer: mode,
        seed: a.seed,
    };
    ck.save(&a.out)?;
    let log_path = a.log.unwrap_or_else(|| with_suffix(&a.out, ".log.tsv"));
    trained.log.save(&log_path)?;
    log::info!("wrote {} and {}", a.out.display(), log_path.display());
    Ok(())
}

pub fn eval(a: EvalArgs) -> CliResult<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let c = corpus::load(&a.corpus)?;
    let seed = a.seed.unwrap_or(ck.seed);
    let data = encode_split(&split_corpus(&c, seed)?, &ck.vocab, ck.tokenizer)?;
    let mut report = evaluation::evaluate(&ck.model, &data.test, Execution::default())?;
    report.seed = Some(ck.seed);
    let table = format!("{}\n{}\n", evaluation::tsv_header(), report.tsv_row());
    print!("{table}");
    if let Some(out) = &a.out {
        write_file(out, &table)?;
    }
    Ok(())
}

pub fn ablate(a: AblateArgs) -> CliResult<()> {
    let c = corpus::load(&a.corpus)?;
    let s = split_corpus(&c, a.split_seed)?;
    let (vocab, table, mode) = match &a.embeddings {
        Some(p) => load_embeddings(p, a.tokenizer)?,
        None => {
            let mode = a.tokenizer.unwrap_or_default();
            let cfg = EmbedConfig {
                vocab_size: a.vocab_size,
                tokenizer: mode,
                skipgram: SkipGramConfig {
                    embed_dim: a.embed_dim,
                    seed: a.split_seed,
                    ..SkipGramConfig::default()
                },
            };
            let text: Vec<_> = s.train.iter().chain(&s.dev).cloned().collect();
            let (v, t) = build_embeddings(&text, &cfg)?;
            (v, t, mode)
        }
    };
    let data = encode_split(&s, &vocab, mode)?;
    let jobs = if a.jobs <= 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let plan = AblationPlan {
        variants: a.variants.clone(),
        seeds: a.seeds.clone(),
        model: model_config(&a.flags, ModelConfig::new(a.variants[0], table.embed_dim(), c.num_locations)),
        training: training_config(&a.flags, a.split_seed)?,
        jobs,
    };
    let inputs = AblationData {
        train: &data.train,
        dev: &data.dev,
        test: &data.test,
        embeddings: &table,
    };
    let result = run_jobs(a.jobs, || evaluation::ablate(&inputs, &plan))??;
    let tsv = result.to_tsv();
    print!("{tsv}");
    if let Some(out) = &a.out {
        write_file(out, &tsv)?;
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn run_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    if jobs <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn run_jobs<T: Send>(_jobs: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    Ok(f())
}

fn post_text(line: &str) -> CliResult<String> {
    if line.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(line).map_err(|e| CliError::Invalid(format!("bad JSON post: {e}")))?;
        return v
            .get("text")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| CliError::Invalid("JSON post has no string `text` field".into()));
    }
    Ok(line.to_owned())
}

pub fn predict(a: PredictArgs) -> CliResult<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for (n, line) in stdin.lock().lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(format!("stdin: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let text = post_text(&line)?;
        let tokens = tokenize(&text, ck.tokenizer);
        if tokens.is_empty() {
            return Err(CliError::Invalid(format!("input line {} has no tokens", n + 1)));
        }
        let ids = ck.vocab.encode(&tokens);
        let p = ck.model.predict(&ids)?;
        let emotions: serde_json::Map<String, Value> = Emotion::ALL
            .iter()
            .map(|e| (e.name().to_string(), json!(p.emotion_present[e.index()])))
            .collect();
        let predicted: Vec<&str> = Emotion::ALL
            .iter()
            .filter(|e| p.predicted()[e.index()])
            .map(|e| e.name())
            .collect();
        let gender = p.gender_male.map(|pm| {
            json!({
                "male_probability": pm,
                "predicted": if pm > 0.5 { "male" } else { "female" },
            })
        });
        let location = p.location.as_ref().map(|dist| {
            let best = dist
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0;
            json!({ "probabilities": dist, "predicted": best })
        });
        let attention: serde_json::Map<String, Value> = p
            .attention
            .iter()
            .map(|att| {
                let pairs: Vec<Value> = tokens.iter().zip(&att.weights).map(|(t, w)| json!([t, w])).collect();
                let key = match att.attribute {
                    Attribute::Gender => "gender",
                    Attribute::Location => "location",
                };
                (key.to_string(), Value::Array(pairs))
            })
            .collect();
        let record = json!({
            "text": text,
            "emotions": emotions,
            "predicted_emotions": predicted,
            "gender": gender,
            "location": location,
            "attention": attention,
        });
        writeln!(out, "{record}").map_err(|e| CliError::Runtime(format!("stdout: {e}")))?;
    }
    Ok(())
}
