//! Acceptance checks shared by the integration tests and the `acceptance`
//! target. Each check returns a one-line summary on success and the first
//! violation on failure.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cefer::classifier::{self, gradient_check, MlpConfig, Model};
use cefer::datasets::{map_circumplex_to_plutchik, DatasetFormat, Split};
use cefer::embeddings::{
    pool_cls, select_layers, word_vectors, ChsfReader, ChsfWriter, Combine, HiddenStateRecord, LayerSelection,
    PoolingSpec, Scope, SubwordToken,
};
use cefer::emotion_encoder::{encode_token, encode_tweet, EmotionVector};
use cefer::experiment::{ExperimentConfig, ResultTable};
use cefer::lexicon::{
    build_emosyn, load_categorical_lexicon, CategoricalFormat, EmoSynLexicon, Emotion, EmotionSet, LexiconEntry,
    Source, SynonymGraph,
};
use cefer::meta_embedding::{meta_sentence, meta_word, EMOTION_DIM};
use cefer::preprocess::{preprocess, RawTweet, Token, TokenKind, MASK_LITERAL};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn want_any_lexicon() -> EmoSynLexicon {
    let mut seeds = load_categorical_lexicon(fixture("want_any_nrc.tsv"), CategoricalFormat::NrcEmotion, 0.0)
        .unwrap()
        .entries;
    seeds.extend(
        load_categorical_lexicon(fixture("want_any_hashtag.tsv"), CategoricalFormat::NrcHashtag, 0.0)
            .unwrap()
            .entries,
    );
    let graph = SynonymGraph::load(fixture("want_any_synonyms.tsv")).unwrap();
    build_emosyn(&seeds, &graph, 3).unwrap()
}

// ---------------------------------------------------------------------------

pub fn want_any_exactness() -> Check {
    let lex = want_any_lexicon();
    let reloaded = EmoSynLexicon::from_tsv(&lex.to_tsv(), "memory").map_err(|e| e.to_string())?;
    let want = [1, 1, 0, 1, 1, 0, 0, 1];
    let any = [1, 1, 1, 1, 0, 0, 0, 0];
    for (name, l) in [("built", &lex), ("reloaded", &reloaded)] {
        let got_want = encode_token(&Token::word("want"), l).bits();
        let got_any = encode_token(&Token::word("any"), l).bits();
        ensure(got_want == want, || format!("{name}: want -> {got_want:?}"))?;
        ensure(got_any == any, || format!("{name}: any -> {got_any:?}"))?;
    }
    let tweet =
        preprocess(&RawTweet::new("ex1", "I don't want to sit here any longer."), None).map_err(|e| e.to_string())?;
    let m = encode_tweet(&tweet, &lex).map_err(|e| e.to_string())?;
    let row = |word: &str| {
        m.rows
            .iter()
            .find(|(t, _)| t.lookup_form == word)
            .map(|(_, v)| v.bits())
    };
    ensure(row("want") == Some(want) && row("any") == Some(any), || {
        format!("example sentence rows: want {:?}, any {:?}", row("want"), row("any"))
    })?;
    Ok("want=11011001 any=11110000".into())
}

// ---------------------------------------------------------------------------

fn random_graph(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<(usize, usize)>, Vec<LexiconEntry>) {
    let n = rng.gen_range(1..=50);
    let names: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let p = rng.gen_range(0.0..4.0) / n as f64;
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p.min(1.0)) {
                edges.push((a, b));
            }
        }
    }
    let seed_count = rng.gen_range(1..=n.min(8));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let seeds = idx[..seed_count]
        .iter()
        .map(|&i| {
            LexiconEntry::seed(
                &names[i],
                EmotionSet::from_bits(rng.gen_range(1..=255)),
                Source::NrcEmotion,
            )
        })
        .collect();
    (names, edges, seeds)
}

/// All-pairs hop counts by Floyd-Warshall, independent of the BFS in the
/// library.
fn hop_counts(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<u32>> {
    const INF: u32 = u32::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

pub fn lexicon_monotonicity_and_oracle(graphs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lookups = 0usize;
    for g in 0..graphs {
        let (names, edges, seeds) = random_graph(&mut rng);
        let mut graph = SynonymGraph::new();
        for &(a, b) in &edges {
            graph.add_pair(&names[a], &names[b]);
        }
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let dist = hop_counts(names.len(), &edges);
        let mut previous: Option<Vec<String>> = None;
        for depth in 0..=5u8 {
            let lex = build_emosyn(&seeds, &graph, depth).map_err(|e| e.to_string())?;
            let vocab: Vec<String> = lex.vocabulary().into_iter().map(str::to_string).collect();
            if let Some(prev) = &previous {
                if let Some(lost) = prev.iter().find(|t| !vocab.contains(t)) {
                    return Err(format!(
                        "graph {g}: {lost} in depth {} vocab but not depth {depth}",
                        depth - 1
                    ));
                }
            }
            for (i, name) in names.iter().enumerate() {
                let mut expected = EmotionSet::EMPTY;
                let mut nearest = u32::MAX;
                for s in &seeds {
                    let d = dist[index[s.term.as_str()]][i];
                    if d <= u32::from(depth) {
                        expected = expected.union(s.emotions);
                        nearest = nearest.min(d);
                    }
                }
                let got = lex.lookup(name, TokenKind::Word);
                lookups += 1;
                if got != expected {
                    return Err(format!(
                        "graph {g} depth {depth}: {name} -> {} expected {}",
                        got.to_bit_string(),
                        expected.to_bit_string()
                    ));
                }
                let is_seed = seeds.iter().any(|s| &s.term == name);
                let want_depth = if expected.is_empty() {
                    None
                } else if is_seed {
                    Some(0)
                } else {
                    Some(nearest as u8)
                };
                let got_depth = lex.depth_of(name, TokenKind::Word);
                if got_depth != want_depth {
                    return Err(format!(
                        "graph {g} depth {depth}: {name} depth {got_depth:?}, expected {want_depth:?}"
                    ));
                }
            }
            previous = Some(vocab);
        }
    }
    Ok(format!("{graphs} graphs, {lookups} lookups match the oracle"))
}

// ---------------------------------------------------------------------------

pub fn random_record<R: Rng>(rng: &mut R, id: &str, layers: usize, dim: usize) -> HiddenStateRecord {
    let words = rng.gen_range(1..=5);
    let mut tokens = vec![SubwordToken::new("<s>", -1)];
    for w in 0..words {
        for p in 0..rng.gen_range(1..=3) {
            tokens.push(SubwordToken::new(format!("w{w}p{p}"), w));
        }
    }
    tokens.push(SubwordToken::new("</s>", -1));
    let acts = (0..layers * tokens.len() * dim)
        .map(|_| (normal(rng) * 10f64.powi(rng.gen_range(-2..3))) as f32)
        .collect();
    HiddenStateRecord::new(id, layers, dim, tokens, acts).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn pooling_algebra(tensors: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comparisons = 0usize;
    for n in 0..tensors {
        let layers = rng.gen_range(1..=6);
        let dim = rng.gen_range(1..=8);
        let rec = random_record(&mut rng, &format!("r{n}"), layers, dim);
        let selection = match rng.gen_range(0..3) {
            0 => LayerSelection::AllLayers,
            1 => LayerSelection::LastOnly,
            _ => LayerSelection::LastK(rng.gen_range(1..=layers)),
        };
        let m = select_layers(&rec, selection).unwrap().len() as f64;
        let spec = |scope, combine| PoolingSpec {
            scope,
            layers: selection,
            combine,
            word_merge: Default::default(),
        };

        // Average = Sum / m, sentence-start and word level
        let avg = pool_cls(&rec, &spec(Scope::ClsSentence, Combine::Average)).unwrap();
        let sum = pool_cls(&rec, &spec(Scope::ClsSentence, Combine::Sum)).unwrap();
        let wavg = word_vectors(&rec, &spec(Scope::TokenLevel, Combine::Average)).unwrap();
        let wsum = word_vectors(&rec, &spec(Scope::TokenLevel, Combine::Sum)).unwrap();
        let pairs = avg.values.iter().zip(&sum.values).chain(
            wavg.iter()
                .zip(&wsum)
                .flat_map(|((_, a), (_, s))| a.values.iter().zip(&s.values)),
        );
        for (a, s) in pairs {
            comparisons += 1;
            ensure(rel_close(*a, s / m, 1e-6), || {
                format!("tensor {n}: average {a} vs sum/m {}", s / m)
            })?;
        }

        // concatenation blocks are the selected layers, bit for bit
        let cat = pool_cls(&rec, &spec(Scope::ClsSentence, Combine::Concatenate)).unwrap();
        let first = layers + 1 - m as usize;
        for (j, block) in cat.values.chunks(dim).enumerate() {
            let expected: Vec<f64> = rec.vector(first + j, 0).iter().map(|&x| f64::from(x)).collect();
            comparisons += dim;
            ensure(block == expected.as_slice(), || {
                format!("tensor {n}: concat block {j} differs")
            })?;
        }

        // last-layer sentence-start vector is an exact slice
        let last = pool_cls(
            &rec,
            &PoolingSpec::new(Scope::ClsSentence, LayerSelection::LastOnly, Combine::Sum),
        )
        .unwrap();
        let expected: Vec<f64> = rec.vector(layers, 0).iter().map(|&x| f64::from(x)).collect();
        comparisons += dim;
        ensure(last.values == expected, || {
            format!("tensor {n}: last-layer slice differs")
        })?;

        // write -> read identity
        let mut w = ChsfWriter::new(Vec::new(), layers, dim, 1).unwrap();
        w.write_record(&rec).unwrap();
        let bytes = w.finish().unwrap();
        let back: Vec<HiddenStateRecord> = ChsfReader::new(bytes.as_slice())
            .map_err(|e| e.to_string())?
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let same_bits = back.len() == 1
            && back[0].subword_tokens() == rec.subword_tokens()
            && back[0].sentence_id() == rec.sentence_id()
            && back[0]
                .activations()
                .iter()
                .zip(rec.activations())
                .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same_bits, || format!("tensor {n}: CHSF round trip differs"))?;
    }
    Ok(format!("{tensors} tensors, {comparisons} comparisons"))
}

// ---------------------------------------------------------------------------

fn random_emotion<R: Rng>(rng: &mut R) -> EmotionVector {
    let mut bits = [0u8; 8];
    bits.iter_mut().for_each(|b| *b = u8::from(rng.gen_bool(0.3)));
    EmotionVector::from_bits(bits)
}

pub fn meta_contract(cases: usize, seed: u64) -> Check {
    use cefer::embeddings::FeatureVector;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in 0..cases {
        let dim = rng.gen_range(1..=64);
        let words: Vec<(FeatureVector, EmotionVector)> = (0..rng.gen_range(1..=20))
            .map(|_| {
                let v = (0..dim).map(|_| normal(&mut rng) * 100.0).collect();
                (FeatureVector::new(v), random_emotion(&mut rng))
            })
            .collect();
        for (feat, emo) in &words {
            let m = meta_word(feat, emo);
            ensure(m.dim() == dim + EMOTION_DIM, || {
                format!("case {c}: word dim {}", m.dim())
            })?;
            ensure(m.features() == feat.values.as_slice(), || {
                format!("case {c}: feature slice altered")
            })?;
            ensure(m.emotions() == emo.to_f64(), || {
                format!("case {c}: emotion slice altered")
            })?;
        }
        let s = meta_sentence(&words).map_err(|e| e.to_string())?;
        ensure(s.dim() == dim + EMOTION_DIM, || {
            format!("case {c}: sentence dim {}", s.dim())
        })?;
        ensure(s.emotions().iter().all(|v| (0.0..=1.0).contains(v)), || {
            format!("case {c}: emotion slice {:?} outside [0,1]", s.emotions())
        })?;
        let n = words.len() as f64;
        let mut expected = vec![0.0; dim + EMOTION_DIM];
        for (feat, emo) in &words {
            for (e, v) in expected.iter_mut().zip(feat.values.iter().copied().chain(emo.to_f64())) {
                *e += v / n;
            }
        }
        for (i, (a, b)) in s.values.iter().zip(&expected).enumerate() {
            ensure(rel_close(*a, *b, 1e-12) || (a - b).abs() < 1e-12, || {
                format!("case {c}: component {i} {a} vs mean-then-concat {b}")
            })?;
        }
    }
    Ok(format!("{cases} random sentences"))
}

// ---------------------------------------------------------------------------

fn blobs(rng: &mut ChaCha8Rng, per_class: usize, classes: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| normal(rng) * 4.0).collect())
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            xs.push(center.iter().map(|m| m + normal(rng) * 0.5).collect());
            ys.push(c);
        }
    }
    (xs, ys)
}

pub fn classifier_gate(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let cfg = MlpConfig {
            hidden_dims: (0..rng.gen_range(0..=2)).map(|_| rng.gen_range(2..=6)).collect(),
            l2: if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..0.1)
            },
            ..MlpConfig::new(rng.gen_range(1..=6), rng.gen_range(2..=5))
        };
        let report = gradient_check(&cfg, 1e-4, seed + i).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_relative_error);
        ensure(report.passed, || {
            format!(
                "gradient check {i} ({:?}): relative error {:e}",
                cfg.hidden_dims, report.max_relative_error
            )
        })?;
    }

    for i in 0..50 {
        let cfg = MlpConfig {
            hidden_dims: vec![rng.gen_range(1..=8)],
            ..MlpConfig::new(rng.gen_range(1..=10), rng.gen_range(2..=8))
        };
        let model = Model::init(cfg.clone(), &mut rng).map_err(|e| e.to_string())?;
        let scale = 10f64.powi(rng.gen_range(-3..4));
        let x: Vec<f64> = (0..cfg.input_dim).map(|_| normal(&mut rng) * scale).collect();
        let total: f64 = model.probabilities(&x).map_err(|e| e.to_string())?.iter().sum();
        ensure((total - 1.0).abs() <= 1e-9, || {
            format!("softmax case {i} sums to {total}")
        })?;
    }

    let (xs, ys) = blobs(&mut rng, 100, 3, 4);
    let cfg = MlpConfig {
        hidden_dims: vec![16],
        epochs: 30,
        batch_size: 16,
        learning_rate: 1e-2,
        seed,
        ..MlpConfig::new(4, 3)
    };
    let model = classifier::train(&xs, &ys, &cfg).map_err(|e| e.to_string())?;
    let blob_acc = classifier::evaluate(&model, &xs, &ys)
        .map_err(|e| e.to_string())?
        .accuracy;
    ensure(blob_acc >= 0.99, || {
        format!("separable blobs training accuracy {blob_acc}")
    })?;

    let x = vec![vec![0.3, -1.2, 0.7, 2.0, -0.4]];
    let cfg = MlpConfig {
        hidden_dims: vec![8],
        epochs: 200,
        batch_size: 1,
        learning_rate: 1e-2,
        seed,
        ..MlpConfig::new(5, 4)
    };
    let model = classifier::train(&x, &[2], &cfg).map_err(|e| e.to_string())?;
    let p = model.probabilities(&x[0]).map_err(|e| e.to_string())?[2];
    ensure(p > 0.9, || format!("overfit-one-sample probability {p}"))?;

    Ok(format!(
        "max gradient rel error {worst:.2e}, blobs acc {blob_acc:.3}, single-sample p {p:.4}"
    ))
}

// ---------------------------------------------------------------------------

/// Which side of the synthetic corpus carries the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    /// A cue word whose emotions identify the class; hidden states are noise.
    Emotion,
    /// Hidden states sit around a class centre; no word has emotions.
    Embedding,
}

pub const PLANTED_CLASSES: [&str; 5] = ["sad", "joy", "disgust", "surprise", "anger"];
const PLANTED_LAYERS: usize = 4;
const PLANTED_DIM: usize = 16;

fn class_emotions(c: usize) -> EmotionSet {
    use Emotion::*;
    let set: &[Emotion] = match c {
        0 => &[Sadness],
        1 => &[Joy, Trust],
        2 => &[Disgust],
        3 => &[Surprise, Anticipation],
        _ => &[Anger, Fear],
    };
    set.iter().copied().collect()
}

fn letters(i: usize) -> String {
    let a = |k: usize| (b'a' + (k % 26) as u8) as char;
    format!("{}{}", a(i / 26), a(i))
}

/// Writes a synthetic five-class IEST-format corpus with its lexicon,
/// hidden states and experiment config into `dir`; returns the config path.
///
/// Cue words are two synonym hops away from the NRC seeds that carry the
/// class emotions, so the emotion signal only arrives through expansion.
pub fn write_planted(dir: &Path, signal: Signal, tweets: usize, seed: u64, grid: &str) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cues_per_class = 3;
    let fillers: Vec<String> = (0..40).map(|i| format!("fill{}", letters(i))).collect();

    let mut nrc = String::new();
    let mut synonyms = String::new();
    for c in 0..PLANTED_CLASSES.len() {
        for k in 0..cues_per_class {
            let tag = letters(c * cues_per_class + k);
            for e in Emotion::ALL {
                let flag = u8::from(signal == Signal::Emotion && class_emotions(c).contains(e));
                nrc.push_str(&format!("root{tag}\t{}\t{flag}\n", e.name()));
            }
            synonyms.push_str(&format!("root{tag}\tmid{tag}\nmid{tag}\tcue{tag}\n"));
        }
    }
    // an unrelated seed keeps the lexicon non-empty when no cue carries emotions
    nrc.push_str("unrelated\tjoy\t1\n");
    std::fs::write(dir.join("nrc.tsv"), nrc).unwrap();
    std::fs::write(dir.join("synonyms.tsv"), &synonyms).unwrap();
    let seeds = load_categorical_lexicon(dir.join("nrc.tsv"), CategoricalFormat::NrcEmotion, 0.0)
        .unwrap()
        .entries;
    let graph = SynonymGraph::load(dir.join("synonyms.tsv")).unwrap();
    build_emosyn(&seeds, &graph, 3)
        .unwrap()
        .save(dir.join("lexicon.tsv"))
        .unwrap();

    let centers: Vec<Vec<f64>> = (0..PLANTED_CLASSES.len())
        .map(|_| (0..PLANTED_DIM).map(|_| normal(&mut rng)).collect())
        .collect();
    let mut labels = Vec::with_capacity(tweets);
    let (mut train, mut test) = (String::new(), String::new());
    for i in 0..tweets {
        let c = i % PLANTED_CLASSES.len();
        labels.push(c);
        let mut words: Vec<String> = (0..5).map(|_| fillers.choose(&mut rng).unwrap().clone()).collect();
        if signal == Signal::Emotion {
            let cue = format!("cue{}", letters(c * cues_per_class + rng.gen_range(0..cues_per_class)));
            words.insert(rng.gen_range(0..=words.len()), cue);
        }
        words.insert(rng.gen_range(0..=words.len()), MASK_LITERAL.to_string());
        let line = format!("{}\t{}\n", PLANTED_CLASSES[c], words.join(" "));
        if (i / PLANTED_CLASSES.len()) % 5 == 4 {
            test.push_str(&line);
        } else {
            train.push_str(&line);
        }
    }
    std::fs::write(dir.join("train.tsv"), train).unwrap();
    std::fs::write(dir.join("test.tsv"), test).unwrap();

    // hidden states for every loaded tweet, keyed by the loader's ids
    let mut records = Vec::new();
    let class_of = |label: &str| PLANTED_CLASSES.iter().position(|&c| c == label).unwrap();
    for (file, split) in [("train.tsv", Split::Train), ("test.tsv", Split::Test)] {
        for t in DatasetFormat::Iest.load(dir.join(file), split, None).unwrap().tweets {
            let clean = preprocess(&RawTweet::new(t.id.clone(), t.text.clone()), None).unwrap();
            let mut tokens = vec![SubwordToken::new("<s>", -1)];
            for (w, tok) in clean.tokens.iter().enumerate() {
                tokens.push(SubwordToken::new(tok.surface.clone(), w as i32));
            }
            tokens.push(SubwordToken::new("</s>", -1));
            let center = &centers[class_of(&t.label)];
            let mut acts = Vec::with_capacity(PLANTED_LAYERS * tokens.len() * PLANTED_DIM);
            for _ in 0..PLANTED_LAYERS * tokens.len() {
                for center_d in center {
                    let base = if signal == Signal::Embedding { *center_d } else { 0.0 };
                    acts.push((base + normal(&mut rng)) as f32);
                }
            }
            records.push(HiddenStateRecord::new(t.id, PLANTED_LAYERS, PLANTED_DIM, tokens, acts).unwrap());
        }
    }
    records.shuffle(&mut rng);
    cefer::embeddings::write_chsf(dir.join("states.chsf"), PLANTED_LAYERS, PLANTED_DIM, &records).unwrap();

    let config = dir.join("exp.cfg");
    std::fs::write(
        &config,
        format!(
            "# synthetic corpus\ndataset = iest\ntrain = train.tsv\ntest = test.tsv\nchsf = states.chsf\n\
             lexicon = lexicon.tsv\ngrid = {grid}\nemosyn = both\noutput = report\nseed = {seed}\n"
        ),
    )
    .unwrap();
    config
}

fn planted_table(signal: Signal, seed: u64) -> Result<ResultTable, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = write_planted(dir.path(), signal, 1000, seed, "token/last4/avg");
    let cfg = ExperimentConfig::load(&config).map_err(|e| e.to_string())?;
    cefer::experiment::run_and_write(&cfg).map_err(|e| e.to_string())
}

pub fn planted_signal(seed: u64) -> Check {
    let spec: PoolingSpec = "token/last4/avg".parse().unwrap();
    let acc = |t: &ResultTable, emosyn: bool| t.row(&spec, emosyn).map(|r| r.accuracy).ok_or("missing row");

    let emotion = planted_table(Signal::Emotion, seed)?;
    let (on, off) = (acc(&emotion, true)?, acc(&emotion, false)?);
    ensure(on >= 0.95, || {
        format!("emotion-signal corpus: emosyn accuracy {on:.3} < 0.95")
    })?;
    ensure(off <= 0.6, || {
        format!("emotion-signal corpus: noise-only accuracy {off:.3} > 0.6")
    })?;

    let converse = planted_table(Signal::Embedding, seed)?;
    let (c_on, c_off) = (acc(&converse, true)?, acc(&converse, false)?);
    ensure(c_on >= 0.9 && c_off >= 0.9, || {
        format!("embedding-signal corpus: accuracies {c_on:.3} (on) / {c_off:.3} (off) below 0.9")
    })?;
    ensure(c_on >= c_off - 0.02, || {
        format!("embedding-signal corpus: emosyn {c_on:.3} more than 0.02 below {c_off:.3}")
    })?;
    Ok(format!(
        "emotion corpus on {on:.3} / off {off:.3}; embedding corpus on {c_on:.3} / off {c_off:.3}"
    ))
}

// ---------------------------------------------------------------------------

pub fn dataset_loaders() -> Check {
    let histogram = |format: DatasetFormat, file: &str| -> Result<(usize, BTreeMap<String, usize>, usize), String> {
        let loaded = format
            .load(fixture(file), Split::Train, None)
            .map_err(|e| e.to_string())?;
        let mut h = BTreeMap::new();
        for t in &loaded.tweets {
            *h.entry(t.label.clone()).or_insert(0) += 1;
        }
        Ok((loaded.tweets.len(), h, loaded.warnings.len()))
    };
    let expect = |pairs: &[(&str, usize)]| {
        pairs
            .iter()
            .map(|&(k, v)| (k.to_string(), v))
            .collect::<BTreeMap<_, _>>()
    };

    let ei = histogram(DatasetFormat::Ei, "ei.tsv")?;
    ensure(
        ei == (24, expect(&[("joy", 8), ("sadness", 6), ("fear", 5), ("anger", 5)]), 0),
        || format!("ei fixture: {ei:?}"),
    )?;
    let iest = histogram(DatasetFormat::Iest, "iest.tsv")?;
    let iest_expected = expect(&[
        ("sad", 5),
        ("joy", 6),
        ("disgust", 5),
        ("surprise", 5),
        ("anger", 5),
        ("fear", 5),
    ]);
    ensure(iest == (31, iest_expected, 1), || format!("iest fixture: {iest:?}"))?;
    let emotex = histogram(DatasetFormat::Emotex, "emotex.tsv")?;
    let emotex_expected = expect(&[
        ("Happy-Active", 5),
        ("Happy-Inactive", 5),
        ("Unhappy-Active", 5),
        ("Unhappy-Inactive", 5),
    ]);
    ensure(emotex == (20, emotex_expected, 0), || {
        format!("emotex fixture: {emotex:?}")
    })?;

    use Emotion::*;
    let rows: [(&str, &[Emotion]); 4] = [
        ("Unhappy-Active", &[Fear, Disgust, Anger]),
        ("Unhappy-Inactive", &[Sadness]),
        ("Happy-Active", &[Surprise, Joy]),
        ("Happy-Inactive", &[Trust, Anticipation]),
    ];
    for (label, emotions) in rows {
        let got = map_circumplex_to_plutchik(label).map_err(|e| e.to_string())?;
        let want: EmotionSet = emotions.iter().copied().collect();
        ensure(got == want, || format!("{label} maps to {}", got.to_bit_string()))?;
    }
    ensure(map_circumplex_to_plutchik("Neutral").is_err(), || {
        "unknown quadrant accepted".into()
    })?;
    Ok("fixtures 24/31/20 records, circumplex mapping exact".into())
}
