//! End-to-end grid runs: pool hidden states under every [`PoolingSpec`] of a
//! grid, optionally append emotion vectors, train a fresh classifier head
//! per cell, and collect test-split accuracy into a [`ResultTable`].

mod report;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::{self, ClassifierError, MlpConfig};
use crate::config::{self, ConfigError, KeyValues};
use crate::datasets::{seeded_split, ColumnMap, DatasetError, DatasetFormat, LabeledTweet, Split};
use crate::embeddings::{
    pool_cls, pool_record, standard_grid, word_vectors, ChsfReader, EmbeddingError, FeatureVector, HiddenStateRecord,
    PoolingSpec, Scope,
};
use crate::emotion_encoder::{encode_tweet, EmotionVector};
use crate::lexicon::{EmoSynLexicon, LexiconError};
use crate::meta_embedding::{meta_pooled, meta_sentence, MetaError};
use crate::preprocess::{preprocess, PreprocessError, RawTweet, WordList};

pub use report::{ResultRow, ResultTable, TableStyle};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("record {0:?} from the dataset is missing from the hidden-state file")]
    MissingRecord(String),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One labelled sentence with everything needed to build features.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub split: Split,
    pub record: HiddenStateRecord,
    /// Emotion vector per preprocessed token; token `i` pairs with the
    /// record's word index `i`.
    pub emotions: Vec<EmotionVector>,
}

#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub dataset: String,
    pub num_classes: usize,
    pub samples: Vec<Sample>,
}

/// Sentence feature of a record under `spec`. With `emotions` (one vector
/// per word index) the mean emotion block is appended.
pub fn record_features(
    record: &HiddenStateRecord,
    emotions: Option<&[EmotionVector]>,
    spec: &PoolingSpec,
) -> Result<Vec<f64>, ExperimentError> {
    let features = match (spec.scope, emotions) {
        (_, None) => pool_record(record, spec)?.values,
        (Scope::ClsSentence, Some(emotions)) => {
            let fallback = [EmotionVector::ZERO];
            let emotions = if emotions.is_empty() { &fallback[..] } else { emotions };
            meta_pooled(&pool_cls(record, spec)?, emotions)?.values
        }
        (Scope::TokenLevel, Some(emotions)) => {
            let pairs: Vec<(FeatureVector, EmotionVector)> = word_vectors(record, spec)?
                .into_iter()
                .map(|(w, v)| (v, emotions.get(w).copied().unwrap_or(EmotionVector::ZERO)))
                .collect();
            meta_sentence(&pairs)?.values
        }
    };
    Ok(features)
}

pub fn sample_features(sample: &Sample, spec: &PoolingSpec, emosyn: bool) -> Result<Vec<f64>, ExperimentError> {
    record_features(&sample.record, emosyn.then_some(sample.emotions.as_slice()), spec)
}

/// Trains and evaluates one grid cell: fit on `Train`, score on `Test`.
pub fn run_cell(
    data: &ExperimentData,
    spec: &PoolingSpec,
    emosyn: bool,
    template: &MlpConfig,
) -> Result<ResultRow, ExperimentError> {
    let start = Instant::now();
    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    let mut test_x = Vec::new();
    let mut test_y = Vec::new();
    for sample in &data.samples {
        let x = sample_features(sample, spec, emosyn)?;
        match sample.split {
            Split::Train => {
                train_x.push(x);
                train_y.push(sample.label);
            }
            Split::Test => {
                test_x.push(x);
                test_y.push(sample.label);
            }
            Split::Dev => {}
        }
    }
    if train_x.is_empty() {
        return Err(ExperimentError::Invalid("no training samples".into()));
    }
    let cfg = MlpConfig {
        input_dim: train_x[0].len(),
        num_classes: data.num_classes,
        ..template.clone()
    };
    let model = classifier::train(&train_x, &train_y, &cfg)?;
    let metrics = classifier::evaluate(&model, &test_x, &test_y)?;
    Ok(ResultRow {
        spec: *spec,
        emosyn,
        accuracy: metrics.accuracy,
        macro_f1: metrics.macro_f1,
        feature_dim: cfg.input_dim,
        wall_time_ms: Some(start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Runs every `(spec, emosyn)` cell. Cells run in parallel; each trains
/// with the same seed, so results do not depend on scheduling.
pub fn run_grid_on(
    data: &ExperimentData,
    grid: &[PoolingSpec],
    emosyn_modes: &[bool],
    template: &MlpConfig,
) -> Result<ResultTable, ExperimentError> {
    if grid.is_empty() || emosyn_modes.is_empty() {
        return Err(ExperimentError::Invalid("empty grid".into()));
    }
    let cells: Vec<(PoolingSpec, bool)> = grid
        .iter()
        .flat_map(|spec| emosyn_modes.iter().map(move |&e| (*spec, e)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|(spec, emosyn)| run_cell(data, spec, *emosyn, template))
        .collect::<Result<Vec<_>, _>>()?;
    let count = |s: Split| data.samples.iter().filter(|x| x.split == s).count();
    Ok(ResultTable {
        dataset: data.dataset.clone(),
        seed: template.seed,
        train_records: count(Split::Train),
        test_records: count(Split::Test),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmosynMode {
    Off,
    On,
    Both,
}

impl EmosynMode {
    pub fn flags(self) -> Vec<bool> {
        match self {
            EmosynMode::Off => vec![false],
            EmosynMode::On => vec![true],
            EmosynMode::Both => vec![false, true],
        }
    }

    pub fn uses_lexicon(self) -> bool {
        self != EmosynMode::Off
    }
}

impl std::str::FromStr for EmosynMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "off" | "false" | "no" => Ok(EmosynMode::Off),
            "on" | "true" | "yes" => Ok(EmosynMode::On),
            "both" => Ok(EmosynMode::Both),
            other => Err(format!("emosyn must be on|off|both, got {other:?}")),
        }
    }
}

/// Where the labelled tweets come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSource {
    /// Published split files; a missing test file is an error at run time.
    Splits {
        train: PathBuf,
        dev: Option<PathBuf>,
        test: Option<PathBuf>,
    },
    /// One file split 80/10/10 with the experiment seed.
    Single(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub format: DatasetFormat,
    pub source: DatasetSource,
    pub columns: Option<ColumnMap>,
    pub chsf: PathBuf,
    pub grid: Vec<PoolingSpec>,
    pub emosyn: EmosynMode,
    pub lexicon: Option<PathBuf>,
    pub wordlist: Option<PathBuf>,
    pub classifier: MlpConfig,
    /// Reports go to `<output>.json` and `<output>.txt`.
    pub output: PathBuf,
}

const EXPERIMENT_KEYS: [&str; 12] = [
    "dataset", "data", "train", "dev", "test", "columns", "chsf", "grid", "emosyn", "lexicon", "wordlist", "output",
];

impl ExperimentConfig {
    /// Reads a flat config; relative paths resolve against `base_dir`.
    pub fn from_key_values(kv: &KeyValues, base_dir: &Path) -> Result<Self, ExperimentError> {
        let allowed: Vec<&str> = EXPERIMENT_KEYS
            .iter()
            .chain(&config::CLASSIFIER_KEYS)
            .copied()
            .collect();
        kv.reject_unknown(&allowed)?;
        let path = |key: &str| kv.get(key).map(|p| base_dir.join(p));
        let format: DatasetFormat = kv
            .parse_value("dataset")?
            .ok_or_else(|| ConfigError::Missing("dataset".into()))?;
        let source = match (path("data"), path("train")) {
            (Some(single), None) => DatasetSource::Single(single),
            (None, Some(train)) => DatasetSource::Splits {
                train,
                dev: path("dev"),
                test: path("test"),
            },
            (Some(_), Some(_)) => {
                return Err(ExperimentError::Invalid(
                    "give either `data` or `train`, not both".into(),
                ))
            }
            (None, None) => return Err(ExperimentError::Invalid("one of `data` or `train` is required".into())),
        };
        let grid = match kv.get("grid").unwrap_or("standard") {
            "standard" => standard_grid(),
            list => list
                .split(',')
                .map(|s| s.trim().parse::<PoolingSpec>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|message| ConfigError::Value {
                    key: "grid".into(),
                    message,
                })?,
        };
        let emosyn: EmosynMode = kv.parse_value("emosyn")?.unwrap_or(EmosynMode::Both);
        let mut classifier = MlpConfig::new(1, 2);
        config::apply_classifier_keys(kv, &mut classifier)?;
        let cfg = Self {
            format,
            source,
            columns: kv.parse_value("columns")?,
            chsf: path("chsf").ok_or_else(|| ConfigError::Missing("chsf".into()))?,
            grid,
            emosyn,
            lexicon: path("lexicon"),
            wordlist: path("wordlist"),
            classifier,
            output: path("output").ok_or_else(|| ConfigError::Missing("output".into()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let kv = KeyValues::load(path)?;
        Self::from_key_values(&kv, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.grid.is_empty() {
            return Err(ExperimentError::Invalid("grid is empty".into()));
        }
        match (self.emosyn.uses_lexicon(), self.lexicon.is_some()) {
            (true, false) => Err(ExperimentError::Invalid("emosyn cells need a `lexicon`".into())),
            (false, true) => Err(ExperimentError::Invalid("`lexicon` given but emosyn = off".into())),
            _ => Ok(()),
        }
    }
}

/// Loads tweets, preprocesses and encodes them, and joins them with their
/// hidden-state records. Tweets that clean to nothing are dropped; their
/// count is returned alongside the data.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<(ExperimentData, usize), ExperimentError> {
    let mut tweets: Vec<LabeledTweet> = Vec::new();
    match &cfg.source {
        DatasetSource::Single(path) => {
            let mut loaded = cfg.format.load(path, Split::Train, cfg.columns)?.tweets;
            let splits = seeded_split(loaded.len(), cfg.classifier.seed);
            for (t, split) in loaded.iter_mut().zip(splits) {
                t.split = split;
            }
            tweets = loaded;
        }
        DatasetSource::Splits { train, dev, test } => {
            let test = test
                .as_ref()
                .ok_or_else(|| ExperimentError::Invalid("`test` is required with `train`".into()))?;
            let parts = [
                (Some(train), Split::Train),
                (dev.as_ref(), Split::Dev),
                (Some(test), Split::Test),
            ];
            for (path, split) in parts {
                if let Some(path) = path {
                    let mut loaded = cfg.format.load(path, split, cfg.columns)?.tweets;
                    loaded.iter_mut().for_each(|t| t.split = split);
                    tweets.extend(loaded);
                }
            }
        }
    }

    let wordlist = cfg.wordlist.as_ref().map(WordList::load).transpose()?;
    let lexicon = cfg.lexicon.as_ref().map(EmoSynLexicon::load).transpose()?;
    let scheme = cfg.format.scheme();

    let mut records: HashMap<String, HiddenStateRecord> = HashMap::new();
    for rec in ChsfReader::open(&cfg.chsf)? {
        let rec = rec?;
        records.insert(rec.sentence_id().to_string(), rec);
    }

    let mut samples = Vec::with_capacity(tweets.len());
    let mut dropped = 0;
    for tweet in tweets {
        let raw = RawTweet::new(tweet.id.clone(), tweet.text.clone());
        let clean = match preprocess(&raw, wordlist.as_ref()) {
            Ok(c) => c,
            Err(PreprocessError::EmptyTweet { .. }) => {
                dropped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let emotions = match &lexicon {
            Some(lex) => encode_tweet(&clean, lex)?.vectors().collect(),
            None => vec![EmotionVector::ZERO; clean.tokens.len()],
        };
        let record = records
            .remove(&tweet.id)
            .ok_or_else(|| ExperimentError::MissingRecord(tweet.id.clone()))?;
        let label = scheme.index_of(&tweet.label).expect("loader validated the label");
        samples.push(Sample {
            id: tweet.id,
            label,
            split: tweet.split,
            record,
            emotions,
        });
    }
    Ok((
        ExperimentData {
            dataset: cfg.format.to_string(),
            num_classes: scheme.classes.len(),
            samples,
        },
        dropped,
    ))
}

pub fn run_grid(cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    let (data, _) = prepare_data(cfg)?;
    run_grid_on(&data, &cfg.grid, &cfg.emosyn.flags(), &cfg.classifier)
}

/// Runs the experiment and writes `<output>.json` (timing omitted, so the
/// file is reproducible) and `<output>.txt` (aligned table with timings).
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    let table = run_grid(cfg)?;
    let write = |ext: &str, body: String| {
        let path = cfg.output.with_extension(ext);
        std::fs::write(&path, body).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    write("json", table.without_timing().render(TableStyle::Json))?;
    write("txt", table.render(TableStyle::Text))?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{Combine, LayerSelection, SubwordToken};

    fn sample(id: usize, label: usize, split: Split) -> Sample {
        let tokens = vec![
            SubwordToken::new("<s>", -1),
            SubwordToken::new("a", 0),
            SubwordToken::new("b", 1),
        ];
        let acts: Vec<f32> = (0..4 * 3 * 2).map(|i| (i as f32 + label as f32 * 5.0) * 0.1).collect();
        Sample {
            id: id.to_string(),
            label,
            split,
            record: HiddenStateRecord::new(id.to_string(), 4, 2, tokens, acts).unwrap(),
            emotions: vec![
                EmotionVector::from_bits([0, 0, 0, 0, 0, label as u8, 0, 0]),
                EmotionVector::ZERO,
            ],
        }
    }

    fn data() -> ExperimentData {
        let samples = (0..20)
            .map(|i| sample(i, i % 2, if i < 16 { Split::Train } else { Split::Test }))
            .collect();
        ExperimentData {
            dataset: "toy".into(),
            num_classes: 2,
            samples,
        }
    }

    fn small_mlp() -> MlpConfig {
        MlpConfig {
            hidden_dims: vec![4],
            epochs: 5,
            batch_size: 8,
            ..MlpConfig::new(1, 2)
        }
    }

    #[test]
    fn feature_dims() {
        let s = sample(0, 1, Split::Train);
        let cat = PoolingSpec::new(Scope::TokenLevel, LayerSelection::AllLayers, Combine::Concatenate);
        assert_eq!(sample_features(&s, &cat, false).unwrap().len(), 8);
        let with = sample_features(&s, &cat, true).unwrap();
        assert_eq!(with.len(), 16);
        // joy bit on one of two words
        assert_eq!(with[8 + 5], 0.5);
        let cls = PoolingSpec::new(Scope::ClsSentence, LayerSelection::LastOnly, Combine::Sum);
        assert_eq!(sample_features(&s, &cls, true).unwrap().len(), 10);
    }

    #[test]
    fn one_spec_one_row() {
        let spec = PoolingSpec::new(Scope::ClsSentence, LayerSelection::LastOnly, Combine::Sum);
        let table = run_grid_on(&data(), &[spec], &[false], &small_mlp()).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!((table.train_records, table.test_records), (16, 4));
    }

    #[test]
    fn grid_rows_cover_every_cell() {
        let table = run_grid_on(&data(), &standard_grid(), &EmosynMode::Both.flags(), &small_mlp()).unwrap();
        assert_eq!(table.rows.len(), 40);
        let again = run_grid_on(&data(), &standard_grid(), &EmosynMode::Both.flags(), &small_mlp()).unwrap();
        assert_eq!(table.without_timing(), again.without_timing());
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(run_grid_on(&data(), &[], &[true], &small_mlp()).is_err());
    }

    #[test]
    fn config_parsing() {
        let kv = KeyValues::parse(
            "dataset = iest\ndata = iest.tsv\nchsf = s.chsf\ngrid = cls/last, token/last4/sum\nemosyn = on\nlexicon = l.tsv\noutput = out/report\nepochs = 3\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_key_values(&kv, Path::new("/base")).unwrap();
        assert_eq!(cfg.grid.len(), 2);
        assert_eq!(cfg.source, DatasetSource::Single(PathBuf::from("/base/iest.tsv")));
        assert_eq!(cfg.classifier.epochs, 3);
        assert_eq!(cfg.emosyn, EmosynMode::On);

        let no_lex = KeyValues::parse("dataset = ei\ndata = x\nchsf = s\nemosyn = both\noutput = o\n").unwrap();
        assert!(ExperimentConfig::from_key_values(&no_lex, Path::new(".")).is_err());
        let unknown =
            KeyValues::parse("dataset = ei\ndata = x\nchsf = s\nemosyn = off\noutput = o\nfoo = 1\n").unwrap();
        assert!(ExperimentConfig::from_key_values(&unknown, Path::new(".")).is_err());
    }
}
