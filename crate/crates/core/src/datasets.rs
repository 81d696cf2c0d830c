//! Loaders for the three evaluation corpora and the Circumplex-to-Plutchik
//! class mapping.
//!
//! Default layouts (all TSV):
//! - EI: `id<TAB>tweet<TAB>emotion<TAB>intensity`
//! - IEST: `label<TAB>tweet`, the trigger word replaced by `[#TRIGGERWORD#]`
//! - EmoTex: `tweet<TAB>class`
//!
//! A [`ColumnMap`] overrides the positional layout for other releases.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Emotion, EmotionSet};
use crate::preprocess::MASK_LITERAL;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}:{line}: label {label:?} is not in the {scheme} label set")]
    UnknownLabel {
        path: String,
        line: usize,
        label: String,
        scheme: SchemeName,
    },
    #[error("{0:?} is not a Circumplex class")]
    UnknownCircumplex(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "valid" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTweet {
    pub id: String,
    pub text: String,
    /// Canonical label string of the dataset's scheme.
    pub label: String,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeName {
    Ei4,
    Circumplex4,
    Iest6,
    Plutchik8,
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeName::Ei4 => "EI4",
            SchemeName::Circumplex4 => "Circumplex4",
            SchemeName::Iest6 => "IEST6",
            SchemeName::Plutchik8 => "Plutchik8",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelScheme {
    pub name: SchemeName,
    pub classes: Vec<&'static str>,
}

impl LabelScheme {
    pub fn ei4() -> Self {
        Self {
            name: SchemeName::Ei4,
            classes: vec!["joy", "sadness", "fear", "anger"],
        }
    }

    pub fn circumplex4() -> Self {
        Self {
            name: SchemeName::Circumplex4,
            classes: vec!["Happy-Active", "Happy-Inactive", "Unhappy-Active", "Unhappy-Inactive"],
        }
    }

    pub fn iest6() -> Self {
        Self {
            name: SchemeName::Iest6,
            classes: vec!["sad", "joy", "disgust", "surprise", "anger", "fear"],
        }
    }

    pub fn plutchik8() -> Self {
        Self {
            name: SchemeName::Plutchik8,
            classes: Emotion::ALL.iter().map(|e| e.name()).collect(),
        }
    }

    /// Canonical class string for a raw label, if it belongs to the scheme.
    /// Case-insensitive; Circumplex labels also accept space or underscore
    /// in place of the hyphen.
    pub fn canonical(&self, raw: &str) -> Option<&'static str> {
        let key = |s: &str| s.trim().to_lowercase().replace([' ', '_'], "-");
        let wanted = key(raw);
        self.classes.iter().copied().find(|c| key(c) == wanted)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        let c = self.canonical(label)?;
        self.classes.iter().position(|&x| x == c)
    }
}

/// Positional column layout of a TSV corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnMap {
    pub id: Option<usize>,
    pub text: usize,
    pub label: usize,
    pub intensity: Option<usize>,
}

impl ColumnMap {
    pub const EI: ColumnMap = ColumnMap {
        id: Some(0),
        text: 1,
        label: 2,
        intensity: Some(3),
    };
    pub const IEST: ColumnMap = ColumnMap {
        id: None,
        text: 1,
        label: 0,
        intensity: None,
    };
    pub const EMOTEX: ColumnMap = ColumnMap {
        id: None,
        text: 0,
        label: 1,
        intensity: None,
    };

    fn width(&self) -> usize {
        [Some(self.text), Some(self.label), self.id, self.intensity]
            .into_iter()
            .flatten()
            .max()
            .unwrap_or(0)
            + 1
    }
}

/// Parses `id=0,text=1,label=2,intensity=3`; omitted keys are absent
/// (`text` and `label` are required).
impl FromStr for ColumnMap {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut fields: BTreeMap<String, usize> = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=index, got {part:?}"))?;
            let v: usize = v.trim().parse().map_err(|_| format!("bad column index in {part:?}"))?;
            match k.trim() {
                key @ ("id" | "text" | "label" | "intensity") => {
                    fields.insert(key.to_string(), v);
                }
                other => return Err(format!("unknown column {other:?}")),
            }
        }
        Ok(ColumnMap {
            id: fields.get("id").copied(),
            text: *fields.get("text").ok_or("missing text column")?,
            label: *fields.get("label").ok_or("missing label column")?,
            intensity: fields.get("intensity").copied(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Loaded {
    pub tweets: Vec<LabeledTweet>,
    /// Non-fatal issues, e.g. an IEST tweet without the mask literal.
    pub warnings: Vec<String>,
}

const HEADER_LABELS: [&str; 6] = ["affect dimension", "emotion", "label", "class", "affect", "sentiment"];

struct TsvSpec<'a> {
    prefix: &'a str,
    scheme: LabelScheme,
    columns: ColumnMap,
    split: Split,
    check_mask: bool,
}

fn parse_tsv<R: BufRead>(reader: R, origin: &str, spec: TsvSpec<'_>) -> Result<Loaded, DatasetError> {
    let mut out = Loaded::default();
    let width = spec.columns.width();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: origin.to_string(),
            source,
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| DatasetError::Parse {
            path: origin.to_string(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < width {
            return Err(parse_err(format!(
                "expected at least {width} columns, got {}",
                fields.len()
            )));
        }
        let raw_label = fields[spec.columns.label].trim();
        let Some(label) = spec.scheme.canonical(raw_label) else {
            if line_no == 1 && HEADER_LABELS.contains(&raw_label.to_lowercase().as_str()) {
                continue;
            }
            return Err(DatasetError::UnknownLabel {
                path: origin.to_string(),
                line: line_no,
                label: raw_label.to_string(),
                scheme: spec.scheme.name,
            });
        };
        if let Some(col) = spec.columns.intensity {
            let raw = fields[col].trim();
            if !raw.eq_ignore_ascii_case("none") && raw.parse::<f64>().is_err() {
                return Err(parse_err(format!("bad intensity {raw:?}")));
            }
        }
        let text = fields[spec.columns.text].to_string();
        if spec.check_mask && !text.contains(MASK_LITERAL) {
            out.warnings
                .push(format!("{origin}:{line_no}: tweet has no {MASK_LITERAL} mask"));
        }
        let id = match spec.columns.id {
            Some(col) => fields[col].trim().to_string(),
            None => format!("{}-{}-{line_no}", spec.prefix, spec.split),
        };
        out.tweets.push(LabeledTweet {
            id,
            text,
            label: label.to_string(),
            split: spec.split,
        });
    }
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>, DatasetError> {
    File::open(path).map(BufReader::new).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Emotion Intensity corpus; the intensity column is validated and dropped.
pub fn load_ei(path: impl AsRef<Path>, split: Split) -> Result<Loaded, DatasetError> {
    load_ei_with(path, split, ColumnMap::EI)
}

pub fn load_ei_with(path: impl AsRef<Path>, split: Split, columns: ColumnMap) -> Result<Loaded, DatasetError> {
    let path = path.as_ref();
    parse_ei(open(path)?, &path.display().to_string(), split, columns)
}

pub fn parse_ei<R: BufRead>(reader: R, origin: &str, split: Split, columns: ColumnMap) -> Result<Loaded, DatasetError> {
    parse_tsv(
        reader,
        origin,
        TsvSpec {
            prefix: "ei",
            scheme: LabelScheme::ei4(),
            columns,
            split,
            check_mask: false,
        },
    )
}

/// Implicit-emotion corpus; the mask literal is kept verbatim in the text.
pub fn load_iest(path: impl AsRef<Path>, split: Split) -> Result<Loaded, DatasetError> {
    load_iest_with(path, split, ColumnMap::IEST)
}

pub fn load_iest_with(path: impl AsRef<Path>, split: Split, columns: ColumnMap) -> Result<Loaded, DatasetError> {
    let path = path.as_ref();
    parse_iest(open(path)?, &path.display().to_string(), split, columns)
}

pub fn parse_iest<R: BufRead>(
    reader: R,
    origin: &str,
    split: Split,
    columns: ColumnMap,
) -> Result<Loaded, DatasetError> {
    parse_tsv(
        reader,
        origin,
        TsvSpec {
            prefix: "iest",
            scheme: LabelScheme::iest6(),
            columns,
            split,
            check_mask: true,
        },
    )
}

/// EmoTex corpus. It ships without splits; every tweet is tagged `Train`
/// and callers split it with [`seeded_split`].
pub fn load_emotex(path: impl AsRef<Path>) -> Result<Loaded, DatasetError> {
    load_emotex_with(path, ColumnMap::EMOTEX)
}

pub fn load_emotex_with(path: impl AsRef<Path>, columns: ColumnMap) -> Result<Loaded, DatasetError> {
    let path = path.as_ref();
    parse_emotex(open(path)?, &path.display().to_string(), columns)
}

pub fn parse_emotex<R: BufRead>(reader: R, origin: &str, columns: ColumnMap) -> Result<Loaded, DatasetError> {
    parse_tsv(
        reader,
        origin,
        TsvSpec {
            prefix: "emotex",
            scheme: LabelScheme::circumplex4(),
            columns,
            split: Split::Train,
            check_mask: false,
        },
    )
}

/// Circumplex terms with no Plutchik counterpart, dropped from the mapping.
pub const DROPPED_CIRCUMPLEX_TERMS: [&str; 3] = ["Pessimism", "love", "Optimism"];

/// Plutchik emotions equivalent to a Circumplex quadrant.
pub fn map_circumplex_to_plutchik(label: &str) -> Result<EmotionSet, DatasetError> {
    use Emotion::*;
    let canonical = LabelScheme::circumplex4()
        .canonical(label)
        .ok_or_else(|| DatasetError::UnknownCircumplex(label.to_string()))?;
    let set: EmotionSet = match canonical {
        "Unhappy-Active" => [Fear, Disgust, Anger].into_iter().collect(),
        "Unhappy-Inactive" => [Sadness].into_iter().collect(),
        "Happy-Active" => [Surprise, Joy].into_iter().collect(),
        "Happy-Inactive" => [Trust, Anticipation].into_iter().collect(),
        _ => unreachable!("circumplex scheme has four classes"),
    };
    Ok(set)
}

/// Assigns 80/10/10 train/dev/test splits to `n` items with a seeded shuffle.
pub fn seeded_split(n: usize, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = n * 8 / 10;
    let dev = n / 10;
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < train {
            Split::Train
        } else if rank < train + dev {
            Split::Dev
        } else {
            Split::Test
        };
    }
    splits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    Ei,
    Iest,
    Emotex,
}

impl FromStr for DatasetFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "ei" => Ok(DatasetFormat::Ei),
            "iest" => Ok(DatasetFormat::Iest),
            "emotex" => Ok(DatasetFormat::Emotex),
            other => Err(format!("unknown dataset format {other:?} (use ei|iest|emotex)")),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::Ei => "ei",
            DatasetFormat::Iest => "iest",
            DatasetFormat::Emotex => "emotex",
        })
    }
}

impl DatasetFormat {
    pub fn scheme(self) -> LabelScheme {
        match self {
            DatasetFormat::Ei => LabelScheme::ei4(),
            DatasetFormat::Iest => LabelScheme::iest6(),
            DatasetFormat::Emotex => LabelScheme::circumplex4(),
        }
    }

    pub fn default_columns(self) -> ColumnMap {
        match self {
            DatasetFormat::Ei => ColumnMap::EI,
            DatasetFormat::Iest => ColumnMap::IEST,
            DatasetFormat::Emotex => ColumnMap::EMOTEX,
        }
    }

    /// Loads a file in this format; `split` is ignored for EmoTex.
    pub fn load(
        self,
        path: impl AsRef<Path>,
        split: Split,
        columns: Option<ColumnMap>,
    ) -> Result<Loaded, DatasetError> {
        let columns = columns.unwrap_or_else(|| self.default_columns());
        match self {
            DatasetFormat::Ei => load_ei_with(path, split, columns),
            DatasetFormat::Iest => load_iest_with(path, split, columns),
            DatasetFormat::Emotex => load_emotex_with(path, columns),
        }
    }

    /// Published record counts: per-split or per-class breakdown and total.
    pub fn published_counts(self) -> (Vec<(&'static str, usize)>, usize) {
        match self {
            DatasetFormat::Ei => (vec![("train", 3613), ("dev", 342), ("test", 3142)], 7097),
            DatasetFormat::Iest => (vec![("train", 153383), ("dev", 9591), ("test", 28757)], 191731),
            DatasetFormat::Emotex => (
                vec![
                    ("Happy-Active", 34000),
                    ("Happy-Inactive", 30000),
                    ("Unhappy-Active", 37000),
                    ("Unhappy-Inactive", 34000),
                ],
                135000,
            ),
        }
    }
}

/// Comparison of a loaded file against the published counts. Deviations are
/// reported, never raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub format: DatasetFormat,
    pub records: usize,
    pub label_histogram: BTreeMap<String, usize>,
    pub published: Vec<(String, usize)>,
    pub published_total: usize,
    /// Matching published figure, if the record count equals one of them.
    pub matches: Option<String>,
    pub warnings: usize,
}

impl CountReport {
    pub fn new(format: DatasetFormat, loaded: &Loaded) -> Self {
        let mut label_histogram = BTreeMap::new();
        for t in &loaded.tweets {
            *label_histogram.entry(t.label.clone()).or_insert(0) += 1;
        }
        let (parts, total) = format.published_counts();
        let records = loaded.tweets.len();
        let matches = if records == total {
            Some("total".to_string())
        } else if format != DatasetFormat::Emotex {
            parts
                .iter()
                .find(|(_, n)| *n == records)
                .map(|(name, _)| name.to_string())
        } else {
            None
        };
        Self {
            format,
            records,
            label_histogram,
            published: parts.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            published_total: total,
            matches,
            warnings: loaded.warnings.len(),
        }
    }
}

impl fmt::Display for CountReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "format: {}", self.format)?;
        writeln!(f, "records: {}", self.records)?;
        writeln!(f, "labels:")?;
        for (label, n) in &self.label_histogram {
            writeln!(f, "  {label:<18} {n}")?;
        }
        writeln!(f, "published counts:")?;
        for (name, n) in &self.published {
            writeln!(f, "  {name:<18} {n}")?;
        }
        writeln!(f, "  {:<18} {}", "total", self.published_total)?;
        match &self.matches {
            Some(what) => writeln!(f, "record count matches published {what}")?,
            None => writeln!(f, "record count differs from every published figure (partial data?)")?,
        }
        if self.warnings > 0 {
            writeln!(f, "warnings: {}", self.warnings)?;
        }
        Ok(())
    }
}
