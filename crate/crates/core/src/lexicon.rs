//! EmoSyn: an eight-category emotional dictionary.
//!
//! Seeds come from the NRC word-level emotion lexicon and the NRC hashtag
//! lexicon. Word seeds are then propagated through a synonym graph for a
//! bounded number of hops, so a term inherits the emotions of every seed
//! within `max_depth` edges of it. Hashtag seeds are kept as-is.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::TokenKind;

/// Default number of synonym hops.
pub const DEFAULT_DEPTH: u8 = 3;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("no valid lexicon entries")]
    EmptyLexicon,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LexiconError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        LexiconError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Plutchik's eight basic emotions in canonical vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Emotion {
    Anger,
    Fear,
    Anticipation,
    Disgust,
    Sadness,
    Joy,
    Trust,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; 8] = [
        Emotion::Anger,
        Emotion::Fear,
        Emotion::Anticipation,
        Emotion::Disgust,
        Emotion::Sadness,
        Emotion::Joy,
        Emotion::Trust,
        Emotion::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Anticipation => "anticipation",
            Emotion::Disgust => "disgust",
            Emotion::Sadness => "sadness",
            Emotion::Joy => "joy",
            Emotion::Trust => "trust",
            Emotion::Surprise => "surprise",
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

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_lowercase();
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| format!("not a Plutchik emotion: {s:?}"))
    }
}

/// Set of emotions packed into one byte, bit `i` = `Emotion::ALL[i]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EmotionSet(u8);

impl EmotionSet {
    pub const EMPTY: EmotionSet = EmotionSet(0);

    pub fn from_bits(bits: u8) -> Self {
        EmotionSet(bits)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn insert(&mut self, e: Emotion) {
        self.0 |= 1 << e.index();
    }

    pub fn contains(self, e: Emotion) -> bool {
        self.0 & (1 << e.index()) != 0
    }

    pub fn union(self, other: EmotionSet) -> EmotionSet {
        EmotionSet(self.0 | other.0)
    }

    pub fn difference(self, other: EmotionSet) -> EmotionSet {
        EmotionSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: EmotionSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Emotion> {
        Emotion::ALL.into_iter().filter(move |e| self.contains(*e))
    }

    /// Eight '0'/'1' characters in canonical order.
    pub fn to_bit_string(self) -> String {
        Emotion::ALL
            .iter()
            .map(|&e| if self.contains(e) { '1' } else { '0' })
            .collect()
    }

    pub fn parse_bit_string(s: &str) -> Option<EmotionSet> {
        if s.len() != 8 {
            return None;
        }
        let mut set = EmotionSet::EMPTY;
        for (i, c) in s.chars().enumerate() {
            match c {
                '1' => set.insert(Emotion::ALL[i]),
                '0' => {}
                _ => return None,
            }
        }
        Some(set)
    }
}

impl FromIterator<Emotion> for EmotionSet {
    fn from_iter<I: IntoIterator<Item = Emotion>>(iter: I) -> Self {
        let mut set = EmotionSet::EMPTY;
        for e in iter {
            set.insert(e);
        }
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    NrcEmotion,
    NrcHashtag,
    SynonymExpansion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoricalFormat {
    /// `term<TAB>emotion<TAB>flag`
    NrcEmotion,
    /// `emotion<TAB>term<TAB>score`
    NrcHashtag,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub term: String,
    pub emotions: EmotionSet,
    pub source: Source,
    /// 0 for seeds, k for terms first reached at synonym hop k.
    pub depth: u8,
}

impl LexiconEntry {
    pub fn seed(term: impl AsRef<str>, emotions: EmotionSet, source: Source) -> Self {
        Self {
            term: normalize_term(term.as_ref()),
            emotions,
            source,
            depth: 0,
        }
    }
}

/// Lowercases and collapses internal whitespace of multi-word phrases.
pub fn normalize_term(term: &str) -> String {
    term.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Result of loading a categorical lexicon file.
#[derive(Debug, Clone, Default)]
pub struct CategoricalLoad {
    /// One merged entry per term, sorted by term.
    pub entries: Vec<LexiconEntry>,
    /// Rows naming an emotion outside the eight Plutchik categories.
    pub skipped_labels: usize,
}

pub fn load_categorical_lexicon(
    path: impl AsRef<Path>,
    format: CategoricalFormat,
    threshold: f64,
) -> Result<CategoricalLoad, LexiconError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| LexiconError::io(path, e))?;
    parse_categorical_lexicon(BufReader::new(file), &path.display().to_string(), format, threshold)
}

/// Parses NRC-style rows. `origin` only labels error messages.
pub fn parse_categorical_lexicon<R: BufRead>(
    reader: R,
    origin: &str,
    format: CategoricalFormat,
    threshold: f64,
) -> Result<CategoricalLoad, LexiconError> {
    let mut merged: BTreeMap<String, EmotionSet> = BTreeMap::new();
    let mut skipped_labels = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| LexiconError::Io {
            path: origin.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| LexiconError::Parse {
            path: origin.to_string(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 tab-separated fields, got {}",
                fields.len()
            )));
        }
        let (term, label, keep) = match format {
            CategoricalFormat::NrcEmotion => {
                let keep = match fields[2].trim() {
                    "1" => true,
                    "0" => false,
                    other => return Err(parse_err(format!("association flag must be 0 or 1, got {other:?}"))),
                };
                (fields[0], fields[1], keep)
            }
            CategoricalFormat::NrcHashtag => {
                let score: f64 = fields[2]
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad score {:?}", fields[2])))?;
                if !score.is_finite() {
                    return Err(parse_err(format!("non-finite score {score}")));
                }
                (fields[1].trim_start_matches('#'), fields[0], score > threshold)
            }
        };
        let term = normalize_term(term);
        if term.is_empty() {
            return Err(parse_err("empty term".into()));
        }
        let Ok(emotion) = label.parse::<Emotion>() else {
            skipped_labels += 1;
            continue;
        };
        if keep {
            merged.entry(term).or_default().insert(emotion);
        }
    }
    let source = match format {
        CategoricalFormat::NrcEmotion => Source::NrcEmotion,
        CategoricalFormat::NrcHashtag => Source::NrcHashtag,
    };
    Ok(CategoricalLoad {
        entries: merged
            .into_iter()
            .map(|(term, emotions)| LexiconEntry {
                term,
                emotions,
                source,
                depth: 0,
            })
            .collect(),
        skipped_labels,
    })
}

/// Undirected synonym relation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymGraph {
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl SynonymGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds both directions of a synonym pair. Self-pairs are ignored.
    pub fn add_pair(&mut self, a: &str, b: &str) {
        let (a, b) = (normalize_term(a), normalize_term(b));
        if a == b || a.is_empty() || b.is_empty() {
            return;
        }
        self.adjacency.entry(a.clone()).or_default().insert(b.clone());
        self.adjacency.entry(b).or_default().insert(a);
    }

    pub fn neighbors(&self, term: &str) -> impl Iterator<Item = &str> {
        self.adjacency
            .get(term)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| LexiconError::io(path, e))?;
        Self::parse(BufReader::new(file), &path.display().to_string())
    }

    /// Reads `term<TAB>synonym` pairs.
    pub fn parse<R: BufRead>(reader: R, origin: &str) -> Result<Self, LexiconError> {
        let mut graph = SynonymGraph::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| LexiconError::Io {
                path: origin.to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => graph.add_pair(a, b),
                _ => {
                    return Err(LexiconError::Parse {
                        path: origin.to_string(),
                        line: idx + 1,
                        message: "expected `term<TAB>synonym`".into(),
                    })
                }
            }
        }
        Ok(graph)
    }
}

/// Breadth-first propagation of seed emotions through the synonym graph.
///
/// Seeds are returned unchanged. For every term that picks up emotions from
/// seeds 1..=max_depth hops away (and does not already carry them as a seed)
/// one `SynonymExpansion` entry is added holding those inherited emotions and
/// the smallest hop count at which any of them was reached.
///
/// Runs one multi-source BFS per emotion, so a term gets emotion `e` exactly
/// when some seed carrying `e` lies within `max_depth` hops.
pub fn expand_synonyms(seeds: &[LexiconEntry], graph: &SynonymGraph, max_depth: u8) -> Vec<LexiconEntry> {
    let mut own: BTreeMap<&str, EmotionSet> = BTreeMap::new();
    for seed in seeds {
        let slot = own.entry(seed.term.as_str()).or_default();
        *slot = slot.union(seed.emotions);
    }

    // term -> (inherited emotions, min depth among them)
    let mut inherited: BTreeMap<&str, (EmotionSet, u8)> = BTreeMap::new();
    for emotion in Emotion::ALL {
        let mut dist: BTreeMap<&str, u8> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for (&term, set) in &own {
            if set.contains(emotion) {
                dist.insert(term, 0);
                queue.push_back(term);
            }
        }
        while let Some(term) = queue.pop_front() {
            let d = dist[term];
            if d >= max_depth {
                continue;
            }
            for next in graph.neighbors(term) {
                if !dist.contains_key(next) {
                    dist.insert(next, d + 1);
                    queue.push_back(next);
                }
            }
        }
        for (term, d) in dist {
            if d == 0 {
                continue;
            }
            let slot = inherited.entry(term).or_insert((EmotionSet::EMPTY, u8::MAX));
            slot.0.insert(emotion);
            slot.1 = slot.1.min(d);
        }
    }

    let mut out: Vec<LexiconEntry> = seeds.to_vec();
    out.extend(inherited.into_iter().map(|(term, (emotions, depth))| LexiconEntry {
        term: term.to_string(),
        emotions,
        source: Source::SynonymExpansion,
        depth,
    }));
    out
}

/// Compiled emotional dictionary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmoSynLexicon {
    word_table: BTreeMap<String, EmotionSet>,
    hashtag_table: BTreeMap<String, EmotionSet>,
    provenance: Vec<LexiconEntry>,
}

/// Builds the lexicon: NRC emotion seeds plus their synonym expansion form
/// the word table; NRC hashtag seeds form the hashtag table unexpanded.
pub fn build_emosyn(
    categorical: &[LexiconEntry],
    graph: &SynonymGraph,
    max_depth: u8,
) -> Result<EmoSynLexicon, LexiconError> {
    let usable = |e: &&LexiconEntry| !e.emotions.is_empty() && !e.term.is_empty();
    let word_seeds: Vec<LexiconEntry> = categorical
        .iter()
        .filter(usable)
        .filter(|e| e.source == Source::NrcEmotion)
        .cloned()
        .collect();
    let hashtag_seeds = categorical
        .iter()
        .filter(usable)
        .filter(|e| e.source == Source::NrcHashtag)
        .cloned();

    let mut provenance = expand_synonyms(&word_seeds, graph, max_depth);
    provenance.extend(hashtag_seeds);
    if provenance.is_empty() {
        return Err(LexiconError::EmptyLexicon);
    }
    Ok(EmoSynLexicon::from_provenance(provenance))
}

impl EmoSynLexicon {
    fn from_provenance(mut provenance: Vec<LexiconEntry>) -> Self {
        provenance.sort();
        provenance.dedup();
        let mut word_table: BTreeMap<String, EmotionSet> = BTreeMap::new();
        let mut hashtag_table: BTreeMap<String, EmotionSet> = BTreeMap::new();
        for entry in &provenance {
            let table = match entry.source {
                Source::NrcHashtag => &mut hashtag_table,
                Source::NrcEmotion | Source::SynonymExpansion => &mut word_table,
            };
            let slot = table.entry(entry.term.clone()).or_default();
            *slot = slot.union(entry.emotions);
        }
        Self {
            word_table,
            hashtag_table,
            provenance,
        }
    }

    /// Emotions for a lowercase term. Hashtags fall back to the word table.
    pub fn lookup(&self, term: &str, kind: TokenKind) -> EmotionSet {
        match kind {
            TokenKind::Word => self.word_table.get(term).copied().unwrap_or_default(),
            TokenKind::Hashtag => self
                .hashtag_table
                .get(term)
                .or_else(|| self.word_table.get(term))
                .copied()
                .unwrap_or_default(),
        }
    }

    pub fn word_table(&self) -> &BTreeMap<String, EmotionSet> {
        &self.word_table
    }

    pub fn hashtag_table(&self) -> &BTreeMap<String, EmotionSet> {
        &self.hashtag_table
    }

    pub fn provenance(&self) -> &[LexiconEntry] {
        &self.provenance
    }

    /// All terms of the word table.
    pub fn vocabulary(&self) -> BTreeSet<&str> {
        self.word_table.keys().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.word_table.len() + self.hashtag_table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn min_depth(&self, term: &str, kind: TokenKind) -> u8 {
        self.provenance
            .iter()
            .filter(|e| e.term == term && (e.source == Source::NrcHashtag) == (kind == TokenKind::Hashtag))
            .map(|e| e.depth)
            .min()
            .unwrap_or(0)
    }

    /// Canonical TSV: `term<TAB>kind<TAB>bits8<TAB>min_depth`, sorted by
    /// (term, kind), LF line endings.
    pub fn to_tsv(&self) -> String {
        let mut depths: BTreeMap<(&str, TokenKind), u8> = BTreeMap::new();
        for e in &self.provenance {
            let kind = if e.source == Source::NrcHashtag {
                TokenKind::Hashtag
            } else {
                TokenKind::Word
            };
            let slot = depths.entry((e.term.as_str(), kind)).or_insert(u8::MAX);
            *slot = (*slot).min(e.depth);
        }
        let mut rows: Vec<(&str, &str, EmotionSet, u8)> = Vec::with_capacity(self.len());
        for (term, set) in &self.word_table {
            rows.push((
                term,
                TokenKind::Word.as_str(),
                *set,
                depths[&(term.as_str(), TokenKind::Word)],
            ));
        }
        for (term, set) in &self.hashtag_table {
            rows.push((
                term,
                TokenKind::Hashtag.as_str(),
                *set,
                depths[&(term.as_str(), TokenKind::Hashtag)],
            ));
        }
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out = String::new();
        for (term, kind, set, depth) in rows {
            out.push_str(&format!("{term}\t{kind}\t{}\t{depth}\n", set.to_bit_string()));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        let path = path.as_ref();
        let mut file = File::create(path).map_err(|e| LexiconError::io(path, e))?;
        file.write_all(self.to_tsv().as_bytes())
            .map_err(|e| LexiconError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LexiconError::io(path, e))?;
        Self::from_tsv(&text, &path.display().to_string())
    }

    /// Reads the canonical TSV. Provenance is reconstructed coarsely: word
    /// rows at depth 0 become NRC emotion seeds, deeper word rows synonym
    /// expansions, hashtag rows NRC hashtag seeds.
    pub fn from_tsv(text: &str, origin: &str) -> Result<Self, LexiconError> {
        let mut provenance = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: &str| LexiconError::Parse {
                path: origin.to_string(),
                line: idx + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [term, kind, bits, depth] = fields[..] else {
                return Err(err("expected `term<TAB>kind<TAB>bits8<TAB>min_depth`"));
            };
            let emotions =
                EmotionSet::parse_bit_string(bits).ok_or_else(|| err("bits8 must be eight 0/1 characters"))?;
            let depth: u8 = depth.parse().map_err(|_| err("bad depth"))?;
            let source = match (kind, depth) {
                ("hashtag", _) => Source::NrcHashtag,
                ("word", 0) => Source::NrcEmotion,
                ("word", _) => Source::SynonymExpansion,
                _ => return Err(err("kind must be `word` or `hashtag`")),
            };
            if emotions.is_empty() {
                return Err(err("entry without emotions"));
            }
            provenance.push(LexiconEntry {
                term: term.to_string(),
                emotions,
                source,
                depth,
            });
        }
        if provenance.is_empty() {
            return Err(LexiconError::EmptyLexicon);
        }
        Ok(Self::from_provenance(provenance))
    }

    /// Minimum expansion depth recorded for a term, if present.
    pub fn depth_of(&self, term: &str, kind: TokenKind) -> Option<u8> {
        let present = match kind {
            TokenKind::Word => self.word_table.contains_key(term),
            TokenKind::Hashtag => self.hashtag_table.contains_key(term),
        };
        present.then(|| self.min_depth(term, kind))
    }
}
