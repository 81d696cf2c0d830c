use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cefer::classifier::{self, ClassWeights, Metrics, MlpConfig, Model};
use cefer::config::{self, KeyValues};
use cefer::datasets::{ColumnMap, CountReport, DatasetFormat, Split};
use cefer::embeddings::{write_fvec, ChsfReader, Combine, FvecFile, LayerSelection, PoolingSpec, Scope};
use cefer::emotion_encoder::{encode_tweet, zero_vector_rate, EmotionVector};
use cefer::experiment::{self, ExperimentConfig, TableStyle};
use cefer::lexicon::{build_emosyn, load_categorical_lexicon, CategoricalFormat, EmoSynLexicon, SynonymGraph};
use cefer::preprocess::{preprocess, CleanTweet, PreprocessError, RawTweet, WordList};

#[derive(Parser)]
#[command(
    name = "cefer",
    version,
    about = "Tweet emotion recognition with lexicon-augmented transformer features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean tweets into tokens.tsv (`id<TAB>space-joined tokens`).
    Preprocess {
        /// `id<TAB>text` file
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        wordlist: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    #[command(subcommand)]
    Lexicon(LexiconCommand),
    /// Per-token emotion vectors (`tweet_id<TAB>token_index<TAB>token<TAB>bits8`).
    Encode {
        #[arg(long)]
        lexicon: PathBuf,
        /// `id<TAB>text` file
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        wordlist: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Pool hidden states into sentence features (.fvec).
    Pool(PoolArgs),
    /// Train a classifier head on pooled features.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// `id<TAB>label` file
        #[arg(long)]
        labels: PathBuf,
        /// key = value hyperparameters
        #[arg(long)]
        config: Option<PathBuf>,
        /// uniform | balanced; overrides the config file
        #[arg(long)]
        class_weights: Option<ClassWeights>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score a trained model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    #[command(subcommand)]
    Data(DataCommand),
    /// Run a pooling grid from a config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum LexiconCommand {
    /// Build the expanded lexicon from NRC files and a synonym list.
    Build {
        #[arg(long)]
        nrc: PathBuf,
        #[arg(long)]
        hashtag: Option<PathBuf>,
        #[arg(long)]
        synonyms: PathBuf,
        #[arg(long, default_value_t = cefer::lexicon::DEFAULT_DEPTH)]
        depth: u8,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum DataCommand {
    /// Print record counts and label histogram against published figures.
    Check {
        #[arg(long)]
        format: DatasetFormat,
        #[arg(long)]
        columns: Option<ColumnMap>,
        #[arg(long)]
        json: bool,
        path: PathBuf,
    },
}

#[derive(Args)]
struct PoolArgs {
    #[arg(long)]
    chsf: PathBuf,
    /// cls | token
    #[arg(long)]
    scope: Scope,
    /// last | lastK | all
    #[arg(long, default_value = "last")]
    layers: LayerSelection,
    /// concat | avg | sum
    #[arg(long, default_value = "sum")]
    combine: Combine,
    /// Append emotion vectors; needs --tweets.
    #[arg(long, requires = "tweets")]
    lexicon: Option<PathBuf>,
    /// `id<TAB>text` file matching the hidden-state records
    #[arg(long, requires = "lexicon")]
    tweets: Option<PathBuf>,
    #[arg(long)]
    wordlist: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess {
            input,
            wordlist,
            output,
        } => {
            let (clean, dropped) = clean_tweets(&input, wordlist.as_deref())?;
            let mut out = create(&output)?;
            for t in &clean {
                let words: Vec<&str> = t.tokens.iter().map(|tok| tok.surface.as_str()).collect();
                writeln!(out, "{}\t{}", t.id, words.join(" "))?;
            }
            out.flush()?;
            eprintln!("{} tweets written, {dropped} empty after cleaning", clean.len());
        }
        Command::Lexicon(LexiconCommand::Build {
            nrc,
            hashtag,
            synonyms,
            depth,
            threshold,
            output,
        }) => {
            let nrc = load_categorical_lexicon(&nrc, CategoricalFormat::NrcEmotion, threshold)?;
            let mut entries = nrc.entries;
            let mut skipped = nrc.skipped_labels;
            if let Some(path) = hashtag {
                let tags = load_categorical_lexicon(&path, CategoricalFormat::NrcHashtag, threshold)?;
                entries.extend(tags.entries);
                skipped += tags.skipped_labels;
            }
            let graph = SynonymGraph::load(&synonyms)?;
            let lexicon = build_emosyn(&entries, &graph, depth)?;
            lexicon.save(&output)?;
            eprintln!(
                "{} words, {} hashtags; {skipped} rows with non-Plutchik labels skipped",
                lexicon.word_table().len(),
                lexicon.hashtag_table().len()
            );
        }
        Command::Encode {
            lexicon,
            input,
            wordlist,
            output,
        } => {
            let lexicon = EmoSynLexicon::load(&lexicon)?;
            let (clean, _) = clean_tweets(&input, wordlist.as_deref())?;
            let matrices = clean
                .iter()
                .map(|t| encode_tweet(t, &lexicon))
                .collect::<Result<Vec<_>, _>>()?;
            let mut out = create(&output)?;
            for m in &matrices {
                m.write_tsv(&mut out)?;
            }
            out.flush()?;
            eprintln!("zero-vector token rate: {:.3}", zero_vector_rate(&matrices));
        }
        Command::Pool(args) => pool(args)?,
        Command::Train {
            features,
            labels,
            config,
            class_weights,
            output,
        } => {
            let features = FvecFile::load(&features)?;
            let labels = read_labels(&labels)?;
            let mut cfg = MlpConfig::new(features.dim, 2);
            let mut class_names: Vec<String> = labels.values().cloned().collect::<BTreeSet<_>>().into_iter().collect();
            if let Some(path) = config {
                let kv = KeyValues::load(&path)?;
                let mut allowed = config::CLASSIFIER_KEYS.to_vec();
                allowed.push("classes");
                kv.reject_unknown(&allowed)?;
                config::apply_classifier_keys(&kv, &mut cfg)?;
                if let Some(list) = kv.get("classes") {
                    class_names = list.split(',').map(|s| s.trim().to_string()).collect();
                }
            }
            if let Some(w) = class_weights {
                cfg.class_weights = w;
            }
            cfg.num_classes = class_names.len();
            let (xs, ys) = join_labels(&features, &labels, &class_names)?;
            let outcome = classifier::train_with_history(&xs, &ys, &cfg)?;
            let mut model = outcome.model;
            model.class_names = class_names;
            model.save(&output)?;
            if let Some(last) = outcome.epoch_losses.last() {
                eprintln!("trained on {} samples, final epoch loss {last:.5}", xs.len());
            }
        }
        Command::Eval {
            model,
            features,
            labels,
            report,
        } => {
            let model = Model::load(&model)?;
            let features = FvecFile::load(&features)?;
            let labels = read_labels(&labels)?;
            let (xs, ys) = join_labels(&features, &labels, &model.class_names)?;
            let metrics = classifier::evaluate(&model, &xs, &ys)?;
            print_metrics(&metrics, &model.class_names);
            if let Some(path) = report {
                let json = serde_json::json!({
                    "class_names": model.class_names,
                    "metrics": metrics,
                });
                std::fs::write(&path, serde_json::to_string_pretty(&json)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Data(DataCommand::Check {
            format,
            columns,
            json,
            path,
        }) => {
            let loaded = format.load(&path, Split::Train, columns)?;
            for w in loaded.warnings.iter().take(5) {
                eprintln!("warning: {w}");
            }
            let report = CountReport::new(format, &loaded);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{report}");
            }
        }
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let table = experiment::run_and_write(&cfg)?;
            print!("{}", table.render(TableStyle::Text));
            eprintln!(
                "reports written to {} and {}",
                cfg.output.with_extension("json").display(),
                cfg.output.with_extension("txt").display()
            );
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Reads `first<TAB>rest` rows, skipping blank lines.
fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let Some((a, b)) = line.split_once('\t') else {
            bail!("{}:{}: expected two tab-separated columns", path.display(), idx + 1);
        };
        rows.push((a.trim().to_string(), b.to_string()));
    }
    Ok(rows)
}

fn read_labels(path: &Path) -> Result<HashMap<String, String>> {
    let mut labels = HashMap::new();
    for (id, label) in read_pairs(path)? {
        if labels.insert(id.clone(), label.trim().to_string()).is_some() {
            bail!("{}: duplicate id {id:?}", path.display());
        }
    }
    Ok(labels)
}

fn clean_tweets(path: &Path, wordlist: Option<&Path>) -> Result<(Vec<CleanTweet>, usize)> {
    let wordlist = wordlist.map(WordList::load).transpose()?;
    let mut clean = Vec::new();
    let mut dropped = 0;
    for (id, text) in read_pairs(path)? {
        match preprocess(&RawTweet::new(id, text), wordlist.as_ref()) {
            Ok(t) => clean.push(t),
            Err(PreprocessError::EmptyTweet { id }) => {
                eprintln!("warning: tweet {id:?} is empty after cleaning, skipped");
                dropped += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((clean, dropped))
}

fn join_labels(
    features: &FvecFile,
    labels: &HashMap<String, String>,
    class_names: &[String],
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in &features.records {
        let Some(label) = labels.get(&rec.id) else {
            continue;
        };
        let Some(class) = class_names.iter().position(|c| c == label) else {
            bail!("record {:?} has label {label:?}, not one of {class_names:?}", rec.id);
        };
        xs.push(rec.values.iter().map(|&v| f64::from(v)).collect());
        ys.push(class);
    }
    if xs.is_empty() {
        bail!("no feature record has a label");
    }
    if xs.len() < labels.len() {
        eprintln!(
            "warning: {} labelled ids have no feature record",
            labels.len() - xs.len()
        );
    }
    Ok((xs, ys))
}

fn pool(args: PoolArgs) -> Result<()> {
    let spec = PoolingSpec::new(args.scope, args.layers, args.combine);
    let emotions: Option<HashMap<String, Vec<EmotionVector>>> = match (&args.lexicon, &args.tweets) {
        (Some(lexicon), Some(tweets)) => {
            let lexicon = EmoSynLexicon::load(lexicon)?;
            let (clean, _) = clean_tweets(tweets, args.wordlist.as_deref())?;
            let mut map = HashMap::new();
            for t in &clean {
                map.insert(t.id.clone(), encode_tweet(t, &lexicon)?.vectors().collect());
            }
            Some(map)
        }
        _ => None,
    };

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for rec in ChsfReader::open(&args.chsf)? {
        let rec = rec?;
        let emo = match &emotions {
            None => None,
            Some(map) => match map.get(rec.sentence_id()) {
                Some(v) => Some(v.as_slice()),
                None => bail!("record {:?} has no tweet in --tweets", rec.sentence_id()),
            },
        };
        let values = experiment::record_features(&rec, emo, &spec)?;
        rows.push((rec.sentence_id().to_string(), values));
    }
    let dim = rows.first().map_or(0, |(_, v)| v.len());
    let mut out = create(&args.output)?;
    write_fvec(&mut out, dim, &rows)?;
    out.flush()?;
    eprintln!("{} records pooled with {spec}, dim {dim}", rows.len());
    Ok(())
}

fn print_metrics(m: &Metrics, class_names: &[String]) {
    println!("accuracy  {:.4}", m.accuracy);
    println!("macro-f1  {:.4}", m.macro_f1);
    for (name, c) in class_names.iter().zip(&m.per_class) {
        println!(
            "  {name:<18} p {:.4}  r {:.4}  f1 {:.4}  n {}",
            c.precision, c.recall, c.f1, c.support
        );
    }
    if !m.zero_support.is_empty() {
        println!("classes without test samples: {:?}", m.zero_support);
    }
}
