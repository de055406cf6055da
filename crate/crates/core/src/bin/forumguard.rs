use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use forumguard::artifact::{load_pipeline, save_pipeline};
use forumguard::corpus::{corpus_stats, load_corpus};
use forumguard::evaluate::{render_table, Evaluated, MachineRecord};
use forumguard::experiment::{
    batch_predict, confusion_document, load_inputs, model_spec_for, run_experiment, train_final, ExperimentConfig,
};
use forumguard::imbalance::SmoteConfig;
use forumguard::pipeline::{FeatureConfig, FeatureKind, ModelSpec, PipelineSpec};
use forumguard::textprep::{PreprocessConfig, StopwordList};
use forumguard::Error;

#[derive(Parser)]
#[command(name = "forumguard", version, about = "Offensive-comment classifiers for game forums")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label counts, shares and mean comment length of a dataset.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        forum: Option<String>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Train on the full dataset and write a model file.
    Train {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified k-fold evaluation, then a final model on all data.
    Cv {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Output directory for reports and the model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score one comment per line with a trained model.
    Predict {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render saved machine-record reports as one table.
    Report {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Also print the confusion grids.
        #[arg(long)]
        confusion: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Logreg,
    Svm,
    Textcnn,
    Gru,
}

impl ModelArg {
    fn name(self) -> &'static str {
        match self {
            ModelArg::Logreg => "logreg",
            ModelArg::Svm => "svm",
            ModelArg::Textcnn => "textcnn",
            ModelArg::Gru => "gru",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureArg {
    Tfidf,
    Embeddings,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    data: PathBuf,
    /// Forum tag; defaults to the dataset file stem.
    #[arg(long)]
    forum: Option<String>,
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Defaults to the kind the model needs.
    #[arg(long, value_enum)]
    features: Option<FeatureArg>,
    #[arg(long, overrides_with = "no_smote")]
    smote: bool,
    #[arg(long)]
    no_smote: bool,
    #[arg(long, default_value_t = 5)]
    smote_k: usize,
    /// Minority count after oversampling, as a fraction of the majority.
    #[arg(long, default_value_t = 1.0)]
    smote_ratio: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 13_000)]
    max_features: usize,
    #[arg(long, default_value_t = 300)]
    sequence_length: usize,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Data-term weight of the linear models.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Defaults to 0.1 for linear models and 1e-3 for neural ones.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Iteration cap for the linear models.
    #[arg(long, default_value_t = 100)]
    max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    kernel_width: usize,
    #[arg(long, default_value_t = 128)]
    filters: usize,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    /// Whitespace-separated embedding text file (word then values).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    embedding_dim: usize,
    #[arg(long)]
    stemming: bool,
    /// Stopword file, one word per line; replaces the built-in list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Strip asterisks instead of masking censored words.
    #[arg(long)]
    no_masking: bool,
}

fn forum_for(data: &Path, forum: Option<String>) -> String {
    forum.unwrap_or_else(|| {
        data.file_stem()
            .map_or_else(|| "forum".to_string(), |s| s.to_string_lossy().into_owned())
    })
}

/// Errors raised while turning arguments into a configuration are usage
/// errors; everything after that is a pipeline failure.
enum Failure {
    Usage(Error),
    Pipeline(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

impl ExperimentArgs {
    fn into_config(self, out_dir: PathBuf) -> Result<ExperimentConfig, Failure> {
        let stopwords = match &self.stopwords {
            Some(p) => StopwordList::from_file(p).map_err(Failure::Usage)?,
            None => StopwordList::default(),
        };
        let mut model = model_spec_for(self.model.name()).expect("every CLI model has a spec")();
        match &mut model {
            ModelSpec::Linear(c) => {
                c.c = self.c;
                c.seed = self.seed;
                c.max_epochs = self.max_epochs;
                if let Some(lr) = self.learning_rate {
                    c.learning_rate = lr;
                }
            }
            ModelSpec::TextCnn(c) => {
                c.kernel_width = self.kernel_width;
                c.num_filters = self.filters;
                c.embedding_dim = self.embedding_dim;
                self.apply_training(&mut c.training);
            }
            ModelSpec::Gru(c) => {
                c.hidden_size = self.hidden;
                c.embedding_dim = self.embedding_dim;
                self.apply_training(&mut c.training);
            }
        }
        let feature_kind = match self.features {
            Some(FeatureArg::Tfidf) => FeatureKind::Tfidf,
            Some(FeatureArg::Embeddings) => FeatureKind::Embeddings,
            None => model.feature_kind(),
        };
        let config = ExperimentConfig {
            forum: forum_for(&self.data, self.forum),
            data: self.data,
            spec: PipelineSpec {
                preprocess: PreprocessConfig {
                    keep_asterisk_masking: !self.no_masking,
                    lowercase: true,
                    stopwords,
                    enable_stemming: self.stemming,
                },
                features: FeatureConfig {
                    max_features: self.max_features,
                    sequence_length: self.sequence_length,
                },
                model,
                smote: (self.smote && !self.no_smote).then_some(SmoteConfig {
                    k_neighbors: self.smote_k,
                    target_ratio: self.smote_ratio,
                    seed: self.seed,
                }),
            },
            feature_kind,
            folds: self.folds,
            seed: self.seed,
            embeddings: self.embeddings,
            embedding_dim: self.embedding_dim,
            out_dir,
        };
        config.validate().map_err(Failure::Usage)?;
        Ok(config)
    }

    fn apply_training(&self, t: &mut forumguard::neural::TrainingConfig) {
        t.epochs = self.epochs;
        t.batch_size = self.batch_size;
        t.dropout_rate = self.dropout;
        t.seed = self.seed;
        if let Some(lr) = self.learning_rate {
            t.learning_rate = lr;
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let stdout = io::stdout();
    match command {
        Command::Stats { data, forum, json } => {
            let forum = forum_for(&data, forum);
            let stats = corpus_stats(&load_corpus(&data, &forum)?);
            let mut out = stdout.lock();
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&stats).map_err(Error::from)?)
            } else {
                writeln!(out, "{stats}")
            }
            .map_err(io_err(Path::new("<stdout>")))?;
        }
        Command::Train { exp, out } => {
            let config = exp.into_config(PathBuf::new())?;
            let (corpus, table) = load_inputs(&config)?;
            let model = train_final(&corpus, &config.spec, table.as_ref())?;
            save_pipeline(&out, &model)?;
            log::info!("model written to {}", out.display());
        }
        Command::Cv { exp, out } => {
            let config = exp.into_config(out)?;
            let outcome = run_experiment(&config)?;
            let table = render_table(&[(config.label(), Evaluated::Cv(&outcome.cv))]);
            write!(stdout.lock(), "{table}").map_err(io_err(Path::new("<stdout>")))?;
            log::info!("artifacts written to {}", outcome.out_dir.display());
        }
        Command::Predict {
            model_file,
            input,
            output,
        } => {
            let model = load_pipeline(&model_file)?;
            let reader = BufReader::new(File::open(&input).map_err(io_err(&input))?);
            let summary = match &output {
                Some(path) => {
                    let file = File::create(path).map_err(io_err(path))?;
                    batch_predict(&model, reader, BufWriter::new(file), io::stderr(), &input)?
                }
                None => batch_predict(&model, reader, stdout.lock(), io::stderr(), &input)?,
            };
            log::info!(
                "{} lines scored, {} empty after preprocessing",
                summary.lines,
                summary.empty_after_preprocess
            );
        }
        Command::Report { records, confusion } => {
            let mut loaded = Vec::new();
            for path in &records {
                let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                loaded.push(MachineRecord::from_json(&text)?);
            }
            let mut rows = Vec::new();
            for r in &loaded {
                match (&r.cross_validation, &r.evaluation) {
                    (Some(cv), _) => rows.push((r.label.clone(), Evaluated::Cv(cv))),
                    (None, Some(e)) => rows.push((r.label.clone(), Evaluated::Single(e))),
                    (None, None) => {
                        return Err(Failure::Pipeline(Error::Artifact("report holds no results".into())))
                    }
                }
            }
            let mut out = stdout.lock();
            let write = |out: &mut io::StdoutLock, s: &str| write!(out, "{s}").map_err(io_err(Path::new("<stdout>")));
            write(&mut out, &render_table(&rows))?;
            if confusion {
                for r in &loaded {
                    if let Some(cv) = &r.cross_validation {
                        write(&mut out, &format!("\n[{} {}]\n", r.label.model, r.label.setting()))?;
                        write(&mut out, &confusion_document(cv))?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(1)
        }
    }
}
