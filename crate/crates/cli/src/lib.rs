//! `spikebench` command line. Progress goes to stderr; data goes to files or
//! stdout. Exit codes: 0 success, 1 domain error, 2 usage error.

mod analyze;
pub mod corpus;
pub mod study;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use spikebench_core::metrics::{
    aggregate, aggregate_csv, evaluate_corpus, nltm_csv, nltm_pgm, parse_aggregate_csv, reports_csv, AggregateTable,
    LabeledReport, MetricTable,
};
use spikebench_core::midi::{quantize, write_midi, DEFAULT_BPM};
use spikebench_core::spike::{load_checkpoint, save_checkpoint, train_toy, ModelConfig, ToySrnn};
use spikebench_core::tokenizer::{build_vocab, decode, encode, tempo_class, write_tokens, CompoundToken, Vocab};

pub use analyze::AnalyzeArgs;
pub use study::StudyCommand;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("Io: {e}"))
    }
}

pub(crate) fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "spikebench", version, about = "Spiking music generation benchmark and listening-study toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate every MIDI file under a directory.
    Ingest(IngestArgs),
    /// Tokenize a MIDI corpus and write its vocabulary.
    Tokenize(TokenizeArgs),
    /// Train the toy spiking recurrent model on a token corpus.
    TrainToy(TrainArgs),
    /// Sample a piece from a trained checkpoint.
    Generate(GenerateArgs),
    /// Compute every objective metric per file.
    EvalObjective(EvalArgs),
    /// Aggregate metrics per (dataset, source) and draw transition heatmaps.
    Report(ReportArgs),
    /// Listening-study lifecycle.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Means, ANOVA, Tukey HSD and composer-identification accuracy.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub dir: PathBuf,
    /// Write the per-file report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    pub dir: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Directory receiving one `.tok` file per input.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub chords: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub resolution: u32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of `.tok` files, or of MIDI files to tokenize.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 16)]
    pub emb_dim: usize,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub resolution: u32,
    /// Per-epoch mean loss as CSV.
    #[arg(long)]
    pub loss_curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Vocabulary restricting decoding; defaults to the full class tables.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Also write the sampled tokens.
    #[arg(long)]
    pub tokens: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub dir: PathBuf,
    #[arg(long)]
    pub chords: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Full per-piece reports (including transition matrices) as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Corpus laid out as `<dataset>/<source>/*.mid`.
    #[arg(required_unless_present = "reports")]
    pub dir: Option<PathBuf>,
    /// Reports written by `eval-objective --json`, instead of a corpus.
    #[arg(long, conflicts_with = "dir")]
    pub reports: Option<PathBuf>,
    #[arg(long)]
    pub chords: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Emit the pitch, rhythm and harmony summary tables.
    #[arg(long)]
    pub aggregate: bool,
    /// Emit mean note-length transition heatmaps per (dataset, source).
    #[arg(long)]
    pub heatmaps: bool,
    #[arg(long, default_value_t = 16)]
    pub cell_px: usize,
}

/// Parses `argv` and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Ingest(a) => ingest(a),
        Command::Tokenize(a) => tokenize(a),
        Command::TrainToy(a) => train(a),
        Command::Generate(a) => generate(a),
        Command::EvalObjective(a) => eval_objective(a),
        Command::Report(a) => report(a),
        Command::Study(c) => study::run(c),
        Command::Analyze(a) => analyze::run(a),
    }
}

/// Writes `bytes`, creating missing parent directories.
pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub(crate) fn write_or_stdout(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let loaded = corpus::load_all(&a.dir, None)?;
    let mut csv = String::from("file,status,notes,duration_s,error\n");
    let mut failed = 0;
    for (file, res) in &loaded {
        let rel = file.strip_prefix(&a.dir).unwrap_or(file).display();
        match res {
            Ok(s) => {
                let _ = writeln!(csv, "{rel},ok,{},{},", s.notes.len(), s.duration());
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(csv, "{rel},failed,,,\"{}\"", e.replace('"', "'"));
            }
        }
    }
    write_or_stdout(a.out.as_deref(), &csv)?;
    eprintln!("ingested {} files, {} failed", loaded.len(), failed);
    if failed > 0 {
        return Err(CliError::Domain(format!("{failed} of {} files failed to parse", loaded.len())));
    }
    Ok(())
}

fn tokenize(a: TokenizeArgs) -> Result<(), CliError> {
    let loaded = corpus::load_all(&a.dir, a.chords.as_deref())?;
    let mut grids = Vec::new();
    for (file, res) in loaded {
        let score = res.map_err(|e| CliError::Domain(format!("{}: {e}", file.display())))?;
        let q = quantize(&score, a.resolution).map_err(|e| CliError::Domain(format!("{}: {e}", file.display())))?;
        grids.push((file, q));
    }
    let qs: Vec<_> = grids.iter().map(|(_, q)| q.clone()).collect();
    let vocab = build_vocab(&qs).map_err(domain)?;
    write_or_stdout(Some(&a.vocab), &vocab.to_text())?;
    let mut total = 0;
    for (file, q) in &grids {
        let tokens = encode(q).map_err(|e| CliError::Domain(format!("{}: {e}", file.display())))?;
        total += tokens.len();
        if let Some(out) = &a.out {
            let rel = file.strip_prefix(&a.dir).unwrap_or(file);
            write_or_stdout(Some(&out.join(rel).with_extension(corpus::TOKEN_EXT)), &write_tokens(&tokens))?;
        }
    }
    eprintln!("tokenized {} files into {} tokens; vocabulary sizes {:?}", grids.len(), total, vocab.field_sizes());
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let corpus = corpus::load_token_corpus(&a.corpus, a.resolution)?;
    let mut config = ModelConfig { hidden: a.hidden, emb_dim: a.emb_dim, seed: a.seed, resolution: a.resolution, ..ModelConfig::default() };
    if let Some(lr) = a.lr {
        config.learning_rate = lr;
    }
    let model = ToySrnn::new(config).map_err(domain)?;
    eprintln!("training {} parameters on {} sequences for {} epochs", model.parameter_count(), corpus.len(), a.epochs);
    let outcome = train_toy(&model, &corpus, a.epochs).map_err(domain)?;
    write_file(&a.out, save_checkpoint(&outcome.model))?;
    if let Some(path) = &a.loss_curve {
        let mut csv = String::from("epoch,loss\n");
        for (i, l) in outcome.loss_curve.iter().enumerate() {
            let _ = writeln!(csv, "{},{l}", i + 1);
        }
        write_or_stdout(Some(path), &csv)?;
    }
    eprintln!(
        "final loss {:.6}, field accuracy {:.4}",
        outcome.loss_curve.last().copied().unwrap_or(f64::NAN),
        outcome.model.field_accuracy(&corpus)
    );
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let model = load_checkpoint(&fs::read(&a.model)?).map_err(domain)?;
    let vocab = match &a.vocab {
        Some(p) => Vocab::from_text(&fs::read_to_string(p)?).map_err(domain)?,
        None => Vocab::full(model.config.resolution),
    };
    let prompt = [CompoundToken::metric(0, Some(tempo_class(DEFAULT_BPM)), None)];
    let tokens = model.generate(&prompt, a.length, a.temperature, a.seed).map_err(domain)?;
    if let Some(p) = &a.tokens {
        write_or_stdout(Some(p), &write_tokens(&tokens))?;
    }
    let score = decode(&tokens, &vocab).map_err(domain)?;
    write_file(&a.out, write_midi(&score))?;
    eprintln!("generated {} tokens, {} notes", tokens.len(), score.notes.len());
    Ok(())
}

fn labeled_reports(dir: &Path, chords: Option<&Path>) -> Result<Vec<LabeledReport>, CliError> {
    let loaded = corpus::load_all(dir, chords)?;
    let mut meta = Vec::new();
    let mut scores = Vec::new();
    for (file, res) in loaded {
        let score = res.map_err(|e| CliError::Domain(format!("{}: {e}", file.display())))?;
        meta.push(corpus::labels(dir, &file));
        scores.push(score);
    }
    Ok(meta
        .into_iter()
        .zip(evaluate_corpus(&scores))
        .map(|((dataset, source, piece), report)| LabeledReport { dataset, source, piece, report })
        .collect())
}

fn eval_objective(a: EvalArgs) -> Result<(), CliError> {
    let reports = labeled_reports(&a.dir, a.chords.as_deref())?;
    write_or_stdout(Some(&a.out), &reports_csv(&reports))?;
    if let Some(p) = &a.json {
        write_or_stdout(Some(p), &serde_json::to_string(&reports).map_err(domain)?)?;
    }
    eprintln!("evaluated {} files", reports.len());
    Ok(())
}

/// Entry-wise mean of the transition matrices of one (dataset, source).
pub fn mean_nltm(reports: &[&LabeledReport]) -> Option<[[f64; 8]; 8]> {
    let ms: Vec<&[[f64; 8]; 8]> = reports.iter().filter_map(|r| r.report.nltm.as_ref()).collect();
    if ms.is_empty() {
        return None;
    }
    let mut out = [[0.0; 8]; 8];
    for m in &ms {
        for (o, r) in out.iter_mut().zip(m.iter()) {
            for (x, v) in o.iter_mut().zip(r) {
                *x += v / ms.len() as f64;
            }
        }
    }
    Some(out)
}

fn file_label(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Writes the summary tables and heatmaps; returns the table re-read from
/// the written files.
pub fn write_report(reports: &[LabeledReport], out: &Path, tables: bool, heatmaps: bool, cell_px: usize) -> Result<AggregateTable, CliError> {
    fs::create_dir_all(out)?;
    let table = aggregate(reports);
    let mut reread = AggregateTable::default();
    if tables {
        let texts: Vec<String> = MetricTable::ALL.iter().map(|t| aggregate_csv(&table, *t)).collect();
        for (t, text) in MetricTable::ALL.iter().zip(&texts) {
            fs::write(out.join(format!("{}.csv", t.name())), text)?;
        }
        let written: Vec<String> =
            MetricTable::ALL.iter().map(|t| fs::read_to_string(out.join(format!("{}.csv", t.name())))).collect::<Result<_, _>>()?;
        reread = parse_aggregate_csv(&written.iter().map(String::as_str).collect::<Vec<_>>()).map_err(domain)?;
    }
    if heatmaps {
        let mut keys: Vec<(&str, &str)> = reports.iter().map(|r| (r.dataset.as_str(), r.source.as_str())).collect();
        keys.sort();
        keys.dedup();
        for (d, s) in keys {
            let group: Vec<&LabeledReport> = reports.iter().filter(|r| r.dataset == d && r.source == s).collect();
            if let Some(m) = mean_nltm(&group) {
                let stem = format!("nltm_{}_{}", file_label(d), file_label(s));
                fs::write(out.join(format!("{stem}.pgm")), nltm_pgm(&m, cell_px))?;
                fs::write(out.join(format!("{stem}.csv")), nltm_csv(&m))?;
            }
        }
    }
    Ok(reread)
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let reports = match (&a.dir, &a.reports) {
        (_, Some(p)) => serde_json::from_str(&fs::read_to_string(p)?).map_err(|e| CliError::Domain(format!("Io: {e}")))?,
        (Some(d), None) => labeled_reports(d, a.chords.as_deref())?,
        (None, None) => return Err(CliError::Usage("report needs a corpus directory or --reports".into())),
    };
    let (tables, heatmaps) = if a.aggregate || a.heatmaps { (a.aggregate, a.heatmaps) } else { (true, true) };
    let reread = write_report(&reports, &a.out, tables, heatmaps, a.cell_px)?;
    if tables && reread != aggregate(&reports) {
        return Err(CliError::Domain("Io: written summary tables do not read back identically".into()));
    }
    eprintln!("report for {} pieces written to {}", reports.len(), a.out.display());
    Ok(())
}
