use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use spikebench_core::study::{
    curate, simulate, synthetic_catalog, CatalogItem, CurationConfig, Piece, SimulationConfig, StudyConfig, StudyStore,
    HUMAN_SOURCE,
};
use spikebench_server::{env_config, init_study};

use crate::{corpus, domain, write_or_stdout, CliError};

#[derive(Debug, Subcommand)]
pub enum StudyCommand {
    /// Curate the evaluation set, render audio and create the study directory.
    Init(InitArgs),
    /// Serve the study over HTTP.
    Serve(ServeArgs),
    /// Drive a study to completion with a synthetic cohort.
    Simulate(SimulateArgs),
    /// Write every response as CSV.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Catalog laid out as `<dataset>/<source>/*.mid`; human pieces under
    /// the `Reference` source directory.
    #[arg(long, required_unless_present = "synthetic")]
    pub catalog: Option<PathBuf>,
    /// Use a generated catalog instead of MIDI files.
    #[arg(long, conflicts_with = "catalog")]
    pub synthetic: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub per_model: usize,
    #[arg(long, default_value_t = 12)]
    pub per_dataset_human: usize,
    #[arg(long, default_value_t = 22_050)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = 30)]
    pub lease_minutes: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Study directory; defaults to $MUSPIKE_STUDY.
    #[arg(long)]
    pub study: Option<PathBuf>,
    /// Bind address; defaults to $MUSPIKE_ADDR or 127.0.0.1:8080.
    #[arg(long)]
    pub addr: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Existing study directory; without it a synthetic 810-piece study
    /// is created in a temporary directory.
    #[arg(long)]
    pub study: Option<PathBuf>,
    /// Cohort sizes: Normal,Amateur,Expert.
    #[arg(long, default_value = "48,15,13", value_parser = parse_cohort)]
    pub participants: [usize; 3],
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop after this many responses, as if the process had died.
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub study: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_cohort(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s.split(',').map(|p| p.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    <[usize; 3]>::try_from(parts).map_err(|_| "expected three comma-separated counts N,A,E".to_string())
}

pub fn run(cmd: StudyCommand) -> Result<(), CliError> {
    match cmd {
        StudyCommand::Init(a) => init(a),
        StudyCommand::Serve(a) => serve(a),
        StudyCommand::Simulate(a) => run_simulation(a),
        StudyCommand::Export(a) => {
            let state = StudyStore::replay(&a.study).map_err(domain)?;
            write_or_stdout(a.out.as_deref(), &state.export_csv())
        }
    }
}

fn read_catalog(root: &Path) -> Result<Vec<CatalogItem>, CliError> {
    let mut out = Vec::new();
    for (file, res) in corpus::load_all(root, None)? {
        let score = res.map_err(|e| CliError::Domain(format!("{}: {e}", file.display())))?;
        let (dataset, source, key) = corpus::labels(root, &file);
        out.push(CatalogItem { key, dataset, source, score });
    }
    Ok(out)
}

fn init(a: InitArgs) -> Result<(), CliError> {
    let cfg = CurationConfig { per_model: a.per_model, per_dataset_human: a.per_dataset_human, seed: a.seed, ..CurationConfig::default() };
    let catalog = match &a.catalog {
        Some(dir) => read_catalog(dir)?,
        None => synthetic_catalog(&cfg, a.per_model.max(a.per_dataset_human) + 4, a.seed),
    };
    let set = curate(&catalog, &cfg).map_err(domain)?;
    let human = set.iter().filter(|c| c.piece.source == HUMAN_SOURCE).count();
    eprintln!("curated {} pieces ({} generated, {} reference); rendering audio", set.len(), set.len() - human, human);
    let study = StudyConfig { seed: a.seed, lease_ms: a.lease_minutes * 60_000, ..StudyConfig::default() };
    let key = init_study(&a.out, &set, study, a.sample_rate).map_err(domain)?;
    eprintln!("study created in {}; admin key follows", a.out.display());
    println!("{key}");
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let (env_addr, env_study) = env_config();
    let addr = a.addr.unwrap_or(env_addr);
    let dir = a
        .study
        .or(env_study)
        .ok_or_else(|| CliError::Usage("study serve needs --study or MUSPIKE_STUDY".into()))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("serving {} on {addr}", dir.display());
    rt.block_on(spikebench_server::serve(&addr, &dir)).map_err(domain)
}

/// Pieces of the default 810-piece design, without scores or audio.
pub fn synthetic_pieces(seed: u64) -> Vec<Piece> {
    let cfg = CurationConfig { seed, ..CurationConfig::default() };
    let mut pieces = Vec::new();
    let mut n = 0;
    for d in &cfg.datasets {
        let cells = cfg.models.iter().map(|m| (m.as_str(), cfg.per_model)).chain([(HUMAN_SOURCE, cfg.per_dataset_human)]);
        for (source, k) in cells {
            for i in 0..k {
                n += 1;
                pieces.push(Piece {
                    id: format!("p{n:04}"),
                    dataset: d.clone(),
                    source: source.to_string(),
                    origin: format!("{d}/{source}/{i:03}"),
                    duration: cfg.max_seconds,
                });
            }
        }
    }
    pieces
}

fn run_simulation(a: SimulateArgs) -> Result<(), CliError> {
    let tmp;
    let dir = match &a.study {
        Some(d) => d.clone(),
        None => {
            tmp = tempfile::tempdir()?;
            let dir = tmp.path().join("study");
            StudyStore::create(&dir, StudyConfig { seed: a.seed, ..StudyConfig::default() }, synthetic_pieces(a.seed)).map_err(domain)?;
            dir
        }
    };
    let mut store = StudyStore::open(&dir).map_err(domain)?;
    store.set_sync(false);
    let n = store.state().pieces.len();
    eprintln!("simulating cohort {:?} over {n} pieces", a.participants);
    let cfg = SimulationConfig { cohort: a.participants, seed: a.seed, stop_after: a.stop_after, ..SimulationConfig::default() };
    let report = simulate(&mut store, &cfg).map_err(domain)?;
    store.snapshot().map_err(domain)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(domain)?);
    if report.finished && !report.satisfied {
        let q = store.state().config.quotas;
        return Err(CliError::Domain(format!(
            "QuotasUnmet: smallest counts {:?} (need {:?}), smallest total {} (need {})",
            report.min_counts, q.min_group, report.min_total, q.min_total
        )));
    }
    Ok(())
}
