use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Piece, StudyError, DATASETS, HUMAN_SOURCE, MAX_EXCERPT_SECONDS, MODELS};
use crate::midi::{trim, Note, Score};

/// One candidate piece offered for the study.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogItem {
    /// Stable identifier of the origin, e.g. a file path.
    pub key: String,
    pub dataset: String,
    /// Model name, or [`HUMAN_SOURCE`].
    pub source: String,
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    pub datasets: Vec<String>,
    pub models: Vec<String>,
    pub per_model: usize,
    pub per_dataset_human: usize,
    pub max_seconds: f64,
    pub seed: u64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            datasets: DATASETS.iter().map(|s| s.to_string()).collect(),
            models: MODELS.iter().map(|s| s.to_string()).collect(),
            per_model: 30,
            per_dataset_human: 12,
            max_seconds: MAX_EXCERPT_SECONDS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuratedPiece {
    pub piece: Piece,
    pub score: Score,
}

/// Draws the configured number of pieces per (dataset, source) cell
/// uniformly at random, trims each to the excerpt limit, shuffles the
/// selection and assigns opaque ids in shuffled order.
pub fn curate(catalog: &[CatalogItem], cfg: &CurationConfig) -> Result<Vec<CuratedPiece>, StudyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut chosen: Vec<&CatalogItem> = Vec::new();
    for dataset in &cfg.datasets {
        let cells = cfg.models.iter().map(|m| (m.as_str(), cfg.per_model));
        for (source, k) in cells.chain(std::iter::once((HUMAN_SOURCE, cfg.per_dataset_human))) {
            let mut pool: Vec<&CatalogItem> =
                catalog.iter().filter(|c| &c.dataset == dataset && c.source == source).collect();
            if pool.len() < k {
                return Err(StudyError::InsufficientCatalog {
                    dataset: dataset.clone(),
                    model: source.to_string(),
                    available: pool.len(),
                    required: k,
                });
            }
            pool.sort_by(|a, b| a.key.cmp(&b.key));
            chosen.extend(pool.choose_multiple(&mut rng, k).copied());
        }
    }
    chosen.shuffle(&mut rng);
    let width = chosen.len().to_string().len().max(4);
    chosen
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let score = trim(&item.score, cfg.max_seconds)?;
            Ok(CuratedPiece {
                piece: Piece {
                    id: format!("p{:0width$}", i + 1),
                    dataset: item.dataset.clone(),
                    source: item.source.clone(),
                    origin: item.key.clone(),
                    duration: score.duration(),
                },
                score,
            })
        })
        .collect()
}

/// Random catalog offering `per_cell` pieces in every (dataset, source)
/// cell of `cfg`. Pieces run 10 to 60 s, so about half need trimming.
pub fn synthetic_catalog(cfg: &CurationConfig, per_cell: usize, seed: u64) -> Vec<CatalogItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for dataset in &cfg.datasets {
        let sources = cfg.models.iter().map(String::as_str).chain(std::iter::once(HUMAN_SOURCE));
        for source in sources {
            for i in 0..per_cell {
                let bpm = rng.gen_range(80.0..140.0);
                let beat = 60.0 / bpm;
                let total: f64 = rng.gen_range(10.0..60.0);
                let mut notes = Vec::new();
                let mut t = 0.0;
                while t < total {
                    let d = beat * f64::from(rng.gen_range(1u8..=4)) / 2.0;
                    notes.push(Note::new(rng.gen_range(55..80), t, d, 90));
                    if rng.gen_bool(0.5) {
                        notes.push(Note::new(rng.gen_range(40..55), t, beat * 2.0, 70));
                    }
                    t += d;
                }
                out.push(CatalogItem {
                    key: format!("{dataset}/{source}/{i:03}.mid"),
                    dataset: dataset.clone(),
                    source: source.to_string(),
                    score: Score::with_notes(notes, bpm),
                });
            }
        }
    }
    out
}
