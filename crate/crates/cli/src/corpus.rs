//! Finding and loading MIDI files, chord sidecars and token files.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use spikebench_core::midi::{parse_chord_sidecar, parse_midi, quantize, Score};
use spikebench_core::tokenizer::{encode, parse_tokens, CompoundToken};
use walkdir::WalkDir;

use crate::CliError;

pub const CHORD_EXT: &str = "chords";
pub const TOKEN_EXT: &str = "tok";

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Files under `dir` with one of `exts`, sorted by path.
pub fn find_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Domain(format!("Io: {} is not a directory", dir.display())));
    }
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Domain(format!("Io: {e}")))?;
        if entry.file_type().is_file() && has_ext(entry.path(), exts) {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

pub fn midi_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    find_files(dir, &["mid", "midi"])
}

/// `<chords>/<relative path>.chords`, falling back to `<chords>/<stem>.chords`.
pub fn sidecar_for(chords: &Path, root: &Path, file: &Path) -> Option<PathBuf> {
    let rel = file.strip_prefix(root).unwrap_or(file);
    let nested = chords.join(rel).with_extension(CHORD_EXT);
    if nested.is_file() {
        return Some(nested);
    }
    let flat = chords.join(file.file_stem()?).with_extension(CHORD_EXT);
    flat.is_file().then_some(flat)
}

/// Parses one file and attaches its chord sidecar, if any.
pub fn load_score(root: &Path, file: &Path, chords: Option<&Path>) -> Result<Score, String> {
    let bytes = std::fs::read(file).map_err(|e| format!("Io: {e}"))?;
    let mut score = parse_midi(&bytes).map_err(|e| e.to_string())?;
    if let Some(side) = chords.and_then(|c| sidecar_for(c, root, file)) {
        let text = std::fs::read_to_string(&side).map_err(|e| format!("Io: {e}"))?;
        score.chord_annotations = Some(parse_chord_sidecar(&text).map_err(|e| e.to_string())?);
    }
    Ok(score)
}

/// Loads every MIDI file in parallel; failures are returned per file.
pub fn load_all(root: &Path, chords: Option<&Path>) -> Result<Vec<(PathBuf, Result<Score, String>)>, CliError> {
    let files = midi_files(root)?;
    Ok(files
        .into_par_iter()
        .map(|f| {
            let s = load_score(root, &f, chords);
            (f, s)
        })
        .collect())
}

/// `(dataset, source)` from `<dataset>/<source>/…/<file>` relative to `root`.
pub fn labels(root: &Path, file: &Path) -> (String, String, String) {
    let rel = file.strip_prefix(root).unwrap_or(file);
    let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    let piece = parts.join("/");
    match parts.len() {
        0 | 1 => ("-".into(), "-".into(), piece),
        2 => (parts[0].clone(), "-".into(), piece),
        _ => (parts[0].clone(), parts[1].clone(), piece),
    }
}

/// Token sequences from `.tok` files, or from MIDI files tokenized at
/// `resolution` when the directory holds no token files.
pub fn load_token_corpus(dir: &Path, resolution: u32) -> Result<Vec<Vec<CompoundToken>>, CliError> {
    let toks = find_files(dir, &[TOKEN_EXT])?;
    if !toks.is_empty() {
        return toks
            .iter()
            .map(|f| {
                let text = std::fs::read_to_string(f)?;
                parse_tokens(&text).map_err(|e| CliError::Domain(format!("{}: {e}", f.display())))
            })
            .collect();
    }
    let mut out = Vec::new();
    for f in midi_files(dir)? {
        let score = load_score(dir, &f, None).map_err(|e| CliError::Domain(format!("{}: {e}", f.display())))?;
        let q = quantize(&score, resolution).map_err(|e| CliError::Domain(format!("{}: {e}", f.display())))?;
        out.push(encode(&q).map_err(|e| CliError::Domain(format!("{}: {e}", f.display())))?);
    }
    if out.is_empty() {
        return Err(CliError::Domain(format!("EmptyCorpus: no .{TOKEN_EXT} or MIDI files in {}", dir.display())));
    }
    Ok(out)
}
