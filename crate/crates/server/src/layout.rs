//! Study directory layout shared by `study init` and the service:
//! the store files, `midi/<id>.mid`, `audio/<id>.wav` and `admin.key`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;
use spikebench_core::midi::{render_wav, write_midi};
use spikebench_core::study::{CuratedPiece, StudyConfig, StudyError, StudyStore};

pub const AUDIO_DIR: &str = "audio";
pub const MIDI_DIR: &str = "midi";
pub const ADMIN_KEY_FILE: &str = "admin.key";

pub fn audio_path(dir: &Path, piece: &str) -> PathBuf {
    dir.join(AUDIO_DIR).join(format!("{piece}.wav"))
}

/// 128 random bits, hex encoded.
pub fn random_token() -> String {
    let mut b = [0u8; 16];
    rand::rngs::OsRng.fill_bytes(&mut b);
    hex::encode(b)
}

/// Creates the study, writes every excerpt as MIDI and renders its audio
/// once. Returns the generated admin key.
pub fn init_study(dir: &Path, set: &[CuratedPiece], config: StudyConfig, sample_rate: u32) -> Result<String, StudyError> {
    let pieces = set.iter().map(|c| c.piece.clone()).collect();
    StudyStore::create(dir, config, pieces)?;
    fs::create_dir_all(dir.join(AUDIO_DIR))?;
    fs::create_dir_all(dir.join(MIDI_DIR))?;
    set.par_iter().try_for_each(|c| -> Result<(), StudyError> {
        fs::write(dir.join(MIDI_DIR).join(format!("{}.mid", c.piece.id)), write_midi(&c.score))?;
        fs::write(audio_path(dir, &c.piece.id), render_wav(&c.score, sample_rate)?)?;
        Ok(())
    })?;
    let key = random_token();
    fs::write(dir.join(ADMIN_KEY_FILE), format!("{key}\n"))?;
    Ok(key)
}

pub fn read_admin_key(dir: &Path) -> Result<String, StudyError> {
    let key = fs::read_to_string(dir.join(ADMIN_KEY_FILE))?.trim().to_string();
    if key.is_empty() {
        return Err(StudyError::Corrupt(format!("{ADMIN_KEY_FILE} is empty")));
    }
    Ok(key)
}
