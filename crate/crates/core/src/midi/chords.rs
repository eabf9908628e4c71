use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MidiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChordQuality {
    Maj,
    Min,
    Dim,
    Aug,
    Dom7,
    Other,
}

impl ChordQuality {
    /// Template order; also the tie-break order for chord inference.
    pub const ALL: [ChordQuality; 6] = [
        ChordQuality::Maj,
        ChordQuality::Min,
        ChordQuality::Dim,
        ChordQuality::Aug,
        ChordQuality::Dom7,
        ChordQuality::Other,
    ];

    /// Chord-tone intervals above the root. `Other` is treated as a bare
    /// root-fifth dyad.
    pub fn intervals(self) -> &'static [u8] {
        match self {
            ChordQuality::Maj => &[0, 4, 7],
            ChordQuality::Min => &[0, 3, 7],
            ChordQuality::Dim => &[0, 3, 6],
            ChordQuality::Aug => &[0, 4, 8],
            ChordQuality::Dom7 => &[0, 4, 7, 10],
            ChordQuality::Other => &[0, 7],
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|q| *q == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChordQuality::Maj => "maj",
            ChordQuality::Min => "min",
            ChordQuality::Dim => "dim",
            ChordQuality::Aug => "aug",
            ChordQuality::Dom7 => "dom7",
            ChordQuality::Other => "other",
        }
    }
}

impl fmt::Display for ChordQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChordQuality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| format!("unknown chord quality {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordLabel {
    /// Seconds.
    pub onset: f64,
    /// Pitch class 0..12.
    pub root: u8,
    pub quality: ChordQuality,
}

impl ChordLabel {
    /// Pitch-class bitmask (bit `pc` set for each chord tone).
    pub fn mask(&self) -> u16 {
        chord_mask(self.root, self.quality)
    }
}

pub(crate) fn chord_mask(root: u8, quality: ChordQuality) -> u16 {
    quality
        .intervals()
        .iter()
        .fold(0u16, |m, iv| m | 1 << ((root + iv) % 12))
}

/// Parses `onset_seconds<TAB>root_pc<TAB>quality` lines. Blank lines and
/// lines starting with `#` are skipped. The result is sorted by onset.
pub fn parse_chord_sidecar(text: &str) -> Result<Vec<ChordLabel>, MidiError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| MidiError::MalformedChords { line: i + 1, reason };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let onset: f64 = fields[0].trim().parse().map_err(|e| bad(format!("onset: {e}")))?;
        if !(onset >= 0.0) {
            return Err(bad("negative onset".into()));
        }
        let root: u8 = fields[1].trim().parse().map_err(|e| bad(format!("root: {e}")))?;
        if root > 11 {
            return Err(bad(format!("root pitch class {root} out of range")));
        }
        let quality = fields[2].trim().parse().map_err(bad)?;
        out.push(ChordLabel { onset, root, quality });
    }
    out.sort_by(|a, b| a.onset.total_cmp(&b.onset));
    Ok(out)
}
