//! Standard MIDI File reader (formats 0 and 1) and format-0 writer.

use std::collections::HashMap;

use super::{MidiError, Note, Score, TempoEvent, DEFAULT_BPM};

const DEFAULT_USPQ: u32 = 500_000;

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    track: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    fn truncated(&self) -> MidiError {
        MidiError::TruncatedTrack { track: self.track, offset: self.base + self.pos }
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        let b = *self.data.get(self.pos).ok_or_else(|| self.truncated())?;
        self.pos += 1;
        Ok(b)
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.data.len() - self.pos < n {
            return Err(self.truncated());
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Variable-length quantity, at most four bytes.
    fn vlq(&mut self) -> Result<u32, MidiError> {
        let mut v: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            v = (v << 7) | u32::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(self.truncated())
    }

    fn at_end(&self) -> bool {
        self.pos >= self.data.len()
    }
}

#[derive(Debug)]
struct RawNote {
    start: u64,
    end: u64,
    pitch: u8,
    velocity: u8,
    track: usize,
}

#[derive(Default)]
struct TrackEvents {
    notes: Vec<RawNote>,
    tempos: Vec<(u64, u32)>,
    time_sigs: Vec<(u64, u8, u8)>,
}

fn read_track(data: &[u8], track: usize, base: usize) -> Result<TrackEvents, MidiError> {
    let mut r = Reader { data, pos: 0, track, base };
    let mut out = TrackEvents::default();
    let mut open: HashMap<(u8, u8), (u64, u8)> = HashMap::new();
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;

    let close = |open: &mut HashMap<(u8, u8), (u64, u8)>, notes: &mut Vec<RawNote>, key: (u8, u8), at: u64| {
        if let Some((start, velocity)) = open.remove(&key) {
            if at > start {
                notes.push(RawNote { start, end: at, pitch: key.1, velocity, track });
            }
        }
    };

    while !r.at_end() {
        tick += u64::from(r.vlq()?);
        let first = r.u8()?;
        let status = if first & 0x80 != 0 {
            first
        } else {
            // Data byte: reuse the running status and re-read it as data.
            r.pos -= 1;
            running.ok_or(MidiError::TruncatedTrack { track, offset: base + r.pos })?
        };
        match status {
            0xff => {
                running = None;
                let kind = r.u8()?;
                let len = r.vlq()? as usize;
                let payload = r.bytes(len)?;
                match kind {
                    0x2f => break,
                    0x51 if len == 3 => {
                        let uspq = u32::from(payload[0]) << 16 | u32::from(payload[1]) << 8 | u32::from(payload[2]);
                        if uspq > 0 {
                            out.tempos.push((tick, uspq));
                        }
                    }
                    0x58 if len >= 2 => {
                        if payload[1] < 8 {
                            out.time_sigs.push((tick, payload[0], 1u8 << payload[1]));
                        }
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = r.vlq()? as usize;
                r.bytes(len)?;
            }
            0x80..=0xef => {
                running = Some(status);
                let channel = status & 0x0f;
                match status & 0xf0 {
                    0x80 => {
                        let d = r.bytes(2)?;
                        close(&mut open, &mut out.notes, (channel, d[0] & 0x7f), tick);
                    }
                    0x90 => {
                        let d = r.bytes(2)?;
                        let key = (channel, d[0] & 0x7f);
                        close(&mut open, &mut out.notes, key, tick);
                        if d[1] > 0 {
                            open.insert(key, (tick, d[1] & 0x7f));
                        }
                    }
                    0xc0 | 0xd0 => {
                        r.bytes(1)?;
                    }
                    _ => {
                        r.bytes(2)?;
                    }
                }
            }
            _ => {
                // System common / realtime bytes are not valid in a file track.
                return Err(MidiError::TruncatedTrack { track, offset: base + r.pos - 1 });
            }
        }
    }

    // Notes left sounding are closed at the track's final tick.
    let mut keys: Vec<_> = open.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        close(&mut open, &mut out.notes, key, tick);
    }
    Ok(out)
}

/// Tick-to-seconds converter over a piecewise-constant tempo map.
struct TempoTicks {
    /// (tick, seconds at tick, microseconds per quarter)
    segments: Vec<(u64, f64, u32)>,
    tpq: f64,
}

impl TempoTicks {
    fn new(mut tempos: Vec<(u64, u32)>, tpq: u16) -> Self {
        tempos.sort_by_key(|t| t.0);
        let mut dedup: Vec<(u64, u32)> = Vec::new();
        for t in tempos {
            match dedup.last_mut() {
                Some(last) if last.0 == t.0 => *last = t,
                _ => dedup.push(t),
            }
        }
        if dedup.first().map_or(true, |t| t.0 != 0) {
            dedup.insert(0, (0, DEFAULT_USPQ));
        }
        let tpq = f64::from(tpq);
        let mut segments = Vec::with_capacity(dedup.len());
        let mut secs = 0.0;
        let mut prev: Option<(u64, u32)> = None;
        for (tick, uspq) in dedup {
            if let Some((pt, pu)) = prev {
                secs += (tick - pt) as f64 * f64::from(pu) / 1e6 / tpq;
            }
            segments.push((tick, secs, uspq));
            prev = Some((tick, uspq));
        }
        Self { segments, tpq }
    }

    fn seconds(&self, tick: u64) -> f64 {
        let idx = self.segments.partition_point(|s| s.0 <= tick) - 1;
        let (t0, s0, uspq) = self.segments[idx];
        s0 + (tick - t0) as f64 * f64::from(uspq) / 1e6 / self.tpq
    }
}

/// Parses a format 0 or 1 Standard MIDI File.
pub fn parse_midi(bytes: &[u8]) -> Result<Score, MidiError> {
    if bytes.len() < 14 || &bytes[0..4] != b"MThd" {
        return Err(MidiError::MalformedHeader("missing MThd chunk".into()));
    }
    let header_len = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if header_len < 6 || bytes.len() < 8 + header_len {
        return Err(MidiError::MalformedHeader(format!("bad header length {header_len}")));
    }
    let format = u16::from_be_bytes([bytes[8], bytes[9]]);
    let ntracks = u16::from_be_bytes([bytes[10], bytes[11]]);
    let division = u16::from_be_bytes([bytes[12], bytes[13]]);
    match format {
        0 | 1 => {}
        2 => return Err(MidiError::UnsupportedFormat(2)),
        f => return Err(MidiError::MalformedHeader(format!("unknown format {f}"))),
    }
    if format == 0 && ntracks > 1 {
        return Err(MidiError::MalformedHeader(format!("format 0 with {ntracks} tracks")));
    }
    if division & 0x8000 != 0 || division == 0 {
        return Err(MidiError::MalformedHeader(format!("unsupported division 0x{division:04x}")));
    }

    let mut pos = 8 + header_len;
    let mut tracks = Vec::new();
    while pos < bytes.len() && tracks.len() < ntracks as usize {
        if bytes.len() - pos < 8 {
            return Err(MidiError::TruncatedTrack { track: tracks.len(), offset: pos });
        }
        let id = &bytes[pos..pos + 4];
        let len = u32::from_be_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let start = pos + 8;
        if bytes.len() - start < len {
            return Err(MidiError::TruncatedTrack { track: tracks.len(), offset: bytes.len() });
        }
        if id == b"MTrk" {
            tracks.push(read_track(&bytes[start..start + len], tracks.len(), start)?);
        }
        pos = start + len;
    }
    if tracks.len() < ntracks as usize {
        return Err(MidiError::TruncatedTrack { track: tracks.len(), offset: bytes.len() });
    }

    let tempos: Vec<_> = tracks.iter().flat_map(|t| t.tempos.iter().copied()).collect();
    let conv = TempoTicks::new(tempos, division);
    let time_signature = tracks
        .iter()
        .flat_map(|t| t.time_sigs.iter().copied())
        .min_by_key(|t| t.0)
        .map_or((4, 4), |t| (t.1.max(1), t.2));

    let mut score = Score {
        notes: tracks
            .iter()
            .flat_map(|t| t.notes.iter())
            .map(|n| {
                let onset = conv.seconds(n.start);
                Note {
                    pitch: n.pitch,
                    onset,
                    duration: conv.seconds(n.end) - onset,
                    velocity: n.velocity,
                    track: n.track,
                }
            })
            .collect(),
        tempo_map: conv
            .segments
            .iter()
            .map(|&(_, time, uspq)| TempoEvent { time, bpm: 60e6 / f64::from(uspq) })
            .collect(),
        time_signature,
        ticks_per_quarter: division,
        chord_annotations: None,
    };
    score.sort_notes();
    Ok(score)
}

fn push_vlq(out: &mut Vec<u8>, mut v: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (v & 0x7f) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

/// Serializes a score. Notes go to track chunk `track` on channel
/// `track % 16`, so parsing restores the field; tempo and time signature
/// are meta events in the first chunk. A single chunk is written as
/// format 0, several as format 1.
pub fn write_midi(score: &Score) -> Vec<u8> {
    let tpq = score.ticks_per_quarter.max(1);
    let tpqf = f64::from(tpq);

    // (tick, seconds, uspq) for each tempo event.
    let mut tempo_ticks: Vec<(u64, f64, u32)> = Vec::new();
    let default_tempo = [TempoEvent { time: 0.0, bpm: DEFAULT_BPM }];
    let tempo_map = if score.tempo_map.is_empty() { &default_tempo[..] } else { &score.tempo_map[..] };
    for ev in tempo_map {
        let uspq = (60e6 / ev.bpm).round().clamp(1.0, 16_777_215.0) as u32;
        let tick = match tempo_ticks.last() {
            None => 0,
            Some(&(pt, ps, pu)) => pt + ((ev.time - ps) * 1e6 / f64::from(pu) * tpqf).round().max(0.0) as u64,
        };
        tempo_ticks.push((tick, ev.time, uspq));
    }
    let to_tick = |secs: f64| -> u64 {
        let idx = tempo_ticks.partition_point(|t| t.1 <= secs).max(1) - 1;
        let (t0, s0, uspq) = tempo_ticks[idx];
        t0 + ((secs - s0) * 1e6 / f64::from(uspq) * tpqf).round().max(0.0) as u64
    };

    // Per chunk; sort key: tick, then class (0 meta, 1 note-off, 2 note-on), then pitch.
    let n_tracks = score.notes.iter().map(|n| n.track + 1).max().unwrap_or(1);
    let mut events: Vec<Vec<(u64, u8, u8, Vec<u8>)>> = vec![Vec::new(); n_tracks];
    let (num, den) = score.time_signature;
    let den_pow = (den.max(1) as f64).log2().round() as u8;
    events[0].push((0, 0, 0, vec![0xff, 0x58, 0x04, num, den_pow, 24, 8]));
    for &(tick, _, uspq) in &tempo_ticks {
        events[0].push((tick, 0, 1, vec![0xff, 0x51, 0x03, (uspq >> 16) as u8, (uspq >> 8) as u8, uspq as u8]));
    }
    for n in &score.notes {
        let ch = (n.track % 16) as u8;
        let on = to_tick(n.onset);
        let off = to_tick(n.end()).max(on + 1);
        events[n.track].push((on, 2, n.pitch, vec![0x90 | ch, n.pitch & 0x7f, n.velocity.clamp(1, 127)]));
        events[n.track].push((off, 1, n.pitch, vec![0x80 | ch, n.pitch & 0x7f, 0]));
    }

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&u16::from(n_tracks > 1).to_be_bytes());
    out.extend_from_slice(&(n_tracks as u16).to_be_bytes());
    out.extend_from_slice(&tpq.to_be_bytes());
    for mut evs in events {
        evs.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        let mut track = Vec::new();
        let mut last = 0u64;
        for (tick, _, _, bytes) in &evs {
            push_vlq(&mut track, (tick - last) as u32);
            track.extend_from_slice(bytes);
            last = *tick;
        }
        track.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(track.len() as u32).to_be_bytes());
        out.extend_from_slice(&track);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn smf(format: u16, division: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
        let mut out = b"MThd".to_vec();
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&format.to_be_bytes());
        out.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&division.to_be_bytes());
        for t in tracks {
            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(t.len() as u32).to_be_bytes());
            out.extend_from_slice(t);
        }
        out
    }

    #[test]
    fn single_quarter_note_at_120() {
        let track = vec![
            0x00, 0x90, 60, 100, // note on
            0x83, 0x60, 0x80, 60, 0, // delta 480
            0x00, 0xff, 0x2f, 0x00,
        ];
        let s = parse_midi(&smf(0, 480, &[track])).unwrap();
        assert_eq!(s.notes.len(), 1);
        assert_eq!(s.notes[0].pitch, 60);
        assert_abs_diff_eq!(s.notes[0].onset, 0.0);
        assert_abs_diff_eq!(s.notes[0].duration, 0.5, epsilon = 1e-12);
        assert_eq!(s.time_signature, (4, 4));
        assert_abs_diff_eq!(s.tempo_map[0].bpm, 120.0);
    }

    #[test]
    fn empty_track() {
        let s = parse_midi(&smf(0, 96, &[vec![0x00, 0xff, 0x2f, 0x00]])).unwrap();
        assert!(s.notes.is_empty());
    }

    #[test]
    fn running_status_and_zero_velocity_off() {
        let track = vec![
            0x00, 0x90, 60, 90, // on C4
            0x60, 62, 90, // running status: on D4 at 96
            0x00, 60, 0, // running status: C4 off at 96
            0x60, 62, 0, // D4 off at 192
            0x00, 0xff, 0x2f, 0x00,
        ];
        let s = parse_midi(&smf(0, 96, &[track])).unwrap();
        assert_eq!(s.notes.len(), 2);
        assert_abs_diff_eq!(s.notes[0].duration, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.notes[1].onset, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn overlapping_same_pitch_truncates_first() {
        let track = vec![
            0x00, 0x90, 60, 90, 0x30, 0x90, 60, 80, 0x30, 0x80, 60, 0, 0x30, 0x80, 60, 0, 0x00, 0xff,
            0x2f, 0x00,
        ];
        let s = parse_midi(&smf(0, 96, &[track])).unwrap();
        assert_eq!(s.notes.len(), 2);
        assert_abs_diff_eq!(s.notes[0].duration, 0.25, epsilon = 1e-12);
        assert_eq!(s.notes[1].velocity, 80);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(parse_midi(b"RIFF0000000000"), Err(MidiError::MalformedHeader(_))));
        let t = vec![0x00, 0xff, 0x2f, 0x00];
        assert_eq!(parse_midi(&smf(2, 96, &[t.clone()])), Err(MidiError::UnsupportedFormat(2)));
        let mut bytes = smf(0, 96, &[vec![0x00, 0x90, 60]]);
        assert!(matches!(parse_midi(&bytes), Err(MidiError::TruncatedTrack { .. })));
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(parse_midi(&bytes), Err(MidiError::TruncatedTrack { .. })));
    }

    #[test]
    fn tempo_change_mid_track() {
        let track = vec![
            0x00, 0x90, 60, 90, // on at 0
            0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20, // 120 bpm
            0x60, 0xff, 0x51, 0x03, 0x0f, 0x42, 0x40, // 60 bpm at tick 96
            0x60, 0x80, 60, 0, // off at 192
            0x00, 0xff, 0x2f, 0x00,
        ];
        let s = parse_midi(&smf(0, 96, &[track])).unwrap();
        assert_eq!(s.tempo_map.len(), 2);
        assert_abs_diff_eq!(s.notes[0].duration, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn vlq_encoding() {
        for (v, expect) in [
            (0u32, vec![0x00]),
            (0x7f, vec![0x7f]),
            (0x80, vec![0x81, 0x00]),
            (0x3fff, vec![0xff, 0x7f]),
            (0x4000, vec![0x81, 0x80, 0x00]),
            (0x0fff_ffff, vec![0xff, 0xff, 0xff, 0x7f]),
        ] {
            let mut out = Vec::new();
            push_vlq(&mut out, v);
            assert_eq!(out, expect, "{v:#x}");
        }
    }

    #[test]
    fn writer_round_trip_simple() {
        let notes = vec![Note::new(60, 0.0, 0.5, 100), Note::new(64, 0.5, 0.25, 70)];
        let s = Score::with_notes(notes, 100.0);
        let back = parse_midi(&write_midi(&s)).unwrap();
        assert_eq!(back.notes.len(), 2);
        assert_abs_diff_eq!(back.notes[1].onset, 0.5, epsilon = 1.0 / 480.0 * 0.6);
        assert_abs_diff_eq!(back.tempo_map[0].bpm, 100.0, epsilon = 1e-3);
    }

    #[test]
    fn tracks_survive_round_trip() {
        let mut a = Note::new(36, 0.0, 2.0, 90);
        a.track = 2;
        let b = Note::new(36, 0.5, 0.5, 60);
        let s = Score::with_notes(vec![a, b], 120.0);
        let bytes = write_midi(&s);
        assert_eq!(&bytes[8..12], &[0, 1, 0, 3]);
        let back = parse_midi(&bytes).unwrap();
        assert_eq!(back.notes.iter().map(|n| (n.track, n.duration)).collect::<Vec<_>>(), [(2, 2.0), (0, 0.5)]);
        assert_eq!(parse_midi(&write_midi(&back)).unwrap(), back);
    }
}
