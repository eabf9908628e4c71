//! Sine-tone preview renderer.

use std::f64::consts::PI;

use super::{MidiError, Score};

pub const WAV_HEADER_LEN: usize = 44;
const RAMP_SECONDS: f64 = 0.010;

fn check_rate(sample_rate: u32) -> Result<(), MidiError> {
    match sample_rate {
        22_050 | 44_100 => Ok(()),
        r => Err(MidiError::InvalidSampleRate(r)),
    }
}

pub fn pitch_frequency(pitch: u8) -> f64 {
    440.0 * 2f64.powf((f64::from(pitch) - 69.0) / 12.0)
}

/// Un-normalized mono mix: one enveloped sine per note, amplitude
/// `velocity / 127`.
pub fn synthesize(score: &Score, sample_rate: u32) -> Result<Vec<f64>, MidiError> {
    check_rate(sample_rate)?;
    if score.notes.is_empty() {
        return Err(MidiError::EmptyScore);
    }
    let sr = f64::from(sample_rate);
    let total = (score.duration() * sr).ceil() as usize;
    let mut buf = vec![0.0; total];
    let ramp = RAMP_SECONDS * sr;
    for n in &score.notes {
        let start = (n.onset * sr).round() as usize;
        let end = ((n.end() * sr).round() as usize).min(total);
        if end <= start {
            continue;
        }
        let len = (end - start) as f64;
        let ramp = ramp.min(len / 2.0);
        let amp = f64::from(n.velocity) / 127.0;
        let w = 2.0 * PI * pitch_frequency(n.pitch) / sr;
        for (i, s) in buf[start..end].iter_mut().enumerate() {
            let t = i as f64;
            let env = (t / ramp).min((len - t) / ramp).min(1.0);
            *s += amp * env * (w * t).sin();
        }
    }
    Ok(buf)
}

/// RIFF/WAVE, 16-bit PCM mono, peak-normalized to -1 dBFS.
pub fn render_wav(score: &Score, sample_rate: u32) -> Result<Vec<u8>, MidiError> {
    let samples = synthesize(score, sample_rate)?;
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let gain = if peak > 0.0 { 10f64.powf(-1.0 / 20.0) / peak } else { 0.0 };

    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(WAV_HEADER_LEN + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for s in samples {
        let v = (s * gain * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Duration in seconds of a PCM16 mono WAV produced by [`render_wav`].
pub fn wav_duration(bytes: &[u8]) -> Option<f64> {
    if bytes.len() < WAV_HEADER_LEN || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return None;
    }
    let rate = u32::from_le_bytes(bytes[24..28].try_into().ok()?);
    let data = u32::from_le_bytes(bytes[40..44].try_into().ok()?);
    Some(f64::from(data) / 2.0 / f64::from(rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::Note;
    use rustfft::{num_complex::Complex, FftPlanner};

    #[test]
    fn a4_spectral_peak() {
        let s = Score::with_notes(vec![Note::new(69, 0.0, 1.0, 100)], 120.0);
        let wav = render_wav(&s, 44_100).unwrap();
        let pcm: Vec<Complex<f64>> = wav[WAV_HEADER_LEN..]
            .chunks_exact(2)
            .map(|b| Complex::new(f64::from(i16::from_le_bytes([b[0], b[1]])), 0.0))
            .collect();
        assert_eq!(pcm.len(), 44_100);
        let mut buf = pcm;
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let peak = (1..22_050).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
        assert!((439..=441).contains(&peak), "peak at bin {peak}");
    }

    #[test]
    fn header_and_length() {
        let s = Score::with_notes(vec![Note::new(60, 0.0, 0.5, 100)], 120.0);
        let wav = render_wav(&s, 22_050).unwrap();
        let samples = 11_025;
        assert_eq!(wav.len(), WAV_HEADER_LEN + 2 * samples);
        assert_eq!(u32::from_le_bytes(wav[4..8].try_into().unwrap()) as usize, wav.len() - 8);
        assert_eq!(wav_duration(&wav), Some(0.5));
        let peak = wav[WAV_HEADER_LEN..]
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]).unsigned_abs())
            .max()
            .unwrap();
        assert_eq!(peak, (10f64.powf(-0.05) * 32767.0).round() as u16);
    }

    #[test]
    fn empty_and_bad_rate() {
        assert_eq!(render_wav(&Score::default(), 44_100), Err(MidiError::EmptyScore));
        let s = Score::with_notes(vec![Note::new(60, 0.0, 0.5, 100)], 120.0);
        assert_eq!(render_wav(&s, 48_000), Err(MidiError::InvalidSampleRate(48_000)));
    }

    #[test]
    fn mix_is_sum_of_solo_renders() {
        let a = Note::new(60, 0.0, 0.5, 100);
        let b = Note::new(67, 0.0, 0.5, 60);
        let both = synthesize(&Score::with_notes(vec![a, b], 120.0), 22_050).unwrap();
        let sa = synthesize(&Score::with_notes(vec![a], 120.0), 22_050).unwrap();
        let sb = synthesize(&Score::with_notes(vec![b], 120.0), 22_050).unwrap();
        for i in 0..both.len() {
            assert!((both[i] - (sa[i] + sb[i])).abs() < 1e-12);
        }
    }
}
