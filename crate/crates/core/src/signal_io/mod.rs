//! Audio reading, filterbank features, and diarization annotation files
//! (RTTM, UEM, JSON-lines manifests).

mod audio;
mod fbank;

pub use audio::{load_audio, resample};
pub use fbank::{FBANK_DIM, extract_fbank, fbank_frame_count};

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Mono audio at a known sample rate (16 kHz expected by all backbones).
#[derive(Debug, Clone)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples covering `[start, end)` seconds, clamped to the recording.
    pub fn segment(&self, start: f64, end: f64) -> &[f32] {
        let sr = self.sample_rate as f64;
        let a = ((start * sr).round() as usize).min(self.samples.len());
        let b = ((end * sr).round() as usize).min(self.samples.len());
        &self.samples[a..b.max(a)]
    }
}

/// One speaker turn: half-open interval in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub speaker: String,
    pub start: f64,
    pub end: f64,
}

/// Speaker turns for one recording; the unit of reference and hypothesis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Annotation {
    pub recording_id: String,
    pub turns: Vec<Turn>,
}

impl Annotation {
    pub fn new(recording_id: impl Into<String>) -> Self {
        Annotation {
            recording_id: recording_id.into(),
            turns: Vec::new(),
        }
    }

    pub fn push(&mut self, speaker: impl Into<String>, start: f64, end: f64) {
        self.turns.push(Turn {
            speaker: speaker.into(),
            start,
            end,
        });
    }

    /// Union of same-speaker intervals: sorted turns, none self-overlapping.
    /// Idempotent.
    pub fn normalized(&self) -> Annotation {
        let mut by_speaker: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for t in &self.turns {
            by_speaker
                .entry(t.speaker.as_str())
                .or_default()
                .push((t.start, t.end));
        }
        let mut out = Annotation::new(self.recording_id.clone());
        for (speaker, mut ivs) in by_speaker {
            ivs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut merged: Vec<(f64, f64)> = Vec::new();
            for (s, e) in ivs {
                match merged.last_mut() {
                    Some(last) if s <= last.1 => last.1 = last.1.max(e),
                    _ => merged.push((s, e)),
                }
            }
            for (s, e) in merged {
                out.push(speaker, s, e);
            }
        }
        out.turns
            .sort_by(|a, b| (a.start, &a.speaker).partial_cmp(&(b.start, &b.speaker)).unwrap());
        out
    }

    /// Distinct speakers in first-appearance-agnostic sorted order.
    pub fn speakers(&self) -> Vec<String> {
        let mut s: Vec<String> = self.turns.iter().map(|t| t.speaker.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn total_speech(&self) -> f64 {
        self.turns.iter().map(|t| t.end - t.start).sum()
    }
}

/// Scoring regions for one recording (UEM).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringRegions {
    pub recording_id: String,
    pub regions: Vec<(f64, f64)>,
}

/// One dataset entry: paths plus the recording duration in seconds.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub recording_id: String,
    pub audio_path: PathBuf,
    pub rttm_path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub uem_path: Option<PathBuf>,
    pub duration: f64,
}

/// Dataset manifest: JSON-lines of [`ManifestEntry`].
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn total_hours(&self) -> f64 {
        self.entries.iter().map(|e| e.duration).sum::<f64>() / 3600.0
    }
}

/// Parse an RTTM file into per-recording normalized annotations.
pub fn read_rttm(path: &Path) -> Result<BTreeMap<String, Annotation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: BTreeMap<String, Annotation> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            continue; // other RTTM record types are ignored
        }
        if fields.len() < 8 {
            return Err(Error::parse(
                path,
                lineno,
                format!("SPEAKER line has {} fields, expected >= 8", fields.len()),
            ));
        }
        let rec = fields[1].to_string();
        let onset: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad onset '{}'", fields[3])))?;
        let dur: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad duration '{}'", fields[4])))?;
        if dur < 0.0 {
            return Err(Error::parse(path, lineno, format!("negative duration {dur}")));
        }
        let speaker = fields[7].to_string();
        out.entry(rec.clone())
            .or_insert_with(|| Annotation::new(rec))
            .push(speaker, onset, onset + dur);
    }
    Ok(out.into_iter().map(|(k, v)| (k.clone(), v.normalized())).collect())
}

/// Serialize annotations as RTTM SPEAKER lines, times rounded to 1 ms.
pub fn write_rttm(annotations: &[&Annotation]) -> String {
    let mut out = String::new();
    for ann in annotations {
        for t in &ann.turns {
            writeln!(
                out,
                "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
                ann.recording_id,
                t.start,
                t.end - t.start,
                t.speaker
            )
            .expect("string write");
        }
    }
    out
}

/// Parse a UEM file (recording, channel, start, end) into scoring regions.
pub fn read_uem(path: &Path) -> Result<BTreeMap<String, ScoringRegions>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: BTreeMap<String, ScoringRegions> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                lineno,
                format!("UEM line has {} fields, expected 4", fields.len()),
            ));
        }
        let rec = fields[0].to_string();
        let start: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad start '{}'", fields[2])))?;
        let end: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad end '{}'", fields[3])))?;
        if end <= start {
            return Err(Error::parse(path, lineno, "UEM region end <= start"));
        }
        out.entry(rec.clone())
            .or_insert_with(|| ScoringRegions {
                recording_id: rec,
                regions: Vec::new(),
            })
            .regions
            .push((start, end));
    }
    Ok(out)
}

pub fn write_uem(regions: &[&ScoringRegions]) -> String {
    let mut out = String::new();
    for r in regions {
        for (s, e) in &r.regions {
            writeln!(out, "{} 1 {:.3} {:.3}", r.recording_id, s, e).expect("string write");
        }
    }
    out
}

/// Read a JSON-lines manifest. Recording ids must be unique, durations positive.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        if entry.duration <= 0.0 {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("non-positive duration for {}", entry.recording_id),
            ));
        }
        if !seen.insert(entry.recording_id.clone()) {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("duplicate recording_id {}", entry.recording_id),
            ));
        }
        entries.push(entry);
    }
    Ok(Manifest { entries })
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut out = String::new();
    for e in &manifest.entries {
        writeln!(out, "{}", serde_json::to_string(e).expect("serialize entry"))
            .expect("string write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
