//! Corpus ingestion: parse four-voice pieces from JSON, validate and
//! transpose them, expand notes into unit-duration sonority columns, and
//! build the raw alphabet (the Cartesian product of observed per-voice
//! pitch ranges).

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

/// Voice names in index order (voice 1 = soprano, ..., voice 4 = bass).
pub const VOICE_NAMES: [&str; 4] = ["soprano", "alto", "tenor", "bass"];

/// Default cap on the raw alphabet size. Corpora whose per-voice pitch
/// ranges multiply out beyond this are rejected at parse time.
pub const DEFAULT_MAX_OMEGA: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed corpus JSON: {0}")]
    Json(String),
    #[error("corpus holds no pieces")]
    EmptyCorpus,
    #[error("piece {piece}: expected 4 voices, found {found}")]
    VoiceCount { piece: String, found: usize },
    #[error("piece {piece}, voice {voice}: voice is empty")]
    EmptyVoice { piece: String, voice: usize },
    #[error("piece {piece}, voice {voice}: duration {dur} is not a positive integer")]
    BadDuration { piece: String, voice: usize, dur: i64 },
    #[error("piece {piece}, voice {voice}: midi {midi} out of range [0,127]")]
    MidiOutOfRange { piece: String, voice: usize, midi: i64 },
    #[error("piece {piece}: unequal voice durations {durations:?}")]
    UnequalDurations { piece: String, durations: [u64; 4] },
    #[error("piece {piece}, voice {voice}: transpose by {shift} puts midi {midi} out of range [0,127]")]
    TransposeOutOfRange {
        piece: String,
        voice: usize,
        midi: i64,
        shift: i32,
    },
    #[error("raw alphabet would hold {size} states, above the cap of {cap}")]
    OmegaTooLarge { size: u128, cap: usize },
}

/// A single note: MIDI pitch (C4 = 60) plus a positive integer duration
/// in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Note {
    pub midi: u8,
    pub dur: u32,
}

/// A validated four-voice piece. Voices are ordered soprano, alto,
/// tenor, bass and all carry the same total duration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub id: String,
    pub transpose: i32,
    pub voices: [Vec<Note>; 4],
}

/// One vertical column: the pitch sounding in each voice over one unit
/// of time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sonority(pub [u8; 4]);

impl Sonority {
    pub fn pitch(&self, voice: usize) -> u8 {
        self.0[voice - 1]
    }

    /// Comma-joined MIDI numbers, e.g. `72,67,64,48`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        parts.join(",")
    }
}

/// A piece expanded into columns of equal (gcd) duration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SonorityMatrix {
    pub unit: u32,
    pub columns: Vec<Sonority>,
}

/// The raw alphabet: the Cartesian product of the per-voice pitch ranges
/// observed across the corpus. States are indexed in mixed-radix order,
/// voice 1 most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OmegaSpace {
    lo: [u8; 4],
    hi: [u8; 4],
}

impl OmegaSpace {
    pub fn new(lo: [u8; 4], hi: [u8; 4]) -> OmegaSpace {
        for v in 0..4 {
            assert!(lo[v] <= hi[v], "empty range for voice {}", v + 1);
        }
        OmegaSpace { lo, hi }
    }

    pub fn lo(&self) -> [u8; 4] {
        self.lo
    }

    pub fn hi(&self) -> [u8; 4] {
        self.hi
    }

    fn span(&self, voice: usize) -> usize {
        (self.hi[voice] - self.lo[voice]) as usize + 1
    }

    /// Number of raw states.
    pub fn len(&self) -> usize {
        (0..4).map(|v| self.span(v)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, s: Sonority) -> bool {
        (0..4).all(|v| self.lo[v] <= s.0[v] && s.0[v] <= self.hi[v])
    }

    pub fn index_of(&self, s: Sonority) -> usize {
        debug_assert!(self.contains(s));
        let mut idx = 0usize;
        for v in 0..4 {
            idx = idx * self.span(v) + (s.0[v] - self.lo[v]) as usize;
        }
        idx
    }

    pub fn sonority_at(&self, index: usize) -> Sonority {
        debug_assert!(index < self.len());
        let mut rest = index;
        let mut pitches = [0u8; 4];
        for v in (0..4).rev() {
            let span = self.span(v);
            pitches[v] = self.lo[v] + (rest % span) as u8;
            rest /= span;
        }
        Sonority(pitches)
    }

    /// All states in index order.
    pub fn iter(&self) -> impl Iterator<Item = Sonority> + '_ {
        (0..self.len()).map(move |i| self.sonority_at(i))
    }
}

/// A piece reduced to its column sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnizedPiece {
    pub id: String,
    pub columns: Vec<Sonority>,
}

/// The parsed corpus: columnized pieces plus the raw alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusModel {
    pub pieces: Vec<ColumnizedPiece>,
    pub omega: OmegaSpace,
    pub column_count: usize,
}

// -- JSON schema -------------------------------------------------------

#[derive(Deserialize)]
struct CorpusFile {
    pieces: Vec<PieceFile>,
}

#[derive(Deserialize)]
struct PieceFile {
    id: String,
    #[serde(default)]
    transpose: i32,
    voices: Vec<Vec<(i64, i64)>>,
}

/// Parse a corpus from JSON text with the default alphabet cap.
pub fn parse_corpus(input: &str) -> Result<CorpusModel, CorpusError> {
    parse_corpus_with_cap(input, DEFAULT_MAX_OMEGA)
}

/// Parse a corpus from JSON text, rejecting raw alphabets larger than
/// `max_omega` states.
pub fn parse_corpus_with_cap(input: &str, max_omega: usize) -> Result<CorpusModel, CorpusError> {
    let file: CorpusFile = serde_json::from_str(input).map_err(|e| CorpusError::Json(e.to_string()))?;
    if file.pieces.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }

    let mut pieces = Vec::with_capacity(file.pieces.len());
    let mut column_count = 0usize;
    let mut lo = [u8::MAX; 4];
    let mut hi = [u8::MIN; 4];

    for raw in &file.pieces {
        let piece = validate_piece(raw)?;
        let piece = transpose_piece(&piece, piece.transpose)?;
        check_equal_durations(&piece)?;
        let matrix = columnize(&piece);
        for col in &matrix.columns {
            for v in 0..4 {
                lo[v] = lo[v].min(col.0[v]);
                hi[v] = hi[v].max(col.0[v]);
            }
        }
        column_count += matrix.columns.len();
        pieces.push(ColumnizedPiece {
            id: piece.id.clone(),
            columns: matrix.columns,
        });
    }

    let size: u128 = (0..4)
        .map(|v| (hi[v] - lo[v]) as u128 + 1)
        .product();
    if size > max_omega as u128 {
        return Err(CorpusError::OmegaTooLarge { size, cap: max_omega });
    }

    Ok(CorpusModel {
        pieces,
        omega: OmegaSpace::new(lo, hi),
        column_count,
    })
}

fn validate_piece(raw: &PieceFile) -> Result<Piece, CorpusError> {
    if raw.voices.len() != 4 {
        return Err(CorpusError::VoiceCount {
            piece: raw.id.clone(),
            found: raw.voices.len(),
        });
    }
    let mut voices: [Vec<Note>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (v, notes) in raw.voices.iter().enumerate() {
        if notes.is_empty() {
            return Err(CorpusError::EmptyVoice {
                piece: raw.id.clone(),
                voice: v + 1,
            });
        }
        for &(midi, dur) in notes {
            if !(0..=127).contains(&midi) {
                return Err(CorpusError::MidiOutOfRange {
                    piece: raw.id.clone(),
                    voice: v + 1,
                    midi,
                });
            }
            if dur < 1 || dur > u32::MAX as i64 {
                return Err(CorpusError::BadDuration {
                    piece: raw.id.clone(),
                    voice: v + 1,
                    dur,
                });
            }
            voices[v].push(Note {
                midi: midi as u8,
                dur: dur as u32,
            });
        }
    }
    Ok(Piece {
        id: raw.id.clone(),
        transpose: raw.transpose,
        voices,
    })
}

fn check_equal_durations(piece: &Piece) -> Result<(), CorpusError> {
    let durations: [u64; 4] = [
        voice_duration(&piece.voices[0]),
        voice_duration(&piece.voices[1]),
        voice_duration(&piece.voices[2]),
        voice_duration(&piece.voices[3]),
    ];
    if durations.iter().any(|&d| d != durations[0]) {
        return Err(CorpusError::UnequalDurations {
            piece: piece.id.clone(),
            durations,
        });
    }
    Ok(())
}

fn voice_duration(voice: &[Note]) -> u64 {
    voice.iter().map(|n| n.dur as u64).sum()
}

/// Shift every pitch of `piece` by `shift` semitones. Durations are
/// untouched. The result's `transpose` field is zeroed: the offset has
/// been applied.
pub fn transpose_piece(piece: &Piece, shift: i32) -> Result<Piece, CorpusError> {
    let mut voices: [Vec<Note>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (v, notes) in piece.voices.iter().enumerate() {
        for note in notes {
            let shifted = note.midi as i64 + shift as i64;
            if !(0..=127).contains(&shifted) {
                return Err(CorpusError::TransposeOutOfRange {
                    piece: piece.id.clone(),
                    voice: v + 1,
                    midi: note.midi as i64,
                    shift,
                });
            }
            voices[v].push(Note {
                midi: shifted as u8,
                dur: note.dur,
            });
        }
    }
    Ok(Piece {
        id: piece.id.clone(),
        transpose: 0,
        voices,
    })
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Expand a validated piece into unit-duration columns. The unit is the
/// gcd of every note duration in the piece; a note of duration `d`
/// occupies `d / unit` consecutive columns.
///
/// The piece must already satisfy the equal-voice-duration invariant.
pub fn columnize(piece: &Piece) -> SonorityMatrix {
    let unit = piece
        .voices
        .iter()
        .flat_map(|v| v.iter().map(|n| n.dur))
        .fold(0, gcd);
    debug_assert!(unit >= 1);

    let mut expanded: [Vec<u8>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (v, notes) in piece.voices.iter().enumerate() {
        for note in notes {
            for _ in 0..(note.dur / unit) {
                expanded[v].push(note.midi);
            }
        }
    }
    let len = expanded[0].len();
    assert!(
        expanded.iter().all(|v| v.len() == len),
        "columnize requires equal voice durations (piece {})",
        piece.id
    );

    let columns = (0..len)
        .map(|t| Sonority([expanded[0][t], expanded[1][t], expanded[2][t], expanded[3][t]]))
        .collect();
    SonorityMatrix { unit, columns }
}

/// Per-piece column sequences plus aggregated unigram and adjacent-pair
/// counts. Pair counts never cross piece boundaries.
#[derive(Debug, Clone)]
pub struct SonorityStream {
    /// Column sequence per piece, collapsed when `merge_repeats` was set.
    pub per_piece: Vec<Vec<Sonority>>,
    /// Dense counts over the raw alphabet, indexed by omega state.
    pub unigram: Vec<u64>,
    /// Counts of (previous, next) omega-state pairs within pieces.
    pub bigram: BTreeMap<(u32, u32), u64>,
    pub total_columns: u64,
    pub total_pairs: u64,
}

/// Aggregate column and adjacent-pair counts over the corpus. With
/// `merge_repeats`, runs of identical consecutive columns collapse to a
/// single column before counting.
pub fn sonority_stream(corpus: &CorpusModel, merge_repeats: bool) -> Result<SonorityStream, CorpusError> {
    if corpus.pieces.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut unigram = vec![0u64; corpus.omega.len()];
    let mut bigram: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut per_piece = Vec::with_capacity(corpus.pieces.len());
    let mut total_columns = 0u64;
    let mut total_pairs = 0u64;

    for piece in &corpus.pieces {
        let mut seq: Vec<Sonority> = Vec::with_capacity(piece.columns.len());
        for &col in &piece.columns {
            if merge_repeats && seq.last() == Some(&col) {
                continue;
            }
            seq.push(col);
        }
        for &col in &seq {
            unigram[corpus.omega.index_of(col)] += 1;
            total_columns += 1;
        }
        for pair in seq.windows(2) {
            let a = corpus.omega.index_of(pair[0]) as u32;
            let b = corpus.omega.index_of(pair[1]) as u32;
            *bigram.entry((a, b)).or_insert(0) += 1;
            total_pairs += 1;
        }
        per_piece.push(seq);
    }

    Ok(SonorityStream {
        per_piece,
        unigram,
        bigram,
        total_columns,
        total_pairs,
    })
}
