//! The feature universe: descriptors composed with voice-selection
//! windows. Five descriptors (pitch, pitch12, interv, interv12, order)
//! over the 15 nonempty voice subsets give exactly 63 features; each
//! feature partitions the raw alphabet and pushes raw distributions
//! forward onto its value alphabet.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{OmegaSpace, Sonority, VOICE_NAMES};
use crate::dist::Dist;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("unknown descriptor {0:?}")]
    UnknownDescriptor(String),
    #[error("feature text must look like `<descriptor>@<v1,v2,...>`, got {0:?}")]
    BadSyntax(String),
    #[error("voice index {0} out of range 1..=4")]
    VoiceOutOfRange(u32),
    #[error("voices must be strictly ascending")]
    UnsortedVoices,
    #[error("window holds {found} voices but {descriptor} needs at least {min}")]
    WindowTooSmall {
        descriptor: &'static str,
        found: usize,
        min: usize,
    },
    #[error("cannot parse {text:?} as a {descriptor} value")]
    BadValue {
        descriptor: &'static str,
        text: String,
    },
}

/// The five descriptors, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DescriptorKind {
    Pitch,
    Pitch12,
    Interv,
    Interv12,
    Order,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 5] = [
        DescriptorKind::Pitch,
        DescriptorKind::Pitch12,
        DescriptorKind::Interv,
        DescriptorKind::Interv12,
        DescriptorKind::Order,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Pitch => "pitch",
            DescriptorKind::Pitch12 => "pitch12",
            DescriptorKind::Interv => "interv",
            DescriptorKind::Interv12 => "interv12",
            DescriptorKind::Order => "order",
        }
    }

    pub fn from_name(name: &str) -> Option<DescriptorKind> {
        DescriptorKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Smallest window the descriptor reads.
    pub fn min_window(self) -> usize {
        match self {
            DescriptorKind::Pitch | DescriptorKind::Pitch12 => 1,
            _ => 2,
        }
    }
}

/// A nonempty, strictly ascending subset of the four voices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Window {
    voices: [u8; 4],
    len: u8,
}

impl Window {
    pub fn new(voices: &[u8]) -> Result<Window, FeatureError> {
        if voices.is_empty() || voices.len() > 4 {
            return Err(FeatureError::UnsortedVoices);
        }
        for &v in voices {
            if !(1..=4).contains(&v) {
                return Err(FeatureError::VoiceOutOfRange(v as u32));
            }
        }
        if !voices.windows(2).all(|w| w[0] < w[1]) {
            return Err(FeatureError::UnsortedVoices);
        }
        let mut padded = [0u8; 4];
        padded[..voices.len()].copy_from_slice(voices);
        Ok(Window {
            voices: padded,
            len: voices.len() as u8,
        })
    }

    pub fn voices(&self) -> &[u8] {
        &self.voices[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A descriptor applied to a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Feature {
    kind: DescriptorKind,
    window: Window,
}

impl Feature {
    pub fn new(kind: DescriptorKind, window: Window) -> Result<Feature, FeatureError> {
        if window.len() < kind.min_window() {
            return Err(FeatureError::WindowTooSmall {
                descriptor: kind.name(),
                found: window.len(),
                min: kind.min_window(),
            });
        }
        Ok(Feature { kind, window })
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// The raw feature: pitch over all four voices. Its partition has one
    /// singleton cell per raw state.
    pub fn raw() -> Feature {
        Feature {
            kind: DescriptorKind::Pitch,
            window: Window::new(&[1, 2, 3, 4]).unwrap(),
        }
    }

    pub fn is_raw(&self) -> bool {
        *self == Feature::raw()
    }

    /// Length of the value tuple this feature produces.
    pub fn value_len(&self) -> usize {
        match self.kind {
            DescriptorKind::Pitch | DescriptorKind::Pitch12 => self.window.len(),
            _ => self.window.len() - 1,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let voices: Vec<String> = self.window.voices().iter().map(|v| v.to_string()).collect();
        write!(f, "{}@{}", self.kind.name(), voices.join(","))
    }
}

impl FromStr for Feature {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Feature, FeatureError> {
        parse_feature(s)
    }
}

/// Parse the canonical `<descriptor>@<v1,v2,...>` form.
pub fn parse_feature(text: &str) -> Result<Feature, FeatureError> {
    let (name, tail) = text
        .split_once('@')
        .ok_or_else(|| FeatureError::BadSyntax(text.to_string()))?;
    let kind =
        DescriptorKind::from_name(name).ok_or_else(|| FeatureError::UnknownDescriptor(name.to_string()))?;
    let mut voices = Vec::new();
    for part in tail.split(',') {
        let v: u32 = part
            .trim()
            .parse()
            .map_err(|_| FeatureError::BadSyntax(text.to_string()))?;
        if !(1..=4).contains(&v) {
            return Err(FeatureError::VoiceOutOfRange(v));
        }
        voices.push(v as u8);
    }
    Feature::new(kind, Window::new(&voices)?)
}

/// A feature value: an integer tuple for the pitch/interval descriptors,
/// or a chain of comparison signs (stored as -1/0/+1) for `order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureValue {
    kind: DescriptorKind,
    len: u8,
    data: [i16; 4],
}

impl FeatureValue {
    pub fn new(kind: DescriptorKind, components: &[i16]) -> FeatureValue {
        assert!(!components.is_empty() && components.len() <= 4);
        let mut data = [0i16; 4];
        data[..components.len()].copy_from_slice(components);
        FeatureValue {
            kind,
            len: components.len() as u8,
            data,
        }
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn components(&self) -> &[i16] {
        &self.data[..self.len as usize]
    }

    /// Machine label: comma-joined integers, or `+`/`0`/`-` signs for
    /// order values. `parse` is its inverse.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self
            .components()
            .iter()
            .map(|&c| match self.kind {
                DescriptorKind::Order => match c {
                    1 => "+".to_string(),
                    0 => "0".to_string(),
                    _ => "-".to_string(),
                },
                _ => c.to_string(),
            })
            .collect();
        parts.join(",")
    }

    pub fn parse(kind: DescriptorKind, text: &str) -> Result<FeatureValue, FeatureError> {
        let mut components = Vec::new();
        for part in text.split(',') {
            let c = match kind {
                DescriptorKind::Order => match part.trim() {
                    "+" => 1,
                    "0" => 0,
                    "-" => -1,
                    _ => {
                        return Err(FeatureError::BadValue {
                            descriptor: kind.name(),
                            text: text.to_string(),
                        })
                    }
                },
                _ => part.trim().parse().map_err(|_| FeatureError::BadValue {
                    descriptor: kind.name(),
                    text: text.to_string(),
                })?,
            };
            components.push(c);
        }
        if components.is_empty() || components.len() > 4 {
            return Err(FeatureError::BadValue {
                descriptor: kind.name(),
                text: text.to_string(),
            });
        }
        Ok(FeatureValue::new(kind, &components))
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Evaluate a feature on one sonority.
pub fn apply_feature(feature: Feature, s: Sonority) -> FeatureValue {
    let window = feature.window();
    let voices = window.voices();
    let mut q = [0i16; 4];
    for (i, &v) in voices.iter().enumerate() {
        q[i] = s.pitch(v as usize) as i16;
    }
    let m = voices.len();
    let mut out = [0i16; 4];
    let len = match feature.kind() {
        DescriptorKind::Pitch => {
            out[..m].copy_from_slice(&q[..m]);
            m
        }
        DescriptorKind::Pitch12 => {
            for i in 0..m {
                out[i] = q[i] % 12;
            }
            m
        }
        DescriptorKind::Interv => {
            for i in 0..m - 1 {
                out[i] = q[i] - q[i + 1];
            }
            m - 1
        }
        DescriptorKind::Interv12 => {
            for i in 0..m - 1 {
                out[i] = (q[i] - q[i + 1]).rem_euclid(12);
            }
            m - 1
        }
        DescriptorKind::Order => {
            for i in 0..m - 1 {
                out[i] = (q[i] - q[i + 1]).signum();
            }
            m - 1
        }
    };
    FeatureValue::new(feature.kind(), &out[..len])
}

fn all_windows() -> Vec<Window> {
    let mut windows = Vec::with_capacity(15);
    for mask in 1u8..16 {
        let voices: Vec<u8> = (1..=4).filter(|v| mask & (1 << (v - 1)) != 0).collect();
        windows.push(Window::new(&voices).unwrap());
    }
    windows.sort();
    windows
}

/// The full feature universe in canonical order: descriptors in
/// declaration order, windows lexicographic. Always 63 entries.
pub fn enumerate_features() -> Vec<Feature> {
    let windows = all_windows();
    let mut features = Vec::with_capacity(63);
    for kind in DescriptorKind::ALL {
        for &w in &windows {
            if w.len() >= kind.min_window() {
                features.push(Feature { kind, window: w });
            }
        }
    }
    features
}

/// A feature's partition of the raw alphabet. `cell_of[i]` names the cell
/// of state `i`; `values` lists cell labels in ascending value order.
#[derive(Debug, Clone)]
pub struct Partition {
    feature: Feature,
    values: Vec<FeatureValue>,
    cell_of: Vec<u32>,
    cell_sizes: Vec<u32>,
}

impl Partition {
    pub fn feature(&self) -> Feature {
        self.feature
    }

    pub fn values(&self) -> &[FeatureValue] {
        &self.values
    }

    pub fn cell_of(&self) -> &[u32] {
        &self.cell_of
    }

    pub fn cell_sizes(&self) -> &[u32] {
        &self.cell_sizes
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn omega_len(&self) -> usize {
        self.cell_of.len()
    }

    pub fn cell_index(&self, value: &FeatureValue) -> Option<usize> {
        self.values.binary_search(value).ok()
    }

    /// Raw-state indices in a cell, ascending. Materialized on demand.
    pub fn cell_members(&self, cell: usize) -> Vec<usize> {
        self.cell_of
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c as usize == cell)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Partition the raw alphabet by a feature's value. Cells are disjoint
/// and cover omega by construction.
pub fn feature_partition(feature: Feature, omega: &OmegaSpace) -> Partition {
    let n = omega.len();
    let mut applied = Vec::with_capacity(n);
    let mut ids: BTreeMap<FeatureValue, u32> = BTreeMap::new();
    for s in omega.iter() {
        let v = apply_feature(feature, s);
        applied.push(v);
        ids.entry(v).or_insert(0);
    }
    for (next, (_, id)) in ids.iter_mut().enumerate() {
        *id = next as u32;
    }
    let values: Vec<FeatureValue> = ids.keys().copied().collect();
    let mut cell_sizes = vec![0u32; values.len()];
    let cell_of: Vec<u32> = applied
        .iter()
        .map(|v| {
            let c = ids[v];
            cell_sizes[c as usize] += 1;
            c
        })
        .collect();
    Partition {
        feature,
        values,
        cell_of,
        cell_sizes,
    }
}

/// Push a raw-space distribution through a feature: each value receives
/// the total mass of its preimage cell.
pub fn pushforward(p: &[f64], partition: &Partition) -> Dist {
    assert_eq!(p.len(), partition.omega_len(), "pushforward length mismatch");
    let mut mass = vec![0.0; partition.num_cells()];
    for (i, &cell) in partition.cell_of.iter().enumerate() {
        mass[cell as usize] += p[i];
    }
    Dist::new_unchecked(partition.values.clone(), mass)
}

fn voice_list(window: Window) -> String {
    let names: Vec<&str> = window
        .voices()
        .iter()
        .map(|&v| VOICE_NAMES[v as usize - 1])
        .collect();
    match names.len() {
        1 => names[0].to_string(),
        2 => format!("{} and {}", names[0], names[1]),
        _ => {
            let head = names[..names.len() - 1].join(", ");
            format!("{} and {}", head, names[names.len() - 1])
        }
    }
}

/// Deterministic English rendering of a feature.
pub fn describe_feature(feature: Feature) -> String {
    let w = feature.window();
    let list = voice_list(w);
    match feature.kind() {
        DescriptorKind::Pitch => {
            if w.len() == 1 {
                format!("pitch of the {list}")
            } else {
                format!("joint pitches of the {list}")
            }
        }
        DescriptorKind::Pitch12 => {
            if w.len() == 1 {
                format!("pitch class of the {list}")
            } else {
                format!("pitch classes of the {list}")
            }
        }
        DescriptorKind::Interv => {
            if w.len() == 2 {
                let v = w.voices();
                format!(
                    "interval (semitone distance) between {} and {}",
                    VOICE_NAMES[v[0] as usize - 1],
                    VOICE_NAMES[v[1] as usize - 1]
                )
            } else {
                format!("intervals (semitone distances) between adjacent pairs of the {list}")
            }
        }
        DescriptorKind::Interv12 => {
            if w.len() == 2 {
                let v = w.voices();
                format!(
                    "interval class (semitone distance mod 12) between {} and {}",
                    VOICE_NAMES[v[0] as usize - 1],
                    VOICE_NAMES[v[1] as usize - 1]
                )
            } else {
                format!("interval classes (semitone distances mod 12) between adjacent pairs of the {list}")
            }
        }
        DescriptorKind::Order => {
            if w.len() == 2 {
                let v = w.voices();
                format!(
                    "relative ordering (above/equal/below) of {} vs {}",
                    VOICE_NAMES[v[0] as usize - 1],
                    VOICE_NAMES[v[1] as usize - 1]
                )
            } else {
                format!("relative orderings (above/equal/below) of adjacent pairs of the {list}")
            }
        }
    }
}

/// Interval-class display names, index 0..=11.
pub const INTERVAL_CLASS_NAMES: [&str; 12] = [
    "P1/P8", "m2", "M2", "m3", "M3", "P4", "TT", "P5", "m6", "M6", "m7", "M7",
];

/// Pitch-class display names, index 0..=11 (sharps).
pub const PITCH_CLASS_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

fn note_name(midi: i16) -> String {
    let pc = midi.rem_euclid(12) as usize;
    let octave = midi.div_euclid(12) - 1;
    format!("{}{}", PITCH_CLASS_NAMES[pc], octave)
}

/// Human-readable rendering of a feature value, given its feature for
/// voice-name context.
pub fn humanize_value(feature: Feature, value: &FeatureValue) -> String {
    match feature.kind() {
        DescriptorKind::Pitch => {
            let names: Vec<String> = value.components().iter().map(|&c| note_name(c)).collect();
            names.join(",")
        }
        DescriptorKind::Pitch12 => {
            let names: Vec<&str> = value
                .components()
                .iter()
                .map(|&c| PITCH_CLASS_NAMES[c.rem_euclid(12) as usize])
                .collect();
            names.join(",")
        }
        DescriptorKind::Interv => {
            let names: Vec<String> = value.components().iter().map(|&c| format!("{c:+}")).collect();
            names.join(",")
        }
        DescriptorKind::Interv12 => {
            let names: Vec<&str> = value
                .components()
                .iter()
                .map(|&c| INTERVAL_CLASS_NAMES[c.rem_euclid(12) as usize])
                .collect();
            names.join(",")
        }
        DescriptorKind::Order => {
            let window = feature.window();
            let voices = window.voices();
            let parts: Vec<String> = value
                .components()
                .iter()
                .enumerate()
                .map(|(i, &sign)| {
                    let rel = match sign {
                        1 => "above",
                        0 => "equal",
                        _ => "below",
                    };
                    format!(
                        "{} {} {}",
                        VOICE_NAMES[voices[i] as usize - 1],
                        rel,
                        VOICE_NAMES[voices[i + 1] as usize - 1]
                    )
                })
                .collect();
            parts.join(", ")
        }
    }
}

/// The 63 features with their partitions over a fixed raw alphabet,
/// in canonical order.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    features: Vec<Feature>,
    partitions: Vec<Partition>,
    positions: BTreeMap<Feature, usize>,
    raw_index: usize,
    omega_len: usize,
}

impl FeatureTable {
    pub fn build(omega: &OmegaSpace) -> FeatureTable {
        let features = enumerate_features();
        let partitions: Vec<Partition> = features
            .iter()
            .map(|&f| feature_partition(f, omega))
            .collect();
        let positions: BTreeMap<Feature, usize> =
            features.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        let raw_index = positions[&Feature::raw()];
        FeatureTable {
            features,
            partitions,
            positions,
            raw_index,
            omega_len: omega.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> Feature {
        self.features[index]
    }

    pub fn partition(&self, index: usize) -> &Partition {
        &self.partitions[index]
    }

    pub fn position(&self, feature: Feature) -> Option<usize> {
        self.positions.get(&feature).copied()
    }

    pub fn raw_index(&self) -> usize {
        self.raw_index
    }

    pub fn omega_len(&self) -> usize {
        self.omega_len
    }
}
