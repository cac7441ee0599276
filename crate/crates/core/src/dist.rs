//! Distributions over feature values, empirical estimation from column
//! and pair counts, and the information measures (entropy, KL, weighted
//! conditional KL) the teacher and the gap metrics are built on.
//!
//! All entropies and divergences are in nats.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::features::{FeatureTable, FeatureValue, Partition};

/// Tolerance on total mass when validating a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("mass vector sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("negative mass {mass} at position {index}")]
    NegativeMass { index: usize, mass: f64 },
    #[error("alphabet and mass lengths differ ({alphabet} vs {mass})")]
    LengthMismatch { alphabet: usize, mass: usize },
    #[error("alphabet must be sorted and free of duplicates")]
    UnsortedAlphabet,
    #[error("alphabet mismatch between distributions")]
    AlphabetMismatch,
    #[error("counts are empty")]
    EmptyCounts,
    #[error("no adjacent pairs to estimate transitions from")]
    NoPairs,
    #[error("conditional rows disagree on shape")]
    ShapeMismatch,
    #[error("student distribution has no row for context {0}")]
    MissingContext(String),
}

/// A probability distribution over a sorted alphabet of feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    alphabet: Vec<FeatureValue>,
    mass: Vec<f64>,
}

impl Dist {
    /// Validate and build: alphabet sorted and duplicate-free, mass
    /// nonnegative and summing to 1 within [`MASS_TOLERANCE`].
    pub fn new(alphabet: Vec<FeatureValue>, mass: Vec<f64>) -> Result<Dist, DistError> {
        if alphabet.len() != mass.len() {
            return Err(DistError::LengthMismatch {
                alphabet: alphabet.len(),
                mass: mass.len(),
            });
        }
        if !alphabet.windows(2).all(|w| w[0] < w[1]) {
            return Err(DistError::UnsortedAlphabet);
        }
        for (index, &m) in mass.iter().enumerate() {
            if m < 0.0 || !m.is_finite() {
                return Err(DistError::NegativeMass { index, mass: m });
            }
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(DistError::NotNormalized { sum });
        }
        Ok(Dist { alphabet, mass })
    }

    /// Skip validation. For internal construction where the invariants
    /// hold by arithmetic.
    pub fn new_unchecked(alphabet: Vec<FeatureValue>, mass: Vec<f64>) -> Dist {
        debug_assert_eq!(alphabet.len(), mass.len());
        Dist { alphabet, mass }
    }

    pub fn uniform(alphabet: Vec<FeatureValue>) -> Dist {
        let n = alphabet.len();
        Dist::new_unchecked(alphabet, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(alphabet: Vec<FeatureValue>, at: usize) -> Dist {
        let mut mass = vec![0.0; alphabet.len()];
        mass[at] = 1.0;
        Dist::new_unchecked(alphabet, mass)
    }

    pub fn alphabet(&self) -> &[FeatureValue] {
        &self.alphabet
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Mass of a value, 0 when the value is not in the alphabet.
    pub fn mass_of(&self, value: &FeatureValue) -> f64 {
        match self.alphabet.binary_search(value) {
            Ok(i) => self.mass[i],
            Err(_) => 0.0,
        }
    }

    /// Shannon entropy in nats, with 0 log 0 = 0.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.mass)
    }

    /// KL divergence D(self || other) in nats, +inf when other lacks
    /// support somewhere self has mass. Alphabets must match exactly.
    pub fn kl_divergence(&self, other: &Dist) -> Result<f64, DistError> {
        if self.alphabet != other.alphabet {
            return Err(DistError::AlphabetMismatch);
        }
        Ok(kl_of(&self.mass, &other.mass))
    }
}

pub(crate) fn entropy_of(mass: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in mass {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

pub(crate) fn kl_of(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            d += pi * (pi / qi).ln();
        }
    }
    d.max(0.0)
}

/// A family of per-context distributions with empirical context weights.
/// Contexts are sorted feature values; all rows share one alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct CondDist {
    contexts: Vec<FeatureValue>,
    weights: Vec<f64>,
    rows: Vec<Dist>,
}

impl CondDist {
    pub fn new(
        contexts: Vec<FeatureValue>,
        weights: Vec<f64>,
        rows: Vec<Dist>,
    ) -> Result<CondDist, DistError> {
        if contexts.len() != weights.len() || contexts.len() != rows.len() {
            return Err(DistError::ShapeMismatch);
        }
        if !contexts.windows(2).all(|w| w[0] < w[1]) {
            return Err(DistError::UnsortedAlphabet);
        }
        for (index, &w) in weights.iter().enumerate() {
            if w < 0.0 || !w.is_finite() {
                return Err(DistError::NegativeMass { index, mass: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(DistError::NotNormalized { sum });
        }
        if let Some(first) = rows.first() {
            if !rows.iter().all(|r| r.alphabet() == first.alphabet()) {
                return Err(DistError::ShapeMismatch);
            }
        }
        Ok(CondDist {
            contexts,
            weights,
            rows,
        })
    }

    pub fn contexts(&self) -> &[FeatureValue] {
        &self.contexts
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rows(&self) -> &[Dist] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn row_for(&self, context: &FeatureValue) -> Option<&Dist> {
        self.contexts
            .binary_search(context)
            .ok()
            .map(|i| &self.rows[i])
    }

    /// Weight-averaged KL between rows: sum over self's contexts of
    /// weight(c) * D(self_c || student_c). The student must define a row
    /// for every context of self.
    pub fn conditional_kl(&self, student: &CondDist) -> Result<f64, DistError> {
        let mut total = 0.0;
        for ((ctx, &w), row) in self.contexts.iter().zip(&self.weights).zip(&self.rows) {
            let srow = student
                .row_for(ctx)
                .ok_or_else(|| DistError::MissingContext(ctx.label()))?;
            total += w * row.kl_divergence(srow)?;
        }
        Ok(total)
    }

    /// Weight-averaged row entropy in nats.
    pub fn weighted_entropy(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.rows)
            .map(|(&w, row)| w * row.entropy())
            .sum()
    }

    /// Mix rows by context weight. Chain rule: for an empirical
    /// transition table this is the distribution of pair-second elements.
    pub fn marginal(&self) -> Dist {
        let alphabet = self.rows[0].alphabet().to_vec();
        let mut mass = vec![0.0; alphabet.len()];
        for (&w, row) in self.weights.iter().zip(&self.rows) {
            for (m, &r) in mass.iter_mut().zip(row.mass()) {
                *m += w * r;
            }
        }
        Dist::new_unchecked(alphabet, mass)
    }
}

/// Empirical unigram distribution of a feature: cell totals of the raw
/// column counts, normalized. The alphabet is the feature's realizable
/// value set over omega; zero-mass values are retained. No smoothing.
pub fn empirical_unigram(counts: &[u64], partition: &Partition) -> Result<Dist, DistError> {
    assert_eq!(counts.len(), partition.omega_len(), "counts length mismatch");
    let mut cell_totals = vec![0u64; partition.num_cells()];
    let mut total = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            cell_totals[partition.cell_of()[i] as usize] += c;
            total += c;
        }
    }
    if total == 0 {
        return Err(DistError::EmptyCounts);
    }
    let mass = cell_totals
        .iter()
        .map(|&c| c as f64 / total as f64)
        .collect();
    Ok(Dist::new_unchecked(partition.values().to_vec(), mass))
}

/// Empirical transition table of a feature from adjacent-pair counts.
/// Contexts are the feature values with positive outgoing count; rows are
/// conditional frequencies over the full realizable alphabet; weights are
/// the context marginals.
pub fn empirical_bigram(
    pairs: &BTreeMap<(u32, u32), u64>,
    partition: &Partition,
) -> Result<CondDist, DistError> {
    if pairs.is_empty() {
        return Err(DistError::NoPairs);
    }
    let num_cells = partition.num_cells();
    let mut outgoing: BTreeMap<u32, u64> = BTreeMap::new();
    let mut transitions: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut total = 0u64;
    for (&(a, b), &count) in pairs {
        let ca = partition.cell_of()[a as usize];
        let cb = partition.cell_of()[b as usize];
        *outgoing.entry(ca).or_insert(0) += count;
        *transitions.entry((ca, cb)).or_insert(0) += count;
        total += count;
    }

    let contexts: Vec<FeatureValue> = outgoing
        .keys()
        .map(|&c| partition.values()[c as usize])
        .collect();
    let weights: Vec<f64> = outgoing.values().map(|&c| c as f64 / total as f64).collect();
    let alphabet = partition.values().to_vec();
    let rows: Vec<Dist> = outgoing
        .iter()
        .map(|(&ctx, &out)| {
            let mut mass = vec![0.0; num_cells];
            for (&(a, b), &count) in transitions.range((ctx, 0)..=(ctx, u32::MAX)) {
                debug_assert_eq!(a, ctx);
                mass[b as usize] = count as f64 / out as f64;
            }
            Dist::new_unchecked(alphabet.clone(), mass)
        })
        .collect();

    CondDist::new(contexts, weights, rows)
}

/// Empirical unigram distributions for every feature in the table.
pub fn empirical_unigram_table(counts: &[u64], table: &FeatureTable) -> Result<Vec<Dist>, DistError> {
    (0..table.len())
        .map(|i| empirical_unigram(counts, table.partition(i)))
        .collect()
}

/// Empirical transition tables for every feature in the table.
pub fn empirical_bigram_table(
    pairs: &BTreeMap<(u32, u32), u64>,
    table: &FeatureTable,
) -> Result<Vec<CondDist>, DistError> {
    (0..table.len())
        .map(|i| empirical_bigram(pairs, table.partition(i)))
        .collect()
}
