//! The teacher: scores every unlearned feature against the current
//! student and picks the next rule.
//!
//! The score is a convex trade-off between discriminativeness and
//! regularity: s = alpha * KL(empirical || student) - (1 - alpha) *
//! H(empirical). At alpha = 1 the teacher chases the largest gap; near
//! alpha = 0 it prefers near-deterministic features.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::dist::{CondDist, Dist};
use crate::features::{pushforward, Feature, FeatureTable};

#[derive(Debug, Error)]
pub enum TeacherError {
    #[error("no candidate features remain")]
    NoCandidates,
}

/// One scored candidate, surfaced in traces for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub feature: Feature,
    pub kl: f64,
    pub entropy: f64,
    pub score: f64,
}

/// Combine KL and entropy into a score. An infinite KL dominates for any
/// positive alpha; at alpha = 0 the KL term is ignored outright (no
/// 0 * inf).
fn combine(kl: f64, entropy: f64, alpha: f64) -> f64 {
    if kl.is_finite() {
        alpha * kl - (1.0 - alpha) * entropy
    } else if alpha > 0.0 {
        f64::INFINITY
    } else {
        -entropy
    }
}

/// Score one feature. `phat` is the empirical distribution, `pstud` the
/// student's pushforward onto the same alphabet (asserted). A student
/// missing support on an observed value scores +inf for any positive
/// alpha: the teacher flags it as the most discriminating gap.
pub fn score_feature(phat: &Dist, pstud: &Dist, alpha: f64) -> f64 {
    assert_eq!(
        phat.alphabet(),
        pstud.alphabet(),
        "score_feature alphabets differ"
    );
    let kl = phat
        .kl_divergence(pstud)
        .expect("aligned alphabets cannot mismatch");
    combine(kl, phat.entropy(), alpha)
}

fn score_parts_cond(phat: &CondDist, pstud: &CondDist, alpha: f64) -> (f64, f64, f64) {
    let kl = phat
        .conditional_kl(pstud)
        .expect("student must cover every empirical context");
    let entropy = phat.weighted_entropy();
    (kl, entropy, combine(kl, entropy, alpha))
}

/// The teacher's pick plus the full scored candidate list.
#[derive(Debug, Clone)]
pub struct Selection {
    pub feature_index: usize,
    pub feature: Feature,
    pub target: Dist,
    pub candidates: Vec<ScoredCandidate>,
}

/// Pick the unlearned feature (never the raw feature) maximizing the
/// score against the current student. Ties break toward the earlier
/// feature in canonical order.
pub fn select_rule(
    table: &FeatureTable,
    empirical: &[Dist],
    student_p: &[f64],
    learned: &BTreeSet<usize>,
    alpha: f64,
) -> Result<Selection, TeacherError> {
    let mut best: Option<(usize, f64)> = None;
    let mut candidates = Vec::new();
    for (index, phat) in empirical.iter().enumerate() {
        if index == table.raw_index() || learned.contains(&index) {
            continue;
        }
        let pstud = pushforward(student_p, table.partition(index));
        let kl = phat
            .kl_divergence(&pstud)
            .expect("partition alphabets always align");
        let entropy = phat.entropy();
        let score = combine(kl, entropy, alpha);
        candidates.push(ScoredCandidate {
            feature: table.feature(index),
            kl,
            entropy,
            score,
        });
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((index, score));
        }
    }
    let (feature_index, _) = best.ok_or(TeacherError::NoCandidates)?;
    Ok(Selection {
        feature_index,
        feature: table.feature(feature_index),
        target: empirical[feature_index].clone(),
        candidates,
    })
}

/// The bigram-phase pick: conditional KL against the student's induced
/// transition tables, weight-averaged row entropies, same tie-break.
/// Candidates are the features not yet overwritten in this phase.
#[derive(Debug, Clone)]
pub struct BigramSelection {
    pub feature_index: usize,
    pub feature: Feature,
    pub target: CondDist,
    pub candidates: Vec<ScoredCandidate>,
}

pub fn select_rule_bigram(
    table: &FeatureTable,
    empirical: &[CondDist],
    induced: &[CondDist],
    learned: &BTreeSet<usize>,
    alpha: f64,
) -> Result<BigramSelection, TeacherError> {
    let mut best: Option<(usize, f64)> = None;
    let mut candidates = Vec::new();
    for index in 0..table.len() {
        if index == table.raw_index() || learned.contains(&index) {
            continue;
        }
        let (kl, entropy, score) = score_parts_cond(&empirical[index], &induced[index], alpha);
        candidates.push(ScoredCandidate {
            feature: table.feature(index),
            kl,
            entropy,
            score,
        });
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((index, score));
        }
    }
    let (feature_index, _) = best.ok_or(TeacherError::NoCandidates)?;
    Ok(BigramSelection {
        feature_index,
        feature: table.feature(feature_index),
        target: empirical[feature_index].clone(),
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, sonority_stream, OmegaSpace};
    use crate::dist::empirical_unigram_table;
    use crate::features::{parse_feature, DescriptorKind, FeatureValue};
    use proptest::prelude::*;

    fn alphabet(n: usize) -> Vec<FeatureValue> {
        (0..n)
            .map(|i| FeatureValue::new(DescriptorKind::Interv12, &[i as i16]))
            .collect()
    }

    #[test]
    fn alpha_one_is_pure_kl() {
        let a = alphabet(3);
        let phat = Dist::new(a.clone(), vec![0.6, 0.3, 0.1]).unwrap();
        let pstud = Dist::new(a, vec![0.2, 0.3, 0.5]).unwrap();
        let want = phat.kl_divergence(&pstud).unwrap();
        assert!((score_feature(&phat, &pstud, 1.0) - want).abs() < 1e-15);
    }

    #[test]
    fn alpha_zero_peaks_at_deterministic() {
        let a = alphabet(2);
        let point = Dist::point_mass(a.clone(), 0);
        let pstud = Dist::uniform(a.clone());
        assert_eq!(score_feature(&point, &pstud, 0.0), 0.0);
        let spread = Dist::new(a, vec![0.5, 0.5]).unwrap();
        assert!(score_feature(&spread, &pstud, 0.0) < 0.0);
    }

    #[test]
    fn score_frozen_example() {
        let a = alphabet(2);
        let phat = Dist::new(a.clone(), vec![0.5, 0.5]).unwrap();
        let pstud = Dist::new(a, vec![0.9, 0.1]).unwrap();
        let s = score_feature(&phat, &pstud, 0.5);
        assert!((s - (-0.0912)).abs() < 1e-4, "score {s}");
    }

    fn uniform_student(omega: &OmegaSpace) -> Vec<f64> {
        vec![1.0 / omega.len() as f64; omega.len()]
    }

    #[test]
    fn unique_positive_kl_candidate_selected() {
        // bass pitch is the lone non-uniform signal against singleton
        // ranges in the other voices
        let input = r#"{"pieces":[{"id":"a","voices":[
            [[60,4]],[[55,4]],[[52,4]],
            [[48,3],[50,1]]]}]}"#;
        let model = parse_corpus(input).unwrap();
        let table = FeatureTable::build(&model.omega);
        let stream = sonority_stream(&model, false).unwrap();
        let empirical = empirical_unigram_table(&stream.unigram, &table).unwrap();
        let student = uniform_student(&model.omega);
        let selection = select_rule(&table, &empirical, &student, &BTreeSet::new(), 1.0).unwrap();
        // every candidate with positive KL must involve the bass; the
        // earliest maximal one is pitch@4's window family -- check the
        // winner actually has the max score recomputed by hand
        let max = selection
            .candidates
            .iter()
            .map(|c| c.score)
            .fold(f64::NEG_INFINITY, f64::max);
        let winner = selection
            .candidates
            .iter()
            .find(|c| c.feature == selection.feature)
            .unwrap();
        assert_eq!(winner.score, max);
        assert!(winner.kl > 0.0);
        assert!(selection.feature.window().voices().contains(&4));
    }

    #[test]
    fn tie_breaks_to_earlier_feature() {
        // constant corpus with singleton omega except two bass pitches,
        // alpha = 0: every candidate scores -H(empirical); deterministic
        // features tie at 0 and the earliest in canonical order wins
        let input = r#"{"pieces":[{"id":"a","voices":[
            [[60,2]],[[55,2]],[[52,2]],
            [[48,1],[50,1]]]}]}"#;
        let model = parse_corpus(input).unwrap();
        let table = FeatureTable::build(&model.omega);
        let stream = sonority_stream(&model, false).unwrap();
        let empirical = empirical_unigram_table(&stream.unigram, &table).unwrap();
        let student = uniform_student(&model.omega);
        let selection = select_rule(&table, &empirical, &student, &BTreeSet::new(), 0.0).unwrap();
        // candidates scoring 0 are exactly the deterministic features;
        // pitch@1 is the first such in canonical order
        assert_eq!(selection.feature, parse_feature("pitch@1").unwrap());
        let zero_scores = selection
            .candidates
            .iter()
            .filter(|c| c.score == 0.0)
            .count();
        assert!(zero_scores > 1, "expected an actual tie");
    }

    #[test]
    fn never_selects_raw_or_learned() {
        let input = r#"{"pieces":[{"id":"a","voices":[
            [[60,1],[62,1]],[[55,2]],[[52,2]],[[48,2]]]}]}"#;
        let model = parse_corpus(input).unwrap();
        let table = FeatureTable::build(&model.omega);
        let stream = sonority_stream(&model, false).unwrap();
        let empirical = empirical_unigram_table(&stream.unigram, &table).unwrap();
        let student = uniform_student(&model.omega);

        let mut learned = BTreeSet::new();
        for _ in 0..10 {
            let selection =
                select_rule(&table, &empirical, &student, &learned, 0.7).unwrap();
            assert!(!selection.feature.is_raw());
            assert!(!learned.contains(&selection.feature_index));
            learned.insert(selection.feature_index);
        }
    }

    #[test]
    fn exhausted_candidates_error() {
        let input = r#"{"pieces":[{"id":"a","voices":[
            [[60,1]],[[55,1]],[[52,1]],[[48,1]]]}]}"#;
        let model = parse_corpus(input).unwrap();
        let table = FeatureTable::build(&model.omega);
        let stream = sonority_stream(&model, false).unwrap();
        let empirical = empirical_unigram_table(&stream.unigram, &table).unwrap();
        let student = uniform_student(&model.omega);
        let learned: BTreeSet<usize> =
            (0..table.len()).filter(|&i| i != table.raw_index()).collect();
        assert!(matches!(
            select_rule(&table, &empirical, &student, &learned, 1.0),
            Err(TeacherError::NoCandidates)
        ));
    }

    fn arb_simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-3f64..1.0, n).prop_map(|raw| {
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
    }

    proptest! {
        #[test]
        fn score_monotone_in_alpha(
            p in arb_simplex(4),
            q in arb_simplex(4),
            a1 in 0.0f64..=1.0,
            a2 in 0.0f64..=1.0,
        ) {
            let al = alphabet(4);
            let phat = Dist::new_unchecked(al.clone(), p);
            let pstud = Dist::new_unchecked(al, q);
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let s_lo = score_feature(&phat, &pstud, lo);
            let s_hi = score_feature(&phat, &pstud, hi);
            // d/d alpha = KL + H >= 0
            prop_assert!(s_hi >= s_lo - 1e-12);
        }
    }
}
