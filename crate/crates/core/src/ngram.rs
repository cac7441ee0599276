//! The bigram phase: the student evolves from the unigram model, the
//! teacher extracts transition rules that overwrite their unigram
//! counterparts, and the resulting book is diffed against the unigram
//! book to surface rules only visible in the comparison.

use std::collections::BTreeSet;

use crate::corpus::{sonority_stream, CorpusModel};
use crate::dist::{empirical_bigram_table, CondDist, Dist};
use crate::features::{Feature, FeatureTable, FeatureValue};
use crate::learning::{
    gap_bigram, induced_conditional, LoopConfig, LoopError, Trace, TracePhase,
};
use crate::student::{
    solve_student_bigram, solve_student_unigram, BigramStudent, Rule, RuleSet, RuleTarget,
    SolveOptions,
};
use crate::teacher::{select_rule_bigram, ScoredCandidate, TeacherError};

/// Outcome of a bigram run: the bigram-phase trace, the final student,
/// and the unigram-rule features the phase overwrote.
#[derive(Debug, Clone)]
pub struct BigramResult {
    pub trace: Trace,
    pub student: BigramStudent,
    pub overwritten: BTreeSet<Feature>,
}

/// Run the bigram loop as a continuation of a unigram trace on the same
/// corpus. The student starts as the unigram solution per observed
/// context and every re-solve projects (or rescales) that initialization
/// under the transition rules learned so far; a learned rule drops the
/// same feature's unigram rule from the retained set. Gaps are
/// empirical-context-weighted conditional KLs.
pub fn run_bigram_loop(
    corpus: &CorpusModel,
    unigram_trace: &Trace,
    cfg: &LoopConfig,
) -> Result<BigramResult, LoopError> {
    if unigram_trace.phase != TracePhase::Unigram {
        return Err(LoopError::ConfigMismatch(
            "bigram phase must continue a unigram trace".into(),
        ));
    }
    if unigram_trace.config.merge_repeats != cfg.merge_repeats {
        return Err(LoopError::ConfigMismatch(format!(
            "merge_repeats {} in the trace vs {} now",
            unigram_trace.config.merge_repeats, cfg.merge_repeats
        )));
    }

    let stream = sonority_stream(corpus, cfg.merge_repeats)?;
    let table = FeatureTable::build(&corpus.omega);
    let empirical = empirical_bigram_table(&stream.bigram, &table)?;

    // observed contexts (pair-first states) with their empirical weights
    let mut outgoing: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
    let mut total_pairs = 0u64;
    for (&(a, _), &count) in &stream.bigram {
        *outgoing.entry(a).or_insert(0) += count;
        total_pairs += count;
    }
    let contexts: Vec<u32> = outgoing.keys().copied().collect();
    let weights: Vec<f64> = outgoing
        .values()
        .map(|&c| c as f64 / total_pairs as f64)
        .collect();

    // rebuild the unigram student this phase continues from
    let unigram_opts = SolveOptions {
        objective: unigram_trace.config.objective,
        tol: unigram_trace.config.tol,
        max_sweeps: unigram_trace.config.max_sweeps,
    };
    let mut retained = RuleSet::new();
    for rule in &unigram_trace.rules {
        retained.push(rule.clone())?;
    }
    let init = solve_student_unigram(&table, &retained, unigram_opts)?;

    let opts = SolveOptions {
        objective: cfg.objective,
        tol: cfg.tol,
        max_sweeps: cfg.max_sweeps,
    };

    // iteration 0: the unigram solution replicated over every context
    let mut student = BigramStudent {
        contexts: contexts.clone(),
        weights: weights.clone(),
        rows: vec![init.p.clone(); contexts.len()],
        marginal: init.clone(),
        objective: opts.objective,
        stats: init.stats,
    };
    let mut converged = init.stats.converged;
    let mut max_residual = init.stats.residual;

    let footprint_row = |student: &BigramStudent| -> Vec<f64> {
        (0..table.len())
            .map(|i| {
                let induced = induced_conditional(student, table.partition(i));
                gap_bigram(&empirical[i], &induced)
            })
            .collect()
    };

    let mut footprints = vec![footprint_row(&student)];
    let mut gap_history = vec![footprints[0][table.raw_index()]];
    let mut scores: Vec<Vec<ScoredCandidate>> = Vec::new();
    let mut learned: BTreeSet<usize> = BTreeSet::new();
    let mut overwritten: BTreeSet<Feature> = BTreeSet::new();
    // per-context solves constrain the learned transition rules only: the
    // conditional empirical is always feasible for them, which is not
    // true once unconditional unigram targets are mixed in. The retained
    // unigram rules keep shaping the solution through the warm start.
    let mut active = RuleSet::new();

    while *gap_history.last().unwrap() >= cfg.epsilon && active.len() < cfg.max_iters {
        let induced: Vec<CondDist> = (0..table.len())
            .map(|i| induced_conditional(&student, table.partition(i)))
            .collect();
        let selection =
            match select_rule_bigram(&table, &empirical, &induced, &learned, cfg.alpha) {
                Ok(s) => s,
                Err(TeacherError::NoCandidates) => break,
            };
        learned.insert(selection.feature_index);
        if retained.remove_feature(selection.feature).is_some() {
            overwritten.insert(selection.feature);
        }
        active.push(Rule {
            feature: selection.feature,
            target: RuleTarget::Bigram(selection.target.clone()),
            learned_at: active.len() + 1,
        })?;

        student = solve_student_bigram(&table, &corpus.omega, &contexts, &weights, &active, &init, opts)?;
        converged &= student.stats.converged;
        max_residual = max_residual.max(student.stats.residual);

        scores.push(selection.candidates);
        let row = footprint_row(&student);
        gap_history.push(row[table.raw_index()]);
        footprints.push(row);
    }

    let trace = Trace {
        phase: TracePhase::Bigram,
        config: *cfg,
        features: table.features().to_vec(),
        rules: active.rules().to_vec(),
        gap_history,
        footprints,
        scores,
        converged,
        max_residual,
    };
    Ok(BigramResult {
        trace,
        student,
        overwritten,
    })
}

/// One flagged probability shift between a bigram rule row and its
/// unigram counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffEntry {
    pub feature: Feature,
    pub context: FeatureValue,
    pub value: FeatureValue,
    pub unigram_p: f64,
    pub bigram_p: f64,
    /// ln(bigram / unigram); -inf when the bigram mass vanishes.
    pub log_ratio: f64,
}

/// All flagged shifts, largest absolute difference first.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffReport {
    pub threshold: f64,
    pub entries: Vec<DiffEntry>,
}

/// Default absolute-difference threshold for the diff report.
pub const DIFF_THRESHOLD: f64 = 0.05;

/// Compare bigram rules against their unigram counterparts: for each
/// feature carrying a bigram rule, list every (context, value) whose
/// conditional probability moved more than `threshold` away from the
/// unigram marginal, sorted by magnitude descending.
pub fn diff_rulebooks(
    unigram: &[(Feature, Dist)],
    bigram: &[(Feature, CondDist)],
    threshold: f64,
) -> DiffReport {
    let mut entries = Vec::new();
    for (feature, cond) in bigram {
        let Some((_, marginal)) = unigram.iter().find(|(f, _)| f == feature) else {
            continue;
        };
        for (context, row) in cond.contexts().iter().zip(cond.rows()) {
            for (value, &bigram_p) in row.alphabet().iter().zip(row.mass()) {
                let unigram_p = marginal.mass_of(value);
                if (bigram_p - unigram_p).abs() > threshold {
                    let log_ratio = if bigram_p > 0.0 && unigram_p > 0.0 {
                        (bigram_p / unigram_p).ln()
                    } else if bigram_p == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    };
                    entries.push(DiffEntry {
                        feature: *feature,
                        context: *context,
                        value: *value,
                        unigram_p,
                        bigram_p,
                        log_ratio,
                    });
                }
            }
        }
    }
    entries.sort_by(|a, b| {
        let da = (a.bigram_p - a.unigram_p).abs();
        let db = (b.bigram_p - b.unigram_p).abs();
        db.total_cmp(&da)
            .then_with(|| a.feature.cmp(&b.feature))
            .then_with(|| a.context.cmp(&b.context))
            .then_with(|| a.value.cmp(&b.value))
    });
    DiffReport { threshold, entries }
}
