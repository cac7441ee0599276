//! The self-learning loop: starting from an empty rule set and a uniform
//! student, the teacher extracts one rule per iteration and the student
//! re-solves under the grown rule set. The trace records the ordered
//! rules, the raw-space gap history, and the full gap footprint of every
//! feature at every iteration, from which efficiency, memorability, and
//! rule entanglement are read off.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::corpus::{sonority_stream, CorpusModel, CorpusError};
use crate::dist::{
    empirical_unigram_table, CondDist, Dist, DistError,
};
use crate::features::{pushforward, Feature, FeatureTable, Partition};
use crate::student::{
    solve_student_unigram, BigramStudent, Objective, Rule, RuleSet, RuleTarget, SolveError,
    SolveOptions, StudentModel, UnigramStudent,
};
use crate::teacher::{select_rule, ScoredCandidate, TeacherError};

#[derive(Debug, Error)]
pub enum LoopError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error("trace and loop configs disagree: {0}")]
    ConfigMismatch(String),
}

/// Loop configuration. `epsilon` is the stopping threshold on the raw
/// gap; `tol`/`max_sweeps` go to the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub objective: Objective,
    pub tol: f64,
    pub max_sweeps: u32,
    pub merge_repeats: bool,
}

impl Default for LoopConfig {
    fn default() -> LoopConfig {
        LoopConfig {
            alpha: 0.5,
            epsilon: 0.005,
            max_iters: 20,
            objective: Objective::Tsallis2,
            tol: 1e-8,
            max_sweeps: 10_000,
            merge_repeats: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePhase {
    Unigram,
    Bigram,
}

impl TracePhase {
    pub fn name(self) -> &'static str {
        match self {
            TracePhase::Unigram => "unigram",
            TracePhase::Bigram => "bigram",
        }
    }
}

/// An ordered rule sequence with its gap bookkeeping. `footprints[j][i]`
/// is feature i's gap after iteration j (iteration 0 is the unconstrained
/// student); the raw feature's column equals `gap_history`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub phase: TracePhase,
    pub config: LoopConfig,
    /// Canonical feature order; column order of `footprints`.
    pub features: Vec<Feature>,
    pub rules: Vec<Rule>,
    pub gap_history: Vec<f64>,
    pub footprints: Vec<Vec<f64>>,
    /// Per-iteration candidate scores, in selection order.
    pub scores: Vec<Vec<ScoredCandidate>>,
    pub converged: bool,
    pub max_residual: f64,
}

impl Trace {
    /// Number of learned rules (the trace's k).
    pub fn iterations(&self) -> usize {
        self.rules.len()
    }

    pub fn final_gap(&self) -> f64 {
        *self.gap_history.last().expect("gap history never empty")
    }

    pub fn rule_entropies(&self) -> Vec<f64> {
        self.rules.iter().map(|r| r.target.entropy()).collect()
    }
}

/// Gap of a unigram student on one feature: D(empirical || pushforward).
pub fn gap_unigram(empirical: &Dist, student_p: &[f64], partition: &Partition) -> f64 {
    let pushed = pushforward(student_p, partition);
    empirical
        .kl_divergence(&pushed)
        .expect("partition alphabets always align")
}

/// The student's induced transition table on a feature: rows of the
/// per-context solutions pushed forward and mixed within each feature
/// context by empirical context weight.
pub fn induced_conditional(student: &BigramStudent, partition: &Partition) -> CondDist {
    let alphabet = partition.values().to_vec();
    // group raw contexts by their feature value
    let mut groups: Vec<(crate::features::FeatureValue, f64, Vec<f64>)> = Vec::new();
    for ((&ctx, &w), row) in student
        .contexts
        .iter()
        .zip(&student.weights)
        .zip(&student.rows)
    {
        let value = alphabet[partition.cell_of()[ctx as usize] as usize];
        let pushed = pushforward(row, partition);
        match groups.binary_search_by(|g| g.0.cmp(&value)) {
            Ok(i) => {
                groups[i].1 += w;
                for (acc, &m) in groups[i].2.iter_mut().zip(pushed.mass()) {
                    *acc += w * m;
                }
            }
            Err(i) => {
                let mass: Vec<f64> = pushed.mass().iter().map(|&m| w * m).collect();
                groups.insert(i, (value, w, mass));
            }
        }
    }
    let contexts: Vec<_> = groups.iter().map(|g| g.0).collect();
    let weights: Vec<f64> = groups.iter().map(|g| g.1).collect();
    let rows: Vec<Dist> = groups
        .iter()
        .map(|(_, w, mass)| {
            let normalized: Vec<f64> = mass.iter().map(|m| m / w).collect();
            Dist::new_unchecked(alphabet.clone(), normalized)
        })
        .collect();
    CondDist::new(contexts, weights, rows).expect("grouped contexts are sorted")
}

/// Gap of a bigram student on one feature: empirical-context-weighted
/// conditional KL against the induced transition table.
pub fn gap_bigram(empirical: &CondDist, induced: &CondDist) -> f64 {
    empirical
        .conditional_kl(induced)
        .expect("induced table covers every empirical context")
}

/// Gap of either student kind on one feature.
pub fn compute_gap(
    student: &StudentModel,
    empirical: &RuleTarget,
    partition: &Partition,
) -> f64 {
    match (student, empirical) {
        (StudentModel::Unigram(u), RuleTarget::Unigram(d)) => gap_unigram(d, &u.p, partition),
        (StudentModel::Bigram(b), RuleTarget::Bigram(c)) => {
            gap_bigram(c, &induced_conditional(b, partition))
        }
        _ => panic!("student kind and empirical target kind disagree"),
    }
}

/// A finished unigram run: the trace plus the final student.
#[derive(Debug, Clone)]
pub struct UnigramRun {
    pub trace: Trace,
    pub student: UnigramStudent,
}

/// Run the unigram self-learning loop. Stops when the raw gap drops
/// below epsilon, `max_iters` rules are learned, or candidates run out.
/// Deterministic in (corpus, cfg).
pub fn run_unigram_loop(corpus: &CorpusModel, cfg: &LoopConfig) -> Result<UnigramRun, LoopError> {
    let stream = sonority_stream(corpus, cfg.merge_repeats)?;
    let table = FeatureTable::build(&corpus.omega);
    let empirical = empirical_unigram_table(&stream.unigram, &table)?;

    let opts = SolveOptions {
        objective: cfg.objective,
        tol: cfg.tol,
        max_sweeps: cfg.max_sweeps,
    };

    let mut ruleset = RuleSet::new();
    let mut learned: BTreeSet<usize> = BTreeSet::new();
    let mut student = solve_student_unigram(&table, &ruleset, opts)?;
    let mut converged = student.stats.converged;
    let mut max_residual = student.stats.residual;

    let footprint_row = |student: &UnigramStudent| -> Vec<f64> {
        (0..table.len())
            .map(|i| gap_unigram(&empirical[i], &student.p, table.partition(i)))
            .collect()
    };

    let mut footprints = vec![footprint_row(&student)];
    let mut gap_history = vec![footprints[0][table.raw_index()]];
    let mut scores: Vec<Vec<ScoredCandidate>> = Vec::new();

    while *gap_history.last().unwrap() >= cfg.epsilon && ruleset.len() < cfg.max_iters {
        let selection = match select_rule(&table, &empirical, &student.p, &learned, cfg.alpha) {
            Ok(s) => s,
            Err(TeacherError::NoCandidates) => break,
        };
        learned.insert(selection.feature_index);
        ruleset.push(Rule {
            feature: selection.feature,
            target: RuleTarget::Unigram(selection.target.clone()),
            learned_at: ruleset.len() + 1,
        })?;
        student = solve_student_unigram(&table, &ruleset, opts)?;
        converged &= student.stats.converged;
        max_residual = max_residual.max(student.stats.residual);

        scores.push(selection.candidates);
        let row = footprint_row(&student);
        gap_history.push(row[table.raw_index()]);
        footprints.push(row);
    }

    let trace = Trace {
        phase: TracePhase::Unigram,
        config: *cfg,
        features: table.features().to_vec(),
        rules: ruleset.rules().to_vec(),
        gap_history,
        footprints,
        scores,
        converged,
        max_residual,
    };
    Ok(UnigramRun { trace, student })
}

/// First iteration index whose gap is below epsilon, None when no
/// iteration gets there (the infinite sentinel). `gap_history[0]` is the
/// unconstrained student, `gap_history[n]` the student after rule n.
pub fn efficiency_of(gap_history: &[f64], epsilon: f64) -> Option<usize> {
    gap_history.iter().position(|&g| g < epsilon)
}

/// First iteration of a trace whose raw gap is below epsilon.
pub fn efficiency(trace: &Trace, epsilon: f64) -> Option<usize> {
    efficiency_of(&trace.gap_history, epsilon)
}

/// Mean of the first N rule entropies with N = min(k, efficiency); all k
/// rules count when the trace never reaches epsilon. Zero when no rule
/// contributes.
pub fn memorability_of(gap_history: &[f64], rule_entropies: &[f64], epsilon: f64) -> f64 {
    let k = rule_entropies.len();
    let n = match efficiency_of(gap_history, epsilon) {
        Some(e) => e.min(k),
        None => k,
    };
    if n == 0 {
        return 0.0;
    }
    rule_entropies[..n].iter().sum::<f64>() / n as f64
}

/// Mean empirical entropy (nats) of a trace's first efficient rules.
pub fn memorability(trace: &Trace, epsilon: f64) -> f64 {
    memorability_of(&trace.gap_history, &trace.rule_entropies(), epsilon)
}

/// Entanglement classification of one learned rule.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementEntry {
    pub feature: Feature,
    /// The starred iteration: when the rule was learned.
    pub learned_at: usize,
    /// First post-initialization iteration (>= 1) at which the feature's
    /// gap sits below epsilon.
    pub first_below: Option<usize>,
    pub entangled: bool,
}

/// Classify every learned rule: ENTANGLED when its feature's gap closed
/// strictly before the rule was learned (implied by the earlier rules),
/// INDEPENDENT otherwise. The first rule is always independent.
pub fn entanglement_report(trace: &Trace, epsilon: f64) -> Vec<EntanglementEntry> {
    let position = |f: Feature| {
        trace
            .features
            .iter()
            .position(|&g| g == f)
            .expect("rule features come from the table")
    };
    trace
        .rules
        .iter()
        .map(|rule| {
            let column = position(rule.feature);
            let first_below = trace
                .footprints
                .iter()
                .enumerate()
                .skip(1)
                .find(|(_, row)| row[column] < epsilon)
                .map(|(j, _)| j);
            let entangled = first_below.is_some_and(|j| j < rule.learned_at);
            EntanglementEntry {
                feature: rule.feature,
                learned_at: rule.learned_at,
                first_below,
                entangled,
            }
        })
        .collect()
}
