//! Rule books and artifacts: JSON serialization of books, traces, and
//! students, the footprints CSV, the human-readable report, and rule
//! rendering. All emitted files are byte-stable for fixed inputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{OmegaSpace, Sonority};
use crate::dist::{CondDist, Dist};
use crate::features::{
    describe_feature, humanize_value, parse_feature, Feature, FeatureTable, FeatureValue,
};
use crate::learning::{
    efficiency, entanglement_report, memorability, LoopConfig, Trace, TracePhase,
};
use crate::ngram::{BigramResult, DiffReport};
use crate::student::{
    BigramStudent, Objective, Rule, RuleTarget, SolveStats, StudentModel, UnigramStudent,
};
use crate::teacher::ScoredCandidate;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad artifact content: {0}")]
    Content(String),
}

/// FNV-1a content hash, hex encoded. Fingerprints corpus bytes.
pub fn fingerprint(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x1_0000_0000_01b3);
    }
    format!("{hash:016x}")
}

// non-finite floats have no JSON encoding; gaps and KLs can only run to
// +inf, so None stands for +inf throughout the trace schema
fn pack_f64(x: f64) -> Option<f64> {
    if x.is_finite() {
        Some(x)
    } else {
        None
    }
}

fn unpack_f64(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::INFINITY)
}

// -- rule book -----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnigramEntry {
    pub feature: String,
    pub description: String,
    pub values: Vec<String>,
    pub mass: Vec<f64>,
    pub entropy_nats: f64,
    pub entropy_bits: f64,
    pub learned_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramEntry {
    pub feature: String,
    pub values: Vec<String>,
    pub contexts: Vec<String>,
    pub weights: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub learned_at: usize,
}

/// The complete rule book: all 63 empirical unigram rules plus any
/// learned bigram rules, tied to a corpus fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleBook {
    pub corpus_fingerprint: String,
    pub unigram: Vec<UnigramEntry>,
    pub bigram: Vec<BigramEntry>,
    pub trace_files: Vec<String>,
}

impl RuleBook {
    pub fn build(
        corpus_fingerprint: String,
        table: &FeatureTable,
        empirical: &[Dist],
        unigram_trace: Option<&Trace>,
        bigram: Option<&BigramResult>,
        trace_files: Vec<String>,
    ) -> RuleBook {
        assert_eq!(empirical.len(), table.len());
        let learned_at = |f: Feature| {
            unigram_trace.and_then(|t| {
                t.rules
                    .iter()
                    .find(|r| r.feature == f)
                    .map(|r| r.learned_at)
            })
        };
        let unigram = (0..table.len())
            .map(|i| {
                let feature = table.feature(i);
                let dist = &empirical[i];
                let entropy = dist.entropy();
                UnigramEntry {
                    feature: feature.to_string(),
                    description: describe_feature(feature),
                    values: dist.alphabet().iter().map(|v| v.label()).collect(),
                    mass: dist.mass().to_vec(),
                    entropy_nats: entropy,
                    entropy_bits: entropy / std::f64::consts::LN_2,
                    learned_at: learned_at(feature),
                }
            })
            .collect();
        let bigram_entries = bigram
            .map(|b| {
                b.trace
                    .rules
                    .iter()
                    .map(|rule| {
                        let RuleTarget::Bigram(cond) = &rule.target else {
                            panic!("bigram trace holds a unigram rule")
                        };
                        BigramEntry {
                            feature: rule.feature.to_string(),
                            values: cond.rows()[0]
                                .alphabet()
                                .iter()
                                .map(|v| v.label())
                                .collect(),
                            contexts: cond.contexts().iter().map(|v| v.label()).collect(),
                            weights: cond.weights().to_vec(),
                            rows: cond.rows().iter().map(|r| r.mass().to_vec()).collect(),
                            learned_at: rule.learned_at,
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();
        RuleBook {
            corpus_fingerprint,
            unigram,
            bigram: bigram_entries,
            trace_files,
        }
    }

    /// Typed view of the unigram section, for diffing.
    pub fn unigram_dists(&self) -> Result<Vec<(Feature, Dist)>, ArtifactError> {
        self.unigram
            .iter()
            .map(|e| {
                let feature = parse_feature(&e.feature)
                    .map_err(|err| ArtifactError::Content(err.to_string()))?;
                let values = parse_values(feature, &e.values)?;
                let dist = Dist::new(values, e.mass.clone())
                    .map_err(|err| ArtifactError::Content(err.to_string()))?;
                Ok((feature, dist))
            })
            .collect()
    }

    /// Typed view of the bigram section, for diffing.
    pub fn bigram_dists(&self) -> Result<Vec<(Feature, CondDist)>, ArtifactError> {
        self.bigram
            .iter()
            .map(|e| {
                let feature = parse_feature(&e.feature)
                    .map_err(|err| ArtifactError::Content(err.to_string()))?;
                let values = parse_values(feature, &e.values)?;
                let contexts = parse_values(feature, &e.contexts)?;
                let rows = e
                    .rows
                    .iter()
                    .map(|row| {
                        Dist::new(values.clone(), row.clone())
                            .map_err(|err| ArtifactError::Content(err.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let cond = CondDist::new(contexts, e.weights.clone(), rows)
                    .map_err(|err| ArtifactError::Content(err.to_string()))?;
                Ok((feature, cond))
            })
            .collect()
    }
}

fn parse_values(feature: Feature, labels: &[String]) -> Result<Vec<FeatureValue>, ArtifactError> {
    labels
        .iter()
        .map(|l| {
            FeatureValue::parse(feature.kind(), l)
                .map_err(|err| ArtifactError::Content(err.to_string()))
        })
        .collect()
}

// -- trace JSON ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreJson {
    pub feature: String,
    pub kl: Option<f64>,
    pub entropy: f64,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRuleJson {
    pub feature: String,
    pub kind: String,
    pub learned_at: usize,
    pub values: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contexts: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceJson {
    pub phase: String,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub objective: String,
    pub tol: f64,
    pub max_sweeps: u32,
    pub merge_repeats: bool,
    pub converged: bool,
    pub max_residual: f64,
    pub reached_epsilon: bool,
    /// First iteration below epsilon; null when never reached (infinite).
    pub efficiency: Option<usize>,
    pub memorability_nats: f64,
    pub memorability_bits: f64,
    pub features: Vec<String>,
    pub rules: Vec<TraceRuleJson>,
    /// Gap values; null encodes an infinite gap.
    pub gap_history: Vec<Option<f64>>,
    pub footprints: Vec<Vec<Option<f64>>>,
    pub scores: Vec<Vec<ScoreJson>>,
}

pub fn trace_to_json(trace: &Trace) -> TraceJson {
    let eff = efficiency(trace, trace.config.epsilon);
    let mem = memorability(trace, trace.config.epsilon);
    TraceJson {
        phase: trace.phase.name().to_string(),
        alpha: trace.config.alpha,
        epsilon: trace.config.epsilon,
        max_iters: trace.config.max_iters,
        objective: trace.config.objective.name().to_string(),
        tol: trace.config.tol,
        max_sweeps: trace.config.max_sweeps,
        merge_repeats: trace.config.merge_repeats,
        converged: trace.converged,
        max_residual: trace.max_residual,
        reached_epsilon: eff.is_some(),
        efficiency: eff,
        memorability_nats: mem,
        memorability_bits: mem / std::f64::consts::LN_2,
        features: trace.features.iter().map(|f| f.to_string()).collect(),
        rules: trace
            .rules
            .iter()
            .map(|rule| match &rule.target {
                RuleTarget::Unigram(d) => TraceRuleJson {
                    feature: rule.feature.to_string(),
                    kind: "unigram".into(),
                    learned_at: rule.learned_at,
                    values: d.alphabet().iter().map(|v| v.label()).collect(),
                    mass: Some(d.mass().to_vec()),
                    contexts: None,
                    weights: None,
                    rows: None,
                },
                RuleTarget::Bigram(c) => TraceRuleJson {
                    feature: rule.feature.to_string(),
                    kind: "bigram".into(),
                    learned_at: rule.learned_at,
                    values: c.rows()[0].alphabet().iter().map(|v| v.label()).collect(),
                    mass: None,
                    contexts: Some(c.contexts().iter().map(|v| v.label()).collect()),
                    weights: Some(c.weights().to_vec()),
                    rows: Some(c.rows().iter().map(|r| r.mass().to_vec()).collect()),
                },
            })
            .collect(),
        gap_history: trace.gap_history.iter().map(|&g| pack_f64(g)).collect(),
        footprints: trace
            .footprints
            .iter()
            .map(|row| row.iter().map(|&g| pack_f64(g)).collect())
            .collect(),
        scores: trace
            .scores
            .iter()
            .map(|round| {
                round
                    .iter()
                    .map(|c| ScoreJson {
                        feature: c.feature.to_string(),
                        kl: pack_f64(c.kl),
                        entropy: c.entropy,
                        score: pack_f64(c.score),
                    })
                    .collect()
            })
            .collect(),
    }
}

pub fn trace_from_json(json: &TraceJson) -> Result<Trace, ArtifactError> {
    let phase = match json.phase.as_str() {
        "unigram" => TracePhase::Unigram,
        "bigram" => TracePhase::Bigram,
        other => {
            return Err(ArtifactError::Content(format!(
                "unknown trace phase {other:?}"
            )))
        }
    };
    let objective = Objective::from_name(&json.objective)
        .ok_or_else(|| ArtifactError::Content(format!("unknown objective {:?}", json.objective)))?;
    let config = LoopConfig {
        alpha: json.alpha,
        epsilon: json.epsilon,
        max_iters: json.max_iters,
        objective,
        tol: json.tol,
        max_sweeps: json.max_sweeps,
        merge_repeats: json.merge_repeats,
    };
    let features = json
        .features
        .iter()
        .map(|s| parse_feature(s).map_err(|e| ArtifactError::Content(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let rules = json
        .rules
        .iter()
        .map(|r| {
            let feature =
                parse_feature(&r.feature).map_err(|e| ArtifactError::Content(e.to_string()))?;
            let values = parse_values(feature, &r.values)?;
            let target = match r.kind.as_str() {
                "unigram" => {
                    let mass = r.mass.clone().ok_or_else(|| {
                        ArtifactError::Content("unigram rule without mass".into())
                    })?;
                    RuleTarget::Unigram(
                        Dist::new(values, mass)
                            .map_err(|e| ArtifactError::Content(e.to_string()))?,
                    )
                }
                "bigram" => {
                    let contexts = parse_values(
                        feature,
                        r.contexts.as_deref().ok_or_else(|| {
                            ArtifactError::Content("bigram rule without contexts".into())
                        })?,
                    )?;
                    let weights = r.weights.clone().ok_or_else(|| {
                        ArtifactError::Content("bigram rule without weights".into())
                    })?;
                    let rows = r
                        .rows
                        .as_deref()
                        .ok_or_else(|| ArtifactError::Content("bigram rule without rows".into()))?
                        .iter()
                        .map(|row| {
                            Dist::new(values.clone(), row.clone())
                                .map_err(|e| ArtifactError::Content(e.to_string()))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    RuleTarget::Bigram(
                        CondDist::new(contexts, weights, rows)
                            .map_err(|e| ArtifactError::Content(e.to_string()))?,
                    )
                }
                other => {
                    return Err(ArtifactError::Content(format!(
                        "unknown rule kind {other:?}"
                    )))
                }
            };
            Ok(Rule {
                feature,
                target,
                learned_at: r.learned_at,
            })
        })
        .collect::<Result<Vec<_>, ArtifactError>>()?;
    let scores = json
        .scores
        .iter()
        .map(|round| {
            round
                .iter()
                .map(|s| {
                    let feature = parse_feature(&s.feature)
                        .map_err(|e| ArtifactError::Content(e.to_string()))?;
                    Ok(ScoredCandidate {
                        feature,
                        kl: unpack_f64(s.kl),
                        entropy: s.entropy,
                        score: unpack_f64(s.score),
                    })
                })
                .collect::<Result<Vec<_>, ArtifactError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trace {
        phase,
        config,
        features,
        rules,
        gap_history: json.gap_history.iter().map(|&g| unpack_f64(g)).collect(),
        footprints: json
            .footprints
            .iter()
            .map(|row| row.iter().map(|&g| unpack_f64(g)).collect())
            .collect(),
        scores,
        converged: json.converged,
        max_residual: json.max_residual,
    })
}

// -- student JSON --------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentJson {
    pub kind: String,
    pub objective: String,
    pub residual: f64,
    pub sweeps: u32,
    pub converged: bool,
    pub omega_lo: [u8; 4],
    pub omega_hi: [u8; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contexts: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal: Option<Vec<f64>>,
}

pub fn student_to_json(model: &StudentModel, omega: &OmegaSpace) -> StudentJson {
    match model {
        StudentModel::Unigram(u) => StudentJson {
            kind: "unigram".into(),
            objective: u.objective.name().into(),
            residual: u.stats.residual,
            sweeps: u.stats.sweeps,
            converged: u.stats.converged,
            omega_lo: omega.lo(),
            omega_hi: omega.hi(),
            mass: Some(u.p.clone()),
            contexts: None,
            weights: None,
            rows: None,
            marginal: None,
        },
        StudentModel::Bigram(b) => StudentJson {
            kind: "bigram".into(),
            objective: b.objective.name().into(),
            residual: b.stats.residual,
            sweeps: b.stats.sweeps,
            converged: b.stats.converged,
            omega_lo: omega.lo(),
            omega_hi: omega.hi(),
            mass: None,
            contexts: Some(
                b.contexts
                    .iter()
                    .map(|&c| omega.sonority_at(c as usize).label())
                    .collect(),
            ),
            weights: Some(b.weights.clone()),
            rows: Some(b.rows.clone()),
            marginal: Some(b.marginal.p.clone()),
        },
    }
}

fn parse_sonority(label: &str) -> Result<Sonority, ArtifactError> {
    let parts: Vec<&str> = label.split(',').collect();
    if parts.len() != 4 {
        return Err(ArtifactError::Content(format!(
            "sonority label {label:?} must hold 4 pitches"
        )));
    }
    let mut pitches = [0u8; 4];
    for (i, p) in parts.iter().enumerate() {
        pitches[i] = p
            .trim()
            .parse()
            .map_err(|_| ArtifactError::Content(format!("bad pitch in {label:?}")))?;
    }
    Ok(Sonority(pitches))
}

pub fn student_from_json(json: &StudentJson) -> Result<(StudentModel, OmegaSpace), ArtifactError> {
    let omega = OmegaSpace::new(json.omega_lo, json.omega_hi);
    let objective = Objective::from_name(&json.objective)
        .ok_or_else(|| ArtifactError::Content(format!("unknown objective {:?}", json.objective)))?;
    let stats = SolveStats {
        residual: json.residual,
        sweeps: json.sweeps,
        converged: json.converged,
    };
    match json.kind.as_str() {
        "unigram" => {
            let p = json
                .mass
                .clone()
                .ok_or_else(|| ArtifactError::Content("unigram student without mass".into()))?;
            if p.len() != omega.len() {
                return Err(ArtifactError::Content(format!(
                    "student mass has {} entries for an alphabet of {}",
                    p.len(),
                    omega.len()
                )));
            }
            Ok((
                StudentModel::Unigram(UnigramStudent {
                    p,
                    objective,
                    stats,
                }),
                omega,
            ))
        }
        "bigram" => {
            let context_labels = json
                .contexts
                .as_deref()
                .ok_or_else(|| ArtifactError::Content("bigram student without contexts".into()))?;
            let contexts = context_labels
                .iter()
                .map(|l| parse_sonority(l).map(|s| omega.index_of(s) as u32))
                .collect::<Result<Vec<_>, _>>()?;
            let weights = json
                .weights
                .clone()
                .ok_or_else(|| ArtifactError::Content("bigram student without weights".into()))?;
            let rows = json
                .rows
                .clone()
                .ok_or_else(|| ArtifactError::Content("bigram student without rows".into()))?;
            let marginal = json
                .marginal
                .clone()
                .ok_or_else(|| ArtifactError::Content("bigram student without marginal".into()))?;
            Ok((
                StudentModel::Bigram(BigramStudent {
                    contexts,
                    weights,
                    rows,
                    marginal: UnigramStudent {
                        p: marginal,
                        objective,
                        stats,
                    },
                    objective,
                    stats,
                }),
                omega,
            ))
        }
        other => Err(ArtifactError::Content(format!(
            "unknown student kind {other:?}"
        ))),
    }
}

// -- rendering -----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderStyle {
    Full,
    TopK(usize),
}

fn render_dist(feature: Feature, dist: &Dist, style: RenderStyle) -> String {
    let mut entries: Vec<(usize, f64)> = dist
        .mass()
        .iter()
        .enumerate()
        .map(|(i, &m)| (i, m))
        .filter(|&(_, m)| m > 0.0)
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if let RenderStyle::TopK(k) = style {
        entries.truncate(k);
    }
    let parts: Vec<String> = entries
        .iter()
        .map(|&(i, m)| format!("{} {:.2}", humanize_value(feature, &dist.alphabet()[i]), m))
        .collect();
    parts.join(", ")
}

/// Render one rule as a readable statement. A deterministic ordering rule
/// collapses to its plain-language reading.
pub fn render_rule(feature: Feature, target: &RuleTarget, style: RenderStyle) -> String {
    match target {
        RuleTarget::Unigram(dist) => {
            if feature.kind() == crate::features::DescriptorKind::Order {
                if let Some(i) = dist.mass().iter().position(|&m| (m - 1.0).abs() < 1e-12) {
                    return format!(
                        "{}: always (1.00)",
                        humanize_value(feature, &dist.alphabet()[i])
                    );
                }
            }
            format!(
                "{}: {}",
                describe_feature(feature),
                render_dist(feature, dist, style)
            )
        }
        RuleTarget::Bigram(cond) => {
            let mut lines = vec![format!("{} (transitions):", describe_feature(feature))];
            for (ctx, row) in cond.contexts().iter().zip(cond.rows()) {
                lines.push(format!(
                    "  after {}: {}",
                    humanize_value(feature, ctx),
                    render_dist(feature, row, style)
                ));
            }
            lines.join("\n")
        }
    }
}

// -- report and artifacts --------------------------------------------------

fn fmt_gap(g: f64) -> String {
    if g.is_finite() {
        format!("{g:.6}")
    } else {
        "inf".to_string()
    }
}

/// Efficiency / memorability / entanglement section for one trace at a
/// chosen epsilon.
pub fn render_metrics(trace: &Trace, epsilon: f64) -> String {
    let mut out = String::new();
    let eff = efficiency(trace, epsilon);
    let mem = memorability(trace, epsilon);
    out.push_str(&format!(
        "[{}] alpha={:?} epsilon={:?} objective={}\n",
        trace.phase.name(),
        trace.config.alpha,
        epsilon,
        trace.config.objective.name()
    ));
    out.push_str(&format!(
        "  rules learned: {}\n  gap: {} -> {}\n",
        trace.iterations(),
        fmt_gap(trace.gap_history[0]),
        fmt_gap(trace.final_gap())
    ));
    match eff {
        Some(e) => out.push_str(&format!("  efficiency E: {e}\n")),
        None => out.push_str("  efficiency E: inf (never below epsilon)\n"),
    }
    out.push_str(&format!(
        "  memorability M: {:.4} nats ({:.4} bits)\n",
        mem,
        mem / std::f64::consts::LN_2
    ));
    out.push_str(&format!(
        "  solver: {} (max residual {:.3e})\n",
        if trace.converged {
            "converged"
        } else {
            "NOT CONVERGED"
        },
        trace.max_residual
    ));
    if !trace.rules.is_empty() {
        out.push_str("  entanglement:\n");
        out.push_str("    k   feature          first_below  class\n");
        for entry in entanglement_report(trace, epsilon) {
            let below = entry
                .first_below
                .map(|j| j.to_string())
                .unwrap_or_else(|| "-".to_string());
            out.push_str(&format!(
                "    {:<3} {:<16} {:<12} {}\n",
                entry.learned_at,
                entry.feature.to_string(),
                below,
                if entry.entangled {
                    "ENTANGLED"
                } else {
                    "INDEPENDENT"
                }
            ));
        }
    }
    out
}

fn render_diff(diff: &DiffReport) -> String {
    let mut out = format!(
        "diff report (threshold {:?}): {} entries\n",
        diff.threshold,
        diff.entries.len()
    );
    for e in &diff.entries {
        let ratio = if e.log_ratio.is_finite() {
            format!("{:.3}", e.log_ratio)
        } else if e.log_ratio > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
        out.push_str(&format!(
            "  {} | after {}: {} unigram {:.3} bigram {:.3} (log-ratio {})\n",
            e.feature,
            humanize_value(e.feature, &e.context),
            humanize_value(e.feature, &e.value),
            e.unigram_p,
            e.bigram_p,
            ratio
        ));
    }
    out
}

/// One loop run to be written out.
pub struct RunArtifact<'a> {
    pub trace: &'a Trace,
    pub student: &'a StudentModel,
}

fn run_suffix(trace: &Trace) -> String {
    match trace.phase {
        TracePhase::Unigram => format!("{:?}", trace.config.alpha),
        TracePhase::Bigram => format!("bigram_{:?}", trace.config.alpha),
    }
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn fmt_csv_value(g: f64) -> String {
    if g.is_finite() {
        format!("{g}")
    } else {
        "inf".to_string()
    }
}

/// Footprints CSV: a header of feature strings, one row per iteration.
pub fn footprints_csv(trace: &Trace) -> String {
    let mut out = String::new();
    let header: Vec<String> = trace
        .features
        .iter()
        .map(|f| csv_quote(&f.to_string()))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &trace.footprints {
        let cells: Vec<String> = row.iter().map(|&g| fmt_csv_value(g)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    fs::write(path, text.as_bytes())?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Write the full artifact set: rulebook.json, per-run trace JSON,
/// footprints CSV and student JSON, and report.txt. Returns the paths
/// written. Byte-stable for fixed inputs.
pub fn write_artifacts(
    out_dir: &Path,
    book: &RuleBook,
    runs: &[RunArtifact],
    diff: Option<&DiffReport>,
    omega: &OmegaSpace,
) -> Result<Vec<PathBuf>, ArtifactError> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let book_path = out_dir.join("rulebook.json");
    write_json(&book_path, book)?;
    written.push(book_path);

    let mut report = String::from("rule learning report\n====================\n");
    for run in runs {
        let suffix = run_suffix(run.trace);

        let trace_path = out_dir.join(format!("trace_{suffix}.json"));
        write_json(&trace_path, &trace_to_json(run.trace))?;
        written.push(trace_path);

        let csv_path = out_dir.join(format!("footprints_{suffix}.csv"));
        write_text(&csv_path, &footprints_csv(run.trace))?;
        written.push(csv_path);

        let student_path = out_dir.join(format!("student_{suffix}.json"));
        write_json(&student_path, &student_to_json(run.student, omega))?;
        written.push(student_path);

        report.push('\n');
        report.push_str(&render_metrics(run.trace, run.trace.config.epsilon));
    }
    if let Some(diff) = diff {
        report.push('\n');
        report.push_str(&render_diff(diff));
    }
    let report_path = out_dir.join("report.txt");
    write_text(&report_path, &report)?;
    written.push(report_path);

    Ok(written)
}

/// Render a sampled sonority sequence as corpus JSON (one piece, every
/// column one tick), so samples can be re-ingested.
pub fn sequence_to_corpus_json(id: &str, columns: &[Sonority]) -> String {
    let voices: Vec<Vec<(u8, u32)>> = (0..4)
        .map(|v| columns.iter().map(|c| (c.0[v], 1u32)).collect())
        .collect();
    let piece = serde_json::json!({
        "pieces": [{
            "id": id,
            "voices": voices,
        }]
    });
    let mut text = serde_json::to_string_pretty(&piece).expect("static schema");
    text.push('\n');
    text
}
