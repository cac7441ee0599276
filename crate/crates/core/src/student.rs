//! The student: a raw-space distribution maximizing entropy subject to
//! the learned rules.
//!
//! Each rule constrains the cell masses of the student under one
//! feature's partition to equal the rule's target distribution -- an
//! affine set. Two objectives are supported:
//!
//! - `tsallis2` (default): maximizing 1 - sum(p^2) over the feasible set
//!   is the Euclidean projection of the zero vector onto it, computed by
//!   Dykstra's alternating projections, cycling the affine sets in rule
//!   order and finishing each sweep on the simplex. Corrections are kept
//!   only for the simplex: projecting onto an affine set ignores any
//!   correction lying in its normal space, so affine corrections are
//!   exact no-ops.
//! - `shannon`: the maximum-Shannon-entropy point via iterative
//!   proportional scaling, cycling cell masses to their targets.
//!
//! Bigram students hold one such distribution per observed raw context.
//! Their solves start from the unigram solution: tsallis2 projects it
//! onto the updated constraint set, shannon scales it.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{OmegaSpace, Sonority};
use crate::dist::{CondDist, Dist};
use crate::features::{apply_feature, Feature, FeatureTable, Partition};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("infeasible constraint on {feature}: value {value} has mass {mass} but an empty preimage")]
    Infeasible {
        feature: String,
        value: String,
        mass: f64,
    },
    #[error("iterative scaling stalled on {feature}: value {value} needs mass {mass} but its cell is empty")]
    ScalingStall {
        feature: String,
        value: String,
        mass: f64,
    },
    #[error("rule features must be pairwise distinct, {0} repeats")]
    DuplicateRuleFeature(String),
    #[error("the raw feature cannot become a rule")]
    RawFeatureRule,
    #[error("bigram rule on {feature} has no row for context {context}")]
    MissingContextRow { feature: String, context: String },
    #[error("rule on {feature}: expected a {expected} target")]
    WrongTargetKind {
        feature: String,
        expected: &'static str,
    },
    #[error("feature {0} is not in the feature table")]
    UnknownFeature(String),
    #[error("sample length must be positive")]
    EmptySample,
}

/// Objective of the student optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Tsallis2,
    Shannon,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Tsallis2 => "tsallis2",
            Objective::Shannon => "shannon",
        }
    }

    pub fn from_name(name: &str) -> Option<Objective> {
        match name {
            "tsallis2" => Some(Objective::Tsallis2),
            "shannon" => Some(Objective::Shannon),
            _ => None,
        }
    }
}

/// A rule's target: a plain distribution for unigram rules, a transition
/// table for bigram rules.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleTarget {
    Unigram(Dist),
    Bigram(CondDist),
}

impl RuleTarget {
    /// Empirical entropy of the target: row entropy, weight-averaged for
    /// transition tables. Feeds the memorability metric.
    pub fn entropy(&self) -> f64 {
        match self {
            RuleTarget::Unigram(d) => d.entropy(),
            RuleTarget::Bigram(c) => c.weighted_entropy(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            RuleTarget::Unigram(_) => "unigram",
            RuleTarget::Bigram(_) => "bigram",
        }
    }
}

/// A learned rule: a feature paired with its empirical target.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub feature: Feature,
    pub target: RuleTarget,
    /// 1-based iteration at which the rule was learned.
    pub learned_at: usize,
}

/// An ordered set of rules with pairwise-distinct features, none of them
/// the raw feature.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new() -> RuleSet {
        RuleSet { rules: Vec::new() }
    }

    pub fn push(&mut self, rule: Rule) -> Result<(), SolveError> {
        if rule.feature.is_raw() {
            return Err(SolveError::RawFeatureRule);
        }
        if self.contains_feature(rule.feature) {
            return Err(SolveError::DuplicateRuleFeature(rule.feature.to_string()));
        }
        self.rules.push(rule);
        Ok(())
    }

    /// Drop the rule on `feature`, returning it when present.
    pub fn remove_feature(&mut self, feature: Feature) -> Option<Rule> {
        let pos = self.rules.iter().position(|r| r.feature == feature)?;
        Some(self.rules.remove(pos))
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn contains_feature(&self, feature: Feature) -> bool {
        self.rules.iter().any(|r| r.feature == feature)
    }
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub objective: Objective,
    /// Convergence threshold on the worst cell-mass violation.
    pub tol: f64,
    pub max_sweeps: u32,
}

impl Default for SolveOptions {
    fn default() -> SolveOptions {
        SolveOptions {
            objective: Objective::Tsallis2,
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// Final worst cell-mass violation across all constraints.
    pub residual: f64,
    pub sweeps: u32,
    pub converged: bool,
}

/// A solved unigram student: a distribution over the raw alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramStudent {
    pub p: Vec<f64>,
    pub objective: Objective,
    pub stats: SolveStats,
}

/// A solved bigram student: one distribution per observed raw context,
/// plus the unigram marginal used for openings and unseen contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct BigramStudent {
    /// Omega indices of observed contexts, ascending.
    pub contexts: Vec<u32>,
    /// Empirical context weights, aligned with `contexts`.
    pub weights: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub marginal: UnigramStudent,
    pub objective: Objective,
    /// Worst-case stats across the per-context solves.
    pub stats: SolveStats,
}

impl BigramStudent {
    pub fn row_for_context(&self, omega_index: u32) -> Option<&[f64]> {
        self.contexts
            .binary_search(&omega_index)
            .ok()
            .map(|i| self.rows[i].as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StudentModel {
    Unigram(UnigramStudent),
    Bigram(BigramStudent),
}

impl StudentModel {
    pub fn stats(&self) -> SolveStats {
        match self {
            StudentModel::Unigram(u) => u.stats,
            StudentModel::Bigram(b) => b.stats,
        }
    }
}

/// One cell-mass equality constraint: `cell_of` assigns each state to a
/// cell, `target` is the required mass per cell.
#[derive(Debug, Clone)]
pub struct MassConstraint {
    pub cell_of: Vec<u32>,
    pub target: Vec<f64>,
}

impl MassConstraint {
    pub fn num_cells(&self) -> usize {
        self.target.len()
    }
}

/// Align a rule target with its partition: mass per cell, in cell order.
/// Target values missing from the partition with positive mass make the
/// constraint infeasible.
fn align_target(partition: &Partition, target: &Dist) -> Result<Vec<f64>, SolveError> {
    let mut cell_target = vec![0.0; partition.num_cells()];
    for (value, &mass) in target.alphabet().iter().zip(target.mass()) {
        match partition.cell_index(value) {
            Some(cell) => cell_target[cell] = mass,
            None if mass > 1e-15 => {
                return Err(SolveError::Infeasible {
                    feature: partition.feature().to_string(),
                    value: value.label(),
                    mass,
                })
            }
            None => {}
        }
    }
    Ok(cell_target)
}

/// Euclidean projection onto the affine set "cell masses equal target":
/// every coordinate of a cell receives the same correction, the cell's
/// mass deficit split evenly.
pub fn project_onto_partition_constraint(
    p: &[f64],
    partition: &Partition,
    target: &Dist,
) -> Result<Vec<f64>, SolveError> {
    let cell_target = align_target(partition, target)?;
    let constraint = MassConstraint {
        cell_of: partition.cell_of().to_vec(),
        target: cell_target,
    };
    let mut out = p.to_vec();
    project_cells(&mut out, &constraint);
    Ok(out)
}

fn project_cells(p: &mut [f64], constraint: &MassConstraint) {
    let cells = constraint.num_cells();
    let mut mass = vec![0.0; cells];
    let mut size = vec![0u32; cells];
    for (i, &c) in constraint.cell_of.iter().enumerate() {
        mass[c as usize] += p[i];
        size[c as usize] += 1;
    }
    let correction: Vec<f64> = (0..cells)
        .map(|c| {
            if size[c] == 0 {
                0.0
            } else {
                (constraint.target[c] - mass[c]) / size[c] as f64
            }
        })
        .collect();
    for (i, &c) in constraint.cell_of.iter().enumerate() {
        p[i] += correction[c as usize];
    }
}

fn scale_cells(p: &mut [f64], constraint: &MassConstraint, label: &dyn Fn(usize) -> (String, String)) -> Result<(), SolveError> {
    let cells = constraint.num_cells();
    let mut mass = vec![0.0; cells];
    for (i, &c) in constraint.cell_of.iter().enumerate() {
        mass[c as usize] += p[i];
    }
    let mut factor = vec![0.0; cells];
    for c in 0..cells {
        let t = constraint.target[c];
        if t <= 0.0 {
            factor[c] = 0.0;
        } else if mass[c] <= 0.0 {
            let (feature, value) = label(c);
            return Err(SolveError::ScalingStall {
                feature,
                value,
                mass: t,
            });
        } else {
            factor[c] = t / mass[c];
        }
    }
    for (i, &c) in constraint.cell_of.iter().enumerate() {
        p[i] *= factor[c as usize];
    }
    Ok(())
}

fn max_violation(p: &[f64], constraints: &[MassConstraint]) -> f64 {
    let mut worst: f64 = 0.0;
    for constraint in constraints {
        let mut mass = vec![0.0; constraint.num_cells()];
        for (i, &c) in constraint.cell_of.iter().enumerate() {
            mass[c as usize] += p[i];
        }
        for (m, t) in mass.iter().zip(&constraint.target) {
            worst = worst.max((m - t).abs());
        }
    }
    worst
}

/// Euclidean projection onto the probability simplex via the sorted
/// threshold construction. Exact on already-feasible input.
pub fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    assert!(n > 0);
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &value) in sorted.iter().enumerate() {
        cumulative += value;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if value - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Check for infeasible cells before iterating: a positive target on an
/// empty cell can never be met.
fn check_nonempty_cells(constraints: &[MassConstraint], names: &[ConstraintNames]) -> Result<(), SolveError> {
    for (k, constraint) in constraints.iter().enumerate() {
        let mut size = vec![0u32; constraint.num_cells()];
        for &c in &constraint.cell_of {
            size[c as usize] += 1;
        }
        for (c, (&s, &t)) in size.iter().zip(&constraint.target).enumerate() {
            if s == 0 && t > 1e-15 {
                let (feature, values) = &names[k];
                return Err(SolveError::Infeasible {
                    feature: feature.clone(),
                    value: values.get(c).cloned().unwrap_or_else(|| c.to_string()),
                    mass: t,
                });
            }
        }
    }
    Ok(())
}

/// Solve the constrained problem over `n` states. `start` warm-starts the
/// iteration: tsallis2 projects the start point (the zero vector when
/// absent) onto the feasible set, shannon scales it (the uniform
/// distribution when absent).
pub fn solve_constrained(
    n: usize,
    constraints: &[MassConstraint],
    names: &[ConstraintNames],
    opts: SolveOptions,
    start: Option<&[f64]>,
) -> Result<UnigramStudent, SolveError> {
    assert!(n > 0, "cannot solve over an empty alphabet");
    check_nonempty_cells(constraints, names)?;

    if constraints.is_empty() {
        let p = match start {
            Some(s) => match opts.objective {
                Objective::Tsallis2 => project_onto_simplex(s),
                Objective::Shannon => s.to_vec(),
            },
            None => vec![1.0 / n as f64; n],
        };
        return Ok(UnigramStudent {
            p,
            objective: opts.objective,
            stats: SolveStats {
                residual: 0.0,
                sweeps: 0,
                converged: true,
            },
        });
    }

    match opts.objective {
        Objective::Tsallis2 => {
            let mut x: Vec<f64> = match start {
                Some(s) => s.to_vec(),
                None => vec![0.0; n],
            };
            let mut simplex_corr = vec![0.0; n];
            let mut sweeps = 0;
            let mut residual = f64::INFINITY;
            while sweeps < opts.max_sweeps {
                for constraint in constraints {
                    project_cells(&mut x, constraint);
                }
                // Dykstra correction for the (non-affine) simplex
                for (xi, ci) in x.iter_mut().zip(&simplex_corr) {
                    *xi += ci;
                }
                let projected = project_onto_simplex(&x);
                for ((ci, xi), pi) in simplex_corr.iter_mut().zip(&x).zip(&projected) {
                    *ci = xi - pi;
                }
                x = projected;
                sweeps += 1;
                residual = max_violation(&x, constraints);
                if residual < opts.tol {
                    break;
                }
            }
            Ok(UnigramStudent {
                p: x,
                objective: opts.objective,
                stats: SolveStats {
                    residual,
                    sweeps,
                    converged: residual < opts.tol,
                },
            })
        }
        Objective::Shannon => {
            let mut x: Vec<f64> = match start {
                Some(s) => s.to_vec(),
                None => vec![1.0 / n as f64; n],
            };
            let mut sweeps = 0;
            let mut residual = f64::INFINITY;
            while sweeps < opts.max_sweeps {
                for (k, constraint) in constraints.iter().enumerate() {
                    let label = |c: usize| {
                        let (feature, values) = &names[k];
                        (
                            feature.clone(),
                            values.get(c).cloned().unwrap_or_else(|| c.to_string()),
                        )
                    };
                    scale_cells(&mut x, constraint, &label)?;
                }
                sweeps += 1;
                residual = max_violation(&x, constraints);
                if residual < opts.tol {
                    break;
                }
            }
            Ok(UnigramStudent {
                p: x,
                objective: opts.objective,
                stats: SolveStats {
                    residual,
                    sweeps,
                    converged: residual < opts.tol,
                },
            })
        }
    }
}

/// A constraint's display context: the feature string plus its cell
/// value labels, for error reporting.
pub type ConstraintNames = (String, Vec<String>);

fn unigram_constraints(
    table: &FeatureTable,
    rules: &RuleSet,
) -> Result<(Vec<MassConstraint>, Vec<ConstraintNames>), SolveError> {
    let mut constraints = Vec::with_capacity(rules.len());
    let mut names = Vec::with_capacity(rules.len());
    for rule in rules.rules() {
        let index = table
            .position(rule.feature)
            .ok_or_else(|| SolveError::UnknownFeature(rule.feature.to_string()))?;
        let partition = table.partition(index);
        let dist = match &rule.target {
            RuleTarget::Unigram(d) => d,
            RuleTarget::Bigram(_) => {
                return Err(SolveError::WrongTargetKind {
                    feature: rule.feature.to_string(),
                    expected: "unigram",
                })
            }
        };
        constraints.push(MassConstraint {
            cell_of: partition.cell_of().to_vec(),
            target: align_target(partition, dist)?,
        });
        names.push((
            rule.feature.to_string(),
            partition.values().iter().map(|v| v.label()).collect(),
        ));
    }
    Ok((constraints, names))
}

/// Solve the unigram student for a rule set. An empty rule set yields the
/// uniform distribution.
pub fn solve_student_unigram(
    table: &FeatureTable,
    rules: &RuleSet,
    opts: SolveOptions,
) -> Result<UnigramStudent, SolveError> {
    let (constraints, names) = unigram_constraints(table, rules)?;
    solve_constrained(table.omega_len(), &constraints, &names, opts, None)
}

/// Solve the bigram student: independently per observed context, the
/// unigram-style problem whose constraints are the not-yet-overwritten
/// unigram rules plus, for each bigram rule, the conditional row selected
/// by the context's feature value. Rows start from the unigram solution.
pub fn solve_student_bigram(
    table: &FeatureTable,
    omega: &OmegaSpace,
    contexts: &[u32],
    weights: &[f64],
    rules: &RuleSet,
    init: &UnigramStudent,
    opts: SolveOptions,
) -> Result<BigramStudent, SolveError> {
    assert_eq!(contexts.len(), weights.len());
    let mut rows = Vec::with_capacity(contexts.len());
    let mut stats = SolveStats {
        residual: 0.0,
        sweeps: 0,
        converged: true,
    };
    for &ctx in contexts {
        let sonority = omega.sonority_at(ctx as usize);
        let mut constraints = Vec::with_capacity(rules.len());
        let mut names = Vec::with_capacity(rules.len());
        for rule in rules.rules() {
            let index = table
                .position(rule.feature)
                .ok_or_else(|| SolveError::UnknownFeature(rule.feature.to_string()))?;
            let partition = table.partition(index);
            let dist = match &rule.target {
                RuleTarget::Unigram(d) => d,
                RuleTarget::Bigram(cond) => {
                    let value = apply_feature(rule.feature, sonority);
                    cond.row_for(&value)
                        .ok_or_else(|| SolveError::MissingContextRow {
                            feature: rule.feature.to_string(),
                            context: value.label(),
                        })?
                }
            };
            constraints.push(MassConstraint {
                cell_of: partition.cell_of().to_vec(),
                target: align_target(partition, dist)?,
            });
            names.push((
                rule.feature.to_string(),
                partition.values().iter().map(|v| v.label()).collect(),
            ));
        }
        let solved = solve_constrained(table.omega_len(), &constraints, &names, opts, Some(&init.p))?;
        stats.residual = stats.residual.max(solved.stats.residual);
        stats.sweeps = stats.sweeps.max(solved.stats.sweeps);
        stats.converged &= solved.stats.converged;
        rows.push(solved.p);
    }
    Ok(BigramStudent {
        contexts: contexts.to_vec(),
        weights: weights.to_vec(),
        rows,
        marginal: init.clone(),
        objective: opts.objective,
        stats,
    })
}

fn draw(cdf: &[f64], r: f64) -> usize {
    let i = cdf.partition_point(|&c| c <= r);
    i.min(cdf.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect()
}

/// Draw a sonority sequence. Unigram models sample i.i.d.; bigram models
/// open with the unigram marginal and then follow per-context rows,
/// falling back to the marginal for unseen contexts. Deterministic for a
/// fixed seed.
pub fn sample_sequence(
    model: &StudentModel,
    omega: &OmegaSpace,
    length: usize,
    seed: u64,
) -> Result<Vec<Sonority>, SolveError> {
    if length == 0 {
        return Err(SolveError::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(length);
    match model {
        StudentModel::Unigram(u) => {
            let cdf = cumulative(&u.p);
            for _ in 0..length {
                let idx = draw(&cdf, rng.gen::<f64>());
                out.push(omega.sonority_at(idx));
            }
        }
        StudentModel::Bigram(b) => {
            let marginal_cdf = cumulative(&b.marginal.p);
            let mut row_cdfs: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            let mut prev = draw(&marginal_cdf, rng.gen::<f64>());
            out.push(omega.sonority_at(prev));
            for _ in 1..length {
                let cdf = match b.contexts.binary_search(&(prev as u32)) {
                    Ok(i) => row_cdfs
                        .entry(prev as u32)
                        .or_insert_with(|| cumulative(&b.rows[i])),
                    Err(_) => &marginal_cdf,
                };
                prev = draw(cdf, rng.gen::<f64>());
                out.push(omega.sonority_at(prev));
            }
        }
    }
    Ok(out)
}
