//! musrover: discover compositional rules from four-voice corpora.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/validation error,
//! 3 solver non-convergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use musrover_core::corpus::{parse_corpus, CorpusModel, VOICE_NAMES};
use musrover_core::dist::empirical_unigram_table;
use musrover_core::features::{describe_feature, parse_feature, FeatureTable};
use musrover_core::learning::{
    efficiency, memorability, run_unigram_loop, LoopConfig, Trace,
};
use musrover_core::ngram::{diff_rulebooks, run_bigram_loop, DiffReport, DIFF_THRESHOLD};
use musrover_core::rulebook::{
    fingerprint, read_json, render_metrics, sequence_to_corpus_json, student_from_json,
    trace_from_json, write_artifacts, write_json, RuleBook, RunArtifact, StudentJson, TraceJson,
};
use musrover_core::student::{sample_sequence, Objective, StudentModel};

#[derive(Parser)]
#[command(name = "musrover", version, about = "Rule induction over four-voice symbolic music")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    max_iters: usize,
    #[arg(long, value_parser = parse_objective)]
    objective: Objective,
    #[arg(long)]
    merge_repeats: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a corpus, reporting its dimensions.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        /// Validate only; print nothing on success.
        #[arg(long)]
        validate_only: bool,
    },
    /// Write the full empirical rule book for a corpus.
    Rulebook {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the unigram rule-learning loop and write its artifacts.
    Trace(TraceArgs),
    /// Continue a unigram trace with bigram (transition) rules.
    Bigram {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        from_trace: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain a feature string such as interv12@1,4.
    Describe {
        #[arg(long)]
        feature: String,
    },
    /// Sample a sonority sequence from a saved student model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute efficiency, memorability, and entanglement for a trace.
    Report {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    Objective::from_name(s).ok_or_else(|| format!("expected tsallis2 or shannon, got {s:?}"))
}

enum CliError {
    Usage(String),
    Data(String),
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Solver(m) => m,
        }
    }
}

fn data_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn read_corpus(path: &Path) -> Result<(CorpusModel, String), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let model = parse_corpus(&text).map_err(data_err)?;
    Ok((model, fingerprint(text.as_bytes())))
}

fn check_convergence(traces: &[&Trace]) -> Result<(), CliError> {
    for trace in traces {
        if !trace.converged {
            return Err(CliError::Solver(format!(
                "solver did not converge (max residual {:.3e}); results written are not trustworthy",
                trace.max_residual
            )));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            corpus,
            validate_only,
        } => {
            let (model, digest) = read_corpus(&corpus)?;
            if !validate_only {
                println!(
                    "pieces: {}  columns: {}  raw alphabet: {} states  fingerprint: {}",
                    model.pieces.len(),
                    model.column_count,
                    model.omega.len(),
                    digest
                );
                for (v, name) in VOICE_NAMES.iter().enumerate() {
                    println!(
                        "  {}: midi {}..={}",
                        name,
                        model.omega.lo()[v],
                        model.omega.hi()[v]
                    );
                }
            }
            Ok(())
        }
        Command::Rulebook { corpus, out } => {
            let (model, digest) = read_corpus(&corpus)?;
            let table = FeatureTable::build(&model.omega);
            let stream =
                musrover_core::corpus::sonority_stream(&model, false).map_err(data_err)?;
            let empirical = empirical_unigram_table(&stream.unigram, &table).map_err(data_err)?;
            let book = RuleBook::build(digest, &table, &empirical, None, None, Vec::new());
            fs::create_dir_all(&out).map_err(data_err)?;
            let path = out.join("rulebook.json");
            write_json(&path, &book).map_err(data_err)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Trace(args) => {
            let (model, digest) = read_corpus(&args.corpus)?;
            let cfg = LoopConfig {
                alpha: args.alpha,
                epsilon: args.epsilon,
                max_iters: args.max_iters,
                objective: args.objective,
                merge_repeats: args.merge_repeats,
                ..LoopConfig::default()
            };
            let run = run_unigram_loop(&model, &cfg).map_err(data_err)?;
            let table = FeatureTable::build(&model.omega);
            let stream = musrover_core::corpus::sonority_stream(&model, cfg.merge_repeats)
                .map_err(data_err)?;
            let empirical = empirical_unigram_table(&stream.unigram, &table).map_err(data_err)?;
            let trace_file = format!("trace_{:?}.json", cfg.alpha);
            let book = RuleBook::build(
                digest,
                &table,
                &empirical,
                Some(&run.trace),
                None,
                vec![trace_file],
            );
            let student = StudentModel::Unigram(run.student.clone());
            let files = write_artifacts(
                &args.out,
                &book,
                &[RunArtifact {
                    trace: &run.trace,
                    student: &student,
                }],
                None,
                &model.omega,
            )
            .map_err(data_err)?;
            for f in &files {
                println!("wrote {}", f.display());
            }
            check_convergence(&[&run.trace])
        }
        Command::Bigram {
            corpus,
            from_trace,
            alpha,
            epsilon,
            max_iters,
            out,
        } => {
            let (model, digest) = read_corpus(&corpus)?;
            let trace_json: TraceJson = read_json(&from_trace).map_err(data_err)?;
            let unigram_trace = trace_from_json(&trace_json).map_err(data_err)?;
            let cfg = LoopConfig {
                alpha,
                epsilon,
                max_iters,
                objective: unigram_trace.config.objective,
                merge_repeats: unigram_trace.config.merge_repeats,
                ..LoopConfig::default()
            };
            let result = run_bigram_loop(&model, &unigram_trace, &cfg).map_err(data_err)?;

            let table = FeatureTable::build(&model.omega);
            let stream = musrover_core::corpus::sonority_stream(&model, cfg.merge_repeats)
                .map_err(data_err)?;
            let empirical = empirical_unigram_table(&stream.unigram, &table).map_err(data_err)?;
            let trace_file = format!("trace_bigram_{alpha:?}.json");
            let book = RuleBook::build(
                digest,
                &table,
                &empirical,
                Some(&unigram_trace),
                Some(&result),
                vec![trace_file],
            );
            let unigram_dists = book.unigram_dists().map_err(data_err)?;
            let bigram_dists = book.bigram_dists().map_err(data_err)?;
            let diff: DiffReport = diff_rulebooks(&unigram_dists, &bigram_dists, DIFF_THRESHOLD);
            let student = StudentModel::Bigram(result.student.clone());
            let files = write_artifacts(
                &out,
                &book,
                &[RunArtifact {
                    trace: &result.trace,
                    student: &student,
                }],
                Some(&diff),
                &model.omega,
            )
            .map_err(data_err)?;
            for f in &files {
                println!("wrote {}", f.display());
            }
            check_convergence(&[&result.trace])
        }
        Command::Describe { feature } => {
            let f = parse_feature(&feature).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{}", describe_feature(f));
            Ok(())
        }
        Command::Sample {
            model,
            length,
            seed,
            out,
        } => {
            let json: StudentJson = read_json(&model).map_err(data_err)?;
            let (student, omega) = student_from_json(&json).map_err(data_err)?;
            let columns = sample_sequence(&student, &omega, length, seed)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let id = format!("sample-{seed}");
            fs::write(&out, sequence_to_corpus_json(&id, &columns)).map_err(data_err)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Report { trace, epsilon } => {
            let json: TraceJson = read_json(&trace).map_err(data_err)?;
            let parsed = trace_from_json(&json).map_err(data_err)?;
            print!("{}", render_metrics(&parsed, epsilon));
            let eff = efficiency(&parsed, epsilon);
            let mem = memorability(&parsed, epsilon);
            let eff_text = eff
                .map(|e| e.to_string())
                .unwrap_or_else(|| "inf".to_string());
            println!(
                "summary: E={} M={:.4} nats ({:.4} bits)",
                eff_text,
                mem,
                mem / std::f64::consts::LN_2
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not usage errors
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
