use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use csforge::corpus::Source;
use csforge::pipeline::steps::EmtStrategy;
use csforge::pipeline::{self, Format, PipelineConfig, RunOptions, StepOp};
use csforge::tcs::Direction;

/// Synthetic code-switched corpus generation, training and evaluation.
#[derive(Parser)]
#[command(name = "csforge", version)]
struct Cli {
    /// Seed for every random choice; runs are deterministic under it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report format for commands that print or write a report.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Text,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
            FormatArg::Text => Format::Text,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Real,
    Lex,
    Emt,
    Tcs,
    Mono,
}

impl From<SourceArg> for Source {
    fn from(s: SourceArg) -> Source {
        match s {
            SourceArg::Real => Source::Real,
            SourceArg::Lex => Source::Lex,
            SourceArg::Emt => Source::Emt,
            SourceArg::Tcs => Source::Tcs,
            SourceArg::Mono => Source::Mono,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Alignment,
    Translation,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    /// Hindi to code-switched.
    Src2tgt,
    /// Code-switched to Hindi.
    Tgt2src,
}

#[derive(Args)]
struct ReportOut {
    /// Write the report here instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Tag raw text (one sentence per line) or JSONL into a corpus.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SourceArg::Real)]
        source: SourceArg,
        /// Named entities to mask, one per line.
        #[arg(long)]
        ne: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded train/valid/test split.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, num_args = 3, value_names = ["TRAIN", "VALID", "TEST"], default_values_t = [0.8, 0.1, 0.1])]
        fractions: Vec<f64>,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        valid: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Lexicon-substitution code-switching.
    LexGen {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        /// Per-token switch probability.
        #[arg(long, conflicts_with = "reference")]
        p: Option<f64>,
        /// Calibrate the switch probability from this code-switched corpus.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        variants: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write source/variant pairs as parallel JSONL.
        #[arg(long)]
        pairs_out: Option<PathBuf>,
    },
    /// Clause-substitution code-switching from constituency parses.
    EmtGen {
        #[arg(long)]
        corpus: PathBuf,
        /// Bracketed trees, in corpus order.
        #[arg(long)]
        parses: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Parallel Hindi sentences (alignment strategy).
        #[arg(long)]
        hi: Option<PathBuf>,
        /// Pharaoh alignments, one line per sentence (alignment strategy).
        #[arg(long)]
        align: Option<PathBuf>,
        /// Span translations as JSONL `{id, spans: [{lo, hi, text}]}` (translation strategy).
        #[arg(long)]
        translations: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        max_switches: usize,
        #[arg(long, default_value_t = 1)]
        variants: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mixing statistics: M-Index, I-Index, NE fraction, histograms.
    Metrics {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        ne: Option<PathBuf>,
        #[command(flatten)]
        report: ReportOut,
        /// Write length and English-span histograms as two-column CSV.
        #[arg(long)]
        hist_csv: Option<PathBuf>,
    },
    /// Corpus BLEU of candidates against one or more reference files.
    Bleu {
        #[arg(long)]
        cand: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        refs: Vec<PathBuf>,
        #[command(flatten)]
        report: ReportOut,
    },
    /// Mean sentence BLEU of sampled sentences against the rest of the corpus.
    SelfBleu {
        #[arg(long)]
        corpus: PathBuf,
        /// Sentences to score; 0 scores all of them.
        #[arg(long, default_value_t = 1000)]
        sample: usize,
        #[command(flatten)]
        report: ReportOut,
    },
    /// Gzip diversity (S1, S2, D).
    Diversity {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        report: ReportOut,
    },
    /// Train a Kneser-Ney n-gram LM (a plumbing comparator, not a neural LM).
    LmTrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.75)]
        discount: f64,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perplexity of an n-gram LM (plumbing comparator) on a corpus.
    LmPpl {
        #[arg(long)]
        lm: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        report: ReportOut,
    },
    /// Run a training curriculum; writes per-stage checkpoints and a log under --out.
    TcsTrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model preset (`desk` or `paper`), overriding the config.
        #[arg(long)]
        preset: Option<String>,
        /// Replace a corpus path from the config, as NAME=PATH.
        #[arg(long = "corpus", value_parser = parse_binding)]
        corpora: Vec<(String, PathBuf)>,
        #[arg(long)]
        w_dae: Option<f64>,
        #[arg(long)]
        w_bt: Option<f64>,
        #[arg(long)]
        w_ce: Option<f64>,
    },
    /// Translate a corpus with a checkpoint.
    TcsTranslate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = DirectionArg::Src2tgt)]
        direction: DirectionArg,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Run a pipeline config, or replay a run manifest and verify its outputs.
    Pipeline {
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Output directory (default: the config's `out_dir`, or the manifest's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_binding(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.to_string(), PathBuf::from(v))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest { .. } => "ingest",
        Command::Split { .. } => "split",
        Command::LexGen { .. } => "lex-gen",
        Command::EmtGen { .. } => "emt-gen",
        Command::Metrics { .. } => "metrics",
        Command::Bleu { .. } => "bleu",
        Command::SelfBleu { .. } => "self-bleu",
        Command::Diversity { .. } => "diversity",
        Command::LmTrain { .. } => "lm-train",
        Command::LmPpl { .. } => "lm-ppl",
        Command::TcsTrain { .. } => "tcs-train",
        Command::TcsTranslate { .. } => "tcs-translate",
        Command::Pipeline { .. } => "pipeline",
    }
}

fn to_op(c: Command, format: Format) -> StepOp {
    match c {
        Command::Ingest { input, source, ne, out } => StepOp::Ingest {
            input,
            out,
            source: source.into(),
            ne,
        },
        Command::Split {
            corpus,
            fractions,
            train,
            valid,
            test,
        } => StepOp::Split {
            corpus,
            fractions: [fractions[0], fractions[1], fractions[2]],
            train,
            valid,
            test,
        },
        Command::LexGen {
            corpus,
            lexicon,
            p,
            reference,
            variants,
            out,
            pairs_out,
        } => StepOp::LexGen {
            corpus,
            lexicon,
            p,
            reference,
            variants,
            out,
            pairs_out,
        },
        Command::EmtGen {
            corpus,
            parses,
            strategy,
            hi,
            align,
            translations,
            max_switches,
            variants,
            out,
        } => StepOp::EmtGen {
            corpus,
            parses,
            strategy: match strategy {
                StrategyArg::Alignment => EmtStrategy::Alignment,
                StrategyArg::Translation => EmtStrategy::Translation,
            },
            hi,
            align,
            translations,
            max_switches,
            variants,
            out,
        },
        Command::Metrics {
            corpus,
            ne,
            report,
            hist_csv,
        } => StepOp::Metrics {
            corpus,
            ne,
            out: report.out,
            hist_csv,
            format,
        },
        Command::Bleu { cand, refs, report } => StepOp::Bleu {
            cand,
            refs,
            out: report.out,
            format,
        },
        Command::SelfBleu { corpus, sample, report } => StepOp::SelfBleu {
            corpus,
            sample,
            out: report.out,
            format,
        },
        Command::Diversity { corpus, report } => StepOp::Diversity {
            corpus,
            out: report.out,
            format,
        },
        Command::LmTrain {
            corpus,
            order,
            discount,
            min_count,
            out,
        } => StepOp::LmTrain {
            corpus,
            order,
            discount,
            min_count,
            out,
        },
        Command::LmPpl { lm, corpus, report } => StepOp::LmPpl {
            lm,
            corpus,
            out: report.out,
            format,
        },
        Command::TcsTrain {
            config,
            out,
            preset,
            corpora,
            w_dae,
            w_bt,
            w_ce,
        } => StepOp::TcsTrain {
            config,
            out,
            preset,
            corpora: corpora.into_iter().collect::<BTreeMap<_, _>>(),
            w_dae,
            w_bt,
            w_ce,
        },
        Command::TcsTranslate {
            ckpt,
            corpus,
            out,
            direction,
            max_len,
        } => StepOp::TcsTranslate {
            ckpt,
            corpus,
            out,
            direction: match direction {
                DirectionArg::Src2tgt => Direction::Src2Tgt,
                DirectionArg::Tgt2src => Direction::Tgt2Src,
            },
            max_len,
        },
        Command::Pipeline { .. } => unreachable!("pipeline is not a single operation"),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("CSFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("CSFORGE_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run_pipeline(config: Option<PathBuf>, manifest: Option<PathBuf>, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let report = match (config, manifest) {
        (Some(config), None) => {
            let cfg = PipelineConfig::read(&config)?;
            let mut opts = RunOptions::for_config(&cfg, &config);
            if let Some(o) = out {
                opts.out_dir = o;
            }
            if let Some(s) = seed {
                opts.seed = s;
            }
            pipeline::run_pipeline(&cfg, &opts)?
        }
        (None, Some(manifest)) => {
            if seed.is_some() {
                bail!("--seed cannot be combined with --manifest; the recorded seed is used");
            }
            let out = out.unwrap_or_else(|| manifest.parent().map(PathBuf::from).unwrap_or_default());
            let r = pipeline::replay(&manifest, &out)?;
            eprintln!("replay reproduced every recorded output");
            r
        }
        _ => bail!("give exactly one of --config and --manifest"),
    };
    for (step, text) in &report.reports {
        println!("[{step}]");
        print!("{text}");
    }
    eprintln!("manifest: {}", report.manifest_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let format: Format = cli.format.into();
    match cli.command {
        Command::Pipeline { config, manifest, out } => run_pipeline(config, manifest, out, cli.seed),
        command => {
            let out = to_op(command, format).execute(cli.seed.unwrap_or(0))?;
            if let Some(r) = out.report {
                print!("{r}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Errors that embed their source already show it; print each message once.
            let mut msg = String::new();
            for cause in e.chain() {
                let text = cause.to_string();
                if !msg.contains(&text) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&text);
                }
            }
            eprintln!("csforge {name}: {msg}");
            ExitCode::FAILURE
        }
    }
}
