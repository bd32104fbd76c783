use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xnntab::experiment::{self, ExperimentConfig, MODELS};
use xnntab::interpret::render_explanation;
use xnntab::Error;

#[derive(Parser)]
#[command(name = "xnntab", version, about = "Interpretable MLPs for tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate over 5 stratified folds.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random-search trials for the LR and DT baselines.
        #[arg(long)]
        baseline_trials: Option<usize>,
    },
    /// Explain the rows of a CSV file with a merged model and its dictionary.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        row: PathBuf,
        /// Where to write the JSON explanations (default: stdout after the text).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the report bundles of a finished run.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 10)]
        explanations: usize,
    },
    /// Score a saved model on a labelled CSV file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Encode a dataset and write its folds.
    Preprocess {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn init_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("XNNTAB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("XNNTAB_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    init_threads()?;
    match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            out,
            baseline_trials,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(b) = baseline_trials {
                cfg.baseline_trials = b;
            }
            let m = experiment::cmd_run(&cfg)?;
            if let Some(agg) = &m.aggregate {
                println!("{:<8} {:>16} {:>16}", "model", "macro F1", "accuracy");
                for name in MODELS {
                    let f = agg.macro_f1[name];
                    let a = agg.accuracy[name];
                    println!(
                        "{name:<8} {:>9.4} ± {:.4} {:>9.4} ± {:.4}",
                        f.mean, f.std, a.mean, a.std
                    );
                }
                println!("active features per decision: avg {:.2}, max {}", agg.avg_active_features, agg.max_active_features);
                if let (Some(avg), Some(max)) = (agg.avg_rule_length, agg.max_rule_length) {
                    println!("rule length: avg {avg:.2}, max {max}");
                }
            }
            println!("manifest: {}", cfg.out.join("manifest.json").display());
        }
        Command::Explain {
            model,
            dict,
            row,
            out,
        } => {
            let ex = experiment::cmd_explain(&model, &dict, &row)?;
            for e in &ex {
                print!("{}", render_explanation(e));
            }
            let json = serde_json::to_string_pretty(&ex)?;
            match out {
                Some(p) => fs::write(p, json)?,
                None => println!("{json}"),
            }
        }
        Command::Report { run, explanations } => {
            for dir in experiment::cmd_report(&run, explanations)? {
                println!("{}", dir.display());
            }
        }
        Command::Evaluate {
            model,
            data,
            schema,
        } => {
            let e = experiment::cmd_evaluate(&model, &data, schema.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&e)?);
        }
        Command::Preprocess {
            data,
            schema,
            out,
            seed,
        } => {
            let folds = experiment::cmd_preprocess(&data, &schema, &out, seed)?;
            println!(
                "wrote {} ({} folds)",
                out.display(),
                folds.folds.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
