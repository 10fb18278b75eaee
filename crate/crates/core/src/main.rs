use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subcredit::dataset::io::{read_records_csv, write_records_csv, RECORDS_FILE};
use subcredit::dataset::{generate_synthetic, BondRecord};
use subcredit::embeddings::{read_embedding_file, write_embedding_file, EmbeddingTable, HashEmbedder, WithFallback};
use subcredit::evaluation::{emit_report, markdown_table, TableRow};
use subcredit::experiment::{
    attribute_run, evaluate_run, load_and_prepare, load_records, load_run, run_ablation, run_experiment, run_search,
    write_atomically, write_json, AttributionSettings, ExperimentConfig, ABLATION_FILE, SEARCH_FILE,
};
use subcredit::{Error, Result};

/// Default prediction for municipal bonds on extremely imbalanced data.
#[derive(Parser)]
#[command(name = "subcredit", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set model.learning_rate=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic record set into a data directory.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
        /// Replace an existing non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Write an EMB1 embedding table covering every record of a data directory.
    Embed {
        /// Data directory holding records.csv.
        #[arg(short, long)]
        data: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Vector width for hashed descriptions.
        #[arg(long, default_value_t = 32)]
        dim: usize,
        /// Hash seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start from an existing EMB1 file instead of hashing.
        #[arg(long)]
        from: Option<PathBuf>,
        /// With --from, hash descriptions missing from the file.
        #[arg(long)]
        fallback: bool,
    },
    /// Train and evaluate on an existing data directory.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        data: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Replace an existing non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Full pipeline: generate (or load) data, train, evaluate.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Replace an existing non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Cross-validated random search over the configured model family.
    Search {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        data: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Number of sampled configurations (default from config).
        #[arg(long)]
        trials: Option<usize>,
        /// Cross-validation folds (default from config).
        #[arg(long)]
        folds: Option<usize>,
        /// Replace an existing non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Re-score a saved run on a data directory.
    Evaluate {
        /// Run directory written by `train` or `run`.
        #[arg(short, long)]
        run: PathBuf,
        #[arg(short, long)]
        data: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Replace an existing non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Train with oversampling and embeddings toggled on and off.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        data: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Replace an existing non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Group Shapley attributions for a saved run's top-scored test rows.
    Attribute {
        #[arg(short, long)]
        run: PathBuf,
        #[arg(short, long)]
        data: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Number of top-scored test rows to explain.
        #[arg(long)]
        rows: Option<usize>,
        /// Permutations per row; 0 computes exact values.
        #[arg(long)]
        samples: Option<usize>,
        /// Replace an existing non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Merge run directories into a comparison table and PR-curve file.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Also draw the PR curves as SVG.
        #[arg(long)]
        svg: bool,
    },
}

fn records_for_run(run: &Path, data: Option<&Path>) -> Result<Vec<BondRecord>> {
    match data {
        Some(d) => read_records_csv(d.join(RECORDS_FILE)),
        None => load_records(&load_run(run)?.0),
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate { config, out, force } => {
            let cfg = config.load()?;
            let records = generate_synthetic(&cfg.generator_config())?;
            write_atomically(&out, force, |dir| {
                write_records_csv(dir.join(RECORDS_FILE), &records)?;
                let gen = toml::to_string(&cfg.generator_config()).map_err(|e| Error::config(e.to_string()))?;
                std::fs::write(dir.join("generator.toml"), gen).map_err(|e| Error::io(dir, e))
            })?;
            let positives = records.iter().filter(|r| r.defaulted).count();
            println!("{} records ({positives} defaults) -> {}", records.len(), out.display());
        }
        Command::Embed {
            data,
            out,
            dim,
            seed,
            from,
            fallback,
        } => {
            let records = read_records_csv(data.join(RECORDS_FILE))?;
            let keys = records.iter().map(|r| r.id.as_str());
            let table = match from {
                None => EmbeddingTable::from_source(&HashEmbedder::new(&records, dim, seed), keys)?,
                Some(path) => {
                    let file = read_embedding_file(&path)?;
                    if fallback {
                        let hash = HashEmbedder::new(&records, file.dim(), seed);
                        EmbeddingTable::from_source(
                            &WithFallback {
                                primary: &file,
                                fallback: &hash,
                            },
                            keys,
                        )?
                    } else {
                        EmbeddingTable::from_source(&file, keys)?
                    }
                }
            };
            write_embedding_file(&out, &table)?;
            println!("{} vectors of width {} -> {}", table.len(), table.dim(), out.display());
        }
        Command::Train {
            config,
            data,
            out,
            force,
        } => {
            let mut cfg = config.load()?;
            cfg.data_dir = Some(data);
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            print_run(&run_experiment(&cfg, force)?);
        }
        Command::Run { config, out, force } => {
            let mut cfg = config.load()?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            print_run(&run_experiment(&cfg, force)?);
        }
        Command::Search {
            config,
            data,
            out,
            trials,
            folds,
            force,
        } => {
            let mut cfg = config.load()?;
            if data.is_some() {
                cfg.data_dir = data;
            }
            if let Some(t) = trials {
                cfg.search.n_trials = t;
            }
            if let Some(k) = folds {
                cfg.split.k_folds = k;
            }
            let (_, prepared) = load_and_prepare(&cfg)?;
            let outcome = run_search(&cfg, &prepared, None)?;
            write_atomically(&out, force, |dir| {
                write_json(&dir.join(SEARCH_FILE), &outcome)?;
                let best = toml::to_string(&outcome.best.spec).map_err(|e| Error::config(e.to_string()))?;
                std::fs::write(dir.join("best_model.toml"), best).map_err(|e| Error::io(dir, e))
            })?;
            println!(
                "best trial {} of {}: mean AUC-PR {:.4}",
                outcome.best.index,
                outcome.trials.len(),
                outcome.best.mean_metric.unwrap_or(f64::NAN)
            );
        }
        Command::Evaluate { run, data, out, force } => {
            let records = records_for_run(&run, data.as_deref())?;
            let report = evaluate_run(&run, &records, &out, force)?;
            print_rows(&[TableRow::from_report("evaluation", &report)]);
        }
        Command::Ablate {
            config,
            data,
            out,
            force,
        } => {
            let mut cfg = config.load()?;
            if data.is_some() {
                cfg.data_dir = data;
            }
            let (_, prepared) = load_and_prepare(&cfg)?;
            let table = run_ablation(&cfg, &prepared)?;
            let rows: Vec<TableRow> = table
                .cells
                .iter()
                .map(|c| TableRow::from_report(c.report.description.clone(), &c.report))
                .collect();
            write_atomically(&out, force, |dir| {
                write_json(&dir.join(ABLATION_FILE), &table)?;
                std::fs::write(dir.join("ablation.md"), markdown_table(&rows)).map_err(|e| Error::io(dir, e))
            })?;
            print_rows(&rows);
            println!(
                "AUC-PR drop without SMOTE: {:.4}; without embeddings: {:.4}",
                table.smote_drop().unwrap_or(f64::NAN),
                table.embedding_drop().unwrap_or(f64::NAN)
            );
        }
        Command::Attribute {
            run,
            data,
            out,
            rows,
            samples,
            force,
        } => {
            let records = records_for_run(&run, data.as_deref())?;
            let (cfg, _) = load_run(&run)?;
            let settings = AttributionSettings {
                rows: rows.unwrap_or(cfg.attribution.rows),
                n_samples: samples.unwrap_or(cfg.attribution.n_samples),
                ..cfg.attribution
            };
            let attrs = attribute_run(&run, &records, Some(&settings), &out, force)?;
            println!("{} rows attributed -> {}", attrs.len(), out.display());
        }
        Command::Report { runs, out, svg } => {
            let rows = emit_report(&runs, &out, svg)?;
            print_rows(&rows);
        }
    }
    Ok(())
}

fn print_run(outcome: &subcredit::experiment::RunOutcome) {
    print_rows(&[
        TableRow::from_report(outcome.report.description.clone(), &outcome.report),
        TableRow::from_report("spread baseline", &outcome.baselines.spread),
        TableRow::from_report("rating baseline", &outcome.baselines.rating),
    ]);
    println!("run written to {}", outcome.dir.display());
}

fn print_rows(rows: &[TableRow]) {
    print!("{}", markdown_table(rows));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
