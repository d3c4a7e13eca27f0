use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use caml_core::casem::{
    average_embedding, embed_sentence, evaluate_pairs, run_casem_with, segment_sentence, CasemConfig, Corpus,
    PcaRemoval, ReembeddingModel, Segment,
};
use caml_core::data::{load_mnist, read_embedding_file, read_pairs_file, read_sentences, SentencePairSet};
use caml_core::experiments::bsfe_task::{run_bag_task, BagTaskConfig};
use caml_core::experiments::mnist::{train_mnist, ConvKind, MnistConfig};
use caml_core::experiments::rnn_bench::{bench, CellKind, RnnBenchConfig};
use caml_core::experiments::surface::{fit_surface, SurfaceConfig};
use caml_core::experiments::{write_pgm, MetricsLog};

/// Context-aware embedding and layer experiments.
#[derive(Debug, Parser)]
#[command(name = "caml", version)]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunConfig {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 16)]
    batch_size: usize,
    /// Defaults to 0.1, or 0.01 for the convolutional models.
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    em_steps: u64,
    #[arg(long, global = true)]
    max_steps: Option<u64>,
    #[arg(long, global = true, default_value_t = 8)]
    kernel: usize,
    #[arg(long, global = true, default_value_t = 16)]
    depth: usize,
    #[arg(long, global = true, default_value_t = 1)]
    layers: usize,
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
}

impl RunConfig {
    fn learning_rate(&self, default: f64) -> Result<f64> {
        let lr = self.learning_rate.unwrap_or(default);
        if !(lr > 0.0 && lr.is_finite()) {
            bail!("learning rate must be positive, got {lr}");
        }
        Ok(lr)
    }

    fn batch(&self) -> Result<usize> {
        if self.batch_size == 0 {
            bail!("batch size must be at least 1");
        }
        Ok(self.batch_size)
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating {}", self.output_dir.display()))?;
        Ok(self.output_dir.join(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CorpusFormat {
    /// One sentence per line.
    Lines,
    /// `score<TAB>sentence<TAB>sentence`; both sides are used.
    Pairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CellArg {
    Lstm,
    Gru,
    Carnn,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Cnn,
    Cacnn,
    Cares,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Re-embed a word-vector table against a corpus.
    CasemTrain {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "lines")]
        format: CorpusFormat,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
    },
    /// Pearson×100 of a re-embedding model on scored sentence pairs.
    CasemEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        /// Original vectors; enables the averaging and PCA-removal columns.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Recurrent cells on the four-sentence sentiment task.
    BenchRnn {
        #[arg(long, value_enum, default_value = "all")]
        cell: CellArg,
        #[arg(long, default_value_t = 10)]
        runs: u64,
    },
    /// Regress `x·exp(−x² − y²)` from a 1% grid sample.
    FitSurface,
    /// Digit classification with a single convolutional layer.
    TrainMnist {
        #[arg(long, value_enum, default_value = "cacnn")]
        model: ModelArg,
        /// Directory holding the IDX files.
        #[arg(long, env = "CAML_DATA_DIR", default_value = "data/mnist-subset")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        eval_every: u64,
        /// σ-maps written as PGM images.
        #[arg(long, default_value_t = 10)]
        dump_maps: usize,
    },
    /// Bag-of-features sentiment task under the alternating schedule.
    BenchBsfe,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let rc = &cli.run;
    match cli.command {
        Command::CasemTrain {
            embeddings,
            corpus,
            format,
            max_iters,
        } => casem_train(rc, &embeddings, &corpus, format, max_iters),
        Command::CasemEval {
            model,
            pairs,
            embeddings,
        } => casem_eval(rc, &model, &pairs, embeddings.as_deref()),
        Command::BenchRnn { cell, runs } => bench_rnn(rc, cell, runs),
        Command::FitSurface => surface(rc),
        Command::TrainMnist {
            model,
            data_dir,
            eval_every,
            dump_maps,
        } => mnist(rc, model, &data_dir, eval_every, dump_maps),
        Command::BenchBsfe => bsfe(rc),
    }
}

fn save_metrics(rc: &RunConfig, name: &str, log: &MetricsLog) -> Result<PathBuf> {
    let path = rc.out(name)?;
    log.save(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn casem_train(rc: &RunConfig, emb_path: &Path, corpus_path: &Path, format: CorpusFormat, max_iters: usize) -> Result<()> {
    let emb = read_embedding_file(emb_path).with_context(|| format!("reading {}", emb_path.display()))?;
    let raw = match format {
        CorpusFormat::Lines => {
            let f = File::open(corpus_path).with_context(|| format!("opening {}", corpus_path.display()))?;
            read_sentences(BufReader::new(f))?
        }
        CorpusFormat::Pairs => read_pairs_file(corpus_path)
            .with_context(|| format!("reading {}", corpus_path.display()))?
            .sentences(),
    };
    let corpus = Corpus::segmented(&emb, &raw);
    info!("{} sentences, {} distinct segments", corpus.sentences.len(), corpus.word_counts.len());
    let cfg = CasemConfig {
        max_iters,
        seed: rc.seed,
        ..CasemConfig::default()
    };
    let model = run_casem_with(&corpus, &emb, &cfg)?;

    let tokens = corpus.total_tokens().max(1) as f64;
    let mut log = MetricsLog::new();
    for (i, e) in model.energy_trace.iter().enumerate() {
        log.push(i as u64, "avg_loss", e / tokens);
    }
    let csv = save_metrics(rc, "casem_energy.csv", &log)?;
    let model_path = rc.out("casem.model")?;
    model.save_file(&model_path)?;
    println!(
        "iterations {}  energy {:.6} -> {:.6}  model {}  trace {}",
        model.energy_trace.len() - 1,
        model.energy_trace[0] / tokens,
        model.energy_trace.last().copied().unwrap_or(f64::NAN) / tokens,
        model_path.display(),
        csv.display()
    );
    Ok(())
}

fn segmented(model: &ReembeddingModel, set: &SentencePairSet) -> SentencePairSet {
    let seg = |s: &[String]| segment_sentence(model, s).into_iter().map(Segment::into_text).collect();
    SentencePairSet {
        records: set
            .records
            .iter()
            .map(|r| caml_core::data::SentencePair {
                score: r.score,
                a: seg(&r.a),
                b: seg(&r.b),
            })
            .collect(),
        skipped: set.skipped,
    }
}

fn casem_eval(rc: &RunConfig, model_path: &Path, pairs_path: &Path, emb_path: Option<&Path>) -> Result<()> {
    let model = ReembeddingModel::load_file(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let raw = read_pairs_file(pairs_path).with_context(|| format!("reading {}", pairs_path.display()))?;
    let pairs = segmented(&model, &raw);
    let scores = evaluate_pairs(&pairs, |s| Some(embed_sentence(s, &model).vector))?;
    let mut log = MetricsLog::new();
    log.push(0, "casem_pearson100", scores.pearson100);
    println!("method      pearson×100");
    println!("casem       {:>10.2}", scores.pearson100);
    if let Some(path) = emb_path {
        let emb = read_embedding_file(path).with_context(|| format!("reading {}", path.display()))?;
        let avg = evaluate_pairs(&raw, |s| average_embedding(s, &emb))?;
        let pca = PcaRemoval::fit(&raw.sentences(), &emb, 100, rc.seed)?;
        let pca_scores = evaluate_pairs(&raw, |s| pca.embed(s, &emb))?;
        println!("pca-removal {:>10.2}", pca_scores.pearson100);
        println!("average     {:>10.2}", avg.pearson100);
        log.push(0, "pca_pearson100", pca_scores.pearson100);
        log.push(0, "average_pearson100", avg.pearson100);
    }
    if scores.undefined > 0 {
        println!("{} pairs without a usable embedding scored as 0", scores.undefined);
    }
    save_metrics(rc, "casem_eval.csv", &log)?;
    Ok(())
}

fn bench_rnn(rc: &RunConfig, cell: CellArg, runs: u64) -> Result<()> {
    let cells: Vec<CellKind> = match cell {
        CellArg::Lstm => vec![CellKind::Lstm],
        CellArg::Gru => vec![CellKind::Gru],
        CellArg::Carnn => vec![CellKind::CaRnn],
        CellArg::All => CellKind::ALL.to_vec(),
    };
    let cfg = RnnBenchConfig {
        iterations: rc.max_steps.unwrap_or(100),
        learning_rate: rc.learning_rate(0.1)?,
        runs,
        seed: rc.seed,
        ..RnnBenchConfig::default()
    };
    println!("cell    mean |p − y|  misclassified");
    for kind in cells {
        let r = bench(kind, &cfg)?;
        save_metrics(rc, &format!("rnn_{kind}.csv"), &r.metrics())?;
        println!("{:<7} {:>12.4} {:>14.3}", kind.to_string(), r.mean_error, r.mean_misclassified);
    }
    Ok(())
}

fn surface(rc: &RunConfig) -> Result<()> {
    let cfg = SurfaceConfig {
        layers: rc.layers,
        steps: rc.max_steps.unwrap_or(1000),
        learning_rate: rc.learning_rate(0.1)?,
        seed: rc.seed,
        ..SurfaceConfig::default()
    };
    let r = fit_surface(&cfg)?;
    save_metrics(rc, &format!("surface_l{}.csv", cfg.layers), &r.metrics)?;
    let grid_path = rc.out(&format!("surface_l{}_grid.csv", cfg.layers))?;
    let mut w = BufWriter::new(File::create(&grid_path)?);
    writeln!(w, "x,y,z,prediction")?;
    for (x, y, z, p) in &r.grid {
        writeln!(w, "{x:?},{y:?},{z:?},{p:?}")?;
    }
    w.flush()?;
    println!(
        "layers {}  train {} / test {}  test mse {:.6}  test mae {:.6}  grid {}",
        cfg.layers,
        r.train_points,
        r.test_points,
        r.test_mse,
        r.test_mae,
        grid_path.display()
    );
    Ok(())
}

fn mnist(rc: &RunConfig, model: ModelArg, data_dir: &Path, eval_every: u64, dump_maps: usize) -> Result<()> {
    let kind = match model {
        ModelArg::Cnn => ConvKind::Cnn,
        ModelArg::Cacnn => ConvKind::Cacnn,
        ModelArg::Cares => ConvKind::Cares,
    };
    let train = load_mnist(data_dir, "train").with_context(|| format!("loading training digits from {}", data_dir.display()))?;
    let test = load_mnist(data_dir, "t10k").with_context(|| format!("loading test digits from {}", data_dir.display()))?;
    let cfg = MnistConfig {
        kind,
        kernel: rc.kernel,
        depth: rc.depth,
        steps: rc.max_steps.unwrap_or(10_000),
        batch_size: rc.batch()?,
        learning_rate: rc.learning_rate(0.01)?,
        eval_every,
        cares_layers: rc.layers.max(1),
        seed: rc.seed,
        ..MnistConfig::default()
    };
    let r = train_mnist(&cfg, &train, &test, 100, dump_maps)?;
    save_metrics(rc, &format!("mnist_{kind}.csv"), &r.metrics)?;
    let (h, w) = r.map_shape;
    for (i, map) in r.sigma_maps.iter().enumerate() {
        let path = rc.out(&format!("sigma_{kind}_{i:03}.pgm"))?;
        write_pgm(&mut BufWriter::new(File::create(&path)?), w, h, map)?;
    }
    print!("{kind}  steps {}  accuracy {:.4}", cfg.steps, r.final_accuracy);
    match r.sigma_gap {
        Some(g) => println!("  ink-background σ gap {g:.3}"),
        None => println!(),
    }
    Ok(())
}

fn bsfe(rc: &RunConfig) -> Result<()> {
    let cfg = BagTaskConfig {
        steps: rc.max_steps.unwrap_or(2000),
        batch_size: rc.batch()?,
        learning_rate: rc.learning_rate(0.1)?,
        em_steps: rc.em_steps,
        seed: rc.seed,
        ..BagTaskConfig::default()
    };
    let r = run_bag_task(&cfg)?;
    save_metrics(rc, &format!("bsfe_em{}.csv", cfg.em_steps), &r.metrics)?;
    println!(
        "em_steps {}  train accuracy {:.4}  test accuracy {:.4}",
        cfg.em_steps, r.train_accuracy, r.test_accuracy
    );
    Ok(())
}
