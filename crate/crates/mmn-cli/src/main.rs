//! Batch front end: preprocess, audit, train, eval, summarize, gradcheck.
//!
//! Every command is deterministic given its inputs and seed; data goes to
//! files or standard output, diagnostics to standard error, and each
//! file-writing run leaves a manifest beside its outputs.

mod manifest;
mod overrides;

use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mmn::analytics::{bias_report, histogram_csv};
use mmn::corpus::{
    self, normalize_text, read_examples, read_posts, tokenize, write_examples, Example,
    TokenizedExample, Vocabulary, EOS_ID,
};
use mmn::model::{checkpoint, load_pretrained_embeddings, InferenceModel, Parameters};
use mmn::training::{evaluate, train, write_loss_csv};
use mmn::verify::{linear_exactness_suite, verification_suite};
use mmn::Preset;

use manifest::ManifestBuilder;
use overrides::ConfigOverrides;

#[derive(Parser)]
#[command(name = "mmn", version, about = "Multi-level memory network summarizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize, tokenize, filter and split a raw corpus; build the vocabulary.
    Preprocess {
        /// Line-delimited JSON posts: {"id", "document", "title", "tldr"}.
        #[arg(long)]
        input: PathBuf,
        /// Experiment profile (tifu-short, tifu-long, newsroom-abs, xsum).
        #[arg(long)]
        profile: Preset,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        /// JSON file overriding preset fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for train.jsonl, test.jsonl, vocab.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the extractive-bias report over a preprocessed split.
    Audit {
        /// A split file written by preprocess.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Histogram bin count.
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// External abstractive ROUGE-L (0-100 scale) for the ratio fields.
        #[arg(long)]
        scores: Option<f64>,
        /// Output directory for report.json and histogram.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a summarizer and write a checkpoint plus the loss curve.
    Train {
        /// Training split from preprocess.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        profile: Preset,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for checkpoint.mmn and loss.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint: perplexity and mean ROUGE over a test split.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Decode length cap.
        #[arg(long, default_value_t = 20)]
        max_len: usize,
        /// Report file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize plain text from a file or standard input.
    Summarize {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Input text file; omitted means standard input.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        max_len: usize,
        /// Write the summary here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify every differentiable operation against finite differences.
    Gradcheck {
        /// Number of seeds per operation.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Preprocess { input, profile, seed, config, out } => {
            cmd_preprocess(&input, profile, seed, config.as_deref(), &out)
        }
        Command::Audit { input, vocab, bins, scores, out } => {
            cmd_audit(&input, &vocab, bins, scores, &out)
        }
        Command::Train { input, vocab, profile, seed, config, out } => {
            cmd_train(&input, &vocab, profile, seed, config.as_deref(), &out)
        }
        Command::Eval { input, vocab, checkpoint, max_len, out } => {
            cmd_eval(&input, &vocab, &checkpoint, max_len, &out)
        }
        Command::Summarize { checkpoint, vocab, input, max_len, out } => {
            cmd_summarize(&checkpoint, &vocab, input.as_deref(), max_len, out.as_deref())
        }
        Command::Gradcheck { seeds } => cmd_gradcheck(seeds),
    }
}

fn cmd_preprocess(
    input: &Path,
    profile: Preset,
    seed: u64,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let overrides = ConfigOverrides::load(config)?;
    let budget = overrides.vocab_budget.unwrap_or_else(|| profile.vocab_budget());
    let posts = read_posts(input).context("reading corpus")?;
    let (train_set, test_set, vocab) =
        corpus::preprocess(&posts, profile.summary_profile(), budget, seed)
            .context("preprocessing corpus")?;

    std::fs::create_dir_all(out)?;
    let mut manifest = ManifestBuilder::new("preprocess")
        .seed(seed)
        .input("corpus", input)
        .config(&serde_json::json!({
            "profile": profile.name(),
            "vocab_budget": budget,
        }));
    let train_path = out.join("train.jsonl");
    let test_path = out.join("test.jsonl");
    let vocab_path = out.join("vocab.txt");
    write_examples(&train_path, &train_set)?;
    write_examples(&test_path, &test_set)?;
    vocab.save(&vocab_path)?;
    manifest.output(&train_path);
    manifest.output(&test_path);
    manifest.output(&vocab_path);
    manifest.write(&out.join("manifest.json"))?;
    eprintln!(
        "preprocess: {} train / {} test examples, vocabulary {}",
        train_set.len(),
        test_set.len(),
        vocab.len()
    );
    Ok(())
}

fn detokenized(examples: &[Example], vocab: &Vocabulary) -> Result<Vec<TokenizedExample>> {
    examples
        .iter()
        .map(|e| {
            let document = vocab.decode(&e.document_ids)?;
            let summary_ids = match e.summary_ids.last() {
                Some(&id) if id == EOS_ID => &e.summary_ids[..e.summary_ids.len() - 1],
                _ => &e.summary_ids[..],
            };
            let summary = vocab.decode(summary_ids)?;
            Ok(TokenizedExample { id: e.id.clone(), document, summary })
        })
        .collect::<Result<Vec<_>, corpus::CorpusError>>()
        .context("decoding split against vocabulary")
}

fn cmd_audit(
    input: &Path,
    vocab_path: &Path,
    bins: usize,
    scores: Option<f64>,
    out: &Path,
) -> Result<()> {
    let examples = read_examples(input).context("reading split")?;
    let vocab = Vocabulary::load(vocab_path).context("loading vocabulary")?;
    let corpus = detokenized(&examples, &vocab)?;
    let report = bias_report(&corpus, bins, scores).context("computing bias report")?;

    std::fs::create_dir_all(out)?;
    let mut manifest = ManifestBuilder::new("audit")
        .input("split", input)
        .input("vocab", vocab_path)
        .config(&serde_json::json!({ "bins": bins, "scores": scores }));
    let report_path = out.join("report.json");
    let histogram_path = out.join("histogram.csv");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    std::fs::write(&histogram_path, histogram_csv(&report.histogram))?;
    manifest.output(&report_path);
    manifest.output(&histogram_path);
    manifest.write(&out.join("manifest.json"))?;
    eprintln!(
        "audit: {} documents, lead R-1 {:.2}, oracle R-1 {:.2}",
        report.documents, report.lead.rouge_1, report.ext_oracle.rouge_1
    );
    Ok(())
}

fn cmd_train(
    input: &Path,
    vocab_path: &Path,
    profile: Preset,
    seed: u64,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let overrides = ConfigOverrides::load(config)?;
    let examples = read_examples(input).context("reading training split")?;
    let vocab = Vocabulary::load(vocab_path).context("loading vocabulary")?;

    let mut model_config = profile.model_config(vocab.len());
    overrides.apply_model(&mut model_config);
    model_config.validate().map_err(|e| anyhow::anyhow!(e))?;
    let mut train_config = profile.train_config(seed);
    overrides.apply_train(&mut train_config);
    train_config.validate().map_err(|e| anyhow::anyhow!(e))?;

    let mut params = Parameters::<f32>::init(&model_config, seed);
    if let Some(vectors) = &overrides.embeddings {
        let loaded = load_pretrained_embeddings(vectors, &vocab, &mut params)
            .context("loading pretrained embeddings")?;
        eprintln!("loaded {} pretrained embedding rows", loaded);
    }

    let mut adam = mmn::numerics::AdamState::new();
    let outcome = train(&examples, &model_config, &train_config, &mut params, &mut adam)
        .context("training")?;

    std::fs::create_dir_all(out)?;
    let mut manifest = ManifestBuilder::new("train")
        .seed(seed)
        .input("train", input)
        .input("vocab", vocab_path)
        .config(&serde_json::json!({
            "model": model_config,
            "train": train_config,
            "profile": profile.name(),
        }));
    let ckpt_path = out.join("checkpoint.mmn");
    let loss_path = out.join("loss.csv");
    checkpoint::save(&ckpt_path, &model_config, &params).context("writing checkpoint")?;
    write_loss_csv(&loss_path, &outcome.records)?;
    manifest.output(&ckpt_path);
    manifest.output(&loss_path);
    manifest.write(&out.join("manifest.json"))?;
    for (epoch, loss) in outcome.epoch_mean_loss.iter().enumerate() {
        eprintln!("epoch {:>3}: mean loss {:.6}", epoch, loss);
    }
    Ok(())
}

fn load_model(ckpt: &Path, vocab_path: &Path) -> Result<(InferenceModel<f32>, Vocabulary)> {
    let (config, params) = checkpoint::load(ckpt).context("loading checkpoint")?;
    let vocab = Vocabulary::load(vocab_path).context("loading vocabulary")?;
    if vocab.len() != config.vocab_size {
        bail!(
            "vocabulary has {} entries but the checkpoint was trained with {}",
            vocab.len(),
            config.vocab_size
        );
    }
    Ok((InferenceModel::new(&config, &params), vocab))
}

fn cmd_eval(
    input: &Path,
    vocab_path: &Path,
    ckpt: &Path,
    max_len: usize,
    out: &Path,
) -> Result<()> {
    let (model, _vocab) = load_model(ckpt, vocab_path)?;
    let examples = read_examples(input).context("reading eval split")?;
    let report = evaluate(&model, &examples, max_len).context("evaluating")?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    let mut manifest = ManifestBuilder::new("eval")
        .input("split", input)
        .input("vocab", vocab_path)
        .input("checkpoint", ckpt)
        .config(&serde_json::json!({ "max_len": max_len }));
    manifest.output(out);
    manifest.write(&out.with_extension("manifest.json"))?;
    eprintln!(
        "eval: ppl {:.2}, R-1 {:.2}, R-2 {:.2}, R-L {:.2} over {} examples",
        report.perplexity, report.rouge_1, report.rouge_2, report.rouge_l, report.examples
    );
    Ok(())
}

fn cmd_summarize(
    ckpt: &Path,
    vocab_path: &Path,
    input: Option<&Path>,
    max_len: usize,
    out: Option<&Path>,
) -> Result<()> {
    let (model, vocab) = load_model(ckpt, vocab_path)?;
    let text = match input {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?,
        None => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf).context("reading standard input")?;
            buf
        }
    };
    let tokens = tokenize(&normalize_text(&text));
    if tokens.is_empty() {
        bail!("input text is empty after normalization");
    }
    let ids = vocab.encode(&tokens);
    let summary_ids = model.greedy_decode(&ids, max_len);
    let summary = vocab.decode(&summary_ids).context("decoding summary")?.join(" ");
    match out {
        Some(path) => {
            std::fs::write(path, format!("{}\n", summary))?;
            let mut manifest = ManifestBuilder::new("summarize")
                .input("checkpoint", ckpt)
                .input("vocab", vocab_path)
                .config(&serde_json::json!({ "max_len": max_len }));
            manifest.output(path);
            manifest.write(&path.with_extension("manifest.json"))?;
        }
        None => println!("{}", summary),
    }
    Ok(())
}

fn cmd_gradcheck(seeds: u64) -> Result<()> {
    let seed_list: Vec<u64> = (0..seeds.max(1)).map(|i| 11 + i * 7).collect();
    let mut failed = 0usize;
    println!("finite-difference verification over {} seed(s)", seed_list.len());
    for result in verification_suite(&seed_list) {
        let status = if result.passed() { "pass" } else { "FAIL" };
        println!(
            "{:>4}  {:<28} max rel err {:.3e}  (threshold {:.0e})",
            status, result.name, result.max_rel_error, result.threshold
        );
        if !result.passed() {
            failed += 1;
        }
    }
    for result in linear_exactness_suite(&seed_list) {
        let status = if result.passed() { "pass" } else { "FAIL" };
        println!(
            "{:>4}  {:<28} max rel err {:.3e}  (exactness {:.0e})",
            status,
            format!("{} (linear)", result.name),
            result.max_rel_error,
            result.threshold
        );
        if !result.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{} gradient check(s) failed", failed);
    }
    Ok(())
}
