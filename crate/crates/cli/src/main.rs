//! Command-line interface: synthesize datasets, train scoring models,
//! evaluate with the generalized seen/unseen protocol, and export analyses.

mod config;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tmn_core::analysis;
use tmn_core::checkpoint::{load_checkpoint, save_checkpoint};
use tmn_core::data::{
    generate_synthetic_with_latents, load_embeddings, Dataset, EvalSplit, PairFlag, Sample,
    SynthConfig,
};
use tmn_core::error::{Error, Result};
use tmn_core::evaluation::{curve_tsv, summarize, summary_tsv, ScoreMatrix};
use tmn_core::model::{ConceptPair, ModelKind, ModelParams, ModularNetConfig};
use tmn_core::training::{fit, NegativeCount, TrainConfig, EPOCH_LOG_HEADER};

use config::{resolve, resolve_opt, FileConfig};

#[derive(Parser)]
#[command(
    name = "tmn",
    version,
    about = "Task-driven modular networks for compositional zero-shot recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic contextual-composition dataset.
    Synth(SynthArgs),
    /// Train a scoring model and keep the best-validation checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint with the calibration sweep and area summaries.
    Eval(EvalArgs),
    /// Export attribution tables, routing topologies, and representations.
    Inspect(InspectArgs),
    /// Rank samples by compatibility with a concept pair.
    Retrieve(RetrieveArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    objects: Option<usize>,
    #[arg(long)]
    attributes: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Feature dimension of the generated samples.
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    samples_per_pair: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    unseen_fraction: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    /// Model kind: tmn, ablation_a, ablation_b, or labelembed.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    layers: Option<usize>,
    /// Modules per inner layer.
    #[arg(long)]
    modules: Option<usize>,
    #[arg(long)]
    module_dim: Option<usize>,
    #[arg(long)]
    gating_hidden: Option<usize>,
    #[arg(long)]
    embedding_dim: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset directory (splits.tsv, train.tsv, val.tsv, test.tsv).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    lr_feat: Option<f64>,
    #[arg(long)]
    lr_gate: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Negatives per sample: an integer or "all".
    #[arg(long)]
    negatives: Option<String>,
    #[arg(long)]
    concept_drop: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pretrained word-vector file for embedding initialization.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Keep embedding tables at their initial values.
    #[arg(long)]
    freeze_embeddings: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Evaluation split: val or test.
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Entries per attribution list.
    #[arg(long)]
    topk: Option<usize>,
    /// Concept pair "object,attribute" for the topology export.
    #[arg(long)]
    pair: Option<String>,
    /// Additional representation exports: gatings, features, scores.
    #[arg(long)]
    export: Vec<String>,
    /// Topology threshold tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Threshold against the global maximum gate instead of each
    /// destination's maximum.
    #[arg(long)]
    global_threshold: bool,
    /// Split providing the samples for representation exports.
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct RetrieveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Concept pair "object,attribute" to query.
    #[arg(long)]
    pair: String,
    /// Number of results.
    #[arg(long)]
    topk: Option<usize>,
    /// Split to rank samples from: val or test.
    #[arg(long)]
    split: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tmn: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Contract(_) => 2,
        Error::Format { .. } | Error::Vocab(_) | Error::Io(_) | Error::Protocol(_) => 3,
        Error::Dim { .. } | Error::NonFinite { .. } => 4,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Inspect(args) => run_inspect(args),
        Command::Retrieve(args) => run_retrieve(args),
    }
}

fn file_config(common: &CommonArgs) -> Result<FileConfig> {
    match &common.config {
        Some(path) => FileConfig::load(path),
        None => Ok(FileConfig::default()),
    }
}

/// Writes `manifest` recording the command, code version, and resolved
/// configuration, one sorted `key = value` line each.
fn write_manifest(out: &Path, command: &str, entries: &[(&str, String)]) -> Result<()> {
    let mut sorted: Vec<(&str, String)> = entries.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    let mut text = String::new();
    let _ = writeln!(text, "command = {command}");
    let _ = writeln!(text, "version = {}", env!("CARGO_PKG_VERSION"));
    for (k, v) in sorted {
        let _ = writeln!(text, "{k} = {v}");
    }
    std::fs::write(out.join("manifest"), text)?;
    Ok(())
}

fn parse_pair_names(raw: &str) -> Result<(&str, &str)> {
    raw.split_once(',').ok_or_else(|| {
        Error::Config(format!("pair '{raw}' must be written as 'object,attribute'"))
    })
}

/// Re-expresses dataset samples and candidate flags in the checkpoint's id
/// space, matching names.
fn align_to_model(
    dataset: &Dataset,
    params: &ModelParams,
    split: EvalSplit,
) -> Result<(Vec<Sample>, Vec<PairFlag>)> {
    let samples = dataset
        .eval_samples(split)
        .iter()
        .map(|s| {
            Ok(Sample {
                id: s.id.clone(),
                features: s.features.clone(),
                label: dataset.vocab.align_pair(params, s.label)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let candidates = dataset
        .splits
        .candidates(split)
        .iter()
        .map(|pf| {
            Ok(PairFlag {
                pair: dataset.vocab.align_pair(params, pf.pair)?,
                unseen: pf.unseen,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, candidates))
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let file = file_config(&args.common)?;
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        objects: resolve(args.objects, &file, "objects", defaults.objects)?,
        attributes: resolve(args.attributes, &file, "attributes", defaults.attributes)?,
        latent_dim: resolve(args.latent_dim, &file, "latent-dim", defaults.latent_dim)?,
        feature_dim: resolve(args.features, &file, "features", defaults.feature_dim)?,
        samples_per_pair: resolve(
            args.samples_per_pair,
            &file,
            "samples-per-pair",
            defaults.samples_per_pair,
        )?,
        noise: resolve(args.noise, &file, "noise", defaults.noise)?,
        unseen_fraction: resolve(
            args.unseen_fraction,
            &file,
            "unseen-fraction",
            defaults.unseen_fraction,
        )?,
        seed: resolve(args.seed, &file, "seed", defaults.seed)?,
    };
    let (dataset, latents) = generate_synthetic_with_latents(&cfg)?;
    std::fs::create_dir_all(&args.common.out)?;
    dataset.save(&args.common.out)?;

    // Latent vectors double as a pretrained-embedding table for the
    // `train --embeddings` pathway.
    let mut names: Vec<&String> = latents.keys().collect();
    names.sort();
    let mut table = String::new();
    for name in names {
        let _ = write!(table, "{name}");
        for v in &latents[name] {
            let _ = write!(table, " {v:.16e}");
        }
        table.push('\n');
    }
    std::fs::write(args.common.out.join("embeddings.txt"), table)?;

    write_manifest(
        &args.common.out,
        "synth",
        &[
            ("objects", cfg.objects.to_string()),
            ("attributes", cfg.attributes.to_string()),
            ("latent-dim", cfg.latent_dim.to_string()),
            ("features", cfg.feature_dim.to_string()),
            ("samples-per-pair", cfg.samples_per_pair.to_string()),
            ("noise", cfg.noise.to_string()),
            ("unseen-fraction", cfg.unseen_fraction.to_string()),
            ("seed", cfg.seed.to_string()),
        ],
    )
}

fn run_train(args: TrainArgs) -> Result<()> {
    let file = file_config(&args.common)?;
    let dataset = Dataset::load(&args.data)?;

    let kind = ModelKind::parse(&resolve(
        args.model.model,
        &file,
        "model",
        "tmn".to_string(),
    )?)?;
    let embeddings_path = resolve_opt(args.embeddings, &file, "embeddings")?;
    let table = match &embeddings_path {
        Some(path) => Some(load_embeddings(path, &dataset.vocab)?),
        None => None,
    };
    // Embedding width follows the pretrained table when one is supplied.
    let embedding_default = table.as_ref().and_then(|t| t.dim).unwrap_or(64);

    let net = ModularNetConfig::uniform(
        resolve(args.model.layers, &file, "layers", 3)?,
        resolve(args.model.modules, &file, "modules", 24)?,
        resolve(args.model.module_dim, &file, "module-dim", 16)?,
        dataset.feature_dim,
        resolve(args.model.gating_hidden, &file, "gating-hidden", 64)?,
        resolve(
            args.model.embedding_dim,
            &file,
            "embedding-dim",
            embedding_default,
        )?,
    );
    let train_cfg = TrainConfig {
        lr_feature: resolve(args.lr_feat, &file, "lr-feat", 0.001)?,
        lr_gating: resolve(args.lr_gate, &file, "lr-gate", 0.01)?,
        batch_size: resolve(args.batch, &file, "batch", 256)?,
        negatives: NegativeCount::parse(&resolve(
            args.negatives,
            &file,
            "negatives",
            "all".to_string(),
        )?)?,
        concept_drop: resolve(args.concept_drop, &file, "concept-drop", 0.05)?,
        epochs: resolve(args.epochs, &file, "epochs", 30)?,
        seed: resolve(args.seed, &file, "seed", 1)?,
        freeze_embeddings: args.freeze_embeddings
            || file.get("freeze-embeddings") == Some("true"),
    };

    let vectors: Option<&HashMap<String, Vec<f64>>> = table.as_ref().map(|t| &t.vectors);
    if let Some(t) = &table {
        if !t.missing.is_empty() {
            eprintln!(
                "tmn: {} vocabulary names have no pretrained vector and fall back to \
                 random initialization",
                t.missing.len()
            );
        }
    }
    let params = ModelParams::init(
        kind,
        net.clone(),
        dataset.vocab.objects().to_vec(),
        dataset.vocab.attributes().to_vec(),
        train_cfg.seed,
        vectors,
    )?;

    let fitted = fit(params, &dataset, &train_cfg)?;

    std::fs::create_dir_all(&args.common.out)?;
    save_checkpoint(&fitted.best, &args.common.out.join("best"))?;
    save_checkpoint(&fitted.final_params, &args.common.out.join("final"))?;
    let mut log = String::from(EPOCH_LOG_HEADER);
    log.push('\n');
    for l in &fitted.logs {
        log.push_str(&l.record());
        log.push('\n');
    }
    std::fs::write(args.common.out.join("epochs.tsv"), log)?;

    write_manifest(
        &args.common.out,
        "train",
        &[
            ("data", args.data.display().to_string()),
            ("model", kind.as_str().to_string()),
            ("layers", net.layers.to_string()),
            (
                "modules",
                net.inner_modules.first().copied().unwrap_or(1).to_string(),
            ),
            ("module-dim", net.module_dim.to_string()),
            ("gating-hidden", net.gating_hidden.to_string()),
            ("embedding-dim", net.embedding_dim.to_string()),
            ("lr-feat", train_cfg.lr_feature.to_string()),
            ("lr-gate", train_cfg.lr_gating.to_string()),
            ("batch", train_cfg.batch_size.to_string()),
            ("negatives", train_cfg.negatives.to_string_value()),
            ("concept-drop", train_cfg.concept_drop.to_string()),
            ("epochs", train_cfg.epochs.to_string()),
            ("seed", train_cfg.seed.to_string()),
            (
                "freeze-embeddings",
                train_cfg.freeze_embeddings.to_string(),
            ),
            (
                "embeddings",
                embeddings_path
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "none".to_string()),
            ),
            (
                "best-epoch",
                fitted
                    .best_epoch
                    .map(|e| e.to_string())
                    .unwrap_or_else(|| "none".to_string()),
            ),
        ],
    )
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let file = file_config(&args.common)?;
    let split = EvalSplit::parse(&resolve(args.split, &file, "split", "val".to_string())?)?;
    let params = load_checkpoint(&args.ckpt)?;
    let dataset = Dataset::load(&args.data)?;
    let (samples, candidates) = align_to_model(&dataset, &params, split)?;
    let matrix = ScoreMatrix::build(&params, &samples, &candidates)?;
    let (summary, curves) = summarize(&matrix)?;

    std::fs::create_dir_all(&args.common.out)?;
    for curve in &curves {
        std::fs::write(
            args.common.out.join(format!("curve_top{}.tsv", curve.k)),
            curve_tsv(curve),
        )?;
    }
    std::fs::write(args.common.out.join("summary.tsv"), summary_tsv(&summary))?;
    write_manifest(
        &args.common.out,
        "eval",
        &[
            ("ckpt", args.ckpt.display().to_string()),
            ("data", args.data.display().to_string()),
            ("split", split.as_str().to_string()),
            ("model", params.kind().as_str().to_string()),
        ],
    )
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn run_inspect(args: InspectArgs) -> Result<()> {
    let file = file_config(&args.common)?;
    let params = load_checkpoint(&args.ckpt)?;
    let dataset = Dataset::load(&args.data)?;
    let split = EvalSplit::parse(&resolve(args.split, &file, "split", "val".to_string())?)?;
    let top = resolve(args.topk, &file, "topk", 3)?;
    let tolerance = resolve(args.tolerance, &file, "tolerance", 0.03)?;
    let rule = if args.global_threshold || file.get("global-threshold") == Some("true") {
        analysis::ThresholdRule::GlobalMax
    } else {
        analysis::ThresholdRule::PerDestination
    };

    let pairs: Vec<ConceptPair> = dataset
        .all_pairs()
        .into_iter()
        .map(|p| dataset.vocab.align_pair(&params, p))
        .collect::<Result<_>>()?;
    let n = top.min(pairs.len());
    std::fs::create_dir_all(&args.common.out)?;

    let pair_name = |p: &ConceptPair| -> (String, String) {
        (
            params.object_names()[p.object].clone(),
            params.attribute_names()[p.attribute].clone(),
        )
    };

    let edges = analysis::top_pairs_per_edge(&params, &pairs, n)?;
    let mut tsv = String::from("layer\tsrc\tdst\trank\tobject\tattribute\tstrength\n");
    for e in &edges {
        for (rank, entry) in e.ranked.iter().enumerate() {
            let (o, a) = pair_name(&entry.pair);
            let _ = writeln!(
                tsv,
                "{}\t{}\t{}\t{}\t{o}\t{a}\t{:.16e}",
                e.layer, e.src, e.dst, rank, entry.strength
            );
        }
    }
    std::fs::write(args.common.out.join("edges.tsv"), tsv)?;

    let modules = analysis::top_pairs_per_module(&params, &pairs, n)?;
    let mut tsv = String::from("layer\tmodule\trank\tobject\tattribute\tstrength\n");
    for m in &modules {
        for (rank, entry) in m.ranked.iter().enumerate() {
            let (o, a) = pair_name(&entry.pair);
            let _ = writeln!(
                tsv,
                "{}\t{}\t{}\t{o}\t{a}\t{:.16e}",
                m.layer, m.module, rank, entry.strength
            );
        }
    }
    std::fs::write(args.common.out.join("modules.tsv"), tsv)?;

    let mut exports = args.export.clone();
    if let Some(raw) = file.get("export") {
        exports.extend(raw.split(',').map(|s| s.trim().to_string()));
    }
    if exports.is_empty() {
        exports.push("gatings".to_string());
    }
    exports.sort();
    exports.dedup();
    let samples = align_to_model(&dataset, &params, split)?.0;
    for export in &exports {
        let which = analysis::Representation::parse(export)?;
        let tsv = analysis::export_representations(&params, &samples, &pairs, which)?;
        std::fs::write(args.common.out.join(format!("{export}.tsv")), tsv)?;
    }

    if let Some(raw) = &args.pair {
        let (oname, aname) = parse_pair_names(raw)?;
        let pair = dataset
            .vocab
            .pair_by_names(oname, aname)
            .and_then(|p| dataset.vocab.align_pair(&params, p))?;
        let graph = analysis::topology_graph(&params, pair, tolerance, rule)?;
        std::fs::write(
            args.common.out.join(format!(
                "topology_{}_{}.tsv",
                sanitize(oname),
                sanitize(aname)
            )),
            analysis::topology_tsv(&graph),
        )?;
    }

    write_manifest(
        &args.common.out,
        "inspect",
        &[
            ("ckpt", args.ckpt.display().to_string()),
            ("data", args.data.display().to_string()),
            ("split", split.as_str().to_string()),
            ("topk", top.to_string()),
            ("tolerance", tolerance.to_string()),
            (
                "threshold-rule",
                match rule {
                    analysis::ThresholdRule::PerDestination => "per-destination".to_string(),
                    analysis::ThresholdRule::GlobalMax => "global".to_string(),
                },
            ),
            ("export", exports.join(",")),
            (
                "pair",
                args.pair.clone().unwrap_or_else(|| "none".to_string()),
            ),
        ],
    )
}

fn run_retrieve(args: RetrieveArgs) -> Result<()> {
    let file = file_config(&args.common)?;
    let params = load_checkpoint(&args.ckpt)?;
    let dataset = Dataset::load(&args.data)?;
    let split = EvalSplit::parse(&resolve(args.split, &file, "split", "test".to_string())?)?;
    let (oname, aname) = parse_pair_names(&args.pair)?;
    let pair = dataset
        .vocab
        .pair_by_names(oname, aname)
        .and_then(|p| dataset.vocab.align_pair(&params, p))?;
    let samples = align_to_model(&dataset, &params, split)?.0;
    let n = resolve(args.topk, &file, "topk", 5)?.min(samples.len());
    let ranked = analysis::retrieve(&params, pair, &samples, n)?;

    std::fs::create_dir_all(&args.common.out)?;
    let mut tsv = String::from("rank\tsample_id\tscore\n");
    for (rank, (id, score)) in ranked.iter().enumerate() {
        let _ = writeln!(tsv, "{rank}\t{id}\t{score:.16e}");
    }
    std::fs::write(args.common.out.join("retrieval.tsv"), tsv)?;
    write_manifest(
        &args.common.out,
        "retrieve",
        &[
            ("ckpt", args.ckpt.display().to_string()),
            ("data", args.data.display().to_string()),
            ("split", split.as_str().to_string()),
            ("pair", args.pair.clone()),
            ("topk", n.to_string()),
        ],
    )
}
