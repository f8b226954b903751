//! Command-line front end: each pipeline stage as a subcommand plus `run`
//! for the full experiment. Exit code 0 on success; failures print a
//! stage-tagged message and exit nonzero.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use periocular_core::data::{
    generate_pairs, load_manifest, load_manifest_unchecked, split_subjects, AttributeOfInterest,
    PairList, SubjectOrdering, Variant,
};
use periocular_core::matching::{
    fuse_scores, read_fused_csv, read_scores_csv, write_fused_csv, write_scores_csv, FusionConfig,
};
use periocular_core::metrics::{build_report, VerificationReport};
use periocular_core::pipeline::{
    compare_reports, extract_all, normalize_batch, run_experiment, score_pairs, ExperimentConfig,
    Preset, VariantUnderTest,
};
use periocular_core::plot::{write_histograms_svg, write_roc_svg};

#[derive(Parser)]
#[command(
    name = "periocular",
    about = "Periocular verification evaluation toolkit",
    version
)]
struct Cli {
    /// Random seed recorded with run artifacts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Feature cache directory.
    #[arg(long, global = true, default_value = "cache")]
    cache_dir: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a manifest, printing dataset statistics.
    Validate {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = AttributeArg::Eyeglasses)]
        attribute: AttributeArg,
    },
    /// Partition subjects into train/eval manifests.
    Split {
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long, value_enum, default_value_t = OrderingArg::Lexicographic)]
        ordering: OrderingArg,
        #[arg(long, value_enum, default_value_t = AttributeArg::Eyeglasses)]
        attribute: AttributeArg,
    },
    /// Run the external attribute normalizer over a manifest.
    Normalize {
        manifest: PathBuf,
        /// Command template with {in_dir} and {out_dir} placeholders, or
        /// "identity" for the built-in byte-copy.
        #[arg(long)]
        cmd: String,
        #[arg(long, value_enum, default_value_t = AttributeArg::Eyeglasses)]
        attribute: AttributeArg,
    },
    /// Extract the preset's features into the cache.
    Extract {
        manifest: PathBuf,
        #[arg(long)]
        preset: Preset,
        #[arg(long, value_enum, default_value_t = AttributeArg::Eyeglasses)]
        attribute: AttributeArg,
        #[arg(long)]
        embeddings_dir: Option<PathBuf>,
    },
    /// Generate the all-against-all comparison pair list.
    Pairs {
        manifest: PathBuf,
        /// Keep only pairs whose attribute of interest differs.
        #[arg(long)]
        attribute_differing: bool,
        #[arg(long, value_enum, default_value_t = AttributeArg::Eyeglasses)]
        attribute: AttributeArg,
    },
    /// Score a pair list under the preset's matchers.
    Match {
        manifest: PathBuf,
        #[arg(long)]
        preset: Preset,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum, default_value_t = AttributeArg::Eyeglasses)]
        attribute: AttributeArg,
        #[arg(long)]
        embeddings_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0.75)]
        sift_ratio: f64,
    },
    /// Min-max normalize matcher columns and fuse with the given weights.
    Fuse {
        #[arg(long)]
        scores: PathBuf,
        /// Comma-separated weights; uniform when omitted.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Comma-separated matcher order the weights apply to; defaults to
        /// the matchers found in the file, sorted.
        #[arg(long, value_delimiter = ',')]
        matchers: Option<Vec<String>>,
    },
    /// Build a verification report from a score file.
    Evaluate {
        /// Long-format score CSV (use with --matcher).
        #[arg(long, conflicts_with = "fused")]
        scores: Option<PathBuf>,
        /// Fused score CSV.
        #[arg(long)]
        fused: Option<PathBuf>,
        #[arg(long, default_value = "fused")]
        matcher: String,
        #[arg(long, value_enum, default_value_t = VariantArg::Original)]
        variant: VariantArg,
    },
    /// Compare two report JSONs (baseline first).
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
    },
    /// Run a full experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum AttributeArg {
    Eyeglasses,
    Gaze,
}

impl From<AttributeArg> for AttributeOfInterest {
    fn from(a: AttributeArg) -> Self {
        match a {
            AttributeArg::Eyeglasses => AttributeOfInterest::Eyeglasses,
            AttributeArg::Gaze => AttributeOfInterest::Gaze,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum OrderingArg {
    Lexicographic,
    ManifestOrder,
}

impl From<OrderingArg> for SubjectOrdering {
    fn from(o: OrderingArg) -> Self {
        match o {
            OrderingArg::Lexicographic => SubjectOrdering::Lexicographic,
            OrderingArg::ManifestOrder => SubjectOrdering::ManifestOrder,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum VariantArg {
    Original,
    Normalized,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Original => Variant::Original,
            VariantArg::Normalized => Variant::Normalized,
        }
    }
}

/// Stage-scoped config for the standalone extract/match subcommands.
fn transient_config(
    cli: &Cli,
    manifest: &std::path::Path,
    preset: Preset,
    attribute: AttributeOfInterest,
    embeddings_dir: Option<PathBuf>,
    sift_ratio: f64,
) -> ExperimentConfig {
    ExperimentConfig {
        manifest_path: manifest.to_path_buf(),
        attribute,
        variant_under_test: VariantUnderTest::Original,
        normalizer_command: None,
        preset,
        fusion_weights: None,
        attribute_differing_only: false,
        split_fraction: 0.5,
        split_ordering: SubjectOrdering::Lexicographic,
        cache_dir: cli.cache_dir.clone(),
        out_dir: cli.out_dir.clone(),
        seed: cli.seed,
        embeddings_dir,
        sift_ratio,
        sift_max_keypoints: 300,
        mbtlbp_block: 3,
        work_size: 256,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("[setup] cannot create {}", cli.out_dir.display()))?;
    match &cli.command {
        Command::Validate {
            manifest,
            attribute,
        } => {
            let m = load_manifest(manifest, (*attribute).into()).context("[validate]")?;
            let glasses = m.samples().iter().filter(|s| s.eyeglasses).count();
            println!("manifest {} is valid", manifest.display());
            println!("  samples:  {}", m.len());
            println!("  subjects: {}", m.subject_ids().len());
            println!("  classes:  {}", m.class_ids().len());
            println!("  eyeglasses: {glasses} / {}", m.len());
        }
        Command::Split {
            manifest,
            fraction,
            ordering,
            attribute,
        } => {
            let m = load_manifest_unchecked(manifest, (*attribute).into()).context("[split]")?;
            let (train, eval) =
                split_subjects(&m, *fraction, (*ordering).into()).context("[split]")?;
            let train_path = cli.out_dir.join("train-manifest.csv");
            let eval_path = cli.out_dir.join("eval-manifest.csv");
            train.save(&train_path).context("[split]")?;
            eval.save(&eval_path).context("[split]")?;
            println!(
                "train: {} subjects / {} samples -> {}",
                train.subject_ids().len(),
                train.len(),
                train_path.display()
            );
            println!(
                "eval:  {} subjects / {} samples -> {}",
                eval.subject_ids().len(),
                eval.len(),
                eval_path.display()
            );
        }
        Command::Normalize {
            manifest,
            cmd,
            attribute,
        } => {
            let m = load_manifest(manifest, (*attribute).into()).context("[normalize]")?;
            let out = cli.out_dir.join("normalized");
            let normalized = normalize_batch(&m, cmd, &out)?;
            let manifest_path = cli.out_dir.join("normalized-manifest.csv");
            normalized.save(&manifest_path).context("[normalize]")?;
            println!(
                "normalized {} samples -> {}",
                normalized.len(),
                manifest_path.display()
            );
        }
        Command::Extract {
            manifest,
            preset,
            attribute,
            embeddings_dir,
        } => {
            let m = load_manifest(manifest, (*attribute).into()).context("[extract]")?;
            let cfg = transient_config(
                &cli,
                manifest,
                *preset,
                (*attribute).into(),
                embeddings_dir.clone(),
                0.75,
            );
            let (features, stats) = extract_all(&m, &cfg, &cli.cache_dir)?;
            println!(
                "extracted {} samples ({} computed, {} cache hits)",
                features.len(),
                stats.computed,
                stats.cache_hits
            );
        }
        Command::Pairs {
            manifest,
            attribute_differing,
            attribute,
        } => {
            let m = load_manifest_unchecked(manifest, (*attribute).into()).context("[pairs]")?;
            let pairs = generate_pairs(&m, *attribute_differing).context("[pairs]")?;
            let path = cli.out_dir.join("pairs.csv");
            pairs.save_csv(&path).context("[pairs]")?;
            println!(
                "{} genuine / {} impostor pairs -> {}",
                pairs.genuine_count(),
                pairs.impostor_count(),
                path.display()
            );
        }
        Command::Match {
            manifest,
            preset,
            pairs,
            attribute,
            embeddings_dir,
            sift_ratio,
        } => {
            let m = load_manifest(manifest, (*attribute).into()).context("[match]")?;
            let pair_list = PairList::load_csv(pairs).context("[match]")?;
            let cfg = transient_config(
                &cli,
                manifest,
                *preset,
                (*attribute).into(),
                embeddings_dir.clone(),
                *sift_ratio,
            );
            let (features, _) = extract_all(&m, &cfg, &cli.cache_dir)?;
            let records = score_pairs(&features, &pair_list, &cfg)?;
            let path = cli.out_dir.join("scores.csv");
            write_scores_csv(&records, &path).context("[match]")?;
            println!("scored {} pairs -> {}", records.len(), path.display());
        }
        Command::Fuse {
            scores,
            weights,
            matchers,
        } => {
            let records = read_scores_csv(scores).context("[fuse]")?;
            if records.is_empty() {
                bail!("[fuse] score file {} has no records", scores.display());
            }
            let matcher_ids: Vec<String> = match matchers {
                Some(ids) => ids.clone(),
                None => records[0].matcher_scores.keys().cloned().collect(),
            };
            let cfg = match weights {
                Some(w) => FusionConfig::new(matcher_ids, w.clone()).context("[fuse]")?,
                None => FusionConfig::uniform(matcher_ids).context("[fuse]")?,
            };
            let fused = fuse_scores(&records, &cfg).context("[fuse]")?;
            let path = cli.out_dir.join("fused.csv");
            write_fused_csv(&fused, &path).context("[fuse]")?;
            println!("fused {} pairs -> {}", fused.len(), path.display());
        }
        Command::Evaluate {
            scores,
            fused,
            matcher,
            variant,
        } => {
            let (records, matcher_id) = match (scores, fused) {
                (Some(path), None) => (read_scores_csv(path).context("[evaluate]")?, matcher.clone()),
                (None, Some(path)) => (read_fused_csv(path).context("[evaluate]")?, "fused".to_string()),
                _ => bail!("[evaluate] pass exactly one of --scores or --fused"),
            };
            let report =
                build_report(&records, &matcher_id, (*variant).into()).context("[evaluate]")?;
            let base = format!("{matcher_id}-{}", report.variant);
            let report_path = cli.out_dir.join(format!("report-{base}.json"));
            report.save_json(&report_path).context("[evaluate]")?;
            report
                .save_roc_csv(&cli.out_dir.join(format!("roc-{base}.csv")))
                .context("[evaluate]")?;
            write_roc_svg(&report, &cli.out_dir.join(format!("roc-{base}.svg")))
                .context("[evaluate]")?;
            let genuine: Vec<f64> = records
                .iter()
                .filter(|r| r.label == periocular_core::data::PairLabel::Genuine)
                .filter_map(|r| score_of(r, &matcher_id))
                .collect();
            let impostor: Vec<f64> = records
                .iter()
                .filter(|r| r.label == periocular_core::data::PairLabel::Impostor)
                .filter_map(|r| score_of(r, &matcher_id))
                .collect();
            write_histograms_svg(
                &genuine,
                &impostor,
                &format!("{matcher_id} scores"),
                &cli.out_dir.join(format!("hist-{base}.svg")),
            )
            .context("[evaluate]")?;
            print_report(&report);
            println!("report -> {}", report_path.display());
        }
        Command::Compare { report_a, report_b } => {
            let a = VerificationReport::load_json(report_a).context("[compare]")?;
            let b = VerificationReport::load_json(report_b).context("[compare]")?;
            let summary = compare_reports(&a, &b)?;
            let path = cli
                .out_dir
                .join(format!("comparison-{}.json", summary.matcher_id));
            std::fs::write(&path, serde_json::to_string_pretty(&summary)?)
                .context("[compare]")?;
            println!(
                "{}: AUC {:.4} -> {:.4} ({})",
                summary.matcher_id,
                summary.auc_a,
                summary.auc_b,
                summary
                    .auc_gain_percent
                    .map(|p| format!("{p:+}%"))
                    .unwrap_or_else(|| "n/a".into())
            );
            match (summary.decidability_a, summary.decidability_b) {
                (Some(da), Some(db)) => println!(
                    "{}: decidability {:.4} -> {:.4} ({})",
                    summary.matcher_id,
                    da,
                    db,
                    summary
                        .decidability_gain_percent
                        .map(|p| format!("{p:+}%"))
                        .unwrap_or_else(|| "n/a".into())
                ),
                _ => println!("{}: decidability unavailable", summary.matcher_id),
            }
            println!("comparison -> {}", path.display());
        }
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load_json(config)?;
            // global flags override file values
            if cli.cache_dir != PathBuf::from("cache") {
                cfg.cache_dir = cli.cache_dir.clone();
            }
            if cli.out_dir != PathBuf::from("out") {
                cfg.out_dir = cli.out_dir.clone();
            }
            if cli.seed != 0 {
                cfg.seed = cli.seed;
            }
            let artifacts = run_experiment(&cfg)?;
            println!(
                "pairs: {} genuine / {} impostor",
                artifacts.genuine_pairs, artifacts.impostor_pairs
            );
            for ((matcher, variant), report) in &artifacts.reports {
                println!(
                    "{matcher} ({variant}): AUC {:.4}, decidability {}, EER {:.4}",
                    report.auc,
                    report
                        .decidability
                        .map(|d| format!("{d:.4}"))
                        .unwrap_or_else(|| "inf".into()),
                    report.eer
                );
            }
            for summary in artifacts.comparisons.values() {
                println!(
                    "{}: decidability gain {}",
                    summary.matcher_id,
                    summary
                        .decidability_gain_percent
                        .map(|p| format!("{p:+}%"))
                        .unwrap_or_else(|| "n/a".into())
                );
            }
            println!("artifacts -> {}", artifacts.out_dir.display());
        }
    }
    Ok(())
}

fn score_of(r: &periocular_core::matching::ScoreRecord, matcher_id: &str) -> Option<f64> {
    if matcher_id == "fused" {
        r.fused_score
    } else {
        r.matcher_scores.get(matcher_id).copied()
    }
}

fn print_report(report: &VerificationReport) {
    println!(
        "{} ({}): AUC {:.4}, decidability {}, EER {:.4}, {} genuine / {} impostor",
        report.matcher_id,
        report.variant,
        report.auc,
        report
            .decidability
            .map(|d| format!("{d:.4}"))
            .unwrap_or_else(|| "inf".into()),
        report.eer,
        report.n_genuine,
        report.n_impostor
    );
}
