//! One binary for the whole toolkit: building gazetteer indexes, profiling
//! caption datasets, scoring resolution methods, synthesizing testsets,
//! training the presence filter, and computing the standalone metrics.
//!
//! Every command writes its result to a file; stdout carries summaries only.
//! Exit codes: 0 success, 1 any error, 2 a profile whose provider-error rate
//! reached the configured ceiling.

mod config;
mod pipeline;

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use geoprofile::entity_filter::{
    f1_score, fleiss_kappa, majority_label, overall_agreement, pairwise_agreement,
    predict_presence, train_classifier, AnnotationMatrix,
};
use geoprofile::eval::{
    evaluate_method_with, load_templates, load_testset, shipped_templates, synthesize_geo_testset,
    write_comparison_csv, write_testset, Averaging, ComparisonRow,
};
use geoprofile::gazetteer::{load_gazetteer, source_checksum, write_index_cache, CountryTable};
use geoprofile::geolocate::{CaptionRecord, Method};
use geoprofile::metrics::{
    knn_precision_recall, misalignment, spearman_with, vendi_score_with_path, CountryDistribution,
    EmbeddingSet, PValueMode, VendiPath, VENDI_SUBSAMPLE_CAP,
};

use config::RunConfig;
use pipeline::{
    build_geolocator, load_index, read_count_csv, run_profile, ProviderHandle, TableHandle,
};

#[derive(Parser)]
#[command(
    name = "geoprofile",
    version,
    about = "Geographic profiling of image-caption datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a GeoNames TSV into a reusable binary index
    BuildGazetteer {
        /// GeoNames-format TSV file
        #[arg(long)]
        source: PathBuf,
        /// Drop populated places below this population (0 keeps everything)
        #[arg(long, default_value_t = 0)]
        min_population: u64,
        /// Where to write the index
        #[arg(long)]
        output: PathBuf,
    },
    /// Resolve captions to countries and write the full profile report
    Profile {
        /// Run configuration (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Stop the prediction pass after this many records (testing aid)
        #[arg(long, hide = true)]
        stop_after: Option<u64>,
    },
    /// Score resolution methods against a gold testset
    Eval {
        /// Run configuration supplying the gazetteer and provider
        #[arg(long)]
        config: PathBuf,
        /// Gold testset (JSONL: caption, gold_country, origin)
        #[arg(long)]
        testset: PathBuf,
        /// Methods to score, comma-separated; defaults to the configured one
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Average per-country scores instead of pooling all decisions
        #[arg(long = "macro")]
        macro_average: bool,
        /// Where to write the comparison CSV
        #[arg(long)]
        output: PathBuf,
    },
    /// Build a synthetic gold testset from caption templates
    SynthTestset {
        /// GeoNames TSV or a built index
        #[arg(long)]
        gazetteer: PathBuf,
        /// Template JSONL; defaults to the built-in template set
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Only use places at least this populous
        #[arg(long, default_value_t = 10000)]
        min_population: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the testset JSONL
        #[arg(long)]
        output: PathBuf,
    },
    /// Distribution and diversity metrics over saved artifacts
    Metrics {
        #[command(subcommand)]
        metric: MetricCommand,
    },
    /// Agreement statistics for a human-annotation vote matrix
    AnnotateStats {
        /// Votes CSV: `record_id,rater_id,vote` rows, vote 0 or 1
        #[arg(long)]
        votes: PathBuf,
        /// Where to write the statistics JSON
        #[arg(long)]
        output: PathBuf,
    },
    /// Train the entity-presence classifier from labeled embeddings
    TrainFilter {
        /// Embedding set with one row per labeled example
        #[arg(long)]
        embeddings: PathBuf,
        /// Text file of 0/1 labels, one per embedding row
        #[arg(long)]
        labels: PathBuf,
        /// Soft-margin strength
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Fraction of rows held out for scoring (0 trains on everything)
        #[arg(long, default_value_t = 0.0)]
        holdout_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the trained model
        #[arg(long)]
        model_out: PathBuf,
        /// Where to write the training stats JSON
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum MetricCommand {
    /// Effective number of distinct samples in an embedding set
    Vendi {
        #[arg(long)]
        embeddings: PathBuf,
        /// Subsample cap; sets larger than this are seeded-sampled down
        #[arg(long, default_value_t = VENDI_SUBSAMPLE_CAP)]
        cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Eigendecomposition route
        #[arg(long, value_enum, default_value_t = VendiPathArg::Auto)]
        path: VendiPathArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Over- and under-represented countries versus a reference distribution
    Misalign {
        /// Dataset counts CSV (country,count)
        #[arg(long)]
        dataset: PathBuf,
        /// Reference counts CSV (country,count)
        #[arg(long)]
        reference: PathBuf,
        /// Representation ratio beyond which a country is flagged
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Manifold precision/recall between two embedding sets
    Pr {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        /// Neighborhood size
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rank correlation between the two columns of a CSV
    Spearman {
        /// CSV with header `x,y` and one numeric pair per row
        #[arg(long)]
        pairs: PathBuf,
        /// Use a seeded permutation test with this many iterations instead
        /// of the t-approximation
        #[arg(long)]
        permutation: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VendiPathArg {
    Auto,
    Kernel,
    Surrogate,
}

impl From<VendiPathArg> for VendiPath {
    fn from(arg: VendiPathArg) -> VendiPath {
        match arg {
            VendiPathArg::Auto => VendiPath::Auto,
            VendiPathArg::Kernel => VendiPath::Kernel,
            VendiPathArg::Surrogate => VendiPath::Surrogate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::BuildGazetteer { source, min_population, output } => {
            cmd_build_gazetteer(&source, min_population, &output)
        }
        Command::Profile { config, stop_after } => cmd_profile(&config, stop_after),
        Command::Eval { config, testset, methods, macro_average, output } => {
            cmd_eval(&config, &testset, methods, macro_average, &output)
        }
        Command::SynthTestset { gazetteer, templates, min_population, seed, output } => {
            cmd_synth_testset(&gazetteer, templates.as_deref(), min_population, seed, &output)
        }
        Command::Metrics { metric } => cmd_metrics(metric),
        Command::AnnotateStats { votes, output } => cmd_annotate_stats(&votes, &output),
        Command::TrainFilter {
            embeddings,
            labels,
            c,
            holdout_fraction,
            seed,
            model_out,
            output,
        } => cmd_train_filter(&embeddings, &labels, c, holdout_fraction, seed, &model_out, &output),
    }
}

fn cmd_build_gazetteer(source: &Path, min_population: u64, output: &Path) -> anyhow::Result<u8> {
    let bytes =
        fs::read(source).with_context(|| format!("reading gazetteer {}", source.display()))?;
    let checksum = source_checksum(&bytes);

    // An index built from the same bytes at the same floor is already right.
    if let Ok(existing_bytes) = fs::read(output) {
        if let Ok(existing) = geoprofile::gazetteer::read_index_cache(&mut &existing_bytes[..]) {
            if existing.source_sha256() == checksum && existing.min_population() == min_population
            {
                println!(
                    "{} is current: {} entries (source unchanged)",
                    output.display(),
                    existing.len()
                );
                return Ok(0);
            }
        }
    }

    let index = load_gazetteer(&bytes[..], min_population)
        .with_context(|| format!("parsing gazetteer {}", source.display()))?;
    let report = index.report();
    let tmp = output.with_extension("tmp");
    let mut file = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    write_index_cache(&index, &mut file)?;
    file.sync_all()?;
    drop(file);
    fs::rename(&tmp, output)?;
    println!(
        "built {}: {} entries ({} rows skipped, {} below population {})",
        output.display(),
        index.len(),
        report.skipped,
        report.filtered,
        min_population,
    );
    Ok(0)
}

fn cmd_profile(config_path: &Path, stop_after: Option<u64>) -> anyhow::Result<u8> {
    let loaded = RunConfig::load(config_path)?;
    let problems = loaded.config.problems();
    if !problems.is_empty() {
        for problem in &problems {
            eprintln!("config: {problem}");
        }
        bail!("{} problem(s) in {}", problems.len(), config_path.display());
    }
    run_profile(&loaded, stop_after)
}

fn cmd_eval(
    config_path: &Path,
    testset_path: &Path,
    methods: Option<Vec<String>>,
    macro_average: bool,
    output: &Path,
) -> anyhow::Result<u8> {
    let loaded = RunConfig::load(config_path)?;
    let config = &loaded.config;
    let index = load_index(&config.gazetteer.source, Some(config.gazetteer.min_population))?;
    let table = TableHandle::load(config.gazetteer.country_metadata.as_deref())?;
    let table = table.get();
    let provider = ProviderHandle::build(&config.method)?;
    let icl_text = match &config.method.icl_examples {
        Some(path) => Some(
            fs::read_to_string(path)
                .with_context(|| format!("reading icl examples {}", path.display()))?,
        ),
        None => None,
    };

    let file = File::open(testset_path)
        .with_context(|| format!("opening testset {}", testset_path.display()))?;
    let testset = load_testset(BufReader::new(file), table)
        .with_context(|| format!("reading testset {}", testset_path.display()))?;

    let wanted: Vec<Method> = match methods {
        Some(names) => {
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            for name in names {
                let method = Method::from_str(name.trim())
                    .map_err(|e| anyhow::anyhow!("--methods: {e}"))?;
                if seen.insert(method.as_str()) {
                    out.push(method);
                }
            }
            out
        }
        None => vec![config.method.name],
    };
    let averaging = if macro_average { Averaging::Macro } else { Averaging::Micro };

    let mut rows = Vec::new();
    for method in wanted {
        let geolocator = build_geolocator(
            method,
            &index,
            table,
            provider.as_ref().map(|p| p.as_dyn()),
            icl_text.as_deref(),
        )?;
        let score = evaluate_method_with(
            |caption: &str| geolocator.geolocate_caption(&CaptionRecord::new("eval", caption)),
            &testset,
            averaging,
        );
        println!(
            "{}: precision {} recall {} (tp {} fp {} fn {})",
            method,
            fmt_opt(score.precision),
            fmt_opt(score.recall),
            score.true_positives,
            score.false_positives,
            score.false_negatives,
        );
        rows.push(ComparisonRow {
            method: method.as_str().to_string(),
            precision: score.precision,
            recall: score.recall,
        });
    }
    rows.sort_by(|a, b| a.method.cmp(&b.method));
    let file =
        File::create(output).with_context(|| format!("creating {}", output.display()))?;
    write_comparison_csv(&rows, file)?;
    println!("scored {} captions; wrote {}", testset.len(), output.display());
    Ok(0)
}

fn cmd_synth_testset(
    gazetteer: &Path,
    templates_path: Option<&Path>,
    min_population: u64,
    seed: u64,
    output: &Path,
) -> anyhow::Result<u8> {
    let index = load_index(gazetteer, None)?;
    let table = CountryTable::builtin();
    let templates = match templates_path {
        Some(path) => {
            let file = File::open(path)
                .with_context(|| format!("opening templates {}", path.display()))?;
            load_templates(BufReader::new(file))
                .with_context(|| format!("reading templates {}", path.display()))?
        }
        None => shipped_templates(),
    };
    let testset = synthesize_geo_testset(&templates, &index, table, min_population, seed)?;
    let file =
        File::create(output).with_context(|| format!("creating {}", output.display()))?;
    write_testset(&testset, file)?;
    println!(
        "wrote {} captions from {} templates to {}",
        testset.len(),
        templates.len(),
        output.display(),
    );
    Ok(0)
}

fn cmd_metrics(metric: MetricCommand) -> anyhow::Result<u8> {
    match metric {
        MetricCommand::Vendi { embeddings, cap, seed, path, output } => {
            let set = read_embeddings(&embeddings)?;
            let subsampled = set.len() > cap;
            let set = if subsampled { set.subsample(cap, seed) } else { set };
            let score = vendi_score_with_path(&set, path.into())?;
            #[derive(Serialize)]
            struct VendiOut {
                vendi_score: f64,
                rows_used: usize,
                dim: usize,
                subsampled: bool,
            }
            write_json(
                &output,
                &VendiOut { vendi_score: score, rows_used: set.len(), dim: set.dim(), subsampled },
            )?;
            println!("vendi score {score:.4} over {} rows; wrote {}", set.len(), output.display());
        }
        MetricCommand::Misalign { dataset, reference, r, output } => {
            let table = CountryTable::builtin();
            let dataset_counts = read_count_csv(&dataset, table)?;
            let reference_counts = read_count_csv(&reference, table)?;
            let report = misalignment(
                &CountryDistribution::from_counts(dataset_counts),
                &CountryDistribution::from_counts(reference_counts),
                r,
            )?;
            println!(
                "{} countries over, {} under (of {} in the reference, r = {r})",
                report.over.len(),
                report.under.len(),
                report.reference_country_count,
            );
            write_json(&output, &report)?;
            println!("wrote {}", output.display());
        }
        MetricCommand::Pr { real, generated, k, output } => {
            let real_set = read_embeddings(&real)?;
            let generated_set = read_embeddings(&generated)?;
            let (precision, recall) = knn_precision_recall(&real_set, &generated_set, k)?;
            #[derive(Serialize)]
            struct PrOut {
                precision: f64,
                recall: f64,
                k: usize,
                real_rows: usize,
                generated_rows: usize,
            }
            write_json(
                &output,
                &PrOut {
                    precision,
                    recall,
                    k,
                    real_rows: real_set.len(),
                    generated_rows: generated_set.len(),
                },
            )?;
            println!(
                "precision {precision:.4} recall {recall:.4} at k = {k}; wrote {}",
                output.display()
            );
        }
        MetricCommand::Spearman { pairs, permutation, seed, output } => {
            let (x, y) = read_pairs_csv(&pairs)?;
            let mode = match permutation {
                Some(iterations) => PValueMode::Permutation { iterations, seed },
                None => PValueMode::TApproximation,
            };
            let result = spearman_with(&x, &y, mode)?;
            write_json(&output, &result)?;
            println!(
                "rho {:.4} (p = {:.4}, n = {}); wrote {}",
                result.rho,
                result.p_value,
                x.len(),
                output.display()
            );
        }
    }
    Ok(0)
}

fn cmd_annotate_stats(votes: &Path, output: &Path) -> anyhow::Result<u8> {
    let file = File::open(votes).with_context(|| format!("opening votes {}", votes.display()))?;
    let matrix = AnnotationMatrix::from_csv(file)
        .with_context(|| format!("reading votes {}", votes.display()))?;
    let majority_present = (0..matrix.n_items())
        .filter(|&i| matches!(majority_label(matrix.row(i)), Ok(true)))
        .count();
    #[derive(Serialize)]
    struct AgreementOut {
        n_items: usize,
        n_raters: usize,
        overall_agreement: f64,
        fleiss_kappa: f64,
        pairwise_agreement_present: f64,
        pairwise_agreement_absent: f64,
        majority_present: usize,
    }
    let out = AgreementOut {
        n_items: matrix.n_items(),
        n_raters: matrix.n_raters(),
        overall_agreement: overall_agreement(&matrix)?,
        fleiss_kappa: fleiss_kappa(&matrix)?,
        pairwise_agreement_present: pairwise_agreement(&matrix, true)?,
        pairwise_agreement_absent: pairwise_agreement(&matrix, false)?,
        majority_present,
    };
    println!(
        "{} items x {} raters: overall agreement {:.4}, kappa {:.4}",
        out.n_items, out.n_raters, out.overall_agreement, out.fleiss_kappa
    );
    write_json(output, &out)?;
    println!("wrote {}", output.display());
    Ok(0)
}

fn cmd_train_filter(
    embeddings: &Path,
    labels_path: &Path,
    c: f64,
    holdout_fraction: f64,
    seed: u64,
    model_out: &Path,
    output: &Path,
) -> anyhow::Result<u8> {
    let set = read_embeddings(embeddings)?;
    let labels = read_labels(labels_path)?;
    if labels.len() != set.len() {
        bail!("{} labels for {} embedding rows", labels.len(), set.len());
    }
    if !(0.0..1.0).contains(&holdout_fraction) {
        bail!("--holdout-fraction must be in [0, 1), got {holdout_fraction}");
    }

    let n = set.len();
    let (train_idx, holdout_idx) = if holdout_fraction > 0.0 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        // Keep at least two rows to train on.
        let cut = (((n as f64) * holdout_fraction).round() as usize).min(n.saturating_sub(2));
        let (holdout, train) = idx.split_at(cut);
        let mut train = train.to_vec();
        let mut holdout = holdout.to_vec();
        train.sort_unstable();
        holdout.sort_unstable();
        (train, holdout)
    } else {
        ((0..n).collect(), Vec::new())
    };

    let gather = |indices: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
        let rows = indices.iter().map(|&i| set.row(i).to_vec()).collect();
        let golds = indices.iter().map(|&i| labels[i]).collect();
        (rows, golds)
    };
    let (train_rows, train_gold) = gather(&train_idx);
    let train_set = EmbeddingSet::from_rows(&train_rows)?;
    let model = train_classifier(&train_set, &train_gold, c)?;

    let score = |indices: &[usize], gold: &[bool]| -> anyhow::Result<f64> {
        let mut predicted = Vec::with_capacity(indices.len());
        for &i in indices {
            predicted.push(predict_presence(&model, set.row(i))?);
        }
        Ok(f1_score(&predicted, gold)?)
    };
    let f1_train = score(&train_idx, &train_gold)?;
    let f1_holdout = if holdout_idx.is_empty() {
        None
    } else {
        let (_, holdout_gold) = gather(&holdout_idx);
        Some(score(&holdout_idx, &holdout_gold)?)
    };

    let mut file =
        File::create(model_out).with_context(|| format!("creating {}", model_out.display()))?;
    model.write_to(&mut file)?;
    file.sync_all()?;

    #[derive(Serialize)]
    struct TrainOut {
        rows: usize,
        dim: usize,
        c: f64,
        iterations: u64,
        train_rows: usize,
        holdout_rows: usize,
        f1_train: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        f1_holdout: Option<f64>,
    }
    let out = TrainOut {
        rows: n,
        dim: set.dim(),
        c,
        iterations: model.iterations,
        train_rows: train_idx.len(),
        holdout_rows: holdout_idx.len(),
        f1_train,
        f1_holdout,
    };
    match f1_holdout {
        Some(f1) => println!(
            "trained on {} rows, f1 {:.4} train / {:.4} holdout ({} rows)",
            out.train_rows, f1_train, f1, out.holdout_rows
        ),
        None => println!("trained on {} rows, f1 {:.4} on the training set", out.train_rows, f1_train),
    }
    write_json(output, &out)?;
    println!("wrote model {} and stats {}", model_out.display(), output.display());
    Ok(0)
}

fn read_embeddings(path: &Path) -> anyhow::Result<EmbeddingSet> {
    let mut file =
        File::open(path).with_context(|| format!("opening embeddings {}", path.display()))?;
    EmbeddingSet::read_from(&mut file)
        .with_context(|| format!("reading embeddings {}", path.display()))
}

/// Read a 0/1 label file, one label per line, blanks skipped.
fn read_labels(path: &Path) -> anyhow::Result<Vec<bool>> {
    let file = File::open(path).with_context(|| format!("opening labels {}", path.display()))?;
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        match trimmed {
            "" => continue,
            "0" => labels.push(false),
            "1" => labels.push(true),
            other => bail!("{} line {}: expected 0 or 1, got {other:?}", path.display(), i + 1),
        }
    }
    Ok(labels)
}

/// Read a two-column numeric CSV (header required, names free).
fn read_pairs_csv(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path).with_context(|| format!("opening pairs {}", path.display()))?;
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 2;
        let record = record.with_context(|| format!("{} row {row}", path.display()))?;
        if record.len() != 2 {
            bail!("{} row {row}: expected 2 columns, got {}", path.display(), record.len());
        }
        x.push(
            record[0]
                .trim()
                .parse()
                .with_context(|| format!("{} row {row}: bad x value", path.display()))?,
        );
        y.push(
            record[1]
                .trim()
                .parse()
                .with_context(|| format!("{} row {row}: bad y value", path.display()))?,
        );
    }
    Ok((x, y))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut file =
        File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "undefined".into(),
    }
}
