//! Command-line front end. Each subcommand parses flags, loads inputs,
//! calls one library operation and writes its output.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 I/O error.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::ann::{
    binarise_lsh, generate_synthetic, recall_vs_baseline, AnyIndex, BinaryFlatIndex, BinaryIvfIndex, FlatIndex,
    HnswIndex, HnswParams, IndexKind, RecallMode, SearchParams, SyntheticSpec,
};
use crate::bench::{scale_series, time_search, BenchPlan};
use crate::codec;
use crate::dataset::{self, DatasetParts};
use crate::error::{FicoError, Result};
use crate::eval::{eval_category, eval_instance, parse_ks, ApDenominator, CategoryOptions};
use crate::model::{BinaryCodeSet, Direction, Dtype, EmbeddingSet, EvalReport, RankedRetrieval, Task, MISSING};
use crate::similarity::{pairwise, Measure, Representation};

const HELP_WIDTH: usize = 100;

#[derive(Debug, Parser)]
#[command(
    name = "fico",
    version,
    about = "Retrieval evaluation and similarity-search benchmarks for image-text embeddings",
    term_width = HELP_WIDTH
)]
struct Cli {
    /// Worker threads for parallel kernels; 0 uses every core. Falls back to FICO_THREADS
    #[arg(long, global = true, value_name = "N", display_order = 1000)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a query x candidate similarity matrix
    Sim(SimArgs),
    /// Evaluate a similarity matrix
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Create, or load and check, a train/val/test split
    Split(SplitArgs),
    /// Generate clustered Gaussian base and query vectors
    Synth(SynthArgs),
    /// Binarise embeddings with seeded random hyperplanes
    Binarise(BinariseArgs),
    /// Build or query a search index
    #[command(subcommand)]
    Index(IndexCommand),
    /// Run a scale series from a bench plan
    Bench(BenchArgs),
    /// Check an input file and list every violated invariant
    Validate(ValidateArgs),
    /// Replicate a dataset with offset IDs
    Replicate(ReplicateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DtypeArg {
    F32,
    F64,
}

impl From<DtypeArg> for Dtype {
    fn from(d: DtypeArg) -> Dtype {
        match d {
            DtypeArg::F32 => Dtype::F32,
            DtypeArg::F64 => Dtype::F64,
        }
    }
}

fn parse_measure(s: &str) -> std::result::Result<Measure, String> {
    Measure::from_str(s).map_err(|e| e.to_string())
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    match s {
        "i2t" | "t2i" => Direction::from_str(s).map_err(|e| e.to_string()),
        _ => Err(format!("expected i2t or t2i, got {s:?}")),
    }
}

fn parse_kind(s: &str) -> std::result::Result<IndexKind, String> {
    IndexKind::from_str(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Query file (fvecs/dvecs, or bvecs-packed with --codes-bits)
    #[arg(long, value_name = "F")]
    queries: PathBuf,
    /// Candidate file, same format as the queries
    #[arg(long, value_name = "F")]
    candidates: PathBuf,
    /// hamming, ip, cosine or l2
    #[arg(long, value_parser = parse_measure)]
    measure: Measure,
    /// Output similarity matrix
    #[arg(long, value_name = "F")]
    out: PathBuf,
    /// Read both inputs as packed codes of this many bits
    #[arg(long, value_name = "L")]
    codes_bits: Option<usize>,
    /// Element type of vector inputs
    #[arg(long, value_enum, default_value = "f32")]
    dtype: DtypeArg,
    /// Query ID list (default: <queries>.ids if present, else 0..n)
    #[arg(long, value_name = "F")]
    query_ids: Option<PathBuf>,
    /// Candidate ID list (default: <candidates>.ids if present, else 0..n)
    #[arg(long, value_name = "F")]
    cand_ids: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Instance-level recall against caption groups
    Instance(EvalInstanceArgs),
    /// Category-level mAP and precision against label sets
    Category(EvalCategoryArgs),
}

#[derive(Debug, Args)]
struct EvalInstanceArgs {
    /// Similarity matrix with queries as rows
    #[arg(long, value_name = "F")]
    sim: PathBuf,
    /// Image-to-captions groups (jsonl)
    #[arg(long, value_name = "F")]
    groups: PathBuf,
    /// i2t (image queries) or t2i (caption queries)
    #[arg(long, value_parser = parse_direction)]
    direction: Direction,
    /// Comma-separated cutoffs; N means every candidate
    #[arg(long, value_name = "LIST", default_value = "1,5,10")]
    k: String,
    /// Evaluate the transpose of the matrix (rows become candidates)
    #[arg(long)]
    transpose: bool,
    /// Include the rank of the first relevant candidate for every query
    #[arg(long)]
    per_query: bool,
    /// Output report
    #[arg(long, value_name = "F")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ApDenominatorArg {
    /// Relevant items found within the top k
    Hits,
    /// min(k, total relevant)
    MinK,
}

#[derive(Debug, Args)]
struct EvalCategoryArgs {
    /// Similarity matrix with queries as rows
    #[arg(long, value_name = "F")]
    sim: PathBuf,
    /// Query labels (jsonl)
    #[arg(long, value_name = "F")]
    query_labels: PathBuf,
    /// Candidate labels (jsonl)
    #[arg(long, value_name = "F")]
    cand_labels: PathBuf,
    /// Comma-separated cutoffs; N means every candidate
    #[arg(long, value_name = "LIST", default_value = "10,100,N")]
    k: String,
    /// Also report the 11-point interpolated precision-recall curve
    #[arg(long)]
    pr_curve: bool,
    /// Normaliser of AP@k
    #[arg(long, value_enum, default_value = "hits")]
    ap_denominator: ApDenominatorArg,
    /// Number of categories (default: 1 + largest label seen)
    #[arg(long, value_name = "C")]
    num_categories: Option<u32>,
    /// Include AP at the largest k for every query
    #[arg(long)]
    per_query: bool,
    /// Output report
    #[arg(long, value_name = "F")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scheme {
    Karpathy,
    Stratified,
    Load,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Image ID list, one per line (stratified: defaults to the label IDs)
    #[arg(long, value_name = "F")]
    ids: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: Scheme,
    /// Test images
    #[arg(long, value_name = "N", default_value_t = 0)]
    test: usize,
    /// Validation images
    #[arg(long, value_name = "N", default_value_t = 0)]
    val: usize,
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    /// Image labels (jsonl), required by the stratified scheme
    #[arg(long, value_name = "F")]
    labels: Option<PathBuf>,
    /// Existing split-json, required by the load scheme
    #[arg(long, value_name = "F")]
    split: Option<PathBuf>,
    /// Caption groups; with --captions-out, writes the caption-level split
    #[arg(long, value_name = "F", requires = "captions_out")]
    groups: Option<PathBuf>,
    /// Caption-level split output
    #[arg(long, value_name = "F", requires = "groups")]
    captions_out: Option<PathBuf>,
    /// Image-level split output
    #[arg(long, value_name = "F")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_name = "N")]
    n_base: usize,
    #[arg(long, value_name = "N")]
    n_query: usize,
    #[arg(long, value_name = "D")]
    dim: usize,
    /// Number of cluster centres
    #[arg(long, value_name = "C")]
    clusters: usize,
    /// Standard deviation of points around their centre
    #[arg(long, value_name = "X")]
    noise: f64,
    /// Standard deviation of the centres
    #[arg(long, value_name = "X", default_value_t = 1.0)]
    center_std: f64,
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    /// Base vectors output (fvecs)
    #[arg(long, value_name = "F")]
    out_base: PathBuf,
    /// Query vectors output (fvecs)
    #[arg(long, value_name = "F")]
    out_query: PathBuf,
}

#[derive(Debug, Args)]
struct BinariseArgs {
    /// Input vectors (fvecs/dvecs)
    #[arg(long = "in", value_name = "F")]
    input: PathBuf,
    /// Code length, a multiple of 8
    #[arg(long, value_name = "B")]
    bits: usize,
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "f32")]
    dtype: DtypeArg,
    /// Output codes (bvecs-packed)
    #[arg(long, value_name = "F")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum IndexCommand {
    /// Build an index and save it
    Build(IndexBuildArgs),
    /// Search a saved index
    Search(IndexSearchArgs),
}

#[derive(Debug, Args)]
struct IndexBuildArgs {
    /// flat, bflat, bivf or hnsw
    #[arg(long = "type", value_parser = parse_kind)]
    kind: IndexKind,
    /// Base data: vectors for flat/hnsw, packed codes for bflat/bivf
    #[arg(long, value_name = "F")]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "f32")]
    dtype: DtypeArg,
    /// Code length of packed-code data
    #[arg(long, value_name = "L")]
    bits: Option<usize>,
    /// Similarity for flat/hnsw: ip, cosine or l2
    #[arg(long, value_parser = parse_measure, default_value = "ip")]
    measure: Measure,
    /// HNSW links per node
    #[arg(long, value_name = "M", default_value_t = 32)]
    m: usize,
    /// HNSW construction beam width
    #[arg(long, value_name = "EF", default_value_t = 200)]
    ef_construction: usize,
    /// IVF inverted lists
    #[arg(long, value_name = "N", default_value_t = 256)]
    nlist: usize,
    /// IVF training iterations
    #[arg(long, value_name = "N", default_value_t = 10)]
    iters: usize,
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    /// Output index
    #[arg(long, value_name = "F")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IndexSearchArgs {
    /// Saved index
    #[arg(long, value_name = "F")]
    index: PathBuf,
    /// Queries in the representation the index stores
    #[arg(long, value_name = "F")]
    queries: PathBuf,
    #[arg(long, value_enum, default_value = "f32")]
    dtype: DtypeArg,
    /// Results per query
    #[arg(long, value_name = "K", default_value_t = 10)]
    k: usize,
    /// HNSW search beam width (raised to k if smaller)
    #[arg(long, value_name = "EF", default_value_t = 128)]
    ef_search: usize,
    /// IVF lists probed per query
    #[arg(long, value_name = "N", default_value_t = 32)]
    nprobe: usize,
    /// Timed passes
    #[arg(long, value_name = "N", default_value_t = 1)]
    repeats: usize,
    /// Untimed passes before timing
    #[arg(long, value_name = "N", default_value_t = 0)]
    warmups: usize,
    /// Ranked results output (jsonl)
    #[arg(long, value_name = "F")]
    out: PathBuf,
    /// Ranked results of an exhaustive search to score recall against
    #[arg(long, value_name = "F", requires = "report")]
    baseline: Option<PathBuf>,
    /// Recall cutoffs used with --baseline
    #[arg(long, value_name = "LIST", default_value = "1")]
    recall_k: String,
    /// Report with timings (and recall when --baseline is given)
    #[arg(long, value_name = "F")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Bench plan (json)
    #[arg(long, value_name = "F")]
    plan: PathBuf,
    /// Memory budget per tier in GiB; overrides the plan
    #[arg(long, value_name = "G")]
    budget_gib: Option<f64>,
    /// Directory for per-run reports, series.json and series.csv
    #[arg(long, value_name = "D")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Embeddings,
    Codes,
    Labels,
    Groups,
    Split,
    Sim,
    Report,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long = "in", value_name = "F")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "f32")]
    dtype: DtypeArg,
    /// Code length (codes)
    #[arg(long, value_name = "L")]
    bits: Option<usize>,
    /// Number of categories (labels)
    #[arg(long, value_name = "C")]
    num_categories: Option<u32>,
    /// ID universe the split must cover exactly (split)
    #[arg(long, value_name = "F")]
    ids: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplicateArgs {
    /// Copies of every sample (1 keeps the data as is)
    #[arg(long, value_name = "N")]
    factor: usize,
    /// Vector files to replicate (repeatable)
    #[arg(long, value_name = "F")]
    embeddings: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "f32")]
    dtype: DtypeArg,
    /// Packed-code files to replicate (repeatable, needs --bits)
    #[arg(long, value_name = "F")]
    codes: Vec<PathBuf>,
    #[arg(long, value_name = "L")]
    bits: Option<usize>,
    /// Label files to replicate (repeatable)
    #[arg(long, value_name = "F")]
    labels: Vec<PathBuf>,
    /// Caption groups to replicate
    #[arg(long, value_name = "F")]
    groups: Option<PathBuf>,
    /// Output directory; files keep their names
    #[arg(long, value_name = "D")]
    out_dir: PathBuf,
}

/// Invocation context recorded in reports.
struct Ctx {
    argv: Vec<String>,
}

impl Ctx {
    /// Stamps argv, seed and SHA-256 digests of the named inputs.
    fn provenance(&self, report: &mut EvalReport, seed: Option<u64>, inputs: &[(&str, &Path)]) -> Result<()> {
        report.set_meta("argv", self.argv.clone());
        if let Some(s) = seed {
            report.set_meta("seed", s);
        }
        let mut digests = serde_json::Map::new();
        for (name, path) in inputs {
            digests.insert((*name).to_owned(), Value::String(codec::file_digest(path)?));
        }
        report.set_meta("inputs", Value::Object(digests));
        Ok(())
    }
}

/// argv without the program path and without `--threads`, which must not
/// change any report byte.
fn recorded_argv(args: &[String]) -> Vec<String> {
    let mut out = vec!["fico".to_owned()];
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--threads" {
            it.next();
        } else if !a.starts_with("--threads=") {
            out.push(a.clone());
        }
    }
    out
}

/// Full help for the program and every subcommand, as checked by the golden test.
pub fn help_text() -> String {
    fn walk(cmd: &mut clap::Command, path: &str, out: &mut String) {
        out.push_str(&format!("==> {path}\n"));
        out.push_str(&cmd.render_long_help().to_string());
        out.push('\n');
        let names: Vec<String> = cmd.get_subcommands().map(|c| c.get_name().to_owned()).collect();
        for name in names {
            if name == "help" {
                continue;
            }
            let sub = cmd.find_subcommand_mut(&name).expect("listed subcommand");
            walk(sub, &format!("{path} {name}"), out);
        }
    }
    let mut cmd = Cli::command();
    cmd.build();
    let mut out = String::new();
    walk(&mut cmd, "fico", &mut out);
    out
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match cli.threads {
        Some(t) => t,
        None => match std::env::var("FICO_THREADS") {
            Ok(v) => match v.trim().parse() {
                Ok(t) => t,
                Err(_) => {
                    eprintln!("error: FICO_THREADS must be a non-negative integer, got {v:?}");
                    return 1;
                }
            },
            Err(_) => 0,
        },
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 1;
        }
    };
    let ctx = Ctx { argv: recorded_argv(&args) };
    match pool.install(|| dispatch(cli.command, &ctx)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command, ctx: &Ctx) -> Result<i32> {
    match cmd {
        Command::Sim(a) => cmd_sim(a),
        Command::Eval(EvalCommand::Instance(a)) => cmd_eval_instance(a, ctx),
        Command::Eval(EvalCommand::Category(a)) => cmd_eval_category(a, ctx),
        Command::Split(a) => cmd_split(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Binarise(a) => cmd_binarise(a),
        Command::Index(IndexCommand::Build(a)) => cmd_index_build(a),
        Command::Index(IndexCommand::Search(a)) => cmd_index_search(a, ctx),
        Command::Bench(a) => cmd_bench(a, ctx),
        Command::Validate(a) => cmd_validate(a),
        Command::Replicate(a) => cmd_replicate(a),
    }
}

fn ids_for(data: &Path, explicit: Option<&Path>) -> Result<Option<Vec<u64>>> {
    if let Some(p) = explicit {
        return codec::read_ids(p).map(Some);
    }
    let side = codec::sidecar_path(data);
    if side.exists() {
        codec::read_ids(&side).map(Some)
    } else {
        Ok(None)
    }
}

fn load_vectors(path: &Path, dtype: Dtype, ids: Option<&Path>) -> Result<EmbeddingSet> {
    let ids = ids_for(path, ids)?;
    codec::read_vectors(path, dtype, ids.as_deref())
}

fn load_codes(path: &Path, bits: usize, ids: Option<&Path>) -> Result<BinaryCodeSet> {
    let ids = ids_for(path, ids)?;
    codec::read_codes(path, bits, ids.as_deref())
}

fn cmd_sim(a: SimArgs) -> Result<i32> {
    let m = match a.codes_bits {
        Some(bits) => {
            let q = load_codes(&a.queries, bits, a.query_ids.as_deref())?;
            let c = load_codes(&a.candidates, bits, a.cand_ids.as_deref())?;
            pairwise(Representation::Codes(&q), Representation::Codes(&c), a.measure)?
        }
        None => {
            let q = load_vectors(&a.queries, a.dtype.into(), a.query_ids.as_deref())?;
            let c = load_vectors(&a.candidates, a.dtype.into(), a.cand_ids.as_deref())?;
            pairwise(Representation::Dense(&q), Representation::Dense(&c), a.measure)?
        }
    };
    codec::write_sim(&m, &a.out)?;
    Ok(0)
}

fn resolve_ks(spec: &str, n: usize) -> Result<Vec<usize>> {
    let (mut ks, include_n) = parse_ks(spec)?;
    if include_n {
        ks.push(n);
    }
    Ok(ks)
}

fn cmd_eval_instance(a: EvalInstanceArgs, ctx: &Ctx) -> Result<i32> {
    let mut sim = codec::read_sim(&a.sim)?;
    if a.transpose {
        sim = sim.transposed();
    }
    let groups = codec::read_groups(&a.groups)?;
    let ks = resolve_ks(&a.k, sim.n_candidates())?;
    let mut report = eval_instance(&sim, &groups, a.direction, &ks)?;
    if !a.per_query {
        report.per_query = None;
    }
    report.set_meta("transposed", a.transpose);
    ctx.provenance(&mut report, None, &[("sim", &a.sim), ("groups", &a.groups)])?;
    codec::write_report(&report, &a.out)?;
    Ok(0)
}

fn cmd_eval_category(a: EvalCategoryArgs, ctx: &Ctx) -> Result<i32> {
    let sim = codec::read_sim(&a.sim)?;
    let ql = codec::read_labels(&a.query_labels, a.num_categories)?;
    let cl = codec::read_labels(&a.cand_labels, a.num_categories)?;
    let (ks, include_n) = parse_ks(&a.k)?;
    let opts = CategoryOptions {
        include_n,
        pr_curve: a.pr_curve,
        ap_denominator: match a.ap_denominator {
            ApDenominatorArg::Hits => ApDenominator::HitsInTopK,
            ApDenominatorArg::MinK => ApDenominator::MinKTotalRelevant,
        },
        per_query: a.per_query,
    };
    let mut report = eval_category(&sim, &ql, &cl, &ks, &opts)?;
    ctx.provenance(
        &mut report,
        None,
        &[("sim", &a.sim), ("query_labels", &a.query_labels), ("cand_labels", &a.cand_labels)],
    )?;
    codec::write_report(&report, &a.out)?;
    Ok(0)
}

fn cmd_split(a: SplitArgs) -> Result<i32> {
    let universe = a.ids.as_deref().map(codec::read_ids).transpose()?;
    let split = match a.scheme {
        Scheme::Karpathy => {
            let ids = universe.as_deref().ok_or_else(|| FicoError::invalid("--ids is required for karpathy"))?;
            dataset::karpathy_split(ids, a.test, a.val, a.seed)?
        }
        Scheme::Stratified => {
            let path = a.labels.as_deref().ok_or_else(|| FicoError::invalid("--labels is required for stratified"))?;
            let labels = codec::read_labels(path, None)?;
            let ids = match &universe {
                Some(ids) => ids.clone(),
                None => labels.entries().keys().copied().collect(),
            };
            dataset::stratified_split(&ids, &labels, a.test, a.val, a.seed)?
        }
        Scheme::Load => {
            let path = a.split.as_deref().ok_or_else(|| FicoError::invalid("--split is required for load"))?;
            let split = codec::read_split(path)?;
            if let Some(ids) = &universe {
                dataset::check_alignment(&split, ids)?;
            }
            split
        }
    };
    codec::write_split(&split, &a.out)?;
    if let (Some(g), Some(out)) = (&a.groups, &a.captions_out) {
        let groups = codec::read_groups(g)?;
        codec::write_split(&dataset::project_split(&split, &groups)?, out)?;
    }
    let method = match a.scheme {
        Scheme::Karpathy => "seeded_shuffle",
        Scheme::Stratified => "greedy_category_balance",
        Scheme::Load => "loaded",
    };
    let summary = json!({
        "method": method,
        "seed": a.seed,
        "test": split.test.len(),
        "train": split.train.len(),
        "val": split.val.len(),
    });
    println!("{}", codec::canonical_json(&summary)?);
    Ok(0)
}

fn cmd_synth(a: SynthArgs) -> Result<i32> {
    let spec = SyntheticSpec {
        n_base: a.n_base,
        n_query: a.n_query,
        dim: a.dim,
        n_clusters: a.clusters,
        sigma_c: a.center_std,
        sigma_n: a.noise,
        seed: a.seed,
    };
    let (base, queries) = generate_synthetic(&spec)?;
    codec::write_vectors(&base, &a.out_base)?;
    codec::write_vectors(&queries, &a.out_query)?;
    Ok(0)
}

fn cmd_binarise(a: BinariseArgs) -> Result<i32> {
    let set = load_vectors(&a.input, a.dtype.into(), None)?;
    let codes = binarise_lsh(&set, a.bits, a.seed)?;
    codec::write_codes(&codes, &a.out)?;
    Ok(0)
}

fn cmd_index_build(a: IndexBuildArgs) -> Result<i32> {
    let index = if a.kind.is_binary() {
        let bits = a.bits.ok_or_else(|| FicoError::invalid(format!("--bits is required for {}", a.kind)))?;
        let codes = load_codes(&a.data, bits, None)?;
        match a.kind {
            IndexKind::BinaryFlat => AnyIndex::BinaryFlat(BinaryFlatIndex::build(codes)),
            _ => AnyIndex::BinaryIvf(BinaryIvfIndex::train(codes, a.nlist, a.iters, a.seed)?),
        }
    } else {
        let data = load_vectors(&a.data, a.dtype.into(), None)?;
        match a.kind {
            IndexKind::Flat => AnyIndex::Flat(FlatIndex::build(data, a.measure)?),
            _ => AnyIndex::Hnsw(HnswIndex::build(
                data,
                a.measure,
                HnswParams { m: a.m, ef_construction: a.ef_construction, seed: a.seed },
            )?),
        }
    };
    index.save(&a.out)?;
    Ok(0)
}

fn code_bits(index: &AnyIndex) -> Option<usize> {
    match index {
        AnyIndex::BinaryFlat(i) => Some(i.codes().code_bits()),
        AnyIndex::BinaryIvf(i) => Some(i.codes().code_bits()),
        _ => None,
    }
}

/// Maps candidate IDs of two ranked files onto shared column numbers.
fn interned_pair(a: &codec::RankedFile, b: &codec::RankedFile) -> Result<(RankedRetrieval, RankedRetrieval)> {
    let mut table: HashMap<u64, u32> = HashMap::new();
    let mut conv = |f: &codec::RankedFile| -> Result<RankedRetrieval> {
        let cols = f
            .ids
            .iter()
            .map(|id| match id {
                Some(id) => {
                    let next = table.len() as u32;
                    *table.entry(*id).or_insert(next)
                }
                None => MISSING,
            })
            .collect();
        let scores = f.scores.iter().map(|s| s.unwrap_or(f32::NEG_INFINITY)).collect();
        RankedRetrieval::new(f.k, f.query_ids.clone(), cols, scores)
    };
    Ok((conv(a)?, conv(b)?))
}

fn cmd_index_search(a: IndexSearchArgs, ctx: &Ctx) -> Result<i32> {
    let index = AnyIndex::load(&a.index)?;
    let params = SearchParams { ef_search: a.ef_search, nprobe: a.nprobe };
    let (stats, res) = match code_bits(&index) {
        Some(bits) => {
            let q = load_codes(&a.queries, bits, None)?;
            time_search(&index, Representation::Codes(&q), a.k, &params, a.repeats, a.warmups)?
        }
        None => {
            let q = load_vectors(&a.queries, a.dtype.into(), None)?;
            time_search(&index, Representation::Dense(&q), a.k, &params, a.repeats, a.warmups)?
        }
    };
    codec::write_ranked(&res, index.candidate_ids(), &a.out)?;
    let Some(report_path) = &a.report else { return Ok(0) };
    let mut inputs: Vec<(&str, &Path)> = vec![("index", &a.index), ("queries", &a.queries)];
    let mut report = match &a.baseline {
        Some(b) => {
            let ks: Vec<usize> = parse_ks(&a.recall_k)?.0;
            let (r, base) = interned_pair(&codec::read_ranked(&a.out)?, &codec::read_ranked(b)?)?;
            inputs.push(("baseline", b));
            let mut rep = recall_vs_baseline(&r, &base, &ks, RecallMode::TopOneContainment)?;
            rep.set_meta("baseline", "ranked file");
            rep
        }
        None => EvalReport::new(Task::Bench, Direction::NotApplicable),
    };
    stats.write_into(&mut report);
    report.set_meta("index_type", index.kind().tag());
    report.set_meta("k", a.k);
    report.set_meta("results_digest", res.digest());
    report.set_meta("timing_scope", "search only, data resident in memory");
    match index.kind() {
        IndexKind::Hnsw => report.set_meta("ef_search", a.ef_search.max(a.k)),
        IndexKind::BinaryIvf => report.set_meta("nprobe", a.nprobe),
        _ => {}
    }
    ctx.provenance(&mut report, None, &inputs)?;
    codec::write_report(&report, report_path)?;
    Ok(0)
}

fn cmd_bench(a: BenchArgs, ctx: &Ctx) -> Result<i32> {
    let text = std::fs::read_to_string(&a.plan).map_err(|e| FicoError::io(&a.plan, e))?;
    let plan = BenchPlan::from_json(&text)?;
    let series = scale_series(&plan, &a.out_dir, a.budget_gib)?;
    // stamp provenance into every per-run report as well
    let inputs = [("plan", a.plan.as_path())];
    for row in &series.rows {
        let path = row.report_path(&a.out_dir);
        let mut r = codec::read_report(&path)?;
        ctx.provenance(&mut r, Some(plan.seed), &inputs)?;
        codec::write_report(&r, &path)?;
    }
    let dnf = series.rows.iter().filter(|r| r.dnf).count();
    let summary = json!({"rows": series.rows.len(), "dnf": dnf, "argv": ctx.argv, "plan_digest": codec::file_digest(&a.plan)?});
    println!("{}", codec::canonical_json(&summary)?);
    Ok(0)
}

fn cmd_validate(a: ValidateArgs) -> Result<i32> {
    let dtype: Dtype = a.dtype.into();
    let outcome: Result<Vec<String>> = match a.kind {
        Kind::Embeddings => load_vectors(&a.input, dtype, None).map(|_| Vec::new()),
        Kind::Codes => match a.bits {
            Some(bits) => load_codes(&a.input, bits, None).map(|_| Vec::new()),
            None => return Err(FicoError::invalid("--bits is required for codes")),
        },
        Kind::Labels => codec::read_labels(&a.input, a.num_categories).and_then(|l| l.validate().into_result()),
        Kind::Groups => codec::read_groups(&a.input).map(|_| Vec::new()),
        Kind::Split => codec::read_split(&a.input).and_then(|s| {
            let universe = a.ids.as_deref().map(codec::read_ids).transpose()?;
            s.validate(universe.as_deref()).into_result()
        }),
        Kind::Sim => codec::read_sim(&a.input).and_then(|s| s.validate().into_result()),
        Kind::Report => codec::read_report(&a.input).and_then(|r| r.validate().into_result()),
    };
    match outcome {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            println!("ok");
            Ok(0)
        }
        Err(FicoError::Validation(v)) => {
            for x in v {
                println!("{x}");
            }
            Ok(1)
        }
        Err(e) if e.is_io() => Err(e),
        Err(e) => {
            println!("{e}");
            Ok(1)
        }
    }
}

fn cmd_replicate(a: ReplicateArgs) -> Result<i32> {
    let mut parts = DatasetParts::default();
    for p in &a.embeddings {
        parts.embeddings.push(load_vectors(p, a.dtype.into(), None)?);
    }
    if !a.codes.is_empty() {
        let bits = a.bits.ok_or_else(|| FicoError::invalid("--bits is required with --codes"))?;
        for p in &a.codes {
            parts.codes.push(load_codes(p, bits, None)?);
        }
    }
    for p in &a.labels {
        parts.labels.push(codec::read_labels(p, None)?);
    }
    if let Some(g) = &a.groups {
        parts.groups = Some(codec::read_groups(g)?);
    }
    let inputs: Vec<&PathBuf> = a.embeddings.iter().chain(&a.codes).chain(&a.labels).chain(&a.groups).collect();
    if inputs.is_empty() {
        return Err(FicoError::invalid("nothing to replicate"));
    }
    let mut names: Vec<&std::ffi::OsStr> = Vec::new();
    for p in &inputs {
        let name = p.file_name().ok_or_else(|| FicoError::invalid(format!("{} has no file name", p.display())))?;
        if names.contains(&name) {
            return Err(FicoError::invalid(format!("two inputs share the file name {}", name.to_string_lossy())));
        }
        names.push(name);
    }
    let out = dataset::replicate(&parts, a.factor)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| FicoError::io(&a.out_dir, e))?;
    let dest = |p: &PathBuf| a.out_dir.join(p.file_name().expect("checked above"));
    for (set, p) in out.embeddings.iter().zip(&a.embeddings) {
        codec::write_vectors(set, &dest(p))?;
    }
    for (codes, p) in out.codes.iter().zip(&a.codes) {
        codec::write_codes(codes, &dest(p))?;
    }
    for (labels, p) in out.labels.iter().zip(&a.labels) {
        codec::write_labels(labels, &dest(p))?;
    }
    if let (Some(g), Some(p)) = (&out.groups, &a.groups) {
        codec::write_groups(g, &dest(p))?;
    }
    Ok(0)
}
