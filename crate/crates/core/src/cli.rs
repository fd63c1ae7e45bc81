//! Command-line harness: dataset generation, timed query and pipeline runs,
//! and cost-model evaluation.

use std::ffi::OsString;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchgen::{
    gen_linear, gen_queries, gen_ssb_scale, gen_star, gen_tree, GenConfig, QueryGroup, QuerySpec,
    Setting,
};
use crate::error::Error;
use crate::exec::{
    compare_results, compare_runs, run_query_laq, run_query_oracle, Pipeline, PipelineMode,
};
use crate::fusion::{
    decide_fusion, speedup_ratio_linear, speedup_ratio_tree, CostInputs, DEFAULT_THRESHOLD,
};
use crate::laqops::DomainCache;
use crate::mlops::{Model, TreeModel};
use crate::report::{checksum_rows, checksum_run, measure, RunRecord, RunReport};
use crate::storage::{Link, Schema, StarSchema, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;

const MANIFEST: &str = "manifest.json";
const QUERIES: &str = "queries.json";

#[derive(Debug, Parser)]
#[command(
    name = "laqfuse",
    version,
    about = "Star-schema queries and fused predictions as sparse linear algebra"
)]
struct Cli {
    /// File of `key=value` lines supplying defaults for long flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a star-schema dataset with its manifest and query set.
    Gen(GenArgs),
    /// Run star queries and report timings.
    Query(QueryArgs),
    /// Run a star join followed by a model, fused or not.
    Pipeline(PipelineArgs),
    /// Evaluate the fusion cost model.
    Cost(CostArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 1)]
    sf: u32,
    /// `1` or `2`.
    #[arg(long, default_value = "2")]
    setting: Setting,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Total feature width spread over the part, supplier and date tables.
    #[arg(long, default_value_t = 16)]
    features: usize,
    /// Fraction of fact foreign keys with no dimension match.
    #[arg(long, default_value_t = 0.0)]
    dangling: f64,
    #[arg(long, default_value_t = 4096)]
    mem_cap_mb: u64,
    /// Add a customer dimension and use the sf-scaled cardinalities of
    /// the standard benchmark.
    #[arg(long)]
    ssb: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Laq,
    Oracle,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct QueryArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Query id (`Q21`), group (`g2`) or `all`.
    #[arg(long, default_value = "all")]
    query: String,
    #[arg(long, value_enum, default_value_t = Engine::Laq)]
    engine: Engine,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    /// Check every result against the reference engine before reporting.
    #[arg(long)]
    verify: bool,
    /// Report path; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Linear,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Fused,
    Nonfused,
    Oracle,
    All,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct PipelineArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Linear)]
    model: ModelKind,
    /// Tree in text form; overrides the generated one.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Output width of a generated linear model.
    #[arg(long, default_value_t = 2)]
    outputs: usize,
    /// Leaf count of a generated tree.
    #[arg(long, default_value_t = 16)]
    leaves: usize,
    /// Distinct features a generated tree may split on (default: all).
    #[arg(long)]
    feature_pool: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    mode: ModeArg,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    #[arg(long)]
    verify: bool,
    /// Keep key domains warm across repetitions.
    #[arg(long)]
    cache: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Overrides the dataset's memory cap.
    #[arg(long)]
    mem_cap_mb: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct CostArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Linear)]
    model: ModelKind,
    /// Fact rows.
    #[arg(long, default_value_t = 6_000_000.0)]
    i: f64,
    /// Model input width.
    #[arg(long, default_value_t = 128.0)]
    k: f64,
    /// Model output width or leaf count.
    #[arg(long, default_value_t = 2.0)]
    l: f64,
    /// Internal node count of a tree (default: `k`).
    #[arg(long)]
    p: Option<f64>,
    /// Dimension row counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "200000,20000,2555")]
    r: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Emit a k-by-l grid of ratios as CSV instead of a single point.
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match splice_config(args) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.cmd {
        Command::Gen(a) => cmd_gen(&a),
        Command::Query(a) => cmd_query(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
        Command::Cost(a) => cmd_cost(&a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Verification(_) => EXIT_VERIFY,
                Error::Capacity(_) => EXIT_CAPACITY,
                _ => EXIT_FAILURE,
            }
        }
    }
}

/// Inserts flags from a `--config` file right after the subcommand so that
/// flags given on the command line, which come later, take precedence.
fn splice_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let extra = parse_config(&text)?;
    let Some(sub) = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
    else {
        return Ok(args);
    };
    let at = sub + 2;
    let mut out = args[..at.min(args.len())].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&args[at.min(args.len())..]);
    Ok(out)
}

/// `key=value` lines to long flags. Blank lines and `#` comments are
/// skipped; `true`/`false` toggle switches.
fn parse_config(text: &str) -> std::result::Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", n + 1))?;
        let key = k.trim().replace('_', "-");
        match v.trim() {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub schema: Schema,
    pub sha256: String,
}

/// Describes a dataset directory written by `gen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: GenConfig,
    pub ssb: bool,
    pub fact: String,
    pub tables: Vec<TableEntry>,
    pub links: Vec<Link>,
}

fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes every table as CSV plus `manifest.json`.
pub fn save_dataset(
    schema: &StarSchema,
    cfg: &GenConfig,
    ssb: bool,
    dir: &Path,
) -> crate::Result<Manifest> {
    fs::create_dir_all(dir)?;
    let fact_name = crate::benchgen::FACT.to_string();
    let mut tables = Vec::new();
    let all = std::iter::once((&fact_name, schema.fact()))
        .chain(schema.dims().iter().map(|(n, t)| (n, t)));
    for (name, t) in all {
        let file = format!("{name}.csv");
        let path = dir.join(&file);
        t.save_csv(&path)?;
        tables.push(TableEntry {
            name: name.clone(),
            file,
            rows: t.row_count(),
            schema: t.schema().clone(),
            sha256: sha256_file(&path)?,
        });
    }
    let m = Manifest {
        config: cfg.clone(),
        ssb,
        fact: fact_name,
        tables,
        links: schema.links().to_vec(),
    };
    fs::write(
        dir.join(MANIFEST),
        serde_json::to_string_pretty(&m).expect("manifest serializes"),
    )?;
    Ok(m)
}

/// Loads a dataset directory, checking each file against its recorded hash.
pub fn load_dataset(dir: &Path) -> crate::Result<(StarSchema, Manifest)> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format {
        line: e.line(),
        msg: format!("manifest: {e}"),
    })?;
    let mut fact = None;
    let mut dims = Vec::new();
    for e in &m.tables {
        let path = dir.join(&e.file);
        let got = sha256_file(&path)?;
        if got != e.sha256 {
            return Err(Error::Verification(format!(
                "{} hash {got} differs from manifest {}",
                e.file, e.sha256
            )));
        }
        let t = Table::load_csv(&path, e.schema.clone())?;
        if t.row_count() != e.rows {
            return Err(Error::Verification(format!(
                "{}: {} rows, manifest says {}",
                e.file,
                t.row_count(),
                e.rows
            )));
        }
        if e.name == m.fact {
            fact = Some(t);
        } else {
            dims.push((e.name.clone(), t));
        }
    }
    let fact = fact.ok_or_else(|| Error::Name(m.fact.clone()))?;
    Ok((StarSchema::new(fact, dims, m.links.clone())?, m))
}

/// Queries of every group; a group whose selectivity targets cannot be met
/// on this data is skipped with a warning.
fn all_queries(schema: &StarSchema) -> Vec<QuerySpec> {
    let mut out = Vec::new();
    for g in QueryGroup::ALL {
        match gen_queries(schema, g, None) {
            Ok(qs) => out.extend(qs),
            Err(e) => eprintln!("warning: skipping {g:?} queries: {e}"),
        }
    }
    out
}

fn cmd_gen(a: &GenArgs) -> CliResult<()> {
    let cfg = GenConfig {
        sf: a.sf,
        setting: a.setting,
        seed: a.seed,
        feature_width: a.features,
        dangling_fraction: a.dangling,
        mem_cap_bytes: a.mem_cap_mb.saturating_mul(1 << 20),
    };
    let schema = if a.ssb {
        gen_ssb_scale(&cfg)?
    } else {
        gen_star(&cfg)?
    };
    let m = save_dataset(&schema, &cfg, a.ssb, &a.dataset)?;
    let queries = all_queries(&schema);
    fs::write(
        a.dataset.join(QUERIES),
        serde_json::to_string_pretty(&queries).expect("queries serialize"),
    )?;
    for t in &m.tables {
        println!("{:<12} {:>10} rows  {}", t.name, t.rows, t.sha256);
    }
    for q in &queries {
        println!(
            "{} selectivity target {:.4} realized {:.4}",
            q.id, q.target_selectivity, q.realized_selectivity
        );
    }
    Ok(())
}

fn load_queries(dir: &Path, schema: &StarSchema) -> crate::Result<Vec<QuerySpec>> {
    let path = dir.join(QUERIES);
    if path.exists() {
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            line: e.line(),
            msg: format!("queries: {e}"),
        })
    } else {
        Ok(all_queries(schema))
    }
}

fn select_queries(all: Vec<QuerySpec>, sel: &str) -> CliResult<Vec<QuerySpec>> {
    if sel.eq_ignore_ascii_case("all") {
        return Ok(all);
    }
    if let Ok(g) = sel.parse::<QueryGroup>() {
        return Ok(all.into_iter().filter(|q| q.group == g).collect());
    }
    let picked: Vec<QuerySpec> = all
        .into_iter()
        .filter(|q| q.id.eq_ignore_ascii_case(sel))
        .collect();
    if picked.is_empty() {
        return Err(Failure::Usage(format!("unknown query `{sel}`")));
    }
    Ok(picked)
}

fn emit(report: &RunReport, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => report.write(p)?,
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn cmd_query(a: &QueryArgs) -> CliResult<()> {
    let (schema, _) = load_dataset(&a.dataset)?;
    let queries = select_queries(load_queries(&a.dataset, &schema)?, &a.query)?;
    let mut report = RunReport::default();
    for q in &queries {
        let (rows, m, mode) = match a.engine {
            Engine::Laq => {
                let (rows, m) = measure(a.repeats as usize, |st| run_query_laq(&schema, q, st))?;
                (rows, m, "laq")
            }
            Engine::Oracle => {
                let (rows, m) = measure(a.repeats as usize, |_| run_query_oracle(&schema, q))?;
                (rows, m, "oracle")
            }
        };
        let verified = if a.verify {
            let want = run_query_oracle(&schema, q)?;
            if let Err(diff) = compare_results(&rows, &want, 1e-9) {
                return Err(Error::Verification(format!("{}: {diff}", q.id)).into());
            }
            Some(true)
        } else {
            None
        };
        eprintln!(
            "{} {mode}: {} rows, mean {:.6}s ± {:.6}s",
            q.id,
            rows.len(),
            m.mean_s(),
            m.stderr_s()
        );
        report.records.push(RunRecord::new(
            mode,
            &q.id,
            &m,
            checksum_rows(&rows),
            verified,
        ));
    }
    emit(&report, a.out.as_deref())
}

fn build_model(a: &PipelineArgs, k: usize) -> CliResult<(Model, String)> {
    match a.model {
        ModelKind::Linear => {
            if a.model_file.is_some() {
                return Err(Failure::Usage(
                    "--model-file takes a tree; use --model tree".into(),
                ));
            }
            let op = gen_linear(k, a.outputs, a.seed)?;
            Ok((Model::Linear(op), format!("linear-k{k}-l{}", a.outputs)))
        }
        ModelKind::Tree => {
            if let Some(p) = &a.model_file {
                let t = TreeModel::parse(&fs::read_to_string(p)?)?;
                let id = p
                    .file_stem()
                    .map_or("tree".into(), |s| s.to_string_lossy().into_owned());
                Ok((Model::Tree(t), id))
            } else {
                let pool = a.feature_pool.unwrap_or(k);
                let t = gen_tree(k, pool, a.leaves, a.seed)?;
                Ok((Model::Tree(t), format!("tree-k{k}-leaves{}", a.leaves)))
            }
        }
    }
}

fn cmd_pipeline(a: &PipelineArgs) -> CliResult<()> {
    let (schema, manifest) = load_dataset(&a.dataset)?;
    let k = manifest.config.feature_width;
    let (model, id) = build_model(a, k)?;
    let pipeline = Pipeline::standard(&schema, k, model)?;
    let cap = a.mem_cap_mb.map_or(manifest.config.mem_cap_bytes, |mb| {
        mb.saturating_mul(1 << 20)
    });
    let modes = match a.mode {
        ModeArg::Fused => vec![PipelineMode::Fused],
        ModeArg::Nonfused => vec![PipelineMode::NonFused],
        ModeArg::Oracle => vec![PipelineMode::Oracle],
        ModeArg::All => vec![
            PipelineMode::NonFused,
            PipelineMode::Fused,
            PipelineMode::Oracle,
        ],
    };
    for &mode in &modes {
        let need = pipeline.estimated_bytes(mode);
        if need > cap {
            return Err(Error::Capacity(format!(
                "{} needs about {need} bytes, cap is {cap}",
                mode.label()
            ))
            .into());
        }
    }

    let (i, kk, l, p, rows) = pipeline.cost_shape();
    let cost = CostInputs {
        i: i as f64,
        k: kk as f64,
        l: l as f64,
        p: p.map(|p| p as f64),
        r: rows.iter().map(|&r| r as f64).collect(),
    };
    let ratio = match pipeline.model() {
        Model::Linear(_) => speedup_ratio_linear(&cost)?,
        Model::Tree(_) => speedup_ratio_tree(&cost)?,
    };
    eprintln!(
        "{id}: predicted speedup {ratio:.3}, {}",
        if decide_fusion(ratio, DEFAULT_THRESHOLD) {
            "fuse"
        } else {
            "do not fuse"
        }
    );

    let reference = if a.verify {
        Some(pipeline.run(PipelineMode::Oracle, None, &mut Default::default())?)
    } else {
        None
    };
    let mut report = RunReport::default();
    for mode in modes {
        let mut cache = a.cache.then(|| DomainCache::new(rows.len()));
        let (run, m) = measure(a.repeats as usize, |st| {
            pipeline.run(mode, cache.as_mut(), st)
        })?;
        let verified = match &reference {
            Some(want) => {
                if let Err(diff) = compare_runs(&run, want, 1e-9) {
                    return Err(
                        Error::Verification(format!("{} {}: {diff}", id, mode.label())).into(),
                    );
                }
                Some(true)
            }
            None => None,
        };
        eprintln!(
            "{id} {}: {} rows, mean {:.6}s ± {:.6}s",
            mode.label(),
            run.fact_rows.len(),
            m.mean_s(),
            m.stderr_s()
        );
        report.records.push(RunRecord::new(
            mode.label(),
            &id,
            &m,
            checksum_run(&run),
            verified,
        ));
    }
    emit(&report, a.out.as_deref())
}

fn cmd_cost(a: &CostArgs) -> CliResult<()> {
    let ratio = |k: f64, l: f64| -> crate::Result<f64> {
        let c = CostInputs {
            i: a.i,
            k,
            l,
            p: a.p,
            r: a.r.clone(),
        };
        match a.model {
            ModelKind::Linear => speedup_ratio_linear(&c),
            ModelKind::Tree => speedup_ratio_tree(&c),
        }
    };
    let body = if a.sweep {
        let axis: Vec<f64> = (1..=9).map(|e| f64::from(1u32 << e)).collect();
        let mut s = String::from("k,l,ratio,fuse\n");
        for &k in &axis {
            for &l in &axis {
                let r = ratio(k, l)?;
                s.push_str(&format!(
                    "{k},{l},{r:.6},{}\n",
                    decide_fusion(r, a.threshold)
                ));
            }
        }
        s
    } else {
        let r = ratio(a.k, a.l)?;
        let fuse = decide_fusion(r, a.threshold);
        format!(
            "ratio={r:.6}\nleading_term={:.6}\ndecision={}\n",
            a.k / a.l,
            if fuse { "fuse" } else { "no-fuse" }
        )
    };
    match &a.out {
        Some(p) => fs::write(p, body)?,
        None => print!("{body}"),
    }
    Ok(())
}
