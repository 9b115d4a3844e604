//! `cutlaw`: models, cut distances, pinning, sampling, regularity, overlaps and heatmaps.
//!
//! Every command prints one JSON document with a `meta` header carrying the tool
//! version, the seed and the full parameter set, so reruns are byte-identical.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use cutlaw::distance::{self, DiscreteMode, KernelMode, Variant};
use cutlaw::io::{self, Object};
use cutlaw::kernel;
use cutlaw::models::{self, CurieWeissSpec, Parity};
use cutlaw::{pinning, sampling, CutError};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CutError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                CutError::SizeBound(_) => 3,
                CutError::Numeric(_) | CutError::Lp(_) => 4,
                CutError::Io(_) | CutError::Json(_) => 1,
                _ => 2,
            },
            CliError::Io(_) | CliError::Json(_) => 1,
        }
    }
}

type Res<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "cutlaw", version, about = "Cut distances for distributions on discrete cubes")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout). Required by `heatmap`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Cmd {
    /// Write a model measure or kernel as JSON.
    Model(ModelArgs),
    /// Cut distance between two objects.
    Dist(DistArgs),
    /// Pin a measure or law.
    Pin(PinArgs),
    /// Sampling experiments on a kernel.
    Sample(SampleArgs),
    /// Weak regularity partition of a kernel.
    Regularity(RegularityArgs),
    /// Multi-overlap of a law.
    Overlap(OverlapArgs),
    /// PGM heatmap of one symbol of a kernel.
    Heatmap(HeatmapArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModelName {
    Parity,
    Iscaled,
    CurieWeiss,
    IscaledLimit,
    CwLimit,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ParityArg {
    Even,
    Odd,
}

#[derive(clap::Args, Debug, Serialize)]
struct ModelArgs {
    name: ModelName,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value_t = ParityArg::Even)]
    parity: ParityArg,
    /// Curie–Weiss coupling.
    #[arg(long = "T", alias = "temp")]
    t: Option<f64>,
    /// Grid size of discretised limit kernels.
    #[arg(long, default_value_t = 64)]
    grid: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum VariantArg {
    Weak,
    Strong,
    Kernel,
    Noperm,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Exact,
    Upper,
    ExactTiny,
    Transport,
    Sampled,
}

#[derive(clap::Args, Debug, Serialize)]
struct DistArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Weak)]
    variant: VariantArg,
    /// Defaults to `exact` for discrete variants and `exact-tiny` for kernels.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Sample size for `--mode sampled`.
    #[arg(long, default_value_t = 8)]
    n: usize,
}

#[derive(clap::Args, Debug, Serialize)]
struct PinArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    theta: usize,
    /// Also report the exact expected pinned defect for Θ uniform on {0..T}.
    #[arg(long)]
    defect_t: Option<usize>,
    /// Also report the exact information budget up to T.
    #[arg(long)]
    budget_t: Option<usize>,
}

#[derive(clap::Args, Debug, Serialize)]
struct SampleArgs {
    input: PathBuf,
    /// Largest sample size; the table doubles from 8 (or from n if smaller).
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Explicit ascending sample sizes, overriding `--n`.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Also tabulate D(κ_n, κ̂_n) between the minor and the symbol array.
    #[arg(long)]
    minor_gap: bool,
    /// Emit one n×n batch instead of the tables.
    #[arg(long)]
    batch: bool,
    /// With `--batch`, also write the symbol array as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Serialize)]
struct RegularityArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Default: ceil(1/eps²).
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(clap::Args, Debug, Serialize)]
struct OverlapArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    l: u32,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    omegas: Vec<usize>,
    /// Monte-Carlo tuples when exact enumeration is too large.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

#[derive(clap::Args, Debug, Serialize)]
struct HeatmapArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    omega: usize,
    #[arg(long, default_value_t = 512)]
    size: usize,
}

fn load(path: &Path) -> Res<Object> {
    Ok(io::read_object(path)?)
}

fn object_value(o: &Object) -> Res<Value> {
    Ok(serde_json::to_value(o.to_json())?)
}

fn cmd_model(a: &ModelArgs) -> Res<Value> {
    let need_n = || a.n.ok_or_else(|| CliError::Usage("this model needs --n".into()));
    let need_t = || a.t.ok_or_else(|| CliError::Usage("this model needs --T".into()));
    let obj = match a.name {
        ModelName::Parity => {
            let p = match a.parity {
                ParityArg::Even => Parity::Even,
                ParityArg::Odd => Parity::Odd,
            };
            Object::Measure(models::parity_measure(need_n()?, p)?)
        }
        ModelName::Iscaled => Object::Measure(models::iscaled_measure(need_n()?)?),
        ModelName::CurieWeiss => Object::Measure(models::curie_weiss_measure(CurieWeissSpec { n: need_n()?, t: need_t()? })?),
        ModelName::IscaledLimit => Object::Kernel(models::iscaled_limit_kernel(a.grid)?),
        ModelName::CwLimit => Object::Kernel(models::curie_weiss_limit_kernel(need_t()?)?),
    };
    Ok(json!({ "object": object_value(&obj)? }))
}

fn cmd_dist(a: &DistArgs, seed: u64) -> Res<Value> {
    let (x, y) = (load(&a.a)?, load(&a.b)?);
    match a.variant {
        VariantArg::Weak | VariantArg::Strong => {
            let (Object::Measure(mu), Object::Measure(nu)) = (&x, &y) else {
                return Err(CliError::Usage("weak and strong variants compare two measures; use --variant kernel".into()));
            };
            let mode = match a.mode.unwrap_or(ModeArg::Exact) {
                ModeArg::Exact => DiscreteMode::Exact,
                ModeArg::Upper => DiscreteMode::Upper,
                m => return Err(CliError::Usage(format!("mode {m:?} applies to kernels"))),
            };
            let v = if a.variant == VariantArg::Weak { Variant::Weak } else { Variant::Strong };
            let d = distance::discrete_cut_distance(mu, nu, v, mode)?;
            Ok(json!({
                "value": d.value(),
                "lower": d.lower,
                "upper": d.upper,
                "kind": d.kind,
                "variant": d.variant,
                "mode": d.mode,
                "permutation": d.permutation,
                "witness": d.witness,
                "coupling_source": d.source,
                "coupling_nnz": d.coupling.len(),
                "coupling": d.coupling,
                "iterations": d.iterations,
                "lp_solves": d.lp_solves,
            }))
        }
        VariantArg::Kernel | VariantArg::Noperm => {
            let coerced: Vec<String> = [("a", &x), ("b", &y)]
                .iter()
                .filter(|(_, o)| !matches!(o, Object::Kernel(_)))
                .map(|(n, o)| format!("{n}: {} converted to its kernel", o.kind()))
                .collect();
            let (k1, k2) = (x.to_kernel(), y.to_kernel());
            if a.variant == VariantArg::Noperm {
                let (v, w) = distance::kernel_distance_noperm(&k1, &k2)?;
                return Ok(json!({ "value": v, "kind": "exact", "witness": w, "coerced": coerced }));
            }
            let mode = match a.mode.unwrap_or(ModeArg::ExactTiny) {
                ModeArg::ExactTiny => KernelMode::ExactTiny,
                ModeArg::Transport => KernelMode::TransportHeuristic,
                ModeArg::Sampled => KernelMode::Sampled { n: a.n, seed },
                m => return Err(CliError::Usage(format!("mode {m:?} applies to discrete variants"))),
            };
            let d = distance::kernel_distance(&k1, &k2, mode)?;
            let mut v = serde_json::to_value(&d)?;
            v["coerced"] = json!(coerced);
            Ok(v)
        }
    }
}

fn cmd_pin(a: &PinArgs, seed: u64) -> Res<Value> {
    let input = load(&a.input)?;
    let mut out = match &input {
        Object::Measure(mu) => {
            let r = pinning::pin_discrete(mu, a.theta, seed)?;
            json!({ "spec": r.spec, "object": object_value(&Object::Measure(r.pinned))? })
        }
        other => {
            let r = pinning::pin_law_random(&other.to_law(), a.theta, seed)?;
            json!({ "spec": r.spec, "z": r.z, "object": object_value(&Object::Law(r.pinned))? })
        }
    };
    if a.defect_t.is_some() || a.budget_t.is_some() {
        let Object::Measure(mu) = &input else {
            return Err(CliError::Usage("--defect-t and --budget-t need a discrete measure".into()));
        };
        if let Some(t) = a.defect_t {
            out["expected_pinned_defect"] = json!(pinning::expected_pinned_defect(mu, t)?);
        }
        if let Some(t) = a.budget_t {
            let b = pinning::information_budget(mu, t)?;
            out["information_budget"] = serde_json::to_value(&b)?;
            out["information_budget"]["within_budget"] = json!(b.within_budget());
            out["information_budget"]["kl_within_bound"] = json!(b.kl_within_bound());
        }
    }
    Ok(out)
}

fn cmd_sample(a: &SampleArgs, seed: u64) -> Res<Value> {
    let k = load(&a.input)?.to_kernel();
    if a.batch {
        let b = sampling::sample_matrix(&k, a.n, seed)?;
        if let Some(p) = &a.csv {
            let rows: Vec<Vec<u8>> = (0..b.n).map(|i| b.row(i).to_vec()).collect();
            io::write_array_csv(std::fs::File::create(p)?, &rows)?;
        }
        return Ok(json!({ "batch": b }));
    }
    let n_list = match &a.n_list {
        Some(l) => l.clone(),
        None => {
            let mut l = vec![a.n.min(8)];
            while l[l.len() - 1] * 2 <= a.n {
                l.push(l[l.len() - 1] * 2);
            }
            if l[l.len() - 1] != a.n {
                l.push(a.n);
            }
            l
        }
    };
    let table = sampling::sampling_convergence_experiment(&k, &n_list, a.trials, seed)?;
    let mut out = json!({ "convergence": table });
    if a.minor_gap {
        out["minor_gap"] = serde_json::to_value(sampling::minor_symbol_experiment(&k, &n_list, a.trials, seed)?)?;
    }
    Ok(out)
}

fn cmd_regularity(a: &RegularityArgs) -> Res<Value> {
    if !(a.eps > 0.0 && a.eps < 1.0) {
        return Err(CliError::Usage("--eps must lie in (0, 1)".into()));
    }
    let k = load(&a.input)?.to_kernel();
    let iters = a.max_iters.unwrap_or((1.0 / (a.eps * a.eps)).ceil() as usize);
    let r = kernel::weak_regularity(&k, a.eps, iters)?;
    Ok(json!({
        "residual": r.residual,
        "converged": r.converged,
        "iterations": r.iterations,
        "row_classes": r.rows.num_classes(),
        "col_classes": r.cols.num_classes(),
        "partition": { "rows": r.rows, "cols": r.cols },
    }))
}

fn cmd_overlap(a: &OverlapArgs, seed: u64) -> Res<Value> {
    let law = load(&a.input)?.to_law();
    let o = law.multi_overlap(a.l, &a.omegas, a.samples, seed)?;
    Ok(json!({ "value": o.value, "stderr": o.stderr, "exact": o.exact }))
}

fn cmd_heatmap(a: &HeatmapArgs, out: Option<&Path>) -> Res<Value> {
    let out = out.ok_or_else(|| CliError::Usage("heatmap needs --out FILE.pgm".into()))?;
    let k = load(&a.input)?.to_kernel();
    let bytes = io::heatmap_pgm(&k, a.omega, a.size, a.size)?;
    std::fs::write(out, &bytes)?;
    Ok(json!({ "path": out, "bytes": bytes.len() }))
}

fn run(cli: &Cli) -> Res<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let body = match &cli.cmd {
        Cmd::Model(a) => cmd_model(a)?,
        Cmd::Dist(a) => cmd_dist(a, cli.seed)?,
        Cmd::Pin(a) => cmd_pin(a, cli.seed)?,
        Cmd::Sample(a) => cmd_sample(a, cli.seed)?,
        Cmd::Regularity(a) => cmd_regularity(a)?,
        Cmd::Overlap(a) => cmd_overlap(a, cli.seed)?,
        Cmd::Heatmap(a) => cmd_heatmap(a, cli.out.as_deref())?,
    };
    let mut doc = json!({
        "meta": {
            "tool": "cutlaw",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": cli.seed,
            "threads": cli.threads,
            "params": serde_json::to_value(&cli.cmd)?,
        }
    });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match (&cli.cmd, &cli.out) {
        (Cmd::Heatmap(_), _) | (_, None) => print!("{text}"),
        (_, Some(p)) => std::fs::write(p, text)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
