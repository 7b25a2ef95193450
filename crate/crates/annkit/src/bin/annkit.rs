//! Command-line front end: abstraction, witness checks, network shifting,
//! output bounding, evaluation, and the golden regression suite.
//!
//! Exit codes: 0 success, 1 a check or regression entry failed, 2 validation
//! error, 3 enumeration cap exceeded.

use annkit::abstraction::{
    abstract_dnn, AbstractionOptions, LayerwisePartitioning, DEFAULT_MERGE_CAP,
};
use annkit::analysis::interval_forward;
use annkit::domains::Ann;
use annkit::error::Error;
use annkit::golden::{run_cases, GOLDEN_TOL};
use annkit::io::{
    parse_domain, partition_file_to, to_canonical_json, AnnFile, ModelFile, PartitionFile,
    WitnessEntry, WitnessReport,
};
use annkit::model::Dnn;
use annkit::soundness::{witness_instantiation, Region};
use annkit::transform::{augment_input, lower_bound_activations, shift_dnn};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "annkit",
    about = "Build and certify weight-set abstractions of neural networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Abstract a network's weights over a layer-wise partitioning.
    Abstract(AbstractArgs),
    /// Certify pointwise soundness by constructing witness instantiations.
    Check(CheckArgs),
    /// Rewrite a network so all hidden activations are non-negative.
    Shift(ShiftArgs),
    /// Bound all outputs of an abstract network over an input box.
    Bounds(BoundsArgs),
    /// Evaluate a concrete network on an input point.
    Eval(EvalArgs),
    /// Run the golden regression suite of worked examples.
    PaperExamples(PaperExamplesArgs),
}

#[derive(Args)]
struct AbstractArgs {
    /// Network JSON file.
    model: PathBuf,
    /// Partitioning JSON file (1-indexed blocks per interface).
    partition: PathBuf,
    /// Abstract domain: interval, octagon, or powerset.
    #[arg(long, default_value = "interval")]
    domain: String,
    /// Allow non-convex domains (the result may be unsound).
    #[arg(long)]
    unsound_ok: bool,
    /// Cap on binary mergings per layer (overrides ANNKIT_CAP).
    #[arg(long)]
    cap: Option<u128>,
    /// Output file for the abstract network.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print the machine-readable report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Network JSON file.
    model: PathBuf,
    /// Partitioning JSON file.
    partition: PathBuf,
    /// Abstract domain: interval, octagon, or powerset.
    #[arg(long, default_value = "interval")]
    domain: String,
    /// JSON file with a list of input vectors.
    #[arg(long, conflicts_with = "random")]
    inputs: Option<PathBuf>,
    /// Check this many random inputs instead of a file.
    #[arg(long)]
    random: Option<usize>,
    /// Seed for random input generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comparison tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Skip the precondition check and report violations per input.
    #[arg(long)]
    force: bool,
    /// Cap on binary mergings per layer (overrides ANNKIT_CAP).
    #[arg(long)]
    cap: Option<u128>,
    /// Write the report to a file as well.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print the machine-readable report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ShiftArgs {
    /// Network JSON file.
    model: PathBuf,
    /// Input box as `lo,hi;lo,hi;...`, one pair per input dimension.
    #[arg(long, conflicts_with = "bound", allow_hyphen_values = true)]
    region: Option<String>,
    /// Shift by this constant directly instead of bounding over a region.
    #[arg(long)]
    bound: Option<f64>,
    /// Output file for the shifted network.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print the machine-readable report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Network JSON file (abstracted with the identity partitioning unless
    /// --partition is given), or an abstract-network file with --ann.
    model: PathBuf,
    /// Treat the file as an abstract network.
    #[arg(long)]
    ann: bool,
    /// Partitioning JSON file to abstract the model with first.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Abstract domain when abstracting: interval, octagon, or powerset.
    #[arg(long, default_value = "interval")]
    domain: String,
    /// Input point as `v1,v2,...`.
    #[arg(long, conflicts_with = "box", allow_hyphen_values = true)]
    input: Option<String>,
    /// Input box as `lo,hi;lo,hi;...`.
    #[arg(long = "box", allow_hyphen_values = true)]
    r#box: Option<String>,
    /// Cap on binary mergings per layer (overrides ANNKIT_CAP).
    #[arg(long)]
    cap: Option<u128>,
    /// Print the machine-readable report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Network JSON file.
    model: PathBuf,
    /// Input point as `v1,v2,...`.
    #[arg(long, allow_hyphen_values = true)]
    input: String,
    /// Print the machine-readable report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PaperExamplesArgs {
    /// Run only the cases whose id contains this substring.
    #[arg(long)]
    only: Option<String>,
    /// Print the machine-readable report instead of the table.
    #[arg(long)]
    json: bool,
}

const EXIT_FAIL: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CAP: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Abstract(args) => cmd_abstract(args),
        Command::Check(args) => cmd_check(args),
        Command::Shift(args) => cmd_shift(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Eval(args) => cmd_eval(args),
        Command::PaperExamples(args) => cmd_paper_examples(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::BinaryEnumerationLimitExceeded { .. } => ExitCode::from(EXIT_CAP),
                _ => ExitCode::from(EXIT_VALIDATION),
            }
        }
    }
}

// -- shared plumbing ---------------------------------------------------------

fn effective_cap(flag: Option<u128>) -> u128 {
    flag.or_else(|| {
        std::env::var("ANNKIT_CAP")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(DEFAULT_MERGE_CAP)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidModel(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidModel(format!("cannot parse {what} {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Dnn, Error> {
    read_json::<ModelFile>(path, "model")?.to_dnn()
}

fn load_partition(path: &Path) -> Result<LayerwisePartitioning, Error> {
    partition_file_to(&read_json::<PartitionFile>(path, "partitioning")?)
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>, to_stdout: bool) -> Result<(), Error> {
    let text = to_canonical_json(value)?;
    if let Some(p) = path {
        std::fs::write(p, &text)
            .map_err(|e| Error::InvalidModel(format!("cannot write {}: {e}", p.display())))?;
    }
    if to_stdout {
        print!("{text}");
    }
    Ok(())
}

fn parse_point(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidModel(format!("bad number '{t}': {e}")))
        })
        .collect()
}

fn parse_box(s: &str) -> Result<Region, Error> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for pair in s.split(';') {
        let nums = parse_point(pair)?;
        if nums.len() != 2 {
            return Err(Error::InvalidModel(format!(
                "box component '{pair}' must be 'lo,hi'"
            )));
        }
        lo.push(nums[0]);
        hi.push(nums[1]);
    }
    Region::new(lo, hi)
}

fn format_interval(lo: f64, hi: f64) -> String {
    format!("[{lo}, {hi}]")
}

// -- commands ----------------------------------------------------------------

fn cmd_abstract(args: AbstractArgs) -> Result<ExitCode, Error> {
    let n = load_model(&args.model)?;
    let lp = load_partition(&args.partition)?;
    let domain = parse_domain(&args.domain)?;
    let opts = AbstractionOptions {
        cap: effective_cap(args.cap),
        allow_nonconvex: args.unsound_ok,
    };
    let ann = abstract_dnn(&n, &lp, &vec![domain; n.num_layers()], &opts)?;
    let file = AnnFile::from_ann(&ann)?;
    emit(&file, args.output.as_deref(), args.json)?;
    if !args.json {
        println!(
            "abstracted {} layers into {} domain; interface sizes {:?} -> {:?}",
            ann.num_layers(),
            args.domain,
            n.layer_sizes(),
            lp.layers()
                .iter()
                .map(|p| p.num_blocks())
                .collect::<Vec<_>>()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, Error> {
    let n = load_model(&args.model)?;
    let lp = load_partition(&args.partition)?;
    let domain = parse_domain(&args.domain)?;
    let opts = AbstractionOptions {
        cap: effective_cap(args.cap),
        allow_nonconvex: false,
    };
    let ann = abstract_dnn(&n, &lp, &vec![domain; n.num_layers()], &opts)?;

    let inputs: Vec<Vec<f64>> = if let Some(path) = &args.inputs {
        read_json(path, "inputs")?
    } else if let Some(k) = args.random {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        (0..k)
            .map(|_| (0..n.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    } else {
        return Err(Error::InvalidModel(
            "provide --inputs FILE or --random K".into(),
        ));
    };

    let mut entries = Vec::with_capacity(inputs.len());
    for v in &inputs {
        let entry = match witness_instantiation(&n, &ann, &lp, v, args.force) {
            Ok(w) => {
                let dev = w
                    .output
                    .iter()
                    .zip(&n.eval(v)?)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if dev <= args.tol {
                    WitnessEntry {
                        input: v.clone(),
                        pass: true,
                        detail: String::new(),
                        witness: Some(w),
                    }
                } else {
                    WitnessEntry {
                        input: v.clone(),
                        pass: false,
                        detail: format!("witness output deviates by {dev:.3e}"),
                        witness: Some(w),
                    }
                }
            }
            Err(e) => WitnessEntry {
                input: v.clone(),
                pass: false,
                detail: e.to_string(),
                witness: None,
            },
        };
        entries.push(entry);
    }
    let all_pass = entries.iter().all(|e| e.pass);
    let report = WitnessReport { entries, all_pass };
    emit(&report, args.output.as_deref(), args.json)?;
    if !args.json {
        for e in &report.entries {
            let status = if e.pass { "PASS" } else { "FAIL" };
            let detail = if e.detail.is_empty() {
                String::new()
            } else {
                format!("  ({})", e.detail)
            };
            println!("{status}  {:?}{detail}", e.input);
        }
        println!(
            "{}/{} inputs certified",
            report.entries.iter().filter(|e| e.pass).count(),
            report.entries.len()
        );
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    })
}

#[derive(Serialize)]
struct ShiftOutput {
    model: ModelFile,
    report: annkit::transform::ShiftReport,
}

fn cmd_shift(args: ShiftArgs) -> Result<ExitCode, Error> {
    let n = load_model(&args.model)?;
    let shift = if let Some(c) = args.bound {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidBound(c));
        }
        c
    } else if let Some(r) = &args.region {
        let region = parse_box(r)?;
        -lower_bound_activations(&n, &region)?
    } else {
        return Err(Error::InvalidModel(
            "provide --region LO,HI;... or --bound C".into(),
        ));
    };
    let (shifted, report) = shift_dnn(&n, shift)?;
    let out = ShiftOutput {
        model: ModelFile::from_dnn(&shifted),
        report: report.clone(),
    };
    emit(&out, args.output.as_deref(), args.json)?;
    if !args.json {
        println!(
            "shift constant {}; carries {:?}; layer sizes {:?} (inputs gain a trailing constant 1)",
            report.shift, report.carries, report.layer_sizes
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bounds(args: BoundsArgs) -> Result<ExitCode, Error> {
    let ann: Ann = if args.ann {
        read_json::<AnnFile>(&args.model, "abstract network")?.to_ann()?
    } else {
        let n = load_model(&args.model)?;
        let lp = match &args.partition {
            Some(p) => load_partition(p)?,
            None => LayerwisePartitioning::identity(&n.layer_sizes())?,
        };
        let domain = parse_domain(&args.domain)?;
        let opts = AbstractionOptions {
            cap: effective_cap(args.cap),
            allow_nonconvex: false,
        };
        abstract_dnn(&n, &lp, &vec![domain; n.num_layers()], &opts)?
    };
    let region = if let Some(p) = &args.input {
        Region::point(&parse_point(p)?)
    } else if let Some(b) = &args.r#box {
        parse_box(b)?
    } else {
        return Err(Error::InvalidModel(
            "provide --input V1,V2,... or --box LO,HI;...".into(),
        ));
    };
    let out = interval_forward(&ann, &region)?;
    if args.json {
        emit(&out, None, true)?;
    } else {
        for (i, (l, h)) in out.lo.iter().zip(&out.hi).enumerate() {
            println!("y{}: {}", i + 1, format_interval(*l, *h));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode, Error> {
    let n = load_model(&args.model)?;
    let mut v = parse_point(&args.input)?;
    // Convenience for shifted models: append the constant-1 input.
    if v.len() + 1 == n.input_dim() {
        v = augment_input(&v);
    }
    let out = n.eval(&v)?;
    if args.json {
        emit(&out, None, true)?;
    } else {
        println!("{out:?}");
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct GoldenReportEntry {
    id: String,
    pass: bool,
    detail: String,
}

fn cmd_paper_examples(args: PaperExamplesArgs) -> Result<ExitCode, Error> {
    let results = run_cases(GOLDEN_TOL, args.only.as_deref());
    if results.is_empty() {
        return Err(Error::InvalidModel(format!(
            "no regression case matches '{}'",
            args.only.unwrap_or_default()
        )));
    }
    let entries: Vec<GoldenReportEntry> = results
        .iter()
        .map(|(id, r)| GoldenReportEntry {
            id: id.to_string(),
            pass: r.is_ok(),
            detail: r.clone().err().unwrap_or_default(),
        })
        .collect();
    let all_pass = entries.iter().all(|e| e.pass);
    if args.json {
        emit(&entries, None, true)?;
    } else {
        for e in &entries {
            let status = if e.pass { "PASS" } else { "FAIL" };
            let detail = if e.detail.is_empty() {
                String::new()
            } else {
                format!("  ({})", e.detail)
            };
            println!("{status}  {}{detail}", e.id);
        }
        println!(
            "{}/{} cases passed",
            entries.iter().filter(|e| e.pass).count(),
            entries.len()
        );
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    })
}
