//! Command line front end.
//!
//! Exit status is 0 on success, 1 when a question is answered in the
//! negative (non-members, failing self-test suites) and 2 on invalid input.
//! Errors are reported on stderr as one line,
//! `error: code=E_… message="…"`, the message being a JSON string.

mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tsirelson::certificate::{build_km_certificate, claim_decompose, verify_certificate};
use tsirelson::classical::{classical_norm, classical_norm_oracle};
use tsirelson::io::{self, VectorInput};
use tsirelson::modified::{modified_norm, modified_norm_oracle};
use tsirelson::stabilization::{required_per_output, stabilization_pipeline, BasisSpec, PipelineConfig};
use tsirelson::successive::{certify_successive, phi, phi_exact, three_split, v_map, ExponentSeq};
use tsirelson::{BaseKind, Params, DEFAULT_TOL};

const VERSION: &str = concat!("tsirelson ", env!("CARGO_PKG_VERSION"));

/// Environment override for the default support budget of experiments.
const BUDGET_ENV: &str = "TSIRELSON_SUPPORT_BUDGET";

#[derive(Parser)]
#[command(name = "tsirelson", version, about = "Tsirelson-type norms, norming-set certificates and stabilization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a norm.
    Norm {
        #[arg(value_enum)]
        kind: NormKind,
        #[command(flatten)]
        input: VectorArgs,
        /// Write the optimal witness (split tree or level assignment) here.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Build a membership certificate for a t-grid vector, or verify one.
    Certify {
        #[arg(value_enum)]
        set: CertifyKind,
        #[command(flatten)]
        input: OptionalVectorArgs,
        /// Certificate to check (for `verify`).
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a t-grid vector of unit q-norm into r parts of norm 1/t.
    Decompose {
        #[command(flatten)]
        input: VectorArgs,
    },
    /// Evaluate Φ(m) and V(m) for an exponent sequence.
    Phi {
        /// Comma separated exponents, e.g. "1,2,1".
        #[arg(long, allow_hyphen_values = true)]
        m: String,
        #[arg(long)]
        params: PathBuf,
        /// Print the full JSON record instead of the bare value.
        #[arg(long)]
        json: bool,
    },
    /// Split a member of K^M into three successive certified pieces.
    Split3 {
        #[command(flatten)]
        input: VectorArgs,
    },
    /// Brute-force lower bound with guaranteed slack (small supports only).
    Oracle {
        #[arg(value_enum)]
        kind: NormKind,
        #[command(flatten)]
        input: VectorArgs,
        /// Recursion depth; defaults to support size − 1, which is exact.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Run an experiment.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
    /// Run the invariant suites at reduced size.
    Selftest {
        /// Run a single suite.
        #[arg(long)]
        suite: Option<String>,
        /// Cases per suite (suite default when absent).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum Experiment {
    /// Averaging construction followed by random coefficient trials.
    Stabilization(StabArgs),
}

#[derive(Args)]
struct StabArgs {
    #[arg(long)]
    params: PathBuf,
    /// Block basis: a JSON array of vectors or {"blocks": [...]}.
    #[arg(long, conflicts_with = "basis_gen", required_unless_present = "basis_gen")]
    basis: Option<PathBuf>,
    #[arg(long, value_enum)]
    basis_gen: Option<BasisGen>,
    /// Number of generated blocks (default: enough for `max-outputs` vectors).
    #[arg(long)]
    basis_count: Option<usize>,
    /// Distinct patterns of the random generator.
    #[arg(long, default_value_t = 3)]
    pool: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Number of averaged vectors (default: as many as fit).
    #[arg(long)]
    outputs: Option<usize>,
    #[arg(long, default_value_t = 8)]
    max_outputs: usize,
    /// Largest support of an evaluated combination [default: 2000, or $TSIRELSON_SUPPORT_BUDGET].
    #[arg(long)]
    budget: Option<usize>,
    /// Largest support on which the classical norm is evaluated too.
    #[arg(long, default_value_t = 400)]
    classical_limit: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VectorArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    vector: PathBuf,
}

#[derive(Args)]
struct OptionalVectorArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    vector: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormKind {
    Classical,
    Modified,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum CertifyKind {
    #[value(name = "kM")]
    Km,
    #[value(name = "K")]
    K,
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisGen {
    Unit,
    Random,
}

struct Failure {
    code: &'static str,
    message: String,
}

impl From<tsirelson::Error> for Failure {
    fn from(e: tsirelson::Error) -> Self {
        Failure { code: e.code(), message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: "E_IO", message: format!("{}: {e}", path.display()) }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn load_params(path: &Path) -> CliResult<Params> {
    Ok(io::parse_params(&read(path)?)?)
}

fn load_vector(path: &Path, params: &Params) -> CliResult<VectorInput> {
    Ok(io::parse_vector(&read(path)?, params)?)
}

fn number(v: f64) -> String {
    serde_json::to_string(&v).expect("finite floats serialize")
}

/// Common header of every JSON document written by the tool.
fn envelope(params: &Params, config: Value, result: Value) -> Value {
    json!({
        "version": VERSION,
        "params": io::params_json(params),
        "config": config,
        "result": result,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            report(&Failure { code: "E_USAGE", message: first.to_string() });
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            report(&f);
            ExitCode::from(2)
        }
    }
}

fn report(f: &Failure) {
    eprintln!("error: code={} message={}", f.code, Value::String(f.message.clone()));
}

fn run(command: Command) -> CliResult<ExitCode> {
    match command {
        Command::Norm { kind, input, witness, tol } => norm(kind, &input, witness.as_deref(), tol),
        Command::Certify { set, input, certificate, out } => certify(set, &input, certificate.as_deref(), out.as_deref()),
        Command::Decompose { input } => decompose(&input),
        Command::Phi { m, params, json } => phi_command(&m, &params, json),
        Command::Split3 { input } => split3(&input),
        Command::Oracle { kind, input, depth, tol } => oracle(kind, &input, depth, tol),
        Command::Experiment { which: Experiment::Stabilization(args) } => stabilization(&args),
        Command::Selftest { suite, n, seed } => Ok(selftest::run(suite.as_deref(), n, seed)?),
    }
}

fn norm(kind: NormKind, input: &VectorArgs, witness: Option<&Path>, tol: f64) -> CliResult<ExitCode> {
    let params = load_params(&input.params)?;
    let x = load_vector(&input.vector, &params)?.to_sparse();
    let config = json!({"tol": tol});
    let (value, record) = match kind {
        NormKind::Classical => {
            let n = classical_norm(&x, &params)?;
            let tree = n.witness.as_ref().map(io::split_tree_json);
            (n.value, json!({"norm": "classical", "value": n.value, "witness": tree}))
        }
        NormKind::Modified => {
            let n = modified_norm(&x, &params, tol)?;
            (
                n.value,
                json!({
                    "norm": "modified",
                    "value": n.value,
                    "upper_bound": n.upper_bound,
                    "level_cap": n.witness.level_cap,
                    "witness": io::levels_json(&n.witness),
                }),
            )
        }
    };
    if let Some(path) = witness {
        let mut record = record;
        record["vector"] = io::sparse_json(&x);
        write(path, &io::to_pretty(&envelope(&params, config, record)))?;
    }
    println!("{}", number(value));
    Ok(ExitCode::SUCCESS)
}

fn certify(set: CertifyKind, input: &OptionalVectorArgs, certificate: Option<&Path>, out: Option<&Path>) -> CliResult<ExitCode> {
    let params = load_params(&input.params)?;
    let emit = |doc: Value| -> CliResult<()> {
        let text = io::to_pretty(&doc);
        match out {
            Some(path) => write(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    };
    if set == CertifyKind::Verify {
        let path = certificate.ok_or_else(|| Failure {
            code: "E_USAGE",
            message: "certify verify needs --certificate".into(),
        })?;
        let cert = io::parse_certificate(&read(path)?)?;
        let replay = verify_certificate(&cert, &params).map_err(tsirelson::Error::from)?;
        let mut result = json!({"valid": true, "mode": cert.mode.name(), "vector": io::grid_json(&replay)});
        if let Some(vpath) = &input.vector {
            let expected = load_vector(vpath, &params)?;
            let matches = *expected.expect_grid(BaseKind::T)? == replay;
            result["matches_vector"] = json!(matches);
            emit(envelope(&params, json!({"set": "verify"}), result))?;
            return Ok(if matches { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        emit(envelope(&params, json!({"set": "verify"}), result))?;
        return Ok(ExitCode::SUCCESS);
    }
    let vpath = input.vector.as_ref().ok_or_else(|| Failure {
        code: "E_USAGE",
        message: "certify kM|K needs --vector".into(),
    })?;
    let vector = load_vector(vpath, &params)?;
    let y = vector.expect_grid(BaseKind::T)?;
    let (name, built) = match set {
        CertifyKind::Km => ("kM", build_km_certificate(y, &params)),
        _ => ("K", certify_successive(y, &params)),
    };
    let config = json!({"set": name});
    match built {
        Ok(cert) => {
            let result = json!({
                "member": true,
                "vector": io::grid_json(y),
                "certificate": io::certificate_json(&cert),
            });
            emit(envelope(&params, config, result))?;
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ (tsirelson::Error::NotMember(_) | tsirelson::Error::Precondition(_))) => {
            let result = json!({
                "member": false,
                "vector": io::grid_json(y),
                "reason": e.to_string(),
                "code": e.code(),
            });
            emit(envelope(&params, config, result))?;
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e.into()),
    }
}

fn decompose(input: &VectorArgs) -> CliResult<ExitCode> {
    let params = load_params(&input.params)?;
    let vector = load_vector(&input.vector, &params)?;
    let x = vector.expect_grid(BaseKind::T)?;
    let d = claim_decompose(x, &params)?;
    let result = json!({
        "vector": io::grid_json(x),
        "order": d.order,
        "parts": d.parts.iter().map(io::grid_json).collect::<Vec<_>>(),
    });
    print!("{}", io::to_pretty(&envelope(&params, json!({}), result)));
    Ok(ExitCode::SUCCESS)
}

fn phi_command(m: &str, params_path: &Path, full: bool) -> CliResult<ExitCode> {
    let params = load_params(params_path)?;
    let m: ExponentSeq = m.parse()?;
    let value = phi(&m, &params);
    if full {
        let exact = phi_exact(m.as_slice(), params.r);
        let result = json!({
            "m": m.as_slice(),
            "phi": value,
            "phi_exact": exact.to_string(),
            "v": io::grid_json(&v_map(&m, &params)),
        });
        print!("{}", io::to_pretty(&envelope(&params, json!({}), result)));
    } else {
        println!("{}", number(value));
    }
    Ok(ExitCode::SUCCESS)
}

fn split3(input: &VectorArgs) -> CliResult<ExitCode> {
    let params = load_params(&input.params)?;
    let vector = load_vector(&input.vector, &params)?;
    let y = vector.expect_grid(BaseKind::T)?;
    let split = three_split(y, &params)?;
    let pieces: Vec<Value> = split
        .pieces
        .iter()
        .zip(&split.certificates)
        .map(|(p, c)| json!({"piece": io::grid_json(p), "certificate": c.as_ref().map(io::certificate_json)}))
        .collect();
    let result = json!({"vector": io::grid_json(y), "pieces": pieces});
    print!("{}", io::to_pretty(&envelope(&params, json!({}), result)));
    Ok(ExitCode::SUCCESS)
}

fn oracle(kind: NormKind, input: &VectorArgs, depth: Option<usize>, tol: f64) -> CliResult<ExitCode> {
    let params = load_params(&input.params)?;
    let x = load_vector(&input.vector, &params)?.to_sparse();
    let depth = depth.unwrap_or(x.len().saturating_sub(1));
    let (name, o) = match kind {
        NormKind::Classical => ("classical", classical_norm_oracle(&x, &params, depth, tol)?),
        NormKind::Modified => ("modified", modified_norm_oracle(&x, &params, depth, tol)?),
    };
    let result = json!({
        "norm": name,
        "value": o.value,
        "slack": o.slack,
        "depth": o.depth,
        "within_tol": o.within_tol,
    });
    print!("{}", io::to_pretty(&envelope(&params, json!({"tol": tol}), result)));
    Ok(ExitCode::SUCCESS)
}

fn load_basis(path: &Path, params: &Params) -> CliResult<Vec<tsirelson::SparseVector>> {
    let text = read(path)?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Failure { code: "E_JSON", message: format!("{}: {e}", path.display()) })?;
    let blocks = match &v {
        Value::Array(a) => a,
        Value::Object(o) => o.get("blocks").and_then(Value::as_array).ok_or_else(|| Failure {
            code: "E_JSON",
            message: "basis object needs a \"blocks\" array".into(),
        })?,
        _ => return Err(Failure { code: "E_JSON", message: "basis must be an array of vectors".into() }),
    };
    Ok(blocks
        .iter()
        .map(|b| io::vector_from_value(b, params).map(|x| x.to_sparse()))
        .collect::<tsirelson::Result<_>>()?)
}

fn stabilization(args: &StabArgs) -> CliResult<ExitCode> {
    let params = load_params(&args.params)?;
    let budget = match (args.budget, std::env::var(BUDGET_ENV)) {
        (Some(b), _) => b,
        (None, Ok(v)) => v.trim().parse().map_err(|_| Failure {
            code: "E_ARGUMENT",
            message: format!("{BUDGET_ENV} must be a nonnegative integer, got {v:?}"),
        })?,
        (None, Err(_)) => 2000,
    };
    if !(args.eps > 0.0 && args.eps < 1.0) {
        return Err(tsirelson::Error::InvalidArgument(format!("eps must lie in (0, 1), got {}", args.eps)).into());
    }
    let wanted = args.outputs.unwrap_or(args.max_outputs);
    let per_output = required_per_output(&params, args.eps);
    let basis = match (&args.basis, args.basis_gen) {
        (Some(path), _) => BasisSpec::Explicit(load_basis(path, &params)?),
        (None, Some(BasisGen::Unit)) => {
            BasisSpec::Unit { count: args.basis_count.unwrap_or(per_output * wanted) }
        }
        (None, Some(BasisGen::Random)) => BasisSpec::Random {
            count: args.basis_count.unwrap_or(per_output * wanted * args.pool.max(1)),
            pool: args.pool,
            seed: args.seed,
        },
        (None, None) => unreachable!("clap requires one of --basis and --basis-gen"),
    };
    let config = PipelineConfig {
        trials: args.trials,
        seed: args.seed,
        eps: args.eps,
        outputs: args.outputs,
        max_outputs: args.max_outputs,
        tol: args.tol,
        support_budget: budget,
        classical_limit: args.classical_limit,
    };
    let report = stabilization_pipeline(&basis, &params, &config)?;
    write(&args.out, &io::to_pretty(&report.to_json(VERSION)))?;
    if let Some(path) = &args.csv {
        let mut buf = Vec::new();
        report.write_csv(&mut buf).map_err(|e| io_failure(path, e))?;
        fs::write(path, buf).map_err(|e| io_failure(path, e))?;
    }
    let s = report.summary();
    let line = json!({
        "rho_min": s.rho_min,
        "rho_max": s.rho_max,
        "lambda_hat": s.lambda_hat,
        "passed": s.passed(),
    });
    println!("{line}");
    Ok(if s.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
