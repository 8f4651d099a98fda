use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hdxcolor::certificates::{run_regime, CertError, CertificateParams, Regime};
use hdxcolor::complex::{build_complex, ComplexError};
use hdxcolor::graphs::{Kind, ListColoringInstance};
use hdxcolor::io::{load_instance, IoError};
use hdxcolor::sampler::{
    down_up_gap, exact_mixing, run_chain, DownUpGap, SamplerError, TMix, TraceSummary,
};
use hdxcolor::spectral::{down_up_gap_bound, local_profile, SpectralError, SpectralProfile};
use hdxcolor::trickledown::{TrickleError, Variant};

#[derive(Parser)]
#[command(
    name = "hdxcolor",
    version,
    about = "List-coloring sampler and local spectral certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Glauber dynamics from a greedy coloring.
    Sample {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Local spectral profile and exact down-up gap.
    Spectrum {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = DEFAULT_LIMIT)]
        facet_limit: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Build a regime's matrix family and verify it.
    Certify {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        regime: Regime,
        #[arg(long)]
        epsilon: f64,
        /// Root of the tree regime (default 0).
        #[arg(long)]
        root: Option<usize>,
        #[arg(long, value_enum, default_value_t = VariantArg::Full)]
        variant: VariantArg,
        #[arg(long, default_value_t = DEFAULT_LIMIT)]
        facet_limit: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Exact mixing: spectral gap, TV curve and t_mix.
    Mix {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = 50)]
        horizon: u64,
        /// Accepted for uniformity; the computation is exact.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LIMIT)]
        facet_limit: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

const DEFAULT_LIMIT: usize = 5000;

#[derive(Args)]
struct InstanceArgs {
    /// Graph file: "n m" then m lines "u v".
    #[arg(long)]
    graph: PathBuf,
    /// Lists JSON file, or "all:q".
    #[arg(long)]
    lists: String,
    #[arg(long, value_enum, default_value_t = KindArg::Vertex)]
    kind: KindArg,
}

#[derive(Args)]
struct OutputArgs {
    /// Output path; "-" is stdout.
    #[arg(long, default_value = "-")]
    output: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Vertex,
    Edge,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Inductive,
    Full,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleOutput {
    kind: Kind,
    coloring: BTreeMap<usize, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<BTreeMap<usize, (usize, usize)>>,
    summary: TraceSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumOutput {
    profile: SpectralProfile,
    down_up: DownUpGap,
    gap_lower_bound: f64,
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl ToString) -> Self {
        Failure {
            code,
            msg: msg.to_string(),
        }
    }
}

fn complex_code(e: &ComplexError) -> u8 {
    match e {
        ComplexError::FacetLimit { .. } => 3,
        _ => 1,
    }
}

fn spectral_code(e: &SpectralError) -> u8 {
    match e {
        SpectralError::Complex(c) => complex_code(c),
        _ => 1,
    }
}

fn trickle_code(e: &TrickleError) -> u8 {
    match e {
        TrickleError::Complex(c) => complex_code(c),
        TrickleError::Spectral(s) => spectral_code(s),
        _ => 1,
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::new(1, e)
    }
}

impl From<ComplexError> for Failure {
    fn from(e: ComplexError) -> Self {
        Failure::new(complex_code(&e), e)
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        Failure::new(spectral_code(&e), e)
    }
}

impl From<SamplerError> for Failure {
    fn from(e: SamplerError) -> Self {
        let code = match &e {
            SamplerError::GreedyFailed { .. } => 2,
            SamplerError::Complex(c) => complex_code(c),
            SamplerError::Spectral(s) => spectral_code(s),
            SamplerError::Improper => 1,
        };
        Failure::new(code, e)
    }
}

impl From<CertError> for Failure {
    fn from(e: CertError) -> Self {
        let code = match &e {
            CertError::Complex(c) => complex_code(c),
            CertError::Spectral(s) => spectral_code(s),
            CertError::Trickle(t) => trickle_code(t),
            _ => 1,
        };
        Failure::new(code, e)
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn instance(a: &InstanceArgs) -> Result<ListColoringInstance, Failure> {
    let kind = match a.kind {
        KindArg::Vertex => Kind::Vertex,
        KindArg::Edge => Kind::Edge,
    };
    Ok(load_instance(&a.graph, &a.lists, kind)?)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn emit(out: &OutputArgs, body: &str) -> Result<(), Failure> {
    if out.output == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(body.as_bytes())
            .map_err(|e| Failure::new(1, format!("cannot write output: {e}")))
    } else {
        std::fs::write(&out.output, body)
            .map_err(|e| Failure::new(1, format!("cannot write {}: {e}", out.output)))
    }
}

fn sample(a: &InstanceArgs, steps: u64, seed: u64, out: &OutputArgs) -> Result<(), Failure> {
    let inst = instance(a)?;
    let run = run_chain(&inst, steps, seed)?;
    let edges = (inst.kind() == Kind::Edge).then(|| {
        run.coloring
            .keys()
            .map(|&e| (e, inst.endpoints(e)))
            .collect()
    });
    let body = match out.format {
        Format::Json => json(&SampleOutput {
            kind: inst.kind(),
            coloring: run.coloring,
            edges,
            summary: run.summary,
        }),
        Format::Csv => {
            let mut s = String::from("element,color\n");
            for (e, c) in &run.coloring {
                writeln!(s, "{e},{c}").expect("string write");
            }
            s
        }
    };
    emit(out, &body)
}

fn spectrum(a: &InstanceArgs, limit: usize, out: &OutputArgs) -> Result<(), Failure> {
    let inst = instance(a)?;
    let x = build_complex(&inst, limit)?;
    let profile = local_profile(&x)?;
    let down_up = down_up_gap(&x)?;
    if !down_up.ergodic {
        eprintln!("warning: the down-up walk is reducible");
    }
    let body = match out.format {
        Format::Json => json(&SpectrumOutput {
            gap_lower_bound: down_up_gap_bound(&profile),
            profile,
            down_up,
        }),
        Format::Csv => {
            let mut s = String::from("level,gamma\n");
            for l in &profile.levels {
                writeln!(s, "{},{}", l.level, num(l.gamma)).expect("string write");
            }
            s
        }
    };
    emit(out, &body)
}

struct CertifyArgs {
    regime: Regime,
    epsilon: f64,
    root: Option<usize>,
    variant: Variant,
    limit: usize,
}

fn certify(a: &InstanceArgs, c: &CertifyArgs, out: &OutputArgs) -> Result<(), Failure> {
    let inst = instance(a)?;
    let params = CertificateParams::for_instance(&inst, c.regime, c.epsilon, c.root)?;
    for p in params.preconditions.iter().filter(|p| !p.holds) {
        eprintln!("note: regime precondition not met: {}", p.name);
    }
    let x = build_complex(&inst, c.limit)?;
    let report = run_regime(&x, &params, c.variant)?;
    let body = match out.format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut s = String::from("face,codim,lambda2,rho,pass,certified\n");
            for (face, r) in &report.certificate.faces {
                writeln!(
                    s,
                    "\"{face}\",{},{},{},{},{}",
                    r.codim,
                    num(r.lambda2),
                    num(r.rho),
                    r.pass,
                    r.certified
                )
                .expect("string write");
            }
            s
        }
    };
    emit(out, &body)?;
    if report.sound() {
        Ok(())
    } else {
        Err(Failure::new(
            4,
            format!(
                "soundness violation: {} certificate faces, {} pairing faces",
                report.certificate.soundness_violations.len(),
                report.pairing_violations.len()
            ),
        ))
    }
}

fn mix(a: &InstanceArgs, horizon: u64, limit: usize, out: &OutputArgs) -> Result<(), Failure> {
    let inst = instance(a)?;
    let report = exact_mixing(&inst, limit, horizon)?;
    if report.t_mix == TMix::Unbounded {
        eprintln!("warning: the chain is reducible; t_mix is unbounded");
    }
    let body = match out.format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut s = String::from("t,tv\n");
            for p in &report.tv_curve {
                writeln!(s, "{},{}", p.t, num(p.tv)).expect("string write");
            }
            s
        }
    };
    emit(out, &body)
}

fn threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("HDXCOLOR_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::new(
            1,
            format!("HDXCOLOR_THREADS must be a positive integer, got {v:?}"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(1, e))
}

fn run(cli: Cli) -> Result<(), Failure> {
    threads()?;
    match cli.command {
        Command::Sample {
            instance,
            steps,
            seed,
            out,
        } => sample(&instance, steps, seed, &out),
        Command::Spectrum {
            instance,
            facet_limit,
            out,
        } => spectrum(&instance, facet_limit, &out),
        Command::Certify {
            instance,
            regime,
            epsilon,
            root,
            variant,
            facet_limit,
            out,
        } => {
            let variant = match variant {
                VariantArg::Inductive => Variant::Inductive,
                VariantArg::Full => Variant::Full,
            };
            certify(
                &instance,
                &CertifyArgs {
                    regime,
                    epsilon,
                    root,
                    variant,
                    limit: facet_limit,
                },
                &out,
            )
        }
        Command::Mix {
            instance,
            horizon,
            seed: _,
            facet_limit,
            out,
        } => mix(&instance, horizon, facet_limit, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
