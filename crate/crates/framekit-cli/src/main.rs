//! Command-line front end: frame I/O, random generation, potential and
//! bound computation, tightness checks, irregularity algebra, potential
//! minimization, and structure verification.
//!
//! Exit codes: 0 on success, 1 on verification failure, 2 on input or
//! tolerance errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use framekit::construct;
use framekit::curve::PerturbationCurve;
use framekit::field::{Complex64, FieldTag, FrameScalar};
use framekit::frame::{random_frame, tightness_residual, DimProfile, FusionFrame};
use framekit::io::{self, AnyFrame};
use framekit::irregularity::{
    check_tail_index_set, decompose, irregularity, minimum_value,
    satisfies_fundamental_inequality, IrregularityError, StructureError,
};
use framekit::optimizer::{multistart, minimize, OptimizerConfig, OptimizerReport};
use framekit::spectral::{structure_report, SpectralError, StructureReport};

#[derive(Parser)]
#[command(name = "framekit", version, about = "Finite fusion frame toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProfileArgs {
    /// Ambient dimension d.
    #[arg(long)]
    d: usize,
    /// Comma-separated subspace dimensions L_1,...,L_K.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    /// Comma-separated weights w_k (exclusive with --weights2).
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Comma-separated squared weights w_k^2 (exclusive with --weights).
    #[arg(long, value_delimiter = ',')]
    weights2: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
struct OutputArg {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fusion frame potential of a frame file, with its lower bound.
    Potential {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: OutputArg,
    },
    /// The potential lower bound of a profile or frame file.
    Bound {
        #[arg(long, conflicts_with_all = ["d", "dims", "weights", "weights2"])]
        input: Option<PathBuf>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        weights2: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Decide alpha-tightness of a frame file.
    TightCheck {
        #[arg(long)]
        input: PathBuf,
        /// Relative tolerance on ||S - alpha I||_F.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Flip index, irregularity, fundamental inequality and minimum value
    /// of a profile.
    Irregularity {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        out: OutputArg,
    },
    /// The global minimum of the potential for a profile.
    MinValue {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Minimize the potential: multistart descent over a profile, or a
    /// single descent from a frame file given via --input.
    Minimize {
        #[arg(long, conflicts_with_all = ["d", "dims", "weights", "weights2", "field"])]
        input: Option<PathBuf>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        weights2: Option<Vec<f64>>,
        /// Scalar field for profile starts.
        #[arg(long, value_parser = parse_field, default_value = "real")]
        field: FieldTag,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        grad_tol: f64,
        /// Keep the full iteration history in the report.
        #[arg(long)]
        full_history: bool,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Run the structure verification pipeline on a frame file.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        cluster_tol: f64,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Draw a random frame with a given profile and write it canonically.
    Random {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_parser = parse_field, default_value = "real")]
        field: FieldTag,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Frame file to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Check the tight reconstruction formula on a random vector.
    ReconstructDemo {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        out: OutputArg,
    },
}

fn parse_field(s: &str) -> Result<FieldTag, String> {
    match s {
        "real" => Ok(FieldTag::Real),
        "complex" => Ok(FieldTag::Complex),
        other => Err(format!("unknown field `{other}` (expected real or complex)")),
    }
}

enum Failure {
    /// Exit code 2: unreadable input, schema violations, bad profiles,
    /// tolerance problems.
    Input(String),
    /// Exit code 1: a verification contract did not hold.
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Verification(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<io::IoError> for Failure {
    fn from(e: io::IoError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<framekit::frame::FrameError> for Failure {
    fn from(e: framekit::frame::FrameError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<framekit::optimizer::OptimizerError> for Failure {
    fn from(e: framekit::optimizer::OptimizerError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<IrregularityError> for Failure {
    fn from(e: IrregularityError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        Failure::Input(e.to_string())
    }
}

macro_rules! dispatch {
    ($any:expr, |$f:ident| $body:expr) => {
        match $any {
            AnyFrame::Real($f) => $body,
            AnyFrame::Complex($f) => $body,
        }
    };
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("FRAMEKIT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        } else {
            eprintln!("warning: ignoring non-numeric FRAMEKIT_THREADS={threads}");
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn load(path: &PathBuf) -> Result<AnyFrame, Failure> {
    let loaded = io::read_frame_path(path)?;
    for warning in &loaded.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(loaded.frame)
}

fn resolve_weights(
    dims_len: usize,
    weights: Option<Vec<f64>>,
    weights2: Option<Vec<f64>>,
) -> Result<Vec<f64>, Failure> {
    let resolved = match (weights, weights2) {
        (Some(w), None) => w,
        (None, Some(w2)) => {
            if w2.iter().any(|&x| !(x > 0.0)) {
                return Err(Failure::Input("squared weights must be positive".into()));
            }
            w2.iter().map(|x| x.sqrt()).collect()
        }
        (None, None) => return Err(Failure::Input("provide --weights or --weights2".into())),
        (Some(_), Some(_)) => {
            return Err(Failure::Input(
                "--weights and --weights2 are mutually exclusive".into(),
            ))
        }
    };
    if resolved.len() != dims_len {
        return Err(Failure::Input(format!(
            "expected {dims_len} weights, got {}",
            resolved.len()
        )));
    }
    Ok(resolved)
}

fn profile_from_args(args: ProfileArgs) -> Result<DimProfile, Failure> {
    let weights = resolve_weights(args.dims.len(), args.weights, args.weights2)?;
    Ok(DimProfile::new(args.d, args.dims, weights)?)
}

fn weights_json(weights: &[f64]) -> (Value, Value) {
    let squared: Vec<f64> = weights.iter().map(|w| w * w).collect();
    (json!(weights), json!(squared))
}

fn emit(report: &Value, output: &Option<PathBuf>) -> Result<(), Failure> {
    let text = format!("{:#}\n", report);
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Input(e.to_string()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Potential { input, out } => {
            let frame = load(&input)?;
            let report = dispatch!(&frame, |f| potential_report(f));
            emit(&report, &out.output)
        }
        Command::Bound {
            input,
            d,
            dims,
            weights,
            weights2,
            out,
        } => {
            let profile = match input {
                Some(path) => {
                    let frame = load(&path)?;
                    dispatch!(&frame, |f| f.profile())
                }
                None => {
                    let d = d.ok_or_else(|| {
                        Failure::Input("provide --input or a full profile".into())
                    })?;
                    let weights = resolve_weights(dims.len(), weights, weights2)?;
                    DimProfile::new(d, dims, weights)?
                }
            };
            let (w, w2) = weights_json(&profile.weights);
            let report = json!({
                "d": profile.d,
                "dims": profile.dims,
                "weights": w,
                "weights2": w2,
                "lower_bound": profile.lower_bound(),
            });
            emit(&report, &out.output)
        }
        Command::TightCheck { input, tol, out } => {
            let frame = load(&input)?;
            let report = dispatch!(&frame, |f| tight_report(f, tol));
            emit(&report, &out.output)
        }
        Command::Irregularity { profile, out } | Command::MinValue { profile, out } => {
            let profile = profile_from_args(profile)?;
            let report = irregularity_report(&profile)?;
            emit(&report, &out.output)
        }
        Command::Minimize {
            input,
            d,
            dims,
            weights,
            weights2,
            field,
            restarts,
            seed,
            max_iters,
            grad_tol,
            full_history,
            out,
        } => {
            let cfg = OptimizerConfig {
                max_iters,
                grad_tol,
                restarts,
                seed,
                ..OptimizerConfig::default()
            };
            let report = match input {
                Some(path) => {
                    let frame = load(&path)?;
                    dispatch!(&frame, |f| minimize_report(
                        minimize(f, &cfg)?,
                        full_history
                    ))
                }
                None => {
                    let d = d.ok_or_else(|| {
                        Failure::Input("provide --input or a full profile".into())
                    })?;
                    let weights = resolve_weights(dims.len(), weights, weights2)?;
                    let profile = DimProfile::new(d, dims, weights)?;
                    match field {
                        FieldTag::Real => {
                            minimize_report(multistart::<f64>(&profile, &cfg)?, full_history)
                        }
                        FieldTag::Complex => minimize_report(
                            multistart::<Complex64>(&profile, &cfg)?,
                            full_history,
                        ),
                    }
                }
            };
            emit(&report, &out.output)
        }
        Command::Verify {
            input,
            tol,
            cluster_tol,
            out,
        } => {
            let frame = load(&input)?;
            let (report, failing) =
                dispatch!(&frame, |f| verify_report(f, tol, cluster_tol))?;
            emit(&report, &out.output)?;
            match failing {
                None => Ok(()),
                Some(clause) => Err(Failure::Verification(format!(
                    "verification failed at clause `{clause}`"
                ))),
            }
        }
        Command::Random {
            profile,
            field,
            seed,
            output,
        } => {
            let profile = profile_from_args(profile)?;
            let frame = match field {
                FieldTag::Real => AnyFrame::Real(random_frame::<f64>(&profile, seed)?),
                FieldTag::Complex => {
                    AnyFrame::Complex(random_frame::<Complex64>(&profile, seed)?)
                }
            };
            io::write_frame_canonical_path(&frame, &output)?;
            let (w, w2) = weights_json(&profile.weights);
            let report = json!({
                "path": output,
                "field": field,
                "d": profile.d,
                "dims": profile.dims,
                "weights": w,
                "weights2": w2,
                "seed": seed,
            });
            emit(&report, &None)
        }
        Command::ReconstructDemo {
            input,
            seed,
            tol,
            out,
        } => {
            let frame = load(&input)?;
            let (report, ok) = dispatch!(&frame, |f| reconstruct_report(f, seed, tol));
            emit(&report, &out.output)?;
            if ok {
                Ok(())
            } else {
                Err(Failure::Verification(
                    "reconstruction check failed (frame not tight or error above bound)".into(),
                ))
            }
        }
    }
}

fn potential_report<T: FrameScalar>(frame: &FusionFrame<T>) -> Value {
    let ffp = frame.ffp();
    let bound = frame.profile().lower_bound();
    json!({ "ffp": ffp, "lower_bound": bound, "gap": ffp - bound })
}

fn tight_report<T: FrameScalar>(frame: &FusionFrame<T>, tol: f64) -> Value {
    let s = frame.frame_operator();
    let alpha = frame.is_tight(tol);
    let trace_ratio = frame.operator_trace() / frame.ambient_dim() as f64;
    json!({
        "tight": alpha.is_some(),
        "alpha": alpha,
        "residual": tightness_residual(&s, trace_ratio),
        "tolerance": tol,
    })
}

fn irregularity_report(profile: &DimProfile) -> Result<Value, Failure> {
    let mut order: Vec<usize> = (0..profile.k()).collect();
    order.sort_by(|&a, &b| profile.weights[b].partial_cmp(&profile.weights[a]).unwrap());
    let sorted_wsq: Vec<f64> = order
        .iter()
        .map(|&i| profile.weights[i] * profile.weights[i])
        .collect();
    let sorted_dims: Vec<usize> = order.iter().map(|&i| profile.dims[i]).collect();
    let flip = irregularity(profile.d, &sorted_dims, &sorted_wsq)?;
    let (w, w2) = weights_json(&profile.weights);
    Ok(json!({
        "N0": flip.n0,
        "irregularity": flip.irregularity(),
        "fundamental_inequality": satisfies_fundamental_inequality(profile),
        "min_value": minimum_value(profile)?,
        "lower_bound": profile.lower_bound(),
        "d": profile.d,
        "dims": profile.dims,
        "weights": w,
        "weights2": w2,
    }))
}

fn minimize_report<T: FrameScalar>(report: OptimizerReport<T>, full_history: bool) -> Value {
    let history: Vec<Value> = if full_history {
        report
            .history
            .iter()
            .map(|r| json!([r.iter, r.ffp, r.grad_norm]))
            .collect()
    } else {
        // keep the endpoints so reports stay small on long runs
        let n = report.history.len();
        report
            .history
            .iter()
            .enumerate()
            .filter(|(i, _)| *i == 0 || *i + 1 == n)
            .map(|(_, r)| json!([r.iter, r.ffp, r.grad_norm]))
            .collect()
    };
    let in_class_e = report
        .structure
        .report
        .as_ref()
        .map(|r| r.in_class_e);
    let frame_file = io_frame_value(&report.frame);
    let weights = report.frame.weights();
    let (w, w2) = weights_json(&weights);
    json!({
        "ffp": report.ffp,
        "lower_bound": report.lower_bound,
        "gap": report.gap,
        "iterations": report.iterations,
        "grad_norm": report.grad_norm,
        "status": report.status,
        "converged": report.converged(),
        "tight": report.structure.tight_alpha.is_some(),
        "alpha": report.structure.tight_alpha,
        "in_class_E": in_class_e,
        "restart_index": report.restart_index,
        "history": history,
        "weights": w,
        "weights2": w2,
        "frame": frame_file,
    })
}

fn io_frame_value<T: FrameScalar>(frame: &FusionFrame<T>) -> Value {
    // round through AnyFrame so both fields serialize with the file schema
    let any = match T::FIELD {
        FieldTag::Real => {
            let text = serde_json::to_string(&frame_as_value_generic(frame)).unwrap();
            return serde_json::from_str::<Value>(&text).unwrap();
        }
        FieldTag::Complex => {
            let text = serde_json::to_string(&frame_as_value_generic(frame)).unwrap();
            return serde_json::from_str::<Value>(&text).unwrap();
        }
    };
    #[allow(unreachable_code)]
    {
        let _: AnyFrame = any;
        unreachable!()
    }
}

fn frame_as_value_generic<T: FrameScalar>(frame: &FusionFrame<T>) -> Value {
    let members: Vec<Value> = frame
        .members()
        .map(|(subspace, weight)| {
            let b = subspace.basis();
            let rows: Vec<Value> = (0..b.nrows())
                .map(|i| {
                    Value::from(
                        (0..b.ncols())
                            .map(|j| scalar_value(b[(i, j)]))
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            json!({ "basis": rows, "weight": weight })
        })
        .collect();
    json!({ "d": frame.ambient_dim(), "field": T::FIELD, "members": members })
}

fn scalar_value<T: FrameScalar>(x: T) -> Value {
    match T::FIELD {
        FieldTag::Real => Value::from(x.real()),
        FieldTag::Complex => Value::from(vec![x.real(), x.imaginary()]),
    }
}

type VerifyOutcome = (Value, Option<String>);

fn verify_report<T: FrameScalar>(
    frame: &FusionFrame<T>,
    tol: f64,
    cluster_tol: f64,
) -> Result<VerifyOutcome, Failure> {
    let report: StructureReport = structure_report(frame, tol, cluster_tol)?;
    let mut failing: Option<String> = report.first_failing_clause().map(str::to_owned);

    let mut tail_ok: Option<bool> = None;
    let mut decomposition: Option<Value> = None;
    if failing.is_none() {
        match check_tail_index_set(frame, tol) {
            Ok(ok) => {
                tail_ok = Some(ok);
                if !ok {
                    failing = Some("tail_index_set".into());
                }
            }
            Err(StructureError::Irregularity(IrregularityError::NotSorted(_))) => {
                failing = Some("weights_not_sorted".into());
            }
            Err(e) => return Err(Failure::Input(e.to_string())),
        }
    }
    if failing.is_none() {
        match decompose(frame, tol) {
            Ok(d) => {
                decomposition = Some(json!({
                    "split": d.split,
                    "alpha": d.alpha,
                    "complement_residual": d.complement_residual,
                    "prefix_overlap": d.prefix_overlap,
                }));
            }
            Err(StructureError::StructureMismatch { clause, .. }) => {
                failing = Some(clause.to_string());
            }
            Err(e) => return Err(Failure::Input(e.to_string())),
        }
    }

    let mut value = serde_json::to_value(&report).map_err(|e| Failure::Input(e.to_string()))?;
    if let Value::Object(map) = &mut value {
        map.insert("passed".into(), json!(failing.is_none()));
        map.insert("first_failing_clause".into(), json!(failing));
        map.insert("tail_index_set_ok".into(), json!(tail_ok));
        map.insert("decomposition".into(), decomposition.unwrap_or(Value::Null));
    }
    Ok((value, failing))
}

fn reconstruct_report<T: FrameScalar>(
    frame: &FusionFrame<T>,
    seed: u64,
    tol: f64,
) -> (Value, bool) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut f = nalgebra::DVector::<T>::from_fn(frame.ambient_dim(), |_, _| {
        T::standard_normal(&mut rng)
    });
    let norm = f.norm();
    f /= T::from_real(norm);

    let alpha = frame.is_tight(tol);
    let Some(alpha) = alpha else {
        return (
            json!({ "tight": false, "alpha": null, "relative_error": null, "ok": false }),
            false,
        );
    };
    let reconstructed = frame
        .reconstruct(alpha, &f, tol)
        .expect("tightness was just certified");
    let relative_error = (reconstructed - &f).norm() / f.norm();
    let ok = relative_error <= 1e-9;
    (
        json!({
            "tight": true,
            "alpha": alpha,
            "relative_error": relative_error,
            "ok": ok,
        }),
        ok,
    )
}

// silence unused-import warnings for items used only in some cfgs
#[allow(unused_imports)]
use construct as _construct_used;
#[allow(unused_imports)]
use PerturbationCurve as _curve_used;
