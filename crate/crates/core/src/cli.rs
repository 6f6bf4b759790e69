//! The `lieflow` command line.
//!
//! Every subcommand loads one algebra (a preset, six inline parameters or a
//! structure-constants JSON file), prints a short report and optionally
//! writes machine-readable output next to `--out PREFIX`.
//!
//! Exit codes: 0 ok, 2 bad input, 3 singular matrix, 4 integration did not
//! complete, 5 domain error, 6 invariant failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::catalog3d::{
    case3_reduce, classify, diagonalize_r1, CaseLabel, CatalogError, DEFAULT_CLASSIFY_TOL,
};
use crate::curvature::{
    lower_index_transform, ricci_combined, ricci_contraction, ricci_parts, ricci_via_connection,
};
use crate::flow::{integrate, FlowConfig, FlowError, Method, Termination};
use crate::lie::{from_unimodular3, preset, LieError, StructureConstants, Unimodular3Params, PRESET_NAMES};
use crate::matrix::{factor_tri_orth, MatrixError, SquareMatrix};

const DEFAULT_CHECK_TOL: f64 = 1e-10;
const CHECK_SAMPLES: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "lieflow", version, about = "Ricci curvature and Ricci flow of left-invariant metrics")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ricci decomposition R1..R4, total and scalar curvature in the frame b0.
    Ricci {
        #[command(flatten)]
        source: Source,
        /// Frame matrix as JSON rows (default: identity).
        #[arg(long)]
        b0: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Integrate the Ricci flow of the frame and write the trajectory.
    Flow {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        flow: FlowArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Classify a six-parameter algebra by the shape of its R1 part.
    Classify {
        #[command(flatten)]
        source: Source,
        /// Replace a1, a2, a3 by the values that make R1 diagonal.
        #[arg(long)]
        solve_a: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Run the invariant battery on an algebra.
    Check {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        output: Output,
    },
    /// List the built-in algebras.
    Presets,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Built-in algebra name.
    #[arg(long)]
    preset: Option<String>,
    /// Six comma-separated values a1,a2,a3,b1,b2,b3.
    #[arg(long, allow_hyphen_values = true)]
    params: Option<String>,
    /// Structure-constants JSON file.
    #[arg(long)]
    algebra: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Output {
    /// Path prefix for output files; the extension is appended.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for random sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance for classification and invariant checks.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Rk4,
    Adaptive,
}

#[derive(Debug, Args)]
struct FlowArgs {
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    h0: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    /// Subtract the mean of the Ricci eigenvalues (volume-preserving flow).
    #[arg(long)]
    normalized: bool,
    #[arg(long)]
    collapse_threshold: Option<f64>,
    /// Record every N-th accepted step.
    #[arg(long)]
    sample_every: Option<u64>,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Cap on the step size.
    #[arg(long)]
    max_step: Option<f64>,
    /// Initial upper-triangular frame as JSON rows (default: identity).
    #[arg(long)]
    b0: Option<PathBuf>,
}

impl FlowArgs {
    fn config(&self) -> FlowConfig {
        let d = FlowConfig::default();
        FlowConfig {
            method: match self.method {
                Some(MethodArg::Rk4) => Method::Rk4Fixed,
                Some(MethodArg::Adaptive) | None => d.method,
            },
            h0: self.h0.unwrap_or(d.h0),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            t_end: self.t_end.unwrap_or(d.t_end),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            collapse_threshold: self.collapse_threshold.unwrap_or(d.collapse_threshold),
            min_step: d.min_step.min(self.h0.unwrap_or(d.h0) / 2.0),
            max_step: self.max_step.or(d.max_step),
            sample_every: self.sample_every.unwrap_or(d.sample_every),
            normalized: self.normalized,
        }
    }
}

#[derive(Debug)]
enum CliError {
    BadInput(String),
    Singular(String),
    Incomplete(String),
    Domain(String),
    Invariant(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::BadInput(_) => 2,
            CliError::Singular(_) => 3,
            CliError::Incomplete(_) => 4,
            CliError::Domain(_) => 5,
            CliError::Invariant(_) => 6,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::BadInput(m)
            | CliError::Singular(m)
            | CliError::Incomplete(m)
            | CliError::Domain(m)
            | CliError::Invariant(m) => m,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::BadInput(format!("i/o error: {e}"))
    }
}

impl From<MatrixError> for CliError {
    fn from(e: MatrixError) -> Self {
        match e {
            MatrixError::Singular { .. } => CliError::Singular(e.to_string()),
            other => CliError::BadInput(other.to_string()),
        }
    }
}

impl From<LieError> for CliError {
    fn from(e: LieError) -> Self {
        match e {
            LieError::Matrix(m) => m.into(),
            other => CliError::BadInput(other.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Matrix(m) => m.into(),
            FlowError::Lie(l) => l.into(),
            FlowError::DegenerateFrame => CliError::Incomplete(e.to_string()),
            other => CliError::BadInput(other.to_string()),
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Domain(m) => CliError::Domain(m),
            CatalogError::Lie(l) => l.into(),
        }
    }
}

struct Algebra {
    name: String,
    constants: StructureConstants,
    params: Option<Unimodular3Params>,
}

fn parse_params(text: &str) -> Result<Unimodular3Params, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::BadInput(format!("bad number `{s}` in --params: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let arr: [f64; 6] = values.as_slice().try_into().map_err(|_| {
        CliError::BadInput(format!("--params needs 6 values a1,a2,a3,b1,b2,b3, got {}", values.len()))
    })?;
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(CliError::BadInput("--params values must be finite".into()));
    }
    Ok(Unimodular3Params::from_array(arr))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::BadInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::BadInput(format!("cannot parse {}: {e}", path.display())))
}

fn load_algebra(source: &Source) -> Result<Algebra, CliError> {
    if let Some(name) = &source.preset {
        let p = preset(name)?;
        return Ok(Algebra {
            name: name.clone(),
            constants: from_unimodular3(&p),
            params: Some(p),
        });
    }
    if let Some(text) = &source.params {
        let p = parse_params(text)?;
        return Ok(Algebra {
            name: "params".into(),
            constants: from_unimodular3(&p),
            params: Some(p),
        });
    }
    let path = source.algebra.as_ref().expect("clap enforces one algebra source");
    let constants: StructureConstants = read_json(path)?;
    let params = Unimodular3Params::from_constants(&constants, 1e-12).ok();
    Ok(Algebra {
        name: path.display().to_string(),
        constants,
        params,
    })
}

fn load_frame(path: Option<&PathBuf>, n: usize) -> Result<SquareMatrix, CliError> {
    let Some(path) = path else {
        return Ok(SquareMatrix::identity(n));
    };
    let b: SquareMatrix = read_json(path)?;
    if b.dim() != n {
        return Err(CliError::BadInput(format!(
            "b0 is {0}x{0} but the algebra has dimension {n}",
            b.dim()
        )));
    }
    Ok(b)
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_file(prefix: &Path, ext: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = with_extension(prefix, ext);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

fn matrix_text(m: &SquareMatrix) -> String {
    let rows: Vec<String> = m
        .rows()
        .iter()
        .map(|r| {
            // adding 0.0 prints negative zero as 0
            let cells: Vec<String> = r.iter().map(|x| (x + 0.0).to_string()).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn describe(alg: &Algebra) -> String {
    match alg.params {
        Some(p) => format!("{} ({p})", alg.name),
        None => format!("{} (dimension {})", alg.name, alg.constants.dim()),
    }
}

/// Writes the report to `PREFIX.json` when `--out` is given. Classification
/// and check reports have no tabular form, so `--format` does not apply.
fn write_json_report(output: &Output, value: &serde_json::Value, out: &mut dyn Write) -> Result<(), CliError> {
    let Some(prefix) = &output.out else {
        return Ok(());
    };
    let path = write_file(prefix, "json", &json_text(value))?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn cmd_ricci(source: &Source, b0: Option<&PathBuf>, output: &Output, out: &mut dyn Write) -> Result<(), CliError> {
    let alg = load_algebra(source)?;
    let b = load_frame(b0, alg.constants.dim())?;
    let parts = ricci_parts(&alg.constants.transform(&b)?);

    writeln!(out, "algebra: {}", describe(&alg))?;
    for (label, m) in [
        ("R1", &parts.r1),
        ("R2", &parts.r2),
        ("R3", &parts.r3),
        ("R4", &parts.r4),
        ("total", &parts.total),
    ] {
        writeln!(out, "{label} = {}", matrix_text(m))?;
    }
    writeln!(out, "scalar = {}", parts.scalar)?;

    if let Some(prefix) = &output.out {
        if output.format.csv() {
            let mut csv = String::from("quantity,i,j,value\n");
            for (label, m) in [
                ("R1", &parts.r1),
                ("R2", &parts.r2),
                ("R3", &parts.r3),
                ("R4", &parts.r4),
                ("total", &parts.total),
            ] {
                let n = m.dim();
                for i in 0..n {
                    for j in 0..n {
                        writeln!(csv, "{label},{},{},{}", i + 1, j + 1, m[(i, j)]).unwrap();
                    }
                }
            }
            writeln!(csv, "scalar,,,{}", parts.scalar).unwrap();
            let path = write_file(prefix, "csv", &csv)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        if output.format.json() {
            let value = json!({ "algebra": alg.constants, "b0": b, "ricci": parts });
            let path = write_file(prefix, "json", &json_text(&value))?;
            writeln!(out, "wrote {}", path.display())?;
        }
    }
    Ok(())
}

fn cmd_flow(
    source: &Source,
    args: &FlowArgs,
    output: &Output,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let alg = load_algebra(source)?;
    let b0 = load_frame(args.b0.as_ref(), alg.constants.dim())?;
    let cfg = args.config();
    if output.out.is_none() && output.format == Format::Both {
        return Err(CliError::BadInput("--format both needs --out".into()));
    }
    let traj = integrate(&alg.constants, &b0, &cfg)?;

    // with no --out the trajectory itself goes to stdout, so the summary
    // moves to stderr
    let summary: &mut dyn Write = match &output.out {
        Some(prefix) => {
            if output.format.csv() {
                let path = write_file(prefix, "csv", &traj.to_csv())?;
                writeln!(out, "wrote {}", path.display())?;
            }
            if output.format.json() {
                let path = write_file(prefix, "json", &json_text(&traj.to_json(&alg.constants, &cfg)))?;
                writeln!(out, "wrote {}", path.display())?;
            }
            out
        }
        None => {
            match output.format {
                Format::Json => out.write_all(json_text(&traj.to_json(&alg.constants, &cfg)).as_bytes())?,
                _ => out.write_all(traj.to_csv().as_bytes())?,
            }
            err
        }
    };

    let last = traj.last();
    writeln!(summary, "algebra: {}", describe(&alg))?;
    writeln!(summary, "termination: {}", traj.termination.as_str())?;
    writeln!(summary, "samples: {}", traj.samples.len())?;
    writeln!(summary, "t_final: {}", last.t)?;
    if let Some(t) = traj.collapse_time_estimate {
        writeln!(summary, "collapse_time_estimate: {t}")?;
    }
    match traj.termination {
        Termination::Completed | Termination::Collapsed => Ok(()),
        other => Err(CliError::Incomplete(format!(
            "integration stopped early ({}) at t = {}",
            other.as_str(),
            last.t
        ))),
    }
}

fn cmd_classify(source: &Source, solve_a: bool, output: &Output, out: &mut dyn Write) -> Result<(), CliError> {
    let alg = load_algebra(source)?;
    let mut p = alg.params.ok_or_else(|| {
        CliError::BadInput("classify needs a three-dimensional six-parameter algebra".into())
    })?;
    if solve_a {
        if [p.b1, p.b2, p.b3].contains(&0.0) {
            return Err(CliError::Domain("--solve-a needs b1, b2, b3 all nonzero".into()));
        }
        p = p.with_solved_a();
    }
    let tol = output.tol.unwrap_or(DEFAULT_CLASSIFY_TOL);
    let class = classify(&p, tol);

    writeln!(out, "params: {p}")?;
    writeln!(out, "label: {:?}", class.label)?;
    let [e1, e2, e3] = class.residuals.0;
    writeln!(out, "residuals: {e1}, {e2}, {e3}")?;
    let mut report = json!({ "params": p, "label": class.label, "residuals": class.residuals });

    match class.label {
        CaseLabel::CaseIII => {
            let red = case3_reduce(p.b1, p.b2, p.b3)?;
            let a = red.angles;
            writeln!(out, "rho: {}", a.rho)?;
            writeln!(out, "alpha: {}", a.alpha)?;
            writeln!(out, "beta: {}", a.beta)?;
            writeln!(out, "frame (columns E1, E2, E3): {}", matrix_text(&red.frame))?;
            writeln!(out, "reduced constants: {:?}", red.constants)?;
            report["reduction"] = json!(red);
        }
        CaseLabel::NonDiagonalR1 => {
            let d = diagonalize_r1(&p);
            writeln!(out, "rotation: {}", matrix_text(&d.rotation))?;
            writeln!(out, "R1 eigenvalues: {:?}", d.eigenvalues)?;
            writeln!(out, "rotated constants: {:?}", d.constants)?;
            report["diagonalization"] = json!(d);
        }
        CaseLabel::CaseI | CaseLabel::CaseII => {}
    }
    write_json_report(output, &report, out)
}

struct CheckLine {
    name: &'static str,
    /// `None` for informational lines.
    pass: Option<bool>,
    detail: String,
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> SquareMatrix {
    loop {
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = SquareMatrix::new(n, data).expect("finite samples");
        if let Ok(f) = factor_tri_orth(&m) {
            return f.u;
        }
    }
}

fn run_battery(c: &StructureConstants, tol: f64, seed: u64) -> Result<Vec<CheckLine>, CliError> {
    let scale = c.max_abs().max(1.0);
    let quad_tol = tol * scale * scale;
    let mut lines = Vec::new();

    let jacobi = c.jacobi_defect();
    lines.push(CheckLine {
        name: "jacobi",
        pass: Some(jacobi <= quad_tol),
        detail: format!("defect {jacobi:e}"),
    });

    let unimodular = c.unimodular_defect();
    let is_unimodular = unimodular <= tol * scale;
    lines.push(CheckLine {
        name: "unimodular",
        pass: None,
        detail: if is_unimodular {
            format!("yes (defect {unimodular:e})")
        } else {
            format!("no (defect {unimodular:e})")
        },
    });

    let parts = ricci_parts(c);
    let via_connection = ricci_via_connection(c);
    let combined = ricci_combined(c);
    let agree = parts
        .total
        .max_abs_diff(&via_connection)
        .max(parts.total.max_abs_diff(&combined));
    lines.push(CheckLine {
        name: "ricci_routes",
        pass: Some(agree <= quad_tol),
        detail: format!("max difference {agree:e}"),
    });

    let asym = ricci_contraction(c).asymmetry();
    lines.push(CheckLine {
        name: "ricci_symmetric",
        pass: Some(asym <= quad_tol),
        detail: format!("asymmetry {asym:e}"),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..CHECK_SAMPLES {
        let u = random_orthogonal(&mut rng, c.dim());
        let rotated = ricci_parts(&c.transform(&u)?).total;
        let expected = lower_index_transform(&u, &parts.total);
        worst = worst.max(rotated.max_abs_diff(&expected));
    }
    lines.push(CheckLine {
        name: "orthogonal_equivariance",
        pass: Some(worst <= quad_tol),
        detail: format!("{CHECK_SAMPLES} samples (seed {seed}), max deviation {worst:e}"),
    });

    if is_unimodular {
        let r2 = parts.r2.max_abs();
        lines.push(CheckLine {
            name: "r2_vanishes",
            pass: Some(r2 <= quad_tol),
            detail: format!("R2 = 0 (unimodular), max |R2| {r2:e}"),
        });
    } else {
        lines.push(CheckLine {
            name: "r2_vanishes",
            pass: None,
            detail: "skipped (not unimodular)".into(),
        });
    }
    Ok(lines)
}

fn cmd_check(source: &Source, output: &Output, out: &mut dyn Write) -> Result<(), CliError> {
    let alg = load_algebra(source)?;
    let tol = output.tol.unwrap_or(DEFAULT_CHECK_TOL);
    let lines = run_battery(&alg.constants, tol, output.seed)?;

    writeln!(out, "algebra: {}", describe(&alg))?;
    for l in &lines {
        let status = match l.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "note",
        };
        writeln!(out, "{status} {}: {}", l.name, l.detail)?;
    }
    let report = json!({
        "algebra": alg.constants,
        "tol": tol,
        "seed": output.seed,
        "checks": lines.iter().map(|l| json!({ "name": l.name, "pass": l.pass, "detail": l.detail })).collect::<Vec<_>>(),
    });
    write_json_report(output, &report, out)?;

    let failed: Vec<&str> = lines.iter().filter(|l| l.pass == Some(false)).map(|l| l.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("failed: {}", failed.join(", "))))
    }
}

fn cmd_presets(out: &mut dyn Write) -> Result<(), CliError> {
    for name in PRESET_NAMES {
        let p = preset(name)?;
        writeln!(out, "{name:<10} {p}")?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                return 2;
            }
            let _ = out.write_all(text.as_bytes());
            return 0;
        }
    };
    let result = match &cli.command {
        Command::Ricci { source, b0, output } => cmd_ricci(source, b0.as_ref(), output, out),
        Command::Flow { source, flow, output } => cmd_flow(source, flow, output, out, err),
        Command::Classify { source, solve_a, output } => cmd_classify(source, *solve_a, output, out),
        Command::Check { source, output } => cmd_check(source, output, out),
        Command::Presets => cmd_presets(out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
