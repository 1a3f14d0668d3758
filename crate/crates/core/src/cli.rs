//! Command-line front end: `kernel`, `constant`, `verify`, `taylor`, `gen`.
//!
//! Exit codes are 0 on success, 1 when a verified inequality fails beyond its
//! slack and 2 on any input or evaluation error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcrep::{equispaced, parse_float, FunctionSpec, Interval, SmoothFunction};
use crate::opial::{classify_regime, Direction, InequalityReport, OpialProblem, RegimeTag, Theorem, YSource};
use crate::quad::QuadratureSpec;
use crate::taylor::TaylorExpansion;
use crate::testgen::{format_manifest, generate_suite, parse_manifest, InstanceSpec, SuiteConfig, RNG_ID};
use crate::widder::{BasisFamily, KernelSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "opialkit", version, about = "Widder kernels, Opial-type constants and inequality checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tabulate g_i(x, t) of a basis over a square grid.
    Kernel(KernelArgs),
    /// Evaluate the constant C(x) and samples of P.
    Constant(ConstantArgs),
    /// Check an inequality for one instance or a whole suite manifest.
    Verify(VerifyArgs),
    /// Tabulate the generalized Taylor identity.
    Taylor(TaylorArgs),
    /// Emit a seeded suite manifest.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputArgs {
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the run manifest (parameters, version, timestamp) as JSON here.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ProblemArgs {
    /// Widder basis, e.g. `monomials:2` or `exp-basis:0.5,1`.
    #[arg(long)]
    pub basis: Option<String>,
    /// `unit`, `widder`, `widder:<i>` or `greens:<spec>;<spec>;...`; widder when a basis is given, unit otherwise.
    #[arg(long)]
    pub kernel: Option<String>,
    /// `lo:hi`; defaults to the natural domain of `--f` or the span of `a` and `x`.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    #[arg(long, default_value = "const:1")]
    pub u: String,
    #[arg(long, default_value = "const:1")]
    pub v: String,
    /// Given y whose derivative supplies h unless `--h` is set.
    #[arg(long)]
    pub f: Option<String>,
    /// Given y (takes precedence over `--f`).
    #[arg(long)]
    pub y: Option<String>,
    /// Without `--f` or `--y`, y is derived as ∫_a^s Φ(s,t)|h(t)| dt.
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    /// Relative quadrature tolerance.
    #[arg(long)]
    pub quad_tol: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KernelArgs {
    #[arg(long)]
    pub basis: String,
    /// Kernel index; defaults to the basis order.
    #[arg(long)]
    pub i: Option<usize>,
    /// `lo:hi:n`, used for both x and t.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ConstantArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    /// `main`, `r2`, `extreme`, `regime` or `classical`; by default `main`
    /// for MAIN exponents and `regime` otherwise.
    #[arg(long)]
    pub theorem: Option<String>,
    /// Manifest of instances to verify instead of the problem flags.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Judge every report in this direction (`upper-bound` or `lower-bound`).
    #[arg(long)]
    pub force_direction: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TaylorArgs {
    #[arg(long)]
    pub basis: String,
    #[arg(long)]
    pub f: String,
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long)]
    pub n: usize,
    /// `lo:hi:n` grid of evaluation points.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    #[arg(long)]
    pub quad_tol: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instances per regime.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// Comma-separated tags (`MAIN`, `I`..`IX`) or `all`.
    #[arg(long, default_value = "I,II,III,IV,V,VI,VII,VIII,IX")]
    pub regimes: String,
    #[arg(long)]
    pub quad_tol: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

/// Record of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub version: String,
    pub seed: Option<u64>,
    pub rng: String,
    /// Seconds since the Unix epoch; ignored when comparing runs.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &str, params: &P, seed: Option<u64>) -> Self {
        let params = match serde_json::to_value(params) {
            Ok(serde_json::Value::Object(m)) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            command: command.into(),
            params,
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            rng: RNG_ID.into(),
            timestamp,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| "{}".into())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("run manifest: {e}")))
    }
}

/// What a command produced: the text to write, its manifest and exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub text: String,
    pub manifest: RunManifest,
    pub code: i32,
    /// Diagnostics for stderr.
    pub notes: Vec<String>,
}

/// Parses `args` (including the program name), runs the command and writes
/// its output. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let output = match &cli.command {
        Command::Kernel(a) => a.output.clone(),
        Command::Constant(a) => a.output.clone(),
        Command::Verify(a) => a.output.clone(),
        Command::Taylor(a) => a.output.clone(),
        Command::Gen(a) => a.output.clone(),
    };
    match run(&cli.command) {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("{note}");
            }
            if let Err(e) = emit(&output, &outcome) {
                eprintln!("error: {e}");
                return EXIT_INPUT;
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn emit(output: &OutputArgs, outcome: &Outcome) -> std::io::Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, &outcome.text)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(outcome.text.as_bytes())?;
            stdout.flush()?;
        }
    }
    if let Some(path) = &output.manifest {
        std::fs::write(path, outcome.manifest.to_json() + "\n")?;
    }
    Ok(())
}

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::Kernel(a) => cmd_kernel(a),
        Command::Constant(a) => cmd_constant(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Taylor(a) => cmd_taylor(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

/// `lo:hi`.
pub fn parse_domain(s: &str) -> Result<Interval> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(Error::Parse(format!("domain `{s}` is not lo:hi")));
    }
    Interval::new(parse_float(parts[0])?, parse_float(parts[1])?)
}

/// `lo:hi:n` with `n >= 1` points, endpoints included.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("grid `{s}` is not lo:hi:n")));
    }
    let lo = parse_float(parts[0])?;
    let hi = parse_float(parts[1])?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("grid size `{}` is not a count", parts[2])))?;
    if n == 0 || lo > hi || (n == 1 && lo != hi) {
        return Err(Error::Parse(format!("grid `{s}` needs lo <= hi and n >= 1 (n = 1 only when lo = hi)")));
    }
    Ok(if n == 1 { vec![lo] } else { equispaced(lo, hi, n) })
}

fn hull(points: &[f64]) -> Result<Interval> {
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo < hi {
        Interval::new(lo, hi)
    } else {
        Interval::new(lo, lo + 1.0)
    }
}

fn quad_spec(tol: Option<f64>) -> Result<QuadratureSpec> {
    let q = match tol {
        Some(t) => QuadratureSpec::default().with_tolerance(t),
        None => QuadratureSpec::default(),
    };
    q.validate()?;
    Ok(q)
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn json_line<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Invalid(format!("serialization failed: {e}")))
}

pub fn cmd_kernel(args: &KernelArgs) -> Result<Outcome> {
    let grid = parse_grid(&args.grid)?;
    let domain = match &args.domain {
        Some(d) => parse_domain(d)?,
        None => hull(&grid)?,
    };
    let family = BasisFamily::parse(&args.basis, domain)?;
    let i = args.i.unwrap_or(family.order());
    if i > family.order() {
        return Err(Error::Invalid(format!("kernel index {i} exceeds basis order {}", family.order())));
    }
    let mut rows = Vec::with_capacity(grid.len() * grid.len());
    for &x in &grid {
        for &t in &grid {
            rows.push((x, t, family.kernel_g(i, x, t)?));
        }
    }
    let text = match args.format {
        Format::Csv => csv_table(
            &["x", "t", "g"],
            &rows.iter().map(|&(x, t, g)| vec![fmt_f(x), fmt_f(t), fmt_f(g)]).collect::<Vec<_>>(),
        ),
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                x: f64,
                t: f64,
                g: f64,
            }
            let rows: Vec<Row> = rows.into_iter().map(|(x, t, g)| Row { x, t, g }).collect();
            json_line(&rows)? + "\n"
        }
    };
    let manifest = RunManifest::new("kernel", args, None)
        .with_param("i", i)
        .with_param("domain", domain.to_string());
    Ok(Outcome { text, manifest, code: EXIT_OK, notes: Vec::new() })
}

/// Problem assembled from flags, with its resolved domain and kernel label.
pub fn build_problem(p: &ProblemArgs) -> Result<(OpialProblem, Interval)> {
    let (alpha, beta, r) = match (p.alpha, p.beta, p.r) {
        (Some(a), Some(b), Some(r)) => (a, b, r),
        _ => return Err(Error::Invalid("--alpha, --beta and --r are required".into())),
    };
    let x = p.x.ok_or_else(|| Error::Invalid("--x is required".into()))?;
    let y_text = p.y.as_deref().or(p.f.as_deref());
    let y_spec: Option<FunctionSpec> = y_text.map(str::parse).transpose()?;
    let domain = match (&p.domain, y_spec.as_ref().and_then(FunctionSpec::natural_domain)) {
        (Some(d), _) => parse_domain(d)?,
        (None, Some(d)) => d,
        (None, None) => hull(&[p.a, x])?,
    };
    let func = |s: &str| -> Result<SmoothFunction> { Ok(SmoothFunction::from_spec(s.parse()?, domain)) };
    let basis = p.basis.as_deref().map(|b| BasisFamily::parse(b, domain).map(Arc::new)).transpose()?;
    let kernel_spec: KernelSpec = match &p.kernel {
        Some(k) => k.parse()?,
        None if basis.is_some() => KernelSpec::Widder(None),
        None => KernelSpec::Unit,
    };
    let kernel = kernel_spec.build(basis.as_ref(), domain)?;
    let y_fn = y_spec.map(|s| SmoothFunction::from_spec(s, domain));
    let h = match (&p.h, &p.f, &y_fn) {
        (Some(h), _, _) => func(h)?,
        (None, Some(_), Some(y)) => y.derivative(1)?,
        _ => return Err(Error::Invalid("--h is required unless --f supplies y and h = y'".into())),
    };
    let y = match y_fn {
        Some(y) => YSource::Given(y),
        None => YSource::Derived,
    };
    let exponents = crate::opial::ExponentTriple::new(alpha, beta, r)?;
    let prob = OpialProblem::new(kernel, func(&p.u)?, func(&p.v)?, h, y, p.a, x, exponents)?
        .with_quad(quad_spec(p.quad_tol)?);
    Ok((prob, domain))
}

pub fn cmd_constant(args: &ConstantArgs) -> Result<Outcome> {
    let (prob, domain) = build_problem(&args.problem)?;
    let regime = classify_regime(&prob.exponents);
    if regime.tag != RegimeTag::Main {
        return Err(Error::Regime(format!("the constant needs MAIN exponents; these are {}", regime.tag)));
    }
    let c = prob.opial_constant()?;
    let mut notes = Vec::new();
    if !c.integral.converged {
        notes.push(format!("warning: C(x) quadrature did not converge (error {})", c.error));
    }
    let text = match args.format {
        Format::Json => {
            #[derive(Serialize)]
            struct ConstantJson<'a> {
                #[serde(rename = "C")]
                c: f64,
                #[serde(rename = "P_samples")]
                p_samples: &'a [(f64, f64)],
                quad_error: f64,
            }
            json_line(&ConstantJson { c: c.value, p_samples: &c.p_samples, quad_error: c.error })? + "\n"
        }
        Format::Csv => csv_table(
            &["x", "C", "quad_error"],
            &[vec![fmt_f(prob.x), fmt_f(c.value), fmt_f(c.error)]],
        ),
    };
    let manifest = RunManifest::new("constant", args, None)
        .with_param("domain", domain.to_string())
        .with_param("kernel_resolved", prob.kernel.describe());
    Ok(Outcome { text, manifest, code: EXIT_OK, notes })
}

fn parse_theorem(s: &Option<String>) -> Result<Option<Theorem>> {
    s.as_deref().map(str::parse).transpose()
}

fn parse_direction(s: &Option<String>) -> Result<Option<Direction>> {
    match s.as_deref().map(str::parse::<Direction>).transpose()? {
        Some(Direction::NotApplicable) => Err(Error::Parse("a forced direction must be a bound".into())),
        d => Ok(d),
    }
}

/// The theorem checked for an instance when none is forced.
pub fn default_theorem(regime: RegimeTag) -> Theorem {
    if regime == RegimeTag::Main {
        Theorem::Main
    } else {
        Theorem::Regime
    }
}

/// Verifies one manifest instance.
pub fn verify_instance(spec: &InstanceSpec, theorem: Option<Theorem>, quad: &QuadratureSpec) -> Result<InequalityReport> {
    let prob = spec.build_problem(quad)?;
    prob.verify(theorem.unwrap_or_else(|| default_theorem(spec.regime)))
}

/// Largest gap between the two readings of `P` over the MAIN instances.
fn p_form_delta(specs: &[InstanceSpec], quad: &QuadratureSpec) -> Result<Option<f64>> {
    let mut worst: Option<f64> = None;
    for spec in specs.iter().filter(|s| s.regime == RegimeTag::Main) {
        let d = spec.build_problem(quad)?.p_form_delta()?;
        worst = Some(worst.map_or(d, |w| w.max(d)));
    }
    Ok(worst)
}

/// Maps `f` over `items` on all available cores, keeping input order.
pub fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len());
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("suite worker panicked"))
            .collect()
    })
}

const REPORT_HEADER: [&str; 12] = [
    "index",
    "theorem",
    "regime",
    "direction",
    "lhs",
    "constant",
    "rhs_core",
    "bound",
    "ratio",
    "satisfied",
    "quad_error",
    "as_printed_flag",
];

fn report_row(index: usize, r: &InequalityReport) -> Vec<String> {
    vec![
        index.to_string(),
        r.theorem.clone(),
        r.regime.to_string(),
        r.direction.to_string(),
        fmt_f(r.lhs),
        fmt_f(r.constant),
        fmt_f(r.rhs_core),
        fmt_f(r.bound),
        fmt_f(r.ratio),
        r.satisfied.to_string(),
        fmt_f(r.quad_error),
        r.as_printed_flag.to_string(),
    ]
}

/// Renders reports as JSON lines or CSV.
pub fn render_reports(reports: &[InequalityReport], format: Format) -> String {
    match format {
        Format::Json => reports.iter().map(|r| r.to_json() + "\n").collect(),
        Format::Csv => csv_table(
            &REPORT_HEADER,
            &reports.iter().enumerate().map(|(i, r)| report_row(i, r)).collect::<Vec<_>>(),
        ),
    }
}

/// A violated report, unless it records the extreme bound as printed.
pub fn is_violation(r: &InequalityReport) -> bool {
    !r.satisfied && !r.as_printed_flag
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome> {
    let theorem = parse_theorem(&args.theorem)?;
    let forced = parse_direction(&args.force_direction)?;
    let quad = quad_spec(args.problem.quad_tol)?;
    let mut notes = Vec::new();
    let mut manifest = RunManifest::new("verify", args, None);
    let (reports, lines): (Vec<InequalityReport>, Vec<String>) = match &args.suite {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
            let specs = parse_manifest(&text)?;
            manifest.seed = specs.first().map(|s| s.seed);
            manifest = manifest.with_param("instances", specs.len());
            let results = parallel_map(&specs, |s| verify_instance(s, theorem, &quad));
            let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
            if let Some(delta) = p_form_delta(&specs, &quad)? {
                notes.push(format!("P-form delta (max over MAIN instances): {delta:e}"));
            }
            (reports, specs.iter().map(ToString::to_string).collect())
        }
        None => {
            let (prob, domain) = build_problem(&args.problem)?;
            manifest = manifest
                .with_param("domain", domain.to_string())
                .with_param("kernel_resolved", prob.kernel.describe());
            let regime = classify_regime(&prob.exponents).tag;
            let report = prob.verify(theorem.unwrap_or_else(|| default_theorem(regime)))?;
            (vec![report], vec![String::from("(command-line instance)")])
        }
    };
    let reports: Vec<InequalityReport> = match forced {
        Some(d) => reports.iter().map(|r| r.reoriented(d)).collect(),
        None => reports,
    };
    let mut code = EXIT_OK;
    for (r, line) in reports.iter().zip(&lines) {
        if !r.converged {
            notes.push(format!("warning: quadrature did not converge for {line}"));
        }
        if is_violation(r) {
            code = EXIT_VIOLATION;
            notes.push(format!("violation ({} {}, ratio {}): {line}", r.theorem, r.direction, r.ratio));
        }
    }
    Ok(Outcome { text: render_reports(&reports, args.format), manifest, code, notes })
}

pub fn cmd_taylor(args: &TaylorArgs) -> Result<Outcome> {
    let grid = parse_grid(&args.grid)?;
    let domain = match &args.domain {
        Some(d) => parse_domain(d)?,
        None => {
            let mut pts = grid.clone();
            pts.push(args.t);
            hull(&pts)?
        }
    };
    let family = Arc::new(BasisFamily::parse(&args.basis, domain)?);
    let f = SmoothFunction::from_spec(args.f.parse()?, domain);
    if f.max_order() < args.n + 2 {
        return Err(Error::Invalid(format!(
            "f = {} supports {} derivatives; order {} needs {}",
            args.f,
            f.max_order(),
            args.n,
            args.n + 2
        )));
    }
    let quad = quad_spec(args.quad_tol)?;
    let exp = TaylorExpansion::new(family, f.clone(), args.t, args.n)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut notes = Vec::new();
    for &x in &grid {
        let fx = f.value(x)?;
        let partial = exp.eval(x)?;
        let rem = exp.remainder(x, &quad)?;
        if !rem.converged {
            notes.push(format!("warning: remainder at x = {x} did not converge"));
        }
        rows.push([x, fx, partial, rem.value, fx - partial - rem.value]);
    }
    let text = match args.format {
        Format::Csv => csv_table(
            &["x", "f", "partial_sum", "remainder", "residual"],
            &rows.iter().map(|r| r.iter().map(|&v| fmt_f(v)).collect()).collect::<Vec<_>>(),
        ),
        Format::Json => {
            let mut out = String::new();
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::json!({"x": r[0], "f": r[1], "partial_sum": r[2], "remainder": r[3], "residual": r[4]})
                );
            }
            out
        }
    };
    let manifest = RunManifest::new("taylor", args, None).with_param("domain", domain.to_string());
    Ok(Outcome { text, manifest, code: EXIT_OK, notes })
}

/// `MAIN,I,...`, or `all` for MAIN and I-IX.
pub fn parse_regimes(s: &str) -> Result<Vec<RegimeTag>> {
    if s.trim() == "all" {
        let mut v = vec![RegimeTag::Main];
        v.extend(RegimeTag::NUMBERED);
        return Ok(v);
    }
    let tags = s.split(',').map(str::parse).collect::<Result<Vec<RegimeTag>>>()?;
    if tags.contains(&RegimeTag::Unclassified) {
        return Err(Error::Parse("UNCLASSIFIED is not a generatable regime".into()));
    }
    Ok(tags)
}

pub fn cmd_gen(args: &GenArgs) -> Result<Outcome> {
    let regimes = parse_regimes(&args.regimes)?;
    let mut cfg = SuiteConfig::new(args.seed, args.count);
    cfg.quad = quad_spec(args.quad_tol)?;
    let specs = generate_suite(&cfg, &regimes)?;
    let header = format!(
        "# seed={} rng={} count={} regimes={}\n",
        args.seed,
        RNG_ID,
        args.count,
        regimes.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(",")
    );
    let manifest = RunManifest::new("gen", args, Some(args.seed)).with_param("instances", specs.len());
    Ok(Outcome { text: header + &format_manifest(&specs), manifest, code: EXIT_OK, notes: Vec::new() })
}
