//! Command-line front end. Every invocation produces one [`OutputRecord`],
//! rendered as JSON or CSV, and an exit code:
//! 0 pass, 1 check failure, 2 usage or domain error, 3 parameters outside
//! the hypotheses of a bound.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::bounds::{calderon_constant, kernel_bound_sweep, BoundSweepSpec, GridAxis, KernelKind};
use crate::combinatorics::{check_partition_enumeration, check_stirling_generating, check_stirling_recursion, MultiIndex};
use crate::error::{Error, Result};
use crate::hermite::{
    check_binomial_identity, check_generating_derivative, check_generating_function, check_integral_representation,
    gauss_hermite_rule, hermite, hermite_coefficients, hermite_normalized, ou_generator_coefficients,
    rodrigues_coefficients,
};
use crate::kernels::oracle::{DifferenceOracle, OracleControls, SpectralOracle};
use crate::kernels::{mehler, mtn_closed, mtn_closed_product_form, KernelQuery};
use crate::operator::{eigenfunction_check, multinomial_reduction_check, semigroup_composition_residual};
use crate::weyl::{commutation_report, normal_order_xy_power_check, WeylElement};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Parser, Debug)]
#[command(name = "ou-kernels", version, about = "Integral kernels of derivatives of the Ornstein-Uhlenbeck semigroup")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate M_t^N(x, y), optionally against an oracle
    Eval(EvalArgs),
    /// Run an identity suite
    Verify(VerifyArgs),
    /// Kernel-bound sweeps and the Calderon constant
    Bounds(BoundsArgs),
    /// Tabulate kernel values on a grid
    Table(TableArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Spectral,
    Fd,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Stirling,
    Weyl,
    Hermite,
    Kernels,
    Operator,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelArg {
    #[value(name = "K", alias = "k")]
    K,
    #[value(name = "Ktilde", alias = "ktilde")]
    Ktilde,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long = "N", default_value_t = 0)]
    pub order: usize,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Comma-separated coordinates
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub y: Vec<f64>,
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    /// Tolerance on the oracle deviation [default: 1e-9 spectral, 1e-5 fd]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fixed truncation of the spectral series
    #[arg(long)]
    pub trunc: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub fd_step: f64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Replaces the identity and spectral tolerances; finite-difference
    /// tolerances are fixed
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[arg(long, value_enum, conflicts_with = "calderon")]
    pub kernel: Option<KernelArg>,
    /// Compute the Calderon constant instead of a sweep
    #[arg(long)]
    pub calderon: bool,
    #[arg(long = "N", default_value_t = 1)]
    pub order: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long = "C", default_value_t = 1.0, allow_hyphen_values = true)]
    pub c: f64,
    #[arg(long = "T", default_value_t = 1.0, allow_hyphen_values = true)]
    pub time_cap: f64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Differentiated coordinate of Ktilde, 1-based
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    /// min,max of the time axis
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true, default_values_t = [0.05, 0.95])]
    pub t_range: Vec<f64>,
    #[arg(long, default_value_t = 73)]
    pub t_steps: usize,
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true, default_values_t = [-3.0, 3.0])]
    pub x_range: Vec<f64>,
    #[arg(long, default_value_t = 241)]
    pub x_steps: usize,
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true, default_values_t = [-3.0, 3.0])]
    pub y_range: Vec<f64>,
    #[arg(long, default_value_t = 241)]
    pub y_steps: usize,
    /// Ratios above this count as violations
    #[arg(long, default_value_t = 1.0)]
    pub ratio_cap: f64,
    /// Eigenvalues for the Calderon integral
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 5, 40])]
    pub n_list: Vec<u64>,
    #[arg(long, default_value_t = 400)]
    pub quad_points: usize,
    /// Tolerance of the Calderon checks
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    #[arg(long = "N", default_value_t = 0)]
    pub order: usize,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Times: comma-separated values or `min:max:steps` ranges
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub t: Vec<String>,
    /// Per-coordinate grid of x, same syntax as --t
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub y: Vec<String>,
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

pub type Row = Map<String, Value>;

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct OutputRecord {
    pub schema_version: String,
    pub command: String,
    pub params: Map<String, Value>,
    pub rows: Vec<Row>,
    pub status: Status,
}

impl OutputRecord {
    fn new(command: &str, params: Map<String, Value>, rows: Vec<Row>, status: Status) -> Self {
        Self { schema_version: SCHEMA_VERSION.into(), command: command.into(), params, rows, status }
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass | Status::Info => 0,
            Status::Fail => 1,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("record serializes");
                s.push('\n');
                s
            }
            Format::Csv => self.render_csv(),
        }
    }

    fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if let Some(first) = self.rows.first() {
            w.write_record(first.keys()).expect("in-memory write");
            for row in &self.rows {
                w.write_record(row.values().map(cell)).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Exit code for an error: 3 outside the hypotheses, 1 for a numerical
/// failure, 2 otherwise.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::OutOfHypothesis(_) => 3,
        Error::NonConvergence(_) => 1,
        _ => 2,
    }
}

pub fn run(cli: &Cli) -> Result<(OutputRecord, Format)> {
    match &cli.command {
        Command::Eval(a) => Ok((cmd_eval(a)?, a.format)),
        Command::Verify(a) => Ok((cmd_verify(a)?, a.format)),
        Command::Bounds(a) => Ok((cmd_bounds(a)?, a.format)),
        Command::Table(a) => Ok((cmd_table(a)?, a.format)),
    }
}

fn row(pairs: Vec<(&str, Value)>) -> Row {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn check_len(name: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::Domain(format!("--{name} needs {dim} comma-separated values, got {}", v.len())));
    }
    Ok(())
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn oracle_value(kind: OracleKind, q: &KernelQuery, spectral: &SpectralOracle, fd: &DifferenceOracle) -> Result<f64> {
    match kind {
        OracleKind::Spectral => spectral.mtn(q),
        OracleKind::Fd => fd.mtn(q),
    }
}

fn default_tol(kind: OracleKind) -> f64 {
    match kind {
        OracleKind::Spectral => 1e-9,
        OracleKind::Fd => 1e-5,
    }
}

fn oracle_name(kind: OracleKind) -> &'static str {
    match kind {
        OracleKind::Spectral => "spectral",
        OracleKind::Fd => "fd",
    }
}

pub fn cmd_eval(a: &EvalArgs) -> Result<OutputRecord> {
    check_len("x", &a.x, a.dim)?;
    check_len("y", &a.y, a.dim)?;
    let q = KernelQuery::new(a.t, a.order, a.x.clone(), a.y.clone())?;
    let controls = OracleControls { trunc: a.trunc, fd_step: a.fd_step, ..OracleControls::default() };
    let value = mtn_closed(&q);
    let mut params = row(vec![
        ("t", json!(a.t)),
        ("N", json!(a.order)),
        ("dim", json!(a.dim)),
        ("x", json!(a.x)),
        ("y", json!(a.y)),
    ]);
    let mut r = row(vec![("t", json!(a.t)), ("N", json!(a.order)), ("x", json!(a.x)), ("y", json!(a.y)), ("value", json!(value))]);
    let mut status = Status::Info;
    if let Some(kind) = a.oracle {
        let tol = a.tol.unwrap_or(default_tol(kind));
        params.insert("oracle".into(), json!(oracle_name(kind)));
        params.insert("tol".into(), json!(tol));
        let oracle = oracle_value(kind, &q, &SpectralOracle::new(controls), &DifferenceOracle::new(controls))?;
        let dev = relative(value, oracle);
        r.insert("oracle".into(), json!(oracle));
        r.insert("deviation".into(), json!(dev));
        status = if dev <= tol { Status::Pass } else { Status::Fail };
    }
    Ok(OutputRecord::new("eval", params, vec![r], status))
}

/// Parses `1,2.5,0:1:5` style lists; `a:b:n` is `n` equally spaced points.
pub fn parse_grid(tokens: &[String]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in tokens {
        let parts: Vec<&str> = tok.split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Domain(format!("cannot parse grid entry {tok:?}")));
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [lo, hi, n] => {
                let n: usize = n.trim().parse().map_err(|_| Error::Domain(format!("cannot parse grid entry {tok:?}")))?;
                out.extend(GridAxis::new(num(lo)?, num(hi)?, n).points());
            }
            _ => return Err(Error::Domain(format!("cannot parse grid entry {tok:?}"))),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(out)
}

fn tensor_points(axis: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for _ in 0..dim {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    pts
}

pub fn cmd_table(a: &TableArgs) -> Result<OutputRecord> {
    if a.dim == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let ts = parse_grid(&a.t)?;
    let xs = tensor_points(&parse_grid(&a.x)?, a.dim);
    let ys = tensor_points(&parse_grid(&a.y)?, a.dim);
    let spectral = SpectralOracle::new(OracleControls::default());
    let fd = DifferenceOracle::new(OracleControls::default());
    let tol = a.oracle.map(|k| a.tol.unwrap_or(default_tol(k)));
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &t in &ts {
        for x in &xs {
            for y in &ys {
                let q = KernelQuery::new(t, a.order, x.clone(), y.clone())?;
                let value = mtn_closed(&q);
                let mut r = row(vec![("t", json!(t)), ("N", json!(a.order))]);
                for (i, v) in x.iter().enumerate() {
                    r.insert(format!("x{}", i + 1), json!(v));
                }
                for (i, v) in y.iter().enumerate() {
                    r.insert(format!("y{}", i + 1), json!(v));
                }
                r.insert("value".into(), json!(value));
                if let Some(kind) = a.oracle {
                    let o = oracle_value(kind, &q, &spectral, &fd)?;
                    let dev = relative(value, o);
                    worst = worst.max(dev);
                    r.insert("oracle".into(), json!(o));
                    r.insert("deviation".into(), json!(dev));
                }
                rows.push(r);
            }
        }
    }
    let mut params = row(vec![
        ("N", json!(a.order)),
        ("dim", json!(a.dim)),
        ("t", json!(a.t)),
        ("x", json!(a.x)),
        ("y", json!(a.y)),
    ]);
    let status = match (a.oracle, tol) {
        (Some(kind), Some(tol)) => {
            params.insert("oracle".into(), json!(oracle_name(kind)));
            params.insert("tol".into(), json!(tol));
            if worst <= tol {
                Status::Pass
            } else {
                Status::Fail
            }
        }
        _ => Status::Info,
    };
    Ok(OutputRecord::new("table", params, rows, status))
}

pub fn cmd_bounds(a: &BoundsArgs) -> Result<OutputRecord> {
    if a.calderon {
        let report = calderon_constant(a.order, a.alpha, &a.n_list, a.quad_points)?;
        let params = row(vec![
            ("mode", json!("calderon")),
            ("N", json!(a.order)),
            ("alpha", json!(a.alpha)),
            ("n_list", json!(a.n_list)),
            ("quad_points", json!(a.quad_points)),
            ("tol", json!(a.tol)),
        ]);
        let passed = report.deviation < a.tol && report.closed_form_error < a.tol;
        let r = serde_json::to_value(&report).expect("report serializes");
        let r = r.as_object().cloned().unwrap_or_default();
        return Ok(OutputRecord::new("bounds", params, vec![r], if passed { Status::Pass } else { Status::Fail }));
    }
    let kind = match a.kernel.unwrap_or(KernelArg::K) {
        KernelArg::K => KernelKind::K,
        KernelArg::Ktilde => {
            if a.j == 0 || a.j > a.dim {
                return Err(Error::Domain(format!("--j must be between 1 and {}", a.dim)));
            }
            KernelKind::KTilde(a.j - 1)
        }
    };
    let spec = BoundSweepSpec {
        order: a.order,
        alpha: a.alpha,
        c: a.c,
        time_cap: a.time_cap,
        dim: a.dim,
        t_grid: GridAxis::new(a.t_range[0], a.t_range[1], a.t_steps),
        x_grid: GridAxis::new(a.x_range[0], a.x_range[1], a.x_steps),
        y_grid: GridAxis::new(a.y_range[0], a.y_range[1], a.y_steps),
        j: None,
        ratio_cap: a.ratio_cap,
    };
    let report = kernel_bound_sweep(&spec, kind)?;
    let params = row(vec![
        ("mode", json!("sweep")),
        ("kernel", json!(if kind == KernelKind::K { "K" } else { "Ktilde" })),
        ("N", json!(a.order)),
        ("alpha", json!(a.alpha)),
        ("C", json!(a.c)),
        ("T", json!(a.time_cap)),
        ("dim", json!(a.dim)),
    ]);
    let status = if report.passed() { Status::Pass } else { Status::Fail };
    let r = serde_json::to_value(&report).expect("report serializes");
    Ok(OutputRecord::new("bounds", params, vec![r.as_object().cloned().unwrap_or_default()], status))
}

struct Check {
    suite: &'static str,
    name: String,
    residual: Option<f64>,
    tolerance: Option<f64>,
    passed: bool,
    detail: String,
}

impl Check {
    fn exact(suite: &'static str, name: impl Into<String>, passed: bool) -> Self {
        Self { suite, name: name.into(), residual: None, tolerance: None, passed, detail: String::new() }
    }

    fn numeric(suite: &'static str, name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            residual: Some(residual),
            tolerance: Some(tolerance),
            passed: residual <= tolerance,
            detail: String::new(),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = detail;
        self
    }

    fn into_row(self) -> Row {
        row(vec![
            ("suite", json!(self.suite)),
            ("check", json!(self.name)),
            ("residual", json!(self.residual)),
            ("tolerance", json!(self.tolerance)),
            ("passed", json!(self.passed)),
            ("detail", json!(self.detail)),
        ])
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    GridAxis::new(lo, hi, n).points()
}

fn stirling_suite() -> Vec<Check> {
    vec![
        Check::exact("stirling", "partition enumeration, N <= 10", check_partition_enumeration(10)),
        Check::exact("stirling", "generating identity j^N = sum S(N,n) (j)_n, N, j <= 20", check_stirling_generating(20, 20)),
        Check::exact("stirling", "recursion with factor n, N <= 30", check_stirling_recursion(30)),
    ]
}

fn weyl_suite() -> Vec<Check> {
    let x = WeylElement::x();
    let y = WeylElement::y();
    let comm = x.multiply(&y) - y.multiply(&x);
    let mut out = vec![
        Check::exact("weyl", "(xy)^m = sum S(m,i) x^i y^i, m <= 12", normal_order_xy_power_check(12))
            .with_detail(format!("(xy)^3 = {}", WeylElement::d().power(3))),
        Check::exact("weyl", "xy - yx = -1", comm == -WeylElement::one()).with_detail(comm.to_string()),
    ];
    out.extend(commutation_report(10).into_iter().map(|c| Check::exact("weyl", c.name, c.passed)));
    out
}

fn hermite_suite(tol: Option<f64>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for x in linspace(-3.0, 3.0, 13) {
        for t in linspace(-1.0, 1.0, 9) {
            worst = worst.max(check_generating_function(x, t, 80));
        }
    }
    out.push(Check::numeric("hermite", "generating function, |x| <= 3, |t| <= 1, 80 terms", worst, tol.unwrap_or(1e-10)));

    let mut worst: f64 = 0.0;
    for n in 0..=30 {
        for x in linspace(-3.0, 3.0, 7) {
            for y in linspace(-3.0, 3.0, 7) {
                worst = worst.max(check_binomial_identity(n, x, y));
            }
        }
    }
    out.push(Check::numeric("hermite", "binomial identity, n <= 30", worst, tol.unwrap_or(1e-10)));

    let rule = gauss_hermite_rule(80)?;
    let mut worst: f64 = 0.0;
    for n in 0..=20 {
        for x in linspace(-2.0, 2.0, 9) {
            worst = worst.max(check_integral_representation(n, x, &rule)?);
        }
    }
    out.push(Check::numeric("hermite", "integral representation, n <= 20, |x| <= 2", worst, tol.unwrap_or(1e-8)));

    let rule = gauss_hermite_rule(25)?;
    let mut worst: f64 = 0.0;
    for m in 0..=20 {
        for n in 0..=20 {
            let ip = rule.integrate(|x| hermite_normalized(m, x) * hermite_normalized(n, x));
            worst = worst.max((ip - if m == n { 1.0 } else { 0.0 }).abs());
        }
    }
    out.push(Check::numeric("hermite", "orthonormality, m, n <= 20, 25 nodes", worst, tol.unwrap_or(1e-11)));

    let mut worst: f64 = 0.0;
    for order in 1..=4 {
        for x in linspace(-2.0, 2.0, 9) {
            for t in linspace(0.1, 2.0, 9) {
                worst = worst.max(check_generating_derivative(order, x, t, 1e-2)?);
            }
        }
    }
    out.push(Check::numeric("hermite", "d^N/dt^N of the generating function, N <= 4", worst, 1e-5));

    let mut worst: f64 = 0.0;
    for n in 0..=40 {
        for x in linspace(0.0, 5.0, 11) {
            let (a, b) = (hermite(n, -x), if n % 2 == 0 { 1.0 } else { -1.0 } * hermite(n, x));
            worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
        }
    }
    out.push(Check::numeric("hermite", "parity, n <= 40, |x| <= 5", worst, tol.unwrap_or(1e-12)));

    out.push(Check::exact(
        "hermite",
        "Rodrigues formula equals the recurrence, n <= 15",
        (0..=15).all(|n| rodrigues_coefficients(n) == hermite_coefficients(n)),
    ));
    out.push(Check::exact(
        "hermite",
        "eigenvalue identity (1/2 H'' - x H') = -n H, n <= 15",
        (0..=15).all(|n| {
            let h = hermite_coefficients(n);
            ou_generator_coefficients(&h) == h.iter().map(|c| c * -(n as i64)).collect::<Vec<_>>()
        }),
    ));
    Ok(out)
}

const GRID_TIMES: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
const GRID_COORDS: [f64; 5] = [-3.0, -1.0, 0.0, 0.5, 2.0];

fn kernels_suite(tol: Option<f64>) -> Result<Vec<Check>> {
    let spectral = SpectralOracle::new(OracleControls::default());
    let fd = DifferenceOracle::new(OracleControls::default());
    let mut out = Vec::new();
    let mut sym: f64 = 0.0;
    let mut assembly: f64 = 0.0;
    let mut collapse = true;
    let mut positive = true;
    for d in 1..=2 {
        let pts = tensor_points(&GRID_COORDS, d);
        for order in 0..=4 {
            let (mut ws, mut wf, mut count) = (0.0f64, 0.0f64, 0usize);
            for &t in &GRID_TIMES {
                for x in &pts {
                    for y in &pts {
                        let q = KernelQuery::new(t, order, x.clone(), y.clone())?;
                        let c = mtn_closed(&q);
                        ws = ws.max(relative(c, spectral.mtn(&q)?));
                        wf = wf.max(relative(c, fd.mtn(&q)?));
                        count += 1;
                        sym = sym.max(relative(mtn_closed(&q.swapped()), c));
                        let p = mtn_closed_product_form(&q);
                        assembly = assembly.max((p - c).abs() / c.abs().max(p.abs()).max(f64::MIN_POSITIVE));
                        if order == 0 {
                            let m = mehler(t, x, y)?;
                            collapse &= m == c;
                            positive &= m > 0.0;
                        }
                    }
                }
            }
            out.push(Check::numeric("kernels", format!("closed form vs spectral, d={d}, N={order}, {count} points"), ws, tol.unwrap_or(1e-9)));
            out.push(Check::numeric("kernels", format!("closed form vs finite differences, d={d}, N={order}, {count} points"), wf, 1e-5));
        }
    }
    out.push(Check::numeric("kernels", "symmetry M(x,y) = M(y,x)", sym, tol.unwrap_or(1e-9)));
    out.push(Check::numeric("kernels", "both d-dimensional assemblies agree", assembly, tol.unwrap_or(1e-12)));
    out.push(Check::exact("kernels", "N = 0 equals the Mehler kernel bit for bit", collapse));
    out.push(Check::exact("kernels", "Mehler kernel positive on the grid", positive));
    Ok(out)
}

fn operator_suite(tol: Option<f64>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let rule = gauss_hermite_rule(20)?;
    for d in 1..=2usize {
        let pts = tensor_points(&[-1.5, 0.0, 0.7, 2.0], d);
        let mut worst: f64 = 0.0;
        for k in 0..=8 {
            for alpha in crate::combinatorics::compositions(k, d)? {
                for order in 0..=3 {
                    for t in [0.2, 1.0, 2.0] {
                        worst = worst.max(eigenfunction_check(&alpha, t, order, &pts, &rule)?);
                    }
                }
            }
        }
        out.push(Check::numeric("operator", format!("eigenfunction action, d={d}, |alpha| <= 8, N <= 3"), worst, tol.unwrap_or(1e-8)));
    }
    let rule = gauss_hermite_rule(60)?;
    let mut worst: f64 = 0.0;
    for (s, t) in [(0.1, 1.5), (0.5, 0.5), (1.0, 0.3)] {
        for n in 0..=3 {
            for m in 0..=3 - n {
                for (x, y) in [(-2.0, 0.5), (1.0, 2.0), (0.0, -1.5)] {
                    worst = worst.max(semigroup_composition_residual(s, t, n, m, &[x], &[y], &rule)?);
                }
            }
        }
    }
    out.push(Check::numeric("operator", "semigroup composition, N + M <= 3, d = 1", worst, tol.unwrap_or(1e-7)));
    let mut worst: f64 = 0.0;
    for (a, x) in [(vec![1, 1], vec![1.0, 1.0]), (vec![3, 0, 2], vec![0.5, -1.0, 2.0]), (vec![2, 4], vec![-0.3, 1.2])] {
        let alpha = MultiIndex::new(a)?;
        for order in 0..=4 {
            worst = worst.max(multinomial_reduction_check(&alpha, 0.4, order, &x)?);
        }
    }
    out.push(Check::numeric("operator", "multinomial reduction to one dimension", worst, tol.unwrap_or(1e-12)));
    Ok(out)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<OutputRecord> {
    if let Some(tol) = a.tol {
        if !(tol > 0.0) {
            return Err(Error::Domain("--tol must be positive".into()));
        }
    }
    let mut checks = Vec::new();
    let all = a.suite == Suite::All;
    if all || a.suite == Suite::Stirling {
        checks.extend(stirling_suite());
    }
    if all || a.suite == Suite::Weyl {
        checks.extend(weyl_suite());
    }
    if all || a.suite == Suite::Hermite {
        checks.extend(hermite_suite(a.tol)?);
    }
    if all || a.suite == Suite::Kernels {
        checks.extend(kernels_suite(a.tol)?);
    }
    if all || a.suite == Suite::Operator {
        checks.extend(operator_suite(a.tol)?);
    }
    let passed = checks.iter().all(|c| c.passed);
    let suite = a.suite.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let params = row(vec![("suite", json!(suite)), ("tol", json!(a.tol))]);
    let rows = checks.into_iter().map(Check::into_row).collect();
    Ok(OutputRecord::new("verify", params, rows, if passed { Status::Pass } else { Status::Fail }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ou-kernels").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn grid_syntax() {
        let v = parse_grid(&["0.5".into(), "1:2:3".into()]).unwrap();
        assert_eq!(v, vec![0.5, 1.0, 1.5, 2.0]);
        assert!(parse_grid(&["a".into()]).is_err());
        assert!(parse_grid(&["1:2".into()]).is_err());
        assert_eq!(parse_grid(&["0:1:0".into()]).unwrap_err(), Error::EmptyGrid);
    }

    #[test]
    fn eval_origin() {
        let (rec, _) = run(&parse(&["eval", "--t", "1", "--N", "0", "--dim", "1", "--x", "0", "--y", "0"])).unwrap();
        let v = rec.rows[0]["value"].as_f64().unwrap();
        assert!((v - (1.0 - (-2f64).exp()).powf(-0.5)).abs() < 1e-15);
        assert_eq!(rec.status, Status::Info);
        assert_eq!(rec.schema_version, "1");
    }

    #[test]
    fn eval_with_oracle_and_errors() {
        let (rec, _) =
            run(&parse(&["eval", "--t", "1", "--N", "1", "--x", "0", "--y", "0", "--oracle", "spectral"])).unwrap();
        assert_eq!(rec.status, Status::Pass);
        let e = run(&parse(&["eval", "--t", "0", "--x", "0", "--y", "0"])).unwrap_err();
        assert_eq!(e.to_string(), "t must be positive");
        assert_eq!(error_exit_code(&e), 2);
        let e = run(&parse(&["eval", "--t", "1", "--dim", "2", "--x", "0", "--y", "0,1"])).unwrap_err();
        assert_eq!(error_exit_code(&e), 2);
        let (rec, _) = run(&parse(&["eval", "--t", "1", "--N", "2", "--x", "-1", "--y", "-0.5", "--oracle", "fd"])).unwrap();
        assert_eq!(rec.status, Status::Pass);
    }

    #[test]
    fn table_csv() {
        let (rec, fmt) = run(&parse(&["table", "--t", "0.5,1", "--x", "0", "--y", "0"])).unwrap();
        assert_eq!(fmt, Format::Csv);
        let text = rec.render(fmt);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "t,N,x1,y1,value");
        let v: f64 = lines[2].split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(v, mehler(1.0, &[0.0], &[0.0]).unwrap());
    }

    #[test]
    fn bounds_hypothesis_gate() {
        let cli = parse(&["bounds", "--kernel", "K", "--alpha", "1.5", "--T", "1", "--t-steps", "3", "--x-steps", "3", "--y-steps", "3"]);
        let e = run(&cli).unwrap_err();
        assert_eq!(error_exit_code(&e), 3);
        assert!(e.to_string().contains("alpha below largeness threshold"));
    }

    #[test]
    fn calderon_mode() {
        let (rec, _) = run(&parse(&["bounds", "--calderon", "--N", "2", "--alpha", "3", "--n-list", "1,5,40"])).unwrap();
        assert_eq!(rec.status, Status::Pass);
        let c = rec.rows[0]["constant"].as_f64().unwrap();
        assert!((c - 1.0 / 27.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        let e = Cli::try_parse_from(["ou-kernels", "verify", "--suite", "nope"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn small_suites_pass() {
        for s in ["stirling", "weyl"] {
            let (rec, _) = run(&parse(&["verify", "--suite", s])).unwrap();
            assert_eq!(rec.status, Status::Pass, "{s}");
        }
    }
}
