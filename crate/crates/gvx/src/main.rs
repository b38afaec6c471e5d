use std::io::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rug::Float;
use serde::Serialize;

use gvx::angle;
use gvx::coeffs::{self, ModelParams, MomentTable, MAX_ORDER};
use gvx::error::Error;
use gvx::exec::Execution;
use gvx::oracle;
use gvx::specfun::LEGENDRE_MAX_ORDER;
use gvx::sumsq::{self, EvalConfig, LambdaStrategy, Representation, SeriesResult};
use gvx::variance::{self, Method};

const DEFAULT_SEED: u64 = 20240601;
const DEFAULT_SAMPLES: usize = 1_000_000;
const MAX_RANGE_POINTS: usize = 100_000;

#[derive(Parser)]
#[command(name = "gvx", version, about = "Exact distributions of the sum of squares, sample variance and angle of gamma samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a cdf at a value or over a range start:stop:step.
    Cdf(CdfArgs),
    /// Dump β, μ, γ and the difference weights δ as CSV.
    Coeffs(CoeffsArgs),
    /// The tan Φ polynomial cdf on [0, (n−1)^{−1/2}] or its coefficients (integer α).
    Angle(AngleArgs),
    /// Evaluate a cdf over lists of α and n.
    Table(TableArgs),
    /// Monte Carlo check of the exact cdfs (KS distances, moments, identity).
    Verify(VerifyArgs),
    /// Configuration.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print every default as JSON.
    Print,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dist {
    /// Σ Xᵢ², evaluated at the radius r: Pr{Z ≤ r²}.
    Ssq,
    /// Pr{S² ≤ x}.
    Svar,
    /// Pr{S ≤ x}.
    S,
    /// Pr{U ≤ x} with U = √Z / ΣXᵢ.
    U,
    /// Pr{tan Φ ≤ x}.
    AngleTan,
}

impl Dist {
    fn name(self) -> &'static str {
        match self {
            Dist::Ssq => "ssq",
            Dist::Svar => "svar",
            Dist::S => "s",
            Dist::U => "u",
            Dist::AngleTan => "angle-tan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Thm41,
    Thm42,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReprArg {
    /// Power series (the double series for the variance).
    #[value(alias = "series")]
    Power,
    Mixture,
    Legendre,
    Fourier,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args, Clone)]
struct Model {
    /// Gamma shape α > 0.
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    /// Sample size n ≥ 1.
    #[arg(long)]
    n: usize,
}

#[derive(Args, Clone)]
struct EvalOpts {
    /// Variance route: thm41 (double series/mixture), thm42 (integer α) or auto.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Series representation [default: auto].
    #[arg(long, value_enum)]
    representation: Option<ReprArg>,
    /// Absolute error target.
    #[arg(long, default_value_t = EvalConfig::default().tol)]
    tol: f64,
    /// Term budget for the inner and outer series [default: 2000 inner, 5000 outer].
    #[arg(long, env = "GVX_MAX_TERMS")]
    max_terms: Option<usize>,
    /// Mixture scale: sqrt-n, moment or a positive number.
    #[arg(long, default_value = "sqrt-n")]
    lambda: String,
}

#[derive(Args)]
struct CdfArgs {
    #[arg(long, value_enum)]
    dist: Dist,
    #[command(flatten)]
    model: Model,
    /// A value or an inclusive range start:stop:step. For ssq the value is the radius r.
    #[arg(long, allow_hyphen_values = true)]
    at: String,
    #[command(flatten)]
    eval: EvalOpts,
    /// Output format [default: json for one value, csv for a range].
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct CoeffsArgs {
    #[command(flatten)]
    model: Model,
    /// Highest order K [default: smallest K whose mixture-weight tail at λ = √n is below tol/20].
    #[arg(long)]
    order: Option<usize>,
    /// Absolute error target used for the default order.
    #[arg(long, default_value_t = EvalConfig::default().tol)]
    tol: f64,
    /// Scale for δ: sqrt-n, moment or a positive number.
    #[arg(long, default_value = "sqrt-n")]
    lambda: String,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("what").required(true).args(["t", "coeffs"])))]
struct AngleArgs {
    #[command(flatten)]
    model: Model,
    /// Value or range of tan Φ in [0, (n−1)^{−1/2}].
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    /// Print the coefficients a_{2j} as CSV.
    #[arg(long)]
    coeffs: bool,
    /// Output format [default: json for one value, csv for a range].
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, value_enum)]
    dist: Dist,
    /// Comma-separated shapes.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha: Vec<f64>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// A value or an inclusive range start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    at: String,
    #[command(flatten)]
    eval: EvalOpts,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

/// Failure of a subcommand: exit code and message.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Self { code: 2, message: msg.into() }
    }

    fn from_error(e: Error, hint: &str) -> Self {
        if e.is_invalid_input() {
            return Self::invalid(e.to_string());
        }
        Self {
            code: 3,
            message: if hint.is_empty() { e.to_string() } else { format!("{e}\nhint: {hint}") },
        }
    }
}

type Outcome = Result<(u8, String), Failure>;

/// One evaluated point.
#[derive(Debug, Clone, Serialize)]
struct Row {
    alpha: f64,
    n: usize,
    statistic: &'static str,
    x: f64,
    cdf: f64,
    representation: String,
    terms_used: usize,
    est_error: f64,
}

/// Parsed `--at`: the points and the decimals used to print them.
struct Points {
    xs: Vec<f64>,
    range: bool,
}

fn decimals(s: &str) -> usize {
    let mantissa = s.split(['e', 'E']).next().unwrap_or("");
    mantissa.split('.').nth(1).map_or(0, str::len)
}

fn parse_num(s: &str, what: &str) -> Result<f64, Failure> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Failure::invalid(format!("{what}: cannot parse {s:?} as a number")))?;
    if !v.is_finite() {
        return Err(Failure::invalid(format!("{what}: {s:?} is not finite")));
    }
    Ok(v)
}

fn parse_points(s: &str) -> Result<Points, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(Points {
            xs: vec![parse_num(v, "--at")?],
            range: false,
        }),
        [a, b, c] => {
            let (start, stop, step) = (parse_num(a, "start")?, parse_num(b, "stop")?, parse_num(c, "step")?);
            if !(step > 0.0) || stop < start {
                return Err(Failure::invalid("range needs start <= stop and step > 0"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > MAX_RANGE_POINTS {
                return Err(Failure::invalid(format!("range has {count} points, at most {MAX_RANGE_POINTS} allowed")));
            }
            let d = decimals(a).max(decimals(c)) as i32;
            let scale = 10f64.powi(d);
            let xs = (0..count)
                .map(|i| {
                    let x = start + i as f64 * step;
                    if d <= 15 {
                        (x * scale).round() / scale
                    } else {
                        x
                    }
                })
                .collect();
            Ok(Points { xs, range: true })
        }
        _ => Err(Failure::invalid(format!("--at must be a value or start:stop:step, got {s:?}"))),
    }
}

fn parse_lambda(s: &str) -> Result<LambdaStrategy, Failure> {
    match s {
        "sqrt-n" => Ok(LambdaStrategy::SqrtN),
        "moment" => Ok(LambdaStrategy::Moment),
        v => {
            let x = parse_num(v, "--lambda")?;
            if x <= 0.0 {
                return Err(Failure::invalid(format!("--lambda must be positive, got {x}")));
            }
            Ok(LambdaStrategy::Fixed(x))
        }
    }
}

fn model(m: &Model) -> Result<ModelParams, Failure> {
    ModelParams::new(m.alpha, m.n).map_err(|e| Failure::invalid(e.to_string()))
}

fn eval_config(opts: &EvalOpts) -> Result<EvalConfig, Failure> {
    let mut cfg = EvalConfig::default().with_tol(opts.tol);
    if let Some(m) = opts.max_terms {
        cfg.max_k = m.min(MAX_ORDER);
        cfg.max_j = m;
    }
    if let Some(r) = opts.representation {
        cfg.representation = match r {
            ReprArg::Power => Representation::Power,
            ReprArg::Mixture => Representation::Mixture,
            ReprArg::Legendre => Representation::Legendre,
            ReprArg::Fourier => Representation::Fourier,
            ReprArg::Auto => Representation::Auto,
        };
    }
    cfg.lambda_strategy = parse_lambda(&opts.lambda)?;
    cfg.validate().map_err(|e| Failure::invalid(e.to_string()))?;
    Ok(cfg)
}

fn method(opts: &EvalOpts, dist: Dist) -> Result<Method, Failure> {
    match (opts.method, dist) {
        (None, _) => Ok(Method::Auto),
        (Some(m), Dist::Svar | Dist::S) => Ok(match m {
            MethodArg::Thm41 => Method::Thm41,
            MethodArg::Thm42 => Method::Thm42,
            MethodArg::Auto => Method::Auto,
        }),
        (Some(_), d) => Err(Failure::invalid(format!("--method applies to svar and s, not {}", d.name()))),
    }
}

fn hint(dist: Dist, params: ModelParams, method: Method, cfg: &EvalConfig) -> String {
    match dist {
        Dist::Ssq => match cfg.representation {
            Representation::Mixture => "try --representation power or a larger --tol".into(),
            _ => "try --representation mixture or a larger --tol".into(),
        },
        Dist::Svar | Dist::S => {
            let budget = "raise --max-terms (or GVX_MAX_TERMS) or use a larger --tol";
            match (method, params.integer_alpha()) {
                (Method::Thm41, Some(_)) => format!("the double series failed; try --method thm42, or {budget}"),
                (Method::Thm42, _) => format!("the truncated-moment route failed; try --method thm41, or {budget}"),
                _ => budget.into(),
            }
        }
        Dist::U => "the Legendre series failed; try a larger --tol".into(),
        Dist::AngleTan => "the angle polynomial failed; try --dist u with x = sqrt((1 + t^2)/n)".into(),
    }
}

fn row(params: ModelParams, dist: Dist, x: f64, r: &SeriesResult) -> Row {
    Row {
        alpha: params.alpha,
        n: params.n,
        statistic: dist.name(),
        x,
        cdf: r.value,
        representation: r.representation.name().into(),
        terms_used: r.terms_used,
        est_error: r.est_error,
    }
}

fn tan_rows(params: ModelParams, ts: &[f64], cfg: &EvalConfig) -> gvx::error::Result<Vec<Row>> {
    params.require_variance()?;
    let n = params.n as f64;
    for &t in ts {
        if !(t >= 0.0) || t > (n - 1.0).sqrt() {
            return Err(Error::Domain(format!("tan phi must lie in [0, sqrt(n-1)], got {t}")));
        }
    }
    let tn = angle::phi_n_tan(params);
    if params.integer_alpha().is_some() && ts.iter().all(|&t| t <= tn) {
        let c = angle::solve_angle_coeffs(params)?;
        return ts
            .iter()
            .map(|&t| {
                Ok(Row {
                    alpha: params.alpha,
                    n: params.n,
                    statistic: Dist::AngleTan.name(),
                    x: t,
                    cdf: c.tan_cdf(t)?,
                    representation: "tan-polynomial".into(),
                    terms_used: c.a.len(),
                    est_error: c.residual,
                })
            })
            .collect();
    }
    // tan²Φ = nU² − 1
    let us: Vec<f64> = ts.iter().map(|t| ((1.0 + t * t) / n).sqrt().min(1.0)).collect();
    let res = sumsq::cdf_u_many(params, &us, cfg)?;
    Ok(ts.iter().zip(&res).map(|(&t, r)| row(params, Dist::AngleTan, t, r)).collect())
}

fn evaluate(dist: Dist, params: ModelParams, xs: &[f64], cfg: &EvalConfig, method: Method) -> gvx::error::Result<Vec<Row>> {
    let wrap = |res: Vec<SeriesResult>| xs.iter().zip(&res).map(|(&x, r)| row(params, dist, x, r)).collect();
    match dist {
        Dist::Ssq => sumsq::cdf_sumsq_many(params, xs, cfg).map(wrap),
        Dist::Svar => variance::svar_cdf_many(params, xs, cfg, method).map(wrap),
        Dist::S => {
            if let Some(x) = xs.iter().find(|x| !(**x >= 0.0)) {
                return Err(Error::Domain(format!("s must be nonnegative, got {x}")));
            }
            let s2: Vec<f64> = xs.iter().map(|x| x * x).collect();
            variance::svar_cdf_many(params, &s2, cfg, method).map(wrap)
        }
        Dist::U => sumsq::cdf_u_many(params, xs, cfg).map(wrap),
        Dist::AngleTan => tan_rows(params, xs, cfg),
    }
}

/// Shortest round-trip text, in exponent form for very small or large values.
fn fmt_f64(v: f64) -> String {
    if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn render(rows: &[Row], format: Format, single: bool, with_model: bool) -> Result<String, Failure> {
    let io = |e: String| Failure { code: 3, message: e };
    match format {
        Format::Json if single => serde_json::to_string(&rows[0]).map(|s| s + "\n").map_err(|e| io(e.to_string())),
        Format::Json => serde_json::to_string(rows).map(|s| s + "\n").map_err(|e| io(e.to_string())),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["x", "cdf", "est_error", "terms_used", "representation"];
            if with_model {
                header.splice(0..0, ["alpha", "n"]);
            }
            w.write_record(&header).map_err(|e| io(e.to_string()))?;
            for r in rows {
                let mut rec = vec![
                    fmt_f64(r.x),
                    fmt_f64(r.cdf),
                    fmt_f64(r.est_error),
                    r.terms_used.to_string(),
                    r.representation.clone(),
                ];
                if with_model {
                    rec.splice(0..0, [fmt_f64(r.alpha), r.n.to_string()]);
                }
                w.write_record(&rec).map_err(|e| io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| io(e.to_string()))
        }
        Format::Table => {
            let mut out = String::new();
            if with_model {
                out += &format!("{:>8} {:>4} ", "alpha", "n");
            }
            out += &format!("{:>14} {:>20} {:>10} {:>6}  {}\n", "x", "cdf", "est_error", "terms", "representation");
            for r in rows {
                if with_model {
                    out += &format!("{:>8} {:>4} ", r.alpha, r.n);
                }
                out += &format!(
                    "{:>14} {:>20.15} {:>10.2e} {:>6}  {}\n",
                    r.x, r.cdf, r.est_error, r.terms_used, r.representation
                );
            }
            Ok(out)
        }
    }
}

fn cmd_cdf(a: &CdfArgs) -> Outcome {
    let params = model(&a.model)?;
    let cfg = eval_config(&a.eval)?;
    let method = method(&a.eval, a.dist)?;
    let points = parse_points(&a.at)?;
    let rows = evaluate(a.dist, params, &points.xs, &cfg, method)
        .map_err(|e| Failure::from_error(e, &hint(a.dist, params, method, &cfg)))?;
    let format = a.format.unwrap_or(if points.range { Format::Csv } else { Format::Json });
    Ok((0, render(&rows, format, !points.range, false)?))
}

fn cmd_table(a: &TableArgs) -> Outcome {
    let cfg = eval_config(&a.eval)?;
    let method = method(&a.eval, a.dist)?;
    let points = parse_points(&a.at)?;
    let mut rows = Vec::new();
    for &alpha in &a.alpha {
        for &n in &a.n {
            let params = ModelParams::new(alpha, n).map_err(|e| Failure::invalid(e.to_string()))?;
            let r = evaluate(a.dist, params, &points.xs, &cfg, method)
                .map_err(|e| Failure::from_error(e, &hint(a.dist, params, method, &cfg)))?;
            rows.extend(r);
        }
    }
    Ok((0, render(&rows, a.format, false, true)?))
}

/// Decimal text of `v`, or `log:` followed by ln|v| (with a leading `-` for
/// negative values) outside the double range.
fn fmt_mp(v: &Float) -> String {
    if v.is_zero() {
        return "0".into();
    }
    let f = v.to_f64();
    if f.is_finite() && f.abs() >= f64::MIN_POSITIVE {
        return format!("{f:e}");
    }
    let ln = Float::with_val(v.prec(), v.abs_ref()).ln().to_f64();
    let sign = if v.is_sign_negative() { "-" } else { "" };
    format!("{sign}log:{ln}")
}

fn cmd_coeffs(a: &CoeffsArgs) -> Outcome {
    let params = model(&a.model)?;
    let mut cfg = EvalConfig::default().with_tol(a.tol);
    cfg.lambda_strategy = parse_lambda(&a.lambda)?;
    cfg.validate().map_err(|e| Failure::invalid(e.to_string()))?;
    let order = match a.order {
        Some(k) if k > MAX_ORDER => return Err(Failure::invalid(format!("--order may not exceed {MAX_ORDER}"))),
        Some(k) => k,
        None => sumsq::mixture_order(params, &cfg),
    };
    let fail = |e: Error| Failure::from_error(e, "use a smaller --order");
    let prec = coeffs::default_precision(params, order).max(sumsq::mixture_precision(params.alpha_n(), order, cfg.tol));
    let table = MomentTable::build(params, order, prec).map_err(fail)?;
    let lambda = cfg.lambda_strategy.resolve(params).map_err(fail)?;
    let scaled = coeffs::scaled_moments(&table, lambda).map_err(fail)?;
    let delta = coeffs::differences(&scaled, order).map_err(fail)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure { code: 3, message: e.to_string() };
    w.write_record(["k", "beta_sign", "log_abs_beta", "mu", "gamma", "delta_lambda"]).map_err(io)?;
    for k in 0..=order {
        w.write_record([
            k.to_string(),
            table.beta_sign(k).to_string(),
            table.log_abs_beta()[k].to_string(),
            fmt_mp(&table.mu()[k]),
            fmt_mp(&table.gamma()[k]),
            fmt_mp(&delta.values[k]),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure { code: 3, message: e.to_string() })?;
    Ok((0, String::from_utf8_lossy(&bytes).into_owned()))
}

fn cmd_angle(a: &AngleArgs) -> Outcome {
    let params = model(&a.model)?;
    if params.integer_alpha().is_none() {
        return Err(Failure::invalid("the angle polynomial needs an integer alpha; use cdf --dist angle-tan"));
    }
    let hint = hint(Dist::AngleTan, params, Method::Auto, &EvalConfig::default());
    if a.coeffs {
        let c = angle::solve_angle_coeffs(params).map_err(|e| Failure::from_error(e, &hint))?;
        let mut out = String::from("j,a_2j\n");
        for (j, v) in c.a_mp().iter().enumerate() {
            out += &format!("{j},{}\n", fmt_mp(v));
        }
        return Ok((0, out));
    }
    let points = parse_points(a.t.as_deref().unwrap_or_default())?;
    let tn = angle::phi_n_tan(params);
    if let Some(t) = points.xs.iter().find(|&&t| !(t >= 0.0) || t > tn * (1.0 + 1e-12)) {
        return Err(Failure::invalid(format!("t must lie in [0, {tn}], got {t}")));
    }
    let rows = tan_rows(params, &points.xs, &EvalConfig::default()).map_err(|e| Failure::from_error(e, &hint))?;
    let format = a.format.unwrap_or(if points.range { Format::Csv } else { Format::Json });
    Ok((0, render(&rows, format, !points.range, false)?))
}

fn cmd_verify(a: &VerifyArgs) -> Outcome {
    let params = model(&a.model)?;
    let mode = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let report = oracle::verify(params, a.samples, a.seed, mode)
        .map_err(|e| Failure::from_error(e, "an exact cdf failed on the KS grid; check the cdf subcommand at the reported point"))?;
    let code = if report.pass { 0 } else { 1 };
    if a.json {
        let s = serde_json::to_string_pretty(&report).map_err(|e| Failure { code: 3, message: e.to_string() })?;
        return Ok((code, s + "\n"));
    }
    let mut out = format!(
        "alpha = {}, n = {}, samples = {}, seed = {}\n",
        report.alpha, report.n, report.samples, report.seed
    );
    for e in &report.entries {
        out += &format!(
            "ks {:<8} {:.3e} (critical {:.3e}) {}\n",
            e.statistic,
            e.ks,
            e.critical,
            if e.pass { "pass" } else { "FAIL" }
        );
    }
    for m in &report.moments {
        out += &format!(
            "moment {:<10} exact {:.8e} mc {:.8e} se {:.2e} z {:+.2} {}\n",
            m.statistic,
            m.exact,
            m.mc_mean,
            m.mc_se,
            m.z_score,
            if m.pass { "pass" } else { "FAIL" }
        );
    }
    out += &format!(
        "identity max relative error {:.2e} {}\n",
        report.identity_error,
        if report.identity_error < oracle::IDENTITY_TOL { "pass" } else { "FAIL" }
    );
    out += if report.pass { "overall pass\n" } else { "overall FAIL\n" };
    Ok((code, out))
}

#[derive(Serialize)]
struct ConfigDump {
    eval: EvalConfig,
    method: Method,
    format_single: &'static str,
    format_range: &'static str,
    max_order: usize,
    legendre_max_order: usize,
    max_range_points: usize,
    max_terms_env: Option<String>,
    verify: VerifyDefaults,
}

#[derive(Serialize)]
struct VerifyDefaults {
    samples: usize,
    seed: u64,
    grid_points: usize,
    grid_tol: f64,
    ks_critical_coefficient: f64,
    moment_z: f64,
    identity_tol: f64,
}

fn cmd_config() -> Outcome {
    let env = std::env::var("GVX_MAX_TERMS").ok();
    let mut eval = EvalConfig::default();
    if let Some(v) = &env {
        let m: usize = v
            .parse()
            .map_err(|_| Failure::invalid(format!("GVX_MAX_TERMS must be a positive integer, got {v:?}")))?;
        eval.max_k = m.min(MAX_ORDER);
        eval.max_j = m;
    }
    let dump = ConfigDump {
        eval,
        method: Method::default(),
        format_single: "json",
        format_range: "csv",
        max_order: MAX_ORDER,
        legendre_max_order: LEGENDRE_MAX_ORDER,
        max_range_points: MAX_RANGE_POINTS,
        max_terms_env: env,
        verify: VerifyDefaults {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            grid_points: oracle::GRID_POINTS,
            grid_tol: oracle::GRID_TOL,
            ks_critical_coefficient: 1.63,
            moment_z: oracle::MOMENT_Z,
            identity_tol: oracle::IDENTITY_TOL,
        },
    };
    let s = serde_json::to_string_pretty(&dump).map_err(|e| Failure { code: 3, message: e.to_string() })?;
    Ok((0, s + "\n"))
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Cdf(a) => cmd_cdf(a),
        Command::Coeffs(a) => cmd_coeffs(a),
        Command::Angle(a) => cmd_angle(a),
        Command::Table(a) => cmd_table(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Config { action: ConfigAction::Print } => cmd_config(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((code, out)) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
