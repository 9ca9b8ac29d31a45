//! The `p2h` command line.
//!
//! Every run writes exactly one artifact, atomically, with the full
//! configuration and the crate version embedded. Exit codes: 0 success,
//! 2 invalid input, 3 exactness or structure violation, 4 tolerance
//! failure, 5 fit failure.
//!
//! `P2H_PRECISION` selects the working precision. Only `double` exists;
//! asking for `extended` is a validation error.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{parse_complex_pair, series_for, AlphaValue, FormalSeries, Mode, XPoint};
use crate::diffpoly::rational;
use crate::error::{Error, Result};
use crate::frames::{
    characteristic_rate_profile, degree_report, normalize_angle, ray_rate_profile, rays, sectors,
    stokes_exponents, transform_equation,
};
use crate::hierarchy::{
    beta_closed_form, beta_recurrence, build_p2n, emit, verify_intermediate_form, Format,
    HierarchyEquation,
};
use crate::integrator::{
    compile_system, integrate_path, pole_map, pole_map_csv, seed_from_series, trajectory_csv, Fan,
    Options, PathSpec, Status,
};
use crate::variational::{companion_a0, rates_csv, separation_rate, set_distance};
use crate::{Kind, ARTIFACT_VERSION};

#[derive(Debug, Parser, Serialize)]
#[command(name = "p2h", version, about = "Second Painleve hierarchy workbench")]
pub struct Cli {
    /// Artifact path; defaults to `<subcommand>.<ext>` in the working directory.
    #[arg(short, long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build P_II^(n) and print it.
    GenEq(GenEqArgs),
    /// Formal series coefficients near infinity.
    Series(SeriesArgs),
    /// The equation in Boutroux variables.
    TransformEq(TransformArgs),
    /// Rays and sectors.
    Sectors(SectorArgs),
    /// Exponential rates per ray, optionally measured.
    Rates(RatesArgs),
    /// Integrate along a path from a series seed.
    Integrate(IntegrateArgs),
    /// Scan a fan of rays for poles.
    Polemap(PolemapArgs),
    /// Run the invariant suite for one n.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    Json,
    Csv,
    Latex,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Infty,
    Zero,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Infty => Kind::Infty,
            KindArg::Zero => Kind::Zero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(Debug, Args, Serialize)]
pub struct GenEqArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, value_enum, default_value = "latex")]
    pub format: OutFormat,
}

/// Options shared by everything that needs a series.
#[derive(Debug, Args, Serialize, Clone)]
pub struct SeriesOpts {
    #[arg(long, value_enum, default_value = "infty")]
    pub kind: KindArg,
    /// `formal`, a rational, a real, or `RE,IM`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub alpha: String,
    #[arg(long = "K", default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub branch: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct SeriesArgs {
    #[arg(long)]
    pub n: u32,
    #[command(flatten)]
    pub series: SeriesOpts,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutFormat,
}

#[derive(Debug, Args, Serialize)]
pub struct TransformArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutFormat,
}

#[derive(Debug, Args, Serialize)]
pub struct SectorArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, value_enum, default_value = "infty")]
    pub kind: KindArg,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub inner_radius: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct RatesArgs {
    #[arg(long)]
    pub n: u32,
    /// Comma-separated angles in radians; defaults to the rays.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Vec<f64>,
    /// Measure separation rates by integrating perturbations.
    #[arg(long)]
    pub measure: bool,
    /// `LO,HI` radii of the measurement window.
    #[arg(long, default_value = "20,60")]
    pub window: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 40)]
    pub chunks: usize,
    #[command(flatten)]
    pub series: SeriesOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct IntegrateArgs {
    #[arg(long)]
    pub n: u32,
    /// JSON path file `{"start": [re, im], "segments": [...]}`.
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Argument of the start point used for the seed's fractional powers.
    #[arg(long, allow_hyphen_values = true)]
    pub arg: Option<f64>,
    /// Minimum arclength between stored samples.
    #[arg(long)]
    pub spacing: Option<f64>,
    #[command(flatten)]
    pub series: SeriesOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct PolemapArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = PI, allow_hyphen_values = true)]
    pub center: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub half_width: f64,
    #[arg(long, default_value_t = 25)]
    pub count: usize,
    #[arg(long, default_value_t = 60.0)]
    pub r_seed: f64,
    #[arg(long, default_value_t = 40.0)]
    pub r_end: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub series: SeriesOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub n: u32,
}

/// Maps an error class to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotExact(_) | Error::Structure(_) | Error::ExplicitVariable | Error::Resonance { .. } => 3,
        Error::ToleranceFailure { .. } => 4,
        Error::Fit(_) => 5,
        _ => 2,
    }
}

/// Rendered artifact, ready to be written.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub extension: &'static str,
    pub body: String,
    /// Exit status reported after the artifact is written.
    pub status: i32,
}

fn check_precision() -> Result<()> {
    match std::env::var("P2H_PRECISION") {
        Ok(p) if p != "double" => Err(Error::Validation(format!(
            "precision {p:?} is not available; only double is implemented"
        ))),
        _ => Ok(()),
    }
}

fn equation(n: u32) -> Result<HierarchyEquation> {
    if n == 0 {
        return Err(Error::Validation("n must be at least 1".into()));
    }
    build_p2n(n)
}

fn series_of(eq: &HierarchyEquation, opts: &SeriesOpts, mode: Option<ModeArg>) -> Result<FormalSeries> {
    let alpha: AlphaValue = opts.alpha.parse()?;
    let mode = match mode {
        Some(ModeArg::Exact) => Mode::Exact,
        Some(ModeArg::Float) => Mode::Float,
        None if matches!(alpha, AlphaValue::Complex(_)) => Mode::Float,
        None => Mode::Exact,
    };
    if opts.branch >= 2 * eq.n {
        return Err(Error::Validation(format!("branch must be below {}", 2 * eq.n)));
    }
    series_for(eq, opts.kind.into(), opts.k, mode, alpha, opts.branch)
}

fn numeric_alpha(opts: &SeriesOpts) -> Result<Complex64> {
    let a: AlphaValue = opts.alpha.parse()?;
    a.numeric()
        .ok_or_else(|| Error::Validation("a numerical alpha is needed here".into()))
}

/// Canonical JSON: object keys sorted, compact.
pub fn canonical_json(v: &Value) -> String {
    // `Value` objects are sorted maps, so re-serializing canonicalizes.
    serde_json::to_string(v).expect("json values serialize")
}

fn config_value(cli: &Cli) -> Value {
    serde_json::to_value(cli).expect("config serializes")
}

fn json_artifact(cli: &Cli, result: Value) -> String {
    let mut s = canonical_json(&json!({
        "config": config_value(cli),
        "version": ARTIFACT_VERSION,
        "result": result,
    }));
    s.push('\n');
    s
}

fn commented(cli: &Cli, marker: &str, body: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{marker} version: {ARTIFACT_VERSION}");
    let _ = writeln!(s, "{marker} config: {}", canonical_json(&config_value(cli)));
    s.push_str(body);
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

/// Runs the command and renders its artifact without touching the disk.
pub fn render(cli: &Cli) -> Result<Artifact> {
    check_precision()?;
    let ok = |extension, body| Artifact {
        extension,
        body,
        status: 0,
    };
    match &cli.command {
        Command::GenEq(a) => {
            let eq = equation(a.n)?;
            Ok(match a.format {
                OutFormat::Json => {
                    let v: Value = serde_json::from_str(&emit(&eq, Format::Json))?;
                    ok("json", json_artifact(cli, v))
                }
                OutFormat::Latex | OutFormat::Text => {
                    ok("tex", commented(cli, "%", &emit(&eq, Format::Latex)))
                }
                OutFormat::Csv => return Err(Error::Validation("gen-eq has no csv form".into())),
            })
        }
        Command::Series(a) => {
            let eq = equation(a.n)?;
            let s = series_of(&eq, &a.series, Some(a.mode))?;
            match a.format {
                OutFormat::Json => Ok(ok("json", json_artifact(cli, s.to_json()))),
                OutFormat::Csv => {
                    let mut body = String::from("k,exponent,re,im\n");
                    for (k, c) in s.numeric_coeffs()?.iter().enumerate() {
                        let _ = writeln!(body, "{k},{},{:.17e},{:.17e}", s.exponent(k), c.re, c.im);
                    }
                    Ok(ok("csv", commented(cli, "#", &body)))
                }
                _ => Err(Error::Validation("series supports json or csv".into())),
            }
        }
        Command::TransformEq(a) => {
            let eq = equation(a.n)?;
            let u = transform_equation(&eq)?;
            let report = degree_report(&u);
            let status = if report.holds() { 0 } else { 3 };
            let art = match a.format {
                OutFormat::Json => Artifact {
                    extension: "json",
                    body: json_artifact(
                        cli,
                        json!({"equation": u.to_json(), "degree": serde_json::to_value(&report)?}),
                    ),
                    status,
                },
                OutFormat::Text | OutFormat::Latex => Artifact {
                    extension: "txt",
                    body: commented(cli, "#", &u.to_text()),
                    status,
                },
                OutFormat::Csv => return Err(Error::Validation("transform-eq has no csv form".into())),
            };
            Ok(art)
        }
        Command::Sectors(a) => {
            if a.n == 0 {
                return Err(Error::Validation("n must be at least 1".into()));
            }
            let t = sectors(a.n, a.kind.into(), a.epsilon, a.inner_radius);
            Ok(ok("json", json_artifact(cli, serde_json::to_value(&t)?)))
        }
        Command::Rates(a) => rates(cli, a),
        Command::Integrate(a) => integrate(cli, a),
        Command::Polemap(a) => {
            let eq = equation(a.n)?;
            if a.count == 0 || !(a.r_seed > a.r_end && a.r_end > 0.0) {
                return Err(Error::Validation("need count >= 1 and r_seed > r_end > 0".into()));
            }
            let s = series_of(&eq, &a.series, None)?;
            let sys = compile_system(&eq, numeric_alpha(&a.series)?);
            let fan = Fan::centered(a.center, a.half_width, a.count, a.r_seed, a.r_end);
            check_tol(a.tol)?;
            let res = pole_map(&sys, &s, &fan, a.tol);
            Ok(ok("csv", commented(cli, "#", &pole_map_csv(&res))))
        }
        Command::Verify(a) => {
            let eq = equation(a.n)?;
            let checks = verify_checks(&eq)?;
            let all = checks.iter().all(|c| c.pass);
            Ok(Artifact {
                extension: "json",
                body: json_artifact(cli, json!({"n": a.n, "all_pass": all, "checks": checks})),
                status: if all { 0 } else { 3 },
            })
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if (1e-13..=1e-6).contains(&tol) {
        Ok(())
    } else {
        Err(Error::Validation(format!("tol {tol:e} outside [1e-13, 1e-6]")))
    }
}

fn rates(cli: &Cli, a: &RatesArgs) -> Result<Artifact> {
    if a.n == 0 {
        return Err(Error::Validation("n must be at least 1".into()));
    }
    let kind: Kind = a.series.kind.into();
    let angles: Vec<f64> = if a.angles.is_empty() {
        rays(a.n, kind)
    } else {
        a.angles.iter().map(|&t| normalize_angle(t)).collect()
    };
    if !a.measure {
        let d = 2 * a.n as usize;
        let mut body = String::from("angle");
        for k in 1..=d {
            let _ = write!(body, ",re_nu_{k}");
        }
        for k in 1..=d {
            let _ = write!(body, ",re_char_{k}");
        }
        body.push('\n');
        for &t in &angles {
            let _ = write!(body, "{t:.12e}");
            for r in ray_rate_profile(a.n, kind, t)
                .rates
                .iter()
                .chain(&characteristic_rate_profile(a.n, kind, t).rates)
            {
                let _ = write!(body, ",{r:.9e}");
            }
            body.push('\n');
        }
        return Ok(Artifact {
            extension: "csv",
            body: commented(cli, "#", &body),
            status: 0,
        });
    }
    let window = parse_complex_pair(&a.window)
        .map(|c| (c.re, c.im))
        .ok_or_else(|| Error::Validation(format!("window {:?} is not LO,HI", a.window)))?;
    check_tol(a.tol)?;
    let eq = equation(a.n)?;
    let s = series_of(&eq, &a.series, None)?;
    let sys = compile_system(&eq, numeric_alpha(&a.series)?);
    let reports = angles
        .iter()
        .map(|&t| separation_rate(&eq, &sys, &s, t, window, a.tol, a.chunks))
        .collect::<Result<Vec<_>>>()?;
    Ok(Artifact {
        extension: "csv",
        body: commented(cli, "#", &rates_csv(&reports)),
        status: 0,
    })
}

fn integrate(cli: &Cli, a: &IntegrateArgs) -> Result<Artifact> {
    let eq = equation(a.n)?;
    check_tol(a.tol)?;
    let text = std::fs::read_to_string(&a.path)?;
    let path: PathSpec = serde_json::from_str(&text)?;
    let s = series_of(&eq, &a.series, None)?;
    let start = Complex64::new(path.start[0], path.start[1]);
    let (y0, _) = seed_from_series(&s, &XPoint::with_arg(start, a.arg)?)?;
    let sys = compile_system(&eq, numeric_alpha(&a.series)?);
    let mut opts = Options::with_tol(a.tol);
    opts.sample_spacing = a.spacing;
    let t = integrate_path(&sys, &y0, &path, &opts)?;
    let mut body = trajectory_csv(&t);
    let status = match t.status {
        Status::Completed => 0,
        Status::PoleDetected => {
            if let Some(p) = &t.pole_event {
                let _ = writeln!(
                    body,
                    "# pole: x_detect={:.12e},{:.12e} x_pole={:.12e},{:.12e} q={:.6e} trigger={:?}",
                    p.x_detect.re, p.x_detect.im, p.x_pole.re, p.x_pole.im, p.q, p.trigger
                );
            }
            0
        }
        Status::ToleranceFailure => 4,
    };
    Ok(Artifact {
        extension: "csv",
        body: commented(cli, "#", &body),
        status,
    })
}

/// One line of the `verify` report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        pass,
        detail: detail.into(),
    }
}

/// The invariant suite behind `p2h verify`.
pub fn verify_checks(eq: &HierarchyEquation) -> Result<Vec<Check>> {
    let n = eq.n;
    let mut out = Vec::new();
    out.push(match eq.check_structure() {
        Ok(()) => check("structure", true, "weighted degree and k0 bounds hold"),
        Err(e) => check("structure", false, e.to_string()),
    });
    let inter = verify_intermediate_form(n)?;
    out.push(check(
        "intermediate_form",
        inter.holds(),
        format!("beta~ = {}, {} violations", inter.beta_tilde, inter.violations.len()),
    ));
    let (bc, br) = (beta_closed_form(n), beta_recurrence(n));
    out.push(check(
        "beta",
        bc == br && bc == eq.beta_n,
        format!("extracted {}, closed form {bc}, recurrence {br}", eq.beta_n),
    ));

    let order = 6;
    let zero = AlphaValue::Rational(rational(0, 1));
    let exact = series_for(eq, Kind::Infty, order, Mode::Exact, zero.clone(), 0);
    let float = series_for(eq, Kind::Infty, order, Mode::Float, zero, 0);
    out.push(match (exact, float) {
        (Ok(e), Ok(f)) => {
            let gap = crate::asymptotics::max_relative_gap(&e.numeric_coeffs()?, &f.numeric_coeffs()?);
            check("series_exact_vs_float", gap < 1e-12, format!("max relative gap {gap:.3e}"))
        }
        (Err(e), _) | (_, Err(e)) => check("series_exact_vs_float", false, e.to_string()),
    });
    let one = AlphaValue::Rational(rational(1, 1));
    out.push(match series_for(eq, Kind::Zero, order, Mode::Exact, one, 0) {
        Ok(_) => check("series_zero_cancellation", true, "order-by-order cancellation holds"),
        Err(e) => check("series_zero_cancellation", false, e.to_string()),
    });

    let u = transform_equation(eq)?;
    let lin = u.autonomous_linear_coefficient();
    out.push(check("boutroux_linear_coefficient", lin == rational(1, 1), format!("coefficient of u is {lin}")));
    let rep = degree_report(&u);
    out.push(check(
        "boutroux_degree_bound",
        rep.holds(),
        format!("max degree {} vs bound {}", rep.max_degree, rep.bound),
    ));

    let z = XPoint::polar(1.7, 0.4);
    let mut gap_generic: f64 = 0.0;
    let mut gap_published: f64 = 0.0;
    for kind in [Kind::Infty, Kind::Zero] {
        let m = companion_a0(n, kind, z.value)?;
        gap_generic = gap_generic.max(m.cross_check_gap());
        gap_published = gap_published.max(set_distance(&m.eigenvalues, &stokes_exponents(n, kind, &z)?.mu));
    }
    out.push(check("companion_generic_eigenvalues", gap_generic < 1e-10, format!("gap {gap_generic:.3e}")));
    out.push(check(
        "companion_vs_published_mu",
        gap_published < 1e-12,
        format!("gap {gap_published:.3e}"),
    ));
    let mut worst: f64 = 0.0;
    for kind in [Kind::Infty, Kind::Zero] {
        for t in rays(n, kind) {
            let m = ray_rate_profile(n, kind, t)
                .rates
                .iter()
                .map(|r| r.abs())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(m);
        }
    }
    out.push(check("oscillatory_rays", worst < 1e-12, format!("max over rays of min |Re nu| = {worst:.3e}")));
    Ok(out)
}

fn default_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::GenEq(_) => "gen-eq",
        Command::Series(_) => "series",
        Command::TransformEq(_) => "transform-eq",
        Command::Sectors(_) => "sectors",
        Command::Rates(_) => "rates",
        Command::Integrate(_) => "integrate",
        Command::Polemap(_) => "polemap",
        Command::Verify(_) => "verify",
    }
}

/// Writes `body` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Runs one invocation; returns the process exit code.
pub fn dispatch(cli: &Cli) -> i32 {
    match render(cli) {
        Ok(art) => {
            let path = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{}.{}", default_name(&cli.command), art.extension)));
            if let Err(e) = write_atomic(&path, &art.body) {
                eprintln!("p2h: {e}");
                return 2;
            }
            art.status
        }
        Err(e) => {
            eprintln!("p2h: {e}");
            exit_code(&e)
        }
    }
}

/// Parses arguments and dispatches; usage errors exit with 2.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("p2h").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn gen_eq_n2_latex() {
        let art = render(&parse(&["gen-eq", "--n", "2", "--format", "latex"])).unwrap();
        assert_eq!(art.status, 0);
        assert!(art.body.starts_with("% version: "));
        assert!(art.body.contains("-6"));
    }

    #[test]
    fn gen_eq_zero_is_validation() {
        let e = render(&parse(&["gen-eq", "--n", "0"])).unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn negative_alpha_pair() {
        let cli = parse(&["series", "--n", "1", "--alpha", "-1.5,0.25", "--mode", "float", "--K", "2"]);
        let art = render(&cli).unwrap();
        assert!(art.body.contains("\"version\""));
    }

    #[test]
    fn json_is_sorted_and_repeatable() {
        let cli = parse(&["sectors", "--n", "2"]);
        let a = render(&cli).unwrap().body;
        assert_eq!(a, render(&cli).unwrap().body);
        let i = a.find("\"config\"").unwrap();
        let j = a.find("\"result\"").unwrap();
        let k = a.find("\"version\"").unwrap();
        assert!(i < j && j < k);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Structure("x".into())), 3);
        assert_eq!(exit_code(&Error::NotExact("x".into())), 3);
        assert_eq!(exit_code(&Error::ToleranceFailure { x: "1".into(), floor: 1e-12 }), 4);
        assert_eq!(exit_code(&Error::Fit("x".into())), 5);
        assert_eq!(exit_code(&Error::ZeroAlpha), 2);
    }
}
