//! Command-line front end for `ldacert`.
//!
//! [`run`] parses arguments, executes one command and returns the process
//! exit code: 0 on success, 2 for rejected input, 3 for accuracy failures.

pub mod report;
pub mod verify;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use ldacert::bounds::{self, Constants, LtMode, PowerLawModel};
use ldacert::certificate::{self, CertParams, Variant};
use ldacert::field::{self, Density, GridSpec, ScalarField};
use ldacert::kinetic::KineticConstants;
use ldacert::tiling::{self, TilingConfig};
use ldacert::{quad, Error, Result};
use serde_json::{json, Value};

pub const THREADS_ENV: &str = "LDA_CERT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "ldacert", version, about = "Rigorous LDA error certificates for electron densities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Certify a density and print the JSON report.
    Certify(CertifyArgs),
    /// Optimised right-hand side of ρ_N over a range of N.
    Scaling(ScalingArgs),
    /// Run invariant suites.
    Verify(VerifyArgs),
    /// Write sampled tile indicators as LDA-GRID files.
    Tile(TileArgs),
    /// Print constants and verification tolerances.
    Info,
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 4.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// quantum, xc or classical
    #[arg(long, default_value = "quantum")]
    pub variant: String,
    #[arg(long = "kappa-nam", default_value_t = 1.0)]
    pub kappa_nam: f64,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// LDA-GRID file or `builtin:<name>,key=val,...`
    #[arg(long)]
    pub density: String,
    #[command(flatten)]
    pub params: ParamArgs,
    /// tf-dirac, tf-only or custom:A,B
    #[arg(long, default_value = "tf-dirac")]
    pub model: String,
    /// Lieb–Thirring constant; defaults to c_TF
    #[arg(long = "c-lt")]
    pub c_lt: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub kappa1: f64,
    #[arg(long, default_value_t = 48.0)]
    pub kappa2: f64,
}

#[derive(Args, Debug)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// from:to:points, log-spaced
    #[arg(long = "N", default_value = "1e4:1e12:6")]
    pub n: String,
    #[arg(long, default_value = "builtin:gaussian,sigma=1,mass=1")]
    pub density: String,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// kinetic, tiling, coulomb, lemmas or all
    #[arg(long, default_value = "all")]
    pub suite: String,
}

#[derive(Args, Debug)]
pub struct TileArgs {
    #[arg(long)]
    pub ell: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid points per axis
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// chi (averaged partition) or xi (smeared indicator)
    #[arg(long, default_value = "chi")]
    pub field: String,
    /// Single tile index in 1..=24; all tiles when omitted
    #[arg(long)]
    pub tile: Option<usize>,
}

/// Run one command. `args` includes the program name.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
            return code;
        }
    };
    if let Err(e) = init_threads() {
        let _ = writeln!(err, "error: {e}");
        return 2;
    }
    let res = match &cli.command {
        Command::Certify(a) => certify(a, out, err),
        Command::Scaling(a) => scaling(a, out, err),
        Command::Verify(a) => verify_cmd(a, out, err),
        Command::Tile(a) => tile(a, out, err),
        Command::Info => info(out, err),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_accuracy() { 3 } else { 2 }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    // A pool may already exist when run() is called repeatedly in-process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn echo(err: &mut dyn Write, command: &str, config: Value) -> Result<()> {
    let v = json!({ "command": command, "config": config });
    writeln!(err, "config: {v}").map_err(io)
}

/// Density from `builtin:<spec>` or an LDA-GRID file.
pub fn load_density(s: &str) -> Result<Density> {
    if let Some(spec) = s.strip_prefix("builtin:") {
        return Density::parse_builtin(spec);
    }
    let f = File::open(s).map_err(|e| Error::Io(format!("cannot open density file '{s}': {e}")))?;
    let field = field::read_grid(BufReader::new(f))?;
    let d = Density::Gridded(field);
    d.validate()?;
    Ok(d)
}

fn params(a: &ParamArgs) -> Result<CertParams> {
    Ok(CertParams {
        p: a.p,
        theta: a.theta,
        c: a.c,
        q: a.q,
        variant: Variant::parse(&a.variant)?,
        kappa_nam: a.kappa_nam,
    })
}

fn params_json(pr: &CertParams) -> Value {
    json!({
        "variant": pr.variant.name(),
        "p": report::real(pr.p),
        "theta": report::real(pr.theta),
        "C": report::real(pr.c),
        "q": report::real(pr.q),
        "kappa_nam": report::real(pr.kappa_nam),
    })
}

fn certify(a: &CertifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let pr = params(&a.params)?;
    let constants = Constants {
        q: pr.q,
        lt: a.c_lt.map_or(LtMode::Conjectured, LtMode::User),
        kinetic: KineticConstants { kappa1: a.kappa1, kappa2: a.kappa2, kappa_nam: pr.kappa_nam },
    };
    let model = PowerLawModel::parse(&a.model, pr.q)?;
    let mut cfg = params_json(&pr);
    cfg["density"] = Value::String(a.density.clone());
    cfg["model"] = Value::String(a.model.clone());
    cfg["constants"] = report::constants(&constants);
    echo(err, "certify", cfg)?;
    let rho = load_density(&a.density)?;
    let cert = certificate::certify(&rho, &pr, &model, &constants)?;
    let body = serde_json::to_string_pretty(&report::certificate(&cert, &a.density)).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(out, "{body}").map_err(io)?;
    Ok(0)
}

/// `from:to:points` as a log-spaced list.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parameter(format!("expected from:to:points, got '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let from: f64 = parts[0].parse().map_err(|_| bad())?;
    let to: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(from > 0.0 && to > from && to.is_finite()) || n < 3 {
        return Err(Error::Parameter(format!("need 0 < from < to and at least 3 points, got '{s}'")));
    }
    Ok(quad::log_grid(from, to, n))
}

fn scaling(a: &ScalingArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let pr = params(&a.params)?;
    let ns = parse_range(&a.n)?;
    let mut cfg = params_json(&pr);
    cfg["density"] = Value::String(a.density.clone());
    cfg["N"] = Value::String(a.n.clone());
    echo(err, "scaling", cfg)?;
    let rho = load_density(&a.density)?;
    let base = field::functionals(&rho, pr.theta, pr.p)?;
    let res = certificate::scaling_sweep(&base, &pr, &ns)?;
    let mut w = |s: String| writeln!(out, "{s}").map_err(io);
    w(format!("# variant={} p={} theta={} C={}", pr.variant.name(), pr.p, pr.theta, pr.c))?;
    w("# N eps_star total total_fixed_eps".into())?;
    for r in &res.rows {
        w(format!("{:.16e} {:.16e} {:.16e} {:.16e}", r.n, r.eps_star, r.total, r.total_fixed))?;
    }
    w(format!("slope {:.16e}", res.slope))?;
    w(format!("slope_fixed_eps {:.16e}", res.slope_fixed))?;
    Ok(0)
}

fn verify_cmd(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    echo(err, "verify", json!({ "suite": a.suite }))?;
    let checks = verify::run_suite(&a.suite)?;
    let mut failed = 0;
    for c in &checks {
        writeln!(out, "{}", c.line()).map_err(io)?;
        if c.status == verify::Status::Fail {
            failed += 1;
        }
    }
    writeln!(out, "{} checks, {} failed", checks.len(), failed).map_err(io)?;
    Ok(if failed == 0 { 0 } else { 3 })
}

fn tile(a: &TileArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = TilingConfig::new(a.ell, a.delta)?;
    let smeared = match a.field.as_str() {
        "chi" => false,
        "xi" => true,
        f => return Err(Error::Parameter(format!("unknown field '{f}' (expected chi or xi)"))),
    };
    let tiles: Vec<usize> = match a.tile {
        None => (0..24).collect(),
        Some(j) if (1..=24).contains(&j) => vec![j - 1],
        Some(j) => return Err(Error::Parameter(format!("tile index must be in 1..=24, got {j}"))),
    };
    if a.n < 2 {
        return Err(Error::Parameter(format!("need at least 2 grid points per axis, got {}", a.n)));
    }
    echo(
        err,
        "tile",
        json!({
            "ell": report::real(a.ell),
            "delta": report::real(a.delta),
            "n": a.n,
            "field": a.field,
            "tiles": tiles.iter().map(|j| j + 1).collect::<Vec<_>>(),
            "out": a.out.display().to_string(),
        }),
    )?;
    // Covers the ℓ-cube plus the mollifier radius.
    let spec = GridSpec::centered_cube(a.n, 0.5 * a.ell + cfg.radius())?;
    fs::create_dir_all(&a.out).map_err(io)?;
    for j in tiles {
        let f = ScalarField::sample(spec.clone(), |x| if smeared { tiling::xi(j, &cfg, x) } else { tiling::chi(j, &cfg, x) })?;
        let path = a.out.join(format!("{}_{:02}.grid", a.field, j + 1));
        let file = File::create(&path).map_err(|e| Error::Io(format!("cannot write '{}': {e}", path.display())))?;
        let mut w = std::io::BufWriter::new(file);
        field::write_grid(&f, &mut w)?;
        w.flush().map_err(io)?;
        writeln!(out, "{}", path.display()).map_err(io)?;
    }
    Ok(0)
}

fn info(out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    echo(err, "info", json!({}))?;
    let c = Constants::default();
    let pr = CertParams::default();
    let mut lines = vec![
        format!("ldacert {}", env!("CARGO_PKG_VERSION")),
        "constants:".into(),
        format!("  c_TF            {:.16e}", bounds::c_tf(3)),
        format!("  c_LO            {:.16e}", bounds::C_LO),
        format!("  c_LO_gradient   {:.16e}", bounds::c_lo_grad()),
        format!("  dirac_exchange  {:.16e}", bounds::dirac_exchange()),
        format!("  c_LT (default)  {:.16e}", c.c_lt()),
        format!("  kappa1          {:.16e}", c.kinetic.kappa1),
        format!("  kappa2          {:.16e}", c.kinetic.kappa2),
        format!("  kappa_nam       {:.16e}", c.kinetic.kappa_nam),
        "defaults:".into(),
        format!("  p={} theta={} C={} q={} variant={}", pr.p, pr.theta, pr.c, pr.q, pr.variant.name()),
        format!("  quadrature rel tol {:e}, failure threshold {:e}", field::QUAD_REL_TOL, field::QUAD_FAIL_TOL),
        format!("  grid point budget {}", field::GRID_POINT_BUDGET),
        "tolerances:".into(),
    ];
    for t in verify::TOLERANCES {
        lines.push(format!("  {:<26} {:<10e} {}", t.name, t.value, t.meaning));
    }
    for l in lines {
        writeln!(out, "{l}").map_err(io)?;
    }
    Ok(0)
}
