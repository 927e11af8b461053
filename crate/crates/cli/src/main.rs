//! `tfconc`: concentration bounds, localization spectra, rearrangements and
//! metaplectic covariance from the command line.
//!
//! Every subcommand writes one CSV document to stdout, or to `--out`.
//! Exit codes: 0 success, 2 input or validation error, 3 a computed quantity
//! missed its tolerance (`TFCONC_TOL`, default `1e-8`).

mod csv;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tfconc::bounds::{
    faber_krahn_bound, gamma_ratio, lieb_local_bound, lp_bound, lp_min_volume, min_volume,
    prior_art_bound, psi, weak_bound,
};
use tfconc::gabor::{signal_to_fock, SampledSignal, MAX_HERMITE};
use tfconc::localization::{
    default_basis_size, default_order, local_lieb, lp_concentration, phi_max,
};
use tfconc::metaplectic::{covariance_check, SL2Matrix};
use tfconc::rearrange::{density, rearrangement_profile, verify_differential_structure};
use tfconc::{io, Error, FockCoefficients, Region};

use csv::{num, Document};

const DEFAULT_TOL: f64 = 1e-8;
const TOL_VAR: &str = "TFCONC_TOL";
/// Acceptable relative mismatch of the two sides of the covariance identity.
const COVARIANCE_TOL: f64 = 1e-3;

#[derive(Parser)]
#[command(
    name = "tfconc",
    version,
    about = "Time-frequency concentration toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Concentration bounds for a set of given measure, or minimal measures for
    /// a concentration 1 - eps.
    Bound(BoundArgs),
    /// psi_d(eps), the inverse of s -> e^{-s} sum_{j<d} s^j/j!.
    Psi(PsiArgs),
    /// Best concentration on a region: top eigenvalue of the localization operator.
    Phi(PhiArgs),
    /// L^p concentration (and local Lieb functional) of a given function.
    Concentration(ConcentrationArgs),
    /// Decreasing rearrangement, super-level integrals and distribution function.
    Rearrange(RearrangeArgs),
    /// Data for the bound comparison figures, written into a directory.
    Figures(FiguresArgs),
    /// Both sides of the symplectic covariance identity.
    Covariance(CovarianceArgs),
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long)]
    measure: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Exponent for the L^p and local Lieb bounds (d = 1 only).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PsiArgs {
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhiArgs {
    #[arg(long)]
    region: PathBuf,
    #[arg(long)]
    basis_size: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConcentrationArgs {
    #[arg(long, required_unless_present = "coeffs", conflicts_with = "coeffs")]
    signal: Option<PathBuf>,
    #[arg(long)]
    coeffs: Option<PathBuf>,
    #[arg(long)]
    region: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Fock basis size used for a signal (default: smallest power-of-two
    /// multiple of 32 that keeps all but 1e-8 of the energy).
    #[arg(long)]
    basis_size: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RearrangeArgs {
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long, default_value_t = 8.0)]
    s_max: f64,
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FiguresArgs {
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CovarianceArgs {
    /// Matrix entries `a,b,c,d` of [[a, b], [c, d]].
    #[arg(long)]
    sl2: String,
    #[arg(long)]
    region: PathBuf,
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Tolerance(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TailTooLarge { .. }
            | Error::BasisTooSmall { .. }
            | Error::OrderTooLow { .. }
            | Error::EigenResidual { .. } => Failure::Tolerance(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn tolerance() -> Outcome<f64> {
    match std::env::var(TOL_VAR) {
        Err(_) => Ok(DEFAULT_TOL),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Ok(t),
            _ => Err(input(format!(
                "{TOL_VAR} must be a positive number, got `{s}`"
            ))),
        },
    }
}

/// The command line after the program name, as echoed into every CSV.
fn flags_echo() -> String {
    std::env::args().skip(1).collect::<Vec<_>>().join(" ")
}

fn emit(doc: Document, out: Option<&Path>) -> Outcome {
    let text = doc.into_string();
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Collects tolerance violations so the output is still written in full.
#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.0.push(msg());
        }
    }

    fn finish(self) -> Outcome {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Failure::Tolerance(self.0.join("; ")))
        }
    }
}

fn check_measure(m: f64) -> Outcome {
    if m.is_finite() && m >= 0.0 {
        Ok(())
    } else {
        Err(input(format!(
            "measure must be finite and nonnegative, got {m}"
        )))
    }
}

fn check_eps(eps: f64) -> Outcome {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(input(format!("eps must lie in (0,1), got {eps}")))
    }
}

fn check_d(d: u32) -> Outcome {
    if d == 0 {
        Err(input("dimension must be positive"))
    } else {
        Ok(())
    }
}

fn cmd_bound(args: &BoundArgs) -> Outcome {
    check_d(args.d)?;
    if args.measure.is_none() && args.eps.is_none() {
        return Err(input("bound needs --measure or --eps"));
    }
    if let Some(p) = args.p {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::BadExponent(p).into());
        }
        if args.d != 1 {
            return Err(input("the L^p and local Lieb bounds are for d = 1"));
        }
    }
    let mut doc = Document::new(&flags_echo());
    doc.header(&["quantity", "value"]);
    let mut row = |name: &str, v: f64| doc.row(&[name.to_string(), num(v)]);
    if let Some(m) = args.measure {
        check_measure(m)?;
        row("faber_krahn_bound", faber_krahn_bound(args.d, m));
        if let Some(p) = args.p {
            row("lp_bound", lp_bound(p, m));
            if p >= 2.0 {
                row("lieb_local_bound", lieb_local_bound(p, m));
            }
        }
    }
    if let Some(eps) = args.eps {
        check_eps(eps)?;
        row("min_volume", min_volume(args.d, eps));
        if let Some(p) = args.p {
            row("lp_min_volume", lp_min_volume(p, eps));
        }
    }
    emit(doc, args.out.as_deref())
}

fn cmd_psi(args: &PsiArgs) -> Outcome {
    check_d(args.d)?;
    check_eps(args.eps)?;
    let mut doc = Document::new(&flags_echo());
    doc.header(&["d", "eps", "psi"]);
    doc.numbers(&[args.d as f64, args.eps, psi(args.d, args.eps)]);
    emit(doc, args.out.as_deref())
}

fn cmd_phi(args: &PhiArgs, tol: f64) -> Outcome {
    let region = io::read_region(&args.region)?;
    let n = args
        .basis_size
        .unwrap_or_else(|| default_basis_size(&region));
    let order = args.order.unwrap_or_else(|| default_order(n));
    let r = phi_max(&region, n, order)?;
    let mut doc = Document::new(&flags_echo());
    doc.header(&[
        "measure",
        "phi",
        "sharp_bound",
        "gap",
        "basis_size",
        "truncation_estimate",
    ]);
    doc.row(&[
        num(r.measure),
        num(r.phi),
        num(r.sharp_bound),
        num(r.gap),
        r.basis_size.to_string(),
        num(r.truncation_estimate),
    ]);
    emit(doc, args.out.as_deref())?;
    let mut checks = Checks::default();
    checks.require(r.phi <= r.sharp_bound + tol, || {
        format!("phi {} exceeds the sharp bound {}", r.phi, r.sharp_bound)
    });
    checks.require(r.truncation_estimate <= tol, || {
        format!(
            "basis of size {n} leaves out an estimated {:.3e}",
            r.truncation_estimate
        )
    });
    checks.finish()
}

/// Fock image of a signal on the given basis size, or on the smallest of
/// 32, 64, 128, 256 that drops at most 1e-8 of the energy.
fn fock_of_signal(f: &SampledSignal, basis_size: Option<usize>) -> Outcome<FockCoefficients> {
    if let Some(n) = basis_size {
        return Ok(signal_to_fock(f, n)?);
    }
    let mut n = 32;
    loop {
        match signal_to_fock(f, n) {
            Err(Error::BasisTooSmall { .. }) if n < MAX_HERMITE => n = (2 * n).min(MAX_HERMITE),
            other => return Ok(other?),
        }
    }
}

fn cmd_concentration(args: &ConcentrationArgs, tol: f64) -> Outcome {
    let region = io::read_region(&args.region)?;
    let f = match (&args.signal, &args.coeffs) {
        (Some(path), None) => fock_of_signal(&io::read_signal(path)?, args.basis_size)?,
        (None, Some(path)) => io::read_coefficients(path)?,
        _ => return Err(input("give exactly one of --signal and --coeffs")),
    };
    let measure = region.measure()?;
    let order = args
        .order
        .unwrap_or_else(|| default_order(f.basis_size().max(default_basis_size(&region))));
    let p = args.p;
    let conc = lp_concentration(&f, &region, p, order)?;
    let bound = lp_bound(p, measure);
    let mut checks = Checks::default();
    checks.require(conc <= bound + tol, || {
        format!("concentration {conc} exceeds the bound {bound}")
    });

    let mut doc = Document::new(&flags_echo());
    if p >= 2.0 {
        let lieb = local_lieb(&f, &region, p, order)?;
        let lieb_bound = lieb_local_bound(p, measure);
        checks.require(lieb <= lieb_bound + tol, || {
            format!("local Lieb functional {lieb} exceeds the bound {lieb_bound}")
        });
        doc.header(&[
            "measure",
            "p",
            "concentration",
            "lp_bound",
            "local_lieb",
            "lieb_local_bound",
        ]);
        doc.numbers(&[measure, p, conc, bound, lieb, lieb_bound]);
    } else {
        doc.header(&["measure", "p", "concentration", "lp_bound"]);
        doc.numbers(&[measure, p, conc, bound]);
    }
    emit(doc, args.out.as_deref())?;
    checks.finish()
}

fn cmd_rearrange(args: &RearrangeArgs, tol: f64) -> Outcome {
    let f = io::read_coefficients(&args.coeffs)?;
    let u = density(&f)?;
    let profile = rearrangement_profile(&u, args.s_max, args.nodes)?;

    let mut doc = Document::new(&flags_echo());
    doc.header(&["s", "u_star", "I", "one_minus_exp_minus_s"]);
    let mut checks = Checks::default();
    let mut worst_excess = 0.0f64;
    for ((&s, &us), &i) in profile
        .s_grid
        .iter()
        .zip(&profile.u_star)
        .zip(&profile.i_vals)
    {
        let bound = -(-s).exp_m1();
        worst_excess = worst_excess.max(i - bound);
        doc.numbers(&[s, us, i, bound]);
    }
    doc.comment("distribution function");
    doc.header(&["t", "mu"]);
    for (&t, &mu) in profile.t_grid.iter().zip(&profile.mu_vals) {
        doc.numbers(&[t, mu]);
    }
    emit(doc, args.out.as_deref())?;

    let report = verify_differential_structure(&profile);
    checks.require(worst_excess <= tol, || {
        format!("I(s) exceeds 1 - e^(-s) by {worst_excess:.3e}")
    });
    checks.require(report.worst() <= tol, || {
        format!("differential structure violated by {:.3e}", report.worst())
    });
    checks.finish()
}

/// `n` equispaced points from `a` to `b`.
fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

const FIG_EPS: (f64, f64, usize) = (0.01, 0.99, 199);
const FIG_C: (f64, f64, usize) = (0.0, 8.0, 161);

fn cmd_figures(args: &FiguresArgs) -> Outcome {
    std::fs::create_dir_all(&args.out)
        .map_err(|e| input(format!("cannot create {}: {e}", args.out.display())))?;
    let flags = flags_echo();
    let (e0, e1, ne) = FIG_EPS;
    let mut files = Vec::new();

    for d in [1u32, 2] {
        let mut doc = Document::new(&flags);
        doc.header(&["eps", "sharp", "prior_art", "weak"]);
        for eps in linspace(e0, e1, ne) {
            doc.numbers(&[
                eps,
                min_volume(d, eps),
                prior_art_bound(d, eps),
                weak_bound(eps),
            ]);
        }
        files.push((format!("fig1_d{d}.csv"), doc));
    }

    let (c0, c1, nc) = FIG_C;
    let mut doc = Document::new(&flags);
    doc.header(&["c", "bound_d1", "bound_d2", "bound_d3"]);
    for c in linspace(c0, c1, nc) {
        doc.numbers(&[c, gamma_ratio(1, c), gamma_ratio(2, c), gamma_ratio(3, c)]);
    }
    files.push(("fig2_left.csv".into(), doc));

    let mut doc = Document::new(&flags);
    doc.header(&["eps", "psi1", "psi2", "psi3"]);
    for eps in linspace(e0, e1, ne) {
        doc.numbers(&[eps, psi(1, eps), psi(2, eps), psi(3, eps)]);
    }
    files.push(("fig2_right.csv".into(), doc));

    for (name, doc) in files {
        let path = args.out.join(&name);
        emit(doc, Some(&path))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn parse_sl2(s: &str) -> Outcome<SL2Matrix> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| input(format!("--sl2 expects four numbers a,b,c,d, got `{s}`")))?;
    match v[..] {
        [a, b, c, d] => Ok(SL2Matrix::new(a, b, c, d)?),
        _ => Err(input(format!(
            "--sl2 expects four numbers a,b,c,d, got `{s}`"
        ))),
    }
}

fn cmd_covariance(args: &CovarianceArgs) -> Outcome {
    let a = parse_sl2(&args.sl2)?;
    let region: Region = io::read_region(&args.region)?;
    let f = io::read_signal(&args.signal)?;
    let r = covariance_check(&f, &a, &region)?;
    let mut doc = Document::new(&flags_echo());
    doc.header(&["lhs", "rhs", "rel_err"]);
    doc.numbers(&[r.lhs, r.rhs, r.rel_err]);
    emit(doc, args.out.as_deref())?;
    let mut checks = Checks::default();
    checks.require(r.rel_err <= COVARIANCE_TOL, || {
        format!(
            "relative covariance mismatch {:.3e} above {COVARIANCE_TOL:e}",
            r.rel_err
        )
    });
    checks.finish()
}

fn run(cli: &Cli) -> Outcome {
    let tol = tolerance()?;
    match &cli.command {
        Command::Bound(a) => cmd_bound(a),
        Command::Psi(a) => cmd_psi(a),
        Command::Phi(a) => cmd_phi(a, tol),
        Command::Concentration(a) => cmd_concentration(a, tol),
        Command::Rearrange(a) => cmd_rearrange(a, tol),
        Command::Figures(a) => cmd_figures(a),
        Command::Covariance(a) => cmd_covariance(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Tolerance(msg)) => {
            eprintln!("tolerance failure: {msg}");
            ExitCode::from(3)
        }
    }
}
