//! Command-line front end: wires JSON descriptors to the library operations
//! and writes deterministic JSON/CSV reports.
//!
//! Exit codes: 0 pass, 1 quantitative failure, 2 input error, 3 ambiguous
//! classification.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::descriptor::{rect_from, RunConfig};
use crate::field::{FieldError, Provenance, SolutionField};
use crate::geometry::Rect;
use crate::metric::{diameter_estimate, DiameterSettings, MetricError};
use crate::ode::{directional_growth, fit_asymptotics, stokes_directions};
use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_AMBIGUOUS: i32 = 3;

#[derive(Debug)]
enum CliError {
    Input(String),
    Failure(String),
    Ambiguous(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Failure(m) | CliError::Ambiguous(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Failure(_) => EXIT_FAILURE,
            CliError::Ambiguous(_) => EXIT_AMBIGUOUS,
        }
    }
}

fn field_error(e: FieldError) -> CliError {
    match e {
        FieldError::SnapAmbiguous { .. } => CliError::Ambiguous(e.to_string()),
        FieldError::InvalidParameter(_) => CliError::Input(e.to_string()),
        other => CliError::Failure(other.to_string()),
    }
}

fn metric_error(e: MetricError) -> CliError {
    match e {
        MetricError::InvalidCurve(_) | MetricError::InvalidGrid(_) | MetricError::NodeOutOfRange(..) => {
            CliError::Input(e.to_string())
        }
        MetricError::Field(f) => field_error(f),
        other => CliError::Failure(other.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "liouville",
    about = "Numerical toolkit for curvature +1 conformal metrics on the plane"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the PDE residual of a solution descriptor.
    Verify(RunArgs),
    /// Estimate and snap the growth exponent k.
    Classify(RunArgs),
    /// Estimate the conformal diameter.
    Diameter(RunArgs),
    /// Stokes sectors and asymptotic-law fit for an ODE quotient map.
    Asymptotics(RunArgs),
    /// Dump u over a grid or along rays as CSV plot data.
    Profile(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// UTF-8 JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports.
    #[arg(long)]
    out: PathBuf,
    /// Seed for randomized sampling; fixed seed means byte-identical output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (including the program name) and runs one command,
/// returning the process exit code. Kept in-process so tests can drive the
/// full CLI without spawning.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    configure_threads();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_INPUT;
        }
    };
    let result = match &cli.command {
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Classify(a) => cmd_classify(a),
        Cmd::Diameter(a) => cmd_diameter(a),
        Cmd::Asymptotics(a) => cmd_asymptotics(a),
        Cmd::Profile(a) => cmd_profile(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("liouville: {e}");
            e.code()
        }
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("LIOUVILLE_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("malformed config {}: {e}", path.display())))
}

fn require_solution(cfg: &RunConfig) -> Result<SolutionField, CliError> {
    let descriptor = cfg
        .solution
        .as_ref()
        .ok_or_else(|| CliError::Input("config needs a \"solution\" descriptor".into()))?;
    descriptor.build().map_err(|e| CliError::Input(e.to_string()))
}

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", dir.display())))
}

#[derive(Serialize)]
struct ResidualPoint {
    x: f64,
    y: f64,
    residual: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    seed: u64,
    threshold: f64,
    step: f64,
    max_residual: f64,
    mean_residual: f64,
    points: Vec<ResidualPoint>,
}

fn cmd_verify(args: &RunArgs) -> Result<i32, CliError> {
    let cfg = load_config(&args.config)?;
    let field = require_solution(&cfg)?;
    let rc = cfg.residual.clone().unwrap_or_default();
    let window = rect_from(rc.window);
    ensure_out(&args.out)?;

    let mut samples: Vec<Complex64> = Vec::new();
    // Structured 5x5 lattice, then seeded random fill.
    for j in 0..5 {
        for i in 0..5 {
            samples.push(Complex64::new(
                window.x_min + window.width() * (i as f64 + 0.5) / 5.0,
                window.y_min + window.height() * (j as f64 + 0.5) / 5.0,
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    while samples.len() < 25 + rc.points {
        samples.push(Complex64::new(
            window.x_min + window.width() * rng.gen::<f64>(),
            window.y_min + window.height() * rng.gen::<f64>(),
        ));
    }

    let mut points = Vec::with_capacity(samples.len());
    let mut max_residual = 0.0_f64;
    let mut sum = 0.0;
    for z in samples {
        let r = field.pde_residual(z, rc.step).map_err(field_error)?;
        max_residual = max_residual.max(r.abs());
        sum += r.abs();
        points.push(ResidualPoint { x: z.re, y: z.im, residual: r });
    }
    let report = VerifyReport {
        command: "verify",
        seed: args.seed,
        threshold: rc.threshold,
        step: rc.step,
        max_residual,
        mean_residual: sum / points.len() as f64,
        points,
    };
    report::write_json_atomic(&args.out.join("verify.json"), &report)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(if max_residual < rc.threshold { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Serialize)]
struct ClassifyReport {
    command: &'static str,
    k: f64,
    raw: f64,
    gap: f64,
    confidence: [f64; 2],
    r_min: f64,
    r_max: f64,
    circles: usize,
    directions: usize,
}

fn growth_defaults(field: &SolutionField) -> (f64, f64, usize, usize) {
    match field.provenance() {
        // Ray integrations make far circles expensive; the slope estimator
        // converges well before r = 60.
        Provenance::FromMap(m) if m.as_ode_quotient().is_some() => (8.0, 56.0, 8, 64),
        _ => (20.0, 200.0, 10, 256),
    }
}

fn cmd_classify(args: &RunArgs) -> Result<i32, CliError> {
    let cfg = load_config(&args.config)?;
    let field = require_solution(&cfg)?;
    ensure_out(&args.out)?;
    let (mut r_min, mut r_max, mut circles, mut directions) = growth_defaults(&field);
    if let Some(g) = &cfg.growth {
        if let Some(v) = g.r_min {
            r_min = v;
        }
        if let Some(v) = g.r_max {
            r_max = v;
        }
        if let Some(v) = g.circles {
            circles = v;
        }
        if let Some(v) = g.directions {
            directions = v;
        }
    }
    if !(r_min > 0.0 && r_max > r_min && circles >= 4) {
        return Err(CliError::Input(format!(
            "growth settings need 0 < r_min < r_max and circles >= 4, got r_min={r_min}, r_max={r_max}, circles={circles}"
        )));
    }
    let radii: Vec<f64> = (0..circles)
        .map(|i| r_min * (r_max / r_min).powf(i as f64 / (circles - 1) as f64))
        .collect();
    let class = field.classify_growth(&radii, directions).map_err(field_error)?;
    let report = ClassifyReport {
        command: "classify",
        k: class.k,
        raw: class.raw,
        gap: class.gap,
        confidence: [class.confidence.0, class.confidence.1],
        r_min,
        r_max,
        circles,
        directions,
    };
    report::write_json_atomic(&args.out.join("classify.json"), &report)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct DiameterReport {
    command: &'static str,
    diameter_lower: f64,
    diameter_extrapolated: f64,
    /// `[nx, ny, graph diameter]` per refinement level.
    resolutions: Vec<(usize, usize, f64)>,
    window: [f64; 4],
    best_pair: [[f64; 2]; 2],
}

fn default_diameter_settings(field: &SolutionField) -> DiameterSettings {
    let tau = 2.0 * std::f64::consts::PI;
    match field.provenance() {
        Provenance::TFamily { t } => {
            // Center on the maximizer of u; two y-periods cover the
            // extremal pairs, which live one period apart.
            let xc = 0.5 * (t * t).ln_1p();
            DiameterSettings {
                window: Rect::new(xc - 12.0, xc + 12.0, -tau, tau),
                nx: 241,
                ny: 253,
                ..DiameterSettings::default()
            }
        }
        Provenance::OneDim { .. } => DiameterSettings {
            window: Rect::centered_square(14.0),
            nx: 281,
            ny: 281,
            ..DiameterSettings::default()
        },
        _ => DiameterSettings::default(),
    }
}

fn cmd_diameter(args: &RunArgs) -> Result<i32, CliError> {
    let cfg = load_config(&args.config)?;
    let field = require_solution(&cfg)?;
    ensure_out(&args.out)?;
    let mut settings = default_diameter_settings(&field);
    if let Some(d) = &cfg.diameter {
        if let Some(w) = d.window {
            settings.window = rect_from(w);
        }
        if let Some(v) = d.nx {
            settings.nx = v;
        }
        if let Some(v) = d.ny {
            settings.ny = v;
        }
        if let Some(v) = d.levels {
            settings.levels = v;
        }
    }
    let est = diameter_estimate(&field, &settings).map_err(metric_error)?;
    let report = DiameterReport {
        command: "diameter",
        diameter_lower: est.lower,
        diameter_extrapolated: est.extrapolated,
        resolutions: est.resolutions,
        window: [est.window.x_min, est.window.x_max, est.window.y_min, est.window.y_max],
        best_pair: [
            [est.best_pair.0.re, est.best_pair.0.im],
            [est.best_pair.1.re, est.best_pair.1.im],
        ],
    };
    report::write_json_atomic(&args.out.join("diameter.json"), &report)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct StokesGrowth {
    theta: f64,
    slope: f64,
}

#[derive(Serialize)]
struct AsymptoticsReport {
    command: &'static str,
    degree: usize,
    leading: [f64; 2],
    stokes_directions: Vec<f64>,
    sectors: Vec<[f64; 2]>,
    sector_index: usize,
    exponent: f64,
    c: f64,
    theta0: f64,
    /// `(direction, per-direction exponent)` pairs used by the fit.
    directions: Vec<[f64; 2]>,
    stokes_growth: Vec<StokesGrowth>,
}

fn cmd_asymptotics(args: &RunArgs) -> Result<i32, CliError> {
    let cfg = load_config(&args.config)?;
    let descriptor = cfg
        .map
        .as_ref()
        .ok_or_else(|| CliError::Input("config needs a \"map\" descriptor".into()))?;
    let map = descriptor.build().map_err(|e| CliError::Input(e.to_string()))?;
    let quotient = map
        .as_ode_quotient()
        .ok_or_else(|| CliError::Input("asymptotics needs an \"ode_quotient\" map".into()))?;
    let ac = cfg.asymptotics.clone().unwrap_or_default();
    if !(ac.r_min > 0.0 && ac.r_max > ac.r_min && ac.samples >= 5) {
        return Err(CliError::Input(format!(
            "asymptotics settings need 0 < r_min < r_max and samples >= 5, got r_min={}, r_max={}, samples={}",
            ac.r_min, ac.r_max, ac.samples
        )));
    }
    ensure_out(&args.out)?;

    let decomposition = stokes_directions(quotient.poly());
    let radii: Vec<f64> = (0..ac.samples)
        .map(|i| ac.r_min * (ac.r_max / ac.r_min).powf(i as f64 / (ac.samples - 1) as f64))
        .collect();
    let fit = fit_asymptotics(quotient, ac.sector_index, &radii, ac.directions)
        .map_err(|e| CliError::Failure(e.to_string()))?;

    // The interference envelope along a Stokes line needs a wider radial
    // window than the sector fit for a stable slope; half a decade on each
    // side of [r_min, r_max] averages out the oscillation phase.
    let mut stokes_growth = Vec::new();
    for &theta in &decomposition.directions {
        let slope = directional_growth(quotient, theta, 0.5 * ac.r_max, 3.0 * ac.r_max, 10)
            .map_err(|e| CliError::Failure(e.to_string()))?;
        stokes_growth.push(StokesGrowth { theta, slope });
    }

    dump_rays(quotient, &decomposition.directions, ac.r_max, &args.out)?;

    let report = AsymptoticsReport {
        command: "asymptotics",
        degree: decomposition.degree,
        leading: [decomposition.leading.re, decomposition.leading.im],
        stokes_directions: decomposition.directions.clone(),
        sectors: decomposition.sectors().iter().map(|&(a, b)| [a, b]).collect(),
        sector_index: ac.sector_index,
        exponent: fit.exponent,
        c: fit.c,
        theta0: fit.theta0,
        directions: fit.directions.iter().map(|&(a, b)| [a, b]).collect(),
        stokes_growth,
    };
    report::write_json_atomic(&args.out.join("asymptotics.json"), &report)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(EXIT_OK)
}

fn dump_rays(
    quotient: &crate::ode::OdeQuotientMap,
    directions: &[f64],
    r_max: f64,
    out: &Path,
) -> Result<(), CliError> {
    let n = 200;
    let radii: Vec<f64> = (1..=n).map(|i| r_max * i as f64 / n as f64).collect();
    let log_w = (2.0 * quotient.wronskian().norm()).ln();
    for (idx, &theta) in directions.iter().enumerate() {
        let states = quotient
            .states_on_ray(theta, &radii)
            .map_err(|e| CliError::Failure(e.to_string()))?;
        let mut csv = String::from("s,re_w1,im_w1,re_w2,im_w2,log_sph\n");
        for st in &states {
            let scale = st.log_scale.exp();
            let row = report::csv_row(&[
                st.s,
                st.w1.re * scale,
                st.w1.im * scale,
                st.w2.re * scale,
                st.w2.im * scale,
                log_w - st.log_norm_sqr(),
            ]);
            let _ = writeln!(csv, "{row}");
        }
        report::write_text_atomic(&out.join(format!("ray_{idx}.csv")), &csv)
            .map_err(|e| CliError::Failure(e.to_string()))?;
    }
    Ok(())
}

fn cmd_profile(args: &RunArgs) -> Result<i32, CliError> {
    let cfg = load_config(&args.config)?;
    let field = require_solution(&cfg)?;
    let pc = cfg.profile.clone().unwrap_or_default();
    ensure_out(&args.out)?;

    let mut csv = String::new();
    match &pc.rays {
        Some(thetas) => {
            csv.push_str("theta,r,u,e_u\n");
            if !(pc.r_max > 0.0 && pc.samples >= 2) {
                return Err(CliError::Input(
                    "ray profile needs r_max > 0 and samples >= 2".into(),
                ));
            }
            for &theta in thetas {
                for i in 1..=pc.samples {
                    let r = pc.r_max * i as f64 / pc.samples as f64;
                    let u = field
                        .value(Complex64::from_polar(r, theta))
                        .map_err(field_error)?;
                    let _ = writeln!(csv, "{}", report::csv_row(&[theta, r, u, u.exp()]));
                }
            }
        }
        None => {
            csv.push_str("x,y,u,e_u\n");
            if pc.nx < 2 || pc.ny < 2 {
                return Err(CliError::Input("grid profile needs nx, ny >= 2".into()));
            }
            let window = rect_from(pc.window);
            for j in 0..pc.ny {
                let y = window.y_min + window.height() * j as f64 / (pc.ny - 1) as f64;
                for i in 0..pc.nx {
                    let x = window.x_min + window.width() * i as f64 / (pc.nx - 1) as f64;
                    let u = field.value(Complex64::new(x, y)).map_err(field_error)?;
                    let _ = writeln!(csv, "{}", report::csv_row(&[x, y, u, u.exp()]));
                }
            }
        }
    }
    report::write_text_atomic(&args.out.join("profile.csv"), &csv)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(EXIT_OK)
}
