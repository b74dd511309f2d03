//! `rrt` command line driver: phantom files, forward data, inversion with metrics,
//! and self-test suites.
//!
//! Every subcommand's flags form a JSON object; `--config FILE` overlays the keys of
//! FILE on top of the parsed flags, so the config file wins when both are given.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::container::{Container, Dtype, Header};
use crate::error::{Error, Result};
use crate::forward::{
    equidistant_value, forward_equidistant, forward_tangent, pencil_value, plane_integral, tangent_lambda_grid,
    tangent_value, EquidistantGrid, EquidistantSinogram, LineQuadrature, TangentSinogram,
};
use crate::geometry::{sigma_plane, AnchorSet, Vector};
use crate::invert_equidistant::{field_errors, invert_equidistant, EquidistantInvertOptions, FieldGrid};
use crate::invert_pencil::{cube_targets, gather_volume, plan_volume, reconstruct_volume, VolumePlan, PlaneRadonData};
use crate::invert_tangent::{invert_tangent, recoverable_projection, TangentInvertOptions};
use crate::phantoms::{
    equidistant_null_phantom, equidistant_phantom, equidistant_phantom_real, tangent_phantom_compact,
    tangent_phantom_recoverable, BallBump, Bump, EquidistantPhantom, PencilPhantom, Phantom, SupportBox,
    TangentMode, TangentPhantom,
};
use crate::rotations::haar_quadrature;
use crate::selftest;

/// Exit code of a failed self-test.
pub const EXIT_SELFTEST: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "rrt", version, about = "Restricted Radon transforms: phantoms, forward data, inversion, self-tests")]
pub struct Cli {
    /// Worker threads for the parallel pool.
    #[arg(long, env = "RRT_THREADS", global = true)]
    pub threads: Option<usize>,
    /// JSON object whose keys override the subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log warnings and errors only.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a phantom JSON file.
    Phantom(PhantomArgs),
    /// Simulate forward data for a phantom file.
    Forward(ForwardArgs),
    /// Invert forward data; optionally score against a ground-truth phantom.
    Invert(InvertArgs),
    /// Run an invariant suite and print a JSON report.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Tangent,
    Equidistant,
    Pencil,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Tangent => "tangent",
            Family::Equidistant => "equidistant",
            Family::Pencil => "pencil",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TangentClass {
    Recoverable,
    Compact,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long)]
    pub out: PathBuf,
    /// Tangent: trigonometric (recoverable) or bump (compact) radial profile.
    #[arg(long, value_enum, default_value = "recoverable")]
    pub class: TangentClass,
    /// Tangent: harmonic degree m.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Tangent: harmonic order k.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub k: i64,
    /// Tangent recoverable: `n:c` pairs, g(β) = Σ c cos(nβ); list both ±n.
    #[arg(long, default_value = "1:0.5,-1:0.5", allow_hyphen_values = true)]
    pub coeffs: String,
    /// Tangent compact: bump amplitude.
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Tangent compact: `centre,width` of the radial bump.
    #[arg(long, default_value = "2,0.8")]
    pub bump: String,
    /// Equidistant: angular mode n.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub n: i64,
    /// Equidistant: `centre,width` of the radial bump.
    #[arg(long, default_value = "1,0.5")]
    pub radial: String,
    /// Equidistant: `centre,width` of the axial bump in τ.
    #[arg(long, default_value = "1,0.9", allow_hyphen_values = true)]
    pub axial: String,
    /// Equidistant: add the conjugate mode -n so f is real.
    #[arg(long)]
    pub real: bool,
    /// Equidistant: odd-in-τ radial phantom with vanishing data.
    #[arg(long)]
    pub null: bool,
    /// Pencil: ambient dimension.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Pencil: bumps `c1,…,cn,radius,amplitude` separated by `;`.
    #[arg(
        long,
        default_value = "0.2,-0.1,0.1,0.8,1;-0.4,0.3,-0.2,0.5,0.7",
        allow_hyphen_values = true
    )]
    pub bumps: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long)]
    pub phantom: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Tangent: band limit L of the Haar quadrature.
    #[arg(long, default_value_t = 4)]
    pub band_limit: usize,
    /// Number of λ samples (tangent default 64, equidistant default 1024).
    #[arg(long)]
    pub n_lambda: Option<usize>,
    /// Equidistant: number of s = tan θ samples.
    #[arg(long, default_value_t = 768)]
    pub n_s: usize,
    /// Equidistant: number of φ samples (default max(4, 4·max |n|)).
    #[arg(long)]
    pub n_phi: Option<usize>,
    /// Equidistant: largest λ (default: radial support bound).
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Pencil: anchor points `x,y,z;x,y,z`.
    #[arg(long, default_value = "0.3,-0.2,2.5;-0.1,0.4,3.0", allow_hyphen_values = true)]
    pub anchors: String,
    /// Pencil: target cube has grid³ cell centres.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    /// Pencil: target cube half-width (default: support radius).
    #[arg(long)]
    pub extent: Option<f64>,
    /// Pencil: angles and offsets per covering plane.
    #[arg(long, default_value_t = crate::invert_pencil::VOLUME_BEAM)]
    pub beam: usize,
    /// Samples used for the quadrature doubling check.
    #[arg(long, default_value_t = 6)]
    pub check_samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Forward data container.
    #[arg(long)]
    pub data: PathBuf,
    /// Reconstruction container.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth phantom for error metrics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Metrics JSON (default: `<out>.metrics.json`).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// CSV slice `axis=value` (r, m for tangent; r, tau for equidistant; x, y, z for pencil).
    #[arg(long)]
    pub csv_slice: Option<String>,
    /// CSV path (default: `<out>.slice.csv`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Tangent: FFT length.
    #[arg(long, default_value_t = 256)]
    pub n_fft: usize,
    /// Tangent: radial grid upper bound.
    #[arg(long, default_value_t = 10.0)]
    pub r_max: f64,
    /// Tangent: radial grid size.
    #[arg(long, default_value_t = 181)]
    pub n_r: usize,
    /// Equidistant: modes to recover, e.g. `0,1,-1` (default: truth modes, else 0).
    #[arg(long, allow_hyphen_values = true)]
    pub modes: Option<String>,
    /// Equidistant: output grid size in r.
    #[arg(long, default_value_t = 64)]
    pub field_r: usize,
    /// Equidistant: output grid size in τ.
    #[arg(long, default_value_t = 64)]
    pub field_tau: usize,
    /// Equidistant: contour half-length Ω.
    #[arg(long, default_value_t = 150.0)]
    pub omega: f64,
    /// Equidistant: contour step h.
    #[arg(long, default_value_t = 0.05)]
    pub h: f64,
    /// Equidistant: Re ξ.
    #[arg(long, default_value_t = 0.5)]
    pub xi_re: f64,
    /// Equidistant: guard δ for the kernel division.
    #[arg(long, default_value_t = 1e-10)]
    pub delta: f64,
    /// Pencil: plane manifest JSON (default: `<out>.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestArgs {
    /// Suite name; `all` runs every suite.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Also write the report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses process arguments and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rrt: {e}");
            e.exit_code()
        }
    }
}

fn overlay<T: Serialize + DeserializeOwned>(args: T, config: &Option<Value>) -> Result<T> {
    let Some(cfg) = config else { return Ok(args) };
    let mut v = serde_json::to_value(&args)?;
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, cfg) {
        for (k, val) in src {
            if k != "threads" {
                dst.insert(k.clone(), val.clone());
            }
        }
    }
    serde_json::from_value(v).map_err(|e| Error::Validation(format!("config: {e}")))
}

pub fn run(cli: Cli) -> Result<i32> {
    let level = if cli.quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    let config: Option<Value> = match &cli.config {
        Some(p) => {
            let v: Value = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            if !v.is_object() {
                return Err(Error::Validation("config file must hold a JSON object".into()));
            }
            Some(v)
        }
        None => None,
    };
    let threads = config
        .as_ref()
        .and_then(|c| c.get("threads"))
        .and_then(Value::as_u64)
        .map(|t| t as usize)
        .or(cli.threads);
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Validation("--threads must be at least 1".into()));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            warn!("thread pool already initialised; --threads ignored");
        }
    }
    match cli.command {
        Command::Phantom(a) => cmd_phantom(&overlay(a, &config)?).map(|_| 0),
        Command::Forward(a) => cmd_forward(&overlay(a, &config)?).map(|_| 0),
        Command::Invert(a) => cmd_invert(&overlay(a, &config)?).map(|_| 0),
        Command::Selftest(a) => cmd_selftest(&overlay(a, &config)?),
    }
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("{what}: `{t}` is not a number")))
        })
        .collect()
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64)> {
    match parse_floats(s, what)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::Validation(format!("{what}: expected `a,b`, got `{s}`"))),
    }
}

fn parse_rows(s: &str, what: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';').filter(|r| !r.trim().is_empty()).map(|r| parse_floats(r, what)).collect()
}

fn parse_coeffs(s: &str) -> Result<Vec<(i64, f64)>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (n, c) = t
                .split_once(':')
                .ok_or_else(|| Error::Validation(format!("coeffs: `{t}` is not `n:c`")))?;
            let n = n.trim().parse::<i64>().map_err(|_| Error::Validation(format!("coeffs: bad index `{n}`")))?;
            let c = c.trim().parse::<f64>().map_err(|_| Error::Validation(format!("coeffs: bad value `{c}`")))?;
            Ok((n, c))
        })
        .collect()
}

fn parse_modes(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|_| Error::Validation(format!("modes: bad index `{t}`"))))
        .collect()
}

/// Builds the phantom described by the flags.
pub fn build_phantom(a: &PhantomArgs) -> Result<Phantom> {
    match a.family {
        Family::Tangent => {
            let p = match a.class {
                TangentClass::Recoverable => tangent_phantom_recoverable(a.m, a.k, &parse_coeffs(&a.coeffs)?)?,
                TangentClass::Compact => {
                    let (c, w) = parse_pair(&a.bump, "bump")?;
                    tangent_phantom_compact(a.m, a.k, a.amplitude, Bump::new(c, w)?)?
                }
            };
            Ok(Phantom::Tangent(p))
        }
        Family::Equidistant => {
            let (rc, rw) = parse_pair(&a.radial, "radial")?;
            let (tc, tw) = parse_pair(&a.axial, "axial")?;
            let radial = Bump::new(rc, rw)?;
            let axial = Bump::new(tc, tw)?;
            let p = if a.null {
                equidistant_null_phantom(radial, axial)
            } else if a.real {
                equidistant_phantom_real(a.n, radial, axial)?
            } else {
                equidistant_phantom(a.n, radial, axial)?
            };
            p.validate()?;
            Ok(Phantom::Equidistant(p))
        }
        Family::Pencil => {
            let bumps = parse_rows(&a.bumps, "bumps")?
                .into_iter()
                .map(|row| {
                    if row.len() != a.dim + 2 {
                        return Err(Error::Validation(format!(
                            "bumps: each bump needs {} numbers (centre, radius, amplitude)",
                            a.dim + 2
                        )));
                    }
                    Ok(BallBump {
                        center: row[..a.dim].to_vec(),
                        radius: row[a.dim],
                        amplitude: row[a.dim + 1],
                        power: 8,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Phantom::Pencil(PencilPhantom::new(a.dim, bumps)?))
        }
    }
}

fn cmd_phantom(a: &PhantomArgs) -> Result<()> {
    let p = build_phantom(a)?;
    std::fs::write(&a.out, p.to_json()?)?;
    let (support, decay) = p.summary();
    println!(
        "{}",
        json!({"family": p.family(), "hash": p.hash(), "support": support, "decay": decay})
    );
    Ok(())
}

fn read_phantom(path: &Path) -> Result<Phantom> {
    Phantom::from_json(&std::fs::read_to_string(path)?)
}

fn family_mismatch(want: Family, got: &str) -> Error {
    Error::Validation(format!("family mismatch: command expects `{}`, input is `{got}`", want.name()))
}

fn tangent_phantom(p: Phantom, fam: Family) -> Result<TangentPhantom> {
    match p {
        Phantom::Tangent(t) => Ok(t),
        other => Err(family_mismatch(fam, other.family())),
    }
}

fn equidistant_phantom_of(p: Phantom, fam: Family) -> Result<EquidistantPhantom> {
    match p {
        Phantom::Equidistant(t) => Ok(t),
        other => Err(family_mismatch(fam, other.family())),
    }
}

fn pencil_phantom_of(p: Phantom, fam: Family) -> Result<PencilPhantom> {
    match p {
        Phantom::Pencil(t) => Ok(t),
        other => Err(family_mismatch(fam, other.family())),
    }
}

/// Evenly spread sample indices for the quadrature check.
fn spread(count: usize, len: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let c = count.min(len).max(1);
    (0..c).map(|i| i * (len - 1) / c.max(2).saturating_sub(1).max(1)).map(|i| i.min(len - 1)).collect()
}

fn cmd_forward(a: &ForwardArgs) -> Result<()> {
    let phantom = read_phantom(&a.phantom)?;
    let hash = phantom.hash();
    let container = match a.family {
        Family::Tangent => {
            let p = tangent_phantom(phantom, a.family)?;
            let lambdas = tangent_lambda_grid(a.n_lambda.unwrap_or(64));
            let s = forward_tangent(&p, &lambdas, a.band_limit)?;
            let delta = tangent_quadrature_check(&p, &s, a.check_samples)?;
            info!("quadrature doubling delta {delta:e}, max |value| {:e}", s.max_abs());
            let mut c = tangent_container(&s)?;
            c.header.meta["quadrature_delta"] = json!(delta);
            c.header.phantom_hash = Some(hash);
            c
        }
        Family::Equidistant => {
            let p = equidistant_phantom_of(phantom, a.family)?;
            let b = p.support_box();
            let n_phi = a.n_phi.unwrap_or_else(|| (4 * p.max_mode().unsigned_abs() as usize).max(4));
            let lambda_max = a.lambda_max.unwrap_or(b.r_max);
            if lambda_max < b.r_max {
                return Err(Error::Domain(format!(
                    "λ_max = {lambda_max} is below the radial support bound {}; the tail is not captured",
                    b.r_max
                )));
            }
            let grid = EquidistantGrid::standard(lambda_max, a.n_lambda.unwrap_or(1024), a.n_s, n_phi);
            let s = forward_equidistant(&p, &grid)?;
            let delta = equidistant_quadrature_check(&p, &s, a.check_samples);
            info!("quadrature doubling delta {delta:e}, max |value| {:e}", s.max_abs());
            let mut c = equidistant_container(&s, &b)?;
            c.header.meta["quadrature_delta"] = json!(delta);
            c.header.phantom_hash = Some(hash);
            c
        }
        Family::Pencil => {
            let p = pencil_phantom_of(phantom, a.family)?;
            let anchors = AnchorSet::from_rows(&parse_rows(&a.anchors, "anchors")?)?;
            if anchors.n() != p.dim {
                return Err(Error::Validation("anchors and phantom differ in dimension".into()));
            }
            let extent = a.extent.unwrap_or_else(|| p.support_radius());
            let targets = cube_targets(a.grid, extent);
            let plan = plan_volume(&anchors, p.support_radius(), &targets, a.beam, a.beam)?;
            info!("{} covering planes, {} pencil samples", plan.planes.len(), plan.sample_count());
            let data = gather_volume(&anchors, &plan, |x: &Vector| pencil_value(&p, &anchors, x, 32))?;
            let delta = pencil_quadrature_check(&p, &anchors, &data, a.check_samples)?;
            let max = data
                .iter()
                .flatten()
                .flat_map(|d| d.values.iter())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            info!("quadrature doubling delta {delta:e}, max |value| {max:e}");
            let mut c = pencil_container(&anchors, &plan, &data, a.grid, extent)?;
            c.header.meta["quadrature_delta"] = json!(delta);
            c.header.phantom_hash = Some(hash);
            c
        }
    };
    container.write(&a.out)?;
    println!(
        "{}",
        json!({"kind": container.header.kind, "shape": container.header.shape, "out": a.out})
    );
    Ok(())
}

fn tangent_quadrature_check(p: &TangentPhantom, s: &TangentSinogram, count: usize) -> Result<f64> {
    let nl = s.lambdas.len();
    let q = LineQuadrature { panels: 4, nodes: 24 };
    let n_phi = 2 * s.quadrature.band_limit + 2;
    let mut worst: f64 = 0.0;
    for (i, node) in spread(count, s.quadrature.len()).into_iter().enumerate() {
        let j = (i * 7) % nl.max(1);
        let rot = &s.quadrature.nodes[node];
        let a = tangent_value(p, rot, s.lambdas[j], n_phi, q)?;
        let b = tangent_value(p, rot, s.lambdas[j], n_phi, q.doubled())?;
        worst = worst.max((a - b).norm());
    }
    Ok(worst)
}

fn equidistant_quadrature_check(p: &EquidistantPhantom, s: &EquidistantSinogram, count: usize) -> f64 {
    let q = LineQuadrature::default();
    let thetas = s.grid.thetas();
    let phis = s.grid.phis();
    let mut worst: f64 = 0.0;
    for (i, li) in spread(count, s.grid.lambdas.len()).into_iter().enumerate() {
        let j = (i * 131) % thetas.len().max(1);
        let k = i % phis.len().max(1);
        let a = equidistant_value(p, s.grid.lambdas[li], thetas[j], phis[k], q);
        let b = equidistant_value(p, s.grid.lambdas[li], thetas[j], phis[k], q.doubled());
        worst = worst.max((a - b).norm());
    }
    worst
}

fn pencil_quadrature_check(
    p: &PencilPhantom,
    anchors: &AnchorSet,
    data: &[Option<PlaneRadonData>],
    count: usize,
) -> Result<f64> {
    let planes: Vec<&PlaneRadonData> = data.iter().flatten().collect();
    let mut worst: f64 = 0.0;
    for (i, pi) in spread(count, planes.len()).into_iter().enumerate() {
        let d = planes[pi];
        let (r, sigma) = d.beam.hyperplane(i % d.beam.n_theta, (i * 13 + d.beam.n_s / 2) % d.beam.n_s);
        let a = d.rotation_matrix();
        let (x0, _) = crate::invert_pencil::pencil_point(anchors, &a, &d.u0, r, &sigma);
        let plane = sigma_plane(&x0, anchors)?;
        worst = worst.max((plane_integral(p, &plane, 32) - plane_integral(p, &plane, 64)).abs());
    }
    Ok(worst)
}

/// Container of tangent data: c128, shape [Haar nodes, λ], λ fastest.
pub fn tangent_container(s: &TangentSinogram) -> Result<Container> {
    let mut h = Header::new(
        "tangent_sinogram",
        Dtype::C128,
        vec![s.quadrature.len(), s.lambdas.len()],
        "Haar node (phi1 outer, theta, phi2 inner) major, lambda fastest",
    );
    h.meta = json!({"band_limit": s.quadrature.band_limit, "lambdas": s.lambdas});
    Container::complex(h, &s.values)
}

pub fn tangent_from_container(c: &Container) -> Result<TangentSinogram> {
    c.expect_kind("tangent_sinogram")?;
    let l = meta_field::<usize>(c, "band_limit")?;
    let lambdas = meta_field::<Vec<f64>>(c, "lambdas")?;
    let quadrature = haar_quadrature(l)?;
    if c.header.shape != [quadrature.len(), lambdas.len()] {
        return Err(Error::Format("tangent container shape does not match its metadata".into()));
    }
    Ok(TangentSinogram {
        lambdas,
        quadrature,
        values: c.as_complex()?,
    })
}

/// Container of equidistant data: c128, shape [λ, s, φ], φ fastest.
pub fn equidistant_container(s: &EquidistantSinogram, support: &SupportBox) -> Result<Container> {
    let mut h = Header::new(
        "equidistant_sinogram",
        Dtype::C128,
        vec![s.grid.lambdas.len(), s.grid.s.len(), s.grid.n_phi],
        "lambda major, s = tan theta, phi fastest",
    );
    h.meta = json!({"grid": s.grid, "support": support});
    Container::complex(h, &s.values)
}

pub fn equidistant_from_container(c: &Container) -> Result<(EquidistantSinogram, SupportBox)> {
    c.expect_kind("equidistant_sinogram")?;
    let grid: EquidistantGrid = meta_field(c, "grid")?;
    let support: SupportBox = meta_field(c, "support")?;
    if c.header.shape != [grid.lambdas.len(), grid.s.len(), grid.n_phi] {
        return Err(Error::Format("equidistant container shape does not match its metadata".into()));
    }
    Ok((
        EquidistantSinogram {
            grid,
            values: c.as_complex()?,
        },
        support,
    ))
}

/// Container of pencil data: f64, shape [planes with data, θ, s], s fastest.
pub fn pencil_container(
    anchors: &AnchorSet,
    plan: &VolumePlan,
    data: &[Option<PlaneRadonData>],
    grid: usize,
    extent: f64,
) -> Result<Container> {
    let with: Vec<&PlaneRadonData> = data.iter().flatten().collect();
    let beam = plan.planes.iter().find_map(|p| p.beam);
    let (nt, ns) = beam.map_or((0, 0), |b| (b.n_theta, b.n_s));
    let mut h = Header::new(
        "pencil_data",
        Dtype::F64,
        vec![with.len(), nt, ns],
        "covering plane (plan order, planes missing the support skipped), theta, offset fastest",
    );
    let rows: Vec<Vec<f64>> = anchors.points.iter().map(|p| p.iter().copied().collect()).collect();
    let perturbed: Vec<usize> = with.iter().map(|d| d.perturbed).collect();
    h.meta = json!({"anchors": rows, "grid": grid, "extent": extent, "plan": plan, "perturbed": perturbed});
    let payload = with.iter().flat_map(|d| d.values.iter().copied()).collect();
    Container::real(h, payload)
}

/// Anchors, plan, per-plane data, target grid size and cube half-width.
pub type PencilContents = (AnchorSet, VolumePlan, Vec<Option<PlaneRadonData>>, usize, f64);

pub fn pencil_from_container(c: &Container) -> Result<PencilContents> {
    c.expect_kind("pencil_data")?;
    let rows: Vec<Vec<f64>> = meta_field(c, "anchors")?;
    let anchors = AnchorSet::from_rows(&rows)?;
    let plan: VolumePlan = meta_field(c, "plan")?;
    let grid: usize = meta_field(c, "grid")?;
    let extent: f64 = meta_field(c, "extent")?;
    let perturbed: Vec<usize> = meta_field(c, "perturbed")?;
    let values = c.as_real()?;
    let mut offset = 0;
    let mut used = 0;
    let mut data = Vec::with_capacity(plan.planes.len());
    for p in &plan.planes {
        match p.beam {
            None => data.push(None),
            Some(beam) => {
                let len = beam.n_theta * beam.n_s;
                if offset + len > values.len() {
                    return Err(Error::Format("pencil container payload is shorter than its plan".into()));
                }
                let a = crate::geometry::canonical_rotation(&anchors, &p.covering.omega_vectors())?;
                let u0: Vec<f64> = (&a * anchors.last()).iter().skip(anchors.k() + 1).copied().collect();
                data.push(Some(PlaneRadonData {
                    covering: p.covering.clone(),
                    rotation: (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect(),
                    u0,
                    beam,
                    values: values[offset..offset + len].to_vec(),
                    perturbed: perturbed.get(used).copied().unwrap_or(0),
                }));
                offset += len;
                used += 1;
            }
        }
    }
    if offset != values.len() {
        return Err(Error::Format("pencil container payload is longer than its plan".into()));
    }
    Ok((anchors, plan, data, grid, extent))
}

fn meta_field<T: DeserializeOwned>(c: &Container, key: &str) -> Result<T> {
    let v = c
        .header
        .meta
        .get(key)
        .ok_or_else(|| Error::Format(format!("container metadata lacks `{key}`")))?;
    serde_json::from_value(v.clone()).map_err(|e| Error::Format(format!("container metadata `{key}`: {e}")))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Parses `axis=value`.
fn parse_slice(s: &str) -> Result<(String, f64)> {
    let (a, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Validation(format!("--csv-slice expects axis=value, got `{s}`")))?;
    let v = v
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Validation(format!("--csv-slice: bad value `{v}`")))?;
    Ok((a.trim().to_string(), v))
}

fn nearest(xs: &[f64], v: f64) -> usize {
    xs.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map_or(0, |p| p.0)
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(())
}

fn rel_errors_real(got: &[f64], truth: &[f64]) -> (f64, f64) {
    let g: Vec<Complex64> = got.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let t: Vec<Complex64> = truth.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    field_errors(&g, &t)
}

fn cmd_invert(a: &InvertArgs) -> Result<()> {
    let container = Container::read(&a.data)?;
    let data_hash = sha256_file(&a.data)?;
    let truth = a.truth.as_deref().map(read_phantom).transpose()?;
    if let (Some(t), Some(h)) = (&truth, &container.header.phantom_hash) {
        if &t.hash() != h {
            warn!("truth phantom hash differs from the one recorded in the data container");
        }
    }
    let (out, metrics) = match a.family {
        Family::Tangent => invert_tangent_cmd(a, &container, truth)?,
        Family::Equidistant => invert_equidistant_cmd(a, &container, truth)?,
        Family::Pencil => invert_pencil_cmd(a, &container, truth)?,
    };
    out.write(&a.out)?;
    let mut metrics = metrics;
    metrics["schema"] = json!(1);
    metrics["family"] = json!(a.family.name());
    metrics["data_sha256"] = json!(data_hash);
    metrics["phantom_hash"] = json!(container.header.phantom_hash);
    let mpath = a.metrics.clone().unwrap_or_else(|| with_suffix(&a.out, ".metrics.json"));
    std::fs::write(&mpath, serde_json::to_string_pretty(&metrics)?)?;
    if let Some(g) = metrics.get("global") {
        println!("{}", json!({"out": a.out, "metrics": mpath, "global": g}));
    } else {
        println!("{}", json!({"out": a.out, "metrics": mpath}));
    }
    Ok(())
}

fn check_family(c: &Container, fam: Family) -> Result<()> {
    let tag = c.header.kind.split('_').next().unwrap_or("");
    if tag != fam.name() {
        return Err(family_mismatch(fam, tag));
    }
    Ok(())
}

type ModeTruth = BTreeMap<(usize, i64), (Vec<(i64, Complex64)>, f64)>;

/// Mode-wise truth on the recoverable mask: 2× the masked projection of g, and the
/// L² norm of the part of g the mask cannot see.
fn tangent_truth(p: &TangentPhantom) -> ModeTruth {
    let mut groups: BTreeMap<(usize, i64), Vec<&TangentMode>> = BTreeMap::new();
    for mode in &p.modes {
        groups.entry((mode.m, mode.k)).or_default().push(mode);
    }
    groups
        .into_iter()
        .map(|((m, k), modes)| {
            let (proj, rest) = recoverable_projection(|b| modes.iter().map(|q| q.g(b)).sum(), m, 48);
            ((m, k), (proj.into_iter().map(|(n, c)| (n, c * 2.0)).collect(), rest))
        })
        .collect()
}

fn window_profile(coeffs: &[(i64, Complex64)], r: f64) -> Complex64 {
    if r <= 1.0 {
        return Complex64::new(0.0, 0.0);
    }
    let c = 1.0 / r;
    let beta = c.acos();
    coeffs
        .iter()
        .map(|(n, v)| *v * Complex64::from_polar(1.0, *n as f64 * beta))
        .sum::<Complex64>()
        * (c * c)
}

fn invert_tangent_cmd(a: &InvertArgs, c: &Container, truth: Option<Phantom>) -> Result<(Container, Value)> {
    check_family(c, a.family)?;
    let sino = tangent_from_container(c)?;
    let opts = TangentInvertOptions {
        n_fft: a.n_fft,
        r_max: a.r_max,
        n_r: a.n_r,
    };
    let inv = invert_tangent(&sino, &opts)?;
    let radii = opts.radii();
    let modes: Vec<(usize, i64)> = inv.iter().map(|m| (m.record.m, m.record.k)).collect();
    let records: Vec<_> = inv.iter().map(|m| &m.record).collect();
    let mut h = Header::new(
        "tangent_reconstruction",
        Dtype::C128,
        vec![inv.len(), radii.len()],
        "mode (m, k) as in meta.modes, radius fastest",
    );
    h.meta = json!({"modes": modes, "radii": radii, "records": records});
    h.phantom_hash = c.header.phantom_hash.clone();
    let values: Vec<Complex64> = inv.iter().flat_map(|m| m.profile.iter().copied()).collect();
    let out = Container::complex(h, &values)?;
    let mut metrics = json!({"params": opts});
    let mut mode_rows = Vec::new();
    let truth = truth.map(|t| tangent_phantom(t, a.family)).transpose()?;
    let tmap = truth.as_ref().map(tangent_truth);
    let mut all_got = Vec::new();
    let mut all_truth = Vec::new();
    for m in &inv {
        let r = &m.record;
        let mut row = json!({"m": r.m, "k": r.k, "off_mask_energy": r.off_mask_energy, "mask": r.mask});
        if let Some(tm) = &tmap {
            let (want, rest) = tm.get(&(r.m, r.k)).cloned().unwrap_or_default();
            row["unrecoverable_energy"] = json!(rest);
            let got = r.window_coefficients();
            let scale = want.iter().map(|x| x.1.norm()).fold(0.0, f64::max);
            let mut err: f64 = 0.0;
            for (n, g) in &got {
                let w = want.iter().find(|x| x.0 == *n).map_or(Complex64::new(0.0, 0.0), |x| x.1);
                err = err.max((g - w).norm());
            }
            let tprof: Vec<Complex64> = radii.iter().map(|&rr| window_profile(&want, rr)).collect();
            let (l2, li) = field_errors(&m.profile, &tprof);
            row["coefficient_error"] = json!(if scale > 0.0 { err / scale } else { err });
            row["coefficient_error_is_relative"] = json!(scale > 0.0);
            if scale > 0.0 {
                row["profile_rel_l2"] = json!(l2);
                row["profile_rel_linf"] = json!(li);
            }
            all_got.extend(m.profile.iter().copied());
            all_truth.extend(tprof);
        }
        mode_rows.push(row);
    }
    metrics["modes"] = json!(mode_rows);
    if tmap.is_some() {
        let (l2, li) = field_errors(&all_got, &all_truth);
        metrics["global"] = json!({"rel_l2": l2, "rel_linf": li});
    }
    if let Some(spec) = &a.csv_slice {
        let (axis, v) = parse_slice(spec)?;
        let mut rows = Vec::new();
        match axis.as_str() {
            "r" => {
                let i = nearest(&radii, v);
                for m in &inv {
                    let z = m.profile[i];
                    rows.push(format!("{},{},{},{},{}", m.record.m, m.record.k, radii[i], z.re, z.im));
                }
            }
            "m" => {
                for m in inv.iter().filter(|m| m.record.m as f64 == v) {
                    for (rr, z) in radii.iter().zip(&m.profile) {
                        rows.push(format!("{},{},{},{},{}", m.record.m, m.record.k, rr, z.re, z.im));
                    }
                }
            }
            _ => return Err(Error::Validation(format!("tangent slices run along r or m, not `{axis}`"))),
        }
        let path = a.csv.clone().unwrap_or_else(|| with_suffix(&a.out, ".slice.csv"));
        write_csv(&path, "m,k,r,re,im", &rows)?;
    }
    Ok((out, metrics))
}

fn invert_equidistant_cmd(a: &InvertArgs, c: &Container, truth: Option<Phantom>) -> Result<(Container, Value)> {
    check_family(c, a.family)?;
    let (sino, support) = equidistant_from_container(c)?;
    let truth = truth.map(|t| equidistant_phantom_of(t, a.family)).transpose()?;
    let modes = match (&a.modes, &truth) {
        (Some(s), _) => parse_modes(s)?,
        (None, Some(t)) => {
            let mut ns: Vec<i64> = t.modes.iter().map(|m| m.n).collect();
            ns.dedup();
            ns
        }
        (None, None) => vec![0],
    };
    let opts = EquidistantInvertOptions {
        omega: a.omega,
        h: a.h,
        xi_re: a.xi_re,
        delta: a.delta,
        ..EquidistantInvertOptions::default()
    };
    let grid = FieldGrid::uniform(&support, a.field_r, a.field_tau);
    let rec = invert_equidistant(&sino, &modes, &grid, &opts)?;
    let (nr, nt) = (grid.r.len(), grid.tau.len());
    let diags: Vec<_> = rec.iter().map(|m| &m.diagnostics).collect();
    let mut h = Header::new(
        "equidistant_reconstruction",
        Dtype::C128,
        vec![rec.len(), nr, nt],
        "mode as in meta.modes, r, tau fastest",
    );
    h.meta = json!({"modes": modes, "grid": grid, "diagnostics": diags});
    h.phantom_hash = c.header.phantom_hash.clone();
    let values: Vec<Complex64> = rec.iter().flat_map(|m| m.f.iter().copied()).collect();
    let out = Container::complex(h, &values)?;
    let mut metrics = json!({"params": opts, "modes": []});
    let mut rows = Vec::new();
    let mut all_got = Vec::new();
    let mut all_truth = Vec::new();
    for m in &rec {
        let mut row = json!({"n": m.n, "regularization_hits": m.diagnostics.regularization_hits, "truncation_ratio": m.diagnostics.truncation_ratio});
        if let Some(t) = &truth {
            let tv: Vec<Complex64> = (0..nr * nt).map(|i| t.mode_profile(m.n, grid.r[i / nt], grid.tau[i % nt])).collect();
            let (l2, li) = field_errors(&m.f, &tv);
            row["rel_l2"] = json!(l2);
            row["rel_linf"] = json!(li);
            all_got.extend(m.f.iter().copied());
            all_truth.extend(tv);
        }
        rows.push(row);
    }
    metrics["modes"] = json!(rows);
    if truth.is_some() {
        let (l2, li) = field_errors(&all_got, &all_truth);
        metrics["global"] = json!({"rel_l2": l2, "rel_linf": li});
    }
    if let Some(spec) = &a.csv_slice {
        let (axis, v) = parse_slice(spec)?;
        let mut out_rows = Vec::new();
        for m in &rec {
            match axis.as_str() {
                "r" => {
                    let i = nearest(&grid.r, v);
                    for j in 0..nt {
                        let z = m.f[i * nt + j];
                        out_rows.push(format!("{},{},{},{},{}", m.n, grid.r[i], grid.tau[j], z.re, z.im));
                    }
                }
                "tau" => {
                    let j = nearest(&grid.tau, v);
                    for i in 0..nr {
                        let z = m.f[i * nt + j];
                        out_rows.push(format!("{},{},{},{},{}", m.n, grid.r[i], grid.tau[j], z.re, z.im));
                    }
                }
                _ => return Err(Error::Validation(format!("equidistant slices run along r or tau, not `{axis}`"))),
            }
        }
        let path = a.csv.clone().unwrap_or_else(|| with_suffix(&a.out, ".slice.csv"));
        write_csv(&path, "n,r,tau,re,im", &out_rows)?;
    }
    Ok((out, metrics))
}

fn invert_pencil_cmd(a: &InvertArgs, c: &Container, truth: Option<Phantom>) -> Result<(Container, Value)> {
    check_family(c, a.family)?;
    let (_anchors, plan, data, m, extent) = pencil_from_container(c)?;
    let targets = cube_targets(m, extent);
    let vol = reconstruct_volume(&plan, &data, &targets)?;
    let mut h = Header::new("pencil_reconstruction", Dtype::F64, vec![m, m, m], "z, y, x fastest (cell centres)");
    h.meta = json!({"extent": extent, "grid": m});
    h.phantom_hash = c.header.phantom_hash.clone();
    let out = Container::real(h, vol.values.clone())?;
    let manifest = json!({"schema": 1, "planes": vol.planes});
    let mpath = a.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
    let mut metrics = json!({
        "params": {"grid": m, "extent": extent, "planes": plan.planes.len(), "samples": plan.sample_count()},
        "perturbed": vol.planes.iter().map(|p| p.perturbed).sum::<usize>(),
    });
    if let Some(t) = truth {
        let t = pencil_phantom_of(t, a.family)?;
        let tv: Vec<f64> = targets.iter().map(|z| t.eval(z.as_slice())).collect();
        let (l2, li) = rel_errors_real(&vol.values, &tv);
        metrics["global"] = json!({"rel_l2": l2, "rel_linf": li});
    }
    if let Some(spec) = &a.csv_slice {
        let (axis, v) = parse_slice(spec)?;
        let coords: Vec<f64> = (0..m).map(|q| -extent + 2.0 * extent * (q as f64 + 0.5) / m as f64).collect();
        let q = nearest(&coords, v);
        let sel: Box<dyn Fn(usize) -> bool> = match axis.as_str() {
            "x" => Box::new(move |i| i % m == q),
            "y" => Box::new(move |i| (i / m) % m == q),
            "z" => Box::new(move |i| i / (m * m) == q),
            _ => return Err(Error::Validation(format!("pencil slices run along x, y or z, not `{axis}`"))),
        };
        let rows: Vec<String> = (0..targets.len())
            .filter(|i| sel(*i))
            .map(|i| {
                let z = &targets[i];
                format!("{},{},{},{}", z[0], z[1], z[2], vol.values[i])
            })
            .collect();
        let path = a.csv.clone().unwrap_or_else(|| with_suffix(&a.out, ".slice.csv"));
        write_csv(&path, "x,y,z,value", &rows)?;
    }
    Ok((out, metrics))
}

fn cmd_selftest(a: &SelftestArgs) -> Result<i32> {
    let report = selftest::run_suite(&a.suite, a.seed)?;
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(p) = &a.report {
        std::fs::write(p, &text)?;
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        warn!("{}: {} residual {:e} >= {:e}", c.suite, c.name, c.residual, c.threshold);
    }
    Ok(if report.pass { 0 } else { EXIT_SELFTEST })
}
