use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use adawave::basis::{verify_transform, BIORTHOGONALITY_TOLERANCE, REPORT_CSV_HEADER};
use adawave::denoise::{denoise_averaged, snr_db, DenoiseConfig};
use adawave::glm::{Contrast, DesignMatrix};
use adawave::linear::LinearBasis;
use adawave::phantom::{gaussian_noise, smooth_phantom, PhantomConfig};
use adawave::vxl::{load_series_on, load_volume_on, save_mask, save_series, save_volume, Payload, VxlFile};
use adawave::wspm::{compute_thresholds, wspm_detect_averaged, RocProtocol, Tail, WspmEngine};
use adawave::{
    build_hierarchy, make_ring_domain, BasisKind, CoefficientPyramid, Error, LiftingTransform, Stage, TransformOptions,
    Volume,
};
use anyhow::{Context, Result};
use clap::{Args, ValueEnum};

use crate::util::{existing, load_hierarchy, mask, parse_rings, read_text, write_text, HierarchyArgs, Summary};

fn transform(h: Arc<adawave::GridHierarchy>, stage: Stage, levels: usize, normalize: bool) -> Result<LiftingTransform> {
    let opts = TransformOptions::new(stage, levels);
    let opts = if normalize { opts.normalized() } else { opts };
    Ok(LiftingTransform::new(h, opts)?)
}

#[derive(Args, Debug)]
pub struct BuildHierarchyArgs {
    #[command(flatten)]
    pub hier: HierarchyArgs,
    /// Output hierarchy text file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn build_hierarchy_cmd(a: &BuildHierarchyArgs, s: &mut Summary) -> Result<u8> {
    let h = a.hier.load()?;
    write_text(&a.out, &h.to_text())?;
    s.add("voxels", h.domain().len())
        .add("levels", h.depth())
        .add("coarsest", h.level(0).len())
        .add("hash", h.content_hash())
        .add("out", a.out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct FwdArgs {
    #[command(flatten)]
    pub hier: HierarchyArgs,
    /// Input values (VXL1, f64 payload).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "ai")]
    pub stage: Stage,
    /// Store coefficients of unit-norm basis functions.
    #[arg(long)]
    pub normalize: bool,
    /// Output pyramid.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn fwd(a: &FwdArgs, s: &mut Summary) -> Result<u8> {
    existing(&a.data)?;
    let h = a.hier.load()?;
    let t = transform(h.clone(), a.stage, a.hier.levels, a.normalize)?;
    let v = load_volume_on(&a.data, h.domain().clone()).with_context(|| format!("loading {}", a.data.display()))?;
    let p = t.forward(&v)?;
    p.write(&a.out)?;
    s.add("coefficients", p.len())
        .add("stage", a.stage)
        .add("normalized", a.normalize)
        .add("hash", &p.hierarchy_hash)
        .add("out", a.out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct InvArgs {
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// Seed the pyramid's hierarchy was built with.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub max_merge: usize,
    /// Input pyramid; its stage, levels and normalization are reused.
    #[arg(long)]
    pub pyramid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn inv(a: &InvArgs, s: &mut Summary) -> Result<u8> {
    let p = CoefficientPyramid::read(existing(&a.pyramid)?).with_context(|| format!("loading {}", a.pyramid.display()))?;
    let h = load_hierarchy(&a.mask, a.hierarchy.as_deref(), p.finest_level, a.seed, a.max_merge)?;
    let t = transform(h, p.stage, p.finest_level - p.top_level, p.normalized)?;
    let v = t.inverse(&p)?;
    save_volume(&a.out, &v)?;
    s.add("voxels", v.values().len()).add("stage", p.stage).add("out", a.out.display());
    Ok(0)
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Kind {
    Scaling,
    Wavelet,
    DualScaling,
    DualWavelet,
}

impl From<Kind> for BasisKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Scaling => BasisKind::Scaling,
            Kind::Wavelet => BasisKind::Wavelet,
            Kind::DualScaling => BasisKind::DualScaling,
            Kind::DualWavelet => BasisKind::DualWavelet,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub hier: HierarchyArgs,
    #[arg(long, default_value = "ai")]
    pub stage: Stage,
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Hierarchy level j of the function.
    #[arg(long)]
    pub level: usize,
    /// Position within K(j) for scaling functions, M(j) for wavelets.
    #[arg(long)]
    pub index: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synthesize(a: &SynthesizeArgs, s: &mut Summary) -> Result<u8> {
    let t = transform(a.hier.load()?, a.stage, a.hier.levels, a.normalize)?;
    let v = t.synthesize_basis_function(a.level, a.kind.into(), a.index)?;
    save_volume(&a.out, &v)?;
    let support = v.values().iter().filter(|x| **x != 0.0).count();
    s.add("support", support).add("norm", v.norm()).add("out", a.out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub mask: PathBuf,
    /// Noisy input (VXL1, f64 payload).
    #[arg(long)]
    pub data: PathBuf,
    /// Noise-free reference; enables SNR reporting.
    #[arg(long)]
    pub clean: Option<PathBuf>,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: f64,
    /// Hard threshold on details, in units of sigma.
    #[arg(long, default_value_t = 3.0)]
    pub tau_factor: f64,
    /// Hierarchies to average; realization i is seeded seed + i.
    #[arg(long, default_value_t = 1)]
    pub realizations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 3)]
    pub max_merge: usize,
    #[arg(long, default_value = "haar")]
    pub stage: Stage,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of single and running-average SNR per realization. Needs --clean.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

pub fn denoise(a: &DenoiseArgs, s: &mut Summary) -> Result<u8> {
    if a.trace.is_some() && a.clean.is_none() {
        return Err(Error::Argument("--trace needs --clean".into()).into());
    }
    existing(&a.data)?;
    let domain = mask(&a.mask)?;
    let noisy = load_volume_on(&a.data, domain.clone())?;
    let clean = match &a.clean {
        Some(p) => Some(load_volume_on(existing(p)?, domain.clone())?),
        None => None,
    };
    let cfg = DenoiseConfig {
        stage: a.stage,
        levels: a.levels,
        max_merge: a.max_merge,
        tau_factor: a.tau_factor,
    };
    let r = denoise_averaged(&noisy, clean.as_ref(), a.sigma, a.realizations, a.seed, &cfg)?;
    save_volume(&a.out, &r.average)?;
    if let Some(path) = &a.trace {
        let mut csv = String::from("realization,single_snr_db,average_snr_db\n");
        for (i, (single, avg)) in r.single_snr.iter().zip(&r.cumulative_snr).enumerate() {
            writeln!(csv, "{},{single},{avg}", i + 1)?;
        }
        write_text(path, &csv)?;
    }
    s.add("realizations", a.realizations).add("threshold", a.tau_factor * a.sigma);
    if let Some(c) = &clean {
        s.add("input_snr_db", format!("{:.4}", snr_db(c, &noisy)))
            .add("output_snr_db", format!("{:.4}", snr_db(c, &r.average)));
    }
    s.add("out", a.out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub hier: HierarchyArgs,
    #[arg(long, default_value = "ai")]
    pub stage: Stage,
    /// Report CSV; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Exit 1 when any identity misses the tolerance.
pub fn verify(a: &VerifyArgs, s: &mut Summary) -> Result<u8> {
    let t = transform(a.hier.load()?, a.stage, a.hier.levels, false)?;
    let reports = verify_transform(&t)?;
    let mut csv = format!("{REPORT_CSV_HEADER}\n");
    for r in &reports {
        csv.push_str(&r.csv_rows());
    }
    match &a.report {
        Some(p) => write_text(p, &csv)?,
        None => print!("{csv}"),
    }
    let worst = reports.iter().fold(0.0f64, |m, r| m.max(r.max_deviation()));
    let ok = reports.iter().all(|r| r.passes());
    s.add("levels", reports.len())
        .add("stage", a.stage)
        .add("max_deviation", format!("{worst:e}"))
        .add("tolerance", format!("{BIORTHOGONALITY_TOLERANCE:e}"))
        .add("passed", ok);
    if !ok {
        eprintln!("biorthogonality deviation {worst:e} exceeds {BIORTHOGONALITY_TOLERANCE:e}");
    }
    Ok(if ok { 0 } else { 1 })
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TailArg {
    TwoSided,
    Upper,
}

impl From<TailArg> for Tail {
    fn from(t: TailArg) -> Self {
        match t {
            TailArg::TwoSided => Tail::TwoSided,
            TailArg::Upper => Tail::Upper,
        }
    }
}

#[derive(Args, Debug)]
pub struct WspmArgs {
    /// 4D series (VXL1, f64 payload, one frame per sample).
    #[arg(long)]
    pub data: PathBuf,
    /// Design matrix CSV, one row per frame.
    #[arg(long)]
    pub design: PathBuf,
    /// Contrast weights, one per design column.
    #[arg(long)]
    pub contrast: PathBuf,
    #[command(flatten)]
    pub hier: HierarchyArgs,
    /// Significance level; sets both thresholds.
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    #[arg(long, default_value = "haar")]
    pub stage: Stage,
    #[arg(long, value_enum, default_value = "two-sided")]
    pub tail: TailArg,
    /// Average the statistic over hierarchies seeded seed + i.
    #[arg(long, default_value_t = 1)]
    pub realizations: usize,
    /// Activation map: 1 at detected voxels, 0 elsewhere.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional map of the normalized reconstruction.
    #[arg(long)]
    pub statistic: Option<PathBuf>,
}

pub fn wspm(a: &WspmArgs, s: &mut Summary) -> Result<u8> {
    existing(&a.data)?;
    let params = compute_thresholds(a.alpha)?;
    let design = DesignMatrix::from_csv(&read_text(&a.design)?).context("reading design")?;
    let contrast = Contrast::from_csv(&read_text(&a.contrast)?).context("reading contrast")?;
    if a.realizations < 1 {
        return Err(Error::Argument("--realizations must be at least 1".into()).into());
    }
    if a.realizations > 1 && a.hier.hierarchy.is_some() {
        return Err(Error::Argument("--realizations needs freshly built hierarchies, not --hierarchy".into()).into());
    }
    let first = a.hier.load()?;
    let domain = first.domain().clone();
    let frames = load_series_on(&a.data, &domain).with_context(|| format!("loading {}", a.data.display()))?;
    let mut bases = vec![transform(first, a.stage, a.hier.levels, true)?];
    for i in 1..a.realizations {
        let h = build_hierarchy(domain.clone(), a.hier.levels, a.hier.seed.wrapping_add(i as u64), a.hier.max_merge)?;
        bases.push(transform(Arc::new(h), a.stage, a.hier.levels, true)?);
    }
    let map = if bases.len() == 1 {
        let engine = WspmEngine::new(&bases[0], design, contrast)?;
        engine.detect_with(&engine.coefficient_stats(&frames)?, &params, a.tail.into())?
    } else {
        let refs: Vec<&dyn LinearBasis> = bases.iter().map(|b| b as &dyn LinearBasis).collect();
        wspm_detect_averaged(&frames, &design, &contrast, &refs, &params, a.tail.into())?
    };
    let detected = map.detected.iter().map(|d| if *d { 1.0 } else { 0.0 }).collect();
    save_volume(&a.out, &Volume::new(domain.clone(), detected)?)?;
    if let Some(p) = &a.statistic {
        save_volume(p, &Volume::new(domain.clone(), map.statistic.clone())?)?;
    }
    s.add("voxels", domain.len())
        .add("frames", frames.len())
        .add("detected", map.count())
        .add("alpha", a.alpha)
        .add("tau_w", format!("{:.6}", params.tau_w))
        .add("tau_s", format!("{:.6}", params.tau_s))
        .add("out", a.out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct DiffVolArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Largest allowed absolute difference.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

/// Exit 1 when grids differ or values drift beyond the tolerance.
pub fn diff_vol(a: &DiffVolArgs, s: &mut Summary) -> Result<u8> {
    let fa = VxlFile::read(existing(&a.a)?)?;
    let fb = VxlFile::read(existing(&a.b)?)?;
    if fa.dims != fb.dims {
        s.add("same_grid", false);
        eprintln!("grids differ: {:?} vs {:?}", fa.dims, fb.dims);
        return Ok(1);
    }
    let values = |p: &Payload| -> Vec<f64> {
        match p {
            Payload::Mask(m) => m.iter().map(|&b| b as f64).collect(),
            Payload::Values(v) => v.clone(),
        }
    };
    let worst = values(&fa.payload)
        .iter()
        .zip(values(&fb.payload))
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let ok = worst <= a.tolerance;
    s.add("same_grid", true)
        .add("max_abs_diff", format!("{worst:e}"))
        .add("tolerance", format!("{:e}", a.tolerance))
        .add("within", ok);
    if !ok {
        eprintln!("difference {worst:e} exceeds {:e}", a.tolerance);
    }
    Ok(if ok { 0 } else { 1 })
}

#[derive(Args, Debug)]
pub struct RingMaskArgs {
    /// Annuli as inner:outer pairs, e.g. 4:7,10:13.
    #[arg(long)]
    pub rings: String,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn ring_mask(a: &RingMaskArgs, s: &mut Summary) -> Result<u8> {
    let d = make_ring_domain(&parse_rings(&a.rings)?, a.grid)?;
    save_mask(&a.out, &d)?;
    s.add("voxels", d.len()).add("components", d.components().0).add("out", a.out.display());
    Ok(0)
}

fn square_side(domain: &adawave::DiscreteDomain) -> usize {
    let (_, hi) = domain.bounds();
    hi.x.max(hi.y) as usize + 1
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    /// Planar mask.
    #[arg(long)]
    pub mask: PathBuf,
    /// Phantom seed; noise uses seed + 1.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of added white noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn phantom(a: &PhantomArgs, s: &mut Summary) -> Result<u8> {
    let domain = mask(&a.mask)?;
    let image = smooth_phantom(&domain, square_side(&domain), a.seed, &PhantomConfig::default())?;
    let mut values = image.restrict(&domain)?;
    if a.noise > 0.0 {
        for (v, e) in values.iter_mut().zip(gaussian_noise(domain.len(), a.noise, a.seed.wrapping_add(1))) {
            *v += e;
        }
    }
    let v = Volume::new(domain, values)?;
    save_volume(&a.out, &v)?;
    s.add("voxels", v.values().len()).add("norm", format!("{:.6}", v.norm())).add("out", a.out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Planar mask.
    #[arg(long)]
    pub mask: PathBuf,
    /// Activation seed; noise uses seed + 1.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    /// Length of each on and off block.
    #[arg(long, default_value_t = 5)]
    pub block: usize,
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
    /// Noise at column x is ramp_constant / (x + 1).
    #[arg(long, default_value_t = 16.0)]
    pub ramp_constant: f64,
    /// 4D series output.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub design_out: PathBuf,
    #[arg(long)]
    pub contrast_out: PathBuf,
    /// Ground truth: 1 at active voxels.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

pub fn simulate(a: &SimulateArgs, s: &mut Summary) -> Result<u8> {
    let domain = mask(&a.mask)?;
    let protocol = RocProtocol {
        frames: a.frames,
        block: a.block,
        peak: a.peak,
        ramp_constant: a.ramp_constant,
        seed: a.seed,
        ..RocProtocol::default()
    };
    let (design, contrast) = protocol.design()?;
    let run = protocol.simulate(&domain, square_side(&domain), 0)?;
    save_series(&a.out, &domain, &run.domain_frames(&domain))?;
    write_text(&a.design_out, &design.to_csv())?;
    let weights: Vec<String> = contrast.values().iter().map(f64::to_string).collect();
    write_text(&a.contrast_out, &format!("{}\n", weights.join(",")))?;
    if let Some(p) = &a.truth_out {
        let truth = run.truth.iter().map(|t| if *t { 1.0 } else { 0.0 }).collect();
        save_volume(p, &Volume::new(domain.clone(), truth)?)?;
    }
    s.add("voxels", domain.len())
        .add("frames", a.frames)
        .add("active", run.truth.iter().filter(|t| **t).count())
        .add("out", a.out.display());
    Ok(0)
}
