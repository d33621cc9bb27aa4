//! Synthetic experiments. Each writes one CSV for external plotting.
//!
//! Seeds are split from the root `--seed` by adding a stream index; the
//! help text of every experiment lists its streams.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use adawave::baseline::TensorHaar;
use adawave::denoise::{
    denoise_averaged, invariance_experiment, sigma_for_snr, sparsity_curve, DenoiseConfig, GridMotion, InvarianceConfig,
    NoiseProbe,
};
use adawave::linear::LinearBasis;
use adawave::phantom::{gaussian_noise, smooth_phantom, PhantomConfig, PHANTOM_GRID, THIN_RINGS};
use adawave::wspm::{mean_roc, roc_sweep, simulation_side, Family, RocProtocol, ROC_CSV_HEADER};
use adawave::{build_hierarchy, make_ring_domain, DiscreteDomain, Error, LiftingTransform, Stage, TransformOptions, Volume};
use anyhow::Result;
use clap::{Args, Subcommand};
use rayon::prelude::*;

use crate::util::{mask, parse_rings, write_text, List, Summary};

/// Annuli used by the averaging experiment: wide enough for the
/// average-interpolating fits to pay off.
const WIDE_RINGS: [(f64, f64); 3] = [(4.0, 12.0), (15.0, 23.0), (26.0, 31.0)];

#[derive(Subcommand, Debug)]
pub enum Experiment {
    /// Detection rates of adapted and tensor Haar WSPM on simulated data.
    ///
    /// Trial t seeds its phantom with seed + 2t, its noise with seed + 2t + 1
    /// and its adapted hierarchy with seed + 2t.
    Roc(RocArgs),
    /// Approximation error against reconstructed noise along a threshold sweep.
    ///
    /// Trial t seeds its phantom with seed + 2t and its hierarchy with
    /// seed + 2t + 1; the noise probe uses seed.
    Sparsity(SparsityArgs),
    /// SNR of denoising averaged over random hierarchies.
    ///
    /// Trial t seeds its phantom with seed + t, its noise with
    /// seed + 1000 + t and hierarchy i with seed + 10000 (t + 1) + i.
    Averaging(AveragingArgs),
    /// How far subspace projection fails to commute with a grid motion.
    ///
    /// The phantom uses seed; hierarchy r uses seed + 1 + r.
    Invariance(InvarianceArgs),
}

#[derive(Args, Debug)]
pub struct DomainArgs {
    /// Planar mask; replaces --rings.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Annuli as inner:outer pairs, e.g. 4:7,10:13.
    #[arg(long)]
    pub rings: Option<String>,
    /// Side of the grid holding the rings.
    #[arg(long, default_value_t = PHANTOM_GRID)]
    pub grid: usize,
}

impl DomainArgs {
    fn load(&self, default_rings: &[(f64, f64)]) -> Result<Arc<DiscreteDomain>> {
        if let Some(p) = &self.mask {
            return mask(p);
        }
        let rings = match &self.rings {
            Some(r) => parse_rings(r)?,
            None => default_rings.to_vec(),
        };
        Ok(Arc::new(make_ring_domain(&rings, self.grid)?))
    }
}

pub fn run(e: &Experiment, s: &mut Summary) -> Result<u8> {
    match e {
        Experiment::Roc(a) => roc(a, s),
        Experiment::Sparsity(a) => sparsity(a, s),
        Experiment::Averaging(a) => averaging(a, s),
        Experiment::Invariance(a) => invariance(a, s),
    }
}

#[derive(Args, Debug)]
pub struct RocArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Level counts to compare.
    #[arg(long, default_value = "1,2,3")]
    pub levels: List<usize>,
    #[arg(long, default_value = "0.05,0.01,0.001")]
    pub alphas: List<f64>,
    #[arg(long, default_value = "adapted,tensor-haar")]
    pub families: List<Family>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "haar")]
    pub stage: Stage,
    #[arg(long, default_value_t = 3)]
    pub max_merge: usize,
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    #[arg(long, default_value_t = 5)]
    pub block: usize,
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
    /// Noise at column x is ramp_constant / (x + 1).
    #[arg(long, default_value_t = 16.0)]
    pub ramp_constant: f64,
    /// Write trial means instead of one row per trial.
    #[arg(long)]
    pub mean: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn roc(a: &RocArgs, s: &mut Summary) -> Result<u8> {
    let domain = a.domain.load(&THIN_RINGS)?;
    let protocol = RocProtocol {
        frames: a.frames,
        block: a.block,
        peak: a.peak,
        ramp_constant: a.ramp_constant,
        stage: a.stage,
        max_merge: a.max_merge,
        seed: a.seed,
    };
    let points = roc_sweep(&domain, &protocol, &a.families.0, &a.levels.0, &a.alphas.0, a.trials)?;
    let rows = if a.mean { mean_roc(&points) } else { points };
    let mut csv = format!("{ROC_CSV_HEADER}\n");
    for p in &rows {
        csv.push_str(&p.csv_row());
        csv.push('\n');
    }
    write_text(&a.out, &csv)?;
    s.add("voxels", domain.len()).add("trials", a.trials).add("rows", rows.len()).add("out", a.out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct SparsityArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 3)]
    pub max_merge: usize,
    #[arg(long, default_value = "haar")]
    pub stage: Stage,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Thresholds per curve, log-spaced down from the largest coefficient.
    #[arg(long, default_value_t = 80)]
    pub points: usize,
    /// Decades spanned by the threshold grid.
    #[arg(long, default_value_t = 5.0)]
    pub decades: f64,
    /// Noise realizations behind each reconstructed noise norm.
    #[arg(long, default_value_t = 20)]
    pub probes: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn sparsity(a: &SparsityArgs, s: &mut Summary) -> Result<u8> {
    if a.points < 2 || !(a.decades > 0.0) {
        return Err(Error::Argument("--points must be at least 2 and --decades positive".into()).into());
    }
    let domain = a.domain.load(&THIN_RINGS)?;
    let side = simulation_side(&domain, a.levels)?;
    let tensor = TensorHaar::with_side(domain.clone(), side, a.levels)?;
    let per_trial: Vec<String> = (0..a.trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<String> {
            let image = smooth_phantom(&domain, side, a.seed.wrapping_add(2 * trial), &PhantomConfig::default())?;
            let h = Arc::new(build_hierarchy(domain.clone(), a.levels, a.seed.wrapping_add(2 * trial + 1), a.max_merge)?);
            let adapted = LiftingTransform::new(h, TransformOptions::new(a.stage, a.levels).normalized())?;
            let cases: [(&str, &dyn LinearBasis, Vec<f64>); 2] = [
                ("adapted", &adapted, image.restrict(&domain)?),
                ("tensor-haar", &tensor, image.values.clone()),
            ];
            let mut out = String::new();
            for (name, basis, signal) in cases {
                let top = basis.analyze(&signal)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let taus: Vec<f64> = (0..a.points)
                    .map(|i| top * 10f64.powf(-a.decades * i as f64 / (a.points - 1) as f64))
                    .collect();
                let probe = NoiseProbe::new(basis, a.probes, a.seed)?;
                for p in sparsity_curve(basis, &signal, &taus, &probe)? {
                    writeln!(out, "{name},{trial},{},{},{},{}", p.tau, p.relative_error, p.noise_norm, p.survivors)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("family,trial,tau,relative_error,noise_norm,survivors\n");
    csv.push_str(&per_trial.concat());
    write_text(&a.out, &csv)?;
    s.add("voxels", domain.len())
        .add("trials", a.trials)
        .add("domain_norm", format!("{:.6}", domain.total_measure().sqrt()))
        .add("out", a.out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct AveragingArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Input SNR in dB; sets the noise level.
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 20)]
    pub realizations: usize,
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long, default_value_t = 3)]
    pub max_merge: usize,
    #[arg(long, default_value_t = 4.0)]
    pub tau_factor: f64,
    #[arg(long, default_value = "haar,ai")]
    pub stages: List<Stage>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn averaging(a: &AveragingArgs, s: &mut Summary) -> Result<u8> {
    if a.trials < 1 {
        return Err(Error::Argument("--trials must be at least 1".into()).into());
    }
    let domain = a.domain.load(&WIDE_RINGS)?;
    let side = simulation_side(&domain, 1)?;
    let mut csv = String::from("stage,trial,realizations,average_snr_db,single_snr_db\n");
    let mut finals = vec![0.0; a.stages.0.len()];
    for trial in 0..a.trials as u64 {
        let image = smooth_phantom(&domain, side, a.seed.wrapping_add(trial), &PhantomConfig::default())?;
        let clean = Volume::new(domain.clone(), image.restrict(&domain)?)?;
        let sigma = sigma_for_snr(&clean, a.snr);
        let noise = gaussian_noise(domain.len(), sigma, a.seed.wrapping_add(1000 + trial));
        let noisy = Volume::new(domain.clone(), clean.values().iter().zip(&noise).map(|(c, e)| c + e).collect())?;
        for (&stage, total) in a.stages.0.iter().zip(finals.iter_mut()) {
            let cfg = DenoiseConfig {
                stage,
                levels: a.levels,
                max_merge: a.max_merge,
                tau_factor: a.tau_factor,
            };
            let base = a.seed.wrapping_add(10_000 * (trial + 1));
            let r = denoise_averaged(&noisy, Some(&clean), sigma, a.realizations, base, &cfg)?;
            for (i, (avg, single)) in r.cumulative_snr.iter().zip(&r.single_snr).enumerate() {
                writeln!(csv, "{},{trial},{},{avg},{single}", stage.name(), i + 1)?;
            }
            *total += r.cumulative_snr.last().copied().unwrap_or(f64::NAN);
        }
    }
    write_text(&a.out, &csv)?;
    let means: Vec<String> = a
        .stages
        .0
        .iter()
        .zip(&finals)
        .map(|(stage, total)| format!("{}:{:.2}", stage.name(), total / a.trials as f64))
        .collect();
    s.add("voxels", domain.len())
        .add("trials", a.trials)
        .add("input_snr_db", a.snr)
        .add("mean_final_snr_db", means.join(","))
        .add("out", a.out.display());
    Ok(0)
}

#[derive(Args, Debug)]
pub struct InvarianceArgs {
    /// Side of the square test image.
    #[arg(long, default_value_t = PHANTOM_GRID)]
    pub side: usize,
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    #[arg(long, default_value_t = 100)]
    pub realizations: usize,
    /// rotate45, rotate45:K for K eighth turns, or shift:DX,DY.
    #[arg(long, default_value = "rotate45")]
    pub motion: String,
    #[arg(long, default_value = "haar")]
    pub stage: Stage,
    #[arg(long, default_value_t = 3)]
    pub max_merge: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_motion(s: &str) -> Result<GridMotion> {
    let bad = || Error::Argument(format!("motion {s:?} is not rotate45[:K] or shift:DX,DY"));
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "rotate45" if rest.is_empty() => Ok(GridMotion::Rotate45(1)),
        "rotate45" => Ok(GridMotion::Rotate45(rest.trim().parse().map_err(|_| bad())?)),
        "shift" => {
            let (dx, dy) = rest.split_once(',').ok_or_else(bad)?;
            Ok(GridMotion::Shift(dx.trim().parse().map_err(|_| bad())?, dy.trim().parse().map_err(|_| bad())?))
        }
        _ => Err(bad().into()),
    }
}

fn invariance(a: &InvarianceArgs, s: &mut Summary) -> Result<u8> {
    let motion = parse_motion(&a.motion)?;
    let square = DiscreteDomain::rectangle(a.side, a.side)?;
    let image = smooth_phantom(&square, a.side, a.seed, &PhantomConfig::default())?;
    let cfg = InvarianceConfig {
        levels: a.levels,
        realizations: a.realizations,
        base_seed: a.seed.wrapping_add(1),
        stage: a.stage,
        max_merge: a.max_merge,
    };
    let rows = invariance_experiment(&image, motion, &cfg)?;
    let mut csv = String::from("subspace,single,averaged\n");
    for r in &rows {
        writeln!(csv, "{},{},{}", r.name, r.single, r.averaged)?;
    }
    write_text(&a.out, &csv)?;
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.averaged / r.single));
    s.add("subspaces", rows.len())
        .add("realizations", a.realizations)
        .add("worst_ratio", format!("{worst:.4}"))
        .add("out", a.out.display());
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motions() {
        assert_eq!(parse_motion("rotate45").unwrap(), GridMotion::Rotate45(1));
        assert_eq!(parse_motion("rotate45:2").unwrap(), GridMotion::Rotate45(2));
        assert_eq!(parse_motion("shift:3,-1").unwrap(), GridMotion::Shift(3, -1));
        assert!(parse_motion("spin").is_err());
        assert!(parse_motion("shift:3").is_err());
    }

    #[test]
    fn default_domains() {
        let d = DomainArgs {
            mask: None,
            rings: None,
            grid: 64,
        };
        assert_eq!(d.load(&THIN_RINGS).unwrap().components().0, 5);
        let d = DomainArgs {
            rings: Some("2:5".into()),
            ..d
        };
        assert_eq!(d.load(&THIN_RINGS).unwrap().components().0, 1);
    }
}
