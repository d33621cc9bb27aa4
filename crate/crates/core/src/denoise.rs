//! Thresholding, approximation and denoising experiments.

use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::{DiscreteDomain, Volume};
use crate::error::{argument, structural, Result};
use crate::hierarchy::build_hierarchy;
use crate::lifting::{LiftingTransform, TransformOptions};
use crate::linear::LinearBasis;
use crate::phantom::{gaussian_noise, SquareImage};
use crate::pyramid::{CoefficientPyramid, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdScope {
    /// Approximation coefficients always survive.
    Details,
    All,
}

/// Hard threshold: a coefficient survives when `|c| > tau`. A zero
/// threshold keeps everything.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdRule {
    tau: f64,
    scope: ThresholdScope,
}

impl ThresholdRule {
    pub fn new(tau: f64, scope: ThresholdScope) -> Result<Self> {
        if !(tau >= 0.0) {
            return argument(format!("threshold must be non-negative, got {tau}"));
        }
        Ok(Self { tau, scope })
    }

    pub fn details(tau: f64) -> Result<Self> {
        Self::new(tau, ThresholdScope::Details)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn scope(&self) -> ThresholdScope {
        self.scope
    }

    fn keeps(&self, c: f64) -> bool {
        self.tau == 0.0 || c.abs() > self.tau
    }
}

/// Zeroes small details. Returns the thresholded pyramid and the flattened
/// positions of the surviving details.
pub fn threshold_pyramid(p: &CoefficientPyramid, rule: &ThresholdRule) -> (CoefficientPyramid, Vec<usize>) {
    let mut out = p.clone();
    let mut survivors = Vec::new();
    if rule.scope == ThresholdScope::All {
        for a in &mut out.approx {
            if !rule.keeps(*a) {
                *a = 0.0;
            }
        }
    }
    let mut flat = p.approx.len();
    for detail in &mut out.details {
        for g in detail.iter_mut() {
            if rule.keeps(*g) {
                survivors.push(flat);
            } else {
                *g = 0.0;
            }
            flat += 1;
        }
    }
    (out, survivors)
}

/// Thresholds a flat coefficient vector of `basis`. The mask marks every
/// coefficient kept, approximation included.
pub fn threshold_coefficients(basis: &dyn LinearBasis, coefficients: &[f64], rule: &ThresholdRule) -> (Vec<f64>, Vec<bool>) {
    let mask: Vec<bool> = coefficients
        .iter()
        .enumerate()
        .map(|(i, &c)| (rule.scope == ThresholdScope::Details && !basis.is_detail(i)) || rule.keeps(c))
        .collect();
    let kept = coefficients
        .iter()
        .zip(&mask)
        .map(|(&c, &m)| if m { c } else { 0.0 })
        .collect();
    (kept, mask)
}

/// `L²(μ)` norm over the domain voxels of a sample-space vector.
pub fn domain_norm(basis: &dyn LinearBasis, samples: &[f64]) -> f64 {
    let domain = basis.domain();
    basis
        .domain_samples()
        .iter()
        .enumerate()
        .map(|(n, &s)| samples[s] * samples[s] * domain.measure(n))
        .sum::<f64>()
        .sqrt()
}

fn domain_distance(basis: &dyn LinearBasis, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    domain_norm(basis, &diff)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub tau: f64,
    pub relative_error: f64,
    /// Number of surviving detail coefficients.
    pub survivors: usize,
}

/// Relative approximation error `‖f − f_approx‖ / ‖f‖` over the domain as
/// the detail threshold decreases through `taus`.
pub fn approximation_curve(basis: &dyn LinearBasis, signal: &[f64], taus: &[f64]) -> Result<Vec<CurvePoint>> {
    if signal.len() != basis.samples() {
        return structural(format!("{} samples for a basis on {}", signal.len(), basis.samples()));
    }
    if taus.windows(2).any(|w| w[1] > w[0]) {
        return argument("threshold grid must be sorted in descending order");
    }
    let norm = domain_norm(basis, signal);
    if norm == 0.0 {
        return argument("cannot compute a relative error for a zero signal");
    }
    let coefficients = basis.analyze(signal)?;
    taus.par_iter()
        .map(|&tau| {
            let rule = ThresholdRule::details(tau)?;
            let (kept, mask) = threshold_coefficients(basis, &coefficients, &rule);
            let approx = basis.synthesize(&kept)?;
            let survivors = mask.iter().enumerate().filter(|(i, m)| **m && basis.is_detail(*i)).count();
            Ok(CurvePoint {
                tau,
                relative_error: domain_distance(basis, signal, &approx) / norm,
                survivors,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseTransfer {
    /// Monte Carlo mean of `‖n_rec‖` over the domain.
    pub mean_norm: f64,
    /// Monte Carlo mean of `‖n_rec‖²`.
    pub mean_energy: f64,
    pub realizations: usize,
}

/// Standard Gaussian noise realizations over the sample space, analyzed once
/// and reused for every survivor set.
pub struct NoiseProbe<'a> {
    basis: &'a dyn LinearBasis,
    coefficients: Vec<Vec<f64>>,
}

impl<'a> NoiseProbe<'a> {
    /// Realization `i` uses seed `seed + i`.
    pub fn new(basis: &'a dyn LinearBasis, realizations: usize, seed: u64) -> Result<Self> {
        if realizations < 1 {
            return argument("noise probe needs at least one realization");
        }
        let coefficients = (0..realizations)
            .into_par_iter()
            .map(|i| basis.analyze(&gaussian_noise(basis.samples(), 1.0, seed.wrapping_add(i as u64))))
            .collect::<Result<_>>()?;
        Ok(Self { basis, coefficients })
    }

    pub fn transfer(&self, mask: &[bool]) -> Result<NoiseTransfer> {
        if mask.len() != self.basis.coefficients() {
            return structural(format!(
                "survivor mask has {} entries, basis has {} coefficients",
                mask.len(),
                self.basis.coefficients()
            ));
        }
        let norms: Vec<f64> = self
            .coefficients
            .par_iter()
            .map(|c| {
                let kept: Vec<f64> = c.iter().zip(mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
                Ok(domain_norm(self.basis, &self.basis.synthesize(&kept)?))
            })
            .collect::<Result<_>>()?;
        let r = norms.len() as f64;
        Ok(NoiseTransfer {
            mean_norm: norms.iter().sum::<f64>() / r,
            mean_energy: norms.iter().map(|n| n * n).sum::<f64>() / r,
            realizations: norms.len(),
        })
    }
}

/// Expected norm of standard Gaussian noise reconstructed from the
/// coefficients marked in `mask`.
pub fn noise_transfer(basis: &dyn LinearBasis, mask: &[bool], realizations: usize, seed: u64) -> Result<NoiseTransfer> {
    NoiseProbe::new(basis, realizations, seed)?.transfer(mask)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsityPoint {
    pub tau: f64,
    pub relative_error: f64,
    pub noise_norm: f64,
    pub survivors: usize,
}

/// Approximation error against reconstructed noise norm along a threshold
/// sweep, the survivor set of each step taken from the clean signal.
pub fn sparsity_curve(basis: &dyn LinearBasis, signal: &[f64], taus: &[f64], probe: &NoiseProbe<'_>) -> Result<Vec<SparsityPoint>> {
    let curve = approximation_curve(basis, signal, taus)?;
    let coefficients = basis.analyze(signal)?;
    curve
        .iter()
        .map(|p| {
            let (_, mask) = threshold_coefficients(basis, &coefficients, &ThresholdRule::details(p.tau)?);
            Ok(SparsityPoint {
                tau: p.tau,
                relative_error: p.relative_error,
                noise_norm: probe.transfer(&mask)?.mean_norm,
                survivors: p.survivors,
            })
        })
        .collect()
}

/// Error of a sparsity curve at a given noise norm, interpolating linearly
/// between the two bracketing points. `None` outside the curve's range.
pub fn error_at_noise(curve: &[SparsityPoint], noise: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.noise_norm, p.relative_error)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if noise < x0 || noise > x1 {
            return None;
        }
        if x1 == x0 {
            return Some(y0.min(y1));
        }
        Some(y0 + (y1 - y0) * (noise - x0) / (x1 - x0))
    })
}

/// `10·log10(‖f‖² / ‖f − f̂‖²)` in `L²(μ)` over the domain; infinite for an
/// exact estimate.
pub fn snr_db(clean: &Volume, estimate: &Volume) -> f64 {
    let err = clean.distance(estimate);
    if err == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (clean.norm().powi(2) / (err * err)).log10()
}

/// Noise level giving the requested input SNR for `clean` over its domain.
pub fn sigma_for_snr(clean: &Volume, snr_db: f64) -> f64 {
    let domain = clean.domain();
    let energy = clean.norm().powi(2);
    (energy / domain.total_measure() / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Settings shared by every denoising realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiseConfig {
    pub stage: Stage,
    pub levels: usize,
    pub max_merge: usize,
    /// Hard threshold in units of the noise standard deviation.
    pub tau_factor: f64,
}

/// Denoises with a single hierarchy realization.
pub fn denoise_once(noisy: &Volume, sigma: f64, seed: u64, cfg: &DenoiseConfig) -> Result<Volume> {
    let h = Arc::new(build_hierarchy(noisy.domain().clone(), cfg.levels, seed, cfg.max_merge)?);
    let t = LiftingTransform::new(h, TransformOptions::new(cfg.stage, cfg.levels).normalized())?;
    let rule = ThresholdRule::details(cfg.tau_factor * sigma)?;
    let (kept, _) = threshold_pyramid(&t.forward(noisy)?, &rule);
    t.inverse(&kept)
}

#[derive(Clone, Debug)]
pub struct AveragingResult {
    pub average: Volume,
    /// SNR of the running average after `1, 2, …, R` realizations.
    pub cumulative_snr: Vec<f64>,
    /// SNR of each realization on its own.
    pub single_snr: Vec<f64>,
}

impl AveragingResult {
    pub fn mean_single_snr(&self) -> f64 {
        self.single_snr.iter().sum::<f64>() / self.single_snr.len() as f64
    }
}

/// Averages denoised outputs over `realizations` hierarchies seeded
/// `base_seed + i`. SNR traces are computed against `clean` when given.
pub fn denoise_averaged(
    noisy: &Volume,
    clean: Option<&Volume>,
    sigma: f64,
    realizations: usize,
    base_seed: u64,
    cfg: &DenoiseConfig,
) -> Result<AveragingResult> {
    if realizations < 1 {
        return argument("at least one realization is required");
    }
    if !(sigma >= 0.0) {
        return argument(format!("noise level must be non-negative, got {sigma}"));
    }
    if let Some(c) = clean {
        if c.domain().voxels() != noisy.domain().voxels() {
            return structural("clean reference lives on a different domain");
        }
    }
    let outputs: Vec<Volume> = (0..realizations)
        .into_par_iter()
        .map(|i| denoise_once(noisy, sigma, base_seed.wrapping_add(i as u64), cfg))
        .collect::<Result<_>>()?;
    let n = noisy.domain().len();
    let mut sum = vec![0.0; n];
    let mut cumulative_snr = Vec::new();
    let mut single_snr = Vec::new();
    for (i, out) in outputs.iter().enumerate() {
        for (s, v) in sum.iter_mut().zip(out.values()) {
            *s += v;
        }
        if let Some(c) = clean {
            let avg = Volume::new(noisy.domain().clone(), sum.iter().map(|s| s / (i + 1) as f64).collect())?;
            cumulative_snr.push(snr_db(c, &avg));
            single_snr.push(snr_db(c, out));
        }
    }
    let average = Volume::new(noisy.domain().clone(), sum.iter().map(|s| s / realizations as f64).collect())?;
    Ok(AveragingResult {
        average,
        cumulative_snr,
        single_snr,
    })
}

/// Projections of `values` onto `V_top, W_top, …, W_{N-1}`, in that order.
pub fn project_subspaces(t: &LiftingTransform, values: &[f64]) -> Result<Vec<Vec<f64>>> {
    let p = t.forward_values(values)?;
    let levels = p.details.len();
    (0..=levels)
        .map(|s| {
            let mut q = p.zeros_like();
            if s == 0 {
                q.approx.clone_from(&p.approx);
            } else {
                q.details[s - 1].clone_from(&p.details[s - 1]);
            }
            t.inverse_values(&q)
        })
        .collect()
}

/// Subspace names matching [`project_subspaces`], with the coarsest level
/// numbered 0.
pub fn subspace_names(levels: usize) -> Vec<String> {
    std::iter::once("V0".to_string())
        .chain((0..levels).map(|j| format!("W{j}")))
        .collect()
}

/// Index motions of a square pixel grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridMotion {
    /// Rotation by `45° · k` about the grid center, nearest-neighbor sampled.
    Rotate45(i32),
    Shift(i32, i32),
}

impl GridMotion {
    /// For every target pixel, the source pixel it copies, if any.
    pub fn source_map(self, side: usize) -> Vec<Option<usize>> {
        let c = (side as f64 - 1.0) / 2.0;
        let inside = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < side && (y as usize) < side;
        (0..side * side)
            .map(|i| {
                let (x, y) = ((i % side) as i64, (i / side) as i64);
                let (sx, sy) = match self {
                    GridMotion::Shift(dx, dy) => (x - dx as i64, y - dy as i64),
                    GridMotion::Rotate45(k) => {
                        let a = -(k as f64) * std::f64::consts::FRAC_PI_4;
                        let (px, py) = (x as f64 - c, y as f64 - c);
                        let rx = a.cos() * px - a.sin() * py + c;
                        let ry = a.sin() * px + a.cos() * py + c;
                        (rx.round() as i64, ry.round() as i64)
                    }
                };
                inside(sx, sy).then(|| sy as usize * side + sx as usize)
            })
            .collect()
    }

    pub fn apply(self, side: usize, values: &[f64]) -> Vec<f64> {
        self.source_map(side)
            .into_iter()
            .map(|s| s.map_or(0.0, |i| values[i]))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InvarianceConfig {
    pub levels: usize,
    pub realizations: usize,
    pub base_seed: u64,
    pub stage: Stage,
    pub max_merge: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceInvariance {
    pub name: String,
    /// `‖P(Mf) − M(Pf)‖ / ‖f‖` with the first realization alone.
    pub single: f64,
    /// The same with both projections averaged over all realizations.
    pub averaged: f64,
    /// `M(P f)` and `P(M f)` for the averaged projections.
    pub moved_projection: Vec<f64>,
    pub projected_motion: Vec<f64>,
}

/// Measures how far single-level projection fails to commute with a grid
/// motion, for one hierarchy and for the average over many.
pub fn invariance_experiment(image: &SquareImage, motion: GridMotion, cfg: &InvarianceConfig) -> Result<Vec<SubspaceInvariance>> {
    if cfg.realizations < 1 {
        return argument("at least one realization is required");
    }
    let side = image.side;
    let domain = Arc::new(DiscreteDomain::rectangle(side, side)?);
    // Rectangle voxels are ordered by (y, x), matching the image layout.
    let f = image.values.clone();
    let moved = motion.apply(side, &f);
    let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return argument("invariance experiment needs a nonzero image");
    }
    let per_realization: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let h = Arc::new(build_hierarchy(
                domain.clone(),
                cfg.levels,
                cfg.base_seed.wrapping_add(r as u64),
                cfg.max_merge,
            )?);
            let t = LiftingTransform::new(h, TransformOptions::new(cfg.stage, cfg.levels))?;
            Ok((project_subspaces(&t, &f)?, project_subspaces(&t, &moved)?))
        })
        .collect::<Result<_>>()?;

    let spaces = cfg.levels + 1;
    let discrepancy = |plain: &[f64], of_moved: &[f64]| {
        let m = motion.apply(side, plain);
        m.iter().zip(of_moved).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm
    };
    let names = subspace_names(cfg.levels);
    let count = cfg.realizations as f64;
    (0..spaces)
        .map(|s| {
            let (p0, q0) = (&per_realization[0].0[s], &per_realization[0].1[s]);
            let mut avg_p = vec![0.0; f.len()];
            let mut avg_q = vec![0.0; f.len()];
            for (p, q) in &per_realization {
                for i in 0..f.len() {
                    avg_p[i] += p[s][i] / count;
                    avg_q[i] += q[s][i] / count;
                }
            }
            Ok(SubspaceInvariance {
                name: names[s].clone(),
                single: discrepancy(p0, q0),
                averaged: discrepancy(&avg_p, &avg_q),
                moved_projection: motion.apply(side, &avg_p),
                projected_motion: avg_q,
            })
        })
        .collect()
}
