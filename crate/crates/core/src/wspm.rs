//! Wavelet-domain statistical parametric mapping: per-coefficient GLM tests,
//! classical thresholded reconstruction, and two-threshold detection with
//! the Lambert-W threshold pair.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use rayon::prelude::*;

use crate::baseline::TensorHaar;
use crate::domain::DiscreteDomain;
use crate::error::{argument, structural, Error, Result};
use crate::glm::{Contrast, DesignMatrix, GlmFitter};
use crate::hierarchy::build_hierarchy;
use crate::lifting::{LiftingTransform, TransformOptions};
use crate::linear::LinearBasis;
use crate::phantom::{activation_phantom, gaussian_noise};
use crate::pyramid::Stage;

/// Inputs this close to `-1/e` are treated as the branch point.
const BRANCH_TOLERANCE: f64 = 1e-15;

/// The `-1` branch of the Lambert W function: the solution `w ≤ -1` of
/// `w·e^w = x` for `x ∈ [-1/e, 0)`.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if !x.is_finite() || x >= 0.0 || x < branch - BRANCH_TOLERANCE {
        return Err(Error::Domain(format!("W₋₁ is defined on [-1/e, 0), got {x}")));
    }
    if (x - branch).abs() <= BRANCH_TOLERANCE {
        return Ok(-1.0);
    }
    let mut w = if x < -0.25 {
        // Series about the branch point.
        let p = -(2.0 * (E * x + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-16 * w.abs() {
            break;
        }
    }
    Ok(w.min(-1.0))
}

/// Largest significance level for which the threshold pair exists.
pub fn max_alpha() -> f64 {
    (2.0 / (PI * E)).sqrt()
}

/// Which sign of effect counts as significant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Tail {
    #[default]
    TwoSided,
    /// Positive effects only.
    Upper,
}

impl Tail {
    fn passes(self, t: f64, tau: f64) -> bool {
        match self {
            Tail::TwoSided => t.abs() >= tau,
            Tail::Upper => t >= tau,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WspmParams {
    pub alpha: f64,
    /// Threshold on coefficient t values.
    pub tau_w: f64,
    /// Threshold on the spatial ratio; always `1 / tau_w`.
    pub tau_s: f64,
}

/// `τ_w = √(−W₋₁(−α²π/2))`, `τ_s = 1/τ_w`.
pub fn compute_thresholds(alpha: f64) -> Result<WspmParams> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return argument(format!("significance level must be in (0, 1), got {alpha}"));
    }
    let x = -alpha * alpha * PI / 2.0;
    let w = lambert_w_minus1(x).map_err(|_| {
        Error::Domain(format!("alpha {alpha} exceeds the admissible bound sqrt(2/(pi e)) = {:.6}", max_alpha()))
    })?;
    let tau_w = (-w).sqrt();
    Ok(WspmParams {
        alpha,
        tau_w,
        tau_s: 1.0 / tau_w,
    })
}

/// GLM results for every coefficient of a basis.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientStats {
    pub g: Vec<f64>,
    pub s2: Vec<f64>,
    pub t: Vec<f64>,
    pub dof: usize,
}

impl CoefficientStats {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Standard error of `g_k`: `√(s²_k / J)`.
    pub fn sigma(&self, k: usize) -> f64 {
        (self.s2[k] / self.dof as f64).sqrt()
    }

    pub fn survivors(&self, tau_w: f64, tail: Tail) -> Vec<bool> {
        self.t.iter().map(|&t| tail.passes(t, tau_w)).collect()
    }
}

/// `Σ_k w_k |ψ_k(n)|` at every domain voxel, stored per voxel so that the
/// sums are parallel and deterministic.
#[derive(Clone, Debug)]
pub struct AbsSynthesis {
    rows: Vec<Vec<(u32, f64)>>,
    coefficients: usize,
}

impl AbsSynthesis {
    pub fn new(basis: &dyn LinearBasis) -> Result<Self> {
        let n = basis.coefficients();
        let mut voxel_of = vec![usize::MAX; basis.samples()];
        for (v, &s) in basis.domain_samples().iter().enumerate() {
            voxel_of[s] = v;
        }
        let supports: Vec<Vec<(usize, f64)>> = (0..n).into_par_iter().map(|k| basis.support(k)).collect::<Result<_>>()?;
        let mut rows = vec![Vec::new(); basis.domain().len()];
        for (k, support) in supports.iter().enumerate() {
            for &(s, v) in support {
                let voxel = voxel_of[s];
                if voxel != usize::MAX {
                    rows[voxel].push((k as u32, v.abs()));
                }
            }
        }
        Ok(Self { rows, coefficients: n })
    }

    pub fn apply(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.coefficients {
            return structural(format!("{} weights for {} coefficients", weights.len(), self.coefficients));
        }
        Ok(self
            .rows
            .par_iter()
            .map(|row| row.iter().map(|&(k, a)| weights[k as usize] * a).sum())
            .collect())
    }
}

/// Per-voxel detection outcome, in domain order.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMap {
    pub detected: Vec<bool>,
    /// Reconstruction divided by spread; zero where the spread vanishes.
    pub statistic: Vec<f64>,
    /// `Σ T(t_k) g_k ψ_k`.
    pub reconstruction: Vec<f64>,
    /// `Σ σ_k |ψ_k|` over all coefficients.
    pub spread: Vec<f64>,
}

impl ActivationMap {
    pub fn count(&self) -> usize {
        self.detected.iter().filter(|d| **d).count()
    }

    pub fn detected_voxels(&self) -> Vec<usize> {
        self.detected.iter().enumerate().filter(|(_, d)| **d).map(|(i, _)| i).collect()
    }
}

fn decide(reconstruction: Vec<f64>, spread: Vec<f64>, tau_s: f64, tail: Tail) -> ActivationMap {
    let statistic: Vec<f64> = reconstruction
        .iter()
        .zip(&spread)
        .map(|(&r, &s)| if s > 0.0 { r / s } else { 0.0 })
        .collect();
    let detected = reconstruction
        .iter()
        .zip(&spread)
        .zip(&statistic)
        .map(|((&r, &s), &z)| s > 0.0 && r != 0.0 && tail.passes(z, tau_s))
        .collect();
    ActivationMap {
        detected,
        statistic,
        reconstruction,
        spread,
    }
}

/// GLM fitting and detection on top of one basis.
pub struct WspmEngine<'a> {
    basis: &'a dyn LinearBasis,
    fitter: GlmFitter,
    abs: AbsSynthesis,
}

impl<'a> WspmEngine<'a> {
    pub fn new(basis: &'a dyn LinearBasis, design: DesignMatrix, contrast: Contrast) -> Result<Self> {
        let fitter = GlmFitter::new(design, contrast)?;
        let abs = AbsSynthesis::new(basis)?;
        Ok(Self { basis, fitter, abs })
    }

    pub fn basis(&self) -> &dyn LinearBasis {
        self.basis
    }

    pub fn fitter(&self) -> &GlmFitter {
        &self.fitter
    }

    /// Fits every coefficient time series. `frames` are sample-space
    /// vectors, one per time point. Coefficients that are identically zero
    /// over time are reported with `g = s² = t = 0`.
    pub fn coefficient_stats_samples(&self, frames: &[Vec<f64>]) -> Result<CoefficientStats> {
        let n_t = self.fitter.design().samples();
        if frames.len() != n_t {
            return structural(format!("{} frames for a design with {n_t} rows", frames.len()));
        }
        let coefficients: Vec<Vec<f64>> = frames.par_iter().map(|f| self.basis.analyze(f)).collect::<Result<_>>()?;
        let fits: Vec<(f64, f64, f64)> = (0..self.basis.coefficients())
            .into_par_iter()
            .map(|k| {
                let y: Vec<f64> = coefficients.iter().map(|c| c[k]).collect();
                if y.iter().all(|v| *v == 0.0) {
                    return Ok((0.0, 0.0, 0.0));
                }
                let r = self.fitter.fit(&y)?;
                Ok((r.g, r.s2, r.t))
            })
            .collect::<Result<_>>()?;
        Ok(CoefficientStats {
            g: fits.iter().map(|f| f.0).collect(),
            s2: fits.iter().map(|f| f.1).collect(),
            t: fits.iter().map(|f| f.2).collect(),
            dof: self.fitter.dof(),
        })
    }

    /// As [`Self::coefficient_stats_samples`] with frames given on the domain.
    pub fn coefficient_stats(&self, frames: &[Vec<f64>]) -> Result<CoefficientStats> {
        let embedded: Vec<Vec<f64>> = frames.iter().map(|f| self.basis.embed(f)).collect::<Result<_>>()?;
        self.coefficient_stats_samples(&embedded)
    }

    fn check(&self, stats: &CoefficientStats) -> Result<()> {
        if stats.len() != self.basis.coefficients() {
            return structural(format!("statistics for {} coefficients, basis has {}", stats.len(), self.basis.coefficients()));
        }
        Ok(())
    }

    /// `r_n = Σ T(t_k) g_k ψ_k(n)` on the domain voxels.
    pub fn classical(&self, stats: &CoefficientStats, tau_w: f64, tail: Tail) -> Result<Vec<f64>> {
        self.check(stats)?;
        let kept: Vec<f64> = stats
            .t
            .iter()
            .zip(&stats.g)
            .map(|(&t, &g)| if tail.passes(t, tau_w) && g != 0.0 { g } else { 0.0 })
            .collect();
        Ok(self.basis.restrict(&self.basis.synthesize(&kept)?))
    }

    /// `Σ σ_k |ψ_k(n)|` on the domain voxels.
    pub fn spread(&self, stats: &CoefficientStats) -> Result<Vec<f64>> {
        self.check(stats)?;
        let sigma: Vec<f64> = (0..stats.len()).map(|k| stats.sigma(k)).collect();
        self.abs.apply(&sigma)
    }

    /// Voxels where `|r_n| / Σ σ_k |ψ_k(n)| ≥ τ_s`.
    pub fn detect(&self, stats: &CoefficientStats, tau_w: f64, tau_s: f64, tail: Tail) -> Result<ActivationMap> {
        let reconstruction = self.classical(stats, tau_w, tail)?;
        let spread = self.spread(stats)?;
        Ok(decide(reconstruction, spread, tau_s, tail))
    }

    pub fn detect_with(&self, stats: &CoefficientStats, params: &WspmParams, tail: Tail) -> Result<ActivationMap> {
        self.detect(stats, params.tau_w, params.tau_s, tail)
    }
}

/// Classical wavelet analysis with a two-sided test. `frames` are given on
/// the domain of `basis`.
pub fn classical_analysis(
    frames: &[Vec<f64>],
    design: &DesignMatrix,
    contrast: &Contrast,
    basis: &dyn LinearBasis,
    tau_w: f64,
) -> Result<Vec<f64>> {
    let engine = WspmEngine::new(basis, design.clone(), contrast.clone())?;
    engine.classical(&engine.coefficient_stats(frames)?, tau_w, Tail::TwoSided)
}

/// Two-threshold detection at significance `alpha`, two-sided.
pub fn wspm_detect(
    frames: &[Vec<f64>],
    design: &DesignMatrix,
    contrast: &Contrast,
    basis: &dyn LinearBasis,
    alpha: f64,
) -> Result<ActivationMap> {
    let params = compute_thresholds(alpha)?;
    let engine = WspmEngine::new(basis, design.clone(), contrast.clone())?;
    engine.detect_with(&engine.coefficient_stats(frames)?, &params, Tail::TwoSided)
}

/// Averages the detection statistic over several bases on the same domain
/// and thresholds the mean. Off the default path: a single basis is the
/// standard method.
pub fn wspm_detect_averaged(
    frames: &[Vec<f64>],
    design: &DesignMatrix,
    contrast: &Contrast,
    bases: &[&dyn LinearBasis],
    params: &WspmParams,
    tail: Tail,
) -> Result<ActivationMap> {
    if bases.is_empty() {
        return argument("at least one basis is required");
    }
    let maps: Vec<ActivationMap> = bases
        .par_iter()
        .map(|b| {
            let engine = WspmEngine::new(*b, design.clone(), contrast.clone())?;
            engine.detect_with(&engine.coefficient_stats(frames)?, params, tail)
        })
        .collect::<Result<_>>()?;
    let n = maps[0].detected.len();
    let count = maps.len() as f64;
    let mean = |f: fn(&ActivationMap) -> &Vec<f64>| -> Vec<f64> {
        (0..n).map(|i| maps.iter().map(|m| f(m)[i]).sum::<f64>() / count).collect()
    };
    let statistic = mean(|m| &m.statistic);
    let reconstruction = mean(|m| &m.reconstruction);
    let spread = mean(|m| &m.spread);
    let detected = statistic
        .iter()
        .zip(&reconstruction)
        .map(|(&z, &r)| r != 0.0 && z != 0.0 && tail.passes(z, params.tau_s))
        .collect();
    Ok(ActivationMap {
        detected,
        statistic,
        reconstruction,
        spread,
    })
}

/// Wavelet family compared in the simulations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Adapted,
    TensorHaar,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Adapted => "adapted",
            Family::TensorHaar => "tensor-haar",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adapted" => Ok(Family::Adapted),
            "tensor-haar" | "tensor" => Ok(Family::TensorHaar),
            _ => argument(format!("unknown wavelet family {s:?}")),
        }
    }
}

/// Synthetic block-design experiment on a planar domain. Noise decreases
/// across columns: at column `x` its standard deviation is
/// `ramp_constant / (x + 1)`, so that `σ·r` is constant with `r = x + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocProtocol {
    pub frames: usize,
    /// Length of each on and off block.
    pub block: usize,
    /// Peak activation amplitude.
    pub peak: f64,
    pub ramp_constant: f64,
    pub stage: Stage,
    pub max_merge: usize,
    pub seed: u64,
}

impl Default for RocProtocol {
    fn default() -> Self {
        Self {
            frames: 40,
            block: 5,
            peak: 1.0,
            ramp_constant: 16.0,
            stage: Stage::Haar,
            max_merge: 3,
            seed: 0,
        }
    }
}

/// One simulated data set.
#[derive(Clone, Debug)]
pub struct SimulatedRun {
    /// Side of the square sample grid.
    pub side: usize,
    /// Ground-truth active voxels, in domain order.
    pub truth: Vec<bool>,
    /// Frames over the whole square, index `y * side + x`.
    pub square_frames: Vec<Vec<f64>>,
}

impl SimulatedRun {
    /// Frames restricted to the domain voxels.
    pub fn domain_frames(&self, domain: &DiscreteDomain) -> Vec<Vec<f64>> {
        self.square_frames
            .iter()
            .map(|f| {
                domain
                    .voxels()
                    .iter()
                    .map(|v| f[v.y as usize * self.side + v.x as usize])
                    .collect()
            })
            .collect()
    }
}

impl RocProtocol {
    pub fn design(&self) -> Result<(DesignMatrix, Contrast)> {
        Ok((DesignMatrix::block_design(self.frames, self.block, self.block)?, Contrast::select(3, 2)?))
    }

    fn validate(&self) -> Result<()> {
        if self.block == 0 || self.frames < 2 * self.block {
            return argument("protocol needs at least one full on/off cycle");
        }
        if !(self.peak >= 0.0 && self.ramp_constant >= 0.0) {
            return argument("amplitude and noise constant must be non-negative");
        }
        Ok(())
    }

    /// Trial `trial` uses seed `seed + 2·trial` for the phantom and
    /// `seed + 2·trial + 1` for the noise.
    pub fn simulate(&self, domain: &DiscreteDomain, side: usize, trial: u64) -> Result<SimulatedRun> {
        self.validate()?;
        let (_, hi) = domain.bounds();
        if hi.x as usize >= side || hi.y as usize >= side {
            return argument(format!("domain does not fit a {side}x{side} square"));
        }
        let base = self.seed.wrapping_add(2 * trial);
        let amplitude = activation_phantom(domain, base, self.peak);
        let boxcar = crate::glm::box_regressor(self.frames, self.block, self.block);
        let noise = gaussian_noise(side * side * self.frames, 1.0, base.wrapping_add(1));
        let mut square_frames = vec![vec![0.0; side * side]; self.frames];
        for (t, frame) in square_frames.iter_mut().enumerate() {
            for (i, v) in frame.iter_mut().enumerate() {
                let sigma = self.ramp_constant / ((i % side) as f64 + 1.0);
                *v = sigma * noise[t * side * side + i];
            }
            for (n, vox) in domain.voxels().iter().enumerate() {
                frame[vox.y as usize * side + vox.x as usize] += amplitude[n] * boxcar[t];
            }
        }
        Ok(SimulatedRun {
            side,
            truth: amplitude.iter().map(|a| *a > 0.0).collect(),
            square_frames,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocPoint {
    pub family: Family,
    pub levels: usize,
    pub trial: usize,
    pub alpha: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub detected: usize,
}

pub const ROC_CSV_HEADER: &str = "family,levels,trial,alpha,sensitivity,specificity,detected";

impl RocPoint {
    /// Averaged points (trial `usize::MAX`) print `all` in the trial column.
    pub fn csv_row(&self) -> String {
        let trial = if self.trial == usize::MAX {
            "all".to_string()
        } else {
            self.trial.to_string()
        };
        format!(
            "{},{},{},{},{},{},{}",
            self.family.name(),
            self.levels,
            trial,
            self.alpha,
            self.sensitivity,
            self.specificity,
            self.detected
        )
    }
}

/// Sensitivity and specificity of a detection against the truth.
pub fn rates(detected: &[bool], truth: &[bool]) -> (f64, f64) {
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&d, &t) in detected.iter().zip(truth) {
        if t {
            pos += 1;
            tp += d as usize;
        } else {
            neg += 1;
            tn += !d as usize;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    (ratio(tp, pos), ratio(tn, neg))
}

/// Square side shared by both families for a planar domain and level count.
pub fn simulation_side(domain: &Arc<DiscreteDomain>, levels: usize) -> Result<usize> {
    Ok(TensorHaar::new(domain.clone(), levels)?.side())
}

/// Runs `trials` simulated experiments and scores every family, level count
/// and significance level on each. The adapted hierarchy of a trial is
/// seeded `seed + 2·trial`, shared across level counts through its
/// coarsest levels only by construction of the random process.
pub fn roc_sweep(
    domain: &Arc<DiscreteDomain>,
    protocol: &RocProtocol,
    families: &[Family],
    level_counts: &[usize],
    alphas: &[f64],
    trials: usize,
) -> Result<Vec<RocPoint>> {
    let params: Vec<WspmParams> = alphas.iter().map(|&a| compute_thresholds(a)).collect::<Result<_>>()?;
    let max_levels = level_counts.iter().copied().max().unwrap_or(1);
    let side = simulation_side(domain, max_levels)?;
    let (design, contrast) = protocol.design()?;
    let per_trial: Vec<Vec<RocPoint>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let run = protocol.simulate(domain, side, trial as u64)?;
            let domain_frames = run.domain_frames(domain);
            let mut points = Vec::new();
            for &family in families {
                for &levels in level_counts {
                    let adapted;
                    let tensor;
                    let (basis, frames): (&dyn LinearBasis, &[Vec<f64>]) = match family {
                        Family::Adapted => {
                            let seed = protocol.seed.wrapping_add(2 * trial as u64);
                            let h = Arc::new(build_hierarchy(domain.clone(), levels, seed, protocol.max_merge)?);
                            adapted = LiftingTransform::new(h, TransformOptions::new(protocol.stage, levels).normalized())?;
                            (&adapted, &domain_frames)
                        }
                        Family::TensorHaar => {
                            tensor = TensorHaar::with_side(domain.clone(), side, levels)?;
                            (&tensor, &run.square_frames)
                        }
                    };
                    let engine = WspmEngine::new(basis, design.clone(), contrast.clone())?;
                    let stats = engine.coefficient_stats_samples(frames)?;
                    for p in &params {
                        let map = engine.detect_with(&stats, p, Tail::TwoSided)?;
                        let (sensitivity, specificity) = rates(&map.detected, &run.truth);
                        points.push(RocPoint {
                            family,
                            levels,
                            trial,
                            alpha: p.alpha,
                            sensitivity,
                            specificity,
                            detected: map.count(),
                        });
                    }
                }
            }
            Ok(points)
        })
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// Averages sweep points over trials, keeping the input order of the first
/// trial.
pub fn mean_roc(points: &[RocPoint]) -> Vec<RocPoint> {
    let mut out: Vec<(RocPoint, usize)> = Vec::new();
    for p in points {
        match out
            .iter_mut()
            .find(|(q, _)| q.family == p.family && q.levels == p.levels && q.alpha == p.alpha)
        {
            Some((q, n)) => {
                q.sensitivity += p.sensitivity;
                q.specificity += p.specificity;
                q.detected += p.detected;
                *n += 1;
            }
            None => out.push((p.clone(), 1)),
        }
    }
    out.into_iter()
        .map(|(mut q, n)| {
            q.sensitivity /= n as f64;
            q.specificity /= n as f64;
            q.detected /= n;
            q.trial = usize::MAX;
            q
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ring_domain;
    use proptest::prelude::*;

    fn bisect(x: f64) -> f64 {
        let (mut lo, mut hi) = (-50.0f64, -1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            // w e^w falls from 0⁻ to -1/e as w runs from -∞ to -1.
            if mid * mid.exp() > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn lambert_known_points() {
        assert_eq!(lambert_w_minus1(-1.0 / E).unwrap(), -1.0);
        assert!((lambert_w_minus1(-2.0 * (-2.0f64).exp()).unwrap() + 2.0).abs() < 1e-12);
        let x = -0.05f64.powi(2) * PI / 2.0;
        let w = lambert_w_minus1(x).unwrap();
        assert!((w - bisect(x)).abs() < 1e-9);
        assert!((w + 7.563).abs() < 1e-3);
        for bad in [0.0, 0.1, -0.5, f64::NAN] {
            assert!(matches!(lambert_w_minus1(bad), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn thresholds() {
        let p = compute_thresholds(0.05).unwrap();
        assert!((p.tau_w - 2.750).abs() < 1e-3);
        assert!((p.tau_s - 0.3636).abs() < 1e-4);
        let b = compute_thresholds(max_alpha()).unwrap();
        assert_eq!((b.tau_w, b.tau_s), (1.0, 1.0));
        let err = compute_thresholds(0.9).unwrap_err().to_string();
        assert!(err.contains("0.4839"), "{err}");
    }

    proptest! {
        #[test]
        fn lambert_residual(u in 1e-12f64..1.0) {
            let x = -u / E;
            let w = lambert_w_minus1(x).unwrap();
            prop_assert!(w <= -1.0);
            prop_assert!((w * w.exp() - x).abs() <= 1e-12);
        }

        #[test]
        fn threshold_product(alpha in 1e-6f64..0.48) {
            let p = compute_thresholds(alpha).unwrap();
            prop_assert!(p.tau_w >= 1.0);
            prop_assert!((p.tau_w * p.tau_s - 1.0).abs() < 1e-15);
        }
    }

    fn small_setup() -> (Arc<DiscreteDomain>, LiftingTransform) {
        let d = Arc::new(make_ring_domain(&[(1.5, 4.5)], 10).unwrap());
        let h = Arc::new(build_hierarchy(d.clone(), 2, 5, 3).unwrap());
        let t = LiftingTransform::new(h, TransformOptions::new(Stage::Haar, 2).normalized()).unwrap();
        (d, t)
    }

    fn noise_frames(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..n).map(|i| gaussian_noise(len, 1.0, seed + i as u64)).collect()
    }

    #[test]
    fn huge_threshold_reconstructs_nothing() {
        let (d, t) = small_setup();
        let design = DesignMatrix::block_design(20, 5, 5).unwrap();
        let c = Contrast::select(3, 2).unwrap();
        let r = classical_analysis(&noise_frames(20, d.len(), 1), &design, &c, &t, 1e9).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_wavelet_injection() {
        let (d, t) = small_setup();
        let design = DesignMatrix::block_design(30, 5, 5).unwrap();
        let c = Contrast::select(3, 2).unwrap();
        let boxcar = crate::glm::box_regressor(30, 5, 5);
        let k = t.coefficients() - 3;
        let mut unit = vec![0.0; t.coefficients()];
        unit[k] = 1.0;
        let psi = t.synthesize(&unit).unwrap();
        let jitter = 1e-6;
        let frames: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let n = gaussian_noise(d.len(), jitter, 100 + i as u64);
                psi.iter().zip(&n).map(|(p, e)| 20.0 * boxcar[i] * p + e).collect()
            })
            .collect();
        let engine = WspmEngine::new(&t, design, c).unwrap();
        let stats = engine.coefficient_stats(&frames).unwrap();
        // Block column is ±1, so the fitted effect is half the on-off step.
        assert!((stats.g[k] - 10.0).abs() < 1e-4);
        let r = engine.classical(&stats, 1000.0, Tail::TwoSided).unwrap();
        for (a, b) in r.iter().zip(&psi) {
            assert!((a - stats.g[k] * b).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_data_is_degenerate() {
        let (d, t) = small_setup();
        let design = DesignMatrix::block_design(20, 5, 5).unwrap();
        let c = Contrast::select(3, 2).unwrap();
        let signal: Vec<f64> = (0..d.len()).map(|i| 1.0 + i as f64 * 0.1).collect();
        let frames: Vec<Vec<f64>> = (0..20)
            .map(|r| signal.iter().map(|s| s * design.matrix()[(r, 2)]).collect())
            .collect();
        assert!(matches!(
            classical_analysis(&frames, &design, &c, &t, 2.0),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn zero_spatial_threshold_is_support_of_classical() {
        let (d, t) = small_setup();
        let design = DesignMatrix::block_design(20, 5, 5).unwrap();
        let c = Contrast::select(3, 2).unwrap();
        let engine = WspmEngine::new(&t, design, c).unwrap();
        let stats = engine.coefficient_stats(&noise_frames(20, d.len(), 9)).unwrap();
        let r = engine.classical(&stats, 1.0, Tail::TwoSided).unwrap();
        let map = engine.detect(&stats, 1.0, 0.0, Tail::TwoSided).unwrap();
        let support: Vec<bool> = r.iter().map(|v| *v != 0.0).collect();
        assert_eq!(map.detected, support);
        let branch = compute_thresholds(max_alpha()).unwrap();
        assert!(engine.detect_with(&stats, &branch, Tail::TwoSided).is_ok());
    }

    #[test]
    fn detection_is_scale_equivariant() {
        let (d, t) = small_setup();
        let design = DesignMatrix::block_design(20, 5, 5).unwrap();
        let c = Contrast::select(3, 2).unwrap();
        let engine = WspmEngine::new(&t, design, c).unwrap();
        let frames = noise_frames(20, d.len(), 3);
        let scaled: Vec<Vec<f64>> = frames.iter().map(|f| f.iter().map(|v| v * 7.5).collect()).collect();
        let a = engine.coefficient_stats(&frames).unwrap();
        let b = engine.coefficient_stats(&scaled).unwrap();
        let p = compute_thresholds(0.3).unwrap();
        assert_eq!(a.survivors(p.tau_w, Tail::TwoSided), b.survivors(p.tau_w, Tail::TwoSided));
        let ma = engine.detect_with(&a, &p, Tail::TwoSided).unwrap();
        let mb = engine.detect_with(&b, &p, Tail::TwoSided).unwrap();
        assert_eq!(ma.detected, mb.detected);
    }

    #[test]
    fn abs_synthesis_matches_dense() {
        let (_, t) = small_setup();
        let abs = AbsSynthesis::new(&t).unwrap();
        let w: Vec<f64> = (0..t.coefficients()).map(|k| 1.0 + k as f64 * 0.01).collect();
        let fast = abs.apply(&w).unwrap();
        for (n, v) in fast.iter().enumerate() {
            let slow: f64 = (0..t.coefficients())
                .map(|k| {
                    let s = t.support(k).unwrap();
                    w[k] * s.iter().find(|(i, _)| *i == n).map_or(0.0, |x| x.1.abs())
                })
                .sum();
            assert!((v - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn rates_count() {
        let (se, sp) = rates(&[true, false, true, false], &[true, true, false, false]);
        assert_eq!((se, sp), (0.5, 0.5));
    }

    #[test]
    fn tiny_alpha_detects_little() {
        let d = Arc::new(make_ring_domain(&[(3.0, 6.0), (8.0, 11.0)], 24).unwrap());
        let protocol = RocProtocol {
            frames: 20,
            ..RocProtocol::default()
        };
        let pts = roc_sweep(&d, &protocol, &[Family::Adapted, Family::TensorHaar], &[1, 2], &[1e-12, 0.2], 1).unwrap();
        assert_eq!(pts.len(), 8);
        for p in pts.iter().filter(|p| p.alpha == 1e-12) {
            assert!(p.sensitivity < 0.1 && p.specificity > 0.99, "{p:?}");
        }
    }
}
