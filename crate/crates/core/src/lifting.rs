//! Three-step lifting transform on a [`GridHierarchy`].
//!
//! One analysis step maps `λ_{j+1}` (over `K(j+1)`) to `(λ_j, γ_j)`:
//!
//! ```text
//! λ⁰ = λ_{j+1}|K(j)          γ⁰ = λ_{j+1}|M(j)
//! λ¹ = λ⁰                    γ¹ = γ⁰ − P1 λ⁰
//! λ² = λ¹ + U γ¹             γ² = γ¹
//! λ³ = λ²                    γ³ = γ² − P2 λ²
//! ```
//!
//! `P1` copies the value of the surviving sibling, `U` turns the survivor's
//! value into the measure-weighted group mean, and `P2` predicts the detail
//! from an affine least-squares fit to the neighboring group means. Synthesis
//! runs the steps backwards with opposite signs, so every stage inverts
//! exactly.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::domain::{Dimension, Volume};
use crate::error::{argument, structural, Result};
use crate::hierarchy::{GridHierarchy, LevelSplit};
use crate::pyramid::{CoefficientPyramid, Stage};

/// Relative eigenvalue cutoff for the affine fits.
pub const FIT_RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransformOptions {
    pub stage: Stage,
    /// Scale coefficients so that they refer to unit-norm basis functions.
    pub normalize: bool,
    /// Number of analysis levels; the transform stops at `K(N - levels)`.
    pub levels: usize,
}

impl TransformOptions {
    pub fn new(stage: Stage, levels: usize) -> Self {
        Self {
            stage,
            normalize: false,
            levels,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Scaling,
    Wavelet,
    DualScaling,
    DualWavelet,
}

/// Average-interpolating prediction operator for one level.
#[derive(Clone, Debug, Default)]
pub struct AveragePrediction {
    /// Row per detail `m ∈ M(j)`: weights over positions in `K(j)`.
    rows: Vec<Vec<(usize, f64)>>,
    /// Column view of `rows`: per `k ∈ K(j)`, the `(m, weight)` pairs.
    columns: Vec<Vec<(usize, f64)>>,
    /// Whether the affine fit around each `k ∈ K(j)` has full rank.
    full_rank: Vec<bool>,
}

impl AveragePrediction {
    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn is_full_rank(&self, k: usize) -> bool {
        self.full_rank[k]
    }

    /// Predicted details `P2 λ`.
    pub fn apply(&self, lambda: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(k, w)| w * lambda[*k]).sum())
            .collect()
    }
}

/// Builds the average-interpolating predictor between `K(j+1)` and `K(j)`.
///
/// For each survivor `k` the affine polynomial is fitted to the group means
/// on `{k} ∪ Nbr(j, k)`. Region averages of an affine polynomial equal its
/// value at the region centroid, so the fit works on centroids; coordinates
/// are centered at `C(S_{j,k})`. The prediction for a merged sibling `m` is
/// `p(C(S_{j+1,m})) − p(C(S_{j+1,k}))`, which only involves the linear part.
pub fn average_prediction(h: &GridHierarchy, j: usize) -> AveragePrediction {
    let coarse = h.level(j);
    let fine = h.level(j + 1);
    let split = h.split(j);
    let dims = h.domain().dim().count();
    let cols = dims + 1;

    let mut rows = vec![Vec::new(); split.detail_len()];
    let mut full_rank = vec![false; coarse.len()];
    for k in 0..coarse.len() {
        let fit: Vec<usize> = std::iter::once(k)
            .chain(coarse.neighbors(k).iter().copied())
            .collect();
        let center = coarse.centroid(k);
        let design = DMatrix::from_fn(fit.len(), cols, |r, c| {
            if c == 0 {
                1.0
            } else {
                coarse.centroid(fit[r])[c - 1] - center[c - 1]
            }
        });
        let normal = design.transpose() * &design;
        let eig = SymmetricEigen::new(normal);
        let largest = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let cutoff = FIT_RANK_TOLERANCE * largest;
        let mut rank = 0;
        let mut inv_diag = DVector::zeros(cols);
        for (i, &e) in eig.eigenvalues.iter().enumerate() {
            if e > cutoff {
                inv_diag[i] = 1.0 / e;
                rank += 1;
            }
        }
        full_rank[k] = rank == cols;
        let children = split.children(k);
        if children.is_empty() {
            continue;
        }
        let pinv_normal =
            &eig.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eig.eigenvectors.transpose();
        let solve = pinv_normal * design.transpose();
        let survivor_centroid = fine.centroid(split.kept()[k]);
        for &m in children {
            let cm = fine.centroid(split.detail()[m]);
            let mut gradient_probe = DVector::zeros(cols);
            for d in 0..dims {
                gradient_probe[d + 1] = cm[d] - survivor_centroid[d];
            }
            let weights = solve.transpose() * gradient_probe;
            rows[m] = fit
                .iter()
                .zip(weights.iter())
                .filter(|(_, w)| **w != 0.0)
                .map(|(&n, &w)| (n, w))
                .collect();
        }
    }
    let mut columns = vec![Vec::new(); coarse.len()];
    for (m, row) in rows.iter().enumerate() {
        for &(k, w) in row {
            columns[k].push((m, w));
        }
    }
    AveragePrediction {
        rows,
        columns,
        full_rank,
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return structural(format!("{what}: expected {want} entries, got {got}"));
    }
    Ok(())
}

/// Lazy split of `λ_{j+1}` into its restrictions to `K(j)` and `M(j)`.
pub fn lazy_split(h: &GridHierarchy, j: usize, fine: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("lazy split input", fine.len(), h.level(j + 1).len())?;
    let split = h.split(j);
    Ok((
        split.kept().iter().map(|&p| fine[p]).collect(),
        split.detail().iter().map(|&p| fine[p]).collect(),
    ))
}

/// Inverse of [`lazy_split`].
pub fn lazy_merge(h: &GridHierarchy, j: usize, coarse: &[f64], detail: &[f64]) -> Result<Vec<f64>> {
    let split = h.split(j);
    check_len("lazy merge coarse input", coarse.len(), split.coarse_len())?;
    check_len("lazy merge detail input", detail.len(), split.detail_len())?;
    let mut fine = vec![0.0; h.level(j + 1).len()];
    for (&p, v) in split.kept().iter().zip(coarse) {
        fine[p] = *v;
    }
    for (&p, v) in split.detail().iter().zip(detail) {
        fine[p] = *v;
    }
    Ok(fine)
}

/// Sibling prediction: entry `m` is the value of the surviving sibling `k_m`.
pub fn predict_p1(h: &GridHierarchy, j: usize, coarse: &[f64]) -> Result<Vec<f64>> {
    let split = h.split(j);
    check_len("P1 input", coarse.len(), split.coarse_len())?;
    Ok(split.parents().iter().map(|&k| coarse[k]).collect())
}

/// Update increment `U γ¹`: the measure-weighted share of the group's details.
pub fn update_u(h: &GridHierarchy, j: usize, gamma: &[f64]) -> Result<Vec<f64>> {
    let split = h.split(j);
    check_len("U input", gamma.len(), split.detail_len())?;
    Ok(update_increment(h, j, gamma))
}

fn update_increment(h: &GridHierarchy, j: usize, gamma: &[f64]) -> Vec<f64> {
    let split = h.split(j);
    let coarse = h.level(j);
    let fine = h.level(j + 1);
    (0..split.coarse_len())
        .map(|k| {
            let weighted: f64 = split
                .children(k)
                .iter()
                .map(|&m| gamma[m] * fine.measure(split.detail()[m]))
                .sum();
            weighted / coarse.measure(k)
        })
        .collect()
}

/// Entry `(m, k)` of `U` as used by the update, for the transpose.
fn update_weight(h: &GridHierarchy, split: &LevelSplit, j: usize, m: usize) -> f64 {
    h.level(j + 1).measure(split.detail()[m]) / h.level(j).measure(split.parent(m))
}

/// Multilevel transform bound to one hierarchy.
///
/// Holds the precomputed prediction operators and, when normalizing, the
/// norms of the synthesized basis functions. Cheap to share between threads.
#[derive(Clone, Debug)]
pub struct LiftingTransform {
    hierarchy: Arc<GridHierarchy>,
    opts: TransformOptions,
    top: usize,
    hash: String,
    /// Indexed by level `j`; `None` below `top` or when P2 is unused.
    predictions: Vec<Option<AveragePrediction>>,
    /// Indexed by level `j`; empty unless normalizing.
    detail_norms: Vec<Vec<f64>>,
    approx_norms: Vec<f64>,
    identity: Vec<usize>,
}

type Sparse = HashMap<usize, f64>;

impl LiftingTransform {
    pub fn new(hierarchy: Arc<GridHierarchy>, opts: TransformOptions) -> Result<Self> {
        let depth = hierarchy.depth();
        if opts.levels < 1 || opts.levels > depth {
            return argument(format!(
                "transform levels must be in 1..={depth}, got {}",
                opts.levels
            ));
        }
        let top = depth - opts.levels;
        let predictions = (0..depth)
            .map(|j| {
                (j >= top && opts.stage.uses_average_prediction())
                    .then(|| average_prediction(&hierarchy, j))
            })
            .collect();
        let hash = hierarchy.content_hash();
        let identity = (0..hierarchy.domain().len()).collect();
        let mut t = Self {
            hierarchy,
            opts,
            top,
            hash,
            predictions,
            detail_norms: vec![Vec::new(); depth],
            approx_norms: Vec::new(),
            identity,
        };
        if opts.normalize {
            let detail_norms = (0..depth)
                .map(|j| {
                    if j < top {
                        return Vec::new();
                    }
                    (0..t.hierarchy.split(j).detail_len())
                        .map(|m| t.primal_norm(j, BasisKind::Wavelet, m))
                        .collect()
                })
                .collect();
            let approx_norms = (0..t.hierarchy.level(top).len())
                .map(|k| t.primal_norm(top, BasisKind::Scaling, k))
                .collect();
            t.detail_norms = detail_norms;
            t.approx_norms = approx_norms;
        }
        Ok(t)
    }

    pub fn hierarchy(&self) -> &Arc<GridHierarchy> {
        &self.hierarchy
    }

    pub fn options(&self) -> TransformOptions {
        self.opts
    }

    pub fn top_level(&self) -> usize {
        self.top
    }

    pub fn finest_level(&self) -> usize {
        self.hierarchy.depth()
    }

    pub fn stage(&self) -> Stage {
        self.opts.stage
    }

    pub(crate) fn identity_samples(&self) -> &[usize] {
        &self.identity
    }

    pub fn prediction(&self, j: usize) -> Option<&AveragePrediction> {
        self.predictions.get(j).and_then(Option::as_ref)
    }

    /// `L²(μ)` norm of the unnormalized wavelet `ψ_{j,m}`; only available when
    /// the transform normalizes.
    pub fn wavelet_norm(&self, j: usize, m: usize) -> Option<f64> {
        self.detail_norms.get(j).and_then(|n| n.get(m)).copied()
    }

    fn check_level(&self, j: usize) -> Result<()> {
        if j < self.top || j >= self.finest_level() {
            return argument(format!(
                "level {j} outside the transform range {}..{}",
                self.top,
                self.finest_level()
            ));
        }
        Ok(())
    }

    /// One unnormalized analysis step from `K(j+1)` to `(K(j), M(j))`.
    pub fn analysis_step(&self, j: usize, fine: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_level(j)?;
        let (mut lambda, mut gamma) = lazy_split(&self.hierarchy, j, fine)?;
        let stage = self.opts.stage;
        if stage.uses_sibling_prediction() {
            let split = self.hierarchy.split(j);
            for (g, &k) in gamma.iter_mut().zip(split.parents()) {
                *g -= lambda[k];
            }
        }
        if stage.uses_update() {
            let inc = update_increment(&self.hierarchy, j, &gamma);
            for (l, d) in lambda.iter_mut().zip(inc) {
                *l += d;
            }
        }
        if let Some(p2) = self.prediction(j) {
            for (g, row) in gamma.iter_mut().zip(&p2.rows) {
                *g -= row.iter().map(|(k, w)| w * lambda[*k]).sum::<f64>();
            }
        }
        Ok((lambda, gamma))
    }

    /// One unnormalized synthesis step, the exact inverse of
    /// [`analysis_step`](Self::analysis_step).
    pub fn synthesis_step(&self, j: usize, coarse: &[f64], detail: &[f64]) -> Result<Vec<f64>> {
        self.check_level(j)?;
        let split = self.hierarchy.split(j);
        check_len("synthesis coarse input", coarse.len(), split.coarse_len())?;
        check_len("synthesis detail input", detail.len(), split.detail_len())?;
        let mut lambda = coarse.to_vec();
        let mut gamma = detail.to_vec();
        let stage = self.opts.stage;
        if let Some(p2) = self.prediction(j) {
            for (g, row) in gamma.iter_mut().zip(&p2.rows) {
                *g += row.iter().map(|(k, w)| w * lambda[*k]).sum::<f64>();
            }
        }
        if stage.uses_update() {
            let inc = update_increment(&self.hierarchy, j, &gamma);
            for (l, d) in lambda.iter_mut().zip(inc) {
                *l -= d;
            }
        }
        if stage.uses_sibling_prediction() {
            for (g, &k) in gamma.iter_mut().zip(split.parents()) {
                *g += lambda[k];
            }
        }
        lazy_merge(&self.hierarchy, j, &lambda, &gamma)
    }

    /// Transpose of [`analysis_step`](Self::analysis_step).
    pub fn analysis_step_adjoint(&self, j: usize, coarse: &[f64], detail: &[f64]) -> Result<Vec<f64>> {
        self.check_level(j)?;
        let h = &self.hierarchy;
        let split = h.split(j);
        check_len("adjoint coarse input", coarse.len(), split.coarse_len())?;
        check_len("adjoint detail input", detail.len(), split.detail_len())?;
        let mut lambda = coarse.to_vec();
        let mut gamma = detail.to_vec();
        let stage = self.opts.stage;
        if let Some(p2) = self.prediction(j) {
            for (m, row) in p2.rows.iter().enumerate() {
                for &(k, w) in row {
                    lambda[k] -= w * gamma[m];
                }
            }
        }
        if stage.uses_update() {
            for (m, g) in gamma.iter_mut().enumerate() {
                *g += lambda[split.parent(m)] * update_weight(h, split, j, m);
            }
        }
        if stage.uses_sibling_prediction() {
            for (m, g) in gamma.iter().enumerate() {
                lambda[split.parent(m)] -= g;
            }
        }
        lazy_merge(h, j, &lambda, &gamma)
    }

    fn check_volume(&self, v: &Volume) -> Result<()> {
        let domain = self.hierarchy.domain();
        if !Arc::ptr_eq(v.domain(), domain) && v.domain().voxels() != domain.voxels() {
            return structural("volume domain does not match the hierarchy domain");
        }
        Ok(())
    }

    fn check_pyramid(&self, p: &CoefficientPyramid) -> Result<()> {
        if p.hierarchy_hash != self.hash {
            return structural("pyramid was computed on a different hierarchy");
        }
        if p.top_level != self.top || p.finest_level != self.finest_level() {
            return structural(format!(
                "pyramid covers levels {}..{}, transform covers {}..{}",
                p.top_level,
                p.finest_level,
                self.top,
                self.finest_level()
            ));
        }
        if p.stage != self.opts.stage || p.normalized != self.opts.normalize {
            return structural("pyramid stage or normalization differs from the transform");
        }
        check_len("pyramid approximation", p.approx.len(), self.hierarchy.level(self.top).len())?;
        for j in self.top..self.finest_level() {
            check_len("pyramid details", p.detail(j).len(), self.hierarchy.split(j).detail_len())?;
        }
        Ok(())
    }

    /// Forward transform of the finest-level coefficients.
    pub fn forward_values(&self, values: &[f64]) -> Result<CoefficientPyramid> {
        check_len("forward input", values.len(), self.hierarchy.domain().len())?;
        let depth = self.finest_level();
        let mut lambda = values.to_vec();
        let mut details = vec![Vec::new(); depth - self.top];
        for j in (self.top..depth).rev() {
            let (coarse, mut detail) = self.analysis_step(j, &lambda)?;
            if self.opts.normalize {
                for (g, n) in detail.iter_mut().zip(&self.detail_norms[j]) {
                    *g *= n;
                }
            }
            details[j - self.top] = detail;
            lambda = coarse;
        }
        if self.opts.normalize {
            for (l, n) in lambda.iter_mut().zip(&self.approx_norms) {
                *l *= n;
            }
        }
        Ok(CoefficientPyramid {
            hierarchy_hash: self.hash.clone(),
            finest_level: depth,
            top_level: self.top,
            stage: self.opts.stage,
            normalized: self.opts.normalize,
            approx: lambda,
            details,
        })
    }

    pub fn forward(&self, v: &Volume) -> Result<CoefficientPyramid> {
        self.check_volume(v)?;
        self.forward_values(v.values())
    }

    /// Unnormalized approximations `λ_N, λ_{N-1}, …, λ_top`.
    pub fn approximation_chain(&self, v: &Volume) -> Result<Vec<Vec<f64>>> {
        self.check_volume(v)?;
        let mut chain = vec![v.values().to_vec()];
        for j in (self.top..self.finest_level()).rev() {
            let (coarse, _) = self.analysis_step(j, chain.last().expect("non-empty"))?;
            chain.push(coarse);
        }
        Ok(chain)
    }

    /// Inverse transform back to finest-level coefficients.
    pub fn inverse_values(&self, p: &CoefficientPyramid) -> Result<Vec<f64>> {
        self.check_pyramid(p)?;
        let mut lambda = p.approx.clone();
        if self.opts.normalize {
            for (l, n) in lambda.iter_mut().zip(&self.approx_norms) {
                *l /= n;
            }
        }
        for j in self.top..self.finest_level() {
            let mut detail = p.detail(j).to_vec();
            if self.opts.normalize {
                for (g, n) in detail.iter_mut().zip(&self.detail_norms[j]) {
                    *g /= n;
                }
            }
            lambda = self.synthesis_step(j, &lambda, &detail)?;
        }
        Ok(lambda)
    }

    pub fn inverse(&self, p: &CoefficientPyramid) -> Result<Volume> {
        let values = self.inverse_values(p)?;
        Volume::new(self.hierarchy.domain().clone(), values)
    }

    /// Transpose of the full (normalized, if configured) analysis operator.
    pub fn forward_adjoint(&self, p: &CoefficientPyramid) -> Result<Vec<f64>> {
        self.check_pyramid(p)?;
        let mut lambda = p.approx.clone();
        if self.opts.normalize {
            for (l, n) in lambda.iter_mut().zip(&self.approx_norms) {
                *l *= n;
            }
        }
        for j in self.top..self.finest_level() {
            let mut detail = p.detail(j).to_vec();
            if self.opts.normalize {
                for (g, n) in detail.iter_mut().zip(&self.detail_norms[j]) {
                    *g *= n;
                }
            }
            lambda = self.analysis_step_adjoint(j, &lambda, &detail)?;
        }
        Ok(lambda)
    }

    /// An all-zero pyramid shaped for this transform.
    pub fn zero_pyramid(&self) -> CoefficientPyramid {
        let h = &self.hierarchy;
        CoefficientPyramid {
            hierarchy_hash: self.hash.clone(),
            finest_level: self.finest_level(),
            top_level: self.top,
            stage: self.opts.stage,
            normalized: self.opts.normalize,
            approx: vec![0.0; h.level(self.top).len()],
            details: (self.top..self.finest_level())
                .map(|j| vec![0.0; h.split(j).detail_len()])
                .collect(),
        }
    }

    /// Sparse unnormalized synthesis of a single basis function starting at
    /// level `j`, returned over the finest voxels.
    fn synthesize_sparse(&self, j: usize, kind: BasisKind, index: usize) -> Sparse {
        let mut lambda: Sparse = HashMap::new();
        let mut gamma: Sparse = HashMap::new();
        match kind {
            BasisKind::Scaling => {
                lambda.insert(index, 1.0);
            }
            BasisKind::Wavelet => {
                gamma.insert(index, 1.0);
            }
            _ => unreachable!("dual functions are synthesized densely"),
        }
        for level in j..self.finest_level() {
            lambda = self.sparse_synthesis_step(level, &lambda, &gamma);
            gamma.clear();
        }
        lambda
    }

    fn sparse_synthesis_step(&self, j: usize, coarse: &Sparse, detail: &Sparse) -> Sparse {
        let h = &self.hierarchy;
        let split = h.split(j);
        let stage = self.opts.stage;
        let lambda = coarse.clone();
        let mut gamma = detail.clone();
        if let Some(p2) = self.prediction(j) {
            for (&k, &v) in &lambda {
                for &(m, w) in &p2.columns[k] {
                    *gamma.entry(m).or_insert(0.0) += w * v;
                }
            }
        }
        let mut lambda = lambda;
        if stage.uses_update() {
            for (&m, &g) in &gamma {
                let k = split.parent(m);
                *lambda.entry(k).or_insert(0.0) -= g * update_weight(h, split, j, m);
            }
        }
        if stage.uses_sibling_prediction() {
            for (&k, &v) in &lambda {
                for &m in split.children(k) {
                    *gamma.entry(m).or_insert(0.0) += v;
                }
            }
        }
        let mut fine: Sparse = HashMap::with_capacity(lambda.len() + gamma.len());
        for (k, v) in lambda {
            fine.insert(split.kept()[k], v);
        }
        for (m, v) in gamma {
            fine.insert(split.detail()[m], v);
        }
        fine
    }

    fn primal_norm(&self, j: usize, kind: BasisKind, index: usize) -> f64 {
        let domain = self.hierarchy.domain();
        self.synthesize_sparse(j, kind, index)
            .iter()
            .map(|(&n, v)| v * v * domain.measure(n))
            .sum::<f64>()
            .sqrt()
    }

    /// Synthesized basis function as `(voxel, value)` pairs, scaled to unit
    /// norm when the transform normalizes.
    pub fn basis_support(&self, j: usize, kind: BasisKind, index: usize) -> Result<Vec<(usize, f64)>> {
        self.check_basis_index(j, kind, index)?;
        if matches!(kind, BasisKind::DualScaling | BasisKind::DualWavelet) {
            return argument("basis_support only supports primal functions");
        }
        let raw = self.synthesize_sparse(j, kind, index);
        let scale = if self.opts.normalize {
            1.0 / self.norm_for(j, kind, index)
        } else {
            1.0
        };
        let mut out: Vec<(usize, f64)> = raw
            .into_iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|(n, v)| (n, v * scale))
            .collect();
        out.sort_unstable_by_key(|(n, _)| *n);
        Ok(out)
    }

    fn norm_for(&self, j: usize, kind: BasisKind, index: usize) -> f64 {
        match kind {
            BasisKind::Wavelet | BasisKind::DualWavelet => self.detail_norms[j][index],
            BasisKind::Scaling | BasisKind::DualScaling if j == self.top => self.approx_norms[index],
            _ => self.primal_norm(j, BasisKind::Scaling, index),
        }
    }

    fn check_basis_index(&self, j: usize, kind: BasisKind, index: usize) -> Result<()> {
        let h = &self.hierarchy;
        match kind {
            BasisKind::Scaling | BasisKind::DualScaling => {
                if j < self.top || j > self.finest_level() {
                    return argument(format!("scaling level {j} outside {}..={}", self.top, self.finest_level()));
                }
                if index >= h.level(j).len() {
                    return argument(format!("index {index} is not in K({j})"));
                }
            }
            BasisKind::Wavelet | BasisKind::DualWavelet => {
                self.check_level(j)?;
                if index >= h.split(j).detail_len() {
                    return argument(format!("index {index} is not in M({j})"));
                }
            }
        }
        Ok(())
    }

    /// Synthesizes `φ_{j,k}`, `ψ_{j,m}` or their duals on the finest grid.
    ///
    /// Primal functions come from inverting a unit coefficient; duals from the
    /// transpose of the analysis operator applied to a unit coefficient,
    /// divided by the voxel measures. With normalization the primal functions
    /// have unit `L²(μ)` norm and the duals are scaled to stay biorthogonal.
    pub fn synthesize_basis_function(&self, j: usize, kind: BasisKind, index: usize) -> Result<Volume> {
        self.check_basis_index(j, kind, index)?;
        let domain = self.hierarchy.domain().clone();
        let n = domain.len();
        let values = match kind {
            BasisKind::Scaling | BasisKind::Wavelet => {
                let mut values = vec![0.0; n];
                for (voxel, v) in self.basis_support(j, kind, index)? {
                    values[voxel] = v;
                }
                values
            }
            BasisKind::DualScaling | BasisKind::DualWavelet => {
                let h = &self.hierarchy;
                let mut lambda = vec![0.0; h.level(j).len()];
                let mut first_detail = if j < self.finest_level() {
                    vec![0.0; h.split(j).detail_len()]
                } else {
                    Vec::new()
                };
                if kind == BasisKind::DualScaling {
                    lambda[index] = 1.0;
                } else {
                    first_detail[index] = 1.0;
                }
                for level in j..self.finest_level() {
                    let detail = if level == j {
                        std::mem::take(&mut first_detail)
                    } else {
                        vec![0.0; h.split(level).detail_len()]
                    };
                    lambda = self.analysis_step_adjoint(level, &lambda, &detail)?;
                }
                let scale = if self.opts.normalize {
                    self.norm_for(j, kind, index)
                } else {
                    1.0
                };
                lambda
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * scale / domain.measure(i))
                    .collect()
            }
        };
        Volume::new(domain, values)
    }

    /// Whether the affine fit used to predict details below `k ∈ K(j)` has
    /// full rank (always false for stages without the second prediction).
    pub fn fit_is_full_rank(&self, j: usize, k: usize) -> bool {
        self.prediction(j).is_some_and(|p| p.is_full_rank(k))
    }
}

/// Whether the spatial dimension of a hierarchy is 2 or 3.
pub fn fit_columns(dim: Dimension) -> usize {
    dim.count() + 1
}

/// Convenience wrapper: builds a transform and runs it forward.
pub fn forward(v: &Volume, h: Arc<GridHierarchy>, opts: TransformOptions) -> Result<CoefficientPyramid> {
    LiftingTransform::new(h, opts)?.forward(v)
}

/// Convenience wrapper around [`LiftingTransform::inverse`].
pub fn inverse(p: &CoefficientPyramid, h: Arc<GridHierarchy>, opts: TransformOptions) -> Result<Volume> {
    LiftingTransform::new(h, opts)?.inverse(p)
}
