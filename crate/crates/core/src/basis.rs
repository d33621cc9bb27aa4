//! Explicit filter operators and whole-transform matrices.
//!
//! Everything here is materialized by probing the production transform with
//! unit vectors, so the matrices only ever describe what the transform
//! actually does. Meant for verification at small scale.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{argument, structural, Error, Result};
use crate::lifting::{average_prediction, BasisKind, LiftingTransform};

/// Largest domain for which dense whole-transform matrices are built.
pub const MAX_DENSE_VOXELS: usize = 4096;

/// Row-major sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Vec::new(); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            entries: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut m = Self::zeros(rows, cols);
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return structural(format!("entry ({r}, {c}) outside a {rows}x{cols} matrix"));
            }
            m.entries[r].push((c, v));
        }
        for row in &mut m.entries {
            compact(row);
        }
        Ok(m)
    }

    /// Builds a matrix column by column; `column(c)` returns a dense column.
    pub fn from_columns(rows: usize, cols: usize, column: impl Fn(usize) -> Vec<f64> + Sync) -> Result<Self> {
        let columns: Vec<Vec<f64>> = (0..cols).into_par_iter().map(&column).collect();
        let mut triplets = Vec::new();
        for (c, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return structural(format!("probe column {c} has {} rows, expected {rows}", col.len()));
            }
            triplets.extend(col.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(r, v)| (r, c, *v)));
        }
        Self::from_triplets(rows, cols, triplets)
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let entries = (0..m.nrows())
            .map(|r| (0..m.ncols()).filter(|&c| m[(r, c)] != 0.0).map(|c| (c, m[(r, c)])).collect())
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.entries[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r].iter().find(|(k, _)| *k == c).map_or(0.0, |(_, v)| *v)
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn max_row_nnz(&self) -> usize {
        self.entries.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_col_nnz(&self) -> usize {
        let mut counts = vec![0usize; self.cols];
        for row in &self.entries {
            for (c, _) in row {
                counts[*c] += 1;
            }
        }
        counts.into_iter().max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.rows, self.cols);
        for (r, row) in self.entries.iter().enumerate() {
            for &(c, v) in row {
                d[(r, c)] = v;
            }
        }
        d
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for (r, row) in self.entries.iter().enumerate() {
            for &(c, v) in row {
                t.entries[c].push((r, v));
            }
        }
        t
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return structural(format!("vector of length {} applied to a {}x{} matrix", x.len(), self.rows, self.cols));
        }
        Ok(self
            .entries
            .iter()
            .map(|row| row.iter().map(|(c, v)| v * x[*c]).sum())
            .collect())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return structural(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let entries = self
            .entries
            .par_iter()
            .map(|row| {
                let mut acc: Vec<(usize, f64)> = Vec::new();
                for &(k, a) in row {
                    for &(c, b) in &other.entries[k] {
                        acc.push((c, a * b));
                    }
                }
                compact(&mut acc);
                acc
            })
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            entries,
        })
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return structural(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| {
                let mut row: Vec<(usize, f64)> = a.iter().copied().chain(b.iter().map(|&(c, v)| (c, s * v))).collect();
                compact(&mut row);
                row
            })
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_deviation(&self, other: &Self) -> Result<f64> {
        Ok(self
            .add_scaled(other, -1.0)?
            .entries
            .iter()
            .flatten()
            .fold(0.0f64, |m, (_, v)| m.max(v.abs())))
    }
}

/// Sorts by column and merges duplicates, keeping explicit zeros out.
fn compact(row: &mut Vec<(usize, f64)>) {
    row.sort_unstable_by_key(|(c, _)| *c);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for &(c, v) in row.iter() {
        match out.last_mut() {
            Some((lc, lv)) if *lc == c => *lv += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|(_, v)| *v != 0.0);
    *row = out;
}

/// Single-level analysis and synthesis operators between `K(j+1)` and
/// `K(j) ∪ M(j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterMatrices {
    pub level: usize,
    /// `λ_j = H̃ λ_{j+1}`, shape `|K(j)| × |K(j+1)|`.
    pub analysis_h: SparseMatrix,
    /// `γ_j = G̃ λ_{j+1}`, shape `|M(j)| × |K(j+1)|`.
    pub analysis_g: SparseMatrix,
    /// Shape `|K(j+1)| × |K(j)|`.
    pub synthesis_h: SparseMatrix,
    /// Shape `|K(j+1)| × |M(j)|`; `λ_{j+1} = H* λ_j + G* γ_j`.
    pub synthesis_g: SparseMatrix,
}

impl FilterMatrices {
    pub fn fine_len(&self) -> usize {
        self.analysis_h.cols()
    }

    pub fn coarse_len(&self) -> usize {
        self.analysis_h.rows()
    }

    pub fn detail_len(&self) -> usize {
        self.analysis_g.rows()
    }

    fn check_shapes(&self) -> Result<()> {
        let (f, c, d) = (self.fine_len(), self.coarse_len(), self.detail_len());
        let ok = self.analysis_g.cols() == f
            && self.synthesis_h.shape() == (f, c)
            && self.synthesis_g.shape() == (f, d);
        if !ok {
            return structural("filter matrices have inconsistent shapes");
        }
        Ok(())
    }

    /// Largest row or column population over the four operators.
    pub fn max_filter_length(&self) -> usize {
        [&self.analysis_h, &self.analysis_g, &self.synthesis_h, &self.synthesis_g]
            .iter()
            .map(|m| m.max_row_nnz().max(m.max_col_nnz()))
            .max()
            .unwrap_or(0)
    }
}

/// Materializes the unnormalized single-level operators at level `j`.
pub fn extract_filters(t: &LiftingTransform, j: usize) -> Result<FilterMatrices> {
    if j < t.top_level() || j >= t.finest_level() {
        return argument(format!(
            "level {j} outside the transform range {}..{}",
            t.top_level(),
            t.finest_level()
        ));
    }
    let h = t.hierarchy();
    let fine = h.level(j + 1).len();
    let coarse = h.level(j).len();
    let detail = h.split(j).detail_len();

    let unit = |n: usize, i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    let probes: Vec<(Vec<f64>, Vec<f64>)> = (0..fine)
        .into_par_iter()
        .map(|l| t.analysis_step(j, &unit(fine, l)))
        .collect::<Result<_>>()?;
    let analysis_h = SparseMatrix::from_columns(coarse, fine, |l| probes[l].0.clone())?;
    let analysis_g = SparseMatrix::from_columns(detail, fine, |l| probes[l].1.clone())?;
    let synth = |c: Vec<f64>, d: Vec<f64>| t.synthesis_step(j, &c, &d).expect("shapes checked above");
    let synthesis_h = SparseMatrix::from_columns(fine, coarse, |k| synth(unit(coarse, k), vec![0.0; detail]))?;
    let synthesis_g = SparseMatrix::from_columns(fine, detail, |m| synth(vec![0.0; coarse], unit(detail, m)))?;
    Ok(FilterMatrices {
        level: j,
        analysis_h,
        analysis_g,
        synthesis_h,
        synthesis_g,
    })
}

/// Lifting operators of one level as explicit matrices.
#[derive(Clone, Debug)]
pub struct LiftingOperators {
    /// Sibling prediction, `|M(j)| × |K(j)|`.
    pub p1: SparseMatrix,
    /// Update, `|K(j)| × |M(j)|`.
    pub update: SparseMatrix,
    /// Average-interpolating prediction, `|M(j)| × |K(j)|`.
    pub p2: SparseMatrix,
}

pub fn lifting_operators(t: &LiftingTransform, j: usize) -> Result<LiftingOperators> {
    let h = t.hierarchy();
    if j >= h.depth() {
        return argument(format!("level {j} has no split"));
    }
    let split = h.split(j);
    let (nc, nd) = (split.coarse_len(), split.detail_len());
    let p1 = SparseMatrix::from_triplets(nd, nc, split.parents().iter().enumerate().map(|(m, &k)| (m, k, 1.0)))?;
    let fine = h.level(j + 1);
    let coarse = h.level(j);
    let update = SparseMatrix::from_triplets(
        nc,
        nd,
        (0..nd).map(|m| {
            let k = split.parent(m);
            (k, m, fine.measure(split.detail()[m]) / coarse.measure(k))
        }),
    )?;
    let prediction = match t.prediction(j) {
        Some(p) => p.clone(),
        None => average_prediction(h, j),
    };
    let p2 = SparseMatrix::from_triplets(
        nd,
        nc,
        prediction
            .rows()
            .iter()
            .enumerate()
            .flat_map(|(m, row)| row.iter().map(move |&(k, w)| (m, k, w))),
    )?;
    Ok(LiftingOperators { p1, update, p2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftKind {
    /// `H̃ += S G̃`, `G* −= H* S` with `S: ℓ²(M(j)) → ℓ²(K(j))`.
    Primal,
    /// `H* += G* R`, `G̃ −= R H̃` with `R: ℓ²(K(j)) → ℓ²(M(j))`.
    Dual,
}

/// Applies a primal or dual lifting step to a biorthogonal quadruple.
pub fn apply_lifting_step(f: &FilterMatrices, op: &SparseMatrix, kind: LiftKind) -> Result<FilterMatrices> {
    f.check_shapes()?;
    let mut out = f.clone();
    match kind {
        LiftKind::Primal => {
            if op.shape() != (f.coarse_len(), f.detail_len()) {
                return structural(format!(
                    "primal lift must be {}x{}, got {}x{}",
                    f.coarse_len(),
                    f.detail_len(),
                    op.rows(),
                    op.cols()
                ));
            }
            out.analysis_h = f.analysis_h.add_scaled(&op.mul(&f.analysis_g)?, 1.0)?;
            out.synthesis_g = f.synthesis_g.add_scaled(&f.synthesis_h.mul(op)?, -1.0)?;
        }
        LiftKind::Dual => {
            if op.shape() != (f.detail_len(), f.coarse_len()) {
                return structural(format!(
                    "dual lift must be {}x{}, got {}x{}",
                    f.detail_len(),
                    f.coarse_len(),
                    op.rows(),
                    op.cols()
                ));
            }
            out.synthesis_h = f.synthesis_h.add_scaled(&f.synthesis_g.mul(op)?, 1.0)?;
            out.analysis_g = f.analysis_g.add_scaled(&op.mul(&f.analysis_h)?, -1.0)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identity {
    /// `H̃ H* = I`
    CoarseDual,
    /// `G̃ G* = I`
    DetailDual,
    /// `G̃ H* = 0`
    DetailCoarse,
    /// `H̃ G* = 0`
    CoarseDetail,
    /// `H* H̃ + G* G̃ = I`
    Completeness,
}

impl Identity {
    pub const ALL: [Identity; 5] = [
        Identity::CoarseDual,
        Identity::DetailDual,
        Identity::DetailCoarse,
        Identity::CoarseDetail,
        Identity::Completeness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::CoarseDual => "Ht*H=I",
            Identity::DetailDual => "Gt*G=I",
            Identity::DetailCoarse => "Gt*H=0",
            Identity::CoarseDetail => "Ht*G=0",
            Identity::Completeness => "H*Ht+G*Gt=I",
        }
    }
}

/// Default pass threshold for biorthogonality deviations.
pub const BIORTHOGONALITY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BiorthogonalityReport {
    pub level: usize,
    pub deviations: Vec<(Identity, f64)>,
}

impl BiorthogonalityReport {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().fold(0.0, |m, (_, d)| m.max(*d))
    }

    pub fn deviation(&self, id: Identity) -> f64 {
        self.deviations
            .iter()
            .find(|(i, _)| *i == id)
            .map_or(f64::NAN, |(_, d)| *d)
    }

    pub fn passes(&self) -> bool {
        self.max_deviation() <= BIORTHOGONALITY_TOLERANCE
    }

    /// CSV rows `identity,level,max_deviation` without a header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for (id, d) in &self.deviations {
            let _ = writeln!(s, "{},{},{:e}", id.name(), self.level, d);
        }
        s
    }
}

pub const REPORT_CSV_HEADER: &str = "identity,level,max_deviation";

/// Deviations of the four biorthogonality identities plus completeness.
pub fn check_biorthogonality(f: &FilterMatrices) -> Result<BiorthogonalityReport> {
    f.check_shapes()?;
    let ic = SparseMatrix::identity(f.coarse_len());
    let id = SparseMatrix::identity(f.detail_len());
    let fine = SparseMatrix::identity(f.fine_len());
    let zero = |r, c| SparseMatrix::zeros(r, c);
    let deviations = vec![
        (Identity::CoarseDual, f.analysis_h.mul(&f.synthesis_h)?.max_deviation(&ic)?),
        (Identity::DetailDual, f.analysis_g.mul(&f.synthesis_g)?.max_deviation(&id)?),
        (
            Identity::DetailCoarse,
            f.analysis_g
                .mul(&f.synthesis_h)?
                .max_deviation(&zero(f.detail_len(), f.coarse_len()))?,
        ),
        (
            Identity::CoarseDetail,
            f.analysis_h
                .mul(&f.synthesis_g)?
                .max_deviation(&zero(f.coarse_len(), f.detail_len()))?,
        ),
        (
            Identity::Completeness,
            f.synthesis_h
                .mul(&f.analysis_h)?
                .add_scaled(&f.synthesis_g.mul(&f.analysis_g)?, 1.0)?
                .max_deviation(&fine)?,
        ),
    ];
    Ok(BiorthogonalityReport { level: f.level, deviations })
}

/// Reports for every level of a transform.
pub fn verify_transform(t: &LiftingTransform) -> Result<Vec<BiorthogonalityReport>> {
    (t.top_level()..t.finest_level())
        .map(|j| check_biorthogonality(&extract_filters(t, j)?))
        .collect()
}

/// Index of each column of [`synthesis_matrix`]: the pyramid slot it
/// belongs to, in flattened pyramid order.
pub fn basis_labels(t: &LiftingTransform) -> Vec<(BasisKind, usize, usize)> {
    let h = t.hierarchy();
    let top = t.top_level();
    let mut labels: Vec<_> = (0..h.level(top).len()).map(|k| (BasisKind::Scaling, top, k)).collect();
    for j in top..t.finest_level() {
        labels.extend((0..h.split(j).detail_len()).map(|m| (BasisKind::Wavelet, j, m)));
    }
    labels
}

fn check_dense_size(n: usize) -> Result<()> {
    if n > MAX_DENSE_VOXELS {
        return Err(Error::Size(format!(
            "{n} voxels exceed the dense verification limit of {MAX_DENSE_VOXELS}"
        )));
    }
    Ok(())
}

/// Dense synthesis matrix: column `i` is the basis function belonging to
/// flattened pyramid coefficient `i`, sampled on the finest voxels.
pub fn synthesis_matrix(t: &LiftingTransform) -> Result<DMatrix<f64>> {
    let n = t.hierarchy().domain().len();
    check_dense_size(n)?;
    let labels = basis_labels(t);
    let columns: Vec<Vec<(usize, f64)>> = labels
        .par_iter()
        .map(|&(kind, j, i)| t.basis_support(j, kind, i))
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n, labels.len());
    for (c, col) in columns.iter().enumerate() {
        for &(r, v) in col {
            m[(r, c)] = v;
        }
    }
    Ok(m)
}

/// Dense analysis matrix: row `i` maps finest values to flattened
/// coefficient `i`.
pub fn analysis_matrix(t: &LiftingTransform) -> Result<DMatrix<f64>> {
    let n = t.hierarchy().domain().len();
    check_dense_size(n)?;
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let mut e = vec![0.0; n];
            e[l] = 1.0;
            t.forward_values(&e).map(|p| p.flatten())
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |r, c| columns[c][r]))
}

/// Gram matrix of the synthesized basis in `L²(μ)`.
pub fn gram_matrix(t: &LiftingTransform) -> Result<DMatrix<f64>> {
    let b = synthesis_matrix(t)?;
    let measures = t.hierarchy().domain().measures();
    let mut weighted = b.clone();
    for (r, mu) in measures.iter().enumerate() {
        weighted.row_mut(r).scale_mut(*mu);
    }
    Ok(b.transpose() * weighted)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RieszBounds {
    pub lower: f64,
    pub upper: f64,
}

impl RieszBounds {
    pub fn condition(&self) -> f64 {
        self.upper / self.lower
    }
}

/// Extreme eigenvalues of the `L²(μ)` Gram matrix of the synthesized basis,
/// i.e. the squared extreme singular values of the `√μ`-weighted synthesis
/// matrix.
pub fn estimate_riesz_bounds(t: &LiftingTransform) -> Result<RieszBounds> {
    let gram = gram_matrix(t)?;
    let eig = SymmetricEigen::new(gram);
    let lower = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let upper = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RieszBounds { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DiscreteDomain;
    use crate::hierarchy::build_hierarchy;
    use crate::lifting::TransformOptions;
    use crate::pyramid::Stage;
    use std::sync::Arc;

    fn transform(nx: usize, ny: usize, levels: usize, seed: u64, stage: Stage) -> LiftingTransform {
        let d = Arc::new(DiscreteDomain::rectangle(nx, ny).unwrap());
        let h = Arc::new(build_hierarchy(d, levels, seed, 3).unwrap());
        LiftingTransform::new(h, TransformOptions::new(stage, levels)).unwrap()
    }

    #[test]
    fn sparse_products_match_dense() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, -1.0, 0.5]);
        let b = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 3.0, 0.0, 1.0, 1.0]);
        let sa = SparseMatrix::from_dense(&a);
        let sb = SparseMatrix::from_dense(&b);
        assert_eq!(sa.mul(&sb).unwrap().to_dense(), &a * &b);
        assert_eq!(sa.transpose().to_dense(), a.transpose());
        assert!(sa.mul(&sa).is_err());
    }

    #[test]
    fn lazy_filters_are_selections() {
        let t = transform(4, 4, 2, 3, Stage::Lazy);
        let f = extract_filters(&t, 1).unwrap();
        let split = t.hierarchy().split(1);
        for (k, &p) in split.kept().iter().enumerate() {
            assert_eq!(f.analysis_h.row(k), &[(p, 1.0)]);
        }
        for (m, &p) in split.detail().iter().enumerate() {
            assert_eq!(f.analysis_g.row(m), &[(p, 1.0)]);
        }
        let report = check_biorthogonality(&f).unwrap();
        assert_eq!(report.max_deviation(), 0.0);
    }

    #[test]
    fn haar_pair_filters() {
        let t = transform(2, 1, 1, 0, Stage::Haar);
        let f = extract_filters(&t, 0).unwrap();
        let split = t.hierarchy().split(0);
        let (k, m) = (split.kept()[0], split.detail()[0]);
        assert_eq!(f.analysis_h.get(0, k), 0.5);
        assert_eq!(f.analysis_h.get(0, m), 0.5);
        assert_eq!(f.analysis_g.get(0, k), -1.0);
        assert_eq!(f.analysis_g.get(0, m), 1.0);
    }

    #[test]
    fn zero_lift_changes_nothing() {
        let t = transform(5, 4, 2, 9, Stage::Haar);
        let f = extract_filters(&t, 1).unwrap();
        let s = SparseMatrix::zeros(f.coarse_len(), f.detail_len());
        assert_eq!(apply_lifting_step(&f, &s, LiftKind::Primal).unwrap(), f);
        let r = SparseMatrix::zeros(f.detail_len(), f.coarse_len());
        assert_eq!(apply_lifting_step(&f, &r, LiftKind::Dual).unwrap(), f);
        let bad = SparseMatrix::zeros(f.coarse_len() + 1, f.detail_len());
        assert!(apply_lifting_step(&f, &bad, LiftKind::Primal).is_err());
    }

    #[test]
    fn ai_filters_are_biorthogonal_and_finite() {
        let t = transform(9, 7, 3, 12, Stage::AverageInterpolating);
        for report in verify_transform(&t).unwrap() {
            assert!(report.passes(), "{report:?}");
        }
        let f = extract_filters(&t, 2).unwrap();
        assert!(f.max_filter_length() < 60);
    }

    #[test]
    fn riesz_bounds_tight_for_normalized_haar_and_lazy() {
        // Pairwise merging only: larger Haar groups are not orthogonal.
        for stage in [Stage::Haar, Stage::Lazy] {
            let d = Arc::new(crate::domain::make_ring_domain(&[(1.0, 4.5)], 10).unwrap());
            let h = Arc::new(build_hierarchy(d, 3, 5, 1).unwrap());
            let t = LiftingTransform::new(h, TransformOptions::new(stage, 3).normalized()).unwrap();
            let b = estimate_riesz_bounds(&t).unwrap();
            assert!((b.lower - 1.0).abs() < 1e-10 && (b.upper - 1.0).abs() < 1e-10, "{stage}: {b:?}");
        }
    }

    #[test]
    fn haar_wavelets_in_one_group_overlap() {
        // Siblings s1, s2 of survivor k: <ψ_s1, ψ_s2> = -μ_s1 μ_s2 / μ_G.
        let t = transform(3, 1, 1, 0, Stage::Haar);
        let h = t.hierarchy();
        let split = h.split(0);
        if split.detail_len() < 2 {
            return;
        }
        let a = t.synthesize_basis_function(0, BasisKind::Wavelet, 0).unwrap();
        let b = t.synthesize_basis_function(0, BasisKind::Wavelet, 1).unwrap();
        assert!((a.inner(&b) + 1.0 / 3.0).abs() < 1e-12);
        let bounds = estimate_riesz_bounds(&t).unwrap();
        assert!(bounds.lower < 1.0 && bounds.upper > 1.0);
    }

    #[test]
    fn dense_limit_enforced() {
        let t = transform(65, 64, 1, 0, Stage::Haar);
        assert!(matches!(synthesis_matrix(&t), Err(Error::Size(_))));
    }

    #[test]
    fn report_csv() {
        let t = transform(3, 3, 1, 0, Stage::Haar);
        let r = check_biorthogonality(&extract_filters(&t, 0).unwrap()).unwrap();
        let csv = r.csv_rows();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("Ht*H=I,0,"));
    }
}
