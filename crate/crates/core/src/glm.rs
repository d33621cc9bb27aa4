//! Time-series statistics: one-sample t-test, the general linear model with
//! a contrast, Bonferroni correction and regressor convolution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma, StudentsT};

use crate::error::{argument, parse, Error, Result};

/// Relative eigenvalue cutoff used for the rank of `XᵀX`.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Residual energy below this fraction of `‖y‖²` counts as an exact fit.
const DEGENERATE_RESIDUAL: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    labels: Vec<String>,
    rank: usize,
    /// Pseudo-inverse of `XᵀX`.
    gram_pinv: DMatrix<f64>,
}

impl DesignMatrix {
    /// `x` is `N_t × L` with one regressor per column.
    pub fn new(x: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let (n, l) = x.shape();
        if l < 1 || n <= l {
            return argument(format!("design matrix must satisfy N_t > L >= 1, got {n}x{l}"));
        }
        if labels.len() != l {
            return argument(format!("{} labels for {l} columns", labels.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return argument("design matrix has non-finite entries");
        }
        let gram = x.transpose() * &x;
        let eig = SymmetricEigen::new(gram);
        let largest = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let mut inv = DVector::zeros(l);
        let mut rank = 0;
        for (i, &e) in eig.eigenvalues.iter().enumerate() {
            if e > RANK_TOLERANCE * largest {
                inv[i] = 1.0 / e;
                rank += 1;
            }
        }
        let gram_pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
        Ok(Self {
            x,
            labels,
            rank,
            gram_pinv,
        })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return argument("design columns have different lengths");
        }
        let x = DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
        let labels = (0..columns.len()).map(|i| format!("x{i}")).collect();
        Self::new(x, labels)
    }

    /// Intercept, linear trend and a ±1 block regressor that starts with
    /// `on` active samples followed by `off` rest samples.
    pub fn block_design(n_t: usize, on: usize, off: usize) -> Result<Self> {
        if on == 0 {
            return argument("block length must be positive");
        }
        let boxcar = box_regressor(n_t, on, off);
        let x = DMatrix::from_fn(n_t, 3, |r, c| match c {
            0 => 1.0,
            1 => r as f64,
            _ => 2.0 * boxcar[r] - 1.0,
        });
        Self::new(x, vec!["intercept".into(), "trend".into(), "block".into()])
    }

    /// Parses CSV: one row per time point, optional non-numeric header row.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut labels = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let numbers: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            match numbers {
                Ok(v) => rows.push(v),
                Err(_) if rows.is_empty() && labels.is_none() => {
                    labels = Some(fields.iter().map(|s| s.to_string()).collect::<Vec<_>>());
                }
                Err(_) => return parse(format!("design CSV line {}: non-numeric field", i + 1)),
            }
        }
        let l = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != l) {
            return parse("design CSV rows have different lengths");
        }
        let labels = labels.unwrap_or_else(|| (0..l).map(|i| format!("x{i}")).collect());
        Self::new(DMatrix::from_fn(rows.len(), l, |r, c| rows[r][c]), labels)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.labels.join(",");
        s.push('\n');
        for r in 0..self.samples() {
            let row: Vec<String> = (0..self.regressors()).map(|c| format!("{:?}", self.x[(r, c)])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.x.column(c).iter().copied().collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn regressors(&self) -> usize {
        self.x.ncols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.regressors()
    }

    /// Residual degrees of freedom `J = N_t − rank(X)`.
    pub fn dof(&self) -> usize {
        self.samples() - self.rank
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Contrast(Vec<f64>);

impl Contrast {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.iter().all(|v| *v == 0.0) {
            return argument("contrast must be a nonzero vector");
        }
        if c.iter().any(|v| !v.is_finite()) {
            return argument("contrast has non-finite entries");
        }
        Ok(Self(c))
    }

    /// Unit vector selecting regressor `i` of `len`.
    pub fn select(len: usize, i: usize) -> Result<Self> {
        if i >= len {
            return argument(format!("regressor {i} out of range for {len} columns"));
        }
        let mut c = vec![0.0; len];
        c[i] = 1.0;
        Self::new(c)
    }

    /// Accepts comma or whitespace separated numbers on one or more lines.
    pub fn from_csv(text: &str) -> Result<Self> {
        let values = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad contrast entry {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    /// Estimated effect: `cᵀβ̂`, or the sample mean for the one-sample test.
    pub g: f64,
    /// `êᵀê · cᵀ(XᵀX)⁻¹c`; the unbiased sample variance for the one-sample test.
    pub s2: f64,
    pub t: f64,
    pub dof: usize,
    /// One-sided upper tail probability of `t`.
    pub p: f64,
}

/// `P(T ≥ t)` for Student's t with `dof` degrees of freedom.
pub fn student_t_upper(t: f64, dof: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("dof >= 1");
    dist.sf(t).clamp(0.0, 1.0)
}

/// `P(|T| ≥ |t|)`.
pub fn student_t_two_sided(t: f64, dof: usize) -> f64 {
    (2.0 * student_t_upper(t.abs(), dof)).min(1.0)
}

/// Test of `mean = 0` against `mean > 0` with `N − 1` degrees of freedom.
pub fn one_sample_t(samples: &[f64]) -> Result<TestResult> {
    let n = samples.len();
    if n < 2 {
        return argument(format!("one-sample t-test needs at least 2 samples, got {n}"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let s2 = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if s2 <= 0.0 || !s2.is_finite() {
        return Err(Error::DegenerateVariance);
    }
    let t = mean / (s2 / n as f64).sqrt();
    Ok(TestResult {
        g: mean,
        s2,
        t,
        dof: n - 1,
        p: student_t_upper(t, n - 1),
    })
}

/// Least-squares estimate without the variance test.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub beta: Vec<f64>,
    pub residual_ss: f64,
    pub g: f64,
}

/// Reusable GLM solver for one design and contrast.
#[derive(Clone, Debug)]
pub struct GlmFitter {
    design: DesignMatrix,
    contrast: Contrast,
    /// `(XᵀX)⁺ Xᵀ`, `L × N_t`.
    solve: DMatrix<f64>,
    /// `cᵀ(XᵀX)⁺c`.
    contrast_gain: f64,
}

impl GlmFitter {
    pub fn new(design: DesignMatrix, contrast: Contrast) -> Result<Self> {
        if contrast.len() != design.regressors() {
            return argument(format!(
                "contrast has {} entries, design has {} columns",
                contrast.len(),
                design.regressors()
            ));
        }
        if design.dof() < 1 {
            return Err(Error::InsufficientDof {
                samples: design.samples(),
                rank: design.rank(),
            });
        }
        let solve = &design.gram_pinv * design.x.transpose();
        let c = DVector::from_column_slice(contrast.values());
        let contrast_gain = (c.transpose() * &design.gram_pinv * &c)[(0, 0)];
        Ok(Self {
            design,
            contrast,
            solve,
            contrast_gain,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn contrast(&self) -> &Contrast {
        &self.contrast
    }

    pub fn dof(&self) -> usize {
        self.design.dof()
    }

    /// Weights `w` such that `g = wᵀy`.
    pub fn effect_weights(&self) -> Vec<f64> {
        let c = DVector::from_column_slice(self.contrast.values());
        (self.solve.transpose() * c).iter().copied().collect()
    }

    pub fn estimate(&self, y: &[f64]) -> Result<Estimate> {
        if y.len() != self.design.samples() {
            return argument(format!(
                "time series has {} samples, design has {}",
                y.len(),
                self.design.samples()
            ));
        }
        let yv = DVector::from_column_slice(y);
        let beta = &self.solve * &yv;
        let residual = &yv - &self.design.x * &beta;
        let g = beta.iter().zip(self.contrast.values()).map(|(b, c)| b * c).sum();
        Ok(Estimate {
            beta: beta.iter().copied().collect(),
            residual_ss: residual.norm_squared(),
            g,
        })
    }

    pub fn fit(&self, y: &[f64]) -> Result<TestResult> {
        let est = self.estimate(y)?;
        let energy: f64 = y.iter().map(|v| v * v).sum();
        if est.residual_ss <= DEGENERATE_RESIDUAL * energy || est.residual_ss == 0.0 {
            return Err(Error::DegenerateVariance);
        }
        let s2 = est.residual_ss * self.contrast_gain;
        let dof = self.dof();
        let t = est.g / (s2 / dof as f64).sqrt();
        Ok(TestResult {
            g: est.g,
            s2,
            t,
            dof,
            p: student_t_upper(t, dof),
        })
    }
}

/// Fits `y = Xβ + e` and tests `cᵀβ`.
pub fn glm_fit(y: &[f64], x: &DesignMatrix, c: &Contrast) -> Result<TestResult> {
    GlmFitter::new(x.clone(), c.clone())?.fit(y)
}

/// `α / K`.
pub fn bonferroni(alpha: f64, k: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return argument(format!("significance level must be in (0, 1), got {alpha}"));
    }
    if k < 1 {
        return argument("number of tests must be at least 1");
    }
    Ok(alpha / k as f64)
}

/// Causal convolution truncated to the length of `signal`.
pub fn convolve_regressor(signal: &[f64], kernel: &[f64]) -> Result<Vec<f64>> {
    if kernel.iter().any(|v| !v.is_finite()) {
        return argument("kernel has non-finite entries");
    }
    Ok((0..signal.len())
        .map(|n| {
            kernel
                .iter()
                .take(n + 1)
                .enumerate()
                .map(|(i, k)| k * signal[n - i])
                .sum()
        })
        .collect())
}

/// 0/1 block regressor: `on` active samples, then `off` rest samples, repeated.
pub fn box_regressor(n_t: usize, on: usize, off: usize) -> Vec<f64> {
    let period = (on + off).max(1);
    (0..n_t).map(|i| if i % period < on { 1.0 } else { 0.0 }).collect()
}

/// Difference of two gamma densities peaking at 6 and 16 time units with an
/// undershoot ratio of 1/6, sampled every `dt` for `len` samples.
pub fn double_gamma_hrf(len: usize, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return argument("sampling interval must be positive");
    }
    // Unit-scale gamma density with shape a peaks at a - 1.
    let response = Gamma::new(7.0, 1.0).expect("valid shape");
    let undershoot = Gamma::new(17.0, 1.0).expect("valid shape");
    Ok((0..len)
        .map(|i| {
            let t = i as f64 * dt;
            response.pdf(t) - undershoot.pdf(t) / 6.0
        })
        .collect())
}

/// Reads a kernel file: numbers separated by commas, whitespace or newlines.
pub fn parse_kernel(text: &str) -> Result<Vec<f64>> {
    let kernel = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad kernel entry {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if kernel.is_empty() {
        return parse("empty kernel");
    }
    Ok(kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_sample_examples() {
        let r = one_sample_t(&[0.0, 0.0, -1.0, 1.0]).unwrap();
        assert_eq!((r.g, r.t), (0.0, 0.0));
        assert!((r.p - 0.5).abs() < 1e-12);

        let r = one_sample_t(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.g, r.s2, r.dof), (2.0, 1.0, 2));
        assert!((r.t - 2.0 / (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r.t - 3.4641016151377544).abs() < 1e-12);

        assert!(matches!(one_sample_t(&[5.0, 5.0, 5.0]), Err(Error::DegenerateVariance)));
        assert!(one_sample_t(&[1.0]).is_err());
    }

    #[test]
    fn t_tail_reference_values() {
        // Closed forms: df = 1 is Cauchy, df = 2 has P(T > t) = (1 - t / sqrt(2 + t²)) / 2.
        for &t in &[-3.0, -0.5, 0.0, 0.7, 2.0, 10.0] {
            let cauchy = 0.5 - f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_upper(t, 1) - cauchy).abs() < 1e-10);
            let two = 0.5 * (1.0 - t / (2.0 + t * t).sqrt());
            assert!((student_t_upper(t, 2) - two).abs() < 1e-10);
        }
    }

    #[test]
    fn intercept_model_matches_one_sample() {
        let y = [0.3, 1.2, -0.4, 2.2, 0.9, 1.1];
        let x = DesignMatrix::from_columns(&[vec![1.0; 6]]).unwrap();
        let glm = glm_fit(&y, &x, &Contrast::new(vec![1.0]).unwrap()).unwrap();
        let one = one_sample_t(&y).unwrap();
        assert!((glm.t - one.t).abs() < 1e-12);
        assert_eq!(glm.dof, one.dof);
        assert!((glm.p - one.p).abs() < 1e-12);
    }

    #[test]
    fn block_design_recovers_box() {
        let x = DesignMatrix::block_design(8, 2, 2).unwrap();
        assert_eq!(x.column(2), vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        assert_eq!(x.column(1), (0..8).map(f64::from).collect::<Vec<_>>());
        let c = Contrast::select(3, 2).unwrap();
        let fitter = GlmFitter::new(x.clone(), c.clone()).unwrap();
        let est = fitter.estimate(&x.column(2)).unwrap();
        for (b, want) in est.beta.iter().zip([0.0, 0.0, 1.0]) {
            assert!((b - want).abs() < 1e-12);
        }
        assert!((est.g - 1.0).abs() < 1e-12);
        assert!(matches!(glm_fit(&x.column(2), &x, &c), Err(Error::DegenerateVariance)));
    }

    #[test]
    fn rank_deficient_design_uses_pseudo_inverse() {
        let x = DesignMatrix::from_columns(&[vec![1.0; 5], vec![2.0; 5]]).unwrap();
        assert_eq!(x.rank(), 1);
        assert!(x.is_rank_deficient());
        assert_eq!(x.dof(), 4);
        let r = glm_fit(&[1.0, 2.0, 3.0, 4.0, 6.0], &x, &Contrast::new(vec![1.0, 2.0]).unwrap()).unwrap();
        // Minimum-norm solution puts mean/5 on the first column and 2*mean/5 on the second.
        assert!((r.g - 3.2).abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        assert!(DesignMatrix::from_columns(&[vec![1.0]]).is_err());
        assert!(Contrast::new(vec![0.0, 0.0]).is_err());
        let x = DesignMatrix::block_design(8, 2, 2).unwrap();
        assert!(GlmFitter::new(x, Contrast::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(0.05, 1).unwrap(), 0.05);
        assert!((bonferroni(0.05, 100).unwrap() - 5e-4).abs() < 1e-18);
        assert!((bonferroni(0.05, 10_000).unwrap() - 5e-6).abs() < 1e-18);
        assert!(bonferroni(1.5, 3).is_err());
    }

    #[test]
    fn convolution_examples() {
        let step = [0.0, 0.0, 1.0, 1.0, 1.0];
        assert_eq!(convolve_regressor(&step, &[1.0]).unwrap(), step.to_vec());
        assert_eq!(convolve_regressor(&step, &[0.5, 0.5]).unwrap(), vec![0.0, 0.0, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn hrf_shape() {
        let h = double_gamma_hrf(32, 1.0).unwrap();
        let peak = h.iter().cloned().enumerate().fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!(peak.0, 6);
        assert!(h[16] < 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let x = DesignMatrix::block_design(10, 3, 2).unwrap();
        let back = DesignMatrix::from_csv(&x.to_csv()).unwrap();
        assert_eq!(back.matrix(), x.matrix());
        assert_eq!(back.labels(), x.labels());
        assert_eq!(Contrast::from_csv("0, 0, 1\n").unwrap().values(), &[0.0, 0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn convolution_matches_double_loop(
            signal in prop::collection::vec(-5.0f64..5.0, 1..30),
            kernel in prop::collection::vec(-2.0f64..2.0, 1..8),
        ) {
            let out = convolve_regressor(&signal, &kernel).unwrap();
            for n in 0..signal.len() {
                let mut acc = 0.0;
                for i in 0..kernel.len() {
                    if i <= n {
                        acc += kernel[i] * signal[n - i];
                    }
                }
                prop_assert!((out[n] - acc).abs() < 1e-12);
            }
        }

        #[test]
        fn t_is_scale_invariant(
            y in prop::collection::vec(-3.0f64..3.0, 12),
            scale in 0.01f64..100.0,
        ) {
            let x = DesignMatrix::block_design(12, 3, 3).unwrap();
            let c = Contrast::select(3, 2).unwrap();
            let fitter = GlmFitter::new(x, c).unwrap();
            let a = fitter.fit(&y).unwrap();
            let scaled: Vec<f64> = y.iter().map(|v| v * scale).collect();
            let b = fitter.fit(&scaled).unwrap();
            prop_assert!((a.t - b.t).abs() <= 1e-9 * a.t.abs().max(1.0));
            prop_assert!((b.g - scale * a.g).abs() <= 1e-9 * (scale * a.g).abs().max(1e-9));
        }
    }
}
