//! A common interface over the adapted transform and the tensor baseline,
//! so that denoising and detection code runs unchanged on either.

use std::sync::Arc;

use crate::domain::DiscreteDomain;
use crate::error::{structural, Result};
use crate::lifting::{BasisKind, LiftingTransform};

/// A linear analysis/synthesis pair acting on a sample space that contains
/// the domain voxels.
pub trait LinearBasis: Sync {
    /// The domain on which results are evaluated.
    fn domain(&self) -> &Arc<DiscreteDomain>;

    /// Size of the sample space. At least the number of domain voxels.
    fn samples(&self) -> usize;

    /// Sample index of each domain voxel, in domain order.
    fn domain_samples(&self) -> &[usize];

    fn coefficients(&self) -> usize;

    fn analyze(&self, samples: &[f64]) -> Result<Vec<f64>>;

    fn synthesize(&self, coefficients: &[f64]) -> Result<Vec<f64>>;

    /// Nonzero samples of the basis function behind coefficient `index`.
    fn support(&self, index: usize) -> Result<Vec<(usize, f64)>>;

    /// Whether a coefficient is a wavelet (as opposed to a coarse scaling
    /// function).
    fn is_detail(&self, index: usize) -> bool;

    /// Short label used in reports.
    fn family(&self) -> String;

    /// Embeds domain values into the sample space, zero elsewhere.
    fn embed(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.domain().len() {
            return structural(format!(
                "{} values for a domain of {} voxels",
                values.len(),
                self.domain().len()
            ));
        }
        let mut out = vec![0.0; self.samples()];
        for (&s, v) in self.domain_samples().iter().zip(values) {
            out[s] = *v;
        }
        Ok(out)
    }

    /// Restricts samples to the domain voxels.
    fn restrict(&self, samples: &[f64]) -> Vec<f64> {
        self.domain_samples().iter().map(|&s| samples[s]).collect()
    }
}

impl LiftingTransform {
    /// Maps a flattened pyramid position to `(kind, level, index)`.
    pub fn flat_label(&self, mut index: usize) -> Option<(BasisKind, usize, usize)> {
        let h = self.hierarchy();
        let top = self.top_level();
        let approx = h.level(top).len();
        if index < approx {
            return Some((BasisKind::Scaling, top, index));
        }
        index -= approx;
        for j in top..self.finest_level() {
            let n = h.split(j).detail_len();
            if index < n {
                return Some((BasisKind::Wavelet, j, index));
            }
            index -= n;
        }
        None
    }
}

impl LinearBasis for LiftingTransform {
    fn domain(&self) -> &Arc<DiscreteDomain> {
        self.hierarchy().domain()
    }

    fn samples(&self) -> usize {
        self.hierarchy().domain().len()
    }

    fn domain_samples(&self) -> &[usize] {
        self.identity_samples()
    }

    fn coefficients(&self) -> usize {
        self.hierarchy().domain().len()
    }

    fn analyze(&self, samples: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_values(samples)?.flatten())
    }

    fn synthesize(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        let mut p = self.zero_pyramid();
        p.set_flat(coefficients)?;
        self.inverse_values(&p)
    }

    fn support(&self, index: usize) -> Result<Vec<(usize, f64)>> {
        match self.flat_label(index) {
            Some((kind, j, i)) => self.basis_support(j, kind, i),
            None => structural(format!("coefficient {index} out of range")),
        }
    }

    fn is_detail(&self, index: usize) -> bool {
        index >= self.hierarchy().level(self.top_level()).len()
    }

    fn family(&self) -> String {
        format!("adapted-{}", self.stage())
    }
}
