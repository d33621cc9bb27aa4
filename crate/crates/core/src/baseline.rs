//! Separable orthonormal Haar transform on the bounding square of a planar
//! domain. The comparison baseline for the adapted wavelets: it ignores the
//! domain shape and processes the whole square.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use crate::domain::{Dimension, DiscreteDomain};
use crate::error::{argument, structural, Result};
use crate::linear::LinearBasis;

#[derive(Clone, Debug)]
pub struct TensorHaar {
    domain: Arc<DiscreteDomain>,
    side: usize,
    levels: usize,
    domain_samples: Vec<usize>,
}

impl TensorHaar {
    /// Uses the smallest power-of-two square, anchored at the origin, that
    /// holds the domain and admits `levels` dyadic splits.
    pub fn new(domain: Arc<DiscreteDomain>, levels: usize) -> Result<Self> {
        let (_, hi) = domain.bounds();
        let extent = (hi.x.max(hi.y) + 1).max(1) as usize;
        let side = extent.next_power_of_two().max(1 << levels);
        Self::with_side(domain, side, levels)
    }

    pub fn with_side(domain: Arc<DiscreteDomain>, side: usize, levels: usize) -> Result<Self> {
        if domain.dim() != Dimension::Two {
            return argument("the tensor Haar baseline is planar only");
        }
        if levels < 1 {
            return argument("tensor Haar needs at least one level");
        }
        if !side.is_power_of_two() || side < (1 << levels) {
            return argument(format!("square side {side} does not allow {levels} dyadic levels"));
        }
        let mut domain_samples = Vec::with_capacity(domain.len());
        for v in domain.voxels() {
            if v.x < 0 || v.y < 0 || v.x as usize >= side || v.y as usize >= side {
                return argument(format!("voxel {v} lies outside the {side}x{side} square"));
            }
            domain_samples.push(v.y as usize * side + v.x as usize);
        }
        Ok(Self {
            domain,
            side,
            levels,
            domain_samples,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.side * self.side {
            return structural(format!("{len} samples for a {0}x{0} square", self.side));
        }
        Ok(())
    }
}

fn haar_1d(buf: &mut [f64], scratch: &mut Vec<f64>) {
    let half = buf.len() / 2;
    scratch.clear();
    scratch.extend((0..half).map(|i| (buf[2 * i] + buf[2 * i + 1]) * FRAC_1_SQRT_2));
    scratch.extend((0..half).map(|i| (buf[2 * i] - buf[2 * i + 1]) * FRAC_1_SQRT_2));
    buf.copy_from_slice(scratch);
}

fn inverse_haar_1d(buf: &mut [f64], scratch: &mut Vec<f64>) {
    let half = buf.len() / 2;
    scratch.clear();
    for i in 0..half {
        let (a, d) = (buf[i], buf[half + i]);
        scratch.push((a + d) * FRAC_1_SQRT_2);
        scratch.push((a - d) * FRAC_1_SQRT_2);
    }
    buf.copy_from_slice(scratch);
}

impl LinearBasis for TensorHaar {
    fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    fn samples(&self) -> usize {
        self.side * self.side
    }

    fn domain_samples(&self) -> &[usize] {
        &self.domain_samples
    }

    fn coefficients(&self) -> usize {
        self.side * self.side
    }

    fn analyze(&self, samples: &[f64]) -> Result<Vec<f64>> {
        self.check(samples.len())?;
        let s = self.side;
        let mut out = samples.to_vec();
        let mut scratch = Vec::with_capacity(s);
        let mut col = vec![0.0; s];
        for level in 0..self.levels {
            let n = s >> level;
            for r in 0..n {
                haar_1d(&mut out[r * s..r * s + n], &mut scratch);
            }
            for c in 0..n {
                for r in 0..n {
                    col[r] = out[r * s + c];
                }
                haar_1d(&mut col[..n], &mut scratch);
                for r in 0..n {
                    out[r * s + c] = col[r];
                }
            }
        }
        Ok(out)
    }

    fn synthesize(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        self.check(coefficients.len())?;
        let s = self.side;
        let mut out = coefficients.to_vec();
        let mut scratch = Vec::with_capacity(s);
        let mut col = vec![0.0; s];
        for level in (0..self.levels).rev() {
            let n = s >> level;
            for c in 0..n {
                for r in 0..n {
                    col[r] = out[r * s + c];
                }
                inverse_haar_1d(&mut col[..n], &mut scratch);
                for r in 0..n {
                    out[r * s + c] = col[r];
                }
            }
            for r in 0..n {
                inverse_haar_1d(&mut out[r * s..r * s + n], &mut scratch);
            }
        }
        Ok(out)
    }

    fn support(&self, index: usize) -> Result<Vec<(usize, f64)>> {
        let n = self.coefficients();
        if index >= n {
            return structural(format!("coefficient {index} out of range"));
        }
        let mut unit = vec![0.0; n];
        unit[index] = 1.0;
        Ok(self
            .synthesize(&unit)?
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect())
    }

    fn is_detail(&self, index: usize) -> bool {
        let coarse = self.side >> self.levels;
        index / self.side >= coarse || index % self.side >= coarse
    }

    fn family(&self) -> String {
        "tensor-haar".into()
    }
}
