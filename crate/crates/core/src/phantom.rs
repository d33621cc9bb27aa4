//! Synthetic test signals: piecewise-smooth images on ring domains.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{make_ring_domain, Dimension, DiscreteDomain};
use crate::error::{argument, Result};

/// Side of the square used by the ring phantoms.
pub const PHANTOM_GRID: usize = 64;

/// Thin concentric annuli on the 64×64 grid: width 3 with gaps of 3.
pub const THIN_RINGS: [(f64, f64); 5] = [(4.0, 7.0), (10.0, 13.0), (16.0, 19.0), (22.0, 25.0), (28.0, 31.0)];

pub fn thin_ring_domain() -> DiscreteDomain {
    make_ring_domain(&THIN_RINGS, PHANTOM_GRID).expect("pinned radii are valid")
}

/// Parameters of the random Gaussian mixtures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhantomConfig {
    pub bumps: usize,
    pub min_width: f64,
    pub max_width: f64,
    /// Bump weights are uniform in `[-amplitude, amplitude]`.
    pub amplitude: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            bumps: 4,
            min_width: 4.0,
            max_width: 12.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Bump {
    center: [f64; 2],
    width: f64,
    weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture(Vec<Bump>);

impl GaussianMixture {
    pub fn random(rng: &mut impl Rng, side: usize, cfg: &PhantomConfig) -> Self {
        let s = side as f64;
        Self(
            (0..cfg.bumps)
                .map(|_| Bump {
                    center: [rng.random_range(0.0..s), rng.random_range(0.0..s)],
                    width: rng.random_range(cfg.min_width..=cfg.max_width),
                    weight: rng.random_range(-cfg.amplitude..=cfg.amplitude),
                })
                .collect(),
        )
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.0
            .iter()
            .map(|b| {
                let d2 = (p[0] - b.center[0]).powi(2) + (p[1] - b.center[1]).powi(2);
                b.weight * (-d2 / (2.0 * b.width * b.width)).exp()
            })
            .sum()
    }
}

/// Row-major `side × side` image, index `y * side + x`.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareImage {
    pub side: usize,
    pub values: Vec<f64>,
}

impl SquareImage {
    pub fn restrict(&self, domain: &DiscreteDomain) -> Result<Vec<f64>> {
        domain
            .voxels()
            .iter()
            .map(|v| {
                if v.x < 0 || v.y < 0 || v.x as usize >= self.side || v.y as usize >= self.side {
                    return argument(format!("voxel {v} outside the {0}x{0} image", self.side));
                }
                Ok(self.values[v.y as usize * self.side + v.x as usize])
            })
            .collect()
    }
}

fn check_planar(domain: &DiscreteDomain, side: usize) -> Result<()> {
    if domain.dim() != Dimension::Two {
        return argument("phantoms are planar");
    }
    let (lo, hi) = domain.bounds();
    if lo.x < 0 || lo.y < 0 || hi.x as usize >= side || hi.y as usize >= side {
        return argument(format!("domain does not fit a {side}x{side} square"));
    }
    Ok(())
}

/// Piecewise-smooth image: an independent random mixture on every connected
/// component of the domain and another one on the rest of the square.
pub fn smooth_phantom(domain: &DiscreteDomain, side: usize, seed: u64, cfg: &PhantomConfig) -> Result<SquareImage> {
    check_planar(domain, side)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (count, labels) = domain.components();
    let mixtures: Vec<GaussianMixture> = (0..=count).map(|_| GaussianMixture::random(&mut rng, side, cfg)).collect();
    let outside = &mixtures[count];
    let mut values: Vec<f64> = (0..side * side)
        .map(|i| outside.eval([(i % side) as f64, (i / side) as f64]))
        .collect();
    for (n, v) in domain.voxels().iter().enumerate() {
        values[v.y as usize * side + v.x as usize] = mixtures[labels[n]].eval([v.x as f64, v.y as f64]);
    }
    Ok(SquareImage { side, values })
}

/// Non-negative activation amplitudes on the domain: a positive mixture
/// clipped below half its maximum, so that the active set is a few blobs.
pub fn activation_phantom(domain: &DiscreteDomain, seed: u64, peak: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bounds();
    let cfg = PhantomConfig {
        bumps: 3,
        min_width: 4.0,
        max_width: 8.0,
        amplitude: 1.0,
    };
    let bumps: Vec<Bump> = (0..cfg.bumps)
        .map(|_| Bump {
            center: [
                rng.random_range(lo.x as f64..=hi.x as f64),
                rng.random_range(lo.y as f64..=hi.y as f64),
            ],
            width: rng.random_range(cfg.min_width..=cfg.max_width),
            weight: 1.0,
        })
        .collect();
    let mixture = GaussianMixture(bumps);
    let raw: Vec<f64> = domain
        .voxels()
        .iter()
        .map(|v| mixture.eval([v.x as f64, v.y as f64]))
        .collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0; raw.len()];
    }
    raw.iter()
        .map(|&r| {
            let s = r / max;
            if s >= 0.5 {
                peak * (s - 0.5) / 0.5
            } else {
                0.0
            }
        })
        .collect()
}

/// I.i.d. Gaussian samples with standard deviation `sigma`.
pub fn gaussian_noise(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect()
}

/// Convenience: the thin-ring domain behind an `Arc`.
pub fn shared_thin_rings() -> Arc<DiscreteDomain> {
    Arc::new(thin_ring_domain())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_rings_have_five_components() {
        let d = thin_ring_domain();
        assert_eq!(d.components().0, 5);
    }

    #[test]
    fn phantom_is_deterministic_and_piecewise() {
        let d = make_ring_domain(&[(3.0, 6.0), (9.0, 12.0)], 32).unwrap();
        let cfg = PhantomConfig::default();
        let a = smooth_phantom(&d, 32, 5, &cfg).unwrap();
        assert_eq!(a, smooth_phantom(&d, 32, 5, &cfg).unwrap());
        assert_ne!(a, smooth_phantom(&d, 32, 6, &cfg).unwrap());
        assert_eq!(a.restrict(&d).unwrap().len(), d.len());
    }

    #[test]
    fn activation_is_nonnegative_with_support() {
        let d = thin_ring_domain();
        let a = activation_phantom(&d, 3, 2.0);
        assert!(a.iter().all(|v| *v >= 0.0));
        let active = a.iter().filter(|v| **v > 0.0).count();
        assert!(active > 0 && active < d.len());
        assert!((a.iter().cloned().fold(0.0, f64::max) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noise_statistics() {
        let n = gaussian_noise(20_000, 2.0, 1);
        let mean = n.iter().sum::<f64>() / n.len() as f64;
        let var = n.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.len() as f64;
        assert!(mean.abs() < 0.05 && (var - 4.0).abs() < 0.2);
    }
}
