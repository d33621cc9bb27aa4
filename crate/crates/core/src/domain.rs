//! Discrete voxel domains with per-voxel measures and face adjacency.
//!
//! A domain is a finite set of integer lattice points. Each point stands for the
//! axis-aligned box of size `spacing` centered at `index * spacing`. Voxels are
//! kept in lexicographic `(z, y, x)` order; every per-voxel array in the crate
//! (volumes, finest-level coefficients) uses this order.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{argument, Result};

/// Integer lattice coordinate of a voxel. 2D domains use `z = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VoxelIndex {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelIndex {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub const fn planar(x: i32, y: i32) -> Self {
        Self { x, y, z: 0 }
    }

    fn l1_distance(&self, other: &Self) -> i64 {
        (self.x as i64 - other.x as i64).abs()
            + (self.y as i64 - other.y as i64).abs()
            + (self.z as i64 - other.z as i64).abs()
    }
}

impl Ord for VoxelIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.z, self.y, self.x).cmp(&(other.z, other.y, other.x))
    }
}

impl PartialOrd for VoxelIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for VoxelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Two voxels are neighbors when their boxes share a face.
pub fn are_neighbors(a: VoxelIndex, b: VoxelIndex) -> bool {
    a.l1_distance(&b) == 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Two,
    Three,
}

impl Dimension {
    pub fn count(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }
}

/// A finite set of voxels with positive measures and the face-adjacency graph.
#[derive(Clone, Debug)]
pub struct DiscreteDomain {
    voxels: Vec<VoxelIndex>,
    lookup: HashMap<VoxelIndex, usize>,
    spacing: [f64; 3],
    measure: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
    dim: Dimension,
}

impl DiscreteDomain {
    /// Builds a domain with unit measure per voxel.
    pub fn new(voxels: Vec<VoxelIndex>, spacing: [f64; 3], dim: Dimension) -> Result<Self> {
        Self::with_measure_fn(voxels, spacing, dim, |_| 1.0)
    }

    /// Builds a domain whose per-voxel measure is given by `measure(voxel)`.
    pub fn with_measure_fn(
        mut voxels: Vec<VoxelIndex>,
        spacing: [f64; 3],
        dim: Dimension,
        measure: impl Fn(VoxelIndex) -> f64,
    ) -> Result<Self> {
        if voxels.is_empty() {
            return argument("domain must contain at least one voxel");
        }
        if spacing.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return argument(format!("spacing must be positive and finite, got {spacing:?}"));
        }
        voxels.sort();
        if voxels.windows(2).any(|w| w[0] == w[1]) {
            return argument("domain contains duplicate voxels");
        }
        if dim == Dimension::Two {
            if voxels.iter().any(|v| v.z != 0) {
                return argument("2D domains require z = 0 for every voxel");
            }
            if spacing[2] != 1.0 {
                return argument("2D domains require unit z spacing");
            }
        }
        let measure: Vec<f64> = voxels.iter().map(|v| measure(*v)).collect();
        if let Some(bad) = measure.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return argument(format!(
                "voxel {} has non-positive measure {}",
                voxels[bad], measure[bad]
            ));
        }
        let lookup: HashMap<VoxelIndex, usize> =
            voxels.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let offsets = [
            (-1, 0, 0),
            (1, 0, 0),
            (0, -1, 0),
            (0, 1, 0),
            (0, 0, -1),
            (0, 0, 1),
        ];
        let neighbors = voxels
            .iter()
            .map(|v| {
                let mut adj: Vec<usize> = offsets
                    .iter()
                    .filter_map(|(dx, dy, dz)| {
                        let w = VoxelIndex::new(
                            v.x.checked_add(*dx)?,
                            v.y.checked_add(*dy)?,
                            v.z.checked_add(*dz)?,
                        );
                        lookup.get(&w).copied()
                    })
                    .collect();
                adj.sort_unstable();
                adj
            })
            .collect();
        Ok(Self {
            voxels,
            lookup,
            spacing,
            measure,
            neighbors,
            dim,
        })
    }

    /// Full `nx × ny` rectangle (2D) with unit spacing.
    pub fn rectangle(nx: usize, ny: usize) -> Result<Self> {
        let voxels = (0..ny)
            .flat_map(|y| (0..nx).map(move |x| VoxelIndex::planar(x as i32, y as i32)))
            .collect();
        Self::new(voxels, [1.0; 3], Dimension::Two)
    }

    /// Full `nx × ny × nz` box with unit spacing.
    pub fn cuboid(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let mut voxels = Vec::with_capacity(nx * ny * nz);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    voxels.push(VoxelIndex::new(x as i32, y as i32, z as i32));
                }
            }
        }
        Self::new(voxels, [1.0; 3], Dimension::Three)
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn voxels(&self) -> &[VoxelIndex] {
        &self.voxels
    }

    pub fn voxel(&self, i: usize) -> VoxelIndex {
        self.voxels[i]
    }

    pub fn position_of(&self, v: VoxelIndex) -> Option<usize> {
        self.lookup.get(&v).copied()
    }

    pub fn contains(&self, v: VoxelIndex) -> bool {
        self.lookup.contains_key(&v)
    }

    pub fn measure(&self, i: usize) -> f64 {
        self.measure[i]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// Positions of the face neighbors of voxel `i`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Physical center of voxel `i`.
    pub fn position(&self, i: usize) -> [f64; 3] {
        let v = self.voxels[i];
        [
            v.x as f64 * self.spacing[0],
            v.y as f64 * self.spacing[1],
            v.z as f64 * self.spacing[2],
        ]
    }

    /// Inclusive lower and upper lattice corners.
    pub fn bounds(&self) -> (VoxelIndex, VoxelIndex) {
        let mut lo = self.voxels[0];
        let mut hi = self.voxels[0];
        for v in &self.voxels {
            lo = VoxelIndex::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
            hi = VoxelIndex::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
        }
        (lo, hi)
    }

    /// Connected-component label per voxel under face adjacency, labels in order
    /// of first appearance.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for &n in &self.neighbors[i] {
                    if label[n] == usize::MAX {
                        label[n] = count;
                        stack.push(n);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    /// Returns a copy of this domain with the given per-voxel measures.
    pub fn with_measures(&self, measure: &[f64]) -> Result<Self> {
        if measure.len() != self.len() {
            return argument(format!(
                "measure length {} does not match domain size {}",
                measure.len(),
                self.len()
            ));
        }
        Self::with_measure_fn(self.voxels.clone(), self.spacing, self.dim, |v| {
            measure[self.lookup[&v]]
        })
    }
}

/// Concentric annuli on a `grid_size × grid_size` pixel grid.
///
/// A pixel belongs to the domain when the distance `r` from its center to the
/// grid center satisfies `inner <= r < outer` for one of the pairs.
pub fn make_ring_domain(radii: &[(f64, f64)], grid_size: usize) -> Result<DiscreteDomain> {
    if radii.is_empty() {
        return argument("ring domain needs at least one (inner, outer) pair");
    }
    if grid_size == 0 {
        return argument("grid size must be positive");
    }
    for (i, &(inner, outer)) in radii.iter().enumerate() {
        if !(inner >= 0.0 && outer > inner && outer.is_finite()) {
            return argument(format!("annulus {i} has invalid radii ({inner}, {outer})"));
        }
        if i > 0 && inner < radii[i - 1].1 {
            return argument(format!(
                "annulus {i} overlaps its predecessor: {inner} < {}",
                radii[i - 1].1
            ));
        }
    }
    let center = (grid_size as f64 - 1.0) / 2.0;
    let mut voxels = Vec::new();
    for y in 0..grid_size {
        for x in 0..grid_size {
            let r = ((x as f64 - center).powi(2) + (y as f64 - center).powi(2)).sqrt();
            if radii.iter().any(|&(a, b)| r >= a && r < b) {
                voxels.push(VoxelIndex::planar(x as i32, y as i32));
            }
        }
    }
    if voxels.is_empty() {
        return argument("ring domain is empty on this grid");
    }
    DiscreteDomain::new(voxels, [1.0; 3], Dimension::Two)
}

/// Real values attached to every voxel of a domain, in domain order.
#[derive(Clone, Debug)]
pub struct Volume {
    domain: Arc<DiscreteDomain>,
    values: Vec<f64>,
}

impl Volume {
    pub fn new(domain: Arc<DiscreteDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return argument(format!(
                "volume has {} values for a domain of {} voxels",
                values.len(),
                domain.len()
            ));
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Arc<DiscreteDomain>) -> Self {
        let n = domain.len();
        Self {
            domain,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at voxel centers (physical coordinates).
    pub fn from_fn(domain: Arc<DiscreteDomain>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..domain.len()).map(|i| f(domain.position(i))).collect();
        Self { domain, values }
    }

    pub fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, v: VoxelIndex) -> Option<f64> {
        self.domain.position_of(v).map(|i| self.values[i])
    }

    /// L²(μ) norm over the domain.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.domain.measures())
            .map(|(v, m)| v * v * m)
            .sum::<f64>()
            .sqrt()
    }

    /// L²(μ) inner product; both volumes must live on the same domain.
    pub fn inner(&self, other: &Volume) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.domain.measures())
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    /// L²(μ) norm of `self - other`.
    pub fn distance(&self, other: &Volume) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.domain.measures())
            .map(|((a, b), m)| (a - b) * (a - b) * m)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbor_relation() {
        assert!(are_neighbors(VoxelIndex::new(0, 0, 0), VoxelIndex::new(1, 0, 0)));
        assert!(!are_neighbors(VoxelIndex::new(0, 0, 0), VoxelIndex::new(1, 1, 0)));
        assert!(!are_neighbors(VoxelIndex::new(2, 3, 0), VoxelIndex::new(2, 3, 0)));
        assert!(are_neighbors(VoxelIndex::new(0, 0, 4), VoxelIndex::new(0, 0, 5)));
    }

    #[test]
    fn ordering_is_z_then_y_then_x() {
        let d = DiscreteDomain::new(
            vec![
                VoxelIndex::new(1, 0, 1),
                VoxelIndex::new(0, 1, 0),
                VoxelIndex::new(1, 0, 0),
                VoxelIndex::new(0, 0, 1),
            ],
            [1.0; 3],
            Dimension::Three,
        )
        .unwrap();
        assert_eq!(
            d.voxels(),
            &[
                VoxelIndex::new(1, 0, 0),
                VoxelIndex::new(0, 1, 0),
                VoxelIndex::new(0, 0, 1),
                VoxelIndex::new(1, 0, 1),
            ]
        );
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(DiscreteDomain::new(vec![], [1.0; 3], Dimension::Two).is_err());
        let dup = vec![VoxelIndex::planar(0, 0), VoxelIndex::planar(0, 0)];
        assert!(DiscreteDomain::new(dup, [1.0; 3], Dimension::Two).is_err());
        let lifted = vec![VoxelIndex::new(0, 0, 1)];
        assert!(DiscreteDomain::new(lifted, [1.0; 3], Dimension::Two).is_err());
        let one = vec![VoxelIndex::planar(0, 0)];
        assert!(
            DiscreteDomain::with_measure_fn(one, [1.0; 3], Dimension::Two, |_| 0.0).is_err()
        );
    }

    #[test]
    fn total_measure_is_additive() {
        let d = DiscreteDomain::rectangle(3, 2).unwrap();
        let w: Vec<f64> = (0..6).map(|i| 0.5 + i as f64).collect();
        let d = d.with_measures(&w).unwrap();
        assert_eq!(d.total_measure(), w.iter().sum::<f64>());
    }

    #[test]
    fn neighbor_lists_are_symmetric() {
        let d = make_ring_domain(&[(3.0, 6.0), (8.0, 10.0)], 24).unwrap();
        for i in 0..d.len() {
            assert!(!d.neighbors(i).contains(&i));
            for &j in d.neighbors(i) {
                assert!(d.neighbors(j).contains(&i));
                assert!(are_neighbors(d.voxel(i), d.voxel(j)));
            }
        }
    }

    #[test]
    fn full_disc_ring() {
        let d = make_ring_domain(&[(0.0, 100.0)], 8).unwrap();
        assert_eq!(d.len(), 64);
    }

    #[test]
    fn ring_errors() {
        assert!(make_ring_domain(&[], 16).is_err());
        assert!(make_ring_domain(&[(2.0, 5.0), (4.0, 6.0)], 16).is_err());
        assert!(make_ring_domain(&[(3.0, 2.0)], 16).is_err());
    }

    #[test]
    fn two_thin_rings_match_direct_membership() {
        let radii = [(10.0, 12.5), (20.0, 22.0)];
        let d = make_ring_domain(&radii, 64).unwrap();
        let mut count = 0;
        for y in 0..64 {
            for x in 0..64 {
                let dx = x as f64 - 31.5;
                let dy = y as f64 - 31.5;
                let r2 = dx * dx + dy * dy;
                if (100.0..156.25).contains(&r2) || (400.0..484.0).contains(&r2) {
                    count += 1;
                    assert!(d.contains(VoxelIndex::planar(x, y)));
                }
            }
        }
        assert_eq!(d.len(), count);
        let (components, _) = d.components();
        assert_eq!(components, 2);
    }
}
