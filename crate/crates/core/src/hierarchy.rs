//! Nested grids built by seeded random merging.
//!
//! Level `N` is the domain itself. Each coarsening step visits the members of
//! `K(j)` in a random order; every still-available member picks up to
//! `max_merge` available neighbors (chosen with probability inversely
//! proportional to centroid distance) and the group collapses onto it. The
//! initiating member survives into `K(j-1)`, the others form `M(j-1)`.
//!
//! Members are identified by the domain position of their surviving finest
//! voxel. Within a level, members are stored in ascending order of that id and
//! most maps are indexed by the member's position in this order.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::domain::DiscreteDomain;
use crate::error::{argument, parse, structural, Result};

/// Lower bound on centroid distances used for the selection weights.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// One level `K(j)` of the hierarchy.
#[derive(Clone, Debug, PartialEq)]
pub struct GridLevel {
    members: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    measure: Vec<f64>,
    centroid: Vec<[f64; 3]>,
    /// Member position owning each finest voxel.
    region_of: Vec<usize>,
}

impl GridLevel {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Finest voxel ids of the members, ascending.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn member(&self, k: usize) -> usize {
        self.members[k]
    }

    /// Member position of the finest voxel id `id`, if it is a member.
    pub fn position_of(&self, id: usize) -> Option<usize> {
        self.members.binary_search(&id).ok()
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn measure(&self, k: usize) -> f64 {
        self.measure[k]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn centroid(&self, k: usize) -> [f64; 3] {
        self.centroid[k]
    }

    pub fn region_of(&self) -> &[usize] {
        &self.region_of
    }

    /// Finest voxels making up the region `S(j, k)`.
    pub fn region(&self, k: usize) -> Vec<usize> {
        self.region_of
            .iter()
            .enumerate()
            .filter_map(|(v, &r)| (r == k).then_some(v))
            .collect()
    }
}

/// The split `K(j+1) = K(j) ∪ M(j)` with its sibling groups.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSplit {
    /// Position in `K(j+1)` of every member of `K(j)`.
    kept: Vec<usize>,
    /// Position in `K(j+1)` of every member of `M(j)`.
    detail: Vec<usize>,
    /// For each detail index: position in `K(j)` of its surviving sibling.
    parent: Vec<usize>,
    /// For each `K(j)` position: detail indices of the merged siblings.
    children: Vec<Vec<usize>>,
}

impl LevelSplit {
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn detail(&self) -> &[usize] {
        &self.detail
    }

    pub fn parent(&self, m: usize) -> usize {
        self.parent[m]
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn children(&self, k: usize) -> &[usize] {
        &self.children[k]
    }

    pub fn coarse_len(&self) -> usize {
        self.kept.len()
    }

    pub fn detail_len(&self) -> usize {
        self.detail.len()
    }
}

/// Nested partitionings `K(N) ⊃ … ⊃ K(0)` of a domain.
#[derive(Clone, Debug)]
pub struct GridHierarchy {
    domain: Arc<DiscreteDomain>,
    seed: u64,
    max_merge: usize,
    levels: Vec<GridLevel>,
    splits: Vec<LevelSplit>,
}

/// Per-level counts reported by [`coarsen_stats`].
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub members: usize,
    pub details: usize,
    pub mean_group_size: f64,
    pub max_group_size: usize,
    pub mean_region_measure: f64,
}

fn finest_level(domain: &DiscreteDomain) -> GridLevel {
    let n = domain.len();
    GridLevel {
        members: (0..n).collect(),
        neighbors: (0..n).map(|i| domain.neighbors(i).to_vec()).collect(),
        measure: domain.measures().to_vec(),
        centroid: (0..n).map(|i| domain.position(i)).collect(),
        region_of: (0..n).collect(),
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Coarse level and split induced by sibling groups given as
/// `(survivor, merged)` fine positions.
fn coarsen(fine: &GridLevel, groups: &[(usize, Vec<usize>)]) -> (GridLevel, LevelSplit) {
    let mut groups: Vec<&(usize, Vec<usize>)> = groups.iter().collect();
    groups.sort_by_key(|g| fine.members[g.0]);

    let mut group_of = vec![usize::MAX; fine.len()];
    let mut detail: Vec<(usize, usize)> = Vec::new();
    for (gk, (survivor, merged)) in groups.iter().enumerate() {
        group_of[*survivor] = gk;
        for &s in merged {
            group_of[s] = gk;
            detail.push((s, gk));
        }
    }
    detail.sort_by_key(|(s, _)| fine.members[*s]);

    let kept: Vec<usize> = groups.iter().map(|g| g.0).collect();
    let mut children = vec![Vec::new(); kept.len()];
    for (m, (_, gk)) in detail.iter().enumerate() {
        children[*gk].push(m);
    }

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); kept.len()];
    for a in 0..fine.len() {
        for &b in &fine.neighbors[a] {
            let (ga, gb) = (group_of[a], group_of[b]);
            if ga != gb {
                neighbors[ga].push(gb);
            }
        }
    }
    for n in &mut neighbors {
        n.sort_unstable();
        n.dedup();
    }

    let mut measure = vec![0.0; kept.len()];
    let mut weighted = vec![[0.0f64; 3]; kept.len()];
    for a in 0..fine.len() {
        let g = group_of[a];
        let mu = fine.measure[a];
        measure[g] += mu;
        for d in 0..3 {
            weighted[g][d] += fine.centroid[a][d] * mu;
        }
    }
    let centroid = weighted
        .iter()
        .zip(&measure)
        .map(|(w, m)| [w[0] / m, w[1] / m, w[2] / m])
        .collect();

    let level = GridLevel {
        members: kept.iter().map(|&k| fine.members[k]).collect(),
        neighbors,
        measure,
        centroid,
        region_of: fine.region_of.iter().map(|&r| group_of[r]).collect(),
    };
    let split = LevelSplit {
        kept,
        parent: detail.iter().map(|(_, g)| *g).collect(),
        detail: detail.into_iter().map(|(s, _)| s).collect(),
        children,
    };
    (level, split)
}

/// One pass of the random merging algorithm over `fine`.
fn random_groups(fine: &GridLevel, max_merge: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, Vec<usize>)> {
    let mut order: Vec<usize> = (0..fine.len()).collect();
    order.shuffle(rng);
    let mut available = vec![true; fine.len()];
    let mut groups = Vec::new();
    for &k in &order {
        if !available[k] {
            continue;
        }
        available[k] = false;
        let mut candidates: Vec<usize> = fine.neighbors[k]
            .iter()
            .copied()
            .filter(|&s| available[s])
            .collect();
        let mut merged = Vec::new();
        if !candidates.is_empty() {
            let q = rng.random_range(1..=max_merge.min(candidates.len()));
            let mut weights: Vec<f64> = candidates
                .iter()
                .map(|&s| 1.0 / distance(fine.centroid[k], fine.centroid[s]).max(DISTANCE_FLOOR))
                .collect();
            for _ in 0..q {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        pick = i;
                        break;
                    }
                    u -= w;
                }
                let s = candidates.swap_remove(pick);
                weights.swap_remove(pick);
                available[s] = false;
                merged.push(s);
            }
        }
        groups.push((k, merged));
    }
    groups
}

/// Builds an `levels`-level hierarchy with the seeded random merging algorithm.
///
/// The generator is ChaCha8 seeded with `seed`; together with the domain's
/// voxel order it fully determines the result.
pub fn build_hierarchy(
    domain: Arc<DiscreteDomain>,
    levels: usize,
    seed: u64,
    max_merge: usize,
) -> Result<GridHierarchy> {
    if levels < 1 {
        return argument("hierarchy needs at least one level");
    }
    if max_merge < 1 {
        return argument("max_merge must be at least 1");
    }
    if domain.is_empty() {
        return argument("domain is empty");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Built finest-first, reversed at the end so that index == level.
    let mut levels_fine_first = vec![finest_level(&domain)];
    let mut splits_fine_first = Vec::with_capacity(levels);
    for _ in 0..levels {
        let fine = levels_fine_first.last().expect("non-empty");
        let groups = random_groups(fine, max_merge, &mut rng);
        let (coarse, split) = coarsen(fine, &groups);
        levels_fine_first.push(coarse);
        splits_fine_first.push(split);
    }
    levels_fine_first.reverse();
    splits_fine_first.reverse();
    Ok(GridHierarchy {
        domain,
        seed,
        max_merge,
        levels: levels_fine_first,
        splits: splits_fine_first,
    })
}

impl GridHierarchy {
    pub fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_merge(&self) -> usize {
        self.max_merge
    }

    /// Number of coarsening steps `N`.
    pub fn depth(&self) -> usize {
        self.splits.len()
    }

    /// `K(j)` for `j` in `0..=N`.
    pub fn level(&self, j: usize) -> &GridLevel {
        &self.levels[j]
    }

    /// Split of `K(j+1)` into `K(j)` and `M(j)`, for `j` in `0..N`.
    pub fn split(&self, j: usize) -> &LevelSplit {
        &self.splits[j]
    }

    /// Sibling group `Sib(j+1, k)` of the coarse member `k ∈ K(j)`, as
    /// positions in `K(j+1)` with the survivor first.
    pub fn siblings(&self, j: usize, k: usize) -> Vec<usize> {
        let split = &self.splits[j];
        std::iter::once(split.kept[k])
            .chain(split.children[k].iter().map(|&m| split.detail[m]))
            .collect()
    }

    /// Total number of coefficients for a transform topped at level `top`.
    pub fn coefficient_count(&self, top: usize) -> usize {
        self.levels[top].len()
            + (top..self.depth())
                .map(|j| self.splits[j].detail_len())
                .sum::<usize>()
    }

    /// Serializes to the `HIER1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "HIER1");
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "max_merge {}", self.max_merge);
        let _ = writeln!(out, "levels {}", self.depth());
        let _ = writeln!(out, "voxels {}", self.domain.len());
        for j in (0..self.depth()).rev() {
            let coarse = &self.levels[j];
            let fine = &self.levels[j + 1];
            let split = &self.splits[j];
            let _ = writeln!(out, "split {} groups {}", j, coarse.len());
            for k in 0..coarse.len() {
                let ids: Vec<String> = self
                    .siblings(j, k)
                    .iter()
                    .map(|&p| fine.members[p].to_string())
                    .collect();
                let _ = writeln!(out, "{}", ids.join(" "));
            }
            debug_assert_eq!(split.kept.len(), coarse.len());
            let _ = writeln!(out, "neighbors {} members {}", j, coarse.len());
            for k in 0..coarse.len() {
                let mut line = coarse.members[k].to_string();
                line.push(':');
                for &n in &coarse.neighbors[k] {
                    let _ = write!(line, " {}", coarse.members[n]);
                }
                let _ = writeln!(out, "{line}");
            }
        }
        let _ = writeln!(out, "end");
        out
    }

    /// Parses the `HIER1` format against the domain it was built on.
    pub fn from_text(domain: Arc<DiscreteDomain>, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| crate::Error::Parse(format!("unexpected end of input, wanted {what}")))
        };
        fn keyed(line: &str, key: &str) -> Result<u64> {
            let mut it = line.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(k), Some(v), None) if k == key => v
                    .parse()
                    .map_err(|_| crate::Error::Parse(format!("bad {key} value {v:?}"))),
                _ => parse(format!("expected `{key} <n>`, got {line:?}")),
            }
        }
        if next("magic")? != "HIER1" {
            return parse("missing HIER1 magic");
        }
        let seed = keyed(next("seed")?, "seed")?;
        let max_merge = keyed(next("max_merge")?, "max_merge")? as usize;
        let depth = keyed(next("levels")?, "levels")? as usize;
        let voxels = keyed(next("voxels")?, "voxels")? as usize;
        if voxels != domain.len() {
            return structural(format!(
                "hierarchy was built on {voxels} voxels, domain has {}",
                domain.len()
            ));
        }
        if depth < 1 || max_merge < 1 {
            return parse("levels and max_merge must be positive");
        }
        let parse_ids = |s: &str| -> Result<Vec<usize>> {
            s.split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| crate::Error::Parse(format!("bad voxel id {t:?}")))
                })
                .collect()
        };

        let mut levels_fine_first = vec![finest_level(&domain)];
        let mut splits_fine_first = Vec::with_capacity(depth);
        for step in 0..depth {
            let j = depth - 1 - step;
            let header = next("split header")?;
            let expected = format!("split {j} groups ");
            let count: usize = header
                .strip_prefix(&expected)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| crate::Error::Parse(format!("expected `{expected}<n>`, got {header:?}")))?;
            let fine = levels_fine_first.last().expect("non-empty");
            let mut seen = vec![false; fine.len()];
            let mut groups = Vec::with_capacity(count);
            for _ in 0..count {
                let ids = parse_ids(next("sibling group")?)?;
                let mut positions = Vec::with_capacity(ids.len());
                for id in ids {
                    let p = fine.position_of(id).ok_or_else(|| {
                        crate::Error::Parse(format!("voxel {id} is not a member of level {}", j + 1))
                    })?;
                    if std::mem::replace(&mut seen[p], true) {
                        return parse(format!("voxel {id} appears in two sibling groups"));
                    }
                    positions.push(p);
                }
                if positions.is_empty() {
                    return parse("empty sibling group");
                }
                let survivor = positions.remove(0);
                groups.push((survivor, positions));
            }
            if seen.iter().any(|s| !s) {
                return parse(format!("sibling groups of level {} do not cover K({})", j + 1, j + 1));
            }
            let (coarse, split) = coarsen(fine, &groups);

            let header = next("neighbor header")?;
            if header != format!("neighbors {j} members {}", coarse.len()) {
                return parse(format!("unexpected neighbor header {header:?}"));
            }
            for k in 0..coarse.len() {
                let line = next("neighbor list")?;
                let (head, rest) = line
                    .split_once(':')
                    .ok_or_else(|| crate::Error::Parse(format!("bad neighbor line {line:?}")))?;
                let id: usize = head
                    .trim()
                    .parse()
                    .map_err(|_| crate::Error::Parse(format!("bad neighbor line {line:?}")))?;
                let listed = parse_ids(rest)?;
                let derived: Vec<usize> = coarse.neighbors[k].iter().map(|&n| coarse.members[n]).collect();
                if id != coarse.members[k] || listed != derived {
                    return parse(format!(
                        "neighbor list of member {id} at level {j} is inconsistent with its sibling groups"
                    ));
                }
            }
            levels_fine_first.push(coarse);
            splits_fine_first.push(split);
        }
        if next("end")? != "end" {
            return parse("missing end marker");
        }
        levels_fine_first.reverse();
        splits_fine_first.reverse();
        Ok(Self {
            domain,
            seed,
            max_merge,
            levels: levels_fine_first,
            splits: splits_fine_first,
        })
    }

    /// Short content hash of the serialized hierarchy.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-level member counts and group statistics, finest level first.
pub fn coarsen_stats(h: &GridHierarchy) -> Vec<LevelStats> {
    (0..=h.depth())
        .rev()
        .map(|j| {
            let level = h.level(j);
            let (details, mean_group_size, max_group_size) = if j < h.depth() {
                let split = h.split(j);
                let max = (0..split.coarse_len())
                    .map(|k| split.children(k).len() + 1)
                    .max()
                    .unwrap_or(1);
                let fine = h.level(j + 1).len();
                (split.detail_len(), fine as f64 / level.len() as f64, max)
            } else {
                (0, 1.0, 1)
            };
            LevelStats {
                level: j,
                members: level.len(),
                details,
                mean_group_size,
                max_group_size,
                mean_region_measure: level.measures().iter().sum::<f64>() / level.len() as f64,
            }
        })
        .collect()
}
