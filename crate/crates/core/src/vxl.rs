//! VXL1 volume files.
//!
//! ```text
//! VXL1
//! dims nx ny nz [nt]
//! spacing dx dy dz
//! dtype u8|f64
//! data
//! <little-endian payload, x fastest, then y, z, t>
//! ```
//!
//! Masks are stored as `u8` (0 excluded, anything else included), values as
//! `f64`. Lattice coordinates map to payload offsets starting at the origin, so
//! only domains with non-negative coordinates can be written.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::domain::{Dimension, DiscreteDomain, Volume, VoxelIndex};
use crate::error::{argument, parse, Result};

const MAGIC: &str = "VXL1";

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Mask(Vec<u8>),
    Values(Vec<f64>),
}

/// A parsed VXL1 file.
#[derive(Clone, Debug, PartialEq)]
pub struct VxlFile {
    /// `[nx, ny, nz, nt]`; `nt = 1` when the header omits it.
    pub dims: [usize; 4],
    /// Whether the header carries an explicit time dimension.
    pub has_time: bool,
    pub spacing: [f64; 3],
    pub payload: Payload,
}

/// Result of [`load_volume`].
#[derive(Clone, Debug)]
pub enum Loaded {
    Domain(DiscreteDomain),
    Volume(Volume),
}

impl VxlFile {
    fn grid_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    fn grid_offset(&self, v: VoxelIndex) -> Option<usize> {
        let [nx, ny, nz, _] = self.dims;
        let (x, y, z) = (v.x, v.y, v.z);
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if x >= nx || y >= ny || z >= nz {
            return None;
        }
        Some(x + nx * (y + ny * z))
    }

    fn dimension(&self) -> Dimension {
        if self.dims[2] == 1 && self.spacing[2] == 1.0 {
            Dimension::Two
        } else {
            Dimension::Three
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let mut next_line = |what: &str| -> Result<String> {
            let rest = &bytes[cursor..];
            let end = match rest.iter().position(|b| *b == b'\n') {
                Some(e) => e,
                None => return parse(format!("truncated header: missing {what} line")),
            };
            let line = std::str::from_utf8(&rest[..end])
                .map_err(|_| crate::Error::Parse(format!("{what} line is not UTF-8")))?
                .trim_end_matches('\r')
                .to_string();
            cursor += end + 1;
            Ok(line)
        };

        let magic = next_line("magic")?;
        if magic != MAGIC {
            return parse(format!("bad magic {magic:?}, expected {MAGIC}"));
        }

        let dims_line = next_line("dims")?;
        let mut tokens = dims_line.split_whitespace();
        if tokens.next() != Some("dims") {
            return parse(format!("expected `dims`, got {dims_line:?}"));
        }
        let dims_vals: Vec<usize> = tokens
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| crate::Error::Parse(format!("bad dimension {t:?}")))
            })
            .collect::<Result<_>>()?;
        if !(3..=4).contains(&dims_vals.len()) || dims_vals.iter().any(|d| *d == 0) {
            return parse(format!("dims must be 3 or 4 positive integers, got {dims_line:?}"));
        }
        let has_time = dims_vals.len() == 4;
        let dims = [
            dims_vals[0],
            dims_vals[1],
            dims_vals[2],
            if has_time { dims_vals[3] } else { 1 },
        ];

        let spacing_line = next_line("spacing")?;
        let mut tokens = spacing_line.split_whitespace();
        if tokens.next() != Some("spacing") {
            return parse(format!("expected `spacing`, got {spacing_line:?}"));
        }
        let sp: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| crate::Error::Parse(format!("bad spacing {t:?}")))
            })
            .collect::<Result<_>>()?;
        if sp.len() != 3 || sp.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return parse(format!("spacing must be 3 positive reals, got {spacing_line:?}"));
        }
        let spacing = [sp[0], sp[1], sp[2]];

        let dtype_line = next_line("dtype")?;
        let dtype = match dtype_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["dtype", "u8"] => "u8",
            ["dtype", "f64"] => "f64",
            _ => return parse(format!("expected `dtype u8|f64`, got {dtype_line:?}")),
        };
        let data_line = next_line("data")?;
        if data_line != "data" {
            return parse(format!("expected `data`, got {data_line:?}"));
        }

        let count = dims
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .ok_or_else(|| crate::Error::Parse("dimensions overflow".into()))?;
        let body = &bytes[cursor..];
        let width = if dtype == "u8" { 1 } else { 8 };
        let expected = count * width;
        if body.len() < expected {
            return parse(format!(
                "truncated payload: header promises {count} values ({expected} bytes), found {} bytes",
                body.len()
            ));
        }
        if body.len() > expected {
            return parse(format!(
                "payload has {} trailing bytes after {count} values",
                body.len() - expected
            ));
        }
        let payload = if dtype == "u8" {
            Payload::Mask(body.to_vec())
        } else {
            let values: Vec<f64> = body
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return parse(format!("non-finite value {} at payload index {i}", values[i]));
            }
            Payload::Values(values)
        };
        Ok(Self {
            dims,
            has_time,
            spacing,
            payload,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC.as_bytes());
        out.push(b'\n');
        let [nx, ny, nz, nt] = self.dims;
        let dims = if self.has_time {
            format!("dims {nx} {ny} {nz} {nt}\n")
        } else {
            format!("dims {nx} {ny} {nz}\n")
        };
        out.extend_from_slice(dims.as_bytes());
        let [dx, dy, dz] = self.spacing;
        out.extend_from_slice(format!("spacing {dx:?} {dy:?} {dz:?}\n").as_bytes());
        match &self.payload {
            Payload::Mask(m) => {
                out.extend_from_slice(b"dtype u8\ndata\n");
                out.extend_from_slice(m);
            }
            Payload::Values(v) => {
                out.extend_from_slice(b"dtype f64\ndata\n");
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Domain of the non-zero mask entries (mask files) or of the full grid
    /// (value files). Only the first time frame is used.
    pub fn domain(&self) -> Result<DiscreteDomain> {
        let [nx, ny, nz, _] = self.dims;
        let mut voxels = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let keep = match &self.payload {
                        Payload::Mask(m) => m[x + nx * (y + ny * z)] != 0,
                        Payload::Values(_) => true,
                    };
                    if keep {
                        voxels.push(VoxelIndex::new(x as i32, y as i32, z as i32));
                    }
                }
            }
        }
        if voxels.is_empty() {
            return argument("mask selects no voxels");
        }
        DiscreteDomain::new(voxels, self.spacing, self.dimension())
    }

    /// Values of every time frame sampled at the voxels of `domain`.
    pub fn frames_on(&self, domain: &DiscreteDomain) -> Result<Vec<Vec<f64>>> {
        let values = match &self.payload {
            Payload::Values(v) => v,
            Payload::Mask(_) => return argument("expected an f64 value file, found a u8 mask"),
        };
        let offsets = domain
            .voxels()
            .iter()
            .map(|v| {
                self.grid_offset(*v).ok_or_else(|| {
                    crate::Error::Structural(format!("voxel {v} lies outside the file grid"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let frame = self.grid_len();
        Ok((0..self.dims[3])
            .map(|t| offsets.iter().map(|o| values[t * frame + o]).collect())
            .collect())
    }
}

fn grid_for(domain: &DiscreteDomain) -> Result<[usize; 3]> {
    let (lo, hi) = domain.bounds();
    if lo.x < 0 || lo.y < 0 || lo.z < 0 {
        return argument("VXL1 cannot store voxels with negative coordinates");
    }
    Ok([hi.x as usize + 1, hi.y as usize + 1, hi.z as usize + 1])
}

fn embed(domain: &DiscreteDomain, grid: [usize; 3], values: &[f64], out: &mut Vec<f64>) {
    let start = out.len();
    out.resize(start + grid[0] * grid[1] * grid[2], 0.0);
    for (i, v) in domain.voxels().iter().enumerate() {
        let off = v.x as usize + grid[0] * (v.y as usize + grid[1] * v.z as usize);
        out[start + off] = values[i];
    }
}

/// Reads a VXL1 file: masks become domains, value files become volumes on
/// the full grid.
pub fn load_volume(path: impl AsRef<Path>) -> Result<Loaded> {
    let file = VxlFile::read(path)?;
    let domain = file.domain()?;
    match file.payload {
        Payload::Mask(_) => Ok(Loaded::Domain(domain)),
        Payload::Values(_) => {
            let frame = file.frames_on(&domain)?.swap_remove(0);
            Ok(Loaded::Volume(Volume::new(Arc::new(domain), frame)?))
        }
    }
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<DiscreteDomain> {
    match load_volume(path)? {
        Loaded::Domain(d) => Ok(d),
        Loaded::Volume(_) => argument("expected a u8 mask file"),
    }
}

/// Reads the first frame of a value file restricted to `domain`.
pub fn load_volume_on(path: impl AsRef<Path>, domain: Arc<DiscreteDomain>) -> Result<Volume> {
    let file = VxlFile::read(path)?;
    let frame = file.frames_on(&domain)?.swap_remove(0);
    Volume::new(domain, frame)
}

/// Reads every frame of a (possibly 4D) value file restricted to `domain`.
pub fn load_series_on(path: impl AsRef<Path>, domain: &DiscreteDomain) -> Result<Vec<Vec<f64>>> {
    VxlFile::read(path)?.frames_on(domain)
}

pub fn mask_file(domain: &DiscreteDomain) -> Result<VxlFile> {
    let grid = grid_for(domain)?;
    let mut mask = vec![0u8; grid[0] * grid[1] * grid[2]];
    for v in domain.voxels() {
        mask[v.x as usize + grid[0] * (v.y as usize + grid[1] * v.z as usize)] = 1;
    }
    Ok(VxlFile {
        dims: [grid[0], grid[1], grid[2], 1],
        has_time: false,
        spacing: domain.spacing(),
        payload: Payload::Mask(mask),
    })
}

pub fn save_mask(path: impl AsRef<Path>, domain: &DiscreteDomain) -> Result<()> {
    mask_file(domain)?.write(path)
}

pub fn volume_file(volume: &Volume) -> Result<VxlFile> {
    let domain = volume.domain();
    let grid = grid_for(domain)?;
    if let Some(v) = volume.values().iter().find(|v| !v.is_finite()) {
        return argument(format!("cannot store non-finite value {v}"));
    }
    let mut values = Vec::new();
    embed(domain, grid, volume.values(), &mut values);
    Ok(VxlFile {
        dims: [grid[0], grid[1], grid[2], 1],
        has_time: false,
        spacing: domain.spacing(),
        payload: Payload::Values(values),
    })
}

/// Writes a volume; voxels of the bounding grid outside the domain hold 0.
pub fn save_volume(path: impl AsRef<Path>, volume: &Volume) -> Result<()> {
    volume_file(volume)?.write(path)
}

/// Writes a 4D series, one frame per entry of `frames`.
pub fn save_series(
    path: impl AsRef<Path>,
    domain: &DiscreteDomain,
    frames: &[Vec<f64>],
) -> Result<()> {
    let grid = grid_for(domain)?;
    let mut values = Vec::new();
    for f in frames {
        if f.len() != domain.len() {
            return argument("frame length does not match the domain");
        }
        embed(domain, grid, f, &mut values);
    }
    VxlFile {
        dims: [grid[0], grid[1], grid[2], frames.len()],
        has_time: true,
        spacing: domain.spacing(),
        payload: Payload::Values(values),
    }
    .write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(dims: &str, dtype: &str) -> Vec<u8> {
        format!("VXL1\ndims {dims}\nspacing 1 1 1\ndtype {dtype}\ndata\n").into_bytes()
    }

    #[test]
    fn full_mask_gives_full_domain() {
        let mut bytes = header("2 2 1", "u8");
        bytes.extend_from_slice(&[1, 1, 1, 1]);
        let d = VxlFile::parse(&bytes).unwrap().domain().unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.dim(), Dimension::Two);
    }

    #[test]
    fn diagonal_mask_gives_disconnected_pair() {
        let mut bytes = header("2 2 1", "u8");
        bytes.extend_from_slice(&[1, 0, 0, 1]);
        let d = VxlFile::parse(&bytes).unwrap().domain().unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.neighbors(0).is_empty());
        assert!(d.neighbors(1).is_empty());
    }

    #[test]
    fn truncated_payload_is_reported() {
        let mut bytes = header("2 2 1", "f64");
        for v in [1.0f64, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let err = VxlFile::parse(&bytes).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn malformed_headers() {
        assert!(VxlFile::parse(b"VXL2\n").is_err());
        assert!(VxlFile::parse(b"VXL1\ndims 2 2\n").is_err());
        assert!(VxlFile::parse(b"VXL1\ndims 2 2 1\nspacing 1 1\n").is_err());
        assert!(VxlFile::parse(b"VXL1\ndims 1 1 1\nspacing 1 1 1\ndtype i32\ndata\n").is_err());
    }

    #[test]
    fn non_finite_values_rejected() {
        let mut bytes = header("1 1 1", "f64");
        bytes.extend_from_slice(&f64::NAN.to_le_bytes());
        assert!(VxlFile::parse(&bytes).is_err());
    }

    #[test]
    fn four_d_frames() {
        let domain = DiscreteDomain::rectangle(3, 2).unwrap();
        let frames: Vec<Vec<f64>> = (0..4)
            .map(|t| (0..6).map(|i| (t * 10 + i) as f64).collect())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.vxl");
        save_series(&path, &domain, &frames).unwrap();
        let back = load_series_on(&path, &domain).unwrap();
        assert_eq!(back, frames);
    }
}
