//! Coefficient pyramids and their `PYR1` serialization.

use std::fs;
use std::path::Path;

use crate::error::{parse, structural, Result};

/// Which lifting steps a transform applies after the lazy split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Lazy split only.
    Lazy,
    /// Lazy split followed by the sibling prediction.
    Predict,
    /// Sibling prediction and measure-weighted update: unbalanced Haar.
    Haar,
    /// Haar followed by the average-interpolating prediction.
    AverageInterpolating,
}

impl Stage {
    pub fn uses_sibling_prediction(self) -> bool {
        !matches!(self, Stage::Lazy)
    }

    pub fn uses_update(self) -> bool {
        matches!(self, Stage::Haar | Stage::AverageInterpolating)
    }

    pub fn uses_average_prediction(self) -> bool {
        matches!(self, Stage::AverageInterpolating)
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Lazy => "lazy",
            Stage::Predict => "predict",
            Stage::Haar => "haar",
            Stage::AverageInterpolating => "ai",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lazy" => Ok(Stage::Lazy),
            "predict" => Ok(Stage::Predict),
            "haar" => Ok(Stage::Haar),
            "ai" | "average-interpolating" => Ok(Stage::AverageInterpolating),
            other => Err(crate::Error::Argument(format!(
                "unknown stage {other:?} (expected lazy|predict|haar|ai)"
            ))),
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Output of a multilevel forward transform: `λ_{j0}` and `γ_{j0} … γ_{N-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientPyramid {
    pub hierarchy_hash: String,
    pub finest_level: usize,
    pub top_level: usize,
    pub stage: Stage,
    pub normalized: bool,
    /// Indexed by position in `K(top_level)`.
    pub approx: Vec<f64>,
    /// `details[i]` holds level `top_level + i`, indexed by position in `M(j)`.
    pub details: Vec<Vec<f64>>,
}

impl CoefficientPyramid {
    pub fn len(&self) -> usize {
        self.approx.len() + self.details.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn detail(&self, j: usize) -> &[f64] {
        &self.details[j - self.top_level]
    }

    pub fn detail_mut(&mut self, j: usize) -> &mut Vec<f64> {
        &mut self.details[j - self.top_level]
    }

    /// Same shape, all coefficients zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            approx: vec![0.0; self.approx.len()],
            details: self.details.iter().map(|d| vec![0.0; d.len()]).collect(),
            ..self.clone()
        }
    }

    /// Coefficients in serialization order: approximation first, then details
    /// from the coarsest level up.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.approx.clone();
        for d in &self.details {
            out.extend_from_slice(d);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten) for a pyramid of the same shape.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return structural(format!(
                "{} coefficients supplied for a pyramid of {}",
                flat.len(),
                self.len()
            ));
        }
        let (a, mut rest) = flat.split_at(self.approx.len());
        self.approx.copy_from_slice(a);
        for d in &mut self.details {
            let (head, tail) = rest.split_at(d.len());
            d.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::from("PYR1\n");
        out.push_str(&format!("hierarchy {}\n", self.hierarchy_hash));
        out.push_str(&format!("finest {}\n", self.finest_level));
        out.push_str(&format!("top {}\n", self.top_level));
        out.push_str(&format!("stage {}\n", self.stage));
        out.push_str(&format!("normalized {}\n", u8::from(self.normalized)));
        let counts: Vec<String> = std::iter::once(self.approx.len())
            .chain(self.details.iter().map(Vec::len))
            .map(|c| c.to_string())
            .collect();
        out.push_str(&format!("counts {}\n", counts.join(" ")));
        out.push_str("data\n");
        let mut bytes = out.into_bytes();
        for v in self.flatten() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0;
        let mut lines = Vec::new();
        while lines.len() < 8 {
            let rest = &bytes[cursor..];
            let end = rest
                .iter()
                .position(|b| *b == b'\n')
                .ok_or_else(|| crate::Error::Parse("truncated PYR1 header".into()))?;
            let line = std::str::from_utf8(&rest[..end])
                .map_err(|_| crate::Error::Parse("PYR1 header is not UTF-8".into()))?;
            lines.push(line.to_string());
            cursor += end + 1;
        }
        let field = |i: usize, key: &str| -> Result<String> {
            lines[i]
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| crate::Error::Parse(format!("expected `{key}` on header line {}", i + 1)))
        };
        if lines[0] != "PYR1" {
            return parse("missing PYR1 magic");
        }
        let hierarchy_hash = field(1, "hierarchy")?;
        let num = |s: String| -> Result<usize> {
            s.parse()
                .map_err(|_| crate::Error::Parse(format!("bad integer {s:?}")))
        };
        let finest_level = num(field(2, "finest")?)?;
        let top_level = num(field(3, "top")?)?;
        let stage: Stage = field(4, "stage")?
            .parse()
            .map_err(|e: crate::Error| crate::Error::Parse(e.to_string()))?;
        let normalized = match field(5, "normalized")?.as_str() {
            "0" => false,
            "1" => true,
            other => return parse(format!("bad normalized flag {other:?}")),
        };
        let counts: Vec<usize> = field(6, "counts")?
            .split_whitespace()
            .map(|t| num(t.to_string()))
            .collect::<Result<_>>()?;
        if lines[7] != "data" {
            return parse("missing data marker");
        }
        if top_level > finest_level || counts.len() != finest_level - top_level + 1 {
            return parse("level counts do not match the level range");
        }
        let total: usize = counts.iter().sum();
        let body = &bytes[cursor..];
        if body.len() != total * 8 {
            return parse(format!(
                "payload has {} bytes, expected {}",
                body.len(),
                total * 8
            ));
        }
        let flat: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let mut pyramid = Self {
            hierarchy_hash,
            finest_level,
            top_level,
            stage,
            normalized,
            approx: vec![0.0; counts[0]],
            details: counts[1..].iter().map(|&c| vec![0.0; c]).collect(),
        };
        pyramid.set_flat(&flat)?;
        Ok(pyramid)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}
