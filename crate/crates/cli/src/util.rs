use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use adawave::vxl::load_mask;
use adawave::{build_hierarchy, DiscreteDomain, Error, GridHierarchy};
use anyhow::{Context, Result};
use clap::Args;

/// Comma-separated values of one flag, e.g. `--alphas 0.05,0.01`.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let items = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<T>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<std::result::Result<Vec<T>, String>>()?;
        if items.is_empty() {
            return Err("empty list".into());
        }
        Ok(List(items))
    }
}

/// Parses annuli written as `inner:outer` pairs, e.g. `4:7,10:13`.
pub fn parse_rings(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .map(|pair| {
            let bad = || Error::Argument(format!("ring {pair:?} is not inner:outer"));
            let (a, b) = pair.trim().split_once(':').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Input files must exist before any work starts.
pub fn existing(path: &Path) -> Result<&Path> {
    if !path.is_file() {
        return Err(Error::Argument(format!("input file {} does not exist", path.display())).into());
    }
    Ok(path)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(existing(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn mask(path: &Path) -> Result<Arc<DiscreteDomain>> {
    let d = load_mask(existing(path)?).with_context(|| format!("loading mask {}", path.display()))?;
    Ok(Arc::new(d))
}

/// Where a hierarchy comes from: a saved file or the seeded builder.
#[derive(Args, Clone, Debug)]
pub struct HierarchyArgs {
    /// Domain mask (VXL1, u8 payload).
    #[arg(long)]
    pub mask: PathBuf,
    /// Saved hierarchy to reuse instead of building one.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// Transform levels; also the depth of a freshly built hierarchy.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest number of fine points merged into one coarse point.
    #[arg(long, default_value_t = 3)]
    pub max_merge: usize,
}

impl HierarchyArgs {
    pub fn load(&self) -> Result<Arc<GridHierarchy>> {
        load_hierarchy(&self.mask, self.hierarchy.as_deref(), self.levels, self.seed, self.max_merge)
    }
}

pub fn load_hierarchy(
    mask_path: &Path,
    saved: Option<&Path>,
    levels: usize,
    seed: u64,
    max_merge: usize,
) -> Result<Arc<GridHierarchy>> {
    let domain = mask(mask_path)?;
    let h = match saved {
        Some(p) => GridHierarchy::from_text(domain, &read_text(p)?).with_context(|| format!("loading hierarchy {}", p.display()))?,
        None => build_hierarchy(domain, levels, seed, max_merge)?,
    };
    Ok(Arc::new(h))
}

/// The last line every command prints: `summary command=<name> key=value ...`.
pub struct Summary {
    fields: Vec<(String, String)>,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        Self {
            fields: vec![("command".into(), command.into())],
        }
    }

    pub fn add(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.fields.push((key.into(), value.to_string().replace(char::is_whitespace, "_")));
        self
    }

    pub fn line(&self) -> String {
        let body: Vec<String> = self.fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("summary {}", body.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_parse_and_reject() {
        assert_eq!("1, 2,3".parse::<List<usize>>().unwrap(), List(vec![1, 2, 3]));
        assert!("".parse::<List<f64>>().is_err());
        assert!("0.1,x".parse::<List<f64>>().is_err());
    }

    #[test]
    fn rings() {
        assert_eq!(parse_rings("4:7, 10:13.5").unwrap(), vec![(4.0, 7.0), (10.0, 13.5)]);
        assert!(parse_rings("4-7").is_err());
    }

    #[test]
    fn summary_has_no_spaces_in_values() {
        let mut s = Summary::new("fwd");
        s.add("out", "a b.pyr").add("n", 3);
        assert_eq!(s.line(), "summary command=fwd out=a_b.pyr n=3");
    }
}
