//! Artifact locations and the CLI-only file formats: manifests, the
//! hierarchy sidecar of a proposals file and the regressor file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mcg_core::config::PipelineConfig;
use mcg_core::forest::OverlapRegressor;
use mcg_core::grouping::nodes_mask;
use mcg_core::io::{load_proposals, load_ucm, write_atomic, ProposalRecord};
use mcg_core::mask::Mask;
use mcg_core::pipeline::NamedUcm;
use serde::{Deserialize, Serialize};

use crate::Common;

pub fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

/// Sort key putting `scale_<s>` files in scale order ahead of the rest.
fn hierarchy_order(name: &str) -> (u8, f64, String) {
    match name.strip_prefix("scale_").and_then(|s| s.parse::<f64>().ok()) {
        Some(s) => (0, s, String::new()),
        None => (1, 0.0, name.to_string()),
    }
}

/// Loads hierarchy files, expanding directories to the `.ucm` files they
/// directly contain. Each hierarchy is named after its file stem.
pub fn load_hierarchies(paths: &[PathBuf]) -> Result<Vec<(NamedUcm, PathBuf)>> {
    let mut out = Vec::new();
    for path in paths {
        let files = if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "ucm"))
                .collect();
            found.sort_by(|a, b| {
                let (ka, kb) = (hierarchy_order(&stem(a)), hierarchy_order(&stem(b)));
                ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2))
            });
            if found.is_empty() {
                bail!("{} contains no hierarchy files", path.display());
            }
            found
        } else {
            vec![path.clone()]
        };
        for f in files {
            let ucm = load_ucm(&f).with_context(|| format!("loading hierarchy {}", f.display()))?;
            out.push((NamedUcm { name: stem(&f), ucm }, f));
        }
    }
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn sidecar_path(proposals: &Path) -> PathBuf {
    let mut s = proposals.as_os_str().to_owned();
    s.push(".hier");
    PathBuf::from(s)
}

/// `name<TAB>path` per hierarchy, paths relative to the sidecar's directory
/// when they lie below it.
pub fn write_sidecar(proposals: &Path, hierarchies: &[(NamedUcm, PathBuf)]) -> Result<()> {
    let base = proposals.parent().map(absolute).transpose()?.unwrap_or_default();
    let mut text = String::new();
    for (h, path) in hierarchies {
        let abs = absolute(path)?;
        let shown = abs.strip_prefix(&base).map(Path::to_path_buf).unwrap_or(abs);
        text.push_str(&format!("{}\t{}\n", h.name, shown.display()));
    }
    write_atomic(&sidecar_path(proposals), text.as_bytes())?;
    Ok(())
}

fn absolute(p: &Path) -> Result<PathBuf> {
    let p = if p.as_os_str().is_empty() { Path::new(".") } else { p };
    std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))
}

pub fn read_sidecar(proposals: &Path) -> Result<Vec<NamedUcm>> {
    let side = sidecar_path(proposals);
    let text = fs::read_to_string(&side).with_context(|| format!("reading {}", side.display()))?;
    let base = proposals.parent().unwrap_or(Path::new(""));
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let Some((name, path)) = l.split_once('\t') else {
                bail!("{}: malformed line {l:?}", side.display());
            };
            let path = base.join(path);
            let ucm = load_ucm(&path).with_context(|| format!("loading hierarchy {}", path.display()))?;
            Ok(NamedUcm { name: name.to_string(), ucm })
        })
        .collect()
}

/// Proposal records in rank order, cut to `top`, with their masks.
pub fn load_proposal_masks(path: &Path, top: Option<usize>) -> Result<Vec<(ProposalRecord, Mask)>> {
    let mut records = load_proposals(path).with_context(|| format!("loading {}", path.display()))?;
    records.sort_by_key(|r| r.rank);
    records.truncate(top.unwrap_or(usize::MAX));
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let hierarchies = read_sidecar(path)?;
    records
        .into_iter()
        .map(|r| {
            let Some(h) = hierarchies.get(r.hierarchy) else {
                bail!("{}: proposal of rank {} names missing hierarchy {}", path.display(), r.rank, r.hierarchy);
            };
            let m = nodes_mask(&h.ucm, &r.nodes)
                .with_context(|| format!("{}: proposal of rank {}", path.display(), r.rank))?;
            Ok((r, m))
        })
        .collect()
}

/// Two tab-separated columns per line; relative paths are resolved against
/// the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((a, b)) = line.split_once('\t') else {
            bail!("{} line {}: expected two tab-separated paths", path.display(), i + 1);
        };
        out.push((base.join(a.trim()), base.join(b.trim())));
    }
    if out.is_empty() {
        bail!("manifest {} is empty", path.display());
    }
    Ok(out)
}

/// The trained regressor together with the configuration that produced it.
#[derive(Serialize, Deserialize)]
pub struct RegressorFile {
    pub config: PipelineConfig,
    pub config_hash: String,
    pub seed: u64,
    pub regressor: OverlapRegressor,
}
