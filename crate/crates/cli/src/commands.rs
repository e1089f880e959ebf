use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mcg_core::config::scale_name;
use mcg_core::eval::{geometric_counts, quality_vs_count_curve, EvalImage};
use mcg_core::image::Image;
use mcg_core::io::{load_ground_truth, load_image, save_proposals, save_ucm, write_atomic, ProposalRecord};
use mcg_core::pareto::FrontParams;
use mcg_core::pipeline::{self, NamedUcm, TrainingImage};

use crate::files::{self, RegressorFile};
use crate::Common;

pub fn segment(image: &Path, out: &Path, common: &Common) -> Result<()> {
    let cfg = files::load_config(common)?;
    let img = load_image(image).with_context(|| format!("loading image {}", image.display()))?;
    let seg = pipeline::segment(&img, &cfg).with_context(|| format!("segmenting {}", image.display()))?;
    let native = out.join("native");
    fs::create_dir_all(&native).with_context(|| format!("creating {}", native.display()))?;
    for (u, &s) in seg.native.iter().zip(&seg.scales) {
        save_ucm(u, &native.join(format!("{}.ucm", scale_name(s))))?;
    }
    save_ucm(&seg.multiscale_native, &native.join("multiscale.ucm"))?;
    for h in &seg.hierarchies {
        save_ucm(&h.ucm, &out.join(format!("{}.ucm", h.name)))?;
    }
    println!(
        "{}: {} hierarchies, {} superpixels",
        out.display(),
        seg.hierarchies.len(),
        seg.hierarchies[0].ucm.leaf_count()
    );
    Ok(())
}

pub fn propose(
    hierarchies: &[PathBuf],
    params: Option<&Path>,
    regressor: Option<&Path>,
    top: Option<usize>,
    out: &Path,
    common: &Common,
) -> Result<()> {
    let cfg = files::load_config(common)?;
    let loaded = files::load_hierarchies(hierarchies)?;
    let dims = loaded[0].0.ucm.dims();
    if let Some((_, p)) = loaded.iter().find(|(h, _)| h.ucm.dims() != dims) {
        bail!("{} differs in size from {}", p.display(), loaded[0].1.display());
    }
    let params: Option<FrontParams> = params
        .map(|p| -> Result<FrontParams> {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .transpose()?;
    let regressor: Option<RegressorFile> = regressor
        .map(|p| -> Result<RegressorFile> {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .transpose()?;
    if let Some(p) = &params {
        if p.config_hash != cfg.config_hash() {
            eprintln!("warning: params were learned under a different configuration");
        }
    }
    let hs: Vec<NamedUcm> = loaded.iter().map(|(h, _)| h.clone()).collect();
    let ranked = pipeline::propose(&hs, &cfg, params.as_ref(), regressor.as_ref().map(|r| &r.regressor))?;
    let records: Vec<ProposalRecord> = ranked
        .into_iter()
        .take(top.unwrap_or(usize::MAX))
        .enumerate()
        .map(|(rank, p)| ProposalRecord {
            hierarchy: p.proposal.hierarchy,
            nodes: p.proposal.nodes,
            rank,
            score: p.score,
        })
        .collect();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_proposals(&records, out)?;
    files::write_sidecar(out, &loaded)?;
    println!("{}: {} proposals", out.display(), records.len());
    Ok(())
}

pub fn learn(manifest: &Path, out: &Path, common: &Common) -> Result<()> {
    let cfg = files::load_config(common)?;
    let entries = files::read_manifest(manifest)?;
    let mut gts = Vec::with_capacity(entries.len());
    let mut pending: Vec<(usize, Image)> = Vec::new();
    let mut hierarchies: Vec<Option<Vec<NamedUcm>>> = Vec::with_capacity(entries.len());
    for (i, (source, gt)) in entries.iter().enumerate() {
        gts.push(load_ground_truth(gt).with_context(|| format!("loading ground truth {}", gt.display()))?);
        if source.is_dir() {
            let hs = files::load_hierarchies(std::slice::from_ref(source))?;
            hierarchies.push(Some(hs.into_iter().map(|(h, _)| h).collect()));
        } else {
            let img = load_image(source).with_context(|| format!("loading image {}", source.display()))?;
            pending.push((i, img));
            hierarchies.push(None);
        }
    }
    let images: Vec<Image> = pending.iter().map(|(_, img)| img.clone()).collect();
    for ((i, _), seg) in pending.iter().zip(pipeline::segment_all(&images, &cfg)) {
        let seg = seg.with_context(|| format!("segmenting {}", entries[*i].0.display()))?;
        hierarchies[*i] = Some(seg.hierarchies);
    }
    let mut corpus = Vec::with_capacity(entries.len());
    for ((hs, gt), (source, _)) in hierarchies.into_iter().zip(gts).zip(&entries) {
        let hs = hs.expect("every entry was loaded or segmented");
        if let Some(h) = hs.iter().find(|h| h.ucm.dims() != gt.dims) {
            bail!(
                "{}: hierarchy {} is {}x{} but the ground truth is {}x{}",
                source.display(),
                h.name,
                h.ucm.dims().height,
                h.ucm.dims().width,
                gt.dims.height,
                gt.dims.width
            );
        }
        corpus.push(TrainingImage { hierarchies: hs, gt });
    }
    let model = pipeline::learn(&corpus, &cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(&out.join("params.json"), &serde_json::to_vec_pretty(&model.params)?)?;
    let reg = RegressorFile {
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        config: cfg,
        regressor: model.regressor,
    };
    write_atomic(&out.join("regressor.json"), &serde_json::to_vec(&reg)?)?;
    let n: usize = model.params.lists.iter().map(|l| l.n).sum();
    println!(
        "{} lists, {} front points, {} quality evaluations, working point {} proposals",
        model.params.lists.len(),
        model.front.len(),
        model.evaluations,
        n
    );
    if model.relaxed {
        eprintln!("warning: no front point meets the proposal target; using the smallest one");
    }
    Ok(())
}

pub fn eval(
    proposals: Option<PathBuf>,
    gt: Option<PathBuf>,
    manifest: Option<PathBuf>,
    counts: &[usize],
    top: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let pairs = match (proposals, gt, manifest) {
        (Some(p), Some(g), None) => vec![(p, g)],
        (None, None, Some(m)) => files::read_manifest(&m)?,
        _ => bail!("give either --proposals with --gt, or --manifest"),
    };
    let mut corpus = Vec::with_capacity(pairs.len());
    for (p, g) in &pairs {
        let gt = load_ground_truth(g).with_context(|| format!("loading ground truth {}", g.display()))?;
        let pool: Vec<_> = files::load_proposal_masks(p, top)?.into_iter().map(|(_, m)| m).collect();
        if let Some(m) = pool.first().filter(|m| m.dims != gt.dims) {
            bail!(
                "{}: proposals are {}x{} but {} is {}x{}",
                p.display(),
                m.dims.height,
                m.dims.width,
                g.display(),
                gt.dims.height,
                gt.dims.width
            );
        }
        corpus.push(EvalImage { pool, gt });
    }
    let counts = if counts.is_empty() {
        geometric_counts(corpus.iter().map(|c| c.pool.len()).max().unwrap_or(0))
    } else {
        counts.to_vec()
    };
    let curve = quality_vs_count_curve(&corpus, &counts)?;
    let last = curve.rows.last().context("no counts to evaluate")?;
    let summary = format!(
        "{} proposals: J_i {:.4}, recall@0.5 {:.4}, recall@0.7 {:.4}, recall@0.85 {:.4}",
        last.n_proposals, last.j_i, last.recall_050, last.recall_070, last.recall_085
    );
    match out {
        Some(path) => {
            write_atomic(path, curve.to_csv().as_bytes())?;
            println!("{summary}");
        }
        None => {
            print!("{}", curve.to_csv());
            eprintln!("{summary}");
        }
    }
    Ok(())
}

pub fn boxes(proposals: &Path, top: Option<usize>, out: Option<&Path>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    let mut csv = String::from("min_row,min_col,max_row,max_col\n");
    for (_, m) in files::load_proposal_masks(proposals, top)? {
        let b = m.bbox().context("proposal mask is empty")?;
        if seen.insert(b) {
            let _ = writeln!(csv, "{},{},{},{}", b.0, b.1, b.2, b.3);
        }
    }
    match out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}
