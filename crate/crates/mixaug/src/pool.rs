//! Pool construction: trains the pairwise velocity models, renders the
//! spatial and semantic variants, and writes the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use mixaug_core::inr::{train_registration, RegistrationConfig, VelocityFieldModel};
use mixaug_core::lesion::inject_lesion;
use mixaug_core::mixing::{apply_deformation, integrate_mixed, BetaSampler};
use mixaug_core::pool::{
    plan_semantic_pool, plan_spatial_pool, PoolManifest, Provenance, SampleEntry, SampleKind,
    SkipRecord,
};
use mixaug_core::rng::{child_seed, hash_bytes};
use mixaug_core::volume::{estimate_brain_mask, LabelMask, Volume};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::digest::config_hash;
use crate::error::{Error, Result};
use crate::model_file::{read_model, write_model, ModelMetadata};
use crate::nifti::{read_mask, read_volume, write_mask, write_volume};

const SPATIAL_SEED: u64 = 0x5350;
const SEMANTIC_SEED: u64 = 0x534D;

pub const MANIFEST_FILE: &str = "manifest.json";

struct Tumor {
    id: String,
    image: Volume,
    mask: LabelMask,
    brain: Option<LabelMask>,
}

struct Healthy {
    id: String,
    image: Volume,
    brain: LabelMask,
}

/// Seed of the model for the ordered pair `(src, tgt)`.
pub fn pair_seed(base: u64, src: &str, tgt: &str) -> u64 {
    hash_bytes(base, format!("{src}\u{1f}{tgt}").as_bytes())
}

fn rel(path: &Path, root: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .into_owned()
}

fn load_tumors(cfg: &RunConfig) -> Result<Vec<Tumor>> {
    cfg.pool
        .tumor
        .iter()
        .map(|c| {
            Ok(Tumor {
                id: c.id.clone(),
                image: read_volume(&c.image)?,
                mask: read_mask(&c.mask)?,
                brain: c.brain.as_ref().map(read_mask).transpose()?,
            })
        })
        .collect()
}

fn load_healthy(cfg: &RunConfig) -> Result<Vec<Healthy>> {
    cfg.pool
        .healthy
        .iter()
        .map(|c| {
            let image = read_volume(&c.image)?;
            let brain = match &c.brain {
                Some(p) => read_mask(p)?,
                None => estimate_brain_mask(&image)?,
            };
            Ok(Healthy {
                id: c.id.clone(),
                image,
                brain,
            })
        })
        .collect()
}

/// Trains or reloads the model for one ordered pair.
fn pair_model(
    src: &Tumor,
    tgt: &Tumor,
    reg: &RegistrationConfig,
    hash: &str,
    dir: &Path,
) -> Result<VelocityFieldModel> {
    let path = dir.join(format!("{}__{}__{}.mxvf", src.id, tgt.id, hash));
    if path.exists() {
        if let Ok(m) = read_model(&path) {
            if m.domain() == src.image.dims() {
                return Ok(m);
            }
        }
    }
    let cfg = RegistrationConfig {
        seed: pair_seed(reg.seed, &src.id, &tgt.id),
        ..reg.clone()
    };
    let (model, report) = train_registration(&src.image, &tgt.image, &cfg)?;
    let mut meta = ModelMetadata::new(src.image.grid().clone(), cfg, Some(&report));
    meta.source = Some(src.id.clone());
    meta.target = Some(tgt.id.clone());
    write_model(&path, &model, &meta)?;
    Ok(model)
}

fn write_pair(
    dir: &Path,
    id: &str,
    image: &Volume,
    mask: &LabelMask,
) -> Result<(PathBuf, PathBuf)> {
    let ip = dir.join(format!("{id}_image.nii.gz"));
    let mp = dir.join(format!("{id}_mask.nii.gz"));
    write_volume(&ip, image)?;
    write_mask(&mp, mask)?;
    Ok((ip, mp))
}

fn skip(id: &str, kind: SampleKind, err: &Error) -> SkipRecord {
    warn!("skipping {id}: {err}");
    SkipRecord {
        id: id.to_string(),
        kind,
        reason: format!("{}: {err}", err.code_name()),
    }
}

/// Builds both pools under `out_dir` and writes `manifest.json` there.
///
/// Work is spread over `workers` threads (all cores when 0); every job
/// draws from its own seed so the result does not depend on scheduling.
pub fn build_pool(cfg: &RunConfig, out_dir: &Path, workers: usize) -> Result<PoolManifest> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| build(cfg, out_dir))
}

fn build(cfg: &RunConfig, out_dir: &Path) -> Result<PoolManifest> {
    let tumors = load_tumors(cfg)?;
    let healthy = load_healthy(cfg)?;
    let ids: Vec<String> = tumors.iter().map(|t| t.id.clone()).collect();
    let hids: Vec<String> = healthy.iter().map(|h| h.id.clone()).collect();

    let (models_dir, spatial_dir, semantic_dir) = (
        out_dir.join("models"),
        out_dir.join("spatial"),
        out_dir.join("semantic"),
    );
    for d in [&models_dir, &spatial_dir, &semantic_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let mut entries: Vec<SampleEntry> = cfg
        .pool
        .tumor
        .iter()
        .map(|c| {
            SampleEntry::real(
                c.id.clone(),
                c.image.to_string_lossy(),
                c.mask.to_string_lossy(),
            )
        })
        .collect();
    let mut skipped = Vec::new();

    let sampler = BetaSampler::new(child_seed(cfg.seed, SPATIAL_SEED));
    let jobs = plan_spatial_pool(&ids, cfg.pool.k_spatial, &sampler)?;
    let reg_hash = config_hash(&cfg.registration);

    let mut pairs: Vec<(usize, usize)> = jobs
        .iter()
        .flat_map(|j| j.targets.map(|t| (j.source, t)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    info!("training {} pairwise velocity models", pairs.len());
    let models: BTreeMap<(usize, usize), Result<VelocityFieldModel>> = pairs
        .par_iter()
        .map(|&(s, t)| {
            (
                (s, t),
                pair_model(
                    &tumors[s],
                    &tumors[t],
                    &cfg.registration,
                    &reg_hash,
                    &models_dir,
                ),
            )
        })
        .collect();

    let spatial: Vec<std::result::Result<SampleEntry, SkipRecord>> = jobs
        .par_iter()
        .map(|job| {
            let src = &tumors[job.source];
            let run = || -> Result<SampleEntry> {
                let m1 = models[&(job.source, job.targets[0])]
                    .as_ref()
                    .map_err(clone_err)?;
                let m2 = models[&(job.source, job.targets[1])]
                    .as_ref()
                    .map_err(clone_err)?;
                let field = integrate_mixed(
                    m1,
                    m2,
                    job.weights,
                    src.image.grid(),
                    cfg.registration.steps,
                )?;
                let (img, mask) = apply_deformation(&src.image, &src.mask, &field)?;
                let (ip, mp) = write_pair(&spatial_dir, &job.id, &img, &mask)?;
                Ok(SampleEntry::synthetic(
                    job.id.clone(),
                    rel(&ip, out_dir),
                    rel(&mp, out_dir),
                    Provenance::Spatial {
                        source: src.id.clone(),
                        targets: job.targets.map(|t| tumors[t].id.clone()),
                        weights: job.weights,
                        seed: job.seed,
                        config_hash: reg_hash.clone(),
                    },
                ))
            };
            run().map_err(|e| skip(&job.id, SampleKind::SpatialAug, &e))
        })
        .collect();

    let inj_hash = config_hash(&cfg.injection);
    let sjobs = if tumors.is_empty() || healthy.is_empty() {
        Vec::new()
    } else {
        plan_semantic_pool(
            &ids,
            &hids,
            cfg.pool.k_semantic,
            child_seed(cfg.seed, SEMANTIC_SEED),
        )?
    };
    let semantic: Vec<std::result::Result<SampleEntry, SkipRecord>> = sjobs
        .par_iter()
        .map(|job| {
            let (t, h) = (&tumors[job.lesion], &healthy[job.healthy]);
            let run = || -> Result<SampleEntry> {
                let icfg = mixaug_core::lesion::InjectionConfig {
                    seed: job.seed,
                    ..cfg.injection.clone()
                };
                let out = inject_lesion(
                    &t.image,
                    &t.mask,
                    t.brain.as_ref(),
                    &h.image,
                    &h.brain,
                    &icfg,
                )?;
                let (ip, mp) = write_pair(&semantic_dir, &job.id, &out.image, &out.mask)?;
                Ok(SampleEntry::synthetic(
                    job.id.clone(),
                    rel(&ip, out_dir),
                    rel(&mp, out_dir),
                    Provenance::Semantic {
                        lesion: t.id.clone(),
                        healthy: h.id.clone(),
                        seed: job.seed,
                        config_hash: inj_hash.clone(),
                    },
                ))
            };
            run().map_err(|e| skip(&job.id, SampleKind::SemanticAug, &e))
        })
        .collect();

    for r in spatial.into_iter().chain(semantic) {
        match r {
            Ok(e) => entries.push(e),
            Err(s) => skipped.push(s),
        }
    }
    let manifest = PoolManifest::new(cfg.seed, cfg.pool.r_real, entries, skipped)?;
    write_manifest(out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::Core(c) => Error::Core(c.clone()),
        other => Error::Format {
            path: PathBuf::new(),
            message: format!("pair model unavailable: {other}"),
        },
    }
}

pub fn write_manifest(path: impl AsRef<Path>, m: &PoolManifest) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_vec_pretty(m).expect("manifest serializes");
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<PoolManifest> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}
