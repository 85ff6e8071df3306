//! Command-line front end. Every subcommand writes a JSON result summary
//! into its output directory recording the effective configuration, seeds
//! and SHA-256 digests of its inputs and outputs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use mixaug_core::inr::{integrate, train_registration, RegistrationConfig, Similarity};
use mixaug_core::lesion::inject_lesion;
use mixaug_core::mixing::{apply_deformation, integrate_mixed, BetaSampler, MixWeights};
use mixaug_core::pool::BatchSampler;
use mixaug_core::rng;
use mixaug_core::volume::{
    estimate_brain_mask, resample_mask, resample_volume, zscore_normalize, Interpolation, LabelMask,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::digest::{config_hash, file_sha256};
use crate::error::{Error, Result};
use crate::field_file::write_displacement;
use crate::model_file::{read_metadata, read_model, write_model, ModelMetadata};
use crate::nifti::{read_mask, read_volume, write_mask, write_volume};
use crate::pool::{build_pool, read_manifest, MANIFEST_FILE};
use crate::transform_file::write_transform;

pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(
    name = "mixaug",
    version,
    about = "Spatial and semantic augmentation of 3D MRI volumes"
)]
pub struct Cli {
    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    /// Worker threads for per-file and per-entry work (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resample volumes to an isotropic grid, optionally z-scoring them.
    Preprocess(PreprocessArgs),
    /// Train a velocity model warping a source onto a target.
    Register(RegisterArgs),
    /// Mix two velocity models and warp an image/mask pair.
    Mix(MixArgs),
    /// Transplant a lesion into a healthy volume.
    Inject(InjectArgs),
    /// Build the spatial and semantic pools from a run configuration.
    Pool(PoolArgs),
    /// Draw stratified batches from a pool manifest.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output_dir: PathBuf,
    /// Isotropic voxel size in mm.
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    /// Z-score intensities over the nonzero voxels after resampling.
    #[arg(long)]
    pub zscore: bool,
    /// Treat inputs as label masks (nearest-neighbour resampling).
    #[arg(long, conflicts_with = "zscore")]
    pub labels: bool,
}

#[derive(Debug, Args)]
pub struct RegistrationFlags {
    /// TOML run configuration; its `registration` table is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Weight of the velocity-gradient penalty.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_parser = parse_similarity)]
    pub similarity: Option<Similarity>,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Source label mask, warped alongside the image.
    #[arg(long)]
    pub source_mask: Option<PathBuf>,
    #[arg(short, long)]
    pub output_dir: PathBuf,
    #[command(flatten)]
    pub reg: RegistrationFlags,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub model1: PathBuf,
    #[arg(long)]
    pub model2: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Weight of the first model; the second gets 1 - w.
    #[arg(
        long,
        conflicts_with = "beta_seed",
        required_unless_present = "beta_seed"
    )]
    pub weight: Option<f64>,
    /// Draw the weight from Beta(2, 2) with this seed.
    #[arg(long)]
    pub beta_seed: Option<u64>,
    /// Draw index within the Beta stream.
    #[arg(long, default_value_t = 0, requires = "beta_seed")]
    pub beta_index: u64,
    /// Euler steps (default: the value recorded with the first model).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(short, long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[arg(long)]
    pub lesion_image: PathBuf,
    #[arg(long)]
    pub lesion_mask: PathBuf,
    #[arg(long)]
    pub lesion_brain: Option<PathBuf>,
    #[arg(long)]
    pub healthy: PathBuf,
    /// Healthy brain mask (estimated from the image when omitted).
    #[arg(long)]
    pub healthy_brain: Option<PathBuf>,
    #[arg(short, long)]
    pub output_dir: PathBuf,
    /// TOML run configuration; its `injection` table is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub max_translation: Option<f64>,
    #[arg(long)]
    pub max_rotation_deg: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(short, long)]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k_spatial: Option<usize>,
    #[arg(long)]
    pub k_semantic: Option<usize>,
    #[arg(long)]
    pub r_real: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub batch_size: usize,
    /// Real share per batch (default: the manifest's).
    #[arg(long)]
    pub r_real: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub batches: usize,
    /// Directory for `batches.txt` and the summary; stdout only when omitted.
    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
}

fn parse_similarity(s: &str) -> std::result::Result<Similarity, String> {
    match s {
        "mse" => Ok(Similarity::Mse),
        "ncc" => Ok(Similarity::Ncc),
        _ => Err(format!("unknown similarity `{s}` (expected mse or ncc)")),
    }
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

fn digests(paths: &[&Path]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.to_string_lossy().into_owned(),
                sha256: file_sha256(p)?,
            })
        })
        .collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_summary(
    dir: &Path,
    command: &str,
    body: Value,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let mut summary = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": digests(inputs)?,
        "outputs": digests(outputs)?,
    });
    if let (Value::Object(s), Value::Object(b)) = (&mut summary, body) {
        s.extend(b);
    }
    write_json(&dir.join(SUMMARY_FILE), &summary)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

impl RegistrationFlags {
    fn resolve(&self) -> Result<RegistrationConfig> {
        let mut cfg = load_config(self.config.as_deref())?.registration;
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        set!(seed => seed, steps => steps, iterations => iterations, batch_size => batch_size,
             learning_rate => learning_rate, lambda => reg_weight, similarity => similarity);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Preprocess(a) => preprocess(&a),
        Command::Register(a) => register(&a),
        Command::Mix(a) => mix(&a),
        Command::Inject(a) => inject(&a),
        Command::Pool(a) => pool_cmd(&a, cli.workers),
        Command::Sample(a) => sample(&a),
    })
}

fn output_name(input: &Path) -> String {
    let name = input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .unwrap_or(&name);
    format!("{stem}.nii.gz")
}

fn preprocess_one(input: &Path, out: &Path, a: &PreprocessArgs) -> Result<()> {
    if a.labels {
        let mask = read_mask(input)?;
        let grid = mask.grid().resampled_isotropic(a.spacing)?;
        write_mask(out, &resample_mask(&mask, &grid))
    } else {
        let vol = read_volume(input)?;
        let grid = vol.grid().resampled_isotropic(a.spacing)?;
        let mut vol = resample_volume(&vol, &grid, Interpolation::Trilinear)?;
        if a.zscore {
            let fg = LabelMask::from_predicate(grid.clone(), |x, y, z| vol.get(x, y, z) != 0.0);
            let region = (fg.count_nonzero() > 1).then_some(&fg);
            vol = zscore_normalize(&vol, region)?;
        }
        write_volume(out, &vol)
    }
}

fn preprocess(a: &PreprocessArgs) -> Result<()> {
    if !(a.spacing.is_finite() && a.spacing > 0.0) {
        return Err(Error::Config(format!(
            "spacing must be positive, got {}",
            a.spacing
        )));
    }
    create_dir(&a.output_dir)?;
    let results: Vec<(PathBuf, Result<PathBuf>)> = a
        .inputs
        .par_iter()
        .map(|input| {
            let out = a.output_dir.join(output_name(input));
            let r = preprocess_one(input, &out, a).map(|()| out);
            (input.clone(), r)
        })
        .collect();

    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let mut worst: Option<Error> = None;
    for (input, r) in results {
        match r {
            Ok(out) => outputs.push(json!({
                "input": input,
                "input_sha256": file_sha256(&input)?,
                "output": out,
                "sha256": file_sha256(&out)?,
            })),
            Err(e) => {
                warn!("{}: {e}", input.display());
                failures
                    .push(json!({"input": input, "code": e.code_name(), "error": e.to_string()}));
                if worst
                    .as_ref()
                    .is_none_or(|w| e.exit_code() as u8 > w.exit_code() as u8)
                {
                    worst = Some(e);
                }
            }
        }
    }
    let report = json!({
        "command": "preprocess",
        "version": env!("CARGO_PKG_VERSION"),
        "spacing": [a.spacing, a.spacing, a.spacing],
        "zscore": a.zscore,
        "labels": a.labels,
        "outputs": outputs,
        "failures": failures,
    });
    write_json(&a.output_dir.join(REPORT_FILE), &report)?;
    match worst {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn register(a: &RegisterArgs) -> Result<()> {
    let cfg = a.reg.resolve()?;
    let src = read_volume(&a.source)?;
    let tgt = read_volume(&a.target)?;
    let src_mask = a.source_mask.as_ref().map(read_mask).transpose()?;
    create_dir(&a.output_dir)?;

    info!(
        "training on {:?} for {} iterations",
        src.dims(),
        cfg.iterations
    );
    let (model, report) = train_registration(&src, &tgt, &cfg)?;
    let model_path = a.output_dir.join("model.mxvf");
    write_model(
        &model_path,
        &model,
        &ModelMetadata::new(src.grid().clone(), cfg.clone(), Some(&report)),
    )?;

    let field = integrate(&model, src.grid(), cfg.steps)?;
    let mask = src_mask.unwrap_or_else(|| LabelMask::zeros(src.grid().clone()));
    let (warped, warped_mask) = apply_deformation(&src, &mask, &field)?;
    let image_path = a.output_dir.join("warped_image.nii.gz");
    let field_path = a.output_dir.join("displacement.f32");
    write_volume(&image_path, &warped)?;
    write_displacement(&field_path, &field)?;
    let mask_path = a.output_dir.join("warped_mask.nii.gz");
    let mut outputs = vec![
        model_path.as_path(),
        image_path.as_path(),
        field_path.as_path(),
    ];
    if a.source_mask.is_some() {
        write_mask(&mask_path, &warped_mask)?;
        outputs.push(&mask_path);
    }

    let mut inputs = vec![a.source.as_path(), a.target.as_path()];
    inputs.extend(a.source_mask.as_deref());
    write_summary(
        &a.output_dir,
        "register",
        json!({
            "config": cfg,
            "config_hash": config_hash(&cfg),
            "seed": cfg.seed,
            "initial_loss": report.initial_loss,
            "final_loss": report.final_loss,
            "reverted": report.reverted,
        }),
        &inputs,
        &outputs,
    )
}

fn mix(a: &MixArgs) -> Result<()> {
    let m1 = read_model(&a.model1)?;
    let m2 = read_model(&a.model2)?;
    let steps = match a.steps {
        Some(k) => k,
        None => read_metadata(&a.model1)?.config.steps,
    };
    let weights = match (a.weight, a.beta_seed) {
        (Some(w), _) => MixWeights::new(w)?,
        (None, Some(seed)) => BetaSampler::new(seed).draw(a.beta_index),
        (None, None) => {
            return Err(Error::Config(
                "either --weight or --beta-seed is required".into(),
            ))
        }
    };
    let image = read_volume(&a.image)?;
    let mask = read_mask(&a.mask)?;
    create_dir(&a.output_dir)?;

    let field = integrate_mixed(&m1, &m2, weights, image.grid(), steps)?;
    let (out_image, out_mask) = apply_deformation(&image, &mask, &field)?;
    let image_path = a.output_dir.join("image.nii.gz");
    let mask_path = a.output_dir.join("mask.nii.gz");
    write_volume(&image_path, &out_image)?;
    write_mask(&mask_path, &out_mask)?;
    write_summary(
        &a.output_dir,
        "mix",
        json!({
            "weights": weights,
            "beta_seed": a.beta_seed,
            "beta_index": a.beta_seed.map(|_| a.beta_index),
            "steps": steps,
        }),
        &[&a.model1, &a.model2, &a.image, &a.mask],
        &[&image_path, &mask_path],
    )
}

fn inject(a: &InjectArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?.injection;
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = a.$field { cfg.$field = v; })*
        };
    }
    set!(seed, tau, sigma, max_translation, max_rotation_deg, margin);
    cfg.validate()?;

    let lesion = read_volume(&a.lesion_image)?;
    let lesion_mask = read_mask(&a.lesion_mask)?;
    let lesion_brain = a.lesion_brain.as_ref().map(read_mask).transpose()?;
    let healthy = read_volume(&a.healthy)?;
    let healthy_brain = match &a.healthy_brain {
        Some(p) => read_mask(p)?,
        None => estimate_brain_mask(&healthy)?,
    };
    create_dir(&a.output_dir)?;

    let out = inject_lesion(
        &lesion,
        &lesion_mask,
        lesion_brain.as_ref(),
        &healthy,
        &healthy_brain,
        &cfg,
    )?;
    let image_path = a.output_dir.join("image.nii.gz");
    let mask_path = a.output_dir.join("mask.nii.gz");
    let transform_path = a.output_dir.join("transform.txt");
    write_volume(&image_path, &out.image)?;
    write_mask(&mask_path, &out.mask)?;
    write_transform(&transform_path, &out.registration.transform)?;

    let mut inputs = vec![
        a.lesion_image.as_path(),
        a.lesion_mask.as_path(),
        a.healthy.as_path(),
    ];
    inputs.extend(a.lesion_brain.as_deref());
    inputs.extend(a.healthy_brain.as_deref());
    write_summary(
        &a.output_dir,
        "inject",
        json!({
            "config": cfg,
            "config_hash": config_hash(&cfg),
            "seed": cfg.seed,
            "registration": {
                "status": out.registration.status,
                "mi_initial": out.registration.mi_initial,
                "mi_final": out.registration.mi_final,
            },
            "jitter": out.jitter,
            "attempts": out.attempts,
        }),
        &inputs,
        &[&image_path, &mask_path, &transform_path],
    )
}

fn pool_cmd(a: &PoolArgs, workers: usize) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(k) = a.k_spatial {
        cfg.pool.k_spatial = k;
    }
    if let Some(k) = a.k_semantic {
        cfg.pool.k_semantic = k;
    }
    if let Some(r) = a.r_real {
        cfg.pool.r_real = r;
    }
    cfg.validate()?;
    create_dir(&a.output_dir)?;
    let manifest = build_pool(&cfg, &a.output_dir, workers)?;
    let manifest_path = a.output_dir.join(MANIFEST_FILE);

    let mut inputs: Vec<&Path> = vec![&a.config];
    for c in &cfg.pool.tumor {
        inputs.extend([c.image.as_path(), c.mask.as_path()]);
        inputs.extend(c.brain.as_deref());
    }
    for c in &cfg.pool.healthy {
        inputs.push(&c.image);
        inputs.extend(c.brain.as_deref());
    }
    let synthetic: Vec<PathBuf> = manifest
        .entries()
        .iter()
        .filter(|e| e.provenance.is_some())
        .flat_map(|e| [a.output_dir.join(&e.image), a.output_dir.join(&e.mask)])
        .collect();
    let mut outputs: Vec<&Path> = vec![&manifest_path];
    outputs.extend(synthetic.iter().map(PathBuf::as_path));
    write_summary(
        &a.output_dir,
        "pool",
        json!({
            "config": cfg,
            "seed": cfg.seed,
            "registration_hash": config_hash(&cfg.registration),
            "injection_hash": config_hash(&cfg.injection),
            "counts": manifest.counts(),
            "skipped": manifest.skipped(),
        }),
        &inputs,
        &outputs,
    )
}

fn sample(a: &SampleArgs) -> Result<()> {
    let manifest = read_manifest(&a.manifest)?;
    let r_real = a.r_real.unwrap_or(manifest.r_real());
    let sampler = BatchSampler::new(&manifest, a.batch_size, r_real)?;
    let mut rng = rng::stream(a.seed, 0);
    let batches: Vec<Vec<&str>> = (0..a.batches)
        .map(|_| {
            sampler
                .sample(&mut rng)
                .into_iter()
                .map(|e| e.id.as_str())
                .collect()
        })
        .collect();
    let listing: String = batches.iter().map(|b| b.join(" ") + "\n").collect();

    let Some(dir) = &a.output_dir else {
        print!("{listing}");
        return Ok(());
    };
    create_dir(dir)?;
    let listing_path = dir.join("batches.txt");
    fs::write(&listing_path, &listing).map_err(|e| Error::io(&listing_path, e))?;
    write_summary(
        dir,
        "sample",
        json!({
            "batch_size": a.batch_size,
            "r_real": r_real,
            "real_per_batch": sampler.real_quota(),
            "seed": a.seed,
            "batches": batches,
        }),
        &[&a.manifest],
        &[&listing_path],
    )
}
