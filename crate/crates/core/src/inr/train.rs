use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, MlpCache, ModelArch, VelocityFieldModel};
use crate::error::{bail, Error, Result};
use crate::linalg::Vec3;
use crate::rng;
use crate::volume::{sample_trilinear_with_gradient, Volume};

/// Similarity term between the warped source and the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    /// Mean squared intensity difference.
    #[default]
    Mse,
    /// `1 - NCC`, with the correlation taken over the collocation batch.
    Ncc,
}

/// Hyper-parameters of pairwise velocity-field training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    /// Euler steps `K`.
    pub steps: usize,
    /// Weight `λ` of the velocity-gradient penalty.
    pub reg_weight: f64,
    pub iterations: usize,
    /// Collocation points per iteration.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub similarity: Similarity,
    pub arch: ModelArch,
    /// Central-difference step for the velocity Jacobian, in normalized
    /// coordinates.
    pub reg_step: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            steps: 8,
            reg_weight: 0.01,
            iterations: 2000,
            batch_size: 4096,
            learning_rate: 1e-3,
            seed: 0,
            similarity: Similarity::Mse,
            arch: ModelArch::default(),
            reg_step: 0.01,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            bail!(Argument, "steps must be ≥ 1");
        }
        if !(self.reg_weight >= 0.0 && self.reg_weight.is_finite()) {
            bail!(Argument, "regularization weight must be ≥ 0");
        }
        if self.iterations == 0 {
            bail!(Argument, "iterations must be ≥ 1");
        }
        if self.batch_size == 0 {
            bail!(Argument, "batch size must be ≥ 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bail!(Argument, "learning rate must be positive");
        }
        if !(self.reg_step > 0.0 && self.reg_step.is_finite()) {
            bail!(Argument, "regularization step must be positive");
        }
        self.arch.validate()
    }
}

/// Target-grid voxels and regularization times used for one loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Collocation {
    pub points: Vec<[usize; 3]>,
    /// Time at which the velocity Jacobian is penalized, one per point.
    pub reg_times: Vec<f64>,
}

/// Uniform draw of `n` voxels of a `dims` grid (with replacement) plus uniform
/// regularization times, from stream `stream` of `seed`.
pub fn sample_collocation(dims: [usize; 3], n: usize, seed: u64, stream: u64) -> Collocation {
    let mut r = rng::stream(seed, stream);
    let mut points = Vec::with_capacity(n);
    let mut reg_times = Vec::with_capacity(n);
    for _ in 0..n {
        points.push(dims.map(|d| r.random_range(0..d)));
        reg_times.push(r.random::<f64>());
    }
    Collocation { points, reg_times }
}

/// Loss trace of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Mini-batch loss at every iteration, before the update.
    pub loss_history: Vec<f64>,
    /// Loss of the initial model on the fixed evaluation batch.
    pub initial_loss: f64,
    /// Loss of the returned model on the fixed evaluation batch.
    pub final_loss: f64,
    /// True when training did not improve on the initial model and the
    /// initial parameters were returned.
    pub reverted: bool,
}

struct Workspace {
    steps: Vec<MlpCache>,
    path: Vec<Vec3>,
    plus: MlpCache,
    minus: MlpCache,
    grad_in: Vec<f64>,
}

impl Workspace {
    fn new(model: &VelocityFieldModel, steps: usize) -> Self {
        Self {
            steps: (0..steps).map(|_| model.new_cache()).collect(),
            path: alloc::vec![[0.0; 3]; steps + 1],
            plus: model.new_cache(),
            minus: model.new_cache(),
            grad_in: alloc::vec![0.0; model.encoding().output_dim()],
        }
    }
}

fn check_pair(src: &Volume, tgt: &Volume, model: &VelocityFieldModel) -> Result<()> {
    if !src.grid().same_geometry(tgt.grid(), 1e-6) {
        bail!(Argument, "source and target must share grid geometry");
    }
    if model.domain() != src.dims() {
        bail!(
            Argument,
            "model domain {:?} does not match volume dims {:?}",
            model.domain(),
            src.dims()
        );
    }
    Ok(())
}

/// Rolls one collocation point through the Euler steps, caching activations
/// in `ws`. Returns `φ_K`.
fn forward_path(model: &VelocityFieldModel, x0: Vec3, steps: usize, ws: &mut Workspace) -> Vec3 {
    let dt = 1.0 / steps as f64;
    ws.path[0] = x0;
    for k in 0..steps {
        let t = k as f64 / steps as f64;
        let p = ws.path[k];
        let v = model.velocity_with(p, t, &mut ws.steps[k]);
        ws.path[k + 1] = [p[0] + v[0] * dt, p[1] + v[1] * dt, p[2] + v[2] * dt];
    }
    ws.path[steps]
}

/// Adjoint pass for one path: given `dL/dφ_K`, accumulates `dL/dθ`.
fn backward_path(
    model: &VelocityFieldModel,
    mut adjoint: Vec3,
    steps: usize,
    ws: &mut Workspace,
    grads: &mut [f64],
) {
    let dt = 1.0 / steps as f64;
    let scale = model.voxel_to_normalized_scale();
    for k in (0..steps).rev() {
        let g_out = adjoint.map(|a| a * dt);
        let cache = &mut ws.steps[k];
        model
            .mlp()
            .backward(cache, &g_out, 1.0, grads, Some(&mut ws.grad_in));
        let dc = model
            .encoding()
            .backward_spatial(cache.input(), &ws.grad_in);
        for a in 0..3 {
            adjoint[a] += dc[a] * scale[a];
        }
    }
}

fn evaluate(
    model: &VelocityFieldModel,
    src: &Volume,
    tgt: &Volume,
    batch: &Collocation,
    cfg: &RegistrationConfig,
    mut grads: Option<&mut [f64]>,
) -> f64 {
    let steps = cfg.steps;
    let n = batch.points.len();
    let inv_n = 1.0 / n as f64;
    let mut ws = Workspace::new(model, steps);
    let target = |p: [usize; 3]| f64::from(tgt.get(p[0], p[1], p[2]));
    let start = |p: [usize; 3]| p.map(|c| c as f64);

    let sim = match cfg.similarity {
        Similarity::Mse => {
            let mut sum = 0.0;
            for p in &batch.points {
                let end = forward_path(model, start(*p), steps, &mut ws);
                let (w, dw) = sample_trilinear_with_gradient(src, end);
                let r = w - target(*p);
                sum += r * r;
                if let Some(g) = grads.as_deref_mut() {
                    let c = 2.0 * r * inv_n;
                    backward_path(model, dw.map(|d| d * c), steps, &mut ws, g);
                }
            }
            sum * inv_n
        }
        Similarity::Ncc => {
            let mut warped = Vec::with_capacity(n);
            let mut slopes = Vec::with_capacity(n);
            for p in &batch.points {
                let end = forward_path(model, start(*p), steps, &mut ws);
                let (w, dw) = sample_trilinear_with_gradient(src, end);
                warped.push(w);
                slopes.push(dw);
            }
            let fixed: Vec<f64> = batch.points.iter().map(|p| target(*p)).collect();
            let ma = warped.iter().sum::<f64>() * inv_n;
            let mb = fixed.iter().sum::<f64>() * inv_n;
            let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
            for (a, b) in warped.iter().zip(&fixed) {
                sab += (a - ma) * (b - mb);
                saa += (a - ma) * (a - ma);
                sbb += (b - mb) * (b - mb);
            }
            const EPS: f64 = 1e-12;
            let denom = libm::sqrt((saa + EPS) * (sbb + EPS));
            let ncc = sab / denom;
            if let Some(g) = grads.as_deref_mut() {
                for (i, p) in batch.points.iter().enumerate() {
                    // d(1 - ncc)/da_i
                    let da = -((fixed[i] - mb) / denom - ncc * (warped[i] - ma) / (saa + EPS));
                    forward_path(model, start(*p), steps, &mut ws);
                    backward_path(model, slopes[i].map(|d| d * da), steps, &mut ws, g);
                }
            }
            1.0 - ncc
        }
    };

    if cfg.reg_weight == 0.0 {
        return sim;
    }
    let h = cfg.reg_step;
    let scale = model.voxel_to_normalized_scale();
    let mut reg = 0.0;
    for (p, t) in batch.points.iter().zip(&batch.reg_times) {
        let c = model.normalize(start(*p), *t);
        for axis in 0..3 {
            if scale[axis] == 0.0 {
                continue;
            }
            let q = scale[axis] / (2.0 * h);
            let mut cp = c;
            let mut cm = c;
            cp[axis] += h;
            cm[axis] -= h;
            let vp = model.velocity_normalized(cp, &mut ws.plus);
            let vm = model.velocity_normalized(cm, &mut ws.minus);
            let col: Vec3 = core::array::from_fn(|i| (vp[i] - vm[i]) * q);
            reg += col.iter().map(|j| j * j).sum::<f64>();
            if let Some(g) = grads.as_deref_mut() {
                let coeff = 2.0 * q * cfg.reg_weight * inv_n;
                let gp = col.map(|j| j * coeff);
                let gm = gp.map(|v| -v);
                model.mlp().backward(&mut ws.plus, &gp, 1.0, g, None);
                model.mlp().backward(&mut ws.minus, &gm, 1.0, g, None);
            }
        }
    }
    sim + cfg.reg_weight * reg * inv_n
}

/// Loss `L_sim + λ L_reg` of `model` on `batch`.
pub fn loss_value(
    model: &VelocityFieldModel,
    src: &Volume,
    tgt: &Volume,
    batch: &Collocation,
    cfg: &RegistrationConfig,
) -> Result<f64> {
    check_pair(src, tgt, model)?;
    Ok(evaluate(model, src, tgt, batch, cfg, None))
}

/// Loss and its gradient with respect to every network parameter, in the
/// layout of [`Mlp::params`](super::Mlp::params).
pub fn loss_and_gradient(
    model: &VelocityFieldModel,
    src: &Volume,
    tgt: &Volume,
    batch: &Collocation,
    cfg: &RegistrationConfig,
) -> Result<(f64, Vec<f64>)> {
    check_pair(src, tgt, model)?;
    let mut grads = alloc::vec![0.0; model.mlp().num_params()];
    let loss = evaluate(model, src, tgt, batch, cfg, Some(&mut grads));
    Ok((loss, grads))
}

/// Stream id of the fixed evaluation batch.
const EVAL_STREAM: u64 = u64::MAX;

/// Fits a velocity model whose flow warps `src` onto `tgt`.
///
/// Each iteration draws a fresh collocation batch (stream = iteration index)
/// and takes one Adam step on `L_sim + λ L_reg`. Parameters are rounded to
/// `f32` precision on return. If the final model does not improve on the
/// initial one over a fixed evaluation batch, the initial model is returned.
pub fn train_registration(
    src: &Volume,
    tgt: &Volume,
    cfg: &RegistrationConfig,
) -> Result<(VelocityFieldModel, TrainingReport)> {
    cfg.validate()?;
    let initial = VelocityFieldModel::new(&cfg.arch, src.dims(), cfg.seed)?;
    check_pair(src, tgt, &initial)?;
    let dims = src.dims();
    let eval_batch = sample_collocation(dims, cfg.batch_size, cfg.seed, EVAL_STREAM);
    let initial_loss = evaluate(&initial, src, tgt, &eval_batch, cfg, None);
    if !initial_loss.is_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }

    let mut model = initial.clone();
    let mut opt = Adam::new(model.mlp().num_params(), cfg.learning_rate);
    let mut grads = alloc::vec![0.0; model.mlp().num_params()];
    let mut history = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let batch = sample_collocation(dims, cfg.batch_size, cfg.seed, it as u64);
        grads.fill(0.0);
        let loss = evaluate(&model, src, tgt, &batch, cfg, Some(&mut grads));
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { iteration: it });
        }
        history.push(loss);
        opt.step(model.mlp_mut().params_mut(), &grads);
        if model.mlp().params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { iteration: it });
        }
    }
    model.quantize_to_f32();
    let mut final_loss = evaluate(&model, src, tgt, &eval_batch, cfg, None);
    let reverted = final_loss.is_nan() || final_loss > initial_loss;
    if reverted {
        model = initial;
        final_loss = initial_loss;
    }
    Ok((
        model,
        TrainingReport {
            loss_history: history,
            initial_loss,
            final_loss,
            reverted,
        },
    ))
}
