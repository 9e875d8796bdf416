//! Losses, the ray-batch training loop, checkpoints and the vanilla
//! ablation mode.

mod checkpoint;
mod loss;

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdamConfig, AutodiffError, Graph, LrSchedule, OptimizerState, ParamId, Real, Tensor};
use crate::dataset::{Dataset, DatasetError, DatasetManifest};
use crate::fields::{EncodingConfig, FieldConfig, Model};
use crate::io::IoError;
use crate::render::{generate_rays, render_batch, BatchOutput, Ray, RenderConfig, RenderError};

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use loss::{offset_loss, render_loss, total_loss};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("metrics log {path}: {message}")]
    Log { path: PathBuf, message: String },
    #[error("non-finite loss at iteration {iteration} (lr {lr:.3e}); parameter norms: {norms}")]
    NonFinite { iteration: u64, lr: f64, norms: String },
}

/// Which passes contribute offsets to the regularizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetScope {
    Coarse,
    Fine,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rays_per_batch: usize,
    pub iterations: u64,
    /// Weight of the offset regularizer.
    pub epsilon: f64,
    pub learning_rate: f64,
    /// Learning rate reached (exponentially) at the last iteration.
    pub final_learning_rate: f64,
    pub adam: AdamConfig,
    pub field: FieldConfig,
    pub render: RenderConfig,
    /// Drop the glass network (straight rays).
    pub disable_glass: bool,
    /// Drop the view-dependent branch (`C = C_vi`).
    pub disable_view_dependent: bool,
    /// Iterations during which the offset head is not updated.
    pub warmup_freeze: u64,
    /// Supervise the coarse pass too.
    pub coarse_loss: bool,
    pub offset_scope: OffsetScope,
    /// Jitter sample positions during training.
    pub perturb: bool,
    pub log_every: u64,
    /// 0 disables periodic checkpoints (the final one is always written).
    pub checkpoint_every: u64,
    pub seed: u64,
}

impl TrainConfig {
    /// 256 rays, 32 + 8 + 8 samples, 5k iterations, width 32.
    pub fn desk() -> Self {
        Self {
            rays_per_batch: 256,
            iterations: 5000,
            epsilon: 1e-5,
            learning_rate: 2e-3,
            final_learning_rate: 2e-4,
            adam: AdamConfig::default(),
            field: FieldConfig {
                width: 32,
                feature_dim: 64,
                position_encoding: EncodingConfig::new(10, true),
                direction_encoding: EncodingConfig::new(4, true),
                density_bias: -3.0,
                gate_bias: -3.0,
                ..FieldConfig::default()
            },
            render: RenderConfig {
                coarse_samples: 32,
                glass_samples: 8,
                vi_samples: 8,
                chunk: 1024,
                ..RenderConfig::default()
            },
            disable_glass: false,
            disable_view_dependent: false,
            warmup_freeze: 500,
            coarse_loss: true,
            offset_scope: OffsetScope::Both,
            perturb: true,
            log_every: 10,
            checkpoint_every: 1000,
            seed: 0,
        }
    }

    /// 1024 rays, 128 + 32 + 32 samples, 200k iterations.
    pub fn large() -> Self {
        Self {
            rays_per_batch: 1024,
            iterations: 200_000,
            learning_rate: 5e-4,
            final_learning_rate: 5e-5,
            field: FieldConfig {
                width: 256,
                ..FieldConfig::default()
            },
            render: RenderConfig::default(),
            log_every: 100,
            checkpoint_every: 10_000,
            ..Self::desk()
        }
    }

    /// Vanilla radiance field: no glass network, no view-dependent branch.
    pub fn vanilla(mut self) -> Self {
        self.disable_glass = true;
        self.disable_view_dependent = true;
        self
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            initial: self.learning_rate,
            final_lr: self.final_learning_rate,
            decay_steps: self.iterations,
        }
    }

    /// Render settings with the ablation flags applied.
    pub fn render_config(&self) -> RenderConfig {
        RenderConfig {
            use_glass: !self.disable_glass,
            view_dependent: !self.disable_view_dependent,
            ..self.render.clone()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be ≥ 0");
        }
        if self.rays_per_batch == 0 || self.render.coarse_samples < 2 {
            return bad("rays per batch must be ≥ 1 and coarse samples ≥ 2");
        }
        if !(self.learning_rate > 0.0 && self.final_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.log_every == 0 {
            return bad("log_every must be ≥ 1");
        }
        Ok(())
    }

    /// Fills in everything that depends on the dataset: the sampling
    /// interval and box, and the position normalization (box centre and
    /// half its longest side).
    pub fn fitted_to(&self, manifest: &DatasetManifest) -> Self {
        let mut c = self.clone();
        c.render.bounds = manifest.bounds();
        if let Some(b) = manifest.aabb {
            c.field.center = b.center().to_array();
            c.field.scale = 0.5 * b.extent();
        }
        c
    }

    /// Applies a partial JSON configuration on top of `self`. Objects merge
    /// key by key; any other value replaces the default. Unknown keys are
    /// rejected so typos do not silently fall back to defaults.
    pub fn with_overrides(&self, patch: &serde_json::Value) -> Result<Self, TrainError> {
        let mut base = serde_json::to_value(self).map_err(|e| TrainError::Config(e.to_string()))?;
        merge_json(&mut base, patch, "")?;
        let merged: Self = serde_json::from_value(base).map_err(|e| TrainError::Config(e.to_string()))?;
        merged.validate()?;
        Ok(merged)
    }

    /// Whether a parameter is updated at `iteration`.
    pub fn is_trainable(&self, name: &str, iteration: u64) -> bool {
        if name.starts_with("glass.") {
            return !self.disable_glass && (iteration >= self.warmup_freeze || !name.starts_with("glass.offset."));
        }
        if self.disable_view_dependent {
            let vd_head = ["decoder.", "gate."].iter().any(|p| name.starts_with(p))
                || [".feature.", ".vd_hidden.", ".density_vd.", ".feature_out."]
                    .iter()
                    .any(|p| name.contains(p));
            return !vd_head;
        }
        true
    }
}

fn merge_json(base: &mut serde_json::Value, patch: &serde_json::Value, path: &str) -> Result<(), TrainError> {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                let key = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                let slot = b
                    .get_mut(k)
                    .ok_or_else(|| TrainError::Config(format!("unknown configuration key `{key}`")))?;
                merge_json(slot, v, &key)?;
            }
            Ok(())
        }
        (b, p) => {
            *b = p.clone();
            Ok(())
        }
    }
}

/// Scalar loss terms of one batch.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: crate::autodiff::Var,
    pub render: crate::autodiff::Var,
    pub offset: crate::autodiff::Var,
}

/// Renders `rays` and builds the training objective against `targets`
/// (`R·3` RGB values).
pub fn batch_loss<T: Real, R: Rng>(
    g: &Graph<T>,
    model: &Model<T>,
    rays: &[Ray],
    targets: &[f64],
    config: &TrainConfig,
    rng: Option<&mut R>,
    fine_t: Option<&[Vec<f64>]>,
) -> Result<(BatchOutput, LossTerms), TrainError> {
    let out = render_batch(g, model, rays, &config.render_config(), rng, fine_t)?;
    let target = g.constant(Tensor::from_f64(&[rays.len(), 3], targets)?);
    let mut render = render_loss(g, out.final_pass().color, target)?;
    if config.coarse_loss && out.fine.is_some() {
        render = g.add(render, render_loss(g, out.coarse.color, target)?)?;
    }
    let mut offsets = Vec::new();
    if matches!(config.offset_scope, OffsetScope::Coarse | OffsetScope::Both) {
        offsets.extend(out.coarse.offsets);
    }
    if matches!(config.offset_scope, OffsetScope::Fine | OffsetScope::Both) {
        offsets.extend(out.fine.as_ref().and_then(|f| f.offsets));
    }
    let offset = offset_loss(g, &offsets)?;
    let total = total_loss(g, render, offset, config.epsilon)?;
    Ok((out, LossTerms { total, render, offset }))
}

/// One row of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: u64,
    pub total_loss: f64,
    pub render_loss: f64,
    pub offset_loss: f64,
    pub lr: f64,
    /// Seconds since the run (or resumed segment) started; omitted in
    /// deterministic mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Where `metrics.csv` and `checkpoint.bin` go; nothing is written when
    /// absent.
    pub out_dir: Option<&'a Path>,
    pub resume: Option<Checkpoint>,
    /// Leave wall-clock time out of the log so identical runs produce
    /// identical files.
    pub deterministic: bool,
    /// Stop (and checkpoint) after this many iterations, as if the run had
    /// been interrupted; the schedule still spans `config.iterations`.
    pub stop_at: Option<u64>,
    pub progress: Option<&'a mut dyn FnMut(&LogRow)>,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

fn param_norms(model: &Model<f32>) -> String {
    model
        .store
        .ids()
        .map(|id| format!("{}={:.4e}", model.store.name(id), model.store.get(id).norm()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// The random stream of one iteration, independent of all earlier ones so a
/// resumed run draws exactly what an uninterrupted one would.
pub fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng
}

/// Draws `count` pixels uniformly from one uniformly chosen training view.
pub fn sample_batch(dataset: &Dataset, count: usize, rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize)>, Vec<f64>) {
    let view = rng.gen_range(0..dataset.views.len());
    let v = &dataset.views[view];
    let (w, h) = (v.camera.width, v.camera.height);
    let mut pixels = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count * 3);
    for _ in 0..count {
        let (i, j) = (rng.gen_range(0..w), rng.gen_range(0..h));
        pixels.push((i, j));
        let k = (j * w + i) * 3;
        targets.extend_from_slice(&v.rgb[k..k + 3]);
    }
    (view, pixels, targets)
}

/// Trains on the views of `dataset` (normally its training split).
pub fn train(dataset: &Dataset, config: &TrainConfig, options: TrainOptions<'_>) -> Result<TrainOutcome, TrainError> {
    let TrainOptions {
        out_dir,
        resume,
        deterministic,
        stop_at,
        mut progress,
    } = options;
    let (config, mut model, mut optimizer, start) = match resume {
        Some(ck) => (ck.config, ck.model, ck.optimizer, ck.iteration),
        None => {
            config.validate()?;
            let config = config.fitted_to(&dataset.manifest);
            let model = Model::<f32>::new(FieldConfig {
                seed: config.seed,
                ..config.field.clone()
            });
            let optimizer = OptimizerState::new(&model.store, config.adam, config.schedule());
            (config, model, optimizer, 0)
        }
    };
    let render_cfg = config.render_config();
    let names: Vec<(ParamId, String)> = model
        .store
        .ids()
        .map(|id| (id, model.store.name(id).to_string()))
        .collect();

    let mut writer = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
            let path = dir.join(METRICS_FILE);
            let fresh = start == 0 || !path.exists();
            let file = OpenOptions::new()
                .create(true)
                .write(true)
                .append(!fresh)
                .truncate(fresh)
                .open(&path)
                .map_err(|e| IoError::file(&path, e))?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
            if fresh {
                let mut header = vec!["iteration", "total_loss", "render_loss", "offset_loss", "lr"];
                if !deterministic {
                    header.push("wall_time");
                }
                w.write_record(&header).map_err(|e| log_err(&path, e))?;
            }
            Some((w, path))
        }
        None => None,
    };

    let end = stop_at.map_or(config.iterations, |s| s.min(config.iterations));
    let started = Instant::now();
    let mut log = Vec::new();
    for it in start..end {
        let mut rng = iteration_rng(config.seed, it);
        let (view, pixels, targets) = sample_batch(dataset, config.rays_per_batch, &mut rng);
        let rays = generate_rays(&dataset.views[view].camera, &pixels, &render_cfg.bounds)?;
        let lr = optimizer.current_lr();

        let g = Graph::<f32>::new();
        let jitter = config.perturb.then_some(&mut rng);
        let (_, terms) = batch_loss(&g, &model, &rays, &targets, &config, jitter, None)?;
        let value = |v| g.value(v).item().map_or(f64::NAN, |x: f32| x as f64);
        let (total, render, offset) = (value(terms.total), value(terms.render), value(terms.offset));
        if !total.is_finite() {
            return Err(TrainError::NonFinite {
                iteration: it,
                lr,
                norms: param_norms(&model),
            });
        }
        model.store.zero_grad();
        g.backward_into(terms.total, &mut model.store)?;
        drop(g);
        let trainable: Vec<ParamId> = names
            .iter()
            .filter(|(_, n)| config.is_trainable(n, it))
            .map(|(id, _)| *id)
            .collect();
        optimizer.update(&mut model.store, &trainable, lr)?;

        let done = it + 1;
        if done % config.log_every == 0 || done == config.iterations {
            let row = LogRow {
                iteration: done,
                total_loss: total,
                render_loss: render,
                offset_loss: offset,
                lr,
                wall_time: (!deterministic).then(|| started.elapsed().as_secs_f64()),
            };
            if let Some((w, path)) = writer.as_mut() {
                let mut rec = vec![
                    row.iteration.to_string(),
                    format!("{:e}", row.total_loss),
                    format!("{:e}", row.render_loss),
                    format!("{:e}", row.offset_loss),
                    format!("{:e}", row.lr),
                ];
                if let Some(t) = row.wall_time {
                    rec.push(format!("{t:.3}"));
                }
                w.write_record(&rec).map_err(|e| log_err(path, e))?;
                w.flush().map_err(|e| log_err(path, e.into()))?;
            }
            if let Some(p) = progress.as_mut() {
                p(&row);
            }
            log.push(row);
        }
        if let Some(dir) = out_dir {
            if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done < config.iterations {
                snapshot(&config, &model, &optimizer, done).save(&dir.join(CHECKPOINT_FILE))?;
            }
        }
    }

    let checkpoint = snapshot(&config, &model, &optimizer, end.max(start));
    if let Some(dir) = out_dir {
        checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    }
    Ok(TrainOutcome { checkpoint, log })
}

fn snapshot(config: &TrainConfig, model: &Model<f32>, optimizer: &OptimizerState<f32>, iteration: u64) -> Checkpoint {
    Checkpoint {
        iteration,
        config: config.clone(),
        model: model.clone(),
        optimizer: optimizer.clone(),
    }
}

fn log_err(path: &Path, e: csv::Error) -> TrainError {
    TrainError::Log {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}
