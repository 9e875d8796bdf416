use serde::{Deserialize, Serialize};

use super::{AutodiffError, ParamId, ParamStore, Real};

/// Adaptive-moment hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Exponential decay from `initial` to `final_lr` over `decay_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub final_lr: f64,
    pub decay_steps: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 5e-4,
            final_lr: 5e-5,
            decay_steps: 200_000,
        }
    }
}

impl LrSchedule {
    pub fn at(&self, step: u64) -> f64 {
        if self.decay_steps == 0 {
            return self.final_lr;
        }
        let frac = (step as f64 / self.decay_steps as f64).min(1.0);
        self.initial * (self.final_lr / self.initial).powf(frac)
    }
}

/// First/second moment accumulators for every parameter of a store.
#[derive(Clone, Debug)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub schedule: LrSchedule,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    /// Per-parameter update counts, used for bias correction so parameters
    /// that join late (e.g. after a freeze) start with a fresh correction.
    updates: Vec<u64>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(store: &ParamStore<T>, config: AdamConfig, schedule: LrSchedule) -> Self {
        let zeros = |id: ParamId| vec![T::zero(); store.get(id).len()];
        Self {
            config,
            schedule,
            step: 0,
            first: store.ids().map(zeros).collect(),
            second: store.ids().map(zeros).collect(),
            updates: vec![0; store.len()],
        }
    }

    /// Number of completed updates.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn current_lr(&self) -> f64 {
        self.schedule.at(self.step)
    }

    pub fn moments(&self, id: ParamId) -> (&[T], &[T]) {
        (&self.first[id.0], &self.second[id.0])
    }

    pub fn updates(&self, id: ParamId) -> u64 {
        self.updates[id.0]
    }

    /// Restores saved state (used by checkpoint loading).
    pub fn restore(
        &mut self,
        step: u64,
        id: ParamId,
        first: Vec<T>,
        second: Vec<T>,
        updates: u64,
    ) -> Result<(), AutodiffError> {
        if first.len() != self.first[id.0].len() || second.len() != self.second[id.0].len() {
            return Err(AutodiffError::InvalidArgument {
                op: "restore",
                reason: format!("moment length mismatch for parameter {}", id.0),
            });
        }
        self.step = step;
        self.first[id.0] = first;
        self.second[id.0] = second;
        self.updates[id.0] = updates;
        Ok(())
    }

    /// Applies one adaptive-moment update to `ids` using their accumulated
    /// gradients. Gradients are left in place; the caller zeroes them.
    pub fn update(&mut self, store: &mut ParamStore<T>, ids: &[ParamId], lr: f64) -> Result<(), AutodiffError> {
        for &id in ids {
            if store.get(id).grad().is_none() {
                return Err(AutodiffError::MissingGradient(store.name(id).to_string()));
            }
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        let (b1, b2) = (T::of(beta1), T::of(beta2));
        let (one, eps_t) = (T::one(), T::of(eps));
        for &id in ids {
            self.updates[id.0] += 1;
            let t = self.updates[id.0] as i32;
            let step_size = T::of(lr / (1.0 - beta1.powi(t)));
            let c2 = T::of(1.0 / (1.0 - beta2.powi(t)));
            let m = &mut self.first[id.0];
            let v = &mut self.second[id.0];
            let tensor = store.get_mut(id);
            let grad = tensor.grad().expect("checked above").to_vec();
            for (((p, &g), m), v) in tensor
                .data_mut()
                .iter_mut()
                .zip(&grad)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *p -= step_size * *m / ((*v * c2).sqrt() + eps_t);
            }
        }
        self.step += 1;
        Ok(())
    }
}
