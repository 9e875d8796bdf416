use rand::Rng;

use crate::autodiff::{AutodiffError, Graph, ParamId, ParamStore, Real, Tensor, Var};

/// Dense layer `y = x·W + b` with `W: [in, out]` and `b: [1, out]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in ±1/√fan_in for weights and biases.
    Uniform,
    Zeros,
}

impl Linear {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = |n: usize| -> Vec<T> {
            match init {
                Init::Uniform => (0..n).map(|_| T::of(rng.gen_range(-bound..bound))).collect(),
                Init::Zeros => vec![T::zero(); n],
            }
        };
        let w = draw(inputs * outputs);
        let b = draw(outputs);
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::new(&[inputs, outputs], w).expect("shape"),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::new(&[1, outputs], b).expect("shape"));
        Self {
            weight,
            bias,
            inputs,
            outputs,
        }
    }

    pub fn forward<T: Real>(&self, g: &Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var, AutodiffError> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.linear(x, w, b)
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}
