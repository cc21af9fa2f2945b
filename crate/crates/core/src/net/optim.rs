use serde::{Deserialize, Serialize};

use super::ops::{lit, Real};
use super::{Gradients, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// Plain SGD or Adam over a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Option<ParamSet<T>>,
    v: Option<ParamSet<T>>,
    frozen: Vec<bool>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: None,
            v: None,
            frozen: Vec::new(),
        }
    }

    /// Tensors listed here are never updated.
    pub fn freeze(&mut self, tensor: usize) {
        if self.frozen.len() <= tensor {
            self.frozen.resize(tensor + 1, false);
        }
        self.frozen[tensor] = true;
    }

    fn is_frozen(&self, tensor: usize) -> bool {
        self.frozen.get(tensor).copied().unwrap_or(false)
    }

    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &Gradients<T>) {
        match self.kind {
            OptimizerKind::Sgd => {
                let lr: T = lit(self.lr);
                for (i, (p, g)) in params.tensors.iter_mut().zip(&grads.tensors).enumerate() {
                    if self.is_frozen(i) {
                        continue;
                    }
                    for (w, &d) in p.iter_mut().zip(g) {
                        *w = *w - lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let frozen = &self.frozen;
                let m = self.m.get_or_insert_with(|| ParamSet::zeros_like(params));
                let v = self.v.get_or_insert_with(|| ParamSet::zeros_like(params));
                let (b1, b2) = (self.beta1, self.beta2);
                let c1 = 1.0 - b1.powi(self.t as i32);
                let c2 = 1.0 - b2.powi(self.t as i32);
                let step: T = lit(self.lr * c2.sqrt() / c1);
                let eps: T = lit(self.eps * c2.sqrt());
                let (b1t, b2t): (T, T) = (lit(b1), lit(b2));
                let (ob1, ob2): (T, T) = (lit(1.0 - b1), lit(1.0 - b2));
                for i in 0..params.tensors.len() {
                    if frozen.get(i).copied().unwrap_or(false) {
                        continue;
                    }
                    let g = &grads.tensors[i];
                    let (mt, vt, pt) = (&mut m.tensors[i], &mut v.tensors[i], &mut params.tensors[i]);
                    for j in 0..pt.len() {
                        mt[j] = b1t * mt[j] + ob1 * g[j];
                        vt[j] = b2t * vt[j] + ob2 * g[j] * g[j];
                        pt[j] = pt[j] - step * mt[j] / (vt[j].sqrt() + eps);
                    }
                }
            }
        }
    }
}
