//! Shared-trunk policy/value network with hand-written backward pass.
//!
//! Layout: four 3x3 conv + batch-norm + ReLU blocks (5x5 -> 5x5 -> 5x5 ->
//! 3x3 -> 1x1), two fully connected + batch-norm + ReLU + dropout blocks, then
//! separate linear policy (A logits) and value (scalar) heads.

mod checkpoint;
pub mod ops;
pub mod optim;

use rand::rngs::mock::StepRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CheckpointMeta, Phase};
use ops::{
    batch_norm_backward, batch_norm_forward, col2im, gemm, im2col, lit, relu_backward,
    relu_inplace, BnCache, ConvGeom, Real,
};

use crate::encoding::NUM_ACTIONS;
use crate::engine::NUM_SQUARES;

pub const BN_MOMENTUM: f64 = 0.99;

const CONV_GEOMS: [ConvGeom; 4] = [
    ConvGeom { in_size: 5, pad: 1 },
    ConvGeom { in_size: 5, pad: 1 },
    ConvGeom { in_size: 5, pad: 0 },
    ConvGeom { in_size: 3, pad: 0 },
];

// trainable tensor indices
const fn conv_w(block: usize) -> usize {
    3 * block
}
const fn conv_gamma(block: usize) -> usize {
    3 * block + 1
}
const fn conv_beta(block: usize) -> usize {
    3 * block + 2
}
const fn fc_w(block: usize) -> usize {
    12 + 4 * block
}
const fn fc_b(block: usize) -> usize {
    13 + 4 * block
}
const fn fc_gamma(block: usize) -> usize {
    14 + 4 * block
}
const fn fc_beta(block: usize) -> usize {
    15 + 4 * block
}
pub const POLICY_W: usize = 20;
pub const POLICY_B: usize = 21;
pub const VALUE_W: usize = 22;
pub const VALUE_B: usize = 23;
pub const NUM_TENSORS: usize = 24;
/// Batch-norm layers: four conv blocks then two FC blocks.
pub const NUM_BN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub channels: usize,
    pub hidden: usize,
    pub actions: usize,
    pub dropout: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            channels: 64,
            hidden: 128,
            actions: NUM_ACTIONS,
            dropout: 0.3,
        }
    }
}

impl NetConfig {
    /// Name and shape of every trainable tensor, in declaration order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (c, h, a) = (self.channels, self.hidden, self.actions);
        let mut out = Vec::with_capacity(NUM_TENSORS);
        for block in 0..4 {
            let cin = if block == 0 { 1 } else { c };
            out.push((format!("conv{}.weight", block + 1), vec![c, cin, 3, 3]));
            out.push((format!("conv{}.bn.gamma", block + 1), vec![c]));
            out.push((format!("conv{}.bn.beta", block + 1), vec![c]));
        }
        for block in 0..2 {
            let fin = if block == 0 { c } else { h };
            out.push((format!("fc{}.weight", block + 1), vec![h, fin]));
            out.push((format!("fc{}.bias", block + 1), vec![h]));
            out.push((format!("fc{}.bn.gamma", block + 1), vec![h]));
            out.push((format!("fc{}.bn.beta", block + 1), vec![h]));
        }
        out.push(("policy.weight".into(), vec![a, h]));
        out.push(("policy.bias".into(), vec![a]));
        out.push(("value.weight".into(), vec![1, h]));
        out.push(("value.bias".into(), vec![1]));
        out
    }

    /// Width of each batch-norm layer.
    pub fn bn_widths(&self) -> [usize; NUM_BN] {
        let (c, h) = (self.channels, self.hidden);
        [c, c, c, c, h, h]
    }

    /// Trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        let (c, h, a) = (self.channels, self.hidden, self.actions);
        9 * c + 2 * c + 3 * (9 * c * c + 2 * c) + (h * c + 3 * h) + (h * h + 3 * h) + (a * h + a)
            + (h + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics (running stats updated) and dropout.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

/// Per-tensor buffers with the same layout as the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn zeros(cfg: &NetConfig) -> Self {
        ParamSet {
            tensors: cfg
                .tensor_shapes()
                .iter()
                .map(|(_, s)| vec![T::zero(); s.iter().product()])
                .collect(),
        }
    }

    pub fn zeros_like(other: &ParamSet<T>) -> Self {
        ParamSet {
            tensors: other.tensors.iter().map(|t| vec![T::zero(); t.len()]).collect(),
        }
    }

    pub fn scale(&mut self, k: T) {
        for t in &mut self.tensors {
            for v in t {
                *v = *v * k;
            }
        }
    }

    pub fn add_assign(&mut self, other: &ParamSet<T>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|v| {
                let v = v.to_f64().unwrap();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub type Gradients<T> = ParamSet<T>;

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: NetConfig,
    pub params: ParamSet<T>,
    /// Running mean/var per batch-norm layer: `[mean0, var0, mean1, var1, ...]`.
    pub buffers: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
struct ConvCache<T> {
    col: Vec<T>,
    bn: BnCache<T>,
    out: Vec<T>,
}

#[derive(Debug, Clone)]
struct FcCache<T> {
    input: Vec<T>,
    bn: BnCache<T>,
    relu_out: Vec<T>,
    dropout_scale: Option<Vec<T>>,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    batch: usize,
    convs: Vec<ConvCache<T>>,
    fcs: Vec<FcCache<T>>,
    features: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct ForwardOut<T> {
    /// `[batch][actions]`, row-major.
    pub logits: Vec<T>,
    pub values: Vec<T>,
    pub cache: Cache<T>,
}

impl<T: Real> ForwardOut<T> {
    pub fn logits_row(&self, i: usize) -> &[T] {
        let a = self.logits.len() / self.values.len();
        &self.logits[i * a..(i + 1) * a]
    }
}

impl<T: Real> Network<T> {
    /// Fan-in scaled uniform init; batch norm starts as the identity.
    pub fn init<R: Rng>(config: NetConfig, rng: &mut R) -> Self {
        assert!(config.channels >= 1 && config.hidden >= 1 && config.actions >= 1);
        let shapes = config.tensor_shapes();
        let mut params = ParamSet::zeros(&config);
        for (i, (name, shape)) in shapes.iter().enumerate() {
            let t = &mut params.tensors[i];
            if name.ends_with("bn.gamma") {
                t.iter_mut().for_each(|v| *v = T::one());
            } else if name.ends_with("bn.beta") {
                continue;
            } else {
                let fan_in: usize = if name.ends_with(".bias") {
                    shapes[i - 1].1[1..].iter().product()
                } else {
                    shape[1..].iter().product()
                };
                let mut bound = 1.0 / (fan_in as f64).sqrt();
                if i == POLICY_W || i == POLICY_B {
                    // near-uniform initial policy
                    bound *= 0.01;
                }
                for v in t.iter_mut() {
                    *v = lit(rng.gen_range(-bound..bound));
                }
            }
        }
        let buffers = config
            .bn_widths()
            .iter()
            .flat_map(|&w| [vec![T::zero(); w], vec![T::one(); w]])
            .collect();
        Network {
            config,
            params,
            buffers,
        }
    }

    /// Fresh policy head, everything else kept.
    pub fn reinit_policy_head<R: Rng>(&mut self, rng: &mut R) {
        let fresh = Network::<T>::init(self.config, rng);
        for i in [POLICY_W, POLICY_B] {
            self.params.tensors[i] = fresh.params.tensors[i].clone();
        }
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        let conv = |t: &Vec<T>| t.iter().map(|v| lit::<U>(v.to_f64().unwrap())).collect();
        Network {
            config: self.config,
            params: ParamSet {
                tensors: self.params.tensors.iter().map(conv).collect(),
            },
            buffers: self.buffers.iter().map(conv).collect(),
        }
    }

    /// Forward pass on a batch of planes.
    ///
    /// `rng` is consulted only for dropout in train mode.
    pub fn forward<R: Rng>(
        &mut self,
        planes: &[[f32; NUM_SQUARES]],
        mode: Mode,
        rng: &mut R,
    ) -> ForwardOut<T> {
        self.forward_impl(planes, mode, Some(rng))
    }

    /// Eval-mode forward; pure in `(self, planes)`.
    pub fn forward_eval(&self, planes: &[[f32; NUM_SQUARES]]) -> ForwardOut<T> {
        // eval mode only reads the running buffers
        let mut buffers = self.buffers.clone();
        let (logits, values, cache) = forward_core::<T, StepRng>(
            &self.config,
            &self.params,
            &mut buffers,
            planes,
            Mode::Eval,
            None,
        );
        ForwardOut {
            logits,
            values,
            cache,
        }
    }

    fn forward_impl<R: Rng>(
        &mut self,
        planes: &[[f32; NUM_SQUARES]],
        mode: Mode,
        rng: Option<&mut R>,
    ) -> ForwardOut<T> {
        let (logits, values, cache) =
            forward_core(&self.config, &self.params, &mut self.buffers, planes, mode, rng);
        ForwardOut {
            logits,
            values,
            cache,
        }
    }

    /// Single-position eval: (logits, value) as f64.
    pub fn evaluate(&self, plane: &[f32; NUM_SQUARES]) -> (Vec<f64>, f64) {
        let out = self.forward_eval(std::slice::from_ref(plane));
        (
            out.logits.iter().map(|v| v.to_f64().unwrap()).collect(),
            out.values[0].to_f64().unwrap(),
        )
    }

    /// Updates the batch-norm running statistics from `planes` without dropout.
    pub fn refresh_running_stats(&mut self, planes: &[[f32; NUM_SQUARES]]) {
        if planes.len() < 2 {
            return;
        }
        let mut buffers = std::mem::take(&mut self.buffers);
        let cfg = self.config;
        let mut no_dropout = cfg;
        no_dropout.dropout = 0.0;
        forward_core::<T, StepRng>(
            &no_dropout,
            &self.params,
            &mut buffers,
            planes,
            Mode::Train,
            None,
        );
        self.buffers = buffers;
    }

    /// Gradients of `sum_i dlogits[i] . logits[i] + dvalues[i] * value[i]`.
    pub fn backward(&self, cache: &Cache<T>, dlogits: &[T], dvalues: &[T]) -> Gradients<T> {
        backward_core(&self.config, &self.params, cache, dlogits, dvalues)
    }
}

fn forward_core<T: Real, R: Rng>(
    cfg: &NetConfig,
    params: &ParamSet<T>,
    buffers: &mut [Vec<T>],
    planes: &[[f32; NUM_SQUARES]],
    mode: Mode,
    mut rng: Option<&mut R>,
) -> (Vec<T>, Vec<T>, Cache<T>) {
    let batch = planes.len();
    assert!(batch >= 1, "empty batch");
    let (c, h, a) = (cfg.channels, cfg.hidden, cfg.actions);
    let p = &params.tensors;
    let train = mode == Mode::Train;
    let momentum: T = lit(BN_MOMENTUM);

    // input as [1][batch * 25]
    let mut x: Vec<T> = planes
        .iter()
        .flat_map(|pl| pl.iter().map(|&v| lit::<T>(v as f64)))
        .collect();
    let mut cin = 1;
    let mut convs = Vec::with_capacity(4);
    for (block, g) in CONV_GEOMS.iter().enumerate() {
        let o = g.out_size();
        let n = batch * o * o;
        let col = im2col(&x, cin, batch, *g);
        let mut z = vec![T::zero(); c * n];
        gemm(c, cin * 9, n, &p[conv_w(block)], false, &col, false, T::zero(), &mut z);
        let (rm, rv) = bn_buffers(buffers, block);
        let bn = batch_norm_forward(
            &mut z,
            c,
            n,
            &p[conv_gamma(block)],
            &p[conv_beta(block)],
            rm,
            rv,
            train,
            momentum,
        );
        relu_inplace(&mut z);
        convs.push(ConvCache {
            col,
            bn,
            out: z.clone(),
        });
        x = z;
        cin = c;
    }

    // [c][batch] features; fully connected blocks
    let mut fcs = Vec::with_capacity(2);
    let mut fin = c;
    for block in 0..2 {
        let mut z = vec![T::zero(); h * batch];
        for (j, row) in z.chunks_mut(batch).enumerate() {
            row.iter_mut().for_each(|v| *v = p[fc_b(block)][j]);
        }
        gemm(h, fin, batch, &p[fc_w(block)], false, &x, false, T::one(), &mut z);
        let (rm, rv) = bn_buffers(buffers, 4 + block);
        let bn = batch_norm_forward(
            &mut z,
            h,
            batch,
            &p[fc_gamma(block)],
            &p[fc_beta(block)],
            rm,
            rv,
            train,
            momentum,
        );
        relu_inplace(&mut z);
        let relu_out = z.clone();
        let dropout_scale = match (train && cfg.dropout > 0.0, rng.as_deref_mut()) {
            (true, Some(rng)) => {
                let keep = 1.0 - cfg.dropout;
                let scale: T = lit(1.0 / keep);
                let mask: Vec<T> = (0..z.len())
                    .map(|_| if rng.gen::<f64>() < keep { scale } else { T::zero() })
                    .collect();
                for (v, m) in z.iter_mut().zip(&mask) {
                    *v = *v * *m;
                }
                Some(mask)
            }
            _ => None,
        };
        fcs.push(FcCache {
            input: x,
            bn,
            relu_out,
            dropout_scale,
        });
        x = z;
        fin = h;
    }

    // heads, computed as [a][batch] then transposed to [batch][a]
    let mut lt = vec![T::zero(); a * batch];
    for (j, row) in lt.chunks_mut(batch).enumerate() {
        row.iter_mut().for_each(|v| *v = p[POLICY_B][j]);
    }
    gemm(a, h, batch, &p[POLICY_W], false, &x, false, T::one(), &mut lt);
    let mut logits = vec![T::zero(); batch * a];
    for j in 0..a {
        for b in 0..batch {
            logits[b * a + j] = lt[j * batch + b];
        }
    }
    let mut values = vec![p[VALUE_B][0]; batch];
    gemm(1, h, batch, &p[VALUE_W], false, &x, false, T::one(), &mut values);

    (
        logits,
        values,
        Cache {
            batch,
            convs,
            fcs,
            features: x,
        },
    )
}

fn bn_buffers<T>(buffers: &mut [Vec<T>], layer: usize) -> (&mut [T], &mut [T]) {
    let (lo, hi) = buffers.split_at_mut(2 * layer + 1);
    (&mut lo[2 * layer], &mut hi[0])
}

fn backward_core<T: Real>(
    cfg: &NetConfig,
    params: &ParamSet<T>,
    cache: &Cache<T>,
    dlogits: &[T],
    dvalues: &[T],
) -> Gradients<T> {
    let batch = cache.batch;
    let (c, h, a) = (cfg.channels, cfg.hidden, cfg.actions);
    assert_eq!(dlogits.len(), batch * a, "dlogits shape");
    assert_eq!(dvalues.len(), batch, "dvalues shape");
    let p = &params.tensors;
    let mut g = ParamSet::zeros(cfg);

    // heads
    let feats = &cache.features;
    gemm(a, batch, h, dlogits, true, feats, true, T::zero(), &mut g.tensors[POLICY_W]);
    for b in 0..batch {
        for j in 0..a {
            g.tensors[POLICY_B][j] = g.tensors[POLICY_B][j] + dlogits[b * a + j];
        }
    }
    gemm(1, batch, h, dvalues, false, feats, true, T::zero(), &mut g.tensors[VALUE_W]);
    g.tensors[VALUE_B][0] = dvalues.iter().copied().sum();

    let mut dx = vec![T::zero(); h * batch];
    gemm(h, a, batch, &p[POLICY_W], true, dlogits, true, T::zero(), &mut dx);
    for j in 0..h {
        let w = p[VALUE_W][j];
        for b in 0..batch {
            dx[j * batch + b] = dx[j * batch + b] + w * dvalues[b];
        }
    }

    // fully connected blocks
    for block in (0..2).rev() {
        let fc = &cache.fcs[block];
        let fin = if block == 0 { c } else { h };
        if let Some(mask) = &fc.dropout_scale {
            for (d, m) in dx.iter_mut().zip(mask) {
                *d = *d * *m;
            }
        }
        relu_backward(&mut dx, &fc.relu_out);
        let (gg, gb) = two_mut(&mut g.tensors, fc_gamma(block), fc_beta(block));
        let dz = batch_norm_backward(&dx, h, batch, &p[fc_gamma(block)], &fc.bn, gg, gb);
        gemm(h, batch, fin, &dz, false, &fc.input, true, T::zero(), &mut g.tensors[fc_w(block)]);
        for j in 0..h {
            g.tensors[fc_b(block)][j] = dz[j * batch..(j + 1) * batch].iter().copied().sum();
        }
        let mut dinput = vec![T::zero(); fin * batch];
        gemm(fin, h, batch, &p[fc_w(block)], true, &dz, false, T::zero(), &mut dinput);
        dx = dinput;
    }

    // conv blocks; dx is [c][batch] == [c][batch * 1 * 1]
    for block in (0..4).rev() {
        let cc = &cache.convs[block];
        let geom = CONV_GEOMS[block];
        let o = geom.out_size();
        let n = batch * o * o;
        let cin = if block == 0 { 1 } else { c };
        relu_backward(&mut dx, &cc.out);
        let (gg, gb) = two_mut(&mut g.tensors, conv_gamma(block), conv_beta(block));
        let dz = batch_norm_backward(&dx, c, n, &p[conv_gamma(block)], &cc.bn, gg, gb);
        gemm(c, n, cin * 9, &dz, false, &cc.col, true, T::zero(), &mut g.tensors[conv_w(block)]);
        if block > 0 {
            let mut dcol = vec![T::zero(); cin * 9 * n];
            gemm(cin * 9, c, n, &p[conv_w(block)], true, &dz, false, T::zero(), &mut dcol);
            dx = col2im(&dcol, cin, batch, geom);
        }
    }
    g
}

fn two_mut<T>(v: &mut [Vec<T>], i: usize, j: usize) -> (&mut [T], &mut [T]) {
    assert!(i < j);
    let (lo, hi) = v.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}
