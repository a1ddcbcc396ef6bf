//! Feed-forward networks with manual backpropagation and Adam.
//!
//! Deliberately minimal: dense layers, four activations, exact gradients
//! (checked against finite differences), bias-corrected Adam, and soft/hard
//! target blending. Everything is `f64` and deterministic given a seeded
//! RNG.

use std::io::{Read, Write};

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-pre).exp());
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
            Activation::Identity => 3,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            2 => Activation::Sigmoid,
            3 => Activation::Identity,
            other => return Err(Error::Config(format!("unknown activation code {}", other))),
        })
    }
}

/// Dense layer, weights stored row-major `[out x in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Forward-pass record sufficient for exact backprop.
pub struct Cache {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

/// Per-layer `(dW, db)` gradients, shapes matching the network.
#[derive(Debug, Clone)]
pub struct Grads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Grads {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect(),
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            for (a, b) in dst.0.iter_mut().zip(&src.0) {
                *a += b;
            }
            for (a, b) in dst.1.iter_mut().zip(&src.1) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in self.layers.iter_mut() {
            for v in l.0.iter_mut() {
                *v *= s;
            }
            for v in l.1.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Rescales so the global L2 norm does not exceed `max_norm`
    /// (`max_norm <= 0` disables clipping).
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        if max_norm <= 0.0 {
            return;
        }
        let sq: f64 = self
            .layers
            .iter()
            .map(|l| {
                l.0.iter().map(|v| v * v).sum::<f64>() + l.1.iter().map(|v| v * v).sum::<f64>()
            })
            .sum();
        let norm = sq.sqrt();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
    }
}

impl Mlp {
    /// Builds a network with the given layer sizes and activations,
    /// initialized uniformly in `+-1/sqrt(fan_in)`.
    pub fn new(dims: &[usize], acts: &[Activation], rng: &mut ChaCha12Rng) -> Mlp {
        assert!(dims.len() >= 2 && acts.len() == dims.len() - 1);
        let layers = dims
            .windows(2)
            .zip(acts)
            .map(|(d, &act)| {
                let (i, o) = (d[0], d[1]);
                let bound = 1.0 / (i as f64).sqrt();
                Layer {
                    in_dim: i,
                    out_dim: o,
                    w: (0..i * o)
                        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                        .collect(),
                    b: (0..o).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound).collect(),
                    act,
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Cache> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch(format!(
                "input of len {} for net expecting {}",
                x.len(),
                self.in_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.b.clone();
            for o in 0..layer.out_dim {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut acc = 0.0;
                for (wi, xi) in row.iter().zip(&cur) {
                    acc += wi * xi;
                }
                z[o] += acc;
            }
            inputs.push(cur);
            cur = z.iter().map(|&v| layer.act.apply(v)).collect();
            pre.push(z);
        }
        Ok(Cache {
            inputs,
            pre,
            out: cur,
        })
    }

    /// Exact gradients of a scalar loss with output gradient `dout`;
    /// returns the parameter gradients and the gradient w.r.t. the input
    /// (needed for the deterministic policy gradient).
    pub fn backward(&self, cache: &Cache, dout: &[f64]) -> Result<(Grads, Vec<f64>)> {
        if cache.inputs.len() != self.layers.len()
            || cache
                .inputs
                .iter()
                .zip(&self.layers)
                .any(|(i, l)| i.len() != l.in_dim)
            || dout.len() != self.out_dim()
        {
            return Err(Error::DimensionMismatch(
                "backward: cache does not match network".into(),
            ));
        }
        let mut grads = Grads::zeros_like(self);
        let mut delta = dout.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[li];
            let input = &cache.inputs[li];
            // delta w.r.t. pre-activation.
            for (d, &p) in delta.iter_mut().zip(pre) {
                *d *= layer.act.derivative(p);
            }
            let (dw, db) = &mut grads.layers[li];
            for o in 0..layer.out_dim {
                db[o] += delta[o];
                let row = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &xi) in row.iter_mut().zip(input) {
                    *g += delta[o] * xi;
                }
            }
            // propagate to the layer input.
            let mut next = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (n, &wi) in next.iter_mut().zip(row) {
                    *n += delta[o] * wi;
                }
            }
            delta = next;
        }
        Ok((grads, delta))
    }
}

/// Bias-corrected Adam state, shape-matched to one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<(Vec<f64>, Vec<f64>)>,
    v: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new(net: &Mlp, alpha: f64) -> Self {
        let zeros = || {
            net.layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect::<Vec<_>>()
        };
        AdamState {
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }
}

/// One Adam update of `net` in place.
pub fn adam_step(net: &mut Mlp, grads: &Grads, st: &mut AdamState) -> Result<()> {
    if grads.layers.len() != net.layers.len() || st.m.len() != net.layers.len() {
        return Err(Error::DimensionMismatch("adam: shape mismatch".into()));
    }
    st.step += 1;
    let b1t = 1.0 - st.beta1.powi(st.step as i32);
    let b2t = 1.0 - st.beta2.powi(st.step as i32);
    for (li, layer) in net.layers.iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[li];
        if gw.len() != layer.w.len() || gb.len() != layer.b.len() {
            return Err(Error::DimensionMismatch("adam: layer shape mismatch".into()));
        }
        let (mw, mb) = &mut st.m[li];
        let (vw, vb) = &mut st.v[li];
        let update = &mut |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
                v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
                let mhat = m[i] / b1t;
                let vhat = v[i] / b2t;
                p[i] -= st.alpha * mhat / (vhat.sqrt() + st.eps);
            }
        };
        update(&mut layer.w, gw, mw, vw);
        update(&mut layer.b, gb, mb, vb);
    }
    Ok(())
}

/// Target blend `target <- tau * online + (1 - tau) * target`; `tau = 1` is
/// a hard copy.
pub fn blend(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if target.layers.len() != online.layers.len() {
        return Err(Error::DimensionMismatch("blend: layer count".into()));
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        if t.w.len() != o.w.len() || t.b.len() != o.b.len() || t.act != o.act {
            return Err(Error::DimensionMismatch("blend: architecture".into()));
        }
        for (tv, ov) in t.w.iter_mut().zip(&o.w) {
            *tv = tau * ov + (1.0 - tau) * *tv;
        }
        for (tv, ov) in t.b.iter_mut().zip(&o.b) {
            *tv = tau * ov + (1.0 - tau) * *tv;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Checkpoint record layout (little-endian):
///
/// ```text
/// magic   8 bytes  "WPBRNN01"
/// u32     layer count
/// per layer:
///   u32 in_dim, u32 out_dim, u8 activation code,
///   f64[out*in] weights row-major, f64[out] biases
/// u8      1 if Adam state follows, else 0
/// adam state (when present):
///   u64 step, f64 alpha, f64 beta1, f64 beta2, f64 eps,
///   per layer: f64[out*in] m_w, f64[out] m_b, f64[out*in] v_w, f64[out] v_b
/// ```
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WPBRNN01";

pub fn write_checkpoint<W: Write>(
    out: &mut W,
    net: &Mlp,
    adam: Option<&AdamState>,
) -> std::io::Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for l in &net.layers {
        out.write_all(&(l.in_dim as u32).to_le_bytes())?;
        out.write_all(&(l.out_dim as u32).to_le_bytes())?;
        out.write_all(&[l.act.code()])?;
        for v in l.w.iter().chain(&l.b) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    match adam {
        None => out.write_all(&[0u8])?,
        Some(st) => {
            out.write_all(&[1u8])?;
            out.write_all(&st.step.to_le_bytes())?;
            for v in [st.alpha, st.beta1, st.beta2, st.eps] {
                out.write_all(&v.to_le_bytes())?;
            }
            for li in 0..net.layers.len() {
                for v in st.m[li].0.iter().chain(&st.m[li].1) {
                    out.write_all(&v.to_le_bytes())?;
                }
                for v in st.v[li].0.iter().chain(&st.v[li].1) {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<(Mlp, Option<AdamState>)> {
    let bad = |msg: &str| Error::Config(format!("checkpoint: {}", msg));
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic / unsupported version"));
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    let mut f64buf = [0u8; 8];
    let mut byte = [0u8; 1];
    input.read_exact(&mut u32buf).map_err(|_| bad("truncated"))?;
    let n_layers = u32::from_le_bytes(u32buf) as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(bad("implausible layer count"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        input.read_exact(&mut u32buf).map_err(|_| bad("truncated"))?;
        let in_dim = u32::from_le_bytes(u32buf) as usize;
        input.read_exact(&mut u32buf).map_err(|_| bad("truncated"))?;
        let out_dim = u32::from_le_bytes(u32buf) as usize;
        input.read_exact(&mut byte).map_err(|_| bad("truncated"))?;
        let act = Activation::from_code(byte[0])?;
        if in_dim == 0 || out_dim == 0 || in_dim * out_dim > 100_000_000 {
            return Err(bad("implausible layer dims"));
        }
        let mut read_f64s = |n: usize, input: &mut R| -> Result<Vec<f64>> {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                input.read_exact(&mut f64buf).map_err(|_| bad("truncated"))?;
                v.push(f64::from_le_bytes(f64buf));
            }
            Ok(v)
        };
        let w = read_f64s(in_dim * out_dim, input)?;
        let b = read_f64s(out_dim, input)?;
        layers.push(Layer {
            in_dim,
            out_dim,
            w,
            b,
            act,
        });
    }
    let net = Mlp { layers };
    input.read_exact(&mut byte).map_err(|_| bad("truncated"))?;
    let adam = if byte[0] == 1 {
        let mut st = AdamState::new(&net, 0.0);
        input.read_exact(&mut u64buf).map_err(|_| bad("truncated"))?;
        st.step = u64::from_le_bytes(u64buf);
        let mut scalars = [0.0f64; 4];
        for s in scalars.iter_mut() {
            input.read_exact(&mut f64buf).map_err(|_| bad("truncated"))?;
            *s = f64::from_le_bytes(f64buf);
        }
        st.alpha = scalars[0];
        st.beta1 = scalars[1];
        st.beta2 = scalars[2];
        st.eps = scalars[3];
        for li in 0..net.layers.len() {
            let mut fill = |dst: &mut Vec<f64>, input: &mut R| -> Result<()> {
                for v in dst.iter_mut() {
                    input.read_exact(&mut f64buf).map_err(|_| bad("truncated"))?;
                    *v = f64::from_le_bytes(f64buf);
                }
                Ok(())
            };
            fill(&mut st.m[li].0, input)?;
            fill(&mut st.m[li].1, input)?;
            fill(&mut st.v[li].0, input)?;
            fill(&mut st.v[li].1, input)?;
        }
        Some(st)
    } else {
        None
    };
    Ok((net, adam))
}
