//! Fully connected networks over space-time inputs.
//!
//! A network `NN(d_1, …, d_K)` maps `(x, t)` to a scalar through `K - 1`
//! affine layers, with the activation applied after every layer but the last.
//! Besides the plain value, [`MlpParams::extended`] propagates the first and
//! pure second derivatives with respect to each input alongside the value, so
//! PDE residuals can be assembled without a general autodiff engine.
//!
//! Parameters are stored in one flat vector, layer by layer: the row-major
//! weight matrix `W_k` (`d_{k+1} × d_k`) followed by the bias `b_k`. Gradients
//! share that layout, which lets the optimizer treat them as plain slices.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A space-time point `(x, t)`.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Cos,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Cos => "cos",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Activation::Tanh),
            "cos" => Ok(Activation::Cos),
            other => Err(Error::Unknown {
                kind: "activation",
                name: other.to_owned(),
            }),
        }
    }

    #[inline]
    pub fn value(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Cos => a.cos(),
        }
    }

    /// `(σ, σ', σ'', σ''')` at `a`. The value component is bitwise equal to
    /// [`Activation::value`].
    #[inline]
    pub fn derivatives(self, a: f64) -> [f64; 4] {
        match self {
            Activation::Tanh => {
                let s = a.tanh();
                let d1 = 1.0 - s * s;
                let d2 = -2.0 * s * d1;
                let d3 = -2.0 * d1 * d1 - 2.0 * s * d2;
                [s, d1, d2, d3]
            }
            Activation::Cos => {
                let c = a.cos();
                let s = a.sin();
                [c, -s, -c, s]
            }
        }
    }
}

/// Value and input derivatives of a scalar field at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState {
    pub u: f64,
    pub ux: f64,
    pub ut: f64,
    pub uxx: f64,
    pub utt: f64,
}

impl ExtendedState {
    pub fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.ux.is_finite()
            && self.ut.is_finite()
            && self.uxx.is_finite()
            && self.utt.is_finite()
    }

    pub fn get(&self, field: Field) -> Option<f64> {
        match field {
            Field::U => Some(self.u),
            Field::Ux => Some(self.ux),
            Field::Ut => Some(self.ut),
            Field::Uxx => Some(self.uxx),
            Field::Utt => Some(self.utt),
            Field::Uxt => None,
        }
    }
}

/// Names for the quantities a residual may read from a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    U,
    Ux,
    Ut,
    Uxx,
    Utt,
    /// Mixed derivative; never computed.
    Uxt,
}

impl Field {
    /// Derivative order needed to produce this field, or `None` if the
    /// extended pass does not compute it.
    pub fn order(self) -> Option<usize> {
        match self {
            Field::U => Some(0),
            Field::Ux | Field::Ut => Some(1),
            Field::Uxx | Field::Utt => Some(2),
            Field::Uxt => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::U => "u",
            Field::Ux => "u_x",
            Field::Ut => "u_t",
            Field::Uxx => "u_xx",
            Field::Utt => "u_tt",
            Field::Uxt => "u_xt",
        }
    }
}

/// Weights and biases of `NN(d_1, …, d_K)` with `d_1 = 2`, `d_K = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    dims: Vec<usize>,
    activation: Activation,
    data: Vec<f64>,
}

/// Total number of scalar parameters, `Σ (d_k + 1) d_{k+1}`.
pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidArchitecture(
            "need at least an input and an output layer".into(),
        ));
    }
    if dims[0] != 2 || *dims.last().unwrap() != 1 {
        return Err(Error::InvalidArchitecture(format!(
            "dims must start at 2 and end at 1, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidArchitecture("zero-width layer".into()));
    }
    Ok(())
}

impl MlpParams {
    /// All-zero parameters.
    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            data: vec![0.0; param_count(dims)],
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (d_k + d_{k+1}))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        dims: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::zeros(dims, activation)?;
        let mut offset = 0;
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            for v in &mut params.data[offset..offset + fan_in * fan_out] {
                *v = dist.sample(rng);
            }
            offset += (fan_in + 1) * fan_out;
        }
        Ok(params)
    }

    pub fn from_flat(dims: &[usize], activation: Activation, data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let expected = param_count(dims);
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    fn layer_offset(&self, k: usize) -> usize {
        param_count(&self.dims[..=k])
    }

    /// `(W_k, b_k)` with `W_k` row-major `d_{k+1} × d_k`.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let off = self.layer_offset(k);
        let (din, dout) = (self.dims[k], self.dims[k + 1]);
        let w = &self.data[off..off + din * dout];
        let b = &self.data[off + din * dout..off + (din + 1) * dout];
        (w, b)
    }

    pub fn layer_mut(&mut self, k: usize) -> (&mut [f64], &mut [f64]) {
        let off = self.layer_offset(k);
        let (din, dout) = (self.dims[k], self.dims[k + 1]);
        let (w, rest) = self.data[off..off + (din + 1) * dout].split_at_mut(din * dout);
        (w, rest)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Network value at `point`.
    pub fn forward(&self, point: Point) -> Result<f64> {
        if !point[0].is_finite() || !point[1].is_finite() || !self.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let mut ws = Workspace::new(self);
        ws.forward(self, point, 0);
        Ok(ws.output.u)
    }

    /// Value, first derivatives and pure second derivatives at `point`.
    pub fn extended(&self, point: Point) -> ExtendedState {
        let mut ws = Workspace::new(self);
        ws.forward(self, point, 2);
        ws.output
    }

    /// Values at many points, reusing one workspace.
    pub fn forward_many(&self, points: &[Point]) -> Vec<f64> {
        let mut ws = Workspace::new(self);
        points
            .iter()
            .map(|&p| {
                ws.forward(self, p, 0);
                ws.output.u
            })
            .collect()
    }

    /// Extended states at many points, reusing one workspace.
    pub fn extended_many(&self, points: &[Point]) -> Vec<ExtendedState> {
        let mut ws = Workspace::new(self);
        points
            .iter()
            .map(|&p| {
                ws.forward(self, p, 2);
                ws.output
            })
            .collect()
    }
}

/// Per-layer buffers for one point.
///
/// Index `d` in the derivative buffers selects the input direction
/// (0 = x, 1 = t).
#[derive(Debug, Clone)]
struct LayerCache {
    /// Input to the layer.
    z: Vec<f64>,
    zd: [Vec<f64>; 2],
    zdd: [Vec<f64>; 2],
    /// Pre-activation and its derivatives.
    a: Vec<f64>,
    ad: [Vec<f64>; 2],
    add: [Vec<f64>; 2],
    /// σ', σ'', σ''' at `a`; unused on the output layer.
    s1: Vec<f64>,
    s2: Vec<f64>,
    s3: Vec<f64>,
}

impl LayerCache {
    fn new(din: usize, dout: usize) -> Self {
        let zin = || vec![0.0; din];
        let zout = || vec![0.0; dout];
        Self {
            z: zin(),
            zd: [zin(), zin()],
            zdd: [zin(), zin()],
            a: zout(),
            ad: [zout(), zout()],
            add: [zout(), zout()],
            s1: zout(),
            s2: zout(),
            s3: zout(),
        }
    }
}

/// Scratch space for the extended forward pass and its reverse sweep.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    layers: Vec<LayerCache>,
    pub(crate) output: ExtendedState,
    order: usize,
    // adjoints for the current layer output / input
    bar: Vec<f64>,
    bard: [Vec<f64>; 2],
    bardd: [Vec<f64>; 2],
    next: Vec<f64>,
    nextd: [Vec<f64>; 2],
    nextdd: [Vec<f64>; 2],
}

#[inline]
fn affine(w: &[f64], b: &[f64], z: &[f64], out: &mut [f64]) {
    let din = z.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * din..(i + 1) * din];
        let mut acc = b[i];
        for (wij, zj) in row.iter().zip(z) {
            acc += wij * zj;
        }
        *o = acc;
    }
}

#[inline]
fn linear(w: &[f64], z: &[f64], out: &mut [f64]) {
    let din = z.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * din..(i + 1) * din];
        let mut acc = 0.0;
        for (wij, zj) in row.iter().zip(z) {
            acc += wij * zj;
        }
        *o = acc;
    }
}

/// `out = Wᵀ v`.
#[inline]
fn linear_t(w: &[f64], v: &[f64], out: &mut [f64]) {
    let din = out.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        let row = &w[i * din..(i + 1) * din];
        for (o, wij) in out.iter_mut().zip(row) {
            *o += wij * vi;
        }
    }
}

/// `gw += v zᵀ`.
#[inline]
fn outer_acc(gw: &mut [f64], v: &[f64], z: &[f64]) {
    let din = z.len();
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        let row = &mut gw[i * din..(i + 1) * din];
        for (g, zj) in row.iter_mut().zip(z) {
            *g += vi * zj;
        }
    }
}

impl Workspace {
    pub(crate) fn new(params: &MlpParams) -> Self {
        let dims = params.dims();
        let layers = dims
            .windows(2)
            .map(|w| LayerCache::new(w[0], w[1]))
            .collect();
        let widest = dims.iter().copied().max().unwrap_or(1);
        let buf = || vec![0.0; widest];
        Self {
            layers,
            output: ExtendedState::default(),
            order: 0,
            bar: buf(),
            bard: [buf(), buf()],
            bardd: [buf(), buf()],
            next: buf(),
            nextd: [buf(), buf()],
            nextdd: [buf(), buf()],
        }
    }

    /// Forward pass computing derivatives up to `order` (0, 1 or 2).
    pub(crate) fn forward(&mut self, params: &MlpParams, point: Point, order: usize) {
        self.order = order;
        let act = params.activation();
        let nl = params.num_layers();
        {
            let first = &mut self.layers[0];
            first.z[0] = point[0];
            first.z[1] = point[1];
            if order >= 1 {
                first.zd[0][0] = 1.0;
                first.zd[0][1] = 0.0;
                first.zd[1][0] = 0.0;
                first.zd[1][1] = 1.0;
            }
            if order >= 2 {
                for d in 0..2 {
                    first.zdd[d].iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        for k in 0..nl {
            let (w, b) = params.layer(k);
            let (head, tail) = self.layers.split_at_mut(k + 1);
            let lc = &mut head[k];
            affine(w, b, &lc.z, &mut lc.a);
            if order >= 1 {
                for d in 0..2 {
                    linear(w, &lc.zd[d], &mut lc.ad[d]);
                }
            }
            if order >= 2 {
                for d in 0..2 {
                    linear(w, &lc.zdd[d], &mut lc.add[d]);
                }
            }
            if k + 1 == nl {
                let mut out = ExtendedState {
                    u: lc.a[0],
                    ..Default::default()
                };
                if order >= 1 {
                    out.ux = lc.ad[0][0];
                    out.ut = lc.ad[1][0];
                }
                if order >= 2 {
                    out.uxx = lc.add[0][0];
                    out.utt = lc.add[1][0];
                }
                self.output = out;
                break;
            }
            let nx = &mut tail[0];
            for i in 0..lc.a.len() {
                if order == 0 {
                    nx.z[i] = act.value(lc.a[i]);
                    continue;
                }
                let [s0, s1, s2, s3] = act.derivatives(lc.a[i]);
                nx.z[i] = s0;
                lc.s1[i] = s1;
                lc.s2[i] = s2;
                lc.s3[i] = s3;
                for d in 0..2 {
                    let ad = lc.ad[d][i];
                    nx.zd[d][i] = s1 * ad;
                    if order >= 2 {
                        nx.zdd[d][i] = s2 * ad * ad + s1 * lc.add[d][i];
                    }
                }
            }
        }
    }

    /// Reverse sweep after [`Workspace::forward`]. `seed` holds the adjoints
    /// of the output fields; gradients are accumulated into `grad`.
    ///
    /// Only fields up to the order used in the forward pass may carry a
    /// nonzero adjoint.
    pub(crate) fn backward(&mut self, params: &MlpParams, seed: &ExtendedState, grad: &mut [f64]) {
        let order = self.order;
        let act = params.activation();
        let nl = params.num_layers();
        // In the order-0 pass σ' was not cached, so recompute when needed.
        self.bar[0] = seed.u;
        self.bard[0][0] = seed.ux;
        self.bard[1][0] = seed.ut;
        self.bardd[0][0] = seed.uxx;
        self.bardd[1][0] = seed.utt;

        let mut offset = params.layer_offset(nl - 1);
        for k in (0..nl).rev() {
            let din = params.dims[k];
            let dout = params.dims[k + 1];
            if k + 1 < nl {
                offset -= (din + 1) * dout;
            }
            let lc = &self.layers[k];
            // adjoints of the pre-activation `a` live in bar/bard/bardd
            if k + 1 < nl {
                // translate adjoints of z_{k+1} (in next*) into adjoints of a_k
                for i in 0..dout {
                    let zb = self.next[i];
                    if order == 0 {
                        let s1 = act.derivatives(lc.a[i])[1];
                        self.bar[i] = zb * s1;
                        continue;
                    }
                    let (s1, s2, s3) = (lc.s1[i], lc.s2[i], lc.s3[i]);
                    let mut abar = zb * s1;
                    for d in 0..2 {
                        let ad = lc.ad[d][i];
                        let zdb = self.nextd[d][i];
                        abar += zdb * s2 * ad;
                        let mut adb = zdb * s1;
                        if order >= 2 {
                            let zddb = self.nextdd[d][i];
                            let add = lc.add[d][i];
                            abar += zddb * (s3 * ad * ad + s2 * add);
                            adb += zddb * 2.0 * s2 * ad;
                            self.bardd[d][i] = zddb * s1;
                        }
                        self.bard[d][i] = adb;
                    }
                    self.bar[i] = abar;
                }
            }
            let (gw, gb) = grad[offset..offset + (din + 1) * dout].split_at_mut(din * dout);
            let (w, _) = params.layer(k);
            outer_acc(gw, &self.bar[..dout], &lc.z);
            for (g, v) in gb.iter_mut().zip(&self.bar[..dout]) {
                *g += v;
            }
            if order >= 1 {
                for d in 0..2 {
                    outer_acc(gw, &self.bard[d][..dout], &lc.zd[d]);
                }
            }
            if order >= 2 {
                for d in 0..2 {
                    outer_acc(gw, &self.bardd[d][..dout], &lc.zdd[d]);
                }
            }
            if k == 0 {
                break;
            }
            linear_t(w, &self.bar[..dout], &mut self.next[..din]);
            if order >= 1 {
                for d in 0..2 {
                    linear_t(w, &self.bard[d][..dout], &mut self.nextd[d][..din]);
                }
            }
            if order >= 2 {
                for d in 0..2 {
                    linear_t(w, &self.bardd[d][..dout], &mut self.nextdd[d][..din]);
                }
            }
        }
    }
}
