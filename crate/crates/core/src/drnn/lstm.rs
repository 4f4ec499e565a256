//! Batched forward pass and backpropagation through time.
//!
//! Per layer and timestep, with `v = [h_{t-1}, x_t]`:
//!
//! ```text
//! f = σ(W_f v + V_f ⊙ c_{t-1} + b_f)
//! i = σ(W_i v + V_i ⊙ c_{t-1} + b_i)
//! o = σ(W_o v + V_o ⊙ c_{t-1} + b_o)
//! c = f ⊙ c_{t-1} + i ⊙ tanh(W_c v + b_c)
//! h = o ⊙ tanh(c)
//! ```
//!
//! with `c_{-1} = h_{-1} = 0`. The readout is `z = W_y h_T + b_y`.

use alloc::vec;
use alloc::vec::Vec;

use super::network::{LayerLayout, LstmNetwork, NetShape};
use super::DrnnError;

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four independent accumulators.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[derive(Debug, Clone, Default)]
struct LayerCache {
    /// `[h_{t-1}, x_t]` per (t, b), width k.
    v: Vec<f64>,
    /// Gate activations f, i, o, g per (t, b), width 4H.
    act: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
    dh_carry: Vec<f64>,
    dc_carry: Vec<f64>,
}

/// Activations of one forward pass over a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    shape: NetShape,
    batch: usize,
    layers: Vec<LayerCache>,
    out: Vec<f64>,
    /// First timestep whose activations are valid; `None` before any pass.
    valid_from: Option<usize>,
    dh_in: Vec<f64>,
    dx: Vec<f64>,
    dv: Vec<f64>,
    da: Vec<f64>,
    dh_top: Vec<f64>,
}

impl ForwardCache {
    pub fn new(net: &LstmNetwork) -> Self {
        Self {
            shape: net.shape().clone(),
            batch: 0,
            layers: vec![LayerCache::default(); net.shape().layers()],
            out: Vec::new(),
            valid_from: None,
            dh_in: Vec::new(),
            dx: Vec::new(),
            dv: Vec::new(),
            da: Vec::new(),
            dh_top: Vec::new(),
        }
    }

    fn resize(&mut self, net: &LstmNetwork, batch: usize) {
        let steps = self.shape.timesteps();
        self.batch = batch;
        let mut kmax = 0;
        let mut gmax = 0;
        for (lc, ll) in self.layers.iter_mut().zip(&net.layout.layers) {
            lc.v.resize(steps * batch * ll.k, 0.0);
            lc.act.resize(steps * batch * ll.gates(), 0.0);
            lc.c.resize(steps * batch * ll.hidden, 0.0);
            lc.tc.resize(steps * batch * ll.hidden, 0.0);
            lc.h.resize(steps * batch * ll.hidden, 0.0);
            lc.dh_carry.resize(batch * ll.hidden, 0.0);
            lc.dc_carry.resize(batch * ll.hidden, 0.0);
            kmax = kmax.max(ll.k);
            gmax = gmax.max(ll.gates());
        }
        let hmax = self.shape.hidden.iter().copied().max().unwrap_or(0);
        self.out.resize(batch * self.shape.outputs, 0.0);
        self.dh_in.resize(batch * hmax, 0.0);
        self.dx.resize(batch * kmax, 0.0);
        self.dv.resize(batch * kmax, 0.0);
        self.da.resize(batch * gmax, 0.0);
        self.dh_top.resize(batch * hmax, 0.0);
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Readout of sample `b` from the last forward pass.
    pub fn output(&self, b: usize) -> &[f64] {
        let o = self.shape.outputs;
        &self.out[b * o..(b + 1) * o]
    }

    /// Hidden and cell state of `layer` for sample `b` after timestep `t`.
    pub fn state(&self, layer: usize, t: usize, b: usize) -> (&[f64], &[f64]) {
        let h = self.shape.hidden[layer];
        let at = (t * self.batch + b) * h;
        let lc = &self.layers[layer];
        (&lc.h[at..at + h], &lc.c[at..at + h])
    }

    /// Seeds the state after timestep `t` so a pass can resume at `t + 1`
    /// via [`LstmNetwork::forward_from`].
    pub fn set_state(&mut self, layer: usize, t: usize, b: usize, h: &[f64], c: &[f64]) {
        let hw = self.shape.hidden[layer];
        let at = (t * self.batch + b) * hw;
        let lc = &mut self.layers[layer];
        lc.h[at..at + hw].copy_from_slice(h);
        lc.c[at..at + hw].copy_from_slice(c);
        lc.tc[at..at + hw]
            .iter_mut()
            .zip(c)
            .for_each(|(tc, &cv)| *tc = libm::tanh(cv));
    }

    /// Prepares the cache for `batch` samples whose states before `t0` will
    /// be supplied through [`ForwardCache::set_state`].
    pub fn prepare(&mut self, net: &LstmNetwork, batch: usize) {
        self.resize(net, batch);
        self.valid_from = None;
    }
}

/// Collected parameter gradients, laid out like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &LstmNetwork) -> Self {
        Self {
            values: vec![0.0; net.param_count()],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn clear(&mut self) {
        self.values.fill(0.0);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

impl LstmNetwork {
    fn check_inputs<X: AsRef<[f64]>>(&self, inputs: &[X]) -> Result<(), DrnnError> {
        let max = self.shape().max_input_bits;
        for x in inputs {
            if x.as_ref().len() > max {
                return Err(DrnnError::InputTooWide {
                    max,
                    found: x.as_ref().len(),
                });
            }
        }
        Ok(())
    }

    /// Full forward pass over a batch of real-valued input vectors, each at
    /// most `max_input_bits` long (shorter vectors are zero-padded).
    pub fn forward_batch<X: AsRef<[f64]>>(
        &self,
        inputs: &[X],
        cache: &mut ForwardCache,
    ) -> Result<(), DrnnError> {
        self.check_inputs(inputs)?;
        cache.resize(self, inputs.len());
        self.run_forward(inputs, cache, 0);
        Ok(())
    }

    /// Resumes a forward pass at timestep `t0`; states after `t0 - 1` must
    /// already be in the cache (from a pass over the same batch size or
    /// from [`ForwardCache::set_state`]). Inputs before `t0` are ignored.
    pub fn forward_from<X: AsRef<[f64]>>(
        &self,
        inputs: &[X],
        cache: &mut ForwardCache,
        t0: usize,
    ) -> Result<(), DrnnError> {
        self.check_inputs(inputs)?;
        if cache.batch != inputs.len() {
            return Err(DrnnError::ShapeMismatch("batch size differs from the cached pass".into()));
        }
        self.run_forward(inputs, cache, t0);
        Ok(())
    }

    /// Forward pass on one bit vector.
    pub fn forward(&self, x: &crate::bits::BitVector) -> Result<Vec<f64>, DrnnError> {
        self.forward_real(&x.to_f64())
    }

    pub fn forward_real(&self, x: &[f64]) -> Result<Vec<f64>, DrnnError> {
        let mut cache = ForwardCache::new(self);
        self.forward_batch(&[x], &mut cache)?;
        Ok(cache.output(0).to_vec())
    }

    fn run_forward<X: AsRef<[f64]>>(&self, inputs: &[X], cache: &mut ForwardCache, t0: usize) {
        let shape = self.shape();
        let steps = shape.timesteps();
        let w = shape.chunk_width;
        let batch = inputs.len();
        let nl = shape.layers();
        for t in t0..steps {
            for l in 0..nl {
                let ll = &self.layout.layers[l];
                let (hw, k, g) = (ll.hidden, ll.k, ll.gates());
                // Assemble v = [h_{t-1}, x_t].
                {
                    let (lower, upper) = cache.layers.split_at_mut(l);
                    let lc = &mut upper[0];
                    for b in 0..batch {
                        let at = (t * batch + b) * k;
                        let v = &mut lc.v[at..at + k];
                        if t == 0 {
                            v[..hw].fill(0.0);
                        } else {
                            let hp = ((t - 1) * batch + b) * hw;
                            v[..hw].copy_from_slice(&lc.h[hp..hp + hw]);
                        }
                        if l == 0 {
                            let x = inputs[b].as_ref();
                            for (p, slot) in v[hw..].iter_mut().enumerate() {
                                *slot = x.get(t * w + p).copied().unwrap_or(0.0);
                            }
                        } else {
                            let hl = ll.input;
                            let at_lo = (t * batch + b) * hl;
                            v[hw..].copy_from_slice(&lower[l - 1].h[at_lo..at_lo + hl]);
                        }
                    }
                }

                let p = &self.params;
                let wmat = &p[ll.w..ll.w + k * g];
                let bias = &p[ll.bias..ll.bias + g];
                let lc = &mut cache.layers[l];
                let act = &mut lc.act[t * batch * g..(t + 1) * batch * g];
                for b in 0..batch {
                    act[b * g..(b + 1) * g].copy_from_slice(bias);
                }
                let vblock = &lc.v[t * batch * k..(t + 1) * batch * k];
                for kk in 0..k {
                    let row = &wmat[kk * g..(kk + 1) * g];
                    for b in 0..batch {
                        let vb = vblock[b * k + kk];
                        if vb != 0.0 {
                            axpy(&mut act[b * g..(b + 1) * g], vb, row);
                        }
                    }
                }
                let pf = &p[ll.peep_f..ll.peep_f + hw];
                let pi = &p[ll.peep_i..ll.peep_i + hw];
                let po = &p[ll.peep_o..ll.peep_o + hw];
                for b in 0..batch {
                    let a = &mut act[b * g..(b + 1) * g];
                    let cur = (t * batch + b) * hw;
                    for j in 0..hw {
                        let cp = if t == 0 {
                            0.0
                        } else {
                            lc.c[((t - 1) * batch + b) * hw + j]
                        };
                        let f = sigmoid(a[j] + pf[j] * cp);
                        let i = sigmoid(a[hw + j] + pi[j] * cp);
                        let o = sigmoid(a[2 * hw + j] + po[j] * cp);
                        let gg = libm::tanh(a[3 * hw + j]);
                        a[j] = f;
                        a[hw + j] = i;
                        a[2 * hw + j] = o;
                        a[3 * hw + j] = gg;
                        let c = f * cp + i * gg;
                        let tc = libm::tanh(c);
                        lc.c[cur + j] = c;
                        lc.tc[cur + j] = tc;
                        lc.h[cur + j] = o * tc;
                    }
                }
            }
        }
        // Readout from the last layer's final hidden state.
        let last = nl - 1;
        let hw = shape.hidden[last];
        let o = shape.outputs;
        let (rw, rb) = self.readout();
        let lc = &cache.layers[last];
        for b in 0..batch {
            let z = &mut cache.out[b * o..(b + 1) * o];
            z.copy_from_slice(rb);
            let at = ((steps - 1) * batch + b) * hw;
            for j in 0..hw {
                let hj = lc.h[at + j];
                if hj != 0.0 {
                    axpy(z, hj, &rw[j * o..(j + 1) * o]);
                }
            }
        }
        cache.valid_from = Some(match cache.valid_from {
            Some(v) if t0 > 0 => v.min(t0),
            _ => t0,
        });
    }

    /// Backpropagates output errors `dz` (batch × outputs, ∂E/∂z) through
    /// time, adding parameter gradients into `grads`.
    pub fn backward(
        &self,
        cache: &mut ForwardCache,
        dz: &[f64],
        grads: &mut Gradients,
    ) -> Result<(), DrnnError> {
        self.run_backward(cache, dz, Some(grads.as_mut_slice()), None, 0)
    }

    /// Gradient of the loss with respect to the inputs of timesteps
    /// `t_min..T`, written to `dx` (batch × `T·chunk_width`, positions
    /// before `t_min·chunk_width` untouched). Parameters are not updated.
    pub fn input_gradients(
        &self,
        cache: &mut ForwardCache,
        dz: &[f64],
        dx: &mut [f64],
        t_min: usize,
    ) -> Result<(), DrnnError> {
        self.run_backward(cache, dz, None, Some(dx), t_min)
    }

    fn run_backward(
        &self,
        cache: &mut ForwardCache,
        dz: &[f64],
        mut grads: Option<&mut [f64]>,
        mut dx_out: Option<&mut [f64]>,
        t_min: usize,
    ) -> Result<(), DrnnError> {
        let Some(valid_from) = cache.valid_from else {
            return Err(DrnnError::MissingForwardCache);
        };
        if valid_from > t_min && t_min < self.shape().timesteps() {
            return Err(DrnnError::MissingForwardCache);
        }
        let shape = self.shape().clone();
        let batch = cache.batch;
        let steps = shape.timesteps();
        let nl = shape.layers();
        let o = shape.outputs;
        let w = shape.chunk_width;
        if dz.len() != batch * o {
            return Err(DrnnError::ShapeMismatch("output error has the wrong length".into()));
        }
        if let Some(g) = grads.as_deref() {
            if g.len() != self.param_count() {
                return Err(DrnnError::ShapeMismatch("gradient buffer has the wrong length".into()));
            }
        }
        if let Some(dx) = dx_out.as_deref() {
            if dx.len() != batch * steps * w {
                return Err(DrnnError::ShapeMismatch("input gradient buffer has the wrong length".into()));
            }
        }

        // Readout.
        let last = nl - 1;
        let htop = shape.hidden[last];
        let (rw, _) = self.readout();
        {
            let lc = &cache.layers[last];
            for b in 0..batch {
                let at = ((steps - 1) * batch + b) * htop;
                let dzb = &dz[b * o..(b + 1) * o];
                for j in 0..htop {
                    cache.dh_top[b * htop + j] = dot(&rw[j * o..(j + 1) * o], dzb);
                }
                if let Some(g) = grads.as_deref_mut() {
                    let (lw, lb) = (self.layout.readout_w, self.layout.readout_b);
                    for j in 0..htop {
                        let hj = lc.h[at + j];
                        if hj != 0.0 {
                            axpy(&mut g[lw + j * o..lw + (j + 1) * o], hj, dzb);
                        }
                    }
                    axpy(&mut g[lb..lb + o], 1.0, dzb);
                }
            }
        }

        for lc in cache.layers.iter_mut() {
            lc.dh_carry.fill(0.0);
            lc.dc_carry.fill(0.0);
        }

        for t in (t_min..steps).rev() {
            for l in (0..nl).rev() {
                let ll: &LayerLayout = &self.layout.layers[l];
                let (hw, k, g) = (ll.hidden, ll.k, ll.gates());
                // dh flowing into (l, t).
                for b in 0..batch {
                    let carry = &cache.layers[l].dh_carry[b * hw..(b + 1) * hw];
                    let dst = &mut cache.dh_in[b * hw..(b + 1) * hw];
                    dst.copy_from_slice(carry);
                    if l == last {
                        if t == steps - 1 {
                            axpy(dst, 1.0, &cache.dh_top[b * htop..(b + 1) * htop]);
                        }
                    } else {
                        // dx from the layer above holds its x-part of dv.
                        let kup = self.layout.layers[l + 1].k;
                        let hup = self.layout.layers[l + 1].hidden;
                        axpy(dst, 1.0, &cache.dx[b * kup + hup..b * kup + hup + hw]);
                    }
                }

                let p = &self.params;
                let pf = &p[ll.peep_f..ll.peep_f + hw];
                let pi = &p[ll.peep_i..ll.peep_i + hw];
                let po = &p[ll.peep_o..ll.peep_o + hw];
                let lc = &mut cache.layers[l];
                let da = &mut cache.da[..batch * g];
                for b in 0..batch {
                    let cur = (t * batch + b) * hw;
                    let a = &lc.act[(t * batch + b) * g..(t * batch + b + 1) * g];
                    let dab = &mut da[b * g..(b + 1) * g];
                    for j in 0..hw {
                        let (f, i, og, gg) = (a[j], a[hw + j], a[2 * hw + j], a[3 * hw + j]);
                        let cp = if t == 0 {
                            0.0
                        } else {
                            lc.c[((t - 1) * batch + b) * hw + j]
                        };
                        let tc = lc.tc[cur + j];
                        let dh = cache.dh_in[b * hw + j];
                        let da_o = dh * tc * og * (1.0 - og);
                        let dc = lc.dc_carry[b * hw + j] + dh * og * (1.0 - tc * tc);
                        let da_f = dc * cp * f * (1.0 - f);
                        let da_i = dc * gg * i * (1.0 - i);
                        let da_g = dc * i * (1.0 - gg * gg);
                        lc.dc_carry[b * hw + j] =
                            dc * f + pf[j] * da_f + pi[j] * da_i + po[j] * da_o;
                        dab[j] = da_f;
                        dab[hw + j] = da_i;
                        dab[2 * hw + j] = da_o;
                        dab[3 * hw + j] = da_g;
                    }
                    if let Some(gr) = grads.as_deref_mut() {
                        if t > 0 {
                            let prev = ((t - 1) * batch + b) * hw;
                            for j in 0..hw {
                                let cp = lc.c[prev + j];
                                gr[ll.peep_f + j] += dab[j] * cp;
                                gr[ll.peep_i + j] += dab[hw + j] * cp;
                                gr[ll.peep_o + j] += dab[2 * hw + j] * cp;
                            }
                        }
                        axpy(&mut gr[ll.bias..ll.bias + g], 1.0, dab);
                    }
                }

                let vblock = &lc.v[t * batch * k..(t + 1) * batch * k];
                if let Some(gr) = grads.as_deref_mut() {
                    let gw = &mut gr[ll.w..ll.w + k * g];
                    for kk in 0..k {
                        let row = &mut gw[kk * g..(kk + 1) * g];
                        for b in 0..batch {
                            let vb = vblock[b * k + kk];
                            if vb != 0.0 {
                                axpy(row, vb, &da[b * g..(b + 1) * g]);
                            }
                        }
                    }
                }

                // dv = Wᵀ da, restricted to the parts something consumes.
                let need_h = t > t_min;
                let need_x = l > 0 || dx_out.is_some();
                let wmat = &p[ll.w..ll.w + k * g];
                let lo = if need_h { 0 } else { hw };
                let hi = if need_x { k } else { hw };
                let dv = &mut cache.dv[..batch * k];
                for kk in lo..hi.max(lo) {
                    let row = &wmat[kk * g..(kk + 1) * g];
                    for b in 0..batch {
                        dv[b * k + kk] = dot(row, &da[b * g..(b + 1) * g]);
                    }
                }
                if need_h {
                    for b in 0..batch {
                        lc.dh_carry[b * hw..(b + 1) * hw].copy_from_slice(&dv[b * k..b * k + hw]);
                    }
                }
                if need_x {
                    if l > 0 {
                        cache.dx[..batch * k].copy_from_slice(dv);
                    } else if let Some(dxo) = dx_out.as_deref_mut() {
                        for b in 0..batch {
                            let dst = &mut dxo[b * steps * w + t * w..b * steps * w + (t + 1) * w];
                            dst.copy_from_slice(&dv[b * k + hw..b * k + hw + w]);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
