use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::DrnnError;
use crate::rng;

/// Half-width of the uniform weight initialization interval.
pub const INIT_RANGE: f64 = 0.05;

/// Gate blocks inside a layer's fused weight row, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LstmGate {
    Forget = 0,
    Input = 1,
    Output = 2,
    Cell = 3,
}

/// Dimensions of an [`LstmNetwork`].
///
/// A bit vector of up to `max_input_bits` bits is cut into
/// `timesteps() = ceil(max_input_bits / chunk_width)` chunks of
/// `chunk_width` bits, zero-padded, one chunk per timestep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub chunk_width: usize,
    pub max_input_bits: usize,
    /// One entry per recurrent layer ("1HL" or "2HL").
    pub hidden: Vec<usize>,
    pub outputs: usize,
}

impl NetShape {
    pub fn new(max_input_bits: usize, outputs: usize, hidden: &[usize], chunk_width: usize) -> Self {
        Self {
            chunk_width,
            max_input_bits,
            hidden: hidden.to_vec(),
            outputs,
        }
    }

    pub fn timesteps(&self) -> usize {
        self.max_input_bits.div_ceil(self.chunk_width)
    }

    pub fn layers(&self) -> usize {
        self.hidden.len()
    }

    pub fn validate(&self) -> Result<(), DrnnError> {
        let bad = |m: String| Err(DrnnError::InvalidShape(m));
        if self.chunk_width == 0 {
            return bad("chunk width must be positive".into());
        }
        if self.max_input_bits == 0 {
            return bad("input width must be positive".into());
        }
        if self.outputs == 0 {
            return bad("output width must be positive".into());
        }
        if !(1..=2).contains(&self.hidden.len()) {
            return bad(format!("{} hidden layers; expected 1 or 2", self.hidden.len()));
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LayerLayout {
    pub input: usize,
    pub hidden: usize,
    /// hidden + input: width of `[h_{t-1}, x_t]`.
    pub k: usize,
    pub w: usize,
    pub peep_f: usize,
    pub peep_i: usize,
    pub peep_o: usize,
    pub bias: usize,
}

impl LayerLayout {
    pub fn gates(&self) -> usize {
        4 * self.hidden
    }
}

/// Offsets of every parameter block inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub layers: Vec<LayerLayout>,
    pub readout_w: usize,
    pub readout_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(shape: &NetShape) -> Self {
        let mut off = 0;
        let mut layers = Vec::with_capacity(shape.layers());
        let mut input = shape.chunk_width;
        for &hidden in &shape.hidden {
            let k = hidden + input;
            let w = off;
            off += k * 4 * hidden;
            let peep_f = off;
            off += hidden;
            let peep_i = off;
            off += hidden;
            let peep_o = off;
            off += hidden;
            let bias = off;
            off += 4 * hidden;
            layers.push(LayerLayout {
                input,
                hidden,
                k,
                w,
                peep_f,
                peep_i,
                peep_o,
                bias,
            });
            input = hidden;
        }
        let last = *shape.hidden.last().expect("validated shape");
        let readout_w = off;
        off += last * shape.outputs;
        let readout_b = off;
        off += shape.outputs;
        Self {
            layers,
            readout_w,
            readout_b,
            total: off,
        }
    }
}

/// Borrowed parameters of one LSTM layer.
///
/// `w` is the fused `[h_{t-1}, x_t] → gates` matrix stored row per input
/// position: entry `w[k * 4H + gate * H + j]` feeds hidden unit `j` of
/// `gate` ([`LstmGate`] order) from concatenated input `k`, where
/// `k < H` indexes `h_{t-1}` and `k ≥ H` indexes `x_t`.
#[derive(Debug)]
pub struct LayerParams<'a> {
    pub w: &'a [f64],
    pub peep_f: &'a [f64],
    pub peep_i: &'a [f64],
    pub peep_o: &'a [f64],
    pub bias: &'a [f64],
}

#[derive(Debug)]
pub struct LayerParamsMut<'a> {
    pub w: &'a mut [f64],
    pub peep_f: &'a mut [f64],
    pub peep_i: &'a mut [f64],
    pub peep_o: &'a mut [f64],
    pub bias: &'a mut [f64],
}

/// Stacked peephole LSTM layers with a linear readout of the last layer's
/// final hidden state. All parameters live in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    shape: NetShape,
    pub(crate) layout: Layout,
    pub(crate) params: Vec<f64>,
    seed: u64,
}

impl LstmNetwork {
    /// Weights uniform in [-0.05, 0.05].
    pub fn new(shape: NetShape, seed: u64) -> Result<Self, DrnnError> {
        let mut net = Self::zeros(shape)?;
        net.seed = seed;
        let mut r = rng::seeded(seed);
        for p in net.params.iter_mut() {
            *p = r.gen_range(-INIT_RANGE..=INIT_RANGE);
        }
        Ok(net)
    }

    pub fn zeros(shape: NetShape) -> Result<Self, DrnnError> {
        shape.validate()?;
        let layout = Layout::new(&shape);
        Ok(Self {
            params: vec![0.0; layout.total],
            layout,
            shape,
            seed: 0,
        })
    }

    pub(crate) fn from_parts(shape: NetShape, params: Vec<f64>, seed: u64) -> Result<Self, DrnnError> {
        shape.validate()?;
        let layout = Layout::new(&shape);
        if params.len() != layout.total {
            return Err(DrnnError::InvalidShape(format!(
                "{} parameters for a shape needing {}",
                params.len(),
                layout.total
            )));
        }
        Ok(Self {
            shape,
            layout,
            params,
            seed,
        })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn init_seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer(&self, l: usize) -> LayerParams<'_> {
        let ll = &self.layout.layers[l];
        let p = &self.params;
        LayerParams {
            w: &p[ll.w..ll.w + ll.k * ll.gates()],
            peep_f: &p[ll.peep_f..ll.peep_f + ll.hidden],
            peep_i: &p[ll.peep_i..ll.peep_i + ll.hidden],
            peep_o: &p[ll.peep_o..ll.peep_o + ll.hidden],
            bias: &p[ll.bias..ll.bias + ll.gates()],
        }
    }

    pub fn layer_mut(&mut self, l: usize) -> LayerParamsMut<'_> {
        let ll = self.layout.layers[l].clone();
        let (_, rest) = self.params.split_at_mut(ll.w);
        let (w, rest) = rest.split_at_mut(ll.k * ll.gates());
        let (peep_f, rest) = rest.split_at_mut(ll.hidden);
        let (peep_i, rest) = rest.split_at_mut(ll.hidden);
        let (peep_o, rest) = rest.split_at_mut(ll.hidden);
        let (bias, _) = rest.split_at_mut(ll.gates());
        LayerParamsMut {
            w,
            peep_f,
            peep_i,
            peep_o,
            bias,
        }
    }

    /// Readout weights (`hidden × outputs`, row per hidden unit) and bias.
    pub fn readout(&self) -> (&[f64], &[f64]) {
        let l = &self.layout;
        (
            &self.params[l.readout_w..l.readout_b],
            &self.params[l.readout_b..l.total],
        )
    }

    pub fn readout_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let (rw, rb, total) = (self.layout.readout_w, self.layout.readout_b, self.layout.total);
        let (w, b) = self.params[rw..total].split_at_mut(rb - rw);
        (w, b)
    }

    /// Flat index of the readout weight from hidden unit `j` to output `q`.
    pub fn readout_index(&self, j: usize, q: usize) -> usize {
        self.layout.readout_w + j * self.shape.outputs + q
    }
}
