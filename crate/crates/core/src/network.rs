//! Fully-connected tanh network `u(x, t)` with a flat parameter view.
//!
//! Parameters are laid out layer by layer; each layer stores its weight
//! matrix row-major (one row per output neuron) followed by its biases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, LeafRole, Result};
use crate::jet::Jet;
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    fn tag(self) -> u32 {
        match self {
            Activation::Tanh => 0,
        }
    }

    fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Tanh),
            other => Err(Error::Checkpoint(format!("unknown activation tag {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    activation: Activation,
    seed: u64,
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct LayerView {
    n_in: usize,
    n_out: usize,
    weights: usize,
    biases: usize,
}

fn layer_views(sizes: &[usize]) -> Vec<LayerView> {
    let mut offset = 0;
    sizes
        .windows(2)
        .map(|w| {
            let (n_in, n_out) = (w[0], w[1]);
            let view = LayerView {
                n_in,
                n_out,
                weights: offset,
                biases: offset + n_in * n_out,
            };
            offset += n_in * n_out + n_out;
            view
        })
        .collect()
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// `[d + 1, neurons x hidden_layers, 1]`.
pub fn layer_sizes_for(d: usize, hidden_layers: usize, neurons: usize) -> Vec<usize> {
    let mut sizes = vec![d + 1];
    sizes.extend(std::iter::repeat_n(neurons, hidden_layers));
    sizes.push(1);
    sizes
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
        return Err(Error::InvalidLayerSizes(sizes.to_vec()));
    }
    Ok(())
}

const MAGIC: &[u8; 8] = b"PIATNET\0";
const FORMAT_VERSION: u32 = 1;

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Mlp> {
        validate_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; param_count(layer_sizes)];
        for view in layer_views(layer_sizes) {
            let bound = (6.0 / (view.n_in + view.n_out) as f64).sqrt();
            for w in &mut params[view.weights..view.biases] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            params,
            activation: Activation::Tanh,
            seed,
        })
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>, seed: u64) -> Result<Mlp> {
        validate_sizes(layer_sizes)?;
        let expected = param_count(layer_sizes);
        if params.len() != expected {
            return Err(Error::ParamLength {
                expected,
                got: params.len(),
            });
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            params,
            activation: Activation::Tanh,
            seed,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Spatial dimension `d`; the last input is time.
    pub fn spatial_dim(&self) -> usize {
        self.layer_sizes[0] - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn activation(&self) -> Activation {
        self.activation
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

    pub fn squared_norm(&self) -> f64 {
        self.params.iter().map(|p| p * p).sum()
    }

    /// Records every parameter as a leaf. Leaves occupy tape ids
    /// `start..start + param_count()` in parameter order.
    pub fn record_params(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        let mut leaves = Vec::with_capacity(self.params.len());
        for view in layer_views(&self.layer_sizes) {
            for &w in &self.params[view.weights..view.biases] {
                leaves.push(tape.leaf(w, LeafRole::Weight)?);
            }
            for &b in &self.params[view.biases..view.biases + view.n_out] {
                leaves.push(tape.leaf(b, LeafRole::Bias)?);
            }
        }
        Ok(leaves)
    }

    /// Plain forward pass, no tape.
    pub fn predict(&self, input: &[f64]) -> f64 {
        assert_eq!(input.len(), self.input_dim());
        let views = layer_views(&self.layer_sizes);
        let mut a = input.to_vec();
        let mut next = Vec::new();
        for (l, view) in views.iter().enumerate() {
            next.clear();
            let w = &self.params[view.weights..view.biases];
            for j in 0..view.n_out {
                let row = &w[j * view.n_in..(j + 1) * view.n_in];
                let z: f64 = self.params[view.biases + j]
                    + row.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>();
                next.push(if l + 1 < views.len() { z.tanh() } else { z });
            }
            std::mem::swap(&mut a, &mut next);
        }
        a[0]
    }

    /// Forward pass of jets through the network.
    ///
    /// `leaves` must come from [`Mlp::record_params`] on the same tape. At
    /// most one input may carry a jet of order > 0; the others are treated
    /// as constants along the expansion direction.
    pub fn forward(&self, tape: &mut Tape, leaves: &[Var], inputs: &[Jet]) -> Result<Jet> {
        let mut carrier = None;
        for (i, j) in inputs.iter().enumerate() {
            if j.order() > 0 {
                if carrier.is_some() {
                    return Err(Error::JetInputConflict);
                }
                carrier = Some(i);
            }
        }
        let point: Vec<Var> = inputs.iter().map(Jet::value).collect();
        match carrier {
            Some(c) => {
                let mut out = self.forward_directions(tape, leaves, &point, &[(c, &inputs[c])])?;
                Ok(out.pop().expect("one direction"))
            }
            None => {
                let out = self.forward_directions(tape, leaves, &point, &[])?;
                Ok(Jet::from_coeffs(vec![out[0].value()]))
            }
        }
    }

    /// Output jets along several input directions at one point.
    ///
    /// Direction `(i, jet)` expands input `i` as `jet` with every other input
    /// held at `point`; `jet.value()` should be `point[i]`. All directions
    /// share one value chain, so the returned jets have the same constant
    /// coefficient. With no directions, a single order-0 jet is returned.
    pub fn forward_directions(
        &self,
        tape: &mut Tape,
        leaves: &[Var],
        point: &[Var],
        dirs: &[(usize, &Jet)],
    ) -> Result<Vec<Jet>> {
        if point.len() != self.input_dim() {
            return Err(Error::InputWidth {
                expected: self.input_dim(),
                got: point.len(),
            });
        }
        if leaves.len() != self.params.len() {
            return Err(Error::ParamLength {
                expected: self.params.len(),
                got: leaves.len(),
            });
        }
        if let Some(&(i, _)) = dirs.iter().find(|(i, _)| *i >= point.len()) {
            return Err(Error::InputWidth {
                expected: self.input_dim(),
                got: i + 1,
            });
        }
        let views = layer_views(&self.layer_sizes);
        let n_layers = views.len();
        let one = tape.constant(1.0);

        // values[j]: constant coefficient of neuron j; higher[d][j]: the
        // full jet of neuron j along direction d.
        let mut values: Vec<Var> = Vec::new();
        let mut higher: Vec<Vec<Jet>> = vec![Vec::new(); dirs.len()];
        let mut acc: Vec<Var> = Vec::new();

        for (l, view) in views.iter().enumerate() {
            let last = l + 1 == n_layers;
            let mut next_values = Vec::with_capacity(view.n_out);
            let mut next_higher: Vec<Vec<Jet>> = vec![Vec::with_capacity(view.n_out); dirs.len()];
            for j in 0..view.n_out {
                let row = view.weights + j * view.n_in;
                let w = &leaves[row..row + view.n_in];
                let inputs: &[Var] = if l == 0 { point } else { &values };
                let mut z0 = tape.mul(w[0], inputs[0]);
                z0 = tape.add(z0, leaves[view.biases + j]);
                for (&wi, &a) in w.iter().zip(inputs).skip(1) {
                    let p = tape.mul(wi, a);
                    z0 = tape.add(z0, p);
                }
                let (t0, s0) = if last {
                    (z0, z0)
                } else {
                    let t0 = tape.tanh(z0);
                    let sq = tape.mul(t0, t0);
                    (t0, tape.sub(one, sq))
                };
                next_values.push(t0);

                for (d, &(c, seed)) in dirs.iter().enumerate() {
                    acc.clear();
                    acc.push(z0);
                    if l == 0 {
                        // Only the expanded input has higher coefficients.
                        for &ck in &seed.coeffs()[1..] {
                            acc.push(tape.mul(w[c], ck));
                        }
                    } else {
                        let prev = &higher[d];
                        for &c in &prev[0].coeffs()[1..] {
                            acc.push(tape.mul(w[0], c));
                        }
                        for (&wi, a) in w.iter().zip(prev).skip(1) {
                            for (slot, &c) in acc[1..].iter_mut().zip(&a.coeffs()[1..]) {
                                let p = tape.mul(wi, c);
                                *slot = tape.add(*slot, p);
                            }
                        }
                    }
                    let z = Jet::from_coeffs(acc.clone());
                    next_higher[d].push(if last { z } else { z.tanh_from(tape, t0, s0) });
                }
            }
            values = next_values;
            higher = next_higher;
        }
        if dirs.is_empty() {
            return Ok(vec![Jet::from_coeffs(vec![values[0]])]);
        }
        Ok(higher.into_iter().map(|mut h| h.pop().expect("output width is 1")).collect())
    }

    /// Checkpoint bytes. Layout (all little-endian):
    ///
    /// ```text
    /// magic       8 bytes  "PIATNET\0"
    /// version     u32      = 1
    /// activation  u32      0 = tanh
    /// seed        u64
    /// d           u32      spatial dimension
    /// n_layers    u32      number of entries in layer_sizes
    /// layer_sizes u32 x n_layers
    /// n_params    u64
    /// params      f64 x n_params
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + 4 * self.layer_sizes.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.activation.tag().to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.spatial_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.layer_sizes.len() as u32).to_le_bytes());
        for &n in &self.layer_sizes {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Mlp> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let activation = Activation::from_tag(r.u32()?)?;
        let seed = r.u64()?;
        let d = r.u32()? as usize;
        let n_layers = r.u32()? as usize;
        if n_layers > 4096 {
            return Err(Error::Checkpoint(format!("implausible layer count {n_layers}")));
        }
        let sizes = (0..n_layers)
            .map(|_| r.u32().map(|n| n as usize))
            .collect::<Result<Vec<_>>>()?;
        validate_sizes(&sizes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if sizes[0] != d + 1 {
            return Err(Error::Checkpoint(format!(
                "header d={d} disagrees with input width {}",
                sizes[0]
            )));
        }
        let n_params = r.u64()? as usize;
        if n_params != param_count(&sizes) {
            return Err(Error::Checkpoint(format!(
                "{n_params} parameters for layer sizes {sizes:?}"
            )));
        }
        let raw = r.take(n_params.checked_mul(8).ok_or_else(|| {
            Error::Checkpoint("parameter count overflow".into())
        })?)?;
        let params = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Mlp {
            layer_sizes: sizes,
            params,
            activation,
            seed,
        })
    }

    /// Loads a checkpoint and checks it against the expected spatial dimension.
    pub fn from_bytes_for(bytes: &[u8], d: usize) -> Result<Mlp> {
        let net = Mlp::from_bytes(bytes)?;
        if net.spatial_dim() != d {
            return Err(Error::Checkpoint(format!(
                "checkpoint is for d={}, problem has d={d}",
                net.spatial_dim()
            )));
        }
        Ok(net)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated payload".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
