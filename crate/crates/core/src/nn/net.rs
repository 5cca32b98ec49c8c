use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fht::HoughSpace;
use crate::geometry::{AxisStep, Branch, CoordChain};
use crate::nn::layers::{
    conv_backward, conv_forward, fht_layer_backward, fht_layer_dims, fht_layer_forward, fht_padded_len,
    one_minus_rbf_backward, one_minus_rbf_forward, relu_backward, relu_forward,
};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub filters: usize,
    /// `(rows, cols)`.
    pub kernel: (usize, usize),
    /// `(rows, cols)`.
    pub stride: (usize, usize),
}

impl ConvSpec {
    pub fn param_count(&self) -> usize {
        self.filters * self.in_channels * self.kernel.0 * self.kernel.1
    }

    pub fn out_dims(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        (h >= self.kernel.0 && w >= self.kernel.1)
            .then(|| ((h - self.kernel.0) / self.stride.0 + 1, (w - self.kernel.1) / self.stride.1 + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv(ConvSpec),
    Relu,
    Fht { space: HoughSpace },
    OneMinusRbf,
}

/// Filters, kernel and stride of one convolution in an [`ArchConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvShape {
    pub filters: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
}

impl ConvShape {
    pub const fn new(filters: usize, kernel: (usize, usize), stride: (usize, usize)) -> Self {
        Self { filters, kernel, stride }
    }
}

/// Convolution blocks around the two FHT layers of a HoughNet branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub in_channels: usize,
    pub pre: Vec<ConvShape>,
    pub mid: Vec<ConvShape>,
    pub post: Vec<ConvShape>,
}

impl ArchConfig {
    /// Full-size architecture: 31196 weights per branch.
    pub fn standard() -> Self {
        let c = ConvShape::new;
        Self {
            in_channels: 1,
            pre: vec![c(12, (5, 5), (1, 1)), c(12, (5, 5), (2, 2)), c(12, (5, 5), (1, 1))],
            mid: vec![c(12, (3, 9), (1, 1)), c(12, (3, 5), (1, 1)), c(12, (3, 9), (1, 1)), c(12, (3, 5), (1, 1))],
            post: vec![c(16, (5, 5), (3, 3)), c(16, (5, 5), (3, 3)), c(1, (5, 5), (1, 1))],
        }
    }

    /// Same layer kinds and ordering with `filters` channels and small kernels,
    /// for desk-scale inputs (32-64 px).
    pub fn compact(filters: usize) -> Self {
        let c = ConvShape::new;
        let f = filters;
        Self {
            in_channels: 1,
            pre: vec![c(f, (3, 3), (1, 1)), c(f, (3, 3), (2, 2)), c(f, (3, 3), (1, 1))],
            mid: vec![c(f, (3, 5), (1, 1)), c(f, (3, 3), (1, 1)), c(f, (3, 5), (1, 1)), c(f, (3, 3), (1, 1))],
            post: vec![c(f, (3, 3), (2, 2)), c(f, (3, 3), (1, 1)), c(1, (3, 3), (1, 1))],
        }
    }
}

/// One branch of the network as an ordered layer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub branch: Branch,
    pub layers: Vec<LayerSpec>,
}

/// One layer row: a conv or FHT layer with its activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub layer: LayerSpec,
    pub activation: Option<LayerSpec>,
}

impl NetworkSpec {
    pub fn param_count(&self) -> usize {
        self.convs().map(|c| c.param_count()).sum()
    }

    pub fn convs(&self) -> impl Iterator<Item = &ConvSpec> {
        self.layers.iter().filter_map(|l| match l {
            LayerSpec::Conv(c) => Some(c),
            _ => None,
        })
    }

    pub fn rows(&self) -> Vec<TableRow> {
        let mut rows: Vec<TableRow> = Vec::new();
        for l in &self.layers {
            match l {
                LayerSpec::Relu | LayerSpec::OneMinusRbf => {
                    if let Some(last) = rows.last_mut() {
                        last.activation = Some(*l);
                    }
                }
                _ => rows.push(TableRow { layer: *l, activation: None }),
            }
        }
        rows
    }

    /// Positions of the FHT layers in `layers`.
    pub fn fht_positions(&self) -> Vec<usize> {
        self.layers.iter().enumerate().filter(|(_, l)| matches!(l, LayerSpec::Fht { .. })).map(|(i, _)| i).collect()
    }

    /// Shape of every layer input plus the final output.
    pub fn shape_trace(&self, input: (usize, usize, usize)) -> Result<Vec<(usize, usize, usize)>> {
        let mut shapes = vec![input];
        let mut cur = input;
        for (i, l) in self.layers.iter().enumerate() {
            cur = match l {
                LayerSpec::Conv(c) => {
                    if cur.0 != c.in_channels {
                        return Err(Error::Shape {
                            expected: format!("{} channels into layer {i}", c.in_channels),
                            actual: format!("{}", cur.0),
                        });
                    }
                    let (h, w) = c.out_dims(cur.1, cur.2).ok_or_else(|| Error::Shape {
                        expected: format!("at least {}x{} into layer {i}", c.kernel.0, c.kernel.1),
                        actual: format!("{}x{}", cur.1, cur.2),
                    })?;
                    (c.filters, h, w)
                }
                LayerSpec::Fht { space } => {
                    let (h, w) = fht_layer_dims(*space, cur.1, cur.2);
                    (cur.0, h, w)
                }
                LayerSpec::Relu | LayerSpec::OneMinusRbf => cur,
            };
            shapes.push(cur);
        }
        Ok(shapes)
    }

    fn chain_of(&self, range: std::ops::Range<usize>) -> CoordChain {
        CoordChain::new(
            self.layers[range]
                .iter()
                .filter_map(|l| match l {
                    LayerSpec::Conv(c) => Some(AxisStep::conv(c.kernel, c.stride)),
                    _ => None,
                })
                .collect(),
        )
    }

    /// Coordinate chains before the first FHT, between the FHTs and after the second.
    pub fn chains(&self) -> Result<(CoordChain, CoordChain, CoordChain)> {
        let f = self.fht_positions();
        if f.len() != 2 {
            return Err(Error::InvalidArgument(format!("expected two FHT layers, found {}", f.len())));
        }
        Ok((self.chain_of(0..f[0]), self.chain_of(f[0] + 1..f[1]), self.chain_of(f[1] + 1..self.layers.len())))
    }

    /// `(h, w)` of the inputs of both FHT layers and their padded integration lengths.
    pub fn fht_inputs(&self, input: (usize, usize, usize)) -> Result<[(usize, usize, usize); 2]> {
        let shapes = self.shape_trace(input)?;
        let f = self.fht_positions();
        if f.len() != 2 {
            return Err(Error::InvalidArgument(format!("expected two FHT layers, found {}", f.len())));
        }
        let mut out = [(0, 0, 0); 2];
        for (k, &i) in f.iter().enumerate() {
            let LayerSpec::Fht { space } = self.layers[i] else { unreachable!() };
            let (_, h, w) = shapes[i];
            out[k] = (h, w, fht_padded_len(space, h, w));
        }
        Ok(out)
    }
}

/// Builds one branch from an architecture description.
pub fn build_network(branch: Branch, arch: &ArchConfig) -> Result<NetworkSpec> {
    if arch.post.last().map(|c| c.filters) != Some(1) {
        return Err(Error::InvalidArgument("last convolution must have exactly one filter".into()));
    }
    let mut layers = Vec::new();
    let mut ch = arch.in_channels;
    let mut push_convs = |layers: &mut Vec<LayerSpec>, convs: &[ConvShape], last_block: bool| {
        for (i, c) in convs.iter().enumerate() {
            layers.push(LayerSpec::Conv(ConvSpec { in_channels: ch, filters: c.filters, kernel: c.kernel, stride: c.stride }));
            ch = c.filters;
            if last_block && i + 1 == convs.len() {
                layers.push(LayerSpec::OneMinusRbf);
            } else {
                layers.push(LayerSpec::Relu);
            }
        }
    };
    push_convs(&mut layers, &arch.pre, false);
    layers.push(LayerSpec::Fht { space: branch.first_space() });
    push_convs(&mut layers, &arch.mid, false);
    layers.push(LayerSpec::Fht { space: HoughSpace::H34 });
    push_convs(&mut layers, &arch.post, true);
    Ok(NetworkSpec { branch, layers })
}

/// Full-size HoughNet branch.
pub fn build_houghnet(branch: Branch) -> NetworkSpec {
    build_network(branch, &ArchConfig::standard()).expect("standard architecture is valid")
}

/// Network spec plus one weight vector per convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub weights: Vec<Vec<f64>>,
}

/// Activations kept for the backward pass: the input of every layer and the output.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub activations: Vec<Tensor>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds at least the input")
    }
}

impl Network {
    /// Glorot-uniform initialization, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn init(spec: NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = spec
            .convs()
            .map(|c| {
                let area = (c.kernel.0 * c.kernel.1) as f64;
                let bound = (6.0 / (area * (c.in_channels + c.filters) as f64)).sqrt();
                (0..c.param_count()).map(|_| rng.random_range(-bound..bound)).collect()
            })
            .collect();
        Self { spec, weights }
    }

    pub fn from_weights(spec: NetworkSpec, weights: Vec<Vec<f64>>) -> Result<Self> {
        let expected: Vec<usize> = spec.convs().map(|c| c.param_count()).collect();
        let actual: Vec<usize> = weights.iter().map(|w| w.len()).collect();
        if expected != actual {
            return Err(Error::Shape { expected: format!("{expected:?}"), actual: format!("{actual:?}") });
        }
        Ok(Self { spec, weights })
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    pub fn forward_trace(&self, input: &Tensor) -> Result<ForwardTrace> {
        let mut activations = Vec::with_capacity(self.spec.layers.len() + 1);
        activations.push(input.clone());
        let mut conv_idx = 0;
        for layer in &self.spec.layers {
            let x = activations.last().expect("non-empty");
            let y = match layer {
                LayerSpec::Conv(c) => {
                    let y = conv_forward(x, &self.weights[conv_idx], c)?;
                    conv_idx += 1;
                    y
                }
                LayerSpec::Relu => relu_forward(x),
                LayerSpec::Fht { space } => fht_layer_forward(x, *space)?,
                LayerSpec::OneMinusRbf => one_minus_rbf_forward(x),
            };
            activations.push(y);
        }
        Ok(ForwardTrace { activations })
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let mut trace = self.forward_trace(input)?;
        Ok(trace.activations.pop().expect("non-empty"))
    }

    /// Weight gradients given the gradient of the loss with respect to the output.
    pub fn backward(&self, trace: &ForwardTrace, grad_out: &Tensor) -> Result<Vec<Vec<f64>>> {
        trace.output().same_shape(grad_out)?;
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.weights.len()];
        let mut conv_idx = self.weights.len();
        let mut g = grad_out.clone();
        for (i, layer) in self.spec.layers.iter().enumerate().rev() {
            let x = &trace.activations[i];
            g = match layer {
                LayerSpec::Conv(c) => {
                    conv_idx -= 1;
                    let (gx, gw) = conv_backward(&g, x, &self.weights[conv_idx], c)?;
                    grads[conv_idx] = gw;
                    gx
                }
                LayerSpec::Relu => relu_backward(&g, x),
                LayerSpec::Fht { space } => fht_layer_backward(&g, *space, x.h, x.w)?,
                LayerSpec::OneMinusRbf => one_minus_rbf_backward(&g, x),
            };
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_parameter_count() {
        for branch in [Branch::Vertical, Branch::Horizontal] {
            let spec = build_houghnet(branch);
            assert_eq!(spec.param_count(), 31196);
            let per_conv: Vec<usize> = spec.convs().map(|c| c.param_count()).collect();
            assert_eq!(per_conv, vec![300, 3600, 3600, 3888, 2160, 3888, 2160, 4800, 6400, 400]);
        }
    }

    #[test]
    fn standard_rows() {
        let v = build_houghnet(Branch::Vertical).rows();
        let h = build_houghnet(Branch::Horizontal).rows();
        assert_eq!(v.len(), 12);
        assert_eq!(v[3].layer, LayerSpec::Fht { space: HoughSpace::H12 });
        assert_eq!(h[3].layer, LayerSpec::Fht { space: HoughSpace::H34 });
        assert_eq!(v[8].layer, LayerSpec::Fht { space: HoughSpace::H34 });
        assert_eq!(h[8].layer, LayerSpec::Fht { space: HoughSpace::H34 });
        for (i, (a, b)) in v.iter().zip(&h).enumerate() {
            if i != 3 {
                assert_eq!(a, b);
            }
            match a.layer {
                LayerSpec::Conv(_) if i == 11 => assert_eq!(a.activation, Some(LayerSpec::OneMinusRbf)),
                LayerSpec::Conv(_) => assert_eq!(a.activation, Some(LayerSpec::Relu)),
                _ => assert_eq!(a.activation, None),
            }
        }
        let LayerSpec::Conv(c) = v[4].layer else { panic!() };
        assert_eq!((c.kernel, c.stride), ((3, 9), (1, 1)));
    }

    #[test]
    fn fht_layers_do_not_change_parameter_count() {
        let mut spec = build_houghnet(Branch::Vertical);
        let before = spec.param_count();
        spec.layers.retain(|l| !matches!(l, LayerSpec::Fht { .. }));
        assert_eq!(spec.param_count(), before);
    }

    #[test]
    fn shape_trace_256() {
        let spec = build_houghnet(Branch::Vertical);
        let shapes = spec.shape_trace((1, 256, 256)).unwrap();
        let rows = spec.rows();
        assert_eq!(rows.len(), 12);
        // conv 5x5 s1, conv 5x5 s2, conv 5x5 s1
        assert_eq!(shapes[2], (12, 252, 252));
        assert_eq!(shapes[4], (12, 124, 124));
        assert_eq!(shapes[6], (12, 120, 120));
        // H12 of 120x120 padded to 128 rows
        assert_eq!(shapes[7], (12, 256, 248));
        assert_eq!(*shapes.last().unwrap(), (1, 52, 51));
    }

    #[test]
    fn chains_split_at_fht_layers() {
        let spec = build_houghnet(Branch::Horizontal);
        let (pre, mid, post) = spec.chains().unwrap();
        assert_eq!((pre.steps.len(), mid.steps.len(), post.steps.len()), (3, 4, 3));
        assert_eq!(pre.affine(), ((2.0, 2.0), (8.0, 8.0)));
        assert_eq!(post.affine(), ((9.0, 9.0), (26.0, 26.0)));
        assert_eq!(mid.affine(), ((1.0, 1.0), (4.0, 12.0)));
    }

    #[test]
    fn rejects_multi_filter_output() {
        let mut arch = ArchConfig::compact(2);
        arch.post.last_mut().unwrap().filters = 2;
        assert!(build_network(Branch::Vertical, &arch).is_err());
    }
}
