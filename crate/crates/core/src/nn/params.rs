use rand_distr::{Distribution, Normal};

use super::arch::{ArchitectureSpec, LayerSpec};
use crate::{rng, Error, Result};

/// A flat tensor with its logical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// What a tensor is, for regularization and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    ConvWeight,
    ConvBias,
    DenseWeight,
    DenseBias,
}

/// Trainable weights of the encoder and decoder.
///
/// Convolution weights are laid out `[out, in, k, k]`, dense weights
/// `[out, in]`; every weighted layer is followed by its bias tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    pub arch: ArchitectureSpec,
    pub seed: u64,
    pub tensors: Vec<ParamTensor>,
}

/// One gradient tensor per parameter tensor, same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub tensors: Vec<ParamTensor>,
}

impl GradientSet {
    pub fn zeros_like(params: &AutoencoderParams) -> Self {
        Self {
            tensors: params.tensors.iter().map(|t| ParamTensor::zeros(t.shape.clone())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn layer_tensor_shapes(layer: &LayerSpec) -> Option<(Vec<usize>, Vec<usize>)> {
    match *layer {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            ..
        } => Some((vec![out_channels, in_channels, kernel, kernel], vec![out_channels])),
        LayerSpec::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
        _ => None,
    }
}

impl AutoencoderParams {
    /// Roles of all tensors in storage order.
    pub fn roles(&self) -> Vec<TensorRole> {
        roles(&self.arch)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(ParamTensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Index of the first tensor (the weight) of every weighted layer,
    /// encoder layers first.
    pub(crate) fn tensor_offsets(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.arch
            .layers()
            .map(|l| {
                l.has_params().then(|| {
                    next += 2;
                    next - 2
                })
            })
            .collect()
    }

    /// Parameters with every tensor set to zero.
    pub fn zeros(arch: &ArchitectureSpec) -> Result<Self> {
        arch.validate()?;
        let tensors = arch
            .layers()
            .filter_map(layer_tensor_shapes)
            .flat_map(|(w, b)| [ParamTensor::zeros(w), ParamTensor::zeros(b)])
            .collect();
        Ok(Self {
            arch: arch.clone(),
            seed: 0,
            tensors,
        })
    }
}

fn roles(arch: &ArchitectureSpec) -> Vec<TensorRole> {
    arch.layers()
        .filter_map(|l| match l {
            LayerSpec::Conv2d { .. } => Some([TensorRole::ConvWeight, TensorRole::ConvBias]),
            LayerSpec::Dense { .. } => Some([TensorRole::DenseWeight, TensorRole::DenseBias]),
            _ => None,
        })
        .flatten()
        .collect()
}

/// He-normal weights (standard deviation `sqrt(2 / fan_in)`) and zero biases,
/// drawn from a stream determined by `seed` alone.
pub fn init_params(arch: &ArchitectureSpec, seed: u64) -> Result<AutoencoderParams> {
    let mut params = AutoencoderParams::zeros(arch)?;
    params.seed = seed;
    let mut rng = rng::stream(seed, "init-params");
    for (tensor, role) in params.tensors.iter_mut().zip(roles(arch)) {
        if matches!(role, TensorRole::ConvWeight | TensorRole::DenseWeight) {
            let fan_in: usize = tensor.shape[1..].iter().product();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .map_err(|e| Error::Config(format!("initializer: {e}")))?;
            for w in &mut tensor.data {
                *w = normal.sample(&mut rng);
            }
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::ImageShape;

    #[test]
    fn init_is_deterministic() {
        let arch = ArchitectureSpec::desk(ImageShape::MNIST, [4, 8, 8], 16).unwrap();
        let a = init_params(&arch, 3).unwrap();
        let b = init_params(&arch, 3).unwrap();
        let c = init_params(&arch, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.is_finite());
    }

    #[test]
    fn dense_init_std_matches_fan_in() {
        // dense 100 -> 100 as the lone weighted layer each side
        let arch = ArchitectureSpec::new(
            ImageShape::new(1, 100, 1),
            vec![LayerSpec::Flatten, LayerSpec::Dense { inputs: 100, outputs: 100 }],
            vec![
                LayerSpec::Dense { inputs: 100, outputs: 100 },
                LayerSpec::Reshape { channels: 1, height: 1, width: 100 },
            ],
            100,
        )
        .unwrap();
        let p = init_params(&arch, 11).unwrap();
        let w = &p.tensors[0].data;
        assert!(w.len() >= 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
        let target = (2.0f64 / 100.0).sqrt();
        assert!((std / target - 1.0).abs() < 0.1, "std {std} vs {target}");
        assert!(p.tensors[1].data.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn desk_parameter_count_is_stable() {
        let arch = ArchitectureSpec::desk(ImageShape::MNIST, [8, 16, 16], 64).unwrap();
        let n = init_params(&arch, 0).unwrap().parameter_count();
        assert_eq!(n, init_params(&arch, 1).unwrap().parameter_count());
        // conv 1->8, 8->16, 16->16; dense 256->64; dense 64->256; conv 16->16, 16->8, 8->1
        let expect = (8 * 9 + 8) + (16 * 8 * 9 + 16) + (16 * 16 * 9 + 16) + (64 * 256 + 64)
            + (256 * 64 + 256) + (16 * 16 * 9 + 16) + (8 * 16 * 9 + 8) + (8 * 9 + 1);
        assert_eq!(n, expect);
    }
}
