//! Encoder/decoder evaluation and reverse-mode gradients of the joint loss.

use super::arch::{LayerSpec, Shape};
use super::layers;
use super::params::{AutoencoderParams, GradientSet, TensorRole};
use crate::datasets::ImageShape;
use crate::losses::{self, LatentTerms, LossWeights, PairLayout};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Image batches arrive height × width × channel; layers run channel-major.
fn hwc_to_chw(images: &[f64], shape: ImageShape) -> Vec<f64> {
    if shape.channels == 1 {
        return images.to_vec();
    }
    let (hw, c) = (shape.height * shape.width, shape.channels);
    let mut out = vec![0.0; images.len()];
    for (src, dst) in images.chunks(hw * c).zip(out.chunks_mut(hw * c)) {
        for p in 0..hw {
            for ch in 0..c {
                dst[ch * hw + p] = src[p * c + ch];
            }
        }
    }
    out
}

fn chw_to_hwc(images: &[f64], shape: ImageShape) -> Vec<f64> {
    if shape.channels == 1 {
        return images.to_vec();
    }
    let (hw, c) = (shape.height * shape.width, shape.channels);
    let mut out = vec![0.0; images.len()];
    for (src, dst) in images.chunks(hw * c).zip(out.chunks_mut(hw * c)) {
        for p in 0..hw {
            for ch in 0..c {
                dst[p * c + ch] = src[ch * hw + p];
            }
        }
    }
    out
}

fn tensor_pair<'a>(params: &'a AutoencoderParams, offset: Option<usize>) -> Option<(&'a [f64], &'a [f64])> {
    offset.map(|o| (params.tensors[o].data.as_slice(), params.tensors[o + 1].data.as_slice()))
}

/// Cached activations of one pass through a layer stack; `acts[0]` is the
/// input and `acts[i + 1]` the output of layer `i`.
struct Trace {
    shapes: Vec<Shape>,
    acts: Vec<Vec<f64>>,
}

fn run_stack(
    params: &AutoencoderParams,
    layers: &[LayerSpec],
    offsets: &[Option<usize>],
    shapes: Vec<Shape>,
    input: Vec<f64>,
    batch: usize,
) -> Trace {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input);
    for (i, layer) in layers.iter().enumerate() {
        let out = layers::forward(
            layer,
            shapes[i],
            shapes[i + 1],
            tensor_pair(params, offsets[i]),
            acts.last().expect("nonempty"),
            batch,
        );
        acts.push(out);
    }
    Trace { shapes, acts }
}

/// Backpropagate `grad` (w.r.t. the stack output) through a traced stack,
/// writing parameter gradients into `grads`. Returns the input gradient.
fn backprop_stack(
    params: &AutoencoderParams,
    layers: &[LayerSpec],
    offsets: &[Option<usize>],
    trace: &Trace,
    mut grad: Vec<f64>,
    batch: usize,
    grads: &mut GradientSet,
) -> Vec<f64> {
    for i in (0..layers.len()).rev() {
        let g = layers::backward(
            &layers[i],
            trace.shapes[i],
            trace.shapes[i + 1],
            tensor_pair(params, offsets[i]),
            &trace.acts[i],
            &trace.acts[i + 1],
            &grad,
            batch,
        );
        if let (Some(o), Some((dw, db))) = (offsets[i], g.params) {
            grads.tensors[o].data = dw;
            grads.tensors[o + 1].data = db;
        }
        grad = g.input;
    }
    grad
}

fn batch_size(params: &AutoencoderParams, images: &[f64]) -> Result<usize> {
    let n = params.arch.input.pixels();
    if images.len() % n != 0 {
        return Err(Error::Shape(format!(
            "{} values are not a whole number of {} images",
            images.len(),
            params.arch.input
        )));
    }
    Ok(images.len() / n)
}

fn check_params(params: &AutoencoderParams) -> Result<()> {
    let expected = params.tensor_offsets().iter().flatten().count() * 2;
    if params.tensors.len() != expected {
        return Err(Error::Shape(format!(
            "{} parameter tensors, architecture needs {expected}",
            params.tensors.len()
        )));
    }
    Ok(())
}

struct Forward {
    batch: usize,
    encoder: Trace,
    decoder: Trace,
}

impl Forward {
    fn latent(&self) -> &[f64] {
        self.encoder.acts.last().expect("nonempty")
    }

    fn output(&self) -> &[f64] {
        self.decoder.acts.last().expect("nonempty")
    }
}

fn split_offsets(params: &AutoencoderParams) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let mut offsets = params.tensor_offsets();
    let dec = offsets.split_off(params.arch.encoder.len());
    (offsets, dec)
}

fn forward_full(params: &AutoencoderParams, images: &[f64]) -> Result<Forward> {
    check_params(params)?;
    let batch = batch_size(params, images)?;
    let (enc_off, dec_off) = split_offsets(params);
    let encoder = run_stack(
        params,
        &params.arch.encoder,
        &enc_off,
        params.arch.encoder_shapes()?,
        hwc_to_chw(images, params.arch.input),
        batch,
    );
    let z = encoder.acts.last().expect("nonempty").clone();
    let decoder = run_stack(params, &params.arch.decoder, &dec_off, params.arch.decoder_shapes()?, z, batch);
    Ok(Forward {
        batch,
        encoder,
        decoder,
    })
}

/// Latent codes (`B × latent_dim`) for a batch of images in HWC order.
pub fn encode(params: &AutoencoderParams, images: &[f64]) -> Result<Matrix> {
    check_params(params)?;
    let batch = batch_size(params, images)?;
    let (enc_off, _) = split_offsets(params);
    let trace = run_stack(
        params,
        &params.arch.encoder,
        &enc_off,
        params.arch.encoder_shapes()?,
        hwc_to_chw(images, params.arch.input),
        batch,
    );
    Matrix::from_vec(batch, params.arch.latent_dim, trace.acts.into_iter().last().expect("nonempty"))
}

/// Images (HWC) decoded from latent codes.
pub fn decode(params: &AutoencoderParams, latent: &Matrix) -> Result<Vec<f64>> {
    check_params(params)?;
    if latent.cols() != params.arch.latent_dim {
        return Err(Error::Shape(format!(
            "latent width {} vs latent_dim {}",
            latent.cols(),
            params.arch.latent_dim
        )));
    }
    let (_, dec_off) = split_offsets(params);
    let trace = run_stack(
        params,
        &params.arch.decoder,
        &dec_off,
        params.arch.decoder_shapes()?,
        latent.as_slice().to_vec(),
        latent.rows(),
    );
    Ok(chw_to_hwc(trace.acts.last().expect("nonempty"), params.arch.input))
}

/// `decode(encode(images))`.
pub fn reconstruct(params: &AutoencoderParams, images: &[f64]) -> Result<Vec<f64>> {
    let f = forward_full(params, images)?;
    Ok(chw_to_hwc(f.output(), params.arch.input))
}

/// What to differentiate: reconstruction over every batch row, latent terms
/// over the rows named by `pairs`, plus `l2 · Σ w²` over convolution weights.
#[derive(Debug, Clone, Copy)]
pub struct LossSpec<'a> {
    pub weights: LossWeights,
    pub pairs: Option<&'a PairLayout>,
    pub l2: f64,
}

impl LossSpec<'_> {
    pub fn reconstruction(l2: f64) -> LossSpec<'static> {
        LossSpec {
            weights: LossWeights::RECONSTRUCTION_ONLY,
            pairs: None,
            l2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub rec: f64,
    pub cls: f64,
    pub disp1: f64,
    pub disp2: f64,
    pub l2: f64,
    pub total: f64,
}

/// `coeff · Σ w²` over convolution weights.
pub fn l2_penalty(params: &AutoencoderParams, coeff: f64) -> f64 {
    if coeff == 0.0 {
        return 0.0;
    }
    params
        .tensors
        .iter()
        .zip(params.roles())
        .filter(|(_, r)| *r == TensorRole::ConvWeight)
        .map(|(t, _)| t.data.iter().map(|w| w * w).sum::<f64>())
        .sum::<f64>()
        * coeff
}

/// Loss value and gradient of every parameter. The L2 gradient is
/// `2 · l2 · w` for each convolution weight.
pub fn backward(params: &AutoencoderParams, images: &[f64], spec: &LossSpec<'_>) -> Result<(LossBreakdown, GradientSet)> {
    let f = forward_full(params, images)?;
    if f.batch == 0 {
        return Err(Error::Empty("backward on an empty batch".into()));
    }
    let x = hwc_to_chw(images, params.arch.input);
    let rec = losses::rec_loss(&x, f.output(), f.batch)?;
    let dim = params.arch.latent_dim;
    let terms = spec.pairs.map_or(LatentTerms::default(), |p| p.evaluate(f.latent(), dim));
    let l2 = l2_penalty(params, spec.l2);
    let total = losses::total_loss(rec, terms.cls, terms.disp1, terms.disp2, &spec.weights)? + l2;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("total loss {total}")));
    }

    let mut grads = GradientSet::zeros_like(params);
    let (enc_off, dec_off) = split_offsets(params);
    let d_out = losses::rec_loss_grad(&x, f.output(), f.batch);
    let mut d_latent = backprop_stack(params, &params.arch.decoder, &dec_off, &f.decoder, d_out, f.batch, &mut grads);
    if let Some(p) = spec.pairs {
        for (d, g) in d_latent.iter_mut().zip(p.gradient(f.latent(), dim, &spec.weights)) {
            *d += g;
        }
    }
    backprop_stack(params, &params.arch.encoder, &enc_off, &f.encoder, d_latent, f.batch, &mut grads);

    if spec.l2 != 0.0 {
        for ((g, t), role) in grads.tensors.iter_mut().zip(&params.tensors).zip(params.roles()) {
            if role == TensorRole::ConvWeight {
                for (gv, w) in g.data.iter_mut().zip(&t.data) {
                    *gv += 2.0 * spec.l2 * w;
                }
            }
        }
    }
    Ok((
        LossBreakdown {
            rec,
            cls: terms.cls,
            disp1: terms.disp1,
            disp2: terms.disp2,
            l2,
            total,
        },
        grads,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, ArchitectureSpec};

    #[test]
    fn layout_conversion_round_trip() {
        let shape = ImageShape::new(2, 3, 3);
        let x: Vec<f64> = (0..36).map(f64::from).collect();
        assert_eq!(chw_to_hwc(&hwc_to_chw(&x, shape), shape), x);
        assert_eq!(hwc_to_chw(&x, shape)[1], 3.0);
    }

    #[test]
    fn encode_matches_full_forward_latent() {
        let arch = ArchitectureSpec::desk(ImageShape::new(8, 8, 2), [2, 3, 3], 5).unwrap();
        let p = init_params(&arch, 1).unwrap();
        let x: Vec<f64> = (0..3 * 128).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let z = encode(&p, &x).unwrap();
        let f = forward_full(&p, &x).unwrap();
        assert_eq!(z.as_slice(), f.latent());
        assert_eq!(decode(&p, &z).unwrap(), reconstruct(&p, &x).unwrap());
    }
}
