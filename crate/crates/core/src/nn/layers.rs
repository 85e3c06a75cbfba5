//! Batched forward and backward kernels for each layer kind.
//!
//! Activations are stored sample after sample, each sample in CHW order.
//! Parameter gradients are accumulated per fixed chunk of samples and the
//! chunk partials are added in chunk order, so the result does not depend on
//! thread scheduling.

use super::arch::{LayerSpec, Shape};
use crate::par;

/// Samples per gradient partial.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn new(layer: &LayerSpec, input: Shape, output: Shape) -> Self {
        match (*layer, input, output) {
            (
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                },
                Shape::Image { height, width, .. },
                Shape::Image {
                    height: oh, width: ow, ..
                },
            ) => Self {
                cin: in_channels,
                cout: out_channels,
                k: kernel,
                stride,
                pad: padding,
                h: height,
                w: width,
                oh,
                ow,
            },
            _ => unreachable!("validated architecture"),
        }
    }

    fn patch(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Output range `lo..hi` along one axis whose input coordinate
    /// `o * stride + tap - pad` falls inside `0..size`.
    #[inline]
    fn valid(&self, tap: usize, size: usize, outputs: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(tap).div_ceil(self.stride);
        let hi = if size + self.pad > tap {
            ((size - 1 + self.pad - tap) / self.stride + 1).min(outputs)
        } else {
            0
        };
        (lo.min(hi), hi)
    }

    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let p = self.positions();
        let (s, ow) = (self.stride, self.ow);
        for c in 0..self.cin {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.k {
                let (ylo, yhi) = self.valid(ky, self.h, self.oh);
                for kx in 0..self.k {
                    let (xlo, xhi) = self.valid(kx, self.w, ow);
                    let row = &mut cols[((c * self.k + ky) * self.k + kx) * p..][..p];
                    row[..ylo * ow].fill(0.0);
                    row[yhi * ow..].fill(0.0);
                    for oy in ylo..yhi {
                        let out = &mut row[oy * ow..(oy + 1) * ow];
                        out[..xlo].fill(0.0);
                        out[xhi..].fill(0.0);
                        let src = &plane[(oy * s + ky - self.pad) * self.w..][..self.w];
                        let x0 = xlo * s + kx - self.pad;
                        if s == 1 {
                            out[xlo..xhi].copy_from_slice(&src[x0..x0 + (xhi - xlo)]);
                        } else {
                            for (j, o) in out[xlo..xhi].iter_mut().enumerate() {
                                *o = src[x0 + j * s];
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], dx: &mut [f64]) {
        let p = self.positions();
        let (s, ow) = (self.stride, self.ow);
        for c in 0..self.cin {
            let plane = &mut dx[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.k {
                let (ylo, yhi) = self.valid(ky, self.h, self.oh);
                for kx in 0..self.k {
                    let (xlo, xhi) = self.valid(kx, self.w, ow);
                    let row = &cols[((c * self.k + ky) * self.k + kx) * p..][..p];
                    for oy in ylo..yhi {
                        let src = &row[oy * ow + xlo..oy * ow + xhi];
                        let dst = &mut plane[(oy * s + ky - self.pad) * self.w..][..self.w];
                        let x0 = xlo * s + kx - self.pad;
                        if s == 1 {
                            axpy(1.0, src, &mut dst[x0..x0 + src.len()]);
                        } else {
                            for (j, v) in src.iter().enumerate() {
                                dst[x0 + j * s] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
/// `c = a·b + beta·c` for a row-major `m × n` output; `a` is `m × k` and `b`
/// is `k × n`, each given with (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    assert!(a.len() > last(m, k, rsa, csa) && b.len() > last(k, n, rsb, csb));
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is a distinct mutable borrow.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn upsample_map(input: Shape, output: Shape) -> (usize, Vec<usize>) {
    match (input, output) {
        (
            Shape::Image {
                channels, height, width,
            },
            Shape::Image {
                height: oh, width: ow, ..
            },
        ) => {
            let mut map = Vec::with_capacity(channels * oh * ow);
            for c in 0..channels {
                for y in 0..oh {
                    let sy = y * height / oh;
                    for x in 0..ow {
                        let sx = x * width / ow;
                        map.push((c * height + sy) * width + sx);
                    }
                }
            }
            (channels * height * width, map)
        }
        _ => unreachable!("validated architecture"),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Forward one layer over `batch` samples.
pub(crate) fn forward(
    layer: &LayerSpec,
    input_shape: Shape,
    output_shape: Shape,
    params: Option<(&[f64], &[f64])>,
    input: &[f64],
    batch: usize,
) -> Vec<f64> {
    let (in_size, out_size) = (input_shape.size(), output_shape.size());
    debug_assert_eq!(input.len(), batch * in_size);
    let mut out = vec![0.0; batch * out_size];
    match layer {
        LayerSpec::Conv2d { .. } => {
            let g = ConvGeom::new(layer, input_shape, output_shape);
            let (w, b) = params.expect("conv params");
            let p = g.positions();
            par::zip_chunks(&mut out, GRAD_CHUNK * out_size, input, GRAD_CHUNK * in_size, |_, ys, xs| {
                let mut cols = vec![0.0; g.patch() * p];
                for (y, x) in ys.chunks_mut(out_size).zip(xs.chunks(in_size)) {
                    g.im2col(x, &mut cols);
                    for oc in 0..g.cout {
                        y[oc * p..(oc + 1) * p].fill(b[oc]);
                    }
                    // y (cout × p) += w (cout × patch) · cols (patch × p)
                    gemm(g.cout, g.patch(), p, w, (g.patch(), 1), &cols, (p, 1), 1.0, y);
                }
            });
        }
        LayerSpec::Dense { inputs, outputs } => {
            let (w, b) = params.expect("dense params");
            par::zip_chunks(&mut out, out_size, input, in_size, |_, y, x| {
                for o in 0..*outputs {
                    y[o] = b[o] + dot(&w[o * inputs..(o + 1) * inputs], x);
                }
            });
        }
        LayerSpec::Relu => {
            for (o, &x) in out.iter_mut().zip(input) {
                *o = x.max(0.0);
            }
        }
        LayerSpec::Sigmoid => {
            for (o, &x) in out.iter_mut().zip(input) {
                *o = sigmoid(x);
            }
        }
        LayerSpec::Flatten | LayerSpec::Reshape { .. } => out.copy_from_slice(input),
        LayerSpec::Upsample { .. } => {
            let (_, map) = upsample_map(input_shape, output_shape);
            par::zip_chunks(&mut out, out_size, input, in_size, |_, y, x| {
                for (o, &s) in y.iter_mut().zip(&map) {
                    *o = x[s];
                }
            });
        }
    }
    out
}

/// Gradients produced by one layer's backward pass.
pub(crate) struct LayerGrads {
    pub input: Vec<f64>,
    /// `(weight, bias)` gradients for weighted layers.
    pub params: Option<(Vec<f64>, Vec<f64>)>,
}

/// Buffers reused across the samples of one chunk.
#[derive(Default)]
struct Scratch {
    cols: Vec<f64>,
    dcols: Vec<f64>,
}

/// Run `per_sample(s, param_acc, dx_s, scratch)` for every sample, accumulating the
/// parameter gradient per chunk and summing chunks in order.
fn chunked<F>(batch: usize, in_size: usize, n_params: usize, per_sample: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(usize, &mut [f64], &mut [f64], &mut Scratch) + Sync + Send,
{
    let ranges: Vec<_> = (0..batch)
        .step_by(GRAD_CHUNK)
        .map(|s| s..(s + GRAD_CHUNK).min(batch))
        .collect();
    let parts = par::map_slice(&ranges, |r| {
        let mut acc = vec![0.0; n_params];
        let mut dx = vec![0.0; r.len() * in_size];
        let mut scratch = Scratch::default();
        for (j, s) in r.clone().enumerate() {
            per_sample(s, &mut acc, &mut dx[j * in_size..(j + 1) * in_size], &mut scratch);
        }
        (acc, dx)
    });
    let mut total = vec![0.0; n_params];
    let mut dx = Vec::with_capacity(batch * in_size);
    for (acc, d) in parts {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
        dx.extend(d);
    }
    (total, dx)
}

/// Backward one layer. `input`/`output` are the cached forward activations.
pub(crate) fn backward(
    layer: &LayerSpec,
    input_shape: Shape,
    output_shape: Shape,
    params: Option<(&[f64], &[f64])>,
    input: &[f64],
    output: &[f64],
    grad_out: &[f64],
    batch: usize,
) -> LayerGrads {
    let (in_size, out_size) = (input_shape.size(), output_shape.size());
    match layer {
        LayerSpec::Conv2d { .. } => {
            let g = ConvGeom::new(layer, input_shape, output_shape);
            let (w, _) = params.expect("conv params");
            let n_w = g.cout * g.patch();
            let (acc, dx) = chunked(batch, in_size, n_w + g.cout, |s, acc, dx, scratch| {
                let p = g.positions();
                let x = &input[s * in_size..(s + 1) * in_size];
                let dy = &grad_out[s * out_size..(s + 1) * out_size];
                let Scratch { cols, dcols } = scratch;
                cols.resize(g.patch() * p, 0.0);
                dcols.resize(g.patch() * p, 0.0);
                g.im2col(x, cols);
                let (dw, db) = acc.split_at_mut(n_w);
                for oc in 0..g.cout {
                    db[oc] += dy[oc * p..(oc + 1) * p].iter().sum::<f64>();
                }
                // dw (cout × patch) += dy (cout × p) · colsᵀ
                gemm(g.cout, p, g.patch(), dy, (p, 1), cols, (1, p), 1.0, dw);
                // dcols (patch × p) = wᵀ · dy
                gemm(g.patch(), g.cout, p, w, (1, g.patch()), dy, (p, 1), 0.0, dcols);
                g.col2im(dcols, dx);
            });
            let (dw, db) = acc.split_at(n_w);
            LayerGrads {
                input: dx,
                params: Some((dw.to_vec(), db.to_vec())),
            }
        }
        LayerSpec::Dense { inputs, outputs } => {
            let (w, _) = params.expect("dense params");
            let n_w = inputs * outputs;
            let (acc, dx) = chunked(batch, in_size, n_w + outputs, |s, acc, dx, _| {
                let x = &input[s * in_size..(s + 1) * in_size];
                let dy = &grad_out[s * out_size..(s + 1) * out_size];
                let (dw, db) = acc.split_at_mut(n_w);
                for o in 0..*outputs {
                    db[o] += dy[o];
                    axpy(dy[o], x, &mut dw[o * inputs..(o + 1) * inputs]);
                    axpy(dy[o], &w[o * inputs..(o + 1) * inputs], dx);
                }
            });
            let (dw, db) = acc.split_at(n_w);
            LayerGrads {
                input: dx,
                params: Some((dw.to_vec(), db.to_vec())),
            }
        }
        LayerSpec::Relu => LayerGrads {
            input: grad_out
                .iter()
                .zip(input)
                .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                .collect(),
            params: None,
        },
        LayerSpec::Sigmoid => LayerGrads {
            input: grad_out.iter().zip(output).map(|(&g, &y)| g * y * (1.0 - y)).collect(),
            params: None,
        },
        LayerSpec::Flatten | LayerSpec::Reshape { .. } => LayerGrads {
            input: grad_out.to_vec(),
            params: None,
        },
        LayerSpec::Upsample { .. } => {
            let (_, map) = upsample_map(input_shape, output_shape);
            let mut dx = vec![0.0; batch * in_size];
            par::zip_chunks(&mut dx, in_size, grad_out, out_size, |_, d, gy| {
                for (&s, &g) in map.iter().zip(gy) {
                    d[s] += g;
                }
            });
            LayerGrads {
                input: dx,
                params: None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const H: f64 = 1e-4;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    /// Check dx and parameter gradients of `layer` against central
    /// differences of the scalar objective `Σ c ⊙ forward(x)`.
    fn check(layer: LayerSpec, input_shape: Shape, batch: usize, seed: u64) {
        let output_shape = layer.output_shape(input_shape).unwrap();
        let mut rng = crate::rng::stream(seed, "layer-grad");
        let mut rand_vec = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let x = rand_vec(batch * input_shape.size());
        let c = rand_vec(batch * output_shape.size());
        let (mut w, mut b) = match layer {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (rand_vec(out_channels * in_channels * kernel * kernel), rand_vec(out_channels)),
            LayerSpec::Dense { inputs, outputs } => (rand_vec(inputs * outputs), rand_vec(outputs)),
            _ => (Vec::new(), Vec::new()),
        };
        let has = layer.has_params();
        let objective = |x: &[f64], w: &[f64], b: &[f64]| -> f64 {
            let p = has.then_some((w, b));
            let y = forward(&layer, input_shape, output_shape, p, x, batch);
            y.iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let y = forward(&layer, input_shape, output_shape, has.then_some((&w[..], &b[..])), &x, batch);
        let g = backward(&layer, input_shape, output_shape, has.then_some((&w[..], &b[..])), &x, &y, &c, batch);

        let mut xp = x.clone();
        for k in 0..x.len() {
            xp[k] = x[k] + H;
            let up = objective(&xp, &w, &b);
            xp[k] = x[k] - H;
            let dn = objective(&xp, &w, &b);
            xp[k] = x[k];
            let fd = (up - dn) / (2.0 * H);
            assert!(rel_err(fd, g.input[k]) <= 1e-3, "{layer}: dx[{k}] fd {fd} vs {}", g.input[k]);
        }
        if let Some((dw, db)) = g.params {
            for k in 0..w.len() {
                let orig = w[k];
                w[k] = orig + H;
                let up = objective(&x, &w, &b);
                w[k] = orig - H;
                let dn = objective(&x, &w, &b);
                w[k] = orig;
                let fd = (up - dn) / (2.0 * H);
                assert!(rel_err(fd, dw[k]) <= 1e-3, "{layer}: dw[{k}] fd {fd} vs {}", dw[k]);
            }
            for k in 0..b.len() {
                let orig = b[k];
                b[k] = orig + H;
                let up = objective(&x, &w, &b);
                b[k] = orig - H;
                let dn = objective(&x, &w, &b);
                b[k] = orig;
                let fd = (up - dn) / (2.0 * H);
                assert!(rel_err(fd, db[k]) <= 1e-3, "{layer}: db[{k}] fd {fd} vs {}", db[k]);
            }
        }
    }

    fn img(c: usize, h: usize, w: usize) -> Shape {
        Shape::Image {
            channels: c,
            height: h,
            width: w,
        }
    }

    #[test]
    fn conv_strided_padded() {
        let layer = LayerSpec::Conv2d {
            in_channels: 2,
            out_channels: 3,
            kernel: 3,
            stride: 2,
            padding: 1,
        };
        check(layer, img(2, 7, 6), 3, 1);
    }

    #[test]
    fn conv_unit_stride_unpadded() {
        let layer = LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 2,
            kernel: 2,
            stride: 1,
            padding: 0,
        };
        check(layer, img(1, 5, 5), 2, 2);
    }

    #[test]
    fn conv_spans_more_than_one_gradient_chunk() {
        let layer = LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 1,
            kernel: 3,
            stride: 1,
            padding: 1,
        };
        check(layer, img(1, 4, 4), GRAD_CHUNK * 2 + 3, 3);
    }

    #[test]
    fn dense_layer() {
        check(LayerSpec::Dense { inputs: 7, outputs: 4 }, Shape::Flat(7), 11, 4);
    }

    #[test]
    fn relu_layer() {
        check(LayerSpec::Relu, Shape::Flat(20), 3, 5);
    }

    #[test]
    fn sigmoid_layer() {
        check(LayerSpec::Sigmoid, img(2, 3, 3), 2, 6);
    }

    #[test]
    fn flatten_and_reshape() {
        check(LayerSpec::Flatten, img(2, 2, 3), 2, 7);
        check(
            LayerSpec::Reshape {
                channels: 2,
                height: 2,
                width: 3,
            },
            Shape::Flat(12),
            2,
            8,
        );
    }

    #[test]
    fn upsample_non_integer_ratio() {
        check(LayerSpec::Upsample { height: 7, width: 7 }, img(2, 4, 4), 2, 9);
        check(LayerSpec::Upsample { height: 14, width: 14 }, img(1, 7, 7), 1, 10);
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
