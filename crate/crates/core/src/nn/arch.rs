use std::fmt;

use crate::datasets::ImageShape;
use crate::{Error, Result};

/// Activation layout flowing between layers. Images are channel-major (CHW).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Image { channels: usize, height: usize, width: usize },
    Flat(usize),
}

impl Shape {
    pub fn size(&self) -> usize {
        match *self {
            Shape::Image { channels, height, width } => channels * height * width,
            Shape::Flat(n) => n,
        }
    }

    fn image(s: ImageShape) -> Shape {
        Shape::Image {
            channels: s.channels,
            height: s.height,
            width: s.width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    Sigmoid,
    Flatten,
    Reshape {
        channels: usize,
        height: usize,
        width: usize,
    },
    /// Nearest-neighbour resize to a fixed spatial size.
    Upsample {
        height: usize,
        width: usize,
    },
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let bad = |why: String| Err(Error::Shape(format!("{self}: {why}")));
        match (*self, input) {
            (
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                },
                Shape::Image { channels, height, width },
            ) => {
                if channels != in_channels {
                    return bad(format!("input has {channels} channels"));
                }
                if kernel == 0 || stride == 0 || out_channels == 0 {
                    return bad("zero kernel, stride or channel count".into());
                }
                if height + 2 * padding < kernel || width + 2 * padding < kernel {
                    return bad(format!("kernel larger than padded {height}x{width} input"));
                }
                Ok(Shape::Image {
                    channels: out_channels,
                    height: (height + 2 * padding - kernel) / stride + 1,
                    width: (width + 2 * padding - kernel) / stride + 1,
                })
            }
            (LayerSpec::Dense { inputs, outputs }, Shape::Flat(n)) => {
                if n != inputs {
                    return bad(format!("input has {n} features"));
                }
                if outputs == 0 {
                    return bad("zero outputs".into());
                }
                Ok(Shape::Flat(outputs))
            }
            (LayerSpec::Relu | LayerSpec::Sigmoid, s) => Ok(s),
            (LayerSpec::Flatten, s @ Shape::Image { .. }) => Ok(Shape::Flat(s.size())),
            (LayerSpec::Reshape { channels, height, width }, Shape::Flat(n)) => {
                if channels * height * width != n {
                    return bad(format!("{n} features cannot be reshaped"));
                }
                Ok(Shape::Image { channels, height, width })
            }
            (LayerSpec::Upsample { height, width }, Shape::Image { channels, .. }) => {
                if height == 0 || width == 0 {
                    return bad("zero output size".into());
                }
                Ok(Shape::Image { channels, height, width })
            }
            (_, s) => bad(format!("incompatible input {s:?}")),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => write!(f, "conv2d {in_channels} {out_channels} {kernel} {stride} {padding}"),
            LayerSpec::Dense { inputs, outputs } => write!(f, "dense {inputs} {outputs}"),
            LayerSpec::Relu => write!(f, "relu"),
            LayerSpec::Sigmoid => write!(f, "sigmoid"),
            LayerSpec::Flatten => write!(f, "flatten"),
            LayerSpec::Reshape { channels, height, width } => write!(f, "reshape {channels} {height} {width}"),
            LayerSpec::Upsample { height, width } => write!(f, "upsample {height} {width}"),
        }
    }
}

impl std::str::FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let kind = it.next().unwrap_or("");
        let nums: Vec<usize> = it
            .map(|t| t.parse().map_err(|_| Error::Format(format!("bad layer descriptor {s:?}"))))
            .collect::<Result<_>>()?;
        let layer = match (kind, nums.as_slice()) {
            ("conv2d", &[i, o, k, st, p]) => LayerSpec::Conv2d {
                in_channels: i,
                out_channels: o,
                kernel: k,
                stride: st,
                padding: p,
            },
            ("dense", &[i, o]) => LayerSpec::Dense { inputs: i, outputs: o },
            ("relu", []) => LayerSpec::Relu,
            ("sigmoid", []) => LayerSpec::Sigmoid,
            ("flatten", []) => LayerSpec::Flatten,
            ("reshape", &[c, h, w]) => LayerSpec::Reshape {
                channels: c,
                height: h,
                width: w,
            },
            ("upsample", &[h, w]) => LayerSpec::Upsample { height: h, width: w },
            _ => return Err(Error::Format(format!("bad layer descriptor {s:?}"))),
        };
        Ok(layer)
    }
}

/// Encoder and decoder layer lists around a `latent_dim` bottleneck.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub input: ImageShape,
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
    pub latent_dim: usize,
}

impl ArchitectureSpec {
    /// Build and validate.
    pub fn new(input: ImageShape, encoder: Vec<LayerSpec>, decoder: Vec<LayerSpec>, latent_dim: usize) -> Result<Self> {
        let arch = Self {
            input,
            encoder,
            decoder,
            latent_dim,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Default desk-scale network: three stride-2 convolutions with ReLU and a
    /// dense projection to the latent space; the decoder mirrors it with a
    /// dense layer, nearest-neighbour upsampling + convolution blocks and a
    /// sigmoid output.
    pub fn desk(input: ImageShape, channels: [usize; 3], latent_dim: usize) -> Result<Self> {
        let mut encoder = Vec::new();
        let mut sizes = vec![(input.height, input.width)];
        let mut in_ch = input.channels;
        let mut shape = Shape::image(input);
        for &ch in &channels {
            let conv = LayerSpec::Conv2d {
                in_channels: in_ch,
                out_channels: ch,
                kernel: 3,
                stride: 2,
                padding: 1,
            };
            shape = conv.output_shape(shape)?;
            if let Shape::Image { height, width, .. } = shape {
                sizes.push((height, width));
            }
            encoder.push(conv);
            encoder.push(LayerSpec::Relu);
            in_ch = ch;
        }
        let (bh, bw) = sizes[3];
        let flat = channels[2] * bh * bw;
        encoder.push(LayerSpec::Flatten);
        encoder.push(LayerSpec::Dense {
            inputs: flat,
            outputs: latent_dim,
        });

        let mut decoder = vec![
            LayerSpec::Dense {
                inputs: latent_dim,
                outputs: flat,
            },
            LayerSpec::Relu,
            LayerSpec::Reshape {
                channels: channels[2],
                height: bh,
                width: bw,
            },
        ];
        let outs = [channels[1], channels[0], input.channels];
        let mut in_ch = channels[2];
        for (i, &out) in outs.iter().enumerate() {
            let (h, w) = sizes[2 - i];
            decoder.push(LayerSpec::Upsample { height: h, width: w });
            decoder.push(LayerSpec::Conv2d {
                in_channels: in_ch,
                out_channels: out,
                kernel: 3,
                stride: 1,
                padding: 1,
            });
            decoder.push(if i == 2 { LayerSpec::Sigmoid } else { LayerSpec::Relu });
            in_ch = out;
        }
        Self::new(input, encoder, decoder, latent_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return Err(Error::Shape("encoder and decoder need at least one layer".into()));
        }
        let enc_out = self.encoder_shapes()?.pop().expect("nonempty");
        if enc_out != Shape::Flat(self.latent_dim) {
            return Err(Error::Shape(format!(
                "encoder ends in {enc_out:?}, expected {} latent features",
                self.latent_dim
            )));
        }
        let dec_out = self.decoder_shapes()?.pop().expect("nonempty");
        if dec_out != Shape::image(self.input) {
            return Err(Error::Shape(format!(
                "decoder ends in {dec_out:?}, expected input shape {}",
                self.input
            )));
        }
        let count = |ls: &[LayerSpec]| ls.iter().filter(|l| l.has_params()).count();
        if count(&self.encoder) != count(&self.decoder) {
            return Err(Error::Shape(format!(
                "decoder has {} weighted layers, encoder {}",
                count(&self.decoder),
                count(&self.encoder)
            )));
        }
        Ok(())
    }

    fn shapes(layers: &[LayerSpec], input: Shape) -> Result<Vec<Shape>> {
        let mut shapes = vec![input];
        for l in layers {
            let next = l.output_shape(*shapes.last().expect("nonempty"))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    /// Shapes of encoder activations, input first.
    pub fn encoder_shapes(&self) -> Result<Vec<Shape>> {
        Self::shapes(&self.encoder, Shape::image(self.input))
    }

    pub fn decoder_shapes(&self) -> Result<Vec<Shape>> {
        Self::shapes(&self.decoder, Shape::Flat(self.latent_dim))
    }

    /// All layers, encoder first.
    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.encoder.iter().chain(&self.decoder)
    }

    /// Plain-text descriptor, one item per line.
    pub fn describe(&self) -> String {
        let mut s = format!("input {}\nlatent {}\n", self.input, self.latent_dim);
        for l in &self.encoder {
            s.push_str(&format!("enc {l}\n"));
        }
        for l in &self.decoder {
            s.push_str(&format!("dec {l}\n"));
        }
        s
    }

    pub fn parse(descriptor: &str) -> Result<Self> {
        let mut input = None;
        let mut latent = None;
        let (mut encoder, mut decoder) = (Vec::new(), Vec::new());
        for line in descriptor.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "input" => input = Some(rest.parse::<ImageShape>()?),
                "latent" => {
                    latent = Some(
                        rest.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Format(format!("bad latent line {line:?}")))?,
                    )
                }
                "enc" => encoder.push(rest.parse()?),
                "dec" => decoder.push(rest.parse()?),
                _ => return Err(Error::Format(format!("unknown architecture line {line:?}"))),
            }
        }
        let input = input.ok_or_else(|| Error::Format("architecture lacks input line".into()))?;
        let latent = latent.ok_or_else(|| Error::Format("architecture lacks latent line".into()))?;
        Self::new(input, encoder, decoder, latent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_mnist_shapes() {
        let a = ArchitectureSpec::desk(ImageShape::MNIST, [8, 16, 16], 64).unwrap();
        let enc = a.encoder_shapes().unwrap();
        assert_eq!(enc[2], Shape::Image { channels: 8, height: 14, width: 14 });
        assert_eq!(enc[4], Shape::Image { channels: 16, height: 7, width: 7 });
        assert_eq!(enc[6], Shape::Image { channels: 16, height: 4, width: 4 });
        assert_eq!(*enc.last().unwrap(), Shape::Flat(64));
        assert_eq!(
            *a.decoder_shapes().unwrap().last().unwrap(),
            Shape::Image { channels: 1, height: 28, width: 28 }
        );
    }

    #[test]
    fn desk_cifar_shapes() {
        let a = ArchitectureSpec::desk(ImageShape::CIFAR10, [8, 16, 16], 64).unwrap();
        assert_eq!(*a.encoder_shapes().unwrap().last().unwrap(), Shape::Flat(64));
    }

    #[test]
    fn descriptor_round_trip() {
        let a = ArchitectureSpec::desk(ImageShape::MNIST, [4, 8, 8], 16).unwrap();
        assert_eq!(ArchitectureSpec::parse(&a.describe()).unwrap(), a);
    }

    #[test]
    fn empty_architecture_rejected() {
        assert!(ArchitectureSpec::new(ImageShape::MNIST, vec![], vec![], 64).is_err());
    }

    #[test]
    fn wrong_latent_width_rejected() {
        let mut a = ArchitectureSpec::desk(ImageShape::MNIST, [4, 8, 8], 16).unwrap();
        a.latent_dim = 17;
        assert!(a.validate().is_err());
    }

    #[test]
    fn unmirrored_decoder_rejected() {
        let a = ArchitectureSpec::desk(ImageShape::MNIST, [4, 8, 8], 16).unwrap();
        let mut enc = a.encoder.clone();
        enc.pop();
        enc.push(LayerSpec::Dense { inputs: 128, outputs: 128 });
        enc.push(LayerSpec::Dense { inputs: 128, outputs: 16 });
        assert!(ArchitectureSpec::new(a.input, enc, a.decoder, 16).is_err());
    }
}
