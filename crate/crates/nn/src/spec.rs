use crate::error::{Error, Result};

/// Filtering widths whose results the network regresses, in head order.
pub const DEFAULT_MU_G_LIST: [f64; 6] = [0.25, 0.3, 0.35, 0.4, 0.45, 0.5];

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub enum Shortcut {
    Identity,
    /// 1×1×1 convolution with the given stride.
    Projection {
        stride: usize,
        in_ch: usize,
        out_ch: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// Zero-padded "same" convolution with a cubic kernel and bias.
    Conv3d {
        kernel: usize,
        stride: usize,
        in_ch: usize,
        out_ch: usize,
    },
    BatchNorm {
        channels: usize,
        eps: f64,
        momentum: f64,
    },
    Relu,
    /// `relu(body(x) + shortcut(x))`.
    Residual {
        body: Vec<LayerSpec>,
        shortcut: Shortcut,
    },
    GlobalMaxPool,
    Dense {
        input: usize,
        output: usize,
    },
    Tanh,
}

impl LayerSpec {
    pub fn conv(kernel: usize, stride: usize, in_ch: usize, out_ch: usize) -> Self {
        LayerSpec::Conv3d {
            kernel,
            stride,
            in_ch,
            out_ch,
        }
    }

    pub fn batch_norm(channels: usize) -> Self {
        LayerSpec::BatchNorm {
            channels,
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    /// Residual block `index` (1-based): a stride-2 convolution to
    /// `64·2^(index−1)` channels, a second 3×3×3 convolution, batch norm after
    /// each, and a stride-2 1×1×1 projection on the shortcut.
    pub fn residual_block(index: u32, in_ch: usize, first_kernel: usize) -> Self {
        let ch = 64usize << (index - 1);
        LayerSpec::Residual {
            body: vec![
                LayerSpec::conv(first_kernel, 2, in_ch, ch),
                LayerSpec::batch_norm(ch),
                LayerSpec::Relu,
                LayerSpec::conv(3, 1, ch, ch),
                LayerSpec::batch_norm(ch),
            ],
            shortcut: Shortcut::Projection {
                stride: 2,
                in_ch,
                out_ch: ch,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv3d { .. } => "conv3d",
            LayerSpec::BatchNorm { .. } => "batch_norm",
            LayerSpec::Relu => "relu",
            LayerSpec::Residual { .. } => "residual",
            LayerSpec::GlobalMaxPool => "global_max_pool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Tanh => "tanh",
        }
    }
}

/// Activation shape of a single sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Volume { dims: [usize; 3], channels: usize },
    Flat(usize),
}

impl Shape {
    pub fn channels(&self) -> usize {
        match *self {
            Shape::Volume { channels, .. } => channels,
            Shape::Flat(n) => n,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Shape::Volume { dims, channels } => dims.iter().product::<usize>() * channels,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `(output, pad_before)` for TensorFlow-style "same" padding.
pub fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (out, total / 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// Per-sample input `[D, H, W, C]`.
    pub input: [usize; 4],
    pub layers: Vec<LayerSpec>,
    pub mu_g_list: Vec<f64>,
}

/// The NormalNet regressor for a `(2·half_extent+1)³×3` grid with one output
/// normal per entry of `mu_g_list`.
pub fn build_normalnet_spec_for(grid_side: usize, mu_g_list: &[f64]) -> NetworkSpec {
    let heads = mu_g_list.len();
    let mut layers = vec![
        LayerSpec::residual_block(1, 3, 5),
        LayerSpec::residual_block(2, 64, 3),
        LayerSpec::residual_block(3, 128, 3),
        LayerSpec::GlobalMaxPool,
    ];
    let widths = [256, 512, 256, 128];
    for w in widths.windows(2) {
        layers.push(LayerSpec::Dense {
            input: w[0],
            output: w[1],
        });
        layers.push(LayerSpec::batch_norm(w[1]));
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::Dense {
        input: 128,
        output: 3 * heads,
    });
    layers.push(LayerSpec::Tanh);
    NetworkSpec {
        input: [grid_side, grid_side, grid_side, 3],
        layers,
        mu_g_list: mu_g_list.to_vec(),
    }
}

/// NormalNet on 41³ grids with `n` heads. The first `n` entries of the default
/// μ_g list name the heads; heads beyond the list get evenly extended widths.
pub fn build_normalnet_spec(n: usize) -> Result<NetworkSpec> {
    if n == 0 {
        return Err(Error::Invalid("need at least one output head".into()));
    }
    let list: Vec<f64> = (0..n)
        .map(|i| {
            DEFAULT_MU_G_LIST
                .get(i)
                .copied()
                .unwrap_or(0.25 + 0.05 * i as f64)
        })
        .collect();
    Ok(build_normalnet_spec_for(41, &list))
}

impl NetworkSpec {
    pub fn heads(&self) -> usize {
        self.mu_g_list.len()
    }

    pub fn input_shape(&self) -> Shape {
        let [d, h, w, c] = self.input;
        Shape::Volume {
            dims: [d, h, w],
            channels: c,
        }
    }

    /// Propagates shapes through every layer, returning the output shape.
    pub fn output_shape(&self) -> Result<Shape> {
        let mut shape = self.input_shape();
        for (i, layer) in self.layers.iter().enumerate() {
            shape = propagate(layer, shape, &i.to_string())?;
        }
        Ok(shape)
    }

    /// Validates composition and that the last layer emits `3·heads` values.
    pub fn validate(&self) -> Result<()> {
        let out = self.output_shape()?;
        match out {
            Shape::Flat(n) if n == 3 * self.heads() => Ok(()),
            other => Err(Error::Shape {
                layer: "output".into(),
                message: format!(
                    "expected flat output of width {}, got {other:?}",
                    3 * self.heads()
                ),
            }),
        }
    }

    pub fn output_width(&self) -> Result<usize> {
        match self.output_shape()? {
            Shape::Flat(n) => Ok(n),
            Shape::Volume { .. } => Err(Error::Shape {
                layer: "output".into(),
                message: "network does not end in a flat layer".into(),
            }),
        }
    }
}

fn shape_err(path: &str, layer: &LayerSpec, message: String) -> Error {
    Error::Shape {
        layer: format!("{path} ({})", layer.kind()),
        message,
    }
}

pub(crate) fn propagate(layer: &LayerSpec, shape: Shape, path: &str) -> Result<Shape> {
    match (layer, shape) {
        (
            &LayerSpec::Conv3d {
                kernel,
                stride,
                in_ch,
                out_ch,
            },
            Shape::Volume { dims, channels },
        ) => {
            if channels != in_ch {
                return Err(shape_err(
                    path,
                    layer,
                    format!("expected {in_ch} input channels, got {channels}"),
                ));
            }
            if kernel == 0 || stride == 0 || out_ch == 0 {
                return Err(shape_err(path, layer, "zero-sized parameter".into()));
            }
            Ok(Shape::Volume {
                dims: dims.map(|d| same_padding(d, kernel, stride).0),
                channels: out_ch,
            })
        }
        (&LayerSpec::BatchNorm { channels, .. }, s) => {
            if s.channels() != channels {
                return Err(shape_err(
                    path,
                    layer,
                    format!("expected {channels} channels, got {}", s.channels()),
                ));
            }
            Ok(s)
        }
        (LayerSpec::Relu | LayerSpec::Tanh, s) => Ok(s),
        (LayerSpec::Residual { body, shortcut }, s) => {
            let mut inner = s;
            for (j, l) in body.iter().enumerate() {
                inner = propagate(l, inner, &format!("{path}.body.{j}"))?;
            }
            let short = match *shortcut {
                Shortcut::Identity => s,
                Shortcut::Projection {
                    stride,
                    in_ch,
                    out_ch,
                } => propagate(
                    &LayerSpec::conv(1, stride, in_ch, out_ch),
                    s,
                    &format!("{path}.shortcut"),
                )?,
            };
            if inner != short {
                return Err(shape_err(
                    path,
                    layer,
                    format!("body output {inner:?} does not match shortcut {short:?}"),
                ));
            }
            Ok(inner)
        }
        (LayerSpec::GlobalMaxPool, Shape::Volume { channels, .. }) => Ok(Shape::Flat(channels)),
        (&LayerSpec::Dense { input, output }, Shape::Flat(n)) => {
            if n != input {
                return Err(shape_err(
                    path,
                    layer,
                    format!("expected {input} inputs, got {n}"),
                ));
            }
            Ok(Shape::Flat(output))
        }
        (l, s) => Err(shape_err(
            path,
            l,
            format!("cannot accept input shape {s:?}"),
        )),
    }
}
