use crate::error::{Error, Result};
use crate::layers::conv::{self, ConvGeom};
use crate::layers::{activation, dense, norm, pool, Act};
use crate::scalar::Scalar;
use crate::spec::{LayerSpec, NetworkSpec, Shortcut};
use crate::tensor::Tensor;
use crate::weights::{Init, Weights};

/// How batch normalization behaves during a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    /// Normalize with batch statistics (training) rather than running ones.
    pub batch_stats: bool,
    /// Fold the batch statistics into the running estimates.
    pub update_running: bool,
}

impl Mode {
    pub const INFERENCE: Mode = Mode {
        batch_stats: false,
        update_running: false,
    };
    pub const TRAINING: Mode = Mode {
        batch_stats: true,
        update_running: true,
    };
    /// Batch statistics without touching running estimates (gradient checks).
    pub const BATCH_FROZEN: Mode = Mode {
        batch_stats: true,
        update_running: false,
    };
}

pub(crate) struct BlobDesc {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Conv {
        k: usize,
        stride: usize,
        cin: usize,
        cout: usize,
        w: usize,
        b: usize,
    },
    Bn {
        eps: f64,
        momentum: f64,
        gamma: usize,
        beta: usize,
        mean: usize,
        var: usize,
    },
    Relu,
    Residual {
        body: Vec<Node>,
        shortcut: Option<Box<Node>>,
    },
    Pool,
    Dense {
        output: usize,
        w: usize,
        b: usize,
    },
    Tanh,
}

struct Compiler {
    descs: Vec<BlobDesc>,
}

impl Compiler {
    fn blob(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.descs.push(BlobDesc { name, shape, init });
        self.descs.len() - 1
    }

    fn conv(&mut self, path: &str, k: usize, stride: usize, cin: usize, cout: usize) -> Node {
        let w = self.blob(
            format!("{path}.conv3d.weight"),
            vec![k, k, k, cin, cout],
            Init::TruncatedNormal,
        );
        let b = self.blob(format!("{path}.conv3d.bias"), vec![cout], Init::Zeros);
        Node::Conv {
            k,
            stride,
            cin,
            cout,
            w,
            b,
        }
    }

    fn layer(&mut self, layer: &LayerSpec, path: &str) -> Node {
        match *layer {
            LayerSpec::Conv3d {
                kernel,
                stride,
                in_ch,
                out_ch,
            } => self.conv(path, kernel, stride, in_ch, out_ch),
            LayerSpec::BatchNorm {
                channels,
                eps,
                momentum,
            } => {
                let p = format!("{path}.batch_norm");
                Node::Bn {
                    eps,
                    momentum,
                    gamma: self.blob(format!("{p}.gamma"), vec![channels], Init::Ones),
                    beta: self.blob(format!("{p}.beta"), vec![channels], Init::Zeros),
                    mean: self.blob(format!("{p}.running_mean"), vec![channels], Init::Zeros),
                    var: self.blob(format!("{p}.running_var"), vec![channels], Init::Ones),
                }
            }
            LayerSpec::Relu => Node::Relu,
            LayerSpec::Residual {
                ref body,
                ref shortcut,
            } => {
                let body = body
                    .iter()
                    .enumerate()
                    .map(|(j, l)| self.layer(l, &format!("{path}.body.{j}")))
                    .collect();
                let shortcut = match *shortcut {
                    Shortcut::Identity => None,
                    Shortcut::Projection {
                        stride,
                        in_ch,
                        out_ch,
                    } => Some(Box::new(self.conv(
                        &format!("{path}.shortcut"),
                        1,
                        stride,
                        in_ch,
                        out_ch,
                    ))),
                };
                Node::Residual { body, shortcut }
            }
            LayerSpec::GlobalMaxPool => Node::Pool,
            LayerSpec::Dense { input, output } => {
                let w = self.blob(
                    format!("{path}.dense.weight"),
                    vec![input, output],
                    Init::TruncatedNormal,
                );
                let b = self.blob(format!("{path}.dense.bias"), vec![output], Init::Zeros);
                Node::Dense { output, w, b }
            }
            LayerSpec::Tanh => Node::Tanh,
        }
    }
}

/// Validates `spec` and lowers it to executable nodes plus the blob layout.
pub(crate) fn compile(spec: &NetworkSpec) -> Result<(Vec<Node>, Vec<BlobDesc>)> {
    spec.validate()?;
    let mut c = Compiler { descs: Vec::new() };
    let nodes = spec
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| c.layer(l, &i.to_string()))
        .collect();
    Ok((nodes, c.descs))
}

enum Cache<T> {
    Conv(Act<T>),
    Bn(norm::BnCache<T>),
    Relu(Vec<bool>),
    Residual {
        body: Vec<Cache<T>>,
        shortcut: Option<Box<Cache<T>>>,
        mask: Vec<bool>,
    },
    Pool {
        in_dims: [usize; 3],
        arg: Vec<usize>,
    },
    Dense(Act<T>),
    Tanh(Vec<T>),
}

/// Running-statistic updates collected during a training forward pass.
struct Pending {
    mean: usize,
    var: usize,
    momentum: f64,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

struct Pass<'a, T> {
    weights: &'a Weights<T>,
    mode: Mode,
    record: bool,
    pending: Vec<Pending>,
}

impl<T: Scalar> Pass<'_, T> {
    fn data(&self, i: usize) -> &[T] {
        &self.weights.blobs[i].data
    }

    fn run(&mut self, nodes: &[Node], mut x: Act<T>, caches: &mut Vec<Cache<T>>) -> Act<T> {
        for node in nodes {
            let (y, cache) = self.node(node, x);
            if let Some(c) = cache {
                caches.push(c);
            }
            x = y;
        }
        x
    }

    fn node(&mut self, node: &Node, x: Act<T>) -> (Act<T>, Option<Cache<T>>) {
        let rec = self.record;
        match *node {
            Node::Conv {
                k,
                stride,
                cin,
                cout,
                w,
                b,
            } => {
                let g = ConvGeom::new(k, stride, cin, cout, x.dims);
                let y = conv::forward(&g, &x, self.data(w), self.data(b));
                (y, rec.then_some(Cache::Conv(x)))
            }
            Node::Bn {
                eps,
                momentum,
                gamma,
                beta,
                mean,
                var,
            } => {
                let (m, v) = if self.mode.batch_stats {
                    let (m, v) = norm::moments(&x);
                    if self.mode.update_running {
                        self.pending.push(Pending {
                            mean,
                            var,
                            momentum,
                            batch_mean: m.clone(),
                            batch_var: v.clone(),
                        });
                    }
                    (m, v)
                } else {
                    let f = |i: usize| self.data(i).iter().map(|v| v.to_f64_lossy()).collect();
                    (f(mean), f(var))
                };
                let (y, cache) = norm::forward(
                    &x,
                    &m,
                    &v,
                    eps,
                    self.data(gamma),
                    self.data(beta),
                    self.mode.batch_stats,
                    rec,
                );
                (y, cache.map(Cache::Bn))
            }
            Node::Relu => {
                let (y, mask) = activation::relu(x, rec);
                (y, rec.then_some(Cache::Relu(mask)))
            }
            Node::Residual {
                ref body,
                ref shortcut,
            } => {
                let mut body_caches = Vec::new();
                let (short, short_cache) = match shortcut {
                    Some(proj) => {
                        let (s, c) = self.node(proj, x.clone());
                        (s, c.map(Box::new))
                    }
                    None => (x.clone(), None),
                };
                let mut y = self.run(body, x, &mut body_caches);
                for (a, &b) in y.data.iter_mut().zip(&short.data) {
                    *a = *a + b;
                }
                let (y, mask) = activation::relu(y, rec);
                let cache = rec.then_some(Cache::Residual {
                    body: body_caches,
                    shortcut: short_cache,
                    mask,
                });
                (y, cache)
            }
            Node::Pool => {
                let in_dims = x.dims;
                let (y, arg) = pool::forward(&x);
                (y, rec.then_some(Cache::Pool { in_dims, arg }))
            }
            Node::Dense { output, w, b } => {
                let y = dense::forward(&x, self.data(w), self.data(b), output);
                (y, rec.then_some(Cache::Dense(x)))
            }
            Node::Tanh => {
                let y = activation::tanh(x);
                let cache = rec.then(|| Cache::Tanh(y.data.clone()));
                (y, cache)
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (a, &b) in dst.iter_mut().zip(src) {
        *a = *a + b;
    }
}

fn backprop<T: Scalar>(
    nodes: &[Node],
    caches: Vec<Cache<T>>,
    mut dy: Act<T>,
    weights: &Weights<T>,
    grads: &mut Weights<T>,
    need_dx: bool,
) -> Option<Act<T>> {
    debug_assert_eq!(nodes.len(), caches.len());
    for (idx, (node, cache)) in nodes.iter().zip(caches).enumerate().rev() {
        let want = need_dx || idx > 0;
        match (node, cache) {
            (
                &Node::Conv {
                    k,
                    stride,
                    cin,
                    cout,
                    w,
                    b,
                },
                Cache::Conv(x),
            ) => {
                let g = ConvGeom::new(k, stride, cin, cout, x.dims);
                let r = conv::backward(&g, &x, &weights.blobs[w].data, &dy, want);
                add_into(&mut grads.blobs[w].data, &r.dw);
                add_into(&mut grads.blobs[b].data, &r.db);
                {
                    let dx = r.dx?;
                    dy = dx
                }
            }
            (&Node::Bn { gamma, beta, .. }, Cache::Bn(c)) => {
                let r = norm::backward(&c, &weights.blobs[gamma].data, &dy, want);
                add_into(&mut grads.blobs[gamma].data, &r.dgamma);
                add_into(&mut grads.blobs[beta].data, &r.dbeta);
                {
                    let dx = r.dx?;
                    dy.data = dx
                }
            }
            (Node::Relu, Cache::Relu(mask)) => dy = activation::relu_backward(&mask, dy),
            (
                Node::Residual { body, shortcut },
                Cache::Residual {
                    body: body_caches,
                    shortcut: short_cache,
                    mask,
                },
            ) => {
                let d_sum = activation::relu_backward(&mask, dy);
                let d_short = match (shortcut, short_cache) {
                    (Some(proj), Some(c)) => backprop(
                        std::slice::from_ref(proj.as_ref()),
                        vec![*c],
                        d_sum.clone(),
                        weights,
                        grads,
                        want,
                    ),
                    _ => Some(d_sum.clone()),
                };
                let d_body = backprop(body, body_caches, d_sum, weights, grads, want);
                match (d_body, d_short) {
                    (Some(mut a), Some(b)) => {
                        add_into(&mut a.data, &b.data);
                        dy = a;
                    }
                    _ => return None,
                }
            }
            (Node::Pool, Cache::Pool { in_dims, arg }) => dy = pool::backward(in_dims, &arg, &dy),
            (&Node::Dense { w, b, .. }, Cache::Dense(x)) => {
                let (dx, dw, db) = dense::backward(&x, &weights.blobs[w].data, &dy, want);
                add_into(&mut grads.blobs[w].data, &dw);
                add_into(&mut grads.blobs[b].data, &db);
                {
                    let dx = dx?;
                    dy = dx
                }
            }
            (Node::Tanh, Cache::Tanh(out)) => dy = activation::tanh_backward(&out, dy),
            _ => unreachable!("cache does not match node"),
        }
    }
    need_dx.then_some(dy)
}

/// Mean squared error over every element, and its gradient.
pub fn mse_loss<T: Scalar>(output: &[T], target: &[T]) -> (f64, Vec<T>) {
    let count = output.len().max(1) as f64;
    let mut sum = 0.0f64;
    let scale = T::from_f64_lossy(2.0 / count);
    let grad = output
        .iter()
        .zip(target)
        .map(|(&o, &t)| {
            let d = o - t;
            sum += d.to_f64_lossy() * d.to_f64_lossy();
            scale * d
        })
        .collect();
    (sum / count, grad)
}

/// A spec lowered once for repeated passes.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    nodes: Vec<Node>,
}

impl Network {
    pub fn new(spec: &NetworkSpec) -> Result<Self> {
        let (nodes, _) = compile(spec)?;
        Ok(Network {
            spec: spec.clone(),
            nodes,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    fn input_act<T: Scalar>(&self, batch: &Tensor<T>) -> Result<Act<T>> {
        let [d, h, w, c] = self.spec.input;
        let expected = [batch.batch(), d, h, w, c];
        if batch.shape() != expected || batch.batch() == 0 {
            return Err(Error::InputShape {
                expected: expected.to_vec(),
                got: batch.shape().to_vec(),
            });
        }
        Ok(Act {
            n: batch.batch(),
            dims: [d, h, w],
            c,
            data: batch.data().to_vec(),
        })
    }

    fn pass<T: Scalar>(
        &self,
        weights: &Weights<T>,
        batch: &Tensor<T>,
        mode: Mode,
        record: bool,
    ) -> Result<(Act<T>, Vec<Cache<T>>, Vec<Pending>)> {
        let x = self.input_act(batch)?;
        let mut pass = Pass {
            weights,
            mode,
            record,
            pending: Vec::new(),
        };
        let mut caches = Vec::new();
        let y = pass.run(&self.nodes, x, &mut caches);
        Ok((y, caches, pass.pending))
    }

    /// Inference: batch × 3N outputs using running batch-norm statistics.
    pub fn forward<T: Scalar>(&self, weights: &Weights<T>, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_mode(weights, batch, Mode::INFERENCE)
    }

    pub fn forward_mode<T: Scalar>(
        &self,
        weights: &Weights<T>,
        batch: &Tensor<T>,
        mode: Mode,
    ) -> Result<Tensor<T>> {
        weights.check(&self.spec)?;
        let (y, _, _) = self.pass(
            weights,
            batch,
            Mode {
                update_running: false,
                ..mode
            },
            false,
        )?;
        Tensor::from_vec(&[y.n, y.c], y.data)
    }

    /// Loss and parameter gradients for one batch. With
    /// `mode.update_running` the running statistics in `weights` are updated.
    pub fn backward<T: Scalar>(
        &self,
        weights: &mut Weights<T>,
        batch: &Tensor<T>,
        targets: &Tensor<T>,
        mode: Mode,
    ) -> Result<(f64, Weights<T>)> {
        weights.check(&self.spec)?;
        let (y, caches, pending) = self.pass(weights, batch, mode, true)?;
        if targets.data().len() != y.data.len() {
            return Err(Error::InputShape {
                expected: vec![y.n, y.c],
                got: targets.shape().to_vec(),
            });
        }
        if targets.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("targets must be finite".into()));
        }
        let (loss, grad) = mse_loss(&y.data, targets.data());
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(loss));
        }
        let mut grads = weights.zeros_like();
        let dy = y.with_data(grad);
        backprop(&self.nodes, caches, dy, weights, &mut grads, false);
        for p in pending {
            let a = p.momentum;
            for (i, (m, v)) in p.batch_mean.iter().zip(&p.batch_var).enumerate() {
                let rm = &mut weights.blobs[p.mean].data[i];
                *rm = T::from_f64_lossy(a * rm.to_f64_lossy() + (1.0 - a) * m);
                let rv = &mut weights.blobs[p.var].data[i];
                *rv = T::from_f64_lossy(a * rv.to_f64_lossy() + (1.0 - a) * v);
            }
        }
        Ok((loss, grads))
    }
}

/// Inference over a batch of grids.
pub fn forward<T: Scalar>(
    weights: &Weights<T>,
    spec: &NetworkSpec,
    batch: &Tensor<T>,
) -> Result<Tensor<T>> {
    Network::new(spec)?.forward(weights, batch)
}

/// MSE loss against `targets` and gradients for every parameter blob.
pub fn backward<T: Scalar>(
    weights: &mut Weights<T>,
    spec: &NetworkSpec,
    batch: &Tensor<T>,
    targets: &Tensor<T>,
    mode: Mode,
) -> Result<(f64, Weights<T>)> {
    Network::new(spec)?.backward(weights, batch, targets, mode)
}
