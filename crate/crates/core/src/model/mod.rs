//! The FIE-NO network.
//!
//! A prediction at an interior point `x` is `λ · Σᵢ KAN(x)ᵢ · IANᵢ`:
//!
//! - KAN maps `(x, y, r, θ)` through fixed random linear layers, a cosine,
//!   and a trainable GELU MLP to `D` values;
//! - IAN encodes the α-ordered boundary samples, laid out as a one-channel
//!   `5 × m` image with rows `(value, x, y, r, θ)`, through convolutions and
//!   fully connected layers into one `D`-vector shared by all points;
//! - `λ` is a trainable scalar initialised to `1/D`.

mod checkpoint;

pub use checkpoint::{CHECKPOINT_VERSION, Checkpoint};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{DiffError, Graph, Padding, Tensor, Var};
use crate::geometry::{BoundarySample, Point2};
use crate::rng::stream;
use crate::truth::BcKind;

/// Input features per interior point: `(x, y, r, θ)`.
pub const POINT_FEATURES: usize = 4;

/// Rows of the boundary image: `(value, x, y, r, θ)`.
pub const BOUNDARY_CHANNELS: usize = 5;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("expected {expected} boundary samples, got {got}")]
    BoundarySize { expected: usize, got: usize },
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("checkpoint checksum mismatch or corrupt file: {0}")]
    Checksum(String),
    #[error("checkpoint does not match its config: {0}")]
    Layout(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KanConfig {
    /// Widths of the fixed random layers.
    pub elm_layers: Vec<usize>,
    /// Widths of the trainable layers; may be empty.
    pub mlp_layers: Vec<usize>,
    #[serde(rename = "D")]
    pub d: usize,
    pub elm_seed: u64,
    /// Divide fixed layers after the first by `√fan_in` so stacked Gaussian
    /// layers keep unit-variance frequencies.
    pub elm_fan_in_scaling: bool,
}

impl Default for KanConfig {
    fn default() -> Self {
        Self {
            elm_layers: vec![64, 64],
            mlp_layers: vec![64, 20],
            d: 20,
            elm_seed: 0,
            elm_fan_in_scaling: true,
        }
    }
}

impl KanConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.elm_layers.is_empty() {
            return Err(ModelError::Config("kan.elm_layers must not be empty".into()));
        }
        if self.elm_layers.iter().chain(&self.mlp_layers).any(|&w| w == 0) {
            return Err(ModelError::Config("kan widths must be at least 1".into()));
        }
        let last = self.mlp_layers.last().or(self.elm_layers.last()).copied();
        if last != Some(self.d) {
            return Err(ModelError::Config(format!(
                "final kan width {} must equal D = {}",
                last.unwrap_or(0),
                self.d
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IanConfig {
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub fc_layers: Vec<usize>,
    #[serde(rename = "D")]
    pub d: usize,
    /// Boundary samples per forward pass.
    pub m: usize,
    /// `Valid` keeps the first fully connected layer at `32·196` inputs
    /// rather than `32·5·200` for the default sizes.
    pub padding: Padding,
}

impl Default for IanConfig {
    fn default() -> Self {
        Self {
            conv_channels: vec![16, 32],
            kernel_size: 3,
            fc_layers: vec![128, 20],
            d: 20,
            m: 200,
            padding: Padding::Valid,
        }
    }
}

impl IanConfig {
    /// Spatial size after the convolution stack.
    fn conv_output(&self) -> Result<(usize, usize), ModelError> {
        let (mut h, mut w) = (BOUNDARY_CHANNELS, self.m);
        for _ in &self.conv_channels {
            if self.padding == Padding::Valid {
                if self.kernel_size > h || self.kernel_size > w {
                    return Err(ModelError::Config(format!(
                        "kernel {} does not fit a {h}×{w} feature map",
                        self.kernel_size
                    )));
                }
                h -= self.kernel_size - 1;
                w -= self.kernel_size - 1;
            }
        }
        Ok((h, w))
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.m == 0 || self.kernel_size == 0 {
            return Err(ModelError::Config("ian.m and ian.kernel_size must be at least 1".into()));
        }
        if self.padding == Padding::Same && self.kernel_size % 2 == 0 {
            return Err(ModelError::Config("same padding needs an odd kernel_size".into()));
        }
        if self.conv_channels.iter().chain(&self.fc_layers).any(|&w| w == 0) {
            return Err(ModelError::Config("ian widths must be at least 1".into()));
        }
        if self.fc_layers.last() != Some(&self.d) {
            return Err(ModelError::Config(format!("final ian fc width must equal D = {}", self.d)));
        }
        self.conv_output().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub kan: KanConfig,
    #[serde(default)]
    pub ian: IanConfig,
    pub bc_kind: BcKind,
    /// Seed for the trainable weights' initialisation.
    #[serde(default)]
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn new(bc_kind: BcKind) -> Self {
        Self {
            kan: KanConfig::default(),
            ian: IanConfig::default(),
            bc_kind,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.kan.validate()?;
        self.ian.validate()?;
        if self.kan.d != self.ian.d {
            return Err(ModelError::Config(format!(
                "kan.D ({}) and ian.D ({}) must agree",
                self.kan.d, self.ian.d
            )));
        }
        Ok(())
    }

    /// Names and shapes of the trainable tensors, in storage order.
    pub fn parameter_layout(&self) -> Result<Vec<(String, Vec<usize>)>, ModelError> {
        self.validate()?;
        let mut out = Vec::new();
        let mut fan_in = *self.kan.elm_layers.last().expect("validated");
        for (i, &w) in self.kan.mlp_layers.iter().enumerate() {
            out.push((format!("kan.mlp.{i}.weight"), vec![fan_in, w]));
            out.push((format!("kan.mlp.{i}.bias"), vec![w]));
            fan_in = w;
        }
        let k = self.ian.kernel_size;
        let mut channels = 1;
        for (i, &c) in self.ian.conv_channels.iter().enumerate() {
            out.push((format!("ian.conv.{i}.kernel"), vec![c, channels, k, k]));
            out.push((format!("ian.conv.{i}.bias"), vec![c]));
            channels = c;
        }
        let (h, w) = self.ian.conv_output()?;
        let mut fan_in = channels * h * w;
        for (i, &width) in self.ian.fc_layers.iter().enumerate() {
            out.push((format!("ian.fc.{i}.weight"), vec![fan_in, width]));
            out.push((format!("ian.fc.{i}.bias"), vec![width]));
            fan_in = width;
        }
        out.push(("lambda".into(), vec![1]));
        Ok(out)
    }
}

/// Parameter handles of one model inside a [`Graph`].
#[derive(Debug, Clone)]
pub struct BoundParams(Vec<Var>);

impl BoundParams {
    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FienoModel {
    config: ModelConfig,
    /// Fixed random layers, each `[fan_in, width]`; never trained.
    elm: Vec<Tensor>,
    names: Vec<String>,
    params: Vec<Tensor>,
}

fn normal_tensor<R: Rng>(rng: &mut R, shape: &[usize], std: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(data, shape.to_vec()).expect("shape matches")
}

/// Regenerates the fixed layers from `cfg.elm_seed`.
pub fn elm_weights(cfg: &KanConfig) -> Vec<Tensor> {
    let mut rng = stream(cfg.elm_seed, "elm");
    let mut fan_in = POINT_FEATURES;
    let mut layers = Vec::with_capacity(cfg.elm_layers.len());
    for (i, &w) in cfg.elm_layers.iter().enumerate() {
        let std = if i > 0 && cfg.elm_fan_in_scaling {
            1.0 / (fan_in as f64).sqrt()
        } else {
            1.0
        };
        layers.push(normal_tensor(&mut rng, &[fan_in, w], std));
        fan_in = w;
    }
    layers
}

impl FienoModel {
    /// Fresh model: fixed layers from `elm_seed`, trainable weights from
    /// `init_seed` (LeCun-normal, zero biases), `λ = 1/D`.
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        let layout = config.parameter_layout()?;
        let mut rng = stream(config.init_seed, "init");
        let mut names = Vec::with_capacity(layout.len());
        let mut params = Vec::with_capacity(layout.len());
        for (name, shape) in layout {
            let t = if name == "lambda" {
                Tensor::scalar(1.0 / config.kan.d as f64)
            } else if name.ends_with(".bias") {
                Tensor::zeros(&shape)
            } else {
                let fan_in: usize = if shape.len() == 4 { shape[1..].iter().product() } else { shape[0] };
                normal_tensor(&mut rng, &shape, 1.0 / (fan_in as f64).sqrt())
            };
            names.push(name);
            params.push(t);
        }
        Ok(Self {
            elm: elm_weights(&config.kan),
            config,
            names,
            params,
        })
    }

    /// Rebuilds a model from stored trainable tensors (checked against the
    /// config's layout).
    pub fn from_parts(config: ModelConfig, params: Vec<(String, Vec<f64>)>) -> Result<Self, ModelError> {
        let layout = config.parameter_layout()?;
        if layout.len() != params.len() {
            return Err(ModelError::Layout(format!(
                "expected {} tensors, found {}",
                layout.len(),
                params.len()
            )));
        }
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for ((name, shape), (pname, data)) in layout.into_iter().zip(params) {
            if name != pname {
                return Err(ModelError::Layout(format!("expected tensor {name}, found {pname}")));
            }
            let t = Tensor::new(data, shape).map_err(|e| ModelError::Layout(format!("{name}: {e}")))?;
            names.push(name);
            tensors.push(t);
        }
        Ok(Self {
            elm: elm_weights(&config.kan),
            config,
            names,
            params: tensors,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn d(&self) -> usize {
        self.config.kan.d
    }

    pub fn m(&self) -> usize {
        self.config.ian.m
    }

    pub fn bc_kind(&self) -> BcKind {
        self.config.bc_kind
    }

    pub fn elm(&self) -> &[Tensor] {
        &self.elm
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.params[i])
    }

    pub fn lambda(&self) -> f64 {
        self.params.last().expect("lambda is always present").item()
    }

    pub fn set_lambda(&mut self, v: f64) {
        *self.params.last_mut().expect("lambda is always present") = Tensor::scalar(v);
    }

    pub fn num_trainable(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Fixed part of KAN: `cos` of the stacked random layers, `[N, E]`.
    /// Depends only on the points, so it can be cached across steps.
    pub fn elm_features(&self, points: &[Point2]) -> Tensor {
        let data = points.iter().flat_map(|p| p.features()).collect();
        let mut h = Tensor::new(data, vec![points.len(), POINT_FEATURES]).expect("shape matches");
        for w in &self.elm {
            h = h.matmul(w).expect("layer widths chain");
        }
        h.map(f64::cos)
    }

    /// The `[1, 5, m]` boundary image, columns ordered by α.
    pub fn boundary_image(&self, boundary: &[BoundarySample]) -> Result<Tensor, ModelError> {
        boundary_image(boundary, self.m())
    }

    /// Registers every trainable tensor as a tracked leaf.
    pub fn bind<'a>(&'a self, g: &mut Graph<'a>) -> BoundParams {
        BoundParams(self.params.iter().map(|t| g.param(t)).collect())
    }

    /// Registers trainable tensors as untracked leaves (inference).
    pub fn bind_frozen<'a>(&'a self, g: &mut Graph<'a>) -> BoundParams {
        BoundParams(self.params.iter().map(|t| g.constant_ref(t)).collect())
    }

    /// Trainable KAN head on cached features: `[N, E] → [N, D]`.
    pub fn kan_graph(&self, g: &mut Graph<'_>, p: &BoundParams, features: Var) -> Result<Var, ModelError> {
        let mut h = features;
        let layers = self.config.kan.mlp_layers.len();
        for i in 0..layers {
            let z = g.matmul(h, p.0[2 * i])?;
            h = g.add_row(z, p.0[2 * i + 1])?;
            if i + 1 < layers {
                h = g.gelu(h);
            }
        }
        Ok(h)
    }

    /// IAN on a `[1, 5, m]` image: `→ [D]`.
    pub fn ian_graph(&self, g: &mut Graph<'_>, p: &BoundParams, image: Var) -> Result<Var, ModelError> {
        let ian = &self.config.ian;
        let mut idx = 2 * self.config.kan.mlp_layers.len();
        let mut h = image;
        for _ in &ian.conv_channels {
            let z = g.conv2d(h, p.0[idx], Some(p.0[idx + 1]), ian.padding)?;
            h = g.gelu(z);
            idx += 2;
        }
        let flat: usize = g.shape(h).iter().product();
        h = g.reshape(h, &[1, flat])?;
        let layers = ian.fc_layers.len();
        for i in 0..layers {
            let z = g.matmul(h, p.0[idx])?;
            h = g.add_row(z, p.0[idx + 1])?;
            if i + 1 < layers {
                h = g.gelu(h);
            }
            idx += 2;
        }
        Ok(g.reshape(h, &[ian.d])?)
    }

    /// Full model on cached features and a boundary image: `[N]`.
    pub fn forward_graph(
        &self,
        g: &mut Graph<'_>,
        p: &BoundParams,
        features: Var,
        image: Var,
    ) -> Result<Var, ModelError> {
        let k = self.kan_graph(g, p, features)?;
        let i = self.ian_graph(g, p, image)?;
        let col = g.reshape(i, &[self.d(), 1])?;
        let dot = g.matmul(k, col)?;
        let n = g.shape(dot)[0];
        let flat = g.reshape(dot, &[n])?;
        let lambda = *p.0.last().expect("lambda is always present");
        Ok(g.scale(flat, lambda)?)
    }

    /// KAN output for each point, `[N, D]`.
    pub fn kan_forward(&self, points: &[Point2]) -> Result<Tensor, ModelError> {
        let feats = self.elm_features(points);
        let mut g = Graph::new();
        let p = self.bind_frozen(&mut g);
        let f = g.constant(feats);
        let out = self.kan_graph(&mut g, &p, f)?;
        Ok(g.value(out).clone())
    }

    /// IAN output for one boundary set of exactly `m` samples, `[D]`.
    pub fn ian_forward(&self, boundary: &[BoundarySample]) -> Result<Tensor, ModelError> {
        let img = self.boundary_image(boundary)?;
        let mut g = Graph::new();
        let p = self.bind_frozen(&mut g);
        let v = g.constant(img);
        let out = self.ian_graph(&mut g, &p, v)?;
        Ok(g.value(out).clone())
    }

    /// Predictions at `points` given `m` boundary samples.
    pub fn forward(&self, boundary: &[BoundarySample], points: &[Point2]) -> Result<Vec<f64>, ModelError> {
        let feats = self.elm_features(points);
        let img = self.boundary_image(boundary)?;
        self.predict_cached(&feats, &img)
    }

    /// Predictions from precomputed ELM features and boundary image.
    pub fn predict_cached(&self, features: &Tensor, image: &Tensor) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new();
        let p = self.bind_frozen(&mut g);
        let f = g.constant_ref(features);
        let i = g.constant_ref(image);
        let out = self.forward_graph(&mut g, &p, f, i)?;
        Ok(g.value(out).data().to_vec())
    }

    /// Mean squared error against `targets` and its gradient with respect to
    /// every trainable tensor (in [`params`](Self::params) order).
    pub fn mse_and_gradients(
        &self,
        features: &Tensor,
        image: &Tensor,
        targets: &Tensor,
    ) -> Result<(f64, Vec<Tensor>), ModelError> {
        let mut g = Graph::new();
        let p = self.bind(&mut g);
        let f = g.constant_ref(features);
        let i = g.constant_ref(image);
        let pred = self.forward_graph(&mut g, &p, f, i)?;
        let t = g.constant_ref(targets);
        let diff = g.sub(pred, t)?;
        let sq = g.mul(diff, diff)?;
        let loss = g.mean(sq);
        let grads = g.backward(loss)?;
        let out = p
            .0
            .iter()
            .zip(&self.params)
            .map(|(v, t)| grads.get_or_zeros(*v, t.shape()))
            .collect();
        Ok((g.value(loss).item(), out))
    }
}

/// Lays out `m` boundary samples as a `[1, 5, m]` image sorted by α.
pub fn boundary_image(boundary: &[BoundarySample], m: usize) -> Result<Tensor, ModelError> {
    if boundary.len() != m {
        return Err(ModelError::BoundarySize {
            expected: m,
            got: boundary.len(),
        });
    }
    let mut sorted = boundary.to_vec();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let mut data = Vec::with_capacity(BOUNDARY_CHANNELS * m);
    data.extend(sorted.iter().map(|s| s.value));
    data.extend(sorted.iter().map(|s| s.point.x));
    data.extend(sorted.iter().map(|s| s.point.y));
    data.extend(sorted.iter().map(|s| s.point.r));
    data.extend(sorted.iter().map(|s| s.point.theta));
    Ok(Tensor::new(data, vec![1, BOUNDARY_CHANNELS, m])?)
}
