//! The trainable sequence model: a bidirectional gated recurrent encoder
//! whose per-frame memories feed three fully connected heads (segment
//! regression, confidence scoring, classification).
//!
//! Parameters live outside any graph as named dense tensors; each forward
//! pass binds them into a fresh [`Graph`] so independent videos can run on
//! separate threads.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::FramePrediction;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, Real};
use crate::interval::{segment_from_offsets, OffsetPair};

/// Network shape. `hidden_dim` is the per-direction recurrent width; the
/// heads consume the two concatenated memories (`2 * hidden_dim`). Head
/// width lists give the hidden layer sizes; output sizes are fixed (2 for
/// regression, 1 for scoring, `num_classes + 1` for classification).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub regression_widths: Vec<usize>,
    #[serde(default)]
    pub scoring_widths: Vec<usize>,
    #[serde(default)]
    pub classification_widths: Vec<usize>,
    pub seed: u64,
}

impl ModelConfig {
    /// Config with the default head topology: three hidden layers
    /// `[2H, H, H]` for regression and scoring, two hidden layers `[2H, H]`
    /// for classification.
    pub fn new(feature_dim: usize, hidden_dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut cfg = ModelConfig {
            feature_dim,
            hidden_dim,
            num_classes,
            regression_widths: Vec::new(),
            scoring_widths: Vec::new(),
            classification_widths: Vec::new(),
            seed,
        };
        cfg.fill_default_widths();
        cfg
    }

    /// Replaces empty width lists with the defaults derived from
    /// `hidden_dim`. Called after deserialization.
    pub fn fill_default_widths(&mut self) {
        let h = self.hidden_dim;
        if self.regression_widths.is_empty() {
            self.regression_widths = vec![2 * h, h, h];
        }
        if self.scoring_widths.is_empty() {
            self.scoring_widths = vec![2 * h, h, h];
        }
        if self.classification_widths.is_empty() {
            self.classification_widths = vec![2 * h, h];
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig(
                "model dimensions must all be at least 1".into(),
            ));
        }
        for w in self
            .regression_widths
            .iter()
            .chain(&self.scoring_widths)
            .chain(&self.classification_widths)
        {
            if *w == 0 {
                return Err(Error::InvalidConfig(
                    "head widths must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Input width of the heads: both directional memories concatenated.
    pub fn head_input(&self) -> usize {
        2 * self.hidden_dim
    }

    pub fn num_outputs(&self) -> usize {
        self.num_classes + 1
    }
}

/// One named parameter tensor.
#[derive(Debug, Clone)]
pub struct Param<F> {
    pub name: String,
    pub value: Array2<F>,
}

/// All parameter tensors of the model, in a fixed construction order
/// (recurrent cells first, then regression, scoring and classification
/// heads). The order is part of the checkpoint contract.
#[derive(Debug, Clone)]
pub struct ModelParams<F: Real> {
    config: ModelConfig,
    params: Vec<Param<F>>,
}

/// Gate count of the fused recurrent matrices: reset, update, candidate.
const GATES: usize = 3;

fn head_layer_dims(input: usize, widths: &[usize], output: usize) -> Vec<(usize, usize)> {
    let mut dims = Vec::new();
    let mut fan_in = input;
    for &w in widths {
        dims.push((fan_in, w));
        fan_in = w;
    }
    dims.push((fan_in, output));
    dims
}

/// Tensor names, shapes and initialization fan-in implied by a config, in
/// construction order.
fn layout(config: &ModelConfig) -> Vec<(String, (usize, usize), usize)> {
    let d = config.feature_dim;
    let h = config.hidden_dim;
    let mut out = Vec::new();
    for dir in ["fwd", "bwd"] {
        out.push((format!("gru_{dir}.w_ih"), (d, GATES * h), d));
        out.push((format!("gru_{dir}.w_hh"), (h, GATES * h), h));
        out.push((format!("gru_{dir}.b_ih"), (1, GATES * h), d));
        out.push((format!("gru_{dir}.b_hh"), (1, GATES * h), h));
    }
    let heads: [(&str, &[usize], usize); 3] = [
        ("regression", &config.regression_widths, 2),
        ("scoring", &config.scoring_widths, 1),
        (
            "classification",
            &config.classification_widths,
            config.num_outputs(),
        ),
    ];
    for (head, widths, output) in heads {
        for (i, (fan_in, fan_out)) in head_layer_dims(config.head_input(), widths, output)
            .into_iter()
            .enumerate()
        {
            out.push((format!("{head}.{i}.w"), (fan_in, fan_out), fan_in));
            out.push((format!("{head}.{i}.b"), (1, fan_out), fan_in));
        }
    }
    out
}

impl<F: Real> ModelParams<F> {
    /// Seeded initialization: every entry uniform in `±1/sqrt(fan_in)` of
    /// its layer. Draws happen in `f64` and are narrowed to `F`, so both
    /// precisions see the same stream.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = layout(config)
            .into_iter()
            .map(|(name, shape, fan_in)| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let value =
                    Array2::from_shape_fn(shape, |_| F::from_f64(rng.gen_range(-bound..=bound)));
                Param { name, value }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            params,
        })
    }

    /// All-zero parameters (useful for output-range tests).
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = layout(config)
            .into_iter()
            .map(|(name, shape, _)| Param {
                name,
                value: Array2::zeros(shape),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            params,
        })
    }

    /// Rebuilds parameters from named tensors (checkpoint restore),
    /// verifying names and shapes against the config and listing every
    /// offender on mismatch.
    pub fn from_named_tensors(
        config: &ModelConfig,
        tensors: Vec<(String, Array2<F>)>,
    ) -> Result<Self> {
        config.validate()?;
        let expected = layout(config);
        let mut offenders = Vec::new();
        if tensors.len() != expected.len() {
            offenders.push(format!(
                "tensor count mismatch: expected {}, got {}",
                expected.len(),
                tensors.len()
            ));
        }
        for ((name, shape, _), (got_name, got)) in expected.iter().zip(&tensors) {
            if name != got_name {
                offenders.push(format!("expected tensor '{name}', found '{got_name}'"));
            } else if got.dim() != *shape {
                offenders.push(format!(
                    "tensor '{name}': expected shape {}x{}, got {}x{}",
                    shape.0,
                    shape.1,
                    got.nrows(),
                    got.ncols()
                ));
            }
        }
        if !offenders.is_empty() {
            return Err(Error::CheckpointMismatch(offenders));
        }
        Ok(Self {
            config: config.clone(),
            params: tensors
                .into_iter()
                .map(|(name, value)| Param { name, value })
                .collect(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn entries(&self) -> &[Param<F>] {
        &self.params
    }

    pub fn entries_mut(&mut self) -> &mut [Param<F>] {
        &mut self.params
    }

    pub fn get(&self, name: &str) -> Option<&Array2<F>> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<F>> {
        self.params
            .iter_mut()
            .find(|p| p.name == name)
            .map(|p| &mut p.value)
    }

    /// Total scalar parameter count.
    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Inserts every tensor into `graph` as a differentiable leaf.
    pub fn bind(&self, graph: &mut Graph<F>) -> BoundParams {
        BoundParams {
            ids: self
                .params
                .iter()
                .map(|p| graph.leaf(p.value.clone()))
                .collect(),
        }
    }

    /// Gradients collected after a backward pass, aligned with
    /// [`ModelParams::entries`]; unreached tensors yield zeros.
    pub fn collect_grads(&self, graph: &Graph<F>, bound: &BoundParams) -> Vec<Array2<F>> {
        self.params
            .iter()
            .zip(&bound.ids)
            .map(|(p, &id)| {
                graph
                    .grad(id)
                    .cloned()
                    .unwrap_or_else(|| Array2::zeros(p.value.dim()))
            })
            .collect()
    }
}

/// Node ids of one binding of the parameters into a graph, aligned with the
/// parameter order.
pub struct BoundParams {
    ids: Vec<NodeId>,
}

impl BoundParams {
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }
}

/// Graph nodes of one forward pass.
pub struct ForwardNodes {
    /// Concatenated directional memories, `T x 2H`.
    pub memory: NodeId,
    /// Sigmoid offsets, `T x 2` (start offset, end offset).
    pub offsets: NodeId,
    /// Sigmoid confidence, `T x 1`.
    pub confidence: NodeId,
    /// Softmax class distribution, `T x (num_classes + 1)`.
    pub class_probs: NodeId,
    /// Per-direction memories, `T x H` each, exposed for inspection.
    pub memory_fwd: NodeId,
    pub memory_bwd: NodeId,
}

struct GruIds {
    w_ih: NodeId,
    w_hh: NodeId,
    b_ih: NodeId,
    b_hh: NodeId,
}

/// One recurrent update. `x_row` is the precomputed input projection
/// (`x_t . w_ih + b_ih`, a `1 x 3H` row); returns the next hidden state.
fn gru_step<F: Real>(
    g: &mut Graph<F>,
    hidden_dim: usize,
    cell: &GruIds,
    x_row: NodeId,
    h: NodeId,
) -> NodeId {
    let h_proj = g.matmul(h, cell.w_hh);
    let h_proj = g.add_row(h_proj, cell.b_hh);

    let (r0, r1) = (0, hidden_dim);
    let (z0, z1) = (hidden_dim, 2 * hidden_dim);
    let (n0, n1) = (2 * hidden_dim, 3 * hidden_dim);

    let xr = g.slice_cols(x_row, r0, r1);
    let hr = g.slice_cols(h_proj, r0, r1);
    let pre_r = g.add(xr, hr);
    let reset = g.sigmoid(pre_r);

    let xz = g.slice_cols(x_row, z0, z1);
    let hz = g.slice_cols(h_proj, z0, z1);
    let pre_z = g.add(xz, hz);
    let update = g.sigmoid(pre_z);

    let xn = g.slice_cols(x_row, n0, n1);
    let hn = g.slice_cols(h_proj, n0, n1);
    let gated = g.mul(reset, hn);
    let pre_n = g.add(xn, gated);
    let candidate = g.tanh(pre_n);

    // h' = (1 - update) * candidate + update * h
    let keep = g.sub_from(update, F::one());
    let a = g.mul(keep, candidate);
    let b = g.mul(update, h);
    g.add(a, b)
}

fn run_direction<F: Real>(
    g: &mut Graph<F>,
    hidden_dim: usize,
    cell: &GruIds,
    features: NodeId,
    num_frames: usize,
    reverse: bool,
) -> NodeId {
    let projected = g.matmul(features, cell.w_ih);
    let projected = g.add_row(projected, cell.b_ih);
    let mut h = g.constant(Array2::zeros((1, hidden_dim)));
    let mut states = vec![h; num_frames];
    let steps: Vec<usize> = if reverse {
        (0..num_frames).rev().collect()
    } else {
        (0..num_frames).collect()
    };
    for t in steps {
        let x_row = g.row(projected, t);
        h = gru_step(g, hidden_dim, cell, x_row, h);
        states[t] = h;
    }
    g.stack_rows(&states)
}

fn head<F: Real>(
    g: &mut Graph<F>,
    input: NodeId,
    layers: &[(NodeId, NodeId)],
    final_activation: impl Fn(&mut Graph<F>, NodeId) -> NodeId,
) -> NodeId {
    let mut x = input;
    for (i, &(w, b)) in layers.iter().enumerate() {
        let z = g.matmul(x, w);
        let z = g.add_row(z, b);
        x = if i + 1 == layers.len() {
            final_activation(g, z)
        } else {
            g.relu(z)
        };
    }
    x
}

/// Runs the full network over a `T x D` feature matrix inside `graph`.
///
/// The forward cell consumes frames left to right, the backward cell right
/// to left; the two memories at each frame are concatenated and shared by
/// the three heads. Output ranges (sigmoid, softmax) satisfy the
/// frame-prediction invariants by construction.
pub fn forward<F: Real>(
    graph: &mut Graph<F>,
    params: &ModelParams<F>,
    bound: &BoundParams,
    features: &Array2<F>,
) -> Result<ForwardNodes> {
    let config = params.config();
    let (num_frames, feature_dim) = features.dim();
    if feature_dim != config.feature_dim {
        return Err(Error::ShapeMismatch {
            what: "forward features",
            expected: format!("T x {}", config.feature_dim),
            got: format!("{num_frames} x {feature_dim}"),
        });
    }
    if num_frames == 0 {
        return Err(Error::ShapeMismatch {
            what: "forward features",
            expected: "at least one frame".into(),
            got: "0 frames".into(),
        });
    }

    let ids = bound.ids();
    let cell = |base: usize| GruIds {
        w_ih: ids[base],
        w_hh: ids[base + 1],
        b_ih: ids[base + 2],
        b_hh: ids[base + 3],
    };
    let fwd_cell = cell(0);
    let bwd_cell = cell(4);

    let x = graph.constant(features.clone());
    let memory_fwd = run_direction(graph, config.hidden_dim, &fwd_cell, x, num_frames, false);
    let memory_bwd = run_direction(graph, config.hidden_dim, &bwd_cell, x, num_frames, true);
    let memory = graph.concat_cols(memory_fwd, memory_bwd);

    let mut cursor = 8;
    let mut take_head = |count: usize| {
        let layers: Vec<(NodeId, NodeId)> = (0..count)
            .map(|i| (ids[cursor + 2 * i], ids[cursor + 2 * i + 1]))
            .collect();
        cursor += 2 * count;
        layers
    };
    let reg_layers = take_head(config.regression_widths.len() + 1);
    let score_layers = take_head(config.scoring_widths.len() + 1);
    let cls_layers = take_head(config.classification_widths.len() + 1);

    let offsets = head(graph, memory, &reg_layers, Graph::sigmoid);
    let confidence = head(graph, memory, &score_layers, Graph::sigmoid);
    let class_probs = head(graph, memory, &cls_layers, Graph::softmax_rows);

    Ok(ForwardNodes {
        memory,
        offsets,
        confidence,
        class_probs,
        memory_fwd,
        memory_bwd,
    })
}

/// Reads forward output values back into plain [`FramePrediction`]s.
///
/// `anchors` are the frame anchor times and `scale` the offset normalizer
/// (the video duration).
pub fn frame_predictions<F: Real>(
    offsets: &Array2<F>,
    confidence: &Array2<F>,
    class_probs: &Array2<F>,
    anchors: &[f64],
    scale: f64,
) -> Result<Vec<FramePrediction>> {
    let num_frames = anchors.len();
    if offsets.nrows() != num_frames
        || confidence.nrows() != num_frames
        || class_probs.nrows() != num_frames
    {
        return Err(Error::MismatchedLengths {
            what: "forward outputs vs anchors",
            expected: num_frames,
            got: offsets.nrows(),
        });
    }
    (0..num_frames)
        .map(|t| {
            let off = OffsetPair::new(
                offsets[(t, 0)].as_f64().clamp(0.0, 1.0),
                offsets[(t, 1)].as_f64().clamp(0.0, 1.0),
            )?;
            let interval = segment_from_offsets(anchors[t], off, scale)?;
            let probs: Vec<f64> = class_probs.row(t).iter().map(|p| p.as_f64()).collect();
            Ok(FramePrediction {
                t: anchors[t],
                interval,
                confidence: confidence[(t, 0)].as_f64().clamp(0.0, 1.0),
                class_probs: probs,
            })
        })
        .collect()
}
