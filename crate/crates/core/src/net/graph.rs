use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::tensor::{
    add, batchnorm_infer, conv2d, global_avg_pool, maxpool2d, relu, BatchNormParams, ConvParams, FeatureVector,
    Tensor, TensorError,
};

use super::archive::WeightArchive;
use super::synthetic::STAGE_WIDTHS;

pub const INPUT_DIMS: (usize, usize, usize) = (3, 224, 224);

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("dim mismatch at `{layer}` (fed by `{previous}`): expected {expected}, got {got}")]
    DimMismatch { layer: String, previous: String, expected: String, got: String },
    #[error("unknown tap `{0}` (expected one of stem, stage1..stage4, gap)")]
    UnknownTap(String),
    #[error("input dims {got:?}, expected {expected:?}")]
    InputDims { expected: (usize, usize, usize), got: (usize, usize, usize) },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Where activations are read.
///
/// MATLAB's `pool5` is [`Tap::Gap`]; `pool4` is mapped to [`Tap::Stage4`]
/// (the last residual stage, before pooling). Both aliases parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tap {
    Stem,
    Stage1,
    Stage2,
    Stage3,
    Stage4,
    Gap,
}

impl Tap {
    pub const ALL: [Tap; 6] = [Tap::Stem, Tap::Stage1, Tap::Stage2, Tap::Stage3, Tap::Stage4, Tap::Gap];

    pub fn name(self) -> &'static str {
        match self {
            Tap::Stem => "stem",
            Tap::Stage1 => "stage1",
            Tap::Stage2 => "stage2",
            Tap::Stage3 => "stage3",
            Tap::Stage4 => "stage4",
            Tap::Gap => "gap",
        }
    }

    /// Map dims at this tap for a 224 x 224 input.
    pub fn dims(self) -> (usize, usize, usize) {
        match self {
            Tap::Stem | Tap::Stage1 => (64, 56, 56),
            Tap::Stage2 => (128, 28, 28),
            Tap::Stage3 => (256, 14, 14),
            Tap::Stage4 => (512, 7, 7),
            Tap::Gap => (512, 1, 1),
        }
    }

    pub fn feature_len(self) -> usize {
        let (c, h, w) = self.dims();
        c * h * w
    }
}

impl fmt::Display for Tap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tap {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stem" => Ok(Tap::Stem),
            "stage1" => Ok(Tap::Stage1),
            "stage2" => Ok(Tap::Stage2),
            "stage3" => Ok(Tap::Stage3),
            "stage4" | "pool4" => Ok(Tap::Stage4),
            "gap" | "pool5" => Ok(Tap::Gap),
            other => Err(GraphError::UnknownTap(other.to_string())),
        }
    }
}

/// Parameters of a basic residual block's main branch.
#[derive(Debug, Clone)]
pub struct BasicBlockParams {
    pub conv1: ConvParams,
    pub bn1: BatchNormParams,
    pub conv2: ConvParams,
    pub bn2: BatchNormParams,
}

/// 1x1 strided projection shortcut.
#[derive(Debug, Clone)]
pub struct Projection {
    pub conv: ConvParams,
    pub bn: BatchNormParams,
}

/// `relu(bn2(conv2(relu(bn1(conv1(x))))) + shortcut(x))`.
pub fn residual_block(input: &Tensor, block: &BasicBlockParams, projection: Option<&Projection>) -> Result<Tensor> {
    let f2 = conv2d(input, &block.conv1)?;
    let f2 = relu(&batchnorm_infer(&f2, &block.bn1)?);
    let f3 = conv2d(&f2, &block.conv2)?;
    let f3 = batchnorm_infer(&f3, &block.bn2)?;
    let shortcut = match projection {
        Some(p) => batchnorm_infer(&conv2d(input, &p.conv)?, &p.bn)?,
        None => input.clone(),
    };
    Ok(relu(&add(&f3, &shortcut)?))
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Conv(ConvParams),
    BatchNorm(BatchNormParams),
    Relu,
    MaxPool { kernel: (usize, usize), stride: (usize, usize), padding: (usize, usize) },
    Add,
    Passthrough,
    Gap,
}

#[derive(Debug, Clone)]
struct Node {
    name: String,
    op: Op,
    inputs: Vec<usize>,
    dims: (usize, usize, usize),
}

/// The assembled ResNet-18 DAG. Nodes are stored in topological order.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    nodes: Vec<Node>,
    taps: Vec<(Tap, usize)>,
    last_use: Vec<usize>,
}

struct Builder<'a> {
    archive: &'a WeightArchive,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn tensor(&self, name: &str) -> Result<&super::archive::ArchiveTensor> {
        self.archive.get(name).ok_or_else(|| GraphError::MissingTensor(name.to_string()))
    }

    fn push(&mut self, name: impl Into<String>, op: Op, inputs: Vec<usize>, dims: (usize, usize, usize)) -> usize {
        self.nodes.push(Node { name: name.into(), op, inputs, dims });
        self.nodes.len() - 1
    }

    fn conv(
        &mut self,
        src: usize,
        prefix: &str,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<usize> {
        let wname = format!("{prefix}.weight");
        let t = self.tensor(&wname)?;
        let (c, h, w) = self.nodes[src].dims;
        let expected = vec![out_channels, c, kernel, kernel];
        if t.dims != expected {
            return Err(GraphError::DimMismatch {
                layer: prefix.to_string(),
                previous: self.nodes[src].name.clone(),
                expected: format!("weight dims {expected:?}"),
                got: format!("weight dims {:?}", t.dims),
            });
        }
        let params = ConvParams::new(
            out_channels,
            c,
            (kernel, kernel),
            t.data.clone(),
            None,
            (stride, stride),
            (padding, padding),
        )?;
        let dims = params.output_dims(h, w)?;
        Ok(self.push(prefix, Op::Conv(params), vec![src], dims))
    }

    fn bn(&mut self, src: usize, prefix: &str) -> Result<usize> {
        let dims = self.nodes[src].dims;
        let mut fields = Vec::with_capacity(4);
        for field in ["gamma", "beta", "mean", "var"] {
            let name = format!("{prefix}.{field}");
            let t = self.tensor(&name)?;
            if t.dims != [dims.0] {
                return Err(GraphError::DimMismatch {
                    layer: prefix.to_string(),
                    previous: self.nodes[src].name.clone(),
                    expected: format!("`{name}` of length {}", dims.0),
                    got: format!("dims {:?}", t.dims),
                });
            }
            fields.push(t.data.clone());
        }
        let var = fields.pop().unwrap();
        let mean = fields.pop().unwrap();
        let beta = fields.pop().unwrap();
        let gamma = fields.pop().unwrap();
        let params = BatchNormParams::new(gamma, beta, mean, var, BatchNormParams::DEFAULT_EPSILON)?;
        Ok(self.push(prefix, Op::BatchNorm(params), vec![src], dims))
    }

    fn relu(&mut self, src: usize, name: String) -> usize {
        let dims = self.nodes[src].dims;
        self.push(name, Op::Relu, vec![src], dims)
    }

    fn add(&mut self, a: usize, b: usize, name: String) -> Result<usize> {
        let (da, db) = (self.nodes[a].dims, self.nodes[b].dims);
        if da != db {
            return Err(GraphError::DimMismatch {
                layer: name,
                previous: format!("{} + {}", self.nodes[a].name, self.nodes[b].name),
                expected: format!("{da:?}"),
                got: format!("{db:?}"),
            });
        }
        Ok(self.push(name, Op::Add, vec![a, b], da))
    }
}

/// Assembles ResNet-18 from an archive following the fixed naming manifest.
pub fn build_resnet18(archive: &WeightArchive) -> Result<NetworkGraph> {
    let mut b = Builder { archive, nodes: Vec::with_capacity(80) };
    let mut taps = Vec::with_capacity(6);

    let input = b.push("input", Op::Input, vec![], INPUT_DIMS);
    let x = b.conv(input, "conv1", 64, 7, 2, 3)?;
    let x = b.bn(x, "bn1")?;
    let x = b.relu(x, "relu".into());
    let (c, h, w) = b.nodes[x].dims;
    let pooled = (c, (h + 2 - 3) / 2 + 1, (w + 2 - 3) / 2 + 1);
    let mut x = b.push(
        "maxpool",
        Op::MaxPool { kernel: (3, 3), stride: (2, 2), padding: (1, 1) },
        vec![x],
        pooled,
    );
    taps.push((Tap::Stem, x));

    let stage_taps = [Tap::Stage1, Tap::Stage2, Tap::Stage3, Tap::Stage4];
    for (si, &width) in STAGE_WIDTHS.iter().enumerate() {
        let stage = si + 1;
        for block in 0..2 {
            let p = format!("layer{stage}.{block}");
            let stride = if stage > 1 && block == 0 { 2 } else { 1 };
            let main = b.conv(x, &format!("{p}.conv1"), width, 3, stride, 1)?;
            let main = b.bn(main, &format!("{p}.bn1"))?;
            let main = b.relu(main, format!("{p}.relu1"));
            let main = b.conv(main, &format!("{p}.conv2"), width, 3, 1, 1)?;
            let main = b.bn(main, &format!("{p}.bn2"))?;
            let shortcut = if stride != 1 || b.nodes[x].dims.0 != width {
                let s = b.conv(x, &format!("{p}.downsample.conv"), width, 1, stride, 0)?;
                b.bn(s, &format!("{p}.downsample.bn"))?
            } else {
                x
            };
            let sum = b.add(main, shortcut, format!("{p}.add"))?;
            x = b.relu(sum, format!("{p}.relu2"));
        }
        taps.push((stage_taps[si], x));
    }
    let (c, _, _) = b.nodes[x].dims;
    let gap = b.push("gap", Op::Gap, vec![x], (c, 1, 1));
    taps.push((Tap::Gap, gap));

    Ok(NetworkGraph::finish(b.nodes, taps))
}

impl NetworkGraph {
    fn finish(nodes: Vec<Node>, taps: Vec<(Tap, usize)>) -> Self {
        let mut last_use: Vec<usize> = (0..nodes.len()).collect();
        for (i, node) in nodes.iter().enumerate() {
            for &src in &node.inputs {
                last_use[src] = last_use[src].max(i);
            }
        }
        Self { nodes, taps, last_use }
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        self.nodes[0].dims
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of residual additions (basic blocks).
    pub fn block_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.op, Op::Add)).count()
    }

    pub fn layer_names(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.name.as_str())
    }

    fn tap_index(&self, tap: Tap) -> usize {
        self.taps.iter().find(|(t, _)| *t == tap).map(|(_, i)| *i).expect("every tap is registered at build")
    }

    pub fn tap_dims(&self, tap: Tap) -> (usize, usize, usize) {
        self.nodes[self.tap_index(tap)].dims
    }

    /// Activation map at `tap`.
    pub fn forward_map(&self, input: &Tensor, tap: Tap) -> Result<Tensor> {
        if input.dims() != self.input_dims() {
            return Err(GraphError::InputDims { expected: self.input_dims(), got: input.dims() });
        }
        let target = self.tap_index(tap);
        let mut values: Vec<Option<Tensor>> = vec![None; target + 1];
        values[0] = Some(input.clone());
        for i in 1..=target {
            let node = &self.nodes[i];
            let arg = |k: usize| values[node.inputs[k]].as_ref().expect("inputs computed before use");
            let out = match &node.op {
                Op::Input => unreachable!("single input node"),
                Op::Conv(p) => conv2d(arg(0), p)?,
                Op::BatchNorm(p) => batchnorm_infer(arg(0), p)?,
                Op::Relu => relu(arg(0)),
                Op::MaxPool { kernel, stride, padding } => maxpool2d(arg(0), *kernel, *stride, *padding)?,
                Op::Add => add(arg(0), arg(1))?,
                Op::Passthrough => arg(0).clone(),
                Op::Gap => {
                    let v = global_avg_pool(arg(0)).values;
                    Tensor::from_parts(v.len(), 1, 1, v)
                }
            };
            for &src in &node.inputs {
                if self.last_use[src] == i {
                    values[src] = None;
                }
            }
            values[i] = Some(out);
        }
        Ok(values[target].take().expect("target computed"))
    }

    /// Flattened (channel-major) activations at `tap`.
    pub fn forward(&self, input: &Tensor, tap: Tap) -> Result<FeatureVector> {
        let map = self.forward_map(input, tap)?;
        Ok(FeatureVector { values: map.into_data(), tap_name: tap.name().to_string() })
    }

    /// Forward passes over a batch, parallel across inputs; output order follows input order.
    pub fn forward_batch(&self, inputs: &[Tensor], tap: Tap) -> Vec<Result<FeatureVector>> {
        inputs.par_iter().map(|x| self.forward(x, tap)).collect()
    }

    /// Ablation for tests: every residual add keeps only its main branch.
    #[doc(hidden)]
    pub fn without_skip_connections(&self) -> NetworkGraph {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n.op {
                Op::Add => Node { op: Op::Passthrough, inputs: vec![n.inputs[0]], ..n.clone() },
                _ => n.clone(),
            })
            .collect();
        NetworkGraph::finish(nodes, self.taps.clone())
    }

    /// Main-branch and projection parameters of each block, in order.
    pub fn blocks(&self) -> Vec<(BasicBlockParams, Option<Projection>)> {
        let find = |name: &str| self.nodes.iter().find(|n| n.name == name).map(|n| &n.op);
        let conv = |name: &str| match find(name) {
            Some(Op::Conv(p)) => Some(p.clone()),
            _ => None,
        };
        let bn = |name: &str| match find(name) {
            Some(Op::BatchNorm(p)) => Some(p.clone()),
            _ => None,
        };
        let mut out = Vec::with_capacity(8);
        for stage in 1..=4 {
            for block in 0..2 {
                let p = format!("layer{stage}.{block}");
                let params = BasicBlockParams {
                    conv1: conv(&format!("{p}.conv1")).expect("built"),
                    bn1: bn(&format!("{p}.bn1")).expect("built"),
                    conv2: conv(&format!("{p}.conv2")).expect("built"),
                    bn2: bn(&format!("{p}.bn2")).expect("built"),
                };
                let projection = conv(&format!("{p}.downsample.conv"))
                    .map(|c| Projection { conv: c, bn: bn(&format!("{p}.downsample.bn")).expect("built") });
                out.push((params, projection));
            }
        }
        out
    }
}
