//! A small interpreter for chain-shaped feedforward ONNX models.
//!
//! Only the operators that fully connected networks are exported with are
//! understood (`MatMul`, `Gemm`, elementwise `Add`/`Sub`/`Mul`/`Div` against a
//! constant, `Relu`, `Sigmoid`, `Tanh`, `Flatten`). `Constant` nodes are
//! folded into the operands of the layers consuming them. The graph must be a
//! single chain from the one data input to the one output.
//!
//! All arithmetic is carried out in binary64; float32 initializers are
//! widened when the model is loaded.

mod export;
pub mod proto;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use prost::Message;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use export::to_onnx_bytes;
use proto::{attribute_type, data_type, dimension, GraphProto, NodeProto, TensorProto};

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Option<Self> {
        (shape.iter().product::<usize>() == data.len()).then_some(Tensor { shape, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// Row-major matrix from nested rows. Panics on ragged input.
    pub fn matrix(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        Tensor {
            shape: vec![rows.len(), cols],
            data: rows.concat(),
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn non_unit_dims(&self) -> usize {
        self.shape.iter().filter(|&&d| d != 1).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Gemm,
    Relu,
    Sigmoid,
    Tanh,
    Flatten,
}

impl OpKind {
    pub fn from_onnx(op_type: &str) -> Option<Self> {
        Some(match op_type {
            "MatMul" => OpKind::MatMul,
            "Add" => OpKind::Add,
            "Sub" => OpKind::Sub,
            "Mul" => OpKind::Mul,
            "Div" => OpKind::Div,
            "Gemm" => OpKind::Gemm,
            "Relu" => OpKind::Relu,
            "Sigmoid" => OpKind::Sigmoid,
            "Tanh" => OpKind::Tanh,
            "Flatten" => OpKind::Flatten,
            _ => return None,
        })
    }

    pub fn onnx_name(self) -> &'static str {
        match self {
            OpKind::MatMul => "MatMul",
            OpKind::Add => "Add",
            OpKind::Sub => "Sub",
            OpKind::Mul => "Mul",
            OpKind::Div => "Div",
            OpKind::Gemm => "Gemm",
            OpKind::Relu => "Relu",
            OpKind::Sigmoid => "Sigmoid",
            OpKind::Tanh => "Tanh",
            OpKind::Flatten => "Flatten",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Which operand of a two-input node the constant occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstSide {
    /// `op(constant, x)`
    Left,
    /// `op(x, constant)`
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerOp {
    /// `x · W` for `side == Right` (W is K×N), `W · x` for `Left` (W is M×K).
    MatMul {
        weight: Tensor,
        side: ConstSide,
    },
    Binary {
        op: BinaryOp,
        constant: Tensor,
        side: ConstSide,
    },
    /// `alpha · op(x) · op(B) + beta · C` with the data as operand A.
    Gemm {
        b: Tensor,
        c: Option<Tensor>,
        alpha: f64,
        beta: f64,
        trans_b: bool,
    },
    Relu,
    Sigmoid,
    Tanh,
    Flatten,
}

impl LayerOp {
    pub fn kind(&self) -> OpKind {
        match self {
            LayerOp::MatMul { .. } => OpKind::MatMul,
            LayerOp::Binary { op, .. } => match op {
                BinaryOp::Add => OpKind::Add,
                BinaryOp::Sub => OpKind::Sub,
                BinaryOp::Mul => OpKind::Mul,
                BinaryOp::Div => OpKind::Div,
            },
            LayerOp::Gemm { .. } => OpKind::Gemm,
            LayerOp::Relu => OpKind::Relu,
            LayerOp::Sigmoid => OpKind::Sigmoid,
            LayerOp::Tanh => OpKind::Tanh,
            LayerOp::Flatten => OpKind::Flatten,
        }
    }

    pub fn dense(weight: Vec<Vec<f64>>) -> Self {
        LayerOp::MatMul {
            weight: Tensor::matrix(&weight),
            side: ConstSide::Right,
        }
    }

    pub fn bias(values: Vec<f64>) -> Self {
        LayerOp::Binary {
            op: BinaryOp::Add,
            constant: Tensor::vector(values),
            side: ConstSide::Right,
        }
    }

    /// Width of the layer output given the width of its input.
    fn output_width(&self, width: usize) -> Result<usize, LoadError> {
        match self {
            LayerOp::MatMul { weight, side } => {
                let [rows, cols] = weight.shape[..] else {
                    return Err(malformed(format!(
                        "MatMul weight must be 2-D, got shape {:?}",
                        weight.shape
                    )));
                };
                let (inner, outer) = match side {
                    ConstSide::Right => (rows, cols),
                    ConstSide::Left => (cols, rows),
                };
                if inner != width {
                    return Err(malformed(format!(
                        "MatMul weight {:?} does not accept a vector of width {width}",
                        weight.shape
                    )));
                }
                Ok(outer)
            }
            LayerOp::Binary { op, constant, side } => {
                if *op == BinaryOp::Div && *side == ConstSide::Right && constant.data.contains(&0.0) {
                    return Err(malformed("division by a constant containing zero"));
                }
                broadcast_width(width, constant)
            }
            LayerOp::Gemm { b, c, trans_b, .. } => {
                let [rows, cols] = b.shape[..] else {
                    return Err(malformed(format!("Gemm B must be 2-D, got shape {:?}", b.shape)));
                };
                let (inner, outer) = if *trans_b { (cols, rows) } else { (rows, cols) };
                if inner != width {
                    return Err(malformed(format!(
                        "Gemm B {:?} does not accept a vector of width {width}",
                        b.shape
                    )));
                }
                if let Some(c) = c {
                    if broadcast_width(outer, c)? != outer {
                        return Err(malformed("Gemm C does not broadcast to the output"));
                    }
                }
                Ok(outer)
            }
            LayerOp::Relu | LayerOp::Sigmoid | LayerOp::Tanh | LayerOp::Flatten => Ok(width),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LayerOp::MatMul { weight, side } => {
                let (rows, cols) = (weight.shape[0], weight.shape[1]);
                let w = &weight.data;
                match side {
                    ConstSide::Right => {
                        let mut y = vec![0.0; cols];
                        for (k, &xk) in x.iter().enumerate() {
                            let row = &w[k * cols..(k + 1) * cols];
                            for (yn, &wkn) in y.iter_mut().zip(row) {
                                *yn += xk * wkn;
                            }
                        }
                        y
                    }
                    ConstSide::Left => (0..rows)
                        .map(|m| w[m * cols..(m + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum())
                        .collect(),
                }
            }
            LayerOp::Binary { op, constant, side } => {
                let c = &constant.data;
                let width = x.len().max(c.len());
                (0..width)
                    .map(|i| {
                        let xv = x[if x.len() == 1 { 0 } else { i }];
                        let cv = c[if c.len() == 1 { 0 } else { i }];
                        let (a, b) = match side {
                            ConstSide::Right => (xv, cv),
                            ConstSide::Left => (cv, xv),
                        };
                        match op {
                            BinaryOp::Add => a + b,
                            BinaryOp::Sub => a - b,
                            BinaryOp::Mul => a * b,
                            BinaryOp::Div => a / b,
                        }
                    })
                    .collect()
            }
            LayerOp::Gemm {
                b,
                c,
                alpha,
                beta,
                trans_b,
            } => {
                let (rows, cols) = (b.shape[0], b.shape[1]);
                let outer = if *trans_b { rows } else { cols };
                (0..outer)
                    .map(|n| {
                        let dot: f64 = x
                            .iter()
                            .enumerate()
                            .map(|(k, &xk)| {
                                let bkn = if *trans_b {
                                    b.data[n * cols + k]
                                } else {
                                    b.data[k * cols + n]
                                };
                                xk * bkn
                            })
                            .sum();
                        let bias = c
                            .as_ref()
                            .map_or(0.0, |c| c.data[if c.data.len() == 1 { 0 } else { n }]);
                        alpha * dot + beta * bias
                    })
                    .collect()
            }
            LayerOp::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            LayerOp::Sigmoid => x.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect(),
            LayerOp::Tanh => x.iter().map(|&v| v.tanh()).collect(),
            LayerOp::Flatten => x.to_vec(),
        }
    }
}

fn broadcast_width(width: usize, constant: &Tensor) -> Result<usize, LoadError> {
    let n = constant.len();
    if n == 1 {
        Ok(width)
    } else if constant.non_unit_dims() > 1 {
        Err(malformed(format!(
            "constant of shape {:?} is not a vector",
            constant.shape
        )))
    } else if n == width || width == 1 {
        Ok(n)
    } else {
        Err(malformed(format!(
            "constant of shape {:?} does not broadcast against width {width}",
            constant.shape
        )))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LoadError {
    #[error("unsupported operator `{0}`")]
    UnsupportedOperator(String),
    #[error("graph is not a single chain: {0}")]
    NonChainGraph(String),
    #[error("malformed model: {0}")]
    MalformedModel(String),
}

fn malformed(message: impl Into<String>) -> LoadError {
    LoadError::MalformedModel(message.into())
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InferError {
    #[error("expected an input vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("network produced a non-finite output at index {index}")]
    NonFiniteOutput { index: usize },
}

/// A loaded feedforward network. Immutable after construction; `infer` may be
/// called from many threads at once.
pub struct Network {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerOp>,
    source_digest: [u8; 32],
    inferences: AtomicU64,
}

impl fmt::Debug for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Network")
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .field("layers", &self.layers.iter().map(LayerOp::kind).collect::<Vec<_>>())
            .finish()
    }
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Network {
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            layers: self.layers.clone(),
            source_digest: self.source_digest,
            inferences: AtomicU64::new(0),
        }
    }
}

fn chain_width(input_dim: usize, layers: &[LayerOp]) -> Result<usize, LoadError> {
    layers
        .iter()
        .try_fold(input_dim, |width, layer| layer.output_width(width))
}

impl Network {
    /// Builds a network directly from layers. The digest is that of the
    /// model's ONNX encoding, so it matches what `load_network` reports for
    /// the bytes produced by [`to_onnx_bytes`].
    pub fn from_layers(input_dim: usize, layers: Vec<LayerOp>) -> Result<Self, LoadError> {
        if input_dim == 0 {
            return Err(malformed("input dimension must be positive"));
        }
        let output_dim = chain_width(input_dim, &layers)?;
        if output_dim == 0 {
            return Err(malformed("output dimension must be positive"));
        }
        let mut net = Network {
            input_dim,
            output_dim,
            layers,
            source_digest: [0; 32],
            inferences: AtomicU64::new(0),
        };
        net.source_digest = Sha256::digest(to_onnx_bytes(&net)).into();
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[LayerOp] {
        &self.layers
    }

    /// SHA-256 of the model bytes.
    pub fn source_digest(&self) -> &[u8; 32] {
        &self.source_digest
    }

    /// Number of `infer` calls made on this instance so far.
    pub fn inference_count(&self) -> u64 {
        self.inferences.load(Ordering::Relaxed)
    }

    /// Forward pass.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>, InferError> {
        self.inferences.fetch_add(1, Ordering::Relaxed);
        if x.len() != self.input_dim {
            return Err(InferError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(InferError::NonFiniteInput);
        }
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = layer.apply(&v);
        }
        match v.iter().position(|y| !y.is_finite()) {
            Some(index) => Err(InferError::NonFiniteOutput { index }),
            None => Ok(v),
        }
    }
}

pub fn input_size(net: &Network) -> usize {
    net.input_dim()
}

fn tensor_from_proto(t: &TensorProto) -> Result<Tensor, LoadError> {
    if t.data_location != 0 {
        return Err(malformed(format!("tensor `{}` uses external data", t.name)));
    }
    let shape = t
        .dims
        .iter()
        .map(|&d| usize::try_from(d).map_err(|_| malformed(format!("negative dim in `{}`", t.name))))
        .collect::<Result<Vec<_>, _>>()?;
    let data: Vec<f64> = match t.data_type {
        data_type::FLOAT if !t.raw_data.is_empty() => t
            .raw_data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect(),
        data_type::FLOAT => t.float_data.iter().map(|&v| v as f64).collect(),
        data_type::DOUBLE if !t.raw_data.is_empty() => t
            .raw_data
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
        data_type::DOUBLE => t.double_data.clone(),
        data_type::INT64 if !t.raw_data.is_empty() => t
            .raw_data
            .chunks_exact(8)
            .map(|b| i64::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect(),
        data_type::INT64 => t.int64_data.iter().map(|&v| v as f64).collect(),
        other => {
            return Err(malformed(format!(
                "tensor `{}` has unsupported element type {other}",
                t.name
            )))
        }
    };
    Tensor::new(shape, data).ok_or_else(|| {
        malformed(format!(
            "tensor `{}` data length does not match dims {:?}",
            t.name, t.dims
        ))
    })
}

fn constant_node_value(node: &NodeProto) -> Result<Tensor, LoadError> {
    for attr in &node.attribute {
        match (attr.name.as_str(), attr.t.as_ref()) {
            ("value", Some(t)) => return tensor_from_proto(t),
            ("value_float", _) => return Ok(Tensor::scalar(attr.f as f64)),
            ("value_floats", _) => return Ok(Tensor::vector(attr.floats.iter().map(|&v| v as f64).collect())),
            _ => {}
        }
    }
    Err(malformed(format!(
        "Constant node `{}` has no supported value attribute",
        node.name
    )))
}

fn float_attr(node: &NodeProto, name: &str, default: f64) -> f64 {
    node.attribute
        .iter()
        .find(|a| a.name == name && (a.r#type == attribute_type::FLOAT || a.r#type == 0))
        .map_or(default, |a| a.f as f64)
}

fn int_attr(node: &NodeProto, name: &str, default: i64) -> i64 {
    node.attribute
        .iter()
        .find(|a| a.name == name && (a.r#type == attribute_type::INT || a.r#type == 0))
        .map_or(default, |a| a.i)
}

/// Shape of a graph input/output with a leading batch dimension of 1 (or a
/// symbolic one) removed. `None` dims are symbolic.
fn value_shape(info: &proto::ValueInfoProto) -> Option<Vec<Option<i64>>> {
    let shape = info.r#type.as_ref()?.tensor_type.as_ref()?.shape.as_ref()?;
    Some(
        shape
            .dim
            .iter()
            .map(|d| match d.value {
                Some(dimension::Value::DimValue(v)) if v > 0 => Some(v),
                _ => None,
            })
            .collect(),
    )
}

fn feature_dims(info: &proto::ValueInfoProto) -> Result<Option<Vec<usize>>, LoadError> {
    let Some(dims) = value_shape(info) else {
        return Ok(None);
    };
    let features = if dims.len() >= 2 {
        match dims[0] {
            Some(1) | None => &dims[1..],
            Some(batch) => {
                return Err(malformed(format!(
                    "`{}` has batch dimension {batch}; only 1 is supported",
                    info.name
                )))
            }
        }
    } else {
        &dims[..]
    };
    features
        .iter()
        .map(|d| d.map(|v| v as usize))
        .collect::<Option<Vec<_>>>()
        .map(Some)
        .ok_or_else(|| malformed(format!("`{}` has a symbolic feature dimension", info.name)))
}

fn layer_from_node(
    node: &NodeProto,
    kind: OpKind,
    data: &str,
    constants: &HashMap<String, Tensor>,
) -> Result<LayerOp, LoadError> {
    let lookup = |name: &str| {
        constants
            .get(name)
            .cloned()
            .ok_or_else(|| malformed(format!("`{}` reads unknown tensor `{name}`", node.name)))
    };
    let side_and_constant = || -> Result<(ConstSide, Tensor), LoadError> {
        match &node.input[..] {
            [a, b] if a == data => Ok((ConstSide::Right, lookup(b)?)),
            [a, b] if b == data => Ok((ConstSide::Left, lookup(a)?)),
            _ => Err(malformed(format!(
                "{} node `{}` must have two inputs",
                kind.onnx_name(),
                node.name
            ))),
        }
    };
    Ok(match kind {
        OpKind::MatMul => {
            let (side, weight) = side_and_constant()?;
            LayerOp::MatMul { weight, side }
        }
        OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div => {
            let (side, constant) = side_and_constant()?;
            let op = match kind {
                OpKind::Add => BinaryOp::Add,
                OpKind::Sub => BinaryOp::Sub,
                OpKind::Mul => BinaryOp::Mul,
                _ => BinaryOp::Div,
            };
            LayerOp::Binary { op, constant, side }
        }
        OpKind::Gemm => {
            if node.input.first().map(String::as_str) != Some(data) {
                return Err(malformed(format!(
                    "Gemm node `{}` must take the data as its first operand",
                    node.name
                )));
            }
            let b = lookup(node.input.get(1).ok_or_else(|| malformed("Gemm without B"))?)?;
            let c = match node.input.get(2) {
                Some(name) if !name.is_empty() => Some(lookup(name)?),
                _ => None,
            };
            LayerOp::Gemm {
                b,
                c,
                alpha: float_attr(node, "alpha", 1.0),
                beta: float_attr(node, "beta", 1.0),
                trans_b: int_attr(node, "transB", 0) != 0,
            }
        }
        OpKind::Relu => LayerOp::Relu,
        OpKind::Sigmoid => LayerOp::Sigmoid,
        OpKind::Tanh => LayerOp::Tanh,
        OpKind::Flatten => LayerOp::Flatten,
    })
}

fn chain_from_graph(graph: &GraphProto) -> Result<(usize, Vec<LayerOp>, Option<usize>), LoadError> {
    for node in &graph.node {
        if !(node.domain.is_empty() || node.domain == "ai.onnx") {
            return Err(LoadError::UnsupportedOperator(format!(
                "{}::{}",
                node.domain, node.op_type
            )));
        }
        if node.op_type != "Constant" && OpKind::from_onnx(&node.op_type).is_none() {
            return Err(LoadError::UnsupportedOperator(node.op_type.clone()));
        }
    }

    let mut constants: HashMap<String, Tensor> = HashMap::new();
    for init in &graph.initializer {
        constants.insert(init.name.clone(), tensor_from_proto(init)?);
    }
    for node in graph.node.iter().filter(|n| n.op_type == "Constant") {
        let [out] = &node.output[..] else {
            return Err(malformed("Constant node must have one output"));
        };
        constants.insert(out.clone(), constant_node_value(node)?);
    }

    let data_inputs: Vec<_> = graph
        .input
        .iter()
        .filter(|i| !constants.contains_key(&i.name))
        .collect();
    let input = match data_inputs[..] {
        [one] => one,
        [] => return Err(malformed("graph has no data input")),
        _ => return Err(LoadError::NonChainGraph(format!("{} data inputs", data_inputs.len()))),
    };
    let in_dims =
        feature_dims(input)?.ok_or_else(|| malformed(format!("input `{}` has no static shape", input.name)))?;
    let input_dim: usize = in_dims.iter().product();
    if input_dim == 0 {
        return Err(malformed("input has zero elements"));
    }
    let mut flat = in_dims.iter().filter(|&&d| d != 1).count() <= 1;

    let compute: Vec<&NodeProto> = graph.node.iter().filter(|n| n.op_type != "Constant").collect();
    let mut consumers: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, node) in compute.iter().enumerate() {
        for name in &node.input {
            if !constants.contains_key(name) && !name.is_empty() {
                consumers.entry(name.as_str()).or_default().push(i);
            }
        }
    }

    let mut layers = Vec::new();
    let mut visited = vec![false; compute.len()];
    let mut current = input.name.clone();
    loop {
        let next = consumers.get(current.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let index = match next {
            [] => break,
            [one] => *one,
            _ => {
                return Err(LoadError::NonChainGraph(format!(
                    "tensor `{current}` feeds {} nodes",
                    next.len()
                )))
            }
        };
        if visited[index] {
            return Err(LoadError::NonChainGraph("cycle".into()));
        }
        visited[index] = true;
        let node = compute[index];
        let [output] = &node.output[..] else {
            return Err(LoadError::NonChainGraph(format!(
                "node `{}` has {} outputs",
                node.name,
                node.output.len()
            )));
        };
        let kind = OpKind::from_onnx(&node.op_type).expect("checked above");
        let layer = layer_from_node(node, kind, &current, &constants)?;
        match kind {
            OpKind::Flatten => flat = true,
            OpKind::MatMul | OpKind::Gemm if !flat => {
                return Err(malformed(format!(
                    "`{}` multiplies a multi-dimensional tensor; flatten it first",
                    node.name
                )))
            }
            _ => {}
        }
        layers.push(layer);
        current = output.clone();
    }

    if let Some(i) = visited.iter().position(|v| !v) {
        return Err(LoadError::NonChainGraph(format!(
            "node `{}` is not on the path from the input",
            compute[i].name
        )));
    }
    let output = match &graph.output[..] {
        [one] => one,
        other => return Err(LoadError::NonChainGraph(format!("{} graph outputs", other.len()))),
    };
    if output.name != current {
        return Err(LoadError::NonChainGraph(format!(
            "graph output `{}` is not the end of the chain `{current}`",
            output.name
        )));
    }
    let declared_out = feature_dims(output)?.map(|dims| dims.iter().product::<usize>());
    Ok((input_dim, layers, declared_out))
}

/// Decodes an ONNX model into a [`Network`].
pub fn load_network(bytes: &[u8]) -> Result<Network, LoadError> {
    let model = proto::ModelProto::decode(bytes).map_err(|e| malformed(format!("protobuf decode failed: {e}")))?;
    let graph = model.graph.as_ref().ok_or_else(|| malformed("model has no graph"))?;
    let (input_dim, layers, declared_out) = chain_from_graph(graph)?;
    let output_dim = chain_width(input_dim, &layers)?;
    if let Some(declared) = declared_out {
        if declared != output_dim {
            return Err(malformed(format!(
                "declared output size {declared} but the chain produces {output_dim}"
            )));
        }
    }
    if output_dim == 0 {
        return Err(malformed("output has zero elements"));
    }
    Ok(Network {
        input_dim,
        output_dim,
        layers,
        source_digest: Sha256::digest(bytes).into(),
        inferences: AtomicU64::new(0),
    })
}
