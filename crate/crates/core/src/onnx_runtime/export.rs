use prost::Message;

use super::proto::{
    attribute_type, data_type, dimension, AttributeProto, Dimension, GraphProto, ModelProto, NodeProto,
    OperatorSetIdProto, TensorProto, TensorShapeProto, TensorTypeProto, TypeProto, ValueInfoProto,
};
use super::{ConstSide, LayerOp, Network, Tensor};

const OPSET: i64 = 13;

fn value_info(name: &str, width: usize) -> ValueInfoProto {
    let dim = |v: i64| Dimension {
        value: Some(dimension::Value::DimValue(v)),
    };
    ValueInfoProto {
        name: name.to_string(),
        r#type: Some(TypeProto {
            tensor_type: Some(TensorTypeProto {
                elem_type: data_type::DOUBLE,
                shape: Some(TensorShapeProto {
                    dim: vec![dim(1), dim(width as i64)],
                }),
            }),
        }),
    }
}

fn initializer(name: String, tensor: &Tensor) -> TensorProto {
    TensorProto {
        dims: tensor.shape.iter().map(|&d| d as i64).collect(),
        data_type: data_type::DOUBLE,
        name,
        double_data: tensor.data.clone(),
        ..Default::default()
    }
}

fn float_attr(name: &str, value: f64) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        f: value as f32,
        r#type: attribute_type::FLOAT,
        ..Default::default()
    }
}

fn int_attr(name: &str, value: i64) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        i: value,
        r#type: attribute_type::INT,
        ..Default::default()
    }
}

/// Serializes a network as an ONNX model with float64 initializers.
///
/// Gemm's `alpha`/`beta` are float attributes in ONNX and are stored as
/// float32.
pub fn to_onnx_bytes(net: &Network) -> Vec<u8> {
    let mut nodes = Vec::new();
    let mut initializers = Vec::new();
    let mut current = "input".to_string();

    for (i, layer) in net.layers.iter().enumerate() {
        let output = if i + 1 == net.layers.len() {
            "output".to_string()
        } else {
            format!("h{i}")
        };
        let mut constant = |suffix: &str, t: &Tensor| {
            let name = format!("l{i}_{suffix}");
            initializers.push(initializer(name.clone(), t));
            name
        };
        let paired = |c: String, side: ConstSide, data: &str| match side {
            ConstSide::Right => vec![data.to_string(), c],
            ConstSide::Left => vec![c, data.to_string()],
        };
        let (inputs, attribute) = match layer {
            LayerOp::MatMul { weight, side } => (paired(constant("w", weight), *side, &current), vec![]),
            LayerOp::Binary { constant: c, side, .. } => (paired(constant("c", c), *side, &current), vec![]),
            LayerOp::Gemm {
                b,
                c,
                alpha,
                beta,
                trans_b,
            } => {
                let mut inputs = vec![current.clone(), constant("b", b)];
                if let Some(c) = c {
                    inputs.push(constant("c", c));
                }
                let attrs = vec![
                    float_attr("alpha", *alpha),
                    float_attr("beta", *beta),
                    int_attr("transB", *trans_b as i64),
                ];
                (inputs, attrs)
            }
            LayerOp::Flatten => (vec![current.clone()], vec![int_attr("axis", 1)]),
            LayerOp::Relu | LayerOp::Sigmoid | LayerOp::Tanh => (vec![current.clone()], vec![]),
        };
        nodes.push(NodeProto {
            input: inputs,
            output: vec![output.clone()],
            name: format!("node{i}"),
            op_type: layer.kind().onnx_name().to_string(),
            attribute,
            domain: String::new(),
        });
        current = output;
    }

    // An empty chain is the identity; ONNX needs at least a pass-through.
    if nodes.is_empty() {
        nodes.push(NodeProto {
            input: vec![current],
            output: vec!["output".into()],
            name: "node0".into(),
            op_type: "Flatten".into(),
            attribute: vec![int_attr("axis", 1)],
            domain: String::new(),
        });
    }

    let model = ModelProto {
        ir_version: 7,
        producer_name: "boxverify".into(),
        graph: Some(GraphProto {
            node: nodes,
            name: "chain".into(),
            initializer: initializers,
            input: vec![value_info("input", net.input_dim)],
            output: vec![value_info("output", net.output_dim)],
        }),
        opset_import: vec![OperatorSetIdProto {
            domain: String::new(),
            version: OPSET,
        }],
    };
    model.encode_to_vec()
}
