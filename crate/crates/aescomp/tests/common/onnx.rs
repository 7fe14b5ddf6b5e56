//! Hand-built ONNX graphs: flatten, dense projection, then an elementwise op.

#![allow(dead_code)]

use std::path::Path;

use prost::Message;
use tract_onnx::pb::{
    attribute_proto::AttributeType, tensor_proto::DataType, tensor_shape_proto, type_proto, AttributeProto, GraphProto,
    ModelProto, NodeProto, OperatorSetIdProto, TensorProto, TensorShapeProto, TypeProto, ValueInfoProto,
};

pub const OPSET: i64 = 13;

fn tensor_info(name: &str, dims: &[i64]) -> ValueInfoProto {
    let dim = dims
        .iter()
        .map(|&d| tensor_shape_proto::Dimension {
            value: Some(tensor_shape_proto::dimension::Value::DimValue(d)),
            ..Default::default()
        })
        .collect();
    ValueInfoProto {
        name: name.into(),
        r#type: Some(TypeProto {
            value: Some(type_proto::Value::TensorType(type_proto::Tensor {
                elem_type: DataType::Float as i32,
                shape: Some(TensorShapeProto { dim }),
            })),
            ..Default::default()
        }),
        ..Default::default()
    }
}

fn node(op: &str, inputs: &[&str], output: &str, attribute: Vec<AttributeProto>) -> NodeProto {
    NodeProto {
        op_type: op.into(),
        name: format!("{op}_{output}"),
        input: inputs.iter().map(|s| s.to_string()).collect(),
        output: vec![output.into()],
        attribute,
        ..Default::default()
    }
}

/// Deterministic weights in [-1, 1), row-major `[3 * side^2, dim]`.
pub fn weights(side: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut s = seed | 1;
    (0..3 * side * side * dim)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            ((s >> 40) as f32 / (1u64 << 24) as f32) * 2.0 - 1.0
        })
        .collect()
}

/// `y = act(flatten(x) . W)` with `x: [1, 3, side, side]`, `y: [1, dim]`.
/// `act` is an ONNX unary op such as `Relu` or `Sqrt`.
pub fn dense_model(side: usize, dim: usize, w: &[f32], act: &str) -> ModelProto {
    let n = 3 * side * side;
    assert_eq!(w.len(), n * dim);
    let axis = AttributeProto { name: "axis".into(), r#type: AttributeType::Int as i32, i: 1, ..Default::default() };
    let graph = GraphProto {
        name: "dense".into(),
        node: vec![
            node("Flatten", &["x"], "flat", vec![axis]),
            node("MatMul", &["flat", "w"], "proj", vec![]),
            node(act, &["proj"], "y", vec![]),
        ],
        initializer: vec![TensorProto {
            name: "w".into(),
            dims: vec![n as i64, dim as i64],
            data_type: DataType::Float as i32,
            float_data: w.to_vec(),
            ..Default::default()
        }],
        input: vec![tensor_info("x", &[1, 3, side as i64, side as i64])],
        output: vec![tensor_info("y", &[1, dim as i64])],
        ..Default::default()
    };
    ModelProto {
        ir_version: 7,
        opset_import: vec![OperatorSetIdProto { domain: String::new(), version: OPSET }],
        producer_name: "aescomp-tests".into(),
        graph: Some(graph),
        ..Default::default()
    }
}

pub fn write_model(m: &ModelProto, path: &Path) {
    std::fs::write(path, m.encode_to_vec()).unwrap();
}
