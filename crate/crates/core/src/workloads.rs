//! Network descriptions: layer shapes, bitwidths and the bundled benchmarks.
//!
//! Files are TOML with `schema = 1`. Each `[[layers]]` table carries a `kind`
//! (`conv`, `fc` or `recurrent`), the kind's dimensions and `bw_x`/`bw_w`.
//! Conv `padding` defaults to `kernel / 2`; `stride` and `pool` default to 1.
//! `input_from` names an earlier layer when the input is not the previous
//! layer's output.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitslice::MAX_BITWIDTH;

pub const SCHEMA_VERSION: u32 = 1;

const BUNDLED: [(&str, &str); 6] = [
    ("alexnet", include_str!("../data/networks/alexnet.toml")),
    ("cifar10", include_str!("../data/networks/cifar10.toml")),
    ("resnet18", include_str!("../data/networks/resnet18.toml")),
    ("vgg16", include_str!("../data/networks/vgg16.toml")),
    ("rnn", include_str!("../data/networks/rnn.toml")),
    ("lstm", include_str!("../data/networks/lstm.toml")),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("network has no layers")]
    Empty,
    #[error("batch must be positive")]
    Batch,
    #[error("layer {index} ({name}): {field} = {value} exceeds {MAX_BITWIDTH} bits or is zero")]
    Bitwidth {
        index: usize,
        name: String,
        field: &'static str,
        value: u8,
    },
    #[error("layer {index} ({name}): {reason}")]
    Dimension {
        index: usize,
        name: String,
        reason: String,
    },
    #[error("layer {index} ({name}): input {found:?} does not match producer output {expected:?}")]
    Chain {
        index: usize,
        name: String,
        expected: Shape,
        found: Shape,
    },
    #[error("layer {index} ({name}): input_from '{source_name}' is not an earlier layer")]
    UnknownInput {
        index: usize,
        name: String,
        source_name: String,
    },
    #[error("duplicate layer name '{0}'")]
    DuplicateName(String),
    #[error("homogeneous network has non-8-bit layer {index} ({name})")]
    NotHomogeneous { index: usize, name: String },
    #[error("unknown bundled network '{0}'")]
    UnknownBenchmark(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitwidthMode {
    #[serde(rename = "homogeneous-8bit")]
    Homogeneous8Bit,
    Heterogeneous,
}

/// Per-sample activation shape (channels, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub c: u64,
    pub h: u64,
    pub w: u64,
}

impl Shape {
    pub fn flat(n: u64) -> Self {
        Self { c: n, h: 1, w: 1 }
    }

    pub fn elements(&self) -> u64 {
        self.c * self.h * self.w
    }
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

fn is_false(v: &bool) -> bool {
    !*v
}

fn is_true(v: &bool) -> bool {
    *v
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerKind {
    Conv {
        in_channels: u32,
        out_channels: u32,
        in_h: u32,
        in_w: u32,
        kernel_h: u32,
        kernel_w: u32,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        stride: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        padding: Option<u32>,
        /// Spatial downsampling applied to the output (pooling window = stride).
        #[serde(default = "one", skip_serializing_if = "is_one")]
        pool: u32,
    },
    Fc {
        in_features: u32,
        out_features: u32,
    },
    Recurrent {
        input: u32,
        hidden: u32,
        /// 1 for a vanilla RNN cell, 4 for LSTM.
        gates: u32,
        timesteps: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
    pub bw_x: u8,
    pub bw_w: u8,
    #[serde(default, skip_serializing_if = "is_false")]
    pub x_signed: bool,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub w_signed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_from: Option<String>,
    /// Copied from the network on parse.
    #[serde(skip, default = "one")]
    pub batch: u32,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind, bw_x: u8, bw_w: u8) -> Self {
        Self {
            name: name.into(),
            kind,
            bw_x,
            bw_w,
            x_signed: false,
            w_signed: true,
            input_from: None,
            batch: 1,
        }
    }

    pub fn fc(name: impl Into<String>, in_features: u32, out_features: u32, bw_x: u8, bw_w: u8) -> Self {
        Self::new(
            name,
            LayerKind::Fc {
                in_features,
                out_features,
            },
            bw_x,
            bw_w,
        )
    }

    pub fn with_batch(mut self, batch: u32) -> Self {
        self.batch = batch;
        self
    }

    /// Convolution output size before pooling.
    pub fn conv_output(&self) -> Option<(u64, u64)> {
        match self.kind {
            LayerKind::Conv {
                in_h,
                in_w,
                kernel_h,
                kernel_w,
                stride,
                padding,
                ..
            } => {
                let out = |n: u32, k: u32| {
                    let p = padding.unwrap_or(k / 2);
                    let span = (n + 2 * p).checked_sub(k)?;
                    Some((span / stride + 1) as u64)
                };
                Some((out(in_h, kernel_h)?, out(in_w, kernel_w)?))
            }
            _ => None,
        }
    }

    pub fn input_shape(&self) -> Shape {
        match self.kind {
            LayerKind::Conv {
                in_channels, in_h, in_w, ..
            } => Shape {
                c: in_channels as u64,
                h: in_h as u64,
                w: in_w as u64,
            },
            LayerKind::Fc { in_features, .. } => Shape::flat(in_features as u64),
            LayerKind::Recurrent { input, .. } => Shape::flat(input as u64),
        }
    }

    pub fn output_shape(&self) -> Shape {
        match self.kind {
            LayerKind::Conv {
                out_channels, pool, ..
            } => {
                let (h, w) = self.conv_output().unwrap_or((0, 0));
                Shape {
                    c: out_channels as u64,
                    h: h / pool as u64,
                    w: w / pool as u64,
                }
            }
            LayerKind::Fc { out_features, .. } => Shape::flat(out_features as u64),
            LayerKind::Recurrent { hidden, .. } => Shape::flat(hidden as u64),
        }
    }

    pub fn weight_count(&self) -> u64 {
        match self.kind {
            LayerKind::Conv {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
                ..
            } => in_channels as u64 * out_channels as u64 * kernel_h as u64 * kernel_w as u64,
            LayerKind::Fc {
                in_features,
                out_features,
            } => in_features as u64 * out_features as u64,
            LayerKind::Recurrent {
                input, hidden, gates, ..
            } => gates as u64 * hidden as u64 * (hidden as u64 + input as u64),
        }
    }

    /// Input activation elements read by the layer over the whole batch.
    pub fn input_count(&self) -> u64 {
        let steps = match self.kind {
            LayerKind::Recurrent { timesteps, .. } => timesteps as u64,
            _ => 1,
        };
        self.input_shape().elements() * self.batch as u64 * steps
    }

    /// Output activation elements produced over the whole batch.
    pub fn output_count(&self) -> u64 {
        let steps = match self.kind {
            LayerKind::Recurrent { timesteps, .. } => timesteps as u64,
            _ => 1,
        };
        self.output_shape().elements() * self.batch as u64 * steps
    }

    pub fn macs(&self) -> u64 {
        let b = self.batch as u64;
        match self.kind {
            LayerKind::Conv { .. } => {
                let (h, w) = self.conv_output().unwrap_or((0, 0));
                self.weight_count() * h * w * b
            }
            LayerKind::Fc { .. } => self.weight_count() * b,
            LayerKind::Recurrent { timesteps, .. } => self.weight_count() * b * timesteps as u64,
        }
    }

    pub fn weight_bits(&self) -> u64 {
        self.weight_count() * self.bw_w as u64
    }

    fn validate(&self, index: usize) -> Result<(), WorkloadError> {
        let dim = |reason: String| WorkloadError::Dimension {
            index,
            name: self.name.clone(),
            reason,
        };
        for (field, value) in [("bw_x", self.bw_x), ("bw_w", self.bw_w)] {
            if value == 0 || value > MAX_BITWIDTH {
                return Err(WorkloadError::Bitwidth {
                    index,
                    name: self.name.clone(),
                    field,
                    value,
                });
            }
        }
        let dims: Vec<(&str, u32)> = match self.kind {
            LayerKind::Conv {
                in_channels,
                out_channels,
                in_h,
                in_w,
                kernel_h,
                kernel_w,
                stride,
                pool,
                ..
            } => vec![
                ("in_channels", in_channels),
                ("out_channels", out_channels),
                ("in_h", in_h),
                ("in_w", in_w),
                ("kernel_h", kernel_h),
                ("kernel_w", kernel_w),
                ("stride", stride),
                ("pool", pool),
            ],
            LayerKind::Fc {
                in_features,
                out_features,
            } => vec![("in_features", in_features), ("out_features", out_features)],
            LayerKind::Recurrent {
                input,
                hidden,
                gates,
                timesteps,
            } => vec![
                ("input", input),
                ("hidden", hidden),
                ("gates", gates),
                ("timesteps", timesteps),
            ],
        };
        if let Some((field, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(dim(format!("{field} must be positive")));
        }
        if matches!(self.kind, LayerKind::Conv { .. }) {
            let out = self.output_shape();
            if self.conv_output().is_none() || out.h == 0 || out.w == 0 {
                return Err(dim("kernel, padding and pool leave an empty output".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub schema: u32,
    pub name: String,
    pub bitwidth_mode: BitwidthMode,
    #[serde(default = "one")]
    pub batch: u32,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.schema != SCHEMA_VERSION {
            return Err(WorkloadError::Schema(self.schema));
        }
        if self.batch == 0 {
            return Err(WorkloadError::Batch);
        }
        if self.layers.is_empty() {
            return Err(WorkloadError::Empty);
        }
        let mut outputs: HashMap<&str, Shape> = HashMap::new();
        let mut prev: Option<Shape> = None;
        for (index, layer) in self.layers.iter().enumerate() {
            layer.validate(index)?;
            if self.bitwidth_mode == BitwidthMode::Homogeneous8Bit
                && (layer.bw_x != MAX_BITWIDTH || layer.bw_w != MAX_BITWIDTH)
            {
                return Err(WorkloadError::NotHomogeneous {
                    index,
                    name: layer.name.clone(),
                });
            }
            let producer = match &layer.input_from {
                Some(src) => Some(*outputs.get(src.as_str()).ok_or_else(|| WorkloadError::UnknownInput {
                    index,
                    name: layer.name.clone(),
                    source_name: src.clone(),
                })?),
                None => prev,
            };
            if let Some(expected) = producer {
                let found = layer.input_shape();
                let ok = match layer.kind {
                    LayerKind::Conv { .. } => found == expected,
                    _ => found.elements() == expected.elements(),
                };
                if !ok {
                    return Err(WorkloadError::Chain {
                        index,
                        name: layer.name.clone(),
                        expected,
                        found,
                    });
                }
            }
            let out = layer.output_shape();
            if outputs.insert(layer.name.as_str(), out).is_some() {
                return Err(WorkloadError::DuplicateName(layer.name.clone()));
            }
            prev = Some(out);
        }
        Ok(())
    }

    pub fn macs(&self) -> u64 {
        self.layers.iter().map(LayerSpec::macs).sum()
    }

    pub fn weight_count(&self) -> u64 {
        self.layers.iter().map(LayerSpec::weight_count).sum()
    }

    pub fn weight_bytes(&self) -> f64 {
        self.layers.iter().map(|l| l.weight_bits() as f64 / 8.0).sum()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("network spec serializes")
    }
}

/// Parses and validates a network file.
pub fn parse_network(text: &str) -> Result<NetworkSpec, WorkloadError> {
    let mut net: NetworkSpec = toml::from_str(text).map_err(|e| WorkloadError::Parse(e.to_string()))?;
    for layer in &mut net.layers {
        layer.batch = net.batch;
    }
    net.validate()?;
    Ok(net)
}

pub fn serialize_network(net: &NetworkSpec) -> String {
    net.to_toml()
}

/// Same network with every bitwidth set to 8.
pub fn to_homogeneous(net: &NetworkSpec) -> NetworkSpec {
    let mut out = net.clone();
    out.bitwidth_mode = BitwidthMode::Homogeneous8Bit;
    for layer in &mut out.layers {
        layer.bw_x = MAX_BITWIDTH;
        layer.bw_w = MAX_BITWIDTH;
    }
    out
}

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// A bundled benchmark in its heterogeneous form.
pub fn bundled(name: &str) -> Result<NetworkSpec, WorkloadError> {
    let src = bundled_source(name).ok_or_else(|| WorkloadError::UnknownBenchmark(name.to_string()))?;
    parse_network(src)
}

pub fn bundled_suite() -> Vec<NetworkSpec> {
    bundled_names()
        .into_iter()
        .map(|n| bundled(n).expect("bundled networks are valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema = 1
name = "tiny"
bitwidth_mode = "heterogeneous"

[[layers]]
name = "fc1"
kind = "fc"
in_features = 64
out_features = 10
bw_x = 4
bw_w = 2
"#;

    #[test]
    fn minimal_file_parses() {
        let net = parse_network(MINIMAL).unwrap();
        assert_eq!(net.layers.len(), 1);
        assert_eq!(net.batch, 1);
        assert_eq!(net.layers[0].macs(), 640);
        assert!(net.layers[0].w_signed && !net.layers[0].x_signed);
    }

    #[test]
    fn oversized_bitwidth_names_layer() {
        let bad = MINIMAL.replace("bw_w = 2", "bw_w = 9");
        match parse_network(&bad) {
            Err(WorkloadError::Bitwidth { name, field, value, .. }) => {
                assert_eq!((name.as_str(), field, value), ("fc1", "bw_w", 9));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_location() {
        let bad = MINIMAL.replace("in_features = 64", "in_features = \"x\"");
        let err = parse_network(&bad).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        let bad = MINIMAL.replace("kind = \"fc\"", "kind = \"pool\"");
        assert!(matches!(parse_network(&bad), Err(WorkloadError::Parse(_))));
    }

    #[test]
    fn chain_mismatch_detected() {
        let text = format!(
            "{MINIMAL}\n[[layers]]\nname = \"fc2\"\nkind = \"fc\"\nin_features = 11\nout_features = 2\nbw_x = 8\nbw_w = 8\n"
        );
        assert!(matches!(parse_network(&text), Err(WorkloadError::Chain { index: 1, .. })));
    }

    #[test]
    fn homogeneous_mode_enforced() {
        let bad = MINIMAL.replace("heterogeneous", "homogeneous-8bit");
        assert!(matches!(parse_network(&bad), Err(WorkloadError::NotHomogeneous { .. })));
    }

    #[test]
    fn wrong_schema_rejected() {
        let bad = MINIMAL.replace("schema = 1", "schema = 2");
        assert_eq!(parse_network(&bad), Err(WorkloadError::Schema(2)));
    }

    #[test]
    fn conv_same_padding_and_pool() {
        let l = LayerSpec::new(
            "c",
            LayerKind::Conv {
                in_channels: 3,
                out_channels: 64,
                in_h: 32,
                in_w: 32,
                kernel_h: 3,
                kernel_w: 3,
                stride: 1,
                padding: None,
                pool: 2,
            },
            8,
            8,
        );
        assert_eq!(l.conv_output(), Some((32, 32)));
        assert_eq!(l.output_shape(), Shape { c: 64, h: 16, w: 16 });
        assert_eq!(l.macs(), 27 * 64 * 1024);
    }

    #[test]
    fn homogeneous_transform() {
        let net = bundled("resnet18").unwrap();
        let h = to_homogeneous(&net);
        assert!(h.layers.iter().all(|l| l.bw_x == 8 && l.bw_w == 8));
        assert_eq!(to_homogeneous(&h), h);
        assert_eq!(h.macs(), net.macs());
        h.validate().unwrap();
    }

    #[test]
    fn bundled_round_trip() {
        for net in bundled_suite() {
            let back = parse_network(&serialize_network(&net)).unwrap();
            assert_eq!(back, net);
        }
    }
}
