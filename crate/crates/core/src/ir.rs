//! CNN layer-sequence intermediate representation.
//!
//! Parses the line-oriented network description format into a shape-checked
//! chain of layers and provides per-layer workload figures (operation and
//! weight counts). Operation counts are MACs: one multiply-accumulate is one
//! op, not two.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Channels x height x width of a feature map, in elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorShape {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
}

impl TensorShape {
    pub fn new(channels: u32, height: u32, width: u32) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    /// Total element count, the token count of one network input at this point.
    pub fn elements(&self) -> u64 {
        self.channels as u64 * self.height as u64 * self.width as u64
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
    Avg,
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolKind::Max => write!(f, "max"),
            PoolKind::Avg => write!(f, "avg"),
        }
    }
}

/// Layer parameters. Kernels are square and padding symmetric.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerKind {
    Conv {
        kernel: u32,
        stride: u32,
        padding: u32,
        out_channels: u32,
    },
    Pool {
        kernel: u32,
        stride: u32,
        pool: PoolKind,
    },
    Relu,
    Fc {
        out_channels: u32,
    },
}

impl LayerKind {
    /// Kernel size; 1 for kernel-free layers.
    pub fn kernel(&self) -> u32 {
        match self {
            LayerKind::Conv { kernel, .. } | LayerKind::Pool { kernel, .. } => *kernel,
            LayerKind::Relu | LayerKind::Fc { .. } => 1,
        }
    }

    pub fn stride(&self) -> u32 {
        match self {
            LayerKind::Conv { stride, .. } | LayerKind::Pool { stride, .. } => *stride,
            LayerKind::Relu | LayerKind::Fc { .. } => 1,
        }
    }

    pub fn padding(&self) -> u32 {
        match self {
            LayerKind::Conv { padding, .. } => *padding,
            _ => 0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LayerKind::Conv { .. } => "conv",
            LayerKind::Pool { .. } => "pool",
            LayerKind::Relu => "relu",
            LayerKind::Fc { .. } => "fc",
        }
    }
}

/// One named layer in a network chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
}

impl Layer {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Structural or dimensional validation failure of a layer chain.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("layer `{layer}`: {detail}")]
    NonPositiveDimension { layer: String, detail: String },
    #[error("layer `{layer}`: only relu or fc may follow fc")]
    InvalidSuccessor { layer: String },
    #[error("duplicate layer name `{0}`")]
    DuplicateName(String),
    #[error("network has no layers")]
    EmptyNetwork,
}

/// A validated linear chain of layers with inferred per-layer output shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub input_shape: TensorShape,
    pub layers: Vec<Layer>,
    /// Output shape of each layer, same order as `layers`.
    pub shapes: Vec<TensorShape>,
}

impl NetworkGraph {
    /// Validates the chain and runs shape inference.
    pub fn new(input_shape: TensorShape, layers: Vec<Layer>) -> Result<Self, ShapeError> {
        if layers.is_empty() {
            return Err(ShapeError::EmptyNetwork);
        }
        let mut seen = std::collections::HashSet::new();
        for layer in &layers {
            if !seen.insert(layer.name.as_str()) {
                return Err(ShapeError::DuplicateName(layer.name.clone()));
            }
        }
        let shapes = infer_shapes(input_shape, &layers)?;
        Ok(Self {
            input_shape,
            layers,
            shapes,
        })
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Input shape of layer `i`.
    pub fn in_shape(&self, i: usize) -> TensorShape {
        if i == 0 {
            self.input_shape
        } else {
            self.shapes[i - 1]
        }
    }

    /// Output shape of layer `i`.
    pub fn out_shape(&self, i: usize) -> TensorShape {
        self.shapes[i]
    }

    /// MAC or elementwise operation count of layer `i` per network input.
    pub fn layer_ops(&self, i: usize) -> u64 {
        layer_ops(&self.layers[i].kind, self.in_shape(i), self.out_shape(i))
    }

    /// Parameter count of layer `i`.
    pub fn layer_weights(&self, i: usize) -> u64 {
        layer_weights(&self.layers[i].kind, self.in_shape(i))
    }

    pub fn total_ops(&self) -> u64 {
        (0..self.len()).map(|i| self.layer_ops(i)).sum()
    }

    pub fn total_weights(&self) -> u64 {
        (0..self.len()).map(|i| self.layer_weights(i)).sum()
    }

    /// Renders the network back into the textual description format.
    ///
    /// `parse` of the result reproduces the graph exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "input {} {} {}\n",
            self.input_shape.channels, self.input_shape.height, self.input_shape.width
        ));
        for layer in &self.layers {
            match &layer.kind {
                LayerKind::Conv {
                    kernel,
                    stride,
                    padding,
                    out_channels,
                } => {
                    out.push_str(&format!(
                        "conv name={} k={} s={} p={} out={}\n",
                        layer.name, kernel, stride, padding, out_channels
                    ));
                }
                LayerKind::Pool {
                    kernel,
                    stride,
                    pool,
                } => {
                    out.push_str(&format!(
                        "pool name={} k={} s={} type={}\n",
                        layer.name, kernel, stride, pool
                    ));
                }
                LayerKind::Relu => out.push_str(&format!("relu name={}\n", layer.name)),
                LayerKind::Fc { out_channels } => {
                    out.push_str(&format!("fc name={} out={}\n", layer.name, out_channels));
                }
            }
        }
        out
    }

    /// Parses the line-oriented network description format.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_network(text)
    }
}

/// Computes per-layer output shapes for a chain, or the first dimension error.
///
/// Conv/Pool: `out = floor((in + 2*padding - kernel)/stride) + 1` per spatial
/// axis; Conv replaces the channel count, Pool and ReLU keep it; FC flattens
/// its input to `out_channels x 1 x 1`.
pub fn infer_shapes(input: TensorShape, layers: &[Layer]) -> Result<Vec<TensorShape>, ShapeError> {
    let mut shapes = Vec::with_capacity(layers.len());
    let mut cur = input;
    if cur.channels == 0 || cur.height == 0 || cur.width == 0 {
        return Err(ShapeError::NonPositiveDimension {
            layer: "input".into(),
            detail: format!("input shape {cur} has a zero dimension"),
        });
    }
    let mut after_fc = false;
    for layer in layers {
        let err = |detail: String| ShapeError::NonPositiveDimension {
            layer: layer.name.clone(),
            detail,
        };
        if after_fc && !matches!(layer.kind, LayerKind::Relu | LayerKind::Fc { .. }) {
            return Err(ShapeError::InvalidSuccessor {
                layer: layer.name.clone(),
            });
        }
        cur = match layer.kind {
            LayerKind::Conv {
                kernel,
                stride,
                padding,
                out_channels,
            } => {
                check_window_params(kernel, stride, out_channels, &err)?;
                let (h, w) = window_output(cur, kernel, stride, padding, &err)?;
                TensorShape::new(out_channels, h, w)
            }
            LayerKind::Pool { kernel, stride, .. } => {
                check_window_params(kernel, stride, 1, &err)?;
                let (h, w) = window_output(cur, kernel, stride, 0, &err)?;
                TensorShape::new(cur.channels, h, w)
            }
            LayerKind::Relu => cur,
            LayerKind::Fc { out_channels } => {
                if out_channels == 0 {
                    return Err(err("out_channels must be positive".into()));
                }
                after_fc = true;
                TensorShape::new(out_channels, 1, 1)
            }
        };
        shapes.push(cur);
    }
    Ok(shapes)
}

fn check_window_params(
    kernel: u32,
    stride: u32,
    out_channels: u32,
    err: &impl Fn(String) -> ShapeError,
) -> Result<(), ShapeError> {
    if kernel == 0 {
        return Err(err("kernel must be positive".into()));
    }
    if stride == 0 {
        return Err(err("stride must be positive".into()));
    }
    if out_channels == 0 {
        return Err(err("out_channels must be positive".into()));
    }
    Ok(())
}

fn window_output(
    input: TensorShape,
    kernel: u32,
    stride: u32,
    padding: u32,
    err: &impl Fn(String) -> ShapeError,
) -> Result<(u32, u32), ShapeError> {
    let padded_h = input.height as u64 + 2 * padding as u64;
    let padded_w = input.width as u64 + 2 * padding as u64;
    if padded_h < kernel as u64 || padded_w < kernel as u64 {
        return Err(err(format!(
            "window k={kernel} does not fit input {input} with padding {padding}"
        )));
    }
    let h = (padded_h - kernel as u64) / stride as u64 + 1;
    let w = (padded_w - kernel as u64) / stride as u64 + 1;
    Ok((h as u32, w as u32))
}

/// MAC (Conv/FC) or elementwise (Pool/ReLU) operation count per network input.
pub fn layer_ops(kind: &LayerKind, in_shape: TensorShape, out_shape: TensorShape) -> u64 {
    match kind {
        LayerKind::Conv { kernel, .. } => {
            out_shape.elements() * in_shape.channels as u64 * (*kernel as u64).pow(2)
        }
        LayerKind::Pool { kernel, .. } => out_shape.elements() * (*kernel as u64).pow(2),
        LayerKind::Relu => in_shape.elements(),
        LayerKind::Fc { out_channels } => in_shape.elements() * *out_channels as u64,
    }
}

/// Parameter count; zero for the parameter-free Pool and ReLU layers.
pub fn layer_weights(kind: &LayerKind, in_shape: TensorShape) -> u64 {
    match kind {
        LayerKind::Conv {
            kernel,
            out_channels,
            ..
        } => *out_channels as u64 * in_shape.channels as u64 * (*kernel as u64).pow(2),
        LayerKind::Fc { out_channels } => in_shape.elements() * *out_channels as u64,
        LayerKind::Pool { .. } | LayerKind::Relu => 0,
    }
}

/// Parse failure, carrying the 1-based line number it occurred on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownLayerKind(String),
    MissingField(String),
    NonPositiveDimension(String),
    DuplicateName(String),
    Malformed(String),
    InvalidSuccessor(String),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::UnknownLayerKind(tok) => {
                write!(f, "UnknownLayerKind {}: `{tok}`", self.line)
            }
            ParseErrorKind::MissingField(field) => {
                write!(f, "MissingField {}: `{field}`", self.line)
            }
            ParseErrorKind::NonPositiveDimension(detail) => {
                write!(f, "NonPositiveDimension {}: {detail}", self.line)
            }
            ParseErrorKind::DuplicateName(name) => {
                write!(f, "DuplicateName {}: `{name}`", self.line)
            }
            ParseErrorKind::Malformed(detail) => write!(f, "MalformedLine {}: {detail}", self.line),
            ParseErrorKind::InvalidSuccessor(name) => {
                write!(
                    f,
                    "InvalidSuccessor {}: layer `{name}` cannot follow fc",
                    self.line
                )
            }
        }
    }
}

fn malformed(line: usize, detail: impl Into<String>) -> ParseError {
    ParseError {
        line,
        kind: ParseErrorKind::Malformed(detail.into()),
    }
}

/// Parses a network description. Strict: unknown keys or stray tokens are errors.
///
/// Format, one item per line, `#` starting a comment line:
///
/// ```text
/// input <channels> <height> <width>
/// conv name=<id> k=<int> s=<int> p=<int> out=<int>
/// pool name=<id> k=<int> s=<int> type=max|avg
/// relu name=<id>
/// fc name=<id> out=<int>
/// ```
pub fn parse_network(text: &str) -> Result<NetworkGraph, ParseError> {
    let mut input_shape: Option<TensorShape> = None;
    let mut input_line = 1usize;
    let mut layers: Vec<Layer> = Vec::new();
    let mut layer_lines: Vec<usize> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().expect("non-empty line has a first token");
        if input_shape.is_none() {
            if head != "input" {
                return Err(malformed(
                    lineno,
                    "expected `input <channels> <height> <width>`",
                ));
            }
            let rest: Vec<&str> = tokens.collect();
            if rest.len() != 3 {
                return Err(malformed(
                    lineno,
                    "input line takes exactly three dimensions",
                ));
            }
            let dims: Vec<u32> = rest
                .iter()
                .map(|tok| parse_positive(tok, "input dimension", lineno))
                .collect::<Result<_, _>>()?;
            input_shape = Some(TensorShape::new(dims[0], dims[1], dims[2]));
            input_line = lineno;
            continue;
        }
        let kind = match head {
            "conv" => {
                let fields = parse_fields(tokens, &["name", "k", "s", "p", "out"], lineno)?;
                LayerKind::Conv {
                    kernel: parse_positive(require(&fields, "k", lineno)?, "k", lineno)?,
                    stride: parse_positive(require(&fields, "s", lineno)?, "s", lineno)?,
                    padding: parse_non_negative(require(&fields, "p", lineno)?, "p", lineno)?,
                    out_channels: parse_positive(require(&fields, "out", lineno)?, "out", lineno)?,
                }
            }
            "pool" => {
                let fields = parse_fields(tokens, &["name", "k", "s", "type"], lineno)?;
                let pool = match require(&fields, "type", lineno)? {
                    "max" => PoolKind::Max,
                    "avg" => PoolKind::Avg,
                    other => {
                        return Err(malformed(
                            lineno,
                            format!("pool type must be max or avg, got `{other}`"),
                        ))
                    }
                };
                LayerKind::Pool {
                    kernel: parse_positive(require(&fields, "k", lineno)?, "k", lineno)?,
                    stride: parse_positive(require(&fields, "s", lineno)?, "s", lineno)?,
                    pool,
                }
            }
            "relu" => {
                parse_fields(tokens, &["name"], lineno)?;
                LayerKind::Relu
            }
            "fc" => {
                let fields = parse_fields(tokens, &["name", "out"], lineno)?;
                LayerKind::Fc {
                    out_channels: parse_positive(require(&fields, "out", lineno)?, "out", lineno)?,
                }
            }
            "input" => return Err(malformed(lineno, "duplicate input line")),
            other => {
                return Err(ParseError {
                    line: lineno,
                    kind: ParseErrorKind::UnknownLayerKind(other.to_string()),
                })
            }
        };
        // re-walk the tokens to pick the validated name
        let name = name_field(line, lineno)?;
        layers.push(Layer::new(name, kind));
        layer_lines.push(lineno);
    }

    let input_shape =
        input_shape.ok_or_else(|| malformed(1, "expected `input <channels> <height> <width>`"))?;
    if layers.is_empty() {
        return Err(malformed(input_line, "network has no layers"));
    }

    NetworkGraph::new(input_shape, layers)
        .map_err(|e| shape_error_to_parse(e, &layer_lines, input_line, text))
}

fn shape_error_to_parse(
    err: ShapeError,
    layer_lines: &[usize],
    input_line: usize,
    text: &str,
) -> ParseError {
    // Lines whose name=<id> token matches exactly.
    let lines_of = |name: &str| -> Vec<usize> {
        let token = format!("name={name}");
        text.lines()
            .enumerate()
            .filter(|(_, raw)| raw.split_whitespace().any(|tok| tok == token))
            .map(|(idx, _)| idx + 1)
            .collect()
    };
    let first_line = |name: &str| {
        lines_of(name)
            .first()
            .copied()
            .unwrap_or_else(|| layer_lines.last().copied().unwrap_or(input_line))
    };
    match err {
        ShapeError::NonPositiveDimension { layer, detail } => {
            let line = if layer == "input" {
                input_line
            } else {
                first_line(&layer)
            };
            ParseError {
                line,
                kind: ParseErrorKind::NonPositiveDimension(format!("layer `{layer}`: {detail}")),
            }
        }
        ShapeError::InvalidSuccessor { layer } => ParseError {
            line: first_line(&layer),
            kind: ParseErrorKind::InvalidSuccessor(layer),
        },
        ShapeError::DuplicateName(name) => {
            // the offender is the later occurrence
            let line = lines_of(&name).last().copied().unwrap_or(input_line);
            ParseError {
                line,
                kind: ParseErrorKind::DuplicateName(name),
            }
        }
        ShapeError::EmptyNetwork => malformed(input_line, "network has no layers"),
    }
}

fn parse_fields<'a>(
    tokens: impl Iterator<Item = &'a str>,
    allowed: &[&str],
    lineno: usize,
) -> Result<Vec<(String, String)>, ParseError> {
    let mut fields: Vec<(String, String)> = Vec::new();
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| malformed(lineno, format!("expected key=value token, got `{tok}`")))?;
        if !allowed.contains(&key) {
            return Err(malformed(lineno, format!("unknown key `{key}`")));
        }
        if fields.iter().any(|(k, _)| k == key) {
            return Err(malformed(lineno, format!("duplicate key `{key}`")));
        }
        fields.push((key.to_string(), value.to_string()));
    }
    Ok(fields)
}

fn require<'a>(
    fields: &'a [(String, String)],
    key: &str,
    lineno: usize,
) -> Result<&'a str, ParseError> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| ParseError {
            line: lineno,
            kind: ParseErrorKind::MissingField(key.to_string()),
        })
}

fn name_field(line: &str, lineno: usize) -> Result<String, ParseError> {
    let name = line
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("name="))
        .ok_or_else(|| ParseError {
            line: lineno,
            kind: ParseErrorKind::MissingField("name".into()),
        })?;
    let valid = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if !valid {
        return Err(malformed(lineno, format!("invalid layer name `{name}`")));
    }
    Ok(name.to_string())
}

fn parse_int(tok: &str, field: &str, lineno: usize) -> Result<i64, ParseError> {
    tok.parse::<i64>()
        .map_err(|_| malformed(lineno, format!("`{field}` must be an integer, got `{tok}`")))
}

fn parse_positive(tok: &str, field: &str, lineno: usize) -> Result<u32, ParseError> {
    let v = parse_int(tok, field, lineno)?;
    if v <= 0 || v > u32::MAX as i64 {
        return Err(ParseError {
            line: lineno,
            kind: ParseErrorKind::NonPositiveDimension(format!(
                "`{field}` must be positive, got {v}"
            )),
        });
    }
    Ok(v as u32)
}

fn parse_non_negative(tok: &str, field: &str, lineno: usize) -> Result<u32, ParseError> {
    let v = parse_int(tok, field, lineno)?;
    if v < 0 || v > u32::MAX as i64 {
        return Err(ParseError {
            line: lineno,
            kind: ParseErrorKind::NonPositiveDimension(format!(
                "`{field}` must be non-negative, got {v}"
            )),
        });
    }
    Ok(v as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(k: u32, s: u32, p: u32, out: u32) -> LayerKind {
        LayerKind::Conv {
            kernel: k,
            stride: s,
            padding: p,
            out_channels: out,
        }
    }

    #[test]
    fn parse_single_conv() {
        let net = parse_network("input 1 8 8\nconv name=c1 k=3 s=1 p=1 out=4").unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.out_shape(0), TensorShape::new(4, 8, 8));
    }

    #[test]
    fn parse_unpadded_conv_shrinks() {
        let net = parse_network("input 3 32 32\nconv name=c k=3 s=1 p=0 out=2").unwrap();
        assert_eq!(net.out_shape(0), TensorShape::new(2, 30, 30));
    }

    #[test]
    fn parse_oversized_kernel_is_dimension_error() {
        let err = parse_network("input 1 4 4\nconv name=c k=5 s=1 p=0 out=1").unwrap_err();
        assert!(
            matches!(err.kind, ParseErrorKind::NonPositiveDimension(_)),
            "{err}"
        );
        assert_eq!(err.line, 2);
    }

    #[test]
    fn infer_pool_halves() {
        let net = NetworkGraph::new(
            TensorShape::new(16, 32, 32),
            vec![Layer::new(
                "p",
                LayerKind::Pool {
                    kernel: 2,
                    stride: 2,
                    pool: PoolKind::Max,
                },
            )],
        )
        .unwrap();
        assert_eq!(net.out_shape(0), TensorShape::new(16, 16, 16));
    }

    #[test]
    fn infer_relu_identity() {
        let net = NetworkGraph::new(
            TensorShape::new(8, 7, 7),
            vec![Layer::new("r", LayerKind::Relu)],
        )
        .unwrap();
        assert_eq!(net.out_shape(0), TensorShape::new(8, 7, 7));
    }

    #[test]
    fn infer_strided_padded_conv() {
        let net = NetworkGraph::new(
            TensorShape::new(3, 224, 224),
            vec![Layer::new("c", conv(3, 2, 1, 64))],
        )
        .unwrap();
        assert_eq!(net.out_shape(0), TensorShape::new(64, 112, 112));
    }

    #[test]
    fn ops_conv_fc_pool_relu() {
        // conv k=3 on 1x8x8, p=1 s=1 -> 1x8x8: 8*8*1*1*9
        let net = parse_network("input 1 8 8\nconv name=c k=3 s=1 p=1 out=1").unwrap();
        assert_eq!(net.layer_ops(0), 576);

        // fc 4 -> 10
        let net = NetworkGraph::new(
            TensorShape::new(4, 1, 1),
            vec![Layer::new("f", LayerKind::Fc { out_channels: 10 })],
        )
        .unwrap();
        assert_eq!(net.layer_ops(0), 40);

        // pool k=2 s=2 on 2x4x4 -> 2x2x2: 2*2*2*4
        let net = NetworkGraph::new(
            TensorShape::new(2, 4, 4),
            vec![Layer::new(
                "p",
                LayerKind::Pool {
                    kernel: 2,
                    stride: 2,
                    pool: PoolKind::Avg,
                },
            )],
        )
        .unwrap();
        assert_eq!(net.out_shape(0), TensorShape::new(2, 2, 2));
        assert_eq!(net.layer_ops(0), 32);

        let net = NetworkGraph::new(
            TensorShape::new(8, 7, 7),
            vec![Layer::new("r", LayerKind::Relu)],
        )
        .unwrap();
        assert_eq!(net.layer_ops(0), 8 * 7 * 7);
    }

    #[test]
    fn weights_conv_relu_fc() {
        let net = parse_network("input 1 8 8\nconv name=c k=3 s=1 p=1 out=4").unwrap();
        assert_eq!(net.layer_weights(0), 36);

        let net = NetworkGraph::new(
            TensorShape::new(8, 7, 7),
            vec![Layer::new("r", LayerKind::Relu)],
        )
        .unwrap();
        assert_eq!(net.layer_weights(0), 0);

        let net = NetworkGraph::new(
            TensorShape::new(512, 1, 1),
            vec![Layer::new("f", LayerKind::Fc { out_channels: 10 })],
        )
        .unwrap();
        assert_eq!(net.layer_weights(0), 5120);
    }

    #[test]
    fn fc_flattens_input() {
        let net = parse_network("input 4 3 3\nfc name=f out=10").unwrap();
        assert_eq!(net.out_shape(0), TensorShape::new(10, 1, 1));
        assert_eq!(net.layer_ops(0), 4 * 3 * 3 * 10);
        assert_eq!(net.layer_weights(0), 360);
    }

    #[test]
    fn conv_after_fc_rejected() {
        let err = parse_network("input 4 1 1\nfc name=f out=8\nconv name=c k=1 s=1 p=0 out=2")
            .unwrap_err();
        assert!(
            matches!(err.kind, ParseErrorKind::InvalidSuccessor(_)),
            "{err}"
        );
        assert_eq!(err.line, 3);
    }

    #[test]
    fn relu_and_fc_after_fc_allowed() {
        let net = parse_network("input 4 1 1\nfc name=f out=8\nrelu name=r\nfc name=g out=2");
        assert!(net.is_ok());
    }

    #[test]
    fn duplicate_name_rejected() {
        let err = parse_network("input 1 8 8\nrelu name=a\nrelu name=a").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::DuplicateName(_)));
        assert_eq!(err.line, 3);
    }

    #[test]
    fn unknown_kind_and_key() {
        let err = parse_network("input 1 8 8\nsoftmax name=s").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::UnknownLayerKind(_)));

        let err = parse_network("input 1 8 8\nrelu name=r extra=1").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Malformed(_)));
    }

    #[test]
    fn missing_field_and_missing_input() {
        let err = parse_network("input 1 8 8\nconv name=c k=3 s=1 p=1").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MissingField("out".into()));

        let err = parse_network("conv name=c k=3 s=1 p=1 out=4").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.to_string().starts_with("MalformedLine 1"));

        let err = parse_network("").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.to_string().starts_with("MalformedLine 1"));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let net = parse_network("# a comment\n\ninput 1 8 8\n# another\nrelu name=r\n").unwrap();
        assert_eq!(net.len(), 1);
    }

    #[test]
    fn serialize_parse_round_trip() {
        let text = "input 3 32 32\nconv name=c1 k=3 s=1 p=1 out=16\nrelu name=r1\npool name=p1 k=2 s=2 type=max\nfc name=f1 out=10\n";
        let net = parse_network(text).unwrap();
        let round = parse_network(&net.serialize()).unwrap();
        assert_eq!(net, round);
    }

    #[test]
    fn relu_insertion_adds_only_elementwise_ops() {
        let base = parse_network(
            "input 2 8 8\nconv name=c k=3 s=1 p=1 out=4\npool name=p k=2 s=2 type=max",
        )
        .unwrap();
        let with_relu = parse_network(
            "input 2 8 8\nconv name=c k=3 s=1 p=1 out=4\nrelu name=r\npool name=p k=2 s=2 type=max",
        )
        .unwrap();
        let inserted = with_relu.layer_ops(1);
        assert_eq!(inserted, 4 * 8 * 8);
        assert_eq!(with_relu.total_ops(), base.total_ops() + inserted);
    }

    #[test]
    fn ops_weights_monotone_in_out_channels() {
        let mk = |out| {
            NetworkGraph::new(
                TensorShape::new(3, 8, 8),
                vec![Layer::new("c", conv(3, 1, 1, out))],
            )
            .unwrap()
        };
        let mut prev_ops = 0;
        let mut prev_w = 0;
        for out in 1..=8 {
            let net = mk(out);
            assert!(net.layer_ops(0) > prev_ops);
            assert!(net.layer_weights(0) > prev_w);
            prev_ops = net.layer_ops(0);
            prev_w = net.layer_weights(0);
        }
    }
}
