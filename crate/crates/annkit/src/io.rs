//! JSON artifact formats and canonical serialization.
//!
//! All artifacts are JSON. Canonical form sorts object keys and prints every
//! float with 17 significant digits in exponent notation, so serialize →
//! parse → serialize is byte-identical and reports are reproducible.

use crate::abstraction::{LayerwisePartitioning, Partitioning};
use crate::domains::{AbstractWeight, Ann, AnnLayer, DomainKind};
use crate::error::{Error, Result};
use crate::model::{Activation, Dnn, DnnLayer, Matrix};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

/// Serializes any serde value to canonical JSON text: keys sorted, floats as
/// 17-significant-digit exponent literals, two-space indentation.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)
        .map_err(|e| Error::InvalidModel(format!("serialization failed: {e}")))?;
    let mut out = String::new();
    write_canonical(&v, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

fn write_canonical(v: &Value, indent: usize, out: &mut String) -> Result<()> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                let f = n.as_f64().unwrap();
                if !f.is_finite() {
                    return Err(Error::InvalidModel(
                        "cannot serialize a non-finite number".into(),
                    ));
                }
                out.push_str(&format!("{f:.16e}"));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).unwrap());
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                write_canonical(item, indent + 1, out)?;
            }
            out.push('\n');
            push_indent(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                write_canonical(&map[k.as_str()], indent + 1, out)?;
            }
            out.push('\n');
            push_indent(indent, out);
            out.push('}');
        }
    }
    Ok(())
}

fn push_indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

/// JSON form of an activation: `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationFile {
    pub kind: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ActivationFile {
    pub fn from_activation(a: &Activation) -> Self {
        let mut params = Map::new();
        let kind = match a {
            Activation::Identity => "identity",
            Activation::ReLU => "relu",
            Activation::Tanh => "tanh",
            Activation::LReLU(c) => {
                params.insert("c".into(), json_f64(*c));
                "lrelu"
            }
            Activation::Thresh { t, v } => {
                params.insert("t".into(), json_f64(*t));
                params.insert("v".into(), json_f64(*v));
                "thresh"
            }
            Activation::Shifted { base, shift } => {
                params.insert(
                    "base".into(),
                    serde_json::to_value(ActivationFile::from_activation(base)).unwrap(),
                );
                params.insert("shift".into(), json_f64(*shift));
                "shifted"
            }
        };
        ActivationFile {
            kind: kind.into(),
            params,
        }
    }

    pub fn to_activation(&self) -> Result<Activation> {
        let bad = |what: &str| Error::InvalidModel(format!("activation {}: {what}", self.kind));
        let param = |name: &str| -> Result<f64> {
            self.params
                .get(name)
                .and_then(Value::as_f64)
                .filter(|f| f.is_finite())
                .ok_or_else(|| bad(&format!("missing or non-finite param '{name}'")))
        };
        Ok(match self.kind.as_str() {
            "identity" => Activation::Identity,
            "relu" => Activation::ReLU,
            "tanh" => Activation::Tanh,
            "lrelu" => Activation::LReLU(param("c")?),
            "thresh" => Activation::Thresh {
                t: param("t")?,
                v: param("v")?,
            },
            "shifted" => {
                let base: ActivationFile = serde_json::from_value(
                    self.params
                        .get("base")
                        .cloned()
                        .ok_or_else(|| bad("missing param 'base'"))?,
                )
                .map_err(|e| bad(&format!("bad base activation: {e}")))?;
                Activation::Shifted {
                    base: Box::new(base.to_activation()?),
                    shift: param("shift")?,
                }
            }
            other => {
                return Err(Error::InvalidModel(format!(
                    "unknown activation kind '{other}'"
                )))
            }
        })
    }
}

fn json_f64(f: f64) -> Value {
    serde_json::Number::from_f64(f).map(Value::Number).unwrap_or(Value::Null)
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// JSON form of one concrete layer: row-major weight rows plus activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLayerFile {
    pub weights: Vec<Vec<f64>>,
    pub activation: ActivationFile,
}

/// JSON form of a concrete network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub layers: Vec<ModelLayerFile>,
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.rows_iter().map(|r| r.to_vec()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    if rows.is_empty() {
        return Err(Error::InvalidModel("weight matrix has no rows".into()));
    }
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidModel(
            "weight rows must be non-empty and equal-length".into(),
        ));
    }
    Matrix::new(rows.len(), cols, rows.concat())
}

impl ModelFile {
    pub fn from_dnn(n: &Dnn) -> Self {
        ModelFile {
            layers: n
                .layers()
                .iter()
                .map(|l| ModelLayerFile {
                    weights: matrix_to_rows(&l.weights),
                    activation: ActivationFile::from_activation(&l.activation),
                })
                .collect(),
        }
    }

    pub fn to_dnn(&self) -> Result<Dnn> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            layers.push(DnnLayer {
                weights: matrix_from_rows(&l.weights)?,
                activation: l.activation.to_activation()?,
            });
        }
        Dnn::new(layers)
    }
}

// ---------------------------------------------------------------------------
// Partition files
// ---------------------------------------------------------------------------

/// JSON form of a layer-wise partitioning: one list per interface of
/// 1-indexed node-index blocks, e.g. `[[[1]], [[1,2]], [[1],[2],[3]]]`.
pub type PartitionFile = Vec<Vec<Vec<usize>>>;

pub fn partition_file_from(lp: &LayerwisePartitioning) -> PartitionFile {
    lp.layers()
        .iter()
        .map(|p| {
            p.blocks()
                .iter()
                .map(|b| b.iter().map(|&i| i + 1).collect())
                .collect()
        })
        .collect()
}

pub fn partition_file_to(pf: &PartitionFile) -> Result<LayerwisePartitioning> {
    let mut layers = Vec::with_capacity(pf.len());
    for layer in pf {
        let n: usize = layer.iter().map(|b| b.len()).sum();
        let mut blocks = Vec::with_capacity(layer.len());
        for b in layer {
            let mut out = Vec::with_capacity(b.len());
            for &i in b {
                if i == 0 {
                    return Err(Error::PartitioningMismatch(
                        "partition files use 1-indexed nodes".into(),
                    ));
                }
                out.push(i - 1);
            }
            blocks.push(out);
        }
        layers.push(Partitioning::new(n, blocks)?);
    }
    LayerwisePartitioning::new(layers)
}

// ---------------------------------------------------------------------------
// Abstract network files
// ---------------------------------------------------------------------------

/// JSON form of one abstract layer: domain tag, domain-specific payload, and
/// the activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnLayerFile {
    pub domain: String,
    pub weight: Value,
    pub activation: ActivationFile,
}

/// JSON form of an abstract network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnFile {
    pub layers: Vec<AnnLayerFile>,
}

impl AnnFile {
    pub fn from_ann(ann: &Ann) -> Result<Self> {
        let mut layers = Vec::with_capacity(ann.num_layers());
        for l in ann.layers() {
            let (domain, weight) = match &l.weight {
                AbstractWeight::Interval(w) => ("interval", serde_json::to_value(w)),
                AbstractWeight::Octagon(w) => ("octagon", serde_json::to_value(w)),
                AbstractWeight::Finite(w) => ("powerset", serde_json::to_value(w)),
            };
            layers.push(AnnLayerFile {
                domain: domain.into(),
                weight: weight
                    .map_err(|e| Error::InvalidModel(format!("weight serialization: {e}")))?,
                activation: ActivationFile::from_activation(&l.activation),
            });
        }
        Ok(AnnFile { layers })
    }

    pub fn to_ann(&self) -> Result<Ann> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let bad = |e: serde_json::Error| {
                Error::InvalidModel(format!("bad {} weight payload: {e}", l.domain))
            };
            let weight = match l.domain.as_str() {
                "interval" => {
                    AbstractWeight::Interval(serde_json::from_value(l.weight.clone()).map_err(bad)?)
                }
                "octagon" => {
                    AbstractWeight::Octagon(serde_json::from_value(l.weight.clone()).map_err(bad)?)
                }
                "powerset" => {
                    AbstractWeight::Finite(serde_json::from_value(l.weight.clone()).map_err(bad)?)
                }
                other => {
                    return Err(Error::InvalidModel(format!("unknown domain tag '{other}'")))
                }
            };
            layers.push(AnnLayer {
                weight,
                activation: l.activation.to_activation()?,
            });
        }
        Ann::new(layers)
    }
}

/// Parses a domain tag from the CLI / file form.
pub fn parse_domain(s: &str) -> Result<DomainKind> {
    match s {
        "interval" => Ok(DomainKind::Interval),
        "octagon" => Ok(DomainKind::Octagon),
        "powerset" => Ok(DomainKind::Powerset),
        other => Err(Error::InvalidModel(format!("unknown domain '{other}'"))),
    }
}

// ---------------------------------------------------------------------------
// Witness reports
// ---------------------------------------------------------------------------

/// One checked input in a witness report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub input: Vec<f64>,
    pub pass: bool,
    /// Failure diagnostic; empty on pass.
    #[serde(default)]
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<crate::soundness::Witness>,
}

/// Batch result of witness checks over a set of inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessReport {
    pub entries: Vec<WitnessEntry>,
    pub all_pass: bool,
}
