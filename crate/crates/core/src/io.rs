//! JSON interchange for parameters, vectors, certificates and witnesses.
//!
//! ```text
//! params       {"p": 2.0, "r": 4}
//! sparse       {"format": "sparse", "entries": [[index, value], …]}
//! grid         {"format": "grid", "base": "alpha"|"s"|"t", "entries": [[index, sign, exponent], …]}
//! certificate  {"mode": "successive"|"disjoint", "node": {"leaf": [sign, index]} | {"children": […]}}
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! gives bit-identical values.

use serde_json::{json, Value};

use crate::certificate::{CertNode, Certificate, Mode};
use crate::classical::SplitTree;
use crate::error::{Error, Result};
use crate::modified::LevelAssignment;
use crate::params::{BaseKind, Params};
use crate::vector::{GridEntry, GridVector, Sign, SparseVector};

fn malformed(msg: impl Into<String>) -> Error {
    Error::Malformed(msg.into())
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| malformed(e.to_string()))
}

fn field<'a>(obj: &'a Value, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| malformed(format!("missing field \"{key}\"")))
}

fn as_index(v: &Value) -> Result<usize> {
    v.as_u64()
        .and_then(|i| usize::try_from(i).ok())
        .ok_or_else(|| malformed(format!("index must be a nonnegative integer, got {v}")))
}

fn as_i32(v: &Value) -> Result<i32> {
    v.as_i64()
        .and_then(|i| i32::try_from(i).ok())
        .ok_or_else(|| malformed(format!("expected a 32-bit integer, got {v}")))
}

fn as_sign(v: &Value) -> Result<Sign> {
    let raw = v.as_i64().ok_or_else(|| malformed(format!("sign must be 1 or -1, got {v}")))?;
    i8::try_from(raw)
        .map_err(|_| malformed(format!("sign must be 1 or -1, got {raw}")))
        .and_then(|s| Sign::from_i8(s).map_err(|_| malformed(format!("sign must be 1 or -1, got {raw}"))))
}

fn tuple(v: &Value, len: usize) -> Result<&[Value]> {
    match v.as_array() {
        Some(a) if a.len() == len => Ok(a),
        _ => Err(malformed(format!("expected an array of length {len}, got {v}"))),
    }
}

/// Parameters from `{"p": …, "r": …}`; the derived quantities are
/// recomputed and checked.
pub fn parse_params(text: &str) -> Result<Params> {
    let v = parse_json(text)?;
    let p = field(&v, "p")?.as_f64().ok_or_else(|| malformed("\"p\" must be a number"))?;
    let r = field(&v, "r")?
        .as_u64()
        .and_then(|r| u32::try_from(r).ok())
        .ok_or_else(|| malformed("\"r\" must be a nonnegative integer"))?;
    Params::new(p, r)
}

/// Inputs and derived quantities, for echoing into output files.
pub fn params_json(params: &Params) -> Value {
    json!({
        "p": params.p,
        "r": params.r,
        "q": params.q,
        "t": params.t,
        "s": params.s,
        "level_count": params.level_count,
        "alpha": params.alpha,
    })
}

/// A parsed vector file.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorInput {
    Sparse(SparseVector),
    Grid(GridVector),
}

impl VectorInput {
    pub fn to_sparse(&self) -> SparseVector {
        match self {
            VectorInput::Sparse(x) => x.clone(),
            VectorInput::Grid(x) => x.to_sparse(),
        }
    }

    /// The grid vector, if the file was in grid format on the given base.
    pub fn expect_grid(&self, kind: BaseKind) -> Result<&GridVector> {
        match self {
            VectorInput::Grid(x) if x.base().kind == Some(kind) => Ok(x),
            _ => Err(Error::InvalidVector(format!(
                "expected a grid vector on base \"{}\"",
                kind.name()
            ))),
        }
    }
}

fn base_kind(name: &str) -> Result<BaseKind> {
    match name {
        "alpha" => Ok(BaseKind::Alpha),
        "s" => Ok(BaseKind::S),
        "t" => Ok(BaseKind::T),
        other => Err(malformed(format!("unknown grid base \"{other}\""))),
    }
}

pub fn parse_vector(text: &str, params: &Params) -> Result<VectorInput> {
    vector_from_value(&parse_json(text)?, params)
}

pub fn vector_from_value(v: &Value, params: &Params) -> Result<VectorInput> {
    let format = field(v, "format")?.as_str().ok_or_else(|| malformed("\"format\" must be a string"))?;
    let entries = field(v, "entries")?
        .as_array()
        .ok_or_else(|| malformed("\"entries\" must be an array"))?;
    match format {
        "sparse" => {
            let mut pairs = Vec::with_capacity(entries.len());
            for e in entries {
                let e = tuple(e, 2)?;
                let value = e[1].as_f64().ok_or_else(|| malformed(format!("value must be a number, got {}", e[1])))?;
                pairs.push((as_index(&e[0])?, value));
            }
            Ok(VectorInput::Sparse(SparseVector::from_entries(pairs)?))
        }
        "grid" => {
            let kind = base_kind(
                field(v, "base")?.as_str().ok_or_else(|| malformed("\"base\" must be a string"))?,
            )?;
            let mut items = Vec::with_capacity(entries.len());
            for e in entries {
                let e = tuple(e, 3)?;
                items.push((as_index(&e[0])?, GridEntry::new(as_sign(&e[1])?, as_i32(&e[2])?)));
            }
            Ok(VectorInput::Grid(GridVector::from_entries(params.base(kind), items)?))
        }
        other => Err(malformed(format!("unknown vector format \"{other}\""))),
    }
}

pub fn sparse_json(x: &SparseVector) -> Value {
    json!({
        "format": "sparse",
        "entries": x.iter().map(|(i, v)| json!([i, v])).collect::<Vec<_>>(),
    })
}

/// Grid vectors on an ad hoc base have no file representation and are
/// written in sparse form.
pub fn grid_json(x: &GridVector) -> Value {
    match x.base().kind {
        Some(kind) => json!({
            "format": "grid",
            "base": kind.name(),
            "entries": x.iter().map(|(i, e)| json!([i, e.sign.as_i8(), e.exp])).collect::<Vec<_>>(),
        }),
        None => sparse_json(&x.to_sparse()),
    }
}

pub fn node_json(node: &CertNode) -> Value {
    match node {
        CertNode::Leaf(sign, index) => json!({"leaf": [sign.as_i8(), index]}),
        CertNode::Children(children) => {
            json!({"children": children.iter().map(node_json).collect::<Vec<_>>()})
        }
    }
}

pub fn certificate_json(cert: &Certificate) -> Value {
    json!({"mode": cert.mode.name(), "node": node_json(&cert.node)})
}

fn node_from_value(v: &Value) -> Result<CertNode> {
    if let Some(leaf) = v.get("leaf") {
        let leaf = tuple(leaf, 2)?;
        return Ok(CertNode::Leaf(as_sign(&leaf[0])?, as_index(&leaf[1])?));
    }
    if let Some(children) = v.get("children") {
        let children = children.as_array().ok_or_else(|| malformed("\"children\" must be an array"))?;
        return Ok(CertNode::Children(children.iter().map(node_from_value).collect::<Result<_>>()?));
    }
    Err(malformed("certificate node needs \"leaf\" or \"children\""))
}

/// Parse a certificate; structural validity is left to the verifier.
pub fn parse_certificate(text: &str) -> Result<Certificate> {
    let v = parse_json(text)?;
    let mode = match field(&v, "mode")?.as_str() {
        Some("successive") => Mode::Successive,
        Some("disjoint") => Mode::Disjoint,
        _ => return Err(malformed("\"mode\" must be \"successive\" or \"disjoint\"")),
    };
    Ok(Certificate { mode, node: node_from_value(field(&v, "node")?)? })
}

pub fn levels_json(levels: &LevelAssignment) -> Value {
    json!({
        "levels": levels.levels.iter().map(|(i, j)| json!([i, j])).collect::<Vec<_>>(),
        "value": levels.value,
        "slack": levels.slack,
    })
}

pub fn split_tree_json(tree: &SplitTree) -> Value {
    serde_json::to_value(tree).expect("split trees serialize")
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;

    #[test]
    fn vectors_round_trip() {
        let pr = derive_params(2.0, 4).unwrap();
        let x = SparseVector::from_entries([(1, 0.1), (4, -1.0 / 3.0), (9, 2.5e-300)]).unwrap();
        let back = parse_vector(&sparse_json(&x).to_string(), &pr).unwrap();
        assert_eq!(back, VectorInput::Sparse(x));

        let g = GridVector::from_entries(
            pr.base(BaseKind::T),
            [(2, GridEntry::new(Sign::Minus, -3)), (5, GridEntry::new(Sign::Plus, 1))],
        )
        .unwrap();
        let back = parse_vector(&grid_json(&g).to_string(), &pr).unwrap();
        assert_eq!(back, VectorInput::Grid(g));
    }

    #[test]
    fn certificates_round_trip() {
        let cert = Certificate {
            mode: Mode::Disjoint,
            node: CertNode::Children(vec![
                CertNode::Leaf(Sign::Plus, 1),
                CertNode::Children(vec![CertNode::Leaf(Sign::Minus, 3)]),
            ]),
        };
        let text = certificate_json(&cert).to_string();
        assert!(text.contains("\"leaf\":[-1,3]"));
        assert_eq!(parse_certificate(&text).unwrap(), cert);
    }

    #[test]
    fn malformed_inputs() {
        let pr = derive_params(2.0, 2).unwrap();
        assert_eq!(parse_params("{\"p\": 2").unwrap_err().code(), "E_JSON");
        assert_eq!(parse_params("{\"p\": 1.0, \"r\": 2}").unwrap_err().code(), "E_PARAMS");
        let bad = "{\"format\": \"grid\", \"base\": \"u\", \"entries\": []}";
        assert_eq!(parse_vector(bad, &pr).unwrap_err().code(), "E_JSON");
        let zero = "{\"format\": \"sparse\", \"entries\": [[0, 1.0]]}";
        assert_eq!(parse_vector(zero, &pr).unwrap_err().code(), "E_VECTOR");
    }
}
