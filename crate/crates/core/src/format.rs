//! JSON documents: instances, mappings and transform traces.
//!
//! Quantities are written as JSON numbers in canonical decimal form, with the
//! string `"inf"` for an unbounded component. Numbers are read from their
//! literal text, so no value ever passes through floating point.

use std::collections::HashMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Number, Value};

use crate::model::{Instance, Mapping, ModelError, Request, Substrate};
use crate::quantity::{Cost, Quantity, ResourceVec};
use crate::transform::TransformTrace;

/// A parse failure with its position in the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l} column {c}: ")?;
        }
        if !self.path.is_empty() && self.path != "." {
            write!(f, "{}: ", self.path)?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for FormatError {}

impl FormatError {
    fn at(path: impl Into<String>, message: impl fmt::Display) -> Self {
        FormatError {
            path: path.into(),
            line: None,
            column: None,
            message: message.to_string(),
        }
    }
}

fn from_json<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T, FormatError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let out = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        // serde_json appends its own position; keep the bare message
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        FormatError {
            path,
            line: Some(inner.line()),
            column: Some(inner.column()),
            message,
        }
    })?;
    Ok(out)
}

/// One quantity component: a JSON number or `"inf"`.
struct QtyText(Quantity);

impl<'de> Deserialize<'de> for QtyText {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let parsed = match Value::deserialize(d)? {
            Value::Number(n) => n.to_string().parse::<Quantity>(),
            Value::String(s) if s == "inf" => Ok(Quantity::UNBOUNDED),
            Value::String(s) => s.parse::<Quantity>(),
            other => {
                return Err(de::Error::custom(format!(
                    "expected a decimal or \"inf\", found {other}"
                )))
            }
        };
        parsed.map(QtyText).map_err(de::Error::custom)
    }
}

fn to_vec(components: Vec<QtyText>) -> ResourceVec {
    ResourceVec::new(components.into_iter().map(|q| q.0).collect())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    tau: usize,
    substrate: SubstrateDoc,
    request: RequestDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubstrateDoc {
    nodes: Vec<SubstrateNodeDoc>,
    #[serde(default)]
    edges: Vec<SubstrateEdgeDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubstrateNodeDoc {
    id: String,
    capacity: Vec<QtyText>,
    cost: Vec<QtyText>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubstrateEdgeDoc {
    src: String,
    dst: String,
    capacity: Vec<QtyText>,
    cost: Vec<QtyText>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestDoc {
    nodes: Vec<RequestNodeDoc>,
    #[serde(default)]
    edges: Vec<RequestEdgeDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestNodeDoc {
    id: String,
    demand: Vec<QtyText>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestEdgeDoc {
    src: String,
    dst: String,
    demand: Vec<QtyText>,
}

/// Parses an instance document.
pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let doc: InstanceDoc = from_json(text)?;
    if doc.tau == 0 {
        return Err(FormatError::at("tau", "must be at least 1"));
    }
    let tau = doc.tau;
    let wrap = |path: String| move |e: ModelError| FormatError::at(path, e);

    let mut sub = Substrate::new(tau);
    for (i, n) in doc.substrate.nodes.into_iter().enumerate() {
        sub.add_node(n.id, to_vec(n.capacity), to_vec(n.cost))
            .map_err(wrap(format!("substrate.nodes[{i}]")))?;
    }
    for (i, e) in doc.substrate.edges.into_iter().enumerate() {
        sub.add_edge_by_id(&e.src, &e.dst, to_vec(e.capacity), to_vec(e.cost))
            .map_err(wrap(format!("substrate.edges[{i}]")))?;
    }
    let mut req = Request::new(tau);
    for (i, n) in doc.request.nodes.into_iter().enumerate() {
        req.add_node(n.id, to_vec(n.demand))
            .map_err(wrap(format!("request.nodes[{i}]")))?;
    }
    for (i, e) in doc.request.edges.into_iter().enumerate() {
        req.add_edge_by_id(&e.src, &e.dst, to_vec(e.demand))
            .map_err(wrap(format!("request.edges[{i}]")))?;
    }
    Ok(Instance::new(sub, req).expect("both built with the same tau"))
}

fn quantity_json(q: Quantity) -> Value {
    if q.is_unbounded() {
        Value::String("inf".into())
    } else {
        Value::Number(q.to_string().parse::<Number>().expect("canonical decimal"))
    }
}

fn vec_json(v: &ResourceVec) -> Value {
    Value::Array(v.components().iter().map(|&q| quantity_json(q)).collect())
}

/// Canonical JSON value of an instance.
pub fn instance_value(instance: &Instance) -> Value {
    let sub = &instance.substrate;
    let req = &instance.request;
    let snodes: Vec<Value> = sub
        .nodes()
        .iter()
        .map(|n| json!({"id": n.id, "capacity": vec_json(&n.capacity), "cost": vec_json(&n.cost)}))
        .collect();
    let sedges: Vec<Value> = sub
        .edges()
        .iter()
        .map(|e| {
            json!({
                "src": sub.node_id(e.src),
                "dst": sub.node_id(e.dst),
                "capacity": vec_json(&e.capacity),
                "cost": vec_json(&e.cost),
            })
        })
        .collect();
    let rnodes: Vec<Value> = req
        .nodes()
        .iter()
        .map(|n| json!({"id": n.id, "demand": vec_json(&n.demand)}))
        .collect();
    let redges: Vec<Value> = req
        .edges()
        .iter()
        .map(|e| json!({"src": req.node(e.src).id, "dst": req.node(e.dst).id, "demand": vec_json(&e.demand)}))
        .collect();
    json!({
        "tau": sub.tau(),
        "substrate": {"nodes": snodes, "edges": sedges},
        "request": {"nodes": rnodes, "edges": redges},
    })
}

/// Canonical text of an instance: pretty-printed, newline-terminated.
pub fn instance_to_json(instance: &Instance) -> String {
    pretty(&instance_value(instance))
}

pub fn pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn cost_json(cost: Cost) -> Value {
    if cost.is_saturated() {
        Value::String("inf".into())
    } else {
        Value::Number(
            cost.to_string()
                .parse::<Number>()
                .expect("canonical decimal"),
        )
    }
}

/// Mapping document with walks written as substrate node sequences.
pub fn mapping_value(
    substrate: &Substrate,
    request: &Request,
    mapping: &Mapping,
    cost: Cost,
) -> Value {
    let mut nodes = Map::new();
    for (i, &v) in mapping.node_map.iter().enumerate() {
        nodes.insert(
            request.node(i).id.clone(),
            Value::String(substrate.node_id(v).to_string()),
        );
    }
    let mut edges = Map::new();
    for (e, path) in mapping.edge_map.iter().enumerate() {
        let start = mapping.node_map[request.edge(e).src];
        let mut seq = vec![Value::String(substrate.node_id(start).to_string())];
        seq.extend(
            path.iter()
                .map(|&s| Value::String(substrate.node_id(substrate.edge(s).dst).to_string())),
        );
        edges.insert(request.edge_label(e), Value::Array(seq));
    }
    json!({"cost": cost_json(cost), "node_map": nodes, "edge_map": edges})
}

pub fn mapping_to_json(
    substrate: &Substrate,
    request: &Request,
    mapping: &Mapping,
    cost: Cost,
) -> String {
    pretty(&mapping_value(substrate, request, mapping, cost))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingDoc {
    #[serde(default)]
    cost: Option<Value>,
    node_map: HashMap<String, String>,
    #[serde(default)]
    edge_map: HashMap<String, Vec<String>>,
}

/// A parsed mapping together with the cost it claims, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingDocument {
    pub mapping: Mapping,
    pub cost: Option<Cost>,
}

/// Parses a mapping document against an instance. Node sequences must follow
/// existing substrate edges; a one-node sequence is an empty walk and must
/// name the host of the edge's source.
pub fn parse_mapping(
    text: &str,
    substrate: &Substrate,
    request: &Request,
) -> Result<MappingDocument, FormatError> {
    let doc: MappingDoc = from_json(text)?;
    let cost = match doc.cost {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => Some(
            n.to_string()
                .parse::<Cost>()
                .map_err(|e| FormatError::at("cost", e))?,
        ),
        Some(Value::String(s)) if s == "inf" => Some(Cost::SATURATED),
        Some(other) => {
            return Err(FormatError::at(
                "cost",
                format!("expected a decimal, found {other}"),
            ))
        }
    };

    let mut node_map = Vec::with_capacity(request.node_count());
    for n in request.nodes() {
        let host = doc.node_map.get(&n.id).ok_or_else(|| {
            FormatError::at("node_map", format!("request node `{}` is not placed", n.id))
        })?;
        let v = substrate.find_node(host).ok_or_else(|| {
            FormatError::at(
                format!("node_map.{}", n.id),
                format!("unknown substrate node `{host}`"),
            )
        })?;
        node_map.push(v);
    }
    if let Some(extra) = doc.node_map.keys().find(|k| request.find_node(k).is_none()) {
        return Err(FormatError::at(
            "node_map",
            format!("unknown request node `{extra}`"),
        ));
    }

    let labels: HashMap<String, usize> = (0..request.edge_count())
        .map(|e| (request.edge_label(e), e))
        .collect();
    if let Some(extra) = doc.edge_map.keys().find(|k| !labels.contains_key(*k)) {
        return Err(FormatError::at(
            "edge_map",
            format!("unknown request edge `{extra}`"),
        ));
    }
    let mut edge_map = Vec::with_capacity(request.edge_count());
    for e in 0..request.edge_count() {
        let label = request.edge_label(e);
        let path = format!("edge_map.{label}");
        let seq = doc.edge_map.get(&label).ok_or_else(|| {
            FormatError::at("edge_map", format!("request edge `{label}` is not routed"))
        })?;
        let ids = seq
            .iter()
            .map(|id| {
                substrate
                    .find_node(id)
                    .ok_or_else(|| FormatError::at(&path, format!("unknown substrate node `{id}`")))
            })
            .collect::<Result<Vec<usize>, _>>()?;
        match ids.as_slice() {
            [] => return Err(FormatError::at(&path, "node sequence is empty")),
            [only] if *only != node_map[request.edge(e).src] => {
                return Err(FormatError::at(
                    &path,
                    "a one-node sequence must name the source host",
                ));
            }
            _ => {}
        }
        let walk = ids
            .windows(2)
            .map(|w| {
                substrate.find_edge(w[0], w[1]).ok_or_else(|| {
                    FormatError::at(
                        &path,
                        format!(
                            "no substrate edge `{}->{}`",
                            substrate.node_id(w[0]),
                            substrate.node_id(w[1])
                        ),
                    )
                })
            })
            .collect::<Result<Vec<usize>, _>>()?;
        edge_map.push(walk);
    }
    Ok(MappingDocument {
        mapping: Mapping { node_map, edge_map },
        cost,
    })
}

/// The traces of a transform chain, one named stage each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub root: String,
    pub stages: Vec<TraceStage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStage {
    pub name: String,
    #[serde(flatten)]
    pub trace: TransformTrace,
}

pub fn parse_trace(text: &str) -> Result<TraceDocument, FormatError> {
    from_json(text)
}
