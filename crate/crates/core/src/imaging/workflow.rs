//! Node-graph workflow descriptors (`workflows/*.flow`).
//!
//! The descriptor is only parsed, checked and filled in; the graph runs on
//! the remote backend.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::record::{parse_records, Record, RecordError};

pub const REQUIRED_SLOTS: [&str; 3] = ["PROMPT", "BASE_IMAGE", "SEED"];

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error("cannot read workflow {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Invalid(#[from] RecordError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowNode {
    pub id: String,
    pub class: String,
    /// `name = value` pairs in authored order; values may be `{SLOT}`.
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowEdge {
    pub from_node: String,
    pub output: String,
    pub to_node: String,
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowDescriptor {
    pub name: String,
    pub batch_size: usize,
    pub nodes: Vec<WorkflowNode>,
    pub edges: Vec<WorkflowEdge>,
    pub slots: Vec<String>,
}

pub fn bundled_workflow_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("workflows")
        .join("diaolou_i2i.flow")
}

fn split_pair<'a>(rec: &Record, line: usize, raw: &'a str, sep: &str) -> Result<(&'a str, &'a str), RecordError> {
    raw.split_once(sep)
        .map(|(a, b)| (a.trim(), b.trim()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| rec.error(line, format!("expected `a {sep} b`, got `{raw}`")))
}

fn endpoint<'a>(rec: &Record, line: usize, raw: &'a str) -> Result<(&'a str, &'a str), RecordError> {
    split_pair(rec, line, raw, ".")
}

fn placeholder(value: &str) -> Option<&str> {
    value.strip_prefix('{')?.strip_suffix('}')
}

impl WorkflowDescriptor {
    pub fn load(path: impl AsRef<Path>) -> Result<WorkflowDescriptor, WorkflowError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| WorkflowError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(WorkflowDescriptor::parse(&text, path)?)
    }

    pub fn bundled() -> WorkflowDescriptor {
        WorkflowDescriptor::load(bundled_workflow_path()).expect("bundled workflow descriptor is valid")
    }

    pub fn parse(text: &str, path: &Path) -> Result<WorkflowDescriptor, RecordError> {
        let records = parse_records(text, path)?;
        let mut head: Option<(String, usize)> = None;
        let mut nodes: Vec<WorkflowNode> = Vec::new();
        let mut edges = Vec::new();
        let mut slots = Vec::new();
        let mut last = None;

        for rec in &records {
            last = Some(rec);
            let (kind, _) = rec.kind();
            match kind {
                "workflow" => {
                    rec.only_keys(&["workflow", "batch_size"])?;
                    if head.is_some() {
                        return Err(rec.error(rec.line(), "second `workflow` record"));
                    }
                    head = Some((rec.one("workflow")?.to_string(), rec.parse_num("batch_size")?));
                }
                "node" => {
                    rec.only_keys(&["node", "class", "param"])?;
                    let id = rec.one("node")?;
                    if nodes.iter().any(|n| n.id == id) {
                        return Err(rec.error(rec.line(), format!("duplicate node `{id}`")));
                    }
                    let mut params = Vec::new();
                    for f in rec.fields().iter().filter(|f| f.key == "param") {
                        let (k, v) = split_pair(rec, f.line, &f.value, "=")?;
                        params.push((k.to_string(), v.to_string()));
                    }
                    nodes.push(WorkflowNode {
                        id: id.to_string(),
                        class: rec.one("class")?.to_string(),
                        params,
                    });
                }
                "edge" => {
                    for f in rec.fields() {
                        if f.key != "edge" {
                            return Err(rec.error(f.line, format!("unknown field `{}`", f.key)));
                        }
                        let (from, to) = split_pair(rec, f.line, &f.value, "->")?;
                        let (from_node, output) = endpoint(rec, f.line, from)?;
                        let (to_node, input) = endpoint(rec, f.line, to)?;
                        edges.push((
                            f.line,
                            rec,
                            WorkflowEdge {
                                from_node: from_node.into(),
                                output: output.into(),
                                to_node: to_node.into(),
                                input: input.into(),
                            },
                        ));
                    }
                }
                "slot" => {
                    for f in rec.fields() {
                        if f.key != "slot" {
                            return Err(rec.error(f.line, format!("unknown field `{}`", f.key)));
                        }
                        slots.push((f.line, rec, f.value.clone()));
                    }
                }
                other => return Err(rec.error(rec.line(), format!("unknown record kind `{other}`"))),
            }
        }

        let Some(any) = last else {
            return Err(RecordError {
                path: path.display().to_string(),
                line: 1,
                message: "workflow has no records".into(),
            });
        };
        let (name, batch_size) = head.ok_or_else(|| any.error(1, "missing `workflow` record"))?;
        if batch_size != 4 {
            return Err(any.error(1, format!("batch_size must be 4, got {batch_size}")));
        }

        let ids: BTreeSet<&str> = nodes.iter().map(|n| n.id.as_str()).collect();
        for (line, rec, e) in &edges {
            for n in [&e.from_node, &e.to_node] {
                if !ids.contains(n.as_str()) {
                    return Err(rec.error(*line, format!("edge refers to unknown node `{n}`")));
                }
            }
        }
        let edges: Vec<WorkflowEdge> = edges.into_iter().map(|(_, _, e)| e).collect();
        if let Some(n) = cycle_member(&nodes, &edges) {
            return Err(any.error(1, format!("workflow graph has a cycle through `{n}`")));
        }

        let used: BTreeMap<&str, usize> = nodes
            .iter()
            .flat_map(|n| n.params.iter())
            .filter_map(|(_, v)| placeholder(v))
            .fold(BTreeMap::new(), |mut m, s| {
                *m.entry(s).or_default() += 1;
                m
            });
        let mut declared = Vec::new();
        for (line, rec, s) in &slots {
            if declared.contains(s) {
                return Err(rec.error(*line, format!("slot `{s}` declared twice")));
            }
            if !used.contains_key(s.as_str()) {
                return Err(rec.error(*line, format!("slot `{s}` is never used by a node")));
            }
            declared.push(s.clone());
        }
        for s in used.keys() {
            if !declared.iter().any(|d| d == s) {
                return Err(any.error(1, format!("placeholder `{{{s}}}` is not a declared slot")));
            }
        }
        for s in REQUIRED_SLOTS {
            if !declared.iter().any(|d| d == s) {
                return Err(any.error(1, format!("required slot `{s}` is missing")));
            }
        }

        Ok(WorkflowDescriptor {
            name,
            batch_size,
            nodes,
            edges,
            slots: declared,
        })
    }

    /// The backend request body: one entry per node with literal params,
    /// filled slots and `[source_node, output]` links.
    pub fn instantiate(&self, prompt: &str, base_image: &str, seed: u64) -> Value {
        let mut graph = Map::new();
        for node in &self.nodes {
            let mut inputs = Map::new();
            for (k, v) in &node.params {
                let value = match placeholder(v) {
                    Some("PROMPT") => Value::from(prompt),
                    Some("BASE_IMAGE") => Value::from(base_image),
                    Some("SEED") => Value::from(seed),
                    _ => literal(v),
                };
                inputs.insert(k.clone(), value);
            }
            for e in self.edges.iter().filter(|e| e.to_node == node.id) {
                inputs.insert(
                    e.input.clone(),
                    Value::from(vec![e.from_node.clone(), e.output.clone()]),
                );
            }
            let mut entry = Map::new();
            entry.insert("class_type".into(), Value::from(node.class.clone()));
            entry.insert("inputs".into(), Value::Object(inputs));
            graph.insert(node.id.clone(), Value::Object(entry));
        }
        let mut body = Map::new();
        body.insert("workflow".into(), Value::from(self.name.clone()));
        body.insert("prompt".into(), Value::Object(graph));
        Value::Object(body)
    }
}

fn literal(v: &str) -> Value {
    if let Ok(i) = v.parse::<i64>() {
        return Value::from(i);
    }
    match v.parse::<f64>() {
        Ok(f) if f.is_finite() => Value::from(f),
        _ => Value::from(v),
    }
}

fn cycle_member(nodes: &[WorkflowNode], edges: &[WorkflowEdge]) -> Option<String> {
    // Kahn's algorithm; whatever is left over sits on a cycle.
    let mut indeg: BTreeMap<&str, usize> = nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
    for e in edges {
        *indeg.get_mut(e.to_node.as_str())? += 1;
    }
    let mut ready: Vec<&str> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    while let Some(n) = ready.pop() {
        for e in edges.iter().filter(|e| e.from_node == n) {
            let d = indeg.get_mut(e.to_node.as_str())?;
            *d -= 1;
            if *d == 0 {
                ready.push(&e.to_node);
            }
        }
        indeg.remove(n);
    }
    indeg.keys().next().map(|n| n.to_string())
}
