//! JSON and DOT encodings of a tree. Both carry enough to rebuild it exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{DecisionTree, Node, SplitRule};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct TreeJson {
    n_classes: usize,
    features: Vec<String>,
    nodes: Vec<NodeJson>,
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    id: usize,
    label: usize,
    counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    test: Option<TestJson>,
}

#[derive(Serialize, Deserialize)]
struct TestJson {
    feature: String,
    threshold: f64,
    left: usize,
    right: usize,
}

fn feature_index(names: &[String], name: &str) -> Result<usize> {
    names.iter().position(|n| n == name).ok_or_else(|| Error::Config(format!("tree tests unknown feature `{name}`")))
}

impl DecisionTree {
    pub fn to_json(&self) -> String {
        let nodes = self
            .nodes()
            .iter()
            .enumerate()
            .map(|(id, n)| NodeJson {
                id,
                label: n.label,
                counts: n.counts.clone(),
                test: n.split.map(|s| TestJson {
                    feature: self.feature_names()[s.feature].clone(),
                    threshold: s.threshold,
                    left: s.left,
                    right: s.right,
                }),
            })
            .collect();
        let doc = TreeJson { n_classes: self.n_classes(), features: self.feature_names().to_vec(), nodes };
        serde_json::to_string_pretty(&doc).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<DecisionTree> {
        let doc: TreeJson = serde_json::from_str(text)?;
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for (i, n) in doc.nodes.into_iter().enumerate() {
            if n.id != i {
                return Err(Error::Config(format!("tree node {} listed at position {i}", n.id)));
            }
            let split = match n.test {
                None => None,
                Some(t) => Some(SplitRule {
                    feature: feature_index(&doc.features, &t.feature)?,
                    threshold: t.threshold,
                    left: t.left,
                    right: t.right,
                }),
            };
            nodes.push(Node { counts: n.counts, label: n.label, split });
        }
        DecisionTree::from_parts(doc.features, doc.n_classes, nodes)
    }

    /// Graphviz rendering. Exact thresholds and counts ride along as extra attributes.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"monospace\"];\n");
        let features = serde_json::to_string(self.feature_names()).expect("names serialize");
        let _ = writeln!(out, "  graph [n_classes=\"{}\", features=\"{}\"];", self.n_classes(), escape(&features));
        for (i, n) in self.nodes().iter().enumerate() {
            let counts = n.counts.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
            match n.split {
                Some(s) => {
                    let name = &self.feature_names()[s.feature];
                    let _ = writeln!(
                        out,
                        "  n{i} [label=\"{} < {}\\ncounts [{counts}]\", feature=\"{}\", threshold=\"{}\", counts=\"{counts}\", action=\"{}\"];",
                        escape(name),
                        s.threshold,
                        escape(name),
                        s.threshold,
                        n.label
                    );
                    let _ = writeln!(out, "  n{i} -> n{} [label=\"yes\"];", s.left);
                    let _ = writeln!(out, "  n{i} -> n{} [label=\"no\"];", s.right);
                }
                None => {
                    let _ = writeln!(
                        out,
                        "  n{i} [label=\"action {}\\ncounts [{counts}]\", style=filled, fillcolor=\"#eeeeee\", counts=\"{counts}\", action=\"{}\"];",
                        n.label, n.label
                    );
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// Reads the output of [`DecisionTree::to_dot`].
    pub fn from_dot(text: &str) -> Result<DecisionTree> {
        let bad = |m: &str| Error::Config(format!("unreadable tree DOT: {m}"));
        let mut n_classes = None;
        let mut features: Option<Vec<String>> = None;
        let mut nodes: Vec<Option<Node>> = Vec::new();
        let mut tests: Vec<(usize, String, f64)> = Vec::new();
        let mut edges: Vec<(usize, usize, bool)> = Vec::new();
        for line in text.lines().map(str::trim) {
            if let Some(rest) = line.strip_prefix("graph [") {
                let attrs = attributes(rest);
                n_classes = attr(&attrs, "n_classes").and_then(|v| v.parse().ok());
                features = attr(&attrs, "features").and_then(|v| serde_json::from_str(v).ok());
            } else if let Some(rest) = line.strip_prefix('n').filter(|r| r.starts_with(|c: char| c.is_ascii_digit())) {
                let id_end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
                let id: usize = rest[..id_end].parse().map_err(|_| bad(line))?;
                let rest = rest[id_end..].trim_start();
                if let Some(target) = rest.strip_prefix("-> n") {
                    let t_end = target.find(|c: char| !c.is_ascii_digit()).unwrap_or(target.len());
                    let to: usize = target[..t_end].parse().map_err(|_| bad(line))?;
                    edges.push((id, to, target.contains("label=\"yes\"")));
                } else if let Some(body) = rest.strip_prefix('[') {
                    let attrs = attributes(body);
                    let label = attr(&attrs, "action").and_then(|v| v.parse().ok()).ok_or_else(|| bad(line))?;
                    let counts = attr(&attrs, "counts")
                        .ok_or_else(|| bad(line))?
                        .split(',')
                        .map(|c| c.parse::<usize>().map_err(|_| bad(line)))
                        .collect::<Result<Vec<_>>>()?;
                    if let Some(f) = attr(&attrs, "feature") {
                        let thr = attr(&attrs, "threshold").and_then(|v| v.parse().ok()).ok_or_else(|| bad(line))?;
                        tests.push((id, f.to_string(), thr));
                    }
                    if nodes.len() <= id {
                        nodes.resize(id + 1, None);
                    }
                    nodes[id] = Some(Node { counts, label, split: None });
                }
            }
        }
        let features = features.ok_or_else(|| bad("missing feature list"))?;
        let n_classes = n_classes.ok_or_else(|| bad("missing class count"))?;
        let mut nodes: Vec<Node> =
            nodes.into_iter().enumerate().map(|(i, n)| n.ok_or_else(|| bad(&format!("node {i} missing")))).collect::<Result<_>>()?;
        for (id, name, threshold) in tests {
            let child = |yes: bool| {
                edges.iter().find(|e| e.0 == id && e.2 == yes).map(|e| e.1).ok_or_else(|| bad("missing edge"))
            };
            nodes[id].split =
                Some(SplitRule { feature: feature_index(&features, &name)?, threshold, left: child(true)?, right: child(false)? });
        }
        DecisionTree::from_parts(features, n_classes, nodes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = if is_dot(path) { self.to_dot() } else { self.to_json() };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads JSON or, for a `.dot`/`.gv` extension, DOT.
    pub fn load(path: &Path) -> Result<DecisionTree> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tree = if is_dot(path) { DecisionTree::from_dot(&text) } else { DecisionTree::from_json(&text) };
        tree.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn is_dot(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("dot" | "gv"))
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// `key="value"` pairs of one DOT attribute list; values are unescaped.
fn attributes(body: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut chars = body.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| matches!(c, ' ' | ',' | ';' | ']')) {
            chars.next();
        }
        let key: String = std::iter::from_fn(|| chars.next_if(|&c| c != '=' && c != ' ')).collect();
        if key.is_empty() || chars.next() != Some('=') {
            break;
        }
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            while let Some(c) = chars.next() {
                match c {
                    '\\' => match chars.next() {
                        Some(n @ ('"' | '\\')) => value.push(n),
                        Some(n) => {
                            value.push('\\');
                            value.push(n);
                        }
                        None => break,
                    },
                    '"' => break,
                    c => value.push(c),
                }
            }
        } else {
            value = std::iter::from_fn(|| chars.next_if(|&c| !matches!(c, ',' | ' ' | ']'))).collect();
        }
        out.push((key, value));
    }
    out
}

fn attr<'a>(attrs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::tree::{grow, LossFunction};

    fn sample() -> DecisionTree {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64 * 0.1, (i * 13 % 11) as f64 / 3.0]).collect();
        let labels: Vec<usize> = (0..40).map(|i| (i * 7 % 5) as usize).collect();
        let d = Dataset::from_rows(vec!["speed(ego)".into(), "sep(pos(fa(ego)),pos(ego))".into()], rows, labels, 5)
            .unwrap();
        grow(&d, &LossFunction::absolute(5)).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        assert!(t.n_leaves() > 2);
        let back = DecisionTree::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_json().contains("\"feature\": \"sep(pos(fa(ego)),pos(ego))\""));
    }

    #[test]
    fn dot_round_trip() {
        let t = sample();
        let dot = t.to_dot();
        assert!(dot.starts_with("digraph tree {"));
        assert_eq!(DecisionTree::from_dot(&dot).unwrap(), t);
    }

    #[test]
    fn file_round_trip_by_extension() {
        let t = sample();
        let dir = tempfile::tempdir().unwrap();
        for name in ["t.json", "t.dot"] {
            let p = dir.path().join(name);
            t.save(&p).unwrap();
            assert_eq!(DecisionTree::load(&p).unwrap(), t);
        }
        let junk = dir.path().join("junk.json");
        std::fs::write(&junk, "{\"nodes\": 3}").unwrap();
        assert!(DecisionTree::load(&junk).unwrap_err().is_config());
    }
}
