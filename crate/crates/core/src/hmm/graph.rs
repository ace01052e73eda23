use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{HmmError, HmmModel};

/// Emission symbols listed per node.
const TOP_SYMBOLS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolProbability {
    pub symbol: usize,
    pub name: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HmmNode {
    pub state: usize,
    pub label: String,
    pub initial: f64,
    pub emissions: Vec<SymbolProbability>,
    pub uniform_row: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmEdge {
    pub from: usize,
    pub to: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmGraph {
    pub format: String,
    pub version: u32,
    pub threshold: f64,
    pub nodes: Vec<HmmNode>,
    pub edges: Vec<HmmEdge>,
}

impl HmmGraph {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph hmm {\n  rankdir=LR;\n  node [shape=ellipse];\n");
        for n in &self.nodes {
            let em: Vec<String> = n.emissions.iter().map(|e| format!("{} {:.3}", e.name, e.p)).collect();
            let _ = writeln!(
                out,
                "  s{} [label=\"{}\\n{}\"];",
                n.state,
                dot_escape(&n.label),
                dot_escape(&em.join("\\n"))
            );
        }
        for e in &self.edges {
            let _ = writeln!(out, "  s{} -> s{} [label=\"{:.3}\"];", e.from, e.to, e.p);
        }
        out.push_str("}\n");
        out
    }

    pub fn render(&self, format: &str) -> Result<String, HmmError> {
        match format {
            "json" => Ok(self.to_json()),
            "dot" => Ok(self.to_dot()),
            other => Err(HmmError::UnknownFormat(other.into())),
        }
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('"', "\\\"")
}

/// Graph of states and transitions with probability at least `threshold`.
/// Zero-probability transitions and the rows of never-exited states (the
/// uniform convention) produce no edges.
pub fn export_hmm_graph(model: &HmmModel, threshold: f64) -> Result<HmmGraph, HmmError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(HmmError::Threshold(threshold));
    }
    model.validate()?;
    let nodes = (0..model.n)
        .map(|i| {
            let mut em: Vec<(usize, f64)> = model.b[i].iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect();
            em.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            em.truncate(TOP_SYMBOLS);
            let emissions: Vec<SymbolProbability> = em
                .into_iter()
                .map(|(k, p)| SymbolProbability {
                    symbol: k,
                    name: model.symbol_names[k].clone(),
                    p,
                })
                .collect();
            let label = if model.n == model.m && model.b[i][i] == 1.0 {
                model.symbol_names[i].clone()
            } else {
                format!("state {i}")
            };
            HmmNode {
                state: i,
                label,
                initial: model.t[i],
                emissions,
                uniform_row: model.uniform_rows.contains(&i),
            }
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..model.n {
        if model.uniform_rows.contains(&i) {
            continue;
        }
        for j in 0..model.n {
            let p = model.a[i][j];
            if p > 0.0 && p >= threshold {
                edges.push(HmmEdge { from: i, to: j, p });
            }
        }
    }
    Ok(HmmGraph {
        format: "hmm-graph".into(),
        version: 1,
        threshold,
        nodes,
        edges,
    })
}
