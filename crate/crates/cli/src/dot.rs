use std::fmt::Write;

use cdt_core::model::{Cdt, CdtNode};

/// Longest label fragment before truncation.
pub const MAX_LABEL: usize = 80;

fn clip(text: &str) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= MAX_LABEL {
        return flat;
    }
    let kept: String = flat.chars().take(MAX_LABEL - 3).collect();
    format!("{}...", kept.trim_end())
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Gates label edges; each node lists its statements.
pub fn render(t: &Cdt) -> String {
    fn node(n: &CdtNode, out: &mut String) {
        let mut label = escape(n.id.as_str());
        for s in &n.statements {
            label.push_str("\\l- ");
            label.push_str(&escape(&clip(&s.text)));
        }
        if !n.statements.is_empty() {
            label.push_str("\\l");
        }
        let _ = writeln!(out, "  \"{}\" [label=\"{label}\"];", escape(n.id.as_str()));
        for b in &n.children {
            node(&b.node, out);
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\"];",
                escape(n.id.as_str()),
                escape(b.node.id.as_str()),
                escape(&clip(&b.gate.question))
            );
        }
    }
    let mut out = format!("digraph \"{}\" {{\n  node [shape=box];\n", escape(&t.group));
    node(&t.root, &mut out);
    out.push_str("}\n");
    out
}
