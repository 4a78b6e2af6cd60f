use std::fmt::Write;

use bir_core::{Ir, NodeKind};

/// Graphviz DOT for the control-flow graph. Nodes are listed in UUID
/// order, proxies drawn dashed; edges follow the canonical edge order.
pub fn cfg_dot(ir: &Ir) -> String {
    let mut out = String::from("digraph ipcfg {\n");
    for v in ir.cfg().vertices() {
        if ir.kind_of(*v) == Some(NodeKind::ProxyBlock) {
            writeln!(out, "  \"{v}\" [style=dashed];").unwrap();
        } else {
            writeln!(out, "  \"{v}\";").unwrap();
        }
    }
    for e in ir.cfg().edges() {
        writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"];", e.source, e.target, e.label).unwrap();
    }
    out.push_str("}\n");
    out
}
