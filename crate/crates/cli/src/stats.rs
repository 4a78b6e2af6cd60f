use std::collections::BTreeMap;
use std::fmt::Write;

use bir_core::auxdata::is_sanctioned;
use bir_core::{AuxDataTables, EdgeKind, Ir};

pub fn stats(ir: &Ir) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut code = 0;
    let mut data = 0;
    for m in ir.modules() {
        *counts.entry("sections").or_default() += m.sections.len();
        *counts.entry("proxy_blocks").or_default() += m.proxy_blocks.len();
        *counts.entry("symbols").or_default() += m.symbols.len();
        for bi in m.intervals() {
            *counts.entry("byte_intervals").or_default() += 1;
            *counts.entry("sym_exprs").or_default() += bi.sym_exprs.len();
            for e in &bi.blocks {
                if e.block.is_code() { code += 1 } else { data += 1 }
            }
        }
    }
    let get = |k: &str| counts.get(k).copied().unwrap_or(0);

    let mut out = String::new();
    writeln!(out, "modules: {}", ir.modules().len()).unwrap();
    writeln!(out, "sections: {}", get("sections")).unwrap();
    writeln!(out, "byte_intervals: {}", get("byte_intervals")).unwrap();
    writeln!(out, "code_blocks: {code}").unwrap();
    writeln!(out, "data_blocks: {data}").unwrap();
    writeln!(out, "proxy_blocks: {}", get("proxy_blocks")).unwrap();
    writeln!(out, "symbols: {}", get("symbols")).unwrap();
    writeln!(out, "sym_exprs: {}", get("sym_exprs")).unwrap();
    writeln!(out, "edges: {}", ir.cfg().edge_count()).unwrap();
    for kind in EdgeKind::ALL {
        let n = ir.cfg().edges().filter(|e| e.label.kind == kind).count();
        writeln!(out, "  {kind}: {n}").unwrap();
    }
    aux_section(&mut out, "aux_data ir", ir.aux_data());
    for m in ir.modules() {
        aux_section(&mut out, &format!("aux_data module {} {:?}", m.uuid, m.name), &m.aux_data);
    }
    out
}

fn aux_section(out: &mut String, title: &str, tables: &AuxDataTables) {
    writeln!(out, "{title}: {}", tables.len()).unwrap();
    for (label, entry) in tables.iter() {
        let flag = if is_sanctioned(label) { "" } else { " unsanctioned" };
        writeln!(out, "  {label:?}: {} bytes{flag}", entry.bytes.len()).unwrap();
    }
}
