use std::collections::BTreeMap;
use std::fmt::Write;

use bir_core::auxdata::COMMENTS;
use bir_core::{Block, Ir, Module, Offset, SymbolPayload, SymbolicExpression, Uuid};

use crate::hex_preview;

pub fn dump(ir: &Ir) -> String {
    let mut out = String::new();
    writeln!(out, "ir {} version {}", ir.uuid(), ir.version()).unwrap();
    for m in ir.modules() {
        module(&mut out, ir, m);
    }
    for (label, e) in ir.aux_data().iter() {
        writeln!(out, "aux {label:?} {} {} bytes", e.type_spec, e.bytes.len()).unwrap();
    }
    out
}

fn symbol_name(ir: &Ir, id: Uuid) -> String {
    match ir.symbol(id) {
        Some(s) if !s.name.is_empty() => s.name.clone(),
        _ => id.to_string(),
    }
}

fn signed(v: i64) -> String {
    if v < 0 {
        format!("-{}", v.unsigned_abs())
    } else {
        format!("+{v}")
    }
}

pub(crate) fn render_expr(ir: &Ir, expr: &SymbolicExpression) -> String {
    match *expr {
        SymbolicExpression::SymAddrConst { symbol, offset } => format!("{}{}", symbol_name(ir, symbol), signed(offset)),
        SymbolicExpression::SymAddrAddr { minuend, subtrahend, scale, offset } => format!(
            "({}-{})/{scale}{}",
            symbol_name(ir, minuend),
            symbol_name(ir, subtrahend),
            signed(offset)
        ),
    }
}

fn module(out: &mut String, ir: &Ir, m: &Module) {
    write!(out, "module {} {:?} isa={} format={}", m.uuid, m.name, m.isa, m.file_format).unwrap();
    if let Some(b) = m.preferred_base {
        write!(out, " preferred_base={b:#x}").unwrap();
    }
    out.push('\n');

    let mut comments: BTreeMap<Uuid, Vec<(u64, String)>> = BTreeMap::new();
    if let Ok(Some(table)) = m.aux_data.get::<BTreeMap<Offset, String>>(COMMENTS) {
        for (o, text) in table {
            comments.entry(o.element).or_default().push((o.displacement, text));
        }
    }
    let print_comments = |out: &mut String, id: Uuid, indent: &str| {
        for (d, text) in comments.get(&id).into_iter().flatten() {
            writeln!(out, "{indent}+{d}: {text}").unwrap();
        }
    };

    for s in &m.sections {
        let flags: Vec<String> = s.flags.iter().map(|f| f.to_string()).collect();
        writeln!(out, "  section {} {:?} flags={}", s.uuid, s.name, flags.join(",")).unwrap();
        for bi in &s.intervals {
            let addr = bi.address.map_or("none".to_string(), |a| format!("{a:#x}"));
            writeln!(out, "    interval {} address={addr} size={} contents={}", bi.uuid, bi.size, bi.contents.len())
                .unwrap();
            print_comments(out, bi.uuid, "      ");
            for e in &bi.blocks {
                let kind = match e.block {
                    Block::Code(_) => "code",
                    Block::Data(_) => "data",
                };
                let bytes = bi.read(e.offset, e.block.size().min(bi.size.saturating_sub(e.offset)));
                writeln!(
                    out,
                    "      {kind} {} +{} size={}: {}",
                    e.block.uuid(),
                    e.offset,
                    e.block.size(),
                    hex_preview(&bytes)
                )
                .unwrap();
                print_comments(out, e.block.uuid(), "        ");
            }
            for (off, expr) in &bi.sym_exprs {
                writeln!(out, "      sym_expr +{off}: {}", render_expr(ir, expr)).unwrap();
            }
        }
    }
    for p in &m.proxy_blocks {
        writeln!(out, "  proxy {}", p.uuid).unwrap();
    }
    for s in &m.symbols {
        let payload = match s.payload {
            SymbolPayload::Value(v) => format!("= {v}"),
            SymbolPayload::Referent(r) => format!("-> {r}"),
            SymbolPayload::Undefined => "undefined".to_string(),
        };
        writeln!(out, "  symbol {} {:?} {payload}", s.uuid, s.name).unwrap();
    }
    for (label, e) in m.aux_data.iter() {
        writeln!(out, "  aux {label:?} {} {} bytes", e.type_spec, e.bytes.len()).unwrap();
    }
}
