//! Structural diff of two IRs keyed by UUID.
//!
//! Each entity is flattened into a set of named facts (its attributes,
//! parent and position among its siblings). Entities present on one side
//! only are Added or Removed; shared entities report one Changed line per
//! differing fact.

use std::collections::BTreeMap;
use std::fmt;

use bir_core::{AuxDataTables, Block, Ir, SymbolPayload};

use crate::dump::render_expr;
use crate::hex_preview;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiffKind {
    Added,
    Removed,
    Changed,
}

impl DiffKind {
    pub fn name(self) -> &'static str {
        match self {
            DiffKind::Added => "Added",
            DiffKind::Removed => "Removed",
            DiffKind::Changed => "Changed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiffEntry {
    pub kind: DiffKind,
    /// Entity category and identity, e.g. `section <uuid>` or `edge A -> B Call`.
    pub path: String,
    /// For Changed entries: `fact old -> new`.
    pub detail: String,
}

impl fmt::Display for DiffEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.name(), self.path)?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Fact {
    Text(String),
    Bytes(Vec<u8>),
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::Text(s) => f.write_str(s),
            Fact::Bytes(b) => write!(f, "[{} bytes: {}]", b.len(), hex_preview(b)),
        }
    }
}

type Facts = BTreeMap<&'static str, Fact>;

/// Sort key (category rank, identity) to display path and facts.
type Flat = BTreeMap<(u8, String), (String, Facts)>;

fn text(v: impl ToString) -> Fact {
    Fact::Text(v.to_string())
}

fn put(flat: &mut Flat, rank: u8, key: String, path: String, facts: Facts) {
    flat.entry((rank, key)).or_insert((path, facts));
}

fn put_aux(flat: &mut Flat, owner: &str, tables: &AuxDataTables) {
    for (label, e) in tables.iter() {
        let facts = Facts::from([("type", text(&e.type_spec)), ("bytes", Fact::Bytes(e.bytes.clone()))]);
        put(flat, 10, format!("{owner}/{label}"), format!("aux {owner} {label:?}"), facts);
    }
}

fn flatten(ir: &Ir) -> Flat {
    let mut flat = Flat::new();
    put(
        &mut flat,
        0,
        String::new(),
        "ir".into(),
        Facts::from([("uuid", text(ir.uuid())), ("version", text(ir.version()))]),
    );
    for (mi, m) in ir.modules().iter().enumerate() {
        let facts = Facts::from([
            ("name", text(format!("{:?}", m.name))),
            ("isa", text(m.isa)),
            ("format", text(m.file_format)),
            ("preferred_base", text(m.preferred_base.map_or("none".into(), |b| format!("{b:#x}")))),
            ("position", text(mi)),
        ]);
        put(&mut flat, 1, m.uuid.to_string(), format!("module {}", m.uuid), facts);
        for (si, s) in m.sections.iter().enumerate() {
            let flags: Vec<String> = s.flags.iter().map(|f| f.to_string()).collect();
            let facts = Facts::from([
                ("name", text(format!("{:?}", s.name))),
                ("flags", text(flags.join(","))),
                ("parent", text(m.uuid)),
                ("position", text(si)),
            ]);
            put(&mut flat, 2, s.uuid.to_string(), format!("section {}", s.uuid), facts);
            for (ii, bi) in s.intervals.iter().enumerate() {
                let facts = Facts::from([
                    ("address", text(bi.address.map_or("none".into(), |a| format!("{a:#x}")))),
                    ("size", text(bi.size)),
                    ("contents", Fact::Bytes(bi.contents.clone())),
                    ("parent", text(s.uuid)),
                    ("position", text(ii)),
                ]);
                put(&mut flat, 3, bi.uuid.to_string(), format!("interval {}", bi.uuid), facts);
                for (bk, e) in bi.blocks.iter().enumerate() {
                    let kind = match e.block {
                        Block::Code(_) => "code",
                        Block::Data(_) => "data",
                    };
                    let facts = Facts::from([
                        ("kind", text(kind)),
                        ("offset", text(e.offset)),
                        ("size", text(e.block.size())),
                        ("parent", text(bi.uuid)),
                        ("position", text(bk)),
                    ]);
                    let id = e.block.uuid();
                    put(&mut flat, 4, id.to_string(), format!("block {id}"), facts);
                }
                for (off, expr) in &bi.sym_exprs {
                    let facts = Facts::from([("expr", text(render_expr(ir, expr))), ("raw", text(format!("{expr:?}")))]);
                    put(&mut flat, 5, format!("{}+{off:020}", bi.uuid), format!("sym_expr {}+{off}", bi.uuid), facts);
                }
            }
        }
        for (pi, p) in m.proxy_blocks.iter().enumerate() {
            let facts = Facts::from([("parent", text(m.uuid)), ("position", text(pi))]);
            put(&mut flat, 6, p.uuid.to_string(), format!("proxy {}", p.uuid), facts);
        }
        for (yi, s) in m.symbols.iter().enumerate() {
            let payload = match s.payload {
                SymbolPayload::Value(v) => format!("value {v}"),
                SymbolPayload::Referent(r) => format!("referent {r}"),
                SymbolPayload::Undefined => "undefined".into(),
            };
            let facts = Facts::from([
                ("name", text(format!("{:?}", s.name))),
                ("payload", text(payload)),
                ("parent", text(m.uuid)),
                ("position", text(yi)),
            ]);
            put(&mut flat, 7, s.uuid.to_string(), format!("symbol {}", s.uuid), facts);
        }
        put_aux(&mut flat, &m.uuid.to_string(), &m.aux_data);
    }
    for v in ir.cfg().vertices() {
        put(&mut flat, 8, v.to_string(), format!("vertex {v}"), Facts::new());
    }
    for e in ir.cfg().edges() {
        let key = format!("{} {} {:02}", e.source, e.target, e.label.code());
        put(&mut flat, 9, key, format!("edge {} -> {} {}", e.source, e.target, e.label), Facts::new());
    }
    put_aux(&mut flat, "ir", ir.aux_data());
    flat
}

/// Differences turning `a` into `b`, in a stable order. Empty exactly
/// when the two IRs are structurally equal.
pub fn diff(a: &Ir, b: &Ir) -> Vec<DiffEntry> {
    let fa = flatten(a);
    let fb = flatten(b);
    let mut keys: Vec<&(u8, String)> = fa.keys().chain(fb.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut out = Vec::new();
    for key in keys {
        match (fa.get(key), fb.get(key)) {
            (Some((path, _)), None) => {
                out.push(DiffEntry { kind: DiffKind::Removed, path: path.clone(), detail: String::new() })
            }
            (None, Some((path, _))) => {
                out.push(DiffEntry { kind: DiffKind::Added, path: path.clone(), detail: String::new() })
            }
            (Some((path, x)), Some((_, y))) => {
                for (name, vx) in x {
                    let vy = &y[name];
                    if vx != vy {
                        out.push(DiffEntry {
                            kind: DiffKind::Changed,
                            path: path.clone(),
                            detail: format!("{name} {vx} -> {vy}"),
                        });
                    }
                }
            }
            (None, None) => unreachable!(),
        }
    }
    out
}
